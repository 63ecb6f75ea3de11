//! Deployment geometry, large-scale fading and the scenario config format.
//!
//! Distances are 3-D Euclidean in meters, powers in Watts. The reference
//! layout puts the BS at the origin, the IRSs on a ring of radius
//! [`CELL_RADIUS_M`] and users uniformly in discs of radius
//! [`USER_DISC_RADIUS_M`] around their serving IRS.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

pub const CELL_RADIUS_M: f64 = 300.0;
pub const USER_DISC_RADIUS_M: f64 = 30.0;
pub const NODE_HEIGHT_M: f64 = 10.0;
pub const USER_HEIGHT_M: f64 = 0.0;

/// Stream id of the user-placement generator; channel draws use other streams
/// of the same seed.
pub(crate) const STREAM_GEOMETRY: u64 = 0x6e0;

pub type Position = [f64; 3];

/// Structure of the line-of-sight component of the Rician links.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LosModel {
    /// Half-wavelength uniform linear arrays, steering from link azimuth.
    Ula,
    /// All-ones LoS matrix; geometry independent.
    AllOnes,
}

impl FromStr for LosModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ula" => Ok(LosModel::Ula),
            "ones" => Ok(LosModel::AllOnes),
            other => Err(Error::InvalidInput(format!("unknown los model `{other}`"))),
        }
    }
}

impl LosModel {
    fn as_str(self) -> &'static str {
        match self {
            LosModel::Ula => "ula",
            LosModel::AllOnes => "ones",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub n_tx: usize,
    pub n_users: usize,
    pub n_irs: usize,
    /// Reflecting elements per IRS.
    pub n_elements: usize,
    /// BS power budget (W).
    pub p_max: f64,
    /// Receiver noise power (W).
    pub noise_power: f64,
    /// Rate weight per user.
    pub weights: Vec<f64>,
    pub bs_pos: Position,
    pub irs_pos: Vec<Position>,
    pub user_pos: Vec<Position>,
    /// Path-loss exponent BS to IRS.
    pub beta_br: f64,
    /// Path-loss exponent IRS to user.
    pub beta_ru: f64,
    /// Path-loss exponent BS to user.
    pub beta_bu: f64,
    /// Channel gain at 1 m (dB).
    pub ref_gain_db: f64,
    /// Rician factor of the IRS links (dB). `inf` gives pure LoS.
    pub rician_k_db: f64,
    pub los_model: LosModel,
    pub rng_seed: u64,
}

/// Converts dBm to Watts.
pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(watt: f64) -> f64 {
    10.0 * watt.log10() + 30.0
}

/// Large-scale power gain `L0 * d^-beta` with the reference distance at 1 m.
/// Distances below 1 m are clamped to 1 m.
pub fn path_loss(distance_m: f64, exponent: f64, ref_gain_db: f64) -> Result<f64> {
    if !distance_m.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite distance {distance_m}")));
    }
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(Error::InvalidInput(format!("path-loss exponent must be positive, got {exponent}")));
    }
    if !ref_gain_db.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite reference gain {ref_gain_db}")));
    }
    let d = distance_m.max(1.0);
    Ok(10f64.powf(ref_gain_db / 10.0) * d.powf(-exponent))
}

pub fn distance(a: &Position, b: &Position) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

impl ScenarioParams {
    /// Ring deployment: IRS `l` at azimuth `2*pi*l/L` on the cell edge, users
    /// split into contiguous groups, one group per IRS, each user uniform in
    /// the disc around its IRS. With no IRS the users sit around `(R, 0)`.
    pub fn ring_layout(n_tx: usize, n_users: usize, n_irs: usize, n_elements: usize, seed: u64) -> Self {
        let irs_pos: Vec<Position> = (0..n_irs)
            .map(|l| {
                let a = 2.0 * PI * l as f64 / n_irs as f64;
                [CELL_RADIUS_M * a.cos(), CELL_RADIUS_M * a.sin(), NODE_HEIGHT_M]
            })
            .collect();

        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(STREAM_GEOMETRY);
        let user_pos = (0..n_users)
            .map(|k| {
                let center = if n_irs == 0 {
                    [CELL_RADIUS_M, 0.0, NODE_HEIGHT_M]
                } else {
                    irs_pos[k * n_irs / n_users]
                };
                // sqrt of a uniform radius gives area-uniform points
                let r = USER_DISC_RADIUS_M * rng.random::<f64>().sqrt();
                let theta = 2.0 * PI * rng.random::<f64>();
                [center[0] + r * theta.cos(), center[1] + r * theta.sin(), USER_HEIGHT_M]
            })
            .collect();

        ScenarioParams {
            n_tx,
            n_users,
            n_irs,
            n_elements,
            p_max: 1.0,
            noise_power: dbm_to_watt(-80.0),
            weights: vec![1.0; n_users],
            bs_pos: [0.0, 0.0, NODE_HEIGHT_M],
            irs_pos,
            user_pos,
            beta_br: 2.2,
            beta_ru: 2.2,
            beta_bu: 3.6,
            ref_gain_db: -30.0,
            rician_k_db: 10.0,
            los_model: LosModel::Ula,
            rng_seed: seed,
        }
    }

    /// Full-size reference scenario: 8 antennas, 8 users, 4 IRSs of 60 elements.
    pub fn full(seed: u64) -> Self {
        Self::ring_layout(8, 8, 4, 60, seed)
    }

    /// Small scenario used by the default sweeps and CI.
    pub fn desk(seed: u64) -> Self {
        Self::ring_layout(4, 4, 2, 16, seed)
    }

    /// Total number of reflecting elements `M * L`.
    pub fn n_reflecting(&self) -> usize {
        self.n_elements * self.n_irs
    }

    /// Linear Rician factor.
    pub fn rician_k(&self) -> f64 {
        10f64.powf(self.rician_k_db / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.n_tx == 0 || self.n_users == 0 || self.n_elements == 0 {
            return bad("n_tx, n_users and n_elements must be at least 1".into());
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return bad(format!("p_max must be positive, got {}", self.p_max));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return bad(format!("noise_power must be positive, got {}", self.noise_power));
        }
        if self.weights.len() != self.n_users {
            return bad(format!("{} weights for {} users", self.weights.len(), self.n_users));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("weights must be finite and non-negative".into());
        }
        if !self.weights.iter().any(|w| *w > 0.0) {
            return bad("at least one weight must be positive".into());
        }
        for (name, b) in [("beta_br", self.beta_br), ("beta_ru", self.beta_ru), ("beta_bu", self.beta_bu)] {
            if !(b > 0.0 && b.is_finite()) {
                return bad(format!("{name} must be positive, got {b}"));
            }
        }
        if !self.ref_gain_db.is_finite() {
            return bad("ref_gain_db must be finite".into());
        }
        if self.rician_k_db.is_nan() {
            return bad("rician_k_db is NaN".into());
        }
        if self.irs_pos.len() != self.n_irs {
            return bad(format!("{} IRS positions for {} IRSs", self.irs_pos.len(), self.n_irs));
        }
        if self.user_pos.len() != self.n_users {
            return bad(format!("{} user positions for {} users", self.user_pos.len(), self.n_users));
        }
        let all_pos = std::iter::once(&self.bs_pos).chain(&self.irs_pos).chain(&self.user_pos);
        if all_pos.flatten().any(|c| !c.is_finite()) {
            return bad("positions must be finite".into());
        }
        Ok(())
    }

    pub fn from_config_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_str(&text)
    }

    /// Parses the flat `key = value` scenario format.
    ///
    /// `preset` (`desk` or `full`) picks the counts, `rng_seed` the user
    /// placement; every other key overrides one field. Positions are
    /// `x,y,z` triples addressed as `irs_pos.<l>` / `user_pos.<k>`, weights a
    /// comma-separated list. Lines starting with `#` are comments.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut entries: HashMap<String, (usize, String)> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Config { line, msg: format!("expected `key = value`, got `{content}`") })?;
            let key = key.trim().to_string();
            if !is_known_key(&key) {
                return Err(Error::Config { line, msg: format!("unknown key `{key}`") });
            }
            if entries.insert(key.clone(), (line, value.trim().to_string())).is_some() {
                return Err(Error::Config { line, msg: format!("duplicate key `{key}`") });
            }
        }

        let mut take = |key: &str| entries.remove(key);

        let preset = match take("preset") {
            None => "desk".to_string(),
            Some((_, v)) => v,
        };
        let mut base = match preset.as_str() {
            "desk" => Self::desk(0),
            "full" => Self::full(0),
            other => return Err(Error::Config { line: 0, msg: format!("unknown preset `{other}`") }),
        };
        let seed = parse_entry::<u64>(take("rng_seed"))?.unwrap_or(1);
        let n_tx = parse_entry(take("n_tx"))?.unwrap_or(base.n_tx);
        let n_users = parse_entry(take("n_users"))?.unwrap_or(base.n_users);
        let n_irs = parse_entry(take("n_irs"))?.unwrap_or(base.n_irs);
        let n_elements = parse_entry(take("n_elements"))?.unwrap_or(base.n_elements);
        base = Self::ring_layout(n_tx, n_users, n_irs, n_elements, seed);

        if let Some(v) = parse_entry(take("p_max"))? {
            base.p_max = v;
        }
        if let Some(v) = parse_entry(take("noise_power"))? {
            base.noise_power = v;
        }
        if let Some(v) = parse_entry(take("beta_br"))? {
            base.beta_br = v;
        }
        if let Some(v) = parse_entry(take("beta_ru"))? {
            base.beta_ru = v;
        }
        if let Some(v) = parse_entry(take("beta_bu"))? {
            base.beta_bu = v;
        }
        if let Some(v) = parse_entry(take("ref_gain_db"))? {
            base.ref_gain_db = v;
        }
        if let Some(v) = parse_entry(take("rician_k_db"))? {
            base.rician_k_db = v;
        }
        if let Some(v) = parse_entry(take("los_model"))? {
            base.los_model = v;
        }
        if let Some((line, v)) = take("weights") {
            base.weights = parse_list(&v).map_err(|msg| Error::Config { line, msg })?;
        }
        if let Some((line, v)) = take("bs_pos") {
            base.bs_pos = parse_position(&v).map_err(|msg| Error::Config { line, msg })?;
        }

        for (key, (line, value)) in entries {
            let (field, index) = key.split_once('.').expect("indexed key");
            let index: usize = index.parse().map_err(|_| Error::Config { line, msg: format!("bad index in `{key}`") })?;
            let target = if field == "irs_pos" { &mut base.irs_pos } else { &mut base.user_pos };
            let slot = target
                .get_mut(index)
                .ok_or_else(|| Error::Config { line, msg: format!("`{key}` out of range") })?;
            *slot = parse_position(&value).map_err(|msg| Error::Config { line, msg })?;
        }

        base.validate()?;
        Ok(base)
    }

    /// Serializes to the config format. Always lists every field explicitly,
    /// so the output parses back to an identical value.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let pos = |p: &Position| format!("{:?},{:?},{:?}", p[0], p[1], p[2]);
        writeln!(s, "rng_seed = {}", self.rng_seed).unwrap();
        writeln!(s, "n_tx = {}", self.n_tx).unwrap();
        writeln!(s, "n_users = {}", self.n_users).unwrap();
        writeln!(s, "n_irs = {}", self.n_irs).unwrap();
        writeln!(s, "n_elements = {}", self.n_elements).unwrap();
        writeln!(s, "p_max = {:?}", self.p_max).unwrap();
        writeln!(s, "noise_power = {:?}", self.noise_power).unwrap();
        let w: Vec<String> = self.weights.iter().map(|w| format!("{w:?}")).collect();
        writeln!(s, "weights = {}", w.join(",")).unwrap();
        writeln!(s, "beta_br = {:?}", self.beta_br).unwrap();
        writeln!(s, "beta_ru = {:?}", self.beta_ru).unwrap();
        writeln!(s, "beta_bu = {:?}", self.beta_bu).unwrap();
        writeln!(s, "ref_gain_db = {:?}", self.ref_gain_db).unwrap();
        writeln!(s, "rician_k_db = {:?}", self.rician_k_db).unwrap();
        writeln!(s, "los_model = {}", self.los_model.as_str()).unwrap();
        writeln!(s, "bs_pos = {}", pos(&self.bs_pos)).unwrap();
        for (l, p) in self.irs_pos.iter().enumerate() {
            writeln!(s, "irs_pos.{l} = {}", pos(p)).unwrap();
        }
        for (k, p) in self.user_pos.iter().enumerate() {
            writeln!(s, "user_pos.{k} = {}", pos(p)).unwrap();
        }
        s
    }
}

const SCALAR_KEYS: &[&str] = &[
    "preset",
    "rng_seed",
    "n_tx",
    "n_users",
    "n_irs",
    "n_elements",
    "p_max",
    "noise_power",
    "weights",
    "bs_pos",
    "beta_br",
    "beta_ru",
    "beta_bu",
    "ref_gain_db",
    "rician_k_db",
    "los_model",
];

fn is_known_key(key: &str) -> bool {
    if SCALAR_KEYS.contains(&key) {
        return true;
    }
    matches!(key.split_once('.'), Some(("irs_pos" | "user_pos", _)))
}

fn parse_entry<T: FromStr>(entry: Option<(usize, String)>) -> Result<Option<T>> {
    match entry {
        None => Ok(None),
        Some((line, v)) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::Config { line, msg: format!("cannot parse `{v}`") }),
    }
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("cannot parse number `{}`", t.trim())))
        .collect()
}

fn parse_position(v: &str) -> std::result::Result<Position, String> {
    let xs = parse_list(v)?;
    <[f64; 3]>::try_from(xs.as_slice()).map_err(|_| format!("expected x,y,z, got `{v}`"))
}
