//! Joint transmit beamforming and phase-shift design for a downlink in which
//! several intelligent reflecting surfaces (IRSs) assist a multi-antenna base
//! station serving single-antenna users.
//!
//! The weighted sum-rate problem is handled through its weighted-MMSE
//! reformulation and solved by block-coordinate ascent:
//!
//! 1. MMSE decoders and MSE weights in closed form ([`wmmse`]),
//! 2. transmit beamformers from the Lagrangian stationarity condition with a
//!    bisection on the power multiplier ([`beamformer`]),
//! 3. IRS phases by Riemannian conjugate gradient on the product of complex
//!    circles ([`phase_opt`]).
//!
//! [`scenario`] and [`channel`] generate the geometric Rician/Rayleigh
//! channels, [`alt_opt`] runs the outer loop and [`experiment`] drives the
//! Monte-Carlo sweeps.

pub mod alt_opt;
pub mod beamformer;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod phase_opt;
pub mod scenario;
pub mod validate;
pub mod wmmse;

pub use nalgebra::Complex;

/// Complex double used throughout.
pub type C64 = Complex<f64>;
/// Dynamically sized complex column vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dynamically sized complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

pub use alt_opt::{initialize, solve, solve_from, InitMode, IterationRecord, Solution, SolveTrace, SolverOptions};
pub use beamformer::{solve_beamforming, BisectionOptions, LagrangianContext};
pub use channel::{draw_channels, effective_channels, ChannelSet, PhaseConfig};
pub use error::{Error, Result};
pub use experiment::{run_baseline, run_experiment, ExperimentSpec, ResultRow, Scheme, SweepAxis};
pub use phase_opt::{rmcg_solve, QuadraticForm, RmcgOptions};
pub use scenario::{path_loss, LosModel, ScenarioParams};
pub use wmmse::{BeamformerSet, WmmseState};
