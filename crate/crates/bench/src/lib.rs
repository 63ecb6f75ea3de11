//! Fixed benchmark instances built from the scenario presets.

use mirs_core::channel::draw_channels_seeded;
use mirs_core::wmmse::WmmseState;
use mirs_core::*;

/// One operating point of the outer loop, frozen for timing the sub-solvers.
pub struct Fixture {
    pub params: ScenarioParams,
    pub channels: ChannelSet,
    pub hbar: Vec<CVector>,
    pub beamformers: BeamformerSet,
    pub phases: PhaseConfig,
    pub state: WmmseState,
}

impl Fixture {
    /// Desk-scale layout with `n_elements` per IRS, at the all-ones phase
    /// start and a matched-filter beamformer.
    pub fn new(n_tx: usize, n_users: usize, n_irs: usize, n_elements: usize) -> Fixture {
        let params = ScenarioParams::ring_layout(n_tx, n_users, n_irs, n_elements, 7);
        let channels = draw_channels_seeded(&params).expect("preset parameters are valid");
        let phases = PhaseConfig::for_channels(&channels);
        let hbar = effective_channels(&channels, &phases).expect("consistent dimensions");
        let beamformers = BeamformerSet::matched_filter(&hbar, params.p_max);
        let state = WmmseState::optimal(&hbar, &beamformers, params.noise_power).expect("positive noise");
        Fixture { params, channels, hbar, beamformers, phases, state }
    }

    pub fn quadratic_form(&self) -> QuadraticForm {
        QuadraticForm::assemble(
            &self.channels,
            &self.beamformers,
            &self.state.decoders,
            &self.state.weights,
            &self.params.weights,
            self.params.noise_power,
        )
        .expect("consistent dimensions")
    }
}
