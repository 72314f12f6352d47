use serde::{Deserialize, Serialize};

use crate::couplings::{corrected_frequencies, Couplings, FrequencyShifts, ShiftModel};
use crate::error::Result;
use crate::params::{derive_params, DerivedParams, ExperimentConfig};
use crate::response::Resonances;

/// Everything derived from one configuration: constants, couplings and the
/// corrected frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub config: ExperimentConfig,
    pub derived: DerivedParams,
    pub couplings: Couplings,
    /// Full-model corrected frequencies.
    pub shifts: FrequencyShifts,
}

impl OperatingPoint {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let derived = derive_params(cfg)?;
        let couplings = Couplings::new(&derived, cfg.theta, cfg.phi, cfg.detuning, cfg.kappa);
        let shifts = corrected_frequencies(&derived, &couplings, cfg.detuning, cfg.kappa, ShiftModel::Full)?;
        Ok(OperatingPoint {
            config: cfg.clone(),
            derived,
            couplings,
            shifts,
        })
    }

    /// Tweezer frequencies including the static co-trapping spring only.
    pub fn static_frequencies(&self) -> (f64, f64) {
        let d = &self.derived;
        (
            (d.omega0_x * d.omega0_x + self.shifts.cs_x).sqrt(),
            (d.omega0_y * d.omega0_y + self.shifts.cs_y).sqrt(),
        )
    }

    /// Resonances for the susceptibilities. The mechanical poles sit at the
    /// static frequencies; the optical spring enters through `G` and `M_j`.
    pub fn resonances(&self) -> Resonances {
        let (omega_x, omega_y) = self.static_frequencies();
        Resonances {
            omega_x,
            omega_y,
            gamma: self.config.gas_damping,
            detuning: self.config.detuning,
            kappa: self.config.kappa,
        }
    }
}
