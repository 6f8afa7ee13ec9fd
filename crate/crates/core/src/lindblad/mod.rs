//! Lindblad master-equation engine: Liouvillian assembly, steady states,
//! time evolution and observables.

mod evolve;
mod krylov;
mod state;
mod steady;
mod superop;

pub use evolve::{evolve, evolve_expectations, evolve_with, EvolveOptions, Integrator};
pub use state::{expectation, phonon_distribution, DensityMatrix, PhononDistribution, NEGATIVITY_TOL, TAIL_WARN};
pub use steady::{residual, steady_state, SteadyMethod, SteadyState, RESIDUAL_TOL};
pub use superop::{liouvillian, liouvillian_graded, Grading, Superoperator};

use crate::error::Result;
use crate::models::PhysicalModel;

impl PhysicalModel {
    /// Liouvillian with the excitation-charge grading attached.
    pub fn liouvillian(&self) -> Result<Superoperator> {
        liouvillian_graded(
            &self.hamiltonian,
            &self.jumps,
            Grading {
                charges: self.charges.clone(),
                sector_symmetric: self.sector_symmetric(),
            },
        )
    }
}
