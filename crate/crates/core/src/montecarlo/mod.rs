//! Seeded stochastic simulation of random orbits and empirical verification
//! of the limit theorems against their spectral predictors.

pub mod kantorovich;
pub mod kernel;
pub mod plan;
pub mod report;
pub mod rng;
pub mod stats;

mod experiments;

pub use experiments::*;
pub use kantorovich::{kantorovich, kantorovich_two_sample};
pub use plan::{EmpiricalLaw, InitialLaw, QuenchMode, SimulationPlan, sample_initial};
pub use report::{BandCheck, ExperimentReport, SeedInfo};

/// Visit every replica's full orbit `X_0 .. X_{n-1}` through a reused
/// buffer, in replica order.
pub fn for_each_orbit(plan: &SimulationPlan, visit: impl FnMut(usize, &[f64])) {
    kernel::for_each_orbit(plan, visit)
}

/// Mean of `g(X_0, X_1)` over replicas (one transition per replica).
pub fn pair_statistic_mean(plan: &SimulationPlan, g: impl Fn(f64, f64) -> f64) -> f64 {
    kernel::pair_statistic_mean(plan, g)
}
