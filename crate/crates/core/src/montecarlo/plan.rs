//! Simulation plans, initial laws and empirical sample laws.

use std::sync::Arc;

use crate::error::{RdeError, Result};
use crate::maps::RandomSystem;
use crate::montecarlo::rng::CounterRng;
use crate::montecarlo::stats;
use crate::observable::Observable;
use crate::transfer::StationaryDensity;

/// Stream-domain tags; all draws of an experiment are pure functions of
/// `(seed, domain, replica, counter)`.
pub(crate) const DOMAIN_OMEGA: u64 = 1;
pub(crate) const DOMAIN_INIT: u64 = 2;
pub(crate) const DOMAIN_AUX: u64 = 3;
pub(crate) const DOMAIN_DITHER: u64 = 5;
pub(crate) const DOMAIN_DITHER_PAIR: u64 = 6;

/// Law of the initial point.
#[derive(Clone)]
pub enum InitialLaw {
    /// Uniform on `[0,1)`.
    Lebesgue,
    /// Inverse-CDF sampling of a cell density, uniform within cells.
    Stationary(Arc<StationaryDensity>),
    /// Deterministic start.
    Point(f64),
}

impl InitialLaw {
    pub fn label(&self) -> String {
        match self {
            InitialLaw::Lebesgue => "lebesgue".into(),
            InitialLaw::Stationary(_) => "stationary".into(),
            InitialLaw::Point(x) => format!("point({x})"),
        }
    }
}

/// Whether the map sequence is redrawn per replica or fixed by a seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuenchMode {
    Annealed,
    Quenched { omega_seed: u64 },
}

impl QuenchMode {
    pub fn label(&self) -> String {
        match self {
            QuenchMode::Annealed => "annealed".into(),
            QuenchMode::Quenched { omega_seed } => format!("quenched({omega_seed})"),
        }
    }
}

/// Everything needed to reproduce a batch of Birkhoff sums bit-for-bit.
#[derive(Clone)]
pub struct SimulationPlan {
    pub system: Arc<RandomSystem>,
    pub observable: Arc<Observable>,
    pub n: usize,
    pub replicas: usize,
    pub master_seed: u64,
    pub initial_law: InitialLaw,
    pub quench_mode: QuenchMode,
}

impl SimulationPlan {
    pub fn new(
        system: Arc<RandomSystem>,
        observable: Arc<Observable>,
        n: usize,
        replicas: usize,
        master_seed: u64,
    ) -> SimulationPlan {
        SimulationPlan {
            system,
            observable,
            n,
            replicas,
            master_seed,
            initial_law: InitialLaw::Lebesgue,
            quench_mode: QuenchMode::Annealed,
        }
    }

    pub fn with_initial_law(mut self, law: InitialLaw) -> SimulationPlan {
        self.initial_law = law;
        self
    }

    pub fn with_quench_mode(mut self, mode: QuenchMode) -> SimulationPlan {
        self.quench_mode = mode;
        self
    }

    pub fn with_n(mut self, n: usize) -> SimulationPlan {
        self.n = n;
        self
    }

    pub fn with_replicas(mut self, replicas: usize) -> SimulationPlan {
        self.replicas = replicas;
        self
    }

    /// Key of the map-choice stream for a replica. In quenched mode it is a
    /// function of the quench seed alone, shared by all replicas.
    pub(crate) fn omega_stream(&self, replica: u64) -> CounterRng {
        match self.quench_mode {
            QuenchMode::Annealed => CounterRng::new(self.master_seed)
                .derive(DOMAIN_OMEGA)
                .derive(replica),
            QuenchMode::Quenched { omega_seed } => {
                CounterRng::new(omega_seed).derive(DOMAIN_OMEGA)
            }
        }
    }

    pub(crate) fn init_stream(&self, replica: u64) -> CounterRng {
        CounterRng::new(self.master_seed)
            .derive(DOMAIN_INIT)
            .derive(replica)
    }

    pub(crate) fn aux_stream(&self, replica: u64) -> CounterRng {
        CounterRng::new(self.master_seed)
            .derive(DOMAIN_AUX)
            .derive(replica)
    }

    /// Sub-grid dither stream; owned by the replica (never by the quench
    /// seed), so quenched runs share exactly their map sequence and nothing
    /// else.
    pub(crate) fn dither_stream(&self, replica: u64) -> CounterRng {
        CounterRng::new(self.master_seed)
            .derive(DOMAIN_DITHER)
            .derive(replica)
    }

    /// Dither stream of the second coordinate in doubled-orbit runs.
    pub(crate) fn pair_dither_stream(&self, replica: u64) -> CounterRng {
        CounterRng::new(self.master_seed)
            .derive(DOMAIN_DITHER_PAIR)
            .derive(replica)
    }
}

/// Draw an initial point from the requested law using a counter stream.
pub fn sample_initial(law: &InitialLaw, stream: &CounterRng) -> f64 {
    match law {
        InitialLaw::Lebesgue => stream.uniform_at(0),
        InitialLaw::Point(x) => *x,
        InitialLaw::Stationary(h) => {
            let u = stream.uniform_at(0);
            let intra = stream.uniform_at(1);
            sample_density(h, u, intra)
        }
    }
}

/// Inverse-CDF on the cell histogram with uniform intra-cell placement.
fn sample_density(h: &StationaryDensity, u: f64, intra: f64) -> f64 {
    let cum = h.cumulative();
    let n = h.grid_size();
    // binary search for the cell with cum[i] <= u < cum[i+1]
    let mut lo = 0usize;
    let mut hi = n;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if cum[mid] <= u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let width = cum[lo + 1] - cum[lo];
    let frac = if width > 0.0 {
        ((u - cum[lo]) / width + intra).fract()
    } else {
        intra
    };
    ((lo as f64) + frac) / n as f64
}

/// A batch of real samples with lazily maintained sort order.
#[derive(Clone, Debug)]
pub struct EmpiricalLaw {
    samples: Vec<f64>,
    sorted: bool,
}

impl EmpiricalLaw {
    pub fn new(samples: Vec<f64>) -> EmpiricalLaw {
        EmpiricalLaw {
            samples,
            sorted: false,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn is_sorted(&self) -> bool {
        self.sorted
    }

    pub fn mean(&self) -> f64 {
        stats::mean(&self.samples)
    }

    pub fn variance(&self) -> f64 {
        stats::variance(&self.samples)
    }

    pub fn sort(&mut self) {
        if !self.sorted {
            self.samples
                .sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            self.sorted = true;
        }
    }

    /// Kolmogorov–Smirnov statistic against `N(0, sigma2)`.
    pub fn ks_vs_normal(&mut self, sigma2: f64) -> Result<f64> {
        if !(sigma2 > 0.0) {
            return Err(RdeError::DegenerateVariance(format!(
                "KS comparison needs sigma^2 > 0, got {sigma2}"
            )));
        }
        self.sort();
        Ok(stats::ks_statistic_sorted(&self.samples, |x| {
            stats::normal_cdf_scaled(x, sigma2)
        }))
    }

    /// Two-sample Kolmogorov–Smirnov statistic.
    pub fn ks_vs(&mut self, other: &mut EmpiricalLaw) -> f64 {
        self.sort();
        other.sort();
        stats::ks_two_sample_sorted(&self.samples, &other.samples)
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}
