//! Piecewise expanding interval maps and finite i.i.d. random systems.
//!
//! A map is a finite list of monotone branches whose domains partition
//! `[0,1)`. Branches carry their derivative and inverse so transfer-operator
//! assembly can invert cell boundaries exactly, and preimage enumeration can
//! evaluate `P_T f` pointwise.

use std::fmt;
use std::sync::Arc;

use crate::error::{RdeError, Result};

/// Callable used by user-defined branches.
pub type DynFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const ENDPOINT_TOL: f64 = 1e-12;
/// Points sampled per branch when estimating `inf |T'|` of a user-defined
/// branch (the declared value must agree within 5%).
const CUSTOM_SAMPLES: usize = 1 << 12;

#[derive(Clone)]
enum BranchFn {
    Linear { slope: f64, intercept: f64 },
    Custom {
        forward: DynFn,
        derivative: DynFn,
        inverse: DynFn,
    },
}

/// One monotone branch of a piecewise map, defined on the half-open
/// interval `[domain_lo, domain_hi)`.
#[derive(Clone)]
pub struct Branch {
    domain_lo: f64,
    domain_hi: f64,
    /// Image of `domain_lo`.
    image_at_lo: f64,
    /// Continuous extension of the branch to `domain_hi`.
    image_at_hi: f64,
    /// `inf |T'|` over the branch.
    min_slope: f64,
    increasing: bool,
    func: BranchFn,
}

impl Branch {
    /// Affine branch `x -> slope * x + intercept` on `[lo, hi)`.
    pub fn linear(lo: f64, hi: f64, slope: f64, intercept: f64) -> Result<Branch> {
        if !(lo < hi) {
            return Err(RdeError::InvalidSystem(format!(
                "branch domain [{lo}, {hi}) is empty"
            )));
        }
        if slope == 0.0 || !slope.is_finite() {
            return Err(RdeError::InvalidSystem(format!(
                "branch slope {slope} must be finite and non-zero"
            )));
        }
        let at_lo = slope * lo + intercept;
        let at_hi = slope * hi + intercept;
        let branch = Branch {
            domain_lo: lo,
            domain_hi: hi,
            image_at_lo: at_lo,
            image_at_hi: at_hi,
            min_slope: slope.abs(),
            increasing: slope > 0.0,
            func: BranchFn::Linear { slope, intercept },
        };
        branch.check_image()?;
        Ok(branch)
    }

    /// User-defined branch from callable `(forward, derivative, inverse)`
    /// triples. `declared_min_slope` is cross-checked against a dense sample
    /// of `|derivative|` and must agree within 5%.
    pub fn custom(
        lo: f64,
        hi: f64,
        forward: DynFn,
        derivative: DynFn,
        inverse: DynFn,
        declared_min_slope: f64,
    ) -> Result<Branch> {
        if !(lo < hi) {
            return Err(RdeError::InvalidSystem(format!(
                "branch domain [{lo}, {hi}) is empty"
            )));
        }
        if !(declared_min_slope > 0.0) {
            return Err(RdeError::InvalidSystem(
                "declared min slope must be positive".into(),
            ));
        }
        let d0 = derivative(lo);
        let increasing = d0 > 0.0;
        let mut sampled_min = f64::INFINITY;
        for k in 0..=CUSTOM_SAMPLES {
            let x = lo + (hi - lo) * (k as f64) / (CUSTOM_SAMPLES as f64);
            let d = derivative(x);
            if d == 0.0 || (d > 0.0) != increasing {
                return Err(RdeError::InvalidSystem(format!(
                    "branch derivative changes sign or vanishes at x = {x}"
                )));
            }
            sampled_min = sampled_min.min(d.abs());
            if k % 4 == 0 {
                let y = forward(x);
                let back = inverse(y);
                if (back - x).abs() > 1e-12 {
                    return Err(RdeError::InvalidSystem(format!(
                        "inverse(forward(x)) misses x by {:e} at x = {x}",
                        (back - x).abs()
                    )));
                }
            }
        }
        let rel = (sampled_min - declared_min_slope).abs() / declared_min_slope;
        if rel > 0.05 {
            return Err(RdeError::InvalidSystem(format!(
                "declared min slope {declared_min_slope} disagrees with sampled {sampled_min} by {:.1}%",
                100.0 * rel
            )));
        }
        let branch = Branch {
            domain_lo: lo,
            domain_hi: hi,
            image_at_lo: forward(lo),
            image_at_hi: forward(hi),
            min_slope: declared_min_slope.min(sampled_min),
            increasing,
            func: BranchFn::Custom {
                forward,
                derivative,
                inverse,
            },
        };
        branch.check_image()?;
        Ok(branch)
    }

    fn check_image(&self) -> Result<()> {
        let (lo, hi) = self.image_interval();
        if lo < -1e-9 || hi > 1.0 + 1e-9 {
            return Err(RdeError::InvalidSystem(format!(
                "branch image [{lo}, {hi}] leaves [0,1]"
            )));
        }
        Ok(())
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.domain_lo, self.domain_hi)
    }

    /// Image endpoints in increasing order.
    pub fn image_interval(&self) -> (f64, f64) {
        if self.increasing {
            (self.image_at_lo, self.image_at_hi)
        } else {
            (self.image_at_hi, self.image_at_lo)
        }
    }

    pub fn min_slope(&self) -> f64 {
        self.min_slope
    }

    pub fn is_increasing(&self) -> bool {
        self.increasing
    }

    #[inline]
    pub fn forward(&self, x: f64) -> f64 {
        let y = match &self.func {
            BranchFn::Linear { slope, intercept } => slope * x + intercept,
            BranchFn::Custom { forward, .. } => forward(x),
        };
        y.clamp(0.0, 1.0)
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match &self.func {
            BranchFn::Linear { slope, .. } => *slope,
            BranchFn::Custom { derivative, .. } => derivative(x),
        }
    }

    /// Inverse of the branch on its image.
    #[inline]
    pub fn inverse(&self, y: f64) -> f64 {
        let x = match &self.func {
            BranchFn::Linear { slope, intercept } => (y - intercept) / slope,
            BranchFn::Custom { inverse, .. } => inverse(y),
        };
        x.clamp(self.domain_lo, self.domain_hi)
    }

    /// Whether `y` lies in the branch image, with the same half-open
    /// orientation as the domain.
    pub fn image_contains(&self, y: f64) -> bool {
        if self.increasing {
            self.image_at_lo <= y && y < self.image_at_hi
        } else {
            self.image_at_hi < y && y <= self.image_at_lo
        }
    }

    /// Raw affine parameters for linear branches, if this branch is linear.
    pub fn linear_params(&self) -> Option<(f64, f64)> {
        match &self.func {
            BranchFn::Linear { slope, intercept } => Some((*slope, *intercept)),
            BranchFn::Custom { .. } => None,
        }
    }
}

impl fmt::Debug for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.func {
            BranchFn::Linear { slope, intercept } => format!("{slope} x + {intercept}"),
            BranchFn::Custom { .. } => "custom".to_string(),
        };
        write!(
            f,
            "Branch([{}, {}) -> {kind}, min_slope {})",
            self.domain_lo, self.domain_hi, self.min_slope
        )
    }
}

/// A piecewise expanding map of the unit interval.
#[derive(Clone)]
pub struct PiecewiseMap {
    branches: Vec<Branch>,
    min_expansion: f64,
    label: String,
}

impl PiecewiseMap {
    /// Build from branches whose domains must partition `[0,1)`.
    pub fn new(mut branches: Vec<Branch>, label: impl Into<String>) -> Result<PiecewiseMap> {
        if branches.is_empty() {
            return Err(RdeError::InvalidSystem("map has no branches".into()));
        }
        branches.sort_by(|a, b| a.domain_lo.partial_cmp(&b.domain_lo).unwrap());
        if branches[0].domain_lo.abs() > ENDPOINT_TOL {
            return Err(RdeError::InvalidSystem(format!(
                "first branch starts at {} instead of 0",
                branches[0].domain_lo
            )));
        }
        let last_hi = branches.last().unwrap().domain_hi;
        if (last_hi - 1.0).abs() > ENDPOINT_TOL {
            return Err(RdeError::InvalidSystem(format!(
                "last branch ends at {last_hi} instead of 1"
            )));
        }
        for pair in branches.windows(2) {
            let gap = pair[1].domain_lo - pair[0].domain_hi;
            if gap.abs() > ENDPOINT_TOL {
                return Err(RdeError::InvalidSystem(format!(
                    "branch domains do not partition [0,1): gap of {gap:e} at {}",
                    pair[0].domain_hi
                )));
            }
        }
        let min_expansion = branches
            .iter()
            .map(|b| b.min_slope)
            .fold(f64::INFINITY, f64::min);
        Ok(PiecewiseMap {
            branches,
            min_expansion,
            label: label.into(),
        })
    }

    /// `x -> beta * x mod 1` with integer `beta >= 2`. Preserves Lebesgue.
    pub fn beta(beta: u32) -> Result<PiecewiseMap> {
        if beta < 2 {
            return Err(RdeError::InvalidSystem(format!(
                "integer beta map needs beta >= 2, got {beta}"
            )));
        }
        let b = beta as f64;
        let branches = (0..beta)
            .map(|i| Branch::linear(i as f64 / b, (i + 1) as f64 / b, b, -(i as f64)))
            .collect::<Result<Vec<_>>>()?;
        PiecewiseMap::new(branches, format!("beta{beta}"))
    }

    /// `x -> beta * x + offset mod 1` with real `beta > 1`.
    pub fn linear_mod1(beta: f64, offset: f64) -> Result<PiecewiseMap> {
        if !(beta > 1.0) {
            return Err(RdeError::InvalidSystem(format!(
                "linear mod-1 map needs slope > 1, got {beta}"
            )));
        }
        if !(0.0..1.0).contains(&offset) {
            return Err(RdeError::InvalidSystem(format!(
                "linear mod-1 offset must lie in [0,1), got {offset}"
            )));
        }
        // cut points where beta*x + offset crosses an integer
        let mut cuts = vec![0.0];
        let mut m = offset.floor() as i64 + 1;
        loop {
            let x = (m as f64 - offset) / beta;
            if x >= 1.0 - ENDPOINT_TOL {
                break;
            }
            if x > ENDPOINT_TOL {
                cuts.push(x);
            }
            m += 1;
        }
        cuts.push(1.0);
        let mut branches = Vec::with_capacity(cuts.len() - 1);
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mid = 0.5 * (lo + hi);
            let k = (beta * mid + offset).floor();
            branches.push(Branch::linear(lo, hi, beta, offset - k)?);
        }
        PiecewiseMap::new(branches, format!("linear_mod1({beta},{offset})"))
    }

    /// Build from explicit affine branches `(lo, hi, slope, intercept)`.
    pub fn from_linear_branches(
        specs: &[(f64, f64, f64, f64)],
        label: impl Into<String>,
    ) -> Result<PiecewiseMap> {
        let branches = specs
            .iter()
            .map(|&(lo, hi, slope, intercept)| Branch::linear(lo, hi, slope, intercept))
            .collect::<Result<Vec<_>>>()?;
        PiecewiseMap::new(branches, label)
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// `inf |T'|` over the whole map.
    pub fn min_expansion(&self) -> f64 {
        self.min_expansion
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Index of the branch whose domain contains `x in [0,1)`.
    #[inline]
    pub fn branch_index(&self, x: f64) -> usize {
        // branches are sorted by domain_lo
        let mut lo = 0usize;
        let mut hi = self.branches.len();
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.branches[mid].domain_lo <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Evaluate the map. `x = 1` uses the last branch's continuous extension.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(RdeError::Domain(format!("eval point {x} outside [0,1]")));
        }
        if x >= 1.0 {
            return Ok(self.branches.last().unwrap().forward(1.0));
        }
        Ok(self.branches[self.branch_index(x)].forward(x))
    }

    /// All preimages of `x` with their derivative magnitudes: one entry per
    /// branch whose image contains `x`.
    pub fn preimages(&self, x: f64) -> Result<Vec<(f64, f64)>> {
        if !(0.0..=1.0).contains(&x) {
            return Err(RdeError::Domain(format!(
                "preimage point {x} outside [0,1]"
            )));
        }
        let mut out = Vec::with_capacity(self.branches.len());
        for b in &self.branches {
            if b.image_contains(x) {
                let y = b.inverse(x);
                out.push((y, b.derivative(y).abs()));
            }
        }
        Ok(out)
    }

    /// Checks `sum over preimages of 1/|T'| = 1` on a dense grid, which for a
    /// nonsingular map is equivalent to `T` preserving Lebesgue measure.
    pub fn preserves_lebesgue(&self, tol: f64) -> bool {
        let samples = 257;
        for k in 0..samples {
            // avoid branch endpoints where the preimage count may be ambiguous
            let x = (k as f64 + 0.382) / samples as f64;
            let total: f64 = match self.preimages(x) {
                Ok(pre) => pre.iter().map(|(_, d)| 1.0 / d).sum(),
                Err(_) => return false,
            };
            if (total - 1.0).abs() > tol {
                return false;
            }
        }
        true
    }
}

impl fmt::Debug for PiecewiseMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PiecewiseMap")
            .field("label", &self.label)
            .field("branches", &self.branches)
            .finish()
    }
}

/// A finite family of maps with an i.i.d. driving law.
#[derive(Clone)]
pub struct RandomSystem {
    maps: Vec<PiecewiseMap>,
    probs: Vec<f64>,
    mean_expansion_coeff: f64,
    label: String,
}

impl RandomSystem {
    pub fn new(maps: Vec<PiecewiseMap>, probs: Vec<f64>) -> Result<RandomSystem> {
        if maps.is_empty() {
            return Err(RdeError::InvalidSystem("system has no maps".into()));
        }
        if maps.len() != probs.len() {
            return Err(RdeError::InvalidSystem(format!(
                "{} maps but {} probabilities",
                maps.len(),
                probs.len()
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(RdeError::InvalidSystem(format!(
                "probabilities sum to {sum}"
            )));
        }
        if let Some(p) = probs.iter().find(|&&p| !(p > 0.0)) {
            return Err(RdeError::InvalidSystem(format!(
                "every map probability must be > 0, got {p}"
            )));
        }
        let mean_expansion_coeff = maps
            .iter()
            .zip(probs.iter())
            .map(|(m, p)| p / m.min_expansion())
            .sum();
        let label = maps
            .iter()
            .map(|m| m.label().to_string())
            .collect::<Vec<_>>()
            .join("+");
        Ok(RandomSystem {
            maps,
            probs,
            mean_expansion_coeff,
            label,
        })
    }

    /// One-map system with probability 1.
    pub fn single(map: PiecewiseMap) -> RandomSystem {
        RandomSystem::new(vec![map], vec![1.0]).expect("single map system is always valid")
    }

    pub fn maps(&self) -> &[PiecewiseMap] {
        &self.maps
    }

    pub fn map(&self, index: usize) -> &PiecewiseMap {
        &self.maps[index]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_maps(&self) -> usize {
        self.maps.len()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The mean-expansion coefficient `sum p / inf|T'|`; values `< 1` are the
    /// sufficient condition for a spectral gap of the annealed operator.
    pub fn expansion_in_mean(&self) -> f64 {
        self.mean_expansion_coeff
    }

    /// Apply the map selected by `omega_index` to `x`.
    pub fn random_orbit_step(&self, x: f64, omega_index: usize) -> Result<f64> {
        let map = self.maps.get(omega_index).ok_or_else(|| {
            RdeError::Index(format!(
                "omega index {omega_index} out of range for {} maps",
                self.maps.len()
            ))
        })?;
        map.eval(x)
    }

    /// True when every map in the family preserves Lebesgue measure.
    pub fn preserves_lebesgue(&self, tol: f64) -> bool {
        self.maps.iter().all(|m| m.preserves_lebesgue(tol))
    }
}

impl fmt::Debug for RandomSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RandomSystem")
            .field("label", &self.label)
            .field("probs", &self.probs)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::rng::CounterRng;

    fn doubling() -> PiecewiseMap {
        PiecewiseMap::beta(2).unwrap()
    }

    #[test]
    fn eval_examples() {
        let d = doubling();
        assert!((d.eval(0.3).unwrap() - 0.6).abs() < 1e-15);
        assert!((d.eval(0.75).unwrap() - 0.5).abs() < 1e-15);
        let b3 = PiecewiseMap::beta(3).unwrap();
        assert!((b3.eval(0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eval_endpoint_uses_last_branch_extension() {
        let d = doubling();
        // 2*1 - 1 = 1 on the last branch
        assert!((d.eval(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(d.eval(1.0 + 1e-9).is_err());
        assert!(d.eval(-0.1).is_err());
    }

    #[test]
    fn preimage_examples() {
        let d = doubling();
        let pre = d.preimages(0.5).unwrap();
        assert_eq!(pre.len(), 2);
        assert!((pre[0].0 - 0.25).abs() < 1e-15 && (pre[0].1 - 2.0).abs() < 1e-15);
        assert!((pre[1].0 - 0.75).abs() < 1e-15 && (pre[1].1 - 2.0).abs() < 1e-15);

        let b3 = PiecewiseMap::beta(3).unwrap();
        let pre = b3.preimages(0.0).unwrap();
        assert_eq!(pre.len(), 3);
        for (k, (y, d)) in pre.iter().enumerate() {
            assert!((y - k as f64 / 3.0).abs() < 1e-15);
            assert!((d - 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn preimages_with_partial_branch_images() {
        // branches 2x on [0,1/2), 4x-2 on [1/2,3/4), and 2x-3/2 on [3/4,1);
        // the last branch has image [0,1/2), so x = 0.9 has two preimages.
        let map = PiecewiseMap::from_linear_branches(
            &[
                (0.0, 0.5, 2.0, 0.0),
                (0.5, 0.75, 4.0, -2.0),
                (0.75, 1.0, 2.0, -1.5),
            ],
            "partial",
        )
        .unwrap();
        let pre = map.preimages(0.9).unwrap();
        assert_eq!(pre.len(), 2);
        assert!((pre[0].0 - 0.45).abs() < 1e-15 && (pre[0].1 - 2.0).abs() < 1e-15);
        assert!((pre[1].0 - 0.725).abs() < 1e-15 && (pre[1].1 - 4.0).abs() < 1e-15);
        // x = 0.2 is hit by all three branches
        assert_eq!(map.preimages(0.2).unwrap().len(), 3);
    }

    #[test]
    fn expansion_in_mean_examples() {
        let sys = RandomSystem::new(
            vec![PiecewiseMap::beta(2).unwrap(), PiecewiseMap::beta(3).unwrap()],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert!((sys.expansion_in_mean() - 5.0 / 12.0).abs() < 1e-15);

        let single = RandomSystem::single(doubling());
        assert!((single.expansion_in_mean() - 0.5).abs() < 1e-15);

        let slow = PiecewiseMap::linear_mod1(1.25, 0.0).unwrap();
        let sys = RandomSystem::new(vec![slow, PiecewiseMap::beta(4).unwrap()], vec![0.9, 0.1]).unwrap();
        assert!((sys.expansion_in_mean() - 0.745).abs() < 1e-15);
    }

    #[test]
    fn orbit_step_examples() {
        let sys = RandomSystem::new(
            vec![PiecewiseMap::beta(2).unwrap(), PiecewiseMap::beta(3).unwrap()],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert!((sys.random_orbit_step(0.4, 1).unwrap() - 0.2).abs() < 1e-12);
        assert!((sys.random_orbit_step(0.4, 0).unwrap() - 0.8).abs() < 1e-12);
        assert!((sys.random_orbit_step(0.0, 0).unwrap() - 0.0).abs() < 1e-15);
        assert!(sys.random_orbit_step(0.4, 2).is_err());
    }

    #[test]
    fn probability_vector_is_validated() {
        let maps = vec![PiecewiseMap::beta(2).unwrap(), PiecewiseMap::beta(3).unwrap()];
        assert!(RandomSystem::new(maps.clone(), vec![0.6, 0.6]).is_err());
        // p = 0 is rejected even though it sums to 1
        assert!(RandomSystem::new(maps, vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn partition_property_random_points() {
        let maps = [
            PiecewiseMap::beta(3).unwrap(),
            PiecewiseMap::linear_mod1(2.5, 0.3).unwrap(),
            PiecewiseMap::from_linear_branches(
                &[(0.0, 0.5, 1.5, 0.0), (0.5, 1.0, 2.0, -1.0)],
                "nonsurjective",
            )
            .unwrap(),
        ];
        let rng = CounterRng::new(7);
        for map in &maps {
            for k in 0..10_000u64 {
                let x = rng.uniform_at(k);
                let hits = map
                    .branches()
                    .iter()
                    .filter(|b| {
                        let (lo, hi) = b.domain();
                        lo <= x && x < hi
                    })
                    .count();
                assert_eq!(hits, 1, "x = {x} covered by {hits} branches");
            }
        }
    }

    #[test]
    fn inverse_and_preimage_consistency() {
        let map = PiecewiseMap::linear_mod1(2.7, 0.15).unwrap();
        let rng = CounterRng::new(11);
        for b in map.branches() {
            let (ilo, ihi) = b.image_interval();
            for k in 0..1000u64 {
                let y = ilo + (ihi - ilo) * rng.uniform_at(k);
                if !b.image_contains(y) {
                    continue;
                }
                let x = b.inverse(y);
                assert!((b.forward(x) - y).abs() < 1e-10);
            }
        }
        for k in 0..1000u64 {
            let x = rng.uniform_at(1_000_000 + k);
            let pre = map.preimages(x).unwrap();
            let expected = map
                .branches()
                .iter()
                .filter(|b| b.image_contains(x))
                .count();
            assert_eq!(pre.len(), expected);
            for (y, _) in pre {
                let idx = map.branch_index(y.min(1.0 - 1e-15));
                assert!((map.branches()[idx].forward(y) - x).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn integer_beta_maps_preserve_lebesgue() {
        for beta in 2..=6u32 {
            let map = PiecewiseMap::beta(beta).unwrap();
            assert!(map.preserves_lebesgue(1e-12));
        }
        // a non-surjective map does not
        let map = PiecewiseMap::from_linear_branches(
            &[(0.0, 0.5, 1.5, 0.0), (0.5, 1.0, 2.0, -1.0)],
            "nonsurjective",
        )
        .unwrap();
        assert!(!map.preserves_lebesgue(1e-9));
    }

    #[test]
    fn custom_branch_validates_declared_slope() {
        // forward x -> x^2/2 + 3x/2 has derivative in [1.5, 2.5] on [0,1]
        let forward: DynFn = Arc::new(|x| 0.5 * x * x + 1.5 * x);
        let derivative: DynFn = Arc::new(|x| x + 1.5);
        let inverse: DynFn = Arc::new(|y| (2.25_f64 + 2.0 * y).sqrt() - 1.5);
        // a wildly wrong declaration is rejected
        assert!(Branch::custom(
            0.0,
            1.0,
            forward.clone(),
            derivative.clone(),
            inverse.clone(),
            2.0
        )
        .is_err());
        // map is not into [0,1] (forward(1) = 2), so even a correct slope fails
        assert!(Branch::custom(0.0, 1.0, forward, derivative, inverse, 1.5).is_err());

        // a correct nonlinear branch on [0, 1/2) into [0,1)
        let forward: DynFn = Arc::new(|x| 2.0 * x * x + x);
        let derivative: DynFn = Arc::new(|x| 4.0 * x + 1.0);
        let inverse: DynFn = Arc::new(|y| 0.25 * ((1.0_f64 + 8.0 * y).sqrt() - 1.0));
        let b = Branch::custom(0.0, 0.5, forward, derivative, inverse, 1.0).unwrap();
        assert!((b.forward(0.25) - 0.375).abs() < 1e-15);
        assert!((b.inverse(0.375) - 0.25).abs() < 1e-12);
    }
}
