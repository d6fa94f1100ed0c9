//! Spectral predictors for the limit theorems: Green–Kubo variance,
//! leading-eigenvalue derivatives, log-MGF tabulation with Legendre
//! transform, aperiodicity scans, martingale coboundaries, and the
//! doubled-system variance.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{RdeError, Result};
use crate::maps::RandomSystem;
use crate::numeric::golden_section_max;
pub use crate::observable::{Observable, Term, TermKind};
use crate::transfer::{
    annealed_operator, doubled_operator, leading_eigenvalue, spectral_modulus,
    stationary_density, twist_operator, DiscretizedOperator, StationaryDensity, DEFAULT_MAX_ITER,
    DEFAULT_POWER_TOL,
};

/// Correlations are truncated once `|c_n|` stays below this floor for
/// [`CORRELATION_QUIET_RUN`] consecutive terms.
const CORRELATION_FLOOR: f64 = 1e-14;
const CORRELATION_QUIET_RUN: usize = 5;
/// Default cap for the correlation series.
pub const DEFAULT_CORRELATION_CAP: usize = 200;
/// Finite-difference stencil half-width for eigenvalue derivatives.
const STENCIL_DELTA: f64 = 1e-3;
/// Tolerance on centered observables: `|∫ phi dmu|` must be below this.
const CENTERING_TOL: f64 = 1e-10;
/// Variances at or below this level are treated as degenerate (coboundary).
pub const DEGENERATE_SIGMA2_TOL: f64 = 1e-6;

/// Green–Kubo variance with its correlation series.
#[derive(Clone, Debug)]
pub struct VarianceEstimate {
    pub sigma2: f64,
    /// `c_0 = ∫ phi^2 dmu` followed by `c_n = ∫ phi U^n phi dmu`.
    pub correlation_tail: Vec<f64>,
    pub truncation_n: usize,
    /// Geometric extrapolation of the discarded mass.
    pub tail_bound: f64,
    /// False when the series had not entered geometric decay by the cap.
    pub converged: bool,
}

impl VarianceEstimate {
    /// CSV with columns `n,correlation`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "n,correlation")?;
        for (n, c) in self.correlation_tail.iter().enumerate() {
            writeln!(out, "{n},{c}")?;
        }
        Ok(())
    }
}

fn require_centered(phi: &Observable, h: &StationaryDensity) -> Result<()> {
    let mean = phi.mean_against(h);
    if mean.abs() > CENTERING_TOL {
        return Err(RdeError::Precondition(format!(
            "observable is not centered: ∫ phi dmu = {mean:e}"
        )));
    }
    Ok(())
}

/// Shared correlation-series accumulator: `c_0` is given, `advance` maps the
/// current vector to the next one, `read` turns a vector into `c_n`.
fn correlation_sum(
    c0: f64,
    mut vector: Vec<f64>,
    mut advance: impl FnMut(&[f64], &mut [f64]),
    read: impl Fn(&[f64]) -> f64,
    n_max: usize,
) -> VarianceEstimate {
    let mut correlations = vec![c0];
    let mut scratch = vec![0.0; vector.len()];
    let mut quiet = 0usize;
    let mut converged = false;
    for _ in 1..=n_max {
        advance(&vector, &mut scratch);
        std::mem::swap(&mut vector, &mut scratch);
        let c = read(&vector);
        correlations.push(c);
        if c.abs() < CORRELATION_FLOOR {
            quiet += 1;
            if quiet >= CORRELATION_QUIET_RUN {
                converged = true;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    let truncation_n = correlations.len() - 1;
    let tail_bound = match correlations.as_slice() {
        [.., a, b] if a.abs() > 0.0 && b.abs() < a.abs() => {
            let r = b.abs() / a.abs();
            b.abs() * r / (1.0 - r)
        }
        _ => {
            if converged {
                CORRELATION_FLOOR
            } else {
                f64::INFINITY
            }
        }
    };
    let sigma2 = (correlations[0] + 2.0 * correlations[1..].iter().sum::<f64>()).max(0.0);
    VarianceEstimate {
        sigma2,
        correlation_tail: correlations,
        truncation_n,
        tail_bound,
        converged,
    }
}

/// Green–Kubo variance against a prebuilt annealed operator and density.
pub fn green_kubo_with(
    op: &DiscretizedOperator,
    h: &StationaryDensity,
    phi: &Observable,
    n_max: usize,
) -> Result<VarianceEstimate> {
    if op.is_twisted() || op.is_doubled() {
        return Err(RdeError::Precondition(
            "Green–Kubo needs the untwisted 1D annealed operator".into(),
        ));
    }
    require_centered(phi, h)?;
    let n = op.grid_size();
    let phi_bar = phi.cell_averages(n);
    let phi_sq = phi.cell_averages_of_square(n);
    let c0 = phi_sq
        .iter()
        .zip(h.values())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / n as f64;
    let start: Vec<f64> = phi_bar
        .iter()
        .zip(h.values())
        .map(|(a, b)| a * b)
        .collect();
    let advance = |v: &[f64], out: &mut [f64]| op.apply_real(v, out).expect("untwisted");
    let read = |v: &[f64]| {
        v.iter()
            .zip(phi_bar.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    Ok(correlation_sum(c0, start, advance, read, n_max))
}

/// Green–Kubo asymptotic variance
/// `sigma^2 = ∫ phi^2 dmu + 2 sum_n ∫ phi U^n phi dmu`.
pub fn green_kubo_variance(
    system: &RandomSystem,
    phi: &Observable,
    n: usize,
    n_max: usize,
) -> Result<VarianceEstimate> {
    let op = annealed_operator(system, n)?;
    let h = stationary_density(&op, DEFAULT_POWER_TOL, DEFAULT_MAX_ITER)?;
    green_kubo_with(&op, &h, phi, n_max)
}

fn real_eigenvalue(op: &DiscretizedOperator, tol: f64) -> Result<f64> {
    let lambda = leading_eigenvalue(op, tol)?;
    if lambda.im.abs() > 1e-9 {
        return Err(RdeError::NonConvergence(format!(
            "leading eigenvalue has imaginary part {:e} for a real twist",
            lambda.im
        )));
    }
    Ok(lambda.re)
}

/// First two derivatives of `theta -> lambda(theta)` at 0, by central
/// differences on the stencil `{0, ±delta, ±2delta}` with Richardson
/// extrapolation.
pub fn variance_via_eigenvalue(
    system: &RandomSystem,
    phi: &Observable,
    n: usize,
) -> Result<(f64, f64)> {
    let base = annealed_operator(system, n)?;
    let h = stationary_density(&base, DEFAULT_POWER_TOL, DEFAULT_MAX_ITER)?;
    require_centered(phi, &h)?;
    let tol = 1e-14;
    let d = STENCIL_DELTA;
    // lambda(0) goes through the same twist path as lambda(±delta) so solver
    // bias cancels in the difference stencils
    let lambda_at = |theta: f64| -> Result<f64> {
        let op = twist_operator(&base, phi, Complex64::new(theta, 0.0))?;
        real_eigenvalue(&op, tol)
    };
    let l0 = lambda_at(0.0)?;
    let lp1 = lambda_at(d)?;
    let lm1 = lambda_at(-d)?;
    let lp2 = lambda_at(2.0 * d)?;
    let lm2 = lambda_at(-2.0 * d)?;
    let d1_h = (lp1 - lm1) / (2.0 * d);
    let d1_2h = (lp2 - lm2) / (4.0 * d);
    let first = (4.0 * d1_h - d1_2h) / 3.0;
    let d2_h = (lp1 - 2.0 * l0 + lm1) / (d * d);
    let d2_2h = (lp2 - 2.0 * l0 + lm2) / (4.0 * d * d);
    let second = (4.0 * d2_h - d2_2h) / 3.0;
    Ok((first, second))
}

/// One evaluation of the rate function.
#[derive(Clone, Copy, Debug)]
pub struct RateEval {
    pub c: f64,
    pub theta_star: f64,
    /// Local curvature `Lambda''(theta_star)`.
    pub curvature: f64,
}

/// Tabulated log moment generating function with a Legendre-transform
/// evaluator.
#[derive(Clone, Debug)]
pub struct RateFunction {
    theta_grid: Vec<f64>,
    logmgf: Vec<f64>,
    eps_max: f64,
    sigma2: f64,
}

impl RateFunction {
    pub fn theta_grid(&self) -> &[f64] {
        &self.theta_grid
    }

    pub fn logmgf(&self) -> &[f64] {
        &self.logmgf
    }

    /// Largest slope representable on the grid; the Legendre supremum is
    /// interior only below this.
    pub fn eps_max(&self) -> f64 {
        self.eps_max
    }

    /// Green–Kubo variance of the underlying observable (used for the
    /// quadratic approximation of the rate function).
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `c(eps) = sup_theta [theta eps - Lambda(theta)]` over the grid with
    /// golden-section refinement on a local quadratic interpolant.
    pub fn eval(&self, eps: f64) -> Result<RateEval> {
        if eps.abs() >= self.eps_max {
            return Err(RdeError::Domain(format!(
                "eps = {eps} outside the rate function domain (|eps| < {})",
                self.eps_max
            )));
        }
        let g = |i: usize| self.theta_grid[i] * eps - self.logmgf[i];
        let mut j = 0usize;
        for i in 1..self.theta_grid.len() {
            if g(i) > g(j) {
                j = i;
            }
        }
        let j = j.clamp(1, self.theta_grid.len() - 2);
        let (t0, t1, t2) = (
            self.theta_grid[j - 1],
            self.theta_grid[j],
            self.theta_grid[j + 1],
        );
        let (f0, f1, f2) = (self.logmgf[j - 1], self.logmgf[j], self.logmgf[j + 1]);
        // Lagrange quadratic through the three points around the argmax
        let lambda_tilde = move |t: f64| {
            f0 * (t - t1) * (t - t2) / ((t0 - t1) * (t0 - t2))
                + f1 * (t - t0) * (t - t2) / ((t1 - t0) * (t1 - t2))
                + f2 * (t - t0) * (t - t1) / ((t2 - t0) * (t2 - t1))
        };
        let objective = move |t: f64| t * eps - lambda_tilde(t);
        let (theta_star, c) = golden_section_max(objective, t0, t2, 60);
        let dt = t1 - t0;
        let curvature = ((f0 - 2.0 * f1 + f2) / (dt * dt)).max(0.0);
        Ok(RateEval {
            c: c.max(0.0),
            theta_star,
            curvature,
        })
    }

    /// CSV with columns `theta,logmgf`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "theta,logmgf")?;
        for (t, l) in self.theta_grid.iter().zip(self.logmgf.iter()) {
            writeln!(out, "{t},{l}")?;
        }
        Ok(())
    }
}

/// Default twist range `0.5 / sup |phi|`.
pub fn default_theta_max(phi: &Observable) -> f64 {
    0.5 / phi.sup_bound().max(1e-12)
}

/// Tabulate `Lambda(theta) = log lambda(theta)` on a symmetric grid and wrap
/// it as a rate function.
pub fn rate_function(
    system: &RandomSystem,
    phi: &Observable,
    n: usize,
    theta_max: f64,
    grid_points: usize,
) -> Result<RateFunction> {
    if !(theta_max > 0.0) {
        return Err(RdeError::Domain("theta_max must be positive".into()));
    }
    let base = annealed_operator(system, n)?;
    let h = stationary_density(&base, DEFAULT_POWER_TOL, DEFAULT_MAX_ITER)?;
    require_centered(phi, &h)?;
    let gk = green_kubo_with(&base, &h, phi, DEFAULT_CORRELATION_CAP)?;
    if gk.sigma2 <= DEGENERATE_SIGMA2_TOL {
        return Err(RdeError::DegenerateVariance(format!(
            "rate function needs sigma^2 > 0, Green–Kubo gives {}",
            gk.sigma2
        )));
    }
    let points = grid_points.max(5) | 1; // odd, so theta = 0 is on the grid
    let thetas: Vec<f64> = (0..points)
        .map(|i| -theta_max + 2.0 * theta_max * i as f64 / (points - 1) as f64)
        .collect();
    let logmgf: Vec<f64> = thetas
        .par_iter()
        .map(|&theta| -> Result<f64> {
            if theta == 0.0 {
                return Ok(0.0);
            }
            let op = twist_operator(&base, phi, Complex64::new(theta, 0.0))?;
            let lambda = real_eigenvalue(&op, 1e-13).map_err(|e| {
                RdeError::NonConvergence(format!("lambda({theta}) failed: {e}"))
            })?;
            if lambda <= 0.0 {
                return Err(RdeError::NonConvergence(format!(
                    "lambda({theta}) = {lambda} is not positive"
                )));
            }
            Ok(lambda.ln())
        })
        .collect::<Result<Vec<f64>>>()?;
    // convexity of the tabulated log-MGF
    for w in logmgf.windows(3) {
        if w[0] - 2.0 * w[1] + w[2] < -1e-8 {
            return Err(RdeError::NonConvergence(
                "tabulated log-MGF is not convex; eigenvalue solves are unreliable at this twist range"
                    .into(),
            ));
        }
    }
    let k = logmgf.len();
    let eps_max = (logmgf[k - 1] - logmgf[k - 2]) / (thetas[k - 1] - thetas[k - 2]);
    Ok(RateFunction {
        theta_grid: thetas,
        logmgf,
        eps_max,
        sigma2: gk.sigma2,
    })
}

/// One point of an aperiodicity scan.
#[derive(Clone, Copy, Debug)]
pub struct ScanPoint {
    pub t: f64,
    pub modulus: f64,
    pub converged: bool,
    /// Modulus within `1e-6` of 1: candidate periodic/lattice behavior.
    pub flagged: bool,
}

/// Estimate the spectral radius of `P_{it}` over a grid of nonzero
/// frequencies.
pub fn aperiodicity_scan(
    system: &RandomSystem,
    phi: &Observable,
    t_grid: &[f64],
    n: usize,
) -> Result<Vec<ScanPoint>> {
    if t_grid.iter().any(|&t| t == 0.0) {
        return Err(RdeError::Precondition(
            "aperiodicity scan requires nonzero frequencies".into(),
        ));
    }
    let base = annealed_operator(system, n)?;
    t_grid
        .par_iter()
        .map(|&t| -> Result<ScanPoint> {
            let op = twist_operator(&base, phi, Complex64::new(0.0, t))?;
            let (modulus, converged) = spectral_modulus(&op, 1e-6, 6000);
            Ok(ScanPoint {
                t,
                modulus,
                converged,
                flagged: modulus >= 1.0 - 1e-6,
            })
        })
        .collect()
}

/// Martingale coboundary data: `w = sum_{k >= 1} L^k phi` and the residual
/// of the discrete identity `L(phi + w) = w`, where `L` is the transfer
/// operator by duality with respect to the stationary measure.
#[derive(Clone, Debug)]
pub struct Coboundary {
    pub w: Vec<f64>,
    pub residual: f64,
    pub terms_used: usize,
    pub converged: bool,
}

pub fn martingale_coboundary(
    system: &RandomSystem,
    phi: &Observable,
    n: usize,
    n_max: usize,
) -> Result<Coboundary> {
    let op = annealed_operator(system, n)?;
    let h = stationary_density(&op, DEFAULT_POWER_TOL, DEFAULT_MAX_ITER)?;
    require_centered(phi, &h)?;
    let hv = h.values();
    if hv.iter().any(|&x| x < 1e-8) {
        return Err(RdeError::Precondition(
            "stationary density is not bounded away from zero; the mu-dual operator is ill-defined"
                .into(),
        ));
    }
    let apply_l = |v: &[f64], out: &mut [f64]| {
        let scaled: Vec<f64> = v.iter().zip(hv.iter()).map(|(a, b)| a * b).collect();
        op.apply_real(&scaled, out).expect("untwisted");
        for (o, b) in out.iter_mut().zip(hv.iter()) {
            *o /= b;
        }
    };
    let phi_bar = phi.cell_averages(n);
    let mut w = vec![0.0; n];
    let mut term = phi_bar.clone();
    let mut scratch = vec![0.0; n];
    let mut converged = false;
    let mut terms_used = 0usize;
    for k in 1..=n_max {
        apply_l(&term, &mut scratch);
        std::mem::swap(&mut term, &mut scratch);
        for (acc, t) in w.iter_mut().zip(term.iter()) {
            *acc += t;
        }
        terms_used = k;
        let size = term.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
        if size < 1e-12 {
            converged = true;
            break;
        }
    }
    // residual of L(phi + w) - w
    let sum: Vec<f64> = phi_bar.iter().zip(w.iter()).map(|(a, b)| a + b).collect();
    apply_l(&sum, &mut scratch);
    let residual = scratch
        .iter()
        .zip(w.iter())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n as f64;
    Ok(Coboundary {
        w,
        residual,
        terms_used,
        converged,
    })
}

/// Green–Kubo variance of `phi_hat(x,y) = phi(x) - phi(y)` under the doubled
/// system, using Kronecker-factored operator products. Requires every map to
/// preserve Lebesgue measure (so the doubled stationary measure is the
/// product measure).
pub fn doubled_variance(
    system: &RandomSystem,
    phi: &Observable,
    n: usize,
    n_max: usize,
) -> Result<f64> {
    Ok(doubled_variance_estimate(system, phi, n, n_max)?.sigma2)
}

pub fn doubled_variance_estimate(
    system: &RandomSystem,
    phi: &Observable,
    n: usize,
    n_max: usize,
) -> Result<VarianceEstimate> {
    if !system.preserves_lebesgue(1e-9) {
        return Err(RdeError::Precondition(
            "doubled variance requires every map to preserve Lebesgue measure".into(),
        ));
    }
    let op = doubled_operator(system, n)?;
    let h = stationary_density(&op, DEFAULT_POWER_TOL, DEFAULT_MAX_ITER)?;
    let phi_bar = phi.cell_averages(n);
    let mean_phi = phi_bar.iter().sum::<f64>() / n as f64;
    if mean_phi.abs() > CENTERING_TOL {
        return Err(RdeError::Precondition(format!(
            "observable is not centered for the Lebesgue stationary measure: mean = {mean_phi:e}"
        )));
    }
    let phi_sq = phi.cell_averages_of_square(n);
    let hv = h.values();
    let dim = n * n;
    let mut c0 = 0.0;
    let mut start = vec![0.0; dim];
    for i in 0..n {
        for j in 0..n {
            let hij = hv[i * n + j];
            c0 += (phi_sq[i] - 2.0 * phi_bar[i] * phi_bar[j] + phi_sq[j]) * hij;
            start[i * n + j] = (phi_bar[i] - phi_bar[j]) * hij;
        }
    }
    c0 /= dim as f64;
    let advance = |v: &[f64], out: &mut [f64]| op.apply_real(v, out).expect("untwisted");
    let phi_bar_read = phi_bar.clone();
    let read = move |v: &[f64]| {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (phi_bar_read[i] - phi_bar_read[j]) * v[i * n + j];
            }
        }
        acc / dim as f64
    };
    Ok(correlation_sum(c0, start, advance, read, n_max))
}
