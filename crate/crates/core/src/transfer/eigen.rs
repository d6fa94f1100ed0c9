//! Matrix-free power iterations used to extract stationary densities,
//! deflated decay rates and dominant twisted eigenvalues.

use num_complex::Complex64;

use crate::error::{RdeError, Result};
use crate::montecarlo::rng::CounterRng;

/// Successive-iterate L1 tolerance of the default power iteration.
pub const DEFAULT_POWER_TOL: f64 = 1e-12;
/// Iteration cap; running into it signals a missing spectral gap.
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Mean absolute value, i.e. the L1(m) norm of a cell function.
pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64
}

pub fn l1_norm_complex(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm()).sum::<f64>() / v.len() as f64
}

/// Mean value, i.e. the integral of a cell function against `m`.
pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Fixed-point iteration for a mass-preserving positive operator, starting
/// from the uniform density. Returns `(density, iterations, residual)`.
pub fn stationary_power(
    apply: &dyn Fn(&[f64], &mut [f64]),
    dim: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64)> {
    let mut v = vec![1.0; dim];
    let mut w = vec![0.0; dim];
    for it in 1..=max_iter {
        apply(&v, &mut w);
        let m = mean(&w);
        if m <= 0.0 || !m.is_finite() {
            return Err(RdeError::NonConvergence(
                "stationary iteration lost mass".into(),
            ));
        }
        for x in w.iter_mut() {
            *x /= m;
        }
        let diff = v
            .iter()
            .zip(w.iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / dim as f64;
        std::mem::swap(&mut v, &mut w);
        if diff <= tol {
            apply(&v, &mut w);
            let residual = v
                .iter()
                .zip(w.iter())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / dim as f64;
            for x in v.iter_mut() {
                if *x < 0.0 {
                    debug_assert!(*x > -1e-12);
                    *x = 0.0;
                }
            }
            return Ok((v, it, residual));
        }
    }
    Err(RdeError::NonConvergence(format!(
        "stationary density did not converge in {max_iter} iterations (no spectral gap or non-mixing system?)"
    )))
}

/// Geometric decay rate of the deflated iteration `v -> P v - (∫P v) h`,
/// which estimates the modulus of the second-largest eigenvalue.
///
/// Returns `(rate, iterations, achieved)` where `achieved` is the relative
/// spread of the trailing window of rate estimates.
pub fn deflated_decay_rate(
    apply: &dyn Fn(&[f64], &mut [f64]),
    h: &[f64],
    dim: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, usize, f64)> {
    const WINDOW: usize = 16;
    let rng = CounterRng::new(0xD5EC_7A11);
    let mut v: Vec<f64> = (0..dim).map(|i| rng.uniform_at(i as u64) - 0.5).collect();
    let mv = mean(&v);
    for (x, hx) in v.iter_mut().zip(h.iter()) {
        *x -= mv * hx;
    }
    let scale = l1_norm(&v);
    for x in v.iter_mut() {
        *x /= scale;
    }
    let mut w = vec![0.0; dim];
    let mut log_ratios: Vec<f64> = Vec::new();
    let mut prev_estimate = f64::NAN;
    for it in 1..=max_iter {
        apply(&v, &mut w);
        let mw = mean(&w);
        for (x, hx) in w.iter_mut().zip(h.iter()) {
            *x -= mw * hx;
        }
        let norm = l1_norm(&w);
        if norm <= 1e-250 {
            // nilpotent remainder: the deflated iterate died outright
            return Ok((0.0, it, 0.0));
        }
        log_ratios.push(norm.ln());
        for x in w.iter_mut() {
            *x /= norm;
        }
        std::mem::swap(&mut v, &mut w);
        if log_ratios.len() >= WINDOW {
            let tail = &log_ratios[log_ratios.len() - WINDOW..];
            let estimate = (tail.iter().sum::<f64>() / WINDOW as f64).exp();
            if prev_estimate.is_finite() {
                let achieved = (estimate - prev_estimate).abs() / estimate.max(1e-300);
                if achieved <= tol {
                    return Ok((estimate, it, achieved));
                }
            }
            prev_estimate = estimate;
        }
    }
    Err(RdeError::NonConvergence(format!(
        "second-eigenvalue estimate did not stabilize in {max_iter} iterations"
    )))
}

/// Dominant eigenvalue by complex power iteration with Rayleigh-quotient
/// readout. Fails with a non-convergence error when no eigenvalue dominates
/// within the iteration budget.
pub fn dominant_eigenvalue(
    apply: &dyn Fn(&[Complex64], &mut [Complex64]),
    dim: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(Complex64, usize)> {
    let mut v = vec![Complex64::new(1.0, 0.0); dim];
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let mut lambda_prev = Complex64::new(f64::NAN, 0.0);
    for it in 1..=max_iter {
        apply(&v, &mut w);
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for (a, b) in v.iter().zip(w.iter()) {
            num += a.conj() * b;
            den += a.norm_sqr();
        }
        if den <= 1e-280 {
            return Err(RdeError::NonConvergence(
                "power iterate collapsed to zero".into(),
            ));
        }
        let lambda = num / den;
        let scale = l1_norm_complex(&w);
        if scale <= 1e-280 {
            return Err(RdeError::NonConvergence(
                "operator annihilated the iterate".into(),
            ));
        }
        // residual ||P v - lambda v|| relative to |lambda|
        let mut resid = 0.0;
        for (a, b) in v.iter().zip(w.iter()) {
            resid += (b - lambda * a).norm();
        }
        resid /= dim as f64 * l1_norm_complex(&v).max(1e-300);
        for x in w.iter_mut() {
            *x /= scale;
        }
        std::mem::swap(&mut v, &mut w);
        if lambda_prev.re.is_finite() {
            let drift = (lambda - lambda_prev).norm();
            if resid <= tol * lambda.norm().max(1e-300) && drift <= tol * lambda.norm().max(1e-300) {
                return Ok((lambda, it));
            }
        }
        lambda_prev = lambda;
    }
    Err(RdeError::NonConvergence(format!(
        "dominant eigenvalue did not converge in {max_iter} iterations (outside the perturbative regime?)"
    )))
}

/// Spectral-radius estimate by normalized iteration: the geometric mean of
/// the per-step L1 growth over a trailing window. Returns
/// `(modulus, converged, iterations)` and never fails; non-stabilized scans
/// are reported with `converged = false`.
pub fn modulus_estimate(
    apply: &dyn Fn(&[Complex64], &mut [Complex64]),
    dim: usize,
    tol: f64,
    max_iter: usize,
) -> (f64, bool, usize) {
    const WINDOW: usize = 32;
    let rng = CounterRng::new(0x5CA1_AB1E);
    let mut v: Vec<Complex64> = (0..dim)
        .map(|i| {
            Complex64::new(
                rng.uniform_at(2 * i as u64) - 0.5,
                rng.uniform_at(2 * i as u64 + 1) - 0.5,
            )
        })
        .collect();
    let scale = l1_norm_complex(&v);
    for x in v.iter_mut() {
        *x /= scale;
    }
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let mut logs: Vec<f64> = Vec::new();
    let mut prev = f64::NAN;
    let mut estimate = f64::NAN;
    for it in 1..=max_iter {
        apply(&v, &mut w);
        let norm = l1_norm_complex(&w);
        if norm <= 1e-250 {
            return (0.0, true, it);
        }
        logs.push(norm.ln());
        for x in w.iter_mut() {
            *x /= norm;
        }
        std::mem::swap(&mut v, &mut w);
        if logs.len() >= WINDOW && logs.len() % (WINDOW / 2) == 0 {
            let tail = &logs[logs.len() - WINDOW..];
            estimate = (tail.iter().sum::<f64>() / WINDOW as f64).exp();
            if prev.is_finite() && (estimate - prev).abs() <= tol * estimate.max(1e-300) {
                return (estimate, true, it);
            }
            prev = estimate;
        }
    }
    let fallback = if estimate.is_finite() { estimate } else { 1.0 };
    (fallback, false, max_iter)
}
