//! Ulam discretization of annealed, twisted and doubled transfer operators.
//!
//! Operators act on densities stored as cell averages over the uniform
//! `N`-cell grid of `[0,1]` (or the `N^2`-cell grid of the square for the
//! doubled construction). Entry `(j, i)` of the 1D matrix is
//! `m(A_i ∩ T^{-1} A_j) / m(A_i)`, assembled exactly per branch by inverting
//! cell boundaries, so piecewise-linear maps whose breakpoints align with
//! the grid are discretized without error.

mod eigen;
mod sparse;

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{RdeError, Result};
use crate::maps::{PiecewiseMap, RandomSystem};
use crate::observable::Observable;

pub use eigen::{DEFAULT_MAX_ITER, DEFAULT_POWER_TOL};
pub use sparse::SparseMatrix;

/// Breakpoints this close to a grid point are snapped onto it during
/// assembly.
const GRID_SNAP_TOL: f64 = 1e-9;
/// Grid guard for the doubled operator (`N^2` cells).
pub const DOUBLED_GRID_GUARD: usize = 256;
/// Grid guard for serializing a doubled operator as an explicit matrix.
const DOUBLED_SERIALIZE_GUARD: usize = 32;

/// Twist metadata carried by a Laplace-deformed operator.
#[derive(Clone, Debug)]
pub struct Twist {
    pub observable_label: String,
    pub z: Complex64,
}

enum OperatorKind {
    Plain(SparseMatrix),
    Twisted {
        base: SparseMatrix,
        weights: Vec<Complex64>,
    },
    /// `sum_w p_w (U_w ⊗ U_w)` kept in factored form; the full matrix is
    /// never materialized except for small-grid serialization.
    Doubled(Vec<(f64, SparseMatrix)>),
}

/// Sparse finite-rank approximation of a transfer operator.
pub struct DiscretizedOperator {
    n: usize,
    kind: OperatorKind,
    twist: Option<Twist>,
    system_label: String,
}

impl DiscretizedOperator {
    /// Cells per axis.
    pub fn grid_size(&self) -> usize {
        self.n
    }

    /// Dimension of the vectors the operator acts on.
    pub fn dim(&self) -> usize {
        if self.is_doubled() {
            self.n * self.n
        } else {
            self.n
        }
    }

    pub fn is_doubled(&self) -> bool {
        matches!(self.kind, OperatorKind::Doubled(_))
    }

    pub fn is_twisted(&self) -> bool {
        self.twist.is_some()
    }

    pub fn twist(&self) -> Option<&Twist> {
        self.twist.as_ref()
    }

    pub fn system_label(&self) -> &str {
        &self.system_label
    }

    /// The plain sparse matrix, when the operator is an untwisted 1D one.
    pub fn as_sparse(&self) -> Option<&SparseMatrix> {
        match &self.kind {
            OperatorKind::Plain(m) => Some(m),
            _ => None,
        }
    }

    /// Apply to a real cell vector. Twisted operators are complex and are
    /// rejected here.
    pub fn apply_real(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        match &self.kind {
            OperatorKind::Plain(m) => {
                m.apply(x, y);
                Ok(())
            }
            OperatorKind::Doubled(parts) => {
                kron_apply(parts, self.n, x, y);
                Ok(())
            }
            OperatorKind::Twisted { .. } => Err(RdeError::Precondition(
                "twisted operator cannot be applied to real vectors".into(),
            )),
        }
    }

    /// Apply to a complex cell vector.
    pub fn apply_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        match &self.kind {
            OperatorKind::Plain(m) => m.apply_complex(x, y),
            OperatorKind::Twisted { base, weights } => {
                let scaled: Vec<Complex64> =
                    x.iter().zip(weights.iter()).map(|(a, w)| a * w).collect();
                base.apply_complex(&scaled, y);
            }
            OperatorKind::Doubled(parts) => {
                let dim = self.dim();
                let (re_in, im_in): (Vec<f64>, Vec<f64>) =
                    x.iter().map(|c| (c.re, c.im)).unzip();
                let mut re_out = vec![0.0; dim];
                let mut im_out = vec![0.0; dim];
                kron_apply(parts, self.n, &re_in, &mut re_out);
                kron_apply(parts, self.n, &im_in, &mut im_out);
                for (o, (r, i)) in y.iter_mut().zip(re_out.into_iter().zip(im_out)) {
                    *o = Complex64::new(r, i);
                }
            }
        }
    }

    /// Integral of a cell vector against the reference measure.
    pub fn integral(&self, v: &[f64]) -> f64 {
        eigen::mean(v)
    }

    /// Column sums of the underlying 1D matrix (twist weights excluded).
    pub fn column_sums(&self) -> Result<Vec<f64>> {
        match &self.kind {
            OperatorKind::Plain(m) => Ok(m.column_sums()),
            OperatorKind::Twisted { base, .. } => Ok(base.column_sums()),
            OperatorKind::Doubled(_) => Err(RdeError::Precondition(
                "column sums of a doubled operator are not materialized".into(),
            )),
        }
    }

    /// Serialize in the `RDE-SPARSE v1` text format (one `row col re im`
    /// line per entry). Doubled operators are expanded and therefore guarded
    /// to small grids.
    pub fn write_sparse_text<W: Write>(&self, out: &mut W) -> Result<()> {
        let entries: Vec<(u32, u32, Complex64)> = match &self.kind {
            OperatorKind::Plain(m) => m
                .entries()
                .map(|(r, c, v)| (r as u32, c as u32, Complex64::new(v, 0.0)))
                .collect(),
            OperatorKind::Twisted { base, weights } => base
                .entries()
                .map(|(r, c, v)| (r as u32, c as u32, weights[c] * v))
                .collect(),
            OperatorKind::Doubled(parts) => {
                if self.n > DOUBLED_SERIALIZE_GUARD {
                    return Err(RdeError::Resource(format!(
                        "doubled operator with N = {} exceeds the N <= {DOUBLED_SERIALIZE_GUARD} serialization guard",
                        self.n
                    )));
                }
                let n = self.n;
                let mut dense = vec![0.0f64; n * n * n * n];
                for (p, m) in parts {
                    for (r1, c1, v1) in m.entries() {
                        for (r2, c2, v2) in m.entries() {
                            let row = r1 * n + r2;
                            let col = c1 * n + c2;
                            dense[row * n * n + col] += p * v1 * v2;
                        }
                    }
                }
                dense
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(k, v)| {
                        (
                            (k / (n * n)) as u32,
                            (k % (n * n)) as u32,
                            Complex64::new(*v, 0.0),
                        )
                    })
                    .collect()
            }
        };
        writeln!(out, "RDE-SPARSE v1")?;
        writeln!(out, "{} {} {}", self.dim(), self.dim(), entries.len())?;
        for (r, c, v) in entries {
            writeln!(out, "{} {} {} {}", r, c, v.re, v.im)?;
        }
        Ok(())
    }
}

/// A parsed `RDE-SPARSE v1` document.
pub struct ParsedSparse {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(u32, u32, Complex64)>,
}

/// Parse the `RDE-SPARSE v1` text format.
pub fn read_sparse_text<R: BufRead>(reader: R) -> Result<ParsedSparse> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| RdeError::Config("empty sparse file".into()))??;
    if header.trim() != "RDE-SPARSE v1" {
        return Err(RdeError::Config(format!(
            "unexpected sparse header {header:?}"
        )));
    }
    let shape = lines
        .next()
        .ok_or_else(|| RdeError::Config("missing shape line".into()))??;
    let mut it = shape.split_whitespace();
    let parse = |s: Option<&str>, what: &str| -> Result<usize> {
        s.ok_or_else(|| RdeError::Config(format!("missing {what}")))?
            .parse::<usize>()
            .map_err(|e| RdeError::Config(format!("bad {what}: {e}")))
    };
    let rows = parse(it.next(), "row count")?;
    let cols = parse(it.next(), "column count")?;
    let nnz = parse(it.next(), "entry count")?;
    let mut entries = Vec::with_capacity(nnz);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut f = line.split_whitespace();
        let r: u32 = f
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| RdeError::Config(format!("bad entry line {line:?}")))?;
        let c: u32 = f
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| RdeError::Config(format!("bad entry line {line:?}")))?;
        let re: f64 = f
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| RdeError::Config(format!("bad entry line {line:?}")))?;
        let im: f64 = f
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| RdeError::Config(format!("bad entry line {line:?}")))?;
        entries.push((r, c, Complex64::new(re, im)));
    }
    if entries.len() != nnz {
        return Err(RdeError::Config(format!(
            "entry count {nnz} does not match {} parsed lines",
            entries.len()
        )));
    }
    Ok(ParsedSparse { rows, cols, entries })
}

/// Cell-averaged stationary density `h` with `∫ h dm = 1`.
#[derive(Clone, Debug)]
pub struct StationaryDensity {
    values: Vec<f64>,
    grid_size: usize,
    doubled: bool,
    residual: f64,
}

impl StationaryDensity {
    /// The uniform density (exact for Lebesgue-preserving systems).
    pub fn uniform(n: usize) -> StationaryDensity {
        StationaryDensity {
            values: vec![1.0; n],
            grid_size: n,
            doubled: false,
            residual: 0.0,
        }
    }

    /// Wrap explicit nonnegative cell values, normalized to `∫ h dm = 1`.
    pub fn from_cell_values(values: Vec<f64>) -> Result<StationaryDensity> {
        if values.is_empty() || values.iter().any(|v| !(*v >= 0.0)) {
            return Err(RdeError::Domain(
                "density cells must be nonnegative".into(),
            ));
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        if mean <= 0.0 {
            return Err(RdeError::Domain("density has zero mass".into()));
        }
        Ok(StationaryDensity {
            values: values.into_iter().map(|v| v / mean).collect(),
            grid_size: n,
            doubled: false,
            residual: 0.0,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn is_doubled(&self) -> bool {
        self.doubled
    }

    /// Achieved `||P h - h||_1`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Cumulative distribution at the grid points `0, 1/N, ..., 1`
    /// (1D densities only).
    pub fn cumulative(&self) -> Vec<f64> {
        assert!(!self.doubled, "cumulative only defined for 1D densities");
        let n = self.grid_size as f64;
        let mut cum = Vec::with_capacity(self.grid_size + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for v in &self.values {
            acc += v / n;
            cum.push(acc);
        }
        // guard against rounding drift in the last entry
        let last = *cum.last().unwrap();
        if (last - 1.0).abs() < 1e-9 {
            *cum.last_mut().unwrap() = 1.0;
        }
        cum
    }

    /// Measure of `[lo, hi)` under the piecewise-constant density.
    pub fn measure_of_interval(&self, lo: f64, hi: f64) -> f64 {
        assert!(!self.doubled);
        let n = self.grid_size as f64;
        let (lo, hi) = (lo.max(0.0), hi.min(1.0));
        if hi <= lo {
            return 0.0;
        }
        let i0 = ((lo * n) as usize).min(self.grid_size - 1);
        let i1 = ((hi * n).ceil() as usize).min(self.grid_size);
        let mut acc = 0.0;
        for i in i0..i1 {
            let a = (i as f64 / n).max(lo);
            let b = ((i + 1) as f64 / n).min(hi);
            if b > a {
                acc += self.values[i] * (b - a);
            }
        }
        acc
    }

    /// Serialize as an `RDE-SPARSE v1` column vector.
    pub fn write_sparse_text<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "RDE-SPARSE v1")?;
        writeln!(out, "{} 1 {}", self.values.len(), self.values.len())?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{} 0 {} 0", i, v)?;
        }
        Ok(())
    }
}

/// Convergence report of the spectral-gap estimator.
#[derive(Clone, Debug)]
pub struct SpectralReport {
    pub leading_eigenvalue: Complex64,
    /// Estimated modulus of the second-largest eigenvalue.
    pub second_modulus: f64,
    pub iterations: usize,
    pub tolerance_achieved: f64,
}

impl SpectralReport {
    /// A gap strictly inside the unit disk.
    pub fn is_mixing(&self) -> bool {
        self.second_modulus < 1.0 - 1e-6
    }
}

fn snap_to_grid(x: f64, n: usize) -> f64 {
    let g = (x * n as f64).round() / n as f64;
    if (x - g).abs() < GRID_SNAP_TOL {
        g
    } else {
        x
    }
}

/// Ulam matrix of a single map on the uniform `n`-cell grid.
pub fn ulam_matrix(map: &PiecewiseMap, n: usize) -> Result<DiscretizedOperator> {
    if n < 2 {
        return Err(RdeError::Domain(format!("grid size {n} must be >= 2")));
    }
    Ok(DiscretizedOperator {
        n,
        kind: OperatorKind::Plain(ulam_sparse(map, n)),
        twist: None,
        system_label: map.label().to_string(),
    })
}

fn ulam_sparse(map: &PiecewiseMap, n: usize) -> SparseMatrix {
    let nf = n as f64;
    let mut triplets: Vec<(u32, u32, f64)> = Vec::with_capacity(2 * n);
    for branch in map.branches() {
        let (ilo, ihi) = branch.image_interval();
        let (dlo, dhi) = branch.domain();
        let j_start = ((ilo * nf).floor().max(0.0)) as usize;
        let j_end = ((ihi * nf).ceil() as usize).min(n);
        for j in j_start..j_end {
            let seg_lo = (j as f64 / nf).max(ilo);
            let seg_hi = ((j + 1) as f64 / nf).min(ihi);
            if seg_hi <= seg_lo {
                continue;
            }
            let p1 = branch.inverse(seg_lo);
            let p2 = branch.inverse(seg_hi);
            let (mut plo, mut phi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            plo = snap_to_grid(plo, n).clamp(dlo, dhi);
            phi = snap_to_grid(phi, n).clamp(dlo, dhi);
            if phi <= plo {
                continue;
            }
            let i_start = ((plo * nf).floor() as usize).min(n - 1);
            let i_end = (((phi * nf).ceil() as usize).max(i_start + 1)).min(n);
            for i in i_start..i_end {
                let a = (i as f64 / nf).max(plo);
                let b = ((i + 1) as f64 / nf).min(phi);
                if b > a {
                    triplets.push((j as u32, i as u32, (b - a) * nf));
                }
            }
        }
    }
    SparseMatrix::from_triplets(n, n, triplets)
}

/// Annealed operator: the convex combination of the per-map Ulam matrices.
pub fn annealed_operator(system: &RandomSystem, n: usize) -> Result<DiscretizedOperator> {
    if n < 2 {
        return Err(RdeError::Domain(format!("grid size {n} must be >= 2")));
    }
    let per_map: Vec<SparseMatrix> = system
        .maps()
        .iter()
        .map(|m| ulam_sparse(m, n))
        .collect();
    let parts: Vec<(f64, &SparseMatrix)> = system
        .probs()
        .iter()
        .copied()
        .zip(per_map.iter())
        .collect();
    Ok(DiscretizedOperator {
        n,
        kind: OperatorKind::Plain(SparseMatrix::weighted_sum(&parts)),
        twist: None,
        system_label: system.label().to_string(),
    })
}

/// Laplace-twisted operator `P_z f = P(e^{z phi} f)`: the source-cell density
/// is multiplied by the cell average of `e^{z phi}` before the untwisted
/// matrix acts.
pub fn twisted_operator(
    system: &RandomSystem,
    phi: &Observable,
    z: Complex64,
    n: usize,
) -> Result<DiscretizedOperator> {
    let base = annealed_operator(system, n)?;
    twist_operator(&base, phi, z)
}

/// Re-twist an already assembled untwisted operator (used when sweeping `z`).
pub fn twist_operator(
    base: &DiscretizedOperator,
    phi: &Observable,
    z: Complex64,
) -> Result<DiscretizedOperator> {
    let matrix = match &base.kind {
        OperatorKind::Plain(m) => m.clone(),
        _ => {
            return Err(RdeError::Precondition(
                "twisting requires an untwisted 1D operator".into(),
            ))
        }
    };
    let weights = exp_cell_averages(phi, z, base.n);
    Ok(DiscretizedOperator {
        n: base.n,
        kind: OperatorKind::Twisted {
            base: matrix,
            weights,
        },
        twist: Some(Twist {
            observable_label: phi.label().to_string(),
            z,
        }),
        system_label: base.system_label.clone(),
    })
}

/// Cell averages of `e^{z phi}` by 8-point Gauss–Legendre quadrature, with
/// cells split at indicator discontinuities.
pub fn exp_cell_averages(phi: &Observable, z: Complex64, n: usize) -> Vec<Complex64> {
    use crate::numeric::{GL8_NODES, GL8_WEIGHTS};
    let nf = n as f64;
    let mut cuts: Vec<f64> = Vec::new();
    for t in phi.terms() {
        if let crate::observable::TermKind::Indicator { lo, hi } = t.kind {
            cuts.push(lo);
            cuts.push(hi);
        }
    }
    let segment_avg = |a: f64, b: f64| -> Complex64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
            acc += (z * phi.eval(mid + half * x)).exp() * *w;
        }
        acc * 0.5
    };
    (0..n)
        .map(|i| {
            let a = i as f64 / nf;
            let b = (i + 1) as f64 / nf;
            let mut inner: Vec<f64> = cuts
                .iter()
                .copied()
                .filter(|&c| c > a + 1e-15 && c < b - 1e-15)
                .collect();
            if inner.is_empty() {
                segment_avg(a, b)
            } else {
                inner.sort_by(|p, q| p.partial_cmp(q).unwrap());
                let mut pts = vec![a];
                pts.extend(inner);
                pts.push(b);
                let mut acc = Complex64::new(0.0, 0.0);
                for w in pts.windows(2) {
                    acc += segment_avg(w[0], w[1]) * (w[1] - w[0]);
                }
                acc / (b - a)
            }
        })
        .collect()
}

/// Doubled operator `sum_w p_w (U_w ⊗ U_w)` on the `N^2`-cell grid of the
/// square, kept in Kronecker-factored form.
pub fn doubled_operator(system: &RandomSystem, n: usize) -> Result<DiscretizedOperator> {
    if n < 2 {
        return Err(RdeError::Domain(format!("grid size {n} must be >= 2")));
    }
    if n > DOUBLED_GRID_GUARD {
        return Err(RdeError::Resource(format!(
            "doubled grid N = {n} exceeds the N <= {DOUBLED_GRID_GUARD} guard"
        )));
    }
    let parts: Vec<(f64, SparseMatrix)> = system
        .probs()
        .iter()
        .copied()
        .zip(system.maps().iter().map(|m| ulam_sparse(m, n)))
        .collect();
    Ok(DiscretizedOperator {
        n,
        kind: OperatorKind::Doubled(parts),
        twist: None,
        system_label: format!("doubled({})", system.label()),
    })
}

/// Apply `sum_w p_w (U_w ⊗ U_w)` to a row-major `n x n` cell vector:
/// `W = sum_w p_w U_w V U_w^T`, one axis at a time.
fn kron_apply(parts: &[(f64, SparseMatrix)], n: usize, x: &[f64], y: &mut [f64]) {
    let dim = n * n;
    debug_assert_eq!(x.len(), dim);
    debug_assert_eq!(y.len(), dim);
    let mut b = vec![0.0; dim];
    let mut bt = vec![0.0; dim];
    let mut ct = vec![0.0; dim];
    y.fill(0.0);
    for (p, u) in parts {
        // rows: B[k, :] = U x[k, :]
        for k in 0..n {
            u.apply(&x[k * n..(k + 1) * n], &mut b[k * n..(k + 1) * n]);
        }
        // transpose, apply along the other axis, accumulate transposed back
        for k in 0..n {
            for j in 0..n {
                bt[j * n + k] = b[k * n + j];
            }
        }
        for j in 0..n {
            u.apply(&bt[j * n..(j + 1) * n], &mut ct[j * n..(j + 1) * n]);
        }
        for j in 0..n {
            for i in 0..n {
                y[i * n + j] += p * ct[j * n + i];
            }
        }
    }
}

/// Stationary density of an untwisted operator by power iteration from the
/// uniform vector.
pub fn stationary_density(
    op: &DiscretizedOperator,
    tol: f64,
    max_iter: usize,
) -> Result<StationaryDensity> {
    if op.is_twisted() {
        return Err(RdeError::Precondition(
            "stationary density requires an untwisted operator".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(RdeError::Domain("tolerance must be positive".into()));
    }
    let apply = |x: &[f64], y: &mut [f64]| op.apply_real(x, y).expect("untwisted");
    let (values, iterations, residual) = eigen::stationary_power(&apply, op.dim(), tol, max_iter)?;
    let _ = iterations;
    Ok(StationaryDensity {
        values,
        grid_size: op.grid_size(),
        doubled: op.is_doubled(),
        residual,
    })
}

/// Estimate the second-largest eigenvalue modulus by deflated power
/// iteration on the complement of the stationary direction.
pub fn spectral_gap(op: &DiscretizedOperator, h: &StationaryDensity) -> Result<SpectralReport> {
    if op.is_twisted() {
        return Err(RdeError::Precondition(
            "spectral gap requires an untwisted operator".into(),
        ));
    }
    if h.values().len() != op.dim() {
        return Err(RdeError::Precondition(format!(
            "density dimension {} does not match operator dimension {}",
            h.values().len(),
            op.dim()
        )));
    }
    let apply = |x: &[f64], y: &mut [f64]| op.apply_real(x, y).expect("untwisted");
    // leading eigenvalue from the density itself
    let mut ph = vec![0.0; op.dim()];
    apply(h.values(), &mut ph);
    let lead = eigen::mean(&ph) / eigen::mean(h.values());
    let (rate, iterations, achieved) =
        eigen::deflated_decay_rate(&apply, h.values(), op.dim(), 1e-10, DEFAULT_MAX_ITER)?;
    Ok(SpectralReport {
        leading_eigenvalue: Complex64::new(lead, 0.0),
        second_modulus: rate,
        iterations,
        tolerance_achieved: achieved,
    })
}

/// Dominant eigenvalue of a (typically twisted) operator.
pub fn leading_eigenvalue(op: &DiscretizedOperator, tol: f64) -> Result<Complex64> {
    let apply = |x: &[Complex64], y: &mut [Complex64]| op.apply_complex(x, y);
    let (lambda, _) = eigen::dominant_eigenvalue(&apply, op.dim(), tol, DEFAULT_MAX_ITER)?;
    Ok(lambda)
}

/// Spectral-radius estimate of a twisted operator, for aperiodicity scans.
/// Returns `(modulus, converged)`.
pub fn spectral_modulus(op: &DiscretizedOperator, tol: f64, max_iter: usize) -> (f64, bool) {
    let apply = |x: &[Complex64], y: &mut [Complex64]| op.apply_complex(x, y);
    let (modulus, converged, _) = eigen::modulus_estimate(&apply, op.dim(), tol, max_iter);
    (modulus, converged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::PiecewiseMap;

    fn two_map_system() -> RandomSystem {
        RandomSystem::new(
            vec![PiecewiseMap::beta(2).unwrap(), PiecewiseMap::beta(3).unwrap()],
            vec![0.5, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn doubling_ulam_n2() {
        let op = ulam_matrix(&PiecewiseMap::beta(2).unwrap(), 2).unwrap();
        let m = op.as_sparse().unwrap();
        for j in 0..2 {
            for i in 0..2 {
                assert!((m.entry(j, i) - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identity_map_gives_identity_matrix() {
        let id = PiecewiseMap::from_linear_branches(&[(0.0, 1.0, 1.0, 0.0)], "identity").unwrap();
        let op = ulam_matrix(&id, 4).unwrap();
        let m = op.as_sparse().unwrap();
        for j in 0..4 {
            for i in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((m.entry(j, i) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn beta3_ulam_n3_is_flat() {
        let op = ulam_matrix(&PiecewiseMap::beta(3).unwrap(), 3).unwrap();
        let m = op.as_sparse().unwrap();
        for j in 0..3 {
            for i in 0..3 {
                assert!((m.entry(j, i) - 1.0 / 3.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn columns_sum_to_one() {
        for map in [
            PiecewiseMap::beta(2).unwrap(),
            PiecewiseMap::beta(3).unwrap(),
            PiecewiseMap::linear_mod1(2.6, 0.37).unwrap(),
            PiecewiseMap::from_linear_branches(
                &[(0.0, 0.5, 1.5, 0.0), (0.5, 1.0, 2.0, -1.0)],
                "nonsurjective",
            )
            .unwrap(),
        ] {
            let op = ulam_matrix(&map, 97).unwrap();
            for (i, s) in op.column_sums().unwrap().iter().enumerate() {
                assert!((s - 1.0).abs() < 1e-10, "column {i} sums to {s}");
            }
        }
    }

    #[test]
    fn annealed_is_convex_combination() {
        let sys = two_map_system();
        let op = annealed_operator(&sys, 6).unwrap();
        let u2 = ulam_matrix(sys.map(0), 6).unwrap();
        let u3 = ulam_matrix(sys.map(1), 6).unwrap();
        for j in 0..6 {
            for i in 0..6 {
                let want = 0.5 * u2.as_sparse().unwrap().entry(j, i)
                    + 0.5 * u3.as_sparse().unwrap().entry(j, i);
                assert!((op.as_sparse().unwrap().entry(j, i) - want).abs() < 1e-15);
            }
        }
        let single = RandomSystem::single(PiecewiseMap::beta(2).unwrap());
        let a = annealed_operator(&single, 8).unwrap();
        let u = ulam_matrix(single.map(0), 8).unwrap();
        for j in 0..8 {
            for i in 0..8 {
                assert_eq!(
                    a.as_sparse().unwrap().entry(j, i),
                    u.as_sparse().unwrap().entry(j, i)
                );
            }
        }
    }

    #[test]
    fn twist_at_zero_is_untwisted() {
        let sys = two_map_system();
        let phi = Observable::cosine(1, 1.0);
        let base = annealed_operator(&sys, 32).unwrap();
        let tw = twisted_operator(&sys, &phi, Complex64::new(0.0, 0.0), 32).unwrap();
        let mut x = vec![Complex64::new(0.0, 0.0); 32];
        x[5] = Complex64::new(1.0, 0.0);
        let mut y0 = x.clone();
        let mut y1 = x.clone();
        base.apply_complex(&x, &mut y0);
        tw.apply_complex(&x, &mut y1);
        for (a, b) in y0.iter().zip(y1.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn stationary_density_of_beta_maps_is_uniform() {
        let sys = two_map_system();
        for n in [16usize, 64] {
            let op = annealed_operator(&sys, n).unwrap();
            let h = stationary_density(&op, 1e-12, 10_000).unwrap();
            for v in h.values() {
                assert!((v - 1.0).abs() < 1e-12);
            }
            assert!(h.residual() < 1e-12);
        }
    }

    #[test]
    fn conservation_and_positivity() {
        let sys = two_map_system();
        let op = annealed_operator(&sys, 50).unwrap();
        let rng = crate::montecarlo::rng::CounterRng::new(3);
        let v: Vec<f64> = (0..50).map(|i| rng.uniform_at(i as u64)).collect();
        let mut w = vec![0.0; 50];
        op.apply_real(&v, &mut w).unwrap();
        assert!((op.integral(&v) - op.integral(&w)).abs() < 1e-12);
        assert!(w.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn doubled_apply_matches_kronecker_at_n2() {
        let sys = RandomSystem::single(PiecewiseMap::beta(2).unwrap());
        let op = doubled_operator(&sys, 2).unwrap();
        let u = ulam_matrix(sys.map(0), 2).unwrap();
        let ud = u.as_sparse().unwrap().to_dense();
        // explicit Kronecker product action on an arbitrary vector
        let v = [0.3, -0.7, 1.1, 0.25];
        let mut kron = [[0.0; 4]; 4];
        for r1 in 0..2 {
            for r2 in 0..2 {
                for c1 in 0..2 {
                    for c2 in 0..2 {
                        kron[r1 * 2 + r2][c1 * 2 + c2] = ud[r1 * 2 + c1] * ud[r2 * 2 + c2];
                    }
                }
            }
        }
        let mut want = [0.0; 4];
        for r in 0..4 {
            for c in 0..4 {
                want[r] += kron[r][c] * v[c];
            }
        }
        let mut got = vec![0.0; 4];
        op.apply_real(&v, &mut got).unwrap();
        for (a, b) in want.iter().zip(got.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn doubled_annealing_does_not_factorize() {
        // on product functions the doubled operator averages products of
        // per-map images, which differs from the product of annealed images
        let sys = two_map_system();
        let n = 2;
        let op = doubled_operator(&sys, n).unwrap();
        let f = [1.0, -2.0];
        let g = [0.5, 2.5];
        let mut prod = vec![0.0; 4];
        for i in 0..2 {
            for j in 0..2 {
                prod[i * 2 + j] = f[i] * g[j];
            }
        }
        let mut via_doubled = vec![0.0; 4];
        op.apply_real(&prod, &mut via_doubled).unwrap();

        // sum_w p (U_w f)(U_w g) pointwise
        let mut sum_products = vec![0.0; 4];
        for (k, p) in sys.probs().iter().enumerate() {
            let u = ulam_matrix(sys.map(k), n).unwrap();
            let mut uf = vec![0.0; 2];
            let mut ug = vec![0.0; 2];
            u.apply_real(&f, &mut uf).unwrap();
            u.apply_real(&g, &mut ug).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    sum_products[i * 2 + j] += p * uf[i] * ug[j];
                }
            }
        }
        for (a, b) in via_doubled.iter().zip(sum_products.iter()) {
            assert!((a - b).abs() < 1e-14);
        }

        // and it differs from (P f)(P g)
        let ann = annealed_operator(&sys, n).unwrap();
        let mut pf = vec![0.0; 2];
        let mut pg = vec![0.0; 2];
        ann.apply_real(&f, &mut pf).unwrap();
        ann.apply_real(&g, &mut pg).unwrap();
        let mut factored = vec![0.0; 4];
        for i in 0..2 {
            for j in 0..2 {
                factored[i * 2 + j] = pf[i] * pg[j];
            }
        }
        let diff: f64 = via_doubled
            .iter()
            .zip(factored.iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(diff > 1e-3, "annealing unexpectedly factorized");
    }

    #[test]
    fn doubled_stationary_density_is_uniform_for_beta_maps() {
        let sys = two_map_system();
        let op = doubled_operator(&sys, 8).unwrap();
        let h = stationary_density(&op, 1e-12, 10_000).unwrap();
        for v in h.values() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn doubled_guard_trips() {
        let sys = two_map_system();
        assert!(matches!(
            doubled_operator(&sys, 512),
            Err(RdeError::Resource(_))
        ));
    }

    #[test]
    fn identity_stub_has_no_gap() {
        let id = PiecewiseMap::from_linear_branches(&[(0.0, 1.0, 1.0, 0.0)], "identity").unwrap();
        let op = ulam_matrix(&id, 16).unwrap();
        let h = stationary_density(&op, 1e-12, 100).unwrap();
        let report = spectral_gap(&op, &h).unwrap();
        assert!((report.second_modulus - 1.0).abs() < 1e-9);
        assert!(!report.is_mixing());
    }

    #[test]
    fn doubling_gap_is_nilpotent() {
        let op = ulam_matrix(&PiecewiseMap::beta(2).unwrap(), 64).unwrap();
        let h = stationary_density(&op, 1e-12, 100).unwrap();
        let report = spectral_gap(&op, &h).unwrap();
        assert!(report.second_modulus < 1e-8);
        assert!(report.is_mixing());
        assert!((report.leading_eigenvalue.re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn untwisted_leading_eigenvalue_is_one() {
        let sys = two_map_system();
        let op = annealed_operator(&sys, 64).unwrap();
        let lambda = leading_eigenvalue(&op, 1e-12).unwrap();
        assert!((lambda - Complex64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn sparse_text_round_trip() {
        let sys = two_map_system();
        let op = annealed_operator(&sys, 6).unwrap();
        let mut buf = Vec::new();
        op.write_sparse_text(&mut buf).unwrap();
        let parsed = read_sparse_text(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(parsed.rows, 6);
        assert_eq!(parsed.cols, 6);
        for (r, c, v) in parsed.entries {
            let want = op.as_sparse().unwrap().entry(r as usize, c as usize);
            assert_eq!(v.re, want);
            assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn twist_continuity_scales_linearly() {
        let sys = two_map_system();
        let phi = Observable::cosine(1, 1.0);
        let n = 64;
        let diff_at = |z: f64| -> f64 {
            // max column L1 difference equals max_i |w_i - 1| (columns sum to 1)
            exp_cell_averages(&phi, Complex64::new(z, 0.0), n)
                .iter()
                .map(|w| (w - Complex64::new(1.0, 0.0)).norm())
                .fold(0.0, f64::max)
        };
        let d2 = diff_at(1e-2);
        let d4 = diff_at(1e-4);
        assert!(d2 < 2.0 * 1e-2);
        assert!(d4 < 2.0 * 1e-4);
        let ratio = d2 / d4;
        assert!((50.0..200.0).contains(&ratio), "ratio {ratio}");
    }
}
