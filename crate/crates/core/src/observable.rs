//! Observables on `[0,1]`: finite combinations of trigonometric, monomial
//! and indicator terms, with exact cell averaging on uniform grids.

use std::f64::consts::PI;

use crate::error::{RdeError, Result};
use crate::numeric::{cos2pi, gl8_average, sin2pi};
use crate::transfer::StationaryDensity;

#[derive(Clone, Debug, PartialEq)]
pub enum TermKind {
    /// `cos(2 pi k x)`
    Cosine(u32),
    /// `sin(2 pi k x)`
    Sine(u32),
    /// `x^d` (d = 0 is the constant term)
    Monomial(u32),
    /// `1_{[lo, hi)}(x)`
    Indicator { lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub kind: TermKind,
    pub coefficient: f64,
}

/// A bounded real observable with exact per-cell averages.
#[derive(Clone, Debug)]
pub struct Observable {
    terms: Vec<Term>,
    centered: bool,
    label: String,
}

impl Observable {
    pub fn new(terms: Vec<Term>) -> Result<Observable> {
        for t in &terms {
            if !t.coefficient.is_finite() {
                return Err(RdeError::Domain("non-finite term coefficient".into()));
            }
            match t.kind {
                TermKind::Cosine(k) | TermKind::Sine(k) if k == 0 => {
                    return Err(RdeError::Domain(
                        "trigonometric frequency must be >= 1; use a monomial of degree 0 for constants"
                            .into(),
                    ));
                }
                TermKind::Indicator { lo, hi } => {
                    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
                        return Err(RdeError::Domain(format!(
                            "indicator interval [{lo}, {hi}) is not a subinterval of [0,1]"
                        )));
                    }
                }
                _ => {}
            }
        }
        let label = terms
            .iter()
            .map(|t| match t.kind {
                TermKind::Cosine(k) => format!("{:+}cos{k}", t.coefficient),
                TermKind::Sine(k) => format!("{:+}sin{k}", t.coefficient),
                TermKind::Monomial(d) => format!("{:+}x^{d}", t.coefficient),
                TermKind::Indicator { lo, hi } => format!("{:+}ind[{lo},{hi})", t.coefficient),
            })
            .collect::<String>();
        Ok(Observable {
            terms,
            centered: false,
            label,
        })
    }

    /// `coeff * cos(2 pi k x)`.
    pub fn cosine(k: u32, coefficient: f64) -> Observable {
        Observable::new(vec![Term {
            kind: TermKind::Cosine(k),
            coefficient,
        }])
        .expect("cosine term is always valid")
    }

    /// The zero observable.
    pub fn zero() -> Observable {
        Observable::new(vec![Term {
            kind: TermKind::Monomial(0),
            coefficient: 0.0,
        }])
        .unwrap()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            acc += t.coefficient
                * match t.kind {
                    TermKind::Cosine(k) => cos2pi(k as f64 * x),
                    TermKind::Sine(k) => sin2pi(k as f64 * x),
                    TermKind::Monomial(d) => x.powi(d as i32),
                    TermKind::Indicator { lo, hi } => {
                        if lo <= x && x < hi {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
        }
        acc
    }

    /// Upper bound for `sup |phi|` (sum of coefficient magnitudes).
    pub fn sup_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.abs()).sum()
    }

    /// Exact average over `[a, b]` (antiderivatives per term).
    pub fn average_on(&self, a: f64, b: f64) -> f64 {
        let len = b - a;
        if len <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for t in &self.terms {
            let integral = match t.kind {
                TermKind::Cosine(k) => {
                    let w = 2.0 * PI * k as f64;
                    ((w * b).sin() - (w * a).sin()) / w
                }
                TermKind::Sine(k) => {
                    let w = 2.0 * PI * k as f64;
                    ((w * a).cos() - (w * b).cos()) / w
                }
                TermKind::Monomial(d) => {
                    let p = d as i32 + 1;
                    (b.powi(p) - a.powi(p)) / p as f64
                }
                TermKind::Indicator { lo, hi } => (b.min(hi) - a.max(lo)).max(0.0),
            };
            acc += t.coefficient * integral;
        }
        acc / len
    }

    /// Exact cell averages on the uniform `n`-cell grid.
    pub fn cell_averages(&self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (0..n)
            .map(|i| self.average_on(i as f64 / nf, (i + 1) as f64 / nf))
            .collect()
    }

    /// Cell averages of `phi^2` by 8-point Gauss–Legendre quadrature per cell
    /// (machine precision for the smooth built-in families; indicator
    /// discontinuities are handled by splitting cells at their endpoints).
    pub fn cell_averages_of_square(&self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        let mut cuts: Vec<f64> = Vec::new();
        for t in &self.terms {
            if let TermKind::Indicator { lo, hi } = t.kind {
                cuts.push(lo);
                cuts.push(hi);
            }
        }
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
                    gl8_average(|x| self.eval(x) * self.eval(x), a, b)
                } else {
                    inner.sort_by(|p, q| p.partial_cmp(q).unwrap());
                    let mut pts = vec![a];
                    pts.extend(inner);
                    pts.push(b);
                    let mut acc = 0.0;
                    for w in pts.windows(2) {
                        acc += (w[1] - w[0]) * gl8_average(|x| self.eval(x) * self.eval(x), w[0], w[1]);
                    }
                    acc / (b - a)
                }
            })
            .collect()
    }

    /// Mean of the observable against the cell density `h` (an approximation
    /// of the stationary mean when `h` is an Ulam fixed density).
    pub fn mean_against(&self, density: &StationaryDensity) -> f64 {
        let n = density.grid_size();
        let avgs = self.cell_averages(n);
        avgs.iter()
            .zip(density.values())
            .map(|(a, h)| a * h)
            .sum::<f64>()
            / n as f64
    }

    /// Subtract the mean against `density`; marks the result centered.
    /// Centering an already (numerically) centered observable is a no-op on
    /// coefficients up to the subtracted constant.
    pub fn centered(&self, density: &StationaryDensity) -> Observable {
        let mean = self.mean_against(density);
        let mut terms = self.terms.clone();
        if mean != 0.0 {
            if let Some(t) = terms
                .iter_mut()
                .find(|t| matches!(t.kind, TermKind::Monomial(0)))
            {
                t.coefficient -= mean;
            } else {
                terms.push(Term {
                    kind: TermKind::Monomial(0),
                    coefficient: -mean,
                });
            }
        }
        let mut obs = Observable::new(terms).expect("centering keeps terms valid");
        obs.centered = true;
        obs
    }

    /// Whether the cell-averaged mean against `density` vanishes within `tol`.
    pub fn is_centered_wrt(&self, density: &StationaryDensity, tol: f64) -> bool {
        self.mean_against(density).abs() <= tol
    }
}
