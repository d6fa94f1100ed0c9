//! Small numeric kernels shared across modules: fast trigonometric
//! evaluation for orbit observables, Gauss–Legendre quadrature nodes, and a
//! golden-section maximizer.

/// Taylor coefficients of `cos(2*pi*t)` in powers of `t^2`, truncated so the
/// remainder on `t in [0, 1/4]` is below 2e-17.
const COS2PI_COEFFS: [f64; 11] = [
    1.0,
    -19.73920880217871723767,
    64.93939402266829149096,
    -85.45681720669372773602,
    60.24464137187666036272,
    -26.4262567833743974529,
    7.903536371318468804212,
    -1.714390711088672065422,
    0.2820059684557912150703,
    -0.03638284114254567077175,
    0.003779834200680039379223,
];

/// `cos(2*pi*x)` for arbitrary finite `x`, accurate to a few ulps of the
/// function value and branch-free after range reduction, so the orbit
/// kernels can vectorize it across replica lanes.
#[inline(always)]
pub fn cos2pi(x: f64) -> f64 {
    // reduce to r in [-0.5, 0.5], then fold into t in [0, 0.25]
    let r = x - x.round_ties_even();
    let u = r.abs();
    let folded = 0.5 - u;
    let t = if u > 0.25 { folded } else { u };
    let sign = if u > 0.25 { -1.0 } else { 1.0 };
    let s = t * t;
    let mut p = COS2PI_COEFFS[10];
    p = p.mul_add(s, COS2PI_COEFFS[9]);
    p = p.mul_add(s, COS2PI_COEFFS[8]);
    p = p.mul_add(s, COS2PI_COEFFS[7]);
    p = p.mul_add(s, COS2PI_COEFFS[6]);
    p = p.mul_add(s, COS2PI_COEFFS[5]);
    p = p.mul_add(s, COS2PI_COEFFS[4]);
    p = p.mul_add(s, COS2PI_COEFFS[3]);
    p = p.mul_add(s, COS2PI_COEFFS[2]);
    p = p.mul_add(s, COS2PI_COEFFS[1]);
    p = p.mul_add(s, COS2PI_COEFFS[0]);
    sign * p
}

/// `sin(2*pi*x)` via the quarter-period shift.
#[inline(always)]
pub fn sin2pi(x: f64) -> f64 {
    cos2pi(x - 0.25)
}

/// 8-point Gauss–Legendre nodes on `[-1, 1]`.
pub const GL8_NODES: [f64; 8] = [
    -0.9602898564975363,
    -0.7966664774136267,
    -0.5255324099163290,
    -0.1834346424956498,
    0.1834346424956498,
    0.5255324099163290,
    0.7966664774136267,
    0.9602898564975363,
];

/// Weights matching [`GL8_NODES`].
pub const GL8_WEIGHTS: [f64; 8] = [
    0.1012285362903763,
    0.2223810344533745,
    0.3137066458778873,
    0.3626837833783620,
    0.3626837833783620,
    0.3137066458778873,
    0.2223810344533745,
    0.1012285362903763,
];

/// Average of `f` over `[a, b]` by 8-point Gauss–Legendre quadrature.
pub fn gl8_average(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
        acc += w * f(mid + half * x);
    }
    0.5 * acc
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
/// Returns `(argmax, max)`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
