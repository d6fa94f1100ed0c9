//! Orbit simulation engines.
//!
//! Replicas are processed in blocks of 16 independent lanes so the per-step
//! work (map step, observable evaluation, counter-based draws) vectorizes.
//! Every draw is a pure function of counter streams, so results are
//! bit-identical regardless of blocking or scheduling; the scalar fallback
//! evaluates the same expressions per replica.
//!
//! Naive f64 iteration of `beta x mod 1` with even `beta` is exact binary
//! arithmetic: orbits shed one mantissa bit per step and collapse onto the
//! fixed point 0 within ~53 steps, which destroys every distributional
//! statistic. The engines therefore simulate the transfer chain at full
//! 64-bit resolution instead of the bare point map: integer-beta systems
//! step exactly on the 2^64-cell torus (`u -> beta u + r mod 2^64` with `r`
//! uniform on `{0..beta-1}`, which preserves the uniform law exactly), and
//! all other maps receive one-cell (2^-53) additive dither per step. The
//! dither stream belongs to the replica, not to the map-choice sequence, so
//! quenched experiments still share their map sequence exactly; doubled
//! orbits share their dither word so synchronized pairs stay synchronized.

use rayon::prelude::*;

use crate::maps::{PiecewiseMap, RandomSystem};
use crate::montecarlo::plan::{sample_initial, InitialLaw, QuenchMode, SimulationPlan};
use crate::montecarlo::rng::{CounterRng, IndexSampler};
use crate::numeric::cos2pi;
use crate::observable::{Observable, TermKind};

const LANES: usize = 16;
/// Replicas per rayon task.
const BLOCKS_PER_TASK: usize = 64;
/// 2^-53: one dither cell.
const DITHER_CELL: f64 = 1.110_223_024_625_156_5e-16;
/// 2^-53 as the scale of `u >> 11`.
const U64_TO_X: f64 = DITHER_CELL;
/// Largest representable point below 1.
const ONE_MINUS: f64 = 1.0 - f64::EPSILON;

#[inline(always)]
fn u64_to_x(u: u64) -> f64 {
    (u >> 11) as f64 * U64_TO_X
}

#[inline(always)]
fn x_to_u64(x: f64) -> u64 {
    // exact for dyadic x with <= 53 significant bits; low 11 bits zero
    ((x.clamp(0.0, ONE_MINUS) * 9007199254740992.0) as u64) << 11
}

/// Uniform draw in `{0 .. m-1}` from the low 32 bits of a word.
#[inline(always)]
fn small_range(word: u64, m: u64) -> u64 {
    ((word & 0xFFFF_FFFF) * m) >> 32
}

/// Compiled stepping table for non-integer-beta systems.
pub(crate) enum StepTable {
    /// Every map is piecewise linear.
    Linear(Vec<LinearTable>),
    /// Anything else steps through the map's branch structure.
    General(Vec<PiecewiseMap>),
}

pub(crate) struct LinearTable {
    los: Vec<f64>,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
}

impl StepTable {
    #[inline(always)]
    fn step(&self, x: f64, idx: usize) -> f64 {
        match self {
            StepTable::Linear(tables) => {
                let t = &tables[idx];
                let mut b = 0usize;
                while b + 1 < t.los.len() && t.los[b + 1] <= x {
                    b += 1;
                }
                t.slopes[b] * x + t.intercepts[b]
            }
            StepTable::General(maps) => {
                let m = &maps[idx];
                let i = m.branch_index(x);
                m.branches()[i].forward(x)
            }
        }
    }
}

/// Replica stepping engine.
pub(crate) enum Engine {
    /// Integer-beta maps, stepped exactly on the 2^64-cell torus.
    BetaGrid { mults: Vec<u64> },
    /// f64 stepping with one-cell additive dither.
    Float(StepTable),
}

fn as_integer_beta(map: &PiecewiseMap) -> Option<u64> {
    let k = map.branches().len();
    if k < 2 {
        return None;
    }
    let b = k as f64;
    for (i, br) in map.branches().iter().enumerate() {
        let (s, c) = br.linear_params()?;
        let (lo, hi) = br.domain();
        if s != b
            || c != -(i as f64)
            || (lo - i as f64 / b).abs() > 1e-15
            || (hi - (i + 1) as f64 / b).abs() > 1e-15
        {
            return None;
        }
    }
    Some(k as u64)
}

impl Engine {
    pub(crate) fn compile(system: &RandomSystem) -> Engine {
        let mut mults = Vec::new();
        if system.maps().iter().all(|m| {
            if let Some(b) = as_integer_beta(m) {
                mults.push(b);
                true
            } else {
                false
            }
        }) {
            return Engine::BetaGrid { mults };
        }
        let mut tables = Vec::new();
        let all_linear = system.maps().iter().all(|map| {
            let mut t = LinearTable {
                los: Vec::new(),
                slopes: Vec::new(),
                intercepts: Vec::new(),
            };
            let ok = map.branches().iter().all(|b| match b.linear_params() {
                Some((s, c)) => {
                    t.los.push(b.domain().0);
                    t.slopes.push(s);
                    t.intercepts.push(c);
                    true
                }
                None => false,
            });
            tables.push(t);
            ok
        });
        if all_linear {
            Engine::Float(StepTable::Linear(tables))
        } else {
            Engine::Float(StepTable::General(system.maps().to_vec()))
        }
    }

    #[inline(always)]
    fn step_u(&self, u: u64, idx: usize, dither_word: u64) -> u64 {
        match self {
            Engine::BetaGrid { mults } => {
                let b = mults[idx];
                u.wrapping_mul(b)
                    .wrapping_add(small_range(dither_word, b))
            }
            Engine::Float(_) => unreachable!("u64 stepping needs the grid engine"),
        }
    }

    #[inline(always)]
    fn step_x(&self, x: f64, idx: usize, dither_word: u64) -> f64 {
        match self {
            Engine::BetaGrid { .. } => unreachable!("grid engine steps u64 states"),
            Engine::Float(table) => {
                let y = table.step(x, idx)
                    + (dither_word & 0xFFFF_FFFF) as f64 * (DITHER_CELL / 4294967296.0);
                y.clamp(0.0, ONE_MINUS)
            }
        }
    }

    fn is_grid(&self) -> bool {
        matches!(self, Engine::BetaGrid { .. })
    }
}

/// Compiled observable evaluation.
pub(crate) enum PhiTable {
    /// `coeff * cos(2 pi k x) + offset`
    Cosine { k: f64, coeff: f64, offset: f64 },
    General(Observable),
}

impl PhiTable {
    pub(crate) fn compile(obs: &Observable) -> PhiTable {
        let mut cos: Option<(f64, f64)> = None;
        let mut offset = 0.0;
        let mut simple = true;
        for t in obs.terms() {
            match t.kind {
                TermKind::Cosine(k) if cos.is_none() => cos = Some((k as f64, t.coefficient)),
                TermKind::Monomial(0) => offset += t.coefficient,
                _ => {
                    simple = false;
                    break;
                }
            }
        }
        match (simple, cos) {
            (true, Some((k, coeff))) => PhiTable::Cosine { k, coeff, offset },
            _ => PhiTable::General(obs.clone()),
        }
    }

    #[inline(always)]
    pub(crate) fn eval(&self, x: f64) -> f64 {
        match self {
            PhiTable::Cosine { k, coeff, offset } => coeff * cos2pi(k * x) + offset,
            PhiTable::General(obs) => obs.eval(x),
        }
    }
}

/// Per-step map-choice words: absent (single map), per-lane (annealed) or
/// shared (quenched).
#[derive(Clone, Copy)]
enum OmegaKeys {
    None,
    PerLane([u64; LANES]),
    Shared(u64),
}

impl OmegaKeys {
    fn build(plan: &SimulationPlan, first_replica: usize, width: usize) -> OmegaKeys {
        if plan.system.n_maps() == 1 {
            OmegaKeys::None
        } else {
            match plan.quench_mode {
                QuenchMode::Quenched { .. } => OmegaKeys::Shared(plan.omega_stream(0).key()),
                QuenchMode::Annealed => {
                    let mut keys = [0u64; LANES];
                    for (l, key) in keys.iter_mut().enumerate().take(width) {
                        *key = plan.omega_stream((first_replica + l) as u64).key();
                    }
                    OmegaKeys::PerLane(keys)
                }
            }
        }
    }

    #[inline(always)]
    fn words(&self, t: u64, out: &mut [u64; LANES]) {
        match self {
            OmegaKeys::None => {}
            OmegaKeys::Shared(key) => out.fill(CounterRng::from_key(*key).u64_at(t)),
            OmegaKeys::PerLane(keys) => {
                for l in 0..LANES {
                    out[l] = CounterRng::from_key(keys[l]).u64_at(t);
                }
            }
        }
    }
}

fn dither_keys(plan: &SimulationPlan, first_replica: usize, width: usize) -> [u64; LANES] {
    let mut keys = [0u64; LANES];
    for (l, key) in keys.iter_mut().enumerate().take(width) {
        *key = plan.dither_stream((first_replica + l) as u64).key();
    }
    keys
}

/// Lane state: `u` carries the grid position for the grid engine, `x` the
/// point for the float engine; `xs` is the f64 view used by observables.
struct Lanes {
    u: [u64; LANES],
    x: [f64; LANES],
    s: [f64; LANES],
    omega: OmegaKeys,
    dither: [u64; LANES],
}

impl Lanes {
    fn init(engine: &Engine, plan: &SimulationPlan, first_replica: usize, width: usize) -> Lanes {
        let mut u = [0u64; LANES];
        let mut x = [0.5f64; LANES];
        for l in 0..width {
            let r = (first_replica + l) as u64;
            let stream = plan.init_stream(r);
            if engine.is_grid() {
                u[l] = match &plan.initial_law {
                    InitialLaw::Lebesgue => stream.u64_at(0),
                    law => x_to_u64(sample_initial(law, &stream)),
                };
                x[l] = u64_to_x(u[l]);
            } else {
                x[l] = sample_initial(&plan.initial_law, &stream);
            }
        }
        Lanes {
            u,
            x,
            s: [0.0; LANES],
            omega: OmegaKeys::build(plan, first_replica, width),
            dither: dither_keys(plan, first_replica, width),
        }
    }

    /// Advance every lane one transition with step counter `t`.
    #[inline(always)]
    fn advance(&mut self, engine: &Engine, sampler: &IndexSampler, two_maps: bool, t: u64) {
        let mut omega_words = [0u64; LANES];
        self.omega.words(t, &mut omega_words);
        let mut dw = [0u64; LANES];
        for l in 0..LANES {
            dw[l] = CounterRng::from_key(self.dither[l]).u64_at(t);
        }
        match engine {
            Engine::BetaGrid { mults } => {
                match self.omega {
                    OmegaKeys::None => {
                        let b = mults[0];
                        for l in 0..LANES {
                            self.u[l] = self.u[l]
                                .wrapping_mul(b)
                                .wrapping_add(small_range(dw[l], b));
                        }
                    }
                    _ if two_maps => {
                        let t0 = sampler.first_threshold();
                        let (b0, b1) = (mults[0], mults[1]);
                        for l in 0..LANES {
                            let b = if omega_words[l] <= t0 { b0 } else { b1 };
                            self.u[l] = self.u[l]
                                .wrapping_mul(b)
                                .wrapping_add(small_range(dw[l], b));
                        }
                    }
                    _ => {
                        for l in 0..LANES {
                            let idx = sampler.index(omega_words[l]);
                            self.u[l] = engine.step_u(self.u[l], idx, dw[l]);
                        }
                    }
                }
                for l in 0..LANES {
                    self.x[l] = u64_to_x(self.u[l]);
                }
            }
            Engine::Float(_) => {
                for l in 0..LANES {
                    let idx = match self.omega {
                        OmegaKeys::None => 0,
                        _ => sampler.index(omega_words[l]),
                    };
                    self.x[l] = engine.step_x(self.x[l], idx, dw[l]);
                }
            }
        }
    }

    #[inline(always)]
    fn accumulate(&mut self, phi: &PhiTable) {
        match phi {
            PhiTable::Cosine { k, coeff, offset } => {
                for l in 0..LANES {
                    self.s[l] += coeff * cos2pi(k * self.x[l]) + offset;
                }
            }
            PhiTable::General(obs) => {
                for l in 0..LANES {
                    self.s[l] += obs.eval(self.x[l]);
                }
            }
        }
    }
}

/// Raw Birkhoff sums `S_n` recorded at each checkpoint (strictly ascending).
/// Output indexing: `out[ckpt][replica]`.
pub(crate) fn run_checkpoint_sums(plan: &SimulationPlan, checkpoints: &[usize]) -> Vec<Vec<f64>> {
    assert!(!checkpoints.is_empty());
    assert!(checkpoints.windows(2).all(|w| w[0] < w[1]));
    let engine = Engine::compile(&plan.system);
    let phi = PhiTable::compile(&plan.observable);
    let sampler = IndexSampler::new(plan.system.probs());
    let two_maps = plan.system.n_maps() == 2;
    let replicas = plan.replicas;

    let mut out: Vec<Vec<f64>> = checkpoints.iter().map(|_| vec![0.0; replicas]).collect();
    let task_size = LANES * BLOCKS_PER_TASK;
    // split output into disjoint per-task column ranges so scheduling cannot
    // affect results
    let mut slices: Vec<Vec<&mut [f64]>> = Vec::new();
    {
        let mut rests: Vec<&mut [f64]> = out.iter_mut().map(|v| v.as_mut_slice()).collect();
        let mut offset = 0;
        while offset < replicas {
            let len = task_size.min(replicas - offset);
            let mut cols = Vec::with_capacity(checkpoints.len());
            let mut next: Vec<&mut [f64]> = Vec::with_capacity(checkpoints.len());
            for rest in rests.into_iter() {
                let (head, tail) = rest.split_at_mut(len);
                cols.push(head);
                next.push(tail);
            }
            rests = next;
            slices.push(cols);
            offset += len;
        }
    }
    slices
        .into_par_iter()
        .enumerate()
        .for_each(|(task_idx, mut cols)| {
            let first = task_idx * task_size;
            let len = cols[0].len();
            let mut done = 0;
            while done < len {
                let width = LANES.min(len - done);
                let mut lanes = Lanes::init(&engine, plan, first + done, width);
                let mut t = 0usize;
                for (ci, &c) in checkpoints.iter().enumerate() {
                    while t < c {
                        lanes.accumulate(&phi);
                        lanes.advance(&engine, &sampler, two_maps, t as u64);
                        t += 1;
                    }
                    for l in 0..width {
                        cols[ci][done + l] = lanes.s[l];
                    }
                }
                done += width;
            }
        });
    out
}

/// Sums `sum_{j=1..n} 1_{[lo_j, hi_j)}(X_j)` per replica; `lo/hi` are
/// indexed by step `j` with entry 0 unused.
pub(crate) fn run_target_sums(plan: &SimulationPlan, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let n = plan.n;
    assert!(lo.len() == n + 1 && hi.len() == n + 1);
    let engine = Engine::compile(&plan.system);
    let sampler = IndexSampler::new(plan.system.probs());
    let two_maps = plan.system.n_maps() == 2;
    let replicas = plan.replicas;
    let mut out = vec![0.0; replicas];
    let task_size = LANES * BLOCKS_PER_TASK;
    out.par_chunks_mut(task_size)
        .enumerate()
        .for_each(|(task_idx, chunk)| {
            let first = task_idx * task_size;
            let mut done = 0;
            while done < chunk.len() {
                let width = LANES.min(chunk.len() - done);
                let mut lanes = Lanes::init(&engine, plan, first + done, width);
                for j in 1..=n {
                    lanes.advance(&engine, &sampler, two_maps, (j - 1) as u64);
                    let (l, h) = (lo[j], hi[j]);
                    for lane in 0..LANES {
                        let inside = (lanes.x[lane] >= l) & (lanes.x[lane] < h);
                        lanes.s[lane] += inside as u64 as f64;
                    }
                }
                for lane in 0..width {
                    chunk[done + lane] = lanes.s[lane];
                }
                done += width;
            }
        });
    out
}

/// Doubled-orbit sums of `phi(x_k) - phi(y_k)` with the same map sequence
/// on both coordinates; `x0, y0` drawn independently. Coordinates in equal
/// states represent the same point and share their sub-grid dither (so
/// synchronized pairs stay synchronized, as under the exact doubled map);
/// distinct states are distinct points and dither independently.
pub(crate) fn run_doubled_sums(plan: &SimulationPlan, checkpoints: &[usize]) -> Vec<Vec<f64>> {
    assert!(!checkpoints.is_empty());
    let engine = Engine::compile(&plan.system);
    let phi = PhiTable::compile(&plan.observable);
    let sampler = IndexSampler::new(plan.system.probs());
    let replicas = plan.replicas;
    let mut out: Vec<Vec<f64>> = checkpoints.iter().map(|_| vec![0.0; replicas]).collect();

    let task_size = LANES * BLOCKS_PER_TASK;
    let columns: Vec<usize> = (0..replicas).collect();
    let results: Vec<Vec<f64>> = columns
        .par_chunks(task_size)
        .map(|chunk| {
            let mut local = vec![0.0; chunk.len() * checkpoints.len()];
            let mut done = 0;
            while done < chunk.len() {
                let width = LANES.min(chunk.len() - done);
                let first = chunk[done];
                let mut xs = Lanes::init(&engine, plan, first, width);
                // second coordinate: independent start from the aux stream,
                // same map and dither words
                let mut ys = Lanes::init(&engine, plan, first, width);
                for l in 0..width {
                    let r = (first + l) as u64;
                    let stream = plan.aux_stream(r);
                    if engine.is_grid() {
                        ys.u[l] = match &plan.initial_law {
                            InitialLaw::Lebesgue => stream.u64_at(0),
                            law => x_to_u64(sample_initial(law, &stream)),
                        };
                        ys.x[l] = u64_to_x(ys.u[l]);
                    } else {
                        ys.x[l] = sample_initial(&plan.initial_law, &stream);
                    }
                }
                let mut pair_dither = [0u64; LANES];
                for (l, key) in pair_dither.iter_mut().enumerate().take(width) {
                    *key = plan.pair_dither_stream((first + l) as u64).key();
                }
                let mut t = 0usize;
                for (ci, &c) in checkpoints.iter().enumerate() {
                    while t < c {
                        match &phi {
                            PhiTable::Cosine { k, coeff, .. } => {
                                for l in 0..LANES {
                                    xs.s[l] += coeff * (cos2pi(k * xs.x[l]) - cos2pi(k * ys.x[l]));
                                }
                            }
                            PhiTable::General(obs) => {
                                for l in 0..LANES {
                                    xs.s[l] += obs.eval(xs.x[l]) - obs.eval(ys.x[l]);
                                }
                            }
                        }
                        let mut omega_words = [0u64; LANES];
                        xs.omega.words(t as u64, &mut omega_words);
                        for l in 0..LANES {
                            let idx = match xs.omega {
                                OmegaKeys::None => 0,
                                _ => sampler.index(omega_words[l]),
                            };
                            let dx = CounterRng::from_key(xs.dither[l]).u64_at(t as u64);
                            if engine.is_grid() {
                                let dy = if ys.u[l] == xs.u[l] {
                                    dx
                                } else {
                                    CounterRng::from_key(pair_dither[l]).u64_at(t as u64)
                                };
                                xs.u[l] = engine.step_u(xs.u[l], idx, dx);
                                ys.u[l] = engine.step_u(ys.u[l], idx, dy);
                                xs.x[l] = u64_to_x(xs.u[l]);
                                ys.x[l] = u64_to_x(ys.u[l]);
                            } else {
                                let dy = if ys.x[l] == xs.x[l] {
                                    dx
                                } else {
                                    CounterRng::from_key(pair_dither[l]).u64_at(t as u64)
                                };
                                xs.x[l] = engine.step_x(xs.x[l], idx, dx);
                                ys.x[l] = engine.step_x(ys.x[l], idx, dy);
                            }
                        }
                        t += 1;
                    }
                    for l in 0..width {
                        local[ci * chunk.len() + done + l] = xs.s[l];
                    }
                }
                done += width;
            }
            local
        })
        .collect();
    for (task_idx, local) in results.into_iter().enumerate() {
        let first = task_idx * task_size;
        let len = local.len() / checkpoints.len();
        for ci in 0..checkpoints.len() {
            out[ci][first..first + len].copy_from_slice(&local[ci * len..(ci + 1) * len]);
        }
    }
    out
}

/// Scalar single-replica orbit iterator used by the slower statistics.
struct ScalarOrbit<'a> {
    engine: &'a Engine,
    sampler: &'a IndexSampler,
    single: bool,
    omega: CounterRng,
    dither: CounterRng,
    u: u64,
    x: f64,
}

impl<'a> ScalarOrbit<'a> {
    fn new(
        engine: &'a Engine,
        sampler: &'a IndexSampler,
        plan: &SimulationPlan,
        replica: u64,
    ) -> ScalarOrbit<'a> {
        let stream = plan.init_stream(replica);
        let (u, x) = if engine.is_grid() {
            let u = match &plan.initial_law {
                InitialLaw::Lebesgue => stream.u64_at(0),
                law => x_to_u64(sample_initial(law, &stream)),
            };
            (u, u64_to_x(u))
        } else {
            (0, sample_initial(&plan.initial_law, &stream))
        };
        ScalarOrbit {
            engine,
            sampler,
            single: plan.system.n_maps() == 1,
            omega: plan.omega_stream(replica),
            dither: plan.dither_stream(replica),
            u,
            x,
        }
    }

    #[inline(always)]
    fn step(&mut self, t: u64) {
        let idx = if self.single {
            0
        } else {
            self.sampler.index(self.omega.u64_at(t))
        };
        let dw = self.dither.u64_at(t);
        if self.engine.is_grid() {
            self.u = self.engine.step_u(self.u, idx, dw);
            self.x = u64_to_x(self.u);
        } else {
            self.x = self.engine.step_x(self.x, idx, dw);
        }
    }
}

/// Maximal windowed Birkhoff sum over windows of length `window` inside an
/// orbit of length `n` (per replica).
pub(crate) fn run_windowed_max(plan: &SimulationPlan, window: usize) -> Vec<f64> {
    let n = plan.n;
    assert!(window >= 1 && window <= n);
    let engine = Engine::compile(&plan.system);
    let phi = PhiTable::compile(&plan.observable);
    let sampler = IndexSampler::new(plan.system.probs());
    (0..plan.replicas)
        .into_par_iter()
        .map(|r| {
            let mut orbit = ScalarOrbit::new(&engine, &sampler, plan, r as u64);
            let mut ring = vec![0.0f64; window];
            let mut wsum = 0.0;
            let mut best = f64::NEG_INFINITY;
            for t in 0..n {
                let v = phi.eval(orbit.x);
                wsum += v - ring[t % window];
                ring[t % window] = v;
                if t + 1 >= window {
                    best = best.max(wsum);
                }
                orbit.step(t as u64);
            }
            best
        })
        .collect()
}

/// Visit every replica's full orbit `X_0 .. X_{n-1}` through a reused
/// buffer, in replica order.
pub(crate) fn for_each_orbit(plan: &SimulationPlan, mut visit: impl FnMut(usize, &[f64])) {
    let engine = Engine::compile(&plan.system);
    let sampler = IndexSampler::new(plan.system.probs());
    let mut buf = vec![0.0f64; plan.n];
    for r in 0..plan.replicas {
        let mut orbit = ScalarOrbit::new(&engine, &sampler, plan, r as u64);
        for (t, slot) in buf.iter_mut().enumerate() {
            *slot = orbit.x;
            orbit.step(t as u64);
        }
        visit(r, &buf);
    }
}

/// Mean of `g(X_0, X_1)` over replicas with stationary-coupled single steps
/// (used by the martingale cross-check).
pub(crate) fn pair_statistic_mean(plan: &SimulationPlan, g: impl Fn(f64, f64) -> f64) -> f64 {
    let engine = Engine::compile(&plan.system);
    let sampler = IndexSampler::new(plan.system.probs());
    let mut acc = 0.0;
    for r in 0..plan.replicas {
        let mut orbit = ScalarOrbit::new(&engine, &sampler, plan, r as u64);
        let x0 = orbit.x;
        orbit.step(0);
        acc += g(x0, orbit.x);
    }
    acc / plan.replicas as f64
}

/// Scalar reference implementation of the checkpointed Birkhoff sum; pins
/// the blocked engine bit-for-bit.
#[cfg(test)]
pub(crate) fn scalar_checkpoint_sums(plan: &SimulationPlan, checkpoints: &[usize]) -> Vec<Vec<f64>> {
    let engine = Engine::compile(&plan.system);
    let phi = PhiTable::compile(&plan.observable);
    let sampler = IndexSampler::new(plan.system.probs());
    let mut out: Vec<Vec<f64>> = checkpoints
        .iter()
        .map(|_| vec![0.0; plan.replicas])
        .collect();
    for r in 0..plan.replicas {
        let mut orbit = ScalarOrbit::new(&engine, &sampler, plan, r as u64);
        let mut s = 0.0;
        let mut t = 0usize;
        for (ci, &c) in checkpoints.iter().enumerate() {
            while t < c {
                s += phi.eval(orbit.x);
                orbit.step(t as u64);
                t += 1;
            }
            out[ci][r] = s;
        }
    }
    out
}
