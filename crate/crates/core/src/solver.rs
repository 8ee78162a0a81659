//! Box-constrained NMF: minimize `‖Y − XW‖_F` subject to `0 ≤ X ≤ 1`, `0 ≤ W ≤ 1`.
//!
//! The solver alternates projected gradient steps on X (W fixed) and on W
//! (X fixed). Each half-step starts from `initial_step / L`, where `L` is a
//! Frobenius-norm bound on the Lipschitz constant of that block's gradient,
//! and backtracks until the objective does not increase. Projection is a hard
//! clamp, so every accepted iterate is feasible exactly.
//!
//! Layouts used throughout: X is frame-major (`x[m*N + n]`), W is
//! viewer-major (`w[k*M + m]`), Y and the residual are target-major
//! (`y[k*N + n]`). Every reduction runs in a fixed order, so the sequential
//! and parallel execution policies give bit-identical results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{mismatch, Error, Result};
use crate::exec::{self, Execution};
use crate::model::{Factorization, Image, PinMask, TargetSet, Termination, WeightMatrix};

/// How the first iterate is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitStrategy {
    /// X and W entries drawn independently, uniform in `[0, 1)`.
    #[default]
    SeededUniform,
    /// First K frames are the targets, W is the identity padded with zeros. Needs `M ≥ K`.
    ReplicateTargets,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop once `(f_prev − f) ≤ rel_tolerance · f_prev`.
    pub rel_tolerance: f64,
    pub seed: u64,
    /// Extra runs from derived seeds; the best final objective wins.
    pub restarts: usize,
    pub initial_step: f64,
    pub backtrack_factor: f64,
    pub init_strategy: InitStrategy,
    pub execution: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 500,
            rel_tolerance: 1e-6,
            seed: 0,
            restarts: 0,
            initial_step: 1.0,
            backtrack_factor: 0.5,
            init_strategy: InitStrategy::SeededUniform,
            execution: Execution::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        if !(self.rel_tolerance.is_finite() && self.rel_tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "rel_tolerance must be positive, got {}",
                self.rel_tolerance
            )));
        }
        if !(self.initial_step.is_finite() && self.initial_step > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "initial_step must be positive, got {}",
                self.initial_step
            )));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "backtrack_factor must lie strictly inside (0, 1), got {}",
                self.backtrack_factor
            )));
        }
        Ok(())
    }
}

/// One fixed W entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pin {
    pub frame: usize,
    pub viewer: usize,
    pub value: f64,
}

/// W entries to hold fixed during optimization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PinSpec {
    pins: Vec<Pin>,
}

impl PinSpec {
    pub fn new() -> Self {
        PinSpec::default()
    }

    pub fn pin(mut self, frame: usize, viewer: usize, value: f64) -> Self {
        self.pins.push(Pin { frame, viewer, value });
        self
    }

    /// Pins the whole column of `viewer` to `values` (one per frame).
    pub fn column(mut self, viewer: usize, values: &[f64]) -> Self {
        for (frame, &value) in values.iter().enumerate() {
            self.pins.push(Pin { frame, viewer, value });
        }
        self
    }

    pub fn pins(&self) -> &[Pin] {
        &self.pins
    }

    fn validate(&self, frames: usize, viewers: usize) -> Result<()> {
        for p in &self.pins {
            if p.frame >= frames || p.viewer >= viewers {
                return Err(mismatch(format!(
                    "pin ({}, {}) outside the {frames}x{viewers} weight matrix",
                    p.frame, p.viewer
                )));
            }
            if !(0.0..=1.0).contains(&p.value) {
                return Err(Error::OutOfRange(format!("pinned value {} is outside [0, 1]", p.value)));
            }
        }
        Ok(())
    }

    fn mask(&self, frames: usize, viewers: usize) -> PinMask {
        let mut mask = PinMask::none(frames, viewers);
        for p in &self.pins {
            mask.pin(p.frame, p.viewer);
        }
        mask
    }

    fn apply(&self, w: &mut [f64], frames: usize) {
        for p in &self.pins {
            w[p.viewer * frames + p.frame] = p.value;
        }
    }
}

/// Problem dimensions plus the flattened targets.
struct Problem {
    y: Vec<f64>,
    n: usize,
    m: usize,
    k: usize,
    width: usize,
    height: usize,
    exec: Execution,
}

impl Problem {
    fn new(targets: &TargetSet, m: usize, exec: Execution) -> Self {
        Problem {
            y: targets.flatten(),
            n: targets.pixel_count(),
            m,
            k: targets.len(),
            width: targets.width(),
            height: targets.height(),
            exec,
        }
    }

    fn check(&self, f: &Factorization) -> Result<()> {
        if f.pixel_count() != self.n || f.frames()[0].width() != self.width {
            return Err(mismatch(format!(
                "atom frames are {}x{}, targets are {}x{}",
                f.frames()[0].width(),
                f.frames()[0].height(),
                self.width,
                self.height
            )));
        }
        if f.viewer_count() != self.k {
            return Err(mismatch(format!(
                "W has {} columns for {} targets",
                f.viewer_count(),
                self.k
            )));
        }
        Ok(())
    }

    /// `r = XW − Y`, target-major.
    fn residual(&self, x: &[f64], w: &[f64], r: &mut [f64]) {
        let (n, m) = (self.n, self.m);
        let y = &self.y;
        exec::for_each_chunk_mut(self.exec, r, ROW_CHUNK, |c, chunk| {
            let base = c * ROW_CHUNK;
            for (i, out) in chunk.iter_mut().enumerate() {
                let idx = base + i;
                let (k, p) = (idx / n, idx % n);
                let wk = &w[k * m..(k + 1) * m];
                let mut acc = 0.0;
                for (j, &wj) in wk.iter().enumerate() {
                    acc += x[j * n + p] * wj;
                }
                *out = acc - y[idx];
            }
        });
    }

    fn norm(&self, r: &[f64]) -> f64 {
        exec::sum_squares(self.exec, r).sqrt()
    }

    /// `∂‖r‖²/∂X = 2 (XW − Y) Wᵀ`, frame-major.
    fn grad_frames(&self, r: &[f64], w: &[f64]) -> Vec<f64> {
        let (n, m, k) = (self.n, self.m, self.k);
        let mut g = vec![0.0; m * n];
        exec::for_each_chunk_mut(self.exec, &mut g, ROW_CHUNK, |c, chunk| {
            let base = c * ROW_CHUNK;
            for (i, out) in chunk.iter_mut().enumerate() {
                let idx = base + i;
                let (j, p) = (idx / n, idx % n);
                let mut acc = 0.0;
                for v in 0..k {
                    acc += r[v * n + p] * w[v * m + j];
                }
                *out = 2.0 * acc;
            }
        });
        g
    }

    /// `∂‖r‖²/∂W = 2 Xᵀ (XW − Y)`, viewer-major.
    fn grad_weights(&self, x: &[f64], r: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        exec::map_range(self.exec, m * self.k, m * self.k * n, |idx| {
            let (v, j) = (idx / m, idx % m);
            let xj = &x[j * n..(j + 1) * n];
            let rv = &r[v * n..(v + 1) * n];
            2.0 * xj.iter().zip(rv).fold(0.0, |acc, (a, b)| acc + a * b)
        })
    }

    /// `2‖W Wᵀ‖_F`, an upper bound on the Lipschitz constant of the X-gradient.
    fn lipschitz_frames(&self, w: &[f64]) -> f64 {
        let (m, k) = (self.m, self.k);
        let mut sq = 0.0;
        for a in 0..m {
            for b in 0..m {
                let mut g = 0.0;
                for v in 0..k {
                    g += w[v * m + a] * w[v * m + b];
                }
                sq += g * g;
            }
        }
        2.0 * sq.sqrt()
    }

    /// `2‖XᵀX‖_F`, an upper bound on the Lipschitz constant of the W-gradient.
    fn lipschitz_weights(&self, x: &[f64]) -> f64 {
        let (n, m) = (self.n, self.m);
        let gram = exec::map_range(self.exec, m * m, m * m * n, |idx| {
            let (a, b) = (idx / m, idx % m);
            x[a * n..(a + 1) * n]
                .iter()
                .zip(&x[b * n..(b + 1) * n])
                .fold(0.0, |acc, (p, q)| acc + p * q)
        });
        2.0 * gram.iter().fold(0.0, |acc, g| acc + g * g).sqrt()
    }
}

const ROW_CHUNK: usize = 1024;

/// Relative floor on the trial step; below it a line search gives up.
const MIN_STEP_RATIO: f64 = 1e-12;

/// Outcome of one projected-gradient half-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfStep {
    /// Objective strictly decreased.
    Descended,
    /// A step was accepted but the objective is unchanged (zero projected gradient).
    Unchanged,
    /// Backtracking hit the minimum step without a non-increasing trial.
    Stalled,
}

/// Mutable solver iterate.
struct Iterate {
    x: Vec<f64>,
    w: Vec<f64>,
    r: Vec<f64>,
    objective: f64,
}

impl Iterate {
    fn new(problem: &Problem, x: Vec<f64>, w: Vec<f64>) -> Self {
        let mut r = vec![0.0; problem.k * problem.n];
        problem.residual(&x, &w, &mut r);
        let objective = problem.norm(&r);
        Iterate { x, w, r, objective }
    }
}

fn project(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

fn descend_frames_inner(problem: &Problem, it: &mut Iterate, cfg: &SolverConfig) -> HalfStep {
    let g = problem.grad_frames(&it.r, &it.w);
    let lip = problem.lipschitz_frames(&it.w);
    if lip == 0.0 || g.iter().all(|&v| v == 0.0) {
        return HalfStep::Unchanged;
    }
    let t0 = cfg.initial_step / lip;
    let mut t = t0;
    let mut trial = vec![0.0; it.x.len()];
    let mut r = vec![0.0; it.r.len()];
    loop {
        for ((out, &x), &gx) in trial.iter_mut().zip(&it.x).zip(&g) {
            *out = project(x - t * gx);
        }
        problem.residual(&trial, &it.w, &mut r);
        let f = problem.norm(&r);
        if f <= it.objective {
            let outcome = if f < it.objective {
                HalfStep::Descended
            } else {
                HalfStep::Unchanged
            };
            it.x = trial;
            it.r = r;
            it.objective = f;
            return outcome;
        }
        t *= cfg.backtrack_factor;
        if t < MIN_STEP_RATIO * t0 {
            return HalfStep::Stalled;
        }
    }
}

fn descend_weights_inner(problem: &Problem, it: &mut Iterate, pins: &PinMask, cfg: &SolverConfig) -> HalfStep {
    let mut g = problem.grad_weights(&it.x, &it.r);
    for (gv, &pinned) in g.iter_mut().zip(pins.as_slice()) {
        if pinned {
            *gv = 0.0;
        }
    }
    let lip = problem.lipschitz_weights(&it.x);
    if lip == 0.0 || g.iter().all(|&v| v == 0.0) {
        return HalfStep::Unchanged;
    }
    let t0 = cfg.initial_step / lip;
    let mut t = t0;
    let mut trial = vec![0.0; it.w.len()];
    let mut r = vec![0.0; it.r.len()];
    loop {
        for (i, out) in trial.iter_mut().enumerate() {
            *out = if pins.as_slice()[i] {
                it.w[i]
            } else {
                project(it.w[i] - t * g[i])
            };
        }
        problem.residual(&it.x, &trial, &mut r);
        let f = problem.norm(&r);
        if f <= it.objective {
            let outcome = if f < it.objective {
                HalfStep::Descended
            } else {
                HalfStep::Unchanged
            };
            it.w = trial;
            it.r = r;
            it.objective = f;
            return outcome;
        }
        t *= cfg.backtrack_factor;
        if t < MIN_STEP_RATIO * t0 {
            return HalfStep::Stalled;
        }
    }
}

/// Result of one alternating pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassOutcome {
    pub frames: HalfStep,
    pub weights: HalfStep,
}

impl PassOutcome {
    pub fn stalled(&self) -> bool {
        self.frames == HalfStep::Stalled && self.weights == HalfStep::Stalled
    }
}

fn pass(problem: &Problem, it: &mut Iterate, pins: &PinMask, cfg: &SolverConfig) -> PassOutcome {
    let frames = descend_frames_inner(problem, it, cfg);
    let weights = descend_weights_inner(problem, it, pins, cfg);
    PassOutcome { frames, weights }
}

/// A single solver run that can be driven one pass at a time.
///
/// `factorize` is built on this; it is public so callers can observe every
/// accepted iterate.
pub struct Solver {
    problem: Problem,
    it: Iterate,
    pins: PinMask,
    cfg: SolverConfig,
    history: Vec<f64>,
    termination: Termination,
}

impl Solver {
    /// Starts from an existing factorization.
    pub fn from_factorization(targets: &TargetSet, start: &Factorization, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let problem = Problem::new(targets, start.frame_count(), cfg.execution);
        problem.check(start)?;
        let it = Iterate::new(&problem, start.flat_frames(), start.weights().as_slice().to_vec());
        let history = if start.objective_history().is_empty() {
            vec![it.objective]
        } else {
            start.objective_history().to_vec()
        };
        Ok(Solver {
            problem,
            it,
            pins: start.pins().clone(),
            cfg: cfg.clone(),
            history,
            termination: Termination::NotRun,
        })
    }

    /// Runs one alternating pass and records the objective.
    pub fn iterate(&mut self) -> PassOutcome {
        let before = self.it.objective;
        let outcome = pass(&self.problem, &mut self.it, &self.pins, &self.cfg);
        if outcome.stalled() {
            self.termination = Termination::Stalled;
            return outcome;
        }
        self.history.push(self.it.objective);
        if before - self.it.objective <= self.cfg.rel_tolerance * before {
            self.termination = Termination::Converged;
        }
        outcome
    }

    /// Iterates until convergence, stall, or the iteration budget.
    pub fn run(&mut self) {
        let mut used = 0;
        while self.termination == Termination::NotRun {
            if used == self.cfg.max_iterations {
                self.termination = Termination::MaxIterations;
                break;
            }
            self.iterate();
            used += 1;
        }
    }

    pub fn objective(&self) -> f64 {
        self.it.objective
    }

    /// Frame-major X of the current iterate.
    pub fn frames(&self) -> &[f64] {
        &self.it.x
    }

    /// Viewer-major W of the current iterate.
    pub fn weights(&self) -> &[f64] {
        &self.it.w
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    pub fn into_factorization(self) -> Factorization {
        let Problem {
            n, m, k, width, height, ..
        } = self.problem;
        let frames = self
            .it
            .x
            .chunks(n)
            .map(|c| Image::from_parts(width, height, c.to_vec()))
            .collect();
        Factorization::from_solver(
            frames,
            WeightMatrix::from_parts(m, k, self.it.w),
            self.pins,
            self.history,
            self.termination,
        )
    }
}

/// `‖Y − XW‖_F`.
pub fn objective(targets: &TargetSet, f: &Factorization) -> Result<f64> {
    let problem = Problem::new(targets, f.frame_count(), Execution::default());
    problem.check(f)?;
    Ok(Iterate::new(&problem, f.flat_frames(), f.weights().as_slice().to_vec()).objective)
}

/// Analytic gradients of `‖Y − XW‖²_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// `2 (XW − Y) Wᵀ`, frame-major (`[m*N + n]`).
    pub frames: Vec<f64>,
    /// `2 Xᵀ (XW − Y)`, viewer-major (`[k*M + m]`).
    pub weights: Vec<f64>,
}

pub fn gradients(targets: &TargetSet, f: &Factorization) -> Result<Gradients> {
    let problem = Problem::new(targets, f.frame_count(), Execution::default());
    problem.check(f)?;
    let it = Iterate::new(&problem, f.flat_frames(), f.weights().as_slice().to_vec());
    Ok(Gradients {
        frames: problem.grad_frames(&it.r, &it.w),
        weights: problem.grad_weights(&it.x, &it.r),
    })
}

/// Builds the starting factorization.
pub fn init(targets: &TargetSet, frames: usize, pins: Option<&PinSpec>, cfg: &SolverConfig) -> Result<Factorization> {
    init_seeded(targets, frames, pins, cfg, cfg.seed)
}

fn init_seeded(
    targets: &TargetSet,
    m: usize,
    pins: Option<&PinSpec>,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<Factorization> {
    if m == 0 {
        return Err(Error::InvalidConfig("at least one atom frame is required".into()));
    }
    let (n, k) = (targets.pixel_count(), targets.len());
    if let Some(p) = pins {
        p.validate(m, k)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x, mut w) = match cfg.init_strategy {
        InitStrategy::SeededUniform => {
            let x: Vec<f64> = (0..m * n).map(|_| rng.random::<f64>()).collect();
            let w: Vec<f64> = (0..k * m).map(|_| rng.random::<f64>()).collect();
            (x, w)
        }
        InitStrategy::ReplicateTargets => {
            if m < k {
                return Err(Error::InvalidConfig(format!(
                    "replicate-targets needs at least as many frames as targets ({m} < {k})"
                )));
            }
            let mut x = targets.flatten();
            x.extend((0..(m - k) * n).map(|_| rng.random::<f64>()));
            let mut w = vec![0.0; k * m];
            for v in 0..k {
                w[v * m + v] = 1.0;
            }
            (x, w)
        }
    };
    let mask = match pins {
        Some(p) => {
            p.apply(&mut w, m);
            p.mask(m, k)
        }
        None => PinMask::none(m, k),
    };
    let frames = x
        .chunks(n)
        .map(|c| Image::from_parts(targets.width(), targets.height(), c.to_vec()))
        .collect();
    Factorization::with_pins(frames, WeightMatrix::from_parts(m, k, w), mask)
}

/// One alternating pass: X half-step then W half-step.
pub fn step(targets: &TargetSet, f: &Factorization, cfg: &SolverConfig) -> Result<Factorization> {
    let mut solver = Solver::from_factorization(targets, f, cfg)?;
    solver.iterate();
    Ok(solver.into_factorization())
}

/// Only the X half-step.
pub fn descend_frames(targets: &TargetSet, f: &Factorization, cfg: &SolverConfig) -> Result<(Factorization, HalfStep)> {
    let mut solver = Solver::from_factorization(targets, f, cfg)?;
    let outcome = descend_frames_inner(&solver.problem, &mut solver.it, &solver.cfg);
    if outcome != HalfStep::Stalled {
        solver.history.push(solver.it.objective);
    }
    Ok((solver.into_factorization(), outcome))
}

/// Only the W half-step (pinned entries untouched).
pub fn descend_weights(
    targets: &TargetSet,
    f: &Factorization,
    cfg: &SolverConfig,
) -> Result<(Factorization, HalfStep)> {
    let mut solver = Solver::from_factorization(targets, f, cfg)?;
    let outcome = descend_weights_inner(&solver.problem, &mut solver.it, &solver.pins, &solver.cfg);
    if outcome != HalfStep::Stalled {
        solver.history.push(solver.it.objective);
    }
    Ok((solver.into_factorization(), outcome))
}

/// Seed for restart `index`; restart 0 uses the configured seed itself.
pub fn restart_seed(seed: u64, index: usize) -> u64 {
    if index == 0 {
        return seed;
    }
    // splitmix64 finalizer over (seed, index)
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Factorizes the targets into `frames` atom frames and a weight matrix.
pub fn factorize(
    targets: &TargetSet,
    frames: usize,
    pins: Option<&PinSpec>,
    cfg: &SolverConfig,
) -> Result<Factorization> {
    cfg.validate()?;
    if frames == 0 {
        return Err(Error::InvalidConfig("at least one atom frame is required".into()));
    }
    if let Some(p) = pins {
        p.validate(frames, targets.len())?;
    }
    let runs = cfg.restarts + 1;
    let results = exec::map_range(cfg.execution, runs, if runs > 1 { usize::MAX } else { 0 }, |r| {
        let start = init_seeded(targets, frames, pins, cfg, restart_seed(cfg.seed, r))?;
        let mut solver = Solver::from_factorization(targets, &start, cfg)?;
        solver.run();
        Ok(solver.into_factorization())
    });
    let mut best: Option<Factorization> = None;
    for res in results {
        let f = res?;
        let better = match &best {
            None => true,
            Some(b) => final_objective(&f) < final_objective(b),
        };
        if better {
            best = Some(f);
        }
    }
    Ok(best.expect("at least one run"))
}

fn final_objective(f: &Factorization) -> f64 {
    *f.objective_history()
        .last()
        .expect("solver records the initial objective")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(v: &[f64]) -> Image {
        Image::new(v.len(), 1, v.to_vec()).unwrap()
    }

    fn random_targets(seed: u64, n: usize, k: usize) -> TargetSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TargetSet::new(
            (0..k)
                .map(|_| img(&(0..n).map(|_| rng.random::<f64>()).collect::<Vec<_>>()))
                .collect(),
        )
        .unwrap()
    }

    /// Independent residual: explicit triple loop over Image/WeightMatrix accessors.
    fn residual_oracle(y: &TargetSet, f: &Factorization) -> f64 {
        let mut s = 0.0;
        for (k, target) in y.images().iter().enumerate() {
            for p in 0..y.pixel_count() {
                let mut v = 0.0;
                for m in 0..f.frame_count() {
                    v += f.frames()[m].pixels()[p] * f.weights().get(m, k);
                }
                let d = target.pixels()[p] - v;
                s += d * d;
            }
        }
        s.sqrt()
    }

    #[test]
    fn objective_of_exact_factorization_is_zero() {
        let y = TargetSet::new(vec![img(&[0.1, 0.2]), img(&[0.9, 0.4])]).unwrap();
        let f = Factorization::new(
            y.images().to_vec(),
            WeightMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(objective(&y, &f).unwrap(), 0.0);
    }

    #[test]
    fn objective_forced_arithmetic() {
        let y = TargetSet::new(vec![img(&[1.0])]).unwrap();
        let f = Factorization::new(vec![img(&[0.0])], WeightMatrix::from_rows(&[&[0.0]]).unwrap()).unwrap();
        assert_eq!(objective(&y, &f).unwrap(), 1.0);
    }

    #[test]
    fn objective_matches_double_loop() {
        let y = random_targets(11, 3, 2);
        let f = init(
            &y,
            2,
            None,
            &SolverConfig {
                seed: 5,
                ..Default::default()
            },
        )
        .unwrap();
        approx::assert_abs_diff_eq!(objective(&y, &f).unwrap(), residual_oracle(&y, &f), epsilon = 1e-12);
    }

    #[test]
    fn objective_rejects_mismatch() {
        let y = random_targets(1, 3, 2);
        let f = init(&random_targets(1, 4, 2), 2, None, &SolverConfig::default()).unwrap();
        assert!(matches!(objective(&y, &f), Err(Error::DimensionMismatch(_))));
        let f = init(&random_targets(1, 3, 3), 2, None, &SolverConfig::default()).unwrap();
        assert!(matches!(objective(&y, &f), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn init_is_deterministic_and_feasible() {
        let y = random_targets(3, 10, 3);
        let cfg = SolverConfig {
            seed: 42,
            ..Default::default()
        };
        let a = init(&y, 4, None, &cfg).unwrap();
        let b = init(&y, 4, None, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a
            .flat_frames()
            .iter()
            .chain(a.weights().as_slice())
            .all(|v| (0.0..=1.0).contains(v)));
        let c = init(
            &y,
            4,
            None,
            &SolverConfig {
                seed: 43,
                ..Default::default()
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn replicate_targets_is_exact() {
        let y = random_targets(8, 6, 2);
        let cfg = SolverConfig {
            init_strategy: InitStrategy::ReplicateTargets,
            ..Default::default()
        };
        let f = init(&y, 2, None, &cfg).unwrap();
        assert_eq!(objective(&y, &f).unwrap(), 0.0);
        let f = init(&y, 3, None, &cfg).unwrap();
        assert_eq!(objective(&y, &f).unwrap(), 0.0);
        assert!(matches!(init(&y, 1, None, &cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn init_applies_pins() {
        let y = random_targets(2, 5, 2);
        let pins = PinSpec::new().column(0, &[1.0, 1.0]).pin(1, 1, 0.25);
        let f = init(&y, 2, Some(&pins), &SolverConfig::default()).unwrap();
        assert_eq!(f.weights().column(0), &[1.0, 1.0]);
        assert_eq!(f.weights().get(1, 1), 0.25);
        assert!(f.pins().is_pinned(0, 0) && f.pins().is_pinned(1, 1) && !f.pins().is_pinned(0, 1));
        assert!(init(&y, 2, Some(&PinSpec::new().pin(2, 0, 0.5)), &SolverConfig::default()).is_err());
        assert!(init(&y, 2, Some(&PinSpec::new().pin(0, 0, 1.5)), &SolverConfig::default()).is_err());
    }

    #[test]
    fn step_at_optimum_is_a_fixed_point() {
        let y = random_targets(4, 5, 2);
        let cfg = SolverConfig {
            init_strategy: InitStrategy::ReplicateTargets,
            ..Default::default()
        };
        let f = init(&y, 2, None, &cfg).unwrap();
        let g = step(&y, &f, &cfg).unwrap();
        assert_eq!(f.frames(), g.frames());
        assert_eq!(f.weights(), g.weights());
    }

    #[test]
    fn step_never_increases_objective() {
        for seed in 0..20 {
            let y = random_targets(100 + seed, 7, 3);
            let cfg = SolverConfig {
                seed,
                ..Default::default()
            };
            let f = init(&y, 2, None, &cfg).unwrap();
            let g = step(&y, &f, &cfg).unwrap();
            assert!(objective(&y, &g).unwrap() <= objective(&y, &f).unwrap());
        }
    }

    #[test]
    fn weight_half_step_hand_computed() {
        // Y = [0.5, 0.5], X = [1, 1], W = [1]: residual XW − Y = [0.5, 0.5],
        // gradient 2 Xᵀ r = 2, Lipschitz bound 2‖XᵀX‖ = 4, first trial 1 − 2/4 = 0.5.
        let y = TargetSet::new(vec![img(&[0.5, 0.5])]).unwrap();
        let f = Factorization::new(vec![img(&[1.0, 1.0])], WeightMatrix::from_rows(&[&[1.0]]).unwrap()).unwrap();
        let g = gradients(&y, &f).unwrap();
        assert_eq!(g.weights, vec![2.0]);
        let cfg = SolverConfig::default();
        let (after, outcome) = descend_weights(&y, &f, &cfg).unwrap();
        assert_eq!(outcome, HalfStep::Descended);
        let w = after.weights().get(0, 0);
        assert!((0.5..1.0).contains(&w));
        assert!(objective(&y, &after).unwrap() < objective(&y, &f).unwrap());
        assert_eq!(w, 0.5);
    }

    #[test]
    fn pinned_entries_survive_the_run_bitwise() {
        let y = random_targets(9, 12, 3);
        let pins = PinSpec::new().column(0, &[1.0, 1.0, 1.0]).pin(2, 2, 0.3);
        let f = factorize(
            &y,
            3,
            Some(&pins),
            &SolverConfig {
                seed: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(f.weights().column(0), &[1.0, 1.0, 1.0]);
        assert_eq!(f.weights().get(2, 2).to_bits(), 0.3f64.to_bits());
    }

    #[test]
    fn factorize_rank_one() {
        let y = TargetSet::new(vec![img(&[0.1, 0.5, 0.9, 0.3])]).unwrap();
        let f = factorize(
            &y,
            1,
            None,
            &SolverConfig {
                max_iterations: 5000,
                rel_tolerance: 1e-12,
                ..Default::default()
            },
        )
        .unwrap();
        let norm = y.images()[0].pixels().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(
            objective(&y, &f).unwrap() <= 1e-6 * norm,
            "{}",
            objective(&y, &f).unwrap()
        );
    }

    #[test]
    fn invalid_config_is_rejected() {
        let y = random_targets(0, 3, 1);
        for cfg in [
            SolverConfig {
                max_iterations: 0,
                ..Default::default()
            },
            SolverConfig {
                rel_tolerance: 0.0,
                ..Default::default()
            },
            SolverConfig {
                initial_step: -1.0,
                ..Default::default()
            },
            SolverConfig {
                backtrack_factor: 1.0,
                ..Default::default()
            },
            SolverConfig {
                backtrack_factor: 0.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(factorize(&y, 1, None, &cfg), Err(Error::InvalidConfig(_))));
        }
        assert!(factorize(&y, 0, None, &SolverConfig::default()).is_err());
    }

    #[test]
    fn restarts_pick_the_best_run() {
        let y = random_targets(21, 8, 3);
        let base = SolverConfig {
            seed: 3,
            max_iterations: 50,
            ..Default::default()
        };
        let many = factorize(
            &y,
            2,
            None,
            &SolverConfig {
                restarts: 4,
                ..base.clone()
            },
        )
        .unwrap();
        for r in 0..5 {
            let single = factorize(
                &y,
                2,
                None,
                &SolverConfig {
                    seed: restart_seed(3, r),
                    ..base.clone()
                },
            )
            .unwrap();
            assert!(objective(&y, &many).unwrap() <= objective(&y, &single).unwrap());
        }
    }

    #[test]
    fn sequential_and_parallel_runs_are_bit_identical() {
        let y = random_targets(77, 9000, 2);
        let seq = SolverConfig {
            max_iterations: 15,
            restarts: 1,
            execution: Execution::Sequential,
            ..Default::default()
        };
        let par = SolverConfig {
            execution: Execution::Parallel,
            ..seq.clone()
        };
        let a = factorize(&y, 3, None, &seq).unwrap();
        let b = factorize(&y, 3, None, &par).unwrap();
        assert_eq!(a, b);
        let bits = |f: &Factorization| f.objective_history().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }
}
