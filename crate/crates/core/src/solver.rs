//! Alternating-maximization solver for the redundancy bottleneck.
//!
//! The optimization variable is a channel `r(q | s, z)` with one row per
//! support pair `(s, z)`. Each step refreshes the variational joint
//! `omega(y, s, z, q) = p(y, s, z) r(q | s, z)` and then solves for the next
//! channel in closed form:
//!
//! ```text
//! r'(q|s,z) ∝ exp( sum_y p(y|s,z) [ b ln omega(y|q,s)
//!                                    - ln( p(z|s,y) / (omega(q|y) omega(z|s,y,q)) ) ] )
//! ```
//!
//! with `b = beta` for the linear Lagrangian and `b = beta exp(-I(Q;S|Y))`
//! for the exponential one. Using `omega(z|s,y,q) = p(y,s,z) r(q|s,z) /
//! omega(y,q,s)` the exponent reduces to
//! `ln r(q|s,z) + sum_y p(y|s,z) [b ln omega(y|q,s) + ln omega(q|y) - ln omega(q|s,y)]`,
//! which is what [`ba_step`] evaluates; zeros of `r` stay zero.

use ndarray::{Array2, Array3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use thiserror::Error;

use crate::problem::RbProblem;
use crate::LN2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("beta grid is empty")]
    EmptyGrid,
    #[error("beta grid must be positive and strictly ascending")]
    BadGrid,
    #[error("compression rate must be non-negative, got {0}")]
    NegativeRate(f64),
    #[error("curve has no points")]
    EmptyCurve,
    #[error("bottleneck channel shape {found:?} does not match problem ({expected} rows)")]
    Shape { expected: usize, found: (usize, usize) },
}

pub type Result<T> = std::result::Result<T, SolverError>;

/// Slack allowed on the per-step objective increase.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    /// `I(Q;Y|S) - I(Q;S|Y) / beta`
    Linear,
    /// `I(Q;Y|S) - exp(I(Q;S|Y)) / beta`
    #[default]
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    #[default]
    RandomDirichlet,
    Provided(BottleneckChannel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub beta: f64,
    pub objective: Objective,
    /// `None` means `sum_s |X_s| + 1`.
    pub q_cardinality: Option<usize>,
    pub max_iters: usize,
    /// Stop once the objective changes by less than this (nats).
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub init: Init,
    /// Let `sweep` halve beta below the grid until some point has
    /// compression under [`ZERO_RATE`], so the frontier has an `R = 0` anchor.
    pub extend_to_zero_rate: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            objective: Objective::Exponential,
            q_cardinality: None,
            max_iters: 2000,
            tol: 1e-10,
            restarts: 10,
            seed: 0,
            init: Init::RandomDirichlet,
            extend_to_zero_rate: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(SolverError::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.tol > 0.0) {
            return Err(SolverError::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.q_cardinality == Some(0) {
            return Err(SolverError::Config("q_cardinality must be at least 1".into()));
        }
        Ok(())
    }

    pub fn q_size(&self, problem: &RbProblem) -> usize {
        self.q_cardinality
            .unwrap_or_else(|| default_q_cardinality(problem))
    }
}

/// Cardinality that always suffices for the bottleneck: `sum_s |X_s| + 1`.
pub fn default_q_cardinality(problem: &RbProblem) -> usize {
    problem.total_outcomes() + 1
}

/// `count` log-spaced values from `min` to `max` inclusive.
pub fn log_spaced(min: f64, max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let (a, b) = (min.ln(), max.ln());
            let mut grid: Vec<f64> = (0..count)
                .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
                .collect();
            grid[0] = min;
            grid[count - 1] = max;
            grid
        }
    }
}

/// 60 log-spaced betas in `[0.05, 1000]`.
pub fn default_beta_grid() -> Vec<f64> {
    log_spaced(0.05, 1000.0, 60)
}

/// `r(q | s, z)`: rows follow [`RbProblem::support`], columns are bottleneck
/// states.
#[derive(Debug, Clone, PartialEq)]
pub struct BottleneckChannel {
    matrix: Array2<f64>,
}

impl BottleneckChannel {
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        for (i, row) in matrix.rows().into_iter().enumerate() {
            let total = row.sum();
            if row.iter().any(|&v| !(v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(SolverError::Config(format!(
                    "bottleneck row {i} is not a probability vector"
                )));
            }
        }
        Ok(Self { matrix })
    }

    pub fn uniform(rows: usize, q: usize) -> Self {
        Self {
            matrix: Array2::from_elem((rows, q), 1.0 / q as f64),
        }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn q_size(&self) -> usize {
        self.matrix.ncols()
    }

    /// Embeds `self` and `other` on disjoint bottleneck states, weighting them
    /// by `lambda` and `1 - lambda`. Both channels must have the same rows.
    pub fn disjoint_mixture(&self, other: &BottleneckChannel, lambda: f64) -> BottleneckChannel {
        let (qa, qb) = (self.q_size(), other.q_size());
        let mut m = Array2::zeros((self.rows(), qa + qb));
        for i in 0..self.rows() {
            for q in 0..qa {
                m[[i, q]] = lambda * self.matrix[[i, q]];
            }
            for q in 0..qb {
                m[[i, qa + q]] = (1.0 - lambda) * other.matrix[[i, q]];
            }
        }
        BottleneckChannel { matrix: m }
    }

    fn check_against(&self, problem: &RbProblem) -> Result<()> {
        if self.rows() != problem.total_outcomes() {
            return Err(SolverError::Shape {
                expected: problem.total_outcomes(),
                found: self.matrix.dim(),
            });
        }
        Ok(())
    }
}

/// Random channel with every row drawn from a flat Dirichlet.
pub fn init_bottleneck<R: Rng + ?Sized>(rows: usize, q: usize, rng: &mut R) -> BottleneckChannel {
    let mut m = Array2::zeros((rows, q));
    for i in 0..rows {
        let draws: Vec<f64> = (0..q).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = draws.iter().sum();
        for (k, v) in draws.into_iter().enumerate() {
            m[[i, k]] = v / total;
        }
    }
    BottleneckChannel { matrix: m }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of an independent task; parallel and sequential schedules agree.
pub fn task_seed(seed: u64, task: u64) -> u64 {
    seed ^ splitmix64(task)
}

fn task_rng(seed: u64, task: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(task_seed(seed, task))
}

/// Prediction and compression of a bottleneck, with per-source terms
/// already weighted by `nu(s)`. All in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct Terms {
    pub prediction: f64,
    pub compression: f64,
    pub per_source_prediction: Vec<f64>,
    pub per_source_compression: Vec<f64>,
}

/// `omega(y, q, s) = sum_{z} p(y, s, z) r(q | s, z)`.
fn joint_yqs(problem: &RbProblem, r: &Array2<f64>) -> Array3<f64> {
    let (ny, nq, ns) = (problem.num_targets(), r.ncols(), problem.num_sources());
    let pj = problem.row_joint();
    let mut out = Array3::zeros((ny, nq, ns));
    for (i, pair) in problem.support().iter().enumerate() {
        for y in 0..ny {
            let p = pj[[i, y]];
            if p > 0.0 {
                for q in 0..nq {
                    out[[y, q, pair.source]] += p * r[[i, q]];
                }
            }
        }
    }
    out
}

fn terms_from_joint(problem: &RbProblem, yqs: &Array3<f64>) -> Terms {
    let (ny, nq, ns) = yqs.dim();
    let py = problem.target().probs();
    let nu = problem.weights().as_slice();
    let mut pred = vec![0.0; ns];
    let mut comp = vec![0.0; ns];
    for q in 0..nq {
        let qy: Vec<f64> = (0..ny).map(|y| (0..ns).map(|s| yqs[[y, q, s]]).sum()).collect();
        for s in 0..ns {
            let qs: f64 = (0..ny).map(|y| yqs[[y, q, s]]).sum();
            for y in 0..ny {
                let w = yqs[[y, q, s]];
                if w > 0.0 {
                    pred[s] += w * (w / (qs * py[y])).ln();
                    comp[s] += w * (w / (nu[s] * qy[y])).ln();
                }
            }
        }
    }
    Terms {
        prediction: pred.iter().sum(),
        compression: comp.iter().sum(),
        per_source_prediction: pred,
        per_source_compression: comp,
    }
}

/// Prediction and compression of `channel` under `problem`.
pub fn evaluate(problem: &RbProblem, channel: &BottleneckChannel) -> Terms {
    terms_from_joint(problem, &joint_yqs(problem, &channel.matrix))
}

/// Objective value of a (prediction, compression) pair.
pub fn objective_value(objective: Objective, beta: f64, prediction: f64, compression: f64) -> f64 {
    match objective {
        Objective::Linear => prediction - compression / beta,
        Objective::Exponential => prediction - compression.exp() / beta,
    }
}

/// Solver state between steps. `omega` always holds the joint induced by
/// `channel`, i.e. the variational optimum for the current channel.
#[derive(Debug, Clone)]
pub struct IterationState {
    pub channel: BottleneckChannel,
    /// `omega(y, q, s)`, the part of the variational joint the updates use.
    pub omega: Array3<f64>,
    pub terms: Terms,
    pub objective: f64,
    /// Inverse temperature used to produce `channel` (equals beta for the
    /// linear objective).
    pub effective_beta: f64,
    pub iteration: usize,
    /// Rows reset to uniform because every state had zero weight.
    pub reset_rows: usize,
    /// Exponential steps that fell back to the exact inner maximization.
    pub exact_inner_steps: usize,
}

impl IterationState {
    pub fn new(problem: &RbProblem, channel: BottleneckChannel, config: &SolverConfig) -> Result<Self> {
        channel.check_against(problem)?;
        let omega = joint_yqs(problem, &channel.matrix);
        let terms = terms_from_joint(problem, &omega);
        let objective = objective_value(config.objective, config.beta, terms.prediction, terms.compression);
        Ok(Self {
            channel,
            omega,
            terms,
            objective,
            effective_beta: config.beta,
            iteration: 0,
            reset_rows: 0,
            exact_inner_steps: 0,
        })
    }

    fn advance(&self, problem: &RbProblem, channel: BottleneckChannel, config: &SolverConfig) -> Self {
        let omega = joint_yqs(problem, &channel.matrix);
        let terms = terms_from_joint(problem, &omega);
        let objective = objective_value(config.objective, config.beta, terms.prediction, terms.compression);
        Self {
            channel,
            omega,
            terms,
            objective,
            effective_beta: self.effective_beta,
            iteration: self.iteration + 1,
            reset_rows: self.reset_rows,
            exact_inner_steps: self.exact_inner_steps,
        }
    }
}

/// Per-row linear coefficients of the channel update under fixed omega:
/// the new log-weights are `ln r + b * gain + penalty`.
struct UpdateCoefficients {
    log_r: Array2<f64>,
    gain: Array2<f64>,
    penalty: Array2<f64>,
    row_mass: Vec<f64>,
}

fn update_coefficients(problem: &RbProblem, state: &IterationState) -> UpdateCoefficients {
    let r = state.channel.matrix();
    let yqs = &state.omega;
    let (ny, nq, ns) = yqs.dim();
    let nu = problem.weights().as_slice();
    let pj = problem.row_joint();

    // ln omega(y|q,s) and ln omega(q|y) - ln omega(q|s,y)
    let mut ln_y_given_qs = Array3::from_elem((ny, nq, ns), f64::NEG_INFINITY);
    let mut ln_ratio = Array3::from_elem((ny, nq, ns), f64::NAN);
    for q in 0..nq {
        for s in 0..ns {
            let qs: f64 = (0..ny).map(|y| yqs[[y, q, s]]).sum();
            for y in 0..ny {
                let w = yqs[[y, q, s]];
                if w > 0.0 {
                    let qy: f64 = (0..ns).map(|t| yqs[[y, q, t]]).sum();
                    ln_y_given_qs[[y, q, s]] = (w / qs).ln();
                    // omega(q|y) / omega(q|s,y) = nu(s) omega(q,y) / omega(y,q,s)
                    ln_ratio[[y, q, s]] = (nu[s] * qy / w).ln();
                }
            }
        }
    }

    let rows = problem.total_outcomes();
    let mut log_r = Array2::from_elem((rows, nq), f64::NEG_INFINITY);
    let mut gain = Array2::zeros((rows, nq));
    let mut penalty = Array2::zeros((rows, nq));
    let mut row_mass = vec![0.0; rows];
    for (i, pair) in problem.support().iter().enumerate() {
        let s = pair.source;
        let pi: f64 = pj.row(i).sum();
        row_mass[i] = pi;
        for q in 0..nq {
            let rv = r[[i, q]];
            if !(rv > 0.0) {
                continue;
            }
            let mut g = 0.0;
            let mut c = 0.0;
            let mut dead = false;
            for y in 0..ny {
                let p = pj[[i, y]];
                if p > 0.0 {
                    let w = yqs[[y, q, s]];
                    if !(w > 0.0) {
                        // underflow: the state is unreachable from this row
                        dead = true;
                        break;
                    }
                    g += p * ln_y_given_qs[[y, q, s]];
                    c += p * ln_ratio[[y, q, s]];
                }
            }
            if dead || pi <= 0.0 {
                continue;
            }
            log_r[[i, q]] = rv.ln();
            gain[[i, q]] = g / pi;
            penalty[[i, q]] = c / pi;
        }
    }
    UpdateCoefficients {
        log_r,
        gain,
        penalty,
        row_mass,
    }
}

/// Softmax of `ln r + b gain + penalty` per row. Returns the channel and the
/// number of rows reset to uniform.
fn channel_at(coef: &UpdateCoefficients, b: f64) -> (BottleneckChannel, usize) {
    let (rows, nq) = coef.log_r.dim();
    let mut m = Array2::zeros((rows, nq));
    let mut resets = 0;
    let mut logits = vec![0.0; nq];
    for i in 0..rows {
        let mut max = f64::NEG_INFINITY;
        for q in 0..nq {
            let l = coef.log_r[[i, q]];
            let v = if l == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                l + b * coef.gain[[i, q]] + coef.penalty[[i, q]]
            };
            let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
            logits[q] = v;
            max = max.max(v);
        }
        if !max.is_finite() {
            resets += 1;
            for q in 0..nq {
                m[[i, q]] = 1.0 / nq as f64;
            }
            continue;
        }
        let mut total = 0.0;
        for q in 0..nq {
            let e = (logits[q] - max).exp();
            m[[i, q]] = e;
            total += e;
        }
        for q in 0..nq {
            m[[i, q]] /= total;
        }
    }
    (BottleneckChannel { matrix: m }, resets)
}

/// `D(r' p_{Z|SY} || omega_{Q|Y} omega_{Z|SYQ})` for a candidate channel
/// under the fixed omega encoded in `coef`.
fn variational_compression(coef: &UpdateCoefficients, candidate: &BottleneckChannel) -> f64 {
    let m = candidate.matrix();
    let mut total = 0.0;
    for i in 0..m.nrows() {
        for q in 0..m.ncols() {
            let v = m[[i, q]];
            if v > 0.0 {
                total += coef.row_mass[i] * v * (v.ln() - coef.log_r[[i, q]] - coef.penalty[[i, q]]);
            }
        }
    }
    total
}

/// Exact maximizer over the channel of the exponential surrogate with fixed
/// omega. The stationary point has the closed form at inverse temperature
/// `b = beta exp(-D(b))`; `b - beta exp(-D(b))` is increasing in `b`, so
/// bisection finds it.
fn exact_exponential_channel(coef: &UpdateCoefficients, beta: f64) -> (BottleneckChannel, usize, f64) {
    let (mut lo, mut hi) = (0.0, beta);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let (ch, _) = channel_at(coef, mid);
        let d = variational_compression(coef, &ch);
        if mid - beta * (-d).exp() > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * beta {
            break;
        }
    }
    let b = 0.5 * (lo + hi);
    let (ch, resets) = channel_at(coef, b);
    (ch, resets, b)
}

/// One alternation: refresh omega from the current channel, then update the
/// channel in closed form.
///
/// For the exponential objective the step uses the effective inverse
/// temperature `beta exp(-I(Q;S|Y))` of the current channel. If that step
/// lowers the objective, the exact maximizer of the exponential surrogate is
/// used instead, which cannot.
pub fn ba_step(state: &IterationState, problem: &RbProblem, config: &SolverConfig) -> IterationState {
    let coef = update_coefficients(problem, state);
    let b = match config.objective {
        Objective::Linear => config.beta,
        Objective::Exponential => config.beta * (-state.terms.compression).exp(),
    };
    let (channel, resets) = channel_at(&coef, b);
    let mut next = state.advance(problem, channel, config);
    next.effective_beta = b;
    next.reset_rows += resets;
    if config.objective == Objective::Exponential && next.objective < state.objective - MONOTONE_SLACK {
        let (channel, resets, b) = exact_exponential_channel(&coef, config.beta);
        let mut exact = state.advance(problem, channel, config);
        exact.effective_beta = b;
        exact.reset_rows += resets;
        exact.exact_inner_steps += 1;
        if exact.objective >= next.objective {
            next = exact;
        }
    }
    next
}

/// One solved point of the tradeoff. Information values are in nats.
#[derive(Debug, Clone)]
pub struct RbPoint {
    pub beta: f64,
    pub prediction: f64,
    pub compression: f64,
    /// `nu(s) I(Q;Y|S=s)`
    pub per_source_prediction: Vec<f64>,
    /// `nu(s) I(Q;S=s|Y)`
    pub per_source_compression: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Index of the winning start (0 is the warm start during sweeps).
    pub restart: usize,
    pub channel: BottleneckChannel,
}

impl RbPoint {
    pub fn prediction_bits(&self) -> f64 {
        self.prediction / LN2
    }

    pub fn compression_bits(&self) -> f64 {
        self.compression / LN2
    }
}

struct RunOutcome {
    state: IterationState,
    converged: bool,
}

fn run(problem: &RbProblem, config: &SolverConfig, start: BottleneckChannel) -> Result<RunOutcome> {
    let mut state = IterationState::new(problem, start, config)?;
    let mut converged = false;
    for _ in 0..config.max_iters {
        let next = ba_step(&state, problem, config);
        let delta = next.objective - state.objective;
        state = next;
        if delta.abs() < config.tol {
            converged = true;
            break;
        }
    }
    Ok(RunOutcome { state, converged })
}

/// Runs every start, keeps the best objective; among starts within `tol` of
/// the best, the lowest index wins.
fn best_of(
    problem: &RbProblem,
    config: &SolverConfig,
    starts: Vec<(usize, BottleneckChannel)>,
) -> Result<RbPoint> {
    let outcomes: Vec<(usize, RunOutcome)> = starts
        .into_par_iter()
        .map(|(k, ch)| run(problem, config, ch).map(|o| (k, o)))
        .collect::<Result<_>>()?;
    let best = outcomes
        .iter()
        .map(|(_, o)| o.state.objective)
        .fold(f64::NEG_INFINITY, f64::max);
    let (restart, winner) = outcomes
        .into_iter()
        .filter(|(_, o)| o.state.objective >= best - config.tol)
        .min_by_key(|(k, _)| *k)
        .expect("at least one start");
    let t = winner.state.terms;
    Ok(RbPoint {
        beta: config.beta,
        prediction: t.prediction,
        compression: t.compression,
        per_source_prediction: t.per_source_prediction,
        per_source_compression: t.per_source_compression,
        objective: winner.state.objective,
        converged: winner.converged,
        iterations: winner.state.iteration,
        restart,
        channel: winner.state.channel,
    })
}

/// Solves the (linear or exponential) Lagrangian at `config.beta`.
pub fn solve_lagrangian(problem: &RbProblem, config: &SolverConfig) -> Result<RbPoint> {
    config.validate()?;
    let q = config.q_size(problem);
    let rows = problem.total_outcomes();
    let mut starts = Vec::new();
    let mut next_index = 0;
    if let Init::Provided(ch) = &config.init {
        ch.check_against(problem)?;
        starts.push((0, ch.clone()));
        next_index = 1;
    }
    let random = match config.init {
        Init::Provided(_) => config.restarts,
        Init::RandomDirichlet => config.restarts.max(1),
    };
    for k in 0..random {
        let idx = next_index + k;
        let mut rng = task_rng(config.seed, idx as u64);
        starts.push((idx, init_bottleneck(rows, q, &mut rng)));
    }
    best_of(problem, config, starts)
}

/// A point of the concave frontier (nats).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierVertex {
    pub compression: f64,
    pub prediction: f64,
}

/// Upper-left Pareto frontier of `(compression, prediction)` pairs and its
/// concave majorant, as hull vertices sorted by compression.
pub fn concave_frontier(points: &[(f64, f64)]) -> Vec<FrontierVertex> {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(c, p)| c.is_finite() && p.is_finite())
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let mut pareto: Vec<(f64, f64)> = Vec::new();
    for pt in pts {
        if pareto.last().is_none_or(|last| pt.1 > last.1) {
            pareto.push(pt);
        }
    }
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for pt in pareto {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (pt.1 - a.1) - (b.1 - a.1) * (pt.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    hull.into_iter()
        .map(|(compression, prediction)| FrontierVertex {
            compression,
            prediction,
        })
        .collect()
}

/// Linear interpolation on a frontier. Rates below the first vertex return
/// its prediction; rates past the last return the maximum.
pub fn interpolate_frontier(frontier: &[FrontierVertex], rate: f64) -> Result<f64> {
    if rate < 0.0 || rate.is_nan() {
        return Err(SolverError::NegativeRate(rate));
    }
    let first = frontier.first().ok_or(SolverError::EmptyCurve)?;
    let last = frontier.last().expect("non-empty");
    if rate <= first.compression {
        return Ok(first.prediction);
    }
    if rate >= last.compression {
        return Ok(last.prediction);
    }
    let k = frontier.partition_point(|v| v.compression <= rate);
    let (a, b) = (frontier[k - 1], frontier[k]);
    let t = (rate - a.compression) / (b.compression - a.compression);
    Ok(a.prediction + t * (b.prediction - a.prediction))
}

/// Solved points of a sweep, sorted by beta, with the concave frontier.
#[derive(Debug, Clone)]
pub struct RbCurve {
    pub points: Vec<RbPoint>,
    pub frontier: Vec<FrontierVertex>,
}

impl RbCurve {
    pub fn from_points(mut points: Vec<RbPoint>) -> Self {
        points.sort_by(|a, b| a.beta.total_cmp(&b.beta));
        let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.compression, p.prediction)).collect();
        let frontier = concave_frontier(&pairs);
        Self { points, frontier }
    }

    /// Whether point `index` lies on the concave frontier (within 1e-9 nats).
    pub fn on_frontier(&self, index: usize) -> bool {
        let p = &self.points[index];
        let Some(last) = self.frontier.last() else {
            return false;
        };
        if p.compression > last.compression + 1e-12 {
            return false;
        }
        match interpolate_frontier(&self.frontier, p.compression.max(0.0)) {
            Ok(v) => p.prediction >= v - 1e-9,
            Err(_) => false,
        }
    }

    /// Frontier value at `R = 0`.
    pub fn intercept(&self) -> Result<f64> {
        rb_at_rate(self, 0.0)
    }
}

/// `I_RB(R)` by linear interpolation on the concave frontier.
pub fn rb_at_rate(curve: &RbCurve, rate: f64) -> Result<f64> {
    interpolate_frontier(&curve.frontier, rate)
}

/// Traces the curve over an ascending beta grid. Each beta starts from the
/// previous optimum (annealing) plus `config.restarts` fresh random starts.
/// Compression (nats) below which a solved point counts as the `R = 0` anchor.
pub const ZERO_RATE: f64 = 1e-7;
const MAX_HALVINGS: usize = 40;
const STALL_RATIO: f64 = 0.99;

/// One grid point: the warm start (index 0) plus `restarts` random starts.
fn solve_annealed(
    problem: &RbProblem,
    config: &SolverConfig,
    beta: f64,
    warm: Option<BottleneckChannel>,
    task: u64,
) -> Result<RbPoint> {
    let cfg = SolverConfig {
        beta,
        ..config.clone()
    };
    cfg.validate()?;
    let q = config.q_size(problem);
    let rows = problem.total_outcomes();
    let per_beta = config.restarts as u64 + 1;
    let mut starts = Vec::with_capacity(config.restarts + 1);
    if let Some(prev) = warm {
        prev.check_against(problem)?;
        starts.push((0, prev));
    }
    let random = if starts.is_empty() {
        config.restarts.max(1)
    } else {
        config.restarts
    };
    for k in 0..random {
        let mut rng = task_rng(config.seed, task * per_beta + k as u64 + 1);
        starts.push((k + 1, init_bottleneck(rows, q, &mut rng)));
    }
    best_of(problem, &cfg, starts)
}

pub fn sweep(problem: &RbProblem, betas: &[f64], config: &SolverConfig) -> Result<RbCurve> {
    if betas.is_empty() {
        return Err(SolverError::EmptyGrid);
    }
    if betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) || betas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SolverError::BadGrid);
    }
    let mut previous: Option<BottleneckChannel> = match &config.init {
        Init::Provided(ch) => Some(ch.clone()),
        Init::RandomDirichlet => None,
    };
    let mut points = Vec::with_capacity(betas.len());
    let mut task = 0u64;
    for &beta in betas {
        let point = solve_annealed(problem, config, beta, previous.take(), task)?;
        previous = Some(point.channel.clone());
        points.push(point);
        task += 1;
    }
    if config.extend_to_zero_rate {
        let mut below = Vec::new();
        let mut beta = betas[0];
        let mut warm = points[0].channel.clone();
        let mut lowest = points.iter().map(|p| p.compression).fold(f64::INFINITY, f64::min);
        let mut halvings = 0;
        while lowest > ZERO_RATE && halvings < MAX_HALVINGS {
            beta /= 2.0;
            halvings += 1;
            let point = solve_annealed(problem, config, beta, Some(warm), task)?;
            warm = point.channel.clone();
            let stalled = point.compression > STALL_RATIO * lowest;
            lowest = lowest.min(point.compression);
            below.push(point);
            task += 1;
            // Convergence towards zero rate can be very slow; once halving
            // beta no longer buys compression, smaller beta only lets
            // poorer restarts win on the penalty term.
            if stalled {
                break;
            }
        }
        below.reverse();
        below.append(&mut points);
        points = below;
    }
    Ok(RbCurve::from_points(points))
}
