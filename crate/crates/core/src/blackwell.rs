//! Exact Blackwell redundancy for small systems, and the KL deficiency.
//!
//! `Q` is Blackwell-redundant when every source can be garbled into it:
//! there are channels `kappa_s(q|x)` with `sum_x p(x|y, s) kappa_s(q|x)`
//! identical for all `s`. The redundancy is the largest `I(Q;Y)` over such
//! `Q`. The feasible garblings form a polytope and `I(Q;Y)` is convex on it,
//! so the maximum sits at a vertex.
//!
//! [`exact_blackwell_redundancy`] does not enumerate that polytope directly
//! (its basis count explodes quickly). For each `q` the vector
//! `v = (kappa_s(q|.))_s` lies in the cone `{v >= 0 : P_s^T v_s = P_1^T v_1}`
//! and the vectors sum to all-ones. `I(Q;Y) = sum_q f(P_1^T v^q)` with `f`
//! positively homogeneous and subadditive (merging outcomes of `Q` never
//! adds information), so splitting each `v^q` into extreme rays of the cone
//! can only help. The optimum is therefore a linear program over the
//! extreme rays, solved here by enumerating its vertices too.
//! [`exact_blackwell_by_polytope`] runs the direct route for cross-checks.

use std::collections::HashMap;

use itertools::Itertools;
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use thiserror::Error;

use crate::problem::RbProblem;
use crate::solver::BottleneckChannel;
use crate::LN2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlackwellError {
    #[error(
        "vertex enumeration needs {candidates} basis candidates, over the budget of {budget}; \
         estimate the redundancy with the RB solver at rate 0 instead"
    )]
    Budget { candidates: u128, budget: u128 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("the constraints have no non-negative solution")]
    Infeasible,
}

pub type Result<T> = std::result::Result<T, BlackwellError>;

/// Default cap on the number of basis candidates examined.
pub const DEFAULT_BASIS_BUDGET: u128 = 20_000_000;
/// Pivot, rank and feasibility tolerance.
pub const PIVOT_TOL: f64 = 1e-9;
/// Vertices closer than this in the max norm are merged.
pub const DEDUP_TOL: f64 = 1e-7;

const CHUNK: usize = 1 << 14;

/// `{x >= 0 : A x = b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    pub a: Array2<f64>,
    pub b: Array1<f64>,
}

impl StandardForm {
    pub fn new(a: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(BlackwellError::Shape(format!(
                "{} constraint rows but {} right-hand sides",
                a.nrows(),
                b.len()
            )));
        }
        Ok(Self { a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// `max |A x - b|`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.a
            .rows()
            .into_iter()
            .zip(self.b.iter())
            .map(|(row, &b)| (row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexSet {
    pub vertices: Vec<Vec<f64>>,
    pub bases_examined: u64,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Row-reduces `[A | b]` and keeps a full-row-rank system with the same
/// solution set.
fn independent_rows(a: &Array2<f64>, b: &Array1<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    let (m, n) = a.dim();
    let mut rows: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut r = a.row(i).to_vec();
            r.push(b[i]);
            r
        })
        .collect();
    let mut rank = 0;
    for col in 0..n {
        if rank == m {
            break;
        }
        let pivot = (rank..m)
            .max_by(|&i, &j| rows[i][col].abs().total_cmp(&rows[j][col].abs()))
            .unwrap();
        if rows[pivot][col].abs() <= PIVOT_TOL {
            continue;
        }
        rows.swap(rank, pivot);
        let p = rows[rank][col];
        for i in rank + 1..m {
            let f = rows[i][col] / p;
            if f != 0.0 {
                for j in col..=n {
                    rows[i][j] -= f * rows[rank][j];
                }
            }
        }
        rank += 1;
    }
    if rows[rank..].iter().any(|r| r[n].abs() > PIVOT_TOL) {
        return Err(BlackwellError::Infeasible);
    }
    let mut ra = Array2::zeros((rank, n));
    let mut rb = Array1::zeros(rank);
    for (i, r) in rows.iter().take(rank).enumerate() {
        for j in 0..n {
            ra[[i, j]] = r[j];
        }
        rb[i] = r[n];
    }
    Ok((ra, rb))
}

/// Solves `A[:, cols] x_B = b`; `None` when singular or infeasible.
fn basic_solution(a: &Array2<f64>, b: &Array1<f64>, cols: &[usize]) -> Option<Vec<f64>> {
    let r = cols.len();
    let mut m: Vec<Vec<f64>> = (0..r)
        .map(|i| {
            let mut row: Vec<f64> = cols.iter().map(|&c| a[[i, c]]).collect();
            row.push(b[i]);
            row
        })
        .collect();
    for k in 0..r {
        let pivot = (k..r).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))?;
        if m[pivot][k].abs() <= PIVOT_TOL {
            return None;
        }
        m.swap(k, pivot);
        for i in k + 1..r {
            let f = m[i][k] / m[k][k];
            if f != 0.0 {
                for j in k..=r {
                    m[i][j] -= f * m[k][j];
                }
            }
        }
    }
    let mut xb = vec![0.0; r];
    for k in (0..r).rev() {
        let tail: f64 = (k + 1..r).map(|j| m[k][j] * xb[j]).sum();
        xb[k] = (m[k][r] - tail) / m[k][k];
    }
    if xb.iter().any(|&v| v < -PIVOT_TOL) {
        return None;
    }
    let mut x = vec![0.0; a.ncols()];
    for (&c, v) in cols.iter().zip(xb) {
        x[c] = v.max(0.0);
    }
    Some(x)
}

struct Dedup {
    vertices: Vec<Vec<f64>>,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl Dedup {
    fn insert(&mut self, x: Vec<f64>) {
        let key: Vec<i64> = x.iter().map(|v| (v / 1e-6).round() as i64).collect();
        let bucket = self.cells.entry(key).or_default();
        let dup = bucket.iter().any(|&i| {
            self.vertices[i]
                .iter()
                .zip(&x)
                .all(|(a, b)| (a - b).abs() <= DEDUP_TOL)
        });
        if !dup {
            bucket.push(self.vertices.len());
            self.vertices.push(x);
        }
    }
}

/// All basic feasible solutions of `poly`, in order of first discovery
/// over lexicographically sorted bases.
pub fn enumerate_vertices(poly: &StandardForm, budget: u128) -> Result<VertexSet> {
    let (a, b) = independent_rows(&poly.a, &poly.b)?;
    let (r, n) = a.dim();
    if r == 0 {
        return Ok(VertexSet {
            vertices: vec![vec![0.0; n]],
            bases_examined: 1,
        });
    }
    let candidates = binomial(n, r);
    if candidates > budget {
        return Err(BlackwellError::Budget { candidates, budget });
    }
    let mut dedup = Dedup {
        vertices: Vec::new(),
        cells: HashMap::new(),
    };
    for chunk in &(0..n).combinations(r).chunks(CHUNK) {
        let chunk: Vec<Vec<usize>> = chunk.collect();
        let found: Vec<Option<Vec<f64>>> = chunk
            .par_iter()
            .map(|cols| basic_solution(&a, &b, cols))
            .collect();
        for x in found.into_iter().flatten() {
            dedup.insert(x);
        }
    }
    if dedup.vertices.is_empty() {
        return Err(BlackwellError::Infeasible);
    }
    Ok(VertexSet {
        vertices: dedup.vertices,
        bases_examined: candidates as u64,
    })
}

/// `I(Q;Y)` in nats from `p(y)` and `p(q|y)` (rows `y`, columns `q`).
pub fn information(p_y: &[f64], q_given_y: &Array2<f64>) -> f64 {
    let mut total = 0.0;
    for col in q_given_y.columns() {
        total += column_information(p_y, col.iter().copied());
    }
    total
}

/// `f(w) = sum_y p(y) w_y ln(w_y / sum_y' p(y') w_y')`.
fn column_information(p_y: &[f64], w: impl Iterator<Item = f64> + Clone) -> f64 {
    let pq: f64 = p_y.iter().zip(w.clone()).map(|(p, v)| p * v).sum();
    if pq <= 0.0 {
        return 0.0;
    }
    p_y.iter()
        .zip(w)
        .filter(|(_, v)| *v > 0.0)
        .map(|(p, v)| p * v * (v / pq).ln())
        .sum()
}

/// Garbling variables `kappa_s(q|x)` of all sources, stored row-major per
/// source: variable `offset_s + x * q_cardinality + q`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasiblePolytope {
    pub form: StandardForm,
    pub q_cardinality: usize,
    offsets: Vec<usize>,
    sizes: Vec<usize>,
}

impl FeasiblePolytope {
    pub fn variable(&self, source: usize, x: usize, q: usize) -> usize {
        self.offsets[source] + x * self.q_cardinality + q
    }

    /// `kappa_s` as `|X_s| x |Q|` matrices.
    pub fn garblings(&self, point: &[f64]) -> Vec<Array2<f64>> {
        (0..self.sizes.len())
            .map(|s| {
                Array2::from_shape_fn((self.sizes[s], self.q_cardinality), |(x, q)| {
                    point[self.variable(s, x, q)]
                })
            })
            .collect()
    }
}

/// The cardinality that suffices for Blackwell-redundant `Q`:
/// `sum_s |X_s| - n + 1`.
pub fn default_q_cardinality(problem: &RbProblem) -> usize {
    problem.total_outcomes() - problem.num_sources() + 1
}

/// Row-stochastic garblings whose compositions with every source equal the
/// composition with the first source.
pub fn build_polytope(problem: &RbProblem, q_cardinality: Option<usize>) -> Result<FeasiblePolytope> {
    let q = q_cardinality.unwrap_or_else(|| default_q_cardinality(problem));
    if q == 0 {
        return Err(BlackwellError::Shape("q cardinality must be at least 1".into()));
    }
    let sources = problem.sources();
    let sizes: Vec<usize> = sources.iter().map(|s| s.outcomes()).collect();
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &k| {
            let o = *acc;
            *acc += k * q;
            Some(o)
        })
        .collect();
    let nvars: usize = sizes.iter().sum::<usize>() * q;
    let ny = problem.num_targets();
    let nrows = sizes.iter().sum::<usize>() + (sources.len() - 1) * ny * q;
    let mut a = Array2::zeros((nrows, nvars));
    let mut b = Array1::zeros(nrows);
    let mut poly = FeasiblePolytope {
        form: StandardForm::new(Array2::zeros((0, 0)), Array1::zeros(0))?,
        q_cardinality: q,
        offsets,
        sizes: sizes.clone(),
    };
    let mut row = 0;
    for (s, &k) in sizes.iter().enumerate() {
        for x in 0..k {
            for qq in 0..q {
                a[[row, poly.variable(s, x, qq)]] = 1.0;
            }
            b[row] = 1.0;
            row += 1;
        }
    }
    for s in 1..sources.len() {
        for y in 0..ny {
            for qq in 0..q {
                for x in 0..sizes[s] {
                    a[[row, poly.variable(s, x, qq)]] += sources[s].prob(y, x);
                }
                for x in 0..sizes[0] {
                    a[[row, poly.variable(0, x, qq)]] -= sources[0].prob(y, x);
                }
                row += 1;
            }
        }
    }
    poly.form = StandardForm::new(a, b)?;
    Ok(poly)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactBlackwellResult {
    /// `I_cap` in nats.
    pub value: f64,
    pub value_bits: f64,
    /// `p(q|y)`, rows `y`.
    pub witness: Array2<f64>,
    /// `kappa_s(q|x)`, one `|X_s| x |Q|` matrix per source.
    pub garblings: Vec<Array2<f64>>,
    pub vertices_examined: usize,
}

impl ExactBlackwellResult {
    /// Largest `|kappa_s o p(x_s|y) - p(q|y)|` over all sources and entries.
    pub fn witness_error(&self, problem: &RbProblem) -> f64 {
        let mut worst: f64 = 0.0;
        for (src, kappa) in problem.sources().iter().zip(&self.garblings) {
            let composed = src.matrix.dot(kappa);
            for (a, b) in composed.iter().zip(self.witness.iter()) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }
}

fn result(problem: &RbProblem, garblings: Vec<Array2<f64>>, vertices_examined: usize) -> ExactBlackwellResult {
    let witness = problem.sources()[0].matrix.dot(&garblings[0]);
    let value = information(problem.target().probs(), &witness);
    ExactBlackwellResult {
        value,
        value_bits: value / LN2,
        witness,
        garblings,
        vertices_examined,
    }
}

/// Exact `I_cap` through the extreme rays of the garbling cone.
pub fn exact_blackwell_redundancy(problem: &RbProblem) -> Result<ExactBlackwellResult> {
    exact_blackwell_with_budget(problem, DEFAULT_BASIS_BUDGET)
}

pub fn exact_blackwell_with_budget(problem: &RbProblem, budget: u128) -> Result<ExactBlackwellResult> {
    let sources = problem.sources();
    let sizes: Vec<usize> = sources.iter().map(|s| s.outcomes()).collect();
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &k| {
            let o = *acc;
            *acc += k;
            Some(o)
        })
        .collect();
    let nvars: usize = sizes.iter().sum();
    let ny = problem.num_targets();

    // Slice of the cone with total mass one: its vertices are the rays.
    let nrows = (sources.len() - 1) * ny + 1;
    let mut a = Array2::zeros((nrows, nvars));
    let mut b = Array1::zeros(nrows);
    let mut row = 0;
    for s in 1..sources.len() {
        for y in 0..ny {
            for x in 0..sizes[s] {
                a[[row, offsets[s] + x]] += sources[s].prob(y, x);
            }
            for x in 0..sizes[0] {
                a[[row, offsets[0] + x]] -= sources[0].prob(y, x);
            }
            row += 1;
        }
    }
    a.row_mut(row).fill(1.0);
    b[row] = 1.0;
    let rays = enumerate_vertices(&StandardForm::new(a, b)?, budget)?.vertices;

    let p_y = problem.target().probs();
    let gains: Vec<f64> = rays
        .iter()
        .map(|v| {
            let w = (0..ny).map(|y| (0..sizes[0]).map(|x| sources[0].prob(y, x) * v[x]).sum::<f64>());
            column_information(p_y, w.collect::<Vec<_>>().into_iter())
        })
        .collect();

    // Decompose the all-ones vector into non-negative multiples of rays.
    let e = Array2::from_shape_fn((nvars, rays.len()), |(i, k)| rays[k][i]);
    let lp = enumerate_vertices(&StandardForm::new(e, Array1::ones(nvars))?, budget)?.vertices;
    let mut best: Option<(f64, &Vec<f64>)> = None;
    for lambda in &lp {
        let v: f64 = lambda.iter().zip(&gains).map(|(l, g)| l * g).sum();
        if best.is_none_or(|(bv, _)| v > bv) {
            best = Some((v, lambda));
        }
    }
    let (_, lambda) = best.ok_or(BlackwellError::Infeasible)?;
    let used: Vec<usize> = (0..rays.len()).filter(|&k| lambda[k] > 0.0).collect();
    let garblings = (0..sources.len())
        .map(|s| {
            Array2::from_shape_fn((sizes[s], used.len()), |(x, j)| {
                lambda[used[j]] * rays[used[j]][offsets[s] + x]
            })
        })
        .collect();
    Ok(result(problem, garblings, rays.len() + lp.len()))
}

/// Exact `I_cap` by enumerating the vertices of the garbling polytope itself.
/// Only practical for tiny systems.
pub fn exact_blackwell_by_polytope(
    problem: &RbProblem,
    q_cardinality: Option<usize>,
    budget: u128,
) -> Result<ExactBlackwellResult> {
    let poly = build_polytope(problem, q_cardinality)?;
    let vertices = enumerate_vertices(&poly.form, budget)?.vertices;
    let p_y = problem.target().probs();
    let first = &problem.sources()[0].matrix;
    let mut best: Option<(f64, &Vec<f64>)> = None;
    for v in &vertices {
        let kappa = &poly.garblings(v)[0];
        let value = information(p_y, &first.dot(kappa));
        if best.is_none_or(|(bv, _)| value > bv) {
            best = Some((value, v));
        }
    }
    let (_, v) = best.ok_or(BlackwellError::Infeasible)?;
    Ok(result(problem, poly.garblings(v), vertices.len()))
}

/// Stop once the last [`DEFICIENCY_WINDOW`] accepted steps together lower
/// the objective by less than this. Near a degenerate optimum single steps
/// stall long before the value does.
pub const DEFICIENCY_TOL: f64 = 1e-12;
pub const DEFICIENCY_WINDOW: usize = 1000;
pub const DEFICIENCY_MAX_ITERS: usize = 100_000;
const KAPPA_FLOOR: f64 = 1e-200;

#[derive(Debug, Clone, PartialEq)]
pub struct DeficiencyResult {
    /// `delta_D` in nats; `f64::INFINITY` when no garbling avoids a support
    /// violation.
    pub value: f64,
    /// Optimal `kappa(b|c)`, rows `c`.
    pub kappa: Array2<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting from the initial point.
    pub trace: Vec<f64>,
}

fn weighted_kl(source: &Array2<f64>, reference: &Array2<f64>, p_y: &[f64], kappa: &Array2<f64>) -> f64 {
    let m = source.dot(kappa);
    let mut total = 0.0;
    for (y, &py) in p_y.iter().enumerate() {
        if py <= 0.0 {
            continue;
        }
        for (b, &v) in m.row(y).iter().enumerate() {
            if v > 0.0 {
                total += py * v * (v / reference[[y, b]]).ln();
            }
        }
    }
    total
}

/// `min_kappa sum_y p(y) D(kappa o p(c|y) || p(b|y))` by mirror descent with
/// backtracking. Channels are `|Y| x |C|` and `|Y| x |B|` matrices.
pub fn deficiency(source: &Array2<f64>, reference: &Array2<f64>, p_y: &[f64]) -> Result<DeficiencyResult> {
    let (ny, nc) = source.dim();
    let nb = reference.ncols();
    if reference.nrows() != ny || p_y.len() != ny {
        return Err(BlackwellError::Shape(format!(
            "channels have {} and {} target rows, p_y has {}",
            ny,
            reference.nrows(),
            p_y.len()
        )));
    }
    let live = |y: usize, c: usize| p_y[y] > 0.0 && source[[y, c]] > 0.0;
    let used: Vec<bool> = (0..nc).map(|c| (0..ny).any(|y| live(y, c))).collect();
    let allowed = Array2::from_shape_fn((nc, nb), |(c, b)| {
        (0..ny).all(|y| !live(y, c) || reference[[y, b]] > 0.0)
    });
    let mut kappa = Array2::from_elem((nc, nb), 1.0 / nb as f64);
    for c in 0..nc {
        let k = allowed.row(c).iter().filter(|&&a| a).count();
        if used[c] {
            if k == 0 {
                return Ok(DeficiencyResult {
                    value: f64::INFINITY,
                    kappa,
                    iterations: 0,
                    converged: true,
                    trace: vec![f64::INFINITY],
                });
            }
            for b in 0..nb {
                kappa[[c, b]] = if allowed[[c, b]] { 1.0 / k as f64 } else { 0.0 };
            }
        }
    }

    let mut value = weighted_kl(source, reference, p_y, &kappa);
    let mut trace = vec![value];
    let mut eta = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < DEFICIENCY_MAX_ITERS {
        iterations += 1;
        let m = source.dot(&kappa);
        let mut grad = Array2::<f64>::zeros((nc, nb));
        for c in 0..nc {
            for b in 0..nb {
                if !allowed[[c, b]] {
                    continue;
                }
                grad[[c, b]] = (0..ny)
                    .filter(|&y| live(y, c))
                    .map(|y| p_y[y] * source[[y, c]] * ((m[[y, b]] / reference[[y, b]]).ln() + 1.0))
                    .sum();
            }
        }
        let accepted = loop {
            let mut next = kappa.clone();
            for c in 0..nc {
                if !used[c] {
                    continue;
                }
                let floor = (0..nb)
                    .filter(|&b| allowed[[c, b]])
                    .map(|b| grad[[c, b]])
                    .fold(f64::INFINITY, f64::min);
                let mut norm = 0.0;
                for b in 0..nb {
                    if !allowed[[c, b]] {
                        continue;
                    }
                    // Large steps would underflow to an exact zero that the
                    // multiplicative update could never leave.
                    let v = (kappa[[c, b]] * (-eta * (grad[[c, b]] - floor)).exp()).max(KAPPA_FLOOR);
                    next[[c, b]] = v;
                    norm += v;
                }
                next.row_mut(c).mapv_inplace(|v| v / norm);
            }
            let candidate = weighted_kl(source, reference, p_y, &next);
            if candidate <= value {
                eta *= 2.0;
                break Some((next, candidate));
            }
            eta /= 2.0;
            if eta < 1e-30 {
                break None;
            }
        };
        let Some((next, candidate)) = accepted else {
            converged = true;
            break;
        };
        kappa = next;
        value = candidate;
        trace.push(value);
        let n = trace.len();
        if n > DEFICIENCY_WINDOW && trace[n - 1 - DEFICIENCY_WINDOW] - value < DEFICIENCY_TOL {
            converged = true;
            break;
        }
    }
    Ok(DeficiencyResult {
        value: value.max(0.0),
        kappa,
        iterations,
        converged,
        trace,
    })
}

/// One side of the bound `I(Q;S=s|Y) >= delta_D(p(x_s|y), p(q|y))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeficiencyBound {
    /// Unweighted `I(Q;S=s|Y)`, nats.
    pub compression: f64,
    pub deficiency: f64,
    pub holds: bool,
}

/// Slack allowed in [`deficiency_bound_check`].
pub const BOUND_SLACK: f64 = 1e-6;

/// Checks the deficiency lower bound on every source's compression term.
pub fn deficiency_bound_check(problem: &RbProblem, channel: &BottleneckChannel) -> Result<Vec<DeficiencyBound>> {
    if channel.rows() != problem.total_outcomes() {
        return Err(BlackwellError::Shape(format!(
            "bottleneck has {} rows, problem has {} source outcomes",
            channel.rows(),
            problem.total_outcomes()
        )));
    }
    let p_y = problem.target().probs();
    let nu = problem.weights().as_slice();
    let r = channel.matrix();
    let mut offset = 0;
    let mut per_source = Vec::new();
    for src in problem.sources() {
        let k = src.outcomes();
        let block = r.slice(ndarray::s![offset..offset + k, ..]);
        per_source.push(src.matrix.dot(&block));
        offset += k;
    }
    let mut q_given_y = Array2::zeros(per_source[0].raw_dim());
    for (w, m) in nu.iter().zip(&per_source) {
        q_given_y.scaled_add(*w, m);
    }
    problem
        .sources()
        .iter()
        .zip(&per_source)
        .map(|(src, own)| {
            let compression: f64 = p_y
                .iter()
                .enumerate()
                .map(|(y, &py)| {
                    py * crate::prob::kl_slices(own.row(y).as_slice().unwrap(), q_given_y.row(y).as_slice().unwrap())
                })
                .sum();
            let d = deficiency(&src.matrix, &q_given_y, p_y)?.value;
            Ok(DeficiencyBound {
                compression,
                deficiency: d,
                holds: compression >= d - BOUND_SLACK,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates;
    use crate::problem::ProblemSpec;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn problem(spec: ProblemSpec) -> RbProblem {
        RbProblem::from_spec(&spec).unwrap()
    }

    fn bsc(e: f64) -> Array2<f64> {
        array![[1.0 - e, e], [e, 1.0 - e]]
    }

    #[test]
    fn simplex_vertices() {
        let form = StandardForm::new(array![[1.0, 1.0, 1.0]], array![1.0]).unwrap();
        let mut v = enumerate_vertices(&form, DEFAULT_BASIS_BUDGET).unwrap().vertices;
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_eq!(v, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
    }

    #[test]
    fn square_vertices() {
        // x + s1 = 1, y + s2 = 1
        let form = StandardForm::new(
            array![[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0]],
            array![1.0, 1.0],
        )
        .unwrap();
        let v = enumerate_vertices(&form, DEFAULT_BASIS_BUDGET).unwrap().vertices;
        assert_eq!(v.len(), 4);
        let mut corners: Vec<(i64, i64)> = v.iter().map(|x| (x[0] as i64, x[1] as i64)).collect();
        corners.sort();
        assert_eq!(corners, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn redundant_rows_and_budget() {
        let form = StandardForm::new(array![[1.0, 1.0], [2.0, 2.0]], array![1.0, 2.0]).unwrap();
        assert_eq!(enumerate_vertices(&form, 10).unwrap().vertices.len(), 2);
        let bad = StandardForm::new(array![[1.0, 1.0], [2.0, 2.0]], array![1.0, 3.0]).unwrap();
        assert_eq!(enumerate_vertices(&bad, 10), Err(BlackwellError::Infeasible));
        let wide = StandardForm::new(Array2::ones((3, 30)), Array1::ones(3)).unwrap();
        assert!(matches!(
            enumerate_vertices(&wide, 10),
            Err(BlackwellError::Budget { .. })
        ));
        assert_eq!(enumerate_vertices(&wide, DEFAULT_BASIS_BUDGET).unwrap().vertices.len(), 30);
    }

    #[test]
    fn single_source_polytope_is_row_stochastic() {
        let p = problem(ProblemSpec {
            sources: vec![gates::and().sources[0].clone()],
            ..gates::and()
        });
        let poly = build_polytope(&p, None).unwrap();
        assert_eq!(poly.q_cardinality, 2);
        assert_eq!(poly.form.a.nrows(), 2);
        let exact = exact_blackwell_redundancy(&p).unwrap();
        assert_abs_diff_eq!(exact.value, p.source_mutual_informations()[0], epsilon = 1e-12);
    }

    #[test]
    fn unique_polytope_is_constant_in_y() {
        let p = problem(gates::unique());
        let poly = build_polytope(&p, None).unwrap();
        let v = enumerate_vertices(&poly.form, DEFAULT_BASIS_BUDGET).unwrap().vertices;
        let first = &p.sources()[0].matrix;
        let weights: Vec<f64> = (0..v.len()).map(|i| ((i * 7919) % 13 + 1) as f64).collect();
        let total: f64 = weights.iter().sum();
        let mut point = vec![0.0; poly.form.dim()];
        for (w, vert) in weights.iter().zip(&v) {
            for (p, x) in point.iter_mut().zip(vert) {
                *p += w / total * x;
            }
        }
        for sample in v.iter().chain(std::iter::once(&point)) {
            let pq = first.dot(&poly.garblings(sample)[0]);
            for q in 0..pq.ncols() {
                assert_abs_diff_eq!(pq[[0, q]], pq[[1, q]], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn and_identity_garbling_is_feasible() {
        let p = problem(gates::and());
        let poly = build_polytope(&p, None).unwrap();
        let mut x = vec![0.0; poly.form.dim()];
        for s in 0..2 {
            for v in 0..2 {
                x[poly.variable(s, v, v)] = 1.0;
            }
        }
        assert!(poly.form.residual(&x) < 1e-12);
    }

    #[test]
    fn shipped_gate_values() {
        let cases = [
            (gates::and(), 0.311278124459),
            (gates::unique(), 0.0),
            (gates::copy(0.0), 1.0),
            (gates::copy(0.25), 0.0),
            (gates::copy(0.5), 0.0),
        ];
        for (spec, bits) in cases {
            let p = problem(spec);
            let rays = exact_blackwell_redundancy(&p).unwrap();
            assert_abs_diff_eq!(rays.value_bits, bits, epsilon = 1e-9);
            assert!(rays.witness_error(&p) < 1e-8);
            let direct = exact_blackwell_by_polytope(&p, None, DEFAULT_BASIS_BUDGET).unwrap();
            assert_abs_diff_eq!(direct.value_bits, bits, epsilon = 1e-9);
            assert!(direct.witness_error(&p) < 1e-8);
        }
    }

    #[test]
    fn garblings_are_stochastic() {
        let p = problem(gates::bsc4(&gates::DEFAULT_BSC_ERRORS));
        let r = exact_blackwell_redundancy(&p).unwrap();
        assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-12);
        for k in &r.garblings {
            for row in k.rows() {
                assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-9);
                assert!(row.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn deficiency_identical_is_zero() {
        let c = bsc(0.1);
        let r = deficiency(&c, &c, &[0.5, 0.5]).unwrap();
        assert!(r.value <= 1e-9, "{}", r.value);
        assert_abs_diff_eq!(r.kappa[[0, 0]], 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(r.kappa[[1, 1]], 1.0, epsilon = 1e-3);
    }

    #[test]
    fn deficiency_of_a_garbling_is_zero() {
        let r = deficiency(&bsc(0.1), &bsc(0.2), &[0.5, 0.5]).unwrap();
        assert!(r.value <= 1e-9, "{}", r.value);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn deficiency_matches_grid_oracle() {
        let (c, b, py) = (bsc(0.2), bsc(0.1), [0.5, 0.5]);
        let md = deficiency(&c, &b, &py).unwrap();
        let steps = 1000;
        let mut grid = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps {
                let (u, v) = (i as f64 / steps as f64, j as f64 / steps as f64);
                let k = array![[u, 1.0 - u], [v, 1.0 - v]];
                grid = grid.min(weighted_kl(&c, &b, &py, &k));
            }
        }
        assert!(md.value > 1e-3);
        assert!(md.value <= grid + 1e-12);
        assert!(grid - md.value < 1e-6, "md {} grid {}", md.value, grid);
        assert!(md.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn deficiency_support_violation() {
        // p_B has a zero where every garbling of p_C puts mass.
        let c = array![[0.5, 0.5], [0.5, 0.5]];
        let b = array![[1.0, 0.0], [0.0, 1.0]];
        let r = deficiency(&c, &b, &[0.5, 0.5]).unwrap();
        assert!(r.value.is_infinite());
        // The reverse direction is fine.
        let r = deficiency(&b, &c, &[0.5, 0.5]).unwrap();
        assert!(r.value <= 1e-9);
    }
}
