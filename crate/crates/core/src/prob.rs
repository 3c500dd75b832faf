//! Finite probability arithmetic and information measures.
//!
//! Everything is in nats. The conventions are the usual ones: `0 ln 0 = 0`,
//! `0 ln (0 / q) = 0`, and a KL divergence with `p(i) > 0 = q(i)` is
//! `f64::INFINITY`. Conditionals of zero-probability events are never formed;
//! their terms carry zero weight and are skipped.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use ndarray::{Array2, ArrayD, Axis, IxDyn};
use thiserror::Error;

/// Tolerance used when validating that probabilities sum to one.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("axis `{0}` is not present in the table")]
    MissingAxis(String),
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("negative probability {value} at index {index}")]
    Negative { index: usize, value: f64 },
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, ProbError>;

/// `x ln x` with the `0 ln 0 = 0` convention.
#[inline]
pub(crate) fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// A labelled probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dist {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl Dist {
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if labels.len() != probs.len() {
            return Err(ProbError::Shape(format!(
                "{} labels for {} probabilities",
                labels.len(),
                probs.len()
            )));
        }
        check_simplex(&probs)?;
        Ok(Self { labels, probs })
    }

    /// Distribution with labels `"0", "1", ...`.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        let labels = (0..probs.len()).map(|i| i.to_string()).collect();
        Self::new(labels, probs)
    }

    pub fn uniform(n: usize) -> Self {
        let labels = (0..n).map(|i| i.to_string()).collect();
        Self {
            labels,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn full_support(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }
}

fn check_simplex(probs: &[f64]) -> Result<()> {
    if let Some((index, &value)) = probs.iter().enumerate().find(|(_, p)| !(**p >= 0.0)) {
        return Err(ProbError::Negative { index, value });
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(ProbError::NotNormalized(total));
    }
    Ok(())
}

/// Shannon entropy in nats.
pub fn entropy(d: &Dist) -> f64 {
    -d.probs.iter().copied().map(xlogx).sum::<f64>()
}

/// KL divergence `D(p || q)` in nats, `f64::INFINITY` when `p` is not
/// absolutely continuous with respect to `q`.
pub fn kl_divergence(p: &Dist, q: &Dist) -> Result<f64> {
    if p.labels != q.labels {
        return Err(ProbError::Shape(
            "KL divergence needs identical label sets".into(),
        ));
    }
    Ok(kl_slices(&p.probs, &q.probs))
}

pub(crate) fn kl_slices(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            acc += pi * (pi / qi).ln();
        }
    }
    acc
}

/// Row-stochastic conditional distribution `p(out | given)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondDist {
    given: Vec<String>,
    outputs: Vec<String>,
    matrix: Array2<f64>,
}

impl CondDist {
    pub fn new(given: Vec<String>, outputs: Vec<String>, matrix: Array2<f64>) -> Result<Self> {
        if matrix.nrows() != given.len() || matrix.ncols() != outputs.len() {
            return Err(ProbError::Shape(format!(
                "matrix is {}x{}, labels are {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                given.len(),
                outputs.len()
            )));
        }
        for row in matrix.rows() {
            check_simplex(row.as_slice().expect("standard layout"))?;
        }
        Ok(Self {
            given,
            outputs,
            matrix,
        })
    }

    /// Conditional distribution with numeric labels.
    pub fn from_matrix(matrix: Array2<f64>) -> Result<Self> {
        let given = (0..matrix.nrows()).map(|i| i.to_string()).collect();
        let outputs = (0..matrix.ncols()).map(|i| i.to_string()).collect();
        Self::new(given, outputs, matrix.as_standard_layout().to_owned())
    }

    pub fn given_labels(&self) -> &[String] {
        &self.given
    }

    pub fn output_labels(&self) -> &[String] {
        &self.outputs
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// The garbling `kappa ∘ self`: first apply `self`, then feed its output
    /// through `kappa`. Plain matrix product.
    pub fn then(&self, kappa: &CondDist) -> Result<CondDist> {
        if self.outputs.len() != kappa.given.len() {
            return Err(ProbError::Shape(format!(
                "cannot compose a channel with {} outputs and one with {} inputs",
                self.outputs.len(),
                kappa.given.len()
            )));
        }
        Ok(CondDist {
            given: self.given.clone(),
            outputs: kappa.outputs.clone(),
            matrix: self.matrix.dot(&kappa.matrix),
        })
    }
}

/// Dense joint probability tensor with named axes.
///
/// Marginals are memoized per axis subset; the cache is shared between
/// clones and safe to fill from several threads.
#[derive(Debug, Clone)]
pub struct JointTable {
    axes: Vec<String>,
    probs: ArrayD<f64>,
    marginals: Arc<RwLock<HashMap<Vec<usize>, ArrayD<f64>>>>,
}

impl JointTable {
    pub fn new<S: Into<String>>(axes: Vec<S>, probs: ArrayD<f64>) -> Result<Self> {
        let axes: Vec<String> = axes.into_iter().map(Into::into).collect();
        if axes.len() != probs.ndim() {
            return Err(ProbError::Shape(format!(
                "{} axis names for a {}-dimensional tensor",
                axes.len(),
                probs.ndim()
            )));
        }
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].contains(a) {
                return Err(ProbError::Shape(format!("duplicate axis `{a}`")));
            }
        }
        let probs = probs.as_standard_layout().into_owned();
        check_simplex(probs.as_slice().expect("standard layout"))?;
        Ok(Self {
            axes,
            probs,
            marginals: Arc::default(),
        })
    }

    pub fn axes(&self) -> &[String] {
        &self.axes
    }

    pub fn shape(&self) -> &[usize] {
        self.probs.shape()
    }

    pub fn probs(&self) -> &ArrayD<f64> {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.sum()
    }

    pub fn axis_index(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| ProbError::MissingAxis(name.to_string()))
    }

    /// Marginal over the kept axes, in ascending axis order.
    fn marginal_sorted(&self, keep: &[usize]) -> ArrayD<f64> {
        if let Some(hit) = self.marginals.read().expect("cache lock").get(keep) {
            return hit.clone();
        }
        let mut out = self.probs.clone();
        for ax in (0..self.axes.len()).rev() {
            if !keep.contains(&ax) {
                out = out.sum_axis(Axis(ax));
            }
        }
        self.marginals
            .write()
            .expect("cache lock")
            .insert(keep.to_vec(), out.clone());
        out
    }

    /// Marginal table over `keep`, with axes in the order given.
    pub fn marginal(&self, keep: &[&str]) -> Result<JointTable> {
        let idx: Vec<usize> = keep
            .iter()
            .map(|k| self.axis_index(k))
            .collect::<Result<_>>()?;
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != idx.len() {
            return Err(ProbError::Shape("repeated axis in marginal".into()));
        }
        let m = self.marginal_sorted(&sorted);
        let perm: Vec<usize> = idx
            .iter()
            .map(|i| sorted.iter().position(|s| s == i).expect("present"))
            .collect();
        let m = m.permuted_axes(IxDyn(&perm)).as_standard_layout().into_owned();
        Ok(JointTable {
            axes: keep.iter().map(|s| s.to_string()).collect(),
            probs: m,
            marginals: Arc::default(),
        })
    }

    /// `I(A;B | C)` in nats; `given` may be empty for plain mutual information.
    pub fn conditional_mutual_information(&self, a: &str, b: &str, given: &[&str]) -> Result<f64> {
        let mut names = vec![a, b];
        names.extend_from_slice(given);
        let m = self.marginal(&names)?;
        let shape = m.shape().to_vec();
        let (na, nb) = (shape[0], shape[1]);
        let nc: usize = shape[2..].iter().product();
        let flat = m
            .probs
            .into_shape_with_order((na, nb, nc))
            .map_err(|e| ProbError::Shape(e.to_string()))?;
        let mut total = 0.0;
        for c in 0..nc {
            let pc: f64 = flat.index_axis(Axis(2), c).sum();
            if pc <= 0.0 {
                continue;
            }
            for i in 0..na {
                let pac: f64 = (0..nb).map(|j| flat[[i, j, c]]).sum();
                for j in 0..nb {
                    let pabc = flat[[i, j, c]];
                    if pabc > 0.0 {
                        let pbc: f64 = (0..na).map(|k| flat[[k, j, c]]).sum();
                        total += pabc * (pabc * pc / (pac * pbc)).ln();
                    }
                }
            }
        }
        Ok(total)
    }

    pub fn mutual_information(&self, a: &str, b: &str) -> Result<f64> {
        self.conditional_mutual_information(a, b, &[])
    }
}

/// `I(A;B|C)` for single axes.
pub fn conditional_mutual_information(j: &JointTable, a: &str, b: &str, c: &str) -> Result<f64> {
    j.conditional_mutual_information(a, b, &[c])
}

/// Conditional tables `p(q, y | S = s)` with `Q`, `Y`, `S` axes, plus `p(s)`.
fn qy_given_s(j: &JointTable, s: usize) -> Result<(Array2<f64>, f64)> {
    let m = j.marginal(&["Q", "Y", "S"])?;
    let ns = m.shape()[2];
    if s >= ns {
        return Err(ProbError::Domain(format!(
            "source index {s} out of range ({ns} sources)"
        )));
    }
    let slab = m.probs.index_axis(Axis(2), s).to_owned();
    let weight = slab.sum();
    if weight <= 0.0 {
        return Err(ProbError::Domain(format!("source {s} has zero weight")));
    }
    let slab = (slab / weight)
        .into_dimensionality::<ndarray::Ix2>()
        .map_err(|e| ProbError::Shape(e.to_string()))?;
    Ok((slab, weight))
}

/// `I(Q;Y|S=s) = sum_y p(y|s) D(p(Q|y,s) || p(Q|s))`.
pub fn specific_cmi_target(j: &JointTable, s: usize) -> Result<f64> {
    let (qy, _) = qy_given_s(j, s)?;
    let pq: Vec<f64> = qy.rows().into_iter().map(|r| r.sum()).collect();
    let mut total = 0.0;
    for y in 0..qy.ncols() {
        let col = qy.column(y);
        let py = col.sum();
        if py <= 0.0 {
            continue;
        }
        let cond: Vec<f64> = col.iter().map(|v| v / py).collect();
        total += py * kl_slices(&cond, &pq);
    }
    Ok(total)
}

/// `I(Q;S=s|Y) = sum_y p(y|s) D(p(Q|y,s) || p(Q|y))`.
pub fn specific_cmi_source(j: &JointTable, s: usize) -> Result<f64> {
    let (qy, _) = qy_given_s(j, s)?;
    let qy_all = j.marginal(&["Q", "Y"])?;
    let qy_all = qy_all.probs();
    let mut total = 0.0;
    for y in 0..qy.ncols() {
        let col = qy.column(y);
        let py = col.sum();
        if py <= 0.0 {
            continue;
        }
        let cond: Vec<f64> = col.iter().map(|v| v / py).collect();
        let py_all: f64 = (0..qy.nrows()).map(|q| qy_all[[q, y]]).sum();
        let marg: Vec<f64> = (0..qy.nrows()).map(|q| qy_all[[q, y]] / py_all).collect();
        total += py * kl_slices(&cond, &marg);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn d(p: &[f64]) -> Dist {
        Dist::from_probs(p.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(entropy(&d(&[0.5, 0.5])), LN_2, epsilon = 1e-15);
        assert_eq!(entropy(&d(&[1.0, 0.0])), 0.0);
        assert_abs_diff_eq!(entropy(&d(&[0.75, 0.25])), 0.562335, epsilon = 1e-6);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&d(&[0.5, 0.5]), &d(&[0.5, 0.5])).unwrap(), 0.0);
        assert_abs_diff_eq!(
            kl_divergence(&d(&[1.0, 0.0]), &d(&[0.5, 0.5])).unwrap(),
            LN_2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            kl_divergence(&d(&[0.75, 0.25]), &d(&[0.5, 0.5])).unwrap(),
            0.130812,
            epsilon = 1e-6
        );
        assert_eq!(
            kl_divergence(&d(&[0.5, 0.5]), &d(&[1.0, 0.0])).unwrap(),
            f64::INFINITY
        );
        let other = Dist::new(vec!["a".into(), "b".into()], vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            kl_divergence(&d(&[0.5, 0.5]), &other),
            Err(ProbError::Shape(_))
        ));
    }

    #[test]
    fn rejects_bad_distributions() {
        assert!(matches!(
            Dist::from_probs(vec![0.6, 0.6]),
            Err(ProbError::NotNormalized(_))
        ));
        assert!(matches!(
            Dist::from_probs(vec![1.5, -0.5]),
            Err(ProbError::Negative { index: 1, .. })
        ));
        assert!(!d(&[1.0, 0.0]).full_support());
    }

    #[test]
    fn cmi_of_product_is_zero() {
        let (pa, pb, pc) = ([0.3, 0.7], [0.2, 0.5, 0.3], [0.6, 0.4]);
        let t = Array::from_shape_fn(IxDyn(&[2, 3, 2]), |i| pa[i[0]] * pb[i[1]] * pc[i[2]]);
        let j = JointTable::new(vec!["A", "B", "C"], t).unwrap();
        let v = conditional_mutual_information(&j, "A", "B", "C").unwrap();
        assert!(v.abs() < 1e-15);
        assert!(matches!(
            conditional_mutual_information(&j, "A", "X", "C"),
            Err(ProbError::MissingAxis(_))
        ));
    }

    #[test]
    fn composition_is_matrix_product() {
        let bsc = |e: f64| CondDist::from_matrix(ndarray::array![[1.0 - e, e], [e, 1.0 - e]]).unwrap();
        let composed = bsc(0.1).then(&bsc(0.125)).unwrap();
        assert_abs_diff_eq!(composed.matrix()[[0, 1]], 0.2, epsilon = 1e-15);
    }

    fn random_joint(seed: &[f64], shape: &[usize]) -> ArrayD<f64> {
        let n: usize = shape.iter().product();
        let raw: Vec<f64> = (0..n).map(|i| seed[i % seed.len()] + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        ArrayD::from_shape_vec(IxDyn(shape), raw.into_iter().map(|v| v / total).collect()).unwrap()
    }

    fn brute_specific_target(t: &ArrayD<f64>, s: usize) -> f64 {
        // t indexed [q, y, s]
        let (nq, ny) = (t.shape()[0], t.shape()[1]);
        let ps: f64 = (0..nq).flat_map(|q| (0..ny).map(move |y| (q, y))).map(|(q, y)| t[[q, y, s]]).sum();
        let mut out = 0.0;
        for y in 0..ny {
            let pys: f64 = (0..nq).map(|q| t[[q, y, s]]).sum();
            for q in 0..nq {
                let pqs: f64 = (0..ny).map(|yy| t[[q, yy, s]]).sum();
                let pqys = t[[q, y, s]];
                if pqys > 0.0 {
                    out += pqys / ps * ((pqys / pys) / (pqs / ps)).ln();
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn decomposition_identities(seed in prop::collection::vec(0.0f64..1.0, 24)) {
            let t = random_joint(&seed, &[3, 2, 4]);
            let j = JointTable::new(vec!["Q", "Y", "S"], t.clone()).unwrap();
            let ps = j.marginal(&["S"]).unwrap();
            let pred = j.conditional_mutual_information("Q", "Y", &["S"]).unwrap();
            let comp = j.conditional_mutual_information("Q", "S", &["Y"]).unwrap();
            let mut pred_sum = 0.0;
            let mut comp_sum = 0.0;
            for s in 0..4 {
                let w = ps.probs()[[s]];
                let tgt = specific_cmi_target(&j, s).unwrap();
                prop_assert!((tgt - brute_specific_target(&t, s)).abs() < 1e-10);
                pred_sum += w * tgt;
                comp_sum += w * specific_cmi_source(&j, s).unwrap();
            }
            prop_assert!(pred >= -1e-12 && comp >= -1e-12);
            prop_assert!((pred - pred_sum).abs() < 1e-10);
            prop_assert!((comp - comp_sum).abs() < 1e-10);
            let sym = j.conditional_mutual_information("Y", "Q", &["S"]).unwrap();
            prop_assert!((pred - sym).abs() < 1e-12);
        }

        #[test]
        fn marginals_are_consistent(seed in prop::collection::vec(0.0f64..1.0, 12)) {
            let t = random_joint(&seed, &[2, 3, 2]);
            let j = JointTable::new(vec!["A", "B", "C"], t).unwrap();
            let ab = j.marginal(&["B", "A"]).unwrap();
            let b = j.marginal(&["B"]).unwrap();
            for bi in 0..3 {
                let direct: f64 = (0..2).map(|a| ab.probs()[[bi, a]]).sum();
                prop_assert!((direct - b.probs()[[bi]]).abs() < 1e-12);
            }
            prop_assert!((j.total() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn markov_chain_identity(py0 in 0.05f64..0.95, a in 0.0f64..1.0, b in 0.0f64..1.0, ps0 in 0.05f64..0.95) {
            // Q - Y - S with S independent of everything: I(Q;Y|S) = I(Q;Y).
            let py = [py0, 1.0 - py0];
            let pq_y = [[a, 1.0 - a], [b, 1.0 - b]];
            let ps = [ps0, 1.0 - ps0];
            let t = Array::from_shape_fn(IxDyn(&[2, 2, 2]), |i| pq_y[i[1]][i[0]] * py[i[1]] * ps[i[2]]);
            let j = JointTable::new(vec!["Q", "Y", "S"], t).unwrap();
            let cond = j.conditional_mutual_information("Q", "Y", &["S"]).unwrap();
            let plain = j.mutual_information("Q", "Y").unwrap();
            prop_assert!((cond - plain).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_weight_source_is_domain_error() {
        let mut t = ArrayD::zeros(IxDyn(&[2, 2, 2]));
        t[[0, 0, 0]] = 0.5;
        t[[1, 1, 0]] = 0.5;
        let j = JointTable::new(vec!["Q", "Y", "S"], t).unwrap();
        assert!(matches!(specific_cmi_target(&j, 1), Err(ProbError::Domain(_))));
        assert!(matches!(specific_cmi_source(&j, 1), Err(ProbError::Domain(_))));
        assert_abs_diff_eq!(specific_cmi_target(&j, 0).unwrap(), LN_2, epsilon = 1e-15);
    }
}
