//! Per-source breakdown of solved bottlenecks.
//!
//! Totals are recomputed from the full joint `p(y, s, z, q)` through
//! [`JointTable`], independently of the solver's fast path.

use ndarray::{ArrayD, IxDyn};
use thiserror::Error;

use crate::prob::{specific_cmi_source, specific_cmi_target, JointTable, ProbError};
use crate::problem::RbProblem;
use crate::solver::{BottleneckChannel, RbCurve};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("bottleneck has {got} rows, problem has {expected} source outcomes")]
    Shape { got: usize, expected: usize },
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// One bottleneck split into per-source terms. All values in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionRow {
    pub prediction: f64,
    pub compression: f64,
    /// `nu(s) I(Q;Y|S=s)`; sums to `prediction`.
    pub prediction_contributions: Vec<f64>,
    /// `nu(s) I(Q;S=s|Y)`; sums to `compression`.
    pub compression_contributions: Vec<f64>,
    /// Unweighted `I(Q;Y|S=s)`.
    pub specific_prediction: Vec<f64>,
    /// Unweighted `I(Q;S=s|Y)`.
    pub specific_compression: Vec<f64>,
    /// `I(X_s;Y) - I(Q;Y|S=s)`.
    pub unique_gap: Vec<f64>,
}

/// Joint `p(y, s, z, q)` of a problem and a bottleneck channel.
pub fn full_joint(problem: &RbProblem, channel: &BottleneckChannel) -> Result<JointTable> {
    if channel.rows() != problem.total_outcomes() {
        return Err(AnalysisError::Shape {
            got: channel.rows(),
            expected: problem.total_outcomes(),
        });
    }
    let (ny, ns, nz, nq) = (
        problem.num_targets(),
        problem.num_sources(),
        problem.z_labels().len(),
        channel.q_size(),
    );
    let pj = problem.row_joint();
    let r = channel.matrix();
    let mut probs = ArrayD::zeros(IxDyn(&[ny, ns, nz, nq]));
    for (i, pair) in problem.support().iter().enumerate() {
        for y in 0..ny {
            for q in 0..nq {
                probs[[y, pair.source, pair.z, q].as_slice()] += pj[[i, y]] * r[[i, q]];
            }
        }
    }
    Ok(JointTable::new(vec!["Y", "S", "Z", "Q"], probs)?)
}

pub fn decompose(problem: &RbProblem, channel: &BottleneckChannel) -> Result<DecompositionRow> {
    let joint = full_joint(problem, channel)?;
    let prediction = joint.conditional_mutual_information("Q", "Y", &["S"])?;
    let compression = joint.conditional_mutual_information("Q", "S", &["Y"])?;
    let nu = problem.weights().as_slice();
    let mi = problem.source_mutual_informations();
    let specific_prediction = (0..nu.len())
        .map(|s| specific_cmi_target(&joint, s))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let specific_compression = (0..nu.len())
        .map(|s| specific_cmi_source(&joint, s))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(DecompositionRow {
        prediction,
        compression,
        prediction_contributions: nu.iter().zip(&specific_prediction).map(|(w, v)| w * v).collect(),
        compression_contributions: nu.iter().zip(&specific_compression).map(|(w, v)| w * v).collect(),
        unique_gap: mi.iter().zip(&specific_prediction).map(|(i, v)| i - v).collect(),
        specific_prediction,
        specific_compression,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub beta: f64,
    pub on_frontier: bool,
    pub terms: DecompositionRow,
}

/// Decomposition of every point of a sweep, sorted by beta.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub weights: Vec<f64>,
    pub rows: Vec<ReportRow>,
}

impl DecompositionReport {
    pub fn from_curve(problem: &RbProblem, curve: &RbCurve) -> Result<Self> {
        let rows = curve
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                Ok(ReportRow {
                    beta: p.beta,
                    on_frontier: curve.on_frontier(i),
                    terms: decompose(problem, &p.channel)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            weights: problem.weights().as_slice().to_vec(),
            rows,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceCurvePoint {
    pub beta: f64,
    /// Unweighted `I(Q;S=s|Y)`.
    pub compression: f64,
    /// Unweighted `I(Q;Y|S=s)`.
    pub prediction: f64,
    pub on_frontier: bool,
}

/// The bottleneck seen from one source, ordered by beta. No monotonicity or
/// concavity is imposed.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceCurve {
    pub source: String,
    pub weight: f64,
    pub points: Vec<SourceCurvePoint>,
}

pub fn per_source_curves(problem: &RbProblem, curve: &RbCurve) -> Result<Vec<SourceCurve>> {
    let report = DecompositionReport::from_curve(problem, curve)?;
    Ok(problem
        .sources()
        .iter()
        .enumerate()
        .map(|(s, src)| SourceCurve {
            source: src.name.clone(),
            weight: report.weights[s],
            points: report
                .rows
                .iter()
                .map(|row| SourceCurvePoint {
                    beta: row.beta,
                    compression: row.terms.specific_compression[s],
                    prediction: row.terms.specific_prediction[s],
                    on_frontier: row.on_frontier,
                })
                .collect(),
        })
        .collect())
}
