//! Problem assembly: target distribution, source channels, source weights,
//! and the merged joint `p(y, s, z)`.

use ndarray::{Array2, ArrayD, IxDyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prob::{Dist, JointTable, ProbError, NORMALIZATION_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("invalid problem JSON at `{pointer}`: {message}")]
    Json { pointer: String, message: String },
    #[error("validation error at `{pointer}`: {message}")]
    Invalid { pointer: String, message: String },
    #[error("at least one source channel is required")]
    NoSources,
    #[error(transparent)]
    Prob(#[from] ProbError),
}

impl ProblemError {
    fn invalid(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        ProblemError::Invalid {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ProblemError>;

/// On-disk problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub p_y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_labels: Option<Vec<String>>,
    pub sources: Vec<SourceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_s: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub name: String,
    pub labels: Vec<String>,
    /// Rows indexed by target outcome, columns by `labels`.
    pub channel: Vec<Vec<f64>>,
}

impl ProblemSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|err| ProblemError::Json {
            pointer: json_pointer(err.path()),
            message: err.inner().to_string(),
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem spec is always serializable")
    }
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => {
                out.push('/');
                out.push_str(&key.replace('~', "~0").replace('/', "~1"));
            }
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Checks a probability vector and renormalizes it if it is off by at most
/// [`NORMALIZATION_TOL`].
fn normalize_row(row: &[f64], pointer: &str) -> Result<Vec<f64>> {
    for (i, &v) in row.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(ProblemError::invalid(
                format!("{pointer}/{i}"),
                format!("entry {v} is not a non-negative probability"),
            ));
        }
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(ProblemError::invalid(
            pointer,
            format!("row sums to {total}, expected 1"),
        ));
    }
    Ok(row.iter().map(|v| v / total).collect())
}

fn check_unique(labels: &[String], pointer: &str) -> Result<()> {
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(ProblemError::invalid(
                format!("{pointer}/{i}"),
                format!("duplicate label `{l}`"),
            ));
        }
    }
    Ok(())
}

/// A source channel `p(x | y)` with rows indexed by target outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceChannel {
    pub name: String,
    pub labels: Vec<String>,
    pub matrix: Array2<f64>,
}

impl SourceChannel {
    pub fn new(name: impl Into<String>, labels: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        Self::checked(name.into(), labels, rows, "")
    }

    fn checked(name: String, labels: Vec<String>, rows: &[Vec<f64>], pointer: &str) -> Result<Self> {
        check_unique(&labels, &format!("{pointer}/labels"))?;
        if labels.is_empty() {
            return Err(ProblemError::invalid(
                format!("{pointer}/labels"),
                "a source needs at least one outcome",
            ));
        }
        let mut matrix = Array2::zeros((rows.len(), labels.len()));
        for (y, row) in rows.iter().enumerate() {
            let at = format!("{pointer}/channel/{y}");
            if row.len() != labels.len() {
                return Err(ProblemError::invalid(
                    at,
                    format!("row has {} entries for {} labels", row.len(), labels.len()),
                ));
            }
            for (x, v) in normalize_row(row, &at)?.into_iter().enumerate() {
                matrix[[y, x]] = v;
            }
        }
        Ok(Self {
            name,
            labels,
            matrix,
        })
    }

    pub fn outcomes(&self) -> usize {
        self.labels.len()
    }

    /// `p(x | y)`.
    pub fn prob(&self, y: usize, x: usize) -> f64 {
        self.matrix[[y, x]]
    }
}

/// Strictly positive distribution over sources.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceWeights(Vec<f64>);

impl SourceWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let w = normalize_row(&weights, "/nu_s")?;
        if let Some(i) = w.iter().position(|&v| v <= 0.0) {
            return Err(ProblemError::invalid(
                format!("/nu_s/{i}"),
                "source weights must have full support",
            ));
        }
        Ok(Self(w))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, s: usize) -> f64 {
        self.0[s]
    }
}

/// One joint outcome `(s, z)` with non-zero probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportPair {
    pub source: usize,
    /// Index into the merged alphabet.
    pub z: usize,
    /// Index into the source's own alphabet.
    pub x: usize,
}

/// Union of the source alphabets, in order of first appearance, and the
/// support of `(S, Z)`.
pub fn merge_alphabets(sources: &[SourceChannel]) -> Result<(Vec<String>, Vec<SupportPair>)> {
    if sources.is_empty() {
        return Err(ProblemError::NoSources);
    }
    let mut labels: Vec<String> = Vec::new();
    let mut support = Vec::new();
    for (s, src) in sources.iter().enumerate() {
        for (x, l) in src.labels.iter().enumerate() {
            let z = match labels.iter().position(|m| m == l) {
                Some(z) => z,
                None => {
                    labels.push(l.clone());
                    labels.len() - 1
                }
            };
            support.push(SupportPair { source: s, z, x });
        }
    }
    Ok((labels, support))
}

/// Upper limits of the RB curve, in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbBounds {
    /// `sum_s nu(s) I(X_s;Y)`.
    pub max_prediction: f64,
    /// `I(Z;S|Y)`.
    pub max_rate: f64,
}

/// A fully validated redundancy-bottleneck problem.
#[derive(Debug, Clone)]
pub struct RbProblem {
    target: Dist,
    sources: Vec<SourceChannel>,
    weights: SourceWeights,
    z_labels: Vec<String>,
    support: Vec<SupportPair>,
    joint: JointTable,
    /// `p(y, s, z)` laid out as `[support row, y]`.
    row_joint: Array2<f64>,
}

impl RbProblem {
    /// Builds the merged joint `p(y,s,z) = p(y) nu(s) p_s(z|y)`. Uniform
    /// source weights are used when `weights` is `None`.
    pub fn new(
        target: Dist,
        sources: Vec<SourceChannel>,
        weights: Option<SourceWeights>,
    ) -> Result<Self> {
        if let Some(i) = target.probs().iter().position(|&p| p <= 0.0) {
            return Err(ProblemError::invalid(
                format!("/p_y/{i}"),
                format!(
                    "target outcome `{}` has zero probability; p_y needs full support",
                    target.labels()[i]
                ),
            ));
        }
        let (z_labels, support) = merge_alphabets(&sources)?;
        let ny = target.len();
        for (s, src) in sources.iter().enumerate() {
            if src.matrix.nrows() != ny {
                return Err(ProblemError::invalid(
                    format!("/sources/{s}/channel"),
                    format!("channel has {} rows, target has {ny} outcomes", src.matrix.nrows()),
                ));
            }
        }
        let weights = weights.unwrap_or_else(|| SourceWeights::uniform(sources.len()));
        if weights.as_slice().len() != sources.len() {
            return Err(ProblemError::invalid(
                "/nu_s",
                format!(
                    "{} weights for {} sources",
                    weights.as_slice().len(),
                    sources.len()
                ),
            ));
        }

        let py = target.probs();
        let mut row_joint = Array2::zeros((support.len(), ny));
        let mut tensor = ArrayD::zeros(IxDyn(&[ny, sources.len(), z_labels.len()]));
        for (i, pair) in support.iter().enumerate() {
            let nu = weights.get(pair.source);
            for y in 0..ny {
                let p = py[y] * nu * sources[pair.source].prob(y, pair.x);
                row_joint[[i, y]] = p;
                tensor[[y, pair.source, pair.z]] = p;
            }
        }
        let joint = JointTable::new(vec!["Y", "S", "Z"], tensor)?;
        Ok(Self {
            target,
            sources,
            weights,
            z_labels,
            support,
            joint,
            row_joint,
        })
    }

    pub fn from_spec(spec: &ProblemSpec) -> Result<Self> {
        let ny = spec.p_y.len();
        if ny == 0 {
            return Err(ProblemError::invalid("/p_y", "target needs at least one outcome"));
        }
        let py = normalize_row(&spec.p_y, "/p_y")?;
        let y_labels = match &spec.y_labels {
            Some(l) if l.len() != ny => {
                return Err(ProblemError::invalid(
                    "/y_labels",
                    format!("{} labels for {ny} target outcomes", l.len()),
                ))
            }
            Some(l) => {
                check_unique(l, "/y_labels")?;
                l.clone()
            }
            None => (0..ny).map(|i| i.to_string()).collect(),
        };
        if spec.sources.is_empty() {
            return Err(ProblemError::NoSources);
        }
        let mut sources = Vec::with_capacity(spec.sources.len());
        for (s, src) in spec.sources.iter().enumerate() {
            let at = format!("/sources/{s}");
            if src.channel.len() != ny {
                return Err(ProblemError::invalid(
                    format!("{at}/channel"),
                    format!("channel has {} rows, target has {ny} outcomes", src.channel.len()),
                ));
            }
            sources.push(SourceChannel::checked(
                src.name.clone(),
                src.labels.clone(),
                &src.channel,
                &at,
            )?);
        }
        let weights = spec.nu_s.clone().map(SourceWeights::new).transpose()?;
        let target = Dist::new(y_labels, py)?;
        Self::new(target, sources, weights)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_spec(&ProblemSpec::from_json_str(text)?)
    }

    pub fn to_spec(&self) -> ProblemSpec {
        ProblemSpec {
            p_y: self.target.probs().to_vec(),
            y_labels: Some(self.target.labels().to_vec()),
            sources: self
                .sources
                .iter()
                .map(|s| SourceSpec {
                    name: s.name.clone(),
                    labels: s.labels.clone(),
                    channel: s.matrix.rows().into_iter().map(|r| r.to_vec()).collect(),
                })
                .collect(),
            nu_s: Some(self.weights.as_slice().to_vec()),
        }
    }

    pub fn target(&self) -> &Dist {
        &self.target
    }

    pub fn sources(&self) -> &[SourceChannel] {
        &self.sources
    }

    pub fn weights(&self) -> &SourceWeights {
        &self.weights
    }

    pub fn z_labels(&self) -> &[String] {
        &self.z_labels
    }

    pub fn support(&self) -> &[SupportPair] {
        &self.support
    }

    /// `p(y, s, z)` with axes `Y`, `S`, `Z`.
    pub fn joint(&self) -> &JointTable {
        &self.joint
    }

    /// `p(y, s, z)` indexed `[support row, y]`.
    pub fn row_joint(&self) -> &Array2<f64> {
        &self.row_joint
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn num_targets(&self) -> usize {
        self.target.len()
    }

    /// `sum_s |X_s|`, the number of support rows.
    pub fn total_outcomes(&self) -> usize {
        self.support.len()
    }

    /// `I(X_s;Y)` for each source, in nats.
    pub fn source_mutual_informations(&self) -> Vec<f64> {
        let py = self.target.probs();
        self.sources
            .iter()
            .map(|src| {
                let mut mi = 0.0;
                for x in 0..src.outcomes() {
                    let px: f64 = (0..py.len()).map(|y| py[y] * src.prob(y, x)).sum();
                    for (y, &pyv) in py.iter().enumerate() {
                        let c = src.prob(y, x);
                        if c > 0.0 {
                            mi += pyv * c * (c / px).ln();
                        }
                    }
                }
                mi
            })
            .collect()
    }

    pub fn rb_bounds(&self) -> RbBounds {
        let max_prediction = self
            .source_mutual_informations()
            .iter()
            .zip(self.weights.as_slice())
            .map(|(mi, w)| mi * w)
            .sum();
        let max_rate = self
            .joint
            .conditional_mutual_information("Z", "S", &["Y"])
            .expect("joint carries Y, S, Z axes");
        RbBounds {
            max_prediction,
            max_rate,
        }
    }
}
