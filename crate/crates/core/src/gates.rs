//! Built-in example systems, generated in code so the constants are exact.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::problem::{ProblemSpec, SourceSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    #[error("unknown gate `{0}` (expected one of: unique, and, copy, bsc4, threespin)")]
    Unknown(String),
    #[error("parameter out of range: {0}")]
    Parameter(String),
}

/// A named example system and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum GateSpec {
    Unique,
    And,
    Copy { epsilon: f64 },
    Bsc4 { errors: Vec<f64> },
    ThreeSpin,
}

pub const DEFAULT_BSC_ERRORS: [f64; 4] = [0.1, 0.1, 0.2, 0.5];

impl GateSpec {
    /// Parses a gate id; parameters take their defaults.
    pub fn from_id(id: &str) -> Result<Self, GateError> {
        id.parse()
    }

    pub fn id(&self) -> &'static str {
        match self {
            GateSpec::Unique => "unique",
            GateSpec::And => "and",
            GateSpec::Copy { .. } => "copy",
            GateSpec::Bsc4 { .. } => "bsc4",
            GateSpec::ThreeSpin => "threespin",
        }
    }

    pub fn validate(&self) -> Result<(), GateError> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        match self {
            GateSpec::Copy { epsilon } if !in_unit(*epsilon) => Err(GateError::Parameter(
                format!("copy epsilon {epsilon} is outside [0, 1]"),
            )),
            GateSpec::Bsc4 { errors } if errors.is_empty() => {
                Err(GateError::Parameter("bsc4 needs at least one error rate".into()))
            }
            GateSpec::Bsc4 { errors } => match errors.iter().find(|e| !in_unit(**e)) {
                Some(e) => Err(GateError::Parameter(format!(
                    "bsc error rate {e} is outside [0, 1]"
                ))),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    pub fn problem(&self) -> Result<ProblemSpec, GateError> {
        self.validate()?;
        Ok(match self {
            GateSpec::Unique => unique(),
            GateSpec::And => and(),
            GateSpec::Copy { epsilon } => copy(*epsilon),
            GateSpec::Bsc4 { errors } => bsc4(errors),
            GateSpec::ThreeSpin => threespin(),
        })
    }
}

impl FromStr for GateSpec {
    type Err = GateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "unique" => Ok(GateSpec::Unique),
            "and" => Ok(GateSpec::And),
            "copy" => Ok(GateSpec::Copy { epsilon: 0.0 }),
            "bsc4" => Ok(GateSpec::Bsc4 {
                errors: DEFAULT_BSC_ERRORS.to_vec(),
            }),
            "threespin" | "3spin" => Ok(GateSpec::ThreeSpin),
            _ => Err(GateError::Unknown(s.to_string())),
        }
    }
}

impl fmt::Display for GateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn binary() -> Vec<String> {
    strings(&["0", "1"])
}

/// `Y` uniform bit, `X1 = Y`, `X2` an independent uniform bit.
pub fn unique() -> ProblemSpec {
    ProblemSpec {
        p_y: vec![0.5, 0.5],
        y_labels: Some(binary()),
        sources: vec![
            SourceSpec {
                name: "X1".into(),
                labels: binary(),
                channel: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            },
            SourceSpec {
                name: "X2".into(),
                labels: binary(),
                channel: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            },
        ],
        nu_s: None,
    }
}

/// `Y = X1 AND X2` with independent uniform inputs.
pub fn and() -> ProblemSpec {
    let channel = vec![vec![2.0 / 3.0, 1.0 / 3.0], vec![0.0, 1.0]];
    ProblemSpec {
        p_y: vec![0.75, 0.25],
        y_labels: Some(binary()),
        sources: (1..=2)
            .map(|i| SourceSpec {
                name: format!("X{i}"),
                labels: binary(),
                channel: channel.clone(),
            })
            .collect(),
        nu_s: None,
    }
}

/// Binary symmetric channels from a uniform bit, one per error rate.
pub fn bsc4(errors: &[f64]) -> ProblemSpec {
    ProblemSpec {
        p_y: vec![0.5, 0.5],
        y_labels: Some(binary()),
        sources: errors
            .iter()
            .enumerate()
            .map(|(i, &e)| SourceSpec {
                name: format!("X{}", i + 1),
                labels: binary(),
                channel: vec![vec![1.0 - e, e], vec![e, 1.0 - e]],
            })
            .collect(),
        nu_s: None,
    }
}

/// `Y = (X1, X2)` with `p(x1 = x2) = 1 - epsilon/2`. Target outcomes with
/// zero probability (the disagreeing pairs at `epsilon = 0`) are dropped so
/// the target keeps full support.
pub fn copy(epsilon: f64) -> ProblemSpec {
    let mut p_y = Vec::new();
    let mut y_labels = Vec::new();
    let mut rows = Vec::new();
    for x1 in 0..2usize {
        for x2 in 0..2usize {
            let p = if x1 == x2 {
                0.5 - epsilon / 4.0
            } else {
                epsilon / 4.0
            };
            if p > 0.0 {
                p_y.push(p);
                y_labels.push(format!("{x1}{x2}"));
                rows.push((x1, x2));
            }
        }
    }
    let one_hot = |v: usize| if v == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] };
    ProblemSpec {
        p_y,
        y_labels: Some(y_labels),
        sources: vec![
            SourceSpec {
                name: "X1".into(),
                labels: binary(),
                channel: rows.iter().map(|&(a, _)| one_hot(a)).collect(),
            },
            SourceSpec {
                name: "X2".into(),
                labels: binary(),
                channel: rows.iter().map(|&(_, b)| one_hot(b)).collect(),
            },
        ],
        nu_s: None,
    }
}

/// Three uniform target spins; `X1 = X2 = (Y1, Y2)` and `X3 = (Y1, Y3)`.
/// All sources share the two-bit label set `00..11`.
pub fn threespin() -> ProblemSpec {
    let pairs = strings(&["00", "01", "10", "11"]);
    let ys: Vec<[usize; 3]> = (0..8).map(|v| [(v >> 2) & 1, (v >> 1) & 1, v & 1]).collect();
    let channel = |pick: fn(&[usize; 3]) -> usize| -> Vec<Vec<f64>> {
        ys.iter()
            .map(|y| {
                let mut row = vec![0.0; 4];
                row[pick(y)] = 1.0;
                row
            })
            .collect()
    };
    let first_two: fn(&[usize; 3]) -> usize = |y| y[0] * 2 + y[1];
    let first_last: fn(&[usize; 3]) -> usize = |y| y[0] * 2 + y[2];
    ProblemSpec {
        p_y: vec![0.125; 8],
        y_labels: Some(ys.iter().map(|y| format!("{}{}{}", y[0], y[1], y[2])).collect()),
        sources: vec![
            SourceSpec {
                name: "X1".into(),
                labels: pairs.clone(),
                channel: channel(first_two),
            },
            SourceSpec {
                name: "X2".into(),
                labels: pairs.clone(),
                channel: channel(first_two),
            },
            SourceSpec {
                name: "X3".into(),
                labels: pairs,
                channel: channel(first_last),
            },
        ],
        nu_s: None,
    }
}
