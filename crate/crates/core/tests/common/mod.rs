#![allow(dead_code)]

use rand::Rng;
use rand_distr::Exp1;
use rb_core::problem::{ProblemSpec, SourceSpec};
use rb_core::RbProblem;

fn flat_dirichlet<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = v.iter().sum();
    v.into_iter().map(|x| x / total).collect()
}

/// Random problem with full-support target, `sources` sources and source
/// alphabets drawn from `alphabet`.
pub fn random_problem<R: Rng>(
    rng: &mut R,
    targets: usize,
    sources: usize,
    alphabet: std::ops::RangeInclusive<usize>,
) -> RbProblem {
    let p_y = loop {
        let p = flat_dirichlet(rng, targets);
        if p.iter().all(|&v| v > 0.05) {
            break p;
        }
    };
    let sources = (0..sources)
        .map(|s| {
            let k = rng.random_range(alphabet.clone());
            SourceSpec {
                name: format!("X{}", s + 1),
                labels: (0..k).map(|j| format!("{s}_{j}")).collect(),
                channel: (0..targets).map(|_| flat_dirichlet(rng, k)).collect(),
            }
        })
        .collect();
    RbProblem::from_spec(&ProblemSpec {
        p_y,
        y_labels: None,
        sources,
        nu_s: None,
    })
    .expect("valid random problem")
}

/// Binary entropy in bits.
pub fn h2(p: f64) -> f64 {
    let t = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    t(p) + t(1.0 - p)
}
