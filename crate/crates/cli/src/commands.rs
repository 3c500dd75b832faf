use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use rb_core::analysis::DecompositionReport;
use rb_core::blackwell::{exact_blackwell_with_budget, BlackwellError};
use rb_core::gates::GateSpec;
use rb_core::solver::{concave_frontier, interpolate_frontier, log_spaced, RbCurve};
use rb_core::{rb_at_rate, Objective, RbProblem, SolverConfig};
use serde_json::json;

use crate::format::{g9, Table, Units};
use crate::manifest::{ResolvedConfig, RunManifest};
use crate::{CliError, ExactArgs, GateArgs, ObjectiveArg, Outcome, PointArgs, SolveArgs, SweepArgs};

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: impl AsRef<Path>) -> impl FnOnce(io::Error) -> CliError {
    let path = path.as_ref().display().to_string();
    move |source| CliError::Io { path, source }
}

fn read_input(path: &str) -> Result<Vec<u8>> {
    if path == "-" {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf).map_err(io_err("<stdin>"))?;
        Ok(buf)
    } else {
        fs::read(path).map_err(io_err(path))
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(io_err(path)),
        None => io::stdout().write_all(bytes).map_err(io_err("<stdout>")),
    }
}

fn load_problem(bytes: &[u8]) -> Result<RbProblem> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| CliError::Validation(format!("problem file is not UTF-8: {e}")))?;
    RbProblem::from_json_str(text).map_err(|e| CliError::Validation(format!("invalid problem: {e}")))
}

pub fn gate(args: &GateArgs) -> Result<Outcome> {
    let mut spec: GateSpec = args
        .id
        .parse()
        .map_err(|e: rb_core::gates::GateError| CliError::Validation(e.to_string()))?;
    match (&mut spec, args.epsilon, &args.errors) {
        (GateSpec::Copy { epsilon }, Some(e), None) => *epsilon = e,
        (GateSpec::Bsc4 { errors }, None, Some(v)) => *errors = v.clone(),
        (_, None, None) => {}
        _ => {
            return Err(CliError::Validation(format!(
                "gate `{}` does not take the given parameter (--epsilon is for copy, --errors for bsc4)",
                spec.id()
            )))
        }
    }
    let problem = spec
        .problem()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let mut text = problem.to_json_pretty();
    text.push('\n');
    emit(args.out.as_deref(), text.as_bytes())?;
    Ok(Outcome::Done)
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Validation(format!("--betas expects `min,max,count`, got `{text}`"));
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [min, max, count] = parts.as_slice() else {
        return Err(bad());
    };
    let min: f64 = min.parse().map_err(|_| bad())?;
    let max: f64 = max.parse().map_err(|_| bad())?;
    let count: usize = count.parse().map_err(|_| bad())?;
    let ok = min > 0.0
        && max.is_finite()
        && count >= 1
        && (max > min || (max == min && count == 1));
    if !ok {
        return Err(CliError::Validation(format!(
            "--betas needs 0 < min < max and count >= 1 (or min = max with count 1), got `{text}`"
        )));
    }
    Ok(if count == 1 {
        vec![min]
    } else {
        log_spaced(min, max, count)
    })
}

fn solver_config(args: &SolveArgs) -> Result<(SolverConfig, Vec<f64>)> {
    let grid = parse_grid(&args.betas)?;
    if args.max_iters == 0 {
        return Err(CliError::Validation("--max-iters must be at least 1".into()));
    }
    let config = SolverConfig {
        beta: grid[0],
        objective: match args.objective {
            ObjectiveArg::Linear => Objective::Linear,
            ObjectiveArg::Exp => Objective::Exponential,
        },
        q_cardinality: args.qsize,
        max_iters: args.max_iters,
        tol: args.tol,
        restarts: args.restarts,
        seed: args.seed,
        extend_to_zero_rate: !args.no_zero_rate,
        ..Default::default()
    };
    config
        .validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok((config, grid))
}

fn resolved(args: &SolveArgs, config: &SolverConfig, grid: Vec<f64>, problem: &RbProblem) -> ResolvedConfig {
    ResolvedConfig {
        beta_grid: grid,
        extend_to_zero_rate: config.extend_to_zero_rate,
        restarts: config.restarts,
        seed: config.seed,
        tol: config.tol,
        max_iters: config.max_iters,
        objective: args.objective,
        q_cardinality: config.q_size(problem),
        units: args.units,
        rate: None,
    }
}

fn run_sweep(problem: &RbProblem, args: &SolveArgs) -> Result<(RbCurve, ResolvedConfig)> {
    let (config, grid) = solver_config(args)?;
    let curve = rb_core::sweep(problem, &grid, &config).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok((curve, resolved(args, &config, grid, problem)))
}

fn write_manifest(
    out: Option<&Path>,
    explicit: Option<&Path>,
    manifest: &RunManifest,
) -> Result<()> {
    let path = match (explicit, out) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(o)) => {
            let mut s = o.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
        (None, None) => return Ok(()),
    };
    fs::write(&path, manifest.to_json()).map_err(io_err(&path))
}

fn not_converged(curve: &RbCurve) -> Outcome {
    match curve.points.iter().filter(|p| !p.converged).count() {
        0 => Outcome::Done,
        n => Outcome::NotConverged(n),
    }
}

fn curve_table(problem: &RbProblem, curve: &RbCurve, units: Units, decompose: bool) -> Result<Table> {
    let u = units.suffix();
    let n = problem.num_sources();
    let nu = problem.weights().as_slice();
    let mut header: Vec<String> = [
        "beta".into(),
        format!("compression_{u}"),
        format!("prediction_{u}"),
        "objective_nats".into(),
        "converged".into(),
        "iterations".into(),
    ]
    .into();
    for i in 1..=n {
        header.push(format!("pred_s{i}_{u}"));
        header.push(format!("comp_s{i}_{u}"));
    }
    let report = if decompose {
        header.push("on_frontier".into());
        for i in 1..=n {
            header.extend([
                format!("nu_s{i}"),
                format!("wpred_s{i}_{u}"),
                format!("wcomp_s{i}_{u}"),
                format!("gap_s{i}_{u}"),
            ]);
        }
        Some(DecompositionReport::from_curve(problem, curve).map_err(|e| CliError::Validation(e.to_string()))?)
    } else {
        None
    };
    let conv = |v: f64| g9(units.from_nats(v));
    let rows = curve
        .points
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut row = vec![
                g9(p.beta),
                conv(p.compression),
                conv(p.prediction),
                g9(p.objective),
                p.converged.to_string(),
                p.iterations.to_string(),
            ];
            for s in 0..n {
                row.push(conv(p.per_source_prediction[s] / nu[s]));
                row.push(conv(p.per_source_compression[s] / nu[s]));
            }
            if let Some(report) = &report {
                let r = &report.rows[k];
                row.push(r.on_frontier.to_string());
                for s in 0..n {
                    row.extend([
                        g9(nu[s]),
                        conv(r.terms.prediction_contributions[s]),
                        conv(r.terms.compression_contributions[s]),
                        conv(r.terms.unique_gap[s]),
                    ]);
                }
            }
            row
        })
        .collect();
    Ok(Table { header, rows })
}

pub fn sweep(args: &SweepArgs, decompose: bool) -> Result<Outcome> {
    let bytes = read_input(&args.problem)?;
    let problem = load_problem(&bytes)?;
    let (curve, config) = run_sweep(&problem, &args.solve)?;
    let table = curve_table(&problem, &curve, args.solve.units, decompose)?;
    let mut csv = Vec::new();
    table
        .write(&mut csv)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    emit(args.out.as_deref(), &csv)?;
    let command = if decompose { "decompose" } else { "sweep" };
    write_manifest(
        args.out.as_deref(),
        args.manifest.as_deref(),
        &RunManifest::new(command, &bytes, config),
    )?;
    Ok(not_converged(&curve))
}

/// `(compression, prediction)` pairs in nats from a curve CSV.
fn read_curve(path: &Path) -> Result<(Vec<u8>, Vec<(f64, f64)>)> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let bad = |msg: String| CliError::Validation(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let find = |name: &str| -> Option<(usize, Units)> {
        [Units::Bits, Units::Nats].into_iter().find_map(|u| {
            header
                .iter()
                .position(|h| h == format!("{name}_{}", u.suffix()))
                .map(|i| (i, u))
        })
    };
    let ((ci, cu), (pi, pu)) = match (find("compression"), find("prediction")) {
        (Some(c), Some(p)) => (c, p),
        _ => return Err(bad("needs compression and prediction columns".into())),
    };
    let mut pairs = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let value = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(format!("row {}: column {} is not a number", line + 1, i + 1)))
        };
        pairs.push((cu.to_nats(value(ci)?), pu.to_nats(value(pi)?)));
    }
    if pairs.is_empty() {
        return Err(bad("curve has no rows".into()));
    }
    Ok((bytes, pairs))
}

pub fn point(args: &PointArgs) -> Result<Outcome> {
    let units = args.solve.units;
    if !(args.rate >= 0.0) {
        return Err(CliError::Validation(format!(
            "--rate must be non-negative, got {}",
            args.rate
        )));
    }
    let rate = units.to_nats(args.rate);
    let (input, value, outcome, config) = match (&args.curve, &args.problem) {
        (Some(_), Some(_)) => {
            return Err(CliError::Validation(
                "give either a problem file or --curve, not both".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Validation("a problem file or --curve is required".into()))
        }
        (Some(path), None) => {
            let (bytes, pairs) = read_curve(path)?;
            let frontier = concave_frontier(&pairs);
            let v = interpolate_frontier(&frontier, rate).map_err(|e| CliError::Validation(e.to_string()))?;
            (bytes, v, Outcome::Done, None)
        }
        (None, Some(file)) => {
            let bytes = read_input(file)?;
            let problem = load_problem(&bytes)?;
            let (curve, config) = run_sweep(&problem, &args.solve)?;
            let v = rb_at_rate(&curve, rate).map_err(|e| CliError::Validation(e.to_string()))?;
            (bytes, v, not_converged(&curve), Some(config))
        }
    };
    let key = format!("prediction_{}", units.suffix());
    let mut body = serde_json::to_string_pretty(&json!({
        "rate": args.rate,
        "units": units,
        key: units.from_nats(value),
    }))
    .expect("json");
    body.push('\n');
    emit(args.out.as_deref(), body.as_bytes())?;
    if let Some(mut config) = config {
        config.rate = Some(args.rate);
        write_manifest(
            args.out.as_deref(),
            args.manifest.as_deref(),
            &RunManifest::new("point", &input, config),
        )?;
    }
    Ok(outcome)
}

pub fn exact(args: &ExactArgs) -> Result<Outcome> {
    let bytes = read_input(&args.problem)?;
    let problem = load_problem(&bytes)?;
    let result = exact_blackwell_with_budget(&problem, args.budget).map_err(|e| match e {
        BlackwellError::Budget { .. } => CliError::Size(format!(
            "{e}; try `rb point <problem> --rate 0`"
        )),
        other => CliError::Validation(other.to_string()),
    })?;
    let rows = |m: &ndarray::Array2<f64>| -> Vec<Vec<f64>> {
        m.rows().into_iter().map(|r| r.to_vec()).collect()
    };
    let garblings: Vec<_> = problem
        .sources()
        .iter()
        .zip(&result.garblings)
        .map(|(src, k)| json!({ "source": src.name, "labels": src.labels, "kappa": rows(k) }))
        .collect();
    let mut body = serde_json::to_string_pretty(&json!({
        "blackwell_redundancy_bits": result.value_bits,
        "blackwell_redundancy_nats": result.value,
        "vertices_examined": result.vertices_examined,
        "witness": {
            "q_given_y": rows(&result.witness),
            "garblings": garblings,
        },
    }))
    .expect("json");
    body.push('\n');
    emit(args.out.as_deref(), body.as_bytes())?;
    Ok(Outcome::Done)
}
