//! Command-line front end. [`run`] is the whole program minus process exit,
//! so tests can drive it in-process.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::equivalence::t2_slln_hypothesis;
use crate::error::{Error, Result};
use crate::experiment::{run_experiment, run_named_example, ExampleOverrides, ExperimentConfig};
use crate::frechet::frechet_mean;
use crate::ldp::{rate_function, tail_decay_diagnostic};
use crate::limits::{detect_convergence, kuratowski_limits, DetectorOptions, Mode};
use crate::measure::{DiscreteMeasure, MeasureSpec};
use crate::metric::{build_space, validate_metric, MetricSpace, SpaceSpec};
use crate::pointset::PointSet;
use crate::SCHEMA_VERSION;

#[derive(Debug, Parser)]
#[command(name = "frechet-sets", version, about = "Set-valued Fréchet means on finite metric spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct SpaceMeasure {
    /// Space JSON (path, or inline JSON starting with `{`). Optional when the
    /// measure file embeds its space.
    #[arg(long)]
    space: Option<String>,
    /// Measure JSON (path or inline).
    #[arg(long)]
    measure: String,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a distance matrix against the metric axioms.
    Validate {
        #[arg(long)]
        space: String,
    },
    /// Fréchet p-mean over the whole space, the support, or a candidate set.
    Mean {
        #[command(flatten)]
        sm: SpaceMeasure,
        #[arg(long)]
        restricted: bool,
        /// Comma-separated candidate point indices.
        #[arg(long, value_delimiter = ',')]
        candidate: Option<Vec<usize>>,
    },
    /// Restricted Fréchet p-mean (p-medoid).
    Medoid {
        #[command(flatten)]
        sm: SpaceMeasure,
    },
    /// Equivalence classes and the single-class hypothesis.
    Equiv {
        #[command(flatten)]
        sm: SpaceMeasure,
        #[arg(long)]
        restricted: bool,
    },
    /// Limit estimates and convergence detectors for a JSON array of sets.
    Limits {
        /// File with a JSON array of index arrays; `-` for stdin.
        #[arg(long)]
        input: String,
        #[arg(long)]
        space: Option<String>,
        #[arg(long, value_delimiter = ',')]
        target: Option<Vec<usize>>,
        /// Detector modes (K_plus, K_minus, H_plus, H, K); default all usable.
        #[arg(long, value_delimiter = ',')]
        mode: Option<Vec<Mode>>,
        #[arg(long)]
        tail_start: Option<usize>,
        #[arg(long, default_value_t = crate::limits::DEFAULT_RECURRENCE)]
        recurrence: usize,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Replicated trajectory experiment from a JSON config.
    Simulate {
        #[arg(long)]
        config: String,
        /// Write the long-format trajectory table here.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Grid upper bound on the rate function of a set.
    Ldp {
        #[command(flatten)]
        sm: SpaceMeasure,
        #[arg(long, value_delimiter = ',')]
        set: Vec<usize>,
        #[arg(long, default_value_t = 40)]
        resolution: usize,
    },
    /// Monte Carlo tail probabilities of the empirical mean set.
    Decay {
        #[command(flatten)]
        sm: SpaceMeasure,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, value_delimiter = ',')]
        n_grid: Vec<usize>,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        /// Emit the JSON report instead of CSV.
        #[arg(long)]
        json: bool,
    },
    /// Run a preset example (ex5_1, ex5_2_p1, ex5_2_p2, ex5_3).
    Example {
        name: String,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long = "N")]
        big_n: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tie_reps: Option<usize>,
        #[arg(long)]
        tie_n: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// Inline JSON when the argument starts with `{` or `[`, a file path otherwise.
fn read_source(src: &str) -> Result<Value> {
    let text = if src.trim_start().starts_with(['{', '[']) {
        src.to_owned()
    } else {
        std::fs::read_to_string(src)?
    };
    Ok(serde_json::from_str(&text)?)
}

fn space_from_value(v: Value) -> Result<MetricSpace> {
    let spec: SpaceSpec = match v {
        Value::String(path) => serde_json::from_value(read_source(&path)?)?,
        other => serde_json::from_value(other)?,
    };
    build_space(&spec)
}

fn load_space_measure(sm: &SpaceMeasure) -> Result<DiscreteMeasure> {
    let mut mv = read_source(&sm.measure)?;
    let embedded = mv.as_object_mut().and_then(|o| o.remove("space"));
    let space = match (&sm.space, embedded) {
        (Some(s), _) => space_from_value(read_source(s)?)?,
        (None, Some(v)) => space_from_value(v)?,
        (None, None) => return Err(Error::Usage("no --space given and the measure names none".into())),
    };
    let spec: MeasureSpec = serde_json::from_value(mv)?;
    spec.resolve(Arc::new(space))
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn with_schema<T: Serialize>(value: &T) -> Result<Value> {
    let mut v = serde_json::to_value(value)?;
    if let Value::Object(o) = &mut v {
        o.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    Ok(v)
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code: 0 success, 1 domain error, 2 usage error.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Usage(_) | Error::Json(_) => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Validate { space } => {
            let v = read_source(&space)?;
            let spec: SpaceSpec = serde_json::from_value(v)?;
            let matrix = match &spec {
                SpaceSpec::Explicit { dist, .. } => dist.clone(),
                generated => build_space(generated)?.matrix(),
            };
            let violations = validate_metric(&matrix)?;
            let ok = violations.is_empty();
            emit(out, &json!({ "schema_version": SCHEMA_VERSION, "valid": ok, "violations": violations }))?;
            Ok(if ok { 0 } else { 1 })
        }
        Command::Mean { sm, restricted, candidate } => {
            let mu = load_space_measure(&sm)?;
            let cand = match (candidate, restricted) {
                (Some(c), _) => PointSet::new(c),
                (None, true) => mu.support(),
                (None, false) => PointSet::full(mu.space().len()),
            };
            let res = frechet_mean(&mu, &cand, sm.p)?;
            let mut v = with_schema(&res)?;
            v["restricted"] = json!(restricted);
            emit(out, &v)?;
            Ok(0)
        }
        Command::Medoid { sm } => {
            let mu = load_space_measure(&sm)?;
            let res = crate::frechet::medoid(&mu, sm.p)?;
            let mut v = with_schema(&res)?;
            v["restricted"] = json!(true);
            emit(out, &v)?;
            Ok(0)
        }
        Command::Equiv { sm, restricted } => {
            let mu = load_space_measure(&sm)?;
            emit(out, &with_schema(&t2_slln_hypothesis(&mu, sm.p, restricted)?)?)?;
            Ok(0)
        }
        Command::Limits { input, space, target, mode, tail_start, recurrence, tolerance } => {
            let seq: Vec<PointSet> = serde_json::from_value(read_source(&input_text(&input)?)?)?;
            let space = space.map(|s| space_from_value(read_source(&s)?)).transpose()?;
            let mut opts = match &space {
                Some(s) => DetectorOptions::for_space(s),
                None => DetectorOptions::default(),
            };
            opts.tail_start = tail_start;
            opts.recurrence = recurrence;
            if let Some(t) = tolerance {
                opts.tolerance = t;
            }
            if seq.is_empty() {
                return Err(Error::InvalidParameter("sequence is empty".into()));
            }
            let estimate = kuratowski_limits(&seq, opts.tail_start_for(seq.len()), recurrence)?;
            let mut detectors = Vec::new();
            if let Some(t) = target {
                let target = PointSet::new(t);
                let modes = mode.unwrap_or_else(|| {
                    Mode::ALL.into_iter().filter(|m| space.is_some() || !m.needs_metric()).collect()
                });
                for m in modes {
                    detectors.push(detect_convergence(space.as_ref(), &seq, &target, m, &opts)?);
                }
            }
            emit(
                out,
                &json!({
                    "schema_version": SCHEMA_VERSION,
                    "estimate": estimate,
                    "options": opts,
                    "detectors": detectors,
                }),
            )?;
            Ok(0)
        }
        Command::Simulate { config, csv, threads } => {
            let cfg: ExperimentConfig = serde_json::from_value(read_source(&config)?)?;
            let csv_path = csv.or_else(|| cfg.output.csv.clone().map(PathBuf::from));
            let (report, table) = run_experiment(&cfg, threads, csv_path.is_some())?;
            if let (Some(path), Some(table)) = (csv_path, table) {
                std::fs::write(path, table)?;
            }
            if let Some(path) = &cfg.output.json {
                std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
            }
            emit(out, &report)?;
            Ok(0)
        }
        Command::Ldp { sm, set, resolution } => {
            let mu = load_space_measure(&sm)?;
            let res = rate_function(&PointSet::new(set), &mu, sm.p, resolution)?;
            emit(out, &with_schema(&res)?)?;
            Ok(0)
        }
        Command::Decay { sm, epsilon, n_grid, reps, seed, threads, json } => {
            let mu = load_space_measure(&sm)?;
            let rep = tail_decay_diagnostic(&mu, sm.p, epsilon, &n_grid, reps, seed, threads)?;
            if json {
                emit(out, &with_schema(&rep)?)?;
            } else {
                out.write_all(rep.to_csv().as_bytes())?;
            }
            Ok(0)
        }
        Command::Example { name, m, big_n, p, n_max, reps, seed, tie_reps, tie_n, threads, csv } => {
            let o = ExampleOverrides { m, big_n, p, n_max, reps, seed, tie_reps, tie_n };
            let report = run_named_example(&name, &o, threads)?;
            if let Some(path) = csv {
                let (_, table) = run_experiment(&report.report.config, threads, true)?;
                std::fs::write(path, table.unwrap_or_default())?;
            }
            emit(out, &report)?;
            Ok(0)
        }
    }
}

fn input_text(input: &str) -> Result<String> {
    if input == "-" {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s)?;
        Ok(s)
    } else {
        Ok(input.to_owned())
    }
}
