//! Sweep execution and the results CSV.
//!
//! Every `(sweep point, repetition)` pair owns one instance seed, derived from
//! the experiment seed, and all methods are scored on that same instance.
//! Runs execute in parallel; rows are assembled afterwards in
//! `(method, sweep point, repetition)` order, each group followed by its
//! `mean` and `std` rows.
//!
//! Results CSV columns:
//!
//! | column | meaning |
//! |---|---|
//! | `kind` | `run`, `mean` or `std` |
//! | `method`, `loss` | method family and loss name |
//! | `sigma`, `outlier_fraction` | sweep coordinates (the unswept one is 0) |
//! | `seed` | instance seed, empty on aggregate rows |
//! | `hamming_error` | `||w* - w||_1 / (2n)`, empty without a ground truth |
//! | `nrmse` | test-set `||u - X w|| / ||u||` |
//! | `wall_time` | seconds |
//! | `converged` | 1 or 0 per run, the fraction on aggregate rows |
//! | `iters` | iterations used |
//! | `error` | failure message, empty on success |

use std::path::{Path, PathBuf};
use std::time::Instant;

use maximin::data::{
    derive_seed, generate, load_table, split_and_corrupt, GeneratorSpec, Noise, SplitOptions, TableOptions,
};
use maximin::linalg::binarize;
use maximin::{baselines, optimizers, Error as CoreError, LossModel};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Family, LossName, MethodSpec, SweepKind};
use crate::error::Result;
use crate::histogram::{write_trace_file, TraceRow};
use crate::metrics::{hamming_error, mean_std, nrmse};

/// Environment variable that redirects results and traces to another directory.
pub const OUTPUT_DIR_ENV: &str = "MAXIMIN_OUTPUT_DIR";

pub const HEADER: [&str; 12] = [
    "kind",
    "method",
    "loss",
    "sigma",
    "outlier_fraction",
    "seed",
    "hamming_error",
    "nrmse",
    "wall_time",
    "converged",
    "iters",
    "error",
];

/// Where inputs are read from and outputs are written to.
#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub base_dir: PathBuf,
    pub output_dir: Option<PathBuf>,
}

impl Paths {
    /// Base directory of `config_path`, with the output override taken from
    /// the environment.
    pub fn for_config(config_path: &Path) -> Self {
        let base_dir = config_path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        let output_dir = std::env::var_os(OUTPUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from);
        Paths { base_dir, output_dir }
    }

    pub fn input(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    fn output(&self, p: &Path) -> PathBuf {
        match &self.output_dir {
            Some(dir) => dir.join(p.file_name().unwrap_or(p.as_os_str())),
            None => self.base_dir.join(p),
        }
    }

    pub fn results_file(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.output(&cfg.experiment.output)
    }

    pub fn trace_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.output(&cfg.experiment.trace_dir)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Run,
    Mean,
    Std,
}

impl RowKind {
    pub fn name(&self) -> &'static str {
        match self {
            RowKind::Run => "run",
            RowKind::Mean => "mean",
            RowKind::Std => "std",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub kind: RowKind,
    pub method: String,
    pub loss: String,
    pub sigma: f64,
    pub outlier_fraction: f64,
    pub seed: Option<u64>,
    pub hamming_error: Option<f64>,
    pub nrmse: Option<f64>,
    pub wall_time: f64,
    pub converged: f64,
    pub iters: f64,
    pub error: String,
}

struct Problem {
    x: DMatrix<f64>,
    y: DVector<f64>,
    x_test: DMatrix<f64>,
    u_test: DVector<f64>,
    w_star: Option<DVector<f64>>,
    seed: u64,
    sigma: f64,
    outlier_fraction: f64,
}

struct Outcome {
    w: DVector<f64>,
    converged: bool,
    iters: usize,
    note: String,
    trace: Option<Vec<optimizers::TraceEntry>>,
}

/// Seed of the instance at sweep point `point`, repetition `rep`.
pub fn instance_seed(base: u64, point: usize, rep: usize) -> u64 {
    derive_seed(derive_seed(base, point as u64), rep as u64)
}

fn build_problems(cfg: &ExperimentConfig, paths: &Paths) -> Result<Vec<Problem>> {
    let exp = &cfg.experiment;
    let coords = |v: f64| match exp.sweep {
        SweepKind::Sigma => (v, 0.0),
        SweepKind::OutlierFraction => (0.0, v),
    };
    let mut keys = Vec::new();
    for (p, &v) in exp.values.iter().enumerate() {
        for r in 0..exp.repetitions {
            keys.push((v, instance_seed(exp.seed, p, r)));
        }
    }
    if let Some(g) = &cfg.generator {
        keys.into_par_iter()
            .map(|(v, seed)| {
                let noise = cfg.generator_noise(v)?;
                let inst = generate(&GeneratorSpec {
                    m: g.m,
                    n: g.n,
                    x_scale: cfg.x_scale(),
                    noise,
                    seed,
                })?;
                let test = generate(&GeneratorSpec {
                    m: g.test_samples,
                    n: g.n,
                    x_scale: cfg.x_scale(),
                    noise: Noise::Gaussian { sigma: 0.0 },
                    seed: derive_seed(seed, 2),
                })?;
                let w_star = inst.truth.w_star;
                let u_test = &test.x * &w_star;
                let (sigma, outlier_fraction) = coords(v);
                Ok(Problem {
                    x: inst.x,
                    y: inst.y,
                    x_test: test.x,
                    u_test,
                    w_star: Some(w_star),
                    seed,
                    sigma,
                    outlier_fraction,
                })
            })
            .collect()
    } else {
        let d = cfg.dataset.as_ref().expect("validated config has a data source");
        let opts = TableOptions {
            target: cfg.target_column()?,
            header: d.header,
        };
        let table = load_table(paths.input(&d.path), &opts)?;
        keys.into_par_iter()
            .map(|(v, seed)| {
                let s = split_and_corrupt(
                    &table.x,
                    &table.y,
                    &SplitOptions {
                        train_frac: d.train_frac,
                        outlier_frac: v,
                        magnitude: cfg.magnitude_rule(),
                        normalize: d.normalize,
                        bias: d.bias,
                        seed,
                    },
                )?;
                let (sigma, outlier_fraction) = coords(v);
                Ok(Problem {
                    x: s.x_train,
                    y: s.y_train,
                    x_test: s.x_test,
                    u_test: s.y_test,
                    w_star: None,
                    seed,
                    sigma,
                    outlier_fraction,
                })
            })
            .collect()
    }
}

fn solve_one(cfg: &ExperimentConfig, spec: MethodSpec, p: &Problem) -> std::result::Result<Outcome, CoreError> {
    let y = match spec.loss {
        LossName::Ce => p.y.map(|v| if v > 0.0 { 1.0 } else { 0.0 }),
        _ => p.y.clone(),
    };
    let model = LossModel::new(spec.loss.kind(cfg.methods.huber_delta), p.x.clone(), y)?;
    let from_baseline = |r: baselines::BaselineResult| Outcome {
        w: r.w_binary,
        converged: r.converged,
        iters: r.iters,
        note: String::new(),
        trace: None,
    };
    let init_seed = derive_seed(p.seed, 1);
    match spec.family {
        Family::Maximin => {
            let sc = cfg
                .solve_config(init_seed)
                .map_err(|e| CoreError::InvalidParameter(e.to_string()))?;
            match optimizers::solve(&model, &sc, None) {
                Ok(r) => Ok(Outcome {
                    w: r.w_binary,
                    converged: r.converged,
                    iters: r.iters,
                    note: String::new(),
                    trace: r.trace,
                }),
                Err(CoreError::Diverged { iter, last }) => Ok(Outcome {
                    w: binarize(&last.w),
                    converged: false,
                    iters: iter,
                    note: format!("diverged at iteration {iter}; last finite iterate binarized"),
                    trace: None,
                }),
                Err(e) => Err(e),
            }
        }
        Family::Lr => Ok(from_baseline(baselines::lr_round(&model))),
        Family::Lpr => Ok(from_baseline(baselines::lpr(&model, &cfg.lpr_config()))),
        Family::Ste => baselines::ste(&model, &cfg.ste_config(init_seed), None).map(from_baseline),
        Family::Sdr => baselines::sdr(&model, &cfg.sdr_config(derive_seed(p.seed, 3))).map(from_baseline),
    }
}

fn trace_name(spec: MethodSpec, point: usize, rep: usize) -> String {
    format!("trace_{}-{}_p{point}_r{rep}.csv", spec.family.name(), spec.loss.name())
}

fn run_one(cfg: &ExperimentConfig, spec: MethodSpec, p: &Problem, trace_path: Option<PathBuf>) -> MetricRow {
    let start = Instant::now();
    let outcome = solve_one(cfg, spec, p);
    let wall_time = start.elapsed().as_secs_f64();
    let mut row = MetricRow {
        kind: RowKind::Run,
        method: spec.family.name().to_string(),
        loss: spec.loss.name().to_string(),
        sigma: p.sigma,
        outlier_fraction: p.outlier_fraction,
        seed: Some(p.seed),
        hamming_error: None,
        nrmse: None,
        wall_time,
        converged: 0.0,
        iters: 0.0,
        error: String::new(),
    };
    match outcome {
        Ok(o) => {
            row.hamming_error = p.w_star.as_ref().map(|ws| hamming_error(ws, &o.w));
            row.nrmse = Some(nrmse(&p.u_test, &(&p.x_test * &o.w)));
            row.converged = if o.converged { 1.0 } else { 0.0 };
            row.iters = o.iters as f64;
            row.error = o.note;
            if let (Some(path), Some(trace)) = (trace_path, o.trace) {
                let rows: Vec<TraceRow> = trace.iter().map(TraceRow::from).collect();
                if let Err(e) = write_trace_file(&path, &rows) {
                    row.error = format!("trace not written: {e}");
                }
            }
        }
        Err(e) => row.error = e.to_string(),
    }
    row
}

fn aggregate(group: &[MetricRow]) -> [MetricRow; 2] {
    let first = &group[0];
    let stat = |f: &dyn Fn(&MetricRow) -> Option<f64>| mean_std(group.iter().filter_map(f));
    let h = stat(&|r| r.hamming_error);
    let e = stat(&|r| r.nrmse);
    let t = stat(&|r| Some(r.wall_time)).unwrap_or((0.0, 0.0));
    let c = stat(&|r| Some(r.converged)).unwrap_or((0.0, 0.0));
    let i = stat(&|r| Some(r.iters)).unwrap_or((0.0, 0.0));
    let failures = group.iter().filter(|r| r.hamming_error.is_none() && r.nrmse.is_none()).count();
    let make = |kind, pick: fn((f64, f64)) -> f64| MetricRow {
        kind,
        method: first.method.clone(),
        loss: first.loss.clone(),
        sigma: first.sigma,
        outlier_fraction: first.outlier_fraction,
        seed: None,
        hamming_error: h.map(pick),
        nrmse: e.map(pick),
        wall_time: pick(t),
        converged: pick(c),
        iters: pick(i),
        error: if failures > 0 {
            format!("{failures} of {} runs failed", group.len())
        } else {
            String::new()
        },
    };
    [make(RowKind::Mean, |s| s.0), make(RowKind::Std, |s| s.1)]
}

/// Run every `(method, sweep point, repetition)` and return the rows in
/// output order. Traces of maximin runs are written when `trace_every > 0`.
///
/// Only data-source failures abort; solver failures become rows.
pub fn run_experiment(cfg: &ExperimentConfig, paths: &Paths) -> Result<Vec<MetricRow>> {
    cfg.validate()?;
    execute(cfg, paths)
}

fn execute(cfg: &ExperimentConfig, paths: &Paths) -> Result<Vec<MetricRow>> {
    let specs = cfg.method_specs()?;
    let problems = build_problems(cfg, paths)?;
    let reps = cfg.experiment.repetitions;
    let trace_dir = (cfg.experiment.trace_every > 0).then(|| paths.trace_dir(cfg));
    if let Some(dir) = &trace_dir {
        std::fs::create_dir_all(dir)?;
    }
    let tasks: Vec<(MethodSpec, usize)> = specs
        .iter()
        .flat_map(|&s| (0..problems.len()).map(move |k| (s, k)))
        .collect();
    let runs: Vec<MetricRow> = tasks
        .par_iter()
        .map(|&(spec, k)| {
            let trace_path = trace_dir
                .as_ref()
                .filter(|_| spec.family == Family::Maximin)
                .map(|d| d.join(trace_name(spec, k / reps, k % reps)));
            run_one(cfg, spec, &problems[k], trace_path)
        })
        .collect();
    let mut rows = Vec::with_capacity(runs.len() + 2 * runs.len() / reps);
    for group in runs.chunks(reps) {
        rows.extend_from_slice(group);
        rows.extend(aggregate(group));
    }
    Ok(rows)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn write_csv<W: std::io::Write>(out: W, rows: &[MetricRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(HEADER)?;
    for r in rows {
        wtr.write_record([
            r.kind.name().to_string(),
            r.method.clone(),
            r.loss.clone(),
            r.sigma.to_string(),
            r.outlier_fraction.to_string(),
            r.seed.map_or_else(String::new, |s| s.to_string()),
            fmt_opt(r.hamming_error),
            fmt_opt(r.nrmse),
            format!("{:.6}", r.wall_time),
            r.converged.to_string(),
            r.iters.to_string(),
            r.error.clone(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[MetricRow]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is UTF-8")
}

/// The CSV text with the `wall_time` column removed, for determinism checks.
pub fn without_wall_time(csv_text: &str) -> String {
    let col = HEADER.iter().position(|&h| h == "wall_time").expect("wall_time column");
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(csv_text.as_bytes());
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for rec in rdr.records() {
        let rec = rec.expect("well-formed csv");
        let kept: Vec<&str> = rec.iter().enumerate().filter(|&(j, _)| j != col).map(|(_, f)| f).collect();
        wtr.write_record(kept).expect("writing to memory cannot fail");
    }
    String::from_utf8(wtr.into_inner().expect("flush")).expect("csv output is UTF-8")
}

/// One line per `(method, sweep point)` with mean hamming error and NRMSE.
pub fn summarize(rows: &[MetricRow]) -> String {
    let mut out = format!(
        "{:<14} {:>8} {:>8} {:>10} {:>10} {:>6}\n",
        "method", "sigma", "outliers", "hamming", "nrmse", "conv"
    );
    for r in rows.iter().filter(|r| r.kind == RowKind::Mean) {
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        out.push_str(&format!(
            "{:<14} {:>8} {:>8} {:>10} {:>10} {:>6.2}\n",
            format!("{}:{}", r.method, r.loss),
            r.sigma,
            r.outlier_fraction,
            cell(r.hamming_error),
            cell(r.nrmse),
            r.converged
        ));
    }
    out
}
