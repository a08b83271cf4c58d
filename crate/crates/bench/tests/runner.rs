use std::path::PathBuf;

use maximin::data::{generate, GeneratorSpec, Noise, XScale};
use maximin::optimizers::{solve, SolveConfig};
use maximin::LossModel;
use maximin_bench::histogram::{bin_index, read_trace_file, trace_histogram, TraceRow, DEFAULT_BINS};
use maximin_bench::runner::{to_csv_string, without_wall_time};
use maximin_bench::{run_experiment, ExperimentConfig, Paths, RowKind};
use proptest::prelude::*;

fn config(body: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(body).unwrap()
}

fn here() -> Paths {
    Paths {
        base_dir: PathBuf::from("."),
        output_dir: None,
    }
}

const NOISELESS: &str = r#"
    [experiment]
    repetitions = 10
    seed = 1
    values = [0.0]
    [generator]
    m = 60
    n = 30
    [methods]
    list = ["maximin:l2"]
"#;

#[test]
fn noiseless_runs_recover_exactly() {
    let rows = run_experiment(&config(NOISELESS), &here()).unwrap();
    let runs: Vec<_> = rows.iter().filter(|r| r.kind == RowKind::Run).collect();
    assert_eq!(runs.len(), 10);
    assert!(runs.iter().all(|r| r.hamming_error == Some(0.0) && r.converged == 1.0));
    assert!(runs.iter().all(|r| r.nrmse == Some(0.0)));
    let mean = rows.iter().find(|r| r.kind == RowKind::Mean).unwrap();
    assert_eq!(mean.hamming_error, Some(0.0));
    assert_eq!(mean.converged, 1.0);
}

#[test]
fn csv_is_reproducible_and_seed_sensitive() {
    let text = NOISELESS
        .replace("values = [0.0]", "values = [0.2]")
        .replace("list = [\"maximin:l2\"]", "list = [\"maximin:l2\", \"ste:l2\", \"sdr:l2\"]")
        .replace("repetitions = 10", "repetitions = 3");
    let a = to_csv_string(&run_experiment(&config(&text), &here()).unwrap());
    let b = to_csv_string(&run_experiment(&config(&text), &here()).unwrap());
    assert_eq!(without_wall_time(&a), without_wall_time(&b));
    let other = text.replace("seed = 1", "seed = 2");
    let c = to_csv_string(&run_experiment(&config(&other), &here()).unwrap());
    assert_ne!(without_wall_time(&a), without_wall_time(&c));
}

#[test]
fn diverging_solver_yields_unconverged_rows() {
    let text = format!("{NOISELESS}\n[solver]\neta = 50.0\n").replace("repetitions = 10", "repetitions = 2");
    let rows = run_experiment(&config(&text), &here()).unwrap();
    for r in rows.iter().filter(|r| r.kind == RowKind::Run) {
        assert_eq!(r.converged, 0.0);
        assert!(r.error.contains("diverged"), "{}", r.error);
        assert!(r.hamming_error.is_some());
    }
}

#[test]
fn dataset_experiment_reports_nrmse_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("a,b,c,y\n");
    for i in 0..40 {
        let (a, b, c) = (i as f64 * 0.1, ((i * 7) % 11) as f64, ((i * 3) % 5) as f64 - 2.0);
        csv.push_str(&format!("{a},{b},{c},{}\n", a - 0.5 * b + c));
    }
    std::fs::write(dir.path().join("t.csv"), csv).unwrap();
    let cfg = config(
        r#"
        [experiment]
        repetitions = 3
        sweep = "outlier-fraction"
        values = [0.0, 0.25]
        [dataset]
        path = "t.csv"
        header = true
        target = "y"
        [methods]
        list = ["maximin:huber", "lr:l2"]
        "#,
    );
    let paths = Paths {
        base_dir: dir.path().to_path_buf(),
        output_dir: None,
    };
    let rows = run_experiment(&cfg, &paths).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 5);
    for r in &rows {
        assert!(r.hamming_error.is_none());
        assert!(r.nrmse.unwrap().is_finite());
        assert_eq!(r.sigma, 0.0);
    }
    assert_eq!(rows[5].outlier_fraction, 0.25);

    let missing = Paths {
        base_dir: dir.path().join("nowhere"),
        output_dir: None,
    };
    assert!(run_experiment(&cfg, &missing).is_err());
}

#[test]
fn output_override_keeps_file_names() {
    let cfg = config(&NOISELESS.replace("repetitions = 10", "output = \"deep/res.csv\"\nrepetitions = 1"));
    let p = Paths {
        base_dir: PathBuf::from("/cfg"),
        output_dir: Some(PathBuf::from("/elsewhere")),
    };
    assert_eq!(p.results_file(&cfg), PathBuf::from("/elsewhere/res.csv"));
    assert_eq!(p.trace_dir(&cfg), PathBuf::from("/elsewhere/traces"));
    let p = Paths {
        output_dir: None,
        ..p
    };
    assert_eq!(p.results_file(&cfg), PathBuf::from("/cfg/deep/res.csv"));
}

fn traced_run() -> Vec<TraceRow> {
    let inst = generate(&GeneratorSpec {
        m: 60,
        n: 30,
        x_scale: XScale::InvN,
        noise: Noise::Gaussian { sigma: 0.0 },
        seed: 4,
    })
    .unwrap();
    let model = LossModel::squared(inst.x, inst.y).unwrap();
    let cfg = SolveConfig {
        trace_every: 1,
        seed: 4,
        ..SolveConfig::default()
    };
    let r = solve(&model, &cfg, None).unwrap();
    assert!(r.converged);
    let rows: Vec<TraceRow> = r.trace.unwrap().iter().map(TraceRow::from).collect();
    assert_eq!(rows.last().unwrap().iter, r.iters);
    rows
}

#[test]
fn converged_trace_ends_bimodal() {
    let rows = traced_run();
    let h = trace_histogram(&rows, DEFAULT_BINS).unwrap();
    let (plus, minus) = (bin_index(1.0, DEFAULT_BINS), bin_index(-1.0, DEFAULT_BINS));
    let last = &h.rows.last().unwrap().1;
    let at_signs = last[plus] + last[minus];
    assert!(at_signs as f64 >= 0.99 * 30.0, "{last:?}");

    let first = &h.rows[0].1;
    let lo = bin_index(-1.0, DEFAULT_BINS);
    let hi = bin_index(1.0, DEFAULT_BINS);
    assert!(first.iter().enumerate().all(|(k, &c)| c == 0 || (lo..=hi).contains(&k)));
    assert!(first.iter().filter(|&&c| c > 0).count() >= 10);

    for (_, counts) in &h.rows {
        assert_eq!(counts.iter().sum::<usize>(), 30);
    }
}

#[test]
fn traces_written_by_runner_can_be_histogrammed() {
    let dir = tempfile::tempdir().unwrap();
    let text = NOISELESS.replace("repetitions = 10", "repetitions = 2\ntrace_every = 25\ntrace_dir = \"tr\"");
    let paths = Paths {
        base_dir: dir.path().to_path_buf(),
        output_dir: None,
    };
    run_experiment(&config(&text), &paths).unwrap();
    let mut files: Vec<_> = std::fs::read_dir(dir.path().join("tr")).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert_eq!(files.len(), 2);
    let rows = read_trace_file(&files[0]).unwrap();
    assert!(rows.len() > 1);
    assert_eq!(rows[0].iter, 0);
    assert!(rows[..rows.len() - 1].windows(2).all(|w| w[1].iter - w[0].iter == 25));
    let h = trace_histogram(&rows, 17).unwrap();
    assert!(h.rows.iter().all(|(_, c)| c.iter().sum::<usize>() == 30));
}

proptest! {
    #[test]
    fn histogram_rows_conserve_weights(
        w in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 7), 1..6),
        bins in 1usize..60,
    ) {
        let rows: Vec<TraceRow> = w
            .into_iter()
            .enumerate()
            .map(|(i, w)| TraceRow { iter: i, lagrangian: 0.0, w })
            .collect();
        let h = trace_histogram(&rows, bins).unwrap();
        prop_assert_eq!(h.edges.len(), bins + 1);
        for (_, c) in &h.rows {
            prop_assert_eq!(c.len(), bins);
            prop_assert_eq!(c.iter().sum::<usize>(), 7);
        }
    }

    #[test]
    fn bin_index_is_monotone(a in -3.0f64..3.0, b in -3.0f64..3.0, bins in 1usize..100) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(bin_index(lo, bins) <= bin_index(hi, bins));
        prop_assert!(bin_index(hi, bins) < bins);
    }
}
