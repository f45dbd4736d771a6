use std::path::Path;

use mpsvt_cli::experiment::{run_experiment, sibling_path, ExperimentKind, ExperimentSpec, ROW_COLUMNS};
use mpsvt_core::svt::{BackendKind, InitMode, Y0Mode};
use mpsvt_core::SvtConfig;

fn spec(kind: ExperimentKind, sizes: Vec<usize>, out: &Path) -> ExperimentSpec {
    ExperimentSpec {
        kind,
        sizes,
        width: 2,
        instances: 1,
        realizations: 1,
        noise: None,
        config: SvtConfig::default(),
        seed: 3,
        out: out.to_path_buf(),
        record: None,
        target: None,
        workers: 2,
    }
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn w_state_rows_follow_the_checkpoint_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.csv");
    let s = ExperimentSpec {
        noise: Some(0.0),
        config: SvtConfig {
            n_max: 40,
            checkpoint_stride: 4,
            y0: Y0Mode::Record,
            init: InitMode::Target,
            ..SvtConfig::default()
        },
        ..spec(ExperimentKind::WState, (4..=8).collect(), &out)
    };
    run_experiment(&s).unwrap();
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ROW_COLUMNS);
    assert_eq!(rows.len(), 5 * 10);
    assert!(rows.iter().all(|r| !r[8].is_empty()));
    let (_, best) = read_csv(&sibling_path(&out, "best"));
    assert_eq!(best.len(), 5);
}

#[test]
fn reruns_are_identical_except_timing() {
    let dir = tempfile::tempdir().unwrap();
    let strip = |p: &Path| -> Vec<Vec<String>> {
        let (_, rows) = read_csv(p);
        rows.into_iter().map(|mut r| {
            r.pop();
            r
        }).collect()
    };
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}.csv"));
        let s = ExperimentSpec {
            instances: 3,
            config: SvtConfig {
                n_max: 5,
                ..SvtConfig::default()
            },
            workers: 1 + k,
            ..spec(ExperimentKind::Random, vec![5], &out)
        };
        run_experiment(&s).unwrap();
        outputs.push((strip(&out), strip(&sibling_path(&out, "best"))));
    }
    assert_eq!(outputs[0], outputs[1]);
    let seeds: Vec<&str> = outputs[0].1.iter().map(|r| r[9].as_str()).collect();
    assert_eq!(seeds, ["3", "4", "5"]);
}

#[test]
fn summary_matches_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("random.csv");
    let s = ExperimentSpec {
        instances: 100,
        config: SvtConfig {
            backend: BackendKind::Dense,
            n_max: 5,
            ..SvtConfig::default()
        },
        ..spec(ExperimentKind::Random, vec![6], &out)
    };
    run_experiment(&s).unwrap();
    let (_, rows) = read_csv(&out);
    let (_, best) = read_csv(&sibling_path(&out, "best"));
    let (header, summary) = read_csv(&sibling_path(&out, "summary"));
    assert_eq!(summary.len(), 1);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let get = |name: &str| summary[0][col(name)].parse::<f64>().unwrap();

    let final_f: Vec<f64> = rows.iter().filter(|r| r[5] == "5").map(|r| r[8].parse().unwrap()).collect();
    assert_eq!(final_f.len(), 100);
    let mean = final_f.iter().sum::<f64>() / 100.0;
    let sq: Vec<f64> = final_f.iter().map(|f| (1.0 - f).max(0.0).sqrt()).collect();
    let mean_sq = sq.iter().sum::<f64>() / 100.0;
    assert!((get("final_mean_f") - mean).abs() <= 1e-12);
    assert!((get("final_mean_sqrt_1mf") - mean_sq).abs() <= 1e-12);
    assert!(mean_sq.is_finite() && mean_sq <= 1.0);
    let mut sorted = final_f.clone();
    sorted.sort_by(f64::total_cmp);
    assert!((get("final_median_f") - 0.5 * (sorted[49] + sorted[50])).abs() <= 1e-12);

    let best_f: Vec<f64> = best.iter().map(|r| r[7].parse().unwrap()).collect();
    let best_mean = best_f.iter().sum::<f64>() / 100.0;
    assert!((get("best_mean_f") - best_mean).abs() <= 1e-12);
}

#[test]
fn invalid_specs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    assert!(run_experiment(&spec(ExperimentKind::Ising, vec![], &out)).is_err());
    assert!(run_experiment(&ExperimentSpec {
        width: 5,
        ..spec(ExperimentKind::Ising, vec![4], &out)
    })
    .is_err());
    assert!(run_experiment(&spec(ExperimentKind::Custom, vec![], &out)).is_err());
    let unwritable = spec(ExperimentKind::Oracle, vec![4], &dir.path().join("missing/dir/x.csv"));
    assert!(run_experiment(&ExperimentSpec {
        config: SvtConfig {
            n_max: 2,
            ..SvtConfig::default()
        },
        ..unwritable
    })
    .is_err());
}
