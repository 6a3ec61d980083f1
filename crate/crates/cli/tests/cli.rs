//! End-to-end runs of the `cachesim` binary and library entry points.

use std::path::Path;
use std::process::Command;

use cachesim::config::ExperimentConfig;
use cachesim::experiments::SWEEP_HEADER;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cachesim"))
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn header(csv: &str) -> Vec<String> {
    csv.lines()
        .find(|l| !l.starts_with('#'))
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect()
}

/// Every cell except the wall-time column.
fn numeric_cells(csv: &str) -> Vec<Vec<String>> {
    let h = header(csv);
    let keep: Vec<usize> = (0..h.len()).filter(|&i| h[i] != "wall_time_s").collect();
    data_rows(csv)
        .into_iter()
        .map(|r| keep.iter().map(|&i| r[i].clone()).collect())
        .collect()
}

#[test]
fn empty_config_runs_analyze_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.cfg");
    std::fs::write(&cfg, "").unwrap();
    let out = dir.path().join("a.csv");
    let status = bin()
        .args(["analyze", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("# mode=analyze"));
    assert!(text.contains("# network.lambda_p_per_km2=10.0"));
    assert!(text.contains("# library.beta=0.5"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 1);
    let q: f64 = rows[0][0].parse().unwrap();
    assert!(q > 0.8, "{q}");
}

#[test]
fn config_errors_exit_with_two_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "network.sigma_m = 10\nlibrary.size = 3\n").unwrap();
    let out = bin()
        .args(["analyze", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("library.size"));

    std::fs::write(&cfg, "library.m = 200\n").unwrap();
    let out = bin()
        .args(["analyze", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin()
        .args(["analyze", "--config", "/nonexistent/x.cfg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().args(["sweep", "--preset", "fig9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fig2_preset_writes_one_file_per_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig2.csv");
    let status = bin()
        .args([
            "sweep", "--preset", "fig2", "--trials", "2000", "--seed", "3", "--out",
        ])
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    for db in ["0", "3", "6"] {
        let path = dir.path().join(format!("fig2_theta_db_{db}.csv"));
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(header(&text), SWEEP_HEADER);
        let rows = data_rows(&text);
        assert_eq!(rows.len(), 20);
        for row in &rows {
            for (name, cell) in SWEEP_HEADER.iter().zip(row) {
                if name.starts_with("upsilon") || name.starts_with("po_") {
                    let v: f64 = cell.parse().unwrap();
                    assert!((0.0..=1.0).contains(&v), "{name}={v}");
                }
            }
        }
    }
}

#[test]
fn metadata_reproduces_every_numeric_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "mode = sweep\nsweep.variable = sigma_m\nsweep.values = 5,12.5,30\nsweep.simulate = true\nnetwork.q = 0.4\nsim.trials = 3000\nsim.seed = 17\n",
    )
    .unwrap();
    let status = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let first = std::fs::read_to_string(&out).unwrap();

    let recorded = ExperimentConfig::from_metadata(&first).unwrap();
    let replay_cfg = dir.path().join("replay.cfg");
    std::fs::write(&replay_cfg, recorded.render()).unwrap();
    std::fs::remove_file(&out).unwrap();
    let status = bin()
        .args(["sweep", "--config"])
        .arg(&replay_cfg)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let second = std::fs::read_to_string(Path::new(&recorded.output_path)).unwrap();
    assert_eq!(numeric_cells(&first), numeric_cells(&second));
    assert!(numeric_cells(&first).iter().all(|r| !r[3].is_empty()));
}

#[test]
fn optimize_writes_policy_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig5.csv");
    let status = bin()
        .args(["optimize", "--preset", "fig5", "--out"])
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let summary = std::fs::read_to_string(&out).unwrap();
    assert!(summary.contains("# optimize.suboptimal_q_factor=0.6"));
    let h = header(&summary);
    let row = &data_rows(&summary)[0];
    let get = |name: &str| -> f64 {
        row[h.iter().position(|c| c == name).unwrap()]
            .parse()
            .unwrap()
    };
    assert!(get("po_pc") >= get("po_zipf") && get("po_zipf") >= get("po_uniform"));
    assert!(get("boundary_files_sub") > get("boundary_files_star"));

    let policy = std::fs::read_to_string(dir.path().join("fig5_policy.csv")).unwrap();
    let rows = data_rows(&policy);
    assert_eq!(rows.len(), 100);
    let total: f64 = rows.iter().map(|r| r[2].parse::<f64>().unwrap()).sum();
    assert!((total - 8.0).abs() < 1e-6);

    let hist = std::fs::read_to_string(dir.path().join("fig5_histogram.csv")).unwrap();
    for col in [2, 3] {
        let counts: u64 = data_rows(&hist)
            .iter()
            .map(|r| r[col].parse::<u64>().unwrap())
            .sum();
        assert_eq!(counts, 100);
    }
}

#[test]
fn simulate_mode_reports_tallies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    let status = bin()
        .args(["simulate", "--trials", "4000", "--seed", "5", "--out"])
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let h = header(&text);
    let row = &data_rows(&text)[0];
    let get = |name: &str| -> f64 {
        row[h.iter().position(|c| c == name).unwrap()]
            .parse()
            .unwrap()
    };
    let tallies = [
        "self_cache",
        "d2d_success",
        "d2d_sir_fail",
        "server_inactive",
        "no_caterer",
    ];
    assert_eq!(tallies.iter().map(|t| get(t)).sum::<f64>(), 4000.0);
    assert!((get("po_sim") - get("po_analytic")).abs() < 0.05);
}

#[test]
fn closed_form_sweep_leaves_q_empty() {
    let mut cfg = cachesim::presets::preset(cachesim::presets::Figure::Fig6);
    cfg.sweep.series_variable = None;
    let table = cachesim::experiments::sweep_table(&cfg).unwrap();
    assert_eq!(table.rows.len(), 6);
    assert!(table
        .rows
        .iter()
        .all(|r| r[1] == cachesim::csv::Cell::Empty));
}
