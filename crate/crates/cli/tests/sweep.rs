mod common;

use std::process::Command;

use common::*;
use habdf_cli::commands::sweep::MAX_CELLS;
use habdf_cli::commands::{simulate, sweep, GridAxis};

fn axis(s: &str) -> GridAxis {
    s.parse().unwrap()
}

fn column(csv_text: &str, name: &str) -> Vec<String> {
    let mut lines = csv_text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header
        .iter()
        .position(|h| *h == name)
        .unwrap_or_else(|| panic!("no {name}"));
    lines
        .map(|l| l.split(',').nth(i).unwrap().to_string())
        .collect()
}

#[test]
fn single_cell_matches_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("fig3.scenario");
    let sim = simulate(&cfg, &dir.path().join("sim"), None).unwrap();
    let sw = sweep(
        &cfg,
        &[axis("vote.lambda=15")],
        &dir.path().join("sw"),
        None,
        false,
    )
    .unwrap();
    assert_eq!(sw.runs.len(), 1);
    assert_eq!(sw.runs[0], sim.run);
    let text = std::fs::read_to_string(sw.path).unwrap();
    let fused = sim
        .run
        .summary()
        .into_iter()
        .find(|s| s.approach == "fused")
        .unwrap();
    assert_eq!(
        column(&text, "rmse_fused"),
        vec![habdf_cli::records::fmt_f64(fused.rmse)]
    );
}

#[test]
fn larger_xi_lowers_mean_penalty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("nominal.toml");
    let text = std::fs::read_to_string(scenario("fig3.scenario")).unwrap();
    // Drop the faults: every sensor keeps only its noise.
    let nominal: String = text
        .lines()
        .filter(|l| {
            ![
                "drift_rate",
                "spike_prob",
                "spike_mag",
                "shock_offset",
                "shock_window",
            ]
            .iter()
            .any(|k| l.starts_with(k))
        })
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&cfg, nominal).unwrap();
    let res = sweep(
        &cfg,
        &[axis("expert.xi=0.5,1,2,4")],
        dir.path(),
        Some(3),
        false,
    )
    .unwrap();
    let text = std::fs::read_to_string(res.path).unwrap();
    for name in ["noisy", "drift", "spike_shock"] {
        let w: Vec<f64> = column(&text, &format!("mean_wM_{name}"))
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        assert!(w.windows(2).all(|p| p[1] < p[0]), "{name}: {w:?}");
    }
}

#[test]
fn same_seed_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("fig3.scenario");
    let axes = [axis("fusion.delta=1,2"), axis("vote.omega=5,10")];
    let a = sweep(&cfg, &axes, &dir.path().join("a"), Some(11), false).unwrap();
    let b = sweep(&cfg, &axes, &dir.path().join("b"), Some(11), false).unwrap();
    assert_eq!(
        std::fs::read(a.path).unwrap(),
        std::fs::read(b.path).unwrap()
    );
    assert_eq!(a.runs.len(), 4);
}

#[test]
fn oversized_grid_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let list = |n: usize| (1..=n).map(|i| i.to_string()).collect::<Vec<_>>().join(",");
    // 101 x 100 cells, one over the limit.
    let out = Command::new(env!("CARGO_BIN_EXE_habdf"))
        .args(["sweep", "--config"])
        .arg(scenario("fig3.scenario"))
        .args([
            "--grid",
            &format!("vote.lambda={}", list(MAX_CELLS / 100 + 1)),
        ])
        .args(["--grid", &format!("seed={}", list(100))])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force"));
    assert!(!dir.path().join("sweep.csv").exists());
}

#[test]
fn bad_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = sweep(
        &scenario("fig3.scenario"),
        &[axis("vote.lamda=3")],
        dir.path(),
        None,
        false,
    )
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
