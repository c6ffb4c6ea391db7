use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mue::analysis::read_sweep_csv;
use mue::demand::{split_demand, OdMatrix};
use mue::equilibrium::{read_solution_csv, solve, SolverOptions};
use mue::fixtures::{grid10x10, mini_city};
use mue::metrics::{compare, MetricsReport};

fn dual_route_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/dual_route")
}

fn inputs(dir: &Path, out: &Path) -> Vec<String> {
    let f = |name: &str| dir.join(name).display().to_string();
    vec![
        "--network".into(),
        f("nodes.csv"),
        "--links".into(),
        f("links.csv"),
        "--zones".into(),
        f("zones.csv"),
        "--od".into(),
        f("od.csv"),
        "--cost-config".into(),
        f("cost.json"),
        "--out".into(),
        out.display().to_string(),
    ]
}

fn mue(sub: &str, dir: &Path, out: &Path, extra: &[&str]) -> Output {
    mue_env(sub, dir, out, extra, None)
}

fn mue_env(sub: &str, dir: &Path, out: &Path, extra: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mue"));
    cmd.arg(sub).args(inputs(dir, out)).args(extra);
    if let Some(t) = threads {
        cmd.env("MUE_THREADS", t);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn error_report(o: &Output) -> serde_json::Value {
    serde_json::from_slice(o.stderr.trim_ascii()).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn metrics(out: &Path) -> MetricsReport {
    serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap()
}

#[test]
fn validate_reports_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mue("validate", &dual_route_dir(), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o).trim(),
        "2 zones, 4 nodes, 6 links (2 road + 4 connectors), 1 OD pair, demand 100"
    );

    let fx = mini_city(3);
    let dir = tmp.path().join("mini");
    let manifest = fx.write_to(&dir).unwrap();
    let o = mue("validate", &dir, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o);
    assert!(line.starts_with(&format!("{} zones, ", manifest.zones)), "{line}");
    assert!(line.contains(&format!(", {} links (", manifest.links)), "{line}");
    assert!(line.contains(&format!(", {} OD pairs", manifest.od_pairs)), "{line}");
}

#[test]
fn missing_od_file_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("in");
    fs::create_dir(&dir).unwrap();
    for f in ["nodes.csv", "links.csv", "zones.csv", "cost.json"] {
        fs::copy(dual_route_dir().join(f), dir.join(f)).unwrap();
    }
    let o = mue("solve", &dir, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let report = error_report(&o);
    assert_eq!(report["exit_code"], 2);
    assert!(report["message"].as_str().unwrap().contains(&dir.join("od.csv").display().to_string()));
}

#[test]
fn solve_writes_metrics_for_both_extremes() {
    let tmp = tempfile::tempdir().unwrap();
    let (gv, ev) = (tmp.path().join("gv"), tmp.path().join("ev"));
    let o = mue("solve", &dual_route_dir(), &gv, &["--penetration", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = mue("solve", &dual_route_dir(), &ev, &["--penetration", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let (t0, t1) = (metrics(&gv).avg_travel_time_mue, metrics(&ev).avg_travel_time_mue);
    assert!((t0 - 15.55).abs() < 0.01, "{t0}");
    assert!(t1 < t0);

    let rows = read_solution_csv(fs::File::open(gv.join("solution.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 6);
    for f in ["metrics_links.csv", "metrics_summary.csv", "solution.json"] {
        assert!(gv.join(f).exists(), "{f}");
    }
}

#[test]
fn unreachable_pair_is_infeasible() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("in");
    fs::create_dir(&dir).unwrap();
    for f in ["nodes.csv", "links.csv", "zones.csv", "cost.json"] {
        fs::copy(dual_route_dir().join(f), dir.join(f)).unwrap();
    }
    fs::write(dir.join("od.csv"), "origin_zone,destination_zone,demand\no,d,100\nd,o,5\n").unwrap();
    let o = mue("solve", &dir, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_report(&o)["exit_code"], 4);
}

#[test]
fn two_level_sweep_matches_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mue("sweep", &dual_route_dir(), tmp.path(), &["--levels", "0,1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_sweep_csv(fs::File::open(tmp.path().join("sweep.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);

    let fx = mue::fixtures::dual_route();
    let od = OdMatrix::load_csv(fs::File::open(dual_route_dir().join("od.csv")).unwrap()).unwrap();
    let cost = mue::cli::load_inputs(&mue::cli::RunConfig::from_dir(&dual_route_dir(), tmp.path())).unwrap().cost;
    let t: Vec<f64> = [0.0, 1.0]
        .iter()
        .map(|&r| {
            let d = split_demand(&od, r).unwrap();
            let s = solve(&fx.network, &d, &cost, &SolverOptions::default()).unwrap();
            MetricsReport::compute(&s, &fx.network, &d).unwrap().avg_travel_time_mue
        })
        .collect();
    let lib = compare(t[0], t[1]).unwrap();
    let cli = compare(rows[0].t_mue, rows[1].t_mue).unwrap();
    assert!((lib.delta_t_abs - cli.delta_t_abs).abs() < 1e-6, "{lib:?} vs {cli:?}");
    assert!((lib.delta_t_rel - cli.delta_t_rel).abs() < 1e-6);

    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("sweep.json")).unwrap()).unwrap();
    for key in ["plateau_intervals", "transition_intervals", "critical_thresholds", "city_type"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

#[test]
fn outputs_do_not_depend_on_run_or_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = grid10x10(5);
    let dir = tmp.path().join("in");
    fx.write_to(&dir).unwrap();
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "1", "4", "8"].iter().enumerate() {
        let out = tmp.path().join(format!("out{i}"));
        let o = mue_env("sweep", &dir, &out, &["--levels", "0:1:0.5", "--method", "pd"], Some(threads));
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((fs::read(out.join("sweep.csv")).unwrap(), fs::read(out.join("sweep.json")).unwrap()));
    }
    for o in &outputs[1..] {
        assert!(o == &outputs[0]);
    }
}

#[test]
fn iteration_cap_exits_with_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("in");
    grid10x10(5).write_to(&dir).unwrap();
    let out = tmp.path().join("out");
    let o = mue("solve", &dir, &out, &["--penetration", "0.5", "--max-iters", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let m = metrics(&out);
    assert!(m.avg_travel_time_mue > 0.0);
    assert!(stdout(&o).contains("converged=false"));
}
