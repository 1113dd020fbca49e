use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use confucius_cli::commands::compare;
use confucius_cli::scenario::Scenario;
use confucius_cli::templates;
use confucius_core::sched::SchedulerKind;
use serde_json::Value;

fn confucius(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_confucius"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CONFUCIUS_OUT")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn missing_trace_file_exits_2_naming_the_path() {
    let d = tempfile::tempdir().unwrap();
    let toml = r#"
name = "t"
duration_s = 5.0
scheduler = "fifo"

[[links]]
rtt_ms = 40.0
trace = "nowhere/bw.csv"

[[bulk]]
cca = "cubic"
"#;
    fs::write(d.path().join("s.toml"), toml).unwrap();
    let o = confucius(&["run", "s.toml", "--out", "o"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere/bw.csv"), "{}", stderr(&o));
}

#[test]
fn malformed_trace_reports_line() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("bw.csv"), "time_ms,capacity_mbps\n0,25\n500,abc\n").unwrap();
    let mut s = Scenario::new("t", 2.0, SchedulerKind::Fifo, templates::multi_video(1, false).links[0].clone());
    s.links[0].capacity_mbps = None;
    s.links[0].trace = Some("bw.csv".into());
    fs::write(d.path().join("s.toml"), s.to_toml()).unwrap();
    let o = confucius(&["run", "s.toml", "--out", "o"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bw.csv:3"), "{}", stderr(&o));
}

#[test]
fn unknown_scenario_key_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let mut text = templates::sweep_n(5).to_toml();
    text.insert_str(0, "colour = \"red\"\n");
    fs::write(d.path().join("s.toml"), text).unwrap();
    let o = confucius(&["run", "s.toml"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));
}

#[test]
fn bad_override_and_unknown_template_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let o = confucius(&["run", "-t", "sweep_n", "-o", "confucius.no_such_key=1"], d.path());
    assert_eq!(o.status.code(), Some(2));
    let o = confucius(&["run", "-t", "no_such_template"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("website_compete"));
}

#[test]
fn failing_validation_exits_1() {
    let d = tempfile::tempdir().unwrap();
    let o = confucius(&["validate", "--only", "4", "-o", "confucius.lambda_per_ms=10"], d.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("criterion  4 FAIL"), "{out}");
    assert!(out.contains("confucius flat [FAIL]"), "{out}");
}

#[test]
fn passing_validation_subset_exits_0() {
    let d = tempfile::tempdir().unwrap();
    let o = confucius(&["validate", "--only", "8,11"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.lines().filter(|l| l.starts_with("criterion")).count(), 2);
}

#[test]
fn run_writes_artifacts_and_replay_is_identical() {
    let d = tempfile::tempdir().unwrap();
    let o = confucius(&["run", "-t", "website_compete", "--out", "a"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let a = d.path().join("a");
    for f in ["report.json", "invocation.json", "frames.csv", "flows.csv", "rates.csv", "classes.csv"] {
        assert!(a.join(f).is_file(), "{f}");
    }
    let r = report(&a);
    assert!(r["stall_ms"].is_number());
    assert!(r["plt_ms"].as_array().is_some_and(|p| p.len() == 2));
    assert_eq!(r["scheduler"], "confucius");

    let o = confucius(&["run", "--replay", "a/invocation.json", "--out", "b"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(a.join("report.json")).unwrap(),
        fs::read(d.path().join("b/report.json")).unwrap()
    );
    assert_eq!(fs::read(a.join("frames.csv")).unwrap(), fs::read(d.path().join("b/frames.csv")).unwrap());
}

#[test]
fn scheduler_override_changes_the_outcome() {
    let d = tempfile::tempdir().unwrap();
    let o = confucius(&["run", "-t", "sweep_n", "--out", "c"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = confucius(&["run", "-t", "sweep_n", "-o", "scheduler=fifo", "--out", "f"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (c, f) = (report(&d.path().join("c")), report(&d.path().join("f")));
    assert_eq!(f["scheduler"], "fifo");
    assert_ne!(c["max_frame_delay_ms"], f["max_frame_delay_ms"]);
    assert!(f["stall_ms"].as_f64().unwrap() > c["stall_ms"].as_f64().unwrap());
}

#[test]
fn output_root_env_var() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_confucius"))
        .args(["run", "-t", "probing", "--seed", "3", "-o", "duration_s=2"])
        .current_dir(d.path())
        .env("CONFUCIUS_OUT", d.path().join("root"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.path().join("root/probing-seed3/report.json").is_file());
}

#[test]
fn dry_run_prints_a_loadable_scenario() {
    let d = tempfile::tempdir().unwrap();
    let o = confucius(&["run", "-t", "multi_bottleneck", "-o", "links.1.rtt_ms=30", "--dry-run"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = Scenario::from_toml(&String::from_utf8_lossy(&o.stdout)).unwrap();
    assert_eq!(s.links[1].rtt_ms, 30.0);
    assert!(!d.path().join("confucius-out").exists());
}

#[test]
fn compare_three_schedulers_twenty_seeds() {
    let s = templates::sweep_n(20);
    let kinds = [SchedulerKind::Fifo, SchedulerKind::Fq, SchedulerKind::Confucius];
    let seeds: Vec<u64> = (1..=20).collect();
    let rows = compare(&s, Path::new("."), &["duration_s=12".into()], &kinds, &seeds).unwrap();
    assert_eq!(rows.len(), 63);
    for k in kinds {
        let of: Vec<_> = rows.iter().filter(|r| r.scheduler == k.name()).collect();
        assert_eq!(of.len(), 21);
        let (mean, per): (Vec<_>, Vec<_>) = of.into_iter().partition(|r| r.seed == "mean");
        let stall = per.iter().map(|r| r.stall_ms).sum::<f64>() / 20.0;
        assert!((mean[0].stall_ms - stall).abs() < 1e-9);
        let plts: Vec<f64> = per.iter().filter_map(|r| r.plt_ms).collect();
        if !plts.is_empty() {
            let plt = plts.iter().sum::<f64>() / plts.len() as f64;
            assert!((mean[0].plt_ms.unwrap() - plt).abs() < 1e-9);
        }
    }
    assert!(compare(&s, Path::new("."), &[], &[], &seeds).is_err());
}

#[test]
fn compare_command_writes_csv_and_rejects_empty_list() {
    let d = tempfile::tempdir().unwrap();
    let o = confucius(
        &["compare", "-t", "sweep_n", "-o", "duration_s=11", "--schedulers", "fifo,fq,confucius", "--seeds", "2", "--out", "cmp"],
        d.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("cmp/compare.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 2 + 3);
    let o = confucius(&["compare", "-t", "sweep_n", "--schedulers", ""], d.path());
    assert_eq!(o.status.code(), Some(2));
    let o = confucius(&["compare", "-t", "sweep_n", "--schedulers", "fifo,wfq"], d.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_one_row_per_run() {
    let d = tempfile::tempdir().unwrap();
    let o = confucius(
        &["sweep", "-t", "probing", "-o", "duration_s=2", "--seeds", "1..2", "--vary", "scheduler=fifo,fq", "--out", "sw"],
        d.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("sw/sweep.csv")).unwrap();
    // five RTTs x two schedulers x two seeds
    assert_eq!(text.lines().count(), 1 + 20);
    assert!(d.path().join("sw/rtt20_schedulerfq/seed2/report.json").is_file());
}

#[test]
fn analyze_prints_one_row_per_policy() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("p.txt"), "# defaults with a wider page\nn = 40\nq0_ms = 2\n").unwrap();
    let o = confucius(&["analyze", "p.txt", "--set", "lambda_per_ms=0.008", "--series", "ser"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("policy,q_max_closed_ms,q_max_integrated_ms,fct_delta_ms,bound_flag"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let cells: Vec<&str> = r.split(',').collect();
        assert_eq!(cells.len(), 5);
        assert!(cells[1].parse::<f64>().unwrap() > 0.0);
    }
    assert_eq!(fs::read_dir(d.path().join("ser")).unwrap().count(), 4);
    let o = confucius(&["analyze", "--set", "k=oops"], d.path());
    assert_eq!(o.status.code(), Some(2));
}
