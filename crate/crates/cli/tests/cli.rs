use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hqrl_cli::svg::{curve_svg, emit_curve_svg, route_svg, Curve};
use hqrl_cli::{EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, SEED_ENV};
use hqrl_core::env::{generate_instance, RouteSolution};
use hqrl_core::training::{train, RunConfig};
use hqrl_core::VrpInstance;

fn hqrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hqrl")).args(args).env_remove(SEED_ENV).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = hqrl(args);
    assert_eq!(out.status.code(), Some(EXIT_OK), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn polyline_points(node: roxmltree::Node) -> Vec<(f64, f64)> {
    node.attribute("points")
        .unwrap()
        .split_whitespace()
        .map(|p| {
            let (x, y) = p.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

fn with_class<'a>(doc: &'a roxmltree::Document, class: &str) -> Vec<roxmltree::Node<'a, 'a>> {
    doc.descendants().filter(|n| n.attribute("class") == Some(class)).collect()
}

#[test]
fn gen_instance_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen-instance", "--n", "8", "--k", "2", "--seed", "77", "--out", path(dir.path())]);
    let inst: VrpInstance =
        serde_json::from_str(&fs::read_to_string(dir.path().join("instance.json")).unwrap()).unwrap();
    assert_eq!(inst, generate_instance(8, 2, 77).unwrap());
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"seed": 5, "n_customers": 6}"#).unwrap();
    let read = |sub: &str| -> VrpInstance {
        serde_json::from_str(&fs::read_to_string(dir.path().join(sub).join("instance.json")).unwrap()).unwrap()
    };
    let out = |sub: &str| dir.path().join(sub).to_str().unwrap().to_string();
    let env_run = |args: &[&str]| {
        let o = Command::new(env!("CARGO_BIN_EXE_hqrl")).args(args).env(SEED_ENV, "11").output().unwrap();
        assert_eq!(o.status.code(), Some(EXIT_OK));
    };
    env_run(&["gen-instance", "--out", &out("env")]);
    env_run(&["gen-instance", "--config", path(&cfg), "--out", &out("file")]);
    env_run(&["gen-instance", "--config", path(&cfg), "--seed", "3", "--out", &out("flag")]);
    ok(&["gen-instance", "--out", &out("default")]);
    assert_eq!(read("env"), generate_instance(8, 2, 11).unwrap());
    assert_eq!(read("file"), generate_instance(6, 2, 5).unwrap());
    assert_eq!(read("flag"), generate_instance(6, 2, 3).unwrap());
    assert_eq!(read("default"), generate_instance(8, 2, 7).unwrap());
}

#[test]
fn train_twice_is_byte_identical_and_snapshot_has_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"n_customers": 6, "episodes": 25}"#).unwrap();
    let before = fs::read(&cfg).unwrap();
    for run in ["a", "b"] {
        ok(&["train", "--config", path(&cfg), "--out", path(&dir.path().join(run))]);
    }
    for f in ["metrics.csv", "checkpoint.json", "config.json", "routes.json", "warmstart.json"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(fs::read(&cfg).unwrap(), before);
    let snap: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/config.json")).unwrap()).unwrap();
    assert_eq!(snap["gamma"], 0.99);
    assert_eq!(snap["lambda_penalty"], 10.0);
    assert_eq!(snap["n_qubits"], 4);
    assert_eq!(snap["n_layers"], 2);
    assert_eq!(snap["p"], 2);
    let csv = fs::read_to_string(dir.path().join("a/metrics.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "episode,total_reward,policy_loss,value_loss,route_cost");
    assert_eq!(csv.lines().count(), 26);
}

#[test]
fn evaluate_routes_cover_every_customer_once() {
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    ok(&["gen-instance", "--n", "8", "--k", "2", "--seed", "88", "--out", &d("i")]);
    ok(&["train", "--episodes", "10", "--out", &d("t")]);
    let ck = dir.path().join("t/checkpoint.json");
    let ck_before = fs::read(&ck).unwrap();
    ok(&["evaluate", "--checkpoint", &d("t/checkpoint.json"), "--instance", &d("i/instance.json"), "--out", &d("e")]);
    assert_eq!(fs::read(&ck).unwrap(), ck_before);
    let sol: RouteSolution =
        serde_json::from_str(&fs::read_to_string(dir.path().join("e/routes.json")).unwrap()).unwrap();
    let mut all: Vec<usize> = sol.as_routes().concat();
    all.sort_unstable();
    assert_eq!(all, (0..8).collect::<Vec<_>>());
    assert!(sol.routes.len() <= 2);
}

#[test]
fn finetune_refuses_to_overwrite_its_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    ok(&["train", "--episodes", "5", "--out", d]);
    let ck = dir.path().join("checkpoint.json");
    let before = fs::read(&ck).unwrap();
    let out = hqrl(&["finetune", "--checkpoint", path(&ck), "--episodes", "5", "--out", d]);
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert_eq!(fs::read(&ck).unwrap(), before);
    let sub = dir.path().join("ft");
    ok(&["finetune", "--checkpoint", path(&ck), "--n", "12", "--episodes", "5", "--out", path(&sub)]);
    let csv = fs::read_to_string(sub.join("metrics.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("5,"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    let code = |args: &[&str]| hqrl(args).status.code();
    assert_eq!(code(&["--help"]), Some(EXIT_OK));
    assert_eq!(code(&[]), Some(EXIT_USAGE));
    assert_eq!(code(&["frobnicate"]), Some(EXIT_USAGE));
    assert_eq!(code(&["train", "--no-such-flag"]), Some(EXIT_USAGE));
    assert_eq!(code(&["train", "--n", "0", "--out", d]), Some(EXIT_USAGE));
    assert_eq!(code(&["train", "--method", "brute-force", "--out", d]), Some(EXIT_USAGE));
    assert_eq!(code(&["sweep", "--sizes", "5", "--out", d]), Some(EXIT_USAGE));
    assert_eq!(code(&["gen-instance", "--config", "/no/such/config.json", "--out", d]), Some(EXIT_USAGE));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"gama": 0.9}"#).unwrap();
    assert_eq!(code(&["train", "--config", path(&bad), "--out", d]), Some(EXIT_USAGE));
    assert_eq!(code(&["evaluate", "--checkpoint", "/no/such/ck.json", "--out", d]), Some(EXIT_RUNTIME));
    let garbage = dir.path().join("ck.json");
    fs::write(&garbage, "{}").unwrap();
    let out = hqrl(&["evaluate", "--checkpoint", path(&garbage), "--out", d]);
    assert_eq!(out.status.code(), Some(EXIT_RUNTIME));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"], "runtime");
}

#[test]
fn ablate_and_sweep_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    ok(&["ablate", "--sizes", "5", "--seed", "7", "--episodes", "4", "--out", &d("a")]);
    let a = fs::read_to_string(dir.path().join("a/comparison.csv")).unwrap();
    assert_eq!(a.lines().next().unwrap(), "method,n_customers,normalized_cost,qubits,depth,peak_mem_bytes");
    assert_eq!(a.lines().count(), 1 + 4);
    ok(&["sweep", "--sizes", "5,10", "--seeds", "7", "--episodes", "4", "--out", &d("s")]);
    let s = fs::read_to_string(dir.path().join("s/comparison.csv")).unwrap();
    for line in s.lines().filter(|l| l.starts_with("hqrl-qaoa,")) {
        assert_eq!(line.split(',').nth(3), Some("4"));
    }
    assert!(s.lines().any(|l| l.starts_with("brute-force,10,N/A")));
}

#[test]
fn plot_reads_cli_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    ok(&["train", "--episodes", "12", "--out", &d("t")]);
    ok(&[
        "plot",
        "--metrics",
        &d("t/metrics.csv"),
        "--label",
        "a<b",
        "--routes",
        &d("t/routes.json"),
        "--out",
        &d("p"),
    ]);
    let curves = fs::read_to_string(dir.path().join("p/curves.svg")).unwrap();
    let doc = roxmltree::Document::parse(&curves).unwrap();
    assert_eq!(with_class(&doc, "curve").len(), 1);
    assert!(doc.descendants().any(|n| n.text() == Some("a<b")));
    let routes = fs::read_to_string(dir.path().join("p/routes.svg")).unwrap();
    let doc = roxmltree::Document::parse(&routes).unwrap();
    assert_eq!(with_class(&doc, "customer").len(), 8);
    assert_eq!(hqrl(&["plot", "--out", &d("p")]).status.code(), Some(EXIT_USAGE));
}

#[test]
fn route_svg_single_vehicle_two_customers() {
    let inst = VrpInstance::new([0.5, 0.5], vec![[0.1, 0.2], [0.9, 0.7]], 1, 0).unwrap();
    let text = route_svg(&inst, &[vec![1, 0]]).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    let lines = with_class(&doc, "route");
    assert_eq!(lines.len(), 1);
    let pts = polyline_points(lines[0]);
    assert_eq!(pts.len(), 4);
    assert_eq!(pts[0], pts[3]);
    assert_eq!(with_class(&doc, "arrow").len(), 3);
    assert_eq!(with_class(&doc, "depot").len(), 1);
    assert_eq!(with_class(&doc, "customer").len(), 2);
    let labels: Vec<&str> = doc.descendants().filter(|n| n.has_tag_name("text")).filter_map(|n| n.text()).collect();
    assert_eq!(labels, vec!["0", "1"]);
}

#[test]
fn route_svg_empty_route_set() {
    let inst = generate_instance(5, 2, 3).unwrap();
    for routes in [vec![], vec![vec![], vec![]]] {
        let text = route_svg(&inst, &routes).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        assert!(with_class(&doc, "route").is_empty());
        assert!(with_class(&doc, "arrow").is_empty());
        assert_eq!(with_class(&doc, "depot").len(), 1);
        assert_eq!(with_class(&doc, "customer").len(), 5);
    }
}

#[test]
fn route_svg_colours_differ_per_vehicle() {
    let inst = generate_instance(6, 3, 9).unwrap();
    let text = route_svg(&inst, &[vec![0, 1], vec![2, 3], vec![4, 5]]).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    let mut colours: Vec<&str> = with_class(&doc, "route").iter().map(|n| n.attribute("stroke").unwrap()).collect();
    colours.dedup();
    assert_eq!(colours.len(), 3);
}

#[test]
fn curve_svg_constant_log_is_horizontal() {
    let text = curve_svg(&[Curve { label: "flat".into(), rewards: vec![-3.0; 40] }]).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    let curves = with_class(&doc, "curve");
    assert_eq!(curves.len(), 1);
    let pts = polyline_points(curves[0]);
    assert_eq!(pts.len(), 40);
    assert!(pts.iter().all(|p| p.1 == pts[0].1));
    assert!(pts.windows(2).all(|w| w[1].0 > w[0].0));
    assert_eq!(with_class(&doc, "legend-entry").len(), 1);
    assert_eq!(with_class(&doc, "x-label").len(), 1);
    assert_eq!(with_class(&doc, "y-label").len(), 1);
}

#[test]
fn curve_svg_from_training_logs() {
    let dir = tempfile::tempdir().unwrap();
    let base = RunConfig { n_customers: 5, n_vehicles: 1, episodes: 15, ..RunConfig::default() };
    let logs: Vec<_> = [hqrl_core::training::Method::HqrlQaoa, hqrl_core::training::Method::VanillaQrl]
        .into_iter()
        .map(|method| train(&RunConfig { method, ..base.clone() }).unwrap().0)
        .collect();
    let file = dir.path().join("curves.svg");
    emit_curve_svg(&logs, &file).unwrap();
    let text = fs::read_to_string(&file).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(with_class(&doc, "curve").len(), 2);
    let legend: Vec<&str> = with_class(&doc, "legend-entry")
        .iter()
        .flat_map(|g| g.descendants().filter(|n| n.has_tag_name("text")).filter_map(|n| n.text()))
        .collect();
    assert_eq!(legend, vec!["hqrl-qaoa", "vanilla-qrl"]);
    assert!(emit_curve_svg(&logs, &dir.path().join("missing/dir/x.svg")).is_err());
}
