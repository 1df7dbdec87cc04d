use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use cbn::data::{read_table_str, CohortSchema};
use cbn::params::mle_fit;
use cbn::{CausalBayesianNetwork, Cpt, Dag, Variable};
use serde_json::{json, Value};

fn cbn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbn")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cbn(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap()
}

// A -> B -> C, each child copying its parent with probability 0.9.
fn chain() -> CausalBayesianNetwork {
    let v = |n: &str| Variable::with_states(n, &["lo", "hi"]).unwrap();
    let dag = Dag::new(vec!["A".into(), "B".into(), "C".into()], &[("A", "B"), ("B", "C")]).unwrap();
    let copy = |i, p| Cpt::new(i, 2, vec![p], vec![2], vec![0.9, 0.1, 0.1, 0.9]).unwrap();
    let cpts = vec![Cpt::new(0, 2, vec![], vec![], vec![0.4, 0.6]).unwrap(), copy(1, 0), copy(2, 1)];
    CausalBayesianNetwork::new(dag, vec![v("A"), v("B"), v("C")], cpts).unwrap()
}

fn chain_fixture(dir: &Path) {
    std::fs::write(dir.join("truth.json"), chain().to_model_json()).unwrap();
    std::fs::write(dir.join("k.txt"), "[tiers]\nA\nB\nC\n").unwrap();
    ok(
        dir,
        &["simulate", "--model", "truth.json", "--count", "3000", "--seed", "5", "--missing", "mcar:0.1:*", "--out", "d.csv"],
    );
}

fn discover_args(out: &str) -> Vec<String> {
    ["discover", "--data", "d.csv", "--knowledge", "k.txt", "--n", "8", "--lambda", "0.5", "--seed", "3", "--out", out]
        .map(String::from)
        .to_vec()
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cbn(dir.path(), &["discover", "--data", "d.csv", "--n", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--lambda"));
    assert_eq!(cbn(dir.path(), &["bogus"]).status.code(), Some(2));
}

#[test]
fn error_classes_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = cbn(d, &["fit", "--data", "none.csv", "--graph", "g.txt", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[io]: "));

    std::fs::write(d.join("d.csv"), "A,B\nx,y\nz,y\n").unwrap();
    std::fs::write(d.join("g.txt"), "A -> Q\n").unwrap();
    let out = cbn(d, &["fit", "--data", "d.csv", "--graph", "g.txt", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[validation]: "));
}

#[test]
fn discover_recovers_chain_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    chain_fixture(d);
    let args = discover_args("run1");
    ok(d, &args.iter().map(String::as_str).collect::<Vec<_>>());

    let strengths = read(d, "run1/strengths.tsv");
    let ab: f64 = strengths
        .lines()
        .find_map(|l| l.strip_prefix("A\tB\t"))
        .expect("A -> B listed")
        .parse()
        .unwrap();
    assert!(ab >= 0.9, "{strengths}");
    assert_eq!(read(d, "run1/graph.txt"), "A -> B\nB -> C\n");

    // same arguments, fresh directory: byte-identical outputs
    let args2 = discover_args("run2");
    ok(d, &args2.iter().map(String::as_str).collect::<Vec<_>>());
    for f in ["confidence.tsv", "strengths.tsv", "graph.txt", "model.json", "report.json"] {
        assert_eq!(read(d, &format!("run1/{f}")), read(d, &format!("run2/{f}")), "{f}");
    }

    let stdout = ok(d, &["replay", "--manifest", "run1/manifest.json"]);
    assert!(stdout.contains("5 outputs byte-identical"), "{stdout}");

    let manifest: Value = serde_json::from_str(&read(d, "run1/manifest.json")).unwrap();
    assert_eq!(manifest["format"], "cbn-manifest/1");
    assert_eq!(manifest["seeds"]["bootstrap"], 3);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
    assert!(manifest["schema_sha256"].is_string());

    std::fs::write(d.join("d.csv"), read(d, "d.csv") + "lo,lo,lo\n").unwrap();
    let out = cbn(d, &["replay", "--manifest", "run1/manifest.json"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("inputs changed"));
}

#[test]
fn fit_then_predict_reproduces_mle_posteriors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("truth.json"), chain().to_model_json()).unwrap();
    ok(d, &["simulate", "--model", "truth.json", "--count", "400", "--seed", "9", "--out", "d.csv"]);
    std::fs::write(d.join("g.txt"), "A -> B\nB -> C\n").unwrap();
    ok(d, &["fit", "--data", "d.csv", "--graph", "g.txt", "--ess", "0", "--out", "m.json"]);
    ok(d, &["predict", "--model", "m.json", "--data", "d.csv", "--target", "C", "--positive", "hi", "--out", "s.tsv"]);

    let data = read_table_str(&read(d, "d.csv"), chain().variables(), "").unwrap();
    let dag = Dag::new(data.names(), &[("A", "B"), ("B", "C")]).unwrap();
    let mle = mle_fit(&dag, &data, 0.0).unwrap();
    let scores = read(d, "s.tsv");
    let mut lines = scores.lines();
    assert_eq!(lines.next(), Some("record\tscore\tlabel"));
    for (i, (line, rec)) in lines.zip(data.records()).enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        let mut ev = rec.clone();
        ev[2] = None;
        let p = mle.posterior(&ev, 2).unwrap()[1];
        assert_eq!(cols[0], i.to_string());
        assert_eq!(cols[1].parse::<f64>().unwrap(), p);
        assert_eq!(cols[2], ["lo", "hi"][rec[2].unwrap()]);
    }
}

#[test]
fn simulate_with_rate_zero_is_complete() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--reference-cohort", "--count", "50", "--seed", "1", "--missing", "mcar:0:*", "--out", "d.csv"]);
    let schema = CohortSchema::endometrial(false);
    let data = read_table_str(&read(d, "d.csv"), schema.variables(), "").unwrap();
    assert_eq!(data.len(), 50);
    assert!(data.is_complete());

    ok(
        d,
        &["simulate", "--reference-cohort", "--count", "200", "--seed", "1", "--missing", "mcar:0.3:*", "--protect", "LNM", "--out", "m.csv"],
    );
    let data = read_table_str(&read(d, "m.csv"), schema.variables(), "").unwrap();
    let lnm = data.index_of("LNM").unwrap();
    assert!(data.records().iter().all(|r| r[lnm].is_some()));
    assert!(data.missing_count() > 0);
}

#[test]
fn gridsearch_and_eval_on_the_cohort() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["cohort", "--out", "cohort"]);
    ok(
        d,
        &["simulate", "--reference-cohort", "--count", "500", "--seed", "4", "--missing", "mcar:0.15:*", "--protect", "LNM", "--out", "d.csv"],
    );
    std::fs::write(d.join("grid.json"), r#"{"n": [4, 6], "lambda": [0.5], "seed": 2}"#).unwrap();
    let stdout = ok(
        d,
        &["gridsearch", "--data", "d.csv", "--schema", "cohort/schema.txt", "--grid", "grid.json", "--target", "LNM", "--positive", "yes", "--out", "g"],
    );
    assert!(stdout.starts_with("2/2 configurations completed"), "{stdout}");
    let summary: Value = serde_json::from_str(&read(d, "g/results.json")).unwrap();
    assert_eq!(summary["train_records"], 350);
    assert_eq!(read(d, "g/scatter.tsv").lines().count(), 3);

    ok(d, &["discover", "--data", "d.csv", "--schema", "cohort/schema.txt", "--n", "4", "--lambda", "0.5", "--out", "disc"]);
    ok(d, &["predict", "--model", "disc/model.json", "--data", "d.csv", "--target", "LNM", "--positive", "yes", "--out", "s.tsv"]);
    ok(d, &["eval", "--scores", "s.tsv", "--positive", "yes", "--ci-resamples", "200", "--out", "r.txt", "--roc", "roc.tsv"]);
    let report = read(d, "r.txt");
    let auc: f64 = report.lines().find_map(|l| l.strip_prefix("auc\t")).unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&auc));
    let ci: Vec<f64> = report
        .lines()
        .find_map(|l| l.strip_prefix("ci95\t"))
        .unwrap()
        .split('\t')
        .map(|x| x.parse().unwrap())
        .collect();
    assert!(ci[0] <= ci[1], "{ci:?}");
    let roc = read(d, "roc.tsv");
    assert!(roc.lines().nth(1).unwrap().ends_with("\t0.000000000\t0.000000000"));
    assert!(roc.lines().last().unwrap().ends_with("\t1.000000000\t1.000000000"));

    ok(d, &["replay", "--manifest", "g/manifest.json"]);
    ok(d, &["replay", "--manifest", "r.txt.manifest.json"]);
}

#[test]
fn discover_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    chain_fixture(d);
    for (threads, out) in [("1", "t1"), ("4", "t4")] {
        let args = discover_args(out);
        let status = Command::new(env!("CARGO_BIN_EXE_cbn"))
            .current_dir(d)
            .args(&args)
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        assert!(status.status.success());
    }
    for f in ["confidence.tsv", "strengths.tsv", "graph.txt", "model.json", "report.json"] {
        assert_eq!(read(d, &format!("t1/{f}")), read(d, &format!("t4/{f}")), "{f}");
    }
}

struct Server {
    child: std::process::Child,
    addr: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn start_server(dir: &Path, args: &[&str]) -> Server {
    let mut child = Command::new(env!("CARGO_BIN_EXE_cbn"))
        .current_dir(dir)
        .arg("serve")
        .args(args)
        .args(["--addr", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").expect("listening line").to_string();
    Server { child, addr }
}

fn http(server: &Server, method: &str, path: &str, body: &str) -> (u16, Value) {
    let mut s = TcpStream::connect(&server.addr).unwrap();
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        server.addr,
        body.len()
    )
    .unwrap();
    let mut raw = String::new();
    s.read_to_string(&mut raw).unwrap();
    let (head, payload) = raw.split_once("\r\n\r\n").unwrap();
    let status: u16 = head.split(' ').nth(1).unwrap().parse().unwrap();
    (status, serde_json::from_str(payload).unwrap())
}

fn posterior_of(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn serve_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let schema = CohortSchema::endometrial(false);
    let bn = schema.reference_network().unwrap();
    std::fs::write(d.join("m.json"), bn.to_model_json()).unwrap();
    let server = start_server(d, &["--model", "m.json", "--target", "LNM"]);

    let (status, model) = http(&server, "GET", "/model", "");
    assert_eq!(status, 200);
    assert_eq!(model["nodes"].as_array().unwrap().len(), bn.len());
    assert_eq!(model["edges"].as_array().unwrap().len(), bn.dag().edge_count());
    assert_eq!(model["target"], "LNM");

    let (status, prior) = http(&server, "POST", "/predict", r#"{"evidence": {}}"#);
    assert_eq!(status, 200);
    assert_eq!(prior["kind"], "conditional");
    let lnm = bn.index_of("LNM").unwrap();
    let expected = bn.posterior(&vec![None; bn.len()], lnm).unwrap();
    assert_eq!(posterior_of(&prior["posterior"]), expected);

    let evidence = json!({"LVSI": "yes", "Lymphadenopathy": "yes"});
    let (_, base) = http(&server, "POST", "/predict", &json!({ "evidence": evidence }).to_string());
    let named = serde_json::from_value(evidence.clone()).unwrap();
    let lib = bn.posterior_named(&named, "LNM").unwrap();
    for (a, b) in posterior_of(&base["posterior"]).iter().zip(&lib) {
        assert!((a - b).abs() <= 1e-12);
    }

    let alternatives = [json!({"Chemotherapy": "yes"}), json!({"Chemotherapy": "no"})];
    let body = json!({ "evidence": evidence, "interventions": alternatives });
    let (status, whatif) = http(&server, "POST", "/whatif", &body.to_string());
    assert_eq!(status, 200);
    assert_eq!(whatif["kind"], "conditional");
    let rows = whatif["alternatives"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let mut separate = Vec::new();
    for (row, alt) in rows.iter().zip(&alternatives) {
        let mut merged = evidence.clone();
        merged.as_object_mut().unwrap().extend(alt.as_object().unwrap().clone());
        let (_, p) = http(&server, "POST", "/predict", &json!({ "evidence": merged }).to_string());
        let p = posterior_of(&p["posterior"]);
        assert_eq!(posterior_of(&row["posterior"]), p);
        let delta: Vec<f64> = p.iter().zip(posterior_of(&base["posterior"])).map(|(a, b)| a - b).collect();
        assert_eq!(posterior_of(&row["delta"]), delta);
        separate.push(p);
    }
    let diff = separate[0][1] - separate[1][1];
    let from_whatif = posterior_of(&rows[0]["posterior"])[1] - posterior_of(&rows[1]["posterior"])[1];
    assert_eq!(diff, from_whatif);

    let (status, err) = http(&server, "POST", "/predict", r#"{"evidence": {"LNM": "yes"}}"#);
    assert_eq!(status, 400);
    assert!(err["message"].as_str().unwrap().contains("target"));
    let (status, _) = http(&server, "POST", "/predict", r#"{"evidence": {"LVSI": "sometimes"}}"#);
    assert_eq!(status, 400);
    let (status, _) = http(&server, "POST", "/predict", "not json");
    assert_eq!(status, 400);
    let (status, _) = http(&server, "POST", "/whatif", r#"{"evidence": {}, "interventions": []}"#);
    assert_eq!(status, 400);
}

#[test]
fn serve_reports_zero_probability_evidence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // C is impossible in state hi when B is lo
    let v = |n: &str| Variable::with_states(n, &["lo", "hi"]).unwrap();
    let dag = Dag::new(vec!["A".into(), "B".into(), "C".into()], &[("A", "B"), ("B", "C")]).unwrap();
    let cpts = vec![
        Cpt::new(0, 2, vec![], vec![], vec![0.5, 0.5]).unwrap(),
        Cpt::new(1, 2, vec![0], vec![2], vec![0.7, 0.3, 0.2, 0.8]).unwrap(),
        Cpt::new(2, 2, vec![1], vec![2], vec![1.0, 0.0, 0.4, 0.6]).unwrap(),
    ];
    let bn = CausalBayesianNetwork::new(dag, vec![v("A"), v("B"), v("C")], cpts).unwrap();
    std::fs::write(d.join("m.json"), bn.to_model_json()).unwrap();
    let server = start_server(d, &["--model", "m.json", "--target", "A"]);

    let (status, err) = http(&server, "POST", "/predict", r#"{"evidence": {"B": "lo", "C": "hi"}}"#);
    assert_eq!(status, 422);
    assert_eq!(err["conflict"], json!({"variable": "C", "state": "hi"}));
    assert!(err["message"].as_str().unwrap().contains("B=lo"));

    let body = r#"{"evidence": {"C": "hi"}, "interventions": [{"B": "hi"}, {"B": "lo"}]}"#;
    let (status, err) = http(&server, "POST", "/whatif", body);
    assert_eq!(status, 422);
    assert_eq!(err["scenario"], "alternative 1");
}
