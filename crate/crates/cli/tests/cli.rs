use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tvb_cli::ReportDocument;

fn tvb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvb"))
        .args(args)
        .env_remove("TVB_TOL")
        .output()
        .expect("tvb runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = tvb(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_str(&stdout(&out)).unwrap()
}

fn predicate<'a>(report: &'a Value, name: &str) -> &'a Value {
    &report[name]
}

fn summary_count(doc: &Value, name: &str) -> u64 {
    doc["summary"]["predicates"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["name"] == name)
        .unwrap_or_else(|| panic!("no summary for {name}"))["holdsAt"]
        .as_u64()
        .unwrap()
}

const HERMITIAN_FILE: &str = r#"
# a Hermitian metric that is not Bochner-flat
name = "tilted"
dim = 4
g[1][1] = "2 + x1^2"
g[2][2] = "2 + x1^2"
g[1][3] = "0.3*x2"     # mirrored into g[3][1]
g[2][4] = "0.3*x2"
g[3][3] = 3
g[4][4] = 3
J[1][2] = -1
J[2][1] = 1
J[3][4] = -1
J[4][3] = 1
"#;

const HALF_SPACE_FILE: &str = r#"
name = "half-space"
dim = 4
domain = "x4 > 0"
probe = 0, 0, 0, 1
g[1][1] = "1/x4^2"
g[2][2] = "1/x4^2"
g[3][3] = "1/x4^2"
g[4][4] = "1/x4^2"
J[2][1] = 1
J[1][2] = -1
J[4][3] = 1
J[3][4] = -1
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn report_on_example3_gives_its_scalar_curvatures() {
    let doc = ok_json(&["report", "--manifold", "example3", "--point", "1.3,0.2,-0.4,0.7"]);
    let r = &doc["report"];
    assert!((r["tau"].as_f64().unwrap() + 6.0).abs() < 1e-8);
    assert!((r["tauStar"].as_f64().unwrap() + 2.0).abs() < 1e-8);
    assert_eq!(predicate(r, "almostKahler")["holds"], true);
    assert_eq!(predicate(r, "hermitian")["holds"], false);
    assert_eq!(predicate(r, "bochnerFlat")["holds"], true);
    assert!(doc["claims"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn report_on_flat_space_has_zero_residuals() {
    let doc = ok_json(&["report", "--manifold", "flat", "--point", "0.3,-1,2,pi"]);
    for name in tvb_core::classify::PREDICATE_NAMES {
        let p = predicate(&doc["report"], name);
        if !p.is_null() {
            assert_eq!(p["residual"].as_f64().unwrap(), 0.0, "{name}");
        }
    }
}

#[test]
fn report_on_example1_is_einstein_and_bochner_flat() {
    let doc = ok_json(&["report", "--manifold", "example1", "--point", "0.2,0.1,-0.3,1.7"]);
    assert_eq!(predicate(&doc["report"], "einstein")["holds"], true);
    assert_eq!(predicate(&doc["report"], "bochnerFlat")["holds"], true);
}

#[test]
fn exit_codes() {
    // outside the domain
    assert_eq!(code(&tvb(&["report", "--manifold", "example1", "--point", "0,0,0,-1"])), 2);
    // grid touching the boundary inside the margin
    assert_eq!(code(&tvb(&["sweep", "--manifold", "example1", "--grid", "0:0:1,0:0:1,0:0:1,0.05:1:2"])), 2);
    // malformed point and grid
    assert_eq!(code(&tvb(&["report", "--manifold", "example1", "--point", "0,0,(1"])), 3);
    assert_eq!(code(&tvb(&["sweep", "--manifold", "example1", "--grid", "0:1"])), 3);
    // bad expression in a catalog parameter
    assert_eq!(code(&tvb(&["report", "--manifold", "example4", "--u", "x1 +"])), 3);
    // unknown name and bad usage
    assert_eq!(code(&tvb(&["report", "--manifold", "no-such-model"])), 1);
    assert_eq!(code(&tvb(&["report"])), 1);
    assert_eq!(code(&tvb(&["sweep", "--manifold", "example3", "--threads", "0"])), 1);
    assert_eq!(code(&tvb(&["--version"])), 0);
}

#[test]
fn json_output_is_byte_identical_across_runs_and_thread_counts() {
    let a = tvb(&["sweep", "--manifold", "example3", "--threads", "1"]);
    let b = tvb(&["sweep", "--manifold", "example3", "--threads", "4"]);
    let c = tvb(&["sweep", "--manifold", "example3"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn report_json_round_trips() {
    let out = tvb(&["report", "--manifold", "example4", "--u", "x1^2 - x2^2", "--point", "0.3,0.1,-0.2,0.4", "--tensors"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let doc: ReportDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(doc.schema_version, 1);
    assert!(doc.tensors.is_some());
    let again = serde_json::to_string_pretty(&doc).unwrap() + "\n";
    assert_eq!(again, text);
    let back: ReportDocument = serde_json::from_str(&again).unwrap();
    assert_eq!(back, doc);
}

#[test]
fn csv_has_a_header_and_one_row_per_point() {
    let out = tvb(&["sweep", "--manifold", "example3", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rows.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, tvb_cli::format::csv_header());
    let records: Vec<_> = rows.records().collect::<Result<_, _>>().unwrap();
    assert_eq!(records.len(), 81);
    assert!(records.iter().all(|r| r.len() == header.len()));
    let tau = header.iter().position(|h| h == "tau").unwrap();
    for r in &records {
        assert!((r[tau].parse::<f64>().unwrap() + 6.0).abs() < 1e-8);
    }
}

#[test]
fn sweep_of_example3_is_bochner_flat_everywhere() {
    let doc = ok_json(&["sweep", "--manifold", "example3"]);
    assert_eq!(doc["summary"]["points"], 81);
    assert_eq!(summary_count(&doc, "bochnerFlat"), 81);
    assert_eq!(summary_count(&doc, "hermitian"), 0);
    assert_eq!(doc["reports"].as_array().unwrap().len(), 81);
}

#[test]
fn example4_is_weakly_star_einstein_and_einstein_only_for_u_linear() {
    let doc = ok_json(&["sweep", "--manifold", "example4", "--u", "x1^2 - x2^2"]);
    let n = doc["summary"]["points"].as_u64().unwrap();
    assert_eq!(n, 81);
    assert_eq!(summary_count(&doc, "weaklyStarEinstein"), n);
    assert_eq!(summary_count(&doc, "bochnerFlat"), n);
    assert_eq!(summary_count(&doc, "einstein"), 0);

    let linear = ok_json(&["sweep", "--manifold", "example4"]);
    assert_eq!(summary_count(&linear, "einstein"), 81);
}

#[test]
fn audit_passes_on_catalog_charts() {
    for name in ["example1", "example3"] {
        let doc = ok_json(&["audit", "--manifold", name]);
        assert_eq!(doc["passed"], true, "{name}");
        assert!(!doc["audit"]["checks"].as_array().unwrap().is_empty());
    }
    let doc = ok_json(&["audit", "--manifold", "csf2", "--c", "-1"]);
    assert_eq!(doc["passed"], true);
}

#[test]
fn audit_refuses_a_chart_that_is_not_bochner_flat() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "tilted.mf", HERMITIAN_FILE);
    let sweep = ok_json(&["sweep", "--manifold", &path, "--grid", "0:1:2,0.5:1:2,0:0:1,0:0:1"]);
    assert_eq!(sweep["manifold"], "tilted");
    assert_eq!(summary_count(&sweep, "hermitian"), 4);
    assert_eq!(summary_count(&sweep, "bochnerFlat"), 0);
    let out = tvb(&["audit", "--manifold", &path, "--grid", "0:1:2,0.5:1:2,0:0:1,0:0:1"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("audit refused"));
}

#[test]
fn manifold_files_load_and_match_the_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "half.mf", HALF_SPACE_FILE);
    let point = "0.2,0.1,-0.3,1.7";
    let from_file = ok_json(&["report", "--manifold", &path, "--point", point]);
    let from_catalog = ok_json(&["report", "--manifold", "example1", "--point", point]);
    for key in ["tau", "tauStar", "gQuantity", "holSect"] {
        let a = from_file["report"][key].as_f64().unwrap();
        let b = from_catalog["report"][key].as_f64().unwrap();
        assert!((a - b).abs() < 1e-9, "{key}: {a} vs {b}");
    }
    // default point is the probe
    let probe = ok_json(&["report", "--manifold", &path]);
    assert_eq!(probe["report"]["point"], serde_json::json!([0.0, 0.0, 0.0, 1.0]));
    assert_eq!(code(&tvb(&["sweep", "--manifold", &path])), 1);

    let broken = write(dir.path(), "broken.mf", "dim = 4\ng[1][1] = \"1 +\"\n");
    let out = tvb(&["report", "--manifold", &broken]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let degenerate = write(dir.path(), "degenerate.mf", "dim = 2\ng[1][1] = 1\nJ[2][1] = 1\nJ[1][2] = -1\n");
    assert_eq!(code(&tvb(&["report", "--manifold", &degenerate])), 3);
}

#[test]
fn list_shows_the_whole_catalog() {
    let doc = ok_json(&["list"]);
    let entries = doc["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 7);
    let names: Vec<&str> = entries.iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["example1", "example2", "example3", "example4", "flat", "csf2", "csf3"]);
    let text = stdout(&tvb(&["list", "--format", "text"]));
    assert!(text.contains("csf3 (algebraic)"));
}

#[test]
fn tolerance_comes_from_the_environment() {
    let point = ["report", "--manifold", "example3", "--point", "1,0,0,0"];
    let run = |tol: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_tvb")).args(point).env("TVB_TOL", tol).output().unwrap();
        assert_eq!(code(&out), 0);
        serde_json::from_str::<Value>(&stdout(&out)).unwrap()
    };
    assert_eq!(run("0.001")["tol"], 0.001);
    // a huge tolerance makes the non-Hermitian structure pass as Hermitian
    assert_eq!(predicate(&run("100")["report"], "hermitian")["holds"], true);
    assert_eq!(predicate(&run("1e-8")["report"], "hermitian")["holds"], false);
    // the flag wins over the environment
    let out = Command::new(env!("CARGO_BIN_EXE_tvb"))
        .args(point)
        .args(["--tol", "1e-6"])
        .env("TVB_TOL", "100")
        .output()
        .unwrap();
    assert_eq!(serde_json::from_str::<Value>(&stdout(&out)).unwrap()["tol"], 1e-6);
}

#[test]
fn text_output_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("r.txt");
    let out = tvb(&["report", "--manifold", "example3", "--format", "text", "--out", target.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&target).unwrap();
    assert!(text.contains("tau                  -6"), "{text}");
    assert!(text.contains("bochnerFlat"));
    let audit = stdout(&tvb(&["audit", "--manifold", "example1", "--format", "text"]));
    assert!(audit.ends_with("audit passed\n"));
}
