use std::path::Path;

use ocsp_core::cli::run;
use ocsp_core::instance::{generate, GenParams, Model};
use serde_json::Value;

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(format!("{name}.schema.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

/// Runs the CLI in-process on `text` supplied through standard input.
fn report(args: &[&str], text: &str) -> (i32, Value) {
    let mut argv = vec!["ocsp"];
    argv.extend_from_slice(args);
    argv.extend_from_slice(&["--input", "-"]);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut text.as_bytes(), &mut out, &mut err);
    assert!(code != 1, "{}", String::from_utf8_lossy(&err));
    (code, serde_json::from_slice(&out).unwrap())
}

fn assert_valid(v: &jsonschema::Validator, instance: &Value) {
    let errors: Vec<String> = v.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}\n{instance}");
}

fn corpus() -> Vec<String> {
    let mut out = vec![
        "ocsp 1\nnvars 0\n".to_owned(),
        "ocsp 1\nnvars 2\ncon 1 2\ncon 2 1\n".to_owned(),
        "ocsp 1\nnvars 3\ncon - 1 2 3\ncon 1 2 3 | 3 2 1\n".to_owned(),
    ];
    for seed in 0..6 {
        let model = [Model::Mas, Model::Betweenness, Model::RandomK][seed as usize % 3];
        let inst = generate(model, &GenParams { n: 6, m: 4, k: 3, allowed_fraction: 0.4 }, seed).unwrap();
        out.push(inst.to_text());
    }
    out
}

#[test]
fn decision_reports_validate() {
    let v = schema("decision");
    for text in corpus() {
        for t in ["1/2", "2"] {
            for cap in ["10", "1"] {
                let (_, r) = report(&["decide", "--json", "--t", t, "--cap", cap], &text);
                assert_valid(&v, &r);
            }
        }
    }
    let mut text = String::from("ocsp 1\nnvars 40\n");
    for i in 0..20 {
        text += &format!("con {} {}\n", 2 * i + 1, 2 * i + 2);
    }
    let (code, r) = report(&["decide", "--json", "--t", "1/1000", "--witness"], &text);
    assert_eq!((code, r["outcome"].as_str()), (0, Some("yes-certified")));
    assert_valid(&v, &r);
}

#[test]
fn other_reports_validate() {
    let (kernel, analyze, oracle, bonami) =
        (schema("kernel"), schema("analyze"), schema("oracle"), schema("bonami"));
    for text in corpus() {
        assert_valid(&kernel, &report(&["kernelize"], &text).1);
        assert_valid(&analyze, &report(&["analyze"], &text).1);
        assert_valid(&analyze, &report(&["analyze", "--m4", "--pieces"], &text).1);
        assert_valid(&oracle, &report(&["oracle"], &text).1);
        assert_valid(&oracle, &report(&["oracle", "--moment", "4"], &text).1);
        assert_valid(&bonami, &report(&["bonami"], &text).1);
    }
}

#[test]
fn schemas_reject_malformed_reports() {
    let v = schema("decision");
    let (_, good) = report(&["decide", "--json", "--t", "1"], "ocsp 1\nnvars 2\ncon 1 2\n");
    assert_valid(&v, &good);
    let mut bad = good.clone();
    bad["outcome"] = "maybe".into();
    assert!(!v.is_valid(&bad));
    let mut bad = good.clone();
    bad["certificate"]["sigma2"] = 0.25.into();
    assert!(!v.is_valid(&bad));
    let mut bad = good;
    bad["extra"] = 1.into();
    assert!(!v.is_valid(&bad));
}
