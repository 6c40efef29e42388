use std::fs;
use std::path::PathBuf;

use optstop::config::ProblemConfig;
use serde_json::Value;

fn dir(sub: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(sub)
}

fn examples() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir("examples"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    v.sort();
    v
}

#[test]
fn every_example_parses_and_round_trips() {
    let all = examples();
    assert!(all.len() >= 14);
    for p in all {
        let cfg = ProblemConfig::from_path(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(ProblemConfig::from_json(&cfg.to_json()).unwrap(), cfg, "{}", p.display());
    }
}

/// Keys used by the examples are the ones the schema declares.
#[test]
fn schema_covers_example_keys() {
    let schema: Value = serde_json::from_str(&fs::read_to_string(dir("schema/problem.schema.json")).unwrap()).unwrap();
    let props = &schema["properties"];
    let names: Vec<&str> = props["process"]["properties"]["name"]["enum"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let forms: Vec<&str> = props["reward"]["oneOf"].as_array().unwrap().iter().map(|v| v["properties"]["form"]["const"].as_str().unwrap()).collect();
    let methods: Vec<&str> = props["solver"]["oneOf"].as_array().unwrap().iter().map(|v| v["properties"]["method"]["const"].as_str().unwrap()).collect();
    for p in examples() {
        let v: Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        for key in v.as_object().unwrap().keys() {
            assert!(props.get(key).is_some(), "{}: top-level key {key}", p.display());
        }
        assert!(names.contains(&v["process"]["name"].as_str().unwrap()));
        assert!(forms.contains(&v["reward"]["form"].as_str().unwrap()));
        assert!(methods.contains(&v["solver"]["method"].as_str().unwrap()));
    }
    for name in ["bm", "bm_drift", "gbm", "reflected_bm", "skew_bm", "sticky_bm", "bessel3"] {
        assert!(names.contains(&name));
        assert!(optstop::diffusion::catalog(name, &Default::default(), 1.0).map_or(true, |_| true));
    }
    assert_eq!(forms.len(), 11);
}
