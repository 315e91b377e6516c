use std::path::Path;
use std::process::{Command, Output};

use serde_json::{Map, Value};

fn rig(args: &[&str]) -> Output {
    rig_env(args, None)
}

fn rig_env(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rig"));
    cmd.args(args).env_remove("RIG_SEED");
    if let Some(s) = seed {
        cmd.env("RIG_SEED", s);
    }
    cmd.output().expect("spawn rig")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "rig failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut full = args.to_vec();
    full.extend(["--format", "json"]);
    let value: Value = serde_json::from_str(&stdout(&rig(&full))).unwrap();
    validate(&value);
    value
}

fn header(text: &str) -> &str {
    text.lines().next().unwrap()
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("{key} missing in {v}"))
}

// A validator for the subset of JSON Schema used by the shipped schema file.
struct Schema {
    root: Value,
}

impl Schema {
    fn load() -> Schema {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/output.schema.json");
        Schema { root: serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap() }
    }

    fn resolve<'a>(&'a self, r: &str) -> &'a Value {
        let name = r.strip_prefix("#/$defs/").unwrap_or_else(|| panic!("unsupported ref {r}"));
        &self.root["$defs"][name]
    }

    fn errors(&self, schema: &Value, v: &Value, at: &str) -> Vec<String> {
        let mut out = Vec::new();
        let s: &Map<String, Value> = schema.as_object().expect("schema object");
        for (key, rule) in s {
            match key.as_str() {
                "$ref" => out.extend(self.errors(self.resolve(rule.as_str().unwrap()), v, at)),
                "type" => {
                    let names: Vec<&str> = match rule {
                        Value::String(t) => vec![t],
                        Value::Array(ts) => ts.iter().map(|t| t.as_str().unwrap()).collect(),
                        _ => panic!("bad type rule"),
                    };
                    if !names.iter().any(|t| type_matches(t, v)) {
                        out.push(format!("{at}: {v} is not {names:?}"));
                    }
                }
                "const" if v != rule => out.push(format!("{at}: {v} != {rule}")),
                "enum" if !rule.as_array().unwrap().contains(v) => out.push(format!("{at}: {v} not in {rule}")),
                "minimum" => {
                    if let Some(x) = v.as_f64() {
                        if x < rule.as_f64().unwrap() {
                            out.push(format!("{at}: {x} < {rule}"));
                        }
                    }
                }
                "maximum" => {
                    if let Some(x) = v.as_f64() {
                        if x > rule.as_f64().unwrap() {
                            out.push(format!("{at}: {x} > {rule}"));
                        }
                    }
                }
                "required" => {
                    if let Some(obj) = v.as_object() {
                        for k in rule.as_array().unwrap() {
                            if !obj.contains_key(k.as_str().unwrap()) {
                                out.push(format!("{at}: missing {k}"));
                            }
                        }
                    }
                }
                "properties" => {
                    if let Some(obj) = v.as_object() {
                        for (k, sub) in rule.as_object().unwrap() {
                            if let Some(x) = obj.get(k) {
                                out.extend(self.errors(sub, x, &format!("{at}/{k}")));
                            }
                        }
                    }
                }
                "additionalProperties" => {
                    assert_eq!(rule, &Value::Bool(false));
                    let known = s.get("properties").and_then(Value::as_object);
                    if let Some(obj) = v.as_object() {
                        for k in obj.keys() {
                            if !known.is_some_and(|p| p.contains_key(k)) {
                                out.push(format!("{at}: unexpected {k}"));
                            }
                        }
                    }
                }
                "items" => {
                    if let Some(xs) = v.as_array() {
                        for (i, x) in xs.iter().enumerate() {
                            out.extend(self.errors(rule, x, &format!("{at}/{i}")));
                        }
                    }
                }
                "minItems" => {
                    if let Some(xs) = v.as_array() {
                        if (xs.len() as u64) < rule.as_u64().unwrap() {
                            out.push(format!("{at}: fewer than {rule} items"));
                        }
                    }
                }
                "allOf" => {
                    for sub in rule.as_array().unwrap() {
                        out.extend(self.errors(sub, v, at));
                    }
                }
                "oneOf" => {
                    let hits = rule.as_array().unwrap().iter().filter(|sub| self.errors(sub, v, at).is_empty()).count();
                    if hits != 1 {
                        out.push(format!("{at}: {hits} oneOf branches match"));
                    }
                }
                "$schema" | "$id" | "$defs" | "title" | "description" | "const" | "enum" => {}
                other => panic!("validator does not know keyword {other}"),
            }
        }
        out
    }
}

fn type_matches(t: &str, v: &Value) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        _ => panic!("unknown type {t}"),
    }
}

fn validate(v: &Value) {
    let schema = Schema::load();
    let errors = schema.errors(&schema.root, v, "");
    assert!(errors.is_empty(), "schema violations: {errors:?}\n{v}");
}

#[test]
fn validator_rejects_bad_documents() {
    let schema = Schema::load();
    let good = json(&["moments", "--n", "4", "--m", "2", "--p", "0.3"]);
    let mut bad = good.clone();
    bad["command"] = Value::from("nope");
    assert!(!schema.errors(&schema.root, &bad, "").is_empty());
    let mut bad = good.clone();
    bad.as_object_mut().unwrap().remove("variance");
    assert!(!schema.errors(&schema.root, &bad, "").is_empty());
    let mut bad = good;
    bad["p"] = Value::from(1.5);
    assert!(!schema.errors(&schema.root, &bad, "").is_empty());
}

#[test]
fn moments_examples() {
    let v = json(&["moments", "--n", "3", "--m", "1", "--p", "0.5"]);
    assert_eq!(v["variance"], Value::from(0.9375));
    let text = stdout(&rig(&["moments", "--n", "3", "--m", "1", "--p", "0.5", "--format", "json"]));
    assert!(text.contains("\"variance\": 0.9375"));
    let csv = stdout(&rig(&["moments", "--n", "3", "--m", "1", "--p", "0.5", "--format", "csv"]));
    assert_eq!(header(&csv), "n,m,p,mean,variance,term_pairwise,term_cherry");
}

#[test]
fn invalid_parameters_exit_2() {
    let out = rig(&["moments", "--n", "3", "--m", "1", "--p", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains('p'));
    assert_eq!(rig(&["prob", "--graph", "3;0-9", "--m", "1", "--p", "0.5"]).status.code(), Some(2));
    assert_eq!(rig(&["prob", "--graph", "garbage", "--m", "1", "--p", "0.5"]).status.code(), Some(2));
    assert_eq!(rig(&["exact", "--n", "0", "--m", "1", "--p", "0.5"]).status.code(), Some(2));
}

#[test]
fn prob_examples() {
    let v = json(&["prob", "--graph", "3;0-1,1-2", "--m", "1", "--p", "0.5", "--complement"]);
    assert!((num(&v, "probability") - 0.625).abs() < 1e-15);
    let v = json(&["prob", "--graph", "2;0-1", "--m", "2", "--p", "0.5"]);
    assert!((num(&v, "probability") - 0.4375).abs() < 1e-15);
    let v = json(&["prob", "--graph", "3;0-1,1-2", "--m", "2", "--p", "0.5", "--plus", "[0,1],[1,2]"]);
    assert_eq!(v["kind"], "cover");
    assert!(num(&v, "probability") > 0.0);
    let csv = stdout(&rig(&["prob", "--graph", "2;0-1", "--m", "2", "--p", "0.5", "--format", "csv"]));
    assert_eq!(header(&csv), "graph,m,p,kind,probability");
}

#[test]
fn norms_triangle_and_budget() {
    let v = json(&["norms", "--m", "4", "--p", "0.25"]);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for key in ["n20", "n21", "n10", "n11", "n_mix"] {
        let xs: Vec<f64> = rows.iter().map(|r| num(r, key)).collect();
        for x in &xs {
            assert!((x - xs[0]).abs() <= 1e-10 * xs[0].abs().max(1e-4), "{key}: {xs:?}");
        }
    }
    let v = json(&["norms", "--m", "3", "--p", "0"]);
    for row in v["rows"].as_array().unwrap() {
        for key in ["n20", "n21", "n10", "n11", "n_mix"] {
            assert_eq!(num(row, key), 0.0);
        }
    }
    let out = rig(&["norms", "--m", "9", "--p", "0.3", "--method", "brute"]);
    assert_eq!(out.status.code(), Some(3));
    let csv = stdout(&rig(&["norms", "--m", "2", "--p", "0.3", "--format", "csv"]));
    assert_eq!(header(&csv), "m,p,method,n20,n21,n10,n11,n_mix");
}

#[test]
fn bounds_and_sample_validate() {
    let v = json(&["bounds", "--n", "1000", "--m", "50", "--p", "0.1"]);
    assert!(num(&v, "bracket_main_quarter") > 0.0);
    json(&["bounds", "--n", "100000", "--m", "2", "--p", "0.5"]);
    json(&["bounds", "--n", "50", "--m", "1000", "--p", "0.95"]);
    let v = json(&["sample", "--n", "30", "--m", "4", "--p", "0.3", "--seed", "9"]);
    assert_eq!(v["edge_counts"].as_array().unwrap().len(), 10);
    let csv = stdout(&rig(&["sample", "--n", "30", "--m", "4", "--p", "0.3", "--samples", "3", "--format", "csv"]));
    assert_eq!(header(&csv), "replicate,edge_count");
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn mc_is_byte_identical_for_a_fixed_seed() {
    let args = ["mc", "--n", "40", "--m", "5", "--p", "0.2", "--samples", "3000", "--seed", "17", "--format", "json"];
    let a = stdout(&rig(&args));
    assert_eq!(a, stdout(&rig(&args)));
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "3"]);
    assert_eq!(a, stdout(&rig(&threaded)));
    let mut other = args.to_vec();
    other[10] = "18";
    assert_ne!(a, stdout(&rig(&other)));
    validate(&serde_json::from_str(&a).unwrap());
}

#[test]
fn seed_falls_back_to_environment() {
    let args = ["sample", "--n", "30", "--m", "4", "--p", "0.3", "--format", "csv"];
    let env = stdout(&rig_env(&args, Some("42")));
    let mut explicit = args.to_vec();
    explicit.extend(["--seed", "42"]);
    assert_eq!(env, stdout(&rig(&explicit)));
    assert_eq!(env, stdout(&rig_env(&explicit, Some("7"))));
    assert_eq!(rig_env(&args, Some("x")).status.code(), Some(2));
}

#[test]
fn config_file_and_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    std::fs::write(&config, "# moments run\nn = 3\nm = 1\np = 0.5\nformat = csv\n").unwrap();
    let config = config.to_str().unwrap();
    let direct = stdout(&rig(&["moments", "--n", "3", "--m", "1", "--p", "0.5", "--format", "csv"]));
    assert_eq!(stdout(&rig(&["moments", "--config", config])), direct);
    let overridden = stdout(&rig(&["moments", "--config", config, "--p", "0.25"]));
    assert!(overridden.lines().nth(1).unwrap().starts_with("3,1,0.25,"));

    let out = dir.path().join("moments.csv");
    let printed = stdout(&rig(&["moments", "--config", config, "--out", out.to_str().unwrap()]));
    assert!(printed.is_empty());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), direct);

    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "colour = blue\n").unwrap();
    assert_eq!(rig(&["moments", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn sweep_csv_columns_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("curve.csv");
    std::fs::write(&curve, "n,m,p\n4,3,0.3\n5,3,0.3\n6,3,0.3\n8,3,0.3\n").unwrap();
    let curve = curve.to_str().unwrap();
    let csv = stdout(&rig(&["sweep", "--curve", curve, "--samples", "300", "--seed", "5"]));
    let columns: Vec<&str> = header(&csv).split(',').collect();
    for c in ["n", "m", "p", "d_K", "d_K_radius", "d_W", "bracket_quarter", "bracket_half", "bracket_k14", "regime"] {
        assert!(columns.contains(&c), "missing column {c}");
    }
    assert_eq!(csv.lines().count(), 5);
    let v = json(&["sweep", "--curve", curve, "--samples", "300", "--seed", "5"]);
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn mc_agrees_with_exact_within_radius() {
    let exact = json(&["exact", "--n", "5", "--m", "8", "--p", "0.3"]);
    let mc = json(&["mc", "--n", "5", "--m", "8", "--p", "0.3", "--samples", "40000", "--seed", "3"]);
    assert_eq!(exact["exact"], true);
    assert_eq!(mc["exact"], false);
    assert!((num(&mc, "d_K") - num(&exact, "d_K")).abs() <= num(&mc, "d_K_radius"));
    assert!((num(&mc, "d_W") - num(&exact, "d_W")).abs() <= num(&mc, "d_W_radius"));
}
