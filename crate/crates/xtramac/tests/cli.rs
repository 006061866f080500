//! End-to-end runs of the `xtramac` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use xtramac::core::gemv::{roofline_gemv, GemvConfig, PerfReport};
use xtramac::core::FormatRegistry;
use xtramac::formats_file::FormatsFile;
use xtramac::schema;

fn xtramac(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xtramac"))
        .current_dir(dir)
        .env_remove("XTRAMAC_CONFIG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(o: &Output) -> Value {
    assert_eq!(code(o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(o)).expect("valid JSON");
    assert_eq!(v["schema_version"], 1);
    v
}

fn gen(dir: &Path, dtype: &str, count: &str, seed: &str, out: &str) {
    let o = xtramac(dir, &["mac", "gen", "--dtype", dtype, "--count", count, "--seed", seed, "-o", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn generated_vectors_check_clean_in_both_modes() {
    let tmp = TempDir::new().unwrap();
    for dtype in ["fp8xfp8", "int8xint8", "fp4xbf16", "bf16xbf16"] {
        gen(tmp.path(), dtype, "300", "11", "v.txt");
        for mode in ["pipeline", "oracle"] {
            let o = xtramac(tmp.path(), &["mac", "check", "--vectors", "v.txt", "--mode", mode, "--json"]);
            let v = json(&o);
            assert_eq!((v["vectors"].as_u64(), v["mismatches"].as_u64()), (Some(300), Some(0)));
        }
    }
}

#[test]
fn a_corrupted_result_is_one_mismatch_and_exit_1() {
    let tmp = TempDir::new().unwrap();
    gen(tmp.path(), "fp8xfp8", "50", "3", "v.txt");
    let path = tmp.path().join("v.txt");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let victim = lines.iter().position(|l| !l.starts_with('#')).unwrap() + 7;
    let mut fields: Vec<String> = lines[victim].split(' ').map(String::from).collect();
    let p = u32::from_str_radix(&fields[4], 16).unwrap() ^ 1;
    fields[4] = format!("{p:04x}");
    lines[victim] = fields.join(" ");
    fs::write(&path, lines.join("\n") + "\n").unwrap();

    let o = xtramac(tmp.path(), &["mac", "check", "--vectors", "v.txt", "--json"]);
    assert_eq!(code(&o), 1);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["mismatches"], 1);
    assert_eq!(v["passed"], 49);
}

#[test]
fn an_empty_vector_file_passes() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("empty.txt"), "").unwrap();
    let o = xtramac(tmp.path(), &["mac", "check", "--vectors", "empty.txt"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn malformed_vector_file_is_an_error() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("bad.txt"), "#xtramac-vectors v1\nfp8xfp8 1 2 3\n").unwrap();
    let o = xtramac(tmp.path(), &["mac", "check", "--vectors", "bad.txt"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn generation_is_deterministic_per_seed() {
    let tmp = TempDir::new().unwrap();
    let run = |seed: &str| stdout(&xtramac(tmp.path(), &["mac", "gen", "--dtype", "int4xbf16", "--count", "64", "--seed", seed]));
    assert_eq!(run("5"), run("5"));
    assert_ne!(run("5"), run("6"));
}

#[test]
fn exhaustive_generation_of_16_bit_operands_is_refused() {
    let tmp = TempDir::new().unwrap();
    let o = xtramac(tmp.path(), &["mac", "gen", "--dtype", "bf16xbf16", "--exhaustive"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn temporal_bf16_utilization() {
    let tmp = TempDir::new().unwrap();
    let args = ["util", "report", "--arch", "temporal", "--dtype", "bf16xbf16"];
    assert!(stdout(&xtramac(tmp.path(), &args)).contains("8.9%"));
    let mut with_json = args.to_vec();
    with_json.push("--json");
    let v = json(&xtramac(tmp.path(), &with_json));
    let u = v["mean_utilization"].as_f64().unwrap();
    assert!((u * 100.0 - 8.9).abs() < 0.05);
}

#[test]
fn fp4_plan_has_four_lanes() {
    let tmp = TempDir::new().unwrap();
    let v = json(&xtramac(tmp.path(), &["pack", "plan", "--dtype", "fp4xfp4", "--json"]));
    assert_eq!(v["lanes"], 4);
    assert_eq!(v["pattern"], "cross");
}

#[test]
fn shifter_cost_at_width_8() {
    let tmp = TempDir::new().unwrap();
    let v = json(&xtramac(tmp.path(), &["util", "cost", "--kind", "fp-shifter", "--width", "8", "--json"]));
    assert_eq!(v["cost"].as_f64(), Some(24.0));
}

#[test]
fn json_outputs_read_back_into_library_types() {
    let tmp = TempDir::new().unwrap();
    let formats: FormatsFile = schema::from_json(&stdout(&xtramac(tmp.path(), &["mac", "formats"]))).unwrap();
    assert_eq!(formats.registry().unwrap(), FormatRegistry::default());

    let o = xtramac(tmp.path(), &["gemv", "roofline", "--m", "4096", "--k", "4096", "--json"]);
    let report: PerfReport = schema::from_json(&stdout(&o)).unwrap();
    assert_eq!(report, roofline_gemv(&GemvConfig::u55c(), 4096, 4096).unwrap());
}

#[test]
fn usage_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&xtramac(tmp.path(), &["mac", "gen"])), 2);
    assert_eq!(code(&xtramac(tmp.path(), &["pack", "plan", "--dtype", "fp9xfp9"])), 2);
    assert_eq!(code(&xtramac(tmp.path(), &["frobnicate"])), 2);
}

#[test]
fn configuration_is_discovered_from_env_then_cwd() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    gen(dir, "fp8xfp8", "20", "1", "v.txt");
    fs::write(dir.join("deep.json"), r#"{"schema_version": 1, "stage_depths": [2, 2, 2, 2]}"#).unwrap();
    let traced = Command::new(env!("CARGO_BIN_EXE_xtramac"))
        .current_dir(dir)
        .env("XTRAMAC_CONFIG", "deep.json")
        .args(["mac", "run", "--vectors", "v.txt", "--trace"])
        .output()
        .unwrap();
    assert_eq!(code(&traced), 0);
    let shallow = xtramac(dir, &["mac", "run", "--vectors", "v.txt", "--trace"]);
    assert!(stdout(&traced).lines().count() > stdout(&shallow).lines().count());

    // A config in the working directory is read when nothing else is given.
    fs::write(dir.join("xtramac.json"), r#"{"schema_version": 1, "bogus": true}"#).unwrap();
    let o = xtramac(dir, &["util", "density"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}
