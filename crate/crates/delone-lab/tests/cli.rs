use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_delone-lab"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run_into(config: &Path, out: &Path) -> Output {
    bin().arg("run").arg(config).arg("--out").arg(out).output().unwrap()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn lists_all_fourteen_experiments() {
    let o = bin().arg("list-experiments").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(
        names,
        [
            "generate",
            "metric",
            "frequencies",
            "diffuse",
            "semigroup",
            "equilibrium",
            "strongfeller",
            "ito",
            "spectrum",
            "evolve",
            "koopman-scan",
            "hodge",
            "liouville",
            "sobolev"
        ]
    );
}

#[test]
fn fibonacci_frequencies_have_the_inverse_golden_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(&fixture("fib_freq.json"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("frequencies.csv")).unwrap();
    let row = csv
        .lines()
        .find(|l| l.starts_with("a,1.0000000000000000e5,"))
        .expect("row for `a` at the largest window");
    let per_tile: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    let inv_phi = 2.0 / (1.0 + 5f64.sqrt());
    assert!((per_tile - inv_phi).abs() < 1e-4, "{row}");
    assert!(csv.starts_with("# delone-lab "));
    assert!(csv.contains("seed=none"));
}

#[test]
fn manifest_records_hash_version_seed_and_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(&fixture("fib_diffuse.json"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "ok");
    assert_eq!(m["seed"], 20240611);
    assert_eq!(m["experiment"], "diffuse");
    assert!(m["code_version"].as_str().unwrap().contains(env!("CARGO_PKG_VERSION")));
    assert_eq!(m["truncation"]["paths"], 200);
    let hash = m["config_sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    let listed: Vec<&str> = m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap())
        .collect();
    assert_eq!(listed, ["paths.csv", "paths_summary.json"]);
}

#[test]
fn shipped_fixtures_rerun_byte_identically() {
    let mut names: Vec<String> = fs::read_dir(fixture(""))
        .unwrap()
        .filter_map(|e| {
            let n = e.unwrap().file_name().to_string_lossy().into_owned();
            (n.ends_with(".json") && !n.starts_with("divergent")).then_some(n)
        })
        .collect();
    names.sort();
    assert_eq!(names.len(), 15);
    for name in names {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for d in [&a, &b] {
            let o = run_into(&fixture(&name), d.path());
            assert!(o.status.success(), "{name}: {}", stderr(&o));
        }
        let (fa, fb) = (files(a.path()), files(b.path()));
        assert!(fa.len() >= 2, "{name}");
        assert_eq!(fa, fb, "{name} differs between runs");
    }
}

#[test]
fn missing_seed_on_a_diffuse_run_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("fib_diffuse.json")).unwrap();
    let stripped: String = text
        .lines()
        .filter(|l| !l.contains("\"seed\""))
        .collect::<Vec<_>>()
        .join("\n");
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, stripped).unwrap();
    for cmd in ["validate", "run"] {
        let o = bin().arg(cmd).arg(&cfg).output().unwrap();
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        assert!(stderr(&o).contains("seed"), "{}", stderr(&o));
    }
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_keys_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("fib_freq.json")).unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, text.replace("\"windows\"", "\"window_count\": 3, \"windows\"")).unwrap();
    let o = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("window_count") && err.contains("line 4"), "{err}");
}

#[test]
fn semantic_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("fib_freq.json")).unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, text.replace("\"aba\"", "\"abz\"")).unwrap();
    let o = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("parameters.clusters[4]"), "{}", stderr(&o));
}

#[test]
fn divergence_exits_3_with_a_partial_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(&fixture("divergent_semigroup.json"), dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "diverged");
    assert!(m["diagnostic"].as_str().unwrap().contains("inf"));
}

#[test]
fn output_dir_is_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spec.json");
    fs::copy(fixture("fib_hodge.json"), &cfg).unwrap();
    let o = bin()
        .arg("run")
        .arg(&cfg)
        .current_dir(std::env::temp_dir())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out/hodge");
    let hodge: serde_json::Value = serde_json::from_slice(&fs::read(out.join("hodge.json")).unwrap()).unwrap();
    assert_eq!(hodge["result"]["dimension"], 1);
    assert_eq!(hodge["provenance"]["truncation"]["potential_modes"], 10);
}

#[test]
fn bad_thread_cap_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        bin()
            .env("DELONE_LAB_THREADS", threads)
            .arg("run")
            .arg(fixture("fib_hodge.json"))
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap()
    };
    assert_eq!(run("zero").status.code(), Some(2));
    let o = run("1");
    assert!(o.status.success(), "{}", stderr(&o));
}
