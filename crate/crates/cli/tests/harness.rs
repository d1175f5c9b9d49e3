use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn talbot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_talbot"))
        .args(args)
        .env_remove("TALBOT_THREADS")
        .output()
        .expect("binary runs")
}

fn write_manifest(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

const QUANTIZE: &str = r#"version = 1
experiment = "quantize"

[grid]
n_modes = 4096

[quantize]
q = [2, 3, 4, 5, 6, 7, 8]
"#;

#[test]
fn quantize_run_passes_every_denominator() {
    let tmp = TempDir::new().unwrap();
    let manifest = write_manifest(tmp.path(), "q.toml", QUANTIZE);
    let out = tmp.path().join("out");
    let status = talbot(&["quantize", "--manifest", &manifest, "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));

    let table = fs::read_to_string(out.join("quantize_discrepancy.csv")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    // φ(q) reduced numerators per denominator.
    assert_eq!(rows.len(), 1 + 2 + 2 + 4 + 2 + 6 + 4);
    for row in rows {
        let d: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!(d < 1e-10, "{row}");
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "passed");
    assert_eq!(summary["gates"][0]["name"], "max_discrepancy");
    assert!(out.join("manifest.resolved.toml").exists());
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let text = r#"version = 1
experiment = "dichotomy"
times = [{ rational = [1, 3] }, { preset = "golden" }]

[grid]
n_modes = 1024

[dichotomy]
resolutions = [512, 1024]
flow = "nonlinear"
min_irrational_decay = 1.0

[solver]
dt = 5e-3
"#;
    let manifest = write_manifest(tmp.path(), "d.toml", text);
    let out = tmp.path().join("out");
    let mut runs = Vec::new();
    for threads in ["1", "2"] {
        let o = talbot(&["dichotomy", "--manifest", &manifest, "--out", out.to_str().unwrap(), "--threads", threads, "--quiet"]);
        assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
        runs.push((csv_files(&out), fs::read(out.join("summary.json")).unwrap()));
        fs::remove_dir_all(&out).unwrap();
    }
    assert_eq!(runs[0].0.len(), 3);
    for ((name, a), (_, b)) in runs[0].0.iter().zip(&runs[1].0) {
        assert!(a == b, "{name} differs between runs");
    }
    assert!(runs[0].1 == runs[1].1, "summary differs between runs");
}

#[test]
fn every_csv_carries_the_manifest_digest() {
    let tmp = TempDir::new().unwrap();
    let text = "version = 1\nexperiment = \"lemma-scan\"\n\n[lemma_scan]\nparams = [[2.0, 0.6]]\nk_range = 16\ntolerance = 1.0\n";
    let manifest = write_manifest(tmp.path(), "l.toml", text);
    let out = tmp.path().join("out");
    let o = talbot(&["lemma-scan", "--manifest", &manifest, "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let resolved = fs::read_to_string(out.join("manifest.resolved.toml")).unwrap();
    let digest = talbot_cli::output::digest(&resolved);
    for (name, bytes) in csv_files(&out) {
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.lines().take_while(|l| l.starts_with('#')).any(|l| l.ends_with(&digest)), "{name}");
    }
}

#[test]
fn validate_normalizes_and_reports() {
    let tmp = TempDir::new().unwrap();
    let manifest = write_manifest(
        tmp.path(),
        "v.toml",
        "version = 1\nexperiment = \"evolve\"\ntimes = [{ rational = [2, 4] }]\n",
    );
    let o = talbot(&["validate", "--manifest", &manifest]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("rational = [1, 2]"), "{stdout}");
    assert!(stdout.contains("n_modes = 4096"), "{stdout}");

    let typo = write_manifest(tmp.path(), "t.toml", "version = 1\nexperiment = \"evolve\"\n[solver]\ndealais = \"none\"\n");
    let o = talbot(&["validate", "--manifest", &typo]);
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8(o.stderr).unwrap();
    assert!(stderr.contains("dealais") && stderr.contains("dealias"), "{stderr}");

    let empty = write_manifest(tmp.path(), "e.toml", "version = 1\ntimes = []\n");
    let o = talbot(&["evolve", "--manifest", &empty, "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("times"));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn solver_abort_keeps_partial_artifacts() {
    let tmp = TempDir::new().unwrap();
    // A huge amplitude makes the pointwise phase overflow.
    let text = r#"version = 1
experiment = "evolve"
times = [{ real = 0.01 }]

[grid]
n_modes = 64

[datum]
kind = "modes"
modes = [[1, 1e160, 0.0]]
"#;
    let manifest = write_manifest(tmp.path(), "b.toml", text);
    let out = tmp.path().join("out");
    let o = talbot(&["evolve", "--manifest", &manifest, "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "aborted");
    assert_eq!(summary["partial"], true);
    let log = fs::read_to_string(out.join("conservation.csv")).unwrap();
    assert!(log.contains("# partial"));
}

#[test]
fn gate_failure_exits_with_one() {
    let tmp = TempDir::new().unwrap();
    let text = "version = 1\n\n[lemma_scan]\nparams = [[0.8, 0.8]]\nk_range = 8\ntolerance = 0.0\n";
    let manifest = write_manifest(tmp.path(), "g.toml", text);
    let out = tmp.path().join("out");
    let o = talbot(&["lemma-scan", "--manifest", &manifest, "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(1));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "gate-failed");
}

#[test]
fn bundled_manifests_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("manifests");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let m = talbot_cli::validate(&text, &talbot_cli::Overrides::default())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(path.file_stem().unwrap().to_str().unwrap(), m.experiment.name());
        seen += 1;
    }
    assert_eq!(seen, 6);
}
