//! The `aesgrad` binary end to end.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aesgrad_core::config::{RunConfig, PRESETS};
use aesgrad_core::format::{encode_raw, load_aesthetic};
use aesgrad_core::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn aesgrad(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aesgrad"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = aesgrad(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn repo_configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn committed_configs_equal_the_presets() {
    for name in PRESETS {
        let loaded = RunConfig::load(&repo_configs().join(format!("{name}.json"))).unwrap();
        assert_eq!(loaded, RunConfig::preset(name).unwrap(), "{name}");
    }
}

#[test]
fn embed_from_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("two.csv"), "1,0\n0,1\n").unwrap();
    let out = ok(
        dir.path(),
        &[
            "embed",
            "two.csv",
            "--dim",
            "2",
            "--out",
            "two.aese",
            "--created-at",
            "2024-01-01T00:00:00Z",
        ],
    );
    assert!(out.contains("K=2") && out.contains("dim=2"), "{out}");
    let e = load_aesthetic(&dir.path().join("two.aese"), true).unwrap();
    for &x in e.vector().data() {
        assert!((x - std::f32::consts::FRAC_1_SQRT_2).abs() < 1e-7);
    }
}

#[test]
fn embed_from_raw_floats_matches_an_independent_mean() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let values: Vec<f32> = (0..3 * 64).map(|_| rng.gen_range(-1.0..1.0)).collect();
    std::fs::write(dir.path().join("emb.f32"), encode_raw(&values)).unwrap();
    let out = ok(
        dir.path(),
        &[
            "embed",
            "emb.f32",
            "--dim",
            "64",
            "--out",
            "e.aese",
            "--created-at",
            "t",
        ],
    );
    assert!(out.contains("K=3"));
    let mean: Vec<f64> = (0..64)
        .map(|j| (0..3).map(|i| values[i * 64 + j] as f64).sum::<f64>() / 3.0)
        .collect();
    let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
    let e = load_aesthetic(&dir.path().join("e.aese"), true).unwrap();
    for (got, want) in e.vector().data().iter().zip(&mean) {
        assert!((*got as f64 - want / norm).abs() < 1e-6);
    }
    // embedding twice gives the same bytes when the timestamp is pinned
    ok(
        dir.path(),
        &[
            "embed",
            "emb.f32",
            "--dim",
            "64",
            "--out",
            "f.aese",
            "--created-at",
            "t",
        ],
    );
    assert_eq!(
        std::fs::read(dir.path().join("e.aese")).unwrap(),
        std::fs::read(dir.path().join("f.aese")).unwrap()
    );
}

#[test]
fn embed_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.f32"), [0u8; 10]).unwrap();
    let out = aesgrad(dir.path(), &["embed", "bad.f32", "--dim", "64", "--out", "x.aese"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("multiple of dim×4 = 256"));

    std::fs::write(dir.path().join("mixed.csv"), "1,2\n3\n").unwrap();
    assert_eq!(
        code(&aesgrad(dir.path(), &["embed", "mixed.csv", "--out", "x.aese"])),
        3
    );
    std::fs::write(dir.path().join("zero.csv"), "1,2\n-1,-2\n").unwrap();
    assert_eq!(code(&aesgrad(dir.path(), &["embed", "zero.csv", "--out", "x.aese"])), 3);
    assert_eq!(
        code(&aesgrad(dir.path(), &["embed", "missing.csv", "--out", "x.aese"])),
        3
    );
    assert_eq!(code(&aesgrad(dir.path(), &["embed", "--out", "x.aese"])), 2);
}

#[test]
fn embed_toy_images_through_the_vision_tower() {
    let dir = tempfile::tempdir().unwrap();
    let grid: String = (0..32)
        .map(|r| {
            (0..32)
                .map(|c| format!("{}", ((r * c) % 7) as f32 / 7.0))
                .collect::<Vec<_>>()
                .join(",")
                + "\n"
        })
        .collect();
    std::fs::write(dir.path().join("a.csv"), grid).unwrap();
    let raw = encode_raw(&(0..1024).map(|i| (i % 13) as f32 / 13.0).collect::<Vec<_>>());
    std::fs::write(dir.path().join("b.f32"), raw).unwrap();
    let out = ok(
        dir.path(),
        &[
            "embed",
            "--images",
            "a.csv",
            "b.f32",
            "--out",
            "i.aese",
            "--created-at",
            "t",
        ],
    );
    assert!(out.contains("K=2") && out.contains("dim=64"), "{out}");
}

#[test]
fn personalize_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["init-weights", "--out", "w.mclp"]);
    let before = std::fs::read(dir.path().join("w.mclp")).unwrap();
    let out = ok(
        dir.path(),
        &[
            "personalize",
            "--prompt",
            "A fountain, sculpture",
            "--weights",
            "w.mclp",
            "--iters",
            "7",
            "--out-dir",
            "p",
        ],
    );
    assert!(out.contains("gain +"), "{out}");
    assert_eq!(std::fs::read(dir.path().join("w.mclp")).unwrap(), before);

    let p = dir.path().join("p");
    let trace = std::fs::read_to_string(p.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 7 + 1 + 1);
    assert_eq!(trace.lines().next().unwrap(), "step,similarity,grad_norm");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("summary.json")).unwrap()).unwrap();
    assert!(summary["similarity_gain"].as_f64().unwrap() > 0.0);
    assert!(summary["drift"].as_f64().unwrap() <= 1.0);
    assert_eq!(summary["vision_frozen"], true);
    assert_eq!(std::fs::read(p.join("c.vec")).unwrap().len(), 64 * 4);
    assert_ne!(
        std::fs::read(p.join("c.vec")).unwrap(),
        std::fs::read(p.join("c_prime.vec")).unwrap()
    );

    ok(
        dir.path(),
        &[
            "personalize",
            "--prompt",
            "A fountain, sculpture",
            "--iters",
            "0",
            "--out-dir",
            "p0",
        ],
    );
    let p0 = dir.path().join("p0");
    assert_eq!(
        std::fs::read(p0.join("c.vec")).unwrap(),
        std::fs::read(p0.join("c_prime.vec")).unwrap()
    );
    // the seed-derived weights are the ones init-weights writes
    ok(
        dir.path(),
        &[
            "personalize",
            "--prompt",
            "A fountain, sculpture",
            "--iters",
            "7",
            "--out-dir",
            "q",
        ],
    );
    assert_eq!(
        std::fs::read(p.join("c_prime.vec")).unwrap(),
        std::fs::read(dir.path().join("q/c_prime.vec")).unwrap()
    );
}

#[test]
fn personalize_rejects_mismatched_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("e.csv"), "1,2,3\n").unwrap();
    ok(dir.path(), &["embed", "e.csv", "--out", "e.aese"]);
    let out = aesgrad(
        dir.path(),
        &[
            "personalize",
            "--prompt",
            "Ethereal",
            "--aesthetic",
            "e.aese",
            "--out-dir",
            "p",
        ],
    );
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension mismatch"));
}

#[test]
fn sgld_runs_are_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str, seed: &str| {
        ok(
            dir.path(),
            &[
                "personalize",
                "--prompt",
                "Ethereal",
                "--optimizer",
                "sgld",
                "--temperature",
                "1e-4",
                "--iters",
                "3",
                "--seed",
                seed,
                "--out-dir",
                out,
            ],
        );
        std::fs::read(dir.path().join(out).join("c_prime.vec")).unwrap()
    };
    assert_eq!(run("a", "5"), run("b", "5"));
    assert_ne!(run("a", "5"), run("c", "6"));
}

#[test]
fn experiment_row_counts() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["experiment", "--out-dir", "two"]);
    let rows = std::fs::read_to_string(dir.path().join("two/scores.csv")).unwrap();
    assert_eq!(rows.lines().count(), 300 + 1);
    let config = repo_configs().join("toy-default.json");
    ok(
        dir.path(),
        &[
            "experiment",
            "--config",
            config.to_str().unwrap(),
            "--keyword",
            "gloomcore",
            "--out-dir",
            "three",
        ],
    );
    let rows = std::fs::read_to_string(dir.path().join("three/scores.csv")).unwrap();
    assert_eq!(rows.lines().count(), 450 + 1);
    assert!(dir.path().join("three/histogram.svg").is_file());
}

#[test]
fn experiment_reads_files_named_in_the_config() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["init-weights", "--encoder", "tiny", "--seed", "4", "--out", "w.mclp"],
    );
    let mut cfg = RunConfig::preset("toy-default").unwrap();
    cfg.encoder = "tiny".into();
    cfg.experiment.seeds_per_prompt = 2;
    cfg.paths.weights = Some(dir.path().join("w.mclp"));
    cfg.paths.output_dir = Some(dir.path().join("out"));
    std::fs::write(dir.path().join("run.json"), cfg.to_json()).unwrap();
    ok(dir.path(), &["experiment", "--config", "run.json"]);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["encoder"]["d_model"], 16);

    cfg.paths.scorer = Some(dir.path().join("absent.aesc"));
    std::fs::write(dir.path().join("bad.json"), cfg.to_json()).unwrap();
    assert_eq!(code(&aesgrad(dir.path(), &["experiment", "--config", "bad.json"])), 3);
    std::fs::write(dir.path().join("junk.json"), "{").unwrap();
    assert_eq!(code(&aesgrad(dir.path(), &["experiment", "--config", "junk.json"])), 3);
}

#[test]
fn inspect_reports_each_format() {
    let dir = tempfile::tempdir().unwrap();
    let v = Tensor::from_vec(vec![3.0f32, 4.0]);
    let e = aesgrad_core::build_aesthetic_embedding(&[v], "mine", "t").unwrap();
    aesgrad_core::format::save_aesthetic(&dir.path().join("e.aese"), &e).unwrap();
    let out = ok(dir.path(), &["inspect", "e.aese"]);
    assert!(
        out.contains("AESE") && out.contains("dim: 2") && out.contains("‖e‖=1.000000"),
        "{out}"
    );

    ok(
        dir.path(),
        &[
            "make-scorer",
            "--aesthetic",
            "e.aese",
            "--bias",
            "2.5",
            "--out",
            "s.aesc",
        ],
    );
    let out = ok(dir.path(), &["inspect", "s.aesc"]);
    assert!(out.contains("AESC") && out.contains("bias: 2.5"), "{out}");

    ok(dir.path(), &["init-weights", "--encoder", "tiny", "--out", "w.mclp"]);
    assert!(ok(dir.path(), &["inspect", "w.mclp"]).contains("MCLP"));

    let bytes = std::fs::read(dir.path().join("e.aese")).unwrap();
    std::fs::write(dir.path().join("t.aese"), &bytes[..15]).unwrap();
    let out = aesgrad(dir.path(), &["inspect", "t.aese"]);
    assert_eq!(code(&out), 4);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("offset 12"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    std::fs::write(dir.path().join("x.bin"), b"NOPE....").unwrap();
    assert_eq!(code(&aesgrad(dir.path(), &["inspect", "x.bin"])), 6);
}

#[test]
fn inspect_no_check_accepts_off_norm_vectors() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = std::fs::read({
        let v = Tensor::from_vec(vec![1.0f32, 0.0]);
        let e = aesgrad_core::build_aesthetic_embedding(&[v], "n", "t").unwrap();
        let p = dir.path().join("e.aese");
        aesgrad_core::format::save_aesthetic(&p, &e).unwrap();
        p
    })
    .unwrap();
    bytes[12..16].copy_from_slice(&2.0f32.to_le_bytes());
    std::fs::write(dir.path().join("off.aese"), &bytes).unwrap();
    assert_eq!(code(&aesgrad(dir.path(), &["inspect", "off.aese"])), 4);
    assert!(ok(dir.path(), &["inspect", "--no-check", "off.aese"]).contains("‖e‖=2.000000"));
}
