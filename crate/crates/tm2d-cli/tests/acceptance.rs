//! Acceptance, criterion 12: the full command-line pipeline — data
//! synthesis, both training stages, music-only and music+text generation,
//! evaluation, and codebook statistics — completes under a smoke
//! configuration in under ten minutes with a fully populated metric report
//! and no non-finite value anywhere.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

fn tm2d() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tm2d"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn tm2d");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn criterion_12_end_to_end_pipeline() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let p = |s: &str| root.join(s).display().to_string();

    run_ok(tm2d()
        .args(["gen-data", "--kind", "dance", "--n", "12", "--seed", "901"])
        .args(["--out", &p("dance")]));
    run_ok(tm2d()
        .args(["gen-data", "--kind", "action", "--n", "12", "--seed", "902"])
        .args(["--out", &p("action")]));

    run_ok(tm2d()
        .args(["train-vqvae", "--dance", &p("dance"), "--action", &p("action")])
        .args(["--out", &p("vq"), "--seed", "903"])
        .args(["--set", "vq_codebook_size=64", "--set", "vq_latent_dim=32"])
        .args(["--set", "vq_steps=600", "--set", "vq_batch=8", "--set", "vq_lr=1.2e-3"])
        .args(["--set", "vq_val_fraction=0.1", "--set", "vq_usage_log_every=200"]));

    run_ok(tm2d()
        .args(["train-xmodal", "--dance", &p("dance"), "--action", &p("action")])
        .args(["--ckpt-vq", &p("vq/vqvae.ckpt"), "--out", &p("xm"), "--seed", "904"])
        .args(["--set", "xm_hidden=48", "--set", "xm_layers=2", "--set", "xm_heads=4"])
        .args(["--set", "xm_ffn_mult=2", "--set", "xm_steps=1600", "--set", "xm_batch=4"])
        .args(["--set", "xm_lr=1.5e-3", "--set", "xm_max_seq_len=160"]));

    // Music-only and music+text generations from the same clip.
    let audio = p("dance/dance_000.taud");
    run_ok(tm2d()
        .args(["generate", "--ckpt-vq", &p("vq/vqvae.ckpt"), "--ckpt-xm", &p("xm/xmodal.ckpt")])
        .args(["--audio", &audio, "--top-k", "10", "--seed", "905"])
        .args(["--out", &p("gen/music_only")]));
    run_ok(tm2d()
        .args(["generate", "--ckpt-vq", &p("vq/vqvae.ckpt"), "--ckpt-xm", &p("xm/xmodal.ckpt")])
        .args(["--audio", &audio, "--text", "a person jumps up and down"])
        .args(["--text-start", "3", "--text-duration", "2.5"])
        .args(["--top-k", "10", "--seed", "905", "--out", &p("gen/with_text")]));

    run_ok(tm2d()
        .args(["evaluate", "--generated", &p("gen"), "--reference", &p("dance")])
        .args(["--out", &p("eval/run")]));

    run_ok(tm2d()
        .args(["codebook-stats", "--ckpt", &p("vq/vqvae.ckpt")])
        .args(["--corpus-a", &p("dance"), "--corpus-b", &p("action")])
        .args(["--out", &p("stats/cb")]));

    // Fully populated report: every metric key exactly once, all finite.
    let report = std::fs::read_to_string(root.join("eval/run.report.txt")).unwrap();
    let mut values = BTreeMap::new();
    for line in report.lines() {
        if let Some((k, v)) = line.split_once('=') {
            if !k.starts_with("param.") {
                assert!(
                    values.insert(k.to_string(), v.to_string()).is_none(),
                    "duplicate metric key {k}"
                );
            }
        }
    }
    for key in ["fid_k", "fid_g", "div", "beat_align", "pff", "auc_f", "mpd"] {
        let v: f64 = values
            .get(key)
            .unwrap_or_else(|| panic!("missing metric {key}"))
            .parse()
            .unwrap();
        assert!(v.is_finite(), "{key} = {v}");
    }

    // No non-finite value anywhere in the artifacts.
    assert_all_finite(root);

    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 600.0, "pipeline took {elapsed:.0}s");
    println!(
        "ACCEPTANCE 12 PASS — end-to-end pipeline: 6 commands in {elapsed:.0}s (< 600s), report populated, all values finite"
    );
}

fn assert_all_finite(root: &Path) {
    let mut pending = vec![root.to_path_buf()];
    while let Some(dir) = pending.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                pending.push(path);
                continue;
            }
            match path.extension().and_then(|e| e.to_str()) {
                Some("tmot") => {
                    // Reading validates finiteness of every frame.
                    tm2d::io::read_motion(&path).unwrap();
                }
                Some("taud") => {
                    tm2d::io::read_audio(&path).unwrap();
                }
                Some("txt") | Some("csv") | Some("ttok") | Some("tset") => {
                    let body = std::fs::read_to_string(&path).unwrap();
                    let lower = body.to_lowercase();
                    assert!(
                        !lower.contains("nan") && !lower.contains("inf"),
                        "non-finite token in {}",
                        path.display()
                    );
                }
                _ => {}
            }
        }
    }
}
