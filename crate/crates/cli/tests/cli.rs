use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn msmda(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msmda"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("failed to launch msmda")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

const SYNTH: &str = r#"{"num_domains":4,"samples_per_domain":60,"num_classes":3,"feature_dim":8,
"class_separation":3.0,"domain_shift_scale":1.0,"noise_std":1.0,"rng_seed":2,"num_sessions":3}"#;

const SMALL: [&str; 8] = [
    "--epochs",
    "3",
    "--batch-size",
    "16",
    "--cfe-dims",
    "16,8",
    "--dsfe-dim",
    "4",
];

fn with_small<'a>(head: &[&'a str]) -> Vec<&'a str> {
    head.iter().copied().chain(SMALL).collect()
}

#[test]
fn verify_all_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = msmda(&["verify"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn perturbed_gradients_exit_with_verification_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = msmda(
        &["verify", "--suite", "grad", "--grad-perturbation", "0.01"],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn repeated_train_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let gen = msmda(
        &["gen-synth", "--synth", SYNTH, "--out", "data"],
        dir.path(),
    );
    assert_eq!(code(&gen), 0);
    for run in ["a", "b"] {
        let args = with_small(&[
            "train",
            "--data",
            "data",
            "--scenario",
            "cross-session",
            "--seeds",
            "0,1",
            "--out",
            run,
        ]);
        let out = msmda(&args, dir.path());
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |p: &str| fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a/metrics.csv"), read("b/metrics.csv"));
    assert_eq!(read("a/summary.json"), read("b/summary.json"));
    let ckpts: Vec<_> = fs::read_dir(dir.path().join("a/checkpoints"))
        .unwrap()
        .collect();
    assert_eq!(ckpts.len(), 2 * 4);
    for entry in ckpts {
        let name = entry.unwrap().file_name();
        let name = name.to_str().unwrap();
        assert_eq!(
            read(&format!("a/checkpoints/{name}")),
            read(&format!("b/checkpoints/{name}"))
        );
    }

    // a rerun from the snapshot reproduces the metrics
    let out = msmda(
        &["train", "--config", "a/config.json", "--out", "c"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read("a/metrics.csv"), read("c/metrics.csv"));
}

#[test]
fn baseline_ablate_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let synth_arg = SYNTH.replace('\n', " ");
    let base = with_small(&[
        "baseline", "--synth", &synth_arg, "--order", "B", "--out", "base",
    ]);
    assert_eq!(code(&msmda(&base, dir.path())), 0);
    let abl = with_small(&[
        "ablate", "--synth", &synth_arg, "--ablate", "both", "--out", "abl",
    ]);
    assert_eq!(code(&msmda(&abl, dir.path())), 0);
    let summary = fs::read_to_string(dir.path().join("abl/summary.json")).unwrap();
    assert!(summary.contains("no_both"));

    let out = msmda(
        &[
            "dump-features",
            "--synth",
            &synth_arg,
            "--checkpoint",
            "abl/checkpoints/seed0_cross-subject_session1.ckpt",
            "--rows",
            "20",
            "--out",
            "dump",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("dump/branch2.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "domain,branch,label,f0,f1,f2,f3");
    assert_eq!(text.lines().count(), 1 + 4 * 20);
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&msmda(&["train", "--data", "missing"], dir.path())), 3);
    assert_eq!(
        code(&msmda(
            &["train", "--data", "x", "--scenario", "sideways"],
            dir.path()
        )),
        1
    );
    assert_eq!(code(&msmda(&["train"], dir.path())), 1);
    assert_eq!(code(&msmda(&["ablate", "--synth", "{}"], dir.path())), 1);
    assert_eq!(
        code(&msmda(
            &["train", "--synth", SYNTH, "--epochs", "0"],
            dir.path()
        )),
        1
    );
    assert_eq!(code(&msmda(&["--help"], dir.path())), 0);

    fs::create_dir_all(dir.path().join("bad/session1")).unwrap();
    fs::write(
        dir.path().join("bad/session1/subject1.csv"),
        "f0,label\noops,0\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("bad/session1/subject2.csv"),
        "f0,label\n1.0,0\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("bad/manifest.json"),
        r#"{"num_classes":2,"cells":[[1,1],[1,2]]}"#,
    )
    .unwrap();
    let out = msmda(&["train", "--data", "bad"], dir.path());
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}
