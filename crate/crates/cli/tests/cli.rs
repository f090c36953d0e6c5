use std::path::Path;
use std::process::{Command, Output};

use replay_cm::pipeline::ExperimentConfig;

const BIN: &str = env!("CARGO_BIN_EXE_replaycm");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: &str = "\
[corpus]
train = 540
dev = 270
eval = 90

[simulator]
duration = 0.5

[tdnn]
frame_dims = [32, 32, 32, 32, 32]
segment_dim = 32
chunk_frames = 40

[tdnn_train]
max_epochs = 3

[cm_train]
max_epochs = 3
";

#[test]
fn help_lists_every_override() {
    let keys = ExperimentConfig::default().override_keys();
    for sub in [
        "simulate",
        "extract",
        "train-xvec",
        "extract-xvec",
        "fit-lda",
        "train-cm",
        "score",
        "eval",
        "analyze",
    ] {
        let o = run(&[sub, "--help"]);
        assert!(o.status.success(), "{sub}");
        let text = stdout(&o);
        for (k, _) in &keys {
            assert!(text.contains(k.as_str()), "{sub} --help lacks {k}");
        }
    }
    assert!(run(&["--help"]).status.success());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["simulate"]).status.code(), Some(1), "missing --seed");
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let o = run(&["extract", "--set", "cm.bogus=1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"));
}

#[test]
fn missing_inputs_exit_two_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let work = dir.path().join("nothing");
    for sub in ["extract", "extract-xvec", "fit-lda", "score", "eval"] {
        let o = run(&[sub, "-w", work.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{sub}");
        assert_eq!(stderr(&o).trim().lines().count(), 1, "{sub}: {}", stderr(&o));
    }
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn eval_on_perfect_separation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(&d.join("s.txt"), "a 0.900000\nb 0.800000\nc -0.700000\nd -0.900000\n");
    write(&d.join("k.txt"), "a bonafide\nb bonafide\nc spoof\nd spoof\n");
    write(
        &d.join("asv.txt"),
        "t1 3.0\nt2 2.0\nn1 -2.0\nn2 -3.0\ns1 2.5\ns2 -1.0\n",
    );
    write(
        &d.join("asvk.txt"),
        "t1 target\nt2 target\nn1 nontarget\nn2 nontarget\ns1 spoof\ns2 spoof\n",
    );
    let p = |n: &str| d.join(n).to_str().unwrap().to_string();
    let o = run(&[
        "eval",
        "--scores",
        &p("s.txt"),
        "--keys",
        &p("k.txt"),
        "--asv-scores",
        &p("asv.txt"),
        "--asv-keys",
        &p("asvk.txt"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("EER 0.00%\n"), "{out}");
    assert!(out.contains("min-tDCF 0.0000"));
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn tiny_pipeline_is_resumable_and_hash_checked() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    write(&cfg, TINY);
    let work = dir.path().join("work");
    let (c, w) = (cfg.to_str().unwrap(), work.to_str().unwrap());
    let stage = |args: &[&str]| {
        let mut full = args.to_vec();
        full.extend(["-c", c, "-w", w]);
        let o = run(&full);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        stdout(&o)
    };
    stage(&["simulate", "--seed", "3"]);
    let out = stage(&["extract", "--feature", "scmc"]);
    assert!(out.contains("40 x 10 scmc"), "{out}");
    stage(&["train-xvec", "--seed", "3"]);
    stage(&["extract-xvec"]);
    stage(&["fit-lda"]);
    stage(&["train-cm", "--seed", "3"]);
    stage(&["score"]);
    let eval = stage(&["eval"]);
    assert!(eval.starts_with("EER "), "{eval}");
    let analysis = stage(&["analyze", "--seed", "3"]);
    assert!(analysis.contains("verification EER"));
    let model = work.join("cm").join("scmc+xeas").join("model.rdnet");
    assert_eq!(&std::fs::read(&model).unwrap()[..7], b"RDNET01");

    let before = read_all(&work);
    stage(&["simulate", "--seed", "3"]);
    stage(&["extract"]);
    stage(&["train-xvec", "--seed", "3"]);
    stage(&["extract-xvec"]);
    stage(&["fit-lda"]);
    stage(&["train-cm", "--seed", "3"]);
    stage(&["score"]);
    assert_eq!(stage(&["eval"]), eval);
    stage(&["analyze", "--seed", "3"]);
    let after = read_all(&work);
    assert_eq!(before.len(), after.len());
    for ((pa, a), (pb, b)) in before.iter().zip(&after) {
        assert_eq!(pa, pb);
        assert!(a == b, "{pa} differs on rerun");
    }

    let o = run(&["score", "-c", c, "-w", w, "--set", "cm.l2=0.001"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--force"), "{}", stderr(&o));
    let o = run(&["score", "-c", c, "-w", w, "--set", "cm.l2=0.001", "--force"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = run(&[
        "train-cm",
        "--seed",
        "3",
        "-c",
        c,
        "-w",
        w,
        "--name",
        "blowup",
        "--set",
        "cm_train.lr=1e38",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}
