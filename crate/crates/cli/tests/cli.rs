use std::path::Path;
use std::process::{Command, Output};

fn svs(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svs"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run svs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = svs(args, cwd);
    assert!(
        out.status.success(),
        "svs {}: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const SPEC: &str = "[corpus]\nseed = 3\nsongs = 2\nnotes_per_song = 6\n\
                    [project.timelag.optimizer]\nsteps = 20\n\
                    [project.duration.optimizer]\nsteps = 20\n\
                    [project.acoustic.model.optimizer]\nsteps = 20\n";

fn project() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spec.toml"), SPEC).unwrap();
    ok(&["synthdata", "--spec", "spec.toml", "--out", "p", "-q"], dir.path());
    dir
}

fn metric(report: &str, name: &str) -> f64 {
    report
        .lines()
        .find_map(|l| {
            let mut it = l.split_whitespace();
            (it.next() == Some(name)).then(|| it.next().unwrap().parse().unwrap())
        })
        .unwrap_or_else(|| panic!("{name} missing from\n{report}"))
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(svs(&["eval", "-c", "missing.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(svs(&["bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(svs(&["parse", "--jobs", "0"], dir.path()).status.code(), Some(2));
    assert_eq!(svs(&["--help"], dir.path()).status.code(), Some(0));

    let p = project();
    let root = p.path().join("p");
    let out = svs(&["generate", "--models", "nowhere"], &root);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("svs: "));

    std::fs::write(root.join("bad.toml"), "frame_shift_s = -1.0\n").unwrap();
    assert_eq!(svs(&["parse", "-c", "bad.toml"], &root).status.code(), Some(2));
}

#[test]
fn natural_f0_scored_against_itself() {
    let p = project();
    let root = p.path().join("p");
    let gen = root.join("self");
    std::fs::create_dir(&gen).unwrap();
    for entry in std::fs::read_dir(root.join("f0")).unwrap() {
        let path = entry.unwrap().path();
        std::fs::copy(&path, gen.join(path.file_name().unwrap())).unwrap();
    }
    ok(&["eval", "--generated", "self", "-q"], &root);
    let report = std::fs::read_to_string(root.join("reports/metrics.txt")).unwrap();
    assert_eq!(metric(&report, "rmse_nat"), 0.0);
    assert!((metric(&report, "corr_nat") - 1.0).abs() < 1e-12);
    // the synthetic singer is detuned, so the score is not matched exactly
    assert!(metric(&report, "rmse_note") > 1.0);
}

#[test]
fn pipeline_writes_every_artifact() {
    let p = project();
    let root = p.path().join("p");
    ok(&["parse", "-q"], &root);
    ok(&["features", "-q"], &root);
    for model in ["timelag", "duration", "acoustic"] {
        ok(&["train", model, "-q"], &root);
    }
    ok(&["generate", "--preview-tone", "-q"], &root);
    ok(&["generate", "--oracle-timing", "--out", "oracle", "-q"], &root);
    ok(&["eval", "-q"], &root);
    ok(&["plot", "song000", "--reference", "-q"], &root);

    let features = root.join("features");
    for f in ["schema.txt", "song000.score.json", "song000.note.tsv", "song000.frame.tsv"] {
        assert!(features.join(f).is_file(), "{f}");
    }
    for f in ["timelag.json", "duration.json", "acoustic.json"] {
        assert!(root.join("checkpoints").join(f).is_file(), "{f}");
    }
    let gen = root.join("generated");
    for ext in ["f0", "cents.tsv", "lab", "timing.tsv", "wav"] {
        assert!(gen.join(format!("song001.{ext}")).is_file(), "{ext}");
    }
    // oracle timing reproduces the recorded labels
    assert_eq!(
        std::fs::read_to_string(root.join("oracle/song000.lab")).unwrap(),
        std::fs::read_to_string(root.join("labels/song000.lab")).unwrap()
    );
    let svg = std::fs::read_to_string(root.join("reports/song000.svg")).unwrap();
    for class in ["note-pitch", "f0", "f0-smooth", "f0-reference"] {
        assert!(svg.contains(&format!("<g class=\"series {class}\">")), "{class}");
    }
    let tsv = std::fs::read_to_string(root.join("reports/metrics.tsv")).unwrap();
    assert!(tsv.lines().any(|l| l.starts_with("all\trmse_note\t")));
}
