use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_structrack"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn simulate(dir: &Path, frames: &str) {
    let o = run(
        dir,
        &[
            "simulate",
            "--scenario",
            "occlusion-cross",
            "--frames",
            frames,
            "--out",
            "scene",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_track_evaluate_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "8");
    for f in [
        "scene/gt.csv",
        "scene/events.csv",
        "scene/config.txt",
        "scene/frames/frame_000007.png",
    ] {
        assert!(d.join(f).is_file(), "{f}");
    }
    let o = run(
        d,
        &[
            "--config",
            "scene/config.txt",
            "track",
            "--frames",
            "scene/frames",
            "--annotations",
            "scene/gt.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let tracks = fs::read_to_string(d.join("tracks.csv")).unwrap();
    assert!(tracks.starts_with("frame,id,x,y,w,h,conf\n"));
    assert_eq!(tracks.lines().count(), 1 + 8 * 3);

    let o = run(d, &["evaluate", "--gt", "scene/gt.csv", "--hyp", "scene/gt.csv"]);
    assert_eq!(code(&o), 0);
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(
        report.contains("mota = 1\n") && report.contains("motp = 1\n"),
        "{report}"
    );
    for key in ["idsw", "tp_rate", "fp_rate"] {
        assert!(report.contains(&format!("{key} = ")), "{key}");
    }
}

#[test]
fn missing_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["evaluate", "--gt", "nope.csv", "--hyp", "nope.csv"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));
}

#[test]
fn malformed_tracks_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "frame,id,x,y,w,h\n0,1,2,3,four,5\n").unwrap();
    let o = run(dir.path(), &["evaluate", "--gt", "bad.csv", "--hyp", "bad.csv"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.csv:2:"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.txt"), "graph.rho_A = 0.9\ngraph.rho_O = 0.9\n").unwrap();
    let o = run(d, &["--config", "bad.txt", "simulate", "--scenario", "occlusion-cross"]);
    assert_eq!(code(&o), 2);

    fs::write(d.join("typo.txt"), "filter.n_particle = 10\n").unwrap();
    let o = run(
        d,
        &["--config", "typo.txt", "simulate", "--scenario", "occlusion-cross"],
    );
    assert_eq!(code(&o), 2);

    let o = run(d, &["simulate", "--scenario", "volleyball"]);
    assert_eq!(code(&o), 2);

    let o = run(d, &["frobnicate"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("plain"), "").unwrap();
    let o = run(
        d,
        &[
            "simulate",
            "--scenario",
            "occlusion-cross",
            "--frames",
            "3",
            "--out",
            "plain/scene",
        ],
    );
    assert_eq!(code(&o), 3);

    simulate(d, "3");
    let o = run(
        d,
        &[
            "evaluate",
            "--gt",
            "scene/gt.csv",
            "--hyp",
            "scene/gt.csv",
            "--out",
            "plain/report.txt",
        ],
    );
    assert_eq!(code(&o), 3);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "12");
    let track = |seed: &str, out: &str| {
        let o = run(
            d,
            &[
                "--config",
                "scene/config.txt",
                "--seed",
                seed,
                "track",
                "--frames",
                "scene/frames",
                "--annotations",
                "scene/gt.csv",
                "--out",
                out,
            ],
        );
        assert_eq!(code(&o), 0);
        fs::read(d.join(out)).unwrap()
    };
    let a = track("1", "a.csv");
    assert_eq!(a, track("1", "b.csv"));
    assert_ne!(a, track("2", "c.csv"));
}
