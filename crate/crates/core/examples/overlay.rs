//! Tracks a short scene and draws the tracks over its frames, writing
//! everything below the directory given as first argument (default `overlay_demo`).

use std::path::PathBuf;

use structrack::config::RunConfig;
use structrack::io::{self, FrameSequence};
use structrack::pipeline::{run_overlay, run_simulate, run_track};

fn main() -> structrack::Result<()> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "overlay_demo".into()));
    let scene = root.join("scene");
    run_simulate("occlusion-cross", 1, Some(25), &scene)?;

    let config = RunConfig::load(&scene.join("config.txt"))?;
    let frames = FrameSequence::open(&scene.join("frames"))?;
    let gt = io::read_tracks(&scene.join("gt.csv"))?;
    let first: Vec<_> = gt.iter().filter(|r| r.frame == 0).copied().collect();
    let tracks = root.join("tracks.csv");
    let n = run_track(&config, &frames, &first, &tracks)?;
    run_overlay(&frames, &tracks, &root.join("overlay"))?;
    println!(
        "{n} records in {}, overlays in {}",
        tracks.display(),
        root.join("overlay").display()
    );
    Ok(())
}
