//! Frames needed to lock back onto every player after the camera cut.

use structrack::experiment::{reacquisition_frame, run_seeds};
use structrack::sim::camera_cut;

fn main() -> structrack::Result<()> {
    let cfg = camera_cut();
    let cut = cfg.cut_frames()[0];
    let seeds: Vec<u64> = (0..5).collect();
    let graph = cfg.tracker_params();
    for (name, params) in [("graph", graph.clone()), ("plain", graph.plain_pf())] {
        for run in run_seeds(&cfg, &params, &seeds)? {
            let delays: Vec<String> = (0..cfg.objects.len())
                .map(
                    |k| match reacquisition_frame(&run.sequence, &run.hypotheses, k, cut, 5) {
                        Some(t) => (t - cut).to_string(),
                        None => "-".into(),
                    },
                )
                .collect();
            println!("{name} seed {}: frames to reacquire [{}]", run.seed, delays.join(", "));
        }
    }
    Ok(())
}
