//! A coarse weight sweep on a short crossing scene.

use structrack::config::RunConfig;
use structrack::sim::{generate, occlusion_cross};
use structrack::sweep::{grid_values, marginals, run_sweep, weight_grid, write_cells};

fn main() -> structrack::Result<()> {
    let mut scene = occlusion_cross();
    scene.frames = 40;
    let seq = generate(&scene, 5)?;
    let config = RunConfig::from_params(&scene.tracker_params(), 5);
    let grid = weight_grid(&grid_values(0.5)?);
    let cells = run_sweep(&config, &seq, &seq.ground_truth(), &grid, 2)?;
    write_cells(std::io::stdout().lock(), &cells)?;
    println!();
    for m in marginals(&cells) {
        println!(
            "{} = {}: mean MOTG {:.3} over {} cells",
            m.parameter, m.value, m.mean_motg, m.cells
        );
    }
    Ok(())
}
