//! Graph-aided tracking against independent particle filters on the
//! crossing scene, over a few seeds.

use structrack::experiment::{mean_mota, run_seeds};
use structrack::sim::occlusion_cross;

fn main() -> structrack::Result<()> {
    let cfg = occlusion_cross();
    let seeds: Vec<u64> = (0..4).collect();
    let graph = cfg.tracker_params();
    let plain = graph.plain_pf();
    for (name, params) in [("graph", &graph), ("plain", &plain)] {
        let runs = run_seeds(&cfg, params, &seeds)?;
        for r in &runs {
            println!(
                "{name} seed {}: MOTA {:.3} MOTP {:.3} IDSW {}",
                r.seed, r.metrics.mota, r.metrics.motp, r.metrics.idsw
            );
        }
        println!("{name} mean MOTA {:.3}", mean_mota(&runs));
    }
    Ok(())
}
