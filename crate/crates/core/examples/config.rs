//! Reading a run configuration, overriding a few keys, and printing the result.

use structrack::config::RunConfig;

const TEXT: &str = "\
# four objects in two pairs
seed = 42
filter.n_particles = 80
graph.rho_A = 0.5
graph.rho_S = 0.3
graph.rho_O = 0.2
graph.adjacency = [[0, 1, 1, 1], [1, 0, 1, 1], [1, 1, 0, 1], [1, 1, 1, 0]]
graph.candidates = [[0, 4, 4, 4], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]]
";

fn main() -> structrack::Result<()> {
    let config = RunConfig::parse(TEXT)?;
    let params = config.tracker_params(4)?;
    println!(
        "seed {}, {} particles, {} edges, {} candidates per frame",
        config.seed,
        params.filter.n_particles,
        params.adjacency.edge_count(),
        params.candidates.total()
    );
    print!("{}", config.to_text());

    match RunConfig::parse("graph.rho_A = 0.9\ngraph.rho_S = 0.9\n") {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("rejected: {e} (exit code {})", e.exit_code()),
    }
    Ok(())
}
