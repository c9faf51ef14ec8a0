//! Renders each standard scene and writes frames, ground truth and scripted
//! events to a directory (first argument, default `scenes`).

use std::path::PathBuf;

use structrack::pipeline::run_simulate;
use structrack::sim::standard_suite;

fn main() -> structrack::Result<()> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenes".into()));
    for cfg in standard_suite() {
        let seq = run_simulate(&cfg.name, 0, Some(30), &root.join(&cfg.name))?;
        println!(
            "{:15} {}x{} {} objects, {} frames, {} events -> {}",
            cfg.name,
            cfg.width,
            cfg.height,
            cfg.objects.len(),
            seq.len(),
            seq.events.len(),
            root.join(&cfg.name).display()
        );
    }
    Ok(())
}
