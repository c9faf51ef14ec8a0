//! Learning pairwise layout online and scoring displaced positions against it.

use structrack::appearance::ColorHistogram;
use structrack::graph::{AdjacencyMatrix, GraphParams, ModelGraph};
use structrack::Point2;

fn main() -> structrack::Result<()> {
    let width = 400.0;
    let layout = |t: f64| {
        vec![
            Point2::new(100.0 + t, 100.0),
            Point2::new(200.0 + t, 100.0),
            Point2::new(150.0 + t, 200.0),
        ]
    };
    let appearances = (0..3).map(ColorHistogram::single_bin).collect();
    let mut model = ModelGraph::from_parts(
        AdjacencyMatrix::complete(3)?,
        appearances,
        &layout(0.0),
        width,
        &GraphParams::default(),
    )?;
    for t in 1..30 {
        model.update(&layout(t as f64), &[0.9, 0.9, 0.9], width)?;
    }

    let mut moved = layout(30.0);
    println!("object 2 in place:   {:.4}", model.structural_score(2, &moved, width));
    moved[2] = Point2::new(330.0, 60.0);
    println!("object 2 misplaced:  {:.4}", model.structural_score(2, &moved, width));

    let edge = model.edge(0, 1).expect("complete graph");
    println!(
        "edge 0->1 holds {:.1} angle votes and {:.1} distance votes",
        edge.angle.total(),
        edge.distance.total()
    );
    let text = model.to_text();
    let back = ModelGraph::from_text(&text)?;
    println!(
        "serialized model: {} bytes, round trip equal: {}",
        text.len(),
        back == model
    );
    Ok(())
}
