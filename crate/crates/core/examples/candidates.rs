//! Proposing positions for a lost object from a reference object's edges,
//! then gating them by appearance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use structrack::appearance::{Frame, FrameFeatures};
use structrack::candidates::{filter_candidates, sample_candidates, CandidateGates, CandidateMatrix, CandidateNoise};
use structrack::graph::{AdjacencyMatrix, GraphParams, ModelGraph};
use structrack::BBox;

fn main() -> structrack::Result<()> {
    let size = (24.0, 36.0);
    let boxes = [
        BBox::from_corner(60.0, 80.0, size.0, size.1)?,
        BBox::from_corner(130.0, 80.0, size.0, size.1)?,
    ];
    let mut frame = Frame::filled(320, 200, [40, 110, 50])?;
    frame.fill_box(&boxes[0], [230, 230, 230]);
    frame.fill_box(&boxes[1], [200, 40, 40]);
    let features = FrameFeatures::new(&frame);
    let width = frame.width() as f64;
    let model = ModelGraph::init(
        &boxes,
        &features,
        AdjacencyMatrix::complete(2)?,
        width,
        &GraphParams::default(),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let refs = [boxes[0].center, boxes[1].center];
    let matrix = CandidateMatrix::new(&[vec![0, 40], vec![0, 0]])?;
    let raw = sample_candidates(&model, &refs, &matrix, CandidateNoise::default(), width, &mut rng);
    let gates = CandidateGates {
        tau_o: 0.25,
        tau_s: 0.4,
        sigma_b: 0.4,
    };
    let kept = filter_candidates(raw.clone(), &[boxes[0]], &[size, size], &features, &model, gates);
    println!(
        "{} candidates for object 1 drawn, {} pass the gates",
        raw.len(),
        kept.len()
    );
    for c in &kept {
        println!(
            "  ({:6.1}, {:6.1}) appearance {:.3}, {:.1}px from the truth",
            c.position.x,
            c.position.y,
            c.appearance_score,
            c.position.distance(&boxes[1].center)
        );
    }
    Ok(())
}
