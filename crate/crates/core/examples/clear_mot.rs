//! CLEAR-MOT metrics for a short hand-made trace with a miss, a false
//! positive and an identity swap.

use structrack::evaluation::{compute_metrics, TrackRecord, DEFAULT_IOU_THRESHOLD};
use structrack::BBox;

fn rec(frame: usize, id: u64, x: f64) -> TrackRecord {
    TrackRecord::new(frame, id, BBox::from_corner(x, 50.0, 20.0, 30.0).unwrap())
}

fn main() -> structrack::Result<()> {
    let mut gt = Vec::new();
    for t in 0..4 {
        gt.push(rec(t, 1, 10.0 + 5.0 * t as f64));
        gt.push(rec(t, 2, 100.0 - 5.0 * t as f64));
    }
    let hyp = vec![
        rec(0, 1, 11.0),
        rec(0, 2, 100.0),
        rec(1, 1, 15.0),
        rec(1, 9, 200.0),
        // ids swapped from frame 2 on
        rec(2, 2, 20.0),
        rec(2, 1, 90.0),
        rec(3, 2, 25.0),
        rec(3, 1, 85.0),
    ];
    let report = compute_metrics(&gt, &hyp, DEFAULT_IOU_THRESHOLD)?;
    print!("{}", report.to_text());
    Ok(())
}
