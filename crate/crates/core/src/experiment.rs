//! Running trackers over synthetic scenes and measuring the outcome.

use rayon::prelude::*;

use crate::error::Result;
use crate::evaluation::{compute_metrics, MetricsReport, TrackRecord, DEFAULT_IOU_THRESHOLD};
use crate::geometry::{iou, BBox};
use crate::pipeline::track_to_vec;
use crate::sim::{generate, ScenarioConfig, SyntheticSequence};
use crate::tracker::TrackerParams;

/// Hypothesis records for every frame; frame 0 repeats the ground truth.
pub fn track_sequence(seq: &SyntheticSequence, params: &TrackerParams, seed: u64) -> Result<Vec<TrackRecord>> {
    let annotations: Vec<(u64, BBox)> = seq
        .config
        .objects
        .iter()
        .map(|o| o.id)
        .zip(seq.first_boxes().iter().copied())
        .collect();
    track_to_vec(seq, params, 0, &annotations, seed)
}

/// First frame at or after `from` from which the object's hypothesis keeps
/// IoU ≥ 0.5 with its ground truth for `hold` consecutive frames.
pub fn reacquisition_frame(
    seq: &SyntheticSequence,
    hypotheses: &[TrackRecord],
    object: usize,
    from: usize,
    hold: usize,
) -> Option<usize> {
    let id = seq.config.objects[object].id;
    let mut boxes = vec![None; seq.len()];
    for r in hypotheses.iter().filter(|r| r.object == id && r.frame < seq.len()) {
        boxes[r.frame] = Some(r.bbox);
    }
    let ok = |t: usize| boxes[t].is_some_and(|b| iou(&b, &seq.boxes[t][object]) >= DEFAULT_IOU_THRESHOLD);
    let mut run = 0;
    for t in from..seq.len() {
        if ok(t) {
            run += 1;
            if run == hold {
                return Some(t + 1 - hold);
            }
        } else {
            run = 0;
        }
    }
    None
}

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub metrics: MetricsReport,
    pub hypotheses: Vec<TrackRecord>,
    pub sequence: SyntheticSequence,
}

/// Generates the scene and tracks it for every seed, in parallel. The same
/// seed drives scene generation and the tracker.
pub fn run_seeds(config: &ScenarioConfig, params: &TrackerParams, seeds: &[u64]) -> Result<Vec<SeedOutcome>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let sequence = generate(config, seed)?;
            let hypotheses = track_sequence(&sequence, params, seed)?;
            let metrics = compute_metrics(&sequence.ground_truth(), &hypotheses, DEFAULT_IOU_THRESHOLD)?;
            Ok(SeedOutcome {
                seed,
                metrics,
                hypotheses,
                sequence,
            })
        })
        .collect()
}

pub fn mean_mota(outcomes: &[SeedOutcome]) -> f64 {
    outcomes.iter().map(|o| o.metrics.mota).sum::<f64>() / outcomes.len().max(1) as f64
}
