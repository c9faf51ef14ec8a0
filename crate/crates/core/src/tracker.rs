//! Per-frame pipeline over all objects: candidate spawning, filter updates,
//! scene-graph scoring and selection, temporal weights and model learning.

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::appearance::{bhattacharyya, ColorHistogram, Frame, FrameFeatures};
use crate::candidates::{filter_candidates, sample_candidates, CandidateGates, CandidateMatrix, CandidateNoise};
use crate::error::{Error, Result};
use crate::evaluation::TrackRecord;
use crate::geometry::{overlap_ratio, BBox, Point2};
use crate::graph::{AdjacencyMatrix, GraphParams, ModelGraph};
use crate::optimize::{greedy_optimize, SelectionObjective};
use crate::particle::{FilterParams, ParticleCloud};

/// Weights of the instantaneous score; the change weight is what remains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreWeights {
    pub rho_a: f64,
    pub rho_s: f64,
    pub rho_o: f64,
    /// Temporal decay of accumulated scores.
    pub rho_t: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            rho_a: 0.4,
            rho_s: 0.0,
            rho_o: 0.6,
            rho_t: 0.8,
        }
    }
}

impl ScoreWeights {
    pub fn rho_c(&self) -> f64 {
        1.0 - self.rho_a - self.rho_s - self.rho_o
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rho_A", self.rho_a), ("rho_S", self.rho_s), ("rho_O", self.rho_o)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.rho_a + self.rho_s + self.rho_o > 1.0 + 1e-9 {
            return Err(Error::Config(format!(
                "rho_A + rho_S + rho_O = {} exceeds 1",
                self.rho_a + self.rho_s + self.rho_o
            )));
        }
        if !(0.0..1.0).contains(&self.rho_t) {
            return Err(Error::Config(format!("rho_T = {} outside [0, 1)", self.rho_t)));
        }
        Ok(())
    }

    /// `ρ_A φ_A + ρ_S φ_S − ρ_O φ_O − ρ_C φ_C`.
    pub fn instantaneous(&self, appearance: f64, structural: f64, overlap: f64, change: f64) -> f64 {
        self.rho_a * appearance + self.rho_s * structural - self.rho_o * overlap - self.rho_c() * change
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerParams {
    pub filter: FilterParams,
    pub graph: GraphParams,
    pub weights: ScoreWeights,
    pub adjacency: AdjacencyMatrix,
    pub candidates: CandidateMatrix,
    pub noise: CandidateNoise,
    pub tau_o: f64,
    pub tau_s: f64,
    pub tau_r: f64,
    /// Sweep limit per optimization run.
    pub tau_i: usize,
    /// Random restarts per frame.
    pub n_ri: usize,
}

impl TrackerParams {
    pub fn new(adjacency: AdjacencyMatrix, candidates: CandidateMatrix) -> Self {
        Self {
            filter: FilterParams::default(),
            graph: GraphParams::default(),
            weights: ScoreWeights::default(),
            adjacency,
            candidates,
            noise: CandidateNoise::default(),
            tau_o: 0.25,
            tau_s: 0.4,
            tau_r: 0.2,
            tau_i: 10,
            n_ri: 10,
        }
    }

    /// The same configuration reduced to independent appearance-only
    /// particle filters: no candidates, selection by appearance alone.
    pub fn plain_pf(&self) -> Self {
        Self {
            weights: ScoreWeights {
                rho_a: 1.0,
                rho_s: 0.0,
                rho_o: 0.0,
                rho_t: self.weights.rho_t,
            },
            candidates: CandidateMatrix::zeros(self.adjacency.len()),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.graph.validate()?;
        self.weights.validate()?;
        if self.candidates.len() != self.adjacency.len() {
            return Err(Error::Config(format!(
                "candidate matrix is {0}x{0} but adjacency is {1}x{1}",
                self.candidates.len(),
                self.adjacency.len()
            )));
        }
        self.candidates.check_against(&self.adjacency)?;
        for (name, v) in [("tau_O", self.tau_o), ("tau_S", self.tau_s)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !self.tau_r.is_finite() {
            return Err(Error::Config("tau_R must be finite".into()));
        }
        if self.tau_i == 0 {
            return Err(Error::Config("tau_I must be at least 1".into()));
        }
        if !(self.noise.sigma_theta >= 0.0 && self.noise.sigma_d >= 0.0) {
            return Err(Error::Config("candidate noise deviations must be non-negative".into()));
        }
        Ok(())
    }
}

/// One tracker of one object.
#[derive(Debug, Clone)]
pub struct TrackerEntry {
    pub id: u64,
    pub cloud: ParticleCloud,
    pub temporal_weight: f64,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone)]
pub struct TrackerSet {
    pub object: usize,
    pub entries: Vec<TrackerEntry>,
}

impl TrackerSet {
    /// Index of the entry with the largest temporal weight (first on ties).
    pub fn best(&self) -> usize {
        let mut best = 0;
        for (k, e) in self.entries.iter().enumerate() {
            if e.temporal_weight > self.entries[best].temporal_weight {
                best = k;
            }
        }
        best
    }
}

/// Component scores of one object under one selection.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComponentScores {
    pub appearance: f64,
    pub structural: f64,
    pub overlap: f64,
    pub change: f64,
    pub total: f64,
}

/// What the scorer needs to know about one tracker this frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerView {
    pub id: u64,
    pub bbox: BBox,
    pub confidence: f64,
    pub temporal_weight: f64,
    /// Whether this tracker was the object's selection in the previous frame.
    pub kept: bool,
    /// Observed histogram at the estimate; `None` outside the frame.
    pub histogram: Option<ColorHistogram>,
}

/// Graph score of selections for one frame.
pub struct FrameScorer<'a> {
    weights: ScoreWeights,
    model: &'a ModelGraph,
    image_width: f64,
    offsets: Vec<usize>,
    counts: Vec<usize>,
    views: Vec<TrackerView>,
    // penalty[a * total + b]: similarity-weighted share of a covered by b
    penalty: Vec<f64>,
}

impl<'a> FrameScorer<'a> {
    pub fn new(views: Vec<Vec<TrackerView>>, model: &'a ModelGraph, image_width: f64, weights: ScoreWeights) -> Self {
        let counts: Vec<usize> = views.iter().map(Vec::len).collect();
        let offsets: Vec<usize> = counts
            .iter()
            .scan(0, |acc, &c| {
                let o = *acc;
                *acc += c;
                Some(o)
            })
            .collect();
        let owner: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(i, c))
            .collect();
        let views: Vec<TrackerView> = views.into_iter().flatten().collect();
        let total = views.len();
        let mut penalty = vec![0.0; total * total];
        if weights.rho_o != 0.0 {
            for a in 0..total {
                for b in 0..total {
                    if owner[a] == owner[b] {
                        continue;
                    }
                    let cover = overlap_ratio(&views[a].bbox, &views[b].bbox);
                    if cover == 0.0 {
                        continue;
                    }
                    let similarity = match (&views[a].histogram, &views[b].histogram) {
                        (Some(ha), Some(hb)) => 1.0 - bhattacharyya(ha, hb).unwrap_or(1.0),
                        _ => 0.0,
                    };
                    penalty[a * total + b] = similarity * cover;
                }
            }
        }
        Self {
            weights,
            model,
            image_width,
            offsets,
            counts,
            views,
            penalty,
        }
    }

    pub fn view(&self, object: usize, option: usize) -> &TrackerView {
        &self.views[self.offsets[object] + option]
    }

    fn flat(&self, selection: &[usize]) -> Vec<usize> {
        selection
            .iter()
            .enumerate()
            .map(|(i, &s)| self.offsets[i] + s)
            .collect()
    }

    fn positions(&self, flat: &[usize]) -> Vec<Point2> {
        flat.iter().map(|&k| self.views[k].bbox.center).collect()
    }

    fn components_flat(&self, object: usize, flat: &[usize], positions: Option<&[Point2]>) -> ComponentScores {
        let k = flat[object];
        let v = &self.views[k];
        let total = self.views.len();
        let appearance = v.confidence;
        let structural = match positions {
            Some(p) => self.model.structural_score(object, p, self.image_width),
            None => 0.0,
        };
        let overlap: f64 = flat
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != object)
            .map(|(_, &b)| self.penalty[k * total + b])
            .sum();
        let change = if v.kept { 0.0 } else { 1.0 };
        ComponentScores {
            appearance,
            structural,
            overlap,
            change,
            total: self.weights.instantaneous(appearance, structural, overlap, change),
        }
    }

    /// All component scores of `object`, structural term included.
    pub fn components(&self, object: usize, selection: &[usize]) -> ComponentScores {
        let flat = self.flat(selection);
        let positions = self.positions(&flat);
        self.components_flat(object, &flat, Some(&positions))
    }

    /// Instantaneous score `f` of `object` under `selection`.
    pub fn instantaneous(&self, object: usize, selection: &[usize]) -> f64 {
        let flat = self.flat(selection);
        let positions = (self.weights.rho_s != 0.0).then(|| self.positions(&flat));
        self.components_flat(object, &flat, positions.as_deref()).total
    }

    /// `Σ_i (ρ_T w_i + f_i)` over the selected trackers.
    pub fn graph_score(&self, selection: &[usize]) -> f64 {
        let flat = self.flat(selection);
        let positions = (self.weights.rho_s != 0.0).then(|| self.positions(&flat));
        (0..selection.len())
            .map(|i| {
                self.weights.rho_t * self.views[flat[i]].temporal_weight
                    + self.components_flat(i, &flat, positions.as_deref()).total
            })
            .sum()
    }
}

impl SelectionObjective for FrameScorer<'_> {
    fn option_counts(&self) -> Vec<usize> {
        self.counts.clone()
    }

    fn score(&self, selection: &[usize]) -> f64 {
        self.graph_score(selection)
    }
}

/// The chosen scene graph of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSelection {
    pub tracker_ids: Vec<u64>,
    pub estimates: Vec<Point2>,
    pub scores: Vec<ComponentScores>,
    pub graph_score: f64,
    /// Graph score of the previous frame's selection on this frame.
    pub previous_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub frame: usize,
    pub selection: SceneSelection,
    pub records: Vec<TrackRecord>,
    /// Trackers per object after pruning.
    pub set_sizes: Vec<usize>,
    pub spawned: usize,
}

// SplitMix64 finalizer for deriving independent substream seeds
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of an independent random substream identified by `(tag, a, b)`.
pub fn derive_seed(seed: u64, tag: u64, a: u64, b: u64) -> u64 {
    mix(mix(mix(seed ^ mix(tag)) ^ a) ^ b)
}

fn substream(seed: u64, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, a, b))
}

const STREAM_TRACKER: u64 = 1;
const STREAM_FRAME: u64 = 2;

/// Full tracking state carried from frame to frame.
#[derive(Debug, Clone)]
pub struct Tracker {
    params: TrackerParams,
    model: ModelGraph,
    sets: Vec<TrackerSet>,
    box_sizes: Vec<(f64, f64)>,
    previous: Vec<u64>,
    frame_index: usize,
    next_id: u64,
    seed: u64,
    frame_size: (usize, usize),
}

impl Tracker {
    /// Learns the model from the first frame and its annotated boxes and
    /// starts one tracker per object at its annotation.
    pub fn new(params: TrackerParams, first: &Frame, boxes: &[BBox], seed: u64) -> Result<Self> {
        params.validate()?;
        let features = FrameFeatures::new(first);
        let width = first.width() as f64;
        let model = ModelGraph::init(boxes, &features, params.adjacency.clone(), width, &params.graph)?;
        let mut next_id = 0;
        let sets = boxes
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let mut rng = substream(seed, STREAM_TRACKER, i as u64, next_id);
                let cloud = ParticleCloud::init(
                    b.center,
                    (b.width, b.height),
                    model.appearance(i).clone(),
                    &params.filter,
                    &mut rng,
                );
                let entry = TrackerEntry {
                    id: next_id,
                    cloud,
                    temporal_weight: 0.0,
                    rng,
                };
                next_id += 1;
                TrackerSet {
                    object: i,
                    entries: vec![entry],
                }
            })
            .collect::<Vec<_>>();
        Ok(Self {
            previous: sets.iter().map(|s| s.entries[0].id).collect(),
            box_sizes: boxes.iter().map(|b| (b.width, b.height)).collect(),
            params,
            model,
            sets,
            frame_index: 0,
            next_id,
            seed,
            frame_size: (first.width(), first.height()),
        })
    }

    pub fn params(&self) -> &TrackerParams {
        &self.params
    }

    pub fn model(&self) -> &ModelGraph {
        &self.model
    }

    pub fn sets(&self) -> &[TrackerSet] {
        &self.sets
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    /// Index of the tracker each object would start from in the guided run.
    fn previous_selection(&self) -> Vec<usize> {
        self.sets
            .iter()
            .zip(&self.previous)
            .map(|(s, id)| s.entries.iter().position(|e| e.id == *id).unwrap_or_else(|| s.best()))
            .collect()
    }

    fn spawn_candidates(&mut self, features: &FrameFeatures<'_>, rng: &mut ChaCha8Rng) -> usize {
        if self.params.candidates.total() == 0 {
            return 0;
        }
        let width = self.frame_size.0 as f64;
        let references: Vec<Point2> = self
            .sets
            .iter()
            .map(|s| s.entries[s.best()].cloud.estimate_state())
            .collect();
        let sampled = sample_candidates(
            &self.model,
            &references,
            &self.params.candidates,
            self.params.noise,
            width,
            rng,
        );
        let older: Vec<BBox> = self
            .sets
            .iter()
            .flat_map(|s| s.entries.iter().map(|e| e.cloud.estimate_box()))
            .collect();
        let gates = CandidateGates {
            tau_o: self.params.tau_o,
            tau_s: self.params.tau_s,
            sigma_b: self.params.filter.sigma_b,
        };
        let survivors = filter_candidates(sampled, &older, &self.box_sizes, features, &self.model, gates);
        let spawned = survivors.len();
        for c in survivors {
            let id = self.next_id;
            self.next_id += 1;
            let mut crng = substream(self.seed, STREAM_TRACKER, c.object as u64, id);
            let cloud = c.spawn_cloud(self.box_sizes[c.object], &self.model, &self.params.filter, &mut crng);
            debug!(
                "frame {}: candidate {id} for object {} from {} at ({:.1}, {:.1}), score {:.3}",
                self.frame_index, c.object, c.source, c.position.x, c.position.y, c.appearance_score
            );
            self.sets[c.object].entries.push(TrackerEntry {
                id,
                cloud,
                temporal_weight: 0.0,
                rng: crng,
            });
        }
        spawned
    }

    fn views(&self, features: &FrameFeatures<'_>) -> Vec<Vec<TrackerView>> {
        self.sets
            .par_iter()
            .zip(self.previous.par_iter())
            .map(|(s, prev)| {
                s.entries
                    .iter()
                    .map(|e| {
                        let bbox = e.cloud.estimate_box();
                        TrackerView {
                            id: e.id,
                            bbox,
                            confidence: e.cloud.confidence(),
                            temporal_weight: e.temporal_weight,
                            kept: e.id == *prev,
                            histogram: features.histogram(&bbox).ok(),
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Advances every tracker by one frame and commits the best scene graph.
    /// A frame of the wrong size is rejected before any state changes.
    pub fn step(&mut self, frame: &Frame) -> Result<FrameOutput> {
        let index = self.frame_index + 1;
        if (frame.width(), frame.height()) != self.frame_size {
            return Err(Error::Frame {
                index,
                message: format!(
                    "size {}x{} differs from {}x{}",
                    frame.width(),
                    frame.height(),
                    self.frame_size.0,
                    self.frame_size.1
                ),
            });
        }
        self.frame_index = index;
        let features = FrameFeatures::new(frame);
        let width = frame.width() as f64;
        let mut rng = substream(self.seed, STREAM_FRAME, index as u64, 0);

        let spawned = self.spawn_candidates(&features, &mut rng);

        let filter = self.params.filter.clone();
        self.sets.par_iter_mut().for_each(|s| {
            s.entries.par_iter_mut().for_each(|e| {
                e.cloud.resample(&mut e.rng);
                e.cloud.propagate(&filter, &mut e.rng);
                e.cloud.reweight(&features, filter.sigma_b);
            });
        });

        let scorer = FrameScorer::new(self.views(&features), &self.model, width, self.params.weights);
        let initial = self.previous_selection();
        let previous_score = scorer.graph_score(&initial);
        let mut order: Vec<usize> = (0..self.sets.len()).collect();
        order.sort_by(|&a, &b| {
            let wa = self.sets[a].entries[self.sets[a].best()].temporal_weight;
            let wb = self.sets[b].entries[self.sets[b].best()].temporal_weight;
            wa.total_cmp(&wb).then(a.cmp(&b))
        });
        let outcome = greedy_optimize(&scorer, initial, &order, self.params.tau_i, self.params.n_ri, &mut rng);
        let best = outcome.best.selection;

        // new temporal weights with every other object fixed at the best selection
        let updated: Vec<Vec<f64>> = self
            .sets
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut trial = best.clone();
                (0..s.entries.len())
                    .map(|k| {
                        trial[i] = k;
                        self.params.weights.rho_t * s.entries[k].temporal_weight + scorer.instantaneous(i, &trial)
                    })
                    .collect()
            })
            .collect();

        let selection = SceneSelection {
            tracker_ids: best.iter().enumerate().map(|(i, &k)| scorer.view(i, k).id).collect(),
            estimates: best
                .iter()
                .enumerate()
                .map(|(i, &k)| scorer.view(i, k).bbox.center)
                .collect(),
            scores: (0..best.len()).map(|i| scorer.components(i, &best)).collect(),
            graph_score: outcome.best.score,
            previous_score,
        };
        let records: Vec<TrackRecord> = best
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let v = scorer.view(i, k);
                TrackRecord::new(index, i as u64, v.bbox).with_confidence(v.confidence)
            })
            .collect();
        let confidences: Vec<f64> = best
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                self.sets[i].entries[k]
                    .cloud
                    .estimate_likelihood(&features, filter.sigma_b)
            })
            .collect();
        drop(scorer);

        let tau_r = self.params.tau_r;
        for (s, weights) in self.sets.iter_mut().zip(updated) {
            for (e, w) in s.entries.iter_mut().zip(weights) {
                e.temporal_weight = w;
            }
            let keep = s.best();
            let mut k = 0;
            s.entries.retain(|e| {
                let stay = e.temporal_weight >= tau_r || k == keep;
                k += 1;
                stay
            });
        }
        self.model.update(&selection.estimates, &confidences, width)?;
        self.previous = selection.tracker_ids.clone();

        Ok(FrameOutput {
            frame: index,
            set_sizes: self.sets.iter().map(|s| s.entries.len()).collect(),
            selection,
            records,
            spawned,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::appearance::extract_histogram;
    use proptest::prelude::*;

    fn view(id: u64, x: f64, confidence: f64, w: f64, kept: bool, hist: Option<ColorHistogram>) -> TrackerView {
        TrackerView {
            id,
            bbox: BBox::new(Point2::new(x, 50.0), 10.0, 10.0).unwrap(),
            confidence,
            temporal_weight: w,
            kept,
            histogram: hist,
        }
    }

    fn model(n: usize) -> ModelGraph {
        let positions: Vec<Point2> = (0..n).map(|i| Point2::new(100.0 * i as f64, 0.0)).collect();
        ModelGraph::from_parts(
            AdjacencyMatrix::complete(n).unwrap(),
            vec![ColorHistogram::single_bin(3); n],
            &positions,
            1000.0,
            &GraphParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn instantaneous_score_examples() {
        let w = ScoreWeights::default();
        assert!((w.instantaneous(1.0, 0.0, 0.0, 0.0) - 0.4).abs() < 1e-12);
        assert_eq!(w.instantaneous(0.0, 0.0, 0.0, 0.0), 0.0);
        assert!((w.instantaneous(0.0, 0.0, 1.0, 0.0) + 0.6).abs() < 1e-12);
        assert!(w.rho_c().abs() < 1e-12);
    }

    #[test]
    fn weights_validation() {
        assert!(ScoreWeights {
            rho_a: 0.6,
            rho_s: 0.6,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ScoreWeights {
            rho_t: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ScoreWeights::default().validate().is_ok());
    }

    #[test]
    fn graph_score_of_stored_weights() {
        let m = model(2);
        let only_change = ScoreWeights {
            rho_a: 0.0,
            rho_s: 0.0,
            rho_o: 0.0,
            rho_t: 0.8,
        };
        let views = vec![
            vec![view(0, 0.0, 0.0, 0.5, true, None)],
            vec![view(1, 100.0, 0.0, 1.0, true, None)],
        ];
        let s = FrameScorer::new(views, &m, 1000.0, only_change);
        assert!((s.graph_score(&[0, 0]) - 1.2).abs() < 1e-12);

        let zeros = vec![
            vec![view(0, 0.0, 0.0, 0.0, true, None)],
            vec![view(1, 100.0, 0.0, 0.0, true, None)],
        ];
        let s = FrameScorer::new(zeros, &m, 1000.0, ScoreWeights::default());
        assert_eq!(s.graph_score(&[0, 0]), 0.0);
    }

    #[test]
    fn overlap_penalty_examples() {
        let m = model(2);
        let h = ColorHistogram::single_bin(5);
        let twin = vec![
            vec![view(0, 0.0, 0.0, 0.0, true, Some(h.clone()))],
            vec![view(1, 0.0, 0.0, 0.0, true, Some(h.clone()))],
        ];
        let s = FrameScorer::new(twin, &m, 1000.0, ScoreWeights::default());
        assert!((s.components(0, &[0, 0]).overlap - 1.0).abs() < 1e-12);
        let half = vec![
            vec![view(0, 0.0, 0.0, 0.0, true, Some(h.clone()))],
            vec![view(1, 5.0, 0.0, 0.0, true, Some(h.clone()))],
        ];
        let s = FrameScorer::new(half, &m, 1000.0, ScoreWeights::default());
        assert!((s.components(0, &[0, 0]).overlap - 0.5).abs() < 1e-12);
        let apart = vec![
            vec![view(0, 0.0, 0.0, 0.0, true, Some(h.clone()))],
            vec![view(1, 50.0, 0.0, 0.0, true, Some(h))],
        ];
        let s = FrameScorer::new(apart, &m, 1000.0, ScoreWeights::default());
        assert_eq!(s.components(0, &[0, 0]).overlap, 0.0);
    }

    #[test]
    fn change_and_structure_components() {
        let m = model(2);
        let views = vec![
            vec![view(0, 0.0, 0.5, 0.0, true, None), view(5, 30.0, 0.5, 0.0, false, None)],
            vec![view(1, 100.0, 0.5, 0.0, true, None)],
        ];
        let s = FrameScorer::new(views, &m, 1000.0, ScoreWeights::default());
        assert_eq!(s.components(0, &[0, 0]).change, 0.0);
        assert_eq!(s.components(0, &[1, 0]).change, 1.0);
        // learned layout reproduced exactly: every lookup at a mode
        assert!((s.components(0, &[0, 0]).structural - 1.0).abs() < 1e-12);
        assert_eq!(s.components(1, &[0, 0]).appearance, 0.5);
    }

    #[test]
    fn steady_score_converges_to_geometric_limit() {
        let rho_t: f64 = 0.8;
        let c = 0.3;
        let mut w = 0.0;
        for _ in 0..200 {
            w = rho_t * w + c;
        }
        assert!((w - c / (1.0 - rho_t)).abs() < 1e-9);
    }

    fn scene(width: usize, height: usize, boxes: &[(BBox, [u8; 3])]) -> Frame {
        let mut f = Frame::filled(width, height, [20, 120, 20]).unwrap();
        for (b, c) in boxes {
            f.fill_box(b, *c);
        }
        f
    }

    fn three_objects() -> (Vec<BBox>, Vec<[u8; 3]>) {
        let boxes = vec![
            BBox::new(Point2::new(60.0, 60.0), 30.0, 30.0).unwrap(),
            BBox::new(Point2::new(160.0, 60.0), 30.0, 30.0).unwrap(),
            BBox::new(Point2::new(110.0, 140.0), 60.0, 24.0).unwrap(),
        ];
        (boxes, vec![[220, 30, 30], [30, 30, 220], [240, 240, 240]])
    }

    fn static_run(seed: u64, frames: usize) -> Vec<FrameOutput> {
        let (boxes, colors) = three_objects();
        let painted: Vec<_> = boxes.iter().copied().zip(colors).collect();
        let frame = scene(240, 180, &painted);
        let params = TrackerParams::new(
            AdjacencyMatrix::complete(3).unwrap(),
            CandidateMatrix::from_reference(3, 2, 5),
        );
        let mut t = Tracker::new(params, &frame, &boxes, seed).unwrap();
        (0..frames).map(|_| t.step(&frame).unwrap()).collect()
    }

    #[test]
    fn static_scene_keeps_selection() {
        let outs = static_run(3, 15);
        for o in &outs[1..] {
            assert_eq!(o.selection.tracker_ids, outs[0].selection.tracker_ids);
            assert!(o.selection.scores.iter().all(|s| s.change == 0.0));
            assert!(o.set_sizes.iter().all(|&n| n >= 1));
        }
        let (boxes, _) = three_objects();
        for (r, b) in outs.last().unwrap().records.iter().zip(&boxes) {
            assert!(r.bbox.center.distance(&b.center) < 3.0);
        }
    }

    #[test]
    fn identical_seeds_identical_runs() {
        assert_eq!(static_run(9, 8), static_run(9, 8));
    }

    #[test]
    fn wrong_frame_size_leaves_state() {
        let (boxes, colors) = three_objects();
        let painted: Vec<_> = boxes.iter().copied().zip(colors).collect();
        let frame = scene(240, 180, &painted);
        let params = TrackerParams::new(AdjacencyMatrix::complete(3).unwrap(), CandidateMatrix::zeros(3));
        let mut t = Tracker::new(params, &frame, &boxes, 1).unwrap();
        let other = Frame::filled(100, 100, [0, 0, 0]).unwrap();
        assert!(matches!(t.step(&other), Err(Error::Frame { index: 1, .. })));
        assert_eq!(t.frame_index(), 0);
        assert!(t.step(&frame).is_ok());
    }

    #[test]
    fn selection_never_worse_than_previous_and_f_bounded() {
        for o in static_run(21, 10) {
            assert!(o.selection.graph_score >= o.selection.previous_score);
            let w = ScoreWeights::default();
            for s in &o.selection.scores {
                assert!(s.total <= w.rho_a + w.rho_s + 1e-12);
                assert!(s.total >= -(w.rho_o * 2.0 + w.rho_c()) - 1e-12);
            }
        }
    }

    #[test]
    fn model_appearance_from_first_frame() {
        let (boxes, colors) = three_objects();
        let painted: Vec<_> = boxes.iter().copied().zip(colors).collect();
        let frame = scene(240, 180, &painted);
        let params = TrackerParams::new(AdjacencyMatrix::complete(3).unwrap(), CandidateMatrix::zeros(3));
        let t = Tracker::new(params, &frame, &boxes, 1).unwrap();
        assert_eq!(t.model().appearance(1), &extract_histogram(&frame, &boxes[1]).unwrap());
    }

    proptest! {
        #[test]
        fn scorer_bounds(
            conf in prop::collection::vec(0.0..0.999f64, 3),
            xs in prop::collection::vec(0.0..40.0f64, 3),
            kept in prop::collection::vec(any::<bool>(), 3),
            rho_a in 0.0..1.0f64, rho_o_share in 0.0..1.0f64,
        ) {
            let m = model(3);
            let rho_o = (1.0 - rho_a) * rho_o_share;
            let w = ScoreWeights { rho_a, rho_s: 0.0, rho_o, rho_t: 0.8 };
            let h = ColorHistogram::single_bin(1);
            let views = (0..3).map(|i| vec![view(i as u64, xs[i], conf[i], 0.0, kept[i], Some(h.clone()))]).collect();
            let s = FrameScorer::new(views, &m, 1000.0, w);
            for i in 0..3 {
                let c = s.components(i, &[0, 0, 0]);
                prop_assert!(c.overlap <= 2.0 + 1e-12);
                prop_assert!(c.total <= w.rho_a + w.rho_s + 1e-12);
                prop_assert!(c.total >= -(w.rho_o * c.overlap + w.rho_c()) - 1e-12);
            }
        }

        #[test]
        fn temporal_weight_geometric_bound(fs in prop::collection::vec(-1.5..1.0f64, 1..60), w0 in -3.0..3.0f64) {
            let rho_t = 0.8;
            let fmax = fs.iter().fold(0.0f64, |m, f| m.max(f.abs()));
            let mut w = w0;
            for (t, f) in fs.iter().enumerate() {
                w = rho_t * w + f;
                let bound = fmax / (1.0 - rho_t) + w0.abs() * rho_t.powi(t as i32 + 1);
                prop_assert!(w.abs() <= bound + 1e-9);
            }
        }
    }
}
