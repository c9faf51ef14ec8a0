//! CLEAR-MOT evaluation of hypothesis tracks against ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// One box for one object in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRecord {
    pub frame: usize,
    pub object: u64,
    pub bbox: BBox,
    /// Present on hypotheses only.
    pub confidence: Option<f64>,
}

impl TrackRecord {
    pub fn new(frame: usize, object: u64, bbox: BBox) -> Self {
        Self {
            frame,
            object,
            bbox,
            confidence: None,
        }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = Some(confidence);
        self
    }
}

/// Correspondence state carried between frames.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchState {
    /// Ground-truth id to hypothesis id, as matched in the previous frame.
    pub previous: BTreeMap<u64, u64>,
    /// Most recent match of each ground-truth id, however old.
    pub last_known: BTreeMap<u64, u64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameMatch {
    /// (ground-truth id, hypothesis id, IoU).
    pub pairs: Vec<(u64, u64, f64)>,
    pub ground_truth: usize,
    pub misses: usize,
    pub false_positives: usize,
    pub mismatches: usize,
    pub id_switches: usize,
    pub distance_sum: f64,
}

impl FrameMatch {
    pub fn matches(&self) -> usize {
        self.pairs.len()
    }
}

/// Matches one frame. Correspondences from the previous frame survive while
/// their IoU stays at or above `threshold`; the rest are assigned by maximum
/// total IoU among pairs passing the threshold. A match whose hypothesis
/// differs from the last one seen for that ground truth is a mismatch; one
/// that differs from the previous frame's match is also an identity switch.
pub fn match_frame(gt: &[(u64, BBox)], hyp: &[(u64, BBox)], state: &mut MatchState, threshold: f64) -> FrameMatch {
    let mut gt_used = vec![false; gt.len()];
    let mut hyp_used = vec![false; hyp.len()];
    let mut pairs = Vec::new();

    for (gi, (gid, gbox)) in gt.iter().enumerate() {
        let Some(prev_h) = state.previous.get(gid) else {
            continue;
        };
        if let Some(hi) = hyp.iter().position(|(hid, _)| hid == prev_h) {
            let overlap = iou(gbox, &hyp[hi].1);
            if !hyp_used[hi] && overlap >= threshold {
                gt_used[gi] = true;
                hyp_used[hi] = true;
                pairs.push((gi, hi, overlap));
            }
        }
    }

    let free_g: Vec<usize> = (0..gt.len()).filter(|&i| !gt_used[i]).collect();
    let free_h: Vec<usize> = (0..hyp.len()).filter(|&i| !hyp_used[i]).collect();
    if !free_g.is_empty() && !free_h.is_empty() {
        let weights: Vec<Vec<f64>> = free_g
            .iter()
            .map(|&g| {
                free_h
                    .iter()
                    .map(|&h| {
                        let o = iou(&gt[g].1, &hyp[h].1);
                        if o >= threshold {
                            o
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        for (r, c) in max_weight_assignment(&weights).into_iter().enumerate() {
            if let Some(c) = c {
                if weights[r][c] > 0.0 {
                    pairs.push((free_g[r], free_h[c], weights[r][c]));
                }
            }
        }
    }

    pairs.sort_by_key(|&(g, _, _)| gt[g].0);
    let mut out = FrameMatch {
        ground_truth: gt.len(),
        misses: gt.len() - pairs.len(),
        false_positives: hyp.len() - pairs.len(),
        ..Default::default()
    };
    let mut previous = BTreeMap::new();
    for &(g, h, overlap) in &pairs {
        let (gid, hid) = (gt[g].0, hyp[h].0);
        if state.last_known.get(&gid).is_some_and(|&k| k != hid) {
            out.mismatches += 1;
        }
        if state.previous.get(&gid).is_some_and(|&k| k != hid) {
            out.id_switches += 1;
        }
        state.last_known.insert(gid, hid);
        previous.insert(gid, hid);
        out.distance_sum += overlap;
        out.pairs.push((gid, hid, overlap));
    }
    state.previous = previous;
    out
}

/// Maximum-weight assignment of rows to columns (Hungarian method on the
/// negated weights). Returns the column for each row, `None` when the
/// matrix has more rows than columns and the row is left out.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = weights[0].len();
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let cost = |i: usize, j: usize| {
        if transpose {
            -weights[j][i]
        } else {
            -weights[i][j]
        }
    };

    // 1-based potentials; p[j] is the row assigned to column j
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out = vec![None; rows];
    for j in 1..=m {
        if p[j] != 0 {
            let (r, c) = if transpose {
                (j - 1, p[j] - 1)
            } else {
                (p[j] - 1, j - 1)
            };
            out[r] = Some(c);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub motp: f64,
    pub mota: f64,
    pub motg: f64,
    pub idsw: usize,
    pub misses: usize,
    pub false_positives: usize,
    pub mismatches: usize,
    pub matches: usize,
    pub ground_truth: usize,
    pub tp_rate: f64,
    pub fp_rate: f64,
    /// Set when nothing matched and MOTP is reported as 0.
    pub motp_undefined: bool,
}

const REPORT_KEYS: [&str; 12] = [
    "motp",
    "mota",
    "motg",
    "idsw",
    "misses",
    "false_positives",
    "mismatches",
    "matches",
    "ground_truth",
    "tp_rate",
    "fp_rate",
    "motp_undefined",
];

impl MetricsReport {
    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "motp = {}", self.motp);
        let _ = writeln!(s, "mota = {}", self.mota);
        let _ = writeln!(s, "motg = {}", self.motg);
        let _ = writeln!(s, "idsw = {}", self.idsw);
        let _ = writeln!(s, "misses = {}", self.misses);
        let _ = writeln!(s, "false_positives = {}", self.false_positives);
        let _ = writeln!(s, "mismatches = {}", self.mismatches);
        let _ = writeln!(s, "matches = {}", self.matches);
        let _ = writeln!(s, "ground_truth = {}", self.ground_truth);
        let _ = writeln!(s, "tp_rate = {}", self.tp_rate);
        let _ = writeln!(s, "fp_rate = {}", self.fp_rate);
        let _ = writeln!(s, "motp_undefined = {}", self.motp_undefined);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Input(format!("report line {}: expected key = value", n + 1)))?;
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        for key in REPORT_KEYS {
            if !values.contains_key(key) {
                return Err(Error::Input(format!("report is missing {key}")));
            }
        }
        let real = |k: &str| -> Result<f64> {
            values[k]
                .parse()
                .map_err(|_| Error::Input(format!("report field {k} is not a number")))
        };
        let count = |k: &str| -> Result<usize> {
            values[k]
                .parse()
                .map_err(|_| Error::Input(format!("report field {k} is not a count")))
        };
        Ok(Self {
            motp: real("motp")?,
            mota: real("mota")?,
            motg: real("motg")?,
            idsw: count("idsw")?,
            misses: count("misses")?,
            false_positives: count("false_positives")?,
            mismatches: count("mismatches")?,
            matches: count("matches")?,
            ground_truth: count("ground_truth")?,
            tp_rate: real("tp_rate")?,
            fp_rate: real("fp_rate")?,
            motp_undefined: values["motp_undefined"]
                .parse()
                .map_err(|_| Error::Input("report field motp_undefined is not a boolean".into()))?,
        })
    }
}

fn by_frame(records: &[TrackRecord], what: &str) -> Result<BTreeMap<usize, Vec<(u64, BBox)>>> {
    let mut seen = BTreeSet::new();
    let mut frames: BTreeMap<usize, Vec<(u64, BBox)>> = BTreeMap::new();
    for r in records {
        if !seen.insert((r.frame, r.object)) {
            return Err(Error::Input(format!(
                "duplicate {what} record for frame {} object {}",
                r.frame, r.object
            )));
        }
        frames.entry(r.frame).or_default().push((r.object, r.bbox));
    }
    for boxes in frames.values_mut() {
        boxes.sort_by_key(|&(id, _)| id);
    }
    Ok(frames)
}

pub fn compute_metrics(gt: &[TrackRecord], hyp: &[TrackRecord], threshold: f64) -> Result<MetricsReport> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!("IoU threshold {threshold} outside (0, 1]")));
    }
    let gt_frames = by_frame(gt, "ground-truth")?;
    let hyp_frames = by_frame(hyp, "hypothesis")?;
    let frames: BTreeSet<usize> = gt_frames.keys().chain(hyp_frames.keys()).copied().collect();

    let mut state = MatchState::default();
    let mut total = FrameMatch::default();
    let empty = Vec::new();
    for f in frames {
        let g = gt_frames.get(&f).unwrap_or(&empty);
        let h = hyp_frames.get(&f).unwrap_or(&empty);
        let m = match_frame(g, h, &mut state, threshold);
        total.ground_truth += m.ground_truth;
        total.misses += m.misses;
        total.false_positives += m.false_positives;
        total.mismatches += m.mismatches;
        total.id_switches += m.id_switches;
        total.distance_sum += m.distance_sum;
        total.pairs.extend(m.pairs);
    }

    let g = total.ground_truth;
    if g == 0 {
        return Err(Error::NoGroundTruth);
    }
    let c = total.pairs.len();
    let motp = if c > 0 { total.distance_sum / c as f64 } else { 0.0 };
    let mota = 1.0 - (total.misses + total.false_positives + total.mismatches) as f64 / g as f64;
    Ok(MetricsReport {
        motp,
        mota,
        motg: (motp + mota) / 2.0,
        idsw: total.id_switches,
        misses: total.misses,
        false_positives: total.false_positives,
        mismatches: total.mismatches,
        matches: c,
        ground_truth: g,
        tp_rate: c as f64 / g as f64,
        fp_rate: total.false_positives as f64 / g as f64,
        motp_undefined: c == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(x: f64, y: f64) -> BBox {
        BBox::from_corner(x, y, 10.0, 10.0).unwrap()
    }

    fn rec(frame: usize, object: u64, x: f64, y: f64) -> TrackRecord {
        TrackRecord::new(frame, object, unit(x, y))
    }

    #[test]
    fn identical_frame() {
        let boxes = vec![(1, unit(0.0, 0.0)), (2, unit(50.0, 0.0))];
        let m = match_frame(&boxes, &boxes, &mut MatchState::default(), 0.5);
        assert_eq!(m.matches(), 2);
        assert_eq!((m.misses, m.false_positives, m.mismatches), (0, 0, 0));
        assert!(m.pairs.iter().all(|p| p.2 == 1.0));
    }

    #[test]
    fn missing_hypothesis() {
        let gt = vec![(1, unit(0.0, 0.0)), (2, unit(50.0, 0.0))];
        let m = match_frame(&gt, &gt[..1], &mut MatchState::default(), 0.5);
        assert_eq!((m.misses, m.false_positives), (1, 0));
    }

    #[test]
    fn swapped_ids_count_twice() {
        let gt = vec![
            rec(0, 1, 0.0, 0.0),
            rec(0, 2, 50.0, 0.0),
            rec(1, 1, 0.0, 0.0),
            rec(1, 2, 50.0, 0.0),
        ];
        let hyp = vec![
            rec(0, 10, 0.0, 0.0),
            rec(0, 20, 50.0, 0.0),
            rec(1, 20, 0.0, 0.0),
            rec(1, 10, 50.0, 0.0),
        ];
        let r = compute_metrics(&gt, &hyp, 0.5).unwrap();
        assert_eq!((r.mismatches, r.idsw), (2, 2));
        assert_eq!(r.mota, 0.5);
    }

    #[test]
    fn perfect_tracks() {
        let gt: Vec<_> = (0..4).map(|f| rec(f, 1, f as f64, 0.0)).collect();
        let r = compute_metrics(&gt, &gt, 0.5).unwrap();
        assert_eq!((r.motp, r.mota, r.motg, r.idsw), (1.0, 1.0, 1.0, 0));
    }

    #[test]
    fn one_miss_in_ten() {
        let gt: Vec<_> = (0..5)
            .flat_map(|f| [rec(f, 1, 0.0, 0.0), rec(f, 2, 40.0, 0.0)])
            .collect();
        let hyp: Vec<_> = gt
            .iter()
            .copied()
            .filter(|r| !(r.frame == 3 && r.object == 2))
            .collect();
        let r = compute_metrics(&gt, &hyp, 0.5).unwrap();
        assert!((r.mota - 0.9).abs() < 1e-12);
        assert!((r.tp_rate - 0.9).abs() < 1e-12);
    }

    #[test]
    fn empty_hypothesis_gives_zero_mota() {
        let gt = vec![rec(0, 1, 0.0, 0.0), rec(1, 1, 0.0, 0.0)];
        let r = compute_metrics(&gt, &[], 0.5).unwrap();
        assert_eq!((r.mota, r.misses, r.motp), (0.0, 2, 0.0));
        assert!(r.motp_undefined);
    }

    #[test]
    fn negative_mota() {
        let gt = vec![rec(0, 1, 0.0, 0.0)];
        let hyp = vec![rec(0, 7, 100.0, 0.0), rec(0, 8, 200.0, 0.0)];
        let r = compute_metrics(&gt, &hyp, 0.5).unwrap();
        assert_eq!(r.mota, -2.0);
    }

    #[test]
    fn no_ground_truth_is_an_error() {
        assert!(matches!(
            compute_metrics(&[], &[rec(0, 1, 0.0, 0.0)], 0.5),
            Err(Error::NoGroundTruth)
        ));
    }

    #[test]
    fn duplicate_records_rejected() {
        let gt = vec![rec(0, 1, 0.0, 0.0), rec(0, 1, 5.0, 0.0)];
        assert!(matches!(compute_metrics(&gt, &[], 0.5), Err(Error::Input(_))));
    }

    #[test]
    fn previous_match_kept_over_better_newcomer() {
        // hyp 10 still passes, so it keeps gt 1 even though hyp 20 fits better
        let gt = vec![rec(0, 1, 0.0, 0.0), rec(1, 1, 0.0, 0.0)];
        let hyp = vec![rec(0, 10, 0.0, 0.0), rec(1, 10, 2.0, 0.0), rec(1, 20, 0.0, 0.0)];
        let r = compute_metrics(&gt, &hyp, 0.5).unwrap();
        assert_eq!((r.mismatches, r.false_positives), (0, 1));
    }

    #[test]
    fn mismatch_against_last_known_after_gap() {
        // gt 1 matched to 10, then missed, then matched to 20
        let gt: Vec<_> = (0..3).map(|f| rec(f, 1, 0.0, 0.0)).collect();
        let hyp = vec![rec(0, 10, 0.0, 0.0), rec(2, 20, 0.0, 0.0)];
        let r = compute_metrics(&gt, &hyp, 0.5).unwrap();
        assert_eq!((r.mismatches, r.idsw, r.misses), (1, 0, 1));
    }

    #[test]
    fn assignment_maximizes_total_weight() {
        let w = vec![vec![0.9, 0.8], vec![0.85, 0.0]];
        assert_eq!(max_weight_assignment(&w), vec![Some(1), Some(0)]);
        let tall = vec![vec![0.1], vec![0.7], vec![0.3]];
        assert_eq!(max_weight_assignment(&tall), vec![None, Some(0), None]);
    }

    #[test]
    fn report_text_round_trip() {
        let gt = vec![rec(0, 1, 0.0, 0.0), rec(0, 2, 3.0, 0.0)];
        let hyp = vec![rec(0, 1, 1.0, 0.0)];
        let r = compute_metrics(&gt, &hyp, 0.5).unwrap();
        assert_eq!(MetricsReport::from_text(&r.to_text()).unwrap(), r);
    }

    fn brute_force_best(w: &[Vec<f64>]) -> f64 {
        fn go(w: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == w.len() {
                return 0.0;
            }
            let mut best = go(w, row + 1, used);
            for c in 0..used.len() {
                if !used[c] {
                    used[c] = true;
                    best = best.max(w[row][c] + go(w, row + 1, used));
                    used[c] = false;
                }
            }
            best
        }
        go(w, 0, &mut vec![false; w[0].len()])
    }

    fn arb_boxes() -> impl Strategy<Value = Vec<(u64, BBox)>> {
        prop::collection::vec((0.0..60.0f64, 0.0..60.0f64), 0..5).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (x, y))| (i as u64, BBox::from_corner(x, y, 20.0, 20.0).unwrap()))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn assignment_matches_brute_force(
            w in (1usize..5, 1usize..5).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(0.0..1.0f64, c), r))
        ) {
            let a = max_weight_assignment(&w);
            let total: f64 = a.iter().enumerate().filter_map(|(r, c)| c.map(|c| w[r][c])).sum();
            prop_assert!((total - brute_force_best(&w)).abs() < 1e-9);
            let cols: Vec<_> = a.iter().flatten().collect();
            let unique: BTreeSet<_> = cols.iter().collect();
            prop_assert_eq!(cols.len(), unique.len());
        }

        #[test]
        fn motp_at_least_threshold(gt in arb_boxes(), hyp in arb_boxes()) {
            let gt: Vec<_> = gt.into_iter().map(|(i, b)| TrackRecord::new(0, i, b)).collect();
            let hyp: Vec<_> = hyp.into_iter().map(|(i, b)| TrackRecord::new(0, i, b)).collect();
            if let Ok(r) = compute_metrics(&gt, &hyp, 0.5) {
                prop_assert!(r.mota <= 1.0);
                if r.matches > 0 {
                    prop_assert!(r.motp >= 0.5 && r.motp <= 1.0 + 1e-12);
                }
            }
        }

        #[test]
        fn relabeling_and_reordering_invariant(
            frames in prop::collection::vec((arb_boxes(), arb_boxes()), 1..5),
            shift in 1u64..100,
        ) {
            let mut gt = Vec::new();
            let mut hyp = Vec::new();
            for (f, (g, h)) in frames.into_iter().enumerate() {
                gt.extend(g.into_iter().map(|(i, b)| TrackRecord::new(f, i, b)));
                hyp.extend(h.into_iter().map(|(i, b)| TrackRecord::new(f, i, b)));
            }
            let Ok(base) = compute_metrics(&gt, &hyp, 0.5) else { return Ok(()) };
            let relabeled: Vec<_> = hyp.iter().map(|r| TrackRecord { object: (r.object * 7 + shift) % 1000, ..*r }).collect();
            let mut reordered = relabeled.clone();
            reordered.reverse();
            let mut gt_rev = gt.clone();
            gt_rev.reverse();
            let other = compute_metrics(&gt_rev, &reordered, 0.5).unwrap();
            prop_assert_eq!(base.mota, other.mota);
            prop_assert_eq!(base.idsw, other.idsw);
            prop_assert!((base.motp - other.motp).abs() < 1e-12);
        }
    }
}
