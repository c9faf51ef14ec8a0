//! End-to-end runs over frames on disk or in memory: tracking, evaluation,
//! scene export and overlays.

use std::path::Path;

use log::info;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluation::{compute_metrics, MetricsReport, TrackRecord};
use crate::geometry::BBox;
use crate::io::{self, FrameSource, TrackWriter};
use crate::sim::{generate, scenario, standard_suite, SyntheticSequence};
use crate::tracker::{Tracker, TrackerParams};

/// Tracks `source` from frame `start`, where `annotations` give every
/// object's box. Calls `emit` once per frame with that frame's records,
/// the first call echoing the annotations with confidence 1.
pub fn track_frames<S, F>(
    source: &S,
    params: &TrackerParams,
    start: usize,
    annotations: &[(u64, BBox)],
    seed: u64,
    mut emit: F,
) -> Result<()>
where
    S: FrameSource + ?Sized,
    F: FnMut(&[TrackRecord]) -> Result<()>,
{
    if start >= source.len() {
        return Err(Error::Input(format!(
            "annotations start at frame {start} but the sequence has {} frames",
            source.len()
        )));
    }
    let ids: Vec<u64> = annotations.iter().map(|a| a.0).collect();
    let boxes: Vec<BBox> = annotations.iter().map(|a| a.1).collect();
    let mut tracker = Tracker::new(params.clone(), &source.frame(start)?, &boxes, seed)?;
    let first: Vec<TrackRecord> = annotations
        .iter()
        .map(|&(id, b)| TrackRecord::new(start, id, b).with_confidence(1.0))
        .collect();
    emit(&first)?;
    for t in start + 1..source.len() {
        let out = tracker.step(&source.frame(t)?)?;
        let records: Vec<TrackRecord> = out
            .records
            .into_iter()
            .map(|r| TrackRecord {
                frame: t,
                object: ids[r.object as usize],
                ..r
            })
            .collect();
        emit(&records)?;
    }
    Ok(())
}

/// Tracks and collects every record in memory.
pub fn track_to_vec<S: FrameSource + ?Sized>(
    source: &S,
    params: &TrackerParams,
    start: usize,
    annotations: &[(u64, BBox)],
    seed: u64,
) -> Result<Vec<TrackRecord>> {
    let mut all = Vec::with_capacity(source.len() * annotations.len());
    track_frames(source, params, start, annotations, seed, |r| {
        all.extend_from_slice(r);
        Ok(())
    })?;
    Ok(all)
}

/// Tracks `source` and writes the track CSV to `out`, frame by frame. On a
/// failure the rows written so far are flushed before the error returns.
/// Returns the number of records written.
pub fn run_track<S: FrameSource + ?Sized>(
    config: &RunConfig,
    source: &S,
    annotations: &[TrackRecord],
    out: &Path,
) -> Result<usize> {
    let (start, first) = io::initial_annotations(annotations)?;
    let params = config.tracker_params(first.len())?;
    let mut writer = TrackWriter::new(io::create_output(out)?, true)?;
    let mut count = 0;
    let result = track_frames(source, &params, start, &first, config.seed, |records| {
        for r in records {
            writer.write(r)?;
        }
        count += records.len();
        Ok(())
    });
    writer.flush()?;
    result?;
    info!("wrote {count} records to {}", out.display());
    Ok(count)
}

pub fn run_evaluate(gt: &Path, hyp: &Path, threshold: f64) -> Result<MetricsReport> {
    let gt = io::read_tracks(gt)?;
    let hyp = io::read_tracks(hyp)?;
    compute_metrics(&gt, &hyp, threshold)
}

/// Generates a named scene and writes `frames/`, `gt.csv`, `events.csv` and
/// a `config.txt` carrying the scene's graph matrices and the seed.
pub fn run_simulate(name: &str, seed: u64, frames: Option<usize>, out: &Path) -> Result<SyntheticSequence> {
    let mut cfg = scenario(name).ok_or_else(|| {
        let names: Vec<String> = standard_suite().into_iter().map(|s| s.name).collect();
        Error::Config(format!("unknown scenario '{name}' (known: {})", names.join(", ")))
    })?;
    if let Some(n) = frames {
        cfg.frames = n;
    }
    let seq = generate(&cfg, seed)?;
    io::create_output_dir(out)?;
    io::write_frames(&seq, &out.join("frames"))?;
    io::write_tracks_file(&out.join("gt.csv"), &seq.ground_truth())?;
    io::write_events(io::create_output(&out.join("events.csv"))?, &seq.events)?;
    io::write_output(
        &out.join("config.txt"),
        &RunConfig::from_params(&cfg.tracker_params(), seed).to_text(),
    )?;
    info!("{}: {} frames written to {}", cfg.name, seq.len(), out.display());
    Ok(seq)
}

pub fn run_overlay<S: FrameSource + ?Sized>(source: &S, tracks: &Path, out: &Path) -> Result<()> {
    let records = io::read_tracks(tracks)?;
    io::write_overlays(source, &records, out)
}
