//! Grid search over the appearance, structure and overlap weights, scored by
//! MOTG, with per-parameter marginal means.

use std::io::Write;

use log::warn;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluation::{compute_metrics, TrackRecord};
use crate::io::{self, FrameSource};
use crate::pipeline::track_to_vec;
use crate::tracker::derive_seed;

const STREAM_SWEEP: u64 = 0x0053_5745_4550;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightTriple {
    pub rho_a: f64,
    pub rho_s: f64,
    pub rho_o: f64,
}

impl WeightTriple {
    pub fn rho_c(&self) -> f64 {
        1.0 - self.rho_a - self.rho_s - self.rho_o
    }

    pub fn is_valid(&self) -> bool {
        [self.rho_a, self.rho_s, self.rho_o]
            .iter()
            .all(|v| (0.0..=1.0).contains(v))
            && self.rho_a + self.rho_s + self.rho_o <= 1.0 + 1e-9
    }
}

/// `0, step, 2·step, …, 1`. `step` must divide 1.
pub fn grid_values(step: f64) -> Result<Vec<f64>> {
    let n = (1.0 / step).round();
    if !(step > 0.0 && step <= 1.0) || ((n * step) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("sweep step {step} must divide 1")));
    }
    let n = n as usize;
    Ok((0..=n).map(|k| k as f64 / n as f64).collect())
}

/// Every valid triple over `values`, in lexicographic (ρ_A, ρ_S, ρ_O) order.
pub fn weight_grid(values: &[f64]) -> Vec<WeightTriple> {
    let mut out = Vec::new();
    let mut skipped = 0;
    for &rho_a in values {
        for &rho_s in values {
            for &rho_o in values {
                let w = WeightTriple { rho_a, rho_s, rho_o };
                if w.is_valid() {
                    out.push(w);
                } else {
                    skipped += 1;
                }
            }
        }
    }
    if skipped > 0 {
        warn!("skipped {skipped} weight triples whose sum exceeds 1");
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub weights: WeightTriple,
    /// MOTG of each repeat.
    pub motg: Vec<f64>,
}

impl SweepCell {
    pub fn mean(&self) -> f64 {
        self.motg.iter().sum::<f64>() / self.motg.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub parameter: &'static str,
    pub value: f64,
    pub mean_motg: f64,
    pub cells: usize,
}

/// Tracks `source` once per cell and repeat, seeding each run from the
/// master seed, the cell index and the repeat index.
pub fn run_sweep<S: FrameSource + ?Sized>(
    config: &RunConfig,
    source: &S,
    ground_truth: &[TrackRecord],
    grid: &[WeightTriple],
    repeats: usize,
) -> Result<Vec<SweepCell>> {
    if repeats == 0 {
        return Err(Error::Config("sweep repeats must be at least 1".into()));
    }
    let (start, first) = io::initial_annotations(ground_truth)?;
    let base = config.tracker_params(first.len())?;
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..repeats).map(move |r| (c, r)))
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let mut params = base.clone();
            let w = grid[c];
            params.weights.rho_a = w.rho_a;
            params.weights.rho_s = w.rho_s;
            params.weights.rho_o = w.rho_o;
            params.validate()?;
            let seed = derive_seed(config.seed, STREAM_SWEEP, c as u64, r as u64);
            let hyp = track_to_vec(source, &params, start, &first, seed)?;
            Ok(compute_metrics(ground_truth, &hyp, config.iou_threshold)?.motg)
        })
        .collect::<Result<_>>()?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(c, &weights)| SweepCell {
            weights,
            motg: scores[c * repeats..(c + 1) * repeats].to_vec(),
        })
        .collect())
}

type Getter = (&'static str, fn(&WeightTriple) -> f64);

/// Mean cell MOTG for each (parameter, value) pair present in the grid.
pub fn marginals(cells: &[SweepCell]) -> Vec<Marginal> {
    let getters: [Getter; 4] = [
        ("rho_A", |w| w.rho_a),
        ("rho_S", |w| w.rho_s),
        ("rho_O", |w| w.rho_o),
        ("rho_C", |w| w.rho_c()),
    ];
    let mut out = Vec::new();
    for (parameter, get) in getters {
        let mut values: Vec<f64> = cells.iter().map(|c| (get(&c.weights) * 1e6).round() / 1e6).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for value in values {
            let members: Vec<f64> = cells
                .iter()
                .filter(|c| (get(&c.weights) - value).abs() < 1e-6)
                .map(SweepCell::mean)
                .collect();
            out.push(Marginal {
                parameter,
                value,
                mean_motg: members.iter().sum::<f64>() / members.len() as f64,
                cells: members.len(),
            });
        }
    }
    out
}

fn fmt_weight(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".into()
    } else {
        r.to_string()
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn write_cells<W: Write>(writer: W, cells: &[SweepCell]) -> Result<()> {
    let repeats = cells.first().map_or(0, |c| c.motg.len());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header: Vec<String> = ["rho_A", "rho_S", "rho_O", "rho_C", "motg_mean"]
        .map(String::from)
        .to_vec();
    header.extend((1..=repeats).map(|r| format!("motg_{r}")));
    w.write_record(&header).map_err(csv_err)?;
    for c in cells {
        let mut row = vec![
            fmt_weight(c.weights.rho_a),
            fmt_weight(c.weights.rho_s),
            fmt_weight(c.weights.rho_o),
            fmt_weight(c.weights.rho_c()),
            format!("{:.6}", c.mean()),
        ];
        row.extend(c.motg.iter().map(|m| format!("{m:.6}")));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_marginals<W: Write>(writer: W, marginals: &[Marginal]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["parameter", "value", "motg_mean", "cells"])
        .map_err(csv_err)?;
    for m in marginals {
        w.write_record([
            m.parameter.to_string(),
            fmt_weight(m.value),
            format!("{:.6}", m.mean_motg),
            m.cells.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
