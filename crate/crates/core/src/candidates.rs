//! Structural candidate generation: new position hypotheses for an object,
//! sampled from the learned angle/distance distributions of edges leaving a
//! reference object, then gated by overlap and appearance.

use log::debug;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::appearance::{box_likelihood, FrameFeatures};
use crate::error::{Error, Result};
use crate::geometry::{overlap_ratio, BBox, Point2};
use crate::graph::{AdjacencyMatrix, ModelGraph};
use crate::particle::{FilterParams, ParticleCloud};

/// `m_ij` = how many candidates object `i` generates for object `j` when
/// used as a reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateMatrix {
    n: usize,
    entries: Vec<u32>,
}

impl CandidateMatrix {
    pub fn new(rows: &[Vec<u32>]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Config(format!(
                    "candidate matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row[i] != 0 {
                return Err(Error::Config(format!("candidate matrix diagonal entry {i} must be 0")));
            }
            entries.extend_from_slice(row);
        }
        Ok(Self { n, entries })
    }

    /// No candidates at all.
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![0; n * n],
        }
    }

    /// `count` candidates for every object from one reference object.
    pub fn from_reference(n: usize, reference: usize, count: u32) -> Self {
        let mut m = Self::zeros(n);
        for j in 0..n {
            if j != reference {
                m.entries[reference * n + j] = count;
            }
        }
        m
    }

    /// Rejects entries on pairs the adjacency matrix does not connect.
    pub fn check_against(&self, adjacency: &AdjacencyMatrix) -> Result<()> {
        if adjacency.len() != self.n {
            return Err(Error::Config(format!(
                "candidate matrix is {}x{0}, adjacency is {1}x{1}",
                self.n,
                adjacency.len()
            )));
        }
        for i in 0..self.n {
            for j in 0..self.n {
                if self.get(i, j) > 0 && !adjacency.has_edge(i, j) {
                    return Err(Error::Config(format!("candidates requested on missing edge {i}->{j}")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.entries[i * self.n + j]
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&e| e as u64).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u32>> {
        self.entries.chunks(self.n).map(|r| r.to_vec()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateNoise {
    /// Angle noise, radians.
    pub sigma_theta: f64,
    /// Normalized-distance noise.
    pub sigma_d: f64,
}

impl Default for CandidateNoise {
    fn default() -> Self {
        Self {
            sigma_theta: std::f64::consts::PI / 18.0,
            sigma_d: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub object: usize,
    pub position: Point2,
    pub source: usize,
    pub appearance_score: f64,
}

impl Candidate {
    /// A new tracker cloud centered on the candidate.
    pub fn spawn_cloud<R: Rng + ?Sized>(
        &self,
        box_size: (f64, f64),
        model: &ModelGraph,
        params: &FilterParams,
        rng: &mut R,
    ) -> ParticleCloud {
        ParticleCloud::init(
            self.position,
            box_size,
            model.appearance(self.object).clone(),
            params,
            rng,
        )
    }
}

fn gaussian<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("positive deviation").sample(rng)
    } else {
        0.0
    }
}

/// Draws `m_ij` candidates for each object `j` from each reference `i`.
/// Distances are denormalized by the image width before offsetting.
pub fn sample_candidates<R: Rng + ?Sized>(
    model: &ModelGraph,
    reference_positions: &[Point2],
    matrix: &CandidateMatrix,
    noise: CandidateNoise,
    image_width: f64,
    rng: &mut R,
) -> Vec<Candidate> {
    let n = model.object_count();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let count = matrix.get(i, j);
            if count == 0 {
                continue;
            }
            let Some(edge) = model.edge(i, j) else {
                debug!("no edge {i}->{j}; skipping {count} candidates");
                continue;
            };
            for _ in 0..count {
                let (Ok(theta), Ok(d)) = (edge.angle.sample(rng), edge.distance.sample(rng)) else {
                    debug!("edge {i}->{j} has an empty histogram");
                    break;
                };
                let theta = theta + gaussian(noise.sigma_theta, rng);
                let d = (d + gaussian(noise.sigma_d, rng)).max(0.0);
                let reach = d * image_width;
                let origin = reference_positions[i];
                out.push(Candidate {
                    object: j,
                    position: Point2::new(origin.x + reach * theta.cos(), origin.y + reach * theta.sin()),
                    source: i,
                    appearance_score: 0.0,
                });
            }
        }
    }
    out
}

/// Thresholds applied by [`filter_candidates`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateGates {
    pub tau_o: f64,
    pub tau_s: f64,
    pub sigma_b: f64,
}

/// Drops candidates that overlap an older tracker (ratio of the candidate
/// box covered, above `tau_o`), fall outside the frame, or whose appearance
/// likelihood is below `tau_s`. Survivors carry their likelihood.
pub fn filter_candidates(
    candidates: Vec<Candidate>,
    older_boxes: &[BBox],
    box_sizes: &[(f64, f64)],
    features: &FrameFeatures<'_>,
    model: &ModelGraph,
    gates: CandidateGates,
) -> Vec<Candidate> {
    candidates
        .into_iter()
        .filter_map(|mut c| {
            let (w, h) = box_sizes[c.object];
            let bbox = BBox {
                center: c.position,
                width: w,
                height: h,
            };
            if !(c.position.x.is_finite() && c.position.y.is_finite()) {
                return None;
            }
            if older_boxes.iter().any(|o| overlap_ratio(&bbox, o) > gates.tau_o) {
                return None;
            }
            features.frame().window(&bbox)?;
            let score = box_likelihood(features, model.appearance(c.object), &bbox, gates.sigma_b);
            if score < gates.tau_s {
                return None;
            }
            c.appearance_score = score;
            Some(c)
        })
        .collect()
}
