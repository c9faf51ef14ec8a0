//! The model graph: a directed attributed relational graph whose vertices
//! carry reference appearance histograms and whose edges carry learned
//! angle and distance distributions.
//!
//! Edge distributions are histograms that receive one unit of mass per
//! observation, spread by a convolution kernel whose width depends on how
//! confident the tracker was about the observation.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::Rng;

use crate::appearance::{ColorHistogram, FrameFeatures, HIST_BINS};
use crate::error::{Error, Result};
use crate::geometry::{BBox, EdgeMeasurement, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Indices wrap modulo the bin count (angles).
    Circular,
    /// Out-of-range taps land in the terminal bin (distances).
    Bounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeHistogram {
    bins: Vec<f64>,
    min: f64,
    max: f64,
    topology: Topology,
}

impl AttributeHistogram {
    pub fn new(bins: usize, min: f64, max: f64, topology: Topology) -> Result<Self> {
        if bins == 0 || !(max > min) {
            return Err(Error::Config(format!(
                "attribute histogram needs bins > 0 and max > min (bins={bins}, range=[{min}, {max}])"
            )));
        }
        Ok(Self {
            bins: vec![0.0; bins],
            min,
            max,
            topology,
        })
    }

    pub fn angle(bins: usize) -> Result<Self> {
        Self::new(bins, 0.0, TAU, Topology::Circular)
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn range(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn total(&self) -> f64 {
        self.bins.iter().sum()
    }

    pub fn bin_width(&self) -> f64 {
        (self.max - self.min) / self.bins.len() as f64
    }

    /// `floor((v − min)/(max − min)·bins)` clamped to `[0, bins−1]`.
    /// Circular histograms first reduce the value into the range.
    pub fn bin_index(&self, value: f64) -> usize {
        let n = self.bins.len();
        let v = match self.topology {
            Topology::Circular => self.min + (value - self.min).rem_euclid(self.max - self.min),
            Topology::Bounded => value,
        };
        let raw = ((v - self.min) / (self.max - self.min) * n as f64).floor();
        raw.clamp(0.0, (n - 1) as f64) as usize
    }

    pub fn bin_center(&self, index: usize) -> f64 {
        self.min + (index as f64 + 0.5) * self.bin_width()
    }

    /// Adds one unit of mass spread by `kernel`, centered on the bin holding
    /// `value`.
    pub fn vote(&mut self, value: f64, kernel: &[f64]) -> Result<()> {
        if value.is_nan() {
            return Err(Error::NonFinite("vote value"));
        }
        let n = self.bins.len() as isize;
        let center = self.bin_index(value) as isize;
        let half = (kernel.len() / 2) as isize;
        for (k, &w) in kernel.iter().enumerate() {
            let idx = center + k as isize - half;
            let idx = match self.topology {
                Topology::Circular => idx.rem_euclid(n),
                Topology::Bounded => idx.clamp(0, n - 1),
            };
            self.bins[idx as usize] += w;
        }
        Ok(())
    }

    /// Mass of the bin holding `value` divided by the largest bin mass.
    pub fn lookup_likelihood(&self, value: f64) -> Result<f64> {
        let peak = self.bins.iter().cloned().fold(0.0, f64::max);
        if !(peak > 0.0) {
            return Err(Error::EmptyHistogram);
        }
        Ok(self.bins[self.bin_index(value)] / peak)
    }

    /// Draws a bin with probability proportional to its mass and returns its
    /// center value.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::EmptyHistogram);
        }
        let mut u = rng.random::<f64>() * total;
        for (i, &m) in self.bins.iter().enumerate() {
            if u < m {
                return Ok(self.bin_center(i));
            }
            u -= m;
        }
        // rounding left u past the last non-empty bin
        let last = self.bins.iter().rposition(|&m| m > 0.0).expect("positive total");
        Ok(self.bin_center(last))
    }
}

/// Convolution kernels keyed by tracking confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    /// Used when confidence > 0.7.
    pub high: Vec<f64>,
    /// Used when 0.3 < confidence ≤ 0.7.
    pub medium: Vec<f64>,
    /// Used otherwise.
    pub low: Vec<f64>,
}

impl Default for KernelSet {
    fn default() -> Self {
        Self {
            high: vec![0.3, 0.4, 0.3],
            medium: vec![0.15, 0.2, 0.3, 0.2, 0.15],
            low: vec![0.1, 0.13, 0.17, 0.2, 0.17, 0.13, 0.1],
        }
    }
}

impl KernelSet {
    pub fn validate(&self) -> Result<()> {
        for (name, k) in [("high", &self.high), ("medium", &self.medium), ("low", &self.low)] {
            let sum: f64 = k.iter().sum();
            if k.is_empty() || k.len() % 2 == 0 || (sum - 1.0).abs() > 1e-12 || k.iter().any(|w| *w < 0.0) {
                return Err(Error::Config(format!(
                    "kernel {name} must have odd length, non-negative taps and sum to 1 (sum = {sum})"
                )));
            }
        }
        Ok(())
    }

    pub fn select(&self, confidence: f64) -> &[f64] {
        if confidence > 0.7 {
            &self.high
        } else if confidence > 0.3 {
            &self.medium
        } else {
            &self.low
        }
    }
}

/// Binary N×N matrix with zero diagonal selecting which directed edges exist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    entries: Vec<bool>,
}

impl AdjacencyMatrix {
    pub fn new(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Config(format!(
                    "adjacency row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                match (v, i == j) {
                    (0, _) => entries.push(false),
                    (1, false) => entries.push(true),
                    (1, true) => return Err(Error::Config(format!("adjacency diagonal entry {i} must be 0"))),
                    _ => return Err(Error::Config(format!("adjacency entry ({i},{j}) must be 0 or 1"))),
                }
            }
        }
        if !entries.iter().any(|&e| e) {
            return Err(Error::Config("adjacency matrix has no edges".into()));
        }
        Ok(Self { n, entries })
    }

    /// Every ordered pair of distinct objects.
    pub fn complete(n: usize) -> Result<Self> {
        let rows: Vec<Vec<u8>> = (0..n).map(|i| (0..n).map(|j| u8::from(i != j)).collect()).collect();
        Self::new(&rows)
    }

    /// Four players (two teams of two) plus the middle line as object 4:
    /// teammates linked both ways, every player linked to the line both ways.
    pub fn doubles() -> Self {
        Self::new(&[
            vec![0, 1, 0, 0, 1],
            vec![1, 0, 0, 0, 1],
            vec![0, 0, 0, 1, 1],
            vec![0, 0, 1, 0, 1],
            vec![1, 1, 1, 1, 0],
        ])
        .expect("valid matrix")
    }

    /// Teams fully connected internally, every player linked both ways with
    /// a reference object at index `sum(team_sizes)`.
    pub fn teams_with_reference(team_sizes: &[usize]) -> Result<Self> {
        let players: usize = team_sizes.iter().sum();
        let n = players + 1;
        let mut team = Vec::with_capacity(players);
        for (t, &size) in team_sizes.iter().enumerate() {
            team.extend(std::iter::repeat_n(t, size));
        }
        let rows: Vec<Vec<u8>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let linked = i != j && (i == players || j == players || team[i] == team[j]);
                        u8::from(linked)
                    })
                    .collect()
            })
            .collect();
        Self::new(&rows)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.n + j]
    }

    pub fn out_degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.has_edge(i, j)).count()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n * self.n)
            .filter(|&k| self.entries[k])
            .map(|k| (k / self.n, k % self.n))
    }

    pub fn edge_count(&self) -> usize {
        self.entries.iter().filter(|&&e| e).count()
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| u8::from(self.has_edge(i, j))).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphParams {
    pub angle_bins: usize,
    pub distance_bins: usize,
    pub distance_range: (f64, f64),
    pub kernels: KernelSet,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            angle_bins: 18,
            distance_bins: 25,
            distance_range: (0.0, 1.0),
            kernels: KernelSet::default(),
        }
    }
}

impl GraphParams {
    pub fn validate(&self) -> Result<()> {
        self.kernels.validate()?;
        AttributeHistogram::angle(self.angle_bins)?;
        AttributeHistogram::new(
            self.distance_bins,
            self.distance_range.0,
            self.distance_range.1,
            Topology::Bounded,
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeAttributes {
    pub angle: AttributeHistogram,
    pub distance: AttributeHistogram,
}

impl EdgeAttributes {
    fn empty(params: &GraphParams) -> Result<Self> {
        Ok(Self {
            angle: AttributeHistogram::angle(params.angle_bins)?,
            distance: AttributeHistogram::new(
                params.distance_bins,
                params.distance_range.0,
                params.distance_range.1,
                Topology::Bounded,
            )?,
        })
    }

    fn vote(&mut self, m: EdgeMeasurement, kernel: &[f64]) -> Result<()> {
        self.angle.vote(m.angle, kernel)?;
        self.distance.vote(m.distance, kernel)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph {
    adjacency: AdjacencyMatrix,
    vertex_appearance: Vec<ColorHistogram>,
    // n*n slots, populated exactly where the adjacency has an edge
    edges: Vec<Option<EdgeAttributes>>,
    kernels: KernelSet,
}

impl ModelGraph {
    /// Learns vertex appearances from first-frame boxes and gives every edge
    /// one full-confidence vote of its measured angle and distance.
    pub fn init(
        boxes: &[BBox],
        features: &FrameFeatures<'_>,
        adjacency: AdjacencyMatrix,
        image_width: f64,
        params: &GraphParams,
    ) -> Result<Self> {
        let n = adjacency.len();
        if boxes.len() != n {
            return Err(Error::Init(format!("{} annotated boxes for {n} objects", boxes.len())));
        }
        let vertex_appearance = boxes
            .iter()
            .enumerate()
            .map(|(i, b)| {
                features
                    .histogram(b)
                    .map_err(|_| Error::Init(format!("annotation of object {i} lies outside the frame")))
            })
            .collect::<Result<Vec<_>>>()?;
        let positions: Vec<Point2> = boxes.iter().map(|b| b.center).collect();
        Self::from_parts(adjacency, vertex_appearance, &positions, image_width, params)
    }

    /// Model from explicit appearances and initial positions.
    pub fn from_parts(
        adjacency: AdjacencyMatrix,
        vertex_appearance: Vec<ColorHistogram>,
        positions: &[Point2],
        image_width: f64,
        params: &GraphParams,
    ) -> Result<Self> {
        params.validate()?;
        let n = adjacency.len();
        if vertex_appearance.len() != n || positions.len() != n {
            return Err(Error::Init(format!("expected {n} appearances and positions")));
        }
        let mut edges = vec![None; n * n];
        for (i, j) in adjacency.edges() {
            edges[i * n + j] = Some(EdgeAttributes::empty(params)?);
        }
        let mut model = Self {
            adjacency,
            vertex_appearance,
            edges,
            kernels: params.kernels.clone(),
        };
        model.update(positions, &vec![1.0; n], image_width)?;
        Ok(model)
    }

    pub fn adjacency(&self) -> &AdjacencyMatrix {
        &self.adjacency
    }

    pub fn object_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn appearance(&self, object: usize) -> &ColorHistogram {
        &self.vertex_appearance[object]
    }

    pub fn edge(&self, i: usize, j: usize) -> Option<&EdgeAttributes> {
        self.edges[i * self.object_count() + j].as_ref()
    }

    pub fn kernels(&self) -> &KernelSet {
        &self.kernels
    }

    /// Votes the measured structure of the selected positions into every
    /// edge, with the kernel chosen by the origin object's confidence.
    pub fn update(&mut self, positions: &[Point2], confidences: &[f64], image_width: f64) -> Result<()> {
        let n = self.object_count();
        if positions.len() != n || confidences.len() != n {
            return Err(Error::Input(format!(
                "model update needs {n} positions and confidences"
            )));
        }
        for k in 0..n * n {
            let (i, j) = (k / n, k % n);
            if let Some(edge) = self.edges[k].as_mut() {
                let m = EdgeMeasurement::measure(&positions[i], &positions[j], image_width);
                let kernel = self.kernels.select(confidences[i]);
                edge.vote(m, kernel)?;
            }
        }
        Ok(())
    }

    /// Mean over outgoing edges of the averaged angle and distance
    /// likelihoods; 0 for a vertex without outgoing edges.
    pub fn structural_score(&self, object: usize, positions: &[Point2], image_width: f64) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for j in 0..self.object_count() {
            if let Some(edge) = self.edge(object, j) {
                let m = EdgeMeasurement::measure(&positions[object], &positions[j], image_width);
                let a = edge.angle.lookup_likelihood(m.angle).unwrap_or(0.0);
                let d = edge.distance.lookup_likelihood(m.distance).unwrap_or(0.0);
                sum += a + d;
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / (2.0 * count as f64)
        }
    }

    /// Plain-text dump: adjacency, kernels, vertex histograms and every edge's
    /// bins and ranges.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# structrack model graph v1\n");
        let n = self.object_count();
        let list = |v: &[f64]| {
            let items: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            format!("[{}]", items.join(", "))
        };
        let _ = writeln!(out, "objects = {n}");
        for row in self.adjacency.rows() {
            let items: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "adjacency = [{}]", items.join(", "));
        }
        let _ = writeln!(out, "kernel.high = {}", list(&self.kernels.high));
        let _ = writeln!(out, "kernel.medium = {}", list(&self.kernels.medium));
        let _ = writeln!(out, "kernel.low = {}", list(&self.kernels.low));
        for (i, h) in self.vertex_appearance.iter().enumerate() {
            let _ = writeln!(out, "vertex {i} = {}", list(h.bins()));
        }
        for (i, j) in self.adjacency.edges() {
            let e = self.edge(i, j).expect("edge present");
            for (name, h) in [("angle", &e.angle), ("distance", &e.distance)] {
                let (lo, hi) = h.range();
                let _ = writeln!(out, "edge {i} {j} {name} range = [{lo}, {hi}]");
                let _ = writeln!(out, "edge {i} {j} {name} bins = {}", list(h.bins()));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Parse {
            path: "<model>".into(),
            line,
            message,
        };
        let parse_list = |line: usize, s: &str| -> Result<Vec<f64>> {
            let inner = s
                .trim()
                .strip_prefix('[')
                .and_then(|s| s.strip_suffix(']'))
                .ok_or_else(|| bad(line, "expected a bracketed list".into()))?;
            if inner.trim().is_empty() {
                return Ok(Vec::new());
            }
            inner
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| bad(line, e.to_string())))
                .collect()
        };

        let mut n = None;
        let mut rows: Vec<Vec<u8>> = Vec::new();
        let mut kernels = KernelSet::default();
        let mut vertices: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut edge_data: Vec<(usize, usize, String, String, Vec<f64>)> = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line_no = ln + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(line_no, "expected key = value".into()))?;
            let words: Vec<&str> = key.split_whitespace().collect();
            match words.as_slice() {
                ["objects"] => n = Some(value.trim().parse().map_err(|_| bad(line_no, "bad count".into()))?),
                ["adjacency"] => rows.push(parse_list(line_no, value)?.iter().map(|&x| x as u8).collect()),
                ["kernel.high"] => kernels.high = parse_list(line_no, value)?,
                ["kernel.medium"] => kernels.medium = parse_list(line_no, value)?,
                ["kernel.low"] => kernels.low = parse_list(line_no, value)?,
                ["vertex", i] => {
                    let i = i.parse().map_err(|_| bad(line_no, "bad vertex id".into()))?;
                    vertices.push((i, parse_list(line_no, value)?));
                }
                ["edge", i, j, attr, field] => {
                    let i = i.parse().map_err(|_| bad(line_no, "bad edge origin".into()))?;
                    let j = j.parse().map_err(|_| bad(line_no, "bad edge target".into()))?;
                    edge_data.push((i, j, attr.to_string(), field.to_string(), parse_list(line_no, value)?));
                }
                _ => return Err(bad(line_no, format!("unknown key {key:?}"))),
            }
        }
        let n = n.ok_or_else(|| bad(0, "missing objects".into()))?;
        let adjacency = AdjacencyMatrix::new(&rows)?;
        if adjacency.len() != n {
            return Err(bad(0, "adjacency size does not match objects".into()));
        }
        kernels.validate()?;
        let mut vertex_appearance = vec![ColorHistogram::default(); n];
        for (i, bins) in vertices {
            let arr: [f64; HIST_BINS] = bins
                .try_into()
                .map_err(|_| bad(0, format!("vertex {i} needs {HIST_BINS} bins")))?;
            *vertex_appearance
                .get_mut(i)
                .ok_or_else(|| bad(0, format!("vertex {i} out of range")))? = ColorHistogram::from_bins(arr)?;
        }
        let mut edges: Vec<Option<EdgeAttributes>> = vec![None; n * n];
        let mut ranges: std::collections::HashMap<(usize, usize, String), (f64, f64)> = Default::default();
        for (i, j, attr, field, values) in &edge_data {
            if field == "range" {
                if values.len() != 2 {
                    return Err(bad(0, "range needs two values".into()));
                }
                ranges.insert((*i, *j, attr.clone()), (values[0], values[1]));
            }
        }
        for (i, j, attr, field, values) in edge_data {
            if field != "bins" {
                continue;
            }
            if i >= n || j >= n || !adjacency.has_edge(i, j) {
                return Err(bad(0, format!("edge {i}->{j} not in adjacency")));
            }
            let (lo, hi) = *ranges
                .get(&(i, j, attr.clone()))
                .ok_or_else(|| bad(0, format!("edge {i}->{j} {attr} has no range")))?;
            let topology = match attr.as_str() {
                "angle" => Topology::Circular,
                "distance" => Topology::Bounded,
                other => return Err(bad(0, format!("unknown edge attribute {other}"))),
            };
            let mut h = AttributeHistogram::new(values.len(), lo, hi, topology)?;
            h.bins = values;
            let slot = edges[i * n + j].get_or_insert_with(|| EdgeAttributes {
                angle: h.clone(),
                distance: h.clone(),
            });
            match topology {
                Topology::Circular => slot.angle = h,
                Topology::Bounded => slot.distance = h,
            }
        }
        for (i, j) in adjacency.edges() {
            if edges[i * n + j].is_none() {
                return Err(bad(0, format!("edge {i}->{j} missing")));
            }
        }
        Ok(Self {
            adjacency,
            vertex_appearance,
            edges,
            kernels,
        })
    }
}
