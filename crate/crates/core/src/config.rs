//! Run configuration as flat `key = value` text with dotted keys.
//!
//! ```text
//! # comments start with '#'
//! seed = 7
//! graph.rho_A = 0.4
//! graph.kernel_high = [0.3, 0.4, 0.3]
//! graph.adjacency = [[0, 1], [1, 0]]
//! ```
//!
//! Missing keys keep their defaults. [`RunConfig::to_text`] writes every key
//! in a fixed order, so parsing its output and writing again is a no-op.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::candidates::{CandidateMatrix, CandidateNoise};
use crate::error::{Error, Result};
use crate::evaluation::DEFAULT_IOU_THRESHOLD;
use crate::graph::{AdjacencyMatrix, GraphParams};
use crate::particle::FilterParams;
use crate::tracker::{ScoreWeights, TrackerParams};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub filter: FilterParams,
    pub graph: GraphParams,
    pub weights: ScoreWeights,
    pub noise: CandidateNoise,
    pub tau_o: f64,
    pub tau_s: f64,
    pub tau_r: f64,
    pub tau_i: usize,
    pub n_ri: usize,
    /// Complete graph over the annotated objects when absent.
    pub adjacency: Option<AdjacencyMatrix>,
    /// No candidate generation when absent.
    pub candidates: Option<CandidateMatrix>,
    pub iou_threshold: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = TrackerParams::new(AdjacencyMatrix::doubles(), CandidateMatrix::zeros(5));
        Self {
            adjacency: None,
            candidates: None,
            ..Self::from_params(&p, 0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Number(String),
    List(Vec<Value>),
}

struct ValueParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl ValueParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn value(&mut self) -> std::result::Result<Value, String> {
        self.skip_ws();
        match self.src.get(self.pos) {
            None => Err("missing value".into()),
            Some(b'[') => {
                self.pos += 1;
                let mut items = Vec::new();
                self.skip_ws();
                if self.src.get(self.pos) == Some(&b']') {
                    self.pos += 1;
                    return Ok(Value::List(items));
                }
                loop {
                    items.push(self.value()?);
                    self.skip_ws();
                    match self.src.get(self.pos) {
                        Some(b',') => self.pos += 1,
                        Some(b']') => {
                            self.pos += 1;
                            return Ok(Value::List(items));
                        }
                        _ => return Err("expected ',' or ']'".into()),
                    }
                }
            }
            Some(_) => {
                let start = self.pos;
                while self.pos < self.src.len() && !matches!(self.src[self.pos], b',' | b']' | b'[') {
                    self.pos += 1;
                }
                let token = std::str::from_utf8(&self.src[start..self.pos])
                    .map_err(|_| "invalid UTF-8")?
                    .trim();
                if token.is_empty() {
                    return Err("missing value".into());
                }
                Ok(Value::Number(token.to_string()))
            }
        }
    }
}

fn parse_value(text: &str) -> std::result::Result<Value, String> {
    let mut p = ValueParser {
        src: text.as_bytes(),
        pos: 0,
    };
    let v = p.value()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err("trailing characters after value".into());
    }
    Ok(v)
}

fn number(v: &Value) -> std::result::Result<f64, String> {
    match v {
        Value::Number(t) => match t.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(format!("'{t}' is not a number")),
        },
        Value::List(_) => Err("expected a number, found a list".into()),
    }
}

fn integer(v: &Value) -> std::result::Result<u64, String> {
    match v {
        Value::Number(t) => t
            .parse::<u64>()
            .map_err(|_| format!("'{t}' is not a non-negative integer")),
        Value::List(_) => Err("expected an integer, found a list".into()),
    }
}

fn vector(v: &Value) -> std::result::Result<Vec<f64>, String> {
    match v {
        Value::List(items) => items.iter().map(number).collect(),
        Value::Number(_) => Err("expected a bracketed list".into()),
    }
}

fn matrix(v: &Value) -> std::result::Result<Vec<Vec<u64>>, String> {
    match v {
        Value::List(rows) => rows
            .iter()
            .map(|r| match r {
                Value::List(items) => items.iter().map(integer).collect(),
                Value::Number(_) => Err("expected a list of rows".into()),
            })
            .collect(),
        Value::Number(_) => Err("expected a bracketed matrix".into()),
    }
}

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", items.join(", "))
}

fn fmt_matrix<T: ToString>(rows: &[Vec<T>]) -> String {
    let rows: Vec<String> = rows
        .iter()
        .map(|r| format!("[{}]", r.iter().map(T::to_string).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("[{}]", rows.join(", "))
}

impl RunConfig {
    pub fn from_params(p: &TrackerParams, seed: u64) -> Self {
        Self {
            filter: p.filter.clone(),
            graph: p.graph.clone(),
            weights: p.weights,
            noise: p.noise,
            tau_o: p.tau_o,
            tau_s: p.tau_s,
            tau_r: p.tau_r,
            tau_i: p.tau_i,
            n_ri: p.n_ri,
            adjacency: Some(p.adjacency.clone()),
            candidates: Some(p.candidates.clone()),
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            seed,
        }
    }

    /// Tracker parameters for a scene with `objects` annotated objects.
    pub fn tracker_params(&self, objects: usize) -> Result<TrackerParams> {
        let adjacency = match &self.adjacency {
            Some(a) => a.clone(),
            None => AdjacencyMatrix::complete(objects)?,
        };
        if adjacency.len() != objects {
            return Err(Error::Config(format!(
                "adjacency matrix covers {} objects but {objects} are annotated",
                adjacency.len()
            )));
        }
        let candidates = self
            .candidates
            .clone()
            .unwrap_or_else(|| CandidateMatrix::zeros(objects));
        let params = TrackerParams {
            filter: self.filter.clone(),
            graph: self.graph.clone(),
            weights: self.weights,
            adjacency,
            candidates,
            noise: self.noise,
            tau_o: self.tau_o,
            tau_s: self.tau_s,
            tau_r: self.tau_r,
            tau_i: self.tau_i,
            n_ri: self.n_ri,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.adjacency.as_ref().map_or(2, AdjacencyMatrix::len);
        if self.adjacency.is_none() && self.candidates.is_some() {
            return Err(Error::Config("graph.candidates requires graph.adjacency".into()));
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "eval.iou_threshold = {} outside (0, 1]",
                self.iou_threshold
            )));
        }
        self.tracker_params(n).map(|_| ())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| Error::Config(format!("line {line_no}: {m}"));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', found '{line}'")))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key '{key}'")));
            }
            let value = parse_value(value).map_err(|m| err(format!("{key}: {m}")))?;
            cfg.set(key, &value).map_err(|m| err(format!("{key}: {m}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn set(&mut self, key: &str, v: &Value) -> std::result::Result<(), String> {
        let usize_of = |v: &Value| integer(v).map(|x| x as usize);
        match key {
            "seed" => self.seed = integer(v)?,
            "filter.n_particles" => self.filter.n_particles = usize_of(v)?,
            "filter.sigma_u" => self.filter.sigma_u = number(v)?,
            "filter.alpha" => self.filter.alpha = number(v)?,
            "filter.beta" => self.filter.beta = number(v)?,
            "filter.tau_lambda" => self.filter.tau_lambda = number(v)?,
            "filter.sigma_c" => self.filter.sigma_c = number(v)?,
            "filter.sigma_b" => self.filter.sigma_b = number(v)?,
            "graph.angle_bins" => self.graph.angle_bins = usize_of(v)?,
            "graph.distance_bins" => self.graph.distance_bins = usize_of(v)?,
            "graph.distance_min" => self.graph.distance_range.0 = number(v)?,
            "graph.distance_max" => self.graph.distance_range.1 = number(v)?,
            "graph.kernel_high" => self.graph.kernels.high = vector(v)?,
            "graph.kernel_medium" => self.graph.kernels.medium = vector(v)?,
            "graph.kernel_low" => self.graph.kernels.low = vector(v)?,
            "graph.rho_A" => self.weights.rho_a = number(v)?,
            "graph.rho_S" => self.weights.rho_s = number(v)?,
            "graph.rho_O" => self.weights.rho_o = number(v)?,
            "graph.rho_T" => self.weights.rho_t = number(v)?,
            "graph.tau_O" => self.tau_o = number(v)?,
            "graph.tau_S" => self.tau_s = number(v)?,
            "graph.tau_R" => self.tau_r = number(v)?,
            "graph.tau_I" => self.tau_i = usize_of(v)?,
            "graph.n_RI" => self.n_ri = usize_of(v)?,
            "graph.adjacency" => {
                let rows: Vec<Vec<u8>> = matrix(v)?
                    .into_iter()
                    .map(|r| {
                        r.into_iter()
                            .map(|x| u8::try_from(x).map_err(|_| "entries must be 0 or 1".to_string()))
                            .collect()
                    })
                    .collect::<std::result::Result<_, _>>()?;
                self.adjacency = Some(AdjacencyMatrix::new(&rows).map_err(|e| e.to_string())?);
            }
            "graph.candidates" => {
                let rows: Vec<Vec<u32>> = matrix(v)?
                    .into_iter()
                    .map(|r| {
                        r.into_iter()
                            .map(|x| u32::try_from(x).map_err(|_| "count too large".to_string()))
                            .collect()
                    })
                    .collect::<std::result::Result<_, _>>()?;
                self.candidates = Some(CandidateMatrix::new(&rows).map_err(|e| e.to_string())?);
            }
            "candidates.sigma_theta" => self.noise.sigma_theta = number(v)?,
            "candidates.sigma_d" => self.noise.sigma_d = number(v)?,
            "eval.iou_threshold" => self.iou_threshold = number(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            writeln!(s, "{k} = {v}").expect("write to string");
        };
        put("seed", self.seed.to_string());
        put("filter.n_particles", self.filter.n_particles.to_string());
        put("filter.sigma_u", self.filter.sigma_u.to_string());
        put("filter.alpha", self.filter.alpha.to_string());
        put("filter.beta", self.filter.beta.to_string());
        put("filter.tau_lambda", self.filter.tau_lambda.to_string());
        put("filter.sigma_c", self.filter.sigma_c.to_string());
        put("filter.sigma_b", self.filter.sigma_b.to_string());
        put("graph.angle_bins", self.graph.angle_bins.to_string());
        put("graph.distance_bins", self.graph.distance_bins.to_string());
        put("graph.distance_min", self.graph.distance_range.0.to_string());
        put("graph.distance_max", self.graph.distance_range.1.to_string());
        put("graph.kernel_high", fmt_list(&self.graph.kernels.high));
        put("graph.kernel_medium", fmt_list(&self.graph.kernels.medium));
        put("graph.kernel_low", fmt_list(&self.graph.kernels.low));
        put("graph.rho_A", self.weights.rho_a.to_string());
        put("graph.rho_S", self.weights.rho_s.to_string());
        put("graph.rho_O", self.weights.rho_o.to_string());
        put("graph.rho_T", self.weights.rho_t.to_string());
        put("graph.tau_O", self.tau_o.to_string());
        put("graph.tau_S", self.tau_s.to_string());
        put("graph.tau_R", self.tau_r.to_string());
        put("graph.tau_I", self.tau_i.to_string());
        put("graph.n_RI", self.n_ri.to_string());
        if let Some(a) = &self.adjacency {
            put("graph.adjacency", fmt_matrix(&a.rows()));
        }
        if let Some(c) = &self.candidates {
            put("graph.candidates", fmt_matrix(&c.rows()));
        }
        put("candidates.sigma_theta", self.noise.sigma_theta.to_string());
        put("candidates.sigma_d", self.noise.sigma_d.to_string());
        put("eval.iou_threshold", self.iou_threshold.to_string());
        s
    }
}
