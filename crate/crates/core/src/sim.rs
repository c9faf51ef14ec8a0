//! Synthetic scenes of flat-colored boxes with scripted motion, occlusions
//! and camera cuts, rendered deterministically from a seed.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::appearance::Frame;
use crate::candidates::CandidateMatrix;
use crate::error::{Error, Result};
use crate::evaluation::TrackRecord;
use crate::geometry::{iou, BBox, Point2};
use crate::graph::AdjacencyMatrix;
use crate::tracker::TrackerParams;

/// Path anchor: the object is at `position` on `frame`, linearly
/// interpolated in between and held after the last anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keyframe {
    pub frame: usize,
    pub position: Point2,
}

impl Keyframe {
    pub fn new(frame: usize, x: f64, y: f64) -> Self {
        Self {
            frame,
            position: Point2::new(x, y),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub id: u64,
    pub width: f64,
    pub height: f64,
    pub color: [u8; 3],
    pub team: Option<u32>,
    pub keyframes: Vec<Keyframe>,
    /// Amplitude of a slow seeded sinusoidal drift around the path, pixels.
    pub wander: f64,
    /// Per-frame Gaussian position noise, pixels.
    pub jitter: f64,
}

impl ObjectSpec {
    fn path(&self, t: usize) -> Point2 {
        let k = &self.keyframes;
        if t <= k[0].frame {
            return k[0].position;
        }
        for w in k.windows(2) {
            if t <= w[1].frame {
                let span = (w[1].frame - w[0].frame) as f64;
                let s = if span > 0.0 {
                    (t - w[0].frame) as f64 / span
                } else {
                    1.0
                };
                return Point2::new(
                    w[0].position.x + s * (w[1].position.x - w[0].position.x),
                    w[0].position.y + s * (w[1].position.y - w[0].position.y),
                );
            }
        }
        k[k.len() - 1].position
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScriptedEvent {
    /// Objects `a` and `b` overlap with IoU ≥ 0.5 on every frame of `start..=end`.
    Occlusion { a: u64, b: u64, start: usize, end: usize },
    /// Every object is translated by `(dx, dy)` from `frame` on.
    Cut { frame: usize, dx: f64, dy: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Occlusion { a: u64, b: u64 },
    Cut,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Background {
    Solid([u8; 3]),
    /// Bilinear value noise on a lattice of `cell` pixels, offsetting all
    /// channels of `base` by up to `amplitude`.
    Noise {
        base: [u8; 3],
        amplitude: u8,
        cell: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub background: Background,
    pub objects: Vec<ObjectSpec>,
    pub events: Vec<ScriptedEvent>,
    pub adjacency: AdjacencyMatrix,
    pub candidates: CandidateMatrix,
}

impl ScenarioConfig {
    /// Default tracker parameters with this scene's graph topology.
    pub fn tracker_params(&self) -> TrackerParams {
        TrackerParams::new(self.adjacency.clone(), self.candidates.clone())
    }

    pub fn cut_frames(&self) -> Vec<usize> {
        self.events
            .iter()
            .filter_map(|e| match e {
                ScriptedEvent::Cut { frame, .. } => Some(*frame),
                _ => None,
            })
            .collect()
    }

    fn index_of(&self, id: u64) -> Result<usize> {
        self.objects
            .iter()
            .position(|o| o.id == id)
            .ok_or_else(|| Error::Config(format!("{}: event references unknown object {id}", self.name)))
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(format!("{}: {m}", self.name)));
        if self.width == 0 || self.height == 0 || self.frames == 0 {
            return err("image size and frame count must be positive".into());
        }
        if self.objects.is_empty() {
            return err("no objects".into());
        }
        for (k, o) in self.objects.iter().enumerate() {
            if self.objects[..k].iter().any(|p| p.id == o.id) {
                return err(format!("duplicate object id {}", o.id));
            }
            if !(o.width > 0.0 && o.height > 0.0) {
                return err(format!("object {} has an empty box", o.id));
            }
            if o.width > self.width as f64 || o.height > self.height as f64 {
                return err(format!("object {} is larger than the frame", o.id));
            }
            if o.keyframes.is_empty() {
                return err(format!("object {} has no path", o.id));
            }
            if o.keyframes.windows(2).any(|w| w[1].frame < w[0].frame) {
                return err(format!("object {} has unordered keyframes", o.id));
            }
            if !(o.wander >= 0.0 && o.jitter >= 0.0) {
                return err(format!("object {} has negative motion noise", o.id));
            }
        }
        for e in &self.events {
            if let ScriptedEvent::Occlusion { a, b, start, end } = *e {
                self.index_of(a)?;
                self.index_of(b)?;
                if a == b || start > end {
                    return err(format!("malformed occlusion {a}/{b} over {start}..={end}"));
                }
            }
        }
        let n = self.objects.len();
        if self.adjacency.len() != n || self.candidates.len() != n {
            return err(format!("graph matrices do not match {n} objects"));
        }
        self.candidates.check_against(&self.adjacency)
    }
}

/// Ground truth and rendering state of one generated scene.
#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub config: ScenarioConfig,
    pub seed: u64,
    /// `boxes[frame][object]` in configuration order.
    pub boxes: Vec<Vec<BBox>>,
    pub events: Vec<(usize, EventKind)>,
    background: Frame,
    draw_order: Vec<usize>,
}

impl SyntheticSequence {
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Renders frame `t`: background, then objects in ascending id so that
    /// higher ids occlude lower ones.
    pub fn frame(&self, t: usize) -> Frame {
        let mut f = self.background.clone();
        for &k in &self.draw_order {
            f.fill_box(&self.boxes[t][k], self.config.objects[k].color);
        }
        f
    }

    pub fn ground_truth(&self) -> Vec<TrackRecord> {
        self.boxes
            .iter()
            .enumerate()
            .flat_map(|(t, row)| {
                row.iter()
                    .zip(&self.config.objects)
                    .map(move |(b, o)| TrackRecord::new(t, o.id, *b))
            })
            .collect()
    }

    pub fn first_boxes(&self) -> &[BBox] {
        &self.boxes[0]
    }
}

fn render_background(bg: Background, width: usize, height: usize, rng: &mut ChaCha8Rng) -> Result<Frame> {
    match bg {
        Background::Solid(rgb) => Frame::filled(width, height, rgb),
        Background::Noise { base, amplitude, cell } => {
            let cell = cell.max(1);
            let (gw, gh) = (width / cell + 2, height / cell + 2);
            let amp = amplitude as f64;
            let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(-amp..=amp)).collect();
            let mut f = Frame::filled(width, height, base)?;
            for y in 0..height {
                let gy = y as f64 / cell as f64;
                let (y0, ty) = (gy.floor() as usize, gy.fract());
                for x in 0..width {
                    let gx = x as f64 / cell as f64;
                    let (x0, tx) = (gx.floor() as usize, gx.fract());
                    let at = |i: usize, j: usize| lattice[j * gw + i];
                    let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1, y0) * tx;
                    let bottom = at(x0, y0 + 1) * (1.0 - tx) + at(x0 + 1, y0 + 1) * tx;
                    let offset = top * (1.0 - ty) + bottom * ty;
                    let px = base.map(|c| (c as f64 + offset).round().clamp(0.0, 255.0) as u8);
                    f.set_pixel(x, y, px);
                }
            }
            Ok(f)
        }
    }
}

/// Builds ground truth for every frame and checks the script: boxes stay
/// inside the frame and scripted occlusions reach IoU 0.5.
pub fn generate(config: &ScenarioConfig, seed: u64) -> Result<SyntheticSequence> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let background = render_background(config.background, config.width, config.height, &mut rng)?;

    // (phase x, phase y, period x, period y) per object
    let drift: Vec<(f64, f64, f64, f64)> = config
        .objects
        .iter()
        .map(|_| {
            (
                rng.random_range(0.0..TAU),
                rng.random_range(0.0..TAU),
                rng.random_range(50.0..100.0),
                rng.random_range(50.0..100.0),
            )
        })
        .collect();

    let (w, h) = (config.width as f64, config.height as f64);
    let mut boxes = Vec::with_capacity(config.frames);
    for t in 0..config.frames {
        let (mut cx, mut cy) = (0.0, 0.0);
        for e in &config.events {
            if let ScriptedEvent::Cut { frame, dx, dy } = *e {
                if t >= frame {
                    cx += dx;
                    cy += dy;
                }
            }
        }
        let mut row = Vec::with_capacity(config.objects.len());
        for (o, &(px, py, tx, ty)) in config.objects.iter().zip(&drift) {
            let p = o.path(t);
            let tf = t as f64;
            let mut x = p.x + cx + o.wander * (TAU * tf / tx + px).sin();
            let mut y = p.y + cy + o.wander * (TAU * tf / ty + py).sin();
            if o.jitter > 0.0 {
                let n = Normal::new(0.0, o.jitter).expect("positive deviation");
                x += n.sample(&mut rng);
                y += n.sample(&mut rng);
            }
            let b = BBox::new(Point2::new(x, y), o.width, o.height)?;
            if b.left() < 0.0 || b.top() < 0.0 || b.right() > w || b.bottom() > h {
                return Err(Error::Config(format!(
                    "{}: object {} leaves the frame at frame {t}",
                    config.name, o.id
                )));
            }
            row.push(b);
        }
        boxes.push(row);
    }

    let mut events = Vec::new();
    for e in &config.events {
        match *e {
            ScriptedEvent::Occlusion { a, b, start, end } => {
                let (ia, ib) = (config.index_of(a)?, config.index_of(b)?);
                for t in start..=end.min(config.frames.saturating_sub(1)) {
                    let overlap = iou(&boxes[t][ia], &boxes[t][ib]);
                    if overlap < 0.5 {
                        return Err(Error::Config(format!(
                            "{}: scripted occlusion of {a} and {b} has IoU {overlap:.3} at frame {t}",
                            config.name
                        )));
                    }
                    events.push((t, EventKind::Occlusion { a, b }));
                }
            }
            ScriptedEvent::Cut { frame, .. } => {
                if frame < config.frames {
                    events.push((frame, EventKind::Cut));
                }
            }
        }
    }
    events.sort_by_key(|&(t, _)| t);

    let mut draw_order: Vec<usize> = (0..config.objects.len()).collect();
    draw_order.sort_by_key(|&k| config.objects[k].id);
    Ok(SyntheticSequence {
        config: config.clone(),
        seed,
        boxes,
        events,
        background,
        draw_order,
    })
}

const GRASS: [u8; 3] = [40, 110, 60];
const RED: [u8; 3] = [200, 40, 40];
const BLUE: [u8; 3] = [40, 60, 200];
const WHITE: [u8; 3] = [235, 235, 235];

fn player(id: u64, team: u32, color: [u8; 3], keyframes: Vec<Keyframe>, wander: f64) -> ObjectSpec {
    ObjectSpec {
        id,
        width: 40.0,
        height: 60.0,
        color,
        team: Some(team),
        keyframes,
        wander,
        jitter: 0.3,
    }
}

fn reference(id: u64, x: f64, y: f64, width: f64, height: f64) -> ObjectSpec {
    ObjectSpec {
        id,
        width,
        height,
        color: WHITE,
        team: None,
        keyframes: vec![Keyframe::new(0, x, y)],
        wander: 0.0,
        jitter: 0.3,
    }
}

/// One mover crossing a static twin of the same color twice, stopping on
/// it each time; a white line below serves as reference.
pub fn occlusion_cross() -> ScenarioConfig {
    let y = 150.0;
    let mover = vec![
        Keyframe::new(10, 140.0, y),
        Keyframe::new(77, 340.0, y),
        Keyframe::new(92, 340.0, y),
        Keyframe::new(159, 540.0, y),
        Keyframe::new(169, 540.0, y),
        Keyframe::new(236, 340.0, y),
        Keyframe::new(251, 340.0, y),
        Keyframe::new(318, 140.0, y),
    ];
    ScenarioConfig {
        name: "occlusion-cross".into(),
        width: 640,
        height: 360,
        frames: 300,
        background: Background::Solid(GRASS),
        objects: vec![
            player(0, 0, RED, mover, 0.0),
            player(1, 0, RED, vec![Keyframe::new(0, 340.0, y)], 0.0),
            reference(2, 340.0, 290.0, 400.0, 24.0),
        ],
        events: vec![
            ScriptedEvent::Occlusion {
                a: 0,
                b: 1,
                start: 77,
                end: 92,
            },
            ScriptedEvent::Occlusion {
                a: 0,
                b: 1,
                start: 236,
                end: 251,
            },
        ],
        adjacency: AdjacencyMatrix::complete(3).expect("three objects"),
        candidates: CandidateMatrix::from_reference(3, 2, 10),
    }
}

/// Two teams of two around a table; at frame 80 the whole layout jumps
/// 260 pixels to the right.
pub fn camera_cut() -> ScenarioConfig {
    let still = |x: f64, y: f64| vec![Keyframe::new(0, x, y)];
    ScenarioConfig {
        name: "camera-cut".into(),
        width: 640,
        height: 360,
        frames: 160,
        background: Background::Solid(GRASS),
        objects: vec![
            player(0, 0, RED, still(60.0, 70.0), 12.0),
            player(1, 0, RED, still(60.0, 290.0), 12.0),
            player(2, 1, BLUE, still(340.0, 70.0), 12.0),
            player(3, 1, BLUE, still(340.0, 290.0), 12.0),
            reference(4, 190.0, 180.0, 300.0, 40.0),
        ],
        events: vec![ScriptedEvent::Cut {
            frame: 80,
            dx: 260.0,
            dy: 0.0,
        }],
        adjacency: AdjacencyMatrix::doubles(),
        candidates: CandidateMatrix::from_reference(5, 4, 10),
    }
}

/// Two teams of six either side of a net. Everyone drifts around home;
/// now and then a player walks onto a teammate, stays, and walks back.
pub fn clutter_12() -> ScenarioConfig {
    let xs = [[70.0, 150.0, 230.0], [410.0, 490.0, 570.0]];
    let ys = [100.0, 260.0];
    let home = |p: usize| -> (f64, f64) {
        let team = p / 6;
        let k = p % 6;
        (xs[team][k % 3], ys[k / 3])
    };
    // (mover, teammate, start frame)
    let excursions = [
        (0, 1, 20),
        (6, 7, 40),
        (5, 4, 60),
        (11, 10, 90),
        (2, 1, 110),
        (8, 7, 130),
        (3, 4, 150),
        (9, 10, 170),
    ];
    let (walk, stay) = (40, 12);
    let mut objects = Vec::new();
    let events = Vec::new();
    for p in 0..12 {
        let (hx, hy) = home(p);
        let mut keys = vec![Keyframe::new(0, hx, hy)];
        for &(m, target, start) in &excursions {
            if m != p {
                continue;
            }
            let (tx, ty) = home(target);
            keys.push(Keyframe::new(start, hx, hy));
            keys.push(Keyframe::new(start + walk, tx, ty));
            keys.push(Keyframe::new(start + walk + stay, tx, ty));
            keys.push(Keyframe::new(start + 2 * walk + stay, hx, hy));
        }
        let team = (p / 6) as u32;
        let color = if team == 0 { RED } else { BLUE };
        objects.push(ObjectSpec {
            width: 36.0,
            height: 54.0,
            ..player(p as u64, team, color, keys, 20.0)
        });
    }
    objects.push(reference(12, 320.0, 180.0, 24.0, 260.0));
    ScenarioConfig {
        name: "clutter-12".into(),
        width: 640,
        height: 360,
        frames: 200,
        background: Background::Solid(GRASS),
        objects,
        events,
        adjacency: AdjacencyMatrix::teams_with_reference(&[6, 6]).expect("two teams"),
        candidates: CandidateMatrix::from_reference(13, 12, 10),
    }
}

pub fn standard_suite() -> Vec<ScenarioConfig> {
    vec![occlusion_cross(), camera_cut(), clutter_12()]
}

pub fn scenario(name: &str) -> Option<ScenarioConfig> {
    standard_suite().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::edge_angle;

    #[test]
    fn suite_has_three_named_scenarios() {
        let names: Vec<_> = standard_suite().into_iter().map(|s| s.name).collect();
        assert_eq!(names, ["occlusion-cross", "camera-cut", "clutter-12"]);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = occlusion_cross();
        let a = generate(&cfg, 5).unwrap();
        let b = generate(&cfg, 5).unwrap();
        assert_eq!(a.boxes, b.boxes);
        assert_eq!(a.frame(80), b.frame(80));
        let c = generate(&cfg, 6).unwrap();
        assert_ne!(a.boxes, c.boxes);
    }

    #[test]
    fn every_scenario_valid_for_many_seeds() {
        for cfg in standard_suite() {
            for seed in 0..20 {
                let s = generate(&cfg, seed).unwrap();
                assert_eq!(s.len(), cfg.frames);
                assert!(s.boxes.iter().all(|row| row.len() == cfg.objects.len()));
            }
        }
    }

    #[test]
    fn occlusion_cross_has_overlapping_movers() {
        let s = generate(&occlusion_cross(), 0).unwrap();
        let frames: Vec<_> = s
            .events
            .iter()
            .filter(|e| matches!(e.1, EventKind::Occlusion { .. }))
            .map(|e| e.0)
            .collect();
        assert!(frames.contains(&85));
        for &t in &frames {
            assert!(iou(&s.boxes[t][0], &s.boxes[t][1]) >= 0.5);
        }
        // overlap outside the scripted windows happens only on approach
        for t in 0..s.len() {
            if iou(&s.boxes[t][0], &s.boxes[t][1]) >= 0.5 {
                assert!(frames.iter().any(|&f| f.abs_diff(t) <= 5), "frame {t}");
            }
        }
    }

    #[test]
    fn cut_preserves_structure() {
        let s = generate(&camera_cut(), 3).unwrap();
        let w = s.config.width as f64;
        let (before, after) = (&s.boxes[79], &s.boxes[80]);
        for (a, b) in before.iter().zip(after) {
            assert!(b.center.x - a.center.x >= 0.25 * w);
        }
        let table = 4;
        for p in 0..4 {
            let d0 = before[p].center.distance(&before[table].center);
            let d1 = after[p].center.distance(&after[table].center);
            assert!((d1 - d0).abs() <= 0.05 * d0);
            let a0 = edge_angle(&before[table].center, &before[p].center).unwrap();
            let a1 = edge_angle(&after[table].center, &after[p].center).unwrap();
            assert!((a1 - a0).abs() <= 0.05 * TAU);
        }
        assert_eq!(s.events, vec![(80, EventKind::Cut)]);
    }

    #[test]
    fn clutter_has_thirteen_tracks_per_frame() {
        let s = generate(&clutter_12(), 0).unwrap();
        let gt = s.ground_truth();
        assert_eq!(gt.len(), 13 * 200);
        assert!(gt.iter().filter(|r| r.frame == 150).count() == 13);
    }

    #[test]
    fn rendered_color_matches_configuration() {
        for cfg in standard_suite() {
            let s = generate(&cfg, 1).unwrap();
            for t in [0, s.len() / 2, s.len() - 1] {
                let f = s.frame(t);
                for (k, o) in cfg.objects.iter().enumerate() {
                    let (x0, y0, x1, y1) = f.window(&s.boxes[t][k]).unwrap();
                    let covered = |x: usize, y: usize| {
                        cfg.objects.iter().enumerate().any(|(j, other)| {
                            other.id > o.id && {
                                let (a0, b0, a1, b1) = f.window(&s.boxes[t][j]).unwrap();
                                (a0..a1).contains(&x) && (b0..b1).contains(&y)
                            }
                        })
                    };
                    for y in y0..y1 {
                        for x in x0..x1 {
                            if !covered(x, y) {
                                assert_eq!(f.pixel(x, y), o.color, "{} object {} frame {t}", cfg.name, o.id);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn oversized_object_rejected() {
        let mut cfg = camera_cut();
        cfg.objects[0].width = 1000.0;
        assert!(matches!(generate(&cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_event_object_rejected() {
        let mut cfg = occlusion_cross();
        cfg.events.push(ScriptedEvent::Occlusion {
            a: 0,
            b: 9,
            start: 1,
            end: 2,
        });
        assert!(matches!(generate(&cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn noise_background_is_seeded() {
        let mut cfg = occlusion_cross();
        cfg.background = Background::Noise {
            base: GRASS,
            amplitude: 20,
            cell: 16,
        };
        let a = generate(&cfg, 1).unwrap().frame(0);
        let b = generate(&cfg, 1).unwrap().frame(0);
        let c = generate(&cfg, 2).unwrap().frame(0);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
