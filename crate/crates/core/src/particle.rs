//! ConDensation-style single-object tracker: systematic resampling, random
//! walk diffusion with an adaptive deviation, and appearance reweighting.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::appearance::{box_likelihood, ColorHistogram, FrameFeatures};
use crate::error::{Error, Result};
use crate::geometry::{BBox, Point2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub state: Point2,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterParams {
    /// Particles per cloud.
    pub n_particles: usize,
    /// Base diffusion deviation, pixels.
    pub sigma_u: f64,
    /// Spreading factor applied to the diffusion weight.
    pub alpha: f64,
    /// Upper bound on the per-frame likelihood sum.
    pub beta: f64,
    /// Lower bound on the diffusion weight.
    pub tau_lambda: f64,
    /// Initial spread around a new cloud's center, pixels.
    pub sigma_c: f64,
    /// Appearance likelihood deviation.
    pub sigma_b: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            n_particles: 50,
            sigma_u: 8.0,
            alpha: 5.0,
            beta: 25.0,
            tau_lambda: 0.2,
            sigma_c: 10.0,
            sigma_b: 0.4,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("filter.sigma_u", self.sigma_u),
            ("filter.alpha", self.alpha),
            ("filter.beta", self.beta),
            ("filter.tau_lambda", self.tau_lambda),
            ("filter.sigma_b", self.sigma_b),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_particles == 0 {
            return Err(Error::Config("filter.n_particles must be positive".into()));
        }
        if !(self.sigma_c >= 0.0 && self.sigma_c.is_finite()) {
            return Err(Error::Config(format!(
                "filter.sigma_c must be >= 0, got {}",
                self.sigma_c
            )));
        }
        if self.tau_lambda > self.alpha {
            return Err(Error::Config("filter.tau_lambda must not exceed filter.alpha".into()));
        }
        Ok(())
    }
}

/// One tracker: a weighted set of centroid hypotheses for a fixed-size box.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    particles: Vec<Particle>,
    box_size: (f64, f64),
    model_hist: ColorHistogram,
    /// Σ ℓ_i from the latest reweight; `None` before the first one.
    last_likelihood_sum: Option<f64>,
    /// Σ π_{t-1}^i ℓ_i from the latest reweight.
    last_confidence_product_sum: f64,
}

fn normal(sigma: f64) -> Option<Normal<f64>> {
    (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite positive deviation"))
}

impl ParticleCloud {
    /// Spreads `n_particles` around `center` with an isotropic Gaussian of
    /// deviation `sigma_c`; uniform weights.
    pub fn init<R: Rng + ?Sized>(
        center: Point2,
        box_size: (f64, f64),
        model_hist: ColorHistogram,
        params: &FilterParams,
        rng: &mut R,
    ) -> Self {
        let n = params.n_particles;
        let spread = normal(params.sigma_c);
        let particles = (0..n)
            .map(|_| {
                let state = match &spread {
                    Some(d) => Point2::new(center.x + d.sample(rng), center.y + d.sample(rng)),
                    None => center,
                };
                Particle {
                    state,
                    weight: 1.0 / n as f64,
                }
            })
            .collect();
        Self {
            particles,
            box_size,
            model_hist,
            last_likelihood_sum: None,
            last_confidence_product_sum: 0.0,
        }
    }

    /// Builds a cloud from explicit particles; weights are normalized.
    pub fn from_particles(particles: Vec<Particle>, box_size: (f64, f64), model_hist: ColorHistogram) -> Self {
        let mut cloud = Self {
            particles,
            box_size,
            model_hist,
            last_likelihood_sum: None,
            last_confidence_product_sum: 0.0,
        };
        cloud.normalize();
        cloud
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn box_size(&self) -> (f64, f64) {
        self.box_size
    }

    pub fn model_hist(&self) -> &ColorHistogram {
        &self.model_hist
    }

    pub fn last_likelihood_sum(&self) -> Option<f64> {
        self.last_likelihood_sum
    }

    pub fn last_confidence_product_sum(&self) -> f64 {
        self.last_confidence_product_sum
    }

    pub fn box_at(&self, center: Point2) -> BBox {
        BBox {
            center,
            width: self.box_size.0,
            height: self.box_size.1,
        }
    }

    fn normalize(&mut self) {
        let total: f64 = self.particles.iter().map(|p| p.weight).sum();
        let n = self.particles.len() as f64;
        if total > 0.0 && total.is_finite() {
            self.particles.iter_mut().for_each(|p| p.weight /= total);
        } else {
            self.particles.iter_mut().for_each(|p| p.weight = 1.0 / n);
        }
    }

    /// Systematic resampling; weights reset to `1/N`. All-zero weights
    /// select every particle once.
    pub fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.particles.len();
        let total: f64 = self.particles.iter().map(|p| p.weight).sum();
        let uniform = 1.0 / n as f64;
        if !(total > 0.0 && total.is_finite()) {
            self.particles.iter_mut().for_each(|p| p.weight = uniform);
            return;
        }
        // positions (u0 + k) compared against cumulative weight scaled by n
        let scale = n as f64 / total;
        let u0: f64 = rng.random();
        let mut out = Vec::with_capacity(n);
        let mut cumulative = self.particles[0].weight * scale;
        let mut j = 0;
        for k in 0..n {
            let u = u0 + k as f64;
            while u >= cumulative && j + 1 < n {
                j += 1;
                cumulative += self.particles[j].weight * scale;
            }
            out.push(Particle {
                state: self.particles[j].state,
                weight: uniform,
            });
        }
        self.particles = out;
    }

    /// Diffusion deviation `λ̂·σ_u` with `λ̂ = max(α(1 − min(Σℓ, β)/β), τ_λ)`.
    /// Before the first reweight `λ̂ = τ_λ`.
    pub fn adaptive_sigma(&self, params: &FilterParams) -> f64 {
        let lambda = match self.last_likelihood_sum {
            Some(sum) => {
                let l = params.alpha * (1.0 - sum.min(params.beta) / params.beta);
                l.max(params.tau_lambda)
            }
            None => params.tau_lambda,
        };
        lambda * params.sigma_u
    }

    /// Random-walk step: every state moves by Gaussian noise of deviation
    /// [`adaptive_sigma`](Self::adaptive_sigma). Weights are untouched.
    pub fn propagate<R: Rng + ?Sized>(&mut self, params: &FilterParams, rng: &mut R) {
        self.propagate_with_sigma(self.adaptive_sigma(params), rng);
    }

    pub fn propagate_with_sigma<R: Rng + ?Sized>(&mut self, sigma: f64, rng: &mut R) {
        if let Some(d) = normal(sigma) {
            for p in &mut self.particles {
                p.state.x += d.sample(rng);
                p.state.y += d.sample(rng);
            }
        }
    }

    /// Reweights from per-particle likelihoods (same order as particles).
    pub fn apply_likelihoods(&mut self, likelihoods: &[f64]) {
        assert_eq!(likelihoods.len(), self.particles.len());
        let mut product_sum = 0.0;
        let mut likelihood_sum = 0.0;
        for (p, &l) in self.particles.iter_mut().zip(likelihoods) {
            product_sum += p.weight * l;
            likelihood_sum += l;
            p.weight *= l;
        }
        if product_sum > 0.0 {
            self.last_confidence_product_sum = product_sum;
            self.last_likelihood_sum = Some(likelihood_sum);
        } else {
            self.last_confidence_product_sum = 0.0;
            self.last_likelihood_sum = Some(0.0);
        }
        self.normalize();
    }

    /// Scores every particle's box against the reference appearance.
    pub fn reweight(&mut self, features: &FrameFeatures<'_>, sigma_b: f64) {
        let likelihoods: Vec<f64> = self
            .particles
            .iter()
            .map(|p| box_likelihood(features, &self.model_hist, &self.box_at(p.state), sigma_b))
            .collect();
        self.apply_likelihoods(&likelihoods);
    }

    /// Weighted mean of particle states.
    pub fn estimate_state(&self) -> Point2 {
        let (x, y) = self.particles.iter().fold((0.0, 0.0), |(x, y), p| {
            (x + p.weight * p.state.x, y + p.weight * p.state.y)
        });
        Point2::new(x, y)
    }

    pub fn estimate_box(&self) -> BBox {
        self.box_at(self.estimate_state())
    }

    /// `1 − exp(−Σ π_{t−1} ℓ)`.
    pub fn confidence(&self) -> f64 {
        confidence_from_accumulator(self.last_confidence_product_sum)
    }

    /// Appearance likelihood of the box at the estimated state.
    pub fn estimate_likelihood(&self, features: &FrameFeatures<'_>, sigma_b: f64) -> f64 {
        box_likelihood(features, &self.model_hist, &self.estimate_box(), sigma_b)
    }
}

pub fn confidence_from_accumulator(accumulator: f64) -> f64 {
    1.0 - (-accumulator).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::appearance::{extract_histogram, Frame};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn hist() -> ColorHistogram {
        ColorHistogram::single_bin(9)
    }

    fn cloud_with(states: &[(f64, f64)], weights: &[f64]) -> ParticleCloud {
        let particles = states
            .iter()
            .zip(weights)
            .map(|(&(x, y), &weight)| Particle {
                state: Point2::new(x, y),
                weight,
            })
            .collect();
        ParticleCloud::from_particles(particles, (10.0, 10.0), hist())
    }

    #[test]
    fn init_weights_uniform() {
        let params = FilterParams::default();
        let cloud = ParticleCloud::init(Point2::new(50.0, 50.0), (10.0, 20.0), hist(), &params, &mut rng(1));
        assert_eq!(cloud.particles().len(), 50);
        assert!(cloud.particles().iter().all(|p| p.weight == 0.02));
    }

    #[test]
    fn init_zero_spread_is_exact() {
        let params = FilterParams {
            sigma_c: 0.0,
            ..Default::default()
        };
        let c = Point2::new(3.0, 4.0);
        let cloud = ParticleCloud::init(c, (10.0, 20.0), hist(), &params, &mut rng(1));
        assert!(cloud.particles().iter().all(|p| p.state == c));
    }

    #[test]
    fn init_mean_close_to_center() {
        let params = FilterParams::default();
        let c = Point2::new(100.0, 100.0);
        let bound = 3.0 * params.sigma_c / (params.n_particles as f64).sqrt();
        let inside = (0..1000)
            .filter(|&s| {
                let cloud = ParticleCloud::init(c, (10.0, 10.0), hist(), &params, &mut rng(s));
                let m = cloud.estimate_state();
                (m.x - c.x).abs() <= bound && (m.y - c.y).abs() <= bound
            })
            .count();
        assert!(inside >= 990, "{inside}");
    }

    #[test]
    fn resample_degenerate_weights() {
        let mut cloud = cloud_with(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)], &[1.0, 0.0, 0.0]);
        cloud.resample(&mut rng(3));
        assert!(cloud.particles().iter().all(|p| p.state == Point2::new(1.0, 1.0)));
        assert_eq!(cloud.particles().len(), 3);
    }

    #[test]
    fn resample_uniform_selects_each_once() {
        let params = FilterParams::default();
        for seed in 0..200 {
            let mut cloud = ParticleCloud::init(Point2::new(0.0, 0.0), (5.0, 5.0), hist(), &params, &mut rng(seed));
            let before: Vec<Point2> = cloud.particles().iter().map(|p| p.state).collect();
            cloud.resample(&mut rng(seed + 1000));
            let after: Vec<Point2> = cloud.particles().iter().map(|p| p.state).collect();
            assert_eq!(before, after, "seed {seed}");
        }
    }

    #[test]
    fn resample_zero_weights_falls_back() {
        let mut cloud = cloud_with(&[(1.0, 1.0), (2.0, 2.0)], &[1.0, 1.0]);
        cloud.apply_likelihoods(&[0.0, 0.0]);
        cloud.resample(&mut rng(0));
        assert_eq!(cloud.particles().len(), 2);
        assert_eq!(cloud.particles()[1].state, Point2::new(2.0, 2.0));
    }

    fn with_sum(sum: f64) -> ParticleCloud {
        let mut cloud = cloud_with(&[(0.0, 0.0)], &[1.0]);
        cloud.last_likelihood_sum = Some(sum);
        cloud
    }

    #[test]
    fn adaptive_sigma_examples() {
        let p = FilterParams::default();
        assert_eq!(with_sum(p.beta).adaptive_sigma(&p), p.tau_lambda * p.sigma_u);
        assert_eq!(with_sum(0.0).adaptive_sigma(&p), 5.0 * p.sigma_u);
        assert!((with_sum(20.0).adaptive_sigma(&p) - p.sigma_u).abs() < 1e-12);
        assert_eq!(with_sum(1000.0).adaptive_sigma(&p), p.tau_lambda * p.sigma_u);
        // no history yet
        assert_eq!(
            cloud_with(&[(0.0, 0.0)], &[1.0]).adaptive_sigma(&p),
            p.tau_lambda * p.sigma_u
        );
    }

    #[test]
    fn propagate_zero_noise_is_identity() {
        let mut cloud = cloud_with(&[(1.0, 2.0), (3.0, 4.0)], &[0.3, 0.7]);
        let before = cloud.clone();
        cloud.propagate_with_sigma(0.0, &mut rng(0));
        assert_eq!(cloud, before);
    }

    #[test]
    fn propagate_deviation_matches() {
        let params = FilterParams {
            n_particles: 10_000,
            sigma_c: 0.0,
            ..Default::default()
        };
        let mut cloud = ParticleCloud::init(Point2::default(), (5.0, 5.0), hist(), &params, &mut rng(9));
        cloud.last_likelihood_sum = Some(10.0);
        let sigma = cloud.adaptive_sigma(&params);
        let weights: Vec<f64> = cloud.particles().iter().map(|p| p.weight).collect();
        cloud.propagate(&params, &mut rng(10));
        let n = cloud.particles().len() as f64;
        for axis in [0, 1] {
            let vals: Vec<f64> = cloud
                .particles()
                .iter()
                .map(|p| if axis == 0 { p.state.x } else { p.state.y })
                .collect();
            let mean = vals.iter().sum::<f64>() / n;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!((sd / sigma - 1.0).abs() < 0.05, "{sd} vs {sigma}");
        }
        let after: Vec<f64> = cloud.particles().iter().map(|p| p.weight).collect();
        assert_eq!(weights, after);
    }

    #[test]
    fn reweight_examples() {
        let mut cloud = cloud_with(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)], &[0.2, 0.3, 0.5]);
        cloud.apply_likelihoods(&[0.4, 0.4, 0.4]);
        let w: Vec<f64> = cloud.particles().iter().map(|p| p.weight).collect();
        for (a, b) in w.iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }

        let mut cloud = cloud_with(&[(0.0, 0.0), (1.0, 1.0)], &[0.5, 0.5]);
        cloud.apply_likelihoods(&[1.0, 0.0]);
        assert_eq!(cloud.particles()[0].weight, 1.0);
        assert_eq!(cloud.particles()[1].weight, 0.0);

        let n = 50;
        let mut cloud = cloud_with(&vec![(0.0, 0.0); n], &vec![1.0; n]);
        cloud.apply_likelihoods(&vec![1.0; n]);
        assert!((cloud.last_confidence_product_sum() - 1.0).abs() < 1e-12);
        assert_eq!(cloud.last_likelihood_sum(), Some(50.0));
    }

    #[test]
    fn reweight_all_zero_resets_uniform() {
        let mut cloud = cloud_with(&[(0.0, 0.0), (1.0, 1.0)], &[0.9, 0.1]);
        cloud.apply_likelihoods(&[0.0, 0.0]);
        assert_eq!(cloud.particles()[0].weight, 0.5);
        assert_eq!(cloud.last_confidence_product_sum(), 0.0);
        assert_eq!(cloud.last_likelihood_sum(), Some(0.0));
    }

    #[test]
    fn estimate_examples() {
        let cloud = cloud_with(&[(0.0, 0.0), (4.0, 8.0)], &[0.25, 0.75]);
        assert_eq!(cloud.estimate_state(), Point2::new(3.0, 6.0));
        let cloud = cloud_with(&[(7.0, -2.0)], &[1.0]);
        assert_eq!(cloud.estimate_state(), Point2::new(7.0, -2.0));
        let cloud = cloud_with(&[(0.0, 0.0), (2.0, 4.0), (4.0, 2.0), (2.0, 2.0)], &[1.0; 4]);
        assert_eq!(cloud.estimate_state(), Point2::new(2.0, 2.0));
    }

    #[test]
    fn confidence_examples() {
        assert_eq!(confidence_from_accumulator(0.0), 0.0);
        assert!((confidence_from_accumulator(1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!(confidence_from_accumulator(30.0) < 1.0);
    }

    #[test]
    fn estimate_likelihood_examples() {
        let mut frame = Frame::filled(100, 100, [0, 0, 0]).unwrap();
        let target = BBox::from_corner(20.0, 20.0, 20.0, 20.0).unwrap();
        frame.fill_box(&target, [255, 0, 0]);
        let features = FrameFeatures::new(&frame);
        let model = extract_histogram(&frame, &target).unwrap();
        let on = ParticleCloud::from_particles(
            vec![Particle {
                state: target.center,
                weight: 1.0,
            }],
            (20.0, 20.0),
            model.clone(),
        );
        assert_eq!(on.estimate_likelihood(&features, 0.2), 1.0);
        let off = ParticleCloud::from_particles(
            vec![Particle {
                state: Point2::new(75.0, 75.0),
                weight: 1.0,
            }],
            (20.0, 20.0),
            model,
        );
        assert!((off.estimate_likelihood(&features, 0.2) - (-12.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn static_target_tracked() {
        let mut frame = Frame::filled(200, 200, [0, 0, 0]).unwrap();
        let target = BBox::from_corner(90.0, 80.0, 20.0, 40.0).unwrap();
        frame.fill_box(&target, [255, 0, 0]);
        let features = FrameFeatures::new(&frame);
        let params = FilterParams::default();
        let model = extract_histogram(&frame, &target).unwrap();
        let mut good = 0;
        let mut total = 0;
        for seed in 0..20 {
            let mut r = rng(seed);
            let mut cloud = ParticleCloud::init(target.center, (20.0, 40.0), model.clone(), &params, &mut r);
            for _ in 0..100 {
                cloud.resample(&mut r);
                cloud.propagate(&params, &mut r);
                cloud.reweight(&features, params.sigma_b);
                total += 1;
                if cloud.estimate_state().distance(&target.center) <= 2.0 * params.sigma_u {
                    good += 1;
                }
            }
        }
        assert!(good as f64 >= 0.95 * total as f64, "{good}/{total}");
    }

    #[test]
    fn deterministic_per_seed() {
        let params = FilterParams::default();
        let run = |seed| {
            let mut r = rng(seed);
            let mut c = ParticleCloud::init(Point2::new(5.0, 5.0), (4.0, 4.0), hist(), &params, &mut r);
            c.resample(&mut r);
            c.propagate(&params, &mut r);
            c
        };
        assert_eq!(run(42), run(42));
    }

    proptest! {
        #[test]
        fn weights_normalized_and_count_preserved(likes in prop::collection::vec(0.0..1.0f64, 50), seed in 0u64..1000) {
            let params = FilterParams::default();
            let mut r = rng(seed);
            let mut c = ParticleCloud::init(Point2::default(), (4.0, 4.0), hist(), &params, &mut r);
            c.apply_likelihoods(&likes);
            let s: f64 = c.particles().iter().map(|p| p.weight).sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
            c.resample(&mut r);
            c.propagate(&params, &mut r);
            prop_assert_eq!(c.particles().len(), 50);
        }

        #[test]
        fn confidence_monotone(a in 0.0..30.0f64, b in 0.0..30.0f64) {
            prop_assume!(a < b);
            prop_assert!(confidence_from_accumulator(a) <= confidence_from_accumulator(b));
            prop_assert!((0.0..1.0).contains(&confidence_from_accumulator(b)));
        }
    }
}
