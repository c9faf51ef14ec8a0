//! One particle cloud following a colored square across a plain background.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use structrack::appearance::{extract_histogram, Frame, FrameFeatures};
use structrack::particle::{FilterParams, ParticleCloud};
use structrack::{BBox, Point2};

fn scene(center: Point2) -> structrack::Result<Frame> {
    let mut f = Frame::filled(320, 200, [40, 110, 50])?;
    f.fill_box(&BBox::new(center, 24.0, 36.0)?, [200, 40, 40]);
    Ok(f)
}

fn main() -> structrack::Result<()> {
    let params = FilterParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let start = Point2::new(40.0, 100.0);
    let first = scene(start)?;
    let model = extract_histogram(&first, &BBox::new(start, 24.0, 36.0)?)?;
    let mut cloud = ParticleCloud::init(start, (24.0, 36.0), model, &params, &mut rng);

    for t in 1..=40 {
        let truth = Point2::new(40.0 + 6.0 * t as f64, 100.0 + 30.0 * (t as f64 / 8.0).sin());
        let frame = scene(truth)?;
        let features = FrameFeatures::new(&frame);
        cloud.resample(&mut rng);
        let sigma = cloud.adaptive_sigma(&params);
        cloud.propagate_with_sigma(sigma, &mut rng);
        cloud.reweight(&features, params.sigma_b);
        let est = cloud.estimate_state();
        if t % 5 == 0 {
            println!(
                "frame {t:2}: truth ({:5.1}, {:5.1}) estimate ({:5.1}, {:5.1}) error {:4.1}px sigma {:4.1} conf {:.3}",
                truth.x,
                truth.y,
                est.x,
                est.y,
                est.distance(&truth),
                sigma,
                cloud.confidence()
            );
        }
    }
    Ok(())
}
