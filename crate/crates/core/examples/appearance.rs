//! Color histograms of two boxes and the likelihood of one given the other.

use structrack::appearance::{bhattacharyya, extract_histogram, likelihood, Frame, HIST_BINS};
use structrack::BBox;

fn main() -> structrack::Result<()> {
    let mut frame = Frame::filled(120, 80, [30, 120, 40])?;
    let red = BBox::from_corner(10.0, 10.0, 30.0, 40.0)?;
    let orange = BBox::from_corner(60.0, 10.0, 30.0, 40.0)?;
    frame.fill_box(&red, [220, 30, 30]);
    frame.fill_box(&orange, [230, 140, 20]);

    let h_red = extract_histogram(&frame, &red)?;
    let h_orange = extract_histogram(&frame, &orange)?;
    let busiest = h_red
        .bins()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    println!("{HIST_BINS} bins, red mass concentrated in bin {busiest}");

    for sigma_b in [0.1, 0.2, 0.4] {
        println!(
            "sigma_b {sigma_b}: d(red, red) = {:.3}, d(red, orange) = {:.3}, L(red | orange) = {:.4}",
            bhattacharyya(&h_red, &h_red)?,
            bhattacharyya(&h_red, &h_orange)?,
            likelihood(&h_red, &h_orange, sigma_b)?,
        );
    }
    Ok(())
}
