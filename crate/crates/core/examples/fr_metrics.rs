//! Scores a Gaussian-shifted and a noisy-color copy of a cloud with every
//! native full-reference metric.

use pcqa::distort::{apply_distortion, DistortionSpec};
use pcqa::frmetrics::native_scores;
use pcqa::pcio::PointCloud;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut positions = Vec::new();
    let mut colors = Vec::new();
    for x in 0..30 {
        for y in 0..30 {
            positions.push([x as f64, y as f64, (0.4 * x as f64).sin().round()]);
            colors.push([(x * 8) as u8, (y * 8) as u8, 90]);
        }
    }
    let reference = PointCloud::new(positions, colors)?;
    for (label, id) in [("gaussian shift", 17), ("gaussian color noise", 2)] {
        println!("{label}:");
        for level in [1, 7] {
            let degraded = apply_distortion(&reference, &DistortionSpec::new(id, level, 3)?)?;
            let row: Vec<String> =
                native_scores(&reference, &degraded)?.iter().map(|(m, v)| format!("{m} {v:.2}")).collect();
            println!("  level {level}: {}", row.join(", "));
        }
    }
    println!("identical: {:?}", native_scores(&reference, &reference)?);
    Ok(())
}
