//! Writes a synthetic cloud as binary and ASCII PLY, reads both back and
//! reports sizes and the estimated normals of the first points.

use pcqa::pcio::{load_ply, save_ply, PlyMode, PointCloud};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut positions = Vec::new();
    let mut colors = Vec::new();
    for i in 0..32 {
        for j in 0..32 {
            let z = (0.3 * i as f64).sin() * 2.0;
            positions.push([i as f64, j as f64, z.round()]);
            colors.push([(8 * i) as u8, (8 * j) as u8, 128]);
        }
    }
    let cloud = PointCloud::new(positions, colors)?;
    let dir = tempfile::tempdir()?;
    for (name, mode) in [("binary.ply", PlyMode::BinaryLe), ("ascii.ply", PlyMode::Ascii)] {
        let path = dir.path().join(name);
        save_ply(&cloud, &path, mode)?;
        let back = load_ply(&path)?;
        println!(
            "{name}: {} bytes, {} points, identical: {}",
            std::fs::metadata(&path)?.len(),
            back.len(),
            back.positions() == cloud.positions() && back.colors() == cloud.colors()
        );
    }
    let normals = pcqa::frmetrics::normals_of(&cloud);
    for (p, n) in cloud.positions().iter().zip(&normals).take(3) {
        println!("point {p:?} normal [{:.3}, {:.3}, {:.3}]", n[0], n[1], n[2]);
    }
    Ok(())
}
