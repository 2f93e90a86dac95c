//! Lists the native distortion catalogue and applies every type at levels
//! 1, 4 and 7 to a small cloud.

use pcqa::distort::{apply_distortion, descriptor, native_ids, DistortionSpec};
use pcqa::pcio::PointCloud;
use rand::{Rng, SeedableRng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut positions = Vec::new();
    for x in 0..24 {
        for y in 0..24 {
            positions.push([x as f64, y as f64, ((x + y) % 5) as f64]);
        }
    }
    let colors = (0..positions.len()).map(|_| rng.random()).collect();
    let cloud = PointCloud::new(positions, colors)?;
    println!("{:>3}  {:<28} {:>9} {:>9} {:>9}", "id", "name", "l1 pts", "l4 pts", "l7 pts");
    for id in native_ids() {
        let d = descriptor(id).unwrap();
        let mut counts = Vec::new();
        for level in [1, 4, 7] {
            let out = apply_distortion(&cloud, &DistortionSpec::new(id, level, 7)?)?;
            counts.push(out.len());
        }
        let params: Vec<String> = d.params.iter().map(|p| format!("{} {:?}", p.name, p.values)).collect();
        println!("{id:>3}  {:<28} {:>9} {:>9} {:>9}  {}", d.name, counts[0], counts[1], counts[2], params.join("; "));
    }
    Ok(())
}
