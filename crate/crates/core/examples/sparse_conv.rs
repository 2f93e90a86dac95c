//! Runs one submanifold convolution over a sparse shell and shows that the
//! output keeps the input's active sites.

use pcqa::sparsenn::{build_kernel_map, ConvLayer, Mode, SparseTensor, CENTER_OFFSET};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut coords = Vec::new();
    let mut feats = Vec::new();
    for x in -6i32..=6 {
        for y in -6i32..=6 {
            for z in -6i32..=6 {
                let r2 = x * x + y * y + z * z;
                if (25..=36).contains(&r2) {
                    coords.push([x, y, z, 0]);
                    feats.push(1.0);
                }
            }
        }
    }
    let input = SparseTensor::new(coords, feats, 1)?;
    let map = build_kernel_map(&input);
    let mut layer = ConvLayer::zeros(1, 1, None, false);
    // counts occupied neighbours, centre included
    layer.weights.iter_mut().for_each(|w| *w = 1.0);
    let out = layer.forward(&input, &map, Mode::Infer)?;
    println!("active sites in {} / out {}", input.len(), out.len());
    println!("centre weight index {CENTER_OFFSET}");
    let mut hist = std::collections::BTreeMap::new();
    for v in out.feats() {
        *hist.entry(*v as i64).or_insert(0) += 1;
    }
    println!("occupied 3x3x3 neighbourhood sizes: {hist:?}");
    Ok(())
}
