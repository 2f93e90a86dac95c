//! Trains a small residual sparse CNN on synthetic clouds whose label
//! follows their brightness, then saves and reloads the checkpoint.

use pcqa::pcio::PointCloud;
use pcqa::sparsenn::{load_checkpoint, predict, save_checkpoint, train, ModelConfig, ResScnn, TrainConfig, TrainSample};
use rand::{Rng, SeedableRng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let mut samples = Vec::new();
    for i in 0..16 {
        let base = 30.0 + (i % 8) as f64 * 28.0;
        let mut positions = Vec::new();
        let mut colors = Vec::new();
        for x in 0..10 {
            for y in 0..10 {
                positions.push([x as f64, y as f64, ((x * y) % 3) as f64]);
                let jitter = |r: &mut rand_chacha::ChaCha8Rng| (base + r.random_range(-20.0..=20.0)) as u8;
                colors.push([jitter(&mut rng), jitter(&mut rng), jitter(&mut rng)]);
            }
        }
        samples.push(TrainSample {
            id: format!("s{i}"),
            cloud: PointCloud::new(positions, colors)?,
            label: 1.0 + base / 64.0,
        });
    }
    let dir = tempfile::tempdir()?;
    for batch_norm in [true, false] {
        let config = ModelConfig { width: 16, depth: 2, fc_hidden: 16, batch_norm, ..ModelConfig::default() };
        let model = ResScnn::new(&config, 1)?;
        let cfg = TrainConfig { lr: 0.01, accumulation: 1, epochs: 30, augment: false, ..TrainConfig::default() };
        let outcome = train(model, &samples, &cfg)?;
        let path = dir.path().join(format!("bn_{batch_norm}.ckpt"));
        save_checkpoint(&path, &outcome.model)?;
        let back = load_checkpoint(&path)?;
        let mut abs_err = 0.0;
        for s in &samples {
            abs_err += (predict(&back, &s.cloud, 1.0)? - s.label).abs();
        }
        // training normalizes over one cloud's points, inference uses running averages
        println!(
            "batch norm {batch_norm}: {} parameters, first epoch loss {:.4}, last epoch loss {:.4}, inference MAE {:.3}",
            back.param_count(),
            outcome.losses[..16].iter().map(|l| l.loss).sum::<f64>() / 16.0,
            outcome.tail_loss(16),
            abs_err / samples.len() as f64
        );
    }
    Ok(())
}
