//! Runs build, score, annotate, train and eval in a temporary directory,
//! the same stages the `pcqa` binary exposes.

use pcqa::frmetrics::MetricId;
use pcqa::pcio::{save_ply, PlyMode, PointCloud};
use pcqa::pipeline::{cmd_annotate, cmd_build, cmd_eval, cmd_score, cmd_train, Config, Manifest, SplitSpec};
use pcqa::sparsenn::{ModelConfig, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

fn reference(seed: u64) -> Result<PointCloud, Box<dyn std::error::Error>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let f = rng.random_range(3.0..6.0);
    let mut positions = Vec::new();
    let mut colors = Vec::new();
    for x in 0..16 {
        for y in 0..16 {
            positions.push([x as f64, y as f64, (2.0 * (x as f64 / f).sin()).round()]);
            let mut t = |v: f64| (128.0 + 110.0 * v + rng.random_range(-15.0..15.0)).clamp(0.0, 255.0) as u8;
            colors.push([t((x as f64 / f).sin()), t((y as f64 / 4.0).cos()), t(((x + y) as f64 / 6.0).sin())]);
        }
    }
    Ok(PointCloud::new(positions, colors)?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let refs = dir.path().join("refs");
    std::fs::create_dir_all(&refs)?;
    for i in 0..3 {
        save_ply(&reference(i)?, refs.join(format!("ref{i}.ply")), PlyMode::BinaryLe)?;
    }
    let config = Config {
        distortions: Some(vec![2, 11, 17]),
        model: ModelConfig { width: 8, depth: 2, fc_hidden: 8, ..ModelConfig::default() },
        train: TrainConfig { epochs: 3, ..TrainConfig::default() },
        ..Config::default()
    };
    let ds = dir.path().join("ds");
    let built = cmd_build(&refs, &ds, &config, 1)?;
    println!("build: {} rows", built.rows);
    let scores = ds.join("scores.csv");
    println!("score: {} values", cmd_score(&built.manifest, &scores, &MetricId::NATIVE, 1)?.rows);

    let manifest = Manifest::load(&built.manifest)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let noise = Normal::new(0.0, 0.9)?;
    let mut csv = String::from("stimulus_id,subject_id,score\n");
    for r in manifest.records.iter().filter(|r| r.is_ok()) {
        let q = 1.0 + 4.0 * (-0.3 * (r.level as f64 - 1.0)).exp();
        for s in 0..48 {
            csv.push_str(&format!("{},s{s},{:.2}\n", r.sample_id, (q + noise.sample(&mut rng)).clamp(1.0, 5.0)));
        }
    }
    let subjective = dir.path().join("subjective.csv");
    std::fs::write(&subjective, csv)?;
    let annotated = ds.join("annotated.jsonl");
    let a = cmd_annotate(&built.manifest, &[scores], &subjective, &annotated, &config)?;
    println!("annotate: holdout SROCC {:?} over {} samples", a.holdout_srocc, a.holdout_count);

    let split = SplitSpec::parse("test=ref2", &manifest.reference_ids())?;
    let trained = cmd_train(&annotated, &split, &config, &dir.path().join("model"))?;
    println!("train: {} steps, final loss {:.4}", trained.steps, trained.final_loss);
    let report = cmd_eval(&annotated, &split, &trained.checkpoint, Some(&config.model), 1.0, &dir.path().join("eval"), 1)?;
    print!("{}", report.render());
    Ok(())
}
