//! Screens simulated raters, computes MOS, selects a metric, fits the
//! logistic-5 mapping and labels unrated samples.

use std::collections::BTreeMap;

use pcqa::annotate::{
    calibrate, compute_mos, generate_pseudo_mos, screen_subjects, Rating, RatingMatrix, RegressionKind,
    ScoredSample,
};
use pcqa::frmetrics::MetricId;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let noise = Normal::new(0.0, 1.0)?;
    let quality = |level: u8| 1.0 + 4.0 * (-0.35 * (level as f64 - 1.0)).exp();
    let mut samples = Vec::new();
    let mut ratings = Vec::new();
    for content in 0..4 {
        for level in 1..=7u8 {
            let id = format!("c{content}_l{level}");
            let psnr = 45.0 - 3.5 * level as f64 + content as f64 + noise.sample(&mut rng) * 0.5;
            let mut scores = BTreeMap::new();
            scores.insert(MetricId::PsnrYuv, psnr);
            scores.insert(MetricId::MP2po, 60.0 - level as f64 * noise.sample(&mut rng).abs());
            samples.push(ScoredSample { degraded_id: id.clone(), distortion_id: 2, level, scores, mos: None });
            if content < 3 {
                for s in 0..40 {
                    let score = (quality(level) + noise.sample(&mut rng)).clamp(1.0, 5.0);
                    ratings.push(Rating { stimulus_id: id.clone(), subject_id: format!("s{s}"), score });
                }
            }
        }
    }
    let matrix = RatingMatrix::new(ratings)?;
    let screening = screen_subjects(&matrix)?;
    println!("kept {} raters, rejected {}", screening.kept.len(), screening.rejected.len());
    let mos = compute_mos(&matrix, &screening.kept, 1)?;
    for s in &mut samples {
        s.mos = mos.get(&s.degraded_id).map(|m| m.mos);
    }
    let calibration = calibrate(&samples, RegressionKind::Logistic5)?;
    for (id, c) in &calibration {
        println!("type {id}: {} (SROCC {:.3}), fit RMSE {:.3}", c.metric, c.srocc, c.model.diagnostics.rmse);
    }
    for r in generate_pseudo_mos(&calibration, &samples)?.iter().filter(|r| r.mos.is_none()) {
        println!("{}: pseudo-MOS {:.2}", r.degraded_id, r.pseudo_mos);
    }
    Ok(())
}
