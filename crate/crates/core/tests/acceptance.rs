//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the verdict lines always reach the console.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use pcqa::annotate::{
    fit_regression, kurtosis, plcc, screen_subjects, srocc, srocc_closed_form, Rating, RatingMatrix, RegressionKind,
    Rejection,
};
use pcqa::colorspace::crop;
use pcqa::distort::{
    self, apply_distortion, downsample, gaussian_snr_noise, local_anchors, signal_power, DistortionSpec,
};
use pcqa::frmetrics::{
    native_scores, p2plane, p2point, psnr_yuv, yuv_errors, MetricId, Pooling,
};
use pcqa::pipeline::{cmd_annotate, cmd_build, cmd_report, cmd_score, Config, Manifest, SplitSpec};
use pcqa::sparsenn::{
    build_kernel_map, smooth_l1, train, ConvLayer, Gradients, Mode, ModelConfig, ResScnn, ResidualVariant, SparseTensor,
    TrainConfig, TrainSample, CENTER_OFFSET,
};
use rand::Rng;
use rand_distr::{Distribution, Normal};

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(
        elapsed.as_secs_f64() < limit_s,
        format!("took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64()),
    )
}

// 1 ---------------------------------------------------------------------------

fn correlation_oracle() -> Verdict {
    let t = Instant::now();
    let mut r = common::rng(1);
    let mut worst: f64 = 0.0;
    let mut closed_worst: f64 = 0.0;
    for case in 0..200 {
        let n = r.random_range(2..=500);
        let ties = case % 2 == 0;
        let draw = |r: &mut rand_chacha::ChaCha8Rng| -> f64 {
            if ties {
                r.random_range(0..6) as f64
            } else {
                r.random_range(-100.0..100.0)
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut r)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + draw(&mut r)).collect();
        let bp = common::brute_plcc(&x, &y);
        let bs = common::brute_srocc(&x, &y);
        match (plcc(&x, &y), bp.is_finite()) {
            (Ok(v), true) => worst = worst.max((v - bp).abs()),
            (Err(_), false) => {}
            (got, _) => return Err(format!("case {case}: plcc {got:?} vs oracle {bp}")),
        }
        match (srocc(&x, &y), bs.is_finite()) {
            (Ok(v), true) => worst = worst.max((v - bs).abs()),
            (Err(_), false) => {}
            (got, _) => return Err(format!("case {case}: srocc {got:?} vs oracle {bs}")),
        }
        if !ties {
            let a = srocc(&x, &y).map_err(|e| e.to_string())?;
            let b = srocc_closed_form(&x, &y).map_err(|e| e.to_string())?;
            closed_worst = closed_worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-9, format!("max deviation {worst:e}"))?;
    ensure(closed_worst <= 1e-12, format!("closed-form deviation {closed_worst:e}"))?;
    within(t.elapsed(), 5.0)?;
    Ok(format!(
        "max |dev| {worst:.1e}, closed-form vs rank form {closed_worst:.1e}, {:.2} s",
        t.elapsed().as_secs_f64()
    ))
}

// 2 ---------------------------------------------------------------------------

fn regression_recovery() -> Verdict {
    let t = Instant::now();
    let mut r = common::rng(2);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let x: Vec<f64> = (0..50).map(|i| i as f64 * 2.0 + r.random_range(0.0..1.0)).collect();
    let truths = [
        (RegressionKind::Logistic4, vec![5.0, 1.0, 50.0, 8.0]),
        (RegressionKind::Logistic5, vec![4.0, 0.1, 50.0, 0.01, 2.5]),
        (RegressionKind::Cubic4, vec![2e-6, -3e-4, 0.05, 1.0]),
    ];
    let mut parts = Vec::new();
    for (kind, params) in truths {
        let clean: Vec<f64> = x.iter().map(|&q| kind.eval(&params, q)).collect();
        let y: Vec<f64> = clean.iter().map(|v| v + noise.sample(&mut r)).collect();
        let m = fit_regression(kind, &x, &y).map_err(|e| format!("{kind:?}: {e}"))?;
        let rmse = (x.iter().zip(&clean).map(|(&q, c)| (m.eval(q) - c).powi(2)).sum::<f64>() / 50.0).sqrt();
        ensure(rmse <= 0.05, format!("{kind:?} curve RMSE {rmse}"))?;
        parts.push(format!("{kind:?} {rmse:.4}"));
    }
    // monotone saturating response
    let y: Vec<f64> = x.iter().map(|&q| 1.0 + 4.0 * (1.0 - (-q / 25.0).exp()) + noise.sample(&mut r)).collect();
    let fit = |k| fit_regression(k, &x, &y).map(|m| m.diagnostics.rmse).map_err(|e| e.to_string());
    let (l4, l5, c4) = (fit(RegressionKind::Logistic4)?, fit(RegressionKind::Logistic5)?, fit(RegressionKind::Cubic4)?);
    ensure(l5 <= l4 && l5 <= c4, format!("saturating fit RMSE l5 {l5} l4 {l4} cubic {c4}"))?;
    within(t.elapsed(), 30.0)?;
    Ok(format!(
        "curve RMSE {}; saturating fit RMSE l5 {l5:.4} <= l4 {l4:.4}, cubic {c4:.4}; {:.2} s",
        parts.join(", "),
        t.elapsed().as_secs_f64()
    ))
}

// 3 ---------------------------------------------------------------------------

fn write_ratings(manifest: &Manifest, path: &Path, subjects: usize, seed: u64) {
    let stimuli: Vec<(String, u8, u8)> = manifest
        .records
        .iter()
        .filter(|r| r.is_ok())
        .map(|r| (r.sample_id.clone(), r.distortion_id, r.level))
        .collect();
    let mut text = common::planted_ratings(&stimuli, subjects, 0.9, seed);
    // a subject who always answers 3 is screened out
    for (id, _, _) in &stimuli {
        text.push_str(&format!("{id},lazy,3\n"));
    }
    std::fs::write(path, text).unwrap();
}

fn pseudo_mos_pipeline() -> Verdict {
    let t = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let refs = dir.path().join("refs");
    let clouds: Vec<(String, _)> = (0..3).map(|i| (format!("ref{i}"), common::textured_sheet(20, 30 + i))).collect();
    let named: Vec<(&str, _)> = clouds.iter().map(|(a, b)| (a.as_str(), b.clone())).collect();
    common::write_refs(&refs, &named);
    let cfg = Config {
        dataset_seed: 3,
        distortions: Some(vec![2, 4, 11, 17, 22, 24]),
        ..Config::default()
    };
    let ds = dir.path().join("ds");
    let b = cmd_build(&refs, &ds, &cfg, 1).map_err(|e| e.to_string())?;
    ensure(b.failures.is_empty(), format!("build failures {:?}", b.failures))?;
    let scores = ds.join("scores.csv");
    cmd_score(&b.manifest, &scores, &MetricId::NATIVE, 1).map_err(|e| e.to_string())?;
    let m = Manifest::load(&b.manifest).map_err(|e| e.to_string())?;
    let subj = dir.path().join("subjective.csv");
    write_ratings(&m, &subj, 48, 17);
    let a = cmd_annotate(&b.manifest, &[scores], &subj, &ds.join("annotated.jsonl"), &cfg).map_err(|e| e.to_string())?;
    let s = a.holdout_srocc.ok_or("holdout SROCC undefined")?;
    ensure(a.rejected_subjects >= 1, "constant subject was not rejected")?;
    ensure(s >= 0.85, format!("holdout SROCC {s:.4} (n={})", a.holdout_count))?;
    within(t.elapsed(), 300.0)?;
    Ok(format!(
        "holdout SROCC {s:.4}, PLCC {:.4} over {} samples, {} subject(s) rejected, {:.1} s",
        a.holdout_plcc.unwrap_or(f64::NAN),
        a.holdout_count,
        a.rejected_subjects,
        t.elapsed().as_secs_f64()
    ))
}

// 4 ---------------------------------------------------------------------------

fn screening() -> Verdict {
    let run = || -> Result<(f64, pcqa::annotate::Screening), String> {
        let mut ratings = Vec::new();
        let mut r = common::rng(4);
        let g = Normal::new(3.0, 0.6).unwrap();
        for i in 0..200 {
            let id = format!("p{i:03}");
            let uniform = (i % 5 + 1) as f64;
            let gauss: f64 = g.sample(&mut r);
            for (subject, score) in [("uniform", uniform), ("gauss", gauss.clamp(1.0, 5.0)), ("flat", 4.0)] {
                ratings.push(Rating { stimulus_id: id.clone(), subject_id: subject.into(), score });
            }
        }
        let m = RatingMatrix::new(ratings).map_err(|e| e.to_string())?;
        let b2 = kurtosis(&m.scores_of("uniform")).unwrap();
        Ok((b2, screen_subjects(&m).map_err(|e| e.to_string())?))
    };
    let (b2, s) = run()?;
    ensure((b2 - 1.7).abs() < 1e-12, format!("uniform kurtosis {b2}"))?;
    ensure(s.kept == vec!["gauss".to_string()], format!("kept {:?}", s.kept))?;
    let rejected: BTreeMap<_, _> = s.rejected.iter().cloned().collect();
    ensure(matches!(rejected.get("uniform"), Some(Rejection::Kurtosis(_))), "uniform scorer not rejected")?;
    ensure(rejected.get("flat") == Some(&Rejection::Degenerate), "constant scorer not degenerate")?;
    ensure(run()?.1 == s, "screening not deterministic")?;
    Ok(format!("uniform beta2 {b2:.3} rejected, gaussian kept, constant degenerate, repeatable"))
}

// 5 ---------------------------------------------------------------------------

fn severity(id: u8, reference: &pcqa::pcio::PointCloud, out: &pcqa::pcio::PointCloud) -> Result<f64, String> {
    let desc = distort::descriptor(id).unwrap();
    let e = |v: pcqa::frmetrics::Result<f64>| v.map_err(|e| e.to_string());
    if desc.alters_geometry {
        Ok(e(p2point(reference, out, Pooling::Mse))?.max(e(p2point(out, reference, Pooling::Mse))?)
            + if id == 24 {
                // color averaging is part of the voxel codec's damage
                let f = yuv_errors(reference, out, Pooling::Mse).map_err(|e| e.to_string())?;
                let b = yuv_errors(out, reference, Pooling::Mse).map_err(|e| e.to_string())?;
                f[0].max(b[0]) * 1e-6
            } else {
                0.0
            })
    } else {
        // positions and order are untouched, so points pair by index
        ensure(reference.positions() == out.positions(), format!("id {id} moved points"))?;
        let sum: f64 = reference
            .colors()
            .iter()
            .zip(out.colors())
            .flat_map(|(a, b)| (0..3).map(move |k| (a[k] as f64 - b[k] as f64).powi(2)))
            .sum();
        Ok(sum / (3 * reference.len()) as f64)
    }
}

/// Same geometry with independent colors over the whole 0..255 range; a
/// narrow palette makes fixed-grid quantization error depend on bin alignment.
fn full_range_colors(cloud: &pcqa::pcio::PointCloud, seed: u64) -> pcqa::pcio::PointCloud {
    let mut r = common::rng(seed);
    let col = (0..cloud.len()).map(|_| [r.random(), r.random(), r.random()]).collect();
    pcqa::pcio::PointCloud::new(cloud.positions().to_vec(), col).unwrap()
}

fn distortion_contracts() -> Verdict {
    let t = Instant::now();
    let mut notes = Vec::new();
    // point counts
    let c = common::random_cloud(1000, 5);
    let drop = distort::descriptor(11).unwrap().params[0].values;
    for level in 1..=7u8 {
        let out = downsample(&c, level, &mut common::rng(level as u64)).map_err(|e| e.to_string())?;
        let want = ((1.0 - drop[level as usize - 1]) * 1000.0).round() as usize;
        ensure(out.len() == want, format!("downsample level {level}: {} points, want {want}", out.len()))?;
    }
    // anchor totals
    let counts: Vec<usize> = (1..=7u8).map(|l| local_anchors(&c, l, &mut common::rng(9)).len()).collect();
    ensure(counts == vec![1, 2, 4, 6, 9, 12, 16], format!("anchor counts {counts:?}"))?;
    // crop fuzz
    let mut r = common::rng(6);
    for _ in 0..1_000_000 {
        let v: f64 = match r.random_range(0..4) {
            0 => r.random_range(-1e6..1e6),
            1 => r.random_range(-1.0..256.0),
            2 => r.random_range(254.0..256.0),
            _ => r.random_range(-0.6..0.6),
        };
        let got = crop(v) as f64;
        let want = v.round().clamp(0.0, 255.0);
        ensure(got == want && (0.0..=255.0).contains(&got), format!("crop({v}) = {got}"))?;
    }
    // Gaussian SNR targets over 1e5 points
    let big = {
        let mut r = common::rng(7);
        let pos = (0..100_000).map(|i| [i as f64, 0.0, 0.0]).collect();
        let col = (0..100_000).map(|_| [r.random(), r.random(), r.random()]).collect();
        pcqa::pcio::PointCloud::new(pos, col).unwrap()
    };
    let ps = signal_power(big.colors());
    let mut worst: f64 = 0.0;
    for (level, target) in (1..=7u8).zip([13.0, 11.0, 9.0, 7.0, 5.0, 3.0, 1.0]) {
        let noise = gaussian_snr_noise(&big, level, &mut common::rng(100 + level as u64));
        let pn = noise.iter().flatten().map(|e| e * e).sum::<f64>() / (3.0 * noise.len() as f64);
        let snr = 10.0 * (ps / pn).log10();
        worst = worst.max((snr - target).abs());
    }
    ensure(worst <= 0.3, format!("SNR deviation {worst:.3} dB"))?;
    notes.push(format!("SNR max dev {worst:.3} dB"));
    // severity monotone in level
    let mut violations = Vec::new();
    let sheet = full_range_colors(&common::sheet(24, 77), 78);
    for id in distort::native_ids() {
        for seed in 0..5u64 {
            let mut prev = f64::NEG_INFINITY;
            for level in 1..=7u8 {
                let spec = DistortionSpec::new(id, level, 1000 + seed).unwrap();
                let out = apply_distortion(&sheet, &spec).map_err(|e| format!("id {id}: {e}"))?;
                let s = severity(id, &sheet, &out)?;
                if s < prev - 1e-9 {
                    violations.push(format!("id {id} seed {seed} level {level}"));
                }
                prev = prev.max(s);
            }
        }
    }
    ensure(violations.is_empty(), format!("non-monotone severity: {}", violations.join("; ")))?;
    within(t.elapsed(), 180.0)?;
    Ok(format!(
        "counts, anchors {counts:?}, 1e6 crops, {}, severity monotone for 23 ids x 5 seeds, {:.1} s",
        notes.join(", "),
        t.elapsed().as_secs_f64()
    ))
}

// 6 ---------------------------------------------------------------------------

fn metric_oracles() -> Verdict {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let n = 20 + (seed as usize * 9) % 181;
        let a = common::random_cloud(n, seed);
        let b = common::random_cloud(n.max(30) - 10, seed + 500);
        for max in [false, true] {
            let pool = if max { Pooling::Hausdorff } else { Pooling::Mse };
            let d1 = (p2point(&a, &b, pool).unwrap() - common::oracle_p2point(&a, &b, max)).abs();
            let d2 = (p2plane(&a, &b, pool).unwrap() - common::oracle_p2plane(&a, &b, max)).abs();
            let d3 = (psnr_yuv(&a, &b, pool).unwrap() - common::oracle_psnr_yuv(&a, &b, max)).abs();
            worst = worst.max(d1).max(d2).max(d3);
        }
        // the shared-search path agrees with the oracles as well
        let peak = a.bounding_box().diagonal().powi(2);
        let fused = native_scores(&a, &b).unwrap();
        let want = [
            common::oracle_psnr(peak, common::oracle_p2point(&a, &b, false).max(common::oracle_p2point(&b, &a, false))),
            common::oracle_psnr(peak, common::oracle_p2plane(&a, &b, false).max(common::oracle_p2plane(&b, &a, false))),
            common::oracle_psnr(peak, common::oracle_p2point(&a, &b, true).max(common::oracle_p2point(&b, &a, true))),
            common::oracle_psnr(peak, common::oracle_p2plane(&a, &b, true).max(common::oracle_p2plane(&b, &a, true))),
            common::oracle_psnr_yuv(&a, &b, false),
            common::oracle_psnr_yuv(&a, &b, true),
        ];
        for ((_, got), w) in fused.iter().zip(want) {
            worst = worst.max((got - w).abs());
        }
        // identical clouds
        for (m, v) in native_scores(&a, &a).unwrap() {
            ensure(v == 100.0, format!("identical clouds: {m} = {v}"))?;
        }
        // hausdorff dominates mean pooling
        for (mse, hd) in [
            (p2point(&a, &b, Pooling::Mse).unwrap(), p2point(&a, &b, Pooling::Hausdorff).unwrap()),
            (p2plane(&a, &b, Pooling::Mse).unwrap(), p2plane(&a, &b, Pooling::Hausdorff).unwrap()),
        ] {
            ensure(hd >= mse, format!("hausdorff {hd} < mse {mse}"))?;
        }
        let (ym, yh) = (yuv_errors(&a, &b, Pooling::Mse).unwrap(), yuv_errors(&a, &b, Pooling::Hausdorff).unwrap());
        ensure((0..3).all(|k| yh[k] >= ym[k]), "hausdorff color error below mean")?;
    }
    ensure(worst <= 1e-9, format!("max deviation {worst:e}"))?;
    Ok(format!("20 cloud pairs of 20..200 points, max |dev| {worst:.1e}, caps and pooling order hold"))
}

// 7 ---------------------------------------------------------------------------

fn sparse_engine() -> Verdict {
    let t = Instant::now();
    let mut r = common::rng(8);
    // dense equivalence on a full 5^3 grid
    let n = 5;
    let (c_in, c_out) = (3, 4);
    let mut coords = Vec::new();
    let mut dense_x = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                coords.push([i, j, k, 0]);
                dense_x.push((0..c_in).map(|_| r.random_range(-1.0..1.0)).collect::<Vec<f64>>());
            }
        }
    }
    let tensor = SparseTensor::new(coords.clone(), dense_x.concat(), c_in).unwrap();
    let mut layer = ConvLayer::zeros(c_in, c_out, None, false);
    layer.weights.iter_mut().for_each(|w| *w = r.random_range(-1.0..1.0));
    let out = layer.forward(&tensor, &build_kernel_map(&tensor), Mode::Infer).unwrap();
    ensure(out.coords() == tensor.coords(), "output coordinates differ from input")?;
    let dense = common::dense_conv(&dense_x, n, c_in, c_out, |dx, dy, dz| {
        let k = ((dx + 1) * 9 + (dy + 1) * 3 + (dz + 1)) as usize;
        layer.weight(k).to_vec()
    });
    let dense_dev = dense
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(o, v)| (i, o, *v)))
        .map(|(i, o, v)| (out.row(i)[o] - v).abs())
        .fold(0.0, f64::max);
    ensure(dense_dev <= 1e-6, format!("dense deviation {dense_dev:e}"))?;
    ensure(layer.weight(CENTER_OFFSET).len() == c_in * c_out, "kernel layout")?;

    // permutation invariance and the straight-line oracle on the default model
    let model = ResScnn::new(&ModelConfig::default(), 8).unwrap();
    let cloud = common::blob(120, 8, 9);
    let t0 = pcqa::sparsenn::voxelize(&cloud, 1.0).unwrap();
    let q = model.predict_tensor(&t0).unwrap();
    let mut order: Vec<usize> = (0..t0.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, r.random_range(0..=i));
    }
    let qp = model.predict_tensor(&t0.permuted(&order).unwrap()).unwrap();
    ensure((q - qp).abs() <= 1e-9, format!("permutation changed output by {:e}", (q - qp).abs()))?;
    let rows: Vec<Vec<f64>> = (0..t0.len()).map(|i| t0.row(i).to_vec()).collect();
    let q_oracle = common::straight_forward(&model, t0.coords(), &rows);
    ensure((q - q_oracle).abs() <= 1e-9, format!("straight-line oracle differs by {:e}", (q - q_oracle).abs()))?;

    // finite-difference gradients
    let mut checked = 0usize;
    let mut skipped = 0usize;
    let mut worst_rel: f64 = 0.0;
    for seed in 0..10u64 {
        let cfg = ModelConfig {
            width: 4,
            depth: 2,
            fc_hidden: 5,
            residual: ResidualVariant::ALL[seed as usize % 4],
            ..ModelConfig::default()
        };
        let m = ResScnn::new(&cfg, seed).unwrap();
        let cloud = common::blob(30, 4, 200 + seed);
        let t = pcqa::sparsenn::voxelize(&cloud, 1.0).unwrap();
        let map = build_kernel_map(&t);
        let c = m.forward(&t, &map, Mode::Train).unwrap();
        let label = c.output + 0.4;
        let (_, d) = smooth_l1(c.output, label);
        let mut g = Gradients::zeros_like(&m);
        m.backward(&c, &map, d, &mut g).unwrap();
        let analytic = g.flatten();
        let base = m.flat_params();
        let running = m.flat_running_stats();
        let h = 1e-4;
        for i in 0..base.len() {
            let eval = |delta: f64| {
                let mut p = base.clone();
                p[i] += delta;
                let mm = ResScnn::from_flat(&cfg, &p, &running).unwrap();
                let c = mm.forward(&t, &map, Mode::Train).unwrap();
                (smooth_l1(c.output, label).0, c.active_units())
            };
            let (lp, up) = eval(h);
            let (lm, um) = eval(-h);
            if up != um {
                skipped += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * h);
            let a = analytic[i];
            let scale = a.abs().max(numeric.abs());
            let err = (a - numeric).abs();
            if scale > 1e-6 {
                worst_rel = worst_rel.max(err / scale);
            }
            ensure(err <= 1e-4 * scale + 1e-8, format!("seed {seed} param {i}: analytic {a} numeric {numeric}"))?;
            checked += 1;
        }
    }
    // smooth L1 at the branch point
    for s in [-1.0f64, 1.0] {
        let below = smooth_l1(s * (1.0 - 1e-15), 0.0);
        let at = smooth_l1(s, 0.0);
        ensure(0.5 * s * s == s.abs() - 0.5, "loss branches disagree at |x| = 1")?;
        ensure((below.0 - at.0).abs() < 1e-14 && (below.1 - at.1).abs() < 1e-14, "smooth L1 discontinuous")?;
    }
    within(t.elapsed(), 120.0)?;
    Ok(format!(
        "dense dev {dense_dev:.1e}, permutation and oracle within 1e-9, FD: {checked} params over 10 seeds (worst rel {worst_rel:.1e}, {skipped} kink crossings skipped), {:.1} s",
        t.elapsed().as_secs_f64()
    ))
}

// 8 ---------------------------------------------------------------------------

fn training_sanity() -> Verdict {
    let model = ResScnn::new(&ModelConfig::default(), 1).unwrap();
    let params = model.param_count();
    let ratio = params as f64 / 1.2e6;
    ensure((0.8..=1.2).contains(&ratio), format!("{params} parameters"))?;
    let samples: Vec<TrainSample> = (0..8u64)
        .map(|i| {
            let mut r = common::rng(i);
            let mut set = std::collections::BTreeSet::new();
            while set.len() < 200 {
                set.insert([r.random_range(0..12), r.random_range(0..12), r.random_range(0..4)]);
            }
            let pos = set.into_iter().map(|p: [i32; 3]| p.map(f64::from)).collect();
            let col = (0..200).map(|_| [r.random(), r.random(), r.random()]).collect();
            TrainSample {
                id: format!("c{i}"),
                cloud: pcqa::pcio::PointCloud::new(pos, col).unwrap(),
                label: 1.0 + 0.5 * i as f64,
            }
        })
        .collect();
    let cfg = TrainConfig {
        lr: 0.01,
        accumulation: 1,
        decay: 1.0,
        epochs: 250,
        max_steps: Some(2000),
        augment: false,
        seed: 3,
        ..TrainConfig::default()
    };
    let t = Instant::now();
    let a = train(model.clone(), &samples, &cfg).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let loss = a.tail_loss(8);
    ensure(a.losses.len() == 2000, format!("{} steps", a.losses.len()))?;
    ensure(loss <= 0.01, format!("final mean loss {loss}"))?;
    within(elapsed, 600.0)?;
    let b = train(model, &samples, &cfg).map_err(|e| e.to_string())?;
    ensure(a.losses == b.losses, "loss curves differ between same-seed runs")?;
    Ok(format!(
        "{params} parameters, mean loss over the last epoch {loss:.2e} after 2000 steps, {:.1} s per run, curves identical",
        elapsed.as_secs_f64()
    ))
}

// 9 ---------------------------------------------------------------------------

fn ablation_harness() -> Verdict {
    let t = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let refs = dir.path().join("refs");
    let clouds: Vec<(String, _)> = (0..3).map(|i| (format!("r{i}"), common::sheet(9, 50 + i))).collect();
    let named: Vec<(&str, _)> = clouds.iter().map(|(a, b)| (a.as_str(), b.clone())).collect();
    common::write_refs(&refs, &named);
    let mut cfg = Config { dataset_seed: 9, distortions: Some(vec![4, 17]), ..Config::default() };
    cfg.ablation.train = TrainConfig { epochs: 1, max_steps: Some(6), ..TrainConfig::default() };
    let ds = dir.path().join("ds");
    let b = cmd_build(&refs, &ds, &cfg, 1).map_err(|e| e.to_string())?;
    let scores = ds.join("scores.csv");
    cmd_score(&b.manifest, &scores, &MetricId::NATIVE, 1).map_err(|e| e.to_string())?;
    let m = Manifest::load(&b.manifest).map_err(|e| e.to_string())?;
    let subj = dir.path().join("subj.csv");
    write_ratings(&m, &subj, 24, 5);
    let annotated = ds.join("annotated.jsonl");
    cmd_annotate(&b.manifest, &[scores], &subj, &annotated, &cfg).map_err(|e| e.to_string())?;
    let split = SplitSpec::parse("test=r2", &m.reference_ids()).map_err(|e| e.to_string())?;
    let out = dir.path().join("report");
    let rep = cmd_report(&annotated, &split, &cfg, &out, 1).map_err(|e| e.to_string())?;
    let depths: Vec<usize> = rep.rows.iter().filter(|r| r.study == "depth").map(|r| r.depth).collect();
    let variants: Vec<ResidualVariant> = rep.rows.iter().filter(|r| r.study == "residual").map(|r| r.variant).collect();
    ensure(depths == vec![1, 2, 3, 4, 5], format!("depth rows {depths:?}"))?;
    ensure(variants == ResidualVariant::ALL.to_vec(), format!("variant rows {variants:?}"))?;
    let csv = std::fs::read_to_string(out.join("ablation.csv")).map_err(|e| e.to_string())?;
    ensure(csv.starts_with("study,label,depth,variant,params,plcc,srocc\n"), "ablation.csv header")?;
    ensure(csv.lines().count() == 10, "ablation.csv row count")?;
    let txt = std::fs::read_to_string(out.join("ablation.txt")).map_err(|e| e.to_string())?;
    ensure(txt.contains("Network depth") && txt.contains("Residual pattern"), "ablation.txt sections")?;
    ensure(
        rep.rows.iter().all(|r| r.params > 0) && rep.rows.windows(2).take(4).all(|w| w[0].params < w[1].params),
        "parameter counts should grow with depth",
    )?;
    Ok(format!("9 configurations trained and reported, {:.1} s", t.elapsed().as_secs_f64()))
}

// 10 --------------------------------------------------------------------------

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pcqa"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        out.status.success(),
        format!("pcqa {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)),
    )
}

fn collect_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn end_to_end_determinism() -> Verdict {
    let t = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let refs = dir.path().join("refs");
    let clouds: Vec<(String, _)> = (0..3).map(|i| (format!("ref{i}"), common::sheet(12, 60 + i))).collect();
    let named: Vec<(&str, _)> = clouds.iter().map(|(a, b)| (a.as_str(), b.clone())).collect();
    common::write_refs(&refs, &named);
    let cfg = Config {
        dataset_seed: 21,
        distortions: Some(vec![4, 11, 17, 22]),
        model: ModelConfig { width: 8, depth: 2, fc_hidden: 8, ..ModelConfig::default() },
        train: TrainConfig { epochs: 2, ..TrainConfig::default() },
        ..Config::default()
    };
    let cfg_path = dir.path().join("config.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let mut outputs = Vec::new();
    for (name, jobs) in [("a", "1"), ("b", "1"), ("c", "8")] {
        let run = dir.path().join(name);
        let ds = run.join("ds");
        let common_args = ["--config", &s(&cfg_path), "--jobs", jobs];
        let with = |extra: &[&str]| -> Vec<String> {
            extra.iter().map(|x| x.to_string()).chain(common_args.iter().map(|x| x.to_string())).collect()
        };
        let call = |v: Vec<String>| run_cli(&v.iter().map(String::as_str).collect::<Vec<_>>());
        call(with(&["build", "--refs", &s(&refs), "--out", &s(&ds)]))?;
        call(with(&["score", "--manifest", &s(&ds.join("manifest.jsonl")), "--out", &s(&ds.join("scores.csv"))]))?;
        let m = Manifest::load(ds.join("manifest.jsonl")).map_err(|e| e.to_string())?;
        write_ratings(&m, &run.join("subjective.csv"), 24, 8);
        call(with(&[
            "annotate",
            "--manifest",
            &s(&ds.join("manifest.jsonl")),
            "--scores",
            &s(&ds.join("scores.csv")),
            "--subjective",
            &s(&run.join("subjective.csv")),
            "--out",
            &s(&ds.join("annotated.jsonl")),
        ]))?;
        let annotated = s(&ds.join("annotated.jsonl"));
        call(with(&["train", "--manifest", &annotated, "--split", "test=ref2", "--out", &s(&run.join("model"))]))?;
        call(with(&[
            "eval",
            "--manifest",
            &annotated,
            "--split",
            "test=ref2",
            "--checkpoint",
            &s(&run.join("model/model.ckpt")),
            "--out",
            &s(&run.join("eval")),
        ]))?;
        outputs.push(collect_files(&run));
    }
    let files = outputs[0].len();
    for f in ["ds/manifest.jsonl", "ds/scores.csv", "ds/annotated.jsonl", "model/model.ckpt", "model/loss.csv", "eval/eval.csv"] {
        ensure(outputs[0].contains_key(Path::new(f)), format!("missing {f}"))?;
    }
    for (i, other) in outputs.iter().enumerate().skip(1) {
        ensure(other.keys().eq(outputs[0].keys()), format!("run {i} produced a different file set"))?;
        for (k, v) in other {
            ensure(&outputs[0][k] == v, format!("run {i}: {} differs", k.display()))?;
        }
    }
    Ok(format!(
        "{files} files byte-identical across two --jobs 1 runs and a --jobs 8 run, {:.1} s",
        t.elapsed().as_secs_f64()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("correlation oracle", correlation_oracle),
        ("regression recovery", regression_recovery),
        ("pseudo-MOS pipeline", pseudo_mos_pipeline),
        ("subject screening", screening),
        ("distortion contracts", distortion_contracts),
        ("FR metric oracles", metric_oracles),
        ("sparse engine", sparse_engine),
        ("training sanity", training_sanity),
        ("ablation harness", ablation_harness),
        ("end-to-end determinism", end_to_end_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|x| x == &n.to_string()) {
            continue;
        }
        let verdict = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match verdict {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
