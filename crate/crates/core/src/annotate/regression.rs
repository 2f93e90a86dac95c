//! Monotone score mappings (logistic-4, logistic-5, cubic-4) fitted by
//! multi-start Nelder–Mead least squares.

use serde::{Deserialize, Serialize};

use super::{AnnotateError, Result};

pub const MAX_ITERATIONS: usize = 10_000;
const STARTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionKind {
    Logistic4,
    Logistic5,
    Cubic4,
}

impl RegressionKind {
    pub fn param_count(self) -> usize {
        match self {
            RegressionKind::Logistic5 => 5,
            _ => 4,
        }
    }

    /// Closed-form evaluation for an explicit parameter vector.
    pub fn eval(self, params: &[f64], q: f64) -> f64 {
        match self {
            RegressionKind::Logistic4 => {
                let [b1, b2, b3, b4] = [params[0], params[1], params[2], params[3]];
                (b1 - b2) / (1.0 + (-(q - b3) / b4.abs()).exp()) + b2
            }
            RegressionKind::Logistic5 => {
                let [b1, b2, b3, b4, b5] = [params[0], params[1], params[2], params[3], params[4]];
                b1 * (0.5 - 1.0 / (1.0 + (b2 * (q - b3)).exp())) + b4 * q + b5
            }
            RegressionKind::Cubic4 => {
                let [a, b, c, d] = [params[0], params[1], params[2], params[3]];
                ((a * q + b) * q + c) * q + d
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub rmse: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub kind: RegressionKind,
    pub params: Vec<f64>,
    pub diagnostics: FitDiagnostics,
}

impl RegressionModel {
    pub fn new(kind: RegressionKind, params: Vec<f64>) -> Result<Self> {
        if params.len() != kind.param_count() || params.iter().any(|p| !p.is_finite()) {
            return Err(AnnotateError::BadParameters);
        }
        Ok(Self {
            kind,
            params,
            diagnostics: FitDiagnostics {
                rmse: f64::NAN,
                iterations: 0,
                converged: true,
            },
        })
    }

    pub fn eval(&self, q: f64) -> f64 {
        self.kind.eval(&self.params, q)
    }
}

pub fn eval_regression(model: &RegressionModel, q: f64) -> f64 {
    model.eval(q)
}

fn rmse(kind: RegressionKind, params: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(&q, &t)| (kind.eval(params, q) - t).powi(2))
        .sum();
    (sse / x.len() as f64).sqrt()
}

/// Linear interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Ordinary least squares line `y = slope x + intercept`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Least-squares cubic through the normal equations (in centered, scaled
/// coordinates for conditioning), returned as `(a, b, c, d)`.
fn cubic_fit(x: &[f64], y: &[f64]) -> Vec<f64> {
    use nalgebra::{Matrix4, Vector4};
    let mx = mean(x);
    let sx = x.iter().map(|v| (v - mx).abs()).fold(0.0, f64::max).max(1e-300);
    let mut ata = Matrix4::<f64>::zeros();
    let mut aty = Vector4::<f64>::zeros();
    for (&q, &t) in x.iter().zip(y) {
        let u = (q - mx) / sx;
        let row = Vector4::new(u * u * u, u * u, u, 1.0);
        ata += row * row.transpose();
        aty += row * t;
    }
    let coef = ata
        .clone()
        .cholesky()
        .map(|c| c.solve(&aty))
        .or_else(|| ata.try_inverse().map(|inv| inv * aty))
        .unwrap_or_else(|| Vector4::new(0.0, 0.0, 0.0, mean(y)));
    // expand p(u) with u = (q - m) / s back to powers of q
    let (a3, a2, a1, a0) = (coef[0], coef[1], coef[2], coef[3]);
    let (s, m) = (sx, mx);
    let a = a3 / s.powi(3);
    let b = a2 / (s * s) - 3.0 * a3 * m / s.powi(3);
    let c = a1 / s - 2.0 * a2 * m / (s * s) + 3.0 * a3 * m * m / s.powi(3);
    let d = a0 - a1 * m / s + a2 * m * m / (s * s) - a3 * m.powi(3) / s.powi(3);
    vec![a, b, c, d]
}

fn starts(kind: RegressionKind, x: &[f64], y: &[f64]) -> Vec<Vec<f64>> {
    let mut sx = x.to_vec();
    sx.sort_by(f64::total_cmp);
    let q = |p: f64| quantile_sorted(&sx, p);
    let (ymin, ymax) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (slope, intercept) = linear_fit(x, y);
    let spread = {
        let m = mean(x);
        let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
        if sd > 0.0 { sd } else { 1.0 }
    };
    let (hi, lo) = if slope >= 0.0 { (ymax, ymin) } else { (ymin, ymax) };
    match kind {
        RegressionKind::Logistic4 => {
            let mut s = Vec::new();
            for p in [0.25, 0.5, 0.75] {
                s.push(vec![hi, lo, q(p), spread]);
                s.push(vec![lo, hi, q(p), spread]);
            }
            s.push(vec![hi, lo, q(0.5), spread / 4.0]);
            s.push(vec![hi, lo, q(0.5), spread * 4.0]);
            s
        }
        RegressionKind::Logistic5 => {
            let amp = hi - lo;
            let rate = 1.0 / spread;
            let mut s = vec![vec![0.0, rate, q(0.5), slope, intercept]];
            for p in [0.25, 0.5, 0.75] {
                s.push(vec![amp, rate, q(p), 0.0, mean(y)]);
                s.push(vec![amp, 3.0 * rate, q(p), 0.0, mean(y)]);
            }
            s.push(vec![amp / 2.0, rate, q(0.5), slope / 2.0, intercept / 2.0 + mean(y) / 2.0]);
            s
        }
        RegressionKind::Cubic4 => {
            let ls = cubic_fit(x, y);
            let mut s = vec![ls.clone(), vec![0.0, 0.0, slope, intercept]];
            for k in 1..STARTS - 1 {
                let f = 1.0 + 0.1 * k as f64;
                s.push(ls.iter().map(|v| v * f).collect());
            }
            s.truncate(STARTS);
            s
        }
    }
}

struct Simplex {
    best: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
}

/// Nelder–Mead with standard coefficients, terminating when both the value
/// spread and the simplex size are negligible or after `max_iter` steps.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], max_iter: usize) -> Simplex {
    let n = x0.len();
    let eval = |p: &[f64]| {
        let v = f(p);
        if v.is_finite() { v } else { f64::INFINITY }
    };
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += if p[i].abs() > 1e-8 { 0.1 * p[i] } else { 0.05 };
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let size = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let scale = pts[0].iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if vals[n] - vals[0] <= 1e-15 * (1.0 + vals[0].abs()) && size <= 1e-9 * scale {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for p in &pts[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    let shrunk: Vec<f64> = pts[0]
                        .iter()
                        .zip(&pts[i])
                        .map(|(b, p)| b + 0.5 * (p - b))
                        .collect();
                    vals[i] = eval(&shrunk);
                    pts[i] = shrunk;
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    Simplex {
        best: pts[best].clone(),
        value: vals[best],
        iterations,
        converged,
    }
}

/// Logistic-5 parameters reproducing a logistic-4 curve exactly.
fn logistic4_as_logistic5(p: &[f64]) -> Vec<f64> {
    let [a, b, c, d] = [p[0], p[1], p[2], p[3]];
    vec![a - b, 1.0 / d.abs(), c, 0.0, 0.5 * (a + b)]
}

/// Least-squares fit of `kind` mapping raw scores `x` to targets `y`; the
/// best of eight deterministic starts wins. Logistic-5 also starts from the
/// logistic-4 optimum, so it never fits worse than the family it contains.
pub fn fit_regression(kind: RegressionKind, x: &[f64], y: &[f64]) -> Result<RegressionModel> {
    if x.len() != y.len() {
        return Err(AnnotateError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < kind.param_count() {
        return Err(AnnotateError::TooFewSamples { need: kind.param_count(), have: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(AnnotateError::NonFinite);
    }
    let objective = |p: &[f64]| rmse(kind, p, x, y);
    let mut initial = starts(kind, x, y);
    if kind == RegressionKind::Logistic5 {
        if let Ok(l4) = fit_regression(RegressionKind::Logistic4, x, y) {
            initial.push(logistic4_as_logistic5(&l4.params));
        }
    }
    let mut best: Option<Simplex> = None;
    for start in initial {
        let mut run = nelder_mead(&objective, &start, MAX_ITERATIONS);
        // one restart from the optimum re-inflates a collapsed simplex
        if run.iterations < MAX_ITERATIONS {
            let again = nelder_mead(&objective, &run.best, MAX_ITERATIONS - run.iterations);
            if again.value <= run.value {
                run = Simplex {
                    best: again.best,
                    value: again.value,
                    iterations: run.iterations + again.iterations,
                    converged: again.converged,
                };
            }
        }
        if best.as_ref().is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    if !best.value.is_finite() || best.best.iter().any(|v| !v.is_finite()) {
        return Err(AnnotateError::FitFailed);
    }
    if !best.converged {
        log::warn!("{kind:?} fit hit the iteration cap; keeping best-so-far");
    }
    Ok(RegressionModel {
        kind,
        diagnostics: FitDiagnostics {
            rmse: rmse(kind, &best.best, x, y),
            iterations: best.iterations,
            converged: best.converged,
        },
        params: best.best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn closed_forms() {
        let id = RegressionModel::new(RegressionKind::Logistic5, vec![0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        for q in [-3.0, 0.0, 2.5, 40.0] {
            assert_eq!(eval_regression(&id, q), q);
        }
        let c = RegressionModel::new(RegressionKind::Logistic5, vec![0.0, 2.0, 1.0, 0.0, 3.25]).unwrap();
        assert_eq!(c.eval(17.0), 3.25);
        let cubic = RegressionModel::new(RegressionKind::Cubic4, vec![0.0, 0.0, 2.0, 1.0]).unwrap();
        assert_eq!(cubic.eval(3.0), 7.0);
        // logistic-4 midpoint is the mean of the asymptotes, sign of beta4 ignored
        let l4 = RegressionModel::new(RegressionKind::Logistic4, vec![5.0, 1.0, 2.0, -0.5]).unwrap();
        assert_eq!(l4.eval(2.0), 3.0);
        assert!(RegressionModel::new(RegressionKind::Cubic4, vec![1.0; 5]).is_err());
    }

    #[test]
    fn logistic5_contains_logistic4() {
        for p in [[5.0, 1.0, 2.0, -0.5], [1.0, 4.0, -3.0, 7.0]] {
            let q5 = logistic4_as_logistic5(&p);
            for q in [-10.0, -1.0, 0.0, 2.0, 9.0] {
                let a = RegressionKind::Logistic4.eval(&p, q);
                let b = RegressionKind::Logistic5.eval(&q5, q);
                assert!((a - b).abs() < 1e-12, "{a} {b}");
            }
        }
    }

    #[test]
    fn cubic_recovers_noise_free_coefficients() {
        let truth = [0.02, -0.3, 1.5, 2.0];
        let x: Vec<f64> = (0..30).map(|i| i as f64 * 0.4 - 2.0).collect();
        let y: Vec<f64> = x.iter().map(|&q| RegressionKind::Cubic4.eval(&truth, q)).collect();
        let m = fit_regression(RegressionKind::Cubic4, &x, &y).unwrap();
        for (a, b) in m.params.iter().zip(truth) {
            assert!((a - b).abs() < 1e-6, "{:?}", m.params);
        }
    }

    #[test]
    fn logistic5_represents_identity() {
        let x: Vec<f64> = (0..25).map(|i| 1.0 + i as f64 / 6.0).collect();
        let m = fit_regression(RegressionKind::Logistic5, &x, &x).unwrap();
        assert!(m.diagnostics.rmse <= 1e-6);
    }

    #[test]
    fn logistic4_on_noisy_own_data() {
        let truth = [4.8, 1.2, 35.0, 3.0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let x: Vec<f64> = (0..80).map(|i| 20.0 + i as f64 * 0.4).collect();
        let y: Vec<f64> = x.iter().map(|&q| RegressionKind::Logistic4.eval(&truth, q) + noise.sample(&mut rng)).collect();
        let m = fit_regression(RegressionKind::Logistic4, &x, &y).unwrap();
        let curve_rmse = (x.iter().map(|&q| (m.eval(q) - RegressionKind::Logistic4.eval(&truth, q)).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
        assert!(curve_rmse <= 0.05, "{curve_rmse}");
    }

    #[test]
    fn stored_rmse_matches_evaluation() {
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.77).sin() * 10.0 + i as f64).collect();
        let y: Vec<f64> = x.iter().map(|q| 1.0 + 4.0 / (1.0 + (-(q - 20.0) / 5.0f64).exp())).collect();
        for kind in [RegressionKind::Logistic4, RegressionKind::Logistic5, RegressionKind::Cubic4] {
            let m = fit_regression(kind, &x, &y).unwrap();
            let again = rmse(kind, &m.params, &x, &y);
            assert!((again - m.diagnostics.rmse).abs() <= 1e-12);
            // never worse than the best start
            let best_start = starts(kind, &x, &y).iter().map(|s| rmse(kind, s, &x, &y)).fold(f64::INFINITY, f64::min);
            assert!(m.diagnostics.rmse <= best_start);
        }
    }

    #[test]
    fn input_checks() {
        assert!(fit_regression(RegressionKind::Logistic5, &[1.0; 4], &[1.0; 4]).is_err());
        assert!(fit_regression(RegressionKind::Cubic4, &[1.0, 2.0, 3.0, f64::NAN], &[1.0; 4]).is_err());
        assert!(fit_regression(RegressionKind::Cubic4, &[1.0; 4], &[1.0; 5]).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert!((quantile_sorted(&v, 0.95) - 3.85).abs() < 1e-12);
    }
}
