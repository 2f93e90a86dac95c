use super::{AnnotateError, Result};

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(AnnotateError::LengthMismatch(p.len(), q.len()));
    }
    if p.len() < 2 {
        return Err(AnnotateError::TooFewSamples { need: 2, have: p.len() });
    }
    if p.iter().chain(q).any(|v| !v.is_finite()) {
        return Err(AnnotateError::NonFinite);
    }
    Ok(())
}

/// Pearson linear correlation.
pub fn plcc(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let n = p.len() as f64;
    let mp = p.iter().sum::<f64>() / n;
    let mq = q.iter().sum::<f64>() / n;
    let (mut spq, mut spp, mut sqq) = (0.0, 0.0, 0.0);
    for (&a, &b) in p.iter().zip(q) {
        let (da, db) = (a - mp, b - mq);
        spq += da * db;
        spp += da * da;
        sqq += db * db;
    }
    if spp == 0.0 || sqq == 0.0 {
        return Err(AnnotateError::UndefinedCorrelation);
    }
    Ok((spq / (spp * sqq).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the average of their positions.
pub fn fractional_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank-order correlation: Pearson correlation of fractional ranks.
pub fn srocc(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    plcc(&fractional_ranks(p), &fractional_ranks(q))
}

/// `1 - 6 sum d^2 / (n (n^2 - 1))`; exact only without ties.
pub fn srocc_closed_form(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let (rp, rq) = (fractional_ranks(p), fractional_ranks(q));
    let n = p.len() as f64;
    let d2: f64 = rp.iter().zip(&rq).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}
