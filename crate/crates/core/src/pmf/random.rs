use rand::Rng;

use super::IntegerPmf;
use crate::sum::NeumaierSum;

fn normalised(offset: i64, raw: Vec<f64>) -> IntegerPmf {
    let total: f64 = raw.iter().copied().collect::<NeumaierSum>().value();
    let weights = raw.into_iter().map(|w| w / total).collect();
    IntegerPmf::from_weights(offset, weights, 0.0).expect("normalised weights form a pmf")
}

/// Random finitely supported log-concave pmf with at most `max_len` points.
///
/// Log-ratios are drawn uniformly from `[-3, 3]` and sorted in decreasing
/// order, so the sequence is strictly log-concave with high probability.
pub fn random_log_concave<R: Rng + ?Sized>(rng: &mut R, max_len: usize) -> IntegerPmf {
    let len = rng.gen_range(1..=max_len.max(1));
    let offset = rng.gen_range(-20..=20);
    let mut ratios: Vec<f64> = (1..len).map(|_| rng.gen_range(-3.0..3.0)).collect();
    ratios.sort_by(|a, b| b.total_cmp(a));
    let mut logs = Vec::with_capacity(len);
    let mut acc = 0.0;
    logs.push(0.0);
    for r in ratios {
        acc += r;
        logs.push(acc);
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    normalised(offset, logs.into_iter().map(|l| (l - top).exp()).collect())
}

/// Random finitely supported pmf with no shape constraint; roughly one in
/// eight interior weights is zero.
pub fn random_pmf<R: Rng + ?Sized>(rng: &mut R, max_len: usize) -> IntegerPmf {
    let len = rng.gen_range(1..=max_len.max(1));
    let offset = rng.gen_range(-20..=20);
    let mut raw: Vec<f64> = (0..len)
        .map(|_| if rng.gen_range(0..8) == 0 { 0.0 } else { rng.gen_range(0.0..1.0) })
        .collect();
    if raw.iter().all(|&w| w == 0.0) {
        raw[0] = 1.0;
    }
    normalised(offset, raw)
}
