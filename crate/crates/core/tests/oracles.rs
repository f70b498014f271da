//! Closed-form oracles for convolution, statistics and smoothing.

use lcent::convolve::{convolve, self_convolve, ConvolveConfig, Tier};
use lcent::smooth::{differential_entropy, irwin_hall, SmoothedDensity};
use lcent::{from_family, stats, IntegerPmf};

fn family(name: &str, params: &[f64]) -> IntegerPmf {
    from_family(name, params, 1e-15).unwrap()
}

fn cfg() -> ConvolveConfig {
    ConvolveConfig::default()
}

#[test]
fn geometric_pair_is_negative_binomial() {
    let p = 0.3;
    let g = family("geometric", &[p]);
    for tier in [Tier::Direct, Tier::Fft] {
        let c = convolve(&g, &g, tier, &cfg()).unwrap().result;
        assert_eq!(c.offset(), 0);
        for k in 0..=20i64 {
            let exact = (k + 1) as f64 * p * p * (1.0 - p).powi(k as i32);
            let got = c.weight(k);
            assert!((got - exact).abs() <= 1e-14 * exact, "{tier:?} k={k}: {got} vs {exact}");
        }
    }
}

#[test]
fn fft_agrees_with_direct() {
    let g = family("geometric", &[0.1]);
    let d = self_convolve(&g, 3, Tier::Direct, &cfg()).unwrap().result;
    let f = self_convolve(&g, 3, Tier::Fft, &cfg()).unwrap().result;
    let lo = d.offset().min(f.offset());
    let hi = d.last().max(f.last());
    let worst = (lo..=hi).map(|k| (d.weight(k) - f.weight(k)).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-13, "max difference {worst}");
}

#[test]
fn uniform_square_is_triangular() {
    let u = family("uniform", &[10.0]);
    let c = convolve(&u, &u, Tier::Auto, &cfg()).unwrap().result;
    let st = stats(&c).unwrap();
    assert!((st.pmax - 0.1).abs() < 1e-16);
    assert_eq!(st.nmax, 9);
    for k in 0..=18i64 {
        let exact = (10 - (k - 9).abs()) as f64 / 100.0;
        assert!((c.weight(k) - exact).abs() < 1e-16, "k={k}");
    }
}

#[test]
fn bernoulli_sum_is_binomial() {
    let p = 0.3;
    let s = self_convolve(&family("bernoulli", &[p]), 4, Tier::Auto, &cfg()).unwrap().result;
    let b = family("binomial", &[4.0, p]);
    for k in 0..=4i64 {
        assert!((s.weight(k) - b.weight(k)).abs() < 1e-15, "k={k}");
    }
}

#[test]
fn geometric_sum_variance() {
    let s = self_convolve(&family("geometric", &[0.02]), 3, Tier::Auto, &cfg()).unwrap().result;
    let st = stats(&s).unwrap();
    assert!((st.variance - 7350.0).abs() < 1e-9 * 7350.0, "variance {}", st.variance);
    assert!((st.mean - 147.0).abs() < 1e-9 * 147.0);
}

#[test]
fn poisson_sums_stay_poisson() {
    // sigma = 1000 forces the FFT path through long tails.
    let lambda = 1.0e6;
    let x = family("poisson", &[lambda]);
    for n in 2..=3 {
        let s = self_convolve(&x, n, Tier::Fft, &cfg()).unwrap().result;
        let exact = stats(&family("poisson", &[lambda * n as f64])).unwrap();
        let st = stats(&s).unwrap();
        let diff = (st.entropy - exact.entropy).abs();
        assert!(diff <= st.entropy_error + exact.entropy_error, "n={n}: diff {diff} > certified");
        assert!(diff < 1e-10, "n={n}: diff {diff}");
        assert!(s.tail_mass_bound() <= 1e-14, "n={n}: tail {}", s.tail_mass_bound());
    }
}

#[test]
fn uniform_entropy_is_log_m() {
    for m in [1.0, 2.0, 10.0, 1000.0, 1.0e6] {
        let st = stats(&family("uniform", &[m])).unwrap();
        assert!((st.entropy - f64::ln(m)).abs() <= 1e-14, "m={m}: {}", st.entropy);
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[test]
fn irwin_hall_alternating_sum() {
    for n in 1..=8usize {
        let ih = irwin_hall(n).unwrap();
        let fact: f64 = (1..n).map(|i| i as f64).product();
        for step in 0..=(8 * n) {
            let x = step as f64 / 8.0 + 1.0 / 64.0;
            if x >= n as f64 {
                continue;
            }
            let alt: f64 = (0..=n)
                .filter(|&k| (k as f64) < x)
                .map(|k| {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    sign * binom(n, k) * (x - k as f64).powi(n as i32 - 1)
                })
                .sum::<f64>()
                / fact;
            let got = ih.density(x);
            assert!((got - alt).abs() < 1e-12, "n={n} x={x}: {got} vs {alt}");
        }
    }
}

#[test]
fn one_uniform_keeps_discrete_entropy() {
    let g = family("poisson", &[7.5]);
    let f = SmoothedDensity::new(&g, 1).unwrap();
    let h = differential_entropy(&f, 1e-12).unwrap();
    let big_h = stats(&g).unwrap();
    assert!((h.value - big_h.entropy).abs() <= h.certified_error + big_h.entropy_error + 1e-13);
}
