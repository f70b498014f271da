//! Randomised invariants on small log-concave pmfs.

use lcent::convolve::{convolve, ConvolveConfig, Tier};
use lcent::{is_log_concave, stats, tv_shift_distance, IntegerPmf};
use proptest::prelude::*;

/// Normalised pmf whose log-weights have non-increasing increments.
fn log_concave() -> impl Strategy<Value = IntegerPmf> {
    (-20i64..20, 0.0f64..3.0, prop::collection::vec(0.0f64..2.0, 0..25)).prop_map(|(offset, start, drops)| {
        let mut slope = start;
        let mut logs = vec![0.0];
        for d in drops {
            slope -= d;
            logs.push(logs.last().unwrap() + slope);
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        IntegerPmf::from_weights(offset, w.iter().map(|x| x / total).collect(), 0.0).unwrap()
    })
}

proptest! {
    #[test]
    fn tv_equals_one_minus_q(p in log_concave()) {
        let st = stats(&p).unwrap();
        prop_assert!((tv_shift_distance(&p) - (1.0 - st.q)).abs() < 1e-13);
    }

    #[test]
    fn one_minus_q_is_pmax(p in log_concave()) {
        let st = stats(&p).unwrap();
        prop_assert!(((1.0 - st.q) - st.pmax).abs() < 1e-13);
    }

    #[test]
    fn entropy_lower_bound(p in log_concave()) {
        let st = stats(&p).unwrap();
        prop_assert!((-st.entropy).exp() <= 1.0 - st.q + 1e-13);
    }

    #[test]
    fn convolution_keeps_log_concavity_and_q(a in log_concave(), b in log_concave()) {
        let c = convolve(&a, &b, Tier::Direct, &ConvolveConfig::default()).unwrap();
        prop_assert!(is_log_concave(&c.result, 1e-9).log_concave);
        let (qa, qb, qc) = (stats(&a).unwrap().q, stats(&b).unwrap().q, stats(&c.result).unwrap().q);
        prop_assert!(qc >= qa.max(qb) - 1e-10);
        let mass: f64 = c.result.weights().iter().sum();
        prop_assert!((mass - 1.0).abs() < 1e-13);
    }

    #[test]
    fn direct_and_fft_agree(a in log_concave(), b in log_concave()) {
        let d = convolve(&a, &b, Tier::Direct, &ConvolveConfig::default()).unwrap().result;
        let f = convolve(&a, &b, Tier::Fft, &ConvolveConfig::default()).unwrap().result;
        prop_assert_eq!(d.offset(), f.offset());
        for (x, y) in d.weights().iter().zip(f.weights()) {
            prop_assert!((x - y).abs() < 1e-14);
        }
    }
}
