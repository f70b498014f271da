use serde::Serialize;

use super::{entropy_perturbation, side_entropy_tail, tv_shift_distance, IntegerPmf, TailCert};
use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

/// Summary statistics of a pmf with error bounds that cover both the stored
/// entry errors and the mass outside the window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistStats {
    pub mean: f64,
    pub mean_error: f64,
    pub variance: f64,
    pub variance_error: f64,
    pub sigma: f64,
    pub entropy: f64,
    pub entropy_error: f64,
    pub pmax: f64,
    /// Last integer attaining `pmax`.
    pub nmax: i64,
    /// `sum_k min(p(k), p(k+1))`.
    pub q: f64,
    pub q_error: f64,
    /// Total-variation distance between `X` and `X + 1`.
    pub tv_shift: f64,
    pub stored_mass: f64,
    pub tail_mass_bound: f64,
}

/// Sums `r^j (d+j)^s` for `j >= 1` and `s = 1, 2`, scaled by `p_up`.
fn envelope_moments(cert: TailCert, p_up: f64, d: f64) -> (f64, f64) {
    if cert.ratio == 0.0 {
        return (0.0, 0.0);
    }
    if !cert.has_envelope() {
        return (f64::INFINITY, f64::INFINITY);
    }
    let r = cert.ratio;
    let om = 1.0 - r;
    let d = d.abs();
    let s0 = r / om;
    let s1 = r / (om * om);
    let s2 = r * (1.0 + r) / (om * om * om);
    let m1 = p_up * (d * s0 + s1);
    let m2 = p_up * (d * d * s0 + 2.0 * d * s1 + s2);
    (m1, m2)
}

pub fn stats(p: &IntegerPmf) -> Result<DistStats> {
    let w = &p.weights;
    let n = w.len();

    let mut mass = NeumaierSum::new();
    let mut first = NeumaierSum::new();
    for (i, &x) in w.iter().enumerate() {
        mass.add(x);
        first.add(i as f64 * x);
    }
    let s = mass.value();
    if s <= 0.0 {
        return Err(Error::InvalidPmf("pmf has no stored mass".into()));
    }
    let centre = first.value() / s;

    let mut second = NeumaierSum::new();
    let mut entropy = NeumaierSum::new();
    let mut entropy_abs = 0.0;
    let mut perturb = NeumaierSum::new();
    let mut err1 = NeumaierSum::new();
    let mut err2 = NeumaierSum::new();
    let mut q = NeumaierSum::new();
    let mut pmax = 0.0f64;
    let mut imax = 0usize;
    let mut total_err = NeumaierSum::new();
    for (i, &x) in w.iter().enumerate() {
        let d = i as f64 - centre;
        second.add(d * d * x);
        if x > 0.0 {
            let t = -x * p.log_weights[i];
            entropy.add(t);
            entropy_abs += t.abs();
        }
        let e = p.entry_error(x);
        if e > 0.0 {
            perturb.add(entropy_perturbation(x, x, e));
            err1.add(e * d.abs());
            err2.add(e * d * d);
            total_err.add(e);
        }
        if i + 1 < n {
            q.add(x.min(w[i + 1]));
        }
        if x >= pmax {
            pmax = x;
            imax = i;
        }
    }
    let variance = second.value() / s;
    let mean = p.offset as f64 + centre;

    let tail_mass = p.tail_mass_bound();
    let span = centre.abs().max((n as f64 - 1.0 - centre).abs()) + 1.0;
    let (l1, l2) = envelope_moments(p.left_tail, p.edge_upper(false), centre);
    let (r1, r2) = envelope_moments(p.right_tail, p.edge_upper(true), n as f64 - 1.0 - centre);
    let mean_error = l1 + r1 + p.carry * span + err1.value() + 4.0 * f64::EPSILON * mean.abs().max(1.0);
    let variance_error = l2
        + r2
        + p.carry * span * span
        + err2.value()
        + tail_mass * variance
        + mean_error * mean_error
        + 16.0 * f64::EPSILON * variance;

    let envelope = side_entropy_tail(p, false, 1) + side_entropy_tail(p, true, 1);
    let entropy_error = perturb.value() + envelope + 4.0 * f64::EPSILON * entropy_abs;
    if !entropy_error.is_finite() {
        return Err(Error::UncertifiableTail {
            tail_mass,
            reason: "no geometric envelope is known for a side with possible mass".into(),
        });
    }

    Ok(DistStats {
        mean,
        mean_error,
        variance,
        variance_error,
        sigma: variance.sqrt(),
        entropy: entropy.value(),
        entropy_error,
        pmax,
        nmax: p.offset + imax as i64,
        q: q.value(),
        q_error: tail_mass + 2.0 * total_err.value(),
        tv_shift: tv_shift_distance(p),
        stored_mass: s,
        tail_mass_bound: tail_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::from_family;

    #[test]
    fn geometric_half() {
        let p = from_family("geometric", &[0.5], 1e-15).unwrap();
        let st = stats(&p).unwrap();
        assert!((st.entropy - 2.0 * 2f64.ln()).abs() <= 1e-12);
        assert!(st.entropy_error < 1e-12);
        assert!((st.q - 0.5).abs() <= 1e-12);
        assert!((st.variance - 2.0).abs() <= st.variance_error && st.variance_error < 1e-10);
        assert!((st.mean - 1.0).abs() <= st.mean_error && st.mean_error < 1e-11);
        assert_eq!(st.nmax, 0);
        assert!((st.pmax - 0.5).abs() < 1e-15);
    }

    #[test]
    fn poisson_hundred_last_maximiser() {
        let p = from_family("poisson", &[100.0], 1e-15).unwrap();
        let st = stats(&p).unwrap();
        assert_eq!(st.nmax, 100);
        assert!((st.variance - 100.0).abs() < 1e-9);
        assert!(st.variance_error < 1e-6);
    }

    #[test]
    fn moments_match_closed_forms() {
        for (name, params) in [
            ("binomial", vec![50.0, 0.3]),
            ("negbinomial", vec![4.0, 0.05]),
            ("twosided-geometric", vec![0.95]),
            ("uniform", vec![12.0]),
        ] {
            let p = from_family(name, &params, 1e-15).unwrap();
            let spec = p.family_spec().unwrap().clone();
            let st = stats(&p).unwrap();
            assert!((st.mean - spec.mean()).abs() < 1e-9 * (1.0 + spec.mean().abs()), "{name}");
            assert!((st.variance - spec.variance()).abs() < 1e-9 * spec.variance(), "{name}");
            assert!(st.mean_error.is_finite() && st.variance_error.is_finite());
        }
    }

    #[test]
    fn unknown_tail_is_uncertifiable() {
        let p = IntegerPmf::from_weights(0, vec![0.3, 0.3, 0.3], 0.1).unwrap();
        assert!(matches!(stats(&p), Err(Error::UncertifiableTail { .. })));
    }

    #[test]
    fn q_equals_one_minus_tv() {
        let p = from_family("poisson", &[13.7], 1e-15).unwrap();
        let st = stats(&p).unwrap();
        assert!((st.tv_shift - (1.0 - st.q)).abs() < 1e-12);
    }
}
