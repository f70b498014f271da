//! Closed-form bounds and thresholds, each with its hypothesis evaluated
//! exactly as stated (strict or non-strict).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmt::{ser_f64, ser_opt_f64};
use crate::pmf::{is_log_concave, stats, IntegerPmf};

/// `3^7`, the scale above which the entropy-gap and tail bounds apply.
pub const THREE_TO_SEVEN: f64 = 2187.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Param {
    pub name: &'static str,
    #[serde(serialize_with = "ser_f64")]
    pub value: f64,
}

fn params(pairs: &[(&'static str, f64)]) -> Vec<Param> {
    pairs.iter().map(|&(name, value)| Param { name, value }).collect()
}

/// One evaluated bound. `value` and `window` are only set when the
/// hypothesis holds (except where `flag` documents otherwise).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEvaluation {
    pub name: &'static str,
    pub params: Vec<Param>,
    pub precondition_met: bool,
    #[serde(serialize_with = "ser_opt_f64")]
    pub value: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub flag: Option<String>,
}

impl BoundEvaluation {
    fn new(name: &'static str, p: &[(&'static str, f64)], met: bool) -> Self {
        Self { name, params: params(p), precondition_met: met, value: None, window: None, flag: None }
    }
}

/// The rate `2^{n+6} e^{-s^{1/5}} s^3 + 2^{n+2}/s log(2^{n+2} s) + log(s^2)/(8 s^2)`
/// with `s = sqrt(n) sigma`, without any hypothesis check.
pub fn theorem1_rate_value(n: u32, sigma: f64) -> f64 {
    let nf = n as f64;
    let s = nf.sqrt() * sigma;
    let two = 2f64;
    let first = two.powi(n as i32 + 6) * (-s.powf(0.2)).exp() * s.powi(3);
    let c = two.powi(n as i32 + 2);
    let second = c / s * (c * s).ln();
    let third = (nf * sigma * sigma).ln() / (8.0 * nf * sigma * sigma);
    first + second + third
}

/// Hypothesis of the entropy-gap bound: `sigma > max(2^{n+2}, 3^7)/sqrt(n)`.
pub fn theorem1_precondition(n: u32, sigma: f64) -> bool {
    let rn = (n as f64).sqrt();
    sigma > (2f64.powi(n as i32 + 2) / rn).max(THREE_TO_SEVEN / rn)
}

pub fn theorem1_rate(n: u32, sigma: f64) -> Result<BoundEvaluation> {
    if n < 1 || !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("needs n >= 1 and sigma > 0, got n={n}, sigma={sigma}")));
    }
    let met = theorem1_precondition(n, sigma);
    let mut ev = BoundEvaluation::new("theorem1_rate", &[("n", n as f64), ("sigma", sigma)], met);
    if met {
        ev.value = Some(theorem1_rate_value(n, sigma));
    }
    Ok(ev)
}

/// `log(2/eps) + log log(2/eps) + n + 27`. The evaluation is flagged when
/// `log(2/eps) <= 1`, where the double logarithm is no longer positive.
pub fn corollary_threshold(n: u32, epsilon: f64) -> Result<BoundEvaluation> {
    if !(epsilon > 0.0 && epsilon < 1.0) || n < 1 {
        return Err(Error::invalid(format!("needs n >= 1 and epsilon in (0,1), got {epsilon}")));
    }
    let l = (2.0 / epsilon).ln();
    let mut ev = BoundEvaluation::new("corollary_threshold", &[("n", n as f64), ("epsilon", epsilon)], true);
    ev.value = Some(l + l.ln() + n as f64 + 27.0);
    if l <= 1.0 {
        ev.flag = Some(format!("log(2/epsilon) = {l} <= 1"));
    }
    Ok(ev)
}

/// `1/(4 sigma) <= pmax <= 1/sigma`, stated for `sigma >= 1`.
pub fn bobkov_interval(sigma: f64) -> BoundEvaluation {
    let met = sigma >= 1.0;
    let mut ev = BoundEvaluation::new("bobkov_interval", &[("sigma", sigma)], met);
    if met {
        ev.window = Some((1.0 / (4.0 * sigma), 1.0 / sigma));
    }
    ev
}

/// Open window `mu -+ (sigma^{3/2+delta} + 1)` for the last mode, stated for
/// `sigma > 4^{1/(2 delta)}`.
pub fn prop2_window(mu: f64, sigma: f64, delta: f64) -> Result<BoundEvaluation> {
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    let met = sigma > 4f64.powf(1.0 / (2.0 * delta));
    let mut ev = BoundEvaluation::new("prop2_window", &[("mu", mu), ("sigma", sigma), ("delta", delta)], met);
    if met {
        let half = sigma.powf(1.5 + delta) + 1.0;
        ev.window = Some((mu - half, mu + half));
    }
    Ok(ev)
}

/// `theta = 1 - sigma^{-(2 - eps)}`.
pub fn lemma3_theta(sigma: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 0.5) || !(sigma > 1.0) {
        return Err(Error::invalid(format!(
            "needs 0 < epsilon < 1/2 and sigma > 1, got epsilon={epsilon}, sigma={sigma}"
        )));
    }
    Ok(-(-(2.0 - epsilon) * sigma.ln()).exp_m1())
}

/// `max(3^{1/eps}, (12 e^3)^{1/(1 - 2 eps)})`: sigma at or above this
/// guarantees a ratio-decay witness exists.
pub fn lemma3_sigma_threshold(epsilon: f64) -> f64 {
    let a = 3f64.powf(1.0 / epsilon);
    let b = (12.0 * 3f64.exp()).powf(1.0 / (1.0 - 2.0 * epsilon));
    a.max(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Right,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchStatus {
    Found,
    NotFound,
    /// The window reaches beyond the stored support and no closed form is
    /// available; nothing was found in the part that could be searched.
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct N0Search {
    pub side: Side,
    #[serde(serialize_with = "ser_f64")]
    pub epsilon: f64,
    #[serde(serialize_with = "ser_f64")]
    pub sigma: f64,
    #[serde(serialize_with = "ser_f64")]
    pub theta: f64,
    pub nmax: i64,
    /// Inclusive search window.
    pub window: (i64, i64),
    pub status: SearchStatus,
    pub witness: Option<i64>,
    /// `ln` of the outward ratio at the witness.
    #[serde(serialize_with = "ser_opt_f64")]
    pub witness_log_ratio: Option<f64>,
    pub closed_form: bool,
    pub threshold_met: bool,
    pub spot_checks: usize,
    pub spot_checks_passed: bool,
}

/// Outward log-ratio at `k`: `ln p(k+1)/p(k)` on the right,
/// `ln p(k-1)/p(k)` on the left. `None` when not determinable.
fn outward_log_ratio(p: &IntegerPmf, side: Side, k: i64) -> Option<f64> {
    if let Some(spec) = p.family_spec() {
        let lr = match side {
            Side::Right => spec.log_ratio(k),
            Side::Left => {
                let (lo, _) = spec.support();
                if lo.map_or(false, |lo| k <= lo) {
                    f64::NEG_INFINITY
                } else {
                    -spec.log_ratio(k - 1)
                }
            }
        };
        return if lr.is_nan() { None } else { Some(lr) };
    }
    let next = match side {
        Side::Right => k + 1,
        Side::Left => k - 1,
    };
    let inside = |j: i64| j >= p.offset() && j <= p.last();
    if !inside(k) {
        return None;
    }
    let lw = |j: i64| p.log_weights()[(j - p.offset()) as usize];
    if inside(next) {
        return Some(lw(next) - lw(k));
    }
    let cert = match side {
        Side::Right => p.right_tail(),
        Side::Left => p.left_tail(),
    };
    if cert.ratio == 0.0 {
        Some(f64::NEG_INFINITY)
    } else {
        None
    }
}

/// Searches `{nmax, ..., nmax + 2 ceil(sigma^2)}` (right) or the mirror
/// image (left) for the first point from which every outward ratio is at
/// most `theta = 1 - sigma^{-(2-eps)}`.
pub fn find_n0(p: &IntegerPmf, epsilon: f64, side: Side) -> Result<N0Search> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    let st = stats(p)?;
    if !(st.sigma > 1.0) {
        return Err(Error::precondition(format!("needs sigma > 1, got {}", st.sigma)));
    }
    if !(p.known_log_concave() || is_log_concave(p, 1e-9).log_concave) {
        return Err(Error::precondition("pmf is not log-concave"));
    }
    let theta = lemma3_theta(st.sigma, epsilon)?;
    let log_theta = theta.ln();
    // Never under-search: widen when the certified variance straddles an
    // integer.
    let c = (st.variance + st.variance_error).ceil().max(st.variance.ceil()) as i64;
    let width = 2 * c;
    let nmax = st.nmax;
    let window = match side {
        Side::Right => (nmax, nmax + width),
        Side::Left => (nmax - width, nmax),
    };
    let closed_form = p.family_spec().is_some();
    let holds = |k: i64| outward_log_ratio(p, side, k).map(|lr| lr <= log_theta);

    // Position t in 0..=width maps to k = nmax +- t; `holds` is monotone in t.
    let at = |t: i64| match side {
        Side::Right => nmax + t,
        Side::Left => nmax - t,
    };
    let mut status = SearchStatus::NotFound;
    let mut witness = None;
    if closed_form {
        let (mut lo, mut hi) = (0i64, width);
        if holds(at(hi)) == Some(true) {
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if holds(at(mid)) == Some(true) {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            witness = Some(at(lo));
            status = SearchStatus::Found;
        }
    } else {
        for t in 0..=width {
            match holds(at(t)) {
                Some(true) => {
                    witness = Some(at(t));
                    status = SearchStatus::Found;
                    break;
                }
                Some(false) => {}
                None => {
                    status = SearchStatus::Partial;
                    break;
                }
            }
        }
    }

    let mut spot_checks = 0;
    let mut spot_ok = true;
    if let Some(w) = witness {
        let (from, to) = match side {
            Side::Right => (w, window.1),
            Side::Left => (window.0, w),
        };
        let steps = 100i64;
        for i in 0..steps {
            let k = from + ((to - from) as i128 * i as i128 / (steps - 1) as i128) as i64;
            if let Some(ok) = holds(k) {
                spot_checks += 1;
                spot_ok &= ok;
            }
        }
    }

    Ok(N0Search {
        side,
        epsilon,
        sigma: st.sigma,
        theta,
        nmax,
        window,
        status,
        witness,
        witness_log_ratio: witness.and_then(|k| outward_log_ratio(p, side, k)),
        closed_form,
        threshold_met: st.sigma >= lemma3_sigma_threshold(epsilon),
        spot_checks,
        spot_checks_passed: spot_ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AppendixEstimate {
    pub lhs: f64,
    pub rhs: f64,
}

fn g_fn(x: f64, m: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        -x * x.ln() - x * m.ln()
    }
}

/// `|G(b) - G(a)|` against `(2 mu / M) log(1/mu) + |b - a| (log(1/mu) + log(e D))`
/// with `G(x) = -x log x - x log M`.
pub fn appendix_estimate(a: f64, b: f64, mu: f64, d: f64, m: f64) -> Result<AppendixEstimate> {
    if !(d >= 1.0 && m >= 1.0 && d.is_finite() && m.is_finite()) {
        return Err(Error::invalid(format!("needs D, M >= 1, got D={d}, M={m}")));
    }
    let cap = d / m;
    if !(a >= 0.0 && a <= cap && b >= 0.0 && b <= cap) {
        return Err(Error::invalid(format!("needs 0 <= a, b <= D/M = {cap}, got a={a}, b={b}")));
    }
    if !(mu > 0.0 && mu < (-1.0f64).exp()) {
        return Err(Error::invalid(format!("needs 0 < mu < 1/e, got {mu}")));
    }
    let lhs = (g_fn(b, m) - g_fn(a, m)).abs();
    let inv = -mu.ln();
    let rhs = 2.0 * mu / m * inv + (b - a).abs() * (inv + 1.0 + d.ln());
    Ok(AppendixEstimate { lhs, rhs })
}

/// `2^{n+4} e^{-s^{1/5}} s^3` with `s = sqrt(n) sigma`, unchecked.
pub fn tail_bound_raw(n: u32, sigma: f64) -> f64 {
    let s = (n as f64).sqrt() * sigma;
    2f64.powi(n as i32 + 4) * (-s.powf(0.2)).exp() * s.powi(3)
}

/// Tail bound, stated for `sqrt(n) sigma > 3^7`.
pub fn tail_bound_value(n: u32, sigma: f64) -> BoundEvaluation {
    let met = (n as f64).sqrt() * sigma > THREE_TO_SEVEN;
    let mut ev = BoundEvaluation::new("tail_bound_value", &[("n", n as f64), ("sigma", sigma)], met);
    if met {
        ev.value = Some(tail_bound_raw(n, sigma));
    }
    ev
}

/// Maximum differential entropy for variance `sigma^2 + 1/12`.
pub fn maxent_bound(sigma: f64) -> f64 {
    0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * (sigma * sigma + 1.0 / 12.0)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::from_family;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn theorem1_examples() {
        assert!(!theorem1_rate(1, 1024.0).unwrap().precondition_met);
        let v = theorem1_rate(1, 1e4).unwrap().value.unwrap();
        assert!(close(v, 232807538708.13158, 1e-12), "{v}");
        assert!(theorem1_precondition(4, 1094.0));
        assert!(!theorem1_precondition(4, 1093.5));
    }

    #[test]
    fn corollary_examples() {
        let v = corollary_threshold(1, 0.1).unwrap();
        assert!(close(v.value.unwrap(), 32.092920973918940, 1e-14));
        assert!(v.flag.is_none());
        let w = corollary_threshold(3, 0.1).unwrap();
        assert!((w.value.unwrap() - v.value.unwrap() - 2.0).abs() < 1e-13);
        let e = corollary_threshold(1, 2.0 / 1f64.exp()).unwrap();
        assert!((e.value.unwrap() - 29.0).abs() < 1e-12);
        assert!(corollary_threshold(1, 0.8).unwrap().flag.is_some());
    }

    #[test]
    fn bobkov_examples() {
        assert_eq!(bobkov_interval(1.0).window, Some((0.25, 1.0)));
        let (lo, hi) = bobkov_interval(90f64.sqrt()).window.unwrap();
        assert!(close(lo, 0.026352313834736494, 1e-14) && close(hi, 0.10540925533894598, 1e-14));
        assert!(!bobkov_interval(0.5).precondition_met);
    }

    #[test]
    fn prop2_examples() {
        let w = prop2_window(100.0, 10.0, 0.5).unwrap();
        assert!(w.precondition_met);
        assert_eq!(w.window, Some((-1.0, 201.0)));
        assert!(!prop2_window(0.0, 10.0, 0.25).unwrap().precondition_met);
        assert_eq!(prop2_window(0.0, 100.0, 0.5).unwrap().window, Some((-10001.0, 10001.0)));
    }

    #[test]
    fn lemma3_examples() {
        assert!(close(lemma3_theta(10.0, 0.2).unwrap(), 0.98415106807538887, 1e-15));
        assert!(close(lemma3_sigma_threshold(0.2), 9334.8602281304016, 1e-13));
        assert!(lemma3_theta(1.0, 0.2).is_err());
        assert!(lemma3_theta(1.0 + 1e-9, 0.2).unwrap() > 0.0);
    }

    #[test]
    fn n0_geometric_is_mode() {
        let p = from_family("geometric", &[0.01], 1e-15).unwrap();
        let r = find_n0(&p, 0.2, Side::Right).unwrap();
        assert_eq!(r.status, SearchStatus::Found);
        assert_eq!(r.witness, Some(0));
        assert!(close(r.theta, 0.99974652897278007, 1e-13));
        assert!(r.spot_checks_passed && r.spot_checks == 100);
    }

    #[test]
    fn n0_poisson_hundred() {
        let p = from_family("poisson", &[100.0], 1e-15).unwrap();
        let r = find_n0(&p, 0.2, Side::Right).unwrap();
        // lambda / theta = 101.61, so the first k with lambda/(k+1) <= theta is 101
        assert_eq!(r.witness, Some(101));
        let l = find_n0(&p, 0.2, Side::Left).unwrap();
        assert_eq!(l.status, SearchStatus::Found);
        let k = l.witness.unwrap();
        // p(k-1)/p(k) = k / lambda
        assert!((k as f64) / 100.0 <= l.theta && (k as f64 + 1.0) / 100.0 > l.theta);
    }

    #[test]
    fn n0_stored_search_agrees_with_closed_form() {
        let fam = from_family("negbinomial", &[3.0, 0.05], 1e-15).unwrap();
        let custom = IntegerPmf::from_weights(fam.offset(), fam.weights().to_vec(), fam.tail_mass_bound()).unwrap();
        for side in [Side::Right, Side::Left] {
            let a = find_n0(&fam, 0.2, side).unwrap();
            let b = find_n0(&custom, 0.2, side).unwrap();
            assert_eq!(a.witness, b.witness, "{side:?}");
            assert!(!b.closed_form);
        }
    }

    #[test]
    fn n0_point_mass_is_precondition_failure() {
        let p = from_family("point", &[3.0], 1e-15).unwrap();
        assert!(matches!(find_n0(&p, 0.2, Side::Right), Err(Error::Precondition(_))));
    }

    #[test]
    fn appendix_examples() {
        let e = appendix_estimate(0.0, 0.05, 0.1, 1.0, 1.0).unwrap();
        assert!(close(e.lhs, 0.14978661367769955, 1e-14));
        assert!(close(e.rhs, 0.62564627324851142, 1e-14));
        let same = appendix_estimate(0.3, 0.3, 0.2, 2.0, 1.5).unwrap();
        assert_eq!(same.lhs, 0.0);
        assert!(same.rhs >= 0.0);
        assert!(appendix_estimate(0.0, 0.05, 0.5, 1.0, 1.0).is_err());
        assert!(appendix_estimate(0.0, 2.0, 0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn tail_examples() {
        let v = tail_bound_value(1, 2200.0).value.unwrap();
        assert!(close(v, 3222152685.9232032, 1e-12));
        assert!(!tail_bound_value(1, 2000.0).precondition_met);
    }

    #[test]
    fn tail_bound_grows_through_desk_range() {
        // d/ds log(s^3 e^{-s^{1/5}}) = (3 - s^{1/5}/5)/s > 0 until s = 15^5
        let mut prev = 0.0;
        for s in [2200.0, 3000.0, 4000.0, 1e5, 7.5e5] {
            let v = tail_bound_raw(1, s);
            assert!(v > prev);
            prev = v;
        }
        assert!(tail_bound_raw(1, 8e5) < tail_bound_raw(1, 7.6e5));
    }
}
