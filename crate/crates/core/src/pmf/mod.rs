//! Integer-supported pmfs stored on a finite window with certified tails.

mod family;
mod json;
mod random;
mod stats;

use std::ops::RangeInclusive;

pub use family::{from_family, Family, FamilySpec, DEFAULT_MAX_WINDOW, NEGBIN_SIGMA_SHAPE};
pub use json::PmfDocument;
pub use random::{random_log_concave, random_pmf};
pub use stats::{stats, DistStats};

use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

/// Tolerance on the normalisation invariant of imported pmfs.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Geometric envelope for the mass outside one side of the window.
///
/// `ratio` bounds every outward one-step ratio past the window edge:
/// `p(edge ± j) <= p(edge) * ratio^j`. A ratio of exactly 0 means the true
/// pmf has no mass past the edge; `NaN` means no envelope is known.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TailCert {
    pub mass: f64,
    pub ratio: f64,
}

impl TailCert {
    pub const FINITE: TailCert = TailCert { mass: 0.0, ratio: 0.0 };

    pub fn unknown(mass: f64) -> Self {
        Self { mass, ratio: f64::NAN }
    }

    pub fn is_finite_side(&self) -> bool {
        self.ratio == 0.0 && self.mass == 0.0
    }

    pub fn has_envelope(&self) -> bool {
        self.ratio >= 0.0 && self.ratio < 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Family(FamilySpec),
    Custom,
    Derived(String),
}

impl Provenance {
    pub fn label(&self) -> String {
        match self {
            Provenance::Family(spec) => spec.label(),
            Provenance::Custom => "custom".to_string(),
            Provenance::Derived(s) => s.clone(),
        }
    }
}

/// A pmf on the integers: `weights[i]` is the probability of `offset + i`.
///
/// The stored weights may fall short of 1 by at most `tail_mass_bound`, the
/// certified mass outside the window plus any unlocalised deficit (`carry`)
/// inherited from operands. Entry `i` is within `abs_error + rel_error * w_i`
/// of the true probability (after accounting for the tail deficit).
#[derive(Debug, Clone)]
pub struct IntegerPmf {
    pub(crate) offset: i64,
    pub(crate) weights: Vec<f64>,
    pub(crate) log_weights: Vec<f64>,
    pub(crate) left_tail: TailCert,
    pub(crate) right_tail: TailCert,
    pub(crate) carry: f64,
    pub(crate) abs_error: f64,
    pub(crate) rel_error: f64,
    pub(crate) known_log_concave: bool,
    pub(crate) provenance: Provenance,
}

impl IntegerPmf {
    /// Build a pmf from explicit weights.
    ///
    /// `tail_mass_bound` is the mass the caller asserts lies outside the
    /// window. When it is positive and the stored weights are log-concave,
    /// the tails are assumed to continue log-concavely and geometric
    /// envelopes are taken from the outermost stored ratios.
    pub fn from_weights(offset: i64, weights: Vec<f64>, tail_mass_bound: f64) -> Result<Self> {
        Self::from_weights_with(offset, weights, tail_mass_bound, Provenance::Custom)
    }

    pub fn from_weights_with(
        offset: i64,
        weights: Vec<f64>,
        tail_mass_bound: f64,
        provenance: Provenance,
    ) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidPmf("empty weight vector".into()));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidPmf(format!("weight {i} is {w}; weights must be finite and >= 0")));
        }
        if !(tail_mass_bound.is_finite() && (0.0..1.0).contains(&tail_mass_bound)) {
            return Err(Error::InvalidPmf(format!("tail mass bound {tail_mass_bound} not in [0,1)")));
        }
        let total: f64 = weights.iter().copied().collect::<NeumaierSum>().value();
        if total > 1.0 + NORMALIZATION_TOL {
            return Err(Error::InvalidPmf(format!("weights sum to {total} > 1")));
        }
        if total + tail_mass_bound < 1.0 - NORMALIZATION_TOL {
            return Err(Error::InvalidPmf(format!(
                "weights sum to {total}; with tail bound {tail_mass_bound} this leaves mass unaccounted for"
            )));
        }
        if offset.checked_add(weights.len() as i64).is_none() {
            return Err(Error::InvalidPmf("window overflows i64".into()));
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        let (left_tail, right_tail) = if tail_mass_bound == 0.0 {
            (TailCert::FINITE, TailCert::FINITE)
        } else {
            (inferred_envelope(&weights, false), inferred_envelope(&weights, true))
        };
        let mut pmf = Self {
            offset,
            weights,
            log_weights,
            left_tail,
            right_tail,
            carry: tail_mass_bound,
            abs_error: 0.0,
            rel_error: 0.0,
            known_log_concave: false,
            provenance,
        };
        // Edge ratios only bound the tail of a log-concave sequence.
        if tail_mass_bound > 0.0 && !is_log_concave(&pmf, 0.0).log_concave {
            pmf.left_tail = TailCert::unknown(0.0);
            pmf.right_tail = TailCert::unknown(0.0);
        }
        Ok(pmf)
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Last integer of the window.
    pub fn last(&self) -> i64 {
        self.offset + self.weights.len() as i64 - 1
    }

    pub fn support_range(&self) -> RangeInclusive<i64> {
        self.offset..=self.last()
    }

    /// Stored probability of `k` (0 outside the window).
    pub fn weight(&self, k: i64) -> f64 {
        if k < self.offset || k > self.last() {
            0.0
        } else {
            self.weights[(k - self.offset) as usize]
        }
    }

    pub fn left_tail(&self) -> TailCert {
        self.left_tail
    }

    pub fn right_tail(&self) -> TailCert {
        self.right_tail
    }

    /// Deficit inherited from operand tails that is not attributed to a side.
    pub fn carry(&self) -> f64 {
        self.carry
    }

    pub fn tail_mass_bound(&self) -> f64 {
        self.left_tail.mass + self.right_tail.mass + self.carry
    }

    pub fn abs_error(&self) -> f64 {
        self.abs_error
    }

    pub fn rel_error(&self) -> f64 {
        self.rel_error
    }

    /// Error bound for a stored weight `w`.
    pub fn entry_error(&self, w: f64) -> f64 {
        self.abs_error + self.rel_error * w
    }

    /// Largest entry error over the window.
    pub fn max_entry_error(&self) -> f64 {
        self.entry_error(self.pmax())
    }

    /// True when log-concavity holds by construction (family members and
    /// convolutions of such).
    pub fn known_log_concave(&self) -> bool {
        self.known_log_concave
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn label(&self) -> String {
        self.provenance.label()
    }

    pub fn family_spec(&self) -> Option<&FamilySpec> {
        match &self.provenance {
            Provenance::Family(spec) => Some(spec),
            _ => None,
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// The same pmf translated by `delta`.
    pub fn shifted(&self, delta: i64) -> Self {
        let mut out = self.clone();
        out.offset += delta;
        if delta != 0 {
            out.provenance = Provenance::Derived(format!("{} shifted by {delta}", self.label()));
        }
        out
    }

    pub fn stored_mass(&self) -> f64 {
        self.weights.iter().copied().collect::<NeumaierSum>().value()
    }

    pub fn pmax(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Last index attaining the stored maximum.
    pub fn nmax(&self) -> i64 {
        let pmax = self.pmax();
        let i = self.weights.iter().rposition(|&w| w == pmax).unwrap_or(0);
        self.offset + i as i64
    }

    /// Upper bound on the true probability at the left (`right = false`) or
    /// right window edge.
    pub(crate) fn edge_upper(&self, right: bool) -> f64 {
        let w = if right { *self.weights.last().unwrap() } else { self.weights[0] };
        w / (1.0 - self.tail_mass_bound()) + self.entry_error(w)
    }
}

/// Envelope implied by the two outermost stored weights on one side, valid
/// when the underlying pmf is log-concave.
fn inferred_envelope(weights: &[f64], right: bool) -> TailCert {
    let n = weights.len();
    if n < 2 {
        return TailCert::unknown(0.0);
    }
    let (edge, inner) = if right { (weights[n - 1], weights[n - 2]) } else { (weights[0], weights[1]) };
    if inner > 0.0 && edge < inner {
        let r = edge / inner;
        TailCert { mass: 0.0, ratio: r }
    } else {
        TailCert::unknown(0.0)
    }
}

/// Outcome of a log-concavity test.
#[derive(Debug, Clone, PartialEq)]
pub struct LogConcavity {
    pub log_concave: bool,
    /// Smallest integer at which the test fails.
    pub first_violation: Option<i64>,
    /// Minimum over interior points of `2 ln p(k) - ln p(k-1) - ln p(k+1)`,
    /// evaluated with the entry error bounds in favour of concavity, so a
    /// negative value certifies a violation of the true pmf.
    pub min_slack: f64,
    pub min_slack_at: Option<i64>,
}

/// Tests `p(k)^2 >= (1 - rel_tol) p(k-1) p(k+1)` on the stored window together
/// with contiguity of the support. Entry errors (`abs_error`) are taken into
/// account, so a reported violation is a violation of the true pmf.
pub fn is_log_concave(p: &IntegerPmf, rel_tol: f64) -> LogConcavity {
    let w = &p.weights;
    let exact = p.abs_error == 0.0 && p.rel_error == 0.0;
    let n = w.len();
    let threshold = (-rel_tol).ln_1p();
    let lower: Vec<f64> = w.iter().map(|&x| (x - p.entry_error(x)).max(0.0)).collect();
    let upper = |x: f64| x + p.entry_error(x);

    let mut first_violation: Option<usize> = None;
    // Unimodality / contiguity: an interior point cannot sit below both of
    // its flanks in a log-concave sequence.
    let mut suffix = vec![0.0f64; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1].max(lower[i]);
    }
    let mut prefix = 0.0f64;
    for i in 0..n {
        let flank = prefix.min(suffix[i + 1]);
        if upper(w[i]) < flank && flank > 0.0 {
            first_violation = Some(i);
            break;
        }
        prefix = prefix.max(lower[i]);
    }

    let mut min_slack = f64::INFINITY;
    let mut min_slack_at = None;
    for i in 1..n.saturating_sub(1) {
        let (a, c) = (lower[i - 1], lower[i + 1]);
        if a <= 0.0 || c <= 0.0 {
            continue;
        }
        let slack = if exact {
            2.0 * p.log_weights[i] - p.log_weights[i - 1] - p.log_weights[i + 1]
        } else {
            2.0 * upper(w[i]).ln() - a.ln() - c.ln()
        };
        if slack < min_slack {
            min_slack = slack;
            min_slack_at = Some(p.offset + i as i64);
        }
        if slack < threshold && first_violation.map_or(true, |f| i < f) {
            first_violation = Some(i);
        }
    }
    LogConcavity {
        log_concave: first_violation.is_none(),
        first_violation: first_violation.map(|i| p.offset + i as i64),
        min_slack,
        min_slack_at,
    }
}

/// Total-variation distance between `X` and `X + 1`, i.e. half the sum of
/// `|p(k) - p(k-1)|` over the window boundary included.
pub fn tv_shift_distance(p: &IntegerPmf) -> f64 {
    let w = &p.weights;
    let mut s = NeumaierSum::new();
    let mut prev = 0.0;
    for &x in w.iter().chain(std::iter::once(&0.0)) {
        s.add((x - prev).abs());
        prev = x;
    }
    0.5 * s.value()
}

/// `P(a < X < b)` over the stored window. Empty when `a >= b`.
pub fn interval_probability(p: &IntegerPmf, a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() || a >= b {
        return 0.0;
    }
    let lo = if a == f64::NEG_INFINITY { p.offset } else { ((a.floor() + 1.0).max(p.offset as f64)) as i64 };
    let hi = if b == f64::INFINITY { p.last() } else { ((b.ceil() - 1.0).min(p.last() as f64)) as i64 };
    if lo > hi {
        return 0.0;
    }
    p.weights[(lo - p.offset) as usize..=(hi - p.offset) as usize]
        .iter()
        .copied()
        .collect::<NeumaierSum>()
        .value()
}

/// `x ln(1/x)`, extended by 0 at 0.
pub(crate) fn xlogx_neg(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

/// Upper bound on `sum_{j >= j0} F(p_edge r^j)` where `F(x) = -x ln x`.
pub(crate) fn geometric_entropy_tail(p_edge: f64, r: f64, j0: u64) -> f64 {
    if p_edge <= 0.0 || r == 0.0 {
        return 0.0;
    }
    if !(r >= 0.0 && r < 1.0) || !p_edge.is_finite() {
        return f64::INFINITY;
    }
    let inv_e = (-1.0f64).exp();
    let mut total = 0.0;
    let mut j = j0;
    // F is increasing only on [0, 1/e]; bound leading terms by max F.
    while p_edge * r.powf(j as f64) > inv_e {
        total += inv_e;
        j += 1;
        if j > j0 + 10_000 {
            return f64::INFINITY;
        }
    }
    let rj = r.powf(j as f64);
    let jf = j as f64;
    let one_minus = 1.0 - r;
    let geo = p_edge * rj / one_minus;
    let lin = p_edge * (-r.ln()) * rj * (jf * one_minus + r) / (one_minus * one_minus);
    total + geo * (-p_edge.ln()).max(0.0) + lin
}

/// Bound on `|F(x') - F(x)|` over all `x'` with `|x' - x| <= e`, `x' >= 0`,
/// uniformly for `x` in `[lo, hi]`.
pub(crate) fn entropy_perturbation(lo: f64, hi: f64, e: f64) -> f64 {
    if e <= 0.0 {
        return 0.0;
    }
    // F'(x) = -ln x - 1 is largest in magnitude at the ends of the range.
    let deriv_hi = ((hi + e).ln() + 1.0).abs();
    if lo > 2.0 * e {
        let deriv_lo = ((lo - e).ln() + 1.0).abs();
        e * deriv_lo.max(deriv_hi)
    } else {
        let near_zero = if 3.0 * e <= (-1.0f64).exp() { xlogx_neg(3.0 * e) } else { (-1.0f64).exp() };
        near_zero.max(e * ((e.ln()).abs() + 1.0)).max(e * deriv_hi)
    }
}

/// Entropy envelope bound for the tail past one window edge, starting `j0`
/// steps beyond the edge.
pub(crate) fn side_entropy_tail(p: &IntegerPmf, right: bool, j0: u64) -> f64 {
    let cert = if right { p.right_tail } else { p.left_tail };
    if cert.ratio == 0.0 {
        return 0.0;
    }
    if !cert.has_envelope() {
        return f64::INFINITY;
    }
    geometric_entropy_tail(p.edge_upper(right), cert.ratio, j0)
}

/// Upper bound on `sum_{|k| >= threshold} p(k) ln(1/p(k))`, combining stored
/// entries (with their error bars) and geometric envelopes past the window.
/// Returns `inf` when a tail without an envelope may contribute.
pub fn entropy_tail(p: &IntegerPmf, threshold: f64) -> f64 {
    let mut s = NeumaierSum::new();
    for (i, &w) in p.weights.iter().enumerate() {
        let k = p.offset + i as i64;
        if (k as f64).abs() >= threshold {
            s.add(xlogx_neg(w));
            s.add(entropy_perturbation(w, w, p.entry_error(w)));
        }
    }
    let last = p.last();
    let first = p.offset;
    let j0_right = if (last + 1) as f64 >= threshold || (last + 1) as f64 <= -threshold {
        1
    } else {
        (threshold.ceil() as i64 - last).max(1) as u64
    };
    let j0_left = if (first - 1) as f64 <= -threshold || (first - 1) as f64 >= threshold {
        1
    } else {
        (first + threshold.ceil() as i64).max(1) as u64
    };
    s.add(side_entropy_tail(p, true, j0_right));
    s.add(side_entropy_tail(p, false, j0_left));
    s.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_violation_at_one() {
        let p = IntegerPmf::from_weights(0, vec![0.4, 0.1, 0.4, 0.1], 0.0).unwrap();
        let lc = is_log_concave(&p, 0.0);
        assert!(!lc.log_concave);
        assert_eq!(lc.first_violation, Some(1));
    }

    #[test]
    fn gap_in_support_is_a_violation() {
        let p = IntegerPmf::from_weights(0, vec![0.5, 0.0, 0.0, 0.5], 0.0).unwrap();
        assert_eq!(is_log_concave(&p, 0.0).first_violation, Some(1));
        let q = IntegerPmf::from_weights(3, vec![0.0, 0.5, 0.5, 0.0], 0.0).unwrap();
        assert!(is_log_concave(&q, 0.0).log_concave);
    }

    #[test]
    fn families_are_log_concave() {
        for (name, params) in [
            ("poisson", vec![37.5]),
            ("binomial", vec![40.0, 0.3]),
            ("negbinomial", vec![3.5, 0.1]),
            ("geometric", vec![0.02]),
            ("twosided-geometric", vec![0.9]),
            ("uniform", vec![17.0]),
        ] {
            let p = from_family(name, &params, 1e-15).unwrap();
            assert!(is_log_concave(&p, 1e-12).log_concave, "{name}");
        }
    }

    #[test]
    fn uniform_tv_shift() {
        for m in [1usize, 2, 7, 1000] {
            let p = from_family("uniform", &[m as f64], 1e-15).unwrap();
            assert!((tv_shift_distance(&p) - 1.0 / m as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn interval_probability_geometric() {
        let p = from_family("geometric", &[0.5], 1e-16).unwrap();
        assert!((interval_probability(&p, -0.5, 3.5) - 0.9375).abs() < 1e-15);
        assert_eq!(interval_probability(&p, 3.0, 3.0), 0.0);
        assert!((interval_probability(&p, f64::NEG_INFINITY, f64::INFINITY) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn entropy_tail_geometric_half() {
        let p = from_family("geometric", &[0.5], 1e-16).unwrap();
        let exact = 12.0 * 2f64.powi(-10) * 2f64.ln();
        let got = entropy_tail(&p, 10.0);
        assert!(got >= exact * (1.0 - 1e-12));
        assert!((got - exact).abs() < 1e-12, "{got} vs {exact}");
    }

    #[test]
    fn import_validates_mass() {
        assert!(IntegerPmf::from_weights(0, vec![0.5, 0.6], 0.0).is_err());
        assert!(IntegerPmf::from_weights(0, vec![0.5, 0.4], 0.0).is_err());
        assert!(IntegerPmf::from_weights(0, vec![0.5, 0.4], 0.1).is_ok());
        assert!(IntegerPmf::from_weights(0, vec![0.5, f64::NAN], 0.1).is_err());
        assert!(IntegerPmf::from_weights(0, vec![], 0.0).is_err());
    }

    #[test]
    fn geometric_tail_bound_matches_series() {
        let (pe, r) = (0.01f64, 0.8f64);
        let exact: f64 = (3..2000).map(|j| xlogx_neg(pe * r.powi(j))).sum();
        let bound = geometric_entropy_tail(pe, r, 3);
        assert!((bound - exact).abs() < 1e-12 * exact.max(1.0));
    }
}
