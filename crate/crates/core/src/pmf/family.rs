//! Standard log-concave families on the integers.
//!
//! Every family is described by its one-step log-ratio `ln p(k+1)/p(k)`,
//! which is non-increasing in `k` for all members. Weights are generated by
//! walking outward from the mode and accumulating log-ratios, so no
//! normalising constant (and no `ln Γ` of a large argument) is ever needed.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{IntegerPmf, Provenance, TailCert};
use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

/// Largest window (in points) a family constructor will materialise.
pub const DEFAULT_MAX_WINDOW: usize = 20_000_000;

/// Shape parameter used when a negative binomial is parametrised by σ.
pub const NEGBIN_SIGMA_SHAPE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    PointMass,
    Bernoulli,
    Uniform,
    Geometric,
    Poisson,
    Binomial,
    NegativeBinomial,
    TwoSidedGeometric,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::PointMass,
        Family::Bernoulli,
        Family::Uniform,
        Family::Geometric,
        Family::Poisson,
        Family::Binomial,
        Family::NegativeBinomial,
        Family::TwoSidedGeometric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::PointMass => "point",
            Family::Bernoulli => "bernoulli",
            Family::Uniform => "uniform",
            Family::Geometric => "geometric",
            Family::Poisson => "poisson",
            Family::Binomial => "binomial",
            Family::NegativeBinomial => "negbinomial",
            Family::TwoSidedGeometric => "twosided-geometric",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        let lower = name.trim().to_ascii_lowercase();
        let family = match lower.as_str() {
            "point" | "point-mass" | "pointmass" | "delta" => Family::PointMass,
            "bernoulli" => Family::Bernoulli,
            "uniform" => Family::Uniform,
            "geometric" => Family::Geometric,
            "poisson" => Family::Poisson,
            "binomial" => Family::Binomial,
            "negbinomial" | "negative-binomial" | "negbin" => Family::NegativeBinomial,
            "twosided-geometric" | "two-sided-geometric" | "twosided" => {
                Family::TwoSidedGeometric
            }
            _ => return Err(Error::UnknownFamily(name.to_string())),
        };
        Ok(family)
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::PointMass => &["k"],
            Family::Bernoulli => &["p"],
            Family::Uniform => &["m"],
            Family::Geometric => &["p"],
            Family::Poisson => &["lambda"],
            Family::Binomial => &["N", "p"],
            Family::NegativeBinomial => &["r", "p"],
            Family::TwoSidedGeometric => &["a"],
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Family::PointMass => "point mass at integer k",
            Family::Bernoulli => "Bernoulli(p) on {0,1}",
            Family::Uniform => "uniform on {0,...,m-1}",
            Family::Geometric => "p(k) = p(1-p)^k, k >= 0",
            Family::Poisson => "Poisson(lambda)",
            Family::Binomial => "Binomial(N, p)",
            Family::NegativeBinomial => "C(k+r-1,k) p^r (1-p)^k, k >= 0, r >= 1",
            Family::TwoSidedGeometric => "p(k) proportional to a^|k|, k in Z",
        }
    }

    /// Whether [`FamilySpec::with_sigma`] can target a standard deviation.
    pub fn supports_sigma(self) -> bool {
        !matches!(self, Family::PointMass | Family::Bernoulli)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A validated family together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    family: Family,
    params: Vec<f64>,
}

fn is_integer(x: f64) -> bool {
    x.is_finite() && x.fract() == 0.0 && x.abs() < 9.0e15
}

fn open_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must lie in (0,1), got {x}")))
    }
}

impl FamilySpec {
    pub fn new(family: Family, params: Vec<f64>) -> Result<Self> {
        let expected = family.param_names().len();
        if params.len() != expected {
            return Err(Error::invalid(format!(
                "{family} expects {expected} parameter(s) {:?}, got {}",
                family.param_names(),
                params.len()
            )));
        }
        match family {
            Family::PointMass => {
                if !is_integer(params[0]) {
                    return Err(Error::invalid("point mass location must be an integer"));
                }
            }
            Family::Bernoulli | Family::Geometric => open_unit("p", params[0])?,
            Family::Uniform => {
                if !is_integer(params[0]) || params[0] < 1.0 {
                    return Err(Error::invalid("uniform size m must be an integer >= 1"));
                }
            }
            Family::Poisson => {
                if !(params[0].is_finite() && params[0] > 0.0) {
                    return Err(Error::invalid("Poisson rate must be positive and finite"));
                }
            }
            Family::Binomial => {
                if !is_integer(params[0]) || params[0] < 1.0 {
                    return Err(Error::invalid("binomial N must be an integer >= 1"));
                }
                open_unit("p", params[1])?;
            }
            Family::NegativeBinomial => {
                if !(params[0].is_finite() && params[0] >= 1.0) {
                    return Err(Error::invalid(
                        "negative binomial shape r must be >= 1 (log-concave range)",
                    ));
                }
                open_unit("p", params[1])?;
            }
            Family::TwoSidedGeometric => open_unit("a", params[0])?,
        }
        Ok(Self { family, params })
    }

    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        Self::new(Family::from_name(name)?, params.to_vec())
    }

    /// Member of `family` whose standard deviation is (approximately, for
    /// integer-parametrised families) `sigma`.
    pub fn with_sigma(family: Family, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        let s2 = sigma * sigma;
        let params = match family {
            Family::PointMass | Family::Bernoulli => {
                return Err(Error::invalid(format!("{family} cannot be parametrised by sigma")))
            }
            Family::Uniform => vec![(12.0 * s2 + 1.0).sqrt().round().max(1.0)],
            Family::Geometric => vec![2.0 / (1.0 + (1.0 + 4.0 * s2).sqrt())],
            Family::Poisson => vec![s2],
            Family::Binomial => vec![(4.0 * s2).round().max(1.0), 0.5],
            Family::NegativeBinomial => {
                let r = NEGBIN_SIGMA_SHAPE;
                vec![r, 2.0 * r / (r + (r * r + 4.0 * s2 * r).sqrt())]
            }
            Family::TwoSidedGeometric => {
                let u = 4.0 / (2.0 + (4.0 + 8.0 * s2).sqrt());
                vec![1.0 - u]
            }
        };
        Self::new(family, params)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Inclusive support bounds; `None` marks an unbounded side.
    pub fn support(&self) -> (Option<i64>, Option<i64>) {
        let p = &self.params;
        match self.family {
            Family::PointMass => (Some(p[0] as i64), Some(p[0] as i64)),
            Family::Bernoulli => (Some(0), Some(1)),
            Family::Uniform => (Some(0), Some(p[0] as i64 - 1)),
            Family::Geometric | Family::Poisson | Family::NegativeBinomial => (Some(0), None),
            Family::Binomial => (Some(0), Some(p[0] as i64)),
            Family::TwoSidedGeometric => (None, None),
        }
    }

    fn in_support(&self, k: i64) -> bool {
        let (lo, hi) = self.support();
        lo.map_or(true, |lo| k >= lo) && hi.map_or(true, |hi| k <= hi)
    }

    /// `ln p(k+1)/p(k)` for `k` in the support; `-inf` when `k` is the last
    /// support point. Non-increasing in `k`.
    pub fn log_ratio(&self, k: i64) -> f64 {
        if !self.in_support(k) {
            return f64::NAN;
        }
        if !self.in_support(k + 1) {
            return f64::NEG_INFINITY;
        }
        let p = &self.params;
        let kf = k as f64;
        match self.family {
            Family::PointMass => f64::NEG_INFINITY,
            Family::Bernoulli => p[0].ln() - (-p[0]).ln_1p(),
            Family::Uniform => 0.0,
            Family::Geometric => (-p[0]).ln_1p(),
            Family::Poisson => ((p[0] - (kf + 1.0)) / (kf + 1.0)).ln_1p(),
            Family::Binomial => {
                // (N-k)p / ((k+1)(1-p)) - 1 = ((N+1)p - (k+1)) / ((k+1)(1-p))
                let (n, q) = (p[0], p[1]);
                (((n + 1.0) * q - (kf + 1.0)) / ((kf + 1.0) * (1.0 - q))).ln_1p()
            }
            Family::NegativeBinomial => {
                // (k+r)(1-p)/(k+1) - 1 = (r - 1 - p(k+r)) / (k+1)
                let (r, q) = (p[0], p[1]);
                ((r - 1.0 - q * (kf + r)) / (kf + 1.0)).ln_1p()
            }
            Family::TwoSidedGeometric => {
                if k >= 0 {
                    p[0].ln()
                } else {
                    -p[0].ln()
                }
            }
        }
    }

    /// Last maximiser of the pmf, consistent with [`Self::log_ratio`]: ties
    /// are exactly the zero log-ratios.
    pub fn mode(&self) -> i64 {
        let p = &self.params;
        let guess = match self.family {
            Family::PointMass => p[0] as i64,
            Family::Bernoulli => i64::from(p[0] >= 0.5),
            Family::Uniform => p[0] as i64 - 1,
            Family::Geometric | Family::TwoSidedGeometric => 0,
            Family::Poisson => p[0].floor() as i64,
            Family::Binomial => ((p[0] + 1.0) * p[1]).floor() as i64,
            Family::NegativeBinomial => ((p[0] - 1.0) * (1.0 - p[1]) / p[1]).floor() as i64,
        };
        let (lo, hi) = self.support();
        let mut m = guess;
        if let Some(lo) = lo {
            m = m.max(lo);
        }
        if let Some(hi) = hi {
            m = m.min(hi);
        }
        while hi.map_or(true, |hi| m < hi) && self.log_ratio(m) >= 0.0 {
            m += 1;
        }
        while lo.map_or(true, |lo| m > lo) && self.log_ratio(m - 1) < 0.0 {
            m -= 1;
        }
        m
    }

    pub fn mean(&self) -> f64 {
        let p = &self.params;
        match self.family {
            Family::PointMass => p[0],
            Family::Bernoulli => p[0],
            Family::Uniform => (p[0] - 1.0) / 2.0,
            Family::Geometric => (1.0 - p[0]) / p[0],
            Family::Poisson => p[0],
            Family::Binomial => p[0] * p[1],
            Family::NegativeBinomial => p[0] * (1.0 - p[1]) / p[1],
            Family::TwoSidedGeometric => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        let p = &self.params;
        match self.family {
            Family::PointMass => 0.0,
            Family::Bernoulli => p[0] * (1.0 - p[0]),
            Family::Uniform => (p[0] * p[0] - 1.0) / 12.0,
            Family::Geometric => (1.0 - p[0]) / (p[0] * p[0]),
            Family::Poisson => p[0],
            Family::Binomial => p[0] * p[1] * (1.0 - p[1]),
            Family::NegativeBinomial => p[0] * (1.0 - p[1]) / (p[1] * p[1]),
            Family::TwoSidedGeometric => 2.0 * p[0] / ((1.0 - p[0]) * (1.0 - p[0])),
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    pub fn build(&self, tail_tol: f64) -> Result<IntegerPmf> {
        build_family(self, tail_tol, DEFAULT_MAX_WINDOW)
    }

    pub fn build_with_cap(&self, tail_tol: f64, max_window: usize) -> Result<IntegerPmf> {
        build_family(self, tail_tol, max_window)
    }
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.family.name())?;
        for (i, (name, v)) in self.family.param_names().iter().zip(&self.params).enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{name}={v}")?;
        }
        f.write_str(")")
    }
}

/// Construct a family pmf by name; see [`FamilySpec`] for the parameter
/// conventions.
pub fn from_family(name: &str, params: &[f64], tail_tol: f64) -> Result<IntegerPmf> {
    FamilySpec::from_name(name, params)?.build(tail_tol)
}

/// Result of walking one side of the pmf away from the mode.
struct SideWalk {
    /// Log-weights (relative to the mode) at distance 1, 2, ... from the mode.
    logs: Vec<f64>,
    /// Unnormalised geometric bound on the mass beyond the last point.
    tail: f64,
    /// One-step outward ratio at the last point (0 for a finite side).
    ratio: f64,
}

fn walk_side(
    spec: &FamilySpec,
    mode: i64,
    step: i64,
    budget: f64,
    wsum: &mut NeumaierSum,
    other_len: usize,
    max_window: usize,
) -> Result<SideWalk> {
    let (lo, hi) = spec.support();
    let outward = |k: i64| -> f64 {
        if step > 0 {
            spec.log_ratio(k)
        } else if lo.map_or(false, |lo| k <= lo) {
            f64::NEG_INFINITY
        } else {
            -spec.log_ratio(k - 1)
        }
    };
    let _ = hi;
    let mut logs = Vec::new();
    let mut acc = NeumaierSum::new();
    let mut k = mode;
    let mut current = 0.0f64;
    loop {
        let lr = outward(k);
        if lr == f64::NEG_INFINITY {
            return Ok(SideWalk { logs, tail: 0.0, ratio: 0.0 });
        }
        if lr < 0.0 {
            // w_k r / (1 - r) with r = e^{lr}
            let tail = current.exp() / (-lr).exp_m1();
            if tail <= budget * wsum.value() {
                return Ok(SideWalk { logs, tail, ratio: lr.exp() });
            }
        }
        acc.add(lr);
        current = acc.value();
        logs.push(current);
        wsum.add(current.exp());
        k += step;
        let len = 1 + logs.len() + other_len;
        if len > max_window {
            return Err(Error::WindowCap { requested: len, cap: max_window });
        }
    }
}

fn build_family(spec: &FamilySpec, tail_tol: f64, max_window: usize) -> Result<IntegerPmf> {
    if !(tail_tol > 0.0 && tail_tol <= 1e-6) {
        return Err(Error::invalid(format!("tail_tol must lie in (0, 1e-6], got {tail_tol}")));
    }
    let (lo, hi) = spec.support();
    let both_infinite = lo.is_none() && hi.is_none();
    let budget = if both_infinite { tail_tol / 2.0 } else { tail_tol };
    let mode = spec.mode();

    let mut wsum = NeumaierSum::new();
    wsum.add(1.0);
    let right = walk_side(spec, mode, 1, budget, &mut wsum, 0, max_window)?;
    let left = walk_side(spec, mode, -1, budget, &mut wsum, right.logs.len(), max_window)?;

    let total = wsum.value();
    let tail_left = left.tail / total;
    let tail_right = right.tail / total;
    let tail = tail_left + tail_right;

    let shift = (-tail).ln_1p() - total.ln();
    let mut log_weights = Vec::with_capacity(1 + left.logs.len() + right.logs.len());
    log_weights.extend(left.logs.iter().rev().map(|l| l + shift));
    log_weights.push(shift);
    log_weights.extend(right.logs.iter().map(|l| l + shift));
    let weights: Vec<f64> = log_weights.iter().map(|l| l.exp()).collect();

    let max_abs_log = left
        .logs
        .iter()
        .chain(&right.logs)
        .fold(0.0f64, |m, l| m.max(l.abs()));
    // Log-ratios on one side share a sign, so their accumulated rounding is
    // proportional to |L|. Steps whose ratio is formed by a non-exact
    // subtraction add roughly one ulp each.
    let len = weights.len() as f64;
    let inexact_steps = match spec.family {
        Family::Poisson => len.min(spec.params[0]),
        Family::Binomial if spec.params[1] != 0.5 => len / (1.0 - spec.params[1]),
        _ => 0.0,
    };
    let rel_err = tail
        + 8.0 * f64::EPSILON * (1.0 + max_abs_log + total.ln().abs())
        + 4.0 * f64::EPSILON * inexact_steps;

    Ok(IntegerPmf {
        offset: mode - left.logs.len() as i64,
        weights,
        log_weights,
        left_tail: TailCert { mass: tail_left, ratio: left.ratio },
        right_tail: TailCert { mass: tail_right, ratio: right.ratio },
        carry: 0.0,
        abs_error: 0.0,
        rel_error: rel_err,
        known_log_concave: true,
        provenance: Provenance::Family(spec.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_half() {
        let p = from_family("bernoulli", &[0.5], 1e-15).unwrap();
        assert_eq!(p.offset(), 0);
        assert_eq!(p.weights(), &[0.5, 0.5]);
        assert_eq!(p.tail_mass_bound(), 0.0);
    }

    #[test]
    fn geometric_half_is_dyadic() {
        let p = from_family("geometric", &[0.5], 1e-18).unwrap();
        assert_eq!(p.offset(), 0);
        assert!((58..=62).contains(&p.len()), "window length {}", p.len());
        for (k, w) in p.weights().iter().enumerate() {
            let exact = 0.5f64.powi(k as i32 + 1);
            assert!((w - exact).abs() <= p.entry_error(*w), "k={k}");
            assert!((w - exact).abs() <= 1e-14 * exact, "k={k}");
        }
        assert!(p.tail_mass_bound() <= 1e-18);
    }

    #[test]
    fn poisson_integer_rate_ties_at_mode() {
        let spec = FamilySpec::from_name("poisson", &[100.0]).unwrap();
        assert_eq!(spec.mode(), 100);
        let p = spec.build(1e-15).unwrap();
        assert_eq!(p.weight(99), p.weight(100));
        assert!(p.weight(101) < p.weight(100));
    }

    #[test]
    fn modes_are_last_maximisers() {
        let cases: &[(&str, &[f64], i64)] = &[
            ("bernoulli", &[0.5], 1),
            ("bernoulli", &[0.3], 0),
            ("uniform", &[5.0], 4),
            ("binomial", &[3.0, 0.5], 2),
            ("binomial", &[4.0, 0.5], 2),
            ("negbinomial", &[3.0, 0.5], 2),
            ("twosided-geometric", &[0.4], 0),
            ("poisson", &[2.5], 2),
        ];
        for (name, params, mode) in cases {
            let spec = FamilySpec::from_name(name, params).unwrap();
            assert_eq!(spec.mode(), *mode, "{spec}");
        }
    }

    #[test]
    fn sigma_parametrisation_hits_target() {
        for family in [
            Family::Geometric,
            Family::Poisson,
            Family::NegativeBinomial,
            Family::TwoSidedGeometric,
        ] {
            for sigma in [1.5, 10.0, 333.0] {
                let spec = FamilySpec::with_sigma(family, sigma).unwrap();
                let v = spec.variance();
                assert!((v.sqrt() - sigma).abs() < 1e-9 * sigma, "{spec}: {}", v.sqrt());
            }
        }
        let b = FamilySpec::with_sigma(Family::Binomial, 10.0).unwrap();
        assert!((b.variance().sqrt() - 10.0).abs() < 0.01);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            FamilySpec::from_name("geometric", &[1.5]),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(FamilySpec::from_name("poisson", &[-1.0]), Err(Error::InvalidParameter(_))));
        assert!(matches!(FamilySpec::from_name("zeta", &[2.0]), Err(Error::UnknownFamily(_))));
        assert!(FamilySpec::from_name("negbinomial", &[0.5, 0.5]).is_err());
        assert!(from_family("geometric", &[0.5], 1e-3).is_err());
    }

    #[test]
    fn window_cap_is_enforced() {
        let spec = FamilySpec::from_name("geometric", &[1e-6]).unwrap();
        assert!(matches!(spec.build_with_cap(1e-15, 1000), Err(Error::WindowCap { .. })));
    }

    #[test]
    fn log_ratios_are_non_increasing() {
        for spec in [
            FamilySpec::from_name("poisson", &[7.3]).unwrap(),
            FamilySpec::from_name("binomial", &[20.0, 0.3]).unwrap(),
            FamilySpec::from_name("negbinomial", &[2.5, 0.2]).unwrap(),
            FamilySpec::from_name("twosided-geometric", &[0.7]).unwrap(),
        ] {
            let mut prev = f64::INFINITY;
            for k in -5..40 {
                let lr = spec.log_ratio(k);
                if lr.is_nan() {
                    continue;
                }
                assert!(lr <= prev, "{spec} at {k}");
                prev = lr;
            }
        }
    }
}
