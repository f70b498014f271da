//! Named numerical checks of each identity and inequality, and a sweep
//! driver that runs them over families, parameter grids and random pmfs.

mod checks;
mod lab;
mod report;
mod sweep;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use checks::{appendix_sweep, decay_check, run_check, run_checks, Instance};
pub use lab::{Lab, Source};
pub use report::{CheckSummary, Report, Reproducer, Summary};
pub use sweep::{
    default_sigma_grid, log_grid, run_sweep, DecaySpec, FamilyGrid, Outputs, PmfSource, RandomSpec,
    SweepSpec,
};

use crate::convolve::Tier;
use crate::error::{Error, Result};
use crate::fmt::ser_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", try_from = "String")]
pub enum CheckId {
    Prop1TvQ,
    Prop3i,
    Prop3ii,
    QMonotone,
    LcClosure,
    Bobkov,
    Prop2,
    Lemma2,
    Lemma3,
    Theorem1,
    Theorem1Decay,
    CorollaryMono,
    EpiSmoothed,
    ChebInterval,
    Tails,
    Maxent,
    #[serde(rename = "appendixA")]
    AppendixA,
}

impl CheckId {
    pub const ALL: [CheckId; 17] = [
        CheckId::Prop1TvQ,
        CheckId::Prop3i,
        CheckId::Prop3ii,
        CheckId::QMonotone,
        CheckId::LcClosure,
        CheckId::Bobkov,
        CheckId::Prop2,
        CheckId::Lemma2,
        CheckId::Lemma3,
        CheckId::Theorem1,
        CheckId::Theorem1Decay,
        CheckId::CorollaryMono,
        CheckId::EpiSmoothed,
        CheckId::ChebInterval,
        CheckId::Tails,
        CheckId::Maxent,
        CheckId::AppendixA,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckId::Prop1TvQ => "prop1_tv_q",
            CheckId::Prop3i => "prop3i",
            CheckId::Prop3ii => "prop3ii",
            CheckId::QMonotone => "q_monotone",
            CheckId::LcClosure => "lc_closure",
            CheckId::Bobkov => "bobkov",
            CheckId::Prop2 => "prop2",
            CheckId::Lemma2 => "lemma2",
            CheckId::Lemma3 => "lemma3",
            CheckId::Theorem1 => "theorem1",
            CheckId::Theorem1Decay => "theorem1_decay",
            CheckId::CorollaryMono => "corollary_mono",
            CheckId::EpiSmoothed => "epi_smoothed",
            CheckId::ChebInterval => "cheb_interval",
            CheckId::Tails => "tails",
            CheckId::Maxent => "maxent",
            CheckId::AppendixA => "appendixA",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            CheckId::Prop1TvQ => "TV(X, X+1) = 1 - q",
            CheckId::Prop3i => "exp(-H) <= 1 - q",
            CheckId::Prop3ii => "1 - q = pmax for log-concave X",
            CheckId::QMonotone => "q(p1 * p2) >= max(q(p1), q(p2))",
            CheckId::LcClosure => "log-concavity is preserved by convolution",
            CheckId::Bobkov => "1/(4 sigma) <= pmax <= 1/sigma",
            CheckId::Prop2 => "last mode within mu +- (sigma^{3/2+delta} + 1)",
            CheckId::Lemma2 => "sum_k sup |f - p(k)| <= (2^n - 2)/sigma",
            CheckId::Lemma3 => "ratio-decay witness within 2 ceil(sigma^2) of the last mode",
            CheckId::Theorem1 => "|h(S_n + U) - H(S_n)| <= explicit rate",
            CheckId::Theorem1Decay => "log-log slope of |h - H| against sigma",
            CheckId::CorollaryMono => "H(S_{n+1}) - H(S_n) >= log((n+1)/n)/2 - eps",
            CheckId::EpiSmoothed => "h of normalised smoothed sums is non-decreasing",
            CheckId::ChebInterval => "P(|S_n| < 5 n sigma^2) >= 1 - 1/(8 n sigma^2)",
            CheckId::Tails => "entropy tails beyond 5 n sigma^2 below the explicit bound",
            CheckId::Maxent => "H(S_n) <= log(2 pi e (sigma_n^2 + 1/12))/2",
            CheckId::AppendixA => "elementary x log x increment estimate, random sweep",
        }
    }

    /// Checks that act on a pair of pmfs (`S_n` and `X`, or a random pair).
    pub fn is_pair_check(self) -> bool {
        matches!(self, CheckId::QMonotone | CheckId::LcClosure)
    }

    /// Checks that run once per sweep rather than per source.
    pub fn is_global(self) -> bool {
        matches!(self, CheckId::Theorem1Decay | CheckId::AppendixA)
    }
}

impl TryFrom<String> for CheckId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        CheckId::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == t || c.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::UnknownCheck(s.to_string()))
    }
}

/// Parses a comma-separated list; `all` selects every check.
pub fn parse_check_list(list: &str) -> Result<Vec<CheckId>> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(CheckId::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in list.split(',').filter(|s| !s.trim().is_empty()) {
        let id: CheckId = part.parse()?;
        if !out.contains(&id) {
            out.push(id);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    PreconditionSkip,
    /// A resource cap or an uncertifiable tail prevented evaluation.
    Error,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::PreconditionSkip => "precondition-skip",
            Status::Error => "error",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extra {
    pub name: String,
    #[serde(serialize_with = "ser_f64")]
    pub value: f64,
}

/// Outcome of one check on one instance. `margin = rhs - lhs`; the check
/// fails only when `margin + certified_error + tolerance < 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check_id: CheckId,
    pub family: String,
    pub params: String,
    pub n: usize,
    #[serde(serialize_with = "ser_f64")]
    pub sigma: f64,
    #[serde(serialize_with = "ser_f64")]
    pub lhs: f64,
    #[serde(serialize_with = "ser_f64")]
    pub rhs: f64,
    #[serde(serialize_with = "ser_f64")]
    pub margin: f64,
    #[serde(serialize_with = "ser_f64")]
    pub certified_error: f64,
    #[serde(serialize_with = "ser_f64")]
    pub tolerance: f64,
    pub status: Status,
    pub note: String,
    pub extras: Vec<Extra>,
    #[serde(skip)]
    pub runtime: Duration,
}

impl CheckResult {
    pub fn new(check_id: CheckId, family: &str, params: &str, n: usize, sigma: f64) -> Self {
        Self {
            check_id,
            family: family.to_string(),
            params: params.to_string(),
            n,
            sigma,
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NAN,
            certified_error: 0.0,
            tolerance: 0.0,
            status: Status::PreconditionSkip,
            note: String::new(),
            extras: Vec::new(),
            runtime: Duration::ZERO,
        }
    }

    /// Sets both sides and derives margin and status.
    pub fn judge(mut self, lhs: f64, rhs: f64, certified_error: f64, tolerance: f64) -> Self {
        self.lhs = lhs;
        self.rhs = rhs;
        self.margin = rhs - lhs;
        self.certified_error = certified_error;
        self.tolerance = tolerance;
        self.status = if self.margin.is_nan() || self.margin + certified_error + tolerance < 0.0 {
            Status::Fail
        } else {
            Status::Pass
        };
        self
    }

    /// Two-sided identity `lhs = rhs`: fails when `|rhs - lhs|` exceeds
    /// `certified_error + tolerance`.
    pub fn judge_identity(mut self, lhs: f64, rhs: f64, certified_error: f64, tolerance: f64) -> Self {
        self = self.judge(lhs, rhs, certified_error, tolerance);
        if self.margin.is_nan() || self.margin.abs() > certified_error + tolerance {
            self.status = Status::Fail;
        }
        self
    }

    /// Range check `lo <= value <= hi`. `rhs` reports the nearer end and
    /// `margin` the signed distance to it.
    pub fn judge_range(mut self, value: f64, lo: f64, hi: f64, certified_error: f64, tolerance: f64) -> Self {
        let (up, down) = (hi - value, value - lo);
        let rhs = if up <= down { hi } else { lo };
        self = self.judge(value, rhs, certified_error, tolerance);
        self.margin = up.min(down);
        self.status = if self.margin.is_nan() || self.margin + certified_error + tolerance < 0.0 {
            Status::Fail
        } else {
            Status::Pass
        };
        self
    }

    pub fn skip(mut self, note: impl Into<String>) -> Self {
        self.status = Status::PreconditionSkip;
        self.note = note.into();
        self
    }

    pub fn errored(mut self, note: impl Into<String>) -> Self {
        self.status = Status::Error;
        self.note = note.into();
        self
    }

    pub fn extra(mut self, name: impl Into<String>, value: f64) -> Self {
        self.extras.push(Extra { name: name.into(), value });
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn get_extra(&self, name: &str) -> Option<f64> {
        self.extras.iter().find(|e| e.name == name).map(|e| e.value)
    }

    pub fn is_fail(&self) -> bool {
        self.status == Status::Fail
    }
}

/// Numerical settings shared by all checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub tail_tol: f64,
    pub quad_tol: f64,
    pub identity_tol: f64,
    pub closure_tol: f64,
    pub lc_rel_tol: f64,
    pub epi_tol: f64,
    pub corollary_eps: f64,
    pub prop2_delta: f64,
    pub lemma3_epsilon: f64,
    pub appendix_samples: usize,
    pub seed: u64,
    pub tier: Tier,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            tail_tol: 1e-15,
            quad_tol: 1e-10,
            identity_tol: 1e-12,
            closure_tol: 1e-10,
            lc_rel_tol: 1e-9,
            epi_tol: 1e-9,
            corollary_eps: 1e-3,
            prop2_delta: 0.25,
            lemma3_epsilon: 0.2,
            appendix_samples: 1_000_000,
            seed: 0,
            tier: Tier::Auto,
        }
    }
}

impl CheckConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tail_tol", self.tail_tol),
            ("quad_tol", self.quad_tol),
            ("prop2_delta", self.prop2_delta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        let nonneg = [
            ("identity_tol", self.identity_tol),
            ("closure_tol", self.closure_tol),
            ("lc_rel_tol", self.lc_rel_tol),
            ("epi_tol", self.epi_tol),
            ("corollary_eps", self.corollary_eps),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.lemma3_epsilon > 0.0 && self.lemma3_epsilon < 0.5) {
            return Err(Error::invalid("lemma3_epsilon must lie in (0, 1/2)"));
        }
        Ok(())
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in CheckId::ALL {
            assert_eq!(id.as_str().parse::<CheckId>().unwrap(), id);
            let json = serde_json::to_string(&id).unwrap();
            assert_eq!(json, format!("\"{}\"", id.as_str()));
        }
        assert!(matches!("nope".parse::<CheckId>(), Err(Error::UnknownCheck(_))));
    }

    #[test]
    fn check_lists() {
        assert_eq!(parse_check_list("all").unwrap().len(), 17);
        assert_eq!(parse_check_list("prop3ii, bobkov,prop3ii").unwrap(), vec![CheckId::Prop3ii, CheckId::Bobkov]);
        assert!(parse_check_list("prop3ii,zzz").is_err());
        assert!(parse_check_list("").unwrap().is_empty());
    }

    #[test]
    fn judging() {
        let r = CheckResult::new(CheckId::Prop3i, "f", "p", 1, 1.0).judge(1.0, 0.5, 0.1, 0.0);
        assert_eq!(r.status, Status::Fail);
        let r = CheckResult::new(CheckId::Prop3i, "f", "p", 1, 1.0).judge(1.0, 0.95, 0.1, 0.0);
        assert_eq!(r.status, Status::Pass);
        assert!((r.margin + 0.05).abs() < 1e-15);
    }
}
