//! Per-source cache of the quantities shared between checks: the sums
//! `S_n`, their statistics and the entropies of their smoothed versions.

use std::cell::OnceCell;
use std::rc::Rc;

use crate::convolve::{self_convolve, ConvolveConfig};
use crate::error::{Error, Result};
use crate::pmf::{is_log_concave, stats, DistStats, FamilySpec, IntegerPmf, DEFAULT_MAX_WINDOW};
use crate::smooth::{differential_entropy, DifferentialEntropy, SmoothedDensity};

use super::CheckConfig;

/// A distribution under test, or a pair for the two-operand checks.
#[derive(Debug, Clone)]
pub struct Source {
    pub family: String,
    pub params: String,
    pub pmf: IntegerPmf,
    /// Second operand; when present only the pair checks apply.
    pub partner: Option<IntegerPmf>,
}

impl Source {
    pub fn family(spec: &FamilySpec, tail_tol: f64) -> Result<Self> {
        Ok(Self {
            family: spec.family().name().to_string(),
            params: params_string(spec),
            pmf: spec.build(tail_tol)?,
            partner: None,
        })
    }

    pub fn custom(name: impl Into<String>, params: impl Into<String>, pmf: IntegerPmf) -> Self {
        Self { family: name.into(), params: params.into(), pmf, partner: None }
    }

    pub fn pair(name: impl Into<String>, params: impl Into<String>, a: IntegerPmf, b: IntegerPmf) -> Self {
        Self { family: name.into(), params: params.into(), pmf: a, partner: Some(b) }
    }

    pub fn is_pair(&self) -> bool {
        self.partner.is_some()
    }
}

pub(crate) fn params_string(spec: &FamilySpec) -> String {
    spec.family()
        .param_names()
        .iter()
        .zip(spec.params())
        .map(|(name, v)| format!("{name}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// Why a cached quantity is unavailable.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Unavailable {
    /// A hypothesis of the statement is not met.
    Skip(String),
    /// A cap or an uncertifiable tail stopped the computation.
    Failed(String),
}

impl From<Error> for Unavailable {
    fn from(e: Error) -> Self {
        match e {
            Error::Precondition(_) => Unavailable::Skip(e.to_string()),
            other => Unavailable::Failed(other.to_string()),
        }
    }
}

pub(crate) type Avail<T> = std::result::Result<T, Unavailable>;

/// `S_n` translated so that its mean lies within 1/2 of the origin.
#[derive(Debug)]
pub(crate) struct SumData {
    pub pmf: IntegerPmf,
    pub stats: DistStats,
    pub log_concave: bool,
}

#[derive(Debug)]
pub(crate) struct Smoothed {
    pub density: SmoothedDensity,
    pub entropy: DifferentialEntropy,
}

/// Lazily computed `S_n` data for one source. Not shared across threads:
/// each sweep task owns its lab.
pub struct Lab {
    pub(crate) source: Source,
    pub(crate) cfg: CheckConfig,
    pub(crate) base_stats: Avail<DistStats>,
    pub(crate) base_lc: bool,
    sums: Vec<OnceCell<Avail<Rc<SumData>>>>,
    smoothed: Vec<OnceCell<Avail<Rc<Smoothed>>>>,
}

impl Lab {
    pub fn new(source: Source, cfg: CheckConfig) -> Self {
        let base_stats = stats(&source.pmf).map_err(Unavailable::from);
        let base_lc = source.pmf.known_log_concave() || is_log_concave(&source.pmf, cfg.lc_rel_tol).log_concave;
        Self { source, cfg, base_stats, base_lc, sums: Vec::new(), smoothed: Vec::new() }
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    pub fn config(&self) -> &CheckConfig {
        &self.cfg
    }

    /// Standard deviation of a single summand (NaN when unavailable).
    pub fn sigma(&self) -> f64 {
        self.base_stats.as_ref().map_or(f64::NAN, |s| s.sigma)
    }

    pub(crate) fn convolve_config(&self) -> ConvolveConfig {
        ConvolveConfig { tail_tol: self.cfg.tail_tol, max_window: DEFAULT_MAX_WINDOW, ..ConvolveConfig::default() }
    }

    fn ensure(&mut self, n: usize) {
        while self.sums.len() <= n {
            self.sums.push(OnceCell::new());
            self.smoothed.push(OnceCell::new());
        }
    }

    pub(crate) fn sum(&mut self, n: usize) -> Avail<Rc<SumData>> {
        self.ensure(n);
        self.sums[n]
            .get_or_init(|| {
                let report = self_convolve(&self.source.pmf, n, self.cfg.tier, &self.convolve_config())?;
                let st = stats(&report.result)?;
                let shift = -st.mean.round() as i64;
                let pmf = report.result.shifted(shift);
                let st = stats(&pmf)?;
                let log_concave = report.log_concave || is_log_concave(&pmf, self.cfg.lc_rel_tol).log_concave;
                Ok(Rc::new(SumData { pmf, stats: st, log_concave }))
            })
            .clone()
    }

    /// `S_n + U_1 + ... + U_n` and its differential entropy.
    pub(crate) fn smoothed(&mut self, n: usize) -> Avail<Rc<Smoothed>> {
        let sum = self.sum(n)?;
        let tol = self.cfg.quad_tol;
        self.smoothed[n]
            .get_or_init(|| {
                let density = SmoothedDensity::new(&sum.pmf, n)?;
                let entropy = differential_entropy(&density, tol)?;
                Ok(Rc::new(Smoothed { density, entropy }))
            })
            .clone()
    }
}
