//! Declarative sweeps: which sources, which `n`, which checks.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checks::{appendix_sweep, decay_check, run_checks};
use super::lab::{params_string, Lab, Source};
use super::report::Report;
use super::{CheckConfig, CheckId, CheckResult, Status};
use crate::error::{Error, Result};
use crate::pmf::{random_log_concave, Family, FamilySpec, IntegerPmf, PmfDocument};
use crate::smooth::MAX_ORDER;

/// Largest number of grid points accepted per family.
const MAX_GRID: usize = 10_000;
/// Stream offset separating random pairs from random single pmfs.
const PAIR_STREAM: u64 = 1 << 40;

/// A family with a grid given by target standard deviations, explicit
/// parameter vectors, or both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyGrid {
    pub family: String,
    #[serde(default)]
    pub sigmas: Vec<f64>,
    #[serde(default)]
    pub params: Vec<Vec<f64>>,
}

/// A custom pmf, read from `path` or given inline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmfSource {
    pub name: String,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub pmf: Option<PmfDocument>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    pub count: usize,
    pub max_len: usize,
    pub seed: u64,
}

/// Log-log slope of the entropy gap over a sigma grid. Unset ends of the
/// accepted slope range are unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySpec {
    pub family: String,
    pub n: usize,
    pub sigmas: Vec<f64>,
    pub slope_min: Option<f64>,
    pub slope_max: Option<f64>,
}

impl Default for DecaySpec {
    fn default() -> Self {
        Self {
            family: "geometric".into(),
            n: 2,
            sigmas: vec![50.0, 100.0, 200.0, 400.0, 800.0],
            slope_min: None,
            slope_max: Some(-0.75),
        }
    }
}

impl DecaySpec {
    pub fn validate(&self) -> Result<()> {
        Family::from_name(&self.family)?;
        if self.sigmas.len() < 2 {
            return Err(Error::invalid("decay fit needs at least two sigma values"));
        }
        check_sigmas(&self.sigmas)?;
        if !(1..MAX_ORDER).contains(&self.n) {
            return Err(Error::invalid(format!("decay n must lie in 1..{MAX_ORDER}")));
        }
        if let (Some(a), Some(b)) = (self.slope_min, self.slope_max) {
            if a > b {
                return Err(Error::invalid("slope_min exceeds slope_max"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    /// Directory receiving one pmf JSON per failing row.
    pub reproducer_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub families: Vec<FamilyGrid>,
    pub pmfs: Vec<PmfSource>,
    pub random: Option<RandomSpec>,
    pub random_pairs: Option<RandomSpec>,
    /// Inclusive range of the number of summands.
    pub n_range: (usize, usize),
    pub checks: Vec<CheckId>,
    pub decay: Option<DecaySpec>,
    pub config: CheckConfig,
    pub outputs: Outputs,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
    /// Drop everything after the first failing source.
    pub abort_on_fail: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            families: Vec::new(),
            pmfs: Vec::new(),
            random: None,
            random_pairs: None,
            n_range: (1, 1),
            checks: Vec::new(),
            decay: None,
            config: CheckConfig::default(),
            outputs: Outputs::default(),
            workers: 0,
            abort_on_fail: true,
        }
    }
}

/// `k` log-spaced points from `a` to `b` inclusive.
pub fn log_grid(a: f64, b: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let (la, lb) = (a.ln(), b.ln());
            (0..k)
                .map(|i| {
                    if i == k - 1 {
                        b
                    } else {
                        (la + (lb - la) * i as f64 / (k - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Twelve log-spaced sigmas from 2 to 4000.
pub fn default_sigma_grid() -> Vec<f64> {
    log_grid(2.0, 4000.0, 12)
}

fn check_sigmas(sigmas: &[f64]) -> Result<()> {
    if sigmas.len() > MAX_GRID {
        return Err(Error::invalid(format!("grid of {} points exceeds {MAX_GRID}", sigmas.len())));
    }
    if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::invalid(format!("sigma values must be finite and positive, got {s}")));
    }
    Ok(())
}

impl SweepSpec {
    /// Five families over the default sigma grid, 100 random log-concave
    /// pmfs, 500 random pairs, `n = 1..=3` and every check.
    pub fn default_suite() -> Self {
        let families = [
            Family::Geometric,
            Family::Poisson,
            Family::Binomial,
            Family::NegativeBinomial,
            Family::TwoSidedGeometric,
        ]
        .iter()
        .map(|f| FamilyGrid { family: f.name().into(), sigmas: default_sigma_grid(), params: Vec::new() })
        .collect();
        Self {
            families,
            random: Some(RandomSpec { count: 100, max_len: 40, seed: 0 }),
            random_pairs: Some(RandomSpec { count: 500, max_len: 30, seed: 1 }),
            n_range: (1, 3),
            checks: CheckId::ALL.to_vec(),
            decay: Some(DecaySpec::default()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let (lo, hi) = self.n_range;
        // n + 1 summands are needed by the monotonicity checks.
        if lo < 1 || lo > hi || hi + 1 > MAX_ORDER {
            return Err(Error::invalid(format!("n range must satisfy 1 <= lo <= hi < {MAX_ORDER}, got {lo}..={hi}")));
        }
        for g in &self.families {
            let family = Family::from_name(&g.family)?;
            check_sigmas(&g.sigmas)?;
            if g.params.len() > MAX_GRID {
                return Err(Error::invalid("parameter grid too large"));
            }
            if !g.sigmas.is_empty() && !family.supports_sigma() {
                return Err(Error::invalid(format!("family {} has no sigma parameterisation", family.name())));
            }
        }
        for p in &self.pmfs {
            if p.path.is_some() == p.pmf.is_some() {
                return Err(Error::invalid(format!("pmf `{}` needs exactly one of `path` and `pmf`", p.name)));
            }
        }
        if let Some(d) = &self.decay {
            d.validate()?;
        }
        Ok(())
    }
}

enum Task {
    Family(FamilySpec),
    Custom(String, IntegerPmf),
    Random(RandomSpec, u64),
    Pair(RandomSpec, u64),
}

impl Task {
    fn source(&self, cfg: &CheckConfig) -> std::result::Result<Source, (String, String, Error)> {
        match self {
            Task::Family(spec) => {
                Source::family(spec, cfg.tail_tol).map_err(|e| (spec.family().name().to_string(), params_string(spec), e))
            }
            Task::Custom(name, pmf) => Ok(Source::custom(name.clone(), "", pmf.clone())),
            Task::Random(r, i) => {
                let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
                rng.set_stream(*i);
                let p = random_log_concave(&mut rng, r.max_len);
                Ok(Source::custom("random-lc", format!("seed={};index={i}", r.seed), p))
            }
            Task::Pair(r, i) => {
                let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
                rng.set_stream(PAIR_STREAM + *i);
                let a = random_log_concave(&mut rng, r.max_len);
                let b = random_log_concave(&mut rng, r.max_len);
                Ok(Source::pair("random-pair", format!("seed={};index={i}", r.seed), a, b))
            }
        }
    }
}

fn build_tasks(spec: &SweepSpec) -> Result<Vec<Task>> {
    let mut tasks = Vec::new();
    for g in &spec.families {
        let family = Family::from_name(&g.family)?;
        for &s in &g.sigmas {
            tasks.push(Task::Family(FamilySpec::with_sigma(family, s)?));
        }
        for p in &g.params {
            tasks.push(Task::Family(FamilySpec::new(family, p.clone())?));
        }
    }
    for p in &spec.pmfs {
        let pmf = match (&p.path, &p.pmf) {
            (Some(path), _) => IntegerPmf::read_json(path)?,
            (None, Some(doc)) => IntegerPmf::from_document(doc.clone())?,
            (None, None) => unreachable!("validated"),
        };
        tasks.push(Task::Custom(p.name.clone(), pmf));
    }
    if let Some(r) = spec.random {
        tasks.extend((0..r.count as u64).map(|i| Task::Random(r, i)));
    }
    if let Some(r) = spec.random_pairs {
        tasks.extend((0..r.count as u64).map(|i| Task::Pair(r, i)));
    }
    Ok(tasks)
}

/// Rows and the source they were computed on (kept for reproducers).
pub(crate) struct TaskOutput {
    pub rows: Vec<CheckResult>,
    pub source: Option<Source>,
}

fn run_task(task: &Task, spec: &SweepSpec, checks: &[CheckId]) -> TaskOutput {
    let cfg = &spec.config;
    let source = match task.source(cfg) {
        Ok(s) => s,
        Err((family, params, e)) => {
            let status_of = |e: &Error| match e {
                Error::Precondition(_) => Status::PreconditionSkip,
                _ => Status::Error,
            };
            let mut rows = Vec::new();
            for n in spec.n_range.0..=spec.n_range.1 {
                for &id in checks {
                    let mut r = CheckResult::new(id, &family, &params, n, f64::NAN);
                    r.status = status_of(&e);
                    r.note = e.to_string();
                    rows.push(r);
                }
            }
            return TaskOutput { rows, source: None };
        }
    };
    let mut lab = Lab::new(source, cfg.clone());
    let mut rows = Vec::new();
    if lab.source().is_pair() {
        let pair_checks: Vec<CheckId> = checks.iter().copied().filter(|c| c.is_pair_check()).collect();
        rows.extend(run_checks(&mut lab, 1, &pair_checks));
    } else {
        for n in spec.n_range.0..=spec.n_range.1 {
            rows.extend(run_checks(&mut lab, n, checks));
        }
    }
    TaskOutput { rows, source: Some(lab.source().clone()) }
}

/// Runs every selected check on every source. Rows are ordered by source
/// (families, custom pmfs, random pmfs, random pairs), then `n`, then check,
/// followed by the once-per-sweep checks; the order and content do not
/// depend on the number of workers. Files named in `spec.outputs` are written.
pub fn run_sweep(spec: &SweepSpec) -> Result<Report> {
    spec.validate()?;
    let tasks = build_tasks(spec)?;
    let per_source: Vec<CheckId> = CheckId::ALL
        .iter()
        .copied()
        .filter(|c| spec.checks.contains(c) && !c.is_global())
        .collect();
    let global: Vec<CheckId> = CheckId::ALL.iter().copied().filter(|c| spec.checks.contains(c) && c.is_global()).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;

    let first_fail = AtomicUsize::new(usize::MAX);
    let outputs: Vec<Option<TaskOutput>> = pool.install(|| {
        tasks
            .par_iter()
            .enumerate()
            .map(|(i, t)| {
                // Work past a known failure would be discarded anyway.
                if spec.abort_on_fail && first_fail.load(Ordering::Relaxed) < i {
                    return None;
                }
                let out = run_task(t, spec, &per_source);
                if spec.abort_on_fail && out.rows.iter().any(CheckResult::is_fail) {
                    first_fail.fetch_min(i, Ordering::Relaxed);
                }
                Some(out)
            })
            .collect()
    });

    let mut report = Report::new(spec.config.clone());
    for out in outputs {
        let out = out.expect("tasks before the first failure always run");
        let failed = out.rows.iter().any(CheckResult::is_fail);
        report.push_task(out);
        if failed && spec.abort_on_fail {
            report.abort();
            break;
        }
    }
    if report.aborted_at.is_none() {
        for id in global {
            let row = pool.install(|| match id {
                CheckId::Theorem1Decay => decay_check(&spec.decay.clone().unwrap_or_default(), &spec.config),
                _ => Ok(appendix_sweep(spec.config.appendix_samples, spec.config.seed)),
            })?;
            let failed = row.is_fail();
            report.push_task(TaskOutput { rows: vec![row], source: None });
            if failed && spec.abort_on_fail {
                report.abort();
                break;
            }
        }
    }
    report.finish();
    report.write_outputs(&spec.outputs)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(checks: Vec<CheckId>, workers: usize) -> SweepSpec {
        SweepSpec {
            families: vec![FamilyGrid { family: "poisson".into(), sigmas: vec![3.0, 20.0], params: vec![vec![1.5]] }],
            random: Some(RandomSpec { count: 5, max_len: 12, seed: 3 }),
            random_pairs: Some(RandomSpec { count: 5, max_len: 12, seed: 4 }),
            n_range: (1, 2),
            checks,
            workers,
            config: CheckConfig { appendix_samples: 10_000, ..CheckConfig::default() },
            ..SweepSpec::default()
        }
    }

    #[test]
    fn empty_check_list_gives_empty_report() {
        let r = run_sweep(&small_spec(Vec::new(), 1)).unwrap();
        assert!(r.results.is_empty());
        assert_eq!(r.summary.total, 0);
    }

    #[test]
    fn deterministic_across_workers() {
        let checks = vec![CheckId::Prop1TvQ, CheckId::QMonotone, CheckId::EpiSmoothed, CheckId::AppendixA];
        let a = run_sweep(&small_spec(checks.clone(), 1)).unwrap();
        let b = run_sweep(&small_spec(checks, 4)).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        assert_eq!(a.summary.fail, 0);
    }

    #[test]
    fn single_point_matches_run_check() {
        let spec = SweepSpec {
            families: vec![FamilyGrid { family: "geometric".into(), sigmas: Vec::new(), params: vec![vec![0.5]] }],
            checks: vec![CheckId::Prop3ii],
            ..SweepSpec::default()
        };
        let report = run_sweep(&spec).unwrap();
        let fs = FamilySpec::from_name("geometric", &[0.5]).unwrap();
        let inst = super::super::Instance { source: Source::family(&fs, 1e-15).unwrap(), n: 1 };
        let mut single = super::super::run_check(CheckId::Prop3ii, &inst, &CheckConfig::default()).unwrap();
        let mut rows = report.results.clone();
        single.runtime = Default::default();
        rows[0].runtime = Default::default();
        assert_eq!(rows, vec![single]);
    }

    #[test]
    fn grid_endpoints() {
        let g = default_sigma_grid();
        assert_eq!(g.len(), 12);
        assert_eq!(g[0], 2.0);
        assert_eq!(g[11], 4000.0);
    }

    #[test]
    fn spec_json_round_trip_and_unknown_check() {
        let spec = SweepSpec::default_suite();
        let text = serde_json::to_string(&spec).unwrap();
        let back: SweepSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.checks, spec.checks);
        let bad = r#"{"checks": ["prop1_tv_q", "nope"]}"#;
        let err = serde_json::from_str::<SweepSpec>(bad).unwrap_err();
        assert!(err.to_string().contains("unknown check id"));
    }
}
