//! The individual checks. Each takes a [`Lab`] and the number of summands
//! and returns one [`CheckResult`].

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::lab::{Avail, Lab, Source, Unavailable};
use super::sweep::DecaySpec;
use super::{CheckConfig, CheckId, CheckResult, Status};
use crate::bounds::{
    appendix_estimate, bobkov_interval, corollary_threshold, find_n0, lemma3_sigma_threshold, maxent_bound, prop2_window,
    tail_bound_value, theorem1_precondition, theorem1_rate_value, SearchStatus, Side,
};
use crate::convolve::convolve;
use crate::error::{Error, Result};
use crate::pmf::{
    entropy_tail, interval_probability, is_log_concave, stats, tv_shift_distance, DistStats, FamilySpec,
    IntegerPmf,
};
use crate::smooth::lemma2_residuals;
use crate::sum::NeumaierSum;

const EPS: f64 = f64::EPSILON;

/// A single source and number of summands, for running checks one at a time.
#[derive(Debug, Clone)]
pub struct Instance {
    pub source: Source,
    pub n: usize,
}

/// Runs one check on one instance. The once-per-sweep checks
/// (`theorem1_decay`, `appendixA`) run with their defaults.
pub fn run_check(id: CheckId, instance: &Instance, cfg: &CheckConfig) -> Result<CheckResult> {
    cfg.validate()?;
    match id {
        CheckId::Theorem1Decay => decay_check(&DecaySpec::default(), cfg),
        CheckId::AppendixA => Ok(appendix_sweep(cfg.appendix_samples, cfg.seed)),
        _ => {
            let mut lab = Lab::new(instance.source.clone(), cfg.clone());
            Ok(timed(|| check(&mut lab, id, instance.n)))
        }
    }
}

/// Runs `ids` in order on one lab, sharing the cached sums.
pub fn run_checks(lab: &mut Lab, n: usize, ids: &[CheckId]) -> Vec<CheckResult> {
    ids.iter().map(|&id| timed(|| check(lab, id, n))).collect()
}

fn timed(f: impl FnOnce() -> CheckResult) -> CheckResult {
    let start = Instant::now();
    let mut r = f();
    r.runtime = start.elapsed();
    r
}

fn row(lab: &Lab, id: CheckId, n: usize) -> CheckResult {
    let sigma = if lab.source.is_pair() { f64::NAN } else { lab.sigma() };
    CheckResult::new(id, &lab.source.family, &lab.source.params, n, sigma)
}

fn unavailable(r: CheckResult, u: Unavailable) -> CheckResult {
    match u {
        Unavailable::Skip(m) => r.skip(m),
        Unavailable::Failed(m) => r.errored(m),
    }
}

macro_rules! get {
    ($e:expr, $r:expr) => {
        match $e {
            Ok(v) => v,
            Err(u) => return unavailable($r, Unavailable::from(u)),
        }
    };
}

fn entry_total(p: &IntegerPmf) -> f64 {
    p.weights().iter().map(|&w| p.entry_error(w)).collect::<NeumaierSum>().value()
}

fn sigma_error(st: &DistStats) -> f64 {
    if st.sigma > 0.0 {
        st.variance_error / (2.0 * st.sigma)
    } else {
        st.variance_error.sqrt()
    }
}

fn check(lab: &mut Lab, id: CheckId, n: usize) -> CheckResult {
    let r = row(lab, id, n);
    if n == 0 {
        return r.skip("needs n >= 1");
    }
    if lab.source.is_pair() && !id.is_pair_check() {
        return r.skip("pair sources only support the convolution checks");
    }
    match id {
        CheckId::Prop1TvQ => prop1(lab, n, r),
        CheckId::Prop3i => prop3i(lab, n, r),
        CheckId::Prop3ii => prop3ii(lab, n, r),
        CheckId::QMonotone => q_monotone(lab, n, r),
        CheckId::LcClosure => lc_closure(lab, n, r),
        CheckId::Bobkov => bobkov(lab, n, r),
        CheckId::Prop2 => prop2(lab, n, r),
        CheckId::Lemma2 => lemma2(lab, n, r),
        CheckId::Lemma3 => lemma3(lab, n, r),
        CheckId::Theorem1 => theorem1(lab, n, r),
        CheckId::CorollaryMono => corollary_mono(lab, n, r),
        CheckId::EpiSmoothed => epi(lab, n, r),
        CheckId::ChebInterval => cheb_interval(lab, n, r),
        CheckId::Tails => tails(lab, n, r),
        CheckId::Maxent => maxent(lab, n, r),
        CheckId::Theorem1Decay | CheckId::AppendixA => r.skip("runs once per sweep"),
    }
}

fn prop1(lab: &mut Lab, n: usize, r: CheckResult) -> CheckResult {
    let s = get!(lab.sum(n), r);
    let tv = tv_shift_distance(&s.pmf);
    let st = &s.stats;
    let cert = st.q_error + s.pmf.tail_mass_bound() + entry_total(&s.pmf) + 16.0 * EPS;
    r.judge_identity(tv, 1.0 - st.q, cert, lab.cfg.identity_tol)
}

fn prop3i(lab: &mut Lab, n: usize, r: CheckResult) -> CheckResult {
    let s = get!(lab.sum(n), r);
    let st = &s.stats;
    let lhs = (-st.entropy).exp();
    let cert = lhs * st.entropy_error.exp_m1() + st.q_error + 4.0 * EPS;
    r.judge(lhs, 1.0 - st.q, cert, lab.cfg.identity_tol).extra("entropy", st.entropy)
}

fn prop3ii(lab: &mut Lab, n: usize, r: CheckResult) -> CheckResult {
    let s = get!(lab.sum(n), r);
    if !s.log_concave {
        return r.skip("pmf is not log-concave");
    }
    let st = &s.stats;
    let cert = st.q_error + s.pmf.entry_error(st.pmax) + 8.0 * EPS;
    r.judge_identity(1.0 - st.q, st.pmax, cert, lab.cfg.identity_tol)
}

/// Operands of the pair checks: the stored pair, or `S_n` and `X`.
fn operands(lab: &mut Lab, n: usize) -> Avail<(IntegerPmf, IntegerPmf, bool, bool)> {
    let tol = lab.cfg.lc_rel_tol;
    let lc = |p: &IntegerPmf| p.known_log_concave() || is_log_concave(p, tol).log_concave;
    if let Some(b) = &lab.source.partner {
        let a = &lab.source.pmf;
        return Ok((a.clone(), b.clone(), lc(a), lc(b)));
    }
    let s = lab.sum(n)?;
    Ok((s.pmf.clone(), lab.source.pmf.clone(), s.log_concave, lab.base_lc))
}

fn q_monotone(lab: &mut Lab, n: usize, r: CheckResult) -> CheckResult {
    if lab.source.is_pair() && n != 1 {
        return r.skip("pair sources are checked at n = 1 only");
    }
    let (a, b, _, _) = get!(operands(lab, n), r);
    let c = get!(convolve(&a, &b, lab.cfg.tier, &lab.convolve_config()), r);
    let (sa, sb, sc) = (get!(stats(&a), r), get!(stats(&b), r), get!(stats(&c.result), r));
    let (lhs, lhs_err) = if sa.q >= sb.q { (sa.q, sa.q_error) } else { (sb.q, sb.q_error) };
    r.judge(lhs, sc.q, lhs_err + sc.q_error, lab.cfg.closure_tol)
        .extra("q1", sa.q)
        .extra("q2", sb.q)
}

fn lc_closure(lab: &mut Lab, n: usize, r: CheckResult) -> CheckResult {
    if lab.source.is_pair() && n != 1 {
        return r.skip("pair sources are checked at n = 1 only");
    }
    let (a, b, lca, lcb) = get!(operands(lab, n), r);
    if !(lca && lcb) {
        return r.skip("an operand is not log-concave");
    }
    let c = get!(convolve(&a, &b, lab.cfg.tier, &lab.convolve_config()), r);
    let lc = is_log_concave(&c.result, lab.cfg.lc_rel_tol);
    // Contiguity failures carry no finite slack.
    let slack = match (lc.first_violation, lc.min_slack) {
        (Some(_), s) if s >= (-lab.cfg.lc_rel_tol).ln_1p() => f64::NEG_INFINITY,
        (_, s) if s.is_infinite() => 0.0,
        (_, s) => s,
    };
    let r = r.judge(0.0, slack, 0.0, lab.cfg.closure_tol);
    match lc.min_slack_at {
        Some(k) => r.extra("min_slack_at", k as f64),
        None => r.with_note("fewer than three support points"),
    }
}

fn bobkov(lab: &mut Lab, n: usize, r: CheckResult) -> CheckResult {
    let s = get!(lab.sum(n), r);
    if !s.log_concave {
        return r.skip("pmf is not log-concave");
    }
    let st = &s.stats;
    let ev = bobkov_interval(st.sigma);
    let Some((lo, hi)) = ev.window else {
        return r.skip(format!("needs sigma >= 1, got {}", st.sigma));
    };
    let cert = s.pmf.entry_error(st.pmax) + sigma_error(st) / (st.sigma * st.sigma);
    r.judge_range(st.pmax, lo, hi, cert, 0.0).extra("sigma_n", st.sigma)
}

fn prop2(lab: &mut Lab, n: usize, r: CheckResult) -> CheckResult {
    let s = get!(lab.sum(n), r);
    if !s.log_concave {
        return r.skip("pmf is not log-concave");
    }
    let st = &s.stats;
    let delta = lab.cfg.prop2_delta;
    let ev = get!(prop2_window(st.mean, st.sigma, delta), r);
    let Some((lo, hi)) = ev.window else {
        return r.skip(format!("needs sigma > 4^(1/(2 delta)), got {}", st.sigma));
    };
    // Any index whose weight could tie with the stored maximum may be the
    // true last mode.
    let p = &s.pmf;
    let floor = st.pmax - p.entry_error(st.pmax);
    let spread = p
        .weights()
        .iter()
        .enumerate()
        .filter(|(_, &w)| w + p.entry_error(w) >= floor)
        .map(|(i, _)| ((p.offset() + i as i64) - st.nmax).abs())
        .max()
        .unwrap_or(0) as f64;
    let cert = st.mean_error + (1.5 + delta) * st.sigma.powf(0.5 + delta) * sigma_error(st) + spread;
    r.judge_range(st.nmax as f64, lo, hi, cert, 0.0)
        .extra("mean", st.mean)
        .extra("sigma_n", st.sigma)
}

fn lemma2(lab: &mut Lab, n: usize, r: CheckResult) -> CheckResult {
    if n < 2 {
        return r.skip("needs n >= 2 uniforms");
    }
    let s = get!(lab.sum(n), r);
    if !s.log_concave {
        return r.skip("pmf is not log-concave");
    }
    let res = get!(lemma2_residuals(&s.pmf, n), r);
    let mut out = r.judge(res.total, res.bound, res.certified_error, 0.0).extra("sigma_n", res.sigma);
    if n == 2 {
        out = out.extra("shift_l1_gap", (res.total - 2.0 * (1.0 - s.stats.q)).abs());
    }
    out
}

fn lemma3(lab: &mut Lab, n: usize, r: CheckResult) -> CheckResult {
    // The closed-form ratio is only available for an unconvolved family.
    let p = if n == 1 {
        lab.source.pmf.clone()
    } else {
        get!(lab.sum(n), r).pmf.clone()
    };
    let eps = lab.cfg.lemma3_epsilon;
    let right = get!(find_n0(&p, eps, Side::Right), r);
    let left = get!(find_n0(&p, eps, Side::Left), r);
    let width = (right.window.1 - right.window.0) as f64;
    let threshold = lemma3_sigma_threshold(eps);
    let r = r
        .extra("theta", right.theta)
        .extra("sigma_threshold", threshold)
        .extra("n0_right", right.witness.map_or(f64::NAN, |k| k as f64))
        .extra("n0_left", left.witness.map_or(f64::NAN, |k| k as f64));
    let found = [&right, &left].iter().all(|s| s.status == SearchStatus::Found);
    if found {
        let offset = [&right, &left]
            .iter()
            .map(|s| (s.witness.unwrap() - s.nmax).abs())
            .max()
            .unwrap() as f64;
        let spots = right.spot_checks_passed && left.spot_checks_passed;
        let mut out = r.judge(offset, width, 0.0, 0.0);
        if !spots {
            out.status = Status::Fail;
            out.note = "witness ratio inequality fails at a sampled later point".into();
        } else if !right.threshold_met {
            out.note = "pass-beyond-claim".into();
        }
        return out;
    }
    let partial = [&right, &left].iter().any(|s| s.status == SearchStatus::Partial);
    if right.threshold_met {
        if partial {
            return r.errored("window extends beyond the stored support");
        }
        return r.judge(f64::INFINITY, width, 0.0, 0.0).with_note("no witness in the window");
    }
    r.skip(format!("no witness; sigma {} below threshold {threshold}", right.sigma))
}

fn theorem1(lab: &mut Lab, n: usize, r: CheckResult) -> CheckResult {
    let sigma = lab.sigma();
    if !lab.base_lc {
        return r.skip("pmf is not log-concave");
    }
    if !theorem1_precondition(n as u32, sigma) {
        return r.skip(format!("needs sigma > max(2^(n+2), 3^7)/sqrt(n), got {sigma}"));
    }
    let s = get!(lab.sum(n), r);
    let sm = get!(lab.smoothed(n), r);
    let h = sm.entropy.value;
    let big_h = s.stats.entropy;
    let cert = sm.entropy.certified_error + s.stats.entropy_error;
    r.judge((h - big_h).abs(), theorem1_rate_value(n as u32, sigma), cert, 0.0)
        .extra("h", h)
        .extra("H", big_h)
}

fn corollary_mono(lab: &mut Lab, n: usize, r: CheckResult) -> CheckResult {
    if !lab.base_lc {
        return r.skip("pmf is not log-concave");
    }
    let a = get!(lab.sum(n), r);
    let b = get!(lab.sum(n + 1), r);
    let target = 0.5 * ((n + 1) as f64 / n as f64).ln();
    let dh = b.stats.entropy - a.stats.entropy;
    let cert = a.stats.entropy_error + b.stats.entropy_error;
    let mut out = r.judge(target, dh, cert, lab.cfg.corollary_eps).extra("D", dh - target);
    if let (Ok(sa), Ok(sb)) = (lab.smoothed(n), lab.smoothed(n + 1)) {
        out = out.extra("E", (dh - (sb.entropy.value - sa.entropy.value)).abs());
    }
    // The inequality is only claimed once H(X_1) reaches the threshold; below
    // it the row is still evaluated and reported.
    let threshold = corollary_threshold(n as u32, lab.cfg.corollary_eps).ok().and_then(|t| t.value);
    let h1 = lab.base_stats.as_ref().map(|s| s.entropy).unwrap_or(f64::NAN);
    if let Some(t) = threshold {
        out = out.extra("threshold", t);
        if !(h1 >= t) {
            if out.is_fail() {
                out.status = Status::PreconditionSkip;
                out.note = "fails below the H(X_1) threshold".into();
            } else {
                out.note = "pass-beyond-claim".into();
            }
        }
    }
    out
}

fn epi(lab: &mut Lab, n: usize, r: CheckResult) -> CheckResult {
    let a = get!(lab.smoothed(n), r);
    let b = get!(lab.smoothed(n + 1), r);
    let nf = n as f64;
    let lhs = a.entropy.value - 0.5 * nf.ln();
    let rhs = b.entropy.value - 0.5 * (nf + 1.0).ln();
    let cert = a.entropy.certified_error + b.entropy.certified_error + 4.0 * EPS * (lhs.abs() + rhs.abs());
    r.judge(lhs, rhs, cert, lab.cfg.epi_tol)
}

/// Hypothesis shared by the Chebyshev and tail steps: `sqrt(n) sigma > 3^7`
/// with log-concave summands.
fn tail_regime(lab: &Lab, n: usize) -> std::result::Result<f64, String> {
    let sigma = lab.sigma();
    if !lab.base_lc {
        return Err("pmf is not log-concave".into());
    }
    let ev = tail_bound_value(n as u32, sigma);
    match ev.value {
        Some(b) if ev.precondition_met => Ok(b),
        _ => Err(format!("needs sqrt(n) sigma > 3^7, got {}", (n as f64).sqrt() * sigma)),
    }
}

fn cheb_interval(lab: &mut Lab, n: usize, r: CheckResult) -> CheckResult {
    if let Err(m) = tail_regime(lab, n) {
        return r.skip(m);
    }
    let sigma = lab.sigma();
    let ns2 = n as f64 * sigma * sigma;
    let t = 5.0 * ns2;
    let s = get!(lab.sum(n), r);
    let sm = get!(lab.smoothed(n), r);
    let disc = interval_probability(&s.pmf, -t, t);
    let cont = sm.density.probability(-t, t);
    let cert = entry_total(&s.pmf) + 16.0 * EPS;
    r.judge(1.0 - 1.0 / (8.0 * ns2), disc.min(cont), cert, 0.0)
        .extra("p_discrete", disc)
        .extra("p_continuous", cont)
}

fn tails(lab: &mut Lab, n: usize, r: CheckResult) -> CheckResult {
    let bound = match tail_regime(lab, n) {
        Ok(b) => b,
        Err(m) => return r.skip(m),
    };
    let sigma = lab.sigma();
    let t = 5.0 * n as f64 * sigma * sigma;
    let s = get!(lab.sum(n), r);
    let sm = get!(lab.smoothed(n), r);
    let cont = sm.density.entropy_tail(t, lab.cfg.quad_tol);
    let disc = entropy_tail(&s.pmf, t);
    if !(cont.is_finite() && disc.is_finite()) {
        return r.errored("entropy tail has no geometric envelope");
    }
    r.judge((cont / bound).max(disc / (2.0 * bound)), 1.0, 0.0, 0.0)
        .extra("continuous_tail", cont)
        .extra("discrete_tail", disc)
        .extra("bound", bound)
}

fn maxent(lab: &mut Lab, n: usize, r: CheckResult) -> CheckResult {
    let s = get!(lab.sum(n), r);
    let st = &s.stats;
    let v = st.variance + 1.0 / 12.0;
    let cert = st.entropy_error + st.variance_error / (2.0 * v) + 8.0 * EPS;
    r.judge(st.entropy, maxent_bound(st.sigma), cert, 0.0)
}

/// Least-squares slope of `ln |h - H|` against `ln sigma` for one family.
pub fn decay_check(spec: &DecaySpec, cfg: &CheckConfig) -> Result<CheckResult> {
    spec.validate()?;
    let start = Instant::now();
    let family = crate::pmf::Family::from_name(&spec.family)?;
    let params = spec.sigmas.iter().map(|s| format!("{s}")).collect::<Vec<_>>().join(",");
    let r = CheckResult::new(CheckId::Theorem1Decay, family.name(), &format!("sigma={params}"), spec.n, f64::NAN);
    let points: Vec<Result<(f64, f64, f64)>> = spec
        .sigmas
        .par_iter()
        .map(|&sigma| {
            let fs = FamilySpec::with_sigma(family, sigma)?;
            let mut lab = Lab::new(Source::family(&fs, cfg.tail_tol)?, cfg.clone());
            let s = lab.sum(spec.n).map_err(avail_error)?;
            let sm = lab.smoothed(spec.n).map_err(avail_error)?;
            let gap = (sm.entropy.value - s.stats.entropy).abs();
            Ok((lab.sigma(), gap, sm.entropy.certified_error + s.stats.entropy_error))
        })
        .collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut dys = Vec::new();
    let mut out = r;
    for (p, &target) in points.into_iter().zip(&spec.sigmas) {
        let (sigma, gap, err) = match p {
            Ok(v) => v,
            Err(e) => {
                let mut out = out.errored(format!("sigma {target}: {e}"));
                out.runtime = start.elapsed();
                return Ok(out);
            }
        };
        out = out.extra(format!("gap_sigma_{target}"), gap);
        xs.push(sigma.ln());
        ys.push(gap.ln());
        dys.push(if err < gap { -(-err / gap).ln_1p() } else { f64::INFINITY });
    }
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let slope_err: f64 = xs.iter().zip(&dys).map(|(x, d)| (x - xbar).abs() * d).sum::<f64>() / sxx;
    let lo = spec.slope_min.unwrap_or(f64::NEG_INFINITY);
    let hi = spec.slope_max.unwrap_or(f64::INFINITY);
    let mut out = out.judge_range(slope, lo, hi, slope_err, 0.0);
    out.runtime = start.elapsed();
    Ok(out)
}

fn avail_error(u: Unavailable) -> Error {
    match u {
        Unavailable::Skip(m) => Error::Precondition(m),
        Unavailable::Failed(m) => Error::InvalidParameter(m),
    }
}

const APPENDIX_CHUNK: usize = 65_536;

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Draws `(a, b, mu, D, M)` within the lemma's hypotheses, mixing uniform
/// draws with points near the `mu/M` regime boundary and the degenerate
/// cases `a = b` and `a = 0`.
fn appendix_sample(rng: &mut ChaCha8Rng) -> [f64; 5] {
    let d = log_uniform(rng, 1.0, 1e4);
    let m = log_uniform(rng, 1.0, 1e4);
    let mu = log_uniform(rng, 1e-12, (-1.0f64).exp());
    let top = d / m;
    let near = |rng: &mut ChaCha8Rng| ((mu / m) * 10f64.powf(rng.gen_range(-3.0..3.0))).min(top);
    let (a, b) = match rng.gen_range(0..8) {
        0..=2 => (rng.gen_range(0.0..=top), rng.gen_range(0.0..=top)),
        3 | 4 => (near(rng), near(rng)),
        5 => (near(rng), rng.gen_range(0.0..=top)),
        6 => {
            let a = rng.gen_range(0.0..=top);
            (a, a)
        }
        _ => (0.0, if rng.gen_bool(0.5) { near(rng) } else { rng.gen_range(0.0..=top) }),
    };
    [a, b, mu, d, m]
}

/// Randomised sweep of the elementary `x log x` increment estimate. The row
/// reports the sample with the smallest margin.
pub fn appendix_sweep(samples: usize, seed: u64) -> CheckResult {
    let start = Instant::now();
    let chunks = samples.div_ceil(APPENDIX_CHUNK);
    let per_chunk: Vec<(f64, [f64; 5], f64, f64, usize, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = APPENDIX_CHUNK.min(samples - c * APPENDIX_CHUNK);
            let mut worst = (f64::INFINITY, [0.0; 5], 0.0, 0.0);
            let (mut violations, mut rejected) = (0, 0);
            for _ in 0..count {
                let x = appendix_sample(&mut rng);
                let Ok(est) = appendix_estimate(x[0], x[1], x[2], x[3], x[4]) else {
                    rejected += 1;
                    continue;
                };
                let margin = est.rhs - est.lhs;
                if margin + 8.0 * EPS * (est.lhs + est.rhs) < 0.0 {
                    violations += 1;
                }
                if margin < worst.0 {
                    worst = (margin, x, est.lhs, est.rhs);
                }
            }
            (worst.0, worst.1, worst.2, worst.3, violations, rejected)
        })
        .collect();
    let mut worst = (f64::INFINITY, [0.0; 5], 0.0, 0.0);
    let (mut violations, mut rejected) = (0, 0);
    for (m, x, l, rr, v, rej) in per_chunk {
        violations += v;
        rejected += rej;
        if m < worst.0 {
            worst = (m, x, l, rr);
        }
    }
    let r = CheckResult::new(CheckId::AppendixA, "appendix", &format!("samples={samples};seed={seed}"), 0, f64::NAN);
    let mut out = if samples == 0 || rejected == samples {
        r.skip("no valid samples")
    } else {
        let (_, x, lhs, rhs) = worst;
        r.judge(lhs, rhs, 8.0 * EPS * (lhs + rhs), 0.0)
            .extra("a", x[0])
            .extra("b", x[1])
            .extra("mu", x[2])
            .extra("D", x[3])
            .extra("M", x[4])
    };
    out = out.extra("violations", violations as f64).extra("rejected", rejected as f64);
    if violations > 0 {
        out.status = Status::Fail;
    }
    out.runtime = start.elapsed();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::Family;
    use crate::verify::Status;

    fn lab_for(name: &str, params: &[f64]) -> Lab {
        let spec = FamilySpec::from_name(name, params).unwrap();
        Lab::new(Source::family(&spec, 1e-15).unwrap(), CheckConfig::default())
    }

    #[test]
    fn prop3ii_geometric_half() {
        let mut lab = lab_for("geometric", &[0.5]);
        let r = check(&mut lab, CheckId::Prop3ii, 1);
        assert_eq!(r.status, Status::Pass);
        assert!((r.lhs - 0.5).abs() < 1e-14 && (r.rhs - 0.5).abs() < 1e-14);
    }

    #[test]
    fn theorem1_below_threshold_skips() {
        let spec = FamilySpec::with_sigma(Family::Geometric, 100.0).unwrap();
        let mut lab = Lab::new(Source::family(&spec, 1e-15).unwrap(), CheckConfig::default());
        assert_eq!(check(&mut lab, CheckId::Theorem1, 2).status, Status::PreconditionSkip);
    }

    #[test]
    fn identities_on_small_families() {
        for (name, params) in [("poisson", vec![3.0]), ("binomial", vec![12.0, 0.3]), ("uniform", vec![5.0])] {
            let mut lab = lab_for(name, &params);
            for n in 1..=3 {
                for id in [CheckId::Prop1TvQ, CheckId::Prop3i, CheckId::Prop3ii, CheckId::Maxent, CheckId::EpiSmoothed] {
                    let r = check(&mut lab, id, n);
                    assert_eq!(r.status, Status::Pass, "{name} {id} n={n}: {r:?}");
                }
            }
        }
    }

    #[test]
    fn corollary_geometric_sigma_100() {
        let spec = FamilySpec::with_sigma(Family::Geometric, 100.0).unwrap();
        let mut lab = Lab::new(Source::family(&spec, 1e-15).unwrap(), CheckConfig::default());
        let r = check(&mut lab, CheckId::CorollaryMono, 1);
        assert_eq!(r.status, Status::Pass);
        assert!(r.margin > -1e-2);
    }

    #[test]
    fn non_log_concave_pmf_skips_lemma2() {
        let p = IntegerPmf::from_weights(0, vec![0.4, 0.1, 0.4, 0.1], 0.0).unwrap();
        let mut lab = Lab::new(Source::custom("custom", "", p), CheckConfig::default());
        assert_eq!(check(&mut lab, CheckId::Lemma2, 2).status, Status::PreconditionSkip);
    }

    #[test]
    fn lemma3_poisson_100() {
        let mut lab = lab_for("poisson", &[100.0]);
        let r = check(&mut lab, CheckId::Lemma3, 1);
        assert_eq!(r.status, Status::Pass);
        assert_eq!(r.note, "pass-beyond-claim");
        assert_eq!(r.get_extra("n0_right"), Some(101.0));
    }

    #[test]
    fn pair_checks() {
        let a = IntegerPmf::from_weights(0, vec![0.5, 0.5], 0.0).unwrap();
        let b = IntegerPmf::from_weights(3, vec![0.2, 0.5, 0.3], 0.0).unwrap();
        let mut lab = Lab::new(Source::pair("pair", "", a, b), CheckConfig::default());
        for id in [CheckId::QMonotone, CheckId::LcClosure] {
            assert_eq!(check(&mut lab, id, 1).status, Status::Pass);
        }
        assert_eq!(check(&mut lab, CheckId::Prop3i, 1).status, Status::PreconditionSkip);
    }

    #[test]
    fn appendix_small_sweep_is_deterministic() {
        let a = appendix_sweep(100_000, 7);
        let b = appendix_sweep(100_000, 7);
        assert_eq!(a.status, Status::Pass);
        assert_eq!(a.lhs, b.lhs);
        assert_eq!(a.get_extra("violations"), Some(0.0));
    }
}
