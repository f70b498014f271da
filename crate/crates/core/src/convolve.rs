//! Convolution of integer pmfs with propagated error bounds.

use rayon::prelude::*;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pmf::{is_log_concave, IntegerPmf, Provenance, TailCert, DEFAULT_MAX_WINDOW};
use crate::sum::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Fft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Direct,
    Fft,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolveConfig {
    /// Largest output length accepted by the direct method.
    pub direct_cap: usize,
    /// `Auto` uses the direct method when `len1 * len2` is at most this.
    pub auto_direct_work: f64,
    /// Target for the mass dropped when trimming infinite tails.
    pub tail_tol: f64,
    /// Tail target for family operands and intermediate powers in
    /// [`self_convolve`]; only the final power is trimmed to `tail_tol`.
    pub inner_tail_tol: f64,
    pub max_window: usize,
}

impl Default for ConvolveConfig {
    fn default() -> Self {
        Self {
            direct_cap: 200_000,
            auto_direct_work: 5.0e7,
            tail_tol: 1e-15,
            inner_tail_tol: 1e-27,
            max_window: DEFAULT_MAX_WINDOW,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvolutionReport {
    pub result: IntegerPmf,
    pub method: Method,
    /// Bound on `|stored - true|` over the result window.
    pub max_abs_error_bound: f64,
    /// Mass of the operands outside their windows, carried into the result.
    pub operand_tail_carry: f64,
    /// Log-concavity of the stored result (relative tolerance 1e-9).
    pub log_concave: bool,
}

fn lc_operand(p: &IntegerPmf) -> bool {
    p.known_log_concave() || is_log_concave(p, 0.0).log_concave
}

fn raw_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let mut c = vec![0.0; out_len];
    c.par_chunks_mut(1024).enumerate().for_each(|(chunk, out)| {
        for (j, slot) in out.iter_mut().enumerate() {
            let k = chunk * 1024 + j;
            let lo = k.saturating_sub(b.len() - 1);
            let hi = k.min(a.len() - 1);
            let mut s = NeumaierSum::new();
            for i in lo..=hi {
                s.add(a[i] * b[k - i]);
            }
            *slot = s.value();
        }
    });
    c
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).collect::<NeumaierSum>().value().sqrt()
}

/// One FFT product of exponentially tilted operands. Returns the estimate of
/// `c` and an entrywise bound on its rounding error.
fn tilted_product(a: &[f64], b: &[f64], theta: f64, plan: &FftPlan) -> (Vec<f64>, Vec<f64>) {
    let tilt = |x: &[f64]| -> (Vec<f64>, f64) {
        let m = x
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, &v)| v.ln() + theta * i as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        let t = x.iter().enumerate().map(|(i, &v)| if v > 0.0 { (v.ln() + theta * i as f64 - m).exp() } else { 0.0 });
        (t.collect(), m)
    };
    let (at, ma) = tilt(a);
    let (bt, mb) = tilt(b);
    let ct = plan.product(&at, &bt);
    let noise = norm2(&at) * norm2(&bt) * plan.eta();
    let mut c = Vec::with_capacity(ct.len());
    let mut e = Vec::with_capacity(ct.len());
    for (k, &v) in ct.iter().enumerate() {
        let s = (ma + mb - theta * k as f64).exp();
        let val = v * s;
        c.push(val);
        // Tilting and untilting add a few roundings per term, all of one sign.
        e.push(noise * s + 8.0 * f64::EPSILON * (val.abs() + noise * s));
    }
    (c, e)
}

struct FftPlan {
    n: usize,
    r2c: std::sync::Arc<dyn realfft::RealToComplex<f64>>,
    c2r: std::sync::Arc<dyn realfft::ComplexToReal<f64>>,
}

impl FftPlan {
    fn new(out_len: usize) -> Self {
        let n = out_len.next_power_of_two().max(2);
        let mut planner = RealFftPlanner::<f64>::new();
        Self { n, r2c: planner.plan_fft_forward(n), c2r: planner.plan_fft_inverse(n) }
    }

    fn eta(&self) -> f64 {
        (8.0 * (self.n as f64).log2() + 8.0) * f64::EPSILON
    }

    fn product(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let out_len = a.len() + b.len() - 1;
        let mut buf = self.r2c.make_input_vec();
        let mut sa = self.r2c.make_output_vec();
        let mut sb = self.r2c.make_output_vec();
        buf[..a.len()].copy_from_slice(a);
        self.r2c.process(&mut buf, &mut sa).expect("buffer sizes come from the plan");
        buf.iter_mut().for_each(|v| *v = 0.0);
        buf[..b.len()].copy_from_slice(b);
        self.r2c.process(&mut buf, &mut sb).expect("buffer sizes come from the plan");
        for (x, y) in sa.iter_mut().zip(&sb) {
            *x *= *y;
        }
        sa[0].im = 0.0;
        if let Some(last) = sa.last_mut() {
            last.im = 0.0;
        }
        let mut out = self.c2r.make_output_vec();
        self.c2r.process(&mut sa, &mut out).expect("buffer sizes come from the plan");
        let scale = 1.0 / self.n as f64;
        out.truncate(out_len);
        out.iter_mut().for_each(|v| *v *= scale);
        out
    }
}

/// Entries whose bound is within this fraction of their value count as
/// resolved when choosing the next tilt.
const RESOLVED: f64 = 1e-6;
const MAX_TILTS_PER_SIDE: usize = 6;

/// Linear convolution by FFT with an entrywise error bound. The plain product
/// only resolves entries down to about `eps * max`; the tails are recovered
/// from products of exponentially tilted operands, keeping for each entry the
/// estimate with the smallest bound.
fn raw_fft(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let plan = FftPlan::new(a.len() + b.len() - 1);
    let (mut c, mut e) = tilted_product(a, b, 0.0, &plan);
    let n = c.len();
    for right in [false, true] {
        let mut reach = None;
        for _ in 0..MAX_TILTS_PER_SIDE {
            let imax = (0..n).max_by(|&i, &j| c[i].total_cmp(&c[j])).unwrap_or(0);
            let ok = |k: usize| c[k] > 0.0 && e[k] <= RESOLVED * c[k];
            // Outermost resolved entry reached contiguously from the peak.
            let mut k = imax;
            if right {
                while k + 1 < n && ok(k + 1) {
                    k += 1;
                }
            } else {
                while k > 0 && ok(k - 1) {
                    k -= 1;
                }
            }
            let inner = if right { k.checked_sub(1) } else { Some(k + 1).filter(|&i| i < n) };
            let done = if right { k + 1 == n } else { k == 0 };
            let Some(inner) = inner else { break };
            if done || reach == Some(k) || !ok(inner) {
                break;
            }
            reach = Some(k);
            // Log-slope at the frontier; tilting by its negative flattens the
            // sequence there.
            let theta = if right { (c[inner] / c[k]).ln() } else { -(c[inner] / c[k]).ln() };
            if !theta.is_finite() || theta == 0.0 {
                break;
            }
            let (ct, et) = tilted_product(a, b, theta, &plan);
            for i in 0..n {
                if et[i] < e[i] {
                    c[i] = ct[i];
                    e[i] = et[i];
                }
            }
        }
    }
    (c, e)
}

/// Splits an entrywise bound into the `abs + rel * w` form, minimising
/// `ABS_WEIGHT * len * abs + rel`. A uniform term is charged against every
/// tail entry (and stops the next convolution from certifying its tails), so
/// it is weighted well above the relative one.
const ABS_WEIGHT: f64 = 1e3;

fn fit_error(c: &[f64], e: &[f64]) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for j in -1..=60 {
        let rel = if j < 0 { 0.0 } else { 3.0 * f64::EPSILON * 2f64.powi(j) };
        let abs = c.iter().zip(e).map(|(&w, &err)| (err - rel * w.max(0.0)).max(0.0)).fold(0.0, f64::max);
        let score = ABS_WEIGHT * c.len() as f64 * abs + rel;
        if score < best.0 {
            best = (score, abs, rel);
        }
    }
    (best.1, best.2)
}

/// Position (inclusive, in `0..c.len()`) of the outermost kept entry on one
/// side, together with the envelope for everything beyond it.
fn trim_edge(c: &[f64], err: &[f64], right: bool, tail_tol: f64) -> Option<(usize, f64, f64)> {
    let n = c.len();
    if n < 2 {
        return None;
    }
    let cmax = c.iter().copied().fold(0.0, f64::max);
    let imax = c.iter().position(|&x| x == cmax).unwrap_or(0);
    // (index, bound on mass beyond index, ratio)
    let mut cands: Vec<(usize, f64, f64)> = Vec::new();
    let idx: Box<dyn Iterator<Item = usize>> =
        if right { Box::new((imax + 1..n).rev()) } else { Box::new(0..imax) };
    for k in idx {
        let inner = if right { k - 1 } else { k + 1 };
        let lower = c[inner] - err[inner];
        if c[k] > 1e-3 * cmax {
            break;
        }
        if lower <= 0.0 {
            continue;
        }
        let p_up = c[k] + err[k];
        let r = p_up / lower;
        if r >= 1.0 {
            continue;
        }
        cands.push((k, p_up * r / (1.0 - r), r));
    }
    let best = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let threshold = best.max(tail_tol / 2.0);
    // Candidates were collected from the outside in; the last qualifying one
    // is the innermost.
    cands.into_iter().rev().find(|c| c.1 <= threshold)
}

/// Adds to `err` the contribution of the mass of `a` outside its window,
/// convolved with the stored part of `b`. Sides with a geometric envelope are
/// filtered exactly; other sides add their mass times the peak of `b`.
fn add_tail_spill(err: &mut [f64], a: &IntegerPmf, b: &IntegerPmf) {
    let n = err.len();
    let la = a.len();
    let upper = |j: isize| -> f64 {
        if j >= 0 && (j as usize) < b.len() {
            let w = b.weights()[j as usize];
            w + b.entry_error(w)
        } else {
            0.0
        }
    };
    let edge = |i: usize| a.weights()[i] + a.entry_error(a.weights()[i]);
    for right in [false, true] {
        let cert = if right { a.right_tail() } else { a.left_tail() };
        if cert.is_finite_side() {
            continue;
        }
        if !cert.has_envelope() {
            let flat = cert.mass * (b.pmax() + b.max_entry_error());
            err.iter_mut().for_each(|e| *e += flat);
            continue;
        }
        let r = cert.ratio;
        if right {
            // u_k = sum_{d>=1} P r^d b(k - la + 1 - d)
            let amp = edge(la - 1) * r;
            let mut u = 0.0;
            for (k, e) in err.iter_mut().enumerate() {
                u = r * u + amp * upper(k as isize - la as isize);
                *e += u;
            }
        } else {
            // v_k = sum_{d>=1} P r^d b(k + d)
            let amp = edge(0) * r;
            let mut v = 0.0;
            for k in (0..n).rev() {
                v = r * v + amp * upper(k as isize + 1);
                err[k] += v;
            }
        }
    }
}

/// Trims a log-concave pmf further, down to the innermost edges whose
/// envelopes still meet `tail_tol`.
fn retrim(p: &mut IntegerPmf, tail_tol: f64) {
    if !p.known_log_concave() || p.len() < 2 {
        return;
    }
    let err: Vec<f64> = p.weights.iter().map(|&w| p.entry_error(w)).collect();
    let mut lo = 0;
    let mut hi = p.len() - 1;
    if !p.left_tail.is_finite_side() {
        if let Some((k, mass, ratio)) = trim_edge(&p.weights, &err, false, tail_tol) {
            if mass <= tail_tol / 2.0 {
                lo = k;
                p.left_tail = TailCert { mass, ratio };
            }
        }
    }
    if !p.right_tail.is_finite_side() {
        if let Some((k, mass, ratio)) = trim_edge(&p.weights, &err, true, tail_tol) {
            if mass <= tail_tol / 2.0 {
                hi = k;
                p.right_tail = TailCert { mass, ratio };
            }
        }
    }
    if lo >= hi || (lo == 0 && hi == p.len() - 1) {
        return;
    }
    p.weights.truncate(hi + 1);
    p.weights.drain(..lo);
    p.log_weights.truncate(hi + 1);
    p.log_weights.drain(..lo);
    p.offset += lo as i64;
}

struct Raw {
    c: Vec<f64>,
    method: Method,
    /// Entrywise bound on the arithmetic error of `c`.
    err: Vec<f64>,
}

fn finish(raw: Raw, p1: &IntegerPmf, p2: &IntegerPmf, cfg: &ConvolveConfig) -> Result<ConvolutionReport> {
    let Raw { mut c, method, err: method_err } = raw;
    let mut clamp = 0.0;
    for v in c.iter_mut() {
        if *v < 0.0 {
            clamp += -*v;
            *v = 0.0;
        }
    }
    let (t1, t2) = (p1.tail_mass_bound(), p2.tail_mass_bound());
    let op_abs = clamp
        + p1.abs_error()
        + p2.abs_error()
        + p1.abs_error() * p2.abs_error() * p1.len().min(p2.len()) as f64
        + t1 * t2
        + p1.carry() * (p2.pmax() + p2.max_entry_error())
        + p2.carry() * (p1.pmax() + p1.max_entry_error());
    let op_rel = p1.rel_error() + p2.rel_error() + p1.rel_error() * p2.rel_error();
    let mut err: Vec<f64> = c.iter().zip(&method_err).map(|(&w, &e)| e + op_abs + op_rel * w).collect();
    add_tail_spill(&mut err, p1, p2);
    add_tail_spill(&mut err, p2, p1);

    let lc = lc_operand(p1) && lc_operand(p2);
    let side = |right: bool| -> (TailCert, TailCert) {
        if right {
            (p1.right_tail(), p2.right_tail())
        } else {
            (p1.left_tail(), p2.left_tail())
        }
    };

    let mut lo = 0usize;
    let mut hi = c.len() - 1;
    let mut certs = [TailCert::FINITE; 2];
    for (s, right) in [(0usize, false), (1usize, true)] {
        let (a, b) = side(right);
        if a.is_finite_side() && b.is_finite_side() {
            continue;
        }
        let fallback = TailCert::unknown(a.mass + b.mass);
        let found = if lc { trim_edge(&c, &err, right, cfg.tail_tol) } else { None };
        match found {
            Some((k, mass, ratio)) => {
                            certs[s] = TailCert { mass, ratio };
                if right {
                    hi = k;
                } else {
                    lo = k;
                }
            }
            None => certs[s] = fallback,
        }
    }
    if lo > hi {
        lo = hi;
    }
    c.truncate(hi + 1);
    c.drain(..lo);
    let (abs, rel) = fit_error(&c, &err[lo..=hi]);
    if c.len() > cfg.max_window {
        return Err(Error::WindowCap { requested: c.len(), cap: cfg.max_window });
    }

    // Deficit not attributed to either envelope: operand tails, plus any
    // shortfall from trimming or clamping.
    let stored: f64 = c.iter().copied().collect::<NeumaierSum>().value();
    let env = certs[0].mass + certs[1].mass;
    // With certified envelopes on both sides every unstored part of the true
    // convolution is either in the entry bounds or past an envelope.
    let enveloped = certs.iter().all(|c| c.has_envelope());
    let carry = if enveloped { (1.0 - stored - env).max(0.0) } else { (t1 + t2).max(1.0 - stored - env) };

    let log_weights: Vec<f64> = c.iter().map(|w| w.ln()).collect();
    let result = IntegerPmf {
        offset: p1.offset() + p2.offset() + lo as i64,
        weights: c,
        log_weights,
        left_tail: certs[0],
        right_tail: certs[1],
        carry,
        abs_error: abs,
        rel_error: rel,
        known_log_concave: lc,
        provenance: Provenance::Derived(format!("{} * {}", p1.label(), p2.label())),
    };
    let max_abs_error_bound = result.max_entry_error();
    let log_concave = is_log_concave(&result, 1e-9).log_concave;
    Ok(ConvolutionReport {
        result,
        method,
        max_abs_error_bound,
        operand_tail_carry: t1 + t2,
        log_concave,
    })
}

/// Convolution by compensated direct summation.
pub fn convolve_direct(p1: &IntegerPmf, p2: &IntegerPmf, cfg: &ConvolveConfig) -> Result<ConvolutionReport> {
    let out_len = p1.len() + p2.len() - 1;
    if out_len > cfg.direct_cap {
        return Err(Error::DirectCapExceeded { requested: out_len, cap: cfg.direct_cap });
    }
    let c = raw_direct(p1.weights(), p2.weights());
    // Products are exact to half an ulp and compensated sums to about two.
    let err = c.iter().map(|w| 3.0 * f64::EPSILON * w.abs()).collect();
    let raw = Raw { c, method: Method::Direct, err };
    finish(raw, p1, p2, cfg)
}

/// Convolution by real FFT at the next power of two.
pub fn convolve_fft(p1: &IntegerPmf, p2: &IntegerPmf, cfg: &ConvolveConfig) -> Result<ConvolutionReport> {
    let out_len = p1.len() + p2.len() - 1;
    if out_len > cfg.max_window.saturating_mul(2) {
        return Err(Error::WindowCap { requested: out_len, cap: cfg.max_window });
    }
    let (c, err) = raw_fft(p1.weights(), p2.weights());
    let raw = Raw { c, method: Method::Fft, err };
    finish(raw, p1, p2, cfg)
}

pub fn convolve(p1: &IntegerPmf, p2: &IntegerPmf, tier: Tier, cfg: &ConvolveConfig) -> Result<ConvolutionReport> {
    match tier {
        Tier::Direct => convolve_direct(p1, p2, cfg),
        Tier::Fft => convolve_fft(p1, p2, cfg),
        Tier::Auto => {
            let work = p1.len() as f64 * p2.len() as f64;
            if work <= cfg.auto_direct_work && p1.len() + p2.len() - 1 <= cfg.direct_cap {
                convolve_direct(p1, p2, cfg)
            } else {
                convolve_fft(p1, p2, cfg)
            }
        }
    }
}

/// Law of `X_1 + ... + X_n` for i.i.d. copies of `p`, by binary powering.
pub fn self_convolve(p: &IntegerPmf, n: usize, tier: Tier, cfg: &ConvolveConfig) -> Result<ConvolutionReport> {
    if n == 0 {
        return Err(Error::invalid("number of summands must be at least 1"));
    }
    let label = p.label();
    let tail_tol = cfg.tail_tol;
    if n == 1 {
        return Ok(ConvolutionReport {
            result: p.clone(),
            method: Method::Direct,
            max_abs_error_bound: p.max_entry_error(),
            operand_tail_carry: 0.0,
            log_concave: is_log_concave(p, 1e-9).log_concave,
        });
    }
    let inner = ConvolveConfig { tail_tol: cfg.inner_tail_tol.min(cfg.tail_tol), ..*cfg };
    let cfg = &inner;
    let mut acc: Option<ConvolutionReport> = None;
    // A family member is re-evaluated further into its tails so that its
    // envelopes do not dominate the tails of the sum.
    let mut base = match p.provenance() {
        Provenance::Family(spec) => spec.build(cfg.tail_tol).unwrap_or_else(|_| p.clone()),
        _ => p.clone(),
    };
    let mut k = n;
    let mut method = Method::Direct;
    loop {
        if k & 1 == 1 {
            acc = Some(match acc {
                None => ConvolutionReport {
                    result: base.clone(),
                    method: Method::Direct,
                    max_abs_error_bound: base.max_entry_error(),
                    operand_tail_carry: 0.0,
                    log_concave: true,
                },
                Some(prev) => {
                    let r = convolve(&prev.result, &base, tier, cfg)?;
                    if r.method == Method::Fft {
                        method = Method::Fft;
                    }
                    r
                }
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        let sq = convolve(&base, &base, tier, cfg)?;
        if sq.method == Method::Fft {
            method = Method::Fft;
        }
        base = sq.result;
    }
    let mut report = acc.expect("n >= 1 sets the accumulator");
    retrim(&mut report.result, tail_tol);
    report.method = method;
    report.result.provenance = Provenance::Derived(format!("{label}^*{n}"));
    report.operand_tail_carry = report.result.carry();
    report.max_abs_error_bound = report.result.max_entry_error();
    report.log_concave = is_log_concave(&report.result, 1e-9).log_concave;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::{from_family, stats};

    #[test]
    fn bernoulli_sum_is_binomial() {
        let p = from_family("bernoulli", &[0.5], 1e-15).unwrap();
        let r = self_convolve(&p, 3, Tier::Direct, &ConvolveConfig::default()).unwrap();
        assert_eq!(r.result.offset(), 0);
        let expect = [0.125, 0.375, 0.375, 0.125];
        for (w, e) in r.result.weights().iter().zip(expect) {
            assert!((w - e).abs() < 1e-16);
        }
        assert!(r.log_concave);
    }

    #[test]
    fn fft_agrees_with_direct() {
        let cfg = ConvolveConfig::default();
        let p = from_family("poisson", &[40.0], 1e-15).unwrap();
        let q = from_family("negbinomial", &[3.0, 0.1], 1e-15).unwrap();
        let d = convolve_direct(&p, &q, &cfg).unwrap();
        let f = convolve_fft(&p, &q, &cfg).unwrap();
        let lo = d.result.offset().max(f.result.offset());
        let hi = d.result.last().min(f.result.last());
        assert!(hi - lo > 100);
        for k in lo..=hi {
            let diff = (d.result.weight(k) - f.result.weight(k)).abs();
            assert!(diff <= d.max_abs_error_bound + f.max_abs_error_bound, "k={k}");
        }
    }

    #[test]
    fn poisson_sum_is_poisson() {
        let cfg = ConvolveConfig::default();
        let p = from_family("poisson", &[2.5], 1e-15).unwrap();
        let r = self_convolve(&p, 4, Tier::Auto, &cfg).unwrap();
        let exact = from_family("poisson", &[10.0], 1e-15).unwrap();
        for k in exact.support_range() {
            let diff = (r.result.weight(k) - exact.weight(k)).abs();
            assert!(diff <= r.max_abs_error_bound + exact.max_entry_error() + 1e-16, "k={k}: {diff}");
        }
        let st = stats(&r.result).unwrap();
        assert!((st.variance - 10.0).abs() < 1e-10);
        assert!(r.result.tail_mass_bound() < 1e-13);
    }

    #[test]
    fn direct_cap_is_enforced() {
        let cfg = ConvolveConfig { direct_cap: 10, ..Default::default() };
        let p = from_family("uniform", &[8.0], 1e-15).unwrap();
        assert!(matches!(convolve_direct(&p, &p, &cfg), Err(Error::DirectCapExceeded { .. })));
        assert_eq!(convolve(&p, &p, Tier::Auto, &cfg).unwrap().method, Method::Fft);
    }

    #[test]
    fn two_sided_tails_trimmed() {
        let cfg = ConvolveConfig::default();
        let p = from_family("twosided-geometric", &[0.8], 1e-15).unwrap();
        let r = self_convolve(&p, 2, Tier::Fft, &cfg).unwrap();
        assert!(r.result.left_tail().has_envelope());
        assert!(r.result.right_tail().has_envelope());
        assert!(stats(&r.result).is_ok());
    }
}
