//! Densities of `S + U_1 + ... + U_n` for an integer variable `S` and i.i.d.
//! uniforms on `[0, 1]`, and their differential entropy.

mod irwin_hall;
mod poly;
mod quadrature;

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

pub use irwin_hall::{irwin_hall, irwin_hall_exact, IrwinHall, MAX_ORDER};
pub use poly::{derivative, horner, real_roots_in};
pub use quadrature::{gl32, gl64, GaussLegendre};

use crate::error::{Error, Result};
use crate::fmt::sci17;
use crate::pmf::{
    entropy_perturbation, is_log_concave, side_entropy_tail, stats, xlogx_neg, IntegerPmf,
};
use crate::sum::NeumaierSum;

/// Largest recursion depth of the adaptive refinement.
const MAX_DEPTH: u32 = 48;
const CHUNK: usize = 2048;
pub const MIN_TOL: f64 = 1e-12;
pub const MAX_TOL: f64 = 1e-6;

/// `f(first + j + t) = sum_m p(first + j - m) * IH_n(m + t)` on `[0, 1)`.
#[derive(Debug, Clone)]
pub struct SmoothedDensity {
    base: IntegerPmf,
    ih: IrwinHall,
    antis: Vec<Vec<f64>>,
    table32: Vec<Vec<f64>>,
    table64: Vec<Vec<f64>>,
}

pub fn smoothed_density(p: &IntegerPmf, n: usize) -> Result<SmoothedDensity> {
    SmoothedDensity::new(p, n)
}

impl SmoothedDensity {
    pub fn new(p: &IntegerPmf, n: usize) -> Result<Self> {
        let ih = IrwinHall::new(n)?;
        let antis = ih
            .pieces()
            .iter()
            .map(|c| {
                let mut a = vec![0.0];
                a.extend(c.iter().enumerate().map(|(i, x)| x / (i + 1) as f64));
                a
            })
            .collect();
        let table = |rule: &GaussLegendre| -> Vec<Vec<f64>> {
            (0..n).map(|m| rule.nodes().iter().map(|&t| ih.eval_piece(m, t)).collect()).collect()
        };
        let table32 = table(gl32());
        let table64 = table(gl64());
        Ok(Self { base: p.clone(), ih, antis, table32, table64 })
    }

    pub fn base(&self) -> &IntegerPmf {
        &self.base
    }

    pub fn order(&self) -> usize {
        self.ih.order()
    }

    /// Left end of the first unit interval carrying stored mass.
    pub fn first_interval(&self) -> i64 {
        self.base.offset()
    }

    pub fn num_intervals(&self) -> usize {
        self.base.len() + self.order() - 1
    }

    /// Stored weights contributing to interval `j`, ordered by piece index.
    fn interval_weights(&self, j: usize) -> Vec<f64> {
        let w = self.base.weights();
        (0..self.order())
            .map(|m| if j >= m && j - m < w.len() { w[j - m] } else { 0.0 })
            .collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let rel = x - self.first_interval() as f64;
        if !(rel >= 0.0 && rel < self.num_intervals() as f64) {
            return 0.0;
        }
        let j = rel.floor() as usize;
        let t = rel - j as f64;
        let ws = self.interval_weights(j);
        ws.iter().enumerate().map(|(m, &w)| w * self.ih.eval_piece(m, t)).sum()
    }

    pub fn mean(&self) -> Result<f64> {
        Ok(stats(&self.base)?.mean + self.order() as f64 / 2.0)
    }

    pub fn variance(&self) -> Result<f64> {
        Ok(stats(&self.base)?.variance + self.order() as f64 / 12.0)
    }

    /// `int_a^b f(x) dx` over the stored window.
    pub fn probability(&self, a: f64, b: f64) -> f64 {
        if a.is_nan() || b.is_nan() || a >= b {
            return 0.0;
        }
        let x0 = self.first_interval() as f64;
        let lo = (a - x0).max(0.0);
        let hi = (b - x0).min(self.num_intervals() as f64);
        if lo >= hi {
            return 0.0;
        }
        let mut s = NeumaierSum::new();
        let j0 = lo.floor() as usize;
        let j1 = ((hi.ceil() as usize).max(j0 + 1)).min(self.num_intervals());
        for j in j0..j1 {
            let t0 = (lo - j as f64).clamp(0.0, 1.0);
            let t1 = (hi - j as f64).clamp(0.0, 1.0);
            if t1 <= t0 {
                continue;
            }
            for (m, &w) in self.interval_weights(j).iter().enumerate() {
                if w > 0.0 {
                    s.add(w * (horner(&self.antis[m], t1) - horner(&self.antis[m], t0)));
                }
            }
        }
        s.value()
    }

    fn eval_with(&self, ws: &[f64], t: f64) -> f64 {
        let mut f = 0.0;
        for (m, &w) in ws.iter().enumerate() {
            if w > 0.0 {
                f += w * self.ih.eval_piece(m, t);
            }
        }
        f.max(0.0)
    }

    fn rule_on(&self, ws: &[f64], rule: &GaussLegendre, a: f64, b: f64) -> f64 {
        let h = b - a;
        let mut s = 0.0;
        for (x, wq) in rule.nodes().iter().zip(rule.weights()) {
            s += wq * xlogx_neg(self.eval_with(ws, a + h * x));
        }
        s * h
    }

    fn adaptive(&self, ws: &[f64], a: f64, b: f64, tol: f64, depth: u32, refined: &mut usize) -> (f64, f64) {
        let q32 = self.rule_on(ws, gl32(), a, b);
        let q64 = self.rule_on(ws, gl64(), a, b);
        let disc = (q32 - q64).abs();
        if disc <= tol || depth >= MAX_DEPTH {
            return (q64, disc);
        }
        *refined += 1;
        let mid = 0.5 * (a + b);
        let (l, dl) = self.adaptive(ws, a, mid, tol / 2.0, depth + 1, refined);
        let (r, dr) = self.adaptive(ws, mid, b, tol / 2.0, depth + 1, refined);
        (l + r, dl + dr)
    }

    /// Entropy contribution of interval `j` by the tabulated 32/64-point
    /// rules, refined adaptively when they disagree by more than `tol`.
    fn interval_entropy(&self, j: usize, tol: f64) -> IntervalEntropy {
        let ws = self.interval_weights(j);
        let fmax = ws.iter().copied().fold(0.0, f64::max);
        let fmin = ws.iter().copied().fold(f64::INFINITY, f64::min);
        let mut out = IntervalEntropy::default();
        if fmax == 0.0 {
            return out;
        }
        let mut e = self.base.entry_error(fmax);
        let n = self.order();
        let left_edge = j + 1 < n;
        let right_edge = j >= self.base.len();
        if left_edge && !self.base.left_tail().is_finite_side() {
            e += self.base.edge_upper(false) * self.base.left_tail().ratio;
        }
        if right_edge && !self.base.right_tail().is_finite_side() {
            e += self.base.edge_upper(true) * self.base.right_tail().ratio;
        }
        out.perturbation = if e.is_nan() { f64::INFINITY } else { entropy_perturbation(fmin, fmax, e) };
        if fmax < 1e-300 {
            out.disc = xlogx_neg(fmax);
            return out;
        }
        let tab = |table: &[Vec<f64>], rule: &GaussLegendre| -> f64 {
            let mut s = 0.0;
            for (i, wq) in rule.weights().iter().enumerate() {
                let mut f = 0.0;
                for (m, &w) in ws.iter().enumerate() {
                    f += w * table[m][i];
                }
                s += wq * xlogx_neg(f.max(0.0));
            }
            s
        };
        let q32 = tab(&self.table32, gl32());
        let q64 = tab(&self.table64, gl64());
        let disc = (q32 - q64).abs();
        if disc <= tol {
            out.value = q64;
            out.disc = disc;
        } else {
            out.refined = 1;
            let mid_tol = tol / 2.0;
            let (l, dl) = self.adaptive(&ws, 0.0, 0.5, mid_tol, 1, &mut out.refined);
            let (r, dr) = self.adaptive(&ws, 0.5, 1.0, mid_tol, 1, &mut out.refined);
            out.value = l + r;
            out.disc = dl + dr;
        }
        out
    }

    /// Upper bound on `int_{|x| >= threshold} f ln(1/f)`.
    pub fn entropy_tail(&self, threshold: f64, tol: f64) -> f64 {
        let x0 = self.first_interval();
        let mut s = NeumaierSum::new();
        for j in 0..self.num_intervals() {
            let lo = (x0 + j as i64) as f64;
            if lo.abs() >= threshold {
                let ie = self.interval_entropy(j, tol);
                s.add(ie.value.max(0.0) + ie.disc + ie.perturbation);
            }
        }
        s.add(side_entropy_tail(&self.base, false, 1) + side_entropy_tail(&self.base, true, 1));
        s.value()
    }

    /// Monomial coefficients (in `t = x - k`) of the density on `[k, k+1)`.
    pub fn interval_coefficients(&self, j: usize) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.order()];
        for (m, &w) in self.interval_weights(j).iter().enumerate() {
            for (c, a) in coeffs.iter_mut().zip(self.ih.piece(m)) {
                *c += w * a;
            }
        }
        coeffs
    }

    /// Writes one row `k,c0,...,c_{n-1}` per unit interval.
    pub fn write_coefficients_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "k")?;
        for i in 0..self.order() {
            write!(out, ",c{i}")?;
        }
        writeln!(out)?;
        for j in 0..self.num_intervals() {
            write!(out, "{}", self.first_interval() + j as i64)?;
            for c in self.interval_coefficients(j) {
                write!(out, ",{}", sci17(c))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Writes `x,f(x)` rows on a grid of `per_unit` points per unit interval.
    pub fn write_grid_csv<W: Write>(&self, mut out: W, per_unit: usize) -> std::io::Result<()> {
        let per_unit = per_unit.max(1);
        writeln!(out, "x,density")?;
        let x0 = self.first_interval() as f64;
        let total = self.num_intervals() * per_unit;
        for i in 0..=total {
            let x = x0 + i as f64 / per_unit as f64;
            writeln!(out, "{},{}", sci17(x), sci17(self.eval(x)))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct IntervalEntropy {
    value: f64,
    disc: f64,
    perturbation: f64,
    refined: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DifferentialEntropy {
    pub value: f64,
    /// Bound on `|value - h|` covering quadrature, rounding, stored-entry
    /// errors and tails.
    pub certified_error: f64,
    /// Sum of the 32/64-point discrepancies.
    pub quadrature_error: f64,
    /// Whether `certified_error <= tol`.
    pub converged: bool,
    pub refined_intervals: usize,
}

/// Differential entropy `-int f ln f` of the smoothed density.
pub fn differential_entropy(f: &SmoothedDensity, tol: f64) -> Result<DifferentialEntropy> {
    if !(MIN_TOL..=MAX_TOL).contains(&tol) {
        return Err(Error::invalid(format!(
            "quadrature tolerance must lie in [{MIN_TOL:e}, {MAX_TOL:e}], got {tol}"
        )));
    }
    let count = f.num_intervals();
    let local = tol / (2.0 * count as f64);
    let chunks: Vec<(NeumaierSum, f64, f64, f64, usize)> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut value = NeumaierSum::new();
            let (mut disc, mut abs, mut pert, mut refined) = (0.0, 0.0, 0.0, 0usize);
            for j in c * CHUNK..((c + 1) * CHUNK).min(count) {
                let ie = f.interval_entropy(j, local);
                value.add(ie.value);
                disc += ie.disc;
                abs += ie.value.abs();
                pert += ie.perturbation;
                refined += ie.refined;
            }
            (value, disc, abs, pert, refined)
        })
        .collect();
    let mut value = NeumaierSum::new();
    let (mut disc, mut abs, mut pert, mut refined) = (0.0, 0.0, 0.0, 0usize);
    for (v, d, a, p, r) in chunks {
        value.add(v.value());
        disc += d;
        abs += a;
        pert += p;
        refined += r;
    }
    let tails = side_entropy_tail(f.base(), false, 1) + side_entropy_tail(f.base(), true, 1);
    let rounding = (4.0 * f.order() as f64 + 16.0) * f64::EPSILON * abs;
    let certified_error = disc + rounding + pert + tails;
    if !certified_error.is_finite() {
        return Err(Error::UncertifiableTail {
            tail_mass: f.base().tail_mass_bound(),
            reason: "smoothed density has a tail without a geometric envelope".into(),
        });
    }
    Ok(DifferentialEntropy {
        value: value.value(),
        certified_error,
        quadrature_error: disc,
        converged: certified_error <= tol,
        refined_intervals: refined,
    })
}

/// Entropy of `a X` given the entropy `h` of `X`.
pub fn scaled_entropy(h: f64, a: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!("scale must be positive, got {a}")));
    }
    Ok(h + a.ln())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma2Residuals {
    /// Integer whose unit interval carries `residuals[0]`.
    pub first: i64,
    /// `sup_{x in [k, k+1)} |f(x) - p(k)|` per interval.
    pub residuals: Vec<f64>,
    pub total: f64,
    pub certified_error: f64,
    /// `(2^n - 2) / sigma`.
    pub bound: f64,
    pub sigma: f64,
}

/// Per-interval sup-distance between the smoothed density and the step
/// function `x -> p(floor x)`, together with the `(2^n - 2)/sigma` bound.
pub fn lemma2_residuals(p: &IntegerPmf, n: usize) -> Result<Lemma2Residuals> {
    if n < 2 {
        return Err(Error::precondition(format!("needs n >= 2 uniforms, got {n}")));
    }
    if !(p.known_log_concave() || is_log_concave(p, 1e-9).log_concave) {
        return Err(Error::precondition("pmf is not log-concave"));
    }
    let st = stats(p)?;
    if st.sigma < 1.0 {
        return Err(Error::precondition(format!("needs sigma >= 1, got {}", st.sigma)));
    }
    let f = SmoothedDensity::new(p, n)?;
    let w = p.weights();
    let residuals: Vec<f64> = (0..f.num_intervals())
        .into_par_iter()
        .map(|j| {
            let pk = if j < w.len() { w[j] } else { 0.0 };
            let ws = f.interval_weights(j);
            let deltas: Vec<f64> = ws.iter().map(|x| x - pk).collect();
            let mut coeffs = vec![0.0; n];
            for (m, d) in deltas.iter().enumerate() {
                for (c, a) in coeffs.iter_mut().zip(f.ih.piece(m)) {
                    *c += d * a;
                }
            }
            let eval = |t: f64| -> f64 {
                deltas.iter().enumerate().map(|(m, d)| d * f.ih.eval_piece(m, t)).sum::<f64>()
            };
            let mut sup = eval(0.0).abs().max(eval(1.0).abs());
            for t in real_roots_in(&derivative(&coeffs), 0.0, 1.0) {
                sup = sup.max(eval(t).abs());
            }
            sup
        })
        .collect();
    let total = residuals.iter().copied().collect::<NeumaierSum>().value();
    let entry_total: f64 = w.iter().map(|&x| p.entry_error(x)).sum();
    Ok(Lemma2Residuals {
        first: p.offset(),
        total,
        certified_error: 2.0 * n as f64 * (p.tail_mass_bound() + entry_total) + 8.0 * f64::EPSILON * total,
        residuals,
        bound: (2f64.powi(n as i32) - 2.0) / st.sigma,
        sigma: st.sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::{from_family, IntegerPmf};

    #[test]
    fn point_mass_smoothed_twice_is_triangle() {
        let p = from_family("point", &[0.0], 1e-15).unwrap();
        let f = smoothed_density(&p, 2).unwrap();
        let h = differential_entropy(&f, 1e-12).unwrap();
        assert!((h.value - 0.5).abs() < 1e-12, "{}", h.value);
        assert!(h.converged);
        assert!(h.certified_error < 1e-11);
    }

    #[test]
    fn single_uniform_matches_discrete_entropy() {
        let p = from_family("poisson", &[9.0], 1e-15).unwrap();
        let f = smoothed_density(&p, 1).unwrap();
        let h = differential_entropy(&f, 1e-12).unwrap();
        let st = stats(&p).unwrap();
        assert!((h.value - st.entropy).abs() <= h.certified_error + st.entropy_error);
        assert!((h.value - st.entropy).abs() < 1e-12);
    }

    #[test]
    fn probability_and_moments() {
        let p = IntegerPmf::from_weights(0, vec![0.25, 0.5, 0.25], 0.0).unwrap();
        let f = smoothed_density(&p, 3).unwrap();
        assert!((f.probability(f64::NEG_INFINITY, f64::INFINITY) - 1.0).abs() < 1e-15);
        assert!((f.probability(-10.0, 2.5) - 0.5).abs() < 1e-15);
        assert!((f.mean().unwrap() - 2.5).abs() < 1e-15);
        assert!((f.variance().unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn coefficient_export() {
        let p = from_family("point", &[0.0], 1e-15).unwrap();
        let f = smoothed_density(&p, 2).unwrap();
        let mut buf = Vec::new();
        f.write_coefficients_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,c0,c1");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("1,1.0000000000000000e0,-1.0000000000000000e0"));
    }

    #[test]
    fn tolerance_range_enforced() {
        let p = from_family("point", &[0.0], 1e-15).unwrap();
        let f = smoothed_density(&p, 2).unwrap();
        assert!(differential_entropy(&f, 1e-3).is_err());
        assert!(differential_entropy(&f, 1e-13).is_err());
    }

    #[test]
    fn scaled_entropy_adds_log() {
        assert_eq!(scaled_entropy(1.0, 1.0).unwrap(), 1.0);
        assert!((scaled_entropy(0.0, std::f64::consts::E).unwrap() - 1.0).abs() < 1e-16);
        assert!(scaled_entropy(0.0, 0.0).is_err());
    }

    #[test]
    fn two_uniform_residuals_are_successive_differences() {
        let p = from_family("binomial", &[40.0, 0.5], 1e-15).unwrap();
        let r = lemma2_residuals(&p, 2).unwrap();
        let st = stats(&p).unwrap();
        assert!((r.total - 2.0 * (1.0 - st.q)).abs() < 1e-12);
        assert!(r.total <= r.bound);
    }

    #[test]
    fn lemma2_preconditions() {
        let p = from_family("binomial", &[40.0, 0.5], 1e-15).unwrap();
        assert!(matches!(lemma2_residuals(&p, 1), Err(Error::Precondition(_))));
        let narrow = from_family("bernoulli", &[0.5], 1e-15).unwrap();
        assert!(matches!(lemma2_residuals(&narrow, 3), Err(Error::Precondition(_))));
        let bumpy = IntegerPmf::from_weights(0, vec![0.4, 0.1, 0.4, 0.1], 0.0).unwrap();
        assert!(matches!(lemma2_residuals(&bumpy, 2), Err(Error::Precondition(_))));
    }
}
