//! Density of `U_1 + ... + U_n` for i.i.d. uniforms on `[0, 1]`.
//!
//! Piece `m` is the polynomial `t -> f_n(m + t)` on `[0, 1]`. Pieces are
//! built with exact rational arithmetic from the recursion
//! `f_{n+1}(m + t) = int_t^1 f_n(m - 1 + s) ds + int_0^t f_n(m + s) ds`
//! and rounded to `f64` once at the end.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::poly::horner;
use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 16;

type Poly = Vec<BigRational>;

fn antiderivative(p: &[BigRational]) -> Poly {
    let mut out = vec![BigRational::zero()];
    for (i, a) in p.iter().enumerate() {
        out.push(a / BigRational::from_integer(BigInt::from(i + 1)));
    }
    out
}

fn at_one(p: &[BigRational]) -> BigRational {
    p.iter().fold(BigRational::zero(), |acc, a| acc + a)
}

/// Exact rational coefficients of every piece of the order-`n` density.
pub fn irwin_hall_exact(n: usize) -> Result<Vec<Vec<BigRational>>> {
    if n == 0 || n > MAX_ORDER {
        return Err(Error::invalid(format!("smoothing order must be in 1..={MAX_ORDER}, got {n}")));
    }
    let mut pieces: Vec<Poly> = vec![vec![BigRational::one()]];
    for order in 1..n {
        let antis: Vec<Poly> = pieces.iter().map(|p| antiderivative(p)).collect();
        let mut next = Vec::with_capacity(order + 1);
        for m in 0..=order {
            let mut poly = vec![BigRational::zero(); order + 1];
            if m < order {
                for (i, a) in antis[m].iter().enumerate() {
                    poly[i] += a;
                }
            }
            if m >= 1 {
                let prev = &antis[m - 1];
                poly[0] += at_one(prev);
                for (i, a) in prev.iter().enumerate() {
                    poly[i] -= a;
                }
            }
            next.push(poly);
        }
        pieces = next;
    }
    Ok(pieces)
}

/// `f64` piecewise-polynomial form of the order-`n` density.
#[derive(Debug, Clone, PartialEq)]
pub struct IrwinHall {
    order: usize,
    pieces: Vec<Vec<f64>>,
}

impl IrwinHall {
    pub fn new(n: usize) -> Result<Self> {
        let exact = irwin_hall_exact(n)?;
        let pieces = exact
            .iter()
            .map(|p| p.iter().map(|a| a.to_f64().unwrap_or(f64::NAN)).collect())
            .collect();
        Ok(Self { order: n, pieces })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Coefficients of `t -> f_n(m + t)`, lowest degree first.
    pub fn piece(&self, m: usize) -> &[f64] {
        &self.pieces[m]
    }

    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    pub fn eval_piece(&self, m: usize, t: f64) -> f64 {
        horner(&self.pieces[m], t)
    }

    /// Density at `x`; zero outside `[0, n]`.
    pub fn density(&self, x: f64) -> f64 {
        if !(x >= 0.0 && x <= self.order as f64) {
            return 0.0;
        }
        let m = (x.floor() as usize).min(self.order - 1);
        self.eval_piece(m, x - m as f64)
    }
}

/// Convenience constructor mirroring [`IrwinHall::new`].
pub fn irwin_hall(n: usize) -> Result<IrwinHall> {
    IrwinHall::new(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_two_is_triangle() {
        let ih = irwin_hall(2).unwrap();
        assert_eq!(ih.piece(0), &[0.0, 1.0]);
        assert_eq!(ih.piece(1), &[1.0, -1.0]);
        assert_eq!(ih.density(1.0), 1.0);
        assert_eq!(ih.density(2.5), 0.0);
    }

    #[test]
    fn order_three_centre() {
        let ih = irwin_hall(3).unwrap();
        assert!((ih.density(1.5) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn pieces_integrate_to_one() {
        for n in 1..=MAX_ORDER {
            let exact = irwin_hall_exact(n).unwrap();
            let mut total = BigRational::zero();
            for p in &exact {
                total += at_one(&antiderivative(p));
            }
            assert!(total.is_one(), "order {n}");
        }
    }

    #[test]
    fn rejects_out_of_range_order() {
        assert!(irwin_hall(0).is_err());
        assert!(irwin_hall(MAX_ORDER + 1).is_err());
    }
}
