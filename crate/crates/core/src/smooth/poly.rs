//! Small dense polynomials in monomial form, lowest degree first.

pub fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

pub fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(i, &a)| i as f64 * a).collect()
}

fn trimmed(c: &[f64]) -> &[f64] {
    let mut n = c.len();
    while n > 0 && c[n - 1] == 0.0 {
        n -= 1;
    }
    &c[..n]
}

/// Real roots of `c` in the open interval `(a, b)`, found by isolating
/// between the roots of the derivative and bisecting on sign changes.
pub fn real_roots_in(c: &[f64], a: f64, b: f64) -> Vec<f64> {
    let c = trimmed(c);
    if c.len() <= 1 {
        return Vec::new();
    }
    if c.len() == 2 {
        let r = -c[0] / c[1];
        return if r > a && r < b { vec![r] } else { Vec::new() };
    }
    let mut knots = vec![a];
    knots.extend(real_roots_in(&derivative(c), a, b));
    knots.push(b);
    let mut roots = Vec::new();
    for pair in knots.windows(2) {
        let (mut lo, mut hi) = (pair[0], pair[1]);
        let (mut flo, fhi) = (horner(c, lo), horner(c, hi));
        if flo == 0.0 {
            if lo > a && roots.last() != Some(&lo) {
                roots.push(lo);
            }
            continue;
        }
        if flo.signum() == fhi.signum() || fhi == 0.0 {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = horner(c, mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_roots() {
        // (t - 0.2)(t - 0.5)(t - 0.9)
        let c = [-0.09, 0.73, -1.6, 1.0];
        let r = real_roots_in(&c, 0.0, 1.0);
        assert_eq!(r.len(), 3);
        for (x, e) in r.iter().zip([0.2, 0.5, 0.9]) {
            assert!((x - e).abs() < 1e-12);
        }
    }

    #[test]
    fn double_root_touching() {
        // (t - 0.5)^2 has no sign change but is a critical point of its
        // antiderivative; the derivative root is found.
        let c = [0.25, -1.0, 1.0];
        assert!(real_roots_in(&c, 0.0, 1.0).len() <= 1);
        assert_eq!(real_roots_in(&derivative(&c), 0.0, 1.0), vec![0.5]);
    }
}
