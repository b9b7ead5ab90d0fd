//! Stationary size law of the monomorphic logistic birth-death process.
//!
//! A monomorphic population of size `N` gains an individual at rate `bN`
//! and loses one at rate `N(d + c(N - 1))`, with no deaths at `N = 2`. The
//! stationary weights are `w(N) = (1/N) * prod_{k=2}^{N-1} b / (d + kc)`.

use std::io::Write;

use crate::csv::{fmt_f64, TableWriter};
use crate::error::{invalid, Result};

/// Hard cap on the support size.
pub const MAX_SUPPORT: u32 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryLaw {
    pub b: f64,
    pub d: f64,
    pub c: f64,
    /// `probs[i] = l(i + 2)`.
    probs: Vec<f64>,
    pub tail_mass: f64,
}

fn check_rates(b: f64, d: f64, c: f64) -> Result<()> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(invalid(format!("b must be > 0, got {b}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid(format!("c must be > 0, got {c}")));
    }
    if !(d >= 0.0 && d.is_finite()) {
        return Err(invalid(format!("d must be >= 0, got {d}")));
    }
    Ok(())
}

/// `w(N + 1) / w(N)`.
#[inline]
fn ratio(b: f64, d: f64, c: f64, size: u32) -> f64 {
    let s = f64::from(size);
    s / (s + 1.0) * b / (d + c * s)
}

/// Weights `w(N)` for `N = 2..=upto`, scaled so the largest is 1.
///
/// The recursion starts at the mode and walks outwards, so no intermediate
/// value exceeds 1 and only negligible weights can underflow.
pub(crate) fn scaled_weights(b: f64, d: f64, c: f64, upto: u32) -> Vec<f64> {
    let len = (upto - 1) as usize;
    let mut mode = 2u32;
    while mode < upto && ratio(b, d, c, mode) >= 1.0 {
        mode += 1;
    }
    let mut w = vec![0.0; len];
    let mi = (mode - 2) as usize;
    w[mi] = 1.0;
    for i in (0..mi).rev() {
        w[i] = w[i + 1] / ratio(b, d, c, i as u32 + 2);
    }
    for i in mi + 1..len {
        w[i] = w[i - 1] * ratio(b, d, c, i as u32 + 1);
    }
    w
}

pub fn stationary_law(b: f64, d: f64, c: f64, tol: f64) -> Result<StationaryLaw> {
    check_rates(b, d, c)?;
    if !(tol > 0.0) {
        return Err(invalid(format!("tol must be > 0, got {tol}")));
    }
    // Grow the support until the geometric tail bound w(N) r / (1 - r),
    // r = b / (d + cN), drops below tol times the partial sum.
    let mut upto = 64u32;
    loop {
        let w = scaled_weights(b, d, c, upto);
        let mut sum = 0.0;
        for (i, wi) in w.iter().enumerate() {
            sum += wi;
            let size = i as u32 + 2;
            let r = b / (d + c * f64::from(size));
            if r < 1.0 {
                let bound = wi * r / (1.0 - r);
                if bound < tol * sum {
                    let total = sum + bound;
                    let probs = w[..=i].iter().map(|x| x / total).collect();
                    return Ok(StationaryLaw {
                        b,
                        d,
                        c,
                        probs,
                        tail_mass: bound / total,
                    });
                }
            }
        }
        if upto >= MAX_SUPPORT {
            return Err(invalid(format!(
                "stationary law support exceeds {MAX_SUPPORT} states (b/c too large)"
            )));
        }
        upto = (upto * 2).min(MAX_SUPPORT);
    }
}

impl StationaryLaw {
    /// Largest size in the support.
    pub fn n_max(&self) -> u32 {
        self.probs.len() as u32 + 1
    }

    /// `l(N)`, zero outside `2..=n_max`.
    pub fn prob(&self, size: u32) -> f64 {
        if size < 2 {
            return 0.0;
        }
        self.probs.get((size - 2) as usize).copied().unwrap_or(0.0)
    }

    /// `(N, l(N))` over the support.
    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i as u32 + 2, *p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(n, p)| f64::from(n) * p).sum()
    }

    pub fn mode(&self) -> u32 {
        self.iter()
            .fold(
                (2, 0.0),
                |best, (n, p)| if p > best.1 { (n, p) } else { best },
            )
            .0
    }

    /// Relative residuals of the balance equations: the `N = 2` boundary
    /// equation first, then `N = 3..=n_max - 1`.
    pub fn balance_residuals(&self) -> Vec<(u32, f64)> {
        let (b, d, c) = (self.b, self.d, self.c);
        let l = |n: u32| self.prob(n);
        let mut out = Vec::new();
        let lhs = 2.0 * b * l(2);
        let rhs = 3.0 * (d + 2.0 * c) * l(3);
        out.push((2, rel(lhs, rhs)));
        for size in 3..self.n_max() {
            let s = f64::from(size);
            let lhs = b * (s - 1.0) * l(size - 1) + (d + c * s) * (s + 1.0) * l(size + 1);
            let rhs = s * (b + d + c * (s - 1.0)) * l(size);
            out.push((size, rel(lhs, rhs)));
        }
        out
    }

    pub fn max_balance_residual(&self) -> f64 {
        self.balance_residuals()
            .iter()
            .fold(0.0, |m, (_, r)| m.max(*r))
    }

    pub fn write_csv<W: Write>(&self, out: W, comments: &[String]) -> Result<()> {
        let mut w = TableWriter::new(out, comments, &["N", "prob"])?;
        for (n, p) in self.iter() {
            w.row([n.to_string(), fmt_f64(p)])?;
        }
        w.finish()
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 || scale < f64::MIN_POSITIVE * 1e10 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Outcome of comparing the laws at two death rates `d < d'`.
#[derive(Debug, Clone)]
pub struct CrossingReport {
    /// Last size at which `l(N, d') >= l(N, d)`.
    pub n0: u32,
    /// `q(N) = l(N, d') / l(N, d)` over the compared sizes, starting at 2.
    pub q: Vec<f64>,
    pub q_strictly_decreasing: bool,
    pub sign_changes: usize,
}

impl CrossingReport {
    pub fn single_crossing(&self) -> bool {
        self.sign_changes == 1 && self.q_strictly_decreasing
    }
}

pub fn crossing_index(law_d: &StationaryLaw, law_dprime: &StationaryLaw) -> Result<CrossingReport> {
    if law_d.b != law_dprime.b || law_d.c != law_dprime.c {
        return Err(invalid("crossing_index needs laws with the same b and c"));
    }
    if !(law_dprime.d > law_d.d) {
        return Err(invalid(format!(
            "crossing_index needs d' > d, got d = {}, d' = {}",
            law_d.d, law_dprime.d
        )));
    }
    let upto = law_d.n_max().min(law_dprime.n_max());
    let mut q = Vec::new();
    for size in 2..=upto {
        let (a, b) = (law_d.prob(size), law_dprime.prob(size));
        if !(a > f64::MIN_POSITIVE && b > f64::MIN_POSITIVE) {
            break;
        }
        q.push(b / a);
    }
    let q_strictly_decreasing = q.windows(2).all(|p| p[1] < p[0]);
    let above: Vec<bool> = q.iter().map(|x| *x >= 1.0).collect();
    let sign_changes = above.windows(2).filter(|p| p[0] != p[1]).count();
    let n0 = above.iter().rposition(|x| *x).map_or(1, |i| i as u32 + 2);
    Ok(CrossingReport {
        n0,
        q,
        q_strictly_decreasing,
        sign_changes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorial_weights() {
        let law = stationary_law(1.0, 0.0, 1.0, 1e-14).unwrap();
        let expected = 0.5 / (std::f64::consts::E - 2.0);
        assert!((law.prob(2) - expected).abs() < 1e-12);
        assert!((law.prob(2) - 0.6961056).abs() < 1e-7);
        assert!((law.total() + law.tail_mass - 1.0).abs() < 1e-14);
    }

    #[test]
    fn balance_holds() {
        for (b, d, c) in [
            (2.0, 1.0, 0.5),
            (10.0, 0.5, 0.1),
            (0.02, 1.0, 1.0),
            (100.0, 0.0, 0.1),
        ] {
            let law = stationary_law(b, d, c, 1e-13).unwrap();
            assert!(law.max_balance_residual() <= 1e-12, "({b},{d},{c})");
            assert!(law.tail_mass <= 1e-13);
            assert!(law.total() >= 1.0 - 1e-13 && law.total() <= 1.0);
        }
    }

    #[test]
    fn boundary_balance() {
        let law = stationary_law(3.0, 0.7, 0.4, 1e-12).unwrap();
        let lhs = 2.0 * 3.0 * law.prob(2);
        let rhs = 3.0 * (0.7 + 0.8) * law.prob(3);
        assert!((lhs - rhs).abs() <= 1e-14 * lhs);
    }

    #[test]
    fn crossing() {
        let a = stationary_law(4.0, 1.0, 1.0, 1e-14).unwrap();
        let b = stationary_law(4.0, 2.0, 1.0, 1e-14).unwrap();
        let rep = crossing_index(&a, &b).unwrap();
        assert!(rep.q[0] > 1.0);
        assert!(rep.single_crossing());
        for (i, w) in rep.q.windows(2).enumerate() {
            let size = f64::from(i as u32 + 2);
            let expected = (1.0 + size) / (2.0 + size);
            assert!((w[1] / w[0] - expected).abs() < 1e-10);
        }
        assert!(crossing_index(&a, &a).is_err());
        assert!(crossing_index(&b, &a).is_err());
    }

    #[test]
    fn rejects_bad_rates() {
        assert!(stationary_law(0.0, 1.0, 1.0, 1e-10).is_err());
        assert!(stationary_law(1.0, 1.0, 0.0, 1e-10).is_err());
        assert!(stationary_law(1.0, -1.0, 1.0, 1e-10).is_err());
    }
}
