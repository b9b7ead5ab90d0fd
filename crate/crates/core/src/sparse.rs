//! Compressed sparse rows and a restarted BiCGSTAB solver.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub(crate) struct CsrMatrix {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn with_capacity(rows: usize, nnz: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(rows + 1);
        row_ptr.push(0);
        CsrMatrix {
            row_ptr,
            cols: Vec::with_capacity(nnz),
            vals: Vec::with_capacity(nnz),
        }
    }

    pub fn push(&mut self, col: usize, val: f64) {
        self.cols.push(col as u32);
        self.vals.push(val);
    }

    pub fn finish_row(&mut self) {
        self.row_ptr.push(self.cols.len());
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn mul_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = 0.0;
            for j in a..b {
                acc += self.vals[j] * x[self.cols[j] as usize];
            }
            *o = acc;
        }
    }

    /// `out = rhs - A x`.
    pub fn residual_into(&self, x: &[f64], rhs: &[f64], out: &mut [f64]) {
        self.mul_into(x, out);
        for (o, b) in out.iter_mut().zip(rhs) {
            *o = b - *o;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SolveReport {
    pub iterations: usize,
    /// `||rhs - A x||_inf / ||rhs||_inf` of the returned iterate.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `A x = rhs` starting from `x`, to `||r||_inf <= tol * ||rhs||_inf`.
pub(crate) fn bicgstab(
    a: &CsrMatrix,
    rhs: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    let n = a.rows();
    let scale = norm_inf(rhs);
    if scale == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveReport {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let target = tol * scale;
    let mut r = vec![0.0; n];
    let mut r_hat = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut iterations = 0;

    // Each outer pass restarts from the true residual, which keeps the
    // recursively updated residual from drifting away from b - Ax.
    loop {
        a.residual_into(x, rhs, &mut r);
        let true_res = norm_inf(&r);
        if true_res <= target {
            return Ok(SolveReport {
                iterations,
                relative_residual: true_res / scale,
            });
        }
        if iterations >= max_iter {
            return Err(Error::NoConvergence {
                residual: true_res / scale,
                iterations,
            });
        }
        r_hat.copy_from_slice(&r);
        p.iter_mut().for_each(|e| *e = 0.0);
        v.iter_mut().for_each(|e| *e = 0.0);
        let (mut rho, mut alpha, mut omega) = (1.0f64, 1.0f64, 1.0f64);
        let pass_start = iterations;
        while iterations < max_iter && iterations - pass_start < 2000 {
            iterations += 1;
            let rho_new = dot(&r_hat, &r);
            if rho_new.abs() < 1e-300 || !rho_new.is_finite() {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            a.mul_into(&p, &mut v);
            let denom = dot(&r_hat, &v);
            if denom.abs() < 1e-300 {
                break;
            }
            alpha = rho / denom;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if norm_inf(&s) <= 0.1 * target {
                for i in 0..n {
                    x[i] += alpha * p[i];
                }
                break;
            }
            a.mul_into(&s, &mut t);
            let tt = dot(&t, &t);
            if tt == 0.0 {
                break;
            }
            omega = dot(&t, &s) / tt;
            for i in 0..n {
                x[i] += alpha * p[i] + omega * s[i];
                r[i] = s[i] - omega * t[i];
            }
            if norm_inf(&r) <= 0.1 * target || omega == 0.0 {
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_nonsymmetric_system() {
        // [[4,1,0],[2,5,1],[0,1,3]] x = [1,2,3]
        let rows: [&[(usize, f64)]; 3] = [
            &[(0, 4.0), (1, 1.0)],
            &[(0, 2.0), (1, 5.0), (2, 1.0)],
            &[(1, 1.0), (2, 3.0)],
        ];
        let mut a = CsrMatrix::with_capacity(3, 7);
        for row in rows {
            for &(c, v) in row {
                a.push(c, v);
            }
            a.finish_row();
        }
        let rhs = [1.0, 2.0, 3.0];
        let mut x = vec![0.0; 3];
        let rep = bicgstab(&a, &rhs, &mut x, 1e-14, 100).unwrap();
        assert!(rep.relative_residual <= 1e-14);
        let mut ax = vec![0.0; 3];
        a.mul_into(&x, &mut ax);
        for (l, r) in ax.iter().zip(rhs) {
            assert!((l - r).abs() < 1e-13);
        }
    }
}
