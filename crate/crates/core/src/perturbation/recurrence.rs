//! One-order reduction and backward tail summation of the recurrences.
//!
//! With `F_N = C_N + K_N`, the second-order system becomes
//! `z_{N+1} = M_N z_N + g_N`, `M_N = B_N^{-1} F_N`, where `K` and `g` run
//! forward from their `N = 3` values. The sequence that stays bounded is
//! picked out by summing backwards from a far level `L` with `z_{L+1} = 0`.

use super::linalg::{Mat2, Vec2};
use super::matrices::RecurrenceMatrices;
use crate::error::{Error, Result};

/// Condition numbers of `F_N` above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e-3 / f64::EPSILON;

#[derive(Debug, Clone, Copy)]
pub struct Level {
    pub k: Mat2,
    pub g: Vec2,
    pub f_mat: Mat2,
    pub m_inv: Mat2,
}

/// Runs the forward sweep for `N = 3..=last`. `mats(N)` is called for
/// `N = 3..=last + 1`. Returns levels indexed from `N = 3`.
pub fn forward<F>(mats: F, k3: Mat2, h3: Vec2, last: u32) -> Result<Vec<Level>>
where
    F: Fn(u32) -> RecurrenceMatrices,
{
    let mut levels = Vec::with_capacity((last - 2) as usize);
    let mut cur = mats(3);
    let b3_inv = cur.b.inverse().ok_or(Error::Singular {
        level: 3,
        det: cur.b.det(),
    })?;
    let mut k = k3;
    let mut g = b3_inv * h3;
    for size in 3..=last {
        let f_mat = cur.c + k;
        let cond = f_mat.condition();
        if !(cond <= MAX_CONDITION) {
            return Err(Error::IllConditioned {
                level: size,
                condition: cond,
            });
        }
        let f_inv = f_mat.inverse().ok_or(Error::Singular {
            level: size,
            det: f_mat.det(),
        })?;
        let m_inv = f_inv * cur.b;
        levels.push(Level { k, g, f_mat, m_inv });
        let next = mats(size + 1);
        let k_next = next.d * f_inv * cur.b;
        let b_next_inv = next.b.inverse().ok_or(Error::Singular {
            level: size + 1,
            det: next.b.det(),
        })?;
        g = b_next_inv * (next.f - k_next * g);
        k = k_next;
        cur = next;
    }
    Ok(levels)
}

/// `z_N` for `N = 3..=3 + levels.len() - 1` from `S_{L+1} = 0`,
/// `S_N = M_N^{-1} (g_N + S_{N+1})`, `z_N = -S_N`.
pub fn backward(levels: &[Level]) -> Vec<Vec2> {
    let mut z = vec![Vec2::ZERO; levels.len()];
    let mut s = Vec2::ZERO;
    for (i, lv) in levels.iter().enumerate().rev() {
        s = lv.m_inv * (lv.g + s);
        z[i] = -s;
    }
    z
}
