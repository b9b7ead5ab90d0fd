//! First-order sensitivity of the fixation probability to the death-rate
//! penalties `delta` (heterozygote) and `delta'` (mutant homozygote).
//!
//! Near the neutral point `u = p - delta v - delta' v' + o(|delta| + |delta'|)`
//! with
//!
//! ```text
//! v(k,m,n)  = (k-n) [ (m/N) x_N + ((N^2 - (k-n)^2)/N^2) y_N ]
//! v'(k,m,n) = (nY/N) x_N + m x'_N + Y(2N-Y) (y'_N/N - Y y_N / 2N^2)
//! ```
//!
//! where `Y = 2k + m`. The sequences `z_N = (x_N, y_N)` and
//! `z'_N = (x'_N, y'_N)` solve second-order matrix recurrences, see
//! [`matrices`]. At `N = 2` only `s2 = x_2 + 1.5 y_2` is determined.

pub mod linalg;
pub mod matrices;
mod recurrence;

use std::io::Write;

use crate::csv::{fmt_f64, TableWriter};
use crate::demography::stationary_law;
use crate::error::{invalid, Error, Result};
use crate::exact::{neutral_fixation, solve_derivatives};
use crate::model::{DemographicParams, PopulationState};
use linalg::{Mat2, Vec2};
use matrices::{first_layer, first_layer_initial, second_layer, second_layer_initial};
use recurrence::{backward, forward, Level};

pub use recurrence::MAX_CONDITION;

/// How the tables are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMethod {
    /// Recurrence first, Dirichlet extraction if the tail fails to converge.
    Auto,
    Recurrence,
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableSource {
    Recurrence,
    Dirichlet,
}

impl TableSource {
    pub fn label(self) -> &'static str {
        match self {
            TableSource::Recurrence => "recurrence",
            TableSource::Dirichlet => "dirichlet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationOptions {
    /// Relative change allowed between two tail lengths.
    pub tol: f64,
    /// Largest tail level; `None` means `10 n_max + 1000`.
    pub l_max: Option<u32>,
    pub method: TableMethod,
    /// `y_2` of the `N = 2` split `(x_2, y_2) = (s2 - 1.5 y_2, y_2)`.
    pub split_y2: f64,
}

impl Default for PerturbationOptions {
    fn default() -> Self {
        PerturbationOptions {
            tol: 1e-10,
            l_max: None,
            method: TableMethod::Auto,
            split_y2: 0.0,
        }
    }
}

impl PerturbationOptions {
    fn l_max_for(&self, n_max: u32) -> u32 {
        self.l_max.unwrap_or(10 * n_max + 1000)
    }
}

fn initial_tail(p: &DemographicParams, n_max: u32, l_max: u32) -> u32 {
    let guess = (8.0 * p.b / p.c).min(1e6) as u32 + 64;
    guess.max(n_max + 4).min(l_max.max(n_max + 4))
}

/// First-layer solution `z_N` on `N = 3..=last`.
#[derive(Debug, Clone)]
pub struct ZTable {
    pub n_max: u32,
    /// `x[N]`, `y[N]` for `N = 3..=last`; entries below 3 are NaN.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s2: f64,
    /// Tail level of the accepted run.
    pub l_used: u32,
    /// Relative change of `z_3..=z_{n_max+1}` against the previous tail.
    pub tail_change: f64,
    levels: Vec<Level>,
}

impl ZTable {
    pub fn last(&self) -> u32 {
        self.x.len() as u32 - 1
    }
}

fn relative_change(a: &[Vec2], b: &[Vec2]) -> f64 {
    let scale = a.iter().map(Vec2::norm_inf).fold(0.0, f64::max);
    let diff = a
        .iter()
        .zip(b)
        .map(|(u, v)| (*u - *v).norm_inf())
        .fold(0.0, f64::max);
    if !diff.is_finite() {
        f64::INFINITY
    } else if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

fn run_z(p: &DemographicParams, tail: u32) -> Result<(Vec<Level>, Vec<Vec2>)> {
    let (c3t, f3t) = first_layer_initial(p);
    let k3 = c3t - first_layer(3, p).c;
    let levels = forward(|n| first_layer(n, p), k3, f3t, tail)?;
    let z = backward(&levels);
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::TailNotConverged {
            l_max: tail,
            change: f64::NAN,
        });
    }
    Ok((levels, z))
}

fn solve_z_from(
    p: &DemographicParams,
    n_max: u32,
    opts: &PerturbationOptions,
    start: u32,
) -> Result<ZTable> {
    let l_max = opts.l_max_for(n_max);
    let compare = (n_max - 1) as usize; // z_3..=z_{n_max+1}
    let mut tail = start;
    let mut prev: Option<Vec<Vec2>> = None;
    loop {
        let (levels, z) = run_z(p, tail)?;
        let mut change = f64::INFINITY;
        if let Some(prev) = &prev {
            change = relative_change(&z[..compare], &prev[..compare]);
            if change <= opts.tol {
                let mut x = vec![f64::NAN; 3];
                let mut y = vec![f64::NAN; 3];
                x.extend(z.iter().map(|v| v.0[0]));
                y.extend(z.iter().map(|v| v.0[1]));
                let s2 = 4.0 / 3.0 * x[3] + 2.0 * y[3];
                return Ok(ZTable {
                    n_max,
                    x,
                    y,
                    s2,
                    l_used: tail,
                    tail_change: change,
                    levels,
                });
            }
        }
        if tail >= l_max {
            return Err(Error::TailNotConverged { l_max, change });
        }
        prev = Some(z);
        tail = (tail * 2).min(l_max);
    }
}

/// `x_N, y_N` for `N = 3..=n_max` (and beyond, up to the tail level) by
/// backward summation with an adaptively doubled tail.
pub fn solve_z(p: &DemographicParams, n_max: u32, opts: &PerturbationOptions) -> Result<ZTable> {
    check_n_max(n_max)?;
    p.validate()?;
    let l_max = opts.l_max_for(n_max);
    solve_z_from(p, n_max, opts, initial_tail(p, n_max, l_max))
}

/// Second-layer solution `z'_N` on `N = 2..=last`.
#[derive(Debug, Clone)]
pub struct ZPrimeTable {
    pub xp: Vec<f64>,
    pub yp: Vec<f64>,
    pub x2: f64,
    pub y2: f64,
    pub h3: Vec2,
    pub l_used: u32,
    pub tail_change: f64,
}

/// `h_3 = f'_3 - D'_3 C~'_2^{-1} f~'_2` for a given split of `s2`.
pub fn h3(p: &DemographicParams, x2: f64, y2: f64, x3: f64, y3: f64, y4: f64) -> Vec2 {
    let ys = [y2, y3, y4];
    let m3 = second_layer(3, p, |n| ys[(n - 2) as usize]);
    let (_, ct, ft) = second_layer_initial(x2, y2, x3, y3);
    let ct_inv = ct.inverse().expect("C~'_2 has determinant -4");
    m3.f - m3.d * (ct_inv * ft)
}

fn run_z_prime(
    p: &DemographicParams,
    z: &ZTable,
    x2: f64,
    y2: f64,
    tail: u32,
) -> Result<ZPrimeTable> {
    let y = |n: u32| if n == 2 { y2 } else { z.y[n as usize] };
    let (bt, ct, ft) = second_layer_initial(x2, y2, z.x[3], z.y[3]);
    let ct_inv = ct.inverse().expect("C~'_2 has determinant -4");
    let d3 = second_layer(3, p, y).d;
    let k3 = d3 * ct_inv * bt;
    let h = h3(p, x2, y2, z.x[3], z.y[3], z.y[4]);
    let levels = forward(|n| second_layer(n, p, y), k3, h, tail)?;
    let zp = backward(&levels);
    if zp.iter().any(|v| !v.is_finite()) {
        return Err(Error::TailNotConverged {
            l_max: tail,
            change: f64::NAN,
        });
    }
    let z2 = ct_inv * (bt * zp[0] - ft);
    let mut xp = vec![f64::NAN, f64::NAN, z2.0[0]];
    let mut yp = vec![f64::NAN, f64::NAN, z2.0[1]];
    xp.extend(zp.iter().map(|v| v.0[0]));
    yp.extend(zp.iter().map(|v| v.0[1]));
    Ok(ZPrimeTable {
        xp,
        yp,
        x2,
        y2,
        h3: h,
        l_used: tail,
        tail_change: f64::INFINITY,
    })
}

/// `x'_N, y'_N` for `N = 2..`, consuming the first-layer table. The tail
/// may extend to `z.last() - 2`, since the source at level `N` reads
/// `y_{N+1}`.
pub fn solve_z_prime(
    p: &DemographicParams,
    z: &ZTable,
    opts: &PerturbationOptions,
) -> Result<ZPrimeTable> {
    let cap = z.last() - 2;
    let n_max = z.n_max;
    if cap < n_max + 2 {
        return Err(invalid("first-layer table too short for the second layer"));
    }
    let y2 = opts.split_y2;
    let x2 = z.s2 - 1.5 * y2;
    let pick = |t: &ZPrimeTable| -> Vec<Vec2> {
        (2..=n_max as usize + 1)
            .map(|n| Vec2::new(t.xp[n], t.yp[n]))
            .collect()
    };
    let mut tail = initial_tail(p, n_max, cap).min(cap);
    let mut prev: Option<Vec<Vec2>> = None;
    loop {
        let mut run = run_z_prime(p, z, x2, y2, tail)?;
        let cur = pick(&run);
        let mut change = f64::INFINITY;
        if let Some(prev) = &prev {
            change = relative_change(&cur, prev);
            if change <= opts.tol {
                run.tail_change = change;
                return Ok(run);
            }
        }
        if tail >= cap {
            return Err(Error::TailNotConverged { l_max: cap, change });
        }
        prev = Some(cur);
        tail = (tail * 2).min(cap);
    }
}

/// Per-level quantities of the first-layer construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelDiagnostics {
    pub size: u32,
    pub norm_k: f64,
    /// `||V_N + K_N / b||` with `V_N = [[0, 1/N], [1, 0]]`.
    pub norm_g: f64,
    pub cond_f: f64,
    /// `||M_N^{-1}|| c N / 2b`.
    pub scaled_m_inv: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverDiagnostics {
    /// Levels `N = 3..=n_max`; empty for Dirichlet-derived tables.
    pub levels: Vec<LevelDiagnostics>,
    pub tail_change: f64,
    pub tail_change_prime: f64,
    pub l_used: u32,
    pub l_used_prime: u32,
    /// Why the recurrence was abandoned, for Dirichlet-derived tables.
    pub fallback_reason: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PerturbationTables {
    /// Neutral parameters the tables belong to.
    pub params: DemographicParams,
    pub n_max: u32,
    x: Vec<f64>,
    y: Vec<f64>,
    xp: Vec<f64>,
    yp: Vec<f64>,
    pub s2: f64,
    pub source: TableSource,
    pub diagnostics: SolverDiagnostics,
}

fn check_n_max(n_max: u32) -> Result<()> {
    if n_max < 4 {
        return Err(invalid(format!("n_max must be >= 4, got {n_max}")));
    }
    Ok(())
}

fn level_diagnostics(p: &DemographicParams, levels: &[Level], n_max: u32) -> Vec<LevelDiagnostics> {
    levels
        .iter()
        .take((n_max - 2) as usize)
        .enumerate()
        .map(|(i, lv)| {
            let size = i as u32 + 3;
            let n = f64::from(size);
            let v = Mat2::new(0.0, 1.0 / n, 1.0, 0.0);
            LevelDiagnostics {
                size,
                norm_k: lv.k.norm(),
                norm_g: (v + lv.k.scale(1.0 / p.b)).norm(),
                cond_f: lv.f_mat.condition(),
                scaled_m_inv: lv.m_inv.norm() * p.c * n / (2.0 * p.b),
            }
        })
        .collect()
}

fn truncate(v: &[f64], n_max: u32) -> Vec<f64> {
    v[..=(n_max as usize + 1).min(v.len() - 1)].to_vec()
}

fn tables_by_recurrence(
    p: &DemographicParams,
    n_max: u32,
    opts: &PerturbationOptions,
) -> Result<PerturbationTables> {
    let l_max = opts.l_max_for(n_max);
    let mut start = initial_tail(p, n_max, l_max);
    loop {
        let z = solve_z_from(p, n_max, opts, start)?;
        match solve_z_prime(p, &z, opts) {
            Ok(zp) => {
                let mut x = truncate(&z.x, n_max);
                let mut y = truncate(&z.y, n_max);
                x[2] = zp.x2;
                y[2] = zp.y2;
                return Ok(PerturbationTables {
                    params: *p,
                    n_max,
                    diagnostics: SolverDiagnostics {
                        levels: level_diagnostics(p, &z.levels, n_max),
                        tail_change: z.tail_change,
                        tail_change_prime: zp.tail_change,
                        l_used: z.l_used,
                        l_used_prime: zp.l_used,
                        fallback_reason: None,
                    },
                    x,
                    y,
                    xp: truncate(&zp.xp, n_max),
                    yp: truncate(&zp.yp, n_max),
                    s2: z.s2,
                    source: TableSource::Recurrence,
                });
            }
            Err(Error::TailNotConverged { .. }) if z.l_used < l_max => {
                start = (z.l_used * 2).min(l_max);
            }
            Err(e) => return Err(e),
        }
    }
}

/// Lattice size used to extract tables of range `n_max` from Dirichlet
/// solutions: the requested range or the bulk of the stationary law,
/// whichever is larger, plus a margin for the wall.
pub fn dirichlet_lattice_size(p: &DemographicParams, n_max: u32) -> Result<u32> {
    let bulk = stationary_law(p.b, p.d, p.c, 1e-12)?.n_max();
    let n = bulk.max(n_max + 1);
    Ok(n + (n / 8).max(10))
}

fn tables_by_dirichlet(
    p: &DemographicParams,
    n_max: u32,
    opts: &PerturbationOptions,
    reason: Option<String>,
) -> Result<PerturbationTables> {
    let lat = dirichlet_lattice_size(p, n_max)?;
    let sol = solve_derivatives(p, lat)?;
    let get = |k: u32, m: u32, n: u32| -> Result<(f64, f64)> {
        sol.get(&PopulationState::new_unchecked(k, m, n))
    };
    let len = n_max as usize + 2;
    let (mut x, mut y, mut xp, mut yp) = (
        vec![f64::NAN; len],
        vec![f64::NAN; len],
        vec![f64::NAN; len],
        vec![f64::NAN; len],
    );
    for size in 3..=n_max + 1 {
        let n = f64::from(size);
        let (v10, vp10) = get(size - 1, 1, 0)?;
        let (v01, vp01) = get(size - 1, 0, 1)?;
        let yn = n * n / (4.0 * (n - 2.0) * (n - 1.0)) * v01;
        let xn = n / (n - 1.0) * (v10 - (2.0 * n - 1.0) / (4.0 * (n - 2.0)) * v01);
        // (N-1,0,1): Y = 2N-2; (N-1,1,0): Y = 2N-1.
        let ypn = (vp01 - (2.0 * n - 2.0) / n * xn) / (2.0 * (2.0 * n - 2.0)) * n
            + (2.0 * n - 2.0) * yn / (2.0 * n);
        let xpn = vp10 - (2.0 * n - 1.0) * (ypn / n - (2.0 * n - 1.0) * yn / (2.0 * n * n));
        let i = size as usize;
        x[i] = xn;
        y[i] = yn;
        xp[i] = xpn;
        yp[i] = ypn;
    }
    let (v110, vp110) = get(1, 1, 0)?;
    let (_, vp101) = get(1, 0, 1)?;
    let s2 = 2.0 * v110;
    let y2 = opts.split_y2;
    let x2 = s2 - 1.5 * y2;
    let yp2 = (vp101 - x2 + y2) / 2.0;
    let xp2 = vp110 - 3.0 * (yp2 / 2.0 - 3.0 * y2 / 8.0);
    x[2] = x2;
    y[2] = y2;
    xp[2] = xp2;
    yp[2] = yp2;
    Ok(PerturbationTables {
        params: *p,
        n_max,
        x,
        y,
        xp,
        yp,
        s2,
        source: TableSource::Dirichlet,
        diagnostics: SolverDiagnostics {
            fallback_reason: reason,
            ..SolverDiagnostics::default()
        },
    })
}

/// Builds `x_N, y_N, x'_N, y'_N` for `N = 2..=n_max + 1` at the neutral
/// point of `(b, d, c)`; `delta` and `delta'` of `params` are ignored.
pub fn compute_tables(
    params: &DemographicParams,
    n_max: u32,
    opts: &PerturbationOptions,
) -> Result<PerturbationTables> {
    check_n_max(n_max)?;
    params.validate()?;
    if !(opts.tol > 0.0) {
        return Err(invalid(format!("tol must be > 0, got {}", opts.tol)));
    }
    let p = DemographicParams::neutral(params.b, params.d, params.c)?;
    match opts.method {
        TableMethod::Recurrence => tables_by_recurrence(&p, n_max, opts),
        TableMethod::Dirichlet => tables_by_dirichlet(&p, n_max, opts, None),
        TableMethod::Auto => match tables_by_recurrence(&p, n_max, opts) {
            Ok(t) => Ok(t),
            Err(
                e @ (Error::TailNotConverged { .. }
                | Error::IllConditioned { .. }
                | Error::Singular { .. }),
            ) => tables_by_dirichlet(&p, n_max, opts, Some(e.to_string())),
            Err(e) => Err(e),
        },
    }
}

fn out_of_range(s: &PopulationState, limit: u32) -> Error {
    Error::OutOfRange {
        k: s.k(),
        m: s.m(),
        n: s.n(),
        limit,
    }
}

impl PerturbationTables {
    fn check(&self, s: &PopulationState) -> Result<usize> {
        let size = s.size();
        if size > self.n_max + 1 {
            return Err(out_of_range(s, self.n_max + 1));
        }
        Ok(size as usize)
    }

    /// `(x_N, y_N)`; at `N = 2` the stored split.
    pub fn z(&self, size: u32) -> Option<(f64, f64)> {
        let i = size as usize;
        (size >= 2 && i < self.x.len()).then(|| (self.x[i], self.y[i]))
    }

    pub fn z_prime(&self, size: u32) -> Option<(f64, f64)> {
        let i = size as usize;
        (size >= 2 && i < self.xp.len()).then(|| (self.xp[i], self.yp[i]))
    }

    /// Largest `N` covered by the tables.
    pub fn last(&self) -> u32 {
        self.x.len() as u32 - 1
    }

    pub fn write_csv<W: Write>(&self, out: W, comments: &[String]) -> Result<()> {
        let mut w = TableWriter::new(out, comments, &["N", "x", "y", "xp", "yp"])?;
        for size in 2..=self.n_max {
            let i = size as usize;
            w.row([
                size.to_string(),
                fmt_f64(self.x[i]),
                fmt_f64(self.y[i]),
                fmt_f64(self.xp[i]),
                fmt_f64(self.yp[i]),
            ])?;
        }
        w.finish()
    }

    pub fn write_diagnostics_csv<W: Write>(&self, out: W, comments: &[String]) -> Result<()> {
        let mut w = TableWriter::new(out, comments, &["N", "normK", "normG", "condF"])?;
        for lv in &self.diagnostics.levels {
            w.row([
                lv.size.to_string(),
                fmt_f64(lv.norm_k),
                fmt_f64(lv.norm_g),
                fmt_f64(lv.cond_f),
            ])?;
        }
        w.finish()
    }
}

/// `v(k, m, n)`, the negated derivative of `u` in `delta`.
pub fn v_value(s: &PopulationState, t: &PerturbationTables) -> Result<f64> {
    let i = t.check(s)?;
    let (k, m, n) = (f64::from(s.k()), f64::from(s.m()), f64::from(s.n()));
    if i == 2 {
        return Ok(match s.counts() {
            [1, 1, 0] => t.s2 / 2.0,
            [0, 1, 1] => -t.s2 / 2.0,
            _ => 0.0,
        });
    }
    let size = k + m + n;
    let a = k - n;
    Ok(a * (m / size * t.x[i] + (size * size - a * a) / (size * size) * t.y[i]))
}

/// `v'(k, m, n)`, the negated derivative of `u` in `delta'`.
pub fn v_prime_value(s: &PopulationState, t: &PerturbationTables) -> Result<f64> {
    let i = t.check(s)?;
    let (m, n) = (f64::from(s.m()), f64::from(s.n()));
    let size = f64::from(s.size());
    let big_y = f64::from(s.a_alleles());
    Ok(n * big_y / size * t.x[i]
        + m * t.xp[i]
        + big_y * (2.0 * size - big_y) * (t.yp[i] / size - big_y / (2.0 * size * size) * t.y[i]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderFixation {
    pub raw: f64,
    /// `raw` clamped to `[0, 1]`.
    pub clamped: f64,
}

/// `p - delta v - delta' v'` with the penalties of `params`.
pub fn fixation_first_order(
    s: &PopulationState,
    params: &DemographicParams,
    t: &PerturbationTables,
) -> Result<FirstOrderFixation> {
    let raw = neutral_fixation(s)
        - params.delta * v_value(s, t)?
        - params.delta_prime * v_prime_value(s, t)?;
    Ok(FirstOrderFixation {
        raw,
        clamped: raw.clamp(0.0, 1.0),
    })
}

pub fn diagnostics(t: &PerturbationTables) -> &SolverDiagnostics {
    &t.diagnostics
}

/// Largest residuals of the four recurrence equations, the `N = 2`
/// constraint and the split dependence of `h_3`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// `(N, ||B_N z_{N+1} - C_N z_N - D_N z_{N-1} - f_N||)` for `N = 4..n_max`.
    pub first_layer: Vec<(u32, f64)>,
    /// `||B_3 z_4 - C~_3 z_3 - f~_3||`.
    pub first_initial: f64,
    /// Primed analogue for `N = 3..n_max`.
    pub second_layer: Vec<(u32, f64)>,
    /// `||B~'_2 z'_3 - C~'_2 z'_2 - f~'_2||`.
    pub second_initial: f64,
    /// `|s2 - (4/3) x_3 - 2 y_3|` relative to `|s2|`.
    pub s2_identity: f64,
    /// `||h_3(s2, 0) - h_3(s2 - 1.5, 1)|| / (1 + ||h_3||)`.
    pub h3_split: f64,
}

impl ResidualReport {
    pub fn max_first_layer(&self) -> f64 {
        self.first_layer
            .iter()
            .fold(self.first_initial, |m, (_, r)| m.max(*r))
    }

    pub fn max_second_layer(&self) -> f64 {
        self.second_layer
            .iter()
            .fold(self.second_initial, |m, (_, r)| m.max(*r))
    }
}

pub fn residuals(t: &PerturbationTables) -> ResidualReport {
    let p = &t.params;
    let z = |n: u32| Vec2::new(t.x[n as usize], t.y[n as usize]);
    let zp = |n: u32| Vec2::new(t.xp[n as usize], t.yp[n as usize]);
    let y = |n: u32| t.y[n as usize];
    let mut first = Vec::new();
    for size in 4..t.n_max {
        let m = first_layer(size, p);
        let r = m.b * z(size + 1) - m.c * z(size) - m.d * z(size - 1) - m.f;
        first.push((size, r.norm_inf()));
    }
    let (c3t, f3t) = first_layer_initial(p);
    let first_initial = (first_layer(3, p).b * z(4) - c3t * z(3) - f3t).norm_inf();
    let mut second = Vec::new();
    for size in 3..t.n_max {
        let m = second_layer(size, p, y);
        let r = m.b * zp(size + 1) - m.c * zp(size) - m.d * zp(size - 1) - m.f;
        second.push((size, r.norm_inf()));
    }
    let (bt, ct, ft) = second_layer_initial(t.x[2], t.y[2], t.x[3], t.y[3]);
    let second_initial = (bt * zp(3) - ct * zp(2) - ft).norm_inf();
    let s2_ref = 4.0 / 3.0 * t.x[3] + 2.0 * t.y[3];
    let s2_identity = (t.s2 - s2_ref).abs() / t.s2.abs().max(f64::MIN_POSITIVE);
    let ha = h3(p, t.s2, 0.0, t.x[3], t.y[3], t.y[4]);
    let hb = h3(p, t.s2 - 1.5, 1.0, t.x[3], t.y[3], t.y[4]);
    ResidualReport {
        first_layer: first,
        first_initial,
        second_layer: second,
        second_initial,
        s2_identity,
        h3_split: (ha - hb).norm_inf() / (1.0 + ha.norm_inf()),
    }
}

/// Least-squares fit `y_N ~ C1/N + C2/N^2` over `from..=to`, returning
/// `(C1, C2, max_N |residual_N| / |y_N|)`.
pub fn fit_y_asymptotics(t: &PerturbationTables, from: u32, to: u32) -> Result<(f64, f64, f64)> {
    if from < 3 || to > t.last() || from + 2 > to {
        return Err(invalid(format!(
            "fit range {from}..={to} outside 3..={}",
            t.last()
        )));
    }
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for size in from..=to {
        let (a, b) = (1.0 / f64::from(size), 1.0 / f64::from(size).powi(2));
        let yv = t.y[size as usize];
        s11 += a * a;
        s12 += a * b;
        s22 += b * b;
        r1 += a * yv;
        r2 += b * yv;
    }
    let inv = Mat2::new(s11, s12, s12, s22)
        .inverse()
        .ok_or_else(|| invalid("degenerate fit"))?;
    let c = inv * Vec2::new(r1, r2);
    let worst = (from..=to)
        .map(|size| {
            let n = f64::from(size);
            let yv = t.y[size as usize];
            (yv - c.0[0] / n - c.0[1] / (n * n)).abs() / yv.abs().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    Ok((c.0[0], c.0[1], worst))
}

/// `v` at `(k, m, n)` rebuilt from `v(N-1, 1, 0)` and `v(N-1, 0, 1)`.
pub fn v_from_probes(s: &PopulationState, v10: f64, v01: f64) -> f64 {
    let size = f64::from(s.size());
    let a = f64::from(s.k()) - f64::from(s.n());
    let m = f64::from(s.m());
    m * a / (size - 1.0) * (v10 - (2.0 * size - 1.0) / (4.0 * (size - 2.0)) * v01)
        + a * (size * size - a * a) / (4.0 * (size - 2.0) * (size - 1.0)) * v01
}

/// Largest relative gap between `v` and its two-probe reconstruction over
/// all states with `3 <= N <= size_max`.
pub fn probe_reconstruction_residual(t: &PerturbationTables, size_max: u32) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for size in 3..=size_max {
        let v10 = v_value(&PopulationState::new_unchecked(size - 1, 1, 0), t)?;
        let v01 = v_value(&PopulationState::new_unchecked(size - 1, 0, 1), t)?;
        for k in 0..=size {
            for m in 0..=size - k {
                let s = PopulationState::new_unchecked(k, m, size - k - m);
                let v = v_value(&s, t)?;
                let r = v_from_probes(&s, v10, v01);
                worst = worst.max((v - r).abs() / v.abs().max(1e-300).max(r.abs()));
            }
        }
    }
    Ok(worst)
}
