//! Dirichlet problems of the absorbing chain on a truncated lattice.
//!
//! Every problem is written in jump-chain form
//! `x(s) - sum_t pi(s -> t) x(t) = r(s)` on interior states, with prescribed
//! values on the absorbing sets. Births are switched off at `N = n_max`, so
//! the truncation acts as a reflecting wall.

use std::io::Write;

use crate::csv::{fmt_f64, TableWriter};
use crate::demography::scaled_weights;
use crate::error::{invalid, Error, Result};
use crate::lattice::TruncatedLattice;
use crate::model::{transitions, DemographicParams, GeneralRates, PopulationState, StateClass};
use crate::sparse::{bicgstab, CsrMatrix};

/// Relative residual target of every linear solve.
pub const SOLVE_TOL: f64 = 1e-13;
const MAX_ITER: usize = 50_000;
/// Floor of the reported truncation error, covering the solver residual.
const SOLVER_FLOOR: f64 = 1e-10;

/// `p(k, m, n) = (m + 2n) / 2N`, the fixation probability without selection.
pub fn neutral_fixation(state: &PopulationState) -> f64 {
    state.mutant_frequency()
}

/// The jump-chain operator `I - P` with identity rows on absorbing states.
pub(crate) struct JumpChain {
    pub lattice: TruncatedLattice,
    pub matrix: CsrMatrix,
    /// Total jump rate after truncation; zero on absorbing states.
    pub total_rate: Vec<f64>,
    pub class: Vec<StateClass>,
}

impl JumpChain {
    pub fn build(rates: &GeneralRates, lattice: TruncatedLattice) -> Self {
        let len = lattice.len();
        let n_max = lattice.n_max();
        let mut matrix = CsrMatrix::with_capacity(len, 7 * len);
        let mut total_rate = vec![0.0; len];
        let mut class = Vec::with_capacity(len);
        for (i, s) in lattice.states().enumerate() {
            let cls = s.class();
            class.push(cls);
            matrix.push(i, 1.0);
            if !cls.is_absorbing() {
                let ts = transitions(&s, rates);
                let wall = s.size() == n_max;
                let keep = |idx: usize, rate: f64| rate > 0.0 && !(wall && idx < 3);
                let q: f64 = ts
                    .entries
                    .iter()
                    .enumerate()
                    .filter(|(j, t)| keep(*j, t.rate))
                    .map(|(_, t)| t.rate)
                    .sum();
                for (j, t) in ts.entries.iter().enumerate() {
                    if keep(j, t.rate) {
                        let target = t.target.expect("positive-rate jump has a target");
                        let col = lattice.index_of(target.k(), target.m(), target.size());
                        matrix.push(col, -t.rate / q);
                    }
                }
                total_rate[i] = q;
            }
            matrix.finish_row();
        }
        JumpChain {
            lattice,
            matrix,
            total_rate,
            class,
        }
    }

    pub fn solve(&self, rhs: &[f64], guess: Vec<f64>) -> Result<(Vec<f64>, f64)> {
        let mut x = guess;
        let rep = bicgstab(&self.matrix, rhs, &mut x, SOLVE_TOL, MAX_ITER)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NoConvergence {
                residual: f64::NAN,
                iterations: rep.iterations,
            });
        }
        Ok((x, rep.relative_residual))
    }

    fn fixation_rhs(&self) -> Vec<f64> {
        self.class
            .iter()
            .map(|c| {
                if *c == StateClass::MutantFixed {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn neutral_guess(&self) -> Vec<f64> {
        self.lattice
            .states()
            .map(|s| neutral_fixation(&s))
            .collect()
    }

    /// Right-hand side for `L f = source` with `f = 0` on absorbing states.
    fn source_rhs<F: Fn(&PopulationState) -> f64>(&self, source: F) -> Vec<f64> {
        self.lattice
            .states()
            .zip(&self.total_rate)
            .map(|(s, q)| if *q > 0.0 { -source(&s) / q } else { 0.0 })
            .collect()
    }
}

fn check_n_max(n_max: u32) -> Result<TruncatedLattice> {
    if n_max < TruncatedLattice::MIN_SIZE {
        return Err(invalid(format!("n_max must be >= 4, got {n_max}")));
    }
    TruncatedLattice::new(n_max)
}

#[derive(Debug, Clone)]
pub struct FixationTable {
    pub lattice: TruncatedLattice,
    pub u: Vec<f64>,
    pub params: DemographicParams,
    pub truncation_error_estimate: f64,
    /// Relative residual of the final linear solve.
    pub residual: f64,
}

impl FixationTable {
    pub fn value(&self, state: &PopulationState) -> Result<f64> {
        Ok(self.u[self.lattice.try_index(state)?])
    }

    pub fn write_csv<W: Write>(&self, out: W, comments: &[String]) -> Result<()> {
        let mut w = TableWriter::new(out, comments, &["k", "m", "n", "u"])?;
        for (s, u) in self.lattice.states().zip(&self.u) {
            w.row([
                s.k().to_string(),
                s.m().to_string(),
                s.n().to_string(),
                fmt_f64(*u),
            ])?;
        }
        w.finish()
    }
}

/// Heuristic bound on the effect of the wall: the stationary weight at
/// the wall relative to the heaviest size below `n_max / 2`, times `n_max`,
/// under the smallest death rate of the three genotypes. Never below the
/// solver floor of 1e-10.
pub fn truncation_bound(params: &DemographicParams, n_max: u32) -> f64 {
    let d_min = params
        .natural_deaths()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let w = scaled_weights(params.b, d_min, params.c, n_max);
    let half = (n_max / 2).max(2);
    let inner = w[..(half - 1) as usize].iter().copied().fold(0.0, f64::max);
    let wall = w[(n_max - 2) as usize];
    let ratio = if inner > 0.0 {
        f64::from(n_max) * wall / inner
    } else {
        1.0
    };
    ratio.clamp(SOLVER_FLOOR, 1.0)
}

pub fn solve_fixation(params: &DemographicParams, n_max: u32) -> Result<FixationTable> {
    params.validate()?;
    let lattice = check_n_max(n_max)?;
    let chain = JumpChain::build(&GeneralRates::from(params), lattice);
    let rhs = chain.fixation_rhs();
    let (u, residual) = chain.solve(&rhs, chain.neutral_guess())?;
    Ok(FixationTable {
        lattice: chain.lattice,
        u,
        params: *params,
        truncation_error_estimate: truncation_bound(params, n_max),
        residual,
    })
}

/// Solves on `n_max` and `2 n_max` and reports the largest change over the
/// states with `N <= n_max / 2` as the truncation error estimate.
pub fn solve_fixation_refined(params: &DemographicParams, n_max: u32) -> Result<FixationTable> {
    let mut coarse = solve_fixation(params, n_max)?;
    let fine = solve_fixation(params, 2 * n_max)?;
    let mut change: f64 = 0.0;
    for (s, u) in coarse.lattice.states().zip(&coarse.u) {
        if s.size() > n_max / 2 {
            break;
        }
        change = change.max((u - fine.value(&s)?).abs());
    }
    coarse.truncation_error_estimate = change;
    Ok(coarse)
}

/// Fixation probabilities for arbitrary genotype-dependent rates.
pub fn solve_fixation_with_rates(
    rates: &GeneralRates,
    n_max: u32,
) -> Result<(TruncatedLattice, Vec<f64>)> {
    let lattice = check_n_max(n_max)?;
    let chain = JumpChain::build(rates, lattice);
    let rhs = chain.fixation_rhs();
    let (u, _) = chain.solve(&rhs, chain.neutral_guess())?;
    Ok((chain.lattice, u))
}

#[derive(Debug, Clone)]
pub struct HittingTimeTable {
    pub lattice: TruncatedLattice,
    /// Expected number of jumps before absorption.
    pub t: Vec<f64>,
}

impl HittingTimeTable {
    pub fn value(&self, state: &PopulationState) -> Result<f64> {
        Ok(self.t[self.lattice.try_index(state)?])
    }
}

pub fn solve_mean_steps(params: &DemographicParams, n_max: u32) -> Result<HittingTimeTable> {
    params.validate()?;
    let lattice = check_n_max(n_max)?;
    let chain = JumpChain::build(&GeneralRates::from(params), lattice);
    let rhs: Vec<f64> = chain
        .class
        .iter()
        .map(|c| if c.is_absorbing() { 0.0 } else { 1.0 })
        .collect();
    let guess = rhs.clone();
    let (t, _) = chain.solve(&rhs, guess)?;
    Ok(HittingTimeTable {
        lattice: chain.lattice,
        t,
    })
}

/// Default finite-difference step `1e-3 * max(1, d)`.
pub fn default_step(d: f64) -> f64 {
    1e-3 * d.max(1.0)
}

/// `(v_fd, v'_fd)` on every lattice state: negated central differences of
/// `u` in `delta` and `delta'` around the values in `params`.
#[derive(Debug, Clone)]
pub struct GradientTable {
    pub lattice: TruncatedLattice,
    pub v: Vec<f64>,
    pub vprime: Vec<f64>,
    pub h: f64,
}

impl GradientTable {
    pub fn get(&self, state: &PopulationState) -> Result<(f64, f64)> {
        let i = self.lattice.try_index(state)?;
        Ok((self.v[i], self.vprime[i]))
    }
}

fn check_step(params: &DemographicParams, h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("step h must be > 0, got {h}")));
    }
    if params.d + params.delta - h < 0.0 || params.d + params.delta_prime - h < 0.0 {
        return Err(invalid(format!(
            "step h = {h} drives a death rate negative (d = {})",
            params.d
        )));
    }
    Ok(())
}

pub fn fd_gradient_table(params: &DemographicParams, h: f64, n_max: u32) -> Result<GradientTable> {
    params.validate()?;
    check_step(params, h)?;
    let solve = |dl: f64, dp: f64| -> Result<FixationTable> {
        solve_fixation(
            &params.with_perturbation(params.delta + dl, params.delta_prime + dp)?,
            n_max,
        )
    };
    let diff = |plus: FixationTable, minus: FixationTable| -> Vec<f64> {
        plus.u
            .iter()
            .zip(&minus.u)
            .map(|(a, b)| -(a - b) / (2.0 * h))
            .collect()
    };
    let v = diff(solve(h, 0.0)?, solve(-h, 0.0)?);
    let vprime = diff(solve(0.0, h)?, solve(0.0, -h)?);
    Ok(GradientTable {
        lattice: TruncatedLattice::new(n_max)?,
        v,
        vprime,
        h,
    })
}

pub fn fd_gradient(
    params: &DemographicParams,
    state: &PopulationState,
    h: f64,
    n_max: u32,
) -> Result<(f64, f64)> {
    if state.size() > n_max {
        return Err(Error::OutOfRange {
            k: state.k(),
            m: state.m(),
            n: state.n(),
            limit: n_max,
        });
    }
    fd_gradient_table(params, h, n_max)?.get(state)
}

/// Source of `L v` in the neutral model; deaths, and with them the
/// selective effect, are absent at `N = 2`.
pub fn v_source(s: &PopulationState) -> f64 {
    let size = s.size();
    if size == 2 {
        return 0.0;
    }
    let nn = f64::from(size);
    f64::from(s.m()) * (f64::from(s.n()) - f64::from(s.k())) / (2.0 * nn * (nn - 1.0))
}

/// Source of `L v'` in the neutral model.
pub fn v_prime_source(s: &PopulationState) -> f64 {
    let size = s.size();
    if size == 2 {
        return 0.0;
    }
    let nn = f64::from(size);
    -f64::from(s.n()) * f64::from(s.a_alleles()) / (2.0 * nn * (nn - 1.0))
}

/// `v` and `v'` obtained by solving their own Dirichlet problems at the
/// neutral point of `(b, d, c)`.
#[derive(Debug, Clone)]
pub struct DerivativeTable {
    pub lattice: TruncatedLattice,
    pub v: Vec<f64>,
    pub vprime: Vec<f64>,
}

impl DerivativeTable {
    pub fn get(&self, state: &PopulationState) -> Result<(f64, f64)> {
        let i = self.lattice.try_index(state)?;
        Ok((self.v[i], self.vprime[i]))
    }
}

pub fn solve_derivatives(params: &DemographicParams, n_max: u32) -> Result<DerivativeTable> {
    let neutral = DemographicParams::neutral(params.b, params.d, params.c)?;
    let lattice = check_n_max(n_max)?;
    let chain = JumpChain::build(&GeneralRates::from(&neutral), lattice);
    let len = chain.lattice.len();
    let (v, _) = chain.solve(&chain.source_rhs(v_source), vec![0.0; len])?;
    let (vprime, _) = chain.solve(&chain.source_rhs(v_prime_source), vec![0.0; len])?;
    Ok(DerivativeTable {
        lattice: chain.lattice,
        v,
        vprime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(k: u32, m: u32, n: u32) -> PopulationState {
        PopulationState::new(k, m, n).unwrap()
    }

    #[test]
    fn neutral_formula() {
        assert!((neutral_fixation(&st(3, 2, 1)) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(neutral_fixation(&st(0, 0, 5)), 1.0);
        assert_eq!(neutral_fixation(&st(2, 0, 0)), 0.0);
    }

    #[test]
    fn neutral_solution_is_exact() {
        let p = DemographicParams::neutral(2.0, 1.0, 0.5).unwrap();
        let t = solve_fixation(&p, 40).unwrap();
        for (s, u) in t.lattice.states().zip(&t.u) {
            if s.size() <= 20 {
                assert!((u - neutral_fixation(&s)).abs() < 1e-10, "{s}");
            }
        }
        assert_eq!(t.value(&st(0, 0, 4)).unwrap(), 1.0);
        assert_eq!(t.value(&st(6, 0, 0)).unwrap(), 0.0);
    }

    #[test]
    fn deleterious_below_neutral() {
        let p = DemographicParams::new(2.0, 1.0, 0.5, 0.0, 0.1).unwrap();
        let t = solve_fixation(&p, 40).unwrap();
        let u = t.value(&st(4, 1, 0)).unwrap();
        assert!(u < 0.1 && u > 0.05, "{u}");
        assert!(t.u.iter().all(|x| (-1e-12..=1.0 + 1e-12).contains(x)));
    }

    #[test]
    fn rejects_small_lattice() {
        let p = DemographicParams::neutral(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            solve_fixation(&p, 3),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn mean_steps_basics() {
        let p = DemographicParams::neutral(1.0, 1.0, 1.0).unwrap();
        let t = solve_mean_steps(&p, 30).unwrap();
        assert_eq!(t.value(&st(3, 0, 0)).unwrap(), 0.0);
        assert_eq!(t.value(&st(0, 0, 5)).unwrap(), 0.0);
        assert!(t.value(&st(1, 1, 0)).unwrap() >= 1.0);
    }

    #[test]
    fn derivative_solve_matches_fd() {
        let p = DemographicParams::neutral(0.5, 1.0, 1.0).unwrap();
        let exact = solve_derivatives(&p, 30).unwrap();
        let fd = fd_gradient_table(&p, 1e-3, 30).unwrap();
        for s in [st(4, 1, 0), st(1, 1, 0), st(2, 2, 1), st(0, 1, 4)] {
            let (v, vp) = exact.get(&s).unwrap();
            let (vf, vpf) = fd.get(&s).unwrap();
            assert!((v - vf).abs() < 1e-7, "{s}: {v} vs {vf}");
            assert!((vp - vpf).abs() < 1e-7, "{s}: {vp} vs {vpf}");
        }
    }

    #[test]
    fn csv_layout() {
        let p = DemographicParams::neutral(1.0, 1.0, 1.0).unwrap();
        let t = solve_fixation(&p, 4).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k,m,n,u"));
        assert_eq!(lines.next(), Some("0,0,2,1.0"));
        assert_eq!(text.lines().count(), 1 + t.lattice.len());
    }
}
