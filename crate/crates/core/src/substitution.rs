//! Rate at which a single new mutant allele goes to fixation in a resident
//! population at its stationary size law:
//!
//! ```text
//! tau = 2 mu * sum_{N >= 2} N u((N-1, 1, 0)) l(N)
//! ```
//!
//! and its first-order form where `u` is replaced by `p - delta v - delta' v'`.

use std::io::Write;

use rayon::prelude::*;

use crate::csv::{fmt_f64, TableWriter};
use crate::demography::{stationary_law, StationaryLaw};
use crate::error::{invalid, Error, Result};
use crate::exact::solve_fixation;
use crate::model::{DemographicParams, PopulationState};
use crate::perturbation::{
    compute_tables, v_prime_value, v_value, PerturbationOptions, PerturbationTables,
};

/// Default truncation tolerance of the stationary-law series.
pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauMethod {
    Exact,
    Linear,
}

impl TauMethod {
    pub fn label(self) -> &'static str {
        match self {
            TauMethod::Exact => "exact",
            TauMethod::Linear => "linear",
        }
    }
}

impl std::str::FromStr for TauMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(TauMethod::Exact),
            "linear" => Ok(TauMethod::Linear),
            _ => Err(invalid(format!(
                "unknown method '{s}' (expected exact or linear)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubstitutionRate {
    pub tau: f64,
    /// Mean fixation time `1 / tau`.
    pub t_mean: f64,
    pub method: TauMethod,
    pub params: DemographicParams,
    pub mu: f64,
    pub tol: f64,
    /// Largest population size in the truncated series.
    pub n_max: u32,
}

fn check_mu_tol(mu: f64, tol: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid(format!("mu must be > 0, got {mu}")));
    }
    if !(tol > 0.0) {
        return Err(invalid(format!("tol must be > 0, got {tol}")));
    }
    Ok(())
}

fn finish(
    tau: f64,
    method: TauMethod,
    params: &DemographicParams,
    mu: f64,
    tol: f64,
    n_max: u32,
) -> Result<SubstitutionRate> {
    if !(tau > 0.0) {
        return Err(Error::NonPositiveRate { tau, d: params.d });
    }
    Ok(SubstitutionRate {
        tau,
        t_mean: 1.0 / tau,
        method,
        params: *params,
        mu,
        tol,
        n_max,
    })
}

/// Lattice size for the exact fixation solve behind `tau_exact`: the law
/// support plus a margin for the wall.
pub fn exact_lattice_size(law: &StationaryLaw) -> u32 {
    let n = law.n_max();
    (n + (n / 8).max(10)).max(8)
}

fn mutant_entry(size: u32) -> PopulationState {
    PopulationState::new_unchecked(size - 1, 1, 0)
}

pub fn tau_exact(params: &DemographicParams, mu: f64, tol: f64) -> Result<SubstitutionRate> {
    params.validate()?;
    check_mu_tol(mu, tol)?;
    let law = stationary_law(params.b, params.d, params.c, tol)?;
    let table = solve_fixation(params, exact_lattice_size(&law))?;
    let mut sum = 0.0;
    for (size, l) in law.iter() {
        sum += f64::from(size) * table.value(&mutant_entry(size))? * l;
    }
    finish(
        2.0 * mu * sum,
        TauMethod::Exact,
        params,
        mu,
        tol,
        law.n_max(),
    )
}

/// Perturbation tables covering the stationary law of `params` at `tol`.
pub fn tables_for(
    params: &DemographicParams,
    tol: f64,
    opts: &PerturbationOptions,
) -> Result<PerturbationTables> {
    let law = stationary_law(params.b, params.d, params.c, tol)?;
    compute_tables(params, law.n_max().max(4), opts)
}

fn check_tables(params: &DemographicParams, t: &PerturbationTables) -> Result<()> {
    let tp = &t.params;
    if tp.b != params.b || tp.d != params.d || tp.c != params.c {
        return Err(invalid(format!(
            "tables computed for (b,d,c) = ({},{},{}), not ({},{},{})",
            tp.b, tp.d, tp.c, params.b, params.d, params.c
        )));
    }
    Ok(())
}

/// `2 mu (1/2 - sum_N N w((N-1, 1, 0)) l(N))`.
pub fn tau_linear(
    params: &DemographicParams,
    mu: f64,
    tol: f64,
    tables: &PerturbationTables,
) -> Result<SubstitutionRate> {
    params.validate()?;
    check_mu_tol(mu, tol)?;
    check_tables(params, tables)?;
    let law = stationary_law(params.b, params.d, params.c, tol)?;
    let mut correction = 0.0;
    for (size, l) in law.iter() {
        correction += f64::from(size) * w_value(&mutant_entry(size), params, tables)? * l;
    }
    finish(
        2.0 * mu * (0.5 - correction),
        TauMethod::Linear,
        params,
        mu,
        tol,
        law.n_max(),
    )
}

pub fn tau(
    params: &DemographicParams,
    mu: f64,
    tol: f64,
    method: TauMethod,
) -> Result<SubstitutionRate> {
    check_no_overdominance(params.delta, params.delta_prime)?;
    match method {
        TauMethod::Exact => tau_exact(params, mu, tol),
        TauMethod::Linear => {
            let t = tables_for(params, tol, &PerturbationOptions::default())?;
            tau_linear(params, mu, tol, &t)
        }
    }
}

/// `w = delta v + delta' v'`.
pub fn w_value(
    s: &PopulationState,
    params: &DemographicParams,
    tables: &PerturbationTables,
) -> Result<f64> {
    let mut w = 0.0;
    if params.delta != 0.0 {
        w += params.delta * v_value(s, tables)?;
    }
    if params.delta_prime != 0.0 {
        w += params.delta_prime * v_prime_value(s, tables)?;
    }
    Ok(w)
}

/// Rejects overdominance (`delta > delta'`, or equal nonzero penalties).
pub fn check_no_overdominance(delta: f64, delta_prime: f64) -> Result<()> {
    if delta > delta_prime || (delta == delta_prime && delta != 0.0) {
        return Err(invalid(format!(
            "overdominance excluded: need delta < delta' (got delta = {delta}, delta' = {delta_prime})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VortexRow {
    pub d: f64,
    pub tau: f64,
    pub t_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VortexCurve {
    pub b: f64,
    pub c: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub mu: f64,
    pub method: TauMethod,
    pub rows: Vec<VortexRow>,
}

impl VortexCurve {
    pub fn t_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].t_mean < w[0].t_mean)
    }

    pub fn provenance(&self) -> String {
        format!(
            "b={} c={} delta={} delta_prime={} mu={} method={}",
            self.b,
            self.c,
            self.delta,
            self.delta_prime,
            self.mu,
            self.method.label()
        )
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = TableWriter::new(out, &[self.provenance()], &["d", "tau", "T"])?;
        for r in &self.rows {
            w.row([fmt_f64(r.d), fmt_f64(r.tau), fmt_f64(r.t_mean)])?;
        }
        w.finish()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn vortex_curve(
    d_grid: &[f64],
    b: f64,
    c: f64,
    delta: f64,
    delta_prime: f64,
    mu: f64,
    method: TauMethod,
    tol: f64,
) -> Result<VortexCurve> {
    if d_grid.is_empty() {
        return Err(invalid("d grid is empty"));
    }
    if d_grid.iter().any(|d| !(*d >= 0.0)) || d_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("d grid must be strictly increasing and >= 0"));
    }
    check_no_overdominance(delta, delta_prime)?;
    let rows: Result<Vec<VortexRow>> = d_grid
        .par_iter()
        .map(|&d| {
            let p = DemographicParams::new(b, d, c, delta, delta_prime)?;
            let r = tau(&p, mu, tol, method)?;
            Ok(VortexRow {
                d,
                tau: r.tau,
                t_mean: r.t_mean,
            })
        })
        .collect();
    Ok(VortexCurve {
        b,
        c,
        delta,
        delta_prime,
        mu,
        method,
        rows: rows?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    /// `(state, w at d, w at d')`.
    pub probes: Vec<(PopulationState, f64, f64)>,
}

impl MonotonicityReport {
    pub fn all_nonincreasing(&self) -> bool {
        self.probes.iter().all(|(_, a, b)| b <= a)
    }
}

/// Compares `w` at two death rates over the given probe states.
pub fn w_monotonicity_in_d(
    states: &[PopulationState],
    params: &DemographicParams,
    d: f64,
    dprime: f64,
    tables_d: &PerturbationTables,
    tables_dprime: &PerturbationTables,
) -> Result<MonotonicityReport> {
    if !(dprime > d) {
        return Err(invalid(format!("need d' > d, got d = {d}, d' = {dprime}")));
    }
    let pd = params.with_d(d)?;
    let pdp = params.with_d(dprime)?;
    check_tables(&pd, tables_d)?;
    check_tables(&pdp, tables_dprime)?;
    let probes = states
        .iter()
        .map(|s| {
            Ok((
                *s,
                w_value(s, &pd, tables_d)?,
                w_value(s, &pdp, tables_dprime)?,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(MonotonicityReport { probes })
}

/// Both sides of the pivot rearrangement of `tau(d') - tau(d)` at first order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionCheck {
    pub n0: u32,
    /// `sum N w(d) l(d) - sum N w(d') l(d')`.
    pub raw: f64,
    /// `sum N l(d) (w(d) - w(d')) - sum (N w(d') - N0 w_{N0}(d')) (l(d') - l(d))`.
    pub pivoted: f64,
}

impl DecompositionCheck {
    pub fn relative_gap(&self) -> f64 {
        (self.raw - self.pivoted).abs() / self.raw.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn decomposition_check(
    params: &DemographicParams,
    dprime: f64,
    tol: f64,
    tables_d: &PerturbationTables,
    tables_dprime: &PerturbationTables,
) -> Result<DecompositionCheck> {
    let pd = *params;
    let pdp = params.with_d(dprime)?;
    check_tables(&pd, tables_d)?;
    check_tables(&pdp, tables_dprime)?;
    let law = stationary_law(pd.b, pd.d, pd.c, tol)?;
    let law_p = stationary_law(pdp.b, pdp.d, pdp.c, tol)?;
    let n0 = crate::demography::crossing_index(&law, &law_p)?.n0.max(2);
    let upto = law.n_max().min(law_p.n_max());
    let nw = |size: u32, p: &DemographicParams, t: &PerturbationTables| -> Result<f64> {
        Ok(f64::from(size) * w_value(&mutant_entry(size), p, t)?)
    };
    let pivot = nw(n0, &pdp, tables_dprime)?;
    let (mut raw, mut pivoted) = (0.0, 0.0);
    for size in 2..=upto {
        let (l, lp) = (law.prob(size), law_p.prob(size));
        let (a, b) = (nw(size, &pd, tables_d)?, nw(size, &pdp, tables_dprime)?);
        raw += a * l - b * lp;
        pivoted += l * (a - b) - (b - pivot) * (lp - l);
    }
    Ok(DecompositionCheck { n0, raw, pivoted })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neutral_rate_is_mu() {
        let p = DemographicParams::neutral(1.0, 1.0, 1.0).unwrap();
        for mu in [0.5, 1.0] {
            let e = tau_exact(&p, mu, DEFAULT_TOL).unwrap();
            assert!((e.tau - mu).abs() < 1e-8, "{}", e.tau);
            let l = tau(&p, mu, DEFAULT_TOL, TauMethod::Linear).unwrap();
            assert!((l.tau - mu).abs() < 1e-8);
            assert!((e.t_mean - 1.0 / mu).abs() < 1e-7);
        }
    }

    #[test]
    fn deleterious_slows_fixation() {
        let p = DemographicParams::new(0.5, 1.0, 1.0, 0.0, 0.1).unwrap();
        assert!(tau_exact(&p, 0.5, DEFAULT_TOL).unwrap().tau < 0.5);
        let t = tables_for(&p, DEFAULT_TOL, &PerturbationOptions::default()).unwrap();
        let lo = tau_linear(&p, 0.5, DEFAULT_TOL, &t).unwrap().tau;
        let hi = tau_linear(
            &p.with_perturbation(0.0, 0.2).unwrap(),
            0.5,
            DEFAULT_TOL,
            &t,
        )
        .unwrap()
        .tau;
        assert!(hi < lo && lo < 0.5);
    }

    #[test]
    fn overdominance_rejected() {
        assert!(check_no_overdominance(0.2, 0.1).is_err());
        assert!(check_no_overdominance(0.1, 0.1).is_err());
        assert!(check_no_overdominance(0.0, 0.0).is_ok());
        assert!(vortex_curve(
            &[1.0, 2.0],
            0.5,
            1.0,
            0.2,
            0.1,
            1.0,
            TauMethod::Exact,
            1e-12
        )
        .is_err());
    }

    #[test]
    fn flat_neutral_curve() {
        let c = vortex_curve(
            &[0.5, 1.0, 2.0],
            0.5,
            1.0,
            0.0,
            0.0,
            1.0,
            TauMethod::Exact,
            1e-12,
        )
        .unwrap();
        for r in &c.rows {
            assert!((r.t_mean - 1.0).abs() < 1e-8);
        }
        assert!(vortex_curve(
            &[1.0, 1.0],
            0.5,
            1.0,
            0.0,
            0.0,
            1.0,
            TauMethod::Exact,
            1e-12
        )
        .is_err());
    }

    #[test]
    fn w_basics() {
        let p = DemographicParams::neutral(0.02, 1.0, 1.0).unwrap();
        let t = tables_for(&p, DEFAULT_TOL, &PerturbationOptions::default()).unwrap();
        let s = PopulationState::new(4, 1, 0).unwrap();
        assert_eq!(w_value(&s, &p, &t).unwrap(), 0.0);
        let q = p.with_perturbation(0.01, 0.02).unwrap();
        assert_eq!(
            w_value(&PopulationState::new(3, 0, 0).unwrap(), &q, &t).unwrap(),
            0.0
        );
        assert!(w_value(&s, &q, &t).unwrap() > 0.0);
    }
}
