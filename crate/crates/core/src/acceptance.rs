//! Built-in verification suite: one check per acceptance criterion, each
//! returning a pass/fail verdict with a short numeric summary.

use std::fmt;

use crate::demography::{crossing_index, stationary_law};
use crate::error::Result;
use crate::exact::{fd_gradient_table, neutral_fixation, solve_fixation};
use crate::model::{DemographicParams, PopulationState};
use crate::perturbation::{
    compute_tables, fit_y_asymptotics, fixation_first_order, residuals, v_prime_value, v_value,
    PerturbationOptions, TableMethod, TableSource,
};
use crate::simulate::{mc_fixation, plan_meltdown, simulate_microscopic, MicroConfig};
use crate::substitution::{
    tables_for, tau_exact, tau_linear, vortex_curve, TauMethod, DEFAULT_TOL,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "[{verdict}] {:>2} {}: {}",
            self.id, self.name, self.detail
        )
    }
}

fn verdict(
    id: u32,
    name: &'static str,
    run: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionResult {
    match run() {
        Ok((passed, detail)) => CriterionResult {
            id,
            name,
            passed,
            detail,
        },
        Err(e) => CriterionResult {
            id,
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn st(k: u32, m: u32, n: u32) -> PopulationState {
    PopulationState::new(k, m, n).expect("probe states have N >= 2")
}

pub const NAMES: [&str; 13] = [
    "neutral exactness",
    "monte carlo vs formula",
    "recurrence vs finite differences",
    "recurrence residuals",
    "construction diagnostics",
    "stationary law",
    "single crossing",
    "neutral substitution rate",
    "vortex monotonicity",
    "first-order remainder",
    "meltdown simulation",
    "determinism",
    "microscopic smoke test",
];

pub fn neutral_exactness() -> CriterionResult {
    verdict(1, NAMES[0], || {
        let mut worst: f64 = 0.0;
        for (b, d, c) in [(2.0, 1.0, 0.5), (0.5, 1.0, 1.0), (5.0, 0.2, 1.0)] {
            let t = solve_fixation(&DemographicParams::neutral(b, d, c)?, 60)?;
            for (s, u) in t.lattice.states().zip(&t.u) {
                if s.size() <= 30 {
                    worst = worst.max((u - neutral_fixation(&s)).abs());
                }
            }
        }
        Ok((
            worst <= 1e-8,
            format!("max |u - p| over N <= 30 = {worst:.3e} (limit 1e-8)"),
        ))
    })
}

pub fn monte_carlo_vs_formula() -> CriterionResult {
    verdict(2, NAMES[1], || {
        let p = DemographicParams::neutral(2.0, 1.0, 0.5)?;
        let e = mc_fixation(st(3, 2, 1), &p, 100_000, 20_240_601, 100_000_000)?;
        Ok((
            e.contains(1.0 / 3.0),
            format!(
                "estimate {:.5} +- {:.5} (99%), censored {}, target 1/3",
                e.estimate, e.ci_halfwidth_99, e.censored
            ),
        ))
    })
}

/// `(b, d, c)` inside `b <= c/24` used by criteria 3 to 5.
const SMALL_B: (f64, f64, f64) = (0.02, 1.0, 1.0);

fn small_b_params() -> Result<DemographicParams> {
    DemographicParams::neutral(SMALL_B.0, SMALL_B.1, SMALL_B.2)
}

fn recurrence_tables(n_max: u32) -> Result<crate::perturbation::PerturbationTables> {
    let opts = PerturbationOptions {
        method: TableMethod::Recurrence,
        ..Default::default()
    };
    compute_tables(&small_b_params()?, n_max, &opts)
}

pub fn oracle_equivalence() -> CriterionResult {
    verdict(3, NAMES[2], || {
        let p = small_b_params()?;
        let t = recurrence_tables(20)?;
        let fd = fd_gradient_table(&p, 1e-3, 120)?;
        let (mut worst_v, mut worst_vp, mut count) = (0.0f64, 0.0f64, 0);
        let mut ok = true;
        for s in fd.lattice.states() {
            if s.size() > 15 || s.class().is_absorbing() {
                continue;
            }
            count += 1;
            let (vf, vpf) = fd.get(&s)?;
            let (v, vp) = (v_value(&s, &t)?, v_prime_value(&s, &t)?);
            let (ev, evp) = ((v - vf).abs(), (vp - vpf).abs());
            ok &= ev <= 1e-4f64.max(0.01 * vf.abs()) && evp <= 1e-4f64.max(0.01 * vpf.abs());
            worst_v = worst_v.max(ev);
            worst_vp = worst_vp.max(evp);
        }
        Ok((
            ok && t.source == TableSource::Recurrence,
            format!(
                "{count} states, max |v - v_fd| = {worst_v:.2e}, max |v' - v'_fd| = {worst_vp:.2e}"
            ),
        ))
    })
}

pub fn recurrence_residuals() -> CriterionResult {
    verdict(4, NAMES[3], || {
        let t = recurrence_tables(120)?;
        let r = residuals(&t);
        let (a, b) = (r.max_first_layer(), r.max_second_layer());
        let ok = a <= 1e-10 && b <= 1e-10 && r.s2_identity <= 1e-10 && r.h3_split <= 1e-10;
        Ok((
            ok,
            format!(
                "first layer {a:.2e}, second layer {b:.2e}, s2 identity {:.2e}, h3 split {:.2e}",
                r.s2_identity, r.h3_split
            ),
        ))
    })
}

pub fn construction_diagnostics() -> CriterionResult {
    verdict(5, NAMES[4], || {
        let t = recurrence_tables(120)?;
        let c = SMALL_B.2;
        let levels: Vec<_> = t
            .diagnostics
            .levels
            .iter()
            .filter(|l| l.size >= 4)
            .collect();
        let max_g = levels.iter().map(|l| l.norm_g).fold(0.0, f64::max);
        let max_k = levels.iter().map(|l| l.norm_k).fold(0.0, f64::max);
        let k3 = t.diagnostics.levels.first().map_or(f64::NAN, |l| l.norm_k);
        let (c1, c2, fit) = fit_y_asymptotics(&t, 60, 120)?;
        let ok = max_g <= 9.0 && max_k < c / 2.0 && fit <= 0.01;
        Ok((
            ok,
            format!(
                "N in 4..=120: max ||G_N|| = {max_g:.3}, max ||K_N|| = {max_k:.3} (c/2 = {}); ||K_3|| = {k3:.3}; \
                 y_N fit C1 = {c1:.4e}, C2 = {c2:.4e}, max rel residual {fit:.2e}",
                c / 2.0
            ),
        ))
    })
}

pub fn stationary() -> CriterionResult {
    verdict(6, NAMES[5], || {
        let mut worst_bal: f64 = 0.0;
        let mut worst_norm: f64 = 0.0;
        for (b, d, c) in [
            (1.0, 0.0, 1.0),
            (2.0, 1.0, 0.5),
            (10.0, 0.5, 0.1),
            (0.02, 1.0, 1.0),
        ] {
            let law = stationary_law(b, d, c, 1e-13)?;
            worst_bal = worst_bal.max(law.max_balance_residual());
            worst_norm = worst_norm
                .max((law.total() + law.tail_mass - 1.0).abs())
                .max(law.tail_mass);
        }
        let law = stationary_law(1.0, 0.0, 1.0, 1e-14)?;
        let target = 0.5 / (std::f64::consts::E - 2.0);
        let err = (law.prob(2) - target).abs();
        Ok((
            worst_bal <= 1e-12 && worst_norm <= 1e-12 && err <= 1e-10,
            format!(
                "balance {worst_bal:.2e}, normalization {worst_norm:.2e}, l(2) = {:.9} (error {err:.1e})",
                law.prob(2)
            ),
        ))
    })
}

pub fn single_crossing() -> CriterionResult {
    verdict(7, NAMES[6], || {
        let a = stationary_law(4.0, 1.0, 1.0, 1e-14)?;
        let b = stationary_law(4.0, 2.0, 1.0, 1e-14)?;
        let r = crossing_index(&a, &b)?;
        Ok((
            r.single_crossing() && r.q[0] > 1.0,
            format!(
                "N0 = {}, sign changes {}, q strictly decreasing {}, q(2) = {:.4}",
                r.n0, r.sign_changes, r.q_strictly_decreasing, r.q[0]
            ),
        ))
    })
}

pub fn neutral_substitution() -> CriterionResult {
    verdict(8, NAMES[7], || {
        let p = DemographicParams::neutral(1.0, 1.0, 1.0)?;
        let t = tables_for(&p, DEFAULT_TOL, &PerturbationOptions::default())?;
        let mut worst: f64 = 0.0;
        for mu in [0.5, 1.0] {
            worst = worst.max((tau_exact(&p, mu, DEFAULT_TOL)?.tau - mu).abs());
            worst = worst.max((tau_linear(&p, mu, DEFAULT_TOL, &t)?.tau - mu).abs());
        }
        Ok((
            worst <= 1e-8,
            format!("max |tau - mu| = {worst:.2e} over both methods, mu in {{1/2, 1}}"),
        ))
    })
}

/// The `0.5:3:0.25` grid of death rates used for the b = 10, c = 0.1 curve.
pub fn figure_grid() -> Vec<f64> {
    (0..=10).map(|i| 0.5 + 0.25 * f64::from(i)).collect()
}

pub fn vortex_monotonicity() -> CriterionResult {
    verdict(9, NAMES[8], || {
        let grid = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
        let lin = vortex_curve(
            &grid,
            0.02,
            1.0,
            0.01,
            0.02,
            0.5,
            TauMethod::Linear,
            DEFAULT_TOL,
        )?;
        let ex = vortex_curve(
            &grid,
            0.02,
            1.0,
            0.01,
            0.02,
            0.5,
            TauMethod::Exact,
            DEFAULT_TOL,
        )?;
        let fig = vortex_curve(
            &figure_grid(),
            10.0,
            0.1,
            0.0,
            0.1,
            1.0,
            TauMethod::Exact,
            DEFAULT_TOL,
        )?;
        let ends = |c: &crate::substitution::VortexCurve| {
            (
                c.rows[0].t_mean,
                c.rows.last().map_or(f64::NAN, |r| r.t_mean),
            )
        };
        let (l0, l1) = ends(&lin);
        let (e0, e1) = ends(&ex);
        let (f0, f1) = ends(&fig);
        Ok((
            lin.t_strictly_decreasing() && ex.t_strictly_decreasing() && fig.t_strictly_decreasing(),
            format!(
                "small b: T linear {l0:.8}->{l1:.8}, exact {e0:.8}->{e1:.8}; b=10,c=0.1: T {f0:.5}->{f1:.5}"
            ),
        ))
    })
}

pub fn first_order_remainder() -> CriterionResult {
    verdict(10, NAMES[9], || {
        let base = small_b_params()?;
        let t = recurrence_tables(40)?;
        let probes = [
            st(1, 1, 0),
            st(0, 1, 1),
            st(1, 0, 1),
            st(2, 1, 0),
            st(1, 2, 0),
            st(1, 1, 1),
            st(3, 1, 0),
            st(2, 2, 1),
            st(0, 2, 2),
            st(4, 1, 1),
        ];
        let gap = |dl: f64, dp: f64| -> Result<f64> {
            let p = base.with_perturbation(dl, dp)?;
            let exact = solve_fixation(&p, 40)?;
            let mut worst: f64 = 0.0;
            for s in &probes {
                worst = worst.max((fixation_first_order(s, &p, &t)?.raw - exact.value(s)?).abs());
            }
            Ok(worst)
        };
        let (g1, g2) = (gap(0.02, 0.04)?, gap(0.01, 0.02)?);
        let ratio = g1 / g2;
        Ok((
            ratio >= 3.0,
            format!("gap {g1:.3e} -> {g2:.3e}, ratio {ratio:.3} (limit >= 3)"),
        ))
    })
}

/// Meltdown parameters of criterion 11: small b, penalties large enough
/// that successive rates differ by more than the sampling error.
pub const MELTDOWN: (f64, f64, f64, f64, f64, f64) = (0.5, 0.02, 1.0, 0.2, 0.5, 1.0);
pub const MELTDOWN_SEEDS: u64 = 1_000_000;

pub fn meltdown_simulation() -> CriterionResult {
    verdict(11, NAMES[10], || {
        let (d0, b, c, dl, dp, mu) = MELTDOWN;
        let plan = plan_meltdown(d0, b, c, dl, dp, mu, 5, TauMethod::Exact, DEFAULT_TOL)?;
        let means = plan.pooled_means(1, MELTDOWN_SEEDS);
        let decreasing = means.windows(2).all(|w| w[1].0 < w[0].0);
        let mut within = true;
        let mut parts = Vec::new();
        for ((mean, se), tau) in means.iter().zip(&plan.tau) {
            let z = (mean - 1.0 / tau) / se;
            within &= z.abs() <= 3.0;
            parts.push(format!("{mean:.5}(1/tau {:.5}, z {z:+.2})", 1.0 / tau));
        }
        Ok((
            decreasing && within,
            format!("{} seeds: {}", MELTDOWN_SEEDS, parts.join(", ")),
        ))
    })
}

pub fn determinism() -> CriterionResult {
    verdict(12, NAMES[11], || {
        let run = || -> Result<Vec<u8>> {
            let mut out = Vec::new();
            let p = DemographicParams::new(2.0, 1.0, 0.5, 0.0, 0.1)?;
            let e = mc_fixation(st(4, 1, 0), &p, 2000, 99, 10_000_000)?;
            out.extend(format!("{:?},{:?}\n", e.estimate, e.ci_halfwidth_99).into_bytes());
            let plan = plan_meltdown(
                0.5,
                0.02,
                1.0,
                0.01,
                0.02,
                1.0,
                3,
                TauMethod::Linear,
                DEFAULT_TOL,
            )?;
            plan.sample(7).write_csv(&mut out, &[])?;
            for (m, s) in plan.pooled_means(1, 10_000) {
                out.extend(format!("{m:?},{s:?}\n").into_bytes());
            }
            let mut cfg = MicroConfig::new(4, 2.0, 1.0, 0.5, 5, 50.0);
            cfg.mu = 0.1;
            cfg.delta = 0.01;
            cfg.delta_prime = 0.02;
            simulate_microscopic(&cfg)?.write_csv(&mut out, &[])?;
            Ok(out)
        };
        let pool = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| crate::Error::Io(std::io::Error::other(e.to_string())))
        };
        let a = pool(1)?.install(run)?;
        let b = pool(4)?.install(run)?;
        let c = pool(2)?.install(run)?;
        Ok((
            a == b && b == c,
            format!(
                "{} bytes, identical across 1/2/4 workers: {}",
                a.len(),
                a == b && b == c
            ),
        ))
    })
}

pub fn microscopic_smoke() -> CriterionResult {
    verdict(13, NAMES[12], || {
        let (b, d0, c) = (2.0, 1.0, 0.5);
        let cfg = MicroConfig::new(4, b, d0, c, 13, 20_000.0);
        let run = simulate_microscopic(&cfg)?;
        let monomorphic = run.events.is_empty() && run.max_load == 0;
        let law = stationary_law(b, d0, c, 1e-14)?;
        let pmf = run.occupancy_pmf();
        let top = law.n_max().max(pmf.keys().copied().max().unwrap_or(2));
        let tv = 0.5
            * (2..=top)
                .map(|n| (pmf.get(&n).copied().unwrap_or(0.0) - law.prob(n)).abs())
                .sum::<f64>();
        Ok((
            monomorphic && tv < 0.05 && !run.censored,
            format!("monomorphic {monomorphic}, TV distance {tv:.4} (limit 0.05), mean size {:.3} vs {:.3}",
                pmf.iter().map(|(n, p)| f64::from(*n) * p).sum::<f64>(), law.mean()),
        ))
    })
}

pub type Criterion = fn() -> CriterionResult;

pub const ALL: [Criterion; 13] = [
    neutral_exactness,
    monte_carlo_vs_formula,
    oracle_equivalence,
    recurrence_residuals,
    construction_diagnostics,
    stationary,
    single_crossing,
    neutral_substitution,
    vortex_monotonicity,
    first_order_remainder,
    meltdown_simulation,
    determinism,
    microscopic_smoke,
];

pub fn run_all() -> Vec<CriterionResult> {
    ALL.iter().map(|f| f()).collect()
}
