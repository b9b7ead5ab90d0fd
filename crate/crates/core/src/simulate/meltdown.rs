//! Limiting substitution process: successive fixations of deleterious
//! mutations, each raising the baseline death rate by `delta'`.

use std::io::Write;

use rayon::prelude::*;

use super::rng::RngStream;
use crate::csv::{fmt_f64, TableWriter};
use crate::error::{invalid, Error, Result};
use crate::model::DemographicParams;
use crate::substitution::{tau, TauMethod};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeltdownStep {
    pub index: u32,
    pub d: f64,
    pub waiting_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeltdownTrajectory {
    pub steps: Vec<MeltdownStep>,
}

impl MeltdownTrajectory {
    pub fn write_csv<W: Write>(&self, out: W, comments: &[String]) -> Result<()> {
        let mut w = TableWriter::new(out, comments, &["fixation_index", "d", "waiting_time"])?;
        for s in &self.steps {
            w.row([s.index.to_string(), fmt_f64(s.d), fmt_f64(s.waiting_time)])?;
        }
        w.finish()
    }
}

/// The rates `tau_j = tau(d0 + j delta')` of a meltdown, computed once and
/// shared by every sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct MeltdownPlan {
    pub d: Vec<f64>,
    pub tau: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn plan_meltdown(
    d0: f64,
    b: f64,
    c: f64,
    delta: f64,
    delta_prime: f64,
    mu: f64,
    n_fixations: u32,
    method: TauMethod,
    tol: f64,
) -> Result<MeltdownPlan> {
    if !(delta_prime > delta) {
        return Err(invalid(format!(
            "meltdown needs delta' > delta (got delta = {delta}, delta' = {delta_prime})"
        )));
    }
    if n_fixations == 0 {
        return Err(invalid("n_fixations must be >= 1"));
    }
    let d: Vec<f64> = (0..n_fixations)
        .map(|j| d0 + f64::from(j) * delta_prime)
        .collect();
    let tau: Result<Vec<f64>> = d
        .par_iter()
        .map(|&dj| {
            let p = DemographicParams::new(b, dj, c, delta, delta_prime)?;
            let r = tau(&p, mu, tol, method)?;
            if !(r.tau > 0.0) {
                return Err(Error::NonPositiveRate { tau: r.tau, d: dj });
            }
            Ok(r.tau)
        })
        .collect();
    Ok(MeltdownPlan { d, tau: tau? })
}

impl MeltdownPlan {
    /// One trajectory from stream 0 of `seed`.
    pub fn sample(&self, seed: u64) -> MeltdownTrajectory {
        self.sample_stream(seed, 0)
    }

    pub fn sample_stream(&self, seed: u64, stream: u64) -> MeltdownTrajectory {
        let mut rng = RngStream::new(seed, stream);
        let steps = self
            .d
            .iter()
            .zip(&self.tau)
            .enumerate()
            .map(|(j, (&d, &t))| MeltdownStep {
                index: j as u32,
                d,
                waiting_time: rng.exponential(t),
            })
            .collect();
        MeltdownTrajectory { steps }
    }

    /// Per-fixation mean and standard error of the waiting time, pooled
    /// over seeds `first_seed..first_seed + n_seeds`.
    pub fn pooled_means(&self, first_seed: u64, n_seeds: u64) -> Vec<(f64, f64)> {
        let len = self.tau.len();
        // Fixed-size chunks summed in order keep the result independent of
        // the number of worker threads.
        const CHUNK: u64 = 4096;
        let chunks: Vec<(Vec<f64>, Vec<f64>)> = (0..n_seeds.div_ceil(CHUNK))
            .into_par_iter()
            .map(|ci| {
                let mut acc = (vec![0.0; len], vec![0.0; len]);
                let lo = first_seed + ci * CHUNK;
                let hi = (lo + CHUNK).min(first_seed + n_seeds);
                for s in lo..hi {
                    for (i, st) in self.sample(s).steps.iter().enumerate() {
                        acc.0[i] += st.waiting_time;
                        acc.1[i] += st.waiting_time * st.waiting_time;
                    }
                }
                acc
            })
            .collect();
        let mut sum = vec![0.0; len];
        let mut sq = vec![0.0; len];
        for (a, b) in &chunks {
            for i in 0..len {
                sum[i] += a[i];
                sq[i] += b[i];
            }
        }
        let n = n_seeds as f64;
        (0..len)
            .map(|i| {
                let mean = sum[i] / n;
                let var = (sq[i] / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
                (mean, (var / n).sqrt())
            })
            .collect()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_meltdown(
    d0: f64,
    b: f64,
    c: f64,
    delta: f64,
    delta_prime: f64,
    mu: f64,
    n_fixations: u32,
    seed: u64,
    method: TauMethod,
    tol: f64,
) -> Result<MeltdownTrajectory> {
    Ok(plan_meltdown(d0, b, c, delta, delta_prime, mu, n_fixations, method, tol)?.sample(seed))
}
