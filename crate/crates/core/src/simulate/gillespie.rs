//! Exact-event simulation of the three-type process.

use std::io::Write;

use rayon::prelude::*;

use super::rng::RngStream;
use crate::csv::{fmt_f64, TableWriter};
use crate::error::{invalid, Error, Result};
use crate::model::{
    transitions, DemographicParams, Event, GeneralRates, PopulationState, StateClass,
};

pub const DEFAULT_EVENT_CAP: u64 = 100_000_000;

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.5758293035489;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Absorption {
    MutantFixed,
    ResidentFixed,
    Censored,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorptionOutcome {
    pub absorbed_in: Absorption,
    pub final_state: PopulationState,
    pub events: u64,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub event: Event,
    /// State after the event.
    pub state: PopulationState,
}

/// Runs until absorption or `event_cap` events, passing every event to `log`.
pub fn run_logged<F: FnMut(&EventRecord)>(
    start: PopulationState,
    rates: &GeneralRates,
    rng: &mut RngStream,
    event_cap: u64,
    mut log: F,
) -> AbsorptionOutcome {
    let mut state = start;
    let mut time = 0.0;
    let mut events = 0u64;
    loop {
        match state.class() {
            StateClass::MutantFixed => {
                return AbsorptionOutcome {
                    absorbed_in: Absorption::MutantFixed,
                    final_state: state,
                    events,
                    time,
                }
            }
            StateClass::ResidentFixed => {
                return AbsorptionOutcome {
                    absorbed_in: Absorption::ResidentFixed,
                    final_state: state,
                    events,
                    time,
                }
            }
            StateClass::Interior => {}
        }
        if events >= event_cap {
            return AbsorptionOutcome {
                absorbed_in: Absorption::Censored,
                final_state: state,
                events,
                time,
            };
        }
        let ts = transitions(&state, rates);
        let weights: [f64; 6] = std::array::from_fn(|i| ts.entries[i].rate);
        let total: f64 = weights.iter().sum();
        time += rng.exponential(total);
        let pick = &ts.entries[rng.categorical(&weights, total)];
        state = pick.target.expect("positive-rate jump has a target");
        events += 1;
        log(&EventRecord {
            time,
            event: pick.event,
            state,
        });
    }
}

pub fn run_to_absorption(
    start: PopulationState,
    params: &DemographicParams,
    rng: &mut RngStream,
    event_cap: u64,
) -> AbsorptionOutcome {
    run_logged(start, &GeneralRates::from(params), rng, event_cap, |_| {})
}

pub fn write_event_log<W: Write>(
    start: PopulationState,
    records: &[EventRecord],
    out: W,
    comments: &[String],
) -> Result<()> {
    let mut w = TableWriter::new(out, comments, &["time", "event", "k", "m", "n"])?;
    w.row([
        fmt_f64(0.0),
        "start".to_string(),
        start.k().to_string(),
        start.m().to_string(),
        start.n().to_string(),
    ])?;
    for r in records {
        w.row([
            fmt_f64(r.time),
            r.event.label().to_string(),
            r.state.k().to_string(),
            r.state.m().to_string(),
            r.state.n().to_string(),
        ])?;
    }
    w.finish()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub ci_halfwidth_99: f64,
    pub fixed: u64,
    pub reps: u64,
    pub censored: u64,
}

impl McEstimate {
    pub fn contains(&self, x: f64) -> bool {
        (x - self.estimate).abs() <= self.ci_halfwidth_99
    }
}

/// Fraction of replicates absorbed with allele a fixed; replicate `r` uses
/// stream `r` of `seed`. Fails if more than 0.1% of replicates hit the cap.
pub fn mc_fixation(
    start: PopulationState,
    params: &DemographicParams,
    reps: u64,
    seed: u64,
    event_cap: u64,
) -> Result<McEstimate> {
    params.validate()?;
    if reps == 0 {
        return Err(invalid("reps must be >= 1"));
    }
    let rates = GeneralRates::from(params);
    let (fixed, censored) = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(seed, r);
            match run_logged(start, &rates, &mut rng, event_cap, |_| {}).absorbed_in {
                Absorption::MutantFixed => (1u64, 0u64),
                Absorption::ResidentFixed => (0, 0),
                Absorption::Censored => (0, 1),
            }
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if censored * 1000 > reps {
        return Err(Error::Censored { censored, reps });
    }
    let n = (reps - censored) as f64;
    let estimate = fixed as f64 / n;
    Ok(McEstimate {
        estimate,
        ci_halfwidth_99: Z_99 * (estimate * (1.0 - estimate) / n).sqrt(),
        fixed,
        reps,
        censored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(k: u32, m: u32, n: u32) -> PopulationState {
        PopulationState::new(k, m, n).unwrap()
    }

    #[test]
    fn already_absorbed() {
        let p = DemographicParams::neutral(1.0, 1.0, 1.0).unwrap();
        let mut rng = RngStream::new(1, 0);
        let out = run_to_absorption(st(0, 0, 4), &p, &mut rng, 10);
        assert_eq!(out.absorbed_in, Absorption::MutantFixed);
        assert_eq!(out.events, 0);
        let est = mc_fixation(st(0, 0, 5), &p, 100, 3, 1000).unwrap();
        assert_eq!(est.estimate, 1.0);
        assert_eq!(est.ci_halfwidth_99, 0.0);
    }

    #[test]
    fn single_steps_and_floor() {
        let p = DemographicParams::new(2.0, 1.0, 0.5, 0.1, 0.2).unwrap();
        let rates = GeneralRates::from(&p);
        for stream in 0..20 {
            let mut rng = RngStream::new(11, stream);
            let mut prev = st(2, 2, 2);
            run_logged(prev, &rates, &mut rng, 100_000, |r| {
                let diff: i64 = prev
                    .counts()
                    .iter()
                    .zip(r.state.counts())
                    .map(|(a, b)| (i64::from(*a) - i64::from(b)).abs())
                    .sum();
                assert_eq!(diff, 1);
                assert!(r.state.size() >= 2);
                prev = r.state;
            });
        }
    }

    #[test]
    fn deterministic() {
        let p = DemographicParams::neutral(2.0, 1.0, 0.5).unwrap();
        let a = run_to_absorption(st(3, 2, 1), &p, &mut RngStream::new(5, 9), 1_000_000);
        let b = run_to_absorption(st(3, 2, 1), &p, &mut RngStream::new(5, 9), 1_000_000);
        assert_eq!(a, b);
    }

    #[test]
    fn censoring_reported() {
        let p = DemographicParams::neutral(2.0, 1.0, 0.5).unwrap();
        let out = run_to_absorption(st(10, 10, 10), &p, &mut RngStream::new(5, 0), 3);
        assert_eq!(out.absorbed_in, Absorption::Censored);
        assert!(matches!(
            mc_fixation(st(10, 10, 10), &p, 50, 1, 3),
            Err(Error::Censored { .. })
        ));
    }
}
