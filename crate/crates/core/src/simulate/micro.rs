//! Individual-based simulation with per-strand mutations at many loci.
//!
//! Each individual carries two strands, each a sorted list of the mutated
//! loci it holds. Fecundity is neutral: the population reproduces at total
//! rate `bN`, a child draws two distinct parents uniformly and takes one
//! gamete from each, with every locus assorting independently. An
//! individual dies at rate `d(x) + c(N - 1)`, where
//! `d(x) = d0 + delta * (#heterozygous loci) + delta' * (#homozygous loci)`,
//! and no death occurs at `N = 2`. Every strand mutates at rate `mu / K`,
//! each time at a fresh locus. A locus carried on both strands of every
//! individual is fixed: it is removed from the genomes and `delta'` is added
//! to `d0`.

use std::collections::BTreeMap;
use std::io::Write;

use super::rng::RngStream;
use crate::csv::{fmt_f64, TableWriter};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MicroConfig {
    pub initial_size: u32,
    pub b: f64,
    pub d0: f64,
    pub c: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub mu: f64,
    pub k: f64,
    pub seed: u64,
    pub t_end: f64,
    /// Runs stop (censored) when the population exceeds this size.
    pub size_cap: u32,
    pub stop_at_first_mutation: bool,
}

impl MicroConfig {
    pub fn new(initial_size: u32, b: f64, d0: f64, c: f64, seed: u64, t_end: f64) -> Self {
        MicroConfig {
            initial_size,
            b,
            d0,
            c,
            delta: 0.0,
            delta_prime: 0.0,
            mu: 0.0,
            k: 1.0,
            seed,
            t_end,
            size_cap: 100_000,
            stop_at_first_mutation: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.initial_size < 2 {
            return Err(invalid("initial size must be >= 2"));
        }
        if !(self.b > 0.0 && self.c > 0.0 && self.d0 >= 0.0) {
            return Err(invalid("need b > 0, c > 0, d0 >= 0"));
        }
        if self.d0 + self.delta < 0.0 || self.d0 + self.delta_prime < 0.0 {
            return Err(invalid("perturbed death rates must stay >= 0"));
        }
        if !(self.mu >= 0.0) || !(self.k >= 1.0) {
            return Err(invalid("need mu >= 0 and K >= 1"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(invalid("t_end must be finite and > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Individual {
    strands: [Vec<u32>; 2],
}

impl Individual {
    fn load(&self) -> (u32, u32) {
        let [a, b] = &self.strands;
        let (mut i, mut j, mut het, mut hom) = (0, 0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Equal => {
                    hom += 1;
                    i += 1;
                    j += 1;
                }
                std::cmp::Ordering::Less => {
                    het += 1;
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    het += 1;
                    j += 1;
                }
            }
        }
        het += (a.len() - i + b.len() - j) as u32;
        (het, hom)
    }

    fn gamete(&self, rng: &mut RngStream) -> Vec<u32> {
        let [a, b] = &self.strands;
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::with_capacity(a.len().max(b.len()));
        while i < a.len() || j < b.len() {
            if i < a.len() && j < b.len() && a[i] == b[j] {
                out.push(a[i]);
                i += 1;
                j += 1;
            } else if j >= b.len() || (i < a.len() && a[i] < b[j]) {
                if rng.coin() {
                    out.push(a[i]);
                }
                i += 1;
            } else {
                if rng.coin() {
                    out.push(b[j]);
                }
                j += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MicroEventKind {
    Mutation,
    Fixation,
    Loss,
}

impl MicroEventKind {
    pub fn label(self) -> &'static str {
        match self {
            MicroEventKind::Mutation => "mutation",
            MicroEventKind::Fixation => "fixation",
            MicroEventKind::Loss => "loss",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroEvent {
    pub time: f64,
    pub kind: MicroEventKind,
    pub locus: u32,
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroRun {
    pub events: Vec<MicroEvent>,
    /// Time spent at each size while no mutation segregates.
    pub monomorphic_occupancy: BTreeMap<u32, f64>,
    pub first_mutation_time: Option<f64>,
    pub fixations: u32,
    pub final_size: u32,
    pub final_d0: f64,
    pub end_time: f64,
    pub censored: bool,
    /// Largest number of mutated loci seen in any individual.
    pub max_load: u32,
}

impl MicroRun {
    /// Occupancy normalized to a probability mass function.
    pub fn occupancy_pmf(&self) -> BTreeMap<u32, f64> {
        let total: f64 = self.monomorphic_occupancy.values().sum();
        self.monomorphic_occupancy
            .iter()
            .map(|(n, t)| (*n, t / total))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W, comments: &[String]) -> Result<()> {
        let mut w = TableWriter::new(out, comments, &["time", "event", "locus", "size"])?;
        for e in &self.events {
            w.row([
                fmt_f64(e.time),
                e.kind.label().to_string(),
                e.locus.to_string(),
                e.size.to_string(),
            ])?;
        }
        w.finish()
    }
}

struct Population {
    ind: Vec<Individual>,
    death: Vec<f64>,
    copies: BTreeMap<u32, u32>,
    d0: f64,
    delta: f64,
    delta_prime: f64,
}

impl Population {
    fn natural_death(&self, x: &Individual) -> f64 {
        let (het, hom) = x.load();
        self.d0 + self.delta * f64::from(het) + self.delta_prime * f64::from(hom)
    }

    fn count(&mut self, x: &Individual, sign: i64) {
        for s in &x.strands {
            for l in s {
                let e = self.copies.entry(*l).or_insert(0);
                *e = (i64::from(*e) + sign) as u32;
            }
        }
    }

    fn refresh_deaths(&mut self) {
        self.death = self.ind.iter().map(|x| self.natural_death(x)).collect();
    }
}

pub fn simulate_microscopic(cfg: &MicroConfig) -> Result<MicroRun> {
    cfg.validate()?;
    let mut rng = RngStream::new(cfg.seed, 0);
    let mut pop = Population {
        ind: vec![Individual::default(); cfg.initial_size as usize],
        death: vec![cfg.d0; cfg.initial_size as usize],
        copies: BTreeMap::new(),
        d0: cfg.d0,
        delta: cfg.delta,
        delta_prime: cfg.delta_prime,
    };
    let mut run = MicroRun {
        events: Vec::new(),
        monomorphic_occupancy: BTreeMap::new(),
        first_mutation_time: None,
        fixations: 0,
        final_size: cfg.initial_size,
        final_d0: cfg.d0,
        end_time: 0.0,
        censored: false,
        max_load: 0,
    };
    let mut next_locus = 0u32;
    let mut time = 0.0;
    loop {
        let size = pop.ind.len();
        let nf = size as f64;
        let birth = cfg.b * nf;
        let natural: f64 = pop.death.iter().sum();
        let death = if size > 2 {
            natural + cfg.c * nf * (nf - 1.0)
        } else {
            0.0
        };
        let mutation = 2.0 * nf * cfg.mu / cfg.k;
        let total = birth + death + mutation;
        let dt = rng.exponential(total);
        let monomorphic = pop.copies.is_empty();
        let step_end = (time + dt).min(cfg.t_end);
        if monomorphic {
            *run.monomorphic_occupancy.entry(size as u32).or_insert(0.0) += step_end - time;
        }
        if time + dt >= cfg.t_end {
            time = cfg.t_end;
            break;
        }
        time += dt;
        let which = rng.categorical(&[birth, death, mutation], total);
        match which {
            0 => {
                let i = rng.below(size);
                let mut j = rng.below(size - 1);
                if j >= i {
                    j += 1;
                }
                let child = Individual {
                    strands: [pop.ind[i].gamete(&mut rng), pop.ind[j].gamete(&mut rng)],
                };
                pop.count(&child, 1);
                let dd = pop.natural_death(&child);
                pop.ind.push(child);
                pop.death.push(dd);
            }
            1 => {
                // Per-capita death d(x_i) + c(N - 1): pick by natural part or
                // uniformly for the competition part.
                let comp = cfg.c * nf * (nf - 1.0);
                let victim = if rng.uniform() * death < comp {
                    rng.below(size)
                } else {
                    rng.categorical(&pop.death, natural)
                };
                let gone = pop.ind.swap_remove(victim);
                pop.death.swap_remove(victim);
                pop.count(&gone, -1);
            }
            _ => {
                let i = rng.below(size);
                let strand = usize::from(rng.coin());
                let locus = next_locus;
                next_locus += 1;
                pop.ind[i].strands[strand].push(locus);
                pop.copies.insert(locus, 1);
                pop.death[i] = pop.natural_death(&pop.ind[i]);
                if run.first_mutation_time.is_none() {
                    run.first_mutation_time = Some(time);
                }
                run.events.push(MicroEvent {
                    time,
                    kind: MicroEventKind::Mutation,
                    locus,
                    size: size as u32,
                });
                if cfg.stop_at_first_mutation {
                    break;
                }
            }
        }
        let size_now = pop.ind.len() as u32;
        let full = 2 * size_now;
        let settled: Vec<(u32, u32)> = pop
            .copies
            .iter()
            .filter(|(_, c)| **c == 0 || **c == full)
            .map(|(l, c)| (*l, *c))
            .collect();
        if !settled.is_empty() {
            for (locus, c) in &settled {
                pop.copies.remove(locus);
                if *c == 0 {
                    run.events.push(MicroEvent {
                        time,
                        kind: MicroEventKind::Loss,
                        locus: *locus,
                        size: size_now,
                    });
                } else {
                    for x in &mut pop.ind {
                        for s in &mut x.strands {
                            s.retain(|l| l != locus);
                        }
                    }
                    pop.d0 += cfg.delta_prime;
                    run.fixations += 1;
                    run.events.push(MicroEvent {
                        time,
                        kind: MicroEventKind::Fixation,
                        locus: *locus,
                        size: size_now,
                    });
                }
            }
            pop.refresh_deaths();
        }
        for x in &pop.ind {
            let (het, hom) = x.load();
            run.max_load = run.max_load.max(het + hom);
        }
        if size_now > cfg.size_cap {
            run.censored = true;
            break;
        }
    }
    run.final_size = pop.ind.len() as u32;
    run.final_d0 = pop.d0;
    run.end_time = time;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamete_assortment() {
        let x = Individual {
            strands: [vec![1, 3, 5], vec![3, 4]],
        };
        assert_eq!(x.load(), (3, 1));
        let mut rng = RngStream::new(2, 0);
        for _ in 0..100 {
            let g = x.gamete(&mut rng);
            assert!(g.contains(&3));
            assert!(g.windows(2).all(|w| w[0] < w[1]));
            assert!(g.iter().all(|l| [1, 3, 4, 5].contains(l)));
        }
    }

    #[test]
    fn no_mutation_stays_monomorphic() {
        let cfg = MicroConfig::new(5, 2.0, 1.0, 0.5, 3, 200.0);
        let run = simulate_microscopic(&cfg).unwrap();
        assert!(run.events.is_empty());
        assert_eq!(run.max_load, 0);
        let total: f64 = run.monomorphic_occupancy.values().sum();
        assert!((total - 200.0).abs() < 1e-9);
        assert!(run.monomorphic_occupancy.keys().all(|n| *n >= 2));
    }

    #[test]
    fn mutations_are_logged() {
        let mut cfg = MicroConfig::new(5, 2.0, 1.0, 0.5, 3, 200.0);
        cfg.mu = 0.05;
        cfg.delta = 0.01;
        cfg.delta_prime = 0.02;
        let run = simulate_microscopic(&cfg).unwrap();
        assert!(run.first_mutation_time.is_some());
        assert!(run
            .events
            .iter()
            .any(|e| e.kind == MicroEventKind::Mutation));
        assert!((run.final_d0 - (1.0 + 0.02 * f64::from(run.fixations))).abs() < 1e-12);
    }
}
