//! Population states, demographic parameters and the jump rates of the
//! three-type process.
//!
//! A state `(k, m, n)` counts individuals of genotype AA, Aa and aa. Births
//! follow random mating of two distinct individuals with Mendelian
//! segregation; deaths combine a natural rate with pairwise competition.
//! Below two individuals the model is undefined, and at exactly two
//! individuals no death can occur.

use std::fmt;

use crate::error::{invalid, Result};

/// Genotype at the focal gene. `aa` is the mutant homozygote.
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Genotype {
    AA,
    Aa,
    aa,
}

impl Genotype {
    pub const ALL: [Genotype; 3] = [Genotype::AA, Genotype::Aa, Genotype::aa];

    pub fn index(self) -> usize {
        match self {
            Genotype::AA => 0,
            Genotype::Aa => 1,
            Genotype::aa => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Genotype::AA => "AA",
            Genotype::Aa => "Aa",
            Genotype::aa => "aa",
        }
    }
}

/// A lattice point `(k, m, n)` with `k + m + n >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PopulationState {
    k: u32,
    m: u32,
    n: u32,
}

impl PopulationState {
    pub fn new(k: u32, m: u32, n: u32) -> Result<Self> {
        if k + m + n < 2 {
            return Err(invalid(format!(
                "state ({k},{m},{n}) has fewer than 2 individuals"
            )));
        }
        Ok(PopulationState { k, m, n })
    }

    /// Constructor for callers that already guarantee `k + m + n >= 2`.
    pub(crate) fn new_unchecked(k: u32, m: u32, n: u32) -> Self {
        debug_assert!(k + m + n >= 2);
        PopulationState { k, m, n }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn counts(&self) -> [u32; 3] {
        [self.k, self.m, self.n]
    }

    /// Population size `N`.
    pub fn size(&self) -> u32 {
        self.k + self.m + self.n
    }

    /// Number of A alleles, `Y = 2k + m`.
    pub fn a_alleles(&self) -> u32 {
        2 * self.k + self.m
    }

    /// Frequency of allele a, `(m + 2n) / 2N`.
    pub fn mutant_frequency(&self) -> f64 {
        f64::from(self.m + 2 * self.n) / (2.0 * f64::from(self.size()))
    }

    pub fn class(&self) -> StateClass {
        classify(self)
    }

    /// The state obtained by swapping the roles of A and a.
    pub fn mirrored(&self) -> Self {
        PopulationState {
            k: self.n,
            m: self.m,
            n: self.k,
        }
    }

    fn shifted(&self, event: Event) -> Option<PopulationState> {
        let mut c = self.counts();
        match event {
            Event::Birth(g) => c[g.index()] += 1,
            Event::Death(g) => {
                let i = g.index();
                if c[i] == 0 {
                    return None;
                }
                c[i] -= 1;
            }
        }
        PopulationState::new(c[0], c[1], c[2]).ok()
    }
}

impl fmt::Display for PopulationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.k, self.m, self.n)
    }
}

/// Position of a state relative to the absorbing sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateClass {
    Interior,
    /// `m = n = 0`: allele A fixed, the mutant is lost.
    ResidentFixed,
    /// `k = m = 0`: allele a fixed.
    MutantFixed,
}

impl StateClass {
    pub fn is_absorbing(self) -> bool {
        !matches!(self, StateClass::Interior)
    }

    pub fn label(self) -> &'static str {
        match self {
            StateClass::Interior => "interior",
            StateClass::ResidentFixed => "Gamma_A",
            StateClass::MutantFixed => "Gamma_a",
        }
    }
}

pub fn classify(state: &PopulationState) -> StateClass {
    match state.counts() {
        [_, 0, 0] => StateClass::ResidentFixed,
        [0, 0, _] => StateClass::MutantFixed,
        _ => StateClass::Interior,
    }
}

/// Rates of the study regime: common fecundity `b` and competition `c`,
/// natural death `d`, `d + delta` and `d + delta_prime` for AA, Aa and aa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemographicParams {
    pub b: f64,
    pub d: f64,
    pub c: f64,
    pub delta: f64,
    pub delta_prime: f64,
}

impl DemographicParams {
    pub fn new(b: f64, d: f64, c: f64, delta: f64, delta_prime: f64) -> Result<Self> {
        let p = DemographicParams {
            b,
            d,
            c,
            delta,
            delta_prime,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn neutral(b: f64, d: f64, c: f64) -> Result<Self> {
        Self::new(b, d, c, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.b, self.d, self.c, self.delta, self.delta_prime];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(invalid("parameters must be finite"));
        }
        if self.b <= 0.0 {
            return Err(invalid(format!("b must be > 0, got {}", self.b)));
        }
        if self.c <= 0.0 {
            return Err(invalid(format!("c must be > 0, got {}", self.c)));
        }
        if self.d < 0.0 {
            return Err(invalid(format!("d must be >= 0, got {}", self.d)));
        }
        if self.d + self.delta < 0.0 || self.d + self.delta_prime < 0.0 {
            return Err(invalid(format!(
                "perturbed death rates must stay >= 0 (d={}, delta={}, delta'={})",
                self.d, self.delta, self.delta_prime
            )));
        }
        Ok(())
    }

    pub fn is_neutral(&self) -> bool {
        self.delta == 0.0 && self.delta_prime == 0.0
    }

    pub fn with_d(&self, d: f64) -> Result<Self> {
        Self::new(self.b, d, self.c, self.delta, self.delta_prime)
    }

    pub fn with_perturbation(&self, delta: f64, delta_prime: f64) -> Result<Self> {
        Self::new(self.b, self.d, self.c, delta, delta_prime)
    }

    /// Natural death rates of AA, Aa, aa.
    pub fn natural_deaths(&self) -> [f64; 3] {
        [self.d, self.d + self.delta, self.d + self.delta_prime]
    }
}

/// Full genotype-dependent rate tables.
///
/// `birth[i][j] = b_ij` (symmetric), `competition[i][j] = c_ij` is the rate at
/// which one individual of type `i` kills one of type `j`, `death[i] = d_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralRates {
    birth: [[f64; 3]; 3],
    competition: [[f64; 3]; 3],
    death: [f64; 3],
}

impl GeneralRates {
    pub fn new(birth: [[f64; 3]; 3], competition: [[f64; 3]; 3], death: [f64; 3]) -> Result<Self> {
        for i in 0..3 {
            for j in 0..3 {
                if !birth[i][j].is_finite() || birth[i][j] < 0.0 {
                    return Err(invalid("birth rates must be finite and >= 0"));
                }
                if birth[i][j] != birth[j][i] {
                    return Err(invalid(format!("birth table not symmetric at ({i},{j})")));
                }
                if !(competition[i][j] > 0.0) || !competition[i][j].is_finite() {
                    return Err(invalid("competition rates must be finite and > 0"));
                }
            }
            if !death[i].is_finite() || death[i] < 0.0 {
                return Err(invalid("natural death rates must be finite and >= 0"));
            }
        }
        Ok(GeneralRates {
            birth,
            competition,
            death,
        })
    }

    pub fn birth(&self) -> &[[f64; 3]; 3] {
        &self.birth
    }

    pub fn competition(&self) -> &[[f64; 3]; 3] {
        &self.competition
    }

    pub fn death(&self) -> &[f64; 3] {
        &self.death
    }

    pub fn max_birth(&self) -> f64 {
        self.birth.iter().flatten().copied().fold(0.0, f64::max)
    }
}

impl From<&DemographicParams> for GeneralRates {
    fn from(p: &DemographicParams) -> Self {
        GeneralRates {
            birth: [[p.b; 3]; 3],
            competition: [[p.c; 3]; 3],
            death: p.natural_deaths(),
        }
    }
}

/// Birth rates `(b_1, b_2, b_3)` of AA, Aa and aa offspring.
pub fn birth_rates(state: &PopulationState, rates: &GeneralRates) -> [f64; 3] {
    let [k, m, n] = state.counts().map(f64::from);
    let b = &rates.birth;
    let denom = k + m + n - 1.0;
    let het_pairs = m * (m - 1.0);
    [
        (b[0][0] * k * (k - 1.0) + b[0][1] * k * m + b[1][1] * het_pairs / 4.0) / denom,
        (b[0][1] * k * m + b[1][1] * het_pairs / 2.0 + b[1][2] * m * n + b[0][2] * 2.0 * k * n)
            / denom,
        (b[2][2] * n * (n - 1.0) + b[1][2] * m * n + b[1][1] * het_pairs / 4.0) / denom,
    ]
}

/// Total death rates `(d^(1), d^(2), d^(3))`; all zero when `N = 2`.
pub fn death_rates(state: &PopulationState, rates: &GeneralRates) -> [f64; 3] {
    if state.size() == 2 {
        return [0.0; 3];
    }
    let counts = state.counts().map(f64::from);
    let c = &rates.competition;
    let mut out = [0.0; 3];
    for j in 0..3 {
        let pressure: f64 = (0..3)
            .map(|i| c[i][j] * (counts[i] - if i == j { 1.0 } else { 0.0 }))
            .sum();
        out[j] = (rates.death[j] + pressure) * counts[j];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    Birth(Genotype),
    Death(Genotype),
}

impl Event {
    /// Fixed event order used by every consumer of [`TransitionSet`].
    pub const ORDER: [Event; 6] = [
        Event::Birth(Genotype::AA),
        Event::Birth(Genotype::Aa),
        Event::Birth(Genotype::aa),
        Event::Death(Genotype::AA),
        Event::Death(Genotype::Aa),
        Event::Death(Genotype::aa),
    ];

    pub fn label(self) -> &'static str {
        match self {
            Event::Birth(Genotype::AA) => "birth-AA",
            Event::Birth(Genotype::Aa) => "birth-Aa",
            Event::Birth(Genotype::aa) => "birth-aa",
            Event::Death(Genotype::AA) => "death-AA",
            Event::Death(Genotype::Aa) => "death-Aa",
            Event::Death(Genotype::aa) => "death-aa",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub event: Event,
    /// `None` only for zero-rate events whose target is not a valid state.
    pub target: Option<PopulationState>,
    pub rate: f64,
}

/// The six possible jumps out of a state, in [`Event::ORDER`].
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSet {
    pub source: PopulationState,
    pub entries: [Transition; 6],
}

impl TransitionSet {
    pub fn total_rate(&self) -> f64 {
        self.entries.iter().map(|t| t.rate).sum()
    }

    pub fn total_birth_rate(&self) -> f64 {
        self.entries[..3].iter().map(|t| t.rate).sum()
    }

    /// Positive-rate entries only.
    pub fn active(&self) -> impl Iterator<Item = (&Transition, PopulationState)> {
        self.entries
            .iter()
            .filter(|t| t.rate > 0.0)
            .filter_map(|t| t.target.map(|s| (t, s)))
    }
}

pub fn transitions(state: &PopulationState, rates: &GeneralRates) -> TransitionSet {
    let births = birth_rates(state, rates);
    let deaths = death_rates(state, rates);
    let entries = std::array::from_fn(|i| {
        let event = Event::ORDER[i];
        let rate = if i < 3 { births[i] } else { deaths[i - 3] };
        Transition {
            event,
            target: state.shifted(event),
            rate,
        }
    });
    TransitionSet {
        source: *state,
        entries,
    }
}

/// `(L f)(s) = sum over jumps of rate * (f(target) - f(s))`.
pub fn apply_generator<F>(f: F, state: &PopulationState, rates: &GeneralRates) -> f64
where
    F: Fn(&PopulationState) -> f64,
{
    let here = f(state);
    transitions(state, rates)
        .active()
        .map(|(t, target)| t.rate * (f(&target) - here))
        .sum()
}
