use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vortex_core::acceptance;
use vortex_core::exact::solve_fixation;
use vortex_core::model::transitions;
use vortex_core::perturbation::{
    compute_tables, fixation_first_order, PerturbationOptions, TableMethod,
};
use vortex_core::simulate::{
    mc_fixation, plan_meltdown, run_logged, simulate_microscopic, write_event_log, Absorption,
    MicroConfig, RngStream, DEFAULT_EVENT_CAP,
};
use vortex_core::substitution::{tau, vortex_curve, TauMethod, DEFAULT_TOL};
use vortex_core::{
    demography::stationary_law, DemographicParams, Error, GeneralRates, PopulationState,
};

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "vortex",
    version,
    about = "Fixation probabilities and extinction-vortex rates in a diploid logistic population"
)]
struct Cli {
    /// Worker threads for Monte Carlo replicates and grid points (results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the six transitions out of a state.
    Rates(RatesArgs),
    /// Fixation probability of allele a from a state.
    Fixation(FixationArgs),
    /// Tables of the first-order coefficients x, y, x', y' and their diagnostics.
    Derivatives(DerivativesArgs),
    /// Stationary population-size law of the neutral logistic process.
    Stationary(StationaryArgs),
    /// Substitution rate of a deleterious mutation.
    Tau(TauArgs),
    /// Mean fixation time T = 1/tau over a grid of natural death rates.
    VortexCurve(VortexArgs),
    /// One exact trajectory of the three-type process, as an event log.
    Simulate(SimulateArgs),
    /// Successive fixations of deleterious mutations.
    Meltdown(MeltdownArgs),
    /// Individual-based multi-locus simulation.
    Micro(MicroArgs),
    /// Run the built-in acceptance checks.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone, Copy)]
struct RateFlags {
    #[arg(long)]
    b: f64,
    #[arg(long)]
    d: f64,
    #[arg(long)]
    c: f64,
    /// Extra death rate of heterozygotes Aa.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Extra death rate of homozygotes aa.
    #[arg(long = "delta-prime", default_value_t = 0.0)]
    delta_prime: f64,
}

impl RateFlags {
    fn params(&self) -> Result<DemographicParams, Error> {
        DemographicParams::new(self.b, self.d, self.c, self.delta, self.delta_prime)
    }

    fn echo(&self) -> String {
        format!(
            "b={} d={} c={} delta={} delta_prime={}",
            self.b, self.d, self.c, self.delta, self.delta_prime
        )
    }
}

#[derive(Args, Debug, Clone, Copy)]
struct StateFlags {
    /// Number of AA individuals.
    #[arg(long)]
    k: u32,
    /// Number of Aa individuals.
    #[arg(long)]
    m: u32,
    /// Number of aa individuals.
    #[arg(long)]
    n: u32,
}

impl StateFlags {
    fn state(&self) -> Result<PopulationState, Error> {
        PopulationState::new(self.k, self.m, self.n)
    }
}

#[derive(Args, Debug)]
struct OutFlag {
    /// Output file (defaults to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutFlag {
    fn open(&self) -> Result<Box<dyn Write>, Error> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct RatesArgs {
    #[command(flatten)]
    rates: RateFlags,
    #[command(flatten)]
    state: StateFlags,
    #[command(flatten)]
    out: OutFlag,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum FixationMethod {
    Exact,
    Mc,
    FirstOrder,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct FixationArgs {
    #[command(flatten)]
    rates: RateFlags,
    #[command(flatten)]
    state: StateFlags,
    #[arg(long, value_enum, default_value_t = FixationMethod::Exact)]
    method: FixationMethod,
    /// Largest population size of the truncated lattice (exact and first-order).
    #[arg(long, default_value_t = 80)]
    nmax: u32,
    /// Monte Carlo replicates.
    #[arg(long, default_value_t = 10_000)]
    reps: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Per-replicate event cap; more than 0.1% censored replicates is an error.
    #[arg(long = "event-cap", default_value_t = DEFAULT_EVENT_CAP)]
    event_cap: u64,
    /// Write the whole exact table as CSV here instead of a single value.
    #[arg(long)]
    table: Option<PathBuf>,
    #[command(flatten)]
    out: OutFlag,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum TableChoice {
    Auto,
    Recurrence,
    Dirichlet,
}

impl From<TableChoice> for TableMethod {
    fn from(t: TableChoice) -> Self {
        match t {
            TableChoice::Auto => TableMethod::Auto,
            TableChoice::Recurrence => TableMethod::Recurrence,
            TableChoice::Dirichlet => TableMethod::Dirichlet,
        }
    }
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct DerivativesArgs {
    #[arg(long)]
    b: f64,
    #[arg(long)]
    d: f64,
    #[arg(long)]
    c: f64,
    #[arg(long, default_value_t = 40)]
    nmax: u32,
    #[arg(long, value_enum, default_value_t = TableChoice::Auto)]
    method: TableChoice,
    /// Relative tolerance of the adaptive tail of the recurrence.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Also write per-level diagnostics (N,normK,normG,condF) here.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    #[command(flatten)]
    out: OutFlag,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct StationaryArgs {
    #[arg(long)]
    b: f64,
    #[arg(long)]
    d: f64,
    #[arg(long)]
    c: f64,
    /// Bound on the neglected tail mass.
    #[arg(long, default_value_t = 1e-14)]
    tol: f64,
    #[command(flatten)]
    out: OutFlag,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum TauChoice {
    Exact,
    Linear,
}

impl From<TauChoice> for TauMethod {
    fn from(t: TauChoice) -> Self {
        match t {
            TauChoice::Exact => TauMethod::Exact,
            TauChoice::Linear => TauMethod::Linear,
        }
    }
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct TauArgs {
    #[command(flatten)]
    rates: RateFlags,
    /// Mutation rate per individual.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, value_enum, default_value_t = TauChoice::Exact)]
    method: TauChoice,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[command(flatten)]
    out: OutFlag,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct VortexArgs {
    #[arg(long)]
    b: f64,
    #[arg(long)]
    c: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long = "delta-prime")]
    delta_prime: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Grid of natural death rates, start:stop:step (endpoints inclusive).
    #[arg(long = "d-grid")]
    d_grid: String,
    #[arg(long, value_enum, default_value_t = TauChoice::Exact)]
    method: TauChoice,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[command(flatten)]
    out: OutFlag,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    #[command(flatten)]
    rates: RateFlags,
    #[command(flatten)]
    state: StateFlags,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Stop after this many events.
    #[arg(long = "event-cap", default_value_t = DEFAULT_EVENT_CAP)]
    event_cap: u64,
    #[command(flatten)]
    out: OutFlag,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct MeltdownArgs {
    #[arg(long)]
    b: f64,
    /// Initial natural death rate d0.
    #[arg(long)]
    d: f64,
    #[arg(long)]
    c: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long = "delta-prime")]
    delta_prime: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Number of fixations to simulate.
    #[arg(long, default_value_t = 5)]
    fixations: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// With reps > 1, report per-fixation means over seeds seed..seed+reps.
    #[arg(long, default_value_t = 1)]
    reps: u64,
    #[arg(long, value_enum, default_value_t = TauChoice::Linear)]
    method: TauChoice,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[command(flatten)]
    out: OutFlag,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct MicroArgs {
    #[arg(long)]
    b: f64,
    /// Baseline natural death rate d0.
    #[arg(long)]
    d: f64,
    #[arg(long)]
    c: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long = "delta-prime", default_value_t = 0.0)]
    delta_prime: f64,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Time-scale parameter K: strands mutate at rate mu/K.
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    #[arg(long = "initial-size", default_value_t = 4)]
    initial_size: u32,
    #[arg(long = "t-end", default_value_t = 1000.0)]
    t_end: f64,
    #[arg(long = "size-cap", default_value_t = 100_000)]
    size_cap: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the size occupancy (N,fraction) here.
    #[arg(long)]
    occupancy: Option<PathBuf>,
    #[command(flatten)]
    out: OutFlag,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct VerifyArgs {
    /// Run only these criteria (comma-separated ids).
    #[arg(long, value_delimiter = ',')]
    only: Vec<u32>,
}

/// Parses `start:stop:step`; the stop point is included when the grid
/// lands on it within half a step.
fn parse_grid(text: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::InvalidParameter(format!("grid '{text}' is not start:stop:step"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0 && start.is_finite() && stop.is_finite()) || stop < start {
        return Err(Error::InvalidParameter(format!(
            "grid '{text}' needs step > 0 and stop >= start"
        )));
    }
    let count = ((stop - start) / step + 0.5).floor() as u64;
    if count > 100_000 {
        return Err(Error::InvalidParameter(format!(
            "grid '{text}' has too many points"
        )));
    }
    Ok((0..=count).map(|i| start + step * i as f64).collect())
}

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn run(cli: Cli) -> Result<u8, Error> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::InvalidParameter("workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    }
    match cli.command {
        Command::Rates(a) => {
            let state = a.state.state()?;
            let rates = GeneralRates::from(&a.rates.params()?);
            let mut out = a.out.open()?;
            writeln!(out, "event,k,m,n,rate")?;
            for t in transitions(&state, &rates).entries {
                let (k, m, n) = match t.target {
                    Some(s) => (s.k().to_string(), s.m().to_string(), s.n().to_string()),
                    None => (String::new(), String::new(), String::new()),
                };
                writeln!(out, "{},{k},{m},{n},{}", t.event.label(), fmt(t.rate))?;
            }
            out.flush()?;
        }
        Command::Fixation(a) => {
            let state = a.state.state()?;
            let params = a.rates.params()?;
            let mut out = a.out.open()?;
            match a.method {
                FixationMethod::Exact => {
                    let t = solve_fixation(&params, a.nmax)?;
                    writeln!(out, "{}", fmt(t.value(&state)?))?;
                    if let Some(path) = &a.table {
                        let comments = [format!("{} nmax={}", a.rates.echo(), a.nmax)];
                        t.write_csv(BufWriter::new(File::create(path)?), &comments)?;
                    }
                }
                FixationMethod::Mc => {
                    let e = mc_fixation(state, &params, a.reps, a.seed, a.event_cap)?;
                    writeln!(out, "{}", fmt(e.estimate))?;
                    writeln!(out, "ci99_halfwidth={}", fmt(e.ci_halfwidth_99))?;
                    writeln!(
                        out,
                        "fixed={} reps={} censored={}",
                        e.fixed, e.reps, e.censored
                    )?;
                }
                FixationMethod::FirstOrder => {
                    let t = compute_tables(&params, a.nmax, &PerturbationOptions::default())?;
                    let u = fixation_first_order(&state, &params, &t)?;
                    writeln!(out, "{}", fmt(u.clamped))?;
                    writeln!(out, "raw={}", fmt(u.raw))?;
                }
            }
            out.flush()?;
        }
        Command::Derivatives(a) => {
            let params = DemographicParams::neutral(a.b, a.d, a.c)?;
            let opts = PerturbationOptions {
                tol: a.tol,
                method: a.method.into(),
                ..Default::default()
            };
            let t = compute_tables(&params, a.nmax, &opts)?;
            let comments = [format!(
                "b={} d={} c={} nmax={} method={:?} source={:?}",
                a.b, a.d, a.c, a.nmax, a.method, t.source
            )
            .to_lowercase()];
            t.write_csv(a.out.open()?, &comments)?;
            if let Some(path) = &a.diagnostics {
                t.write_diagnostics_csv(BufWriter::new(File::create(path)?), &comments)?;
            }
        }
        Command::Stationary(a) => {
            let law = stationary_law(a.b, a.d, a.c, a.tol)?;
            let comments = [format!(
                "b={} d={} c={} tol={:e} tail_mass={}",
                a.b,
                a.d,
                a.c,
                a.tol,
                fmt(law.tail_mass)
            )];
            law.write_csv(a.out.open()?, &comments)?;
        }
        Command::Tau(a) => {
            let r = tau(&a.rates.params()?, a.mu, a.tol, a.method.into())?;
            let mut out = a.out.open()?;
            writeln!(out, "tau = {}", fmt(r.tau))?;
            writeln!(out, "T = {}", fmt(r.t_mean))?;
            out.flush()?;
        }
        Command::VortexCurve(a) => {
            let grid = parse_grid(&a.d_grid)?;
            let curve = vortex_curve(
                &grid,
                a.b,
                a.c,
                a.delta,
                a.delta_prime,
                a.mu,
                a.method.into(),
                a.tol,
            )?;
            curve.write_csv(a.out.open()?)?;
        }
        Command::Simulate(a) => {
            let state = a.state.state()?;
            let rates = GeneralRates::from(&a.rates.params()?);
            let mut rng = RngStream::new(a.seed, 0);
            let mut records = Vec::new();
            let outcome = run_logged(state, &rates, &mut rng, a.event_cap, |r| records.push(*r));
            let label = match outcome.absorbed_in {
                Absorption::MutantFixed => "mutant-fixed",
                Absorption::ResidentFixed => "resident-fixed",
                Absorption::Censored => "censored",
            };
            let comments = [
                format!("{} seed={}", a.rates.echo(), a.seed),
                format!("outcome={label} events={}", outcome.events),
            ];
            write_event_log(state, &records, a.out.open()?, &comments)?;
        }
        Command::Meltdown(a) => {
            let plan = plan_meltdown(
                a.d,
                a.b,
                a.c,
                a.delta,
                a.delta_prime,
                a.mu,
                a.fixations,
                a.method.into(),
                a.tol,
            )?;
            let echo = format!(
                "b={} d0={} c={} delta={} delta_prime={} mu={} method={:?} seed={}",
                a.b, a.d, a.c, a.delta, a.delta_prime, a.mu, a.method, a.seed
            )
            .to_lowercase();
            if a.reps <= 1 {
                plan.sample(a.seed).write_csv(a.out.open()?, &[echo])?;
            } else {
                let mut out = a.out.open()?;
                writeln!(out, "# {echo} reps={}", a.reps)?;
                writeln!(out, "fixation_index,d,tau,mean_waiting_time,standard_error")?;
                for (j, (mean, se)) in plan.pooled_means(a.seed, a.reps).into_iter().enumerate() {
                    writeln!(
                        out,
                        "{j},{},{},{},{}",
                        fmt(plan.d[j]),
                        fmt(plan.tau[j]),
                        fmt(mean),
                        fmt(se)
                    )?;
                }
                out.flush()?;
            }
        }
        Command::Micro(a) => {
            let mut cfg = MicroConfig::new(a.initial_size, a.b, a.d, a.c, a.seed, a.t_end);
            cfg.delta = a.delta;
            cfg.delta_prime = a.delta_prime;
            cfg.mu = a.mu;
            cfg.k = a.k;
            cfg.size_cap = a.size_cap;
            let run = simulate_microscopic(&cfg)?;
            let comments = [
                format!(
                    "b={} d0={} c={} delta={} delta_prime={} mu={} k={} initial_size={} t_end={} seed={}",
                    a.b, a.d, a.c, a.delta, a.delta_prime, a.mu, a.k, a.initial_size, a.t_end, a.seed
                ),
                format!(
                    "fixations={} final_size={} final_d0={} censored={}",
                    run.fixations,
                    run.final_size,
                    fmt(run.final_d0),
                    run.censored
                ),
            ];
            run.write_csv(a.out.open()?, &comments)?;
            if let Some(path) = &a.occupancy {
                let mut w = BufWriter::new(File::create(path)?);
                writeln!(w, "N,fraction")?;
                for (n, p) in run.occupancy_pmf() {
                    writeln!(w, "{n},{}", fmt(p))?;
                }
                w.flush()?;
            }
        }
        Command::Verify(a) => {
            let mut failed = 0;
            let stdout = io::stdout();
            for (i, check) in acceptance::ALL.iter().enumerate() {
                if !a.only.is_empty() && !a.only.contains(&(i as u32 + 1)) {
                    continue;
                }
                let r = check();
                failed += u32::from(!r.passed);
                writeln!(stdout.lock(), "{r}")?;
            }
            if failed > 0 {
                eprintln!("error: verification: {failed} criteria failed");
                return Ok(EXIT_VERIFY);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("bad arguments")
                .trim_start_matches("error: ");
            eprintln!("error: validation: {first}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let (kind, code) = if e.is_validation() {
                ("validation", EXIT_VALIDATION)
            } else {
                ("numerical", EXIT_NUMERICAL)
            };
            eprintln!("error: {kind}: {}", e.to_string().replace('\n', " "));
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::parse_grid;

    #[test]
    fn grid_inclusive() {
        let g = parse_grid("0.5:3:0.25").unwrap();
        assert_eq!(g.len(), 11);
        assert!((g[10] - 3.0).abs() < 1e-12);
        assert_eq!(parse_grid("0:1:0.3").unwrap().len(), 4);
        assert_eq!(parse_grid("0:0.95:0.3").unwrap().len(), 4);
        assert_eq!(parse_grid("1:1:0.5").unwrap(), vec![1.0]);
        assert!(parse_grid("1:0:0.5").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("0:1").is_err());
    }
}
