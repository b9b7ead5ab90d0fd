use vortex_core::demography::stationary_law;
use vortex_core::model::{transitions, Event};
use vortex_core::simulate::{
    mc_fixation, plan_meltdown, run_logged, simulate_microscopic, write_event_log, MicroConfig,
    RngStream,
};
use vortex_core::substitution::{TauMethod, DEFAULT_TOL};
use vortex_core::{DemographicParams, GeneralRates, PopulationState};

#[test]
fn first_event_frequencies_match_rates() {
    let p = DemographicParams::new(2.0, 1.0, 0.5, 0.1, 0.2).unwrap();
    let rates = GeneralRates::from(&p);
    let s = PopulationState::new(3, 2, 1).unwrap();
    let ts = transitions(&s, &rates);
    let reps = 200_000u64;
    let mut counts = [0u64; 6];
    for r in 0..reps {
        let mut rng = RngStream::new(17, r);
        run_logged(s, &rates, &mut rng, 1, |e| {
            counts[Event::ORDER.iter().position(|x| *x == e.event).unwrap()] += 1;
        });
    }
    for (i, t) in ts.entries.iter().enumerate() {
        let p = t.rate / ts.total_rate();
        let sd = (reps as f64 * p * (1.0 - p)).sqrt();
        let z = (counts[i] as f64 - reps as f64 * p) / sd;
        assert!(z.abs() < 3.0, "{:?}: z = {z}", t.event);
    }
}

#[test]
fn neutral_mc_matches_frequency() {
    let p = DemographicParams::neutral(1.0, 0.5, 1.0).unwrap();
    let s = PopulationState::new(1, 1, 2).unwrap();
    let e = mc_fixation(s, &p, 20_000, 3, 10_000_000).unwrap();
    assert!(e.contains(5.0 / 8.0), "{e:?}");
}

#[test]
fn event_log_layout() {
    let p = DemographicParams::neutral(2.0, 1.0, 0.5).unwrap();
    let s = PopulationState::new(2, 1, 1).unwrap();
    let mut records = Vec::new();
    let out = run_logged(
        s,
        &GeneralRates::from(&p),
        &mut RngStream::new(1, 0),
        1_000_000,
        |r| records.push(*r),
    );
    let mut buf = Vec::new();
    write_event_log(s, &records, &mut buf, &["seed=1".to_string()]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# seed=1");
    assert_eq!(lines[1], "time,event,k,m,n");
    assert_eq!(lines[2], "0.0,start,2,1,1");
    assert_eq!(lines.len() as u64, 3 + out.events);
}

#[test]
fn meltdown_means_track_rates() {
    let plan = plan_meltdown(
        0.5,
        0.02,
        1.0,
        0.2,
        0.5,
        1.0,
        3,
        TauMethod::Linear,
        DEFAULT_TOL,
    )
    .unwrap();
    assert!(plan.tau.windows(2).all(|w| w[1] > w[0]));
    for ((mean, se), tau) in plan.pooled_means(100, 50_000).iter().zip(&plan.tau) {
        assert!(((mean - 1.0 / tau) / se).abs() < 3.5);
    }
}

#[test]
fn first_mutation_time_scales_with_k() {
    let (b, d0, c, mu, k) = (2.0, 1.0, 0.5, 1.0, 40.0);
    let mean_size = stationary_law(b, d0, c, 1e-14).unwrap().mean();
    let runs = 400;
    let total: f64 = (0..runs)
        .map(|seed| {
            let mut cfg = MicroConfig::new(3, b, d0, c, seed, 1e6);
            cfg.mu = mu;
            cfg.k = k;
            cfg.stop_at_first_mutation = true;
            simulate_microscopic(&cfg)
                .unwrap()
                .first_mutation_time
                .unwrap()
                / k
        })
        .sum();
    let mean = total / f64::from(runs as u32);
    let expected = 1.0 / (2.0 * mu * mean_size);
    assert!((mean / expected - 1.0).abs() < 0.15, "{mean} vs {expected}");
}

#[test]
fn fixed_loci_raise_baseline_death() {
    let mut cfg = MicroConfig::new(4, 2.0, 1.0, 0.5, 8, 200.0);
    cfg.mu = 0.5;
    cfg.delta = 0.001;
    cfg.delta_prime = 0.002;
    let run = simulate_microscopic(&cfg).unwrap();
    assert!(run.fixations > 0);
    assert!((run.final_d0 - (1.0 + 0.002 * run.fixations as f64)).abs() < 1e-12);
}
