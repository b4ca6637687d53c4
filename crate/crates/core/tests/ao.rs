use irsnoma::ao::{baseline_fixed_theta, run_ao, run_scheme, AoConfig, AoStatus, Scheme};
use irsnoma::channel::{effective_channels, random_phases, sample_instance, ChannelSet, Dims, FadingParams, Layout};
use irsnoma::linalg::{trace_re, CVec};
use irsnoma::rates::{check_feasibility, OracleParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64) -> (ChannelSet, CVec) {
    let (_, cs) = sample_instance(&Layout::default(), &FadingParams::default(), Dims::new(4, 4, 2), 0.02, seed).unwrap();
    let theta = random_phases(4, &mut ChaCha8Rng::seed_from_u64(seed + 100));
    (cs, theta)
}

#[test]
fn ao_result_passes_the_feasibility_oracle() {
    let cfg = AoConfig::default();
    for seed in 0..3 {
        let (cs, theta) = instance(seed);
        let r = run_ao(&cs, &theta, &cfg, false).unwrap();
        let sol = r.solution.as_ref().expect("feasible");
        let rep = check_feasibility(&cs, sol, cfg.r_q, cfg.r_m, 1e-3, &OracleParams::default(), &mut ChaCha8Rng::seed_from_u64(seed));
        assert!(rep.all_ok(), "seed {seed}: {rep:?}");
        for w in r.powers.windows(2) {
            assert!(w[1] <= w[0] + cfg.delta);
        }
        assert!(r.status != AoStatus::Infeasible);
    }
}

#[test]
fn schemes_are_ordered_on_one_instance() {
    let cfg = AoConfig::default();
    let (cs, theta) = instance(7);
    let ao = run_scheme(&cs, &theta, Scheme::Ao, &cfg).unwrap();
    let epa = run_scheme(&cs, &theta, Scheme::Epa, &cfg).unwrap();
    let rp = run_scheme(&cs, &theta, Scheme::RandomPhase, &cfg).unwrap();
    assert!(ao.power <= rp.power * (1.0 + 1e-4), "{} vs {}", ao.power, rp.power);
    let sol = epa.solution.as_ref().unwrap();
    let (t1, t2) = (trace_re(&sol.covariance(1)), trace_re(&sol.covariance(2)));
    assert!((t1 - t2).abs() <= 1e-6 * t1.max(1.0), "{t1} vs {t2}");
}

#[test]
fn zero_reflection_reduces_to_the_direct_link() {
    let cfg = AoConfig::default();
    let (cs, _) = instance(2);
    let zero = CVec::zeros(4);
    let r = baseline_fixed_theta(&cs, &zero, &cfg).unwrap();
    let e = effective_channels(&cs, None, &zero).unwrap();
    assert_eq!(e.h2.norm(), 0.0);
    // the weak user receives nothing through a silent surface
    assert!(!r.feasible());
}

#[test]
fn same_inputs_same_result() {
    let cfg = AoConfig::default();
    let (cs, theta) = instance(5);
    let a = run_ao(&cs, &theta, &cfg, false).unwrap();
    let b = run_ao(&cs, &theta, &cfg, false).unwrap();
    assert_eq!(a.powers, b.powers);
}
