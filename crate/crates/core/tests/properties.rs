use irsnoma::channel::{effective_channels, sample_ball, sample_instance, ChannelSet, Dims, FadingParams, Layout};
use irsnoma::conic::model::HermExpr;
use irsnoma::conic::realify::{delift, realify};
use irsnoma::linalg::{c, fro, herm_eig, min_eig, outer, sym_eigvals, CMat, CVec};
use irsnoma::passive::{lift_channels, lift_matrix, lifted_trace_terms, ordering_constraint};
use irsnoma::rates::quad;
use irsnoma::robustify::{build_joint_v, build_v_affine_in_u, build_w_prime, secrecy_form, sprocedure_matrix, svd_outer_terms};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cmat(rng: &mut ChaCha8Rng, r: usize, k: usize) -> CMat {
    sample_ball(r, k, 1.0, true, rng) * c((r * k) as f64, 0.0).sqrt()
}

fn psd(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let a = cmat(rng, n, n);
    &a * a.adjoint()
}

fn instance(seed: u64, nt: usize, m: usize, ne: usize) -> ChannelSet {
    sample_instance(&Layout::default(), &FadingParams::default(), Dims::new(nt, m, ne), 0.05, seed).unwrap().1
}

fn theta_in_disc(rng: &mut ChaCha8Rng, m: usize) -> CVec {
    use rand::Rng;
    CVec::from_fn(m, |_, _| c(0.0, rng.random_range(0.0..std::f64::consts::TAU)).exp() * c(rng.random::<f64>().sqrt(), 0.0))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lifted_expressions_match_reflection_form(seed in 0u64..10_000, nt in 1usize..5, m in 1usize..7, ne in 1usize..3) {
        let cs = instance(seed, nt, m, ne);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let theta = theta_in_disc(&mut rng, m);
        let e = effective_channels(&cs, None, &theta).unwrap();
        let lc = lift_channels(&cs);
        let u = HermExpr::constant(lift_matrix(&theta));
        let (w1, w2, an) = (psd(&mut rng, nt), psd(&mut rng, nt), psd(&mut rng, nt));
        let t = lifted_trace_terms(&lc, &u, &w1, &w2, &an);
        for (lhs, h, w) in [(&t.h1_w1, &e.h1, &w1), (&t.h1_w2, &e.h1, &w2), (&t.h1_an, &e.h1, &an),
                            (&t.h2_w1, &e.h2, &w1), (&t.h2_w2, &e.h2, &w2), (&t.h2_an, &e.h2, &an)] {
            prop_assert!(rel(lhs.constant, quad(h, w)) < 1e-9);
        }
        let order = ordering_constraint(&lc, &u).constant;
        let direct = e.h1.norm_squared() - e.h2.norm_squared();
        prop_assert!((order - direct).abs() <= 1e-9 * e.h1.norm_squared().max(1e-300));

        let wp = build_w_prime(&an, &w1, 0.5);
        let v_theta = build_joint_v(&theta, &cs.h_bi, &wp).unwrap();
        let v_u = build_v_affine_in_u(&u, &cs.h_bi, &wp, &svd_outer_terms(&cs.h_bi, &wp)).unwrap();
        let v_u = v_u.eval(&[]);
        prop_assert!(fro(&(&v_u - &v_theta)) <= 1e-9 * fro(&v_theta).max(1e-300));
    }

    #[test]
    fn realification_doubles_the_spectrum(seed in 0u64..10_000, n in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = cmat(&mut rng, n, n);
        let h = (&a + a.adjoint()) * c(0.5, 0.0);
        let (ev, _) = herm_eig(&h);
        let mut doubled: Vec<f64> = ev.iter().flat_map(|&x| [x, x]).collect();
        doubled.sort_by(|x, y| y.total_cmp(x));
        let mut real = sym_eigvals(&realify(&h));
        real.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in doubled.iter().zip(&real) {
            prop_assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()));
        }
        prop_assert!(fro(&(delift(&realify(&h)) - &h)) < 1e-12);
        let r = realify(&h);
        prop_assert!((&r - r.transpose()).amax() < 1e-14);
    }

    #[test]
    fn ball_samples_respect_the_radius(seed in 0u64..10_000, r in 1usize..6, k in 1usize..4, radius in 1e-6f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inner = sample_ball(r, k, radius, false, &mut rng);
        prop_assert!(fro(&inner) <= radius * (1.0 + 1e-12));
        let edge = sample_ball(r, k, radius, true, &mut rng);
        prop_assert!((fro(&edge) - radius).abs() <= 1e-12 * radius);
    }
}

#[test]
fn ten_thousand_ball_draws_stay_inside() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut max_ratio: f64 = 0.0;
    let mut mean_sq = 0.0;
    let n = 10_000;
    for _ in 0..n {
        let d = sample_ball(3, 2, 0.3, false, &mut rng);
        let r = fro(&d) / 0.3;
        max_ratio = max_ratio.max(r);
        mean_sq += r * r / n as f64;
    }
    assert!(max_ratio <= 1.0 + 1e-12);
    // uniform in a 12-dimensional real ball: E[r^2] = 12 / 14
    assert!((mean_sq - 12.0 / 14.0).abs() < 0.01, "{mean_sq}");
}

/// Whenever a multiplier certifies the S-procedure LMI, every sampled
/// perturbation in the ball satisfies the original quadratic matrix inequality.
#[test]
fn certified_lmi_implies_the_semi_infinite_constraint() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut certified = 0;
    let mut indefinite = 0;
    for case in 0..300 {
        let (k, ne) = (2 + case % 4, 1 + case % 2);
        let x_hat = cmat(&mut rng, k, ne);
        let eps = 0.05 + 0.4 * (case as f64 / 300.0);
        let r_m = 0.5;
        let w = cmat(&mut rng, k, 1) * c(0.3 + (case % 7) as f64 * 0.2, 0.0);
        let an = psd(&mut rng, k);
        let v = an * c(0.2, 0.0) - outer(&w.column(0).into_owned(), &w.column(0).into_owned());
        let best_tau = (0..=400)
            .map(|j| j as f64 * 0.01)
            .map(|tau| (tau, min_eig(&sprocedure_matrix(&x_hat, &v, tau, r_m, eps))))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if best_tau.1 < 0.0 {
            continue;
        }
        certified += 1;
        let mut worst = f64::INFINITY;
        for s in 0..200 {
            let d = sample_ball(k, ne, eps, s % 2 == 0, &mut rng);
            worst = worst.min(min_eig(&secrecy_form(&x_hat, &d, &v, r_m)));
        }
        assert!(worst >= -1e-9, "case {case}: {worst}");
        if min_eig(&v) < 0.0 {
            indefinite += 1;
        }
    }
    assert!(certified >= 30, "only {certified} certified cases");
    assert!(indefinite >= 20, "only {indefinite} certified cases with an indefinite V");
}
