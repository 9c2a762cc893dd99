//! Property-based checks of the bound algebra, the optimizer contracts and
//! the log round-trip.

use proptest::prelude::*;

use qkdfk_core::epsilon::{optimize_epsilons, DEFAULT_TOLERANCE};
use qkdfk_core::keyrate::{
    asymptotic_key_bound, binary_entropy, corrected_error_rate, detection_prob, finite_key_bound,
    multi_photon_prob, single_photon_fraction, ChannelParams, SecurityEpsilons,
};
use qkdfk_core::sim::{SessionRecord, TerminationCause};
use qkdfk_core::{load_session_log, write_session_log};

/// Log-uniform n in [10^3, 10^9].
fn n_strategy() -> impl Strategy<Value = u64> {
    (3.0f64..9.0).prop_map(|exp| 10f64.powf(exp).round() as u64)
}

fn eps_total_strategy() -> impl Strategy<Value = f64> {
    (-12.0f64..-0.5).prop_map(|exp| 10f64.powf(exp))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn entropy_is_symmetric_and_matches_direct_formula(x in 0.0f64..=1.0) {
        let h = binary_entropy(x).unwrap();
        let h_mirror = binary_entropy(1.0 - x).unwrap();
        prop_assert!((h - h_mirror).abs() < 1e-12);
        let direct = if x == 0.0 || x == 1.0 {
            0.0
        } else {
            -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
        };
        prop_assert!((h - direct).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&h));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn bounds_clamp_and_order(
        n in n_strategy(),
        e in 0.0f64..0.45,
        a in 0.05f64..=1.0,
        f_ec in 1.0f64..1.5,
        eps_total in eps_total_strategy(),
    ) {
        let eps = SecurityEpsilons::equal_split(eps_total).unwrap();
        let b = finite_key_bound(n, e, a, f_ec, &eps).unwrap();
        prop_assert!(b.l_finite >= 0.0);
        prop_assert!(b.l_asymptotic >= 0.0);
        // The deviation-corrected rate always exceeds the observed one, so
        // the finite bound never beats the asymptotic bound.
        prop_assert!(b.e_tilde > e);
        prop_assert!(b.l_finite <= b.l_asymptotic);
        if b.aborted {
            prop_assert_eq!(b.l_finite, 0.0);
        }
    }

    #[test]
    fn finite_bound_monotone_in_error_rate(
        n in n_strategy(),
        e in 0.0f64..0.4,
        de in 0.001f64..0.05,
        a in 0.3f64..=1.0,
    ) {
        let eps = SecurityEpsilons::equal_split(1e-10).unwrap();
        let lo = finite_key_bound(n, e, a, 1.2, &eps).unwrap();
        let hi = finite_key_bound(n, (e + de).min(0.4999), a, 1.2, &eps).unwrap();
        prop_assert!(hi.l_finite <= lo.l_finite + 1e-9);
    }

    #[test]
    fn finite_bound_monotone_in_single_photon_fraction(
        n in n_strategy(),
        e in 0.0f64..0.2,
        a in 0.1f64..0.9,
        da in 0.01f64..0.1,
    ) {
        let eps = SecurityEpsilons::equal_split(1e-10).unwrap();
        let lo = finite_key_bound(n, e, a, 1.2, &eps).unwrap();
        let hi = finite_key_bound(n, e, (a + da).min(1.0), 1.2, &eps).unwrap();
        prop_assert!(hi.l_finite + 1e-9 >= lo.l_finite);
    }

    #[test]
    fn shrinking_one_epsilon_component_never_helps(
        n in n_strategy(),
        e in 0.0f64..0.2,
        a in 0.3f64..=1.0,
        which in 0usize..4,
        shrink in 0.01f64..0.99,
    ) {
        let q = 2.5e-11;
        let mut parts = [q, q, q, q];
        let base = SecurityEpsilons::new(parts[0], parts[1], parts[2], parts[3]).unwrap();
        parts[which] *= shrink;
        let smaller = SecurityEpsilons::new(parts[0], parts[1], parts[2], parts[3]).unwrap();
        let b0 = finite_key_bound(n, e, a, 1.2, &base).unwrap();
        let b1 = finite_key_bound(n, e, a, 1.2, &smaller).unwrap();
        prop_assert!(b1.l_finite <= b0.l_finite + 1e-9);
    }

    #[test]
    fn corrected_rate_decreases_toward_observation(
        e in 0.0f64..0.4,
        eps_pe in eps_total_strategy(),
        n_small in 1_000u64..100_000,
    ) {
        let n_large = n_small * 10_000;
        let small = corrected_error_rate(e, n_small, eps_pe).unwrap();
        let large = corrected_error_rate(e, n_large, eps_pe).unwrap();
        prop_assert!(small > large);
        prop_assert!(large > e);
    }

    #[test]
    fn channel_model_yields_probabilities(
        loss in 0.0f64..40.0,
        mu in 0.01f64..2.0,
        eta in 0.01f64..=1.0,
        dark in 0.0f64..0.01,
    ) {
        let ch = ChannelParams::new(loss, mu, eta, dark, 1.2).unwrap();
        let pd = detection_prob(&ch);
        prop_assert!((0.0..=1.0).contains(&pd));
        let pm = multi_photon_prob(mu).unwrap();
        prop_assert!((0.0..=1.0).contains(&pm));
        if pd > 0.0 {
            let a = single_photon_fraction(pd, pm).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn optimizer_dominates_equal_split_and_conserves_budget(
        n in n_strategy(),
        e in 0.0f64..0.12,
        a in 0.3f64..=1.0,
        f_ec in 1.0f64..1.5,
        eps_total in eps_total_strategy(),
    ) {
        let r = optimize_epsilons(n, e, a, f_ec, eps_total, DEFAULT_TOLERANCE).unwrap();
        let eps = SecurityEpsilons::equal_split(eps_total).unwrap();
        let baseline = finite_key_bound(n, e, a, f_ec, &eps).unwrap().l_finite;
        prop_assert!(r.best_bound.l_finite >= baseline);
        prop_assert!((r.best_eps.total() - eps_total).abs() / eps_total < 1e-12);
        let asym = asymptotic_key_bound(n, e, a, f_ec).unwrap();
        prop_assert!(r.best_bound.l_finite <= asym);
    }
}

fn record_strategy() -> impl Strategy<Value = SessionRecord> {
    (
        any::<u64>(),
        0u64..4_000_000_000_000,
        0.0f64..0.4999,
        0u64..4_000_000_000_000,
        0u64..4_000_000_000_000,
        0.0f64..40.0,
        0.01f64..2.0,
        prop_oneof![
            Just(TerminationCause::EveAttack),
            Just(TerminationCause::NaturalDrift),
            Just(TerminationCause::BufferFull),
        ],
    )
        .prop_map(
            |(session_id, sifted_bits, qber, disclosed_bits, secret_bits, loss_db, mu, terminated_by)| {
                SessionRecord {
                    session_id,
                    sifted_bits,
                    qber,
                    disclosed_bits,
                    secret_bits,
                    loss_db,
                    mu,
                    terminated_by,
                }
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn session_log_round_trip_is_lossless(records in prop::collection::vec(record_strategy(), 0..20)) {
        let mut buf = Vec::new();
        write_session_log(&records, &mut buf).unwrap();
        let reloaded = load_session_log(buf.as_slice()).unwrap();
        prop_assert_eq!(records, reloaded);
    }
}
