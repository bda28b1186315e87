use hetnet_ee::par::Execution;
use hetnet_ee::queueing::{
    analyse, build_generator, enumerate_states, erlang_b, estimator_update, mean_response_time, mm1k_mean_queue,
    simulate_replicas, total_variation, CtmcSpec, EstimatorState, QueueError,
};
use proptest::prelude::*;

fn spec() -> impl Strategy<Value = CtmcSpec> {
    (
        (1usize..5, 0usize..4, 0usize..4),
        (0.0f64..3.0, 0.0f64..3.0, 0.0f64..3.0),
        (0.2f64..2.0, 0.2f64..2.0, 0.2f64..2.0),
        (0.0f64..=1.0, 0.0f64..=1.0),
    )
        .prop_map(|((c, qr, qt), (ls, lr, lt), (ms, mr, mt), (a_s, a_v))| CtmcSpec {
            channels: c,
            queue_r: qr,
            queue_tau: qt,
            lambda_s: ls,
            lambda_r: lr,
            lambda_tau: lt,
            mu_s: ms,
            mu_r: mr,
            mu_tau: mt,
            alpha_s: a_s,
            alpha_v: a_v,
        })
        // a zero service factor freezes every departure
        .prop_filter("service factor", |s| s.service_factor() > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn generator_rows_sum_to_zero(s in spec()) {
        let space = enumerate_states(&s).unwrap();
        let q = build_generator(&s, &space);
        for r in 0..q.len() {
            let scale = q.diagonal[r].abs().max(1.0);
            prop_assert!(q.row_sum(r).abs() <= 1e-12 * scale);
            prop_assert!(q.diagonal[r] <= 0.0);
            prop_assert!(q.rows[r].iter().all(|&(to, rate)| to != r && rate > 0.0));
        }
    }

    #[test]
    fn stationary_distribution_is_a_fixed_point(s in spec()) {
        let (space, pi, m) = analyse(&s).unwrap();
        let q = build_generator(&s, &space);
        prop_assert!((pi.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(pi.pi.iter().all(|&p| p >= 0.0));
        prop_assert!(pi.residual(&q) < 1e-10);
        for v in [m.pb_s, m.pf1, m.pf2, m.utilization] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(m.pf1 <= m.pb_s + 1e-12 && m.pf2 <= m.pb_s + 1e-12);
    }

    /// Requests are never dropped once admitted, so completions balance
    /// admissions class by class.
    #[test]
    fn completions_balance_admissions(s in spec()) {
        let (_, _, m) = analyse(&s).unwrap();
        prop_assert!((m.scr1 - s.lambda_r * (1.0 - m.pf1)).abs() < 1e-9);
        prop_assert!((m.scr2 - s.lambda_tau * (1.0 - m.pf2)).abs() < 1e-9);
        if let Some(d1) = m.d1 {
            prop_assert!((d1 * s.lambda_r * (1.0 - m.pf1) - m.l1).abs() < 1e-9);
        }
    }

    #[test]
    fn blocking_grows_with_arrival_rate(s in spec(), bump in 0.05f64..2.0) {
        let more = CtmcSpec { lambda_r: s.lambda_r + bump, ..s.clone() };
        let (_, _, a) = analyse(&s).unwrap();
        let (_, _, b) = analyse(&more).unwrap();
        prop_assert!(b.pf1 >= a.pf1 - 1e-12, "{} -> {}", a.pf1, b.pf1);
        prop_assert!(b.pb_s >= a.pb_s - 1e-12);
    }

    #[test]
    fn erlang_b_matches_the_chain(c in 1usize..12, load in 0.05f64..15.0) {
        let (_, _, m) = analyse(&CtmcSpec::erlang(c, load)).unwrap();
        prop_assert!((m.pf1 - erlang_b(c, load)).abs() < 1e-10);
    }

    #[test]
    fn single_server_queue_matches_mm1k(k in 1usize..8, lambda in 0.05f64..3.0, mu in 0.2f64..3.0) {
        let s = CtmcSpec {
            channels: 1,
            queue_r: k - 1,
            lambda_r: lambda,
            mu_r: mu,
            ..CtmcSpec::erlang(1, lambda)
        };
        let (_, _, m) = analyse(&s).unwrap();
        prop_assert!((m.l1 - mm1k_mean_queue(lambda, mu, k)).abs() < 1e-10);
    }

    #[test]
    fn estimator_error_decays_geometrically(a in 0.01f64..=1.0, target in -1e3f64..1e3, steps in 1usize..200) {
        let mut st = EstimatorState::new(2, a).unwrap();
        for _ in 0..steps {
            st = estimator_update(&st, 0, target);
        }
        let expected = (1.0 - a).powi(steps as i32) * target.abs();
        prop_assert!(((st.s_hat[0] - target).abs() - expected).abs() <= 1e-9 * target.abs().max(1.0));
        prop_assert_eq!(st.s_hat[1], 0.0);
    }
}

#[test]
fn simulation_agrees_with_the_solver() {
    let s = CtmcSpec { channels: 3, queue_r: 2, queue_tau: 1, lambda_s: 1.0, ..CtmcSpec::default() };
    let (_, pi, _) = analyse(&s).unwrap();
    let par = simulate_replicas(&s, 100_000, 4, 9, Execution::Parallel).unwrap();
    let seq = simulate_replicas(&s, 100_000, 4, 9, Execution::Sequential).unwrap();
    assert_eq!(par, seq);
    let tv = total_variation(&pi.pi, &par);
    assert!(tv < 0.02, "total variation {tv}");
}

#[test]
fn response_time_needs_spare_capacity() {
    assert!((mean_response_time(2.0, 1.0, 1.5).unwrap() - 2.0).abs() < 1e-12);
    assert!(matches!(mean_response_time(1.0, 1.0, 1.0), Err(QueueError::Unstable { .. })));
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(enumerate_states(&CtmcSpec { channels: 0, ..CtmcSpec::default() }).is_err());
    assert!(enumerate_states(&CtmcSpec { alpha_s: 1.5, ..CtmcSpec::default() }).is_err());
    assert!(enumerate_states(&CtmcSpec { mu_r: 0.0, ..CtmcSpec::default() }).is_err());
    let huge = CtmcSpec { channels: 200, queue_r: 200, queue_tau: 200, ..CtmcSpec::default() };
    assert!(matches!(enumerate_states(&huge), Err(QueueError::StateSpaceTooLarge { .. })));
    assert!(EstimatorState::new(1, 1.5).is_err());
}
