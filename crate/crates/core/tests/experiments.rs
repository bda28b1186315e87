use hetnet_ee::ee::SolverOptions;
use hetnet_ee::experiments::{derive_seed, sweep, InstanceTemplate, Method, SweepAxis, SweepSpec};
use hetnet_ee::par::Execution;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn derived_seeds_are_stable_and_separate(base in any::<u64>(), a in 0u64..1000, b in 0u64..1000) {
        prop_assert_eq!(derive_seed(base, a), derive_seed(base, a));
        if a != b {
            prop_assert_ne!(derive_seed(base, a), derive_seed(base, b));
        }
    }
}

fn small_spec(axis: SweepAxis, values: Vec<f64>) -> SweepSpec {
    SweepSpec::new(axis, values, vec![1, 2, 3])
}

#[test]
fn parallel_and_sequential_sweeps_agree_exactly() {
    let template = InstanceTemplate::default();
    let opts = SolverOptions::default();
    for spec in [
        small_spec(SweepAxis::SnrDb, vec![0.0, 10.0, 20.0]),
        small_spec(SweepAxis::UserCount, vec![4.0, 8.0]),
        small_spec(SweepAxis::Backhaul, vec![0.2, 1.0]),
    ] {
        let par = sweep(&spec, &template, &opts, 5, Execution::Parallel).unwrap();
        let seq = sweep(&spec, &template, &opts, 5, Execution::Sequential).unwrap();
        assert_eq!(par, seq);
        assert_eq!(par.rows_csv(), seq.rows_csv());
        assert_eq!(par.averages_csv(), seq.averages_csv());
    }
}

#[test]
fn rows_are_ordered_and_complete() {
    let spec = small_spec(SweepAxis::SnrDb, vec![0.0, 6.0]);
    let res = sweep(&spec, &InstanceTemplate::default(), &SolverOptions::default(), 1, Execution::Parallel).unwrap();
    assert_eq!(res.rows.len(), 2 * 3 * 3);
    let keys: Vec<(u64, Method, u64)> = res.rows.iter().map(|r| (r.axis_value.to_bits(), r.method, r.seed)).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| f64::from_bits(a.0).total_cmp(&f64::from_bits(b.0)).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    assert_eq!(keys, sorted);
    assert!(res.rows.iter().all(|r| r.outcome.is_ok()), "{:?}", res.rows.iter().find(|r| r.outcome.is_err()));
    assert_eq!(res.averages().len(), 2 * 3);
}

#[test]
fn optimized_rows_dominate_baselines_per_seed() {
    let spec = small_spec(SweepAxis::SnrDb, vec![0.0, 10.0, 20.0]);
    let res = sweep(&spec, &InstanceTemplate::default(), &SolverOptions::default(), 2, Execution::Parallel).unwrap();
    for opt in res.rows.iter().filter(|r| r.method == Method::Optimized) {
        let o = opt.outcome.as_ref().unwrap();
        for base in res.rows.iter().filter(|r| r.method != Method::Optimized && r.seed == opt.seed && r.axis_value == opt.axis_value) {
            if let Ok(b) = &base.outcome {
                assert!(o.ee_bps_per_w >= b.ee_bps_per_w * (1.0 - 1e-4), "{opt:?} vs {base:?}");
            }
        }
    }
}

#[test]
fn the_same_seed_sees_the_same_network_along_the_axis() {
    let t = InstanceTemplate::default();
    let a = SweepAxis::SnrDb.apply(&t, 0.0).draw(9).unwrap();
    let b = SweepAxis::SnrDb.apply(&t, 20.0).draw(9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_sweeps_are_rejected() {
    let t = InstanceTemplate::default();
    let o = SolverOptions::default();
    for spec in [
        SweepSpec::new(SweepAxis::SnrDb, vec![], vec![1]),
        SweepSpec::new(SweepAxis::SnrDb, vec![1.0], vec![]),
        SweepSpec::new(SweepAxis::UserCount, vec![2.5], vec![1]),
        SweepSpec::new(SweepAxis::Backhaul, vec![0.0, 1.0], vec![1]),
        SweepSpec::new(SweepAxis::SnrDb, vec![1.0, 1.0], vec![1]),
    ] {
        assert!(sweep(&spec, &t, &o, 1, Execution::Sequential).is_err(), "{spec:?}");
    }
}
