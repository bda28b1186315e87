use hetnet_ee::config::{
    parse_config, parse_config_str, parse_topology_str, serialize_config, serialize_topology, QueueEntry, RunConfig,
    SweepEntry, TopologySource, UserRecord,
};
use hetnet_ee::experiments::{InstanceTemplate, SweepAxis, SweepSpec};
use hetnet_ee::queueing::CtmcSpec;
use hetnet_ee::topology::{GeneratorParams, TopologyShape};
use proptest::prelude::*;

fn config() -> impl Strategy<Value = RunConfig> {
    (
        any::<u64>(),
        (prop_oneof![Just(TopologyShape::Line), Just(TopologyShape::Star), Just(TopologyShape::Tree)], 1usize..9, 0usize..4),
        (0.01f64..10.0, 1e5f64..5e6, 1.0f64..20.0),
        (0usize..4, 1usize..4, proptest::option::of(1usize..30), proptest::option::of(-10.0f64..40.0)),
        (1e-9f64..0.5, 1usize..500),
        proptest::collection::vec((1usize..6, 0usize..4, 0.0f64..5.0, 0.0f64..=1.0), 0..3),
        proptest::collection::vec((1.0f64..30.0, 1usize..5), 0..3),
    )
        .prop_map(|(seed, (shape, small, extra), (scale, y_min, y_ratio), (mu, upc, total, snr), (tol, iters), queues, sweeps)| {
            let mut cfg = RunConfig { seed, capacity_scale: scale, ..RunConfig::default() };
            cfg.topology = TopologySource::Generator(GeneratorParams {
                shape,
                small_cells: small,
                extra_links: extra,
                ..GeneratorParams::default()
            });
            cfg.radio.y_min_bps = y_min;
            cfg.radio.y_max_bps = y_min * y_ratio;
            cfg.users.macro_users = mu;
            cfg.users.users_per_cell = upc;
            cfg.users.total_users = total;
            cfg.users.target_snr_db = snr;
            cfg.optimizer.tol = tol;
            cfg.optimizer.max_bisection_iters = iters;
            cfg.queues = queues
                .into_iter()
                .enumerate()
                .map(|(i, (c, q, l, a))| QueueEntry {
                    name: format!("q{i}"),
                    spec: CtmcSpec { channels: c, queue_r: q, lambda_r: l, alpha_s: a, ..CtmcSpec::default() },
                })
                .collect();
            cfg.sweeps = sweeps
                .into_iter()
                .enumerate()
                .map(|(i, (step, n))| SweepEntry {
                    name: format!("s{i}"),
                    spec: SweepSpec::new(SweepAxis::SnrDb, (0..n).map(|k| step * k as f64).collect(), vec![1, 2]),
                })
                .collect();
            cfg
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn serialize_then_parse_is_identity(cfg in config()) {
        let text = serialize_config(&cfg);
        let back = parse_config_str(&text, None).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(serialize_config(&back), text);
    }

    #[test]
    fn topology_files_roundtrip(seed in any::<u64>()) {
        let cfg = RunConfig::default();
        let (topo, users) = InstanceTemplate::default().draw(seed).unwrap();
        let records: Vec<UserRecord> = users.into_iter().map(|channel| UserRecord { channel, rate_bounds: None }).collect();
        let text = serialize_topology(&topo, &records);
        let parsed = parse_topology_str(&text, &cfg.radio, 0.0).unwrap();
        prop_assert_eq!(&parsed.topology, &topo);
        prop_assert_eq!(serialize_topology(&parsed.topology, &parsed.users), text);
    }
}

#[test]
fn empty_file_gives_defaults() {
    assert_eq!(parse_config_str("", None).unwrap(), RunConfig::default());
    assert_eq!(parse_config_str("# only a comment\n\n", None).unwrap(), RunConfig::default());
}

#[test]
fn errors_carry_stable_codes() {
    let cases = [
        ("[run]\nseed = x\n", "E_PARSE"),
        ("[nope]\n", "E_PARSE"),
        ("[run]\nseed = 1\n[run]\nseed = 2\n", "E_PARSE"),
        ("[radio]\ny_min_bps = -1\n", "E_VALIDATION"),
        ("[optimizer]\ntol = 0\n", "E_VALIDATION"),
        ("[queue]\nname = a\nchannels = 0\n", "E_VALIDATION"),
        ("[sweep]\nname = s\naxis = snr_db\nvalues = [3, 1, 2]\nseeds = [1]\n", "E_VALIDATION"),
    ];
    for (text, code) in cases {
        let err = parse_config_str(text, None).unwrap_err();
        assert_eq!(err.code(), code, "{text:?}: {err}");
    }
}

#[test]
fn topology_file_paths_resolve_against_the_config_dir() {
    let dir = tempfile::tempdir().unwrap();
    let (topo, users) = InstanceTemplate::default().draw(3).unwrap();
    let records: Vec<UserRecord> = users.into_iter().map(|channel| UserRecord { channel, rate_bounds: None }).collect();
    std::fs::write(dir.path().join("net.txt"), serialize_topology(&topo, &records)).unwrap();
    std::fs::write(dir.path().join("run.txt"), "[topology]\nfile = \"net.txt\"\n").unwrap();
    let cfg = parse_config(&dir.path().join("run.txt")).unwrap();
    let TopologySource::File(path) = &cfg.topology else { panic!("expected a file source") };
    assert!(path.is_file());
    let inst = cfg.instance().unwrap();
    assert_eq!(inst.topology, topo);
}

#[test]
fn atmospheric_parts_are_summed() {
    let cfg = parse_config_str("[radio]\natmos_o2_db_per_km = 15\natmos_rain_db_per_km = 1.5\n", None).unwrap();
    assert_eq!(cfg.radio.atmos_db_per_km, 16.5);
    let both = parse_config_str("[radio]\natmos_db_per_km = 3\natmos_vapour_db_per_km = 1\n", None).unwrap_err();
    assert_eq!(both.code(), "E_VALIDATION");
    assert!(parse_config_str("[radio]\natmos_rain_db_per_km = -1\n", None).is_err());
}
