use hetnet_ee::radio::RadioConfig;
use hetnet_ee::topology::{generate_topology, reachable_destinations, GeneratorParams, NodeKind, TopologyShape};
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = TopologyShape> {
    prop_oneof![Just(TopologyShape::Line), Just(TopologyShape::Star), Just(TopologyShape::Tree)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn incidence_columns_hold_one_source_and_one_sink(
        shape in shape(),
        small in 1usize..8,
        extra in 0usize..4,
        seed in any::<u64>(),
    ) {
        let params = GeneratorParams { shape, small_cells: small, extra_links: extra, ..GeneratorParams::default() };
        let topo = generate_topology(&params, &RadioConfig::default(), seed).unwrap();
        prop_assert_eq!(topo.n_nodes(), small + 1);
        prop_assert_eq!(topo.nodes()[0].kind, NodeKind::Macro);
        let a = topo.incidence();
        prop_assert_eq!(a.len(), topo.n_nodes());
        for (l, link) in topo.links().iter().enumerate() {
            prop_assert_eq!(link.id, l + 1);
            prop_assert_ne!(link.from, link.to);
            let col: Vec<i8> = a.iter().map(|row| row[l]).collect();
            prop_assert_eq!(col.iter().map(|&v| v as i32).sum::<i32>(), 0);
            prop_assert_eq!(col[link.from], 1);
            prop_assert_eq!(col[link.to], -1);
            prop_assert_eq!(col.iter().filter(|&&v| v != 0).count(), 2);
            prop_assert!(link.capacity_bps > 0.0 && link.max_power_watts > 0.0);
            prop_assert!(topo.outgoing(link.from).contains(&l));
            prop_assert!(topo.incoming(link.to).contains(&l));
        }
        // every small cell hangs off the macro cell
        prop_assert_eq!(reachable_destinations(&topo).len(), small);
    }

    #[test]
    fn generator_is_a_function_of_its_seed(seed in any::<u64>()) {
        let params = GeneratorParams { small_cells: 6, extra_links: 2, ..GeneratorParams::default() };
        let radio = RadioConfig::default();
        prop_assert_eq!(
            generate_topology(&params, &radio, seed).unwrap(),
            generate_topology(&params, &radio, seed).unwrap()
        );
    }
}

#[test]
fn line_and_star_have_the_expected_links() {
    let radio = RadioConfig::default();
    let line = GeneratorParams { shape: TopologyShape::Line, small_cells: 4, extra_links: 0, ..GeneratorParams::default() };
    let t = generate_topology(&line, &radio, 3).unwrap();
    let pairs: Vec<(usize, usize)> = t.links().iter().map(|l| (l.from, l.to)).collect();
    assert_eq!(pairs, vec![(0, 1), (1, 2), (2, 3), (3, 4)]);

    let star = GeneratorParams { shape: TopologyShape::Star, ..line };
    let t = generate_topology(&star, &radio, 3).unwrap();
    assert!(t.links().iter().all(|l| l.from == 0));
    assert_eq!(t.n_links(), 4);
}
