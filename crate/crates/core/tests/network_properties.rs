use proptest::prelude::*;

use mue::network::{
    load_network, shortest_path, write_links_csv, write_nodes_csv, CoordSystem, Hierarchy, HierarchyDefaults, LinkSpec,
    Network, NetworkBuilder, ZoneCentroid,
};

#[derive(Clone, Debug)]
struct RandomNet {
    nodes: Vec<(f64, f64)>,
    links: Vec<(usize, usize, f64, f64, f64, u8)>,
}

fn random_net() -> impl Strategy<Value = RandomNet> {
    (2usize..12).prop_flat_map(|n| {
        let nodes = proptest::collection::vec((-20.0f64..20.0, -20.0f64..20.0), n);
        let links = proptest::collection::vec(
            (0..n, 0..n, 0.05f64..10.0, 10.0f64..3000.0, 5.0f64..120.0, 0u8..3),
            0..40,
        );
        (nodes, links).prop_map(|(nodes, links)| RandomNet {
            nodes,
            links: links.into_iter().filter(|l| l.0 != l.1).collect(),
        })
    })
}

fn build(r: &RandomNet) -> Network {
    let mut b = NetworkBuilder::new(CoordSystem::Km);
    for (i, &(x, y)) in r.nodes.iter().enumerate() {
        b.add_node(format!("n{i}"), x, y).unwrap();
    }
    for (i, &(f, t, len, cap, speed, h)) in r.links.iter().enumerate() {
        let hierarchy = [Hierarchy::Expressway, Hierarchy::Highway, Hierarchy::Local][h as usize];
        b.add_link(LinkSpec {
            id: format!("l{i}"),
            from: format!("n{f}"),
            to: format!("n{t}"),
            length_km: len,
            capacity: cap,
            speed_kmh: speed,
            hierarchy,
        })
        .unwrap();
    }
    b.build()
}

proptest! {
    #[test]
    fn shortest_path_costs_are_relaxed(r in random_net(), origin_pick in 0usize..100) {
        let net = build(&r);
        let costs: Vec<f64> = net.links().iter().map(|l| l.free_flow_time).collect();
        let origin = origin_pick % net.node_count();
        let tree = shortest_path(&net, &costs, origin).unwrap();
        prop_assert_eq!(tree.cost[origin], 0.0);
        for (a, l) in net.links().iter().enumerate() {
            prop_assert!(tree.cost[l.to] <= tree.cost[l.from] + costs[a] + 1e-9);
        }
        for v in 0..net.node_count() {
            if let Some(p) = tree.path_to(&net, v) {
                let c: f64 = p.iter().map(|&a| costs[a]).sum();
                prop_assert!((c - tree.cost[v]).abs() <= 1e-9 * c.max(1.0));
            } else {
                prop_assert!(tree.cost[v].is_infinite());
            }
        }
    }

    #[test]
    fn csv_round_trip_is_identical(r in random_net()) {
        let net = build(&r);
        let (mut nodes, mut links) = (Vec::new(), Vec::new());
        write_nodes_csv(&net, &mut nodes).unwrap();
        write_links_csv(&net, &mut links).unwrap();
        let back = load_network(nodes.as_slice(), links.as_slice(), &HierarchyDefaults::default()).unwrap();
        prop_assert_eq!(back, net);
    }

    #[test]
    fn connectors_only_append(r in random_net(), zones in proptest::collection::vec((-25.0f64..25.0, -25.0f64..25.0), 1..6)) {
        let net = build(&r);
        let centroids: Vec<ZoneCentroid> = zones
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| ZoneCentroid { id: format!("z{i}"), x, y })
            .collect();
        let with = net.generate_connectors(&centroids).unwrap();
        prop_assert_eq!(&with.nodes()[..net.node_count()], net.nodes());
        prop_assert_eq!(&with.links()[..net.link_count()], net.links());
        prop_assert_eq!(with.link_count(), net.link_count() + 2 * centroids.len());
        for z in &centroids {
            let zone = with.zone(&z.id).unwrap();
            prop_assert!(zone.attached_node < net.node_count());
        }
    }
}
