use mue::cost::CostConfig;
use mue::demand::OdMatrix;
use mue::equilibrium::{read_solution_csv, solve, write_solution_csv, SolutionDump, SolverOptions};
use mue::fixtures::{grid3x3, small_fixtures};

#[test]
fn od_csv_round_trips() {
    for fx in small_fixtures() {
        let mut buf = Vec::new();
        fx.od.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("origin_zone,destination_zone,demand"));
        assert_eq!(OdMatrix::load_csv(buf.as_slice()).unwrap(), fx.od);
    }
}

#[test]
fn solution_csv_round_trips() {
    let fx = grid3x3();
    let s = solve(&fx.network, &fx.demand(0.3).unwrap(), &fx.cost(), &SolverOptions::default()).unwrap();
    let mut buf = Vec::new();
    write_solution_csv(&s, &fx.network, &mut buf).unwrap();
    let back = read_solution_csv(buf.as_slice()).unwrap();
    assert_eq!(back, SolutionDump::new(&s, &fx.network).links);
    for (r, l) in back.iter().zip(fx.network.links()) {
        assert_eq!(r.link_id, l.id);
        assert_eq!(r.flow_total, r.flow_gv + r.flow_ev);
    }
}

#[test]
fn solution_json_round_trips() {
    let fx = grid3x3();
    let s = solve(&fx.network, &fx.demand(0.7).unwrap(), &fx.cost(), &SolverOptions::default()).unwrap();
    let dump = SolutionDump::new(&s, &fx.network);
    let text = serde_json::to_string(&dump).unwrap();
    assert_eq!(serde_json::from_str::<SolutionDump>(&text).unwrap(), dump);
}

#[test]
fn bundled_cost_configs_round_trip() {
    let bundled = CostConfig::bundled();
    assert_eq!(bundled.len(), CostConfig::bundled_names().count());
    for c in bundled {
        let text = c.to_json_pretty().unwrap();
        assert_eq!(CostConfig::from_json(text.as_bytes()).unwrap(), c);
    }
}
