//! Two parallel routes, one OD pair: how the split between a short slow link
//! and a long fast one moves as EVs replace GVs.

use mue::equilibrium::{solve, SolverOptions};
use mue::fixtures::{dual_route, dual_route_cost};
use mue::metrics::MetricsReport;

fn main() -> mue::Result<()> {
    let fx = dual_route();
    // $/mile: GV pays more per distance, so it favours the shorter link a
    let cost = dual_route_cost(0.6, 0.316);
    let (a, b) = (fx.network.link_idx("a").unwrap(), fx.network.link_idx("b").unwrap());

    println!("{:>5} {:>8} {:>8} {:>8} {:>8} {:>9}", "R_e", "gv_a", "gv_b", "ev_a", "ev_b", "T (min)");
    for i in 0..=10 {
        let r = i as f64 / 10.0;
        let demand = fx.demand(r)?;
        let s = solve(&fx.network, &demand, &cost, &SolverOptions::default())?;
        let [gv, ev] = &s.link_flows.per_class;
        let t = MetricsReport::compute(&s, &fx.network, &demand)?.avg_travel_time_mue;
        println!("{r:>5.1} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {t:>9.4}", gv[a], gv[b], ev[a], ev[b]);
    }
    Ok(())
}
