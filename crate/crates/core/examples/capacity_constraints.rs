//! Side constraints on link capacity: the primal-dual solver prices a binding
//! cap and leaves slack ones at zero.

use mue::equilibrium::{kkt_report, solve, CapacityConstraint, Method, SolverOptions};
use mue::fixtures::{dual_route, dual_route_cost};

fn main() -> mue::Result<()> {
    let fx = dual_route();
    let cost = dual_route_cost(0.6, 0.316);
    let demand = fx.demand(0.0)?;

    for cap in [60.0, 30.0] {
        let options = SolverOptions {
            rel_gap_tol: 1e-8,
            capacity_constraints: vec![CapacityConstraint {
                link_id: "a".into(),
                capacity: cap,
            }],
            ..SolverOptions::with_method(Method::PrimalDual)
        };
        let s = solve(&fx.network, &demand, &cost, &options)?;
        let d = &s.duals[0];
        let k = kkt_report(&s);
        println!(
            "cap {cap:>4}: flow on a {:.3}, price {:.4} $, complementarity {:.1e}",
            d.flow, d.lambda, k.max_complementarity
        );
    }
    Ok(())
}
