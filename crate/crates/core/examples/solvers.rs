//! Every solver on the same 10x10 grid instance: iterations, final gap and
//! the largest link-flow difference from the primal-dual answer.

use std::time::Instant;

use mue::equilibrium::{solve, Method, SolverOptions};
use mue::fixtures::grid10x10;

fn main() -> mue::Result<()> {
    let fx = grid10x10(7);
    let demand = fx.demand(0.4)?;
    let cost = fx.cost();

    let mut reference: Option<Vec<f64>> = None;
    for method in [Method::PrimalDual, Method::ExtraGradient, Method::Bfw, Method::Fw] {
        let options = SolverOptions {
            rel_gap_tol: 1e-5,
            max_iters: 50_000,
            ..SolverOptions::with_method(method)
        };
        let start = Instant::now();
        let s = solve(&fx.network, &demand, &cost, &options)?;
        let diff = reference.as_ref().map_or(0.0, |r| {
            r.iter().zip(&s.link_flows.total).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        });
        println!(
            "{method:<4} iterations={:<6} gap={:.2e} max|dx|={diff:.2e} veh/h  {:.2?}",
            s.iterations,
            s.relative_gap,
            start.elapsed()
        );
        reference.get_or_insert(s.link_flows.total);
    }
    Ok(())
}
