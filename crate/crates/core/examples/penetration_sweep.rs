//! Sweep EV penetration from 0 to 1 on the dual-route network and print the
//! curve, its plateaus and transitions, critical thresholds and city type.

use mue::analysis::run_sweep;
use mue::equilibrium::SolverOptions;
use mue::fixtures::{dual_route, dual_route_cost};

fn main() -> mue::Result<()> {
    let fx = dual_route();
    let cost = dual_route_cost(0.6, 0.316);
    let levels: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let sweep = run_sweep(&fx.network, &fx.od, &cost, &levels, &SolverOptions::default())?;

    for r in &sweep.records {
        println!(
            "R_e={:.2} T={:.4} PS={:>6.2} overlap={}",
            r.penetration,
            r.metrics.avg_travel_time_mue,
            r.potential_savings.unwrap_or(f64::NAN),
            r.path_overlap.map_or("-".into(), |o| format!("{o:.3}"))
        );
    }
    println!("plateaus:    {:?}", sweep.plateau_intervals);
    println!("transitions: {:?}", sweep.transition_intervals);
    println!("thresholds:  {:?}", sweep.critical_thresholds);
    if let Some(c) = &sweep.city_type {
        println!("type {:?}: {}", c.city_type, c.rationale);
    }
    Ok(())
}
