//! Per-distance vehicle costs for the bundled city configurations.

use mue::cost::{vehicle_costs, CostConfig, GeneralizedCost};

fn main() -> mue::Result<()> {
    println!("{:<14} {:>9} {:>9} {:>9} {:>7}", "city", "gv $/mi", "ev $/mi", "fuel $/mi", "ev/gv");
    for (name, config) in CostConfig::bundled_names().zip(CostConfig::bundled()) {
        let c = vehicle_costs(&config)?;
        println!(
            "{:<14} {:>9.4} {:>9.4} {:>9.4} {:>7.3}",
            name,
            c.per_mile[0],
            c.per_mile[1],
            c.gv_fuel_per_mile,
            c.ratio()
        );
    }

    let boston = CostConfig::city("boston")?;
    let g = GeneralizedCost::from_config(&boston)?;
    let bpr = boston.bpr();
    // a 2 km link, 3 minutes free flow, loaded to capacity
    let t = bpr.time(3.0, 1000.0, 1000.0);
    for (class, per_km) in ["GV", "EV"].iter().zip(g.per_km) {
        println!("boston {class}: {:.3} $ for the link at capacity ({t:.2} min)", g.vot * t + per_km * 2.0);
    }
    Ok(())
}
