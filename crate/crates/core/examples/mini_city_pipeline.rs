//! Full pipeline on the synthetic mini city: write the inputs to disk, load
//! and validate them as the command line does, sweep, and write all outputs.
//!
//! Pass an output directory as the first argument (default: a temp dir).

use std::path::PathBuf;

use mue::cli::{cmd_sweep, cmd_validate, RunConfig};
use mue::demand::commute_distance_stats;
use mue::fixtures::mini_city;

fn main() -> mue::Result<()> {
    let root = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("mue-mini-city"));
    let fx = mini_city(1);
    let input = root.join("input");
    fx.write_to(&input)?;

    let stats = commute_distance_stats(&fx.od, &fx.zones, fx.base.coord_system(), 1.0)?;
    println!("commute distance mode {:.2} km (mu {:.3}, sigma {:.3})", stats.mode(), stats.mu, stats.sigma);

    let mut config = RunConfig::from_dir(&input, &root.join("out"));
    println!("{}", cmd_validate(&config)?);
    config.levels = (0..=10).map(|i| i as f64 / 10.0).collect();
    let sweep = cmd_sweep(&config)?;
    for r in sweep.rows() {
        println!("R_e={:.1} T={:.3} VOC={:.1} RUR={:.3}", r.penetration, r.t_mue, r.voc_total, r.rur);
    }
    if let Some(c) = &sweep.city_type {
        println!("type {:?}", c.city_type);
    }
    println!("outputs in {}", config.out.display());
    Ok(())
}
