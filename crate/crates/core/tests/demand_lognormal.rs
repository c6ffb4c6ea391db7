use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use mue::demand::{commute_distance_stats, OdEntry, OdMatrix};
use mue::network::{CoordSystem, ZoneCentroid};

/// One origin at the origin of the plane, one destination per sample placed
/// at the sampled distance along a ray.
fn star(distances: &[f64], demand: impl Fn(usize) -> f64) -> (OdMatrix, Vec<ZoneCentroid>) {
    let mut zones = vec![ZoneCentroid { id: "o".into(), x: 0.0, y: 0.0 }];
    let mut entries = Vec::new();
    for (i, &d) in distances.iter().enumerate() {
        let angle = i as f64 * 0.37;
        zones.push(ZoneCentroid { id: format!("d{i}"), x: d * angle.cos(), y: d * angle.sin() });
        entries.push(OdEntry { origin: "o".into(), destination: format!("d{i}"), demand: demand(i) });
    }
    (OdMatrix::new(entries).unwrap(), zones)
}

#[test]
fn fit_recovers_lognormal_mode() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (mu, sigma) in [(10f64.ln(), 0.6), (4f64.ln(), 0.3), (20f64.ln(), 0.9)] {
        let dist = LogNormal::new(mu, sigma).unwrap();
        let samples: Vec<f64> = (0..20_000).map(|_| dist.sample(&mut rng)).collect();
        let (od, zones) = star(&samples, |_| 1.0);
        let stats = commute_distance_stats(&od, &zones, CoordSystem::Km, 0.5).unwrap();
        let mode = (mu - sigma * sigma).exp();
        assert!((stats.mode() / mode - 1.0).abs() < 0.03, "{} vs {mode}", stats.mode());
        assert!((stats.mu - mu).abs() < 0.02);
        assert!((stats.sigma - sigma).abs() < 0.02);
        let binned: f64 = stats.histogram.iter().map(|b| b.demand).sum();
        assert!((binned - 20_000.0).abs() < 1e-6);
    }
}

#[test]
fn demand_weights_act_as_repeated_trips() {
    let distances = [1.0, 2.5, 4.0, 7.0, 12.0];
    let weights = [3.0, 1.0, 2.0, 5.0, 1.0];
    let (od, zones) = star(&distances, |i| weights[i]);
    let weighted = commute_distance_stats(&od, &zones, CoordSystem::Km, 1.0).unwrap();

    let repeated: Vec<f64> = distances
        .iter()
        .zip(weights)
        .flat_map(|(&d, w)| std::iter::repeat_n(d, w as usize))
        .collect();
    let (od, zones) = star(&repeated, |_| 1.0);
    let unit = commute_distance_stats(&od, &zones, CoordSystem::Km, 1.0).unwrap();

    assert!((weighted.mu - unit.mu).abs() < 1e-12);
    assert!((weighted.sigma - unit.sigma).abs() < 1e-12);
    assert_eq!(weighted.histogram.len(), unit.histogram.len());
    for (a, b) in weighted.histogram.iter().zip(&unit.histogram) {
        assert!((a.demand - b.demand).abs() < 1e-9);
    }
}
