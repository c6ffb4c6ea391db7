//! Origin-destination demand, penetration-rate class splitting and
//! commute-distance statistics.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{distance_km, CoordSystem, ZoneCentroid};

/// Vehicle class: gasoline (GV) or electric (EV).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleClass {
    Gv,
    Ev,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 2] = [VehicleClass::Gv, VehicleClass::Ev];

    pub fn index(self) -> usize {
        match self {
            VehicleClass::Gv => 0,
            VehicleClass::Ev => 1,
        }
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VehicleClass::Gv => "gv",
            VehicleClass::Ev => "ev",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdEntry {
    #[serde(rename = "origin_zone")]
    pub origin: String,
    #[serde(rename = "destination_zone")]
    pub destination: String,
    /// veh/h
    pub demand: f64,
}

/// OD demand table. Zero-demand entries are kept so files round-trip.
#[derive(Clone, Debug, PartialEq)]
pub struct OdMatrix {
    entries: Vec<OdEntry>,
    total: f64,
}

impl OdMatrix {
    pub fn new(entries: Vec<OdEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if !(e.demand.is_finite() && e.demand >= 0.0) {
                return Err(Error::Schema {
                    row: i + 1,
                    message: format!("invalid demand {} for {}->{}", e.demand, e.origin, e.destination),
                });
            }
            if !seen.insert((e.origin.as_str(), e.destination.as_str())) {
                return Err(Error::Schema {
                    row: i + 1,
                    message: format!("duplicate OD pair {}->{}", e.origin, e.destination),
                });
            }
        }
        let total = entries.iter().map(|e| e.demand).sum();
        Ok(Self { entries, total })
    }

    pub fn entries(&self) -> &[OdEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_demand(&self) -> f64 {
        self.total
    }

    /// Reads `origin_zone,destination_zone,demand`.
    pub fn load_csv<R: Read>(reader: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, rec) in csv::Reader::from_reader(reader).deserialize::<OdEntry>().enumerate() {
            entries.push(rec.map_err(|e| Error::Schema {
                row: i + 1,
                message: e.to_string(),
            })?);
        }
        Self::new(entries)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.entries {
            w.serialize(e)?;
        }
        if self.entries.is_empty() {
            w.write_record(["origin_zone", "destination_zone", "demand"])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-class demand for each OD pair, in the OD matrix's entry order.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassDemand {
    pairs: Vec<(String, String)>,
    demand: [Vec<f64>; 2],
    penetration: f64,
}

impl ClassDemand {
    /// Builds class demand directly; `gv` and `ev` are aligned with `pairs`.
    /// The recorded penetration is the EV share of total demand.
    pub fn from_parts(pairs: Vec<(String, String)>, gv: Vec<f64>, ev: Vec<f64>) -> Result<Self> {
        if gv.len() != pairs.len() || ev.len() != pairs.len() {
            return Err(Error::Validation("class demand vectors do not match OD pairs".into()));
        }
        if gv.iter().chain(&ev).any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::Validation("class demand must be finite and non-negative".into()));
        }
        let tg: f64 = gv.iter().sum();
        let te: f64 = ev.iter().sum();
        let penetration = if tg + te > 0.0 { te / (tg + te) } else { 0.0 };
        Ok(Self {
            pairs,
            demand: [gv, ev],
            penetration,
        })
    }

    /// All demand travels as one class.
    pub fn single_class(od: &OdMatrix, class: VehicleClass) -> Self {
        let r = match class {
            VehicleClass::Gv => 0.0,
            VehicleClass::Ev => 1.0,
        };
        split_demand(od, r).expect("0 and 1 are valid penetrations")
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn demand(&self, class: VehicleClass) -> &[f64] {
        &self.demand[class.index()]
    }

    pub fn total(&self, class: VehicleClass) -> f64 {
        self.demand[class.index()].iter().sum()
    }

    /// Demand of both classes for pair `i`.
    pub fn pair_total(&self, i: usize) -> f64 {
        self.demand[0][i] + self.demand[1][i]
    }

    pub fn total_demand(&self) -> f64 {
        self.total(VehicleClass::Gv) + self.total(VehicleClass::Ev)
    }

    pub fn penetration(&self) -> f64 {
        self.penetration
    }
}

/// Splits every OD pair proportionally: EV gets `penetration · q`, GV the rest.
pub fn split_demand(od: &OdMatrix, penetration: f64) -> Result<ClassDemand> {
    if !(0.0..=1.0).contains(&penetration) {
        return Err(Error::Domain(format!("penetration {penetration} outside [0, 1]")));
    }
    let pairs = od.entries.iter().map(|e| (e.origin.clone(), e.destination.clone())).collect();
    let ev: Vec<f64> = od.entries.iter().map(|e| penetration * e.demand).collect();
    let gv = od.entries.iter().zip(&ev).map(|(e, d)| e.demand - d).collect();
    Ok(ClassDemand {
        pairs,
        demand: [gv, ev],
        penetration,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramBin {
    /// km
    pub lower: f64,
    /// km
    pub upper: f64,
    /// veh/h
    pub demand: f64,
}

/// Demand-weighted straight-line commute distances and their lognormal fit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommuteStats {
    pub histogram: Vec<HistogramBin>,
    pub mu: f64,
    pub sigma: f64,
    /// Demand on pairs whose centroids coincide (left out of the fit).
    pub zero_distance_demand: f64,
}

impl CommuteStats {
    /// Mode of the fitted lognormal, km.
    pub fn mode(&self) -> f64 {
        (self.mu - self.sigma * self.sigma).exp()
    }
}

/// Lognormal fit by weighted moment matching on log-distances:
/// `μ = Σ w ln d / Σ w`, `σ² = Σ w (ln d − μ)² / Σ w`.
pub fn commute_distance_stats(
    od: &OdMatrix,
    zones: &[ZoneCentroid],
    coord_system: CoordSystem,
    bin_width_km: f64,
) -> Result<CommuteStats> {
    if !(bin_width_km > 0.0) {
        return Err(Error::Domain("histogram bin width must be positive".into()));
    }
    let by_id: HashMap<&str, &ZoneCentroid> = zones.iter().map(|z| (z.id.as_str(), z)).collect();
    let mut samples = Vec::with_capacity(od.len());
    let mut zero = 0.0;
    for e in &od.entries {
        let lookup = |id: &str| {
            by_id
                .get(id)
                .copied()
                .ok_or_else(|| Error::Referential(format!("OD references unknown zone {id}")))
        };
        let (o, d) = (lookup(&e.origin)?, lookup(&e.destination)?);
        if e.demand == 0.0 {
            continue;
        }
        let dist = distance_km(coord_system, o.x, o.y, d.x, d.y);
        if dist > 0.0 {
            samples.push((dist, e.demand));
        } else {
            zero += e.demand;
        }
    }
    let weight: f64 = samples.iter().map(|s| s.1).sum();
    if samples.is_empty() || weight <= 0.0 {
        return Err(Error::Undefined("no positive commute distances to fit".into()));
    }
    let mu = samples.iter().map(|(d, w)| w * d.ln()).sum::<f64>() / weight;
    let var = samples.iter().map(|(d, w)| w * (d.ln() - mu).powi(2)).sum::<f64>() / weight;

    let max = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    let bins = (max / bin_width_km).floor() as usize + 1;
    let mut histogram: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lower: i as f64 * bin_width_km,
            upper: (i + 1) as f64 * bin_width_km,
            demand: 0.0,
        })
        .collect();
    for (d, w) in &samples {
        histogram[((d / bin_width_km).floor() as usize).min(bins - 1)].demand += w;
    }
    Ok(CommuteStats {
        histogram,
        mu,
        sigma: var.sqrt(),
        zero_distance_demand: zero,
    })
}
