use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{EquilibriumSolution, IterationRecord, LinkDual, Method};
use crate::demand::VehicleClass;
use crate::error::{Error, Result};
use crate::network::Network;

/// One row of the solution dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub link_id: String,
    pub flow_gv: f64,
    pub flow_ev: f64,
    pub flow_total: f64,
    /// minutes
    pub time: f64,
    pub voc: f64,
}

/// JSON form of a solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionDump {
    pub method: Method,
    pub penetration: f64,
    pub converged: bool,
    pub iterations: usize,
    pub relative_gap: f64,
    pub beckmann_value: f64,
    pub skipped_intrazonal_demand: f64,
    pub links: Vec<LinkRecord>,
    pub duals: Vec<LinkDual>,
    pub gap_trace: Vec<IterationRecord>,
}

impl SolutionDump {
    pub fn new(solution: &EquilibriumSolution, network: &Network) -> Self {
        let f = &solution.link_flows;
        let links = network
            .links()
            .iter()
            .enumerate()
            .map(|(a, l)| LinkRecord {
                link_id: l.id.clone(),
                flow_gv: f.class(VehicleClass::Gv)[a],
                flow_ev: f.class(VehicleClass::Ev)[a],
                flow_total: f.total[a],
                time: solution.link_times[a],
                voc: f.total[a] / l.capacity,
            })
            .collect();
        Self {
            method: solution.method,
            penetration: solution.penetration,
            converged: solution.converged,
            iterations: solution.iterations,
            relative_gap: solution.relative_gap,
            beckmann_value: solution.beckmann_value,
            skipped_intrazonal_demand: solution.skipped_intrazonal_demand,
            links,
            duals: solution.duals.clone(),
            gap_trace: solution.gap_trace.clone(),
        }
    }
}

pub fn write_solution_json<W: Write>(solution: &EquilibriumSolution, network: &Network, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, &SolutionDump::new(solution, network))?;
    Ok(())
}

/// Per-link rows only; the gap trace is in the JSON form.
pub fn write_solution_csv<W: Write>(solution: &EquilibriumSolution, network: &Network, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in SolutionDump::new(solution, network).links {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_solution_csv<R: Read>(reader: R) -> Result<Vec<LinkRecord>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Schema {
                row: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
