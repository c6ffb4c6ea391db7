//! Vehicle operating costs, BPR link performance and generalized link costs.
//!
//! Money is in dollars, time in minutes, distance in km. Per-mile cost
//! components from the cost tables are converted to per-km with `r_dis`.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::demand::VehicleClass;
use crate::error::{Error, Result};
use crate::network::{HierarchyDefaults, Link};

/// Per-mile GV cost components ($/mile).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GvComponents {
    pub maint: f64,
    pub fix: f64,
    pub dep: f64,
    pub ins: f64,
    pub add: f64,
    pub env: f64,
}

impl GvComponents {
    pub fn sum(&self) -> f64 {
        self.maint + self.fix + self.dep + self.ins + self.add + self.env
    }

    fn all(&self) -> [f64; 6] {
        [self.maint, self.fix, self.dep, self.ins, self.add, self.env]
    }
}

/// Per-mile EV cost components ($/mile). `sub` is a subsidy and may be negative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvComponents {
    pub maint: f64,
    pub fix: f64,
    pub dep: f64,
    pub ins: f64,
    pub add: f64,
    pub env: f64,
    pub sub: f64,
}

impl EvComponents {
    pub fn sum(&self) -> f64 {
        self.maint + self.fix + self.dep + self.ins + self.add + self.env + self.sub
    }

    fn non_subsidy(&self) -> [f64; 6] {
        [self.maint, self.fix, self.dep, self.ins, self.add, self.env]
    }
}

fn default_mpg() -> f64 {
    25.0
}
fn default_mpge() -> f64 {
    110.0
}
fn default_kappa() -> f64 {
    33.7
}
fn default_r_dis() -> f64 {
    crate::network::KM_PER_MILE
}
fn default_vot() -> f64 {
    0.3
}

/// All cost-model parameters. JSON keys mirror the field names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// $/gallon
    pub p_gas: f64,
    /// $/kWh
    pub p_ele: f64,
    #[serde(default = "default_mpg")]
    pub mpg_gv: f64,
    #[serde(default = "default_mpge")]
    pub mpge_ev: f64,
    /// kWh per gallon-equivalent
    #[serde(default = "default_kappa")]
    pub kappa_gal: f64,
    pub gv_components: GvComponents,
    pub ev_components: EvComponents,
    /// km per mile
    #[serde(default = "default_r_dis")]
    pub r_dis: f64,
    /// value of time, $/min
    #[serde(default = "default_vot")]
    pub vot: f64,
    pub bpr_alpha: f64,
    pub bpr_beta: f64,
    /// Capacity/speed defaults per road class, used when loading networks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub road_classes: Option<HierarchyDefaults>,
}

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../data/costs/", $name, ".json")))),*]
    };
}

const BUNDLED: &[(&str, &str)] = bundled!(
    "san_francisco",
    "portland",
    "las_vegas",
    "new_orleans",
    "dallas",
    "milwaukee",
    "boston",
    "philadelphia",
    "denver",
    "honolulu",
);

impl CostConfig {
    pub fn from_json<R: Read>(reader: R) -> Result<Self> {
        let cfg: CostConfig = serde_json::from_reader(reader)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Names of the bundled city configurations.
    pub fn bundled_names() -> impl Iterator<Item = &'static str> {
        BUNDLED.iter().map(|(n, _)| *n)
    }

    /// One of the bundled city configurations, e.g. `"san_francisco"`.
    pub fn city(name: &str) -> Result<Self> {
        let (_, text) = BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Domain(format!("no bundled cost config named {name}")))?;
        Self::from_json(text.as_bytes())
    }

    pub fn bundled() -> Vec<Self> {
        Self::bundled_names().map(|n| Self::city(n).expect("bundled configs are valid")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut nonneg = vec![("p_gas", self.p_gas), ("p_ele", self.p_ele), ("kappa_gal", self.kappa_gal)];
        nonneg.extend(self.gv_components.all().map(|v| ("gv component", v)));
        nonneg.extend(self.ev_components.non_subsidy().map(|v| ("ev component", v)));
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Domain(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !self.ev_components.sub.is_finite() {
            return Err(Error::Domain("ev subsidy must be finite".into()));
        }
        if !(self.mpg_gv > 0.0) || !(self.mpge_ev > 0.0) {
            return Err(Error::Domain("mpg_gv and mpge_ev must be positive".into()));
        }
        if !(self.r_dis > 0.0) {
            return Err(Error::Domain("r_dis must be positive".into()));
        }
        if !(self.vot > 0.0 && self.vot.is_finite()) {
            return Err(Error::Domain(format!("value of time must be positive, got {}", self.vot)));
        }
        Bpr::new(self.bpr_alpha, self.bpr_beta)?;
        Ok(())
    }

    pub fn bpr(&self) -> Bpr {
        Bpr {
            alpha: self.bpr_alpha,
            beta: self.bpr_beta,
        }
    }
}

/// Per-distance operating cost of each class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassCost {
    /// $/km indexed by [`VehicleClass::index`]
    pub per_km: [f64; 2],
    /// $/mile indexed by [`VehicleClass::index`]
    pub per_mile: [f64; 2],
    /// GV fuel cost, $/mile
    pub gv_fuel_per_mile: f64,
    /// EV electricity cost, $/mile
    pub ev_energy_per_mile: f64,
}

impl ClassCost {
    pub fn per_km(&self, class: VehicleClass) -> f64 {
        self.per_km[class.index()]
    }

    pub fn per_mile(&self, class: VehicleClass) -> f64 {
        self.per_mile[class.index()]
    }

    /// GV-to-EV per-mile cost ratio.
    pub fn ratio(&self) -> f64 {
        self.per_mile[0] / self.per_mile[1]
    }
}

/// Per-km GV and EV operating costs from fuel/electricity prices and the
/// per-mile component tables.
pub fn vehicle_costs(config: &CostConfig) -> Result<ClassCost> {
    if !(config.mpg_gv > 0.0) || !(config.mpge_ev > 0.0) {
        return Err(Error::Domain("mpg_gv and mpge_ev must be positive".into()));
    }
    if !(config.r_dis > 0.0) {
        return Err(Error::Domain("r_dis must be positive".into()));
    }
    let fuel = config.p_gas / config.mpg_gv;
    let energy = config.p_ele * config.kappa_gal / config.mpge_ev;
    let gv = fuel + config.gv_components.sum();
    let ev = energy + config.ev_components.sum();
    Ok(ClassCost {
        per_km: [gv / config.r_dis, ev / config.r_dis],
        per_mile: [gv, ev],
        gv_fuel_per_mile: fuel,
        ev_energy_per_mile: energy,
    })
}

/// BPR link performance `t0 (1 + α (x/c)^β)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bpr {
    pub alpha: f64,
    pub beta: f64,
}

impl Bpr {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("BPR alpha must be positive, got {alpha}")));
        }
        if !(beta >= 1.0 && beta.is_finite()) {
            return Err(Error::Domain(format!("BPR beta must be >= 1, got {beta}")));
        }
        Ok(Self { alpha, beta })
    }

    #[inline]
    pub fn time(&self, t0: f64, capacity: f64, flow: f64) -> f64 {
        t0 * (1.0 + self.alpha * (flow / capacity).powf(self.beta))
    }

    /// d t / d x. At zero flow this is the limit: `α t0 / c` for β = 1, else 0.
    #[inline]
    pub fn derivative(&self, t0: f64, capacity: f64, flow: f64) -> f64 {
        self.alpha * self.beta * t0 / capacity * (flow / capacity).powf(self.beta - 1.0)
    }

    /// `∫₀ˣ t(ω) dω = t0 x + α t0 x^(β+1) / ((β+1) c^β)`.
    #[inline]
    pub fn integral(&self, t0: f64, capacity: f64, flow: f64) -> f64 {
        t0 * flow + self.alpha * t0 * flow * (flow / capacity).powf(self.beta) / (self.beta + 1.0)
    }

    pub fn link_time(&self, link: &Link, flow: f64) -> f64 {
        self.time(link.free_flow_time, link.capacity, flow)
    }
}

fn check_bpr_args(t0: f64, capacity: f64, alpha: f64, beta: f64, flow: f64) -> Result<Bpr> {
    if !(t0 > 0.0) || !(capacity > 0.0) {
        return Err(Error::Contract(format!("t0 ({t0}) and capacity ({capacity}) must be positive")));
    }
    if !(flow >= 0.0 && flow.is_finite()) {
        return Err(Error::Contract(format!("flow must be finite and non-negative, got {flow}")));
    }
    Bpr::new(alpha, beta)
}

pub fn bpr_time(t0: f64, capacity: f64, alpha: f64, beta: f64, flow: f64) -> Result<f64> {
    Ok(check_bpr_args(t0, capacity, alpha, beta, flow)?.time(t0, capacity, flow))
}

pub fn bpr_time_derivative(t0: f64, capacity: f64, alpha: f64, beta: f64, flow: f64) -> Result<f64> {
    Ok(check_bpr_args(t0, capacity, alpha, beta, flow)?.derivative(t0, capacity, flow))
}

pub fn bpr_integral(t0: f64, capacity: f64, alpha: f64, beta: f64, flow: f64) -> Result<f64> {
    Ok(check_bpr_args(t0, capacity, alpha, beta, flow)?.integral(t0, capacity, flow))
}

/// Everything the equilibrium solvers need to price a link for a class:
/// `vot · t_a(x_a) + per_km[m] · length_a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedCost {
    /// value of time, $/min
    pub vot: f64,
    pub bpr: Bpr,
    /// $/km indexed by [`VehicleClass::index`]
    pub per_km: [f64; 2],
}

impl GeneralizedCost {
    pub fn new(vot: f64, bpr: Bpr, per_km: [f64; 2]) -> Result<Self> {
        if !(vot > 0.0 && vot.is_finite()) {
            return Err(Error::Domain(format!("value of time must be positive, got {vot}")));
        }
        if per_km.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::Domain("per-km class costs must be finite and non-negative".into()));
        }
        Bpr::new(bpr.alpha, bpr.beta)?;
        Ok(Self { vot, bpr, per_km })
    }

    pub fn from_config(config: &CostConfig) -> Result<Self> {
        config.validate()?;
        let cc = vehicle_costs(config)?;
        Self::new(config.vot, config.bpr(), cc.per_km)
    }

    /// Pure travel-time pricing (`vot = 1`, no distance cost).
    pub fn time_only(bpr: Bpr) -> Self {
        Self {
            vot: 1.0,
            bpr,
            per_km: [0.0, 0.0],
        }
    }

    /// Distance-based part of the link cost for `class`, independent of flow.
    #[inline]
    pub fn distance_cost(&self, link: &Link, class: VehicleClass) -> f64 {
        self.per_km[class.index()] * link.length
    }

    #[inline]
    pub fn link_cost(&self, link: &Link, flow: f64, class: VehicleClass) -> f64 {
        self.vot * self.bpr.link_time(link, flow) + self.distance_cost(link, class)
    }
}

/// `γ · t_a(x) + C_class · length_a` in dollars.
pub fn generalized_link_cost(
    link: &Link,
    flow: f64,
    class: VehicleClass,
    config: &CostConfig,
    class_cost: &ClassCost,
) -> Result<f64> {
    if !(flow >= 0.0) {
        return Err(Error::Contract(format!("flow must be non-negative, got {flow}")));
    }
    let t = config.bpr().link_time(link, flow);
    Ok(config.vot * t + class_cost.per_km(class) * link.length)
}
