//! Plateau/transition detection and city-type classification on a sampled
//! travel-time curve `T(R_e)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Plateau threshold on `|∂T/∂R_e|`: 0.07 min per 10% penetration, per unit.
pub const DEFAULT_EPSILON: f64 = 0.7;
/// Transitions are steeper than this multiple of ε.
pub const TRANSITION_FACTOR: f64 = 3.0;
/// Total relative change (percent) under which a city is Type III.
pub const TYPE_III_MAX_CHANGE: f64 = 3.0;
/// Transitions of Type I cities start within `[0, EARLY_RANGE_END]`.
pub const EARLY_RANGE_END: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

/// Forward-difference slope of each interval between consecutive levels.
pub fn gradient(levels: &[f64], t: &[f64]) -> Result<Vec<f64>> {
    check_curve(levels, t)?;
    Ok(levels
        .windows(2)
        .zip(t.windows(2))
        .map(|(r, t)| (t[1] - t[0]) / (r[1] - r[0]))
        .collect())
}

fn check_curve(levels: &[f64], t: &[f64]) -> Result<()> {
    if levels.len() != t.len() {
        return Err(Error::Contract(format!("{} levels but {} values", levels.len(), t.len())));
    }
    if levels.len() < 2 {
        return Err(Error::Domain("a curve needs at least two levels".into()));
    }
    if levels.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("levels must be strictly increasing".into()));
    }
    Ok(())
}

/// Maximal runs of consecutive intervals whose slope satisfies `keep`.
fn runs(levels: &[f64], gradient: &[f64], keep: impl Fn(f64) -> bool) -> Vec<Interval> {
    let mut out: Vec<Interval> = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &g) in gradient.iter().enumerate() {
        match (keep(g), open) {
            (true, None) => open = Some(i),
            (false, Some(s)) => {
                out.push(Interval {
                    start: levels[s],
                    end: levels[i],
                });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        out.push(Interval {
            start: levels[s],
            end: levels[gradient.len()],
        });
    }
    out
}

/// Intervals where `|∂T/∂R_e| < epsilon`.
pub fn detect_plateaus(levels: &[f64], gradient: &[f64], epsilon: f64) -> Vec<Interval> {
    runs(levels, gradient, |g| g.abs() < epsilon)
}

/// Intervals where `|∂T/∂R_e| > 3 epsilon`.
pub fn detect_transitions(levels: &[f64], gradient: &[f64], epsilon: f64) -> Vec<Interval> {
    runs(levels, gradient, |g| g.abs() > TRANSITION_FACTOR * epsilon)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CityType {
    /// Pronounced early transition followed by a plateau.
    I,
    /// Steady or late improvement.
    II,
    /// Little overall change.
    III,
}

/// Classification plus the facts it was based on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CityClassification {
    pub city_type: CityType,
    /// `100 (T_last − T_first) / T_first`
    pub total_relative_change: f64,
    /// First transition that starts inside the early range, if any.
    pub early_transition: Option<Interval>,
    /// First plateau starting at or after that transition's end.
    pub following_plateau: Option<Interval>,
    pub rationale: String,
}

/// Classifies a sampled curve `T(R_e)` spanning `[0, 1]` with at least five levels.
pub fn classify_curve(levels: &[f64], t: &[f64], epsilon: f64) -> Result<CityClassification> {
    let g = gradient(levels, t)?;
    if levels.len() < 5 {
        return Err(Error::Domain("classification needs at least five levels".into()));
    }
    if levels[0] != 0.0 || levels[levels.len() - 1] != 1.0 {
        return Err(Error::Domain("classification needs levels spanning [0, 1]".into()));
    }
    if t[0] <= 0.0 {
        return Err(Error::Undefined("relative change against a non-positive baseline".into()));
    }
    let change = 100.0 * (t[t.len() - 1] - t[0]) / t[0];
    let transitions = detect_transitions(levels, &g, epsilon);
    let plateaus = detect_plateaus(levels, &g, epsilon);
    let early = transitions.iter().find(|iv| iv.start <= EARLY_RANGE_END).copied();
    let following = early.and_then(|e| plateaus.iter().find(|p| p.start >= e.end).copied());

    let (city_type, rationale) = if change.abs() < TYPE_III_MAX_CHANGE {
        (
            CityType::III,
            format!("total change {change:.2}% is below {TYPE_III_MAX_CHANGE}% in magnitude"),
        )
    } else if let (Some(e), Some(p)) = (early, following) {
        (
            CityType::I,
            format!(
                "transition [{:.3}, {:.3}] starts within [0, {EARLY_RANGE_END}] and plateau [{:.3}, {:.3}] follows",
                e.start, e.end, p.start, p.end
            ),
        )
    } else {
        let why = match early {
            None => format!("no transition starts within [0, {EARLY_RANGE_END}]"),
            Some(_) => "no plateau follows the early transition".to_string(),
        };
        (CityType::II, format!("total change {change:.2}%; {why}"))
    };
    Ok(CityClassification {
        city_type,
        total_relative_change: change,
        early_transition: early,
        following_plateau: following,
        rationale,
    })
}
