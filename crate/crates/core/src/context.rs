//! Scenario description and the context-driven parameters derived from it:
//! importance factors, weightages, detection frequencies, image resolution,
//! network size and the resource pool.

use std::fmt;
use std::str::FromStr;

use crate::constants::ModelConstants;
use crate::error::{Error, Result};
use crate::factor_models::{compute_network_size, compute_resolution};

/// Number of perception subsystems.
pub const SUBSYSTEMS: usize = 4;

/// Directional perception subsystem. Also names the region an activity of
/// interest sits in. Order matches every `[f64; 4]` in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subsystem {
    Front,
    Left,
    Right,
    Rear,
}

impl Subsystem {
    pub const ALL: [Subsystem; SUBSYSTEMS] =
        [Subsystem::Front, Subsystem::Left, Subsystem::Right, Subsystem::Rear];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Subsystem::Front => "front",
            Subsystem::Left => "left",
            Subsystem::Right => "right",
            Subsystem::Rear => "rear",
        }
    }
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subsystem {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Subsystem::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown region {s:?} (expected front, left, right or rear)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Reverse => "reverse",
        }
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "forward" => Ok(Direction::Forward),
            "reverse" => Ok(Direction::Reverse),
            _ => Err(format!("unknown direction {s:?} (expected forward or reverse)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Maneuver {
    None,
    LeftTurn,
    RightTurn,
    LeftLaneChange,
    RightLaneChange,
}

impl Maneuver {
    const ALL: [Maneuver; 5] = [
        Maneuver::None,
        Maneuver::LeftTurn,
        Maneuver::RightTurn,
        Maneuver::LeftLaneChange,
        Maneuver::RightLaneChange,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Maneuver::None => "none",
            Maneuver::LeftTurn => "left_turn",
            Maneuver::RightTurn => "right_turn",
            Maneuver::LeftLaneChange => "left_lane_change",
            Maneuver::RightLaneChange => "right_lane_change",
        }
    }

    /// The side a turn or lane change heads toward.
    pub fn side(self) -> Option<Subsystem> {
        match self {
            Maneuver::None => None,
            Maneuver::LeftTurn | Maneuver::LeftLaneChange => Some(Subsystem::Left),
            Maneuver::RightTurn | Maneuver::RightLaneChange => Some(Subsystem::Right),
        }
    }
}

impl FromStr for Maneuver {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Maneuver::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown maneuver {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activity {
    pub region: Subsystem,
    pub distance_m: f64,
}

/// A static traffic snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: i64,
    pub speed_mph: f64,
    pub direction: Direction,
    pub maneuver: Maneuver,
    pub activities: Vec<Activity>,
    /// How long the vehicle spends in this scenario, for energy totals.
    pub duration_s: Option<f64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let err = |field: &str, message: String| Error::Scenario {
            id: self.id,
            field: field.to_string(),
            message,
        };
        if !(self.speed_mph.is_finite() && self.speed_mph >= 0.0) {
            return Err(err("speed_mph", format!("must be a nonnegative number, got {}", self.speed_mph)));
        }
        if let Some(d) = self.duration_s {
            if !(d.is_finite() && d >= 0.0) {
                return Err(err("duration_s", format!("must be nonnegative, got {d}")));
            }
        }
        let mut seen = [false; SUBSYSTEMS];
        for a in &self.activities {
            if !(a.distance_m.is_finite() && a.distance_m >= 0.0) {
                return Err(err(
                    "distance_m",
                    format!("{} activity distance must be nonnegative, got {}", a.region, a.distance_m),
                ));
            }
            if std::mem::replace(&mut seen[a.region.index()], true) {
                return Err(err("activities", format!("more than one {} activity", a.region)));
            }
        }
        Ok(())
    }

    pub fn activity_distance(&self, region: Subsystem) -> Option<f64> {
        self.activities
            .iter()
            .find(|a| a.region == region)
            .map(|a| a.distance_m)
    }
}

/// Piecewise-linear map from activity distance (m) to importance. Constant
/// beyond the first and last breakpoints, never below `floor`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceCurve {
    breakpoints: Vec<(f64, f64)>,
    floor: f64,
}

impl ImportanceCurve {
    pub fn new(breakpoints: Vec<(f64, f64)>, floor: f64) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::Invariant("importance curve needs at least one breakpoint".into()));
        }
        for &(d, alpha) in &breakpoints {
            if !d.is_finite() || !(0.0..=1.0).contains(&alpha) {
                return Err(Error::Invariant(format!(
                    "importance breakpoint ({d}, {alpha}) out of range"
                )));
            }
        }
        if breakpoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Invariant(
                "importance breakpoints need strictly increasing distances".into(),
            ));
        }
        Ok(ImportanceCurve { breakpoints, floor })
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Default front curve: full importance out to 20 m, falling to the floor
    /// at 92 m.
    pub fn default_front(alpha_min: f64) -> Self {
        Self::new(vec![(0.0, 1.0), (20.0, 1.0), (92.0, 0.1)], alpha_min).expect("valid curve")
    }

    /// Default curve for the left and right lanes.
    pub fn default_lateral(alpha_min: f64) -> Self {
        Self::new(
            vec![(0.0, 1.0), (10.0, 1.0), (20.0, 0.83), (42.0, 0.714), (100.0, 0.1)],
            alpha_min,
        )
        .expect("valid curve")
    }

    /// Evaluates the curve at `distance`; see [`importance_from_distance`].
    pub fn eval(&self, distance: f64) -> f64 {
        let pts = &self.breakpoints;
        let first = pts[0];
        let last = pts[pts.len() - 1];
        let raw = if distance <= first.0 {
            first.1
        } else if distance >= last.0 {
            last.1
        } else {
            let i = pts.partition_point(|p| p.0 <= distance);
            let (d0, a0) = pts[i - 1];
            let (d1, a1) = pts[i];
            a0 + (a1 - a0) * (distance - d0) / (d1 - d0)
        };
        raw.clamp(self.floor, 1.0)
    }

    /// Parses `(d,alpha),(d,alpha),...`.
    pub fn parse_breakpoints(text: &str) -> std::result::Result<Vec<(f64, f64)>, String> {
        let mut points = Vec::new();
        let mut rest = text.trim();
        while !rest.is_empty() {
            let inner_start = rest
                .strip_prefix('(')
                .ok_or_else(|| format!("expected '(' at {rest:?}"))?;
            let close = inner_start
                .find(')')
                .ok_or_else(|| "unterminated breakpoint".to_string())?;
            let (d, a) = inner_start[..close]
                .split_once(',')
                .ok_or_else(|| "breakpoint needs two values".to_string())?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("invalid number {:?}: {e}", s.trim()))
            };
            points.push((parse(d)?, parse(a)?));
            rest = inner_start[close + 1..].trim_start();
            if let Some(r) = rest.strip_prefix(',') {
                rest = r.trim_start();
                if rest.is_empty() {
                    return Err("trailing comma".into());
                }
            } else if !rest.is_empty() {
                return Err(format!("expected ',' before {rest:?}"));
            }
        }
        if points.is_empty() {
            return Err("empty breakpoint list".into());
        }
        Ok(points)
    }

    pub fn breakpoints_text(&self) -> String {
        self.breakpoints
            .iter()
            .map(|(d, a)| format!("({d},{a})"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Distance-to-importance curves per region. The rear subsystem has no curve:
/// its importance comes from the travel direction alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceCurves {
    pub front: ImportanceCurve,
    pub left: ImportanceCurve,
    pub right: ImportanceCurve,
}

impl ImportanceCurves {
    pub fn defaults(k: &ModelConstants) -> Self {
        ImportanceCurves {
            front: ImportanceCurve::default_front(k.alpha_min),
            left: ImportanceCurve::default_lateral(k.alpha_min),
            right: ImportanceCurve::default_lateral(k.alpha_min),
        }
    }

    pub fn for_region(&self, region: Subsystem) -> Option<&ImportanceCurve> {
        match region {
            Subsystem::Front => Some(&self.front),
            Subsystem::Left => Some(&self.left),
            Subsystem::Right => Some(&self.right),
            Subsystem::Rear => None,
        }
    }
}

pub fn importance_from_distance(distance: f64, curve: &ImportanceCurve) -> f64 {
    curve.eval(distance)
}

/// Importance factors in subsystem order.
///
/// Reverse travel pins rear at 1 and front at the floor; forward travel
/// leaves rear at the floor and reads front from its activity distance. A turn
/// or lane change sets that side to 1.
pub fn assign_importance(s: &Scenario, curves: &ImportanceCurves, k: &ModelConstants) -> [f64; SUBSYSTEMS] {
    let from_activity = |region: Subsystem| -> f64 {
        match (s.activity_distance(region), curves.for_region(region)) {
            (Some(d), Some(curve)) => importance_from_distance(d, curve),
            _ => k.alpha_min,
        }
    };

    let mut alphas = [k.alpha_min; SUBSYSTEMS];
    match s.direction {
        Direction::Reverse => {
            alphas[Subsystem::Front.index()] = k.alpha_min;
            alphas[Subsystem::Rear.index()] = 1.0;
        }
        Direction::Forward => {
            alphas[Subsystem::Front.index()] = from_activity(Subsystem::Front);
            alphas[Subsystem::Rear.index()] = k.alpha_min;
        }
    }
    for side in [Subsystem::Left, Subsystem::Right] {
        alphas[side.index()] = if s.maneuver.side() == Some(side) {
            1.0
        } else {
            from_activity(side)
        };
    }
    alphas.map(|a| a.max(k.alpha_min))
}

/// Weightages `alpha_i / sum(alpha)`.
pub fn weights(alphas: &[f64; SUBSYSTEMS]) -> [f64; SUBSYSTEMS] {
    let total: f64 = alphas.iter().sum();
    alphas.map(|a| a / total)
}

/// Detection frequency (Hz). The speed ratio saturates at 1.
pub fn detection_frequency(alpha: f64, speed_mph: f64, k: &ModelConstants) -> f64 {
    let importance = (alpha - k.alpha_min) / (1.0 - k.alpha_min);
    let speed = (speed_mph / k.v_fmax).min(1.0);
    (k.f_max - k.f_min) * importance * speed + k.f_min
}

/// Total normalized pool, capped at the full capacity of 1.
pub fn max_resources(alphas: &[f64; SUBSYSTEMS], k: &ModelConstants) -> f64 {
    (k.c0 + k.c1 * alphas.iter().sum::<f64>()).min(1.0)
}

/// Everything the cost function needs about one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsystemContext {
    pub alpha: [f64; SUBSYSTEMS],
    pub weight: [f64; SUBSYSTEMS],
    pub frequency: [f64; SUBSYSTEMS],
    pub resolution: [f64; SUBSYSTEMS],
    pub network_size: [f64; SUBSYSTEMS],
    /// Resource pool to distribute.
    pub pool: f64,
}

pub fn build_context(s: &Scenario, curves: &ImportanceCurves, k: &ModelConstants) -> Result<SubsystemContext> {
    s.validate()?;
    let alpha = assign_importance(s, curves, k);
    let weight = weights(&alpha);
    Ok(SubsystemContext {
        alpha,
        weight,
        frequency: alpha.map(|a| detection_frequency(a, s.speed_mph, k)),
        resolution: alpha.map(|a| compute_resolution(a, k)),
        network_size: weight.map(|w| compute_network_size(w, k)),
        pool: max_resources(&alpha, k),
    })
}
