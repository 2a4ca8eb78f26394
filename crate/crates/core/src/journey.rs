//! Scenario files, batch comparison of adaptive allocation against the
//! constant baseline, and CSV / fixed-width report rendering.
//!
//! A scenario file is TOML with one `[[scenario]]` table per snapshot:
//!
//! ```toml
//! [[scenario]]
//! id = 1
//! speed_mph = 5.0
//! direction = "reverse"          # forward | reverse
//! maneuver = "left_turn"         # none | left_turn | right_turn | left_lane_change | right_lane_change
//! activities = [{ region = "left", distance_m = 5.0 }]
//! duration_s = 20.0              # optional
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::allocator::{allocate, AllocationResult};
use crate::constants::ModelConstants;
use crate::context::{Activity, Direction, ImportanceCurves, Maneuver, Scenario, Subsystem, SUBSYSTEMS};
use crate::error::{Error, Result};
use crate::safety::{ccra_baseline, ccra_safety_floor, ccra_with_ideal, CcraBaseline};

/// The built-in fourteen-scenario journey.
pub const SHIPPED_JOURNEY: &str = include_str!("../data/table3.toml");

#[derive(Debug, Clone, PartialEq)]
pub struct Journey {
    pub scenarios: Vec<Scenario>,
}

impl Journey {
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::Journey("empty journey".into()));
        }
        let mut ids = HashSet::new();
        for s in &scenarios {
            s.validate()?;
            if !ids.insert(s.id) {
                return Err(Error::Scenario {
                    id: s.id,
                    field: "id".into(),
                    message: "duplicate scenario id".into(),
                });
            }
        }
        Ok(Journey { scenarios })
    }

    pub fn shipped() -> Self {
        parse_journey(SHIPPED_JOURNEY).expect("shipped journey parses")
    }

    pub fn get(&self, id: i64) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.id == id)
    }

    pub fn ids(&self) -> Vec<i64> {
        self.scenarios.iter().map(|s| s.id).collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JourneyFile {
    #[serde(default)]
    scenario: Vec<ScenarioEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioEntry {
    id: i64,
    speed_mph: f64,
    direction: String,
    #[serde(default = "default_maneuver")]
    maneuver: String,
    #[serde(default)]
    activities: Vec<ActivityEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    duration_s: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActivityEntry {
    region: String,
    distance_m: f64,
}

fn default_maneuver() -> String {
    Maneuver::None.name().to_string()
}

impl ScenarioEntry {
    fn into_scenario(self) -> Result<Scenario> {
        let id = self.id;
        let field_err = |field: &str, message: String| Error::Scenario {
            id,
            field: field.to_string(),
            message,
        };
        let direction: Direction = self.direction.parse().map_err(|m| field_err("direction", m))?;
        let maneuver: Maneuver = self.maneuver.parse().map_err(|m| field_err("maneuver", m))?;
        let activities = self
            .activities
            .into_iter()
            .map(|a| {
                let region: Subsystem = a.region.parse().map_err(|m| field_err("region", m))?;
                Ok(Activity {
                    region,
                    distance_m: a.distance_m,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Scenario {
            id,
            speed_mph: self.speed_mph,
            direction,
            maneuver,
            activities,
            duration_s: self.duration_s,
        })
    }

    fn from_scenario(s: &Scenario) -> Self {
        ScenarioEntry {
            id: s.id,
            speed_mph: s.speed_mph,
            direction: s.direction.name().to_string(),
            maneuver: s.maneuver.name().to_string(),
            activities: s
                .activities
                .iter()
                .map(|a| ActivityEntry {
                    region: a.region.name().to_string(),
                    distance_m: a.distance_m,
                })
                .collect(),
            duration_s: s.duration_s,
        }
    }
}

pub fn parse_journey(source: &str) -> Result<Journey> {
    let file: JourneyFile =
        toml::from_str(source).map_err(|e| Error::Journey(format!("scenario file: {e}")))?;
    let scenarios = file
        .scenario
        .into_iter()
        .map(ScenarioEntry::into_scenario)
        .collect::<Result<Vec<_>>>()?;
    Journey::new(scenarios)
}

pub fn serialize_journey(j: &Journey) -> String {
    let file = JourneyFile {
        scenario: j.scenarios.iter().map(ScenarioEntry::from_scenario).collect(),
    };
    toml::to_string(&file).expect("journey serializes")
}

/// ACRA minus CCRA for the headline metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deltas {
    pub energy: f64,
    pub max_time: f64,
    pub total_precision: f64,
    pub safety: f64,
}

impl Deltas {
    pub fn between(acra: &AllocationResult, ccra: &CcraBaseline) -> Self {
        Deltas {
            energy: acra.total_energy - ccra.total_energy,
            max_time: acra.max_time - ccra.max_time,
            total_precision: acra.total_precision - ccra.total_precision,
            safety: acra.safety - ccra.safety,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub acra: AllocationResult,
    pub ccra: CcraBaseline,
    pub deltas: Deltas,
}

impl Comparison {
    pub fn energy_lower(&self) -> bool {
        self.acra.total_energy < self.ccra.total_energy
    }

    pub fn safety_higher(&self) -> bool {
        self.acra.safety > self.ccra.safety
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRow {
    pub id: i64,
    pub duration_s: Option<f64>,
    /// `Err` holds the diagnostic of a scenario that could not be evaluated.
    pub outcome: std::result::Result<Comparison, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ScenarioRow>,
    /// Scenario-independent baseline row.
    pub ccra: CcraBaseline,
    pub safety_floor: f64,
}

impl ComparisonReport {
    pub fn comparisons(&self) -> impl Iterator<Item = &Comparison> {
        self.rows.iter().filter_map(|r| r.outcome.as_ref().ok())
    }

    pub fn evaluated(&self) -> usize {
        self.comparisons().count()
    }

    pub fn failed(&self) -> usize {
        self.rows.len() - self.evaluated()
    }

    pub fn total_acra_energy(&self) -> f64 {
        self.comparisons().map(|c| c.acra.total_energy).sum()
    }

    pub fn total_ccra_energy(&self) -> f64 {
        self.comparisons().map(|c| c.ccra.total_energy).sum()
    }

    pub fn energy_claims(&self) -> usize {
        self.comparisons().filter(|c| c.energy_lower()).count()
    }

    pub fn safety_claims(&self) -> usize {
        self.comparisons().filter(|c| c.safety_higher()).count()
    }

    /// Energy over the journey, `(acra, ccra)`, when every evaluated scenario
    /// carries a duration.
    pub fn journey_energy(&self) -> Option<(f64, f64)> {
        let mut acra = 0.0;
        let mut ccra = 0.0;
        for row in &self.rows {
            if let Ok(c) = &row.outcome {
                let d = row.duration_s?;
                acra += c.acra.total_energy * d;
                ccra += c.ccra.total_energy * d;
            }
        }
        Some((acra, ccra))
    }
}

/// Allocates every scenario and compares it with the constant baseline.
/// A scenario that fails is recorded in its row and the rest still run.
pub fn run_journey(j: &Journey, curves: &ImportanceCurves, k: &ModelConstants) -> ComparisonReport {
    let safety_floor = ccra_safety_floor(k);
    let rows = j
        .scenarios
        .iter()
        .map(|s| {
            let outcome = allocate(s, curves, k, safety_floor)
                .and_then(|acra| {
                    let ccra = ccra_baseline(s, curves, k)?;
                    let deltas = Deltas::between(&acra, &ccra);
                    Ok(Comparison { acra, ccra, deltas })
                })
                .map_err(|e| format!("scenario {}: {e}", s.id));
            ScenarioRow {
                id: s.id,
                duration_s: s.duration_s,
                outcome,
            }
        })
        .collect();
    ComparisonReport {
        rows,
        ccra: ccra_with_ideal(&[k.f_min; SUBSYSTEMS], k),
        safety_floor,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Table,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "table" => Ok(ReportFormat::Table),
            _ => Err(format!("unknown format {s:?} (expected csv or table)")),
        }
    }
}

pub const CSV_HEADER: [&str; 20] = [
    "id", "C1", "C2", "C3", "C4", "total_C", "total_time", "max_time", "P1", "P2", "P3", "P4",
    "total_P", "F1", "F2", "F3", "F4", "total_energy", "SF", "flags",
];

/// Shown under every table: the per-subsystem columns are model outputs.
pub const PER_SUBSYSTEM_NOTE: &str = "note: per-subsystem C and P values come from the cost model as written; \
they are not expected to match published per-subsystem columns, and only pool totals, \
frequencies, the baseline row and the energy/safety comparisons are checked.";

/// Rounds to six significant digits and prints the shortest form.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn row_flags(acra: &AllocationResult) -> String {
    let mut flags = Vec::new();
    if !acra.constraints_satisfied {
        flags.push("constraints_violated");
    }
    if !acra.safety_floor_met {
        flags.push("below_safety_floor");
    }
    if !acra.converged {
        flags.push("not_converged");
    }
    if flags.is_empty() {
        "ok".to_string()
    } else {
        flags.join(";")
    }
}

struct Record {
    id: String,
    shares: [f64; SUBSYSTEMS],
    total_share: f64,
    total_time: f64,
    max_time: f64,
    precision: [f64; SUBSYSTEMS],
    total_precision: f64,
    frequency: [f64; SUBSYSTEMS],
    total_energy: f64,
    safety: f64,
    flags: String,
}

impl Record {
    fn acra(id: i64, a: &AllocationResult) -> Self {
        Record {
            id: id.to_string(),
            shares: a.shares,
            total_share: a.total_share,
            total_time: a.total_time,
            max_time: a.max_time,
            precision: a.precision,
            total_precision: a.total_precision,
            frequency: a.frequency(),
            total_energy: a.total_energy,
            safety: a.safety,
            flags: row_flags(a),
        }
    }

    fn ccra(b: &CcraBaseline) -> Self {
        Record {
            id: "CCRA".into(),
            shares: b.share,
            total_share: b.total_share,
            total_time: b.total_time,
            max_time: b.max_time,
            precision: b.precision,
            total_precision: b.total_precision,
            frequency: b.frequency,
            total_energy: b.total_energy,
            safety: b.safety,
            flags: "baseline".into(),
        }
    }

    fn values(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(18);
        v.extend(self.shares);
        v.extend([self.total_share, self.total_time, self.max_time]);
        v.extend(self.precision);
        v.push(self.total_precision);
        v.extend(self.frequency);
        v.extend([self.total_energy, self.safety]);
        v
    }
}

fn records(r: &ComparisonReport) -> Vec<std::result::Result<Record, (i64, &str)>> {
    let mut out: Vec<_> = r
        .rows
        .iter()
        .map(|row| match &row.outcome {
            Ok(c) => Ok(Record::acra(row.id, &c.acra)),
            Err(msg) => Err((row.id, msg.as_str())),
        })
        .collect();
    if !r.rows.is_empty() {
        out.push(Ok(Record::ccra(&r.ccra)));
    }
    out
}

/// Renders the report. CSV: header, one row per scenario, then the baseline
/// row. Table: the same numbers at display precision plus a summary.
pub fn emit_report(r: &ComparisonReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => emit_csv(r),
        ReportFormat::Table => emit_table(r),
    }
}

fn emit_csv(r: &ComparisonReport) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for rec in records(r) {
        let fields: Vec<String> = match rec {
            Ok(rec) => std::iter::once(rec.id.clone())
                .chain(rec.values().into_iter().map(sig6))
                .chain(std::iter::once(rec.flags))
                .collect(),
            Err((id, msg)) => std::iter::once(id.to_string())
                .chain(std::iter::repeat_n(String::new(), CSV_HEADER.len() - 2))
                .chain(std::iter::once(format!("failed: {msg}")))
                .collect(),
        };
        w.write_record(&fields).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn emit_table(r: &ComparisonReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>5} {:>6} {:>6} {:>6} {:>6} {:>6} {:>7} {:>7} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>7} {:>6}  flags",
        "id", "C1", "C2", "C3", "C4", "total", "t_sum", "t_max", "P1", "P2", "P3", "P4", "P_sum",
        "F1", "F2", "F3", "F4", "energy", "SF"
    );
    for rec in records(r) {
        match rec {
            Ok(rec) => {
                let v = rec.values();
                let _ = write!(out, "{:>5}", rec.id);
                for (i, x) in v.iter().enumerate() {
                    match i {
                        5 | 6 | 16 => {
                            let _ = write!(out, " {x:>7.3}");
                        }
                        12..=15 => {
                            let _ = write!(out, " {x:>6.2}");
                        }
                        _ => {
                            let _ = write!(out, " {x:>6.3}");
                        }
                    }
                }
                let _ = writeln!(out, "  {}", rec.flags);
            }
            Err((id, msg)) => {
                let _ = writeln!(out, "{id:>5} failed: {msg}");
            }
        }
    }
    let n = r.evaluated();
    let _ = writeln!(out);
    let _ = writeln!(out, "scenarios evaluated: {n} (failed: {})", r.failed());
    let _ = writeln!(
        out,
        "energy per second, summed: ACRA {:.3} vs CCRA {:.3}",
        r.total_acra_energy(),
        r.total_ccra_energy()
    );
    if let Some((a, c)) = r.journey_energy() {
        let _ = writeln!(out, "energy over journey: ACRA {a:.3} vs CCRA {c:.3}");
    }
    let _ = writeln!(out, "ACRA energy below CCRA: {}/{n}", r.energy_claims());
    let _ = writeln!(
        out,
        "ACRA safety above CCRA ({:.5}): {}/{n}",
        r.safety_floor,
        r.safety_claims()
    );
    let _ = writeln!(out, "{PER_SUBSYSTEM_NOTE}");
    out
}

/// Side-by-side deltas per scenario, for the `compare` command.
pub fn emit_comparison(r: &ComparisonReport, format: ReportFormat) -> String {
    const HEADER: [&str; 13] = [
        "id",
        "acra_energy",
        "ccra_energy",
        "delta_energy",
        "acra_max_time",
        "ccra_max_time",
        "acra_total_P",
        "ccra_total_P",
        "acra_SF",
        "ccra_SF",
        "delta_SF",
        "energy_lower",
        "safety_higher",
    ];
    match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            w.write_record(HEADER).expect("in-memory write");
            for row in &r.rows {
                let fields: Vec<String> = match &row.outcome {
                    Ok(c) => {
                        let mut f = vec![row.id.to_string()];
                        f.extend(
                            [
                                c.acra.total_energy,
                                c.ccra.total_energy,
                                c.deltas.energy,
                                c.acra.max_time,
                                c.ccra.max_time,
                                c.acra.total_precision,
                                c.ccra.total_precision,
                                c.acra.safety,
                                c.ccra.safety,
                                c.deltas.safety,
                            ]
                            .map(sig6),
                        );
                        f.push(c.energy_lower().to_string());
                        f.push(c.safety_higher().to_string());
                        f
                    }
                    Err(msg) => {
                        let mut f = vec![row.id.to_string()];
                        f.extend(std::iter::repeat_n(String::new(), HEADER.len() - 2));
                        f.push(format!("failed: {msg}"));
                        f
                    }
                };
                w.write_record(&fields).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
        }
        ReportFormat::Table => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "{:>5} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}  claims",
                "id", "E_acra", "E_ccra", "dE", "SF_acra", "SF_ccra", "dSF", "tmax"
            );
            for row in &r.rows {
                match &row.outcome {
                    Ok(c) => {
                        let _ = writeln!(
                            out,
                            "{:>5} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}  energy:{} safety:{}",
                            row.id,
                            c.acra.total_energy,
                            c.ccra.total_energy,
                            c.deltas.energy,
                            c.acra.safety,
                            c.ccra.safety,
                            c.deltas.safety,
                            c.acra.max_time,
                            if c.energy_lower() { "lower" } else { "NOT lower" },
                            if c.safety_higher() { "higher" } else { "NOT higher" },
                        );
                    }
                    Err(msg) => {
                        let _ = writeln!(out, "{:>5} failed: {msg}", row.id);
                    }
                }
            }
            let n = r.evaluated();
            let _ = writeln!(out, "energy lower: {}/{n}, safety higher: {}/{n}", r.energy_claims(), r.safety_claims());
            out
        }
    }
}
