//! Model constants and the `key = value` configuration format that overrides
//! them.

use std::fmt::{self, Write as _};

use crate::context::{ImportanceCurve, ImportanceCurves};
use crate::error::{Error, Result};

/// Tolerance on the `a + b + c = 1` and `W_p + W_t + W_f = 1` invariants.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Every scalar the models need. Immutable once loaded; all downstream code
/// takes it by reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConstants {
    /// Time-model intercept (s).
    pub t0: f64,
    /// Time-model slope (s per megapixel).
    pub t1: f64,
    pub p0: f64,
    /// Precision slope (per megapixel).
    pub p1: f64,
    pub e0: f64,
    /// Energy slope (s).
    pub e1: f64,
    /// Detection frequency bounds (Hz).
    pub f_min: f64,
    pub f_max: f64,
    /// Speed (mph) above which the maximum detection frequency is warranted.
    pub v_fmax: f64,
    /// Resolution bounds (megapixels).
    pub r_min: f64,
    pub r_max: f64,
    /// Normalized network-size bounds.
    pub s_min: f64,
    pub s_max: f64,
    /// Resource pool is `c0 + c1 * sum(alpha)`.
    pub c0: f64,
    pub c1: f64,
    /// Per-subsystem resource floor.
    pub c_min: f64,
    /// Lowest importance any subsystem can have.
    pub alpha_min: f64,
    /// Normalization of the time term in the safety penalty.
    pub t_n: f64,
    /// Cost weightages for time, precision and energy.
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Safety-penalty weightages for precision, time and frequency.
    pub w_p: f64,
    pub w_t: f64,
    pub w_f: f64,
}

/// Configuration keys, in serialization order.
pub const KEYS: [&str; 24] = [
    "t0", "t1", "p0", "p1", "e0", "e1", "F_min", "F_max", "v_fmax", "R_min", "R_max", "S_min",
    "S_max", "C_0", "C_1", "C_min", "alpha_min", "T_n", "a", "b", "c", "W_p", "W_t", "W_f",
];

pub fn default_constants() -> ModelConstants {
    ModelConstants {
        t0: 0.005,
        t1: 0.002,
        p0: 0.005,
        p1: 0.3618,
        e0: 0.005,
        e1: 0.049,
        f_min: 5.0,
        f_max: 20.0,
        v_fmax: 40.0,
        r_min: 3.0,
        r_max: 5.0,
        s_min: 0.15,
        s_max: 1.0,
        c0: 0.0,
        c1: 0.3226,
        c_min: 0.1,
        alpha_min: 0.1,
        t_n: 2.5,
        a: 0.5,
        b: 0.25,
        c: 0.25,
        w_p: 0.4,
        w_t: 0.4,
        w_f: 0.2,
    }
}

impl Default for ModelConstants {
    fn default() -> Self {
        default_constants()
    }
}

impl ModelConstants {
    pub fn get(&self, key: &str) -> Option<f64> {
        let mut copy = *self;
        copy.field_mut(key).map(|v| *v)
    }

    fn field_mut(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "t0" => &mut self.t0,
            "t1" => &mut self.t1,
            "p0" => &mut self.p0,
            "p1" => &mut self.p1,
            "e0" => &mut self.e0,
            "e1" => &mut self.e1,
            "F_min" => &mut self.f_min,
            "F_max" => &mut self.f_max,
            "v_fmax" => &mut self.v_fmax,
            "R_min" => &mut self.r_min,
            "R_max" => &mut self.r_max,
            "S_min" => &mut self.s_min,
            "S_max" => &mut self.s_max,
            "C_0" => &mut self.c0,
            "C_1" => &mut self.c1,
            "C_min" => &mut self.c_min,
            "alpha_min" => &mut self.alpha_min,
            "T_n" => &mut self.t_n,
            "a" => &mut self.a,
            "b" => &mut self.b,
            "c" => &mut self.c,
            "W_p" => &mut self.w_p,
            "W_t" => &mut self.w_t,
            "W_f" => &mut self.w_f,
            _ => return None,
        })
    }

    /// Checks every internal-consistency invariant, naming the first one
    /// that fails.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Invariant(msg));

        for key in KEYS {
            let v = self.get(key).unwrap_or(f64::NAN);
            if !v.is_finite() {
                return fail(format!("{key} must be finite, got {v}"));
            }
        }
        for (key, v) in [
            ("t0", self.t0),
            ("t1", self.t1),
            ("p0", self.p0),
            ("p1", self.p1),
            ("e0", self.e0),
            ("e1", self.e1),
            ("C_0", self.c0),
            ("T_n", self.t_n),
        ] {
            if v < 0.0 {
                return fail(format!("{key} must be nonnegative, got {v}"));
            }
        }
        for (key, v) in [
            ("F_min", self.f_min),
            ("v_fmax", self.v_fmax),
            ("R_min", self.r_min),
            ("S_min", self.s_min),
            ("C_1", self.c1),
        ] {
            if v <= 0.0 {
                return fail(format!("{key} must be strictly positive, got {v}"));
            }
        }
        if self.f_min >= self.f_max {
            return fail(format!("F_min < F_max required ({} >= {})", self.f_min, self.f_max));
        }
        if self.r_min >= self.r_max {
            return fail(format!("R_min < R_max required ({} >= {})", self.r_min, self.r_max));
        }
        if self.s_min >= self.s_max {
            return fail(format!("S_min < S_max required ({} >= {})", self.s_min, self.s_max));
        }
        if self.s_max > 1.0 {
            return fail(format!("S_max must lie in (0, 1], got {}", self.s_max));
        }
        if !(self.alpha_min > 0.0 && self.alpha_min < 1.0) {
            return fail(format!("0 < alpha_min < 1 required, got {}", self.alpha_min));
        }
        if !(self.c_min > 0.0 && self.c_min < 1.0) {
            return fail(format!("0 < C_min < 1 required, got {}", self.c_min));
        }
        for (key, v) in [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("W_p", self.w_p),
            ("W_t", self.w_t),
            ("W_f", self.w_f),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("weightage {key} must lie in [0, 1], got {v}"));
            }
        }
        let cost_sum = self.a + self.b + self.c;
        if (cost_sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return fail(format!("weightage sum a + b + c = 1 required, got {cost_sum}"));
        }
        let penalty_sum = self.w_p + self.w_t + self.w_f;
        if (penalty_sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return fail(format!(
                "weightage sum W_p + W_t + W_f = 1 required, got {penalty_sum}"
            ));
        }
        Ok(())
    }
}

impl fmt::Display for ModelConstants {
    /// Writes the configuration form; `{}` on `f64` is shortest-round-trip,
    /// so reloading the output reproduces every value exactly.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for key in KEYS {
            writeln!(f, "{key} = {}", self.get(key).expect("known key"))?;
        }
        Ok(())
    }
}

/// Constants plus the importance curves, i.e. everything a configuration
/// file can carry.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub constants: ModelConstants,
    pub curves: ImportanceCurves,
}

impl Default for Config {
    fn default() -> Self {
        let constants = default_constants();
        Config {
            curves: ImportanceCurves::defaults(&constants),
            constants,
        }
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.constants)?;
        for (name, curve) in [
            ("front", &self.curves.front),
            ("left", &self.curves.left),
            ("right", &self.curves.right),
        ] {
            writeln!(f, "curve.{name} = {}", curve.breakpoints_text())?;
        }
        Ok(())
    }
}

/// Parses a configuration file: defaults with per-key overrides applied, then
/// re-validated. Curve keys are `curve.front`, `curve.left`, `curve.right`
/// and `curve.lateral` (both sides).
pub fn parse_config(source: &str) -> Result<Config> {
    let mut constants = default_constants();
    let mut front = None;
    let mut left = None;
    let mut right = None;

    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |key: &str, message: String| Error::Config {
            line: line_no,
            key: key.to_string(),
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line, "expected `key = value`".into()))?;
        let key = key.trim();
        let value = value.trim();

        if let Some(region) = key.strip_prefix("curve.") {
            let points =
                ImportanceCurve::parse_breakpoints(value).map_err(|m| err(key, m))?;
            match region {
                "front" => front = Some(points),
                "left" => left = Some(points),
                "right" => right = Some(points),
                "lateral" => {
                    left = Some(points.clone());
                    right = Some(points);
                }
                _ => return Err(err(key, "unknown curve region".into())),
            }
            continue;
        }

        let slot = constants
            .field_mut(key)
            .ok_or_else(|| err(key, "unknown key".into()))?;
        *slot = value
            .parse::<f64>()
            .map_err(|e| err(key, format!("invalid number {value:?}: {e}")))?;
    }

    constants.validate()?;

    let defaults = ImportanceCurves::defaults(&constants);
    let build = |points: Option<Vec<(f64, f64)>>, fallback: ImportanceCurve| match points {
        Some(p) => ImportanceCurve::new(p, constants.alpha_min),
        None => Ok(fallback),
    };
    let curves = ImportanceCurves {
        front: build(front, defaults.front)?,
        left: build(left, defaults.left)?,
        right: build(right, defaults.right)?,
    };
    Ok(Config { constants, curves })
}

/// Constants-only view of [`parse_config`].
pub fn load_constants(source: &str) -> Result<ModelConstants> {
    parse_config(source).map(|c| c.constants)
}

/// Renders just the constants in configuration form.
pub fn constants_to_config(k: &ModelConstants) -> String {
    let mut out = String::new();
    let _ = write!(out, "{k}");
    out
}
