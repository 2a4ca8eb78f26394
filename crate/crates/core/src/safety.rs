//! Per-subsystem penalties, the aggregate safety metric, and the
//! constant-allocation baseline (equal shares, maximum resolution and
//! detection frequency).

use crate::constants::ModelConstants;
use crate::context::{build_context, ImportanceCurves, Scenario, SUBSYSTEMS};
use crate::error::Result;
use crate::factor_models::{compute_energy, compute_precision, compute_time};

/// Processing time (s) that earns no time penalty.
pub const TIME_PENALTY_OFFSET: f64 = 0.01;

/// Inputs to [`subsystem_penalty`] for one subsystem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyInputs {
    pub precision: f64,
    pub time: f64,
    pub frequency: f64,
    pub ideal_frequency: f64,
    pub weight: f64,
}

impl SafetyInputs {
    pub fn penalty(&self, k: &ModelConstants) -> f64 {
        subsystem_penalty(self.precision, self.time, self.frequency, self.ideal_frequency, k)
    }
}

/// Penalty combining precision shortfall, time above 10 ms and detection
/// frequency deficit. The frequency term is zero when running at or above the
/// ideal rate and when the ideal rate is already the minimum.
pub fn subsystem_penalty(
    precision: f64,
    time: f64,
    frequency: f64,
    ideal_frequency: f64,
    k: &ModelConstants,
) -> f64 {
    let frequency_deficit = if ideal_frequency <= k.f_min {
        0.0
    } else {
        ((ideal_frequency - frequency) / (ideal_frequency - k.f_min)).max(0.0)
    };
    (1.0 - precision) * k.w_p
        + (time - TIME_PENALTY_OFFSET) * k.t_n * k.w_t
        + frequency_deficit * k.w_f
}

/// `1 - sum(beta_i * W_i)`.
pub fn safety_metric(betas: &[f64; SUBSYSTEMS], weights: &[f64; SUBSYSTEMS]) -> f64 {
    1.0 - betas.iter().zip(weights).map(|(b, w)| b * w).sum::<f64>()
}

/// Safety of a full set of subsystem readings.
pub fn evaluate_safety(inputs: &[SafetyInputs; SUBSYSTEMS], k: &ModelConstants) -> f64 {
    let betas = inputs.map(|s| s.penalty(k));
    safety_metric(&betas, &inputs.map(|s| s.weight))
}

/// Metrics of the constant allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcraBaseline {
    pub share: [f64; SUBSYSTEMS],
    pub network_size: [f64; SUBSYSTEMS],
    pub resolution: [f64; SUBSYSTEMS],
    pub frequency: [f64; SUBSYSTEMS],
    pub time: [f64; SUBSYSTEMS],
    pub precision: [f64; SUBSYSTEMS],
    pub energy: [f64; SUBSYSTEMS],
    pub penalty: [f64; SUBSYSTEMS],
    pub total_share: f64,
    pub total_time: f64,
    pub max_time: f64,
    pub total_precision: f64,
    pub total_energy: f64,
    pub safety: f64,
}

/// Baseline metrics given the ideal frequency each subsystem would want.
pub fn ccra_with_ideal(ideal_frequency: &[f64; SUBSYSTEMS], k: &ModelConstants) -> CcraBaseline {
    let equal = 1.0 / SUBSYSTEMS as f64;
    let share = [equal; SUBSYSTEMS];
    let network_size = [equal; SUBSYSTEMS];
    let weight = [equal; SUBSYSTEMS];
    let resolution = [k.r_max; SUBSYSTEMS];
    let frequency = [k.f_max; SUBSYSTEMS];

    let time = std::array::from_fn(|i| {
        compute_time(share[i], network_size[i], resolution[i], k).expect("equal share is positive")
    });
    let precision = std::array::from_fn(|i| compute_precision(network_size[i], resolution[i], k));
    let energy = std::array::from_fn(|i| compute_energy(share[i], frequency[i], k));
    let penalty = std::array::from_fn(|i| {
        subsystem_penalty(precision[i], time[i], frequency[i], ideal_frequency[i], k)
    });

    CcraBaseline {
        share,
        network_size,
        resolution,
        frequency,
        time,
        precision,
        energy,
        penalty,
        total_share: share.iter().sum(),
        total_time: time.iter().sum(),
        max_time: time.iter().copied().fold(f64::MIN, f64::max),
        total_precision: precision.iter().sum(),
        total_energy: energy.iter().sum(),
        safety: safety_metric(&penalty, &weight),
    }
}

/// Baseline for a scenario. The scenario only supplies the ideal detection
/// frequencies, and the baseline always runs at `F_max`, so the result is the
/// same for every scenario.
pub fn ccra_baseline(s: &Scenario, curves: &ImportanceCurves, k: &ModelConstants) -> Result<CcraBaseline> {
    let ctx = build_context(s, curves, k)?;
    Ok(ccra_with_ideal(&ctx.frequency, k))
}

/// `SF_CCRA`: the safety level every adaptive allocation must match.
pub fn ccra_safety_floor(k: &ModelConstants) -> f64 {
    ccra_with_ideal(&[k.f_min; SUBSYSTEMS], k).safety
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::default_constants;
    use crate::context::{Direction, Maneuver};
    use proptest::prelude::*;

    #[test]
    fn penalty_examples() {
        let k = default_constants();
        assert!(subsystem_penalty(1.0, 0.01, 12.0, 12.0, &k).abs() < 1e-15);
        let ccra = subsystem_penalty(0.45725, 0.015, 20.0, 20.0, &k);
        assert!((ccra - 0.22210).abs() < 1e-5, "{ccra}");
        let s12 = subsystem_penalty(0.2764, 0.05144, 5.0, 5.0, &k);
        assert!((s12 - 0.33088).abs() < 1e-5, "{s12}");
    }

    #[test]
    fn frequency_term() {
        let k = default_constants();
        let base = subsystem_penalty(0.5, 0.02, 20.0, 20.0, &k);
        // half-way between F_min and the ideal rate
        let half = subsystem_penalty(0.5, 0.02, 12.5, 20.0, &k);
        assert!((half - base - 0.5 * k.w_f).abs() < 1e-12);
        // oversampling earns nothing
        assert_eq!(subsystem_penalty(0.5, 0.02, 20.0, 10.0, &k), base);
        // ideal at F_min: no 0/0
        assert_eq!(subsystem_penalty(0.5, 0.02, 5.0, 5.0, &k), base);
    }

    #[test]
    fn safety_examples() {
        assert_eq!(safety_metric(&[0.0; 4], &[0.25; 4]), 1.0);
        let ccra = safety_metric(&[0.22224; 4], &[0.25; 4]);
        assert!((ccra - 0.77776).abs() < 1e-12);
        assert_eq!(safety_metric(&[1.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn baseline_row() {
        let k = default_constants();
        let b = ccra_with_ideal(&[k.f_min; 4], &k);
        assert!((b.max_time - 0.015).abs() < 1e-12);
        assert!((b.total_time - 0.06).abs() < 1e-12);
        assert!((b.total_precision - 1.829).abs() < 1e-12);
        assert!((b.total_energy - 1.0).abs() < 1e-12);
        assert!((b.safety - 0.778).abs() < 5e-4, "{}", b.safety);
        assert_eq!(b.safety, ccra_safety_floor(&k));
    }

    #[test]
    fn baseline_independent_of_scenario() {
        let k = default_constants();
        let curves = ImportanceCurves::defaults(&k);
        let mk = |speed, direction, maneuver| Scenario {
            id: 1,
            speed_mph: speed,
            direction,
            maneuver,
            activities: vec![],
            duration_s: None,
        };
        let a = ccra_baseline(&mk(60.0, Direction::Forward, Maneuver::LeftTurn), &curves, &k).unwrap();
        let b = ccra_baseline(&mk(3.0, Direction::Reverse, Maneuver::None), &curves, &k).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn penalty_monotone(
            p in 0.0f64..1.0, dp in 0.0f64..0.5,
            t in 0.005f64..0.1, dt in 0.0f64..0.05,
            f in 5.0f64..20.0, df in 0.0f64..10.0,
            ideal in 5.0f64..20.0,
        ) {
            let k = default_constants();
            let b = subsystem_penalty(p, t, f, ideal, &k);
            prop_assert!(subsystem_penalty((p + dp).min(1.0), t, f, ideal, &k) <= b + 1e-12);
            prop_assert!(subsystem_penalty(p, t + dt, f, ideal, &k) >= b - 1e-12);
            prop_assert!(subsystem_penalty(p, t, (f + df).min(20.0), ideal, &k) <= b + 1e-12);
        }

        #[test]
        fn safety_at_most_one(
            betas in prop::array::uniform4(0.0f64..2.0),
            raw in prop::array::uniform4(0.01f64..1.0),
        ) {
            let total: f64 = raw.iter().sum();
            let w = raw.map(|x| x / total);
            let sf = safety_metric(&betas, &w);
            prop_assert!(sf <= 1.0 + 1e-12);
            let all_zero = betas.iter().all(|&b| b == 0.0);
            prop_assert_eq!(sf == 1.0, all_zero);
        }
    }
}
