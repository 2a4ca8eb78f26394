//! Weighted time/precision/energy cost and the per-scenario allocation run.

use crate::constants::ModelConstants;
use crate::context::{build_context, ImportanceCurves, Scenario, SubsystemContext, SUBSYSTEMS};
use crate::error::{Error, Result};
use crate::factor_models::{compute_energy, compute_precision, compute_time};
use crate::safety::{evaluate_safety, SafetyInputs};
use crate::simplex::{water_fill, PenalizedProblem, SimplexOptions, PENALTY_SCHEDULE};

/// Allowed gap between the allocated total and the pool.
pub const POOL_TOLERANCE: f64 = 1e-3;
/// Allowed dip below a per-subsystem floor.
pub const FLOOR_TOLERANCE: f64 = 1e-6;

/// `sum(a * t_i - b * P_i * W_i + c * E_i)` over the four subsystems.
pub fn cost(shares: &[f64; SUBSYSTEMS], ctx: &SubsystemContext, k: &ModelConstants) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..SUBSYSTEMS {
        let t = compute_time(shares[i], ctx.network_size[i], ctx.resolution[i], k)?;
        let p = compute_precision(ctx.network_size[i], ctx.resolution[i], k);
        let e = compute_energy(shares[i], ctx.frequency[i], k);
        total += k.a * t - k.b * p * ctx.weight[i] + k.c * e;
    }
    Ok(total)
}

/// Per-subsystem floor: `C_min`, unless the pool is too small to give every
/// subsystem that much, in which case the pool is split evenly.
pub fn effective_floor(pool: f64, n: usize, k: &ModelConstants) -> f64 {
    k.c_min.min(pool / n as f64)
}

/// Time coefficient `a * t1 * S_i * R_i` of subsystem `i`.
pub fn time_coefficient(ctx: &SubsystemContext, k: &ModelConstants, i: usize) -> f64 {
    k.a * k.t1 * ctx.network_size[i] * ctx.resolution[i]
}

/// Energy coefficient `c * e1 * F_i` of subsystem `i`.
pub fn energy_coefficient(ctx: &SubsystemContext, k: &ModelConstants, i: usize) -> f64 {
    k.c * k.e1 * ctx.frequency[i]
}

/// Partial derivative of the cost with respect to share `i`.
pub fn marginal_cost(share: f64, ctx: &SubsystemContext, k: &ModelConstants, i: usize) -> f64 {
    -time_coefficient(ctx, k, i) / (share * share) + energy_coefficient(ctx, k, i)
}

/// One scenario's constrained cost minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    pub context: SubsystemContext,
    pub floors: [f64; SUBSYSTEMS],
    pub constants: ModelConstants,
    pub safety_floor: f64,
}

impl AllocationProblem {
    pub fn new(context: SubsystemContext, k: &ModelConstants, safety_floor: f64) -> Result<Self> {
        let floor = effective_floor(context.pool, SUBSYSTEMS, k);
        Self::with_floors(context, [floor; SUBSYSTEMS], k, safety_floor)
    }

    pub fn with_floors(
        context: SubsystemContext,
        floors: [f64; SUBSYSTEMS],
        k: &ModelConstants,
        safety_floor: f64,
    ) -> Result<Self> {
        if !(context.pool > 0.0 && context.pool <= 1.0) {
            return Err(Error::Invariant(format!("pool must lie in (0, 1], got {}", context.pool)));
        }
        let needed: f64 = floors.iter().sum();
        // Equal-split floors can exceed the pool by an ulp after summing.
        if needed > context.pool * (1.0 + 1e-12) {
            return Err(Error::InfeasiblePool {
                needed,
                available: context.pool,
                deficit: needed - context.pool,
            });
        }
        Ok(AllocationProblem {
            context,
            floors,
            constants: *k,
            safety_floor,
        })
    }

    pub fn pool(&self) -> f64 {
        self.context.pool
    }

    pub fn cost(&self, shares: &[f64; SUBSYSTEMS]) -> Result<f64> {
        cost(shares, &self.context, &self.constants)
    }

    /// Safety metric the allocation would score, or `None` for a
    /// nonpositive share.
    pub fn safety(&self, shares: &[f64; SUBSYSTEMS]) -> Option<f64> {
        let k = &self.constants;
        let ctx = &self.context;
        let mut inputs = [SafetyInputs {
            precision: 0.0,
            time: 0.0,
            frequency: 0.0,
            ideal_frequency: 0.0,
            weight: 0.0,
        }; SUBSYSTEMS];
        for (i, input) in inputs.iter_mut().enumerate() {
            *input = SafetyInputs {
                precision: compute_precision(ctx.network_size[i], ctx.resolution[i], k),
                time: compute_time(shares[i], ctx.network_size[i], ctx.resolution[i], k).ok()?,
                frequency: ctx.frequency[i],
                ideal_frequency: ctx.frequency[i],
                weight: ctx.weight[i],
            };
        }
        Some(evaluate_safety(&inputs, k))
    }

    /// Penalized form: pool equality, floors, `C_i <= pool`, and a
    /// `max(0, SF_floor - SF)` safety term. Nonpositive shares are outside the
    /// cost's domain and evaluate to `+inf`.
    pub fn penalized(&self) -> Result<PenalizedProblem<'_>> {
        let base = move |x: &[f64]| -> f64 {
            let shares = to_array(x);
            self.cost(&shares).unwrap_or(f64::INFINITY)
        };
        // Scored on the allocation rescaled onto the pool: the term may move
        // resources between subsystems but cannot argue for a larger total.
        let safety_term = move |x: &[f64]| -> f64 {
            let total: f64 = x.iter().sum();
            if !(total > 0.0) {
                return 0.0;
            }
            let scale = self.pool() / total;
            let rescaled = to_array(x).map(|c| c * scale);
            match self.safety(&rescaled) {
                Some(sf) => self.safety_floor - sf,
                None => 0.0,
            }
        };
        Ok(PenalizedProblem::new(
            base,
            self.floors.to_vec(),
            vec![self.pool(); SUBSYSTEMS],
            self.pool(),
        )?
        .with_extra(safety_term))
    }

    /// Closed-form optimum of the same cost without the safety term.
    pub fn water_fill(&self) -> Result<[f64; SUBSYSTEMS]> {
        let kappa: Vec<f64> = (0..SUBSYSTEMS)
            .map(|i| time_coefficient(&self.context, &self.constants, i))
            .collect();
        let m: Vec<f64> = (0..SUBSYSTEMS)
            .map(|i| energy_coefficient(&self.context, &self.constants, i))
            .collect();
        let c = water_fill(&kappa, &m, self.pool(), &self.floors)?;
        Ok(to_array(&c))
    }

    pub fn solve(&self, opts: &SimplexOptions) -> Result<AllocationResult> {
        let start = [self.pool() / SUBSYSTEMS as f64; SUBSYSTEMS];
        let problem = self.penalized()?;
        let min = problem.solve(&start, opts, &PENALTY_SCHEDULE)?;
        let shares = to_array(&min.point);
        let mut result = self.evaluate(&shares)?;
        result.iterations = min.iterations;
        result.converged = min.converged;
        Ok(result)
    }

    /// Every reported metric at a given allocation.
    pub fn evaluate(&self, shares: &[f64; SUBSYSTEMS]) -> Result<AllocationResult> {
        let k = &self.constants;
        let ctx = &self.context;
        let mut time = [0.0; SUBSYSTEMS];
        for i in 0..SUBSYSTEMS {
            time[i] = compute_time(shares[i], ctx.network_size[i], ctx.resolution[i], k)?;
        }
        let precision = std::array::from_fn(|i| compute_precision(ctx.network_size[i], ctx.resolution[i], k));
        let energy = std::array::from_fn(|i| compute_energy(shares[i], ctx.frequency[i], k));
        let safety = self
            .safety(shares)
            .ok_or_else(|| Error::Domain("nonpositive share".into()))?;

        let total_share: f64 = shares.iter().sum();
        let constraints_satisfied = (total_share - self.pool()).abs() < POOL_TOLERANCE
            && (0..SUBSYSTEMS).all(|i| {
                shares[i] >= self.floors[i] - FLOOR_TOLERANCE && shares[i] <= self.pool() + FLOOR_TOLERANCE
            });

        Ok(AllocationResult {
            context: *ctx,
            floors: self.floors,
            shares: *shares,
            time,
            precision,
            energy,
            total_share,
            total_time: time.iter().sum(),
            max_time: time.iter().copied().fold(f64::MIN, f64::max),
            total_precision: precision.iter().sum::<f64>(),
            total_energy: energy.iter().sum(),
            cost: self.cost(shares)?,
            safety,
            safety_floor: self.safety_floor,
            constraints_satisfied,
            safety_floor_met: safety >= self.safety_floor,
            iterations: 0,
            converged: true,
        })
    }
}

fn to_array(x: &[f64]) -> [f64; SUBSYSTEMS] {
    std::array::from_fn(|i| x[i])
}

/// Allocation for one scenario with every intermediate quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub context: SubsystemContext,
    pub floors: [f64; SUBSYSTEMS],
    pub shares: [f64; SUBSYSTEMS],
    /// Seconds per image.
    pub time: [f64; SUBSYSTEMS],
    pub precision: [f64; SUBSYSTEMS],
    /// Energy per second.
    pub energy: [f64; SUBSYSTEMS],
    pub total_share: f64,
    pub total_time: f64,
    pub max_time: f64,
    pub total_precision: f64,
    pub total_energy: f64,
    pub cost: f64,
    pub safety: f64,
    pub safety_floor: f64,
    pub constraints_satisfied: bool,
    pub safety_floor_met: bool,
    pub iterations: usize,
    pub converged: bool,
}

impl AllocationResult {
    pub fn frequency(&self) -> [f64; SUBSYSTEMS] {
        self.context.frequency
    }
}

/// Runs the full pipeline for one scenario: context, penalized Nelder-Mead
/// from the equal split, then metrics and safety at the minimizer.
pub fn allocate(
    s: &Scenario,
    curves: &ImportanceCurves,
    k: &ModelConstants,
    safety_floor: f64,
) -> Result<AllocationResult> {
    let ctx = build_context(s, curves, k)?;
    AllocationProblem::new(ctx, k, safety_floor)?.solve(&SimplexOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::default_constants;
    use crate::context::{Activity, Direction, Maneuver, Subsystem};
    use crate::safety::ccra_safety_floor;

    fn scenario(speed: f64, maneuver: Maneuver, acts: &[(Subsystem, f64)]) -> Scenario {
        Scenario {
            id: 1,
            speed_mph: speed,
            direction: Direction::Forward,
            maneuver,
            activities: acts
                .iter()
                .map(|&(region, distance_m)| Activity { region, distance_m })
                .collect(),
            duration_s: None,
        }
    }

    fn ccra_context() -> SubsystemContext {
        SubsystemContext {
            alpha: [1.0; 4],
            weight: [0.25; 4],
            frequency: [20.0; 4],
            resolution: [5.0; 4],
            network_size: [0.25; 4],
            pool: 1.0,
        }
    }

    #[test]
    fn cost_at_constant_allocation() {
        let k = default_constants();
        let j = cost(&[0.25; 4], &ccra_context(), &k).unwrap();
        let expected = 0.5 * 0.06 - 0.25 * 0.45725 + 0.25 * 1.0;
        assert!((j - expected).abs() < 1e-12);
        assert!((j - 0.16569).abs() < 1e-5, "{j}");
    }

    #[test]
    fn cost_collapses_to_total_time() {
        let k = ModelConstants {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            ..default_constants()
        };
        let ctx = ccra_context();
        let shares = [0.1, 0.2, 0.3, 0.4];
        let total_time: f64 = (0..4)
            .map(|i| compute_time(shares[i], 0.25, 5.0, &k).unwrap())
            .sum();
        assert!((cost(&shares, &ctx, &k).unwrap() - total_time).abs() < 1e-15);
    }

    #[test]
    fn cost_sign_structure() {
        let k = default_constants();
        let ctx = ccra_context();
        let time_only = ModelConstants { a: 1.0, b: 0.0, c: 0.0, ..k };
        let energy_only = ModelConstants { a: 0.0, b: 0.0, c: 1.0, ..k };
        let small = [0.1, 0.15, 0.2, 0.05];
        let doubled = small.map(|x| 2.0 * x);
        assert!(cost(&doubled, &ctx, &time_only).unwrap() < cost(&small, &ctx, &time_only).unwrap());
        assert!(cost(&doubled, &ctx, &energy_only).unwrap() > cost(&small, &ctx, &energy_only).unwrap());
        assert!(matches!(cost(&[0.0, 0.3, 0.3, 0.4], &ctx, &k), Err(Error::Domain(_))));
    }

    #[test]
    fn floor_examples() {
        let k = default_constants();
        assert_eq!(effective_floor(1.0, 4, &k), 0.1);
        assert!((effective_floor(0.129, 4, &k) - 0.03225).abs() < 1e-4);
        assert_eq!(effective_floor(0.4, 4, &k), 0.1);
    }

    #[test]
    fn infeasible_floors_rejected() {
        let k = default_constants();
        let ctx = SubsystemContext {
            pool: 0.2,
            ..ccra_context()
        };
        assert!(matches!(
            AllocationProblem::with_floors(ctx, [0.1; 4], &k, 0.5),
            Err(Error::InfeasiblePool { .. })
        ));
    }

    #[test]
    fn idle_highway_splits_evenly() {
        let k = default_constants();
        let curves = ImportanceCurves::defaults(&k);
        let r = allocate(&scenario(45.0, Maneuver::None, &[]), &curves, &k, ccra_safety_floor(&k)).unwrap();
        for &c in &r.shares {
            assert!((c - 0.03226).abs() < 1e-3, "{:?}", r.shares);
        }
        assert!((r.total_energy - 0.0517).abs() < 1e-3, "{}", r.total_energy);
        for &p in &r.precision {
            assert!((p - 0.2764).abs() < 1e-4);
        }
        assert!(r.constraints_satisfied);
    }

    #[test]
    fn right_turn_in_town() {
        let k = default_constants();
        let curves = ImportanceCurves::defaults(&k);
        let r = allocate(&scenario(10.0, Maneuver::RightTurn, &[]), &curves, &k, ccra_safety_floor(&k)).unwrap();
        assert!((r.context.pool - 0.419).abs() < 1e-3);
        assert!((r.frequency()[2] - 8.75).abs() < 1e-12);
        assert_eq!(r.precision[2], 1.0);
        assert!(r.constraints_satisfied);
    }

    #[test]
    fn dominant_subsystem_gets_largest_share() {
        let k = default_constants();
        let curves = ImportanceCurves::defaults(&k);
        let s = scenario(61.0, Maneuver::LeftLaneChange, &[(Subsystem::Left, 5.0)]);
        let ctx = build_context(&s, &curves, &k).unwrap();
        assert_eq!(ctx.alpha, [0.1, 1.0, 0.1, 0.1]);
        let problem = AllocationProblem::new(ctx, &k, ccra_safety_floor(&k)).unwrap();
        let oracle = problem.water_fill().unwrap();
        let r = problem.solve(&SimplexOptions::default()).unwrap();
        let left = r.shares[1];
        assert!(r.shares.iter().enumerate().all(|(i, &c)| i == 1 || c < left), "{:?}", r.shares);
        for i in 0..4 {
            assert!((r.shares[i] - oracle[i]).abs() < 1e-3);
        }
    }

    #[test]
    fn reported_metrics_recompute_exactly() {
        let k = default_constants();
        let curves = ImportanceCurves::defaults(&k);
        let s = scenario(36.0, Maneuver::None, &[(Subsystem::Front, 10.0), (Subsystem::Left, 5.0)]);
        let r = allocate(&s, &curves, &k, ccra_safety_floor(&k)).unwrap();
        let ctx = &r.context;
        for i in 0..4 {
            assert_eq!(r.time[i], compute_time(r.shares[i], ctx.network_size[i], ctx.resolution[i], &k).unwrap());
            assert_eq!(r.precision[i], compute_precision(ctx.network_size[i], ctx.resolution[i], &k));
            assert_eq!(r.energy[i], compute_energy(r.shares[i], ctx.frequency[i], &k));
        }
        assert_eq!(r.cost, cost(&r.shares, ctx, &k).unwrap());
        assert_eq!(r.safety_floor_met, r.safety >= r.safety_floor);
    }
}
