//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::time::{Duration, Instant};

use acra::allocator::marginal_cost;
use acra::journey::{emit_report, parse_journey, run_journey, serialize_journey, Journey, ReportFormat, PER_SUBSYSTEM_NOTE};
use acra::safety::ccra_with_ideal;
use acra::simplex::{minimize, separable_objective, PenalizedProblem, SimplexOptions, PENALTY_SCHEDULE};
use acra::{build_context, default_constants, ImportanceCurves, ModelConstants};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

/// Baseline row worked by hand from the constants: equal quarter shares and
/// network sizes, `R_max`, `F_max`, no frequency deficit.
fn criterion_1(k: &ModelConstants) -> Outcome {
    let time = k.t0 + k.t1 * 0.25 * k.r_max / 0.25;
    let precision = k.p0 + k.p1 * 0.25 * k.r_max;
    let energy = k.e0 + k.e1 * 0.25 * k.f_max;
    let beta = (1.0 - precision) * k.w_p + (time - 0.01) * k.t_n * k.w_t;
    let hand = [time, 4.0 * time, precision, 4.0 * precision, 4.0 * energy, 1.0 - beta];

    let b = ccra_with_ideal(&[k.f_min; 4], k);
    let computed = [b.max_time, b.total_time, b.precision[0], b.total_precision, b.total_energy, b.safety];
    let published = [0.015, 0.06, 0.457, 1.829, 1.0, 0.778];
    let names = ["time", "total time", "precision", "total precision", "total energy", "safety"];

    let mut off = Vec::new();
    for i in 0..6 {
        if !within(computed[i], hand[i], 1e-12) {
            off.push(format!("{} {} != hand {}", names[i], computed[i], hand[i]));
        }
        if !within(computed[i], published[i], 5e-4) {
            off.push(format!("{} {} vs {}", names[i], computed[i], published[i]));
        }
    }
    let detail = format!(
        "t {:.4}, sum t {:.4}, P {:.5}, sum P {:.4}, E {:.4}, SF {:.5}",
        computed[0], computed[1], computed[2], computed[3], computed[4], computed[5]
    );
    if off.is_empty() {
        outcome(true, detail)
    } else {
        outcome(false, off.join("; "))
    }
}

fn criterion_2(j: &Journey, curves: &ImportanceCurves, k: &ModelConstants) -> Outcome {
    // (scenario, subsystem index, published Hz)
    let targets = [(4, 0, 18.13), (4, 1, 18.13), (7, 1, 18.5), (9, 1, 20.0), (2, 0, 8.75), (2, 1, 8.75), (2, 2, 8.75)];
    let mut off = Vec::new();
    let mut checked = 0;
    for (id, i, want) in targets {
        let s = j.get(id).unwrap();
        let ctx = build_context(s, curves, k).unwrap();
        // independent evaluation of the frequency rule
        let a = ctx.alpha[i];
        let hand = (k.f_max - k.f_min) * ((a - k.alpha_min) / (1.0 - k.alpha_min)) * (s.speed_mph / k.v_fmax).min(1.0) + k.f_min;
        checked += 1;
        if !within(ctx.frequency[i], want, 0.01) || !within(ctx.frequency[i], hand, 1e-12) {
            off.push(format!("scenario {id} subsystem {}: {} vs {want}", i + 1, ctx.frequency[i]));
        }
    }
    for s in &j.scenarios {
        let ctx = build_context(s, curves, k).unwrap();
        for i in 0..4 {
            if ctx.alpha[i] == k.alpha_min {
                checked += 1;
                if !within(ctx.frequency[i], 5.0, 0.01) {
                    off.push(format!("scenario {} subsystem {}: {} vs 5", s.id, i + 1, ctx.frequency[i]));
                }
            }
        }
    }
    outcome(off.is_empty(), if off.is_empty() { format!("{checked} entries within 0.01 Hz") } else { off.join("; ") })
}

fn criterion_3(j: &Journey, curves: &ImportanceCurves, k: &ModelConstants) -> Outcome {
    let published = [1.0, 1.0, 0.59, 0.71, 0.37, 0.89, 0.71, 0.66, 0.42, 0.58, 0.64, 0.13, 0.42, 0.71];
    let tight = [1, 2, 4, 7, 9, 12, 13, 14];
    let mut off = Vec::new();
    let mut worst: f64 = 0.0;
    for (s, want) in j.scenarios.iter().zip(published) {
        let ctx = build_context(s, curves, k).unwrap();
        let tol = if tight.contains(&s.id) { 0.01 } else { 0.03 };
        worst = worst.max((ctx.pool - want).abs());
        if !within(ctx.pool, want, tol) {
            off.push(format!("scenario {}: {:.4} vs {want}", s.id, ctx.pool));
        }
    }
    outcome(off.is_empty(), if off.is_empty() { format!("14 pools, worst gap {worst:.4}") } else { off.join("; ") })
}

fn criterion_4(j: &Journey, curves: &ImportanceCurves, k: &ModelConstants) -> Outcome {
    let r = run_journey(j, curves, k);
    let misses = |f: &dyn Fn(&acra::journey::Comparison) -> bool| -> Vec<String> {
        r.rows
            .iter()
            .filter(|row| !row.outcome.as_ref().is_ok_and(f))
            .map(|row| row.id.to_string())
            .collect()
    };
    let energy = misses(&|c| c.acra.total_energy < 1.0 && c.energy_lower());
    let safety = misses(&|c| c.safety_higher());
    let worst_sf = r
        .comparisons()
        .map(|c| c.acra.safety)
        .fold(f64::INFINITY, f64::min);
    let mut detail = format!(
        "energy {}/14, safety {}/14 (SF_CCRA {:.5}, lowest ACRA SF {worst_sf:.5})",
        14 - energy.len(),
        14 - safety.len(),
        r.safety_floor
    );
    if !energy.is_empty() {
        detail.push_str(&format!("; energy not lower: {}", energy.join(", ")));
    }
    if !safety.is_empty() {
        detail.push_str(&format!("; safety not higher: scenario {}", safety.join(", ")));
    }
    outcome(energy.is_empty() && safety.is_empty(), detail)
}

/// Closed-form solution of `min sum(kappa/C + m*C)`, `sum C = total`,
/// `C >= floor`, by bisection on the multiplier.
fn kkt_oracle(kappa: &[f64], m: &[f64], total: f64, floor: f64) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> {
        kappa
            .iter()
            .zip(m)
            .map(|(&kp, &mi)| if mi - lambda <= 0.0 { f64::INFINITY } else { (kp / (mi - lambda)).sqrt().max(floor) })
            .collect()
    };
    let m_min = m.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (m_min - 1e9, m_min);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if at(mid).iter().sum::<f64>() > total {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    at(lo)
}

fn criterion_5() -> Outcome {
    let rosen = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
    let min = minimize(rosen, &[-1.2, 1.0], &SimplexOptions::default()).unwrap();
    let rosen_ok = within(min.point[0], 1.0, 1e-4) && within(min.point[1], 1.0, 1e-4);

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_coord: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for _ in 0..100 {
        let mut log_uniform = || 10f64.powf(rng.gen_range(-3.0..0.0));
        let kappa: Vec<f64> = (0..4).map(|_| log_uniform()).collect();
        let m: Vec<f64> = (0..4).map(|_| log_uniform()).collect();
        let total = rng.gen_range(0.2..1.0);
        let floor = rng.gen_range(0.0..total / 8.0);
        let oracle = kkt_oracle(&kappa, &m, total, floor);

        let (kk, mm) = (kappa.clone(), m.clone());
        let base = move |x: &[f64]| if x.iter().any(|&c| c <= 0.0) { f64::INFINITY } else { separable_objective(&kk, &mm, x) };
        let p = PenalizedProblem::new(base, vec![floor; 4], vec![total; 4], total).unwrap();
        let x = p.solve(&[total / 4.0; 4], &SimplexOptions::default(), &PENALTY_SCHEDULE).unwrap().point;
        for i in 0..4 {
            worst_coord = worst_coord.max((x[i] - oracle[i]).abs());
        }
        worst_sum = worst_sum.max((x.iter().sum::<f64>() - total).abs());
    }
    outcome(
        rosen_ok && worst_coord < 1e-3 && worst_sum < 1e-3,
        format!(
            "Rosenbrock ({:.6}, {:.6}); 100 instances, worst coordinate gap {worst_coord:.2e}, worst pool gap {worst_sum:.2e}",
            min.point[0], min.point[1]
        ),
    )
}

fn criterion_6(j: &Journey, curves: &ImportanceCurves, k: &ModelConstants) -> Outcome {
    let r = run_journey(j, curves, k);
    let mut worst: f64 = 0.0;
    let mut off = Vec::new();
    for row in &r.rows {
        let Ok(c) = &row.outcome else { continue };
        let a = &c.acra;
        let interior: Vec<f64> = (0..4)
            .filter(|&i| a.shares[i] > a.floors[i] + 1e-6)
            .map(|i| marginal_cost(a.shares[i], &a.context, k, i))
            .collect();
        if interior.len() < 2 {
            continue;
        }
        let hi = interior.iter().copied().fold(f64::MIN, f64::max);
        let lo = interior.iter().copied().fold(f64::MAX, f64::min);
        worst = worst.max(hi - lo);
        if hi - lo > 1e-2 {
            off.push(format!("scenario {}: spread {:.3e}", row.id, hi - lo));
        }
    }
    outcome(off.is_empty(), if off.is_empty() { format!("worst marginal spread {worst:.2e}") } else { off.join("; ") })
}

fn criterion_7(j: &Journey, curves: &ImportanceCurves, k: &ModelConstants) -> Outcome {
    let mut off = Vec::new();
    let r = run_journey(j, curves, k);
    let csv = emit_report(&r, ReportFormat::Csv);
    if emit_report(&run_journey(j, curves, k), ReportFormat::Csv) != csv {
        off.push("report not deterministic".to_string());
    }
    if parse_journey(&serialize_journey(j)).as_ref() != Ok(j) {
        off.push("journey does not round-trip".to_string());
    }
    for c in r.comparisons() {
        let a = &c.acra;
        let w: f64 = a.context.weight.iter().sum();
        if !within(w, 1.0, 1e-12) {
            off.push(format!("weights sum to {w}"));
        }
        if !a.constraints_satisfied || !within(a.total_share, a.context.pool, 1e-3) {
            off.push(format!("constraints violated at pool {}", a.context.pool));
        }
        if a.precision.iter().any(|&p| p > 1.0) || a.frequency().iter().any(|&f| f < k.f_min || f > k.f_max) {
            off.push("clamp violated".to_string());
        }
    }
    // CSV values agree with the report to six significant digits
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    for (rec, c) in reader.records().zip(r.comparisons()) {
        let rec = rec.unwrap();
        let a = &c.acra;
        let expect = [a.shares[0], a.total_share, a.max_time, a.total_precision, a.total_energy, a.safety];
        let cols = [1, 5, 7, 12, 17, 18];
        for (col, want) in cols.iter().zip(expect) {
            let got: f64 = rec[*col].parse().unwrap();
            if (got - want).abs() > 5e-6 * want.abs() {
                off.push(format!("csv column {col}: {got} vs {want}"));
            }
        }
    }
    outcome(off.is_empty(), if off.is_empty() { "weights, constraints, clamps, determinism, round-trips".to_string() } else { off.join("; ") })
}

fn criterion_8(j: &Journey, curves: &ImportanceCurves, k: &ModelConstants) -> Outcome {
    let table = emit_report(&run_journey(j, curves, k), ReportFormat::Table);
    outcome(table.contains(PER_SUBSYSTEM_NOTE), "report states per-subsystem C and P are not targets")
}

fn criterion_9(j: &Journey, curves: &ImportanceCurves, k: &ModelConstants) -> Outcome {
    let start = Instant::now();
    let r = run_journey(j, curves, k);
    let _ = emit_report(&r, ReportFormat::Csv);
    let _ = emit_report(&r, ReportFormat::Table);
    let elapsed = start.elapsed();
    outcome(elapsed < Duration::from_secs(5), format!("{} ms", elapsed.as_millis()))
}

fn main() {
    let k = default_constants();
    let curves = ImportanceCurves::defaults(&k);
    let j = Journey::shipped();

    let results = [
        ("1 baseline closure", criterion_1(&k)),
        ("2 detection frequencies", criterion_2(&j, &curves, &k)),
        ("3 resource pools", criterion_3(&j, &curves, &k)),
        ("4 energy and safety claims", criterion_4(&j, &curves, &k)),
        ("5 optimizer correctness", criterion_5()),
        ("6 stationarity", criterion_6(&j, &curves, &k)),
        ("7 invariants", criterion_7(&j, &curves, &k)),
        ("8 non-target columns declared", criterion_8(&j, &curves, &k)),
        ("9 runtime", criterion_9(&j, &curves, &k)),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
