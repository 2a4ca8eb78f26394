//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 input error, 3 check failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::allocator::{marginal_cost, AllocationProblem};
use crate::constants::{parse_config, Config};
use crate::context::{build_context, Subsystem, SUBSYSTEMS};
use crate::journey::{emit_comparison, emit_report, parse_journey, run_journey, Journey, ReportFormat};
use crate::safety::{ccra_safety_floor, ccra_with_ideal};
use crate::simplex::{separable_objective, water_fill, PenalizedProblem, SimplexOptions, PENALTY_SCHEDULE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

/// Name accepted by `--scenarios` for the built-in fourteen-scenario journey.
pub const SHIPPED_SCENARIOS: &str = "table3";

#[derive(Debug, Parser)]
#[command(name = "acra", version, about = "Adaptive compute allocation for vehicle perception subsystems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Allocate every scenario and print the report.
    Run(ReportArgs),
    /// Per-scenario energy and safety against the constant baseline.
    Compare(ReportArgs),
    /// Allocate one scenario and print every intermediate.
    Allocate(AllocateArgs),
    /// Run the built-in consistency checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct Inputs {
    /// Scenario file, or `table3` for the built-in journey.
    #[arg(long, value_name = "PATH", default_value = SHIPPED_SCENARIOS)]
    pub scenarios: String,
    /// Constants file overriding the defaults.
    #[arg(long, value_name = "PATH")]
    pub constants: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    /// Only this scenario.
    #[arg(long, value_name = "N")]
    pub id: Option<i64>,
    /// csv or table.
    #[arg(long, default_value = "table")]
    pub format: ReportFormat,
    /// Write the report here instead of standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AllocateArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[arg(long, value_name = "N")]
    pub id: i64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub inputs: Inputs,
}

/// A failure that ends the command with a diagnostic.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<crate::error::Error> for Failure {
    fn from(e: crate::error::Error) -> Self {
        Failure::input(e.to_string())
    }
}

type CmdResult = std::result::Result<i32, Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, false, out),
        Command::Compare(a) => cmd_run(a, true, out),
        Command::Allocate(a) => cmd_allocate(a, out),
        Command::Verify(a) => cmd_verify(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn read_file(path: &Path) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Failure::input(format!("file not found: {}", path.display()))
        } else {
            Failure::input(format!("cannot read {}: {e}", path.display()))
        }
    })
}

fn load_inputs(inputs: &Inputs) -> std::result::Result<(Journey, Config), Failure> {
    let config = match &inputs.constants {
        Some(path) => parse_config(&read_file(path)?)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?,
        None => Config::default(),
    };
    let journey = if inputs.scenarios == SHIPPED_SCENARIOS {
        Journey::shipped()
    } else {
        let path = Path::new(&inputs.scenarios);
        parse_journey(&read_file(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?
    };
    Ok((journey, config))
}

fn select(journey: &Journey, id: i64) -> std::result::Result<Journey, Failure> {
    match journey.get(id) {
        Some(s) => Ok(Journey::new(vec![s.clone()])?),
        None => {
            let ids: Vec<String> = journey.ids().iter().map(|i| i.to_string()).collect();
            Err(Failure::input(format!(
                "no scenario with id {id}; available ids: {}",
                ids.join(", ")
            )))
        }
    }
}

fn write_output(text: &str, path: Option<&Path>, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::input(format!("cannot write {}: {e}", p.display()))),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Failure::input(format!("cannot write output: {e}"))),
    }
}

fn cmd_run(a: &ReportArgs, compare: bool, out: &mut dyn Write) -> CmdResult {
    let (mut journey, config) = load_inputs(&a.inputs)?;
    if let Some(id) = a.id {
        journey = select(&journey, id)?;
    }
    let report = run_journey(&journey, &config.curves, &config.constants);
    let text = if compare {
        emit_comparison(&report, a.format)
    } else {
        emit_report(&report, a.format)
    };
    write_output(&text, a.out.as_deref(), out)?;
    let failed: Vec<&str> = report
        .rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().err().map(String::as_str))
        .collect();
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        Err(Failure::input(failed.join("; ")))
    }
}

fn fmt4(v: &[f64; SUBSYSTEMS], prec: usize) -> String {
    v.iter()
        .map(|x| format!("{x:>9.prec$}"))
        .collect::<Vec<_>>()
        .join("")
}

fn cmd_allocate(a: &AllocateArgs, out: &mut dyn Write) -> CmdResult {
    let (journey, config) = load_inputs(&a.inputs)?;
    let single = select(&journey, a.id)?;
    let s = &single.scenarios[0];
    let k = &config.constants;
    let ctx = build_context(s, &config.curves, k)?;
    let floor = ccra_safety_floor(k);
    let problem = AllocationProblem::new(ctx, k, floor)?;
    let r = problem.solve(&SimplexOptions::default())?;
    let marginals: [f64; SUBSYSTEMS] = std::array::from_fn(|i| marginal_cost(r.shares[i], &ctx, k, i));

    let mut t = String::new();
    use std::fmt::Write as _;
    let _ = writeln!(
        t,
        "scenario {}: {} mph, {}, maneuver {}",
        s.id,
        s.speed_mph,
        s.direction.name(),
        s.maneuver.name()
    );
    for act in &s.activities {
        let _ = writeln!(t, "  activity: {} at {} m", act.region, act.distance_m);
    }
    let _ = writeln!(t);
    let names: String = Subsystem::ALL.iter().map(|r| format!("{:>9}", r.name())).collect();
    let _ = writeln!(t, "{:<16}{names}", "");
    let _ = writeln!(t, "{:<16}{}", "importance", fmt4(&ctx.alpha, 4));
    let _ = writeln!(t, "{:<16}{}", "weightage", fmt4(&ctx.weight, 4));
    let _ = writeln!(t, "{:<16}{}", "frequency (Hz)", fmt4(&ctx.frequency, 2));
    let _ = writeln!(t, "{:<16}{}", "resolution", fmt4(&ctx.resolution, 3));
    let _ = writeln!(t, "{:<16}{}", "network size", fmt4(&ctx.network_size, 4));
    let _ = writeln!(t, "{:<16}{}", "floor", fmt4(&r.floors, 4));
    let _ = writeln!(t, "{:<16}{}", "share", fmt4(&r.shares, 4));
    let _ = writeln!(t, "{:<16}{}", "time (s)", fmt4(&r.time, 4));
    let _ = writeln!(t, "{:<16}{}", "precision", fmt4(&r.precision, 4));
    let _ = writeln!(t, "{:<16}{}", "energy", fmt4(&r.energy, 4));
    let _ = writeln!(t, "{:<16}{}", "marginal cost", fmt4(&marginals, 4));
    let _ = writeln!(t);
    let _ = writeln!(t, "pool            {:.4}", ctx.pool);
    let _ = writeln!(t, "total share     {:.4}", r.total_share);
    let _ = writeln!(t, "cost            {:.6}", r.cost);
    let _ = writeln!(t, "total time      {:.4}", r.total_time);
    let _ = writeln!(t, "max time        {:.4}", r.max_time);
    let _ = writeln!(t, "total precision {:.4}", r.total_precision);
    let _ = writeln!(t, "total energy    {:.4}", r.total_energy);
    let _ = writeln!(t, "safety          {:.5} (baseline {:.5})", r.safety, floor);
    let _ = writeln!(
        t,
        "constraints     {}",
        if r.constraints_satisfied { "satisfied" } else { "VIOLATED" }
    );
    let _ = writeln!(t, "iterations      {} (converged: {})", r.iterations, r.converged);
    write_output(&t, None, out)?;
    Ok(EXIT_OK)
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check_ccra(config: &Config) -> Check {
    let k = &config.constants;
    let b = ccra_with_ideal(&[k.f_min; SUBSYSTEMS], k);
    let targets = [
        ("time", b.max_time, 0.015),
        ("total time", b.total_time, 0.06),
        ("precision", b.precision[0], 0.457),
        ("total precision", b.total_precision, 1.829),
        ("total energy", b.total_energy, 1.0),
        ("safety", b.safety, 0.778),
    ];
    let off: Vec<String> = targets
        .iter()
        .filter(|(_, got, want)| (got - want).abs() > 5e-4)
        .map(|(name, got, want)| format!("{name} {got:.5} vs {want}"))
        .collect();
    Check {
        name: "baseline closure",
        pass: off.is_empty(),
        detail: if off.is_empty() {
            format!("t {:.4}, P {:.5}, E {:.4}, SF {:.5}", b.max_time, b.precision[0], b.total_energy, b.safety)
        } else {
            off.join(", ")
        },
    }
}

/// Penalized simplex against water filling on seeded random instances.
fn check_oracle_sample(samples: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_coord: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for _ in 0..samples {
        let mut log_uniform = || 10f64.powf(rng.gen_range(-3.0..0.0));
        let kappa: Vec<f64> = (0..SUBSYSTEMS).map(|_| log_uniform()).collect();
        let m: Vec<f64> = (0..SUBSYSTEMS).map(|_| log_uniform()).collect();
        let c_max = rng.gen_range(0.2..1.0);
        let lower = vec![rng.gen_range(0.0..c_max / 8.0); SUBSYSTEMS];
        let oracle = match water_fill(&kappa, &m, c_max, &lower) {
            Ok(o) => o,
            Err(e) => {
                return Check {
                    name: "optimizer vs oracle",
                    pass: false,
                    detail: e.to_string(),
                }
            }
        };
        let (kk, mm) = (kappa.clone(), m.clone());
        let base = move |x: &[f64]| {
            if x.iter().any(|&c| c <= 0.0) {
                f64::INFINITY
            } else {
                separable_objective(&kk, &mm, x)
            }
        };
        let solved = PenalizedProblem::new(base, lower, vec![c_max; SUBSYSTEMS], c_max)
            .and_then(|p| p.solve(&[c_max / 4.0; SUBSYSTEMS], &SimplexOptions::default(), &PENALTY_SCHEDULE));
        let x = match solved {
            Ok(min) => min.point,
            Err(e) => {
                return Check {
                    name: "optimizer vs oracle",
                    pass: false,
                    detail: e.to_string(),
                }
            }
        };
        for i in 0..SUBSYSTEMS {
            worst_coord = worst_coord.max((x[i] - oracle[i]).abs());
        }
        worst_sum = worst_sum.max((x.iter().sum::<f64>() - c_max).abs());
    }
    Check {
        name: "optimizer vs oracle",
        pass: worst_coord < 1e-3 && worst_sum < 1e-3,
        detail: format!("{samples} instances, worst coordinate gap {worst_coord:.2e}, worst pool gap {worst_sum:.2e}"),
    }
}

/// Scenario allocations against the closed-form optimum of the same cost.
fn check_scenarios(journey: &Journey, config: &Config) -> Check {
    let k = &config.constants;
    let floor = ccra_safety_floor(k);
    let mut worst: f64 = 0.0;
    let mut problems = Vec::new();
    for s in &journey.scenarios {
        let outcome = build_context(s, &config.curves, k)
            .and_then(|ctx| AllocationProblem::new(ctx, k, floor))
            .and_then(|p| Ok((p.solve(&SimplexOptions::default())?, p.water_fill()?)));
        match outcome {
            Ok((r, oracle)) => {
                let gap = (0..SUBSYSTEMS).map(|i| (r.shares[i] - oracle[i]).abs()).fold(0.0, f64::max);
                worst = worst.max(gap);
                if gap >= 1e-3 || !r.constraints_satisfied {
                    problems.push(format!("scenario {} off by {gap:.2e}", s.id));
                }
            }
            Err(e) => problems.push(format!("scenario {}: {e}", s.id)),
        }
    }
    Check {
        name: "scenario allocations vs oracle",
        pass: problems.is_empty(),
        detail: if problems.is_empty() {
            format!("worst share gap {worst:.2e}")
        } else {
            problems.join(", ")
        },
    }
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let (journey, config) = load_inputs(&a.inputs)?;
    let k = &config.constants;
    let mut checks = vec![
        check_ccra(&config),
        check_oracle_sample(20),
        check_scenarios(&journey, &config),
    ];

    let report = run_journey(&journey, &config.curves, k);
    let n = journey.scenarios.len();
    let energy_misses: Vec<String> = report
        .rows
        .iter()
        .filter(|r| !r.outcome.as_ref().is_ok_and(|c| c.energy_lower()))
        .map(|r| r.id.to_string())
        .collect();
    checks.push(Check {
        name: "energy below baseline",
        pass: energy_misses.is_empty(),
        detail: format!(
            "{}/{n}{}",
            report.energy_claims(),
            misses_suffix(&energy_misses)
        ),
    });
    let safety_misses: Vec<String> = report
        .rows
        .iter()
        .filter(|r| !r.outcome.as_ref().is_ok_and(|c| c.safety_higher()))
        .map(|r| r.id.to_string())
        .collect();
    checks.push(Check {
        name: "safety above baseline",
        pass: safety_misses.is_empty(),
        detail: format!(
            "{}/{n} vs {:.5}{}",
            report.safety_claims(),
            report.safety_floor,
            misses_suffix(&safety_misses)
        ),
    });

    let mut text = String::new();
    for c in &checks {
        text.push_str(&format!("{} {}: {}\n", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    write_output(&text, None, out)?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed == 0 {
        Ok(EXIT_OK)
    } else {
        Err(Failure {
            code: EXIT_CHECK,
            message: format!("{failed} of {} checks failed", checks.len()),
        })
    }
}

fn misses_suffix(ids: &[String]) -> String {
    if ids.is_empty() {
        String::new()
    } else {
        format!(" (not met: scenario {})", ids.join(", "))
    }
}
