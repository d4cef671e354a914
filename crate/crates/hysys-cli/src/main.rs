//! `hysys`: simulate and verify deterministic hybrid systems described in
//! scenario files, plus a handful of built-in demos.
//!
//! Exit codes: 0 on success, 1 when a verification check fails, 2 on
//! malformed input (bad files, unknown names, bad arguments).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use hysys::catalog;
use hysys::execution::{execute, verify_execution, IntegratorOptions};
use hysys::finite_cat;
use hysys::morphisms::{check_morphism, check_submersion};
use hysys::networks::{check_network_morphism, invariance_demo, verify_main_theorem};
use hysys::phase_space::TaggedPoint;
use hysys::scenario::{parse_scenario, Scenario};
use hysys::stability::{
    decay_to_cubic_map, neg_log_map, stability_transport_demo, StabilitySearchOpts,
};
use hysys::systems::{check_control, DeterministicControl};

#[derive(Parser)]
#[command(name = "hysys", version, about = "Deterministic hybrid systems toolkit")]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalOpts {
    /// Numeric tolerance for verification checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Sample count for sampled checks.
    #[arg(long, global = true, default_value_t = 60)]
    samples: usize,
    /// Seed for deterministic sampling.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Integrator step size.
    #[arg(long, global = true, default_value_t = 1e-3)]
    step: f64,
    /// Simulation horizon.
    #[arg(long, global = true, default_value_t = 10.0)]
    horizon: f64,
    /// Maximum number of jumps before an execution stops.
    #[arg(long = "max-jumps", global = true, default_value_t = 200)]
    max_jumps: usize,
    /// Dwell time under which consecutive jumps count toward a Zeno verdict.
    #[arg(long = "min-dwell", global = true, default_value_t = 1e-3)]
    min_dwell: f64,
    /// Directory for report and trajectory files (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl GlobalOpts {
    fn integrator(&self) -> IntegratorOptions {
        IntegratorOptions {
            step: self.step,
            max_jumps: self.max_jumps,
            min_dwell: self.min_dwell,
            horizon: self.horizon,
            ..IntegratorOptions::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a `simulation` section of a scenario file.
    Simulate {
        file: PathBuf,
        /// Section name; defaults to the first simulation in the file.
        #[arg(long)]
        name: Option<String>,
    },
    /// Check a scenario object against its defining laws.
    Verify {
        #[command(subcommand)]
        what: VerifyTarget,
    },
    /// Empirical δ–ε stability transported along a conjugacy.
    Stability {
        /// Which built-in conjugacy to use.
        #[arg(long, default_value = "decay-to-cubic")]
        map: String,
    },
    /// Finite-set checks: the coproduct-of-products bijection, the lax
    /// functor counterexample, and randomized discrete theorem instances.
    Finite {
        /// Number of randomized discrete instances.
        #[arg(long, default_value_t = 20)]
        instances: u64,
    },
    /// Run a built-in demonstration.
    Demo { name: String },
}

#[derive(Subcommand)]
enum VerifyTarget {
    /// A `control` section: deterministic-control membership.
    Control { file: PathBuf, #[arg(long)] name: Option<String> },
    /// A `morphism` section: relation preservation and functoriality.
    Morphism { file: PathBuf, #[arg(long)] name: Option<String> },
    /// A `submersion` section: surjectivity and fiberwise rank.
    Submersion { file: PathBuf, #[arg(long)] name: Option<String> },
    /// A `theorem` section's network morphism: commuting squares and
    /// interconnection compatibility.
    Network { file: PathBuf, #[arg(long)] name: Option<String> },
    /// A `theorem` section end to end: hypothesis and conclusion.
    Theorem { file: PathBuf, #[arg(long)] name: Option<String> },
}

/// Input errors exit with 2, failed verifications with 1.
enum Failure {
    Input(String),
    Verification,
}

impl From<hysys::Error> for Failure {
    fn from(e: hysys::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type RunResult = Result<(), Failure>;

fn load(path: &Path) -> Result<Scenario, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|diags| {
        let msgs: Vec<String> =
            diags.iter().map(|d| format!("{}:{d}", path.display())).collect();
        Failure::Input(msgs.join("\n"))
    })
}

fn pick_name<'a, T>(
    items: &'a [T],
    get: impl Fn(&T) -> &str,
    name: &Option<String>,
    kind: &str,
) -> Result<&'a str, Failure> {
    match name {
        Some(n) => items
            .iter()
            .map(|i| get(i))
            .find(|g| *g == n)
            .ok_or_else(|| Failure::Input(format!("no {kind} named `{n}`"))),
        None => items
            .first()
            .map(get)
            .ok_or_else(|| Failure::Input(format!("the file declares no {kind}"))),
    }
}

fn emit(out: &Option<PathBuf>, stem: &str, report: &serde_json::Value) -> RunResult {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("{stem}.json")), text + "\n")?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn emit_raw(out: &Option<PathBuf>, file: &str, content: &str) -> RunResult {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(file), content)?;
    }
    Ok(())
}

fn gate(pass: bool) -> RunResult {
    if pass {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn run_execution(
    g: &GlobalOpts,
    stem: &str,
    control: &DeterministicControl,
    x0: &TaggedPoint,
    opts: &IntegratorOptions,
) -> RunResult {
    let exec = execute(control, x0, opts)?;
    let check = verify_execution(&exec, control, f64::max(1e-6, g.tol));
    let fin = exec.final_state();
    let report = json!({
        "start": { "node": x0.node, "coords": x0.coords },
        "jump_times": exec.jump_times(),
        "final_state": fin.map(|p| json!({ "node": p.node, "coords": p.coords })),
        "zeno": exec.zeno,
        "verification": check,
    });
    emit_raw(&g.out, &format!("{stem}.csv"), &exec.trajectory_csv(&control.ssub.total))?;
    emit_raw(&g.out, &format!("{stem}-jumps.csv"), &exec.jumps_csv(&control.ssub.total))?;
    emit(&g.out, stem, &report)?;
    gate(check.pass)
}

fn cmd_simulate(g: &GlobalOpts, file: &Path, name: &Option<String>) -> RunResult {
    let sc = load(file)?;
    let sim = pick_name(&sc.simulations, |s| &s.name, name, "simulation")?.to_string();
    let (control, x0, mut opts) = sc.build_simulation(&sim)?;
    // Explicit command-line flags would be shadowed by scenario defaults
    // otherwise; the scenario file wins only for values it sets.
    if opts.step == IntegratorOptions::default().step {
        opts.step = g.step;
    }
    if opts.horizon == IntegratorOptions::default().horizon {
        opts.horizon = g.horizon;
    }
    run_execution(g, &sim, &control, &x0, &opts)
}

fn cmd_verify(g: &GlobalOpts, what: &VerifyTarget) -> RunResult {
    match what {
        VerifyTarget::Control { file, name } => {
            let sc = load(file)?;
            let n = pick_name(&sc.controls, |c| &c.name, name, "control")?.to_string();
            let control = sc.build_control(&n)?;
            let report = check_control(&control, g.samples, g.seed, g.tol);
            emit(&g.out, "control-report", &json!({ "name": n, "report": report }))?;
            gate(report.pass)
        }
        VerifyTarget::Morphism { file, name } => {
            let sc = load(file)?;
            let n = pick_name(&sc.morphisms, |m| &m.name, name, "morphism")?.to_string();
            let m = sc.build_morphism(&n)?;
            let report = check_morphism(&m, g.samples, g.seed, g.tol);
            emit(&g.out, "morphism-report", &json!({ "name": n, "report": report }))?;
            gate(report.pass)
        }
        VerifyTarget::Submersion { file, name } => {
            let sc = load(file)?;
            let n = pick_name(&sc.submersions, |m| &m.name, name, "submersion")?.to_string();
            let s = sc.build_submersion(&n)?;
            let report = check_submersion(&s, g.samples, g.seed, g.tol);
            emit(&g.out, "submersion-report", &json!({ "name": n, "report": report }))?;
            gate(report.pass)
        }
        VerifyTarget::Network { file, name } => {
            let sc = load(file)?;
            let n = pick_name(&sc.theorems, |t| &t.name, name, "theorem")?.to_string();
            let (_, nm, _, _) = sc.build_theorem(&n)?;
            let report = check_network_morphism(&nm, g.samples, g.seed, g.tol)?;
            emit(&g.out, "network-report", &json!({ "name": n, "report": report }))?;
            gate(report.pass)
        }
        VerifyTarget::Theorem { file, name } => {
            let sc = load(file)?;
            let n = pick_name(&sc.theorems, |t| &t.name, name, "theorem")?.to_string();
            let (_, nm, w, v) = sc.build_theorem(&n)?;
            let report = verify_main_theorem(&nm, &w, &v, g.samples, g.seed, g.tol)?;
            emit(&g.out, "theorem-report", &json!({ "name": n, "report": report }))?;
            gate(report.pass)
        }
    }
}

fn cmd_stability(g: &GlobalOpts, map: &str) -> RunResult {
    let (f, x_field, y_field, x0, grid_lo, grid_hi): (_, hysys::stability::VectorField, hysys::stability::VectorField, _, f64, f64) =
        match map {
            "decay-to-cubic" => (
                decay_to_cubic_map(),
                Arc::new(|x: &[f64]| vec![-x[0]]) as _,
                Arc::new(|y: &[f64]| vec![-y[0].powi(3)]) as _,
                vec![1.0],
                // `f` is only defined below e^{1/2}.
                0.2,
                1.6,
            ),
            "neg-log" => (
                neg_log_map(),
                Arc::new(|x: &[f64]| vec![-x[0]]) as _,
                Arc::new(|_: &[f64]| vec![1.0]) as _,
                vec![1.0],
                0.5,
                2.0,
            ),
            other => return Err(Failure::Input(format!("unknown map `{other}`"))),
        };
    let grid: Vec<Vec<f64>> =
        (0..40).map(|i| vec![grid_lo + (grid_hi - grid_lo) * i as f64 / 39.0]).collect();
    let eps_grid = [0.05, 0.1, 0.2];
    let horizon = 50.0;
    let opts = StabilitySearchOpts::default();
    let report = stability_transport_demo(
        &f, &x_field, &y_field, &x0, &grid, &eps_grid, horizon, f64::max(1e-7, g.tol), &opts,
    )
    .map_err(|e| Failure::Input(e.to_string()))?;
    emit_raw(&g.out, "stability-source.csv", &report.source.table_csv())?;
    emit_raw(&g.out, "stability-image.csv", &report.image.table_csv())?;
    let pass = report.pass;
    emit(&g.out, "stability-report", &json!({ "map": map, "report": report }))?;
    gate(pass)
}

fn cmd_finite(g: &GlobalOpts, instances: u64) -> RunResult {
    let reference_sizes = vec![vec![2, 4, 3], vec![1, 2]];
    let omega = finite_cat::omega(&reference_sizes)?;
    let omega_ok = omega.round_trips();
    let witness = finite_cat::check_lax_strictness();
    let mut theorem_failures = Vec::new();
    for seed in 0..instances {
        let inst = finite_cat::discrete_instance(g.seed.wrapping_add(seed));
        let rep = finite_cat::discrete_network_theorem(&inst)?;
        if rep.conclusion_ok != Some(true) {
            theorem_failures.push(seed);
        }
    }
    let pass = omega_ok && witness.is_some() && theorem_failures.is_empty();
    let report = json!({
        "omega": { "coproduct_size": omega.coproduct_size, "product_size": omega.product_size, "bijective": omega_ok },
        "lax_strictness_witness": witness,
        "discrete_instances": instances,
        "discrete_failures": theorem_failures,
        "pass": pass,
    });
    emit(&g.out, "finite-report", &report)?;
    gate(pass)
}

fn cmd_demo(g: &GlobalOpts, name: &str) -> RunResult {
    match name {
        "thermostat" => {
            let control = catalog::thermostat_control();
            let mut opts = g.integrator();
            opts.horizon = 12.0;
            run_execution(g, "thermostat", &control, &TaggedPoint::new(1, vec![0.0]), &opts)
        }
        "bouncing-ball" => {
            let control = catalog::bouncing_ball_control(0.5);
            let mut opts = g.integrator();
            opts.event_refine_tol = 1e-9;
            run_execution(g, "bouncing-ball", &control, &TaggedPoint::new(0, vec![0.0, 0.5]), &opts)
        }
        "switched-state" => {
            let control = catalog::switched_state_control();
            run_execution(g, "switched-state", &control, &TaggedPoint::new(0, vec![-1.0, 0.0]), &g.integrator())
        }
        "switched-time" => {
            let control = catalog::switched_time_control();
            run_execution(g, "switched-time", &control, &TaggedPoint::new(0, vec![1.0, 0.0]), &g.integrator())
        }
        "networked-thermostats" => {
            let nt = catalog::networked_thermostats(0.3);
            let theorem = verify_main_theorem(&nt.nm, &nt.w, &nt.v, g.samples.max(100), g.seed, 1e-8)?;
            let mut opts = g.integrator();
            opts.horizon = 10.0;
            let inv = invariance_demo(&nt.nm, &nt.w, &nt.v, &TaggedPoint::new(0, vec![0.3]), &opts)?;
            let pass = theorem.pass && inv.sup_deviation <= 1e-4 && inv.switches >= 2;
            emit(&g.out, "networked-thermostats", &json!({
                "theorem": theorem,
                "invariance": inv,
                "pass": pass,
            }))?;
            gate(pass)
        }
        "stability-transport" => {
            cmd_stability(g, "decay-to-cubic")?;
            cmd_stability(g, "neg-log")
        }
        other => Err(Failure::Input(format!(
            "unknown demo `{other}` (expected thermostat, bouncing-ball, switched-state, switched-time, networked-thermostats, stability-transport)"
        ))),
    }
}

fn run(cli: &Cli) -> RunResult {
    let g = &cli.opts;
    match &cli.command {
        Command::Simulate { file, name } => cmd_simulate(g, file, name),
        Command::Verify { what } => cmd_verify(g, what),
        Command::Stability { map } => cmd_stability(g, map),
        Command::Finite { instances } => cmd_finite(g, *instances),
        Command::Demo { name } => cmd_demo(g, name),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
