//! Command-line front end: runs epidemic scenarios, integrates single-region
//! compartmental baselines, scores finished runs against observed totals,
//! grid-searches parameters, and lints scenario files.
//!
//! Exit codes: 0 success, 2 user or configuration error, 3 I/O error.
//! All outputs are plain data files; rerunning an identical invocation
//! reproduces them byte for byte (wall-clock data is confined to
//! `timing.json`).

mod manifest;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use manifest::Manifest;
use metapop::scenario::{load_scenario_file, validate};
use metapop::{analysis, calibrate, report, sars, Error, OdeModel, OdeParams, OdeState, Scenario};

#[derive(Parser)]
#[command(
    name = "metapop",
    version,
    about = "Deterministic metapopulation epidemic simulator",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write time series, routes, summary, and manifest
    Run(RunArgs),
    /// Integrate a single-population SIR or SEIR baseline to CSV
    Baseline(BaselineArgs),
    /// Score a finished run's cumulative totals against observed data
    Compare(CompareArgs),
    /// Grid-search epidemic parameters against observed totals
    Calibrate(CalibrateArgs),
    /// Check a scenario file and report every violation
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Bundled scenario name (sars8, sars8-aggregated, sars30, sars30-onset)
    /// or path to a scenario TOML file
    scenario: String,
    /// Directory the run artifacts are written into
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Parameter override, repeatable: --set p_global=1e-7
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Restrict the emitted time series to an inclusive cycle range, e.g. 45:75
    #[arg(long, value_name = "FROM:TO")]
    window: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Sir,
    Seir,
}

#[derive(Args)]
struct BaselineArgs {
    /// Compartment structure to integrate
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Transmission rate (per susceptible per infectious per unit time)
    #[arg(long)]
    beta: f64,
    /// Stage exit rate; 1/lambda is the mean time spent in a stage
    #[arg(long)]
    lambda: f64,
    /// Mean stage duration; must equal 1/lambda when given
    #[arg(long)]
    tau: Option<f64>,
    /// Total population
    #[arg(long)]
    population: f64,
    /// People infectious at time zero
    #[arg(long, default_value_t = 1.0)]
    initial_infectious: f64,
    /// People exposed at time zero (seir only)
    #[arg(long, default_value_t = 0.0)]
    initial_exposed: f64,
    /// Integrator step size
    #[arg(long)]
    dt: f64,
    /// Integration end time
    #[arg(long)]
    horizon: f64,
    /// Trajectory CSV path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Directory holding a finished run (its timeseries.csv is read)
    #[arg(long, value_name = "DIR")]
    run: PathBuf,
    /// Observed totals CSV: a file path, or bundled:<name> for packaged data
    #[arg(long)]
    observed: String,
    /// Fold simulated regions into one observed label, repeatable:
    /// --group china=beijing,guangdong,hebei
    #[arg(long = "group", value_name = "LABEL=A,B,...")]
    group: Vec<String>,
    /// How many of the farthest-off rows to print
    #[arg(long, default_value_t = 8)]
    top: usize,
    /// Comparison CSV path; defaults to <run>/comparison.csv
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Bundled scenario name or path to a scenario TOML file
    scenario: String,
    /// TOML file whose [grid] table lists candidate values per parameter
    #[arg(long)]
    grid: PathBuf,
    /// Observed totals CSV: a file path, or bundled:<name> for packaged data
    #[arg(long)]
    observed: String,
    /// Directory the calibration artifacts are written into
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Fold simulated regions into one observed label, repeatable
    #[arg(long = "group", value_name = "LABEL=A,B,...")]
    group: Vec<String>,
    /// Parameter override applied before the grid, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads for grid evaluation; outputs do not depend on it
    #[arg(long)]
    jobs: Option<usize>,
    /// Refuse grids with more points than this
    #[arg(long)]
    cap: Option<u64>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Bundled scenario name or path to a scenario TOML file
    scenario: String,
    /// Parameter override, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    // Die quietly when a downstream pipe closes (`metapop baseline ... | head`),
    // like other line-oriented tools, instead of panicking mid-write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn dispatch(cli: Cli) -> metapop::Result<()> {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match cli.command {
        Command::Run(args) => cmd_run(args, argv),
        Command::Baseline(args) => cmd_baseline(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Calibrate(args) => cmd_calibrate(args, argv),
        Command::Validate(args) => cmd_validate(args),
    }
}

fn cmd_run(args: RunArgs, argv: Vec<String>) -> metapop::Result<()> {
    let started = Instant::now();
    let overrides = parse_overrides(&args.set)?;
    let scenario = load_scenario(&args.scenario, &overrides)?;
    check_valid(&scenario)?;
    let window = args.window.as_deref().map(parse_window).transpose()?;

    let report = metapop::run(&scenario)?;
    let routes = metapop::extract_routes(&report);
    let summary = analysis::summarize(&report);

    std::fs::create_dir_all(&args.out)
        .map_err(|e| Error::io(args.out.display().to_string(), e))?;
    let mut man = Manifest::new("run", argv);
    man.add_inputs(&scenario.inputs);

    let ts_path = args.out.join("timeseries.csv");
    let mut buf = Vec::new();
    report
        .write_timeseries_csv(&mut buf, window)
        .map_err(|e| Error::io(ts_path.display().to_string(), e))?;
    write_file(&ts_path, &buf)?;
    man.outputs.push("timeseries.csv".into());

    let routes_path = args.out.join("routes.csv");
    let mut buf = Vec::new();
    report
        .write_routes_csv(&routes, &mut buf)
        .map_err(|e| Error::io(routes_path.display().to_string(), e))?;
    write_file(&routes_path, &buf)?;
    man.outputs.push("routes.csv".into());

    let summary_path = args.out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::data(summary_path.display().to_string(), e.to_string()))?;
    write_file(&summary_path, (text + "\n").as_bytes())?;
    man.outputs.push("summary.json".into());

    man.write(&args.out)?;
    manifest::write_timing(&args.out, started)?;

    println!(
        "run {}: {} regions, {} cycles, total cumulative exposures {}",
        scenario.label,
        report.regions.len(),
        scenario.params.run_cycles,
        summary.total_cumulative_exposed
    );
    println!("outputs in {}", args.out.display());
    Ok(())
}

fn cmd_baseline(args: BaselineArgs) -> metapop::Result<()> {
    let model = match args.model {
        ModelArg::Sir => OdeModel::Sir,
        ModelArg::Seir => OdeModel::Seir,
    };
    if args.initial_infectious < 0.0 || args.initial_exposed < 0.0 {
        return Err(Error::config("initial compartment counts must be >= 0"));
    }
    if model == OdeModel::Sir && args.initial_exposed != 0.0 {
        return Err(Error::config("--initial-exposed only applies to the seir model"));
    }
    let params = OdeParams {
        beta: args.beta,
        lambda: args.lambda,
        tau: args.tau.or(match model {
            OdeModel::Seir => Some(1.0 / args.lambda),
            OdeModel::Sir => None,
        }),
        population: args.population,
    };
    let initial = OdeState {
        time: 0.0,
        s: args.population - args.initial_infectious - args.initial_exposed,
        e: args.initial_exposed,
        i: args.initial_infectious,
        r: 0.0,
    };
    if initial.s < 0.0 {
        return Err(Error::config("initial infectious + exposed exceed the population"));
    }
    let trajectory = metapop::integrate(model, &params, &initial, args.dt, args.horizon)?;

    let mut text = String::new();
    match model {
        OdeModel::Sir => text.push_str("time,susceptible,infectious,removed\n"),
        OdeModel::Seir => text.push_str("time,susceptible,exposed,infectious,removed\n"),
    }
    for st in &trajectory {
        match model {
            OdeModel::Sir => writeln!(text, "{},{},{},{}", st.time, st.s, st.i, st.r).unwrap(),
            OdeModel::Seir => {
                writeln!(text, "{},{},{},{},{}", st.time, st.s, st.e, st.i, st.r).unwrap()
            }
        }
    }
    match &args.out {
        Some(path) => write_file(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> metapop::Result<()> {
    let ts_path = args.run.join("timeseries.csv");
    let ts_label = ts_path.display().to_string();
    let ts_text = std::fs::read_to_string(&ts_path).map_err(|e| Error::io(ts_label.clone(), e))?;
    let sim = report::read_timeseries_csv(&ts_label, &ts_text)?;
    let (obs_label, obs_text) = read_observed_arg(&args.observed)?;
    let observed = report::read_observed(&obs_label, &obs_text)?;
    let groups = parse_groups(&args.group)?;

    let cmp = metapop::compare(&sim, &observed, &groups)?;
    for id in &cmp.sim_only {
        eprintln!("warning: simulated region {id} has no observed value");
    }
    for id in &cmp.obs_only {
        eprintln!("warning: observed label {id} matches no simulated region");
    }

    let out_path = args.out.unwrap_or_else(|| args.run.join("comparison.csv"));
    let mut text = String::from("label,simulated,observed,log_ratio\n");
    for row in &cmp.rows {
        writeln!(text, "{},{},{},{}", row.label, row.simulated, row.observed, row.log_ratio)
            .unwrap();
    }
    write_file(&out_path, text.as_bytes())?;

    println!("loss {} over {} matched rows", cmp.loss, cmp.rows.len());
    let ranked = cmp.outliers();
    let k = args.top.min(ranked.len());
    println!("top {k} outliers by |log ratio|:");
    for row in &ranked[..k] {
        println!(
            "  {}: simulated {}, observed {}, log ratio {}",
            row.label, row.simulated, row.observed, row.log_ratio
        );
    }
    println!("comparison written to {}", out_path.display());
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs, argv: Vec<String>) -> metapop::Result<()> {
    let started = Instant::now();
    let overrides = parse_overrides(&args.set)?;
    let scenario = load_scenario(&args.scenario, &overrides)?;
    check_valid(&scenario)?;
    let grid_label = args.grid.display().to_string();
    let grid_text =
        std::fs::read_to_string(&args.grid).map_err(|e| Error::io(grid_label.clone(), e))?;
    let axes = calibrate::read_grid(&grid_label, &grid_text)?;
    let (obs_label, obs_text) = read_observed_arg(&args.observed)?;
    let observed = report::read_observed(&obs_label, &obs_text)?;
    let groups = parse_groups(&args.group)?;

    let fit = metapop::calibrate(&scenario, &observed, &groups, &axes, args.cap, args.jobs)?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| Error::io(args.out.display().to_string(), e))?;
    let mut man = Manifest::new("calibrate", argv);
    man.add_inputs(&scenario.inputs);
    man.add_input(&grid_label, &grid_text);
    man.add_input(&obs_label, &obs_text);

    let mut surface = String::from(
        "p_global,d_global,d_local,c1,c2,incubation_period,infectious_period,run_cycles,loss\n",
    );
    for point in &fit.surface {
        let p = &point.params;
        writeln!(
            surface,
            "{},{},{},{},{},{},{},{},{}",
            p.p_global,
            p.d_global,
            p.d_local,
            p.c1,
            p.c2,
            p.incubation_period,
            p.infectious_period,
            p.run_cycles,
            point.loss
        )
        .unwrap();
    }
    let surface_path = args.out.join("loss_surface.csv");
    write_file(&surface_path, surface.as_bytes())?;
    man.outputs.push("loss_surface.csv".into());

    let best = fit.best();
    let best_path = args.out.join("best_params.toml");
    let body = toml::to_string(&best.params)
        .map_err(|e| Error::data(best_path.display().to_string(), e.to_string()))?;
    write_file(&best_path, format!("# loss = {}\n{}", best.loss, body).as_bytes())?;
    man.outputs.push("best_params.toml".into());

    man.write(&args.out)?;
    manifest::write_timing(&args.out, started)?;

    let p = &best.params;
    println!("evaluated {} grid points", fit.surface.len());
    println!("best loss {} at grid index {}", best.loss, fit.best_index);
    println!(
        "  p_global {} d_global {} d_local {} c1 {} c2 {} periods {}/{} cycles {}",
        p.p_global,
        p.d_global,
        p.d_local,
        p.c1,
        p.c2,
        p.incubation_period,
        p.infectious_period,
        p.run_cycles
    );
    println!("outputs in {}", args.out.display());
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> metapop::Result<()> {
    let overrides = parse_overrides(&args.set)?;
    let scenario = load_scenario(&args.scenario, &overrides)?;
    check_valid(&scenario)?;
    println!(
        "ok: {} ({} regions, {} cycles)",
        scenario.label,
        scenario.profiles.len(),
        scenario.params.run_cycles
    );
    Ok(())
}

/// Resolves a scenario argument: bundled name first, file path otherwise.
fn load_scenario(arg: &str, overrides: &[(String, String)]) -> metapop::Result<Scenario> {
    if sars::is_bundled(arg) {
        sars::load_bundled(arg, overrides)
    } else {
        load_scenario_file(Path::new(arg), overrides)
    }
}

/// Prints loader warnings, then every validation violation; any violation
/// is a user error.
fn check_valid(scenario: &Scenario) -> metapop::Result<()> {
    for w in &scenario.warnings {
        eprintln!("warning: {w}");
    }
    let violations = validate(scenario);
    if violations.is_empty() {
        return Ok(());
    }
    for v in &violations {
        eprintln!("violation: {v}");
    }
    Err(Error::config(format!(
        "scenario {} has {} validation violation(s)",
        scenario.label,
        violations.len()
    )))
}

/// Observed totals come from a real file or, with the `bundled:` prefix,
/// from data compiled into the library.
fn read_observed_arg(arg: &str) -> metapop::Result<(String, String)> {
    if let Some(rest) = arg.strip_prefix("bundled:") {
        Ok((arg.to_string(), sars::bundled_file(rest)?.to_string()))
    } else {
        let text = std::fs::read_to_string(arg).map_err(|e| Error::io(arg, e))?;
        Ok((arg.to_string(), text))
    }
}

fn parse_overrides(pairs: &[String]) -> metapop::Result<Vec<(String, String)>> {
    pairs
        .iter()
        .map(|pair| {
            pair.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::config(format!("override `{pair}` must look like key=value")))
        })
        .collect()
}

fn parse_groups(pairs: &[String]) -> metapop::Result<BTreeMap<String, Vec<String>>> {
    let mut groups = BTreeMap::new();
    for pair in pairs {
        let (label, members) = pair.split_once('=').ok_or_else(|| {
            Error::config(format!("group `{pair}` must look like label=member,member"))
        })?;
        let members: Vec<String> = members
            .split(',')
            .map(|m| m.trim().to_string())
            .filter(|m| !m.is_empty())
            .collect();
        if label.trim().is_empty() || members.is_empty() {
            return Err(Error::config(format!(
                "group `{pair}` needs a label and at least one member"
            )));
        }
        groups.insert(label.trim().to_string(), members);
    }
    Ok(groups)
}

fn parse_window(range: &str) -> metapop::Result<(u32, u32)> {
    let parse = |s: &str| {
        s.trim()
            .parse::<u32>()
            .map_err(|_| Error::config(format!("window `{range}`: `{s}` is not a cycle number")))
    };
    let (a, b) = range
        .split_once(':')
        .ok_or_else(|| Error::config(format!("window `{range}` must look like FROM:TO")))?;
    let (from, to) = (parse(a)?, parse(b)?);
    if from > to {
        return Err(Error::config(format!("window `{range}` is empty: {from} > {to}")));
    }
    Ok((from, to))
}

fn write_file(path: &Path, bytes: &[u8]) -> metapop::Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}
