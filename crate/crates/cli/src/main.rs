mod failure;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::LevelFilter;
use serde::{Deserialize, Serialize};

use failure::Failure;
use hilbert16::bounds::{
    degree_report, quadratic_verdict, quartic_bound, quartic_table, system_report, BehaviorCensus, BoundReport,
    QuadraticVerdict,
};
use hilbert16::implicit_curve::{div_curve_report, DEFAULT_GRID};
use hilbert16::ode_oracle::{cycle_energy_check, find_limit_cycle, OracleOptions, Section, DEFAULT_STEP, DEFAULT_TIME_CAP};
use hilbert16::solver2d::contact_points;
use hilbert16::variational::{
    continuation, descend_many, el_residual, energy_e0, morse_census, morse_index, winding, DescendOptions,
    DescendOutcome, DiscretizedPath, EnergyConfig, MorseCensus, MorseIndex, StepPolicy, Termination, DEFAULT_GRAD_TOL,
    DEFAULT_K,
};
use hilbert16::{Box2, PlanarSystem};

#[derive(Parser, Debug)]
#[command(name = "hilbert16", version, about = "Limit-cycle bounds and diagnostics for planar polynomial systems")]
struct Cli {
    /// System file: JSON object with string fields "P", "Q" and optional "name".
    #[arg(long, global = true)]
    system: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Search window lo:hi for both axes.
    #[arg(long, global = true, allow_hyphen_values = true, default_value = "-10:10")]
    window: String,
    #[arg(long = "window-x", global = true, allow_hyphen_values = true)]
    window_x: Option<String>,
    #[arg(long = "window-y", global = true, allow_hyphen_values = true)]
    window_y: Option<String>,
    /// Marching-squares cells per axis.
    #[arg(long, global = true, default_value_t = DEFAULT_GRID)]
    grid: usize,
    /// Samples per discretized path.
    #[arg(long = "K", global = true, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, global = true, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Precondition descent steps with the inverse H2 Gram operator.
    #[arg(long = "h2-precondition", global = true)]
    h2_precondition: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hilbert-number bounds from a degree or from a system.
    Bounds(BoundsArgs),
    /// Connected components of the divergence curve.
    Divcurve(DivcurveArgs),
    /// Contact points of the field with the divergence curve.
    Contacts(ContactsArgs),
    /// Limit cycle by shooting on a Poincare section.
    Oracle(OracleArgs),
    /// Steepest descent of the path energy.
    Descend(DescendArgs),
    /// Morse-index census of critical paths.
    Census(CensusArgs),
    /// Check a JSON report written by this tool.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[arg(long, conflicts_with = "table")]
    degree: Option<u32>,
    /// Print quartic_bound for n = 2..=N_MAX as a text table.
    #[arg(long, value_name = "N_MAX")]
    table: Option<u32>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args, Debug)]
struct DivcurveArgs {
    /// Polyline vertices as CSV (component, x, y).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ContactsArgs {
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// `x=c+`, `x=c-`, `y=c+` or `y=c-`: the line and crossing direction.
    #[arg(long, allow_hyphen_values = true, default_value = "x=0+")]
    section: String,
    /// Starting guess `x,y`; defaults to the section point shifted by one unit along it.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    h: f64,
    #[arg(long = "time-cap", default_value_t = DEFAULT_TIME_CAP)]
    time_cap: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// One period as CSV (t, x, y).
    #[arg(long = "orbit-csv")]
    orbit_csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum StepArg {
    Bb,
    Backtracking,
}

#[derive(Args, Debug)]
struct StartArgs {
    /// `circle:R`, `circle:R@cx,cy`, `oracle` or `csv:FILE`.
    #[arg(long, default_value = "circle:1.3")]
    init: String,
    /// Smooth radial noise amplitude applied to each start.
    #[arg(long)]
    noise: Option<f64>,
    /// Number of starts; start i uses noise seed `seed + i`.
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long = "max-iters", default_value_t = 50_000)]
    max_iters: usize,
    #[arg(long = "grad-tol", default_value_t = DEFAULT_GRAD_TOL)]
    grad_tol: f64,
    #[arg(long, value_enum, default_value_t = StepArg::Bb)]
    step: StepArg,
    /// Amplitude factor of the auxiliary path (0 for none); used when eps > 0.
    #[arg(long, default_value_t = 0.01)]
    amp: f64,
}

#[derive(Args, Debug)]
struct DescendArgs {
    #[command(flatten)]
    start: StartArgs,
    /// Comma-separated eps values: run a warm-started continuation instead.
    #[arg(long)]
    schedule: Option<String>,
    /// Also compute the Morse index of every converged path.
    #[arg(long)]
    morse: bool,
    /// Trace rows (run, iter, energy, grad_norm, winding, step).
    #[arg(long = "trace-csv")]
    trace_csv: Option<PathBuf>,
    /// Final path samples (run, t, x, y).
    #[arg(long = "path-csv")]
    path_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CensusArgs {
    /// Census of given indices, e.g. `0,1,0`, without running descents.
    #[arg(long)]
    indices: Option<String>,
    #[command(flatten)]
    start: StartArgs,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    file: PathBuf,
}

#[derive(Deserialize)]
struct SystemFile {
    #[serde(rename = "P")]
    p: String,
    #[serde(rename = "Q")]
    q: String,
    name: Option<String>,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Failure::Usage(msg.into()).into()
}

fn load_system(cli: &Cli) -> Result<(PlanarSystem, Option<String>)> {
    let path = cli.system.as_deref().ok_or_else(|| usage("this command needs --system FILE"))?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: SystemFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let sys = PlanarSystem::parse(&file.p, &file.q).with_context(|| format!("polynomials in {}", path.display()))?;
    Ok((sys, file.name))
}

fn parse_range(text: &str) -> Result<(f64, f64)> {
    let (lo, hi) = text.split_once(':').ok_or_else(|| usage(format!("expected lo:hi, got `{text}`")))?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| usage(format!("bad number `{s}` in `{text}`")));
    Ok((num(lo)?, num(hi)?))
}

fn window(cli: &Cli) -> Result<Box2> {
    let both = parse_range(&cli.window)?;
    let x = cli.window_x.as_deref().map(parse_range).transpose()?.unwrap_or(both);
    let y = cli.window_y.as_deref().map(parse_range).transpose()?.unwrap_or(both);
    Ok(Box2::new(x.0, x.1, y.0, y.1)?)
}

fn parse_point(text: &str) -> Result<[f64; 2]> {
    let (a, b) = text.split_once(',').ok_or_else(|| usage(format!("expected x,y, got `{text}`")))?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| usage(format!("bad number `{s}` in `{text}`")));
    Ok([num(a)?, num(b)?])
}

fn parse_section(text: &str) -> Result<Section> {
    let bad = || usage(format!("section must look like x=0+ or y=-1-, got `{text}`"));
    let (axis, rest) = text.split_once('=').ok_or_else(bad)?;
    let increasing = match rest.chars().last() {
        Some('+') => true,
        Some('-') => false,
        _ => return Err(bad()),
    };
    let c: f64 = rest[..rest.len() - 1].parse().map_err(|_| bad())?;
    match axis.trim() {
        "x" => Ok(Section::vertical(c, increasing)),
        "y" => Ok(Section::horizontal(c, increasing)),
        _ => Err(bad()),
    }
}

fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| usage(format!("bad list entry `{s}` in `{text}`"))))
        .collect()
}

#[derive(Serialize)]
struct SystemBounds {
    name: Option<String>,
    #[serde(flatten)]
    report: BoundReport,
    census: BehaviorCensus,
    #[serde(skip_serializing_if = "Option::is_none")]
    quadratic_verdict: Option<QuadraticVerdict>,
    window: Box2,
    grid: usize,
}

#[derive(Serialize)]
struct TableRow {
    n: u32,
    quartic_bound: u64,
}

#[derive(Serialize)]
struct BoundsTable {
    rows: Vec<TableRow>,
}

fn cmd_bounds(cli: &Cli, args: &BoundsArgs) -> Result<()> {
    if let Some(n_max) = args.table {
        print!("{}", quartic_table(n_max)?);
        if let Some(out) = &cli.out {
            let rows = (2..=n_max).map(|n| Ok(TableRow { n, quartic_bound: quartic_bound(n)? })).collect::<Result<_>>()?;
            output::emit("bounds_table", &BoundsTable { rows }, Some(out))?;
        }
        return Ok(());
    }
    if let Some(n) = args.degree {
        if cli.system.is_some() {
            return Err(usage("give either --degree or --system, not both"));
        }
        return output::emit("bounds", &degree_report(n)?, cli.out.as_deref());
    }
    let (sys, name) = load_system(cli)?;
    let window = window(cli)?;
    let verdict = |contacts| if sys.degree() <= 2 { quadratic_verdict(&sys, contacts).ok() } else { None };
    let curve = match div_curve_report(&sys, window, cli.grid) {
        Ok(c) => c,
        Err(e) => {
            let why = verdict(None).map(|v| format!(" ({:?})", v.outcome)).unwrap_or_default();
            return Err(anyhow::Error::new(e).context(format!("no divergence curve{why}")));
        }
    };
    let contacts = contact_points(&sys, window, args.tol)?;
    let (report, census) = system_report(&sys, &curve, &contacts)?;
    let doc = SystemBounds {
        name,
        report,
        census,
        quadratic_verdict: verdict(Some(&contacts)),
        window,
        grid: cli.grid,
    };
    output::emit("bounds", &doc, cli.out.as_deref())
}

#[derive(Serialize)]
struct VertexRow {
    component: usize,
    x: f64,
    y: f64,
}

fn cmd_divcurve(cli: &Cli, args: &DivcurveArgs) -> Result<()> {
    let (sys, _) = load_system(cli)?;
    let report = div_curve_report(&sys, window(cli)?, cli.grid)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    if let Some(path) = &args.csv {
        let rows = report
            .components
            .iter()
            .enumerate()
            .flat_map(|(i, c)| c.polyline.iter().map(move |v| VertexRow { component: i, x: v[0], y: v[1] }));
        output::write_csv(path, rows)?;
    }
    output::emit("divcurve", &report, cli.out.as_deref())
}

fn cmd_contacts(cli: &Cli, args: &ContactsArgs) -> Result<()> {
    let (sys, _) = load_system(cli)?;
    let report = contact_points(&sys, window(cli)?, args.tol)?;
    output::emit("contacts", &report, cli.out.as_deref())?;
    if !report.is_certified() {
        return Err(Failure::Numeric(format!("{} undecided solver boxes", report.undecided_boxes.len())).into());
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleReport {
    section: Section,
    start: [f64; 2],
    period: Option<f64>,
    closure_error: f64,
    #[serde(rename = "K")]
    k: usize,
    cycle_energy: f64,
    samples: usize,
    h: f64,
}

#[derive(Serialize)]
struct OrbitRow {
    t: f64,
    x: f64,
    y: f64,
}

fn section_start(section: &Section, x0: Option<&str>) -> Result<[f64; 2]> {
    match x0 {
        Some(text) => parse_point(text),
        None => Ok([section.point[0] + section.direction[0], section.point[1] + section.direction[1]]),
    }
}

fn oracle_options(h: f64, time_cap: f64) -> OracleOptions {
    OracleOptions { h, time_cap, ..OracleOptions::default() }
}

fn cmd_oracle(cli: &Cli, args: &OracleArgs) -> Result<()> {
    let (sys, _) = load_system(cli)?;
    let section = parse_section(&args.section)?;
    let x0 = section_start(&section, args.x0.as_deref())?;
    let orbit = find_limit_cycle(&sys, &section, x0, args.tol, &oracle_options(args.h, args.time_cap))?;
    let period = orbit.period;
    eprintln!("period {:.12}", period.unwrap_or(f64::NAN));
    if let Some(path) = &args.orbit_csv {
        let rows = orbit.times.iter().zip(&orbit.points).map(|(&t, p)| OrbitRow { t, x: p[0], y: p[1] });
        output::write_csv(path, rows)?;
    }
    let report = OracleReport {
        section,
        start: orbit.points[0],
        period,
        closure_error: orbit.closure_error(),
        k: cli.k,
        cycle_energy: cycle_energy_check(&sys, &orbit, cli.k)?,
        samples: orbit.points.len() - 1,
        h: args.h,
    };
    output::emit("oracle", &report, cli.out.as_deref())
}

fn base_path(cli: &Cli, sys: &PlanarSystem, init: &str) -> Result<DiscretizedPath> {
    if let Some(rest) = init.strip_prefix("circle:") {
        let (r, center) = match rest.split_once('@') {
            Some((r, c)) => (r, parse_point(c)?),
            None => (rest, [0.0, 0.0]),
        };
        let r: f64 = r.parse().map_err(|_| usage(format!("bad radius in `{init}`")))?;
        return Ok(DiscretizedPath::circle(cli.k, center, r)?);
    }
    if init == "oracle" {
        let section = Section::vertical(0.0, true);
        let x0 = section_start(&section, None)?;
        let orbit = find_limit_cycle(sys, &section, x0, 1e-10, &OracleOptions::default())?;
        let path = orbit.to_path(cli.k)?;
        return Ok(if winding(&path).number == Some(-1) { path.reversed() } else { path });
    }
    if let Some(file) = init.strip_prefix("csv:") {
        #[derive(Deserialize)]
        struct Row {
            x: f64,
            y: f64,
        }
        let mut reader = csv::Reader::from_path(file).with_context(|| format!("reading {file}"))?;
        let samples = reader.deserialize::<Row>().map(|r| r.map(|r| [r.x, r.y])).collect::<Result<Vec<_>, _>>()?;
        let path = DiscretizedPath::new(samples)?;
        return Ok(if path.k() == cli.k { path } else { path.resample(cli.k)? });
    }
    Err(usage(format!("unknown --init `{init}`")))
}

fn starts(cli: &Cli, sys: &PlanarSystem, args: &StartArgs, default_noise: f64, default_starts: usize) -> Result<Vec<DiscretizedPath>> {
    let base = base_path(cli, sys, &args.init)?;
    let noise = args.noise.unwrap_or(default_noise);
    let n = args.starts.unwrap_or(default_starts);
    if n == 0 {
        return Err(usage("--starts must be at least 1"));
    }
    Ok((0..n as u64)
        .map(|i| if noise == 0.0 { base.clone() } else { base.with_radial_noise(noise, cli.seed.wrapping_add(i)) })
        .collect())
}

fn energy_config(cli: &Cli, amp: f64) -> Result<EnergyConfig> {
    if cli.eps > 0.0 && amp > 0.0 {
        Ok(EnergyConfig::with_auxiliary(cli.eps, cli.k, amp)?)
    } else {
        Ok(EnergyConfig::new(cli.eps, None)?)
    }
}

fn descend_options(cli: &Cli, args: &StartArgs) -> DescendOptions {
    DescendOptions {
        step: match args.step {
            StepArg::Bb => StepPolicy::BarzilaiBorwein,
            StepArg::Backtracking => StepPolicy::Backtracking,
        },
        max_iters: args.max_iters,
        grad_tol: args.grad_tol,
        h2_precondition: cli.h2_precondition,
        ..DescendOptions::default()
    }
}

#[derive(Serialize)]
struct RunSummary {
    run: usize,
    termination: Termination,
    steps: usize,
    energy: f64,
    energy_e0: f64,
    grad_norm: f64,
    winding: Option<i64>,
    el_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    morse: Option<MorseIndex>,
}

#[derive(Serialize)]
struct DescendReport {
    #[serde(rename = "K")]
    k: usize,
    epsilon: f64,
    amplitude_factor: f64,
    h2_precondition: bool,
    step: StepArg,
    init: String,
    runs: Vec<RunSummary>,
}

#[derive(Serialize)]
struct StageSummary {
    epsilon: f64,
    termination: Termination,
    steps: usize,
    energy: f64,
    energy_e0: f64,
    grad_norm: f64,
    el_residual: f64,
    z2_mean: f64,
    z2_var: f64,
    relative_variance: Option<f64>,
    mean_abs_div: f64,
}

#[derive(Serialize)]
struct ContinuationReport {
    #[serde(rename = "K")]
    k: usize,
    amplitude_factor: f64,
    h2_precondition: bool,
    init: String,
    stages: Vec<StageSummary>,
}

#[derive(Serialize)]
struct TraceCsvRow {
    run: usize,
    iter: usize,
    energy: f64,
    grad_norm: f64,
    winding: i64,
    step: f64,
}

#[derive(Serialize)]
struct PathCsvRow {
    run: usize,
    t: f64,
    x: f64,
    y: f64,
}

fn write_artifacts(args: &DescendArgs, outcomes: &[&DescendOutcome]) -> Result<()> {
    if let Some(path) = &args.trace_csv {
        let rows = outcomes.iter().enumerate().flat_map(|(run, o)| {
            o.trace.iter().map(move |r| TraceCsvRow {
                run,
                iter: r.iter,
                energy: r.energy,
                grad_norm: r.grad_norm,
                winding: r.winding,
                step: r.step,
            })
        });
        output::write_csv(path, rows)?;
    }
    if let Some(path) = &args.path_csv {
        let rows = outcomes.iter().enumerate().flat_map(|(run, o)| {
            o.path.samples().iter().enumerate().map(move |(i, p)| PathCsvRow { run, t: o.path.t(i), x: p[0], y: p[1] })
        });
        output::write_csv(path, rows)?;
    }
    Ok(())
}

fn summarize(
    run: usize,
    o: &DescendOutcome,
    sys: &PlanarSystem,
    cfg: &EnergyConfig,
    opts: &DescendOptions,
    morse: bool,
) -> Result<RunSummary> {
    let morse = if morse && o.termination == Termination::Converged {
        Some(morse_index(&o.path, sys, cfg, opts.grad_tol)?)
    } else {
        None
    };
    Ok(RunSummary {
        run,
        termination: o.termination,
        steps: o.accepted_steps(),
        energy: o.energy,
        energy_e0: energy_e0(&o.path, sys),
        grad_norm: o.grad_norm,
        winding: winding(&o.path).number,
        el_residual: el_residual(&o.path, sys, cfg)?,
        morse,
    })
}

fn cmd_descend(cli: &Cli, args: &DescendArgs) -> Result<()> {
    let (sys, _) = load_system(cli)?;
    let opts = descend_options(cli, &args.start);
    let paths = starts(cli, &sys, &args.start, 0.0, 1)?;
    if let Some(schedule) = &args.schedule {
        let schedule: Vec<f64> = parse_list(schedule)?;
        let stages = continuation(&paths[0], &sys, &schedule, args.start.amp, &opts)?;
        write_artifacts(args, &stages.iter().map(|s| &s.outcome).collect::<Vec<_>>())?;
        let stages = stages
            .iter()
            .map(|s| StageSummary {
                epsilon: s.epsilon,
                termination: s.outcome.termination,
                steps: s.outcome.accepted_steps(),
                energy: s.outcome.energy,
                energy_e0: s.energy_e0,
                grad_norm: s.outcome.grad_norm,
                el_residual: s.el_residual,
                z2_mean: s.z_profile.z2_mean,
                z2_var: s.z_profile.z2_var,
                relative_variance: s.z_profile.relative_variance(),
                mean_abs_div: s.z_profile.div.iter().map(|d| d.abs()).sum::<f64>() / s.z_profile.div.len() as f64,
            })
            .collect();
        let report = ContinuationReport {
            k: cli.k,
            amplitude_factor: args.start.amp,
            h2_precondition: cli.h2_precondition,
            init: args.start.init.clone(),
            stages,
        };
        return output::emit("continuation", &report, cli.out.as_deref());
    }
    let cfg = energy_config(cli, args.start.amp)?;
    let outcomes = descend_many(&paths, &sys, &cfg, &opts).into_iter().collect::<Result<Vec<_>, _>>()?;
    write_artifacts(args, &outcomes.iter().collect::<Vec<_>>())?;
    let runs = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| summarize(i, o, &sys, &cfg, &opts, args.morse))
        .collect::<Result<Vec<_>>>()?;
    for r in &runs {
        if r.termination != Termination::Converged {
            log::warn!("run {} stopped ({:?}) at |grad| = {:e}", r.run, r.termination, r.grad_norm);
        }
    }
    let report = DescendReport {
        k: cli.k,
        epsilon: cli.eps,
        amplitude_factor: if cli.eps > 0.0 { args.start.amp } else { 0.0 },
        h2_precondition: cli.h2_precondition,
        step: args.start.step,
        init: args.start.init.clone(),
        runs,
    };
    output::emit("descend", &report, cli.out.as_deref())
}

#[derive(Serialize)]
struct CriticalPath {
    runs: Vec<usize>,
    energy: f64,
    index: usize,
    min_eigenvalue: f64,
}

#[derive(Serialize)]
struct CensusReport {
    #[serde(flatten)]
    census: MorseCensus,
    critical_paths: Vec<CriticalPath>,
    unconverged_runs: Vec<usize>,
}

/// Distance between two closed paths up to a cyclic shift of the samples.
fn shift_distance(a: &DiscretizedPath, b: &DiscretizedPath) -> f64 {
    let (sa, sb) = (a.samples(), b.samples());
    let k = sa.len();
    (0..k)
        .map(|s| (0..k).map(|i| (sa[i][0] - sb[(i + s) % k][0]).hypot(sa[i][1] - sb[(i + s) % k][1])).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

fn cmd_census(cli: &Cli, args: &CensusArgs) -> Result<()> {
    if let Some(list) = &args.indices {
        let indices: Vec<usize> = parse_list(list)?;
        let census = morse_census(&indices);
        let report = CensusReport { census, critical_paths: vec![], unconverged_runs: vec![] };
        return output::emit("census", &report, cli.out.as_deref());
    }
    let (sys, _) = load_system(cli)?;
    let opts = descend_options(cli, &args.start);
    let cfg = energy_config(cli, args.start.amp)?;
    let paths = starts(cli, &sys, &args.start, 0.05, 8)?;
    let outcomes = descend_many(&paths, &sys, &cfg, &opts);
    let mut found: Vec<(DiscretizedPath, CriticalPath)> = Vec::new();
    let mut unconverged = Vec::new();
    for (run, o) in outcomes.into_iter().enumerate() {
        let o = match o {
            Ok(o) if o.termination == Termination::Converged => o,
            Ok(_) | Err(_) => {
                unconverged.push(run);
                continue;
            }
        };
        if let Some((_, c)) = found.iter_mut().find(|(p, _)| shift_distance(p, &o.path) <= 1e-4) {
            c.runs.push(run);
            continue;
        }
        let idx = morse_index(&o.path, &sys, &cfg, opts.grad_tol)?;
        found.push((
            o.path,
            CriticalPath { runs: vec![run], energy: o.energy, index: idx.index, min_eigenvalue: idx.min_eigenvalue },
        ));
    }
    let census = morse_census(&found.iter().map(|(_, c)| c.index).collect::<Vec<_>>());
    let report = CensusReport {
        census,
        critical_paths: found.into_iter().map(|(_, c)| c).collect(),
        unconverged_runs: unconverged,
    };
    output::emit("census", &report, cli.out.as_deref())
}

fn cmd_validate(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    match output::validate(&text) {
        Ok(kind) => {
            println!("{}: valid {kind} report", path.display());
            Ok(())
        }
        Err(why) => Err(Failure::Domain(format!("{}: {why}", path.display())).into()),
    }
}

fn init_logging() {
    let level = match std::env::var("HILBERT16_LOG").as_deref() {
        Ok("quiet") => LevelFilter::Off,
        Ok("info") => LevelFilter::Info,
        Ok("debug") => LevelFilter::Debug,
        _ => LevelFilter::Warn,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match &cli.command {
        Command::Bounds(a) => cmd_bounds(cli, a),
        Command::Divcurve(a) => cmd_divcurve(cli, a),
        Command::Contacts(a) => cmd_contacts(cli, a),
        Command::Oracle(a) => cmd_oracle(cli, a),
        Command::Descend(a) => cmd_descend(cli, a),
        Command::Census(a) => cmd_census(cli, a),
        Command::Validate(a) => cmd_validate(&a.file),
    }
}

fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { failure::USAGE as u8 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(failure::exit_code(&e) as u8)
        }
    }
}
