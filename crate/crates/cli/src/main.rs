use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use excitrans::contributions::{
    default_scheme, greens_contributions, pathway_scheme, susceptibility_contributions, ContributionReport,
    PartitionScheme, SusceptibilityOptions,
};
use excitrans::ensemble::{run_sweep, DisorderSpec, MeasureKind, SweepParameter, SweepSpec};
use excitrans::liouville::{assemble, default_horizon, propagate, DensityMatrix, Liouvillian, OdeOptions};
use excitrans::model::{
    build_site_hamiltonian, diagonalize, initial_state, load_model, parse_model, SystemModel, BUNDLED_FMO,
    DEGENERACY_TOL,
};
use excitrans::Error;

/// Seed used when `--seed` is not given.
const DEFAULT_SEED: u64 = 0;

#[derive(Parser, Debug)]
#[command(name = "excitrans", version, about = "Excitation energy transfer and efficiency partitioning")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Global {
    /// Model file (TOML); the bundled FMO model when omitted.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; written atomically together with `<output>.manifest.json`.
    /// Standard output when omitted.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Integration horizon in ps (default 5/Γ).
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    rel_tol: Option<f64>,
    #[arg(long, global = true)]
    abs_tol: Option<f64>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override the reorganization energy, cm⁻¹.
    #[arg(long, global = true)]
    reorganization_energy: Option<f64>,
    /// Override the temperature, K.
    #[arg(long, global = true)]
    temperature: Option<f64>,
    /// Override the bath cutoff, cm⁻¹.
    #[arg(long, global = true)]
    cutoff: Option<f64>,
    /// Override a trapping rate as SITE=RATE (one-based site, ps⁻¹); repeatable.
    #[arg(long, global = true, value_parser = parse_trap)]
    trap_rate: Vec<(usize, f64)>,
    /// Override the recombination rate, ps⁻¹.
    #[arg(long, global = true)]
    gamma_recomb: Option<f64>,
    /// Override the correlation radius, Å.
    #[arg(long, global = true)]
    correlation_radius: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Propagate the density matrix and write the trajectory as CSV.
    Simulate {
        /// Output spacing in ps.
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        /// Add |ρ_mn| columns for every coherence.
        #[arg(long)]
        coherences: bool,
    },
    /// Partition the efficiency into process contributions.
    Contributions {
        #[arg(long, value_enum, default_value_t = MeasureArg::Greens)]
        measure: MeasureArg,
        #[arg(long, value_enum, default_value_t = SchemeArg::Default)]
        scheme: SchemeArg,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Sweep one parameter, optionally over a disorder ensemble.
    Sweep {
        /// Sweep specification (TOML); the flags below are ignored when given.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// reorganization_energy, temperature, correlation_radius or trap_rate:SITE.
        #[arg(long)]
        parameter: Option<String>,
        /// Comma-separated values, or START:STOP:STEP.
        #[arg(long)]
        grid: Option<String>,
        /// Comma-separated subset of ete, greens, susceptibility, transfer_time, pathways.
        #[arg(long, default_value = "ete,greens")]
        measures: String,
        /// Disorder samples per grid point.
        #[arg(long, default_value_t = 0)]
        samples: usize,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Check a model file and print physics diagnostics.
    Validate,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum MeasureArg {
    Greens,
    Susceptibility,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum SchemeArg {
    Default,
    Pathways,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

fn parse_trap(s: &str) -> Result<(usize, f64), String> {
    let (site, rate) = s.split_once('=').ok_or("expected SITE=RATE")?;
    let site: usize = site.trim().parse().map_err(|_| format!("bad site '{site}'"))?;
    let rate: f64 = rate.trim().parse().map_err(|_| format!("bad rate '{rate}'"))?;
    Ok((site, rate))
}

/// Exit codes by error class.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Precondition(_) => 3,
        Error::Numerical(_) | Error::Integrator { .. } => 4,
        Error::Io(_) => 1,
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    model_source: String,
    model_hash: String,
    seed: u64,
    options: &'a Global,
    overrides: Vec<String>,
    model: &'a SystemModel,
    started_unix: u64,
    finished_unix: u64,
}

struct Context {
    global: Global,
    model: SystemModel,
    model_source: String,
    overrides: Vec<String>,
    started: u64,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl Context {
    fn new(global: Global) -> excitrans::Result<Self> {
        let (mut model, model_source) = match &global.model {
            Some(p) => (load_model(p)?, p.display().to_string()),
            None => (parse_model(BUNDLED_FMO)?, "bundled:fmo.model".to_owned()),
        };
        let mut overrides = Vec::new();
        let mut set = |name: &str, slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                overrides.push(format!("{name}: {} -> {v}", *slot));
                *slot = v;
            }
        };
        set("reorganization_energy", &mut model.reorganization_energy, global.reorganization_energy);
        set("temperature", &mut model.temperature, global.temperature);
        set("cutoff", &mut model.cutoff, global.cutoff);
        set("gamma_recomb", &mut model.recombination_rate, global.gamma_recomb);
        set("correlation_radius", &mut model.correlation_radius, global.correlation_radius);
        for &(site, rate) in &global.trap_rate {
            if site == 0 || site > model.n_sites() {
                return Err(Error::config(format!("--trap-rate site {site} is outside 1..={}", model.n_sites())));
            }
            overrides.push(format!("trap_rate[{site}]: {} -> {rate}", model.trap_rates[site - 1]));
            model.trap_rates[site - 1] = rate;
        }
        model.validate()?;
        Ok(Context { global, model, model_source, overrides, started: now() })
    }

    fn ode(&self) -> excitrans::Result<OdeOptions> {
        let mut o = OdeOptions::default();
        if let Some(r) = self.global.rel_tol {
            o.rel_tol = r;
        }
        if let Some(a) = self.global.abs_tol {
            o.abs_tol = a;
        }
        if !(o.rel_tol > 0.0 && o.abs_tol > 0.0) {
            return Err(Error::config("tolerances must be positive"));
        }
        Ok(o)
    }

    fn format(&self, explicit: Option<Format>, fallback: Format) -> Format {
        explicit.unwrap_or_else(|| match self.global.output.as_ref().and_then(|p| p.extension()) {
            Some(ext) if ext == "json" => Format::Json,
            Some(ext) if ext == "csv" => Format::Csv,
            _ => fallback,
        })
    }

    /// Writes the output (and its manifest) atomically, or to stdout.
    fn emit(&self, command: &str, body: &[u8], seed: u64) -> excitrans::Result<()> {
        let Some(path) = &self.global.output else {
            std::io::stdout().write_all(body)?;
            return Ok(());
        };
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            model_source: self.model_source.clone(),
            model_hash: self.model.hash(),
            seed,
            options: &self.global,
            overrides: self.overrides.clone(),
            model: &self.model,
            started_unix: self.started,
            finished_unix: now(),
        };
        let manifest_json =
            serde_json::to_vec_pretty(&manifest).map_err(|e| Error::numerical(e.to_string()))?;
        let mut manifest_path = path.clone().into_os_string();
        manifest_path.push(".manifest.json");
        let staged_out = stage(path, body)?;
        let staged_manifest = stage(Path::new(&manifest_path), &manifest_json)?;
        staged_out.persist(path).map_err(|e| Error::Io(e.error))?;
        staged_manifest.persist(&manifest_path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }
}

fn stage(path: &Path, body: &[u8]) -> excitrans::Result<tempfile::NamedTempFile> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut f = tempfile::NamedTempFile::new_in(dir)?;
    f.write_all(body)?;
    f.flush()?;
    Ok(f)
}

fn setup(ctx: &Context) -> excitrans::Result<(Liouvillian, DensityMatrix)> {
    let l = assemble(&ctx.model)?;
    let rho0 = initial_state(&ctx.model, &ctx.model.initial_state)?;
    Ok((l, rho0))
}

fn horizon(ctx: &Context, l: &Liouvillian) -> excitrans::Result<f64> {
    let h = ctx.global.horizon.unwrap_or_else(|| default_horizon(l));
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::config("--horizon must be positive and finite"));
    }
    Ok(h)
}

fn cmd_simulate(ctx: &Context, dt: f64, coherences: bool) -> excitrans::Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config("--dt must be positive"));
    }
    let (l, rho0) = setup(ctx)?;
    let h = horizon(ctx, &l)?;
    let steps = (h / dt).floor() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).filter(|t| *t <= h).collect();
    let traj = propagate(&l, &rho0, h, &grid, &ctx.ode()?)?;
    let mut body = Vec::new();
    traj.write_csv(&mut body, coherences)?;
    ctx.emit("simulate", &body, ctx.global.seed.unwrap_or(DEFAULT_SEED))
}

fn scheme_for(arg: SchemeArg, n: usize) -> PartitionScheme {
    match arg {
        SchemeArg::Default => default_scheme(),
        SchemeArg::Pathways => pathway_scheme(n),
    }
}

fn cmd_contributions(
    ctx: &Context,
    measure: MeasureArg,
    scheme: SchemeArg,
    format: Option<Format>,
) -> excitrans::Result<()> {
    let (l, rho0) = setup(ctx)?;
    let n = ctx.model.n_sites();
    let mut reports: Vec<ContributionReport> = Vec::new();
    if matches!(measure, MeasureArg::Greens | MeasureArg::Both) {
        reports.push(greens_contributions(&l, &rho0, &scheme_for(scheme, n))?);
    }
    if matches!(measure, MeasureArg::Susceptibility | MeasureArg::Both) {
        let opts = SusceptibilityOptions { horizon: Some(horizon(ctx, &l)?), ode: ctx.ode()?, ..Default::default() };
        let s = scheme_for(scheme, n).with_sink_processes();
        reports.push(susceptibility_contributions(&l, &rho0, &s, &opts)?);
    }
    for r in &reports {
        for w in &r.diagnostics.warnings {
            eprintln!("warning: {w}");
        }
    }
    let mut body = Vec::new();
    match ctx.format(format, Format::Json) {
        Format::Json => {
            if reports.len() == 1 {
                reports[0].write_json(&mut body)?;
            } else {
                serde_json::to_writer_pretty(&mut body, &reports).map_err(|e| Error::numerical(e.to_string()))?;
            }
            body.push(b'\n');
        }
        Format::Csv => {
            for r in &reports {
                writeln!(body, "# measure: {}", serde_json::to_string(&r.measure).unwrap_or_default().trim_matches('"'))?;
                r.write_csv(&mut body)?;
            }
        }
    }
    ctx.emit("contributions", &body, ctx.global.seed.unwrap_or(DEFAULT_SEED))
}

fn parse_parameter(s: &str) -> excitrans::Result<SweepParameter> {
    match s {
        "reorganization_energy" => Ok(SweepParameter::ReorganizationEnergy),
        "temperature" => Ok(SweepParameter::Temperature),
        "correlation_radius" => Ok(SweepParameter::CorrelationRadius),
        other => match other.strip_prefix("trap_rate:") {
            Some(site) => site
                .parse()
                .map(|site| SweepParameter::TrapRate { site })
                .map_err(|_| Error::config(format!("bad trap_rate site '{site}'"))),
            None => Err(Error::config(format!("unknown sweep parameter '{other}'"))),
        },
    }
}

fn parse_grid(s: &str) -> excitrans::Result<Vec<f64>> {
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| Error::config(format!("bad grid value '{x}'")));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err(Error::config("grid range needs START <= STOP and STEP > 0"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| start + i as f64 * step).collect());
    }
    s.split(',').map(num).collect()
}

fn parse_measures(s: &str) -> excitrans::Result<Vec<MeasureKind>> {
    s.split(',')
        .map(|m| match m.trim() {
            "ete" => Ok(MeasureKind::Ete),
            "greens" => Ok(MeasureKind::GreensContributions),
            "susceptibility" => Ok(MeasureKind::SusceptibilityContributions),
            "transfer_time" => Ok(MeasureKind::TransferTime),
            "pathways" => Ok(MeasureKind::Pathways),
            other => Err(Error::config(format!("unknown measure '{other}'"))),
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    ctx: &Context,
    spec_path: Option<&Path>,
    parameter: Option<&str>,
    grid: Option<&str>,
    measures: &str,
    samples: usize,
    format: Option<Format>,
) -> excitrans::Result<()> {
    let mut spec = match spec_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::config(format!("{}: {e}", p.display())))?;
            toml::from_str::<SweepSpec>(&text).map_err(|e| Error::config(format!("{}: {e}", p.display())))?
        }
        None => SweepSpec {
            parameter: parse_parameter(parameter.ok_or_else(|| Error::config("--parameter or --spec is required"))?)?,
            grid: parse_grid(grid.ok_or_else(|| Error::config("--grid or --spec is required"))?)?,
            measures: parse_measures(measures)?,
            disorder: DisorderSpec { samples, seed: DEFAULT_SEED },
            horizon: None,
            rel_tol: None,
            abs_tol: None,
        },
    };
    if let Some(seed) = ctx.global.seed {
        spec.disorder.seed = seed;
    }
    spec.horizon = ctx.global.horizon.or(spec.horizon);
    spec.rel_tol = ctx.global.rel_tol.or(spec.rel_tol);
    spec.abs_tol = ctx.global.abs_tol.or(spec.abs_tol);
    let result = match ctx.global.threads {
        Some(t) => rayon_pool(t)?.install(|| run_sweep(&ctx.model, &spec))?,
        None => run_sweep(&ctx.model, &spec)?,
    };
    for p in &result.points {
        if let Some(e) = &p.error {
            eprintln!("warning: {} = {} failed: {e}", spec.parameter.label(), p.value);
        }
        if !p.sample_failures.is_empty() {
            eprintln!(
                "warning: {} = {}: {} of {} disorder samples failed",
                spec.parameter.label(),
                p.value,
                p.sample_failures.len(),
                spec.disorder.samples
            );
        }
    }
    let mut body = Vec::new();
    match ctx.format(format, Format::Csv) {
        Format::Json => {
            result.write_json(&mut body)?;
            body.push(b'\n');
        }
        Format::Csv => result.write_csv(&mut body)?,
    }
    ctx.emit("sweep", &body, spec.disorder.seed)
}

fn rayon_pool(threads: usize) -> excitrans::Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("--threads: {e}")))
}

/// Prints diagnostics; returns whether the model is valid.
fn cmd_validate(global: &Global) -> bool {
    let parsed = match &global.model {
        Some(p) => load_model(p),
        None => parse_model(BUNDLED_FMO),
    };
    let model = match parsed {
        Ok(m) => m,
        Err(e) => {
            println!("schema: FAILED");
            println!("  {e}");
            return false;
        }
    };
    println!("schema: ok");
    println!("sites: {}", model.n_sites());
    println!("model_hash: {}", model.hash());
    let h = build_site_hamiltonian(&model);
    let basis = diagonalize(&h);
    println!("exciton energies (cm^-1):");
    for (i, e) in basis.energies.iter().enumerate() {
        println!("  {:>3}  {e:>12.4}", i + 1);
    }
    for (a, b) in basis.degeneracies(DEGENERACY_TOL) {
        println!("warning: excitons {} and {} are degenerate within {DEGENERACY_TOL} cm^-1", a + 1, b + 1);
    }
    if !model.has_sink() {
        println!("warning: no trapping or recombination sink; efficiency operations will fail");
    } else if model.recombination_rate == 0.0 && model.trap_rates.iter().any(|&k| k == 0.0) {
        println!("warning: sites without trapping and no recombination; the resolvent measure will fail");
    }
    if let Err(e) = initial_state(&model, &model.initial_state) {
        println!("initial state: FAILED");
        println!("  {e}");
        return false;
    }
    println!("initial state: ok");
    match assemble(&model) {
        Ok(l) => println!("generator: ok ({}x{})", l.dim(), l.dim()),
        Err(e) => {
            println!("generator: FAILED");
            println!("  {e}");
            return false;
        }
    }
    true
}

fn run(cli: Cli) -> excitrans::Result<()> {
    if let Command::Validate = cli.command {
        return if cmd_validate(&cli.global) { Ok(()) } else { Err(Error::config("model is invalid")) };
    }
    let ctx = Context::new(cli.global)?;
    match cli.command {
        Command::Simulate { dt, coherences } => cmd_simulate(&ctx, dt, coherences),
        Command::Contributions { measure, scheme, format } => cmd_contributions(&ctx, measure, scheme, format),
        Command::Sweep { spec, parameter, grid, measures, samples, format } => cmd_sweep(
            &ctx,
            spec.as_deref(),
            parameter.as_deref(),
            grid.as_deref(),
            &measures,
            samples,
            format,
        ),
        Command::Validate => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
