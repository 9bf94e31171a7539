use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rieszlab_core::exponent::{certify_construction, ConstructionCertificate, FreeParams};
use rieszlab_core::radial::{LogGrid, ProfileLiteral};
use rieszlab_core::rational::parse_rational;
use rieszlab_core::region::{classify, ParameterPoint, Regime};
use rieszlab_core::region_map::render_svg;
use rieszlab_core::riesz::{potential_at, radial_convolve, QuadratureSpec, RieszOrder, TableSpec};
use rieszlab_core::selftest::run_selftest;
use rieszlab_core::verifier::{
    certify_supersolution, check_annulus_bounds, check_positivity_principle, standard_bumps, sweep, AnnulusReport,
    CertificateReport, DoublePotential, ExactRange, PositivityReport, SweepSpec,
};
use rieszlab_core::Error;

const EXIT_INVALID: u8 = 2;
const EXIT_NOT_EXISTS: u8 = 3;
const EXIT_DIVERGENT: u8 = 4;
const EXIT_CERTIFY: u8 = 5;

#[derive(Parser)]
#[command(name = "rieszlab", version, about = "Riesz potentials and the double-potential inequality u >= I_alpha((I_beta u^p) u^q)")]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true)]
    r_min: Option<f64>,
    #[arg(long, global = true)]
    r_max: Option<f64>,
    /// Grid points per decade.
    #[arg(long, global = true)]
    points: Option<usize>,
    #[arg(long, global = true)]
    abs_tol: Option<f64>,
    #[arg(long, global = true)]
    rel_tol: Option<f64>,
    #[arg(long, global = true)]
    tail_cutoff: Option<f64>,
    /// Directory for files written by `sweep`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Decide existence at a parameter point and print the verdict as JSON.
    Classify(PointArgs),
    /// Evaluate a Riesz potential of a radial profile and print `r,value` CSV.
    Potential(PotentialArgs),
    /// Certify a supersolution construction symbolically and numerically.
    Certify(CertifyArgs),
    /// Explore a (p, q) grid and write CSV and SVG region maps.
    Sweep(SweepArgs),
    /// Run the golden-value and invariant checks.
    Selftest,
}

#[derive(Args)]
struct PointArgs {
    #[arg(long = "N", alias = "n")]
    n: u32,
    #[arg(long, allow_hyphen_values = true)]
    alpha: String,
    #[arg(long, allow_hyphen_values = true)]
    beta: String,
    #[arg(long, allow_hyphen_values = true)]
    p: String,
    #[arg(long, allow_hyphen_values = true)]
    q: String,
}

impl PointArgs {
    fn point(&self) -> rieszlab_core::Result<ParameterPoint> {
        ParameterPoint::parse(self.n, &self.alpha, &self.beta, &self.p, &self.q)
    }
}

#[derive(Args)]
struct PotentialArgs {
    #[arg(long = "N", alias = "n")]
    n: u32,
    #[arg(long)]
    gamma: f64,
    /// `powlog:A=..,a=..,m=..`, `ball:R=..` or `grid:<path>`.
    #[arg(long)]
    profile: String,
    /// Comma-separated radii; omitted or empty means the whole grid.
    #[arg(long, default_value = "")]
    at: String,
}

#[derive(Args)]
struct CertifyArgs {
    /// B1, B2, B1plus or B1plusplus; defaults to the regime of the point.
    #[arg(long)]
    regime: Option<Regime>,
    #[command(flatten)]
    point: PointArgs,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    /// Include per-radius diagnostics in the output.
    #[arg(long)]
    diagnostics: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long = "N", alias = "n")]
    n: Option<u32>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// `start:end:step`
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    q: Option<String>,
    /// Iteration budget per cell.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Svg,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    r_min: Option<f64>,
    r_max: Option<f64>,
    points: Option<usize>,
    abs_tol: Option<f64>,
    rel_tol: Option<f64>,
    max_subdivisions: Option<usize>,
    band: Option<f64>,
    tail_cutoff: Option<f64>,
    sweep: SweepConfig,
    output_dir: Option<PathBuf>,
    formats: Option<Vec<Format>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SweepConfig {
    n: Option<u32>,
    alpha: Option<String>,
    beta: Option<String>,
    p: Option<String>,
    q: Option<String>,
    budget: Option<usize>,
}

/// Effective settings after applying flags over the config file.
struct Settings {
    grid: LogGrid,
    quad: QuadratureSpec,
    out_dir: PathBuf,
    formats: Vec<Format>,
    config: RunConfig,
}

impl Settings {
    fn resolve(config: Option<&PathBuf>, flags: &Overrides) -> anyhow::Result<Self> {
        let config: RunConfig = match config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).map_err(|e| Error::Parse(format!("config {}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        let base = LogGrid::default();
        let grid = LogGrid::new(
            flags.r_min.or(config.r_min).unwrap_or(base.r_min),
            flags.r_max.or(config.r_max).unwrap_or(base.r_max),
            flags.points.or(config.points).unwrap_or(base.per_decade),
        )?;
        let d = QuadratureSpec::default();
        let quad = QuadratureSpec {
            abs_tol: flags.abs_tol.or(config.abs_tol).unwrap_or(d.abs_tol),
            rel_tol: flags.rel_tol.or(config.rel_tol).unwrap_or(d.rel_tol),
            max_subdivisions: config.max_subdivisions.unwrap_or(d.max_subdivisions),
            band: config.band.unwrap_or(d.band),
            tail_cutoff: flags.tail_cutoff.or(config.tail_cutoff).unwrap_or(d.tail_cutoff),
        };
        quad.validate()?;
        let out_dir = flags
            .out_dir
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        let formats = config.formats.clone().unwrap_or_else(|| vec![Format::Csv, Format::Svg]);
        Ok(Self {
            grid,
            quad,
            out_dir,
            formats,
            config,
        })
    }

    fn table(&self) -> TableSpec {
        TableSpec {
            grid: self.grid.clone(),
            ..TableSpec::default()
        }
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn cmd_classify(args: &PointArgs) -> anyhow::Result<u8> {
    let verdict = classify(&args.point()?);
    print_json(&verdict)?;
    Ok(if verdict.exists { 0 } else { EXIT_NOT_EXISTS })
}

fn cmd_potential(args: &PotentialArgs, settings: &Settings) -> anyhow::Result<u8> {
    let order = RieszOrder::new(args.gamma, args.n)?;
    let profile = ProfileLiteral::parse(&args.profile)?.into_profile(&settings.grid.radii())?;
    let at: Vec<f64> = args
        .at
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad radius {s}"))))
        .collect::<Result<_, _>>()?;
    let rows: Vec<(f64, f64)> = if at.is_empty() {
        let pot = radial_convolve(&order, &profile, &settings.grid.radii(), &settings.quad)?;
        pot.points.iter().map(|v| (v.radius, v.value)).collect()
    } else {
        at.par_iter()
            .map(|&r| potential_at(&order, &profile, r, &settings.quad).map(|v| (r, v.value)))
            .collect::<Result<_, _>>()?
    };
    let mut out = String::from("r,value\n");
    for (r, v) in rows {
        out.push_str(&format!("{r},{v:.15e}\n"));
    }
    emit(&out)?;
    Ok(0)
}

#[derive(Serialize)]
struct CertifyOutput {
    construction: ConstructionCertificate,
    supersolution: CertificateReport,
    positivity: PositivityReport,
    annulus: AnnulusReport,
    passed: bool,
    first_failure: Option<&'static str>,
}

fn cmd_certify(args: &CertifyArgs, settings: &Settings) -> anyhow::Result<u8> {
    let pt = args.point.point()?;
    let regime = match args.regime {
        Some(r) => r,
        None => match classify(&pt).regime {
            Some(r) => r,
            None => {
                eprintln!("no construction: {pt} lies outside the existence region");
                return Ok(EXIT_NOT_EXISTS);
            }
        },
    };
    let free = FreeParams {
        epsilon: args.epsilon.as_deref().map(parse_rational).transpose()?,
        m: args.m.as_deref().map(parse_rational).transpose()?,
    };
    let construction = certify_construction(&pt, regime, &free)?;
    let dp = DoublePotential::new(&pt, &settings.table())?;
    let u = dp.shape_profile(&construction.profile)?;
    let mut supersolution = certify_supersolution(&dp, &u)?;
    let big_u = u.scaled(supersolution.scaling);
    let positivity = check_positivity_principle(&dp, &big_u, &[1.0, 10.0, 100.0], &standard_bumps())?;
    let annulus = check_annulus_bounds(&dp, &big_u, &[1.0, 10.0, 100.0, 1000.0])?;
    if !args.diagnostics {
        supersolution.diagnostics.clear();
    }
    let first_failure = [
        ("symbolic_closure", construction.closure),
        ("decay_match", construction.matches_decay),
        ("supersolution", supersolution.passed),
        ("positivity", positivity.passed),
    ]
    .into_iter()
    .find(|(_, ok)| !ok)
    .map(|(name, _)| name);
    let out = CertifyOutput {
        construction,
        supersolution,
        positivity,
        annulus,
        passed: first_failure.is_none(),
        first_failure,
    };
    print_json(&out)?;
    Ok(match first_failure {
        None => 0,
        Some(name) => {
            eprintln!("certification failed: {name}");
            EXIT_CERTIFY
        }
    })
}

#[derive(Serialize)]
struct SweepSummary {
    cells: usize,
    interior_agreeing: usize,
    interior_total: usize,
    files: Vec<String>,
}

fn cmd_sweep(args: &SweepArgs, settings: &Settings) -> anyhow::Result<u8> {
    let cfg = &settings.config.sweep;
    let text = |flag: &Option<String>, conf: &Option<String>, default: &str| {
        flag.clone().or_else(|| conf.clone()).unwrap_or_else(|| default.to_string())
    };
    let spec = SweepSpec {
        n: args.n.or(cfg.n).unwrap_or(3),
        alpha: parse_rational(&text(&args.alpha, &cfg.alpha, "1"))?,
        beta: parse_rational(&text(&args.beta, &cfg.beta, "1"))?,
        p: ExactRange::parse(&text(&args.p, &cfg.p, "0.25:5:0.25"))?,
        q: ExactRange::parse(&text(&args.q, &cfg.q, "0.25:5:0.25"))?,
        budget: args.budget.or(cfg.budget).unwrap_or(50),
        table: settings.table(),
    };
    let result = sweep(&spec)?;
    fs::create_dir_all(&settings.out_dir).with_context(|| format!("creating {}", settings.out_dir.display()))?;
    let mut files = Vec::new();
    for format in &settings.formats {
        let (name, body) = match format {
            Format::Csv => ("sweep.csv", result.to_csv()),
            Format::Svg => ("sweep.svg", render_svg(&result)),
        };
        let path = settings.out_dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        files.push(path.display().to_string());
    }
    let (agreeing, total) = result.interior_agreement();
    print_json(&SweepSummary {
        cells: result.cells.len(),
        interior_agreeing: agreeing,
        interior_total: total,
        files,
    })?;
    Ok(0)
}

fn cmd_selftest() -> anyhow::Result<u8> {
    let checks = run_selftest();
    let mut report = String::new();
    for c in &checks {
        report.push_str(&format!("{} {:<18} {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    emit(&report)?;
    Ok(match checks.iter().find(|c| !c.passed) {
        None => 0,
        Some(c) => {
            eprintln!("selftest failed: {}", c.name);
            EXIT_CERTIFY
        }
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidPoint(_) | Error::Parse(_) | Error::Domain(_)) => EXIT_INVALID,
        Some(Error::DivergentPotential(_) | Error::UncontrolledOrder { .. }) => EXIT_DIVERGENT,
        Some(
            Error::HypothesesViolated(_)
            | Error::UnboundedRatio(_)
            | Error::NonPositiveProfile
            | Error::Precondition(_)
            | Error::LowerBound { .. },
        ) => EXIT_CERTIFY,
        _ => 1,
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("RIESZLAB_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Parse(format!("RIESZLAB_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    configure_threads()?;
    let settings = Settings::resolve(cli.config.as_ref(), &cli.overrides)?;
    match &cli.command {
        Command::Classify(a) => cmd_classify(a),
        Command::Potential(a) => cmd_potential(a, &settings),
        Command::Certify(a) => cmd_certify(a, &settings),
        Command::Sweep(a) => cmd_sweep(a, &settings),
        Command::Selftest => cmd_selftest(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
