use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use gensol::certify::{self, ProfileRow, Report, TolModel};
use gensol::convert::{self, DissOutcome, SolverOptions};
use gensol::io::{self, CertKind, Certificate, CertificateFile};
use gensol::{catalog, Error};

const EXIT_FAIL: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "gensol", version, about = "Verify and convert generalized-solution certificates")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a certificate against its defining inequalities.
    Verify(VerifyArgs),
    /// Turn a certificate of one kind into another.
    Convert(ConvertArgs),
    /// Write a reference certificate.
    Example(ExampleArgs),
}

#[derive(clap::Args)]
struct BatteryArgs {
    /// Number of test functions.
    #[arg(long, default_value_t = 16)]
    battery_size: usize,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long)]
    cert: PathBuf,
    #[command(flatten)]
    battery: BatteryArgs,
    /// Tolerance constant: tol = C (h^2 + dt^2)(1 + M).
    #[arg(long, default_value_t = TolModel::DEFAULT_C)]
    tol_scale: f64,
    /// Report JSON destination; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    /// CSV with time, certified energy, state energy and defect budget.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Envar,
    Dissweak,
    Mv,
}

impl From<Kind> for CertKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Envar => CertKind::Envar,
            Kind::Dissweak => CertKind::Dissweak,
            Kind::Mv => CertKind::Mv,
        }
    }
}

#[derive(clap::Args)]
struct ConvertArgs {
    #[arg(long, value_enum)]
    from: Kind,
    #[arg(long, value_enum)]
    to: Kind,
    #[arg(long)]
    cert: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    battery: BatteryArgs,
    /// JSON file with {"rays", "max_iters", "tol", "seed"}; flags override it.
    #[arg(long)]
    solver_config: Option<PathBuf>,
    #[arg(long)]
    rays: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    solver_tol: Option<f64>,
    #[arg(long)]
    solver_seed: Option<u64>,
}

#[derive(clap::Args)]
struct ExampleArgs {
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(catalog::NAMES))]
    name: String,
    /// Cells per axis.
    #[arg(long, default_value_t = 32)]
    grid: usize,
    #[arg(long = "T", default_value_t = 1.0)]
    t_final: f64,
    #[arg(long, default_value_t = 32)]
    steps: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_INPUT);
    }
    let result = match cli.cmd {
        Cmd::Verify(a) => verify(a),
        Cmd::Convert(a) => convert(a),
        Cmd::Example(a) => example(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("GENSOL_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().with_context(|| format!("GENSOL_THREADS={v:?} is not a thread count"))?;
    if n == 0 {
        bail!("GENSOL_THREADS must be positive");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn load(path: &Path) -> anyhow::Result<CertificateFile> {
    CertificateFile::load(path).with_context(|| format!("reading {}", path.display()))
}

fn verify(a: VerifyArgs) -> anyhow::Result<u8> {
    let file = load(&a.cert)?;
    if !(a.tol_scale > 0.0 && a.tol_scale.is_finite()) {
        bail!("--tol-scale must be positive");
    }
    let cert = &file.cert;
    let battery = cert.system().battery(&cert.grid(), &cert.time(), a.battery.battery_size, a.battery.seed);
    let tol = TolModel::new(a.tol_scale, &cert.grid(), &cert.time());
    let report = match cert {
        Certificate::EnVar(c) => certify::verify_envar(c, &battery, &tol)?,
        Certificate::DissWeak(c) => certify::verify_dissweak(c, &battery, &tol)?,
        Certificate::Mv(c) => certify::verify_mv(c, &battery, &tol)?,
    };
    let json = serde_json::to_string_pretty(&report)?;
    match &a.report {
        Some(p) => io::write_atomic(p, json.as_bytes())?,
        None => println!("{json}"),
    }
    if let Some(p) = &a.plot_data {
        let rows = match cert {
            Certificate::EnVar(c) => certify::envar_profile(c)?,
            Certificate::DissWeak(c) => certify::dissweak_profile(c)?,
            Certificate::Mv(c) => certify::mv_profile(c),
        };
        io::write_atomic(p, profile_csv(&rows).as_bytes())?;
    }
    summarize(&report);
    Ok(if report.pass { 0 } else { EXIT_FAIL })
}

fn summarize(report: &Report) {
    if report.pass {
        eprintln!("{}: pass ({} checks)", report.kind, report.records.len());
    } else {
        let failing = report.failing().count();
        eprintln!(
            "{}: FAIL ({failing} of {} checks; clauses {})",
            report.kind,
            report.records.len(),
            report.failing_clauses().join(", ")
        );
    }
}

fn profile_csv(rows: &[ProfileRow]) -> String {
    let mut out = String::from("t,E,energy,budget\n");
    for r in rows {
        let budget = if r.budget.is_nan() { String::new() } else { r.budget.to_string() };
        let _ = writeln!(out, "{},{},{},{}", r.t, r.certified, r.energy, budget);
    }
    out
}

fn solver_options(a: &ConvertArgs) -> anyhow::Result<SolverOptions> {
    let mut opts = match &a.solver_config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing solver config {}", p.display()))?
        }
        None => SolverOptions::default(),
    };
    if let Some(r) = a.rays {
        opts.rays = Some(r);
    }
    if let Some(m) = a.max_iters {
        opts.max_iters = m;
    }
    if let Some(t) = a.solver_tol {
        opts.tol = Some(t);
    }
    if let Some(s) = a.solver_seed {
        opts.seed = s;
    }
    Ok(opts)
}

/// One conversion step; `Ok(None)` means the defect search found no
/// admissible defect.
fn step(cert: Certificate, to: CertKind, a: &ConvertArgs, opts: &SolverOptions) -> anyhow::Result<Option<Certificate>> {
    Ok(Some(match (cert, to) {
        (Certificate::EnVar(c), CertKind::Dissweak) => {
            let battery = c.system().battery(c.grid(), c.time(), a.battery.battery_size, a.battery.seed);
            match convert::envar_to_diss(&c, &battery, opts)? {
                DissOutcome::Feasible { cert, slabs } => {
                    let slack = slabs.iter().map(|s| s.slack).fold(f64::INFINITY, f64::min);
                    let boundary = slabs.iter().map(|s| s.boundary_mass.abs()).fold(0.0, f64::max);
                    eprintln!("defect found: min slack {slack:.3e}, max boundary mass {boundary:.3e}");
                    Certificate::DissWeak(cert)
                }
                DissOutcome::Infeasible { sample, violation, .. } => {
                    eprintln!("infeasible at sample {sample}: residual {violation:.3e}");
                    return Ok(None);
                }
                DissOutcome::NotConverged { sample, violation, iterations } => {
                    eprintln!("no defect found: solver stopped at sample {sample} after {iterations} iterations, residual {violation:.3e}");
                    return Ok(None);
                }
            }
        }
        (Certificate::DissWeak(c), CertKind::Mv) => Certificate::Mv(convert::diss_to_mv(&c)?),
        (Certificate::DissWeak(c), CertKind::Envar) => Certificate::EnVar(c.envar),
        (Certificate::Mv(c), CertKind::Envar) => Certificate::EnVar(convert::mv_to_envar(&c)?),
        (c, k) => bail!("no direct conversion {} -> {}", c.kind().as_str(), k.as_str()),
    }))
}

fn route(from: CertKind, to: CertKind) -> &'static [CertKind] {
    use CertKind::*;
    match (from, to) {
        (Envar, Dissweak) => &[Dissweak],
        (Envar, Mv) => &[Dissweak, Mv],
        (Dissweak, Envar) => &[Envar],
        (Dissweak, Mv) => &[Mv],
        (Mv, Envar) => &[Envar],
        (Mv, Dissweak) => &[Envar, Dissweak],
        _ => &[],
    }
}

fn convert(a: ConvertArgs) -> anyhow::Result<u8> {
    let (from, to) = (CertKind::from(a.from), CertKind::from(a.to));
    let opts = solver_options(&a)?;
    let file = load(&a.cert)?;
    if file.cert.kind() != from {
        bail!("--from {} but the certificate is {}", from.as_str(), file.cert.kind().as_str());
    }
    if (from == CertKind::Mv || to == CertKind::Mv) && file.cert.system().kind() != gensol::systems::SystemKind::IncompressibleEuler {
        return Err(Error::Unsupported("measure-valued certificates exist only for the incompressible system".into()).into());
    }
    let mut cert = file.cert;
    for &k in route(from, to) {
        match step(cert, k, &a, &opts)? {
            Some(c) => cert = c,
            None => return Ok(EXIT_INFEASIBLE),
        }
    }
    CertificateFile::new(cert).save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(0)
}

fn example(a: ExampleArgs) -> anyhow::Result<u8> {
    let file = catalog::example(&a.name, a.grid, a.t_final, a.steps)?;
    file.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(0)
}
