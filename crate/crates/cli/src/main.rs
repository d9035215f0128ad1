use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use voltbound::bounds::{self, BoundsSetup, ResultJson, SCHEMA_VERSION};
use voltbound::links::{enumerate_links, prune};
use voltbound::network::build_admittance;
use voltbound::oracle;
use voltbound::sdp::{sdpa, Backend, SdpOptions};
use voltbound::{BoundsError, BoundsOptions, Network, SolveMode, VerificationError, VerifyOptions};

/// Certified voltage-magnitude bounds under ellipsoidal injection uncertainty.
#[derive(Parser)]
#[command(name = "voltbound", version)]
struct Cli {
    /// Solver back end.
    #[arg(long, global = true, env = "VOLTBOUND_SOLVER", default_value = "ipm")]
    solver: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute certified per-bus bounds and write them as JSON.
    Analyze(AnalyzeArgs),
    /// Run the Monte-Carlo power-flow oracle and write the envelope CSV.
    Sample(SampleArgs),
    /// Re-check a result file against its network.
    Verify(VerifyArgs),
    /// Dump the link catalog for an N-bus network.
    Links(LinksArgs),
    /// Write the joint bound program in SDPA sparse format.
    ExportSdp(ExportArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Required strict-positivity margin.
    #[arg(long, default_value_t = voltbound::feasibility::DEFAULT_EPSILON)]
    epsilon: f64,
    /// Perimeter weight (default 2^(N-1)).
    #[arg(long)]
    vartheta: Option<f64>,
    /// Keep every raw link, including redundant ones.
    #[arg(long)]
    no_prune: bool,
    /// Solve the 2N bound blocks independently.
    #[arg(long)]
    decoupled: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    solve: SolveArgs,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    /// Network file the result was computed for.
    #[arg(long)]
    input: PathBuf,
    /// Result JSON written by `analyze`.
    #[arg(long)]
    result: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct LinksArgs {
    /// Number of load buses.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    n: Option<usize>,
    /// Take N from a network file instead.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    no_prune: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    solve: SolveArgs,
}

/// Failure that maps to exit code 2 rather than 1.
#[derive(Debug)]
struct Uncertified(String);

impl std::fmt::Display for Uncertified {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Uncertified {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Uncertified>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let backend: Backend = cli.solver.parse()?;
    let sdp = SdpOptions { backend, ..SdpOptions::default() };
    match cli.command {
        Command::Analyze(a) => analyze(a, sdp),
        Command::Sample(a) => sample(a),
        Command::Verify(a) => verify(a),
        Command::Links(a) => links(a),
        Command::ExportSdp(a) => export_sdp(a, sdp),
    }
}

fn load(path: &Path) -> Result<Network> {
    Network::from_json_file(path).with_context(|| format!("reading network {}", path.display()))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn bounds_options(args: &SolveArgs, sdp: SdpOptions<f64>) -> Result<BoundsOptions<f64>> {
    if !(args.epsilon > 0.0 && args.epsilon.is_finite()) {
        bail!("--epsilon must be positive");
    }
    if let Some(v) = args.vartheta {
        if !(v > 0.0 && v.is_finite()) {
            bail!("--vartheta must be positive");
        }
    }
    Ok(BoundsOptions {
        epsilon: args.epsilon,
        vartheta: args.vartheta,
        prune: !args.no_prune,
        mode: if args.decoupled { SolveMode::Decoupled } else { SolveMode::Joint },
        sdp,
        ..BoundsOptions::default()
    })
}

fn analyze(args: AnalyzeArgs, sdp: SdpOptions<f64>) -> Result<()> {
    let model = load(&args.input)?;
    let options = bounds_options(&args.solve, sdp)?;
    let result = match bounds::solve_bounds(&model, &options) {
        Ok(r) => r,
        Err(e @ (BoundsError::NoCertificate { .. } | BoundsError::EmptyRegion)) => return Err(Uncertified(e.to_string()).into()),
        Err(e) => return Err(e.into()),
    };
    emit(args.output.as_deref(), &result.to_json_string())?;
    for b in &result.buses {
        eprintln!("bus {}: |v| in [{:.10}, {:.10}]", b.bus, b.vmin, b.vmax);
    }
    eprintln!("perimeter bound {:.10e} (solver {})", result.perimeter_bound, result.diagnostics.status);
    Ok(())
}

fn sample(args: SampleArgs) -> Result<()> {
    if args.samples == 0 {
        bail!("--samples must be positive");
    }
    let model = load(&args.input)?;
    let y = build_admittance(&model)?;
    let env = oracle::monte_carlo(&model, &y, args.samples, args.seed)?;
    emit(args.output.as_deref(), &env.to_csv())?;
    eprintln!(
        "{} of {} samples retained ({} non-convergent, {} over current limits)",
        env.retained, env.requested, env.non_convergent, env.current_violating
    );
    for (k, (lo, hi)) in env.min_sq.iter().zip(&env.max_sq).enumerate() {
        eprintln!("bus {}: |v| in [{:.10}, {:.10}]", k + 1, lo.sqrt(), hi.sqrt());
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<()> {
    let model = load(&args.input)?;
    let text = fs::read_to_string(&args.result).with_context(|| format!("reading result {}", args.result.display()))?;
    let json: ResultJson = serde_json::from_str(&text).with_context(|| format!("parsing result {}", args.result.display()))?;
    let check = voltbound::Bounds::from_json(&json, model.n_buses).and_then(|r| {
        bounds::verify_result(&model, &r, &VerifyOptions { samples: args.samples, seed: args.seed, ..VerifyOptions::default() })
    });
    let report = match check {
        Ok(r) => r,
        Err(e @ (VerificationError::Model(_) | VerificationError::Assembly(_))) => return Err(e.into()),
        Err(e) => return Err(Uncertified(format!("verification failed: {e}")).into()),
    };
    let worst = report.certificate_min_eigs.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    println!("certificates: {} checked, smallest eigenvalue {:.10e}", report.certificate_min_eigs.len(), worst);
    println!("samples: {} of {} retained", report.retained, report.requested);
    for m in &report.margins {
        println!("bus {}: lower margin {:.10e}, upper margin {:.10e}", m.bus, m.lower_margin, m.upper_margin);
    }
    println!("empirical perimeter {:.10e}", report.empirical_perimeter);
    println!("ok");
    Ok(())
}

fn links(args: LinksArgs) -> Result<()> {
    let n = match (&args.input, args.n) {
        (Some(p), _) => load(p)?.n_buses,
        (None, Some(n)) => n,
        (None, None) => unreachable!("clap requires one of --n or --input"),
    };
    if n == 0 {
        bail!("--n must be positive");
    }
    let raw = enumerate_links::<f64>(n);
    let catalog = if args.no_prune { raw.clone() } else { prune(&raw) };
    let mut value = serde_json::to_value(catalog.to_json())?;
    value.as_object_mut().expect("catalog serializes to an object").insert("schema_version".into(), SCHEMA_VERSION.into());
    emit(args.output.as_deref(), &(serde_json::to_string_pretty(&value)? + "\n"))?;
    eprintln!("N={n}: raw count {}, {} kept", raw.raw_count, catalog.len());
    Ok(())
}

fn export_sdp(args: ExportArgs, sdp: SdpOptions<f64>) -> Result<()> {
    let model = load(&args.input)?;
    let options = bounds_options(&args.solve, sdp)?;
    let setup = BoundsSetup::new(&model, &options)?;
    let problem = setup.joint_problem(&options)?;
    let text = format!("*schema_version {SCHEMA_VERSION}\n{}", sdpa::write_sdpa(&problem)?);
    emit(args.output.as_deref(), &text)?;
    eprintln!("{} variables, {} blocks", problem.variables.len(), problem.blocks.len());
    Ok(())
}
