//! `polardd` command-line harness.

mod output;
mod spec;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polardd::analytic::{expansion_coeffs, predict};
use polardd::engine::{evolve, sphere_average};
use polardd::fitting::{fit_full, fit_sigma_phi};
use polardd::io::{read_counts_csv, read_decay_csv};
use polardd::tomography::{mle_reconstruct_with, Likelihood, MleOptions};

use crate::output::{analytic_bytes, fit_bytes, reconstruction_bytes, series_bytes, RunWriter};
use crate::spec::{load_config, preset, ExperimentSpec, Format, MethodSpec, TimeAxis, PRESETS};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or input file; exit code 2.
    Config(String),
    /// The computation itself failed; exit code 3.
    Numerical(String),
    /// Writing outputs failed; exit code 1.
    Io(std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<polardd::error::Error> for CliError {
    fn from(e: polardd::error::Error) -> Self {
        use polardd::error::Error as E;
        match e {
            E::NotUnitary { .. } | E::InvalidState(_) | E::Unidentifiable(_) | E::FitFailed(_) => {
                CliError::Numerical(e.to_string())
            }
            E::Io(io) => CliError::Io(io),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

#[derive(Parser)]
#[command(name = "polardd", version, about = "Polarization decoherence and bang-bang decoupling in a ring cavity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decay series for each input state.
    Simulate(RunArgs),
    /// Sphere-averaged (and per-input) series for a list of noise delays.
    SweepTheta {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated noise delays in radians; replaces `thetas` of the config.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        thetas: Option<Vec<f64>>,
    },
    /// Reconstructs states from a projector count file.
    Tomography {
        /// CSV with columns n_trip, H, V, D, A, R, L.
        counts: PathBuf,
        #[arg(long, value_enum, default_value_t = LikelihoodArg::Poisson)]
        likelihood: LikelihoodArg,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Fits sigma_phi (and phi0) to decay series files.
    Fit {
        /// Series file as LABEL=PATH; repeat for a joint fit.
        #[arg(long = "series", required = true, value_parser = parse_series)]
        series: Vec<(String, PathBuf)>,
        /// Fit only sigma_phi to the purity of a single series.
        #[arg(long)]
        purity_only: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Analytic prediction next to the numeric series for each input.
    Analytic(RunArgs),
    /// Built-in experiment configurations.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// Names and descriptions.
    List,
    /// Prints a preset as a config file.
    Show { name: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum LikelihoodArg {
    Poisson,
    Gaussian,
}

#[derive(Args)]
struct OutArgs {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML); a run manifest also works.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment, see `presets list`.
    #[arg(long)]
    preset: Option<String>,
    /// Switch to Monte Carlo with this many samples.
    #[arg(long, conflicts_with = "quad_order")]
    samples: Option<usize>,
    /// Monte-Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Switch to quadrature of this order.
    #[arg(long)]
    quad_order: Option<usize>,
    /// Replace the layout of the config.
    #[arg(long)]
    layout: Option<String>,
    #[arg(long, value_enum)]
    time_axis: Option<TimeAxis>,
    #[command(flatten)]
    out: OutArgs,
}

fn parse_series(s: &str) -> Result<(String, PathBuf), String> {
    let (label, path) = s.split_once('=').ok_or_else(|| format!("expected LABEL=PATH, got {s:?}"))?;
    if label.is_empty() || path.is_empty() {
        return Err(format!("expected LABEL=PATH, got {s:?}"));
    }
    Ok((label.to_string(), PathBuf::from(path)))
}

impl RunArgs {
    /// Spec with command-line overrides applied and defaults resolved.
    fn spec(&self) -> Result<(ExperimentSpec, Option<String>), CliError> {
        let mut spec = match (&self.config, &self.preset) {
            (Some(path), _) => load_config(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => return Err(CliError::Config("need --config or --preset".into())),
        };
        if let Some(layout) = &self.layout {
            spec.layout = layout.clone();
        }
        match (self.samples, self.quad_order, spec.method) {
            (Some(samples), _, MethodSpec::MonteCarlo { seed, .. }) => {
                spec.method = MethodSpec::MonteCarlo { samples, seed: self.seed.unwrap_or(seed) }
            }
            (Some(samples), _, _) => {
                spec.method = MethodSpec::MonteCarlo { samples, seed: self.seed.unwrap_or(0) }
            }
            (None, Some(order), _) => spec.method = MethodSpec::Quadrature { order: Some(order) },
            (None, None, MethodSpec::MonteCarlo { samples, seed }) => {
                spec.method = MethodSpec::MonteCarlo { samples, seed: self.seed.unwrap_or(seed) }
            }
            (None, None, MethodSpec::Quadrature { .. }) => {
                if self.seed.is_some() {
                    return Err(CliError::Config("--seed only applies to Monte Carlo; add --samples".into()));
                }
            }
        }
        if self.quad_order.is_some() && self.seed.is_some() {
            return Err(CliError::Config("--seed only applies to Monte Carlo".into()));
        }
        if let Some(axis) = self.time_axis {
            spec.output.time_axis = axis;
            spec.output.ns_per_round_trip = None;
        }
        if let Some(format) = self.out.format {
            spec.output.format = format;
        }
        Ok((spec, self.preset.clone()))
    }
}

fn file_name(parts: &[&str], format: Format) -> String {
    format!("{}.{}", parts.join("-"), format.extension())
}

fn cmd_simulate(args: &RunArgs) -> Result<(), CliError> {
    let (spec, preset) = args.spec()?;
    let spec = spec.resolve()?;
    let inputs = spec.named_inputs()?;
    if inputs.is_empty() {
        return Err(CliError::Config("simulate needs at least one input state".into()));
    }
    let (cfg, dist, evo) = (spec.cavity()?, spec.dist()?, spec.evolution()?);
    let format = spec.output.format;
    let mut run = RunWriter::new(&args.out.out)?;
    for input in &inputs {
        let mut s = evolve(&cfg, &dist, &input.bloch, &evo)?;
        s.label = input.label.clone();
        let bytes = series_bytes(&s, format, spec.output.ns_per_round_trip())?;
        run.write(&file_name(&[&spec.name, &input.label], format), &bytes)?;
        let last = s.records.last().expect("series has n = 0");
        println!(
            "{} {}: n = {} purity {:.6} fidelity {:.6}",
            spec.name, input.label, last.n, last.purity, last.fidelity
        );
    }
    let manifest = run.finish("simulate", preset, Some(spec))?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn cmd_sweep_theta(args: &RunArgs, thetas: Option<&[f64]>) -> Result<(), CliError> {
    let (mut spec, preset) = args.spec()?;
    if let Some(t) = thetas {
        spec.thetas = t.to_vec();
    }
    let spec = spec.resolve()?;
    if !spec.layout()?.uses_theta() {
        return Err(CliError::Config(format!("sweep-theta needs a generic layout, got {}", spec.layout)));
    }
    if spec.thetas.is_empty() {
        return Err(CliError::Config("no noise delays: set `thetas` or pass --thetas".into()));
    }
    let inputs = spec.named_inputs()?;
    let (dist, evo) = (spec.dist()?, spec.evolution()?);
    let format = spec.output.format;
    let ns = spec.output.ns_per_round_trip();
    let mut run = RunWriter::new(&args.out.out)?;
    for (k, &theta) in spec.thetas.iter().enumerate() {
        let cfg = spec.cavity_at(Some(theta))?;
        let tag = format!("theta{k}");
        let avg = sphere_average(&cfg, &dist, &evo, spec.sphere_points)?;
        run.write(&file_name(&[&spec.name, &spec.layout, &tag, "sphere"], format), &series_bytes(&avg, format, ns)?)?;
        let last = avg.records.last().expect("series has n = 0");
        println!(
            "{} {} theta {:.6}: sphere average at n = {} purity {:.6} fidelity {:.6}",
            spec.name, spec.layout, theta, last.n, last.purity, last.fidelity
        );
        for input in &inputs {
            let mut s = evolve(&cfg, &dist, &input.bloch, &evo)?;
            s.label = input.label.clone();
            run.write(
                &file_name(&[&spec.name, &spec.layout, &tag, &input.label], format),
                &series_bytes(&s, format, ns)?,
            )?;
        }
    }
    let manifest = run.finish("sweep-theta", preset, Some(spec))?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn cmd_analytic(args: &RunArgs) -> Result<(), CliError> {
    let (spec, preset) = args.spec()?;
    let spec = spec.resolve()?;
    let inputs = spec.named_inputs()?;
    if inputs.is_empty() {
        return Err(CliError::Config("analytic needs at least one input state".into()));
    }
    let (cfg, dist, evo) = (spec.cavity()?, spec.dist()?, spec.evolution()?);
    let coeffs = expansion_coeffs(&cfg, spec.phi0)?;
    let format = spec.output.format;
    let mut run = RunWriter::new(&args.out.out)?;
    for input in &inputs {
        let pred = predict(&coeffs, spec.sigma_phi, &input.bloch, spec.n_max)?;
        run.write(&file_name(&[&spec.name, &input.label, "analytic"], format), &analytic_bytes(&pred, format)?)?;
        let mut s = evolve(&cfg, &dist, &input.bloch, &evo)?;
        s.label = input.label.clone();
        run.write(
            &file_name(&[&spec.name, &input.label], format),
            &series_bytes(&s, format, spec.output.ns_per_round_trip())?,
        )?;
        let gap = pred
            .records
            .iter()
            .zip(s.steps())
            .map(|(a, b)| (a.purity - b.purity).abs().max((a.fidelity - b.fidelity).abs()))
            .fold(0.0, f64::max);
        println!("{} {}: max |analytic - numeric| = {gap:.3e}", spec.name, input.label);
    }
    let manifest = run.finish("analytic", preset, Some(spec))?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn cmd_tomography(counts: &Path, likelihood: LikelihoodArg, out: &OutArgs) -> Result<(), CliError> {
    let bytes = read_input(counts)?;
    let records = read_counts_csv(bytes.as_slice())?;
    if records.is_empty() {
        return Err(CliError::Config(format!("{} has no count rows", counts.display())));
    }
    let opts = MleOptions {
        likelihood: match likelihood {
            LikelihoodArg::Poisson => Likelihood::Poisson,
            LikelihoodArg::Gaussian => Likelihood::Gaussian,
        },
        ..MleOptions::default()
    };
    let rows = records
        .iter()
        .map(|r| Ok((r.n_trip, mle_reconstruct_with(r, &opts)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let format = out.format.unwrap_or_default();
    let stem = counts.file_stem().and_then(|s| s.to_str()).unwrap_or("counts");
    let mut run = RunWriter::new(&out.out)?;
    run.record_input("counts", counts, &bytes);
    run.write(&file_name(&[stem, "reconstructed"], format), &reconstruction_bytes(&rows, format)?)?;
    let unconverged = rows.iter().filter(|(_, r)| !r.converged).count();
    let manifest = run.finish("tomography", None, None)?;
    println!("reconstructed {} records, wrote {}", rows.len(), manifest.display());
    if unconverged > 0 {
        return Err(CliError::Numerical(format!("{unconverged} reconstructions did not converge")));
    }
    Ok(())
}

fn cmd_fit(series: &[(String, PathBuf)], purity_only: bool, out: &OutArgs) -> Result<(), CliError> {
    let mut run = RunWriter::new(&out.out)?;
    let mut data = Vec::new();
    for (label, path) in series {
        let bytes = read_input(path)?;
        data.push(read_decay_csv(bytes.as_slice(), label, None)?);
        run.record_input(label, path, &bytes);
    }
    let fit = if purity_only {
        match data.as_slice() {
            [one] => fit_sigma_phi(one)?,
            _ => return Err(CliError::Config("--purity-only takes exactly one --series".into())),
        }
    } else {
        fit_full(&data)?
    };
    let format = out.format.unwrap_or_default();
    run.write(&format!("fit.{}", format.extension()), &fit_bytes(&fit, format)?)?;
    let sd = |i: usize| fit.covariance[(i, i)].max(0.0).sqrt();
    println!("sigma_phi = {:.6} +- {:.2e}", fit.sigma_phi, sd(0));
    if let Some(phi0) = fit.phi0 {
        println!("phi0 = {phi0:.6} +- {:.2e}", sd(1));
    }
    println!("residual = {:.3e}, iterations = {}", fit.residual, fit.iterations);
    let manifest = run.finish("fit", None, None)?;
    println!("wrote {}", manifest.display());
    if !fit.converged {
        return Err(CliError::Numerical("fit did not converge".into()));
    }
    Ok(())
}

fn cmd_presets(action: &PresetAction) -> Result<(), CliError> {
    match action {
        PresetAction::List => {
            let width = PRESETS.iter().map(|p| p.name.len()).max().unwrap_or(0);
            for p in PRESETS {
                println!("{:width$}  {}", p.name, p.mirrors);
            }
        }
        PresetAction::Show { name } => {
            let spec = preset(name)?;
            let text = toml::to_string(&spec).map_err(|e| CliError::Numerical(e.to_string()))?;
            print!("{text}");
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::SweepTheta { run, thetas } => cmd_sweep_theta(run, thetas.as_deref()),
        Command::Tomography { counts, likelihood, out } => cmd_tomography(counts, *likelihood, out),
        Command::Fit { series, purity_only, out } => cmd_fit(series, *purity_only, out),
        Command::Analytic(args) => cmd_analytic(args),
        Command::Presets { action } => cmd_presets(action),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polardd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
