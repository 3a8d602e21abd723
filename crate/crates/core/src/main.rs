//! `qionize` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure
//! (non-convergence, degenerate ratio, failed oracle check).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use qionize::amplitude::{eval_reduced, AmplitudeKind, ReducedPoint};
use qionize::kernel::{Kernel, TabulatedKernel};
use qionize::observables::{enhancement_ratio, photon_flux, Channel, FilterFactor};
use qionize::oracle::{self, McSpec};
use qionize::sweep::{self, Axis, Param, SweepPlan};
use qionize::units::{load_config, ExperimentConfig, Measure, Reduction, Regime};
use qionize::Error;

#[derive(Parser)]
#[command(
    name = "qionize",
    version,
    about = "Entangled-photon enhancement of two-photon ionization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enhancement ratio at one configuration (one JSON line).
    Ratio(RatioArgs),
    /// Photon flux of the entangled or separable amplitude.
    Flux(FluxArgs),
    /// Reduced amplitude F(k_ix, k_sx) on a grid, as CSV.
    AmplitudeGrid(GridArgs),
    /// Run a parameter sweep (preset or explicit grid).
    Sweep(SweepArgs),
    /// Cross-validate reduced 2-D ratios against 6-D Monte Carlo.
    OracleCheck(OracleArgs),
    /// List built-in sweep presets.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Exact,
    Paraxial,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Exact => Regime::Exact,
            RegimeArg::Paraxial => Regime::Paraxial,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Entangled,
    Separable,
}

impl From<KindArg> for AmplitudeKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Entangled => AmplitudeKind::Entangled,
            KindArg::Separable => AmplitudeKind::Separable,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasureArg {
    OnShell,
    Flat,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Options shared by the single-point commands.
#[derive(Args, Clone)]
struct PointArgs {
    /// Experiment config file (TOML); defaults to the sodium dipole setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Crystal length in μm.
    #[arg(long = "L")]
    length: Option<f64>,
    /// Pump waist Ω_p in μm (sets Ω_py too).
    #[arg(long)]
    omega_p: Option<f64>,
    #[arg(long, value_enum)]
    regime: Option<RegimeArg>,
    #[arg(long, value_enum)]
    measure: Option<MeasureArg>,
    /// Evaluate in the full 6-D space by Monte Carlo.
    #[arg(long)]
    full6d: bool,
    /// Monte Carlo samples (with --full6d).
    #[arg(long, default_value_t = oracle::DEFAULT_SAMPLES)]
    samples: u64,
    /// Monte Carlo seed (with --full6d); defaults to quadrature.seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl PointArgs {
    fn config(&self) -> qionize::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => ExperimentConfig::sodium_dipole(),
        };
        if let Some(l) = self.length {
            cfg = cfg.with_crystal_length(l);
        }
        if let Some(w) = self.omega_p {
            cfg = cfg.with_pump_waist(w);
        }
        if let Some(r) = self.regime {
            cfg = cfg.with_regime(r.into());
        }
        if let Some(m) = self.measure {
            cfg = cfg.with_measure(match m {
                MeasureArg::OnShell => Measure::OnShell,
                MeasureArg::Flat => Measure::Flat,
            });
        }
        if self.full6d {
            cfg = cfg.with_reduction(Reduction::Full6D);
        }
        if let Some(s) = self.seed {
            cfg.quadrature.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn mc_spec(&self, cfg: &ExperimentConfig) -> McSpec {
        McSpec::new(self.samples, cfg.quadrature.seed)
    }
}

#[derive(Args)]
struct RatioArgs {
    #[command(flatten)]
    point: PointArgs,
    /// Channel name; defaults to a dipole channel at the config energy.
    #[arg(long)]
    channel: Option<String>,
    /// Kernel: a table file, `synthetic-even` or `synthetic-odd`.
    #[arg(long)]
    kernel: Option<String>,
}

#[derive(Args)]
struct FluxArgs {
    #[command(flatten)]
    point: PointArgs,
    #[arg(long, value_enum, default_value = "entangled")]
    kind: KindArg,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    point: PointArgs,
    #[arg(long, value_enum, default_value = "entangled")]
    kind: KindArg,
    /// Grid points per axis (cell centres of the open square (−k₀, k₀)²).
    #[arg(long, default_value_t = 101)]
    n: usize,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Built-in plan (see `presets`).
    #[arg(long, conflicts_with_all = ["lengths", "waists"])]
    preset: Option<String>,
    /// Crystal lengths in μm, comma separated, ascending.
    #[arg(long = "L", value_delimiter = ',')]
    lengths: Vec<f64>,
    /// Pump waists in μm, comma separated, ascending.
    #[arg(long = "omega-p", value_delimiter = ',')]
    waists: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',')]
    regimes: Vec<RegimeArg>,
    #[arg(long, value_delimiter = ',')]
    channels: Vec<String>,
    /// Kernel applied to every channel (file, `synthetic-even` or `synthetic-odd`).
    #[arg(long)]
    kernel: Option<String>,
    /// Template config; defaults to the sodium dipole setup.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = oracle::DEFAULT_SAMPLES)]
    samples: u64,
    /// Seed for both the configuration draw and the Monte Carlo streams.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    configs: usize,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn io_err(path: Option<&PathBuf>, source: io::Error) -> Error {
    Error::Io {
        path: path.cloned().unwrap_or_else(|| PathBuf::from("<stdout>")),
        source,
    }
}

fn output(path: Option<&PathBuf>) -> qionize::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| io_err(Some(p), e))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_kernel(spec: &str) -> qionize::Result<Kernel> {
    match spec {
        "synthetic-even" => Ok(Kernel::SyntheticEven),
        "synthetic-odd" => Ok(Kernel::SyntheticOdd),
        path => Ok(Kernel::Tabulated(TabulatedKernel::load(path)?)),
    }
}

fn channel_for(
    name: Option<&str>,
    cfg: &ExperimentConfig,
    kernel: Option<&str>,
) -> qionize::Result<Channel> {
    let mut ch = match name {
        Some(n) => Channel::builtin(n)?,
        None => Channel::new("dipole", cfg.channel_energy_ev, 1),
    };
    if let Some(k) = kernel {
        ch = ch.with_kernel(parse_kernel(k)?);
    }
    Ok(ch)
}

fn run(cmd: Command) -> qionize::Result<ExitCode> {
    match cmd {
        Command::Presets => {
            for name in sweep::PRESET_NAMES {
                let plan = sweep::preset(name)?;
                let a1 = &plan.axis1;
                let describe = |a: &Axis| format!("{} x{}", a.param.as_str(), a.values.len());
                let a2 = plan.axis2.as_ref().map(describe).unwrap_or_default();
                let regimes: Vec<_> = plan.regimes.iter().map(|r| r.as_str()).collect();
                println!("{name}\t{}\t{a2}\t{}", describe(a1), regimes.join(","));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Ratio(args) => {
            let cfg = args.point.config()?;
            let ch = channel_for(args.channel.as_deref(), &cfg, args.kernel.as_deref())?;
            let res = if cfg.reduction == Reduction::Full6D {
                if ch.kernel.is_some() || ch.multipole_order != 1 {
                    return Err(Error::Precondition(
                        "--full6d supports the dipole channel only".into(),
                    ));
                }
                let mut r = oracle::mc_enhancement_ratio(
                    &cfg.clone().with_energy(ch.transition_energy_ev),
                    &args.point.mc_spec(&cfg),
                )?;
                r.channel = ch.name.clone();
                Ok(r)
            } else {
                enhancement_ratio(&cfg, &ch)
            };
            match res {
                Ok(r) => {
                    println!("{}", serde_json::to_string(&r).expect("ratio serializes"));
                    Ok(ExitCode::SUCCESS)
                }
                Err(Error::RatioNotConverged { partial }) => {
                    println!(
                        "{}",
                        serde_json::to_string(&partial).expect("ratio serializes")
                    );
                    eprintln!("error: enhancement ratio did not converge");
                    Ok(ExitCode::from(2))
                }
                Err(e) => Err(e),
            }
        }
        Command::Flux(args) => {
            let cfg = args.point.config()?;
            let kind: AmplitudeKind = args.kind.into();
            let line = if cfg.reduction == Reduction::Full6D {
                let r = oracle::mc_enhancement_ratio(&cfg, &args.point.mc_spec(&cfg))?;
                let (phi, k) = match kind {
                    AmplitudeKind::Entangled => (r.phi_ent, r.ent),
                    AmplitudeKind::Separable => (r.phi_sep, r.sep),
                };
                json!({
                    "kind": kind.as_str(), "regime": cfg.regime, "method": "full6d_monte_carlo",
                    "flux_um2_s": phi, "integrals": k,
                })
            } else {
                let f = photon_flux(kind, &cfg)?;
                json!({
                    "kind": kind.as_str(), "regime": cfg.regime, "method": "reduced2d_quadrature",
                    "flux_reduced": f.reduced, "filter_factor": FilterFactor::of(&cfg),
                    "note": "absolute flux = flux_reduced * sqrt(G2), G2 = (pi/omega_y^2)(pi/omega^2)",
                    "norm": f.norm, "weighted": f.weighted,
                })
            };
            println!("{line}");
            Ok(ExitCode::SUCCESS)
        }
        Command::AmplitudeGrid(args) => {
            let mut cfg = args.point.config()?;
            cfg = cfg.with_reduction(Reduction::Reduced2D);
            cfg.validate()?;
            if args.n == 0 {
                return Err(Error::config("n", "grid needs at least one point"));
            }
            let kind: AmplitudeKind = args.kind.into();
            let k0 = cfg.k0();
            let mut out = output(args.out.as_ref())?;
            let w = |out: &mut Box<dyn Write>, s: String| {
                writeln!(out, "{s}").map_err(|e| io_err(args.out.as_ref(), e))
            };
            w(
                &mut out,
                format!(
                    "# {} amplitude, regime {}, L = {} um, omega_p = {} um, k0 = {k0}",
                    kind.as_str(),
                    cfg.regime,
                    cfg.crystal_length_um,
                    cfg.pump_waist_um
                ),
            )?;
            w(&mut out, "kix,ksx,F".into())?;
            let node = |a: usize| k0 * (-1.0 + (2 * a + 1) as f64 / args.n as f64);
            for a in 0..args.n {
                for b in 0..args.n {
                    let p = ReducedPoint::new(node(a), node(b), k0)?;
                    w(
                        &mut out,
                        format!("{},{},{}", p.kix, p.ksx, eval_reduced(kind, &p, &cfg)?),
                    )?;
                }
            }
            out.flush().map_err(|e| io_err(args.out.as_ref(), e))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep(args) => {
            let template = match &args.config {
                Some(p) => load_config(p)?,
                None => ExperimentConfig::sodium_dipole(),
            };
            let mut plan = match &args.preset {
                Some(name) => sweep::preset(name)?,
                None => {
                    let mut axes = Vec::new();
                    if !args.lengths.is_empty() {
                        axes.push(Axis::new(Param::CrystalLength, args.lengths.clone()));
                    }
                    if !args.waists.is_empty() {
                        axes.push(Axis::new(Param::PumpWaist, args.waists.clone()));
                    }
                    let mut axes = axes.into_iter();
                    let axis1 = axes.next().ok_or_else(|| {
                        Error::config("sweep", "give --preset or at least one of --L / --omega-p")
                    })?;
                    SweepPlan {
                        name: "custom".into(),
                        axis1,
                        axis2: axes.next(),
                        channels: vec![Channel::new("dipole", template.channel_energy_ev, 1)],
                        regimes: vec![Regime::Exact],
                        notes: vec![],
                    }
                }
            };
            if !args.regimes.is_empty() {
                plan.regimes = args.regimes.iter().map(|r| Regime::from(*r)).collect();
            }
            if !args.channels.is_empty() {
                plan.channels = args
                    .channels
                    .iter()
                    .map(|c| Channel::builtin(c))
                    .collect::<Result<_, _>>()?;
            }
            if let Some(k) = &args.kernel {
                let kernel = parse_kernel(k)?;
                plan.channels = plan
                    .channels
                    .into_iter()
                    .map(|c| c.with_kernel(kernel.clone()))
                    .collect();
            }
            let records = sweep::run_sweep(&plan, &template)?;
            let mut out = output(args.out.as_ref())?;
            match args.format {
                Format::Csv => sweep::write_csv(&mut out, &plan, &template, &records),
                Format::Json => sweep::write_json_lines(&mut out, &records),
            }
            .and_then(|_| out.flush())
            .map_err(|e| io_err(args.out.as_ref(), e))?;
            let failed = records.iter().filter(|r| !r.converged).count();
            if failed > 0 {
                eprintln!(
                    "warning: {failed} of {} grid points did not converge",
                    records.len()
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::OracleCheck(args) => {
            let base = match &args.config {
                Some(p) => load_config(p)?,
                None => ExperimentConfig::sodium_dipole(),
            };
            let points = oracle::cross_check_points(args.configs, args.seed);
            let checks = oracle::cross_validate(&base, &points, args.samples, args.seed)?;
            for c in &checks {
                println!("{}", serde_json::to_string(c).expect("check serializes"));
            }
            let failed = checks.iter().filter(|c| !c.pass).count();
            eprintln!(
                "oracle-check: {} of {} configurations agree",
                checks.len() - failed,
                checks.len()
            );
            Ok(if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
    }
}
