//! Command-line front end: run scenarios and sweeps, calibrate free
//! parameters and lint configuration files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dpspon::link::{simulate_timetags, TagSidecar};
use dpspon::scenario::{
    bundled_scenario, bundled_scenarios, bundled_sweep, bundled_sweeps, calibrate,
    calibrate_baseline, emit_report, run_scenario, run_sweep, sidecar_path, Anchor, Format,
    FreeParameter, Mode, Observable, Report, ScenarioConfig, SweepSpec,
};
use dpspon::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_CALIBRATION: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "dpspon",
    version,
    about = "DPS QKD coexistence model for passive optical networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario through the full pipeline.
    Run {
        #[command(flatten)]
        common: Common,
        /// Simulated seconds of a Monte Carlo run.
        #[arg(long)]
        duration: Option<f64>,
        /// Also write the raw Monte Carlo tag stream (`time_ps,port` CSV).
        #[arg(long, value_name = "PATH")]
        tags: Option<PathBuf>,
    },
    /// Sweep one parameter; either --axis/--values or a bundled sweep name.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Bundled sweep; also selects its scenario unless --config is given.
        #[arg(long, conflicts_with_all = ["axis", "values"])]
        sweep: Option<String>,
        /// Dotted path into the scenario, or reach_km, upstream_count, loss_budget_db.
        #[arg(long, requires = "values")]
        axis: Option<String>,
        #[arg(long, value_delimiter = ',', num_args = 1.., requires = "axis")]
        values: Option<Vec<f64>>,
    },
    /// Fit one free parameter to measured anchors.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// raman_scale, excess_loss or visibility.
        #[arg(long, required_unless_present = "baseline")]
        param: Option<FreeParameter>,
        /// raman_counts_s, raw_rate_bs or qber.
        #[arg(long, requires = "param")]
        observable: Option<Observable>,
        #[arg(long, requires = "observable")]
        target: Option<f64>,
        /// Scenario the anchor is measured on (bundled name or file); the
        /// configuration itself by default.
        #[arg(long, requires = "target")]
        anchor_scenario: Option<String>,
        /// Run the three fits that pin the bundled baseline.
        #[arg(long, conflicts_with_all = ["param", "observable", "target"])]
        baseline: bool,
        /// Write the configuration with the fitted value(s) to this file.
        #[arg(long, value_name = "PATH")]
        write_config: Option<PathBuf>,
    },
    /// Check a configuration and list every invalid field.
    Validate {
        /// Scenario file or bundled scenario name.
        #[arg(long)]
        config: String,
    },
    /// List bundled scenarios and sweeps.
    Scenarios,
}

#[derive(Args)]
struct Common {
    /// Scenario file or bundled scenario name.
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; the report goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: Format,
}

impl Common {
    fn load(&self, fallback: Option<&str>) -> dpspon::Result<ScenarioConfig> {
        let name = self
            .config
            .as_deref()
            .or(fallback)
            .ok_or_else(|| Error::Argument("--config is required".to_string()))?;
        let mut cfg = load_config(name)?;
        if let Some(mode) = self.mode {
            cfg.run.mode = mode;
        }
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        Ok(cfg)
    }

    fn emit(&self, report: &Report) -> dpspon::Result<()> {
        match &self.out {
            Some(path) => emit_report(report, self.format, path),
            None => {
                print!("{}", report.render(self.format)?);
                Ok(())
            }
        }
    }
}

/// A readable file wins over a bundled scenario of the same name.
fn load_config(name: &str) -> dpspon::Result<ScenarioConfig> {
    let path = Path::new(name);
    if path.is_file() {
        return ScenarioConfig::from_path(path);
    }
    match bundled_scenario(name) {
        Ok(cfg) => Ok(cfg),
        Err(_) if name.contains(std::path::MAIN_SEPARATOR) || name.ends_with(".json") => {
            ScenarioConfig::from_path(path)
        }
        Err(e) => Err(e),
    }
}

fn write_file(path: &Path, text: &str) -> dpspon::Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run(common: &Common, duration: Option<f64>, tags: Option<&Path>) -> dpspon::Result<()> {
    let mut cfg = common.load(None)?;
    if let Some(d) = duration {
        cfg.run.duration_s = d;
    }
    let report = run_scenario(&cfg)?;
    if let Some(path) = tags {
        if cfg.run.mode != Mode::MonteCarlo {
            return Err(Error::Argument(
                "--tags needs --mode monte_carlo".to_string(),
            ));
        }
        // the same seed reproduces the stream the report was scored on
        let sim = simulate_timetags(
            &cfg.transmitter,
            &cfg.detector.interferometer,
            report.path_loss_db,
            &cfg.detector.model,
            report.raman_counts_s,
            cfg.run.duration_s,
            cfg.run.seed,
        )?;
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        sim.stream.write_csv(std::io::BufWriter::new(file))?;
        let sidecar = TagSidecar {
            seed: cfg.run.seed,
            config_hash: cfg.hash(),
            duration_s: cfg.run.duration_s,
            symbol_rate_hz: cfg.transmitter.symbol_rate_hz,
            tags: sim.stream.len(),
            truth: sim.truth,
        };
        write_file(
            &sidecar_path(path),
            &(serde_json::to_string_pretty(&sidecar)? + "\n"),
        )?;
    }
    common.emit(&Report::scenario(&cfg, report))
}

fn sweep(
    common: &Common,
    name: Option<&str>,
    axis: Option<String>,
    values: Option<Vec<f64>>,
) -> dpspon::Result<()> {
    let (cfg, spec) = match (name, axis, values) {
        (Some(name), _, _) => {
            let bundled = bundled_sweep(name)?;
            (common.load(Some(&bundled.scenario))?, bundled.spec)
        }
        (None, Some(axis), Some(values)) => (common.load(None)?, SweepSpec { axis, values }),
        _ => {
            return Err(Error::Argument(
                "give either --sweep NAME or --axis with --values".to_string(),
            ))
        }
    };
    let result = run_sweep(&cfg, &spec)?;
    common.emit(&Report::sweep(&cfg, spec, result))
}

struct CalibrateArgs {
    param: Option<FreeParameter>,
    observable: Option<Observable>,
    target: Option<f64>,
    anchor_scenario: Option<String>,
    baseline: bool,
    write_config: Option<PathBuf>,
}

fn calibrate_cmd(common: &Common, args: CalibrateArgs) -> dpspon::Result<()> {
    if args.baseline {
        let fits = calibrate_baseline()?;
        let mut cfg = common.load(Some("N"))?;
        fits.apply(&mut cfg);
        if let Some(path) = &args.write_config {
            write_file(path, &(cfg.to_json() + "\n"))?;
        }
        for fit in [fits.raman_scale, fits.excess_loss, fits.visibility] {
            let report = Report::calibration(&cfg, fit);
            match &common.out {
                // one file per parameter next to the requested name
                Some(out) => {
                    let mut name = out.as_os_str().to_owned();
                    if let Report::Calibration { result, .. } = &report {
                        name.push(format!(".{}", result.parameter.name()));
                    }
                    emit_report(&report, common.format, Path::new(&name))?;
                }
                None => print!("{}", report.render(common.format)?),
            }
        }
        return Ok(());
    }

    let cfg = common.load(None)?;
    let (Some(param), Some(observable), Some(target)) = (args.param, args.observable, args.target)
    else {
        return Err(Error::Argument(
            "calibration needs --param, --observable and --target (or --baseline)".to_string(),
        ));
    };
    let anchor = Anchor::new(
        args.anchor_scenario.as_deref().unwrap_or("self"),
        observable,
        target,
    );
    let result = calibrate(&cfg, &[anchor], param)?;
    let report = Report::calibration(&cfg, result);
    if let (
        Some(path),
        Report::Calibration {
            calibrated_config, ..
        },
    ) = (&args.write_config, &report)
    {
        write_file(path, &(calibrated_config.to_json() + "\n"))?;
    }
    common.emit(&report)
}

fn validate(name: &str) -> dpspon::Result<()> {
    let cfg = load_config(name)?;
    cfg.validate()?;
    // referenced files must exist and parse
    cfg.raman_profile()?;
    println!("{}: ok ({})", name, cfg.hash());
    Ok(())
}

fn list_scenarios() {
    println!("scenarios:");
    for cfg in bundled_scenarios() {
        println!("  {:<13} {}", cfg.name, cfg.description);
    }
    println!("sweeps:");
    for s in bundled_sweeps() {
        println!(
            "  {:<13} {} ({}, {} points on {})",
            s.name,
            s.description,
            s.spec.axis,
            s.spec.values.len(),
            s.scenario
        );
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Lookup { .. } | Error::Argument(_) | Error::Json(_) => {
            EXIT_CONFIG
        }
        Error::Calibration { .. } => EXIT_CALIBRATION,
        Error::Io { .. } | Error::Csv(_) => EXIT_IO,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            common,
            duration,
            tags,
        } => run(&common, duration, tags.as_deref()),
        Command::Sweep {
            common,
            sweep: name,
            axis,
            values,
        } => sweep(&common, name.as_deref(), axis, values),
        Command::Calibrate {
            common,
            param,
            observable,
            target,
            anchor_scenario,
            baseline,
            write_config,
        } => calibrate_cmd(
            &common,
            CalibrateArgs {
                param,
                observable,
                target,
                anchor_scenario,
                baseline,
                write_config,
            },
        ),
        Command::Validate { config } => validate(&config),
        Command::Scenarios => {
            list_scenarios();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code(&err);
            eprintln!("error: {err}");
            ExitCode::from(code)
        }
    }
}
