use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use photocorr::io::{read_histogram_csv, read_stream, write_histogram_csv};
use photocorr::pipeline::{
    analyze_histogram, compare_schemes, correlate, design_check, estimator_name, preset, preset_names, preset_text,
    run, write_outputs, PipelineConfig, Report,
};

/// Photon-correlation simulation and analysis.
#[derive(Parser)]
#[command(name = "photocorr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, detect, correlate and analyze one scheme.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Correlate recorded timestamp streams (binary or text).
    Correlate {
        #[command(flatten)]
        run: RunArgs,
        /// One stream, or start and stop streams for two-detector estimators.
        #[arg(required = true)]
        streams: Vec<PathBuf>,
    },
    /// Analyze a histogram CSV written by `correlate` or `simulate`.
    Analyze {
        #[command(flatten)]
        run: RunArgs,
        histogram: PathBuf,
    },
    /// Run both schemes on the configured source and compare g2(0).
    Compare {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Report the design constraints; exits 1 when any is violated.
    Check {
        #[command(flatten)]
        source: ConfigSource,
    },
    /// List the built-in presets, or print one.
    Presets { name: Option<String> },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ConfigSource {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset name
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: ConfigSource,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Replaces `excitation.seed`.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Refuse to run when the design constraints are violated.
    #[arg(long)]
    strict: bool,
}

impl ConfigSource {
    fn load(&self) -> Result<PipelineConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => {
                PipelineConfig::from_file(path).with_context(|| format!("reading config {}", path.display()))
            }
            (None, Some(name)) => Ok(preset(name)?),
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

impl RunArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = self.source.load()?;
        if let Some(seed) = self.seed_override {
            cfg.excitation.seed = seed;
        }
        if self.strict {
            if let Some(d) = design_check(&cfg) {
                if !d.passes {
                    bail!("design constraints violated: {}", d.violations.join("; "));
                }
            }
        }
        Ok(cfg)
    }
}

fn write_report(dir: &Path, report: &Report) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.txt"), report.to_string())?;
    print!("{report}");
    Ok(())
}

fn design_status(cfg: &PipelineConfig) -> ExitCode {
    match design_check(cfg) {
        Some(d) if !d.passes => ExitCode::from(1),
        _ => ExitCode::SUCCESS,
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { run: args } => {
            let cfg = args.load()?;
            let out = run(&cfg, args.strict)?;
            write_outputs(&out, &args.out_dir)?;
            print!("{}", out.report);
            Ok(design_status(&cfg))
        }
        Command::Correlate { run: args, streams } => {
            let cfg = args.load()?;
            let loaded = streams
                .iter()
                .map(|p| read_stream(p).with_context(|| format!("reading stream {}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<_> = loaded.iter().collect();
            let hist = correlate(&cfg, &refs)?;
            let mut report = Report::default();
            report.push("run", &cfg.name);
            report.push("estimator", estimator_name(cfg.correlator.estimator));
            for (p, s) in streams.iter().zip(&loaded) {
                report.push(format!("input.{}", p.display()), s.len());
            }
            let a = analyze_histogram(&cfg, &hist, &mut report)?;
            fs::create_dir_all(&args.out_dir)?;
            write_histogram_csv(&a.g2, args.out_dir.join("histogram.csv"))?;
            write_report(&args.out_dir, &report)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze { run: args, histogram } => {
            let cfg = args.load()?;
            let table =
                read_histogram_csv(&histogram).with_context(|| format!("reading histogram {}", histogram.display()))?;
            let hist = table.to_histogram(cfg.correlator.estimator)?;
            let mut report = Report::default();
            report.push("run", &cfg.name);
            report.push("input", histogram.display());
            analyze_histogram(&cfg, &hist, &mut report)?;
            write_report(&args.out_dir, &report)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { run: args } => {
            let cfg = args.load()?;
            let c = compare_schemes(&cfg, args.strict)?;
            write_report(&args.out_dir, &c.report)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { source } => {
            let cfg = source.load()?;
            match design_check(&cfg) {
                None => {
                    println!("design.applicable=false");
                    Ok(ExitCode::SUCCESS)
                }
                Some(d) => {
                    println!("design.passes={}", d.passes);
                    println!("design.min_delay_ns={:.6}", d.min_delay_ps / 1e3);
                    if let Some(m) = d.max_delay_ps {
                        println!("design.max_delay_ns={:.6}", m / 1e3);
                    }
                    println!("design.efficiency={:.6}", d.efficiency);
                    for v in &d.violations {
                        println!("violation: {v}");
                    }
                    Ok(design_status(&cfg))
                }
            }
        }
        Command::Presets { name: None } => {
            for n in preset_names() {
                println!("{n}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets { name: Some(n) } => match preset_text(&n) {
            Some(t) => {
                print!("{t}");
                Ok(ExitCode::SUCCESS)
            }
            None => bail!("no preset named `{n}`"),
        },
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
