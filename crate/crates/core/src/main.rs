use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use uavsec::pipeline::{self, ExperimentConfig, RunReport};
use uavsec::Result;

#[derive(Parser)]
#[command(name = "uavsec", version, about = "Autoencoder image transmission over an artificial-noise wiretap link")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one autoencoder per latent length and save checkpoints.
    Train(Common),
    /// Send the test split over the link and write report.csv.
    Eval(Common),
    /// Full experiment: report, secrecy and BER tables, figures.
    Sweep(Common),
    /// Monte-Carlo BPSK bit error rates for Bob and Eve.
    Ber {
        #[command(flatten)]
        common: Common,
        /// Bits per SNR point.
        #[arg(long)]
        bits: Option<usize>,
    },
    /// Secrecy-rate statistics over random channel draws.
    Secrecy {
        #[command(flatten)]
        common: Common,
        /// Channel draws per SNR point.
        #[arg(long, default_value_t = 1000)]
        draws: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configuration and the UAVSEC_OUTPUT_DIR variable.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Arithmetic precision of the autoencoder.
    #[arg(long, value_enum, default_value = "f32")]
    precision: Precision,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.resolve_output_dir(self.output_dir.clone());
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_report(report: &RunReport) {
    println!("{:>6} {:>7} {:>5} {:>14} {:>12} {:>9}", "L", "snr_db", "party", "normalized_mse", "plain_mse", "psnr_db");
    for c in &report.cells {
        let q = &c.quality;
        println!(
            "{:>6} {:>7} {:>5} {:>14.5} {:>12.5} {:>9.2}",
            c.latent_length,
            c.snr_db,
            c.party.as_str(),
            q.normalized_mse.mean,
            q.plain_mse.mean,
            q.psnr_db.mean
        );
    }
    for (l, q) in &report.clean {
        println!(
            "clean L={l}: normalized_mse {:.5}, plain_mse {:.5}, psnr {:.2} dB, compression {:.2}%",
            q.normalized_mse.mean,
            q.plain_mse.mean,
            q.psnr_db.mean,
            100.0 * q.compression_ratio
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(common) => {
            let cfg = common.config()?;
            let histories = match common.precision {
                Precision::F32 => pipeline::train_models::<f32>(&cfg)?,
                Precision::F64 => pipeline::train_models::<f64>(&cfg)?,
            };
            pipeline::emit_train_csv(&histories, cfg.output_dir.join("train_loss.csv"))?;
            for (l, h) in &histories {
                println!("L={l}: loss {:.6} -> {:.6}, saved {}", h[0], h[h.len() - 1], cfg.checkpoint_path(*l).display());
            }
        }
        Command::Eval(common) => {
            let cfg = common.config()?;
            let report = match common.precision {
                Precision::F32 => pipeline::run_end_to_end::<f32>(&cfg)?,
                Precision::F64 => pipeline::run_end_to_end::<f64>(&cfg)?,
            };
            pipeline::emit_csv(&report, cfg.output_dir.join("report.csv"))?;
            print_report(&report);
        }
        Command::Sweep(common) => {
            let cfg = common.config()?;
            let report = match common.precision {
                Precision::F32 => pipeline::sweep::<f32>(&cfg)?,
                Precision::F64 => pipeline::sweep::<f64>(&cfg)?,
            };
            print_report(&report);
            println!("wrote results to {}", cfg.output_dir.display());
        }
        Command::Ber { common, bits } => {
            let mut cfg = common.config()?;
            if let Some(bits) = bits {
                cfg.ber_bits_per_point = bits;
            }
            let report = RunReport { ber: pipeline::ber_tables(&cfg)?, ..RunReport::default() };
            pipeline::emit_ber_csv(&report, cfg.output_dir.join("ber.csv"))?;
            pipeline::emit_plots(&report, &cfg.output_dir)?;
            println!("{:>12} {:>7} {:>12}", "scenario", "snr_db", "ber");
            for (scenario, points) in &report.ber {
                for p in points {
                    println!("{:>12} {:>7} {:>12.6}", scenario.as_str(), p.snr_db, p.ber);
                }
            }
        }
        Command::Secrecy { common, draws } => {
            let cfg = common.config()?;
            let report = RunReport { secrecy: pipeline::secrecy_table(&cfg, draws)?, ..RunReport::default() };
            pipeline::emit_secrecy_csv(&report, cfg.output_dir.join("secrecy.csv"))?;
            pipeline::emit_plots(&report, &cfg.output_dir)?;
            println!("{:>7} {:>10} {:>10} {:>10} {:>9}", "snr_db", "bob", "eve", "bound", "positive");
            for s in &report.secrecy {
                println!(
                    "{:>7} {:>10.4} {:>10.4} {:>10.4} {:>9.3}",
                    s.snr_db, s.bob_capacity.mean, s.eve_capacity.mean, s.secrecy_lower_bound.mean, s.positive_fraction
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
