//! Command-line driver for the wiretap power-allocation experiments.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wiretap_game::equilibrium::{uniqueness_probe, Schedule};
use wiretap_game::experiments::{
    format_decimal, price_of_anarchy, run_convergence_experiment, run_sweep, Mode, SweepSpec,
};
use wiretap_game::rates::concavity_certificate;
use wiretap_game::{load_config, Error, GameConfig};

#[derive(Parser)]
#[command(
    name = "wiretap",
    version,
    about = "Bayesian power allocation on the fading MAC wiretap channel"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-round user rates of the iterative best-response algorithm.
    Converge {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        snr: f64,
        #[arg(long, default_value = "sequential")]
        schedule: Schedule,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sum rate against SNR for the selected allocation modes.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        /// Comma-separated SNR values, e.g. `1,2,5`.
        #[arg(
            long,
            value_delimiter = ',',
            conflicts_with = "snr_range",
            required_unless_present = "snr_range"
        )]
        snr_list: Option<Vec<f64>>,
        /// Inclusive range `start:stop:step`, e.g. `1:10:1`.
        #[arg(long)]
        snr_range: Option<String>,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "uniform,bayesian,central"
        )]
        modes: Vec<Mode>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Equilibrium and centrally optimal sum rates at one SNR.
    Poa {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        snr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Concavity certificate and uniqueness probe.
    Certify {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random initializations for the uniqueness probe.
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
}

#[derive(Args)]
struct ConfigArg {
    /// JSON instance file.
    #[arg(long)]
    config: PathBuf,
}

impl ConfigArg {
    fn load(&self) -> Result<GameConfig, Error> {
        load_config(&self.config)
    }
}

enum Outcome {
    Done,
    NotConverged,
}

fn parse_range(spec: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::InvalidArgument(format!("snr range {spec:?} must be start:stop:step"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0 && start.is_finite() && stop.is_finite() && stop >= start) {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn check_snr(snr: f64) -> Result<(), Error> {
    if snr.is_finite() && snr > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "snr {snr} must be positive"
        )))
    }
}

fn run(cmd: Command) -> Result<Outcome, Error> {
    match cmd {
        Command::Converge {
            config,
            snr,
            schedule,
            out,
        } => {
            let cfg = config.load()?;
            let res = run_convergence_experiment(&cfg, snr, schedule)?;
            emit(&res.csv, out.as_ref())?;
            Ok(if res.converged {
                Outcome::Done
            } else {
                Outcome::NotConverged
            })
        }
        Command::Sweep {
            config,
            snr_list,
            snr_range,
            modes,
            seed,
            out,
        } => {
            let cfg = config.load()?;
            let snrs = match (snr_list, snr_range) {
                (Some(list), _) => list,
                (None, Some(range)) => parse_range(&range)?,
                (None, None) => unreachable!("clap requires one of the SNR flags"),
            };
            let spec = SweepSpec::new(snrs, modes, seed)?;
            let res = run_sweep(&cfg, &spec)?;
            emit(&res.csv, out.as_ref())?;
            Ok(if res.converged {
                Outcome::Done
            } else {
                Outcome::NotConverged
            })
        }
        Command::Poa { config, snr, seed } => {
            check_snr(snr)?;
            let cfg = config.load()?.at_snr(snr);
            let r = price_of_anarchy(&cfg, seed)?;
            let mut text = String::from("snr,sum_rate_be,sum_rate_opt,sum_rate_uniform,poa\n");
            text += &[
                r.snr,
                r.sum_rate_be,
                r.sum_rate_opt,
                r.sum_rate_uniform,
                r.poa,
            ]
            .map(format_decimal)
            .join(",");
            text.push('\n');
            if !r.converged {
                text += "# equilibrium iteration did not converge\n";
            }
            print!("{text}");
            Ok(if r.converged {
                Outcome::Done
            } else {
                Outcome::NotConverged
            })
        }
        Command::Certify {
            config,
            samples,
            seed,
            trials,
        } => {
            let cfg = config.load()?;
            let cert = concavity_certificate(&cfg, samples, seed);
            println!("# concavity certificate");
            println!("samples,rejected,max_eigenvalue,passes");
            println!(
                "{},{},{},{}",
                cert.sample_count,
                cert.rejected,
                format_decimal(cert.max_eigenvalue),
                cert.passes()
            );
            for d in &cert.diagnostics {
                println!("# {d}");
            }
            let probe = uniqueness_probe(&cfg, trials, seed)?;
            println!("# uniqueness probe");
            println!("trials,non_converged,max_distance");
            println!(
                "{},{},{}",
                trials,
                probe.non_converged.len(),
                format_decimal(probe.max_distance)
            );
            Ok(if probe.non_converged.is_empty() {
                Outcome::Done
            } else {
                Outcome::NotConverged
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("error: solver did not converge");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        assert_eq!(parse_range("1:3:1").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_range("1:2:0.5").unwrap(), vec![1.0, 1.5, 2.0]);
        assert!(parse_range("1:3").is_err());
        assert!(parse_range("3:1:1").is_err());
        assert!(parse_range("1:3:0").is_err());
    }

    #[test]
    fn cli_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
