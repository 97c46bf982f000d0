//! Social welfare, price of anarchy, convergence traces and SNR sweeps with
//! CSV output.
//!
//! CSV output has a header row, comma-separated fields, decimals with 12
//! significant digits, and comment rows starting with `#`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::centralized::{default_starts, solve_social_optimum_from, DEFAULT_RESTARTS};
use crate::equilibrium::{run_algorithm1, Schedule};
use crate::error::{Error, Result};
use crate::model::{validate_config, GameConfig, StrategyProfile};
use crate::rates::ergodic_utility;

/// Sum of the users' clamped expected secrecy rates, bits.
pub fn social_welfare(cfg: &GameConfig, profile: &StrategyProfile) -> f64 {
    (0..cfg.num_users())
        .map(|k| ergodic_utility(cfg, profile, k, true))
        .sum()
}

/// Formats `x` as a plain decimal with 12 significant digits.
pub fn format_decimal(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let exp: i32 = sci
        .rsplit('e')
        .next()
        .and_then(|e| e.parse().ok())
        .expect("exponent in scientific format");
    let prec = (11 - exp).max(0) as usize;
    format!("{x:.prec$}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Uniform,
    Bayesian,
    Central,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Uniform => "uniform",
            Mode::Bayesian => "bayesian",
            Mode::Central => "central",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" => Ok(Mode::Uniform),
            "bayesian" => Ok(Mode::Bayesian),
            "central" => Ok(Mode::Central),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode {other:?} (expected uniform, bayesian or central)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub snr_values: Vec<f64>,
    /// Sorted and deduplicated by [`SweepSpec::new`].
    pub modes: Vec<Mode>,
    pub seed: u64,
}

impl SweepSpec {
    pub fn new(snr_values: Vec<f64>, mut modes: Vec<Mode>, seed: u64) -> Result<Self> {
        if snr_values.is_empty() {
            return Err(Error::InvalidArgument("snr list is empty".into()));
        }
        if let Some(bad) = snr_values.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "snr {bad} must be positive"
            )));
        }
        if snr_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "snr values must be strictly increasing".into(),
            ));
        }
        modes.sort();
        modes.dedup();
        if modes.is_empty() {
            return Err(Error::InvalidArgument("no modes selected".into()));
        }
        Ok(Self {
            snr_values,
            modes,
            seed,
        })
    }

    fn has(&self, m: Mode) -> bool {
        self.modes.contains(&m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyReport {
    pub snr: f64,
    pub sum_rate_be: f64,
    pub sum_rate_opt: f64,
    pub sum_rate_uniform: f64,
    pub poa: f64,
    /// Whether the equilibrium iteration converged.
    pub converged: bool,
}

fn check_config(cfg: &GameConfig) -> Result<()> {
    let diags = validate_config(cfg);
    if diags.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(diags))
    }
}

/// SNR of a configuration: first user's budget over the noise power.
pub fn config_snr(cfg: &GameConfig) -> f64 {
    cfg.users
        .first()
        .map_or(0.0, |u| u.avg_power / cfg.noise_power)
}

/// Equilibrium, central optimum and uniform baseline of `cfg` as given.
/// The central search also starts from the equilibrium profile.
pub fn price_of_anarchy(cfg: &GameConfig, seed: u64) -> Result<EfficiencyReport> {
    check_config(cfg)?;
    let trace = run_algorithm1(cfg, None, Schedule::Sequential)?;
    let be = trace.final_profile();
    let sum_rate_be = social_welfare(cfg, be);
    let mut starts = default_starts(cfg, DEFAULT_RESTARTS, seed);
    starts.push(be.clone());
    let central = solve_social_optimum_from(cfg, &starts)?;
    Ok(EfficiencyReport {
        snr: config_snr(cfg),
        sum_rate_be,
        sum_rate_opt: central.sum_rate,
        sum_rate_uniform: social_welfare(cfg, &StrategyProfile::uniform(cfg)),
        poa: sum_rate_be / central.sum_rate,
        converged: trace.converged,
    })
}

/// CSV text plus whether every solver run converged.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvOutput {
    pub csv: String,
    pub converged: bool,
}

/// Per-round per-user clamped rates of the iteration at the given SNR,
/// starting from the all-zero profile.
pub fn run_convergence_experiment(
    cfg: &GameConfig,
    snr: f64,
    schedule: Schedule,
) -> Result<CsvOutput> {
    check_config(cfg)?;
    if !(snr.is_finite() && snr > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "snr {snr} must be positive"
        )));
    }
    let scaled = cfg.at_snr(snr);
    let trace = run_algorithm1(&scaled, None, schedule)?;
    let mut csv = String::from("iteration,user,rate\n");
    for (it, rates) in trace.utilities.iter().enumerate() {
        for (k, r) in rates.iter().enumerate() {
            writeln!(csv, "{it},{k},{}", format_decimal(*r)).unwrap();
        }
    }
    if !trace.converged {
        writeln!(
            csv,
            "# not converged after {} iterations (last change {})",
            trace.iterations_to_converge,
            format_decimal(trace.final_change)
        )
        .unwrap();
    }
    Ok(CsvOutput {
        csv,
        converged: trace.converged,
    })
}

/// Sum rate per SNR and mode. A `poa` column is added when both the
/// Bayesian and central modes are selected; it repeats on every row of an
/// SNR point.
pub fn run_sweep(cfg: &GameConfig, sweep: &SweepSpec) -> Result<CsvOutput> {
    check_config(cfg)?;
    let with_poa = sweep.has(Mode::Bayesian) && sweep.has(Mode::Central);
    let mut csv = String::from(if with_poa {
        "snr,mode,sum_rate,poa\n"
    } else {
        "snr,mode,sum_rate\n"
    });
    let mut all_converged = true;
    for &snr in &sweep.snr_values {
        let scaled = cfg.at_snr(snr);
        let mut values: Vec<(Mode, f64)> = Vec::new();
        let mut be_profile = None;
        if sweep.has(Mode::Uniform) {
            values.push((
                Mode::Uniform,
                social_welfare(&scaled, &StrategyProfile::uniform(&scaled)),
            ));
        }
        if sweep.has(Mode::Bayesian) {
            let trace = run_algorithm1(&scaled, None, Schedule::Sequential)?;
            if !trace.converged {
                all_converged = false;
                writeln!(
                    csv,
                    "# snr {}: bayesian iteration not converged after {} iterations",
                    format_decimal(snr),
                    trace.iterations_to_converge
                )
                .unwrap();
            }
            let be = trace.final_profile().clone();
            values.push((Mode::Bayesian, social_welfare(&scaled, &be)));
            be_profile = Some(be);
        }
        if sweep.has(Mode::Central) {
            let mut starts = default_starts(&scaled, DEFAULT_RESTARTS, sweep.seed);
            starts.extend(be_profile);
            let central = solve_social_optimum_from(&scaled, &starts)?;
            if !central.converged {
                all_converged = false;
                writeln!(
                    csv,
                    "# snr {}: central search stopped at the iteration limit",
                    format_decimal(snr)
                )
                .unwrap();
            }
            values.push((Mode::Central, central.sum_rate));
        }
        let poa = with_poa.then(|| {
            let get = |m| {
                values
                    .iter()
                    .find(|(v, _)| *v == m)
                    .map(|(_, r)| *r)
                    .unwrap()
            };
            get(Mode::Bayesian) / get(Mode::Central)
        });
        for (mode, rate) in &values {
            write!(
                csv,
                "{},{mode},{}",
                format_decimal(snr),
                format_decimal(*rate)
            )
            .unwrap();
            if let Some(p) = poa {
                write!(csv, ",{}", format_decimal(p)).unwrap();
            }
            csv.push('\n');
        }
    }
    Ok(CsvOutput {
        csv,
        converged: all_converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ChannelLaw;

    fn single_state() -> GameConfig {
        GameConfig::symmetric(2, ChannelLaw::equiprobable(vec![2.0], vec![0.2]), 1.0, 1.0)
    }

    #[test]
    fn decimal_format() {
        assert_eq!(format_decimal(0.0), "0");
        assert_eq!(format_decimal(1.0), "1.00000000000");
        assert_eq!(format_decimal(0.51457317282975), "0.514573172830");
        assert_eq!(format_decimal(-12.5), "-12.5000000000");
        assert_eq!(format_decimal(9.9999999999996), "10.0000000000");
        assert_eq!(format_decimal(1.5e13), "15000000000000");
        assert_eq!(format_decimal(2.5e-7), "0.000000250000000000");
    }

    #[test]
    fn welfare_examples() {
        let cfg = single_state();
        assert_eq!(social_welfare(&cfg, &StrategyProfile::zeros(&cfg)), 0.0);
        let w = social_welfare(&cfg, &StrategyProfile::uniform(&cfg));
        assert!((w - 1.02914).abs() < 1e-4, "{w}");
    }

    #[test]
    fn sweep_spec_validation() {
        assert!(SweepSpec::new(vec![], vec![Mode::Uniform], 0).is_err());
        assert!(SweepSpec::new(vec![2.0, 1.0], vec![Mode::Uniform], 0).is_err());
        assert!(SweepSpec::new(vec![1.0, 1.0], vec![Mode::Uniform], 0).is_err());
        assert!(SweepSpec::new(vec![0.0], vec![Mode::Uniform], 0).is_err());
        assert!(SweepSpec::new(vec![1.0], vec![], 0).is_err());
        let s = SweepSpec::new(
            vec![1.0],
            vec![Mode::Central, Mode::Uniform, Mode::Central],
            0,
        )
        .unwrap();
        assert_eq!(s.modes, vec![Mode::Uniform, Mode::Central]);
    }

    #[test]
    fn uniform_only_sweep_has_no_poa() {
        let cfg = single_state();
        let s = SweepSpec::new(vec![1.0, 2.0], vec![Mode::Uniform], 0).unwrap();
        let out = run_sweep(&cfg, &s).unwrap();
        let lines: Vec<&str> = out.csv.lines().collect();
        assert_eq!(lines[0], "snr,mode,sum_rate");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1.00000000000,uniform,1.0291"));
    }

    #[test]
    fn convergence_csv_starts_at_zero() {
        let cfg = single_state();
        let out = run_convergence_experiment(&cfg, 1.0, Schedule::Sequential).unwrap();
        assert!(out.converged);
        let lines: Vec<&str> = out.csv.lines().collect();
        assert_eq!(lines[0], "iteration,user,rate");
        assert_eq!(lines[1], "0,0,0");
        assert_eq!(lines[2], "0,1,0");
        assert!(lines[3].starts_with("1,0,0.51457"));
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("central".parse::<Mode>().unwrap(), Mode::Central);
        assert!("greedy".parse::<Mode>().is_err());
    }
}
