//! Distributed iterative power allocation and equilibrium verification.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::best_response::solve_best_response;
use crate::error::{Error, Result};
use crate::model::{validate_config, GameConfig, StrategyProfile};
use crate::rates::{ergodic_utility, random_feasible_profile};

/// Order in which users update within one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// Each user responds to the policies already updated in this round.
    #[default]
    Sequential,
    /// Every user responds to the previous round's profile.
    Simultaneous,
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::Sequential => "sequential",
            Schedule::Simultaneous => "simultaneous",
        })
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(Schedule::Sequential),
            "simultaneous" => Ok(Schedule::Simultaneous),
            other => Err(Error::InvalidArgument(format!(
                "unknown schedule {other:?} (expected sequential or simultaneous)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterationTrace {
    /// Profile after each round that changed it; entry 0 is the
    /// initialization.
    pub profiles: Vec<StrategyProfile>,
    /// Clamped expected secrecy rate of every user after each round, bits.
    pub utilities: Vec<Vec<f64>>,
    pub iterations_to_converge: usize,
    pub converged: bool,
    /// Max-norm change of the last round.
    pub final_change: f64,
}

impl IterationTrace {
    pub fn final_profile(&self) -> &StrategyProfile {
        self.profiles
            .last()
            .expect("trace holds the initial profile")
    }
}

fn check_config(cfg: &GameConfig) -> Result<()> {
    let diags = validate_config(cfg);
    if diags.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(diags))
    }
}

fn utilities(cfg: &GameConfig, profile: &StrategyProfile) -> Vec<f64> {
    (0..cfg.num_users())
        .map(|k| ergodic_utility(cfg, profile, k, true))
        .collect()
}

/// Repeated best responses from `init` (all-zero when `None`) until the
/// max-norm policy change drops below the convergence tolerance. Running out
/// of iterations is reported through `converged = false`.
pub fn run_algorithm1(
    cfg: &GameConfig,
    init: Option<&StrategyProfile>,
    schedule: Schedule,
) -> Result<IterationTrace> {
    check_config(cfg)?;
    let mut current = match init {
        Some(p) => {
            let diags = p.diagnostics(cfg, cfg.tolerances.kkt_residual);
            if !diags.is_empty() {
                return Err(Error::Invalid(diags));
            }
            p.clone()
        }
        None => StrategyProfile::zeros(cfg),
    };
    let mut trace = IterationTrace {
        utilities: vec![utilities(cfg, &current)],
        profiles: vec![current.clone()],
        iterations_to_converge: 0,
        converged: false,
        final_change: f64::INFINITY,
    };
    for round in 1..=cfg.tolerances.max_iterations {
        let previous = current.clone();
        match schedule {
            Schedule::Sequential => {
                for k in 0..cfg.num_users() {
                    current.policies[k] = solve_best_response(cfg, &current, k)?.policy;
                }
            }
            Schedule::Simultaneous => {
                for k in 0..cfg.num_users() {
                    current.policies[k] = solve_best_response(cfg, &previous, k)?.policy;
                }
            }
        }
        let change = current.max_norm_distance(&previous);
        trace.final_change = change;
        if change < cfg.tolerances.convergence {
            // the confirming round is not recorded: its profile is the last one
            trace.converged = true;
            trace.iterations_to_converge = round - 1;
            break;
        }
        trace.utilities.push(utilities(cfg, &current));
        trace.profiles.push(current.clone());
        trace.iterations_to_converge = round;
    }
    Ok(trace)
}

#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub profile: StrategyProfile,
    pub per_user_rates: Vec<f64>,
    /// Utility gain available to each user by deviating to its best response.
    pub per_user_gaps: Vec<f64>,
    pub be_deviation_gap: f64,
}

impl EquilibriumReport {
    pub fn is_equilibrium(&self, tol: f64) -> bool {
        self.be_deviation_gap <= tol
    }
}

/// Largest utility improvement any single user can obtain by deviating.
pub fn verify_equilibrium(
    cfg: &GameConfig,
    profile: &StrategyProfile,
) -> Result<EquilibriumReport> {
    check_config(cfg)?;
    let rates = utilities(cfg, profile);
    let mut gaps = Vec::with_capacity(cfg.num_users());
    for (k, &rate) in rates.iter().enumerate() {
        let best = solve_best_response(cfg, profile, k)?;
        gaps.push((best.achieved_utility - rate).max(0.0));
    }
    Ok(EquilibriumReport {
        profile: profile.clone(),
        be_deviation_gap: gaps.iter().copied().fold(0.0, f64::max),
        per_user_gaps: gaps,
        per_user_rates: rates,
    })
}

#[derive(Debug, Clone)]
pub struct UniquenessReport {
    pub max_distance: f64,
    pub endpoints: Vec<StrategyProfile>,
    /// Trials that hit the iteration limit.
    pub non_converged: Vec<usize>,
}

/// Runs the iteration from each given initialization and measures how far
/// apart the endpoints are.
pub fn uniqueness_probe_from(
    cfg: &GameConfig,
    inits: &[StrategyProfile],
    schedule: Schedule,
) -> Result<UniquenessReport> {
    if inits.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "uniqueness probe needs at least 2 trials, got {}",
            inits.len()
        )));
    }
    let mut endpoints = Vec::with_capacity(inits.len());
    let mut non_converged = Vec::new();
    for (t, init) in inits.iter().enumerate() {
        let trace = run_algorithm1(cfg, Some(init), schedule)?;
        if !trace.converged {
            non_converged.push(t);
        }
        endpoints.push(trace.final_profile().clone());
    }
    let mut max_distance: f64 = 0.0;
    for a in 0..endpoints.len() {
        for b in a + 1..endpoints.len() {
            max_distance = max_distance.max(endpoints[a].max_norm_distance(&endpoints[b]));
        }
    }
    Ok(UniquenessReport {
        max_distance,
        endpoints,
        non_converged,
    })
}

/// Random feasible starting profiles drawn from `seed`.
pub fn random_initializations(cfg: &GameConfig, count: usize, seed: u64) -> Vec<StrategyProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if let Some(p) = random_feasible_profile(cfg, &mut rng) {
            out.push(p);
        }
    }
    out
}

/// Runs the sequential iteration from `trials` random feasible starts.
pub fn uniqueness_probe(cfg: &GameConfig, trials: usize, seed: u64) -> Result<UniquenessReport> {
    check_config(cfg)?;
    if trials < 2 {
        return Err(Error::InvalidArgument(format!(
            "uniqueness probe needs at least 2 trials, got {trials}"
        )));
    }
    let inits = random_initializations(cfg, trials, seed);
    uniqueness_probe_from(cfg, &inits, Schedule::Sequential)
}
