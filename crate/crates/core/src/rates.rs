//! Secrecy rates, their expectations over the discrete type grid, and the
//! first- and second-order derivatives of the average utilities.
//!
//! Rates are in bits. Derivatives carry the matching `1/ln 2` factor. All
//! expectations are exact sums over every joint type realization of the `K`
//! users, weighted by the product of type probabilities.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{GameConfig, StrategyProfile, TypeSpace};

/// Per-realization interference seen by one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceCoefficients {
    pub zeta_bob: f64,
    pub zeta_eve: f64,
    pub psi_bob: f64,
    pub psi_eve: f64,
}

impl InterferenceCoefficients {
    pub fn is_degraded(&self) -> bool {
        self.zeta_bob > self.zeta_eve
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub bob_rate: f64,
    pub eve_rate: f64,
    pub secrecy_rate: f64,
    pub smooth_secrecy_rate: f64,
}

/// One opponent realization as seen by a fixed user: probability of the
/// opponents' joint type and the resulting interference-plus-noise terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interference {
    pub weight: f64,
    pub psi_bob: f64,
    pub psi_eve: f64,
}

/// All opponent realizations faced by one user under a fixed profile. The
/// user's own policy does not enter.
#[derive(Debug, Clone)]
pub struct OpponentField {
    terms: Vec<Interference>,
}

impl OpponentField {
    pub fn new(cfg: &GameConfig, profile: &StrategyProfile, user: usize) -> Self {
        let space = TypeSpace::new(cfg);
        let mut terms = Vec::with_capacity(space.size() / space.type_count(user));
        space.for_each_opponents(user, |idx, weight| {
            let (psi_bob, psi_eve) = aggregate_interference(cfg, profile, user, idx);
            terms.push(Interference {
                weight,
                psi_bob,
                psi_eve,
            });
        });
        Self { terms }
    }

    pub fn terms(&self) -> &[Interference] {
        &self.terms
    }

    /// Expected secrecy rate of one own type at power `p`, in bits.
    pub fn type_utility(&self, h: f64, g: f64, p: f64, clamped: bool) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let s = secrecy_bits(h * p / t.psi_bob, g * p / t.psi_eve);
                t.weight * if clamped { s.max(0.0) } else { s }
            })
            .sum()
    }

    /// Derivative of the expected clamped rate of one own type with respect
    /// to its power. A realization contributes only while `zeta_b > zeta_e`;
    /// otherwise its clamped rate is identically zero in the own power.
    pub fn clamped_marginal(&self, h: f64, g: f64, p: f64) -> f64 {
        self.terms
            .iter()
            .filter(|t| h * t.psi_eve > g * t.psi_bob)
            .map(|t| t.weight * (h / (t.psi_bob + h * p) - g / (t.psi_eve + g * p)))
            .sum::<f64>()
            / LN_2
    }

    /// Smallest `zeta_b - zeta_e` over all opponent realizations.
    pub fn degradedness_margin(&self, h: f64, g: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| h / t.psi_bob - g / t.psi_eve)
            .fold(f64::INFINITY, f64::min)
    }
}

fn secrecy_bits(snr_bob: f64, snr_eve: f64) -> f64 {
    (snr_bob.ln_1p() - snr_eve.ln_1p()) / LN_2
}

/// `(psi_b, psi_e)` for `user` when every user `l` has type `idx[l]`.
fn aggregate_interference(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    user: usize,
    idx: &[usize],
) -> (f64, f64) {
    let mut psi_b = cfg.noise_power;
    let mut psi_e = cfg.noise_power;
    for (l, u) in cfg.users.iter().enumerate() {
        if l == user {
            continue;
        }
        let (h, g) = u.law.gains(idx[l]);
        let p = profile.policies[l].as_slice()[idx[l]];
        psi_b += h * p;
        psi_e += g * p;
    }
    (psi_b, psi_e)
}

fn check_joint_types(
    cfg: &GameConfig,
    user: usize,
    joint_types: &[(usize, usize)],
) -> Result<Vec<usize>> {
    if user >= cfg.num_users() {
        return Err(Error::IndexOutOfRange {
            what: "user",
            index: user,
            limit: cfg.num_users(),
        });
    }
    if joint_types.len() != cfg.num_users() {
        return Err(Error::InvalidArgument(format!(
            "expected one joint type per user ({}), got {}",
            cfg.num_users(),
            joint_types.len()
        )));
    }
    cfg.users
        .iter()
        .zip(joint_types)
        .map(|(u, &(i, j))| {
            let l = u.law.num_states();
            if i >= l {
                return Err(Error::IndexOutOfRange {
                    what: "bob state",
                    index: i,
                    limit: l,
                });
            }
            if j >= l {
                return Err(Error::IndexOutOfRange {
                    what: "eve state",
                    index: j,
                    limit: l,
                });
            }
            Ok(i * l + j)
        })
        .collect()
}

/// Interference coefficients of `user` for one realization of everyone's
/// joint type `(i, j)` (zero-based).
pub fn interference_coefficients(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    user: usize,
    joint_types: &[(usize, usize)],
) -> Result<InterferenceCoefficients> {
    let idx = check_joint_types(cfg, user, joint_types)?;
    let (psi_bob, psi_eve) = aggregate_interference(cfg, profile, user, &idx);
    let (h, g) = cfg.users[user].law.gains(idx[user]);
    Ok(InterferenceCoefficients {
        zeta_bob: h / psi_bob,
        zeta_eve: g / psi_eve,
        psi_bob,
        psi_eve,
    })
}

/// Instantaneous rates of `user` for one realization of all joint types.
pub fn instantaneous_rates(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    user: usize,
    joint_types: &[(usize, usize)],
) -> Result<RateReport> {
    let coeffs = interference_coefficients(cfg, profile, user, joint_types)?;
    let idx = check_joint_types(cfg, user, joint_types)?;
    let p = profile.policies[user].as_slice()[idx[user]];
    let bob_rate = (coeffs.zeta_bob * p).ln_1p() / LN_2;
    let eve_rate = (coeffs.zeta_eve * p).ln_1p() / LN_2;
    let smooth = bob_rate - eve_rate;
    Ok(RateReport {
        bob_rate,
        eve_rate,
        secrecy_rate: smooth.max(0.0),
        smooth_secrecy_rate: smooth,
    })
}

/// Expected secrecy rate of `user` in bits. With `clamped` each realization
/// contributes `(C_b - C_e)^+`; otherwise the signed difference.
pub fn ergodic_utility(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    user: usize,
    clamped: bool,
) -> f64 {
    let field = OpponentField::new(cfg, profile, user);
    let law = &cfg.users[user].law;
    let policy = &profile.policies[user];
    law.type_probs()
        .iter()
        .enumerate()
        .map(|(ty, &w)| {
            let (h, g) = law.gains(ty);
            w * field.type_utility(h, g, policy.as_slice()[ty], clamped)
        })
        .sum()
}

/// Smallest `zeta_b - zeta_e` of one user over its own types and all
/// opponent realizations.
pub fn user_degradedness_margin(cfg: &GameConfig, profile: &StrategyProfile, user: usize) -> f64 {
    let field = OpponentField::new(cfg, profile, user);
    let law = &cfg.users[user].law;
    (0..law.num_types())
        .map(|ty| {
            let (h, g) = law.gains(ty);
            field.degradedness_margin(h, g)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Smallest `zeta_b - zeta_e` over every user and realization.
pub fn degradedness_margin(cfg: &GameConfig, profile: &StrategyProfile) -> f64 {
    (0..cfg.num_users())
        .map(|k| user_degradedness_margin(cfg, profile, k))
        .fold(f64::INFINITY, f64::min)
}

fn require_degraded(cfg: &GameConfig, profile: &StrategyProfile) -> Result<()> {
    for k in 0..cfg.num_users() {
        let margin = user_degradedness_margin(cfg, profile, k);
        if margin <= 0.0 {
            return Err(Error::NotDegraded { user: k, margin });
        }
    }
    Ok(())
}

/// Gradient of the smooth average utility of `user` with respect to its own
/// `L x L` policy.
pub fn utility_gradient(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    user: usize,
) -> Result<DMatrix<f64>> {
    let margin = user_degradedness_margin(cfg, profile, user);
    if margin <= 0.0 {
        return Err(Error::NotDegraded { user, margin });
    }
    let field = OpponentField::new(cfg, profile, user);
    let law = &cfg.users[user].law;
    let l = law.num_states();
    let probs = law.type_probs();
    let policy = &profile.policies[user];
    Ok(DMatrix::from_fn(l, l, |i, j| {
        let ty = i * l + j;
        let (h, g) = law.gains(ty);
        let p = policy.as_slice()[ty];
        probs[ty]
            * field
                .terms()
                .iter()
                .map(|t| t.weight * (h / (t.psi_bob + h * p) - g / (t.psi_eve + g * p)))
                .sum::<f64>()
            / LN_2
    }))
}

fn offsets(cfg: &GameConfig) -> Vec<usize> {
    let mut out = Vec::with_capacity(cfg.num_users() + 1);
    let mut acc = 0;
    out.push(0);
    for u in &cfg.users {
        acc += u.law.num_types();
        out.push(acc);
    }
    out
}

/// Stacked, weighted own-gradients of every user, user-major and row-major
/// within each user.
pub fn pseudo_gradient(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    weight: f64,
) -> Result<DVector<f64>> {
    require_degraded(cfg, profile)?;
    let off = offsets(cfg);
    let mut out = DVector::zeros(off[cfg.num_users()]);
    for k in 0..cfg.num_users() {
        let g = utility_gradient(cfg, profile, k)?;
        let l = cfg.users[k].law.num_states();
        for i in 0..l {
            for j in 0..l {
                out[off[k] + i * l + j] = weight * g[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Jacobian of the pseudo-gradient: row `(k, a)` holds the derivatives of
/// `weight * dU_k/dP_{k,a}` with respect to every stacked power.
pub fn utility_jacobian(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    weight: f64,
) -> Result<DMatrix<f64>> {
    require_degraded(cfg, profile)?;
    let off = offsets(cfg);
    let n = off[cfg.num_users()];
    let mut jac = DMatrix::zeros(n, n);
    let space = TypeSpace::new(cfg);
    let scale = weight / LN_2;
    space.for_each(|idx, prob| {
        for k in 0..cfg.num_users() {
            let (psi_b, psi_e) = aggregate_interference(cfg, profile, k, idx);
            let (h, g) = cfg.users[k].law.gains(idx[k]);
            let p = profile.policies[k].as_slice()[idx[k]];
            let db = psi_b + h * p;
            let de = psi_e + g * p;
            let row = off[k] + idx[k];
            jac[(row, row)] += scale * prob * (g * g / (de * de) - h * h / (db * db));
            for l in 0..cfg.num_users() {
                if l == k {
                    continue;
                }
                let (hl, gl) = cfg.users[l].law.gains(idx[l]);
                let col = off[l] + idx[l];
                jac[(row, col)] += scale * prob * (g * gl / (de * de) - h * hl / (db * db));
            }
        }
    });
    Ok(jac)
}

/// Largest eigenvalue of `J + J^T`.
pub fn symmetrized_max_eigenvalue(jac: &DMatrix<f64>) -> f64 {
    let sym = jac + jac.transpose();
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Outcome of a sampled diagonal-strict-concavity scan.
#[derive(Debug, Clone)]
pub struct ConcavityCertificate {
    pub max_eigenvalue: f64,
    pub sample_count: usize,
    pub witness: Option<StrategyProfile>,
    /// Draws rejected because some realization was not degraded.
    pub rejected: usize,
    pub diagnostics: Vec<String>,
}

impl ConcavityCertificate {
    pub fn passes(&self) -> bool {
        self.witness.is_none() && self.max_eigenvalue < 0.0
    }
}

/// Draw attempts allowed per accepted certificate sample.
const MAX_DRAWS_PER_SAMPLE: usize = 10_000;

/// Feasible profile with entries drawn uniformly on `[0, max_power]` and
/// rescaled so each user's expected power equals its budget. Returns `None`
/// when the rescaled draw leaves the cap.
pub fn random_feasible_profile<R: Rng>(cfg: &GameConfig, rng: &mut R) -> Option<StrategyProfile> {
    let mut profile = StrategyProfile::zeros(cfg);
    for (u, policy) in cfg.users.iter().zip(&mut profile.policies) {
        for v in policy.as_mut_slice() {
            *v = rng.gen_range(0.0..=u.max_power);
        }
        let e = policy.expected_power(&u.law);
        if e <= 0.0 {
            return None;
        }
        let scale = u.avg_power / e;
        for v in policy.as_mut_slice() {
            *v *= scale;
            if *v > u.max_power {
                return None;
            }
        }
    }
    Some(profile)
}

/// Scans `samples` random feasible degraded profiles for a non-negative
/// eigenvalue of `J + J^T` (unit weights).
pub fn concavity_certificate(cfg: &GameConfig, samples: usize, seed: u64) -> ConcavityCertificate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cert = ConcavityCertificate {
        max_eigenvalue: f64::NEG_INFINITY,
        sample_count: 0,
        witness: None,
        rejected: 0,
        diagnostics: Vec::new(),
    };
    if samples == 0 {
        cert.diagnostics
            .push("no samples requested; certificate is vacuous".into());
        return cert;
    }
    let mut draws = 0;
    while cert.sample_count < samples {
        if draws >= samples * MAX_DRAWS_PER_SAMPLE {
            cert.diagnostics.push(format!(
                "gave up after {draws} draws with {} degraded samples",
                cert.sample_count
            ));
            break;
        }
        draws += 1;
        let Some(profile) = random_feasible_profile(cfg, &mut rng) else {
            continue;
        };
        let Ok(jac) = utility_jacobian(cfg, &profile, 1.0) else {
            cert.rejected += 1;
            continue;
        };
        cert.sample_count += 1;
        let top = symmetrized_max_eigenvalue(&jac);
        if top > cert.max_eigenvalue {
            cert.max_eigenvalue = top;
            if top >= 0.0 {
                cert.witness = Some(profile);
            }
        }
    }
    cert
}
