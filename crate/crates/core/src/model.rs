//! Problem instances: channel laws, power budgets, policies and profiles.
//!
//! A user's type is the pair `(h_i, g_j)` of its own squared channel gains
//! toward the legitimate receiver and the eavesdropper. Gains are drawn
//! independently from discrete laws, so the probability of type `(i, j)` is
//! `alpha_i * beta_j`. A policy assigns one transmit power to each type and is
//! stored as an `L x L` row-major matrix (row = Bob state, column = Eve state).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, Error, Result};

/// Probabilities must sum to one within this drift.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Largest supported number of users for exact expectation.
pub const MAX_USERS: usize = 3;

/// Largest supported number of channel states per link.
pub const MAX_STATES: usize = 4;

/// Ratio between the per-state cap and the average budget when the cap is
/// not given explicitly.
pub const DEFAULT_CAP_RATIO: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelLaw {
    pub bob_states: Vec<f64>,
    pub bob_probs: Vec<f64>,
    pub eve_states: Vec<f64>,
    pub eve_probs: Vec<f64>,
}

impl ChannelLaw {
    /// Law with equiprobable states on both links.
    pub fn equiprobable(bob_states: Vec<f64>, eve_states: Vec<f64>) -> Self {
        let nb = bob_states.len();
        let ne = eve_states.len();
        Self {
            bob_probs: vec![1.0 / nb as f64; nb],
            eve_probs: vec![1.0 / ne as f64; ne],
            bob_states,
            eve_states,
        }
    }

    /// Number of states `L` per link.
    pub fn num_states(&self) -> usize {
        self.bob_states.len()
    }

    /// Number of joint types, `L^2`.
    pub fn num_types(&self) -> usize {
        self.bob_states.len() * self.eve_states.len()
    }

    /// Probability of the joint type `(i, j)`, zero-based.
    pub fn joint_prob(&self, i: usize, j: usize) -> Result<f64> {
        if i >= self.bob_probs.len() {
            return Err(Error::IndexOutOfRange {
                what: "bob state",
                index: i,
                limit: self.bob_probs.len(),
            });
        }
        if j >= self.eve_probs.len() {
            return Err(Error::IndexOutOfRange {
                what: "eve state",
                index: j,
                limit: self.eve_probs.len(),
            });
        }
        Ok(self.bob_probs[i] * self.eve_probs[j])
    }

    /// Joint type probabilities in row-major order.
    pub fn type_probs(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_types());
        for &a in &self.bob_probs {
            for &b in &self.eve_probs {
                out.push(a * b);
            }
        }
        out
    }

    /// `(h_i, g_j)` for a flattened type index.
    pub fn gains(&self, ty: usize) -> (f64, f64) {
        let l = self.eve_states.len();
        (self.bob_states[ty / l], self.eve_states[ty % l])
    }

    fn diagnostics(&self, prefix: &str, out: &mut Vec<Diagnostic>) {
        check_states(&format!("{prefix}.bob_states"), &self.bob_states, out);
        check_states(&format!("{prefix}.eve_states"), &self.eve_states, out);
        check_probs(
            &format!("{prefix}.bob_probs"),
            &self.bob_probs,
            self.bob_states.len(),
            out,
        );
        check_probs(
            &format!("{prefix}.eve_probs"),
            &self.eve_probs,
            self.eve_states.len(),
            out,
        );
        if self.bob_states.len() != self.eve_states.len() {
            out.push(Diagnostic::new(
                format!("{prefix}.eve_states"),
                format!(
                    "expected {} states to match bob_states, got {}",
                    self.bob_states.len(),
                    self.eve_states.len()
                ),
            ));
        }
        if self.bob_states.len() > MAX_STATES {
            out.push(Diagnostic::new(
                format!("{prefix}.bob_states"),
                format!(
                    "{} states exceeds the exact-expectation limit of {MAX_STATES}",
                    self.bob_states.len()
                ),
            ));
        }
    }
}

fn check_states(field: &str, states: &[f64], out: &mut Vec<Diagnostic>) {
    if states.is_empty() {
        out.push(Diagnostic::new(field, "at least one state required"));
        return;
    }
    for &s in states {
        if !(s.is_finite() && s > 0.0) {
            out.push(Diagnostic::new(
                field,
                format!("gain {s} must be finite and strictly positive"),
            ));
        }
    }
    if states.windows(2).any(|w| w[0] >= w[1]) {
        out.push(Diagnostic::new(field, "states must be strictly increasing"));
    }
}

fn check_probs(field: &str, probs: &[f64], expected_len: usize, out: &mut Vec<Diagnostic>) {
    if probs.len() != expected_len {
        out.push(Diagnostic::new(
            field,
            format!("expected {expected_len} probabilities, got {}", probs.len()),
        ));
    }
    for &p in probs {
        if !(0.0..=1.0).contains(&p) {
            out.push(Diagnostic::new(
                field,
                format!("probability {p} outside [0, 1]"),
            ));
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        out.push(Diagnostic::new(
            field,
            format!("probabilities sum to {sum}"),
        ));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserConfig {
    pub law: ChannelLaw,
    pub avg_power: f64,
    pub max_power: f64,
}

impl UserConfig {
    /// User with the default cap of `10 * avg_power`.
    pub fn new(law: ChannelLaw, avg_power: f64) -> Self {
        Self {
            law,
            avg_power,
            max_power: DEFAULT_CAP_RATIO * avg_power,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverTolerances {
    /// Max-norm policy change that ends the iterative allocation.
    pub convergence: f64,
    /// Stationarity, complementarity and budget residual target.
    pub kkt_residual: f64,
    /// Final bracket width for every bisection.
    pub bisection_width: f64,
    pub max_iterations: usize,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self {
            convergence: 1e-8,
            kkt_residual: 1e-8,
            bisection_width: 1e-12,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    pub users: Vec<UserConfig>,
    pub noise_power: f64,
    pub tolerances: SolverTolerances,
}

impl GameConfig {
    pub fn new(users: Vec<UserConfig>, noise_power: f64) -> Self {
        Self {
            users,
            noise_power,
            tolerances: SolverTolerances::default(),
        }
    }

    /// `k` users sharing one law and one average budget.
    pub fn symmetric(k: usize, law: ChannelLaw, avg_power: f64, noise_power: f64) -> Self {
        Self::new(vec![UserConfig::new(law, avg_power); k], noise_power)
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// Copy with every user's average budget set to `snr * noise_power`.
    /// Caps are scaled by the same factor as the budget they belong to.
    pub fn at_snr(&self, snr: f64) -> Self {
        let mut out = self.clone();
        let target = snr * self.noise_power;
        for u in &mut out.users {
            let factor = target / u.avg_power;
            u.avg_power = target;
            u.max_power *= factor;
        }
        out
    }

    /// Fails with the full diagnostic list when any invariant is violated.
    pub fn validated(self) -> Result<Self> {
        let diags = validate_config(&self);
        if diags.is_empty() {
            Ok(self)
        } else {
            Err(Error::Invalid(diags))
        }
    }
}

/// Checks every invariant of a configuration and returns one diagnostic per
/// violation. An empty list means the configuration is valid.
pub fn validate_config(cfg: &GameConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let k = cfg.users.len();
    if k < 2 {
        out.push(Diagnostic::new(
            "users",
            format!("at least two users required, got {k}"),
        ));
    }
    if k > MAX_USERS {
        out.push(Diagnostic::new(
            "users",
            format!("{k} users exceeds the exact-expectation limit of {MAX_USERS}"),
        ));
    }
    if !(cfg.noise_power.is_finite() && cfg.noise_power > 0.0) {
        out.push(Diagnostic::new(
            "noise_power",
            format!("noise power {} must be strictly positive", cfg.noise_power),
        ));
    }
    for (idx, u) in cfg.users.iter().enumerate() {
        let prefix = format!("users[{idx}]");
        u.law.diagnostics(&format!("{prefix}.law"), &mut out);
        if !(u.avg_power.is_finite() && u.avg_power > 0.0) {
            out.push(Diagnostic::new(
                format!("{prefix}.avg_power"),
                format!("average power {} must be strictly positive", u.avg_power),
            ));
        }
        if !(u.max_power.is_finite() && u.max_power > 0.0) {
            out.push(Diagnostic::new(
                format!("{prefix}.max_power"),
                format!("max power {} must be strictly positive", u.max_power),
            ));
        }
        if u.avg_power > u.max_power {
            out.push(Diagnostic::new(
                format!("{prefix}.avg_power"),
                format!(
                    "average power {} exceeds max_power {}",
                    u.avg_power, u.max_power
                ),
            ));
        }
    }
    let t = &cfg.tolerances;
    for (name, v) in [
        ("tolerances.convergence", t.convergence),
        ("tolerances.kkt_residual", t.kkt_residual),
        ("tolerances.bisection_width", t.bisection_width),
    ] {
        if !(v.is_finite() && v > 0.0) {
            out.push(Diagnostic::new(
                name,
                format!("{v} must be strictly positive"),
            ));
        }
    }
    if t.max_iterations == 0 {
        out.push(Diagnostic::new(
            "tolerances.max_iterations",
            "at least one iteration required",
        ));
    }
    out
}

/// Probability of the joint type `(i, j)` under a channel law.
pub fn joint_prob(law: &ChannelLaw, i: usize, j: usize) -> Result<f64> {
    law.joint_prob(i, j)
}

/// Constant policy at the average budget.
pub fn uniform_policy(user: &UserConfig) -> Result<PowerPolicy> {
    if user.avg_power > user.max_power {
        return Err(Error::Invalid(vec![Diagnostic::new(
            "avg_power",
            format!(
                "average power {} exceeds max_power {}",
                user.avg_power, user.max_power
            ),
        )]));
    }
    Ok(PowerPolicy::constant(user.law.num_states(), user.avg_power))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserEntry {
    bob_states: Vec<f64>,
    bob_probs: Vec<f64>,
    eve_states: Vec<f64>,
    eve_probs: Vec<f64>,
    avg_power: f64,
    #[serde(default)]
    max_power: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    noise_power: f64,
    users: Vec<UserEntry>,
    #[serde(default)]
    tolerances: SolverTolerances,
}

#[derive(Serialize)]
struct UserEntryOut<'a> {
    bob_states: &'a [f64],
    bob_probs: &'a [f64],
    eve_states: &'a [f64],
    eve_probs: &'a [f64],
    avg_power: f64,
    max_power: f64,
}

#[derive(Serialize)]
struct ConfigFileOut<'a> {
    noise_power: f64,
    users: Vec<UserEntryOut<'a>>,
    tolerances: SolverTolerances,
}

/// Parses and validates a JSON configuration document.
pub fn parse_config(text: &str) -> Result<GameConfig> {
    let file: ConfigFile = serde_json::from_str(text)?;
    let users = file
        .users
        .into_iter()
        .map(|u| UserConfig {
            max_power: u.max_power.unwrap_or(DEFAULT_CAP_RATIO * u.avg_power),
            avg_power: u.avg_power,
            law: ChannelLaw {
                bob_states: u.bob_states,
                bob_probs: u.bob_probs,
                eve_states: u.eve_states,
                eve_probs: u.eve_probs,
            },
        })
        .collect();
    GameConfig {
        users,
        noise_power: file.noise_power,
        tolerances: file.tolerances,
    }
    .validated()
}

/// Reads a configuration file from disk.
pub fn load_config(path: impl AsRef<Path>) -> Result<GameConfig> {
    parse_config(&fs::read_to_string(path)?)
}

/// Renders a configuration in the on-disk schema (every field explicit).
pub fn serialize_config(cfg: &GameConfig) -> String {
    let out = ConfigFileOut {
        noise_power: cfg.noise_power,
        users: cfg
            .users
            .iter()
            .map(|u| UserEntryOut {
                bob_states: &u.law.bob_states,
                bob_probs: &u.law.bob_probs,
                eve_states: &u.law.eve_states,
                eve_probs: &u.law.eve_probs,
                avg_power: u.avg_power,
                max_power: u.max_power,
            })
            .collect(),
        tolerances: cfg.tolerances,
    };
    serde_json::to_string_pretty(&out).expect("config serializes")
}

/// One user's type-contingent transmit powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPolicy {
    states: usize,
    powers: Vec<f64>,
}

impl PowerPolicy {
    pub fn new(states: usize, powers: Vec<f64>) -> Result<Self> {
        if powers.len() != states * states {
            return Err(Error::InvalidArgument(format!(
                "policy for {states} states needs {} entries, got {}",
                states * states,
                powers.len()
            )));
        }
        Ok(Self { states, powers })
    }

    pub fn constant(states: usize, power: f64) -> Self {
        Self {
            states,
            powers: vec![power; states * states],
        }
    }

    pub fn zeros(states: usize) -> Self {
        Self::constant(states, 0.0)
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.powers[i * self.states + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.powers[i * self.states + j] = value;
    }

    /// Row-major entries, indexed by flattened type.
    pub fn as_slice(&self) -> &[f64] {
        &self.powers
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.powers
    }

    pub fn expected_power(&self, law: &ChannelLaw) -> f64 {
        law.type_probs()
            .iter()
            .zip(&self.powers)
            .map(|(w, p)| w * p)
            .sum()
    }

    pub fn max_abs_diff(&self, other: &PowerPolicy) -> f64 {
        self.powers
            .iter()
            .zip(&other.powers)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Checks entry range and the expected-power budget.
    pub fn diagnostics(&self, user: &UserConfig, budget_tol: f64) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.states != user.law.num_states() {
            out.push(Diagnostic::new(
                "policy",
                format!(
                    "policy has {} states, law has {}",
                    self.states,
                    user.law.num_states()
                ),
            ));
            return out;
        }
        for &p in &self.powers {
            if !(0.0..=user.max_power).contains(&p) {
                out.push(Diagnostic::new(
                    "policy",
                    format!("power {p} outside [0, {}]", user.max_power),
                ));
            }
        }
        let e = self.expected_power(&user.law);
        if e > user.avg_power + budget_tol {
            out.push(Diagnostic::new(
                "policy",
                format!("expected power {e} exceeds budget {}", user.avg_power),
            ));
        }
        out
    }
}

/// Policies of all users, in user order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub policies: Vec<PowerPolicy>,
}

impl StrategyProfile {
    pub fn new(policies: Vec<PowerPolicy>) -> Self {
        Self { policies }
    }

    pub fn zeros(cfg: &GameConfig) -> Self {
        Self::new(
            cfg.users
                .iter()
                .map(|u| PowerPolicy::zeros(u.law.num_states()))
                .collect(),
        )
    }

    /// Every user at its constant average budget.
    pub fn uniform(cfg: &GameConfig) -> Self {
        Self::new(
            cfg.users
                .iter()
                .map(|u| PowerPolicy::constant(u.law.num_states(), u.avg_power))
                .collect(),
        )
    }

    pub fn num_users(&self) -> usize {
        self.policies.len()
    }

    pub fn max_norm_distance(&self, other: &StrategyProfile) -> f64 {
        self.policies
            .iter()
            .zip(&other.policies)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    /// Stacked entries, user-major then row-major.
    pub fn flatten(&self) -> Vec<f64> {
        self.policies
            .iter()
            .flat_map(|p| p.as_slice().iter().copied())
            .collect()
    }

    pub fn diagnostics(&self, cfg: &GameConfig, budget_tol: f64) -> Vec<Diagnostic> {
        if self.policies.len() != cfg.users.len() {
            return vec![Diagnostic::new(
                "profile",
                format!(
                    "expected {} policies, got {}",
                    cfg.users.len(),
                    self.policies.len()
                ),
            )];
        }
        let mut out = Vec::new();
        for (k, (p, u)) in self.policies.iter().zip(&cfg.users).enumerate() {
            for mut d in p.diagnostics(u, budget_tol) {
                d.field = format!("profile[{k}]");
                out.push(d);
            }
        }
        out
    }
}

/// Enumerates joint type realizations of all users with their probabilities.
#[derive(Debug, Clone)]
pub struct TypeSpace {
    probs: Vec<Vec<f64>>,
}

impl TypeSpace {
    pub fn new(cfg: &GameConfig) -> Self {
        Self {
            probs: cfg.users.iter().map(|u| u.law.type_probs()).collect(),
        }
    }

    pub fn num_users(&self) -> usize {
        self.probs.len()
    }

    pub fn type_count(&self, user: usize) -> usize {
        self.probs[user].len()
    }

    pub fn prob(&self, user: usize, ty: usize) -> f64 {
        self.probs[user][ty]
    }

    /// Number of joint realizations.
    pub fn size(&self) -> usize {
        self.probs.iter().map(Vec::len).product()
    }

    /// Visits every realization `(t_1, ..., t_K)` with its probability.
    pub fn for_each(&self, mut f: impl FnMut(&[usize], f64)) {
        self.walk(None, &mut f);
    }

    /// Visits every realization of the users other than `user`. The slot of
    /// `user` in the index slice is always zero and its probability is
    /// excluded from the weight.
    pub fn for_each_opponents(&self, user: usize, mut f: impl FnMut(&[usize], f64)) {
        self.walk(Some(user), &mut f);
    }

    fn walk(&self, skip: Option<usize>, f: &mut impl FnMut(&[usize], f64)) {
        let k = self.probs.len();
        let mut idx = vec![0usize; k];
        loop {
            let w: f64 = (0..k)
                .filter(|&u| Some(u) != skip)
                .map(|u| self.probs[u][idx[u]])
                .product();
            f(&idx, w);
            let mut pos = k;
            loop {
                if pos == 0 {
                    return;
                }
                pos -= 1;
                if Some(pos) == skip {
                    continue;
                }
                idx[pos] += 1;
                if idx[pos] < self.probs[pos].len() {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }
}
