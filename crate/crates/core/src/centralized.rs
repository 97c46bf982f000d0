//! Centralized social optimum by successive lower bounds in the log-power
//! domain.
//!
//! With `x = log2 P` the Bob rate of a realization is bounded below by the
//! tangent `omega * log2 z + offset <= log2(1 + z)` taken at the current SINR
//! `z0`. The Eve rate is kept exact as `log2(psi_e + g 2^x) - log2(psi_e)`, a
//! difference of log-sum-exp terms. The negated bounded sum rate splits as
//! `F - H` with both parts convex. Each step re-anchors the bounds at the
//! incumbent, linearizes `H`, and maximizes the resulting concave surrogate
//! over one user's policy. The surrogate touches the clamped sum rate at the
//! incumbent and lies below it elsewhere, so the exact sum rate never
//! decreases along the iterates.
//!
//! A realization whose secrecy rate is not positive at the incumbent enters
//! the surrogate as the constant zero (its clamped value), which keeps the
//! minorization valid for the clamped objective.
//!
//! Within a block the surrogate is separable over the user's own types. The
//! budget is handled by bisection on its multiplier and each type's
//! stationarity condition by bisection in `x`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{validate_config, GameConfig, PowerPolicy, StrategyProfile, TypeSpace};
use crate::rates::{ergodic_utility, random_feasible_profile};

/// Smallest allowed power as a fraction of the user's average budget.
pub const POWER_FLOOR_RATIO: f64 = 1e-6;

/// Default number of multi-start initializations.
pub const DEFAULT_RESTARTS: usize = 5;

/// `max_s s (s - 1) / (1 + s)^3`: bound on the second derivative of
/// `1 / (1 + e^t)`, attained at `s = 2 + sqrt(3)`.
const CURVATURE_BOUND: f64 = 0.096_225_044_864_937_63;

const MAX_BLOCK_STEPS: usize = 20_000;
const MULTIPLIER_STEPS: usize = 200;
const STALL_TOL: f64 = 1e-12;

/// Tangent lower bound of `log2(1 + z)` in `log2 z`, tight at `z0`.
pub fn bound_params_at(z0: f64) -> Result<(f64, f64)> {
    if !(z0 > 0.0 && z0.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bound anchor {z0} must be positive and finite"
        )));
    }
    let omega = z0 / (1.0 + z0);
    Ok((
        omega,
        z0.ln_1p() / std::f64::consts::LN_2 - omega * z0.log2(),
    ))
}

/// Bob-side bounds for every user and joint realization.
#[derive(Debug, Clone)]
pub struct BoundParams {
    /// Per user, per realization (in `TypeSpace::for_each` order).
    pub omega: Vec<Vec<f64>>,
    pub offset: Vec<Vec<f64>>,
    pub anchor: Vec<Vec<f64>>,
    /// Realizations with a positive secrecy rate at the anchor profile.
    pub active: Vec<Vec<bool>>,
}

impl BoundParams {
    /// Bounds tight at `profile` (all powers strictly positive).
    pub fn at_profile(cfg: &GameConfig, profile: &StrategyProfile) -> Result<Self> {
        let k = cfg.num_users();
        let mut out = BoundParams {
            omega: vec![Vec::new(); k],
            offset: vec![Vec::new(); k],
            anchor: vec![Vec::new(); k],
            active: vec![Vec::new(); k],
        };
        let mut failure = None;
        for_each_link(cfg, profile, |user, _, link| {
            let zb = link.h * link.p / link.psi_b;
            let ze = link.g * link.p / link.psi_e;
            match bound_params_at(zb) {
                Ok((w, o)) => {
                    out.omega[user].push(w);
                    out.offset[user].push(o);
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    out.omega[user].push(0.0);
                    out.offset[user].push(0.0);
                }
            }
            out.anchor[user].push(zb);
            out.active[user].push(zb > ze);
        });
        match failure {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }
}

/// One user's view of one joint realization.
struct Link<'a> {
    prob: f64,
    h: f64,
    g: f64,
    p: f64,
    psi_b: f64,
    psi_e: f64,
    types: &'a [usize],
}

/// Visits `(user, realization index, link)` for every user in every joint
/// realization, in `TypeSpace::for_each` order.
fn for_each_link(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    mut f: impl FnMut(usize, usize, &Link),
) {
    let space = TypeSpace::new(cfg);
    let mut r = 0;
    space.for_each(|idx, prob| {
        let mut tot_b = cfg.noise_power;
        let mut tot_e = cfg.noise_power;
        for (l, u) in cfg.users.iter().enumerate() {
            let (h, g) = u.law.gains(idx[l]);
            let p = profile.policies[l].as_slice()[idx[l]];
            tot_b += h * p;
            tot_e += g * p;
        }
        for (k, u) in cfg.users.iter().enumerate() {
            let (h, g) = u.law.gains(idx[k]);
            let p = profile.policies[k].as_slice()[idx[k]];
            f(
                k,
                r,
                &Link {
                    prob,
                    h,
                    g,
                    p,
                    psi_b: tot_b - h * p,
                    psi_e: tot_e - g * p,
                    types: idx,
                },
            );
        }
        r += 1;
    });
}

fn to_powers(log_powers: &StrategyProfile) -> StrategyProfile {
    let mut out = log_powers.clone();
    for p in &mut out.policies {
        for v in p.as_mut_slice() {
            *v = v.exp2();
        }
    }
    out
}

/// Convex parts `(F, H)` of the negated bounded sum rate at the log-powers
/// `log_powers` (entries are `log2 P`).
pub fn dc_objective(
    cfg: &GameConfig,
    log_powers: &StrategyProfile,
    bounds: &BoundParams,
) -> (f64, f64) {
    let powers = to_powers(log_powers);
    let mut f = 0.0;
    let mut h_part = 0.0;
    for_each_link(cfg, &powers, |k, r, link| {
        if !bounds.active[k][r] {
            return;
        }
        let x = log_powers.policies[k].as_slice()[link.types[k]];
        f += link.prob
            * (-bounds.omega[k][r] * (link.h.log2() + x - link.psi_b.log2()) - bounds.offset[k][r]
                + (link.psi_e + link.g * link.p).log2());
        h_part += link.prob * link.psi_e.log2();
    });
    (f, h_part)
}

/// Bounded sum rate `-(F - H)` at a profile in the power domain.
pub fn bounded_sum_rate(cfg: &GameConfig, profile: &StrategyProfile, bounds: &BoundParams) -> f64 {
    let mut logs = profile.clone();
    for p in &mut logs.policies {
        for v in p.as_mut_slice() {
            *v = v.log2();
        }
    }
    let (f, h) = dc_objective(cfg, &logs, bounds);
    h - f
}

/// Clamped social welfare, the sum of every user's expected secrecy rate.
pub fn exact_sum_rate(cfg: &GameConfig, profile: &StrategyProfile) -> f64 {
    (0..cfg.num_users())
        .map(|k| ergodic_utility(cfg, profile, k, true))
        .sum()
}

/// One block update of the successive-bound loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaStep {
    pub user: usize,
    /// Exact clamped sum rate at the new iterate.
    pub sum_rate: f64,
    /// Bounded objective at the new iterate with bounds from the previous one.
    pub bound_value: f64,
}

#[derive(Debug, Clone)]
pub struct CentralSolution {
    pub profile: StrategyProfile,
    pub sum_rate: f64,
    pub bound_value: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    pub history: Vec<ScaStep>,
    /// Index of the initialization that produced this solution.
    pub start: usize,
}

/// `coef * log2(offset + gain * 2^x)` with `offset` independent of `x`.
#[derive(Debug, Clone, Copy)]
struct SatTerm {
    coef: f64,
    offset: f64,
    gain: f64,
}

/// Surrogate restricted to one type of the updated user:
/// `slope * x - quad * (x - center)^2 - sum coef * log2(offset + gain 2^x)`.
#[derive(Debug, Clone, Default)]
struct TypeSurrogate {
    slope: f64,
    quad: f64,
    center: f64,
    terms: Vec<SatTerm>,
}

impl TypeSurrogate {
    fn value(&self, x: f64) -> f64 {
        let p = x.exp2();
        let d = x - self.center;
        self.slope * x
            - self.quad * d * d
            - self
                .terms
                .iter()
                .map(|t| t.coef * (t.offset + t.gain * p).log2())
                .sum::<f64>()
    }

    fn derivative(&self, x: f64) -> f64 {
        let p = x.exp2();
        self.slope
            - 2.0 * self.quad * (x - self.center)
            - self
                .terms
                .iter()
                .map(|t| t.coef * t.gain * p / (t.offset + t.gain * p))
                .sum::<f64>()
    }
}

struct Block {
    types: Vec<TypeSurrogate>,
    weights: Vec<f64>,
    budget: f64,
    lo: f64,
    hi: f64,
    width: f64,
}

impl Block {
    /// Maximizer of one type's surrogate minus `mu * w * 2^x`.
    fn type_argmax(&self, ty: usize, mu: f64) -> f64 {
        let s = &self.types[ty];
        let c = mu * self.weights[ty] * std::f64::consts::LN_2;
        let rho = |x: f64| s.derivative(x) - c * x.exp2();
        if rho(self.lo) <= 0.0 {
            return self.lo;
        }
        if rho(self.hi) >= 0.0 {
            return self.hi;
        }
        let (mut a, mut b) = (self.lo, self.hi);
        while b - a > self.width {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if rho(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    fn argmax_at(&self, mu: f64) -> Vec<f64> {
        (0..self.types.len())
            .map(|ty| self.type_argmax(ty, mu))
            .collect()
    }

    fn spent(&self, xs: &[f64]) -> f64 {
        xs.iter()
            .zip(&self.weights)
            .map(|(x, w)| w * x.exp2())
            .sum()
    }

    fn value(&self, xs: &[f64]) -> f64 {
        self.types.iter().zip(xs).map(|(s, &x)| s.value(x)).sum()
    }

    /// Maximizes the block surrogate subject to the expected-power budget.
    fn solve(&self) -> Vec<f64> {
        let free = self.argmax_at(0.0);
        if self.spent(&free) <= self.budget {
            return free;
        }
        let mut hi = 1.0;
        let mut best = self.argmax_at(hi);
        let mut guard = 0;
        while self.spent(&best) > self.budget && guard < 200 {
            hi *= 2.0;
            best = self.argmax_at(hi);
            guard += 1;
        }
        let mut lo = 0.0;
        for _ in 0..MULTIPLIER_STEPS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let xs = self.argmax_at(mid);
            let spent = self.spent(&xs);
            if spent > self.budget {
                lo = mid;
            } else {
                best = xs;
                hi = mid;
                if self.budget - spent <= 1e-3 * 1e-8 * self.budget.max(1.0) {
                    break;
                }
            }
        }
        best
    }
}

/// Builds the surrogate for `user`'s block with bounds and the `H`
/// linearization anchored at `profile`.
fn build_block(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    bounds: &BoundParams,
    user: usize,
) -> Block {
    let u = &cfg.users[user];
    let n = u.law.num_types();
    let mut types = vec![TypeSurrogate::default(); n];
    for_each_link(cfg, profile, |k, r, link| {
        if !bounds.active[k][r] {
            return;
        }
        let own_ty = link.types[user];
        let (h_u, g_u) = u.law.gains(own_ty);
        let p_u = profile.policies[user].as_slice()[own_ty];
        let s = &mut types[own_ty];
        s.center = p_u.log2();
        if k == user {
            s.slope += link.prob * bounds.omega[k][r];
            s.terms.push(SatTerm {
                coef: link.prob,
                offset: link.psi_e,
                gain: g_u,
            });
        } else {
            // user's power inside another user's Bob and Eve terms
            s.terms.push(SatTerm {
                coef: link.prob * bounds.omega[k][r],
                offset: link.psi_b - h_u * p_u,
                gain: h_u,
            });
            // other user's Eve rate -log2(1 + c / psi_e): either keep
            // log2(psi_e + c) exact and linearize log2(psi_e), or bound the
            // whole term by a quadratic whose curvature scales with c
            let c = link.g * link.p;
            let rest = link.psi_e - g_u * p_u;
            let z0 = c / link.psi_e;
            let curvature = c * CURVATURE_BOUND / (rest * (1.0 + z0));
            let s0 = g_u * p_u / rest;
            if curvature <= s0 / ((1.0 + s0) * (1.0 + s0)) {
                s.slope += link.prob * c * g_u * p_u / (link.psi_e * (link.psi_e + c));
                s.quad += link.prob * curvature * std::f64::consts::LN_2 / 2.0;
            } else {
                s.terms.push(SatTerm {
                    coef: link.prob,
                    offset: rest + c,
                    gain: g_u,
                });
                s.slope += link.prob * g_u * p_u / link.psi_e;
            }
        }
    });
    Block {
        types,
        weights: u.law.type_probs(),
        budget: u.avg_power,
        lo: (POWER_FLOOR_RATIO * u.avg_power).log2(),
        hi: u.max_power.log2(),
        width: cfg.tolerances.bisection_width,
    }
}

/// Moves a feasible profile onto the power floor without breaking the budget.
fn lift_to_floor(cfg: &GameConfig, profile: &StrategyProfile) -> StrategyProfile {
    let mut out = profile.clone();
    for (u, pol) in cfg.users.iter().zip(&mut out.policies) {
        let floor = POWER_FLOOR_RATIO * u.avg_power;
        for v in pol.as_mut_slice() {
            *v = v.clamp(floor, u.max_power);
        }
        let e = pol.expected_power(&u.law);
        if e > u.avg_power {
            let s = (u.avg_power - floor) / (e - floor);
            for v in pol.as_mut_slice() {
                *v = floor + s * (*v - floor);
            }
        }
    }
    out
}

fn run_from(cfg: &GameConfig, init: &StrategyProfile, start: usize) -> Result<CentralSolution> {
    let mut current = lift_to_floor(cfg, init);
    let mut current_rate = exact_sum_rate(cfg, &current);
    let mut history = Vec::new();
    let k = cfg.num_users();
    let mut round_start_rate = current_rate;
    let mut last_bound = current_rate;
    let mut converged = false;
    let mut steps = 0;
    while steps < MAX_BLOCK_STEPS {
        let user = steps % k;
        let bounds = BoundParams::at_profile(cfg, &current)?;
        let block = build_block(cfg, &current, &bounds, user);
        let old_x: Vec<f64> = current.policies[user]
            .as_slice()
            .iter()
            .map(|p| p.log2())
            .collect();
        let new_x = block.solve();
        let mut candidate = current.clone();
        if block.value(&new_x) > block.value(&old_x) {
            candidate.policies[user] = PowerPolicy::new(
                cfg.users[user].law.num_states(),
                new_x
                    .iter()
                    .map(|x| x.exp2().min(cfg.users[user].max_power))
                    .collect(),
            )?;
        }
        let rate = exact_sum_rate(cfg, &candidate);
        let bound = bounded_sum_rate(cfg, &candidate, &bounds);
        history.push(ScaStep {
            user,
            sum_rate: rate,
            bound_value: bound,
        });
        current = candidate;
        current_rate = rate;
        last_bound = bound;
        steps += 1;
        if steps % k == 0 {
            if current_rate - round_start_rate <= STALL_TOL * current_rate.abs().max(1.0) {
                converged = true;
                break;
            }
            round_start_rate = current_rate;
        }
    }
    // powers parked on the floor are switched off when that does not hurt
    let mut snapped = current.clone();
    for (u, pol) in cfg.users.iter().zip(&mut snapped.policies) {
        let floor = POWER_FLOOR_RATIO * u.avg_power;
        for v in pol.as_mut_slice() {
            if *v <= floor * (1.0 + 1e-9) {
                *v = 0.0;
            }
        }
    }
    let snapped_rate = exact_sum_rate(cfg, &snapped);
    if snapped_rate >= current_rate {
        current = snapped;
        current_rate = snapped_rate;
    }
    Ok(CentralSolution {
        profile: current,
        sum_rate: current_rate,
        bound_value: last_bound,
        outer_iterations: steps,
        converged,
        history,
        start,
    })
}

/// Best solution over the given initializations (first wins ties).
pub fn solve_social_optimum_from(
    cfg: &GameConfig,
    inits: &[StrategyProfile],
) -> Result<CentralSolution> {
    let diags = validate_config(cfg);
    if !diags.is_empty() {
        return Err(Error::Invalid(diags));
    }
    if inits.is_empty() {
        return Err(Error::InvalidArgument("no initializations given".into()));
    }
    let mut best: Option<CentralSolution> = None;
    for (i, init) in inits.iter().enumerate() {
        let sol = run_from(cfg, init, i)?;
        if best.as_ref().is_none_or(|b| sol.sum_rate > b.sum_rate) {
            best = Some(sol);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Initializations used by [`solve_social_optimum`]: the uniform profile,
/// one profile per user in which only that user transmits (uniformly), then
/// `restarts - 1` seeded random feasible profiles.
pub fn default_starts(cfg: &GameConfig, restarts: usize, seed: u64) -> Vec<StrategyProfile> {
    let uniform = StrategyProfile::uniform(cfg);
    let mut out = vec![uniform.clone()];
    for k in 0..cfg.num_users() {
        let mut solo = StrategyProfile::zeros(cfg);
        solo.policies[k] = uniform.policies[k].clone();
        out.push(solo);
    }
    let target = out.len() + restarts.max(1) - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < target {
        if let Some(p) = random_feasible_profile(cfg, &mut rng) {
            out.push(p);
        }
    }
    out
}

/// Multi-start successive-bound maximization of the clamped sum rate.
pub fn solve_social_optimum(
    cfg: &GameConfig,
    restarts: usize,
    seed: u64,
) -> Result<CentralSolution> {
    solve_social_optimum_from(cfg, &default_starts(cfg, restarts, seed))
}
