//! Brute-force validators on small instances (two users, at most two states
//! per link).
//!
//! Rates are evaluated here from their closed form, independently of the
//! `rates` module, and utilities are the clamped expected secrecy rates.
//! Grid points are multiples of `step * avg_power` per user.
//!
//! The social-optimum search enumerates every grid policy of the second user.
//! For each, the sum rate is separable over the first user's types, so the
//! best first-user grid policy is found exactly by a max-plus knapsack over
//! budget units. This requires the type probabilities of each user to be
//! integer multiples of the smallest one.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::model::{GameConfig, PowerPolicy, StrategyProfile};

/// Candidate policies allowed per user.
pub const MAX_CANDIDATES: u128 = 50_000_000;

/// Max-plus operations allowed in one social-optimum search.
pub const MAX_SOCIAL_WORK: u128 = 20_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BudgetMode {
    /// Expected power equals the budget.
    #[default]
    Equality,
    /// Expected power at most the budget; every coordinate on the grid.
    Inequality,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Grid spacing as a fraction of the user's average budget.
    pub step: f64,
    pub budget_mode: BudgetMode,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            step: 0.01,
            budget_mode: BudgetMode::Equality,
        }
    }
}

impl GridSpec {
    pub fn new(step: f64, budget_mode: BudgetMode) -> Self {
        Self { step, budget_mode }
    }
}

fn check_size(cfg: &GameConfig) -> Result<()> {
    let states = cfg
        .users
        .iter()
        .map(|u| u.law.num_states())
        .max()
        .unwrap_or(0);
    if cfg.num_users() != 2 || states > 2 {
        return Err(Error::OracleSize {
            users: cfg.num_users(),
            states,
        });
    }
    Ok(())
}

fn check_step(grid: &GridSpec) -> Result<()> {
    if !(grid.step > 0.0 && grid.step.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "grid step {} must be positive",
            grid.step
        )));
    }
    Ok(())
}

/// `(C_b - C_e)^+` in bits.
fn secrecy(h: f64, g: f64, p: f64, psi_b: f64, psi_e: f64) -> f64 {
    let bob = (1.0 + h * p / psi_b).log2();
    let eve = (1.0 + g * p / psi_e).log2();
    (bob - eve).max(0.0)
}

struct TypeInfo {
    prob: f64,
    h: f64,
    g: f64,
}

fn types(cfg: &GameConfig, user: usize) -> Vec<TypeInfo> {
    let law = &cfg.users[user].law;
    let mut out = Vec::new();
    for (i, &a) in law.bob_probs.iter().enumerate() {
        for (j, &b) in law.eve_probs.iter().enumerate() {
            out.push(TypeInfo {
                prob: a * b,
                h: law.bob_states[i],
                g: law.eve_states[j],
            });
        }
    }
    out
}

/// Expected secrecy rate of one own type at power `p` against a fixed
/// opponent policy.
fn type_value(
    cfg: &GameConfig,
    own: &TypeInfo,
    p: f64,
    opp: &[TypeInfo],
    opp_policy: &[f64],
) -> f64 {
    opp.iter()
        .zip(opp_policy)
        .map(|(o, &q)| {
            o.prob
                * secrecy(
                    own.h,
                    own.g,
                    p,
                    cfg.noise_power + o.h * q,
                    cfg.noise_power + o.g * q,
                )
        })
        .sum()
}

/// Clamped expected utility of `user` under `profile`, by direct summation.
pub fn utility(cfg: &GameConfig, profile: &StrategyProfile, user: usize) -> Result<f64> {
    check_size(cfg)?;
    let other = 1 - user;
    let own = types(cfg, user);
    let opp = types(cfg, other);
    let pol = profile.policies[user].as_slice();
    let opp_pol = profile.policies[other].as_slice();
    Ok(own
        .iter()
        .zip(pol)
        .map(|(t, &p)| t.prob * type_value(cfg, t, p, &opp, opp_pol))
        .sum())
}

/// Sum of both users' clamped expected utilities.
pub fn sum_rate(cfg: &GameConfig, profile: &StrategyProfile) -> Result<f64> {
    Ok(utility(cfg, profile, 0)? + utility(cfg, profile, 1)?)
}

struct Enumerator<'a> {
    weights: &'a [f64],
    /// Largest grid index per coordinate.
    limits: Vec<usize>,
    delta: f64,
    budget: f64,
    max_power: f64,
    mode: BudgetMode,
}

impl Enumerator<'_> {
    /// Calls `f(indices, last_power)` for every candidate. In equality mode
    /// the last coordinate is solved from the budget and passed separately;
    /// in inequality mode `last_power` is `None`.
    fn run(&self, mut f: impl FnMut(&[usize], Option<f64>)) {
        let t = self.weights.len();
        let free = match self.mode {
            BudgetMode::Equality => t - 1,
            BudgetMode::Inequality => t,
        };
        let mut idx = vec![0usize; free];
        self.walk(0, 0.0, &mut idx, &mut f);
    }

    fn walk(
        &self,
        pos: usize,
        spent: f64,
        idx: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize], Option<f64>),
    ) {
        let slack = 1e-12 * self.budget;
        if pos == idx.len() {
            match self.mode {
                BudgetMode::Inequality => f(idx, None),
                BudgetMode::Equality => {
                    let w = self.weights[self.weights.len() - 1];
                    let rem = (self.budget - spent).max(0.0);
                    let last = if w > 0.0 { rem / w } else { 0.0 };
                    if (w > 0.0 || rem <= slack) && last <= self.max_power * (1.0 + 1e-12) {
                        f(idx, Some(last.min(self.max_power)));
                    }
                }
            }
            return;
        }
        for s in 0..=self.limits[pos] {
            let cost = spent + self.weights[pos] * s as f64 * self.delta;
            if cost > self.budget + slack {
                break;
            }
            idx[pos] = s;
            self.walk(pos + 1, cost, idx, f);
        }
    }

    fn count(&self) -> u128 {
        let mut n: u128 = 0;
        self.run(|_, _| n += 1);
        n
    }
}

fn grid_limits(weights: &[f64], delta: f64, budget: f64, max_power: f64) -> Vec<usize> {
    weights
        .iter()
        .map(|&w| {
            let top = if w > 0.0 {
                max_power.min(budget / w)
            } else {
                max_power
            };
            (top / delta + 1e-9).floor() as usize
        })
        .collect()
}

/// Best grid policy of `user` against the other policy in `profile`, with
/// its clamped expected utility.
pub fn grid_best_response(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    user: usize,
    grid: &GridSpec,
) -> Result<(PowerPolicy, f64)> {
    check_size(cfg)?;
    check_step(grid)?;
    let u = &cfg.users[user];
    let own = types(cfg, user);
    let opp = types(cfg, 1 - user);
    let opp_pol = profile.policies[1 - user].as_slice();
    let weights: Vec<f64> = own.iter().map(|t| t.prob).collect();
    let delta = grid.step * u.avg_power;
    let en = Enumerator {
        limits: grid_limits(&weights, delta, u.avg_power, u.max_power),
        weights: &weights,
        delta,
        budget: u.avg_power,
        max_power: u.max_power,
        mode: grid.budget_mode,
    };
    let candidates = en.count();
    if candidates > MAX_CANDIDATES {
        return Err(Error::GridTooLarge {
            candidates,
            limit: MAX_CANDIDATES,
        });
    }
    let tables: Vec<Vec<f64>> = own
        .iter()
        .zip(&en.limits)
        .map(|(t, &lim)| {
            (0..=lim)
                .map(|s| t.prob * type_value(cfg, t, s as f64 * delta, &opp, opp_pol))
                .collect()
        })
        .collect();
    let last = own.last().expect("at least one type");
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = Vec::new();
    let mut best_last = None;
    en.run(|idx, last_power| {
        let mut v: f64 = idx.iter().enumerate().map(|(a, &s)| tables[a][s]).sum();
        if let Some(p) = last_power {
            v += last.prob * type_value(cfg, last, p, &opp, opp_pol);
        }
        if v > best {
            best = v;
            best_idx = idx.to_vec();
            best_last = last_power;
        }
    });
    let mut powers: Vec<f64> = best_idx.iter().map(|&s| s as f64 * delta).collect();
    if let Some(p) = best_last {
        powers.push(p);
    }
    Ok((PowerPolicy::new(u.law.num_states(), powers)?, best))
}

/// Integer budget units for the knapsack: per-type unit cost and total units.
fn budget_units(weights: &[f64], step: f64) -> Result<(Vec<usize>, usize)> {
    let w_min = weights
        .iter()
        .copied()
        .filter(|&w| w > 0.0)
        .fold(f64::INFINITY, f64::min);
    let near_int = |x: f64| {
        let r = x.round();
        ((x - r).abs() <= 1e-9 * x.max(1.0)).then_some(r as usize)
    };
    let costs: Option<Vec<usize>> = weights.iter().map(|&w| near_int(w / w_min)).collect();
    match (costs, near_int(1.0 / (w_min * step))) {
        (Some(c), Some(n)) if c.iter().all(|&c| c > 0) => Ok((c, n)),
        _ => Err(Error::InvalidArgument(
            "grid social optimum needs type probabilities that are integer multiples of the smallest, \
             and a step dividing the budget into whole units"
                .into(),
        )),
    }
}

/// Max-plus knapsack over per-type gains. `gains[a][s]` is the value of
/// putting `s` grid steps on type `a`; `costs[a]` units per step. Returns
/// the best value per exact unit count and the choice table.
fn knapsack(gains: &[Vec<f64>], costs: &[usize], units: usize) -> (Vec<f64>, Vec<Vec<usize>>) {
    let mut best = vec![f64::NEG_INFINITY; units + 1];
    best[0] = 0.0;
    let mut choices = Vec::with_capacity(gains.len());
    for (g, &c) in gains.iter().zip(costs) {
        let mut next = vec![f64::NEG_INFINITY; units + 1];
        let mut pick = vec![0usize; units + 1];
        for b in 0..=units {
            for (s, &v) in g.iter().enumerate() {
                let used = s * c;
                if used > b {
                    break;
                }
                let cand = best[b - used] + v;
                if cand > next[b] {
                    next[b] = cand;
                    pick[b] = s;
                }
            }
        }
        best = next;
        choices.push(pick);
    }
    (best, choices)
}

fn knapsack_target(best: &[f64], mode: BudgetMode) -> (usize, f64) {
    match mode {
        BudgetMode::Equality => (best.len() - 1, best[best.len() - 1]),
        BudgetMode::Inequality => {
            best.iter()
                .copied()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (b, v)| if v > acc.1 { (b, v) } else { acc },
                )
        }
    }
}

/// Best joint grid profile for the clamped sum rate.
pub fn grid_social_optimum(cfg: &GameConfig, grid: &GridSpec) -> Result<(StrategyProfile, f64)> {
    check_size(cfg)?;
    check_step(grid)?;
    let t1 = types(cfg, 0);
    let t2 = types(cfg, 1);
    let w1: Vec<f64> = t1.iter().map(|t| t.prob).collect();
    let w2: Vec<f64> = t2.iter().map(|t| t.prob).collect();
    let (c1, n1) = budget_units(&w1, grid.step)?;
    let (c2, n2) = budget_units(&w2, grid.step)?;
    let d1 = grid.step * cfg.users[0].avg_power;
    let d2 = grid.step * cfg.users[1].avg_power;
    let lim = |c: &[usize], n: usize, d: f64, max: f64| -> Vec<usize> {
        c.iter()
            .map(|&c| (n / c).min((max / d + 1e-9).floor() as usize))
            .collect()
    };
    let lim1 = lim(&c1, n1, d1, cfg.users[0].max_power);
    let lim2 = lim(&c2, n2, d2, cfg.users[1].max_power);

    // second user's candidates as integer vectors within the unit budget
    let mut cands: Vec<Vec<usize>> = Vec::new();
    let mut idx = vec![0usize; t2.len()];
    enumerate_units(&c2, &lim2, n2, grid.budget_mode, 0, 0, &mut idx, &mut cands);
    let per_candidate: u128 = lim1
        .iter()
        .map(|&l| (l as u128 + 1) * (n1 as u128 + 1))
        .sum();
    let work = cands.len() as u128 * per_candidate;
    if cands.len() as u128 > MAX_CANDIDATES || work > MAX_SOCIAL_WORK {
        return Err(Error::GridTooLarge {
            candidates: work,
            limit: MAX_SOCIAL_WORK,
        });
    }

    // pair tables: weighted sum rate of type pair (a, b) at grid indices (s, t)
    let noise = cfg.noise_power;
    let pair: Vec<Vec<Vec<Vec<f64>>>> = t1
        .iter()
        .zip(&lim1)
        .map(|(a, &la)| {
            t2.iter()
                .zip(&lim2)
                .map(|(b, &lb)| {
                    (0..=la)
                        .map(|s| {
                            let p = s as f64 * d1;
                            (0..=lb)
                                .map(|t| {
                                    let q = t as f64 * d2;
                                    a.prob
                                        * b.prob
                                        * (secrecy(a.h, a.g, p, noise + b.h * q, noise + b.g * q)
                                            + secrecy(
                                                b.h,
                                                b.g,
                                                q,
                                                noise + a.h * p,
                                                noise + a.g * p,
                                            ))
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let gains_for = |cand: &[usize]| -> Vec<Vec<f64>> {
        (0..t1.len())
            .map(|a| {
                (0..=lim1[a])
                    .map(|s| {
                        cand.iter()
                            .enumerate()
                            .map(|(b, &t)| pair[a][b][s][t])
                            .sum()
                    })
                    .collect()
            })
            .collect()
    };

    let mut best = f64::NEG_INFINITY;
    let mut best_cand = 0;
    for (ci, cand) in cands.iter().enumerate() {
        let (table, _) = knapsack(&gains_for(cand), &c1, n1);
        let (_, v) = knapsack_target(&table, grid.budget_mode);
        if v > best {
            best = v;
            best_cand = ci;
        }
    }
    let (table, choices) = knapsack(&gains_for(&cands[best_cand]), &c1, n1);
    let (mut b, _) = knapsack_target(&table, grid.budget_mode);
    let mut steps1 = vec![0usize; t1.len()];
    for a in (0..t1.len()).rev() {
        steps1[a] = choices[a][b];
        b -= steps1[a] * c1[a];
    }
    let p1: Vec<f64> = steps1.iter().map(|&s| s as f64 * d1).collect();
    let p2: Vec<f64> = cands[best_cand].iter().map(|&t| t as f64 * d2).collect();
    let profile = StrategyProfile::new(vec![
        PowerPolicy::new(cfg.users[0].law.num_states(), p1)?,
        PowerPolicy::new(cfg.users[1].law.num_states(), p2)?,
    ]);
    Ok((profile, best))
}

#[allow(clippy::too_many_arguments)]
fn enumerate_units(
    costs: &[usize],
    limits: &[usize],
    units: usize,
    mode: BudgetMode,
    pos: usize,
    used: usize,
    idx: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if pos == costs.len() {
        if mode == BudgetMode::Inequality || used == units {
            out.push(idx.clone());
        }
        return;
    }
    for s in 0..=limits[pos] {
        let u = used + s * costs[pos];
        if u > units {
            break;
        }
        idx[pos] = s;
        enumerate_units(costs, limits, units, mode, pos + 1, u, idx, out);
    }
    idx[pos] = 0;
}

/// Largest gain any single user obtains by deviating to its best grid
/// policy. Negative when the grid cannot match the current policies.
pub fn deviation_scan(cfg: &GameConfig, profile: &StrategyProfile, grid: &GridSpec) -> Result<f64> {
    check_size(cfg)?;
    let mut worst = f64::NEG_INFINITY;
    for user in 0..2 {
        let current = utility(cfg, profile, user)?;
        let (_, best) = grid_best_response(cfg, profile, user, grid)?;
        worst = worst.max(best - current);
    }
    Ok(worst)
}

/// Bound on the utility lost by snapping a feasible policy of `user` to the
/// equality grid: the largest own-power partial derivative (attained at zero
/// power) times the total coordinate displacement of the snap.
pub fn lipschitz_bound(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    user: usize,
    grid: &GridSpec,
) -> Result<f64> {
    check_size(cfg)?;
    let own = types(cfg, user);
    let opp = types(cfg, 1 - user);
    let opp_pol = profile.policies[1 - user].as_slice();
    let slope = own
        .iter()
        .map(|t| {
            t.prob
                * opp
                    .iter()
                    .zip(opp_pol)
                    .map(|(o, &q)| {
                        let psi_b = cfg.noise_power + o.h * q;
                        let psi_e = cfg.noise_power + o.g * q;
                        o.prob * (t.h / psi_b - t.g / psi_e).max(0.0)
                    })
                    .sum::<f64>()
                / LN_2
        })
        .fold(0.0, f64::max);
    let delta = grid.step * cfg.users[user].avg_power;
    let w_last = own.last().map_or(1.0, |t| t.prob);
    let free = &own[..own.len() - 1];
    let shift: f64 = free.len() as f64 + free.iter().map(|t| t.prob / w_last).sum::<f64>();
    Ok(slope * delta * shift)
}
