//! Exact best response of one user against fixed opponent policies.
//!
//! The expected secrecy rate of a user is separable over its own types, and
//! each per-type term is concave and non-decreasing in the type's power. The
//! KKT conditions therefore reduce to a water-filling rule: every active type
//! runs at the power where its marginal rate equals a common water level `mu`,
//! types whose marginal at zero power is below `mu` stay silent, and `mu` is
//! chosen so the expected power meets the budget. Both the per-type inversion
//! and the search for `mu` are bisections on monotone functions.
//!
//! Marginals are per unit type probability. A realization in which Bob's
//! effective gain does not exceed Eve's has a clamped rate of exactly zero for
//! every own power, so it contributes nothing to the marginal.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{GameConfig, PowerPolicy, StrategyProfile};
use crate::rates::OpponentField;

/// Water-level bisection steps allowed before giving up on the budget target.
const MAX_LEVEL_STEPS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// Worst gap between a type's marginal and the water level (sign-aware
    /// at the bounds).
    pub stationarity: f64,
    /// Worst `nu_ij * P_ij`.
    pub complementarity: f64,
    /// Expected-power mismatch.
    pub budget: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.complementarity).max(self.budget)
    }
}

#[derive(Debug, Clone)]
pub struct BestResponseSolution {
    pub policy: PowerPolicy,
    /// Common marginal value `mu` of the average-power constraint.
    pub water_level: f64,
    /// Multipliers of `P_ij >= 0`, in probability-weighted units.
    pub slack_multipliers: DMatrix<f64>,
    pub residuals: KktResiduals,
    pub kkt_residual: f64,
    pub achieved_utility: f64,
    /// Set when the budget cannot be spent because every productive type is
    /// already at its cap.
    pub cap_saturated: bool,
}

struct TypeData {
    h: f64,
    g: f64,
    prob: f64,
}

/// One user's best-response problem with the opponent field precomputed.
pub struct BestResponseProblem {
    field: OpponentField,
    types: Vec<TypeData>,
    states: usize,
    avg_power: f64,
    max_power: f64,
    width: f64,
    budget_tol: f64,
}

impl BestResponseProblem {
    pub fn new(cfg: &GameConfig, profile: &StrategyProfile, user: usize) -> Result<Self> {
        if user >= cfg.num_users() {
            return Err(Error::IndexOutOfRange {
                what: "user",
                index: user,
                limit: cfg.num_users(),
            });
        }
        let u = &cfg.users[user];
        let probs = u.law.type_probs();
        let types = (0..u.law.num_types())
            .map(|ty| {
                let (h, g) = u.law.gains(ty);
                TypeData {
                    h,
                    g,
                    prob: probs[ty],
                }
            })
            .collect();
        Ok(Self {
            field: OpponentField::new(cfg, profile, user),
            types,
            states: u.law.num_states(),
            avg_power: u.avg_power,
            max_power: u.max_power,
            width: cfg.tolerances.bisection_width,
            budget_tol: cfg.tolerances.kkt_residual,
        })
    }

    fn check_type(&self, i: usize, j: usize) -> Result<usize> {
        for (what, v) in [("bob state", i), ("eve state", j)] {
            if v >= self.states {
                return Err(Error::IndexOutOfRange {
                    what,
                    index: v,
                    limit: self.states,
                });
            }
        }
        Ok(i * self.states + j)
    }

    fn marginal(&self, ty: usize, power: f64) -> f64 {
        let t = &self.types[ty];
        self.field.clamped_marginal(t.h, t.g, power)
    }

    pub fn marginal_value(&self, i: usize, j: usize, power: f64) -> Result<f64> {
        let ty = self.check_type(i, j)?;
        Ok(self.marginal(ty, power))
    }

    fn level_power(&self, ty: usize, mu: f64) -> f64 {
        if self.marginal(ty, 0.0) <= mu {
            return 0.0;
        }
        if self.marginal(ty, self.max_power) > mu {
            return self.max_power;
        }
        let (mut lo, mut hi) = (0.0, self.max_power);
        while hi - lo > self.width {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.marginal(ty, mid) > mu {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn power_at_level(&self, i: usize, j: usize, mu: f64) -> Result<f64> {
        let ty = self.check_type(i, j)?;
        Ok(self.level_power(ty, mu))
    }

    fn policy_at(&self, mu: f64) -> Vec<f64> {
        (0..self.types.len())
            .map(|ty| self.level_power(ty, mu))
            .collect()
    }

    fn expected(&self, powers: &[f64]) -> f64 {
        self.types.iter().zip(powers).map(|(t, p)| t.prob * p).sum()
    }

    /// Expected power of the water-filling policy at level `mu`.
    pub fn expected_power_at(&self, mu: f64) -> f64 {
        self.expected(&self.policy_at(mu))
    }

    pub fn utility(&self, powers: &[f64]) -> f64 {
        self.types
            .iter()
            .zip(powers)
            .map(|(t, &p)| t.prob * self.field.type_utility(t.h, t.g, p, true))
            .sum()
    }

    pub fn solve(&self) -> BestResponseSolution {
        let mut mu = 0.0;
        let mut powers = self.policy_at(0.0);
        let spent_at_zero = self.expected(&powers);
        let cap_saturated = spent_at_zero < self.avg_power - self.budget_tol;
        if spent_at_zero > self.avg_power + self.budget_tol {
            let mut lo = 0.0;
            let mut hi = (0..self.types.len())
                .map(|ty| self.marginal(ty, 0.0))
                .fold(0.0, f64::max);
            for _ in 0..MAX_LEVEL_STEPS {
                mu = 0.5 * (lo + hi);
                powers = self.policy_at(mu);
                let spent = self.expected(&powers);
                if (spent - self.avg_power).abs() <= 0.01 * self.budget_tol {
                    break;
                }
                if spent > self.avg_power {
                    lo = mu;
                } else {
                    hi = mu;
                }
                if hi - lo <= f64::EPSILON * hi {
                    break;
                }
            }
        }
        self.finish(powers, mu, cap_saturated)
    }

    fn finish(&self, powers: Vec<f64>, mu: f64, cap_saturated: bool) -> BestResponseSolution {
        let n = self.states;
        let mut slack = DMatrix::zeros(n, n);
        let mut stationarity: f64 = 0.0;
        let mut complementarity: f64 = 0.0;
        for (ty, &p) in powers.iter().enumerate() {
            let m = self.marginal(ty, p);
            let gap = if p <= 0.0 {
                // nu = prob * (mu - m) must be non-negative
                slack[(ty / n, ty % n)] = self.types[ty].prob * (mu - m).max(0.0);
                (m - mu).max(0.0)
            } else if p >= self.max_power {
                (mu - m).max(0.0)
            } else {
                (m - mu).abs()
            };
            stationarity = stationarity.max(gap);
            complementarity = complementarity.max(slack[(ty / n, ty % n)] * p);
        }
        let spent = self.expected(&powers);
        let budget = if mu > 0.0 {
            (spent - self.avg_power).abs()
        } else {
            (spent - self.avg_power).max(0.0)
        };
        let residuals = KktResiduals {
            stationarity,
            complementarity,
            budget,
        };
        BestResponseSolution {
            achieved_utility: self.utility(&powers),
            policy: PowerPolicy::new(n, powers).expect("policy shape"),
            water_level: mu,
            slack_multipliers: slack,
            kkt_residual: residuals.max(),
            residuals,
            cap_saturated,
        }
    }
}

/// Marginal expected secrecy rate of type `(i, j)` of `user` at `power`, per
/// unit type probability. The user's own policy in `profile` is ignored.
pub fn marginal_value(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    user: usize,
    i: usize,
    j: usize,
    power: f64,
) -> Result<f64> {
    BestResponseProblem::new(cfg, profile, user)?.marginal_value(i, j, power)
}

/// Power in `[0, max_power]` at which the marginal of type `(i, j)` meets
/// the water level `mu`.
pub fn power_at_level(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    user: usize,
    i: usize,
    j: usize,
    mu: f64,
) -> Result<f64> {
    if mu.is_nan() || mu < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "water level {mu} must be >= 0"
        )));
    }
    BestResponseProblem::new(cfg, profile, user)?.power_at_level(i, j, mu)
}

/// Best response of `user` to the other policies in `profile`.
pub fn solve_best_response(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    user: usize,
) -> Result<BestResponseSolution> {
    Ok(BestResponseProblem::new(cfg, profile, user)?.solve())
}
