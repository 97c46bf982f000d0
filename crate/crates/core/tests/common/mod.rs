//! Shared instances and finite-difference oracles for integration tests.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wiretap_game::rates::{degradedness_margin, ergodic_utility, random_feasible_profile};
use wiretap_game::{ChannelLaw, GameConfig, StrategyProfile, UserConfig};

pub fn canonical() -> GameConfig {
    GameConfig::symmetric(
        2,
        ChannelLaw::equiprobable(vec![2.0, 3.5], vec![0.2, 0.3]),
        1.0,
        1.0,
    )
}

pub fn second() -> GameConfig {
    GameConfig::symmetric(
        2,
        ChannelLaw::equiprobable(vec![5.0, 7.0], vec![0.5, 0.7]),
        1.0,
        1.0,
    )
}

pub fn reference_configs() -> [(&'static str, GameConfig); 2] {
    [("canonical", canonical()), ("second", second())]
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sorted_states<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        v.sort_by(f64::total_cmp);
        if v.windows(2).all(|w| w[1] - w[0] > 1e-3) {
            return v;
        }
    }
}

fn probs<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let head: f64 = p[..n - 1].iter().sum();
    p[n - 1] = 1.0 - head;
    p
}

/// Random two-user instance with `L <= 2` together with a random feasible
/// profile at which every realization is degraded.
pub fn random_degraded_instance<R: Rng>(rng: &mut R) -> (GameConfig, StrategyProfile) {
    loop {
        let users = (0..2)
            .map(|_| {
                let l = rng.gen_range(1..=2);
                let law = ChannelLaw {
                    bob_states: sorted_states(rng, l, 1.0, 6.0),
                    bob_probs: probs(rng, l),
                    eve_states: sorted_states(rng, l, 0.02, 0.6),
                    eve_probs: probs(rng, l),
                };
                UserConfig::new(law, rng.gen_range(0.2..3.0))
            })
            .collect();
        let cfg = GameConfig::new(users, rng.gen_range(0.5..2.0));
        if let Some(profile) = random_feasible_profile(&cfg, rng) {
            if degradedness_margin(&cfg, &profile) > 0.0 {
                return (cfg, profile);
            }
        }
    }
}

/// Random feasible profiles of `cfg` that are degraded and keep every power
/// at least `floor` away from zero.
pub fn interior_degraded_profiles(
    cfg: &GameConfig,
    count: usize,
    seed: u64,
    floor: f64,
) -> Vec<StrategyProfile> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let Some(p) = random_feasible_profile(cfg, &mut r) else {
            continue;
        };
        let interior = p.flatten().iter().all(|&x| x > floor);
        if interior && degradedness_margin(cfg, &p) > 0.0 {
            out.push(p);
        }
    }
    out
}

fn smooth(cfg: &GameConfig, profile: &StrategyProfile, user: usize) -> f64 {
    ergodic_utility(cfg, profile, user, false)
}

/// Stacked coordinate `(user, type)` list in user-major order.
pub fn coordinates(cfg: &GameConfig) -> Vec<(usize, usize)> {
    cfg.users
        .iter()
        .enumerate()
        .flat_map(|(k, u)| (0..u.law.num_types()).map(move |t| (k, t)))
        .collect()
}

fn bumped(profile: &StrategyProfile, moves: &[((usize, usize), f64)]) -> StrategyProfile {
    let mut p = profile.clone();
    for &((k, t), d) in moves {
        p.policies[k].as_mut_slice()[t] += d;
    }
    p
}

/// Central differences of the smooth utility of `user` in its own powers.
pub fn fd_gradient(cfg: &GameConfig, profile: &StrategyProfile, user: usize) -> Vec<f64> {
    let n = cfg.users[user].law.num_types();
    (0..n)
        .map(|t| {
            let h = 1e-5 * profile.policies[user].as_slice()[t].max(1.0);
            let up = smooth(cfg, &bumped(profile, &[((user, t), h)]), user);
            let down = smooth(cfg, &bumped(profile, &[((user, t), -h)]), user);
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Second differences of the smooth utilities: entry `(r, c)` approximates
/// the derivative of user `k(r)`'s own-gradient entry `r` in coordinate `c`.
pub fn fd_jacobian(cfg: &GameConfig, profile: &StrategyProfile) -> Vec<Vec<f64>> {
    let coords = coordinates(cfg);
    let h = 1e-4;
    coords
        .iter()
        .map(|&r| {
            let user = r.0;
            let u = |moves: &[((usize, usize), f64)]| smooth(cfg, &bumped(profile, moves), user);
            coords
                .iter()
                .map(|&c| {
                    if r == c {
                        (u(&[(r, h)]) - 2.0 * u(&[]) + u(&[(r, -h)])) / (h * h)
                    } else {
                        (u(&[(r, h), (c, h)]) - u(&[(r, h), (c, -h)]) - u(&[(r, -h), (c, h)])
                            + u(&[(r, -h), (c, -h)]))
                            / (4.0 * h * h)
                    }
                })
                .collect()
        })
        .collect()
}

/// `max |a - b| / max |b|` over all entries.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    diff / scale
}
