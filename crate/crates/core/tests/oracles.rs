mod common;

use common::{canonical, fd_gradient, fd_jacobian, relative_error, rng, second};
use wiretap_game::best_response::solve_best_response;
use wiretap_game::centralized::{exact_sum_rate, solve_social_optimum};
use wiretap_game::equilibrium::{run_algorithm1, Schedule};
use wiretap_game::experiments::{price_of_anarchy, social_welfare};
use wiretap_game::oracle::{
    self, deviation_scan, grid_best_response, grid_social_optimum, BudgetMode, GridSpec,
};
use wiretap_game::rates::{
    ergodic_utility, instantaneous_rates, random_feasible_profile, utility_gradient,
    utility_jacobian,
};
use wiretap_game::{ChannelLaw, GameConfig, StrategyProfile, UserConfig};

fn three_users() -> GameConfig {
    GameConfig::new(
        vec![
            UserConfig::new(
                ChannelLaw {
                    bob_states: vec![1.5, 3.0],
                    bob_probs: vec![0.3, 0.7],
                    eve_states: vec![0.1, 0.4],
                    eve_probs: vec![0.6, 0.4],
                },
                1.2,
            ),
            UserConfig::new(ChannelLaw::equiprobable(vec![2.0], vec![0.25]), 0.8),
            UserConfig::new(
                ChannelLaw::equiprobable(vec![2.5, 4.0], vec![0.3, 0.5]),
                1.0,
            ),
        ],
        0.9,
    )
}

/// Plain nested-loop expectation written out from the definition.
fn by_hand(cfg: &GameConfig, profile: &StrategyProfile, user: usize, clamped: bool) -> f64 {
    let mut grids: Vec<Vec<(f64, f64, f64, f64)>> = Vec::new();
    for (k, u) in cfg.users.iter().enumerate() {
        let law = &u.law;
        let l = law.bob_states.len();
        let mut g = Vec::new();
        for i in 0..l {
            for j in 0..l {
                let p = profile.policies[k].as_slice()[i * l + j];
                g.push((
                    law.bob_probs[i] * law.eve_probs[j],
                    law.bob_states[i],
                    law.eve_states[j],
                    p,
                ));
            }
        }
        grids.push(g);
    }
    let mut total = 0.0;
    for a in &grids[0] {
        for b in &grids[1] {
            for c in &grids[2] {
                let all = [a, b, c];
                let me = all[user];
                let (mut ib, mut ie) = (cfg.noise_power, cfg.noise_power);
                for (k, o) in all.iter().enumerate() {
                    if k != user {
                        ib += o.1 * o.3;
                        ie += o.2 * o.3;
                    }
                }
                let s = (1.0 + me.1 * me.3 / ib).log2() - (1.0 + me.2 * me.3 / ie).log2();
                total += a.0 * b.0 * c.0 * if clamped { s.max(0.0) } else { s };
            }
        }
    }
    total
}

#[test]
fn expectation_matches_nested_loops() {
    let cfg = three_users();
    let mut r = rng(5);
    for _ in 0..10 {
        let p =
            random_feasible_profile(&cfg, &mut r).unwrap_or_else(|| StrategyProfile::uniform(&cfg));
        for user in 0..3 {
            for clamped in [true, false] {
                let a = ergodic_utility(&cfg, &p, user, clamped);
                let b = by_hand(&cfg, &p, user, clamped);
                assert!((a - b).abs() < 1e-12, "user {user}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn expectation_matches_weighted_realizations() {
    let cfg = three_users();
    let p = StrategyProfile::uniform(&cfg);
    let laws: Vec<_> = cfg.users.iter().map(|u| u.law.clone()).collect();
    let mut total = 0.0;
    let pairs = |l: usize| (0..l).flat_map(move |i| (0..l).map(move |j| (i, j)));
    for a in pairs(2) {
        for b in pairs(1) {
            for c in pairs(2) {
                let w = laws[0].joint_prob(a.0, a.1).unwrap()
                    * laws[1].joint_prob(b.0, b.1).unwrap()
                    * laws[2].joint_prob(c.0, c.1).unwrap();
                total += w * instantaneous_rates(&cfg, &p, 0, &[a, b, c])
                    .unwrap()
                    .secrecy_rate;
            }
        }
    }
    assert!((total - ergodic_utility(&cfg, &p, 0, true)).abs() < 1e-12);
}

#[test]
fn three_user_derivatives_match_finite_differences() {
    let cfg = three_users();
    let profiles = common::interior_degraded_profiles(&cfg, 5, 17, 1e-2);
    for p in profiles {
        for user in 0..3 {
            let g = utility_gradient(&cfg, &p, user).unwrap();
            let l = cfg.users[user].law.num_states();
            let analytic: Vec<f64> = (0..l * l).map(|t| g[(t / l, t % l)]).collect();
            assert!(relative_error(&fd_gradient(&cfg, &p, user), &analytic) < 1e-6);
        }
        let jac = utility_jacobian(&cfg, &p, 1.0).unwrap();
        let fd = fd_jacobian(&cfg, &p);
        let n = fd.len();
        let analytic: Vec<f64> = (0..n * n).map(|e| jac[(e / n, e % n)]).collect();
        assert!(relative_error(&fd.concat(), &analytic) < 1e-4);
    }
}

#[test]
fn solver_beats_grid_on_random_instances() {
    let mut r = rng(77);
    let grid = GridSpec::new(0.05, BudgetMode::Equality);
    for _ in 0..8 {
        let (cfg, profile) = common::random_degraded_instance(&mut r);
        for user in 0..2 {
            let sol = solve_best_response(&cfg, &profile, user).unwrap();
            let (_, best) = grid_best_response(&cfg, &profile, user, &grid).unwrap();
            let bound = oracle::lipschitz_bound(&cfg, &profile, user, &grid).unwrap();
            let gap = sol.achieved_utility - best;
            assert!(gap >= -1e-9, "grid beats solver by {}", -gap);
            assert!(gap <= bound + 1e-9, "gap {gap} above bound {bound}");
            // both evaluations of the solver's policy agree
            let mut p = profile.clone();
            p.policies[user] = sol.policy.clone();
            let direct = oracle::utility(&cfg, &p, user).unwrap();
            assert!((direct - sol.achieved_utility).abs() < 1e-12);
        }
    }
}

#[test]
fn equilibrium_leaves_no_grid_deviation() {
    let cfg = canonical().at_snr(2.0);
    let trace = run_algorithm1(&cfg, None, Schedule::Sequential).unwrap();
    let gain = deviation_scan(
        &cfg,
        trace.final_profile(),
        &GridSpec::new(0.02, BudgetMode::Equality),
    )
    .unwrap();
    assert!(gain <= 1e-9, "grid deviation gains {gain}");
}

#[test]
fn central_beats_social_grid_on_second_config() {
    for snr in [1.0, 10.0] {
        let cfg = second().at_snr(snr);
        let (grid_profile, grid) =
            grid_social_optimum(&cfg, &GridSpec::new(0.1, BudgetMode::Inequality)).unwrap();
        assert!((oracle::sum_rate(&cfg, &grid_profile).unwrap() - grid).abs() < 1e-12);
        assert!((exact_sum_rate(&cfg, &grid_profile) - grid).abs() < 1e-12);
        let central = solve_social_optimum(&cfg, 3, 1).unwrap();
        assert!(
            central.sum_rate >= grid - 1e-9,
            "snr {snr}: {} < {grid}",
            central.sum_rate
        );
        assert!(central.sum_rate - grid < 1e-2);
    }
}

#[test]
fn single_state_poa_matches_closed_form() {
    // one user alone at full power beats two users sharing the channel
    let cfg = GameConfig::symmetric(2, ChannelLaw::equiprobable(vec![2.0], vec![0.2]), 1.0, 1.0);
    let rep = price_of_anarchy(&cfg, 0).unwrap();
    let solo = 3f64.log2() - 1.2f64.log2();
    assert!((rep.sum_rate_be - 1.02914).abs() < 1e-4);
    assert!(
        (rep.sum_rate_opt - solo).abs() < 1e-6,
        "{}",
        rep.sum_rate_opt
    );
    assert!((rep.poa - rep.sum_rate_be / solo).abs() < 1e-6);
    assert!(rep.poa <= 1.0);
}

#[test]
fn be_welfare_below_central() {
    let cfg = canonical();
    let trace = run_algorithm1(&cfg, None, Schedule::Sequential).unwrap();
    let central = solve_social_optimum(&cfg, 3, 2).unwrap();
    assert!(social_welfare(&cfg, trace.final_profile()) <= central.sum_rate + 1e-9);
}
