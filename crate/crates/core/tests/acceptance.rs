//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{
    canonical, fd_gradient, fd_jacobian, interior_degraded_profiles, reference_configs, relative_error,
    rng,
};
use wiretap_game::best_response::solve_best_response;
use wiretap_game::centralized::solve_social_optimum;
use wiretap_game::equilibrium::{run_algorithm1, uniqueness_probe, verify_equilibrium, Schedule};
use wiretap_game::experiments::{price_of_anarchy, run_sweep, Mode, SweepSpec};
use wiretap_game::oracle::{
    grid_best_response, grid_social_optimum, lipschitz_bound, BudgetMode, GridSpec,
};
use wiretap_game::rates::{concavity_certificate, utility_gradient, utility_jacobian};
use wiretap_game::StrategyProfile;

type Check = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Check);

fn fmt_err(e: wiretap_game::Error) -> String {
    e.to_string()
}

fn kkt_exactness() -> Check {
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (cfg, profile) = common::random_degraded_instance(&mut r);
        for user in 0..2 {
            let sol = solve_best_response(&cfg, &profile, user).map_err(fmt_err)?;
            worst = worst.max(sol.residuals.max());
        }
    }
    Ok((
        worst <= 1e-8,
        format!("worst KKT residual {worst:.3e} (limit 1e-8) over 50 instances"),
    ))
}

fn oracle_equivalence() -> Check {
    let base = canonical();
    let grid = GridSpec::new(0.01, BudgetMode::Equality);
    let mut ok = true;
    let mut notes = Vec::new();
    for snr in [1.0, 5.0] {
        let cfg = base.at_snr(snr);
        let opp = StrategyProfile::uniform(&cfg);
        for user in 0..2 {
            let sol = solve_best_response(&cfg, &opp, user).map_err(fmt_err)?;
            let (gp, gu) = grid_best_response(&cfg, &opp, user, &grid).map_err(fmt_err)?;
            let step = grid.step * cfg.users[user].avg_power;
            let coord = sol.policy.max_abs_diff(&gp);
            let bound = lipschitz_bound(&cfg, &opp, user, &grid).map_err(fmt_err)?;
            let gap = sol.achieved_utility - gu;
            let pass = coord <= step + 1e-9 && gap >= -1e-9 && gap <= bound;
            ok &= pass;
            notes.push(format!(
                "snr {snr} user {user}: coord diff {coord:.2e} (step {step}), utility gap {gap:.2e} (bound {bound:.2e})"
            ));
        }
        // the social grid allows unspent budget (silent users); the change
        // between steps 0.2 and 0.1 measures the grid effect
        let (_, coarse) = grid_social_optimum(&cfg, &GridSpec::new(0.2, BudgetMode::Inequality))
            .map_err(fmt_err)?;
        let (_, fine) = grid_social_optimum(&cfg, &GridSpec::new(0.1, BudgetMode::Inequality))
            .map_err(fmt_err)?;
        let central = solve_social_optimum(&cfg, 5, 7).map_err(fmt_err)?;
        let tol = (fine - coarse).abs().max(1e-3);
        let diff = central.sum_rate - fine;
        let pass = diff.abs() <= tol;
        ok &= pass;
        notes.push(format!(
            "snr {snr} social: central {:.6} grid {fine:.6} diff {diff:.2e} (tol {tol:.1e})",
            central.sum_rate
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn equilibrium_fixed_point() -> Check {
    let base = canonical();
    let mut ok = true;
    let mut notes = Vec::new();
    for snr in [1.0, 5.0] {
        let cfg = base.at_snr(snr);
        let trace = run_algorithm1(&cfg, None, Schedule::Sequential).map_err(fmt_err)?;
        let rep = verify_equilibrium(&cfg, trace.final_profile()).map_err(fmt_err)?;
        let budget = trace
            .final_profile()
            .policies
            .iter()
            .zip(&cfg.users)
            .map(|(p, u)| (p.expected_power(&u.law) - u.avg_power).abs())
            .fold(0.0, f64::max);
        let pass = trace.converged
            && trace.iterations_to_converge <= 10_000
            && rep.be_deviation_gap <= 1e-6
            && budget <= 1e-8;
        ok &= pass;
        notes.push(format!(
            "snr {snr}: converged {} in {} iterations, gap {:.2e}, budget error {budget:.2e}",
            trace.converged, trace.iterations_to_converge, rep.be_deviation_gap
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn uniqueness() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, cfg) in reference_configs() {
        let rep = uniqueness_probe(&cfg, 10, 2024).map_err(fmt_err)?;
        let pass = rep.non_converged.is_empty() && rep.max_distance <= 1e-4;
        ok &= pass;
        notes.push(format!(
            "{name}: max distance {:.2e}, {} non-converged",
            rep.max_distance,
            rep.non_converged.len()
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn diagonal_concavity() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, cfg) in reference_configs() {
        let cert = concavity_certificate(&cfg, 100, 2024);
        let pass = cert.sample_count == 100 && cert.max_eigenvalue < 0.0;
        ok &= pass;
        notes.push(format!(
            "{name}: max eigenvalue of J+J^T {:.4e} over {} samples",
            cert.max_eigenvalue, cert.sample_count
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn derivatives() -> Check {
    let mut worst_grad: f64 = 0.0;
    let mut worst_jac: f64 = 0.0;
    for (_, cfg) in reference_configs() {
        for p in interior_degraded_profiles(&cfg, 20, 606, 1e-2) {
            for user in 0..2 {
                let g = utility_gradient(&cfg, &p, user).map_err(fmt_err)?;
                let l = cfg.users[user].law.num_states();
                let analytic: Vec<f64> = (0..l * l).map(|t| g[(t / l, t % l)]).collect();
                worst_grad =
                    worst_grad.max(relative_error(&fd_gradient(&cfg, &p, user), &analytic));
            }
            let jac = utility_jacobian(&cfg, &p, 1.0).map_err(fmt_err)?;
            let fd = fd_jacobian(&cfg, &p);
            let n = fd.len();
            let analytic: Vec<f64> = (0..n * n).map(|e| jac[(e / n, e % n)]).collect();
            let numeric: Vec<f64> = fd.concat();
            worst_jac = worst_jac.max(relative_error(&numeric, &analytic));
        }
    }
    Ok((
        worst_grad < 1e-5 && worst_jac < 1e-4,
        format!(
            "gradient rel err {worst_grad:.2e} (<1e-5), Jacobian rel err {worst_jac:.2e} (<1e-4)"
        ),
    ))
}

fn efficiency_ordering() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, cfg) in reference_configs() {
        let mut poas = Vec::new();
        let mut worst_central: f64 = f64::INFINITY;
        let mut worst_uniform: f64 = f64::INFINITY;
        for snr in 1..=10 {
            let rep = price_of_anarchy(&cfg.at_snr(snr as f64), 0).map_err(fmt_err)?;
            worst_central = worst_central.min(rep.sum_rate_opt - rep.sum_rate_be);
            worst_uniform = worst_uniform.min(rep.sum_rate_be - rep.sum_rate_uniform);
            ok &= rep.converged && rep.poa > 0.0 && rep.poa <= 1.0 + 1e-9;
            poas.push(rep.poa);
        }
        ok &= worst_central >= -1e-6 && worst_uniform >= 0.0 && poas[9] < poas[0];
        notes.push(format!(
            "{name}: min central-bayesian {worst_central:.2e}, min bayesian-uniform {worst_uniform:.3e}, poa(1) {:.4} poa(10) {:.4}",
            poas[0], poas[9]
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn convergence_slowdown() -> Check {
    let cfg = canonical();
    let one = run_algorithm1(&cfg.at_snr(1.0), None, Schedule::Sequential).map_err(fmt_err)?;
    let five = run_algorithm1(&cfg.at_snr(5.0), None, Schedule::Sequential).map_err(fmt_err)?;
    Ok((
        one.converged
            && five.converged
            && five.iterations_to_converge >= one.iterations_to_converge,
        format!(
            "iterations at snr 1: {}, at snr 5: {}",
            one.iterations_to_converge, five.iterations_to_converge
        ),
    ))
}

fn sca_soundness() -> Check {
    let mut worst_drop: f64 = 0.0;
    let mut worst_excess: f64 = f64::NEG_INFINITY;
    let mut steps = 0;
    for (_, cfg) in reference_configs() {
        for snr in [1.0, 5.0, 10.0] {
            let sol = solve_social_optimum(&cfg.at_snr(snr), 5, 3).map_err(fmt_err)?;
            for w in sol.history.windows(2) {
                worst_drop = worst_drop.max(w[0].sum_rate - w[1].sum_rate);
            }
            for s in &sol.history {
                worst_excess = worst_excess.max(s.bound_value - s.sum_rate);
            }
            steps += sol.history.len();
        }
    }
    Ok((
        worst_drop <= 1e-9 && worst_excess <= 1e-9,
        format!("{steps} steps: largest sum-rate drop {worst_drop:.2e}, largest bound excess {worst_excess:.2e}"),
    ))
}

fn determinism() -> Check {
    let cfg = canonical();
    let spec = SweepSpec::new(
        vec![1.0, 2.0, 3.0],
        vec![Mode::Uniform, Mode::Bayesian, Mode::Central],
        42,
    )
    .map_err(fmt_err)?;
    let a = run_sweep(&cfg, &spec).map_err(fmt_err)?;
    let b = run_sweep(&cfg, &spec).map_err(fmt_err)?;
    Ok((
        a.csv.as_bytes() == b.csv.as_bytes(),
        format!("{} bytes per run", a.csv.len()),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("KKT exactness", kkt_exactness),
        ("oracle equivalence", oracle_equivalence),
        ("equilibrium fixed point", equilibrium_fixed_point),
        ("uniqueness", uniqueness),
        ("diagonal concavity", diagonal_concavity),
        ("derivative correctness", derivatives),
        ("efficiency ordering", efficiency_ordering),
        ("convergence slowdown", convergence_slowdown),
        ("successive bound soundness", sca_soundness),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {} ({name}): {} | {detail} [{:.1}s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
