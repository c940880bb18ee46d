//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if any of them fails.

use std::time::{Duration, Instant};

use hybrid_servo::force::{assemble_newton, build_kkt, maximize_guard_margin, solve_force, ForceSolverConfig};
use hybrid_servo::linalg::{Matrix, Vector, DEFAULT_RANK_TOL};
use hybrid_servo::random::{gaussian_vector, random_feasible_instance, random_force_problem};
use hybrid_servo::run::{median, run_scenario, StepRecord, Timing};
use hybrid_servo::scenario::{ScenarioFile, SolverParams, SolverSettings};
use hybrid_servo::tilting::{build_instance, hand_to_axis, planned_hand_velocity, TiltingScenario};
use hybrid_servo::velocity::{solve_velocity, VelocitySolverConfig};
use hybrid_servo::verify::{
    brute_force_force_oracle, check_forces, check_velocity_command, check_velocity_solution, min_norm_projection_oracle,
};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

struct TiltingRuns {
    runs: Vec<(u64, Vec<StepRecord>)>,
    timings: Vec<Timing>,
    elapsed: Duration,
    errors: Vec<String>,
}

fn tilting_runs() -> TiltingRuns {
    let scenario = TiltingScenario::default();
    let start = Instant::now();
    let mut out = TiltingRuns {
        runs: Vec::new(),
        timings: Vec::new(),
        elapsed: Duration::ZERO,
        errors: Vec::new(),
    };
    for seed in 0..10 {
        let params = SolverParams {
            rng_seed: Some(seed),
            ..Default::default()
        };
        let settings = SolverSettings::from_params(&params).unwrap();
        let file = ScenarioFile::block_tilting(&scenario, &settings);
        match run_scenario(&file, &settings, true) {
            Ok((output, timings)) => {
                out.runs.push((seed, output.steps));
                out.timings.extend(timings);
            }
            Err((_, _, failure)) => out.errors.push(format!("seed {seed}: {failure}")),
        }
    }
    out.elapsed = start.elapsed();
    out
}

fn structure(t: &TiltingRuns) -> Outcome {
    let steps: Vec<&StepRecord> = t.runs.iter().flat_map(|(_, s)| s).collect();
    let ones = steps.iter().filter(|s| s.action.n_av == 1).count();
    let passed = t.errors.is_empty() && steps.len() == 150 && ones == 150 && t.elapsed.as_secs_f64() < 10.0;
    outcome(
        passed,
        format!(
            "n_av = 1 on {ones}/150 steps in {:.2} s {:?}",
            t.elapsed.as_secs_f64(),
            t.errors
        ),
    )
}

fn direction(t: &TiltingRuns) -> Outcome {
    let scenario = TiltingScenario::default();
    let states = scenario.rollout();
    let mut min_arc = f64::INFINITY;
    let mut max_cos = 0.0f64;
    let mut count = 0;
    for (_, steps) in &t.runs {
        for rec in steps {
            let state = &states[rec.step - 1];
            let row = &rec.action.velocity_command[0];
            let cmd = Vector3::new(row[6], row[7], row[8]).normalize();
            min_arc = min_arc.min(cmd.dot(&planned_hand_velocity(state, &scenario).normalize()));
            max_cos = max_cos.max(cmd.dot(&hand_to_axis(state, &scenario)).abs());
            count += 1;
        }
    }
    outcome(
        count == 150 && min_arc > 0.0 && max_cos <= 0.2,
        format!("min cos to planned arc {min_arc:.3e}, max |cos| to hand-axis line {max_cos:.3e}"),
    )
}

fn force_structure(t: &TiltingRuns) -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (_, steps) in &t.runs {
        for rec in steps {
            let f = &rec.action.actuated_force;
            let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
            worst = worst.max(f[1].abs() / norm);
            count += 1;
        }
    }
    outcome(count == 150 && worst <= 0.1, format!("max |f_y| / ‖f‖ = {worst:.3e}"))
}

fn subspace_suite() -> Outcome {
    let start = Instant::now();
    let mut counts = [0usize; 2];
    let mut unscreened = [0usize; 2];
    for i in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
        let n = rng.random_range(4..=12);
        let inst = random_feasible_instance(&mut rng, n);
        for (slot, starts) in [3, 20].into_iter().enumerate() {
            for screen in [true, false] {
                let cfg = VelocitySolverConfig {
                    num_starts: starts,
                    rank_screen: screen,
                    ..Default::default()
                };
                let ok = solve_velocity(&inst, &cfg).is_ok_and(|sol| check_velocity_solution(&inst, &sol).passed);
                if ok {
                    if screen {
                        counts[slot] += 1;
                    } else {
                        unscreened[slot] += 1;
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        counts[0] >= 198 && counts[1] == 200 && secs < 60.0,
        format!(
            "N_s=3 {}/200, N_s=20 {}/200 in {secs:.2} s (without rank screen: {}/200, {}/200)",
            counts[0], counts[1], unscreened[0], unscreened[1]
        ),
    )
}

fn kkt_oracle() -> Outcome {
    let mut matched = 0;
    let mut worst = 0.0f64;
    let mut max_free = 0;
    for i in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + i);
        let p = random_force_problem(&mut rng, (i % 3) as usize).unwrap();
        let asm = assemble_newton(&p.instance, &p.guard, &p.transform, p.n_av).unwrap();
        max_free = max_free.max(asm.m_free.ncols());
        let eta_af = gaussian_vector(&mut rng, asm.n_af) * 10.0;
        let Ok((f_free, _)) = build_kkt(&asm).solve(&eta_af) else {
            continue;
        };
        let oracle = min_norm_projection_oracle(&asm.m_free, &(&asm.rhs - &asm.m_eta_f * &eta_af));
        let err = (f_free - oracle).amax();
        worst = worst.max(err);
        if err <= 1e-7 {
            matched += 1;
        }
    }
    outcome(
        matched == 200 && max_free <= 12,
        format!("{matched}/200 within 1e-7 (worst {worst:.2e}, up to {max_free} free forces)"),
    )
}

fn lp_vs_grid() -> Outcome {
    let cfg = ForceSolverConfig::default();
    let mut good = 0;
    let mut worst_gap = f64::NEG_INFINITY;
    for i in 0..50u64 {
        let p = random_force_problem(&mut ChaCha8Rng::seed_from_u64(5000 + i), 1 + (i % 2) as usize).unwrap();
        let lp = maximize_guard_margin(&p.instance, &p.guard, &p.transform, p.n_av, &cfg);
        let grid = brute_force_force_oracle(&p.instance, &p.guard, &p.transform, p.n_av, cfg.f_max, 0.25);
        if let (Ok(lp), Ok(grid)) = (lp, grid) {
            let gap = grid.best_margin - lp.objective_margin;
            worst_gap = worst_gap.max(gap);
            if gap <= 0.05 {
                good += 1;
            }
        }
    }
    outcome(good == 50, format!("{good}/50, worst grid − LP {worst_gap:.3e} N"))
}

fn residuals(t: &TiltingRuns) -> Outcome {
    let mut worst_residual = 0.0f64;
    let mut min_margin = f64::INFINITY;
    let mut verified = 0;
    for (_, steps) in &t.runs {
        for rec in steps {
            let report = rec.verification.as_ref().expect("runs are verified");
            worst_residual = worst_residual.max(report.newton_residual);
            min_margin = report.guard_margins.iter().copied().fold(min_margin, f64::min);
            verified += usize::from(report.passed);
        }
    }
    outcome(
        verified == 150 && worst_residual <= 1e-6 && min_margin >= 0.0,
        format!("max Newton residual {worst_residual:.2e}, min guard margin {min_margin:.3}, {verified}/150 verified"),
    )
}

fn timing(t: &TiltingRuns) -> Outcome {
    let totals: Vec<f64> = t.timings.iter().map(Timing::total_ms).collect();
    let worst = totals.iter().copied().fold(0.0, f64::max);
    outcome(
        !totals.is_empty() && worst <= 350.0,
        format!("median {:.1} ms, max {worst:.1} ms per step", median(&totals)),
    )
}

fn sabotage() -> Outcome {
    let scenario = TiltingScenario::default();
    let states = scenario.rollout();
    let cfg = ForceSolverConfig::default();
    let mut caught = 0;
    let mut total = 0;
    for k in [0, 7, 14] {
        let (inst, guard) = build_instance(&states[k], &scenario).unwrap();
        let v = solve_velocity(&inst, &VelocitySolverConfig::default()).unwrap();
        let f = solve_force(&inst, &guard, &v.transform, v.n_av, &cfg).unwrap();

        let mut zeroed = v.c.clone();
        zeroed.row_mut(0).fill(0.0);
        let mut tilted = v.c.clone();
        tilted[(0, 8)] += 0.3;
        let velocity_cases: [(Matrix, Vector); 3] = [
            (zeroed, v.b_c.clone()),
            (tilted, v.b_c.clone()),
            (v.c.clone(), &v.b_c * 2.0 + Vector::from_element(1, 0.1)),
        ];
        for (c, w) in velocity_cases {
            total += 1;
            caught += usize::from(!check_velocity_command(&inst, &c, &w, DEFAULT_RANK_TOL).passed);
        }

        let mut lambda = f.lambda.clone();
        lambda[5] += 1.0;
        let mut eta = f.eta.clone();
        eta[0] += 1.0;
        let mut pushed = f.eta.clone();
        pushed[6] += 5.0;
        let mut slipping = f.lambda.clone();
        slipping[3] += 10.0;
        let force_cases = [
            (lambda, f.eta.clone()),
            (f.lambda.clone(), eta),
            (f.lambda.clone(), pushed),
            (slipping, f.eta.clone()),
        ];
        for (l, e) in force_cases {
            total += 1;
            caught += usize::from(!check_forces(&inst, &guard, &v.transform, &l, &e).passed);
        }
    }
    outcome(caught == total, format!("{caught}/{total} corrupted solutions rejected"))
}

fn main() {
    let t = tilting_runs();
    let results = [
        ("1 block-tilting structure", structure(&t)),
        ("2 velocity direction", direction(&t)),
        ("3 force structure", force_structure(&t)),
        ("4 subspace equality suite", subspace_suite()),
        ("5 KKT vs projection oracle", kkt_oracle()),
        ("6 LP vs grid", lp_vs_grid()),
        ("7 Newton and guard residuals", residuals(&t)),
        ("8 per-step timing", timing(&t)),
        ("9 sabotaged solutions fail", sabotage()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("criterion {name}: {} ({})", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
