use std::f64::consts::PI;

use hybrid_servo::force::{solve_force, ForceSolverConfig};
use hybrid_servo::linalg::{min_norm_solution, vstack, vstack_vec, Vector};
use hybrid_servo::tilting::{advance_state, build_instance, guard_conditions, ridge, TiltingScenario};
use hybrid_servo::velocity::{solve_velocity, VelocitySolverConfig};
use hybrid_servo::verify::brute_force_force_oracle;
use hybrid_servo::Error;
use nalgebra::{UnitQuaternion, Vector3};

#[test]
fn roll_out_turns_ninety_degrees() {
    let s = TiltingScenario::default();
    let mut state = s.initial_state();
    for _ in 0..s.num_steps {
        state = advance_state(&state, &s, s.step_duration);
    }
    let q = state.object.quat;
    let turned = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
    let expected = UnitQuaternion::from_scaled_axis(Vector3::y() * (PI / 2.0));
    assert!(turned.angle_to(&expected) < 1e-12);
    // The cube ends up lying on its +x face.
    let a = s.edge_length;
    assert!((state.object.position - Vector3::new(a, 0.0, a / 2.0)).amax() < 1e-12);
}

#[test]
fn planned_motion_is_executable_at_every_step() {
    let s = TiltingScenario::default();
    for state in s.rollout() {
        let (inst, _) = build_instance(&state, &s).unwrap();
        let stacked = vstack(&inst.holonomic, &inst.goal);
        let rhs = vstack_vec(&Vector::zeros(inst.n_phi()), &inst.goal_rhs);
        assert!(min_norm_solution(&stacked, &rhs).is_ok());
    }
}

/// Stacked `[λ; f]` with only the first table contact loaded.
fn table_load(tangent: Vector3<f64>, normal: f64) -> Vector {
    let mut x = Vector::zeros(18);
    x.rows_mut(3, 3).copy_from(&(tangent + Vector3::z() * normal));
    x
}

#[test]
fn cone_rows_reject_excess_friction_along_a_ridge() {
    let s = TiltingScenario::default();
    let guard = guard_conditions(&s.initial_state(), &s);
    let cone = |x: &Vector| guard.margins(x).rows(8, 8).min();
    for i in 1..=8 {
        assert!(cone(&table_load(ridge(i) * 1.01 * s.mu_table, 1.0)) < 0.0);
        assert!(cone(&table_load(ridge(i) * 0.99 * s.mu_table, 1.0)) > 0.0);
    }
}

#[test]
fn cone_rows_bound_the_coulomb_cone_from_outside() {
    // Between two ridges the rows admit up to μ / cos(π/8).
    let s = TiltingScenario::default();
    let guard = guard_conditions(&s.initial_state(), &s);
    let cone = |x: &Vector| guard.margins(x).rows(8, 8).min();
    let between = (ridge(1) + ridge(2)).normalize();
    let limit = s.mu_table / (PI / 8.0).cos();
    assert!(cone(&table_load(between * 1.01 * s.mu_table, 1.0)) > 0.0);
    assert!(cone(&table_load(between * 0.999 * limit, 1.0)) > 0.0);
    assert!(cone(&table_load(between * 1.001 * limit, 1.0)) < 0.0);
}

#[test]
fn frictionless_table_cannot_hold_the_cube() {
    let s = TiltingScenario {
        mu_table: 0.0,
        ..Default::default()
    };
    let (inst, guard) = build_instance(&s.initial_state(), &s).unwrap();
    let vel = solve_velocity(&inst, &VelocitySolverConfig::default()).unwrap();
    let cfg = ForceSolverConfig::default();
    let err = solve_force(&inst, &guard, &vel.transform, vel.n_av, &cfg).unwrap_err();
    assert!(matches!(err, Error::InfeasibleLp { .. }));
    let grid = brute_force_force_oracle(&inst, &guard, &vel.transform, vel.n_av, cfg.f_max, 0.25).unwrap();
    assert!(grid.best_margin < 0.0);
}

#[test]
fn low_table_friction_fails_where_the_pivot_slides() {
    // With μ = 0.3 the contacts can only stick for the middle of the motion.
    let s = TiltingScenario {
        mu_table: 0.3,
        ..Default::default()
    };
    let feasible: Vec<bool> = s
        .rollout()
        .iter()
        .map(|state| {
            let (inst, guard) = build_instance(state, &s).unwrap();
            let vel = solve_velocity(&inst, &VelocitySolverConfig::default()).unwrap();
            solve_force(&inst, &guard, &vel.transform, vel.n_av, &ForceSolverConfig::default()).is_ok()
        })
        .collect();
    assert!(!feasible[0]);
    assert!(feasible[5]);
    assert!(!feasible[14]);
}

#[test]
fn best_of_three_matches_best_of_fifty() {
    let s = TiltingScenario::default();
    let (inst, _) = build_instance(&s.rollout()[4], &s).unwrap();
    let three = solve_velocity(&inst, &VelocitySolverConfig::default()).unwrap();
    let fifty = solve_velocity(
        &inst,
        &VelocitySolverConfig {
            num_starts: 50,
            ..Default::default()
        },
    )
    .unwrap();
    assert!((three.cost - fifty.cost).abs() < 1e-6);
}

#[test]
fn table_forces_carry_the_weight_at_rest() {
    // At the first step the vertical forces balance the weight and the push.
    let s = TiltingScenario::default();
    let (inst, guard) = build_instance(&s.initial_state(), &s).unwrap();
    let vel = solve_velocity(&inst, &VelocitySolverConfig::default()).unwrap();
    let sol = solve_force(&inst, &guard, &vel.transform, vel.n_av, &ForceSolverConfig::default()).unwrap();
    let on_object_from_hand = -sol.lambda.rows(0, 3).into_owned();
    let table_z = sol.lambda[5] + sol.lambda[8];
    assert!((table_z + on_object_from_hand[2] + s.gravity_object.z).abs() < 1e-9);
}
