//! Lifecycle and contract tests for the C ABI, driven from Rust through the
//! same `extern "C"` entry points a C caller would use.

use std::ffi::CStr;
use std::ptr;

use netfault_ffi::*;

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(nf_last_error_message())
            .to_string_lossy()
            .into_owned()
    }
}

/// Three-node chain with one integrator state per node.
fn chain3() -> *mut NfPlant {
    let tails = [2usize, 3];
    let heads = [1usize, 2];
    let mut plant: *mut NfPlant = ptr::null_mut();
    let status = unsafe {
        nf_plant_new_integrator(3, tails.as_ptr(), heads.as_ptr(), 2, 1, &mut plant)
    };
    assert_eq!(status, NfStatus::NfStatusOk, "{}", last_error());
    assert!(!plant.is_null());
    plant
}

#[test]
fn plant_lifecycle_and_dimensions() {
    let plant = chain3();
    unsafe {
        assert_eq!(nf_plant_node_count(plant), 3);
        assert_eq!(nf_plant_state_dim(plant), 3);
        // The integrator preset is autonomous: no input channels.
        assert_eq!(nf_plant_input_dim(plant), 0);
        assert_eq!(nf_plant_measurement_dim(plant, 0), 2);
        assert_eq!(nf_plant_measurement_dim(plant, 1), 3);
        nf_plant_free(plant);
        // Null is a documented no-op for both free functions.
        nf_plant_free(ptr::null_mut());
        nf_estimator_free(ptr::null_mut());
        // Null-handle queries degrade to zero rather than crashing.
        assert_eq!(nf_plant_state_dim(ptr::null()), 0);
    }
}

#[test]
fn plant_rejects_bad_graphs() {
    let tails = [1usize];
    let heads = [5usize]; // node out of range
    let mut plant: *mut NfPlant = ptr::null_mut();
    let status = unsafe {
        nf_plant_new_integrator(3, tails.as_ptr(), heads.as_ptr(), 1, 1, &mut plant)
    };
    assert_eq!(status, NfStatus::NfStatusInvalidArgument);
    assert!(plant.is_null());
    assert!(!last_error().is_empty());

    let status = unsafe {
        nf_plant_new_integrator(3, tails.as_ptr(), heads.as_ptr(), 1, 0, &mut plant)
    };
    assert_eq!(status, NfStatus::NfStatusInvalidArgument);

    let status = unsafe { nf_plant_new_integrator(3, ptr::null(), ptr::null(), 1, 1, &mut plant) };
    assert_eq!(status, NfStatus::NfStatusNullArgument);
}

#[test]
fn estimator_recovers_a_single_fault() {
    let plant = chain3();
    unsafe {
        let mut est: *mut NfEstimator = ptr::null_mut();
        assert_eq!(nf_estimator_new_l1(plant, &mut est), NfStatus::NfStatusOk);

        // Exact carried estimate, then one faulty step: x = x_prev + f.
        let x_prev = [2.0, 4.0, 6.0];
        assert_eq!(
            nf_estimator_set_state(est, x_prev.as_ptr(), 3),
            NfStatus::NfStatusOk
        );
        let mut echo = [0.0; 3];
        assert_eq!(
            nf_estimator_state(est, echo.as_mut_ptr(), 3),
            NfStatus::NfStatusOk
        );
        assert_eq!(echo, x_prev);

        let fault = [0.0, -3.0, 0.0];
        let x: Vec<f64> = x_prev.iter().zip(&fault).map(|(a, b)| a + b).collect();
        let mut y = [0.0; 2];
        assert_eq!(
            nf_plant_measure(plant, x.as_ptr(), 3, 0, y.as_mut_ptr()),
            NfStatus::NfStatusOk
        );

        let mut x_hat = [0.0; 3];
        let mut f_hat = [0.0; 3];
        let status = nf_estimator_step(
            est,
            y.as_ptr(),
            2,
            ptr::null(),
            0,
            0,
            x_hat.as_mut_ptr(),
            f_hat.as_mut_ptr(),
        );
        assert_eq!(status, NfStatus::NfStatusOk, "{}", last_error());
        for i in 0..3 {
            assert!((x_hat[i] - x[i]).abs() < 1e-6, "x_hat = {x_hat:?}");
            assert!((f_hat[i] - fault[i]).abs() < 1e-6, "f_hat = {f_hat:?}");
        }

        nf_estimator_free(est);
        nf_plant_free(plant);
    }
}

#[test]
fn estimator_reports_dimension_errors() {
    let plant = chain3();
    unsafe {
        let mut est: *mut NfEstimator = ptr::null_mut();
        assert_eq!(
            nf_estimator_new_l1_denoise(plant, 0.05, &mut est),
            NfStatus::NfStatusOk
        );

        let y = [0.0; 3]; // wrong length for the relative-only mode
        let mut x_hat = [0.0; 3];
        let status = nf_estimator_step(
            est,
            y.as_ptr(),
            3,
            ptr::null(),
            0,
            0,
            x_hat.as_mut_ptr(),
            ptr::null_mut(),
        );
        assert_eq!(status, NfStatus::NfStatusDimensionMismatch);
        assert!(last_error().contains("expected 2"), "{}", last_error());

        assert_eq!(
            nf_estimator_set_state(est, y.as_ptr(), 2),
            NfStatus::NfStatusDimensionMismatch
        );
        assert_eq!(
            nf_estimator_step(
                ptr::null_mut(),
                y.as_ptr(),
                3,
                ptr::null(),
                0,
                0,
                x_hat.as_mut_ptr(),
                ptr::null_mut(),
            ),
            NfStatus::NfStatusNullArgument
        );

        // Invalid covariance scales are rejected at construction.
        let mut bad: *mut NfEstimator = ptr::null_mut();
        assert_eq!(
            nf_estimator_new_kalman(plant, 0.0, 1e-4, &mut bad),
            NfStatus::NfStatusInvalidArgument
        );
        assert!(bad.is_null());

        nf_estimator_free(est);
        nf_plant_free(plant);
    }
}

#[test]
fn recovery_check_follows_the_half_rule() {
    unsafe {
        let mut flag: i32 = -1;
        let one = [2usize];
        assert_eq!(
            nf_recovery_check(3, 1, one.as_ptr(), 1, 0, &mut flag),
            NfStatus::NfStatusOk
        );
        assert_eq!(flag, 1);

        let two = [1usize, 2];
        assert_eq!(
            nf_recovery_check(3, 1, two.as_ptr(), 2, 0, &mut flag),
            NfStatus::NfStatusOk
        );
        assert_eq!(flag, 0);
        // With the leader's absolute measurement, every support recovers.
        assert_eq!(
            nf_recovery_check(3, 1, two.as_ptr(), 2, 1, &mut flag),
            NfStatus::NfStatusOk
        );
        assert_eq!(flag, 1);

        let bad = [0usize];
        assert_eq!(
            nf_recovery_check(3, 1, bad.as_ptr(), 1, 0, &mut flag),
            NfStatus::NfStatusInvalidArgument
        );
    }
}

#[test]
fn fault_bound_matches_known_values() {
    unsafe {
        let mut bound = 0.0;
        let mut growth = 0.0;
        assert_eq!(
            nf_fault_error_bound(9, 4, 1.0, 1.0, &mut bound, &mut growth),
            NfStatus::NfStatusOk
        );
        assert_eq!(bound, 10.0);
        assert_eq!(growth, 11.0);

        assert_eq!(
            nf_fault_error_bound(4, 2, 1.0, 1.0, &mut bound, &mut growth),
            NfStatus::NfStatusInvalidArgument
        );
        assert!(!last_error().is_empty());
    }
}

#[test]
fn standalone_solver_matches_hand_instances() {
    unsafe {
        // min |z1| + |z2|  s.t.  z1 + z2 = 2  ->  objective 2.
        let a = [1.0, 1.0];
        let b = [2.0];
        let mut z = [0.0; 2];
        let mut objective = 0.0;
        let status = nf_solve_bp(
            1,
            2,
            a.as_ptr(),
            b.as_ptr(),
            ptr::null(),
            -1.0,
            z.as_mut_ptr(),
            &mut objective,
        );
        assert_eq!(status, NfStatus::NfStatusOk, "{}", last_error());
        assert!((objective - 2.0).abs() < 1e-6, "objective = {objective}");
        assert!((z[0] + z[1] - 2.0).abs() < 1e-6);

        // The ball large enough to contain the origin gives objective 0.
        let status = nf_solve_bp(
            1,
            2,
            a.as_ptr(),
            b.as_ptr(),
            ptr::null(),
            2.0,
            z.as_mut_ptr(),
            &mut objective,
        );
        assert_eq!(status, NfStatus::NfStatusOk);
        assert!(objective.abs() < 1e-6, "objective = {objective}");

        // Unsatisfiable equality rows surface as a numeric failure.
        let a_bad = [1.0, 1.0, 1.0, 1.0];
        let b_bad = [1.0, 2.0];
        let status = nf_solve_bp(
            2,
            2,
            a_bad.as_ptr(),
            b_bad.as_ptr(),
            ptr::null(),
            -1.0,
            z.as_mut_ptr(),
            ptr::null_mut(),
        );
        assert_eq!(status, NfStatus::NfStatusNumericFailure);
        assert!(!last_error().is_empty());
    }
}

#[test]
fn generated_header_covers_the_surface() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/netfault.h");
    let text = std::fs::read_to_string(header).expect("generated header");
    for symbol in [
        "NETFAULT_H",
        "NfStatus",
        "NfPlant",
        "NfEstimator",
        "nf_plant_new_integrator",
        "nf_plant_new_double_integrator",
        "nf_plant_measure",
        "nf_estimator_new_l1",
        "nf_estimator_step",
        "nf_recovery_check",
        "nf_fault_error_bound",
        "nf_solve_bp",
        "nf_last_error_message",
        "nf_version",
    ] {
        assert!(text.contains(symbol), "header lacks {symbol}");
    }
}
