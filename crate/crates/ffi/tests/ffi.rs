use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use exclasso_ffi::*;

fn modulo(p: usize, k: usize) -> *mut ExclPartition {
    let mut part = ptr::null_mut();
    assert_eq!(unsafe { excl_partition_modulo(p, k, &mut part) }, ExclStatus::Ok);
    part
}

#[test]
fn norms_and_status_codes() {
    let part = modulo(4, 2);
    let x = [1.0, -2.0, 3.0, 0.5];
    let (mut om, mut dn) = (0.0, 0.0);
    unsafe {
        assert_eq!(excl_partition_dim(part), 4);
        assert_eq!(excl_omega(part, x.as_ptr(), 4, &mut om), ExclStatus::Ok);
        assert_eq!(excl_omega_dual(part, x.as_ptr(), 4, &mut dn), ExclStatus::Ok);
        // Groups {0, 2} and {1, 3}.
        assert!((om - (16.0f64 + 6.25).sqrt()).abs() < 1e-15);
        assert!((dn - 13f64.sqrt()).abs() < 1e-15);
        assert_eq!(excl_omega(part, x.as_ptr(), 3, &mut om), ExclStatus::DimensionMismatch);
        assert_eq!(excl_omega(ptr::null(), x.as_ptr(), 4, &mut om), ExclStatus::NullPointer);
        assert_eq!(excl_omega(part, x.as_ptr(), 4, ptr::null_mut()), ExclStatus::NullPointer);
        excl_partition_free(part);
        excl_partition_free(ptr::null_mut());
        let msg = CStr::from_ptr(excl_status_message(ExclStatus::SolverFailure));
        assert_eq!(msg.to_str().unwrap(), "solver failure");
    }
}

#[test]
fn partition_from_labels() {
    let labels = [0usize, 1, 0, 2];
    let mut part = ptr::null_mut();
    let x = [1.0, 1.0, 1.0, 1.0];
    let mut om = 0.0;
    unsafe {
        assert_eq!(excl_partition_new(4, labels.as_ptr(), &mut part), ExclStatus::Ok);
        assert_eq!(excl_omega(part, x.as_ptr(), 4, &mut om), ExclStatus::Ok);
        assert!((om - 6f64.sqrt()).abs() < 1e-15);
        excl_partition_free(part);
        let gap = [0usize, 2];
        let mut bad = ptr::null_mut();
        assert_eq!(excl_partition_new(2, gap.as_ptr(), &mut bad), ExclStatus::InvalidArgument);
        assert!(bad.is_null());
        assert_eq!(excl_partition_modulo(3, 0, &mut bad), ExclStatus::InvalidArgument);
    }
}

#[test]
fn prox_moreau_split() {
    let part = modulo(6, 3);
    let x = [3.0, -1.0, 0.2, 2.0, 0.5, -4.0];
    let mut z = [0.0; 6];
    let mut q = [0.0; 6];
    let mut dn = 0.0;
    unsafe {
        assert_eq!(excl_prox(part, x.as_ptr(), 6, 1.0, z.as_mut_ptr(), q.as_mut_ptr()), ExclStatus::Ok);
        for i in 0..6 {
            assert_eq!(z[i] + q[i], x[i]);
        }
        assert_eq!(excl_omega_dual(part, q.as_ptr(), 6, &mut dn), ExclStatus::Ok);
        assert!(dn <= 1.0 + 1e-12);
        assert_eq!(excl_prox(part, x.as_ptr(), 6, 1.0, z.as_mut_ptr(), ptr::null_mut()), ExclStatus::Ok);
        assert_eq!(excl_prox(part, x.as_ptr(), 6, -1.0, z.as_mut_ptr(), ptr::null_mut()), ExclStatus::InvalidArgument);
        excl_partition_free(part);
    }
}

#[test]
fn solvers_through_handles() {
    // A = √3 I₃ so the loss is ½‖x − y/√3‖² up to a constant.
    let s = 3f64.sqrt();
    let a = [s, 0.0, 0.0, 0.0, s, 0.0, 0.0, 0.0, s];
    let y = [3.0 * s, -2.0 * s, 0.1 * s];
    let mut problem = ptr::null_mut();
    let part = modulo(3, 3);
    let mut x = [0.0; 3];
    let mut info = ExclSolveInfo { objective: 0.0, iterations: 0, duality_gap: 0.0, converged: false };
    unsafe {
        assert_eq!(excl_problem_new(3, 3, a.as_ptr(), y.as_ptr(), &mut problem), ExclStatus::Ok);
        // Singleton groups: Ω is the ℓ₂ norm, so the solution is a shrunk y/√3.
        assert_eq!(
            excl_fista_solve(problem, part, 0.5, 10_000, 1e-12, x.as_mut_ptr(), 3, &mut info),
            ExclStatus::Ok
        );
        assert!(info.converged && info.duality_gap >= 0.0 && info.duality_gap <= 1e-12);
        let r = (9.0f64 + 4.0 + 0.01).sqrt();
        let f = 1.0 - 0.5 / r;
        assert!((x[0] - 3.0 * f).abs() < 1e-6 && (x[1] + 2.0 * f).abs() < 1e-6);

        assert_eq!(
            excl_active_set_solve(problem, part, 0.5, 3, 1e-10, 0, x.as_mut_ptr(), 3, &mut info),
            ExclStatus::Ok
        );
        assert!(info.converged);
        // μ/2 ‖x‖² shrinks by 1/(1 + μ).
        assert!((x[0] - 2.0).abs() < 1e-6 && (x[1] + 4.0 / 3.0).abs() < 1e-6);

        assert_eq!(
            excl_fista_solve(problem, part, 0.5, 10, 1e-12, x.as_mut_ptr(), 2, &mut info),
            ExclStatus::DimensionMismatch
        );
        assert_eq!(
            excl_active_set_solve(problem, part, -1.0, 3, 1e-10, 0, x.as_mut_ptr(), 3, ptr::null_mut()),
            ExclStatus::InvalidArgument
        );
        excl_problem_free(problem);
        excl_partition_free(part);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/exclasso.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["excl_partition_new", "excl_prox", "excl_fista_solve", "excl_active_set_solve", "EXCL_STATUS_PANIC"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-std=c99", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler found, skipping syntax check");
        return;
    };
    assert!(status.success());
}
