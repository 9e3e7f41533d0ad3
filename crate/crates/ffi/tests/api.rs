use std::ffi::{CStr, CString};
use std::ptr;

use gelfand_ffi::*;

fn disk() -> *mut GelfandGreen {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { gelfand_green_new_disk(&mut h) }, GelfandStatus::Ok);
    assert!(!h.is_null());
    h
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(gelfand_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn green_matches_disk_formula() {
    let h = disk();
    let (x, y) = ([0.3, -0.2], [-0.1, 0.5]);
    let mut g = 0.0;
    assert_eq!(unsafe { gelfand_green_eval(h, x[0], x[1], y[0], y[1], &mut g) }, GelfandStatus::Ok);
    let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
    // |x|·|y − x/|x|²| for the image charge
    let nx2 = x[0] * x[0] + x[1] * x[1];
    let img = ((y[0] * nx2 - x[0]).powi(2) + (y[1] * nx2 - x[1]).powi(2)).sqrt() / nx2.sqrt();
    let exact = (img / d).ln() / (2.0 * std::f64::consts::PI);
    assert!((g - exact).abs() < 1e-12, "{g} vs {exact}");
    unsafe { gelfand_green_free(h) };
}

#[test]
fn robin_outputs_are_optional() {
    let h = disk();
    let (mut r, mut grad, mut hess) = (0.0, [0.0; 2], [0.0; 4]);
    let s = unsafe { gelfand_robin(h, 0.4, 0.0, &mut r, grad.as_mut_ptr(), hess.as_mut_ptr()) };
    assert_eq!(s, GelfandStatus::Ok);
    // R(x) = log(1 − |x|²)/(2π) on the disk
    let two_pi = 2.0 * std::f64::consts::PI;
    assert!((r - (1.0f64 - 0.16).ln() / two_pi).abs() < 1e-12);
    assert!((grad[0] + 2.0 * 0.4 / (0.84 * two_pi)).abs() < 1e-6);
    assert!(grad[1].abs() < 1e-9 && (hess[1] - hess[2]).abs() < 1e-6);
    unsafe { gelfand_green_free(h) };
}

#[test]
fn errors_map_to_status_codes() {
    let h = disk();
    let mut v = 0.0;
    assert_eq!(unsafe { gelfand_green_eval(h, 2.0, 0.0, 0.1, 0.0, &mut v) }, GelfandStatus::OutsideDomain);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { gelfand_green_eval(h, 0.1, 0.0, 0.1, 0.0, &mut v) }, GelfandStatus::CoincidentPoints);
    assert_eq!(unsafe { gelfand_green_eval(h, 0.1, 0.0, 0.2, 0.0, ptr::null_mut()) }, GelfandStatus::NullPointer);
    let pts = [0.1, 0.0];
    assert_eq!(unsafe { gelfand_hamiltonian(h, pts.as_ptr(), 0, &mut v, ptr::null_mut()) }, GelfandStatus::InvalidArgument);
    unsafe { gelfand_green_free(h) };
    unsafe { gelfand_green_free(ptr::null_mut()) };
}

#[test]
fn missing_mesh_file_is_io() {
    let path = CString::new("/nonexistent/domain.mesh").unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { gelfand_green_new_mesh(path.as_ptr(), &mut h) }, GelfandStatus::Io);
    assert!(h.is_null());
}

#[test]
fn hamiltonian_gradient_is_antisymmetric_for_a_symmetric_pair() {
    let h = disk();
    let pts = [0.3, 0.0, -0.3, 0.0];
    let (mut v, mut g) = (0.0, [1.0; 4]);
    assert_eq!(unsafe { gelfand_hamiltonian(h, pts.as_ptr(), 2, &mut v, g.as_mut_ptr()) }, GelfandStatus::Ok);
    assert!(v.is_finite());
    // the pair is symmetric, so the gradients are opposite
    assert!((g[0] + g[2]).abs() < 1e-9 && g[1].abs() < 1e-9 && g[3].abs() < 1e-9);
    unsafe { gelfand_green_free(h) };
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/gelfand.h")).unwrap();
    for name in ["gelfand_green_new_disk", "gelfand_green_free", "gelfand_robin", "gelfand_last_error", "GELFAND_STATUS_OK"] {
        assert!(header.contains(name), "{name} missing from header");
    }
    let v = unsafe { CStr::from_ptr(gelfand_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
