//! C interface to the Green-function evaluator and the point Hamiltonian.
//!
//! Every function returns a [`GelfandStatus`]. On failure the message is kept
//! per thread and can be read with [`gelfand_last_error`]. Panics never cross
//! the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use gelfand::green::{Domain, GreenEvaluator};
use gelfand::hamiltonian::{h_grad, h_value, Configuration};
use gelfand::mesh::Mesh;
use gelfand::{Error, Point2};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GelfandStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutsideDomain = 3,
    CoincidentPoints = 4,
    Io = 5,
    Numerical = 6,
    Panic = 7,
}

/// Opaque Green-function evaluator.
pub struct GelfandGreen {
    inner: GreenEvaluator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GelfandStatus {
    match e {
        Error::OutsideDomain(_) => GelfandStatus::OutsideDomain,
        Error::CoincidentPoints(..) | Error::Collision(_) => GelfandStatus::CoincidentPoints,
        Error::Io(_) | Error::Json(_) | Error::Parse(_) | Error::InvalidMesh(_) => GelfandStatus::Io,
        Error::InvalidInput(_) | Error::Geometry(_) => GelfandStatus::InvalidArgument,
        _ => GelfandStatus::Numerical,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (GelfandStatus, String)>) -> GelfandStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GelfandStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GelfandStatus::Panic
        }
    }
}

fn lib(e: Error) -> (GelfandStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (GelfandStatus, String) {
    (GelfandStatus::NullPointer, format!("{name} is null"))
}

unsafe fn handle<'a>(h: *const GelfandGreen) -> Result<&'a GreenEvaluator, (GelfandStatus, String)> {
    h.as_ref().map(|g| &g.inner).ok_or_else(|| null("handle"))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gelfand_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn gelfand_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Evaluator on the unit disk (closed forms).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn gelfand_green_new_disk(out: *mut *mut GelfandGreen) -> GelfandStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(GelfandGreen { inner: GreenEvaluator::unit_disk() }));
        Ok(())
    })
}

/// Evaluator on the domain described by a mesh file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gelfand_green_new_mesh(path: *const c_char, out: *mut *mut GelfandGreen) -> GelfandStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (GelfandStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let mesh = Mesh::read(path).map_err(lib)?;
        let inner = GreenEvaluator::new(Domain::meshed(mesh)).map_err(lib)?;
        *out = Box::into_raw(Box::new(GelfandGreen { inner }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `h` must come from a constructor above and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gelfand_green_free(h: *mut GelfandGreen) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// `G(x, y)`.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gelfand_green_eval(
    h: *const GelfandGreen,
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
    out: *mut f64,
) -> GelfandStatus {
    guard(|| {
        let ev = handle(h)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ev.green(Point2::new(x1, x2), Point2::new(y1, y2)).map_err(lib)?;
        Ok(())
    })
}

/// Robin function `R(x)`, its gradient (2 values) and Hessian (4 values, row
/// major). `grad` and `hess` may be null.
///
/// # Safety
/// `h` must be a live handle; non-null outputs must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn gelfand_robin(
    h: *const GelfandGreen,
    x1: f64,
    x2: f64,
    value: *mut f64,
    grad: *mut f64,
    hess: *mut f64,
) -> GelfandStatus {
    guard(|| {
        let ev = handle(h)?;
        if value.is_null() {
            return Err(null("value"));
        }
        let x = Point2::new(x1, x2);
        *value = ev.robin(x).map_err(lib)?;
        if !grad.is_null() {
            let g = ev.robin_grad(x).map_err(lib)?;
            std::slice::from_raw_parts_mut(grad, 2).copy_from_slice(&g);
        }
        if !hess.is_null() {
            let m = ev.robin_hess(x).map_err(lib)?;
            std::slice::from_raw_parts_mut(hess, 4).copy_from_slice(&[m[0][0], m[0][1], m[1][0], m[1][1]]);
        }
        Ok(())
    })
}

/// The `m`-point Hamiltonian at `points` (`2m` values `x1, y1, …`) and,
/// when `grad` is non-null, its gradient (`2m` values).
///
/// # Safety
/// `h` must be a live handle, `points` must hold `2m` values and non-null
/// outputs the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn gelfand_hamiltonian(
    h: *const GelfandGreen,
    points: *const f64,
    m: usize,
    value: *mut f64,
    grad: *mut f64,
) -> GelfandStatus {
    guard(|| {
        let ev = handle(h)?;
        if points.is_null() {
            return Err(null("points"));
        }
        if value.is_null() {
            return Err(null("value"));
        }
        if m == 0 {
            return Err((GelfandStatus::InvalidArgument, "m must be positive".into()));
        }
        let c = Configuration::from_slice(std::slice::from_raw_parts(points, 2 * m));
        *value = h_value(ev, &c).map_err(lib)?;
        if !grad.is_null() {
            let g = h_grad(ev, &c).map_err(lib)?;
            std::slice::from_raw_parts_mut(grad, 2 * m).copy_from_slice(&g);
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_round_trip() {
        let mut h = std::ptr::null_mut();
        unsafe {
            assert_eq!(gelfand_green_new_disk(&mut h), GelfandStatus::Ok);
            let mut r = 0.0;
            assert_eq!(gelfand_robin(h, 0.0, 0.0, &mut r, std::ptr::null_mut(), std::ptr::null_mut()), GelfandStatus::Ok);
            assert!(r.abs() < 1e-14);
            gelfand_green_free(h);
        }
    }

    #[test]
    fn null_handle_sets_message() {
        let mut v = 0.0;
        let s = unsafe { gelfand_green_eval(std::ptr::null(), 0.0, 0.0, 0.1, 0.0, &mut v) };
        assert_eq!(s, GelfandStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(gelfand_last_error()) };
        assert!(msg.to_str().unwrap().contains("handle"));
    }
}
