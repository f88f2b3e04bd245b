//! C interface to `serrin-core`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` or
//! `serrin_solve`-style constructors and released by the matching `*_free`.
//! Every fallible call returns a [`SerrinStatus`]; on failure the message is
//! kept per thread and can be fetched with [`serrin_last_error_message`].
//! Fourier coefficients are passed as `(a0, a1, b1, ..., aK, bK)`, so an
//! array of length `2K + 1`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use serrin_core::branch::{BranchProblem, NewtonOptions};
use serrin_core::operator::{assemble_gamma, assemble_q, LinearOperatorMatrix, DEFAULT_REL_TOL};
use serrin_core::oracles::gamma_mode;
use serrin_core::shape::ParamVector;
use serrin_core::solver::{criticality, solve_state, Conductivity, PulledBackSolution, Resolution};
use serrin_core::{AngularField, Error, GeometrySpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SerrinStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Geometry = 3,
    ResolutionTooLow = 4,
    NotCritical = 5,
    Degenerate = 6,
    SingularSystem = 7,
    NoConvergence = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Boundary and inclusion description.
pub struct SerrinGeometry(GeometrySpec);

/// Solved state `u` on a geometry with a given conductivity and resolution.
pub struct SerrinSolution(PulledBackSolution);

/// Dense linearized operator on Fourier coefficients.
pub struct SerrinOperator(LinearOperatorMatrix);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SerrinStatus {
    match e {
        Error::StarShapeViolation { .. } | Error::InclusionOverlap { .. } | Error::CutoffOrdering { .. } | Error::StepTooLarge { .. } => {
            SerrinStatus::Geometry
        }
        Error::ResolutionTooLow(_) => SerrinStatus::ResolutionTooLow,
        Error::NotCritical { .. } => SerrinStatus::NotCritical,
        Error::DegenerateBase { .. } => SerrinStatus::Degenerate,
        Error::SingularSystem(_) => SerrinStatus::SingularSystem,
        Error::NoConvergence { .. } => SerrinStatus::NoConvergence,
        Error::EllipticityLoss { .. } | Error::OutsideTrustRegion(_) | Error::InvalidArgument(_) => SerrinStatus::InvalidArgument,
    }
}

/// Runs `f`, turning errors and panics into a status plus the thread's
/// last-error message.
fn guard(f: impl FnOnce() -> Result<(), (SerrinStatus, String)>) -> SerrinStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SerrinStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            SerrinStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (SerrinStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SerrinStatus, String) {
    (SerrinStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (SerrinStatus, String) {
    (SerrinStatus::InvalidArgument, msg.into())
}

/// Reads a coefficient array; a null pointer with length 0 is the zero field.
unsafe fn read_field(p: *const f64, len: usize, what: &str) -> Result<AngularField, (SerrinStatus, String)> {
    if len == 0 {
        return Ok(AngularField::zeros(0));
    }
    if p.is_null() {
        return Err(null(what));
    }
    if len.is_multiple_of(2) {
        return Err(invalid(format!("{what} must have odd length 2K+1, got {len}")));
    }
    AngularField::new(slice::from_raw_parts(p, len).to_vec()).map_err(core_err)
}

unsafe fn write_out(values: &[f64], out: *mut f64, cap: usize, len_out: *mut usize) -> Result<(), (SerrinStatus, String)> {
    if !len_out.is_null() {
        *len_out = values.len();
    }
    if cap < values.len() {
        return Err((SerrinStatus::BufferTooSmall, format!("need {} entries, buffer holds {cap}", values.len())));
    }
    if out.is_null() {
        return Err(null("output buffer"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn serrin_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `cap`). Returns the full message length, or 0
/// if the last call succeeded.
///
/// # Safety
/// `buf` must be null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn serrin_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Creates a geometry: outer radius `1 + xi(θ)`, inclusion radius
/// `rho + phi(θ)`.
///
/// # Safety
/// `xi`/`phi` must be valid for their lengths (or null with length 0) and
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn serrin_geometry_new(
    rho: f64,
    xi: *const f64,
    xi_len: usize,
    phi: *const f64,
    phi_len: usize,
    out: *mut *mut SerrinGeometry,
) -> SerrinStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let xi = read_field(xi, xi_len, "xi")?;
        let phi = read_field(phi, phi_len, "phi")?;
        let g = GeometrySpec::new(xi, phi, rho).map_err(core_err)?;
        put(out, SerrinGeometry(g));
        Ok(())
    })
}

/// # Safety
/// `geom` must be null or a handle from [`serrin_geometry_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn serrin_geometry_free(geom: *mut SerrinGeometry) {
    if !geom.is_null() {
        drop(Box::from_raw(geom));
    }
}

/// Area of the domain.
///
/// # Safety
/// `geom` must be a live handle and `area` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn serrin_geometry_area(geom: *const SerrinGeometry, area: *mut f64) -> SerrinStatus {
    guard(|| {
        let g = geom.as_ref().ok_or_else(|| null("geom"))?;
        if area.is_null() {
            return Err(null("area"));
        }
        *area = g.0.area();
        Ok(())
    })
}

fn conductivity(sigma_c: f64, s: f64) -> Result<Conductivity, (SerrinStatus, String)> {
    Conductivity::new(sigma_c, s).map_err(core_err)
}

fn resolution(modes: usize) -> Result<Resolution, (SerrinStatus, String)> {
    if modes == 0 {
        return Err(invalid("modes must be positive"));
    }
    Ok(Resolution::with_modes(modes))
}

/// Solves the state equation with inclusion conductivity `sigma_c + s` at
/// Fourier cutoff `modes`.
///
/// # Safety
/// `geom` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn serrin_solve(
    geom: *const SerrinGeometry,
    sigma_c: f64,
    s: f64,
    modes: usize,
    out: *mut *mut SerrinSolution,
) -> SerrinStatus {
    guard(|| {
        let g = geom.as_ref().ok_or_else(|| null("geom"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let sol = solve_state(&g.0, &conductivity(sigma_c, s)?, &resolution(modes)?).map_err(core_err)?;
        put(out, SerrinSolution(sol));
        Ok(())
    })
}

/// # Safety
/// `sol` must be null or a handle from [`serrin_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn serrin_solution_free(sol: *mut SerrinSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Mean `|∂ₙu|` on the outer boundary and its largest relative deviation.
///
/// # Safety
/// `sol` must be a live handle; the outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn serrin_solution_criticality(sol: *const SerrinSolution, c: *mut f64, relative_defect: *mut f64) -> SerrinStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("sol"))?;
        if c.is_null() || relative_defect.is_null() {
            return Err(null("output"));
        }
        let report = criticality(&s.0);
        *c = report.c;
        *relative_defect = report.relative_defect;
        Ok(())
    })
}

/// Assembles `Γ` at a solved state.
///
/// # Safety
/// `sol` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn serrin_assemble_gamma(sol: *const SerrinSolution, out: *mut *mut SerrinOperator) -> SerrinStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("sol"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, SerrinOperator(assemble_gamma(&s.0).map_err(core_err)?));
        Ok(())
    })
}

/// Assembles `Q = -2cΓ`; fails with `NOT_CRITICAL` off critical states.
///
/// # Safety
/// `sol` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn serrin_assemble_q(sol: *const SerrinSolution, out: *mut *mut SerrinOperator) -> SerrinStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("sol"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let gamma = assemble_gamma(&s.0).map_err(core_err)?;
        put(out, SerrinOperator(assemble_q(&gamma, &s.0).map_err(core_err)?));
        Ok(())
    })
}

/// # Safety
/// `op` must be null or an operator handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn serrin_operator_free(op: *mut SerrinOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Side length of the operator matrix, or 0 for a null handle.
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn serrin_operator_dim(op: *const SerrinOperator) -> usize {
    op.as_ref().map_or(0, |o| o.0.dim())
}

/// Copies the matrix in row-major order. `len` receives the required size
/// even when the buffer is too small.
///
/// # Safety
/// `op` must be a live handle, `out` valid for `cap` doubles and `len`
/// null or valid.
#[no_mangle]
pub unsafe extern "C" fn serrin_operator_matrix(op: *const SerrinOperator, out: *mut f64, cap: usize, len: *mut usize) -> SerrinStatus {
    guard(|| {
        let o = &op.as_ref().ok_or_else(|| null("op"))?.0;
        let n = o.dim();
        let values: Vec<f64> = (0..n * n).map(|i| o.entry(i / n, i % n)).collect();
        write_out(&values, out, cap, len)
    })
}

/// Copies the singular values in descending order.
///
/// # Safety
/// As for [`serrin_operator_matrix`].
#[no_mangle]
pub unsafe extern "C" fn serrin_operator_singular_values(
    op: *const SerrinOperator,
    out: *mut f64,
    cap: usize,
    len: *mut usize,
) -> SerrinStatus {
    guard(|| {
        let o = &op.as_ref().ok_or_else(|| null("op"))?.0;
        write_out(&o.singular_values, out, cap, len)
    })
}

/// Solves `x = op⁻¹ rhs` for a coefficient vector of length `dim`.
///
/// # Safety
/// `op` must be a live handle, `rhs` and `out` valid for `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn serrin_operator_solve(op: *const SerrinOperator, rhs: *const f64, out: *mut f64, dim: usize) -> SerrinStatus {
    guard(|| {
        let o = &op.as_ref().ok_or_else(|| null("op"))?.0;
        if rhs.is_null() || out.is_null() {
            return Err(null("vector"));
        }
        if dim != o.dim() {
            return Err(invalid(format!("operator has dimension {}, got {dim}", o.dim())));
        }
        let x = AngularField::new(slice::from_raw_parts(rhs, dim).to_vec()).map_err(core_err)?;
        let y = o.solve(&x).map_err(core_err)?;
        ptr::copy_nonoverlapping(y.coeffs().as_ptr(), out, dim);
        Ok(())
    })
}

/// Perturbation parameters for [`serrin_branch_solve`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SerrinParameters {
    pub phi: *const f64,
    pub phi_len: usize,
    pub f: *const f64,
    pub f_len: usize,
    pub s: f64,
    pub eta: [f64; 2],
}

/// Solves for the outer-boundary correction `ξ` at parameters `params`
/// from the critical base `(geom, sigma_c)`. With `projected` nonzero the
/// base must be the one-phase disk and `ξ` is sought without translation
/// modes. `xi_out` receives `2 * modes + 1` coefficients and `residual`
/// (if non-null) the final residual norm.
///
/// # Safety
/// `geom` must be a live handle, `params` valid with arrays valid for their
/// lengths, `xi_out` valid for `cap` doubles; `residual` may be null.
#[no_mangle]
pub unsafe extern "C" fn serrin_branch_solve(
    geom: *const SerrinGeometry,
    sigma_c: f64,
    modes: usize,
    params: *const SerrinParameters,
    projected: i32,
    xi_out: *mut f64,
    cap: usize,
    residual: *mut f64,
) -> SerrinStatus {
    guard(|| {
        let g = &geom.as_ref().ok_or_else(|| null("geom"))?.0;
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let lambda = ParamVector {
            phi: read_field(p.phi, p.phi_len, "phi")?,
            f: read_field(p.f, p.f_len, "f")?,
            s: p.s,
            eta: p.eta,
        };
        let cond = conductivity(sigma_c, 0.0)?;
        let res = resolution(modes)?;
        let problem = if projected != 0 {
            BranchProblem::projected(g, &cond, &res)
        } else {
            BranchProblem::new(g, &cond, &res, DEFAULT_REL_TOL)
        }
        .map_err(core_err)?;
        let (xi, report) = problem.solve(&lambda, None, &NewtonOptions::default()).map_err(core_err)?;
        write_out(xi.coeffs(), xi_out, cap, ptr::null_mut())?;
        if !residual.is_null() {
            *residual = report.final_residual();
        }
        Ok(())
    })
}

/// Closed-form diagonal entry of `Γ` on mode `k` at the concentric base.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn serrin_gamma_mode(k: usize, rho: f64, sigma_c: f64, out: *mut f64) -> SerrinStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = gamma_mode(k, rho, sigma_c).map_err(core_err)?;
        Ok(())
    })
}
