//! C ABI over `kbl`.
//!
//! Conventions:
//! - every fallible function returns a [`KblStatus`]; on failure a message is
//!   available from [`kbl_last_error`] on the same thread;
//! - fields are plain `double` arrays with one value per grid node;
//! - a [`KblBasis`] is an opaque handle released with [`kbl_basis_free`].
//!   It is immutable, so one handle may be shared across threads.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kbl::cole_hopf::{self, StateClass};
use kbl::flows;
use kbl::koopman::{self, SeriesCertificate, SeriesOptions, Threshold, TruncationSpec};
use kbl::{Grid, KblError, Potential, ScalarField, SpectralBasis};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KblStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Domain = 3,
    GridMismatch = 4,
    Range = 5,
    Resolution = 6,
    Numerical = 7,
    CertFail = 8,
    SizeGuard = 9,
    Io = 10,
    /// Caller buffer shorter than the required length.
    BufferTooSmall = 11,
    /// Internal panic caught at the boundary.
    Panic = 12,
}

/// Spectral basis of `-d²/dx² + V` with Neumann conditions.
pub struct KblBasis {
    inner: SpectralBasis,
}

/// Validity data of one series evaluation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct KblCertificate {
    pub t: f64,
    pub valid: bool,
    /// True when the series is certified for every `t >= 0`; `threshold` is
    /// then `-INFINITY`.
    pub always_valid: bool,
    pub threshold: f64,
    pub in_omega: bool,
    pub k_tilde: f64,
    pub k_bound: f64,
    pub eps: f64,
    pub absolutely_convergent: bool,
    pub tail_bound: f64,
    pub terms: u64,
    pub unsafe_override: bool,
}

impl From<&SeriesCertificate> for KblCertificate {
    fn from(c: &SeriesCertificate) -> Self {
        let th = c.threshold();
        Self {
            t: c.t,
            valid: c.valid,
            always_valid: th == Threshold::AlwaysValid,
            threshold: th.value(),
            in_omega: c.in_omega,
            k_tilde: c.k_tilde,
            k_bound: c.k_bound,
            eps: c.eps,
            absolutely_convergent: c.absolutely_convergent,
            tail_bound: c.tail_bound,
            terms: c.terms,
            unsafe_override: c.unsafe_override,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Kbl(KblError),
    Null(&'static str),
    Short { what: &'static str, need: usize, got: usize },
}

impl From<KblError> for Fail {
    fn from(e: KblError) -> Self {
        Fail::Kbl(e)
    }
}

fn status_of(e: &KblError) -> KblStatus {
    match e {
        KblError::Config(_) => KblStatus::Config,
        KblError::Domain(_) => KblStatus::Domain,
        KblError::GridMismatch { .. } => KblStatus::GridMismatch,
        KblError::Range { .. } => KblStatus::Range,
        KblError::Resolution(_) => KblStatus::Resolution,
        KblError::Numerical(_) => KblStatus::Numerical,
        KblError::CertFail { .. } => KblStatus::CertFail,
        KblError::SizeGuard(_) => KblStatus::SizeGuard,
        KblError::Io(_) | KblError::Json(_) => KblStatus::Io,
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> KblStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            KblStatus::Ok
        }
        Ok(Err(Fail::Kbl(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            KblStatus::NullPointer
        }
        Ok(Err(Fail::Short { what, need, got })) => {
            set_error(format!("{what}: buffer holds {got} values, {need} required"));
            KblStatus::BufferTooSmall
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            KblStatus::Panic
        }
    }
}

unsafe fn basis_ref<'a>(b: *const KblBasis) -> Result<&'a SpectralBasis, Fail> {
    b.as_ref().map(|b| &b.inner).ok_or(Fail::Null("basis"))
}

unsafe fn read_field(grid: Grid, data: *const f64, what: &'static str) -> Result<ScalarField, Fail> {
    if data.is_null() {
        return Err(Fail::Null(what));
    }
    let values = std::slice::from_raw_parts(data, grid.n_points()).to_vec();
    Ok(ScalarField::new(grid, values)?)
}

unsafe fn write_values(src: &[f64], out: *mut f64, len: usize, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    if len < src.len() {
        return Err(Fail::Short {
            what,
            need: src.len(),
            got: len,
        });
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

unsafe fn write_field(f: &ScalarField, out: *mut f64) -> Result<(), Fail> {
    write_values(f.values(), out, f.values().len(), "output field")
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn kbl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kbl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Solves for the lowest `modes` eigenpairs of the potential sampled at
/// `n_points` uniform nodes of [0,1] (`n_points` odd, `modes <= n_points/4`).
///
/// # Safety
/// `potential` must point to `n_points` readable doubles; `out` must be a
/// valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn kbl_basis_new(
    potential: *const f64,
    n_points: usize,
    modes: usize,
    out: *mut *mut KblBasis,
) -> KblStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = ptr::null_mut();
        let grid = Grid::new(n_points)?;
        let v = Potential::new(read_field(grid, potential, "potential")?)?;
        let inner = kbl::solve_eigen(&v, grid, modes)?;
        *out = Box::into_raw(Box::new(KblBasis { inner }));
        Ok(())
    })
}

/// Releases a basis. NULL is ignored.
///
/// # Safety
/// `basis` must come from [`kbl_basis_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn kbl_basis_free(basis: *mut KblBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Number of grid nodes, 0 for NULL.
///
/// # Safety
/// `basis` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kbl_basis_n_points(basis: *const KblBasis) -> usize {
    basis.as_ref().map_or(0, |b| b.inner.grid().n_points())
}

/// Number of retained modes, 0 for NULL.
///
/// # Safety
/// `basis` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kbl_basis_count(basis: *const KblBasis) -> usize {
    basis.as_ref().map_or(0, |b| b.inner.count())
}

/// Copies the eigenvalues `mu_0 < mu_1 < ...` into `out[0..len)`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kbl_basis_eigenvalues(basis: *const KblBasis, out: *mut f64, len: usize) -> KblStatus {
    guard(|| {
        let b = basis_ref(basis)?;
        write_values(b.mu(), out, len, "eigenvalues")
    })
}

/// Copies the L²-normalized mode `e_n` (n_points samples).
///
/// # Safety
/// `out` must point to `n_points` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kbl_basis_mode(basis: *const KblBasis, n: usize, out: *mut f64) -> KblStatus {
    guard(|| {
        let b = basis_ref(basis)?;
        if n >= b.count() {
            return Err(KblError::Domain(format!("mode {n} outside 0..{}", b.count())).into());
        }
        write_field(b.mode(n), out)
    })
}

/// Spectral gap `mu_1 - mu_0`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kbl_basis_gap(basis: *const KblBasis, out: *mut f64) -> KblStatus {
    guard(|| {
        let b = basis_ref(basis)?;
        write_values(&[b.gap()], out, 1, "gap")
    })
}

/// Hopf transform: Burgers state `u` to the positive unit-mass heat state.
///
/// # Safety
/// `u` and `out` must each hold `n_points` doubles.
#[no_mangle]
pub unsafe extern "C" fn kbl_hopf(n_points: usize, u: *const f64, out: *mut f64) -> KblStatus {
    guard(|| {
        let grid = Grid::new(n_points)?;
        let v = cole_hopf::hopf(&read_field(grid, u, "u")?)?;
        write_field(v.field(), out)
    })
}

/// Cole transform `-2 v'/v` of a strictly positive state.
///
/// # Safety
/// `v` and `out` must each hold `n_points` doubles.
#[no_mangle]
pub unsafe extern "C" fn kbl_cole(n_points: usize, v: *const f64, out: *mut f64) -> KblStatus {
    guard(|| {
        let grid = Grid::new(n_points)?;
        let u = cole_hopf::cole_field(&read_field(grid, v, "v")?)?;
        write_field(&u, out)
    })
}

/// Linear heat flow `e^{-tA} v0`.
///
/// # Safety
/// `v0` and `out` must each hold `n_points` doubles of the basis grid.
#[no_mangle]
pub unsafe extern "C" fn kbl_heat_flow(basis: *const KblBasis, v0: *const f64, t: f64, out: *mut f64) -> KblStatus {
    guard(|| {
        let b = basis_ref(basis)?;
        let v0 = StateClass::p_plus(read_field(b.grid(), v0, "v0")?)?;
        write_field(&flows::heat_flow(b, &v0, t)?, out)
    })
}

/// Nonlinear heat flow of a positive unit-mass state.
///
/// # Safety
/// `v0` and `out` must each hold `n_points` doubles of the basis grid.
#[no_mangle]
pub unsafe extern "C" fn kbl_nonlinear_heat_flow(
    basis: *const KblBasis,
    v0: *const f64,
    t: f64,
    out: *mut f64,
) -> KblStatus {
    guard(|| {
        let b = basis_ref(basis)?;
        let v0 = StateClass::p_one(read_field(b.grid(), v0, "v0")?)?;
        write_field(flows::nonlinear_heat_flow(b, &v0, t)?.field(), out)
    })
}

/// Burgers flow through the Cole-Hopf conjugacy.
///
/// # Safety
/// `u0` and `out` must each hold `n_points` doubles of the basis grid.
#[no_mangle]
pub unsafe extern "C" fn kbl_burgers_flow(basis: *const KblBasis, u0: *const f64, t: f64, out: *mut f64) -> KblStatus {
    guard(|| {
        let b = basis_ref(basis)?;
        let u0 = read_field(b.grid(), u0, "u0")?;
        write_field(&flows::burgers_flow(b, &u0, t)?, out)
    })
}

/// Blow-up time of the nonlinear heat flow for a positive state of mass
/// greater than one. `*blew_up` is false, and `*t_star` the horizon, when
/// no blow-up happens before `horizon`.
///
/// # Safety
/// `v0` must hold `n_points` doubles; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kbl_blowup_time(
    basis: *const KblBasis,
    v0: *const f64,
    horizon: f64,
    t_star: *mut f64,
    blew_up: *mut bool,
) -> KblStatus {
    guard(|| {
        let b = basis_ref(basis)?;
        if t_star.is_null() || blew_up.is_null() {
            return Err(Fail::Null("blow-up outputs"));
        }
        let v0 = StateClass::p_plus(read_field(b.grid(), v0, "v0")?)?;
        let (_, report) = flows::nonlinear_heat_general(b, &v0, &[], horizon)?;
        *t_star = report.t_star;
        *blew_up = report.blew_up;
        Ok(())
    })
}

fn options(max_mode: usize, max_order: usize, allow_uncertified: bool) -> Result<SeriesOptions, Fail> {
    let mut opts = SeriesOptions::new(TruncationSpec::new(max_mode, max_order)?);
    opts.allow_uncertified = allow_uncertified;
    Ok(opts)
}

unsafe fn write_cert(cert: &SeriesCertificate, out: *mut KblCertificate) {
    if !out.is_null() {
        *out = KblCertificate::from(cert);
    }
}

/// Truncated Koopman decomposition of the nonlinear heat flow at time `t`
/// (modes `0..=max_mode`, products up to order `max_order`). Returns
/// `CertFail` when `t` is not certified, unless `allow_uncertified`.
/// `cert` may be NULL.
///
/// # Safety
/// `v0` and `out` must each hold `n_points` doubles of the basis grid.
#[no_mangle]
pub unsafe extern "C" fn kbl_heat_series(
    basis: *const KblBasis,
    v0: *const f64,
    t: f64,
    max_mode: usize,
    max_order: usize,
    allow_uncertified: bool,
    out: *mut f64,
    cert: *mut KblCertificate,
) -> KblStatus {
    guard(|| {
        let b = basis_ref(basis)?;
        let v0 = StateClass::p_one(read_field(b.grid(), v0, "v0")?)?;
        let opts = options(max_mode, max_order, allow_uncertified)?;
        let (field, c) = koopman::heat_series_with(b, &v0, t, &opts)?;
        write_field(&field, out)?;
        write_cert(&c, cert);
        Ok(())
    })
}

/// Truncated Koopman decomposition of the Burgers flow at time `t`; see
/// [`kbl_heat_series`].
///
/// # Safety
/// `u0` and `out` must each hold `n_points` doubles of the basis grid.
#[no_mangle]
pub unsafe extern "C" fn kbl_burgers_series(
    basis: *const KblBasis,
    u0: *const f64,
    t: f64,
    max_mode: usize,
    max_order: usize,
    allow_uncertified: bool,
    out: *mut f64,
    cert: *mut KblCertificate,
) -> KblStatus {
    guard(|| {
        let b = basis_ref(basis)?;
        let u0 = read_field(b.grid(), u0, "u0")?;
        let opts = options(max_mode, max_order, allow_uncertified)?;
        let (field, c) = koopman::burgers_series_with(b, &u0, t, &opts)?;
        write_field(&field, out)?;
        write_cert(&c, cert);
        Ok(())
    })
}
