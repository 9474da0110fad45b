//! C ABI for `hitstat`.
//!
//! Every fallible function returns an [`HsStatus`] and writes results through
//! out-pointers. On failure the message is kept per thread and can be copied
//! out with [`hs_last_error_message`]. Objects are opaque handles created by
//! `*_new`/`*_build` and released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hitstat::chenstein::{binomial_poisson_tv, chen_stein_bound, BinaryProcessModel, BoundInputs, ChenSteinReport};
use hitstat::orbit::{estimate_v_measure, is_short_return_center, VerdictStatus};
use hitstat::stats::poisson_pmf;
use hitstat::systems::{BitPoint, Point, RationalPoint, SystemKind, SystemSpec, CAT_DENOMINATOR};
use hitstat::tower::{build_tower, check_omega_decay, default_omega_grid, omega, TowerSpec};
use hitstat::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    InvalidArgument = 1,
    HypothesisViolated = 2,
    InsufficientData = 3,
    HorizonExceeded = 4,
    NullPointer = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HsSystemKind {
    Doubling = 0,
    CatMap = 1,
    Intermittent = 2,
    Gauss = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HsVerdict {
    Intersects = 0,
    Disjoint = 1,
    Unknown = 2,
}

/// Opaque system handle.
pub struct HsSystem(SystemSpec);

/// Opaque tower handle.
pub struct HsTower(TowerSpec);

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HsVEstimate {
    pub lower: f64,
    pub upper: f64,
    pub se: f64,
    pub samples: u64,
    pub intersects: u64,
    pub unknown: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HsChenStein {
    pub eps: f64,
    pub n: u64,
    pub t: f64,
    pub p: u64,
    pub r1: f64,
    pub r2: f64,
    pub bound_per_k: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HsStatus {
    match e {
        Error::InvalidArgument(_)
        | Error::Config(_)
        | Error::RepresentationMismatch { .. }
        | Error::ModulusOverflow { .. } => HsStatus::InvalidArgument,
        Error::Hypothesis(_) | Error::AllCentersExcluded { .. } => HsStatus::HypothesisViolated,
        Error::InsufficientData(_) | Error::MeasureUnderflow { .. } => HsStatus::InsufficientData,
        Error::HorizonExceeded { .. } | Error::PieceBudget { .. } => HsStatus::HorizonExceeded,
        Error::Io { .. } => HsStatus::Io,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HsStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer passed as `{what}`"));
            HsStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".into());
            HsStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn handle<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

/// Copies the last error message of this thread (NUL-terminated) into `buf`
/// and returns its length without the terminator; 0 when there is none.
/// Passing a null `buf` or `len = 0` only queries the length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn hs_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Creates a system; `alpha` is read only for the intermittent map.
///
/// # Safety
/// `out_system` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hs_system_new(kind: HsSystemKind, alpha: f64, out_system: *mut *mut HsSystem) -> HsStatus {
    guard(|| {
        let slot = out(out_system, "out_system")?;
        let spec = match kind {
            HsSystemKind::Doubling => SystemSpec::doubling(),
            HsSystemKind::CatMap => SystemSpec::cat_map(),
            HsSystemKind::Intermittent => SystemSpec::intermittent(alpha)?,
            HsSystemKind::Gauss => SystemSpec::gauss(),
        };
        *slot = Box::into_raw(Box::new(HsSystem(spec)));
        Ok(())
    })
}

/// # Safety
/// `system` must come from [`hs_system_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hs_system_free(system: *mut HsSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Default horizon constant `1 / (4 ln A)` of the system.
///
/// # Safety
/// `system` must be a live handle; `out_a` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hs_system_default_a_frak(system: *const HsSystem, out_a: *mut f64) -> HsStatus {
    guard(|| {
        *out(out_a, "out_a")? = handle(system, "system")?.0.default_a_frak();
        Ok(())
    })
}

/// A center in the representation the system iterates exactly. Doubling
/// centers are taken at 53-bit precision, cat-map centers on the `2^-52` grid.
fn center_point(spec: &SystemSpec, x: f64, y: f64, horizon: u64) -> Result<Point, Error> {
    if !(0.0..1.0).contains(&x) || (spec.kind.dimension() == 2 && !(0.0..1.0).contains(&y)) {
        return Err(Error::InvalidArgument(format!("center ({x}, {y}) outside the phase space")));
    }
    Ok(match spec.kind {
        SystemKind::Doubling => {
            let den = 1u64 << 53;
            Point::ExactBits(BitPoint::from_ratio((x * den as f64) as u64, den, horizon)?)
        }
        SystemKind::CatMap => {
            let s = CAT_DENOMINATOR as f64;
            Point::ExactRational2D(RationalPoint::new((x * s) as u64, (y * s) as u64, CAT_DENOMINATOR)?)
        }
        _ => Point::Float1D(x),
    })
}

/// Very-short-return verdict for the ball `B_rho((x, y))`; `y` is ignored
/// by 1D systems. `out_witness` receives the first intersecting iterate
/// (0 when none).
///
/// # Safety
/// `system` must be a live handle; out-pointers valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hs_short_return_verdict(
    system: *const HsSystem,
    x: f64,
    y: f64,
    rho: f64,
    a_frak: f64,
    out_verdict: *mut HsVerdict,
    out_witness: *mut u32,
) -> HsStatus {
    guard(|| {
        let spec = &handle(system, "system")?.0;
        let verdict_slot = out(out_verdict, "out_verdict")?;
        let witness_slot = out(out_witness, "out_witness")?;
        let j = hitstat::orbit::short_return_horizon(rho, a_frak)?;
        let c = center_point(spec, x, y, j as u64 + 64)?;
        let v = is_short_return_center(spec, &c, rho, a_frak)?;
        *verdict_slot = match v.status {
            VerdictStatus::Intersects => HsVerdict::Intersects,
            VerdictStatus::Disjoint => HsVerdict::Disjoint,
            VerdictStatus::Unknown => HsVerdict::Unknown,
        };
        *witness_slot = v.witness_n.unwrap_or(0);
        Ok(())
    })
}

/// Monte Carlo bounds on the measure of very-short-return centers.
///
/// # Safety
/// `system` must be a live handle; `out_estimate` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hs_estimate_v_measure(
    system: *const HsSystem,
    rho: f64,
    a_frak: f64,
    samples: u64,
    seed: u64,
    out_estimate: *mut HsVEstimate,
) -> HsStatus {
    guard(|| {
        let spec = &handle(system, "system")?.0;
        let slot = out(out_estimate, "out_estimate")?;
        let e = estimate_v_measure(spec, rho, a_frak, samples, seed)?;
        *slot = HsVEstimate {
            lower: e.lower,
            upper: e.upper,
            se: e.se,
            samples: e.samples,
            intersects: e.intersects,
            unknown: e.unknown,
        };
        Ok(())
    })
}

/// Builds a tower with `m(R = k) ∝ k^{-(lambda+1)}`, `k = 1..=max_r`.
///
/// # Safety
/// `out_tower` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hs_tower_build(
    lambda: f64,
    max_r: u32,
    beams_per_height: u32,
    out_tower: *mut *mut HsTower,
) -> HsStatus {
    guard(|| {
        let slot = out(out_tower, "out_tower")?;
        *slot = Box::into_raw(Box::new(HsTower(build_tower(lambda, max_r, beams_per_height)?)));
        Ok(())
    })
}

/// # Safety
/// `tower` must come from [`hs_tower_build`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hs_tower_free(tower: *mut HsTower) {
    if !tower.is_null() {
        drop(Box::from_raw(tower));
    }
}

/// `Ω(s)`.
///
/// # Safety
/// `tower` must be a live handle; `out_omega` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hs_tower_omega(tower: *const HsTower, s: u32, out_omega: *mut f64) -> HsStatus {
    guard(|| {
        *out(out_omega, "out_omega")? = omega(&handle(tower, "tower")?.0, s);
        Ok(())
    })
}

/// Log-log slope of `Ω` over the default grid `[4, max_r / 10]`.
///
/// # Safety
/// `tower` must be a live handle; `out_slope` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hs_tower_omega_slope(tower: *const HsTower, out_slope: *mut f64) -> HsStatus {
    guard(|| {
        let t = &handle(tower, "tower")?.0;
        *out(out_slope, "out_slope")? = check_omega_decay(t, &default_omega_grid(t.max_r))?;
        Ok(())
    })
}

/// `m(R > k)`.
///
/// # Safety
/// `tower` must be a live handle; `out_mass` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hs_tower_tail_mass(tower: *const HsTower, k: u32, out_mass: *mut f64) -> HsStatus {
    guard(|| {
        *out(out_mass, "out_mass")? = handle(tower, "tower")?.0.tail_mass(k);
        Ok(())
    })
}

/// `e^{-t} t^k / k!`; NaN when `t` is negative or not finite.
#[no_mangle]
pub extern "C" fn hs_poisson_pmf(t: f64, k: u64) -> f64 {
    if !(t >= 0.0 && t.is_finite()) {
        return f64::NAN;
    }
    poisson_pmf(t, k)
}

/// Exact `Σ_k |Bin(N, t/N){k} − Poi(t){k}|` and the bound `2t²/N`.
///
/// # Safety
/// Out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hs_binomial_poisson_tv(n: u64, t: f64, out_exact: *mut f64, out_bound: *mut f64) -> HsStatus {
    guard(|| {
        let exact = out(out_exact, "out_exact")?;
        let bound = out(out_bound, "out_bound")?;
        (*exact, *bound) = binomial_poisson_tv(n, t)?;
        Ok(())
    })
}

/// Chen–Stein quantities of the stationary two-state chain with transition
/// matrix `transition` (row-major `p00, p01, p10, p11`), with `N = ⌊t/ε⌋`.
///
/// # Safety
/// `transition` must point to 4 doubles; `out_report` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hs_chen_stein_markov(
    transition: *const f64,
    t: f64,
    p: u64,
    out_report: *mut HsChenStein,
) -> HsStatus {
    guard(|| {
        if transition.is_null() {
            return Err(Failure::Null("transition"));
        }
        let slot = out(out_report, "out_report")?;
        let m = std::slice::from_raw_parts(transition, 4);
        let model = BinaryProcessModel::markov([[m[0], m[1]], [m[2], m[3]]])?;
        let r = ChenSteinReport::compute(&model, t, p)?;
        *slot = HsChenStein {
            eps: r.eps,
            n: r.n,
            t: r.t_param,
            p: r.p_gap,
            r1: r.r1,
            r2: r.r2,
            bound_per_k: r.bound_per_k,
        };
        Ok(())
    })
}

/// `6t·e_size·(N(R₁+R₂) + pε) + 2t²/N` for the inputs in `report`.
///
/// # Safety
/// `report` must be readable; `out_bound` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hs_chen_stein_bound(report: *const HsChenStein, e_size: u64, out_bound: *mut f64) -> HsStatus {
    guard(|| {
        let r = handle(report, "report")?;
        let inputs = BoundInputs {
            eps: r.eps,
            n: r.n,
            t: r.t,
            p: r.p,
            r1: r.r1,
            r2: r.r2,
        };
        *out(out_bound, "out_bound")? = chen_stein_bound(&inputs, e_size)?;
        Ok(())
    })
}
