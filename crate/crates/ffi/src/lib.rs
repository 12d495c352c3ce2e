//! C ABI over the jamlink core.
//!
//! Designs live behind an opaque `JlDesign` handle created from the same
//! JSON document the CLI reads. Every fallible call returns a `JlStatus`
//! whose values match the CLI exit codes; `jl_last_error` gives the message
//! of the most recent failure on the calling thread. Strings handed out by
//! the library must be released with `jl_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use jamlink::design::{report_design, DesignFile};
use jamlink::pattern::{export_svg, generate_cut_pattern, PatternOptions};
use jamlink::sheath::{derive_lengths, jamming_holding_force, max_bend_angle_with, AngleKernel};
use jamlink::spine::{central_gap, check_compatibility, max_beam_length, spine_envelope};
use jamlink::stiffness::{predict_max_force, LinkVariant, StiffnessModelParams, VariantKind};
use jamlink::Error;

/// Result of every fallible call. Values 0 to 6 equal the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JlStatus {
    Ok = 0,
    Failure = 1,
    Invalid = 2,
    Infeasible = 3,
    Io = 4,
    MissingModel = 5,
    Domain = 6,
    NullPointer = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JlKernel {
    Asin = 0,
    Sinh = 1,
    Linear = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JlVariant {
    Granular = 0,
    Layer = 1,
    LayerWithSpine = 2,
}

/// Sheath length limits, mm.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JlLengths {
    pub l_max: f64,
    pub l_min: f64,
    pub l_default: f64,
}

/// Spine lengths, mm.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JlSpineEnvelope {
    pub neutral_length: f64,
    pub compressed_length: f64,
    pub extended_length: f64,
    pub rigid_length: f64,
    pub flexible_travel: f64,
}

/// Opaque design handle.
pub struct JlDesign {
    file: DesignFile,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> JlStatus {
    match e.exit_code() {
        2 => JlStatus::Invalid,
        3 => JlStatus::Infeasible,
        4 => JlStatus::Io,
        5 => JlStatus::MissingModel,
        6 => JlStatus::Domain,
        _ => JlStatus::Failure,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (JlStatus, String)>) -> JlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => JlStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            JlStatus::Panic
        }
    }
}

fn core(e: Error) -> (JlStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (JlStatus, String) {
    (JlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn design<'a>(handle: *const JlDesign) -> Result<&'a JlDesign, (JlStatus, String)> {
    handle.as_ref().ok_or_else(|| null("design handle"))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), (JlStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

fn kernel(k: JlKernel) -> AngleKernel {
    match k {
        JlKernel::Asin => AngleKernel::Asin,
        JlKernel::Sinh => AngleKernel::Sinh,
        JlKernel::Linear => AngleKernel::Linear,
    }
}

fn into_c_string(s: String) -> Result<*mut c_char, (JlStatus, String)> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| (JlStatus::Failure, "output contains a nul byte".to_string()))
}

/// Parses a design JSON document into a new handle.
///
/// # Safety
/// `json` must be a valid nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jl_design_from_json(
    json: *const c_char,
    out: *mut *mut JlDesign,
) -> JlStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (JlStatus::Invalid, format!("json is not UTF-8: {e}")))?;
        let file = DesignFile::from_json(text).map_err(core)?;
        write(out, Box::into_raw(Box::new(JlDesign { file })))
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `design` must come from `jl_design_from_json` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jl_design_free(design: *mut JlDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn jl_design_lengths(
    design: *const JlDesign,
    out: *mut JlLengths,
) -> JlStatus {
    guard(|| {
        let l = derive_lengths(&self::design(design)?.file.pattern).map_err(core)?;
        write(
            out,
            JlLengths {
                l_max: l.l_max,
                l_min: l.l_min,
                l_default: l.l_default,
            },
        )
    })
}

/// Maximum bend angle in degrees.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn jl_design_max_bend_angle(
    design: *const JlDesign,
    kernel: JlKernel,
    out: *mut f64,
) -> JlStatus {
    guard(|| {
        let v = max_bend_angle_with(&self::design(design)?.file.pattern, self::kernel(kernel))
            .map_err(core)?;
        write(out, v)
    })
}

/// Holding force at the design's jamming state, N.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn jl_design_holding_force(
    design: *const JlDesign,
    out: *mut f64,
) -> JlStatus {
    guard(|| {
        let d = self::design(design)?;
        let v = jamming_holding_force(&d.file.pattern, &d.file.jamming).map_err(core)?;
        write(out, v)
    })
}

fn spine_of(d: &JlDesign) -> Result<&jamlink::spine::SpineDesign, (JlStatus, String)> {
    d.file
        .spine
        .as_ref()
        .ok_or_else(|| (JlStatus::Invalid, "design has no spine".to_string()))
}

/// Central pass-through gap, mm. May be negative.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn jl_design_central_gap(design: *const JlDesign, out: *mut f64) -> JlStatus {
    guard(|| {
        let v = central_gap(spine_of(self::design(design)?)?).map_err(core)?;
        write(out, v)
    })
}

/// Longest ligament beam leaving `min_gap` mm at the centre.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn jl_design_max_beam_length(
    design: *const JlDesign,
    min_gap: f64,
    out: *mut f64,
) -> JlStatus {
    guard(|| {
        let v = max_beam_length(spine_of(self::design(design)?)?, min_gap).map_err(core)?;
        write(out, v)
    })
}

/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn jl_design_spine_envelope(
    design: *const JlDesign,
    out: *mut JlSpineEnvelope,
) -> JlStatus {
    guard(|| {
        let e = spine_envelope(spine_of(self::design(design)?)?).map_err(core)?;
        write(
            out,
            JlSpineEnvelope {
                neutral_length: e.neutral_length,
                compressed_length: e.compressed_length,
                extended_length: e.extended_length,
                rigid_length: e.rigid_length,
                flexible_travel: e.flexible_travel,
            },
        )
    })
}

/// Writes 1 to `pass` when the spine never limits the sheath, else 0.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn jl_design_compatibility(
    design: *const JlDesign,
    pass: *mut i32,
) -> JlStatus {
    guard(|| {
        let d = self::design(design)?;
        let spine = spine_envelope(spine_of(d)?).map_err(core)?;
        let sheath = derive_lengths(&d.file.pattern).map_err(core)?;
        write(pass, i32::from(check_compatibility(&spine, &sheath).pass))
    })
}

/// Peak force of the 10 mm push test, N. Uses the design's stiffness model,
/// or the built-in defaults when `use_default_model` is non-zero and the
/// design has none.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn jl_design_predict_max_force(
    design: *const JlDesign,
    variant: JlVariant,
    bend_angle: f64,
    use_default_model: i32,
    out: *mut f64,
) -> JlStatus {
    guard(|| {
        let d = self::design(design)?;
        let params = match (&d.file.stiffness_model, use_default_model != 0) {
            (Some(p), _) => p.clone(),
            (None, true) => StiffnessModelParams::default(),
            (None, false) => {
                return Err(core(Error::MissingModel(
                    "design has no stiffness_model".to_string(),
                )))
            }
        };
        let kind = match variant {
            JlVariant::Granular => VariantKind::Granular,
            JlVariant::Layer => VariantKind::Layer,
            JlVariant::LayerWithSpine => VariantKind::LayerWithSpine,
        };
        let v = LinkVariant::from_parts(kind, &d.file.pattern, d.file.spine.as_ref())
            .and_then(|v| predict_max_force(&v, bend_angle, &d.file.jamming, &params))
            .map_err(core)?;
        write(out, v)
    })
}

/// Cut pattern as an SVG document, with default layout options.
///
/// # Safety
/// Pointers must be valid or null. Free the result with `jl_string_free`.
#[no_mangle]
pub unsafe extern "C" fn jl_design_pattern_svg(
    design: *const JlDesign,
    scale: f64,
    out: *mut *mut c_char,
) -> JlStatus {
    guard(|| {
        let d = self::design(design)?;
        let cut =
            generate_cut_pattern(&d.file.pattern, &PatternOptions::default()).map_err(core)?;
        write(out, into_c_string(export_svg(&cut, scale))?)
    })
}

/// Full design report as JSON (asin kernel, 7.5 mm beam-limit gap).
///
/// # Safety
/// Pointers must be valid or null. Free the result with `jl_string_free`.
#[no_mangle]
pub unsafe extern "C" fn jl_design_report_json(
    design: *const JlDesign,
    out: *mut *mut c_char,
) -> JlStatus {
    guard(|| {
        let d = self::design(design)?;
        let report =
            report_design(&d.file.name, &d.file.link(), AngleKernel::Asin, 7.5).map_err(core)?;
        let text = serde_json::to_string_pretty(&report)
            .map_err(|e| (JlStatus::Failure, e.to_string()))?;
        write(out, into_c_string(text)?)
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn jl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}
