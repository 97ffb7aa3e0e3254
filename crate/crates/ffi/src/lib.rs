//! C ABI over `semfield`.
//!
//! Scenes and trained fields are opaque handles created by `sf_*_load` /
//! `sf_*_from_json` style constructors and released with the matching
//! `*_free`. Every fallible call returns an [`SfStatus`]; on failure the
//! message is kept per thread and read with [`sf_last_error`].
//!
//! Handles are not synchronized. Sharing one across threads is fine for the
//! `const` queries only.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use semfield::eval::{matching_percentage, snapshot};
use semfield::field::classify;
use semfield::geom::Point3;
use semfield::mapper::{
    evaluation_points, load_checkpoint, run_with_scene, save_checkpoint, Checkpoint, RunConfig, StreamSource,
};
use semfield::scene::Scene;
use semfield::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Format = 5,
    Version = 6,
    Runtime = 7,
    Panic = 8,
}

/// Analytic scene with ground-truth geometry and materials.
pub struct SfScene {
    inner: Scene,
}

/// Trained field together with its optimizer state.
pub struct SfField {
    inner: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SfStatus {
    match e {
        Error::Config(_) => SfStatus::Config,
        Error::Io { .. } => SfStatus::Io,
        Error::Format { .. } => SfStatus::Format,
        Error::Version { .. } => SfStatus::Version,
        Error::Dimension { .. } | Error::Index { .. } | Error::Contract(_) | Error::DegenerateDirection => {
            SfStatus::InvalidArgument
        }
        Error::Metric(_) | Error::Run(_) => SfStatus::Runtime,
    }
}

struct Fail(SfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SfStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, recording its error message and turning panics into `Panic`.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SfStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| (*s).to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SfStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn point_arg(p: *const f64) -> Result<Point3, Fail> {
    if p.is_null() {
        return Err(null("point"));
    }
    let s = std::slice::from_raw_parts(p, 3);
    Ok(Point3::new(s[0], s[1], s[2]))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a scene from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_scene_from_json(json: *const c_char, out: *mut *mut SfScene) -> SfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let scene = Scene::from_json_str(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(SfScene { inner: scene }));
        Ok(())
    })
}

/// Loads a scene file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_scene_load(path: *const c_char, out: *mut *mut SfScene) -> SfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let scene = Scene::load(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(SfScene { inner: scene }));
        Ok(())
    })
}

/// # Safety
/// `scene` must come from an `sf_scene_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sf_scene_free(scene: *mut SfScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Exact signed distance at `point` (three doubles).
///
/// # Safety
/// Pointers must be valid; `point` must hold three doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_scene_sdf(scene: *const SfScene, point: *const f64, out: *mut f64) -> SfStatus {
    guard(|| {
        let scene = ref_arg(scene, "scene")?;
        *out_arg(out, "out")? = scene.inner.sdf(&point_arg(point)?);
        Ok(())
    })
}

/// Ground-truth class index at a surface point. Fails with `InvalidArgument`
/// when the point is farther than the scene's surface tolerance.
///
/// # Safety
/// Pointers must be valid; `point` must hold three doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_scene_material(scene: *const SfScene, point: *const f64, out: *mut u32) -> SfStatus {
    guard(|| {
        let scene = ref_arg(scene, "scene")?;
        let m = scene.inner.true_material(&point_arg(point)?)?;
        *out_arg(out, "out")? = m.index() as u32;
        Ok(())
    })
}

/// Loads a `.sfck` checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_field_load(path: *const c_char, out: *mut *mut SfField) -> SfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ck = load_checkpoint(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(SfField { inner: ck }));
        Ok(())
    })
}

/// Writes the field and optimizer state as a `.sfck` checkpoint.
///
/// # Safety
/// `field` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sf_field_save(field: *const SfField, path: *const c_char) -> SfStatus {
    guard(|| {
        let f = &ref_arg(field, "field")?.inner;
        save_checkpoint(Path::new(str_arg(path, "path")?), &f.field, &f.adam, f.timestep)?;
        Ok(())
    })
}

/// # Safety
/// `field` must come from an `sf_field_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sf_field_free(field: *mut SfField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Number of material classes the field predicts.
///
/// # Safety
/// `field` must be a live handle or NULL (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn sf_field_num_classes(field: *const SfField) -> usize {
    field.as_ref().map_or(0, |f| f.inner.field.config().num_classes)
}

/// Evaluates `n` points (`3n` doubles). Writes `n` distances to `sdf_out`,
/// `n` argmax classes to `class_out` and `n * num_classes` softmax
/// probabilities to `prob_out`. Any of the three outputs may be NULL.
///
/// # Safety
/// Non-NULL buffers must have the sizes above.
#[no_mangle]
pub unsafe extern "C" fn sf_field_query(
    field: *const SfField,
    points: *const f64,
    n: usize,
    sdf_out: *mut f32,
    class_out: *mut u32,
    prob_out: *mut f32,
) -> SfStatus {
    guard(|| {
        let f = &ref_arg(field, "field")?.inner.field;
        if n == 0 {
            return Ok(());
        }
        if points.is_null() {
            return Err(null("points"));
        }
        let raw = std::slice::from_raw_parts(points, 3 * n);
        let pts: Vec<Point3> = raw.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect();
        let outs = f.forward(&pts)?;
        let k = f.config().num_classes;
        for (i, o) in outs.iter().enumerate() {
            if !sdf_out.is_null() {
                *sdf_out.add(i) = o.sdf;
            }
            let (class, probs) = classify(&o.logits);
            if !class_out.is_null() {
                *class_out.add(i) = class as u32;
            }
            if !prob_out.is_null() {
                std::slice::from_raw_parts_mut(prob_out.add(i * k), k).copy_from_slice(&probs);
            }
        }
        Ok(())
    })
}

/// Matching percentage of the field on `n_points` ROI samples drawn with `seed`.
///
/// # Safety
/// Pointers must be valid handles.
#[no_mangle]
pub unsafe extern "C" fn sf_field_matching_percentage(
    field: *const SfField,
    scene: *const SfScene,
    n_points: usize,
    seed: u64,
    out: *mut f64,
) -> SfStatus {
    guard(|| {
        let f = &ref_arg(field, "field")?.inner.field;
        let scene = &ref_arg(scene, "scene")?.inner;
        let out = out_arg(out, "out")?;
        if n_points == 0 {
            return Err(Fail(SfStatus::InvalidArgument, "n_points must be positive".into()));
        }
        let eval = evaluation_points(scene, n_points, seed)?;
        *out = matching_percentage(&snapshot(f, scene, &eval)?)?;
        Ok(())
    })
}

/// Trains a field on a simulated stream over `scene`. `config_json` uses the
/// run-config schema; its `scene` entry is ignored. `final_pct` may be NULL.
///
/// # Safety
/// `config_json` must be NUL-terminated; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sf_run_mapping(
    scene: *const SfScene,
    config_json: *const c_char,
    out: *mut *mut SfField,
    final_pct: *mut f64,
) -> SfStatus {
    guard(|| {
        let scene = &ref_arg(scene, "scene")?.inner;
        let out = out_arg(out, "out")?;
        let cfg = RunConfig::from_json_str(str_arg(config_json, "config_json")?)?;
        let (field, adam, report) = run_with_scene(&cfg, scene, StreamSource::Simulate, |_, _| Ok(()))?;
        if let Some(p) = final_pct.as_mut() {
            *p = report.final_matching_pct().unwrap_or(f64::NAN);
        }
        *out = Box::into_raw(Box::new(SfField {
            inner: Checkpoint {
                field,
                adam,
                timestep: report.timesteps,
            },
        }));
        Ok(())
    })
}
