//! C ABI over the latent-base toolkit. Handles are opaque pointers to
//! loaded model bundles; every function returns an `LbStatus` code and
//! writes results through out-pointers. All pointers must stay valid for
//! the duration of the call; buffers are caller-allocated.

use latent_base::bundle::load_bundle;
use latent_base::error::Error;
use latent_base::implicit::{BaseDistribution, Mapping};
use latent_base::kde::{kde_score, KdeConfig};
use latent_base::numerics::SeededRng;
use libc::{c_char, size_t};
use std::ffi::CStr;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    InvalidBundle = 4,
    DimensionMismatch = 5,
    NumericalFailure = 6,
    MissingBase = 7,
    Unsupported = 8,
    BadArgument = 9,
    Panic = 10,
}

fn status_of(err: &Error) -> LbStatus {
    match err {
        Error::Io(_) | Error::Json(_) => LbStatus::Io,
        Error::InvalidBundle(_) => LbStatus::InvalidBundle,
        Error::DimensionMismatch { .. } => LbStatus::DimensionMismatch,
        Error::NotPositiveDefinite { .. }
        | Error::NonFiniteLoss { .. }
        | Error::NonFiniteObjective { .. } => LbStatus::NumericalFailure,
        Error::ExactVolumeUnavailable => LbStatus::Unsupported,
        Error::Config(_) => LbStatus::BadArgument,
        _ => LbStatus::Unsupported,
    }
}

/// Opaque model handle: a loaded bundle (mapping plus optional base).
pub struct LbModel {
    mapping: Mapping,
    base: Option<BaseDistribution>,
}

/// Static, NUL-terminated description of a status code.
#[no_mangle]
pub extern "C" fn lb_status_message(status: LbStatus) -> *const c_char {
    let msg: &'static [u8] = match status {
        LbStatus::Ok => b"ok\0",
        LbStatus::NullPointer => b"null pointer argument\0",
        LbStatus::InvalidUtf8 => b"path is not valid UTF-8\0",
        LbStatus::Io => b"I/O error\0",
        LbStatus::InvalidBundle => b"invalid model bundle\0",
        LbStatus::DimensionMismatch => b"dimension mismatch\0",
        LbStatus::NumericalFailure => b"numerical failure\0",
        LbStatus::MissingBase => b"bundle has no base distribution\0",
        LbStatus::Unsupported => b"operation unsupported for this model\0",
        LbStatus::BadArgument => b"bad argument\0",
        LbStatus::Panic => b"internal panic\0",
    };
    msg.as_ptr() as *const c_char
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Load a model bundle directory. On success writes a handle that must be
/// released with `lb_model_free`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be a valid
/// pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn lb_model_load(
    path: *const c_char,
    out: *mut *mut LbModel,
) -> LbStatus {
    if path.is_null() || out.is_null() {
        return LbStatus::NullPointer;
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(p) => p,
        Err(_) => return LbStatus::InvalidUtf8,
    };
    let result = catch_unwind(AssertUnwindSafe(|| load_bundle(Path::new(path))));
    match result {
        Ok(Ok(bundle)) => {
            let handle = Box::new(LbModel {
                mapping: bundle.mapping,
                base: bundle.base,
            });
            *out = Box::into_raw(handle);
            LbStatus::Ok
        }
        Ok(Err(err)) => status_of(&err),
        Err(_) => LbStatus::Panic,
    }
}

/// Release a handle returned by `lb_model_load`. A null handle is a no-op.
///
/// # Safety
/// `model` must be a pointer previously returned by `lb_model_load` and not
/// yet freed.
#[no_mangle]
pub unsafe extern "C" fn lb_model_free(model: *mut LbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Observation-space dimension (0 for a null handle).
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lb_model_data_dim(model: *const LbModel) -> size_t {
    model.as_ref().map(|m| m.mapping.data_dim()).unwrap_or(0)
}

/// Latent-space dimension (0 for a null handle).
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lb_model_latent_dim(model: *const LbModel) -> size_t {
    model.as_ref().map(|m| m.mapping.latent_dim()).unwrap_or(0)
}

/// Whether the bundle carries a fitted base distribution.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lb_model_has_base(model: *const LbModel) -> bool {
    model.as_ref().map(|m| m.base.is_some()).unwrap_or(false)
}

unsafe fn slice_arg<'a>(ptr: *const f64, len: size_t) -> Option<&'a [f64]> {
    if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

/// Encode one observation into the latent space. `x_len` must equal the
/// data dimension and `out_len` the latent dimension.
///
/// # Safety
/// `model` must be a live handle; `x` must point to `x_len` readable f64s;
/// `out` must point to `out_len` writable f64s.
#[no_mangle]
pub unsafe extern "C" fn lb_model_encode(
    model: *const LbModel,
    x: *const f64,
    x_len: size_t,
    out: *mut f64,
    out_len: size_t,
) -> LbStatus {
    let Some(m) = model.as_ref() else {
        return LbStatus::NullPointer;
    };
    let Some(input) = slice_arg(x, x_len) else {
        return LbStatus::NullPointer;
    };
    if out.is_null() {
        return LbStatus::NullPointer;
    }
    if out_len != m.mapping.latent_dim() {
        return LbStatus::DimensionMismatch;
    }
    match catch_unwind(AssertUnwindSafe(|| m.mapping.encode(input))) {
        Ok(Ok(h)) => {
            std::ptr::copy_nonoverlapping(h.as_ptr(), out, h.len());
            LbStatus::Ok
        }
        Ok(Err(err)) => status_of(&err),
        Err(_) => LbStatus::Panic,
    }
}

/// Decode one latent vector into the observation space. `h_len` must equal
/// the latent dimension and `out_len` the data dimension.
///
/// # Safety
/// Same buffer rules as `lb_model_encode`, with roles swapped.
#[no_mangle]
pub unsafe extern "C" fn lb_model_decode(
    model: *const LbModel,
    h: *const f64,
    h_len: size_t,
    out: *mut f64,
    out_len: size_t,
) -> LbStatus {
    let Some(m) = model.as_ref() else {
        return LbStatus::NullPointer;
    };
    let Some(input) = slice_arg(h, h_len) else {
        return LbStatus::NullPointer;
    };
    if out.is_null() {
        return LbStatus::NullPointer;
    }
    if out_len != m.mapping.data_dim() {
        return LbStatus::DimensionMismatch;
    }
    match catch_unwind(AssertUnwindSafe(|| m.mapping.decode(input))) {
        Ok(Ok(x)) => {
            std::ptr::copy_nonoverlapping(x.as_ptr(), out, x.len());
            LbStatus::Ok
        }
        Ok(Err(err)) => status_of(&err),
        Err(_) => LbStatus::Panic,
    }
}

fn model_of(m: &LbModel) -> Result<latent_base::implicit::ImplicitModel, LbStatus> {
    let base = m.base.clone().ok_or(LbStatus::MissingBase)?;
    latent_base::implicit::ImplicitModel::new(m.mapping.clone(), base)
        .map_err(|e| status_of(&e))
}

/// Exact model log-density of one observation (invertible mappings only).
///
/// # Safety
/// `model` must be a live handle; `x` must point to `len` readable f64s;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lb_model_log_pdf(
    model: *const LbModel,
    x: *const f64,
    len: size_t,
    out: *mut f64,
) -> LbStatus {
    let Some(m) = model.as_ref() else {
        return LbStatus::NullPointer;
    };
    let Some(input) = slice_arg(x, len) else {
        return LbStatus::NullPointer;
    };
    if out.is_null() {
        return LbStatus::NullPointer;
    }
    let full = match model_of(m) {
        Ok(f) => f,
        Err(status) => return status,
    };
    match catch_unwind(AssertUnwindSafe(|| full.model_log_pdf(input))) {
        Ok(Ok(v)) => {
            *out = v;
            LbStatus::Ok
        }
        Ok(Err(err)) => status_of(&err),
        Err(_) => LbStatus::Panic,
    }
}

/// Base log-density of the embedding (volume term omitted); defined for
/// every mapping kind.
///
/// # Safety
/// Same rules as `lb_model_log_pdf`.
#[no_mangle]
pub unsafe extern "C" fn lb_model_proxy_log_pdf(
    model: *const LbModel,
    x: *const f64,
    len: size_t,
    out: *mut f64,
) -> LbStatus {
    let Some(m) = model.as_ref() else {
        return LbStatus::NullPointer;
    };
    let Some(input) = slice_arg(x, len) else {
        return LbStatus::NullPointer;
    };
    if out.is_null() {
        return LbStatus::NullPointer;
    }
    let full = match model_of(m) {
        Ok(f) => f,
        Err(status) => return status,
    };
    match catch_unwind(AssertUnwindSafe(|| full.proxy_log_pdf(input))) {
        Ok(Ok(v)) => {
            *out = v;
            LbStatus::Ok
        }
        Ok(Err(err)) => status_of(&err),
        Err(_) => LbStatus::Panic,
    }
}

/// Draw `n` decoded samples. `out` receives `n * data_dim` values row by
/// row; `labels` (optional, may be null) receives the component or state
/// index per sample. Sampling is deterministic in `seed`.
///
/// # Safety
/// `model` must be a live handle; `out` must hold `n * data_dim` writable
/// f64s; `labels`, when non-null, must hold `n` writable u32s.
#[no_mangle]
pub unsafe extern "C" fn lb_model_sample(
    model: *const LbModel,
    seed: u64,
    n: size_t,
    out: *mut f64,
    labels: *mut u32,
) -> LbStatus {
    let Some(m) = model.as_ref() else {
        return LbStatus::NullPointer;
    };
    if out.is_null() {
        return LbStatus::NullPointer;
    }
    if n == 0 {
        return LbStatus::BadArgument;
    }
    let full = match model_of(m) {
        Ok(f) => f,
        Err(status) => return status,
    };
    let result = catch_unwind(AssertUnwindSafe(|| {
        let mut rng = SeededRng::new(seed).substream("sample");
        full.sample(&mut rng, n)
    }));
    match result {
        Ok(Ok((samples, sample_labels))) => {
            let dim = full.mapping.data_dim();
            for (i, s) in samples.iter().enumerate() {
                std::ptr::copy_nonoverlapping(s.as_ptr(), out.add(i * dim), dim);
            }
            if !labels.is_null() {
                for (i, &l) in sample_labels.iter().enumerate() {
                    *labels.add(i) = l as u32;
                }
            }
            LbStatus::Ok
        }
        Ok(Err(err)) => status_of(&err),
        Err(_) => LbStatus::Panic,
    }
}

/// Kernel-density score of a test set under a sample set. Both buffers are
/// row-major `count x dim`. Writes the plain average density and the mean
/// log density.
///
/// # Safety
/// `test` must hold `n_test * dim` readable f64s, `samples`
/// `n_samples * dim`; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn lb_kde_score(
    test: *const f64,
    n_test: size_t,
    samples: *const f64,
    n_samples: size_t,
    dim: size_t,
    bandwidth_variance: f64,
    out_density: *mut f64,
    out_log_density: *mut f64,
) -> LbStatus {
    if test.is_null() || samples.is_null() || out_density.is_null() || out_log_density.is_null() {
        return LbStatus::NullPointer;
    }
    if n_test == 0 || n_samples == 0 || dim == 0 {
        return LbStatus::BadArgument;
    }
    let test_rows: Vec<Vec<f64>> = std::slice::from_raw_parts(test, n_test * dim)
        .chunks(dim)
        .map(|c| c.to_vec())
        .collect();
    let sample_rows: Vec<Vec<f64>> = std::slice::from_raw_parts(samples, n_samples * dim)
        .chunks(dim)
        .map(|c| c.to_vec())
        .collect();
    let cfg = KdeConfig {
        bandwidth_variance,
        samples_per_batch: n_samples,
    };
    match catch_unwind(AssertUnwindSafe(|| kde_score(&test_rows, &sample_rows, &cfg))) {
        Ok(Ok(score)) => {
            *out_density = score.density_mean;
            *out_log_density = score.log_density_mean;
            LbStatus::Ok
        }
        Ok(Err(err)) => status_of(&err),
        Err(_) => LbStatus::Panic,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use latent_base::bundle::{save_bundle, ModelBundle};
    use latent_base::gmm::GaussianMixture;
    use latent_base::invertible::InvertibleNet;
    use std::ffi::CString;

    fn write_test_bundle(dir: &Path) {
        let mut rng = SeededRng::new(1);
        let net = InvertibleNet::perceptron(2, 4, 6, &mut rng);
        let bundle = ModelBundle::new(
            1,
            Mapping::Invertible(net),
            Some(BaseDistribution::Gmm(GaussianMixture::standard(2))),
            serde_json_null(),
        );
        save_bundle(&bundle, dir).unwrap();
    }

    fn serde_json_null() -> serde_json::Value {
        serde_json::Value::Null
    }

    #[test]
    fn load_query_sample_free() {
        let dir = tempfile::tempdir().unwrap();
        let bundle_dir = dir.path().join("model");
        write_test_bundle(&bundle_dir);

        let c_path = CString::new(bundle_dir.to_str().unwrap()).unwrap();
        let mut handle: *mut LbModel = std::ptr::null_mut();
        unsafe {
            assert_eq!(lb_model_load(c_path.as_ptr(), &mut handle), LbStatus::Ok);
            assert_eq!(lb_model_data_dim(handle), 6);
            assert_eq!(lb_model_latent_dim(handle), 2);
            assert!(lb_model_has_base(handle));

            let x = [0.4, 0.5, 0.45, 0.55, 0.5, 0.6];
            let mut latent = [0.0; 2];
            assert_eq!(
                lb_model_encode(handle, x.as_ptr(), 6, latent.as_mut_ptr(), 2),
                LbStatus::Ok
            );
            let mut decoded = [0.0; 6];
            assert_eq!(
                lb_model_decode(handle, latent.as_ptr(), 2, decoded.as_mut_ptr(), 6),
                LbStatus::Ok
            );

            let mut log_pdf = 0.0;
            assert_eq!(
                lb_model_log_pdf(handle, x.as_ptr(), 6, &mut log_pdf),
                LbStatus::Ok
            );
            assert!(log_pdf.is_finite());
            let mut proxy = 0.0;
            assert_eq!(
                lb_model_proxy_log_pdf(handle, x.as_ptr(), 6, &mut proxy),
                LbStatus::Ok
            );

            let mut samples = vec![0.0; 5 * 6];
            let mut labels = vec![0u32; 5];
            assert_eq!(
                lb_model_sample(handle, 9, 5, samples.as_mut_ptr(), labels.as_mut_ptr()),
                LbStatus::Ok
            );
            let mut samples2 = vec![0.0; 5 * 6];
            assert_eq!(
                lb_model_sample(handle, 9, 5, samples2.as_mut_ptr(), std::ptr::null_mut()),
                LbStatus::Ok
            );
            assert_eq!(samples, samples2, "sampling must be seed-deterministic");

            lb_model_free(handle);
        }
    }

    #[test]
    fn error_paths() {
        let mut handle: *mut LbModel = std::ptr::null_mut();
        let missing = CString::new("/nonexistent/bundle").unwrap();
        unsafe {
            assert_eq!(
                lb_model_load(missing.as_ptr(), &mut handle),
                LbStatus::InvalidBundle
            );
            assert_eq!(
                lb_model_load(std::ptr::null(), &mut handle),
                LbStatus::NullPointer
            );
            // wrong out dimension
            let dir = tempfile::tempdir().unwrap();
            let bundle_dir = dir.path().join("model");
            write_test_bundle(&bundle_dir);
            let c_path = CString::new(bundle_dir.to_str().unwrap()).unwrap();
            assert_eq!(lb_model_load(c_path.as_ptr(), &mut handle), LbStatus::Ok);
            let x = [0.0; 6];
            let mut out = [0.0; 3];
            assert_eq!(
                lb_model_encode(handle, x.as_ptr(), 6, out.as_mut_ptr(), 3),
                LbStatus::DimensionMismatch
            );
            lb_model_free(handle);
            lb_model_free(std::ptr::null_mut());
        }
        // status strings are NUL-terminated and non-empty
        unsafe {
            let msg = CStr::from_ptr(lb_status_message(LbStatus::InvalidBundle));
            assert!(!msg.to_bytes().is_empty());
            let version = CStr::from_ptr(lb_version());
            assert!(!version.to_bytes().is_empty());
        }
    }

    #[test]
    fn kde_score_through_ffi() {
        let test = [0.0f64, 0.0];
        let samples = [0.0f64, 0.0];
        let mut density = 0.0;
        let mut log_density = 0.0;
        unsafe {
            assert_eq!(
                lb_kde_score(
                    test.as_ptr(),
                    1,
                    samples.as_ptr(),
                    1,
                    2,
                    0.1,
                    &mut density,
                    &mut log_density
                ),
                LbStatus::Ok
            );
        }
        let expect = 1.0 / (2.0 * std::f64::consts::PI * 0.1);
        assert!((density - expect).abs() < 1e-12);
    }
}
