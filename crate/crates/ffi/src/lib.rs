//! C ABI over the `mekd` library.
//!
//! Conventions:
//! - every fallible function returns a [`MekdStatus`]; results are written
//!   through out-pointers only on success
//! - on failure, [`mekd_last_error_message`] describes the error for the
//!   calling thread
//! - networks and datasets are opaque handles released with their `_free`
//!   function; passing NULL to a `_free` function is a no-op
//! - panics never cross the boundary; they are reported as
//!   `MEKD_STATUS_PANIC`

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use mekd::autodiff::checkpoint;
use mekd::data::{parse_idx, Dataset};
use mekd::distill::kld_loss;
use mekd::harness::{run_pipeline, RunConfig};
use mekd::metrics::{accuracy, frechet_distance};
use mekd::nets::{Network, NetworkSpec, ProbVector};
use mekd::{Error, Tensor};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MekdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Contract = 4,
    Config = 5,
    Format = 6,
    NonFinite = 7,
    Diverged = 8,
    Io = 9,
    Check = 10,
    Panic = 11,
    Internal = 12,
}

/// Opaque network handle.
pub struct MekdNetwork {
    inner: Network,
}

/// Opaque dataset handle.
pub struct MekdDataset {
    inner: Dataset,
}

/// Headline numbers of a full pipeline run.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MekdPipelineSummary {
    pub teacher_acc: f64,
    pub generator_fid: f64,
    pub initial_generator_fid: f64,
    pub mekd_student_acc: f64,
    pub kd_student_acc: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: MekdStatus,
    message: String,
}

impl Failure {
    fn new(status: MekdStatus, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Shape { .. } => MekdStatus::Shape,
            Error::Contract(_) => MekdStatus::Contract,
            Error::Config(_) => MekdStatus::Config,
            Error::Format(_) => MekdStatus::Format,
            Error::NonFinite { .. } => MekdStatus::NonFinite,
            Error::Diverged { .. } => MekdStatus::Diverged,
            Error::Io(_) => MekdStatus::Io,
            Error::Check(_) => MekdStatus::Check,
            _ => MekdStatus::Internal,
        };
        Self { status, message: e.to_string() }
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MekdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MekdStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            MekdStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be NULL or point to `len` readable values.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(MekdStatus::NullPointer, format!("{what} is NULL")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be NULL or point to a live value of `T`.
unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::new(MekdStatus::NullPointer, format!("{what} is NULL")))
}

/// # Safety
/// `p` must be NULL or a NUL-terminated string.
unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(MekdStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(MekdStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn matrix(values: &[f64], rows: usize, cols: usize, what: &str) -> Result<Tensor, Failure> {
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Failure::new(MekdStatus::InvalidArgument, format!("{what} is too large")))?;
    if n != values.len() {
        return Err(Failure::new(MekdStatus::Shape, format!("{what} has {} values, expected {n}", values.len())));
    }
    Ok(Tensor::matrix(rows, cols, values.to_vec())?)
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mekd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mekd_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

/// # Safety
/// `hidden` must point to `n_hidden` values (or be NULL when `n_hidden` is
/// 0) and `out` must be writable.
unsafe fn new_network(spec: NetworkSpec, name: &str, seed: u64, out: *mut *mut MekdNetwork) -> Result<(), Failure> {
    let out = out_ref(out, "out")?;
    let net = Network::build(spec, name, seed)?;
    *out = Box::into_raw(Box::new(MekdNetwork { inner: net }));
    Ok(())
}

/// Builds a classifier MLP `input_dim → hidden… → classes`.
///
/// # Safety
/// `hidden` must point to `n_hidden` values (NULL allowed when 0); `out`
/// must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn mekd_classifier_new(
    input_dim: usize,
    classes: usize,
    hidden: *const usize,
    n_hidden: usize,
    seed: u64,
    out: *mut *mut MekdNetwork,
) -> MekdStatus {
    guard(|| {
        let hidden = slice(hidden, n_hidden, "hidden")?.to_vec();
        new_network(NetworkSpec::classifier(input_dim, classes, hidden), "classifier", seed, out)
    })
}

/// Builds a generator MLP `classes → hidden… → dim` with outputs in `[0, 1]`.
///
/// # Safety
/// As [`mekd_classifier_new`].
#[no_mangle]
pub unsafe extern "C" fn mekd_generator_new(
    classes: usize,
    dim: usize,
    hidden: *const usize,
    n_hidden: usize,
    seed: u64,
    out: *mut *mut MekdNetwork,
) -> MekdStatus {
    guard(|| {
        let hidden = slice(hidden, n_hidden, "hidden")?.to_vec();
        new_network(NetworkSpec::generator(classes, dim, hidden), "generator", seed, out)
    })
}

/// # Safety
/// `net` must be NULL or a handle returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mekd_network_free(net: *mut MekdNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be a live handle; `input_dim` and `output_dim` writable.
#[no_mangle]
pub unsafe extern "C" fn mekd_network_dims(
    net: *const MekdNetwork,
    input_dim: *mut usize,
    output_dim: *mut usize,
) -> MekdStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| Failure::new(MekdStatus::NullPointer, "net is NULL"))?;
        *out_ref(input_dim, "input_dim")? = net.inner.input_dim();
        *out_ref(output_dim, "output_dim")? = net.inner.output_dim();
        Ok(())
    })
}

/// Writes the parameters to `path` (written to a temp file, then renamed).
///
/// # Safety
/// `net` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mekd_network_save(net: *const MekdNetwork, path: *const c_char) -> MekdStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| Failure::new(MekdStatus::NullPointer, "net is NULL"))?;
        let path = PathBuf::from(string(path, "path")?);
        checkpoint::save(&path, &net.inner.export_params())?;
        Ok(())
    })
}

/// Replaces the parameters with those stored at `path`. Shapes must match
/// the network's architecture.
///
/// # Safety
/// `net` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mekd_network_load(net: *mut MekdNetwork, path: *const c_char) -> MekdStatus {
    guard(|| {
        let net = net.as_mut().ok_or_else(|| Failure::new(MekdStatus::NullPointer, "net is NULL"))?;
        let path = PathBuf::from(string(path, "path")?);
        let params = checkpoint::load(&path)?;
        net.inner.load_params(&params)?;
        Ok(())
    })
}

/// Forward pass on `rows` row-major inputs. Writes `rows × output_dim`
/// values (probabilities for classifiers, images for generators).
///
/// # Safety
/// `x` must point to `rows × input_dim` values and `out` to `out_len`
/// writable values.
#[no_mangle]
pub unsafe extern "C" fn mekd_network_forward(
    net: *const MekdNetwork,
    x: *const f64,
    rows: usize,
    out: *mut f64,
    out_len: usize,
) -> MekdStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| Failure::new(MekdStatus::NullPointer, "net is NULL"))?;
        let n_in = rows.saturating_mul(net.inner.input_dim());
        let x = matrix(slice(x, n_in, "x")?, rows, net.inner.input_dim(), "x")?;
        let y = net.inner.predict(&x)?;
        if y.len() != out_len {
            return Err(Failure::new(MekdStatus::Shape, format!("out has {out_len} slots, need {}", y.len())));
        }
        if out.is_null() {
            return Err(Failure::new(MekdStatus::NullPointer, "out is NULL"));
        }
        std::slice::from_raw_parts_mut(out, out_len).copy_from_slice(y.values());
        Ok(())
    })
}

/// Batch-mean `KL(p_teacher ‖ p_student)` after softening both at `tau`.
///
/// # Safety
/// Both inputs must point to `rows × classes` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mekd_kld(
    p_teacher: *const f64,
    p_student: *const f64,
    rows: usize,
    classes: usize,
    tau: f64,
    out: *mut f64,
) -> MekdStatus {
    guard(|| {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Failure::new(MekdStatus::InvalidArgument, "tau must be positive"));
        }
        let n = rows.saturating_mul(classes);
        let to_probs = |v: &[f64]| -> Result<Vec<ProbVector>, Failure> {
            v.chunks(classes.max(1)).map(|r| ProbVector::new(r.to_vec()).map_err(Failure::from)).collect()
        };
        let t = to_probs(slice(p_teacher, n, "p_teacher")?)?;
        let s = to_probs(slice(p_student, n, "p_student")?)?;
        *out_ref(out, "out")? = kld_loss(&t, &s, tau)?;
        Ok(())
    })
}

/// Fréchet distance between two row-major sample sets of dimension `dim`.
///
/// # Safety
/// `a` must point to `rows_a × dim` values, `b` to `rows_b × dim`; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn mekd_frechet_distance(
    a: *const f64,
    rows_a: usize,
    b: *const f64,
    rows_b: usize,
    dim: usize,
    out: *mut f64,
) -> MekdStatus {
    guard(|| {
        let ta = matrix(slice(a, rows_a.saturating_mul(dim), "a")?, rows_a, dim, "a")?;
        let tb = matrix(slice(b, rows_b.saturating_mul(dim), "b")?, rows_b, dim, "b")?;
        *out_ref(out, "out")? = frechet_distance(&ta, &tb)?;
        Ok(())
    })
}

/// Parses in-memory IDX image and label files into a dataset.
///
/// # Safety
/// `images` must point to `images_len` bytes, `labels` to `labels_len`
/// bytes; `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn mekd_dataset_parse_idx(
    images: *const u8,
    images_len: usize,
    labels: *const u8,
    labels_len: usize,
    out: *mut *mut MekdDataset,
) -> MekdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let ds = parse_idx(slice(images, images_len, "images")?, slice(labels, labels_len, "labels")?)?;
        *out = Box::into_raw(Box::new(MekdDataset { inner: ds }));
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live handle; the out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn mekd_dataset_shape(
    ds: *const MekdDataset,
    len: *mut usize,
    dim: *mut usize,
    classes: *mut usize,
) -> MekdStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| Failure::new(MekdStatus::NullPointer, "ds is NULL"))?;
        *out_ref(len, "len")? = ds.inner.len();
        *out_ref(dim, "dim")? = ds.inner.dim();
        *out_ref(classes, "classes")? = ds.inner.classes();
        Ok(())
    })
}

/// # Safety
/// `ds` must be NULL or a handle returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mekd_dataset_free(ds: *mut MekdDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Top-1 accuracy of a classifier on a dataset.
///
/// # Safety
/// `net` and `ds` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mekd_accuracy(net: *const MekdNetwork, ds: *const MekdDataset, out: *mut f64) -> MekdStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| Failure::new(MekdStatus::NullPointer, "net is NULL"))?;
        let ds = ds.as_ref().ok_or_else(|| Failure::new(MekdStatus::NullPointer, "ds is NULL"))?;
        *out_ref(out, "out")? = accuracy(&net.inner, &ds.inner)?;
        Ok(())
    })
}

/// Runs teacher training, GAN training and both distillation methods from
/// a configuration text. `out_dir` overrides the configured directory when
/// not NULL.
///
/// # Safety
/// `config_text` must be a NUL-terminated string, `out_dir` NULL or a
/// NUL-terminated string, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mekd_run_pipeline(
    config_text: *const c_char,
    out_dir: *const c_char,
    out: *mut MekdPipelineSummary,
) -> MekdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let mut cfg = RunConfig::parse(string(config_text, "config_text")?)?;
        if !out_dir.is_null() {
            cfg.out_dir = PathBuf::from(string(out_dir, "out_dir")?);
        }
        let run = run_pipeline(&cfg)?;
        *out = MekdPipelineSummary {
            teacher_acc: run.teacher.test_acc,
            generator_fid: run.gan.fid,
            initial_generator_fid: run.gan.initial_fid,
            mekd_student_acc: run.mekd.row.student_acc,
            kd_student_acc: run.kd.row.student_acc,
        };
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_status() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, MekdStatus::Panic);
        let msg = unsafe { CStr::from_ptr(mekd_last_error_message()) };
        assert_eq!(msg.to_str().unwrap(), "panic: boom");
    }

    #[test]
    fn error_kinds_map_to_codes() {
        assert_eq!(Failure::from(Error::Config("x".into())).status, MekdStatus::Config);
        assert_eq!(Failure::from(Error::Format("x".into())).status, MekdStatus::Format);
        assert_eq!(
            Failure::from(Error::Diverged { epoch: 0, step: 0, detail: String::new() }).status,
            MekdStatus::Diverged
        );
    }
}
