//! C ABI over `ttfs-dendrites`.
//!
//! Every handle is opaque and owned by the caller once returned; release it
//! with the matching `*_free`. Fallible calls return a [`TtfsStatus`] and
//! leave a message for [`ttfs_last_error`] on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ttfs_dendrites::data::{encode_ttfs, encode_ttfs_steps};
use ttfs_dendrites::emu::{EmulatorOptions, Pipeline};
use ttfs_dendrites::harness::Checkpoint;
use ttfs_dendrites::quant::{export_memory_image, quantize_model, quantized_inference, MemoryImage, QuantizedModel};
use ttfs_dendrites::{Error, Network};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TtfsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Dimension = 5,
    Quantization = 6,
    Emulator = 7,
    Internal = 8,
    Panic = 9,
}

/// A trained floating-point network.
pub struct TtfsModel(Network);

/// A fixed-point network.
pub struct TtfsQuantized(QuantizedModel);

/// Packed synapse and dendrite memories.
pub struct TtfsImage(MemoryImage);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TtfsStatus {
    match e {
        Error::Config(_) | Error::TaskOutOfRange { .. } | Error::EmptyBatch | Error::EmptyTestSet => {
            TtfsStatus::InvalidArgument
        }
        Error::MissingPath(_) | Error::Io { .. } => TtfsStatus::Io,
        Error::Parse { .. } | Error::Format(_) | Error::Json(_) => TtfsStatus::Format,
        Error::Dimension { .. } => TtfsStatus::Dimension,
        Error::Quantization(_) => TtfsStatus::Quantization,
        Error::Emulator(_) => TtfsStatus::Emulator,
        #[allow(unreachable_patterns)]
        _ => TtfsStatus::Internal,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TtfsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TtfsStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            TtfsStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            TtfsStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(Error::Config("path is not valid UTF-8".into())))?;
    Ok(PathBuf::from(s))
}

unsafe fn pixels_arg<'a>(p: *const u8, len: usize, expected: usize) -> Result<&'a [u8], Failure> {
    if p.is_null() {
        return Err(Failure::Null("pixels"));
    }
    if len != expected {
        return Err(Failure::Lib(Error::Dimension {
            context: "pixel count".into(),
            expected,
            actual: len,
        }));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ttfs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ttfs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads the network from a training checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ttfs_model_load(path: *const c_char, out: *mut *mut TtfsModel) -> TtfsStatus {
    guard(|| {
        let path = path_arg(path)?;
        let ck = Checkpoint::load(&path)?;
        put(out, Box::into_raw(Box::new(TtfsModel(ck.network))), "out")
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ttfs_model_free(model: *mut TtfsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of input pixels, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ttfs_model_input_size(model: *const TtfsModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.config.input_size())
}

/// Number of tasks, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ttfs_model_task_count(model: *const TtfsModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.config.n_tasks)
}

/// Classifies one 8-bit image under `task`.
///
/// # Safety
/// `pixels` must point to `len` bytes; `out_class` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ttfs_model_predict(
    model: *const TtfsModel,
    pixels: *const u8,
    len: usize,
    task: usize,
    out_class: *mut u32,
) -> TtfsStatus {
    guard(|| {
        let m = &non_null(model, "model")?.0;
        let px = pixels_arg(pixels, len, m.config.input_size())?;
        let class = m.predict(&encode_ttfs(px, &m.config), task)?;
        put(out_class, class as u32, "out_class")
    })
}

/// Quantizes the network to 4-bit weights and 8-bit delays.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ttfs_model_quantize(model: *const TtfsModel, out: *mut *mut TtfsQuantized) -> TtfsStatus {
    guard(|| {
        let q = quantize_model(&non_null(model, "model")?.0)?;
        put(out, Box::into_raw(Box::new(TtfsQuantized(q))), "out")
    })
}

/// # Safety
/// `q` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ttfs_quantized_free(q: *mut TtfsQuantized) {
    if !q.is_null() {
        drop(Box::from_raw(q));
    }
}

/// Classifies one image with the discrete fixed-point reference inference.
///
/// # Safety
/// As for [`ttfs_model_predict`].
#[no_mangle]
pub unsafe extern "C" fn ttfs_quantized_predict(
    q: *const TtfsQuantized,
    pixels: *const u8,
    len: usize,
    task: usize,
    out_class: *mut u32,
) -> TtfsStatus {
    guard(|| {
        let q = &non_null(q, "quantized")?.0;
        let px = pixels_arg(pixels, len, q.input_size())?;
        let r = quantized_inference(q, &encode_ttfs_steps(px, q.t_max), task)?;
        put(out_class, r.prediction as u32, "out_class")
    })
}

/// Packs a quantized network into memory words.
///
/// # Safety
/// `q` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ttfs_image_export(q: *const TtfsQuantized, out: *mut *mut TtfsImage) -> TtfsStatus {
    guard(|| {
        let image = export_memory_image(&non_null(q, "quantized")?.0)?;
        put(out, Box::into_raw(Box::new(TtfsImage(image))), "out")
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ttfs_image_load(path: *const c_char, out: *mut *mut TtfsImage) -> TtfsStatus {
    guard(|| {
        let image = MemoryImage::load(&path_arg(path)?)?;
        put(out, Box::into_raw(Box::new(TtfsImage(image))), "out")
    })
}

/// # Safety
/// `image` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ttfs_image_save(image: *const TtfsImage, path: *const c_char) -> TtfsStatus {
    guard(|| {
        let image = non_null(image, "image")?;
        image.0.save(&path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `image` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ttfs_image_free(image: *mut TtfsImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Number of output neurons of the image, or 0 for NULL.
///
/// # Safety
/// `image` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ttfs_image_output_size(image: *const TtfsImage) -> usize {
    image.as_ref().and_then(|i| i.0.layers.last()).map_or(0, |l| l.neurons)
}

/// Runs one image through the hardware emulator. `out_times` receives one
/// spike timestep per output neuron (-1 for no spike) and must hold
/// `out_len >= ttfs_image_output_size(image)` entries; it may be NULL when
/// `out_len` is 0.
///
/// # Safety
/// `pixels` must point to `len` bytes, `out_times` to `out_len` writable
/// `int32_t`, and `out_class` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ttfs_emulate(
    image: *const TtfsImage,
    pixels: *const u8,
    len: usize,
    task: usize,
    out_class: *mut u32,
    out_times: *mut i32,
    out_len: usize,
) -> TtfsStatus {
    guard(|| {
        let image = &non_null(image, "image")?.0;
        let mut pipe = Pipeline::from_image(image, EmulatorOptions::default())?;
        let px = pixels_arg(pixels, len, pipe.input_size())?;
        let r = pipe.run_inference(&encode_ttfs_steps(px, image.t_max), task)?;
        let output = r.layers.last().expect("image has layers");
        if out_len > 0 {
            if out_times.is_null() {
                return Err(Failure::Null("out_times"));
            }
            if out_len < output.len() {
                return Err(Failure::Lib(Error::Dimension {
                    context: "out_times length".into(),
                    expected: output.len(),
                    actual: out_len,
                }));
            }
            let dst = std::slice::from_raw_parts_mut(out_times, out_len);
            for (d, s) in dst.iter_mut().zip(output) {
                *d = s.map_or(-1, i32::from);
            }
        }
        put(out_class, r.prediction as u32, "out_class")
    })
}
