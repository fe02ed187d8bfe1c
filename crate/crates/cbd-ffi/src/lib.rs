//! C ABI over the bit-plane compression core.
//!
//! Every fallible entry point returns a [`CbdStatus`]; `CbdOk` means the out
//! parameters were written. Handles are opaque and must be released with the
//! matching `*_free` call. Pointers returned by getters stay valid until the
//! handle they came from is freed. On failure a human-readable message is
//! stored per thread and can be read with [`cbd_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cbd_core::compress::{
    bit_breakdown, compress_layer, decompress_layer, read_layer, write_layer, CompressOptions,
    CompressedLayer, DecomposeMode,
};
use cbd_core::error::CbdError;
use cbd_core::quant::SignMode;
use cbd_core::store::{load_tensor, save_tensor, LayerSpec, TensorF32};

/// Result code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbdStatus {
    CbdOk = 0,
    /// A required pointer argument was null.
    CbdNullPointer = 1,
    /// Rejected argument, configuration value, or shape.
    CbdInvalidArgument = 2,
    /// Operating-system I/O failure.
    CbdIoError = 3,
    /// Malformed or unsupported container bytes.
    CbdFormatError = 4,
    /// Input on which the operation is mathematically undefined.
    CbdDegenerateInput = 5,
    /// Internal invariant violation; the error message has details.
    CbdInternalError = 6,
}

/// How weight signs are stored alongside magnitude planes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbdSignMode {
    /// One shared sign plane next to the magnitude planes.
    CbdSignPlane = 0,
    /// Separate positive and negative magnitude plane stacks.
    CbdSignSplit = 1,
}

/// Whether planes may be stored as low-rank factor pairs.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbdGate {
    /// Factor a plane only when that makes it strictly smaller.
    CbdGateOn = 0,
    /// Factor every eligible plane regardless of size.
    CbdGateAlways = 1,
    /// Store every plane densely.
    CbdGateOff = 2,
}

/// Layer geometry kind.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbdLayerKind {
    CbdLayerConv = 0,
    CbdLayerFullyConnected = 1,
}

/// Compression knobs. Obtain defaults from [`cbd_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CbdOptions {
    /// Stored planes per weight (J), including sign handling. Range 2..=52.
    pub bits: u32,
    /// Rank target as a fraction of min(rows, cols), in (0, 1].
    pub bottleneck: f64,
    pub sign_mode: CbdSignMode,
    pub gate: CbdGate,
}

/// Layer geometry. `kernel`, `stride`, and `pad` are ignored for fully
/// connected layers.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CbdLayerDesc {
    pub kind: CbdLayerKind,
    /// Input channels, or input features for fully connected layers.
    pub inputs: u32,
    /// Output channels, or output features for fully connected layers.
    pub outputs: u32,
    pub kernel: u32,
    pub stride: u32,
    pub pad: u32,
}

/// Opaque dense tensor handle.
pub struct CbdTensor {
    inner: TensorF32,
}

/// Opaque compressed layer handle.
pub struct CbdLayer {
    inner: CompressedLayer,
    name: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg)
        .unwrap_or_else(|_| CString::new("error message contained a NUL byte").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &CbdError) -> CbdStatus {
    use CbdError::*;
    match e {
        Io { .. } => CbdStatus::CbdIoError,
        BadMagic { .. } | UnsupportedVersion(_) | Truncated { .. } | TrailingBytes(_)
        | Format(_) | Json(_) => CbdStatus::CbdFormatError,
        DegenerateInput(_) => CbdStatus::CbdDegenerateInput,
        NonFinite { .. } | DimOverflow | ShapeMismatch { .. } | DimMismatch(_)
        | InvalidConfig(_) | ModeError(_) | Manifest(_) => CbdStatus::CbdInvalidArgument,
    }
}

fn fail(e: &CbdError) -> CbdStatus {
    set_error(e.to_string());
    status_of(e)
}

fn null_arg(what: &str) -> CbdStatus {
    set_error(format!("{what} is null"));
    CbdStatus::CbdNullPointer
}

fn guard(f: impl FnOnce() -> CbdStatus) -> CbdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| (*s).to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            CbdStatus::CbdInternalError
        }
    }
}

unsafe fn utf8_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, CbdStatus> {
    if p.is_null() {
        return Err(null_arg(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        CbdStatus::CbdInvalidArgument
    })
}

impl CbdOptions {
    fn to_core(self) -> CompressOptions {
        CompressOptions {
            j: self.bits,
            bottleneck: self.bottleneck,
            sign_mode: match self.sign_mode {
                CbdSignMode::CbdSignPlane => SignMode::Plane,
                CbdSignMode::CbdSignSplit => SignMode::Split,
            },
            mode: match self.gate {
                CbdGate::CbdGateOn => DecomposeMode::Gated,
                CbdGate::CbdGateAlways => DecomposeMode::Unconditional,
                CbdGate::CbdGateOff => DecomposeMode::Disabled,
            },
        }
    }
}

impl CbdLayerDesc {
    fn to_spec(self, name: &str) -> LayerSpec {
        match self.kind {
            CbdLayerKind::CbdLayerConv => LayerSpec::conv(
                name,
                self.inputs as usize,
                self.outputs as usize,
                self.kernel as usize,
                self.stride as usize,
                self.pad as usize,
            ),
            CbdLayerKind::CbdLayerFullyConnected => {
                LayerSpec::fc(name, self.inputs as usize, self.outputs as usize)
            }
        }
    }
}

fn layer_handle(inner: CompressedLayer) -> Result<*mut CbdLayer, CbdStatus> {
    let name = CString::new(inner.spec.name.clone()).map_err(|_| {
        set_error("layer name contains a NUL byte".into());
        CbdStatus::CbdInvalidArgument
    })?;
    Ok(Box::into_raw(Box::new(CbdLayer { inner, name })))
}

/// Message for the most recent failure on the calling thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cbd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn cbd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default compression options: 7 planes, 0.3 bottleneck, shared sign plane,
/// size-gated factoring.
#[no_mangle]
pub extern "C" fn cbd_options_default() -> CbdOptions {
    CbdOptions {
        bits: 7,
        bottleneck: 0.3,
        sign_mode: CbdSignMode::CbdSignPlane,
        gate: CbdGate::CbdGateOn,
    }
}

// ── Tensors ────────────────────────────────────────────────────────────────

/// Creates a tensor from `ndim` dimensions and `len` row-major values. The
/// buffers are copied; `len` must equal the product of the dimensions.
#[no_mangle]
pub unsafe extern "C" fn cbd_tensor_create(
    dims: *const u64,
    ndim: usize,
    data: *const f32,
    len: usize,
    out: *mut *mut CbdTensor,
) -> CbdStatus {
    guard(|| {
        let Some(out) = (unsafe { out.as_mut() }) else { return null_arg("out") };
        *out = ptr::null_mut();
        if ndim > 0 && dims.is_null() {
            return null_arg("dims");
        }
        if len > 0 && data.is_null() {
            return null_arg("data");
        }
        let shape: Vec<usize> = if ndim == 0 {
            Vec::new()
        } else {
            unsafe { std::slice::from_raw_parts(dims, ndim) }
                .iter()
                .map(|&d| d as usize)
                .collect()
        };
        let values: Vec<f32> = if len == 0 {
            Vec::new()
        } else {
            unsafe { std::slice::from_raw_parts(data, len) }.to_vec()
        };
        match TensorF32::new(shape, values) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(CbdTensor { inner: t }));
                CbdStatus::CbdOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Loads a tensor container from `path`.
#[no_mangle]
pub unsafe extern "C" fn cbd_tensor_load(
    path: *const c_char,
    out: *mut *mut CbdTensor,
) -> CbdStatus {
    guard(|| {
        let Some(out) = (unsafe { out.as_mut() }) else { return null_arg("out") };
        *out = ptr::null_mut();
        let path = match unsafe { utf8_arg(path, "path") } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_tensor(Path::new(path)) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(CbdTensor { inner: t }));
                CbdStatus::CbdOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Writes `tensor` to `path` as a tensor container.
#[no_mangle]
pub unsafe extern "C" fn cbd_tensor_save(
    tensor: *const CbdTensor,
    path: *const c_char,
) -> CbdStatus {
    guard(|| {
        let Some(t) = (unsafe { tensor.as_ref() }) else { return null_arg("tensor") };
        let path = match unsafe { utf8_arg(path, "path") } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match save_tensor(&t.inner, Path::new(path)) {
            Ok(()) => CbdStatus::CbdOk,
            Err(e) => fail(&e),
        }
    })
}

/// Number of dimensions, or 0 if `tensor` is null.
#[no_mangle]
pub unsafe extern "C" fn cbd_tensor_ndim(tensor: *const CbdTensor) -> usize {
    match unsafe { tensor.as_ref() } {
        Some(t) => t.inner.shape().len(),
        None => 0,
    }
}

/// Writes the size of dimension `axis` to `out`.
#[no_mangle]
pub unsafe extern "C" fn cbd_tensor_dim(
    tensor: *const CbdTensor,
    axis: usize,
    out: *mut u64,
) -> CbdStatus {
    guard(|| {
        let Some(out) = (unsafe { out.as_mut() }) else { return null_arg("out") };
        let Some(t) = (unsafe { tensor.as_ref() }) else { return null_arg("tensor") };
        match t.inner.shape().get(axis) {
            Some(&d) => {
                *out = d as u64;
                CbdStatus::CbdOk
            }
            None => {
                set_error(format!(
                    "axis {axis} out of range for a {}-dimensional tensor",
                    t.inner.shape().len()
                ));
                CbdStatus::CbdInvalidArgument
            }
        }
    })
}

/// Total number of elements, or 0 if `tensor` is null.
#[no_mangle]
pub unsafe extern "C" fn cbd_tensor_len(tensor: *const CbdTensor) -> usize {
    match unsafe { tensor.as_ref() } {
        Some(t) => t.inner.len(),
        None => 0,
    }
}

/// Borrowed pointer to the row-major element data, or null if `tensor` is
/// null. Valid until the handle is freed.
#[no_mangle]
pub unsafe extern "C" fn cbd_tensor_data(tensor: *const CbdTensor) -> *const f32 {
    match unsafe { tensor.as_ref() } {
        Some(t) => t.inner.data().as_ptr(),
        None => ptr::null(),
    }
}

/// Frees a tensor handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cbd_tensor_free(tensor: *mut CbdTensor) {
    if !tensor.is_null() {
        drop(unsafe { Box::from_raw(tensor) });
    }
}

// ── Compressed layers ──────────────────────────────────────────────────────

/// Compresses `weights` into bit-planes. Conv tensors must be shaped
/// `(inputs, kernel, kernel, outputs)`, fully connected `(inputs, outputs)`.
#[no_mangle]
pub unsafe extern "C" fn cbd_layer_compress(
    weights: *const CbdTensor,
    name: *const c_char,
    desc: CbdLayerDesc,
    options: CbdOptions,
    out: *mut *mut CbdLayer,
) -> CbdStatus {
    guard(|| {
        let Some(out) = (unsafe { out.as_mut() }) else { return null_arg("out") };
        *out = ptr::null_mut();
        let Some(w) = (unsafe { weights.as_ref() }) else { return null_arg("weights") };
        let name = match unsafe { utf8_arg(name, "name") } {
            Ok(n) => n,
            Err(s) => return s,
        };
        let spec = desc.to_spec(name);
        if let Err(e) = spec.validate() {
            return fail(&e);
        }
        match compress_layer(&w.inner, &spec, &options.to_core()) {
            Ok(l) => match layer_handle(l) {
                Ok(h) => {
                    *out = h;
                    CbdStatus::CbdOk
                }
                Err(s) => s,
            },
            Err(e) => fail(&e),
        }
    })
}

/// Loads a compressed layer container from `path`.
#[no_mangle]
pub unsafe extern "C" fn cbd_layer_load(
    path: *const c_char,
    out: *mut *mut CbdLayer,
) -> CbdStatus {
    guard(|| {
        let Some(out) = (unsafe { out.as_mut() }) else { return null_arg("out") };
        *out = ptr::null_mut();
        let path = match unsafe { utf8_arg(path, "path") } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match read_layer(Path::new(path)) {
            Ok(l) => match layer_handle(l) {
                Ok(h) => {
                    *out = h;
                    CbdStatus::CbdOk
                }
                Err(s) => s,
            },
            Err(e) => fail(&e),
        }
    })
}

/// Writes `layer` to `path` as a layer container.
#[no_mangle]
pub unsafe extern "C" fn cbd_layer_save(
    layer: *const CbdLayer,
    path: *const c_char,
) -> CbdStatus {
    guard(|| {
        let Some(l) = (unsafe { layer.as_ref() }) else { return null_arg("layer") };
        let path = match unsafe { utf8_arg(path, "path") } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match write_layer(&l.inner, Path::new(path)) {
            Ok(()) => CbdStatus::CbdOk,
            Err(e) => fail(&e),
        }
    })
}

/// Reconstructs the dense weight tensor in the layer's declared shape.
#[no_mangle]
pub unsafe extern "C" fn cbd_layer_decompress(
    layer: *const CbdLayer,
    out: *mut *mut CbdTensor,
) -> CbdStatus {
    guard(|| {
        let Some(out) = (unsafe { out.as_mut() }) else { return null_arg("out") };
        *out = ptr::null_mut();
        let Some(l) = (unsafe { layer.as_ref() }) else { return null_arg("layer") };
        match decompress_layer(&l.inner) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(CbdTensor { inner: t }));
                CbdStatus::CbdOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Layer name, or null if `layer` is null. Valid until the handle is freed.
#[no_mangle]
pub unsafe extern "C" fn cbd_layer_name(layer: *const CbdLayer) -> *const c_char {
    match unsafe { layer.as_ref() } {
        Some(l) => l.name.as_ptr(),
        None => ptr::null(),
    }
}

/// Stored planes per weight (J), or 0 if `layer` is null.
#[no_mangle]
pub unsafe extern "C" fn cbd_layer_planes(layer: *const CbdLayer) -> u32 {
    match unsafe { layer.as_ref() } {
        Some(l) => l.inner.j,
        None => 0,
    }
}

/// Writes the plane and sign payload size in bits to `out`. Per-layer scalar
/// overhead is not included.
#[no_mangle]
pub unsafe extern "C" fn cbd_layer_payload_bits(
    layer: *const CbdLayer,
    out: *mut u64,
) -> CbdStatus {
    guard(|| {
        let Some(out) = (unsafe { out.as_mut() }) else { return null_arg("out") };
        let Some(l) = (unsafe { layer.as_ref() }) else { return null_arg("layer") };
        *out = bit_breakdown(&l.inner).payload_bits;
        CbdStatus::CbdOk
    })
}

/// Writes the stored bits per weight to `out`, optionally counting the
/// per-layer scalar overhead.
#[no_mangle]
pub unsafe extern "C" fn cbd_layer_bitrate(
    layer: *const CbdLayer,
    include_overhead: bool,
    out: *mut f64,
) -> CbdStatus {
    guard(|| {
        let Some(out) = (unsafe { out.as_mut() }) else { return null_arg("out") };
        let Some(l) = (unsafe { layer.as_ref() }) else { return null_arg("layer") };
        let bits = bit_breakdown(&l.inner);
        let total = bits.payload_bits + if include_overhead { bits.overhead_bits } else { 0 };
        let weights = (l.inner.rows * l.inner.cols).max(1) as f64;
        *out = total as f64 / weights;
        CbdStatus::CbdOk
    })
}

/// Writes the worst-case absolute reconstruction error to `out`.
#[no_mangle]
pub unsafe extern "C" fn cbd_layer_error_bound(
    layer: *const CbdLayer,
    out: *mut f64,
) -> CbdStatus {
    guard(|| {
        let Some(out) = (unsafe { out.as_mut() }) else { return null_arg("out") };
        let Some(l) = (unsafe { layer.as_ref() }) else { return null_arg("layer") };
        let scale = f64::from(l.inner.w_max) / f64::from(l.inner.alpha);
        *out = scale * 2f64.powi(1 + l.inner.q - l.inner.j as i32);
        CbdStatus::CbdOk
    })
}

/// Frees a layer handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cbd_layer_free(layer: *mut CbdLayer) {
    if !layer.is_null() {
        drop(unsafe { Box::from_raw(layer) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg() -> String {
        unsafe { CStr::from_ptr(cbd_last_error_message()) }
            .to_string_lossy()
            .into_owned()
    }

    fn make_tensor(shape: &[u64], data: &[f32]) -> *mut CbdTensor {
        let mut t = ptr::null_mut();
        let s = unsafe {
            cbd_tensor_create(shape.as_ptr(), shape.len(), data.as_ptr(), data.len(), &mut t)
        };
        assert_eq!(s, CbdStatus::CbdOk, "{}", msg());
        t
    }

    #[test]
    fn tensor_roundtrip_through_getters_and_files() {
        let data: Vec<f32> = (0..24).map(|i| i as f32 / 7.0 - 1.5).collect();
        let t = make_tensor(&[2, 3, 4], &data);
        unsafe {
            assert_eq!(cbd_tensor_ndim(t), 3);
            assert_eq!(cbd_tensor_len(t), 24);
            let mut d = 0u64;
            assert_eq!(cbd_tensor_dim(t, 1, &mut d), CbdStatus::CbdOk);
            assert_eq!(d, 3);
            assert_eq!(cbd_tensor_dim(t, 3, &mut d), CbdStatus::CbdInvalidArgument);
            let seen = std::slice::from_raw_parts(cbd_tensor_data(t), 24);
            assert_eq!(seen, &data[..]);

            let dir = tempfile::tempdir().unwrap();
            let path = CString::new(
                dir.path().join("t.cbdt").to_str().unwrap(),
            )
            .unwrap();
            assert_eq!(cbd_tensor_save(t, path.as_ptr()), CbdStatus::CbdOk);
            let mut back = ptr::null_mut();
            assert_eq!(cbd_tensor_load(path.as_ptr(), &mut back), CbdStatus::CbdOk);
            assert_eq!(
                std::slice::from_raw_parts(cbd_tensor_data(back), 24),
                &data[..]
            );
            cbd_tensor_free(back);
            cbd_tensor_free(t);
        }
    }

    #[test]
    fn tensor_create_rejects_mismatched_length() {
        let mut t = ptr::null_mut();
        let dims = [2u64, 3];
        let data = [0.0f32; 5];
        let s = unsafe { cbd_tensor_create(dims.as_ptr(), 2, data.as_ptr(), 5, &mut t) };
        assert_eq!(s, CbdStatus::CbdInvalidArgument);
        assert!(t.is_null());
    }

    #[test]
    fn compress_save_load_decompress() {
        let desc = CbdLayerDesc {
            kind: CbdLayerKind::CbdLayerConv,
            inputs: 3,
            outputs: 4,
            kernel: 3,
            stride: 1,
            pad: 1,
        };
        let len = 3 * 3 * 3 * 4;
        let data: Vec<f32> = (0..len).map(|i| ((i * 37 % 19) as f32 - 9.0) / 11.0).collect();
        let t = make_tensor(&[3, 3, 3, 4], &data);
        let name = CString::new("conv1").unwrap();
        let mut layer = ptr::null_mut();
        unsafe {
            let s = cbd_layer_compress(t, name.as_ptr(), desc, cbd_options_default(), &mut layer);
            assert_eq!(s, CbdStatus::CbdOk, "{}", msg());
            assert_eq!(CStr::from_ptr(cbd_layer_name(layer)).to_str().unwrap(), "conv1");
            assert_eq!(cbd_layer_planes(layer), 7);

            let mut payload = 0u64;
            assert_eq!(cbd_layer_payload_bits(layer, &mut payload), CbdStatus::CbdOk);
            assert!(payload > 0);
            let mut rate = 0.0f64;
            assert_eq!(cbd_layer_bitrate(layer, false, &mut rate), CbdStatus::CbdOk);
            assert!(rate > 0.0 && rate <= 7.0, "rate {rate}");
            let mut with_overhead = 0.0f64;
            assert_eq!(cbd_layer_bitrate(layer, true, &mut with_overhead), CbdStatus::CbdOk);
            assert!(with_overhead > rate);
            let mut bound = 0.0f64;
            assert_eq!(cbd_layer_error_bound(layer, &mut bound), CbdStatus::CbdOk);
            assert!(bound > 0.0);

            let dir = tempfile::tempdir().unwrap();
            let path = CString::new(dir.path().join("l.cbdl").to_str().unwrap()).unwrap();
            assert_eq!(cbd_layer_save(layer, path.as_ptr()), CbdStatus::CbdOk);
            let mut back = ptr::null_mut();
            assert_eq!(cbd_layer_load(path.as_ptr(), &mut back), CbdStatus::CbdOk);
            let mut payload_back = 0u64;
            assert_eq!(cbd_layer_payload_bits(back, &mut payload_back), CbdStatus::CbdOk);
            assert_eq!(payload_back, payload);

            let mut dense = ptr::null_mut();
            assert_eq!(cbd_layer_decompress(back, &mut dense), CbdStatus::CbdOk);
            assert_eq!(cbd_tensor_ndim(dense), 4);
            assert_eq!(cbd_tensor_len(dense), len);
            let seen = std::slice::from_raw_parts(cbd_tensor_data(dense), len);
            for (a, b) in seen.iter().zip(&data) {
                assert!((a - b).abs() as f64 <= bound + 1e-9, "{a} vs {b}");
            }

            cbd_tensor_free(dense);
            cbd_layer_free(back);
            cbd_layer_free(layer);
            cbd_tensor_free(t);
        }
    }

    #[test]
    fn error_paths_set_status_and_message() {
        unsafe {
            // Null out pointer.
            assert_eq!(
                cbd_tensor_load(ptr::null(), ptr::null_mut()),
                CbdStatus::CbdNullPointer
            );

            // Missing file.
            let mut t = ptr::null_mut();
            let path = CString::new("/nonexistent/t.cbdt").unwrap();
            assert_eq!(cbd_tensor_load(path.as_ptr(), &mut t), CbdStatus::CbdIoError);
            assert!(t.is_null());
            assert!(msg().contains("nonexistent"), "{}", msg());

            // Out-of-range plane count.
            let data = [0.5f32, -0.25, 0.125, 1.0];
            let t = make_tensor(&[2, 2], &data);
            let name = CString::new("fc").unwrap();
            let desc = CbdLayerDesc {
                kind: CbdLayerKind::CbdLayerFullyConnected,
                inputs: 2,
                outputs: 2,
                kernel: 0,
                stride: 0,
                pad: 0,
            };
            let mut layer = ptr::null_mut();
            let mut opt = cbd_options_default();
            opt.bits = 1;
            opt.bottleneck = 1.0;
            assert_eq!(
                cbd_layer_compress(t, name.as_ptr(), desc, opt, &mut layer),
                CbdStatus::CbdInvalidArgument
            );

            // All-zero weights have no representable scale.
            let z = make_tensor(&[2, 2], &[0.0; 4]);
            opt.bits = 7;
            assert_eq!(
                cbd_layer_compress(z, name.as_ptr(), desc, opt, &mut layer),
                CbdStatus::CbdDegenerateInput
            );

            cbd_tensor_free(z);
            cbd_tensor_free(t);
        }
    }

    #[test]
    fn version_and_error_bound_match_core() {
        unsafe {
            let v = CStr::from_ptr(cbd_version()).to_str().unwrap();
            assert_eq!(v, env!("CARGO_PKG_VERSION"));
        }
        let data = [0.5f32, -0.25, 0.125, 1.0];
        let t = make_tensor(&[2, 2], &data);
        let name = CString::new("fc").unwrap();
        let desc = CbdLayerDesc {
            kind: CbdLayerKind::CbdLayerFullyConnected,
            inputs: 2,
            outputs: 2,
            kernel: 0,
            stride: 0,
            pad: 0,
        };
        let mut opt = cbd_options_default();
        opt.bottleneck = 1.0;
        let mut layer = ptr::null_mut();
        unsafe {
            let s = cbd_layer_compress(t, name.as_ptr(), desc, opt, &mut layer);
            assert_eq!(s, CbdStatus::CbdOk, "{}", msg());
            let mut bound = 0.0f64;
            assert_eq!(cbd_layer_error_bound(layer, &mut bound), CbdStatus::CbdOk);
            let set = cbd_core::compress::layer_plane_set(&(*layer).inner).unwrap();
            assert_eq!(bound, set.error_bound());
            cbd_layer_free(layer);
            cbd_tensor_free(t);
        }
    }

    #[test]
    fn header_was_generated_with_the_api() {
        let header = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/include/cbd.h"
        ))
        .expect("header missing");
        for symbol in [
            "CbdStatus",
            "CbdOptions",
            "cbd_tensor_create",
            "cbd_layer_compress",
            "cbd_layer_decompress",
            "cbd_last_error_message",
        ] {
            assert!(header.contains(symbol), "header lacks {symbol}");
        }
    }
}
