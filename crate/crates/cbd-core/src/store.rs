//! Tensor containers, model manifests, and the conv flattening convention.
//!
//! Tensors live in a minimal binary container (magic `CBDT`) that round-trips
//! IEEE-754 binary32 payloads bit-exactly. A model is described by a JSON
//! manifest listing one container file per layer.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bytes::{put_f32, put_u16, put_u64, ByteReader};
use crate::error::{CbdError, Result};

pub const TENSOR_MAGIC: [u8; 4] = *b"CBDT";
pub const TENSOR_VERSION: u16 = 1;

// ── Dense tensors and matrices ───────────────────────────────────────────

/// Dense real-valued tensor, row-major, all values finite.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorF32 {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl TensorF32 {
    /// Validates that `data` matches `shape` and contains only finite values.
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let len = checked_len(&shape)?;
        if data.len() != len {
            return Err(CbdError::ShapeMismatch {
                expected: format!("{len} elements for shape {shape:?}"),
                found: format!("{} elements", data.len()),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(CbdError::NonFinite { index });
        }
        Ok(TensorF32 { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Dense 2-D view used by the quantization and search stages.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixF32 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl MatrixF32 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        MatrixF32 { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        MatrixF32 { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c] = v;
    }
}

fn checked_len(shape: &[usize]) -> Result<usize> {
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or(CbdError::DimOverflow)
}

// ── Container I/O ────────────────────────────────────────────────────────

/// Serializes a tensor into the `CBDT` container layout.
pub fn tensor_to_bytes(t: &TensorF32) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + t.shape.len() * 8 + t.data.len() * 4);
    out.extend_from_slice(&TENSOR_MAGIC);
    put_u16(&mut out, TENSOR_VERSION);
    put_u16(&mut out, t.shape.len() as u16);
    for &d in &t.shape {
        put_u64(&mut out, d as u64);
    }
    for &v in &t.data {
        put_f32(&mut out, v);
    }
    out
}

/// Parses a `CBDT` container, rejecting malformed headers, truncation,
/// trailing bytes, and non-finite payload values.
pub fn tensor_from_bytes(buf: &[u8]) -> Result<TensorF32> {
    let mut r = ByteReader::new(buf);
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if magic != TENSOR_MAGIC {
        return Err(CbdError::BadMagic { expected: TENSOR_MAGIC, found: magic });
    }
    let version = r.u16()?;
    if version != TENSOR_VERSION {
        return Err(CbdError::UnsupportedVersion(version));
    }
    let ndim = r.u16()? as usize;
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(r.len_u64()?);
    }
    let len = checked_len(&shape)?;
    let payload_len = len.checked_mul(4).ok_or(CbdError::DimOverflow)?;
    if r.remaining() < payload_len {
        return Err(CbdError::Truncated {
            expected: payload_len as u64,
            found: r.remaining() as u64,
        });
    }
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        data.push(r.f32()?);
    }
    r.finish()?;
    TensorF32::new(shape, data)
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<TensorF32> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| CbdError::io(path, e))?;
    tensor_from_bytes(&buf)
}

pub fn save_tensor(t: &TensorF32, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &tensor_to_bytes(t))
}

/// Writes via a sibling temp file and rename, so readers never observe a
/// partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| CbdError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CbdError::io(path, e))
}

// ── Layer specs and manifests ────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Fc,
}

/// Static description of one layer. Fully-connected layers are modeled as
/// conv layers with `k = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    /// Input channels.
    pub n: usize,
    /// Output channels.
    pub m: usize,
    /// Spatial kernel size.
    #[serde(default = "default_one")]
    pub k: usize,
    #[serde(default = "default_one")]
    pub stride: usize,
    #[serde(default)]
    pub pad: usize,
}

fn default_one() -> usize {
    1
}

impl LayerSpec {
    pub fn conv(name: &str, n: usize, m: usize, k: usize, stride: usize, pad: usize) -> Self {
        LayerSpec { name: name.to_string(), kind: LayerKind::Conv, n, m, k, stride, pad }
    }

    pub fn fc(name: &str, n: usize, m: usize) -> Self {
        LayerSpec { name: name.to_string(), kind: LayerKind::Fc, n, m, k: 1, stride: 1, pad: 0 }
    }

    /// Tensor shape the layer's weight container must hold.
    pub fn expected_shape(&self) -> Vec<usize> {
        match self.kind {
            LayerKind::Conv => vec![self.n, self.k, self.k, self.m],
            LayerKind::Fc => vec![self.n, self.m],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.k == 0 {
            return Err(CbdError::InvalidConfig(format!(
                "layer {}: dimensions must be positive",
                self.name
            )));
        }
        if self.kind == LayerKind::Fc && self.k != 1 {
            return Err(CbdError::InvalidConfig(format!(
                "layer {}: fc layers require k = 1",
                self.name
            )));
        }
        if self.stride == 0 {
            return Err(CbdError::InvalidConfig(format!(
                "layer {}: stride must be positive",
                self.name
            )));
        }
        Ok(())
    }

    /// Flattened plane dimensions: rows = n·k, cols = k·m.
    pub fn plane_dims(&self) -> (usize, usize) {
        (self.n * self.k, self.k * self.m)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestLayer {
    #[serde(flatten)]
    pub spec: LayerSpec,
    /// Weight container path, relative to the manifest file.
    pub file: PathBuf,
}

/// Ordered list of layers with their weight files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelManifest {
    pub layers: Vec<ManifestLayer>,
}

impl ModelManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let buf = fs::read(path).map_err(|e| CbdError::io(path, e))?;
        let m: ModelManifest = serde_json::from_slice(&buf)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_vec_pretty(self)?;
        write_atomic(path.as_ref(), &json)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(CbdError::Manifest("manifest lists no layers".into()));
        }
        for (i, a) in self.layers.iter().enumerate() {
            a.spec.validate()?;
            for b in &self.layers[i + 1..] {
                if a.spec.name == b.spec.name {
                    return Err(CbdError::Manifest(format!(
                        "duplicate layer name {:?}",
                        a.spec.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Loads every referenced tensor and checks it against the declared shape.
    pub fn load_layers(&self, base: &Path) -> Result<Vec<(LayerSpec, TensorF32)>> {
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let path = base.join(&layer.file);
            let t = load_tensor(&path).map_err(|e| {
                CbdError::Manifest(format!("layer {:?}: {e}", layer.spec.name))
            })?;
            let expected = layer.spec.expected_shape();
            if t.shape() != expected.as_slice() {
                return Err(CbdError::Manifest(format!(
                    "layer {:?}: shape {:?} does not match declared {:?}",
                    layer.spec.name,
                    t.shape(),
                    expected
                )));
            }
            out.push((layer.spec.clone(), t));
        }
        Ok(out)
    }
}

// ── Flattening ───────────────────────────────────────────────────────────

/// Flattens a 4-D conv weight `(n, k, k, m)` into an `(n·k) × (k·m)` matrix.
///
/// Element `W[ci, kh, kw, co]` lands at row `ci·k + kh`, column `kw·m + co`.
/// Under this convention a rank factor `B` acts as a k×1 (vertical)
/// convolution and `C` as a 1×k (horizontal) convolution.
pub fn flatten_conv(t: &TensorF32) -> Result<MatrixF32> {
    let s = t.shape();
    if s.len() != 4 || s[1] != s[2] {
        return Err(CbdError::ShapeMismatch {
            expected: "(n, k, k, m)".into(),
            found: format!("{s:?}"),
        });
    }
    let (n, k, m) = (s[0], s[1], s[3]);
    let mut out = MatrixF32::zeros(n * k, k * m);
    let d = t.data();
    for ci in 0..n {
        for kh in 0..k {
            for kw in 0..k {
                for co in 0..m {
                    let v = d[((ci * k + kh) * k + kw) * m + co];
                    out.set(ci * k + kh, kw * m + co, v);
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`flatten_conv`].
pub fn unflatten_conv(mat: &MatrixF32, n: usize, k: usize, m: usize) -> Result<TensorF32> {
    if mat.rows != n * k || mat.cols != k * m {
        return Err(CbdError::ShapeMismatch {
            expected: format!("{}x{}", n * k, k * m),
            found: format!("{}x{}", mat.rows, mat.cols),
        });
    }
    let mut data = vec![0.0f32; n * k * k * m];
    for ci in 0..n {
        for kh in 0..k {
            for kw in 0..k {
                for co in 0..m {
                    data[((ci * k + kh) * k + kw) * m + co] = mat.get(ci * k + kh, kw * m + co);
                }
            }
        }
    }
    TensorF32::new(vec![n, k, k, m], data)
}

/// Flattens a layer's weights to the plane matrix used by the pipeline.
pub fn flatten_layer(t: &TensorF32, spec: &LayerSpec) -> Result<MatrixF32> {
    let expected = spec.expected_shape();
    if t.shape() != expected.as_slice() {
        return Err(CbdError::ShapeMismatch {
            expected: format!("{expected:?}"),
            found: format!("{:?}", t.shape()),
        });
    }
    match spec.kind {
        LayerKind::Conv => flatten_conv(t),
        LayerKind::Fc => Ok(MatrixF32 { rows: spec.n, cols: spec.m, data: t.data().to_vec() }),
    }
}

/// Inverse of [`flatten_layer`].
pub fn unflatten_layer(mat: &MatrixF32, spec: &LayerSpec) -> Result<TensorF32> {
    match spec.kind {
        LayerKind::Conv => unflatten_conv(mat, spec.n, spec.k, spec.m),
        LayerKind::Fc => TensorF32::new(vec![spec.n, spec.m], mat.data.clone()),
    }
}

// ── Tests ────────────────────────────────────────────────────────────────
