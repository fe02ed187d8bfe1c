//! Reference convolution network for end-to-end checks: a direct conv2d, a
//! two-stage path that convolves the stored factor pairs without rebuilding
//! the planes, and a sweep evaluator measuring divergence and bitrate.
//!
//! All layers are linear (no activations), so the difference between the
//! two paths is itself a convolution: see [`discrepancy_kernel`].

use serde::Serialize;

use crate::compress::{
    bit_breakdown, compress_layer_with_info, decompress_layer, CompressOptions, CompressedLayer,
    PlaneRecord, RecordData,
};
use crate::error::{CbdError, Result};
use crate::gf2::Gf2Matrix;
use crate::quant::{error_stats, ErrorStats};
use crate::store::{unflatten_layer, LayerKind, LayerSpec, MatrixF32, TensorF32};

// ── Feature maps ─────────────────────────────────────────────────────────

/// Dense activation tensor, laid out channel-major: `data[c·h·w + y·w + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureMap { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut m = Self::zeros(channels, height, width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    m.data[(c * height + y) * width + x] = f(c, y, x);
                }
            }
        }
        m
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Max-abs and mean-squared deviation between two equally shaped maps.
pub fn feature_error(a: &FeatureMap, b: &FeatureMap) -> Result<ErrorStats> {
    if (a.channels, a.height, a.width) != (b.channels, b.height, b.width) {
        return Err(CbdError::ShapeMismatch {
            expected: format!("{}x{}x{}", a.channels, a.height, a.width),
            found: format!("{}x{}x{}", b.channels, b.height, b.width),
        });
    }
    let wrap = |m: &FeatureMap| MatrixF32 { rows: 1, cols: m.len(), data: m.data.clone() };
    error_stats(&wrap(a), &wrap(b))
}

// ── Convolution ──────────────────────────────────────────────────────────

fn out_extent(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = input + 2 * pad;
    if kernel == 0 || stride == 0 {
        return Err(CbdError::InvalidConfig("kernel and stride must be positive".into()));
    }
    if padded < kernel {
        return Err(CbdError::InvalidConfig(format!(
            "kernel extent {kernel} exceeds padded input {padded}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

/// Cross-correlation of `x` with kernels `w` of shape (n, kh, kw, m), with
/// separate vertical/horizontal stride and padding. Zero padding; products
/// accumulate in f64 per output element, summed over (ci, kh, kw) in that
/// order, and round to f32 once.
pub fn conv2d_rect(
    x: &FeatureMap,
    w: &TensorF32,
    stride: (usize, usize),
    pad: (usize, usize),
) -> Result<FeatureMap> {
    let &[n, kh, kw, m] = w.shape() else {
        return Err(CbdError::ShapeMismatch {
            expected: "4-d kernel (in, kh, kw, out)".into(),
            found: format!("{:?}", w.shape()),
        });
    };
    if n != x.channels {
        return Err(CbdError::ShapeMismatch {
            expected: format!("{n} input channels"),
            found: format!("{}", x.channels),
        });
    }
    let (sv, sh) = stride;
    let (pv, ph) = pad;
    let out_h = out_extent(x.height, kh, sv, pv)?;
    let out_w = out_extent(x.width, kw, sh, ph)?;
    let wdata = w.data();
    let mut out = FeatureMap::zeros(m, out_h, out_w);
    for co in 0..m {
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut acc = 0.0f64;
                for ci in 0..n {
                    for dy in 0..kh {
                        let iy = (oy * sv + dy) as i64 - pv as i64;
                        if iy < 0 || iy >= x.height as i64 {
                            continue;
                        }
                        for dx in 0..kw {
                            let ix = (ox * sh + dx) as i64 - ph as i64;
                            if ix < 0 || ix >= x.width as i64 {
                                continue;
                            }
                            let xv = x.get(ci, iy as usize, ix as usize);
                            let wv = wdata[((ci * kh + dy) * kw + dx) * m + co];
                            acc += f64::from(xv) * f64::from(wv);
                        }
                    }
                }
                out.data[(co * out_h + oy) * out_w + ox] = acc as f32;
            }
        }
    }
    Ok(out)
}

/// Square-kernel convolution with symmetric stride and padding.
pub fn conv2d(x: &FeatureMap, w: &TensorF32, stride: usize, pad: usize) -> Result<FeatureMap> {
    conv2d_rect(x, w, (stride, stride), (pad, pad))
}

fn layer_kernel(t: &TensorF32, spec: &LayerSpec) -> Result<TensorF32> {
    match spec.kind {
        LayerKind::Conv => Ok(t.clone()),
        // A fully-connected layer is a 1×1 convolution.
        LayerKind::Fc => TensorF32::new(vec![spec.n, 1, 1, spec.m], t.data().to_vec()),
    }
}

/// Runs one uncompressed layer.
pub fn forward_layer(x: &FeatureMap, w: &TensorF32, spec: &LayerSpec) -> Result<FeatureMap> {
    conv2d(x, &layer_kernel(w, spec)?, spec.stride, spec.pad)
}

/// Runs one compressed layer by rebuilding its weights.
pub fn forward_composite(x: &FeatureMap, l: &CompressedLayer) -> Result<FeatureMap> {
    let w = decompress_layer(l)?;
    forward_layer(x, &w, &l.spec)
}

// ── Two-stage factored path ──────────────────────────────────────────────

fn split_records(l: &CompressedLayer) -> Result<[(f64, &[PlaneRecord]); 2]> {
    match &l.data {
        RecordData::Split { pos, neg } => Ok([(1.0, pos.as_slice()), (-1.0, neg.as_slice())]),
        RecordData::Plane { .. } => Err(CbdError::ModeError(
            "two-stage path requires split sign mode".into(),
        )),
    }
}

fn factor_pair<'a>(rec: &'a PlaneRecord, idx: usize) -> Result<(usize, &'a Gf2Matrix, &'a Gf2Matrix)> {
    match rec {
        PlaneRecord::Factored { rank, b, c, .. } => Ok((*rank, b, c)),
        PlaneRecord::Dense(_) => Err(CbdError::ModeError(format!(
            "two-stage path requires factored planes, plane {idx} is dense; \
             compress with unconditional decomposition"
        ))),
    }
}

/// Runs one compressed layer through its factor pairs without rebuilding any
/// plane: per plane, a vertical k×1 convolution with B into rank-many
/// channels, then a horizontal 1×k convolution with C, scaled by the plane's
/// basis weight. Requires split sign mode and every plane factored.
///
/// Because the factors multiply back in ordinary integer arithmetic, the
/// result matches [`forward_composite`] exactly when every plane's factor
/// product is 0/1-valued; otherwise the gap is the convolution with
/// [`discrepancy_kernel`].
pub fn forward_decomposed(x: &FeatureMap, l: &CompressedLayer) -> Result<FeatureMap> {
    let groups = split_records(l)?;
    let spec = &l.spec;
    let (n, m, k, s, p) = (spec.n, spec.m, spec.k, spec.stride, spec.pad);
    let out_h = out_extent(x.height, k, s, p)?;
    let out_w = out_extent(x.width, k, s, p)?;
    let scale = f64::from(l.w_max) / f64::from(l.alpha);

    let mut acc = vec![0.0f64; m * out_h * out_w];
    for (sign, records) in groups {
        for (idx, rec) in records.iter().enumerate() {
            let (rank, bf, cf) = factor_pair(rec, idx)?;
            if rank == 0 {
                continue;
            }
            let col_kernel = TensorF32::new(
                vec![n, k, 1, rank],
                (0..n * k * rank)
                    .map(|i| f32::from(u8::from(bf.get(i / rank, i % rank))))
                    .collect(),
            )?;
            let mut row_data = Vec::with_capacity(rank * k * m);
            for r in 0..rank {
                for dx in 0..k {
                    for co in 0..m {
                        row_data.push(f32::from(u8::from(cf.get(r, dx * m + co))));
                    }
                }
            }
            let row_kernel = TensorF32::new(vec![rank, 1, k, m], row_data)?;

            let mid = conv2d_rect(x, &col_kernel, (s, 1), (p, p))?;
            let hit = conv2d_rect(&mid, &row_kernel, (1, s), (0, 0))?;
            debug_assert_eq!((hit.height, hit.width), (out_h, out_w));

            let weight = sign * 2f64.powi(-(idx as i32 - l.q)) * scale;
            for (a, &v) in acc.iter_mut().zip(&hit.data) {
                *a += weight * f64::from(v);
            }
        }
    }
    Ok(FeatureMap {
        channels: m,
        height: out_h,
        width: out_w,
        data: acc.iter().map(|&v| v as f32).collect(),
    })
}

/// The kernel whose convolution with the input equals
/// `forward_decomposed − forward_composite`: each plane contributes its
/// integer factor product minus the 0/1 plane, times the plane's weight.
/// Zero everywhere iff every plane is integer-exact.
pub fn discrepancy_kernel(l: &CompressedLayer) -> Result<TensorF32> {
    let groups = split_records(l)?;
    let scale = f64::from(l.w_max) / f64::from(l.alpha);
    let mut acc = MatrixF32::zeros(l.rows, l.cols);
    for (sign, records) in groups {
        for (idx, rec) in records.iter().enumerate() {
            let (_, bf, cf) = factor_pair(rec, idx)?;
            let int = bf.mul_int(cf)?;
            let modulo = bf.mul_gf2(cf)?;
            let weight = sign * 2f64.powi(-(idx as i32 - l.q)) * scale;
            for r in 0..l.rows {
                for c in 0..l.cols {
                    let gap = int.get(r, c) as f64 - f64::from(u8::from(modulo.get(r, c)));
                    if gap != 0.0 {
                        let v = f64::from(acc.get(r, c)) + weight * gap;
                        acc.set(r, c, v as f32);
                    }
                }
            }
        }
    }
    unflatten_layer(&acc, &l.spec)
}

// ── Cascades and evaluation ──────────────────────────────────────────────

/// Runs the uncompressed cascade, returning the output of every layer.
pub fn forward_layers(x: &FeatureMap, layers: &[(LayerSpec, TensorF32)]) -> Result<Vec<FeatureMap>> {
    let mut outs = Vec::with_capacity(layers.len());
    let mut cur = x.clone();
    for (spec, w) in layers {
        cur = forward_layer(&cur, w, spec)?;
        outs.push(cur.clone());
    }
    Ok(outs)
}

/// Runs the compressed cascade (composite path), returning every layer output.
pub fn forward_compressed(x: &FeatureMap, layers: &[CompressedLayer]) -> Result<Vec<FeatureMap>> {
    let mut outs = Vec::with_capacity(layers.len());
    let mut cur = x.clone();
    for l in layers {
        cur = forward_composite(&cur, l)?;
        outs.push(cur.clone());
    }
    Ok(outs)
}

/// A small fixed conv stack with seeded weights, used by the evaluation
/// command and the end-to-end tests. Linear throughout, so compression
/// effects compose exactly.
pub struct ToyModel {
    pub layers: Vec<(LayerSpec, TensorF32)>,
}

impl ToyModel {
    /// Three conv layers 3→8→8→4, kernels 3×3, middle layer strided.
    pub fn seeded(seed: u64) -> ToyModel {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let specs = [
            LayerSpec::conv("conv1", 3, 8, 3, 1, 1),
            LayerSpec::conv("conv2", 8, 8, 3, 2, 1),
            LayerSpec::conv("conv3", 8, 4, 3, 1, 1),
        ];
        let layers = specs
            .into_iter()
            .map(|spec| {
                let shape = spec.expected_shape();
                let len = shape.iter().product();
                let data = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
                let t = TensorF32::new(shape, data).unwrap();
                (spec, t)
            })
            .collect();
        ToyModel { layers }
    }

    /// A seeded input batch element for the stack's 3-channel front.
    pub fn seeded_input(seed: u64, height: usize, width: usize) -> FeatureMap {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        FeatureMap::from_fn(3, height, width, |_, _, _| rng.random_range(-1.0..1.0))
    }
}

/// One sweep point: a (J, bottleneck) pair and what it did to the model.
#[derive(Debug, Clone, Serialize)]
pub struct EvalPoint {
    pub j: u32,
    pub bottleneck: f64,
    /// α chosen per layer at this point.
    pub alphas: Vec<f32>,
    /// Payload bits per weight over the whole model.
    pub effective_bitrate: f64,
    /// Max-abs deviation of each layer's cascade output from the reference.
    pub per_layer_divergence: Vec<f64>,
    /// Deviation of the final output.
    pub divergence: ErrorStats,
}

/// Compresses the model at every (J, bottleneck) pair and measures cascade
/// divergence against the uncompressed forward pass on `x`.
pub fn evaluate(
    layers: &[(LayerSpec, TensorF32)],
    x: &FeatureMap,
    js: &[u32],
    bottlenecks: &[f64],
    base: &CompressOptions,
) -> Result<Vec<EvalPoint>> {
    if layers.is_empty() {
        return Err(CbdError::InvalidConfig("no layers to evaluate".into()));
    }
    let reference = forward_layers(x, layers)?;
    let mut points = Vec::with_capacity(js.len() * bottlenecks.len());
    for &j in js {
        for &b in bottlenecks {
            let opt = CompressOptions { j, bottleneck: b, ..*base };
            let mut compressed = Vec::with_capacity(layers.len());
            let mut alphas = Vec::with_capacity(layers.len());
            for (spec, w) in layers {
                let (l, info) = compress_layer_with_info(w, spec, &opt)?;
                alphas.push(info.alpha as f32);
                compressed.push(l);
            }
            let outs = forward_compressed(x, &compressed)?;
            let per_layer: Vec<f64> = reference
                .iter()
                .zip(&outs)
                .map(|(a, b)| feature_error(a, b).map(|e| e.max_abs))
                .collect::<Result<_>>()?;
            let divergence = feature_error(reference.last().unwrap(), outs.last().unwrap())?;
            let payload: u64 = compressed.iter().map(|l| bit_breakdown(l).payload_bits).sum();
            let weights: u64 = compressed.iter().map(|l| (l.rows * l.cols) as u64).sum();
            points.push(EvalPoint {
                j,
                bottleneck: b,
                alphas,
                effective_bitrate: payload as f64 / weights.max(1) as f64,
                per_layer_divergence: per_layer,
                divergence,
            });
        }
    }
    Ok(points)
}

// ── Tests ────────────────────────────────────────────────────────────────
