//! Layer compression: pick α by rank search, expand into bit-planes, replace
//! planes that pass the storage gate by their GF(2) factor pairs, and account
//! for bits and multiply counts. Includes the binary layer container.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::alpha::{indicator_ge, search_alpha, AlphaResult};
use crate::bytes::{put_f32, put_i16, put_u16, put_u32, put_u64, ByteReader};
use crate::error::{CbdError, Result};
use crate::gf2::Gf2Matrix;
use crate::quant::{
    ceil_log2, error_stats, expand, normalize, plane_sparsity, reconstruct, BitPlaneSet,
    ErrorStats, PlaneGroup, SignData, SignMode,
};
use crate::store::{flatten_layer, unflatten_layer, write_atomic, LayerKind, LayerSpec, MatrixF32, TensorF32};

pub const LAYER_MAGIC: [u8; 4] = *b"CBDL";
pub const LAYER_VERSION: u16 = 1;

// ── Options ──────────────────────────────────────────────────────────────

/// Whether planes may be stored as factor pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecomposeMode {
    /// Factor an eligible plane only when r·(h+w) < h·w.
    Gated,
    /// Factor every eligible plane, even when the pair is larger.
    Unconditional,
    /// Store every plane densely.
    Disabled,
}

/// Knobs for one compression run.
///
/// `bottleneck` is the rank-budget fraction: the α-search targets
/// c = ⌊bottleneck · min(h, w)⌋ on the flattened h×w plane. Only planes with
/// exponent ≤ 0 (basis weight ≥ 1) are eligible for factoring; fractional
/// planes are near-dense and never pay for a factor pair. The sign plane is
/// always stored densely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompressOptions {
    pub j: u32,
    pub bottleneck: f64,
    pub sign_mode: SignMode,
    pub mode: DecomposeMode,
}

impl Default for CompressOptions {
    fn default() -> Self {
        CompressOptions {
            j: 7,
            bottleneck: 0.3,
            sign_mode: SignMode::Plane,
            mode: DecomposeMode::Gated,
        }
    }
}

impl CompressOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.bottleneck > 0.0 && self.bottleneck <= 1.0) {
            return Err(CbdError::InvalidConfig(format!(
                "bottleneck fraction must be in (0, 1], got {}",
                self.bottleneck
            )));
        }
        Ok(())
    }

    /// Rank target for an h×w plane.
    pub fn c_target(&self, rows: usize, cols: usize) -> usize {
        (self.bottleneck * rows.min(cols) as f64).floor() as usize
    }
}

// ── Stored planes ────────────────────────────────────────────────────────

/// One stored bit-plane: either the matrix itself or a rank-r factor pair
/// (B: h×r, C: r×w) whose GF(2) product reproduces it.
#[derive(Debug, Clone, PartialEq)]
pub enum PlaneRecord {
    Dense(Gf2Matrix),
    Factored { rank: usize, b: Gf2Matrix, c: Gf2Matrix, integer_exact: bool },
}

impl PlaneRecord {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            PlaneRecord::Dense(m) => (m.rows(), m.cols()),
            PlaneRecord::Factored { b, c, .. } => (b.rows(), c.cols()),
        }
    }

    pub fn is_factored(&self) -> bool {
        matches!(self, PlaneRecord::Factored { .. })
    }

    /// Payload bits: h·w dense, r·(h+w) factored.
    pub fn bits(&self) -> u64 {
        match self {
            PlaneRecord::Dense(m) => (m.rows() * m.cols()) as u64,
            PlaneRecord::Factored { rank, b, c, .. } => (rank * (b.rows() + c.cols())) as u64,
        }
    }

    pub fn rank(&self) -> Option<usize> {
        match self {
            PlaneRecord::Dense(_) => None,
            PlaneRecord::Factored { rank, .. } => Some(*rank),
        }
    }

    /// The plane this record stores, multiplying factors back out if needed.
    pub fn to_plane(&self) -> Result<Gf2Matrix> {
        match self {
            PlaneRecord::Dense(m) => Ok(m.clone()),
            PlaneRecord::Factored { b, c, .. } => b.mul_gf2(c),
        }
    }
}

/// Stored planes for one layer, mirroring [`SignData`].
#[derive(Debug, Clone, PartialEq)]
pub enum RecordData {
    Plane { mag: Vec<PlaneRecord>, sign: Gf2Matrix },
    Split { pos: Vec<PlaneRecord>, neg: Vec<PlaneRecord> },
}

/// A compressed layer: scalars to undo normalization plus the stored planes.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedLayer {
    pub spec: LayerSpec,
    pub j: u32,
    pub q: i32,
    pub alpha: f32,
    pub w_max: f32,
    pub rows: usize,
    pub cols: usize,
    pub data: RecordData,
}

impl CompressedLayer {
    pub fn sign_mode(&self) -> SignMode {
        match self.data {
            RecordData::Plane { .. } => SignMode::Plane,
            RecordData::Split { .. } => SignMode::Split,
        }
    }

    fn record_groups(&self) -> Vec<&[PlaneRecord]> {
        match &self.data {
            RecordData::Plane { mag, .. } => vec![mag],
            RecordData::Split { pos, neg } => vec![pos, neg],
        }
    }
}

// ── Compression ──────────────────────────────────────────────────────────

fn record_for_plane(plane: Gf2Matrix, eligible: bool, mode: DecomposeMode) -> PlaneRecord {
    if !eligible || mode == DecomposeMode::Disabled {
        return PlaneRecord::Dense(plane);
    }
    let f = plane.decompose();
    let factored_bits = (f.rank * (plane.rows() + plane.cols())) as u64;
    let dense_bits = (plane.rows() * plane.cols()) as u64;
    if mode == DecomposeMode::Unconditional || factored_bits < dense_bits {
        PlaneRecord::Factored { rank: f.rank, b: f.b, c: f.c, integer_exact: f.integer_exact }
    } else {
        PlaneRecord::Dense(plane)
    }
}

fn gate_planes(planes: Vec<Gf2Matrix>, q: i32, mode: DecomposeMode) -> Vec<PlaneRecord> {
    planes
        .into_iter()
        .enumerate()
        .map(|(idx, p)| record_for_plane(p, idx as i32 - q <= 0, mode))
        .collect()
}

/// Scaling factor for the layer: the α-search result, or α = 1 when no
/// threshold separates the magnitudes (the achieved rank is then the rank of
/// the ≥ w_max indicator).
fn pick_alpha(wmag: &MatrixF32, c: usize) -> Result<AlphaResult> {
    match search_alpha(wmag, c) {
        Ok(r) => Ok(r),
        Err(CbdError::DegenerateInput(_)) => {
            let vmax = wmag.data.iter().fold(0.0f32, |m, &v| m.max(v));
            if vmax <= 0.0 {
                return Err(CbdError::DegenerateInput("all-zero tensor has no scale".into()));
            }
            let rank = indicator_ge(wmag, f64::from(vmax))?.rank();
            Ok(AlphaResult { alpha: 1.0, achieved_rank: rank, c_target: c, exact: rank == c })
        }
        Err(e) => Err(e),
    }
}

/// Compresses one layer and also returns the α-search outcome.
pub fn compress_layer_with_info(
    w: &TensorF32,
    spec: &LayerSpec,
    opt: &CompressOptions,
) -> Result<(CompressedLayer, AlphaResult)> {
    opt.validate()?;
    spec.validate()?;
    let flat = flatten_layer(w, spec)?;
    let c = opt.c_target(flat.rows, flat.cols);
    if c == 0 {
        return Err(CbdError::InvalidConfig(format!(
            "layer {}: bottleneck {} gives rank target 0 on a {}x{} plane",
            spec.name, opt.bottleneck, flat.rows, flat.cols
        )));
    }
    let wmag = MatrixF32 {
        rows: flat.rows,
        cols: flat.cols,
        data: flat.data.iter().map(|v| v.abs()).collect(),
    };
    let picked = pick_alpha(&wmag, c)?;
    // α is carried as f32 from here on; every consumer sees the same value.
    let alpha = picked.alpha as f32;
    let n = normalize(&flat, alpha)?;
    let planes = expand(&n, opt.j, opt.sign_mode)?;
    let data = match planes.data {
        SignData::Plane { mag, sign } => {
            RecordData::Plane { mag: gate_planes(mag, n.q, opt.mode), sign }
        }
        SignData::Split { pos, neg } => RecordData::Split {
            pos: gate_planes(pos, n.q, opt.mode),
            neg: gate_planes(neg, n.q, opt.mode),
        },
    };
    let layer = CompressedLayer {
        spec: spec.clone(),
        j: opt.j,
        q: n.q,
        alpha,
        w_max: n.w_max,
        rows: flat.rows,
        cols: flat.cols,
        data,
    };
    Ok((layer, picked))
}

pub fn compress_layer(w: &TensorF32, spec: &LayerSpec, opt: &CompressOptions) -> Result<CompressedLayer> {
    compress_layer_with_info(w, spec, opt).map(|(l, _)| l)
}

/// Rebuilds the bit-plane set, multiplying factored planes back out.
pub fn layer_plane_set(l: &CompressedLayer) -> Result<BitPlaneSet> {
    let to_planes =
        |rs: &[PlaneRecord]| -> Result<Vec<Gf2Matrix>> { rs.iter().map(PlaneRecord::to_plane).collect() };
    let data = match &l.data {
        RecordData::Plane { mag, sign } => SignData::Plane { mag: to_planes(mag)?, sign: sign.clone() },
        RecordData::Split { pos, neg } => SignData::Split { pos: to_planes(pos)?, neg: to_planes(neg)? },
    };
    Ok(BitPlaneSet {
        j: l.j,
        q: l.q,
        alpha: l.alpha,
        w_max: l.w_max,
        rows: l.rows,
        cols: l.cols,
        data,
    })
}

/// Reconstructs the weight tensor in its original shape.
pub fn decompress_layer(l: &CompressedLayer) -> Result<TensorF32> {
    let recon = reconstruct(&layer_plane_set(l)?);
    unflatten_layer(&recon, &l.spec)
}

// ── Multiply-count model ─────────────────────────────────────────────────

/// Multiply counts per output position for a k×k convolution with n input
/// and m output channels, direct versus through a rank-c bottleneck
/// (a k×1 column stage into c channels, then a 1×k row stage out).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OpCounts {
    /// n·m·k².
    pub direct: u128,
    /// (m+n)·c·k.
    pub factored: u128,
    /// direct/factored as a reduced fraction.
    pub ratio: (u128, u128),
    /// nmk/(m+n) as a reduced fraction; factoring wins iff c is strictly
    /// below this value.
    pub break_even_c: (u128, u128),
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn reduced(num: u128, den: u128) -> (u128, u128) {
    let g = gcd(num, den).max(1);
    (num / g, den / g)
}

impl OpCounts {
    pub fn speedup(&self) -> f64 {
        self.ratio.0 as f64 / self.ratio.1 as f64
    }

    /// True when the factored path multiplies strictly less.
    pub fn saves_ops(&self) -> bool {
        self.factored < self.direct
    }
}

pub fn op_counts(n: usize, m: usize, k: usize, c: usize) -> OpCounts {
    let (n, m, k, c) = (n as u128, m as u128, k as u128, c as u128);
    let direct = n * m * k * k;
    let factored = (m + n) * c * k;
    OpCounts {
        direct,
        factored,
        ratio: reduced(direct, factored.max(1)),
        break_even_c: reduced(n * m * k, m + n),
    }
}

// ── Bit accounting and reports ───────────────────────────────────────────

/// Bits of one compressed layer, split by where they go. `payload` excludes
/// the two fp32 scalars, which are reported separately as `overhead`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BitBreakdown {
    pub dense_plane_bits: u64,
    pub factored_plane_bits: u64,
    pub sign_bits: u64,
    pub payload_bits: u64,
    pub overhead_bits: u64,
    /// Payload if every plane were stored densely.
    pub dense_equivalent_bits: u64,
    pub fp32_bits: u64,
}

pub fn bit_breakdown(l: &CompressedLayer) -> BitBreakdown {
    let mut dense = 0u64;
    let mut factored = 0u64;
    let mut dense_equiv = 0u64;
    for group in l.record_groups() {
        for r in group {
            let (h, w) = r.shape();
            dense_equiv += (h * w) as u64;
            match r {
                PlaneRecord::Dense(_) => dense += r.bits(),
                PlaneRecord::Factored { .. } => factored += r.bits(),
            }
        }
    }
    let sign_bits = match &l.data {
        RecordData::Plane { sign, .. } => (sign.rows() * sign.cols()) as u64,
        RecordData::Split { .. } => 0,
    };
    BitBreakdown {
        dense_plane_bits: dense,
        factored_plane_bits: factored,
        sign_bits,
        payload_bits: dense + factored + sign_bits,
        overhead_bits: 64,
        dense_equivalent_bits: dense_equiv + sign_bits,
        fp32_bits: 32 * (l.rows * l.cols) as u64,
    }
}

/// How one plane ended up stored.
#[derive(Debug, Clone, Serialize)]
pub struct PlaneReport {
    pub group: PlaneGroup,
    pub exponent: Option<i32>,
    pub ones: u64,
    pub fraction: f64,
    pub factored: bool,
    pub rank: Option<usize>,
    pub integer_exact: Option<bool>,
    pub bits: u64,
}

/// Everything the CLI and JSON reports surface about one layer.
#[derive(Debug, Clone, Serialize)]
pub struct LayerReport {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub j: u32,
    pub q: i32,
    pub alpha: f32,
    pub w_max: f32,
    pub sign_mode: SignMode,
    pub alpha_search: Option<AlphaResult>,
    pub bits: BitBreakdown,
    /// Payload bits per weight.
    pub effective_bitrate: f64,
    /// (Payload + scalar overhead) bits per weight.
    pub effective_bitrate_with_overhead: f64,
    /// Present when the rank target is known (i.e. the layer was compressed
    /// in this run, not loaded from disk).
    pub ops: Option<OpCounts>,
    pub planes: Vec<PlaneReport>,
    /// Deviation against the original weights, when they are on hand.
    pub error: Option<ErrorStats>,
}

pub fn layer_report(
    l: &CompressedLayer,
    original: Option<&TensorF32>,
    alpha_search: Option<AlphaResult>,
) -> Result<LayerReport> {
    let set = layer_plane_set(l)?;
    let stats = plane_sparsity(&set, false);
    let mut planes = Vec::with_capacity(stats.len());
    let mut records: Vec<Option<&PlaneRecord>> = Vec::new();
    match &l.data {
        RecordData::Plane { mag, .. } => {
            records.extend(mag.iter().map(Some));
            records.push(None); // sign plane
        }
        RecordData::Split { pos, neg } => {
            records.extend(pos.iter().map(Some));
            records.extend(neg.iter().map(Some));
        }
    }
    debug_assert_eq!(records.len(), stats.len());
    for (stat, rec) in stats.iter().zip(records) {
        let (factored, rank, integer_exact) = match rec {
            Some(PlaneRecord::Factored { rank, integer_exact, .. }) => {
                (true, Some(*rank), Some(*integer_exact))
            }
            _ => (false, None, None),
        };
        let bits = rec.map_or((l.rows * l.cols) as u64, PlaneRecord::bits);
        planes.push(PlaneReport {
            group: stat.group,
            exponent: stat.exponent,
            ones: stat.ones,
            fraction: stat.fraction,
            factored,
            rank,
            integer_exact,
            bits,
        });
    }

    let bits = bit_breakdown(l);
    let weights = (l.rows * l.cols).max(1) as f64;
    let error = match original {
        Some(t) => {
            let flat = flatten_layer(t, &l.spec)?;
            Some(error_stats(&flat, &reconstruct(&set))?)
        }
        None => None,
    };
    Ok(LayerReport {
        name: l.spec.name.clone(),
        rows: l.rows,
        cols: l.cols,
        j: l.j,
        q: l.q,
        alpha: l.alpha,
        w_max: l.w_max,
        sign_mode: l.sign_mode(),
        alpha_search,
        bits,
        effective_bitrate: bits.payload_bits as f64 / weights,
        effective_bitrate_with_overhead: (bits.payload_bits + bits.overhead_bits) as f64 / weights,
        ops: alpha_search.map(|a| op_counts(l.spec.n, l.spec.m, l.spec.k, a.achieved_rank)),
        planes,
        error,
    })
}

/// Model-level rollup of per-layer reports.
#[derive(Debug, Clone, Serialize)]
pub struct ModelReport {
    pub layers: Vec<LayerReport>,
    pub payload_bits: u64,
    pub overhead_bits: u64,
    pub fp32_bits: u64,
    pub effective_bitrate: f64,
    pub effective_bitrate_with_overhead: f64,
    pub max_abs_error: Option<f64>,
}

pub fn model_report(layers: Vec<LayerReport>) -> ModelReport {
    let payload: u64 = layers.iter().map(|l| l.bits.payload_bits).sum();
    let overhead: u64 = layers.iter().map(|l| l.bits.overhead_bits).sum();
    let fp32: u64 = layers.iter().map(|l| l.bits.fp32_bits).sum();
    let weights: f64 = layers.iter().map(|l| (l.rows * l.cols) as f64).sum::<f64>().max(1.0);
    let max_abs_error = layers
        .iter()
        .filter_map(|l| l.error.map(|e| e.max_abs))
        .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.max(e))));
    ModelReport {
        payload_bits: payload,
        overhead_bits: overhead,
        fp32_bits: fp32,
        effective_bitrate: payload as f64 / weights,
        effective_bitrate_with_overhead: (payload + overhead) as f64 / weights,
        max_abs_error,
        layers,
    }
}

// ── Layer container ──────────────────────────────────────────────────────

fn write_record(out: &mut Vec<u8>, r: &PlaneRecord) {
    match r {
        PlaneRecord::Dense(m) => {
            out.push(0);
            m.write_into(out);
        }
        PlaneRecord::Factored { rank, b, c, integer_exact } => {
            out.push(1);
            put_u32(out, *rank as u32);
            out.push(u8::from(*integer_exact));
            b.write_into(out);
            c.write_into(out);
        }
    }
}

fn read_record(r: &mut ByteReader<'_>, rows: usize, cols: usize) -> Result<PlaneRecord> {
    let check = |m: &Gf2Matrix, rows: usize, cols: usize, what: &str| -> Result<()> {
        if m.rows() != rows || m.cols() != cols {
            return Err(CbdError::Format(format!(
                "{what} is {}x{}, expected {rows}x{cols}",
                m.rows(),
                m.cols()
            )));
        }
        Ok(())
    };
    match r.u8()? {
        0 => {
            let m = Gf2Matrix::read_from(r)?;
            check(&m, rows, cols, "dense plane")?;
            Ok(PlaneRecord::Dense(m))
        }
        1 => {
            let rank = r.u32()? as usize;
            let integer_exact = match r.u8()? {
                0 => false,
                1 => true,
                v => return Err(CbdError::Format(format!("bad integer-exact flag {v}"))),
            };
            let b = Gf2Matrix::read_from(r)?;
            let c = Gf2Matrix::read_from(r)?;
            check(&b, rows, rank, "left factor")?;
            check(&c, rank, cols, "right factor")?;
            Ok(PlaneRecord::Factored { rank, b, c, integer_exact })
        }
        t => Err(CbdError::Format(format!("bad plane record tag {t}"))),
    }
}

fn write_records(out: &mut Vec<u8>, rs: &[PlaneRecord]) {
    put_u16(out, rs.len() as u16);
    for r in rs {
        write_record(out, r);
    }
}

fn read_records(r: &mut ByteReader<'_>, expect: usize, rows: usize, cols: usize) -> Result<Vec<PlaneRecord>> {
    let count = r.u16()? as usize;
    if count != expect {
        return Err(CbdError::Format(format!("{count} plane records, expected {expect}")));
    }
    (0..count).map(|_| read_record(r, rows, cols)).collect()
}

pub fn layer_to_bytes(l: &CompressedLayer) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&LAYER_MAGIC);
    put_u16(&mut out, LAYER_VERSION);
    put_u32(&mut out, l.spec.name.len() as u32);
    out.extend_from_slice(l.spec.name.as_bytes());
    out.push(match l.spec.kind {
        LayerKind::Conv => 0,
        LayerKind::Fc => 1,
    });
    for dim in [l.spec.n, l.spec.m, l.spec.k, l.spec.stride, l.spec.pad] {
        put_u32(&mut out, dim as u32);
    }
    put_u16(&mut out, l.j as u16);
    put_i16(&mut out, l.q as i16);
    out.push(match l.sign_mode() {
        SignMode::Plane => 0,
        SignMode::Split => 1,
    });
    put_f32(&mut out, l.w_max);
    put_f32(&mut out, l.alpha);
    put_u64(&mut out, l.rows as u64);
    put_u64(&mut out, l.cols as u64);
    match &l.data {
        RecordData::Plane { mag, sign } => {
            write_records(&mut out, mag);
            sign.write_into(&mut out);
        }
        RecordData::Split { pos, neg } => {
            write_records(&mut out, pos);
            write_records(&mut out, neg);
        }
    }
    out
}

pub fn layer_from_bytes(buf: &[u8]) -> Result<CompressedLayer> {
    let mut r = ByteReader::new(buf);
    let magic = r.take(4)?;
    if magic != LAYER_MAGIC {
        return Err(CbdError::BadMagic {
            expected: LAYER_MAGIC,
            found: [magic[0], magic[1], magic[2], magic[3]],
        });
    }
    let version = r.u16()?;
    if version != LAYER_VERSION {
        return Err(CbdError::UnsupportedVersion(version));
    }
    let name_len = r.u32()? as usize;
    let name = String::from_utf8(r.take(name_len)?.to_vec())
        .map_err(|_| CbdError::Format("layer name is not UTF-8".into()))?;
    let kind = match r.u8()? {
        0 => LayerKind::Conv,
        1 => LayerKind::Fc,
        k => return Err(CbdError::Format(format!("bad layer kind {k}"))),
    };
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let spec = LayerSpec { name, kind, n: dims[0], m: dims[1], k: dims[2], stride: dims[3], pad: dims[4] };
    spec.validate()?;
    let j = u32::from(r.u16()?);
    let q = i32::from(r.i16()?);
    let sign_mode = match r.u8()? {
        0 => SignMode::Plane,
        1 => SignMode::Split,
        v => return Err(CbdError::Format(format!("bad sign mode {v}"))),
    };
    let w_max = r.f32()?;
    let alpha = r.f32()?;
    if !(w_max.is_finite() && w_max > 0.0) {
        return Err(CbdError::Format(format!("bad weight scale {w_max}")));
    }
    if ceil_log2(alpha)? != q {
        return Err(CbdError::Format(format!("alpha {alpha} does not match stored q {q}")));
    }
    let rows = r.len_u64()?;
    let cols = r.len_u64()?;
    if (rows, cols) != spec.plane_dims() {
        return Err(CbdError::Format(format!(
            "plane is {rows}x{cols}, layer spec implies {}x{}",
            spec.plane_dims().0,
            spec.plane_dims().1
        )));
    }
    let planes = j.checked_sub(1).ok_or_else(|| CbdError::Format("bit count 0".into()))? as usize;
    let data = match sign_mode {
        SignMode::Plane => {
            let mag = read_records(&mut r, planes, rows, cols)?;
            let sign = Gf2Matrix::read_from(&mut r)?;
            if sign.rows() != rows || sign.cols() != cols {
                return Err(CbdError::Format("sign plane shape mismatch".into()));
            }
            RecordData::Plane { mag, sign }
        }
        SignMode::Split => RecordData::Split {
            pos: read_records(&mut r, planes, rows, cols)?,
            neg: read_records(&mut r, planes, rows, cols)?,
        },
    };
    r.finish()?;
    Ok(CompressedLayer { spec, j, q, alpha, w_max, rows, cols, data })
}

pub fn write_layer(l: &CompressedLayer, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &layer_to_bytes(l))
}

pub fn read_layer(path: impl AsRef<Path>) -> Result<CompressedLayer> {
    let buf = fs::read(path.as_ref()).map_err(|e| CbdError::io(path.as_ref(), e))?;
    layer_from_bytes(&buf)
}

// ── Tests ────────────────────────────────────────────────────────────────
