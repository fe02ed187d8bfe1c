//! Composite binary expansion: normalize weights, slice the magnitudes into
//! power-of-two bit-planes, reconstruct, and measure sparsity and error.
//!
//! A normalized magnitude ŵ ∈ [0, α] is coded as J−1 binary planes indexed
//! i = −q … J−q−2 (q = ⌈log2 α⌉) holding the coefficients of 2^{−i}, with
//! one bit of sign information. Plane bits follow
//! ⌊(ŵ + Δw)/2^{−i}⌋ mod 2 with Δw = 2^{−J+q+1}, i.e. round-half-up onto
//! the dyadic grid of spacing 2Δw, which bounds the elementwise error by Δw
//! and makes the error non-increasing in J (the grids are nested).

use serde::{Deserialize, Serialize};

use crate::error::{CbdError, Result};
use crate::gf2::Gf2Matrix;
use crate::store::MatrixF32;

/// J values outside this range either carry no magnitude planes or exceed
/// the exact integer range of f64 rounding.
pub const MIN_BITS: u32 = 2;
pub const MAX_BITS: u32 = 52;

// ── Sign handling ────────────────────────────────────────────────────────

/// How the sign of a weight is carried alongside its magnitude planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignMode {
    /// One dense sign plane plus magnitude planes of |w̃| (J-bit accounting).
    Plane,
    /// Separate expansions of the positive and negative parts, which is what
    /// the two-stage convolution path executes.
    Split,
}

// ── Normalization ────────────────────────────────────────────────────────

/// Weights rescaled so the largest magnitude equals α.
#[derive(Debug, Clone)]
pub struct NormalizedTensor {
    pub rows: usize,
    pub cols: usize,
    /// w̃ = α · w / w_max, kept in f64 for the expansion arithmetic.
    pub values: Vec<f64>,
    pub w_max: f32,
    pub alpha: f32,
    pub q: i32,
}

/// Smallest integer q with 2^q ≥ alpha, robust to float dust in `log2`.
pub fn ceil_log2(alpha: f32) -> Result<i32> {
    if !(alpha.is_finite() && alpha >= 1.0) {
        return Err(CbdError::InvalidConfig(format!("alpha must be >= 1, got {alpha}")));
    }
    let a = f64::from(alpha);
    let mut q = a.log2().ceil() as i32;
    while 2f64.powi(q) < a {
        q += 1;
    }
    while q > 0 && 2f64.powi(q - 1) >= a {
        q -= 1;
    }
    Ok(q)
}

/// Rescales `w` so that max |w| maps to `alpha`.
pub fn normalize(w: &MatrixF32, alpha: f32) -> Result<NormalizedTensor> {
    let q = ceil_log2(alpha)?;
    let w_max = w.data.iter().fold(0.0f32, |m, &v| m.max(v.abs()));
    if w_max == 0.0 {
        return Err(CbdError::DegenerateInput("all-zero tensor has no scale".into()));
    }
    if !w_max.is_finite() {
        return Err(CbdError::NonFinite {
            index: w.data.iter().position(|v| !v.is_finite()).unwrap_or(0),
        });
    }
    let a = f64::from(alpha);
    let wm = f64::from(w_max);
    let values = w.data.iter().map(|&v| a * (f64::from(v) / wm)).collect();
    Ok(NormalizedTensor { rows: w.rows, cols: w.cols, values, w_max, alpha, q })
}

// ── Bit-plane sets ───────────────────────────────────────────────────────

/// Magnitude planes plus sign information for one layer.
#[derive(Debug, Clone, PartialEq)]
pub enum SignData {
    Plane { mag: Vec<Gf2Matrix>, sign: Gf2Matrix },
    Split { pos: Vec<Gf2Matrix>, neg: Vec<Gf2Matrix> },
}

/// The composite binary expansion of one layer: J−1 magnitude planes per
/// sign group, scalars to undo the normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct BitPlaneSet {
    pub j: u32,
    pub q: i32,
    pub alpha: f32,
    pub w_max: f32,
    pub rows: usize,
    pub cols: usize,
    pub data: SignData,
}

impl BitPlaneSet {
    /// Exponent i of the plane at vector position `idx`; its basis weight is
    /// 2^{−i}. Position 0 carries the largest weight 2^{q}.
    pub fn exponent(&self, idx: usize) -> i32 {
        idx as i32 - self.q
    }

    pub fn plane_count(&self) -> usize {
        (self.j - 1) as usize
    }

    pub fn sign_mode(&self) -> SignMode {
        match self.data {
            SignData::Plane { .. } => SignMode::Plane,
            SignData::Split { .. } => SignMode::Split,
        }
    }

    /// Elementwise bound on |reconstruct − original|, in original scale:
    /// w_max/α · 2^{−J+q+1}.
    pub fn error_bound(&self) -> f64 {
        f64::from(self.w_max) / f64::from(self.alpha) * 2f64.powi(1 + self.q - self.j as i32)
    }
}

/// Integer code of a magnitude: the J−1 plane bits of ŵ packed into one
/// integer, bit (t − i) holding plane i, where t = J − q − 2.
///
/// `⌊(ŵ + Δw)·2^i⌋ mod 2 = bit (t−i) of ⌊ŵ·2^t + 0.5⌋`, and the latter is
/// exact in f64: scaling by 2^t is exact, and ŵ·2^t ≤ 2^{J−2} leaves room
/// for the +0.5.
#[inline]
pub fn magnitude_code(mag: f64, j: u32, q: i32) -> u64 {
    let t = j as i32 - q - 2;
    (mag * 2f64.powi(t) + 0.5).floor() as u64
}

/// Magnitude represented by an integer code: code · 2^{−t}.
#[inline]
pub fn code_value(code: u64, j: u32, q: i32) -> f64 {
    code as f64 * 2f64.powi(-(j as i32 - q - 2))
}

fn check_bits(j: u32) -> Result<()> {
    if !(MIN_BITS..=MAX_BITS).contains(&j) {
        return Err(CbdError::InvalidConfig(format!(
            "bit count J must be in {MIN_BITS}..={MAX_BITS}, got {j}"
        )));
    }
    Ok(())
}

/// Expands normalized weights into their bit-plane set.
///
/// In `Plane` mode the sign plane marks strictly negative weights whose
/// magnitude code is nonzero; sign bits of weights that quantize to zero
/// are dropped so that expansion is idempotent on its own reconstruction.
pub fn expand(n: &NormalizedTensor, j: u32, mode: SignMode) -> Result<BitPlaneSet> {
    check_bits(j)?;
    let planes = (j - 1) as usize;
    let alpha = f64::from(n.alpha);
    let (rows, cols) = (n.rows, n.cols);

    let encode = |select: &dyn Fn(f64) -> f64| -> Vec<Gf2Matrix> {
        let mut mats = vec![Gf2Matrix::zeros(rows, cols); planes];
        for (pos, &v) in n.values.iter().enumerate() {
            let mag = select(v);
            assert!(mag <= alpha, "magnitude {mag} exceeds alpha {alpha}");
            let code = magnitude_code(mag, j, n.q);
            if code == 0 {
                continue;
            }
            let (r, c) = (pos / cols, pos % cols);
            for (idx, mat) in mats.iter_mut().enumerate() {
                if (code >> (j - 2 - idx as u32)) & 1 == 1 {
                    mat.set(r, c, true);
                }
            }
        }
        mats
    };

    let data = match mode {
        SignMode::Plane => {
            let mag = encode(&f64::abs);
            let mut sign = Gf2Matrix::zeros(rows, cols);
            for (pos, &v) in n.values.iter().enumerate() {
                if v < 0.0 && magnitude_code(-v, j, n.q) > 0 {
                    sign.set(pos / cols, pos % cols, true);
                }
            }
            SignData::Plane { mag, sign }
        }
        SignMode::Split => SignData::Split {
            pos: encode(&|v| v.max(0.0)),
            neg: encode(&|v| (-v).max(0.0)),
        },
    };

    Ok(BitPlaneSet { j, q: n.q, alpha: n.alpha, w_max: n.w_max, rows, cols, data })
}

/// Rebuilds the weight matrix: w_max/α · (±) Σ_i A_i · 2^{−i}, accumulated
/// in f64 and rounded to f32 once per element.
pub fn reconstruct(b: &BitPlaneSet) -> MatrixF32 {
    let scale = f64::from(b.w_max) / f64::from(b.alpha);
    let len = b.rows * b.cols;
    let mut acc = vec![0.0f64; len];

    let add = |planes: &[Gf2Matrix], sign: f64, acc: &mut Vec<f64>| {
        for (idx, plane) in planes.iter().enumerate() {
            let w = sign * 2f64.powi(-b.exponent(idx));
            for r in 0..b.rows {
                for c in 0..b.cols {
                    if plane.get(r, c) {
                        acc[r * b.cols + c] += w;
                    }
                }
            }
        }
    };

    match &b.data {
        SignData::Plane { mag, sign } => {
            add(mag, 1.0, &mut acc);
            for r in 0..b.rows {
                for c in 0..b.cols {
                    if sign.get(r, c) {
                        acc[r * b.cols + c] = -acc[r * b.cols + c];
                    }
                }
            }
        }
        SignData::Split { pos, neg } => {
            add(pos, 1.0, &mut acc);
            add(neg, -1.0, &mut acc);
        }
    }

    MatrixF32 {
        rows: b.rows,
        cols: b.cols,
        data: acc.iter().map(|&v| (v * scale) as f32).collect(),
    }
}

// ── Statistics ───────────────────────────────────────────────────────────

/// Which plane family a statistic describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneGroup {
    Magnitude,
    Sign,
    Positive,
    Negative,
}

/// Fraction of ones (and optionally GF(2) rank) of one plane.
#[derive(Debug, Clone, Serialize)]
pub struct PlaneStat {
    pub group: PlaneGroup,
    /// Exponent i of the plane; `None` for the sign plane.
    pub exponent: Option<i32>,
    pub ones: u64,
    pub fraction: f64,
    pub rank: Option<usize>,
}

fn stat(plane: &Gf2Matrix, group: PlaneGroup, exponent: Option<i32>, with_rank: bool) -> PlaneStat {
    let total = (plane.rows() * plane.cols()) as u64;
    let ones = plane.count_ones();
    PlaneStat {
        group,
        exponent,
        ones,
        fraction: if total == 0 { 0.0 } else { ones as f64 / total as f64 },
        rank: with_rank.then(|| plane.rank()),
    }
}

/// Per-plane sparsity statistics, in plane order.
pub fn plane_sparsity(b: &BitPlaneSet, with_rank: bool) -> Vec<PlaneStat> {
    let mut out = Vec::new();
    match &b.data {
        SignData::Plane { mag, sign } => {
            for (idx, p) in mag.iter().enumerate() {
                out.push(stat(p, PlaneGroup::Magnitude, Some(b.exponent(idx)), with_rank));
            }
            out.push(stat(sign, PlaneGroup::Sign, None, with_rank));
        }
        SignData::Split { pos, neg } => {
            for (idx, p) in pos.iter().enumerate() {
                out.push(stat(p, PlaneGroup::Positive, Some(b.exponent(idx)), with_rank));
            }
            for (idx, p) in neg.iter().enumerate() {
                out.push(stat(p, PlaneGroup::Negative, Some(b.exponent(idx)), with_rank));
            }
        }
    }
    out
}

/// Max-abs and mean-squared deviation between two equally shaped matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorStats {
    pub max_abs: f64,
    pub mse: f64,
}

pub fn error_stats(a: &MatrixF32, b: &MatrixF32) -> Result<ErrorStats> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(CbdError::ShapeMismatch {
            expected: format!("{}x{}", a.rows, a.cols),
            found: format!("{}x{}", b.rows, b.cols),
        });
    }
    let mut max_abs = 0.0f64;
    let mut sq = 0.0f64;
    for (&x, &y) in a.data.iter().zip(&b.data) {
        let d = (f64::from(x) - f64::from(y)).abs();
        max_abs = max_abs.max(d);
        sq += d * d;
    }
    let n = a.data.len().max(1) as f64;
    Ok(ErrorStats { max_abs, mse: sq / n })
}

/// Deviation between the original weights and the reconstruction of `b`.
pub fn reconstruction_error(w: &MatrixF32, b: &BitPlaneSet) -> Result<ErrorStats> {
    error_stats(w, &reconstruct(b))
}

// ── Tests ────────────────────────────────────────────────────────────────
