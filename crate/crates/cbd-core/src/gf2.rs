//! Bit-packed binary matrices: GF(2) rank, lossless rank factorization, and
//! the mod-2 / integer products needed to validate it.
//!
//! Every binary matrix `A` factors as `A = (B · C) mod 2` with inner
//! dimension exactly `rank(A)`, because Gaussian elimination over GF(2) uses
//! only self-inverse row operations. The factorization here records those
//! operations word-parallel, so cost stays `O(w · h²)` in 64-bit word steps.

use std::fmt;

use crate::bytes::{put_u64, ByteReader};
use crate::error::{CbdError, Result};

// ── Matrix type ──────────────────────────────────────────────────────────

/// Binary matrix stored row-major in 64-bit words, low bit = column 0 of the
/// word. Padding bits past `cols` are always zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    width: usize,
    bits: Vec<u64>,
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let width = cols.div_ceil(64);
        Gf2Matrix { rows, cols, width, bits: vec![0; rows * width] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if f(r, c) {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    /// Builds from 0/1 row literals; handy in tests.
    pub fn from_rows(rows: &[&[u8]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| rows[i][j] != 0)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        (self.bits[r * self.width + c / 64] >> (c % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let w = &mut self.bits[r * self.width + c / 64];
        if v {
            *w |= 1 << (c % 64);
        } else {
            *w &= !(1 << (c % 64));
        }
    }

    #[inline]
    fn row(&self, r: usize) -> &[u64] {
        &self.bits[r * self.width..(r + 1) * self.width]
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    pub fn transpose(&self) -> Gf2Matrix {
        let mut t = Gf2Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for wi in 0..self.width {
                let mut w = self.bits[r * self.width + wi];
                while w != 0 {
                    let b = w.trailing_zeros() as usize;
                    t.set(wi * 64 + b, r, true);
                    w &= w - 1;
                }
            }
        }
        t
    }

    // ── Rank ─────────────────────────────────────────────────────────────

    /// Rank over GF(2) by Gaussian elimination on a working copy.
    pub fn rank(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return 0;
        }
        let width = self.width;
        let mut work = self.bits.clone();
        let mut r = 0;
        for col in 0..self.cols {
            let (wi, bit) = (col / 64, col % 64);
            let pivot = (r..self.rows).find(|&row| (work[row * width + wi] >> bit) & 1 == 1);
            let Some(p) = pivot else { continue };
            if p != r {
                for w in 0..width {
                    work.swap(p * width + w, r * width + w);
                }
            }
            for row in r + 1..self.rows {
                if (work[row * width + wi] >> bit) & 1 == 1 {
                    for w in 0..width {
                        work[row * width + w] ^= work[r * width + w];
                    }
                }
            }
            r += 1;
            if r == self.rows {
                break;
            }
        }
        r
    }

    // ── Products ─────────────────────────────────────────────────────────

    /// Matrix product reduced mod 2.
    pub fn mul_gf2(&self, rhs: &Gf2Matrix) -> Result<Gf2Matrix> {
        check_inner(self, rhs)?;
        let rt = rhs.transpose();
        let mut out = Gf2Matrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let a = self.row(r);
            for c in 0..rhs.cols {
                let parity = dot_popcount(a, rt.row(c)) & 1;
                if parity == 1 {
                    out.set(r, c, true);
                }
            }
        }
        Ok(out)
    }

    /// Ordinary integer product of the 0/1 entries.
    pub fn mul_int(&self, rhs: &Gf2Matrix) -> Result<IntMatrix> {
        check_inner(self, rhs)?;
        let rt = rhs.transpose();
        let mut data = Vec::with_capacity(self.rows * rhs.cols);
        for r in 0..self.rows {
            let a = self.row(r);
            for c in 0..rhs.cols {
                data.push(dot_popcount(a, rt.row(c)));
            }
        }
        Ok(IntMatrix { rows: self.rows, cols: rhs.cols, data })
    }

    // ── Factorization ────────────────────────────────────────────────────

    /// Lossless rank factorization: `(B · C) mod 2 == self` with inner
    /// dimension `rank(self)`.
    ///
    /// Elimination applies only row swaps and row additions, both
    /// self-inverse over GF(2); the inverses accumulate into `B` while the
    /// reduced matrix provides `C`. Wide inputs (rows ≤ cols) are factorized
    /// through their transpose and the factors swapped back.
    pub fn decompose(&self) -> Factorization {
        let f = if self.rows <= self.cols {
            let t = decompose_tall(&self.transpose());
            let b = t.c.transpose();
            let c = t.b.transpose();
            let integer_exact = product_is_unit_bounded(&b, &c);
            Factorization { rank: t.rank, b, c, integer_exact }
        } else {
            decompose_tall(self)
        };
        debug_assert_eq!(f.b.mul_gf2(&f.c).unwrap(), *self);
        debug_assert_eq!(f.rank, self.rank());
        f
    }

    // ── Serialization ────────────────────────────────────────────────────

    /// Layout: rows u64, cols u64, then ⌈cols/64⌉ little-endian words per row.
    pub fn write_into(&self, out: &mut Vec<u8>) {
        put_u64(out, self.rows as u64);
        put_u64(out, self.cols as u64);
        for &w in &self.bits {
            put_u64(out, w);
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.bits.len() * 8);
        self.write_into(&mut out);
        out
    }

    pub(crate) fn read_from(r: &mut ByteReader<'_>) -> Result<Gf2Matrix> {
        let rows = r.len_u64()?;
        let cols = r.len_u64()?;
        let width = cols.div_ceil(64);
        let nwords = rows.checked_mul(width).ok_or(CbdError::DimOverflow)?;
        let mut bits = Vec::with_capacity(nwords);
        for _ in 0..nwords {
            bits.push(r.u64()?);
        }
        let m = Gf2Matrix { rows, cols, width, bits };
        if cols % 64 != 0 {
            let mask = !0u64 << (cols % 64);
            for row in 0..rows {
                if m.bits[row * width + width - 1] & mask != 0 {
                    return Err(CbdError::Format("nonzero padding bits".into()));
                }
            }
        }
        Ok(m)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Gf2Matrix> {
        let mut r = ByteReader::new(buf);
        let m = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(m)
    }
}

impl fmt::Display for Gf2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            for c in 0..self.cols {
                write!(f, "{}", u8::from(self.get(r, c)))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[inline]
fn dot_popcount(a: &[u64], b: &[u64]) -> u64 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as u64).sum()
}

fn check_inner(a: &Gf2Matrix, b: &Gf2Matrix) -> Result<()> {
    if a.cols != b.rows {
        return Err(CbdError::DimMismatch(format!(
            "{}x{} * {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(())
}

// ── Integer-valued products ──────────────────────────────────────────────

/// Small dense integer matrix, the result of [`Gf2Matrix::mul_int`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u64>,
}

impl IntMatrix {
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.data[r * self.cols + c]
    }
}

// ── Factorization results ────────────────────────────────────────────────

/// Result of [`Gf2Matrix::decompose`]: `A = (B · C) mod 2`, inner dimension
/// `rank`. `integer_exact` additionally certifies that the plain integer
/// product `B · C` equals `A`, which the two-stage convolution path needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub rank: usize,
    pub b: Gf2Matrix,
    pub c: Gf2Matrix,
    pub integer_exact: bool,
}

/// Outcome of re-verifying a factorization against its source matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Losslessness {
    pub gf2_exact: bool,
    pub integer_exact: bool,
}

/// Recomputes both products and compares against `a`.
pub fn verify_lossless(a: &Gf2Matrix, f: &Factorization) -> Result<Losslessness> {
    if f.b.rows() != a.rows() || f.c.cols() != a.cols() || f.b.cols() != f.c.rows() {
        return Err(CbdError::DimMismatch(format!(
            "factors {}x{} * {}x{} against {}x{}",
            f.b.rows(),
            f.b.cols(),
            f.c.rows(),
            f.c.cols(),
            a.rows(),
            a.cols()
        )));
    }
    let gf2_exact = f.b.mul_gf2(&f.c)? == *a;
    let integer_exact = gf2_exact && product_is_unit_bounded(&f.b, &f.c);
    Ok(Losslessness { gf2_exact, integer_exact })
}

/// True when every entry of the integer product `B · C` is 0 or 1. Combined
/// with mod-2 correctness this is exactly integer exactness.
fn product_is_unit_bounded(b: &Gf2Matrix, c: &Gf2Matrix) -> bool {
    let ct = c.transpose();
    for r in 0..b.rows() {
        let br = b.row(r);
        for y in 0..c.cols() {
            if dot_popcount(br, ct.row(y)) > 1 {
                return false;
            }
        }
    }
    true
}

/// Elimination core for `rows > cols` inputs (also correct for any shape).
///
/// Row operations applied to the working copy are mirrored as column
/// operations on an accumulator kept transposed, so both sides stay
/// word-parallel. After elimination the nonzero rows of the reduced matrix
/// form `C` and the first `rank` accumulator columns form `B`.
fn decompose_tall(a: &Gf2Matrix) -> Factorization {
    let (h, w, width) = (a.rows, a.cols, a.width);
    let mut d = a.bits.clone();
    // bt holds Bᵀ: swapping B's columns i,j = swapping bt rows i,j; adding
    // B's column i into column r = adding bt row i into row r.
    let mut bt = Gf2Matrix::identity(h);
    let mut r = 0;
    for col in 0..w {
        let (wi, bit) = (col / 64, col % 64);
        let pivot = (r..h).find(|&row| (d[row * width + wi] >> bit) & 1 == 1);
        let Some(p) = pivot else { continue };
        if p != r {
            for k in 0..width {
                d.swap(p * width + k, r * width + k);
            }
            for k in 0..bt.width {
                bt.bits.swap(p * bt.width + k, r * bt.width + k);
            }
        }
        for row in 0..h {
            if row != r && (d[row * width + wi] >> bit) & 1 == 1 {
                for k in 0..width {
                    d[row * width + k] ^= d[r * width + k];
                }
                let (dst, src) = (r * bt.width, row * bt.width);
                for k in 0..bt.width {
                    bt.bits[dst + k] ^= bt.bits[src + k];
                }
            }
        }
        r += 1;
        if r == h {
            break;
        }
    }

    let mut c = Gf2Matrix::zeros(r, w);
    c.bits.copy_from_slice(&d[..r * width]);
    let mut b = Gf2Matrix::zeros(h, r);
    for j in 0..r {
        for i in 0..h {
            if bt.get(j, i) {
                b.set(i, j, true);
            }
        }
    }
    let integer_exact = product_is_unit_bounded(&b, &c);
    Factorization { rank: r, b, c, integer_exact }
}

// ── Tests ────────────────────────────────────────────────────────────────
