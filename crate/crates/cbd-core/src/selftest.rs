//! Built-in verification suites, runnable from the CLI. Every suite checks a
//! fast implementation against an independently written oracle: rank against
//! span enumeration and a byte-matrix elimination, the α-search against a
//! direct value-threshold scan, quantization against the closed-form grid,
//! and multiply counts against literal loop counting.

use std::collections::HashSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::alpha::{search_alpha, AlphaResult};
use crate::compress::op_counts;
use crate::error::CbdError;
use crate::gf2::{verify_lossless, Gf2Matrix};
use crate::quant::{code_value, magnitude_code};
use crate::store::MatrixF32;

// ── Oracles ──────────────────────────────────────────────────────────────

/// Rank by enumerating the row span: the span of an r-dimensional space has
/// exactly 2^r distinct vectors. Only for small matrices.
pub fn span_rank(m: &Gf2Matrix) -> usize {
    assert!(m.rows() <= 16 && m.cols() <= 64, "span enumeration blows up");
    let rows: Vec<u64> = (0..m.rows())
        .map(|r| (0..m.cols()).fold(0u64, |acc, c| acc | (u64::from(m.get(r, c)) << c)))
        .collect();
    let mut span = HashSet::new();
    for subset in 0u32..(1 << m.rows()) {
        let mut v = 0u64;
        for (r, &row) in rows.iter().enumerate() {
            if (subset >> r) & 1 == 1 {
                v ^= row;
            }
        }
        span.insert(v);
    }
    span.len().ilog2() as usize
}

/// Rank by plain byte-matrix elimination, no bit packing.
pub fn byte_rank(m: &Gf2Matrix) -> usize {
    let mut a: Vec<Vec<u8>> = (0..m.rows())
        .map(|r| (0..m.cols()).map(|c| u8::from(m.get(r, c))).collect())
        .collect();
    let mut rank = 0;
    for col in 0..m.cols() {
        let Some(pivot) = (rank..a.len()).find(|&r| a[r][col] == 1) else {
            continue;
        };
        a.swap(rank, pivot);
        for r in 0..a.len() {
            if r != rank && a[r][col] == 1 {
                for c in 0..m.cols() {
                    a[r][c] ^= a[rank][c];
                }
            }
        }
        rank += 1;
        if rank == a.len() {
            break;
        }
    }
    rank
}

/// The α-search restated as a direct scan over value thresholds: for each
/// distinct positive value v in descending order, build the ≥ v indicator
/// from scratch and take the first whose rank hits `c`, else the deepest
/// with rank ≤ `c`, else nothing.
pub fn threshold_scan_alpha(wmag: &MatrixF32, c: usize) -> Option<AlphaResult> {
    let mut values: Vec<f32> = wmag.data.iter().copied().filter(|&v| v > 0.0).collect();
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    values.dedup();
    let vmax = f64::from(*values.first()?);
    let mut fallback = None;
    for &v in &values {
        let ind = Gf2Matrix::from_fn(wmag.rows, wmag.cols, |r, cc| wmag.get(r, cc) >= v);
        let rank = byte_rank(&ind);
        let alpha = (vmax / f64::from(v)).max(1.0);
        if rank == c {
            return Some(AlphaResult { alpha, achieved_rank: rank, c_target: c, exact: true });
        }
        if rank < c {
            fallback = Some(AlphaResult { alpha, achieved_rank: rank, c_target: c, exact: false });
        }
    }
    fallback
}

/// Multiplies of a direct k×k convolution for one output position, counted
/// one loop iteration at a time.
pub fn count_direct_multiplies(n: usize, m: usize, k: usize) -> u128 {
    let mut count = 0u128;
    for _co in 0..m {
        for _ci in 0..n {
            for _kh in 0..k {
                for _kw in 0..k {
                    count += 1;
                }
            }
        }
    }
    count
}

/// Multiplies of the two-stage path for one output position: a k×1 column
/// stage into c channels (one mid position per output position) plus a 1×k
/// row stage out of them.
pub fn count_factored_multiplies(n: usize, m: usize, k: usize, c: usize) -> u128 {
    let mut count = 0u128;
    for _r in 0..c {
        for _ci in 0..n {
            for _kh in 0..k {
                count += 1;
            }
        }
    }
    for _co in 0..m {
        for _r in 0..c {
            for _kw in 0..k {
                count += 1;
            }
        }
    }
    count
}

// ── Suite plumbing ───────────────────────────────────────────────────────

/// Outcome of one suite: every failed case is recorded as a message.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub failures: Vec<String>,
    pub millis: u128,
}

impl SuiteResult {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
    pub millis: u128,
}

impl SelftestReport {
    pub fn ok(&self) -> bool {
        self.suites.iter().all(SuiteResult::ok)
    }
}

struct Suite {
    name: &'static str,
    cases: usize,
    failures: Vec<String>,
    started: Instant,
}

impl Suite {
    fn new(name: &'static str) -> Self {
        Suite { name, cases: 0, failures: Vec::new(), started: Instant::now() }
    }

    fn case(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok && self.failures.len() < 16 {
            self.failures.push(detail());
        }
    }

    fn finish(self) -> SuiteResult {
        SuiteResult {
            name: self.name.to_string(),
            cases: self.cases,
            failures: self.failures,
            millis: self.started.elapsed().as_millis(),
        }
    }
}

fn random_gf2(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> Gf2Matrix {
    Gf2Matrix::from_fn(rows, cols, |_, _| rng.random_bool(density))
}

fn every_3x3() -> impl Iterator<Item = Gf2Matrix> {
    (0u32..512).map(|bits| Gf2Matrix::from_fn(3, 3, |r, c| (bits >> (r * 3 + c)) & 1 == 1))
}

// ── Suites ───────────────────────────────────────────────────────────────

fn rank_suite(seed: u64) -> SuiteResult {
    let mut s = Suite::new("rank-vs-enumeration");
    for m in every_3x3() {
        let got = m.rank();
        let want = span_rank(&m);
        s.case(got == want, || format!("3x3 {m:?}: rank {got}, span says {want}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..300 {
        let density = rng.random_range(0.1..0.9);
        let m = random_gf2(&mut rng, 4, 4, density);
        let got = m.rank();
        let want = span_rank(&m);
        s.case(got == want, || format!("4x4 case {i}: rank {got}, span says {want}"));
    }
    for i in 0..100 {
        let rows = rng.random_range(1..=20);
        let cols = rng.random_range(1..=80);
        let density = rng.random_range(0.05..0.95);
        let m = random_gf2(&mut rng, rows, cols, density);
        let got = m.rank();
        let want = byte_rank(&m);
        s.case(got == want, || format!("{rows}x{cols} case {i}: rank {got}, bytes say {want}"));
    }
    s.finish()
}

fn decompose_suite(seed: u64) -> SuiteResult {
    let mut s = Suite::new("decompose-losslessness");
    let check = |s: &mut Suite, m: &Gf2Matrix, label: &dyn Fn() -> String| {
        let f = m.decompose();
        let shapes_ok = f.b.rows() == m.rows()
            && f.b.cols() == f.rank
            && f.c.rows() == f.rank
            && f.c.cols() == m.cols();
        let rank_ok = f.rank == byte_rank(m);
        let verdict = verify_lossless(m, &f);
        let lossless = verdict.as_ref().map(|v| v.gf2_exact).unwrap_or(false);
        let flag_ok = verdict.map(|v| v.integer_exact == f.integer_exact).unwrap_or(false);
        s.case(shapes_ok && rank_ok && lossless && flag_ok, || {
            format!(
                "{}: shapes_ok={shapes_ok} rank_ok={rank_ok} lossless={lossless} flag_ok={flag_ok}",
                label()
            )
        });
    };
    for (i, m) in every_3x3().enumerate() {
        check(&mut s, &m, &|| format!("3x3 #{i}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for i in 0..200 {
        let rows = rng.random_range(1..=48);
        let cols = rng.random_range(1..=48);
        let density = rng.random_range(0.02..0.6);
        let m = random_gf2(&mut rng, rows, cols, density);
        check(&mut s, &m, &|| format!("{rows}x{cols} case {i}"));
    }
    s.finish()
}

fn corruption_suite(seed: u64) -> SuiteResult {
    let mut s = Suite::new("corrupted-factor-detection");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbad);
    let mut done = 0;
    while done < 60 {
        let rows = rng.random_range(2..=24);
        let cols = rng.random_range(2..=24);
        let density = rng.random_range(0.1..0.5);
        let m = random_gf2(&mut rng, rows, cols, density);
        let mut f = m.decompose();
        if f.rank == 0 {
            continue;
        }
        done += 1;
        // Flip one bit of a factor; every factor row/column is nonzero, so
        // the product must change and verification must notice.
        if rng.random_bool(0.5) {
            let (r, c) = (rng.random_range(0..f.b.rows()), rng.random_range(0..f.b.cols()));
            let v = f.b.get(r, c);
            f.b.set(r, c, !v);
        } else {
            let (r, c) = (rng.random_range(0..f.c.rows()), rng.random_range(0..f.c.cols()));
            let v = f.c.get(r, c);
            f.c.set(r, c, !v);
        }
        let caught = !verify_lossless(&m, &f).map(|v| v.gf2_exact).unwrap_or(false);
        s.case(caught, || format!("{rows}x{cols}: bit flip went unnoticed"));
    }
    s.finish()
}

fn alpha_suite(seed: u64) -> SuiteResult {
    let mut s = Suite::new("alpha-search-vs-threshold-scan");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa1fa);
    for i in 0..150 {
        let rows = rng.random_range(2..=12);
        let cols = rng.random_range(2..=12);
        // Strictly distinct positive values in shuffled order.
        let mut vals: Vec<f32> = Vec::with_capacity(rows * cols);
        let mut v = 1.0f32;
        for _ in 0..rows * cols {
            v *= rng.random_range(0.85..0.999);
            vals.push(v);
        }
        for k in (1..vals.len()).rev() {
            vals.swap(k, rng.random_range(0..=k));
        }
        let w = MatrixF32 { rows, cols, data: vals };
        let c = rng.random_range(1..=rows.min(cols));
        let got = search_alpha(&w, c);
        let want = threshold_scan_alpha(&w, c);
        let ok = match (&got, &want) {
            (Ok(g), Some(w)) => g == w,
            (Err(CbdError::DegenerateInput(_)), None) => true,
            _ => false,
        };
        s.case(ok, || format!("case {i} ({rows}x{cols}, c={c}): {got:?} vs {want:?}"));
    }
    s.finish()
}

fn quant_suite() -> SuiteResult {
    let mut s = Suite::new("quantization-grid-scan");
    for j in 3u32..=10 {
        for q in 0i32..=3 {
            let alpha = 2f64.powi(q);
            let step = 2f64.powi(q + 1 - j as i32); // error bound Δw
            let samples = 2000;
            let mut prev_code = 0u64;
            for g in 0..=samples {
                let mag = alpha * g as f64 / samples as f64;
                let code = magnitude_code(mag, j, q);
                let err = (code_value(code, j, q) - mag).abs();
                s.case(err <= step, || format!("J={j} q={q} mag={mag}: err {err} > {step}"));
                s.case(code >= prev_code, || {
                    format!("J={j} q={q} mag={mag}: code {code} < previous {prev_code}")
                });
                // Re-coding a grid value must return the same code.
                let again = magnitude_code(code_value(code, j, q), j, q);
                s.case(again == code, || {
                    format!("J={j} q={q} mag={mag}: code {code} re-codes to {again}")
                });
                prev_code = code;
            }
        }
    }
    s.finish()
}

fn ops_suite() -> SuiteResult {
    let mut s = Suite::new("multiply-count-enumeration");
    for &(n, m, k) in &[(64usize, 64usize, 3usize), (16, 32, 5), (3, 8, 3), (10, 30, 1), (1, 1, 1)] {
        for c in [1usize, 2, 8, 32, 96] {
            let fast = op_counts(n, m, k, c);
            let direct = count_direct_multiplies(n, m, k);
            let factored = count_factored_multiplies(n, m, k, c);
            s.case(fast.direct == direct && fast.factored == factored, || {
                format!(
                    "(n={n},m={m},k={k},c={c}): formula {}/{}, counted {direct}/{factored}",
                    fast.direct, fast.factored
                )
            });
        }
    }
    s.finish()
}

/// Runs every suite. `seed` drives all randomized cases.
pub fn run_selftest(seed: u64) -> SelftestReport {
    let started = Instant::now();
    let suites = vec![
        rank_suite(seed),
        decompose_suite(seed),
        corruption_suite(seed),
        alpha_suite(seed),
        quant_suite(),
        ops_suite(),
    ];
    SelftestReport { seed, suites, millis: started.elapsed().as_millis() }
}

// ── Tests ────────────────────────────────────────────────────────────────
