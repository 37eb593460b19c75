//! Words over the alphabet `{1..d}` and the truncated tensor algebra built on them.
//!
//! Coefficients of an element of `T^{<=N}(R^d)` are stored in one flat array in
//! length-major order, lexicographic within a length, so every homogeneous
//! level is a contiguous slice.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// A word `i_1 ... i_n` with 1-based letters.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(letters: impl Into<Vec<u8>>) -> Self {
        Word(letters.into())
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letter(a: u8) -> Self {
        Word(vec![a])
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn push(&mut self, letter: u8) {
        self.0.push(letter);
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Word {
        Word(self.0[range].to_vec())
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match self.0.iter().find(|&&a| a == 0 || a as usize > d) {
            Some(&letter) => Err(Error::LetterOutOfRange { letter, d }),
            None => Ok(()),
        }
    }
}

impl From<&[u8]> for Word {
    fn from(v: &[u8]) -> Self {
        Word(v.to_vec())
    }
}

impl<const N: usize> From<[u8; N]> for Word {
    fn from(v: [u8; N]) -> Self {
        Word(v.to_vec())
    }
}

/// Length-major, then lexicographic.
impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("()");
        }
        f.write_str("(")?;
        for (k, a) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// Flat indexing of all words of length `<= max_level` over `d` letters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WordIndexer {
    d: usize,
    max_level: usize,
    total_dim: usize,
}

impl WordIndexer {
    pub fn new(d: usize, max_level: usize) -> Self {
        assert!(d >= 1, "alphabet must be non-empty");
        assert!(d <= u8::MAX as usize, "alphabet too large");
        let total_dim = level_offset(d, max_level + 1);
        WordIndexer {
            d,
            max_level,
            total_dim,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Index of the first word of length `level`.
    pub fn offset(&self, level: usize) -> usize {
        level_offset(self.d, level)
    }

    /// Number of words of length exactly `level`.
    pub fn level_size(&self, level: usize) -> usize {
        self.d.pow(level as u32)
    }

    pub fn level_range(&self, level: usize) -> std::ops::Range<usize> {
        let start = self.offset(level);
        start..start + self.level_size(level)
    }

    /// Position of `w` within its own level.
    pub fn index_in_level(&self, w: &Word) -> usize {
        w.letters()
            .iter()
            .fold(0, |acc, &a| acc * self.d + (a as usize - 1))
    }

    pub fn index(&self, w: &Word) -> Result<usize> {
        if w.len() > self.max_level {
            return Err(Error::WordTooLong {
                len: w.len(),
                max_level: self.max_level,
            });
        }
        w.validate(self.d)?;
        Ok(self.offset(w.len()) + self.index_in_level(w))
    }

    pub fn word(&self, index: usize) -> Result<Word> {
        if index >= self.total_dim {
            return Err(Error::IndexOutOfRange {
                index,
                total_dim: self.total_dim,
            });
        }
        let mut level = 0;
        while self.offset(level + 1) <= index {
            level += 1;
        }
        let mut rem = index - self.offset(level);
        let mut letters = vec![0u8; level];
        for slot in letters.iter_mut().rev() {
            *slot = (rem % self.d) as u8 + 1;
            rem /= self.d;
        }
        Ok(Word(letters))
    }

    /// Every word in index order.
    pub fn words(&self) -> impl Iterator<Item = Word> + '_ {
        (0..self.total_dim).map(move |i| self.word(i).expect("index in range"))
    }

    /// Words of length exactly `level`, in index order.
    pub fn words_of_level(&self, level: usize) -> impl Iterator<Item = Word> + '_ {
        self.level_range(level)
            .map(move |i| self.word(i).expect("index in range"))
    }
}

fn level_offset(d: usize, level: usize) -> usize {
    if d == 1 {
        level
    } else {
        (d.pow(level as u32) - 1) / (d - 1)
    }
}

/// An element of the truncated tensor algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorCoeffs {
    indexer: WordIndexer,
    coeffs: Vec<f64>,
}

impl TensorCoeffs {
    pub fn zeros(indexer: WordIndexer) -> Self {
        TensorCoeffs {
            indexer,
            coeffs: vec![0.0; indexer.total_dim()],
        }
    }

    pub fn unit(indexer: WordIndexer) -> Self {
        let mut t = Self::zeros(indexer);
        t.coeffs[0] = 1.0;
        t
    }

    pub fn from_vec(indexer: WordIndexer, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != indexer.total_dim() {
            return Err(Error::Dimension(format!(
                "{} coefficients for tensor dimension {}",
                coeffs.len(),
                indexer.total_dim()
            )));
        }
        Ok(TensorCoeffs { indexer, coeffs })
    }

    /// A level-one element `sum_i v_i e_i`.
    pub fn from_vector(indexer: WordIndexer, v: &[f64]) -> Result<Self> {
        if v.len() != indexer.d() || indexer.max_level() < 1 {
            return Err(Error::Dimension(format!(
                "vector of length {} into T^<={}(R^{})",
                v.len(),
                indexer.max_level(),
                indexer.d()
            )));
        }
        let mut t = Self::zeros(indexer);
        t.coeffs[1..=v.len()].copy_from_slice(v);
        Ok(t)
    }

    pub fn indexer(&self) -> WordIndexer {
        self.indexer
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn get(&self, w: &Word) -> Result<f64> {
        Ok(self.coeffs[self.indexer.index(w)?])
    }

    /// Coefficient of `w`, zero when `w` is beyond the truncation level.
    pub fn coeff_or_zero(&self, w: &Word) -> f64 {
        self.indexer.index(w).map_or(0.0, |i| self.coeffs[i])
    }

    pub fn set(&mut self, w: &Word, value: f64) -> Result<()> {
        let i = self.indexer.index(w)?;
        self.coeffs[i] = value;
        Ok(())
    }

    pub fn level(&self, level: usize) -> &[f64] {
        &self.coeffs[self.indexer.level_range(level)]
    }

    pub fn level_mut(&mut self, level: usize) -> &mut [f64] {
        let r = self.indexer.level_range(level);
        &mut self.coeffs[r]
    }

    fn check_same(&self, other: &TensorCoeffs) -> Result<()> {
        if self.indexer != other.indexer {
            return Err(Error::Dimension(format!(
                "T^<={}(R^{}) vs T^<={}(R^{})",
                self.indexer.max_level(),
                self.indexer.d(),
                other.indexer.max_level(),
                other.indexer.d()
            )));
        }
        Ok(())
    }

    /// Projection onto a lower truncation level, or zero-padding to a higher one.
    pub fn with_level(&self, max_level: usize) -> TensorCoeffs {
        let ix = WordIndexer::new(self.indexer.d(), max_level);
        let mut out = TensorCoeffs::zeros(ix);
        let n = ix.total_dim().min(self.indexer.total_dim());
        out.coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        out
    }

    pub fn dot(&self, other: &TensorCoeffs) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn add(&self, other: &TensorCoeffs) -> Result<TensorCoeffs> {
        self.check_same(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(TensorCoeffs {
            indexer: self.indexer,
            coeffs,
        })
    }

    pub fn scaled(&self, c: f64) -> TensorCoeffs {
        TensorCoeffs {
            indexer: self.indexer,
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &TensorCoeffs) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Truncated concatenation (tensor) product.
    pub fn concat_mul(&self, other: &TensorCoeffs) -> Result<TensorCoeffs> {
        self.check_same(other)?;
        let ix = self.indexer;
        let mut out = TensorCoeffs::zeros(ix);
        for n in 0..=ix.max_level() {
            let base = ix.offset(n);
            for k in 0..=n {
                let a = self.level(k);
                let b = other.level(n - k);
                let stride = b.len();
                for (ia, &av) in a.iter().enumerate() {
                    if av == 0.0 {
                        continue;
                    }
                    let row = &mut out.coeffs[base + ia * stride..base + (ia + 1) * stride];
                    for (o, &bv) in row.iter_mut().zip(b) {
                        *o += av * bv;
                    }
                }
            }
        }
        Ok(out)
    }

    /// In place `self <- self ⊗ exp(delta)` for a level-one increment.
    pub fn mul_segment_exp(&mut self, delta: &[f64]) {
        let ix = self.indexer;
        let d = ix.d();
        assert_eq!(delta.len(), d, "increment dimension");
        let mut acc: Vec<f64> = Vec::new();
        let mut next: Vec<f64> = Vec::new();
        for n in (1..=ix.max_level()).rev() {
            // Horner: ((g_0 δ/n + g_1) δ/(n-1) + ...) δ/1 + g_n
            acc.clear();
            acc.extend_from_slice(self.level(0));
            for k in 0..n {
                let scale = 1.0 / (n - k) as f64;
                next.clear();
                next.reserve(acc.len() * d);
                for &a in &acc {
                    let a = a * scale;
                    next.extend(delta.iter().map(|&x| a * x));
                }
                let g = self.level(k + 1);
                if k + 1 < n {
                    for (x, &gv) in next.iter_mut().zip(g) {
                        *x += gv;
                    }
                }
                std::mem::swap(&mut acc, &mut next);
            }
            for (o, a) in self.level_mut(n).iter_mut().zip(&acc) {
                *o += a;
            }
        }
    }

    /// Truncated exponential of an element with zero constant term.
    pub fn exp(&self) -> Result<TensorCoeffs> {
        if self.coeffs[0] != 0.0 {
            return Err(Error::Dimension(
                "exponential needs a zero constant term".into(),
            ));
        }
        let ix = self.indexer;
        let unit = TensorCoeffs::unit(ix);
        let mut acc = unit.clone();
        for k in (1..=ix.max_level()).rev() {
            acc = unit.add(&self.scaled(1.0 / k as f64).concat_mul(&acc)?)?;
        }
        Ok(acc)
    }

    /// Truncated logarithm of an element with unit constant term.
    pub fn log(&self) -> Result<TensorCoeffs> {
        if (self.coeffs[0] - 1.0).abs() > 1e-12 {
            return Err(Error::Dimension(
                "logarithm needs a unit constant term".into(),
            ));
        }
        let ix = self.indexer;
        let mut x = self.clone();
        x.coeffs[0] = 0.0;
        // log(1 + x) = x (1 - x (1/2 - x (1/3 - ...)))
        let mut acc = TensorCoeffs::zeros(ix);
        for k in (1..=ix.max_level()).rev() {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            acc = x.concat_mul(&acc)?;
            acc.coeffs[0] += sign / k as f64;
        }
        x.concat_mul(&acc)
    }
}

/// `<L*_a b, w> = sum_u a(u) b(u w)`: contraction of `b` against prefixes from `a`.
pub fn left_contract(a: &TensorCoeffs, b: &TensorCoeffs) -> Result<TensorCoeffs> {
    a.check_same(b)?;
    let ix = a.indexer;
    let n = ix.max_level();
    let mut out = TensorCoeffs::zeros(ix);
    for k in 0..=n {
        let ak = a.level(k);
        for m in 0..=n - k {
            let bl = b.level(k + m);
            let stride = ix.level_size(m);
            let base = ix.offset(m);
            for (iu, &av) in ak.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let src = &bl[iu * stride..(iu + 1) * stride];
                for (o, &bv) in out.coeffs[base..base + stride].iter_mut().zip(src) {
                    *o += av * bv;
                }
            }
        }
    }
    Ok(out)
}

/// `<R*_a b, w> = sum_u a(u) b(w u)`: contraction of `b` against suffixes from `a`.
pub fn right_contract(a: &TensorCoeffs, b: &TensorCoeffs) -> Result<TensorCoeffs> {
    a.check_same(b)?;
    let ix = a.indexer;
    let n = ix.max_level();
    let mut out = TensorCoeffs::zeros(ix);
    for k in 0..=n {
        let ak = a.level(k);
        let ksize = ak.len();
        for m in 0..=n - k {
            let bl = b.level(m + k);
            let base = ix.offset(m);
            for iw in 0..ix.level_size(m) {
                let src = &bl[iw * ksize..(iw + 1) * ksize];
                out.coeffs[base + iw] += ak.iter().zip(src).map(|(x, y)| x * y).sum::<f64>();
            }
        }
    }
    Ok(out)
}

/// All interleavings of `a` and `b` preserving the internal order of each,
/// listed with multiplicity.
pub fn shuffle_mul(a: &Word, b: &Word) -> Vec<Word> {
    let n = a.len() + b.len();
    let mut out = Vec::new();
    // Choose which of the n output positions carry letters of `a`.
    for mask in 0u64..(1u64 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let (mut ia, mut ib) = (0, 0);
        let mut w = Vec::with_capacity(n);
        for pos in 0..n {
            if mask >> pos & 1 == 1 {
                w.push(a.letters()[ia]);
                ia += 1;
            } else {
                w.push(b.letters()[ib]);
                ib += 1;
            }
        }
        out.push(Word(w));
    }
    out
}

/// Every split of the positions of `w` into a subsequence and its complement.
///
/// The multiplicity of `(J, L)` in the result equals the coefficient of `w`
/// in `J ⧢ L`.
pub fn inverse_shuffle(w: &Word) -> Vec<(Word, Word)> {
    let n = w.len();
    (0u64..(1u64 << n))
        .map(|mask| {
            let mut left = Vec::new();
            let mut right = Vec::new();
            for (pos, &a) in w.letters().iter().enumerate() {
                if mask >> pos & 1 == 1 {
                    left.push(a);
                } else {
                    right.push(a);
                }
            }
            (Word(left), Word(right))
        })
        .collect()
}
