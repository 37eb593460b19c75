//! Truncated signatures of sampled piecewise-linear paths.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::words::{shuffle_mul, TensorCoeffs, WordIndexer};

/// A path sampled at increasing times, linearly interpolated between samples.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSamples {
    times: Vec<f64>,
    d: usize,
    // row-major, one row of length d per sample
    values: Vec<f64>,
}

impl PathSamples {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} times but {} samples",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::Config("a path needs at least two samples".into()));
        }
        let d = values[0].len();
        if d == 0 || values.iter().any(|v| v.len() != d) {
            return Err(Error::Dimension("samples must share one non-zero dimension".into()));
        }
        if let Some(k) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Config(format!(
                "times not strictly increasing at sample {}",
                k + 1
            )));
        }
        Ok(PathSamples {
            times,
            d,
            values: values.into_iter().flatten().collect(),
        })
    }

    /// Equally spaced samples on `[0, horizon]`.
    pub fn uniform(horizon: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.len().max(2) - 1;
        let times = (0..values.len())
            .map(|k| horizon * k as f64 / n as f64)
            .collect();
        Self::new(times, values)
    }

    /// The straight line from the origin to `velocity * horizon`, with `n_increments` pieces.
    pub fn linear(velocity: &[f64], horizon: f64, n_increments: usize) -> Result<Self> {
        let values = (0..=n_increments)
            .map(|k| {
                let t = horizon * k as f64 / n_increments as f64;
                velocity.iter().map(|v| v * t).collect()
            })
            .collect();
        Self::uniform(horizon, values)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_increments(&self) -> usize {
        self.times.len() - 1
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.values[k * self.d..(k + 1) * self.d]
    }

    pub fn increment(&self, k: usize) -> Vec<f64> {
        let (a, b) = (self.point(k), self.point(k + 1));
        b.iter().zip(a).map(|(y, x)| y - x).collect()
    }

    /// Multiplies every coordinate by `c`.
    pub fn scaled(&self, c: f64) -> PathSamples {
        PathSamples {
            times: self.times.clone(),
            d: self.d,
            values: self.values.iter().map(|x| x * c).collect(),
        }
    }

    /// Splits every piece into `factor` equal pieces; the path itself is unchanged.
    pub fn refine(&self, factor: usize) -> Result<PathSamples> {
        if factor == 0 {
            return Err(Error::Config("refinement factor must be positive".into()));
        }
        let mut times = Vec::with_capacity(self.n_increments() * factor + 1);
        let mut values = Vec::with_capacity(times.capacity());
        for k in 0..self.n_increments() {
            let (t0, t1) = (self.times[k], self.times[k + 1]);
            let (a, b) = (self.point(k), self.point(k + 1));
            for s in 0..factor {
                let u = s as f64 / factor as f64;
                times.push(t0 + u * (t1 - t0));
                values.push(a.iter().zip(b).map(|(x, y)| x + u * (y - x)).collect());
            }
        }
        times.push(*self.times.last().expect("non-empty"));
        values.push(self.point(self.n_increments()).to_vec());
        PathSamples::new(times, values)
    }

    /// Drops samples so that `n_increments / stride` pieces remain.
    pub fn subsample(&self, stride: usize) -> Result<PathSamples> {
        if stride == 0 || !self.n_increments().is_multiple_of(stride) {
            return Err(Error::Config(format!(
                "stride {stride} does not divide {} increments",
                self.n_increments()
            )));
        }
        let keep: Vec<usize> = (0..=self.n_increments()).step_by(stride).collect();
        PathSamples::new(
            keep.iter().map(|&k| self.times[k]).collect(),
            keep.iter().map(|&k| self.point(k).to_vec()).collect(),
        )
    }
}

/// A truncated signature over a time interval.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupIncrement {
    pub coeffs: TensorCoeffs,
    pub interval: (f64, f64),
}

impl GroupIncrement {
    pub fn unit(indexer: WordIndexer, at: f64) -> Self {
        GroupIncrement {
            coeffs: TensorCoeffs::unit(indexer),
            interval: (at, at),
        }
    }

    pub fn level(&self) -> usize {
        self.coeffs.indexer().max_level()
    }

    pub fn duration(&self) -> f64 {
        self.interval.1 - self.interval.0
    }

    /// Largest violation of the shuffle relation `g(u) g(v) = sum_{w in u⧢v} g(w)`.
    pub fn shuffle_defect(&self) -> f64 {
        let ix = self.coeffs.indexer();
        let c = &self.coeffs;
        let mut worst: f64 = (c.coeffs()[0] - 1.0).abs();
        for lu in 1..ix.max_level() {
            for lv in 1..=ix.max_level() - lu {
                for u in ix.words_of_level(lu) {
                    for v in ix.words_of_level(lv) {
                        let lhs = c.coeff_or_zero(&u) * c.coeff_or_zero(&v);
                        let rhs: f64 = shuffle_mul(&u, &v).iter().map(|w| c.coeff_or_zero(w)).sum();
                        worst = worst.max((lhs - rhs).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Truncated exponential of a single linear segment.
pub fn segment_exp(delta: &[f64], level: usize, interval: (f64, f64)) -> GroupIncrement {
    let mut coeffs = TensorCoeffs::unit(WordIndexer::new(delta.len(), level));
    coeffs.mul_segment_exp(delta);
    GroupIncrement { coeffs, interval }
}

fn adjacent(t: f64, s: f64) -> bool {
    (t - s).abs() <= 1e-12 * t.abs().max(s.abs()).max(1.0)
}

/// Chen product of increments over `[s, t]` and `[t, u]`.
pub fn chen_mul(g: &GroupIncrement, h: &GroupIncrement) -> Result<GroupIncrement> {
    if !adjacent(g.interval.1, h.interval.0) {
        return Err(Error::NonAdjacent(
            g.interval.0,
            g.interval.1,
            h.interval.0,
            h.interval.1,
        ));
    }
    Ok(GroupIncrement {
        coeffs: g.coeffs.concat_mul(&h.coeffs)?,
        interval: (g.interval.0, h.interval.1),
    })
}

/// Signature of the samples `start..=end` of the path.
pub fn signature_between(path: &PathSamples, start: usize, end: usize, level: usize) -> GroupIncrement {
    let mut coeffs = TensorCoeffs::unit(WordIndexer::new(path.d(), level));
    for k in start..end {
        coeffs.mul_segment_exp(&path.increment(k));
    }
    GroupIncrement {
        coeffs,
        interval: (path.times()[start], path.times()[end]),
    }
}

/// Signature of the whole path.
pub fn signature(path: &PathSamples, level: usize) -> GroupIncrement {
    signature_between(path, 0, path.n_increments(), level)
}

/// Signatures of the `2^coarse_n` consecutive blocks of fine segments.
pub fn block_increments(
    path: &PathSamples,
    coarse_n: u32,
    level: usize,
) -> Result<Vec<GroupIncrement>> {
    let n_blocks = 1usize
        .checked_shl(coarse_n)
        .ok_or_else(|| Error::Config(format!("coarse exponent {coarse_n} too large")))?;
    let fine = path.n_increments();
    if !fine.is_multiple_of(n_blocks) {
        return Err(Error::Config(format!(
            "{n_blocks} blocks do not divide {fine} fine increments"
        )));
    }
    let per_block = fine / n_blocks;
    Ok((0..n_blocks)
        .into_par_iter()
        .map(|b| signature_between(path, b * per_block, (b + 1) * per_block, level))
        .collect())
}

/// Sum of the l1 norms of the segment increments in `start..end`.
pub fn one_variation(path: &PathSamples, start: usize, end: usize) -> f64 {
    (start..end)
        .map(|k| path.increment(k).iter().map(|x| x.abs()).sum::<f64>())
        .sum()
}
