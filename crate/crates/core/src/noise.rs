//! Fractional Brownian motion sampling and path CSV files.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rough_path::PathSamples;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FbmConfig {
    pub hurst: f64,
    pub dims: usize,
    pub n_increments: usize,
    pub horizon: f64,
    pub seed: u64,
}

impl FbmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::Config(format!("Hurst index {} outside (0, 1)", self.hurst)));
        }
        if self.dims == 0 {
            return Err(Error::Config("at least one dimension is required".into()));
        }
        if !self.n_increments.is_power_of_two() {
            return Err(Error::Config(format!(
                "{} increments is not a power of two",
                self.n_increments
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Config(format!("horizon {} must be positive", self.horizon)));
        }
        Ok(())
    }
}

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Covariance of fractional Brownian motion at times `s` and `t`.
pub fn fbm_covariance(hurst: f64, s: f64, t: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (s.abs().powf(h2) + t.abs().powf(h2) - (t - s).abs().powf(h2))
}

/// Eigenvalues of the circulant embedding of `n` noise samples, `None` when
/// the embedding is not non-negative.
fn circulant_eigenvalues(hurst: f64, n: usize) -> Option<Vec<f64>> {
    let m = 2 * n;
    let mut row: Vec<Complex64> = (0..m)
        .map(|k| {
            let lag = if k <= n { k } else { m - k };
            Complex64::new(fgn_autocovariance(hurst, lag), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut row);
    let scale = row.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let mut out = Vec::with_capacity(m);
    for z in row {
        if z.re < -1e-10 * scale {
            return None;
        }
        out.push(z.re.max(0.0));
    }
    Some(out)
}

fn circulant_noise(eig: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = eig.len();
    let mut w: Vec<Complex64> = eig
        .iter()
        .map(|&l| {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            Complex64::new(a, b) * (l / m as f64).sqrt()
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut w);
    w[..m / 2].iter().map(|z| z.re).collect()
}

fn cholesky_factor(hurst: f64, n: usize) -> Result<DMatrix<f64>> {
    let cov = DMatrix::from_fn(n, n, |r, c| fgn_autocovariance(hurst, r.abs_diff(c)));
    cov.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Config(format!("covariance of H = {hurst} is not positive definite")))
}

enum Sampler {
    Circulant(Vec<f64>),
    Cholesky(DMatrix<f64>),
}

impl Sampler {
    fn new(hurst: f64, n: usize) -> Result<Self> {
        match circulant_eigenvalues(hurst, n) {
            Some(eig) => Ok(Sampler::Circulant(eig)),
            None => {
                log::warn!("circulant embedding failed for H = {hurst}, n = {n}; using Cholesky");
                Ok(Sampler::Cholesky(cholesky_factor(hurst, n)?))
            }
        }
    }

    fn noise(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Sampler::Circulant(eig) => circulant_noise(eig, rng),
            Sampler::Cholesky(l) => {
                let z = nalgebra::DVector::from_fn(l.nrows(), |_, _| StandardNormal.sample(rng));
                (l * z).iter().copied().collect()
            }
        }
    }
}

/// `dims` independent fBM components on `[0, horizon]`, one RNG stream per component.
pub fn sample_fbm(cfg: &FbmConfig) -> Result<PathSamples> {
    cfg.validate()?;
    let n = cfg.n_increments;
    let sampler = Sampler::new(cfg.hurst, n)?;
    let step_scale = (cfg.horizon / n as f64).powf(cfg.hurst);
    let mut values = vec![vec![0.0; cfg.dims]; n + 1];
    for c in 0..cfg.dims {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(c as u64);
        let noise = sampler.noise(&mut rng);
        let mut acc = 0.0;
        for (k, z) in noise.iter().enumerate() {
            acc += z * step_scale;
            values[k + 1][c] = acc;
        }
    }
    PathSamples::uniform(cfg.horizon, values)
}

/// Writes `time,x1,...,xd` with shortest round-trip formatting.
pub fn write_path_csv(samples: &PathSamples, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string()];
    header.extend((1..=samples.d()).map(|k| format!("x{k}")));
    w.write_record(&header)?;
    for (k, t) in samples.times().iter().enumerate() {
        let mut row = vec![format!("{t:?}")];
        row.extend(samples.point(k).iter().map(|x| format!("{x:?}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_path_file(samples: &PathSamples, path: &Path) -> Result<()> {
    write_path_csv(samples, std::fs::File::create(path)?)
}

/// Reads a CSV written by [`write_path_csv`]; `name` is used in error messages.
pub fn read_path_csv(input: impl Read, name: &Path) -> Result<PathSamples> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: name.to_path_buf(),
        line,
        message,
    };
    let mut r = csv::Reader::from_reader(input);
    let cols = r.headers()?.len();
    if cols < 2 {
        return Err(parse_err(1, "expected a time column and at least one coordinate".into()));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let nums = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(line, e.to_string()))?;
        if let Some(&prev) = times.last() {
            if !(nums[0] > prev) {
                return Err(parse_err(line, format!("time {} does not increase", nums[0])));
            }
        }
        times.push(nums[0]);
        values.push(nums[1..].to_vec());
    }
    if times.len() < 2 {
        return Err(parse_err(1, "fewer than two samples".into()));
    }
    PathSamples::new(times, values)
}

pub fn read_path_file(path: &Path) -> Result<PathSamples> {
    read_path_csv(std::fs::File::open(path)?, path)
}
