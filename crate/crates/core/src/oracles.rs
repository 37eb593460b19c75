//! Independent estimates of the Schwinger-Dyson kernel: the moment series
//! contracted against a deep signature, and the normalized trace of a random
//! unitary development.

use nalgebra::{DMatrix, SymmetricEigen};
type Complex64 = nalgebra::Complex<f64>;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rough_path::{GroupIncrement, PathSamples};

/// Calls `f` with the partner array of every complete non-crossing pairing of `n` points.
fn for_each_pairing(n: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(
        pos: usize,
        n: usize,
        stack: &mut Vec<usize>,
        partner: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        if pos == n {
            if stack.is_empty() {
                f(partner);
            }
            return;
        }
        let remaining = n - pos;
        if stack.len() < remaining {
            stack.push(pos);
            rec(pos + 1, n, stack, partner, f);
            stack.pop();
        }
        if let Some(open) = stack.pop() {
            partner[pos] = open;
            partner[open] = pos;
            rec(pos + 1, n, stack, partner, f);
            stack.push(open);
        }
    }
    let mut partner = vec![0; n];
    rec(0, n, &mut Vec::new(), &mut partner, f);
}

/// `sum_L i^{|L|} phi(L) S^L` over every word the signature carries.
pub fn series_kernel(signature: &GroupIncrement) -> f64 {
    let ix = signature.coeffs.indexer();
    let s = signature.coeffs.coeffs();
    let d = ix.d();
    let mut total = s[0];
    for k in 1..=ix.max_level() / 2 {
        let n = 2 * k;
        let base = ix.offset(n);
        let mut level_sum = 0.0;
        let mut letters = vec![0usize; n];
        for_each_pairing(n, &mut |partner| {
            // openers in order of position; each gets a letter in 0..d
            let openers: Vec<usize> = (0..n).filter(|&p| partner[p] > p).collect();
            let mut digits = vec![0usize; k];
            loop {
                for (o, &p) in openers.iter().enumerate() {
                    letters[p] = digits[o];
                    letters[partner[p]] = digits[o];
                }
                let idx = letters.iter().fold(0, |acc, &a| acc * d + a);
                level_sum += s[base + idx];
                // next letter assignment
                let mut c = 0;
                while c < k {
                    digits[c] += 1;
                    if digits[c] < d {
                        break;
                    }
                    digits[c] = 0;
                    c += 1;
                }
                if c == k {
                    break;
                }
            }
        });
        total += if k % 2 == 0 { level_sum } else { -level_sum };
    }
    total
}

/// Convenience: the series oracle on a path at truncation `level`.
pub fn series_kernel_path(path: &PathSamples, level: usize) -> f64 {
    series_kernel(&crate::rough_path::signature(path, level))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub matrix_dim: usize,
    pub n_sims: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.matrix_dim == 0 || self.n_sims == 0 {
            return Err(Error::Config(
                "matrix dimension and simulation count must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-simulation RNG: one ChaCha stream per simulation index.
pub fn simulation_rng(seed: u64, sim: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sim);
    rng
}

/// `d` independent Hermitian matrices with complex Gaussian entries of unit variance.
pub fn sample_hermitian(d: usize, matrix_dim: usize, rng: &mut impl rand::Rng) -> Vec<DMatrix<Complex64>> {
    let half = std::f64::consts::FRAC_1_SQRT_2;
    (0..d)
        .map(|_| {
            let mut a = DMatrix::zeros(matrix_dim, matrix_dim);
            for r in 0..matrix_dim {
                let g: f64 = StandardNormal.sample(rng);
                a[(r, r)] = Complex64::new(g, 0.0);
                for c in r + 1..matrix_dim {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    let z = Complex64::new(re * half, im * half);
                    a[(r, c)] = z;
                    a[(c, r)] = z.conj();
                }
            }
            a
        })
        .collect()
}

/// `Z` after following `path` through `Z <- exp(i/sqrt(N) sum_k A_k dx_k) Z`.
pub fn unitary_development(path: &PathSamples, matrices: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    let n = matrices[0].nrows();
    let scale = 1.0 / (n as f64).sqrt();
    let mut z = DMatrix::<Complex64>::identity(n, n);
    for k in 0..path.n_increments() {
        let dx = path.increment(k);
        if dx.iter().all(|&x| x == 0.0) {
            continue;
        }
        let mut h = DMatrix::<Complex64>::zeros(n, n);
        for (a, &x) in matrices.iter().zip(&dx) {
            h += a * Complex64::new(x, 0.0);
        }
        let eig = SymmetricEigen::new(h);
        let u = &eig.eigenvectors;
        let mut scaled = u.clone();
        for (c, &lambda) in eig.eigenvalues.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, lambda * scale);
            for r in 0..n {
                scaled[(r, c)] *= phase;
            }
        }
        let step = scaled * u.adjoint();
        z = step * z;
    }
    z
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    /// Mean of `Re tr(Z) / N`.
    pub mean: f64,
    pub std_error: f64,
    /// Mean of `Im tr(Z) / N`, zero in the large-N limit.
    pub imag_mean: f64,
    pub imag_std_error: f64,
    pub n_sims: usize,
}

fn mean_and_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo estimate of the kernel over the whole path.
pub fn sdkr_kernel(path: &PathSamples, cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    let traces: Vec<Complex64> = (0..cfg.n_sims)
        .into_par_iter()
        .map(|sim| {
            let mut rng = simulation_rng(cfg.seed, sim as u64);
            let mats = sample_hermitian(path.d(), cfg.matrix_dim, &mut rng);
            unitary_development(path, &mats).trace() / cfg.matrix_dim as f64
        })
        .collect();
    let re: Vec<f64> = traces.iter().map(|z| z.re).collect();
    let im: Vec<f64> = traces.iter().map(|z| z.im).collect();
    let (mean, std_error) = mean_and_error(&re);
    let (imag_mean, imag_std_error) = mean_and_error(&im);
    Ok(McEstimate {
        mean,
        std_error,
        imag_mean,
        imag_std_error,
        n_sims: cfg.n_sims,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nc::{catalan, semicircular_moment};
    use crate::rough_path::signature;

    const LINEAR: f64 = 0.576_724_807_756_873_4;

    #[test]
    fn pairing_enumeration_counts() {
        for k in 0..7 {
            let mut count = 0;
            for_each_pairing(2 * k, &mut |_| count += 1);
            assert_eq!(count, catalan(k as u64));
        }
    }

    #[test]
    fn series_matches_moment_definition() {
        let p = PathSamples::uniform(
            1.0,
            vec![vec![0.0, 0.0], vec![0.4, -0.3], vec![0.1, 0.5], vec![-0.6, 0.2]],
        )
        .unwrap();
        let sig = signature(&p, 6);
        let ix = sig.coeffs.indexer();
        let direct: f64 = ix
            .words()
            .filter(|w| w.len() % 2 == 0)
            .map(|w| {
                let sign = if w.len() % 4 == 0 { 1.0 } else { -1.0 };
                sign * semicircular_moment(&w) as f64 * sig.coeffs.get(&w).unwrap()
            })
            .sum();
        assert!((series_kernel(&sig) - direct).abs() < 1e-14);
    }

    #[test]
    fn series_examples() {
        let p = PathSamples::linear(&[1.0], 1.0, 1).unwrap();
        assert_eq!(series_kernel(&signature(&p, 0)), 1.0);
        let v = series_kernel(&signature(&p, 20));
        assert!((v - 0.57672).abs() < 1e-5);
        assert!((v - LINEAR).abs() < 1e-15);
        let p2 = PathSamples::linear(&[1.0, 0.0], 1.0, 1).unwrap();
        assert!((series_kernel(&signature(&p2, 20)) - v).abs() < 1e-15);
    }

    #[test]
    fn hermitian_samples() {
        let mut rng = simulation_rng(3, 0);
        let m = sample_hermitian(2, 6, &mut rng);
        for a in &m {
            assert_eq!(a, &a.adjoint());
        }
        // entry variance and cross-matrix correlation over 10^4 draws
        let mut rng = simulation_rng(4, 0);
        let draws = 10_000;
        let (mut var, mut corr) = (0.0, Complex64::new(0.0, 0.0));
        let mut corrs = Vec::with_capacity(draws);
        for _ in 0..draws {
            let m = sample_hermitian(2, 2, &mut rng);
            var += m[0][(0, 1)].norm_sqr();
            let c = m[0][(0, 1)] * m[1][(0, 1)].conj();
            corr += c;
            corrs.push(c.re);
        }
        var /= draws as f64;
        assert!((var - 1.0).abs() < 0.05);
        let (mean, se) = mean_and_error(&corrs);
        assert!(mean.abs() < 3.0 * se);
    }

    #[test]
    fn development_is_unitary() {
        let p = PathSamples::uniform(
            1.0,
            vec![vec![0.0, 0.0], vec![0.9, -0.3], vec![0.1, 1.5]],
        )
        .unwrap();
        let mut rng = simulation_rng(1, 0);
        let mats = sample_hermitian(2, 20, &mut rng);
        for end in 1..=2 {
            let sub = PathSamples::uniform(1.0, (0..=end).map(|k| p.point(k).to_vec()).collect()).unwrap();
            let z = unitary_development(&sub, &mats);
            let err = (&z * z.adjoint() - DMatrix::identity(20, 20)).norm();
            assert!(err < 1e-10);
        }
    }

    #[test]
    fn zero_path_gives_one() {
        let p = PathSamples::linear(&[0.0, 0.0], 1.0, 4).unwrap();
        let est = sdkr_kernel(
            &p,
            &McConfig {
                matrix_dim: 5,
                n_sims: 3,
                seed: 0,
            },
        )
        .unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.imag_mean, 0.0);
    }

    #[test]
    fn monte_carlo_matches_series_on_linear_path() {
        let p = PathSamples::linear(&[1.0], 1.0, 1).unwrap();
        let est = sdkr_kernel(
            &p,
            &McConfig {
                matrix_dim: 200,
                n_sims: 250,
                seed: 11,
            },
        )
        .unwrap();
        assert!((est.mean - LINEAR).abs() <= 3.0 * est.std_error, "{est:?}");
        assert!(est.imag_mean.abs() <= 3.0 * est.imag_std_error.max(1e-12));
    }
}
