//! Signature kernels of smooth rough paths through the Goursat system for
//! `f = <S(X)_{a,t}, S(Y)_{c,v}>` and its companions
//! `phi_w = <S(X), S(Y) e_w>`, `psi_w = <S(X) e_w, S(Y)>`.
//!
//! The driving paths enter through their diagonal derivatives, one truncated
//! Lie element per block, constant in time on the block.

use crate::error::{Error, Result};
use crate::rough_path::{block_increments, GroupIncrement, PathSamples};
use crate::words::{left_contract, right_contract, TensorCoeffs, WordIndexer};

#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalDerivativePath {
    /// Lie element per unit time on each block, zero at the empty word.
    pub blocks: Vec<TensorCoeffs>,
    pub durations: Vec<f64>,
    pub start: f64,
}

impl DiagonalDerivativePath {
    pub fn level(&self) -> usize {
        self.blocks[0].indexer().max_level()
    }

    pub fn d(&self) -> usize {
        self.blocks[0].indexer().d()
    }

    /// Every linear piece of the path as its own block.
    pub fn from_segments(path: &PathSamples) -> Self {
        let ix = WordIndexer::new(path.d(), 1);
        let t = path.times();
        let (blocks, durations) = (0..path.n_increments())
            .map(|k| {
                let dt = t[k + 1] - t[k];
                let v: Vec<f64> = path.increment(k).iter().map(|x| x / dt).collect();
                (TensorCoeffs::from_vector(ix, &v).expect("level one"), dt)
            })
            .unzip();
        DiagonalDerivativePath {
            blocks,
            durations,
            start: t[0],
        }
    }

    /// `2^coarse_n` blocks of fine segments, each summarized at `level`.
    pub fn from_blocks(path: &PathSamples, coarse_n: u32, level: usize) -> Result<Self> {
        diagonal_derivative(&block_increments(path, coarse_n, level)?)
    }

    /// Signature of the smooth rough path generated by the blocks.
    pub fn signature(&self, level: usize) -> Result<TensorCoeffs> {
        let ix = WordIndexer::new(self.d(), level);
        let mut s = TensorCoeffs::unit(ix);
        for (x, &dt) in self.blocks.iter().zip(&self.durations) {
            s = s.concat_mul(&x.with_level(level).scaled(dt).exp()?)?;
        }
        Ok(s)
    }
}

/// Tensor logarithm of each block over its duration.
pub fn diagonal_derivative(blocks: &[GroupIncrement]) -> Result<DiagonalDerivativePath> {
    if blocks.is_empty() {
        return Err(Error::Config("no blocks".into()));
    }
    let mut out = Vec::with_capacity(blocks.len());
    let mut durations = Vec::with_capacity(blocks.len());
    for g in blocks {
        let dt = g.duration();
        if !(dt > 0.0) {
            return Err(Error::Config(format!("block {:?} has no duration", g.interval)));
        }
        let mut x = g.coeffs.log()?.scaled(1.0 / dt);
        x.coeffs_mut()[0] = 0.0;
        out.push(x);
        durations.push(dt);
    }
    Ok(DiagonalDerivativePath {
        blocks: out,
        durations,
        start: blocks[0].interval.0,
    })
}

/// `sum_w sigX(w) sigY(w)` over the common truncation.
pub fn truncated_inner_kernel(sig_x: &TensorCoeffs, sig_y: &TensorCoeffs) -> Result<f64> {
    sig_x.dot(sig_y)
}

/// Node values of the integrated system on the product grid.
#[derive(Clone, Debug)]
pub struct KernelGridState {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    f: Vec<f64>,
    phi: Vec<TensorCoeffs>,
    psi: Vec<TensorCoeffs>,
    /// `phi` lives on words of length `1..lambda`.
    pub lambda: usize,
    /// `psi` lives on words of length `1..kappa`.
    pub kappa: usize,
}

impl KernelGridState {
    fn node(&self, p: usize, q: usize) -> usize {
        p * self.v.len() + q
    }

    pub fn f(&self, p: usize, q: usize) -> f64 {
        self.f[self.node(p, q)]
    }

    pub fn phi(&self, p: usize, q: usize) -> &TensorCoeffs {
        &self.phi[self.node(p, q)]
    }

    pub fn psi(&self, p: usize, q: usize) -> &TensorCoeffs {
        &self.psi[self.node(p, q)]
    }

    /// `f` at the far corner.
    pub fn terminal(&self) -> f64 {
        *self.f.last().expect("non-empty grid")
    }
}

/// Keeps levels `1..below` and clears the rest.
fn project(t: &mut TensorCoeffs, below: usize) {
    let ix = t.indexer();
    let keep = ix.offset(below.max(1)).min(ix.total_dim());
    let c = t.coeffs_mut();
    c[0] = 0.0;
    c[keep..].iter_mut().for_each(|x| *x = 0.0);
}

struct Drift {
    x: TensorCoeffs,
    y: TensorCoeffs,
    xy: f64,
    // <phi, a> and <psi, b> feed the mixed derivative of f
    a: TensorCoeffs,
    b: TensorCoeffs,
}

fn block_of(durations: &[f64], steps: usize) -> Result<Vec<(usize, f64)>> {
    let nb = durations.len();
    if !steps.is_multiple_of(nb) {
        return Err(Error::Config(format!(
            "{steps} grid steps do not divide {nb} blocks"
        )));
    }
    let per = steps / nb;
    Ok((0..steps)
        .map(|s| (s / per, durations[s / per] / per as f64))
        .collect())
}

fn grid_signatures(
    path: &DiagonalDerivativePath,
    cells: &[(usize, f64)],
    ix: WordIndexer,
) -> Result<Vec<TensorCoeffs>> {
    let steps: Vec<TensorCoeffs> = path
        .blocks
        .iter()
        .map(|x| x.with_level(ix.max_level()))
        .collect();
    let mut out = vec![TensorCoeffs::unit(ix)];
    for &(b, h) in cells {
        let e = steps[b].scaled(h).exp()?;
        let next = out.last().expect("seeded").concat_mul(&e)?;
        out.push(next);
    }
    Ok(out)
}

/// Integrates the system over `grid` steps along each axis.
pub fn integrate_system(
    x: &DiagonalDerivativePath,
    y: &DiagonalDerivativePath,
    grid: usize,
) -> Result<KernelGridState> {
    if x.d() != y.d() {
        return Err(Error::Config(format!(
            "paths in R^{} and R^{}",
            x.d(),
            y.d()
        )));
    }
    let (kappa, lambda) = (x.level(), y.level());
    let ix = WordIndexer::new(x.d(), kappa.max(lambda));
    let cells_t = block_of(&x.durations, grid)?;
    let cells_v = block_of(&y.durations, grid)?;

    let drifts: Vec<Vec<Drift>> = x
        .blocks
        .iter()
        .map(|xb| {
            let xb = xb.with_level(ix.max_level());
            y.blocks
                .iter()
                .map(|yb| {
                    let yb = yb.with_level(ix.max_level());
                    let mut a = right_contract(&xb, &yb)?;
                    let xy = a.coeffs()[0];
                    project(&mut a, lambda);
                    let mut b = right_contract(&yb, &xb)?;
                    project(&mut b, kappa);
                    Ok(Drift {
                        x: xb.clone(),
                        y: yb,
                        xy,
                        a,
                        b,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut t = vec![x.start];
    for &(_, h) in &cells_t {
        t.push(t.last().unwrap() + h);
    }
    let mut v = vec![y.start];
    for &(_, k) in &cells_v {
        v.push(v.last().unwrap() + k);
    }
    let (np, nq) = (t.len(), v.len());
    let zero = TensorCoeffs::zeros(ix);
    let mut state = KernelGridState {
        t,
        v,
        f: vec![1.0; np * nq],
        phi: vec![zero.clone(); np * nq],
        psi: vec![zero.clone(); np * nq],
        lambda,
        kappa,
    };

    // Boundaries: phi(t, c) = S_X(t) and psi(a, v) = S_Y(v) away from the empty word.
    for (p, s) in grid_signatures(x, &cells_t, ix)?.into_iter().enumerate() {
        let mut s = s;
        project(&mut s, lambda);
        let n = state.node(p, 0);
        state.phi[n] = s;
    }
    for (q, s) in grid_signatures(y, &cells_v, ix)?.into_iter().enumerate() {
        let mut s = s;
        project(&mut s, kappa);
        let n = state.node(0, q);
        state.psi[n] = s;
    }

    // d phi / dt = f x + phi x + L*_psi x on levels 1..lambda, and symmetrically for psi.
    let phi_rate = |f: f64, phi: &TensorCoeffs, psi: &TensorCoeffs, x: &TensorCoeffs| -> Result<TensorCoeffs> {
        let mut r = x.scaled(f).add(&phi.concat_mul(x)?)?.add(&left_contract(psi, x)?)?;
        project(&mut r, lambda);
        Ok(r)
    };
    let psi_rate = |f: f64, phi: &TensorCoeffs, psi: &TensorCoeffs, y: &TensorCoeffs| -> Result<TensorCoeffs> {
        let mut r = y.scaled(f).add(&psi.concat_mul(y)?)?.add(&left_contract(phi, y)?)?;
        project(&mut r, kappa);
        Ok(r)
    };

    for p in 0..np - 1 {
        let (bx, h) = cells_t[p];
        for q in 0..nq - 1 {
            let (by, k) = cells_v[q];
            let dr = &drifts[bx][by];
            let (sw, w, s, ne) = (
                state.node(p, q),
                state.node(p, q + 1),
                state.node(p + 1, q),
                state.node(p + 1, q + 1),
            );
            let source = |f: f64, phi: &TensorCoeffs, psi: &TensorCoeffs| -> Result<f64> {
                Ok(dr.xy * f + phi.dot(&dr.a)? + psi.dot(&dr.b)?)
            };
            let known = source(state.f[sw], &state.phi[sw], &state.psi[sw])?
                + source(state.f[w], &state.phi[w], &state.psi[w])?
                + source(state.f[s], &state.phi[s], &state.psi[s])?;
            let base = state.f[w] + state.f[s] - state.f[sw];
            let hk4 = h * k / 4.0;
            let solve_f = |phi: &TensorCoeffs, psi: &TensorCoeffs| -> Result<f64> {
                let rest = phi.dot(&dr.a)? + psi.dot(&dr.b)?;
                Ok((base + hk4 * (known + rest)) / (1.0 - hk4 * dr.xy))
            };

            let rate_w = phi_rate(state.f[w], &state.phi[w], &state.psi[w], &dr.x)?;
            let rate_s = psi_rate(state.f[s], &state.phi[s], &state.psi[s], &dr.y)?;
            let phi_pred = state.phi[w].add(&rate_w.scaled(h))?;
            let psi_pred = state.psi[s].add(&rate_s.scaled(k))?;
            let f_pred = solve_f(&phi_pred, &psi_pred)?;

            let phi_new = state.phi[w].add(
                &rate_w
                    .add(&phi_rate(f_pred, &phi_pred, &psi_pred, &dr.x)?)?
                    .scaled(h / 2.0),
            )?;
            let psi_new = state.psi[s].add(
                &rate_s
                    .add(&psi_rate(f_pred, &phi_pred, &psi_pred, &dr.y)?)?
                    .scaled(k / 2.0),
            )?;
            state.f[ne] = solve_f(&phi_new, &psi_new)?;
            state.phi[ne] = phi_new;
            state.psi[ne] = psi_new;
        }
    }
    Ok(state)
}
