//! The SDK scheme: compiled update polynomials and the triangular DP solve.
//!
//! Cell `(i, j+1)` of the table holds every coordinate `K_I` for `|I| <= kappa + zeta`.
//! Column `j+1` is filled from the diagonal outwards (`i = j, j-1, ..., 0`), each
//! cell by one dense solve `(Id - A_j) K(i, j+1) = b(i, j)`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::nc::gubinelli_expand;
use crate::rough_path::GroupIncrement;
use crate::words::{inverse_shuffle, Word, WordIndexer};

/// Smallest admissible extension level for a given `kappa`.
pub fn zeta_min(kappa: usize) -> usize {
    if kappa >= 4 {
        kappa - 3
    } else {
        0
    }
}

/// How the signed update polynomials are generated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    /// Signs and word orientations that make the scheme consistent to order `kappa`.
    #[default]
    Consistent,
    /// Uniform forward orientation: `(-1)^{|beta|+1}` signs, no reversed words,
    /// unsigned trace rule. Only first-order accurate.
    ForwardWords,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SchemeConfig {
    pub d: usize,
    pub kappa: usize,
    pub zeta: usize,
    pub convention: SignConvention,
}

impl SchemeConfig {
    pub fn new(d: usize, kappa: usize, zeta: usize) -> Result<Self> {
        let cfg = SchemeConfig {
            d,
            kappa,
            zeta,
            convention: SignConvention::Consistent,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_convention(mut self, convention: SignConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn level(&self) -> usize {
        self.kappa + self.zeta
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > u8::MAX as usize {
            return Err(Error::Config(format!("alphabet size {} out of range", self.d)));
        }
        if self.kappa == 0 {
            return Err(Error::Config("kappa must be at least 1".into()));
        }
        if self.zeta < zeta_min(self.kappa) {
            return Err(Error::Config(format!(
                "zeta = {} is below the minimum {} for kappa = {}",
                self.zeta,
                zeta_min(self.kappa),
                self.kappa
            )));
        }
        let l = self.level();
        if (l / 2).max(1) + self.kappa - 1 > l {
            return Err(Error::Config(format!(
                "update rules of kappa = {}, zeta = {} reach beyond level {l}",
                self.kappa, self.zeta
            )));
        }
        Ok(())
    }
}

/// `sign * K_left(i, m) * K_right(m, j+1) * X^rough_{m-1, m}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub sign: i32,
    pub left: Word,
    pub right: Word,
    pub rough: Word,
}

/// `sign * K_word(i, m) * X^rough_{m-1, m}` in the update of `K_∅`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TraceTerm {
    pub sign: i32,
    pub word: Word,
    pub rough: Word,
}

#[derive(Clone, Copy, Debug)]
struct Flat {
    coeff: f64,
    target: u32,
    left: u32,
    right: u32,
    rough: u32,
}

#[derive(Clone, Debug)]
pub struct CompiledScheme {
    cfg: SchemeConfig,
    indexer: WordIndexer,
    rough_indexer: WordIndexer,
    rules: Vec<Vec<Monomial>>,
    trace: Vec<TraceTerm>,
    flat: Vec<Flat>,
    // trace rule, target 0, right factor unused
    flat_trace: Vec<Flat>,
    // terms whose right factor is the unit at the diagonal, trace rule included
    linear: Vec<Flat>,
}

fn sign_of(k: usize) -> i32 {
    if k.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Builds the update polynomials of every coordinate.
pub fn compile_scheme(cfg: SchemeConfig) -> Result<CompiledScheme> {
    cfg.validate()?;
    let level = cfg.level();
    let indexer = WordIndexer::new(cfg.d, level);
    let rough_indexer = WordIndexer::new(cfg.d, cfg.kappa);
    let omegas: Vec<Word> = WordIndexer::new(cfg.d, cfg.kappa - 1).words().collect();

    let mut rules = vec![Vec::new()];
    for target in indexer.words().skip(1) {
        let n = target.len();
        let l = n.div_ceil(2);
        let head = target.slice(0..l - 1);
        let tail = target.slice(l..n);
        let a = target.letters()[l - 1];
        let mut monomials = Vec::new();
        for omega in &omegas {
            let mut rough = Word::letter(a);
            rough = rough.concat(omega);
            for (alpha, beta) in inverse_shuffle(omega) {
                let (sign, f, g) = match cfg.convention {
                    SignConvention::Consistent => {
                        let f = gubinelli_expand(&head.concat(&alpha), head.len());
                        let g = gubinelli_expand(&tail.reversed().concat(&beta), tail.len())
                            .into_iter()
                            .map(|mut t| {
                                t.residual = t.residual.reversed();
                                t
                            })
                            .collect::<Vec<_>>();
                        (-sign_of(alpha.len()), f, g)
                    }
                    SignConvention::ForwardWords => {
                        let f = gubinelli_expand(&head.concat(&alpha), head.len());
                        let g = gubinelli_expand(&tail.concat(&beta), tail.len());
                        (-sign_of(beta.len()), f, g)
                    }
                };
                for tf in &f {
                    for tg in &g {
                        monomials.push(Monomial {
                            sign: sign * tf.sign * tg.sign,
                            left: tf.residual.clone(),
                            right: tg.residual.clone(),
                            rough: rough.clone(),
                        });
                    }
                }
            }
        }
        rules.push(monomials);
    }

    let mut trace = Vec::new();
    for omega in rough_indexer.words().skip(1) {
        let outer = match cfg.convention {
            SignConvention::Consistent => -sign_of(omega.len()),
            SignConvention::ForwardWords => 1,
        };
        for t in gubinelli_expand(&omega, 0) {
            trace.push(TraceTerm {
                sign: outer * t.sign,
                word: t.residual,
                rough: omega.clone(),
            });
        }
    }

    let lookup = |w: &Word| -> Result<u32> {
        indexer.index(w).map(|k| k as u32).map_err(|_| {
            Error::Config(format!(
                "word {w} exceeds level {level}; increase zeta"
            ))
        })
    };
    let mut flat = Vec::new();
    for (target, monomials) in rules.iter().enumerate() {
        for m in monomials {
            flat.push(Flat {
                coeff: m.sign as f64,
                target: target as u32,
                left: lookup(&m.left)?,
                right: lookup(&m.right)?,
                rough: rough_indexer.index(&m.rough)? as u32,
            });
        }
    }
    let mut flat_trace = Vec::new();
    for t in &trace {
        flat_trace.push(Flat {
            coeff: t.sign as f64,
            target: 0,
            left: lookup(&t.word)?,
            right: 0,
            rough: rough_indexer.index(&t.rough)? as u32,
        });
    }
    let linear = flat
        .iter()
        .filter(|f| f.right == 0)
        .chain(&flat_trace)
        .copied()
        .collect();

    Ok(CompiledScheme {
        cfg,
        indexer,
        rough_indexer,
        rules,
        trace,
        flat,
        flat_trace,
        linear,
    })
}

impl CompiledScheme {
    pub fn config(&self) -> SchemeConfig {
        self.cfg
    }

    pub fn indexer(&self) -> WordIndexer {
        self.indexer
    }

    pub fn total_dim(&self) -> usize {
        self.indexer.total_dim()
    }

    /// Update polynomial of the coordinate `target`.
    pub fn rule(&self, target: &Word) -> Result<&[Monomial]> {
        Ok(&self.rules[self.indexer.index(target)?])
    }

    /// The monomials of `target` whose right factor sits on the diagonal.
    pub fn linear_rule(&self, target: &Word) -> Result<Vec<&Monomial>> {
        Ok(self.rule(target)?.iter().filter(|m| m.right.is_empty()).collect())
    }

    pub fn trace_rule(&self) -> &[TraceTerm] {
        &self.trace
    }

    /// Number of monomials over all non-empty targets.
    pub fn poly_count(&self) -> usize {
        self.rules.iter().map(Vec::len).sum()
    }

    pub fn linear_count(&self) -> usize {
        self.rules
            .iter()
            .flatten()
            .filter(|m| m.right.is_empty())
            .count()
    }

    fn check_increment(&self, g: &GroupIncrement) -> Result<()> {
        let ix = g.coeffs.indexer();
        if ix.d() != self.cfg.d || ix.max_level() < self.cfg.kappa {
            return Err(Error::Dimension(format!(
                "increment in T^<={}(R^{}) for a scheme needing T^<={}(R^{})",
                ix.max_level(),
                ix.d(),
                self.cfg.kappa,
                self.cfg.d
            )));
        }
        Ok(())
    }
}

/// The matrix of the terms that are linear in the unknown cell `(i, j+1)`.
pub fn assemble_a(increment: &GroupIncrement, scheme: &CompiledScheme) -> Result<DMatrix<f64>> {
    scheme.check_increment(increment)?;
    let dim = scheme.total_dim();
    // Length-major layout: level-kappa indices coincide in any deeper truncation.
    let x = &increment.coeffs.coeffs()[..scheme.rough_indexer.total_dim()];
    let mut a = DMatrix::zeros(dim, dim);
    for f in &scheme.linear {
        a[(f.target as usize, f.left as usize)] += f.coeff * x[f.rough as usize];
    }
    Ok(a)
}

/// Triangular table of cells `(i, j)`, `0 <= i <= j <= n`.
#[derive(Clone, Debug)]
pub struct KernelTable {
    cfg: SchemeConfig,
    indexer: WordIndexer,
    n: usize,
    data: Vec<f64>,
    solved: Vec<bool>,
}

impl KernelTable {
    /// A table over `n` coarse steps with only the diagonal filled in.
    pub fn new(cfg: SchemeConfig, n: usize) -> Self {
        let indexer = WordIndexer::new(cfg.d, cfg.level());
        let cells = (n + 1) * (n + 2) / 2;
        let mut t = KernelTable {
            cfg,
            indexer,
            n,
            data: vec![0.0; cells * indexer.total_dim()],
            solved: vec![false; cells],
        };
        for i in 0..=n {
            let c = t.cell_index(i, i);
            t.data[c * indexer.total_dim()] = 1.0;
            t.solved[c] = true;
        }
        t
    }

    /// Reals stored by a table over `n` steps.
    pub fn stored_reals(n: usize, total_dim: usize) -> usize {
        (n + 1) * (n + 2) / 2 * total_dim
    }

    pub fn memory_bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<f64>()
    }

    pub fn config(&self) -> SchemeConfig {
        self.cfg
    }

    pub fn indexer(&self) -> WordIndexer {
        self.indexer
    }

    pub fn n_steps(&self) -> usize {
        self.n
    }

    fn cell_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= j && j <= self.n);
        i * (self.n + 1) - i * i.saturating_sub(1) / 2 + (j - i)
    }

    fn checked(&self, i: usize, j: usize) -> Result<usize> {
        if i > j || j > self.n {
            return Err(Error::IndexOutOfRange {
                index: j,
                total_dim: self.n + 1,
            });
        }
        let c = self.cell_index(i, j);
        if !self.solved[c] {
            return Err(Error::DpOrder { i, j });
        }
        Ok(c)
    }

    /// All coordinates at cell `(i, j)`.
    pub fn cell(&self, i: usize, j: usize) -> Result<&[f64]> {
        let c = self.checked(i, j)?;
        let dim = self.indexer.total_dim();
        Ok(&self.data[c * dim..(c + 1) * dim])
    }

    pub fn is_solved(&self, i: usize, j: usize) -> bool {
        i <= j && j <= self.n && self.solved[self.cell_index(i, j)]
    }

    fn set_cell(&mut self, i: usize, j: usize, values: &[f64]) {
        let c = self.cell_index(i, j);
        let dim = self.indexer.total_dim();
        self.data[c * dim..(c + 1) * dim].copy_from_slice(values);
        self.solved[c] = true;
    }

    pub fn value(&self, i: usize, j: usize, w: &Word) -> Result<f64> {
        Ok(self.cell(i, j)?[self.indexer.index(w)?])
    }

    /// `K_∅` between the first and last grid points.
    pub fn terminal(&self) -> Result<f64> {
        Ok(self.cell(0, self.n)?[0])
    }

    /// Header `d, kappa, zeta, log2(n)` as little-endian `u32`, then every cell in
    /// row-major triangular order as little-endian `f64`.
    pub fn write_binary(&self, mut out: impl Write) -> Result<()> {
        if !self.n.is_power_of_two() {
            return Err(Error::Config(format!("{} steps is not a power of two", self.n)));
        }
        let header = [
            self.cfg.d as u32,
            self.cfg.kappa as u32,
            self.cfg.zeta as u32,
            self.n.trailing_zeros(),
        ];
        for h in header {
            out.write_all(&h.to_le_bytes())?;
        }
        for x in &self.data {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut input: impl Read) -> Result<KernelTable> {
        let mut header = [0u32; 4];
        let mut buf4 = [0u8; 4];
        for h in header.iter_mut() {
            input.read_exact(&mut buf4)?;
            *h = u32::from_le_bytes(buf4);
        }
        let cfg = SchemeConfig::new(header[0] as usize, header[1] as usize, header[2] as usize)?;
        let mut t = KernelTable::new(cfg, 1usize << header[3]);
        let mut buf8 = [0u8; 8];
        for x in t.data.iter_mut() {
            input.read_exact(&mut buf8)?;
            *x = f64::from_le_bytes(buf8);
        }
        t.solved.iter_mut().for_each(|s| *s = true);
        Ok(t)
    }
}

/// Right-hand side of the system for cell `(i, j+1)`: the constant of the trace
/// row plus every product that only involves solved cells.
pub fn assemble_b(
    i: usize,
    j: usize,
    table: &KernelTable,
    increments: &[GroupIncrement],
    scheme: &CompiledScheme,
) -> Result<DVector<f64>> {
    let dim = scheme.total_dim();
    let mut b = DVector::zeros(dim);
    b[0] = 1.0;
    let rough_dim = scheme.rough_indexer.total_dim();
    for m in i + 1..=j {
        let ka = table.cell(i, m)?;
        let kb = table.cell(m, j + 1)?;
        let inc = increments.get(m - 1).ok_or(Error::IndexOutOfRange {
            index: m - 1,
            total_dim: increments.len(),
        })?;
        let x = &inc.coeffs.coeffs()[..rough_dim];
        for f in &scheme.flat {
            b[f.target as usize] +=
                f.coeff * ka[f.left as usize] * kb[f.right as usize] * x[f.rough as usize];
        }
        for f in &scheme.flat_trace {
            b[0] += f.coeff * ka[f.left as usize] * x[f.rough as usize];
        }
    }
    Ok(b)
}

fn factorize(column: usize, a: DMatrix<f64>) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let dim = a.nrows();
    let m = DMatrix::identity(dim, dim) - a;
    let lu = m.lu();
    let u = lu.u();
    let pivot = u.diagonal().iter().fold(f64::INFINITY, |p, x| p.min(x.abs()));
    if !(pivot > 1e-12) {
        return Err(Error::StepSize { column, pivot });
    }
    Ok(lu)
}

/// Fills the whole table for the given coarse increments.
pub fn solve_kernel(increments: &[GroupIncrement], scheme: &CompiledScheme) -> Result<KernelTable> {
    for g in increments {
        scheme.check_increment(g)?;
    }
    let n = increments.len();
    let mut table = KernelTable::new(scheme.cfg, n);
    for j in 0..n {
        let lu = factorize(j, assemble_a(&increments[j], scheme)?)?;
        for i in (0..=j).rev() {
            let b = assemble_b(i, j, &table, increments, scheme)?;
            let k = lu.solve(&b).ok_or(Error::StepSize { column: j, pivot: 0.0 })?;
            table.set_cell(i, j + 1, k.as_slice());
        }
    }
    Ok(table)
}
