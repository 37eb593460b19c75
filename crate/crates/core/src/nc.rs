//! Non-crossing matchings, semicircular moments and the Gubinelli expansion.
//!
//! Matchings are generated by a fixed recursion: each new point is either
//! left unmatched or paired with the largest point that is still unmatched.
//! Positions are 0-based.

use std::cell::RefCell;
use std::collections::HashMap;

use crate::words::Word;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PartialMatching {
    pub n: usize,
    /// Pairs `(p, q)` with `p < q`, in creation order.
    pub pairs: Vec<(usize, usize)>,
    /// Unmatched positions, increasing.
    pub unmatched: Vec<usize>,
}

/// All recursion-generated matchings of `n` points with no pair inside `0..restricted`.
pub fn enumerate_nc(n: usize, restricted: usize) -> Vec<PartialMatching> {
    assert!(restricted <= n, "restricted prefix longer than the word");
    let mut out = vec![PartialMatching {
        n: 0,
        pairs: Vec::new(),
        unmatched: Vec::new(),
    }];
    for k in 0..n {
        let mut next = Vec::with_capacity(out.len() * 2);
        for m in out {
            if let Some(&top) = m.unmatched.last() {
                if !(top < restricted && k < restricted) {
                    let mut paired = m.clone();
                    paired.unmatched.pop();
                    paired.pairs.push((top, k));
                    paired.n = k + 1;
                    next.push(paired);
                }
            }
            let mut open = m;
            open.unmatched.push(k);
            open.n = k + 1;
            next.push(open);
        }
        out = next;
    }
    out
}

fn binom(n: i64, k: i64) -> i128 {
    if k < 0 || k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1i128, |acc, i| acc * (n - i) as i128 / (i + 1) as i128)
}

/// Closed-form size of the restricted matching set with one of `d` letters per
/// pair and per unmatched point.
pub fn nc_cardinality(n: usize, restricted: usize, d: usize) -> u128 {
    assert!(restricted <= n);
    let d = d as i128;
    let (r, t) = (restricted as i64, (n - restricted) as i64);
    let mut total: i128 = 0;
    for i in 0..=(t + r) / 2 {
        if i > t {
            break;
        }
        total += (binom(t, i) - binom(t, i - r - 1)) * d.pow((t - i) as u32);
    }
    (total * d.pow(r as u32)) as u128
}

/// Number of letter assignments consistent with the matchings: `d` per block.
pub fn weighted_count(matchings: &[PartialMatching], d: usize) -> u128 {
    matchings
        .iter()
        .map(|m| (d as u128).pow((m.pairs.len() + m.unmatched.len()) as u32))
        .sum()
}

thread_local! {
    static MOMENTS: RefCell<HashMap<Vec<u8>, u64>> = RefCell::new(HashMap::new());
}

/// Number of complete non-crossing pairings of `w` that only join equal letters.
pub fn semicircular_moment(w: &Word) -> u64 {
    moment(w.letters())
}

fn moment(w: &[u8]) -> u64 {
    if w.is_empty() {
        return 1;
    }
    if w.len() % 2 == 1 {
        return 0;
    }
    if let Some(v) = MOMENTS.with(|m| m.borrow().get(w).copied()) {
        return v;
    }
    // The first point pairs with some q; the inside and outside pair independently.
    let mut total = 0;
    for q in (1..w.len()).step_by(2) {
        if w[q] == w[0] {
            let inner = moment(&w[1..q]);
            if inner != 0 {
                total += inner * moment(&w[q + 1..]);
            }
        }
    }
    MOMENTS.with(|m| m.borrow_mut().insert(w.to_vec(), total));
    total
}

/// One summand `sign * K_residual` of a Gubinelli derivative.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExpansionTerm {
    pub sign: i32,
    pub residual: Word,
}

/// Expands the derivative of `K_{I[..restricted]}` along `I[restricted..]` into
/// plain coordinates. Pairs joining unequal letters vanish and are skipped.
pub fn gubinelli_expand(word: &Word, restricted: usize) -> Vec<ExpansionTerm> {
    let letters = word.letters();
    enumerate_nc(letters.len(), restricted)
        .into_iter()
        .filter(|m| m.pairs.iter().all(|&(p, q)| letters[p] == letters[q]))
        .map(|m| ExpansionTerm {
            sign: if m.pairs.len() % 2 == 0 { 1 } else { -1 },
            residual: Word::new(m.unmatched.iter().map(|&u| letters[u]).collect::<Vec<_>>()),
        })
        .collect()
}

pub fn catalan(k: u64) -> u64 {
    binom(2 * k as i64, k as i64) as u64 / (k + 1)
}
