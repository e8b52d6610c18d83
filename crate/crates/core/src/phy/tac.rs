//! Transmit-antenna-combination (TAC) codebooks and antenna activation patterns.

use std::collections::HashMap;

use crate::error::{invalid, Result};

/// Largest codebook we are willing to materialise.
const MAX_TABLE_SIZE: usize = 1 << 20;

/// How the legal combinations are chosen from all `C(n_t, n_u)` subsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TacStrategy {
    /// First `N_L` subsets in lexicographic order.
    Lexicographic,
    /// Caller-supplied list, 1-based antenna indices, exactly `N_L` entries.
    Explicit(Vec<Vec<usize>>),
}

/// The legal TAC codebook. Entry `i` is selected by spatial bits encoding `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TacTable {
    n_t: usize,
    n_u: usize,
    tacs: Vec<Vec<usize>>,
    lookup: HashMap<Vec<usize>, usize>,
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// `N_L = 2^floor(log2 C(n_t, n_u))`.
pub fn legal_tac_count(n_t: usize, n_u: usize) -> u128 {
    let c = binomial(n_t, n_u);
    1u128 << (127 - c.leading_zeros())
}

impl TacTable {
    pub fn build(n_t: usize, n_u: usize, strategy: TacStrategy) -> Result<Self> {
        if n_u == 0 || n_u >= n_t {
            return Err(invalid(format!("need 0 < n_u < n_t, got n_t={n_t}, n_u={n_u}")));
        }
        let n_l = legal_tac_count(n_t, n_u);
        if n_l > MAX_TABLE_SIZE as u128 {
            return Err(invalid(format!("TAC table of size {n_l} is too large")));
        }
        let n_l = n_l as usize;
        let tacs = match strategy {
            TacStrategy::Lexicographic => lexicographic(n_t, n_u, n_l),
            TacStrategy::Explicit(list) => {
                if list.len() != n_l {
                    return Err(invalid(format!(
                        "explicit TAC list has {} entries, expected {n_l}",
                        list.len()
                    )));
                }
                let mut out = Vec::with_capacity(n_l);
                for entry in list {
                    let mut e = entry.clone();
                    e.sort_unstable();
                    e.dedup();
                    if e.len() != n_u || e.iter().any(|&a| a == 0 || a > n_t) {
                        return Err(invalid(format!("illegal TAC entry {entry:?}")));
                    }
                    out.push(e);
                }
                out
            }
        };
        let mut lookup = HashMap::with_capacity(tacs.len());
        for (i, tac) in tacs.iter().enumerate() {
            if lookup.insert(tac.clone(), i).is_some() {
                return Err(invalid(format!("duplicate TAC {tac:?}")));
            }
        }
        Ok(Self { n_t, n_u, tacs, lookup })
    }

    /// The four-entry `N_t = 4, N_u = 2` codebook with the non-lexicographic
    /// ordering {1,3}, {1,4}, {2,4}, {2,3}.
    pub fn preset_4x2() -> Self {
        Self::build(
            4,
            2,
            TacStrategy::Explicit(vec![vec![1, 3], vec![1, 4], vec![2, 4], vec![2, 3]]),
        )
        .expect("preset is valid")
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn len(&self) -> usize {
        self.tacs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tacs.is_empty()
    }

    /// Number of spatial bits, `log2 N_L`.
    pub fn spatial_bits(&self) -> usize {
        self.tacs.len().trailing_zeros() as usize
    }

    /// 1-based sorted antenna indices of entry `index`.
    pub fn tac(&self, index: usize) -> &[usize] {
        &self.tacs[index]
    }

    pub fn tacs(&self) -> &[Vec<usize>] {
        &self.tacs
    }

    /// 0-based column indices of entry `index`.
    pub fn columns(&self, index: usize) -> Vec<usize> {
        self.tacs[index].iter().map(|a| a - 1).collect()
    }

    /// Table position of a 1-based antenna set (any order).
    pub fn index_of(&self, antennas: &[usize]) -> Option<usize> {
        let mut key = antennas.to_vec();
        key.sort_unstable();
        self.lookup.get(&key).copied()
    }

    pub fn aap(&self, index: usize) -> Aap {
        Aap::from_antennas(self.n_t, &self.tacs[index])
    }

    /// MSB-first spatial bits to table index.
    pub fn index_from_bits(&self, bits: &[u8]) -> usize {
        debug_assert_eq!(bits.len(), self.spatial_bits());
        bits.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b & 1))
    }

    pub fn bits_from_index(&self, index: usize) -> Vec<u8> {
        let nb = self.spatial_bits();
        (0..nb).map(|i| ((index >> (nb - 1 - i)) & 1) as u8).collect()
    }

    /// Legal entry with maximal overlap with a 1-based antenna set; earliest
    /// entry wins ties.
    pub fn legalize_by_overlap(&self, antennas: &[usize]) -> usize {
        if let Some(i) = self.index_of(antennas) {
            return i;
        }
        let mut best = 0;
        let mut best_overlap = 0;
        for (i, tac) in self.tacs.iter().enumerate() {
            let overlap = tac.iter().filter(|a| antennas.contains(a)).count();
            if overlap > best_overlap {
                best_overlap = overlap;
                best = i;
            }
        }
        best
    }

    /// Maps per-antenna activation scores to a legal entry: the top-`N_u`
    /// antennas if that set is legal, otherwise the entry with the largest
    /// summed score (earliest entry wins ties).
    pub fn legalize_by_score(&self, scores: &[f64]) -> usize {
        assert_eq!(scores.len(), self.n_t);
        let top = top_k(scores, self.n_u);
        if let Some(i) = self.index_of(&top) {
            return i;
        }
        let mut best = 0;
        let mut best_sum = f64::NEG_INFINITY;
        for (i, tac) in self.tacs.iter().enumerate() {
            let sum: f64 = tac.iter().map(|&a| scores[a - 1]).sum();
            if sum > best_sum {
                best_sum = sum;
                best = i;
            }
        }
        best
    }
}

/// 1-based indices of the `k` largest scores, sorted ascending. Lower index
/// wins ties.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut top: Vec<usize> = order[..k].iter().map(|i| i + 1).collect();
    top.sort_unstable();
    top
}

fn lexicographic(n_t: usize, n_u: usize, limit: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(limit);
    let mut cur: Vec<usize> = (1..=n_u).collect();
    loop {
        out.push(cur.clone());
        if out.len() == limit {
            return out;
        }
        // advance to the next combination
        let mut i = n_u;
        while i > 0 && cur[i - 1] == n_t - n_u + i {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..n_u {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Antenna activation pattern: one flag per transmit antenna.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Aap {
    g: Vec<u8>,
}

impl Aap {
    pub fn from_antennas(n_t: usize, antennas: &[usize]) -> Self {
        let mut g = vec![0u8; n_t];
        for &a in antennas {
            g[a - 1] = 1;
        }
        Self { g }
    }

    pub fn from_flags(g: Vec<u8>) -> Result<Self> {
        if g.iter().any(|&v| v > 1) {
            return Err(invalid("activation flags must be 0 or 1"));
        }
        Ok(Self { g })
    }

    pub fn flags(&self) -> &[u8] {
        &self.g
    }

    pub fn active_count(&self) -> usize {
        self.g.iter().filter(|&&v| v == 1).count()
    }

    /// 1-based active antennas.
    pub fn support(&self) -> Vec<usize> {
        self.g
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(i, _)| i + 1)
            .collect()
    }
}
