//! Bit-level mappings for one transmission block.
//!
//! A block carries `r1 = floor(log2 K!)` bits selecting the activation order
//! of the reflecting patterns (a permutation matrix) followed by payload bits
//! selecting either K Gray-labelled M-PSK symbols (uncoded DRM) or one
//! element of a unitary group code (DRM-DSTM). Bits are `u8` values 0/1 and
//! groups of bits are read most-significant first.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use crate::cmatrix::{CMatrix, Complex};
use crate::group_codes::GroupCode;
use crate::{Error, Result};

/// Largest K for which a permutation codebook is built.
pub const MAX_SLOTS: usize = 8;

/// MSB-first integer value of a bit slice.
pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b & 1))
}

/// MSB-first `len`-bit expansion of `index`.
pub fn index_to_bits(index: usize, len: usize) -> Vec<u8> {
    (0..len).rev().map(|s| ((index >> s) & 1) as u8).collect()
}

/// `floor(log2 K!)`.
pub fn perm_bits(k: usize) -> usize {
    let fact: u128 = (1..=k as u128).product();
    (127 - fact.leading_zeros()) as usize
}

/// Exact integer log2 of a power of two.
pub(crate) fn log2_exact(m: usize) -> Option<usize> {
    m.is_power_of_two().then(|| m.trailing_zeros() as usize)
}

fn check_len(bits: &[u8], expected: usize) -> Result<()> {
    if bits.len() != expected {
        return Err(Error::BitLength {
            expected,
            got: bits.len(),
        });
    }
    Ok(())
}

/// Ordered set of `2^r1` K x K permutation matrices.
#[derive(Debug, Clone)]
pub struct PermutationCodebook {
    k: usize,
    r1: usize,
    /// One-line notation, 0-based: row `i` has its 1 in column `perms[c][i]`.
    perms: Vec<Vec<usize>>,
    matrices: Vec<CMatrix>,
}

/// The four K=3 matrices in bit order 00, 01, 10, 11.
const TABLE_K3: [[usize; 3]; 4] = [[1, 2, 0], [1, 0, 2], [0, 1, 2], [0, 2, 1]];

impl PermutationCodebook {
    /// K=3 uses the fixed four-matrix table; other K take the lexicographic
    /// prefix of all permutations (identity first).
    pub fn build(k: usize) -> Result<Self> {
        if !(2..=MAX_SLOTS).contains(&k) {
            return Err(Error::InvalidParameter(format!(
                "K must lie in 2..={MAX_SLOTS}, got {k}"
            )));
        }
        let r1 = perm_bits(k);
        let perms = if k == 3 {
            TABLE_K3.iter().map(|p| p.to_vec()).collect()
        } else {
            lexicographic_permutations(k, 1 << r1)
        };
        Self::from_perms(k, perms)
    }

    /// Codebook from explicit 0-based one-line permutations.
    pub fn from_perms(k: usize, perms: Vec<Vec<usize>>) -> Result<Self> {
        if !(2..=MAX_SLOTS).contains(&k) {
            return Err(Error::InvalidParameter(format!(
                "K must lie in 2..={MAX_SLOTS}, got {k}"
            )));
        }
        let r1 = perm_bits(k);
        if perms.len() != 1 << r1 {
            return Err(Error::InvalidParameter(format!(
                "K={k} needs exactly {} permutations, got {}",
                1 << r1,
                perms.len()
            )));
        }
        for (idx, p) in perms.iter().enumerate() {
            let mut seen = vec![false; k];
            if p.len() != k || p.iter().any(|&j| j >= k || std::mem::replace(&mut seen[j], true)) {
                return Err(Error::InvalidParameter(format!(
                    "entry {idx} is not a permutation of 1..{k}"
                )));
            }
            if perms[..idx].contains(p) {
                return Err(Error::InvalidParameter(format!("entry {idx} is a duplicate")));
            }
        }
        let matrices = perms.iter().map(|p| permutation_matrix(p)).collect();
        Ok(Self { k, r1, perms, matrices })
    }

    /// Parses one permutation per line in 1-based one-line notation
    /// (`2 3 1`). Blank lines and `#` comments are ignored.
    pub fn parse(k: usize, text: &str) -> Result<Self> {
        let mut perms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let p = line
                .split_whitespace()
                .map(|tok| match tok.parse::<usize>() {
                    Ok(v) if v >= 1 => Ok(v - 1),
                    _ => Err(Error::Parse(format!("line {}: bad entry {tok:?}", lineno + 1))),
                })
                .collect::<Result<Vec<_>>>()?;
            perms.push(p);
        }
        Self::from_perms(k, perms)
    }

    pub fn load(k: usize, path: &Path) -> Result<Self> {
        Self::parse(k, &std::fs::read_to_string(path)?)
    }

    /// Inverse of [`PermutationCodebook::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.perms {
            let line: Vec<String> = p.iter().map(|j| (j + 1).to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r1(&self) -> usize {
        self.r1
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn perms(&self) -> &[Vec<usize>] {
        &self.perms
    }

    pub fn matrix(&self, index: usize) -> &CMatrix {
        &self.matrices[index]
    }

    pub fn bits_to_permutation(&self, bits: &[u8]) -> Result<&CMatrix> {
        check_len(bits, self.r1)?;
        Ok(&self.matrices[bits_to_index(bits)])
    }

    pub fn permutation_to_bits(&self, z: &CMatrix) -> Option<Vec<u8>> {
        self.matrices
            .iter()
            .position(|m| m.approx_eq(z, 1e-9))
            .map(|i| index_to_bits(i, self.r1))
    }
}

fn permutation_matrix(perm: &[usize]) -> CMatrix {
    let k = perm.len();
    let mut m = CMatrix::zeros(k, k);
    for (i, &j) in perm.iter().enumerate() {
        m[(i, j)] = Complex::new(1.0, 0.0);
    }
    m
}

/// First `count` permutations of `0..k` in lexicographic order.
fn lexicographic_permutations(k: usize, count: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..k).collect();
    let mut out = Vec::with_capacity(count);
    loop {
        out.push(cur.clone());
        if out.len() == count {
            break;
        }
        // next permutation
        let Some(i) = (0..k - 1).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..k).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}

/// M-PSK constellation with binary-reflected Gray labels on the phase index.
#[derive(Debug, Clone)]
pub struct PskConstellation {
    m: usize,
    bits_per_symbol: usize,
    symbols: Vec<Complex>,
    labels: Vec<usize>,
}

impl PskConstellation {
    pub fn new(m: usize) -> Result<Self> {
        let bits_per_symbol = match log2_exact(m) {
            Some(b) if m >= 2 => b,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "PSK order must be a power of two >= 2, got {m}"
                )))
            }
        };
        let symbols = (0..m)
            .map(|p| Complex::from_polar(1.0, TAU * p as f64 / m as f64))
            .collect();
        let labels = (0..m).map(|p| p ^ (p >> 1)).collect();
        Ok(Self {
            m,
            bits_per_symbol,
            symbols,
            labels,
        })
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Symbols in phase order `e^{j 2 pi p / M}`.
    pub fn symbols(&self) -> &[Complex] {
        &self.symbols
    }

    /// Gray label of the symbol at phase index `p`.
    pub fn label(&self, p: usize) -> usize {
        self.labels[p]
    }

    /// Phase index carrying Gray label `label`.
    pub fn phase_of_label(&self, label: usize) -> usize {
        let mut p = label;
        let mut shift = label >> 1;
        while shift != 0 {
            p ^= shift;
            shift >>= 1;
        }
        p
    }

    pub fn bits_to_symbol(&self, bits: &[u8]) -> Result<Complex> {
        check_len(bits, self.bits_per_symbol)?;
        Ok(self.symbols[self.phase_of_label(bits_to_index(bits))])
    }

    /// Hard decision: bits of the nearest constellation point.
    pub fn symbol_to_bits(&self, s: Complex) -> Vec<u8> {
        let p = (0..self.m)
            .min_by(|&a, &b| {
                (self.symbols[a] - s)
                    .norm_sqr()
                    .total_cmp(&(self.symbols[b] - s).norm_sqr())
            })
            .unwrap();
        index_to_bits(self.labels[p], self.bits_per_symbol)
    }

    /// `diag(s_1, ..., s_K)` from `K * log2 M` bits.
    pub fn bits_to_diagonal(&self, bits: &[u8], k: usize) -> Result<CMatrix> {
        check_len(bits, k * self.bits_per_symbol)?;
        let diag = bits
            .chunks(self.bits_per_symbol)
            .map(|chunk| self.bits_to_symbol(chunk))
            .collect::<Result<Vec<_>>>()?;
        Ok(CMatrix::from_diag(&diag))
    }

    pub fn diagonal_to_bits(&self, s: &CMatrix) -> Vec<u8> {
        s.diag().into_iter().flat_map(|z| self.symbol_to_bits(z)).collect()
    }
}

/// Bits of one block: permutation bits followed by payload bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockBits {
    pub perm_bits: Vec<u8>,
    pub payload_bits: Vec<u8>,
}

impl BlockBits {
    pub fn new(perm_bits: Vec<u8>, payload_bits: Vec<u8>) -> Self {
        Self {
            perm_bits,
            payload_bits,
        }
    }

    /// Splits a concatenated label after `r1` bits.
    pub fn split(bits: &[u8], r1: usize) -> Self {
        Self {
            perm_bits: bits[..r1].to_vec(),
            payload_bits: bits[r1..].to_vec(),
        }
    }

    pub fn concat(&self) -> Vec<u8> {
        [self.perm_bits.as_slice(), self.payload_bits.as_slice()].concat()
    }

    pub fn len(&self) -> usize {
        self.perm_bits.len() + self.payload_bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Element of `code` selected by `log2 |G|` bits.
pub fn bits_to_group_element<'a>(code: &'a GroupCode, bits: &[u8]) -> Result<&'a CMatrix> {
    let expected = code.payload_bits();
    check_len(bits, expected)?;
    Ok(&code.elements()[bits_to_index(bits)])
}

pub fn group_element_to_bits(code: &GroupCode, g: &CMatrix) -> Option<Vec<u8>> {
    code.index_of(g).map(|i| index_to_bits(i, code.payload_bits()))
}
