//! Channel model of the RIS link and reflecting-pattern selection.
//!
//! Per slot the receiver sees `(h_d + H_2 Phi_i h_1) v + n`, so for a block
//! the equivalent channel is the N_r x K matrix whose i-th column is
//! `h_d + H_2 Phi_i h_1`. All fading coefficients are i.i.d. CN(0, 1) and are
//! held constant for a frame.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::cmatrix::{CMatrix, Complex};
use crate::mapping::PskConstellation;
use crate::{Error, Result};

/// Largest N accepted by [`select_patterns_stepwise_depletion`].
pub const MAX_UNITS: usize = 10;

/// Distances closer than this are treated as ties.
const TIE_TOL: f64 = 1e-9;

/// Diagonal of one N x N reflecting pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectingPattern {
    phi: Vec<Complex>,
}

impl ReflectingPattern {
    /// Every entry must have magnitude 0 or 1.
    pub fn new(phi: Vec<Complex>) -> Result<Self> {
        if phi.is_empty() {
            return Err(Error::InvalidParameter("pattern needs at least one unit".into()));
        }
        for (n, z) in phi.iter().enumerate() {
            let mag = z.norm();
            if !(mag < 1e-9 || (mag - 1.0).abs() < 1e-9) {
                return Err(Error::InvalidParameter(format!(
                    "unit {n} has magnitude {mag}, expected 0 or 1"
                )));
            }
        }
        Ok(Self { phi })
    }

    pub fn from_signs(signs: &[f64]) -> Result<Self> {
        Self::new(signs.iter().map(|&s| Complex::new(s, 0.0)).collect())
    }

    /// Sign pattern number `index` of `n` units: bit `n-1-i` of `index`
    /// set means unit `i` reflects with -1.
    pub fn sign_pattern(n: usize, index: usize) -> Self {
        let phi = (0..n)
            .map(|i| {
                let neg = (index >> (n - 1 - i)) & 1 == 1;
                Complex::new(if neg { -1.0 } else { 1.0 }, 0.0)
            })
            .collect();
        Self { phi }
    }

    pub fn units(&self) -> usize {
        self.phi.len()
    }

    pub fn entries(&self) -> &[Complex] {
        &self.phi
    }

    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_diag(&self.phi)
    }

    fn format_line(&self) -> String {
        let toks: Vec<String> = self.phi.iter().map(|&z| format_entry(z)).collect();
        toks.join(" ")
    }
}

fn format_entry(z: Complex) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}-{}j", z.re, -z.im)
    } else {
        format!("{}+{}j", z.re, z.im)
    }
}

fn parse_entry(tok: &str) -> Result<Complex> {
    let bad = || Error::Parse(format!("bad pattern entry {tok:?}"));
    let Some(body) = tok.strip_suffix('j') else {
        return tok.parse::<f64>().map(|re| Complex::new(re, 0.0)).map_err(|_| bad());
    };
    // split at the sign that starts the imaginary part (not an exponent sign)
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'))
        .ok_or_else(bad)?;
    let re = body[..split].parse::<f64>().map_err(|_| bad())?;
    let im = body[split..].parse::<f64>().map_err(|_| bad())?;
    Ok(Complex::new(re, im))
}

/// All 2^N sign patterns in canonical order.
pub fn sign_pattern_universe(n: usize) -> Vec<ReflectingPattern> {
    (0..1usize << n)
        .map(|i| ReflectingPattern::sign_pattern(n, i))
        .collect()
}

/// Candidate universe, selected patterns and their block-diagonal assembly.
#[derive(Debug, Clone)]
pub struct ReflectingPatternSet {
    n: usize,
    candidates: Vec<ReflectingPattern>,
    selected: Vec<ReflectingPattern>,
    q: CMatrix,
}

impl ReflectingPatternSet {
    pub fn new(candidates: Vec<ReflectingPattern>, selected: Vec<ReflectingPattern>) -> Result<Self> {
        let n = selected
            .first()
            .map(ReflectingPattern::units)
            .ok_or_else(|| Error::InvalidParameter("no patterns selected".into()))?;
        if selected.iter().chain(&candidates).any(|p| p.units() != n) {
            return Err(Error::Dimension("patterns with different unit counts".into()));
        }
        for (i, p) in selected.iter().enumerate() {
            if selected[..i].contains(p) {
                return Err(Error::InvalidParameter(format!("pattern {i} selected twice")));
            }
        }
        let q = CMatrix::block_diag(&selected.iter().map(ReflectingPattern::matrix).collect::<Vec<_>>());
        Ok(Self {
            n,
            candidates,
            selected,
            q,
        })
    }

    /// Set whose candidate universe is the selected list itself.
    pub fn from_selected(selected: Vec<ReflectingPattern>) -> Result<Self> {
        Self::new(selected.clone(), selected)
    }

    pub fn units(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.selected.len()
    }

    pub fn candidates(&self) -> &[ReflectingPattern] {
        &self.candidates
    }

    pub fn selected(&self) -> &[ReflectingPattern] {
        &self.selected
    }

    /// KN x KN block-diagonal matrix of the selected patterns.
    pub fn q(&self) -> &CMatrix {
        &self.q
    }

    /// Minimum tuple distance of the selected patterns over `psk`.
    pub fn min_distance(&self, psk: &PskConstellation) -> f64 {
        min_tuple_distance(&self.selected, psk.symbols())
    }

    /// One pattern per line, entries separated by spaces.
    pub fn to_text(&self, header: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(h) = header {
            for line in h.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        for p in &self.selected {
            let _ = writeln!(out, "{}", p.format_line());
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut selected = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let phi = line
                .split_whitespace()
                .map(parse_entry)
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            selected.push(ReflectingPattern::new(phi)?);
        }
        Self::from_selected(selected)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn store(&self, path: &Path, header: Option<&str>) -> Result<()> {
        std::fs::write(path, self.to_text(header))?;
        Ok(())
    }
}

/// `|| phi_i s_k - phi_j s_l ||_2`.
pub fn tuple_distance(phi_i: &ReflectingPattern, s_k: Complex, phi_j: &ReflectingPattern, s_l: Complex) -> f64 {
    assert_eq!(phi_i.units(), phi_j.units(), "patterns differ in unit count");
    phi_i
        .phi
        .iter()
        .zip(&phi_j.phi)
        .map(|(&a, &b)| (a * s_k - b * s_l).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Smallest distance between two different patterns over all symbol pairs.
fn cross_distance(a: &ReflectingPattern, b: &ReflectingPattern, symbols: &[Complex]) -> f64 {
    let mut best = f64::INFINITY;
    for &s in symbols {
        for &t in symbols {
            best = best.min(tuple_distance(a, s, b, t));
        }
    }
    best
}

/// Smallest distance between two tuples of the same pattern.
fn self_distance(a: &ReflectingPattern, symbols: &[Complex]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, &s) in symbols.iter().enumerate() {
        for &t in &symbols[i + 1..] {
            best = best.min(tuple_distance(a, s, a, t));
        }
    }
    best
}

/// Minimum distance over all pairs of distinct tuples `(pattern, symbol)`.
///
/// Tuples of different patterns that map to the same vector (for example
/// `phi` with `+1` and `-phi` with `-1`) count as distance zero.
pub fn min_tuple_distance(patterns: &[ReflectingPattern], symbols: &[Complex]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in patterns.iter().enumerate() {
        best = best.min(self_distance(a, symbols));
        for b in &patterns[i + 1..] {
            best = best.min(cross_distance(a, b, symbols));
        }
    }
    best
}

/// Result of [`select_patterns_stepwise_depletion`].
#[derive(Debug, Clone)]
pub struct DepletionOutcome {
    pub set: ReflectingPatternSet,
    /// Canonical indices of the surviving patterns.
    pub indices: Vec<usize>,
    /// Minimum tuple distance of the survivors.
    pub min_distance: f64,
    /// Minimum tuple distance before the first removal and after each one.
    pub history: Vec<f64>,
}

/// Stepwise depletion over the 2^N sign patterns.
///
/// Each step finds the globally closest pair of tuples belonging to two
/// different surviving patterns and removes every tuple of one of them: the
/// pattern with the larger canonical index of the lexicographically first
/// closest pair. Stops when K patterns remain.
pub fn select_patterns_stepwise_depletion(n: usize, m: usize, k: usize) -> Result<DepletionOutcome> {
    if n == 0 || n > MAX_UNITS {
        return Err(Error::InvalidParameter(format!(
            "N must lie in 1..={MAX_UNITS}, got {n}"
        )));
    }
    if k == 0 || k > 1 << n {
        return Err(Error::InvalidParameter(format!(
            "cannot select K={k} patterns from 2^{n} candidates"
        )));
    }
    let psk = PskConstellation::new(m)?;
    let symbols = psk.symbols();
    let universe = sign_pattern_universe(n);
    let total = universe.len();

    let mut pair = vec![0.0f64; total * total];
    for i in 0..total {
        for j in i + 1..total {
            let d = cross_distance(&universe[i], &universe[j], symbols);
            pair[i * total + j] = d;
            pair[j * total + i] = d;
        }
    }
    let self_min = universe
        .iter()
        .map(|p| self_distance(p, symbols))
        .fold(f64::INFINITY, f64::min);

    let mut alive: Vec<usize> = (0..total).collect();
    let current_min = |alive: &[usize]| -> f64 {
        let mut best = self_min;
        for (a, &i) in alive.iter().enumerate() {
            for &j in &alive[a + 1..] {
                best = best.min(pair[i * total + j]);
            }
        }
        best
    };
    let mut history = vec![current_min(&alive)];

    while alive.len() > k {
        let mut global = f64::INFINITY;
        let mut victim = None;
        for (a, &i) in alive.iter().enumerate() {
            for &j in &alive[a + 1..] {
                let d = pair[i * total + j];
                if d < global - TIE_TOL {
                    global = d;
                    victim = Some(j);
                }
            }
        }
        let victim = victim.expect("at least two patterns alive");
        alive.retain(|&i| i != victim);
        history.push(current_min(&alive));
    }

    let selected: Vec<ReflectingPattern> = alive.iter().map(|&i| universe[i].clone()).collect();
    let min_distance = min_tuple_distance(&selected, symbols);
    Ok(DepletionOutcome {
        set: ReflectingPatternSet::new(universe, selected)?,
        indices: alive,
        min_distance,
        history,
    })
}

/// Fixed non-optimised selection: for K=2, N=4 the two patterns
/// `(1,-1,-1,-1)` and `(-1,-1,-1,-1)`; otherwise the first K sign patterns.
pub fn random_pattern_set(k: usize, n: usize) -> Result<ReflectingPatternSet> {
    if k == 0 || n == 0 || k > 1 << n.min(20) {
        return Err(Error::InvalidParameter(format!("cannot pick K={k} of 2^{n} patterns")));
    }
    let selected = if k == 2 && n == 4 {
        vec![
            ReflectingPattern::from_signs(&[1.0, -1.0, -1.0, -1.0])?,
            ReflectingPattern::from_signs(&[-1.0; 4])?,
        ]
    } else {
        (0..k).map(|i| ReflectingPattern::sign_pattern(n, i)).collect()
    };
    let candidates = if n <= MAX_UNITS {
        sign_pattern_universe(n)
    } else {
        selected.clone()
    };
    ReflectingPatternSet::new(candidates, selected)
}

/// Where the simulator takes its reflecting patterns from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternSource {
    Optimized,
    Random,
    File(PathBuf),
}

impl PatternSource {
    /// Selected set for K patterns of N units. `psk_order` drives the
    /// depletion distance metric.
    pub fn resolve(&self, n: usize, k: usize, psk_order: usize) -> Result<ReflectingPatternSet> {
        let set = match self {
            PatternSource::Optimized => select_patterns_stepwise_depletion(n, psk_order, k)?.set,
            PatternSource::Random => random_pattern_set(k, n)?,
            PatternSource::File(path) => ReflectingPatternSet::load(path)?,
        };
        if set.k() != k || set.units() != n {
            return Err(Error::InvalidParameter(format!(
                "pattern set has K={} N={}, expected K={k} N={n}",
                set.k(),
                set.units()
            )));
        }
        Ok(set)
    }
}

impl FromStr for PatternSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimized" => Ok(PatternSource::Optimized),
            "random" => Ok(PatternSource::Random),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(PatternSource::File(PathBuf::from(p))),
                _ => Err(Error::Parse(format!(
                    "pattern source {s:?} is not optimized|random|file:<path>"
                ))),
            },
        }
    }
}

impl std::fmt::Display for PatternSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PatternSource::Optimized => f.write_str("optimized"),
            PatternSource::Random => f.write_str("random"),
            PatternSource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// One CN(0, variance) sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(re * scale, im * scale)
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let data = (0..rows * cols).map(|_| complex_gaussian(rng, 1.0)).collect();
    CMatrix::new(rows, cols, data).expect("gaussian samples are finite")
}

/// One quasi-static channel draw together with its equivalent matrix.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Direct link, N_r x 1.
    pub h_d: CMatrix,
    /// Transmitter to RIS, N x 1.
    pub h_1: CMatrix,
    /// RIS to receiver, N_r x N.
    pub h_2: CMatrix,
    /// Equivalent channel, N_r x K.
    pub h: CMatrix,
}

impl ChannelRealization {
    pub fn from_parts(h_d: CMatrix, h_1: CMatrix, h_2: CMatrix, patterns: &[ReflectingPattern]) -> Result<Self> {
        let h = equivalent_channel(&h_d, &h_1, &h_2, patterns)?;
        Ok(Self { h_d, h_1, h_2, h })
    }

    pub fn receive_antennas(&self) -> usize {
        self.h.rows()
    }

    /// `h_d + H_2 Phi h_1` for an arbitrary pattern.
    pub fn column_for(&self, phi: &ReflectingPattern) -> Result<CMatrix> {
        let reflected = self.h_2.matmul(&phi.matrix())?.matmul(&self.h_1)?;
        self.h_d.try_add(&reflected)
    }
}

/// Column-wise form: column i is `h_d + H_2 Phi_i h_1`.
pub fn equivalent_channel(
    h_d: &CMatrix,
    h_1: &CMatrix,
    h_2: &CMatrix,
    patterns: &[ReflectingPattern],
) -> Result<CMatrix> {
    let (nr, n) = h_2.shape();
    if h_d.shape() != (nr, 1) || h_1.shape() != (n, 1) {
        return Err(Error::Dimension(format!(
            "h_d {:?}, h_1 {:?} incompatible with H_2 {:?}",
            h_d.shape(),
            h_1.shape(),
            h_2.shape()
        )));
    }
    let mut h = CMatrix::zeros(nr, patterns.len().max(1));
    for (i, p) in patterns.iter().enumerate() {
        if p.units() != n {
            return Err(Error::Dimension(format!(
                "pattern {i} has {} units, H_2 has {n}",
                p.units()
            )));
        }
        for r in 0..nr {
            let mut acc = h_d[(r, 0)];
            for u in 0..n {
                acc += h_2[(r, u)] * p.phi[u] * h_1[(u, 0)];
            }
            h[(r, i)] = acc;
        }
    }
    Ok(h)
}

/// Stacked form `[h_d .. h_d] + [H_2 .. H_2] Q blockdiag(h_1 .. h_1)`.
pub fn equivalent_channel_stacked(
    h_d: &CMatrix,
    h_1: &CMatrix,
    h_2: &CMatrix,
    q: &CMatrix,
    k: usize,
) -> Result<CMatrix> {
    let hd_tilde = CMatrix::hstack(&vec![h_d.clone(); k])?;
    let h2_tilde = CMatrix::hstack(&vec![h_2.clone(); k])?;
    let h1_tilde = CMatrix::block_diag(&vec![h_1.clone(); k]);
    let reflected = h2_tilde.matmul(q)?.matmul(&h1_tilde)?;
    hd_tilde.try_add(&reflected)
}

/// Draws `h_d`, `h_1`, `H_2` i.i.d. CN(0, 1) and assembles the equivalent
/// channel for `patterns`.
pub fn draw_channel<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    nr: usize,
    patterns: &[ReflectingPattern],
) -> Result<ChannelRealization> {
    if patterns.is_empty() {
        return Err(Error::InvalidParameter("no patterns selected".into()));
    }
    let h_d = gaussian_matrix(rng, nr, 1);
    let h_1 = gaussian_matrix(rng, n, 1);
    let h_2 = gaussian_matrix(rng, nr, n);
    ChannelRealization::from_parts(h_d, h_1, h_2, patterns)
}

/// Adds i.i.d. CN(0, sigma2) noise to every entry.
pub fn add_awgn<R: Rng + ?Sized>(rng: &mut R, clean: &CMatrix, sigma2: f64) -> Result<CMatrix> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be >= 0, got {sigma2}"
        )));
    }
    if sigma2 == 0.0 {
        return Ok(clean.clone());
    }
    let data = clean
        .data()
        .iter()
        .map(|&z| z + complex_gaussian(rng, sigma2))
        .collect();
    CMatrix::new(clean.rows(), clean.cols(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one() -> Complex {
        Complex::new(1.0, 0.0)
    }

    fn patterns(n: usize, idx: &[usize]) -> Vec<ReflectingPattern> {
        idx.iter().map(|&i| ReflectingPattern::sign_pattern(n, i)).collect()
    }

    /// Brute force: best minimum tuple distance over all K-subsets.
    pub(crate) fn subset_oracle(n: usize, m: usize, k: usize) -> f64 {
        let universe = sign_pattern_universe(n);
        let psk = PskConstellation::new(m).unwrap();
        let mut best = f64::NEG_INFINITY;
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let subset: Vec<_> = idx.iter().map(|&i| universe[i].clone()).collect();
            best = best.max(min_tuple_distance(&subset, psk.symbols()));
            let Some(p) = (0..k).rev().find(|&p| idx[p] < universe.len() - k + p) else {
                break;
            };
            idx[p] += 1;
            for q in p + 1..k {
                idx[q] = idx[q - 1] + 1;
            }
        }
        best
    }

    #[test]
    fn zero_ris_path_leaves_direct_link() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ch = draw_channel(&mut rng, 4, 3, &patterns(4, &[0, 5])).unwrap();
        let h = equivalent_channel(&ch.h_d, &ch.h_1, &CMatrix::zeros(3, 4), &patterns(4, &[0, 5])).unwrap();
        for i in 0..2 {
            for r in 0..3 {
                assert_eq!(h[(r, i)], ch.h_d[(r, 0)]);
            }
        }
    }

    #[test]
    fn identity_ris_path_exposes_patterns() {
        let ps = patterns(4, &[3, 9]);
        let h = equivalent_channel(
            &CMatrix::zeros(4, 1),
            &CMatrix::column_vector(&[one(); 4]),
            &CMatrix::identity(4),
            &ps,
        )
        .unwrap();
        for (i, p) in ps.iter().enumerate() {
            assert_eq!(h.column(i), p.entries().to_vec());
        }
    }

    #[test]
    fn stacked_and_columnwise_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for (n, nr, k) in [(4, 3, 2), (4, 3, 4), (3, 2, 3), (6, 1, 2)] {
            let set = random_pattern_set(k, n).unwrap();
            let ch = draw_channel(&mut rng, n, nr, set.selected()).unwrap();
            let stacked = equivalent_channel_stacked(&ch.h_d, &ch.h_1, &ch.h_2, set.q(), k).unwrap();
            assert!(stacked.approx_eq(&ch.h, 1e-12));
            for (i, p) in set.selected().iter().enumerate() {
                assert!(ch
                    .column_for(p)
                    .unwrap()
                    .approx_eq(&CMatrix::column_vector(&ch.h.column(i)), 1e-12));
            }
        }
    }

    #[test]
    fn fading_has_unit_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let mut power = 0.0;
        let mut re2 = 0.0;
        for _ in 0..draws {
            let h = complex_gaussian(&mut rng, 1.0);
            power += h.norm_sqr();
            re2 += h.re * h.re;
        }
        let power = power / draws as f64;
        assert!((0.99..=1.01).contains(&power), "{power}");
        assert!(((re2 / draws as f64) - 0.5).abs() < 0.01);
    }

    #[test]
    fn awgn_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let clean = CMatrix::zeros(1, 100_000);
        let sigma2 = 0.37;
        let noisy = add_awgn(&mut rng, &clean, sigma2).unwrap();
        let n = noisy.data().len() as f64;
        let var = noisy.frob_norm_sq() / n;
        assert!((var / sigma2 - 1.0).abs() < 0.02, "{var}");
        let mean: Complex = noisy.data().iter().sum::<Complex>() / n;
        let se = (sigma2 / 2.0 / n).sqrt();
        assert!(mean.re.abs() < 3.0 * se && mean.im.abs() < 3.0 * se);

        let x = CMatrix::identity(3);
        assert_eq!(add_awgn(&mut rng, &x, 0.0).unwrap(), x);
        assert!(add_awgn(&mut rng, &x, -1.0).is_err());
    }

    #[test]
    fn tuple_distance_cases() {
        let ones = ReflectingPattern::from_signs(&[1.0; 4]).unwrap();
        let negs = ReflectingPattern::from_signs(&[-1.0; 4]).unwrap();
        assert_eq!(tuple_distance(&ones, one(), &ones, one()), 0.0);
        assert!((tuple_distance(&ones, one(), &ones, -one()) - 4.0).abs() < 1e-12);
        assert_eq!(tuple_distance(&ones, one(), &negs, -one()), 0.0);
    }

    #[test]
    fn depletion_avoids_antipodal_pairs_n2() {
        let out = select_patterns_stepwise_depletion(2, 2, 2).unwrap();
        let [a, b] = [&out.set.selected()[0], &out.set.selected()[1]];
        let neg: Vec<Complex> = a.entries().iter().map(|z| -z).collect();
        assert_ne!(b.entries(), neg.as_slice());
        assert!((out.min_distance - subset_oracle(2, 2, 2)).abs() < 1e-12);
        assert!((out.min_distance - 2.0).abs() < 1e-12);
    }

    #[test]
    fn depletion_matches_subset_oracle() {
        for n in 1..=4 {
            for m in [2, 4] {
                let out = select_patterns_stepwise_depletion(n, m, 2).unwrap();
                let oracle = subset_oracle(n, m, 2);
                assert!(
                    (out.min_distance - oracle).abs() < 1e-12,
                    "N={n} M={m}: {} vs {oracle}",
                    out.min_distance
                );
            }
        }
        let out = select_patterns_stepwise_depletion(4, 2, 2).unwrap();
        assert!((out.min_distance - 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn depletion_half_set_keeps_one_of_each_antipodal_pair() {
        for n in 2..=4 {
            let k = 1 << (n - 1);
            let out = select_patterns_stepwise_depletion(n, 2, k).unwrap();
            let full = (1usize << n) - 1;
            for &i in &out.indices {
                assert!(!out.indices.contains(&(full ^ i)), "N={n} kept {i} and its negation");
            }
            assert!(out.min_distance > 0.0);
        }
    }

    #[test]
    fn depletion_history_is_monotone_and_deterministic() {
        for (n, m, k) in [(4, 2, 3), (5, 4, 4), (6, 2, 8)] {
            let out = select_patterns_stepwise_depletion(n, m, k).unwrap();
            assert_eq!(out.set.k(), k);
            assert!(out.history.windows(2).all(|w| w[1] >= w[0] - 1e-12));
            assert!(out.min_distance >= out.history[0] - 1e-12);
            assert!((out.history.last().unwrap() - out.min_distance).abs() < 1e-12);
            let again = select_patterns_stepwise_depletion(n, m, k).unwrap();
            assert_eq!(again.indices, out.indices);
        }
        assert!(select_patterns_stepwise_depletion(2, 2, 5).is_err());
        assert!(select_patterns_stepwise_depletion(11, 2, 2).is_err());
    }

    #[test]
    fn random_set_reproduces_fixed_q() {
        let set = random_pattern_set(2, 4).unwrap();
        let expect: Vec<Complex> = [1., -1., -1., -1., -1., -1., -1., -1.]
            .iter()
            .map(|&x| Complex::new(x, 0.0))
            .collect();
        assert!(set.q().approx_eq(&CMatrix::from_diag(&expect), 0.0));

        let single = random_pattern_set(1, 3).unwrap();
        assert!(single.q().approx_eq(&single.selected()[0].matrix(), 0.0));

        let set = random_pattern_set(3, 3).unwrap();
        for (b, p) in set.selected().iter().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    let z = set.q()[(3 * b + i, 3 * b + j)];
                    let want = if i == j { p.entries()[i] } else { Complex::new(0.0, 0.0) };
                    assert_eq!(z, want);
                }
            }
        }
    }

    #[test]
    fn pattern_file_round_trip() {
        let phi = vec![
            Complex::new(1.0, 0.0),
            Complex::new(0.0, -1.0),
            Complex::new(0.6, 0.8),
            Complex::new(0.0, 0.0),
        ];
        let set = ReflectingPatternSet::from_selected(vec![
            ReflectingPattern::new(phi).unwrap(),
            ReflectingPattern::from_signs(&[-1.0, 1.0, 1.0, -1.0]).unwrap(),
        ])
        .unwrap();
        let text = set.to_text(Some("D_ED,min = 2"));
        assert!(text.starts_with("# D_ED,min = 2\n"));
        let back = ReflectingPatternSet::parse(&text).unwrap();
        assert_eq!(back.selected(), set.selected());
        assert!(parse_entry("1e-3+2.5e+0j").is_ok());
        assert!(ReflectingPatternSet::parse("1 2\n").is_err());
        assert!(ReflectingPatternSet::parse("1 x\n").is_err());
    }

    #[test]
    fn pattern_source_parsing() {
        assert_eq!("optimized".parse::<PatternSource>().unwrap(), PatternSource::Optimized);
        assert_eq!(
            "file:/tmp/p.txt".parse::<PatternSource>().unwrap(),
            PatternSource::File("/tmp/p.txt".into())
        );
        assert!("file:".parse::<PatternSource>().is_err());
        assert!("best".parse::<PatternSource>().is_err());
    }
}
