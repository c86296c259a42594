//! Differential encoders, the CDD detector, the coherent baseline detector
//! and bit recovery.

use std::fmt;
use std::str::FromStr;

use crate::cmatrix::{CMatrix, Complex, DEFAULT_TOL};
use crate::group_codes::GroupCode;
use crate::mapping::{
    bits_to_group_element, bits_to_index, index_to_bits, BlockBits, PermutationCodebook, PskConstellation,
};
use crate::{Error, Result};

/// Largest candidate set the exhaustive detectors accept.
pub const MAX_CANDIDATES: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Differential reflecting modulation with PSK payload.
    Drm,
    /// Differential reflecting modulation with a group-code payload.
    DrmDstm,
    /// Coherent detection of the DRM alphabet with perfect channel knowledge.
    Ndrm,
}

impl Scheme {
    pub fn is_differential(self) -> bool {
        !matches!(self, Scheme::Ndrm)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Drm => "drm",
            Scheme::DrmDstm => "drm-dstm",
            Scheme::Ndrm => "ndrm",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "drm" => Ok(Scheme::Drm),
            "drm-dstm" | "dstm" => Ok(Scheme::DrmDstm),
            "ndrm" => Ok(Scheme::Ndrm),
            _ => Err(Error::Parse(format!(
                "unknown scheme {s:?}, expected drm|drm-dstm|ndrm"
            ))),
        }
    }
}

/// Transmitter-side state of one frame.
#[derive(Debug, Clone)]
pub struct FrameState {
    scheme: Scheme,
    v_prev: CMatrix,
    t: usize,
    blocks: usize,
}

impl FrameState {
    /// Block 0 reference: `V[0] = I`.
    pub fn drm(k: usize, blocks: usize) -> Self {
        Self {
            scheme: Scheme::Drm,
            v_prev: CMatrix::identity(k),
            t: 0,
            blocks,
        }
    }

    /// Block 0 reference: `V'[0] = D / sqrt(K)`.
    pub fn dstm(normalized_d: CMatrix, blocks: usize) -> Self {
        Self {
            scheme: Scheme::DrmDstm,
            v_prev: normalized_d,
            t: 0,
            blocks,
        }
    }

    /// Coherent baseline: blocks are sent without differential encoding.
    pub fn ndrm(k: usize, blocks: usize) -> Self {
        Self {
            scheme: Scheme::Ndrm,
            v_prev: CMatrix::identity(k),
            t: 0,
            blocks,
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Most recently transmitted block.
    pub fn v_prev(&self) -> &CMatrix {
        &self.v_prev
    }

    /// Index of the most recently transmitted block.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// Transmits information matrix `x` and returns the new block.
    pub fn advance(&mut self, x: &CMatrix) -> Result<CMatrix> {
        if self.t + 1 >= self.blocks {
            return Err(Error::InvalidParameter(format!(
                "frame of {} blocks is exhausted",
                self.blocks
            )));
        }
        let v = match self.scheme {
            Scheme::Ndrm => x.clone(),
            _ => self.v_prev.matmul(x)?,
        };
        self.v_prev = v.clone();
        self.t += 1;
        Ok(v)
    }
}

fn expect_scheme(state: &FrameState, scheme: Scheme) -> Result<()> {
    if state.scheme != scheme {
        return Err(Error::InvalidParameter(format!(
            "frame state is {}, expected {scheme}",
            state.scheme
        )));
    }
    Ok(())
}

/// `X = Z S` followed by `V[t] = V[t-1] X`.
pub fn encode_block_drm(
    state: &mut FrameState,
    bits: &BlockBits,
    cb: &PermutationCodebook,
    psk: &PskConstellation,
) -> Result<(CMatrix, CMatrix)> {
    if state.scheme == Scheme::DrmDstm {
        return Err(Error::InvalidParameter(
            "DRM encoder called on a group-coded frame".into(),
        ));
    }
    let z = cb.bits_to_permutation(&bits.perm_bits)?;
    let s = psk.bits_to_diagonal(&bits.payload_bits, cb.k())?;
    let x = z.matmul(&s)?;
    let v = state.advance(&x)?;
    Ok((x, v))
}

/// `X' = Z G` followed by `V'[t] = V'[t-1] X'`.
pub fn encode_block_dstm(
    state: &mut FrameState,
    bits: &BlockBits,
    cb: &PermutationCodebook,
    code: &GroupCode,
) -> Result<(CMatrix, CMatrix)> {
    expect_scheme(state, Scheme::DrmDstm)?;
    let z = cb.bits_to_permutation(&bits.perm_bits)?;
    let g = bits_to_group_element(code, &bits.payload_bits)?;
    let x = z.matmul(g)?;
    let v = state.advance(&x)?;
    Ok((x, v))
}

/// Every information matrix of a scheme with its bit label.
///
/// Candidate `i` carries the label `index_to_bits(i, r)`, i.e. the
/// permutation index in the high bits and the payload index in the low bits.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    k: usize,
    r1: usize,
    r: usize,
    matrices: Vec<CMatrix>,
    supports: Option<Vec<Vec<(usize, Complex)>>>,
}

impl CandidateSet {
    pub fn drm(cb: &PermutationCodebook, psk: &PskConstellation) -> Result<Self> {
        let k = cb.k();
        let payload_bits = k * psk.bits_per_symbol();
        let payloads: Vec<CMatrix> = (0..1usize << payload_bits.min(40))
            .take(MAX_CANDIDATES + 1)
            .map(|q| psk.bits_to_diagonal(&index_to_bits(q, payload_bits), k))
            .collect::<Result<_>>()?;
        Self::assemble(cb, payload_bits, &payloads)
    }

    pub fn dstm(cb: &PermutationCodebook, code: &GroupCode) -> Result<Self> {
        if code.spec().k() != cb.k() {
            return Err(Error::Dimension(format!(
                "code is {}x{} but codebook has K={}",
                code.spec().k(),
                code.spec().k(),
                cb.k()
            )));
        }
        Self::assemble(cb, code.payload_bits(), code.elements())
    }

    /// Explicit candidate list; its length must be a power of two and the
    /// first `r1` label bits are reported as permutation bits.
    pub fn from_matrices(k: usize, r1: usize, matrices: Vec<CMatrix>) -> Result<Self> {
        if matrices.is_empty() || !matrices.len().is_power_of_two() || matrices.len() > MAX_CANDIDATES {
            return Err(Error::InvalidParameter(format!(
                "candidate count {} is not a power of two within the limit",
                matrices.len()
            )));
        }
        let r = matrices.len().trailing_zeros() as usize;
        if r1 > r {
            return Err(Error::InvalidParameter(format!("r1={r1} exceeds r={r}")));
        }
        if let Some(x) = matrices.iter().find(|x| x.shape() != (k, k)) {
            return Err(Error::Dimension(format!(
                "candidate is {:?}, expected {k}x{k}",
                x.shape()
            )));
        }
        let supports = matrices
            .iter()
            .map(|x| x.column_support(DEFAULT_TOL))
            .collect::<Option<Vec<_>>>();
        Ok(Self {
            k,
            r1,
            r,
            matrices,
            supports,
        })
    }

    fn assemble(cb: &PermutationCodebook, payload_bits: usize, payloads: &[CMatrix]) -> Result<Self> {
        let r1 = cb.r1();
        let count = (cb.len() as u128) * (1u128 << payload_bits.min(100));
        if count > MAX_CANDIDATES as u128 {
            return Err(Error::SearchSpace(format!(
                "{count} candidates exceed the limit of {MAX_CANDIDATES}"
            )));
        }
        if payloads.len() != 1 << payload_bits {
            return Err(Error::InvalidParameter(format!(
                "{} payload matrices for {payload_bits} bits",
                payloads.len()
            )));
        }
        let mut matrices = Vec::with_capacity(count as usize);
        for z in cb.matrices() {
            for p in payloads {
                matrices.push(z.matmul(p)?);
            }
        }
        let supports = matrices
            .iter()
            .map(|x| x.column_support(DEFAULT_TOL))
            .collect::<Option<Vec<_>>>();
        Ok(Self {
            k: cb.k(),
            r1,
            r: r1 + payload_bits,
            matrices,
            supports,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r1(&self) -> usize {
        self.r1
    }

    /// Bits per block.
    pub fn r(&self) -> usize {
        self.r
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

    pub fn matrix(&self, index: usize) -> &CMatrix {
        &self.matrices[index]
    }

    pub fn bits(&self, index: usize) -> Vec<u8> {
        index_to_bits(index, self.r)
    }

    pub fn index_of_bits(&self, bits: &[u8]) -> Result<usize> {
        if bits.len() != self.r {
            return Err(Error::BitLength {
                expected: self.r,
                got: bits.len(),
            });
        }
        Ok(bits_to_index(bits))
    }

    /// True when every candidate has one nonzero per column, which enables
    /// the O(K) metric evaluation.
    pub fn is_monomial(&self) -> bool {
        self.supports.is_some()
    }
}

fn check_pair(a: &CMatrix, b: &CMatrix, cs: &CandidateSet) -> Result<()> {
    if a.shape() != b.shape() || a.cols() != cs.k() {
        return Err(Error::Dimension(format!(
            "received blocks {:?} and {:?} do not match K={}",
            a.shape(),
            b.shape(),
            cs.k()
        )));
    }
    if cs.is_empty() {
        return Err(Error::InvalidParameter("empty candidate set".into()));
    }
    Ok(())
}

/// `Re tr(A X)` for every candidate.
fn trace_metrics(a: &CMatrix, cs: &CandidateSet) -> Result<Vec<f64>> {
    match &cs.supports {
        Some(supports) => Ok(supports
            .iter()
            .map(|cols| cols.iter().enumerate().map(|(j, &(i, c))| (a[(j, i)] * c).re).sum())
            .collect()),
        None => cs.matrices.iter().map(|x| a.matmul(x)?.trace_re()).collect(),
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// CDD metric `Re tr(Y_curr^H Y_prev X)` of every candidate.
pub fn cdd_metrics(y_prev: &CMatrix, y_curr: &CMatrix, cs: &CandidateSet) -> Result<Vec<f64>> {
    check_pair(y_prev, y_curr, cs)?;
    let a = y_curr.adjoint().matmul(y_prev)?;
    trace_metrics(&a, cs)
}

/// Index of the candidate maximising `Re tr(Y_curr^H Y_prev X)`.
pub fn cdd_detect(y_prev: &CMatrix, y_curr: &CMatrix, cs: &CandidateSet) -> Result<usize> {
    Ok(argmax(&cdd_metrics(y_prev, y_curr, cs)?))
}

/// Index of the candidate minimising `||Y_curr - Y_prev X||_F^2`.
pub fn cdd_detect_frobenius(y_prev: &CMatrix, y_curr: &CMatrix, cs: &CandidateSet) -> Result<usize> {
    check_pair(y_prev, y_curr, cs)?;
    let residuals = cs
        .matrices
        .iter()
        .map(|x| Ok(y_curr.try_sub(&y_prev.matmul(x)?)?.frob_norm_sq()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(argmin(&residuals))
}

/// Index of the candidate minimising `||Y - H X||_F^2`.
pub fn coherent_detect_ndrm(y: &CMatrix, h: &CMatrix, cs: &CandidateSet) -> Result<usize> {
    check_pair(y, h, cs)?;
    let residuals: Vec<f64> = match &cs.supports {
        Some(supports) => supports
            .iter()
            .map(|cols| {
                let mut acc = 0.0;
                for (j, &(i, c)) in cols.iter().enumerate() {
                    for row in 0..y.rows() {
                        acc += (y[(row, j)] - h[(row, i)] * c).norm_sqr();
                    }
                }
                acc
            })
            .collect(),
        None => cs
            .matrices
            .iter()
            .map(|x| Ok(y.try_sub(&h.matmul(x)?)?.frob_norm_sq()))
            .collect::<Result<_>>()?,
    };
    Ok(argmin(&residuals))
}

/// Bit label of candidate `index`, split into permutation and payload bits.
pub fn recover_bits(index: usize, cs: &CandidateSet) -> BlockBits {
    BlockBits::split(&cs.bits(index), cs.r1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmatrix::test_util::random_matrix;
    use crate::group_codes::{build_initializer, CodeKind, GroupCodeSpec, InitializerStyle};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn real(rows: usize, data: &[f64]) -> CMatrix {
        CMatrix::from_real(rows, data.len() / rows, data).unwrap()
    }

    fn drm_set(k: usize, m: usize) -> (PermutationCodebook, PskConstellation, CandidateSet) {
        let cb = PermutationCodebook::build(k).unwrap();
        let psk = PskConstellation::new(m).unwrap();
        let cs = CandidateSet::drm(&cb, &psk).unwrap();
        (cb, psk, cs)
    }

    fn code(kind: CodeKind, m: usize, k: usize, u: &[usize]) -> GroupCode {
        GroupCodeSpec::new(kind, m, k, u.to_vec()).unwrap().build().unwrap()
    }

    fn random_bits<R: Rng>(rng: &mut R, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("drm-dstm".parse::<Scheme>().unwrap(), Scheme::DrmDstm);
        assert_eq!("NDRM".parse::<Scheme>().unwrap(), Scheme::Ndrm);
        assert!("dsm".parse::<Scheme>().is_err());
        for s in [Scheme::Drm, Scheme::DrmDstm, Scheme::Ndrm] {
            assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
        }
    }

    #[test]
    fn first_block_equals_information_matrix() {
        let (cb, psk, _) = drm_set(2, 4);
        let mut st = FrameState::drm(2, 10);
        let (x, v) = encode_block_drm(&mut st, &BlockBits::new(vec![1], vec![0, 1, 1, 1]), &cb, &psk).unwrap();
        assert_eq!(x, v);
        assert_eq!(st.t(), 1);
    }

    #[test]
    fn worked_drm_block() {
        let (cb, psk, _) = drm_set(2, 2);
        let mut st = FrameState::drm(2, 10);
        let (x, _) = encode_block_drm(&mut st, &BlockBits::new(vec![1], vec![0, 1]), &cb, &psk).unwrap();
        assert!(x.approx_eq(&real(2, &[0., -1., 1., 0.]), 1e-12));
    }

    #[test]
    fn worked_dstm_block() {
        let cb = PermutationCodebook::build(2).unwrap();
        let g = code(CodeKind::Cyclic, 2, 2, &[1, 1]);
        let init = build_initializer(2, InitializerStyle::Hadamard).unwrap();
        let mut st = FrameState::dstm(init.normalized.clone(), 10);
        let (x, _) = encode_block_dstm(&mut st, &BlockBits::new(vec![1], vec![1]), &cb, &g).unwrap();
        assert!(x.approx_eq(&real(2, &[0., -1., -1., 0.]), 1e-12));

        let mut st = FrameState::dstm(init.normalized.clone(), 10);
        let (_, v) = encode_block_dstm(&mut st, &BlockBits::new(vec![0], vec![0]), &cb, &g).unwrap();
        assert!(v.approx_eq(&init.normalized, 1e-12));
    }

    #[test]
    fn encoder_rejects_bad_input() {
        let (cb, psk, _) = drm_set(2, 2);
        let mut st = FrameState::drm(2, 3);
        assert!(encode_block_drm(&mut st, &BlockBits::new(vec![1], vec![0]), &cb, &psk).is_err());
        let g = code(CodeKind::Cyclic, 2, 2, &[1, 1]);
        assert!(encode_block_dstm(&mut st, &BlockBits::new(vec![1], vec![0]), &cb, &g).is_err());
        let ok = BlockBits::new(vec![0], vec![0, 0]);
        encode_block_drm(&mut st, &ok, &cb, &psk).unwrap();
        encode_block_drm(&mut st, &ok, &cb, &psk).unwrap();
        assert!(encode_block_drm(&mut st, &ok, &cb, &psk).is_err());
    }

    #[test]
    fn drm_chain_stays_monomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (k, m) in [(2, 2), (3, 4), (4, 8)] {
            let (cb, psk, _) = drm_set(k, m);
            let mut st = FrameState::drm(k, 51);
            for _ in 0..50 {
                let bits = BlockBits::new(
                    random_bits(&mut rng, cb.r1()),
                    random_bits(&mut rng, k * psk.bits_per_symbol()),
                );
                let (_, v) = encode_block_drm(&mut st, &bits, &cb, &psk).unwrap();
                assert!(v.is_monomial_unit(1e-9));
            }
        }
    }

    #[test]
    fn dstm_chain_preserves_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for (kind, m, k, u) in [
            (CodeKind::Cyclic, 8, 2, vec![1, 3]),
            (CodeKind::Dicyclic, 8, 2, vec![1]),
            (CodeKind::Cyclic, 4, 4, vec![1, 1, 1, 1]),
        ] {
            let cb = PermutationCodebook::build(k).unwrap();
            let g = code(kind, m, k, &u);
            let init = build_initializer(k, InitializerStyle::default_for(k)).unwrap();
            let mut st = FrameState::dstm(init.normalized.clone(), 11);
            for _ in 0..10 {
                let bits = BlockBits::new(random_bits(&mut rng, cb.r1()), random_bits(&mut rng, g.payload_bits()));
                let (_, v) = encode_block_dstm(&mut st, &bits, &cb, &g).unwrap();
                assert!((v.frob_norm_sq() - k as f64).abs() < 1e-9);
                for j in 0..k {
                    let col: f64 = v.column(j).iter().map(|z| z.norm_sqr()).sum();
                    assert!((col - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn candidate_counts_and_structure() {
        let (_, _, cs) = drm_set(2, 2);
        assert_eq!(cs.len(), 8);
        assert_eq!(cs.r(), 3);
        let cb = PermutationCodebook::build(2).unwrap();
        let cs = CandidateSet::dstm(&cb, &code(CodeKind::Cyclic, 8, 2, &[1, 3])).unwrap();
        assert_eq!(cs.len(), 16);
        assert!(cs.is_monomial());
        let cs = CandidateSet::dstm(&cb, &code(CodeKind::Dicyclic, 8, 2, &[1])).unwrap();
        assert!(cs.is_monomial());

        for (k, m) in [(2, 2), (2, 4), (3, 2), (3, 4)] {
            let (cb, psk, cs) = drm_set(k, m);
            assert_eq!(cs.len(), (1 << cb.r1()) * m.pow(k as u32));
            for (i, x) in cs.matrices().iter().enumerate() {
                assert!(x.is_unitary(1e-9));
                for y in &cs.matrices()[..i] {
                    assert!(!x.approx_eq(y, 1e-9));
                }
                let bits = recover_bits(i, &cs);
                let z = cb.bits_to_permutation(&bits.perm_bits).unwrap();
                let s = psk.bits_to_diagonal(&bits.payload_bits, k).unwrap();
                assert!(z.matmul(&s).unwrap().approx_eq(x, 1e-12));
            }
        }
        assert!(recover_bits(0, &cs).concat().iter().all(|&b| b == 0));
    }

    #[test]
    fn candidate_cap() {
        let cb = PermutationCodebook::build(8).unwrap();
        let psk = PskConstellation::new(16).unwrap();
        assert!(matches!(CandidateSet::drm(&cb, &psk), Err(Error::SearchSpace(_))));
    }

    #[test]
    fn noiseless_detection_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (_, _, cs) = drm_set(2, 2);
        for _ in 0..100 {
            let y_prev = random_matrix(&mut rng, 3, 2);
            for (i, x) in cs.matrices().iter().enumerate() {
                let y_curr = y_prev.matmul(x).unwrap();
                assert_eq!(cdd_detect(&y_prev, &y_curr, &cs).unwrap(), i);
                assert_eq!(cdd_detect_frobenius(&y_prev, &y_curr, &cs).unwrap(), i);
                let h = y_prev.clone();
                assert_eq!(coherent_detect_ndrm(&y_curr, &h, &cs).unwrap(), i);
            }
        }
    }

    #[test]
    fn degenerate_inputs_pick_first_candidate() {
        let (_, _, cs) = drm_set(2, 4);
        let z = CMatrix::zeros(3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let y = random_matrix(&mut rng, 3, 2);
        assert_eq!(cdd_detect(&z, &y, &cs).unwrap(), 0);
        assert_eq!(cdd_detect_frobenius(&z, &y, &cs).unwrap(), 0);
        assert_eq!(coherent_detect_ndrm(&y, &z, &cs).unwrap(), 0);
    }

    #[test]
    fn detector_shape_errors() {
        let (_, _, cs) = drm_set(2, 2);
        assert!(cdd_detect(&CMatrix::zeros(3, 2), &CMatrix::zeros(2, 2), &cs).is_err());
        assert!(cdd_detect(&CMatrix::zeros(3, 3), &CMatrix::zeros(3, 3), &cs).is_err());
        assert!(coherent_detect_ndrm(&CMatrix::zeros(3, 2), &CMatrix::zeros(3, 3), &cs).is_err());
    }

    #[test]
    fn trace_and_frobenius_forms_agree_on_noisy_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let cb = PermutationCodebook::build(2).unwrap();
        let sets = [
            drm_set(2, 2).2,
            drm_set(3, 4).2,
            CandidateSet::dstm(&cb, &code(CodeKind::Dicyclic, 8, 2, &[1])).unwrap(),
        ];
        for cs in &sets {
            for _ in 0..500 {
                let y_prev = random_matrix(&mut rng, 3, cs.k());
                let y_curr = random_matrix(&mut rng, 3, cs.k());
                assert_eq!(
                    cdd_detect(&y_prev, &y_curr, cs).unwrap(),
                    cdd_detect_frobenius(&y_prev, &y_curr, cs).unwrap()
                );
            }
        }
    }

    #[test]
    fn coherent_detector_matches_matmul_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let (_, _, cs) = drm_set(2, 4);
        for _ in 0..500 {
            let h = random_matrix(&mut rng, 3, 2);
            let y = random_matrix(&mut rng, 3, 2);
            let oracle = argmin(
                &cs.matrices()
                    .iter()
                    .map(|x| (&y - &(&h * x)).frob_norm_sq())
                    .collect::<Vec<_>>(),
            );
            assert_eq!(coherent_detect_ndrm(&y, &h, &cs).unwrap(), oracle);
        }
    }

    #[test]
    fn dense_fallback_matches_monomial_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let (_, _, cs) = drm_set(3, 2);
        let mut dense = cs.clone();
        dense.supports = None;
        for _ in 0..200 {
            let a = random_matrix(&mut rng, 3, 3);
            let b = random_matrix(&mut rng, 3, 3);
            let fast = cdd_metrics(&a, &b, &cs).unwrap();
            let slow = cdd_metrics(&a, &b, &dense).unwrap();
            for (f, s) in fast.iter().zip(&slow) {
                assert!((f - s).abs() < 1e-9);
            }
            assert_eq!(
                coherent_detect_ndrm(&a, &b, &cs).unwrap(),
                coherent_detect_ndrm(&a, &b, &dense).unwrap()
            );
        }
    }

    #[test]
    fn dstm_round_trip_k3() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let cb = PermutationCodebook::build(3).unwrap();
        let g = code(CodeKind::Cyclic, 4, 3, &[1, 1, 1]);
        let cs = CandidateSet::dstm(&cb, &g).unwrap();
        let init = build_initializer(3, InitializerStyle::ScaledIdentity).unwrap();
        let h = random_matrix(&mut rng, 3, 3);
        let mut st = FrameState::dstm(init.normalized.clone(), 40);
        let mut y_prev = h.matmul(&init.normalized).unwrap();
        for _ in 0..39 {
            let bits = BlockBits::new(random_bits(&mut rng, cb.r1()), random_bits(&mut rng, g.payload_bits()));
            let (_, v) = encode_block_dstm(&mut st, &bits, &cb, &g).unwrap();
            let y = h.matmul(&v).unwrap();
            let idx = cdd_detect(&y_prev, &y, &cs).unwrap();
            assert_eq!(recover_bits(idx, &cs), bits);
            y_prev = y;
        }
    }

    #[test]
    fn differential_residual_is_noise_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let (cb, psk, _) = drm_set(2, 4);
        let h = random_matrix(&mut rng, 3, 2);
        let mut st = FrameState::drm(2, 5);
        let n_prev = random_matrix(&mut rng, 3, 2).scale_re(0.1);
        let y_prev = &(&h * st.v_prev()) + &n_prev;
        let (x, v) = encode_block_drm(&mut st, &BlockBits::new(vec![1], vec![1, 0, 0, 1]), &cb, &psk).unwrap();
        let n_curr = random_matrix(&mut rng, 3, 2).scale_re(0.1);
        let y_curr = &(&h * &v) + &n_curr;
        let lhs = &y_curr - &(&y_prev * &x);
        let rhs = &n_curr - &(&n_prev * &x);
        assert!(lhs.approx_eq(&rhs, 1e-12));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn cdd_is_scale_invariant(seed in any::<u64>(), alpha in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (_, _, cs) = drm_set(2, 4);
            let a = random_matrix(&mut rng, 3, 2);
            let b = random_matrix(&mut rng, 3, 2);
            prop_assert_eq!(
                cdd_detect(&a, &b, &cs).unwrap(),
                cdd_detect(&a.scale_re(alpha), &b.scale_re(alpha), &cs).unwrap()
            );
        }

        #[test]
        fn noiseless_drm_round_trip(seed in any::<u64>(), k in 2usize..=4, mexp in 1u32..=3) {
            let m = 1usize << mexp;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (cb, psk, cs) = drm_set(k, m);
            let h = random_matrix(&mut rng, 2, k);
            let mut st = FrameState::drm(k, 6);
            let mut y_prev = h.clone();
            for _ in 0..5 {
                let bits = BlockBits::new(random_bits(&mut rng, cb.r1()), random_bits(&mut rng, k * psk.bits_per_symbol()));
                let (_, v) = encode_block_drm(&mut st, &bits, &cb, &psk).unwrap();
                let y = h.matmul(&v).unwrap();
                prop_assert_eq!(recover_bits(cdd_detect(&y_prev, &y, &cs).unwrap(), &cs), bits);
                y_prev = y;
            }
        }
    }
}
