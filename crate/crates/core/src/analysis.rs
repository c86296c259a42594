//! Rate, detection complexity and union-bound error estimates.

use rand::Rng;

use crate::cmatrix::{CMatrix, Complex};
use crate::group_codes::CodeKind;
use crate::mapping::{log2_exact, perm_bits};
use crate::ris_channel::{draw_channel, ChannelRealization, ReflectingPattern};
use crate::transceiver::CandidateSet;
use crate::{Error, Result};

/// Largest candidate set accepted by the quadratic union-bound loop.
pub const MAX_BOUND_CANDIDATES: usize = 1 << 12;

/// Bits per channel use: `(T-1)(floor(log2 K!) + K log2 M) / (T K)`.
pub fn transmission_rate(k: usize, m: usize, t: usize) -> f64 {
    if t == 0 || k == 0 {
        return 0.0;
    }
    let r = perm_bits(k) as f64 + k as f64 * (m as f64).log2();
    (t - 1) as f64 * r / (t * k) as f64
}

/// Rate of a group-coded scheme carrying `payload_bits` per block.
pub fn transmission_rate_coded(k: usize, payload_bits: usize, t: usize) -> f64 {
    if t == 0 || k == 0 {
        return 0.0;
    }
    (t - 1) as f64 * (perm_bits(k) + payload_bits) as f64 / (t * k) as f64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexityReport {
    pub scheme: &'static str,
    pub k: usize,
    pub m: usize,
    pub nr: usize,
    pub kind: Option<CodeKind>,
    /// Complex multiplications for one exhaustive detection.
    pub multiplications: u128,
    pub formula_name: &'static str,
    /// Count based on the actual group size, when it differs from
    /// `multiplications`.
    pub group_size_count: Option<u128>,
}

fn per_candidate(k: usize, nr: usize) -> u128 {
    let k = k as u128;
    k * k * nr as u128 + k * k * k
}

pub fn complexity_uncoded(k: usize, m: usize, nr: usize) -> ComplexityReport {
    let count = (1u128 << perm_bits(k)) * (m as u128).pow(k as u32);
    ComplexityReport {
        scheme: "drm",
        k,
        m,
        nr,
        kind: None,
        multiplications: count * per_candidate(k, nr),
        formula_name: "C_uc = 2^r1 * M^K * (K^2 Nr + K^3)",
        group_size_count: None,
    }
}

pub fn complexity_coded(k: usize, m: usize, nr: usize, kind: CodeKind) -> ComplexityReport {
    let perms = 1u128 << perm_bits(k);
    let m128 = m as u128;
    let (elements, formula_name) = match kind {
        CodeKind::Cyclic => (m128, "C_c = 2^r1 * M * (K^2 Nr + K^3)"),
        CodeKind::Dicyclic => (2 * m128, "C_c = 2^r1 * 2M * (K^2 Nr + K^3)"),
    };
    let multiplications = perms * elements * per_candidate(k, nr);
    let actual = perms * m128 * per_candidate(k, nr);
    ComplexityReport {
        scheme: "drm-dstm",
        k,
        m,
        nr,
        kind: Some(kind),
        multiplications,
        formula_name,
        group_size_count: (actual != multiplications).then_some(actual),
    }
}

/// Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `Q(sqrt(d^2 / (2 sigma2)))`.
pub fn pairwise_error_probability(d_ed: f64, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    if !(d_ed >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "distance must be nonnegative, got {d_ed}"
        )));
    }
    Ok(q_function((d_ed * d_ed / (2.0 * sigma2)).sqrt()))
}

/// `|| (h_d + H_2 Phi h_1) s - (h_d + H_2 Phi' h_1) s' ||`.
pub fn euclidean_distance_received(
    channel: &ChannelRealization,
    phi: &ReflectingPattern,
    s: Complex,
    phi_alt: &ReflectingPattern,
    s_alt: Complex,
) -> Result<f64> {
    let a = channel.column_for(phi)?.scale(s);
    let b = channel.column_for(phi_alt)?.scale(s_alt);
    Ok(a.try_sub(&b)?.frob_norm_sq().sqrt())
}

/// `|| H (X_a - X_b) ||_F^2`: the received block distance, i.e. the sum of
/// the per-slot distances.
pub fn block_distance_sq(h: &CMatrix, xa: &CMatrix, xb: &CMatrix) -> Result<f64> {
    Ok(h.matmul(&xa.try_sub(xb)?)?.frob_norm_sq())
}

/// Union bound in two normalisations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValue {
    /// `2^-r sum_a sum_{b != a} d_H(a, b) PEP(a -> b)`.
    pub paper_form: f64,
    /// `paper_form / r`, a bound on the bit error rate.
    pub per_bit: f64,
}

/// Union bound for one channel realization `h` (N_r x K).
pub fn union_bound_ber(h: &CMatrix, cs: &CandidateSet, sigma2: f64) -> Result<BoundValue> {
    if cs.len() > MAX_BOUND_CANDIDATES {
        return Err(Error::SearchSpace(format!(
            "{} candidates exceed the union-bound limit of {MAX_BOUND_CANDIDATES}",
            cs.len()
        )));
    }
    if h.cols() != cs.k() {
        return Err(Error::Dimension(format!(
            "channel has {} columns, K={}",
            h.cols(),
            cs.k()
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    let received: Vec<CMatrix> = cs.matrices().iter().map(|x| h.matmul(x)).collect::<Result<_>>()?;
    let mut total = 0.0;
    for a in 0..cs.len() {
        for b in a + 1..cs.len() {
            let hamming = (a ^ b).count_ones() as f64;
            let d2 = received[a].try_sub(&received[b])?.frob_norm_sq();
            total += 2.0 * hamming * q_function((d2 / (2.0 * sigma2)).sqrt());
        }
    }
    let paper_form = total / cs.len() as f64;
    let r = cs.r().max(1) as f64;
    Ok(BoundValue {
        paper_form,
        per_bit: paper_form / r,
    })
}

/// Union bound averaged over `draws` channel realizations.
pub fn union_bound_ber_averaged<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    nr: usize,
    patterns: &[ReflectingPattern],
    cs: &CandidateSet,
    sigma2: f64,
    draws: usize,
) -> Result<BoundValue> {
    if draws == 0 {
        return Err(Error::InvalidParameter("need at least one channel draw".into()));
    }
    let mut paper = 0.0;
    let mut per_bit = 0.0;
    for _ in 0..draws {
        let ch = draw_channel(rng, n, nr, patterns)?;
        let b = union_bound_ber(&ch.h, cs, sigma2)?;
        paper += b.paper_form;
        per_bit += b.per_bit;
    }
    Ok(BoundValue {
        paper_form: paper / draws as f64,
        per_bit: per_bit / draws as f64,
    })
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// High-SNR weighted PEP `d_H * C(2N_r-1, N_r-1) * (rho d_E)^-N_r`.
pub fn asymptotic_weighted_pep(hamming: usize, d_ed: f64, rho: f64, nr: usize) -> f64 {
    let nr64 = nr as u64;
    hamming as f64 * binomial(2 * nr64 - 1, nr64.saturating_sub(1)) * (rho * d_ed).powi(-(nr as i32))
}

/// Bits per block of a PSK-payload scheme, or `None` if `m` is not a power of two.
pub fn bits_per_block(k: usize, m: usize) -> Option<usize> {
    Some(perm_bits(k) + k * log2_exact(m)?)
}
