//! Monte Carlo engine: frame loop, SNR sweeps and error accounting.
//!
//! Every frame draws all of its randomness from a ChaCha8 stream keyed by
//! `(seed, frame_index)`, and frames are merged in index order, so results
//! do not depend on the number of worker threads.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::cmatrix::CMatrix;
use crate::group_codes::{build_initializer, CodeKind, GroupCode, GroupCodeSpec, InitializerStyle};
use crate::mapping::{PermutationCodebook, PskConstellation, MAX_SLOTS};
use crate::ris_channel::{complex_gaussian, draw_channel, PatternSource, ReflectingPatternSet};
use crate::transceiver::{
    cdd_detect, coherent_detect_ndrm, encode_block_drm, encode_block_dstm, recover_bits, CandidateSet, FrameState,
    Scheme,
};
use crate::{Error, Result};

/// Frames evaluated per parallel batch. Fixed so that the stopping point
/// does not depend on the worker count.
pub const BATCH_FRAMES: usize = 32;

pub const CSV_HEADER: &str = "scheme,K,M,code,u,ebn0_db,rho,info_bits,bit_errors,ber,frames,seed";

/// Meaning of the dB values of an SNR grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SnrAxis {
    /// Energy per information bit: `rho = 10^(dB/10) r / K`.
    #[default]
    EbN0,
    /// Per-slot SNR: `rho = 10^(dB/10)`.
    Rho,
}

impl SnrAxis {
    pub fn rho(self, db: f64, k: usize, r: usize) -> f64 {
        match self {
            SnrAxis::EbN0 => ebn0_to_rho(db, k, r),
            SnrAxis::Rho => 10f64.powf(db / 10.0),
        }
    }
}

impl std::fmt::Display for SnrAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SnrAxis::EbN0 => "ebn0",
            SnrAxis::Rho => "rho",
        })
    }
}

impl std::str::FromStr for SnrAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ebn0" => Ok(SnrAxis::EbN0),
            "rho" | "snr" => Ok(SnrAxis::Rho),
            _ => Err(Error::Parse(format!("SNR axis {s:?} is not ebn0|rho"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scheme: Scheme,
    pub k: usize,
    /// PSK order, or the group-code order for DRM-DSTM.
    pub m: usize,
    pub code: Option<GroupCodeSpec>,
    pub initializer: Option<InitializerStyle>,
    pub n: usize,
    pub nr: usize,
    /// Blocks per frame, including the reference block.
    pub blocks: usize,
    pub patterns: PatternSource,
    pub ebn0_db: Vec<f64>,
    pub snr_axis: SnrAxis,
    pub min_bit_errors: u64,
    pub max_info_bits: u64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Drm,
            k: 2,
            m: 2,
            code: None,
            initializer: None,
            n: 4,
            nr: 3,
            blocks: 100,
            patterns: PatternSource::Optimized,
            ebn0_db: (0..=5).map(|i| 2.0 * i as f64).collect(),
            snr_axis: SnrAxis::EbN0,
            min_bit_errors: 200,
            max_info_bits: 10_000_000,
            seed: 1,
            workers: default_workers(),
        }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.ebn0_db.is_empty() {
            return bad("SNR grid is empty".into());
        }
        if let Some(x) = self.ebn0_db.iter().find(|x| !x.is_finite()) {
            return bad(format!("SNR point {x} is not finite"));
        }
        if self.blocks < 2 {
            return bad(format!("T must be at least 2, got {}", self.blocks));
        }
        if self.min_bit_errors == 0 {
            return bad("min_bit_errors must be at least 1".into());
        }
        if self.max_info_bits == 0 {
            return bad("max_info_bits must be positive".into());
        }
        if self.workers == 0 {
            return bad("worker count must be positive".into());
        }
        if !(2..=MAX_SLOTS).contains(&self.k) {
            return bad(format!("K must lie in 2..={MAX_SLOTS}, got {}", self.k));
        }
        if self.m < 2 || !self.m.is_power_of_two() {
            return bad(format!("M must be a power of two of at least 2, got {}", self.m));
        }
        if self.nr == 0 || self.n == 0 {
            return bad("N and N_r must be positive".into());
        }
        match (self.scheme, &self.code) {
            (Scheme::DrmDstm, None) => return bad("drm-dstm needs a group code".into()),
            (Scheme::DrmDstm, Some(c)) if c.k() != self.k || c.m() != self.m => {
                return bad(format!("code {c} does not match K={} M={}", self.k, self.m))
            }
            (Scheme::Drm | Scheme::Ndrm, Some(_)) => return bad(format!("{} takes no group code", self.scheme)),
            _ => {}
        }
        if self.initializer.is_some() && self.scheme != Scheme::DrmDstm {
            return bad("initializer applies to drm-dstm only".into());
        }
        Ok(())
    }

    /// Every field that affects the simulated numbers, one `key=value` per
    /// line. The worker count is deliberately absent.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scheme={}", self.scheme);
        let _ = writeln!(s, "K={}", self.k);
        let _ = writeln!(s, "M={}", self.m);
        let _ = writeln!(s, "code={}", self.code_kind_label());
        let _ = writeln!(s, "u={}", self.u_label());
        let _ = writeln!(
            s,
            "initializer={}",
            self.initializer_style().map(|i| i.to_string()).unwrap_or_default()
        );
        let _ = writeln!(s, "N={}", self.n);
        let _ = writeln!(s, "Nr={}", self.nr);
        let _ = writeln!(s, "T={}", self.blocks);
        let _ = writeln!(s, "patterns={}", self.patterns);
        let grid: Vec<String> = self.ebn0_db.iter().map(|x| format!("{x}")).collect();
        let _ = writeln!(s, "ebn0={}", grid.join(","));
        let _ = writeln!(s, "snr_axis={}", self.snr_axis);
        let _ = writeln!(s, "min_bit_errors={}", self.min_bit_errors);
        let _ = writeln!(s, "max_info_bits={}", self.max_info_bits);
        let _ = writeln!(s, "seed={}", self.seed);
        s
    }

    /// Hex SHA-256 of [`canonical_text`](Self::canonical_text).
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_text().as_bytes()))
    }

    pub fn code_kind_label(&self) -> String {
        self.code
            .as_ref()
            .map(|c| c.kind().to_string())
            .unwrap_or_else(|| "none".into())
    }

    pub fn u_label(&self) -> String {
        self.code
            .as_ref()
            .map(|c| c.u().iter().map(|u| u.to_string()).collect::<Vec<_>>().join(" "))
            .unwrap_or_default()
    }

    fn initializer_style(&self) -> Option<InitializerStyle> {
        match self.scheme {
            Scheme::DrmDstm => Some(
                self.initializer
                    .unwrap_or_else(|| InitializerStyle::default_for(self.k)),
            ),
            _ => None,
        }
    }

    /// PSK order used when optimising reflecting patterns.
    pub fn pattern_alphabet(&self) -> usize {
        match &self.code {
            Some(c) if c.kind() == CodeKind::Dicyclic => (c.m() / 2).max(2),
            Some(c) => c.m(),
            None => self.m,
        }
    }
}

/// Everything a frame needs that does not depend on the frame.
#[derive(Debug, Clone)]
pub struct Link {
    pub scheme: Scheme,
    pub codebook: PermutationCodebook,
    pub psk: Option<PskConstellation>,
    pub code: Option<GroupCode>,
    pub reference: CMatrix,
    pub candidates: CandidateSet,
    pub patterns: ReflectingPatternSet,
    pub n: usize,
    pub nr: usize,
    pub blocks: usize,
    pub seed: u64,
}

impl Link {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let codebook = PermutationCodebook::build(cfg.k)?;
        let (psk, code, reference, candidates) = match cfg.scheme {
            Scheme::Drm | Scheme::Ndrm => {
                let psk = PskConstellation::new(cfg.m)?;
                let cs = CandidateSet::drm(&codebook, &psk)?;
                (Some(psk), None, CMatrix::identity(cfg.k), cs)
            }
            Scheme::DrmDstm => {
                let code = cfg.code.as_ref().expect("validated").build()?;
                let init = build_initializer(cfg.k, cfg.initializer_style().expect("coded scheme"))?;
                let cs = CandidateSet::dstm(&codebook, &code)?;
                (None, Some(code), init.normalized, cs)
            }
        };
        let patterns = cfg.patterns.resolve(cfg.n, cfg.k, cfg.pattern_alphabet())?;
        Ok(Self {
            scheme: cfg.scheme,
            codebook,
            psk,
            code,
            reference,
            candidates,
            patterns,
            n: cfg.n,
            nr: cfg.nr,
            blocks: cfg.blocks,
            seed: cfg.seed,
        })
    }

    /// Information bits per block.
    pub fn r(&self) -> usize {
        self.candidates.r()
    }

    fn frame_state(&self) -> FrameState {
        match self.scheme {
            Scheme::Drm => FrameState::drm(self.codebook.k(), self.blocks),
            Scheme::Ndrm => FrameState::ndrm(self.codebook.k(), self.blocks),
            Scheme::DrmDstm => FrameState::dstm(self.reference.clone(), self.blocks),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameOutcome {
    pub bit_errors: u64,
    pub info_bits: u64,
}

/// Random stream of frame `frame_index`.
pub fn frame_rng(seed: u64, frame_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame_index);
    rng
}

fn unit_noise<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let data = (0..rows * cols).map(|_| complex_gaussian(rng, 1.0)).collect();
    CMatrix::new(rows, cols, data).expect("finite samples")
}

/// Simulates one frame of `T` blocks at noise variance `sigma2`.
///
/// The random draws (channel, bits, unit-variance noise) are the same for
/// every `sigma2`, so SNR points of a sweep share their realizations.
pub fn run_frame(link: &Link, frame_index: u64, sigma2: f64) -> Result<FrameOutcome> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be >= 0, got {sigma2}"
        )));
    }
    let sigma = sigma2.sqrt();
    let mut rng = frame_rng(link.seed, frame_index);
    let channel = draw_channel(&mut rng, link.n, link.nr, link.patterns.selected())?;
    let h = &channel.h;
    let cs = &link.candidates;
    let k = cs.k();
    let receive = |v: &CMatrix, rng: &mut ChaCha8Rng| -> Result<CMatrix> {
        let clean = h.matmul(v)?;
        clean.try_add(&unit_noise(rng, link.nr, k).scale_re(sigma))
    };

    let mut state = link.frame_state();
    let mut y_prev = receive(&link.reference, &mut rng)?;
    let mut out = FrameOutcome::default();
    for _ in 1..link.blocks {
        let sent = recover_bits(rng.random_range(0..cs.len()), cs);
        let (_, v) = match link.scheme {
            Scheme::Drm | Scheme::Ndrm => encode_block_drm(
                &mut state,
                &sent,
                &link.codebook,
                link.psk.as_ref().expect("psk scheme"),
            )?,
            Scheme::DrmDstm => encode_block_dstm(
                &mut state,
                &sent,
                &link.codebook,
                link.code.as_ref().expect("coded scheme"),
            )?,
        };
        let y = receive(&v, &mut rng)?;
        let detected = match link.scheme {
            Scheme::Ndrm => coherent_detect_ndrm(&y, h, cs)?,
            _ => cdd_detect(&y_prev, &y, cs)?,
        };
        let got = recover_bits(detected, cs);
        out.bit_errors += sent
            .concat()
            .iter()
            .zip(got.concat())
            .filter(|(a, b)| **a != *b)
            .count() as u64;
        out.info_bits += cs.r() as u64;
        y_prev = y;
    }
    Ok(out)
}

/// `sigma^2 = 1 / rho` with `rho = 10^(dB/10) r / K`.
pub fn ebn0_to_sigma2(ebn0_db: f64, k: usize, r: usize) -> f64 {
    1.0 / ebn0_to_rho(ebn0_db, k, r)
}

pub fn ebn0_to_rho(ebn0_db: f64, k: usize, r: usize) -> f64 {
    10f64.powf(ebn0_db / 10.0) * r as f64 / k as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrPoint {
    pub ebn0_db: f64,
    pub rho: f64,
    pub sigma2: f64,
    pub info_bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub frames: u64,
    /// Sum over frames of the squared per-frame error count.
    pub frame_errors_sq: u128,
    pub elapsed_secs: f64,
}

impl SnrPoint {
    /// Standard error of `ber` estimated from the spread of per-frame error
    /// counts, which accounts for errors clustering within a fading frame.
    pub fn std_error(&self) -> f64 {
        if self.frames < 2 || self.info_bits == 0 {
            return 0.0;
        }
        let n = self.frames as f64;
        let mean = self.bit_errors as f64 / n;
        let var = ((self.frame_errors_sq as f64 / n) - mean * mean).max(0.0) * n / (n - 1.0);
        let bits_per_frame = self.info_bits as f64 / n;
        (var / n).sqrt() / bits_per_frame
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub points: Vec<SnrPoint>,
    pub config_hash: String,
    pub seed: u64,
}

/// Accumulates frames at one noise level until a stopping rule fires.
pub fn run_point(link: &Link, pool: &rayon::ThreadPool, cfg: &SimConfig, ebn0_db: f64) -> Result<SnrPoint> {
    let start = Instant::now();
    let rho = cfg.snr_axis.rho(ebn0_db, cfg.k, link.r());
    let sigma2 = 1.0 / rho;
    let mut acc = FrameOutcome::default();
    let mut frames = 0u64;
    let mut sq = 0u128;
    'outer: loop {
        let first = frames;
        let batch: Vec<FrameOutcome> = pool.install(|| {
            (first..first + BATCH_FRAMES as u64)
                .into_par_iter()
                .map(|f| run_frame(link, f, sigma2))
                .collect::<Result<_>>()
        })?;
        for o in batch {
            acc.bit_errors += o.bit_errors;
            acc.info_bits += o.info_bits;
            sq += (o.bit_errors as u128).pow(2);
            frames += 1;
            if acc.bit_errors >= cfg.min_bit_errors || acc.info_bits >= cfg.max_info_bits {
                break 'outer;
            }
        }
    }
    Ok(SnrPoint {
        ebn0_db,
        rho,
        sigma2,
        info_bits: acc.info_bits,
        bit_errors: acc.bit_errors,
        ber: acc.bit_errors as f64 / acc.info_bits as f64,
        frames,
        frame_errors_sq: sq,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

pub fn run_sweep(cfg: &SimConfig) -> Result<SimResult> {
    let link = Link::new(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let points = cfg
        .ebn0_db
        .iter()
        .map(|&db| run_point(&link, &pool, cfg, db))
        .collect::<Result<_>>()?;
    Ok(SimResult {
        points,
        config_hash: cfg.hash(),
        seed: cfg.seed,
    })
}

/// CSV rows (without header) for a finished sweep.
pub fn csv_rows(cfg: &SimConfig, result: &SimResult) -> String {
    let mut s = String::new();
    for p in &result.points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{:.5e},{},{}",
            cfg.scheme,
            cfg.k,
            cfg.m,
            cfg.code_kind_label(),
            cfg.u_label(),
            p.ebn0_db,
            p.rho,
            p.info_bits,
            p.bit_errors,
            p.ber,
            p.frames,
            result.seed
        );
    }
    s
}

pub fn to_csv(cfg: &SimConfig, result: &SimResult) -> String {
    format!("{CSV_HEADER}\n{}", csv_rows(cfg, result))
}
