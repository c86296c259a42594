//! Unitary space-time group codes.
//!
//! A cyclic code `(M; u_1..u_K)` is generated by the diagonal matrix
//! `G0 = diag(e^{2 pi j u_k / M})` and has elements `G0^m`, `0 <= m < M`.
//! A dicyclic code `(M; u_1..u_{K/2})` uses `G0` built over the `(M/2)`-th
//! roots of unity with the second half of the exponents negated, plus the
//! block swap `G1 = [[0, -I], [I, 0]]`; its elements are `G0^m G1^l` for
//! `0 <= m < M/2`, `l in {0, 1}`. Both families have exactly `M` elements.
//!
//! Element order is canonical so that bit labels are reproducible:
//! cyclic index `m` maps to `G0^m`; dicyclic index `l * M/2 + m` maps to
//! `G0^m G1^l`.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::cmatrix::{CMatrix, Complex, DEFAULT_TOL};
use crate::mapping::log2_exact;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodeKind {
    Cyclic,
    Dicyclic,
}

impl fmt::Display for CodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodeKind::Cyclic => "cyclic",
            CodeKind::Dicyclic => "dicyclic",
        })
    }
}

impl FromStr for CodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cyclic" => Ok(CodeKind::Cyclic),
            "dicyclic" => Ok(CodeKind::Dicyclic),
            other => Err(Error::Parse(format!("unknown code kind {other:?}"))),
        }
    }
}

/// Generator parameters of a group code.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupCodeSpec {
    kind: CodeKind,
    m: usize,
    k: usize,
    u: Vec<usize>,
}

impl GroupCodeSpec {
    pub fn new(kind: CodeKind, m: usize, k: usize, u: Vec<usize>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if log2_exact(m).is_none() || m < 2 {
            return bad(format!("M must be a power of two >= 2, got {m}"));
        }
        if k == 0 {
            return bad("K must be positive".into());
        }
        let (len, bound) = match kind {
            CodeKind::Cyclic => (k, m),
            CodeKind::Dicyclic => {
                if !k.is_multiple_of(2) {
                    return bad(format!("dicyclic codes need even K, got {k}"));
                }
                if m < 4 {
                    return bad(format!("dicyclic codes need M >= 4, got {m}"));
                }
                (k / 2, m / 2)
            }
        };
        if u.len() != len {
            return bad(format!("{kind} code with K={k} needs {len} exponents, got {}", u.len()));
        }
        for &x in &u {
            if x % 2 == 0 || x == 0 || x >= bound {
                return bad(format!("exponent {x} must be odd and in (0, {bound})"));
            }
        }
        if u.windows(2).any(|w| w[0] > w[1]) {
            return bad("exponents must be non-decreasing".into());
        }
        Ok(Self { kind, m, k, u })
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn u(&self) -> &[usize] {
        &self.u
    }

    /// Number of code matrices `|G| = M`.
    pub fn size(&self) -> usize {
        self.m
    }

    pub fn build(&self) -> Result<GroupCode> {
        match self.kind {
            CodeKind::Cyclic => build_cyclic(self),
            CodeKind::Dicyclic => build_dicyclic(self),
        }
    }

    /// Exponents of the diagonal generator over its root-of-unity order.
    fn diagonal_exponents(&self) -> (Vec<usize>, usize) {
        match self.kind {
            CodeKind::Cyclic => (self.u.clone(), self.m),
            CodeKind::Dicyclic => {
                let order = self.m / 2;
                let mut e = self.u.clone();
                e.extend(self.u.iter().map(|&x| order - x));
                (e, order)
            }
        }
    }
}

impl fmt::Display for GroupCodeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let u: Vec<String> = self.u.iter().map(ToString::to_string).collect();
        write!(f, "({};{})", self.m, u.join(","))
    }
}

/// `diag(e^{2 pi j e_k p / order})` with exact integer phase reduction.
fn diagonal_power(exponents: &[usize], order: usize, p: usize) -> CMatrix {
    let diag: Vec<Complex> = exponents
        .iter()
        .map(|&e| root_of_unity((e * p) % order, order))
        .collect();
    CMatrix::from_diag(&diag)
}

fn root_of_unity(num: usize, order: usize) -> Complex {
    // exact values on the axes keep +-1, +-j free of rounding noise
    match (4 * num).checked_rem(order) {
        Some(0) => match 4 * num / order {
            0 => Complex::new(1.0, 0.0),
            1 => Complex::new(0.0, 1.0),
            2 => Complex::new(-1.0, 0.0),
            _ => Complex::new(0.0, -1.0),
        },
        _ => Complex::from_polar(1.0, TAU * num as f64 / order as f64),
    }
}

/// `[[0, -I], [I, 0]]` of size K.
pub fn block_swap(k: usize) -> CMatrix {
    let h = k / 2;
    let mut g = CMatrix::zeros(k, k);
    for i in 0..h {
        g[(i, h + i)] = Complex::new(-1.0, 0.0);
        g[(h + i, i)] = Complex::new(1.0, 0.0);
    }
    g
}

/// Finite set of K x K unitary matrices closed under multiplication.
#[derive(Debug, Clone)]
pub struct GroupCode {
    spec: GroupCodeSpec,
    elements: Vec<CMatrix>,
    max_element_order: usize,
    lookup: HashMap<Vec<(i64, i64)>, usize>,
}

fn quantize(m: &CMatrix) -> Vec<(i64, i64)> {
    m.data()
        .iter()
        .map(|z| ((z.re * 1e6).round() as i64, (z.im * 1e6).round() as i64))
        .collect()
}

impl GroupCode {
    /// Wraps an explicit element list. Used for verification of arbitrary
    /// sets, including ones that are not groups.
    pub fn from_elements(spec: GroupCodeSpec, elements: Vec<CMatrix>) -> Self {
        let lookup = elements.iter().enumerate().map(|(i, e)| (quantize(e), i)).collect();
        let mut code = Self {
            spec,
            elements,
            max_element_order: 0,
            lookup,
        };
        code.max_element_order = code
            .elements
            .iter()
            .map(|e| element_order(e, 2 * code.elements.len().max(1)).unwrap_or(0))
            .max()
            .unwrap_or(0);
        code
    }

    pub fn spec(&self) -> &GroupCodeSpec {
        &self.spec
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn max_element_order(&self) -> usize {
        self.max_element_order
    }

    /// `log2 |G|`.
    pub fn payload_bits(&self) -> usize {
        log2_exact(self.elements.len()).expect("group size is a power of two")
    }

    /// Index of the element equal to `g` within 1e-9, if any.
    pub fn index_of(&self, g: &CMatrix) -> Option<usize> {
        if let Some(&i) = self.lookup.get(&quantize(g)) {
            if self.elements[i].approx_eq(g, DEFAULT_TOL) {
                return Some(i);
            }
        }
        self.elements.iter().position(|e| e.approx_eq(g, DEFAULT_TOL))
    }
}

/// Smallest `n <= cap` with `a^n = I`.
pub fn element_order(a: &CMatrix, cap: usize) -> Option<usize> {
    let id = CMatrix::identity(a.rows());
    let mut p = a.clone();
    for n in 1..=cap {
        if p.approx_eq(&id, DEFAULT_TOL) {
            return Some(n);
        }
        p = &p * a;
    }
    None
}

pub fn build_cyclic(spec: &GroupCodeSpec) -> Result<GroupCode> {
    if spec.kind != CodeKind::Cyclic {
        return Err(Error::InvalidParameter(format!("{spec} is not a cyclic spec")));
    }
    let (exps, order) = spec.diagonal_exponents();
    let elements = (0..spec.m).map(|p| diagonal_power(&exps, order, p)).collect();
    Ok(GroupCode::from_elements(spec.clone(), elements))
}

pub fn build_dicyclic(spec: &GroupCodeSpec) -> Result<GroupCode> {
    if spec.kind != CodeKind::Dicyclic {
        return Err(Error::InvalidParameter(format!("{spec} is not a dicyclic spec")));
    }
    let (exps, order) = spec.diagonal_exponents();
    let g1 = block_swap(spec.k);
    let half = spec.m / 2;
    let mut elements = Vec::with_capacity(spec.m);
    for l in 0..2 {
        for p in 0..half {
            let d = diagonal_power(&exps, order, p);
            elements.push(if l == 0 { d } else { &d * &g1 });
        }
    }
    Ok(GroupCode::from_elements(spec.clone(), elements))
}

/// Generators `(G0, Some(G1))` of a spec; `G1` only for dicyclic codes.
pub fn generators(spec: &GroupCodeSpec) -> (CMatrix, Option<CMatrix>) {
    let (exps, order) = spec.diagonal_exponents();
    let g0 = diagonal_power(&exps, order, 1);
    let g1 = (spec.kind == CodeKind::Dicyclic).then(|| block_swap(spec.k));
    (g0, g1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitializerStyle {
    Hadamard,
    ScaledIdentity,
}

impl InitializerStyle {
    /// Hadamard for K in {2, 4}, scaled identity otherwise.
    pub fn default_for(k: usize) -> Self {
        if matches!(k, 2 | 4) {
            InitializerStyle::Hadamard
        } else {
            InitializerStyle::ScaledIdentity
        }
    }
}

impl FromStr for InitializerStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hadamard" => Ok(InitializerStyle::Hadamard),
            "identity" | "scaled-identity" | "scaled_identity" => Ok(InitializerStyle::ScaledIdentity),
            other => Err(Error::Parse(format!("unknown initializer {other:?}"))),
        }
    }
}

impl fmt::Display for InitializerStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitializerStyle::Hadamard => "hadamard",
            InitializerStyle::ScaledIdentity => "scaled-identity",
        })
    }
}

/// Initial transmit matrix `D` with `D D^H = K I`, and `D / sqrt(K)`.
#[derive(Debug, Clone)]
pub struct Initializer {
    pub style: InitializerStyle,
    pub d: CMatrix,
    pub normalized: CMatrix,
}

const HADAMARD_2: [f64; 4] = [1., -1., 1., 1.];
const HADAMARD_4: [f64; 16] = [
    1., -1., -1., 1., //
    1., 1., -1., -1., //
    1., -1., 1., -1., //
    1., 1., 1., 1.,
];

pub fn build_initializer(k: usize, style: InitializerStyle) -> Result<Initializer> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be positive".into()));
    }
    let d = match style {
        InitializerStyle::Hadamard => match k {
            2 => CMatrix::from_real(2, 2, &HADAMARD_2)?,
            4 => CMatrix::from_real(4, 4, &HADAMARD_4)?,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "Hadamard initializer only for K in {{2, 4}}, got {k}"
                )))
            }
        },
        InitializerStyle::ScaledIdentity => CMatrix::identity(k).scale_re((k as f64).sqrt()),
    };
    let normalized = d.scale_re(1.0 / (k as f64).sqrt());
    Ok(Initializer { style, d, normalized })
}

fn spec(kind: CodeKind, m: usize, k: usize, u: &[usize]) -> GroupCodeSpec {
    GroupCodeSpec::new(kind, m, k, u.to_vec()).expect("built-in table entry is valid")
}

/// Every published code for K = 2, 3, 4.
pub fn builtin_code_tables() -> Vec<GroupCodeSpec> {
    use CodeKind::{Cyclic as C, Dicyclic as D};
    let rows: &[(CodeKind, usize, usize, &[usize])] = &[
        (C, 2, 2, &[1, 1]),
        (C, 4, 2, &[1, 1]),
        (C, 8, 2, &[1, 3]),
        (C, 16, 2, &[1, 7]),
        (C, 32, 2, &[1, 7]),
        (C, 64, 2, &[1, 19]),
        (C, 128, 2, &[1, 47]),
        (C, 256, 2, &[1, 75]),
        (D, 4, 2, &[1]),
        (D, 8, 2, &[1]),
        (D, 16, 2, &[1]),
        (D, 32, 2, &[1]),
        (D, 64, 2, &[1]),
        (D, 128, 2, &[1]),
        (C, 2, 3, &[1, 1, 1]),
        (C, 4, 3, &[1, 1, 1]),
        (C, 8, 3, &[1, 1, 3]),
        (C, 16, 3, &[1, 3, 5]),
        (C, 32, 3, &[1, 7, 9]),
        (C, 64, 3, &[1, 17, 19]),
        (C, 2, 4, &[1, 1, 1, 1]),
        (C, 4, 4, &[1, 1, 1, 1]),
        (C, 8, 4, &[1, 1, 3, 3]),
        (C, 16, 4, &[1, 3, 5, 7]),
        (C, 32, 4, &[1, 7, 9, 15]),
        (C, 64, 4, &[1, 11, 17, 19]),
        (C, 128, 4, &[1, 29, 37, 39]),
        (D, 4, 4, &[1, 1]),
        (D, 8, 4, &[1, 1]),
        (D, 16, 4, &[1, 3]),
        (D, 32, 4, &[1, 7]),
        (D, 64, 4, &[1, 7]),
        (D, 128, 4, &[1, 19]),
    ];
    rows.iter().map(|&(kind, m, k, u)| spec(kind, m, k, u)).collect()
}

/// Table entry for `(kind, M, K)`, if one is published.
pub fn builtin_spec(kind: CodeKind, m: usize, k: usize) -> Option<GroupCodeSpec> {
    builtin_code_tables()
        .into_iter()
        .find(|s| s.kind == kind && s.m == m && s.k == k)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupReport {
    pub unitary: bool,
    pub closed: bool,
    pub size_ok: bool,
    pub distinct: bool,
    pub identity_first: bool,
    pub max_order: usize,
}

impl GroupReport {
    /// Order expected from the family: `M` for cyclic, `M/2` for dicyclic.
    pub fn expected_order(spec: &GroupCodeSpec) -> usize {
        match spec.kind {
            CodeKind::Cyclic => spec.m,
            CodeKind::Dicyclic => spec.m / 2,
        }
    }

    pub fn all_ok(&self) -> bool {
        self.unitary && self.closed && self.size_ok && self.distinct && self.identity_first
    }
}

pub fn verify_group(code: &GroupCode) -> GroupReport {
    let els = code.elements();
    let k = code.spec.k;
    let unitary = els.iter().all(|e| e.shape() == (k, k) && e.is_unitary(DEFAULT_TOL));
    let distinct = els.iter().enumerate().all(|(i, e)| code.index_of(e) == Some(i));
    let closed = unitary
        && els
            .iter()
            .all(|a| els.iter().all(|b| code.index_of(&(a * b)).is_some()));
    GroupReport {
        unitary,
        closed,
        size_ok: els.len() == code.spec.m,
        distinct,
        identity_first: els
            .first()
            .is_some_and(|e| e.approx_eq(&CMatrix::identity(k), DEFAULT_TOL)),
        max_order: code.max_element_order(),
    }
}

/// Minimum over distinct element pairs of `||A - B||_F^2`, evaluated through
/// the group identity `||A - B|| = ||I - A^H B||`.
pub fn min_pairwise_distance_sq(code: &GroupCode) -> f64 {
    let id = CMatrix::identity(code.spec.k);
    code.elements()
        .iter()
        .skip(1)
        .map(|g| (&id - g).frob_norm_sq())
        .fold(f64::INFINITY, f64::min)
}

const SEARCH_BUDGET: u128 = 50_000_000;

/// Exhaustive search over exponent vectors with `u_1 = 1` for the code that
/// maximises the minimum pairwise distance. Ties go to the lexicographically
/// smallest `u`.
pub fn search_best_u(kind: CodeKind, m: usize, k: usize) -> Result<(GroupCodeSpec, f64)> {
    // validates M/K through a known-good exponent vector
    let len = match kind {
        CodeKind::Cyclic => k,
        CodeKind::Dicyclic => k / 2,
    };
    GroupCodeSpec::new(kind, m, k, vec![1; len])?;
    let bound = match kind {
        CodeKind::Cyclic => m,
        CodeKind::Dicyclic => m / 2,
    };
    let odd: Vec<usize> = (1..bound).step_by(2).collect();
    // non-decreasing tuples of length len-1 from odd: C(n + r - 1, r)
    let r = len - 1;
    let n = odd.len() as u128;
    let count = (0..r as u128).fold(1u128, |acc, i| acc * (n + i) / (i + 1));
    if count.saturating_mul(m as u128 * (k * k) as u128) > SEARCH_BUDGET {
        return Err(Error::SearchSpace(format!(
            "{count} candidates x M={m} exceeds the search budget"
        )));
    }
    let mut best: Option<(GroupCodeSpec, f64)> = None;
    let mut tail = vec![0usize; r];
    loop {
        let mut u = vec![1];
        u.extend(tail.iter().map(|&i| odd[i]));
        let spec = GroupCodeSpec::new(kind, m, k, u)?;
        let d = min_pairwise_distance_sq(&spec.build()?);
        if best.as_ref().is_none_or(|(_, bd)| d > *bd + 1e-12) {
            best = Some((spec, d));
        }
        // next non-decreasing tuple (lexicographic)
        let Some(pos) = (0..r).rev().find(|&i| tail[i] + 1 < odd.len()) else {
            break;
        };
        let v = tail[pos] + 1;
        for t in &mut tail[pos..] {
            *t = v;
        }
    }
    Ok(best.expect("at least one candidate"))
}
