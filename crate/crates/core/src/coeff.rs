//! Function and distribution modules on `Z_p^d`.
//!
//! An [`LAFunction`] of level `m` is a family of Tate series, one per residue
//! class `a mod p^m`, with `f(a + p^m y) = f_a(y)`. An [`LIFunction`] of level
//! `m + 1` stores bounded series with `f(b + p^(m+1) y) = g_b(p y)`; it is kept
//! modulo `Fil^K = n^K` where `n = (p, T_1, .., T_d)`, so the piece degree is
//! `K - 1` and the coefficient of a degree-`j` monomial matters mod `p^(K-j)`.
//!
//! Group actions are wired as Moebius substitutions on the unipotent
//! coordinates of a product of `GL_2` blocks in Iwahori form, twisted by a
//! character with two components per block. Distributions are moment tables
//! whose `j`-th moment is known mod `p^(N-j)`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::padic::{self, PadicError, PadicNum, PadicRing};
use crate::series::{embed_variable, GrowthProfile, SeriesError, SeriesRecord, TruncatedSeries};
use crate::weights::{CharValue, Character, ExampleTag, Exponent, WeightDisc, WeightError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoeffError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("residue class {0:?} is not reduced mod p^level")]
    BadClass(Vec<u64>),
    #[error("group element outside the wired monoid: {0}")]
    NotInMonoid(String),
    #[error("torus element is not strictly contracting")]
    NotContracting,
    #[error("level {0} is too low for this operation")]
    LevelTooLow(u32),
    #[error("degree {k} exceeds the moment cutoff {cutoff}")]
    CutoffExceeded { k: u32, cutoff: u32 },
    #[error("cutoff {cutoff} must be below the precision {precision}")]
    CutoffTooLarge { cutoff: u32, precision: u32 },
    #[error("function level {function} exceeds distribution level {distribution}")]
    LevelMismatch { function: u32, distribution: u32 },
    #[error("family is not analytic at this level: {0}")]
    NotAnalytic(String),
    #[error("weight mismatch: {0}")]
    WeightMismatch(String),
    #[error("family exponents are only wired for upper-triangular elements")]
    FamilyAction,
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Weight(#[from] WeightError),
}

fn ipow(p: u64, e: u32) -> u64 {
    p.pow(e)
}

/// All residue classes of `(Z/p^level)^dim` in lexicographic order.
pub fn residue_classes(p: u64, level: u32, dim: usize) -> Vec<Vec<u64>> {
    let q = ipow(p, level);
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..q).map(move |a| {
                    let mut w = v.clone();
                    w.push(a);
                    w
                })
            })
            .collect();
    }
    out
}

fn class_of(x: &[PadicNum], level: u32) -> Result<Vec<u64>, CoeffError> {
    x.iter()
        .map(|xi| {
            if xi.precision() < level {
                return Err(CoeffError::Padic(PadicError::InexactDivision {
                    k: level,
                    v: "point precision below level".into(),
                }));
            }
            Ok(xi.residue() % ipow(xi.p(), level))
        })
        .collect()
}

fn local_coords(x: &[PadicNum], class: &[u64], scale: u32) -> Result<Vec<PadicNum>, CoeffError> {
    x.iter()
        .zip(class)
        .map(|(xi, a)| Ok((*xi - xi.ring().elem(*a as i128)).div_p_power(scale)?))
        .collect()
}

fn univariate_at(ring: PadicRing, coeffs: &[PadicNum], degree: u32, profile: GrowthProfile) -> TruncatedSeries {
    let mut s = TruncatedSeries::zero(ring, 1, degree, profile);
    for (k, c) in coeffs.iter().enumerate().take(degree as usize + 1) {
        s.set(&[k as u32], *c);
    }
    s
}

/// Copy of `s` with a larger degree bound (an exact polynomial stays exact).
fn raise_degree(s: &TruncatedSeries, degree: u32) -> TruncatedSeries {
    let mut out = TruncatedSeries::zero(s.ring(), s.nvars(), degree.max(s.degree()), s.profile());
    for (e, c) in s.terms() {
        out.set(e, c);
    }
    out
}

/// `f(S_1(y_1), .., S_d(y_d))` for one-variable substitutions given by
/// coefficient lists, as an exact polynomial composition truncated at `degree`.
fn substitute(
    f: &TruncatedSeries,
    subs: &[Vec<PadicNum>],
    degree: u32,
    profile: GrowthProfile,
) -> Result<TruncatedSeries, CoeffError> {
    let n = f.nvars();
    if subs.len() != n {
        return Err(CoeffError::Dimension(format!("{} substitutions for {} variables", subs.len(), n)));
    }
    let ring = f.ring();
    let one = TruncatedSeries::one(ring, n, degree, profile);
    let mut cache: Vec<Vec<TruncatedSeries>> = Vec::with_capacity(n);
    for (i, s) in subs.iter().enumerate() {
        let uni = univariate_at(ring, s, degree, profile);
        cache.push(vec![one.clone(), embed_variable(&uni, n, i)?]);
    }
    let mut out = TruncatedSeries::zero(ring, n, degree, profile);
    for (e, c) in f.terms() {
        let mut term = TruncatedSeries::constant(c, n, degree, profile);
        for (i, k) in e.iter().enumerate() {
            let k = *k as usize;
            while cache[i].len() <= k {
                let next = cache[i].last().expect("nonempty").mul(&cache[i][1])?;
                cache[i].push(next);
            }
            if k > 0 {
                term = term.mul(&cache[i][k])?;
            }
        }
        out = out.add(&term)?;
    }
    Ok(out)
}

/// Coefficients of `(1 + w Y)^e` up to `degree`, for `v(w) >= 1`.
///
/// Correct to the common precision of `w` and `e`; the divisions by `k` run
/// with `v_p(degree!)` guard digits.
pub(crate) fn one_plus_pow(w: &PadicNum, e: &PadicNum, degree: u32) -> Result<Vec<PadicNum>, CoeffError> {
    let p = w.p();
    let n = w.precision().min(e.precision());
    let guard = padic::vp_factorial(p, degree as u64);
    let work = (n + guard).min(padic::max_precision(p));
    let wl = w.reduce(n).lift(work)?;
    let el = e.reduce(n).lift(work)?;
    let ring = wl.ring();
    let mut c = ring.one();
    let mut out = vec![c.reduce(n)];
    for k in 1..=degree {
        c = (c * (el - ring.elem(k as i128 - 1)) * wl).div_int(k as i128)?;
        out.push(c.reduce(n));
    }
    Ok(out)
}

/// Locally analytic function of level `m` on `Z_p^d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LAFunction {
    ring: PadicRing,
    dim: usize,
    level: u32,
    pieces: BTreeMap<Vec<u64>, TruncatedSeries>,
}

impl LAFunction {
    /// Build from per-class Tate series; absent classes carry the zero function.
    pub fn from_pieces(
        ring: PadicRing,
        dim: usize,
        level: u32,
        pieces: BTreeMap<Vec<u64>, TruncatedSeries>,
    ) -> Result<Self, CoeffError> {
        let q = ipow(ring.p(), level);
        let mut ring = ring;
        for (a, s) in &pieces {
            if a.len() != dim || a.iter().any(|x| *x >= q) {
                return Err(CoeffError::BadClass(a.clone()));
            }
            if s.nvars() != dim {
                return Err(CoeffError::Dimension(format!("piece has {} variables, expected {dim}", s.nvars())));
            }
            if s.precision() < ring.precision() {
                ring = s.ring();
            }
        }
        let pieces = pieces
            .into_iter()
            .map(|(a, s)| (a, s.reduced(ring.precision()).with_profile(GrowthProfile::Tate)))
            .collect();
        Ok(LAFunction {
            ring,
            dim,
            level,
            pieces,
        })
    }

    /// The polynomial `poly(x)` (treated as exact) restricted to level-`m` classes.
    pub fn from_global(poly: &TruncatedSeries, level: u32) -> Result<Self, CoeffError> {
        let ring = poly.ring();
        let dim = poly.nvars();
        let pm = ring.elem(ipow(ring.p(), level) as i128);
        let mut pieces = BTreeMap::new();
        for a in residue_classes(ring.p(), level, dim) {
            let subs: Vec<Vec<PadicNum>> = a.iter().map(|ai| vec![ring.elem(*ai as i128), pm]).collect();
            let s = substitute(poly, &subs, poly.degree(), GrowthProfile::Tate)?;
            if !s.is_zero() {
                pieces.insert(a, s);
            }
        }
        Self::from_pieces(ring, dim, level, pieces)
    }

    pub fn constant(c: PadicNum, dim: usize, level: u32) -> Result<Self, CoeffError> {
        Self::from_global(&TruncatedSeries::constant(c, dim, 0, GrowthProfile::Tate), level)
    }

    /// The monomial `x_1^e_1 .. x_d^e_d` at level `m`.
    pub fn monomial(ring: PadicRing, e: &[u32], level: u32) -> Result<Self, CoeffError> {
        let deg = e.iter().sum();
        let mut s = TruncatedSeries::zero(ring, e.len(), deg, GrowthProfile::Tate);
        s.set(e, ring.one());
        Self::from_global(&s, level)
    }

    pub fn ring(&self) -> PadicRing {
        self.ring
    }

    pub fn p(&self) -> u64 {
        self.ring.p()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn precision(&self) -> u32 {
        self.ring.precision()
    }

    /// Largest piece degree.
    pub fn degree(&self) -> u32 {
        self.pieces.values().map(|s| s.degree()).max().unwrap_or(0)
    }

    pub fn pieces(&self) -> &BTreeMap<Vec<u64>, TruncatedSeries> {
        &self.pieces
    }

    pub fn piece(&self, class: &[u64]) -> Option<&TruncatedSeries> {
        self.pieces.get(class)
    }

    pub fn eval(&self, x: &[PadicNum]) -> Result<PadicNum, CoeffError> {
        if x.len() != self.dim {
            return Err(CoeffError::Dimension(format!("point has {} coordinates", x.len())));
        }
        let a = class_of(x, self.level)?;
        let y = local_coords(x, &a, self.level)?;
        match self.pieces.get(&a) {
            Some(s) => Ok(s.eval(&y)?),
            None => Ok(self.ring.zero()),
        }
    }

    pub fn add(&self, other: &LAFunction) -> Result<LAFunction, CoeffError> {
        self.check_compatible(other)?;
        let mut pieces = self.pieces.clone();
        for (a, s) in &other.pieces {
            let sum = match pieces.get(a) {
                Some(t) => {
                    let d = t.degree().max(s.degree());
                    raise_degree(t, d).add(&raise_degree(s, d))?
                }
                None => s.clone(),
            };
            pieces.insert(a.clone(), sum);
        }
        Self::from_pieces(self.ring.with_precision(self.precision().min(other.precision()))?, self.dim, self.level, pieces)
    }

    pub fn scale(&self, c: PadicNum) -> LAFunction {
        let pieces: BTreeMap<_, _> = self.pieces.iter().map(|(a, s)| (a.clone(), s.scale(c))).collect();
        let prec = pieces.values().map(|s: &TruncatedSeries| s.precision()).fold(self.precision().min(c.precision()), u32::min);
        LAFunction {
            ring: self.ring.with_precision(prec).expect("smaller precision"),
            dim: self.dim,
            level: self.level,
            pieces: pieces.into_iter().map(|(a, s)| (a, s.reduced(prec))).collect(),
        }
    }

    /// The same function viewed at level `m + 1`.
    pub fn refine(&self) -> Result<LAFunction, CoeffError> {
        let p = self.p();
        let pm = ipow(p, self.level);
        let mut pieces = BTreeMap::new();
        for b in residue_classes(p, self.level + 1, self.dim) {
            let a: Vec<u64> = b.iter().map(|x| x % pm).collect();
            let Some(s) = self.pieces.get(&a) else { continue };
            let subs: Vec<Vec<PadicNum>> = b
                .iter()
                .zip(&a)
                .map(|(bi, ai)| vec![self.ring.elem(((bi - ai) / pm) as i128), self.ring.elem(p as i128)])
                .collect();
            pieces.insert(b, substitute(s, &subs, s.degree(), GrowthProfile::Tate)?);
        }
        Self::from_pieces(self.ring, self.dim, self.level + 1, pieces)
    }

    fn check_compatible(&self, other: &LAFunction) -> Result<(), CoeffError> {
        if self.dim != other.dim || self.level != other.level || self.p() != other.p() {
            return Err(CoeffError::Dimension("functions live on different spaces".into()));
        }
        Ok(())
    }

    pub fn to_record(&self) -> FunctionRecord {
        FunctionRecord {
            kind: "la".into(),
            p: self.p(),
            precision: self.precision(),
            dim: self.dim,
            level: self.level,
            fil: None,
            pieces: self
                .pieces
                .iter()
                .map(|(a, s)| PieceRecord {
                    class: a.clone(),
                    series: s.to_record(),
                })
                .collect(),
        }
    }
}

/// Degree in the `n`-adic filtration; `Infinite` is the sentinel for zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FilDegree {
    Finite(u32),
    Infinite,
}

impl FilDegree {
    pub fn at_least(self, n: u32) -> bool {
        match self {
            FilDegree::Finite(k) => k >= n,
            FilDegree::Infinite => true,
        }
    }
}

/// Locally Iwasawa function of level `m + 1`, stored modulo `Fil^K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LIFunction {
    ring: PadicRing,
    dim: usize,
    level: u32,
    fil: u32,
    pieces: BTreeMap<Vec<u64>, TruncatedSeries>,
}

impl LIFunction {
    /// Build from per-class bounded series, reduced modulo `Fil^fil`.
    pub fn from_pieces(
        ring: PadicRing,
        dim: usize,
        level: u32,
        fil: u32,
        pieces: BTreeMap<Vec<u64>, TruncatedSeries>,
    ) -> Result<Self, CoeffError> {
        if level == 0 {
            return Err(CoeffError::LevelTooLow(0));
        }
        let q = ipow(ring.p(), level);
        let mut prec = ring.precision();
        for (a, s) in &pieces {
            if a.len() != dim || a.iter().any(|x| *x >= q) {
                return Err(CoeffError::BadClass(a.clone()));
            }
            if s.nvars() != dim {
                return Err(CoeffError::Dimension(format!("piece has {} variables, expected {dim}", s.nvars())));
            }
            prec = prec.min(s.precision());
        }
        // Coefficients of degree j only matter mod p^(K - j), so K <= precision.
        let fil = fil.min(prec).max(1);
        let ring = ring.with_precision(prec)?;
        let mut out = BTreeMap::new();
        for (a, s) in pieces {
            let mut t = TruncatedSeries::zero(ring, dim, fil - 1, GrowthProfile::Bounded);
            for (e, c) in s.terms() {
                let deg: u32 = e.iter().sum();
                if deg < fil && c.valuation().lower_bound() + deg < fil {
                    t.set(e, c.reduce(fil - deg).lift(prec)?);
                }
            }
            if !t.is_zero() {
                out.insert(a, t);
            }
        }
        Ok(LIFunction {
            ring,
            dim,
            level,
            fil,
            pieces: out,
        })
    }

    /// The polynomial `poly(x)` as an element of `LI_level / Fil^fil`.
    pub fn from_global(poly: &TruncatedSeries, level: u32, fil: u32) -> Result<Self, CoeffError> {
        if level == 0 {
            return Err(CoeffError::LevelTooLow(0));
        }
        let ring = poly.ring();
        let dim = poly.nvars();
        let scale = ring.elem(ipow(ring.p(), level - 1) as i128);
        let mut pieces = BTreeMap::new();
        for b in residue_classes(ring.p(), level, dim) {
            let subs: Vec<Vec<PadicNum>> = b.iter().map(|bi| vec![ring.elem(*bi as i128), scale]).collect();
            pieces.insert(b, substitute(poly, &subs, fil.saturating_sub(1), GrowthProfile::Bounded)?);
        }
        Self::from_pieces(ring, dim, level, fil, pieces)
    }

    /// Random element of `Fil^min_fil / Fil^fil`.
    pub fn random<R: Rng>(
        rng: &mut R,
        ring: PadicRing,
        dim: usize,
        level: u32,
        fil: u32,
        min_fil: u32,
    ) -> Result<Self, CoeffError> {
        let p = ring.p();
        let mut pieces = BTreeMap::new();
        for b in residue_classes(p, level, dim) {
            let mut s = TruncatedSeries::zero(ring, dim, fil.saturating_sub(1), GrowthProfile::Bounded);
            for e in monomials(dim, fil.saturating_sub(1)) {
                let deg: u32 = e.iter().sum();
                let v = min_fil.saturating_sub(deg);
                if v >= ring.precision() {
                    continue;
                }
                let r: u64 = rng.gen_range(0..ring.modulus());
                s.set(&e, ring.elem(r as i128).mul_p_power(v));
            }
            pieces.insert(b, s);
        }
        Self::from_pieces(ring, dim, level, fil, pieces)
    }

    pub fn ring(&self) -> PadicRing {
        self.ring
    }

    pub fn p(&self) -> u64 {
        self.ring.p()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// The `K` with the function known modulo `Fil^K`.
    pub fn fil_precision(&self) -> u32 {
        self.fil
    }

    pub fn pieces(&self) -> &BTreeMap<Vec<u64>, TruncatedSeries> {
        &self.pieces
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.is_empty()
    }

    /// `f(x)` with `x = b + p^(level-1) T`, `v(T) >= 1`; known mod `p^K`.
    pub fn eval(&self, x: &[PadicNum]) -> Result<PadicNum, CoeffError> {
        if x.len() != self.dim {
            return Err(CoeffError::Dimension(format!("point has {} coordinates", x.len())));
        }
        let b = class_of(x, self.level)?;
        let t = local_coords(x, &b, self.level - 1)?;
        let v = match self.pieces.get(&b) {
            Some(s) => s.eval(&t)?,
            None => self.ring.zero(),
        };
        Ok(v.reduce(self.fil))
    }

    pub fn add(&self, other: &LIFunction) -> Result<LIFunction, CoeffError> {
        if self.dim != other.dim || self.level != other.level {
            return Err(CoeffError::Dimension("functions live on different spaces".into()));
        }
        let mut pieces = self.pieces.clone();
        for (a, s) in &other.pieces {
            let sum = match pieces.get(a) {
                Some(t) => t.add(s)?,
                None => s.clone(),
            };
            pieces.insert(a.clone(), sum);
        }
        Self::from_pieces(self.ring.with_precision(self.ring.precision().min(other.ring.precision()))?, self.dim, self.level, self.fil.min(other.fil), pieces)
    }

    /// Multiplication by the generator `p` of `n`.
    pub fn mul_p(&self) -> LIFunction {
        let pieces = self
            .pieces
            .iter()
            .map(|(a, s)| (a.clone(), s.scale(self.ring.elem(self.p() as i128))))
            .collect();
        Self::from_pieces(self.ring, self.dim, self.level, self.fil, pieces).expect("same shape")
    }

    /// Multiplication by the generator `T_i` of `n`.
    pub fn mul_coordinate(&self, i: usize) -> Result<LIFunction, CoeffError> {
        if i >= self.dim {
            return Err(CoeffError::Dimension(format!("no coordinate {i}")));
        }
        let t = TruncatedSeries::variable(self.ring, self.dim, i, self.fil.saturating_sub(1), GrowthProfile::Bounded);
        let mut pieces = BTreeMap::new();
        for (a, s) in &self.pieces {
            pieces.insert(a.clone(), s.mul(&t)?);
        }
        Self::from_pieces(self.ring, self.dim, self.level, self.fil, pieces)
    }

    pub fn to_record(&self) -> FunctionRecord {
        FunctionRecord {
            kind: "li".into(),
            p: self.p(),
            precision: self.ring.precision(),
            dim: self.dim,
            level: self.level,
            fil: Some(self.fil),
            pieces: self
                .pieces
                .iter()
                .map(|(a, s)| PieceRecord {
                    class: a.clone(),
                    series: s.to_record(),
                })
                .collect(),
        }
    }
}

/// Exponent tuples of total degree at most `deg` in `dim` variables.
pub fn monomials(dim: usize, deg: u32) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|v: Vec<u32>| {
                let used: u32 = v.iter().sum();
                (0..=deg - used).map(move |k| {
                    let mut w = v.clone();
                    w.push(k);
                    w
                })
            })
            .collect();
    }
    out
}

/// `LA_m -> LI_(m+1)` by restriction to the finer classes.
pub fn la_to_li(f: &LAFunction) -> Result<LIFunction, CoeffError> {
    let p = f.p();
    let ring = f.ring();
    let pm = ipow(p, f.level);
    let fil = f.precision();
    let mut pieces = BTreeMap::new();
    for b in residue_classes(p, f.level + 1, f.dim) {
        let a: Vec<u64> = b.iter().map(|x| x % pm).collect();
        let Some(s) = f.pieces.get(&a) else { continue };
        // x = b + p^m T and x = a + p^m Y give Y = (b - a)/p^m + T.
        let subs: Vec<Vec<PadicNum>> = b
            .iter()
            .zip(&a)
            .map(|(bi, ai)| vec![ring.elem(((bi - ai) / pm) as i128), ring.one()])
            .collect();
        pieces.insert(b, substitute(s, &subs, fil - 1, GrowthProfile::Bounded)?);
    }
    LIFunction::from_pieces(ring, f.dim, f.level + 1, fil, pieces)
}

/// `LI_(m+1) -> LA_(m+1)`: `h_b(y) = g_b(p y)`, exact mod `p^K`.
pub fn li_to_la(g: &LIFunction) -> Result<LAFunction, CoeffError> {
    let ring = g.ring.with_precision(g.fil)?;
    let p = ring.elem(g.p() as i128);
    let mut pieces = BTreeMap::new();
    for (b, s) in &g.pieces {
        let subs = vec![vec![ring.zero(), p]; g.dim];
        pieces.insert(b.clone(), substitute(&s.reduced(g.fil), &subs, s.degree(), GrowthProfile::Tate)?);
    }
    LAFunction::from_pieces(ring, g.dim, g.level, pieces)
}

/// Largest `n` with `f` in `Fil^n`: the minimum of `v(c) + |e|` over all terms.
pub fn fil_degree(f: &LIFunction) -> FilDegree {
    f.pieces
        .values()
        .flat_map(|s| s.terms().map(|(e, c)| c.valuation().lower_bound() + e.iter().sum::<u32>()).collect::<Vec<_>>())
        .min()
        .map_or(FilDegree::Infinite, FilDegree::Finite)
}

/// Image of `f` in `LI / Fil^n`.
pub fn fil_reduce(f: &LIFunction, n: u32) -> Result<LIFunction, CoeffError> {
    LIFunction::from_pieces(f.ring, f.dim, f.level, f.fil.min(n), f.pieces.clone())
}

/// `log_p |LI_level / Fil^n|` for `d`-dimensional functions: every class
/// contributes `n - j` digits for each monomial of degree `j < n`.
pub fn fil_quotient_digits(p: u64, dim: usize, level: u32, n: u32) -> u64 {
    let per_class: u64 = monomials(dim, n.saturating_sub(1))
        .iter()
        .map(|e| (n - e.iter().sum::<u32>()) as u64)
        .sum();
    let classes = ipow(p, level * dim as u32);
    if n == 0 {
        return 0;
    }
    classes * per_class
}

/// Representatives of one residue class of `LI / Fil^n` for `d = 1`:
/// coefficient vectors `c_j in [0, p^(n-j))`.
pub fn fil_quotient_class_reps(p: u64, n: u32) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    for j in 0..n {
        let q = ipow(p, n - j);
        out = out
            .into_iter()
            .flat_map(|v: Vec<u64>| {
                (0..q).map(move |c| {
                    let mut w = v.clone();
                    w.push(c);
                    w
                })
            })
            .collect();
    }
    out
}

/// Reduce a `d = 1` coefficient vector from `Fil^n` to `Fil^(n-1)` coordinates.
pub fn fil_quotient_project(p: u64, rep: &[u64], n: u32) -> Vec<u64> {
    (0..n.saturating_sub(1))
        .map(|j| rep[j as usize] % ipow(p, n - 1 - j))
        .collect()
}

/// Number of unipotent coordinates for an example tag.
pub fn coordinate_dim(tag: ExampleTag) -> Result<usize, CoeffError> {
    match tag {
        ExampleTag::Bf => Ok(2),
        ExampleTag::Tp => Ok(3),
        ExampleTag::Gsp4 => Err(CoeffError::NotInMonoid("GSP4 has no wired coordinate action".into())),
    }
}

/// Element of the Iwahori subgroup of `GL_2^d`, one `[a, b, c, d]` block per coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupElement {
    tag: Option<ExampleTag>,
    blocks: Vec<[PadicNum; 4]>,
}

impl GroupElement {
    pub fn new(tag: Option<ExampleTag>, blocks: Vec<[PadicNum; 4]>) -> Result<Self, CoeffError> {
        if let Some(t) = tag {
            let d = coordinate_dim(t)?;
            if blocks.len() != d {
                return Err(CoeffError::Dimension(format!("{t} needs {d} blocks")));
            }
        }
        for (i, [a, _, c, d]) in blocks.iter().enumerate() {
            if !a.is_unit() || !d.is_unit() || c.valuation().lower_bound() < 1 {
                return Err(CoeffError::NotInMonoid(format!("block {i} is not in Iwahori form")));
            }
        }
        Ok(GroupElement { tag, blocks })
    }

    pub fn identity(ring: PadicRing, dim: usize) -> Self {
        let id = [ring.one(), ring.zero(), ring.zero(), ring.one()];
        GroupElement {
            tag: None,
            blocks: vec![id; dim],
        }
    }

    /// Uniform random Iwahori element.
    pub fn random<R: Rng>(rng: &mut R, ring: PadicRing, tag: Option<ExampleTag>, dim: usize) -> Result<Self, CoeffError> {
        let dim = match tag {
            Some(t) => coordinate_dim(t)?,
            None => dim,
        };
        let p = ring.p();
        let m = ring.modulus();
        let unit = |rng: &mut R| loop {
            let x = rng.gen_range(0..m);
            if x % p != 0 {
                return ring.elem(x as i128);
            }
        };
        let blocks = (0..dim)
            .map(|_| {
                let a = unit(rng);
                let d = unit(rng);
                let b = ring.elem(rng.gen_range(0..m) as i128);
                let c = ring.elem(rng.gen_range(0..m) as i128).mul_p_power(1);
                [a, b, c, d]
            })
            .collect();
        Self::new(tag, blocks)
    }

    pub fn tag(&self) -> Option<ExampleTag> {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[[PadicNum; 4]] {
        &self.blocks
    }

    /// Blockwise matrix product.
    pub fn mul(&self, other: &GroupElement) -> Result<GroupElement, CoeffError> {
        if self.dim() != other.dim() {
            return Err(CoeffError::Dimension("group elements of different size".into()));
        }
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|([a, b, c, d], [e, f, g, h])| [*a * *e + *b * *g, *a * *f + *b * *h, *c * *e + *d * *g, *c * *f + *d * *h])
            .collect();
        Ok(GroupElement {
            tag: self.tag.or(other.tag),
            blocks,
        })
    }
}

/// Payload of a twisted function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    La(LAFunction),
    Li(LIFunction),
}

impl Payload {
    pub fn dim(&self) -> usize {
        match self {
            Payload::La(f) => f.dim(),
            Payload::Li(f) => f.dim(),
        }
    }

    pub fn level(&self) -> u32 {
        match self {
            Payload::La(f) => f.level(),
            Payload::Li(f) => f.level(),
        }
    }

    pub fn eval(&self, x: &[PadicNum]) -> Result<PadicNum, CoeffError> {
        match self {
            Payload::La(f) => f.eval(x),
            Payload::Li(f) => f.eval(x),
        }
    }
}

/// A function on the big cell determined by its restriction to the unipotent
/// coordinates; the extension is `f(nbar t n) = kappa(t) f(n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwistedFunction {
    kappa: Character,
    payload: Payload,
}

impl TwistedFunction {
    /// `kappa` needs two components per coordinate: the two diagonal entries.
    pub fn new(kappa: Character, payload: Payload) -> Result<Self, CoeffError> {
        if kappa.rank() != 2 * payload.dim() {
            return Err(CoeffError::Dimension(format!(
                "character of rank {} for {} coordinates",
                kappa.rank(),
                payload.dim()
            )));
        }
        Ok(TwistedFunction { kappa, payload })
    }

    pub fn kappa(&self) -> &Character {
        &self.kappa
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn level(&self) -> u32 {
        self.payload.level()
    }

    pub fn eval(&self, x: &[PadicNum]) -> Result<PadicNum, CoeffError> {
        self.payload.eval(x)
    }

    pub fn to_record(&self) -> TwistedRecord {
        TwistedRecord {
            function: match &self.payload {
                Payload::La(f) => f.to_record(),
                Payload::Li(f) => f.to_record(),
            },
            kappa: self.kappa.algebraic_weights(),
        }
    }
}

fn scalar_exponent(kappa: &Character, i: usize) -> Result<PadicNum, CoeffError> {
    match &kappa.exponents()[i] {
        Exponent::Scalar(s) => Ok(*s),
        Exponent::Family { .. } => Err(CoeffError::FamilyAction),
    }
}

fn scalar_value(v: CharValue) -> Result<PadicNum, CoeffError> {
    v.as_scalar().ok_or(CoeffError::FamilyAction)
}

/// `(g f)(x) = kappa(t(x)) f(M(x))` evaluated directly at one point, where
/// `M(x) = (b + d x)/(a + c x)` and `t(x) = diag(a + c x, det / (a + c x))` per block.
pub fn act_pointwise(g: &GroupElement, f: &TwistedFunction, x: &[PadicNum]) -> Result<PadicNum, CoeffError> {
    let mut y = Vec::with_capacity(x.len());
    let mut factor: Option<PadicNum> = None;
    for (i, ([a, b, c, d], xi)) in g.blocks.iter().zip(x).enumerate() {
        let q = *a + *c * *xi;
        let det = *a * *d - *b * *c;
        y.push((*b + *d * *xi) * q.inv()?);
        let k1 = scalar_value(f.kappa.component(2 * i, &q)?)?;
        let k2 = scalar_value(f.kappa.component(2 * i + 1, &(det * q.inv()?))?)?;
        let k = k1 * k2;
        factor = Some(match factor {
            Some(acc) => acc * k,
            None => k,
        });
    }
    let v = f.eval(&y)?;
    Ok(match factor {
        Some(k) => k * v,
        None => v,
    })
}

/// Right translation by an Iwahori element, as a substitution per residue class.
///
/// LA payloads are exact polynomials; the substituted series is truncated at a
/// degree where the dropped terms vanish mod `p^N` on the unit disc. LI
/// payloads stay exact modulo `Fil^K`.
pub fn act_group(g: &GroupElement, f: &TwistedFunction) -> Result<TwistedFunction, CoeffError> {
    let dim = f.payload.dim();
    if g.dim() != dim {
        return Err(CoeffError::Dimension(format!("{} blocks for {} coordinates", g.dim(), dim)));
    }
    let (ring, level, scale, out_degree, profile) = match &f.payload {
        Payload::La(h) => {
            let p = h.p();
            let n = h.precision();
            let vr = g
                .blocks
                .iter()
                .filter(|b| !b[2].is_zero())
                .map(|b| b[2].valuation().lower_bound() + h.level)
                .min();
            let extra = match vr {
                None => 0,
                // Tail terms in degree D + e have valuation >= e (v(r) - 1/(p-1)).
                Some(v) => {
                    let num = (n as u64) * (p - 1);
                    let den = (v as u64) * (p - 1) - 1;
                    num.div_ceil(den) as u32
                }
            };
            (h.ring(), h.level, h.level, h.degree() + extra, GrowthProfile::Tate)
        }
        Payload::Li(h) => (h.ring(), h.level, h.level - 1, h.fil - 1, GrowthProfile::Bounded),
    };
    let p = ring.p();
    let q = ipow(p, level);
    let ps = ring.elem(ipow(p, scale) as i128);
    let mut pieces = BTreeMap::new();
    for class in residue_classes(p, level, dim) {
        let mut target = Vec::with_capacity(dim);
        let mut subs = Vec::with_capacity(dim);
        let mut factor = TruncatedSeries::one(ring, dim, out_degree, profile);
        for (i, [a, b, c, d]) in g.blocks.iter().enumerate() {
            let x0 = ring.elem(class[i] as i128);
            let q0 = *a + *c * x0;
            let qi = q0.inv()?;
            let det = *a * *d - *b * *c;
            let m0 = (*b + *d * x0) * qi;
            let ti = m0.residue() % q;
            target.push(ti);
            // Y' = (m0 - t)/p^s + det/q0^2 * sum_k r^k Y^(k+1), r = -c p^s / q0.
            let r = -(*c * ps * qi);
            let lead = det * qi * qi;
            let mut coeffs = vec![(m0 - ring.elem(ti as i128)).div_p_power(scale)?];
            let mut rk = ring.one();
            for _ in 0..out_degree {
                coeffs.push(lead * rk);
                rk = rk * r;
            }
            subs.push(coeffs);
            let k1 = scalar_value(f.kappa.component(2 * i, &q0)?)?;
            let k2 = scalar_value(f.kappa.component(2 * i + 1, &(det * qi))?)?;
            let e = scalar_exponent(&f.kappa, 2 * i)? - scalar_exponent(&f.kappa, 2 * i + 1)?;
            let w = -r;
            let series = univariate_at(ring, &one_plus_pow(&w, &e, out_degree)?, out_degree, profile);
            factor = factor.mul(&embed_variable(&series, dim, i)?)?.scale(k1 * k2);
        }
        let source = match &f.payload {
            Payload::La(h) => h.pieces.get(&target),
            Payload::Li(h) => h.pieces.get(&target),
        };
        let Some(src) = source else { continue };
        let composed = substitute(&src.clone().with_profile(profile), &subs, out_degree, profile)?;
        pieces.insert(class, composed.mul(&factor)?);
    }
    let payload = match &f.payload {
        Payload::La(h) => Payload::La(LAFunction::from_pieces(ring, dim, h.level, pieces)?),
        Payload::Li(h) => Payload::Li(LIFunction::from_pieces(ring, dim, h.level, h.fil, pieces)?),
    };
    TwistedFunction::new(f.kappa.clone(), payload)
}

/// Action of the contracting torus element `x_i -> p^(e_i) x_i` (normalized,
/// no character factor). The level drops by one.
pub fn act_compact(exps: &[u32], f: &TwistedFunction) -> Result<TwistedFunction, CoeffError> {
    let dim = f.payload.dim();
    if exps.len() != dim {
        return Err(CoeffError::Dimension(format!("{} exponents for {} coordinates", exps.len(), dim)));
    }
    if exps.iter().any(|e| *e == 0) {
        return Err(CoeffError::NotContracting);
    }
    let payload = match &f.payload {
        Payload::La(h) => {
            if h.level == 0 {
                return Err(CoeffError::LevelTooLow(0));
            }
            Payload::La(compact_pieces(h.ring, dim, h.level, h.level, exps, &h.pieces, h.degree(), GrowthProfile::Tate)
                .and_then(|pieces| LAFunction::from_pieces(h.ring, dim, h.level - 1, pieces))?)
        }
        Payload::Li(h) => {
            if h.level < 2 {
                return Err(CoeffError::LevelTooLow(h.level));
            }
            Payload::Li(
                compact_pieces(h.ring, dim, h.level, h.level - 1, exps, &h.pieces, h.fil - 1, GrowthProfile::Bounded)
                    .and_then(|pieces| LIFunction::from_pieces(h.ring, dim, h.level - 1, h.fil, pieces))?,
            )
        }
    };
    TwistedFunction::new(f.kappa.clone(), payload)
}

/// Pieces of `x -> f(p^e x)` one level down. The source has classes mod
/// `p^level` and local coordinate scale `p^scale`; the target uses one less of each.
#[allow(clippy::too_many_arguments)]
fn compact_pieces(
    ring: PadicRing,
    dim: usize,
    level: u32,
    scale: u32,
    exps: &[u32],
    pieces: &BTreeMap<Vec<u64>, TruncatedSeries>,
    degree: u32,
    profile: GrowthProfile,
) -> Result<BTreeMap<Vec<u64>, TruncatedSeries>, CoeffError> {
    let p = ring.p();
    let q = ipow(p, level) as u128;
    let ps = ipow(p, scale) as u128;
    let mut out = BTreeMap::new();
    for a in residue_classes(p, level - 1, dim) {
        let mut target = Vec::with_capacity(dim);
        let mut subs = Vec::with_capacity(dim);
        for (ai, e) in a.iter().zip(exps) {
            // x = a + p^(scale-1) Y, p^e x = b + p^scale (c0 + p^(e-1) Y).
            let pe = (p as u128).pow(*e);
            let shifted = pe * *ai as u128;
            let b = shifted % q;
            let c0 = (shifted - b) / ps;
            target.push(b as u64);
            subs.push(vec![ring.elem(c0 as i128), ring.elem((p as u128).pow(e - 1) as i128)]);
        }
        if let Some(s) = pieces.get(&target) {
            out.insert(a, substitute(s, &subs, degree, profile)?);
        }
    }
    Ok(out)
}

/// Precision schedule of moment tables: the `j`-th moment is known mod `p^(N-j)`.
pub fn moment_weight(n: u32, j: u32) -> u32 {
    n.saturating_sub(j)
}

/// Finite approximation of a distribution on `Z_p` at level `m`: for every
/// class `a mod p^m` the moments `mu(1_a(x) y^j)`, `x = a + p^m y`, `j <= M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteDistribution {
    ring: PadicRing,
    level: u32,
    cutoff: u32,
    moments: BTreeMap<u64, Vec<PadicNum>>,
}

impl FiniteDistribution {
    pub fn zero(ring: PadicRing, level: u32, cutoff: u32) -> Result<Self, CoeffError> {
        if cutoff >= ring.precision() {
            return Err(CoeffError::CutoffTooLarge {
                cutoff,
                precision: ring.precision(),
            });
        }
        Ok(FiniteDistribution {
            ring,
            level,
            cutoff,
            moments: BTreeMap::new(),
        })
    }

    /// Build from raw class moments, reducing moment `j` to precision `N - j`.
    pub fn from_moments(
        ring: PadicRing,
        level: u32,
        cutoff: u32,
        moments: BTreeMap<u64, Vec<PadicNum>>,
    ) -> Result<Self, CoeffError> {
        let mut out = Self::zero(ring, level, cutoff)?;
        let q = ipow(ring.p(), level);
        for (a, vals) in moments {
            if a >= q {
                return Err(CoeffError::BadClass(vec![a]));
            }
            if vals.len() != cutoff as usize + 1 {
                return Err(CoeffError::Dimension(format!("{} moments for cutoff {cutoff}", vals.len())));
            }
            let vals: Vec<PadicNum> = vals
                .iter()
                .enumerate()
                .map(|(j, v)| v.reduce(moment_weight(ring.precision(), j as u32)))
                .collect();
            out.moments.insert(a, vals);
        }
        Ok(out)
    }

    /// Evaluation at `x`.
    pub fn dirac(ring: PadicRing, level: u32, cutoff: u32, x: &PadicNum) -> Result<Self, CoeffError> {
        let a = class_of(std::slice::from_ref(x), level)?[0];
        let y = local_coords(std::slice::from_ref(x), &[a], level)?[0];
        // y is known mod p^(N-m); its zeroth power is exactly 1.
        let vals = (0..=cutoff)
            .map(|j| if j == 0 { ring.one() } else { y.pow(j as u64) })
            .collect();
        Self::from_moments(ring, level, cutoff, BTreeMap::from([(a, vals)]))
    }

    pub fn ring(&self) -> PadicRing {
        self.ring
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn moments(&self) -> &BTreeMap<u64, Vec<PadicNum>> {
        &self.moments
    }

    pub fn add(&self, other: &FiniteDistribution) -> Result<FiniteDistribution, CoeffError> {
        if self.level != other.level || self.cutoff != other.cutoff {
            return Err(CoeffError::Dimension("distributions of different shape".into()));
        }
        let mut moments = self.moments.clone();
        for (a, vals) in &other.moments {
            let entry = moments.entry(*a).or_insert_with(|| vec![self.ring.zero(); vals.len()]);
            for (x, y) in entry.iter_mut().zip(vals) {
                *x = *x + *y;
            }
        }
        Self::from_moments(self.ring.with_precision(self.ring.precision().min(other.ring.precision()))?, self.level, self.cutoff, moments)
    }

    pub fn scale(&self, c: PadicNum) -> FiniteDistribution {
        let moments = self
            .moments
            .iter()
            .map(|(a, vals)| (*a, vals.iter().map(|v| *v * c).collect()))
            .collect();
        FiniteDistribution {
            moments,
            ..self.clone()
        }
    }

    /// `mu(1)`.
    pub fn total_mass(&self) -> PadicNum {
        self.moments
            .values()
            .fold(self.ring.zero(), |acc, vals| acc + vals[0])
    }

    /// Largest `n` with every moment `j` divisible by `p^(n-j)`, capped at `N`.
    pub fn fil_level(&self) -> u32 {
        let n = self.ring.precision();
        self.moments
            .values()
            .flat_map(|vals| vals.iter().enumerate().map(|(j, v)| v.valuation().lower_bound() + j as u32))
            .fold(n, u32::min)
    }

    /// `<mu, f>` for a one-variable function of level at most `m` and degree
    /// at most the cutoff; the result carries the precision certified by the
    /// moment schedule.
    pub fn pairing(&self, f: &LAFunction) -> Result<PadicNum, CoeffError> {
        if f.dim() != 1 {
            return Err(CoeffError::Dimension("distributions are one-dimensional".into()));
        }
        if f.level() > self.level {
            return Err(CoeffError::LevelMismatch {
                function: f.level(),
                distribution: self.level,
            });
        }
        let mut g = f.clone();
        while g.level() < self.level {
            g = g.refine()?;
        }
        let n = self.ring.precision();
        let mut acc = self.ring.zero().reduce(n.min(g.precision()));
        for (a, s) in g.pieces() {
            let zero = vec![self.ring.zero(); self.cutoff as usize + 1];
            let mu = self.moments.get(&a[0]).unwrap_or(&zero);
            for (e, c) in s.terms() {
                let j = e[0];
                if j > self.cutoff {
                    return Err(CoeffError::CutoffExceeded { k: j, cutoff: self.cutoff });
                }
                let vc = c.valuation().lower_bound();
                let bound = c.precision().min(moment_weight(n, j) + vc);
                let m = mu[j as usize];
                let term = c.lift(bound.max(c.precision()))? * m.lift(bound.max(m.precision()))?;
                acc = acc.reduce(bound) + term.reduce(bound);
            }
        }
        Ok(acc)
    }

    pub fn to_record(&self) -> DistributionRecord {
        DistributionRecord {
            p: self.ring.p(),
            precision: self.ring.precision(),
            level: self.level,
            cutoff: self.cutoff,
            schedule: "N-j".into(),
            moments: self
                .moments
                .iter()
                .map(|(a, v)| (*a, v.iter().map(|x| x.residue()).collect()))
                .collect(),
        }
    }
}

/// The integrals of `x^0, .., x^k` against `mu`, a vector in the dual of the
/// degree-`k` polynomials.
pub fn moment(mu: &FiniteDistribution, k: u32) -> Result<Vec<PadicNum>, CoeffError> {
    if k > mu.cutoff {
        return Err(CoeffError::CutoffExceeded { k, cutoff: mu.cutoff });
    }
    (0..=k)
        .map(|i| mu.pairing(&LAFunction::monomial(mu.ring, &[i], 0)?))
        .collect()
}

/// Weight-`k` right action on the dual of degree-`k` polynomials:
/// `(mu | g)(x^j) = mu((a + c x)^(k-j) (b + d x)^j)`.
pub fn act_dual_algebraic(v: &[PadicNum], g: &[PadicNum; 4]) -> Vec<PadicNum> {
    let k = v.len() - 1;
    let [a, b, c, d] = *g;
    let ring = a.ring();
    (0..=k)
        .map(|j| {
            // Coefficients of (a + c x)^(k-j) (b + d x)^j.
            let mut poly = vec![ring.one()];
            for (lin, times) in [((a, c), k - j), ((b, d), j)] {
                for _ in 0..times {
                    let mut next = vec![ring.zero(); poly.len() + 1];
                    for (i, x) in poly.iter().enumerate() {
                        next[i] = next[i] + *x * lin.0;
                        next[i + 1] = next[i + 1] + *x * lin.1;
                    }
                    poly = next;
                }
            }
            poly.iter().zip(v).fold(ring.zero(), |acc, (x, m)| acc + *x * *m)
        })
        .collect()
}

/// Distribution on `Z_p` with moments in the Iwasawa algebra of a
/// one-dimensional weight disc, twisted by the universal character.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyDistribution {
    disc: WeightDisc,
    cutoff: u32,
    moments: Vec<TruncatedSeries>,
}

impl FamilyDistribution {
    pub fn zero(disc: &WeightDisc, cutoff: u32) -> Result<Self, CoeffError> {
        if disc.center().len() != 1 {
            return Err(CoeffError::Dimension("family distributions need a one-dimensional disc".into()));
        }
        let ring = disc.ring();
        if cutoff >= ring.precision() {
            return Err(CoeffError::CutoffTooLarge {
                cutoff,
                precision: ring.precision(),
            });
        }
        let z = TruncatedSeries::zero(ring, 1, disc.degree(), GrowthProfile::Bounded);
        Ok(FamilyDistribution {
            disc: disc.clone(),
            cutoff,
            moments: vec![z; cutoff as usize + 1],
        })
    }

    /// `sum_i c_i(t) delta_(x_i)`.
    pub fn from_diracs(disc: &WeightDisc, cutoff: u32, parts: &[(TruncatedSeries, PadicNum)]) -> Result<Self, CoeffError> {
        let mut out = Self::zero(disc, cutoff)?;
        for (c, x) in parts {
            for j in 0..=cutoff {
                let term = c.scale(x.pow(j as u64));
                out.moments[j as usize] = out.moments[j as usize].add(&term)?;
            }
        }
        out.normalize();
        Ok(out)
    }

    pub fn dirac(disc: &WeightDisc, cutoff: u32, x: &PadicNum) -> Result<Self, CoeffError> {
        let one = TruncatedSeries::one(disc.ring(), 1, disc.degree(), GrowthProfile::Bounded);
        Self::from_diracs(disc, cutoff, &[(one, *x)])
    }

    fn normalize(&mut self) {
        let n = self.disc.ring().precision();
        for (j, m) in self.moments.iter_mut().enumerate() {
            m.reduce_precision(moment_weight(n, j as u32));
        }
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn moments(&self) -> &[TruncatedSeries] {
        &self.moments
    }

    pub fn add(&self, other: &FamilyDistribution) -> Result<FamilyDistribution, CoeffError> {
        if self.cutoff != other.cutoff {
            return Err(CoeffError::Dimension("distributions of different cutoff".into()));
        }
        let moments = self
            .moments
            .iter()
            .zip(&other.moments)
            .map(|(a, b)| a.add(b))
            .collect::<Result<_, _>>()?;
        Ok(FamilyDistribution {
            moments,
            ..self.clone()
        })
    }

    /// Right action of `[[a, b], [0, d]]` with weight `kappa_U`:
    /// `(eps | g)(x^j) = kappa_U(a) a^(-j) eps((b + d x)^j)`.
    pub fn act_upper(&self, g: &[PadicNum; 4]) -> Result<FamilyDistribution, CoeffError> {
        let [a, b, c, d] = *g;
        if !c.is_zero() {
            return Err(CoeffError::FamilyAction);
        }
        let kappa_a = match self.disc.universal().component(0, &a)? {
            CharValue::Series(s) => s,
            CharValue::Scalar(s) => TruncatedSeries::constant(s, 1, self.disc.degree(), GrowthProfile::Bounded),
        };
        let ainv = a.inv()?;
        let mut moments = Vec::with_capacity(self.moments.len());
        for j in 0..=self.cutoff as u64 {
            let mut acc = TruncatedSeries::zero(self.disc.ring(), 1, self.disc.degree(), GrowthProfile::Bounded);
            let mut binom = 1u128;
            for i in 0..=j {
                let coef = a.ring().elem(binom as i128) * b.pow(j - i) * d.pow(i) * ainv.pow(j);
                acc = acc.add(&self.moments[i as usize].scale(coef))?;
                binom = binom * (j - i) as u128 / (i + 1) as u128;
            }
            moments.push(acc.mul(&kappa_a)?);
        }
        let mut out = FamilyDistribution {
            moments,
            ..self.clone()
        };
        out.normalize();
        Ok(out)
    }
}

/// Specialization of a family distribution at the algebraic weight `k`
/// followed by the moment map to the dual of degree-`k` polynomials.
pub fn sp_mu(eps: &FamilyDistribution, weight: &[i64]) -> Result<Vec<PadicNum>, CoeffError> {
    if weight.len() != 1 {
        return Err(CoeffError::WeightMismatch(format!("expected one weight, got {weight:?}")));
    }
    let k = weight[0];
    if k < 0 || k as u32 > eps.cutoff {
        return Err(CoeffError::WeightMismatch(format!("weight {k} outside [0, {}]", eps.cutoff)));
    }
    let t = eps.disc.point_of(weight)?;
    eps.moments[..=k as usize]
        .iter()
        .map(|m| Ok(m.eval(&t)?))
        .collect()
}

/// Function on `Z_p^d` with Iwasawa-algebra coefficients: per class, a
/// polynomial in the local coordinate whose coefficients are series in the
/// disc variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyFunction {
    disc: WeightDisc,
    dim: usize,
    level: u32,
    pieces: BTreeMap<Vec<u64>, BTreeMap<Vec<u32>, TruncatedSeries>>,
}

impl FamilyFunction {
    pub fn new(
        disc: &WeightDisc,
        dim: usize,
        level: u32,
        pieces: BTreeMap<Vec<u64>, BTreeMap<Vec<u32>, TruncatedSeries>>,
    ) -> Result<Self, CoeffError> {
        let n = disc.center().len();
        for (a, poly) in &pieces {
            if a.len() != dim {
                return Err(CoeffError::BadClass(a.clone()));
            }
            for (e, c) in poly {
                if e.len() != dim || c.nvars() != n {
                    return Err(CoeffError::Dimension("family coefficient shape".into()));
                }
            }
        }
        Ok(FamilyFunction {
            disc: disc.clone(),
            dim,
            level,
            pieces,
        })
    }

    /// A scalar function viewed as constant in the weight.
    pub fn from_scalar(disc: &WeightDisc, f: &LAFunction) -> Result<Self, CoeffError> {
        let n = disc.center().len();
        let pieces = f
            .pieces()
            .iter()
            .map(|(a, s)| {
                let poly = s
                    .terms()
                    .map(|(e, c)| (e.clone(), TruncatedSeries::constant(c, n, disc.degree(), GrowthProfile::Bounded)))
                    .collect();
                (a.clone(), poly)
            })
            .collect();
        Self::new(disc, f.dim(), f.level(), pieces)
    }

    /// `x -> kappa_U(u0 + w x)` on `Z_p` (level 0), for a unit `u0` and
    /// `v(w) >= 1`, truncated at `x`-degree `degree`.
    ///
    /// `kappa_U(u0 (1 + z x)) = kappa_U(u0) (1 + z x)^k0 (1 + t)^L(x)` with
    /// `L(x) = log(1 + z x)/log(1 + p)`. Expanding `(1 + t)^L(x)` needs
    /// integral binomial coefficients `binom(L(x), n)`; when `z` is too large
    /// for the disc degree this fails with `NotAnalytic`. Coefficient
    /// precision is capped by the size of the dropped terms.
    pub fn character_on_line(disc: &WeightDisc, u0: &PadicNum, w: &PadicNum, degree: u32) -> Result<Self, CoeffError> {
        if disc.center().len() != 1 {
            return Err(CoeffError::Dimension("one-dimensional disc expected".into()));
        }
        let ring = disc.ring();
        let p = ring.p();
        let n = ring.precision();
        let z = *w * u0.inv()?;
        let vz = z.valuation().lower_bound();
        if vz < 1 {
            return Err(CoeffError::NotAnalytic("w must be divisible by p".into()));
        }
        let dt = disc.degree();
        let guard = padic::vp_factorial(p, dt as u64) + 2 + padic::vp_factorial(p, degree as u64);
        let work = (n + guard).min(padic::max_precision(p));
        let wr = ring.with_precision(work)?;
        let zl = z.lift(work)?;
        // L(x) = sum_j (-1)^(j+1) z^j / (j log(1+p)).
        let lg = padic::log_one_unit(&(wr.one() + wr.elem(p as i128)))?;
        let lg_unit = lg.div_p_power(1)?.inv()?;
        let mut ell = vec![wr.zero()];
        for j in 1..=degree {
            let num = zl.pow(j as u64).div_int(j as i128)?;
            let num = if j % 2 == 1 { num } else { -num };
            let v = num
                .div_p_power(1)
                .map_err(|_| CoeffError::NotAnalytic(format!("log coefficient {j} not integral")))?;
            ell.push(v * lg_unit.reduce(v.precision()));
        }
        // binom(L, m) as x-polynomials, m <= disc degree.
        let mut binoms: Vec<Vec<PadicNum>> = vec![{
            let mut b = vec![wr.zero(); degree as usize + 1];
            b[0] = wr.one();
            b
        }];
        for m in 1..=dt {
            let prev = &binoms[m as usize - 1];
            let mut next = vec![wr.zero(); degree as usize + 1];
            for (i, x) in prev.iter().enumerate() {
                for (j, l) in ell.iter().enumerate() {
                    if i + j <= degree as usize {
                        next[i + j] = next[i + j] + *x * *l;
                    }
                }
                next[i] = next[i] - *x * wr.elem(m as i128 - 1);
            }
            let next = next
                .iter()
                .map(|c| c.div_int(m as i128))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CoeffError::NotAnalytic(format!("binomial {m} not integral")))?;
            binoms.push(next);
        }
        let kappa_u0 = match disc.universal().component(0, u0)? {
            CharValue::Series(s) => s,
            CharValue::Scalar(s) => TruncatedSeries::constant(s, 1, dt, GrowthProfile::Bounded),
        };
        let lin = one_plus_pow(&z, &ring.elem(disc.center()[0] as i128), degree)?;
        // Dropped x-terms have valuation about (degree + 1) (v(z) - 1/(p-1)) - 1.
        let tail = ((degree as u64 + 1) * ((vz as u64) * (p - 1) - 1) / (p - 1)).saturating_sub(1) as u32;
        let prec = n.min(tail.max(1));
        let mut poly = BTreeMap::new();
        for b in 0..=degree as usize {
            let mut acc = TruncatedSeries::zero(ring, 1, dt, GrowthProfile::Bounded);
            for (i, l) in lin.iter().enumerate().take(b + 1) {
                let col: Vec<PadicNum> = (0..=dt as usize).map(|m| binoms[m][b - i].reduce(n)).collect();
                let s = univariate_at(ring, &col, dt, GrowthProfile::Bounded);
                acc = acc.add(&s.scale(*l))?;
            }
            let mut c = acc.mul(&kappa_u0)?;
            c.reduce_precision(prec);
            poly.insert(vec![b as u32], c);
        }
        Self::new(disc, 1, 0, BTreeMap::from([(vec![0], poly)]))
    }

    pub fn add(&self, other: &FamilyFunction) -> Result<FamilyFunction, CoeffError> {
        if self.dim != other.dim || self.level != other.level {
            return Err(CoeffError::Dimension("family functions of different shape".into()));
        }
        let mut pieces = self.pieces.clone();
        for (a, poly) in &other.pieces {
            let entry = pieces.entry(a.clone()).or_default();
            for (e, c) in poly {
                let sum = match entry.get(e) {
                    Some(x) => x.add(c)?,
                    None => c.clone(),
                };
                entry.insert(e.clone(), sum);
            }
        }
        Self::new(&self.disc, self.dim, self.level, pieces)
    }

    pub fn pieces(&self) -> &BTreeMap<Vec<u64>, BTreeMap<Vec<u32>, TruncatedSeries>> {
        &self.pieces
    }
}

/// `rho_lambda`: evaluate every Iwasawa coefficient at the algebraic weight.
pub fn specialize_rho(f: &FamilyFunction, weight: &[i64]) -> Result<LAFunction, CoeffError> {
    let t = f.disc.point_of(weight)?;
    let mut ring = f.disc.ring();
    let mut pieces = BTreeMap::new();
    let deg = f
        .pieces
        .values()
        .flat_map(|poly| poly.keys().map(|e| e.iter().sum::<u32>()))
        .max()
        .unwrap_or(0);
    for (a, poly) in &f.pieces {
        let mut s = TruncatedSeries::zero(ring, f.dim, deg, GrowthProfile::Tate);
        for (e, c) in poly {
            let v = c.eval(&t)?;
            if v.precision() < ring.precision() {
                ring = v.ring();
            }
            s.set(e, v);
        }
        pieces.insert(a.clone(), s);
    }
    LAFunction::from_pieces(ring, f.dim, f.level, pieces)
}

/// One residue-class piece in serialized form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceRecord {
    pub class: Vec<u64>,
    pub series: SeriesRecord,
}

/// Serialized LA/LI function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionRecord {
    pub kind: String,
    pub p: u64,
    pub precision: u32,
    pub dim: usize,
    pub level: u32,
    pub fil: Option<u32>,
    pub pieces: Vec<PieceRecord>,
}

/// Serialized twisted function; `kappa` lists algebraic weights when available.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwistedRecord {
    pub function: FunctionRecord,
    pub kappa: Option<Vec<i64>>,
}

/// Serialized moment table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionRecord {
    pub p: u64,
    pub precision: u32,
    pub level: u32,
    pub cutoff: u32,
    pub schedule: String,
    pub moments: BTreeMap<u64, Vec<u64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ring(p: u64, n: u32) -> PadicRing {
        PadicRing::new(p, n).unwrap()
    }

    fn poly1(r: PadicRing, cs: &[i128]) -> TruncatedSeries {
        let v: Vec<PadicNum> = cs.iter().map(|c| r.elem(*c)).collect();
        TruncatedSeries::univariate(r, &v, GrowthProfile::Tate)
    }

    fn horner(r: PadicRing, cs: &[i128], x: PadicNum) -> PadicNum {
        cs.iter().rev().fold(r.zero(), |acc, c| acc * x + r.elem(*c))
    }

    fn random_point(rng: &mut ChaCha8Rng, r: PadicRing) -> PadicNum {
        r.elem(rng.gen_range(0..r.modulus()) as i128)
    }

    #[test]
    fn la_li_round_trip() {
        let r = ring(3, 8);
        let cs = [2, -1, 5, 7];
        let f = LAFunction::from_global(&poly1(r, &cs), 1).unwrap();
        let g = la_to_li(&f).unwrap();
        let h = li_to_la(&g).unwrap();
        assert_eq!(g.level(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = random_point(&mut rng, r);
            let want = horner(r, &cs, x);
            assert!(f.eval(&[x]).unwrap().eq_mod(&want, 7));
            assert!(g.eval(&[x]).unwrap().eq_mod(&want, 8));
            assert!(h.eval(&[x]).unwrap().eq_mod(&want, 8));
        }
    }

    #[test]
    fn identity_recentred_per_class() {
        let r = ring(5, 6);
        let f = LAFunction::monomial(r, &[1], 0).unwrap();
        let g = la_to_li(&f).unwrap();
        for j in 0..5u64 {
            let s = &g.pieces()[&vec![j]];
            assert_eq!(s.coeff(&[0]), r.elem(j as i128));
            assert_eq!(s.coeff(&[1]), r.one());
        }
        let c = LAFunction::constant(r.elem(4), 1, 0).unwrap();
        let gc = la_to_li(&c).unwrap();
        assert!(gc.pieces().values().all(|s| s.coeff(&[0]) == r.elem(4) && s.terms().count() == 1));
    }

    #[test]
    fn two_dimensional_round_trip() {
        let r = ring(3, 6);
        let s = TruncatedSeries::from_terms(r, 2, 3, GrowthProfile::Tate, &[(vec![1, 1], 2), (vec![0, 2], 1), (vec![0, 0], -4)]).unwrap();
        let f = LAFunction::from_global(&s, 0).unwrap();
        let h = li_to_la(&la_to_li(&f).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..30 {
            let x = [random_point(&mut rng, r), random_point(&mut rng, r)];
            assert!(h.eval(&x).unwrap().eq_mod(&f.eval(&x).unwrap(), 6));
        }
    }

    #[test]
    fn fil_degree_examples() {
        let r = ring(3, 8);
        let li = |terms: &[(Vec<u32>, i128)], d: usize| {
            let s = TruncatedSeries::from_terms(r, d, 7, GrowthProfile::Bounded, terms).unwrap();
            LIFunction::from_pieces(r, d, 1, 8, BTreeMap::from([(vec![0; d], s)])).unwrap()
        };
        assert_eq!(fil_degree(&li(&[(vec![0], 3)], 1)), FilDegree::Finite(1));
        assert_eq!(fil_degree(&li(&[(vec![0], 1)], 1)), FilDegree::Finite(0));
        assert_eq!(fil_degree(&li(&[(vec![1, 0], 9), (vec![0, 0], 27)], 2)), FilDegree::Finite(3));
        assert_eq!(fil_degree(&li(&[], 1)), FilDegree::Infinite);
        let f = li(&[(vec![1, 0], 9), (vec![0, 1], 1)], 2);
        assert_eq!(fil_degree(&f.mul_p()), FilDegree::Finite(2));
        assert_eq!(fil_degree(&f.mul_coordinate(0).unwrap()), FilDegree::Finite(2));
    }

    #[test]
    fn quotient_enumeration() {
        for n in 1..=3u32 {
            let reps = fil_quotient_class_reps(3, n);
            assert_eq!(reps.len() as u64, 3u64.pow(fil_quotient_digits(3, 1, 0, n) as u32));
            assert_eq!(fil_quotient_digits(3, 1, 1, n), 3 * fil_quotient_digits(3, 1, 0, n));
            let mut fibres = BTreeMap::new();
            for rep in &reps {
                *fibres.entry(fil_quotient_project(3, rep, n)).or_insert(0u64) += 1;
            }
            assert_eq!(fibres.len() as u64, 3u64.pow(fil_quotient_digits(3, 1, 0, n - 1) as u32));
            assert!(fibres.values().all(|c| *c == 3u64.pow(n)));
        }
    }

    fn kappa(r: PadicRing, ks: &[i64]) -> Character {
        Character::algebraic(r, ks)
    }

    #[test]
    fn identity_action_and_lower_triangular_oracle() {
        let r = ring(3, 8);
        let f = TwistedFunction::new(kappa(r, &[3, 1]), Payload::La(LAFunction::from_global(&poly1(r, &[1, 2, 0, 1]), 0).unwrap())).unwrap();
        let id = GroupElement::identity(r, 1);
        let g = act_group(&id, &f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = random_point(&mut rng, r);
            assert_eq!(g.eval(&[x]).unwrap(), f.eval(&[x]).unwrap());
        }
        // Lower-triangular block: f(dx/(a+cx)) scaled by kappa(diag(a+cx, ad/(a+cx))).
        let low = GroupElement::new(None, vec![[r.elem(2), r.zero(), r.elem(3), r.elem(5)]]).unwrap();
        let h = act_group(&low, &f).unwrap();
        for _ in 0..20 {
            let x = random_point(&mut rng, r);
            let want = act_pointwise(&low, &f, &[x]).unwrap();
            assert!(h.eval(&[x]).unwrap().eq_mod(&want, h.payload().eval(&[x]).unwrap().precision()));
        }
    }

    #[test]
    fn bf_tagged_action_matches_oracle() {
        let r = ring(3, 8);
        let s = TruncatedSeries::from_terms(r, 2, 2, GrowthProfile::Tate, &[(vec![1, 0], 1), (vec![0, 1], 2), (vec![0, 0], 1)]).unwrap();
        let f = TwistedFunction::new(kappa(r, &[2, 0, 1, 1]), Payload::La(LAFunction::from_global(&s, 0).unwrap())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = GroupElement::random(&mut rng, r, Some(ExampleTag::Bf), 0).unwrap();
        let h = act_group(&g, &f).unwrap();
        for _ in 0..10 {
            let x = [random_point(&mut rng, r), random_point(&mut rng, r)];
            let got = h.eval(&x).unwrap();
            assert!(got.eq_mod(&act_pointwise(&g, &f, &x).unwrap(), got.precision()));
            assert!(got.precision() >= 6);
        }
        assert!(GroupElement::random(&mut rng, r, Some(ExampleTag::Gsp4), 0).is_err());
    }

    #[test]
    fn action_is_associative() {
        let r = ring(3, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let cs: Vec<i128> = (0..3).map(|_| rng.gen_range(0..27)).collect();
            let f = TwistedFunction::new(kappa(r, &[2, -1]), Payload::La(LAFunction::from_global(&poly1(r, &cs), 0).unwrap())).unwrap();
            let g = GroupElement::random(&mut rng, r, None, 1).unwrap();
            let h = GroupElement::random(&mut rng, r, None, 1).unwrap();
            let left = act_group(&g.mul(&h).unwrap(), &f).unwrap();
            let right = act_group(&g, &act_group(&h, &f).unwrap()).unwrap();
            for _ in 0..5 {
                let x = random_point(&mut rng, r);
                let a = left.eval(&[x]).unwrap();
                let b = right.eval(&[x]).unwrap();
                assert!(a.eq_mod(&b, a.precision().min(b.precision())));
                assert!(a.precision().min(b.precision()) >= 6);
            }
        }
    }

    #[test]
    fn li_action_preserves_fil_one() {
        let r = ring(3, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let f = LIFunction::random(&mut rng, r, 1, 1, 5, 1).unwrap();
            assert!(fil_degree(&f).at_least(1));
            let tf = TwistedFunction::new(kappa(r, &[4, 1]), Payload::Li(f.clone())).unwrap();
            let g = GroupElement::random(&mut rng, r, None, 1).unwrap();
            let out = act_group(&g, &tf).unwrap();
            let Payload::Li(h) = out.payload() else { panic!() };
            assert!(fil_degree(h).at_least(1));
            for _ in 0..5 {
                let x = random_point(&mut rng, r);
                let got = h.eval(&[x]).unwrap();
                let want = act_pointwise(&g, &tf, &[x]).unwrap();
                assert!(got.eq_mod(&want, 5));
            }
        }
    }

    #[test]
    fn compact_action_examples() {
        let r = ring(3, 8);
        let k = kappa(r, &[0, 0]);
        let x = TwistedFunction::new(k.clone(), Payload::La(LAFunction::monomial(r, &[1], 1).unwrap())).unwrap();
        let px = act_compact(&[1], &x).unwrap();
        assert_eq!(px.level(), 0);
        let s = px.payload();
        let Payload::La(f) = s else { panic!() };
        assert_eq!(f.piece(&[]).or(f.piece(&[0])).unwrap().coeff(&[1]), r.elem(3));
        let x3 = TwistedFunction::new(k.clone(), Payload::La(LAFunction::monomial(r, &[3], 1).unwrap())).unwrap();
        let Payload::La(f3) = act_compact(&[1], &x3).unwrap().payload().clone() else { panic!() };
        assert_eq!(f3.piece(&[0]).unwrap().coeff(&[3]), r.elem(27));
        let c = TwistedFunction::new(k.clone(), Payload::La(LAFunction::constant(r.elem(5), 1, 2).unwrap())).unwrap();
        let cc = act_compact(&[1], &c).unwrap();
        assert_eq!(cc.level(), 1);
        assert!(cc.eval(&[r.elem(7)]).unwrap().eq_mod(&r.elem(5), 7));
        assert_eq!(act_compact(&[0], &c), Err(CoeffError::NotContracting));
        // Refined back, the contracted function is x -> f(p x).
        let Payload::La(fl) = cc.payload() else { panic!() };
        let up = fl.refine().unwrap();
        assert_eq!(up.level(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let poly = TwistedFunction::new(k, Payload::La(LAFunction::from_global(&poly1(r, &[1, 4, 2]), 2).unwrap())).unwrap();
        let out = act_compact(&[2], &poly).unwrap();
        for _ in 0..20 {
            let y = random_point(&mut rng, r);
            let want = poly.eval(&[y * r.elem(9)]).unwrap();
            let got = out.eval(&[y]).unwrap();
            assert!(got.eq_mod(&want, got.precision().min(want.precision())));
        }
    }

    #[test]
    fn compact_action_on_li_keeps_fil_degree() {
        let r = ring(3, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let f = LIFunction::random(&mut rng, r, 1, 2, 5, 1).unwrap();
            let tf = TwistedFunction::new(kappa(r, &[0, 0]), Payload::Li(f.clone())).unwrap();
            let out = act_compact(&[1], &tf).unwrap();
            let Payload::Li(h) = out.payload() else { panic!() };
            assert_eq!(h.level(), 1);
            assert!(fil_degree(h) >= fil_degree(&f));
            for _ in 0..5 {
                let x = random_point(&mut rng, r);
                assert!(h.eval(&[x]).unwrap().eq_mod(&f.eval(&[x * r.elem(3)]).unwrap(), 5));
            }
        }
    }

    #[test]
    fn dirac_moments_and_pairing() {
        let r = ring(5, 10);
        let x = r.elem(7);
        let d = FiniteDistribution::dirac(r, 0, 6, &x).unwrap();
        let m = moment(&d, 6).unwrap();
        for (i, v) in m.iter().enumerate() {
            assert!(v.eq_mod(&x.pow(i as u64), 10 - i as u32));
            assert_eq!(v.precision(), 10 - i as u32);
        }
        let z = FiniteDistribution::zero(r, 0, 6).unwrap();
        assert!(moment(&z, 3).unwrap().iter().all(|v| v.is_zero()));
        assert!(matches!(moment(&d, 7), Err(CoeffError::CutoffExceeded { .. })));
        // Sum of the five Diracs in the class 2 + 5 Z_5 at level 1.
        let pts: Vec<PadicNum> = (0..5).map(|i| r.elem(2 + 5 * (3 * i + 1))).collect();
        let mut sum = FiniteDistribution::zero(r, 1, 6).unwrap();
        for x in &pts {
            sum = sum.add(&FiniteDistribution::dirac(r, 1, 6, x).unwrap()).unwrap();
        }
        assert_eq!(sum.total_mass(), r.elem(5));
        assert_eq!(sum.fil_level(), 1);
        assert_eq!(d.scale(r.elem(25)).fil_level(), 2);
        let m = moment(&sum, 4).unwrap();
        for (i, v) in m.iter().enumerate() {
            let want = pts.iter().fold(r.zero(), |acc, x| acc + x.pow(i as u64));
            assert!(v.eq_mod(&want, v.precision()));
            assert!(v.precision() >= 10 - i as u32);
        }
    }

    #[test]
    fn pairing_is_linear_and_sound_under_refinement() {
        let r = ring(3, 10);
        let big = ring(3, 15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let pts: Vec<i128> = (0..3).map(|_| rng.gen_range(0..3i128.pow(15))).collect();
            let mk = |rr: PadicRing, m: u32| {
                pts.iter().fold(FiniteDistribution::zero(rr, 0, m).unwrap(), |acc, x| {
                    acc.add(&FiniteDistribution::dirac(rr, 0, m, &rr.elem(*x)).unwrap()).unwrap()
                })
            };
            let small = mk(r, 6);
            let large = mk(big, 11);
            let cs: Vec<i128> = (0..6).map(|_| rng.gen_range(0..100)).collect();
            let f = LAFunction::from_global(&poly1(r, &cs), 0).unwrap();
            let fb = LAFunction::from_global(&poly1(big, &cs), 0).unwrap();
            let a = small.pairing(&f).unwrap();
            let b = large.pairing(&fb).unwrap();
            assert!(a.precision() >= 5);
            assert!(a.eq_mod(&b, a.precision()));
            let g = LAFunction::from_global(&poly1(r, &[1, 1]), 0).unwrap();
            let lhs = small.pairing(&f.add(&g).unwrap()).unwrap();
            let rhs = a + small.pairing(&g).unwrap();
            assert!(lhs.eq_mod(&rhs, lhs.precision().min(rhs.precision())));
            let one = LAFunction::constant(r.one(), 1, 0).unwrap();
            assert_eq!(small.pairing(&one).unwrap(), small.total_mass());
        }
    }

    #[test]
    fn sp_mu_properties() {
        let r = ring(3, 9);
        let disc = WeightDisc::new(r, vec![2], 0, 8);
        let one = r.one();
        let d1 = FamilyDistribution::dirac(&disc, 6, &one).unwrap();
        for k in [2i64, 4, 6] {
            let v = sp_mu(&d1, &[k]).unwrap();
            assert!(v.iter().all(|x| x.eq_mod(&one, x.precision())));
            let z = FamilyDistribution::zero(&disc, 6).unwrap();
            assert!(sp_mu(&z, &[k]).unwrap().iter().all(|x| x.is_zero()));
        }
        assert!(sp_mu(&d1, &[3]).is_err());
        // Dirac combinations with weight-dependent coefficients.
        let t = TruncatedSeries::variable(r, 1, 0, 8, GrowthProfile::Bounded);
        let c1 = TruncatedSeries::one(r, 1, 8, GrowthProfile::Bounded).add(&t).unwrap();
        let eps = FamilyDistribution::from_diracs(&disc, 6, &[(c1.clone(), r.elem(4)), (t.clone(), r.elem(7))]).unwrap();
        for k in [2i64, 4] {
            let tk = disc.point_of(&[k]).unwrap()[0];
            let v = sp_mu(&eps, &[k]).unwrap();
            for (i, x) in v.iter().enumerate() {
                let want = (one + tk) * r.elem(4).pow(i as u64) + tk * r.elem(7).pow(i as u64);
                assert!(x.eq_mod(&want, x.precision()));
            }
        }
        // Equivariance under upper-triangular Iwahori elements.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let g = GroupElement::random(&mut rng, r, None, 1).unwrap().blocks()[0];
            let g = [g[0], g[1], r.zero(), g[3]];
            for k in [2i64, 4] {
                let lhs = sp_mu(&eps.act_upper(&g).unwrap(), &[k]).unwrap();
                let rhs = act_dual_algebraic(&sp_mu(&eps, &[k]).unwrap(), &g);
                for (a, b) in lhs.iter().zip(&rhs) {
                    let n = a.precision().min(b.precision());
                    assert!(n >= 5);
                    assert!(a.eq_mod(b, n));
                }
            }
        }
    }

    #[test]
    fn specialize_rho_examples() {
        let r = ring(3, 8);
        let disc = WeightDisc::new(r, vec![2], 0, 6);
        let t = TruncatedSeries::variable(r, 1, 0, 6, GrowthProfile::Bounded);
        let c = TruncatedSeries::one(r, 1, 6, GrowthProfile::Bounded).add(&t.scale(r.elem(2))).unwrap();
        let f = FamilyFunction::new(&disc, 1, 0, BTreeMap::from([(vec![0], BTreeMap::from([(vec![0], c.clone())]))])).unwrap();
        for k in [2i64, 4, 8] {
            let tk = disc.point_of(&[k]).unwrap();
            let s = specialize_rho(&f, &[k]).unwrap();
            assert!(s.eval(&[r.elem(5)]).unwrap().eq_mod(&c.eval(&tk).unwrap(), 8));
        }
        assert!(specialize_rho(&f, &[3]).is_err());
        // Universal character along the line u0 + w x.
        let (u0, w) = (r.elem(2), r.elem(9));
        let fam = FamilyFunction::character_on_line(&disc, &u0, &w, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in [2i64, 4, 6] {
            let s = specialize_rho(&fam, &[k]).unwrap();
            assert!(s.precision() >= 6, "precision {}", s.precision());
            for _ in 0..10 {
                let x = random_point(&mut rng, r);
                let want = (u0 + w * x).pow(k as u64);
                let got = s.eval(&[x]).unwrap();
                assert!(got.eq_mod(&want, got.precision()), "k={k}");
            }
        }
        let sum = fam.add(&f).unwrap();
        let lhs = specialize_rho(&sum, &[4]).unwrap();
        let a = specialize_rho(&fam, &[4]).unwrap();
        let b = specialize_rho(&f, &[4]).unwrap();
        let x = r.elem(11);
        let l = lhs.eval(&[x]).unwrap();
        assert!(l.eq_mod(&(a.eval(&[x]).unwrap() + b.eval(&[x]).unwrap()), l.precision()));
    }

    #[test]
    fn records_serialize() {
        let r = ring(3, 6);
        let f = LAFunction::monomial(r, &[2], 1).unwrap();
        let rec = f.to_record();
        let json = serde_json::to_string(&rec).unwrap();
        let back: FunctionRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
        assert_eq!(rec.pieces.len(), 3);
    }
}
