//! Truncated multivariate power series over `Z/p^N`.
//!
//! A [`TruncatedSeries`] stores every coefficient of total degree at most `D`
//! (absent keys are zero). Degree bound and precision are independent dials
//! and both are reported with every result.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::padic::{PadicError, PadicNum, PadicRing};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("variable count mismatch: {0} vs {1}")]
    VariableMismatch(usize, usize),
    #[error("prime mismatch: {0} vs {1}")]
    PrimeMismatch(u64, u64),
    #[error("composition diverges: inner constant term is a unit and the outer series is not a polynomial")]
    DivergentComposition,
    #[error("point coordinate {index} has valuation {valuation}, outside the convergence disc")]
    OutsideDisc { index: usize, valuation: String },
    #[error("point has {got} coordinates, series has {expected} variables")]
    PointArity { got: usize, expected: usize },
    #[error("exponent tuple {0:?} has the wrong length")]
    BadExponent(Vec<u32>),
    #[error("malformed series record: {0}")]
    Malformed(String),
    #[error(transparent)]
    Padic(#[from] PadicError),
}

/// Growth condition satisfied by the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthProfile {
    /// Coefficients tend to zero; the stored truncation is treated as exact,
    /// so evaluation at integral points is allowed.
    Tate,
    /// Integral coefficients; evaluation needs every coordinate in `pZ_p`.
    Bounded,
    /// The coefficient of `T^a` has valuation at least `ceil(|a| / p^m)`.
    Scaled(u32),
}

impl GrowthProfile {
    /// Lower bound on the valuation of a degree-`deg` coefficient.
    pub fn lower_bound(self, p: u64, deg: u32) -> u32 {
        match self {
            GrowthProfile::Tate | GrowthProfile::Bounded => 0,
            GrowthProfile::Scaled(m) => {
                let q = p.pow(m) as u32;
                deg.div_ceil(q)
            }
        }
    }

    /// Profile of a product.
    pub fn product(self, other: GrowthProfile) -> GrowthProfile {
        use GrowthProfile::*;
        match (self, other) {
            (Tate, Tate) => Tate,
            (Scaled(a), Scaled(b)) => Scaled(a.max(b)),
            (Scaled(_), Tate) | (Tate, Scaled(_)) => Tate,
            _ => Bounded,
        }
    }
}

/// Multivariate series truncated at total degree `D`, coefficients mod `p^N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncatedSeries {
    ring: PadicRing,
    nvars: usize,
    degree: u32,
    profile: GrowthProfile,
    coeffs: BTreeMap<Vec<u32>, u64>,
}

/// An element of `O[[t_1, ..., t_n]]` (bounded profile).
pub type IwasawaElement = TruncatedSeries;

fn total(e: &[u32]) -> u32 {
    e.iter().sum()
}

impl TruncatedSeries {
    pub fn zero(ring: PadicRing, nvars: usize, degree: u32, profile: GrowthProfile) -> Self {
        TruncatedSeries {
            ring,
            nvars,
            degree,
            profile,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(
        c: PadicNum,
        nvars: usize,
        degree: u32,
        profile: GrowthProfile,
    ) -> TruncatedSeries {
        let mut s = Self::zero(c.ring(), nvars, degree, profile);
        s.set(&vec![0; nvars], c);
        s
    }

    pub fn one(ring: PadicRing, nvars: usize, degree: u32, profile: GrowthProfile) -> Self {
        Self::constant(ring.one(), nvars, degree, profile)
    }

    /// The variable `T_i` (zero if `D = 0`).
    pub fn variable(
        ring: PadicRing,
        nvars: usize,
        i: usize,
        degree: u32,
        profile: GrowthProfile,
    ) -> Self {
        let mut s = Self::zero(ring, nvars, degree, profile);
        let mut e = vec![0; nvars];
        e[i] = 1;
        s.set(&e, ring.one());
        s
    }

    /// Build from `(exponent, integer coefficient)` pairs.
    pub fn from_terms(
        ring: PadicRing,
        nvars: usize,
        degree: u32,
        profile: GrowthProfile,
        terms: &[(Vec<u32>, i128)],
    ) -> Result<Self, SeriesError> {
        let mut s = Self::zero(ring, nvars, degree, profile);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(SeriesError::BadExponent(e.clone()));
            }
            let cur = s.coeff(e);
            s.set(e, cur + ring.elem(*c));
        }
        Ok(s)
    }

    /// One-variable series from a coefficient list.
    pub fn univariate(ring: PadicRing, coeffs: &[PadicNum], profile: GrowthProfile) -> Self {
        let degree = coeffs.len().saturating_sub(1) as u32;
        let mut s = Self::zero(ring, 1, degree, profile);
        for (k, c) in coeffs.iter().enumerate() {
            s.set(&[k as u32], *c);
        }
        s
    }

    pub fn ring(&self) -> PadicRing {
        self.ring
    }

    pub fn p(&self) -> u64 {
        self.ring.p()
    }

    pub fn precision(&self) -> u32 {
        self.ring.precision()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn profile(&self) -> GrowthProfile {
        self.profile
    }

    pub fn with_profile(mut self, profile: GrowthProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn coeff(&self, e: &[u32]) -> PadicNum {
        self.ring.elem(self.coeffs.get(e).copied().unwrap_or(0) as i128)
    }

    /// Set a coefficient; terms above the degree bound are dropped.
    pub fn set(&mut self, e: &[u32], c: PadicNum) {
        if total(e) > self.degree {
            return;
        }
        let c = c.reduce(self.ring.precision());
        let c = if c.precision() < self.ring.precision() {
            // Coefficient known to lower precision: lower the whole series.
            self.reduce_precision(c.precision());
            c
        } else {
            c
        };
        if c.is_zero() {
            self.coeffs.remove(e);
        } else {
            self.coeffs.insert(e.to_vec(), c.residue());
        }
    }

    /// Nonzero terms in lexicographic exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, PadicNum)> + '_ {
        self.coeffs
            .iter()
            .map(move |(e, r)| (e, self.ring.elem(*r as i128)))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn constant_term(&self) -> PadicNum {
        self.coeff(&vec![0; self.nvars])
    }

    /// Lower the coefficient precision in place.
    pub fn reduce_precision(&mut self, n: u32) {
        if n >= self.ring.precision() {
            return;
        }
        let ring = self.ring.with_precision(n.max(1)).expect("smaller modulus");
        let m = ring.modulus();
        self.coeffs = std::mem::take(&mut self.coeffs)
            .into_iter()
            .map(|(e, r)| (e, r % m))
            .filter(|(_, r)| *r != 0)
            .collect();
        self.ring = ring;
    }

    pub fn reduced(&self, n: u32) -> TruncatedSeries {
        let mut s = self.clone();
        s.reduce_precision(n);
        s
    }

    /// Drop all terms of total degree above `d`.
    pub fn truncate(&self, d: u32) -> TruncatedSeries {
        let mut s = self.clone();
        s.degree = d.min(self.degree);
        s.coeffs.retain(|e, _| total(e) <= s.degree);
        s
    }

    /// Check the growth profile against every stored coefficient.
    pub fn profile_holds(&self) -> bool {
        self.terms().all(|(e, c)| {
            c.valuation().lower_bound() >= self.profile.lower_bound(self.p(), total(e))
        })
    }

    fn check_compatible(&self, other: &TruncatedSeries) -> Result<(), SeriesError> {
        if self.nvars != other.nvars {
            return Err(SeriesError::VariableMismatch(self.nvars, other.nvars));
        }
        if self.p() != other.p() {
            return Err(SeriesError::PrimeMismatch(self.p(), other.p()));
        }
        Ok(())
    }

    fn common_ring(&self, other: &TruncatedSeries) -> PadicRing {
        if self.precision() <= other.precision() {
            self.ring
        } else {
            other.ring
        }
    }

    pub fn add(&self, other: &TruncatedSeries) -> Result<TruncatedSeries, SeriesError> {
        self.check_compatible(other)?;
        let ring = self.common_ring(other);
        let profile = if self.profile == other.profile {
            self.profile
        } else {
            GrowthProfile::Bounded
        };
        let mut out = Self::zero(ring, self.nvars, self.degree.min(other.degree), profile);
        for (e, c) in self.terms().chain(other.terms()) {
            let cur = out.coeff(e);
            out.set(e, cur + c.reduce(ring.precision()));
        }
        Ok(out)
    }

    pub fn neg(&self) -> TruncatedSeries {
        let mut out = self.clone();
        for r in out.coeffs.values_mut() {
            *r = (self.ring.modulus() - *r) % self.ring.modulus();
        }
        out
    }

    pub fn sub(&self, other: &TruncatedSeries) -> Result<TruncatedSeries, SeriesError> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: PadicNum) -> TruncatedSeries {
        let ring = if c.precision() < self.precision() {
            c.ring()
        } else {
            self.ring
        };
        let mut out = Self::zero(ring, self.nvars, self.degree, self.profile);
        for (e, x) in self.terms() {
            out.set(e, x * c);
        }
        out
    }

    /// Product truncated to the smaller degree bound.
    pub fn mul(&self, other: &TruncatedSeries) -> Result<TruncatedSeries, SeriesError> {
        self.check_compatible(other)?;
        let ring = self.common_ring(other);
        let degree = self.degree.min(other.degree);
        let m = ring.modulus() as u128;
        let mut acc: BTreeMap<Vec<u32>, u128> = BTreeMap::new();
        let mut key = vec![0u32; self.nvars];
        for (ea, &ra) in &self.coeffs {
            let da = total(ea);
            if da > degree {
                continue;
            }
            for (eb, &rb) in &other.coeffs {
                if da + total(eb) > degree {
                    continue;
                }
                for i in 0..self.nvars {
                    key[i] = ea[i] + eb[i];
                }
                let prod = (ra as u128 % m) * (rb as u128 % m) % m;
                let slot = acc.entry(key.clone()).or_insert(0);
                *slot = (*slot + prod) % m;
            }
        }
        let coeffs = acc
            .into_iter()
            .filter(|(_, r)| *r != 0)
            .map(|(e, r)| (e, r as u64))
            .collect();
        Ok(TruncatedSeries {
            ring,
            nvars: self.nvars,
            degree,
            profile: self.profile.product(other.profile),
            coeffs,
        })
    }

    pub fn pow(&self, e: u32) -> Result<TruncatedSeries, SeriesError> {
        let mut out = Self::one(self.ring, self.nvars, self.degree, self.profile);
        for _ in 0..e {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    /// Composition `f(g)` for a one-variable `f`, by Horner's rule.
    ///
    /// Requires `v_p(g(0)) >= 1`. When `g(0) != 0` the terms of `f` above its
    /// degree bound would contribute at valuation `>= (D_f + 1 - e)·v(g(0))` in
    /// degree `e`; the result precision is lowered to that certified bound.
    pub fn compose(&self, g: &TruncatedSeries) -> Result<TruncatedSeries, SeriesError> {
        let g0 = g.constant_term();
        let v0 = g0.valuation();
        if !g0.is_zero() && v0.lower_bound() < 1 {
            return Err(SeriesError::DivergentComposition);
        }
        let mut out = self.horner(g)?;
        if !g0.is_zero() {
            let v0 = v0.lower_bound();
            let slack = (self.degree + 1).saturating_sub(out.degree);
            out.reduce_precision((slack * v0).max(1));
        }
        Ok(out)
    }

    /// Composition treating `f` as an exact polynomial (no truncation error).
    pub fn compose_polynomial(&self, g: &TruncatedSeries) -> Result<TruncatedSeries, SeriesError> {
        self.horner(g)
    }

    fn horner(&self, g: &TruncatedSeries) -> Result<TruncatedSeries, SeriesError> {
        if self.nvars != 1 {
            return Err(SeriesError::VariableMismatch(self.nvars, 1));
        }
        if self.p() != g.p() {
            return Err(SeriesError::PrimeMismatch(self.p(), g.p()));
        }
        let ring = self.common_ring(g);
        let mut acc = Self::zero(ring, g.nvars, g.degree, g.profile);
        for k in (0..=self.degree).rev() {
            acc = acc.mul(g)?;
            let c = self.coeff(&[k]);
            let unit = Self::constant(c.reduce(ring.precision()), g.nvars, g.degree, g.profile);
            acc = acc.add(&unit)?;
        }
        Ok(acc.with_profile(self.profile.product(g.profile)))
    }

    /// `exp(g)` for `g(0) = 0`, computed with guard digits so that the
    /// divisions by `n!` are exact; fails if a division is not exact.
    pub fn exp_of(g: &TruncatedSeries) -> Result<TruncatedSeries, SeriesError> {
        if !g.constant_term().is_zero() {
            return Err(SeriesError::DivergentComposition);
        }
        let n = g.precision();
        let p = g.p();
        let guard = crate::padic::vp_factorial(p, g.degree as u64);
        let work = g.ring.with_precision(n + guard)?;
        let lifted = g.lift_to(work)?;
        let mut acc = Self::one(work, g.nvars, g.degree, g.profile);
        let mut term = acc.clone();
        for k in 1..=g.degree {
            term = term.mul(&lifted)?.div_int(k as i128)?;
            acc = acc.add(&term)?;
        }
        Ok(acc.reduced(n))
    }

    fn lift_to(&self, ring: PadicRing) -> Result<TruncatedSeries, SeriesError> {
        let mut out = Self::zero(ring, self.nvars, self.degree, self.profile);
        for (e, c) in self.terms() {
            out.set(e, c.lift(ring.precision())?);
        }
        Ok(out)
    }

    /// Divide every coefficient by an integer (exactly).
    pub fn div_int(&self, k: i128) -> Result<TruncatedSeries, SeriesError> {
        let mut ring = self.ring;
        let mut vals = Vec::new();
        for (e, c) in self.terms() {
            let q = c.div_int(k)?;
            if q.precision() < ring.precision() {
                ring = q.ring();
            }
            vals.push((e.clone(), q));
        }
        let drop = crate::padic::vp_int(self.p(), k).unwrap_or(0);
        if self.precision() > drop {
            ring = ring.with_precision(ring.precision().min(self.precision() - drop))?;
        }
        let mut out = Self::zero(ring, self.nvars, self.degree, self.profile);
        for (e, q) in vals {
            out.set(&e, q.reduce(ring.precision()));
        }
        Ok(out)
    }

    /// Evaluate at a point of the convergence disc.
    ///
    /// Returns the value together with its certified precision, which accounts
    /// for the terms beyond the degree bound.
    pub fn eval(&self, point: &[PadicNum]) -> Result<PadicNum, SeriesError> {
        if point.len() != self.nvars {
            return Err(SeriesError::PointArity {
                got: point.len(),
                expected: self.nvars,
            });
        }
        let needs = match self.profile {
            GrowthProfile::Bounded => 1,
            GrowthProfile::Tate | GrowthProfile::Scaled(_) => 0,
        };
        let mut vmin = u32::MAX;
        for (i, x) in point.iter().enumerate() {
            if x.p() != self.p() {
                return Err(SeriesError::PrimeMismatch(self.p(), x.p()));
            }
            let v = x.valuation();
            if v.lower_bound() < needs {
                return Err(SeriesError::OutsideDisc {
                    index: i,
                    valuation: v.to_string(),
                });
            }
            vmin = vmin.min(v.lower_bound());
        }
        let mut prec = point
            .iter()
            .map(|x| x.precision())
            .fold(self.precision(), u32::min);
        let tail = match self.profile {
            GrowthProfile::Bounded => (self.degree + 1).saturating_mul(vmin),
            GrowthProfile::Scaled(m) => {
                GrowthProfile::Scaled(m).lower_bound(self.p(), self.degree + 1)
            }
            GrowthProfile::Tate => u32::MAX,
        };
        prec = prec.min(tail.max(1));
        let ring = self.ring.with_precision(prec)?;
        let mut acc = ring.zero();
        for (e, c) in self.terms() {
            let mut t = c.reduce(prec);
            for (x, k) in point.iter().zip(e) {
                t = t * x.reduce(prec).pow(*k as u64);
            }
            acc = acc + t;
        }
        Ok(acc)
    }

    /// Serializable record with lexicographically sorted entries.
    pub fn to_record(&self) -> SeriesRecord {
        SeriesRecord {
            p: self.p(),
            n: self.precision(),
            d: self.nvars,
            degree: self.degree,
            profile: self.profile,
            entries: self
                .coeffs
                .iter()
                .map(|(e, r)| (e.clone(), *r))
                .collect(),
        }
    }

    pub fn from_record(rec: &SeriesRecord) -> Result<TruncatedSeries, SeriesError> {
        let ring = PadicRing::new(rec.p, rec.n)?;
        let mut s = Self::zero(ring, rec.d, rec.degree, rec.profile);
        for (e, r) in &rec.entries {
            if e.len() != rec.d {
                return Err(SeriesError::BadExponent(e.clone()));
            }
            if *r >= ring.modulus() {
                return Err(SeriesError::Malformed(format!(
                    "residue {r} not reduced mod {}",
                    ring.modulus()
                )));
            }
            s.set(e, ring.elem(*r as i128));
        }
        Ok(s)
    }
}

/// JSON form `{p, N, d, D, profile, entries: [[exponents, residue]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub p: u64,
    #[serde(rename = "N")]
    pub n: u32,
    pub d: usize,
    #[serde(rename = "D")]
    pub degree: u32,
    pub profile: GrowthProfile,
    pub entries: Vec<(Vec<u32>, u64)>,
}

/// `(1 + t)^a = sum binom(a, n) t^n` in one variable, for `a` in `Z_p`.
///
/// Binomial coefficients of a p-adic exponent are computed with guard digits;
/// `binom(a, n)` is only determined mod `p^(N - floor(log_p n))` by `a mod p^N`,
/// so the returned series carries that reduced precision.
pub fn binomial_series(a: &PadicNum, degree: u32) -> Result<TruncatedSeries, SeriesError> {
    let p = a.p();
    let n = a.precision();
    let mut log_loss = 0;
    while p.pow(log_loss + 1) <= degree.max(1) as u64 {
        log_loss += 1;
    }
    let guard = crate::padic::vp_factorial(p, degree as u64);
    let work = PadicRing::new(p, n + guard)?;
    let a_w = a.lift(n + guard)?;
    let out_prec = n.saturating_sub(log_loss).max(1);
    let out_ring = PadicRing::new(p, out_prec)?;
    let mut coeffs = Vec::with_capacity(degree as usize + 1);
    let mut c = work.one();
    coeffs.push(out_ring.one());
    for k in 1..=degree {
        c = (c * (a_w - work.elem(k as i128 - 1))).div_int(k as i128)?;
        coeffs.push(c.reduce(out_prec));
    }
    Ok(TruncatedSeries::univariate(
        out_ring,
        &coeffs,
        GrowthProfile::Bounded,
    ))
}

/// Embed a one-variable series as a series in variable `i` of `nvars`.
pub fn embed_variable(
    s: &TruncatedSeries,
    nvars: usize,
    i: usize,
) -> Result<TruncatedSeries, SeriesError> {
    if s.nvars() != 1 {
        return Err(SeriesError::VariableMismatch(s.nvars(), 1));
    }
    let mut out = TruncatedSeries::zero(s.ring(), nvars, s.degree(), s.profile());
    for (e, c) in s.terms() {
        let mut k = vec![0; nvars];
        k[i] = e[0];
        out.set(&k, c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(p: u64, n: u32) -> PadicRing {
        PadicRing::new(p, n).unwrap()
    }

    fn one_var(r: PadicRing, d: u32, cs: &[i128]) -> TruncatedSeries {
        let v: Vec<PadicNum> = cs.iter().map(|c| r.elem(*c)).collect();
        let mut s = TruncatedSeries::univariate(r, &v, GrowthProfile::Bounded);
        s.degree = d;
        s
    }

    #[test]
    fn product_of_conjugates() {
        let r = ring(5, 6);
        let a = one_var(r, 4, &[1, 1]);
        let b = one_var(r, 4, &[1, -1]);
        let c = a.mul(&b).unwrap();
        assert_eq!(c, one_var(r, 4, &[1, 0, -1]));
        let one = TruncatedSeries::one(r, 1, 4, GrowthProfile::Bounded);
        assert_eq!(a.mul(&one).unwrap(), a);
    }

    #[test]
    fn schoolbook_convolution() {
        let r = ring(5, 6);
        let a = [3i128, 7, 11, 13];
        let b = [2i128, 5, 17, 19];
        let sa = one_var(r, 6, &a);
        let sb = one_var(r, 6, &b);
        let prod = sa.mul(&sb).unwrap();
        for k in 0..=6usize {
            let mut want = 0i128;
            for i in 0..=k {
                if i < 4 && k - i < 4 {
                    want += a[i] * b[k - i];
                }
            }
            assert_eq!(prod.coeff(&[k as u32]), r.elem(want), "degree {k}");
        }
    }

    #[test]
    fn compose_examples() {
        let r = ring(5, 6);
        let g = one_var(r, 5, &[0, 3, 1, 4]);
        let t = one_var(r, 5, &[0, 1]);
        assert_eq!(t.compose(&g).unwrap(), g);
        let t2 = one_var(r, 5, &[0, 0, 1]);
        let pt = one_var(r, 5, &[0, 5]);
        assert_eq!(t2.compose(&pt).unwrap(), one_var(r, 5, &[0, 0, 25]));
        let unit_inner = one_var(r, 5, &[1, 1]);
        assert_eq!(
            t2.compose(&unit_inner),
            Err(SeriesError::DivergentComposition)
        );
        assert!(t2.compose_polynomial(&unit_inner).is_ok());
    }

    #[test]
    fn exp_of_p_log_is_binomial_power() {
        // exp(p log(1+T)) = (1+T)^p to degree 6 at p = 5.
        let p = 5u64;
        let r = ring(p, 8);
        let mut log_coeffs = vec![r.zero()];
        for k in 1..=6i128 {
            let c = r.elem(p as i128 * if k % 2 == 1 { 1 } else { -1 });
            log_coeffs.push(c.div_int(k).unwrap().lift(8).unwrap());
        }
        let g = TruncatedSeries::univariate(r, &log_coeffs, GrowthProfile::Bounded);
        let e = TruncatedSeries::exp_of(&g).unwrap();
        for k in 0..=6u32 {
            let binom = (0..k).fold(1i128, |acc, i| acc * (p as i128 - i as i128))
                / (1..=k as i128).product::<i128>();
            assert!(
                e.coeff(&[k]).eq_mod(&r.elem(binom), e.precision()),
                "degree {k}"
            );
        }
    }

    #[test]
    fn eval_examples() {
        let r = ring(5, 6);
        let t = TruncatedSeries::variable(r, 1, 0, 10, GrowthProfile::Bounded);
        assert_eq!(t.eval(&[r.elem(5)]).unwrap(), r.elem(5));
        let c = TruncatedSeries::constant(r.elem(42), 1, 10, GrowthProfile::Bounded);
        assert_eq!(c.eval(&[r.elem(5)]).unwrap(), r.elem(42));
        let geo = one_var(r, 10, &[1; 11]);
        let want: i128 = (0..=10).map(|k| 5i128.pow(k)).sum();
        assert_eq!(geo.eval(&[r.elem(5)]).unwrap(), r.elem(want));
        assert!(matches!(
            geo.eval(&[r.elem(2)]),
            Err(SeriesError::OutsideDisc { .. })
        ));
    }

    #[test]
    fn binomial_series_matches_integer_powers() {
        let r = ring(3, 8);
        let s = binomial_series(&r.elem(4), 6).unwrap();
        let want = [1, 4, 6, 4, 1, 0, 0];
        for (k, w) in want.iter().enumerate() {
            assert_eq!(s.coeff(&[k as u32]).signed(), *w);
        }
        assert_eq!(s.precision(), 7);
    }

    #[test]
    fn record_round_trip_is_sorted() {
        let r = ring(7, 3);
        let s = TruncatedSeries::from_terms(
            r,
            2,
            4,
            GrowthProfile::Tate,
            &[(vec![1, 0], 3), (vec![0, 2], 5), (vec![0, 0], 1)],
        )
        .unwrap();
        let rec = s.to_record();
        let exps: Vec<_> = rec.entries.iter().map(|(e, _)| e.clone()).collect();
        assert_eq!(exps, vec![vec![0, 0], vec![0, 2], vec![1, 0]]);
        let json = serde_json::to_string(&rec).unwrap();
        assert!(json.contains("\"N\":3"));
        let back: SeriesRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(TruncatedSeries::from_record(&back).unwrap(), s);
    }

    #[test]
    fn scaled_profile_scan() {
        let r = ring(3, 6);
        let good = TruncatedSeries::from_terms(
            r,
            1,
            6,
            GrowthProfile::Scaled(1),
            &[(vec![0], 1), (vec![3], 3), (vec![4], 9)],
        )
        .unwrap();
        assert!(good.profile_holds());
        let bad = TruncatedSeries::from_terms(r, 1, 6, GrowthProfile::Scaled(1), &[(vec![4], 3)])
            .unwrap();
        assert!(!bad.profile_holds());
    }
}
