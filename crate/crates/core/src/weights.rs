//! Characters of `(Z_p^x)^n` in split form `omega(z)^a <z>^s`, weight discs
//! with their universal characters, and the weight bookkeeping of the three
//! wired examples.
//!
//! A family exponent over a disc with variables `t_1..t_n` stands for the
//! character `z -> omega(z)^a <z>^c prod_i (1 + t_i)^(e_i l(z))` where
//! `l(z) = log<z> / log(1 + p)`. At the point `t_i = (1+p)^(s_i) - 1` this is
//! `omega(z)^a <z>^(c + sum e_i s_i)`.

use std::fmt;

use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::padic::{self, PadicError, PadicNum, PadicRing};
use crate::series::{binomial_series, embed_variable, GrowthProfile, SeriesError, TruncatedSeries};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WeightError {
    #[error("coordinate {0} is not a unit")]
    NonUnit(usize),
    #[error("expected {expected} coordinates, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("parity violation: k1 + k2 + k3 = {0} is odd")]
    Parity(i64),
    #[error("example {0} needs {1} weight components")]
    ComponentCount(ExampleTag, usize),
    #[error("torsion exponent is not integral after the linear combination")]
    NonIntegralTorsion,
    #[error("denominator {0} is not invertible mod p")]
    BadDenominator(i64),
    #[error("weight {0:?} is outside the disc")]
    OutsideDisc(Vec<i64>),
    #[error("malformed weight literal: {0}")]
    Parse(String),
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// The wired spherical pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ExampleTag {
    Bf,
    Tp,
    Gsp4,
}

impl fmt::Display for ExampleTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExampleTag::Bf => "BF",
            ExampleTag::Tp => "TP",
            ExampleTag::Gsp4 => "GSP4",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ExampleTag {
    type Err = WeightError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bf" => Ok(ExampleTag::Bf),
            "tp" => Ok(ExampleTag::Tp),
            "gsp4" => Ok(ExampleTag::Gsp4),
            other => Err(WeightError::Parse(format!("unknown example tag {other}"))),
        }
    }
}

/// Exponent of one component on the one-unit part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Exponent {
    Scalar(PadicNum),
    /// `center + sum_i coeffs[i] * (disc variable i)`, expanded to degree `degree`.
    Family {
        center: PadicNum,
        coeffs: Vec<PadicNum>,
        degree: u32,
    },
}

impl Exponent {
    pub fn center(&self) -> PadicNum {
        match self {
            Exponent::Scalar(s) => *s,
            Exponent::Family { center, .. } => *center,
        }
    }
}

/// Value of a character: a scalar, or an Iwasawa-algebra element over a disc.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CharValue {
    Scalar(PadicNum),
    Series(TruncatedSeries),
}

impl CharValue {
    pub fn as_scalar(&self) -> Option<PadicNum> {
        match self {
            CharValue::Scalar(s) => Some(*s),
            CharValue::Series(_) => None,
        }
    }

    pub fn mul(&self, other: &CharValue) -> Result<CharValue, WeightError> {
        Ok(match (self, other) {
            (CharValue::Scalar(a), CharValue::Scalar(b)) => CharValue::Scalar(*a * *b),
            (CharValue::Scalar(a), CharValue::Series(s))
            | (CharValue::Series(s), CharValue::Scalar(a)) => CharValue::Series(s.scale(*a)),
            (CharValue::Series(a), CharValue::Series(b)) => CharValue::Series(a.mul(b)?),
        })
    }

    /// Specialize a series value at a disc point (scalars pass through).
    pub fn at(&self, point: &[PadicNum]) -> Result<PadicNum, WeightError> {
        match self {
            CharValue::Scalar(s) => Ok(*s),
            CharValue::Series(f) => Ok(f.eval(point)?),
        }
    }
}

/// A continuous character of `(Z_p^x)^n` in split form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Character {
    p: u64,
    /// Integer representatives of the omega-exponents (reduced mod `p-1` on use).
    torsion: Vec<i64>,
    exponents: Vec<Exponent>,
    level: u32,
}

fn ratio_to_padic(r: Ratio<i64>, ring: PadicRing) -> Result<PadicNum, WeightError> {
    let den = *r.denom();
    if den % ring.p() as i64 == 0 {
        return Err(WeightError::BadDenominator(den));
    }
    Ok(ring.elem(*r.numer() as i128) * ring.elem(den as i128).inv()?)
}

impl Character {
    pub fn new(p: u64, torsion: Vec<i64>, exponents: Vec<Exponent>, level: u32) -> Self {
        assert_eq!(torsion.len(), exponents.len());
        Character {
            p,
            torsion,
            exponents,
            level,
        }
    }

    /// The algebraic weight `z -> prod z_i^(k_i)`.
    pub fn algebraic(ring: PadicRing, ks: &[i64]) -> Self {
        Character {
            p: ring.p(),
            torsion: ks.to_vec(),
            exponents: ks
                .iter()
                .map(|k| Exponent::Scalar(ring.elem(*k as i128)))
                .collect(),
            level: 0,
        }
    }

    pub fn trivial(ring: PadicRing, n: usize) -> Self {
        Self::algebraic(ring, &vec![0; n])
    }

    pub fn rank(&self) -> usize {
        self.torsion.len()
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn torsion(&self) -> &[i64] {
        &self.torsion
    }

    pub fn exponents(&self) -> &[Exponent] {
        &self.exponents
    }

    pub fn with_level(mut self, m: u32) -> Self {
        self.level = m;
        self
    }

    /// Integer weights if every exponent is a scalar agreeing with its torsion part.
    pub fn algebraic_weights(&self) -> Option<Vec<i64>> {
        self.exponents
            .iter()
            .zip(&self.torsion)
            .map(|(e, t)| match e {
                Exponent::Scalar(s) if s.signed() == *t as i128 => Some(*t),
                _ => None,
            })
            .collect()
    }

    /// Value of component `i` at a unit `z`.
    pub fn component(&self, i: usize, z: &PadicNum) -> Result<CharValue, WeightError> {
        if !z.is_unit() {
            return Err(WeightError::NonUnit(i));
        }
        let omega = padic::teichmuller(z)?;
        let a = self.torsion[i].rem_euclid(self.p as i64 - 1) as u64;
        let tors = omega.pow(a);
        match &self.exponents[i] {
            Exponent::Scalar(s) => Ok(CharValue::Scalar(tors * padic::one_unit_pow(z, s)?)),
            Exponent::Family {
                center,
                coeffs,
                degree,
            } => {
                let base = tors * padic::one_unit_pow(z, center)?;
                let ell = log_ratio(z)?;
                let n = coeffs.len();
                let ring = base.ring();
                let mut acc = TruncatedSeries::constant(base, n, *degree, GrowthProfile::Bounded);
                for (j, c) in coeffs.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    let one_var = binomial_series(&(*c * ell), *degree)?;
                    let embedded = embed_variable(&one_var, n, j)?;
                    acc = acc.mul(&embedded)?;
                }
                if acc.precision() > ring.precision() {
                    acc.reduce_precision(ring.precision());
                }
                Ok(CharValue::Series(acc))
            }
        }
    }

    /// Value of component `i` at `z` in the scaled disc coordinates
    /// `s_j = t_j / p^(m+1)`, where `m` is the level of the character.
    ///
    /// The coefficient of `s^n` in `(1+t)^(a)` is `binom(a, n) p^(n(m+1))`.
    /// Since `binom(., n)` is Lipschitz with constant `p^floor(log_p n)`, the
    /// digit lost by `l(z)` is absorbed by `p^(n(m+1))`, and the scaled
    /// expansion is correct to the full precision of `z`. The returned series
    /// has Tate profile: the dropped tail has valuation above `(D+1)(m+1)`.
    pub fn component_scaled(&self, i: usize, z: &PadicNum) -> Result<CharValue, WeightError> {
        let (center, coeffs, degree) = match &self.exponents[i] {
            Exponent::Scalar(_) => return self.component(i, z),
            Exponent::Family {
                center,
                coeffs,
                degree,
            } => (center, coeffs, *degree),
        };
        if !z.is_unit() {
            return Err(WeightError::NonUnit(i));
        }
        let ring = z.ring();
        let omega = padic::teichmuller(z)?;
        let a = self.torsion[i].rem_euclid(self.p as i64 - 1) as u64;
        let base = omega.pow(a) * padic::one_unit_pow(z, center)?;
        let ell = log_ratio(z)?;
        let n = coeffs.len();
        let tail = (degree + 1).saturating_mul(self.level + 1);
        let prec = ring.precision().min(tail);
        let mut acc = TruncatedSeries::constant(base.reduce(prec), n, degree, GrowthProfile::Tate);
        for (j, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let one_var = scaled_binomial(&(*c * ell), degree, self.level + 1, prec)?;
            acc = acc.mul(&embed_variable(&one_var, n, j)?)?;
        }
        Ok(CharValue::Series(acc))
    }

    /// Like [`Character::eval`], with family values in scaled disc coordinates.
    pub fn eval_scaled(&self, z: &[PadicNum]) -> Result<CharValue, WeightError> {
        if z.len() != self.rank() || z.is_empty() {
            return Err(WeightError::Arity {
                expected: self.rank(),
                got: z.len(),
            });
        }
        let mut acc = self.component_scaled(0, &z[0])?;
        for (i, zi) in z.iter().enumerate().skip(1) {
            acc = acc.mul(&self.component_scaled(i, zi)?)?;
        }
        Ok(acc)
    }

    /// Multiplicative character value at a torus point given by unit coordinates.
    pub fn eval(&self, z: &[PadicNum]) -> Result<CharValue, WeightError> {
        if z.len() != self.rank() {
            return Err(WeightError::Arity {
                expected: self.rank(),
                got: z.len(),
            });
        }
        let mut acc: Option<CharValue> = None;
        for (i, zi) in z.iter().enumerate() {
            let v = self.component(i, zi)?;
            acc = Some(match acc {
                None => v,
                Some(a) => a.mul(&v)?,
            });
        }
        match acc {
            Some(v) => Ok(v),
            None => Err(WeightError::Arity {
                expected: 1,
                got: 0,
            }),
        }
    }

    /// `sum_j coeffs[j] * chars[j]` in additive notation; all inputs of rank 1.
    ///
    /// Rational coefficients must have denominators prime to `p`, and the
    /// omega-exponents must combine to an integer.
    pub fn combine(
        ring: PadicRing,
        parts: &[(Ratio<i64>, &Character, usize)],
    ) -> Result<(i64, Exponent), WeightError> {
        let mut tors = Ratio::<i64>::zero();
        let mut center = ring.zero();
        let mut coeffs: Option<Vec<PadicNum>> = None;
        let mut degree = u32::MAX;
        for (c, ch, i) in parts {
            tors += *c * Ratio::from_integer(ch.torsion[*i]);
            let cp = ratio_to_padic(*c, ring)?;
            match &ch.exponents[*i] {
                Exponent::Scalar(s) => center = center + cp * s.reduce(ring.precision()),
                Exponent::Family {
                    center: c0,
                    coeffs: cs,
                    degree: d,
                } => {
                    center = center + cp * c0.reduce(ring.precision());
                    degree = degree.min(*d);
                    let acc = coeffs.get_or_insert_with(|| vec![ring.zero(); cs.len()]);
                    for (a, b) in acc.iter_mut().zip(cs) {
                        *a = *a + cp * b.reduce(ring.precision());
                    }
                }
            }
        }
        if !tors.is_integer() {
            return Err(WeightError::NonIntegralTorsion);
        }
        let exp = match coeffs {
            None => Exponent::Scalar(center),
            Some(coeffs) => Exponent::Family {
                center,
                coeffs,
                degree,
            },
        };
        Ok((tors.to_integer(), exp))
    }

    /// Apply a rational matrix `m` (rows = output components) to the components.
    pub fn linear_image(
        &self,
        ring: PadicRing,
        m: &[Vec<Ratio<i64>>],
    ) -> Result<Character, WeightError> {
        let mut torsion = Vec::new();
        let mut exponents = Vec::new();
        for row in m {
            if row.len() != self.rank() {
                return Err(WeightError::Arity {
                    expected: self.rank(),
                    got: row.len(),
                });
            }
            let parts: Vec<_> = row
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(j, c)| (*c, self, j))
                .collect();
            if parts.is_empty() {
                torsion.push(0);
                exponents.push(Exponent::Scalar(ring.zero()));
            } else {
                let (t, e) = Self::combine(ring, &parts)?;
                torsion.push(t);
                exponents.push(e);
            }
        }
        Ok(Character {
            p: self.p,
            torsion,
            exponents,
            level: self.level,
        })
    }
}

/// `l(z) = log<z> / log(1+p)`, known to precision `N - 1`.
pub fn log_ratio(z: &PadicNum) -> Result<PadicNum, WeightError> {
    let ring = z.ring();
    let lz = padic::log_one_unit(&padic::one_unit_part(z)?)?;
    let lg = padic::log_one_unit(&(ring.one() + ring.elem(ring.p() as i128)))?;
    let num = lz.div_p_power(1)?;
    let den = lg.div_p_power(1)?;
    Ok(num * den.inv()?)
}

/// `sum_n binom(a, n) p^(n r) s^n` to degree `degree`, with `a` known to its
/// own precision and the result reduced to `prec` digits.
fn scaled_binomial(
    a: &PadicNum,
    degree: u32,
    r: u32,
    prec: u32,
) -> Result<TruncatedSeries, WeightError> {
    let p = a.p();
    let guard = padic::vp_factorial(p, degree as u64);
    let work = PadicRing::new(p, prec + guard)?;
    let a_w = a.lift(prec + guard)?;
    let out = PadicRing::new(p, prec)?;
    let mut coeffs = vec![out.one()];
    let mut c = work.one();
    for k in 1..=degree {
        c = (c * (a_w - work.elem(k as i128 - 1))).div_int(k as i128)?;
        let shift = (k as u64 * r as u64).min(prec as u64) as u32;
        coeffs.push(c.reduce(prec).mul_p_power(shift));
    }
    Ok(TruncatedSeries::univariate(out, &coeffs, GrowthProfile::Tate))
}

/// Whether `v_p(kappa(1+p) - 1) > 1/(p^m (p-1))` holds for every component.
///
/// For a family this is checked at the center; every point of a disc has
/// `v_p(kappa(1+p) - 1) >= 1`.
pub fn is_m_analytic(kappa: &Character, m: u32) -> bool {
    let p = kappa.p;
    let bound = Ratio::new(1i64, (p.pow(m) * (p - 1)) as i64);
    kappa.exponents.iter().all(|e| {
        let s = e.center();
        let ring = s.ring();
        let gamma = ring.one() + ring.elem(p as i128);
        let value = match padic::one_unit_pow(&gamma, &s) {
            Ok(v) => v,
            Err(_) => return false,
        };
        let v = (value - ring.one()).valuation().lower_bound() as i64;
        Ratio::from_integer(v) > bound
    })
}

fn r(n: i64) -> Ratio<i64> {
    Ratio::from_integer(n)
}

/// Exponent matrix of the wired map `omega` for an example: row `i` gives the
/// `i`-th H-component of `lambda o omega` in terms of the G-components.
///
/// * BF: G-weight `(k, k', j)`, H-torus `diag(x, x^-1 d)`; the pullback is
///   `x^(k+k'-2j) d^j`.
/// * TP: G-weight `(k1, k2, k3)`, H-torus `diag(x e, x^-1 e)`; the pullback is
///   `e^(k1+k2+k3)`.
/// * GSP4: G-exponents on `(x1..x5)`, H-exponents on `(y1..y5)`; reproduces the
///   weight `lambda^[c,d]` from `lambda^[a,b,q,r]`.
pub fn omega_matrix(tag: ExampleTag) -> Vec<Vec<Ratio<i64>>> {
    let rows: Vec<Vec<i64>> = match tag {
        ExampleTag::Bf => vec![vec![1, 1, -2], vec![0, 0, 1]],
        ExampleTag::Tp => vec![vec![0, 0, 0], vec![1, 1, 1]],
        ExampleTag::Gsp4 => vec![
            vec![1, 1, 0, -1, -2],
            vec![0, 0, 0, 1, 0],
            vec![0, 0, 1, 0, 2],
            vec![0, 0, 0, -1, 0],
            vec![0, 0, 0, 0, 0],
        ],
    };
    rows.into_iter()
        .map(|row| row.into_iter().map(r).collect())
        .collect()
}

pub fn g_rank(tag: ExampleTag) -> usize {
    match tag {
        ExampleTag::Bf | ExampleTag::Tp => 3,
        ExampleTag::Gsp4 => 5,
    }
}

/// The torus map `omega`: an H-torus point to the corresponding G-torus point,
/// `x_j = prod_i y_i^(M[i][j])`.
pub fn omega_torus_map(tag: ExampleTag, y: &[PadicNum]) -> Result<Vec<PadicNum>, WeightError> {
    let m = omega_matrix(tag);
    if y.len() != m.len() {
        return Err(WeightError::Arity {
            expected: m.len(),
            got: y.len(),
        });
    }
    let ring = y[0].ring();
    let mut x = vec![ring.one(); g_rank(tag)];
    for (i, row) in m.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            x[j] = x[j] * y[i].pow_signed(c.to_integer())?;
        }
    }
    Ok(x)
}

/// `Omega(lambda) = lambda o omega` for a wired example.
pub fn omega_pullback(kappa: &Character, tag: ExampleTag) -> Result<Character, WeightError> {
    if kappa.rank() != g_rank(tag) {
        return Err(WeightError::ComponentCount(tag, g_rank(tag)));
    }
    let ring = kappa.exponents[0].center().ring();
    kappa.linear_image(ring, &omega_matrix(tag))
}

/// Starred weights: BF gives `(k1 - k3, k2 - k3)`; TP gives
/// `k*_i = (k_j + k_l - k_i) / 2`, so that `k*_a + k*_b = k_c` for `{a,b,c} = {1,2,3}`.
pub fn star_weights(kappa: &Character, tag: ExampleTag) -> Result<Character, WeightError> {
    if kappa.rank() != 3 || tag == ExampleTag::Gsp4 {
        return Err(WeightError::ComponentCount(tag, 3));
    }
    let ring = kappa.exponents[0].center().ring();
    let h = Ratio::new(1, 2);
    let m: Vec<Vec<Ratio<i64>>> = match tag {
        ExampleTag::Bf => vec![vec![r(1), r(0), r(-1)], vec![r(0), r(1), r(-1)]],
        _ => {
            let sum: i64 = kappa.torsion.iter().sum();
            if sum % 2 != 0 {
                return Err(WeightError::Parity(sum));
            }
            vec![vec![-h, h, h], vec![h, -h, h], vec![h, h, -h]]
        }
    };
    kappa.linear_image(ring, &m)
}

/// A wide-open disc of weights centred at an integer weight, at level `m`.
///
/// Its points are the `t` with `v_p(t_i) >= 1 + m`; the algebraic weight `k`
/// sits at `t_i = (1+p)^(k_i - c_i) - 1` when `k_i = c_i mod (p-1)p^m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightDisc {
    ring: PadicRing,
    center: Vec<i64>,
    level: u32,
    degree: u32,
}

impl WeightDisc {
    pub fn new(ring: PadicRing, center: Vec<i64>, level: u32, degree: u32) -> Self {
        WeightDisc {
            ring,
            center,
            level,
            degree,
        }
    }

    pub fn center(&self) -> &[i64] {
        &self.center
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn ring(&self) -> PadicRing {
        self.ring
    }

    /// Replace the disc by the smaller one at level `m + 1`.
    pub fn shrink(&self) -> WeightDisc {
        WeightDisc {
            level: self.level + 1,
            ..self.clone()
        }
    }

    pub fn center_character(&self) -> Character {
        Character::algebraic(self.ring, &self.center).with_level(self.level)
    }

    /// The universal character `k_U` of the disc.
    pub fn universal(&self) -> Character {
        let n = self.center.len();
        let exponents = (0..n)
            .map(|i| {
                let mut coeffs = vec![self.ring.zero(); n];
                coeffs[i] = self.ring.one();
                Exponent::Family {
                    center: self.ring.elem(self.center[i] as i128),
                    coeffs,
                    degree: self.degree,
                }
            })
            .collect();
        Character::new(self.ring.p(), self.center.clone(), exponents, self.level)
    }

    /// Disc coordinates of an algebraic weight.
    pub fn point_of(&self, weight: &[i64]) -> Result<Vec<PadicNum>, WeightError> {
        if weight.len() != self.center.len() {
            return Err(WeightError::Arity {
                expected: self.center.len(),
                got: weight.len(),
            });
        }
        let p = self.ring.p() as i64;
        let step = (p - 1) * p.pow(self.level);
        let gamma = self.ring.one() + self.ring.elem(p as i128);
        weight
            .iter()
            .zip(&self.center)
            .map(|(k, c)| {
                if (k - c).rem_euclid(step) != 0 {
                    return Err(WeightError::OutsideDisc(weight.to_vec()));
                }
                Ok(gamma.pow_signed(k - c)? - self.ring.one())
            })
            .collect()
    }

    /// Scaled coordinates `s_i = t_i / p^(m+1)` of an algebraic weight.
    pub fn scaled_point_of(&self, weight: &[i64]) -> Result<Vec<PadicNum>, WeightError> {
        let r = self.level + 1;
        let n = self.ring.precision();
        let wide = WeightDisc {
            ring: self.ring.with_precision(n + r)?,
            ..self.clone()
        };
        wide.point_of(weight)?
            .iter()
            .map(|x| Ok(x.div_p_power(r)?.reduce(n)))
            .collect()
    }

    /// Whether a disc point lies in this disc.
    pub fn contains(&self, t: &[PadicNum]) -> bool {
        t.len() == self.center.len()
            && t
                .iter()
                .all(|x| x.valuation().lower_bound() > self.level)
    }

    /// Algebraic weights `center + j (p-1) p^m` in the disc.
    pub fn algebraic_points(&self, count: usize) -> Vec<Vec<i64>> {
        let p = self.ring.p() as i64;
        let step = (p - 1) * p.pow(self.level);
        (0..count as i64)
            .map(|j| self.center.iter().map(|c| c + j * step).collect())
            .collect()
    }
}

/// Parse `(a,b,...)`, `k=(a,b,...)` or `k=(a,b,...)@p^N`; returns the integers
/// and the optional `(p, N)` suffix.
pub fn parse_weight_literal(s: &str) -> Result<(Vec<i64>, Option<(u64, u32)>), WeightError> {
    let bad = || WeightError::Parse(s.to_string());
    let body = s.trim();
    let body = body.strip_prefix("k=").unwrap_or(body);
    let (tuple, suffix) = match body.split_once('@') {
        Some((t, suf)) => (t, Some(suf)),
        None => (body, None),
    };
    let tuple = tuple.trim();
    let inner = tuple
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .unwrap_or(tuple);
    let ks = inner
        .split(',')
        .map(|x| x.trim().parse::<i64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()?;
    let pn = match suffix {
        None => None,
        Some(suf) => {
            let (p, n) = suf.split_once('^').ok_or_else(bad)?;
            Some((
                p.trim().parse().map_err(|_| bad())?,
                n.trim().parse().map_err(|_| bad())?,
            ))
        }
    };
    Ok((ks, pn))
}

/// Sum of the starred TP weights, `k*_123 = (k1 + k2 + k3) / 2`.
pub fn tp_star_total(kstar: &Character) -> Result<Character, WeightError> {
    let ring = kstar.exponents[0].center().ring();
    kstar.linear_image(ring, &[vec![Ratio::one(); 3]])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(p: u64, n: u32) -> PadicRing {
        PadicRing::new(p, n).unwrap()
    }

    fn scalar(v: CharValue) -> PadicNum {
        v.as_scalar().unwrap()
    }

    #[test]
    fn trivial_and_algebraic() {
        let f = ring(5, 3);
        let triv = Character::trivial(f, 1);
        assert_eq!(scalar(triv.eval(&[f.elem(7)]).unwrap()), f.one());
        let k3 = Character::algebraic(f, &[3]);
        assert_eq!(scalar(k3.eval(&[f.elem(6)]).unwrap()), f.elem(216));
        assert_eq!(k3.algebraic_weights(), Some(vec![3]));
    }

    #[test]
    fn split_form_matches_one_unit_pow() {
        let f = ring(5, 4);
        let s = f.elem(1234);
        let ch = Character::new(5, vec![2], vec![Exponent::Scalar(s)], 0);
        let z = f.elem(6);
        let want = padic::one_unit_pow(&z, &s).unwrap() * padic::teichmuller(&z).unwrap().pow(2);
        assert_eq!(scalar(ch.eval(&[z]).unwrap()), want);
    }

    #[test]
    fn analyticity_is_monotone() {
        let f = ring(5, 6);
        let ch = Character::algebraic(f, &[4, -3]);
        assert!(is_m_analytic(&ch, 0));
        assert!(is_m_analytic(&ch, 1));
    }

    #[test]
    fn bf_pullback_weight() {
        let f = ring(7, 5);
        let lam = Character::algebraic(f, &[5, 3, 2]);
        let mu = omega_pullback(&lam, ExampleTag::Bf).unwrap();
        assert_eq!(mu.algebraic_weights(), Some(vec![4, 2]));
        let triv = omega_pullback(&Character::trivial(f, 3), ExampleTag::Bf).unwrap();
        assert_eq!(triv.algebraic_weights(), Some(vec![0, 0]));
    }

    #[test]
    fn gsp4_pullback_gives_cd_weight() {
        let f = ring(7, 5);
        let (a, b, q, rr) = (2i64, 3i64, 1i64, 2i64);
        let lam = Character::algebraic(f, &[a + b, a, -2 * a - b, rr - q + a, q]);
        let mu = omega_pullback(&lam, ExampleTag::Gsp4).unwrap();
        let (c, d) = (a + b - q - rr, a - q + rr);
        assert_eq!(mu.algebraic_weights(), Some(vec![c, d, -(c + d), -d, 0]));
    }

    #[test]
    fn star_weight_examples() {
        let f = ring(5, 4);
        let bf = star_weights(&Character::algebraic(f, &[7, 4, 2]), ExampleTag::Bf).unwrap();
        assert_eq!(bf.algebraic_weights(), Some(vec![5, 2]));
        let tp = star_weights(&Character::algebraic(f, &[2, 2, 2]), ExampleTag::Tp).unwrap();
        assert_eq!(tp.algebraic_weights(), Some(vec![1, 1, 1]));
        let zero = star_weights(&Character::algebraic(f, &[0, 0, 0]), ExampleTag::Tp).unwrap();
        assert_eq!(zero.algebraic_weights(), Some(vec![0, 0, 0]));
        assert_eq!(
            star_weights(&Character::algebraic(f, &[1, 2, 2]), ExampleTag::Tp),
            Err(WeightError::Parity(5))
        );
    }

    #[test]
    fn universal_character_specializes() {
        let f = ring(3, 8);
        let disc = WeightDisc::new(f, vec![2], 0, 20);
        let u = disc.universal();
        let z = f.elem(5);
        let value = u.eval(&[z]).unwrap();
        for k in disc.algebraic_points(3) {
            let t = disc.point_of(&k).unwrap();
            let got = value.at(&t).unwrap();
            let want = scalar(Character::algebraic(f, &k).eval(&[z]).unwrap());
            assert!(got.eq_mod(&want, got.precision()), "k = {k:?}");
            // l(z) is known mod p^(N-1) and the binomial expansion costs floor(log_3 20) = 2 digits.
            assert!(got.precision() >= 5);
        }
        assert!(disc.point_of(&[3]).is_err());
    }

    #[test]
    fn scaled_coordinates_keep_full_precision() {
        let f = ring(3, 8);
        for level in [0, 1] {
            let disc = WeightDisc::new(f, vec![2, -1], level, 20);
            let u = disc.universal();
            let z = [f.elem(5), f.elem(-7)];
            let value = u.eval_scaled(&z).unwrap();
            for k in disc.algebraic_points(3) {
                let s = disc.scaled_point_of(&k).unwrap();
                let got = value.at(&s).unwrap();
                let want = scalar(Character::algebraic(f, &k).eval(&z).unwrap());
                assert_eq!(got.precision(), 8);
                assert_eq!(got, want, "k = {k:?}, m = {level}");
            }
        }
    }

    #[test]
    fn weight_literals() {
        assert_eq!(
            parse_weight_literal("k=(2,3,1,2)@5^8").unwrap(),
            (vec![2, 3, 1, 2], Some((5, 8)))
        );
        assert_eq!(parse_weight_literal("(2,3,1)").unwrap().0, vec![2, 3, 1]);
        assert_eq!(parse_weight_literal("2,3,1").unwrap().0, vec![2, 3, 1]);
        assert!(parse_weight_literal("k=(a,b)").is_err());
    }
}
