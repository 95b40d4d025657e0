//! Classical twigs, Big Twigs and the branching map for the wired spherical
//! pairs.
//!
//! BF is `GL2 x GL2 > GL2` (diagonal), TP is `GL2^3 > GL2` (diagonal); GSp4 is
//! wired for weight bookkeeping only. Twigs are evaluated through their
//! first-row polynomials: for BF `F(x, y) = x1^(k-j) y1^(k'-j) det(x; y)^j`,
//! for TP the normalized `Det_r`. Group points are built as
//! `tau n tau^-1 u j^-1` with `tau = diag(p, 1)` in every factor.
//!
//! Family values live in the scaled disc coordinates `s = t / p^(m+1)` (see
//! [`Character::component_scaled`]), so specialization is evaluation at the
//! integral point returned by [`WeightDisc::scaled_point_of`].

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

use crate::coeff::{one_plus_pow, CoeffError, FiniteDistribution, LAFunction};
use crate::padic::{PadicError, PadicNum, PadicRing};
use crate::series::{GrowthProfile, SeriesError, TruncatedSeries};
use crate::weights::{star_weights, tp_star_total, CharValue, Character, ExampleTag, Exponent, WeightDisc, WeightError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BranchError {
    #[error("weight out of range: {0}")]
    Range(String),
    #[error("parity violation: r1 + r2 + r3 = {0} is odd")]
    Parity(i64),
    #[error("{0} is not a unit (input outside the shrunk cell)")]
    NonUnit(&'static str),
    #[error("example {0} has no twig evaluator")]
    Unsupported(ExampleTag),
    #[error("group point does not belong to example {0}")]
    WrongExample(ExampleTag),
    #[error("the branching map needs scalar weights")]
    FamilyWeight,
    #[error("moment cutoff {0} certifies no digits")]
    CutoffInsufficient(u32),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
}

/// A 2x2 matrix `[a, b, c, d]`.
pub type Mat2 = [PadicNum; 4];

pub fn mat2_mul(x: &Mat2, y: &Mat2) -> Mat2 {
    [
        x[0] * y[0] + x[1] * y[2],
        x[0] * y[1] + x[1] * y[3],
        x[2] * y[0] + x[3] * y[2],
        x[2] * y[1] + x[3] * y[3],
    ]
}

pub fn mat2_det(x: &Mat2) -> PadicNum {
    x[0] * x[3] - x[1] * x[2]
}

pub fn mat2_inv(x: &Mat2) -> Result<Mat2, BranchError> {
    let det = mat2_det(x);
    if !det.is_unit() {
        return Err(BranchError::NonUnit("determinant"));
    }
    let di = det.inv()?;
    Ok([x[3] * di, -x[1] * di, -x[2] * di, x[0] * di])
}

fn mat2_int(ring: PadicRing, m: [i64; 4]) -> Mat2 {
    m.map(|x| ring.elem(x as i128))
}

/// `det` of the 2x2 matrix with rows `x` and `y`.
fn det_rows(x: &[PadicNum; 2], y: &[PadicNum; 2]) -> PadicNum {
    x[0] * y[1] - x[1] * y[0]
}

pub fn first_row(m: &Mat2) -> [PadicNum; 2] {
    [m[0], m[1]]
}

/// The fixed data of a spherical pair: `u` per `GL2` factor and the
/// `p`-exponents of `tau = diag(p^a, p^b)` per factor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SphericalPairData {
    tag: ExampleTag,
    u: Vec<[i64; 4]>,
    tau: Vec<[u32; 2]>,
}

impl SphericalPairData {
    pub fn new(tag: ExampleTag) -> Self {
        let id = [1, 0, 0, 1];
        let (u, tau) = match tag {
            ExampleTag::Bf => (vec![id, [1, 1, 0, 1]], vec![[1, 0]; 2]),
            ExampleTag::Tp => (vec![id, [1, -1, 0, 1], [1, 1, 0, 1]], vec![[1, 0]; 3]),
            ExampleTag::Gsp4 => (Vec::new(), Vec::new()),
        };
        SphericalPairData { tag, u, tau }
    }

    pub fn tag(&self) -> ExampleTag {
        self.tag
    }

    pub fn u_matrices(&self, ring: PadicRing) -> Vec<Mat2> {
        self.u.iter().map(|m| mat2_int(ring, *m)).collect()
    }

    pub fn tau_exponents(&self) -> &[[u32; 2]] {
        &self.tau
    }

    /// `tau n tau^-1 u` for the unipotent coordinates `z` (one per factor).
    pub fn cell_point(&self, z: &[PadicNum]) -> Result<Vec<Mat2>, BranchError> {
        if self.u.is_empty() {
            return Err(BranchError::Unsupported(self.tag));
        }
        if z.len() != self.u.len() {
            return Err(BranchError::WrongExample(self.tag));
        }
        let ring = z[0].ring();
        Ok(z.iter()
            .zip(self.u_matrices(ring))
            .zip(&self.tau)
            .map(|((zi, u), [a, b])| {
                let shift = ring.elem(ring.p().pow(a - b.min(a)) as i128);
                let n = [ring.one(), shift * *zi, ring.zero(), ring.one()];
                mat2_mul(&n, &u)
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TwigKind {
    Classical,
    Big,
    Branch,
}

/// Where a twig value came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub example: ExampleTag,
    pub kind: TwigKind,
    /// Integer weight (the disc center for family values).
    pub weight: Vec<i64>,
    /// Disc level for family values; their coefficients are in `s = t / p^(m+1)`.
    pub disc_level: Option<u32>,
    pub tau: Vec<[u32; 2]>,
    pub inputs: Vec<i128>,
}

/// A twig value, its unnormalized form, and its provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwigValue {
    value: CharValue,
    raw: CharValue,
    provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TwigRecord {
    pub p: u64,
    pub precision: u32,
    pub value: Option<u64>,
    pub raw: Option<u64>,
    pub series: Option<Vec<(Vec<u32>, u64)>>,
    pub provenance: Provenance,
}

fn value_precision(v: &CharValue) -> u32 {
    match v {
        CharValue::Scalar(s) => s.precision(),
        CharValue::Series(s) => s.precision(),
    }
}

impl TwigValue {
    /// The value normalized to be 1 at the `u`-point.
    pub fn value(&self) -> &CharValue {
        &self.value
    }

    /// The value before normalization (differs from `value` only for TP).
    pub fn raw(&self) -> &CharValue {
        &self.raw
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn as_scalar(&self) -> Option<PadicNum> {
        self.value.as_scalar()
    }

    pub fn precision(&self) -> u32 {
        value_precision(&self.value)
    }

    /// `rho_lambda` of a family value at the algebraic weight `weight` of `disc`.
    pub fn specialize(&self, disc: &WeightDisc, weight: &[i64]) -> Result<PadicNum, BranchError> {
        match &self.value {
            CharValue::Scalar(s) => Ok(*s),
            CharValue::Series(f) => Ok(f.eval(&disc.scaled_point_of(weight)?)?),
        }
    }

    pub fn to_record(&self) -> TwigRecord {
        let (p, precision) = match &self.value {
            CharValue::Scalar(s) => (s.p(), s.precision()),
            CharValue::Series(s) => (s.p(), s.precision()),
        };
        let series = match &self.value {
            CharValue::Scalar(_) => None,
            CharValue::Series(s) => Some(s.terms().map(|(e, c)| (e.clone(), c.residue())).collect()),
        };
        TwigRecord {
            p,
            precision,
            value: self.value.as_scalar().map(|x| x.residue()),
            raw: self.raw.as_scalar().map(|x| x.residue()),
            series,
            provenance: self.provenance.clone(),
        }
    }
}

fn inputs(xs: &[PadicNum]) -> Vec<i128> {
    xs.iter().map(|x| x.signed()).collect()
}

fn pow_nonneg(x: &PadicNum, e: i64) -> PadicNum {
    x.pow(e as u64)
}

/// `F_{k,k',j}(x1, x2, y1, y2) = x1^(k-j) y1^(k'-j) (x1 y2 - x2 y1)^j`.
pub fn classical_twig_bf(k: i64, kp: i64, j: i64, point: [PadicNum; 4]) -> Result<TwigValue, BranchError> {
    if j < 0 || j > k.min(kp) {
        return Err(BranchError::Range(format!("need 0 <= j <= min(k, k'), got ({k}, {kp}, {j})")));
    }
    let [x1, x2, y1, y2] = point;
    let det = x1 * y2 - x2 * y1;
    let value = pow_nonneg(&x1, k - j) * pow_nonneg(&y1, kp - j) * pow_nonneg(&det, j);
    Ok(TwigValue {
        value: CharValue::Scalar(value),
        raw: CharValue::Scalar(value),
        provenance: Provenance {
            example: ExampleTag::Bf,
            kind: TwigKind::Classical,
            weight: vec![k, kp, j],
            disc_level: None,
            tau: SphericalPairData::new(ExampleTag::Bf).tau,
            inputs: inputs(&point),
        },
    })
}

/// Check `r_i >= 0`, even total and the triangle inequalities; returns `r`.
fn tp_half_total(r: [i64; 3]) -> Result<i64, BranchError> {
    if r.iter().any(|x| *x < 0) {
        return Err(BranchError::Range(format!("negative weight {r:?}")));
    }
    let sum: i64 = r.iter().sum();
    if sum % 2 != 0 {
        return Err(BranchError::Parity(sum));
    }
    let half = sum / 2;
    if r.iter().any(|x| *x > half) {
        return Err(BranchError::Range(format!("{r:?} violates the triangle inequality")));
    }
    Ok(half)
}

/// `Det_r` on the first rows `x, y, z`:
/// `2^-r det(x;y)^(r-r3) det(x;z)^(r-r2) det(y;z)^(r-r1)`, reported raw and
/// normalized by its value `(-1)^(r-r3) 2^(-r1)` at the `u`-point.
pub fn classical_twig_tp(r: [i64; 3], rows: [[PadicNum; 2]; 3]) -> Result<TwigValue, BranchError> {
    let half = tp_half_total(r)?;
    let ring = rows[0][0].ring();
    let two = ring.elem(2);
    let raw = two.pow_signed(-half)?
        * pow_nonneg(&det_rows(&rows[0], &rows[1]), half - r[2])
        * pow_nonneg(&det_rows(&rows[0], &rows[2]), half - r[1])
        * pow_nonneg(&det_rows(&rows[1], &rows[2]), half - r[0]);
    let sign = if (half - r[2]) % 2 == 0 { ring.one() } else { -ring.one() };
    let value = raw * sign * two.pow(r[0] as u64);
    let flat: Vec<PadicNum> = rows.iter().flatten().copied().collect();
    Ok(TwigValue {
        value: CharValue::Scalar(value),
        raw: CharValue::Scalar(raw),
        provenance: Provenance {
            example: ExampleTag::Tp,
            kind: TwigKind::Classical,
            weight: r.to_vec(),
            disc_level: None,
            tau: SphericalPairData::new(ExampleTag::Tp).tau,
            inputs: inputs(&flat),
        },
    })
}

fn is_family(kappa: &Character) -> bool {
    kappa.exponents().iter().any(|e| matches!(e, Exponent::Family { .. }))
}

fn component(kappa: &Character, i: usize, z: &PadicNum, what: &'static str) -> Result<CharValue, BranchError> {
    if !z.is_unit() {
        return Err(BranchError::NonUnit(what));
    }
    Ok(kappa.component_scaled(i, z)?)
}

fn product(values: &[CharValue]) -> Result<CharValue, BranchError> {
    let mut acc = values[0].clone();
    for v in &values[1..] {
        acc = acc.mul(v)?;
    }
    Ok(acc)
}

/// The `J_H` element `i^-1 = [[i1, i2], [p i3, i4]]` from its entries.
pub fn bf_iwahori_inverse(i: [PadicNum; 4]) -> Mat2 {
    let ring = i[0].ring();
    [i[0], i[1], ring.elem(ring.p() as i128) * i[2], i[3]]
}

/// Big Twig for BF at `tau n(z1, z2) tau^-1 u i^-1`:
/// `k*_1(i1 + p^2 i3 z1) k*_2(i1 + p i3 (1 + p z2)) k_3(det)`, where
/// `i` lists the entries of `i^-1 = [[i1, i2], [p i3, i4]]` and
/// `det = (1 + p(z2 - z1)) det(i^-1)`.
pub fn big_twig_bf(kappa: &Character, z1: PadicNum, z2: PadicNum, i: [PadicNum; 4]) -> Result<TwigValue, BranchError> {
    if kappa.rank() != 3 {
        return Err(BranchError::Weight(WeightError::ComponentCount(ExampleTag::Bf, 3)));
    }
    let star = star_weights(kappa, ExampleTag::Bf)?;
    let ring = z1.ring();
    let p = ring.elem(ring.p() as i128);
    let [i1, i2, i3, i4] = i;
    if !i1.is_unit() {
        return Err(BranchError::NonUnit("i1"));
    }
    let x1 = i1 + p * p * i3 * z1;
    let y1 = i1 + p * i3 * (ring.one() + p * z2);
    let det = (ring.one() + p * (z2 - z1)) * (i1 * i4 - p * i2 * i3);
    let value = product(&[
        component(&star, 0, &x1, "x1")?,
        component(&star, 1, &y1, "y1")?,
        component(kappa, 2, &det, "det")?,
    ])?;
    Ok(TwigValue {
        raw: value.clone(),
        value,
        provenance: Provenance {
            example: ExampleTag::Bf,
            kind: TwigKind::Big,
            weight: kappa.torsion().to_vec(),
            disc_level: is_family(kappa).then(|| kappa.level()),
            tau: SphericalPairData::new(ExampleTag::Bf).tau,
            inputs: inputs(&[z1, z2, i1, i2, i3, i4]),
        },
    })
}

/// Big Twig for TP at `(n_bar t tau n(z) tau^-1 u, h)`:
/// `(2 det h)^(-k*_123) prod_i k_i(t_i) k*_3(d12) k*_2(d13) k*_1(d23)`
/// with `d12 = -1 + p(z2 - z1)`, `d13 = 1 + p(z3 - z1)`, `d23 = 2 + p(z3 - z2)`.
/// The normalized value divides by the value `k_1(2)^-1 k*_3(-1)` at `u`.
pub fn big_twig_tp(
    kappa: &Character,
    t: [PadicNum; 3],
    z: [PadicNum; 3],
    h: Mat2,
) -> Result<TwigValue, BranchError> {
    if kappa.rank() != 3 {
        return Err(BranchError::Weight(WeightError::ComponentCount(ExampleTag::Tp, 3)));
    }
    let sum: i64 = kappa.torsion().iter().sum();
    if sum % 2 != 0 {
        return Err(BranchError::Parity(sum));
    }
    let star = star_weights(kappa, ExampleTag::Tp)?;
    let ring = t[0].ring();
    let neg_total = tp_star_total(&star)?.linear_image(ring, &[vec![Ratio::from_integer(-1)]])?;
    let p = ring.elem(ring.p() as i128);
    let two = ring.elem(2);
    let d12 = -ring.one() + p * (z[1] - z[0]);
    let d13 = ring.one() + p * (z[2] - z[0]);
    let d23 = two + p * (z[2] - z[1]);
    let mut factors = vec![component(&neg_total, 0, &(two * mat2_det(&h)), "det h")?];
    for (i, ti) in t.iter().enumerate() {
        factors.push(component(kappa, i, ti, "t")?);
    }
    factors.push(component(&star, 2, &d12, "d12")?);
    factors.push(component(&star, 1, &d13, "d13")?);
    factors.push(component(&star, 0, &d23, "d23")?);
    let raw = product(&factors)?;
    let at_u = component(kappa, 0, &two, "2")?.mul(&component(&star, 2, &-ring.one(), "-1")?)?;
    let value = raw.mul(&at_u)?;
    let mut flat = t.to_vec();
    flat.extend(z);
    flat.extend(h);
    Ok(TwigValue {
        value,
        raw,
        provenance: Provenance {
            example: ExampleTag::Tp,
            kind: TwigKind::Big,
            weight: kappa.torsion().to_vec(),
            disc_level: is_family(kappa).then(|| kappa.level()),
            tau: SphericalPairData::new(ExampleTag::Tp).tau,
            inputs: inputs(&flat),
        },
    })
}

/// A group argument `g` for the branching map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BranchPoint {
    /// `tau n(z1, z2) tau^-1 u`.
    Bf { z1: PadicNum, z2: PadicNum },
    /// `t tau n(z) tau^-1 u`.
    Tp { t: [PadicNum; 3], z: [PadicNum; 3] },
}

fn scalar_exponent(kappa: &Character, i: usize) -> Result<PadicNum, BranchError> {
    match &kappa.exponents()[i] {
        Exponent::Scalar(s) => Ok(*s),
        Exponent::Family { .. } => Err(BranchError::FamilyWeight),
    }
}

/// `BR(eps)(g) = <eps, Phi(g, -)>`, with `eps` a distribution in the
/// coordinate `y` of `j^-1 = [[1, 0], [p y, 1]]` (the identity is `y = 0`).
///
/// For BF, `y -> Phi(g, j)` is
/// `(1 + p^2 z1 y)^(k*_1) (1 + p (1 + p z2) y)^(k*_2) k_3(1 + p(z2 - z1))`,
/// expanded to the cutoff; the dropped tail has valuation above `cutoff + 1`.
/// For TP, `Phi(g, j)` only sees `det j = 1`, so the pairing is the total mass
/// times `Phi(g, 1)`.
pub fn branch_map(
    eps: &FiniteDistribution,
    g: &BranchPoint,
    kappa: &Character,
    pair: &SphericalPairData,
) -> Result<TwigValue, BranchError> {
    if is_family(kappa) {
        return Err(BranchError::FamilyWeight);
    }
    let ring = eps.ring();
    let one = ring.one();
    let zero = ring.zero();
    let (base, f) = match (pair.tag(), g) {
        (ExampleTag::Bf, BranchPoint::Bf { z1, z2 }) => {
            let base = big_twig_bf(kappa, *z1, *z2, [one, zero, zero, one])?;
            let star = star_weights(kappa, ExampleTag::Bf)?;
            let cutoff = eps.cutoff();
            let p = ring.elem(ring.p() as i128);
            let w1 = p * p * *z1;
            let w2 = p * (one + p * *z2);
            let c1 = one_plus_pow(&w1, &scalar_exponent(&star, 0)?, cutoff)?;
            let c2 = one_plus_pow(&w2, &scalar_exponent(&star, 1)?, cutoff)?;
            let s1 = TruncatedSeries::univariate(c1[0].ring(), &c1, GrowthProfile::Tate);
            let s2 = TruncatedSeries::univariate(c2[0].ring(), &c2, GrowthProfile::Tate);
            let det = base.as_scalar().expect("scalar weight");
            let series = s1.mul(&s2)?.scale(det);
            let tail = (cutoff + 1) * w1.valuation().lower_bound().min(w2.valuation().lower_bound());
            (base, Some((LAFunction::from_global(&series, 0)?, tail)))
        }
        (ExampleTag::Tp, BranchPoint::Tp { t, z }) => {
            let id = [one, zero, zero, one];
            (big_twig_tp(kappa, *t, *z, id)?, None)
        }
        (ExampleTag::Gsp4, _) => return Err(BranchError::Unsupported(ExampleTag::Gsp4)),
        (tag, _) => return Err(BranchError::WrongExample(tag)),
    };
    let (value, raw) = match f {
        Some((f, tail)) => {
            let v = eps.pairing(&f)?;
            let prec = v.precision().min(tail);
            if prec == 0 {
                return Err(BranchError::CutoffInsufficient(eps.cutoff()));
            }
            (v.reduce(prec), v.reduce(prec))
        }
        None => {
            let mass = eps.total_mass();
            let v = base.as_scalar().expect("scalar weight");
            let r = base.raw().as_scalar().expect("scalar weight");
            (mass * v, mass * r)
        }
    };
    let mut provenance = base.provenance.clone();
    provenance.kind = TwigKind::Branch;
    Ok(TwigValue {
        value: CharValue::Scalar(value),
        raw: CharValue::Scalar(raw),
        provenance,
    })
}

/// GSp4 weight combinatorics for `lambda^[a,b,q,r]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Gsp4Weights {
    pub c: i64,
    pub d: i64,
    /// Exponents of `x1..x5` in `lambda^[a,b,q,r]`.
    pub exponents: [i64; 5],
}

/// `c = a + b - q - r`, `d = a - q + r`, and the exponent vector
/// `(a + b, a, -2a - b, r - q + a, q)`.
pub fn gsp4_weights(a: i64, b: i64, q: i64, r: i64) -> Result<Gsp4Weights, BranchError> {
    if !(0..=a).contains(&q) || !(0..=b).contains(&r) {
        return Err(BranchError::Range(format!(
            "need 0 <= q <= a and 0 <= r <= b, got (a, b, q, r) = ({a}, {b}, {q}, {r})"
        )));
    }
    Ok(Gsp4Weights {
        c: a + b - q - r,
        d: a - q + r,
        exponents: [a + b, a, -2 * a - b, r - q + a, q],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ring(p: u64, n: u32) -> PadicRing {
        PadicRing::new(p, n).unwrap()
    }

    fn scalar(t: &TwigValue) -> PadicNum {
        t.as_scalar().unwrap()
    }

    fn unit(rng: &mut ChaCha8Rng, f: PadicRing) -> PadicNum {
        loop {
            let x = f.elem(rng.gen_range(0..f.modulus() as i128));
            if x.is_unit() {
                return x;
            }
        }
    }

    fn any(rng: &mut ChaCha8Rng, f: PadicRing) -> PadicNum {
        f.elem(rng.gen_range(0..f.modulus() as i128))
    }

    #[test]
    fn bf_classical_examples() {
        let f = ring(5, 4);
        let e = |v: i128| f.elem(v);
        let u = [e(1), e(0), e(1), e(1)];
        assert_eq!(scalar(&classical_twig_bf(2, 3, 1, u).unwrap()), f.one());
        let pt = [e(1), e(2), e(3), e(4)];
        // 1^1 * 3^2 * (1*4 - 2*3)^1 = -18
        assert_eq!(scalar(&classical_twig_bf(2, 3, 1, pt).unwrap()), e(-18));
        assert_eq!(scalar(&classical_twig_bf(2, 3, 0, pt).unwrap()), e(27));
        assert!(classical_twig_bf(2, 3, 4, pt).is_err());
        assert!(classical_twig_bf(2, 3, -1, pt).is_err());
    }

    #[test]
    fn tp_classical_normalization_and_errors() {
        let f = ring(7, 5);
        let pair = SphericalPairData::new(ExampleTag::Tp);
        let rows: Vec<[PadicNum; 2]> = pair.u_matrices(f).iter().map(first_row).collect();
        let rows = [rows[0], rows[1], rows[2]];
        for r in [[2, 2, 2], [1, 1, 0], [3, 1, 2], [0, 0, 0]] {
            let t = classical_twig_tp(r, rows).unwrap();
            assert_eq!(scalar(&t), f.one());
            let half = r.iter().sum::<i64>() / 2;
            let sign = if (half - r[2]) % 2 == 0 { f.one() } else { -f.one() };
            let want = sign * f.elem(2).pow_signed(-r[0]).unwrap();
            assert_eq!(t.raw().as_scalar().unwrap(), want);
        }
        assert_eq!(classical_twig_tp([1, 1, 1], rows).unwrap_err(), BranchError::Parity(3));
        assert!(matches!(classical_twig_tp([4, 1, 1], rows), Err(BranchError::Range(_))));
    }

    #[test]
    fn gsp4_examples() {
        let w = gsp4_weights(0, 0, 0, 0).unwrap();
        assert_eq!((w.c, w.d), (0, 0));
        let w = gsp4_weights(1, 1, 0, 0).unwrap();
        assert_eq!((w.c, w.d), (2, 1));
        let w = gsp4_weights(2, 3, 1, 2).unwrap();
        assert_eq!((w.c, w.d, w.exponents), (2, 3, [5, 2, -7, 3, 1]));
        assert!(gsp4_weights(1, 1, 2, 0).is_err());
        assert!(gsp4_weights(1, 1, 0, -1).is_err());
    }

    #[test]
    fn bf_big_twig_matches_matrix_product() {
        let f = ring(5, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pair = SphericalPairData::new(ExampleTag::Bf);
        for (k, kp, j) in [(2, 3, 1), (4, 4, 0), (5, 2, 2), (0, 0, 0)] {
            let kappa = Character::algebraic(f, &[k, kp, j]);
            for _ in 0..10 {
                let (z1, z2) = (any(&mut rng, f), any(&mut rng, f));
                let i = [unit(&mut rng, f), any(&mut rng, f), any(&mut rng, f), unit(&mut rng, f)];
                let big = big_twig_bf(&kappa, z1, z2, i).unwrap();
                let iinv = bf_iwahori_inverse(i);
                let g = pair.cell_point(&[z1, z2]).unwrap();
                let x = first_row(&mat2_mul(&g[0], &iinv));
                let y = first_row(&mat2_mul(&g[1], &iinv));
                let want = classical_twig_bf(k, kp, j, [x[0], x[1], y[0], y[1]]).unwrap();
                assert_eq!(scalar(&big), scalar(&want));
            }
        }
        let id = [f.one(), f.zero(), f.zero(), f.one()];
        let kappa = Character::algebraic(f, &[2, 3, 1]);
        assert_eq!(scalar(&big_twig_bf(&kappa, f.zero(), f.zero(), id).unwrap()), f.one());
        let bad = [f.elem(5), f.zero(), f.zero(), f.one()];
        assert_eq!(big_twig_bf(&kappa, f.zero(), f.zero(), bad).unwrap_err(), BranchError::NonUnit("i1"));
    }

    #[test]
    fn tp_big_twig_matches_matrix_product() {
        let f = ring(7, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pair = SphericalPairData::new(ExampleTag::Tp);
        for r in [[2, 2, 2], [3, 1, 2], [0, 0, 0], [4, 3, 1]] {
            let kappa = Character::algebraic(f, &r);
            for _ in 0..10 {
                let t = [unit(&mut rng, f), unit(&mut rng, f), unit(&mut rng, f)];
                let z = [any(&mut rng, f), any(&mut rng, f), any(&mut rng, f)];
                let h = loop {
                    let h = [any(&mut rng, f), any(&mut rng, f), any(&mut rng, f), any(&mut rng, f)];
                    if mat2_det(&h).is_unit() {
                        break h;
                    }
                };
                let big = big_twig_tp(&kappa, t, z, h).unwrap();
                let g = pair.cell_point(&z).unwrap();
                let hinv = mat2_inv(&h).unwrap();
                let rows: Vec<[PadicNum; 2]> = g
                    .iter()
                    .zip(t)
                    .map(|(gi, ti)| {
                        let row = first_row(&mat2_mul(gi, &hinv));
                        [ti * row[0], ti * row[1]]
                    })
                    .collect();
                let want = classical_twig_tp(r, [rows[0], rows[1], rows[2]]).unwrap();
                assert_eq!(scalar(&big), scalar(&want), "r = {r:?}");
                assert_eq!(big.raw().as_scalar(), want.raw().as_scalar());
            }
        }
        let one = [f.one(); 3];
        let zero = [f.zero(); 3];
        let id = [f.one(), f.zero(), f.zero(), f.one()];
        let kappa = Character::algebraic(f, &[2, 2, 2]);
        assert_eq!(scalar(&big_twig_tp(&kappa, one, zero, id).unwrap()), f.one());
        let odd = Character::algebraic(f, &[1, 1, 1]);
        assert_eq!(big_twig_tp(&odd, one, zero, id).unwrap_err(), BranchError::Parity(3));
    }

    /// Same point written as `l u q g` and as `(l c^-1) u q (c g)` for a
    /// central `c`; both must give `lambda(l) mu(g)` with `mu = Omega(lambda)`.
    #[test]
    fn well_defined_on_refactorizations() {
        use crate::weights::omega_pullback;
        let f = ring(5, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (k, kp, j) = (3, 2, 1);
        let mu = omega_pullback(&Character::algebraic(f, &[k, kp, j]), ExampleTag::Bf).unwrap();
        let pair = SphericalPairData::new(ExampleTag::Bf);
        let u = pair.u_matrices(f);
        for _ in 0..20 {
            let a = [unit(&mut rng, f), unit(&mut rng, f)];
            let d = [unit(&mut rng, f), unit(&mut rng, f)];
            let nb = [any(&mut rng, f), any(&mut rng, f)];
            let q = any(&mut rng, f);
            let (x, dg) = (unit(&mut rng, f), unit(&mut rng, f));
            let c = unit(&mut rng, f);
            let eval = |a: [PadicNum; 2], x: PadicNum| {
                let g = [x, f.zero(), f.zero(), dg * x.inv().unwrap()];
                let qm = [f.one(), q, f.zero(), f.one()];
                let rows: Vec<[PadicNum; 2]> = (0..2)
                    .map(|i| {
                        let n = [f.one(), f.zero(), nb[i], f.one()];
                        let l = [a[i], f.zero(), f.zero(), d[i]];
                        let m = mat2_mul(&mat2_mul(&mat2_mul(&mat2_mul(&n, &l), &u[i]), &qm), &g);
                        first_row(&m)
                    })
                    .collect();
                scalar(&classical_twig_bf(k, kp, j, [rows[0][0], rows[0][1], rows[1][0], rows[1][1]]).unwrap())
            };
            let lam = a[0].pow(k as u64) * a[1].pow(kp as u64);
            let want = lam * mu.eval(&[x, dg]).unwrap().as_scalar().unwrap();
            assert_eq!(eval(a, x), want);
            let ci = c.inv().unwrap();
            // (l c^-1) u q (c g): scalar c commutes with u and q, and det(c g) = c^2 det g.
            let moved = {
                let g = [c * x, f.zero(), f.zero(), c * dg * x.inv().unwrap()];
                let qm = [f.one(), q, f.zero(), f.one()];
                let rows: Vec<[PadicNum; 2]> = (0..2)
                    .map(|i| {
                        let n = [f.one(), f.zero(), nb[i], f.one()];
                        let l = [a[i] * ci, f.zero(), f.zero(), d[i] * ci];
                        let m = mat2_mul(&mat2_mul(&mat2_mul(&mat2_mul(&n, &l), &u[i]), &qm), &g);
                        first_row(&m)
                    })
                    .collect();
                scalar(&classical_twig_bf(k, kp, j, [rows[0][0], rows[0][1], rows[1][0], rows[1][1]]).unwrap())
            };
            assert_eq!(moved, want);
        }
    }

    /// `phi(g, l_h h) = mu(l_h)^-1 phi(g, h)` and `phi(l_g g, h) = lambda(l_g) phi(g, h)`.
    #[test]
    fn two_variable_twig_laws() {
        use crate::weights::omega_pullback;
        let f = ring(7, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let random_gl2 = |rng: &mut ChaCha8Rng| loop {
            let h = [any(rng, f), any(rng, f), any(rng, f), any(rng, f)];
            if mat2_det(&h).is_unit() {
                break h;
            }
        };
        // BF: phi(g, h) = F(first rows of g_i h^-1).
        let (k, kp, j) = (4, 3, 2);
        let mu = omega_pullback(&Character::algebraic(f, &[k, kp, j]), ExampleTag::Bf).unwrap();
        let phi_bf = |g: &[Mat2; 2], h: &Mat2| {
            let hinv = mat2_inv(h).unwrap();
            let x = first_row(&mat2_mul(&g[0], &hinv));
            let y = first_row(&mat2_mul(&g[1], &hinv));
            scalar(&classical_twig_bf(k, kp, j, [x[0], x[1], y[0], y[1]]).unwrap())
        };
        for _ in 0..20 {
            let g = [random_gl2(&mut rng), random_gl2(&mut rng)];
            let h = random_gl2(&mut rng);
            let base = phi_bf(&g, &h);
            let (x, det) = (unit(&mut rng, f), unit(&mut rng, f));
            let lh = [x, f.zero(), f.zero(), det * x.inv().unwrap()];
            let m = mu.eval(&[x, det]).unwrap().as_scalar().unwrap();
            assert_eq!(phi_bf(&g, &mat2_mul(&lh, &h)), m.inv().unwrap() * base);
            let a = [unit(&mut rng, f), unit(&mut rng, f)];
            let lg: Vec<Mat2> = (0..2).map(|i| [a[i], f.zero(), f.zero(), unit(&mut rng, f)]).collect();
            let moved = [mat2_mul(&lg[0], &g[0]), mat2_mul(&lg[1], &g[1])];
            let lam = a[0].pow(k as u64) * a[1].pow(kp as u64);
            assert_eq!(phi_bf(&moved, &h), lam * base);
        }
        // TP: phi(g, h) = normalized Det_r of the first rows of g_i h^-1.
        let r = [3, 2, 3];
        let mu = omega_pullback(&Character::algebraic(f, &r), ExampleTag::Tp).unwrap();
        let phi_tp = |g: &[Mat2; 3], h: &Mat2| {
            let hinv = mat2_inv(h).unwrap();
            let rows = g.map(|gi| first_row(&mat2_mul(&gi, &hinv)));
            scalar(&classical_twig_tp(r, rows).unwrap())
        };
        for _ in 0..20 {
            let g = [random_gl2(&mut rng), random_gl2(&mut rng), random_gl2(&mut rng)];
            let h = random_gl2(&mut rng);
            let base = phi_tp(&g, &h);
            let (x, e) = (unit(&mut rng, f), unit(&mut rng, f));
            let lh = [x * e, f.zero(), f.zero(), e * x.inv().unwrap()];
            let m = mu.eval(&[x, e]).unwrap().as_scalar().unwrap();
            assert_eq!(phi_tp(&g, &mat2_mul(&lh, &h)), m.inv().unwrap() * base);
            let a = [unit(&mut rng, f), unit(&mut rng, f), unit(&mut rng, f)];
            let moved = [0, 1, 2].map(|i| mat2_mul(&[a[i], f.zero(), f.zero(), unit(&mut rng, f)], &g[i]));
            let lam = a[0].pow(3) * a[1].pow(2) * a[2].pow(3);
            assert_eq!(phi_tp(&moved, &h), lam * base);
        }
    }

    #[test]
    fn family_twigs_specialize() {
        let f = ring(3, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let disc = WeightDisc::new(f, vec![4, 3, 1], 0, 20);
        let kappa = disc.universal();
        for _ in 0..3 {
            let (z1, z2) = (any(&mut rng, f), any(&mut rng, f));
            let i = [unit(&mut rng, f), any(&mut rng, f), any(&mut rng, f), unit(&mut rng, f)];
            let big = big_twig_bf(&kappa, z1, z2, i).unwrap();
            assert_eq!(big.provenance().disc_level, Some(0));
            for w in disc.algebraic_points(3) {
                let alg = big_twig_bf(&Character::algebraic(f, &w), z1, z2, i).unwrap();
                assert_eq!(big.specialize(&disc, &w).unwrap(), scalar(&alg), "w = {w:?}");
            }
        }
        // TP: weights whose steps keep the starred omega-exponents, i.e. multiples of 2(p-1).
        let disc = WeightDisc::new(f, vec![2, 2, 2], 0, 20);
        let kappa = disc.universal();
        let t = [unit(&mut rng, f), unit(&mut rng, f), unit(&mut rng, f)];
        let z = [any(&mut rng, f), any(&mut rng, f), any(&mut rng, f)];
        let h = [f.elem(2), f.elem(1), f.elem(3), f.elem(5)];
        let big = big_twig_tp(&kappa, t, z, h).unwrap();
        for w in [[2, 2, 2], [6, 6, 6], [6, 2, 6]] {
            let alg = big_twig_tp(&Character::algebraic(f, &w), t, z, h).unwrap();
            assert_eq!(big.specialize(&disc, &w).unwrap(), scalar(&alg), "w = {w:?}");
        }
    }

    #[test]
    fn branch_map_properties() {
        let f = ring(5, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let bf = SphericalPairData::new(ExampleTag::Bf);
        let kappa = Character::algebraic(f, &[3, 2, 1]);
        let cutoff = 5;
        let zero_point = BranchPoint::Bf { z1: f.zero(), z2: f.zero() };
        let delta1 = FiniteDistribution::dirac(f, 0, cutoff, &f.zero()).unwrap();
        assert_eq!(scalar(&branch_map(&delta1, &zero_point, &kappa, &bf).unwrap()), f.one());
        let zero = FiniteDistribution::zero(f, 0, cutoff).unwrap();
        for _ in 0..10 {
            let (z1, z2) = (any(&mut rng, f), any(&mut rng, f));
            let g = BranchPoint::Bf { z1, z2 };
            let b0 = branch_map(&zero, &g, &kappa, &bf).unwrap();
            assert!(scalar(&b0).is_zero());
            let y0 = any(&mut rng, f);
            let dj = FiniteDistribution::dirac(f, 0, cutoff, &y0).unwrap();
            let got = scalar(&branch_map(&dj, &g, &kappa, &bf).unwrap());
            let want = scalar(&big_twig_bf(&kappa, z1, z2, [f.one(), f.zero(), y0, f.one()]).unwrap());
            assert!(got.eq_mod(&want, got.precision()), "y0 = {}", y0.signed());
            assert!(got.precision() >= (cutoff + 1).min(6));
            let sum = dj.add(&delta1).unwrap();
            let lhs = scalar(&branch_map(&sum, &g, &kappa, &bf).unwrap());
            let rhs = got + scalar(&branch_map(&delta1, &g, &kappa, &bf).unwrap());
            let prec = lhs.precision().min(rhs.precision());
            assert!(lhs.eq_mod(&rhs, prec));
        }
        let tp = SphericalPairData::new(ExampleTag::Tp);
        let g = BranchPoint::Tp { t: [f.one(); 3], z: [f.zero(); 3] };
        let kappa = Character::algebraic(f, &[2, 2, 2]);
        assert_eq!(scalar(&branch_map(&delta1, &g, &kappa, &tp).unwrap()), f.one());
        assert_eq!(
            branch_map(&delta1, &g, &kappa, &bf).unwrap_err(),
            BranchError::WrongExample(ExampleTag::Bf)
        );
    }
}
