//! Compact operators at finite truncation: Fredholm determinants, Newton
//! polygons, slope factorizations, Riesz projectors, simultaneous slope
//! decompositions for commuting operators and the polynomial projector tower.
//!
//! Precision is tracked per entry by the underlying arithmetic. Every public
//! result carries the precision it is certified to, and results below the
//! configured floor are refused.

use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::matrix::{Matrix, MatrixError};
use crate::padic::{self, PadicError, PadicNum, PadicRing, Valuation};
use crate::series::{GrowthProfile, SeriesError, TruncatedSeries};

/// Default floor on certified precision (digits).
pub const DEFAULT_PRECISION_FLOOR: u32 = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SlopeError {
    #[error("decay certificate fails in column {0}")]
    Certificate(usize),
    #[error("Fredholm coefficient {degree} changes between truncations T and T-5")]
    Unstable { degree: usize },
    #[error("coefficient {degree} is not known well enough to certify the Newton polygon")]
    InsufficientPrecision { degree: usize },
    #[error("vertex near degree {degree} is ambiguous at the working precision")]
    VertexAmbiguous { degree: usize },
    #[error("no integer separates slopes {below} and {above}")]
    NoIntegralSeparation {
        below: Ratio<i64>,
        above: Ratio<i64>,
    },
    #[error("kernel dimension {got} differs from deg Q = {expected}")]
    RankMismatch { expected: usize, got: usize },
    #[error("Q*(u) is not visibly invertible on the complement at the working precision")]
    ComplementSingular,
    #[error("certified precision {got} is below the floor {floor}")]
    PrecisionFloor { got: u32, floor: u32 },
    #[error("operators {0} and {1} do not commute")]
    NotCommuting(usize, usize),
    #[error("h_aux = {h_aux} is below the sum {sum} of the slope bounds")]
    AuxTooSmall { h_aux: Ratio<i64>, sum: Ratio<i64> },
    #[error("projector tower exhausts precision at level {0}")]
    TowerInstability(u32),
    #[error("{0}")]
    Dimension(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Padic(#[from] PadicError),
}

/// A compact operator truncated to a `T x T` matrix.
#[derive(Debug, Clone)]
pub struct CompactOperator {
    matrix: Matrix,
    certificate: Vec<u32>,
    labels: Vec<String>,
    finite_rank: bool,
}

impl CompactOperator {
    /// An operator with a declared decay certificate, verified by a scan.
    pub fn new(
        matrix: Matrix,
        certificate: Vec<u32>,
        labels: Vec<String>,
    ) -> Result<Self, SlopeError> {
        if !matrix.is_square() || certificate.len() != matrix.cols() {
            return Err(SlopeError::Dimension("certificate length".into()));
        }
        for (j, c) in certificate.iter().enumerate() {
            if j > 0 && *c < certificate[j - 1] {
                return Err(SlopeError::Certificate(j));
            }
            if matrix.column_valuation(j) < *c {
                return Err(SlopeError::Certificate(j));
            }
        }
        Ok(CompactOperator {
            matrix,
            certificate,
            labels,
            finite_rank: false,
        })
    }

    /// A finite-rank operator; the certificate is the exact column valuations.
    pub fn finite(matrix: Matrix) -> Self {
        let certificate = (0..matrix.cols()).map(|j| matrix.column_valuation(j)).collect();
        let labels = (0..matrix.cols()).map(|j| format!("e{j}")).collect();
        CompactOperator {
            matrix,
            certificate,
            labels,
            finite_rank: true,
        }
    }

    /// Declares the truncation exact (a finite-rank operator), keeping the
    /// verified certificate; the `T` versus `T - 5` stability check is skipped.
    pub fn into_finite_rank(mut self) -> Self {
        self.finite_rank = true;
        self
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.matrix.rows()
    }

    pub fn certificate(&self) -> &[u32] {
        &self.certificate
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_finite_rank(&self) -> bool {
        self.finite_rank
    }

    /// Whether the Fredholm coefficients up to degree `d` agree between the
    /// truncations at `T` and `T - 5`.
    pub fn truncation_stable(&self, d: usize) -> Result<bool, SlopeError> {
        Ok(self.first_unstable_degree(d)?.is_none())
    }

    fn first_unstable_degree(&self, d: usize) -> Result<Option<usize>, SlopeError> {
        let t = self.size();
        if t < 6 {
            return Ok(Some(0));
        }
        let full = fredholm_matrix(&self.matrix, d)?;
        let small = fredholm_matrix(&self.matrix.leading(t - 5), d)?;
        let prec = full.precision().min(small.precision());
        let a = full.coeffs();
        let b = small.coeffs();
        for k in 0..=d {
            let x = a.get(k).copied().unwrap_or(full.ring().zero());
            let y = b.get(k).copied().unwrap_or(small.ring().zero());
            if !x.eq_mod(&y, prec) {
                return Ok(Some(k));
            }
        }
        Ok(None)
    }
}

/// `det(1 - t u)` as a one-variable series with constant term 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FredholmSeries {
    series: TruncatedSeries,
}

impl FredholmSeries {
    pub fn from_coeffs(ring: PadicRing, coeffs: &[PadicNum]) -> Result<Self, SlopeError> {
        let series = TruncatedSeries::univariate(ring, coeffs, GrowthProfile::Tate);
        Self::new(series)
    }

    pub fn new(series: TruncatedSeries) -> Result<Self, SlopeError> {
        if series.nvars() != 1 {
            return Err(SlopeError::Dimension("Fredholm series is univariate".into()));
        }
        let c0 = series.constant_term();
        if !c0.eq_mod(&series.ring().one(), series.precision()) {
            return Err(SlopeError::Dimension("constant term must be 1".into()));
        }
        Ok(FredholmSeries { series })
    }

    pub fn series(&self) -> &TruncatedSeries {
        &self.series
    }

    pub fn ring(&self) -> PadicRing {
        self.series.ring()
    }

    pub fn degree(&self) -> usize {
        self.series.degree() as usize
    }

    pub fn precision(&self) -> u32 {
        self.series.precision()
    }

    /// Coefficients of `t^0 .. t^D`.
    pub fn coeffs(&self) -> Vec<PadicNum> {
        (0..=self.series.degree())
            .map(|k| self.series.coeff(&[k]))
            .collect()
    }

    /// Product of the stored coefficient lists; the degree bounds add.
    pub fn mul(&self, other: &FredholmSeries) -> Result<FredholmSeries, SlopeError> {
        let prec = self.precision().min(other.precision());
        let ring = self.ring().with_precision(prec)?;
        let c = poly_mul(&self.coeffs(), &other.coeffs(), ring.zero());
        FredholmSeries::from_coeffs(ring, &c)
    }

    /// Coefficientwise congruence modulo `p^k` over the common degree range.
    pub fn eq_mod(&self, other: &FredholmSeries, k: u32) -> bool {
        let (a, b) = (self.coeffs(), other.coeffs());
        let n = a.len().max(b.len());
        let z = self.ring().zero();
        (0..n).all(|i| {
            let x = a.get(i).copied().unwrap_or(z);
            let y = b.get(i).copied().unwrap_or(z);
            x.eq_mod(&y, k)
        })
    }
}

/// Fredholm determinant of a truncated operator up to degree `d`.
pub fn fredholm_det(u: &CompactOperator, d: usize) -> Result<FredholmSeries, SlopeError> {
    if !u.finite_rank {
        if let Some(k) = u.first_unstable_degree(d)? {
            return Err(SlopeError::Unstable { degree: k });
        }
    }
    fredholm_matrix(&u.matrix, d)
}

/// Fredholm determinant of a matrix by power sums and Newton's identities.
///
/// The matrix is lifted by `v_p(D!)` guard digits so that the divisions in
/// the recursion cost nothing at the reported precision; the coefficients are
/// integer polynomials in the entries, so any lift gives the right residues.
pub fn fredholm_matrix(m: &Matrix, d: usize) -> Result<FredholmSeries, SlopeError> {
    if !m.is_square() {
        return Err(SlopeError::Dimension("Fredholm determinant of non-square matrix".into()));
    }
    let p = m.p();
    let n = m.precision();
    let deg = d.min(m.rows());
    let guard = padic::vp_factorial(p, deg as u64);
    let nw = (n + guard).min(padic::max_precision(p));
    let wring = PadicRing::new_any_prime(p, nw)?;
    let lifted = Matrix::from_fn(wring, m.rows(), m.cols(), |i, j| {
        m.get(i, j)
            .reduce(n)
            .lift(nw)
            .expect("within the maximal precision")
    });
    let mut sums = Vec::with_capacity(deg);
    let mut power = lifted.clone();
    for i in 0..deg {
        sums.push(power.trace());
        if i + 1 < deg {
            power = power.mul(&lifted)?;
        }
    }
    let mut c = vec![wring.one()];
    for k in 1..=deg {
        let mut acc = wring.zero();
        for i in 1..=k {
            acc = acc + sums[i - 1] * c[k - i];
        }
        c.push((-acc).div_int(k as i128)?);
    }
    let out_prec = c.iter().map(|x| x.precision()).min().unwrap_or(nw).min(n);
    let ring = PadicRing::new_any_prime(p, out_prec)?;
    let coeffs: Vec<PadicNum> = c.iter().map(|x| x.reduce(out_prec)).collect();
    FredholmSeries::from_coeffs(ring, &coeffs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Segment {
    #[serde(serialize_with = "ser_ratio")]
    pub slope: Ratio<i64>,
    pub multiplicity: u32,
}

fn ser_ratio<S: serde::Serializer>(r: &Ratio<i64>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&ratio_string(r))
}

pub fn ratio_string(r: &Ratio<i64>) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Lower convex hull of `(k, v_p(c_k))`, as ascending slopes with multiplicities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NewtonPolygon {
    pub segments: Vec<Segment>,
    /// Hull vertices `(k, v_p(c_k))`.
    pub vertices: Vec<(u32, u32)>,
}

impl NewtonPolygon {
    pub fn total_multiplicity(&self) -> u32 {
        self.segments.iter().map(|s| s.multiplicity).sum()
    }

    /// Slopes repeated by multiplicity.
    pub fn slope_multiset(&self) -> Vec<Ratio<i64>> {
        self.segments
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.slope, s.multiplicity as usize))
            .collect()
    }

    /// Total multiplicity of slopes `<= h`.
    pub fn count_at_most(&self, h: Ratio<i64>) -> u32 {
        self.segments
            .iter()
            .filter(|s| s.slope <= h)
            .map(|s| s.multiplicity)
            .sum()
    }

    /// Height of the hull at abscissa `k` (inside the hull's range).
    pub fn height_at(&self, k: u32) -> Ratio<i64> {
        for w in self.vertices.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if k >= x0 && k <= x1 {
                let s = Ratio::new(y1 as i64 - y0 as i64, (x1 - x0) as i64);
                return Ratio::from_integer(y0 as i64) + s * Ratio::from_integer((k - x0) as i64);
            }
        }
        Ratio::from_integer(self.vertices.last().map_or(0, |v| v.1) as i64)
    }
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Newton polygon of the known part of `F` through degree `d`.
///
/// Coefficients that vanish at their precision are only bounds; each must lie
/// on or above the hull, otherwise the polygon is not certified.
pub fn newton_slopes(f: &FredholmSeries, d: usize) -> Result<NewtonPolygon, SlopeError> {
    let coeffs = f.coeffs();
    let top = d.min(coeffs.len() - 1);
    let pts: Vec<(i64, i64)> = (0..=top)
        .filter_map(|k| match coeffs[k].valuation() {
            Valuation::Finite(v) => Some((k as i64, v as i64)),
            Valuation::AtLeast(_) => None,
        })
        .collect();
    let mut hull: Vec<(i64, i64)> = Vec::new();
    for pt in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], pt) <= 0 {
            hull.pop();
        }
        hull.push(pt);
    }
    let mut segments: Vec<Segment> = Vec::new();
    for w in hull.windows(2) {
        let slope = Ratio::new(w[1].1 - w[0].1, w[1].0 - w[0].0);
        let mult = (w[1].0 - w[0].0) as u32;
        match segments.last_mut() {
            Some(s) if s.slope == slope => s.multiplicity += mult,
            _ => segments.push(Segment {
                slope,
                multiplicity: mult,
            }),
        }
    }
    let poly = NewtonPolygon {
        segments,
        vertices: hull.iter().map(|(x, y)| (*x as u32, *y as u32)).collect(),
    };
    let last = hull.last().map_or(0, |v| v.0) as usize;
    for (k, c) in coeffs.iter().enumerate().take(last + 1) {
        if let Valuation::AtLeast(b) = c.valuation() {
            if Ratio::from_integer(b as i64) < poly.height_at(k as u32) {
                return Err(SlopeError::InsufficientPrecision { degree: k });
            }
        }
    }
    Ok(poly)
}

/// A factorization `F = Q S` into the parts of slope `<= h` and `> h`.
#[derive(Debug, Clone)]
pub struct SlopeFactorization {
    pub q: FredholmSeries,
    pub s: FredholmSeries,
    pub h: Ratio<i64>,
    pub degree: usize,
    pub certified_precision: u32,
}

fn poly_mul(a: &[PadicNum], b: &[PadicNum], zero: PadicNum) -> Vec<PadicNum> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut c = vec![zero; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            c[i + j] = c[i + j] + *x * *y;
        }
    }
    c
}

/// Multiply by `p^k` without discarding the digits this makes known.
fn shift_up(x: PadicNum, k: u32) -> PadicNum {
    let target = (x.precision() + k).min(padic::max_precision(x.p()));
    x.lift(target).expect("bounded by the maximal precision").mul_p_power(k)
}

/// Division of polynomials over `F_p` by a divisor with unit leading term.
fn div_rem_mod_p(num: &[u64], den: &[u64], p: u64) -> (Vec<u64>, Vec<u64>) {
    let dd = den.len() - 1;
    let lead_inv = {
        let l = den[dd] % p;
        (1..p).find(|x| (x * l) % p == 1).expect("unit leading coefficient")
    };
    let mut rem: Vec<u64> = num.iter().map(|x| x % p).collect();
    if rem.len() <= dd {
        return (Vec::new(), rem);
    }
    let mut quo = vec![0u64; rem.len() - dd];
    for k in (dd..rem.len()).rev() {
        let c = rem[k] * lead_inv % p;
        quo[k - dd] = c;
        if c != 0 {
            for (i, dc) in den.iter().enumerate() {
                let idx = k - dd + i;
                rem[idx] = (rem[idx] + p * p - c * (dc % p) % p) % p;
            }
        }
    }
    rem.truncate(dd);
    (quo, rem)
}

/// Factor `F = Q S` with `Q` a polynomial collecting the slopes `<= h`.
///
/// The roots are rescaled by an integer power `p^c` with `c` between the two
/// groups of slopes, which turns the problem into a Hensel lift of a
/// factorization that is coprime modulo `p`. Inputs whose slopes around `h`
/// admit no such integer are refused. The rescaling costs at most `c * D`
/// digits of precision on `Q`.
pub fn slope_factor(f: &FredholmSeries, h: Ratio<i64>) -> Result<SlopeFactorization, SlopeError> {
    let coeffs = f.coeffs();
    let big_d = coeffs.len() - 1;
    let n = f.precision();
    let ring = f.ring();
    let poly = newton_slopes(f, big_d)?;
    let d = poly.count_at_most(h) as usize;
    if d == 0 {
        let one = FredholmSeries::from_coeffs(ring, &[ring.one()])?;
        check_trailing(&coeffs, &poly, 0, 0, h)?;
        return Ok(SlopeFactorization {
            q: one,
            s: f.clone(),
            h,
            degree: 0,
            certified_precision: n,
        });
    }
    let q_max = poly
        .segments
        .iter()
        .filter(|s| s.slope <= h)
        .map(|s| s.slope)
        .max()
        .unwrap_or_else(Ratio::zero);
    let s_min = poly.segments.iter().find(|s| s.slope > h).map(|s| s.slope);
    let c = q_max.ceil().to_integer();
    if let Some(smin) = s_min {
        if Ratio::from_integer(c) >= smin {
            return Err(SlopeError::NoIntegralSeparation {
                below: q_max,
                above: smin,
            });
        }
    }
    let vd = match coeffs[d].valuation() {
        Valuation::Finite(v) => v,
        Valuation::AtLeast(_) => return Err(SlopeError::VertexAmbiguous { degree: d }),
    };
    let hp = if Ratio::from_integer(c) > h { Ratio::from_integer(c) } else { h };
    check_trailing(&coeffs, &poly, d, vd, hp)?;

    // H_k = c_k p^(c(d-k) - v_d): integral, unit at k = d, divisible by p beyond.
    let p = ring.p();
    let c = c as u32;
    let mut hk = Vec::with_capacity(big_d + 1);
    for (k, ck) in coeffs.iter().enumerate() {
        let e = c as i64 * (d as i64 - k as i64) - vd as i64;
        let x = if e >= 0 {
            shift_up(*ck, e as u32)
        } else {
            ck.div_p_power((-e) as u32)
                .map_err(|_| SlopeError::VertexAmbiguous { degree: k })?
        };
        hk.push(x);
    }
    let w = hk.iter().map(|x| x.precision()).min().unwrap_or(n);
    let wring = PadicRing::new_any_prime(p, w)?;
    let hk: Vec<PadicNum> = hk.iter().map(|x| x.reduce(w)).collect();
    let zero = wring.zero();

    let mut q: Vec<PadicNum> = hk[..=d].to_vec();
    let mut s: Vec<PadicNum> = vec![zero; big_d - d + 1];
    s[0] = wring.one();
    for j in 1..w {
        let prod = poly_mul(&q, &s, zero);
        let mut e = Vec::with_capacity(big_d + 1);
        for k in 0..=big_d {
            let diff = hk[k] - prod.get(k).copied().unwrap_or(zero);
            let dv = diff
                .div_p_power(j)
                .map_err(|_| SlopeError::VertexAmbiguous { degree: k })?;
            e.push(dv.residue() % p);
        }
        let qbar: Vec<u64> = q.iter().map(|x| x.residue() % p).collect();
        let (ds, r) = div_rem_mod_p(&e, &qbar, p);
        let pj = wring.one().mul_p_power(j);
        for (i, ri) in r.iter().enumerate() {
            q[i] = q[i] + pj * wring.elem(*ri as i128);
        }
        for (i, si) in ds.iter().enumerate() {
            if i < s.len() {
                s[i] = s[i] + pj * wring.elem(*si as i128);
            }
        }
    }

    // Undo the rescaling: Q(t) = Q_H(p^c t) / Q_H(0).
    let q0 = q[0];
    let e0 = c * d as u32 - vd;
    let q0_unit_inv = q0.div_p_power(e0).map_err(|_| SlopeError::VertexAmbiguous { degree: 0 })?.inv()?;
    let mut qc = Vec::with_capacity(d + 1);
    qc.push(PadicNum::new(p, n, 1)?);
    for (j, qj) in q.iter().enumerate().skip(1) {
        let scaled = shift_up(*qj, c * j as u32)
            .div_p_power(e0)
            .map_err(|_| SlopeError::VertexAmbiguous { degree: j })?;
        qc.push(scaled * q0_unit_inv);
    }
    let qprec = qc.iter().map(|x| x.precision()).min().unwrap_or(n).min(n);
    if qprec == 0 {
        return Err(SlopeError::PrecisionFloor { got: 0, floor: 1 });
    }
    let qring = PadicRing::new_any_prime(p, qprec)?;
    let qc: Vec<PadicNum> = qc.iter().map(|x| x.reduce(qprec)).collect();
    let qs = FredholmSeries::from_coeffs(qring, &qc)?;

    // S = F / Q as a series to degree D.
    let mut inv = vec![qring.one()];
    for k in 1..=big_d {
        let mut acc = qring.zero();
        for i in 1..=k.min(d) {
            acc = acc + qc[i] * inv[k - i];
        }
        inv.push(-acc);
    }
    let fr: Vec<PadicNum> = coeffs.iter().map(|x| x.reduce(qprec)).collect();
    let sc: Vec<PadicNum> = poly_mul(&fr, &inv, qring.zero())
        .into_iter()
        .take(big_d + 1)
        .collect();
    let ss = FredholmSeries::from_coeffs(qring, &sc)?;
    Ok(SlopeFactorization {
        q: qs,
        s: ss,
        h,
        degree: d,
        certified_precision: qprec,
    })
}

/// Points beyond the last known coefficient must sit strictly above the line
/// of slope `h` through the vertex `(d, v_d)`.
fn check_trailing(
    coeffs: &[PadicNum],
    poly: &NewtonPolygon,
    d: usize,
    vd: u32,
    h: Ratio<i64>,
) -> Result<(), SlopeError> {
    let last = poly.vertices.last().map_or(0, |v| v.0) as usize;
    for (k, ck) in coeffs.iter().enumerate().skip(d + 1) {
        if let Valuation::AtLeast(b) = ck.valuation() {
            let line = Ratio::from_integer(vd as i64) + h * Ratio::from_integer((k - d) as i64);
            // Points inside the known range were certified against the hull.
            if k > last && Ratio::from_integer(b as i64) <= line {
                return Err(SlopeError::VertexAmbiguous { degree: k });
            }
        }
    }
    Ok(())
}

/// `Q*(x) = x^d Q(1/x)` as ascending coefficients.
pub fn reversed(q: &FredholmSeries, d: usize) -> Vec<PadicNum> {
    let c = q.coeffs();
    let z = q.ring().zero();
    (0..=d).map(|i| c.get(d - i).copied().unwrap_or(z)).collect()
}

/// Finite slope part of an operator and its Riesz projector.
///
/// The projector is stored scaled: `e = p^(-shift) * projector`.
#[derive(Debug, Clone)]
pub struct SlopeDecomposition {
    pub h: Ratio<i64>,
    pub q: FredholmSeries,
    pub s: FredholmSeries,
    pub degree: usize,
    /// Columns span the finite part `N`; rows `free` form an identity block.
    pub basis: Matrix,
    pub free: Vec<usize>,
    pub projector: Matrix,
    pub shift: u32,
    pub certified_precision: u32,
}

impl SlopeDecomposition {
    pub fn rank(&self) -> usize {
        self.degree
    }
}

/// Decompose `M = N ⊕ F` for the slope `<= h` part of `u`.
///
/// `N` is the kernel of `Q*(u)`, which equals the kernel of `Q*(u)^deg Q`
/// because `Q*` is the characteristic polynomial of `u` on `N`; the left
/// kernel of `Q*(u)` annihilates `F = im Q*(u)`, which gives the projector
/// `K (L K)^-1 L`.
pub fn riesz_decompose(u: &CompactOperator, h: Ratio<i64>) -> Result<SlopeDecomposition, SlopeError> {
    riesz_decompose_with_floor(u, h, DEFAULT_PRECISION_FLOOR)
}

pub fn riesz_decompose_with_floor(
    u: &CompactOperator,
    h: Ratio<i64>,
    floor: u32,
) -> Result<SlopeDecomposition, SlopeError> {
    let m = u.matrix();
    let t = m.rows();
    let f = fredholm_det(u, t)?;
    let fac = slope_factor(&f, h)?;
    let d = fac.degree;
    let ring = m.ring();
    if fac.certified_precision < floor {
        return Err(SlopeError::PrecisionFloor {
            got: fac.certified_precision,
            floor,
        });
    }
    if d == 0 {
        return Ok(SlopeDecomposition {
            h,
            q: fac.q,
            s: fac.s,
            degree: 0,
            basis: Matrix::zeros(ring, t, 0),
            free: Vec::new(),
            projector: Matrix::zeros(ring, t, t),
            shift: 0,
            certified_precision: fac.certified_precision,
        });
    }
    let qstar = reversed(&fac.q, d);
    let a = m.poly_eval(&qstar)?;
    let (k, free) = a.kernel_with_free()?;
    if k.cols() != d {
        return Err(SlopeError::RankMismatch {
            expected: d,
            got: k.cols(),
        });
    }
    let l = a.left_kernel()?;
    if l.rows() != d {
        return Err(SlopeError::RankMismatch {
            expected: d,
            got: l.rows(),
        });
    }
    if complement_det_valuation(&a, d)?.is_none() {
        return Err(SlopeError::ComplementSingular);
    }
    let g = l.mul(&k)?;
    let (x, s) = g.solve_scaled(&Matrix::identity(g.ring(), d))?;
    let e_big = k.mul(&x)?.mul(&l)?;
    let t_div = e_big.min_valuation().min(s);
    let projector = e_big
        .div_p_power(t_div)
        .ok_or(SlopeError::PrecisionFloor { got: 0, floor })?;
    let shift = s - t_div;
    let certified = projector.precision().min(k.precision()).min(fac.certified_precision);
    if certified < floor {
        return Err(SlopeError::PrecisionFloor {
            got: certified,
            floor,
        });
    }
    Ok(SlopeDecomposition {
        h,
        q: fac.q,
        s: fac.s,
        degree: d,
        basis: k,
        free,
        projector: projector.reduced(certified),
        shift,
        certified_precision: certified,
    })
}

/// Outcome of checking the six projector identities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RieszReport {
    pub idempotent: bool,
    pub commutes: bool,
    pub rank_matches: bool,
    pub annihilated: bool,
    pub restricted_det_matches: bool,
    pub complement_invertible: bool,
    /// Valuation of `det(Q*(u) | im(1 - e))`.
    pub complement_det_valuation: Option<u32>,
    pub precision: u32,
}

impl RieszReport {
    pub fn all_hold(&self) -> bool {
        self.idempotent
            && self.commutes
            && self.rank_matches
            && self.annihilated
            && self.restricted_det_matches
            && self.complement_invertible
    }
}

/// Restriction of `a` to the span of `basis` (which `a` must preserve).
pub fn restrict(a: &Matrix, basis: &Matrix, free: &[usize]) -> Result<Matrix, SlopeError> {
    let image = a.mul(basis)?;
    let cols: Vec<usize> = (0..basis.cols()).collect();
    Ok(image.submatrix(free, &cols))
}

/// Valuation of `det(a | F)` where `F` is the kernel of the left kernel of
/// `a` (the complement of `ker a`); `None` when it vanishes at the working
/// precision.
fn complement_det_valuation(a: &Matrix, degree: usize) -> Result<Option<u32>, SlopeError> {
    let t = a.rows();
    if degree == t {
        return Ok(Some(0));
    }
    let (kf, free_f) = if degree == 0 {
        (Matrix::identity(a.ring(), t), (0..t).collect())
    } else {
        a.left_kernel()?.kernel_with_free()?
    };
    let restricted = restrict(a, &kf, &free_f)?;
    Ok(restricted.smith()?.det_valuation(restricted.rows()))
}

pub fn verify_riesz(u: &CompactOperator, dec: &SlopeDecomposition) -> Result<RieszReport, SlopeError> {
    let m = u.matrix();
    let e = &dec.projector;
    let prec = dec.certified_precision;
    let pk = m.ring().one().mul_p_power(dec.shift);
    let idempotent = e.mul(e)?.eq_mod(&e.scale(pk), prec);
    let commutes = m.mul(e)?.eq_mod(&e.mul(m)?, prec);
    let rank_matches = e.rank()? == dec.degree;
    let qstar = reversed(&dec.q, dec.degree);
    let a = m.poly_eval(&qstar)?;
    let annihilated = a.mul(e)?.is_zero_mod(prec);
    let restricted_det_matches = if dec.degree == 0 {
        true
    } else {
        let mr = restrict(m, &dec.basis, &dec.free)?;
        let fr = fredholm_matrix(&mr, dec.degree)?;
        fr.eq_mod(&dec.q, prec.min(fr.precision()))
    };
    let complement_det_valuation = complement_det_valuation(&a, dec.degree)?;
    let complement_invertible = complement_det_valuation.is_some();
    Ok(RieszReport {
        idempotent,
        commutes,
        rank_matches,
        annihilated,
        restricted_det_matches,
        complement_invertible,
        complement_det_valuation,
        precision: prec,
    })
}

/// Whether two subspaces, each given by a basis with an identity block on
/// its `free` rows, agree modulo `p^k`.
pub fn same_subspace(
    a: &Matrix,
    a_free: &[usize],
    b: &Matrix,
    k: u32,
) -> Result<bool, SlopeError> {
    if a.cols() != b.cols() || a.rows() != b.rows() {
        return Ok(false);
    }
    if a.cols() == 0 {
        return Ok(true);
    }
    let all: Vec<usize> = (0..b.cols()).collect();
    let coords = b.submatrix(a_free, &all);
    let recon = a.mul(&coords)?;
    Ok(recon.eq_mod(b, k) && coords.rank()? == a.cols())
}

/// Column space basis in the normalized form used by the decompositions.
pub fn column_space(m: &Matrix) -> Result<(Matrix, Vec<usize>), SlopeError> {
    // Kernel of the left kernel is the column space.
    let lk = m.left_kernel()?;
    if lk.rows() == 0 {
        let n = m.rows();
        return Ok((Matrix::identity(m.ring(), n), (0..n).collect()));
    }
    Ok(lk.kernel_with_free()?)
}

fn commute_check(us: &[CompactOperator]) -> Result<(), SlopeError> {
    for i in 0..us.len() {
        for j in i + 1..us.len() {
            let (a, b) = (us[i].matrix(), us[j].matrix());
            let prec = a.precision().min(b.precision());
            if !a.mul(b)?.eq_mod(&b.mul(a)?, prec) {
                return Err(SlopeError::NotCommuting(i, j));
            }
        }
    }
    Ok(())
}

/// Common finite part of commuting operators.
#[derive(Debug, Clone)]
pub struct MultiSlope {
    pub dimension: usize,
    /// Basis of the intersection of the individual finite parts.
    pub basis: Matrix,
    pub free: Vec<usize>,
    /// Product of the individual projectors, scaled by `p^shift`.
    pub projector: Matrix,
    pub shift: u32,
    pub iterated_equals_intersection: bool,
    pub orderings_agree: bool,
    pub orderings_checked: usize,
    pub certified_precision: u32,
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for perm in permutations(n - 1) {
        for pos in 0..=perm.len() {
            let mut q = perm.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Successively restrict to the slope parts of `us` in the given order,
/// starting from `start`.
fn iterate_order(
    us: &[CompactOperator],
    hs: &[Ratio<i64>],
    order: &[usize],
    start: (Matrix, Vec<usize>),
    floor: u32,
) -> Result<(Matrix, Vec<usize>, u32), SlopeError> {
    let (mut w, mut free) = start;
    let mut prec = w.precision();
    for &i in order {
        if w.cols() == 0 {
            break;
        }
        let r = restrict(us[i].matrix(), &w, &free)?;
        let dec = riesz_decompose_with_floor(&CompactOperator::finite(r), hs[i], floor)?;
        prec = prec.min(dec.certified_precision);
        let new_free: Vec<usize> = dec.free.iter().map(|f| free[*f]).collect();
        w = w.mul(&dec.basis)?;
        free = new_free;
    }
    Ok((w, free, prec))
}

/// `M^{<= h}` for commuting operators, checked against the iterated
/// construction inside `M^{U <= h_aux}` (with `U` the product) for every
/// ordering.
pub fn multi_slope_decompose(
    us: &[CompactOperator],
    hs: &[Ratio<i64>],
    h_aux: Ratio<i64>,
) -> Result<MultiSlope, SlopeError> {
    multi_slope_decompose_with_floor(us, hs, h_aux, DEFAULT_PRECISION_FLOOR)
}

pub fn multi_slope_decompose_with_floor(
    us: &[CompactOperator],
    hs: &[Ratio<i64>],
    h_aux: Ratio<i64>,
    floor: u32,
) -> Result<MultiSlope, SlopeError> {
    if us.is_empty() || us.len() != hs.len() {
        return Err(SlopeError::Dimension("need one slope bound per operator".into()));
    }
    let t = us[0].size();
    if us.iter().any(|u| u.size() != t) {
        return Err(SlopeError::Dimension("operators of different sizes".into()));
    }
    commute_check(us)?;
    let sum: Ratio<i64> = hs.iter().copied().sum();
    if h_aux < sum {
        return Err(SlopeError::AuxTooSmall { h_aux, sum });
    }
    let ring = us[0].matrix().ring();

    // Intersection of the individual finite parts.
    let mut projector = Matrix::identity(ring, t);
    let mut shift = 0;
    let mut prec = ring.precision();
    for (u, h) in us.iter().zip(hs) {
        let dec = riesz_decompose_with_floor(u, *h, floor)?;
        projector = projector.mul(&dec.projector)?;
        shift += dec.shift;
        prec = prec.min(dec.certified_precision);
    }
    let (basis, free) = column_space(&projector)?;
    prec = prec.min(basis.precision());

    // Iterated construction inside the h_aux part of the product operator.
    let mut product = us[0].matrix().clone();
    for u in &us[1..] {
        product = product.mul(u.matrix())?;
    }
    let aux = riesz_decompose_with_floor(&CompactOperator::finite(product), h_aux, floor)?;
    prec = prec.min(aux.certified_precision);
    let orders = permutations(us.len());
    let mut results = Vec::new();
    for order in &orders {
        let (w, _, pw) = iterate_order(us, hs, order, (aux.basis.clone(), aux.free.clone()), floor)?;
        prec = prec.min(pw);
        results.push(w);
    }
    let (direct, _, pd) = iterate_order(
        us,
        hs,
        &orders[0],
        (Matrix::identity(ring, t), (0..t).collect()),
        floor,
    )?;
    prec = prec.min(pd);
    if prec < floor {
        return Err(SlopeError::PrecisionFloor { got: prec, floor });
    }
    let mut iterated_equals_intersection = same_subspace(&basis, &free, &direct, prec)?;
    let mut orderings_agree = true;
    for w in &results {
        let eq = same_subspace(&basis, &free, w, prec)?;
        iterated_equals_intersection &= eq;
        orderings_agree &= eq;
    }
    Ok(MultiSlope {
        dimension: basis.cols(),
        basis,
        free,
        projector,
        shift,
        iterated_equals_intersection,
        orderings_agree,
        orderings_checked: orders.len(),
        certified_precision: prec,
    })
}

/// A polynomial `p^(-shift) * sum_k coeffs[k] x^k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaledPoly {
    pub coeffs: Vec<PadicNum>,
    pub shift: u32,
}

impl ScaledPoly {
    /// Absolute precision of the represented coefficients.
    pub fn absolute_precision(&self) -> i64 {
        self.coeffs.iter().map(|c| c.precision()).min().unwrap_or(0) as i64 - self.shift as i64
    }

    /// Coefficients cut off below `p^r` (absolute), as exact integers lifted to `lift_to`.
    pub fn truncated(&self, r: u32, lift_to: u32) -> Result<ScaledPoly, SlopeError> {
        let keep = r + self.shift;
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                if c.precision() < keep {
                    Err(SlopeError::TowerInstability(r))
                } else {
                    Ok(c.reduce(keep).lift(lift_to.max(keep))?)
                }
            })
            .collect::<Result<Vec<_>, SlopeError>>()?;
        Ok(ScaledPoly {
            coeffs,
            shift: self.shift,
        })
    }
}

/// Projector polynomials, one per operator; the projector is their product.
#[derive(Debug, Clone)]
pub struct ProjectorTower {
    pub factors: Vec<ScaledPoly>,
    pub ranks: Vec<usize>,
}

impl ProjectorTower {
    pub fn total_shift(&self) -> u32 {
        self.factors.iter().map(|f| f.shift).sum()
    }

    /// `e_r` as a product of one-variable polynomials, each truncated so that
    /// the product agrees with the projector modulo `p^r`.
    pub fn level(&self, r: u32) -> Result<Vec<ScaledPoly>, SlopeError> {
        let total = self.total_shift();
        self.factors
            .iter()
            .map(|f| {
                let guard = total - f.shift;
                let lift_to = f.coeffs.iter().map(|c| c.precision()).max().unwrap_or(1);
                f.truncated(r + guard, lift_to)
            })
            .collect()
    }

    /// `p^shift * e_r(u_1, ..., u_n)` and `shift`.
    pub fn apply(&self, us: &[CompactOperator], r: u32) -> Result<(Matrix, u32), SlopeError> {
        let level = self.level(r)?;
        let t = us[0].size();
        let mut acc = Matrix::identity(us[0].matrix().ring(), t);
        for (poly, u) in level.iter().zip(us) {
            acc = acc.mul(&u.matrix().poly_eval(&poly.coeffs)?)?;
        }
        Ok((acc, self.total_shift()))
    }
}

/// Compare `p^-a A` with `p^-b B` modulo `p^r`.
pub fn scaled_eq_mod(a: &Matrix, sa: u32, b: &Matrix, sb: u32, r: u32) -> bool {
    let lhs = Matrix::from_fn(a.ring(), a.rows(), a.cols(), |i, j| shift_up(a.get(i, j), sb));
    let rhs = Matrix::from_fn(b.ring(), b.rows(), b.cols(), |i, j| shift_up(b.get(i, j), sa));
    lhs.eq_mod(&rhs, r + sa + sb)
}

/// Build the projector polynomials.
///
/// With `S*` the reversed slope `> h` factor, `Phi = S*(u)` kills the
/// complement and is invertible on the finite part, so its characteristic
/// polynomial there, `chi(y) = sum_{k <= d} c_k y^(d-k)` read off
/// `det(1 - t Phi)`, gives `e = 1 - chi(Phi) / c_d`.
pub fn projector_poly_tower(
    us: &[CompactOperator],
    hs: &[Ratio<i64>],
    r_max: u32,
) -> Result<ProjectorTower, SlopeError> {
    if us.is_empty() || us.len() != hs.len() {
        return Err(SlopeError::Dimension("need one slope bound per operator".into()));
    }
    commute_check(us)?;
    let mut factors = Vec::new();
    let mut ranks = Vec::new();
    for (u, h) in us.iter().zip(hs) {
        let m = u.matrix();
        let t = m.rows();
        let f = fredholm_det(u, t)?;
        let fac = slope_factor(&f, *h)?;
        let d = fac.degree;
        ranks.push(d);
        let ring = PadicRing::new_any_prime(m.p(), fac.certified_precision)?;
        if d == 0 {
            factors.push(ScaledPoly {
                coeffs: vec![ring.zero()],
                shift: 0,
            });
            continue;
        }
        if d == t {
            factors.push(ScaledPoly {
                coeffs: vec![ring.one()],
                shift: 0,
            });
            continue;
        }
        let sstar = reversed(&fac.s, t - d);
        let phi = m.poly_eval(&sstar)?;
        let chi = fredholm_matrix(&phi, d)?.coeffs();
        let cd = chi[d];
        let v0 = match cd.valuation() {
            Valuation::Finite(v) => v,
            Valuation::AtLeast(_) => return Err(SlopeError::TowerInstability(0)),
        };
        let w = cd.div_p_power(v0)?.inv()?;
        // P~ = -sum_{k<d} c_k w S*(x)^(d-k).
        let zero = sstar[0].ring().zero();
        let mut acc: Vec<PadicNum> = vec![zero];
        let mut power = vec![sstar[0].ring().one()];
        let mut powers = Vec::new();
        for _ in 0..d {
            power = poly_mul(&power, &sstar, zero);
            powers.push(power.clone());
        }
        for (k, ck) in chi.iter().enumerate().take(d) {
            let coef = -(*ck * w);
            let pw = &powers[d - k - 1];
            if acc.len() < pw.len() {
                acc.resize(pw.len(), zero);
            }
            for (i, x) in pw.iter().enumerate() {
                acc[i] = acc[i] + coef * *x;
            }
        }
        factors.push(ScaledPoly {
            coeffs: acc,
            shift: v0,
        });
    }
    let tower = ProjectorTower { factors, ranks };
    tower.level(r_max)?;
    Ok(tower)
}

/// `h_crit = (<lambda, alpha> + 1) v`, with the positive sign convention.
pub fn h_crit(pairing: i64, v: u32) -> Ratio<i64> {
    Ratio::from_integer((pairing + 1) * v as i64)
}

/// Strict componentwise comparison `h_i < h_crit_i`.
pub fn non_critical(hs: &[Ratio<i64>], h_crits: &[Ratio<i64>]) -> bool {
    hs.len() == h_crits.len() && hs.iter().zip(h_crits).all(|(h, c)| h < c)
}

/// Parse `a/b` or an integer into an exact rational.
pub fn parse_ratio(s: &str) -> Option<Ratio<i64>> {
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let b: i64 = b.trim().parse().ok()?;
            if b == 0 {
                return None;
            }
            Some(Ratio::new(a.trim().parse().ok()?, b))
        }
        None => Some(Ratio::from_integer(s.parse().ok()?)),
    }
}

/// Slopes with multiplicities as a sorted map, for multiset comparisons.
pub fn slope_counts(slopes: &[Ratio<i64>]) -> BTreeMap<Ratio<i64>, usize> {
    let mut m = BTreeMap::new();
    for s in slopes {
        *m.entry(*s).or_insert(0) += 1;
    }
    m
}

/// Whether a rational is non-negative.
pub fn is_nonnegative(r: &Ratio<i64>) -> bool {
    !r.is_negative()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(p: u64, n: u32) -> PadicRing {
        PadicRing::new(p, n).unwrap()
    }

    fn r(a: i64) -> Ratio<i64> {
        Ratio::from_integer(a)
    }

    fn fred(f: PadicRing, c: &[i128]) -> FredholmSeries {
        let cs: Vec<PadicNum> = c.iter().map(|x| f.elem(*x)).collect();
        FredholmSeries::from_coeffs(f, &cs).unwrap()
    }

    #[test]
    fn fredholm_of_diagonal_and_nilpotent() {
        let f = ring(5, 6);
        let m = Matrix::from_ints(f, &[vec![3, 0], vec![0, 10]]);
        let det = fredholm_det(&CompactOperator::finite(m), 2).unwrap();
        assert!(det.eq_mod(&fred(f, &[1, -13, 30]), 6));
        let nil = Matrix::from_ints(f, &[vec![0, 1, 7], vec![0, 0, 2], vec![0, 0, 0]]);
        let det = fredholm_det(&CompactOperator::finite(nil), 3).unwrap();
        assert!(det.eq_mod(&fred(f, &[1]), 6));
    }

    #[test]
    fn fredholm_matches_cofactor_minors() {
        let f = ring(5, 6);
        let a = [[7i128, 3, 11], [2, 9, 4], [13, 6, 1]];
        let m = Matrix::from_ints(f, &a.iter().map(|r| r.to_vec()).collect::<Vec<_>>());
        let tr = a[0][0] + a[1][1] + a[2][2];
        let m2 = (a[0][0] * a[1][1] - a[0][1] * a[1][0])
            + (a[0][0] * a[2][2] - a[0][2] * a[2][0])
            + (a[1][1] * a[2][2] - a[1][2] * a[2][1]);
        let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        let got = fredholm_det(&CompactOperator::finite(m), 3).unwrap();
        assert_eq!(got.precision(), 6);
        assert!(got.eq_mod(&fred(f, &[1, -tr, m2, -det]), 6));
    }

    #[test]
    fn newton_polygon_examples() {
        let f = ring(3, 10);
        let np = newton_slopes(&fred(f, &[1, -4, 3]), 2).unwrap();
        assert_eq!(np.slope_multiset(), vec![r(0), r(1)]);
        assert!(newton_slopes(&fred(f, &[1]), 0).unwrap().segments.is_empty());
        // (1 - 3t)^3 = 1 - 9t + 27t^2 - 27t^3
        let np = newton_slopes(&fred(f, &[1, -9, 27, -27]), 3).unwrap();
        assert_eq!(np.segments, vec![Segment { slope: r(1), multiplicity: 3 }]);
    }

    #[test]
    fn slope_factor_examples() {
        let f = ring(3, 10);
        let big = fred(f, &[1, -4, 3]);
        let fac = slope_factor(&big, r(0)).unwrap();
        assert!(fac.q.eq_mod(&fred(f, &[1, -1]), fac.certified_precision));
        assert!(fac.s.eq_mod(&fred(f, &[1, -3]), fac.certified_precision));
        let low = slope_factor(&fred(f, &[1, -3, 27]), Ratio::new(1, 2)).unwrap();
        assert_eq!(low.degree, 0);
        let high = slope_factor(&big, r(5)).unwrap();
        assert!(high.q.eq_mod(&big, 10));
        assert!(high.s.eq_mod(&fred(f, &[1]), 10));
    }

    #[test]
    fn slope_factor_with_positive_cut() {
        let f = ring(3, 20);
        // (1 - 3t)(1 - 2*9t)(1 - 81t) cut at h = 2
        let q = fred(f, &[1, -3]).mul(&fred(f, &[1, -18])).unwrap();
        let big = q.mul(&fred(f, &[1, -81])).unwrap();
        let fac = slope_factor(&big, r(2)).unwrap();
        assert_eq!(fac.degree, 2);
        assert!(fac.q.eq_mod(&q, fac.certified_precision));
        let back = fac.q.mul(&fac.s).unwrap();
        assert!(back.eq_mod(&big, fac.certified_precision));
        // The rescaling by p^c costs c * D digits: 20 - 2 * 3.
        assert_eq!(fac.certified_precision, 14);
    }

    #[test]
    fn riesz_examples() {
        let f = ring(3, 12);
        let diag = CompactOperator::finite(Matrix::from_ints(f, &[vec![1, 0], vec![0, 3]]));
        let dec = riesz_decompose(&diag, r(0)).unwrap();
        assert_eq!(dec.shift, 0);
        assert!(dec.projector.eq_mod(&Matrix::from_ints(f, &[vec![1, 0], vec![0, 0]]), 12));
        assert!(verify_riesz(&diag, &dec).unwrap().all_hold());

        let tri = CompactOperator::finite(Matrix::from_ints(f, &[vec![1, 1], vec![0, 3]]));
        let dec = riesz_decompose(&tri, r(0)).unwrap();
        assert_eq!(dec.degree, 1);
        let v = dec.basis.column(0);
        assert!(v[1].is_zero());
        let report = verify_riesz(&tri, &dec).unwrap();
        assert!(report.all_hold(), "{report:?}");
        assert_eq!(report.complement_det_valuation, Some(0));
    }

    #[test]
    fn block_diagonal_multiplicativity() {
        let f = ring(5, 8);
        let a = Matrix::from_ints(f, &[vec![2, 5], vec![7, 25]]);
        let b = Matrix::from_ints(f, &[vec![1, 3, 0], vec![5, 10, 1], vec![0, 25, 125]]);
        let fa = fredholm_matrix(&a, 2).unwrap();
        let fb = fredholm_matrix(&b, 3).unwrap();
        let fab = fredholm_matrix(&a.block_diag(&b), 5).unwrap();
        assert!(fab.eq_mod(&fa.mul(&fb).unwrap(), 8));
    }

    #[test]
    fn multi_slope_diagonal() {
        let f = ring(3, 10);
        let u1 = CompactOperator::finite(Matrix::diagonal(f, &[f.one(), f.elem(3), f.one()]));
        let u2 = CompactOperator::finite(Matrix::diagonal(f, &[f.one(), f.one(), f.elem(3)]));
        let res = multi_slope_decompose(&[u1, u2], &[r(0), r(0)], Ratio::new(1, 2)).unwrap();
        assert_eq!(res.dimension, 1);
        assert!(res.orderings_agree && res.iterated_equals_intersection);
        assert_eq!(res.orderings_checked, 2);
        let v = res.basis.column(0);
        assert!(v[1].is_zero() && v[2].is_zero() && !v[0].is_zero());
    }

    #[test]
    fn tower_on_slope_split() {
        let f = ring(3, 16);
        let u = CompactOperator::finite(Matrix::from_ints(f, &[vec![1, 1], vec![0, 3]]));
        let dec = riesz_decompose(&u, r(0)).unwrap();
        let tower = projector_poly_tower(&[u.clone()], &[r(0)], 6).unwrap();
        let mut prev: Option<(Matrix, u32)> = None;
        for level in 1..=6 {
            let (er, s) = tower.apply(&[u.clone()], level).unwrap();
            assert!(scaled_eq_mod(&er, s, &dec.projector, dec.shift, level));
            if let Some((pm, ps)) = &prev {
                assert!(scaled_eq_mod(&er, s, pm, *ps, level - 1));
            }
            prev = Some((er, s));
        }
    }

    #[test]
    fn critical_slopes() {
        assert_eq!(h_crit(4, 1), r(5));
        assert_eq!(h_crit(-1, 1), r(0));
        assert!(!non_critical(&[r(0)], &[h_crit(-1, 1)]));
        assert!(non_critical(&[r(0), r(0)], &[r(1), r(1)]));
    }

    #[test]
    fn ratio_literals() {
        assert_eq!(parse_ratio("3/6"), Some(Ratio::new(1, 2)));
        assert_eq!(parse_ratio("2"), Some(r(2)));
        assert_eq!(parse_ratio("1/0"), None);
    }
}
