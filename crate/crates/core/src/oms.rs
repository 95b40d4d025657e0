//! Modular symbols for `Gamma0(L)` with a `U_p` action: an exact classical
//! oracle over `Q`, and overconvergent symbols whose values are moment tables.
//!
//! Conventions:
//! * weight `k` uses coefficients of degree `kappa = k - 2`, with the right
//!   action `(mu|g)(x^j) = mu((b + d x)^j (a + c x)^(kappa - j))`;
//! * for a tame level `N` with `p` not dividing `N` the computation runs at
//!   `L = Np`, and for `p || N` at `L = N`;
//! * `U_p = sum_a [[1, a], [0, p]]`, without a normalizing twist;
//! * the critical slope is `k - 1`.
//!
//! Symbols are functions on the cosets of `Gamma0(L)` in `SL2(Z)` subject to
//! the two- and three-term Manin relations. Overconvergent symbols are only
//! built for torsion-free levels: the relations are then solved by peeling
//! generators off three-term relations, leaving one difference equation
//! `lambda|Delta^w - lambda = nu` for the identity coset.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::matrix::{Matrix, MatrixError};
use crate::padic::{self, PadicError, PadicNum, PadicRing, Valuation};
use crate::slope::{NewtonPolygon, Segment};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OmsError {
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("Gamma0({0}) has elliptic points; overconvergent symbols need a torsion-free level")]
    Torsion(u64),
    #[error("{0}")]
    Unsupported(String),
    #[error("slope {slope} is not below the critical slope {critical}")]
    CriticalSlope { slope: String, critical: String },
    #[error("precision floor: {0}")]
    PrecisionFloor(String),
    #[error("truncation instability: {0}")]
    TruncationInstability(String),
    #[error("symbol cannot be lifted: {0}")]
    NotLiftable(String),
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// An integer 2x2 matrix `[a, b, c, d]`.
pub type IMat = [i64; 4];

const ID: IMat = [1, 0, 0, 1];
const S: IMat = [0, -1, 1, 0];
const T: IMat = [0, -1, 1, -1];

pub fn imul(x: &IMat, y: &IMat) -> IMat {
    [
        x[0] * y[0] + x[1] * y[2],
        x[0] * y[1] + x[1] * y[3],
        x[2] * y[0] + x[3] * y[2],
        x[2] * y[1] + x[3] * y[3],
    ]
}

/// Inverse of a determinant-one matrix.
pub fn iinv(x: &IMat) -> IMat {
    debug_assert_eq!(x[0] * x[3] - x[1] * x[2], 1);
    [x[3], -x[1], -x[2], x[0]]
}

/// Representative of `+-m` with `c > 0`, or `c = 0, d > 0`; the sign picks
/// up `(-1)^kappa`, the action of `-1`.
fn normalize(m: IMat, kappa: i64) -> (IMat, i64) {
    if m[2] < 0 || (m[2] == 0 && m[3] < 0) {
        (m.map(|x| -x), if kappa % 2 == 0 { 1 } else { -1 })
    } else {
        (m, 1)
    }
}

/// Cosets of `Gamma0(L)` in `SL2(Z)`, indexed by `P^1(Z/L)`.
#[derive(Debug, Clone)]
pub struct ManinPresentation {
    level: u64,
    elems: Vec<(u64, u64)>,
    index: HashMap<(u64, u64), usize>,
    reps: Vec<IMat>,
}

impl ManinPresentation {
    pub fn new(level: u64) -> Self {
        let n = level.max(1);
        let units: Vec<u64> = (1..=n).filter(|u| u.gcd(&n) == 1).collect();
        let mut keys = BTreeMap::new();
        for c in 0..n {
            for d in 0..n {
                if c.gcd(&d).gcd(&n) != 1 && n > 1 {
                    continue;
                }
                let key = units
                    .iter()
                    .map(|u| ((u * c) % n, (u * d) % n))
                    .min()
                    .expect("at least one unit");
                keys.insert((c, d), key);
            }
        }
        let elems: Vec<(u64, u64)> = keys.values().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let pos: HashMap<(u64, u64), usize> = elems.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let index = keys.into_iter().map(|(cd, key)| (cd, pos[&key])).collect();
        let reps = elems.iter().map(|(c, d)| lift_pair(*c as i64, *d as i64, n as i64)).collect();
        ManinPresentation {
            level: n,
            elems,
            index,
            reps,
        }
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn reps(&self) -> &[IMat] {
        &self.reps
    }

    pub fn coset(&self, g: &IMat) -> usize {
        let n = self.level as i64;
        let key = (g[2].rem_euclid(n) as u64, g[3].rem_euclid(n) as u64);
        self.index[&key]
    }

    /// `g = delta * rep_j` with `delta` in `Gamma0(L)`.
    pub fn decompose(&self, g: &IMat) -> (usize, IMat) {
        let j = self.coset(g);
        let delta = imul(g, &iinv(&self.reps[j]));
        debug_assert_eq!(delta[2].rem_euclid(self.level as i64), 0);
        (j, delta)
    }

    /// The coset `j` with `rep_j` the identity class.
    pub fn identity_coset(&self) -> usize {
        self.coset(&ID)
    }

    /// Number of solutions of `x^2 + 1 = 0` and `x^2 + x + 1 = 0` mod `L`.
    pub fn elliptic_points(&self) -> (usize, usize) {
        let n = self.level;
        let two = (0..n).filter(|x| (x * x + 1) % n == 0).count();
        let three = (0..n).filter(|x| (x * x + x + 1) % n == 0).count();
        if n == 1 {
            (1, 1)
        } else {
            (two, three)
        }
    }

    pub fn is_torsion_free(&self) -> bool {
        self.elliptic_points() == (0, 0)
    }

    /// Number of cusps, `sum_{d | L} phi(gcd(d, L/d))`.
    pub fn cusp_count(&self) -> usize {
        let n = self.level;
        (1..=n)
            .filter(|d| n % d == 0)
            .map(|d| euler_phi(d.gcd(&(n / d))) as usize)
            .sum()
    }

    /// Rows of the relation system on `len() * dim` unknowns: for each coset
    /// one two-term block and one three-term block, as `(coset, matrix)` terms
    /// meaning `sum v_coset | matrix = 0`.
    fn relations(&self) -> Vec<Vec<(usize, IMat)>> {
        let mut out = Vec::new();
        for (j, g) in self.reps.iter().enumerate() {
            let (j1, d1) = self.decompose(&imul(g, &S));
            out.push(vec![(j, ID), (j1, iinv(&d1))]);
            let (j1, d1) = self.decompose(&imul(g, &T));
            let (j2, d2) = self.decompose(&imul(g, &imul(&T, &T)));
            out.push(vec![(j, ID), (j1, iinv(&d1)), (j2, iinv(&d2))]);
        }
        out
    }

    /// The terms `(sign, coset, matrix)` of `(phi|U_p)(rep_j) = sum sign phi(coset)|matrix`.
    fn up_terms(&self, j: usize, p: u64) -> Vec<(i64, usize, IMat)> {
        let g = self.reps[j];
        let mut out = Vec::new();
        for a in 0..p as i64 {
            let ga = [1, a, 0, p as i64];
            let h = imul(&ga, &g);
            for (sign, gamma) in unimodular_path((h[1], h[3]), (h[0], h[2])) {
                let (jj, dl) = self.decompose(&gamma);
                out.push((sign, jj, imul(&iinv(&dl), &ga)));
            }
        }
        out
    }
}

fn euler_phi(n: u64) -> u64 {
    (1..=n).filter(|k| k.gcd(&n) == 1).count() as u64
}

/// A matrix in `SL2(Z)` with bottom row congruent to `(c, d)` mod `n`.
fn lift_pair(c: i64, d: i64, n: i64) -> IMat {
    for s in 0..64 {
        for t in 0..64 {
            let cc = c + s * n;
            let dd = d + t * n;
            let e = dd.extended_gcd(&cc);
            if e.gcd == 1 {
                // x dd + y cc = 1, so [[x, -y], [cc, dd]] has determinant 1.
                return [e.x, -e.y, cc, dd];
            }
        }
    }
    unreachable!("a coprime lift exists within 64 steps")
}

/// Matrices `gamma` in `SL2(Z)` with `{inf, a/b} = sum gamma{0, inf}`, from
/// the continued-fraction convergents of `a/b`.
fn unimodular_to(a: i64, b: i64) -> Vec<IMat> {
    let (mut x, mut y) = if b < 0 { (-a, -b) } else { (a, b) };
    let (mut pm1, mut qm1, mut pm2, mut qm2) = (1i64, 0i64, 0i64, 1i64);
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let q = x.div_euclid(y);
        let rem = x.rem_euclid(y);
        let pk = q * pm1 + pm2;
        let qk = q * qm1 + qm2;
        let sgn = if k % 2 == 1 { 1 } else { -1 };
        out.push([pk, sgn * pm1, qk, sgn * qm1]);
        pm2 = pm1;
        qm2 = qm1;
        pm1 = pk;
        qm1 = qk;
        k += 1;
        if rem == 0 {
            break;
        }
        x = y;
        y = rem;
    }
    out
}

/// `{src, dst} = {inf, dst} - {inf, src}` as signed unimodular paths.
fn unimodular_path(src: (i64, i64), dst: (i64, i64)) -> Vec<(i64, IMat)> {
    let mut out = Vec::new();
    for (sign, (a, b)) in [(1, dst), (-1, src)] {
        if b == 0 {
            continue;
        }
        let g = a.gcd(&b);
        for m in unimodular_to(a / g, b / g) {
            out.push((sign, m));
        }
    }
    out
}

/// `binom(e, i)` for any integer `e`.
fn binom_signed(e: i64, i: usize) -> i128 {
    let mut c: i128 = 1;
    for t in 0..i as i128 {
        c = c * (e as i128 - t) / (t + 1);
    }
    c
}

/// Row `j` of the action of `g` on the first `size` moments, mod `p^N`.
fn act_padic(g: &IMat, kappa: i64, size: usize, ring: PadicRing) -> Result<Vec<Vec<PadicNum>>, OmsError> {
    let [a, b, c, d] = g.map(|x| ring.elem(x as i128));
    if !a.is_unit() {
        return Err(OmsError::Unsupported(format!("upper-left entry of {g:?} is not a p-adic unit")));
    }
    let a_inv = a.inv()?;
    let ratio = c * a_inv;
    let mut out = Vec::with_capacity(size);
    for j in 0..size {
        let poly: Vec<PadicNum> = (0..=j)
            .map(|i| ring.elem(binom_signed(j as i64, i)) * b.pow((j - i) as u64) * d.pow(i as u64))
            .collect();
        let e = kappa - j as i64;
        let ae = a.pow_signed(e)?;
        let twist: Vec<PadicNum> = (0..size)
            .map(|i| ae * ring.elem(binom_signed(e, i)) * ratio.pow(i as u64))
            .collect();
        let mut row = vec![ring.zero(); size];
        for (i1, x) in poly.iter().enumerate() {
            for (i2, y) in twist.iter().enumerate().take(size - i1.min(size)) {
                row[i1 + i2] = row[i1 + i2] + *x * *y;
            }
        }
        out.push(row);
    }
    Ok(out)
}

/// Exact action on the degree-`kappa` moments.
fn act_exact(g: &IMat, kappa: i64) -> Vec<Vec<BigInt>> {
    let size = kappa as usize + 1;
    let [a, b, c, d] = g.map(BigInt::from);
    let pow = |x: &BigInt, e: usize| num_traits::pow(x.clone(), e);
    (0..size)
        .map(|j| {
            let e = size - 1 - j;
            let mut row = vec![BigInt::zero(); size];
            for i1 in 0..=j {
                let x = BigInt::from(binom_signed(j as i64, i1)) * pow(&b, j - i1) * pow(&d, i1);
                for i2 in 0..=e {
                    let y = BigInt::from(binom_signed(e as i64, i2)) * pow(&a, e - i2) * pow(&c, i2);
                    row[i1 + i2] += &x * &y;
                }
            }
            row
        })
        .collect()
}

fn apply(act: &[Vec<PadicNum>], v: &[PadicNum]) -> Vec<PadicNum> {
    act.iter()
        .map(|row| {
            row.iter()
                .zip(v)
                .fold(v[0].ring().zero(), |acc, (a, x)| acc + *a * *x)
        })
        .collect()
}

fn axpy(acc: &mut [PadicNum], c: i64, v: &[PadicNum]) {
    let ring = v[0].ring();
    let c = ring.elem(c as i128);
    for (a, x) in acc.iter_mut().zip(v) {
        *a = *a + c * *x;
    }
}

fn check_parameters(tame: u64, k: u32, p: u64) -> Result<u64, OmsError> {
    if !(1..=30).contains(&tame) {
        return Err(OmsError::OutOfRange(format!("tame level {tame} outside 1..=30")));
    }
    if !(2..=12).contains(&k) || k % 2 != 0 {
        return Err(OmsError::OutOfRange(format!("weight {k} must be even in 2..=12")));
    }
    padic::check_odd_prime(p)?;
    if tame % (p * p) == 0 {
        return Err(OmsError::OutOfRange(format!("p^2 divides the level {tame}")));
    }
    Ok(if tame % p == 0 { tame } else { tame * p })
}

// ---------------------------------------------------------------------------
// Exact classical oracle

fn q(x: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// `v_p` of a nonzero rational.
fn vp_rational(x: &BigRational, p: u64) -> i64 {
    let pb = BigInt::from(p);
    let count = |n: &BigInt| {
        let mut n = n.abs();
        let mut v = 0;
        while (&n % &pb).is_zero() {
            n /= &pb;
            v += 1;
        }
        v
    };
    count(x.numer()) - count(x.denom())
}

/// Kernel basis of a rational matrix; basis vector `i` is 1 at `free[i]`.
fn rational_kernel(rows: &[Vec<BigRational>], ncols: usize) -> (Vec<Vec<BigRational>>, Vec<usize>) {
    let mut a: Vec<Vec<BigRational>> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(pr) = (r..a.len()).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(r, pr);
        let inv = a[r][c].recip();
        for x in a[r].iter_mut() {
            *x = &*x * &inv;
        }
        let pivot_row = a[r].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x -= &f * y;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == a.len() {
            break;
        }
    }
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    let basis = free
        .iter()
        .map(|&f| {
            let mut v = vec![BigRational::zero(); ncols];
            v[f] = BigRational::one();
            for (i, &c) in pivots.iter().enumerate() {
                v[c] = -a[i][f].clone();
            }
            v
        })
        .collect();
    (basis, free)
}

/// Coefficients of `det(1 - t X)` by the Faddeev-LeVerrier recursion.
fn rational_fredholm(x: &[Vec<BigRational>]) -> Vec<BigRational> {
    let n = x.len();
    let mut m = vec![vec![BigRational::zero(); n]; n];
    let mut c = vec![BigRational::one()];
    for k in 1..=n {
        for (i, row) in m.iter_mut().enumerate() {
            row[i] += c[k - 1].clone();
        }
        let xm: Vec<Vec<BigRational>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).fold(BigRational::zero(), |acc, t| acc + &x[i][t] * &m[t][j]))
                    .collect()
            })
            .collect();
        let tr = (0..n).fold(BigRational::zero(), |acc, i| acc + &xm[i][i]);
        c.push(-tr / q(k as i64));
        m = xm;
    }
    c
}

fn hull_polygon(points: &[(i64, i64)]) -> NewtonPolygon {
    let mut hull: Vec<(i64, i64)> = Vec::new();
    for &pt in points {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            if (a.0 - o.0) * (pt.1 - o.1) - (a.1 - o.1) * (pt.0 - o.0) <= 0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    let mut segments: Vec<Segment> = Vec::new();
    for w in hull.windows(2) {
        let slope = Ratio::new(w[1].1 - w[0].1, w[1].0 - w[0].0);
        let mult = (w[1].0 - w[0].0) as u32;
        match segments.last_mut() {
            Some(s) if s.slope == slope => s.multiplicity += mult,
            _ => segments.push(Segment { slope, multiplicity: mult }),
        }
    }
    NewtonPolygon {
        segments,
        vertices: hull.iter().map(|(a, b)| (*a as u32, *b as u32)).collect(),
    }
}

/// A classical symbol: `kappa + 1` rational moments per coset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassicalSymbol {
    pub values: Vec<Vec<BigRational>>,
}

impl ClassicalSymbol {
    pub fn is_zero(&self) -> bool {
        self.values.iter().flatten().all(|x| x.is_zero())
    }
}

/// Weight-`k` modular symbols for `Gamma0(L)` over `Q` with exact `U_p`.
#[derive(Debug, Clone)]
pub struct ClassicalSpace {
    tame: u64,
    k: u32,
    p: u64,
    pres: ManinPresentation,
    basis: Vec<Vec<BigRational>>,
    up: Vec<Vec<BigRational>>,
}

/// The classical symbol space and its `U_p` matrix (exact).
pub fn classical_symbols(tame: u64, k: u32, p: u64) -> Result<ClassicalSpace, OmsError> {
    let level = check_parameters(tame, k, p)?;
    let pres = ManinPresentation::new(level);
    let kappa = k as i64 - 2;
    let dim = kappa as usize + 1;
    let n = pres.len();
    let ncols = n * dim;
    let mut rows = Vec::new();
    for rel in pres.relations() {
        let mut block = vec![vec![BigRational::zero(); ncols]; dim];
        for (j, m) in rel {
            let act = act_exact(&m, kappa);
            for (r, row) in act.iter().enumerate() {
                for (c, x) in row.iter().enumerate() {
                    block[r][j * dim + c] += BigRational::from_integer(x.clone());
                }
            }
        }
        rows.extend(block);
    }
    let (basis, free) = rational_kernel(&rows, ncols);
    let mut up_full: Vec<BTreeMap<usize, BigRational>> = vec![BTreeMap::new(); ncols];
    for j in 0..n {
        for (sign, jj, m) in pres.up_terms(j, p) {
            let act = act_exact(&m, kappa);
            for (r, row) in act.iter().enumerate() {
                for (c, x) in row.iter().enumerate() {
                    if !x.is_zero() {
                        *up_full[j * dim + r].entry(jj * dim + c).or_insert_with(BigRational::zero) +=
                            BigRational::from_integer(x * sign);
                    }
                }
            }
        }
    }
    let image = |v: &[BigRational]| -> Vec<BigRational> {
        up_full
            .iter()
            .map(|row| row.iter().fold(BigRational::zero(), |acc, (c, x)| acc + x * &v[*c]))
            .collect()
    };
    let d = basis.len();
    let mut up = vec![vec![BigRational::zero(); d]; d];
    for (a, v) in basis.iter().enumerate() {
        let w = image(v);
        for (b, &f) in free.iter().enumerate() {
            up[b][a] = w[f].clone();
        }
        let recon: Vec<BigRational> = (0..ncols)
            .map(|i| (0..d).fold(BigRational::zero(), |acc, b| acc + &up[b][a] * &basis[b][i]))
            .collect();
        if recon != w {
            return Err(OmsError::Unsupported("U_p does not preserve the relation kernel".into()));
        }
    }
    Ok(ClassicalSpace {
        tame,
        k,
        p,
        pres,
        basis,
        up,
    })
}

impl ClassicalSpace {
    pub fn level(&self) -> u64 {
        self.pres.level()
    }

    pub fn tame_level(&self) -> u64 {
        self.tame
    }

    pub fn weight(&self) -> u32 {
        self.k
    }

    pub fn presentation(&self) -> &ManinPresentation {
        &self.pres
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// Dimension predicted by the Euler characteristic for torsion-free
    /// levels: `(index / 6)(kappa + 1)`, plus 1 in weight 2.
    pub fn expected_dimension(&self) -> Option<usize> {
        if !self.pres.is_torsion_free() {
            return None;
        }
        let kappa = self.k as usize - 2;
        Some(self.pres.len() / 6 * (kappa + 1) + usize::from(kappa == 0))
    }

    /// `dimension` minus the boundary contribution: `cusps - 1` in weight 2,
    /// `cusps` in higher weight.
    pub fn cuspidal_dimension(&self) -> usize {
        let c = self.pres.cusp_count();
        let boundary = if self.k == 2 { c - 1 } else { c };
        self.dimension().saturating_sub(boundary)
    }

    /// `U_p` in the kernel basis (column `a` is the image of basis vector `a`).
    pub fn up_matrix(&self) -> &[Vec<BigRational>] {
        &self.up
    }

    /// Coefficients of `det(1 - t U_p)`.
    pub fn fredholm(&self) -> Vec<BigRational> {
        rational_fredholm(&self.up)
    }

    pub fn newton_polygon(&self) -> NewtonPolygon {
        let pts: Vec<(i64, i64)> = self
            .fredholm()
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| (k as i64, vp_rational(c, self.p)))
            .collect();
        hull_polygon(&pts)
    }

    /// Slopes of `U_p` that are at most `h`, with multiplicity.
    pub fn slopes_at_most(&self, h: Ratio<i64>) -> Vec<Ratio<i64>> {
        self.newton_polygon()
            .slope_multiset()
            .into_iter()
            .filter(|s| *s <= h)
            .collect()
    }

    pub fn symbol_from_coords(&self, y: &[BigRational]) -> ClassicalSymbol {
        let dim = self.k as usize - 1;
        let flat: Vec<BigRational> = (0..self.pres.len() * dim)
            .map(|i| y.iter().zip(&self.basis).fold(BigRational::zero(), |acc, (c, b)| acc + c * &b[i]))
            .collect();
        ClassicalSymbol {
            values: flat.chunks(dim).map(|c| c.to_vec()).collect(),
        }
    }

    /// A basis of the `alpha`-eigenspace of `U_p`.
    pub fn eigen_symbols(&self, alpha: &BigRational) -> Vec<ClassicalSymbol> {
        let d = self.dimension();
        let rows: Vec<Vec<BigRational>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| if i == j { &self.up[i][j] - alpha } else { self.up[i][j].clone() })
                    .collect()
            })
            .collect();
        rational_kernel(&rows, d)
            .0
            .iter()
            .map(|y| self.symbol_from_coords(y))
            .collect()
    }

    /// `phi | U_p`, evaluated through the coset decomposition.
    pub fn apply_up(&self, phi: &ClassicalSymbol) -> ClassicalSymbol {
        let kappa = self.k as i64 - 2;
        let values = (0..self.pres.len())
            .map(|j| {
                let mut out = vec![BigRational::zero(); kappa as usize + 1];
                for (sign, jj, m) in self.pres.up_terms(j, self.p) {
                    for (r, row) in act_exact(&m, kappa).iter().enumerate() {
                        for (c, x) in row.iter().enumerate() {
                            out[r] += BigRational::from_integer(x * sign) * &phi.values[jj][c];
                        }
                    }
                }
                out
            })
            .collect();
        ClassicalSymbol { values }
    }
}

// ---------------------------------------------------------------------------
// Peeling the Manin relations

type Expr = BTreeMap<(usize, IMat), i64>;

fn add_term(e: &mut Expr, key: (usize, IMat), c: i64) {
    let slot = e.entry(key).or_insert(0);
    *slot += c;
    if *slot == 0 {
        e.remove(&key);
    }
}

/// `expr | alpha`, scaled.
fn compose(e: &Expr, alpha: &IMat, kappa: i64, scale: i64) -> Expr {
    let mut out = Expr::new();
    for ((g, m), c) in e {
        let (mm, s) = normalize(imul(m, alpha), kappa);
        add_term(&mut out, (*g, mm), c * s * scale);
    }
    out
}

fn substitute(e: &Expr, g: usize, sol: &Expr, kappa: i64) -> Expr {
    let mut out = Expr::new();
    for ((h, m), c) in e {
        if *h == g {
            for (key, v) in compose(sol, m, kappa, *c) {
                add_term(&mut out, key, v);
            }
        } else {
            add_term(&mut out, (*h, *m), *c);
        }
    }
    out
}

/// Result of peeling: every coset value as an expression in the free
/// generators and the identity coset `j0`, plus the leftover relation.
#[derive(Debug, Clone)]
struct Peeling {
    j0: usize,
    gens: Vec<usize>,
    solved: BTreeMap<usize, Expr>,
    /// Non-primary cosets `j` with `v_j = -v_j1 | d1^-1`.
    partners: Vec<(usize, usize, IMat)>,
    leftover: Expr,
}

fn peel(pres: &ManinPresentation, kappa: i64) -> Result<Peeling, OmsError> {
    let n = pres.len();
    let mut primary = vec![false; n];
    let mut assigned = vec![false; n];
    let mut val: Vec<Expr> = vec![Expr::new(); n];
    let mut partners = Vec::new();
    for j in 0..n {
        if assigned[j] {
            continue;
        }
        let (j1, d1) = pres.decompose(&imul(&pres.reps[j], &S));
        if j1 == j {
            return Err(OmsError::Torsion(pres.level()));
        }
        let mut e = Expr::new();
        add_term(&mut e, (j, ID), 1);
        val[j1] = compose(&e, &d1, kappa, -1);
        val[j] = e;
        primary[j] = true;
        assigned[j] = true;
        assigned[j1] = true;
        let (back, d_back) = pres.decompose(&imul(&pres.reps[j1], &S));
        debug_assert_eq!(back, j);
        partners.push((j1, j, iinv(&d_back)));
    }
    let mut rels: Vec<Option<Expr>> = Vec::new();
    let mut seen = BTreeSet::new();
    for j in 0..n {
        let g = pres.reps[j];
        let (j1, d1) = pres.decompose(&imul(&g, &T));
        let (j2, d2) = pres.decompose(&imul(&g, &imul(&T, &T)));
        let mut key = [j, j1, j2];
        key.sort();
        if !seen.insert(key) {
            continue;
        }
        let mut e = Expr::new();
        for (jj, dd) in [(j, ID), (j1, iinv(&d1)), (j2, iinv(&d2))] {
            for (k, c) in compose(&val[jj], &dd, kappa, 1) {
                add_term(&mut e, k, c);
            }
        }
        rels.push(Some(e));
    }
    let j0 = pres.identity_coset();
    let mut solved: BTreeMap<usize, Expr> = BTreeMap::new();
    let mut progress = true;
    while progress {
        progress = false;
        for ri in 0..rels.len() {
            let Some(e) = rels[ri].clone() else { continue };
            let mut count: BTreeMap<usize, usize> = BTreeMap::new();
            for (g, _) in e.keys() {
                *count.entry(*g).or_insert(0) += 1;
            }
            let Some(g) = count.iter().find(|(g, c)| **c == 1 && **g != j0).map(|(g, _)| *g) else {
                continue;
            };
            let ((_, m), c) = e.iter().find(|((h, _), _)| *h == g).map(|(k, c)| (*k, *c)).expect("present");
            if c.abs() != 1 {
                return Err(OmsError::Unsupported(format!("generator {g} enters with coefficient {c}")));
            }
            let rest: Expr = e.iter().filter(|((h, _), _)| *h != g).map(|(k, v)| (*k, *v)).collect();
            let sol = compose(&rest, &iinv(&m), kappa, -c);
            rels[ri] = None;
            for r in rels.iter_mut().flatten() {
                *r = substitute(r, g, &sol, kappa);
            }
            for s in solved.values_mut() {
                *s = substitute(s, g, &sol, kappa);
            }
            solved.insert(g, sol);
            progress = true;
        }
    }
    let left: Vec<Expr> = rels.into_iter().flatten().filter(|e| !e.is_empty()).collect();
    if left.len() != 1 {
        return Err(OmsError::Unsupported(format!("{} relations survive peeling", left.len())));
    }
    let gens = (0..n)
        .filter(|j| primary[*j] && *j != j0 && !solved.contains_key(j))
        .collect();
    Ok(Peeling {
        j0,
        gens,
        solved,
        partners,
        leftover: left.into_iter().next().expect("one relation"),
    })
}

/// Fixed-point conjugator of a parabolic matrix: `sigma^-1 P sigma` is upper
/// unipotent up to sign.
fn cusp_sigma(pm: &IMat) -> IMat {
    let [a, _, c, d] = *pm;
    if c == 0 {
        return ID;
    }
    let x = Ratio::new(a - d, 2 * c);
    let (num, den) = (*x.numer(), *x.denom());
    let e = num.extended_gcd(&den);
    [num, -e.y, den, e.x]
}

// ---------------------------------------------------------------------------
// Overconvergent symbols

type Act = Vec<Vec<PadicNum>>;

/// Values of an overconvergent symbol: one moment table per coset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverconvergentSymbol {
    pub values: Vec<Vec<PadicNum>>,
}

impl OverconvergentSymbol {
    /// Largest `n` with moment `j < cutoff` divisible by `p^(n-j)` everywhere.
    pub fn fil_level(&self, cutoff: usize) -> u32 {
        let n = self.values[0][0].ring().precision();
        self.values
            .iter()
            .flat_map(|v| v.iter().take(cutoff).enumerate().map(|(j, x)| x.valuation().lower_bound() + j as u32))
            .fold(n, u32::min)
    }

    pub fn precision(&self, cutoff: usize) -> u32 {
        self.values
            .iter()
            .flat_map(|v| v.iter().take(cutoff).map(|x| x.precision()))
            .min()
            .unwrap_or(0)
    }
}

/// Report of an overconvergent slope computation against the classical oracle.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeComparison {
    pub tame_level: u64,
    pub level: u64,
    pub k: u32,
    pub p: u64,
    pub m: u32,
    pub h: String,
    pub cutoff: usize,
    pub precision: u32,
    pub certified_precision: u32,
    pub convention: String,
    pub classical_slopes: Vec<String>,
    pub overconvergent_slopes: Vec<String>,
    #[serde(rename = "match")]
    pub matches: bool,
    pub polygon: NewtonPolygon,
}

/// Overconvergent symbols of weight `k` for `Gamma0(L)` with moment cutoff
/// `M`, working precision `p^N` and `guard` extra moments.
#[derive(Debug, Clone)]
pub struct OmsSpace {
    tame: u64,
    k: u32,
    p: u64,
    m: u32,
    cutoff: usize,
    moments: usize,
    precision: u32,
    ring: PadicRing,
    pres: ManinPresentation,
    peeling: Peeling,
    /// `nu = sum c v_g | m` over the free generators.
    rest: Vec<(usize, i64, Act)>,
    sigma: Act,
    sigma_inv: Act,
    b_inv: Act,
    width: i64,
    solved: Vec<(usize, Vec<(usize, i64, Act)>)>,
    partners: Vec<(usize, usize, Act)>,
    up_terms: Vec<Vec<(i64, usize, Act)>>,
    /// Total-mass condition on generator moments below the cutoff, as
    /// `(pivot generator, pivot moment, coefficients)`; absent in weight 2,
    /// where it holds identically.
    constraint: Option<(usize, usize, Vec<Vec<PadicNum>>)>,
}

impl OmsSpace {
    /// `m` is the analyticity level (recorded; the moment model is the dual
    /// of the Tate algebra on `Z_p`, which is `U_p`-compatible for `m <= 1`).
    pub fn new(tame: u64, k: u32, p: u64, m: u32, cutoff: usize, precision: u32) -> Result<Self, OmsError> {
        let level = check_parameters(tame, k, p)?;
        if m > 1 {
            return Err(OmsError::OutOfRange(format!("analyticity level {m} > 1")));
        }
        if cutoff < k as usize - 1 {
            return Err(OmsError::OutOfRange(format!("cutoff {cutoff} below the classical degree {}", k - 2)));
        }
        let pres = ManinPresentation::new(level);
        if !pres.is_torsion_free() {
            return Err(OmsError::Torsion(level));
        }
        // Guard moments absorb truncation; below p they avoid dividing by p
        // in the difference equation.
        let guard = if (p as usize) > cutoff { 4.min(p as usize - cutoff) } else { 4 };
        let moments = cutoff + guard;
        let kappa = k as i64 - 2;
        let peeling = peel(&pres, kappa)?;
        let j0_terms: Vec<(IMat, i64)> = peeling
            .leftover
            .iter()
            .filter(|((g, _), _)| *g == peeling.j0)
            .map(|((_, m), c)| (*m, *c))
            .collect();
        if j0_terms.len() != 2 || j0_terms[0].1 != -j0_terms[1].1 || j0_terms[0].1.abs() != 1 {
            return Err(OmsError::Unsupported("leftover relation is not a difference equation".into()));
        }
        let ((am, ca), (bm, _)) = (j0_terms[0], j0_terms[1]);
        let pm = imul(&iinv(&bm), &am);
        let sigma = cusp_sigma(&pm);
        let qm = imul(&iinv(&sigma), &imul(&pm, &sigma));
        let (qm, _) = normalize(qm, 0);
        if qm[0] != 1 || qm[2] != 0 || qm[3] != 1 || qm[1] == 0 {
            return Err(OmsError::Unsupported(format!("cusp stabilizer {qm:?} is not unipotent")));
        }
        // Each division by j*w in the difference equation drops v_p(j*w)
        // digits; the working ring carries them as guard digits.
        let loss: u32 = (1..moments as i128)
            .map(|j| padic::vp_int(p, j * qm[1] as i128).unwrap_or(0))
            .sum();
        if precision + loss > padic::max_precision(p) {
            return Err(OmsError::PrecisionFloor(format!(
                "precision {precision} plus {loss} guard digits exceeds the word size for p = {p}"
            )));
        }
        let ring = PadicRing::new(p, precision + loss)?;
        let act = |g: &IMat| act_padic(g, kappa, moments, ring);
        let rest = peeling
            .leftover
            .iter()
            .filter(|((g, _), _)| *g != peeling.j0)
            .map(|((g, m), c)| Ok((*g, -ca * c, act(m)?)))
            .collect::<Result<Vec<_>, OmsError>>()?;
        let solved = peeling
            .solved
            .iter()
            .map(|(g, e)| {
                let terms = e
                    .iter()
                    .map(|((h, m), c)| Ok((*h, *c, act(m)?)))
                    .collect::<Result<Vec<_>, OmsError>>()?;
                Ok((*g, terms))
            })
            .collect::<Result<Vec<_>, OmsError>>()?;
        let partners = peeling
            .partners
            .iter()
            .map(|(j, j1, m)| Ok((*j, *j1, act(m)?)))
            .collect::<Result<Vec<_>, OmsError>>()?;
        let up_terms = peeling
            .gens
            .iter()
            .map(|&g| {
                pres.up_terms(g, p)
                    .into_iter()
                    .map(|(s, jj, m)| Ok((s, jj, act(&m)?)))
                    .collect::<Result<Vec<_>, OmsError>>()
            })
            .collect::<Result<Vec<_>, OmsError>>()?;
        OmsSpace {
            tame,
            k,
            p,
            m,
            cutoff,
            moments,
            precision,
            ring,
            sigma: act(&sigma)?,
            sigma_inv: act(&iinv(&sigma))?,
            b_inv: act(&iinv(&bm))?,
            width: qm[1],
            pres,
            peeling,
            rest,
            solved,
            partners,
            up_terms,
            constraint: None,
        }
        .with_constraint()
    }

    fn with_constraint(mut self) -> Result<Self, OmsError> {
        let g = self.peeling.gens.len();
        let mut coeffs = vec![vec![self.ring.zero(); self.cutoff]; g];
        let mut pivot: Option<(usize, usize, u32)> = None;
        for (gi, row) in coeffs.iter_mut().enumerate() {
            for (l, slot) in row.iter_mut().enumerate() {
                let mut params = vec![vec![self.ring.zero(); self.moments]; g];
                params[gi][l] = self.ring.one();
                *slot = self.conjugated_nu(&params)[0].reduce(self.precision);
                let v = slot.valuation().lower_bound();
                if v < self.precision && pivot.is_none_or(|(_, _, best)| v < best) {
                    pivot = Some((gi, l, v));
                }
            }
        }
        match pivot {
            None => {}
            Some((gi, l, 0)) => self.constraint = Some((gi, l, coeffs)),
            Some(_) => {
                return Err(OmsError::Unsupported("total-mass condition has no unit coefficient".into()));
            }
        }
        Ok(self)
    }

    /// `nu | sigma` for the difference equation at the identity coset.
    fn conjugated_nu(&self, gens: &[Vec<PadicNum>]) -> Vec<PadicNum> {
        let mut nu = vec![self.ring.zero(); self.moments];
        for (g, c, act) in &self.rest {
            let gi = self.peeling.gens.iter().position(|x| x == g).expect("free generator");
            axpy(&mut nu, *c, &apply(act, &gens[gi]));
        }
        apply(&self.sigma, &nu)
    }

    /// Number of free coordinates: generator moments below the cutoff, less
    /// one for the total-mass condition when it is present.
    pub fn rank(&self) -> usize {
        self.peeling.gens.len() * self.cutoff - usize::from(self.constraint.is_some())
    }

    /// Adjust the pivot coordinate so the total-mass condition holds; moments
    /// at or above the cutoff are assumed to vanish.
    pub fn project(&self, params: &mut [Vec<PadicNum>]) -> Result<(), OmsError> {
        let Some((pg, pl, f)) = &self.constraint else { return Ok(()) };
        let mut acc = self.ring.zero();
        for (gi, row) in f.iter().enumerate() {
            for (l, c) in row.iter().enumerate() {
                if (gi, l) != (*pg, *pl) {
                    acc = acc + *c * params[gi][l];
                }
            }
        }
        params[*pg][*pl] = (-acc * f[*pg][*pl].inv()?).lift(self.ring.precision())?;
        Ok(())
    }

    fn is_pivot(&self, gi: usize, l: usize) -> bool {
        matches!(&self.constraint, Some((pg, pl, _)) if (*pg, *pl) == (gi, l))
    }

    /// The working ring: the requested precision plus guard digits.
    pub fn ring(&self) -> PadicRing {
        self.ring
    }

    /// The requested precision `N`; results are reported mod `p^N`.
    pub fn precision(&self) -> u32 {
        self.precision
    }

    /// Certified digits of moment `j`: the filtration schedule `p^(M - j)`
    /// with `M` the cutoff, capped at `N`.
    pub fn moment_precision(&self, j: usize) -> u32 {
        (self.cutoff.saturating_sub(j) as u32).min(self.precision)
    }

    pub fn level(&self) -> u64 {
        self.pres.level()
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn moments(&self) -> usize {
        self.moments
    }

    pub fn generators(&self) -> &[usize] {
        &self.peeling.gens
    }

    pub fn presentation(&self) -> &ManinPresentation {
        &self.pres
    }

    /// Solve `lambda|[[1, w], [0, 1]] - lambda = nu` for all but the top moment.
    fn solve_difference(&self, nu: &[PadicNum]) -> Result<Vec<PadicNum>, OmsError> {
        let w = self.width as i128;
        let ring = self.ring;
        let size = nu.len();
        if !nu[0].reduce(self.precision).is_zero() {
            return Err(OmsError::TruncationInstability("total-mass compatibility fails".into()));
        }
        let mut lam = vec![ring.zero(); size];
        for j in 1..size {
            let mut s = nu[j];
            for (i, l) in lam.iter().enumerate().take(j - 1) {
                let coef = binom_signed(j as i64, i) * w.pow((j - i) as u32);
                s = s - ring.elem(coef) * *l;
            }
            lam[j - 1] = s
                .div_int(j as i128 * w)
                .map_err(|_| {
                    OmsError::TruncationInstability(format!("moment {} needs a division by {}", j - 1, j as i128 * w))
                })?
                .lift(ring.precision())?;
        }
        Ok(lam)
    }

    /// The symbol with the given moment tables on the free generators.
    pub fn symbol_from_generators(&self, gens: &[Vec<PadicNum>]) -> Result<OverconvergentSymbol, OmsError> {
        if gens.len() != self.peeling.gens.len() || gens.iter().any(|v| v.len() != self.moments) {
            return Err(OmsError::OutOfRange("generator values have the wrong shape".into()));
        }
        let n = self.pres.len();
        let zero = vec![self.ring.zero(); self.moments];
        let mut vals: Vec<Option<Vec<PadicNum>>> = vec![None; n];
        for (g, v) in self.peeling.gens.iter().zip(gens) {
            vals[*g] = Some(v.clone());
        }
        let lam = self.solve_difference(&self.conjugated_nu(gens))?;
        let mu = apply(&self.sigma_inv, &lam);
        vals[self.peeling.j0] = Some(apply(&self.b_inv, &mu));
        for (g, terms) in &self.solved {
            let mut acc = zero.clone();
            for (h, c, act) in terms {
                axpy(&mut acc, *c, &apply(act, vals[*h].as_ref().expect("free generator")));
            }
            vals[*g] = Some(acc);
        }
        for (j, j1, act) in &self.partners {
            let mut acc = zero.clone();
            axpy(&mut acc, -1, &apply(act, vals[*j1].as_ref().expect("primary")));
            vals[*j] = Some(acc);
        }
        Ok(OverconvergentSymbol {
            values: vals.into_iter().map(|v| v.expect("every coset assigned")).collect(),
        })
    }

    /// `U_p` of a symbol, on the free generators.
    pub fn apply_up(&self, sym: &OverconvergentSymbol) -> Vec<Vec<PadicNum>> {
        self.up_terms
            .iter()
            .map(|terms| {
                let mut out = vec![self.ring.zero(); self.moments];
                for (s, jj, act) in terms {
                    axpy(&mut out, *s, &apply(act, &sym.values[*jj]));
                }
                out
            })
            .collect()
    }

    /// Smallest valuation of a two- or three-term relation residual over the
    /// moments below the cutoff.
    pub fn relation_defect(&self, sym: &OverconvergentSymbol) -> Result<u32, OmsError> {
        let kappa = self.k as i64 - 2;
        let mut worst = self.ring.precision();
        for rel in self.pres.relations() {
            let mut acc = vec![self.ring.zero(); self.moments];
            for (j, m) in rel {
                axpy(&mut acc, 1, &apply(&act_padic(&m, kappa, self.moments, self.ring)?, &sym.values[j]));
            }
            for x in acc.iter().take(self.cutoff) {
                worst = worst.min(x.valuation().lower_bound());
            }
        }
        Ok(worst)
    }

    /// Matrix of `U_p` on the generator moments below the cutoff.
    pub fn up_matrix(&self) -> Result<Matrix, OmsError> {
        let g = self.peeling.gens.len();
        let size = self.rank();
        let mut columns = Vec::with_capacity(size);
        for gi in 0..g {
            for l in 0..self.cutoff {
                if self.is_pivot(gi, l) {
                    continue;
                }
                let mut params = vec![vec![self.ring.zero(); self.moments]; g];
                params[gi][l] = self.ring.one();
                self.project(&mut params)?;
                let sym = self.symbol_from_generators(&params)?;
                let image = self.apply_up(&sym);
                let column = (0..g)
                    .flat_map(|hi| (0..self.cutoff).map(move |m| (hi, m)))
                    .filter(|(hi, m)| !self.is_pivot(*hi, *m))
                    .map(|(hi, m)| image[hi][m])
                    .collect::<Vec<_>>();
                columns.push(column);
            }
        }
        let out = self.ring.with_precision(self.precision)?;
        let columns: Vec<Vec<PadicNum>> = columns
            .iter()
            .map(|c| c.iter().map(|x| x.reduce(self.precision)).collect())
            .collect();
        Ok(Matrix::from_columns(out, size, &columns))
    }

    /// Specialization: moments `0..=k-2` at every coset.
    pub fn specialize(&self, sym: &OverconvergentSymbol) -> Vec<Vec<PadicNum>> {
        sym.values.iter().map(|v| v[..self.k as usize - 1].to_vec()).collect()
    }

    /// Reduce a `p`-integral rational to the working ring.
    fn reduce_rational(&self, x: &BigRational) -> Result<PadicNum, OmsError> {
        let m = BigInt::from(self.ring.modulus());
        let num = (x.numer() % &m + &m) % &m;
        let den = (x.denom() % &m + &m) % &m;
        let d = self.ring.elem(den.to_i128().expect("below the modulus"));
        if !d.is_unit() {
            return Err(OmsError::NotLiftable("symbol is not p-integral".into()));
        }
        Ok(self.ring.elem(num.to_i128().expect("below the modulus")) * d.inv()?)
    }

    /// Adjust non-classical generator moments so the symbol specializes to
    /// `target` on every coset, not only on the generators. The mismatch lives
    /// in the moments of the identity coset that the difference equation fixes
    /// from higher generator moments, so one direction suffices.
    fn correct_boundary(&self, params: &mut [Vec<PadicNum>], target: &[Vec<PadicNum>]) -> Result<(), OmsError> {
        let dim = self.k as usize - 1;
        let prec = self.moment_precision(dim);
        let mismatch: Vec<PadicNum> = self
            .specialize(&self.symbol_from_generators(params)?)
            .iter()
            .flatten()
            .zip(target.iter().flatten())
            .map(|(x, y)| (*y - *x).reduce(prec))
            .collect();
        if mismatch.iter().all(|x| x.is_zero()) {
            return Ok(());
        }
        let zero = vec![vec![self.ring.zero(); self.moments]; params.len()];
        for l in dim..self.cutoff {
            for gi in 0..params.len() {
                if self.is_pivot(gi, l) {
                    continue;
                }
                let mut unit = zero.clone();
                unit[gi][l] = self.ring.one();
                self.project(&mut unit)?;
                let effect: Vec<PadicNum> = self
                    .specialize(&self.symbol_from_generators(&unit)?)
                    .concat()
                    .into_iter()
                    .map(|x| x.reduce(prec))
                    .collect();
                let Some(pivot) = (0..effect.len())
                    .filter(|i| !effect[*i].is_zero())
                    .min_by_key(|i| effect[*i].valuation().lower_bound())
                else {
                    continue;
                };
                let v = effect[pivot].valuation().lower_bound();
                if mismatch.iter().any(|x| x.valuation().lower_bound() < v) {
                    continue;
                }
                let t = mismatch[pivot].div_p_power(v)? * effect[pivot].div_p_power(v)?.inv()?;
                let fixed = mismatch
                    .iter()
                    .zip(&effect)
                    .all(|(d, e)| (*d - t * *e).reduce(prec - v).is_zero());
                if fixed {
                    let t = t.lift(self.ring.precision())?;
                    for (row, urow) in params.iter_mut().zip(&unit) {
                        for (x, u) in row.iter_mut().zip(urow) {
                            *x = *x + t * *u;
                        }
                    }
                    return Ok(());
                }
            }
        }
        Err(OmsError::NotLiftable("the identity-coset moments are not reached by the generators".into()))
    }

    /// The overconvergent eigen-lift of a classical `U_p`-eigensymbol with
    /// unit eigenvalue `alpha`, by iterating `alpha^-1 U_p` from a naive lift.
    pub fn lift_symbol(&self, phi: &ClassicalSymbol, alpha: &BigRational) -> Result<LiftedSymbol, OmsError> {
        let critical = Ratio::from_integer(self.k as i64 - 1);
        if phi.is_zero() {
            let zero = vec![vec![self.ring.zero(); self.moments]; self.peeling.gens.len()];
            return Ok(LiftedSymbol {
                symbol: self.symbol_from_generators(&zero)?,
                iterations: 0,
                certified_precision: self.precision,
            });
        }
        if alpha.is_zero() {
            return Err(OmsError::CriticalSlope {
                slope: "infinity".into(),
                critical: format!("{critical}"),
            });
        }
        let slope = vp_rational(alpha, self.p);
        if Ratio::from_integer(slope) >= critical {
            return Err(OmsError::CriticalSlope {
                slope: slope.to_string(),
                critical: format!("{critical}"),
            });
        }
        if slope != 0 {
            return Err(OmsError::Unsupported("only unit eigenvalues are lifted".into()));
        }
        let alpha_inv = self.reduce_rational(alpha)?.inv()?;
        let dim = self.k as usize - 1;
        let target: Vec<Vec<PadicNum>> = phi
            .values
            .iter()
            .map(|v| v.iter().map(|x| self.reduce_rational(x)).collect())
            .collect::<Result<_, _>>()?;
        let mut params: Vec<Vec<PadicNum>> = self
            .peeling
            .gens
            .iter()
            .map(|g| {
                let mut v = vec![self.ring.zero(); self.moments];
                v[..dim].copy_from_slice(&target[*g]);
                v
            })
            .collect();
        self.correct_boundary(&mut params, &target)?;
        let mut sym = self.symbol_from_generators(&params)?;
        let max_iter = 8 * self.ring.precision() as usize + 8;
        for it in 1..=max_iter {
            let mut next: Vec<Vec<PadicNum>> = self
                .apply_up(&sym)
                .into_iter()
                .map(|v| {
                    let zero = self.ring.zero();
                    v.into_iter().enumerate().map(|(j, x)| if j < self.cutoff { x * alpha_inv } else { zero }).collect()
                })
                .collect();
            self.project(&mut next)?;
            let stable = next.iter().zip(&params).all(|(a, b)| {
                a.iter()
                    .zip(b)
                    .enumerate()
                    .all(|(j, (x, y))| x.eq_mod(y, self.moment_precision(j)))
            });
            params = next;
            sym = self.symbol_from_generators(&params)?;
            if stable {
                return Ok(LiftedSymbol {
                    // The difference equation fills moment j at the identity
                    // coset from moment j + 1 of the generators.
                    certified_precision: self.moment_precision(dim),
                    symbol: sym,
                    iterations: it,
                });
            }
        }
        Err(OmsError::PrecisionFloor("iteration did not stabilize".into()))
    }

    /// Slope `<= h` part of the Newton polygon of `det(1 - t U_p)`, certified
    /// against the per-coefficient precision, compared with the classical oracle.
    pub fn compare_slopes(&self, classical: &ClassicalSpace, h: Ratio<i64>) -> Result<SlopeComparison, OmsError> {
        let critical = Ratio::from_integer(self.k as i64 - 1);
        if h >= critical {
            return Err(OmsError::CriticalSlope {
                slope: format!("{h}"),
                critical: format!("{critical}"),
            });
        }
        let u = self.up_matrix()?;
        let cp = u.charpoly()?;
        let n = cp.len() - 1;
        let fred: Vec<PadicNum> = (0..=n).map(|k| cp[n - k]).collect();
        let (polygon, certified) = small_slope_polygon(&fred, h)?;
        let over: Vec<Ratio<i64>> = polygon.slope_multiset();
        let classical_small = classical.slopes_at_most(h);
        let matches = over == classical_small;
        Ok(SlopeComparison {
            tame_level: self.tame,
            level: self.level(),
            k: self.k,
            p: self.p,
            m: self.m,
            h: format!("{h}"),
            cutoff: self.cutoff,
            precision: self.precision,
            certified_precision: certified,
            convention: "weight k uses degree k-2 moments; U_p = sum_a [[1,a],[0,p]] without normalization; h_crit = k-1".into(),
            classical_slopes: classical_small.iter().map(|s| format!("{s}")).collect(),
            overconvergent_slopes: over.iter().map(|s| format!("{s}")).collect(),
            matches,
            polygon,
        })
    }
}

/// An eigen-lift with its iteration count and certified precision.
#[derive(Debug, Clone)]
pub struct LiftedSymbol {
    pub symbol: OverconvergentSymbol,
    pub iterations: usize,
    pub certified_precision: u32,
}

/// The part of the Newton polygon with slopes `<= h`, and the smallest
/// precision among the coefficients it relies on.
///
/// Every coefficient past the last small-slope vertex `(k*, v*)` must be
/// known to lie strictly above `v* + h (k - k*)`, and every unknown
/// coefficient before it must lie on or above the hull.
fn small_slope_polygon(coeffs: &[PadicNum], h: Ratio<i64>) -> Result<(NewtonPolygon, u32), OmsError> {
    let pts: Vec<(i64, i64)> = coeffs
        .iter()
        .enumerate()
        .filter_map(|(k, c)| match c.valuation() {
            Valuation::Finite(v) => Some((k as i64, v as i64)),
            Valuation::AtLeast(_) => None,
        })
        .collect();
    let full = hull_polygon(&pts);
    let mut segments = Vec::new();
    let mut end = (0i64, 0i64);
    let mut x = 0i64;
    for seg in &full.segments {
        if seg.slope > h {
            break;
        }
        x += seg.multiplicity as i64;
        segments.push(seg.clone());
    }
    for v in &full.vertices {
        if v.0 as i64 == x {
            end = (v.0 as i64, v.1 as i64);
        }
    }
    let small = NewtonPolygon {
        vertices: full.vertices.iter().copied().filter(|v| (v.0 as i64) <= end.0).collect(),
        segments,
    };
    let bound = |c: &PadicNum| -> i64 {
        match c.valuation() {
            Valuation::Finite(v) => v as i64,
            Valuation::AtLeast(b) => b as i64,
        }
    };
    for (k, c) in coeffs.iter().enumerate() {
        let k = k as i64;
        if k > end.0 {
            let line = Ratio::from_integer(end.1) + h * Ratio::from_integer(k - end.0);
            if Ratio::from_integer(bound(c)) <= line {
                return Err(OmsError::PrecisionFloor(format!(
                    "coefficient {k} is not certified above the slope-{h} line"
                )));
            }
        } else if let Valuation::AtLeast(b) = c.valuation() {
            if Ratio::from_integer(b as i64) < small.height_at(k as u32) {
                return Err(OmsError::PrecisionFloor(format!("coefficient {k} is below its precision")));
            }
        }
    }
    let certified = coeffs[..=end.0 as usize].iter().map(|c| c.precision()).min().unwrap_or(0);
    Ok((small, certified))
}

/// Slope comparison for the tame level `N`: overconvergent (level `m`, moment
/// cutoff, precision) against the classical oracle.
pub fn up_slopes(
    tame: u64,
    k: u32,
    p: u64,
    m: u32,
    h: Ratio<i64>,
    cutoff: usize,
    precision: u32,
) -> Result<SlopeComparison, OmsError> {
    let classical = classical_symbols(tame, k, p)?;
    let space = OmsSpace::new(tame, k, p, m, cutoff, precision)?;
    space.compare_slopes(&classical, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(x: i64) -> BigRational {
        q(x)
    }

    #[test]
    fn presentation_basics() {
        let pres = ManinPresentation::new(11);
        assert_eq!(pres.len(), 12);
        assert!(pres.is_torsion_free());
        assert_eq!(pres.cusp_count(), 2);
        for g in pres.reps() {
            assert_eq!(g[0] * g[3] - g[1] * g[2], 1);
        }
        let (j, delta) = pres.decompose(&[5, 2, 7, 3]);
        assert_eq!(imul(&delta, &pres.reps()[j]), [5, 2, 7, 3]);
        assert_eq!(delta[2] % 11, 0);
        assert!(!ManinPresentation::new(3).is_torsion_free());
        assert_eq!(ManinPresentation::new(42).len(), 96);
    }

    #[test]
    fn unimodular_paths_telescope() {
        // sum gamma{0, inf} over the path equals {inf, a/b}: check endpoints chain.
        for (a, b) in [(7, 5), (-3, 8), (13, 21), (1, 1)] {
            let path = unimodular_to(a, b);
            let last = path.last().unwrap();
            assert_eq!(Ratio::new(last[0], last[2]), Ratio::new(a, b));
            let first = path[0];
            assert_eq!(first[2], 1);
            for w in path.windows(2) {
                // gamma_i(inf) = gamma_{i+1}(0)
                assert_eq!(Ratio::new(w[0][0], w[0][2]), Ratio::new(w[1][1], w[1][3]));
            }
            for g in &path {
                assert_eq!(g[0] * g[3] - g[1] * g[2], 1);
            }
        }
    }

    #[test]
    fn classical_dimensions() {
        let s = classical_symbols(11, 2, 11).unwrap();
        assert_eq!(s.dimension(), 3);
        assert_eq!(s.expected_dimension(), Some(3));
        assert_eq!(s.cuspidal_dimension(), 2);
        let s = classical_symbols(1, 2, 3).unwrap();
        assert_eq!(s.cuspidal_dimension(), 0);
        let s = classical_symbols(3, 2, 3).unwrap();
        assert_eq!(s.cuspidal_dimension(), 0);
        let s = classical_symbols(11, 2, 3).unwrap();
        assert_eq!(s.level(), 33);
        assert_eq!(Some(s.dimension()), s.expected_dimension());
        let s = classical_symbols(11, 4, 11).unwrap();
        assert_eq!(Some(s.dimension()), s.expected_dimension());
        assert!(classical_symbols(11, 3, 3).is_err());
        assert!(classical_symbols(31, 2, 3).is_err());
        assert!(classical_symbols(9, 2, 3).is_err());
    }

    #[test]
    fn classical_up_commutes_with_matrix() {
        let s = classical_symbols(11, 2, 3).unwrap();
        let y: Vec<BigRational> = (0..s.dimension() as i64).map(|i| r(i * i - 3)).collect();
        let phi = s.symbol_from_coords(&y);
        let direct = s.apply_up(&phi);
        let x = s.up_matrix();
        let image: Vec<BigRational> = (0..y.len())
            .map(|b| (0..y.len()).fold(BigRational::zero(), |acc, a| acc + &x[b][a] * &y[a]))
            .collect();
        assert_eq!(direct, s.symbol_from_coords(&image));
    }

    #[test]
    fn classical_slopes_at_level_33() {
        let s = classical_symbols(11, 2, 3).unwrap();
        let slopes = s.newton_polygon().slope_multiset();
        assert_eq!(slopes.iter().filter(|x| **x == Ratio::from_integer(0)).count(), 6);
        assert_eq!(slopes.iter().filter(|x| **x == Ratio::from_integer(1)).count(), 3);
    }

    #[test]
    fn overconvergent_slope_zero_at_level_11() {
        let c = up_slopes(11, 2, 11, 1, Ratio::from_integer(0), 6, 6).unwrap();
        assert!(c.matches, "{c:?}");
        assert_eq!(c.overconvergent_slopes.len(), 3);
    }

    #[test]
    fn symbols_satisfy_relations_and_up_preserves_filtration() {
        let space = OmsSpace::new(11, 2, 11, 1, 6, 6).unwrap();
        let f = space.ring();
        let g = space.generators().len();
        let params: Vec<Vec<PadicNum>> = (0..g)
            .map(|i| {
                (0..space.moments())
                    .map(|j| f.elem((3 * i + 7 * j + 1) as i128).mul_p_power((2u32).saturating_sub(j as u32)))
                    .collect()
            })
            .collect();
        let sym = space.symbol_from_generators(&params).unwrap();
        assert!(space.relation_defect(&sym).unwrap() >= 1);
        let before = sym.fil_level(space.cutoff());
        let after = space.symbol_from_generators(&space.apply_up(&sym)).unwrap();
        assert!(after.fil_level(space.cutoff()) >= before.min(after.precision(space.cutoff())));
    }

    #[test]
    fn lifts_round_trip() {
        let classical = classical_symbols(11, 2, 11).unwrap();
        let space = OmsSpace::new(11, 2, 11, 1, 6, 6).unwrap();
        let zero = ClassicalSymbol {
            values: vec![vec![r(0)]; classical.presentation().len()],
        };
        let lifted = space.lift_symbol(&zero, &r(1)).unwrap();
        assert!(lifted.symbol.values.iter().flatten().all(|x| x.is_zero()));
        for alpha in [r(1), r(-1)] {
            for phi in classical.eigen_symbols(&alpha) {
                let lift = space.lift_symbol(&phi, &alpha).unwrap();
                let sp = space.specialize(&lift.symbol);
                for (a, b) in sp.iter().flatten().zip(phi.values.iter().flatten()) {
                    let b = space.reduce_rational(b).unwrap();
                    assert!(a.eq_mod(&b, lift.certified_precision));
                }
                // U_p-stable: U_p(lift) = alpha lift on the generators.
                let up = space.apply_up(&lift.symbol);
                let a = space.reduce_rational(&alpha).unwrap();
                for (gi, g) in space.generators().iter().enumerate() {
                    for j in 0..space.cutoff() {
                        let lhs = up[gi][j];
                        let rhs = a * lift.symbol.values[*g][j];
                        assert!(lhs.eq_mod(&rhs, space.moment_precision(j)));
                    }
                }
            }
        }
        assert!(matches!(
            space.lift_symbol(&classical.eigen_symbols(&r(1))[0], &r(11)),
            Err(OmsError::CriticalSlope { .. })
        ));
    }

    #[test]
    fn lifts_at_level_33() {
        let classical = classical_symbols(11, 2, 3).unwrap();
        let space = OmsSpace::new(11, 2, 3, 1, 10, 8).unwrap();
        let mut lifted = 0;
        for alpha in [r(1), r(-1)] {
            for phi in classical.eigen_symbols(&alpha) {
                let lift = space.lift_symbol(&phi, &alpha).unwrap();
                let prec = lift.certified_precision;
                assert!(prec >= 1);
                for (a, b) in space.specialize(&lift.symbol).iter().flatten().zip(phi.values.iter().flatten()) {
                    assert!(a.eq_mod(&space.reduce_rational(b).unwrap(), prec));
                }
                // sp(U_p lift) = U_p phi.
                let up_phi = classical.apply_up(&phi);
                let up_lift = space.symbol_from_generators(&space.apply_up(&lift.symbol)).unwrap();
                for (a, b) in space.specialize(&up_lift).iter().flatten().zip(up_phi.values.iter().flatten()) {
                    assert!(a.eq_mod(&space.reduce_rational(b).unwrap(), prec.min(a.precision())));
                }
                lifted += 1;
            }
        }
        assert!(lifted >= 1);
        let c = up_slopes(11, 2, 3, 1, Ratio::from_integer(0), 10, 8).unwrap();
        assert!(c.matches);
        assert!(matches!(up_slopes(1, 2, 3, 1, Ratio::from_integer(0), 10, 8), Err(OmsError::Torsion(3))));
        assert!(matches!(up_slopes(11, 2, 3, 1, Ratio::from_integer(1), 10, 8), Err(OmsError::CriticalSlope { .. })));
    }
}
