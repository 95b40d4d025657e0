//! Fixed-precision arithmetic in `Z/p^N` with valuation tracking.
//!
//! A [`PadicNum`] is an integer known modulo `p^N`. Every value carries its
//! own precision `N`; binary operations take the minimum of the operand
//! precisions, so no operation claims more digits than its inputs support.
//! Moduli are limited to `p^N < 2^62` so that products fit in `u128`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported modulus bit length.
const MAX_MODULUS_BITS: u32 = 62;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PadicError {
    #[error("{0} is not an odd prime")]
    BadPrime(u64),
    #[error("p = 2 is not supported")]
    PrimeTwo,
    #[error("precision must be positive")]
    ZeroPrecision,
    #[error("modulus {p}^{n} exceeds the 62-bit limit")]
    ModulusTooLarge { p: u64, n: u32 },
    #[error("expected a unit, got an element of valuation {0}")]
    NotUnit(String),
    #[error("cannot divide by p^{k}: valuation is only {v}")]
    InexactDivision { k: u32, v: String },
    #[error("mismatched primes {0} and {1}")]
    PrimeMismatch(u64, u64),
    #[error("expected an element of valuation >= 1 (one-unit or p-divisible input)")]
    NotInDisc,
}

/// The p-adic valuation of a number known mod `p^N`.
///
/// `AtLeast(N)` is the sentinel for a residue that is zero mod `p^N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Valuation {
    Finite(u32),
    AtLeast(u32),
}

impl Valuation {
    /// Lower bound usable in arithmetic: the exact value or the sentinel bound.
    pub fn lower_bound(self) -> u32 {
        match self {
            Valuation::Finite(v) | Valuation::AtLeast(v) => v,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Valuation::Finite(_))
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::AtLeast(v) => write!(f, "at-least-{v}"),
        }
    }
}

/// `p^n` as a `u64`, or an error when it would exceed the supported range.
pub fn checked_modulus(p: u64, n: u32) -> Result<u64, PadicError> {
    let mut m: u64 = 1;
    for _ in 0..n {
        m = m
            .checked_mul(p)
            .filter(|&x| x < (1u64 << MAX_MODULUS_BITS))
            .ok_or(PadicError::ModulusTooLarge { p, n })?;
    }
    Ok(m)
}

/// Largest precision `n` with `p^n` inside the supported range.
pub fn max_precision(p: u64) -> u32 {
    let mut n = 0;
    while checked_modulus(p, n + 1).is_ok() {
        n += 1;
    }
    n
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Validate that `p` is an odd prime.
pub fn check_odd_prime(p: u64) -> Result<(), PadicError> {
    if p == 2 {
        return Err(PadicError::PrimeTwo);
    }
    if !is_prime(p) {
        return Err(PadicError::BadPrime(p));
    }
    Ok(())
}

/// p-adic valuation of a nonzero integer.
pub fn vp_int(p: u64, mut x: i128) -> Option<u32> {
    if x == 0 {
        return None;
    }
    let mut v = 0;
    while x % p as i128 == 0 {
        x /= p as i128;
        v += 1;
    }
    Some(v)
}

/// `v_p(n!)` by Legendre's formula.
pub fn vp_factorial(p: u64, n: u64) -> u32 {
    let mut v = 0;
    let mut q = p;
    while q <= n {
        v += (n / q) as u32;
        match q.checked_mul(p) {
            Some(x) => q = x,
            None => break,
        }
    }
    v
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Inverse of `a` modulo `m`, assuming `gcd(a, m) = 1`.
fn inv_mod(a: u64, m: u64) -> u64 {
    let (mut old_r, mut r) = (a as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    debug_assert_eq!(old_r, 1);
    old_s.rem_euclid(m as i128) as u64
}

/// A validated `(p, N)` pair; builds elements without re-checking the modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PadicRing {
    p: u64,
    n: u32,
    modulus: u64,
}

impl PadicRing {
    /// Context for `Z/p^n` with `p` an odd prime.
    pub fn new(p: u64, n: u32) -> Result<Self, PadicError> {
        check_odd_prime(p)?;
        Self::new_any_prime(p, n)
    }

    /// Like [`PadicRing::new`] but also accepts `p = 2` (plain modular arithmetic).
    pub fn new_any_prime(p: u64, n: u32) -> Result<Self, PadicError> {
        if !is_prime(p) {
            return Err(PadicError::BadPrime(p));
        }
        if n == 0 {
            return Err(PadicError::ZeroPrecision);
        }
        let modulus = checked_modulus(p, n)?;
        Ok(PadicRing { p, n, modulus })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn precision(&self) -> u32 {
        self.n
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn elem(&self, v: i128) -> PadicNum {
        PadicNum {
            p: self.p,
            prec: self.n,
            residue: v.rem_euclid(self.modulus as i128) as u64,
        }
    }

    pub fn zero(&self) -> PadicNum {
        self.elem(0)
    }

    pub fn one(&self) -> PadicNum {
        self.elem(1)
    }

    /// The same prime at a different precision.
    pub fn with_precision(&self, n: u32) -> Result<Self, PadicError> {
        Self::new_any_prime(self.p, n)
    }
}

/// An integer known modulo `p^N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PadicNum {
    p: u64,
    prec: u32,
    residue: u64,
}

impl PadicNum {
    pub fn new(p: u64, prec: u32, value: i128) -> Result<Self, PadicError> {
        Ok(PadicRing::new(p, prec)?.elem(value))
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    /// The residue in `[0, p^N)`.
    pub fn residue(&self) -> u64 {
        self.residue
    }

    pub fn modulus(&self) -> u64 {
        checked_modulus(self.p, self.prec).expect("validated at construction")
    }

    pub fn ring(&self) -> PadicRing {
        PadicRing {
            p: self.p,
            n: self.prec,
            modulus: self.modulus(),
        }
    }

    /// Symmetric representative in `(-p^N/2, p^N/2]`.
    pub fn signed(&self) -> i128 {
        let m = self.modulus() as i128;
        let r = self.residue as i128;
        if 2 * r > m {
            r - m
        } else {
            r
        }
    }

    pub fn valuation(&self) -> Valuation {
        if self.residue == 0 {
            return Valuation::AtLeast(self.prec);
        }
        Valuation::Finite(vp_int(self.p, self.residue as i128).unwrap_or(0))
    }

    pub fn is_zero(&self) -> bool {
        self.residue == 0
    }

    pub fn is_unit(&self) -> bool {
        self.residue % self.p != 0
    }

    fn check_prime(&self, other: &PadicNum) {
        assert_eq!(
            self.p, other.p,
            "arithmetic between different primes is not defined"
        );
    }

    /// Reduce to a lower precision; requests above the current precision are clamped.
    pub fn reduce(&self, prec: u32) -> PadicNum {
        let prec = prec.min(self.prec).max(1);
        let m = checked_modulus(self.p, prec).expect("smaller than current modulus");
        PadicNum {
            p: self.p,
            prec,
            residue: self.residue % m,
        }
    }

    /// Canonical lift of the residue to precision `prec`.
    ///
    /// The extra digits are zero; callers use this only for guard digits whose
    /// effect is removed again before results are reported.
    pub fn lift(&self, prec: u32) -> Result<PadicNum, PadicError> {
        checked_modulus(self.p, prec)?;
        Ok(PadicNum {
            p: self.p,
            prec,
            residue: self.residue,
        })
    }

    pub fn pow(&self, e: u64) -> PadicNum {
        PadicNum {
            p: self.p,
            prec: self.prec,
            residue: pow_mod(self.residue, e, self.modulus()),
        }
    }

    /// Inverse of a unit.
    pub fn inv(&self) -> Result<PadicNum, PadicError> {
        if !self.is_unit() {
            return Err(PadicError::NotUnit(self.valuation().to_string()));
        }
        Ok(PadicNum {
            p: self.p,
            prec: self.prec,
            residue: inv_mod(self.residue, self.modulus()),
        })
    }

    /// Signed integer power; negative exponents need a unit.
    pub fn pow_signed(&self, e: i64) -> Result<PadicNum, PadicError> {
        if e >= 0 {
            Ok(self.pow(e as u64))
        } else {
            Ok(self.inv()?.pow(e.unsigned_abs()))
        }
    }

    /// Exact division by `p^k`; the result is known to precision `N - k`.
    pub fn div_p_power(&self, k: u32) -> Result<PadicNum, PadicError> {
        if k == 0 {
            return Ok(*self);
        }
        let v = self.valuation();
        if v.lower_bound() < k || self.prec <= k {
            return Err(PadicError::InexactDivision {
                k,
                v: v.to_string(),
            });
        }
        let pk = checked_modulus(self.p, k).expect("k < prec");
        Ok(PadicNum {
            p: self.p,
            prec: self.prec - k,
            residue: self.residue / pk,
        })
    }

    /// Division by an integer `n = p^k u`; loses `k` digits.
    pub fn div_int(&self, n: i128) -> Result<PadicNum, PadicError> {
        let k = vp_int(self.p, n).ok_or(PadicError::InexactDivision {
            k: u32::MAX,
            v: "division by zero".into(),
        })?;
        let u = n / (self.p as i128).pow(k);
        let q = self.div_p_power(k)?;
        Ok(q * q.ring().elem(u).inv()?)
    }

    /// Multiply by `p^k` (precision unchanged).
    pub fn mul_p_power(&self, k: u32) -> PadicNum {
        let m = self.modulus();
        let pk = if k >= self.prec {
            0
        } else {
            checked_modulus(self.p, k).expect("k < prec")
        };
        PadicNum {
            p: self.p,
            prec: self.prec,
            residue: mul_mod(self.residue, pk % m, m),
        }
    }

    /// Equality modulo `p^k` (k clamped to the common precision).
    pub fn eq_mod(&self, other: &PadicNum, k: u32) -> bool {
        self.check_prime(other);
        let k = k.min(self.prec).min(other.prec);
        if k == 0 {
            return true;
        }
        let m = checked_modulus(self.p, k).expect("within precision");
        self.residue % m == other.residue % m
    }

    fn combine(&self, other: &PadicNum) -> (u32, u64, u64, u64) {
        self.check_prime(other);
        let prec = self.prec.min(other.prec);
        let m = checked_modulus(self.p, prec).expect("within precision");
        (prec, self.residue % m, other.residue % m, m)
    }
}

impl fmt::Display for PadicNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + O({}^{})", self.residue, self.p, self.prec)
    }
}

impl PartialOrd for PadicNum {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PadicNum {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.p, self.prec, self.residue).cmp(&(other.p, other.prec, other.residue))
    }
}

impl Add for PadicNum {
    type Output = PadicNum;
    fn add(self, rhs: PadicNum) -> PadicNum {
        let (prec, a, b, m) = self.combine(&rhs);
        PadicNum {
            p: self.p,
            prec,
            residue: ((a as u128 + b as u128) % m as u128) as u64,
        }
    }
}

impl Sub for PadicNum {
    type Output = PadicNum;
    fn sub(self, rhs: PadicNum) -> PadicNum {
        let (prec, a, b, m) = self.combine(&rhs);
        PadicNum {
            p: self.p,
            prec,
            residue: ((a as u128 + m as u128 - b as u128) % m as u128) as u64,
        }
    }
}

impl Mul for PadicNum {
    type Output = PadicNum;
    fn mul(self, rhs: PadicNum) -> PadicNum {
        let (prec, a, b, m) = self.combine(&rhs);
        PadicNum {
            p: self.p,
            prec,
            residue: mul_mod(a, b, m),
        }
    }
}

impl Neg for PadicNum {
    type Output = PadicNum;
    fn neg(self) -> PadicNum {
        let m = self.modulus();
        PadicNum {
            p: self.p,
            prec: self.prec,
            residue: (m - self.residue) % m,
        }
    }
}

/// Terms needed in the log/exp series for correctness mod `p^n`.
pub fn series_degree_bound(p: u64, n: u32) -> u64 {
    let num = n as u64 * (p - 1);
    let den = p - 2;
    num.div_ceil(den) + 2
}

/// Teichmüller representative: the `(p-1)`-st root of unity congruent to `z` mod `p`.
pub fn teichmuller(z: &PadicNum) -> Result<PadicNum, PadicError> {
    check_odd_prime(z.p)?;
    if !z.is_unit() {
        return Err(PadicError::NotUnit(z.valuation().to_string()));
    }
    let mut w = *z;
    for _ in 0..=z.prec {
        let next = w.pow(z.p);
        if next == w {
            return Ok(w);
        }
        w = next;
    }
    Ok(w)
}

/// The one-unit part `<z> = z / omega(z)`.
pub fn one_unit_part(z: &PadicNum) -> Result<PadicNum, PadicError> {
    Ok(*z * teichmuller(z)?.inv()?)
}

fn guard_digits(p: u64, n: u32) -> u32 {
    vp_factorial(p, series_degree_bound(p, n)) + 2
}

/// `log(x)` for a one-unit `x`, correct mod `p^N`.
pub fn log_one_unit(x: &PadicNum) -> Result<PadicNum, PadicError> {
    check_odd_prime(x.p)?;
    let n = x.prec;
    let y = *x - x.ring().one();
    if y.valuation().lower_bound() < 1 {
        return Err(PadicError::NotInDisc);
    }
    let work = n + guard_digits(x.p, n);
    let y = y.lift(work)?;
    let mut acc = y.ring().zero();
    let mut power = y;
    for k in 1..=series_degree_bound(x.p, n) {
        let term = power.div_int(k as i128)?;
        acc = if k % 2 == 1 { acc + term } else { acc - term };
        power = power * y;
    }
    Ok(acc.reduce(n))
}

/// `exp(x)` for `v_p(x) >= 1`, correct mod `p^N`.
pub fn exp_p_divisible(x: &PadicNum) -> Result<PadicNum, PadicError> {
    check_odd_prime(x.p)?;
    let n = x.prec;
    if x.valuation().lower_bound() < 1 {
        return Err(PadicError::NotInDisc);
    }
    let work = n + guard_digits(x.p, n);
    let x = x.lift(work)?;
    let mut acc = x.ring().one();
    let mut term = x.ring().one();
    for k in 1..=series_degree_bound(x.p, n) {
        term = (term * x).div_int(k as i128)?;
        acc = acc + term;
    }
    Ok(acc.reduce(n))
}

/// `<z>^s = exp(s log <z>)` for a unit `z` and exponent `s` in `Z_p`.
pub fn one_unit_pow(z: &PadicNum, s: &PadicNum) -> Result<PadicNum, PadicError> {
    if z.p != s.p {
        return Err(PadicError::PrimeMismatch(z.p, s.p));
    }
    let prec = z.prec.min(s.prec);
    let z = z.reduce(prec);
    let s = s.reduce(prec);
    let l = log_one_unit(&one_unit_part(&z)?)?;
    exp_p_divisible(&(s * l))
}

/// `<z>^e` by repeated multiplication, for integer exponents.
pub fn one_unit_pow_int(z: &PadicNum, e: i64) -> Result<PadicNum, PadicError> {
    one_unit_part(z)?.pow_signed(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: u64, n: u32) -> PadicRing {
        PadicRing::new(p, n).unwrap()
    }

    #[test]
    fn valuation_examples() {
        let f = r(5, 4);
        assert_eq!(f.elem(5).valuation(), Valuation::Finite(1));
        assert_eq!(f.elem(1).valuation(), Valuation::Finite(0));
        assert_eq!(f.elem(0).valuation(), Valuation::AtLeast(4));
        assert_eq!(f.elem(0).valuation().to_string(), "at-least-4");
    }

    #[test]
    fn teichmuller_examples() {
        assert_eq!(teichmuller(&r(7, 6).elem(1)).unwrap().residue(), 1);
        assert_eq!(teichmuller(&r(5, 2).elem(2)).unwrap().residue(), 7);
        // Iteration oracle for p = 7, N = 2.
        let f = r(7, 2);
        let mut w = 3u64;
        loop {
            let next = (0..7).fold(1u64, |acc, _| acc * w % 49);
            if next == w {
                break;
            }
            w = next;
        }
        assert_eq!(teichmuller(&f.elem(3)).unwrap().residue(), w);
        assert_eq!(w, 31);
    }

    #[test]
    fn teichmuller_rejects_bad_input() {
        assert!(matches!(
            teichmuller(&r(5, 3).elem(10)),
            Err(PadicError::NotUnit(_))
        ));
        assert_eq!(PadicRing::new(2, 5), Err(PadicError::PrimeTwo));
    }

    #[test]
    fn one_unit_pow_examples() {
        let f = r(5, 3);
        let z = f.elem(6);
        assert_eq!(one_unit_pow(&z, &f.zero()).unwrap(), f.one());
        assert_eq!(one_unit_pow(&f.one(), &f.elem(17)).unwrap(), f.one());
        let w = teichmuller(&z).unwrap();
        let expected = z.pow(3) * w.pow(3).inv().unwrap();
        assert_eq!(one_unit_pow(&z, &f.elem(3)).unwrap(), expected);
    }

    #[test]
    fn exp_log_inverse() {
        let f = r(3, 10);
        let x = f.elem(3 * 7);
        let back = log_one_unit(&exp_p_divisible(&x).unwrap()).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn division_tracks_precision() {
        let f = r(3, 6);
        let x = f.elem(18);
        let q = x.div_p_power(2).unwrap();
        assert_eq!(q.precision(), 4);
        assert_eq!(q.residue(), 2);
        assert!(f.elem(3).div_p_power(2).is_err());
    }

    #[test]
    fn mixed_precision_takes_minimum() {
        let a = PadicNum::new(5, 3, 7).unwrap();
        let b = PadicNum::new(5, 6, 11).unwrap();
        assert_eq!((a + b).precision(), 3);
        assert_eq!((a * b).residue(), 77 % 125);
    }

    #[test]
    fn modulus_limit() {
        assert!(PadicRing::new(3, 39).is_ok());
        assert!(matches!(
            PadicRing::new(3, 40),
            Err(PadicError::ModulusTooLarge { .. })
        ));
        assert_eq!(max_precision(3), 39);
    }
}
