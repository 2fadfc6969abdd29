//! Fixed-precision arithmetic in the ring of integers of a totally ramified
//! extension `E = Q_p(pi)`, `pi^e = p`.
//!
//! An element is stored as `c_0 + c_1 pi + ... + c_{e-1} pi^{e-1}` with
//! `c_i` in `Z/p^K`, `K = ceil(M/e)`, together with the absolute pi-adic
//! precision `N <= M` to which it is known. Digits are kept truncated so that
//! only information below `pi^N` is stored; this makes the valuation of a
//! stored value exact whenever some digit survives.
//!
//! Arithmetic never claims more precision than its inputs justify:
//!
//! ```text
//! (x + O(pi^a)) + (y + O(pi^b)) = (x + y) + O(pi^min(a, b))
//! (x + O(pi^a)) * (y + O(pi^b)) = x y + O(pi^min(a + v(y), b + v(x)))
//! ```

use std::cmp::{min, Ordering};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PadicError {
    #[error("{0} is not an odd prime")]
    NotOddPrime(u64),
    #[error("ramification index must be at least 1")]
    ZeroRamification,
    #[error("precision {prec} is below one full p-digit (e = {e})")]
    PrecisionTooLow { prec: u32, e: u32 },
    #[error("a_p must lie in the maximal ideal, got pi-exponent {0}")]
    NotInMaximalIdeal(i64),
    #[error("unit part reduces to zero modulo pi")]
    ZeroUnit,
    #[error("element is not a unit")]
    NotUnit,
    #[error("element is not integral")]
    NotIntegral,
    #[error("insufficient precision: {0}")]
    InsufficientPrecision(String),
    #[error("expected {expected} digits, got {got}")]
    DigitCount { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, PadicError>;

pub fn is_odd_prime(p: u64) -> bool {
    if p < 3 || p % 2 == 0 {
        return false;
    }
    let mut d = 3;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// `v_p(n)` for a nonzero integer, `None` for zero.
pub fn vp_int(n: &BigInt, p: u64) -> Option<u32> {
    if n.is_zero() {
        return None;
    }
    let p = BigInt::from(p);
    let mut n = n.abs();
    let mut v = 0;
    loop {
        let (q, rem) = n.div_rem(&p);
        if !rem.is_zero() {
            return Some(v);
        }
        n = q;
        v += 1;
    }
}

struct CtxInner {
    p: u64,
    e: u32,
    prec: u32,
    pow: Vec<BigInt>,
    teich: OnceLock<Vec<BigInt>>,
    zp: OnceLock<PrimeCtx>,
}

/// The prime `p`, the ramification index `e` and the working precision `M`.
///
/// Cheap to clone; equality compares `(p, e, M)`.
#[derive(Clone)]
pub struct PrimeCtx(Arc<CtxInner>);

impl PrimeCtx {
    pub fn new(p: u64, e: u32, prec: u32) -> Result<Self> {
        if !is_odd_prime(p) {
            return Err(PadicError::NotOddPrime(p));
        }
        if e == 0 {
            return Err(PadicError::ZeroRamification);
        }
        if prec < e {
            return Err(PadicError::PrecisionTooLow { prec, e });
        }
        let k = prec.div_ceil(e);
        let base = BigInt::from(p);
        let mut pow = Vec::with_capacity(k as usize + 1);
        pow.push(BigInt::one());
        for i in 0..k as usize {
            let next = &pow[i] * &base;
            pow.push(next);
        }
        Ok(PrimeCtx(Arc::new(CtxInner {
            p,
            e,
            prec,
            pow,
            teich: OnceLock::new(),
            zp: OnceLock::new(),
        })))
    }

    pub fn p(&self) -> u64 {
        self.0.p
    }

    pub fn e(&self) -> u32 {
        self.0.e
    }

    /// Working absolute precision `M`, in powers of `pi`.
    pub fn prec(&self) -> u32 {
        self.0.prec
    }

    /// Number of p-adic digits carried per coefficient, `ceil(M/e)`.
    pub fn digit_prec(&self) -> u32 {
        self.0.pow.len() as u32 - 1
    }

    /// `p^k` for `k <= digit_prec()`.
    pub fn p_pow(&self, k: u32) -> &BigInt {
        &self.0.pow[k as usize]
    }

    fn modulus(&self) -> &BigInt {
        self.0.pow.last().expect("nonempty power table")
    }

    /// The unramified context `Z_p` carrying the same number of p-digits.
    pub fn zp(&self) -> PrimeCtx {
        if self.e() == 1 {
            return self.clone();
        }
        self.0
            .zp
            .get_or_init(|| PrimeCtx::new(self.p(), 1, self.digit_prec()).expect("valid base context"))
            .clone()
    }

    /// Teichmuller lifts of `0..p` as integers modulo `p^K`.
    fn teich_table(&self) -> &[BigInt] {
        self.0.teich.get_or_init(|| {
            let p = BigInt::from(self.p());
            let modulus = self.modulus().clone();
            (0..self.p())
                .map(|lam| {
                    // x -> x^p from the naive lift; stabilises after at most K steps
                    let mut x = BigInt::from(lam);
                    loop {
                        let y = x.modpow(&p, &modulus);
                        if y == x {
                            break x;
                        }
                        x = y;
                    }
                })
                .collect()
        })
    }

    fn same(&self, other: &PrimeCtx) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self == other
    }
}

impl PartialEq for PrimeCtx {
    fn eq(&self, other: &Self) -> bool {
        (self.0.p, self.0.e, self.0.prec) == (other.0.p, other.0.e, other.0.prec)
    }
}

impl Eq for PrimeCtx {}

impl fmt::Debug for PrimeCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PrimeCtx(p={}, e={}, M={})", self.p(), self.e(), self.prec())
    }
}

/// Normalized valuation with `v(p) = 1`, so values live in `(1/e) Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Valuation {
    Exact(Ratio<i64>),
    /// The value vanishes at the tracked precision; only a lower bound is known.
    AtLeast(Ratio<i64>),
}

impl Valuation {
    pub fn is_exact(&self) -> bool {
        matches!(self, Valuation::Exact(_))
    }

    pub fn value(&self) -> Ratio<i64> {
        match *self {
            Valuation::Exact(v) | Valuation::AtLeast(v) => v,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Exact(v) => write!(f, "{v}"),
            Valuation::AtLeast(v) => write!(f, ">={v}"),
        }
    }
}

impl Serialize for Valuation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrality {
    Yes,
    No,
    InsufficientPrecision,
}

/// An element of `O_E` known modulo `pi^N`.
#[derive(Clone)]
pub struct PadicElem {
    ctx: PrimeCtx,
    digits: Vec<BigInt>,
    prec: u32,
}

impl PadicElem {
    fn from_raw(ctx: &PrimeCtx, digits: Vec<BigInt>, prec: u32) -> Self {
        let mut x = PadicElem {
            ctx: ctx.clone(),
            digits,
            prec: min(prec, ctx.prec()),
        };
        x.normalize();
        x
    }

    fn normalize(&mut self) {
        let e = self.ctx.e();
        for (i, c) in self.digits.iter_mut().enumerate() {
            let i = i as u32;
            let k = if self.prec > i { (self.prec - i).div_ceil(e) } else { 0 };
            *c = c.mod_floor(self.ctx.p_pow(k));
        }
    }

    pub fn zero(ctx: &PrimeCtx) -> Self {
        PadicElem {
            ctx: ctx.clone(),
            digits: vec![BigInt::zero(); ctx.e() as usize],
            prec: ctx.prec(),
        }
    }

    pub fn one(ctx: &PrimeCtx) -> Self {
        Self::from_int(ctx, &BigInt::one())
    }

    pub fn from_int(ctx: &PrimeCtx, n: &BigInt) -> Self {
        let mut digits = vec![BigInt::zero(); ctx.e() as usize];
        digits[0] = n.clone();
        Self::from_raw(ctx, digits, ctx.prec())
    }

    pub fn from_i64(ctx: &PrimeCtx, n: i64) -> Self {
        Self::from_int(ctx, &BigInt::from(n))
    }

    /// Builds `sum c_i pi^i` from exactly `e` digits, known to `prec`.
    pub fn from_digits(ctx: &PrimeCtx, digits: Vec<BigInt>, prec: u32) -> Result<Self> {
        if digits.len() != ctx.e() as usize {
            return Err(PadicError::DigitCount {
                expected: ctx.e() as usize,
                got: digits.len(),
            });
        }
        Ok(Self::from_raw(ctx, digits, prec))
    }

    /// `pi` itself (equal to `p` when `e = 1`).
    pub fn uniformizer(ctx: &PrimeCtx) -> Self {
        Self::one(ctx).mul_pi_pow(1)
    }

    /// Moves an element of `Z_p` (any context with `e = 1` and the same `p`)
    /// into this context.
    pub fn embed(ctx: &PrimeCtx, x: &PadicElem) -> Self {
        debug_assert_eq!(x.ctx.e(), 1);
        debug_assert_eq!(x.ctx.p(), ctx.p());
        let mut digits = vec![BigInt::zero(); ctx.e() as usize];
        digits[0] = x.digits[0].clone();
        let prec = x.prec.saturating_mul(ctx.e());
        Self::from_raw(ctx, digits, prec)
    }

    pub fn ctx(&self) -> &PrimeCtx {
        &self.ctx
    }

    pub fn digits(&self) -> &[BigInt] {
        &self.digits
    }

    /// Absolute pi-adic precision of this value.
    pub fn known_prec(&self) -> u32 {
        self.prec
    }

    /// True when every tracked digit vanishes.
    pub fn is_zero_digits(&self) -> bool {
        self.digits.iter().all(Zero::is_zero)
    }

    /// `v_pi(x)`, or `None` when the value is indistinguishable from zero.
    pub fn valuation_pi(&self) -> Option<u32> {
        let e = self.ctx.e();
        self.digits
            .iter()
            .enumerate()
            .filter_map(|(i, c)| vp_int(c, self.ctx.p()).map(|v| e * v + i as u32))
            .min()
    }

    fn valuation_lower(&self) -> u32 {
        self.valuation_pi().unwrap_or(self.prec)
    }

    pub fn valuation(&self) -> Valuation {
        let e = i64::from(self.ctx.e());
        match self.valuation_pi() {
            Some(v) => Valuation::Exact(Ratio::new(i64::from(v), e)),
            None => Valuation::AtLeast(Ratio::new(i64::from(self.prec), e)),
        }
    }

    pub fn is_unit(&self) -> bool {
        self.valuation_pi() == Some(0)
    }

    /// Image in `O_E / pi = F_p`.
    pub fn residue(&self) -> Result<u64> {
        if self.prec == 0 {
            return Err(PadicError::InsufficientPrecision(
                "no digits known for residue".into(),
            ));
        }
        let r = self.digits[0].mod_floor(&BigInt::from(self.ctx.p()));
        Ok(r.to_u64().expect("residue fits"))
    }

    fn check_ctx(&self, other: &PadicElem) {
        assert!(self.ctx.same(&other.ctx), "mixed p-adic contexts");
    }

    pub fn mul_int(&self, n: &BigInt) -> Self {
        match vp_int(n, self.ctx.p()) {
            None => Self::zero(&self.ctx),
            Some(v) => {
                let digits = self.digits.iter().map(|c| c * n).collect();
                let prec = self.prec.saturating_add(v.saturating_mul(self.ctx.e()));
                Self::from_raw(&self.ctx, digits, prec)
            }
        }
    }

    pub fn mul_i64(&self, n: i64) -> Self {
        self.mul_int(&BigInt::from(n))
    }

    /// Multiplication by `p^k`.
    pub fn mul_p_pow(&self, k: u32) -> Self {
        self.mul_pi_pow(k.saturating_mul(self.ctx.e()))
    }

    /// Multiplication by `pi^k`.
    pub fn mul_pi_pow(&self, k: u32) -> Self {
        let e = self.ctx.e();
        let prec = self.prec.saturating_add(k);
        if k >= self.ctx.prec() {
            let mut z = Self::zero(&self.ctx);
            z.prec = min(prec, self.ctx.prec());
            return z;
        }
        let mut digits = vec![BigInt::zero(); e as usize];
        for (i, c) in self.digits.iter().enumerate() {
            let shifted = i as u32 + k;
            let (q, rho) = (shifted / e, shifted % e);
            if q > self.ctx.digit_prec() {
                continue;
            }
            digits[rho as usize] += c * self.ctx.p_pow(q);
        }
        Self::from_raw(&self.ctx, digits, prec)
    }

    /// Exact division by `pi^k`; fails unless `pi^k` provably divides.
    pub fn div_pi_pow(&self, k: u32) -> Result<Self> {
        if k == 0 {
            return Ok(self.clone());
        }
        if self.prec < k {
            return Err(PadicError::InsufficientPrecision(format!(
                "dividing by pi^{k} at precision {}",
                self.prec
            )));
        }
        if self.valuation_lower() < k {
            return Err(PadicError::NotIntegral);
        }
        let e = self.ctx.e();
        let mut digits = vec![BigInt::zero(); e as usize];
        for (j, slot) in digits.iter_mut().enumerate() {
            let shifted = j as u32 + k;
            let (q, rho) = (shifted / e, shifted % e);
            let c = &self.digits[rho as usize];
            if q > self.ctx.digit_prec() {
                continue;
            }
            let (quot, rem) = c.div_rem(self.ctx.p_pow(q));
            debug_assert!(rem.is_zero());
            *slot = quot;
        }
        Ok(Self::from_raw(&self.ctx, digits, self.prec - k))
    }

    /// Inverse of a unit, by Newton iteration `y <- y (2 - x y)`.
    pub fn inverse(&self) -> Result<Self> {
        if !self.is_unit() {
            return Err(PadicError::NotUnit);
        }
        let modulus = self.ctx.modulus();
        let c0_inv = self.digits[0]
            .modinv(modulus)
            .ok_or(PadicError::NotUnit)?;
        let mut digits = vec![BigInt::zero(); self.ctx.e() as usize];
        digits[0] = c0_inv;
        let mut y = Self::from_raw(&self.ctx, digits, self.ctx.prec());
        let two = Self::from_i64(&self.ctx, 2);
        loop {
            let next = &y * &(&two - &(self * &y));
            if next.digits == y.digits {
                break;
            }
            y = next;
        }
        y.prec = self.prec;
        y.normalize();
        Ok(y)
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one(&self.ctx);
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            n >>= 1;
        }
        acc
    }

    /// Equality of the two values modulo the smaller of their precisions.
    pub fn agrees_with(&self, other: &PadicElem) -> bool {
        self.check_ctx(other);
        (self - other).is_zero_digits()
    }

    /// Lowers the tracked precision to `prec` (no-op if already lower).
    pub fn truncate(&self, prec: u32) -> Self {
        Self::from_raw(&self.ctx, self.digits.clone(), min(prec, self.prec))
    }
}

impl PartialEq for PadicElem {
    fn eq(&self, other: &Self) -> bool {
        self.ctx == other.ctx && self.prec == other.prec && self.digits == other.digits
    }
}

impl Eq for PadicElem {}

impl fmt::Debug for PadicElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for PadicElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.digits.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}*pi")?,
                _ => write!(f, "{c}*pi^{i}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(pi^{})", self.prec)
    }
}

impl Add for &PadicElem {
    type Output = PadicElem;

    fn add(self, rhs: &PadicElem) -> PadicElem {
        self.check_ctx(rhs);
        let digits = self.digits.iter().zip(&rhs.digits).map(|(a, b)| a + b).collect();
        PadicElem::from_raw(&self.ctx, digits, min(self.prec, rhs.prec))
    }
}

impl Sub for &PadicElem {
    type Output = PadicElem;

    fn sub(self, rhs: &PadicElem) -> PadicElem {
        self.check_ctx(rhs);
        let digits = self.digits.iter().zip(&rhs.digits).map(|(a, b)| a - b).collect();
        PadicElem::from_raw(&self.ctx, digits, min(self.prec, rhs.prec))
    }
}

impl Neg for &PadicElem {
    type Output = PadicElem;

    fn neg(self) -> PadicElem {
        let digits = self.digits.iter().map(|a| -a).collect();
        PadicElem::from_raw(&self.ctx, digits, self.prec)
    }
}

impl Mul for &PadicElem {
    type Output = PadicElem;

    fn mul(self, rhs: &PadicElem) -> PadicElem {
        self.check_ctx(rhs);
        let e = self.ctx.e() as usize;
        let prec = min(
            self.prec.saturating_add(rhs.valuation_lower()),
            rhs.prec.saturating_add(self.valuation_lower()),
        );
        if e == 1 {
            let digits = vec![&self.digits[0] * &rhs.digits[0]];
            return PadicElem::from_raw(&self.ctx, digits, prec);
        }
        let p = BigInt::from(self.ctx.p());
        let mut digits = vec![BigInt::zero(); e];
        for (i, a) in self.digits.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.digits.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let prod = a * b;
                if i + j >= e {
                    digits[i + j - e] += prod * &p;
                } else {
                    digits[i + j] += prod;
                }
            }
        }
        PadicElem::from_raw(&self.ctx, digits, prec)
    }
}

impl Add for PadicElem {
    type Output = PadicElem;
    fn add(self, rhs: PadicElem) -> PadicElem {
        &self + &rhs
    }
}

impl Sub for PadicElem {
    type Output = PadicElem;
    fn sub(self, rhs: PadicElem) -> PadicElem {
        &self - &rhs
    }
}

impl Mul for PadicElem {
    type Output = PadicElem;
    fn mul(self, rhs: PadicElem) -> PadicElem {
        &self * &rhs
    }
}

#[derive(Serialize, Deserialize)]
struct PadicRepr {
    p: u64,
    e: u32,
    #[serde(rename = "M")]
    m: u32,
    digits: Vec<String>,
    known_prec: u32,
}

impl Serialize for PadicElem {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PadicRepr {
            p: self.ctx.p(),
            e: self.ctx.e(),
            m: self.ctx.prec(),
            digits: self.digits.iter().map(ToString::to_string).collect(),
            known_prec: self.prec,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PadicElem {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PadicRepr::deserialize(d)?;
        let ctx = PrimeCtx::new(repr.p, repr.e, repr.m).map_err(D::Error::custom)?;
        let digits = repr
            .digits
            .iter()
            .map(|s| s.parse::<BigInt>().map_err(D::Error::custom))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        PadicElem::from_digits(&ctx, digits, repr.known_prec).map_err(D::Error::custom)
    }
}

/// `pi^{-d} * x`: an element of `E` with an explicit denominator exponent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PadicFrac {
    pub numer: PadicElem,
    pub denom: u32,
}

impl PadicFrac {
    pub fn new(numer: PadicElem, denom: u32) -> Self {
        PadicFrac { numer, denom }
    }

    pub fn valuation(&self) -> Valuation {
        let e = i64::from(self.numer.ctx.e());
        let shift = Ratio::new(i64::from(self.denom), e);
        match self.numer.valuation() {
            Valuation::Exact(v) => Valuation::Exact(v - shift),
            Valuation::AtLeast(v) => Valuation::AtLeast(v - shift),
        }
    }

    pub fn is_integral(&self) -> Integrality {
        match self.numer.valuation_pi() {
            Some(v) if v >= self.denom => Integrality::Yes,
            Some(_) => Integrality::No,
            None if self.numer.prec >= self.denom => Integrality::Yes,
            None => Integrality::InsufficientPrecision,
        }
    }

    /// Valuation slack `v(x) - d` in pi-units, a lower bound when undetermined.
    pub fn margin(&self) -> i64 {
        i64::from(self.numer.valuation_lower()) - i64::from(self.denom)
    }

    pub fn residue(&self) -> Result<u64> {
        match self.is_integral() {
            Integrality::No => return Err(PadicError::NotIntegral),
            Integrality::InsufficientPrecision => {
                return Err(PadicError::InsufficientPrecision(
                    "integrality undecided".into(),
                ))
            }
            Integrality::Yes => {}
        }
        if self.numer.prec <= self.denom {
            return Err(PadicError::InsufficientPrecision(format!(
                "residue needs precision {} but only {} is known",
                self.denom + 1,
                self.numer.prec
            )));
        }
        self.numer.div_pi_pow(self.denom)?.residue()
    }
}

/// `u * pi^h` with `u` given by its pi-adic digits.
pub fn make_ap(ctx: &PrimeCtx, h: i64, unit_digits: &[i64]) -> Result<PadicElem> {
    if h <= 0 {
        return Err(PadicError::NotInMaximalIdeal(h));
    }
    if unit_digits.is_empty() || unit_digits.len() > ctx.e() as usize {
        return Err(PadicError::DigitCount {
            expected: ctx.e() as usize,
            got: unit_digits.len(),
        });
    }
    let mut digits: Vec<BigInt> = unit_digits.iter().map(|&d| BigInt::from(d)).collect();
    digits.resize(ctx.e() as usize, BigInt::zero());
    let unit = PadicElem::from_digits(ctx, digits, ctx.prec())?;
    if !unit.is_unit() {
        return Err(PadicError::ZeroUnit);
    }
    Ok(unit.mul_pi_pow(h as u32))
}

/// The Teichmuller representative `[lam]`, the unique root of unity (or zero)
/// in `Z_p` reducing to `lam`, known to the full working precision.
pub fn teichmuller(ctx: &PrimeCtx, lam: u64) -> PadicElem {
    let digit = ctx.teich_table()[(lam % ctx.p()) as usize].clone();
    PadicElem::from_int(ctx, &digit)
}

/// Compares two valuations when both are exact.
pub fn cmp_exact(a: Valuation, b: Valuation) -> Option<Ordering> {
    match (a, b) {
        (Valuation::Exact(x), Valuation::Exact(y)) => Some(x.cmp(&y)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx(p: u64, e: u32, m: u32) -> PrimeCtx {
        PrimeCtx::new(p, e, m).unwrap()
    }

    #[test]
    fn make_ap_examples() {
        let c = ctx(5, 1, 20);
        let a = make_ap(&c, 1, &[1]).unwrap();
        assert_eq!(a, PadicElem::from_i64(&c, 5));
        assert_eq!(a.valuation(), Valuation::Exact(Ratio::from_integer(1)));

        let c = ctx(7, 2, 20);
        let pi = make_ap(&c, 1, &[1]).unwrap();
        assert_eq!(pi.valuation(), Valuation::Exact(Ratio::new(1, 2)));
        assert_eq!(&pi * &pi, PadicElem::from_i64(&c, 7));

        let c = ctx(5, 2, 20);
        let a = make_ap(&c, 3, &[2]).unwrap();
        assert_eq!(a.valuation(), Valuation::Exact(Ratio::new(3, 2)));
    }

    #[test]
    fn make_ap_rejects_bad_input() {
        let c = ctx(5, 1, 20);
        assert_eq!(make_ap(&c, 0, &[1]), Err(PadicError::NotInMaximalIdeal(0)));
        assert_eq!(make_ap(&c, 1, &[5]), Err(PadicError::ZeroUnit));
        assert!(PrimeCtx::new(2, 1, 5).is_err());
        assert!(PrimeCtx::new(9, 1, 5).is_err());
        assert!(PrimeCtx::new(5, 3, 2).is_err());
    }

    #[test]
    fn zero_has_only_a_lower_bound() {
        let c = ctx(5, 2, 20);
        let z = PadicElem::zero(&c);
        assert_eq!(z.valuation(), Valuation::AtLeast(Ratio::new(20, 2)));
        let x = make_ap(&c, 1, &[3, 1]).unwrap();
        let s = &x + &(-&x);
        assert!(!s.valuation().is_exact());
        assert_eq!(s.valuation().value(), Ratio::new(20, 2));
    }

    #[test]
    fn teichmuller_fixed_points() {
        let c = ctx(5, 1, 10);
        assert!(teichmuller(&c, 0).is_zero_digits());
        assert_eq!(teichmuller(&c, 1), PadicElem::one(&c));
        let t = teichmuller(&c, 2);
        assert_eq!(t.residue().unwrap(), 2);
        assert_eq!(t.pow(4), PadicElem::one(&c));
        // Hensel oracle: the root of x^4 - 1 near 2, by Newton iteration on integers
        let m = BigInt::from(5).pow(10);
        let mut x = BigInt::from(2);
        for _ in 0..10 {
            let f = (x.pow(4) - BigInt::from(1)).mod_floor(&m);
            let df = (BigInt::from(4) * x.pow(3)).mod_floor(&m);
            x = (&x - f * df.modinv(&m).unwrap()).mod_floor(&m);
        }
        assert_eq!(t.digits()[0], x);
    }

    #[test]
    fn residue_requires_precision() {
        let c = ctx(7, 2, 10);
        let frac = PadicFrac::new(PadicElem::zero(&c).truncate(3), 3);
        assert_eq!(frac.is_integral(), Integrality::Yes);
        assert!(matches!(frac.residue(), Err(PadicError::InsufficientPrecision(_))));
        let frac = PadicFrac::new(PadicElem::zero(&c).truncate(2), 3);
        assert_eq!(frac.is_integral(), Integrality::InsufficientPrecision);
        let x = make_ap(&c, 1, &[3]).unwrap();
        assert_eq!(PadicFrac::new(x.clone(), 2).is_integral(), Integrality::No);
        assert_eq!(PadicFrac::new(x, 1).residue().unwrap(), 3);
    }

    #[test]
    fn inverse_and_division() {
        let c = ctx(5, 2, 16);
        let u = PadicElem::from_digits(&c, vec![BigInt::from(3), BigInt::from(4)], 16).unwrap();
        let inv = u.inverse().unwrap();
        assert_eq!(&u * &inv, PadicElem::one(&c));
        let x = u.mul_pi_pow(5);
        assert_eq!(x.known_prec(), 16);
        let back = x.div_pi_pow(5).unwrap();
        assert_eq!(back.known_prec(), 11);
        assert!(back.agrees_with(&u));
        assert!(u.div_pi_pow(1).is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let c = ctx(7, 2, 12);
        let x = make_ap(&c, 3, &[2, 5]).unwrap();
        let json = serde_json::to_string(&x).unwrap();
        assert!(json.contains("\"known_prec\":12"));
        let back: PadicElem = serde_json::from_str(&json).unwrap();
        assert_eq!(back, x);
    }

    fn elem(p: u64, e: u32, m: u32) -> impl Strategy<Value = PadicElem> {
        (prop::collection::vec(0i64..1_000_000, e as usize), 0u32..m, 1u32..=m).prop_map(
            move |(digits, shift, prec)| {
                let c = ctx(p, e, m);
                let digits = digits.into_iter().map(BigInt::from).collect();
                PadicElem::from_digits(&c, digits, prec)
                    .unwrap()
                    .mul_pi_pow(shift)
            },
        )
    }

    proptest! {
        #[test]
        fn valuation_is_additive(x in elem(5, 3, 24), y in elem(5, 3, 24)) {
            let xy = &x * &y;
            if let (Valuation::Exact(a), Valuation::Exact(b), Valuation::Exact(c)) =
                (x.valuation(), y.valuation(), xy.valuation())
            {
                prop_assert_eq!(a + b, c);
            }
        }

        #[test]
        fn ultrametric(x in elem(7, 2, 20), y in elem(7, 2, 20)) {
            let s = &x + &y;
            if let (Valuation::Exact(a), Valuation::Exact(b), Valuation::Exact(c)) =
                (x.valuation(), y.valuation(), s.valuation())
            {
                prop_assert!(c >= a.min(b));
            }
        }

        #[test]
        fn teichmuller_is_fixed_by_frobenius(
            p in prop::sample::select(vec![3u64, 5, 7, 11, 13]),
            m in 1u32..=60,
            lam in 0u64..13,
        ) {
            let c = ctx(p, 1, m);
            let t = teichmuller(&c, lam % p);
            prop_assert_eq!(t.pow(p as u32), t.clone());
            prop_assert_eq!(t.residue().unwrap(), lam % p);
        }

        #[test]
        fn vanishing_values_never_report_exact(x in elem(5, 2, 14)) {
            let d = &x - &x;
            prop_assert!(!d.valuation().is_exact());
            prop_assert!(d.valuation().value() * 2 >= Ratio::from_integer(i64::from(x.known_prec())));
        }
    }
}
