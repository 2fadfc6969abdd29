//! Binomial sums over a congruence class of indices,
//!
//! ```text
//! S_{r,i,m}  = sum_{j = b-m mod (p-1), 0 <= j < r-m} C(j,i) C(r,j)
//! S~_{r,i,m} = sum_{j = b-m mod (p-1), 0 <= j <= r}  C(j,i) C(r,j)
//! ```
//!
//! for `r = b + s p^t (p-1)`, their p-adic valuations, and the weight
//! function `alpha(r) = sum_{n >= 1} floor(r / (p^{n-1} (p-1)))`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize, Serializer};

use crate::padic::{is_odd_prime, vp_int};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BinomError {
    #[error("{0} is not an odd prime")]
    NotOddPrime(u64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T> = std::result::Result<T, BinomError>;

/// `r = b + s p^t (p-1)` together with the summation indices `i` and `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SumParams {
    pub p: u64,
    pub b: u64,
    pub s: u64,
    pub t: u32,
    pub i: u64,
    pub m: u64,
}

impl SumParams {
    pub fn new(p: u64, b: u64, s: u64, t: u32, i: u64, m: u64) -> Result<Self> {
        let params = SumParams { p, b, s, t, i, m };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let SumParams { p, b, s, t, i, m } = *self;
        if !is_odd_prime(p) {
            return Err(BinomError::NotOddPrime(p));
        }
        let bad = |msg: String| Err(BinomError::InvalidParams(msg));
        if b == 0 || b > p - 1 {
            return bad(format!("need 0 < b <= p-1, got b={b}"));
        }
        if s == 0 || s % p == 0 {
            return bad(format!("need s nonzero and prime to p, got s={s}"));
        }
        if t == 0 {
            return bad("need t >= 1".into());
        }
        if i >= b {
            return bad(format!("need i < b, got i={i}, b={b}"));
        }
        if m >= p - 1 {
            return bad(format!("need m < p-1, got m={m}"));
        }
        Ok(())
    }

    pub fn r(&self) -> u64 {
        self.b + self.s * self.p.pow(self.t) * (self.p - 1)
    }

    /// The corner `b = p-1, m = 0`, where two indices `j <= b` share the
    /// class of `b - m`.
    pub fn is_corner(&self) -> bool {
        self.b == self.p - 1 && self.m == 0
    }

    fn class(&self) -> u64 {
        (self.b + self.p - 1 - self.m) % (self.p - 1)
    }
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for j in 0..k {
        acc *= n - j;
        acc /= j + 1;
    }
    acc
}

fn sum_over_class(params: &SumParams, upper: u64) -> BigInt {
    let r = params.r();
    let (i, class) = (params.i, params.class());
    let modulus = params.p - 1;
    let mut c_rj = BigInt::one();
    let mut c_ji = BigInt::zero();
    let mut total = BigInt::zero();
    for j in 0..upper {
        if j == i {
            c_ji = BigInt::one();
        } else if j > i {
            c_ji = c_ji * j / (j - i);
        }
        if j % modulus == class && j >= i {
            total += &c_ji * &c_rj;
        }
        c_rj = c_rj * (r - j) / (j + 1);
    }
    total
}

/// `S_{r,i,m}` by literal summation.
pub fn s_sum(params: &SumParams) -> BigInt {
    let upper = params.r().saturating_sub(params.m);
    sum_over_class(params, upper)
}

/// `S~_{r,i,m}` by literal summation over `0 <= j <= r`.
pub fn s_tilde(params: &SumParams) -> BigInt {
    sum_over_class(params, params.r() + 1)
}

/// The correction term `C(r,i) C(r-i,m) = S~ - S`.
pub fn tail_term(params: &SumParams) -> BigInt {
    let r = params.r();
    binomial(r, params.i) * binomial(r - params.i, params.m)
}

/// `C(r,i) (C(b-i,m) - C(r-i,m))`.
pub fn target(params: &SumParams) -> BigInt {
    let r = params.r();
    let (b, i, m) = (params.b, params.i, params.m);
    binomial(r, i) * (binomial(b - i, m) - binomial(r - i, m))
}

fn ser_big<S: Serializer>(n: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&n.to_string())
}

/// Exact values and p-adic verdicts for one parameter tuple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CongruenceReport {
    pub params: SumParams,
    pub r: u64,
    #[serde(serialize_with = "ser_big")]
    pub s: BigInt,
    #[serde(serialize_with = "ser_big")]
    pub target: BigInt,
    /// `v_p(S)`, `None` when `S = 0`.
    pub v_s: Option<u32>,
    /// `v_p(S - target)`, `None` when they are equal.
    pub v_diff: Option<u32>,
    pub pass_t: bool,
    pub pass_t1: bool,
    pub corner: bool,
}

impl CongruenceReport {
    pub fn from_sum(params: SumParams, s: BigInt) -> Self {
        let p = params.p;
        let t = params.t;
        let target = target(&params);
        let v_s = vp_int(&s, p);
        let v_diff = vp_int(&(&s - &target), p);
        CongruenceReport {
            params,
            r: params.r(),
            pass_t: v_s.is_none_or(|v| v >= t),
            pass_t1: v_diff.is_none_or(|v| v > t),
            corner: params.is_corner(),
            s,
            target,
            v_s,
            v_diff,
        }
    }

    pub fn passed(&self) -> bool {
        self.pass_t && self.pass_t1
    }
}

/// Congruence report computed from the literal sum.
pub fn check_cong2(params: &SumParams) -> Result<CongruenceReport> {
    params.validate()?;
    Ok(CongruenceReport::from_sum(*params, s_sum(params)))
}

/// Class sums `A_n(c) = sum_{k = c mod (p-1)} C(n,k)` for one row `n`.
fn class_sums_of_row(n: u64, modulus: u64) -> Vec<BigInt> {
    let mut sums = vec![BigInt::zero(); modulus as usize];
    let mut c = BigInt::one();
    for k in 0..=n {
        sums[(k % modulus) as usize] += &c;
        c = c * (n - k) / (k + 1);
    }
    sums
}

/// Every report for a fixed `(p, s, t)`, over all `0 < b <= p-1`, `i < b`,
/// `m < p-1`, in lexicographic `(b, i, m)` order.
///
/// Uses `C(j,i) C(r,j) = C(r,i) C(r-i,j-i)`, so that
/// `S~ = C(r,i) A_{r-i}(b-m-i)`; the class sums of consecutive rows are
/// related by Pascal's rule `A_{n+1}(c) = A_n(c) + A_n(c-1)`, and all
/// rows needed lie within `p-1` of `s p^t (p-1) + 1`.
pub fn cong2_sweep(p: u64, s: u64, t: u32) -> Result<Vec<CongruenceReport>> {
    SumParams::new(p, 1, s, t, 0, 0)?;
    let modulus = p - 1;
    let base = s * p.pow(t) * (p - 1);
    let mut rows = vec![class_sums_of_row(base + 1, modulus)];
    for _ in 1..modulus {
        let prev = rows.last().expect("nonempty");
        let next = (0..modulus as usize)
            .map(|c| &prev[c] + &prev[(c + modulus as usize - 1) % modulus as usize])
            .collect();
        rows.push(next);
    }
    let row = |n: u64| &rows[(n - base - 1) as usize];
    let mut out = Vec::new();
    for b in 1..=p - 1 {
        let r = base + b;
        for i in 0..b {
            let c_ri = binomial(r, i);
            for m in 0..p - 1 {
                let params = SumParams { p, b, s, t, i, m };
                let class = (b + 2 * modulus - m - i) % modulus;
                let tilde = &c_ri * &row(r - i)[class as usize];
                let sum = tilde - tail_term(&params);
                out.push(CongruenceReport::from_sum(params, sum));
            }
        }
    }
    Ok(out)
}

/// Factorials split as `n! = p^{v(n!)} u(n!)` with `u(n!)` and its inverse
/// stored modulo `p^K`.
#[derive(Debug, Clone)]
pub struct BinomialTable {
    p: u64,
    k: u32,
    modulus: BigInt,
    val: Vec<u32>,
    unit: Vec<BigInt>,
    unit_inv: Vec<BigInt>,
}

impl BinomialTable {
    pub fn new(p: u64, k: u32, max_n: usize) -> Self {
        let modulus = BigInt::from(p).pow(k);
        let mut val = Vec::with_capacity(max_n + 1);
        let mut unit = Vec::with_capacity(max_n + 1);
        val.push(0);
        unit.push(BigInt::one());
        for n in 1..=max_n {
            let mut x = n as u64;
            let mut v = 0;
            while x % p == 0 {
                x /= p;
                v += 1;
            }
            val.push(val[n - 1] + v);
            unit.push((&unit[n - 1] * x).mod_floor(&modulus));
        }
        let inv_last = mod_inverse(&unit[max_n], &modulus);
        let mut unit_inv = vec![BigInt::zero(); max_n + 1];
        unit_inv[max_n] = inv_last;
        for n in (1..=max_n).rev() {
            let mut x = n as u64;
            while x % p == 0 {
                x /= p;
            }
            unit_inv[n - 1] = (&unit_inv[n] * x).mod_floor(&modulus);
        }
        BinomialTable {
            p,
            k,
            modulus,
            val,
            unit,
            unit_inv,
        }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn precision(&self) -> u32 {
        self.k
    }

    pub fn max_n(&self) -> usize {
        self.val.len() - 1
    }

    pub fn modulus(&self) -> &BigInt {
        &self.modulus
    }

    /// `v_p(C(n,k))`, `None` if `k > n`.
    pub fn valuation(&self, n: usize, k: usize) -> Option<u32> {
        (k <= n).then(|| self.val[n] - self.val[k] - self.val[n - k])
    }

    /// `C(n,k) mod p^K` in `[0, p^K)`.
    pub fn binom(&self, n: usize, k: usize) -> BigInt {
        let Some(v) = self.valuation(n, k) else {
            return BigInt::zero();
        };
        if v >= self.k {
            return BigInt::zero();
        }
        let u = &self.unit[n] * &self.unit_inv[k] % &self.modulus * &self.unit_inv[n - k];
        (u * BigInt::from(self.p).pow(v)).mod_floor(&self.modulus)
    }
}

fn mod_inverse(a: &BigInt, m: &BigInt) -> BigInt {
    let g = a.extended_gcd(m);
    debug_assert!(g.gcd.is_one());
    g.x.mod_floor(m)
}

/// `S_{r,i,m} mod p^{t+1}` from the factorial table, independent of the
/// big-integer paths.
pub fn s_sum_mod(params: &SumParams, table: &BinomialTable) -> BigInt {
    let r = params.r() as usize;
    let upper = r.saturating_sub(params.m as usize);
    let modulus = (params.p - 1) as usize;
    let (i, class) = (params.i as usize, params.class() as usize);
    let mut total = BigInt::zero();
    let mut j = class;
    while j < upper {
        if j >= i {
            total += table.binom(j, i) * table.binom(r, j);
        }
        j += modulus;
    }
    total.mod_floor(table.modulus())
}

/// Runs the sweep for `(p, s, t)` and checks every sum against the
/// factorial-table path modulo `p^{t+1}`; returns the reports and the number
/// of disagreements.
pub fn cong2_sweep_checked(p: u64, s: u64, t: u32) -> Result<(Vec<CongruenceReport>, usize)> {
    let reports = cong2_sweep(p, s, t)?;
    let max_r = reports.iter().map(|rep| rep.r).max().unwrap_or(0);
    let table = BinomialTable::new(p, t + 1, max_r as usize);
    let mismatches = reports
        .iter()
        .filter(|rep| rep.s.mod_floor(table.modulus()) != s_sum_mod(&rep.params, &table))
        .count();
    Ok((reports, mismatches))
}

/// `alpha(r) = sum_{n >= 1} floor(r / (p^{n-1} (p-1)))`.
pub fn alpha(p: u64, r: u64) -> u64 {
    let mut total = 0;
    let mut d = p - 1;
    while d <= r {
        total += r / d;
        match d.checked_mul(p) {
            Some(next) => d = next,
            None => break,
        }
    }
    total
}

/// `v_p(C(b-i,m) - C(r-i,m))`, `None` when the difference vanishes.
pub fn target_gap_valuation(params: &SumParams) -> Option<u32> {
    let r = params.r();
    let (b, i, m) = (params.b, params.i, params.m);
    let gap = binomial(b - i, m) - binomial(r - i, m);
    vp_int(&gap, params.p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn anchor() -> SumParams {
        SumParams::new(5, 3, 1, 1, 0, 1).unwrap()
    }

    #[test]
    fn anchor_values() {
        let params = anchor();
        assert_eq!(params.r(), 23);
        let expected: BigInt = [2u64, 6, 10, 14, 18].iter().map(|&j| binomial(23, j)).sum();
        assert_eq!(expected, BigInt::from(2096105));
        assert_eq!(s_sum(&params), expected);
        let rep = check_cong2(&params).unwrap();
        assert_eq!(rep.target, BigInt::from(-20));
        assert_eq!(&rep.s - &rep.target, BigInt::from(2096125));
        assert_eq!(rep.v_s, Some(1));
        assert_eq!(rep.v_diff, Some(3));
        assert!(rep.pass_t && rep.pass_t1);
        assert_eq!(rep.s.mod_floor(&BigInt::from(25)), BigInt::from(5));
    }

    #[test]
    fn tilde_two_ways() {
        let params = anchor();
        assert_eq!(s_tilde(&params) - s_sum(&params), tail_term(&params));
    }

    #[test]
    fn empty_sum_is_zero() {
        // j < r - m excludes everything when i is close to r
        let params = SumParams { p: 3, b: 2, s: 1, t: 1, i: 1, m: 1 };
        assert_eq!(params.r(), 8);
        let mut high = params;
        high.i = 7;
        assert_eq!(s_sum(&high), BigInt::zero());
        assert!(high.validate().is_err());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(SumParams::new(5, 3, 0, 1, 0, 1).is_err());
        assert!(SumParams::new(5, 3, 5, 1, 0, 1).is_err());
        assert!(SumParams::new(5, 5, 1, 1, 0, 1).is_err());
        assert!(SumParams::new(5, 3, 1, 1, 3, 1).is_err());
        assert!(SumParams::new(5, 3, 1, 1, 0, 4).is_err());
        assert!(SumParams::new(4, 3, 1, 1, 0, 1).is_err());
    }

    #[test]
    fn alpha_values() {
        assert_eq!(alpha(5, 0), 0);
        assert_eq!(alpha(5, 24), 7);
        assert_eq!(alpha(7, 5), 0);
        assert_eq!(alpha(3, 10), 5 + 1);
    }

    #[test]
    fn sweep_matches_literal_sums() {
        for p in [3u64, 5, 7] {
            for t in 1..=2 {
                for s in 1..=2 {
                    for rep in cong2_sweep(p, s, t).unwrap() {
                        assert_eq!(rep.s, s_sum(&rep.params), "{:?}", rep.params);
                    }
                }
            }
        }
    }

    #[test]
    fn sweep_agrees_with_table_path() {
        for p in [3u64, 5, 7, 11, 13] {
            let (_, bad) = cong2_sweep_checked(p, 2, 2).unwrap();
            assert_eq!(bad, 0, "p={p}");
        }
    }

    #[test]
    fn binomial_table_matches_exact() {
        let table = BinomialTable::new(7, 3, 200);
        for n in 0..=200usize {
            for k in 0..=n {
                let exact = binomial(n as u64, k as u64).mod_floor(table.modulus());
                assert_eq!(table.binom(n, k), exact, "C({n},{k})");
            }
        }
        assert_eq!(table.binom(3, 5), BigInt::zero());
    }

    #[test]
    fn target_gap_divisible_by_p_t() {
        for p in [3u64, 5, 7, 11] {
            for t in 1..=3 {
                for b in 1..p {
                    for i in 0..b {
                        for m in 0..p - 1 {
                            let params = SumParams::new(p, b, 1, t, i, m).unwrap();
                            if let Some(v) = target_gap_valuation(&params) {
                                assert!(v >= t, "{params:?}");
                            }
                        }
                    }
                }
            }
        }
    }

    fn params() -> impl Strategy<Value = SumParams> {
        (prop::sample::select(vec![3u64, 5, 7, 11]), 1u64..4, 1u32..3)
            .prop_flat_map(|(p, s, t)| (Just(p), 1..p, Just(s), Just(t), 0..p - 1))
            .prop_flat_map(|(p, b, s, t, m)| (0..b).prop_map(move |i| SumParams { p, b, s, t, i, m }))
            .prop_filter("s prime to p", |q| q.s % q.p != 0)
    }

    proptest! {
        #[test]
        fn tilde_identity_holds(params in params()) {
            prop_assume!(params.p <= 7);
            prop_assert_eq!(s_tilde(&params) - s_sum(&params), tail_term(&params));
        }

        #[test]
        fn valuation_at_least_t(params in params()) {
            prop_assume!(!params.is_corner());
            let rep = check_cong2(&params).unwrap();
            prop_assert!(rep.pass_t, "{:?}", rep);
        }
    }
}
