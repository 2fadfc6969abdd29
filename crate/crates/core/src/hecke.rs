//! Finitely supported functions on the Bruhat-Tits tree of `GL_2(Q_p)` with
//! values in `Sym^r` over `O_E`, the Hecke operator `T = T+ + T-`, reduction
//! of arbitrary matrices to standard coset representatives, and the explicit
//! witness `f = f0 + f1` whose image under `T - a_p` kills a graded piece of
//! the theta-filtration after reduction.
//!
//! Standard representatives are
//!
//! ```text
//! g0(n, mu) = [[p^n, mu], [0, 1]]      g1(n, mu) = [[1, 0], [p mu, p^{n+1}]]
//! ```
//!
//! with `mu = [l_0] + [l_1] p + ... + [l_{n-1}] p^{n-1}` a sum of
//! Teichmuller lifts. A term `[g, v]` satisfies `[g k, v] = [g, k v]` for
//! `k` in `KZ`, with `K` acting by `(k v)(X, Y) = v(aX + cY, bX + dY)` and
//! the central element `p` acting trivially.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::binom::BinomialTable;
use crate::fp;
use crate::padic::{
    make_ap, teichmuller, Integrality, PadicElem, PadicError, PadicFrac, PrimeCtx,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HeckeError {
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("insufficient precision: {0}")]
    InsufficientPrecision(String),
    #[error("the fast formulas need side-0 support, found {0:?}")]
    SideOneInput(CosetRep),
    #[error("singular matrix")]
    Singular,
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, HeckeError>;

/// Extra p-digits carried by matrix computations beyond the digits needed
/// for coefficients; column reduction divides by entries of valuation up to
/// roughly the tree level.
const MATRIX_SLACK: u32 = 40;

/// A standard coset representative, `g0` or `g1`, with the Teichmuller
/// digits of `mu` listed from `l_0` up; the level is the number of digits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CosetRep {
    pub side: u8,
    pub digits: Vec<u64>,
}

impl CosetRep {
    pub fn identity() -> Self {
        CosetRep { side: 0, digits: Vec::new() }
    }

    pub fn alpha() -> Self {
        CosetRep { side: 1, digits: Vec::new() }
    }

    pub fn g0(digits: Vec<u64>) -> Self {
        CosetRep { side: 0, digits }
    }

    pub fn g1(digits: Vec<u64>) -> Self {
        CosetRep { side: 1, digits }
    }

    pub fn level(&self) -> usize {
        self.digits.len()
    }

    fn child(&self, lam: u64) -> Self {
        let mut digits = self.digits.clone();
        digits.push(lam);
        CosetRep { side: self.side, digits }
    }

    fn parent(&self) -> Self {
        let mut digits = self.digits.clone();
        digits.pop();
        CosetRep { side: self.side, digits }
    }
}

/// A 2x2 matrix over `Z_p` at finite precision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mat2 {
    pub a: PadicElem,
    pub b: PadicElem,
    pub c: PadicElem,
    pub d: PadicElem,
}

impl Mat2 {
    pub fn new(a: PadicElem, b: PadicElem, c: PadicElem, d: PadicElem) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn from_i64(ctx: &PrimeCtx, entries: [i64; 4]) -> Self {
        let [a, b, c, d] = entries.map(|x| PadicElem::from_i64(ctx, x));
        Mat2 { a, b, c, d }
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            a: &(&self.a * &o.a) + &(&self.b * &o.c),
            b: &(&self.a * &o.b) + &(&self.b * &o.d),
            c: &(&self.c * &o.a) + &(&self.d * &o.c),
            d: &(&self.c * &o.b) + &(&self.d * &o.d),
        }
    }

    pub fn adjugate(&self) -> Mat2 {
        Mat2 {
            a: self.d.clone(),
            b: -&self.b,
            c: -&self.c,
            d: self.a.clone(),
        }
    }

    pub fn det(&self) -> PadicElem {
        &(&self.a * &self.d) - &(&self.b * &self.c)
    }

    fn entries(&self) -> [&PadicElem; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    fn swap_rows(&self) -> Mat2 {
        Mat2::new(self.c.clone(), self.d.clone(), self.a.clone(), self.b.clone())
    }
}

/// `sum c_j X^{r-j} Y^j` over `O_E / pi^M`, stored sparsely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PadicPoly {
    r: usize,
    coeffs: BTreeMap<usize, PadicElem>,
}

fn is_exact_zero(x: &PadicElem) -> bool {
    x.is_zero_digits() && x.known_prec() == x.ctx().prec()
}

impl PadicPoly {
    pub fn zero(r: usize) -> Self {
        PadicPoly { r, coeffs: BTreeMap::new() }
    }

    pub fn from_coeffs(r: usize, coeffs: impl IntoIterator<Item = (usize, PadicElem)>) -> Self {
        let mut f = Self::zero(r);
        for (j, c) in coeffs {
            assert!(j <= r, "index {j} exceeds degree {r}");
            f.add_at(j, c);
        }
        f
    }

    pub fn degree(&self) -> usize {
        self.r
    }

    pub fn coeffs(&self) -> &BTreeMap<usize, PadicElem> {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> Option<&PadicElem> {
        self.coeffs.get(&j)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn add_at(&mut self, j: usize, c: PadicElem) {
        let merged = match self.coeffs.remove(&j) {
            Some(old) => &old + &c,
            None => c,
        };
        if !is_exact_zero(&merged) {
            self.coeffs.insert(j, merged);
        }
    }

    pub fn add(&self, other: &PadicPoly) -> PadicPoly {
        assert_eq!(self.r, other.r);
        let mut out = self.clone();
        for (&j, c) in &other.coeffs {
            out.add_at(j, c.clone());
        }
        out
    }

    pub fn neg(&self) -> PadicPoly {
        PadicPoly {
            r: self.r,
            coeffs: self.coeffs.iter().map(|(&j, c)| (j, -c)).collect(),
        }
    }

    pub fn sub(&self, other: &PadicPoly) -> PadicPoly {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: &PadicElem) -> PadicPoly {
        PadicPoly::from_coeffs(self.r, self.coeffs.iter().map(|(&j, c)| (j, c * s)))
    }

    pub fn mul_pi_pow(&self, k: u32) -> PadicPoly {
        PadicPoly::from_coeffs(self.r, self.coeffs.iter().map(|(&j, c)| (j, c.mul_pi_pow(k))))
    }

    /// `v(aX + cY, bX + dY)`, by homogeneous Horner evaluation
    /// `Q_k = Q_{k-1} (aX + cY) + c_k (bX + dY)^k`.
    pub fn substitute(&self, a: &PadicElem, b: &PadicElem, c: &PadicElem, d: &PadicElem) -> PadicPoly {
        let ctx = a.ctx().clone();
        let r = self.r;
        let zero = PadicElem::zero(&ctx);
        let mut acc: Vec<PadicElem> = vec![self.coeffs.get(&0).cloned().unwrap_or_else(|| zero.clone())];
        let mut l2: Vec<PadicElem> = vec![PadicElem::one(&ctx)];
        for k in 1..=r {
            let mut next_l2 = vec![zero.clone(); k + 1];
            for (j, x) in l2.iter().enumerate() {
                next_l2[j] = &next_l2[j] + &(x * b);
                next_l2[j + 1] = &next_l2[j + 1] + &(x * d);
            }
            l2 = next_l2;
            let mut next = vec![zero.clone(); k + 1];
            for (j, x) in acc.iter().enumerate() {
                next[j] = &next[j] + &(x * a);
                next[j + 1] = &next[j + 1] + &(x * c);
            }
            if let Some(ck) = self.coeffs.get(&k) {
                for (j, x) in l2.iter().enumerate() {
                    next[j] = &next[j] + &(x * ck);
                }
            }
            acc = next;
        }
        PadicPoly::from_coeffs(r, acc.into_iter().enumerate())
    }

    /// `F_m = X^m Y^{r-m} - X^{r-b+m} Y^{b-m}` with integer coefficients.
    pub fn fm(ctx: &PrimeCtx, r: usize, b: usize, m: usize) -> PadicPoly {
        PadicPoly::from_coeffs(
            r,
            [
                (r - m, PadicElem::one(ctx)),
                (b - m, PadicElem::from_i64(ctx, -1)),
            ],
        )
    }
}

/// A finite sum of terms `[g, pi^{-denom} v]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeFunc {
    ctx: PrimeCtx,
    r: usize,
    denom: u32,
    terms: BTreeMap<CosetRep, PadicPoly>,
}

pub type Residue = BTreeMap<CosetRep, BTreeMap<usize, u64>>;

impl TreeFunc {
    pub fn zero(ctx: &PrimeCtx, r: usize, denom: u32) -> Self {
        TreeFunc {
            ctx: ctx.clone(),
            r,
            denom,
            terms: BTreeMap::new(),
        }
    }

    pub fn single(ctx: &PrimeCtx, coset: CosetRep, v: PadicPoly, denom: u32) -> Self {
        let mut f = Self::zero(ctx, v.degree(), denom);
        f.add_term(coset, v);
        f
    }

    pub fn ctx(&self) -> &PrimeCtx {
        &self.ctx
    }

    pub fn degree(&self) -> usize {
        self.r
    }

    pub fn denom(&self) -> u32 {
        self.denom
    }

    pub fn terms(&self) -> &BTreeMap<CosetRep, PadicPoly> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, coset: CosetRep, v: PadicPoly) {
        assert_eq!(v.degree(), self.r, "mixed degrees");
        let merged = match self.terms.remove(&coset) {
            Some(old) => old.add(&v),
            None => v,
        };
        if !merged.is_zero() {
            self.terms.insert(coset, merged);
        }
    }

    /// The same function written over the denominator `pi^d`, `d >= denom`.
    pub fn with_denom(&self, d: u32) -> TreeFunc {
        assert!(d >= self.denom);
        let shift = d - self.denom;
        let mut out = TreeFunc::zero(&self.ctx, self.r, d);
        for (coset, v) in &self.terms {
            out.add_term(coset.clone(), v.mul_pi_pow(shift));
        }
        out
    }

    pub fn add(&self, other: &TreeFunc) -> TreeFunc {
        let d = self.denom.max(other.denom);
        let mut out = self.with_denom(d);
        for (coset, v) in other.with_denom(d).terms {
            out.add_term(coset, v);
        }
        out
    }

    pub fn neg(&self) -> TreeFunc {
        let mut out = TreeFunc::zero(&self.ctx, self.r, self.denom);
        for (coset, v) in &self.terms {
            out.add_term(coset.clone(), v.neg());
        }
        out
    }

    pub fn sub(&self, other: &TreeFunc) -> TreeFunc {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: &PadicElem) -> TreeFunc {
        let mut out = TreeFunc::zero(&self.ctx, self.r, self.denom);
        for (coset, v) in &self.terms {
            out.add_term(coset.clone(), v.scale(s));
        }
        out
    }

    fn fracs(&self) -> impl Iterator<Item = (&CosetRep, usize, PadicFrac)> + '_ {
        self.terms.iter().flat_map(move |(coset, v)| {
            v.coeffs
                .iter()
                .map(move |(&j, c)| (coset, j, PadicFrac::new(c.clone(), self.denom)))
        })
    }

    pub fn integrality(&self) -> Integrality {
        let mut verdict = Integrality::Yes;
        for (_, _, frac) in self.fracs() {
            match frac.is_integral() {
                Integrality::No => return Integrality::No,
                Integrality::InsufficientPrecision => verdict = Integrality::InsufficientPrecision,
                Integrality::Yes => {}
            }
        }
        verdict
    }

    /// Smallest valuation slack `v(c) - denom` over all coefficients, in
    /// pi-units; `None` for the zero function.
    pub fn min_margin(&self) -> Option<i64> {
        self.fracs().map(|(_, _, frac)| frac.margin()).min()
    }

    /// Reduction modulo `pi` of an integral function, with zero terms dropped.
    pub fn residue(&self) -> Result<Residue> {
        let mut out = Residue::new();
        for (coset, j, frac) in self.fracs() {
            let c = frac.residue()?;
            if c != 0 {
                out.entry(coset.clone()).or_default().insert(j, c);
            }
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct CoeffRepr {
    j: usize,
    digits: Vec<String>,
    known_prec: u32,
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    coset: CosetRep,
    coeffs: Vec<CoeffRepr>,
}

#[derive(Serialize, Deserialize)]
struct TreeFuncRepr {
    p: u64,
    e: u32,
    #[serde(rename = "M")]
    prec: u32,
    r: usize,
    denom: u32,
    terms: Vec<TermRepr>,
}

impl Serialize for TreeFunc {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let terms = self
            .terms
            .iter()
            .map(|(coset, v)| TermRepr {
                coset: coset.clone(),
                coeffs: v
                    .coeffs
                    .iter()
                    .map(|(&j, c)| CoeffRepr {
                        j,
                        digits: c.digits().iter().map(ToString::to_string).collect(),
                        known_prec: c.known_prec(),
                    })
                    .collect(),
            })
            .collect();
        TreeFuncRepr {
            p: self.ctx.p(),
            e: self.ctx.e(),
            prec: self.ctx.prec(),
            r: self.r,
            denom: self.denom,
            terms,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TreeFunc {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let repr = TreeFuncRepr::deserialize(d)?;
        let ctx = PrimeCtx::new(repr.p, repr.e, repr.prec).map_err(D::Error::custom)?;
        let mut f = TreeFunc::zero(&ctx, repr.r, repr.denom);
        for term in repr.terms {
            if term.coset.side > 1 || term.coset.digits.iter().any(|&l| l >= repr.p) {
                return Err(D::Error::custom(format!("invalid coset {:?}", term.coset)));
            }
            let mut coeffs = Vec::new();
            for c in term.coeffs {
                if c.j > repr.r {
                    return Err(D::Error::custom(format!("index {} exceeds degree {}", c.j, repr.r)));
                }
                let digits = c
                    .digits
                    .iter()
                    .map(|s| s.parse::<BigInt>().map_err(D::Error::custom))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                let x = PadicElem::from_digits(&ctx, digits, c.known_prec).map_err(D::Error::custom)?;
                coeffs.push((c.j, x));
            }
            f.add_term(term.coset, PadicPoly::from_coeffs(repr.r, coeffs));
        }
        Ok(f)
    }
}

/// Precomputed data for applying `T` in degree `r` at working precision `M`.
pub struct Hecke {
    ctx: PrimeCtx,
    mat: PrimeCtx,
    r: usize,
    table: BinomialTable,
    teich: Vec<BigInt>,
}

impl Hecke {
    pub fn new(ctx: &PrimeCtx, r: usize) -> Result<Self> {
        let p = ctx.p();
        let k = ctx.digit_prec();
        let mat = PrimeCtx::new(p, 1, k + MATRIX_SLACK)?;
        let teich = (0..p).map(|l| teichmuller(ctx, l).digits()[0].clone()).collect();
        Ok(Hecke {
            ctx: ctx.clone(),
            mat,
            r,
            table: BinomialTable::new(p, k, r),
            teich,
        })
    }

    pub fn ctx(&self) -> &PrimeCtx {
        &self.ctx
    }

    pub fn matrix_ctx(&self) -> &PrimeCtx {
        &self.mat
    }

    fn p(&self) -> u64 {
        self.ctx.p()
    }

    fn modulus(&self) -> &BigInt {
        self.table.modulus()
    }

    /// `[x^k]` as an integer modulo `p^K`.
    fn teich_pow(&self, x: u64, k: usize) -> &BigInt {
        &self.teich[fp::pow(x, k as u64, self.p()) as usize]
    }

    /// `p^k` modulo `p^K` (zero once `k >= K`).
    fn p_pow(&self, k: usize) -> BigInt {
        if k >= self.table.precision() as usize {
            BigInt::zero()
        } else {
            self.ctx.p_pow(k as u32).clone()
        }
    }

    fn check(&self, f: &TreeFunc) -> Result<()> {
        if f.r != self.r {
            return Err(HeckeError::DegreeMismatch(self.r, f.r));
        }
        assert!(f.ctx == self.ctx, "mixed p-adic contexts");
        Ok(())
    }

    fn scaled(&self, c: &PadicElem, s: &BigInt) -> Option<PadicElem> {
        (!s.is_zero()).then(|| c.mul_int(s))
    }

    fn t_plus_term(&self, coset: &CosetRep, v: &PadicPoly, out: &mut TreeFunc) {
        let p = self.p();
        let e = self.ctx.e() as usize;
        let jmax = self.r.min((self.ctx.prec() as usize - 1) / e);
        for lam in 0..p {
            let neg = fp::neg(lam, p);
            let mut w = PadicPoly::zero(self.r);
            for j in 0..=jmax {
                let pj = self.p_pow(j);
                for (&i, c) in v.coeffs.range(j..) {
                    if neg == 0 && i != j {
                        break;
                    }
                    let s = (&pj * self.table.binom(i, j) * self.teich_pow(neg, i - j)).mod_floor(self.modulus());
                    if let Some(x) = self.scaled(c, &s) {
                        w.add_at(j, x);
                    }
                }
            }
            out.add_term(coset.child(lam), w);
        }
    }

    fn t_minus_term(&self, coset: &CosetRep, v: &PadicPoly, out: &mut TreeFunc) {
        let e = self.ctx.e() as usize;
        let prec = self.ctx.prec() as usize;
        let r = self.r;
        let live = |i: usize| e * (r - i) < prec;
        let mut w = PadicPoly::zero(r);
        match coset.digits.last() {
            None => {
                for (&i, c) in v.coeffs.iter().filter(|(&i, _)| live(i)) {
                    if let Some(x) = self.scaled(c, &self.p_pow(r - i)) {
                        w.add_at(i, x);
                    }
                }
                out.add_term(CosetRep::alpha(), w);
            }
            Some(&lam) => {
                for (&i, c) in v.coeffs.iter().filter(|(&i, _)| live(i)) {
                    let pw = self.p_pow(r - i);
                    let lo = if lam == 0 { i } else { 0 };
                    for j in lo..=i {
                        let s = (&pw * self.table.binom(i, j) * self.teich_pow(lam, i - j)).mod_floor(self.modulus());
                        if let Some(x) = self.scaled(c, &s) {
                            w.add_at(j, x);
                        }
                    }
                }
                out.add_term(coset.parent(), w);
            }
        }
    }

    /// The up-tree part on side-0 support.
    pub fn t_plus(&self, f: &TreeFunc) -> Result<TreeFunc> {
        self.check(f)?;
        let mut out = TreeFunc::zero(&self.ctx, self.r, f.denom);
        for (coset, v) in &f.terms {
            if coset.side != 0 {
                return Err(HeckeError::SideOneInput(coset.clone()));
            }
            self.t_plus_term(coset, v, &mut out);
        }
        Ok(out)
    }

    /// The down-tree part on side-0 support.
    pub fn t_minus(&self, f: &TreeFunc) -> Result<TreeFunc> {
        self.check(f)?;
        let mut out = TreeFunc::zero(&self.ctx, self.r, f.denom);
        for (coset, v) in &f.terms {
            if coset.side != 0 {
                return Err(HeckeError::SideOneInput(coset.clone()));
            }
            self.t_minus_term(coset, v, &mut out);
        }
        Ok(out)
    }

    /// `T` on arbitrary support: explicit formulas on side 0, the defining
    /// sum over the `p + 1` neighbours on side 1.
    pub fn t_full(&self, f: &TreeFunc) -> Result<TreeFunc> {
        self.check(f)?;
        let mut out = TreeFunc::zero(&self.ctx, self.r, f.denom);
        for (coset, v) in &f.terms {
            if coset.side == 0 {
                self.t_plus_term(coset, v, &mut out);
                self.t_minus_term(coset, v, &mut out);
            } else {
                self.raw_term(coset, v, &mut out)?;
            }
        }
        Ok(out)
    }

    /// `T` from its definition
    /// `T[g, v] = sum_h [g h, (p h^{-1}) v]` over
    /// `h in {[[p, [l]], [0, 1]] : l in F_p} u {[[1, 0], [0, p]]}`,
    /// with every product reduced to a standard representative.
    pub fn raw_t(&self, f: &TreeFunc) -> Result<TreeFunc> {
        self.check(f)?;
        let mut out = TreeFunc::zero(&self.ctx, self.r, f.denom);
        for (coset, v) in &f.terms {
            self.raw_term(coset, v, &mut out)?;
        }
        Ok(out)
    }

    fn raw_term(&self, coset: &CosetRep, v: &PadicPoly, out: &mut TreeFunc) -> Result<()> {
        let ctx = &self.ctx;
        let mat = &self.mat;
        let g = self.coset_matrix(coset);
        let zero = PadicElem::zero(ctx);
        let one = PadicElem::one(ctx);
        let p_elem = PadicElem::from_int(ctx, &BigInt::from(self.p()));
        for lam in 0..self.p() {
            let t = teichmuller(mat, lam);
            let h = Mat2::new(
                PadicElem::from_int(mat, &BigInt::from(self.p())),
                t,
                PadicElem::zero(mat),
                PadicElem::one(mat),
            );
            let shifted = v.substitute(&one, &-&teichmuller(ctx, lam), &zero, &p_elem);
            let (rep, w) = self.canonicalize(&g.mul(&h), &shifted)?;
            out.add_term(rep, w);
        }
        let alpha = Mat2::from_i64(mat, [1, 0, 0, self.p() as i64]);
        let shifted = v.substitute(&p_elem, &zero, &zero, &one);
        let (rep, w) = self.canonicalize(&g.mul(&alpha), &shifted)?;
        out.add_term(rep, w);
        Ok(())
    }

    /// The matrix of a standard representative over `Z_p`.
    pub fn coset_matrix(&self, coset: &CosetRep) -> Mat2 {
        let mat = &self.mat;
        let p = BigInt::from(self.p());
        let mut mu = BigInt::zero();
        let mut scale = BigInt::one();
        for &lam in &coset.digits {
            mu += &scale * teichmuller(mat, lam).digits()[0].clone();
            scale *= &p;
        }
        let n = coset.level() as u32;
        let elem = |x: &BigInt| PadicElem::from_int(mat, x);
        if coset.side == 0 {
            Mat2::new(elem(&p.pow(n)), elem(&mu), elem(&BigInt::zero()), elem(&BigInt::one()))
        } else {
            Mat2::new(elem(&BigInt::one()), elem(&BigInt::zero()), elem(&(&p * &mu)), elem(&p.pow(n + 1)))
        }
    }

    /// The standard representative `g_s` of the coset `g KZ`, together with
    /// `k = g_s^{-1} g` normalised into `GL_2(Z_p)` by a power of the
    /// central `p`.
    pub fn reduce_matrix(&self, g: &Mat2) -> Result<(CosetRep, Mat2)> {
        let rep = self.standard_coset(g)?;
        let gs = self.coset_matrix(&rep);
        let prod = gs.adjugate().mul(g);
        let w = prod
            .entries()
            .iter()
            .filter_map(|x| x.valuation_pi())
            .min()
            .ok_or(HeckeError::Singular)?;
        let [a, b, c, d] = prod.entries().map(|x| x.div_pi_pow(w));
        let k = Mat2::new(a?, b?, c?, d?);
        if !k.det().is_unit() {
            return Err(HeckeError::InsufficientPrecision(format!(
                "reduced matrix for {rep:?} is not visibly in GL_2(Z_p)"
            )));
        }
        Ok((rep, k))
    }

    /// `[g, v] = [g_s, k v]`.
    pub fn canonicalize(&self, g: &Mat2, v: &PadicPoly) -> Result<(CosetRep, PadicPoly)> {
        let (rep, k) = self.reduce_matrix(g)?;
        let need = self.ctx.digit_prec();
        if k.entries().iter().any(|x| x.known_prec() < need) {
            return Err(HeckeError::InsufficientPrecision(format!(
                "coset reduction for {rep:?} left fewer than {need} p-digits"
            )));
        }
        let [a, b, c, d] = k.entries().map(|x| PadicElem::embed(&self.ctx, x));
        Ok((rep, v.substitute(&a, &b, &c, &d)))
    }

    fn standard_coset(&self, g: &Mat2) -> Result<CosetRep> {
        if let Some(rep) = self.side_zero_coset(g)? {
            return Ok(rep);
        }
        match self.side_zero_coset(&g.swap_rows())? {
            Some(rep) if rep.level() >= 1 && rep.digits[0] == 0 => Ok(CosetRep::g1(rep.digits[1..].to_vec())),
            other => Err(HeckeError::Malformed(format!(
                "swapped matrix reduced to {other:?}, expected a side-0 coset with leading digit 0"
            ))),
        }
    }

    /// Column reduction `g k = [[p^x, b], [0, p^z]]`; returns `g0(x - z, b / p^z)`
    /// when that is a standard representative of `g KZ`.
    fn side_zero_coset(&self, g: &Mat2) -> Result<Option<CosetRep>> {
        let short = |what: &str| HeckeError::InsufficientPrecision(format!("coset reduction: {what}"));
        let (mut a, mut b, mut c, mut d) = (g.a.clone(), g.b.clone(), g.c.clone(), g.d.clone());
        let (vc, vd) = (c.valuation_pi(), d.valuation_pi());
        match (vc, vd) {
            (None, None) => return Err(HeckeError::Singular),
            (Some(x), Some(y)) if x < y => {
                std::mem::swap(&mut a, &mut b);
                std::mem::swap(&mut c, &mut d);
            }
            (Some(_), None) => {
                std::mem::swap(&mut a, &mut b);
                std::mem::swap(&mut c, &mut d);
            }
            _ => {}
        }
        let z = d.valuation_pi().ok_or_else(|| short("bottom row vanished"))?;
        let d_unit_inv = d.div_pi_pow(z)?.inverse()?;
        let q = &c.div_pi_pow(z)? * &d_unit_inv;
        let a1 = &a - &(&q * &b);
        let x = a1.valuation_pi().ok_or_else(|| short("determinant not visible"))?;
        let b1 = &b * &d_unit_inv;
        if x < z {
            return Ok(None);
        }
        let vb = match b1.valuation_pi() {
            Some(v) => v,
            None if b1.known_prec() >= z => z,
            None => return Err(short("off-diagonal entry undetermined")),
        };
        if vb < z {
            return Ok(None);
        }
        let n = x - z;
        let mut mu = b1.div_pi_pow(z)?;
        if mu.known_prec() < n {
            return Err(short("too few digits for the coset label"));
        }
        let mut digits = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let lam = mu.residue()?;
            digits.push(lam);
            mu = (&mu - &teichmuller(&self.mat, lam)).div_pi_pow(1)?;
        }
        Ok(Some(CosetRep::g0(digits)))
    }
}

/// How the working precision `M` is chosen for a witness computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecisionPolicy {
    /// `M = e (2 ceil(v(a_p)) + t + 4)`.
    Auto,
    Fixed(u32),
}

/// Input parameters of the witness: `p`, `a_p = u pi^h` in `Z_p[pi]`,
/// `pi^e = p`, and `r = b + s p^t (p-1)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessSpec {
    pub p: u64,
    pub e: u32,
    pub h: u32,
    pub unit: Vec<i64>,
    pub b: u64,
    pub m: u64,
    pub t: u32,
    pub s: u64,
}

impl WitnessSpec {
    pub fn r(&self) -> u64 {
        self.b + self.s * self.p.pow(self.t) * (self.p - 1)
    }

    pub fn v_ap(&self) -> Ratio<i64> {
        Ratio::new(i64::from(self.h), i64::from(self.e))
    }

    /// `b = 2 v(a_p)`.
    pub fn is_boundary(&self) -> bool {
        2 * u64::from(self.h) == u64::from(self.e) * self.b
    }

    pub fn check_hypotheses(&self) -> Result<()> {
        let bad = |msg: String| Err(HeckeError::Hypothesis(msg));
        let (p, e, h, b, m, t, s) = (self.p, u64::from(self.e), u64::from(self.h), self.b, self.m, u64::from(self.t), self.s);
        if h == 0 {
            return bad("v(a_p) must be positive".into());
        }
        if b == 0 || b > p - 1 {
            return bad(format!("need 1 <= b <= p-1, got b={b}"));
        }
        if 2 * h > e * b {
            return bad(format!("need 2 v(a_p) <= b, got v(a_p)={h}/{e}, b={b}"));
        }
        if self.is_boundary() && b % 2 == 0 {
            return bad(format!("b = 2 v(a_p) requires b odd, got b={b}"));
        }
        if m == 0 || m > h / e {
            return bad(format!("need 1 <= m <= floor(v(a_p)), got m={m}"));
        }
        if e * t + e <= 2 * h {
            return bad(format!("need t > 2 v(a_p) - 1, got t={t}"));
        }
        if s == 0 || s % p == 0 {
            return bad(format!("need s prime to p, got s={s}"));
        }
        Ok(())
    }

    pub fn precision(&self, policy: PrecisionPolicy) -> Result<u32> {
        let need = 2 * self.h + 1;
        match policy {
            PrecisionPolicy::Auto => Ok(self.e * (2 * self.h.div_ceil(self.e) + self.t + 4)),
            PrecisionPolicy::Fixed(m) if m >= need => Ok(m),
            PrecisionPolicy::Fixed(m) => Err(HeckeError::InsufficientPrecision(format!(
                "M = {m} cannot resolve residues over pi^{}; need M >= {need}",
                2 * self.h
            ))),
        }
    }
}

fn ratio_string(x: Ratio<i64>) -> String {
    if x.is_integer() {
        x.to_integer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResidueTerm {
    pub coset: CosetRep,
    pub coeffs: BTreeMap<usize, u64>,
}

fn residue_terms(res: &Residue) -> Vec<ResidueTerm> {
    res.iter()
        .map(|(coset, coeffs)| ResidueTerm {
            coset: coset.clone(),
            coeffs: coeffs.clone(),
        })
        .collect()
}

/// One independently checkable part of the witness computation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubClaim {
    pub integral: Integrality,
    /// Minimal `v(c) - denom` in pi-units over all coefficients.
    pub margin: Option<i64>,
    pub residue_terms: Vec<ResidueTerm>,
    pub expected_terms: Vec<ResidueTerm>,
    pub holds: bool,
}

impl SubClaim {
    fn evaluate(f: &TreeFunc, expected: &Residue) -> Self {
        let integral = f.integrality();
        let residue = if integral == Integrality::Yes { f.residue().ok() } else { None };
        SubClaim {
            integral,
            margin: f.min_margin(),
            holds: residue.as_ref() == Some(expected),
            residue_terms: residue.as_ref().map(residue_terms).unwrap_or_default(),
            expected_terms: residue_terms(expected),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntegralityReport {
    #[serde(rename = "Tplus_f0")]
    pub tplus_f0: SubClaim,
    #[serde(rename = "Tplus_f1")]
    pub tplus_f1: SubClaim,
    #[serde(rename = "Tminus_f1_minus_ap_f0")]
    pub tminus_f1_minus_ap_f0: SubClaim,
    #[serde(rename = "Tminus_f0")]
    pub tminus_f0: SubClaim,
    pub total: SubClaim,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundaryFlags {
    /// `b = 2 v(a_p)`.
    pub boundary: bool,
    /// Residue of `u = a_p / p^{b/2}` (only meaningful on the boundary).
    pub u_residue: u64,
    /// `u = +-1 mod pi`: the adjusted coefficient is not a unit.
    pub exceptional: bool,
    /// Residue of `C(r,m) - u^{-2} C(r,b-m)`, the coefficient of `-F_m`
    /// after the boundary correction.
    pub kappa: u64,
    /// The correction term `[g0(1,0), u^{-2} C(r,b-m) X^m Y^{r-m}]` comes
    /// from a known auxiliary function that is not constructed here.
    pub correction_from_citation: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WitnessSummary {
    #[serde(flatten)]
    pub spec: WitnessSpec,
    pub r: u64,
    pub v_ap: String,
    pub precision: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WitnessReport {
    pub params: WitnessSummary,
    pub integrality: IntegralityReport,
    pub residue_terms: Vec<ResidueTerm>,
    pub predicted_terms: Vec<ResidueTerm>,
    #[serde(rename = "match")]
    pub matches: bool,
    pub binom_rm_unit: bool,
    pub boundary_flags: BoundaryFlags,
    /// Every computed claim holds.
    pub passed: bool,
    /// `passed`, and on the boundary the adjusted coefficient is a unit, so
    /// `[g0(1,0), F_m]` maps to zero.
    pub conclusive: bool,
}

/// A validated witness instance with its working context.
pub struct Witness {
    pub spec: WitnessSpec,
    pub ctx: PrimeCtx,
    pub r: usize,
    pub ap: PadicElem,
    unit: PadicElem,
    hecke: Hecke,
}

impl Witness {
    pub fn new(spec: WitnessSpec, policy: PrecisionPolicy) -> Result<Self> {
        spec.check_hypotheses()?;
        let prec = spec.precision(policy)?;
        let ctx = PrimeCtx::new(spec.p, spec.e, prec)?;
        let ap = make_ap(&ctx, i64::from(spec.h), &spec.unit)?;
        let unit = ap.div_pi_pow(spec.h)?;
        let r = spec.r() as usize;
        let hecke = Hecke::new(&ctx, r)?;
        Ok(Witness { spec, ctx, r, ap, unit, hecke })
    }

    pub fn hecke(&self) -> &Hecke {
        &self.hecke
    }

    fn binom(&self, n: usize, k: usize) -> PadicElem {
        PadicElem::from_int(&self.ctx, &self.hecke.table.binom(n, k))
    }

    /// `[1, (p-1) p^m / a_p^2 * sum_{j = b-m mod (p-1), j < r-m} C(r,j) X^{r-j} Y^j]`.
    pub fn build_f0(&self) -> Result<TreeFunc> {
        let (p, b, m) = (self.spec.p, self.spec.b as usize, self.spec.m as usize);
        let r = self.r;
        let u_inv = self.unit.inverse()?;
        let lead = PadicElem::from_i64(&self.ctx, p as i64 - 1)
            .mul_p_pow(m as u32)
            * (&u_inv * &u_inv);
        let step = p as usize - 1;
        let first = (b + step - m) % step;
        let coeffs = (first..r - m)
            .step_by(step)
            .map(|j| (j, &lead * &self.binom(r, j)));
        let v = PadicPoly::from_coeffs(r, coeffs);
        Ok(TreeFunc::single(&self.ctx, CosetRep::identity(), v, 2 * self.spec.h))
    }

    /// `[g0(1,0), (1-p) C(r,m) F_m / a_p] + sum_{l != 0} [g0(1,[l]), (p/[l])^m F_0 / a_p]`.
    pub fn build_f1(&self) -> Result<TreeFunc> {
        let (p, b, m) = (self.spec.p, self.spec.b as usize, self.spec.m as usize);
        let r = self.r;
        let u_inv = self.unit.inverse()?;
        let mut f = TreeFunc::zero(&self.ctx, r, self.spec.h);
        let c0 = PadicElem::from_i64(&self.ctx, 1 - p as i64) * self.binom(r, m) * u_inv.clone();
        f.add_term(CosetRep::g0(vec![0]), PadicPoly::fm(&self.ctx, r, b, m).scale(&c0));
        let f_zero = PadicPoly::fm(&self.ctx, r, b, 0);
        for lam in 1..p {
            let lam_inv_m = fp::pow(fp::inv(lam, p), m as u64, p);
            let c = teichmuller(&self.ctx, lam_inv_m).mul_p_pow(m as u32) * u_inv.clone();
            f.add_term(CosetRep::g0(vec![lam]), f_zero.scale(&c));
        }
        Ok(f)
    }

    fn u_bar(&self) -> u64 {
        self.unit.residue().expect("unit known to full precision")
    }

    /// `C(r, b-m) mod p`.
    fn binom_r_bm(&self) -> u64 {
        let (b, m) = (self.spec.b as usize, self.spec.m as usize);
        (self.hecke.table.binom(self.r, b - m) % self.spec.p).try_into().expect("small")
    }

    fn binom_r_m(&self) -> u64 {
        (self.hecke.table.binom(self.r, self.spec.m as usize) % self.spec.p)
            .try_into()
            .expect("small")
    }

    /// `[g0(1,0), -u^{-2} C(r,b-m) X^{r-(b-m)} Y^{b-m}]`, the boundary part
    /// of the residue of `T+ f0`.
    fn boundary_residue(&self) -> Residue {
        let p = self.spec.p;
        let u_inv = fp::inv(self.u_bar(), p);
        let c = fp::neg(fp::mul(fp::mul(u_inv, u_inv, p), self.binom_r_bm(), p), p);
        let mut out = Residue::new();
        if c != 0 {
            out.insert(
                CosetRep::g0(vec![0]),
                BTreeMap::from([((self.spec.b - self.spec.m) as usize, c)]),
            );
        }
        out
    }

    /// `[g0(1,0), -C(r,m) F_m]`, plus the boundary term when `b = 2 v(a_p)`.
    pub fn predicted_residue(&self) -> Residue {
        let p = self.spec.p;
        let (r, b, m) = (self.r, self.spec.b as usize, self.spec.m as usize);
        let c = self.binom_r_m();
        let mut coeffs = BTreeMap::new();
        coeffs.insert(r - m, fp::neg(c, p));
        coeffs.insert(b - m, c);
        if self.spec.is_boundary() {
            for (_, extra) in self.boundary_residue() {
                for (j, x) in extra {
                    let slot = coeffs.entry(j).or_insert(0);
                    *slot = fp::add(*slot, x, p);
                }
            }
        }
        coeffs.retain(|_, c| *c != 0);
        let mut out = Residue::new();
        if !coeffs.is_empty() {
            out.insert(CosetRep::g0(vec![0]), coeffs);
        }
        out
    }

    pub fn verify(&self) -> Result<WitnessReport> {
        let spec = &self.spec;
        let p = spec.p;
        let hecke = &self.hecke;
        let f0 = self.build_f0()?;
        let f1 = self.build_f1()?;
        let d = 2 * spec.h;
        let tplus_f0 = hecke.t_plus(&f0)?;
        let tminus_f0 = hecke.t_minus(&f0)?;
        let tplus_f1 = hecke.t_plus(&f1)?.with_denom(d);
        let tminus_f1 = hecke.t_minus(&f1)?.with_denom(d);
        let ap_f0 = f0.scale(&self.ap);
        let ap_f1 = f1.scale(&self.ap).with_denom(d);
        let down = tminus_f1.sub(&ap_f0);
        let total = tplus_f0
            .add(&tminus_f0)
            .add(&tplus_f1)
            .add(&down)
            .sub(&ap_f1);

        let none = Residue::new();
        let tplus_f0_expected = if spec.is_boundary() { self.boundary_residue() } else { none.clone() };
        let predicted = self.predicted_residue();
        let integrality = IntegralityReport {
            tplus_f0: SubClaim::evaluate(&tplus_f0, &tplus_f0_expected),
            tplus_f1: SubClaim::evaluate(&tplus_f1, &none),
            tminus_f1_minus_ap_f0: SubClaim::evaluate(&down, &none),
            tminus_f0: SubClaim::evaluate(&tminus_f0, &none),
            total: SubClaim::evaluate(&total, &predicted),
        };
        if let Some(claim) = [
            &integrality.tplus_f0,
            &integrality.tplus_f1,
            &integrality.tminus_f1_minus_ap_f0,
            &integrality.tminus_f0,
            &integrality.total,
        ]
        .into_iter()
        .find(|c| c.integral == Integrality::InsufficientPrecision)
        {
            return Err(HeckeError::InsufficientPrecision(format!(
                "integrality undecided at M = {} (margin {:?})",
                self.ctx.prec(),
                claim.margin
            )));
        }

        let u_bar = self.u_bar();
        let u2 = fp::mul(u_bar, u_bar, p);
        let kappa = fp::sub(self.binom_r_m(), fp::mul(fp::inv(u2, p), self.binom_r_bm(), p), p);
        let boundary = spec.is_boundary();
        let boundary_flags = BoundaryFlags {
            boundary,
            u_residue: u_bar,
            exceptional: boundary && u2 == 1,
            kappa,
            correction_from_citation: boundary,
        };
        let binom_rm_unit = self.binom_r_m() != 0;
        let matches = integrality.total.holds;
        let passed = binom_rm_unit
            && integrality.tplus_f0.holds
            && integrality.tplus_f1.holds
            && integrality.tminus_f1_minus_ap_f0.holds
            && integrality.tminus_f0.holds
            && matches;
        let conclusive = passed && (!boundary || kappa != 0);
        Ok(WitnessReport {
            params: WitnessSummary {
                spec: spec.clone(),
                r: spec.r(),
                v_ap: ratio_string(spec.v_ap()),
                precision: self.ctx.prec(),
            },
            residue_terms: integrality.total.residue_terms.clone(),
            predicted_terms: residue_terms(&predicted),
            integrality,
            matches,
            binom_rm_unit,
            boundary_flags,
            passed,
            conclusive,
        })
    }
}

/// Builds and checks the witness in one step.
pub fn verify_witness(spec: &WitnessSpec, policy: PrecisionPolicy) -> Result<WitnessReport> {
    Witness::new(spec.clone(), policy)?.verify()
}

/// Compares `T+ + T-` with the defining formula on `[coset, v]` (side 0).
pub fn check_t_side1_consistency(hecke: &Hecke, coset: &CosetRep, v: &PadicPoly) -> Result<bool> {
    let f = TreeFunc::single(hecke.ctx(), coset.clone(), v.clone(), 0);
    let fast = hecke.t_plus(&f)?.add(&hecke.t_minus(&f)?);
    Ok(fast == hecke.raw_t(&f)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx(p: u64, e: u32, m: u32) -> PrimeCtx {
        PrimeCtx::new(p, e, m).unwrap()
    }

    fn monomial(ctx: &PrimeCtx, r: usize, j: usize) -> PadicPoly {
        PadicPoly::from_coeffs(r, [(j, PadicElem::one(ctx))])
    }

    fn random_elem(ctx: &PrimeCtx, rng: &mut impl Rng) -> PadicElem {
        let modulus = ctx.p_pow(ctx.digit_prec()).clone();
        let digits = (0..ctx.e())
            .map(|_| BigInt::from(rng.gen::<u64>()).mod_floor(&modulus))
            .collect();
        PadicElem::from_digits(ctx, digits, ctx.prec()).unwrap()
    }

    fn random_poly(ctx: &PrimeCtx, r: usize, rng: &mut impl Rng) -> PadicPoly {
        let mut coeffs = Vec::new();
        for j in 0..=r {
            if rng.gen_bool(0.6) {
                coeffs.push((j, random_elem(ctx, rng)));
            }
        }
        PadicPoly::from_coeffs(r, coeffs)
    }

    fn random_coset(p: u64, side: u8, max_level: usize, rng: &mut impl Rng) -> CosetRep {
        let level = rng.gen_range(0..=max_level);
        CosetRep { side, digits: (0..level).map(|_| rng.gen_range(0..p)).collect() }
    }

    #[test]
    fn t_plus_on_monomials() {
        let c = ctx(5, 1, 12);
        let r = 6;
        let h = Hecke::new(&c, r).unwrap();
        let f = TreeFunc::single(&c, CosetRep::identity(), monomial(&c, r, 0), 0);
        let out = h.t_plus(&f).unwrap();
        assert_eq!(out.terms().len(), 5);
        for (coset, v) in out.terms() {
            assert_eq!(coset.level(), 1);
            assert_eq!(v, &monomial(&c, r, 0));
        }
        let f = TreeFunc::single(&c, CosetRep::identity(), monomial(&c, r, r), 0);
        let out = h.t_plus(&f).unwrap();
        let at_zero = &out.terms()[&CosetRep::g0(vec![0])];
        assert_eq!(at_zero, &monomial(&c, r, r).scale(&PadicElem::from_i64(&c, 5i64.pow(6))));
    }

    #[test]
    fn t_minus_on_monomials() {
        let c = ctx(5, 1, 12);
        let r = 6;
        let h = Hecke::new(&c, r).unwrap();
        let f = TreeFunc::single(&c, CosetRep::identity(), monomial(&c, r, r), 0);
        let out = h.t_minus(&f).unwrap();
        assert_eq!(out, TreeFunc::single(&c, CosetRep::alpha(), monomial(&c, r, r), 0));
        let f = TreeFunc::single(&c, CosetRep::g0(vec![0]), monomial(&c, r, 0), 0);
        let out = h.t_minus(&f).unwrap();
        let expected = monomial(&c, r, 0).scale(&PadicElem::from_i64(&c, 5i64.pow(6)));
        assert_eq!(out, TreeFunc::single(&c, CosetRep::identity(), expected, 0));
    }

    #[test]
    fn t_minus_after_t_plus_is_scalar() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (p, e) in [(3, 1), (5, 2), (7, 1)] {
            let c = ctx(p, e, 16);
            let r = 9;
            let h = Hecke::new(&c, r).unwrap();
            let v = random_poly(&c, r, &mut rng);
            let f = TreeFunc::single(&c, CosetRep::identity(), v.clone(), 0);
            let back = h.t_minus(&h.t_plus(&f).unwrap()).unwrap();
            let scalar = PadicElem::one(&c).mul_p_pow(r as u32 + 1);
            assert_eq!(back, TreeFunc::single(&c, CosetRep::identity(), v.scale(&scalar), 0));
        }
    }

    fn is_identity(k: &Mat2) -> bool {
        let id = Mat2::from_i64(k.a.ctx(), [1, 0, 0, 1]);
        let ok = k.entries().iter().zip(id.entries()).all(|(x, y)| x.agrees_with(y) && x.known_prec() >= 10);
        ok
    }

    #[test]
    fn standard_matrices_reduce_to_themselves() {
        let c = ctx(5, 1, 10);
        let h = Hecke::new(&c, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for side in [0u8, 1] {
            for _ in 0..40 {
                let rep = random_coset(5, side, 4, &mut rng);
                let (found, k) = h.reduce_matrix(&h.coset_matrix(&rep)).unwrap();
                assert_eq!(found, rep);
                assert!(is_identity(&k), "{k:?}");
            }
        }
    }

    #[test]
    fn central_scalar_is_absorbed() {
        let c = ctx(5, 1, 10);
        let h = Hecke::new(&c, 4).unwrap();
        let g = Mat2::from_i64(h.matrix_ctx(), [5, 0, 0, 25]);
        let (rep, k) = h.reduce_matrix(&g).unwrap();
        assert_eq!(rep, CosetRep::alpha());
        assert!(is_identity(&k), "{k:?}");
    }

    #[test]
    fn canonicalize_recovers_k_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (p, e) in [(3u64, 1u32), (5, 2), (7, 1)] {
            let c = ctx(p, e, 12);
            let r = 7;
            let h = Hecke::new(&c, r).unwrap();
            let mat = h.matrix_ctx().clone();
            for side in [0u8, 1] {
                for _ in 0..25 {
                    let rep = random_coset(p, side, 3, &mut rng);
                    let k = loop {
                        let [a, b, cc, d] = [0; 4].map(|_| random_elem(&mat, &mut rng));
                        let k = Mat2::new(a, b, cc, d);
                        if k.det().is_unit() {
                            break k;
                        }
                    };
                    let v = random_poly(&c, r, &mut rng);
                    let g = h.coset_matrix(&rep).mul(&k);
                    let (found, w) = h.canonicalize(&g, &v).unwrap();
                    assert_eq!(found, rep);
                    let [a, b, cc, d] = k.entries().map(|x| PadicElem::embed(&c, x));
                    assert_eq!(w, v.substitute(&a, &b, &cc, &d));
                }
            }
        }
    }

    #[test]
    fn lower_unipotent_on_level_one() {
        let c = ctx(5, 1, 10);
        let r = 5;
        let h = Hecke::new(&c, r).unwrap();
        let mat = h.matrix_ctx();
        let unip = Mat2::from_i64(mat, [1, 0, 3, 1]);
        let g = h.coset_matrix(&CosetRep::g0(vec![0])).mul(&unip);
        let v = monomial(&c, r, 0);
        let (rep, w) = h.canonicalize(&g, &v).unwrap();
        assert_eq!(rep, CosetRep::g0(vec![0]));
        // X^5 -> (X + 3Y)^5
        let expected = PadicPoly::from_coeffs(
            r,
            (0..=r).map(|j| (j, PadicElem::from_int(&c, &(crate::binom::binomial(5, j as u64) * BigInt::from(3).pow(j as u32))))),
        );
        assert_eq!(w, expected);
    }

    #[test]
    fn raw_formula_matches_fast_formulas() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (p, e, r) in [(3u64, 1u32, 12usize), (5, 1, 12), (5, 2, 9), (7, 1, 8)] {
            let c = ctx(p, e, 10);
            let h = Hecke::new(&c, r).unwrap();
            for _ in 0..15 {
                let coset = random_coset(p, 0, 3, &mut rng);
                let v = random_poly(&c, r, &mut rng);
                assert!(check_t_side1_consistency(&h, &coset, &v).unwrap(), "{coset:?}");
            }
        }
    }

    #[test]
    fn t_full_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = ctx(5, 2, 10);
        let r = 6;
        let h = Hecke::new(&c, r).unwrap();
        let mut f = TreeFunc::zero(&c, r, 0);
        let mut g = TreeFunc::zero(&c, r, 0);
        for side in [0u8, 1] {
            f.add_term(random_coset(5, side, 2, &mut rng), random_poly(&c, r, &mut rng));
            g.add_term(random_coset(5, side, 2, &mut rng), random_poly(&c, r, &mut rng));
        }
        let s = random_elem(&c, &mut rng);
        let lhs = h.t_full(&f.scale(&s).add(&g)).unwrap();
        let rhs = h.t_full(&f).unwrap().scale(&s).add(&h.t_full(&g).unwrap());
        assert_eq!(lhs, rhs);
        assert!(matches!(h.t_plus(&f), Err(HeckeError::SideOneInput(_))));
    }

    #[test]
    fn tree_func_serde_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = ctx(7, 2, 9);
        let mut f = TreeFunc::zero(&c, 5, 3);
        f.add_term(CosetRep::g0(vec![1, 4]), random_poly(&c, 5, &mut rng));
        f.add_term(CosetRep::alpha(), random_poly(&c, 5, &mut rng));
        let json = serde_json::to_string(&f).unwrap();
        let back: TreeFunc = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
    }

    fn spec(p: u64, e: u32, h: u32, unit: &[i64], b: u64, m: u64, t: u32, s: u64) -> WitnessSpec {
        WitnessSpec { p, e, h, unit: unit.to_vec(), b, m, t, s }
    }

    #[test]
    fn witness_slope_one() {
        let ws = spec(7, 1, 1, &[1], 3, 1, 2, 1);
        assert_eq!(ws.r(), 297);
        let report = verify_witness(&ws, PrecisionPolicy::Auto).unwrap();
        assert!(report.passed, "{report:#?}");
        // -C(297,1) F_1 with C(297,1) = 3 mod 7
        let expected = BTreeMap::from([(296usize, 4u64), (2, 3)]);
        assert_eq!(report.residue_terms, vec![ResidueTerm { coset: CosetRep::g0(vec![0]), coeffs: expected }]);
    }

    #[test]
    fn witness_boundary_branches() {
        let plain = verify_witness(&spec(5, 2, 3, &[2], 3, 1, 3, 1), PrecisionPolicy::Auto).unwrap();
        assert!(plain.passed && plain.boundary_flags.boundary);
        assert!(!plain.boundary_flags.exceptional && plain.conclusive);
        let exceptional = verify_witness(&spec(5, 2, 3, &[1], 3, 1, 3, 1), PrecisionPolicy::Auto).unwrap();
        assert!(exceptional.passed && exceptional.boundary_flags.exceptional);
        assert_eq!(exceptional.boundary_flags.kappa, 0);
        assert!(!exceptional.conclusive);
    }

    #[test]
    fn witness_guards() {
        assert!(matches!(
            Witness::new(spec(7, 1, 1, &[1], 3, 1, 1, 1), PrecisionPolicy::Auto),
            Err(HeckeError::Hypothesis(_))
        ));
        assert!(matches!(
            Witness::new(spec(7, 1, 2, &[1], 3, 1, 4, 1), PrecisionPolicy::Auto),
            Err(HeckeError::Hypothesis(_))
        ));
        assert!(matches!(
            Witness::new(spec(7, 1, 0, &[1], 3, 1, 2, 1), PrecisionPolicy::Auto),
            Err(HeckeError::Hypothesis(_))
        ));
        assert!(matches!(
            Witness::new(spec(7, 1, 1, &[1], 3, 1, 2, 1), PrecisionPolicy::Fixed(2)),
            Err(HeckeError::InsufficientPrecision(_))
        ));
    }
}
