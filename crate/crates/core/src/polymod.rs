//! Symmetric powers `V_r = Sym^r F_p^2` as homogeneous polynomials in `X, Y`,
//! the filtration by powers of `theta = X^p Y - X Y^p`, and the action of
//! `GL_2(F_p)`.
//!
//! A polynomial `sum a_i X^{r-i} Y^i` is stored as the vector `(a_0, ..., a_r)`,
//! so index `i` is the exponent of `Y`.

use serde::{Deserialize, Serialize};

use crate::fp::{self, EchelonBasis};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolyError {
    #[error("theta order of the zero polynomial is undefined")]
    ZeroPolynomial,
    #[error("support is not confined to one class mod p-1 (index {index} vs class {class})")]
    MixedSupport { index: usize, class: u64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate parameters r = b (t is infinite)")]
    Degenerate,
    #[error("polynomial is not divisible by theta^{0}")]
    InsufficientThetaOrder(usize),
    #[error("singular matrix")]
    Singular,
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, PolyError>;

/// Homogeneous polynomial of degree `r` over `F_p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "HomPolyRepr", into = "HomPolyRepr")]
pub struct HomPoly {
    p: u64,
    coeffs: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct HomPolyRepr {
    p: u64,
    r: usize,
    ring: String,
    coeffs: Vec<u64>,
}

impl From<HomPoly> for HomPolyRepr {
    fn from(f: HomPoly) -> Self {
        HomPolyRepr {
            p: f.p,
            r: f.degree(),
            ring: "F_p".into(),
            coeffs: f.coeffs,
        }
    }
}

impl TryFrom<HomPolyRepr> for HomPoly {
    type Error = PolyError;

    fn try_from(repr: HomPolyRepr) -> Result<Self> {
        if repr.ring != "F_p" {
            return Err(PolyError::InvalidParams(format!("ring {}", repr.ring)));
        }
        if repr.coeffs.len() != repr.r + 1 {
            return Err(PolyError::DegreeMismatch(repr.r, repr.coeffs.len().saturating_sub(1)));
        }
        Ok(HomPoly::new(repr.p, repr.coeffs))
    }
}

impl HomPoly {
    pub fn new(p: u64, mut coeffs: Vec<u64>) -> Self {
        assert!(!coeffs.is_empty(), "a homogeneous polynomial has r+1 >= 1 coefficients");
        for c in coeffs.iter_mut() {
            *c %= p;
        }
        HomPoly { p, coeffs }
    }

    pub fn from_i64(p: u64, coeffs: &[i64]) -> Self {
        HomPoly::new(p, coeffs.iter().map(|&c| fp::from_i64(c, p)).collect())
    }

    pub fn zero(p: u64, r: usize) -> Self {
        HomPoly {
            p,
            coeffs: vec![0; r + 1],
        }
    }

    /// `c X^{r-i} Y^i`.
    pub fn monomial(p: u64, r: usize, i: usize, c: u64) -> Self {
        let mut f = Self::zero(p, r);
        f.coeffs[i] = c % p;
        f
    }

    /// `theta = X^p Y - X Y^p` in `V_{p+1}`.
    pub fn theta(p: u64) -> Self {
        let mut f = Self::zero(p, p as usize + 1);
        f.coeffs[1] = 1;
        f.coeffs[p as usize] = p - 1;
        f
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> u64 {
        self.coeffs[i]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.coeffs.iter().enumerate().filter(|(_, &c)| c != 0).map(|(i, _)| i)
    }

    pub fn add(&self, other: &HomPoly) -> HomPoly {
        assert_eq!(self.degree(), other.degree());
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| fp::add(a, b, self.p))
            .collect();
        HomPoly { p: self.p, coeffs }
    }

    pub fn sub(&self, other: &HomPoly) -> HomPoly {
        self.add(&other.scale(self.p - 1))
    }

    pub fn scale(&self, c: u64) -> HomPoly {
        let coeffs = self.coeffs.iter().map(|&a| fp::mul(a, c, self.p)).collect();
        HomPoly { p: self.p, coeffs }
    }

    pub fn mul(&self, other: &HomPoly) -> HomPoly {
        let p = self.p;
        let mut coeffs = vec![0; self.degree() + other.degree() + 1];
        for i in self.support() {
            for j in other.support() {
                coeffs[i + j] = fp::add(coeffs[i + j], fp::mul(self.coeffs[i], other.coeffs[j], p), p);
            }
        }
        HomPoly { p, coeffs }
    }

    pub fn pow(&self, n: usize) -> HomPoly {
        let mut acc = HomPoly::monomial(self.p, 0, 0, 1);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Exact quotient by `theta`, or `None` if the remainder is nonzero.
    ///
    /// Long division treating `F` as a polynomial in `Y` over `F_p[X]`,
    /// eliminating from the highest `Y`-power down.
    pub fn div_theta(&self) -> Option<HomPoly> {
        if self.degree() < self.p as usize + 1 {
            return None;
        }
        let (quotient, rem) = self.theta_reduce();
        if rem.iter().all(|&c| c == 0) {
            Some(HomPoly::new(self.p, quotient))
        } else {
            None
        }
    }

    /// Returns `(Q, R)` with `F = theta * Q + R`, where `R` is supported on
    /// indices `0..p` and `r` (the normal form modulo `V_r^(1)`).
    fn theta_reduce(&self) -> (Vec<u64>, Vec<u64>) {
        let pu = self.p;
        let p = pu as usize;
        let r = self.degree();
        let mut rem = self.coeffs.clone();
        if r < p + 1 {
            return (Vec::new(), rem);
        }
        let mut quotient = vec![0; r - p];
        // theta * z^k = z^{k+1} - z^{k+p}
        for idx in (p..r).rev() {
            let c = rem[idx];
            if c == 0 {
                continue;
            }
            let q = fp::neg(c, pu);
            let k = idx - p;
            quotient[k] = q;
            rem[idx] = 0;
            rem[k + 1] = fp::sub(rem[k + 1], q, pu);
        }
        (quotient, rem)
    }

    /// Canonical representative of the class of `F` in `V_r / V_r^(1)`.
    pub fn theta_normal_form(&self) -> HomPoly {
        HomPoly::new(self.p, self.theta_reduce().1)
    }
}

/// Largest `m` with `theta^m | F`, by repeated exact division.
pub fn theta_order(f: &HomPoly) -> Result<usize> {
    if f.is_zero() {
        return Err(PolyError::ZeroPolynomial);
    }
    let mut m = 0;
    let mut cur = f.clone();
    while let Some(q) = cur.div_theta() {
        m += 1;
        cur = q;
    }
    Ok(m)
}

/// `F / theta^m`, the coordinates of the class of `F` in
/// `V_r^(m) / V_r^(m+1) = V_{r-m(p+1)} / V^(1)` (up to the determinant twist).
pub fn quotient_coords(f: &HomPoly, m: usize) -> Result<HomPoly> {
    let mut cur = f.clone();
    for _ in 0..m {
        cur = cur.div_theta().ok_or(PolyError::InsufficientThetaOrder(m))?;
    }
    Ok(cur)
}

/// Divisibility criterion for `F` supported on a single class `a mod (p-1)`:
/// `theta^m | F` iff every nonzero `a_i` has `m <= i <= r-m` and
/// `sum_i j! C(i,j) a_i = 0` for `0 <= j < m`.
pub fn divconds_check(f: &HomPoly, m: usize, class: u64) -> Result<bool> {
    let p = f.p;
    let r = f.degree();
    let class = class % (p - 1);
    if let Some(index) = f.support().find(|&i| i as u64 % (p - 1) != class) {
        return Err(PolyError::MixedSupport { index, class });
    }
    if f.support().any(|i| i < m || i + m > r) {
        return Ok(false);
    }
    for j in 0..m {
        let mut total = 0;
        for i in f.support() {
            // j! C(i, j) = i (i-1) ... (i-j+1)
            let falling = (0..j).fold(1, |acc, k| fp::mul(acc, (i - k) as u64 % p, p));
            total = fp::add(total, fp::mul(falling, f.coeffs[i], p), p);
        }
        if total != 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

fn check_fm_params(p: u64, r: usize, b: usize, m: usize) -> Result<()> {
    if r < b || (r - b) as u64 % (p - 1) != 0 {
        return Err(PolyError::InvalidParams(format!(
            "need r >= b and r = b mod p-1 (r={r}, b={b}, p={p})"
        )));
    }
    if m > b {
        return Err(PolyError::InvalidParams(format!("need m <= b (m={m}, b={b})")));
    }
    Ok(())
}

/// `F_m = X^m Y^{r-m} - X^{r-b+m} Y^{b-m}`.
pub fn make_fm(p: u64, r: usize, b: usize, m: usize) -> Result<HomPoly> {
    check_fm_params(p, r, b, m)?;
    let mut f = HomPoly::zero(p, r);
    f.coeffs[r - m] = 1;
    f.coeffs[b - m] = fp::sub(f.coeffs[b - m], 1, p);
    Ok(f)
}

/// `H_m = F_m - (-1)^m theta^m (Y^{r-m(p+1)} - Y^{b-2m} X^{r-b-pm+m})`.
pub fn make_hm(p: u64, r: usize, b: usize, m: usize) -> Result<HomPoly> {
    check_fm_params(p, r, b, m)?;
    if r == b {
        return Err(PolyError::Degenerate);
    }
    let pu = p as usize;
    if b <= 2 * m || r < m * (pu + 1) || r + m < b + pu * m || (r - b) as u64 % p != 0 {
        return Err(PolyError::InvalidParams(format!(
            "need b > 2m, r >= m(p+1), p | r-b (p={p}, r={r}, b={b}, m={m})"
        )));
    }
    let s = r - m * (pu + 1);
    let mut tail = HomPoly::zero(p, s);
    tail.coeffs[s] = 1;
    tail.coeffs[b - 2 * m] = fp::sub(tail.coeffs[b - 2 * m], 1, p);
    let mut correction = HomPoly::theta(p).pow(m).mul(&tail);
    if m % 2 == 1 {
        correction = correction.scale(p - 1);
    }
    Ok(make_fm(p, r, b, m)?.sub(&correction))
}

/// An invertible 2x2 matrix `[[a, b], [c, d]]` over `F_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GammaMat {
    p: u64,
    a: u64,
    b: u64,
    c: u64,
    d: u64,
}

impl GammaMat {
    pub fn new(p: u64, a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        let g = GammaMat {
            p,
            a: fp::from_i64(a, p),
            b: fp::from_i64(b, p),
            c: fp::from_i64(c, p),
            d: fp::from_i64(d, p),
        };
        if g.det() == 0 {
            return Err(PolyError::Singular);
        }
        Ok(g)
    }

    pub fn identity(p: u64) -> Self {
        GammaMat { p, a: 1, b: 0, c: 0, d: 1 }
    }

    pub fn det(&self) -> u64 {
        fp::sub(fp::mul(self.a, self.d, self.p), fp::mul(self.b, self.c, self.p), self.p)
    }

    pub fn entries(&self) -> [u64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn mul(&self, o: &GammaMat) -> GammaMat {
        let p = self.p;
        let dot = |x: u64, y: u64, z: u64, w: u64| fp::add(fp::mul(x, y, p), fp::mul(z, w, p), p);
        GammaMat {
            p,
            a: dot(self.a, o.a, self.b, o.c),
            b: dot(self.a, o.b, self.b, o.d),
            c: dot(self.c, o.a, self.d, o.c),
            d: dot(self.c, o.b, self.d, o.d),
        }
    }

    /// Upper unipotent, `diag(g, 1)` for a primitive root `g`, and the
    /// antidiagonal involution; together they generate `GL_2(F_p)`.
    pub fn generators(p: u64) -> [GammaMat; 3] {
        let g = fp::primitive_root(p);
        [
            GammaMat { p, a: 1, b: 1, c: 0, d: 1 },
            GammaMat { p, a: g, b: 0, c: 0, d: 1 },
            GammaMat { p, a: 0, b: 1, c: 1, d: 0 },
        ]
    }
}

fn linear_form_powers(p: u64, x_coeff: u64, y_coeff: u64, n: usize) -> Vec<HomPoly> {
    let form = HomPoly::new(p, vec![x_coeff, y_coeff]);
    let mut out = Vec::with_capacity(n + 1);
    out.push(HomPoly::monomial(p, 0, 0, 1));
    for k in 0..n {
        let next = out[k].mul(&form);
        out.push(next);
    }
    out
}

/// `(g . F)(X, Y) = F(aX + cY, bX + dY)`, a left action of `GL_2(F_p)`.
pub fn gamma_act(g: &GammaMat, f: &HomPoly) -> HomPoly {
    let p = f.p;
    let r = f.degree();
    let xs = linear_form_powers(p, g.a, g.c, r);
    let ys = linear_form_powers(p, g.b, g.d, r);
    let mut out = HomPoly::zero(p, r);
    for i in f.support() {
        let term = xs[r - i].mul(&ys[i]).scale(f.coeffs[i]);
        out = out.add(&term);
    }
    out
}

/// Action on `V_r (x) D^s`.
pub fn gamma_act_twisted(g: &GammaMat, f: &HomPoly, s: u64) -> HomPoly {
    gamma_act(g, f).scale(fp::pow(g.det(), s, g.p))
}

/// The class of a degree-`s` polynomial in `V_s / V_s^(1)`, recorded as its
/// values on the representatives `(1, z)`, `z in F_p`, and `(0, 1)` of the
/// `p + 1` lines in `F_p^2`. A polynomial vanishes on every line exactly
/// when it is divisible by `theta`, so these values are faithful coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineClass {
    p: u64,
    weight: usize,
    values: Vec<u64>,
}

impl LineClass {
    pub fn of(f: &HomPoly) -> Self {
        let p = f.p;
        let mut values: Vec<u64> = (0..p)
            .map(|z| {
                f.coeffs
                    .iter()
                    .rev()
                    .fold(0, |acc, &c| fp::add(fp::mul(acc, z, p), c, p))
            })
            .collect();
        values.push(f.coeffs[f.degree()]);
        LineClass {
            p,
            weight: f.degree(),
            values,
        }
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    /// `(g . f)(v) = f(v g)` on the homogeneous function of weight `s`.
    pub fn act(&self, g: &GammaMat) -> LineClass {
        let p = self.p;
        let s = self.weight as u64;
        let [a, b, c, d] = g.entries();
        let eval = |x: u64, y: u64| -> u64 {
            let w1 = fp::add(fp::mul(a, x, p), fp::mul(c, y, p), p);
            let w2 = fp::add(fp::mul(b, x, p), fp::mul(d, y, p), p);
            if w1 != 0 {
                let z = fp::mul(w2, fp::inv(w1, p), p);
                fp::mul(fp::pow(w1, s, p), self.values[z as usize], p)
            } else {
                fp::mul(fp::pow(w2, s, p), self.values[p as usize], p)
            }
        };
        let mut values: Vec<u64> = (0..p).map(|z| eval(1, z)).collect();
        values.push(eval(0, 1));
        LineClass {
            p,
            weight: self.weight,
            values,
        }
    }
}

/// Dimension of the `GL_2(F_p)`-span of the classes of `vectors` in
/// `V_s / V_s^(1)`, by closure under generators and elimination.
pub fn gamma_span_dim(vectors: &[HomPoly], p: u64) -> Result<usize> {
    let Some(first) = vectors.first() else {
        return Ok(0);
    };
    let s = first.degree();
    if let Some(bad) = vectors.iter().find(|v| v.degree() != s) {
        return Err(PolyError::DegreeMismatch(s, bad.degree()));
    }
    let gens = GammaMat::generators(p);
    let mut basis = EchelonBasis::new(p);
    let mut queue: Vec<LineClass> = Vec::new();
    for v in vectors {
        let class = LineClass::of(v);
        if basis.insert(class.values.clone()) {
            queue.push(class);
        }
    }
    while let Some(class) = queue.pop() {
        for g in &gens {
            let image = class.act(g);
            if basis.insert(image.values.clone()) {
                queue.push(image);
            }
        }
    }
    Ok(basis.rank())
}

/// `dim V_r^(m) / V_r^(m+1)`, as the rank of the evaluation map of
/// `V_{r-m(p+1)}` on the `p + 1` lines.
pub fn subquotient_dim(p: u64, r: usize, m: usize) -> Result<usize> {
    let step = m * (p as usize + 1);
    if r < step {
        return Err(PolyError::InvalidParams(format!(
            "V_{r}^({m}) is zero: r < m(p+1)"
        )));
    }
    let s = r - step;
    let mut basis = EchelonBasis::new(p);
    for i in 0..=s {
        basis.insert(LineClass::of(&HomPoly::monomial(p, s, i, 1)).values);
        if basis.rank() == p as usize + 1 {
            break;
        }
    }
    Ok(basis.rank())
}
