//! The semisimple mod-p local Langlands dictionary on symbolic labels, the
//! reduction verdict for `V_{k,a_p}` near small weights, and the bookkeeping
//! that turns witness computations into that verdict.
//!
//! Characters are labels only: `omega^a mu_u` with `a` modulo `p-1` and
//! `u` in `F_p^*`. Galois-side and smooth-side presentations are brought to
//! a canonical form by minimising over all presentations of the same object.

use std::fmt;

use num_bigint::BigInt;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::binom::alpha;
use crate::fp;
use crate::hecke::{verify_witness, HeckeError, PrecisionPolicy, WitnessReport, WitnessSpec};
use crate::padic::{is_odd_prime, vp_int};
use crate::polymod::{gamma_span_dim, make_fm, quotient_coords, subquotient_dim, HomPoly};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlcError {
    #[error("{0} is not an odd prime")]
    NotOddPrime(u64),
    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("not in the image of the correspondence: {0}")]
    NotInImage(String),
    #[error("a_p = 0: the reduction is not locally constant in the weight there")]
    ApZero,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Witness(#[from] HeckeError),
}

pub type Result<T> = std::result::Result<T, LlcError>;

fn check_prime(p: u64) -> Result<()> {
    if is_odd_prime(p) {
        Ok(())
    } else {
        Err(LlcError::NotOddPrime(p))
    }
}

/// `omega^omega mu_unram`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Character {
    pub omega: u64,
    pub unram: u64,
}

impl Character {
    pub fn trivial() -> Self {
        Character { omega: 0, unram: 1 }
    }

    fn normalized(self, p: u64) -> Result<Self> {
        if self.unram % p == 0 {
            return Err(LlcError::InvalidDescriptor("unramified parameter must be nonzero".into()));
        }
        Ok(Character {
            omega: self.omega % (p - 1),
            unram: self.unram % p,
        })
    }

    fn twist(self, p: u64, omega: u64, unram: u64) -> Self {
        Character {
            omega: (self.omega + omega) % (p - 1),
            unram: fp::mul(self.unram, unram, p),
        }
    }
}

impl fmt::Display for Character {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "omega^{} mu_{}", self.omega, self.unram)
    }
}

/// `pi(r, lam, eta)`, with `0 <= r <= p-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SmoothDescriptor {
    pub r: u64,
    pub lam: u64,
    pub eta: Character,
}

impl SmoothDescriptor {
    /// The minimal presentation among
    /// `pi(r, 0, eta) = pi(p-1-r, 0, eta omega^r) = pi(r, 0, eta mu_{-1})` and
    /// `pi(r, lam, eta)^ss = pi(r, -lam, eta mu_{-1})^ss`, with `r = p-1` and
    /// `r = 0` identified for `lam != 0`.
    pub fn canonical(self, p: u64) -> Result<Self> {
        check_prime(p)?;
        if self.r > p - 1 {
            return Err(LlcError::InvalidDescriptor(format!("r = {} exceeds p-1", self.r)));
        }
        let eta = self.eta.normalized(p)?;
        let lam = self.lam % p;
        let minus = p - 1;
        let candidates: Vec<SmoothDescriptor> = if lam == 0 {
            let r = self.r;
            let flipped = eta.twist(p, r, 1);
            vec![
                SmoothDescriptor { r, lam, eta },
                SmoothDescriptor { r, lam, eta: eta.twist(p, 0, minus) },
                SmoothDescriptor { r: p - 1 - r, lam, eta: flipped },
                SmoothDescriptor { r: p - 1 - r, lam, eta: flipped.twist(p, 0, minus) },
            ]
        } else {
            let r = self.r % (p - 1);
            vec![
                SmoothDescriptor { r, lam, eta },
                SmoothDescriptor { r, lam: fp::neg(lam, p), eta: eta.twist(p, 0, minus) },
            ]
        };
        Ok(candidates.into_iter().min().expect("nonempty"))
    }
}

impl fmt::Display for SmoothDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pi({}, {}, {})", self.r, self.lam, self.eta)
    }
}

/// A semisimple two-dimensional mod-p representation of `G_{Q_p}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GaloisDescriptor {
    /// `ind(omega_2^c) (x) eta`.
    Irreducible { c: u64, eta: Character },
    /// `(mu_lam omega^a (+) mu_{1/lam}) (x) eta`.
    ReducibleSs { a: u64, lam: u64, eta: Character },
}

impl GaloisDescriptor {
    /// The minimal presentation. For the induced case, multiples of `p+1`
    /// in `c` are moved into `eta` (`omega_2^{p+1} = omega`), then
    /// `ind(omega_2^c) = ind(omega_2^{pc})` and the unramified quadratic
    /// twist are used; for the reducible case the two characters may be
    /// listed in either order and `lam` changes sign with `eta mu_{-1}`.
    pub fn canonical(self, p: u64) -> Result<Self> {
        check_prime(p)?;
        let minus = p - 1;
        match self {
            GaloisDescriptor::Irreducible { c, eta } => {
                let eta = eta.normalized(p)?;
                let c = c % (p * p - 1);
                let (q, c0) = (c / (p + 1), c % (p + 1));
                if c0 == 0 {
                    return Err(LlcError::InvalidDescriptor(format!(
                        "omega_2^{c} extends to G_Qp; the induction is reducible"
                    )));
                }
                let eta = eta.twist(p, q, 1);
                let swapped = eta.twist(p, c0 - 1, 1);
                let candidates = [
                    (c0, eta),
                    (c0, eta.twist(p, 0, minus)),
                    (p + 1 - c0, swapped),
                    (p + 1 - c0, swapped.twist(p, 0, minus)),
                ];
                let (c, eta) = candidates.into_iter().min().expect("nonempty");
                Ok(GaloisDescriptor::Irreducible { c, eta })
            }
            GaloisDescriptor::ReducibleSs { a, lam, eta } => {
                let eta = eta.normalized(p)?;
                let lam = lam % p;
                if lam == 0 {
                    return Err(LlcError::InvalidDescriptor("lam must be nonzero".into()));
                }
                let a = a % (p - 1);
                let neg_a = (p - 1 - a) % (p - 1);
                let inv = fp::inv(lam, p);
                let swapped = eta.twist(p, a, 1);
                let candidates = [
                    (a, lam, eta),
                    (a, fp::neg(lam, p), eta.twist(p, 0, minus)),
                    (neg_a, inv, swapped),
                    (neg_a, fp::neg(inv, p), swapped.twist(p, 0, minus)),
                ];
                let (a, lam, eta) = candidates.into_iter().min().expect("nonempty");
                Ok(GaloisDescriptor::ReducibleSs { a, lam, eta })
            }
        }
    }
}

impl fmt::Display for GaloisDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GaloisDescriptor::Irreducible { c, eta } => write!(f, "ind(omega_2^{c}) (x) {eta}"),
            GaloisDescriptor::ReducibleSs { a, lam, eta } => {
                write!(f, "(mu_{lam} omega^{a} + mu_{lam}^-1) (x) {eta}")
            }
        }
    }
}

/// `[p-3-r]` in `{0, ..., p-2}`.
pub fn bracket_p3r(p: u64, r: u64) -> u64 {
    let m = p - 1;
    (2 * m + p - 3 - r % m) % m
}

/// The smooth side: one supercuspidal, or the two constituents of a
/// reducible semisimplification, each canonical and sorted.
pub fn ll_forward(p: u64, g: &GaloisDescriptor) -> Result<Vec<SmoothDescriptor>> {
    match g.canonical(p)? {
        GaloisDescriptor::Irreducible { c, eta } => {
            Ok(vec![SmoothDescriptor { r: c - 1, lam: 0, eta }.canonical(p)?])
        }
        GaloisDescriptor::ReducibleSs { a, lam, eta } => {
            let r = (a + p - 2) % (p - 1);
            let first = SmoothDescriptor { r, lam, eta }.canonical(p)?;
            let second = SmoothDescriptor {
                r: bracket_p3r(p, r),
                lam: fp::inv(lam, p),
                eta: eta.twist(p, r + 1, 1),
            }
            .canonical(p)?;
            let mut out = vec![first, second];
            out.sort();
            Ok(out)
        }
    }
}

/// The unique Galois descriptor whose image is `smooth` (a single
/// supercuspidal or a pair with nonzero Hecke eigenvalue).
pub fn ll_inverse(p: u64, smooth: &[SmoothDescriptor]) -> Result<GaloisDescriptor> {
    check_prime(p)?;
    let mut target = smooth
        .iter()
        .map(|s| s.canonical(p))
        .collect::<Result<Vec<_>>>()?;
    target.sort();
    let candidate = match target.as_slice() {
        [s] if s.lam == 0 => GaloisDescriptor::Irreducible { c: s.r + 1, eta: s.eta },
        [s, _] | [_, s] if s.lam != 0 => {
            let try_one = |s: &SmoothDescriptor| GaloisDescriptor::ReducibleSs { a: s.r + 1, lam: s.lam, eta: s.eta };
            let first = try_one(&target[0]);
            if ll_forward(p, &first)? == target {
                first
            } else {
                try_one(&target[1])
            }
        }
        _ => {
            return Err(LlcError::NotInImage(format!(
                "expected one supercuspidal or two constituents with lam != 0, got {} item(s)",
                target.len()
            )))
        }
    };
    let canonical = candidate.canonical(p)?;
    if ll_forward(p, &canonical)? != target {
        return Err(LlcError::NotInImage(
            target.iter().map(ToString::to_string).collect::<Vec<_>>().join(" + "),
        ));
    }
    Ok(canonical)
}

/// What is known about `a_p`: its valuation, whether it vanishes, and the
/// residue of `a_p / p^{v(a_p)}` when available.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApData {
    #[serde(with = "ratio_str")]
    pub valuation: Ratio<i64>,
    pub residue: Option<u64>,
    #[serde(default)]
    pub zero: bool,
}

mod ratio_str {
    use num_rational::Ratio;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Ratio<i64>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::ratio_string(*x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Ratio<i64>, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_ratio(&s).map_err(D::Error::custom)
    }
}

pub fn ratio_string(x: Ratio<i64>) -> String {
    if x.is_integer() {
        x.to_integer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parses `n` or `n/d`.
pub fn parse_ratio(s: &str) -> std::result::Result<Ratio<i64>, String> {
    let parse = |x: &str| x.trim().parse::<i64>().map_err(|e| format!("bad rational {s:?}: {e}"));
    match s.split_once('/') {
        None => Ok(Ratio::from_integer(parse(s)?)),
        Some((n, d)) => {
            let d = parse(d)?;
            if d == 0 {
                return Err(format!("bad rational {s:?}: zero denominator"));
            }
            Ok(Ratio::new(parse(n)?, d))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Irreducible { descriptor: GaloisDescriptor },
    OutsideKnownRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogueStatus {
    Known,
    OutsideKnownRange,
    NotCatalogued,
}

/// Previously known values of the local constancy radius `m(k, a_p)` for
/// slopes below 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CatalogueEntry {
    pub version: u32,
    pub status: CatalogueStatus,
    pub m: Option<u32>,
    pub exception: Option<String>,
    pub source: &'static str,
}

pub const CATALOGUE_VERSION: u32 = 1;

/// Looks up `(v(a_p), k mod (p-1))`.
pub fn catalogue(p: u64, k: u64, v: Ratio<i64>) -> CatalogueEntry {
    let class = k % (p - 1);
    let is = |w: u64| class == w % (p - 1);
    let one = Ratio::from_integer(1);
    let two = Ratio::from_integer(2);
    let zero = Ratio::from_integer(0);
    let entry = |status, m, exception: Option<&str>, source| CatalogueEntry {
        version: CATALOGUE_VERSION,
        status,
        m,
        exception: exception.map(String::from),
        source,
    };
    if v > zero && v < one {
        if v == Ratio::new(1, 2) && is(3) {
            entry(CatalogueStatus::OutsideKnownRange, None, Some("slope_1/2_weight_3"), "Buzzard-Gee 2013")
        } else {
            entry(CatalogueStatus::Known, Some(1), None, "Buzzard-Gee 2009")
        }
    } else if v == one {
        if is(3) {
            entry(CatalogueStatus::Known, Some(3), None, "Bhattacharya-Ghate-Rozensztajn 2016")
        } else if is(4) {
            entry(CatalogueStatus::OutsideKnownRange, None, Some("slope_1_weight_4"), "Bhattacharya-Ghate-Rozensztajn 2016")
        } else {
            entry(CatalogueStatus::Known, Some(2), None, "Bhattacharya-Ghate-Rozensztajn 2016")
        }
    } else if v > one && v < two {
        if v == Ratio::new(3, 2) && is(5) {
            entry(CatalogueStatus::OutsideKnownRange, None, Some("slope_3/2_weight_5"), "Ghate-Rai, in progress")
        } else if is(3) {
            entry(CatalogueStatus::Known, Some(3), None, "Bhattacharya-Ghate 2015, Ghate-Rai")
        } else {
            entry(CatalogueStatus::Known, Some(2), None, "Bhattacharya-Ghate 2015, Ghate-Rai")
        }
    } else {
        entry(CatalogueStatus::NotCatalogued, None, None, "none")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BergerBound {
    pub bound: String,
    pub satisfied: bool,
}

/// `k > 3 v(a_p) + alpha(k-1) + 1`, the weight bound for local constancy.
pub fn berger_bound(p: u64, k: u64, v: Ratio<i64>) -> BergerBound {
    let bound = v * 3 + Ratio::from_integer(alpha(p, k.saturating_sub(1)) as i64 + 1);
    BergerBound {
        bound: ratio_string(bound),
        satisfied: Ratio::from_integer(k as i64) > bound,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictPath {
    Theorem,
    Certificate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReductionReport {
    pub p: u64,
    pub k: u64,
    pub v_ap: String,
    pub ap_residue: Option<u64>,
    pub b: u64,
    pub k0: u64,
    /// `v_p(k - k0)`; `None` when `k = k0`.
    pub t: Option<u32>,
    pub t_required: String,
    pub checks: Vec<HypothesisCheck>,
    pub verdict: Verdict,
    pub m_bound: Option<String>,
    pub catalogue: CatalogueEntry,
    pub exception_flags: Vec<String>,
    pub berger: BergerBound,
    pub path: VerdictPath,
}

impl ReductionReport {
    pub fn hypotheses_hold(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Reduction of `V_{k,a_p}` for `k` near a small weight `k0 = b + 2`,
/// `b = (k-2) mod (p-1)` taken in `(0, p-1]`.
pub fn decide_reduction(p: u64, k: u64, ap: &ApData) -> Result<ReductionReport> {
    check_prime(p)?;
    if ap.zero {
        return Err(LlcError::ApZero);
    }
    if k < 2 {
        return Err(LlcError::InvalidInput(format!("weight k = {k} must be at least 2")));
    }
    let v = ap.valuation;
    if v <= Ratio::from_integer(0) {
        return Err(LlcError::InvalidInput(format!("v(a_p) = {} must be positive", ratio_string(v))));
    }
    let m = p - 1;
    let b = match (k - 2) % m {
        0 => m,
        x => x,
    };
    let k0 = b + 2;
    let t = if k == k0 {
        None
    } else {
        vp_int(&(BigInt::from(k) - BigInt::from(k0)), p)
    };
    let two_v = v * 2;
    let b_r = Ratio::from_integer(b as i64);
    let mut checks = Vec::new();
    let mut flags = Vec::new();

    let generic = b_r > two_v;
    let boundary = b_r == two_v;
    checks.push(HypothesisCheck {
        name: "small_weight_range".into(),
        passed: generic || boundary,
        detail: format!("2 v(a_p) + 2 = {} {} k0 = {k0} <= p + 1", ratio_string(two_v + 2), if generic { "<" } else if boundary { "=" } else { ">" }),
    });
    if boundary {
        let odd = b % 2 == 1;
        checks.push(HypothesisCheck {
            name: "boundary_weight_odd".into(),
            passed: odd,
            detail: format!("k0 = {k0}"),
        });
        let residue_ok = match ap.residue.map(|u| u % p) {
            None => {
                flags.push("boundary_residue_missing".to_string());
                false
            }
            Some(u) => {
                let u2 = fp::mul(u, u, p);
                if u2 == 1 {
                    flags.push("boundary_residue_plus_minus_one".to_string());
                }
                u != 0 && u2 != 1
            }
        };
        checks.push(HypothesisCheck {
            name: "boundary_residue_not_pm1".into(),
            passed: residue_ok,
            detail: format!("a_p / p^(b/2) mod pi = {:?}", ap.residue),
        });
    }
    let t_ok = match t {
        None => true,
        Some(t) => Ratio::from_integer(i64::from(t)) >= two_v,
    };
    checks.push(HypothesisCheck {
        name: "weight_closeness".into(),
        passed: t_ok && k >= k0,
        detail: format!(
            "t = v(k - k0) = {} against 2 v(a_p) = {}",
            t.map_or("infinity".to_string(), |t| t.to_string()),
            ratio_string(two_v)
        ),
    });

    let cons_applies = checks
        .iter()
        .filter(|c| c.name != "weight_closeness")
        .all(|c| c.passed);
    let hypotheses = checks.iter().all(|c| c.passed);
    let verdict = if hypotheses {
        Verdict::Irreducible {
            descriptor: GaloisDescriptor::Irreducible { c: b + 1, eta: Character::trivial() }.canonical(p)?,
        }
    } else {
        flags.push("outside_theorem_hypotheses".to_string());
        Verdict::OutsideKnownRange
    };
    let cat = catalogue(p, k, v);
    if let Some(exc) = &cat.exception {
        flags.push(format!("catalogue_exception:{exc}"));
    }
    Ok(ReductionReport {
        p,
        k,
        v_ap: ratio_string(v),
        ap_residue: ap.residue,
        b,
        k0,
        t,
        t_required: ratio_string(two_v),
        checks,
        verdict,
        m_bound: cons_applies.then(|| ratio_string(two_v + 1)),
        catalogue: cat,
        exception_flags: flags,
        berger: berger_bound(p, k, v),
        path: VerdictPath::Theorem,
    })
}

/// One graded piece `M_m / M_{m+1}` of the chain, shown to die in the
/// reduction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainStep {
    pub m: u64,
    pub witness_passed: bool,
    pub witness_conclusive: bool,
    /// Dimension of the span of the class of `F_m` in `V_r^(m) / V_r^(m+1)`.
    pub span_dim: usize,
    pub subquotient_dim: usize,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainSummary {
    pub p: u64,
    pub r: u64,
    pub b: u64,
    pub steps: Vec<ChainStep>,
    /// Dimension of the span of `Y^r` in `V_r / V_r^(1)`; the submodule `V_b`
    /// has dimension `b + 1`.
    pub monomial_span_dim: usize,
    pub surjection: bool,
    pub smooth: Option<SmoothDescriptor>,
    pub galois: Option<GaloisDescriptor>,
    pub dictionary_consistent: bool,
    /// Steps taken from the literature rather than computed.
    pub cited: Vec<String>,
    pub blocked: Option<String>,
}

/// Class of `F_m / theta^m` in `V_{r-m(p+1)} / V^(1)`, its span, and the
/// dimension of the whole subquotient.
pub fn fm_generation_certificate(p: u64, r: usize, b: usize, m: usize) -> Result<(usize, usize)> {
    let poly_err = |e: crate::polymod::PolyError| LlcError::InvalidInput(e.to_string());
    let fm = make_fm(p, r, b, m).map_err(poly_err)?;
    let q = quotient_coords(&fm, m).map_err(poly_err)?;
    let span = gamma_span_dim(&[q], p).map_err(poly_err)?;
    let whole = subquotient_dim(p, r, m).map_err(poly_err)?;
    Ok((span, whole))
}

/// Assembles the witness reports for `m = 1..floor(v(a_p))` and the
/// generation certificates into the conclusion
/// `Theta_bar = pi(p-1-b, 0, omega^b)`.
pub fn chain_status(spec: &WitnessSpec, reports: &[WitnessReport]) -> Result<ChainSummary> {
    let p = spec.p;
    let n = u64::from(spec.h / spec.e);
    let r = spec.r();
    let b = spec.b;
    let mut steps = Vec::new();
    let mut blocked = None;
    for m in 1..=n {
        let report = reports.iter().find(|rep| {
            let s = &rep.params.spec;
            s.m == m && WitnessSpec { m, ..spec.clone() } == *s
        });
        let Some(report) = report else {
            blocked.get_or_insert(format!("no witness report for m = {m}"));
            continue;
        };
        let (span_dim, subquotient) = fm_generation_certificate(p, r as usize, b as usize, m as usize)?;
        let ok = report.passed && report.conclusive && span_dim == subquotient;
        if !ok {
            blocked.get_or_insert(format!("graded piece m = {m} not certified"));
        }
        steps.push(ChainStep {
            m,
            witness_passed: report.passed,
            witness_conclusive: report.conclusive,
            span_dim,
            subquotient_dim: subquotient,
            ok,
        });
    }
    let top = HomPoly::monomial(p, r as usize, r as usize, 1);
    let monomial_span_dim =
        gamma_span_dim(&[top], p).map_err(|e| LlcError::InvalidInput(e.to_string()))?;
    if monomial_span_dim != b as usize + 1 {
        blocked.get_or_insert(format!("Y^r spans dimension {monomial_span_dim}, expected {}", b + 1));
    }
    let surjection = blocked.is_none();
    let (smooth, galois, consistent) = if surjection {
        let smooth = SmoothDescriptor {
            r: p - 1 - b,
            lam: 0,
            eta: Character { omega: b % (p - 1), unram: 1 },
        }
        .canonical(p)?;
        let galois = ll_inverse(p, &[smooth])?;
        let expected = GaloisDescriptor::Irreducible { c: b + 1, eta: Character::trivial() }.canonical(p)?;
        (Some(smooth), Some(galois), galois == expected)
    } else {
        (None, None, false)
    };
    let mut cited = vec![
        "ind <Y^r> maps to zero in the reduction".to_string(),
        "the reduction lies in the image of the mod-p correspondence".to_string(),
    ];
    if spec.is_boundary() {
        cited.push("boundary correction by an auxiliary function with residue u^-2 C(r,b-m) [g0(1,0), X^m Y^(r-m)]".into());
    }
    Ok(ChainSummary {
        p,
        r,
        b,
        steps,
        monomial_span_dim,
        surjection,
        smooth,
        galois,
        dictionary_consistent: consistent,
        cited,
        blocked,
    })
}

/// Runs the witnesses behind a reduction query and, if every graded piece
/// is certified, reports the verdict through the certificate path.
///
/// `a_p` is taken as `u pi^h` in the extension with `e` equal to the
/// denominator of `v(a_p)`, with `u` the given residue (default 1).
pub fn certify_reduction(p: u64, k: u64, ap: &ApData) -> Result<(ReductionReport, Option<ChainSummary>)> {
    let mut report = decide_reduction(p, k, ap)?;
    if !report.hypotheses_hold() {
        return Ok((report, None));
    }
    let Some(t) = report.t else {
        return Ok((report, None));
    };
    let v = ap.valuation;
    let e = u32::try_from(*v.denom()).map_err(|_| LlcError::InvalidInput("valuation denominator".into()))?;
    let h = u32::try_from(*v.numer()).map_err(|_| LlcError::InvalidInput("valuation numerator".into()))?;
    let unit = ap.residue.unwrap_or(1) as i64;
    let step = p.pow(t) * (p - 1);
    let s = (k - report.k0) / step;
    let spec = WitnessSpec { p, e, h, unit: vec![unit], b: report.b, m: 1, t, s };
    let n = u64::from(h / e);
    let reports = (1..=n)
        .map(|m| verify_witness(&WitnessSpec { m, ..spec.clone() }, PrecisionPolicy::Auto))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let chain = chain_status(&spec, &reports)?;
    if chain.surjection && chain.dictionary_consistent {
        report.path = VerdictPath::Certificate;
    } else {
        report.verdict = Verdict::OutsideKnownRange;
        report.exception_flags.push("certificate_failed".into());
    }
    Ok((report, Some(chain)))
}
