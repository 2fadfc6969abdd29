//! The verification suites. Each expands the configuration into a grid of
//! independent points, evaluates them in parallel and returns one record
//! per point in grid order.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use locon_core::binom::{check_cong2, cong2_sweep_checked, CongruenceReport, SumParams};
use locon_core::fp;
use locon_core::hecke::{verify_witness, HeckeError, PrecisionPolicy, WitnessSpec};
use locon_core::llc::{
    bracket_p3r, decide_reduction, fm_generation_certificate, ll_forward, ll_inverse, parse_ratio, ApData,
    CatalogueStatus, Character, GaloisDescriptor, Verdict,
};
use locon_core::polymod::{divconds_check, make_fm, make_hm, theta_order, HomPoly};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ConfigError, SweepConfig};
use crate::record::{Outcome, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Divconds,
    PolynomialA,
    PolynomialB,
    Cong2,
    Witness,
    LlcRoundtrip,
    Reduce,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Divconds,
        Suite::PolynomialA,
        Suite::PolynomialB,
        Suite::Cong2,
        Suite::Witness,
        Suite::LlcRoundtrip,
        Suite::Reduce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Divconds => "divconds",
            Suite::PolynomialA => "polynomial_a",
            Suite::PolynomialB => "polynomial_b",
            Suite::Cong2 => "cong2",
            Suite::Witness => "witness",
            Suite::LlcRoundtrip => "llc_roundtrip",
            Suite::Reduce => "reduce",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown suite {s:?}")))
    }
}

pub mod claims {
    pub const DIVISIBILITY_CRITERION: &str = "single_class_theta_divisibility_criterion";
    pub const FM_THETA_ORDER: &str = "fm_has_exact_theta_order_m";
    pub const FM_GENERATES: &str = "fm_generates_graded_piece";
    pub const SUM_CONGRUENCE: &str = "class_binomial_sum_congruence";
    pub const SUM_CORNER: &str = "class_binomial_sum_corner_b_p_minus_1_m_0";
    pub const SUM_FAST_PATH: &str = "class_binomial_sum_fast_path_agrees";
    pub const SUM_LITERAL: &str = "class_binomial_sum_literal_agrees";
    pub const SUM_ANCHOR: &str = "class_binomial_sum_anchor_value";
    pub const WITNESS: &str = "hecke_witness_kills_graded_piece";
    pub const DICTIONARY: &str = "mod_p_dictionary_roundtrip";
    pub const REDUCTION: &str = "reduction_near_small_weight";
}

/// Evaluates `f` over `points` in parallel, keeping the input order.
fn par_records<T, F>(cfg: &SweepConfig, points: Vec<T>, f: F) -> Vec<RunRecord>
where
    T: Send,
    F: Fn(T) -> Vec<RunRecord> + Sync,
{
    points
        .into_par_iter()
        .map(|point| {
            let start = Instant::now();
            let mut recs = f(point);
            if cfg.timings {
                let ms = start.elapsed().as_millis() as u64;
                for rec in &mut recs {
                    rec.wall_ms = Some(ms);
                }
            }
            recs
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

fn b_values(cfg: &SweepConfig, p: u64) -> Vec<u64> {
    if cfg.b.is_empty() {
        (1..p).collect()
    } else {
        cfg.b.iter().copied().filter(|&b| b >= 1 && b < p).collect()
    }
}

pub fn run_suite(suite: Suite, cfg: &SweepConfig) -> Result<Vec<RunRecord>, ConfigError> {
    cfg.validate()?;
    Ok(match suite {
        Suite::Divconds => divconds(cfg),
        Suite::PolynomialA => polynomial_a(cfg),
        Suite::PolynomialB => polynomial_b(cfg),
        Suite::Cong2 => cong2(cfg),
        Suite::Witness => witness(cfg, cfg.precision_policy()?),
        Suite::LlcRoundtrip => llc_roundtrip(cfg),
        Suite::Reduce => reduce(cfg)?,
    })
}

/// Runs the suites in order on a pool sized from the configuration.
pub fn run_suites(suites: &[Suite], cfg: &SweepConfig) -> Result<Vec<RunRecord>, ConfigError> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.worker_count()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| ConfigError::Invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        let mut out = Vec::new();
        for &suite in suites {
            out.extend(run_suite(suite, cfg)?);
        }
        Ok(out)
    })
}

fn point_rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    let mixed = parts.iter().fold(seed ^ 0x9e37_79b9_7f4a_7c15, |acc, &x| {
        (acc ^ x).wrapping_mul(0x1000_0000_01b3).rotate_left(17)
    });
    ChaCha8Rng::seed_from_u64(mixed)
}

/// A random polynomial of degree `r` supported on indices `= class mod (p-1)`.
fn random_class_poly(rng: &mut ChaCha8Rng, p: u64, r: usize, class: u64) -> HomPoly {
    let coeffs = (0..=r)
        .map(|i| if i as u64 % (p - 1) == class { rng.gen_range(0..p) } else { 0 })
        .collect();
    HomPoly::new(p, coeffs)
}

/// Random single-class polynomial, biased toward `theta^m` multiples so that
/// both outcomes of the criterion occur.
pub fn sample_single_class(rng: &mut ChaCha8Rng, p: u64, r: usize, m: usize) -> (HomPoly, u64) {
    let class = rng.gen_range(0..p - 1);
    let step = m * (p as usize + 1);
    let mode = rng.gen_range(0..3);
    if mode == 0 || r < step {
        return (random_class_poly(rng, p, r, class), class);
    }
    let g_class = (class + (p - 1) * m as u64 - m as u64) % (p - 1);
    let g = random_class_poly(rng, p, r - step, g_class);
    let mut f = g.mul(&HomPoly::theta(p).pow(m));
    if mode == 2 {
        let idx: Vec<usize> = (0..=r).filter(|&i| i as u64 % (p - 1) == class).collect();
        let i = idx[rng.gen_range(0..idx.len())];
        f = f.add(&HomPoly::monomial(p, r, i, rng.gen_range(1..p)));
    }
    (f, class)
}

fn divconds(cfg: &SweepConfig) -> Vec<RunRecord> {
    let per_point = cfg.samples.div_ceil(cfg.r_max * cfg.m_max).max(1);
    let points: Vec<(u64, usize, usize)> = cfg
        .primes
        .iter()
        .flat_map(|&p| (1..=cfg.r_max).flat_map(move |r| (1..=cfg.m_max).map(move |m| (p, r, m))))
        .collect();
    par_records(cfg, points, |(p, r, m)| {
        let mut rng = point_rng(cfg.seed, &[p, r as u64, m as u64]);
        let mut divisible = 0;
        let mut mismatch = None;
        for _ in 0..per_point {
            let (f, class) = sample_single_class(&mut rng, p, r, m);
            let oracle = f.is_zero() || theta_order(&f).expect("nonzero") >= m;
            let fast = divconds_check(&f, m, class).expect("single class");
            divisible += usize::from(oracle);
            if oracle != fast && mismatch.is_none() {
                mismatch = Some(json!({"poly": f, "class": class, "oracle": oracle, "criterion": fast}));
            }
        }
        let verdict = if mismatch.is_none() { Outcome::Pass } else { Outcome::Fail };
        vec![RunRecord::new(
            "divconds",
            claims::DIVISIBILITY_CRITERION,
            json!({"p": p, "r": r, "m": m, "samples": per_point, "divisible": divisible}),
            verdict,
        )
        .with_detail(mismatch.unwrap_or(Value::Null))]
    })
}

/// Grid of `(p, b, m, t, s)` with `b >= 2m`, or `b > 2m` when `strict`.
fn fm_grid(cfg: &SweepConfig, min_m: usize, strict: bool) -> Vec<(u64, u64, usize, u32, u64)> {
    let mut points = Vec::new();
    for &p in &cfg.primes {
        for b in b_values(cfg, p) {
            let top = if strict { (b as usize - 1) / 2 } else { b as usize / 2 };
            for m in min_m..=top {
                for &t in &cfg.t {
                    for &s in &cfg.s {
                        points.push((p, b, m, t, s));
                    }
                }
            }
        }
    }
    points
}

fn polynomial_a(cfg: &SweepConfig) -> Vec<RunRecord> {
    par_records(cfg, fm_grid(cfg, 0, false), |(p, b, m, t, s)| {
        let r = (b + s * p.pow(t) * (p - 1)) as usize;
        let params = json!({"p": p, "b": b, "m": m, "t": t, "s": s, "r": r});
        let fm = make_fm(p, r, b as usize, m).expect("valid grid point");
        let order = theta_order(&fm).expect("F_m is nonzero");
        let class = (b + p - 1 - m as u64 % (p - 1)) % (p - 1);
        let crit_m = divconds_check(&fm, m, class).expect("single class");
        let crit_m1 = divconds_check(&fm, m + 1, class).expect("single class");
        let hm_order = if m >= 1 && b as usize > 2 * m {
            let hm = make_hm(p, r, b as usize, m).expect("valid grid point");
            Some(if hm.is_zero() { usize::MAX } else { theta_order(&hm).expect("nonzero") })
        } else {
            None
        };
        let hm_ok = hm_order.is_none_or(|o| o > m);
        let ok = order == m && crit_m && !crit_m1 && hm_ok;
        vec![RunRecord::new(
            "polynomial_a",
            claims::FM_THETA_ORDER,
            params,
            if ok { Outcome::Pass } else { Outcome::Fail },
        )
        .with_detail(json!({
            "theta_order": order,
            "divconds_m": crit_m,
            "divconds_m_plus_1": crit_m1,
            "hm_theta_order": hm_order,
            "hm_ok": hm_ok,
        }))]
    })
}

fn polynomial_b(cfg: &SweepConfig) -> Vec<RunRecord> {
    par_records(cfg, fm_grid(cfg, 1, true), |(p, b, m, t, s)| {
        let r = (b + s * p.pow(t) * (p - 1)) as usize;
        let params = json!({"p": p, "b": b, "m": m, "t": t, "s": s, "r": r});
        match fm_generation_certificate(p, r, b as usize, m) {
            Ok((span, whole)) => {
                let ok = span == whole && whole == p as usize + 1;
                vec![RunRecord::new("polynomial_b", claims::FM_GENERATES, params, if ok { Outcome::Pass } else { Outcome::Fail })
                    .with_detail(json!({"span_dim": span, "subquotient_dim": whole}))]
            }
            Err(e) => vec![RunRecord::new("polynomial_b", claims::FM_GENERATES, params, Outcome::Error)
                .with_detail(json!({"error": e.to_string()}))],
        }
    })
}

fn residue_string(n: &BigInt, p: u64, power: u32) -> String {
    n.mod_floor(&BigInt::from(p).pow(power)).to_string()
}

fn cong2_record(rep: &CongruenceReport) -> RunRecord {
    let sp = rep.params;
    let params = json!({"p": sp.p, "b": sp.b, "s": sp.s, "t": sp.t, "i": sp.i, "m": sp.m, "r": rep.r});
    let (claim, verdict) = if rep.corner {
        (claims::SUM_CORNER, Outcome::Reported)
    } else if rep.passed() {
        (claims::SUM_CONGRUENCE, Outcome::Pass)
    } else {
        (claims::SUM_CONGRUENCE, Outcome::Fail)
    };
    RunRecord::new("cong2", claim, params, verdict)
        .with_margin(rep.v_s.map(|v| i64::from(v) - i64::from(sp.t)))
        .with_detail(json!({
            "s_mod_p_t2": residue_string(&rep.s, sp.p, sp.t + 2),
            "target_mod_p_t2": residue_string(&rep.target, sp.p, sp.t + 2),
            "v_s": rep.v_s,
            "v_diff": rep.v_diff,
            "pass_t": rep.pass_t,
            "pass_t1": rep.pass_t1,
        }))
}

fn cong2(cfg: &SweepConfig) -> Vec<RunRecord> {
    let points: Vec<(u64, u64, u32)> = cfg
        .primes
        .iter()
        .flat_map(|&p| cfg.s.iter().flat_map(move |&s| cfg.t.iter().map(move |&t| (p, s, t))))
        .collect();
    let mut out = par_records(cfg, points, |(p, s, t)| {
        let base = json!({"p": p, "s": s, "t": t});
        let (reports, mismatches) = match cong2_sweep_checked(p, s, t) {
            Ok(x) => x,
            Err(e) => {
                return vec![RunRecord::new("cong2", claims::SUM_CONGRUENCE, base, Outcome::Error)
                    .with_detail(json!({"error": e.to_string()}))]
            }
        };
        let mut recs: Vec<RunRecord> = reports.iter().map(cong2_record).collect();
        recs.push(
            RunRecord::new(
                "cong2",
                claims::SUM_FAST_PATH,
                base.clone(),
                if mismatches == 0 { Outcome::Pass } else { Outcome::Fail },
            )
            .with_detail(json!({"compared": reports.len(), "mismatches": mismatches})),
        );
        let max_r = reports.iter().map(|rep| rep.r).max().unwrap_or(0);
        if max_r <= cfg.literal_r_max {
            let disagree = reports
                .iter()
                .filter(|rep| check_cong2(&rep.params).map(|lit| lit.s != rep.s).unwrap_or(true))
                .count();
            recs.push(
                RunRecord::new("cong2", claims::SUM_LITERAL, base, if disagree == 0 { Outcome::Pass } else { Outcome::Fail })
                    .with_detail(json!({"compared": reports.len(), "mismatches": disagree})),
            );
        }
        recs
    });
    if cfg.primes.contains(&5) && cfg.s.contains(&1) && cfg.t.contains(&1) {
        out.push(anchor_record());
    }
    out
}

/// `S_{23,0,1}` at `p = 5`: exact value 2096105, which is `-20 mod 25`.
fn anchor_record() -> RunRecord {
    let params = SumParams { p: 5, b: 3, s: 1, t: 1, i: 0, m: 1 };
    let rep = check_cong2(&params).expect("valid anchor");
    let value = rep.s.to_string();
    let ok = value == "2096105" && residue_string(&rep.s, 5, 2) == "5";
    RunRecord::new(
        "cong2",
        claims::SUM_ANCHOR,
        json!({"p": 5, "b": 3, "s": 1, "t": 1, "i": 0, "m": 1, "r": 23}),
        if ok { Outcome::Pass } else { Outcome::Fail },
    )
    .with_detail(json!({"value": value}))
}

/// Runs one witness and renders it as a record; hypothesis and precision
/// failures become error records.
pub fn witness_record(spec: &WitnessSpec, policy: PrecisionPolicy) -> RunRecord {
    let params = serde_json::to_value(spec).expect("serializable");
    match verify_witness(spec, policy) {
        Ok(report) => {
            let verdict = match (report.passed, report.conclusive) {
                (true, true) => Outcome::Pass,
                (true, false) => Outcome::Reported,
                _ => Outcome::Fail,
            };
            let margin = report.integrality.total.margin;
            RunRecord::new("witness", claims::WITNESS, params, verdict)
                .with_margin(margin)
                .with_detail(serde_json::to_value(&report).expect("serializable"))
        }
        Err(e) => {
            let kind = match e {
                HeckeError::Hypothesis(_) => "hypothesis_violation",
                HeckeError::InsufficientPrecision(_) => "insufficient_precision",
                _ => "error",
            };
            RunRecord::new("witness", claims::WITNESS, params, Outcome::Error)
                .with_detail(json!({"kind": kind, "error": e.to_string()}))
        }
    }
}

fn witness(cfg: &SweepConfig, policy: PrecisionPolicy) -> Vec<RunRecord> {
    let mut points = Vec::new();
    let mut skipped = 0usize;
    for ap in &cfg.ap {
        for &p in &cfg.primes {
            for b in b_values(cfg, p) {
                for m in 1..=u64::from(ap.h / ap.e).max(1) {
                    for &t in &cfg.t {
                        for &s in &cfg.s {
                            let spec = WitnessSpec { p, e: ap.e, h: ap.h, unit: ap.unit.clone(), b, m, t, s };
                            if spec.check_hypotheses().is_ok() {
                                points.push(spec);
                            } else {
                                skipped += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    let mut out = par_records(cfg, points, |spec| vec![witness_record(&spec, policy)]);
    out.push(
        RunRecord::new("witness", claims::WITNESS, json!({"grid": "outside_hypotheses"}), Outcome::Reported)
            .with_detail(json!({"skipped_points": skipped})),
    );
    out
}

fn all_galois(p: u64) -> Vec<GaloisDescriptor> {
    let g = fp::primitive_root(p);
    let mut out = Vec::new();
    for omega in 0..p - 1 {
        for unram in [1, g, p - 1] {
            let eta = Character { omega, unram };
            for c in 0..p * p - 1 {
                if c % (p + 1) != 0 {
                    out.push(GaloisDescriptor::Irreducible { c, eta });
                }
            }
            for a in 0..p - 1 {
                for lam in 1..p {
                    out.push(GaloisDescriptor::ReducibleSs { a, lam, eta });
                }
            }
        }
    }
    out
}

fn llc_roundtrip(cfg: &SweepConfig) -> Vec<RunRecord> {
    par_records(cfg, cfg.primes.clone(), |p| {
        let descriptors = all_galois(p);
        let mut failure = None;
        for d in &descriptors {
            let ok = match (d.canonical(p), ll_forward(p, d)) {
                (Ok(canon), Ok(smooth)) => ll_inverse(p, &smooth).ok() == Some(canon),
                _ => false,
            };
            if !ok {
                failure = Some(d.to_string());
                break;
            }
        }
        let bracket_ok = (0..3 * p).all(|r| bracket_p3r(p, r) <= p - 2);
        let ok = failure.is_none() && bracket_ok;
        vec![RunRecord::new(
            "llc_roundtrip",
            claims::DICTIONARY,
            json!({"p": p, "descriptors": descriptors.len()}),
            if ok { Outcome::Pass } else { Outcome::Fail },
        )
        .with_detail(json!({"first_failure": failure, "bracket_in_range": bracket_ok}))]
    })
}

/// The exceptional `(slope, k mod p-1)` classes of the catalogue.
pub fn expected_exception(p: u64, k: u64, num: i64, den: i64) -> Option<&'static str> {
    let is = |w: u64| k % (p - 1) == w % (p - 1);
    match (num, den) {
        (1, 2) if is(3) => Some("slope_1/2_weight_3"),
        (1, 1) if is(4) => Some("slope_1_weight_4"),
        (3, 2) if is(5) => Some("slope_3/2_weight_5"),
        _ => None,
    }
}

fn reduce(cfg: &SweepConfig) -> Result<Vec<RunRecord>, ConfigError> {
    let slopes = cfg
        .slopes
        .iter()
        .map(|s| parse_ratio(s).map_err(ConfigError::Invalid))
        .collect::<Result<Vec<_>, _>>()?;
    let mut points = Vec::new();
    for &p in &cfg.primes {
        for &v in &slopes {
            let (num, den) = (*v.numer(), *v.denom());
            let j0 = (2 * num + den - 1) / den;
            for &u in &cfg.residues {
                if u % p == 0 {
                    continue;
                }
                for k0 in 3..=p + 1 {
                    let mut ks = vec![(k0, None)];
                    for j in [j0, j0 + 1] {
                        for mult in [1, 2] {
                            ks.push((k0 + mult * p.pow(j as u32) * (p - 1), Some(j)));
                        }
                    }
                    if j0 >= 1 {
                        ks.push((k0 + p.pow(j0 as u32 - 1) * (p - 1), Some(j0 - 1)));
                    }
                    for (k, shift) in ks {
                        points.push((p, num, den, u, k0, k, shift));
                    }
                }
            }
        }
    }
    Ok(par_records(cfg, points, |(p, num, den, u, k0, k, shift)| {
        let params = json!({"p": p, "k": k, "k0": k0, "v_ap": format!("{num}/{den}"), "residue": u, "shift_exponent": shift});
        let v = Ratio::new(num, den);
        let ap = ApData { valuation: v, residue: Some(u), zero: false };
        let (report, base) = match (decide_reduction(p, k, &ap), decide_reduction(p, k0, &ap)) {
            (Ok(r), Ok(b)) => (r, b),
            (Err(e), _) | (_, Err(e)) => {
                return vec![RunRecord::new("reduce", claims::REDUCTION, params, Outcome::Error)
                    .with_detail(json!({"error": e.to_string()}))]
            }
        };
        let mut problems = Vec::new();
        let b = report.b;
        let two_v_num = 2 * num;
        let generic = (b as i64) * den > two_v_num;
        let boundary = (b as i64) * den == two_v_num && b % 2 == 1 && fp::mul(u, u, p) != 1;
        let t_ok = report.t.is_none_or(|t| i64::from(t) * den >= two_v_num);
        let expect_hyp = (generic || boundary) && t_ok;
        if report.hypotheses_hold() != expect_hyp {
            problems.push("hypothesis evaluation");
        }
        let expected_verdict = if expect_hyp {
            match (GaloisDescriptor::Irreducible { c: b + 1, eta: Character::trivial() }).canonical(p) {
                Ok(d) => Verdict::Irreducible { descriptor: d },
                Err(_) => Verdict::OutsideKnownRange,
            }
        } else {
            Verdict::OutsideKnownRange
        };
        if report.verdict != expected_verdict {
            problems.push("verdict");
        }
        if let Some(j) = shift {
            if j * den >= two_v_num && report.verdict != base.verdict {
                problems.push("local constancy");
            }
        }
        match expected_exception(p, k, num, den) {
            Some(flag) => {
                let flagged = report.exception_flags.iter().any(|f| f.ends_with(flag));
                if report.catalogue.status != CatalogueStatus::OutsideKnownRange || !flagged {
                    problems.push("catalogue exception");
                }
            }
            None => {
                if report.catalogue.exception.is_some() {
                    problems.push("spurious catalogue exception");
                }
            }
        }
        let verdict = if problems.is_empty() { Outcome::Pass } else { Outcome::Fail };
        vec![RunRecord::new("reduce", claims::REDUCTION, params, verdict)
            .with_detail(json!({"report": report, "problems": problems}))]
    }))
}
