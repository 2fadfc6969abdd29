use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use locon_cli::config::{odd_primes_up_to, parse_precision, ConfigError, SweepConfig};
use locon_cli::record::{exit_code, summarize, write_jsonl, write_summary_csv, RunRecord};
use locon_cli::suites::{run_suites, witness_record, Suite};
use locon_core::binom::alpha;
use locon_core::hecke::{verify_witness, Hecke, PrecisionPolicy, TreeFunc, WitnessSpec};
use locon_core::llc::{
    certify_reduction, chain_status, decide_reduction, ll_forward, ll_inverse, parse_ratio, ApData,
    GaloisDescriptor, SmoothDescriptor, Verdict, VerdictPath,
};
use serde::Serialize;
use serde_json::Value;

#[derive(Parser)]
#[command(name = "locon", version, about = "Exact verification runs for local constancy of mod-p reductions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one of the lemma-level suites.
    VerifyLemma {
        #[arg(value_enum)]
        lemma: Lemma,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Apply the Hecke operator to a tree function given as JSON.
    HeckeApply {
        /// JSON file, or `-` for stdin.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "full")]
        part: HeckePart,
    },
    /// Verify one witness computation.
    WitnessCheck {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        e: u32,
        #[arg(long = "ap-h")]
        ap_h: u32,
        /// Digits of the unit `u` in `a_p = u pi^h`, comma separated.
        #[arg(long = "ap-unit", value_delimiter = ',', allow_hyphen_values = true, default_value = "1")]
        ap_unit: Vec<i64>,
        #[arg(long)]
        b: u64,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        t: u32,
        #[arg(long)]
        s: u64,
        /// Fixed working precision `M`; automatic when omitted.
        #[arg(long)]
        precision: Option<u32>,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide the reduction of `V_{k,a_p}`.
    Reduce {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        k: u64,
        /// `n` or `n/d`.
        #[arg(long = "ap-valuation")]
        ap_valuation: String,
        #[arg(long = "ap-residue")]
        ap_residue: Option<u64>,
        #[arg(long = "ap-zero")]
        ap_zero: bool,
        /// Directory of witness reports (as written by `witness-check --out`).
        #[arg(long = "with-certificates")]
        with_certificates: Option<PathBuf>,
        /// Compute the witnesses now instead of reading them.
        #[arg(long, conflicts_with = "with_certificates")]
        certify: bool,
    },
    /// Translate between Galois and smooth descriptors.
    Ll {
        #[arg(long)]
        p: u64,
        #[arg(long, value_enum)]
        direction: Direction,
        /// JSON text, or `@file`.
        #[arg(long)]
        input: String,
    },
    /// Run suites from a configuration file.
    Sweep {
        /// Suites to run; defaults to the `suites` entry of the config, then all.
        #[arg(long, value_delimiter = ',')]
        suite: Vec<String>,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// `alpha(r) = sum_{n >= 1} floor(r / (p^{n-1} (p-1)))`.
    Alpha {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        r: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Lemma {
    Divconds,
    PolynomialA,
    PolynomialB,
    Cong2,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeckePart {
    Plus,
    Minus,
    Full,
    Raw,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Fwd,
    Inv,
}

#[derive(Args, Default)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    primes: Option<Vec<u64>>,
    /// All odd primes up to this bound.
    #[arg(long = "max-p")]
    max_p: Option<u64>,
    #[arg(long = "max-t")]
    max_t: Option<u32>,
    #[arg(long = "max-s")]
    max_s: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    b: Option<Vec<u64>>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `auto` or `fixed:<M>`.
    #[arg(long)]
    precision: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    jsonl: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Add wall-clock times to the records (makes output nondeterministic).
    #[arg(long)]
    timings: bool,
}

impl SweepArgs {
    fn resolve(&self) -> Result<SweepConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => SweepConfig::load(path)?,
            None => SweepConfig::default(),
        };
        if let Some(n) = self.max_p {
            cfg.primes = odd_primes_up_to(n);
        }
        if let Some(primes) = &self.primes {
            cfg.primes = primes.clone();
        }
        if let Some(t) = self.max_t {
            cfg.t = (1..=t).collect();
        }
        if let Some(s) = self.max_s {
            cfg.s = (1..=s).collect();
        }
        if let Some(b) = &self.b {
            cfg.b = b.clone();
        }
        if let Some(x) = self.samples {
            cfg.samples = x;
        }
        if let Some(x) = self.seed {
            cfg.seed = x;
        }
        if let Some(x) = &self.precision {
            cfg.precision = x.clone();
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        if self.jsonl.is_some() {
            cfg.jsonl = self.jsonl.clone();
        }
        if self.csv.is_some() {
            cfg.csv = self.csv.clone();
        }
        cfg.timings |= self.timings;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Claim,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn config_err(e: impl ToString) -> Failure {
    Failure::Config(e.to_string())
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(config_err)?;
    println!("{text}");
    Ok(())
}

fn read_input(path: &Path) -> Result<String, Failure> {
    if path == Path::new("-") {
        io::read_to_string(io::stdin()).map_err(config_err)
    } else {
        std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }
}

fn emit(cfg: &SweepConfig, records: &[RunRecord]) -> Result<(), Failure> {
    match &cfg.jsonl {
        Some(path) => {
            let file = File::create(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            write_jsonl(BufWriter::new(file), records).map_err(config_err)?;
        }
        None => write_jsonl(io::stdout().lock(), records).map_err(config_err)?,
    }
    if let Some(path) = &cfg.csv {
        let file = File::create(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        write_summary_csv(BufWriter::new(file), records).map_err(config_err)?;
    }
    let mut err = io::stderr().lock();
    for ((suite, claim), t) in summarize(records) {
        let _ = writeln!(
            err,
            "{suite:>14} {claim:<48} total {:>6}  pass {:>6}  fail {:>4}  error {:>4}  reported {:>4}",
            t.total, t.pass, t.fail, t.error, t.reported
        );
    }
    Ok(())
}

fn run_records(suites: &[Suite], cfg: &SweepConfig) -> Result<(), Failure> {
    let records = run_suites(suites, cfg)?;
    emit(cfg, &records)?;
    match exit_code(&records) {
        0 => Ok(()),
        1 => Err(Failure::Claim),
        _ => Err(Failure::Config("some points could not be evaluated".into())),
    }
}

/// Loads witness reports from `dir`, recomputes each one and keeps it only
/// if the recomputation agrees with the stored file.
fn load_certificates(dir: &Path) -> Result<Vec<(WitnessSpec, bool)>, Failure> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| config_err(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(&path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let stored: Value = serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let spec: WitnessSpec = serde_json::from_value(stored["params"].clone())
            .map_err(|e| config_err(format!("{}: not a witness report: {e}", path.display())))?;
        let precision = stored["params"]["precision"].as_u64().and_then(|m| u32::try_from(m).ok());
        let policy = precision.map_or(PrecisionPolicy::Auto, PrecisionPolicy::Fixed);
        let agrees = verify_witness(&spec, policy)
            .ok()
            .and_then(|rep| serde_json::to_value(rep).ok())
            .is_some_and(|v| v == stored);
        out.push((spec, agrees));
    }
    Ok(out)
}

fn reduce(
    p: u64,
    k: u64,
    valuation: &str,
    residue: Option<u64>,
    zero: bool,
    certificates: Option<&Path>,
    certify: bool,
) -> Result<(), Failure> {
    let ap = ApData {
        valuation: parse_ratio(valuation).map_err(Failure::Config)?,
        residue,
        zero,
    };
    if certify {
        let (report, chain) = certify_reduction(p, k, &ap).map_err(config_err)?;
        return print_json(&serde_json::json!({"report": report, "chain": chain}));
    }
    let mut report = decide_reduction(p, k, &ap).map_err(config_err)?;
    let Some(dir) = certificates else {
        return print_json(&report);
    };
    let loaded = load_certificates(dir)?;
    let mut chain = None;
    if let (true, Some(t)) = (report.hypotheses_hold(), report.t) {
        let s = (k - report.k0) / (p.pow(t) * (p - 1));
        let v = ap.valuation;
        let base = WitnessSpec {
            p,
            e: u32::try_from(*v.denom()).map_err(config_err)?,
            h: u32::try_from(*v.numer()).map_err(config_err)?,
            unit: vec![residue.unwrap_or(1) as i64],
            b: report.b,
            m: 1,
            t,
            s,
        };
        let reports = loaded
            .iter()
            .filter(|(spec, agrees)| *agrees && WitnessSpec { m: spec.m, ..base.clone() } == *spec)
            .filter_map(|(spec, _)| verify_witness(spec, PrecisionPolicy::Auto).ok())
            .collect::<Vec<_>>();
        let summary = chain_status(&base, &reports).map_err(config_err)?;
        if summary.surjection && summary.dictionary_consistent {
            report.path = VerdictPath::Certificate;
        } else {
            report.verdict = Verdict::OutsideKnownRange;
            report.exception_flags.push("certificate_failed".into());
        }
        chain = Some(summary);
    }
    print_json(&serde_json::json!({"report": report, "chain": chain}))
}

fn ll(p: u64, direction: Direction, input: &str) -> Result<(), Failure> {
    let text = match input.strip_prefix('@') {
        Some(path) => read_input(Path::new(path))?,
        None => input.to_string(),
    };
    match direction {
        Direction::Fwd => {
            let g: GaloisDescriptor = serde_json::from_str(&text).map_err(config_err)?;
            print_json(&ll_forward(p, &g).map_err(config_err)?)
        }
        Direction::Inv => {
            let value: Value = serde_json::from_str(&text).map_err(config_err)?;
            let smooth: Vec<SmoothDescriptor> = if value.is_array() {
                serde_json::from_value(value).map_err(config_err)?
            } else {
                vec![serde_json::from_value(value).map_err(config_err)?]
            };
            print_json(&ll_inverse(p, &smooth).map_err(config_err)?)
        }
    }
}

fn hecke_apply(input: &Path, part: HeckePart) -> Result<(), Failure> {
    let f: TreeFunc = serde_json::from_str(&read_input(input)?).map_err(config_err)?;
    let hecke = Hecke::new(f.ctx(), f.degree()).map_err(config_err)?;
    let out = match part {
        HeckePart::Plus => hecke.t_plus(&f),
        HeckePart::Minus => hecke.t_minus(&f),
        HeckePart::Full => hecke.t_full(&f),
        HeckePart::Raw => hecke.raw_t(&f),
    }
    .map_err(config_err)?;
    print_json(&out)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::VerifyLemma { lemma, sweep } => {
            let suite = match lemma {
                Lemma::Divconds => Suite::Divconds,
                Lemma::PolynomialA => Suite::PolynomialA,
                Lemma::PolynomialB => Suite::PolynomialB,
                Lemma::Cong2 => Suite::Cong2,
            };
            run_records(&[suite], &sweep.resolve()?)
        }
        Command::Sweep { suite, sweep } => {
            let cfg = sweep.resolve()?;
            let names = if !suite.is_empty() { suite } else { cfg.suites.clone() };
            let suites = if names.is_empty() {
                Suite::ALL.to_vec()
            } else {
                names.iter().map(|n| n.parse()).collect::<Result<Vec<Suite>, _>>()?
            };
            run_records(&suites, &cfg)
        }
        Command::HeckeApply { input, part } => hecke_apply(&input, part),
        Command::WitnessCheck { p, e, ap_h, ap_unit, b, m, t, s, precision, out } => {
            let spec = WitnessSpec { p, e, h: ap_h, unit: ap_unit, b, m, t, s };
            let policy = precision.map_or(Ok(PrecisionPolicy::Auto), |m| parse_precision(&format!("fixed:{m}")))?;
            let rec = witness_record(&spec, policy);
            if let Some(path) = out {
                if rec.detail.get("params").is_some() {
                    let text = serde_json::to_string_pretty(&rec.detail).map_err(config_err)?;
                    std::fs::write(&path, text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
                }
            }
            write_jsonl(io::stdout().lock(), std::slice::from_ref(&rec)).map_err(config_err)?;
            match exit_code(std::slice::from_ref(&rec)) {
                0 => Ok(()),
                1 => Err(Failure::Claim),
                _ => Err(Failure::Config(rec.detail["error"].as_str().unwrap_or("error").to_string())),
            }
        }
        Command::Reduce { p, k, ap_valuation, ap_residue, ap_zero, with_certificates, certify } => reduce(
            p,
            k,
            &ap_valuation,
            ap_residue,
            ap_zero,
            with_certificates.as_deref(),
            certify,
        ),
        Command::Ll { p, direction, input } => ll(p, direction, &input),
        Command::Alpha { p, r } => {
            if !locon_core::padic::is_odd_prime(p) {
                return Err(Failure::Config(format!("{p} is not an odd prime")));
            }
            println!("{}", alpha(p, r));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Claim) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
