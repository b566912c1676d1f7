use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use metastab::counterfn::{parse_counterfn, CounterFn, Limits};
use metastab::dynamics::{bundled, Scenario};
use metastab::gamma::GammaContext;
use metastab::moduli::Modulus;
use metastab::numerics::{format_rational, leading_digits, parse_rational, BigNat, Rational};
use metastab::rates::{
    BaseRegistry, RateContext, RateQuery, RateRegistry, RateResult, PREVIEW_DIGITS,
};
use metastab::verify::{
    assert_witness_dominated, check_monotone_structure, check_proof_inequalities, find_witness,
    CheckReport, SweepBounds, Target, WitnessQuery, WitnessReport,
};
use metastab::{Error, Result};

#[derive(Parser)]
#[command(
    name = "metastab",
    version,
    about = "Rates of metastability for Cesàro means of nonexpansive maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one rate and print it with its trace.
    Rate(RateArgs),
    /// Search for the least metastability witness on a scenario's orbit.
    Verify(VerifyArgs),
    /// Run the proof-inequality and monotonicity sweeps on a scenario.
    Suite(SuiteArgs),
    /// Tabulate a rate over several values of ε as CSV.
    Table(TableArgs),
}

#[derive(Args, Clone)]
struct RateParams {
    /// Rate name; see `metastab rate --rate help`.
    #[arg(long)]
    rate: String,
    /// Diameter bound of the domain.
    #[arg(long)]
    b: Option<String>,
    #[arg(long, default_value = "id")]
    g: String,
    #[arg(long, default_value = "zero")]
    h: String,
    /// Modulus of uniform convexity, `lp:P`.
    #[arg(long)]
    modulus: Option<String>,
    /// B-convexity constant.
    #[arg(long)]
    c: Option<String>,
    /// B-convexity exponent.
    #[arg(long)]
    q: Option<String>,
    /// Base rate: a1, a2:dim=D, stub:K, stub:inv, table:E=V,...
    #[arg(long)]
    base: Option<String>,
    /// Scenario file, or the name of a bundled scenario, supplying defaults.
    #[arg(long)]
    scenario: Option<String>,
    /// Argument of n_eps.
    #[arg(long)]
    n: Option<String>,
    /// Dimension for a2.
    #[arg(long)]
    dim: Option<u64>,
    /// Range bound for nonincreasing.
    #[arg(long)]
    range: Option<String>,
    /// Report a certified lower bound when the exact value is out of reach.
    #[arg(long)]
    allow_lower_bound: bool,
    #[arg(long)]
    max_bits: Option<u64>,
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args)]
struct RateArgs {
    /// Required unless `--rate help`.
    #[arg(long)]
    epsilon: Option<String>,
    #[command(flatten)]
    params: RateParams,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    scenario: String,
    /// alpha, psi, phi or simultaneous.
    #[arg(long)]
    target: String,
    #[arg(long)]
    epsilon: String,
    #[arg(long, default_value = "id")]
    g: String,
    #[arg(long, default_value = "zero")]
    h: String,
    /// Largest N scanned.
    #[arg(long, default_value_t = 1000)]
    cap: u64,
    /// Also compute the matching rate and report whether it bounds the witness.
    #[arg(long)]
    dominate: bool,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 40)]
    mn: usize,
    #[arg(long, default_value_t = 20)]
    il: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Multiply γ̂ by this factor, to confirm the harness can fail.
    #[arg(long, default_value_t = 1)]
    corrupt_gamma: u32,
    /// Orbit length for the monotonicity sweep.
    #[arg(long, default_value_t = 1000)]
    structure_n: usize,
}

#[derive(Args)]
struct TableArgs {
    /// Comma-separated values of ε.
    #[arg(long, value_delimiter = ',')]
    epsilons: Vec<String>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    params: RateParams,
}

fn load_scenario(spec: &str) -> Result<Scenario> {
    let path = Path::new(spec);
    if path.is_file() {
        let src =
            std::fs::read_to_string(path).map_err(|e| Error::invalid(format!("{spec}: {e}")))?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or(spec);
        return Scenario::from_json(name, &src);
    }
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or(spec);
    bundled(name).map_err(|_| {
        Error::invalid(format!(
            "no scenario file or bundled scenario named {spec:?}"
        ))
    })
}

fn counterfn(src: &str) -> Result<CounterFn> {
    parse_counterfn(src)
}

fn nat(src: &str, what: &str) -> Result<BigNat> {
    src.parse()
        .map_err(|_| Error::invalid(format!("{what} must be a natural number, got {src:?}")))
}

fn rational_or(
    arg: &Option<String>,
    fallback: Option<&Rational>,
    default: &str,
) -> Result<Rational> {
    match (arg, fallback) {
        (Some(s), _) => parse_rational(s),
        (None, Some(r)) => Ok(r.clone()),
        (None, None) => parse_rational(default),
    }
}

struct Prepared {
    ctx: RateContext,
    g: CounterFn,
    h: CounterFn,
    n: Option<BigNat>,
    dim: Option<u64>,
    range: Option<Rational>,
}

impl RateParams {
    fn prepare(&self) -> Result<Prepared> {
        let scenario = self.scenario.as_deref().map(load_scenario).transpose()?;
        let sc = scenario.as_ref();
        let b = match (&self.b, sc) {
            (Some(s), _) => parse_rational(s)?,
            (None, Some(s)) => s.b.clone(),
            (None, None) => return Err(Error::invalid("--b is required without --scenario")),
        };
        let modulus = match (&self.modulus, sc) {
            (Some(m), _) => Modulus::parse_short(m)?,
            (None, Some(s)) => s.modulus.clone(),
            (None, None) => Modulus::parse_short("lp:2")?,
        };
        let c = rational_or(&self.c, sc.map(|s| &s.c), "1")?;
        let q = rational_or(&self.q, sc.map(|s| &s.q), "2")?;
        let base_spec = self
            .base
            .clone()
            .or_else(|| sc.map(|s| s.base.clone()))
            .unwrap_or_else(|| "a1".into());
        let base = BaseRegistry::default().build(&base_spec, &b)?;
        let mut limits = Limits::default();
        if let Some(m) = self.max_bits {
            limits.max_bits = m;
        }
        if let Some(m) = self.budget {
            limits.budget = m;
        }
        let ctx = RateContext::new(GammaContext::new(b, modulus, c, q)?, base)
            .with_limits(limits)
            .allowing_lower_bound(self.allow_lower_bound);
        Ok(Prepared {
            ctx,
            g: counterfn(&self.g)?,
            h: counterfn(&self.h)?,
            n: self.n.as_deref().map(|s| nat(s, "--n")).transpose()?,
            dim: self.dim.or_else(|| sc.map(|s| s.space.dim() as u64)),
            range: self.range.as_deref().map(parse_rational).transpose()?,
        })
    }
}

impl Prepared {
    fn run(&self, reg: &RateRegistry, rate: &str, epsilon: Rational) -> Result<RateResult> {
        let mut q = RateQuery::new(epsilon, self.g.clone(), self.h.clone());
        q.n = self.n.clone();
        q.dim = self.dim;
        q.range = self.range.clone();
        reg.run(&self.ctx, rate, &q)
    }
}

fn rate_help(reg: &RateRegistry) -> String {
    let mut out = String::from("rates:\n");
    for r in reg.iter() {
        out.push_str(&format!("  {:<14} {}\n", r.name(), r.summary()));
    }
    out
}

fn cmd_rate(a: &RateArgs) -> Result<String> {
    let reg = RateRegistry::default();
    if a.params.rate == "help" {
        return Ok(rate_help(&reg));
    }
    let epsilon = a
        .epsilon
        .as_deref()
        .ok_or_else(|| Error::invalid("--epsilon is required"))?;
    let prepared = a.params.prepare()?;
    Ok(prepared
        .run(&reg, &a.params.rate, parse_rational(epsilon)?)?
        .to_json()
        + "\n")
}

#[derive(Serialize)]
struct VerifyOut<'a> {
    #[serde(flatten)]
    report: &'a WitnessReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate_exact: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate_value_digits: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate_value_preview: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dominated: Option<bool>,
}

fn cmd_verify(a: &VerifyArgs) -> Result<String> {
    let scenario = load_scenario(&a.scenario)?;
    let q = WitnessQuery {
        target: Target::parse(&a.target)?,
        epsilon: parse_rational(&a.epsilon)?,
        g: counterfn(&a.g)?,
        h: counterfn(&a.h)?,
        cap: a.cap,
    };
    let report = find_witness(&scenario, &q)?;
    let mut out = VerifyOut {
        report: &report,
        epsilon: None,
        rate: None,
        rate_exact: None,
        rate_value_digits: None,
        rate_value_preview: None,
        dominated: None,
    };
    if a.dominate {
        let ctx = scenario.rate_context()?.allowing_lower_bound(true);
        let rate = RateRegistry::default().run(
            &ctx,
            q.target.rate_name(),
            &RateQuery::new(q.epsilon.clone(), q.g.clone(), q.h.clone()),
        )?;
        out.epsilon = Some(format_rational(&q.epsilon));
        out.rate = Some(q.target.rate_name());
        out.rate_exact = Some(rate.exact);
        out.rate_value_digits = Some(rate.digit_count());
        out.rate_value_preview = Some(leading_digits(&rate.value, PREVIEW_DIGITS));
        out.dominated = Some(assert_witness_dominated(&report, &rate));
    }
    Ok(serde_json::to_string_pretty(&out).expect("serializes") + "\n")
}

#[derive(Serialize)]
struct SuiteOut {
    scenario: String,
    bounds: SweepBounds,
    all_passed: bool,
    checks: Vec<CheckReport>,
}

fn cmd_suite(a: &SuiteArgs) -> Result<String> {
    let scenario = load_scenario(&a.scenario)?;
    let bounds = SweepBounds {
        mn: a.mn,
        il: a.il,
        samples: a.samples,
        gamma_factor: a.corrupt_gamma,
        ..Default::default()
    };
    let mut checks = check_proof_inequalities(&scenario, &bounds)?.checks;
    checks.extend(check_monotone_structure(&scenario, a.structure_n, a.il)?);
    let out = SuiteOut {
        scenario: scenario.name.clone(),
        bounds,
        all_passed: checks.iter().all(|c| c.passed),
        checks,
    };
    Ok(serde_json::to_string_pretty(&out).expect("serializes") + "\n")
}

fn cmd_table(a: &TableArgs) -> Result<String> {
    if a.epsilons.is_empty() {
        return Err(Error::invalid("--epsilons needs at least one value"));
    }
    let reg = RateRegistry::default();
    let prepared = a.params.prepare()?;
    let mut csv = String::from("epsilon,rate,value_digits,value_preview\n");
    for e in &a.epsilons {
        let r = prepared.run(&reg, &a.params.rate, parse_rational(e)?)?;
        let preview = leading_digits(&r.value, PREVIEW_DIGITS);
        let marker = if r.exact { "" } else { ">=" };
        csv.push_str(&format!(
            "{},{},{},{marker}{preview}\n",
            format_rational(&r.epsilon),
            r.rate,
            r.digit_count()
        ));
    }
    match &a.output {
        Some(path) => {
            std::fs::write(path, &csv)
                .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
            Ok(String::new())
        }
        None => Ok(csv),
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_resource() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Rate(a) => cmd_rate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Suite(a) => cmd_suite(a),
        Command::Table(a) => cmd_table(a),
    };
    match result {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout
                .write_all(out.as_bytes())
                .and_then(|_| stdout.flush())
                .is_err()
            {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("metastab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
