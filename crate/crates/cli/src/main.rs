use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use metric_union::acceptance::{run_mutations, run_suite};
use metric_union::audit::AuditEntry;
use metric_union::cover::{build_cover, check_cover, f_lipschitz_bound};
use metric_union::glue::{external_extend_tol, glued_metric, GlueSpec};
use metric_union::kirszbraun::DEFAULT_TOL;
use metric_union::linalg::PointCloud;
use metric_union::lower_bound::{build_123_metric, certified_lower_bound, ratio_check, sample_split, sandwich_holds, target_epsilon};
use metric_union::metric::{build_partition, distortion_of, FiniteMetricSpace, PartitionSpec, SpaceSpec, UnionPartition};
use metric_union::report::to_json_string;
use metric_union::testgen::random_instance;
use metric_union::union_embed::{embed_union_auto, ALPHA_GENERAL};
use metric_union::Error;

const THREADS_VAR: &str = "METRIC_UNION_THREADS";
const DEFAULT_LOWER_BOUND_N: usize = 64;

#[derive(Parser, Debug)]
#[command(name = "metric-union", version, about = "Certified Euclidean embeddings of unions of Euclidean metric spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON input file; `-` reads stdin.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Where to write the JSON report (stdout when absent).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Target slack for `lowerbound`: grow `n` until the bound reaches `3 − ε`.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Side size of the bipartite graph for `lowerbound`.
    #[arg(long, global = true)]
    n: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Validate a distance matrix.
    CheckMetric,
    /// Embed `A ∪ B` and audit the result.
    Embed,
    /// Build the α-cover of `A` relative to `B`.
    Cover,
    /// Sample a 1/2/3 space and certify its distortion lower bound.
    Lowerbound,
    /// Glue two point sets along a bi-Lipschitz map and extend externally.
    Glue,
    /// Run the acceptance suite.
    Selftest,
}

/// Why a run failed.
enum Failure {
    /// Bad input: exit 1.
    Input(serde_json::Value),
    /// A certificate or audit did not hold: exit 2.
    Audit(serde_json::Value),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let body = json!({
            "error": e.name(),
            "message": e.to_string(),
            "detail": serde_json::to_value(&e).unwrap_or(serde_json::Value::Null),
        });
        match e {
            Error::AuditViolation { .. }
            | Error::CertificateViolation { .. }
            | Error::SolverStall { .. }
            | Error::Convergence { .. }
            | Error::RangeViolation { .. } => Failure::Audit(body),
            _ => Failure::Input(body),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(json!({ "error": "InputError", "message": format!("{e:#}") }))
    }
}

/// A finished report plus whether every audit in it passed.
struct Outcome {
    body: String,
    pass: bool,
}

#[derive(Deserialize)]
struct EmbedInput {
    space: SpaceSpec,
    partition: PartitionSpec,
    #[serde(default)]
    phi_a: Option<PointCloud>,
    #[serde(default)]
    phi_b: Option<PointCloud>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct CoverInput {
    space: SpaceSpec,
    partition: PartitionSpec,
}

fn read_input(cli: &Cli) -> anyhow::Result<Option<String>> {
    match &cli.input {
        None => Ok(None),
        Some(p) if p.as_os_str() == "-" => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
            Ok(Some(s))
        }
        Some(p) => Ok(Some(fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)),
    }
}

fn require_input(cli: &Cli) -> anyhow::Result<String> {
    read_input(cli)?.context("this command needs --input")
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> anyhow::Result<T> {
    serde_json::from_str(text).with_context(|| format!("parsing {what}"))
}

fn space_and_partition(space: &SpaceSpec, part: &PartitionSpec) -> Result<(FiniteMetricSpace, UnionPartition), Error> {
    let x = space.validate()?;
    let p = build_partition(&x, &part.a, &part.b)?;
    Ok((x, p))
}

fn check_metric(cli: &Cli) -> Result<Outcome, Failure> {
    let spec: SpaceSpec = parse(&require_input(cli)?, "space")?;
    let x = spec.validate()?;
    let body = json!({ "valid": true, "points": x.len(), "diameter": x.diameter() });
    Ok(Outcome { body: to_json_string(&body), pass: true })
}

#[derive(Serialize)]
struct EmbedOutput<'a> {
    embedding: &'a PointCloud,
    report: serde_json::Value,
    audit: &'a [AuditEntry],
}

fn embed(cli: &Cli) -> Result<Outcome, Failure> {
    // without --input, embed the generated instance for --seed
    let (x, p, phi_a, phi_b, alpha, seed) = match read_input(cli)? {
        Some(text) => {
            let inp: EmbedInput = parse(&text, "embed input")?;
            let (x, p) = space_and_partition(&inp.space, &inp.partition)?;
            let seed = if cli.seed != 0 { cli.seed } else { inp.seed.unwrap_or(0) };
            (x, p, inp.phi_a, inp.phi_b, cli.alpha.or(inp.alpha), seed)
        }
        None => {
            let inst = random_instance(cli.seed, 0)?;
            (inst.space, inst.partition, Some(inst.phi_a), Some(inst.phi_b), cli.alpha, cli.seed)
        }
    };
    let u = embed_union_auto(&x, &p, phi_a.as_ref(), phi_b.as_ref(), alpha, Some(cli.tol))?;
    let report = json!({
        "points": x.len(),
        "seed": seed,
        "alpha": u.params.alpha,
        "d_a": u.params.d_a,
        "d_b": u.params.d_b,
        "beta": u.params.beta,
        "gamma": u.params.gamma,
        "bound": u.params.distortion_bound(),
        "dimension": u.full.dim(),
        "distortion": u.report,
        "extended_points": [u.cover_a.cover_idx.len(), u.cover_b.cover_idx.len()],
        "all_pass": u.passed(),
    });
    let out = EmbedOutput { embedding: &u.full, report, audit: &u.audit };
    Ok(Outcome { body: to_json_string(&out), pass: u.passed() })
}

fn cover(cli: &Cli) -> Result<Outcome, Failure> {
    let inp: CoverInput = parse(&require_input(cli)?, "cover input")?;
    let (x, p) = space_and_partition(&inp.space, &inp.partition)?;
    let alpha = cli.alpha.unwrap_or(ALPHA_GENERAL);
    let c = build_cover(&x, &p, alpha)?;
    let check = check_cover(&x, &p, &c);
    let bound = f_lipschitz_bound(alpha);
    let pass = check.is_valid() && c.lip_f <= bound * (1.0 + cli.tol);
    let body = json!({ "cover": c, "check": check, "lip_f_bound": bound, "all_pass": pass });
    Ok(Outcome { body: to_json_string(&body), pass })
}

fn lowerbound(cli: &Cli) -> Result<Outcome, Failure> {
    if let Some(eps) = cli.epsilon {
        let t = target_epsilon(eps, cli.seed)?;
        let pass = t.reached;
        return Ok(Outcome { body: to_json_string(&json!({ "epsilon_target": t, "all_pass": pass })), pass });
    }
    let n = cli.n.unwrap_or(DEFAULT_LOWER_BOUND_N);
    let split = sample_split(n, cli.seed)?;
    let bound = certified_lower_bound(&split);
    let (l, l1, l2) = split.laplacians()?;
    let sandwich = sandwich_holds(&l, &l1, &l2, split.delta_star)?;
    let (x, p) = build_123_metric(&split)?;
    let u = embed_union_auto(&x, &p, None, None, cli.alpha, Some(cli.tol))?;
    let measured = distortion_of(&x, &u.full, None)?.distortion;
    let ratio = ratio_check(&split, &u.full);
    let audits = vec![
        AuditEntry::strict_upper("delta_star.below_one", 1.0, split.delta_star, None, 1),
        AuditEntry::zero_count("sandwich", usize::from(!sandwich), None, 2),
        AuditEntry::lower_tol("embedding.respects_bound", bound, measured, None, 1, 1e-9),
        AuditEntry::zero_count("embedding.ratio_check", usize::from(ratio.is_err()), None, 2),
    ];
    let pass = audits.iter().all(|a| a.pass);
    let body = json!({
        "split": {
            "n": split.n,
            "seed": split.seed,
            "attempts": split.attempts,
            "e1_edges": split.e1.len(),
            "e2_edges": split.e2.len(),
            "e1": split.e1,
        },
        "delta_star": split.delta_star,
        "certified_bound": bound,
        "embedding_distortion": measured,
        "ratio_check": ratio.ok(),
        "audits": audits,
        "all_pass": pass,
    });
    Ok(Outcome { body: to_json_string(&body), pass })
}

fn glue(cli: &Cli) -> Result<Outcome, Failure> {
    let spec: GlueSpec = parse(&require_input(cli)?, "glue input")?;
    let g = spec.to_instance()?;
    let glued = glued_metric(&g)?;
    let e = external_extend_tol(&g, cli.tol)?;
    let pass = e.passed();
    let body = json!({
        "glued": {
            "points": glued.space.len(),
            "diameter": glued.space.diameter(),
            "v_to_glued": glued.v_to_glued,
            "v_scale": glued.v_scale,
            "d_f": glued.d_f,
        },
        "f1": e.f1,
        "f2": e.f2,
        "distortion_f1": e.distortion_f1,
        "distortion_f2": e.distortion_f2,
        "bound": e.bound,
        "audit": e.audit,
        "all_pass": pass,
    });
    Ok(Outcome { body: to_json_string(&body), pass })
}

fn selftest(cli: &Cli) -> Result<Outcome, Failure> {
    let report = run_suite(cli.seed);
    eprint!("{}", report.table());
    let mutations = run_mutations(cli.seed)?;
    eprintln!("[{}]    mutations                    {:?}", if mutations.pass() { "PASS" } else { "FAIL" }, mutations);
    let pass = report.all_pass && mutations.pass();
    let body = json!({ "suite": report, "mutations": mutations, "all_pass": pass });
    Ok(Outcome { body: to_json_string(&body), pass })
}

fn configure_threads() -> anyhow::Result<()> {
    let threads = match std::env::var(THREADS_VAR) {
        Ok(v) => v.trim().parse::<usize>().with_context(|| format!("{THREADS_VAR} must be a positive integer, got {v:?}"))?,
        Err(_) => 1,
    };
    rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global().context("configuring the thread pool")?;
    Ok(())
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    configure_threads()?;
    match cli.command {
        Command::CheckMetric => check_metric(cli),
        Command::Embed => embed(cli),
        Command::Cover => cover(cli),
        Command::Lowerbound => lowerbound(cli),
        Command::Glue => glue(cli),
        Command::Selftest => selftest(cli),
    }
}

fn write_output(cli: &Cli, body: &str) -> anyhow::Result<()> {
    match &cli.output {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            if let Err(e) = write_output(&cli, &out.body) {
                eprint!("{}", to_json_string(&json!({ "error": "OutputError", "message": format!("{e:#}") })));
                return ExitCode::from(1);
            }
            if out.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(Failure::Input(body)) => {
            eprint!("{}", to_json_string(&body));
            ExitCode::from(1)
        }
        Err(Failure::Audit(body)) => {
            eprint!("{}", to_json_string(&body));
            ExitCode::from(2)
        }
    }
}
