//! `opsys`: reproducible experiments on operator systems with JSON reports.
//!
//! Exit codes: 0 for a computed answer (negative answers included), 2 for
//! bad input, 3 when a search ran out of budget without deciding.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use opsys::compacts::s0_demo;
use opsys::conic::eig_herm;
use opsys::factorization::{extract_factorization, DecomposeOptions, FactorizationReport};
use opsys::maps::{is_cp_subsystem, SystemMap, SystemRef};
use opsys::system::{named_system, MatrixOperatorSystem};
use opsys::tensor::io::{verify_certificate, CertificateFile, ElementFile};
use opsys::tensor::{
    max_certify, max_refute, min_member, min_member_by_states, nuclearity_report, CertifyOptions, MaxOutcome,
    NuclearityOptions, RefuteOptions, RefuteOutcome, TensorSystem, Verdict,
};
use opsys::{Certificate, Error};

const EXIT_INPUT: u8 = 2;
const EXIT_UNDECIDED: u8 = 3;

#[derive(Parser)]
#[command(name = "opsys", version, about = "Operator system tensor cones, CP maps and factorizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Complete positivity of a map between systems.
    CheckCp(CheckCpArgs),
    /// Membership in the minimal tensor cone.
    MinMember(MinMemberArgs),
    /// Search for a maximal-cone decomposition and write a certificate.
    MaxCertify(MaxCertifyArgs),
    /// Search for a functional separating an element from the maximal cone.
    MaxRefute(MaxRefuteArgs),
    /// Compare the minimal and maximal cones against a list of partners.
    Nuclearity(NuclearityArgs),
    /// Factor a UCP map approximately through matrix algebras.
    Factorize(FactorizeArgs),
    /// Truncated compacts without the (1,1) matrix unit.
    S0Demo(S0DemoArgs),
    /// Re-check a certificate file from scratch.
    VerifyCertificate(VerifyArgs),
}

/// Systems are given by name (tri3, m2, diag3, ...) or as a JSON file.
#[derive(Args, Serialize)]
struct PairArgs {
    #[arg(long)]
    system: String,
    #[arg(long)]
    partner: String,
    #[arg(long)]
    element: PathBuf,
}

#[derive(Args, Serialize)]
struct CheckCpArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args, Serialize)]
struct MinMemberArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pair: PairArgs,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Also run the sampled state test with this many samples.
    #[arg(long)]
    states: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct MaxCertifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pair: PairArgs,
    /// Archimedean shift; defaults to 1e-3·‖X‖_F.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 400_000)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    k_cap: Option<usize>,
    /// Also write the certificate here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct MaxRefuteArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pair: PairArgs,
    /// Joint-positivity levels, e.g. `2x2,3x3`.
    #[arg(long, default_value = "2x2,3x3", value_parser = parse_levels)]
    levels: Levels,
    #[arg(long, default_value_t = 60)]
    mesh_size: usize,
    #[arg(long, default_value_t = 3_000_000)]
    budget: usize,
    #[arg(long, default_value_t = 1e-3)]
    threshold: f64,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct NuclearityArgs {
    #[arg(long)]
    system: String,
    /// Repeat for several partners.
    #[arg(long, required = true)]
    partner: Vec<String>,
    #[arg(long, default_value_t = 2)]
    n_max: usize,
    #[arg(long, default_value_t = 3)]
    samples: usize,
    #[arg(long, default_value_t = 200_000)]
    budget: usize,
    #[arg(long, default_value_t = 1)]
    refutations: usize,
    #[arg(long, default_value_t = 3_000_000)]
    refute_budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct FactorizeArgs {
    /// Map file for Φ; alternatively `--identity SYSTEM`.
    #[arg(long, conflicts_with = "identity")]
    map: Option<PathBuf>,
    #[arg(long)]
    identity: Option<String>,
    /// Subsystem E of the domain; defaults to the whole domain.
    #[arg(long)]
    subsystem: Option<String>,
    /// Comma-separated schedule of shifts.
    #[arg(long, default_value = "1e-1,1e-2,1e-3", value_delimiter = ',')]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 16)]
    r_cap: usize,
}

#[derive(Args, Serialize)]
struct S0DemoArgs {
    #[arg(long = "N", default_value_t = 16)]
    #[serde(rename = "N")]
    n: usize,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[arg(long)]
    certificate: PathBuf,
    #[arg(long)]
    element: Option<PathBuf>,
}

type Levels = Vec<(usize, usize)>;

fn parse_levels(s: &str) -> Result<Levels, String> {
    s.split(',')
        .map(|part| {
            let (k, l) = part.trim().split_once('x').ok_or_else(|| format!("level `{part}` is not of the form KxL"))?;
            let k: usize = k.parse().map_err(|e| format!("{part}: {e}"))?;
            let l: usize = l.parse().map_err(|e| format!("{part}: {e}"))?;
            if k == 0 || l == 0 {
                return Err(format!("level `{part}` must be positive"));
            }
            Ok((k, l))
        })
        .collect()
}

/// Input problems exit with 2, everything else is a report.
enum Failure {
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = Result<(Value, u8), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_system(arg: &str) -> Result<MatrixOperatorSystem, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        let r: SystemRef = serde_json::from_str(&read(path)?).map_err(|e| Failure::Input(format!("{arg}: {e}")))?;
        return Ok(r.resolve()?);
    }
    if let Some(s) = named_system(arg) {
        return Ok(s);
    }
    if let Some(q) = arg.strip_prefix('m').and_then(|d| d.parse::<usize>().ok()).filter(|&q| q > 0) {
        return Ok(MatrixOperatorSystem::full(q));
    }
    Err(Failure::Input(format!("`{arg}` is neither a file nor a known system")))
}

fn load_pair(p: &PairArgs) -> Result<(TensorSystem, opsys::system::LevelElement), Failure> {
    let ts = TensorSystem::new(&load_system(&p.system)?, &load_system(&p.partner)?);
    let x = ElementFile::from_json(&read(&p.element)?)?.to_element(&ts)?;
    Ok((ts, x))
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Failure::Input(format!("--{name} must be positive, got {v}")))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<(), Failure> {
    if v >= 1 {
        Ok(())
    } else {
        Err(Failure::Input(format!("--{name} must be positive")))
    }
}

fn check_cp(a: &CheckCpArgs) -> Outcome {
    positive("tol", a.tol)?;
    let map = SystemMap::from_json(&read(&a.map)?)?;
    let cert = is_cp_subsystem(&map, a.tol)?;
    let detail = match &cert {
        Certificate::ExactMember => json!({}),
        Certificate::CertifiedMember(c) => json!({ "choi_min_eig": c.min_eig, "agreement": c.agreement }),
        Certificate::RefutedAtLevel { witness, level } => json!({
            "level": level,
            "image_min_eig": witness.min_eig,
            "element_min_eig": witness.element_min_eig,
            "beyond_scanned_levels": witness.beyond_scanned_levels,
        }),
        Certificate::Undecided { budget, residual } => json!({ "budget": budget, "residual": residual }),
    };
    let code = if matches!(cert, Certificate::Undecided { .. }) { EXIT_UNDECIDED } else { 0 };
    Ok((json!({ "cp": cert.is_member(), "kind": cert.kind(), "detail": detail }), code))
}

fn min_member_cmd(a: &MinMemberArgs) -> Outcome {
    positive("tol", a.tol)?;
    let (ts, x) = load_pair(&a.pair)?;
    let member = min_member(&ts, &x, a.tol)?;
    let min_eig = eig_herm(&x.realize())?.min();
    let mut out = json!({ "member": member, "min_eig": min_eig });
    if let Some(n) = a.states {
        at_least_one("states", n)?;
        let st = min_member_by_states(&ts, &x, n, a.seed, a.tol)?;
        out["states"] = json!({ "member": st.member, "min_eig": st.min_eig, "witness": st.witness });
    }
    Ok((out, 0))
}

fn max_certify_cmd(a: &MaxCertifyArgs) -> Outcome {
    if let Some(e) = a.eps {
        positive("eps", e)?;
    }
    at_least_one("budget", a.budget)?;
    let (ts, x) = load_pair(&a.pair)?;
    let opts = CertifyOptions {
        epsilon: a.eps,
        budget: a.budget,
        seed: a.seed,
        k_cap: a.k_cap,
        ..Default::default()
    };
    let out = max_certify(&ts, &x, &opts)?;
    let (cert, code, extra) = match &out {
        MaxOutcome::Certified(d) => (CertificateFile::member(&ts, d, a.seed), 0, json!({ "atoms": d.atoms.len() })),
        MaxOutcome::Fail(f) => (
            CertificateFile::fail(&ts, &x, opts.epsilon_for(&x.realize()), f.residual, a.seed),
            EXIT_UNDECIDED,
            json!({ "atoms": f.atoms, "iterations": f.iterations, "stalled": f.stalled }),
        ),
    };
    if let Some(p) = &a.out {
        write(p, &cert.to_json())?;
    }
    Ok((
        json!({
            "certified": out.is_certified(),
            "residual": out.residual(),
            "search": extra,
            "certificate": cert,
        }),
        code,
    ))
}

fn max_refute_cmd(a: &MaxRefuteArgs) -> Outcome {
    positive("threshold", a.threshold)?;
    at_least_one("mesh-size", a.mesh_size)?;
    at_least_one("budget", a.budget)?;
    if let Some(e) = a.eps {
        positive("eps", e)?;
    }
    let (ts, x) = load_pair(&a.pair)?;
    let opts = RefuteOptions {
        levels: a.levels.clone(),
        mesh_size: a.mesh_size,
        seed: a.seed,
        budget: a.budget,
        epsilon: a.eps,
        threshold: a.threshold,
    };
    match max_refute(&ts, &x, &opts)? {
        RefuteOutcome::Evidence(ev) => {
            let cert = CertificateFile::refute(&ts, &x, &ev, a.seed);
            if let Some(p) = &a.out {
                write(p, &cert.to_json())?;
            }
            Ok((
                json!({
                    "found": true,
                    "label": ev.label(),
                    "source": format!("{:?}", ev.source),
                    "margin": ev.margin,
                    "threshold": ev.threshold,
                    "mixing": ev.mixing,
                    "jointcp_residuals": ev.jointcp_residuals,
                    "fresh_mesh": ev.fresh_mesh,
                    "adversarial_max": ev.adversarial_max,
                    "functional": ev.functional_vector(),
                    "certificate": cert,
                }),
                0,
            ))
        }
        RefuteOutcome::NotFound { budget, reason } => {
            Ok((json!({ "found": false, "budget": budget, "reason": reason }), EXIT_UNDECIDED))
        }
    }
}

fn nuclearity_cmd(a: &NuclearityArgs) -> Outcome {
    at_least_one("n-max", a.n_max)?;
    at_least_one("budget", a.budget)?;
    at_least_one("refute-budget", a.refute_budget)?;
    let s = load_system(&a.system)?;
    let partners = a.partner.iter().map(|p| load_system(p)).collect::<Result<Vec<_>, _>>()?;
    let opts = NuclearityOptions {
        n_max: a.n_max,
        samples_per_level: a.samples,
        budget: a.budget,
        seed: a.seed,
        max_refutations: a.refutations,
        refute: RefuteOptions {
            seed: a.seed,
            budget: a.refute_budget,
            ..Default::default()
        },
    };
    let report = nuclearity_report(&s, &partners, &opts)?;
    let code = if matches!(report.verdict, Verdict::Inconclusive { .. }) { EXIT_UNDECIDED } else { 0 };
    Ok((serde_json::to_value(&report).expect("plain data"), code))
}

fn factorize_cmd(a: &FactorizeArgs) -> Outcome {
    at_least_one("r-cap", a.r_cap)?;
    if a.eps.is_empty() {
        return Err(Failure::Input("--eps needs at least one value".into()));
    }
    for &e in &a.eps {
        positive("eps", e)?;
    }
    let phi = match (&a.map, &a.identity) {
        (Some(p), None) => SystemMap::from_json(&read(p)?)?,
        (None, Some(s)) => SystemMap::identity(&load_system(s)?),
        _ => return Err(Failure::Input("give exactly one of --map and --identity".into())),
    };
    let e = match &a.subsystem {
        Some(s) => load_system(s)?,
        None => phi.domain().clone(),
    };
    let schedule: Vec<_> = a.eps.iter().map(|&eps| (e.clone(), eps)).collect();
    match extract_factorization(&phi, &schedule, &DecomposeOptions { r_cap: a.r_cap }) {
        Ok(steps) => Ok((serde_json::to_value(FactorizationReport::new(&steps)).expect("plain data"), 0)),
        Err(Error::ExtensionSearchFailed { residual }) => Ok((
            json!({ "factorized": false, "reason": "no single-atom decomposition found", "residual": residual }),
            EXIT_UNDECIDED,
        )),
        Err(e) => Err(e.into()),
    }
}

fn s0_demo_cmd(a: &S0DemoArgs) -> Outcome {
    if a.n < 2 {
        return Err(Failure::Input(format!("--N must be at least 2, got {}", a.n)));
    }
    at_least_one("samples", a.samples)?;
    let demo = s0_demo(a.n, a.samples, a.seed)?;
    Ok((serde_json::to_value(&demo).expect("plain data"), 0))
}

fn verify_cmd(a: &VerifyArgs) -> Outcome {
    let cert = CertificateFile::from_json(&read(&a.certificate)?)?;
    let element = match &a.element {
        Some(p) => {
            let ts = TensorSystem::new(&cert.left.resolve()?, &cert.right.resolve()?);
            Some(ElementFile::from_json(&read(p)?)?.to_matrix(&ts)?)
        }
        None => None,
    };
    let report = verify_certificate(&cert, element.as_ref())?;
    Ok((serde_json::to_value(&report).expect("plain data"), 0))
}

fn dispatch(c: &Command) -> Outcome {
    match c {
        Command::CheckCp(a) => check_cp(a),
        Command::MinMember(a) => min_member_cmd(a),
        Command::MaxCertify(a) => max_certify_cmd(a),
        Command::MaxRefute(a) => max_refute_cmd(a),
        Command::Nuclearity(a) => nuclearity_cmd(a),
        Command::Factorize(a) => factorize_cmd(a),
        Command::S0Demo(a) => s0_demo_cmd(a),
        Command::VerifyCertificate(a) => verify_cmd(a),
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("OPSYS_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Input(format!("OPSYS_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Input(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    let result = configure_threads().and_then(|_| dispatch(&cli.command));
    match result {
        Ok((outcome, code)) => {
            let report = json!({
                "config": serde_json::to_value(&cli.command).expect("plain data"),
                "outcome": outcome,
                "wall_time_ms": start.elapsed().as_millis() as u64,
            });
            println!("{}", serde_json::to_string_pretty(&report).expect("plain data"));
            ExitCode::from(code)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("opsys: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
