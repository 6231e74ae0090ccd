//! Command-line front end: every analysis reads JSON documents, prints a
//! one-line verdict on stderr, and writes a JSON report to stdout or a file.
//!
//! Exit codes: 0 verified or completed, 1 a checked property fails, 2 the
//! hypotheses of the requested analysis are not met (or numerics cannot
//! decide it), 3 unusable input.

use std::fs;
use std::path::{Path, PathBuf};

use biiso_core::asymptotics::{
    class_flags, numerical_range, power_bounded, spectral_radius, verify_theorem_4_1,
    verify_theorem_6_1, Verdict,
};
use biiso_core::biortho::{
    apply_via_expansion, construct_system, expand_coeffs, verify_system, ExpansionOp,
};
use biiso_core::defect::{binomial_identity_residual, classify_pair, defect_operator, PairConfig};
use biiso_core::generators::{gen_finite_pair, gen_shift_pair, solve_metric, SearchOutcome};
use biiso_core::jsonio;
use biiso_core::metric::positivity_certificate;
use biiso_core::rule::WeightRule;
use biiso_core::{C64, CoreError, DEFAULT_ANGLES, DEFAULT_WINDOW};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "biiso",
    version,
    about = "Defect calculus for metric-coupled operator pairs: classification, \
             biorthogonal sequence systems, and structure verdicts"
)]
struct Cli {
    #[command(flatten)]
    globals: Globals,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Globals {
    /// Relative tolerance for residual comparisons.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    /// Index window for structured-operator norms and scans
    /// (default 64, or the pair document's value).
    #[arg(long, global = true)]
    window: Option<usize>,
    /// Seed for randomized searches.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel scans.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a pair: defect residuals at each order and the flags they imply.
    Check(PairArgs),
    /// Evaluate one defect operator, optionally with the power-expansion identity residual.
    Defect(DefectArgs),
    /// Construct and verify the biorthogonal sequence system of a first-order pair.
    Construct(ConstructArgs),
    /// Expand a vector in both sequences and apply the four expansion operators.
    Expand(ExpandArgs),
    /// Norm, spectral radius, numerical range, class flags, and power boundedness of one operator.
    ClassifyOp(ClassifyArgs),
    /// Verify the power-bounded collapse to first order.
    VerifyT41(PairArgs),
    /// Verify the structural dichotomy for first-order pairs under a positive metric.
    VerifyT61(PairArgs),
    /// Search for Hermitian metrics annihilated by a pair at a given order.
    SolveMetric(SolveArgs),
    /// Generate a pair document.
    Gen(GenArgs),
}

#[derive(Args)]
struct PairArgs {
    /// Path to a pair document.
    #[arg(long)]
    pair: PathBuf,
    /// Defect order; falls back to the document's m_max, then 4.
    #[arg(long)]
    order: Option<u32>,
}

#[derive(Args)]
struct DefectArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Check the power-expansion identity at this exponent.
    #[arg(long)]
    identity_n: Option<u32>,
}

#[derive(Args)]
struct ConstructArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Sequence length to construct.
    #[arg(long, default_value_t = 32)]
    n_max: usize,
}

#[derive(Args)]
struct ExpandArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Path to the vector document to expand.
    #[arg(long)]
    x: PathBuf,
    /// Highest sequence index used in the expansion.
    #[arg(long, default_value_t = 16)]
    k_max: usize,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Path to an operator document.
    #[arg(long)]
    operator: PathBuf,
    /// Supporting directions for the numerical range.
    #[arg(long, default_value_t = DEFAULT_ANGLES)]
    angles: usize,
}

#[derive(Args)]
struct SolveArgs {
    /// Path to a pair document or a bare {"a": ..., "b": ...} document.
    #[arg(long)]
    pair: PathBuf,
    /// Defect order to annihilate.
    #[arg(long)]
    order: u32,
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
}

#[derive(Subcommand)]
enum GenKind {
    /// Shift pair on the sequence space from a positive diagonal metric rule.
    Shift(GenShiftArgs),
    /// Dense pair with unimodular spectrum and a random strictly positive metric.
    Finite(GenFiniteArgs),
}

#[derive(Args)]
struct GenShiftArgs {
    /// Built-in metric rule.
    #[arg(long, value_enum, conflicts_with = "rule_file")]
    preset: Option<Preset>,
    /// Path to a JSON rule document for the metric diagonal.
    #[arg(long)]
    rule_file: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Metric diagonal 2^-n.
    Dyadic,
    /// Identity metric.
    Constant,
    /// Metric diagonal 1/(n+1).
    Harmonic,
}

#[derive(Args)]
struct GenFiniteArgs {
    /// Matrix dimension.
    #[arg(long)]
    dim: usize,
    /// Draw a unitary A; otherwise A is a conjugated unitary and not normal.
    #[arg(long, default_value_t = false)]
    normal: bool,
}

struct CliFail {
    code: i32,
    message: String,
}

impl From<CoreError> for CliFail {
    fn from(err: CoreError) -> Self {
        let code = match &err {
            CoreError::PreconditionFailed { .. }
            | CoreError::KernelEmpty
            | CoreError::RangeIntersectionEmpty
            | CoreError::DegeneratePairing { .. }
            | CoreError::MetricNotPositive(_)
            | CoreError::NonSemisimple { .. }
            | CoreError::NonUnimodular { .. }
            | CoreError::NotInRange { .. }
            | CoreError::EigenFailed
            | CoreError::CrossCheckDiverged { .. }
            | CoreError::Singular => 2,
            _ => 3,
        };
        CliFail { code, message: format!("{err}") }
    }
}

struct Outcome {
    envelope: Value,
    verdict: String,
    exit: i32,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return code;
        }
    };
    if cli.globals.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return 3;
    }
    // A second build_global in one process is rejected; the pool then simply
    // keeps its first size, which is harmless here.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.globals.threads)
        .build_global();

    let command_name = command_name(&cli.command);
    match dispatch(&cli) {
        Ok(outcome) => {
            eprintln!("{}", outcome.verdict);
            match write_report(cli.globals.out.as_deref(), &outcome.envelope) {
                Ok(()) => outcome.exit,
                Err(fail) => {
                    eprintln!("error: {}", fail.message);
                    fail.code
                }
            }
        }
        Err(fail) => {
            eprintln!("error: {}", fail.message);
            let envelope = json!({
                "tool": { "name": "biiso", "version": env!("CARGO_PKG_VERSION") },
                "command": command_name,
                "error": fail.message,
            });
            let _ = write_report(cli.globals.out.as_deref(), &envelope);
            fail.code
        }
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Check(_) => "check",
        Command::Defect(_) => "defect",
        Command::Construct(_) => "construct",
        Command::Expand(_) => "expand",
        Command::ClassifyOp(_) => "classify-op",
        Command::VerifyT41(_) => "verify-t41",
        Command::VerifyT61(_) => "verify-t61",
        Command::SolveMetric(_) => "solve-metric",
        Command::Gen(_) => "gen",
    }
}

fn write_report(out: Option<&Path>, envelope: &Value) -> Result<(), CliFail> {
    let text = serde_json::to_string_pretty(envelope)
        .map_err(|e| CliFail { code: 3, message: format!("report serialization failed: {e}") })?;
    match out {
        Some(path) => fs::write(path, text + "\n").map_err(|e| CliFail {
            code: 3,
            message: format!("cannot write {}: {e}", path.display()),
        }),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Ok(()) => Ok(()),
                // a closed pipe downstream is not a reportable failure
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                Err(e) => {
                    Err(CliFail { code: 3, message: format!("cannot write report: {e}") })
                }
            }
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliFail> {
    fs::read_to_string(path)
        .map_err(|e| CliFail { code: 3, message: format!("cannot read {}: {e}", path.display()) })
}

/// Builds the working configuration from a pair document. The explicit
/// `--window` flag wins over the document; `--order` wins over `m_max`.
fn load_pair(args: &PairArgs, globals: &Globals) -> Result<PairConfig, CliFail> {
    let text = read_file(&args.pair)?;
    let parsed = jsonio::parse_pair(&text)?;
    let window = globals.window.or(parsed.window).unwrap_or(DEFAULT_WINDOW);
    let m_max = args.order.or(parsed.m_max).unwrap_or(4);
    let metric = positivity_certificate(parsed.metric_op, globals.tol, window)?;
    Ok(PairConfig::new(parsed.a, parsed.b, metric, m_max, window)?)
}

fn verdict_exit(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Holds => 0,
        Verdict::Fails => 1,
        Verdict::Inapplicable | Verdict::Inconclusive => 2,
    }
}

fn dispatch(cli: &Cli) -> Result<Outcome, CliFail> {
    let g = &cli.globals;
    match &cli.command {
        Command::Check(args) => {
            let cfg = load_pair(args, g)?;
            let report = classify_pair(&cfg, g.tol)?;
            let verdict = match report.min_annihilation_order {
                Some(m) => format!("annihilation order {m} (orders checked up to {})", cfg.m_max),
                None => format!("no annihilation up to order {}", cfg.m_max),
            };
            Ok(Outcome {
                envelope: jsonio::report_envelope(
                    "check",
                    json!({ "tol": g.tol, "window": cfg.window, "m_max": cfg.m_max }),
                    jsonio::defect_report_value(&report),
                ),
                verdict,
                exit: 0,
            })
        }
        Command::Defect(args) => {
            let cfg = load_pair(&args.pair, g)?;
            let m = cfg.m_max;
            let delta = defect_operator(&cfg.a, &cfg.b, cfg.metric.p(), m, cfg.window)?;
            let norm = delta.op_norm(cfg.window);
            let scale = cfg.defect_scale(m);
            let vanishes = norm <= g.tol * scale;
            let identity = match args.identity_n {
                Some(n) => {
                    let residual = binomial_identity_residual(&cfg, m, n, g.tol)?;
                    json!({ "n": n, "residual": residual })
                }
                None => Value::Null,
            };
            let verdict = if vanishes {
                format!("order-{m} defect vanishes (norm {norm:.3e} within {:.1e})", g.tol * scale)
            } else {
                format!("order-{m} defect norm {norm:.3e} exceeds {:.1e}", g.tol * scale)
            };
            Ok(Outcome {
                envelope: jsonio::report_envelope(
                    "defect",
                    json!({ "tol": g.tol, "window": cfg.window, "order": m }),
                    json!({
                        "norm": norm,
                        "scale": scale,
                        "vanishes": vanishes,
                        "identity": identity,
                    }),
                ),
                verdict,
                exit: 0,
            })
        }
        Command::Construct(args) => {
            let cfg = load_pair(&args.pair, g)?;
            let system =
                construct_system(&cfg.a, &cfg.b, &cfg.metric, args.n_max, g.tol, cfg.window)?;
            let verification = verify_system(&system, &cfg.metric, g.tol)?;
            let vscale = system
                .phis
                .iter()
                .chain(system.psis.iter())
                .map(|v| v.norm())
                .fold(1.0f64, f64::max);
            let ok = verification.max_residual() <= g.tol * vscale;
            let verdict = if ok {
                format!(
                    "biorthogonal system verified to index {} (max residual {:.3e})",
                    system.n_max,
                    verification.max_residual()
                )
            } else {
                format!(
                    "biorthogonal system constructed but verification fails (max residual {:.3e})",
                    verification.max_residual()
                )
            };
            Ok(Outcome {
                envelope: jsonio::report_envelope(
                    "construct",
                    json!({ "tol": g.tol, "window": cfg.window, "n_max": args.n_max }),
                    json!({
                        "system": jsonio::biortho_system_value(&system),
                        "verification": jsonio::biortho_verification_value(&verification),
                    }),
                ),
                verdict,
                exit: if ok { 0 } else { 1 },
            })
        }
        Command::Expand(args) => {
            let cfg = load_pair(&args.pair, g)?;
            let x = jsonio::parse_vector(&read_file(&args.x)?)?;
            let system =
                construct_system(&cfg.a, &cfg.b, &cfg.metric, args.k_max + 1, g.tol, cfg.window)?;
            let expansion = expand_coeffs(&system, &cfg.metric, &x, args.k_max)?;
            let mut actions = serde_json::Map::new();
            for (name, which) in [
                ("a", ExpansionOp::A),
                ("b", ExpansionOp::B),
                ("a_sharp", ExpansionOp::ASharp),
                ("b_sharp", ExpansionOp::BSharp),
            ] {
                let image = apply_via_expansion(&system, &cfg.metric, which, &x, args.k_max)?;
                actions.insert(name.into(), jsonio::vector_value(&image));
            }
            let verdict = format!(
                "expansion to index {}: reconstruction residuals {:.3e} and {:.3e}",
                args.k_max, expansion.residual_phi, expansion.residual_psi
            );
            Ok(Outcome {
                envelope: jsonio::report_envelope(
                    "expand",
                    json!({ "tol": g.tol, "window": cfg.window, "k_max": args.k_max }),
                    json!({
                        "expansion": jsonio::expansion_value(&expansion),
                        "actions": Value::Object(actions),
                    }),
                ),
                verdict,
                exit: 0,
            })
        }
        Command::ClassifyOp(args) => {
            let op = jsonio::parse_operator(&read_file(&args.operator)?)?;
            let window = g.window.unwrap_or(DEFAULT_WINDOW);
            if op.is_dense() {
                let report = class_flags(&op, g.tol, args.angles)?;
                let bound = power_bounded(&op, g.tol)?;
                let range = numerical_range(&op, args.angles)?;
                let mut held: Vec<&str> = Vec::new();
                for (name, flag) in [
                    ("normaloid", report.flags.normaloid),
                    ("convexoid", report.flags.convexoid),
                    ("spectraloid", report.flags.spectraloid),
                    ("normal", report.flags.normal),
                    ("unitary", report.flags.unitary),
                ] {
                    if flag {
                        held.push(name);
                    }
                }
                let verdict = if held.is_empty() {
                    "classes: none".to_string()
                } else {
                    format!("classes: {}", held.join(" "))
                };
                Ok(Outcome {
                    envelope: jsonio::report_envelope(
                        "classify-op",
                        json!({ "tol": g.tol, "angles": args.angles }),
                        json!({
                            "class": jsonio::class_report_value(&report),
                            "power_bounded": jsonio::bound_verdict_value(&bound),
                            "numerical_range": jsonio::range_value(&range),
                        }),
                    ),
                    verdict,
                    exit: 0,
                })
            } else {
                // structured operators expose norm and, for diagonals, radius
                let norm = op.op_norm(window);
                let radius = spectral_radius(&op, window).ok();
                let verdict = format!("structured operator: window norm {norm:.6e}");
                Ok(Outcome {
                    envelope: jsonio::report_envelope(
                        "classify-op",
                        json!({ "tol": g.tol, "window": window }),
                        json!({ "op_norm": norm, "spectral_radius": radius }),
                    ),
                    verdict,
                    exit: 0,
                })
            }
        }
        Command::VerifyT41(args) => {
            let cfg = load_pair(args, g)?;
            let report = verify_theorem_4_1(&cfg, g.tol)?;
            Ok(Outcome {
                envelope: jsonio::report_envelope(
                    "verify-t41",
                    json!({ "tol": g.tol, "window": cfg.window, "order": report.order_m }),
                    jsonio::theorem41_value(&report),
                ),
                verdict: format!("verdict: {}", jsonio::verdict_str(report.verdict)),
                exit: verdict_exit(report.verdict),
            })
        }
        Command::VerifyT61(args) => {
            let cfg = load_pair(args, g)?;
            let report = verify_theorem_6_1(&cfg, g.tol)?;
            Ok(Outcome {
                envelope: jsonio::report_envelope(
                    "verify-t61",
                    json!({ "tol": g.tol, "window": cfg.window }),
                    jsonio::theorem61_value(&report),
                ),
                verdict: format!("verdict: {}", jsonio::verdict_str(report.verdict)),
                exit: verdict_exit(report.verdict),
            })
        }
        Command::SolveMetric(args) => {
            let (a, b) = jsonio::parse_operator_pair(&read_file(&args.pair)?)?;
            let search = solve_metric(&a, &b, args.order, g.tol, g.seed)?;
            let verdict = format!(
                "outcome: {} ({} metrics, annihilated dimension {})",
                jsonio::search_outcome_str(search.outcome),
                search.metrics.len(),
                search.nullspace_dim
            );
            let exit = match search.outcome {
                SearchOutcome::FoundPositive => 0,
                _ => 1,
            };
            Ok(Outcome {
                envelope: jsonio::report_envelope(
                    "solve-metric",
                    json!({ "tol": g.tol, "order": args.order, "seed": g.seed }),
                    jsonio::metric_search_value(&search),
                ),
                verdict,
                exit,
            })
        }
        Command::Gen(args) => {
            let window = g.window.unwrap_or(DEFAULT_WINDOW);
            let (cfg, description) = match &args.kind {
                GenKind::Shift(shift) => {
                    let rule = match (&shift.preset, &shift.rule_file) {
                        (Some(Preset::Dyadic), None) => WeightRule::Geometric {
                            first: C64::new(1.0, 0.0),
                            ratio: C64::new(0.5, 0.0),
                        },
                        (Some(Preset::Constant), None) => {
                            WeightRule::Constant(C64::new(1.0, 0.0))
                        }
                        (Some(Preset::Harmonic), None) => {
                            WeightRule::RationalLinear { num: (0.0, 1.0), den: (1.0, 1.0) }
                        }
                        (None, Some(path)) => {
                            let text = read_file(path)?;
                            let dto: jsonio::RuleDto =
                                serde_json::from_str(&text).map_err(|e| CliFail {
                                    code: 3,
                                    message: format!(
                                        "rule parse failed at line {}, column {}: {e}",
                                        e.line(),
                                        e.column()
                                    ),
                                })?;
                            jsonio::rule_from_dto(&dto)
                        }
                        _ => {
                            return Err(CliFail {
                                code: 3,
                                message: "gen shift needs exactly one of --preset or --rule-file"
                                    .into(),
                            })
                        }
                    };
                    (gen_shift_pair(rule, window)?, "shift pair".to_string())
                }
                GenKind::Finite(finite) => {
                    let cfg = gen_finite_pair(finite.dim, g.seed, finite.normal)?;
                    let kind = if finite.normal { "unitary" } else { "conjugated unitary" };
                    (cfg, format!("finite pair (dim {}, {kind} A)", finite.dim))
                }
            };
            let document =
                jsonio::pair_document(&cfg.a, &cfg.b, &cfg.metric, cfg.m_max, cfg.window);
            let verdict = format!(
                "generated {description}; metric {}",
                jsonio::positivity_str(cfg.metric.positivity())
            );
            Ok(Outcome { envelope: document, verdict, exit: 0 })
        }
    }
}
