//! `amnet`: command-line front end.
//!
//! Results go to stdout as `VERDICT: <word>` followed by `key=value` lines.
//! Exit status: 0 verified or solved, 1 refuted or counterexample found,
//! 2 unknown, 3 runtime error, 4 usage error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use amnet::io::{parse_amn, parse_inline_vector, read_matrix, read_vector, serialize_amn};
use amnet::lyapunov::{
    cegis_with_progress, contractive_check, replay, CegisConfig, CegisOutcome, CertificateLog, Contractive, Domain,
    FSolve, LyapSpec, Polyhedron, Replay, Variant,
};
use amnet::mip::{derive_big_m, emit_lp, encode_mip, DEFAULT_EPS_STRICT};
use amnet::optimize::{minimize, BisectionConfig, MinResult};
use amnet::rational::{parse_rational, to_canonical_string, to_decimal_string, Matrix, Rational};
use amnet::smt::{emit_smtlib, encode_smt, Logic};
use amnet::solver::external::SOLVER_ENV;
use amnet::solver::{check_graph_membership, Backend, Verdict};
use amnet::train::{
    consistency_train, gd_train, Consistency, ConsistencyOptions, Dataset, Init, LearningRate, TrainConfig, TrainError,
};
use amnet::Network;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::Settings;

#[derive(Parser)]
#[command(name = "amnet", version, about = "Affine multiplexing networks: encode, verify, optimize, train")]
struct Cli {
    /// Config file with `solver`, `timeout` and `backend` keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// SMT solver binary (default: $AMNET_SMT_SOLVER, then z3 on PATH).
    #[arg(long, global = true)]
    solver: Option<PathBuf>,
    /// Per-query timeout in seconds (default: $AMNET_TIMEOUT, then 60).
    #[arg(long, global = true)]
    timeout: Option<f64>,
    /// Suppress heartbeat lines on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct BackendArg {
    /// enum, smt or auto.
    #[arg(long)]
    backend: Option<Backend>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a network at a point.
    Eval {
        net: PathBuf,
        /// Inline vector `1,2/3` or a CSV file.
        #[arg(long, allow_hyphen_values = true)]
        input: String,
    },
    /// Write the SMT-LIB or LP encoding of a network.
    Encode {
        format: Format,
        net: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Big-M constant, or `auto` to derive it from `--box`.
        #[arg(long, default_value = "auto")]
        big_m: String,
        /// Input box: `r`, `lo,hi` or `lo1,hi1,lo2,hi2,...`.
        #[arg(long = "box", allow_hyphen_values = true)]
        input_box: Option<String>,
    },
    /// Decide whether `(point, output)` lies on the graph of a network.
    Check {
        net: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, allow_hyphen_values = true)]
        output: String,
        #[command(flatten)]
        backend: BackendArg,
    },
    /// Minimize a scalar network subject to networks `≤ 0`.
    Minimize {
        #[arg(long)]
        objective: PathBuf,
        #[arg(long = "constraint")]
        constraints: Vec<PathBuf>,
        /// `lo,hi`.
        #[arg(long, allow_hyphen_values = true)]
        bracket: String,
        #[arg(long)]
        eps: String,
        #[command(flatten)]
        backend: BackendArg,
    },
    /// Fit network parameters to a dataset.
    #[command(subcommand)]
    Train(TrainCmd),
    /// Synthesize a max-of-affine Lyapunov function.
    Lyapunov(LyapunovArgs),
    /// Recheck a Lyapunov certificate log.
    Replay {
        #[arg(long)]
        dynamics: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[command(flatten)]
        backend: BackendArg,
    },
    /// Check λ-contractiveness of `{Gx ≤ w}` under saturated feedback.
    Contractive(ContractiveArgs),
    /// Print the resolved solver, timeout and backend.
    Config,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Smt,
    Mip,
}

#[derive(Subcommand)]
enum TrainCmd {
    /// Gradient descent on the least-squares loss.
    Gd {
        #[command(flatten)]
        common: TrainArgs,
        #[arg(long, default_value_t = 0.1)]
        rate: f64,
        /// Use `rate / (k + 1)` at step `k`.
        #[arg(long)]
        decay: bool,
        #[arg(long, default_value_t = 1000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-8)]
        grad_tol: f64,
        /// Random initialization seed; without it training starts from the
        /// network's parameters.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Exact parameter search with `‖y − φ(x)‖₁ ≤ eps` on every pair.
    Consistency {
        #[command(flatten)]
        common: TrainArgs,
        #[arg(long, default_value = "0")]
        eps: String,
        #[command(flatten)]
        backend: BackendArg,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    net: PathBuf,
    /// CSV with a header: input columns, then output columns.
    #[arg(long)]
    data: PathBuf,
    /// Write the fitted network here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Global,
    Roa,
    Decay,
    Invariant,
}

#[derive(Args)]
struct LyapunovArgs {
    #[arg(long)]
    dynamics: PathBuf,
    #[arg(long, value_enum, default_value = "roa")]
    variant: VariantArg,
    /// Decay factor for `--variant decay`.
    #[arg(long)]
    gamma: Option<String>,
    /// Domain: `r`, `lo,hi` or `lo1,hi1,...`.
    #[arg(long = "box", allow_hyphen_values = true)]
    domain: Option<String>,
    #[arg(long, default_value_t = 6)]
    pieces: usize,
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    /// Origin exclusion radius.
    #[arg(long)]
    eta: Option<String>,
    /// First counterexample (default: the upper corner of the box, or all ones).
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    budget: Option<f64>,
    /// Write the certificate log here.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArg,
}

#[derive(Args)]
struct ContractiveArgs {
    #[arg(long = "A")]
    a: PathBuf,
    #[arg(long = "B")]
    b: PathBuf,
    #[arg(long = "F")]
    f: PathBuf,
    #[arg(long = "G")]
    g: PathBuf,
    #[arg(long = "w")]
    w: PathBuf,
    #[arg(long)]
    lambda: String,
    /// Lower saturation magnitude: `u ≥ -umin`.
    #[arg(long, allow_hyphen_values = true)]
    umin: String,
    #[arg(long, allow_hyphen_values = true)]
    umax: String,
    /// Multiply `w` by this factor first.
    #[arg(long)]
    scale_w: Option<String>,
    #[command(flatten)]
    backend: BackendArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Solved = 0,
    Refuted = 1,
    Unknown = 2,
}

struct Report {
    verdict: &'static str,
    status: Status,
    fields: Vec<(String, String)>,
}

impl Report {
    fn new(verdict: &'static str, status: Status) -> Self {
        Self {
            verdict,
            status,
            fields: Vec::new(),
        }
    }

    fn field(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.fields.push((key.into(), value.to_string()));
        self
    }

    fn print(&self) {
        println!("VERDICT: {}", self.verdict);
        for (k, v) in &self.fields {
            println!("{k}={v}");
        }
    }
}

fn vec_text(v: &[Rational]) -> String {
    v.iter().map(to_canonical_string).collect::<Vec<_>>().join(",")
}

fn vec_decimal(v: &[Rational]) -> String {
    v.iter().map(|x| to_decimal_string(x, 9)).collect::<Vec<_>>().join(",")
}

fn rational(s: &str) -> Result<Rational> {
    parse_rational(s).with_context(|| format!("`{s}` is not a number"))
}

fn load_net(path: &Path) -> Result<Network> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_amn(&text).with_context(|| format!("{}", path.display()))
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))
}

/// Inline `1,2,3` or a CSV file holding one row or column.
fn vector_arg(s: &str) -> Result<Vec<Rational>> {
    let p = Path::new(s);
    if p.is_file() {
        return read_vector(open(p)?).with_context(|| s.to_string());
    }
    parse_inline_vector(s).with_context(|| format!("`{s}` is neither a file nor a vector"))
}

fn box_arg(s: &str, n: usize) -> Result<Domain> {
    let v = parse_inline_vector(s).with_context(|| format!("bad box `{s}`"))?;
    let b: Domain = match v.len() {
        1 => vec![(-v[0].clone(), v[0].clone()); n],
        2 => vec![(v[0].clone(), v[1].clone()); n],
        k if k == 2 * n => v.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect(),
        k => bail!("box has {k} numbers; expected 1, 2 or {}", 2 * n),
    };
    if b.iter().any(|(l, h)| l > h) {
        bail!("box has an empty side");
    }
    Ok(b)
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Prints `[amnet] <what>: <n>s elapsed` every ten seconds until dropped.
struct Heartbeat {
    stop: Arc<AtomicBool>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl Heartbeat {
    fn start(what: &str, quiet: bool) -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let thread = (!quiet).then(|| {
            let stop = stop.clone();
            let what = what.to_string();
            std::thread::spawn(move || {
                let start = Instant::now();
                let mut next = 10;
                while !stop.load(Ordering::Relaxed) {
                    std::thread::sleep(Duration::from_millis(100));
                    if start.elapsed().as_secs() >= next {
                        eprintln!("[amnet] {what}: {next}s elapsed");
                        next += 10;
                    }
                }
            })
        });
        Self { stop, thread }
    }
}

impl Drop for Heartbeat {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn backend(arg: &BackendArg, s: &Settings) -> Backend {
    arg.backend.unwrap_or(s.backend)
}

fn verdict_report(v: &Verdict, sat: &'static str, unsat: &'static str) -> Report {
    match v {
        Verdict::Sat(_) => Report::new(sat, Status::Solved),
        Verdict::Unsat => Report::new(unsat, Status::Refuted),
        Verdict::Unknown(r) => Report::new("unknown", Status::Unknown).field("reason", r),
    }
}

fn run(cli: Cli, s: &Settings) -> Result<Report> {
    let quiet = cli.quiet;
    match cli.cmd {
        Cmd::Eval { net, input } => {
            let net = load_net(&net)?;
            let x = vector_arg(&input)?;
            let y = net.evaluate(&x)?;
            Ok(Report::new("evaluated", Status::Solved)
                .field("output", vec_text(&y))
                .field("output_decimal", vec_decimal(&y)))
        }
        Cmd::Encode {
            format,
            net: path,
            out,
            big_m,
            input_box,
        } => {
            let net = load_net(&path)?;
            let (text, report) = match format {
                Format::Smt => {
                    let enc = encode_smt(&net, "x", "y");
                    let text = emit_smtlib(&enc, Logic::QfLra, &[])?;
                    let r = Report::new("encoded", Status::Solved)
                        .field("format", "smt-lib")
                        .field("aux_vars", enc.aux_count());
                    (text, r)
                }
                Format::Mip => {
                    let b = input_box.as_deref().map(|b| box_arg(b, net.input_dim())).transpose()?;
                    let m = if big_m == "auto" {
                        derive_big_m(&net, b.as_deref()).context("`--big-m auto` needs `--box`")?
                    } else {
                        rational(&big_m)?
                    };
                    let model = encode_mip(&net, &m)?;
                    let r = Report::new("encoded", Status::Solved)
                        .field("format", "lp")
                        .field("big_m", to_canonical_string(&m))
                        .field("binaries", model.bin_vars.len())
                        .field("rows", model.row_count());
                    (emit_lp(&model, DEFAULT_EPS_STRICT), r)
                }
            };
            match out {
                Some(p) => {
                    write_out(&p, &text)?;
                    Ok(report.field("file", p.display()))
                }
                None => {
                    print!("{text}");
                    Ok(report)
                }
            }
        }
        Cmd::Check {
            net,
            point,
            output,
            backend: b,
        } => {
            let net = load_net(&net)?;
            let (a, y) = (vector_arg(&point)?, vector_arg(&output)?);
            let _hb = Heartbeat::start("check", quiet);
            let v = check_graph_membership(&net, &a, &y, backend(&b, s))?;
            Ok(verdict_report(&v, "member", "not-member"))
        }
        Cmd::Minimize {
            objective,
            constraints,
            bracket,
            eps,
            backend: b,
        } => {
            let obj = load_net(&objective)?;
            let cons = constraints.iter().map(|p| load_net(p)).collect::<Result<Vec<_>>>()?;
            let br = parse_inline_vector(&bracket).with_context(|| format!("bad bracket `{bracket}`"))?;
            let [lo, hi] = <[Rational; 2]>::try_from(br).map_err(|_| anyhow::anyhow!("bracket needs `lo,hi`"))?;
            let mut cfg = BisectionConfig::new(lo, hi, rational(&eps)?).backend(backend(&b, s));
            cfg.timeout = s.timeout;
            let _hb = Heartbeat::start("minimize", quiet);
            Ok(match minimize(&obj, &cons, &cfg)? {
                MinResult::Optimal {
                    lower,
                    upper,
                    witness,
                    bisection_queries,
                    endpoint_queries,
                } => {
                    let value = obj.evaluate(&witness)?;
                    Report::new("optimal", Status::Solved)
                        .field("lower", to_canonical_string(&lower))
                        .field("upper", to_canonical_string(&upper))
                        .field("value", vec_text(&value))
                        .field("value_decimal", vec_decimal(&value))
                        .field("witness", vec_text(&witness))
                        .field("witness_decimal", vec_decimal(&witness))
                        .field("bisection_queries", bisection_queries)
                        .field("endpoint_queries", endpoint_queries)
                }
                MinResult::InfeasibleProblem => Report::new("infeasible", Status::Refuted),
                MinResult::BracketError => Report::new("bracket-error", Status::Refuted),
            })
        }
        Cmd::Train(t) => train(t, s, quiet),
        Cmd::Lyapunov(a) => lyapunov(a, s, quiet),
        Cmd::Replay {
            dynamics,
            log,
            backend: b,
        } => {
            let dynamics = load_net(&dynamics)?;
            let text = std::fs::read_to_string(&log).with_context(|| format!("reading {}", log.display()))?;
            let log = CertificateLog::parse(&text)?;
            let _hb = Heartbeat::start("replay", quiet);
            Ok(match replay(&log, dynamics, backend(&b, s), s.timeout)? {
                Replay::Valid => Report::new("valid", Status::Solved),
                Replay::BadCounterexample(i) => Report::new("invalid", Status::Refuted).field("bad_counterexample", i),
                Replay::NotCertified(FSolve::Counterexample(x)) => {
                    Report::new("invalid", Status::Refuted).field("counterexample", vec_text(&x))
                }
                Replay::NotCertified(FSolve::Unknown(r)) => Report::new("unknown", Status::Unknown).field("reason", r),
                Replay::NotCertified(FSolve::Certified) => Report::new("valid", Status::Solved),
            })
        }
        Cmd::Contractive(a) => contractive(a, s, quiet),
        Cmd::Config => Ok(Report::new("config", Status::Solved)
            .field("solver", s.solver.as_deref().map_or("none".into(), |p| p.display().to_string()))
            .field("timeout", s.timeout.as_secs_f64())
            .field("backend", format!("{:?}", s.backend).to_lowercase())),
    }
}

fn train(t: TrainCmd, s: &Settings, quiet: bool) -> Result<Report> {
    let common = match &t {
        TrainCmd::Gd { common, .. } | TrainCmd::Consistency { common, .. } => common,
    };
    let net = load_net(&common.net)?;
    let data = Dataset::from_csv(open(&common.data)?, net.input_dim())
        .with_context(|| format!("{}", common.data.display()))?;
    let out = common.out.clone();
    let save = |fitted: &Network| -> Result<()> {
        if let Some(p) = &out {
            write_out(p, &serialize_amn(fitted))?;
        }
        Ok(())
    };
    match t {
        TrainCmd::Gd {
            rate,
            decay,
            max_iters,
            grad_tol,
            seed,
            ..
        } => {
            let cfg = TrainConfig {
                rate: if decay { LearningRate::Decay(rate) } else { LearningRate::Constant(rate) },
                grad_tol,
                max_iters,
                init: seed.map_or(Init::Network, |seed| Init::Random { seed }),
            };
            let _hb = Heartbeat::start("train", quiet);
            match gd_train(&net, &data, &cfg) {
                Ok(r) => {
                    let fitted = net.bind_params(&r.parameters(&net))?;
                    save(&fitted)?;
                    let (verdict, status) = if r.converged {
                        ("converged", Status::Solved)
                    } else {
                        ("not-converged", Status::Unknown)
                    };
                    Ok(Report::new(verdict, status)
                        .field("iterations", r.iterations)
                        .field("loss_initial", r.loss_trace.first().copied().unwrap_or(f64::NAN))
                        .field("loss_final", r.loss_trace.last().copied().unwrap_or(f64::NAN))
                        .field("theta", r.theta.iter().map(f64::to_string).collect::<Vec<_>>().join(",")))
                }
                Err(TrainError::Divergence { iteration, loss }) => Ok(Report::new("diverged", Status::Unknown)
                    .field("iteration", iteration)
                    .field("loss", loss)),
                Err(e) => Err(e.into()),
            }
        }
        TrainCmd::Consistency { eps, backend: b, .. } => {
            let opts = ConsistencyOptions {
                backend: backend(&b, s),
                timeout: s.timeout,
                solver: s.solver.clone(),
            };
            let _hb = Heartbeat::start("train", quiet);
            Ok(match consistency_train(&net, &data, &rational(&eps)?, &opts)? {
                Consistency::Params(p) => {
                    let fitted = net.bind_params(&p)?;
                    save(&fitted)?;
                    Report::new("consistent", Status::Solved).field("theta", vec_text(&p.theta))
                }
                Consistency::Inconsistent => Report::new("inconsistent", Status::Refuted),
                Consistency::Unknown(r) => Report::new("unknown", Status::Unknown).field("reason", r),
            })
        }
    }
}

fn lyapunov(a: LyapunovArgs, s: &Settings, quiet: bool) -> Result<Report> {
    let dynamics = load_net(&a.dynamics)?;
    let n = dynamics.input_dim();
    let domain = a.domain.as_deref().map(|d| box_arg(d, n)).transpose()?;
    let variant = match a.variant {
        VariantArg::Global => Variant::Global,
        VariantArg::Roa => Variant::Roa,
        VariantArg::Invariant => Variant::InvariantSet,
        VariantArg::Decay => Variant::DecayRate(rational(a.gamma.as_deref().context("`--variant decay` needs `--gamma`")?)?),
    };
    let x0 = match (&a.x0, &domain) {
        (Some(x), _) => vector_arg(x)?,
        (None, Some(d)) => d.iter().map(|(_, h)| h.clone()).collect(),
        (None, None) => vec![Rational::from_integer(1.into()); n],
    };
    let mut spec = LyapSpec::new(variant, dynamics, domain)?;
    if let Some(eta) = &a.eta {
        spec = spec.with_eta(rational(eta)?);
    }
    let mut cfg = CegisConfig::new(a.pieces, a.max_iters, x0);
    cfg.backend = backend(&a.backend, s);
    if cfg.backend == Backend::Auto {
        cfg.backend = Backend::Enumerate;
    }
    cfg.timeout = s.timeout;
    cfg.budget = a.budget.map(Duration::from_secs_f64);
    let start = Instant::now();
    let mut beat = |st: &amnet::lyapunov::CegisState| {
        if !quiet {
            eprintln!(
                "[amnet] lyapunov: iteration {} counterexamples {} {:.1}s",
                st.iteration,
                st.counterexamples.len(),
                start.elapsed().as_secs_f64()
            );
        }
    };
    let outcome = cegis_with_progress(&spec, &cfg, &mut beat)?;
    Ok(match outcome {
        CegisOutcome::Stable { v, log } => {
            if let Some(p) = &a.log {
                write_out(p, &log.write())?;
            }
            let mut r = Report::new("stable", Status::Solved)
                .field("iterations", log.history.len())
                .field("pieces", v.pieces().len());
            for (i, (g, h)) in v.pieces().iter().enumerate() {
                r = r.field(format!("piece.{i}"), format!("{};{}", vec_text(g), to_canonical_string(h)));
            }
            r
        }
        CegisOutcome::Unknown { state, reason } => Report::new("unknown", Status::Unknown)
            .field("reason", reason)
            .field("iterations", state.iteration)
            .field("counterexamples", state.counterexamples.len()),
    })
}

fn contractive(a: ContractiveArgs, s: &Settings, quiet: bool) -> Result<Report> {
    let m = |p: &Path| -> Result<Matrix> { read_matrix(open(p)?).with_context(|| format!("{}", p.display())) };
    let v = |p: &Path| -> Result<Vec<Rational>> { read_vector(open(p)?).with_context(|| format!("{}", p.display())) };
    let (am, b, f, g, w) = (m(&a.a)?, v(&a.b)?, v(&a.f)?, m(&a.g)?, v(&a.w)?);
    let mut poly = Polyhedron::new(g, w)?;
    if let Some(d) = &a.scale_w {
        poly = poly.scaled_w(&rational(d)?);
    }
    let phi = amnet::lyapunov::saturated_feedback(&am, &b, &f, &rational(&a.umin)?, &rational(&a.umax)?)?;
    let lambda = rational(&a.lambda)?;
    let _hb = Heartbeat::start("contractive", quiet);
    Ok(match contractive_check(&phi, &poly, &lambda, backend(&a.backend, s), s.timeout)? {
        Contractive::Verified => Report::new("verified", Status::Solved),
        Contractive::Refuted { x, x_plus, epsilon } => Report::new("refuted", Status::Refuted)
            .field("x", vec_text(&x))
            .field("x_decimal", vec_decimal(&x))
            .field("x_plus", vec_text(&x_plus))
            .field("x_plus_decimal", vec_decimal(&x_plus))
            .field("epsilon", to_canonical_string(&epsilon))
            .field("epsilon_decimal", to_decimal_string(&epsilon, 9)),
        Contractive::Unknown(r) => Report::new("unknown", Status::Unknown).field("reason", r),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 4 } else { 0 });
        }
    };
    let settings = match config::resolve(cli.solver.clone(), cli.timeout, cli.config.as_deref()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(4);
        }
    };
    if let Some(p) = &settings.solver {
        // library calls locate the solver through the environment
        std::env::set_var(SOLVER_ENV, p);
    }
    match run(cli, &settings) {
        Ok(r) => {
            r.print();
            ExitCode::from(r.status as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
