//! Command line front end: reads JSON specs, runs one computation and writes
//! CSV or JSON, plus a JSON sidecar next to any `--out` file.

mod input;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use temperfield::fields::{
    check_lambda_limit, check_scaling, check_stationary_increments, check_tangent, estimate_lcf_envelope, field_lcf,
    kernel_integrand, CheckRow, FieldSpec,
};
use temperfield::integrability::{estimate_matrix_floor, membership, quasi_norm, IntegrandFn};
use temperfield::quad::QuadratureConfig;
use temperfield::simulate::{sample_field_path, spec_hash, SimConfig};
use temperfield::tstable::{envelope_constants, g_fun, gamma_fn, Lcf, SpectralMeasure, StableParams};

use input::{lin_grid, load_any, load_field, log_grid, parse_list, parse_points, query, read_spec_text, SpecFile};

#[derive(Parser, Debug)]
#[command(name = "temperfield", version, about = "Tempered stable random measures and fields")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Global {
    /// JSON spec (field spec, or simple function for quasi-norm and membership).
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Output file; stdout when absent. A `<out>.json` sidecar records the run.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for batch evaluation and sampling.
    #[arg(long, global = true, env = "TEMPERFIELD_THREADS")]
    threads: Option<usize>,
    /// Relative quadrature tolerance (default 1e-10 for n = 1, 1e-6 otherwise).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    box_radius: Option<f64>,
    /// Jump cutoff for simulation.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Spec overrides `key=value` applied before validation; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Log-characteristic function ψ along a direction on a log grid.
    Lcf {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Direction of the grid, comma separated (default first basis vector).
        #[arg(long)]
        direction: Option<String>,
        #[arg(long, default_value_t = 1e-3)]
        u_min: f64,
        #[arg(long, default_value_t = 1e3)]
        u_max: f64,
        #[arg(long, default_value_t = 61)]
        points: usize,
    },
    /// Λ of the field for points `--t` and directions `--u` (`a,b;c,d`).
    FieldLcf(QueryArgs),
    /// Quasi-norm of a simple function or of the field kernel at `--t`.
    QuasiNorm(KernelArgs),
    /// Membership of a simple function or of the field kernel at `--t`.
    Membership(KernelArgs),
    /// Sample paths on a grid as CSV `replicate_id,t_1..t_n,X_1..X_d`.
    Simulate {
        /// Grid points `a,b;c,d`; overrides the linear grid.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        t_min: f64,
        #[arg(long, default_value_t = 1.0)]
        t_max: f64,
        /// Points of the linear grid along the first axis.
        #[arg(long, default_value_t = 11)]
        points: usize,
        #[arg(long, default_value_t = 100)]
        replicates: usize,
        #[arg(long)]
        no_refinement: bool,
        /// Share of H(f, 1) allowed outside the sampling box.
        #[arg(long, default_value_t = 1e-3)]
        tail_tol: f64,
    },
    /// Residual tables for the analytic identities.
    Check {
        #[arg(value_enum)]
        which: CheckKind,
        #[command(flatten)]
        query: QueryArgs,
        /// Scale factors for scaling and tangent checks.
        #[arg(long)]
        c: Option<String>,
        /// Shift `a,b` (stationarity).
        #[arg(long)]
        h: Option<String>,
        /// Tempering values for the λ limit.
        #[arg(long)]
        lambdas: Option<String>,
        /// Base point for the tangent check.
        #[arg(long)]
        x: Option<String>,
    },
    /// Table of g(z) with its two asymptotic normalisations.
    Gfun {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-8)]
        z_min: f64,
        #[arg(long, default_value_t = 1e8)]
        z_max: f64,
        #[arg(long, default_value_t = 33)]
        points: usize,
    },
    /// Envelope constants of g and empirical K and T.
    Constants {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

#[derive(Args, Debug, Clone)]
struct QueryArgs {
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    u: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct KernelArgs {
    /// Kernel point when the spec is a field.
    #[arg(long)]
    t: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum CheckKind {
    Scaling,
    Stationarity,
    LambdaLimit,
    Tangent,
}

/// Exit status for a failed run: 2 for gate violations, 3 for numerical failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<temperfield::Error>() {
        Some(temperfield::Error::Gate(_)) => 2,
        Some(temperfield::Error::NonConvergence(_)) | Some(temperfield::Error::Diverged(_)) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("cannot configure worker threads")?;
    }
    let g = &cli.global;
    let mut out = Output::new(g.out.as_deref())?;
    let extra = match &cli.command {
        Command::Lcf { alpha, lambda, direction, u_min, u_max, points } => {
            let (params, sigma) = measure(g, *alpha, *lambda)?;
            let dir = match direction {
                Some(s) => parse_list(s)?,
                None => unit(sigma.dim()),
            };
            if dir.len() != sigma.dim() {
                bail!("direction has {} entries, the measure lives in dimension {}", dir.len(), sigma.dim());
            }
            let lcf = Lcf::new(params, &sigma)?;
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["u", "psi"])?;
            for u in log_grid(*u_min, *u_max, *points)? {
                let arg: Vec<f64> = dir.iter().map(|x| x * u).collect();
                w.write_record([fmt(u), fmt(lcf.eval(&arg)?)])?;
            }
            w.flush()?;
            json!({"alpha": params.alpha, "lambda": params.lambda})
        }
        Command::FieldLcf(q) => {
            let spec = field(g)?;
            let query = query(q.t.as_deref(), q.u.as_deref(), spec.n, spec.d)?;
            let r = field_lcf(&spec, &query, &quad(g, spec.n)?)?;
            let v = json!({"query": query, "value": r.value, "error": r.error, "converged": r.converged});
            writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
            json!({"spec_hash": hash_of(g)?})
        }
        Command::QuasiNorm(k) => {
            let (f, params, sigma, n) = integrand(g, k)?;
            let r = quasi_norm(&f, &params, &sigma, &quad(g, n)?)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&r)?)?;
            json!({"spec_hash": hash_of(g)?})
        }
        Command::Membership(k) => {
            let (f, params, sigma, n) = integrand(g, k)?;
            let r = membership(&f, &params, &sigma, &quad(g, n)?)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&r)?)?;
            json!({"spec_hash": hash_of(g)?})
        }
        Command::Simulate { grid, t_min, t_max, points, replicates, no_refinement, tail_tol } => {
            let spec = field(g)?;
            let t_grid = match grid {
                Some(s) => parse_points(s)?,
                None => lin_grid(*t_min, *t_max, *points)?
                    .into_iter()
                    .map(|x| {
                        let mut t = vec![0.0; spec.n];
                        t[0] = x;
                        t
                    })
                    .collect(),
            };
            let cfg = SimConfig {
                jump_cutoff_eps: g.eps.unwrap_or(temperfield::simulate::DEFAULT_EPS),
                domain_box: None,
                n_replicates: *replicates,
                seed: g.seed,
                gaussian_refinement: !no_refinement,
                tail_tol: *tail_tol,
            };
            let batch = sample_field_path(&spec, &t_grid, &cfg, &quad(g, spec.n)?)?;
            let mut w = csv::Writer::from_writer(&mut out);
            let mut header = vec!["replicate_id".to_string()];
            header.extend((1..=spec.n).map(|i| format!("t_{i}")));
            header.extend((1..=spec.d).map(|i| format!("X_{i}")));
            w.write_record(&header)?;
            for (r, row) in batch.values.iter().enumerate() {
                for (t, x) in batch.t_grid.iter().zip(row) {
                    let mut rec = vec![r.to_string()];
                    rec.extend(t.iter().map(|v| fmt(*v)));
                    rec.extend(x.iter().map(|v| fmt(*v)));
                    w.write_record(&rec)?;
                }
            }
            w.flush()?;
            for warning in &batch.meta.warnings {
                log::warn!("{warning}");
            }
            json!({"sim": cfg, "meta": batch.meta})
        }
        Command::Check { which, query: q, c, h, lambdas, x } => {
            let spec = field(g)?;
            let query = query(q.t.as_deref(), q.u.as_deref(), spec.n, spec.d)?;
            let qc = quad(g, spec.n)?;
            let rows: Vec<CheckRow> = match which {
                CheckKind::Scaling => {
                    let cs = list_or(c.as_deref(), &[0.5, 2.0, 4.0])?;
                    cs.iter().map(|&c| check_scaling(&spec, c, &query, &qc)).collect::<temperfield::Result<_>>()?
                }
                CheckKind::Stationarity => {
                    let shifts = match h {
                        Some(s) => parse_points(s)?,
                        None => [1.0, -1.0, 2.0, -2.0].iter().map(|v| vec![*v; spec.n]).collect(),
                    };
                    shifts
                        .iter()
                        .map(|hv| check_stationary_increments(&spec, hv, &query, &qc))
                        .collect::<temperfield::Result<_>>()?
                }
                CheckKind::LambdaLimit => check_lambda_limit(&spec, &list_or(lambdas.as_deref(), &[1.0, 0.1, 0.01])?, &query, &qc)?,
                CheckKind::Tangent => {
                    let base = match x {
                        Some(s) => parse_list(s)?,
                        None => vec![0.0; spec.n],
                    };
                    let default: &[f64] = if spec.kind == temperfield::fields::FieldKind::Harmonizable { &[1.0, 10.0, 100.0] } else { &[1.0, 0.1, 0.01] };
                    check_tangent(&spec, &base, &list_or(c.as_deref(), default)?, &query, &qc)?
                }
            };
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["param", "left", "right", "residual", "error", "converged"])?;
            for r in &rows {
                w.write_record([fmt(r.param), fmt(r.left), fmt(r.right), fmt(r.residual), fmt(r.error), r.converged.to_string()])?;
            }
            w.flush()?;
            json!({"spec_hash": hash_of(g)?, "query": query})
        }
        Command::Gfun { alpha, z_min, z_max, points } => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["z", "g", "z_alpha_g", "z2_g"])?;
            for z in log_grid(*z_min, *z_max, *points)? {
                let v = g_fun(*alpha, z)?;
                w.write_record([fmt(z), fmt(v), fmt(z.powf(*alpha) * v), fmt(z * z * v)])?;
            }
            w.flush()?;
            json!({"small_z_limit": 1.0 / (2.0 - alpha) + 1.0 / alpha, "large_z_limit": gamma_fn(2.0 - alpha)})
        }
        Command::Constants { alpha, lambda, samples } => {
            let (params, sigma) = measure(g, *alpha, *lambda)?;
            let env = envelope_constants(params.alpha)?;
            let k = if params.lambda > 0.0 { Some(estimate_matrix_floor(&params, &sigma, *samples, g.seed)?.k_est) } else { None };
            let t = estimate_lcf_envelope(&params, &sigma, *samples, g.seed)?.t_est;
            let v = json!({"alpha": env.alpha, "lambda": params.lambda, "c1": env.c1, "c2": env.c2,
                "quasi_tri_a": env.quasi_tri_a, "k_est": k, "t_est": t, "samples": samples});
            writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
            json!({})
        }
    };
    out.flush()?;
    if let Some(path) = &g.out {
        write_sidecar(path, cli, extra)?;
    }
    Ok(())
}

/// Shortest round-trip representation, so CSV output is reproducible byte for byte.
fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn unit(d: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[0] = 1.0;
    e
}

fn list_or(s: Option<&str>, default: &[f64]) -> Result<Vec<f64>> {
    match s {
        Some(s) => parse_list(s),
        None => Ok(default.to_vec()),
    }
}

fn field(g: &Global) -> Result<FieldSpec> {
    let path = g.spec.as_deref().ok_or_else(|| anyhow!("this command needs --spec"))?;
    let spec = load_field(path, &g.overrides)?;
    for w in &spec.warnings {
        log::warn!("{w}");
    }
    Ok(spec)
}

fn hash_of(g: &Global) -> Result<Option<String>> {
    match &g.spec {
        Some(p) => Ok(Some(spec_hash(&read_spec_text(p, &g.overrides)?))),
        None => Ok(None),
    }
}

/// Params and measure from the spec when given, else the symmetric 1-D measure with total mass one.
fn measure(g: &Global, alpha: Option<f64>, lambda: Option<f64>) -> Result<(StableParams, SpectralMeasure)> {
    let (base, sigma) = match &g.spec {
        Some(p) => match load_any(p, &g.overrides)? {
            SpecFile::Field(s) => (Some(s.params), s.sigma.clone()),
            SpecFile::Simple(s) => (Some(s.params()?), s.sigma.clone()),
        },
        None => (None, SpectralMeasure::symmetric_1d(0.5)?),
    };
    let alpha = alpha.or(base.map(|p| p.alpha)).ok_or_else(|| anyhow!("give --alpha or a --spec"))?;
    let lambda = lambda.or(base.map(|p| p.lambda)).unwrap_or(1.0);
    Ok((StableParams::new(alpha, lambda)?, sigma))
}

fn integrand(g: &Global, k: &KernelArgs) -> Result<(IntegrandFn, StableParams, SpectralMeasure, usize)> {
    let path = g.spec.as_deref().ok_or_else(|| anyhow!("this command needs --spec"))?;
    match load_any(path, &g.overrides)? {
        SpecFile::Simple(s) => {
            let n = s.function.n;
            Ok((s.function.to_integrand(), s.params()?, s.sigma.clone(), n))
        }
        SpecFile::Field(spec) => {
            let t = match &k.t {
                Some(s) => parse_list(s)?,
                None => vec![1.0; spec.n],
            };
            let f = kernel_integrand(&spec, &t)?;
            // kernel tempering pairs with the stable measure
            let params = match spec.kind {
                temperfield::fields::FieldKind::KernelTemperedMa => spec.params.with_lambda(0.0),
                _ => spec.params,
            };
            Ok((f, params, spec.sigma.clone(), spec.n))
        }
    }
}

fn quad(g: &Global, n: usize) -> Result<QuadratureConfig> {
    let mut q = QuadratureConfig::default().with_tol(g.tol.unwrap_or(if n == 1 { 1e-10 } else { 1e-6 }));
    if let Some(r) = g.box_radius {
        q = q.with_box(r);
    }
    q.validate()?;
    Ok(q)
}

fn write_sidecar(out: &Path, cli: &Cli, extra: serde_json::Value) -> Result<()> {
    let mut name = out.as_os_str().to_owned();
    name.push(".json");
    let side = json!({
        "command": format!("{:?}", cli.command),
        "flags": cli.global,
        "version": env!("CARGO_PKG_VERSION"),
        "result": extra,
    });
    let f = File::create(&name).with_context(|| format!("cannot create {}", Path::new(&name).display()))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &side)?;
    Ok(())
}

enum Output {
    Stdout(io::Stdout),
    File(BufWriter<File>),
}

impl Output {
    fn new(path: Option<&Path>) -> Result<Self> {
        Ok(match path {
            Some(p) => Output::File(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
            None => Output::Stdout(io::stdout()),
        })
    }
}

impl Write for Output {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            Output::Stdout(s) => s.write(buf),
            Output::File(f) => f.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            Output::Stdout(s) => s.flush(),
            Output::File(f) => f.flush(),
        }
    }
}
