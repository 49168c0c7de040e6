//! `minkbill` — capacities, billiard traces, length-bound property suites,
//! and volume-product reports for centrally symmetric convex bodies.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 a monitored mathematical
//! claim failed (route disagreement, property violation, or a bounds verdict
//! of "violated"). CI pipelines can therefore gate on 2 without parsing text.

mod suites;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;

use minkbill_core::billiard::{bounce_map, BounceOutcome};
use minkbill_core::capacity::{hz_capacity, CapacityEstimate, SearchOptions};
use minkbill_core::exports::{csv_document, trajectory_svg};
use minkbill_core::mahler::{mahler_bounds_check, Verdict, VolumeOptions};
use minkbill_core::{ConvexBody, Tolerances};

#[derive(Parser)]
#[command(
    name = "minkbill",
    version = concat!(env!("CARGO_PKG_VERSION"), " (", env!("GIT_DESCRIBE"), ")"),
    about = "Shortest Minkowski billiard trajectories and volume-product checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Capacity of K x T via trajectory search, cross-checked by 4·inradius
    Capacity(CapacityArgs),
    /// Randomized property suites for the length-bound toolchain
    Verify(VerifyArgs),
    /// Volume product of a body and the classical bounds on it
    Mahler(MahlerArgs),
    /// Iterate the bounce map and export the orbit
    Trace(TraceArgs),
    /// Largest multiple of one body inscribed in another
    Inradius(InradiusArgs),
}

/// Tolerance overrides shared by the numeric subcommands.
#[derive(Args, Clone, Default)]
struct TolArgs {
    /// Override the boundary-membership tolerance
    #[arg(long, value_name = "EPS")]
    boundary_tol: Option<f64>,
    /// Override the criticality-residual tolerance
    #[arg(long, value_name = "EPS")]
    criticality_tol: Option<f64>,
    /// Override the descent stopping width
    #[arg(long, value_name = "EPS")]
    search_tol: Option<f64>,
    /// Override the hull-certificate tolerance
    #[arg(long, value_name = "EPS")]
    hull_tol: Option<f64>,
}

impl TolArgs {
    fn apply(&self) -> (Tolerances, BTreeMap<String, f64>) {
        let mut tol = Tolerances::default();
        let mut overrides = BTreeMap::new();
        if let Some(v) = self.boundary_tol {
            tol.boundary_tol = v;
            overrides.insert("boundary_tol".into(), v);
        }
        if let Some(v) = self.criticality_tol {
            tol.criticality_tol = v;
            overrides.insert("criticality_tol".into(), v);
        }
        if let Some(v) = self.search_tol {
            tol.search_tol = v;
            overrides.insert("search_tol".into(), v);
        }
        if let Some(v) = self.hull_tol {
            tol.hull_tol = v;
            overrides.insert("hull_tol".into(), v);
        }
        (tol, overrides)
    }
}

#[derive(Args)]
struct CapacityArgs {
    /// Body file for the table K (JSON)
    #[arg(long, value_name = "FILE")]
    body: PathBuf,
    /// Use T = polar(K)
    #[arg(long, conflicts_with = "body2")]
    dual: bool,
    /// Body file for the geometry T (JSON)
    #[arg(long, value_name = "FILE")]
    body2: Option<PathBuf>,
    /// Largest trajectory length searched
    #[arg(long, default_value_t = 5)]
    mmax: usize,
    /// Multistarts per branch
    #[arg(long, default_value_t = 64)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the per-branch results table here
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Write a figure of the witness orbit here (plane bodies only)
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// One of: len-bound, normal-bound, shortcut, split, cover, criticality, all
    #[arg(long)]
    suite: String,
    /// Instances per suite
    #[arg(long, default_value_t = 1000)]
    instances: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the per-instance table here
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Args)]
struct MahlerArgs {
    /// Body file (JSON)
    #[arg(long, value_name = "FILE")]
    body: PathBuf,
    /// Monte Carlo sample budget (plain or scientific, e.g. 1e7)
    #[arg(long, default_value = "1e7", value_parser = parse_samples)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report table here
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    /// Body file for the table K (JSON)
    #[arg(long, value_name = "FILE")]
    body: PathBuf,
    /// Use T = polar(K)
    #[arg(long, conflicts_with = "body2")]
    dual: bool,
    /// Body file for the geometry T (JSON)
    #[arg(long, value_name = "FILE")]
    body2: Option<PathBuf>,
    /// Number of bounces to iterate
    #[arg(long, default_value_t = 20)]
    bounces: usize,
    /// Starting point on the table boundary, comma-separated coordinates
    #[arg(long, value_parser = parse_vector, value_name = "X,Y,..")]
    q: Option<Vec<f64>>,
    /// Starting momentum on the geometry boundary, comma-separated
    #[arg(long, value_parser = parse_vector, value_name = "X,Y,..")]
    p: Option<Vec<f64>>,
    /// Seed for the default starting state
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the orbit table here
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Write the orbit figure here (plane bodies only)
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Args)]
struct InradiusArgs {
    /// Body file for the outer body (JSON)
    #[arg(long, value_name = "FILE")]
    body: PathBuf,
    /// Body file for the inscribed shape (default: Euclidean ball)
    #[arg(long, value_name = "FILE")]
    wrt: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the result table here
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(flatten)]
    tol: TolArgs,
}

fn parse_samples(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        if v == 0 {
            return Err("sample budget must be positive".into());
        }
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(f) if f.is_finite() && f >= 1.0 && f <= 1e12 => Ok(f.round() as u64),
        _ => Err(format!("cannot read '{s}' as a sample count")),
    }
}

fn parse_vector(s: &str) -> Result<Vec<f64>, String> {
    let coords: Result<Vec<f64>, _> = s.split(',').map(|c| c.trim().parse::<f64>()).collect();
    match coords {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(format!("cannot read '{s}' as comma-separated coordinates")),
    }
}

/// Everything needed to reproduce a run, embedded in each output file.
#[derive(Serialize)]
struct RunManifest {
    subcommand: String,
    bodies: Vec<String>,
    seed: u64,
    tolerance_overrides: BTreeMap<String, f64>,
    outputs: Vec<String>,
    timestamp: String,
    git_describe: String,
    extra: BTreeMap<String, String>,
}

impl RunManifest {
    fn new(subcommand: &str, bodies: &[&Path], seed: u64, overrides: BTreeMap<String, f64>) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            bodies: bodies.iter().map(|p| p.display().to_string()).collect(),
            seed,
            tolerance_overrides: overrides,
            outputs: Vec::new(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            git_describe: env!("GIT_DESCRIBE").to_string(),
            extra: BTreeMap::new(),
        }
    }

    fn with_outputs(mut self, outputs: &[&Option<PathBuf>]) -> Self {
        self.outputs = outputs
            .iter()
            .filter_map(|o| o.as_ref().map(|p| p.display().to_string()))
            .collect();
        self
    }

    fn note(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.insert(key.to_string(), value.to_string());
        self
    }

    fn json(&self) -> anyhow::Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    init_thread_pool();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if informational { 0 } else { 1 };
        }
    };
    let outcome = match cli.command {
        Command::Capacity(args) => cmd_capacity(args),
        Command::Verify(args) => suites::cmd_verify(args),
        Command::Mahler(args) => cmd_mahler(args),
        Command::Trace(args) => cmd_trace(args),
        Command::Inradius(args) => cmd_inradius(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    }
}

/// `MINKBILL_THREADS` caps the worker count; unset means the rayon default.
fn init_thread_pool() {
    if let Ok(raw) = std::env::var("MINKBILL_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring MINKBILL_THREADS={raw:?} (want a positive integer)"),
        }
    }
}

fn load_body(path: &Path) -> anyhow::Result<ConvexBody> {
    ConvexBody::load_json(path).with_context(|| format!("reading body file {}", path.display()))
}

/// Resolves the second factor: `--dual` takes the polar, otherwise `--body2`.
fn resolve_pair(
    k: &ConvexBody,
    dual: bool,
    body2: &Option<PathBuf>,
) -> anyhow::Result<(ConvexBody, Option<PathBuf>)> {
    match (dual, body2) {
        (true, None) => Ok((k.polar(), None)),
        (false, Some(path)) => Ok((load_body(path)?, Some(path.clone()))),
        (false, None) => bail!("pass either --dual or --body2 FILE"),
        (true, Some(_)) => unreachable!("clap conflicts_with guards this"),
    }
}

fn write_text(path: &Path, content: &str) -> anyhow::Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn fmt_g(v: f64) -> String {
    format!("{v:.12}")
}

// ---------------------------------------------------------------------------
// capacity
// ---------------------------------------------------------------------------

fn cmd_capacity(args: CapacityArgs) -> anyhow::Result<i32> {
    let k = load_body(&args.body)?;
    let (t, t_path) = resolve_pair(&k, args.dual, &args.body2)?;
    let (tol, overrides) = args.tol.apply();
    let opts = SearchOptions { m_max: args.mmax, starts: args.starts, seed: args.seed, tol };

    let est = hz_capacity(&k, &t, &opts)?;
    print_capacity(&est, args.dual);

    let mut body_paths: Vec<&Path> = vec![&args.body];
    if let Some(p) = &t_path {
        body_paths.push(p);
    }
    let manifest = RunManifest::new("capacity", &body_paths, args.seed, overrides)
        .with_outputs(&[&args.out, &args.svg])
        .note("m_max", args.mmax)
        .note("starts", args.starts)
        .note("dual", args.dual)
        .json()?;

    if let Some(out) = &args.out {
        let mut rows = Vec::new();
        for (m, best) in &est.diagnostics.best_per_m {
            rows.push(vec![
                m.to_string(),
                fmt_g(*best),
                est.diagnostics.converged_starts.to_string(),
                format!("{:.3e}", est.diagnostics.witness_residual),
            ]);
        }
        let doc = csv_document(&manifest, &["m", "best_length", "converged_starts", "residual_max"], &rows)?;
        write_text(out, &doc)?;
    }
    if let Some(svg_path) = &args.svg {
        if k.dim() != 2 {
            bail!("--svg needs plane bodies, got dimension {}", k.dim());
        }
        let svg = trajectory_svg(&k, Some(&t), &est.witness.bounce_points, true, &manifest)?;
        write_text(svg_path, &svg)?;
    }

    if let Some(note) = &est.diagnostics.falsification {
        println!("FALSIFICATION-CANDIDATE: {note}");
        return Ok(2);
    }
    Ok(0)
}

fn print_capacity(est: &CapacityEstimate, dual: bool) {
    println!("capacity estimate: {}", fmt_g(est.value));
    println!("method: {:?}", est.method);
    if let Some(tb) = est.diagnostics.two_bounce_value {
        println!("two-bounce cross-check (4·inradius): {}", fmt_g(tb));
    }
    if dual {
        println!("dual pair: expected value 4 for any symmetric table");
    }
    for (m, best) in &est.diagnostics.best_per_m {
        println!("  m={m}: best length {}", fmt_g(*best));
    }
    let collapsed = est.diagnostics.records.iter().filter(|r| r.collapsed()).count();
    if !est.diagnostics.records.is_empty() {
        println!(
            "branch runs: {} total, {} collapsed to a pair, {} converged",
            est.diagnostics.records.len(),
            collapsed,
            est.diagnostics.converged_starts
        );
    }
    println!(
        "witness: {} bounces, reflection residual {:.3e}, min multiplier {:.3e}",
        est.witness.bounce_count(),
        est.diagnostics.witness_residual,
        est.diagnostics.witness_min_multiplier
    );
    if let Some(s) = &est.diagnostics.smoothing {
        println!(
            "smoothing: values {:?} at sharpness {:?}, extrapolated {}, reference {}",
            s.values,
            s.sharpness,
            fmt_g(s.extrapolated),
            fmt_g(s.reference_two_bounce)
        );
    }
}

// ---------------------------------------------------------------------------
// mahler
// ---------------------------------------------------------------------------

fn cmd_mahler(args: MahlerArgs) -> anyhow::Result<i32> {
    let body = load_body(&args.body)?;
    let opts = VolumeOptions {
        samples: args.samples,
        seed: args.seed,
        ..Default::default()
    };
    let report = mahler_bounds_check(&body, &opts)?;

    println!(
        "volume product: {} ± {:.3e} ({:?}, {} samples)",
        fmt_g(report.nu.value),
        report.nu.ci_halfwidth,
        report.nu.method,
        report.nu.samples
    );
    let lines = [
        ("volume-product lower bound (box value 1)", report.mahler_ratio, report.mahler_ratio_ci, report.mahler_verdict),
        ("upper bound (ellipsoid value 1)", report.santalo_ratio, report.santalo_ratio_ci, report.santalo_verdict),
        ("proven floor (threshold 1)", report.kuperberg_ratio, report.kuperberg_ratio_ci, report.kuperberg_verdict),
    ];
    for (label, value, ci, verdict) in lines {
        println!("{label}: ratio {} ± {:.3e} → {:?}", fmt_g(value), ci, verdict);
    }

    if let Some(out) = &args.out {
        let manifest = RunManifest::new("mahler", &[&args.body], args.seed, BTreeMap::new())
            .with_outputs(&[&args.out])
            .note("samples", args.samples)
            .json()?;
        let rows = vec![
            vec![
                "volume_product".into(),
                fmt_g(report.nu.value),
                format!("{:.6e}", report.nu.ci_halfwidth),
                format!("{:?}", report.nu.method),
            ],
            vec![
                "mahler_ratio".into(),
                fmt_g(report.mahler_ratio),
                format!("{:.6e}", report.mahler_ratio_ci),
                format!("{:?}", report.mahler_verdict),
            ],
            vec![
                "santalo_ratio".into(),
                fmt_g(report.santalo_ratio),
                format!("{:.6e}", report.santalo_ratio_ci),
                format!("{:?}", report.santalo_verdict),
            ],
            vec![
                "kuperberg_ratio".into(),
                fmt_g(report.kuperberg_ratio),
                format!("{:.6e}", report.kuperberg_ratio_ci),
                format!("{:?}", report.kuperberg_verdict),
            ],
        ];
        let doc = csv_document(&manifest, &["quantity", "value", "ci_halfwidth", "status"], &rows)?;
        write_text(out, &doc)?;
    }

    let violated = [report.mahler_verdict, report.santalo_verdict, report.kuperberg_verdict]
        .iter()
        .any(|v| *v == Verdict::Violated);
    if violated {
        println!("FALSIFICATION-CANDIDATE: a volume-product bound is violated beyond its interval");
        return Ok(2);
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// trace
// ---------------------------------------------------------------------------

fn cmd_trace(args: TraceArgs) -> anyhow::Result<i32> {
    let k = load_body(&args.body)?;
    let (t, t_path) = resolve_pair(&k, args.dual, &args.body2)?;
    let (tol, overrides) = args.tol.apply();
    let n = k.dim();

    let q0 = match &args.q {
        Some(coords) => {
            let v = DVector::from_column_slice(coords);
            anyhow::ensure!(v.len() == n, "--q has {} coordinates, body has {}", v.len(), n);
            k.boundary_point(&v)?
        }
        None => {
            let e1 = DVector::from_fn(n, |r, _| if r == 0 { 1.0 } else { 0.0 });
            k.boundary_point(&e1)?
        }
    };
    let p0 = match &args.p {
        Some(coords) => {
            let v = DVector::from_column_slice(coords);
            anyhow::ensure!(v.len() == n, "--p has {} coordinates, body has {}", v.len(), n);
            t.boundary_point(&v)?
        }
        None => {
            // Seeded default, flipped inward if needed (central symmetry
            // makes the antipode reverse the motion ray).
            let mut rng = minkbill_core::numeric::stream_rng(args.seed, 1);
            let dir = minkbill_core::numeric::random_unit_vector(&mut rng, n);
            let mut p = t.boundary_point(&dir)?;
            let motion = -t.gauge_gradient(&p)?;
            if k.gauge_gradient(&q0)?.dot(&motion) > 0.0 {
                p = -p;
            }
            p
        }
    };

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut points: Vec<DVector<f64>> = vec![q0.clone()];
    let mut momenta: Vec<DVector<f64>> = vec![p0.clone()];
    let mut truncated: Option<(usize, f64)> = None;
    let (mut q, mut p) = (q0, p0);
    for i in 0..args.bounces {
        match bounce_map(&k, &t, &q, &p, &tol)? {
            BounceOutcome::Proper { q_next, p_next } => {
                q = q_next;
                p = p_next;
                points.push(q.clone());
                momenta.push(p.clone());
            }
            BounceOutcome::GlidingOnset { tangency } => {
                truncated = Some((i, tangency));
                break;
            }
        }
    }

    for (i, (qi, pi)) in points.iter().zip(&momenta).enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(qi.iter().map(|c| fmt_g(*c)));
        row.extend(pi.iter().map(|c| fmt_g(*c)));
        rows.push(row);
    }

    println!("traced {} of {} requested bounces", points.len() - 1, args.bounces);
    if let Some((i, tangency)) = truncated {
        println!("gliding onset at bounce {i} (tangency {tangency:.3e}); trace truncated");
    }

    let mut body_paths: Vec<&Path> = vec![&args.body];
    if let Some(pth) = &t_path {
        body_paths.push(pth);
    }
    let manifest = RunManifest::new("trace", &body_paths, args.seed, overrides)
        .with_outputs(&[&args.out, &args.svg])
        .note("bounces", args.bounces)
        .note("truncated", truncated.is_some())
        .json()?;

    if let Some(out) = &args.out {
        let mut columns: Vec<String> = vec!["i".to_string()];
        columns.extend((0..n).map(|j| format!("q{j}")));
        columns.extend((0..n).map(|j| format!("p{j}")));
        let column_refs: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
        let doc = csv_document(&manifest, &column_refs, &rows)?;
        write_text(out, &doc)?;
    }
    if let Some(svg_path) = &args.svg {
        if n != 2 {
            bail!("--svg needs plane bodies, got dimension {n}");
        }
        let svg = trajectory_svg(&k, Some(&t), &points, false, &manifest)?;
        write_text(svg_path, &svg)?;
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// inradius
// ---------------------------------------------------------------------------

fn cmd_inradius(args: InradiusArgs) -> anyhow::Result<i32> {
    let body = load_body(&args.body)?;
    let (tol, overrides) = args.tol.apply();
    let (shape, shape_path) = match &args.wrt {
        Some(path) => (load_body(path)?, Some(path.clone())),
        None => (ConvexBody::ball(body.dim()), None),
    };
    let inr = body.inradius_wrt(&shape, args.starts, args.seed, &tol)?;
    println!("inradius: {}", fmt_g(inr.value));
    println!(
        "witness boundary point: [{}]",
        inr.witness.iter().map(|c| format!("{c:.9}")).collect::<Vec<_>>().join(", ")
    );
    println!("starts: {} ({} converged)", inr.starts, inr.converged_starts);

    if let Some(out) = &args.out {
        let mut body_paths: Vec<&Path> = vec![&args.body];
        if let Some(p) = &shape_path {
            body_paths.push(p);
        }
        let manifest = RunManifest::new("inradius", &body_paths, args.seed, overrides)
            .with_outputs(&[&args.out])
            .note("starts", args.starts)
            .json()?;
        let rows = vec![vec![
            fmt_g(inr.value),
            inr.starts.to_string(),
            inr.converged_starts.to_string(),
            inr.witness.iter().map(|c| format!("{c:.9}")).collect::<Vec<_>>().join(" "),
        ]];
        let doc = csv_document(&manifest, &["value", "starts", "converged_starts", "witness"], &rows)?;
        write_text(out, &doc)?;
    }
    Ok(0)
}
