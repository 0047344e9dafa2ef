//! `renorm`: batch driver for the enumeration, verification and sweep
//! experiments. Every command writes `<command>.csv` and `<command>.json` into
//! the output directory. The first CSV line is `# ` followed by a JSON object
//! holding the command, the version string and the fully resolved config.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::{info, warn};
use renorm_core::experiments::{
    chi_independence, counterterms_report, enumerate_report, resolvent_compare, sweep_lambda, verify_suite,
    ExperimentConfig, Trend,
};
use renorm_core::fock::linalg::DENSE_LIMIT;
use renorm_core::renorm::BlockEngine;
use renorm_core::{Error, Model};
use serde::Serialize;
use serde_json::json;

const VERSION: &str = env!("RENORM_VERSION");

/// Counter-terms whose matrix and diagram values differ by more than this are
/// reported as an invariant failure.
const COUNTERTERM_TOL: f64 = 1e-8;

#[derive(Parser)]
#[command(name = "renorm", version = VERSION, about = "Renormalized resolvent experiments on truncated Fock spaces")]
struct Cli {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides `k_max` from the config.
    #[arg(long, global = true)]
    k_max: Option<usize>,
    /// Overrides the counter-term order `N` from the config.
    #[arg(long, global = true)]
    order: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count handed strings and tuple classes, and check the tuple bijection.
    Enumerate {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
    },
    /// Run every numerical invariant check on the configured model.
    Verify,
    /// Matrix counter-terms against the diagram oracle and the quadrature.
    Counterterms,
    /// Reordered resolvent series against the direct inverse.
    ResolventCompare,
    /// Resolvent residuals across the cutoff list.
    SweepLambda,
    /// Resolvent residuals between cutoff profiles.
    ChiIndependence,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Enumerate { .. } => "enumerate",
            Command::Verify => "verify",
            Command::Counterterms => "counterterms",
            Command::ResolventCompare => "resolvent-compare",
            Command::SweepLambda => "sweep-lambda",
            Command::ChiIndependence => "chi-independence",
        }
    }
}

enum Status {
    Ok,
    InvariantFailed,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::InvariantFailed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config { .. } | Error::Parse(_) | Error::Domain(_)) => 2,
        Some(Error::BudgetExceeded { .. }) => 4,
        Some(_) => 3,
        None => 1,
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config {
                field: "--config".into(),
                reason: format!("cannot read {}: {e}", path.display()),
            })?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(k) = cli.k_max {
        cfg.k_max = k;
    }
    if let Some(n) = cli.order {
        cfg.order = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<Status> {
    let cfg = load_config(cli)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the worker pool")?;
    }
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let out = Output {
        dir: &cli.out,
        command: cli.command.name(),
        meta: json!({
            "command": cli.command.name(),
            "version": VERSION,
            "config": cfg,
            "resolved_model": cfg.resolved_model(),
        }),
    };
    info!("running {} (version {VERSION})", out.command);
    match &cli.command {
        Command::Enumerate { k, n } => cmd_enumerate(&out, *k, *n),
        Command::Verify => cmd_verify(&out, &cfg),
        Command::Counterterms => cmd_counterterms(&out, &cfg),
        Command::ResolventCompare => cmd_resolvent_compare(&out, &cfg),
        Command::SweepLambda => cmd_sweep_lambda(&out, &cfg),
        Command::ChiIndependence => cmd_chi_independence(&out, &cfg),
    }
}

struct Output<'a> {
    dir: &'a Path,
    command: &'static str,
    meta: serde_json::Value,
}

impl Output<'_> {
    fn write_csv<R: Serialize>(&self, stem: &str, rows: &[R]) -> anyhow::Result<()> {
        let path = self.dir.join(format!("{stem}.csv"));
        let mut file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        writeln!(file, "# {}", serde_json::to_string(&self.meta)?)?;
        let mut w = csv::Writer::from_writer(file);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn write_json<R: Serialize>(&self, report: &R) -> anyhow::Result<()> {
        let path = self.dir.join(format!("{}.json", self.command));
        let body = json!({ "meta": self.meta, "report": report });
        fs::write(&path, serde_json::to_string_pretty(&body)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

fn status(pass: bool) -> Status {
    if pass {
        Status::Ok
    } else {
        Status::InvariantFailed
    }
}

fn report_trend(label: &str, t: &Trend) {
    if t.monotone {
        println!("{label}: monotone");
    }
    for f in &t.flags {
        warn!("{f}");
        println!("FLAG {f}");
    }
}

#[derive(Serialize)]
struct MetricRow<'a> {
    metric: &'a str,
    value: String,
}

fn cmd_enumerate(out: &Output, k: usize, n: usize) -> anyhow::Result<Status> {
    let r = enumerate_report(k, n)?;
    println!("{r}");
    let counts = [
        ("strings", r.strings),
        ("handed", r.handed),
        ("right", r.right),
        ("left", r.left),
        ("ambidextrous", r.ambidextrous),
        ("tuples", r.tuples),
        ("tuple_classes", r.tuple_classes),
    ];
    let verdicts = [
        ("bijection", r.bijection),
        ("markers_invariant", r.markers_invariant),
        ("canonical_consistent", r.canonical_consistent),
    ];
    let rows: Vec<MetricRow> = counts
        .iter()
        .map(|&(metric, v)| MetricRow { metric, value: v.to_string() })
        .chain(verdicts.iter().map(|&(metric, v)| MetricRow { metric, value: v.to_string() }))
        .collect();
    out.write_csv(out.command, &rows)?;
    out.write_json(&r)?;
    Ok(status(r.passed()))
}

fn cmd_verify(out: &Output, cfg: &ExperimentConfig) -> anyhow::Result<Status> {
    let r = verify_suite(cfg)?;
    println!("dimension {}", r.dim);
    for c in &r.checks {
        println!(
            "{} {}: {:.3e} (tol {:.1e})",
            if c.pass { "ok  " } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    for f in &r.failures {
        eprintln!("failed: {f}");
    }
    out.write_csv(out.command, &r.checks)?;
    out.write_json(&r)?;
    Ok(status(r.passed()))
}

#[derive(Serialize)]
struct CountertermCsv<'a> {
    s: &'a str,
    length: usize,
    matrix_re: f64,
    matrix_im: f64,
    oracle_re: f64,
    oracle_im: f64,
    rel_diff: f64,
}

fn cmd_counterterms(out: &Output, cfg: &ExperimentConfig) -> anyhow::Result<Status> {
    let model = Model::new(&cfg.resolved_model())?;
    if model.dim() > DENSE_LIMIT {
        return Err(Error::BudgetExceeded {
            what: "dense counter-term dimension",
            limit: DENSE_LIMIT,
            requested: model.dim(),
        }
        .into());
    }
    let engine = BlockEngine::new(model);
    let r = counterterms_report(cfg, &engine)?;
    let rows: Vec<CountertermCsv> = r
        .rows
        .iter()
        .map(|row| CountertermCsv {
            s: &row.s,
            length: row.length,
            matrix_re: row.matrix[0],
            matrix_im: row.matrix[1],
            oracle_re: row.oracle[0],
            oracle_im: row.oracle[1],
            rel_diff: row.rel_diff,
        })
        .collect();
    let worst = r.rows.iter().map(|row| row.rel_diff).fold(0.0, f64::max);
    for (n, e) in r.by_order.iter().enumerate().skip(1) {
        println!("E^({n}) = {:.12e} {:+.3e}i", e[0], e[1]);
    }
    println!(
        "quadrature {:.12e} (boson-fermion {:.12e}, fermion-pair {:.12e}); rel diff to -E^(2) {:.3e}",
        r.quadrature, r.quadrature_boson_fermion, r.quadrature_fermion_pair, r.quadrature_rel_diff
    );
    println!("worst matrix/diagram rel diff {worst:.3e}");
    out.write_csv(out.command, &rows)?;
    out.write_json(&r)?;
    Ok(status(worst <= COUNTERTERM_TOL))
}

fn cmd_resolvent_compare(out: &Output, cfg: &ExperimentConfig) -> anyhow::Result<Status> {
    let r = resolvent_compare(cfg)?;
    let s = &r.report;
    println!("adaptive Z {:.4}, evaluation point z = {:.4}{:+.4}i", r.adaptive_z, s.z[0], s.z[1]);
    for row in &s.rows {
        println!("k={:>2} |term| {:.3e} residual {:.3e}", row.k, row.term_norm, row.cumulative_residual);
    }
    if let Some(q) = s.geometric_rate {
        println!("geometric rate {q:.4}");
    }
    out.write_csv(out.command, &s.rows)?;
    out.write_json(&r)?;
    if s.non_convergent {
        eprintln!("series terms do not decay at z = {}{:+}i", s.z[0], s.z[1]);
    }
    Ok(status(!s.non_convergent))
}

#[derive(Serialize)]
struct SweepCsv {
    p: f64,
    lambda: f64,
    e_lambda: f64,
    e_counter: f64,
    residual_next: Option<f64>,
}

#[derive(Serialize)]
struct ResidualCsv {
    p: f64,
    lambda_lo: f64,
    lambda_hi: f64,
    residual: f64,
}

fn cmd_sweep_lambda(out: &Output, cfg: &ExperimentConfig) -> anyhow::Result<Status> {
    let r = sweep_lambda(cfg)?;
    let rows: Vec<SweepCsv> = r
        .rows
        .iter()
        .map(|x| SweepCsv {
            p: x.p,
            lambda: x.lambda,
            e_lambda: x.e_lambda,
            e_counter: x.e_counter,
            residual_next: x.residual_next,
        })
        .collect();
    // Plot data: one point per consecutive cutoff pair, keyed by the pair.
    let plot: Vec<ResidualCsv> = r
        .rows
        .windows(2)
        .filter(|w| w[0].p == w[1].p)
        .filter_map(|w| {
            w[0].residual_next.map(|res| ResidualCsv {
                p: w[0].p,
                lambda_lo: w[0].lambda.min(w[1].lambda),
                lambda_hi: w[0].lambda.max(w[1].lambda),
                residual: res,
            })
        })
        .collect();
    for x in &rows {
        let res = x.residual_next.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"));
        println!(
            "p={:.3} Λ={:.3} E_Λ={:.6e} E^(N)={:.6e} residual {res}",
            x.p, x.lambda, x.e_lambda, x.e_counter
        );
    }
    for (t, p) in r.trend.iter().zip(&cfg.p_values) {
        report_trend(&format!("p={p}"), t);
    }
    out.write_csv(out.command, &rows)?;
    out.write_csv(&format!("{}-residuals", out.command), &plot)?;
    out.write_json(&r)?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct ChiCsv {
    lambda: f64,
    chi1: String,
    chi2: String,
    residual: f64,
}

fn profile_name(c: impl Serialize) -> anyhow::Result<String> {
    Ok(serde_json::to_value(c)?.as_str().unwrap_or_default().to_string())
}

fn cmd_chi_independence(out: &Output, cfg: &ExperimentConfig) -> anyhow::Result<Status> {
    let r = chi_independence(cfg)?;
    let rows = r
        .rows
        .iter()
        .map(|x| {
            Ok(ChiCsv {
                lambda: x.lambda,
                chi1: profile_name(x.chi1)?,
                chi2: profile_name(x.chi2)?,
                residual: x.residual,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    for x in &rows {
        println!("Λ={:.3} {} vs {}: {:.3e}", x.lambda, x.chi1, x.chi2, x.residual);
    }
    report_trend("chi", &r.trend);
    out.write_csv(out.command, &rows)?;
    out.write_json(&r)?;
    Ok(Status::Ok)
}
