use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use intloc_core::dist_zoo::builtin;
use intloc_core::edgeworth::refined_approx;
use intloc_core::harness::{rate_fit, run_sweep};
use intloc_core::inversion::{sandwich_bracket, smoothed_interval_prob, InversionConfig};
use intloc_core::oracles::{interval_prob_fft, interval_prob_mc};
use intloc_core::records::{
    now_timestamp, read_config, read_csv, records_from_sweep, summary_points, write_csv,
    write_plot_data,
};
use intloc_core::IntervalQuery;

#[derive(Parser)]
#[command(
    name = "intloc",
    version,
    about = "Refined integro-local approximation for sums of i.i.d. variables"
)]
struct Cli {
    /// Seed for every random stream (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the refined approximation and its terms.
    Approx {
        #[command(flatten)]
        query: QueryArgs,
        /// Clamp a negative total to 0 in the printout.
        #[arg(long)]
        clamp: bool,
    },
    /// Estimate the interval probability with an oracle.
    Oracle(OracleArgs),
    /// Run an error sweep from a config file and write CSV records.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the decay rate from the summary rows of a sweep CSV.
    Ratefit {
        #[arg(long = "in")]
        input: PathBuf,
        /// Write `ln n  ln err` pairs for plotting.
        #[arg(long)]
        plot_out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    dist: String,
    #[arg(long)]
    n: u64,
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long)]
    delta: f64,
}

impl QueryArgs {
    fn query(&self) -> Result<IntervalQuery> {
        Ok(IntervalQuery::new(self.n, self.x, self.delta)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Fft,
    Mc,
    Inversion,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum)]
    kind: OracleKind,
    #[command(flatten)]
    query: QueryArgs,
    /// FFT lattice spacing.
    #[arg(long, default_value_t = 1e-4)]
    h: f64,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    /// Inversion truncation tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tail_tol: f64,
    /// Inversion smoothing width (default Δ/n).
    #[arg(long)]
    delta_smooth: Option<f64>,
    /// Print the deterministic bracket for the unsmoothed probability.
    #[arg(long)]
    bracket: bool,
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if (1e-4..1e6).contains(&v.abs()) {
        format!("{v:.10}")
    } else {
        format!("{v:.10e}")
    }
}

fn cmd_approx(query: &QueryArgs, clamp: bool, seed: u64) -> Result<()> {
    let dist = builtin(&query.dist)?;
    let q = query.query()?;
    let b = refined_approx(&dist, &q);
    let total = if clamp { b.clamped_total() } else { b.total };
    println!("dist        {}", dist.name());
    println!("n           {}", q.n);
    println!("x           {}", fmt_num(q.x));
    println!("delta       {}", fmt_num(q.delta));
    println!("v           {}", fmt_num(b.v));
    println!(
        "{:<11} {:>20} {:>20}",
        "term", "probability", "per_unit_delta"
    );
    for (name, val) in [
        ("stone_term", b.stone_term),
        ("skew_term", b.skew_term),
        ("delta_term", b.delta_term),
        ("total", total),
    ] {
        println!(
            "{name:<11} {:>20} {:>20}",
            fmt_num(val),
            fmt_num(val / q.delta)
        );
    }
    println!("seed        {seed}");
    Ok(())
}

fn cmd_oracle(args: &OracleArgs, seed: u64) -> Result<()> {
    let dist = builtin(&args.query.dist)?;
    let q = args.query.query()?;
    println!("dist        {}", dist.name());
    println!("n           {}", q.n);
    println!("x           {}", fmt_num(q.x));
    println!("delta       {}", fmt_num(q.delta));
    match args.kind {
        OracleKind::Fft | OracleKind::Mc => {
            let est = match args.kind {
                OracleKind::Fft => interval_prob_fft(&dist, &q, args.h)?,
                _ => interval_prob_mc(&dist, &q, args.samples, seed)?,
            };
            println!("kind        {}", est.error_kind.as_str());
            println!("value       {}", fmt_num(est.value));
            println!("half_width  {}", fmt_num(est.error_half_width));
        }
        OracleKind::Inversion => {
            let mut cfg = InversionConfig::for_query(&q).with_tail_tol(args.tail_tol);
            if let Some(d) = args.delta_smooth {
                cfg = cfg.with_delta_smooth(d);
            }
            if args.bracket {
                let b = sandwich_bracket(&dist, &q, &cfg)?;
                println!("kind        bracket");
                println!("lower       {}", fmt_num(b.lower.value));
                println!("upper       {}", fmt_num(b.upper.value));
                println!("tol         {}", fmt_num(b.tol()));
                println!("value       {}", fmt_num(b.midpoint()));
                println!("half_width  {}", fmt_num(0.5 * b.width() + b.tol()));
            } else {
                let p = smoothed_interval_prob(&dist, &q, &cfg)?;
                println!("kind        smoothed");
                println!("delta_smooth {}", fmt_num(cfg.delta_smooth));
                println!("value       {}", fmt_num(p.value));
                println!("certificate {}", fmt_num(p.certificate()));
                println!("lambda      {}", fmt_num(p.lambda_trunc));
                println!("nodes       {}", p.nodes);
            }
        }
    }
    println!("seed        {seed}");
    Ok(())
}

fn cmd_sweep(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let file = read_config(config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = file.config;
    cfg.seed = seed.or(file.seed).unwrap_or(0);
    let out = out.unwrap_or(file.out);
    let timestamp = now_timestamp();
    let results = run_sweep(&cfg)?;
    let rows = records_from_sweep(&cfg, &results, &timestamp);
    write_csv(&out, &rows).with_context(|| format!("writing {}", out.display()))?;
    for r in &results {
        println!(
            "n = {:<6} sup_err = {:.6e}  argmax x = {:<12.6} flagged {}/{}",
            r.n,
            r.sup(),
            r.sup_point().x,
            r.flagged,
            r.points.len()
        );
    }
    println!(
        "wrote {} rows to {} (seed {})",
        rows.len(),
        out.display(),
        cfg.seed
    );
    Ok(())
}

fn cmd_ratefit(input: &Path, plot_out: Option<PathBuf>) -> Result<()> {
    let rows = read_csv(input).with_context(|| format!("reading {}", input.display()))?;
    let points = summary_points(&rows);
    if points.len() < 3 {
        bail!("need at least 3 summary rows, found {}", points.len());
    }
    let fit = rate_fit(&points)?;
    println!("points      {}", points.len());
    println!("slope       {:.3}", fit.slope);
    println!("intercept   {:.6}", fit.intercept);
    println!("r_squared   {:.6}", fit.r_squared);
    if !fit.is_valid() {
        println!("warning: r² below 0.9, the slope is not a usable rate estimate");
    }
    if let Some(path) = plot_out {
        write_plot_data(&path, &points).with_context(|| format!("writing {}", path.display()))?;
        println!("plot data   {}", path.display());
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var("INTLOC_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("INTLOC_THREADS must be a positive integer, got `{raw}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Approx { query, clamp } => cmd_approx(&query, clamp, seed),
        Command::Oracle(args) => cmd_oracle(&args, seed),
        Command::Sweep { config, out } => cmd_sweep(&config, out, cli.seed),
        Command::Ratefit { input, plot_out } => cmd_ratefit(&input, plot_out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
