use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use activecorr::binning::{bin_pair_counts, build_pair_graph, make_log_bins, BinConfig, BinSpec, PairCounts};
use activecorr::catalog::{
    generate_random_catalog, load_catalog, save_catalog, simulate_classifier, Bounds, Catalog, ClassifierSimConfig,
};
use activecorr::estimators::EdgeScoreModel;
use activecorr::experiments::synthetic::{clustered_catalog, uniform_catalog, ClusteredConfig};
use activecorr::experiments::{
    summarize, write_omega_csv, write_records_csv, write_summary_csv, write_target_counts_csv, TrialConfig, TrialSetup,
};
use activecorr::sampler::Session;
use activecorr::variance::{variance_report, write_variance_csv};
use activecorr::Execution;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "activecorr", version, about = "Active estimation of pair counts for two-point correlations")]
struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Catalog utilities.
    #[command(subcommand)]
    Catalog(CatalogCmd),
    /// Bin configuration utilities.
    #[command(subcommand)]
    Bins(BinsCmd),
    /// Exact pair counts and DD/RR - 1 from labeled targets.
    Paircount(PaircountArgs),
    /// Run one labeling session with the catalog's labels as annotator.
    Estimate(EstimateArgs),
    /// Run simulated-annotator trials and write CSV reports.
    Trials(TrialsArgs),
    /// Serve the labeling HTTP API.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum CatalogCmd {
    /// Parse a catalog and print a summary.
    Validate {
        path: PathBuf,
        #[arg(long)]
        require_labels: bool,
    },
    /// Replace probabilities with Beta draws conditioned on the labels.
    SimulateClassifier {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3.0)]
        alpha_pos: f64,
        #[arg(long, default_value_t = 1.0)]
        beta_pos: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha_neg: f64,
        #[arg(long, default_value_t = 3.0)]
        beta_neg: f64,
    },
    /// Uniform random catalog.
    Random {
        #[arg(long)]
        n: usize,
        /// `x_min,x_max,y_min,y_max`
        #[arg(long, default_value = "0,1,0,1")]
        bounds: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Labeled synthetic catalog with simulated classifier output.
    Synthetic {
        #[arg(long, value_enum, default_value_t = SyntheticKind::Galaxy)]
        kind: SyntheticKind,
        /// Number of sources (uniform kind only).
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Target fraction (uniform kind only).
        #[arg(long, default_value_t = 0.4)]
        target_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SyntheticKind {
    Galaxy,
    Uniform,
}

#[derive(Subcommand)]
enum BinsCmd {
    /// Write log-spaced bins as TOML.
    Make {
        #[arg(long)]
        theta_min: f64,
        #[arg(long)]
        theta_max: f64,
        #[arg(long)]
        bins: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PaircountArgs {
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    bins: PathBuf,
    /// Random catalog size; defaults to the catalog size.
    #[arg(long)]
    random_n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    random_seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorArg {
    Is,
    Mc,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    bins: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Is)]
    estimator: EstimatorArg,
    /// Stop after this many labels (default: all sources).
    #[arg(long, conflicts_with = "fraction")]
    max_labels: Option<usize>,
    /// Stop after this fraction of sources is labeled.
    #[arg(long)]
    fraction: Option<f64>,
    /// JSON-lines event log; stdout when omitted.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Variance and interval CSV written at checkpoints.
    #[arg(long)]
    variance_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    checkpoint_every: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

#[derive(Args)]
struct TrialsArgs {
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    bins: PathBuf,
    /// TOML trial configuration; defaults apply to omitted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long)]
    catalog_dir: PathBuf,
}

fn main() -> Result<()> {
    tracing_subscriber::fmt().with_writer(io::stderr).init();
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Catalog(c) => catalog_cmd(c),
        Command::Bins(BinsCmd::Make {
            theta_min,
            theta_max,
            bins,
            out,
        }) => {
            let cfg = make_log_bins(theta_min, theta_max, bins)?;
            let text = toml::to_string(&BinSpec::from(&cfg))?;
            write_text(out.as_deref(), &text)
        }
        Command::Paircount(a) => paircount(a, exec),
        Command::Estimate(a) => estimate(a, exec),
        Command::Trials(a) => trials(a, exec),
        Command::Serve(a) => {
            if !a.catalog_dir.is_dir() {
                bail!("catalog directory {} does not exist", a.catalog_dir.display());
            }
            let addr: SocketAddr = format!("{}:{}", a.host, a.port).parse().context("bad host or port")?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(activecorr_server::serve(addr, a.catalog_dir))?;
            Ok(())
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    let mut w = output(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn load_bins(path: &Path) -> Result<BinConfig> {
    BinConfig::load(path).with_context(|| format!("loading bins from {}", path.display()))
}

fn catalog_cmd(cmd: CatalogCmd) -> Result<()> {
    match cmd {
        CatalogCmd::Validate { path, require_labels } => {
            let c = load_catalog(&path, require_labels)?;
            let labeled = c.points().iter().filter(|p| p.label.is_some()).count();
            println!("sources: {}", c.len());
            println!("labeled: {labeled}");
            println!("targets: {}", c.target_count());
            println!("bounds: {}", c.bounds());
        }
        CatalogCmd::SimulateClassifier {
            input,
            out,
            seed,
            alpha_pos,
            beta_pos,
            alpha_neg,
            beta_neg,
        } => {
            let c = load_catalog(&input, true)?;
            let cfg = ClassifierSimConfig {
                alpha_pos,
                beta_pos,
                alpha_neg,
                beta_neg,
                seed,
            };
            save_catalog(&simulate_classifier(&c, &cfg)?, &out)?;
        }
        CatalogCmd::Random { n, bounds, seed, out } => {
            save_catalog(&generate_random_catalog(Bounds::parse(&bounds)?, n, seed)?, &out)?;
        }
        CatalogCmd::Synthetic {
            kind,
            n,
            target_fraction,
            seed,
            out,
        } => {
            let c = match kind {
                SyntheticKind::Galaxy => clustered_catalog(&ClusteredConfig::galaxy(seed))?,
                SyntheticKind::Uniform => uniform_catalog(n, target_fraction, Bounds::unit(), seed)?,
            };
            save_catalog(&c, &out)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct PairCountRow {
    bin: usize,
    edge_lo: f64,
    edge_hi: f64,
    dd: f64,
    rr: f64,
    omega: Option<f64>,
}

fn paircount(a: PaircountArgs, exec: Execution) -> Result<()> {
    let catalog = load_catalog(&a.catalog, true)?;
    let bins = load_bins(&a.bins)?;
    let targets = catalog.targets()?;
    let dd: Vec<f64> = bin_pair_counts(&targets, &bins, exec).iter().map(|&c| c as f64).collect();
    let n_r = a.random_n.unwrap_or(catalog.len());
    let random = generate_random_catalog(catalog.bounds(), n_r, a.random_seed)?;
    let rr = bin_pair_counts(&random, &bins, exec);
    let pc = PairCounts::new(&dd, targets.len() as f64, &rr, n_r)?;
    let mut w = csv::Writer::from_writer(output(a.out.as_deref())?);
    for b in 0..bins.num_bins() {
        let (edge_lo, edge_hi) = bins.range(b);
        w.serialize(PairCountRow {
            bin: b,
            edge_lo,
            edge_hi,
            dd: pc.dd[b],
            rr: pc.rr[b],
            omega: pc.omega[b],
        })?;
    }
    w.flush()?;
    Ok(())
}

fn estimate(a: EstimateArgs, exec: Execution) -> Result<()> {
    if a.checkpoint_every == 0 {
        bail!("--checkpoint-every must be at least 1");
    }
    let catalog: Catalog = load_catalog(&a.catalog, true)?;
    let labels = catalog.labels()?;
    let bins = load_bins(&a.bins)?;
    let graph = Arc::new(build_pair_graph(&catalog, &bins, exec)?);
    let model = Arc::new(match a.estimator {
        EstimatorArg::Is => EdgeScoreModel::product(&graph, catalog.probs())?,
        EstimatorArg::Mc => EdgeScoreModel::uniform(&graph, 1.0)?,
    });
    let n = catalog.len();
    let budget = match (a.max_labels, a.fraction) {
        (Some(m), _) => m.min(n),
        (None, Some(f)) if f > 0.0 && f <= 1.0 => ((f * n as f64).ceil() as usize).min(n),
        (None, Some(f)) => bail!("--fraction {f} outside (0, 1]"),
        (None, None) => n,
    };
    let mut session = Session::new(graph.clone(), model.clone(), a.seed)?;
    let mut events = output(a.events.as_deref())?;
    let mut reports = Vec::new();
    let mut written = 0;
    while session.labels_used() < budget && session.step_with(|v| labels[v as usize])? {
        for ev in &session.events()[written..] {
            serde_json::to_writer(&mut events, ev)?;
            events.write_all(b"\n")?;
        }
        written = session.events().len();
        if a.variance_csv.is_some() && session.labels_used() % a.checkpoint_every == 0 {
            for t in session.tracks().iter().filter(|t| t.state.k() >= 4) {
                reports.push(variance_report(
                    &t.state,
                    session.labels(),
                    &graph,
                    &model,
                    session.labels_used(),
                    a.level,
                    exec,
                )?);
            }
        }
    }
    events.flush()?;
    if let Some(path) = &a.variance_csv {
        write_variance_csv(&reports, File::create(path)?)?;
    }
    Ok(())
}

fn trials(a: TrialsArgs, exec: Execution) -> Result<()> {
    let mut cfg: TrialConfig = match &a.config {
        Some(p) => toml::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => TrialConfig::default(),
    };
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    cfg.validate()?;
    let catalog = load_catalog(&a.catalog, true)?;
    let setup = TrialSetup::new(catalog, load_bins(&a.bins)?, exec)?;
    let report = setup.run(&cfg, exec)?;
    fs::create_dir_all(&a.out_dir)?;
    let dir = &a.out_dir;
    write_records_csv(&report, File::create(dir.join("records.csv"))?)?;
    write_summary_csv(&summarize(&report), File::create(dir.join("summary.csv"))?)?;
    write_target_counts_csv(&report, File::create(dir.join("target_counts.csv"))?)?;
    if cfg.omega {
        write_omega_csv(&report, File::create(dir.join("omega.csv"))?)?;
    }
    let meta = serde_json::json!({
        "config": cfg,
        "n": report.n,
        "targets": report.targets,
        "edge_counts": report.edge_counts,
        "truth": report.truth,
    });
    fs::write(dir.join("run.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}
