//! `plnn`: simulate populations, answer neighbor queries, run the numerical
//! checks and the synthetic experiments.
//!
//! Exit codes: 0 success, 1 error, 2 a check failed, 3 a check was
//! statistically inconclusive.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use plnn_core::agent_knn::{global_knn, kt_knn, oracle_knn, Method, Selector};
use plnn_core::alt_similarity::{candidate_set, split_cluster};
use plnn_core::experiment::{ExperimentConfig, Figure, World};
use plnn_core::latent::{LatentPoint, ModelConfig};
use plnn_core::plackett_luce::{sample_rankings, write_rankings_csv, Sampler};
use plnn_core::rank_metrics::feature_matrix;
use plnn_core::theory::{self, ClaimStatus};

#[derive(Parser)]
#[command(name = "plnn", version, about = "Nearest neighbors for Plackett-Luce rankings")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// JSON config: a model config, or an experiment config for `experiment`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a population, its rankings and the feature matrix.
    Simulate,
    /// Neighbors of an agent, or of a new agent at given coordinates.
    Knn(KnnArgs),
    /// Neighbors of an alternative from sign and half statistics.
    AltSim(AltSimArgs),
    /// Numerical checks with a JSON report and CSV curves.
    Verify(VerifyArgs),
    /// Synthetic experiment runs written as CSV.
    Experiment {
        #[arg(value_enum)]
        figure: FigureArg,
    },
}

#[derive(Args)]
struct KnnArgs {
    #[arg(long)]
    method: Method,
    /// Index of an existing agent.
    #[arg(long, conflicts_with = "coords", required_unless_present = "coords")]
    query: Option<usize>,
    /// Latent coordinates of a new agent, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    coords: Option<Vec<f64>>,
    #[arg(long, conflicts_with = "eps", required_unless_present = "eps")]
    k: Option<usize>,
    /// Feature-distance threshold (global_knn only).
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args)]
struct AltSimArgs {
    /// Index of the query alternative.
    #[arg(long)]
    query: usize,
    /// Candidates keep sign distance at most `1 / ell`.
    #[arg(long)]
    ell: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    target: Target,
    /// Monte Carlo trials per grid point (bound checks).
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Relative tolerance of the quadrature.
    #[arg(long, default_value_t = 1e-8)]
    rel_tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    TheoremBias,
    #[value(name = "example-1")]
    Example1,
    AgentBounds,
    ItemBounds,
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureArg {
    Fig1a,
    Fig1b,
    Fig1c,
}

impl From<FigureArg> for Figure {
    fn from(f: FigureArg) -> Self {
        match f {
            FigureArg::Fig1a => Figure::Fig1a,
            FigureArg::Fig1b => Figure::Fig1b,
            FigureArg::Fig1c => Figure::Fig1c,
        }
    }
}

const DEFAULT_VERIFY_SEED: u64 = 7;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match cli.command {
        Command::Simulate => simulate(g),
        Command::Knn(args) => knn(g, &args),
        Command::AltSim(args) => alt_sim(g, &args),
        Command::Verify(args) => verify(g, &args),
        Command::Experiment { figure } => experiment(g, figure.into()),
    }
}

fn out_dir(g: &GlobalOpts) -> PathBuf {
    g.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn load_model(g: &GlobalOpts) -> Result<ModelConfig> {
    let mut model = match &g.config {
        Some(path) => read_json::<ModelConfig>(path)?,
        None => ModelConfig::uniform(300, 1500, 1, 5.0, 0),
    };
    if let Some(seed) = g.seed {
        model.seed = seed;
    }
    model.validate()?;
    Ok(model)
}

/// Prints to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<String> {
    fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(value)?;
    fs::write(dir.join(name), format!("{text}\n"))?;
    Ok(text)
}

fn simulate(g: &GlobalOpts) -> Result<ExitCode> {
    let model = load_model(g)?;
    let dir = out_dir(g);
    let world = World::sample(&model, Sampler::default())?;
    fs::create_dir_all(&dir)?;
    write_json(&dir, "population.json", &world.population)?;
    write_rankings_csv(fs::File::create(dir.join("rankings.csv"))?, &world.rankings, model.seed)?;
    world.features.write_csv(fs::File::create(dir.join("features.csv"))?)?;
    world.features.write_binary(fs::File::create(dir.join("features.bin"))?)?;
    println!(
        "simulated {} agents x {} alternatives (d = {}) into {}",
        model.n_agents,
        model.n_alternatives,
        model.dim,
        dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn knn(g: &GlobalOpts, args: &KnnArgs) -> Result<ExitCode> {
    let model = load_model(g)?;
    let mut world = World::sample(&model, Sampler::default())?;
    let query = match (&args.coords, args.query) {
        (Some(coords), _) => {
            // New agent appended as index n with its own ranking substream.
            let point = LatentPoint::in_box(coords.clone(), model.box_size)?;
            if point.dim() != model.dim {
                bail!("query has {} coordinates, model has d = {}", point.dim(), model.dim);
            }
            world.population.agents.push(point);
            let grown = ModelConfig { n_agents: model.n_agents + 1, ..model.clone() };
            world.rankings = sample_rankings(&grown, &world.population, Sampler::default())?;
            if args.method == Method::GlobalKnn {
                world.features = feature_matrix(&world.rankings, model.seed)?;
            }
            model.n_agents
        }
        (None, Some(q)) => q,
        (None, None) => bail!("either --query or --coords is required"),
    };
    let set = match (args.method, args.k, args.eps) {
        (Method::KtKnn, Some(k), _) => kt_knn(&world.rankings, query, k)?,
        (Method::GlobalKnn, Some(k), _) => global_knn(&world.features, query, Selector::TopK { k })?,
        (Method::GlobalKnn, None, Some(eps)) => global_knn(&world.features, query, Selector::Threshold { eps })?,
        (Method::Oracle, Some(k), _) => oracle_knn(&world.population, query, k)?,
        (m, _, _) => bail!("{m} supports --k only"),
    };
    let text = write_json(&out_dir(g), "knn.json", &set)?;
    emit(&text);
    Ok(ExitCode::SUCCESS)
}

#[derive(serde::Serialize)]
struct AltSimOutput {
    candidates: plnn_core::CandidateSet,
    /// Split-cluster output; absent for `d > 1`, where candidates are experimental.
    split: Option<plnn_core::alt_similarity::SplitOutcome>,
    neighbors: Vec<usize>,
}

fn alt_sim(g: &GlobalOpts, args: &AltSimArgs) -> Result<ExitCode> {
    let model = load_model(g)?;
    let world = World::sample(&model, Sampler::default())?;
    let candidates = candidate_set(&world.rankings, args.query, args.ell)?;
    let (split, neighbors) = if model.dim == 1 {
        let split = split_cluster(&world.rankings, args.query, &candidates)?;
        let kept = split.kept.clone();
        (Some(split), kept)
    } else {
        eprintln!("warning: d = {} > 1, returning unfiltered candidates", model.dim);
        (None, candidates.members.clone())
    };
    let out = AltSimOutput { candidates, split, neighbors };
    let text = write_json(&out_dir(g), "alt_sim.json", &out)?;
    emit(&text);
    Ok(ExitCode::SUCCESS)
}

fn verify(g: &GlobalOpts, args: &VerifyArgs) -> Result<ExitCode> {
    let seed = g.seed.unwrap_or(DEFAULT_VERIFY_SEED);
    let grid = theory::log_grid(0.02, 0.2, 8);
    let report = match args.target {
        Target::TheoremBias => theory::theorem_bias_check(&theory::BIAS_QUERIES, 200, args.rel_tol)?,
        Target::Example1 => theory::example_one(1e-6),
        Target::AgentBounds => theory::agent_bound_check(&grid, args.trials, seed)?,
        Target::ItemBounds => theory::item_bound_check(&grid, args.trials, seed)?,
    };
    report.write_to_dir(&out_dir(g))?;
    emit(&serde_json::to_string_pretty(&report)?);
    Ok(match report.status {
        ClaimStatus::Pass => ExitCode::SUCCESS,
        ClaimStatus::Fail => ExitCode::from(2),
        ClaimStatus::Inconclusive => ExitCode::from(3),
    })
}

fn experiment(g: &GlobalOpts, figure: Figure) -> Result<ExitCode> {
    let mut cfg = match &g.config {
        Some(path) => read_json::<ExperimentConfig>(path)?,
        None => ExperimentConfig::reduced(),
    };
    if let Some(seed) = g.seed {
        cfg.replicate_seeds = vec![seed];
    }
    if let Some(out) = &g.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    let report = figure.run(&cfg)?;
    let path = cfg.output_dir.join(format!("{}.csv", figure.name()));
    report.write_to(&path)?;
    println!("wrote {} rows to {}", report.rows.len(), path.display());
    Ok(ExitCode::SUCCESS)
}
