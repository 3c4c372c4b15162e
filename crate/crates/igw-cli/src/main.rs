use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use igw_lab::experiments::{
    run_attractor_gf, run_attractor_mc, run_coloring, run_invariance, run_semigroup, run_thinning,
    run_uniqueness_falsification, run_verify_height, run_verify_length, run_verify_size, ExperimentReport,
    ExperimentSpec,
};
use igw_lab::offspring::OffspringDistribution;
use igw_lab::pruning::{bernoulli_color, gdp_prune, PhiFunctional};
use igw_lab::sampler::{sample, SampleConfig};
use igw_lab::tree::{from_json, from_newick, to_json, to_newick, MetricTree};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "igw", version, about = "Galton-Watson tree sampling, pruning and verification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample trees and print them one per line.
    Sample {
        #[arg(long, default_value = "igw:0.5")]
        dist: String,
        /// Edge rate; omit for unit lengths.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        budget: usize,
        #[arg(long, value_enum, default_value_t = Format::Newick)]
        format: Format,
    },
    /// Prune trees read from a file (or stdin) at a threshold.
    Prune {
        #[arg(long, default_value = "height")]
        phi: String,
        #[arg(long)]
        threshold: f64,
        #[command(flatten)]
        io: TreeIo,
    },
    /// Bernoulli leaf coloring of trees read from a file (or stdin).
    Color {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        io: TreeIo,
    },
    /// Summary of an offspring law.
    Dist {
        #[arg(long)]
        dist: String,
        /// Number of pmf terms to print.
        #[arg(long, default_value_t = 10)]
        terms: usize,
    },
    /// Monte Carlo against the closed-form height, length or size laws.
    Verify {
        #[arg(value_enum)]
        law: Law,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Pruning invariance of IGW laws.
    Invariance(RunArgs),
    /// Non-IGW laws are not invariant under pruning.
    Falsify(RunArgs),
    /// Joint law of offspring and surviving children at the first vertex.
    Thinning(RunArgs),
    /// Attractor of pruned critical laws.
    Attractor {
        #[arg(value_enum)]
        mode: AttractorMode,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Bernoulli leaf coloring experiments.
    Coloring(RunArgs),
    /// Semigroup property of height, Horton order and length pruning.
    Semigroup(RunArgs),
    /// Summarizes report JSON files written by the other commands.
    Report {
        /// Directories or report files.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Newick,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Law {
    Height,
    Length,
    Size,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttractorMode {
    /// Generating-function pushforward along a p grid.
    Gf,
    /// Monte Carlo small-shape frequencies.
    Mc,
}

#[derive(Args)]
struct TreeIo {
    /// Input file, one tree per line; `-` or omitted reads stdin.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Newick)]
    format: Format,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment spec; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    phi: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    survivors: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    repeats: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    target_p: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    horton_k: Option<Vec<u32>>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Directory for the JSON, CSV and .dat outputs.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

type CliResult<T> = Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

impl RunArgs {
    fn spec(&self, default_name: &str) -> CliResult<ExperimentSpec> {
        let mut s = match &self.config {
            Some(path) => toml::from_str(&fs::read_to_string(path).map_err(err)?).map_err(err)?,
            None => ExperimentSpec::new(default_name, "igw:0.5"),
        };
        if s.name.is_empty() {
            s.name = default_name.into();
        }
        if let Some(v) = &self.name {
            s.name = v.clone();
        }
        if let Some(v) = &self.dist {
            s.dist = v.clone();
        }
        if let Some(v) = &self.phi {
            s.phi = Some(parse_phi(v)?);
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.replicates {
            s.replicates = v;
        }
        if let Some(v) = self.survivors {
            s.survivors = v;
        }
        if let Some(v) = self.budget {
            s.budget = v;
        }
        if let Some(v) = self.repeats {
            s.repeats = v;
        }
        if let Some(v) = &self.target_p {
            s.target_p = v.clone();
        }
        if let Some(v) = &self.thresholds {
            s.thresholds = v.clone();
        }
        if let Some(v) = &self.p_grid {
            s.p_grid = v.clone();
        }
        if let Some(v) = &self.horton_k {
            s.horton_k = v.clone();
        }
        if self.tolerance.is_some() {
            s.tolerance = self.tolerance;
        }
        Ok(s)
    }
}

fn parse_phi(s: &str) -> CliResult<PhiFunctional> {
    PhiFunctional::parse(s).ok_or_else(|| format!("unknown functional '{s}' (height, length, leaves, ord)"))
}

fn read_trees(io: &TreeIo) -> CliResult<Vec<MetricTree>> {
    let text = match io.input.as_deref() {
        Some(p) if p != Path::new("-") => fs::read_to_string(p).map_err(err)?,
        _ => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).map_err(err)?;
            s
        }
    };
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| match io.format {
            Format::Newick => from_newick(l).map_err(err),
            Format::Json => from_json(l).map_err(err),
        })
        .collect()
}

fn render(t: &MetricTree, format: Format) -> String {
    match format {
        Format::Newick => to_newick(t),
        Format::Json => to_json(t),
    }
}

/// Prints and writes a report; the exit status reflects its verdicts.
fn finish(report: ExperimentReport, out: &Path) -> CliResult<bool> {
    print!("{}", report.summary());
    for n in &report.notes {
        println!("note: {n}");
    }
    report.write(out).map_err(err)?;
    Ok(report.passed())
}

fn run_experiment(
    run: &RunArgs,
    name: &str,
    f: fn(&ExperimentSpec) -> Result<ExperimentReport, igw_lab::experiments::ExperimentError>,
) -> CliResult<bool> {
    let spec = run.spec(name)?;
    let report = f(&spec).map_err(err)?;
    finish(report, &run.out)
}

fn report_files(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)
                .map_err(err)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn run(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Sample { dist, lambda, count, seed, budget, format } => {
            let d = OffspringDistribution::parse(&dist).map_err(err)?;
            let cfg = SampleConfig::new(seed, budget, lambda);
            let mut censored = 0;
            for r in 0..count {
                let o = sample(&d, &cfg.replicate(r));
                if o.censored {
                    censored += 1;
                    eprintln!("replicate {r} hit the budget of {budget} vertices; skipped");
                    continue;
                }
                println!("{}", render(&o.tree, format));
            }
            Ok(censored == 0)
        }
        Command::Prune { phi, threshold, io } => {
            let phi = parse_phi(&phi)?;
            for t in read_trees(&io)? {
                let r = gdp_prune(&t, &phi, threshold).map_err(err)?;
                println!("{}", if r.survived { render(&r.tree, io.format) } else { "extinct".into() });
            }
            Ok(true)
        }
        Command::Color { p, seed, io } => {
            if !(0.0..1.0).contains(&p) {
                return Err(format!("p must lie in [0, 1), got {p}"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for t in read_trees(&io)? {
                let r = bernoulli_color(&t, p, &mut rng);
                println!("{}", if r.survived { render(&r.tree, io.format) } else { "extinct".into() });
            }
            Ok(true)
        }
        Command::Dist { dist, terms } => {
            let d = OffspringDistribution::parse(&dist).map_err(err)?;
            let mut info = serde_json::json!({
                "family": d.family(),
                "mean": d.mean(),
                "criticality": d.classify(),
                "finite_second_moment": d.has_finite_second_moment(),
                "pmf": d.pmf_vec(terms),
            });
            if let Ok(profile) = d.estimate_l() {
                info["attractor_q"] = serde_json::json!(profile.attractor_q());
                info["regularity"] = serde_json::json!(profile);
            }
            println!("{}", serde_json::to_string_pretty(&info).map_err(err)?);
            Ok(true)
        }
        Command::Verify { law, run } => match law {
            Law::Height => run_experiment(&run, "verify_height", run_verify_height),
            Law::Length => run_experiment(&run, "verify_length", run_verify_length),
            Law::Size => run_experiment(&run, "verify_size", run_verify_size),
        },
        Command::Invariance(run) => run_experiment(&run, "invariance", run_invariance),
        Command::Falsify(run) => run_experiment(&run, "falsify", run_uniqueness_falsification),
        Command::Thinning(run) => run_experiment(&run, "thinning", run_thinning),
        Command::Attractor { mode, run } => match mode {
            AttractorMode::Gf => run_experiment(&run, "attractor_gf", run_attractor_gf),
            AttractorMode::Mc => run_experiment(&run, "attractor_mc", run_attractor_mc),
        },
        Command::Coloring(run) => run_experiment(&run, "coloring", run_coloring),
        Command::Semigroup(run) => run_experiment(&run, "semigroup", run_semigroup),
        Command::Report { paths } => {
            let mut all = true;
            for f in report_files(&paths)? {
                let text = fs::read_to_string(&f).map_err(err)?;
                let Ok(report) = serde_json::from_str::<ExperimentReport>(&text) else {
                    continue;
                };
                print!("{}", report.summary());
                all &= report.passed();
            }
            Ok(all)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
