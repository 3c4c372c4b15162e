//! Named, seeded experiments that turn samples and closed forms into
//! machine-readable reports.

mod attractor;
mod certify;
mod coloring;
mod invariance;
mod semigroup;
mod verify;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::AnalyticsError;
use crate::offspring::{OffspringDistribution, OffspringError};
use crate::pruning::{PhiFunctional, PruneError};
use crate::sampler::{SampleConfig, SampleOutcome};
use crate::stats::{majority, GofReport, StatsError, Verdict};

pub use attractor::{igw_shape_probabilities, run_attractor_gf, run_attractor_mc};
pub use certify::{first_vertex, Certified, EdgeCall, FirstVertex, PruneView, SelectedLeaves, SmallShape, Walk};
pub use coloring::{run_coloring, select_leaves};
pub use invariance::{run_invariance, run_thinning, run_uniqueness_falsification};
pub use semigroup::run_semigroup;
pub use verify::{length_tail_report, run_verify_height, run_verify_length, run_verify_size, size_tail_report};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error("censor rate {rate:.2e} exceeds the bound {bound:.2e}")]
    CensorRate { rate: f64, bound: f64 },
    #[error("only {got} surviving trees, need {need}; increase max_trees")]
    Starvation { got: u64, need: u64 },
    #[error(transparent)]
    Offspring(#[from] OffspringError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Everything needed to reproduce an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub name: String,
    /// Offspring law, e.g. `igw:0.5`, `zipf:1.5`, `geometric`, `pmf:0.6,0,0.4`.
    pub dist: String,
    pub lambda: f64,
    pub phi: Option<PhiFunctional>,
    /// Explicit pruning thresholds; when empty they are derived from
    /// `target_p`.
    pub thresholds: Vec<f64>,
    /// Survival probabilities the adaptive threshold schedule aims for.
    pub target_p: Vec<f64>,
    /// Horton iteration counts for the Horton attractor.
    pub horton_k: Vec<u32>,
    /// Coloring probabilities p (a leaf stays unselected with probability p),
    /// or pushforward probabilities for the generating-function attractor.
    pub p_grid: Vec<f64>,
    /// Schedule entry (threshold, Horton count or p) at which attractor
    /// verdicts are taken; the last entry when unset.
    pub verdict_at: Option<f64>,
    /// Trees sampled by unconditional experiments.
    pub replicates: u64,
    /// Surviving trees required by conditional experiments.
    pub survivors: u64,
    /// Cap on trees sampled while collecting survivors.
    pub max_trees: u64,
    pub seed: u64,
    /// Independent seeds seed, seed+1, ...; verdicts by majority.
    pub repeats: u32,
    pub budget: usize,
    pub alpha: f64,
    pub tolerance: Option<f64>,
    pub max_censor_rate: f64,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: String::new(),
            dist: "igw:0.5".into(),
            lambda: 1.0,
            phi: None,
            thresholds: Vec::new(),
            target_p: Vec::new(),
            horton_k: Vec::new(),
            p_grid: Vec::new(),
            verdict_at: None,
            replicates: 100_000,
            survivors: 100_000,
            max_trees: 20_000_000,
            seed: 42,
            repeats: 1,
            budget: 1_000_000,
            alpha: crate::stats::ALPHA,
            tolerance: None,
            max_censor_rate: 0.01,
            output: None,
        }
    }
}

impl ExperimentSpec {
    pub fn new(name: &str, dist: &str) -> Self {
        Self { name: name.into(), dist: dist.into(), ..Self::default() }
    }

    pub fn distribution(&self) -> Result<OffspringDistribution, ExperimentError> {
        Ok(OffspringDistribution::parse(&self.dist)?)
    }

    pub(crate) fn igw_q(&self) -> Result<f64, ExperimentError> {
        self.distribution()?
            .igw_q()
            .ok_or_else(|| ExperimentError::Spec(format!("{} is not an IGW law", self.dist)))
    }

    pub(crate) fn phi_or(&self, default: PhiFunctional) -> PhiFunctional {
        self.phi.unwrap_or(default)
    }

    pub(crate) fn sample_config(&self, seed: u64, metric: bool) -> SampleConfig {
        SampleConfig::new(seed, self.budget, metric.then_some(self.lambda))
    }

    pub(crate) fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.repeats.max(1) as u64).map(move |i| self.seed.wrapping_add(i))
    }
}

/// A numeric table with named columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|x| format!("{x}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// Whitespace-separated columns with a commented header.
    pub fn to_dat(&self) -> String {
        let mut s = format!("# {}\n", self.columns.join(" "));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|x| format!("{x:e}")).collect();
            s.push_str(&cells.join(" "));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub code_version: String,
    pub spec: ExperimentSpec,
    pub checks: Vec<GofReport>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(spec: &ExperimentSpec) -> Self {
        Self {
            name: spec.name.clone(),
            code_version: CODE_VERSION.into(),
            spec: spec.clone(),
            checks: Vec::new(),
            tables: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(GofReport::passed)
    }

    pub fn check(&self, test: &str) -> Option<&GofReport> {
        self.checks.iter().find(|c| c.test == test)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!(
                "{} {}: {} = {:.6} (threshold {:.6}, n = {})\n",
                if c.passed() { "PASS" } else { "FAIL" },
                self.name,
                c.test,
                c.statistic,
                c.threshold,
                c.n
            ));
        }
        s
    }

    /// Writes `<dir>/<name>.json`, one CSV per table and a gnuplot-ready
    /// `.dat` file per table.
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        fs::write(dir.join(format!("{}.json", self.name)), json)?;
        let mut checks = String::from("test,statistic,n,threshold,verdict\n");
        for c in &self.checks {
            checks.push_str(&c.csv_row());
            checks.push('\n');
        }
        fs::write(dir.join(format!("{}_checks.csv", self.name)), checks)?;
        for t in &self.tables {
            fs::write(dir.join(format!("{}_{}.csv", self.name, t.name)), t.to_csv())?;
            fs::write(dir.join(format!("{}_{}.dat", self.name, t.name)), t.to_dat())?;
        }
        Ok(())
    }
}

/// Combines per-seed reports of one test: the verdict is the majority, the
/// reported statistic the median.
pub fn majority_report(mut reports: Vec<GofReport>) -> GofReport {
    assert!(!reports.is_empty());
    if reports.len() == 1 {
        return reports.pop().unwrap();
    }
    let votes: Vec<bool> = reports.iter().map(GofReport::passed).collect();
    let stats: Vec<f64> = reports.iter().map(|r| r.statistic).collect();
    let mut sorted = stats.clone();
    sorted.sort_by(f64::total_cmp);
    let mut r = reports.swap_remove(0);
    r.statistic = sorted[sorted.len() / 2];
    r.verdict = Verdict::from_bool(majority(&votes));
    r.extra.insert("seed_statistics".into(), serde_json::json!(stats));
    r.extra.insert("seed_verdicts".into(), serde_json::json!(votes));
    r
}

/// Samples replicates `0..n` of `seed`, applying `f` to each outcome.
pub(crate) fn sample_batch<T: Send>(
    d: &OffspringDistribution,
    cfg: &SampleConfig,
    offset: u64,
    n: u64,
    f: impl Fn(u64, SampleOutcome) -> T + Sync + Send,
) -> Vec<T> {
    use rayon::prelude::*;
    (offset..offset + n).into_par_iter().map(|r| f(r, crate::sampler::sample(d, &cfg.replicate(r)))).collect()
}

/// Samples until `need` outcomes satisfy `keep`, in growing batches.
/// Returns the kept values and the number of trees drawn.
pub(crate) fn collect_until<T: Send>(
    d: &OffspringDistribution,
    cfg: &SampleConfig,
    need: u64,
    max_trees: u64,
    f: impl Fn(u64, SampleOutcome) -> T + Sync + Send,
    keep: impl Fn(&T) -> bool,
) -> (Vec<T>, u64, u64) {
    let mut all = Vec::new();
    let mut kept = 0u64;
    let mut drawn = 0u64;
    let mut batch = need.max(1000);
    while kept < need && drawn < max_trees {
        let n = batch.min(max_trees - drawn);
        let out = sample_batch(d, cfg, drawn, n, &f);
        drawn += n;
        kept += out.iter().filter(|x| keep(x)).count() as u64;
        all.extend(out);
        let rate = (kept as f64 / drawn as f64).max(1e-4);
        batch = (((need.saturating_sub(kept)) as f64 / rate) * 1.1).ceil() as u64 + 100;
    }
    (all, drawn, kept)
}

/// Threshold t with P(value ≥ t) ≈ `target`, from a pilot sample.
pub(crate) fn pilot_threshold(mut values: Vec<f64>, target: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let idx = ((1.0 - target) * n as f64).floor() as usize;
    values[idx.min(n - 1)]
}
