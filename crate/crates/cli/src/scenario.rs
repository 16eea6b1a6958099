//! Scenario files: rack, dataset source and experiment grid in TOML.
//!
//! Every section and key is optional; omitted values fall back to the
//! `paper-5` rack, the synthetic benchmark and the grid
//! `mu = 5..25 step 5`, `sigma = 0..15 step 5`. See
//! `scenarios/paper5.toml` for an annotated example.

use adds_core::catalog::{generate_stream, load_dataset, GeneratorSpec, Inventory, Layout, Order};
use adds_core::geometry::{GridPosition, RackConfig};
use adds_core::sequencing::Strategy;
use adds_core::simulator::{ArrivalMode, OnInfeasible, StockMode, StreamConfig, TimingMode};
use adds_core::stochastics::SortingModel;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Seed of the default synthetic benchmark dataset.
pub const BENCHMARK_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RackSection {
    /// Named base rack; `paper-5` is the only preset.
    pub preset: Option<String>,
    pub rows: Option<u32>,
    pub cols: Option<u32>,
    pub cell_height: Option<f64>,
    pub cell_length: Option<f64>,
    pub speed: Option<f64>,
    /// Two points for layout A; layout B uses the first.
    pub io_points: Option<Vec<GridPosition>>,
}

impl RackSection {
    pub fn resolve(&self) -> Result<RackConfig> {
        let mut rack = match self.preset.as_deref().unwrap_or("paper-5") {
            "paper-5" => RackConfig::paper_preset(),
            other => bail!("unknown rack preset `{other}`"),
        };
        rack.rows = self.rows.unwrap_or(rack.rows);
        rack.cols = self.cols.unwrap_or(rack.cols);
        rack.cell_height = self.cell_height.unwrap_or(rack.cell_height);
        rack.cell_length = self.cell_length.unwrap_or(rack.cell_length);
        rack.speed = self.speed.unwrap_or(rack.speed);
        if let Some(points) = &self.io_points {
            rack.io_points = points.clone();
        }
        rack.validate()?;
        if rack.io_points.len() != 2 {
            bail!("rack needs exactly 2 I/O points, got {}", rack.io_points.len());
        }
        Ok(rack)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// Paths are relative to the scenario file.
    pub inventory: PathBuf,
    pub orders: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Experiment {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub layouts: Vec<Layout>,
    pub strategies: Vec<Strategy>,
    /// Seeds the random strategy and Monte-Carlo draws.
    pub seed: u64,
    /// Number of seeds the random strategy is averaged over in
    /// `compare-strategies` (`seed`, `seed + 1`, ...).
    pub random_seeds: u64,
    pub timing_mode: TimingMode,
    pub replications: usize,
    pub arrival_mode: ArrivalMode,
    pub stock_mode: StockMode,
    pub on_infeasible: OnInfeasible,
    pub exclude_zero_cycle_orders: bool,
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            mu: vec![5.0, 10.0, 15.0, 20.0, 25.0],
            sigma: vec![0.0, 5.0, 10.0, 15.0],
            layouts: vec![Layout::A, Layout::B],
            strategies: Strategy::ALL.to_vec(),
            seed: 0,
            random_seeds: 100,
            timing_mode: TimingMode::Analytic,
            replications: 10_000,
            arrival_mode: ArrivalMode::Successive,
            stock_mode: StockMode::Infinite,
            on_infeasible: OnInfeasible::Skip,
            exclude_zero_cycle_orders: false,
        }
    }
}

impl Experiment {
    /// `(mu, sigma)` pairs, mu-major.
    pub fn grid(&self) -> Vec<(f64, f64)> {
        self.mu
            .iter()
            .flat_map(|&mu| self.sigma.iter().map(move |&sigma| (mu, sigma)))
            .collect()
    }

    pub fn stream_config(&self, layout: Layout, strategy: Strategy, mu: f64, sigma: f64) -> Result<StreamConfig> {
        Ok(StreamConfig {
            layout,
            strategy,
            sorting: SortingModel::new(mu, sigma)?,
            timing_mode: self.timing_mode,
            arrival_mode: self.arrival_mode,
            stock_mode: self.stock_mode,
            seed: self.seed,
            replications: self.replications,
            on_infeasible: self.on_infeasible,
            exclude_zero_cycle_orders: self.exclude_zero_cycle_orders,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.is_empty() || self.sigma.is_empty() {
            bail!("experiment grid needs at least one mu and one sigma");
        }
        for &(mu, sigma) in &self.grid() {
            SortingModel::new(mu, sigma)?;
        }
        if self.layouts.is_empty() || self.strategies.is_empty() {
            bail!("experiment needs at least one layout and one strategy");
        }
        if self.random_seeds == 0 {
            bail!("random_seeds must be at least 1");
        }
        if self.timing_mode == TimingMode::MonteCarlo && self.replications == 0 {
            bail!("Monte-Carlo mode needs replications >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub rack: RackSection,
    pub dataset: Option<DatasetSection>,
    /// Synthetic dataset; the benchmark when neither this nor `dataset` is set.
    pub generator: Option<GeneratorSpec>,
    /// Generator seed.
    pub dataset_seed: Option<u64>,
    pub experiment: Experiment,
}

/// A scenario with everything resolved and its provenance hash.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    pub rack: RackConfig,
    pub inventory: Inventory,
    pub orders: Vec<Order>,
    /// SHA-256 over the canonical scenario text and any dataset files.
    pub hash: String,
    pub canonical: String,
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
        let mut scenario: Scenario =
            toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {}", path.display(), e.message()))?;
        if let (Some(ds), Some(dir)) = (&mut scenario.dataset, path.parent()) {
            ds.inventory = dir.join(&ds.inventory);
            ds.orders = dir.join(&ds.orders);
        }
        Ok(scenario)
    }

    pub fn generator_spec(&self) -> GeneratorSpec {
        self.generator.clone().unwrap_or_else(GeneratorSpec::benchmark)
    }

    /// Validates, loads or generates the dataset and hashes the result.
    pub fn load(self) -> Result<Loaded> {
        self.experiment.validate()?;
        let rack = self.rack.resolve()?;
        if self.dataset.is_some() && self.generator.is_some() {
            bail!("scenario sets both `dataset` and `generator`");
        }
        let canonical = toml::to_string(&self).context("serializing scenario")?;
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let (inventory, orders) = match &self.dataset {
            Some(ds) => {
                for file in [&ds.inventory, &ds.orders] {
                    let bytes = std::fs::read(file).with_context(|| format!("reading {}", file.display()))?;
                    hasher.update(&bytes);
                }
                load_dataset(&ds.inventory, &ds.orders, &rack)?
            }
            None => {
                let spec = self.generator_spec();
                let (inv, orders) = generate_stream(&spec, self.dataset_seed.unwrap_or(BENCHMARK_SEED))?;
                inv.check_bounds(&rack)?;
                (inv, orders)
            }
        };
        let hash = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        Ok(Loaded {
            scenario: self,
            rack,
            inventory,
            orders,
            hash,
            canonical,
        })
    }
}

impl Loaded {
    /// The rack for `layout`.
    pub fn rack_for(&self, layout: Layout) -> RackConfig {
        match layout {
            Layout::A => self.rack.clone(),
            Layout::B => self.rack.single_io(),
        }
    }

    pub fn header_line(&self) -> String {
        format!("# scenario-sha256: {}\n", self.hash)
    }
}
