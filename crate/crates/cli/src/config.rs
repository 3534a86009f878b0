//! Experiment configuration read from TOML and overridden by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use labelcraft::baselines::RuleKind;
use labelcraft::data::{ColumnMap, SyntheticConfig};
use labelcraft::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::variant::Variant;

/// Where interactions come from: a CSV log or the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// CSV file with interaction records; when absent the generator is used.
    pub path: Option<PathBuf>,
    pub columns: ColumnMap,
    /// Iterative k-core filter `[k_user, k_item]` applied after loading; `[0, 0]` disables it.
    pub kcore: [usize; 2],
    pub synthetic: SyntheticConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            path: None,
            columns: ColumnMap::default(),
            kcore: [0, 0],
            synthetic: SyntheticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_days: u32,
    pub val_days: u32,
    pub test_days: u32,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_days: 12,
            val_days: 1,
            test_days: 1,
        }
    }
}

/// A training method: the meta-learned labeler or one of the fixed label rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    LabelCraft,
    Rule(RuleKind),
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::LabelCraft => "labelcraft",
            Method::Rule(k) => k.name(),
        }
    }

    pub fn all() -> Vec<Method> {
        RuleKind::ALL
            .iter()
            .map(|&k| Method::Rule(k))
            .chain(std::iter::once(Method::LabelCraft))
            .collect()
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "labelcraft" || t == "lc" {
            return Ok(Method::LabelCraft);
        }
        t.parse::<RuleKind>()
            .map(Method::Rule)
            .map_err(|_| anyhow::anyhow!("unknown method '{s}' (expected labelcraft, wt, ef, pc, pcr, d2q or dvr)"))
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything one command needs; serialized verbatim into every run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds both the generator and training.
    pub seed: u64,
    pub out: PathBuf,
    pub k: usize,
    pub method: Method,
    pub variant: Variant,
    /// Methods trained by `compare`.
    pub methods: Vec<Method>,
    /// Reference method for the relative-improvement columns.
    pub reference: Method,
    /// τ values tried by `sweep`.
    pub tau_grid: Vec<f64>,
    /// Baselines whose best values are reported next to the sweep curve.
    pub sweep_baselines: Vec<Method>,
    /// Variants run by `ablate --variant all`.
    pub variants: Vec<Variant>,
    pub histogram_bins: usize,
    pub data: DataConfig,
    pub split: SplitConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            out: PathBuf::from("runs"),
            k: 10,
            method: Method::LabelCraft,
            variant: Variant::Full,
            methods: Method::all(),
            reference: Method::LabelCraft,
            tau_grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
            sweep_baselines: RuleKind::ALL.iter().map(|&k| Method::Rule(k)).collect(),
            variants: Variant::ALL.to_vec(),
            histogram_bins: 10,
            data: DataConfig::default(),
            split: SplitConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub method: Option<Method>,
    pub variant: Option<Variant>,
    pub k: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).context("invalid configuration")
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml_string(&self) -> anyhow::Result<String> {
        toml::to_string(self).context("cannot serialize configuration")
    }

    /// Applies flag overrides and propagates shared settings into the nested configs.
    pub fn resolve(mut self, o: &Overrides) -> Self {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(m) = o.method {
            self.method = m;
        }
        if let Some(v) = o.variant {
            self.variant = v;
        }
        if let Some(k) = o.k {
            self.k = k;
        }
        self.data.synthetic.seed = self.seed;
        self.train.seed = self.seed;
        self.train.objective.k = self.k;
        self
    }

    /// Checks everything that can be checked before any work starts.
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.k == 0 {
            bail!("k must be >= 1");
        }
        if self.histogram_bins == 0 {
            bail!("histogram_bins must be >= 1");
        }
        if self.split.train_days == 0 || self.split.val_days == 0 {
            bail!("split.train_days and split.val_days must be >= 1");
        }
        if self.methods.is_empty() {
            bail!("methods must not be empty");
        }
        if self.tau_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            bail!("tau_grid values must be finite and >= 0");
        }
        match &self.data.path {
            Some(p) if !p.exists() => bail!("data file {} does not exist", p.display()),
            Some(_) => {}
            None => self.data.synthetic.validate()?,
        }
        self.train.validate()?;
        Ok(())
    }
}
