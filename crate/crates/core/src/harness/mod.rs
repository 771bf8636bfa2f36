//! Experiment runner: simulated elicitation loops and the rating-versus-
//! comparison study, producing per-seed metric curves.
//!
//! An [`ExperimentSpec`] is a flat bag of settings whose defaults depend on the
//! experiment. Settings can be applied from `key = value` strings, which is
//! how the command line and config files feed it.

mod admissions;
mod appendix;
mod media;
mod report;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use admissions::{metric_names as admissions_metric_names, run_admissions, run_admissions_seed, AdmissionsSeedResult};
pub use appendix::{run_appendix_seed, run_appendix_study, TAU_COMPARISON, TAU_RATING, TRAIN_LL_COMPARISON, TRAIN_MSE_RATING};
pub use media::{METRIC as MEDIA_METRIC, run_media, run_media_seed, synthetic_media_world, MediaSeedResult, MediaWorld};
pub use report::{code_version, Aggregate, ExperimentReport, MetricRow};

use crate::datasets::DatasetError;
use crate::metrics::MetricError;
use crate::models::ModelError;
use crate::sampler::SamplerError;
use crate::utility::UtilityError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error("data error: {0}")]
    Data(#[from] DatasetError),
    #[error("output error: {0}")]
    Output(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Utility(#[from] UtilityError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl HarnessError {
    /// Process exit code: 2 for spec errors, 3 for data errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Spec(_) => 2,
            HarnessError::Data(_) => 3,
            _ => 1,
        }
    }
}

fn spec_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Spec(msg.into())
}

macro_rules! string_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = HarnessError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($name::$variant),)+
                    other => Err(spec_err(format!(
                        "unknown {} \"{other}\" (expected one of: {})",
                        stringify!($name),
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }
    };
}

string_enum!(ExperimentKind { Media => "media", Admissions => "admissions", Appendix => "appendix" });
string_enum!(Strategy { Utility => "utility", Entropy => "entropy", Random => "random", Cluster => "cluster", None => "none" });
string_enum!(UserSelection { RoundRobin => "roundrobin", Random => "random" });
string_enum!(RetrainMode { Finetune => "finetune", Scratch => "scratch" });

/// Every setting of an experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub experiment: ExperimentKind,
    /// Dataset path; `None` selects the built-in synthetic data.
    pub data: Option<PathBuf>,
    pub strategy: Strategy,
    pub rounds: usize,
    pub queries_per_round: usize,
    /// Metrics are recorded every `eval_every` rounds and after the last one.
    pub eval_every: usize,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub user_selection: UserSelection,
    pub retrain: RetrainMode,

    // model and training
    pub latent_dim: usize,
    pub embed_dim: usize,
    pub hidden: [usize; 2],
    pub noise_dim: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    /// Epochs of the initial fit (and of each from-scratch retrain).
    pub epochs: usize,
    /// Epochs over the whole training set after each round of queries.
    pub round_epochs: usize,
    pub init_std: f64,

    // query selection
    pub pool_size: usize,
    pub mc_samples: usize,
    /// Ranking samples for menus recommended at evaluation time.
    pub eval_samples: usize,
    pub finetune_epochs: usize,
    pub finetune_learning_rate: f64,
    pub replay: usize,

    // media experiment
    pub n_users: usize,
    pub n_items: usize,
    pub test_items: usize,
    pub menu_size: usize,
    pub pretrain_per_user: usize,
    /// Cap on users and items kept from a ratings file.
    pub max_users: usize,
    pub max_items: usize,

    // admissions experiment
    pub top_k: usize,
    pub initial_comparisons: usize,
    pub n_clusters: usize,

    // appendix study
    pub fractions: Vec<f64>,
    pub density: f64,
    pub max_pairs_per_user: usize,
    pub shadow_dim: usize,
    pub alpha: f64,
}

impl ExperimentSpec {
    /// Desk-scale defaults for `kind`.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = Self {
            experiment: kind,
            data: None,
            strategy: Strategy::Utility,
            rounds: 30,
            queries_per_round: 10,
            eval_every: 1,
            seeds: vec![0],
            out: None,
            user_selection: UserSelection::RoundRobin,
            retrain: RetrainMode::Finetune,
            latent_dim: 4,
            embed_dim: 8,
            hidden: [16, 8],
            noise_dim: 0,
            learning_rate: 0.05,
            l2_lambda: 0.05,
            epochs: 100,
            round_epochs: 10,
            init_std: 0.1,
            pool_size: 50,
            mc_samples: 200,
            eval_samples: 1000,
            finetune_epochs: 5,
            finetune_learning_rate: 0.05,
            replay: 20,
            n_users: 20,
            n_items: 50,
            test_items: 20,
            menu_size: 3,
            pretrain_per_user: 5,
            max_users: 200,
            max_items: 300,
            top_k: 10,
            initial_comparisons: 5,
            n_clusters: 8,
            fractions: vec![0.1, 0.4, 0.8],
            density: 1.0,
            max_pairs_per_user: 200,
            shadow_dim: 4,
            alpha: crate::plackett::DEFAULT_ALPHA,
        };
        match kind {
            ExperimentKind::Media => base,
            ExperimentKind::Admissions => Self { rounds: 100, queries_per_round: 1, pool_size: 40, menu_size: 10, ..base },
            ExperimentKind::Appendix => Self {
                strategy: Strategy::None,
                rounds: 0,
                epochs: 200,
                n_users: 30,
                n_items: 40,
                latent_dim: 20,
                init_std: 1.0,
                l2_lambda: 0.01,
                max_pairs_per_user: 1000,
                ..base
            },
        }
    }

    /// Builds a spec from `key = value` settings applied in order, starting
    /// from the defaults of the experiment named by the last `experiment` key.
    pub fn from_settings<K: AsRef<str>, V: AsRef<str>>(settings: &[(K, V)]) -> Result<Self, HarnessError> {
        let kind = settings
            .iter()
            .rev()
            .find(|(k, _)| normalize_key(k.as_ref()) == "experiment")
            .map(|(_, v)| v.as_ref().parse::<ExperimentKind>())
            .transpose()?
            .ok_or_else(|| spec_err("missing setting: experiment"))?;
        let mut spec = Self::defaults(kind);
        for (k, v) in settings {
            spec.apply(k.as_ref(), v.as_ref())?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Sets one field from its textual value. Keys accept `-` or `_`.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let key = normalize_key(key);
        let value = value.trim();
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, HarnessError> {
            v.parse().map_err(|_| spec_err(format!("{key}: cannot parse \"{v}\"")))
        }
        fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, HarnessError> {
            v.trim_matches(|c| c == '[' || c == ']')
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| num(key, s))
                .collect()
        }
        let k = key.as_str();
        match k {
            "experiment" => {
                let kind: ExperimentKind = value.parse()?;
                if kind != self.experiment {
                    return Err(spec_err(format!("experiment is {} but a setting names {kind}", self.experiment)));
                }
            }
            "data" => self.data = (!value.is_empty()).then(|| PathBuf::from(value)),
            "strategy" => self.strategy = value.parse()?,
            "rounds" => self.rounds = num(k, value)?,
            "queries_per_round" => self.queries_per_round = num(k, value)?,
            "eval_every" => self.eval_every = num(k, value)?,
            "seeds" => self.seeds = list(k, value)?,
            "out" => self.out = (!value.is_empty()).then(|| PathBuf::from(value)),
            "user_selection" => self.user_selection = value.parse()?,
            "retrain" => self.retrain = value.parse()?,
            "latent_dim" => self.latent_dim = num(k, value)?,
            "embed_dim" => self.embed_dim = num(k, value)?,
            "hidden" => {
                let h: Vec<usize> = list(k, value)?;
                self.hidden = h.try_into().map_err(|_| spec_err("hidden takes two widths, e.g. 16,8"))?;
            }
            "noise_dim" => self.noise_dim = num(k, value)?,
            "learning_rate" => self.learning_rate = num(k, value)?,
            "l2_lambda" => self.l2_lambda = num(k, value)?,
            "epochs" => self.epochs = num(k, value)?,
            "round_epochs" => self.round_epochs = num(k, value)?,
            "init_std" => self.init_std = num(k, value)?,
            "pool_size" => self.pool_size = num(k, value)?,
            "mc_samples" => self.mc_samples = num(k, value)?,
            "eval_samples" => self.eval_samples = num(k, value)?,
            "finetune_epochs" => self.finetune_epochs = num(k, value)?,
            "finetune_learning_rate" => self.finetune_learning_rate = num(k, value)?,
            "replay" => self.replay = num(k, value)?,
            "n_users" => self.n_users = num(k, value)?,
            "n_items" => self.n_items = num(k, value)?,
            "test_items" => self.test_items = num(k, value)?,
            "menu_size" => self.menu_size = num(k, value)?,
            "pretrain_per_user" => self.pretrain_per_user = num(k, value)?,
            "max_users" => self.max_users = num(k, value)?,
            "max_items" => self.max_items = num(k, value)?,
            "top_k" => self.top_k = num(k, value)?,
            "initial_comparisons" => self.initial_comparisons = num(k, value)?,
            "n_clusters" => self.n_clusters = num(k, value)?,
            "fractions" => self.fractions = list(k, value)?,
            "density" => self.density = num(k, value)?,
            "max_pairs_per_user" => self.max_pairs_per_user = num(k, value)?,
            "shadow_dim" => self.shadow_dim = num(k, value)?,
            "alpha" => self.alpha = num(k, value)?,
            other => return Err(spec_err(format!("unknown setting \"{other}\""))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let positive = |name: &str, v: usize| if v == 0 { Err(spec_err(format!("{name} must be at least 1"))) } else { Ok(()) };
        let rate = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(spec_err(format!("{name} must be positive, got {v}")))
            }
        };
        if self.seeds.is_empty() {
            return Err(spec_err("at least one seed is required"));
        }
        let mut uniq = self.seeds.clone();
        uniq.sort_unstable();
        uniq.dedup();
        if uniq.len() != self.seeds.len() {
            return Err(spec_err("seeds must be distinct"));
        }
        positive("eval_every", self.eval_every)?;
        positive("pool_size", self.pool_size)?;
        positive("mc_samples", self.mc_samples)?;
        positive("eval_samples", self.eval_samples)?;
        rate("learning_rate", self.learning_rate)?;
        rate("finetune_learning_rate", self.finetune_learning_rate)?;
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(spec_err("l2_lambda must be >= 0"));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return Err(spec_err("init_std must be >= 0"));
        }
        match self.experiment {
            ExperimentKind::Media => {
                positive("latent_dim", self.latent_dim)?;
                positive("menu_size", self.menu_size)?;
                positive("n_users", self.n_users)?;
                if self.strategy == Strategy::Cluster {
                    return Err(spec_err("the cluster strategy needs item features; use it with the admissions experiment"));
                }
                if self.data.is_none() && self.test_items + 2 > self.n_items {
                    return Err(spec_err(format!("test_items {} leaves fewer than 2 training items out of {}", self.test_items, self.n_items)));
                }
                if self.test_items < 2 || self.menu_size > self.test_items {
                    return Err(spec_err("need test_items >= 2 and menu_size <= test_items"));
                }
            }
            ExperimentKind::Admissions => {
                positive("top_k", self.top_k)?;
                positive("embed_dim", self.embed_dim)?;
                if self.hidden.contains(&0) {
                    return Err(spec_err("hidden widths must be positive"));
                }
                if self.strategy == Strategy::Cluster && self.n_clusters < 2 {
                    return Err(spec_err("n_clusters must be at least 2"));
                }
            }
            ExperimentKind::Appendix => {
                positive("latent_dim", self.latent_dim)?;
                positive("shadow_dim", self.shadow_dim)?;
                if self.fractions.is_empty() || self.fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
                    return Err(spec_err("fractions must be a nonempty list of values in (0, 1]"));
                }
                if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
                    return Err(spec_err("alpha must be >= 0"));
                }
                if !(self.density > 0.0 && self.density <= 1.0) {
                    return Err(spec_err("density must lie in (0, 1]"));
                }
            }
        }
        Ok(())
    }

    /// Whether metrics are recorded after `round` rounds (round 0 is before any query).
    pub fn is_eval_round(&self, round: usize) -> bool {
        round % self.eval_every == 0 || round == self.rounds
    }
}

fn normalize_key(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('-', "_").to_ascii_lowercase()
}

/// Independent, reproducible seed for a `(base, stream, index)` triple.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(mix(base) ^ stream) ^ index)
}

/// Seed streams used by the runners.
pub(crate) mod stream {
    pub const WORLD: u64 = 1;
    pub const HOLDOUT: u64 = 2;
    pub const PRETRAIN: u64 = 3;
    pub const INIT: u64 = 4;
    pub const TRAIN: u64 = 5;
    pub const EVAL: u64 = 6;
    pub const POOL: u64 = 7;
    pub const SELECT: u64 = 8;
    pub const MC: u64 = 9;
    pub const FINETUNE: u64 = 10;
    pub const SPLIT: u64 = 11;
    pub const USERS: u64 = 12;
}

/// Runs the experiment named by the spec over all its seeds.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    spec.validate()?;
    match spec.experiment {
        ExperimentKind::Media => run_media(spec),
        ExperimentKind::Admissions => run_admissions(spec),
        ExperimentKind::Appendix => run_appendix_study(spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settings_apply_in_order() {
        let spec = ExperimentSpec::from_settings(&[("experiment", "media"), ("rounds", "3"), ("--pool-size", "7"), ("rounds", "4"), ("seeds", "1,2,3")]).unwrap();
        assert_eq!(spec.rounds, 4);
        assert_eq!(spec.pool_size, 7);
        assert_eq!(spec.seeds, vec![1, 2, 3]);
        assert_eq!(spec.menu_size, 3);
        let spec = ExperimentSpec::from_settings(&[("experiment", "admissions")]).unwrap();
        assert_eq!((spec.rounds, spec.top_k), (100, 10));
    }

    #[test]
    fn bad_settings_are_spec_errors() {
        for settings in [
            vec![("rounds", "3")],
            vec![("experiment", "nope")],
            vec![("experiment", "media"), ("rounds", "x")],
            vec![("experiment", "media"), ("bogus", "1")],
            vec![("experiment", "media"), ("strategy", "cluster")],
            vec![("experiment", "media"), ("seeds", "1,1")],
            vec![("experiment", "appendix"), ("fractions", "0.5,1.5")],
        ] {
            let err = ExperimentSpec::from_settings(&settings).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{err}");
        }
    }

    #[test]
    fn derived_seeds_differ_by_stream_and_index() {
        let a = derive_seed(7, stream::EVAL, 0);
        assert_ne!(a, derive_seed(7, stream::EVAL, 1));
        assert_ne!(a, derive_seed(7, stream::MC, 0));
        assert_ne!(a, derive_seed(8, stream::EVAL, 0));
        assert_eq!(a, derive_seed(7, stream::EVAL, 0));
    }
}
