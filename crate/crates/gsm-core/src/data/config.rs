//! Run-configuration files: a flat `key = value` text document with `#`
//! comments. Unknown keys are rejected so typos fail fast, and command-line
//! overrides go through the same parser as the file itself.

use crate::data::dataset::{Dataset, Split};
use crate::data::idx::load_mnist_idx;
use crate::data::synthetic::{digits_dataset, synthetic_dataset};
use crate::error::{Error, Result};
use crate::nn::model::ModelSpec;
use crate::optim::{q_from_compression, GsmConfig, LrStage};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Base,
    Gsm,
    GsmNoReselection,
    Lottery,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::Base => "base",
            RunMode::Gsm => "gsm",
            RunMode::GsmNoReselection => "gsm-no-reselection",
            RunMode::Lottery => "lottery",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(RunMode::Base),
            "gsm" => Ok(RunMode::Gsm),
            "gsm-no-reselection" => Ok(RunMode::GsmNoReselection),
            "lottery" => Ok(RunMode::Lottery),
            other => Err(Error::Config(format!("unknown mode: {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    /// IDX files `train-images-idx3-ubyte` etc. under `dir`.
    Mnist { dir: PathBuf },
    /// Rendered digit corpus.
    Digits { train_n: usize, test_n: usize, data_seed: u64 },
    /// Gaussian cluster vectors.
    Synthetic {
        train_n: usize,
        test_n: usize,
        classes: usize,
        dims: usize,
        spread: f32,
        data_seed: u64,
    },
}

/// Everything one run needs. Field names are the config keys.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: RunMode,
    pub model: String,
    pub dataset: DatasetSpec,
    pub seed: u64,
    pub beta: f32,
    pub eta: f32,
    pub lr_schedule: Vec<LrStage>,
    /// Schedule for the ticket-search sparse leg of a lottery run; defaults
    /// to `lr_schedule`.
    pub gsm_lr_schedule: Option<Vec<LrStage>>,
    pub batch_size: usize,
    pub q: Option<usize>,
    pub compression: Option<f64>,
    pub eval_interval: u64,
    pub out_dir: Option<PathBuf>,
    pub init_checkpoint: Option<PathBuf>,
}

pub const KNOWN_KEYS: &[&str] = &[
    "mode",
    "model",
    "dataset",
    "data_dir",
    "train_n",
    "test_n",
    "classes",
    "dims",
    "spread",
    "data_seed",
    "seed",
    "beta",
    "eta",
    "lr_schedule",
    "gsm_lr_schedule",
    "batch_size",
    "q",
    "compression",
    "eval_interval",
    "out_dir",
    "init_checkpoint",
];

fn parse_schedule(text: &str) -> Result<Vec<LrStage>> {
    text.split(',')
        .map(|stage| {
            let (alpha, epochs) = stage
                .trim()
                .rsplit_once('x')
                .ok_or_else(|| Error::Config(format!("lr stage {stage:?} wants <alpha>x<epochs>")))?;
            Ok(LrStage {
                alpha: alpha
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad alpha in stage {stage:?}")))?,
                epochs: epochs
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad epoch count in stage {stage:?}")))?,
            })
        })
        .collect()
}

fn schedule_text(schedule: &[LrStage]) -> String {
    schedule
        .iter()
        .map(|s| format!("{}x{}", s.alpha, s.epochs))
        .collect::<Vec<_>>()
        .join(",")
}

fn collect_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key = value, got {line:?}", lineno + 1))
        })?;
        let key = key.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown config key: {key}")));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!("duplicate config key: {key}")));
        }
    }
    Ok(map)
}

impl RunConfig {
    /// Parse a config document, then apply `key=value` overrides on top.
    pub fn from_sources(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut map = collect_pairs(text)?;
        for (key, value) in overrides {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown config key: {key}")));
            }
            map.insert(key.clone(), value.clone());
        }
        Self::from_map(map)
    }

    pub fn from_file(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_sources(&text, overrides)
    }

    fn from_map(mut map: BTreeMap<String, String>) -> Result<Self> {
        fn take<T: std::str::FromStr>(
            map: &mut BTreeMap<String, String>,
            key: &str,
            default: T,
        ) -> Result<T> {
            match map.remove(key) {
                None => Ok(default),
                Some(v) => v
                    .parse()
                    .map_err(|_| Error::Config(format!("bad value for {key}: {v:?}"))),
            }
        }

        let mode = RunMode::parse(
            &map.remove("mode")
                .ok_or_else(|| Error::Config("config needs a mode".into()))?,
        )?;
        let model = map
            .remove("model")
            .ok_or_else(|| Error::Config("config needs a model".into()))?;
        ModelSpec::parse(&model).map_err(|e| Error::Config(format!("bad model: {e}")))?;

        let dataset_kind = map.remove("dataset").unwrap_or_else(|| "digits".into());
        let data_seed = take(&mut map, "data_seed", 2026u64)?;
        let train_n = take(&mut map, "train_n", 60_000usize)?;
        let test_n = take(&mut map, "test_n", 10_000usize)?;
        let dataset = match dataset_kind.as_str() {
            "mnist" => DatasetSpec::Mnist {
                dir: PathBuf::from(map.remove("data_dir").ok_or_else(|| {
                    Error::Config("dataset = mnist needs data_dir".into())
                })?),
            },
            "digits" => DatasetSpec::Digits { train_n, test_n, data_seed },
            "synthetic" => DatasetSpec::Synthetic {
                train_n,
                test_n,
                classes: take(&mut map, "classes", 10usize)?,
                dims: take(&mut map, "dims", 16usize)?,
                spread: take(&mut map, "spread", 3.0f32)?,
                data_seed,
            },
            other => return Err(Error::Config(format!("unknown dataset kind: {other}"))),
        };

        let lr_schedule = match map.remove("lr_schedule") {
            Some(text) => parse_schedule(&text)?,
            None => vec![
                LrStage { epochs: 30, alpha: 3e-2 },
                LrStage { epochs: 8, alpha: 3e-3 },
                LrStage { epochs: 8, alpha: 3e-4 },
            ],
        };
        let gsm_lr_schedule = map
            .remove("gsm_lr_schedule")
            .map(|t| parse_schedule(&t))
            .transpose()?;

        let q = match map.remove("q") {
            None => None,
            Some(v) => Some(
                v.parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad value for q: {v:?}")))?,
            ),
        };
        let compression = match map.remove("compression") {
            None => None,
            Some(v) => Some(
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad value for compression: {v:?}")))?,
            ),
        };
        if q.is_some() && compression.is_some() {
            return Err(Error::Config("set either q or compression, not both".into()));
        }

        let cfg = RunConfig {
            mode,
            model,
            dataset,
            seed: take(&mut map, "seed", 0u64)?,
            beta: take(&mut map, "beta", 0.99f32)?,
            eta: take(&mut map, "eta", 5e-4f32)?,
            lr_schedule,
            gsm_lr_schedule,
            batch_size: take(&mut map, "batch_size", 256usize)?,
            q,
            compression,
            eval_interval: take(&mut map, "eval_interval", 2000u64)?,
            out_dir: map.remove("out_dir").map(PathBuf::from),
            init_checkpoint: map.remove("init_checkpoint").map(PathBuf::from),
        };
        if let Some(stray) = map.into_iter().next() {
            return Err(Error::Config(format!(
                "key {} does not apply to this dataset kind",
                stray.0
            )));
        }
        if cfg.eval_interval == 0 {
            return Err(Error::Config("eval_interval must be >= 1".into()));
        }
        Ok(cfg)
    }

    /// Canonical echo of the resolved configuration.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("mode = {}\n", self.mode.as_str()));
        out.push_str(&format!("model = {}\n", self.model));
        match &self.dataset {
            DatasetSpec::Mnist { dir } => {
                out.push_str("dataset = mnist\n");
                out.push_str(&format!("data_dir = {}\n", dir.display()));
            }
            DatasetSpec::Digits { train_n, test_n, data_seed } => {
                out.push_str("dataset = digits\n");
                out.push_str(&format!("train_n = {train_n}\n"));
                out.push_str(&format!("test_n = {test_n}\n"));
                out.push_str(&format!("data_seed = {data_seed}\n"));
            }
            DatasetSpec::Synthetic { train_n, test_n, classes, dims, spread, data_seed } => {
                out.push_str("dataset = synthetic\n");
                out.push_str(&format!("train_n = {train_n}\n"));
                out.push_str(&format!("test_n = {test_n}\n"));
                out.push_str(&format!("classes = {classes}\n"));
                out.push_str(&format!("dims = {dims}\n"));
                out.push_str(&format!("spread = {spread}\n"));
                out.push_str(&format!("data_seed = {data_seed}\n"));
            }
        }
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("beta = {}\n", self.beta));
        out.push_str(&format!("eta = {}\n", self.eta));
        out.push_str(&format!("lr_schedule = {}\n", schedule_text(&self.lr_schedule)));
        if let Some(s) = &self.gsm_lr_schedule {
            out.push_str(&format!("gsm_lr_schedule = {}\n", schedule_text(s)));
        }
        out.push_str(&format!("batch_size = {}\n", self.batch_size));
        if let Some(q) = self.q {
            out.push_str(&format!("q = {q}\n"));
        }
        if let Some(c) = self.compression {
            out.push_str(&format!("compression = {c}\n"));
        }
        out.push_str(&format!("eval_interval = {}\n", self.eval_interval));
        if let Some(d) = &self.out_dir {
            out.push_str(&format!("out_dir = {}\n", d.display()));
        }
        if let Some(p) = &self.init_checkpoint {
            out.push_str(&format!("init_checkpoint = {}\n", p.display()));
        }
        out
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        ModelSpec::parse(&self.model)
    }

    /// Resolve the active count against a model's kernel total. Base runs
    /// default to the full parameter count (pruning becomes a no-op);
    /// sparse runs must set `q` or `compression`.
    pub fn resolved_q(&self, total_kernel_params: usize) -> Result<usize> {
        match (self.q, self.compression) {
            (Some(q), _) => {
                if q == 0 || q > total_kernel_params {
                    Err(Error::Config(format!(
                        "q = {q} outside 1..={total_kernel_params}"
                    )))
                } else {
                    Ok(q)
                }
            }
            (None, Some(c)) => q_from_compression(total_kernel_params, c),
            (None, None) if self.mode == RunMode::Base => Ok(total_kernel_params),
            (None, None) => Err(Error::Config(
                "sparse training needs q or compression".into(),
            )),
        }
    }

    pub fn gsm_config(&self, total_kernel_params: usize) -> Result<GsmConfig> {
        let cfg = GsmConfig {
            beta: self.beta,
            eta: self.eta,
            lr_schedule: self.lr_schedule.clone(),
            q: self.resolved_q(total_kernel_params)?,
            batch_size: self.batch_size,
        };
        cfg.validate(total_kernel_params)?;
        Ok(cfg)
    }

    /// Materialize the train/test datasets.
    pub fn load_data(&self) -> Result<(Dataset, Dataset)> {
        match &self.dataset {
            DatasetSpec::Mnist { dir } => Ok((
                load_mnist_idx(
                    dir.join("train-images-idx3-ubyte"),
                    dir.join("train-labels-idx1-ubyte"),
                    Split::Train,
                )?,
                load_mnist_idx(
                    dir.join("t10k-images-idx3-ubyte"),
                    dir.join("t10k-labels-idx1-ubyte"),
                    Split::Test,
                )?,
            )),
            DatasetSpec::Digits { train_n, test_n, data_seed } => Ok((
                digits_dataset(*data_seed, *train_n, Split::Train)?,
                digits_dataset(*data_seed, *test_n, Split::Test)?,
            )),
            DatasetSpec::Synthetic { train_n, test_n, classes, dims, spread, data_seed } => Ok((
                synthetic_dataset(*data_seed, *train_n, *classes, *dims, *spread, Split::Train)?,
                synthetic_dataset(*data_seed, *test_n, *classes, *dims, *spread, Split::Test)?,
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# smoke config
mode = gsm
model = lenet-300-100
dataset = digits
train_n = 512
test_n = 128
seed = 3
beta = 0.99
eta = 5e-4
lr_schedule = 3e-2x2,3e-3x1
batch_size = 64
compression = 10
eval_interval = 100
";

    #[test]
    fn sample_config_parses() {
        let cfg = RunConfig::from_sources(SAMPLE, &[]).unwrap();
        assert_eq!(cfg.mode, RunMode::Gsm);
        assert_eq!(cfg.batch_size, 64);
        assert_eq!(cfg.lr_schedule.len(), 2);
        assert_eq!(cfg.resolved_q(266_200).unwrap(), 26_620);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = format!("{SAMPLE}typo_key = 3\n");
        match RunConfig::from_sources(&text, &[]) {
            Err(Error::Config(msg)) => assert!(msg.contains("typo_key")),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn overrides_apply_after_file_and_reject_unknown() {
        let cfg = RunConfig::from_sources(
            SAMPLE,
            &[("batch_size".into(), "32".into()), ("seed".into(), "9".into())],
        )
        .unwrap();
        assert_eq!(cfg.batch_size, 32);
        assert_eq!(cfg.seed, 9);
        assert!(RunConfig::from_sources(SAMPLE, &[("nope".into(), "1".into())]).is_err());
    }

    #[test]
    fn q_and_compression_are_mutually_exclusive() {
        let text = format!("{SAMPLE}q = 100\n");
        assert!(RunConfig::from_sources(&text, &[]).is_err());
    }

    #[test]
    fn echo_text_reparses_identically() {
        let cfg = RunConfig::from_sources(SAMPLE, &[]).unwrap();
        let echoed = RunConfig::from_sources(&cfg.to_text(), &[]).unwrap();
        assert_eq!(cfg, echoed);
    }

    #[test]
    fn synthetic_keys_do_not_apply_to_digits() {
        let text = format!("{SAMPLE}dims = 4\n");
        assert!(RunConfig::from_sources(&text, &[]).is_err());
    }

    #[test]
    fn base_mode_defaults_q_to_total() {
        let text = SAMPLE.replace("mode = gsm", "mode = base").replace("compression = 10\n", "");
        let cfg = RunConfig::from_sources(&text, &[]).unwrap();
        assert_eq!(cfg.resolved_q(1000).unwrap(), 1000);
    }

    #[test]
    fn sparse_mode_requires_a_target() {
        let text = SAMPLE.replace("compression = 10\n", "");
        let cfg = RunConfig::from_sources(&text, &[]).unwrap();
        assert!(cfg.resolved_q(1000).is_err());
    }
}
