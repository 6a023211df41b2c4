//! TOML run configuration. Every field is optional and falls back to the
//! preset of the selected scenario kind.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use hebb::harness::{
    ExtractorSpec, Imbalance, Method, ScenarioConfig, ScenarioKind, SgdSettings, TaskGenerator,
};
use hebb::Capacity;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub kind: Option<String>,
    pub name: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub methods: Option<Vec<String>>,
    pub seeds: Option<Vec<u64>>,
    /// `"unbounded"` or a ring-buffer size.
    pub capacity: Option<CapacityField>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub extractor: ExtractorSection,
    #[serde(default)]
    pub pretrain: SgdSection,
    #[serde(default)]
    pub finetune: SgdSection,
    #[serde(default)]
    pub adaptation: AdaptationSection,
    #[serde(default)]
    pub mixture: MixtureSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CapacityField {
    Size(u64),
    Name(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub n_classes: Option<usize>,
    pub input_dim: Option<usize>,
    pub per_class_count: Option<usize>,
    pub test_per_class: Option<usize>,
    pub cluster_spread: Option<f64>,
    pub mean_scale: Option<f64>,
    pub seed: Option<u64>,
    pub permutation_seeds: Option<Vec<u64>>,
    /// `"balanced"` or `"major:minor"`, e.g. `"2:1"`.
    pub imbalance: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub n_tasks: Option<usize>,
    pub epochs_per_task: Option<usize>,
    pub stored_per_task: Option<usize>,
    pub pretrain_classes: Option<Vec<usize>>,
    pub incremental_epochs: Option<usize>,
    pub eval_every: Option<usize>,
    pub finetune_cadence: Option<usize>,
    pub memory_write: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractorSection {
    /// `"identity"` or `"random_projection"`.
    pub kind: Option<String>,
    pub output_dim: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdSection {
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptationSection {
    pub k: Option<usize>,
    pub eps: Option<f64>,
    pub lambda: Option<f64>,
    pub steps: Option<usize>,
    pub eta: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSection {
    pub gamma: Option<f64>,
    pub theta: Option<f64>,
    pub normalize_terms: Option<bool>,
}

/// A fully resolved run: scenario settings shared by all methods.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub name: String,
    pub out_dir: Option<PathBuf>,
    pub methods: Vec<Method<f64>>,
    pub base: ScenarioConfig<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config file {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }
}

pub fn parse_method(s: &str) -> Result<Method<f64>> {
    Ok(match s {
        "parametric" => Method::Parametric,
        "mixture" => Method::Mixture,
        "mbpa" => Method::MbPA,
        "hebb" => Method::Hebb,
        "hebb-v1" => Method::HebbV1,
        "hebb-v2" => Method::HebbV2,
        other => match other.strip_prefix("hebb-v3:") {
            Some(w) => Method::HebbV3 {
                weight: f64::from_str(w).map_err(|_| anyhow!("bad hebb-v3 weight `{w}`"))?,
            },
            None => bail!(
                "unknown method `{other}` (expected parametric, mixture, mbpa, hebb, hebb-v1, hebb-v2 or hebb-v3:<w>)"
            ),
        },
    })
}

fn parse_imbalance(s: &str) -> Result<Imbalance> {
    if s == "balanced" {
        return Ok(Imbalance::Balanced);
    }
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| anyhow!("expected `balanced` or `major:minor`, got `{s}`"))?;
    Ok(Imbalance::Ratio {
        major: a
            .trim()
            .parse()
            .with_context(|| format!("bad ratio `{s}`"))?,
        minor: b
            .trim()
            .parse()
            .with_context(|| format!("bad ratio `{s}`"))?,
    })
}

struct Checker {
    errors: Vec<String>,
}

impl Checker {
    fn require(&mut self, ok: bool, path: &str, msg: &str) {
        if !ok {
            self.errors.push(format!("{path}: {msg}"));
        }
    }

    fn positive_f(&mut self, v: f64, path: &str) {
        self.require(
            v > 0.0 && v.is_finite(),
            path,
            "must be a positive finite number",
        );
    }

    fn positive_u(&mut self, v: usize, path: &str) {
        self.require(v > 0, path, "must be positive");
    }

    fn unit(&mut self, v: f64, path: &str) {
        self.require((0.0..=1.0).contains(&v), path, "must lie in [0, 1]");
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl ConfigFile {
    /// Merges the file onto the preset of its kind and validates every field.
    pub fn resolve(self) -> Result<RunPlan> {
        let kind = self.kind.clone().unwrap_or_else(|| "online".to_string());
        let mut cfg = ScenarioConfig::<f64>::default_for(&kind).ok_or_else(|| {
            anyhow!("kind: unknown scenario `{kind}` (expected continual, incremental or online)")
        })?;
        let mut errs = Checker { errors: Vec::new() };

        // data
        let d = &self.data;
        let mut blobs = cfg.task.blobs().clone();
        set(&mut blobs.n_classes, d.n_classes);
        set(&mut blobs.input_dim, d.input_dim);
        set(&mut blobs.per_class_count, d.per_class_count);
        set(&mut blobs.test_per_class, d.test_per_class);
        set(&mut blobs.cluster_spread, d.cluster_spread);
        set(&mut blobs.mean_scale, d.mean_scale);
        set(&mut blobs.seed, d.seed);
        errs.require(blobs.n_classes >= 2, "data.n_classes", "must be at least 2");
        errs.positive_u(blobs.input_dim, "data.input_dim");
        errs.positive_u(blobs.per_class_count, "data.per_class_count");
        errs.positive_u(blobs.test_per_class, "data.test_per_class");
        errs.positive_f(blobs.cluster_spread, "data.cluster_spread");
        errs.require(
            blobs.mean_scale >= 0.0 && blobs.mean_scale.is_finite(),
            "data.mean_scale",
            "must be a non-negative finite number",
        );
        if let Some(s) = &d.imbalance {
            match parse_imbalance(s) {
                Ok(Imbalance::Ratio { major, minor }) if minor == 0 || major < minor => errs
                    .require(
                        false,
                        "data.imbalance",
                        "ratio must satisfy major >= minor > 0",
                    ),
                Ok(imb) => cfg.task.imbalance = imb,
                Err(e) => errs.require(false, "data.imbalance", &e.to_string()),
            }
        }

        // scenario
        let s = &self.scenario;
        match &mut cfg.kind {
            ScenarioKind::Continual {
                n_tasks,
                epochs_per_task,
                stored_per_task,
            } => {
                set(n_tasks, s.n_tasks);
                set(epochs_per_task, s.epochs_per_task);
                if s.stored_per_task.is_some() {
                    *stored_per_task = s.stored_per_task;
                }
                errs.positive_u(*n_tasks, "scenario.n_tasks");
                errs.positive_u(*epochs_per_task, "scenario.epochs_per_task");
                errs.require(
                    *stored_per_task != Some(0),
                    "scenario.stored_per_task",
                    "must be positive",
                );
                let seeds = match (&d.permutation_seeds, &cfg.task.generator) {
                    (Some(seeds), _) => seeds.clone(),
                    (
                        None,
                        TaskGenerator::Permuted {
                            permutation_seeds, ..
                        },
                    ) => {
                        let mut seeds = permutation_seeds.clone();
                        let next = seeds.iter().max().map_or(0, |m| m + 1);
                        seeds.extend((seeds.len()..*n_tasks).map(|i| next + i as u64));
                        seeds
                    }
                    (None, TaskGenerator::Blobs(_)) => (0..*n_tasks as u64).collect(),
                };
                errs.require(
                    seeds.len() >= *n_tasks,
                    "data.permutation_seeds",
                    "needs one seed per task",
                );
                cfg.task.generator = TaskGenerator::Permuted {
                    base: blobs.clone(),
                    n_tasks: *n_tasks,
                    permutation_seeds: seeds,
                };
                for (field, present) in [
                    ("scenario.pretrain_classes", s.pretrain_classes.is_some()),
                    (
                        "scenario.incremental_epochs",
                        s.incremental_epochs.is_some(),
                    ),
                    ("scenario.eval_every", s.eval_every.is_some()),
                    ("scenario.finetune_cadence", s.finetune_cadence.is_some()),
                    ("scenario.memory_write", s.memory_write.is_some()),
                ] {
                    errs.require(!present, field, "not used by continual scenarios");
                }
            }
            ScenarioKind::Incremental {
                pretrain_classes,
                incremental_epochs,
                eval_every,
            } => {
                if let Some(p) = &s.pretrain_classes {
                    *pretrain_classes = p.iter().copied().collect();
                }
                set(incremental_epochs, s.incremental_epochs);
                set(eval_every, s.eval_every);
                errs.positive_u(*eval_every, "scenario.eval_every");
                check_pretrain(&mut errs, pretrain_classes, blobs.n_classes);
                cfg.task.generator = TaskGenerator::Blobs(blobs.clone());
                for (field, present) in [
                    ("scenario.n_tasks", s.n_tasks.is_some()),
                    ("scenario.epochs_per_task", s.epochs_per_task.is_some()),
                    ("scenario.stored_per_task", s.stored_per_task.is_some()),
                    ("scenario.finetune_cadence", s.finetune_cadence.is_some()),
                    ("scenario.memory_write", s.memory_write.is_some()),
                ] {
                    errs.require(!present, field, "not used by incremental scenarios");
                }
            }
            ScenarioKind::Online {
                pretrain_classes,
                finetune_cadence,
                memory_write,
            } => {
                if let Some(p) = &s.pretrain_classes {
                    *pretrain_classes = p.iter().copied().collect();
                }
                set(finetune_cadence, s.finetune_cadence);
                set(memory_write, s.memory_write);
                errs.positive_u(*finetune_cadence, "scenario.finetune_cadence");
                check_pretrain(&mut errs, pretrain_classes, blobs.n_classes);
                cfg.task.generator = TaskGenerator::Blobs(blobs.clone());
                for (field, present) in [
                    ("scenario.n_tasks", s.n_tasks.is_some()),
                    ("scenario.epochs_per_task", s.epochs_per_task.is_some()),
                    ("scenario.stored_per_task", s.stored_per_task.is_some()),
                    (
                        "scenario.incremental_epochs",
                        s.incremental_epochs.is_some(),
                    ),
                    ("scenario.eval_every", s.eval_every.is_some()),
                ] {
                    errs.require(!present, field, "not used by online scenarios");
                }
            }
        }
        if matches!(cfg.kind, ScenarioKind::Continual { .. }) && d.imbalance.is_some() {
            errs.require(false, "data.imbalance", "not used by continual scenarios");
        }

        // extractor
        let e = &self.extractor;
        match e.kind.as_deref() {
            None | Some("identity") if e.output_dim.is_none() && e.seed.is_none() => {
                if e.kind.is_some() {
                    cfg.extractor = ExtractorSpec::Identity;
                }
            }
            None | Some("identity") => errs.require(
                false,
                "extractor",
                "output_dim and seed only apply to kind = \"random_projection\"",
            ),
            Some("random_projection") => {
                let output_dim = e.output_dim.unwrap_or(64);
                errs.positive_u(output_dim, "extractor.output_dim");
                cfg.extractor = ExtractorSpec::RandomProjection {
                    output_dim,
                    seed: e.seed.unwrap_or(0),
                };
            }
            Some(other) => errs.require(
                false,
                "extractor.kind",
                &format!("unknown extractor `{other}` (expected identity or random_projection)"),
            ),
        }

        // optimizers
        for (name, section, slot) in [
            ("pretrain", &self.pretrain, &mut cfg.pretrain),
            ("finetune", &self.finetune, &mut cfg.finetune),
        ] {
            merge_sgd(&mut errs, name, section, slot);
        }

        // adaptation
        let a = &self.adaptation;
        let ad = &mut cfg.adaptation;
        set(&mut ad.k, a.k);
        set(&mut ad.eps, a.eps);
        set(&mut ad.lambda, a.lambda);
        set(&mut ad.steps, a.steps);
        set(&mut ad.eta, a.eta);
        set(&mut ad.beta, a.beta);
        errs.positive_u(ad.k, "adaptation.k");
        errs.positive_f(ad.eps, "adaptation.eps");
        errs.positive_f(ad.lambda, "adaptation.lambda");
        errs.positive_u(ad.steps, "adaptation.steps");
        errs.positive_f(ad.eta, "adaptation.eta");
        errs.require(
            (0.0..1.0).contains(&ad.beta),
            "adaptation.beta",
            "must lie in [0, 1)",
        );

        // mixture
        let m = &self.mixture;
        set(&mut cfg.mixture.gamma, m.gamma);
        set(&mut cfg.mixture.theta, m.theta);
        set(&mut cfg.mixture.normalize_terms, m.normalize_terms);
        errs.unit(cfg.mixture.gamma, "mixture.gamma");
        errs.positive_f(cfg.mixture.theta, "mixture.theta");

        // top level
        if let Some(seeds) = &self.seeds {
            errs.require(!seeds.is_empty(), "seeds", "at least one seed is required");
            cfg.seeds = seeds.clone();
        }
        match &self.capacity {
            None => {}
            Some(CapacityField::Name(n)) if n == "unbounded" => cfg.capacity = Capacity::Unbounded,
            Some(CapacityField::Size(0)) => {
                errs.require(false, "capacity", "ring buffer size must be positive")
            }
            Some(CapacityField::Size(n)) => cfg.capacity = Capacity::RingBuffer(*n as usize),
            Some(CapacityField::Name(n)) => errs.require(
                false,
                "capacity",
                &format!("expected \"unbounded\" or a positive size, got `{n}`"),
            ),
        }
        let mut methods = Vec::new();
        for (i, name) in self
            .methods
            .clone()
            .unwrap_or_else(|| vec!["hebb".to_string()])
            .iter()
            .enumerate()
        {
            match parse_method(name) {
                Ok(Method::HebbV3 { weight }) if !(0.0..=1.0).contains(&weight) => errs.require(
                    false,
                    &format!("methods[{i}]"),
                    "hebb-v3 weight must lie in [0, 1]",
                ),
                Ok(m) => methods.push(m),
                Err(e) => errs.require(false, &format!("methods[{i}]"), &e.to_string()),
            }
        }
        errs.require(
            self.methods.as_ref().is_none_or(|m| !m.is_empty()),
            "methods",
            "at least one method is required",
        );

        if !errs.errors.is_empty() {
            bail!("{}", errs.errors.join("\n"));
        }
        cfg.validate().map_err(|e| anyhow!("{e}"))?;
        Ok(RunPlan {
            name: self.name.unwrap_or(kind),
            out_dir: self.out_dir,
            methods,
            base: cfg,
        })
    }
}

fn check_pretrain(errs: &mut Checker, classes: &BTreeSet<usize>, n_classes: usize) {
    errs.require(
        !classes.is_empty(),
        "scenario.pretrain_classes",
        "must not be empty",
    );
    if let Some(c) = classes.iter().find(|&&c| c >= n_classes) {
        errs.require(
            false,
            "scenario.pretrain_classes",
            &format!("class {c} is outside 0..{n_classes}"),
        );
    }
}

fn merge_sgd(errs: &mut Checker, name: &str, section: &SgdSection, slot: &mut SgdSettings<f64>) {
    set(&mut slot.epochs, section.epochs);
    set(&mut slot.lr, section.lr);
    set(&mut slot.batch_size, section.batch_size);
    errs.positive_f(slot.lr, &format!("{name}.lr"));
    errs.positive_u(slot.batch_size, &format!("{name}.batch_size"));
}
