use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::adaptation::{adapted_predict, mixed_update, AdaptationConfig};
use crate::baselines::{mixture_predict, MixtureConfig};
use crate::classifier::{train, FeatureExtractor, LabeledExample, OutputLayer};
use crate::error::Result;
use crate::memory::{Capacity, EpisodicMemory};
use crate::scalar::{argmax, Real};
use crate::ClassId;

use super::config::{Method, ScenarioConfig, ScenarioKind, SgdSettings};
use super::data::{apply_imbalance, mix_seed, Dataset};
use super::record::{RunRecord, ScenarioReport, Tally};

const TRAIN_STREAM: u64 = 0x7472_6169_6e00_0000;
const ORDER_STREAM: u64 = 0x6f72_6465_7200_0000;
const STORE_STREAM: u64 = 0x7374_6f72_6500_0000;

/// Trained classifier plus its episodic memory.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveClassifier<T> {
    pub extractor: FeatureExtractor<T>,
    pub layer: OutputLayer<T>,
    pub memory: EpisodicMemory<T>,
    pub pretrain_classes: BTreeSet<ClassId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub class: ClassId,
    pub probs: Vec<T>,
    /// False when the memory could not be consulted.
    pub adapted: bool,
}

impl<T: Real> AdaptiveClassifier<T> {
    pub fn new(
        extractor: FeatureExtractor<T>,
        n_classes: usize,
        capacity: Capacity,
        pretrain_classes: BTreeSet<ClassId>,
    ) -> Result<Self> {
        let dim = extractor.output_dim();
        Ok(AdaptiveClassifier {
            layer: OutputLayer::zeros(dim, n_classes),
            memory: EpisodicMemory::new(dim, capacity)?,
            extractor,
            pretrain_classes,
        })
    }

    /// Registers `label` if needed and stores `(h, label)`.
    pub fn store(&mut self, h: &[T], label: ClassId) -> Result<()> {
        self.layer.ensure_class(label);
        self.memory.write(h, label)?;
        Ok(())
    }

    /// Trains on `data`, then stores every example's representation once.
    pub fn train_and_store(
        &mut self,
        data: &[LabeledExample<T>],
        sgd: &SgdSettings<T>,
        seed: u64,
    ) -> Result<()> {
        self.train_on(data, sgd, seed)?;
        self.store_all(data)
    }

    pub fn train_on(
        &mut self,
        data: &[LabeledExample<T>],
        sgd: &SgdSettings<T>,
        seed: u64,
    ) -> Result<()> {
        if let Some(max) = data.iter().map(|ex| ex.y).max() {
            self.layer.ensure_class(max);
        }
        train(
            &self.extractor,
            &mut self.layer,
            data,
            &sgd.train_config(seed),
        )?;
        Ok(())
    }

    pub fn store_all(&mut self, data: &[LabeledExample<T>]) -> Result<()> {
        for ex in data {
            let h = self.extractor.extract(&ex.x)?;
            self.store(&h, ex.y)?;
        }
        Ok(())
    }

    /// Class probabilities for representation `h` under `method`. Neither the
    /// layer nor the memory is modified.
    pub fn predict_features(
        &self,
        h: &[T],
        method: &Method<T>,
        adaptation: &AdaptationConfig<T>,
        mixture: &MixtureConfig<T>,
    ) -> Result<Prediction<T>> {
        let plain = |adapted| -> Result<Prediction<T>> {
            let probs = self.layer.predict_probs(h)?;
            Ok(Prediction {
                class: argmax(&probs),
                probs,
                adapted,
            })
        };
        let Some(mode) = method.adaptation_mode() else {
            return plain(false);
        };
        if self.memory.is_empty() {
            log::debug!("memory is empty; falling back to the unadapted prediction");
            return plain(false);
        }
        let nbrs = self.memory.retrieve_knn(h, adaptation.k, adaptation.eps)?;
        let probs = if let Method::Mixture = method {
            mixture_predict(&self.layer, &nbrs, h, mixture)?
        } else {
            let new_nbrs = nbrs.select_new(&self.pretrain_classes);
            let cfg = AdaptationConfig {
                mode,
                ..*adaptation
            };
            let delta = mixed_update(
                &self.layer,
                &nbrs,
                &new_nbrs,
                self.memory.class_counts(),
                &cfg,
            )?;
            adapted_predict(&self.layer, &delta, h)?
        };
        Ok(Prediction {
            class: argmax(&probs),
            probs,
            adapted: true,
        })
    }

    pub fn predict(
        &self,
        x: &[T],
        method: &Method<T>,
        adaptation: &AdaptationConfig<T>,
        mixture: &MixtureConfig<T>,
    ) -> Result<Prediction<T>> {
        let h = self.extractor.extract(x)?;
        self.predict_features(&h, method, adaptation, mixture)
    }

    /// Accuracy on `data`, split by whether a label was seen at pre-training.
    pub fn evaluate(
        &self,
        data: &[LabeledExample<T>],
        method: &Method<T>,
        adaptation: &AdaptationConfig<T>,
        mixture: &MixtureConfig<T>,
    ) -> Result<Tally> {
        let mut tally = Tally::default();
        for ex in data {
            let pred = self.predict(&ex.x, method, adaptation, mixture)?;
            tally.record(!self.pretrain_classes.contains(&ex.y), pred.class == ex.y);
        }
        Ok(tally)
    }
}

/// Data of one seeded run: the generated tasks and the pre-training subset.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseData<T> {
    pub tasks: Vec<Dataset<T>>,
    pub pretrain: Vec<LabeledExample<T>>,
}

/// Builds the extractor, generates the data of `seed` and trains the
/// classifier on the pre-training portion, storing each of its examples in
/// memory exactly once. Continual runs pre-train on the first task.
pub fn run_training_phase<T: Real>(
    cfg: &ScenarioConfig<T>,
    seed: u64,
) -> Result<(AdaptiveClassifier<T>, PhaseData<T>)> {
    cfg.validate()?;
    let blobs = cfg.task.blobs();
    let tasks = cfg.task.generate_tasks::<T>(seed);
    let extractor = cfg.extractor.build(blobs.input_dim, seed)?;
    let pretrain_classes = cfg.kind.pretrain_classes();
    let (pretrain, n_classes) = match &cfg.kind {
        ScenarioKind::Continual {
            epochs_per_task,
            stored_per_task,
            ..
        } => {
            let mut state = AdaptiveClassifier::new(
                extractor,
                blobs.n_classes,
                cfg.capacity,
                pretrain_classes,
            )?;
            continual_task(
                &mut state,
                cfg,
                &tasks[0],
                *epochs_per_task,
                *stored_per_task,
                seed,
                0,
            )?;
            let pretrain = tasks[0].train.clone();
            return Ok((state, PhaseData { tasks, pretrain }));
        }
        ScenarioKind::Incremental { .. } | ScenarioKind::Online { .. } => {
            let pretrain: Vec<LabeledExample<T>> = tasks[0]
                .train
                .iter()
                .filter(|ex| pretrain_classes.contains(&ex.y))
                .cloned()
                .collect();
            let n = pretrain_classes.iter().max().map_or(0, |&m| m + 1);
            (pretrain, n)
        }
    };
    let mut state = AdaptiveClassifier::new(extractor, n_classes, cfg.capacity, pretrain_classes)?;
    state.train_and_store(&pretrain, &cfg.pretrain, mix_seed(seed, TRAIN_STREAM))?;
    Ok((state, PhaseData { tasks, pretrain }))
}

/// One online inference step: predict `x` with the adapted layer, then reveal
/// `y_true`. The label is registered at first sight, and with
/// `memory_write` the pair is stored after the prediction was made.
pub fn run_inference_step<T: Real>(
    state: &mut AdaptiveClassifier<T>,
    x: &[T],
    y_true: ClassId,
    cfg: &ScenarioConfig<T>,
) -> Result<Prediction<T>> {
    let h = state.extractor.extract(x)?;
    let pred = state.predict_features(&h, &cfg.method, &cfg.adaptation, &cfg.mixture)?;
    if let ScenarioKind::Online { memory_write, .. } = cfg.kind {
        if memory_write {
            state.store(&h, y_true)?;
        } else {
            state.layer.ensure_class(y_true);
        }
    }
    Ok(pred)
}

/// Record and final state of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun<T> {
    pub record: RunRecord,
    pub state: AdaptiveClassifier<T>,
}

pub fn run_seed<T: Real>(cfg: &ScenarioConfig<T>, seed: u64) -> Result<SeedRun<T>> {
    let (mut state, data) = run_training_phase(cfg, seed)?;
    let points = match &cfg.kind {
        ScenarioKind::Continual {
            epochs_per_task,
            stored_per_task,
            ..
        } => continual(
            cfg,
            &mut state,
            &data,
            *epochs_per_task,
            *stored_per_task,
            seed,
        )?,
        ScenarioKind::Incremental {
            incremental_epochs,
            eval_every,
            ..
        } => incremental(
            cfg,
            &mut state,
            &data,
            *incremental_epochs,
            *eval_every,
            seed,
        )?,
        ScenarioKind::Online {
            finetune_cadence, ..
        } => online(cfg, &mut state, &data, *finetune_cadence, seed)?,
    };
    Ok(SeedRun {
        record: RunRecord {
            scenario: cfg.kind.label().to_string(),
            method: cfg.method.to_string(),
            seed: Some(seed),
            points,
        },
        state,
    })
}

/// Trains on task `t` and stores all of it, or a seeded random subset.
fn continual_task<T: Real>(
    state: &mut AdaptiveClassifier<T>,
    cfg: &ScenarioConfig<T>,
    task: &Dataset<T>,
    epochs: usize,
    stored: Option<usize>,
    seed: u64,
    t: usize,
) -> Result<()> {
    let sgd = SgdSettings {
        epochs,
        ..cfg.pretrain
    };
    state.train_on(&task.train, &sgd, mix_seed(seed, TRAIN_STREAM + t as u64))?;
    match stored {
        Some(m) if m < task.train.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, STORE_STREAM + t as u64));
            let mut picked = rand::seq::index::sample(&mut rng, task.train.len(), m).into_vec();
            picked.sort_unstable();
            let subset: Vec<LabeledExample<T>> =
                picked.into_iter().map(|i| task.train[i].clone()).collect();
            state.store_all(&subset)
        }
        _ => state.store_all(&task.train),
    }
}

fn continual<T: Real>(
    cfg: &ScenarioConfig<T>,
    state: &mut AdaptiveClassifier<T>,
    data: &PhaseData<T>,
    epochs_per_task: usize,
    stored_per_task: Option<usize>,
    seed: u64,
) -> Result<Vec<super::record::EvalPoint>> {
    let mut points = Vec::with_capacity(data.tasks.len());
    for (t, task) in data.tasks.iter().enumerate() {
        if t > 0 {
            continual_task(state, cfg, task, epochs_per_task, stored_per_task, seed, t)?;
        }
        let task_accs = data.tasks[..=t]
            .iter()
            .map(|seen| {
                let tally =
                    state.evaluate(&seen.test, &cfg.method, &cfg.adaptation, &cfg.mixture)?;
                Ok(tally.overall().unwrap_or(0.0))
            })
            .collect::<Result<Vec<f64>>>()?;
        let acc_overall = task_accs.iter().sum::<f64>() / task_accs.len() as f64;
        points.push(super::record::EvalPoint {
            position: t + 1,
            acc_overall,
            acc_new: None,
            acc_old: None,
            n_new: 0,
            n_old: 0,
            task_accs,
        });
    }
    Ok(points)
}

fn incremental<T: Real>(
    cfg: &ScenarioConfig<T>,
    state: &mut AdaptiveClassifier<T>,
    data: &PhaseData<T>,
    epochs: usize,
    eval_every: usize,
    seed: u64,
) -> Result<Vec<super::record::EvalPoint>> {
    let n_classes = cfg.task.blobs().n_classes;
    let new_classes: BTreeSet<ClassId> = (0..n_classes)
        .filter(|c| !state.pretrain_classes.contains(c))
        .collect();
    let train_set = apply_imbalance(&data.tasks[0].train, &new_classes, cfg.task.imbalance);
    state.layer.ensure_class(n_classes - 1);
    // pre-training examples are already in memory
    let fresh: Vec<LabeledExample<T>> = train_set
        .iter()
        .filter(|ex| new_classes.contains(&ex.y))
        .cloned()
        .collect();
    state.store_all(&fresh)?;

    let sgd = SgdSettings {
        epochs: 1,
        ..cfg.finetune
    };
    let test = &data.tasks[0].test;
    let mut points = Vec::new();
    for epoch in 1..=epochs {
        train(
            &state.extractor,
            &mut state.layer,
            &train_set,
            &sgd.train_config(mix_seed(seed, TRAIN_STREAM + epoch as u64)),
        )?;
        if epoch % eval_every == 0 || epoch == epochs {
            let tally = state.evaluate(test, &cfg.method, &cfg.adaptation, &cfg.mixture)?;
            points.push(tally.point(epoch));
        }
    }
    if epochs == 0 {
        let tally = state.evaluate(test, &cfg.method, &cfg.adaptation, &cfg.mixture)?;
        points.push(tally.point(0));
    }
    Ok(points)
}

fn online<T: Real>(
    cfg: &ScenarioConfig<T>,
    state: &mut AdaptiveClassifier<T>,
    data: &PhaseData<T>,
    cadence: usize,
    seed: u64,
) -> Result<Vec<super::record::EvalPoint>> {
    let mut stream = data.tasks[0].test.clone();
    stream.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(seed, ORDER_STREAM)));
    let sgd = cfg.finetune;
    let mut tally = Tally::default();
    let mut buffer = Vec::with_capacity(cadence);
    let mut points = Vec::new();
    for (i, ex) in stream.iter().enumerate() {
        let pred = run_inference_step(state, &ex.x, ex.y, cfg)?;
        tally.record(!state.pretrain_classes.contains(&ex.y), pred.class == ex.y);
        buffer.push(ex.clone());
        let seen = i + 1;
        if seen % cadence == 0 {
            train(
                &state.extractor,
                &mut state.layer,
                &buffer,
                &sgd.train_config(mix_seed(seed, TRAIN_STREAM + seen as u64)),
            )?;
            buffer.clear();
            points.push(tally.point(seen));
        }
    }
    if !stream.len().is_multiple_of(cadence) {
        points.push(tally.point(stream.len()));
    }
    Ok(points)
}

/// Runs every seed of `cfg` (concurrently; each run is sequential) and keeps
/// the final states in seed order.
pub fn run_scenario_detailed<T: Real>(cfg: &ScenarioConfig<T>) -> Result<Vec<SeedRun<T>>> {
    cfg.validate()?;
    cfg.seeds.par_iter().map(|&s| run_seed(cfg, s)).collect()
}

/// Per-seed records and their mean.
pub fn run_scenario<T: Real>(cfg: &ScenarioConfig<T>) -> Result<ScenarioReport> {
    let runs = run_scenario_detailed(cfg)?;
    ScenarioReport::from_records(runs.into_iter().map(|r| r.record).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::data::GaussianBlobs;
    use crate::harness::data::TaskGenerator;

    fn small_online() -> ScenarioConfig<f64> {
        let mut cfg = ScenarioConfig::online_default();
        cfg.task.generator = TaskGenerator::Blobs(GaussianBlobs {
            n_classes: 4,
            input_dim: 4,
            per_class_count: 20,
            test_per_class: 10,
            ..GaussianBlobs::default()
        });
        cfg.kind = ScenarioKind::Online {
            pretrain_classes: [0, 1].into(),
            finetune_cadence: 15,
            memory_write: true,
        };
        cfg.pretrain.epochs = 5;
        cfg.adaptation.k = 5;
        cfg.seeds = vec![4];
        cfg
    }

    #[test]
    fn training_phase_stores_each_example_once() {
        let cfg = small_online();
        let (state, data) = run_training_phase(&cfg, 4).unwrap();
        assert_eq!(state.memory.len(), data.pretrain.len());
        assert_eq!(state.memory.len(), 40);
        assert_eq!(state.memory.class_counts().get(&0), Some(&20));
        assert_eq!(state.memory.class_count(2), 0);
        assert_eq!(state.layer.num_classes(), 2);
    }

    #[test]
    fn online_step_predicts_before_writing() {
        let cfg = small_online();
        let (mut state, data) = run_training_phase(&cfg, 4).unwrap();
        let ex = &data.tasks[0].test[35];
        let before = state.clone();
        let pred = run_inference_step(&mut state, &ex.x, ex.y, &cfg).unwrap();
        let expected = before
            .predict(&ex.x, &cfg.method, &cfg.adaptation, &cfg.mixture)
            .unwrap();
        assert_eq!(pred, expected);
        assert_eq!(state.memory.len(), before.memory.len() + 1);
        assert_eq!(state.layer.num_classes(), 4);
    }

    #[test]
    fn parametric_ignores_memory() {
        let mut cfg = small_online();
        cfg.method = Method::Parametric;
        let (state, data) = run_training_phase(&cfg, 4).unwrap();
        for ex in &data.tasks[0].test {
            let pred = state
                .predict(&ex.x, &cfg.method, &cfg.adaptation, &cfg.mixture)
                .unwrap();
            let h = state.extractor.extract(&ex.x).unwrap();
            assert_eq!(pred.class, state.layer.predict(&h).unwrap());
            assert!(!pred.adapted);
        }
    }

    #[test]
    fn online_counts_follow_stream() {
        let cfg = small_online();
        let run = run_seed(&cfg, 4).unwrap();
        let counts = run.state.memory.class_counts();
        // 20 pre-training + 10 streamed for old classes, 10 streamed for new
        assert_eq!(counts.get(&0), Some(&30));
        assert_eq!(counts.get(&3), Some(&10));
        let positions: Vec<usize> = run.record.points.iter().map(|p| p.position).collect();
        assert_eq!(positions, vec![15, 30, 40]);
    }

    #[test]
    fn empty_memory_falls_back() {
        let cfg = small_online();
        let state = AdaptiveClassifier::new(
            FeatureExtractor::identity(4),
            2,
            Capacity::Unbounded,
            BTreeSet::new(),
        )
        .unwrap();
        let pred = state
            .predict(
                &[0.1, 0.2, 0.3, 0.4],
                &cfg.method,
                &cfg.adaptation,
                &cfg.mixture,
            )
            .unwrap();
        assert!(!pred.adapted);
        assert_eq!(pred.probs, vec![0.5, 0.5]);
    }
}
