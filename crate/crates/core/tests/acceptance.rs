//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hebb::harness::{
    run_inference_step, run_scenario, run_training_phase, write_csv, Method, ScenarioConfig,
    ScenarioReport,
};
use hebb::{
    adapted_predict, decompose_mbpa, dynamic_weight, hebbian_update, mbpa_loss, mbpa_update,
    mixed_update, AdaptationConfig64, AdaptationMode, Capacity, EpisodicMemory64, Neighbor,
    Neighborhood64, OutputLayer64,
};

type Outcome = Result<String, String>;

fn random_instance(
    rng: &mut ChaCha8Rng,
    max_dim: usize,
    max_classes: usize,
    max_nbrs: usize,
    nonneg: bool,
) -> (OutputLayer64, Neighborhood64) {
    let dim = rng.random_range(1..=max_dim);
    let n_classes = rng.random_range(2..=max_classes);
    let n_nbrs = rng.random_range(1..=max_nbrs);
    let cols = (0..n_classes)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let bias = (0..n_classes)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let layer = OutputLayer64::from_parts(dim, cols, bias).unwrap();
    let lo = if nonneg { 0.0 } else { -1.0 };
    let items = (0..n_nbrs)
        .map(|_| {
            let key = (0..dim).map(|_| rng.random_range(lo..1.0)).collect();
            Neighbor::new(
                key,
                rng.random_range(0..n_classes),
                rng.random_range(0.05..5.0),
            )
        })
        .collect();
    (layer, Neighborhood64::new(items).unwrap())
}

fn nudge(layer: &OutputLayer64, class: usize, j: Option<usize>, by: f64) -> OutputLayer64 {
    let mut cols = layer.columns().to_vec();
    let mut bias = layer.biases().to_vec();
    match j {
        Some(j) => cols[class][j] += by,
        None => bias[class] += by,
    }
    OutputLayer64::from_parts(layer.dim(), cols, bias).unwrap()
}

fn gradient_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for trial in 0..500 {
        let (layer, nbrs) = random_instance(&mut rng, 16, 8, 20, false);
        let lambda = rng.random_range(0.01..1.0);
        let delta = mbpa_update(&layer, &nbrs, lambda, 1).map_err(|e| e.to_string())?;
        let (mut got, mut fd) = (Vec::new(), Vec::new());
        for class in 0..layer.num_classes() {
            let d = delta.get(class).ok_or("class missing from MbPA delta")?;
            for j in (0..layer.dim()).map(Some).chain([None]) {
                let up = mbpa_loss(&nudge(&layer, class, j, h), &nbrs).unwrap();
                let down = mbpa_loss(&nudge(&layer, class, j, -h), &nbrs).unwrap();
                fd.push(lambda * (up - down) / (2.0 * h));
                got.push(j.map_or(d.bias, |j| d.weights[j]));
            }
        }
        let diff = got
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let rel = diff / norm;
        worst = worst.max(rel);
        if rel >= 1e-5 {
            return Err(format!("trial {trial}: relative error {rel:.3e}"));
        }
    }
    Ok(format!("500 instances, worst relative error {worst:.2e}"))
}

fn decomposition_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for trial in 0..500 {
        let (layer, nbrs) = random_instance(&mut rng, 16, 8, 20, false);
        let delta = mbpa_update(&layer, &nbrs, 1.0, 1).unwrap();
        let class = rng.random_range(0..layer.num_classes());
        let (same, other) = decompose_mbpa(&layer, &nbrs, class).unwrap();
        let full = &delta.get(class).unwrap().weights;
        for j in 0..full.len() {
            let err = (same[j] + other[j] - full[j]).abs();
            worst = worst.max(err);
            if err > 1e-12 {
                return Err(format!("trial {trial}: component {j} off by {err:.3e}"));
            }
        }
    }
    Ok(format!("500 instances, worst error {worst:.2e}"))
}

fn magnitude_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut strict = 0;
    for trial in 0..1000 {
        let (layer, nbrs) = random_instance(&mut rng, 16, 8, 20, true);
        let hebb = hebbian_update(&nbrs);
        let class = nbrs.items()[rng.random_range(0..nbrs.len())].label;
        let (same, _) = decompose_mbpa(&layer, &nbrs, class).unwrap();
        let w = &hebb
            .get(class)
            .ok_or("neighbor class missing from Hebbian delta")?
            .weights;
        for (j, (s, hw)) in same.iter().zip(w).enumerate() {
            if !(*s >= 0.0 && *s <= *hw) {
                return Err(format!(
                    "trial {trial}: component {j}: {s} not in [0, {hw}]"
                ));
            }
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let any_mass = nbrs
            .iter()
            .filter(|n| n.label == class)
            .any(|n| layer.predict_probs(&n.key).unwrap()[class] > 0.0);
        if any_mass && norm(w) > 0.0 {
            if norm(&same) >= norm(w) {
                return Err(format!("trial {trial}: norm bound not strict"));
            }
            strict += 1;
        }
    }
    Ok(format!("1000 instances, {strict} strict"))
}

fn e_weight_law() -> Outcome {
    for (num, beta) in [
        (4, 0.4f64),
        (5, 0.5),
        (6, 0.6),
        (7, 0.7),
        (8, 0.8),
        (9, 0.9),
    ] {
        if dynamic_weight(1, beta).unwrap() != 1.0 {
            return Err(format!("E_1 != 1 for beta {beta}"));
        }
        let exact = BigRational::new(BigInt::from(num), BigInt::from(10));
        if dynamic_weight(1, exact.clone()).unwrap() != BigRational::from_integer(1.into()) {
            return Err(format!("exact E_1 != 1 for beta {beta}"));
        }
        let mut prev = dynamic_weight(1, exact.clone()).unwrap();
        for n in 2..=1000 {
            let e = dynamic_weight(n, exact.clone()).unwrap();
            if e >= prev {
                return Err(format!("beta {beta}: E_{n} >= E_{}", n - 1));
            }
            prev = e;
        }
        let tail = (dynamic_weight(1000, beta).unwrap() - (1.0 - beta)).abs();
        if tail >= 1e-3 {
            return Err(format!("beta {beta}: |E_1000 - (1 - beta)| = {tail:.3e}"));
        }
    }
    Ok("6 betas, exact strict decrease over n in [1, 1000]".into())
}

fn knn_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ties = 0;
    for trial in 0..200 {
        let dim = rng.random_range(1..=6);
        let size = rng.random_range(1..=80);
        let grid = rng.random_bool(0.5);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..dim)
                .map(|_| {
                    if grid {
                        rng.random_range(0..3) as f64
                    } else {
                        rng.random_range(-1.0..1.0)
                    }
                })
                .collect()
        };
        let mut mem = EpisodicMemory64::unbounded(dim).unwrap();
        for _ in 0..size {
            let key = draw(&mut rng);
            mem.write(&key, rng.random_range(0..5)).unwrap();
        }
        let q = draw(&mut rng);
        let k = rng.random_range(1..=size + 5);
        let got: Vec<u64> = mem
            .retrieve_knn(&q, k, 1e-3)
            .unwrap()
            .iter()
            .map(|n| n.seq)
            .collect();

        let mut all: Vec<(f64, u64)> = mem
            .entries()
            .map(|e| {
                (
                    e.key.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum(),
                    e.seq,
                )
            })
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if all.windows(2).any(|w| w[0].0 == w[1].0) {
            ties += 1;
        }
        let want: Vec<u64> = all.iter().take(k).map(|p| p.1).collect();
        if got != want {
            return Err(format!("trial {trial}: got {got:?}, brute force {want:?}"));
        }
    }
    Ok(format!("200 pairs, {ties} with distance ties"))
}

fn one_shot() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dim = 16;
    let n_old = 5;
    let cfg = AdaptationConfig64 {
        eps: 1e-3,
        mode: AdaptationMode::HebbV1,
        ..AdaptationConfig64::default()
    };
    let mut hits = 0;
    for trial in 0..100 {
        let cols = (0..n_old)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let bias = (0..n_old).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut layer = OutputLayer64::from_parts(dim, cols, bias).unwrap();
        let new_class = n_old;
        layer.register_class(new_class).unwrap();

        let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..1.0)).collect();
        let scale = rng.random_range(1.0..3.0) / raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let exemplar: Vec<f64> = raw.iter().map(|v| v * scale).collect();
        let mut mem = EpisodicMemory64::unbounded(dim).unwrap();
        mem.write(&exemplar, new_class).unwrap();

        let dir: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let len = rng.random_range(0.0..=0.01) / dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let query: Vec<f64> = exemplar
            .iter()
            .zip(&dir)
            .map(|(e, d)| e + d * len)
            .collect();

        let nbrs = mem.retrieve_knn(&query, cfg.k, cfg.eps).unwrap();
        let pretrain: BTreeSet<usize> = (0..n_old).collect();
        let new_nbrs = nbrs.select_new(&pretrain);
        let delta = mixed_update(&layer, &nbrs, &new_nbrs, mem.class_counts(), &cfg).unwrap();
        let probs = adapted_predict(&layer, &delta, &query).unwrap();
        let best = (0..probs.len())
            .max_by(|&a, &b| probs[a].total_cmp(&probs[b]))
            .unwrap();
        if best == new_class {
            hits += 1;
        } else {
            return Err(format!("trial {trial}: predicted {best}"));
        }
    }
    Ok(format!("{hits}/100 queries assigned to the new class"))
}

fn final_mean(
    cfg: &ScenarioConfig<f64>,
    method: Method<f64>,
) -> Result<(f64, Option<f64>), String> {
    let mut c = cfg.clone();
    c.method = method;
    let report = run_scenario(&c).map_err(|e| e.to_string())?;
    let p = report.mean.final_point().ok_or("no evaluation points")?;
    Ok((p.acc_overall, p.acc_new))
}

fn continual_ordering() -> Outcome {
    let cfg = ScenarioConfig::<f64>::continual_default();
    let (hebb, _) = final_mean(&cfg, Method::Hebb)?;
    let (mbpa, _) = final_mean(&cfg, Method::MbPA)?;
    let (param, _) = final_mean(&cfg, Method::Parametric)?;
    let line = format!("hebb {hebb:.4}, mbpa {mbpa:.4}, parametric {param:.4}");
    if hebb >= mbpa && mbpa >= param && hebb - param >= 0.05 {
        Ok(line)
    } else {
        Err(line)
    }
}

struct OnlineResults {
    methods: BTreeMap<&'static str, (f64, Option<f64>)>,
}

fn online_results() -> Result<OnlineResults, String> {
    let cfg = ScenarioConfig::<f64>::online_default();
    let mut methods = BTreeMap::new();
    for (name, m) in [
        ("hebb", Method::Hebb),
        ("mbpa", Method::MbPA),
        ("parametric", Method::Parametric),
        ("hebb-v1", Method::HebbV1),
    ] {
        methods.insert(name, final_mean(&cfg, m)?);
    }
    Ok(OnlineResults { methods })
}

fn online_ordering(r: &OnlineResults) -> Outcome {
    let new = |m: &str| r.methods[m].1.unwrap_or(f64::NAN);
    let all = |m: &str| r.methods[m].0;
    let line = format!(
        "new: hebb {:.4}, mbpa {:.4}, parametric {:.4}; overall: hebb {:.4}, mbpa {:.4}",
        new("hebb"),
        new("mbpa"),
        new("parametric"),
        all("hebb"),
        all("mbpa"),
    );
    if new("hebb") > new("mbpa") && new("hebb") > new("parametric") && all("hebb") >= all("mbpa") {
        Ok(line)
    } else {
        Err(line)
    }
}

fn ablation_ordering(r: &OnlineResults) -> Outcome {
    let all = |m: &str| r.methods[m].0;
    let line = format!(
        "hebb {:.4}, hebb-v1 {:.4}, mbpa-only {:.4}",
        all("hebb"),
        all("hebb-v1"),
        all("mbpa")
    );
    if all("hebb") >= all("hebb-v1") && all("hebb") >= all("mbpa") {
        Ok(line)
    } else {
        Err(line)
    }
}

fn csv_bytes(reports: &[ScenarioReport]) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv(reports, &mut out).unwrap();
    out
}

fn transience_and_determinism() -> Outcome {
    let mut steps = 0;
    for kind in ["continual", "incremental", "online"] {
        let mut cfg = ScenarioConfig::<f64>::default_for(kind).unwrap();
        cfg.capacity = Capacity::Unbounded;
        for method in [Method::Hebb, Method::MbPA, Method::HebbV2, Method::Mixture] {
            cfg.method = method;
            let (mut state, data) = run_training_phase(&cfg, 0).map_err(|e| e.to_string())?;
            for ex in data.tasks.last().unwrap().test.iter().take(200) {
                let snapshot = state.layer.to_bytes();
                let mut replay = state.clone();
                replay.layer = OutputLayer64::from_bytes(&snapshot).map_err(|e| e.to_string())?;
                let pred =
                    run_inference_step(&mut state, &ex.x, ex.y, &cfg).map_err(|e| e.to_string())?;
                let again = run_inference_step(&mut replay, &ex.x, ex.y, &cfg)
                    .map_err(|e| e.to_string())?;
                if pred != again {
                    return Err(format!("{kind}/{method}: snapshot re-prediction differs"));
                }
                let mut expected = OutputLayer64::from_bytes(&snapshot).unwrap();
                expected.ensure_class(ex.y);
                if state.layer.to_bytes() != expected.to_bytes()
                    && state.layer.to_bytes() != snapshot
                {
                    return Err(format!("{kind}/{method}: adaptation leaked into the layer"));
                }
                steps += 1;
            }
        }
    }
    for cfg in [
        ScenarioConfig::<f64>::online_default(),
        ScenarioConfig::<f64>::continual_default(),
    ] {
        let a = csv_bytes(&[run_scenario(&cfg).map_err(|e| e.to_string())?]);
        let b = csv_bytes(&[run_scenario(&cfg).map_err(|e| e.to_string())?]);
        if a != b {
            return Err("repeated runs produced different CSV bytes".into());
        }
    }
    Ok(format!(
        "{steps} adapted steps leak-free, CSV byte-identical"
    ))
}

fn report(n: usize, name: &str, limit: Option<Duration>, run: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let outcome = run();
    let took = started.elapsed();
    let (mut ok, mut detail) = match outcome {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if let Some(limit) = limit {
        if took > limit {
            ok = false;
            detail.push_str(&format!(" (exceeded {limit:?})"));
        }
    }
    let status = if ok { "PASS" } else { "FAIL" };
    println!("criterion {n:>2} {status} {name}: {detail} [{:.2?}]", took);
    ok
}

fn main() {
    let mut all = true;
    all &= report(
        1,
        "gradient oracle",
        Some(Duration::from_secs(10)),
        gradient_oracle,
    );
    all &= report(2, "decomposition identity", None, decomposition_identity);
    all &= report(3, "magnitude bound", None, magnitude_bound);
    all &= report(4, "E-weight law", None, e_weight_law);
    all &= report(5, "KNN oracle equivalence", None, knn_oracle);
    all &= report(6, "one-shot acquisition", None, one_shot);
    all &= report(
        7,
        "continual ordering",
        Some(Duration::from_secs(300)),
        continual_ordering,
    );

    let started = Instant::now();
    let online = online_results();
    let online_time = started.elapsed();
    let limit = Duration::from_secs(300).saturating_sub(online_time);
    all &= report(8, "online adaptation", Some(limit), || {
        online
            .as_ref()
            .map_err(Clone::clone)
            .and_then(online_ordering)
            .map(|d| format!("{d} (runs {online_time:.2?})"))
    });
    all &= report(9, "ablation ordering", None, || {
        online
            .as_ref()
            .map_err(Clone::clone)
            .and_then(ablation_ordering)
    });
    all &= report(
        10,
        "transience and determinism",
        None,
        transience_and_determinism,
    );
    if !all {
        std::process::exit(1);
    }
}
