//! Randomized self-checks of the numerical invariants, runnable from the
//! command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::adaptation::{
    adapted_predict, decompose_mbpa, dynamic_weight, hebbian_update, mbpa_loss, mbpa_update,
    AdaptationConfig, AdaptationMode,
};
use crate::baselines::{mixture_predict, MixtureConfig};
use crate::classifier::OutputLayer;
use crate::memory::{Capacity, EpisodicMemory, Neighbor, Neighborhood};
use crate::scalar::squared_distance;
use crate::ClassId;

/// Deliberate defects for exercising the failure path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Fault {
    #[default]
    None,
    /// Scales the analytic MbPA delta by 1.01 before comparing.
    CorruptGradient,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub fault: Fault,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: usize,
    pub total: usize,
    /// Description of the first failing instance.
    pub failure: Option<String>,
}

impl CheckResult {
    pub fn ok(&self) -> bool {
        self.passed == self.total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckResult::ok)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.ok())
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_layer(rng: &mut ChaCha8Rng, dim: usize, n: usize, scale: f64) -> OutputLayer<f64> {
    let columns = (0..n)
        .map(|_| (0..dim).map(|_| scale * normal(rng)).collect())
        .collect();
    let bias = (0..n).map(|_| scale * normal(rng)).collect();
    OutputLayer::from_parts(dim, columns, bias).expect("finite parameters")
}

fn random_nbrs(
    rng: &mut ChaCha8Rng,
    dim: usize,
    n: usize,
    size: usize,
    nonnegative: bool,
) -> Neighborhood<f64> {
    let items = (0..size)
        .map(|_| {
            let key = (0..dim)
                .map(|_| {
                    let v = normal(rng);
                    if nonnegative {
                        v.abs()
                    } else {
                        v
                    }
                })
                .collect();
            Neighbor::new(key, rng.random_range(0..n), rng.random_range(0.1..10.0))
        })
        .collect();
    Neighborhood::new(items).expect("valid neighborhood")
}

struct Instance {
    layer: OutputLayer<f64>,
    nbrs: Neighborhood<f64>,
}

fn instance(rng: &mut ChaCha8Rng, nonnegative: bool) -> Instance {
    let dim = rng.random_range(1..=16);
    let n = rng.random_range(2..=8);
    let size = rng.random_range(1..=20);
    Instance {
        layer: random_layer(rng, dim, n, 0.5),
        nbrs: random_nbrs(rng, dim, n, size, nonnegative),
    }
}

struct Check {
    name: &'static str,
    passed: usize,
    total: usize,
    failure: Option<String>,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Check {
            name,
            passed: 0,
            total: 0,
            failure: None,
        }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.total += 1;
        if ok {
            self.passed += 1;
        } else if self.failure.is_none() {
            self.failure = Some(detail());
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name,
            passed: self.passed,
            total: self.total,
            failure: self.failure,
        }
    }
}

/// Central difference of the MbPA loss for every weight and bias.
fn loss_gradient_fd(layer: &OutputLayer<f64>, nbrs: &Neighborhood<f64>, h: f64) -> Vec<f64> {
    let dim = layer.dim();
    let n = layer.num_classes();
    let mut out = Vec::with_capacity(n * (dim + 1));
    let eval = |cols: Vec<Vec<f64>>, bias: Vec<f64>| {
        let l = OutputLayer::from_parts(dim, cols, bias).expect("finite");
        mbpa_loss(&l, nbrs).expect("non-empty")
    };
    for class in 0..n {
        for j in 0..=dim {
            let mut plus = (layer.columns().to_vec(), layer.biases().to_vec());
            let mut minus = plus.clone();
            if j < dim {
                plus.0[class][j] += h;
                minus.0[class][j] -= h;
            } else {
                plus.1[class] += h;
                minus.1[class] -= h;
            }
            out.push((eval(plus.0, plus.1) - eval(minus.0, minus.1)) / (2.0 * h));
        }
    }
    out
}

fn flatten_delta(
    delta: &crate::adaptation::AdaptationDelta<f64>,
    dim: usize,
    n: usize,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * (dim + 1));
    for class in 0..n {
        match delta.get(class) {
            Some(d) => {
                out.extend_from_slice(&d.weights);
                out.push(d.bias);
            }
            None => out.extend(std::iter::repeat_n(0.0, dim + 1)),
        }
    }
    out
}

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

fn check_mbpa_gradient(rng: &mut ChaCha8Rng, fault: Fault) -> CheckResult {
    let mut check = Check::new("mbpa_gradient_finite_difference");
    let lambda = 0.05;
    for trial in 0..500 {
        let inst = instance(rng, false);
        let (dim, n) = (inst.layer.dim(), inst.layer.num_classes());
        let delta = mbpa_update(&inst.layer, &inst.nbrs, lambda, 1).expect("valid instance");
        let mut analytic = flatten_delta(&delta, dim, n);
        if fault == Fault::CorruptGradient {
            analytic.iter_mut().for_each(|v| *v *= 1.01);
        }
        let numeric: Vec<f64> = loss_gradient_fd(&inst.layer, &inst.nbrs, 1e-5)
            .into_iter()
            .map(|g| lambda * g)
            .collect();
        let err = rel_error(&analytic, &numeric);
        check.record(err < 1e-5, || {
            format!("trial {trial}: relative error {err:.3e}")
        });
    }
    check.finish()
}

fn check_decomposition(rng: &mut ChaCha8Rng) -> CheckResult {
    let mut check = Check::new("mbpa_decomposition_identity");
    for trial in 0..500 {
        let inst = instance(rng, false);
        let delta = mbpa_update(&inst.layer, &inst.nbrs, 1.0, 1).expect("valid instance");
        let class = rng.random_range(0..inst.layer.num_classes());
        let (same, other) = decompose_mbpa(&inst.layer, &inst.nbrs, class).expect("valid instance");
        let full = &delta.get(class).expect("dense delta").weights;
        let err = same
            .iter()
            .zip(&other)
            .zip(full)
            .map(|((a, b), c)| (a + b - c).abs())
            .fold(0.0, f64::max);
        check.record(err <= 1e-12, || {
            format!("trial {trial}, class {class}: max error {err:.3e}")
        });
    }
    check.finish()
}

fn check_magnitude_bound(rng: &mut ChaCha8Rng) -> CheckResult {
    let mut check = Check::new("mbpa_bounded_by_hebbian");
    for trial in 0..1000 {
        let inst = instance(rng, true);
        let hebb = hebbian_update(&inst.nbrs);
        for (class, h) in hebb.iter() {
            let (same, _) = decompose_mbpa(&inst.layer, &inst.nbrs, class).expect("valid instance");
            let coordinatewise = same
                .iter()
                .zip(&h.weights)
                .all(|(&s, &hw)| s >= 0.0 && s <= hw);
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let hebb_nonzero = h.weights.iter().any(|&w| w != 0.0);
            let strict = !hebb_nonzero || norm(&same) < norm(&h.weights);
            check.record(coordinatewise && strict, || {
                format!("trial {trial}, class {class}: bound violated")
            });
        }
    }
    check.finish()
}

fn check_sparsity(rng: &mut ChaCha8Rng) -> CheckResult {
    let mut check = Check::new("hebbian_sparsity");
    for trial in 0..200 {
        let inst = instance(rng, false);
        let support: Vec<ClassId> = hebbian_update(&inst.nbrs).classes().collect();
        let labels: Vec<ClassId> = inst.nbrs.labels().into_iter().collect();
        check.record(support == labels, || {
            format!("trial {trial}: support {support:?} vs labels {labels:?}")
        });
    }
    check.finish()
}

fn check_dynamic_weight() -> CheckResult {
    let mut check = Check::new("dynamic_weight_monotone");
    for beta in [0.4, 0.5, 0.6, 0.7, 0.8, 0.9] {
        let e: Vec<f64> = (0..=1000)
            .map(|n| dynamic_weight(n, beta).expect("beta in range"))
            .collect();
        check.record(e[1] == 1.0, || format!("beta {beta}: E_1 = {}", e[1]));
        // strictly decreasing while the step beta^n (1 - beta) is resolvable next to 1
        let mut ok = true;
        for n in 1..1000 {
            let resolvable = beta.powi(n as i32) * (1.0 - beta) > 4.0 * f64::EPSILON;
            ok &= if resolvable {
                e[n + 1] < e[n]
            } else {
                e[n + 1] <= e[n]
            };
        }
        check.record(ok, || format!("beta {beta}: not decreasing"));
        let gap = (e[1000] - (1.0 - beta)).abs();
        check.record(gap < 1e-3, || {
            format!("beta {beta}: |E_1000 - (1 - beta)| = {gap:.3e}")
        });
    }
    check.finish()
}

fn check_knn(rng: &mut ChaCha8Rng) -> CheckResult {
    let mut check = Check::new("knn_brute_force_oracle");
    for trial in 0..200 {
        let dim = rng.random_range(1..=8);
        let size = rng.random_range(1..=60);
        let mut mem = EpisodicMemory::new(dim, Capacity::Unbounded).expect("dim > 0");
        let mut keys: Vec<Vec<f64>> = Vec::new();
        for _ in 0..size {
            // small integer grid so that exact ties are common
            let key: Vec<f64> = if !keys.is_empty() && rng.random_bool(0.3) {
                keys[rng.random_range(0..keys.len())].clone()
            } else {
                (0..dim)
                    .map(|_| rng.random_range(-2i32..=2) as f64)
                    .collect()
            };
            mem.write(&key, rng.random_range(0..5)).expect("valid key");
            keys.push(key);
        }
        let query: Vec<f64> = (0..dim)
            .map(|_| rng.random_range(-2i32..=2) as f64)
            .collect();
        let k = rng.random_range(1..=size + 3);
        let got: Vec<u64> = mem
            .retrieve_knn(&query, k, 1e-3)
            .expect("non-empty memory")
            .iter()
            .map(|n| n.seq)
            .collect();
        let mut all: Vec<(f64, u64)> = mem
            .entries()
            .map(|e| (squared_distance(&query, &e.key), e.seq))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let want: Vec<u64> = all.into_iter().take(k).map(|(_, s)| s).collect();
        check.record(got == want, || {
            format!("trial {trial}: got {got:?}, want {want:?}")
        });
    }
    check.finish()
}

fn check_classifier_gradient(rng: &mut ChaCha8Rng) -> CheckResult {
    let mut check = Check::new("softmax_cross_entropy_gradient");
    for trial in 0..200 {
        let dim = rng.random_range(1..=8);
        let n = rng.random_range(2..=6);
        let layer = random_layer(rng, dim, n, 0.5);
        let xs: Vec<(Vec<f64>, ClassId)> = (0..rng.random_range(1..=6))
            .map(|_| {
                (
                    (0..dim).map(|_| normal(rng)).collect(),
                    rng.random_range(0..n),
                )
            })
            .collect();
        let batch: Vec<(&[f64], ClassId)> = xs.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
        let (_, grad) = layer.cross_entropy_grad(&batch).expect("valid batch");
        let h = 1e-5;
        let loss_at = |cols: Vec<Vec<f64>>, bias: Vec<f64>| {
            OutputLayer::from_parts(dim, cols, bias)
                .expect("finite")
                .cross_entropy_grad(&batch)
                .expect("valid batch")
                .0
        };
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for class in 0..n {
            for j in 0..=dim {
                let mut plus = (layer.columns().to_vec(), layer.biases().to_vec());
                let mut minus = plus.clone();
                if j < dim {
                    plus.0[class][j] += h;
                    minus.0[class][j] -= h;
                    analytic.push(grad.columns[class][j]);
                } else {
                    plus.1[class] += h;
                    minus.1[class] -= h;
                    analytic.push(grad.bias[class]);
                }
                numeric.push((loss_at(plus.0, plus.1) - loss_at(minus.0, minus.1)) / (2.0 * h));
            }
        }
        let err = rel_error(&analytic, &numeric);
        check.record(err < 1e-5, || {
            format!("trial {trial}: relative error {err:.3e}")
        });
    }
    check.finish()
}

fn check_mixture(rng: &mut ChaCha8Rng) -> CheckResult {
    let mut check = Check::new("mixture_is_distribution");
    for trial in 0..200 {
        let inst = instance(rng, false);
        let h: Vec<f64> = (0..inst.layer.dim()).map(|_| normal(rng)).collect();
        let cfg = MixtureConfig {
            gamma: rng.random_range(0.0..=1.0),
            theta: rng.random_range(0.1..2.0),
            normalize_terms: rng.random_bool(0.5),
        };
        let p = mixture_predict(&inst.layer, &inst.nbrs, &h, &cfg).expect("valid instance");
        let sum: f64 = p.iter().sum();
        let ok = p.iter().all(|&v| (0.0..=1.0).contains(&v)) && (sum - 1.0).abs() < 1e-12;
        check.record(ok, || format!("trial {trial}: sum {sum}"));
    }
    check.finish()
}

fn check_transience(rng: &mut ChaCha8Rng) -> CheckResult {
    let mut check = Check::new("adaptation_is_transient");
    let modes = [
        AdaptationMode::Hebb,
        AdaptationMode::MbPAOnly,
        AdaptationMode::HebbV1,
        AdaptationMode::HebbV2,
        AdaptationMode::HebbV3 { weight: 0.5 },
    ];
    for trial in 0..100 {
        let inst = instance(rng, false);
        let before = inst.layer.to_bytes();
        let h: Vec<f64> = (0..inst.layer.dim()).map(|_| normal(rng)).collect();
        let counts = inst
            .nbrs
            .labels()
            .into_iter()
            .map(|c| (c, rng.random_range(1..50)))
            .collect();
        let pretrain = (0..inst.layer.num_classes() / 2).collect();
        let new_nbrs = inst.nbrs.select_new(&pretrain);
        let plain = inst.layer.predict_probs(&h).expect("dim matches");
        for mode in modes {
            let cfg = AdaptationConfig {
                mode,
                ..AdaptationConfig::default()
            };
            let delta =
                crate::adaptation::mixed_update(&inst.layer, &inst.nbrs, &new_nbrs, &counts, &cfg)
                    .expect("valid instance");
            adapted_predict(&inst.layer, &delta, &h).expect("dim matches");
        }
        let ok = inst.layer.to_bytes() == before
            && inst.layer.predict_probs(&h).expect("dim matches") == plain;
        check.record(ok, || format!("trial {trial}: layer changed"));
    }
    check.finish()
}

/// Runs every check from a generator seeded with `opts.seed`.
pub fn run_all(opts: &VerifyOptions) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let checks = vec![
        check_mbpa_gradient(&mut rng, opts.fault),
        check_decomposition(&mut rng),
        check_magnitude_bound(&mut rng),
        check_sparsity(&mut rng),
        check_dynamic_weight(),
        check_knn(&mut rng),
        check_classifier_gradient(&mut rng),
        check_mixture(&mut rng),
        check_transience(&mut rng),
    ];
    VerifyReport { checks }
}
