//! Memory-based parameter adaptation: gradient ascent on the closeness-weighted
//! log-likelihood of the retrieved neighbors,
//! `L(ω) = (1/|N|) Σ_k c_k log P(y_k | h_k, ω)`.

use super::{AdaptationDelta, ClassDelta};
use crate::classifier::{LayerGradient, OutputLayer};
use crate::error::{Error, Result};
use crate::memory::Neighborhood;
use crate::scalar::{axpy, log_sum_exp, softmax, Real};
use crate::ClassId;

fn check<T: Real>(layer: &OutputLayer<T>, nbrs: &Neighborhood<T>) -> Result<()> {
    for n in nbrs {
        layer.check_dim(&n.key)?;
        layer.check_class(n.label)?;
    }
    Ok(())
}

/// `L(ω)` for the current layer parameters.
pub fn mbpa_loss<T: Real>(layer: &OutputLayer<T>, nbrs: &Neighborhood<T>) -> Result<T> {
    if nbrs.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    check(layer, nbrs)?;
    let total: T = nbrs
        .iter()
        .map(|n| {
            let logits = layer.logits_unchecked(&n.key);
            n.closeness * (logits[n.label] - log_sum_exp(&logits))
        })
        .sum();
    Ok(total / T::from_count(nbrs.len()))
}

/// `∇_ω L` (the ascent direction) over every weight column and bias.
///
/// Class `i` receives `(1/|N|) Σ_k c_k (δ(i, y_k) - P_i(h_k)) h_k`.
pub fn likelihood_gradient<T: Real>(
    layer: &OutputLayer<T>,
    nbrs: &Neighborhood<T>,
) -> Result<LayerGradient<T>> {
    if nbrs.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    check(layer, nbrs)?;
    Ok(gradient_unchecked(layer, nbrs))
}

fn gradient_unchecked<T: Real>(layer: &OutputLayer<T>, nbrs: &Neighborhood<T>) -> LayerGradient<T> {
    let mut grad = LayerGradient::zeros(layer.dim(), layer.num_classes());
    let inv_n = T::one() / T::from_count(nbrs.len());
    for n in nbrs {
        let probs = softmax(&layer.logits_unchecked(&n.key));
        for (class, p) in probs.into_iter().enumerate() {
            let target = if class == n.label {
                T::one()
            } else {
                T::zero()
            };
            let coeff = n.closeness * (target - p) * inv_n;
            axpy(coeff, &n.key, &mut grad.columns[class]);
            grad.bias[class] += coeff;
        }
    }
    grad
}

/// Runs `steps` gradient-ascent steps of size `lambda` on `L` over `W` and `b`,
/// re-evaluating probabilities at the adapted parameters each step. Returns the
/// accumulated change for every registered class.
pub fn mbpa_update<T: Real>(
    layer: &OutputLayer<T>,
    nbrs: &Neighborhood<T>,
    lambda: T,
    steps: usize,
) -> Result<AdaptationDelta<T>> {
    if nbrs.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::param("lambda", "must be positive"));
    }
    if steps == 0 {
        return Err(Error::param("steps", "must be at least 1"));
    }
    check(layer, nbrs)?;

    let dim = layer.dim();
    let mut acc: Vec<ClassDelta<T>> = (0..layer.num_classes())
        .map(|_| ClassDelta::zeros(dim))
        .collect();
    let mut working = layer.clone();
    for step in 0..steps {
        let grad = gradient_unchecked(&working, nbrs);
        for (class, d) in acc.iter_mut().enumerate() {
            axpy(lambda, &grad.columns[class], &mut d.weights);
            d.bias += lambda * grad.bias[class];
        }
        if step + 1 < steps {
            working.apply_gradient(&grad, -lambda);
        }
    }

    let mut delta = AdaptationDelta::new();
    for (class, d) in acc.into_iter().enumerate() {
        delta.insert(class, d);
    }
    Ok(delta)
}

/// Splits the one-step class-`class` weight update into the contribution of
/// neighbors labelled `class` and of all other neighbors:
///
/// `(1/|N|) Σ_{k in N_i} c_k (1 - P_{y_k}) h_k` and
/// `-(1/|N|) Σ_{j in N̄_i} c_j P_i(h_j) h_j`.
///
/// Their sum equals the `lambda = 1`, `steps = 1` weight delta for the class.
pub fn decompose_mbpa<T: Real>(
    layer: &OutputLayer<T>,
    nbrs: &Neighborhood<T>,
    class: ClassId,
) -> Result<(Vec<T>, Vec<T>)> {
    layer.check_class(class)?;
    check(layer, nbrs)?;
    let dim = layer.dim();
    let mut same = vec![T::zero(); dim];
    let mut other = vec![T::zero(); dim];
    if nbrs.is_empty() {
        return Ok((same, other));
    }
    let inv_n = T::one() / T::from_count(nbrs.len());
    let (own, rest) = nbrs.partition(class);
    for n in &own {
        let p = softmax(&layer.logits_unchecked(&n.key))[class];
        axpy(n.closeness * (T::one() - p) * inv_n, &n.key, &mut same);
    }
    for n in &rest {
        let p = softmax(&layer.logits_unchecked(&n.key))[class];
        axpy(-(n.closeness * p * inv_n), &n.key, &mut other);
    }
    Ok((same, other))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::Neighbor;

    fn one_neighbor() -> Neighborhood<f64> {
        Neighborhood::new(vec![Neighbor::new(vec![1.0, 0.0], 0, 1.0)]).unwrap()
    }

    #[test]
    fn loss_at_uniform() {
        let layer = OutputLayer::zeros(2, 2);
        let loss = mbpa_loss(&layer, &one_neighbor()).unwrap();
        assert!((loss - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn loss_is_linear_in_closeness() {
        let layer =
            OutputLayer::<f64>::from_parts(1, vec![vec![0.3], vec![-0.7]], vec![0.1, 0.0]).unwrap();
        let base = Neighborhood::new(vec![
            Neighbor::new(vec![1.0], 0, 0.5),
            Neighbor::new(vec![-2.0], 1, 2.0),
        ])
        .unwrap();
        let scaled = Neighborhood::new(
            base.iter()
                .map(|n| Neighbor::new(n.key.clone(), n.label, n.closeness * 3.0))
                .collect(),
        )
        .unwrap();
        let a = mbpa_loss(&layer, &base).unwrap();
        let b = mbpa_loss(&layer, &scaled).unwrap();
        assert!((b - 3.0 * a).abs() < 1e-14);
    }

    #[test]
    fn confident_correct_loss_approaches_zero() {
        let layer =
            OutputLayer::from_parts(1, vec![vec![50.0], vec![-50.0]], vec![0.0, 0.0]).unwrap();
        let nbrs = Neighborhood::new(vec![Neighbor::new(vec![1.0], 0, 1.0)]).unwrap();
        let loss = mbpa_loss(&layer, &nbrs).unwrap();
        assert!(loss <= 0.0 && loss > -1e-40);
    }

    #[test]
    fn one_step_hand_gradient() {
        let layer = OutputLayer::zeros(2, 2);
        let d = mbpa_update(&layer, &one_neighbor(), 1.0, 1).unwrap();
        assert_eq!(d.get(0).unwrap().weights, vec![0.5, 0.0]);
        assert_eq!(d.get(1).unwrap().weights, vec![-0.5, 0.0]);
        assert_eq!(d.get(0).unwrap().bias, 0.5);
        assert_eq!(d.get(1).unwrap().bias, -0.5);
    }

    #[test]
    fn scales_linearly_with_lambda() {
        let layer = OutputLayer::zeros(2, 2);
        let a = mbpa_update(&layer, &one_neighbor(), 1e-3, 1).unwrap();
        let b = mbpa_update(&layer, &one_neighbor(), 1e-6, 1).unwrap();
        for class in 0..2 {
            let (da, db) = (a.get(class).unwrap(), b.get(class).unwrap());
            for (x, y) in da.weights.iter().zip(&db.weights) {
                assert!((x * 1e-3 - y).abs() < 1e-18);
            }
        }
    }

    #[test]
    fn later_steps_use_adapted_probabilities() {
        let layer = OutputLayer::zeros(2, 2);
        let one = mbpa_update(&layer, &one_neighbor(), 1.0, 1).unwrap();
        let two = mbpa_update(&layer, &one_neighbor(), 1.0, 2).unwrap();
        // second step sees P_0 > 0.5 and therefore moves less than the first
        let first = one.get(0).unwrap().weights[0];
        let second = two.get(0).unwrap().weights[0] - first;
        assert!(second > 0.0 && second < first);
    }

    #[test]
    fn decomposition_edge_cases() {
        let layer =
            OutputLayer::from_parts(2, vec![vec![0.2, 0.1], vec![-0.3, 0.4]], vec![0.0, 0.1])
                .unwrap();
        let all_zero = Neighborhood::new(vec![
            Neighbor::new(vec![1.0, 2.0], 0, 1.0),
            Neighbor::new(vec![0.5, 0.5], 0, 2.0),
        ])
        .unwrap();
        let (same, other) = decompose_mbpa(&layer, &all_zero, 0).unwrap();
        assert!(other.iter().all(|&x| x == 0.0));
        assert!(same.iter().any(|&x| x != 0.0));
        let (same, other) = decompose_mbpa(&layer, &all_zero, 1).unwrap();
        assert!(same.iter().all(|&x| x == 0.0));
        assert!(other.iter().all(|&x| x < 0.0));
    }

    #[test]
    fn errors() {
        let layer = OutputLayer::<f64>::zeros(2, 2);
        let empty = Neighborhood::default();
        assert_eq!(mbpa_loss(&layer, &empty), Err(Error::EmptyNeighborhood));
        assert_eq!(
            mbpa_update(&layer, &empty, 1.0, 1),
            Err(Error::EmptyNeighborhood)
        );
        assert!(mbpa_update(&layer, &one_neighbor(), 0.0, 1).is_err());
        assert!(mbpa_update(&layer, &one_neighbor(), 1.0, 0).is_err());
        let unknown = Neighborhood::new(vec![Neighbor::new(vec![1.0, 0.0], 7, 1.0)]).unwrap();
        assert!(matches!(
            mbpa_update(&layer, &unknown, 1.0, 1),
            Err(Error::UnknownClass { .. })
        ));
    }
}
