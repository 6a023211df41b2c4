use crate::codec::{Decoder, Encoder};
use crate::error::{DecodeError, Error, Result};
use crate::scalar::{all_finite, argmax, dot, log_sum_exp, softmax, Real};
use crate::ClassId;

pub const LAYER_MAGIC: &[u8; 4] = b"HEBL";

/// Fully-connected softmax output layer `softmax(W^T h + b)`.
///
/// `W` is kept as one weight column per class, so class `i` owns
/// `columns[i]` (length `dim`) and `bias[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputLayer<T> {
    dim: usize,
    columns: Vec<Vec<T>>,
    bias: Vec<T>,
}

/// Gradient of a loss with respect to every layer parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient<T> {
    pub columns: Vec<Vec<T>>,
    pub bias: Vec<T>,
}

impl<T: Real> LayerGradient<T> {
    pub fn zeros(dim: usize, n_classes: usize) -> Self {
        LayerGradient {
            columns: vec![vec![T::zero(); dim]; n_classes],
            bias: vec![T::zero(); n_classes],
        }
    }
}

impl<T: Real> OutputLayer<T> {
    pub fn zeros(dim: usize, n_classes: usize) -> Self {
        OutputLayer {
            dim,
            columns: vec![vec![T::zero(); dim]; n_classes],
            bias: vec![T::zero(); n_classes],
        }
    }

    pub fn from_parts(dim: usize, columns: Vec<Vec<T>>, bias: Vec<T>) -> Result<Self> {
        if columns.len() != bias.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                actual: bias.len(),
            });
        }
        for col in &columns {
            if col.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: col.len(),
                });
            }
            if !all_finite(col) {
                return Err(Error::NonFinite("layer weights"));
            }
        }
        if !all_finite(&bias) {
            return Err(Error::NonFinite("layer bias"));
        }
        Ok(OutputLayer { dim, columns, bias })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, class: ClassId) -> &[T] {
        &self.columns[class]
    }

    pub fn bias(&self, class: ClassId) -> T {
        self.bias[class]
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    pub fn biases(&self) -> &[T] {
        &self.bias
    }

    pub(crate) fn check_dim(&self, h: &[T]) -> Result<()> {
        if h.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: h.len(),
            });
        }
        Ok(())
    }

    pub fn check_class(&self, class: ClassId) -> Result<()> {
        if class >= self.num_classes() {
            return Err(Error::UnknownClass {
                class,
                n_classes: self.num_classes(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, h: &[T]) -> Result<Vec<T>> {
        self.check_dim(h)?;
        Ok(self.logits_unchecked(h))
    }

    pub(crate) fn logits_unchecked(&self, h: &[T]) -> Vec<T> {
        self.columns
            .iter()
            .zip(&self.bias)
            .map(|(w, &b)| dot(w, h) + b)
            .collect()
    }

    /// `softmax(W^T h + b)`.
    pub fn predict_probs(&self, h: &[T]) -> Result<Vec<T>> {
        Ok(softmax(&self.logits(h)?))
    }

    pub fn predict(&self, h: &[T]) -> Result<ClassId> {
        Ok(argmax(&self.logits(h)?))
    }

    /// Appends a zero-initialized column for `class`, which must be the next
    /// unused id.
    pub fn register_class(&mut self, class: ClassId) -> Result<()> {
        let next = self.num_classes();
        if class < next {
            return Err(Error::DuplicateClass(class));
        }
        if class > next {
            return Err(Error::NonContiguousClass {
                expected: next,
                actual: class,
            });
        }
        self.columns.push(vec![T::zero(); self.dim]);
        self.bias.push(T::zero());
        Ok(())
    }

    /// Registers every id up to and including `class` that is not yet known.
    /// Returns how many columns were added.
    pub fn ensure_class(&mut self, class: ClassId) -> usize {
        let before = self.num_classes();
        while self.num_classes() <= class {
            let next = self.num_classes();
            self.register_class(next).expect("next id is always free");
        }
        self.num_classes() - before
    }

    /// Mean cross-entropy over `batch` and its gradient.
    pub fn cross_entropy_grad(&self, batch: &[(&[T], ClassId)]) -> Result<(T, LayerGradient<T>)> {
        if batch.is_empty() {
            return Err(Error::EmptyData);
        }
        let mut grad = LayerGradient::zeros(self.dim, self.num_classes());
        let mut loss = T::zero();
        let scale = T::one() / T::from_count(batch.len());
        for &(h, y) in batch {
            self.check_dim(h)?;
            self.check_class(y)?;
            let logits = self.logits_unchecked(h);
            loss += log_sum_exp(&logits) - logits[y];
            let probs = softmax(&logits);
            for (class, p) in probs.into_iter().enumerate() {
                let coeff = if class == y { p - T::one() } else { p } * scale;
                for (g, &x) in grad.columns[class].iter_mut().zip(h) {
                    *g += coeff * x;
                }
                grad.bias[class] += coeff;
            }
        }
        Ok((loss * scale, grad))
    }

    /// `params -= lr * grad`.
    pub fn apply_gradient(&mut self, grad: &LayerGradient<T>, lr: T) {
        for (col, g) in self.columns.iter_mut().zip(&grad.columns) {
            for (w, &gw) in col.iter_mut().zip(g) {
                *w -= lr * gw;
            }
        }
        for (b, &gb) in self.bias.iter_mut().zip(&grad.bias) {
            *b -= lr * gb;
        }
    }

    pub(crate) fn columns_mut(&mut self) -> &mut [Vec<T>] {
        &mut self.columns
    }

    pub(crate) fn biases_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    /// `HEBL` snapshot: header, dim `u32`, class count `u32`, the weight
    /// columns in class order, then the bias, all as little-endian `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::with_header(LAYER_MAGIC);
        enc.u32(u32::try_from(self.dim).expect("dim fits u32"));
        enc.u32(u32::try_from(self.num_classes()).expect("class count fits u32"));
        for col in &self.columns {
            for &w in col {
                enc.f64(w.as_f64());
            }
        }
        for &b in &self.bias {
            enc.f64(b.as_f64());
        }
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::with_header(bytes, LAYER_MAGIC)?;
        let dim = dec.u32()? as usize;
        let n = dec.u32()? as usize;
        let needed = (dim as u64 + 1) * n as u64 * 8;
        if needed > dec.remaining() as u64 {
            return Err(DecodeError::Truncated {
                offset: bytes.len() - dec.remaining(),
                needed: (needed - dec.remaining() as u64) as usize,
            });
        }
        let mut read = |count: usize| -> Result<Vec<T>, DecodeError> {
            (0..count)
                .map(|_| {
                    let v = dec.f64()?;
                    if v.is_finite() {
                        Ok(T::lit(v))
                    } else {
                        Err(DecodeError::Invalid("non-finite layer parameter".into()))
                    }
                })
                .collect()
        };
        let columns = (0..n).map(|_| read(dim)).collect::<Result<Vec<_>, _>>()?;
        let bias = read(n)?;
        dec.finish()?;
        Ok(OutputLayer { dim, columns, bias })
    }
}
