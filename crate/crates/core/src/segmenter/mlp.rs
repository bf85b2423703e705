use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{argmax, ClassId, Image, LabelImage, ProbImage, UNDEFINED};
use crate::rng;
use crate::math::log_sum_exp;

use super::descriptor::{Descriptor, DescriptorImage, FourierFeatures, DESCRIPTOR_DIM};

pub const HIDDEN: usize = 32;
const D: usize = DESCRIPTOR_DIM;
const H: usize = HIDDEN;

/// Flat parameters of the per-pixel perceptron together with the featurizer
/// they were trained against.
///
/// Layout of `theta`: `W1` (`HIDDEN`×`DESCRIPTOR_DIM`, row-major), `b1`,
/// `W2` (`classes`×`HIDDEN`), `b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    classes: usize,
    fourier: FourierFeatures,
    theta: Vec<f64>,
}

impl ClassifierParams {
    pub fn param_count(classes: usize) -> usize {
        H * D + H + classes * H + classes
    }

    pub fn zeros(classes: usize, fourier_seed: u64) -> Self {
        Self {
            classes,
            fourier: FourierFeatures::from_seed(fourier_seed),
            theta: vec![0.0; Self::param_count(classes)],
        }
    }

    /// He-initialised weights, zero biases.
    pub fn init(classes: usize, fourier_seed: u64, init_seed: u64) -> Self {
        let mut p = Self::zeros(classes, fourier_seed);
        let mut r = rng::stream(init_seed, &[0x1417]);
        let s1 = libm::sqrt(2.0 / D as f64);
        let s2 = libm::sqrt(1.0 / H as f64);
        for w in &mut p.theta[..H * D] {
            *w = s1 * rng::standard_normal(&mut r);
        }
        let w2 = H * D + H;
        for w in &mut p.theta[w2..w2 + classes * H] {
            *w = s2 * rng::standard_normal(&mut r);
        }
        p
    }

    pub fn from_theta(classes: usize, fourier_seed: u64, theta: Vec<f64>) -> Result<Self> {
        if classes == 0 || classes > usize::from(UNDEFINED) {
            return Err(Error::InvalidConfig("class count must be in 1..=255"));
        }
        let n = Self::param_count(classes);
        if theta.len() != n {
            return Err(Error::DimensionMismatch {
                expected: (n, 1),
                actual: (theta.len(), 1),
            });
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence);
        }
        Ok(Self {
            classes,
            fourier: FourierFeatures::from_seed(fourier_seed),
            theta,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn fourier_seed(&self) -> u64 {
        self.fourier.seed()
    }

    pub fn featurizer(&self) -> &FourierFeatures {
        &self.fourier
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let (w1, rest) = self.theta.split_at(H * D);
        let (b1, rest) = rest.split_at(H);
        let (w2, b2) = rest.split_at(self.classes * H);
        (w1, b1, w2, b2)
    }

    /// Forward pass of one pixel. Fills the pre-activations of the hidden
    /// layer and the output logits.
    fn forward(&self, x: &Descriptor, pre: &mut [f64; H], logits: &mut [f64]) {
        let (w1, b1, w2, b2) = self.split();
        for j in 0..H {
            let row = &w1[j * D..(j + 1) * D];
            let mut s = b1[j];
            for i in 0..D {
                s += row[i] * x[i];
            }
            pre[j] = s;
        }
        for c in 0..self.classes {
            let row = &w2[c * H..(c + 1) * H];
            let mut s = b2[c];
            for j in 0..H {
                s += row[j] * pre[j].max(0.0);
            }
            logits[c] = s;
        }
    }

    /// Logits of a single descriptor.
    pub fn logits(&self, x: &Descriptor) -> Vec<f64> {
        let mut pre = [0.0; H];
        let mut out = vec![0.0; self.classes];
        self.forward(x, &mut pre, &mut out);
        out
    }
}

/// Per-pixel logits and argmax labels (ties to the lowest class).
pub fn predict(params: &ClassifierParams, desc: &DescriptorImage) -> (ProbImage, LabelImage) {
    let (w, h) = desc.dims();
    let c = params.classes;
    let mut logits = ProbImage::zeros(w, h, c);
    let mut labels = Vec::with_capacity(w * h);
    let mut pre = [0.0; H];
    for (i, x) in desc.as_slice().iter().enumerate() {
        let out = &mut logits.data[i * c..(i + 1) * c];
        params.forward(x, &mut pre, out);
        labels.push(argmax(out) as ClassId);
    }
    (logits, Image::from_vec(w, h, labels).expect("sizes match"))
}

pub fn predict_labels(params: &ClassifierParams, desc: &DescriptorImage) -> LabelImage {
    predict(params, desc).1
}

/// Training pixels of one image. Pixels labelled `UNDEFINED` are masked out.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledPixels {
    pub descriptors: Vec<Descriptor>,
    pub labels: Vec<ClassId>,
}

impl LabeledPixels {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Unnormalised cross-entropy over the unmasked pixels of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSum {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub count: usize,
}

/// Summed cross-entropy and its gradient. An empty batch gives zeros.
pub fn loss_sum_and_grad(params: &ClassifierParams, batch: &[LabeledPixels]) -> Result<LossSum> {
    let c = params.classes;
    let (_, _, w2, _) = params.split();
    let mut grad = vec![0.0; params.theta.len()];
    let (g_w1, rest) = grad.split_at_mut(H * D);
    let (g_b1, rest) = rest.split_at_mut(H);
    let (g_w2, g_b2) = rest.split_at_mut(c * H);

    let mut loss = 0.0;
    let mut count = 0;
    let mut pre = [0.0; H];
    let mut z = vec![0.0; c];
    let mut dh = [0.0; H];
    for item in batch {
        if item.descriptors.len() != item.labels.len() {
            return Err(Error::DimensionMismatch {
                expected: (item.descriptors.len(), 1),
                actual: (item.labels.len(), 1),
            });
        }
        for (x, &y) in item.descriptors.iter().zip(&item.labels) {
            if y == UNDEFINED {
                continue;
            }
            let y = usize::from(y);
            if y >= c {
                return Err(Error::ClassOutOfRange {
                    class: y as u32,
                    classes: c,
                });
            }
            params.forward(x, &mut pre, &mut z);
            let lse = log_sum_exp(&z);
            loss += lse - z[y];
            count += 1;

            // z becomes dL/dz = softmax - onehot.
            for v in z.iter_mut() {
                *v = libm::exp(*v - lse);
            }
            z[y] -= 1.0;

            dh.fill(0.0);
            for k in 0..c {
                let dz = z[k];
                g_b2[k] += dz;
                let row = &w2[k * H..(k + 1) * H];
                let g_row = &mut g_w2[k * H..(k + 1) * H];
                for j in 0..H {
                    g_row[j] += dz * pre[j].max(0.0);
                    dh[j] += dz * row[j];
                }
            }
            for j in 0..H {
                if pre[j] <= 0.0 {
                    continue;
                }
                let d = dh[j];
                g_b1[j] += d;
                let g_row = &mut g_w1[j * D..(j + 1) * D];
                for i in 0..D {
                    g_row[i] += d * x[i];
                }
            }
        }
    }
    Ok(LossSum { loss, grad, count })
}

/// Mean cross-entropy over all unmasked pixels of the batch and its gradient.
pub fn loss_and_grad(params: &ClassifierParams, batch: &[LabeledPixels]) -> Result<(f64, Vec<f64>)> {
    let LossSum {
        loss,
        mut grad,
        count,
    } = loss_sum_and_grad(params, batch)?;
    if count == 0 {
        return Err(Error::EmptyBatch);
    }
    let inv = 1.0 / count as f64;
    for g in grad.iter_mut() {
        *g *= inv;
    }
    Ok((loss * inv, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc(seed: u64) -> Descriptor {
        let mut r = rng::stream(seed, &[]);
        core::array::from_fn(|_| rng::uniform(&mut r, -1.0, 1.0))
    }

    #[test]
    fn zero_weights_predict_class_zero() {
        let p = ClassifierParams::zeros(8, 0);
        let img = Image::from_fn(3, 2, |u, v| desc((u * 2 + v) as u64));
        let (logits, labels) = predict(&p, &img);
        assert!(logits.data.iter().all(|&z| z == 0.0));
        assert!(labels.as_slice().iter().all(|&l| l == 0));
    }

    #[test]
    fn output_bias_shift_keeps_labels() {
        let p = ClassifierParams::init(8, 1, 2);
        let img = Image::from_fn(6, 4, |u, v| desc((u * 4 + v) as u64));
        let mut q = p.clone();
        let n = q.theta.len();
        for b in &mut q.theta[n - 8..] {
            *b += 3.7;
        }
        assert_eq!(predict_labels(&p, &img), predict_labels(&q, &img));
    }

    #[test]
    fn single_pixel_hand_computation() {
        let mut p = ClassifierParams::zeros(2, 0);
        let x: Descriptor = core::array::from_fn(|i| if i == 0 { 1.0 } else if i == 1 { -2.0 } else { 0.0 });
        // h0 = relu(0.5*1 + 0.25*(-2) + 0.1) = 0.1
        // h1 = relu(-1*1 + 0) = 0
        p.theta[0] = 0.5;
        p.theta[1] = 0.25;
        p.theta[D] = -1.0;
        p.theta[H * D] = 0.1;
        let w2 = H * D + H;
        p.theta[w2] = 2.0; // class 0 <- h0
        p.theta[w2 + 1] = 5.0; // class 0 <- h1
        p.theta[w2 + H] = -1.0; // class 1 <- h0
        let n = p.theta.len();
        p.theta[n - 1] = 0.3;
        let z = p.logits(&x);
        assert!((z[0] - 0.2).abs() < 1e-15);
        assert!((z[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn uniform_logits_loss_is_ln_c() {
        let p = ClassifierParams::zeros(8, 0);
        let batch = [LabeledPixels {
            descriptors: vec![desc(1), desc(2), desc(3)],
            labels: vec![0, 5, 7],
        }];
        let (loss, _) = loss_and_grad(&p, &batch).unwrap();
        assert!((loss - libm::log(8.0)).abs() < 1e-12);
    }

    #[test]
    fn saturated_margin_gives_tiny_loss() {
        // Two classes: ln(1 + e^-10) ≈ 4.5e-5.
        let mut p = ClassifierParams::zeros(2, 0);
        let n = p.theta.len();
        p.theta[n - 1] = 10.0;
        let batch = [LabeledPixels {
            descriptors: vec![desc(4)],
            labels: vec![1],
        }];
        let (loss, _) = loss_and_grad(&p, &batch).unwrap();
        assert!(loss < 1e-4 && loss > 0.0);
        p.theta[n - 1] = 60.0;
        assert!(loss_and_grad(&p, &batch).unwrap().0 < 1e-25);
    }

    #[test]
    fn huge_logits_stay_finite() {
        let mut p = ClassifierParams::zeros(3, 0);
        let n = p.theta.len();
        p.theta[n - 3] = 1e3;
        p.theta[n - 2] = -1e3;
        let batch = [LabeledPixels {
            descriptors: vec![desc(4)],
            labels: vec![1],
        }];
        let (loss, grad) = loss_and_grad(&p, &batch).unwrap();
        assert!((loss - 2e3).abs() < 1e-9);
        assert!(grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn masked_and_empty_batches() {
        let p = ClassifierParams::zeros(3, 0);
        let batch = [LabeledPixels {
            descriptors: vec![desc(1)],
            labels: vec![UNDEFINED],
        }];
        assert_eq!(loss_and_grad(&p, &batch), Err(Error::EmptyBatch));
        assert_eq!(loss_and_grad(&p, &[]), Err(Error::EmptyBatch));
        let bad = [LabeledPixels {
            descriptors: vec![desc(1)],
            labels: vec![3],
        }];
        assert!(matches!(loss_and_grad(&p, &bad), Err(Error::ClassOutOfRange { .. })));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = ClassifierParams::init(5, 3, 4);
        let batch = [LabeledPixels {
            descriptors: (0..5).map(|i| desc(100 + i)).collect(),
            labels: vec![0, 1, 2, 3, 4],
        }];
        let (_, g) = loss_and_grad(&p, &batch).unwrap();
        let h = 1e-4;
        for i in (0..p.theta.len()).step_by(7) {
            let mut a = p.clone();
            a.theta[i] += h;
            let mut b = p.clone();
            b.theta[i] -= h;
            let fd = (loss_and_grad(&a, &batch).unwrap().0 - loss_and_grad(&b, &batch).unwrap().0)
                / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-4 * g[i].abs().max(1e-3), "{i}: {fd} vs {}", g[i]);
        }
    }
}
