use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Fully connected network with ReLU hidden layers and a linear output.
///
/// Parameters live in one flat vector, layer by layer: the weight matrix
/// (`out × in`, row-major) followed by the bias vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    sizes: Vec<usize>,
    params: Vec<T>,
}

/// Per-layer values kept from a forward pass for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    /// `acts[0]` is the input, `acts[l]` the output of layer `l`.
    pub acts: Vec<Vec<T>>,
}

impl<T> ForwardCache<T> {
    pub fn output(&self) -> &[T] {
        self.acts.last().expect("cache holds the input")
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl<T: Real> Mlp<T> {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Invalid(format!("bad layer sizes {sizes:?}")));
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            params: vec![T::zero(); param_count(sizes)],
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = T::lit(rng.gen_range(-limit..=limit));
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<T>) -> Result<Self> {
        let net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::Invalid(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        Ok(Mlp {
            params,
            ..net
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn copy_from(&mut self, other: &Mlp<T>) {
        assert_eq!(self.sizes, other.sizes, "layer sizes differ");
        self.params.copy_from_slice(&other.params);
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn forward_cached(&self, x: &[T]) -> ForwardCache<T> {
        assert_eq!(x.len(), self.input_dim(), "input length");
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let input = &acts[l];
            let hidden = l + 1 < layers;
            let out: Vec<T> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    let z = row.iter().zip(input).fold(b[o], |acc, (&wi, &xi)| acc + wi * xi);
                    if hidden && z < T::zero() {
                        T::zero()
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(out);
            offset += n_in * n_out + n_out;
        }
        ForwardCache { acts }
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        self.forward_cached(x).acts.pop().expect("output layer")
    }

    /// Which hidden units are active (pre-activation > 0) for input `x`.
    pub fn activation_pattern(&self, x: &[T]) -> Vec<bool> {
        let cache = self.forward_cached(x);
        cache.acts[1..cache.acts.len() - 1]
            .iter()
            .flat_map(|a| a.iter().map(|&v| v > T::zero()))
            .collect()
    }

    /// Adds `d loss / d params` to `grad` given `d loss / d output`.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_out: &[T], grad: &mut [T]) {
        assert_eq!(grad.len(), self.params.len(), "gradient length");
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
        let mut delta = grad_out.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &cache.acts[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == T::zero() {
                    continue;
                }
                let row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                for (g, &xi) in row.iter_mut().zip(input) {
                    *g += d * xi;
                }
                grad[off + n_in * n_out + o] += d;
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + n_in * n_out];
            let mut prev = vec![T::zero(); n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d == T::zero() {
                    continue;
                }
                for (p, &wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *p += d * wi;
                }
            }
            // ReLU derivative: the stored activation is zero where the unit is off
            for (p, &a) in prev.iter_mut().zip(input) {
                if a <= T::zero() {
                    *p = T::zero();
                }
            }
            delta = prev;
        }
    }
}

/// Adam optimizer state for one parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    m: Vec<T>,
    v: Vec<T>,
    t: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(n: usize, lr: T) -> Self {
        Adam {
            lr,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        assert_eq!(params.len(), self.m.len(), "parameter count");
        self.t += 1;
        let t = self.t as i32;
        let c1 = T::one() - self.beta1.powi(t);
        let c2 = T::one() - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (T::one() - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (T::one() - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// One sample of the weighted squared TD loss.
#[derive(Clone, Copy, Debug)]
pub struct LossSample<'a, T> {
    pub input: &'a [T],
    pub action: usize,
    pub target: T,
    pub weight: T,
}

/// Loss `mean_i w_i (Q(s_i, a_i) - y_i)^2`, its gradient, and the signed
/// TD errors `Q - y`.
pub fn td_loss_and_grad<T: Real>(net: &Mlp<T>, samples: &[LossSample<'_, T>]) -> (T, Vec<T>, Vec<T>) {
    let mut grad = vec![T::zero(); net.num_params()];
    let mut loss = T::zero();
    let mut tds = Vec::with_capacity(samples.len());
    if samples.is_empty() {
        return (loss, grad, tds);
    }
    let n = T::lit(samples.len() as f64);
    let mut grad_out = vec![T::zero(); net.output_dim()];
    for s in samples {
        let cache = net.forward_cached(s.input);
        let td = cache.output()[s.action] - s.target;
        loss += s.weight * td * td;
        tds.push(td);
        grad_out.iter_mut().for_each(|g| *g = T::zero());
        grad_out[s.action] = T::lit(2.0) * s.weight * td / n;
        net.backward(&cache, &grad_out, &mut grad);
    }
    (loss / n, grad, tds)
}
