use serde::{Deserialize, Serialize};

use super::WorldModel;
use crate::error::{argument, check_dim, Error, Result};
use crate::numerics::{gauss_vec, DenseMatrix, Real, RngStream};

/// Residual tanh network: `s' = s + W_L h_{L-1} + b_L`, with
/// `h_l = tanh(W_l h_{l-1} + b_l)` and `h_0 = [s; a]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel<T> {
    state_dim: usize,
    action_dim: usize,
    hidden: Vec<usize>,
    weights: Vec<DenseMatrix<T>>,
    biases: Vec<Vec<T>>,
}

/// One `(s, a, s')` sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition<T> {
    pub state: Vec<T>,
    pub action: Vec<T>,
    pub next: Vec<T>,
}

impl<T: Real> MlpModel<T> {
    /// Gaussian init with variance `1/fan_in`; zero biases.
    pub fn random(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        rng: &mut RngStream,
    ) -> Result<Self> {
        let widths = layer_widths(state_dim, action_dim, hidden)?;
        let mut weights = Vec::with_capacity(widths.len() - 1);
        let mut biases = Vec::with_capacity(widths.len() - 1);
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let sd = T::lit(1.0 / (fan_in as f64).sqrt());
            let w = gauss_vec(rng, fan_in * fan_out, sd)?;
            weights.push(DenseMatrix::new(fan_out, fan_in, w)?);
            biases.push(vec![T::zero(); fan_out]);
        }
        Ok(Self {
            state_dim,
            action_dim,
            hidden: hidden.to_vec(),
            weights,
            biases,
        })
    }

    /// Rebuilds a model from its flat parameter vector: per layer, the
    /// row-major weight matrix followed by the bias.
    pub fn from_flat(state_dim: usize, action_dim: usize, hidden: &[usize], flat: &[T]) -> Result<Self> {
        let widths = layer_widths(state_dim, action_dim, hidden)?;
        check_dim("mlp parameters", param_count(&widths), flat.len())?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut at = 0;
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            weights.push(DenseMatrix::new(fan_out, fan_in, flat[at..at + fan_in * fan_out].to_vec())?);
            at += fan_in * fan_out;
            let b = flat[at..at + fan_out].to_vec();
            if b.iter().any(|x| !x.is_finite()) {
                return Err(argument("mlp biases must be finite"));
            }
            biases.push(b);
            at += fan_out;
        }
        Ok(Self {
            state_dim,
            action_dim,
            hidden: hidden.to_vec(),
            weights,
            biases,
        })
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn param_count(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.as_slice().len() + b.len())
            .sum()
    }

    /// Layer activations `h_0..h_{L-1}` followed by the raw network output.
    fn activations(&self, s: &[T], a: &[T]) -> Vec<Vec<T>> {
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        let mut x = Vec::with_capacity(s.len() + a.len());
        x.extend_from_slice(s);
        x.extend_from_slice(a);
        acts.push(x);
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w.matvec(acts.last().expect("input present"));
            for (zi, &bi) in z.iter_mut().zip(b) {
                *zi += bi;
                if l < last {
                    *zi = zi.tanh();
                }
            }
            acts.push(z);
        }
        acts
    }

    /// Reverse sweep from an output cotangent. Calls `visit(l, δ_l)` with the
    /// cotangent at the pre-activation of every layer, deepest first, and
    /// returns the cotangent on the input `[s; a]`.
    fn backward(&self, acts: &[Vec<T>], cot: &[T], mut visit: impl FnMut(usize, &[T])) -> Vec<T> {
        let mut delta = cot.to_vec();
        for l in (0..self.weights.len()).rev() {
            visit(l, &delta);
            let mut g = self.weights[l].matvec_t(&delta);
            if l > 0 {
                for (gi, &h) in g.iter_mut().zip(&acts[l]) {
                    *gi *= T::one() - h * h;
                }
            }
            delta = g;
        }
        delta
    }

    fn split_input_grad(&self, mut g: Vec<T>, cot: &[T]) -> (Vec<T>, Vec<T>) {
        let ga = g.split_off(self.state_dim);
        for (gi, &ci) in g.iter_mut().zip(cot) {
            *gi += ci;
        }
        (g, ga)
    }
}

fn layer_widths(state_dim: usize, action_dim: usize, hidden: &[usize]) -> Result<Vec<usize>> {
    if state_dim == 0 || action_dim == 0 {
        return Err(argument("mlp dimensions must be positive"));
    }
    if hidden.contains(&0) {
        return Err(argument("hidden widths must be positive"));
    }
    let mut widths = vec![state_dim + action_dim];
    widths.extend_from_slice(hidden);
    widths.push(state_dim);
    Ok(widths)
}

fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
}

impl<T: Real> WorldModel<T> for MlpModel<T> {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn step(&self, s: &[T], a: &[T]) -> Vec<T> {
        let mut out = self.activations(s, a).pop().expect("output present");
        for (o, &si) in out.iter_mut().zip(s) {
            *o += si;
        }
        out
    }

    fn pullback(&self, s: &[T], a: &[T], c: &[T]) -> (Vec<T>, Vec<T>) {
        let acts = self.activations(s, a);
        let g = self.backward(&acts, c, |_, _| {});
        self.split_input_grad(g, c)
    }
}

/// Training hyperparameters for [`train_mlp`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Held-out MSE above this fails training.
    pub threshold: f64,
    /// Final learning rate as a fraction of `lr` (cosine schedule).
    pub lr_floor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            epochs: 500,
            lr: 3e-3,
            batch_size: 32,
            threshold: 1e-3,
            lr_floor: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_mse: f64,
    pub heldout_mse: f64,
    pub train_size: usize,
    pub heldout_size: usize,
}

/// Mean over samples and coordinates of the squared one-step error.
pub fn one_step_mse<T: Real, M: WorldModel<T> + ?Sized>(model: &M, data: &[&Transition<T>]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for tr in data {
        let pred = model.step(&tr.state, &tr.action);
        total += pred
            .iter()
            .zip(&tr.next)
            .map(|(&p, &y)| (p - y).as_f64().powi(2))
            .sum::<f64>();
    }
    total / (data.len() * model.state_dim()) as f64
}

struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    fn new(n: usize) -> Self {
        Self {
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [T], grad: &[T], lr: T) {
        let (b1, b2, eps) = (T::lit(0.9), T::lit(0.999), T::lit(1e-8));
        self.t += 1;
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * grad[i];
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + eps);
        }
    }
}

/// Fits a residual MLP to one-step transitions with minibatch Adam.
///
/// A deterministic 10% of the data (at least one sample when `N ≥ 10`) is
/// held out; smaller datasets are scored on the training set. All randomness
/// (init, split, shuffles) comes from `rng`.
pub fn train_mlp<T: Real>(
    data: &[Transition<T>],
    cfg: &TrainConfig,
    rng: &mut RngStream,
) -> Result<(MlpModel<T>, TrainReport)> {
    let first = data.first().ok_or_else(|| argument("training needs at least one sample"))?;
    let (n, k) = (first.state.len(), first.action.len());
    for tr in data {
        check_dim("training state", n, tr.state.len())?;
        check_dim("training action", k, tr.action.len())?;
        check_dim("training next state", n, tr.next.len())?;
    }
    if !(cfg.lr > 0.0) || cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Config("training needs lr > 0, epochs >= 1, batch_size >= 1".into()));
    }

    let mut model = MlpModel::random(n, k, &cfg.hidden, &mut rng.derive(0))?;
    let perm = rng.derive(1).permutation(data.len());
    let n_hold = data.len() / 10;
    let (hold_idx, train_idx) = perm.split_at(n_hold);
    let train: Vec<&Transition<T>> = train_idx.iter().map(|&i| &data[i]).collect();
    let heldout: Vec<&Transition<T>> = if hold_idx.is_empty() {
        train.clone()
    } else {
        hold_idx.iter().map(|&i| &data[i]).collect()
    };

    let mut params = model.to_flat();
    let mut adam = Adam::new(params.len());
    let mut grad = vec![T::zero(); params.len()];
    let mut shuffle = rng.derive(2);
    let offsets = layer_offsets(&model);
    let bs = cfg.batch_size.min(train.len());
    let steps_per_epoch = train.len().div_ceil(bs);
    let total_steps = (cfg.epochs * steps_per_epoch) as f64;
    let mut step_no = 0usize;

    for _ in 0..cfg.epochs {
        let order = shuffle.permutation(train.len());
        for chunk in order.chunks(bs) {
            grad.iter_mut().for_each(|g| *g = T::zero());
            let scale = T::lit(2.0 / (chunk.len() * n) as f64);
            for &i in chunk {
                let tr = train[i];
                let acts = model.activations(&tr.state, &tr.action);
                let out = acts.last().expect("output present");
                let cot: Vec<T> = (0..n)
                    .map(|j| (tr.state[j] + out[j] - tr.next[j]) * scale)
                    .collect();
                model.backward(&acts, &cot, |l, delta| {
                    let (w_at, b_at) = offsets[l];
                    let input = &acts[l];
                    for (r, &d) in delta.iter().enumerate() {
                        let row = &mut grad[w_at + r * input.len()..w_at + (r + 1) * input.len()];
                        for (g, &x) in row.iter_mut().zip(input) {
                            *g += d * x;
                        }
                        grad[b_at + r] += d;
                    }
                });
            }
            let progress = step_no as f64 / total_steps;
            let lr = cfg.lr
                * (cfg.lr_floor + (1.0 - cfg.lr_floor) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()));
            adam.step(&mut params, &grad, T::lit(lr));
            model = MlpModel::from_flat_unchecked(&model, &params);
            step_no += 1;
        }
    }

    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::TrainingFailure {
            loss: f64::NAN,
            threshold: cfg.threshold,
        });
    }
    let report = TrainReport {
        train_mse: one_step_mse(&model, &train),
        heldout_mse: one_step_mse(&model, &heldout),
        train_size: train.len(),
        heldout_size: hold_idx.len(),
    };
    if !(report.heldout_mse <= cfg.threshold) {
        return Err(Error::TrainingFailure {
            loss: report.heldout_mse,
            threshold: cfg.threshold,
        });
    }
    Ok((model, report))
}

/// `(weight offset, bias offset)` of each layer in the flat vector.
fn layer_offsets<T: Real>(m: &MlpModel<T>) -> Vec<(usize, usize)> {
    let mut at = 0;
    m.weights
        .iter()
        .map(|w| {
            let w_at = at;
            at += w.as_slice().len();
            let b_at = at;
            at += w.rows();
            (w_at, b_at)
        })
        .collect()
}

impl<T: Real> MlpModel<T> {
    fn from_flat_unchecked(shape: &Self, flat: &[T]) -> Self {
        let mut out = shape.clone();
        let mut at = 0;
        for (w, b) in out.weights.iter_mut().zip(out.biases.iter_mut()) {
            let len = w.as_slice().len();
            *w = DenseMatrix::from_fn(w.rows(), w.cols(), |i, j| flat[at + i * w.cols() + j]);
            at += len;
            let bl = b.len();
            b.copy_from_slice(&flat[at..at + bl]);
            at += bl;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip() {
        let mut rng = RngStream::new(3, 0);
        let m = MlpModel::<f64>::random(2, 1, &[5, 4], &mut rng).unwrap();
        assert_eq!(m.param_count(), 3 * 5 + 5 + 5 * 4 + 4 + 4 * 2 + 2);
        let back = MlpModel::from_flat(2, 1, &[5, 4], &m.to_flat()).unwrap();
        assert_eq!(back, m);
        assert!(MlpModel::<f64>::from_flat(2, 1, &[5, 4], &[0.0; 3]).is_err());
    }

    #[test]
    fn zero_weights_give_identity_dynamics() {
        let flat = vec![0.0f64; param_count(&[3, 4, 2])];
        let m = MlpModel::from_flat(2, 1, &[4], &flat).unwrap();
        assert_eq!(m.forward(&[0.5, -0.5], &[9.0]).unwrap(), vec![0.5, -0.5]);
    }

    #[test]
    fn zero_variance_dataset_is_memorized() {
        let tr = Transition {
            state: vec![0.2, -0.1],
            action: vec![0.5, 0.5],
            next: vec![0.3, 0.0],
        };
        let data = vec![tr; 20];
        let cfg = TrainConfig {
            hidden: vec![8],
            epochs: 300,
            lr: 1e-2,
            batch_size: 10,
            threshold: 1e-10,
            lr_floor: 1e-3,
        };
        let (_, report) = train_mlp(&data, &cfg, &mut RngStream::new(1, 0)).unwrap();
        assert!(report.heldout_mse < 1e-10, "{report:?}");
    }

    #[test]
    fn failure_carries_loss() {
        let data: Vec<Transition<f64>> = (0..30)
            .map(|i| Transition {
                state: vec![i as f64],
                action: vec![0.0],
                next: vec![((i * 7919) % 13) as f64],
            })
            .collect();
        let cfg = TrainConfig {
            hidden: vec![],
            epochs: 2,
            threshold: 1e-12,
            ..TrainConfig::default()
        };
        match train_mlp(&data, &cfg, &mut RngStream::new(0, 0)) {
            Err(Error::TrainingFailure { loss, threshold }) => {
                assert!(loss > threshold);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
