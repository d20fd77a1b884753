use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::{xavier_uniform, zero_bias};
use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Result, ViganError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    None,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::None => 0,
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::None),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Sigmoid),
            _ => None,
        }
    }

    fn apply(self, g: &mut Graph, v: Var) -> Var {
        match self {
            Activation::Relu => g.relu(v),
            Activation::Sigmoid => g.sigmoid(v),
            Activation::None => v,
        }
    }
}

/// Fully connected layer: `activation(x · W + b)` with `W: [in × out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [weight.shape()[1]] {
            return Err(ViganError::shape(
                "dense layer",
                weight.shape(),
                bias.shape(),
            ));
        }
        Ok(DenseLayer {
            weight,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[1]
    }
}

/// Chain of dense layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Randomly initialised network with widths `sizes[0] → … → sizes[n]`,
    /// ReLU between layers and `output` on the last one.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: Activation, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(ViganError::invalid(
                "an MLP needs at least input and output widths",
            ));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { output } else { Activation::Relu };
                DenseLayer::new(xavier_uniform(w[0], w[1], rng)?, zero_bias(w[1])?, act)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Mlp { layers })
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(ViganError::invalid("an MLP needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(ViganError::shape(
                    "mlp layer chain",
                    pair[0].weight.shape(),
                    pair[1].weight.shape(),
                ));
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Σ (inᵢ·outᵢ + outᵢ).
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Parameters in a fixed order: weight, bias per layer.
    pub fn params(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    /// Names matching [`Mlp::params`], prefixed with `prefix`.
    pub fn param_names(&self, prefix: &str) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|i| [format!("{prefix}.{i}.weight"), format!("{prefix}.{i}.bias")])
            .collect()
    }

    /// Copies the parameters into `g` as leaves.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> BoundMlp {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let w = g.leaf(l.weight.clone(), trainable);
                let b = g.leaf(l.bias.clone(), trainable);
                (w, b, l.activation)
            })
            .collect();
        BoundMlp {
            layers,
            input_dim: self.input_dim(),
        }
    }

    /// Wraps leaves already in a graph (ordered as [`Mlp::params`]) so the
    /// network can be evaluated on them.
    pub fn attach(&self, vars: &[Var]) -> Result<BoundMlp> {
        if vars.len() != 2 * self.layers.len() {
            return Err(ViganError::invalid("parameter count mismatch"));
        }
        let layers = self
            .layers
            .iter()
            .zip(vars.chunks_exact(2))
            .map(|(l, wb)| (wb[0], wb[1], l.activation))
            .collect();
        Ok(BoundMlp {
            layers,
            input_dim: self.input_dim(),
        })
    }

    /// Forward pass outside any caller-visible graph.
    pub fn infer(&self, batch: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let x = g.constant(batch.clone());
        let out = bound.forward(&mut g, x)?;
        Ok(g.value(out).clone())
    }

    /// Overwrites every parameter with the matching tensor in `values`.
    pub fn set_params(&mut self, values: &[Tensor]) -> Result<()> {
        let params = self.params_mut();
        if params.len() != values.len() {
            return Err(ViganError::invalid("parameter count mismatch"));
        }
        for (p, v) in params.into_iter().zip(values) {
            if p.shape() != v.shape() {
                return Err(ViganError::shape("set_params", p.shape(), v.shape()));
            }
            *p = v.clone();
        }
        Ok(())
    }
}

/// An [`Mlp`] whose parameters live as leaves of one graph.
#[derive(Clone, Debug)]
pub struct BoundMlp {
    layers: Vec<(Var, Var, Activation)>,
    input_dim: usize,
}

impl BoundMlp {
    pub fn forward(&self, g: &mut Graph, batch: Var) -> Result<Var> {
        let width = g.shape(batch).last().copied().unwrap_or(0);
        if g.shape(batch).len() != 2 || width != self.input_dim {
            return Err(ViganError::shape(
                "mlp forward",
                g.shape(batch),
                &[self.input_dim],
            ));
        }
        let mut h = batch;
        for &(w, b, act) in &self.layers {
            let z = g.matmul(h, w)?;
            let z = g.add(z, b)?;
            h = act.apply(g, z);
        }
        Ok(h)
    }

    /// Leaves in the order of [`Mlp::params`].
    pub fn vars(&self) -> Vec<Var> {
        self.layers.iter().flat_map(|&(w, b, _)| [w, b]).collect()
    }

    pub fn grads(&self, g: &Graph) -> Vec<Tensor> {
        self.vars().into_iter().map(|v| g.grad_or_zero(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, DEFAULT_STEP, DEFAULT_TOLERANCE};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer_passes_inputs_through() {
        let layer = DenseLayer::new(
            Tensor::identity(3).unwrap(),
            Tensor::vector(vec![0.0; 3]).unwrap(),
            Activation::None,
        )
        .unwrap();
        let net = Mlp::from_layers(vec![layer]).unwrap();
        let x = Tensor::matrix(2, 3, vec![1.0, -2.0, 3.5, 0.0, 4.0, -0.25]).unwrap();
        assert_eq!(net.infer(&x).unwrap(), x);
    }

    #[test]
    fn sigmoid_head_bounded_and_forward_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[4, 8, 8, 2], Activation::Sigmoid, &mut rng).unwrap();
        let x = Tensor::matrix(3, 4, (0..12).map(|i| (i as f64 - 6.0) * 3.0).collect()).unwrap();
        let a = net.infer(&x).unwrap();
        assert!(a.data().iter().all(|&v| v > 0.0 && v < 1.0));
        let b = net.infer(&x).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn width_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[4, 2], Activation::None, &mut rng).unwrap();
        let x = Tensor::matrix(1, 3, vec![0.0; 3]).unwrap();
        assert!(net.infer(&x).is_err());
    }

    #[test]
    fn layer_chain_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = Mlp::new(&[2, 3], Activation::None, &mut rng)
            .unwrap()
            .layers()[0]
            .clone();
        let b = Mlp::new(&[4, 1], Activation::None, &mut rng)
            .unwrap()
            .layers()[0]
            .clone();
        assert!(Mlp::from_layers(vec![a, b]).is_err());
    }

    #[test]
    fn param_count_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[5, 7, 3, 2], Activation::Sigmoid, &mut rng).unwrap();
        assert_eq!(net.param_count(), 5 * 7 + 7 + 7 * 3 + 3 + 3 * 2 + 2);
        assert_eq!(net.params().len(), net.param_names("n").len());
    }

    #[test]
    fn two_hidden_layer_gradients_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Mlp::new(&[3, 5, 4, 2], Activation::Sigmoid, &mut rng).unwrap();
        let x = Tensor::matrix(
            4,
            3,
            (0..12).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect(),
        )
        .unwrap();
        let target = Tensor::matrix(4, 2, vec![0.1, 0.9, 0.4, 0.3, 0.8, 0.2, 0.5, 0.5]).unwrap();
        let inputs: Vec<(String, Tensor)> = net
            .param_names("net")
            .into_iter()
            .zip(net.params().into_iter().cloned())
            .collect();
        let report = grad_check(
            |g, vars| {
                let bound = net.attach(vars)?;
                let xb = g.constant(x.clone());
                let h = bound.forward(g, xb)?;
                let t = g.constant(target.clone());
                g.mse_loss(h, t)
            },
            &inputs,
            DEFAULT_STEP,
            DEFAULT_TOLERANCE,
        )
        .unwrap();
        assert!(report.passed(), "{report}");
    }
}
