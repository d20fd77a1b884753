use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor};
use crate::data::{Direction, FeatureScaler, MultiViewDataset, NormStats, RowSet};
use crate::error::{Result, ViganError};
use crate::nn::{Activation, BoundMlp, DenseLayer, Mlp};

/// Hidden-layer widths of the five networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    /// Encoder widths, shared representation, decoder widths.
    pub dae_hidden: Vec<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            generator_hidden: vec![64, 64],
            discriminator_hidden: vec![64, 64],
            dae_hidden: vec![64, 32, 16, 32, 64],
        }
    }
}

impl Architecture {
    /// Same depth as the default with every hidden layer `width` wide.
    pub fn uniform(width: usize) -> Self {
        let d = Architecture::default();
        Architecture {
            generator_hidden: vec![width; d.generator_hidden.len()],
            discriminator_hidden: vec![width; d.discriminator_hidden.len()],
            dae_hidden: vec![width; d.dae_hidden.len()],
        }
    }

    fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
        let mut w = Vec::with_capacity(hidden.len() + 2);
        w.push(input);
        w.extend_from_slice(hidden);
        w.push(output);
        w
    }
}

/// `λ_AE` and `λ_CYC`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_ae: f64,
    pub lambda_cyc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_ae: 1.0,
            lambda_cyc: 10.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_ae", self.lambda_ae),
            ("lambda_cyc", self.lambda_cyc),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ViganError::invalid(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Identifies one of the five networks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Net {
    G1,
    G2,
    DX,
    DY,
    Dae,
}

impl Net {
    pub const ALL: [Net; 5] = [Net::G1, Net::G2, Net::DX, Net::DY, Net::Dae];

    pub fn name(self) -> &'static str {
        match self {
            Net::G1 => "g1",
            Net::G2 => "g2",
            Net::DX => "d_x",
            Net::DY => "d_y",
            Net::Dae => "dae",
        }
    }
}

/// How the missing view is produced at inference time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImputeMode {
    /// DAE-refined generator estimate: `P_Y(A(x, G1(x)))`.
    Full,
    /// Raw generator output `G1(x)`.
    GeneratorOnly,
    /// DAE applied to the observed view with the other zeroed: `P_Y(A(x, 0))`.
    DaeOnly,
}

/// The five networks plus the preprocessing needed to use them on raw data.
///
/// All networks operate in normalized `[0, 1]` feature space; `stats`
/// maps between that space and original units.
#[derive(Clone, Debug, PartialEq)]
pub struct ViganModel {
    /// `G1: X → Y`.
    pub g1: Mlp,
    /// `G2: Y → X`.
    pub g2: Mlp,
    pub d_x: Mlp,
    pub d_y: Mlp,
    /// `A: X × Y → X × Y` on the concatenated pair.
    pub dae: Mlp,
    pub stats: NormStats,
    pub x_binary: Vec<bool>,
    pub y_binary: Vec<bool>,
    pub trained: bool,
    /// JSON record of the settings the model was trained with.
    pub hyperparameters: String,
}

impl ViganModel {
    /// Freshly initialised model with identity normalization.
    pub fn new(dim_x: usize, dim_y: usize, arch: &Architecture, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = dim_x + dim_y;
        let g1 = Mlp::new(
            &Architecture::widths(dim_x, &arch.generator_hidden, dim_y),
            Activation::Sigmoid,
            &mut rng,
        )?;
        let g2 = Mlp::new(
            &Architecture::widths(dim_y, &arch.generator_hidden, dim_x),
            Activation::Sigmoid,
            &mut rng,
        )?;
        let d_x = Mlp::new(
            &Architecture::widths(dim_x, &arch.discriminator_hidden, 1),
            Activation::Sigmoid,
            &mut rng,
        )?;
        let d_y = Mlp::new(
            &Architecture::widths(dim_y, &arch.discriminator_hidden, 1),
            Activation::Sigmoid,
            &mut rng,
        )?;
        let dae = Mlp::new(
            &Architecture::widths(pair, &arch.dae_hidden, pair),
            Activation::Sigmoid,
            &mut rng,
        )?;
        ViganModel::from_parts(
            g1,
            g2,
            d_x,
            d_y,
            dae,
            NormStats {
                x: FeatureScaler::identity(dim_x),
                y: FeatureScaler::identity(dim_y),
            },
            vec![false; dim_x],
            vec![false; dim_y],
        )
    }

    /// Model sized for `ds`, with its normalization statistics and binary
    /// flags.
    pub fn for_dataset(ds: &MultiViewDataset, arch: &Architecture, seed: u64) -> Result<Self> {
        let mut model = ViganModel::new(ds.dim_x(), ds.dim_y(), arch, seed)?;
        model.stats = ds.fit_stats()?;
        model.x_binary = ds.x_info.binary.clone();
        model.y_binary = ds.y_info.binary.clone();
        Ok(model)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        g1: Mlp,
        g2: Mlp,
        d_x: Mlp,
        d_y: Mlp,
        dae: Mlp,
        stats: NormStats,
        x_binary: Vec<bool>,
        y_binary: Vec<bool>,
    ) -> Result<Self> {
        let model = ViganModel {
            g1,
            g2,
            d_x,
            d_y,
            dae,
            stats,
            x_binary,
            y_binary,
            trained: false,
            hyperparameters: String::from("{}"),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let (dx, dy) = (self.dim_x(), self.dim_y());
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(ViganError::invalid(format!("inconsistent model: {what}")))
            }
        };
        check(
            self.g2.input_dim() == dy && self.g2.output_dim() == dx,
            "g2 must map dim_y -> dim_x",
        )?;
        check(
            self.d_x.input_dim() == dx && self.d_x.output_dim() == 1,
            "d_x must map dim_x -> 1",
        )?;
        check(
            self.d_y.input_dim() == dy && self.d_y.output_dim() == 1,
            "d_y must map dim_y -> 1",
        )?;
        check(
            self.dae.input_dim() == dx + dy && self.dae.output_dim() == dx + dy,
            "dae input and output widths must equal dim_x + dim_y",
        )?;
        for d in [&self.d_x, &self.d_y] {
            check(
                d.layers().last().map(|l| l.activation) == Some(Activation::Sigmoid),
                "discriminators must end in a sigmoid",
            )?;
        }
        check(
            self.stats.x.dim() == dx && self.stats.y.dim() == dy,
            "normalization statistics",
        )?;
        check(
            self.x_binary.len() == dx && self.y_binary.len() == dy,
            "binary flags",
        )?;
        self.stats.x.check()?;
        self.stats.y.check()
    }

    pub fn dim_x(&self) -> usize {
        self.g1.input_dim()
    }

    pub fn dim_y(&self) -> usize {
        self.g1.output_dim()
    }

    pub fn net(&self, which: Net) -> &Mlp {
        match which {
            Net::G1 => &self.g1,
            Net::G2 => &self.g2,
            Net::DX => &self.d_x,
            Net::DY => &self.d_y,
            Net::Dae => &self.dae,
        }
    }

    pub fn net_mut(&mut self, which: Net) -> &mut Mlp {
        match which {
            Net::G1 => &mut self.g1,
            Net::G2 => &mut self.g2,
            Net::DX => &mut self.d_x,
            Net::DY => &mut self.d_y,
            Net::Dae => &mut self.dae,
        }
    }

    pub fn param_count(&self) -> usize {
        Net::ALL.iter().map(|&n| self.net(n).param_count()).sum()
    }

    /// Places all five networks in `g`; only those listed in `trainable`
    /// receive gradients.
    pub fn bind(&self, g: &mut Graph, trainable: &[Net]) -> BoundVigan {
        let mut b = |n: Net| self.net(n).bind(g, trainable.contains(&n));
        BoundVigan {
            g1: b(Net::G1),
            g2: b(Net::G2),
            d_x: b(Net::DX),
            d_y: b(Net::DY),
            dae: b(Net::Dae),
            dim_x: self.dim_x(),
            dim_y: self.dim_y(),
        }
    }

    /// The same model with the roles of the two views exchanged.
    pub fn mirrored(&self) -> Result<ViganModel> {
        let (dx, dy) = (self.dim_x(), self.dim_y());
        let mut layers = self.dae.layers().to_vec();
        let first = &layers[0];
        let (rows, cols) = (first.in_dim(), first.out_dim());
        let w = first.weight.data();
        // input rows reordered to (y, x)
        let mut swapped_in = Vec::with_capacity(w.len());
        for r in (dx..rows).chain(0..dx) {
            swapped_in.extend_from_slice(&w[r * cols..(r + 1) * cols]);
        }
        layers[0] = DenseLayer::new(
            Tensor::matrix(rows, cols, swapped_in)?,
            first.bias.clone(),
            first.activation,
        )?;

        let last_idx = layers.len() - 1;
        let last = &layers[last_idx];
        let (rows, cols) = (last.in_dim(), last.out_dim());
        let order: Vec<usize> = (dx..dx + dy).chain(0..dx).collect();
        let w = last.weight.data();
        let mut swapped_out = Vec::with_capacity(w.len());
        for r in 0..rows {
            swapped_out.extend(order.iter().map(|&c| w[r * cols + c]));
        }
        let bias: Vec<f64> = order.iter().map(|&c| last.bias.data()[c]).collect();
        layers[last_idx] = DenseLayer::new(
            Tensor::matrix(rows, cols, swapped_out)?,
            Tensor::vector(bias)?,
            last.activation,
        )?;

        let mut m = ViganModel::from_parts(
            self.g2.clone(),
            self.g1.clone(),
            self.d_y.clone(),
            self.d_x.clone(),
            Mlp::from_layers(layers)?,
            NormStats {
                x: self.stats.y.clone(),
                y: self.stats.x.clone(),
            },
            self.y_binary.clone(),
            self.x_binary.clone(),
        )?;
        m.trained = self.trained;
        m.hyperparameters = self.hyperparameters.clone();
        Ok(m)
    }

    /// Imputation in normalized space. Ignores the `trained` flag.
    pub fn impute_normalized(
        &self,
        input: &Tensor,
        dir: Direction,
        mode: ImputeMode,
    ) -> Result<Tensor> {
        let (dx, dy) = (self.dim_x(), self.dim_y());
        let (present, missing) = match dir {
            Direction::XToY => (dx, dy),
            Direction::YToX => (dy, dx),
        };
        if input.shape().len() != 2 || input.cols() != present {
            return Err(ViganError::shape("impute input", input.shape(), &[present]));
        }
        let generator = match dir {
            Direction::XToY => &self.g1,
            Direction::YToX => &self.g2,
        };
        let mut g = Graph::new();
        let inp = g.constant(input.clone());
        let estimate = match mode {
            ImputeMode::GeneratorOnly => return generator.infer(input),
            ImputeMode::Full => {
                let gen = generator.bind(&mut g, false);
                gen.forward(&mut g, inp)?
            }
            ImputeMode::DaeOnly => g.constant(Tensor::zeros(vec![input.rows(), missing])?),
        };
        let pair = match dir {
            Direction::XToY => g.concat(inp, estimate, 1)?,
            Direction::YToX => g.concat(estimate, inp, 1)?,
        };
        let dae = self.dae.bind(&mut g, false);
        let out = dae.forward(&mut g, pair)?;
        let projected = match dir {
            Direction::XToY => g.slice(out, 1, dx, dx + dy)?,
            Direction::YToX => g.slice(out, 1, 0, dx)?,
        };
        Ok(g.value(projected).clone())
    }

    /// Imputes the missing view for raw-unit inputs, returning raw units.
    /// Binary features are thresholded at 0.5 (ties round up).
    pub fn impute(&self, input: &RowSet, dir: Direction) -> Result<RowSet> {
        self.impute_with(input, dir, ImputeMode::Full)
    }

    pub fn impute_with(&self, input: &RowSet, dir: Direction, mode: ImputeMode) -> Result<RowSet> {
        if !self.trained {
            return Err(ViganError::invalid("model has not been trained"));
        }
        let (in_scaler, out_scaler, flags) = match dir {
            Direction::XToY => (&self.stats.x, &self.stats.y, &self.y_binary),
            Direction::YToX => (&self.stats.y, &self.stats.x, &self.x_binary),
        };
        if input.width() != in_scaler.dim() {
            return Err(ViganError::shape(
                "impute input",
                &[input.width()],
                &[in_scaler.dim()],
            ));
        }
        if input.is_empty() {
            return Ok(RowSet::new(out_scaler.dim()));
        }
        let normalized = in_scaler.transform(input).to_tensor()?;
        let out = self.impute_normalized(&normalized, dir, mode)?;
        let raw = out_scaler.inverse(&RowSet::from_tensor(&out)?);
        Ok(threshold_binary(&raw, flags))
    }
}

/// Applies the 0.5 threshold to flagged columns; ties round up.
pub fn threshold_binary(rows: &RowSet, flags: &[bool]) -> RowSet {
    if !flags.iter().any(|&b| b) {
        return rows.clone();
    }
    rows.map_rows(|r| {
        r.iter()
            .zip(flags)
            .map(|(&v, &bin)| {
                if bin {
                    if v >= 0.5 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    v
                }
            })
            .collect()
    })
}

/// All five networks bound into one graph.
#[derive(Clone, Debug)]
pub struct BoundVigan {
    pub g1: BoundMlp,
    pub g2: BoundMlp,
    pub d_x: BoundMlp,
    pub d_y: BoundMlp,
    pub dae: BoundMlp,
    pub dim_x: usize,
    pub dim_y: usize,
}

impl BoundVigan {
    pub fn net(&self, which: Net) -> &BoundMlp {
        match which {
            Net::G1 => &self.g1,
            Net::G2 => &self.g2,
            Net::DX => &self.d_x,
            Net::DY => &self.d_y,
            Net::Dae => &self.dae,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ViganModel {
        let mut m = ViganModel::new(3, 2, &Architecture::uniform(4), 1).unwrap();
        m.trained = true;
        m
    }

    #[test]
    fn shapes_are_consistent() {
        let m = small();
        assert_eq!(m.dae.input_dim(), 5);
        assert_eq!(m.dae.output_dim(), 5);
        assert_eq!(m.d_x.output_dim(), 1);
        assert_eq!(m.g1.output_dim(), 2);
    }

    #[test]
    fn inconsistent_parts_rejected() {
        let m = small();
        let bad = ViganModel::from_parts(
            m.g1.clone(),
            m.g1.clone(),
            m.d_x.clone(),
            m.d_y.clone(),
            m.dae.clone(),
            m.stats.clone(),
            m.x_binary.clone(),
            m.y_binary.clone(),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn impute_shape_and_determinism() {
        let m = small();
        let x = RowSet::from_rows(3, &[vec![0.1, 0.2, 0.3], vec![0.9, 0.5, 0.0]]).unwrap();
        let a = m.impute(&x, Direction::XToY).unwrap();
        let b = m.impute(&x, Direction::XToY).unwrap();
        assert_eq!(a.width(), 2);
        assert_eq!(a.len(), 2);
        assert_eq!(a, b);
        let y = RowSet::from_rows(2, &[vec![0.4, 0.6]]).unwrap();
        assert_eq!(m.impute(&y, Direction::YToX).unwrap().width(), 3);
        assert!(m.impute(&y, Direction::XToY).is_err());
    }

    #[test]
    fn untrained_model_refuses_to_impute() {
        let mut m = small();
        m.trained = false;
        let x = RowSet::from_rows(3, &[vec![0.0; 3]]).unwrap();
        assert!(m.impute(&x, Direction::XToY).is_err());
    }

    #[test]
    fn imputation_ignores_discriminators() {
        let m = small();
        let mut other = m.clone();
        for p in other
            .d_x
            .params_mut()
            .into_iter()
            .chain(other.d_y.params_mut())
        {
            p.data_mut().iter_mut().for_each(|v| *v += 0.37);
        }
        let x = RowSet::from_rows(3, &[vec![0.3, 0.1, 0.8]]).unwrap();
        assert_eq!(
            m.impute(&x, Direction::XToY).unwrap(),
            other.impute(&x, Direction::XToY).unwrap()
        );
    }

    #[test]
    fn binary_threshold_ties_round_up() {
        let rows = RowSet::from_rows(3, &[vec![0.5, 0.49, 0.7]]).unwrap();
        let t = threshold_binary(&rows, &[true, true, false]);
        assert_eq!(t.row(0), &[1.0, 0.0, 0.7]);
    }

    #[test]
    fn mirrored_twice_is_identity() {
        let m = small();
        assert_eq!(m.mirrored().unwrap().mirrored().unwrap(), m);
    }

    #[test]
    fn negative_weights_rejected() {
        assert!(LossWeights {
            lambda_ae: -1.0,
            lambda_cyc: 1.0
        }
        .validate()
        .is_err());
        assert!(LossWeights {
            lambda_ae: 1.0,
            lambda_cyc: f64::NAN
        }
        .validate()
        .is_err());
    }
}
