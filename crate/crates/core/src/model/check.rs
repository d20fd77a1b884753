use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::losses::loss_total;
use super::vigan::{Architecture, LossWeights, Net, ViganModel};
use crate::autodiff::{grad_check, GradCheckReport, Graph, Tensor, Var, DEFAULT_TOLERANCE};
use crate::error::{Result, ViganError};

/// Toy dimensions used by [`toy_gradient_check`].
pub const TOY_DIM_X: usize = 3;
pub const TOY_DIM_Y: usize = 2;
pub const TOY_HIDDEN: usize = 4;

/// Finite-difference step used by [`toy_gradient_check`]. Large enough that
/// roundoff in a loss of order ten stays well under the tolerance for
/// gradients near 1e-8.
pub const TOY_STEP: f64 = 3e-4;

/// The evaluation point keeps every kink at least this many steps away.
pub const TOY_KINK_STEPS: f64 = 10.0;

const MAX_DRAWS: usize = 1000;

struct ToyPoint {
    model: ViganModel,
    px: Tensor,
    py: Tensor,
    x: Tensor,
    y: Tensor,
}

impl ToyPoint {
    fn loss(&self, g: &mut Graph, vars: &[Var]) -> Result<Var> {
        let nets = self.model.attach(vars)?;
        let paired = Some((g.constant(self.px.clone()), g.constant(self.py.clone())));
        let (xv, yv) = (g.constant(self.x.clone()), g.constant(self.y.clone()));
        Ok(loss_total(g, &nets, &LossWeights::default(), paired, xv, yv)?.total)
    }

    fn margin(&self) -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = self
            .model
            .named_params()
            .into_iter()
            .map(|(_, t)| g.param(t))
            .collect();
        self.loss(&mut g, &vars)?;
        Ok(g.kink_margin())
    }
}

fn draw(seed: u64, rng: &mut ChaCha8Rng) -> Result<ToyPoint> {
    let mut model = ViganModel::new(
        TOY_DIM_X,
        TOY_DIM_Y,
        &Architecture::uniform(TOY_HIDDEN),
        seed,
    )?;
    for n in Net::ALL {
        for layer in model.net_mut(n).layers_mut() {
            layer
                .bias
                .data_mut()
                .iter_mut()
                .for_each(|b| *b = rng.random_range(0.2..0.6));
        }
    }
    let mut batch = |rows: usize, cols: usize| {
        Tensor::matrix(
            rows,
            cols,
            (0..rows * cols)
                .map(|_| rng.random_range(0.0..1.0))
                .collect(),
        )
    };
    Ok(ToyPoint {
        px: batch(3, TOY_DIM_X)?,
        py: batch(3, TOY_DIM_Y)?,
        x: batch(4, TOY_DIM_X)?,
        y: batch(4, TOY_DIM_Y)?,
        model,
    })
}

/// Finite-difference check of the full objective with respect to every
/// parameter of a small randomly initialised model.
///
/// Biases are drawn small and positive so that most hidden units are live;
/// a four-wide ReLU stack with zero biases is often nearly dead, leaving
/// gradients too small for any finite difference to resolve.
///
/// The objective is only piecewise smooth, so the evaluation point is
/// redrawn (biases and batches) until every ReLU input and every L1
/// residual is at least [`TOY_KINK_STEPS`] steps from its kink. Across a
/// kink no finite difference can agree with a subgradient.
pub fn toy_gradient_check(seed: u64) -> Result<GradCheckReport> {
    toy_gradient_check_with(seed, TOY_STEP)
}

pub fn toy_gradient_check_with(seed: u64, step: f64) -> Result<GradCheckReport> {
    let margin = TOY_KINK_STEPS * step;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut point = draw(seed, &mut rng)?;
    let mut draws = 1;
    while point.margin()? < margin {
        if draws == MAX_DRAWS {
            return Err(ViganError::invalid(format!(
                "no evaluation point with kink margin {margin} after {MAX_DRAWS} draws"
            )));
        }
        point = draw(seed, &mut rng)?;
        draws += 1;
    }
    grad_check(
        |g, vars| point.loss(g, vars),
        &point.model.named_params(),
        step,
        DEFAULT_TOLERANCE,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_few_seeds_pass() {
        for seed in 0..3 {
            let r = toy_gradient_check(seed).unwrap();
            assert!(r.passed(), "seed {seed}: {r}");
        }
    }
}
