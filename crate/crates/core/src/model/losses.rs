//! Graph-level losses over a [`BoundVigan`] plus `f64` evaluators on
//! frozen models. Every batch here is already in normalized space.

use serde::{Deserialize, Serialize};

use super::vigan::{BoundVigan, LossWeights, Net, ViganModel};
use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Result, ViganError};
use crate::nn::BoundMlp;

/// What sits between a generator and the discriminator that judges it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Refiner {
    /// `P_Y(A(x, G1(x)))`, as in the joint objective.
    Dae,
    /// Raw generator output, as in the stage-2 loss.
    Identity,
}

/// Objective the generators descend.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorLoss {
    /// Minimize `log(1 − D(fake))` directly.
    #[default]
    Literal,
    /// Minimize `−log D(fake)` instead.
    NonSaturating,
}

/// Nodes of one evaluated objective.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    /// `None` when no paired batch was supplied.
    pub ae: Option<Var>,
    pub cyc: Var,
    pub gan_x: Var,
    pub gan_y: Var,
    pub total: Var,
    /// `D_X` on generated x, `D_Y` on generated y.
    pub fake_score_x: Var,
    pub fake_score_y: Var,
}

/// Scalar component values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ae: f64,
    pub cyc: f64,
    pub gan_x: f64,
    pub gan_y: f64,
    pub total: f64,
}

impl LossVars {
    pub fn breakdown(&self, g: &Graph) -> LossBreakdown {
        let s = |v: Var| g.value(v).data()[0];
        LossBreakdown {
            ae: self.ae.map(s).unwrap_or(0.0),
            cyc: s(self.cyc),
            gan_x: s(self.gan_x),
            gan_y: s(self.gan_y),
            total: s(self.total),
        }
    }
}

fn check_width(g: &Graph, v: Var, want: usize, op: &'static str) -> Result<()> {
    let shape = g.shape(v);
    if shape.len() != 2 || shape[1] != want {
        return Err(ViganError::shape(op, shape, &[want]));
    }
    Ok(())
}

/// First `dim_x` columns of a pair batch.
pub fn project_x(g: &mut Graph, pair: Var, dim_x: usize, dim_y: usize) -> Result<Var> {
    check_width(g, pair, dim_x + dim_y, "project_x")?;
    g.slice(pair, 1, 0, dim_x)
}

/// Last `dim_y` columns of a pair batch.
pub fn project_y(g: &mut Graph, pair: Var, dim_x: usize, dim_y: usize) -> Result<Var> {
    check_width(g, pair, dim_x + dim_y, "project_y")?;
    g.slice(pair, 1, dim_x, dim_x + dim_y)
}

/// Generated y for an x batch, optionally refined through the DAE.
pub fn fake_y(g: &mut Graph, nets: &BoundVigan, x: Var, refiner: Refiner) -> Result<Var> {
    let gy = nets.g1.forward(g, x)?;
    match refiner {
        Refiner::Identity => Ok(gy),
        Refiner::Dae => {
            let pair = g.concat(x, gy, 1)?;
            let out = nets.dae.forward(g, pair)?;
            project_y(g, out, nets.dim_x, nets.dim_y)
        }
    }
}

/// Generated x for a y batch, optionally refined through the DAE.
pub fn fake_x(g: &mut Graph, nets: &BoundVigan, y: Var, refiner: Refiner) -> Result<Var> {
    let gx = nets.g2.forward(g, y)?;
    match refiner {
        Refiner::Identity => Ok(gx),
        Refiner::Dae => {
            let pair = g.concat(gx, y, 1)?;
            let out = nets.dae.forward(g, pair)?;
            project_x(g, out, nets.dim_x, nets.dim_y)
        }
    }
}

/// Squared reconstruction error of the DAE on both corrupted versions of
/// each pair, summed per row and averaged over the batch.
pub fn loss_ae(g: &mut Graph, nets: &BoundVigan, x: Var, y: Var) -> Result<Var> {
    let target = g.concat(x, y, 1)?;
    let gy = nets.g1.forward(g, x)?;
    let from_x = g.concat(x, gy, 1)?;
    let rec_x = nets.dae.forward(g, from_x)?;
    let gx = nets.g2.forward(g, y)?;
    let from_y = g.concat(gx, y, 1)?;
    let rec_y = nets.dae.forward(g, from_y)?;
    let a = g.row_sq_dist_mean(rec_x, target)?;
    let b = g.row_sq_dist_mean(rec_y, target)?;
    g.add(a, b)
}

/// `mean log D(real) + mean log(1 − D(fake))`. Returns the loss and the
/// raw fake scores.
pub fn adversarial(g: &mut Graph, d: &BoundMlp, real: Var, fake: Var) -> Result<(Var, Var)> {
    let real_score = d.forward(g, real)?;
    let fake_score = d.forward(g, fake)?;
    let lr = g.log_prob(real_score);
    let lr = g.mean(lr);
    let inv = g.one_minus(fake_score);
    let lf = g.log_prob(inv);
    let lf = g.mean(lf);
    Ok((g.add(lr, lf)?, fake_score))
}

pub fn loss_aegan_y(g: &mut Graph, nets: &BoundVigan, x: Var, y: Var) -> Result<Var> {
    let fake = fake_y(g, nets, x, Refiner::Dae)?;
    Ok(adversarial(g, &nets.d_y, y, fake)?.0)
}

pub fn loss_aegan_x(g: &mut Graph, nets: &BoundVigan, x: Var, y: Var) -> Result<Var> {
    let fake = fake_x(g, nets, y, Refiner::Dae)?;
    Ok(adversarial(g, &nets.d_x, x, fake)?.0)
}

/// L1 cycle error in both directions.
pub fn loss_cyc(g: &mut Graph, nets: &BoundVigan, x: Var, y: Var) -> Result<Var> {
    let gy = nets.g1.forward(g, x)?;
    let back_x = nets.g2.forward(g, gy)?;
    let gx = nets.g2.forward(g, y)?;
    let back_y = nets.g1.forward(g, gx)?;
    let a = g.row_l1_dist_mean(back_x, x)?;
    let b = g.row_l1_dist_mean(back_y, y)?;
    g.add(a, b)
}

/// Full weighted objective. With `paired == None` the reconstruction term
/// is left out of the sum entirely.
pub fn objective(
    g: &mut Graph,
    nets: &BoundVigan,
    weights: &LossWeights,
    paired: Option<(Var, Var)>,
    x: Var,
    y: Var,
    refiner: Refiner,
) -> Result<LossVars> {
    weights.validate()?;
    check_width(g, x, nets.dim_x, "x batch")?;
    check_width(g, y, nets.dim_y, "y batch")?;
    let ae = match paired {
        Some((px, py)) => Some(loss_ae(g, nets, px, py)?),
        None => None,
    };
    let cyc = loss_cyc(g, nets, x, y)?;
    let fy = fake_y(g, nets, x, refiner)?;
    let (gan_y, fake_score_y) = adversarial(g, &nets.d_y, y, fy)?;
    let fx = fake_x(g, nets, y, refiner)?;
    let (gan_x, fake_score_x) = adversarial(g, &nets.d_x, x, fx)?;

    let mut total = g.scale(cyc, weights.lambda_cyc);
    if let Some(ae) = ae {
        let weighted = g.scale(ae, weights.lambda_ae);
        total = g.add(weighted, total)?;
    }
    total = g.add(total, gan_x)?;
    total = g.add(total, gan_y)?;
    Ok(LossVars {
        ae,
        cyc,
        gan_x,
        gan_y,
        total,
        fake_score_x,
        fake_score_y,
    })
}

/// Stage-3 objective: adversarial terms judge DAE-refined outputs.
pub fn loss_total(
    g: &mut Graph,
    nets: &BoundVigan,
    weights: &LossWeights,
    paired: Option<(Var, Var)>,
    x: Var,
    y: Var,
) -> Result<LossVars> {
    objective(g, nets, weights, paired, x, y, Refiner::Dae)
}

/// Stage-2 objective: plain CycleGAN, no DAE.
pub fn loss_cyclegan(
    g: &mut Graph,
    nets: &BoundVigan,
    lambda_cyc: f64,
    x: Var,
    y: Var,
) -> Result<LossVars> {
    let weights = LossWeights {
        lambda_ae: 0.0,
        lambda_cyc,
    };
    objective(g, nets, &weights, None, x, y, Refiner::Identity)
}

/// What the generators (and, in stage 3, the DAE) minimize.
pub fn generator_objective(
    g: &mut Graph,
    vars: &LossVars,
    weights: &LossWeights,
    form: GeneratorLoss,
) -> Result<Var> {
    match form {
        GeneratorLoss::Literal => Ok(vars.total),
        GeneratorLoss::NonSaturating => {
            let mut total = g.scale(vars.cyc, weights.lambda_cyc);
            if let Some(ae) = vars.ae {
                let weighted = g.scale(ae, weights.lambda_ae);
                total = g.add(weighted, total)?;
            }
            for score in [vars.fake_score_x, vars.fake_score_y] {
                let l = g.log_prob(score);
                let l = g.mean(l);
                total = g.sub(total, l)?;
            }
            Ok(total)
        }
    }
}

/// What the discriminators minimize: the negated adversarial terms.
pub fn discriminator_objective(g: &mut Graph, vars: &LossVars) -> Result<Var> {
    let s = g.add(vars.gan_x, vars.gan_y)?;
    Ok(g.neg(s))
}

fn frozen(model: &ViganModel) -> (Graph, BoundVigan) {
    let mut g = Graph::new();
    let nets = model.bind(&mut g, &[]);
    (g, nets)
}

fn eval_scalar(
    model: &ViganModel,
    x: &Tensor,
    y: &Tensor,
    f: impl FnOnce(&mut Graph, &BoundVigan, Var, Var) -> Result<Var>,
) -> Result<f64> {
    let (mut g, nets) = frozen(model);
    let xv = g.constant(x.clone());
    let yv = g.constant(y.clone());
    let out = f(&mut g, &nets, xv, yv)?;
    Ok(g.value(out).data()[0])
}

/// Scalar evaluators on a frozen model.
impl ViganModel {
    /// `x` and `y` are the two halves of a paired batch.
    pub fn loss_ae(&self, x: &Tensor, y: &Tensor) -> Result<f64> {
        eval_scalar(self, x, y, loss_ae)
    }

    pub fn loss_aegan_y(&self, x: &Tensor, y: &Tensor) -> Result<f64> {
        eval_scalar(self, x, y, loss_aegan_y)
    }

    pub fn loss_aegan_x(&self, x: &Tensor, y: &Tensor) -> Result<f64> {
        eval_scalar(self, x, y, loss_aegan_x)
    }

    pub fn loss_cyc(&self, x: &Tensor, y: &Tensor) -> Result<f64> {
        eval_scalar(self, x, y, loss_cyc)
    }

    pub fn loss_total(
        &self,
        weights: &LossWeights,
        paired: Option<(&Tensor, &Tensor)>,
        x: &Tensor,
        y: &Tensor,
    ) -> Result<LossBreakdown> {
        let (mut g, nets) = frozen(self);
        let paired = paired.map(|(px, py)| (g.constant(px.clone()), g.constant(py.clone())));
        let xv = g.constant(x.clone());
        let yv = g.constant(y.clone());
        Ok(loss_total(&mut g, &nets, weights, paired, xv, yv)?.breakdown(&g))
    }

    pub fn loss_cyclegan(&self, lambda_cyc: f64, x: &Tensor, y: &Tensor) -> Result<LossBreakdown> {
        let (mut g, nets) = frozen(self);
        let xv = g.constant(x.clone());
        let yv = g.constant(y.clone());
        Ok(loss_cyclegan(&mut g, &nets, lambda_cyc, xv, yv)?.breakdown(&g))
    }

    /// Every parameter of the five networks, named `net.layer.kind`.
    pub fn named_params(&self) -> Vec<(String, Tensor)> {
        Net::ALL
            .iter()
            .flat_map(|&n| {
                let net = self.net(n);
                net.param_names(n.name())
                    .into_iter()
                    .zip(net.params().into_iter().cloned())
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Binds the networks to existing graph variables laid out as in
    /// [`ViganModel::named_params`].
    pub fn attach(&self, vars: &[Var]) -> Result<BoundVigan> {
        if vars.len() != self.named_params().len() {
            return Err(ViganError::invalid(format!(
                "expected {} parameter variables, got {}",
                self.named_params().len(),
                vars.len()
            )));
        }
        let mut offset = 0;
        let mut take = |n: Net| {
            let k = self.net(n).params().len();
            let b = self.net(n).attach(&vars[offset..offset + k]);
            offset += k;
            b
        };
        Ok(BoundVigan {
            g1: take(Net::G1)?,
            g2: take(Net::G2)?,
            d_x: take(Net::DX)?,
            d_y: take(Net::DY)?,
            dae: take(Net::Dae)?,
            dim_x: self.dim_x(),
            dim_y: self.dim_y(),
        })
    }
}
