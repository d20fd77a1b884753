use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::log::{LogRow, TrainLog};
use crate::autodiff::{Graph, Tensor, Var};
use crate::data::{sample_batches, BatchSizes, MultiViewDataset, UnpairedPool};
use crate::error::{Result, ViganError};
use crate::model::{
    adversarial, fake_x, fake_y, generator_objective, loss_cyclegan, loss_total, BoundVigan,
    LossBreakdown, Net, Refiner, ViganModel,
};
use crate::nn::{AdamState, BoundMlp};

/// Adam over a fixed subset of the five networks.
struct Optimizer {
    nets: Vec<Net>,
    adam: AdamState,
    names: Vec<String>,
}

impl Optimizer {
    fn new(model: &ViganModel, nets: &[Net], cfg: &TrainConfig) -> Self {
        // keep canonical order so params and grads line up
        let nets: Vec<Net> = Net::ALL.into_iter().filter(|n| nets.contains(n)).collect();
        let params: Vec<&Tensor> = nets.iter().flat_map(|&n| model.net(n).params()).collect();
        let names = nets
            .iter()
            .flat_map(|&n| model.net(n).param_names(n.name()))
            .collect();
        Optimizer {
            adam: AdamState::new(cfg.adam, &params),
            nets,
            names,
        }
    }

    fn step(&mut self, model: &mut ViganModel, g: &Graph, bound: &BoundVigan) -> Result<()> {
        let grads: Vec<Tensor> = self
            .nets
            .iter()
            .flat_map(|&n| bound.net(n).grads(g))
            .collect();
        let ViganModel {
            g1,
            g2,
            d_x,
            d_y,
            dae,
            ..
        } = model;
        let mut params = Vec::with_capacity(grads.len());
        for (n, net) in [
            (Net::G1, g1),
            (Net::G2, g2),
            (Net::DX, d_x),
            (Net::DY, d_y),
            (Net::Dae, dae),
        ] {
            if self.nets.contains(&n) {
                params.extend(net.params_mut());
            }
        }
        self.adam.step(&mut params, &grads, &self.names)
    }
}

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

fn report(cfg: &TrainConfig, stage: u8, iter: usize, total: usize, b: &LossBreakdown) {
    if cfg.log_every > 0 && (iter.is_multiple_of(cfg.log_every) || iter + 1 == total) {
        log::info!(
            "stage {stage} iter {iter}/{total}: total={:.5} ae={:.5} cyc={:.5} gan_x={:.5} gan_y={:.5}",
            b.total,
            b.ae,
            b.cyc,
            b.gan_x,
            b.gan_y
        );
    }
}

/// Sum over the three corruptions (x,y), (x,0), (0,y) of the squared
/// reconstruction error of the pair.
pub fn pretrain_loss(g: &mut Graph, dae: &BoundMlp, x: Var, y: Var) -> Result<Var> {
    let (rows, dx) = (g.shape(x)[0], g.shape(x)[1]);
    let dy = g.shape(y)[1];
    let zx = g.constant(Tensor::zeros(vec![rows, dx])?);
    let zy = g.constant(Tensor::zeros(vec![rows, dy])?);
    let target = g.concat(x, y, 1)?;
    let mut total: Option<Var> = None;
    for (a, b) in [(x, y), (x, zy), (zx, y)] {
        let inp = g.concat(a, b, 1)?;
        let out = dae.forward(g, inp)?;
        let l = g.row_sq_dist_mean(out, target)?;
        total = Some(match total {
            None => l,
            Some(t) => g.add(t, l)?,
        });
    }
    Ok(total.expect("three corruptions"))
}

/// Stage-1 loss of a frozen model on a fixed batch.
pub fn pretrain_loss_value(model: &ViganModel, x: &Tensor, y: &Tensor) -> Result<f64> {
    let mut g = Graph::new();
    let dae = model.dae.bind(&mut g, false);
    let (xv, yv) = (g.constant(x.clone()), g.constant(y.clone()));
    let l = pretrain_loss(&mut g, &dae, xv, yv)?;
    Ok(g.value(l).data()[0])
}

/// Fraction of correct real/fake calls by both discriminators, judging raw
/// generator outputs with a 0.5 threshold.
pub fn discriminator_accuracy(model: &ViganModel, x: &Tensor, y: &Tensor) -> Result<f64> {
    let fy = model.g1.infer(x)?;
    let fx = model.g2.infer(y)?;
    let mut correct = 0usize;
    let mut seen = 0usize;
    for (d, real, fake) in [(&model.d_y, y, &fy), (&model.d_x, x, &fx)] {
        let r = d.infer(real)?;
        let f = d.infer(fake)?;
        correct += r.data().iter().filter(|&&p| p > 0.5).count();
        correct += f.data().iter().filter(|&&p| p < 0.5).count();
        seen += r.len() + f.len();
    }
    Ok(correct as f64 / seen as f64)
}

/// Stage 1: DAE pre-training on paired rows. `data` must already be
/// normalized with the model's statistics. Without paired rows the stage
/// is skipped and an empty log returned.
pub fn stage1_pretrain_dae(
    model: &mut ViganModel,
    data: &MultiViewDataset,
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    let iters = cfg.iterations[0];
    let mut log = TrainLog::default();
    if iters == 0 {
        return Ok(log);
    }
    if data.n_paired() == 0 {
        log::warn!("stage 1 skipped: no paired examples, DAE stays at initialization");
        return Ok(log);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.stage_seed(1));
    let mut opt = Optimizer::new(model, &[Net::Dae], cfg);
    let sizes = BatchSizes {
        paired: cfg.batch_paired,
        x: 0,
        y: 0,
    };
    let start = Instant::now();
    for iter in 0..iters {
        let batch = sample_batches(data, &mut rng, sizes, UnpairedPool::All)?;
        let mut g = Graph::new();
        let nets = model.bind(&mut g, &[Net::Dae]);
        let x = g.constant(batch.paired_x.to_tensor()?);
        let y = g.constant(batch.paired_y.to_tensor()?);
        let loss = pretrain_loss(&mut g, &nets.dae, x, y)?;
        let value = g.value(loss).data()[0];
        g.backward(loss)?;
        opt.step(model, &g, &nets)?;
        let b = LossBreakdown {
            ae: value,
            total: value,
            ..Default::default()
        };
        report(cfg, 1, iter, iters, &b);
        log.rows.push(LogRow::new(1, iter, &b, elapsed_ms(start)));
    }
    Ok(log)
}

/// Discriminator ascent on the adversarial terms only; fakes come from
/// frozen generators (and the frozen DAE when `refiner` asks for it).
fn discriminator_step(
    model: &mut ViganModel,
    opt: &mut Optimizer,
    x: &Tensor,
    y: &Tensor,
    refiner: Refiner,
) -> Result<()> {
    let mut g = Graph::new();
    let nets = model.bind(&mut g, &[Net::DX, Net::DY]);
    let (xv, yv) = (g.constant(x.clone()), g.constant(y.clone()));
    let fy = fake_y(&mut g, &nets, xv, refiner)?;
    let (gan_y, _) = adversarial(&mut g, &nets.d_y, yv, fy)?;
    let fx = fake_x(&mut g, &nets, yv, refiner)?;
    let (gan_x, _) = adversarial(&mut g, &nets.d_x, xv, fx)?;
    let s = g.add(gan_x, gan_y)?;
    let objective = g.neg(s);
    g.backward(objective)?;
    opt.step(model, &g, &nets)
}

/// Stage 2: CycleGAN on unpaired batches drawn from every x and every y.
/// The DAE is not touched.
pub fn stage2_train_cyclegan(
    model: &mut ViganModel,
    data: &MultiViewDataset,
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    let iters = cfg.iterations[1];
    let mut log = TrainLog::default();
    if iters == 0 {
        return Ok(log);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.stage_seed(2));
    let mut d_opt = Optimizer::new(model, &[Net::DX, Net::DY], cfg);
    let mut g_opt = Optimizer::new(model, &[Net::G1, Net::G2], cfg);
    let sizes = BatchSizes {
        paired: 0,
        x: cfg.batch_unpaired,
        y: cfg.batch_unpaired,
    };
    let start = Instant::now();
    for iter in 0..iters {
        let batch = sample_batches(data, &mut rng, sizes, UnpairedPool::All)?;
        let x = batch.x.to_tensor()?;
        let y = batch.y.to_tensor()?;
        discriminator_step(model, &mut d_opt, &x, &y, Refiner::Identity)?;

        let mut g = Graph::new();
        let nets = model.bind(&mut g, &[Net::G1, Net::G2]);
        let (xv, yv) = (g.constant(x), g.constant(y));
        let vars = loss_cyclegan(&mut g, &nets, cfg.weights.lambda_cyc, xv, yv)?;
        let gen_weights = crate::model::LossWeights {
            lambda_ae: 0.0,
            lambda_cyc: cfg.weights.lambda_cyc,
        };
        let objective = generator_objective(&mut g, &vars, &gen_weights, cfg.generator_loss)?;
        let b = vars.breakdown(&g);
        g.backward(objective)?;
        g_opt.step(model, &g, &nets)?;
        report(cfg, 2, iter, iters, &b);
        log.rows.push(LogRow::new(2, iter, &b, elapsed_ms(start)));
    }
    Ok(log)
}

/// Stage 3: alternating discriminator ascent and joint G1/G2/DAE descent
/// on the full objective.
pub fn stage3_joint(
    model: &mut ViganModel,
    data: &MultiViewDataset,
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    let iters = cfg.iterations[2];
    let mut log = TrainLog::default();
    if iters == 0 {
        return Ok(log);
    }
    let pool = cfg.stage3_pool();
    if pool == UnpairedPool::PairedOnly && data.n_paired() == 0 {
        return Err(ViganError::Empty("paired pool for stage 3"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.stage_seed(3));
    let mut d_opt = Optimizer::new(model, &[Net::DX, Net::DY], cfg);
    let mut g_opt = Optimizer::new(model, &[Net::G1, Net::G2, Net::Dae], cfg);
    let sizes = BatchSizes {
        paired: if data.n_paired() > 0 {
            cfg.batch_paired
        } else {
            0
        },
        x: cfg.batch_unpaired,
        y: cfg.batch_unpaired,
    };
    let start = Instant::now();
    for iter in 0..iters {
        let batch = sample_batches(data, &mut rng, sizes, pool)?;
        let x = batch.x.to_tensor()?;
        let y = batch.y.to_tensor()?;
        discriminator_step(model, &mut d_opt, &x, &y, Refiner::Dae)?;

        let mut g = Graph::new();
        let nets = model.bind(&mut g, &[Net::G1, Net::G2, Net::Dae]);
        let paired = if batch.paired_x.is_empty() {
            None
        } else {
            Some((
                g.constant(batch.paired_x.to_tensor()?),
                g.constant(batch.paired_y.to_tensor()?),
            ))
        };
        let (xv, yv) = (g.constant(x), g.constant(y));
        let vars = loss_total(&mut g, &nets, &cfg.weights, paired, xv, yv)?;
        let objective = generator_objective(&mut g, &vars, &cfg.weights, cfg.generator_loss)?;
        let b = vars.breakdown(&g);
        g.backward(objective)?;
        g_opt.step(model, &g, &nets)?;
        report(cfg, 3, iter, iters, &b);
        log.rows.push(LogRow::new(3, iter, &b, elapsed_ms(start)));
    }
    Ok(log)
}

/// Result of [`run_schedule_with_snapshots`].
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub model: ViganModel,
    pub log: TrainLog,
    /// Model state right after each executed stage.
    pub snapshots: Vec<(u8, ViganModel)>,
}

impl TrainRun {
    pub fn snapshot(&self, stage: u8) -> Option<&ViganModel> {
        self.snapshots
            .iter()
            .find(|(s, _)| *s == stage)
            .map(|(_, m)| m)
    }
}

/// Runs the enabled stages in order on raw-unit `data`, normalizing it
/// with the model's statistics first.
pub fn run_schedule(
    model: ViganModel,
    data: &MultiViewDataset,
    cfg: &TrainConfig,
) -> Result<(ViganModel, TrainLog)> {
    let run = run_schedule_inner(model, data, cfg, false)?;
    Ok((run.model, run.log))
}

pub fn run_schedule_with_snapshots(
    model: ViganModel,
    data: &MultiViewDataset,
    cfg: &TrainConfig,
) -> Result<TrainRun> {
    run_schedule_inner(model, data, cfg, true)
}

fn run_schedule_inner(
    mut model: ViganModel,
    data: &MultiViewDataset,
    cfg: &TrainConfig,
    keep_snapshots: bool,
) -> Result<TrainRun> {
    cfg.validate()?;
    if data.dim_x() != model.dim_x() || data.dim_y() != model.dim_y() {
        return Err(ViganError::shape(
            "dataset vs model",
            &[data.dim_x(), data.dim_y()],
            &[model.dim_x(), model.dim_y()],
        ));
    }
    let normalized = data.normalized(&model.stats)?;
    model.hyperparameters = serde_json::to_string(cfg)?;
    model.trained = true;
    let mut log = TrainLog::default();
    let mut snapshots = Vec::new();
    type Stage = fn(&mut ViganModel, &MultiViewDataset, &TrainConfig) -> Result<TrainLog>;
    let stages: [(u8, Stage); 3] = [
        (1, stage1_pretrain_dae),
        (2, stage2_train_cyclegan),
        (3, stage3_joint),
    ];
    for (id, run) in stages {
        if !cfg.stage_enabled(id) {
            continue;
        }
        log.extend(run(&mut model, &normalized, cfg)?);
        if keep_snapshots {
            snapshots.push((id, model.clone()));
        }
    }
    Ok(TrainRun {
        model,
        log,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, SyntheticKind, SyntheticSpec};
    use crate::model::Architecture;

    fn data(paired: usize, x_only: usize, y_only: usize) -> MultiViewDataset {
        let spec = SyntheticSpec {
            kind: SyntheticKind::Rotation,
            dim_x: 3,
            dim_y: 3,
            noise: 0.05,
            paired,
            x_only,
            y_only,
            seed: 3,
        };
        generate(&spec).unwrap().dataset
    }

    fn cfg(iters: [usize; 3]) -> TrainConfig {
        TrainConfig {
            iterations: iters,
            batch_paired: 16,
            batch_unpaired: 16,
            seed: 5,
            log_every: 0,
            ..Default::default()
        }
    }

    fn setup(ds: &MultiViewDataset) -> (ViganModel, MultiViewDataset) {
        let m = ViganModel::for_dataset(ds, &Architecture::uniform(8), 1).unwrap();
        let n = ds.normalized(&m.stats).unwrap();
        (m, n)
    }

    fn probe(ds: &MultiViewDataset) -> (Tensor, Tensor) {
        let idx: Vec<usize> = (0..32).collect();
        (
            ds.paired_x.select(&idx).to_tensor().unwrap(),
            ds.paired_y.select(&idx).to_tensor().unwrap(),
        )
    }

    fn changed(a: &ViganModel, b: &ViganModel) -> Vec<Net> {
        Net::ALL
            .into_iter()
            .filter(|&n| a.net(n) != b.net(n))
            .collect()
    }

    #[test]
    fn stage1_updates_only_the_dae_and_lowers_its_loss() {
        let raw = data(200, 0, 0);
        let (mut m, ds) = setup(&raw);
        let before = m.clone();
        let (px, py) = probe(&ds);
        let l0 = pretrain_loss_value(&m, &px, &py).unwrap();
        let log = stage1_pretrain_dae(
            &mut m,
            &ds,
            &TrainConfig {
                adam: crate::nn::AdamConfig {
                    learning_rate: 1e-2,
                    ..Default::default()
                },
                ..cfg([300, 0, 0])
            },
        )
        .unwrap();
        assert_eq!(log.len(), 300);
        assert_eq!(changed(&before, &m), vec![Net::Dae]);
        let l1 = pretrain_loss_value(&m, &px, &py).unwrap();
        assert!(l1 < l0, "{l1} !< {l0}");
    }

    #[test]
    fn zero_iterations_leave_model_bit_identical() {
        let raw = data(20, 5, 5);
        let (m, _) = setup(&raw);
        let (out, log) = run_schedule(m.clone(), &raw, &cfg([0, 0, 0])).unwrap();
        assert!(log.is_empty());
        assert!(changed(&m, &out).is_empty());
    }

    #[test]
    fn stage1_without_pairs_is_skipped() {
        let raw = data(0, 10, 10);
        let (mut m, ds) = setup(&raw);
        let before = m.clone();
        let log = stage1_pretrain_dae(&mut m, &ds, &cfg([10, 0, 0])).unwrap();
        assert!(log.is_empty());
        assert_eq!(m, before);
    }

    #[test]
    fn stage2_trains_gans_and_leaves_dae_alone() {
        let raw = data(100, 100, 100);
        let (mut m, ds) = setup(&raw);
        let before = m.clone();
        let (px, py) = probe(&ds);
        let cyc0 = m.loss_cyc(&px, &py).unwrap();
        let c = TrainConfig {
            adam: crate::nn::AdamConfig {
                learning_rate: 2e-3,
                ..Default::default()
            },
            ..cfg([0, 300, 0])
        };
        let log = stage2_train_cyclegan(&mut m, &ds, &c).unwrap();
        assert_eq!(log.len(), 300);
        assert!(log.rows.iter().all(|r| r.stage == 2 && r.loss_ae == 0.0));
        let mut moved = changed(&before, &m);
        moved.sort_by_key(|n| n.name());
        assert_eq!(moved, vec![Net::DX, Net::DY, Net::G1, Net::G2]);
        assert!(m.loss_cyc(&px, &py).unwrap() < cyc0);
        assert!(discriminator_accuracy(&m, &px, &py).unwrap() > 0.5);
    }

    #[test]
    fn stage3_updates_everything_and_logs_every_iteration() {
        let raw = data(50, 50, 50);
        let (mut m, ds) = setup(&raw);
        let before = m.clone();
        let log = stage3_joint(&mut m, &ds, &cfg([0, 0, 20])).unwrap();
        assert_eq!(log.len(), 20);
        assert!(log
            .rows
            .iter()
            .enumerate()
            .all(|(i, r)| r.iter == i && r.loss_ae > 0.0));
        assert_eq!(changed(&before, &m).len(), 5);
    }

    #[test]
    fn stage3_without_pairs_logs_zero_reconstruction() {
        let raw = data(0, 60, 60);
        let (mut m, ds) = setup(&raw);
        let log = stage3_joint(&mut m, &ds, &cfg([0, 0, 25])).unwrap();
        assert_eq!(log.len(), 25);
        assert!(log.rows.iter().all(|r| r.loss_ae == 0.0));
        let paired_only = TrainConfig {
            stage3_paired_only: true,
            ..cfg([0, 0, 5])
        };
        assert!(stage3_joint(&mut m, &ds, &paired_only).is_err());
    }

    #[test]
    fn stage1_alone_matches_schedule_with_only_stage1() {
        let raw = data(40, 10, 10);
        let (m, ds) = setup(&raw);
        let c = TrainConfig {
            stages: vec![1],
            ..cfg([15, 15, 15])
        };
        let (scheduled, log_a) = run_schedule(m.clone(), &raw, &c).unwrap();
        let mut direct = m.clone();
        let log_b = stage1_pretrain_dae(&mut direct, &ds, &c).unwrap();
        assert!(log_a.same_values(&log_b));
        assert_eq!(scheduled.dae, direct.dae);
    }

    #[test]
    fn disabling_stage3_keeps_stage1_dae() {
        let raw = data(40, 10, 10);
        let (m, _) = setup(&raw);
        let c = TrainConfig {
            stages: vec![1, 2],
            ..cfg([10, 10, 10])
        };
        let run = run_schedule_with_snapshots(m, &raw, &c).unwrap();
        assert_eq!(run.snapshot(1).unwrap().dae, run.model.dae);
        assert!(run.snapshot(3).is_none());
    }

    #[test]
    fn same_seed_same_log() {
        let raw = data(30, 30, 30);
        let (m, _) = setup(&raw);
        let c = cfg([5, 5, 5]);
        let (ma, la) = run_schedule(m.clone(), &raw, &c).unwrap();
        let (mb, lb) = run_schedule(m, &raw, &c).unwrap();
        assert!(la.same_values(&lb));
        assert_eq!(ma, mb);
        assert_eq!(la.len(), 15);
        assert!(la
            .rows
            .windows(2)
            .all(|w| (w[0].stage, w[0].iter) < (w[1].stage, w[1].iter)));
    }

    #[test]
    fn nonsaturating_form_trains() {
        let raw = data(30, 30, 30);
        let (m, _) = setup(&raw);
        let c = TrainConfig {
            generator_loss: crate::model::GeneratorLoss::NonSaturating,
            ..cfg([0, 5, 5])
        };
        let (out, log) = run_schedule(m.clone(), &raw, &c).unwrap();
        assert_eq!(log.len(), 10);
        assert_ne!(out.g1, m.g1);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let raw = data(10, 0, 0);
        let m = ViganModel::new(2, 3, &Architecture::uniform(4), 0).unwrap();
        assert!(run_schedule(m, &raw, &cfg([1, 1, 1])).is_err());
    }
}
