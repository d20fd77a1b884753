use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};
use vigan::data::{
    generate, load_dir, read_view_csv, view_to_csv, write_synthetic_dir, Direction, LoadedData,
    SyntheticKind, SyntheticSpec, ViewInfo,
};
use vigan::fsutil::atomic_write;
use vigan::metrics::{
    evaluate_both, EvalReport, Imputer, MeanImputer, ModelImputer, SoftImputeConfig,
    SoftImputeImputer,
};
use vigan::model::{
    toy_gradient_check_with, Architecture, GeneratorLoss, ImputeMode, ViganModel, TOY_STEP,
};
use vigan::train::{run_schedule, TrainConfig};

use crate::settings::{
    config_path_for, load, prepare_dir, prepare_file, required, usage, write_resolved, Failure,
};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    Full,
    GeneratorOnly,
    DaeOnly,
}

impl From<Mode> for ImputeMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Full => ImputeMode::Full,
            Mode::GeneratorOnly => ImputeMode::GeneratorOnly,
            Mode::DaeOnly => ImputeMode::DaeOnly,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GenLoss {
    Literal,
    NonSaturating,
}

impl From<GenLoss> for GeneratorLoss {
    fn from(g: GenLoss) -> Self {
        match g {
            GenLoss::Literal => GeneratorLoss::Literal,
            GenLoss::NonSaturating => GeneratorLoss::NonSaturating,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mean,
    Softimpute,
}

fn all_binary(info: &ViewInfo) -> bool {
    info.binary.iter().all(|&b| b)
}

fn load_data(dir: &Path) -> Result<LoadedData> {
    load_dir(dir).with_context(|| format!("loading dataset {}", dir.display()))
}

// ---------------------------------------------------------------- gen-data

#[derive(Args, Debug)]
pub struct GenDataArgs {
    /// JSON settings file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kind: Option<SyntheticKind>,
    #[arg(long)]
    dim_x: Option<usize>,
    #[arg(long)]
    dim_y: Option<usize>,
    /// Number of complete (x, y) rows.
    #[arg(long)]
    paired: Option<usize>,
    #[arg(long)]
    x_only: Option<usize>,
    #[arg(long)]
    y_only: Option<usize>,
    /// Noise standard deviation.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite an existing output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSettings {
    out: Option<PathBuf>,
    spec: SyntheticSpec,
}

pub fn gen_data(a: GenDataArgs) -> Result<()> {
    let mut s: GenSettings = load(a.config.as_deref())?;
    let spec = &mut s.spec;
    spec.kind = a.kind.unwrap_or(spec.kind);
    spec.dim_x = a.dim_x.unwrap_or(spec.dim_x);
    spec.dim_y = a.dim_y.unwrap_or(spec.dim_y);
    spec.paired = a.paired.unwrap_or(spec.paired);
    spec.x_only = a.x_only.unwrap_or(spec.x_only);
    spec.y_only = a.y_only.unwrap_or(spec.y_only);
    spec.noise = a.noise.unwrap_or(spec.noise);
    spec.seed = a.seed.unwrap_or(spec.seed);
    s.out = a.out.or(s.out);
    let out = required(s.out.clone(), "out")?;
    s.spec.validate()?;

    prepare_dir(&out, a.force)?;
    let data = generate(&s.spec)?;
    write_synthetic_dir(&out, &s.spec, &data)?;
    write_resolved(&config_path_for(&out, true), &s)?;
    info!(
        "wrote {} rows ({} paired, {} x-only, {} y-only) to {}",
        s.spec.total_rows(),
        s.spec.paired,
        s.spec.x_only,
        s.spec.y_only,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- train

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// JSON settings file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training log CSV [default: model path with extension `log.csv`].
    #[arg(long)]
    log: Option<PathBuf>,
    /// Stages to run, e.g. `1,2,3` or `2`.
    #[arg(long, value_delimiter = ',')]
    stages: Option<Vec<u8>>,
    /// Iterations for stages 1, 2 and 3.
    #[arg(long, value_delimiter = ',')]
    iters: Option<Vec<usize>>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    batch_paired: Option<usize>,
    #[arg(long)]
    batch_unpaired: Option<usize>,
    #[arg(long)]
    lambda_ae: Option<f64>,
    #[arg(long)]
    lambda_cyc: Option<f64>,
    #[arg(long, value_enum)]
    generator_loss: Option<GenLoss>,
    /// Draw stage-3 adversarial and cycle batches from paired rows only.
    #[arg(long)]
    stage3_paired_only: bool,
    /// Hidden widths of both generators, e.g. `64,64`.
    #[arg(long, value_delimiter = ',')]
    generator_hidden: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    discriminator_hidden: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    dae_hidden: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Progress message every this many iterations (0 for none).
    #[arg(long)]
    log_every: Option<usize>,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    data: Option<PathBuf>,
    out: Option<PathBuf>,
    log: Option<PathBuf>,
    train: TrainConfig,
    architecture: Architecture,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut s: TrainSettings = load(a.config.as_deref())?;
    s.data = a.data.or(s.data);
    s.out = a.out.or(s.out);
    s.log = a.log.or(s.log);
    let t = &mut s.train;
    if let Some(stages) = a.stages {
        t.stages = stages;
    }
    if let Some(iters) = a.iters {
        t.iterations = iters
            .try_into()
            .map_err(|v: Vec<usize>| usage(format!("--iters needs 3 counts, got {}", v.len())))?;
    }
    t.adam.learning_rate = a.lr.unwrap_or(t.adam.learning_rate);
    t.adam.beta1 = a.beta1.unwrap_or(t.adam.beta1);
    t.adam.beta2 = a.beta2.unwrap_or(t.adam.beta2);
    t.batch_paired = a.batch_paired.unwrap_or(t.batch_paired);
    t.batch_unpaired = a.batch_unpaired.unwrap_or(t.batch_unpaired);
    t.weights.lambda_ae = a.lambda_ae.unwrap_or(t.weights.lambda_ae);
    t.weights.lambda_cyc = a.lambda_cyc.unwrap_or(t.weights.lambda_cyc);
    if let Some(g) = a.generator_loss {
        t.generator_loss = g.into();
    }
    t.stage3_paired_only |= a.stage3_paired_only;
    t.seed = a.seed.unwrap_or(t.seed);
    t.log_every = a.log_every.unwrap_or(t.log_every);
    let arch = &mut s.architecture;
    arch.generator_hidden = a.generator_hidden.unwrap_or(arch.generator_hidden.clone());
    arch.discriminator_hidden = a
        .discriminator_hidden
        .unwrap_or(arch.discriminator_hidden.clone());
    arch.dae_hidden = a.dae_hidden.unwrap_or(arch.dae_hidden.clone());

    let data_dir = required(s.data.clone(), "data")?;
    let out = required(s.out.clone(), "out")?;
    let log_path = s
        .log
        .clone()
        .unwrap_or_else(|| out.with_extension("log.csv"));
    s.log = Some(log_path.clone());
    s.train.validate()?;

    prepare_file(&out, a.force)?;
    prepare_file(&log_path, a.force)?;
    let loaded = load_data(&data_dir)?;
    let model = ViganModel::for_dataset(&loaded.train, &s.architecture, s.train.seed)?;
    info!(
        "training on {} paired, {} x-only, {} y-only rows; {} parameters",
        loaded.train.n_paired(),
        loaded.train.x_only.len(),
        loaded.train.y_only.len(),
        model.param_count()
    );
    let start = Instant::now();
    let (model, log) = run_schedule(model, &loaded.train, &s.train)?;
    model.save(&out)?;
    log.write_csv(&log_path)?;
    write_resolved(&config_path_for(&out, false), &s)?;
    info!(
        "trained in {:.1}s; model {}, log {}",
        start.elapsed().as_secs_f64(),
        out.display(),
        log_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- impute

#[derive(Args, Debug)]
pub struct ImputeArgs {
    /// JSON settings file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// `x2y` imputes view 2 from view 1, `y2x` the reverse.
    #[arg(long)]
    direction: Option<Direction>,
    /// CSV with a header row and the present view's columns.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Which path of the model produces the estimate.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputeSettings {
    model: Option<PathBuf>,
    direction: Option<Direction>,
    input: Option<PathBuf>,
    out: Option<PathBuf>,
    mode: ImputeMode,
}

impl Default for ImputeSettings {
    fn default() -> Self {
        ImputeSettings {
            model: None,
            direction: None,
            input: None,
            out: None,
            mode: ImputeMode::Full,
        }
    }
}

pub fn impute(a: ImputeArgs) -> Result<()> {
    let mut s: ImputeSettings = load(a.config.as_deref())?;
    s.model = a.model.or(s.model);
    s.direction = a.direction.or(s.direction);
    s.input = a.input.or(s.input);
    s.out = a.out.or(s.out);
    if let Some(m) = a.mode {
        s.mode = m.into();
    }
    let model_path = required(s.model.clone(), "model")?;
    let dir = required(s.direction, "direction")?;
    let input = required(s.input.clone(), "input")?;
    let out = required(s.out.clone(), "out")?;

    prepare_file(&out, a.force)?;
    let model = ViganModel::load(&model_path)
        .with_context(|| format!("loading model {}", model_path.display()))?;
    let (present, missing, prefix) = match dir {
        Direction::XToY => (model.dim_x(), model.dim_y(), "y"),
        Direction::YToX => (model.dim_y(), model.dim_x(), "x"),
    };
    let (_, rows) =
        read_view_csv(&input, present).with_context(|| format!("reading {}", input.display()))?;
    let imputed = model.impute_with(&rows, dir, s.mode)?;
    let header = ViewInfo::numeric(prefix, missing).names;
    atomic_write(&out, &view_to_csv(&header, &imputed)?)?;
    write_resolved(&config_path_for(&out, false), &s)?;
    info!("imputed {} rows into {}", imputed.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------- evaluate

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// JSON settings file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Dataset directory; its test split, or else its ground truth, is scored.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Report CSV to write.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Method name in the report [default: vigan, gan-only or dae-only by mode].
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSettings {
    model: Option<PathBuf>,
    data: Option<PathBuf>,
    out: Option<PathBuf>,
    mode: ImputeMode,
    label: Option<String>,
}

impl Default for EvaluateSettings {
    fn default() -> Self {
        EvaluateSettings {
            model: None,
            data: None,
            out: None,
            mode: ImputeMode::Full,
            label: None,
        }
    }
}

fn print_report(report: &EvalReport) {
    for r in &report.rows {
        println!(
            "{:<12} {:<7} {:<9} {:>10.4}  n={}",
            r.method, r.direction, r.metric, r.value, r.n
        );
    }
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let mut s: EvaluateSettings = load(a.config.as_deref())?;
    s.model = a.model.or(s.model);
    s.data = a.data.or(s.data);
    s.out = a.out.or(s.out);
    if let Some(m) = a.mode {
        s.mode = m.into();
    }
    s.label = a.label.or(s.label);
    let model_path = required(s.model.clone(), "model")?;
    let data_dir = required(s.data.clone(), "data")?;
    let out = required(s.out.clone(), "out")?;

    prepare_file(&out, a.force)?;
    let model = ViganModel::load(&model_path)
        .with_context(|| format!("loading model {}", model_path.display()))?;
    let loaded = load_data(&data_dir)?;
    let eval = loaded.eval_set()?;
    let mut imputer = ModelImputer::new(&model, s.mode);
    if let Some(label) = &s.label {
        imputer = imputer.with_label(label.clone());
    }
    let ds = &loaded.train;
    let report = evaluate_both(
        &imputer,
        &eval,
        all_binary(&ds.x_info),
        all_binary(&ds.y_info),
    )?;
    report.write_csv(&out)?;
    write_resolved(&config_path_for(&out, false), &s)?;
    print_report(&report);
    Ok(())
}

// ---------------------------------------------------------------- baseline

#[derive(Args, Debug)]
pub struct BaselineArgs {
    /// JSON settings file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Dataset directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Report CSV to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Soft-impute rank (excluding the intercept).
    #[arg(long)]
    rank: Option<usize>,
    /// Soft-impute singular value shrinkage.
    #[arg(long)]
    shrinkage: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSettings {
    method: Option<Method>,
    data: Option<PathBuf>,
    out: Option<PathBuf>,
    softimpute: SoftImputeConfig,
}

pub fn baseline(a: BaselineArgs) -> Result<()> {
    let mut s: BaselineSettings = load(a.config.as_deref())?;
    s.method = a.method.or(s.method);
    s.data = a.data.or(s.data);
    s.out = a.out.or(s.out);
    let c = &mut s.softimpute;
    c.rank = a.rank.unwrap_or(c.rank);
    c.shrinkage = a.shrinkage.unwrap_or(c.shrinkage);
    c.max_iters = a.max_iters.unwrap_or(c.max_iters);
    c.tol = a.tol.unwrap_or(c.tol);
    c.seed = a.seed.unwrap_or(c.seed);
    let method = required(s.method, "method")?;
    let data_dir = required(s.data.clone(), "data")?;
    let out = required(s.out.clone(), "out")?;

    prepare_file(&out, a.force)?;
    let loaded = load_data(&data_dir)?;
    let eval = loaded.eval_set()?;
    let ds = &loaded.train;
    let imputer: Box<dyn Imputer> = match method {
        Method::Mean => Box::new(MeanImputer::fit(ds)),
        Method::Softimpute => Box::new(SoftImputeImputer::new(ds, &ds.fit_stats()?, s.softimpute)?),
    };
    let report = evaluate_both(
        imputer.as_ref(),
        &eval,
        all_binary(&ds.x_info),
        all_binary(&ds.y_info),
    )?;
    report.write_csv(&out)?;
    write_resolved(&config_path_for(&out, false), &s)?;
    print_report(&report);
    Ok(())
}

// ---------------------------------------------------------------- gradcheck

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Check this seed only.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Check seeds `0..seeds`.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Finite-difference step.
    #[arg(long, default_value_t = TOY_STEP)]
    step: f64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = vigan::autodiff::DEFAULT_TOLERANCE)]
    tolerance: f64,
}

pub fn gradcheck(a: GradcheckArgs) -> Result<()> {
    let seeds: Vec<u64> = match a.seed {
        Some(s) => vec![s],
        None => (0..a.seeds).collect(),
    };
    if seeds.is_empty() {
        return Err(usage("--seeds must be at least 1"));
    }
    if !(1e-7..=1e-3).contains(&a.step) {
        return Err(usage(format!("--step {} outside [1e-7, 1e-3]", a.step)));
    }
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    for &seed in &seeds {
        let report = toy_gradient_check_with(seed, a.step)?;
        let err = report.max_rel_err();
        worst = worst.max(err);
        if err >= a.tolerance {
            failed.push(seed);
            for p in report
                .params
                .iter()
                .filter(|p| p.max_rel_err >= a.tolerance)
            {
                println!(
                    "seed {seed}: {} max_rel_err={:.3e} (analytic {:.6e}, numeric {:.6e})",
                    p.name, p.max_rel_err, p.analytic, p.numeric
                );
            }
        }
    }
    let verdict = if failed.is_empty() { "PASS" } else { "FAIL" };
    let cmp = if failed.is_empty() { "<" } else { ">=" };
    println!("{verdict} max_rel_err={worst:.3e} {cmp} {:e}", a.tolerance);
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("gradient check failed for seeds {failed:?}")).into())
    }
}
