//! The three-stage training schedule.

mod config;
mod log;
mod stages;

pub use config::TrainConfig;
pub use log::{LogRow, TrainLog};
pub use stages::{
    discriminator_accuracy, pretrain_loss, pretrain_loss_value, run_schedule,
    run_schedule_with_snapshots, stage1_pretrain_dae, stage2_train_cyclegan, stage3_joint,
    TrainRun,
};
