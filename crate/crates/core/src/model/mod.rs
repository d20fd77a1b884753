//! The five networks, their losses, imputation and the model file format.

mod check;
pub mod io;
pub mod losses;
mod vigan;

pub use check::{
    toy_gradient_check, toy_gradient_check_with, TOY_DIM_X, TOY_DIM_Y, TOY_HIDDEN, TOY_KINK_STEPS,
    TOY_STEP,
};
pub use losses::{
    adversarial, discriminator_objective, fake_x, fake_y, generator_objective, loss_ae,
    loss_aegan_x, loss_aegan_y, loss_cyc, loss_cyclegan, loss_total, objective, project_x,
    project_y, GeneratorLoss, LossBreakdown, LossVars, Refiner,
};
pub use vigan::{
    threshold_binary, Architecture, BoundVigan, ImputeMode, LossWeights, Net, ViganModel,
};
