//! Training objectives: contrastive loss, the three robustness terms,
//! teacher distillation MSE, analytic gradients and a finite-difference checker.

mod gradcheck;
mod objective;
mod terms;

pub use gradcheck::{
    compare_gradients, finite_diff_check, gradcheck_sample, relative_error, GradCheckReport,
    KINK_MARGIN,
};
pub use objective::{grad_total, loss_total, LossBreakdown, TripletBatch};
pub use terms::{
    loss_clip, loss_distill_mse, loss_distill_mse_batch, loss_l1, loss_l2, loss_l3, LossWeights,
};
