//! Loss, learning-rate schedule, optimizer and the epoch loop.

mod adam;
mod history;
mod loss;
mod schedule;
mod trainer;

pub use adam::{Adam, AdamConfig, StepStats};
pub use history::{
    best_epoch, select_best_checkpoint, CheckpointRef, CheckpointStore, DirCheckpoints, EpochRecord,
    MemoryCheckpoints, MetricsLog, ValidationHistory, METRICS_LOG_COLUMNS,
};
pub use loss::{silog_grad, silog_loss, silog_loss_tensor, SILOG_TENSOR_EPS};
pub use schedule::lr_at_step;
pub use trainer::{
    batch_loss, make_batch, train, validate, Batch, TrainConfig, TrainMode, TrainingFrame, ValidationFrame,
};
