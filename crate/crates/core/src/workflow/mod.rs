//! Staged training: adaptation on the synthetic set, fine-tuning on the
//! guidance set, inference, plus the optimizer and checkpoint plumbing.

mod checkpoint;
mod optim;
mod plan;
mod run;
mod train;

pub use checkpoint::{Checkpoint, StageTag};
pub use optim::{global_norm, Adam};
pub use plan::{AdaptationPlan, TaskMode};
pub use run::{read_losses, sha256_hex, write_losses, RunDir, RunRecord};
pub use train::{
    guidance_count, run_adaptation, run_finetune, run_inference, select_guidance, FinetuneStart,
    LossRecord, TrainOutput, ADAPTED_ENCODERS,
};
