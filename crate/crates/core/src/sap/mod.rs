//! Self-alignment pretraining: class-balanced batches, hard-triplet mining,
//! the Multi-Similarity loss and the SGD loop that ties them to the encoder.

mod loss;
mod mining;
mod sampler;
mod trainer;

pub use loss::{ms_loss, ms_loss_and_grad, ms_loss_grad, MsParams, NonFiniteLoss};
pub use mining::{collect_pairs, mine_triplets, similarity_matrix, PairSets, SimilarityMatrix, Triplet};
pub use sampler::{sample_batch, LabelGroups, MiniBatch};
pub use trainer::{
    loss_and_grad_with_pairs, loss_with_pairs, step_gradient, steps_per_epoch, trace_to_csv, train,
    train_sequential, StepGrad, StepRecord, TrainOutcome,
};
