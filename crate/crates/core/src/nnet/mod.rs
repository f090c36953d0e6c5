//! Small differentiable-network engine: temporal affine layers, batch
//! norm, pooling, losses, Adam and early-stopped training.

mod gradcheck;
mod layer;
mod loss;
mod network;
mod optim;
mod train;

pub use gradcheck::{check_gradients, micro_nets, GradCheck, MicroNet, REL_ERR_FLOOR};
pub use layer::{Init, Layer, LayerSpec};
pub use loss::{Loss, Targets};
pub use network::{Checkpoint, InputShape, Mode, Network, Snapshot};
pub use optim::{Adam, AdamConfig};
pub use train::{
    evaluate_loss, predict_dataset, train, validation_split, Dataset, EpochStats, SequenceDataset, TensorDataset,
    TrainConfig, TrainReport,
};
