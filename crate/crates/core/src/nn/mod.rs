//! A small convolutional network: layers, training and checkpoints.

mod checkpoint;
mod init;
pub mod layers;
mod model;
mod optim;
mod tensor;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use init::{fans, gaussian_init, xavier_init, WeightInit};
pub use model::{argmax, reference_layers, BatchOutcome, CnnModel, Gradients, LayerSpec, Params, REFERENCE_INPUT};
pub use optim::{nesterov_update, OptimizerConfig, OptimizerState};
pub use tensor::Tensor;
pub use train::{predict, prepare_input, train, EpochStats, TrainConfig, TrainTrace};
