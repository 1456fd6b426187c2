//! Minimal deterministic network engine: rank-4 tensors, the layer set the
//! classifiers need (periodic padding, plain and quaternion convolutions,
//! depth mixing, activations, dropout), softmax cross-entropy with
//! reverse-mode gradients, and a seeded training loop.

pub mod checkpoint;
pub mod layer;
pub mod network;
pub mod tensor;
pub mod train;

pub use layer::{ActKind, Layer, Mode};
pub use network::{
    class_chern, class_index, encode_quaternion, encode_vector, encoder_for, evaluate, Arch,
    Gradients, NetConfig, Network, NUM_CLASSES,
};
pub use tensor::{Shape, Tensor};
pub use train::{train, write_curves_csv, Adam, EpochRecord};
