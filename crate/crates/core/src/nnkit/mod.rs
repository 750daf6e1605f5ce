//! Minimal dense-network toolkit: layers, activations, losses, reverse-mode
//! gradients, optimizers, seeded initialization and the checkpoint container.

pub mod activation;
pub mod checkpoint;
pub mod gradcheck;
pub mod layer;
pub mod loss;
pub mod network;
pub mod optim;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use activation::{activation_apply, Activation};
pub use checkpoint::Checkpoint;
pub use gradcheck::finite_difference_check;
pub use layer::{argmax, dense_forward, glorot_limit, init_params, DenseLayer, Mlp};
pub use loss::{huber, mse};
pub use network::Network;
pub use optim::{adam_step, rmsprop_step, Optimizer, OptimizerKind};
pub use rng::Rng;
pub use tape::{Tape, Var};
pub use tensor::{GradientStore, ParamTensor};
