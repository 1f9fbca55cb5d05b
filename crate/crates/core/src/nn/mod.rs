//! Dense tensors, sequential networks with residual spans, losses, Adam and
//! gradient checking. Matrix products go through `matrixmultiply`; everything
//! else, including back-propagation, is implemented here.

pub mod checkpoint;
pub mod gradcheck;
pub mod layer;
pub mod loss;
pub mod mlp;
pub mod optim;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use layer::{parameter_count, LayerKind, LayerSpec};
pub use loss::{cross_entropy_loss, mse_loss, softmax_rows, Loss};
pub use mlp::{Mlp, Mode};
pub use optim::{Adam, TrainSchedule};
pub use tensor::{Scalar, Tensor};
