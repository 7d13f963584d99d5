//! Dense `f64` tensors, reverse-mode autodiff, LSTM cells, optimizers,
//! gradient checking and the checkpoint container.

mod checkpoint;
mod gradcheck;
mod graph;
mod lstm;
mod optim;
mod params;
mod tensor;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint,
    FORMAT_VERSION,
};
pub use gradcheck::{check_gradients, rel_error, GradCheckReport, REL_ERR_FLOOR};
pub use graph::{log_softmax, sigmoid, softmax, Adjoints, Graph, Var};
pub use lstm::{lstm_step, run_bilstm, run_lstm, Lstm, LstmVars};
pub use optim::{adam_step, clip_global_norm, sgd_step, AdamConfig, AdamState};
pub use params::{init_uniform, ParamId, ParamStore, Parameter};
pub use tensor::Tensor;

/// Seeded generator used for every random draw in the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
