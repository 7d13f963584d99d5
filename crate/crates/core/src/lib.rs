pub mod cli;
pub mod compression;
pub mod corpus;
pub mod error;
pub mod extractive;
pub mod io;
pub mod labeling;
pub mod latent;
pub mod numerics;
pub mod rouge;
pub mod toy;

pub use error::{Error, ErrorKind, Result};
