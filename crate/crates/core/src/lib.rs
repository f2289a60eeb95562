//! Mapping-emulation knowledge distillation.
//!
//! A generator is trained adversarially on unlabeled data with a latent
//! dimension equal to the class count, frozen, and then grafted onto both a
//! query-only teacher and a student. The student is trained by pulling the
//! images generated from its outputs towards the images generated from the
//! teacher's outputs, together with a logit-level KL term.
//!
//! Layout:
//! - [`autodiff`]: tensors, the reverse-mode tape, SGD and checkpoints
//! - [`nets`]: classifier / generator / discriminator MLPs
//! - [`data`]: datasets, IDX parsing, blobs, augmentation, batching
//! - [`gan`]: adversarial training of the emulator
//! - [`distill`]: the blind teacher, distillation losses and training loops
//! - [`metrics`]: accuracy, Fréchet distance, logit-gradient profiles
//! - [`train`]: supervised training of teachers
//! - [`harness`]: run configuration and the experiment pipeline

pub mod autodiff;
pub mod data;
pub mod distill;
mod error;
pub mod gan;
pub mod harness;
pub mod metrics;
pub mod nets;
pub mod rng;
pub mod train;

pub use autodiff::{Graph, Gradients, Tensor, Var};
pub use error::{Error, Result};
