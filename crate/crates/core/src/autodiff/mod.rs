//! Reverse-mode differentiation, parameter storage and Adam training.

pub mod gradcheck;
pub mod params;
pub mod tape;
mod train;

pub use gradcheck::{gradcheck, GradCheck};
pub use params::{Init, ParamStore, Part, Slot, SlotKind};
pub use tape::{Tape, Var};
pub use train::{forward_backward, mean_loss, train, Batch, TrainConfig, TrainError, TrainLog};
