pub mod dde;
pub mod error;
pub mod experiment;
pub mod par;
pub mod reservoir;
pub mod state;
pub mod tasks;
pub mod training;
pub mod virtual_net;

pub use error::{Error, Result};
pub use state::StateMatrix;
