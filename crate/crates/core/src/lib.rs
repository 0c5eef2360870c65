pub mod dg;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod flux;
pub mod mesh;
pub mod par;
pub mod sbp;
pub mod scenarios;
pub mod state;
pub mod time;
pub mod verify;
pub mod viscous;

pub use error::{Error, Result};
