//! Neural translation and jump models.

mod translation;
mod jumpnet;

pub use translation::*;
pub use jumpnet::*;
