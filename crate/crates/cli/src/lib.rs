//! Library side of the dmtlab experiment runner: configuration resolution
//! and the command implementations that produce output text.

pub mod config;
pub mod emit;
