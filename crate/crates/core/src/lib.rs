#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod compatibility;
pub mod dataset;
pub mod embedding;
mod error;
pub mod evaluation;
pub mod fusion;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
