pub mod carworld;
pub mod error;
pub mod estimator;
pub mod gridworld;
pub mod harness;
pub mod neuroevolution;
pub mod par;
pub mod qlearn;
pub mod seeding;

pub use error::{Error, Result};
