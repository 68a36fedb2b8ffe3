pub mod error;
pub mod linalg;
pub mod model;
pub mod random;
pub mod uncoupled;
pub mod perturbation;
pub mod markov;
pub mod dynamics;
pub mod examples;
pub mod config;
pub mod verify;
