//! Bootstrapped ensembles with randomized prior functions.
//!
//! The crate contains a small MLP engine ([`nn`]), the exact linear-Gaussian
//! posterior and its sample-then-optimize samplers ([`linear`]), ensembles
//! with additive random priors ([`ensemble`]), exploration environments
//! ([`env`]), value-based agents ([`agents`]), executable counterexamples for
//! rival posterior approximations ([`counterexamples`]) and an experiment
//! harness ([`harness`]).

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod counterexamples;
pub mod ensemble;
pub mod env;
pub mod error;
pub mod harness;
pub mod linear;
pub mod nn;
pub mod rng;

pub use agents::{Agent, AgentConfig, AgentKind, Trainer};
pub use env::{EnvSpec, Environment, Observation, Transition};
pub use error::{Error, Result};
pub use nn::{AdamConfig, AdamState, DropoutMask, Example, Features, L2Pull, LossSpec, Mlp};
