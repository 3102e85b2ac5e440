//! Model-free recovery control of a quadrotor after a single rotor failure.
//!
//! The crate bundles a rigid-body simulator ([`dynamics`]), the episodic
//! control task built on it ([`env`]), a small network engine ([`nn`]), a
//! Soft Actor-Critic learner ([`sac`]), and the training/evaluation
//! harness with its file formats.

pub mod checkpoint;
pub mod config;
pub mod dynamics;
pub mod env;
pub mod harness;
pub mod logs;
pub mod plot;
pub mod nn;
pub mod sac;
