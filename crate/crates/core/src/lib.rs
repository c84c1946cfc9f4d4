//! Three-stage, two-encoder distributed successive approximation coding
//! (DiSAC2) for a pair of jointly Gaussian sources under quadratic
//! distortion.
//!
//! Two encoders take turns describing their sources to a common receiver.
//! Each transmission is overheard by the other encoder, so every stage only
//! has to send a refinement of what the receiver already knows:
//!
//! 1. ENCx describes `X` at distortion `D_X1`.
//! 2. ENCy describes the residual `Y - mu_1` at distortion `D_Y2`.
//! 3. ENCx describes the residual `X - mu_2` at distortion `D_X3`.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerics:
//!
//! - [`rd`]: the closed-form stage recursion, the two-encoder minimum
//!   sum-rate and a generic Gaussian conditioning routine used to verify
//!   the closed forms.
//! - [`refinement`]: on-surface verification, feasible regions, rate
//!   allocation and transmission-energy comparison.
//! - [`montecarlo`]: a seeded, chunk-deterministic simulation of the coding
//!   chain through ideal test channels.
//!
//! All rates are in nats.

#![no_std]

extern crate alloc;

pub mod error;
pub mod montecarlo;
pub mod rd;
pub mod refinement;
pub mod roots;

pub use error::{Error, Result};
pub use rd::{
    gaussian_condition_oracle, plan_schedule, stage1, stage2, stage3, wagner_sum_rate,
    DistortionSchedule, GaussianPosterior, SchedulePlan, SourceModel, StageReport,
};
