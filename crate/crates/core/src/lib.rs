//! Cybersickness-aware tile-based 360° video streaming.
//!
//! The crate models a streaming client with a packet (playback) queue and a
//! sickness queue, and decides per time slot which tiles to fetch, at what
//! quality, how far to shrink the field of view and whether to blur with
//! depth-of-field simulation. The online controller runs in three phases:
//! viewport prediction and tile selection ([`vpts`]), DP quality assignment
//! ([`tqa`]) and sickness-guided local search ([`ctqc`]), swept over every
//! FoV/DoF configuration by [`controller`]. [`oracle`] holds brute-force
//! reference solvers and [`sim`] the trace-driven simulator.

// `!(x > 0.0)` is used deliberately so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod ctqc;
pub mod error;
pub mod model;
pub mod oracle;
pub mod queues;
pub mod sim;
pub mod tqa;
pub mod vpts;

pub use error::{Error, Infeasible, Result};
