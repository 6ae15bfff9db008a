//! Computing, bounding and certifying bipartite quantum correlation sets.
//!
//! The crate is organized bottom-up:
//!
//! * [`group`]: reduced words in free products of cyclic groups, Cayley balls
//!   and free-subgroup witnesses.
//! * [`algebra`]: group-algebra elements, Fourier projectors, Bell elements
//!   and their images in matrix representations.
//! * [`quantum`]: finite-dimensional states and measurements, correlations
//!   under the tensor-product and commuting-operator models, sequential
//!   measurements, steering, see-saw lower bounds and dilations.
//! * [`sdp`]: a dense primal-dual interior-point solver.
//! * [`npa`]: moment-matrix relaxations built on top of [`sdp`].
//! * [`norms`]: matrix-free norm estimates in truncated regular
//!   representations.
//! * [`config`]: run configuration shared by the command-line front end.
//! * [`par`]: data-parallel helpers with a sequential fallback.

#![allow(clippy::needless_range_loop)]

pub mod algebra;
pub mod config;
pub mod error;
pub mod group;
pub mod linalg;
pub mod norms;
pub mod npa;
pub mod par;
pub mod quantum;
pub mod sdp;

pub use error::{Error, Result};
