//! Linear feedback coding for Gaussian two-way channels.
//!
//! Two users exchange one PAM message each over `n` uses of a pair of
//! independent AWGN links. Each user's transmit symbols are linear in its
//! own message and in what it has received so far. This crate designs
//! such schemes so that the sum of the two block error rates is small under
//! a per-user power budget, and measures them by Monte Carlo simulation.
//!
//! Modules, bottom up:
//! - [`pam`]: Gray-mapped PAM and closed-form error rates.
//! - [`channel`]: channel configuration, noise and the causal exchange.
//! - [`scheme`]: scheme algebra, decoding and reparameterization.
//! - [`wsp`]: weighted sum-power minimization for fixed target SNRs.
//! - [`designer`]: sum-error search over the target SNRs.
//! - [`compose`]: long-block schedules and the two-pair interleave.
//! - [`eval`]: Monte Carlo estimation, baselines and the CSV schema.
//! - [`oracle`]: brute-force likelihood decisions and exhaustive search.

pub mod channel;
pub mod compose;
pub mod design;
pub mod designer;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod oracle;
pub mod pam;
pub mod scheme;
pub mod wsp;

pub use channel::{ChannelConfig, ExchangeTrace};
pub use design::DesignSolution;
pub use error::{Error, Result};
pub use pam::Constellation;
pub use scheme::{Combiners, LinearScheme, TildeScheme};

/// Version string written into every artifact.
pub const TOOL_VERSION: &str = concat!("gtwc-core ", env!("CARGO_PKG_VERSION"));
