//! Average-case population recovery over the insertion/deletion channel.
//!
//! The pipeline draws traces from a mixture of hidden source strings, groups
//! them with a pairwise block-sum test, reconstructs one string per large
//! group and reports the resulting weighted distribution.

// Negated comparisons such as `!(x > 0.0)` are used to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bits;
pub mod channel;
pub mod cluster;
pub mod distribution;
pub mod error;
pub mod experiment;
pub mod pipeline;
pub mod reconstruct;
pub mod rng;
pub mod stats;

pub use bits::{BitString, PackedBits, Trace};
pub use channel::ChannelParams;
pub use distribution::{DiscreteDistribution, Population};
pub use error::{Error, Result};
pub use rng::SeedTree;

