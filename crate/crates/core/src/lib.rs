//! Mixing-time machinery for card-shuffling chains.
//!
//! The crate covers the linear and circular overhand shuffles and the
//! Rudvalis shuffle: exact single-card kernels, the cosine distinguishing
//! statistic and its drift defect, executable lower-bound lemmas, exact
//! total-variation curves for small decks, and Monte Carlo statistic-based
//! lower bounds for large ones.

pub mod bounds;
pub mod chain;
pub mod error;
pub mod numeric;
pub mod perm;
pub mod rng;
pub mod shuffle;
pub mod spectral;
pub mod tv;

pub use error::{Error, Result};
pub use perm::{DeckState, Permutation, SymmetricGroup};
pub use rng::SplitMix64;
pub use shuffle::{ModelKind, ShuffleModel};
