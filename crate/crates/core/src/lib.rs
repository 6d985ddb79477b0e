//! Song complexity analytics.
//!
//! Songs are reduced to four symbolic codeword streams (pitch, loudness,
//! timbre, rhythm) and each stream is scored by its first-order conditional
//! entropy in bits. On top of those per-song scores the crate runs corpus
//! studies: popular-vs-random complexity distributions, per-epoch trends,
//! same-year divergence of charting songs, and genre clustering.
//!
//! The modules layer bottom-up:
//!
//! - [`corpus`]: song records, JSONL ingestion, filtering, genre and chart tagging
//! - [`codec`]: segment features to codewords
//! - [`infotheory`]: transition models, entropies, KL divergence, complexity profiles
//! - [`stats`]: bootstrap, OLS trends, KS test, Pearson correlation
//! - [`cluster`]: genre profiles, agglomerative clustering, silhouette selection
//! - [`synth`]: synthetic corpora with planted, analytically known structure
//! - [`pipeline`]: the corpus studies and the report files they write
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cluster;
pub mod codec;
pub mod corpus;
pub mod error;
pub mod infotheory;
pub mod pipeline;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
