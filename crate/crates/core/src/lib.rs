//! Training-free multi-step inference-time search for target speaker
//! extraction.
//!
//! A frozen extractor `f(x, e)` produces a first estimate from the mixture.
//! Each refinement step then builds `K` candidate inputs on the segment
//! between the mixture and the current estimate, re-runs the same extractor
//! on every candidate, and keeps the candidate a scoring function likes
//! best. The candidate at `r = 1` always reproduces the first estimate, so
//! the selected score can never fall below the one-step baseline.
//!
//! | module | contents |
//! |---|---|
//! | [`signal`] | waveforms, WAV I/O, STFT, interpolation |
//! | [`metrics`] | SI-SDR(i), speaker embedding, quality proxy |
//! | [`scene`] | synthetic two-talker mixtures |
//! | [`extractors`] | identity, leaky-linear oracle, spectral mask, external worker |
//! | [`scorers`] | oracle, quality, speaker similarity, joint selector, external worker |
//! | [`search`] | candidate schedules and the greedy search loop |
//! | [`lab`] | Lipschitz estimates and score-deviation bound checks |
//! | [`protocol`] | the length-prefixed worker wire format |
//! | [`harness`] | dataset synthesis, batch runs, reports |

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod extractors;
pub mod harness;
pub mod lab;
pub mod metrics;
pub mod protocol;
pub mod scene;
pub mod scorers;
pub mod search;
pub mod signal;

pub use error::{BackendError, Error, Result};
pub use extractors::Extractor;
pub use scene::MixtureScene;
pub use scorers::Scorer;
pub use search::{run_search, SearchConfig, Trajectory};
pub use signal::Waveform;
