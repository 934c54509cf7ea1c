//! Estimating the autocovariance and Hurst parameter of long-range-dependent
//! traffic from randomly sampled observations and from active probes.
//!
//! The crate is organised along the measurement chain:
//! [`traffic`] synthesises LRD traces, [`sampling`] draws point processes
//! A(t) and exposes their analytic autocovariance, [`estimation`] holds the
//! covariance / aggregate-variance / periodogram estimators,
//! [`reconstruction`] inverts the sampling distortion, [`accuracy`] gives the
//! finite-sample accuracy model, [`simnet`] is a slotted tandem-queue
//! simulator and [`probe`] turns probe delays and pair dispersions into
//! observations and Hurst estimates.

// `!(x > 0.0)` is deliberate: it rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accuracy;
pub mod error;
pub mod estimation;
pub mod probe;
pub mod reconstruction;
pub mod sampling;
pub mod simnet;
pub mod traffic;

pub use accuracy::{AccuracyInputs, AccuracyReport};
pub use error::{Error, Result};
pub use estimation::{AggVarSeries, CovarianceSeries, HurstEstimate, HurstMethod, MeanMode, SeriesSource, SpectrumSeries};
pub use probe::{MeasurementConfig, ProbeKind, ProbeRecord, ReferenceMode};
pub use reconstruction::TrafficMoments;
pub use sampling::{InterSampleSpec, SamplingPattern};
pub use simnet::{CrossTraffic, NodeConfig, PathConfig, SimResult};
pub use traffic::{LrdModel, Trace, TraceKind};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The seeded generator behind every random draw in the crate.
pub type SimRng = ChaCha8Rng;

pub fn rng_for(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream seed from a base seed and a stream index.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
