//! Asymptotic key-rate bounds for decoy-state MDI QKD with intensity
//! correlations between rounds.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cs;
pub mod decoy;
pub mod error;
pub mod ingest;
pub mod keyrate;
pub mod overlap;
pub mod photon;
#[cfg(test)]
mod properties;
pub mod quadrature;
pub mod special;

pub use channel::{gain_qber, gain_qber_tables, ChannelGain, ChannelParams};
pub use cs::{BoundedRate, Direction, Sign};
pub use decoy::{single_photon_bounds, Basis, GainQberTable, SinglePhotonEstimate};
pub use error::{Error, Result};
pub use ingest::{
    analyze_histograms, read_histograms, ClickHistogram, GroupWeights, IngestConfig, IngestReport,
};
pub use keyrate::{
    binary_entropy, delta_boundary, key_rate, max_distance, scan_distances, BoundaryPredicate,
    KeyRateCurve, KeyRateModel, KeyRatePoint, ZeroCause,
};
pub use overlap::{
    tau_lower, tau_table, CorrelationSpec, IntensityProtocol, IntervalRule, ModelKind,
    OverlapBound, Setting,
};
pub use photon::{Intensity, IntensityInterval, TruncatedGaussianParams};
pub use special::bessel_i0;
