//! Event-based neural decoding toolkit.
//!
//! The pipeline runs from synthetic neural data generation through event
//! filtering, feature extraction, decoder training, and resource accounting:
//!
//! - [`event`]: address-event types and bit-exact stream serialization
//! - [`synth`]: reach trajectories, tuned Poisson spikes, waveform synthesis,
//!   and delta-modulation event encoding
//! - [`evfilter`]: temporal-neighborhood event filter and spike detector
//! - [`features`]: binned / segmented / binary feature extraction, reach
//!   segmentation, and dataset splitting
//! - [`decoders`]: MLP, segmented-bin MLP, LSTM, and LIF spiking decoders with
//!   hand-derived gradients, plus a ridge-regression baseline
//! - [`metrics`]: R² scoring and effective-operation / memory accounting

pub mod decoders;
pub mod event;
pub mod evfilter;
pub mod features;
pub mod metrics;
pub mod seeds;
pub mod synth;

pub use event::{Event, EventStream, SpikeTrain};
pub use evfilter::FilterParams;
pub use features::{DatasetSplit, FeatureConfig, FeatureFrame, FeatureMode};
pub use metrics::MetricsReport;
pub use synth::{EncoderParams, ReachTrajectory, TuningModel};
