//! Fast-ripple HFO detection in intraoperative ECoG with a simulated
//! spiking neural network.
//!
//! The crate is organised as a per-channel streaming pipeline plus a
//! clinical decision layer:
//!
//! ```text
//! recording ─ bandpass 250-500 Hz ─ oversample 35 kHz ─ baseline
//!     │                                                    │
//!     └──────────► delta-modulator UP/DN spikes ◄──────────┘
//!                          │
//!                  two-layer SNN with dis-inhibitory
//!                  artifact rejection (66 neurons)
//!                          │
//!                  15 ms window concatenation ─► HFO events/rates
//!                          │
//!                  residual-HFO outcome prediction + exact CIs
//! ```
//!
//! [`recording`] loads and re-references multichannel data, [`dsp`] holds the
//! filter/baseline front end, [`adm`] the signal-to-spike conversion, [`snn`]
//! the network simulation and its calibration, [`detector`] the event and
//! rate extraction, [`outcome`] the seizure-outcome decision layer, and
//! [`synth`] the labeled synthetic corpus used for calibration and
//! verification. [`pipeline`] wires the per-channel path together.

pub mod adm;
pub mod detector;
pub mod dsp;
pub mod outcome;
pub mod pipeline;
pub mod recording;
pub mod snn;
pub mod synth;

pub use adm::{AdmConfig, Polarity, SpikeTrain};
pub use detector::{ChannelRateReport, HfoEvent};
pub use dsp::{BaselineEstimate, FilterCoefficients, FilterSpec};
pub use outcome::{CohortMetrics, OutcomePrediction, PatientOutcome};
pub use recording::{ChannelSignal, MontageMap, Phase, Recording};
pub use snn::{CalibrationResult, Network, NetworkConfig, SpikeRaster};
pub use synth::{Snippet, SnippetKind, SnippetSpec};
