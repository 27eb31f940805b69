//! Two-layer feed-forward spiking network with the dis-inhibitory artifact
//! rejection circuit.
//!
//! Topology: UP/DN input spike trains project to a population of second-layer
//! neurons (UP excitatory, DN inhibitory, per-neuron weights and time
//! constants) and to a dis-inhibitory neuron (both excitatory). The
//! dis-inhibitory neuron inhibits a global-inhibitory neuron, which is driven
//! by a 135 Hz source and tonically inhibits every second-layer neuron. A
//! spike of at least one second-layer neuron marks an HFO.
//!
//! All state variables are currents (femtoamperes). Neurons are current-mode
//! leaky integrate-and-fire: the membrane current tracks the net synaptic
//! input through a first-order filter with time constant `tau_mem`, is
//! floored at zero, and fires on reaching `i_threshold`, then resets to zero
//! for a refractory period. Synapses are exponential current sources that
//! decay by the exact factor `exp(-tick/tau)` each step and jump by their
//! weight on presynaptic spikes. The simulation is clock-driven at the
//! 35 kHz delta-modulator tick; internal spikes are delivered on the
//! following tick.

pub mod calibrate;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

/// Simulation tick rate, equal to the delta-modulator oversampling rate.
pub const TICK_RATE_HZ: f64 = crate::dsp::OVERSAMPLE_RATE_HZ;

// Published synapse constants (weights in fA, time constants in seconds).
pub const UP_SL_WEIGHT_RANGE_FA: (f64, f64) = (7.0, 14.0);
pub const UP_SL_TAU_RANGE_S: (f64, f64) = (3.0e-3, 6.0e-3);
pub const DN_SL_DELTA_RANGE_S: (f64, f64) = (0.1e-3, 1.0e-3);
pub const UP_DI_WEIGHT_FA: f64 = 21.0;
pub const UP_DI_TAU_S: f64 = 5.0e-3;
pub const DI_GI_WEIGHT_FA: f64 = 17.5;
pub const DI_GI_TAU_S: f64 = 20.0e-3;
pub const GI_SL_WEIGHT_FA: f64 = 24.5;
pub const GI_SL_TAU_S: f64 = 5.0e-3;
pub const POISS_GI_TAU_S: f64 = 5.0e-3;
pub const DEFAULT_POISSON_RATE_HZ: f64 = 135.0;

/// Refractory periods of the three dynamic populations. These are not
/// published; they are fixed here and the remaining neuron constants are
/// resolved by calibration.
pub const SL_REFRACTORY_S: f64 = 2.0e-3;
pub const DI_REFRACTORY_S: f64 = 1.0e-3;
pub const GI_REFRACTORY_S: f64 = 2.0e-3;

#[derive(Debug, Error)]
pub enum SnnError {
    #[error("{param} = {value} outside [{low}, {high}]")]
    OutOfRangeParam { param: String, value: f64, low: f64, high: f64 },
    #[error("{param}: {msg}")]
    InvalidParam { param: String, msg: String },
    #[error("no admissible configuration: {0}")]
    NoAdmissibleConfig(String),
    #[error("malformed calibration file at line {line}: {msg}")]
    MalformedCalibration { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynapsePolarity {
    Excitatory,
    Inhibitory,
}

/// One synapse: the polarity carries the sign, the weight is positive.
#[derive(Debug, Clone, Copy)]
pub struct SynapseParams {
    pub weight_fa: f64,
    pub polarity: SynapsePolarity,
    pub tau_s: f64,
}

/// Per-population neuron constants. `reset_fa` is always zero.
#[derive(Debug, Clone, Copy)]
pub struct NeuronParams {
    pub tau_mem_s: f64,
    pub threshold_fa: f64,
    pub refractory_s: f64,
    pub reset_fa: f64,
}

impl NeuronParams {
    pub fn new(tau_mem_s: f64, threshold_fa: f64, refractory_s: f64) -> Self {
        NeuronParams { tau_mem_s, threshold_fa, refractory_s, reset_fa: 0.0 }
    }

    fn validate(&self, name: &str) -> Result<(), SnnError> {
        for (field, v) in [
            ("tau_mem_s", self.tau_mem_s),
            ("threshold_fa", self.threshold_fa),
            ("refractory_s", self.refractory_s),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SnnError::InvalidParam {
                    param: format!("{name}.{field}"),
                    msg: format!("must be positive, got {v}"),
                });
            }
        }
        if self.reset_fa != 0.0 {
            return Err(SnnError::InvalidParam {
                param: format!("{name}.reset_fa"),
                msg: "reset level is fixed at 0".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Population {
    SecondLayer,
    DisInhibitory,
    GlobalInhibitory,
}

impl Population {
    pub fn as_str(&self) -> &'static str {
        match self {
            Population::SecondLayer => "second_layer",
            Population::DisInhibitory => "dis_inhibitory",
            Population::GlobalInhibitory => "global_inhibitory",
        }
    }
}

/// Drive of the global-inhibitory neuron: seeded Poisson inter-arrival times
/// at the configured rate, a deterministic regular train with the same mean
/// rate, or disabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriveMode {
    Off,
    Poisson,
    Regular,
}

impl DriveMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DriveMode::Off => "off",
            DriveMode::Poisson => "poisson",
            DriveMode::Regular => "regular",
        }
    }
}

impl std::str::FromStr for DriveMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "off" => Ok(DriveMode::Off),
            "poisson" => Ok(DriveMode::Poisson),
            "regular" => Ok(DriveMode::Regular),
            other => Err(format!("unknown drive mode {other:?}")),
        }
    }
}

/// Full parameterization of the network.
#[derive(Debug, Clone)]
pub struct NetworkConfig {
    pub n_second_layer: usize,
    /// Per-neuron UP->second-layer synapses (excitatory).
    pub up_sl: Vec<SynapseParams>,
    /// Per-neuron DN->second-layer synapses (inhibitory), weight tied to the
    /// paired UP synapse, tau shifted down by a small per-neuron delta.
    pub dn_sl: Vec<SynapseParams>,
    pub up_di: SynapseParams,
    pub dn_di: SynapseParams,
    pub di_gi: SynapseParams,
    pub poiss_gi: SynapseParams,
    pub gi_sl: SynapseParams,
    pub poisson_rate_hz: f64,
    pub poisson_seed: u64,
    pub poisson_mode: DriveMode,
    pub sl_neuron: NeuronParams,
    pub di_neuron: NeuronParams,
    pub gi_neuron: NeuronParams,
    pub tick_s: f64,
}

/// Deterministic second-layer parameter grid: weights and time constants on
/// a `ceil(sqrt(n))`-point lattice spanning the published ranges, and the
/// DN-tau offset delta ramping linearly over the neurons.
pub fn second_layer_grid(n: usize) -> Vec<(f64, f64, f64)> {
    let g = (n as f64).sqrt().ceil() as usize;
    let frac = |i: usize, steps: usize| -> f64 {
        if steps <= 1 {
            0.5
        } else {
            i as f64 / (steps - 1) as f64
        }
    };
    (0..n)
        .map(|k| {
            let w = UP_SL_WEIGHT_RANGE_FA.0
                + frac(k / g, g) * (UP_SL_WEIGHT_RANGE_FA.1 - UP_SL_WEIGHT_RANGE_FA.0);
            let tau = UP_SL_TAU_RANGE_S.0
                + frac(k % g, g) * (UP_SL_TAU_RANGE_S.1 - UP_SL_TAU_RANGE_S.0);
            let delta = DN_SL_DELTA_RANGE_S.0
                + frac(k, n) * (DN_SL_DELTA_RANGE_S.1 - DN_SL_DELTA_RANGE_S.0);
            (w, tau, delta)
        })
        .collect()
}

impl NetworkConfig {
    /// Builds the default topology from calibrated neuron constants.
    pub fn from_calibration(calib: &CalibrationResult, n_second_layer: usize, seed: u64) -> Self {
        let grid = second_layer_grid(n_second_layer);
        let up_sl = grid
            .iter()
            .map(|&(w, tau, _)| SynapseParams {
                weight_fa: w,
                polarity: SynapsePolarity::Excitatory,
                tau_s: tau,
            })
            .collect();
        let dn_sl = grid
            .iter()
            .map(|&(w, tau, delta)| SynapseParams {
                weight_fa: w,
                polarity: SynapsePolarity::Inhibitory,
                tau_s: tau - delta,
            })
            .collect();
        NetworkConfig {
            n_second_layer,
            up_sl,
            dn_sl,
            up_di: SynapseParams {
                weight_fa: UP_DI_WEIGHT_FA,
                polarity: SynapsePolarity::Excitatory,
                tau_s: UP_DI_TAU_S,
            },
            dn_di: SynapseParams {
                weight_fa: UP_DI_WEIGHT_FA,
                polarity: SynapsePolarity::Excitatory,
                tau_s: UP_DI_TAU_S,
            },
            di_gi: SynapseParams {
                weight_fa: DI_GI_WEIGHT_FA,
                polarity: SynapsePolarity::Inhibitory,
                tau_s: DI_GI_TAU_S,
            },
            poiss_gi: SynapseParams {
                weight_fa: calib.poiss_gi_weight_fa,
                polarity: SynapsePolarity::Excitatory,
                tau_s: POISS_GI_TAU_S,
            },
            gi_sl: SynapseParams {
                weight_fa: GI_SL_WEIGHT_FA,
                polarity: SynapsePolarity::Inhibitory,
                tau_s: GI_SL_TAU_S,
            },
            poisson_rate_hz: calib.poisson_rate_hz,
            poisson_seed: seed,
            poisson_mode: calib.drive_mode,
            sl_neuron: calib.sl,
            di_neuron: calib.di,
            gi_neuron: calib.gi,
            tick_s: 1.0 / TICK_RATE_HZ,
        }
    }

    pub fn validate(&self) -> Result<(), SnnError> {
        let range = |param: &str, value: f64, (low, high): (f64, f64)| {
            if value < low - 1e-9 || value > high + 1e-9 {
                Err(SnnError::OutOfRangeParam { param: param.into(), value, low, high })
            } else {
                Ok(())
            }
        };
        let exact = |param: &str, value: f64, expected: f64| {
            if (value - expected).abs() > 1e-9 {
                Err(SnnError::OutOfRangeParam {
                    param: param.into(),
                    value,
                    low: expected,
                    high: expected,
                })
            } else {
                Ok(())
            }
        };
        if self.n_second_layer == 0 {
            return Err(SnnError::InvalidParam {
                param: "n_second_layer".into(),
                msg: "must be at least 1".into(),
            });
        }
        if self.up_sl.len() != self.n_second_layer || self.dn_sl.len() != self.n_second_layer {
            return Err(SnnError::InvalidParam {
                param: "up_sl/dn_sl".into(),
                msg: format!(
                    "expected {} per-neuron synapses, got {}/{}",
                    self.n_second_layer,
                    self.up_sl.len(),
                    self.dn_sl.len()
                ),
            });
        }
        for (k, (up, dn)) in self.up_sl.iter().zip(&self.dn_sl).enumerate() {
            range(&format!("up_sl[{k}].weight_fa"), up.weight_fa, UP_SL_WEIGHT_RANGE_FA)?;
            range(&format!("up_sl[{k}].tau_s"), up.tau_s, UP_SL_TAU_RANGE_S)?;
            range(&format!("dn_sl[{k}].weight_fa"), dn.weight_fa, UP_SL_WEIGHT_RANGE_FA)?;
            range(&format!("dn_sl[{k}].delta_s"), up.tau_s - dn.tau_s, DN_SL_DELTA_RANGE_S)?;
            if up.polarity != SynapsePolarity::Excitatory || dn.polarity != SynapsePolarity::Inhibitory {
                return Err(SnnError::InvalidParam {
                    param: format!("up_sl/dn_sl[{k}].polarity"),
                    msg: "UP projections are excitatory, DN inhibitory".into(),
                });
            }
        }
        exact("up_di.weight_fa", self.up_di.weight_fa, UP_DI_WEIGHT_FA)?;
        exact("up_di.tau_s", self.up_di.tau_s, UP_DI_TAU_S)?;
        exact("dn_di.weight_fa", self.dn_di.weight_fa, UP_DI_WEIGHT_FA)?;
        exact("dn_di.tau_s", self.dn_di.tau_s, UP_DI_TAU_S)?;
        exact("di_gi.weight_fa", self.di_gi.weight_fa, DI_GI_WEIGHT_FA)?;
        exact("di_gi.tau_s", self.di_gi.tau_s, DI_GI_TAU_S)?;
        exact("gi_sl.weight_fa", self.gi_sl.weight_fa, GI_SL_WEIGHT_FA)?;
        exact("gi_sl.tau_s", self.gi_sl.tau_s, GI_SL_TAU_S)?;
        exact("poiss_gi.tau_s", self.poiss_gi.tau_s, POISS_GI_TAU_S)?;
        if !(self.poiss_gi.weight_fa > 0.0) {
            return Err(SnnError::InvalidParam {
                param: "poiss_gi.weight_fa".into(),
                msg: "must be positive".into(),
            });
        }
        for (syn, name, pol) in [
            (&self.up_di, "up_di", SynapsePolarity::Excitatory),
            (&self.dn_di, "dn_di", SynapsePolarity::Excitatory),
            (&self.di_gi, "di_gi", SynapsePolarity::Inhibitory),
            (&self.poiss_gi, "poiss_gi", SynapsePolarity::Excitatory),
            (&self.gi_sl, "gi_sl", SynapsePolarity::Inhibitory),
        ] {
            if syn.polarity != pol {
                return Err(SnnError::InvalidParam {
                    param: format!("{name}.polarity"),
                    msg: "fixed by the topology".into(),
                });
            }
        }
        if !(self.poisson_rate_hz > 0.0) && self.poisson_mode != DriveMode::Off {
            return Err(SnnError::InvalidParam {
                param: "poisson_rate_hz".into(),
                msg: format!("must be positive, got {}", self.poisson_rate_hz),
            });
        }
        if !(self.tick_s > 0.0) {
            return Err(SnnError::InvalidParam {
                param: "tick_s".into(),
                msg: "must be positive".into(),
            });
        }
        self.sl_neuron.validate("sl_neuron")?;
        self.di_neuron.validate("di_neuron")?;
        self.gi_neuron.validate("gi_neuron")?;
        Ok(())
    }
}

/// Per-neuron spike timestamps, grouped by population.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpikeRaster {
    pub second_layer: Vec<Vec<f64>>,
    pub dis_inhibitory: Vec<f64>,
    pub global_inhibitory: Vec<f64>,
}

impl SpikeRaster {
    /// All second-layer spikes pooled over neurons, sorted.
    pub fn second_layer_pooled(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.second_layer.iter().flatten().copied().collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        all
    }

    pub fn second_layer_spike_count(&self) -> usize {
        self.second_layer.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.second_layer_spike_count() == 0
            && self.dis_inhibitory.is_empty()
            && self.global_inhibitory.is_empty()
    }

    /// Event CSV: `neuron_id,population,timestamp_s`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "neuron_id,population,timestamp_s")?;
        for (id, spikes) in self.second_layer.iter().enumerate() {
            for t in spikes {
                writeln!(w, "{id},{},{t:.6}", Population::SecondLayer.as_str())?;
            }
        }
        for t in &self.dis_inhibitory {
            writeln!(w, "0,{},{t:.6}", Population::DisInhibitory.as_str())?;
        }
        for t in &self.global_inhibitory {
            writeln!(w, "0,{},{t:.6}", Population::GlobalInhibitory.as_str())?;
        }
        Ok(())
    }

    pub fn write_csv_file<P: AsRef<Path>>(&self, path: P) -> std::io::Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Which populations a partial run simulates; disabled populations can be
/// replaced by externally supplied spike trains. Used by the staged
/// calibration search, which exploits the feed-forward topology.
#[derive(Debug, Clone, Default)]
pub(crate) struct PartialSpec<'a> {
    pub simulate_sl: bool,
    pub simulate_di: bool,
    pub simulate_gi: bool,
    /// External DI spikes feeding the GI when the DI is not simulated.
    pub di_feed: Option<&'a [f64]>,
    /// External GI spikes feeding the second layer when the GI is not
    /// simulated.
    pub gi_feed: Option<&'a [f64]>,
}

impl PartialSpec<'_> {
    pub(crate) fn full() -> Self {
        PartialSpec { simulate_sl: true, simulate_di: true, simulate_gi: true, ..Default::default() }
    }
}

/// A built, validated network with its simulation state.
#[derive(Debug, Clone)]
pub struct Network {
    cfg: NetworkConfig,
    // second layer, struct-of-arrays
    up_w: Vec<f64>,
    up_decay: Vec<f64>,
    dn_w: Vec<f64>,
    dn_decay: Vec<f64>,
    gi_sl_decay: f64,
    sl_alpha: f64,
    sl_refr_ticks: u64,
    di_syn_decay: f64,
    di_alpha: f64,
    di_refr_ticks: u64,
    poiss_decay: f64,
    di_gi_decay: f64,
    gi_alpha: f64,
    gi_refr_ticks: u64,
}

/// Builds and validates a network.
pub fn build_network(cfg: NetworkConfig) -> Result<Network, SnnError> {
    cfg.validate()?;
    let dt = cfg.tick_s;
    let decay = |tau: f64| (-dt / tau).exp();
    let refr_ticks = |r: f64| ((r / dt).ceil() as u64).max(1);
    Ok(Network {
        up_w: cfg.up_sl.iter().map(|s| s.weight_fa).collect(),
        up_decay: cfg.up_sl.iter().map(|s| decay(s.tau_s)).collect(),
        dn_w: cfg.dn_sl.iter().map(|s| s.weight_fa).collect(),
        dn_decay: cfg.dn_sl.iter().map(|s| decay(s.tau_s)).collect(),
        gi_sl_decay: decay(cfg.gi_sl.tau_s),
        sl_alpha: decay(cfg.sl_neuron.tau_mem_s),
        sl_refr_ticks: refr_ticks(cfg.sl_neuron.refractory_s),
        di_syn_decay: decay(cfg.up_di.tau_s),
        di_alpha: decay(cfg.di_neuron.tau_mem_s),
        di_refr_ticks: refr_ticks(cfg.di_neuron.refractory_s),
        poiss_decay: decay(cfg.poiss_gi.tau_s),
        di_gi_decay: decay(cfg.di_gi.tau_s),
        gi_alpha: decay(cfg.gi_neuron.tau_mem_s),
        gi_refr_ticks: refr_ticks(cfg.gi_neuron.refractory_s),
        cfg,
    })
}

/// Converts event times to tick indices within `[t_start, t_end)`; events
/// outside the window are dropped.
fn times_to_ticks(times: &[f64], t_start: f64, n_ticks: u64, tick_s: f64) -> Vec<u64> {
    let mut out: Vec<u64> = times
        .iter()
        .filter_map(|&t| {
            let tick = ((t - t_start) / tick_s).round();
            if tick >= 0.0 && (tick as u64) < n_ticks {
                Some(tick as u64)
            } else {
                None
            }
        })
        .collect();
    out.sort_unstable();
    out
}

fn drive_ticks(cfg: &NetworkConfig, n_ticks: u64) -> Vec<u64> {
    let mut out = Vec::new();
    match cfg.poisson_mode {
        DriveMode::Off => {}
        DriveMode::Regular => {
            let period = 1.0 / cfg.poisson_rate_hz;
            let mut k = 1u64;
            loop {
                let tick = (k as f64 * period / cfg.tick_s).round() as u64;
                if tick >= n_ticks {
                    break;
                }
                out.push(tick);
                k += 1;
            }
        }
        DriveMode::Poisson => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.poisson_seed);
            let mut t = 0.0_f64;
            loop {
                let u: f64 = rng.gen();
                t += -(1.0 - u).ln() / cfg.poisson_rate_hz;
                let tick = (t / cfg.tick_s).round() as u64;
                if tick >= n_ticks {
                    break;
                }
                out.push(tick);
            }
        }
    }
    out
}

impl Network {
    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    /// Dynamic neuron count (second layer plus the two rejection-circuit
    /// neurons).
    pub fn n_dynamic_neurons(&self) -> usize {
        self.cfg.n_second_layer + 2
    }

    /// Edge list of the fixed topology as
    /// `(source, target, polarity)` over population names.
    pub fn topology(&self) -> Vec<(&'static str, &'static str, SynapsePolarity)> {
        use SynapsePolarity::*;
        vec![
            ("input_up", "second_layer", Excitatory),
            ("input_dn", "second_layer", Inhibitory),
            ("input_up", "dis_inhibitory", Excitatory),
            ("input_dn", "dis_inhibitory", Excitatory),
            ("dis_inhibitory", "global_inhibitory", Inhibitory),
            ("poisson", "global_inhibitory", Excitatory),
            ("global_inhibitory", "second_layer", Inhibitory),
        ]
    }

    /// Runs the full network over `[0, duration_s)`.
    pub fn run(&mut self, up_times: &[f64], dn_times: &[f64], duration_s: f64) -> SpikeRaster {
        self.run_window(up_times, dn_times, 0.0, duration_s)
    }

    /// Runs the full network over `[t_start_s, t_end_s)`. A negative start
    /// gives the tonic drive time to settle before the recording begins;
    /// spike timestamps keep the recording time axis.
    pub fn run_window(
        &mut self,
        up_times: &[f64],
        dn_times: &[f64],
        t_start_s: f64,
        t_end_s: f64,
    ) -> SpikeRaster {
        self.run_partial(up_times, dn_times, t_start_s, t_end_s, &PartialSpec::full())
    }

    pub(crate) fn run_partial(
        &mut self,
        up_times: &[f64],
        dn_times: &[f64],
        t_start_s: f64,
        t_end_s: f64,
        spec: &PartialSpec<'_>,
    ) -> SpikeRaster {
        let dt = self.cfg.tick_s;
        let n = self.cfg.n_second_layer;
        let n_ticks = (((t_end_s - t_start_s) / dt).round() as u64).max(0);

        let up_ticks = times_to_ticks(up_times, t_start_s, n_ticks, dt);
        let dn_ticks = times_to_ticks(dn_times, t_start_s, n_ticks, dt);
        let poiss_ticks = if spec.simulate_gi { drive_ticks(&self.cfg, n_ticks) } else { Vec::new() };
        let di_feed_ticks = spec
            .di_feed
            .map(|t| times_to_ticks(t, t_start_s, n_ticks, dt))
            .unwrap_or_default();
        let gi_feed_ticks = spec
            .gi_feed
            .map(|t| times_to_ticks(t, t_start_s, n_ticks, dt))
            .unwrap_or_default();

        // second-layer state
        let mut up_cur = vec![0.0f64; n];
        let mut dn_cur = vec![0.0f64; n];
        let mut gi_cur = vec![0.0f64; n];
        let mut sl_mem = vec![0.0f64; n];
        let mut sl_refr_until = vec![0u64; n];
        // dis-inhibitory state
        let mut di_up_cur = 0.0f64;
        let mut di_dn_cur = 0.0f64;
        let mut di_mem = 0.0f64;
        let mut di_refr_until = 0u64;
        // global-inhibitory state
        let mut poiss_cur = 0.0f64;
        let mut di_gi_cur = 0.0f64;
        let mut gi_mem = 0.0f64;
        let mut gi_refr_until = 0u64;

        let mut raster = SpikeRaster {
            second_layer: vec![Vec::new(); if spec.simulate_sl { n } else { 0 }],
            dis_inhibitory: Vec::new(),
            global_inhibitory: Vec::new(),
        };

        let sl_one_m_alpha = 1.0 - self.sl_alpha;
        let di_one_m_alpha = 1.0 - self.di_alpha;
        let gi_one_m_alpha = 1.0 - self.gi_alpha;
        let up_di_w = self.cfg.up_di.weight_fa;
        let dn_di_w = self.cfg.dn_di.weight_fa;
        let di_gi_w = self.cfg.di_gi.weight_fa;
        let poiss_w = self.cfg.poiss_gi.weight_fa;
        let gi_sl_w = self.cfg.gi_sl.weight_fa;
        let sl_theta = self.cfg.sl_neuron.threshold_fa;
        let di_theta = self.cfg.di_neuron.threshold_fa;
        let gi_theta = self.cfg.gi_neuron.threshold_fa;

        let (mut iu, mut id, mut ip, mut idf, mut igf) = (0usize, 0usize, 0usize, 0usize, 0usize);
        // internal spikes are delivered on the next tick
        let mut di_spike_pending = false;
        let mut gi_spike_pending = false;

        for tick in 0..n_ticks {
            // synapse decay
            if spec.simulate_sl {
                for i in 0..n {
                    up_cur[i] *= self.up_decay[i];
                    dn_cur[i] *= self.dn_decay[i];
                    gi_cur[i] *= self.gi_sl_decay;
                }
            }
            if spec.simulate_di {
                di_up_cur *= self.di_syn_decay;
                di_dn_cur *= self.di_syn_decay;
            }
            if spec.simulate_gi {
                poiss_cur *= self.poiss_decay;
                di_gi_cur *= self.di_gi_decay;
            }

            // presynaptic jumps: external inputs, drive, then last tick's
            // internal spikes
            while iu < up_ticks.len() && up_ticks[iu] == tick {
                if spec.simulate_sl {
                    for i in 0..n {
                        up_cur[i] += self.up_w[i];
                    }
                }
                if spec.simulate_di {
                    di_up_cur += up_di_w;
                }
                iu += 1;
            }
            while id < dn_ticks.len() && dn_ticks[id] == tick {
                if spec.simulate_sl {
                    for i in 0..n {
                        dn_cur[i] += self.dn_w[i];
                    }
                }
                if spec.simulate_di {
                    di_dn_cur += dn_di_w;
                }
                id += 1;
            }
            while ip < poiss_ticks.len() && poiss_ticks[ip] == tick {
                poiss_cur += poiss_w;
                ip += 1;
            }
            if di_spike_pending {
                di_gi_cur += di_gi_w;
                di_spike_pending = false;
            }
            while idf < di_feed_ticks.len() && di_feed_ticks[idf] + 1 == tick {
                di_gi_cur += di_gi_w;
                idf += 1;
            }
            if gi_spike_pending {
                for i in 0..n {
                    gi_cur[i] += gi_sl_w;
                }
                gi_spike_pending = false;
            }
            while igf < gi_feed_ticks.len() && gi_feed_ticks[igf] + 1 == tick {
                for i in 0..n {
                    gi_cur[i] += gi_sl_w;
                }
                igf += 1;
            }

            let time_s = t_start_s + tick as f64 * dt;

            // membrane updates
            if spec.simulate_sl {
                for i in 0..n {
                    if tick < sl_refr_until[i] {
                        continue;
                    }
                    let i_in = up_cur[i] - dn_cur[i] - gi_cur[i];
                    let mut m = sl_mem[i] * self.sl_alpha + i_in * sl_one_m_alpha;
                    if m < 0.0 {
                        m = 0.0;
                    }
                    if m >= sl_theta {
                        raster.second_layer[i].push(time_s);
                        sl_mem[i] = 0.0;
                        sl_refr_until[i] = tick + self.sl_refr_ticks;
                    } else {
                        sl_mem[i] = m;
                    }
                }
            }
            if spec.simulate_di && tick >= di_refr_until {
                let i_in = di_up_cur + di_dn_cur;
                let mut m = di_mem * self.di_alpha + i_in * di_one_m_alpha;
                if m < 0.0 {
                    m = 0.0;
                }
                if m >= di_theta {
                    raster.dis_inhibitory.push(time_s);
                    di_mem = 0.0;
                    di_refr_until = tick + self.di_refr_ticks;
                    di_spike_pending = true;
                } else {
                    di_mem = m;
                }
            }
            if spec.simulate_gi && tick >= gi_refr_until {
                let i_in = poiss_cur - di_gi_cur;
                let mut m = gi_mem * self.gi_alpha + i_in * gi_one_m_alpha;
                if m < 0.0 {
                    m = 0.0;
                }
                if m >= gi_theta {
                    raster.global_inhibitory.push(time_s);
                    gi_mem = 0.0;
                    gi_refr_until = tick + self.gi_refr_ticks;
                    gi_spike_pending = true;
                } else {
                    gi_mem = m;
                }
            }
        }

        raster
    }
}

/// Calibrated neuron constants plus the resolved drive weight and mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationResult {
    pub sl: NeuronParams,
    pub di: NeuronParams,
    pub gi: NeuronParams,
    pub poiss_gi_weight_fa: f64,
    pub drive_mode: DriveMode,
    pub poisson_rate_hz: f64,
}

impl CalibrationResult {
    /// A known-admissible configuration used as a test fixture; production
    /// runs load a file produced by the calibration search.
    pub fn reference() -> Self {
        CalibrationResult {
            sl: NeuronParams::new(8.0e-3, 12.0, SL_REFRACTORY_S),
            di: NeuronParams::new(2.5e-3, 60.0, DI_REFRACTORY_S),
            gi: NeuronParams::new(12.0e-3, 10.0, GI_REFRACTORY_S),
            poiss_gi_weight_fa: 150.0,
            drive_mode: DriveMode::Regular,
            poisson_rate_hz: DEFAULT_POISSON_RATE_HZ,
        }
    }

    /// Writes the human-readable key-value calibration file.
    pub fn write_file(&self, path: &Path) -> Result<(), SnnError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "# HFO detector calibration (schema 1)")?;
        writeln!(w, "# times in seconds, currents in femtoamperes")?;
        writeln!(w, "schema = 1")?;
        writeln!(w, "drive_mode = {}", self.drive_mode.as_str())?;
        writeln!(w, "poisson_rate_hz = {}", self.poisson_rate_hz)?;
        writeln!(w, "poiss_gi.weight_fa = {}", self.poiss_gi_weight_fa)?;
        for (name, p) in [("sl", &self.sl), ("di", &self.di), ("gi", &self.gi)] {
            writeln!(w, "{name}.tau_mem_s = {}", p.tau_mem_s)?;
            writeln!(w, "{name}.threshold_fa = {}", p.threshold_fa)?;
            writeln!(w, "{name}.refractory_s = {}", p.refractory_s)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self, SnnError> {
        let text = std::fs::read_to_string(path)?;
        let mut result = CalibrationResult::reference();
        let mut seen_schema = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(SnnError::MalformedCalibration {
                line: idx + 1,
                msg: format!("expected `key = value`, got {line:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |msg: String| SnnError::MalformedCalibration { line: idx + 1, msg };
            let parse = |v: &str| v.parse::<f64>().map_err(|e| bad(format!("{e}")));
            match key {
                "schema" => {
                    if value != "1" {
                        return Err(bad(format!("unsupported schema {value}")));
                    }
                    seen_schema = true;
                }
                "drive_mode" => result.drive_mode = value.parse().map_err(bad)?,
                "poisson_rate_hz" => result.poisson_rate_hz = parse(value)?,
                "poiss_gi.weight_fa" => result.poiss_gi_weight_fa = parse(value)?,
                "sl.tau_mem_s" => result.sl.tau_mem_s = parse(value)?,
                "sl.threshold_fa" => result.sl.threshold_fa = parse(value)?,
                "sl.refractory_s" => result.sl.refractory_s = parse(value)?,
                "di.tau_mem_s" => result.di.tau_mem_s = parse(value)?,
                "di.threshold_fa" => result.di.threshold_fa = parse(value)?,
                "di.refractory_s" => result.di.refractory_s = parse(value)?,
                "gi.tau_mem_s" => result.gi.tau_mem_s = parse(value)?,
                "gi.threshold_fa" => result.gi.threshold_fa = parse(value)?,
                "gi.refractory_s" => result.gi.refractory_s = parse(value)?,
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        if !seen_schema {
            return Err(SnnError::MalformedCalibration {
                line: 0,
                msg: "missing `schema = 1`".into(),
            });
        }
        Ok(result)
    }
}

/// Silent intervals of a spike train within `[t_begin, t_end]`, including
/// the leading and trailing ones.
pub fn silent_gaps(spikes: &[f64], t_begin: f64, t_end: f64) -> Vec<(f64, f64)> {
    let mut gaps = Vec::new();
    let mut prev = t_begin;
    for &t in spikes {
        if t < t_begin {
            prev = t.max(prev);
            continue;
        }
        if t > t_end {
            break;
        }
        if t > prev {
            gaps.push((prev, t));
        }
        prev = t;
    }
    if t_end > prev {
        gaps.push((prev, t_end));
    }
    gaps
}
