//! Signal-to-spike conversion with a simulated asynchronous delta modulator,
//! plus the staircase decoder and UP-DN cycle segmentation used to
//! characterize spike trains.
//!
//! The modulator is tick-synchronous: an error accumulates the input change
//! at every oversampling tick and an UP (DN) spike is emitted when it rises
//! above (falls below) the threshold. On emission the error resets to zero
//! and stays there for the refractory period; input changes during the hold
//! are discarded and tracking resumes afterwards.

use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdmError {
    #[error("invalid config: threshold must be > 0 and tick < refractory (threshold={threshold}, tick={tick}, refractory={refractory})")]
    InvalidConfig { threshold: f64, tick: f64, refractory: f64 },
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("spike train violates ordering/refractory at event {index}")]
    InvalidTrain { index: usize },
    #[error("malformed spike CSV at line {line}: {msg}")]
    MalformedCsv { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Spike polarity: positive (UP) or negative (DN) signal excursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Up,
    Dn,
}

impl Polarity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Polarity::Up => "UP",
            Polarity::Dn => "DN",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeEvent {
    pub time_s: f64,
    pub polarity: Polarity,
}

/// Delta-modulator parameters. The default tick is the 35 kHz oversampling
/// period and the default refractory period 300 us.
#[derive(Debug, Clone, Copy)]
pub struct AdmConfig {
    pub threshold_uv: f64,
    pub refractory_s: f64,
    pub tick_s: f64,
}

pub const DEFAULT_REFRACTORY_S: f64 = 300e-6;
pub const DEFAULT_TICK_S: f64 = 1.0 / crate::dsp::OVERSAMPLE_RATE_HZ;

impl AdmConfig {
    pub fn new(threshold_uv: f64) -> Self {
        AdmConfig {
            threshold_uv,
            refractory_s: DEFAULT_REFRACTORY_S,
            tick_s: DEFAULT_TICK_S,
        }
    }

    pub fn validate(&self) -> Result<(), AdmError> {
        if self.threshold_uv > 0.0 && self.tick_s > 0.0 && self.tick_s < self.refractory_s {
            Ok(())
        } else {
            Err(AdmError::InvalidConfig {
                threshold: self.threshold_uv,
                tick: self.tick_s,
                refractory: self.refractory_s,
            })
        }
    }

    /// Ticks the encoder stays silent after a spike (first active tick is
    /// the first one at or past the refractory period).
    pub fn refractory_ticks(&self) -> u64 {
        ((self.refractory_s / self.tick_s).ceil() as u64).max(1)
    }
}

/// Time-ordered UP/DN event stream from a single modulator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpikeTrain {
    events: Vec<SpikeEvent>,
}

impl SpikeTrain {
    /// Wraps a pre-built event list, checking strict time ordering and the
    /// minimum separation between consecutive events.
    pub fn from_events(events: Vec<SpikeEvent>, min_separation_s: f64) -> Result<Self, AdmError> {
        for i in 1..events.len() {
            let dt = events[i].time_s - events[i - 1].time_s;
            if dt <= 0.0 || dt + 1e-12 < min_separation_s {
                return Err(AdmError::InvalidTrain { index: i });
            }
        }
        Ok(SpikeTrain { events })
    }

    pub fn events(&self) -> &[SpikeEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// (UP count, DN count).
    pub fn counts(&self) -> (usize, usize) {
        let ups = self.events.iter().filter(|e| e.polarity == Polarity::Up).count();
        (ups, self.events.len() - ups)
    }

    /// Splits into UP and DN timestamp vectors, preserving order.
    pub fn split(&self) -> (Vec<f64>, Vec<f64>) {
        let mut up = Vec::new();
        let mut dn = Vec::new();
        for e in &self.events {
            match e.polarity {
                Polarity::Up => up.push(e.time_s),
                Polarity::Dn => dn.push(e.time_s),
            }
        }
        (up, dn)
    }

    pub fn first_time(&self) -> Option<f64> {
        self.events.first().map(|e| e.time_s)
    }

    pub fn last_time(&self) -> Option<f64> {
        self.events.last().map(|e| e.time_s)
    }

    /// Writes the event CSV (`timestamp_s,polarity`).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), AdmError> {
        writeln!(w, "timestamp_s,polarity")?;
        for e in &self.events {
            writeln!(w, "{:.6},{}", e.time_s, e.polarity.as_str())?;
        }
        Ok(())
    }

    pub fn write_csv_file<P: AsRef<Path>>(&self, path: P) -> Result<(), AdmError> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, AdmError> {
        let mut events = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 {
                if line.trim() != "timestamp_s,polarity" {
                    return Err(AdmError::MalformedCsv {
                        line: 1,
                        msg: format!("unexpected header {line:?}"),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(2, ',');
            let t: f64 = parts
                .next()
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| AdmError::MalformedCsv { line: i + 1, msg: format!("{e}") })?;
            let polarity = match parts.next().map(str::trim) {
                Some("UP") => Polarity::Up,
                Some("DN") => Polarity::Dn,
                other => {
                    return Err(AdmError::MalformedCsv {
                        line: i + 1,
                        msg: format!("bad polarity {other:?}"),
                    })
                }
            };
            events.push(SpikeEvent { time_s: t, polarity });
        }
        Ok(SpikeTrain { events })
    }
}

/// Incremental modulator; one instance per channel. `set_threshold` supports
/// the rolling baseline mode without resetting the error state.
#[derive(Debug, Clone)]
pub struct Modulator {
    threshold_uv: f64,
    refractory_ticks: u64,
    tick_s: f64,
    error: f64,
    prev: Option<f64>,
    resume_tick: u64,
    tick: u64,
}

impl Modulator {
    pub fn new(cfg: &AdmConfig) -> Result<Self, AdmError> {
        cfg.validate()?;
        Ok(Modulator {
            threshold_uv: cfg.threshold_uv,
            refractory_ticks: cfg.refractory_ticks(),
            tick_s: cfg.tick_s,
            error: 0.0,
            prev: None,
            resume_tick: 0,
            tick: 0,
        })
    }

    pub fn set_threshold(&mut self, threshold_uv: f64) {
        self.threshold_uv = threshold_uv;
    }

    /// Feeds one sample; returns the emitted spike, if any.
    pub fn step(&mut self, sample: f64) -> Option<SpikeEvent> {
        let n = self.tick;
        self.tick += 1;
        let prev = match self.prev {
            Some(p) => p,
            None => {
                self.prev = Some(sample);
                return None;
            }
        };
        self.prev = Some(sample);
        if n < self.resume_tick {
            return None; // error held at zero, change discarded
        }
        self.error += sample - prev;
        let polarity = if self.error > self.threshold_uv {
            Polarity::Up
        } else if self.error < -self.threshold_uv {
            Polarity::Dn
        } else {
            return None;
        };
        self.error = 0.0;
        self.resume_tick = n + self.refractory_ticks;
        Some(SpikeEvent { time_s: n as f64 * self.tick_s, polarity })
    }
}

/// Encodes a full signal sampled at the tick rate into a spike train.
pub fn encode(signal: &[f64], cfg: &AdmConfig) -> Result<SpikeTrain, AdmError> {
    if let Some(idx) = signal.iter().position(|v| !v.is_finite()) {
        return Err(AdmError::NonFiniteSample(idx));
    }
    let mut m = Modulator::new(cfg)?;
    let mut events = Vec::new();
    for &x in signal {
        if let Some(e) = m.step(x) {
            events.push(e);
        }
    }
    Ok(SpikeTrain { events })
}

/// Staircase reconstruction of a spike train:
/// `r(t) = initial + threshold * (#UP <= t) - threshold * (#DN <= t)`.
#[derive(Debug, Clone)]
pub struct StepReconstruction {
    times: Vec<f64>,
    values: Vec<f64>,
    initial_uv: f64,
}

impl StepReconstruction {
    pub fn value_at(&self, t: f64) -> f64 {
        match self.times.partition_point(|x| *x <= t) {
            0 => self.initial_uv,
            k => self.values[k - 1],
        }
    }

    pub fn final_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(self.initial_uv)
    }
}

pub fn decode(train: &SpikeTrain, cfg: &AdmConfig, initial_uv: f64) -> StepReconstruction {
    let mut times = Vec::with_capacity(train.len());
    let mut values = Vec::with_capacity(train.len());
    let mut v = initial_uv;
    for e in train.events() {
        v += match e.polarity {
            Polarity::Up => cfg.threshold_uv,
            Polarity::Dn => -cfg.threshold_uv,
        };
        times.push(e.time_s);
        values.push(v);
    }
    StepReconstruction { times, values, initial_uv }
}

/// A burst of UP spikes followed by a burst of DN spikes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpDnCycle {
    pub start_s: f64,
    pub end_s: f64,
    pub up_count: usize,
    pub dn_count: usize,
}

/// Greedy left-to-right segmentation: each cycle is a maximal UP run
/// followed by a maximal DN run. Leading DN runs and a trailing unpaired UP
/// run are not cycles.
pub fn segment_cycles(train: &SpikeTrain) -> Vec<UpDnCycle> {
    let ev = train.events();
    let mut cycles = Vec::new();
    let mut i = 0;
    while i < ev.len() {
        if ev[i].polarity != Polarity::Up {
            i += 1;
            continue;
        }
        let up_start = i;
        while i < ev.len() && ev[i].polarity == Polarity::Up {
            i += 1;
        }
        if i >= ev.len() {
            break; // trailing UP run has no DN burst
        }
        let dn_start = i;
        while i < ev.len() && ev[i].polarity == Polarity::Dn {
            i += 1;
        }
        cycles.push(UpDnCycle {
            start_s: ev[up_start].time_s,
            end_s: ev[i - 1].time_s,
            up_count: dn_start - up_start,
            dn_count: i - dn_start,
        });
    }
    cycles
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(threshold: f64) -> AdmConfig {
        AdmConfig::new(threshold)
    }

    fn train_of(polarities: &[Polarity]) -> SpikeTrain {
        let events = polarities
            .iter()
            .enumerate()
            .map(|(i, p)| SpikeEvent { time_s: i as f64 * 0.001, polarity: *p })
            .collect();
        SpikeTrain::from_events(events, 0.0005).unwrap()
    }

    #[test]
    fn constant_signal_is_silent() {
        let x = vec![4.2; 2000];
        let t = encode(&x, &cfg(0.5)).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn tick_must_be_smaller_than_refractory() {
        let bad = AdmConfig { threshold_uv: 1.0, refractory_s: 1e-5, tick_s: DEFAULT_TICK_S };
        assert!(bad.validate().is_err());
    }

    /// Step-by-step reference recursion, written independently of the
    /// `Modulator` state machine.
    fn reference_encode(signal: &[f64], threshold: f64) -> Vec<(u64, Polarity)> {
        let refr = 11u64; // ceil(300e-6 * 35000)
        let mut out = Vec::new();
        let mut err = 0.0;
        let mut resume = 0u64;
        for n in 1..signal.len() as u64 {
            if n < resume {
                continue;
            }
            err += signal[n as usize] - signal[n as usize - 1];
            if err > threshold {
                out.push((n, Polarity::Up));
                err = 0.0;
                resume = n + refr;
            } else if err < -threshold {
                out.push((n, Polarity::Dn));
                err = 0.0;
                resume = n + refr;
            }
        }
        out
    }

    #[test]
    fn linear_ramp_spike_count_matches_reference() {
        let fs = 35_000.0;
        let n = 35_000;
        let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect(); // 0..1 uV over 1 s
        let t = encode(&x, &cfg(0.1)).unwrap();
        let (ups, dns) = t.counts();
        assert_eq!(dns, 0);
        assert!((9..=10).contains(&ups), "got {ups} UP spikes");

        let oracle = reference_encode(&x, 0.1);
        assert_eq!(t.len(), oracle.len());
        for (e, (tick, pol)) in t.events().iter().zip(&oracle) {
            assert_eq!(e.polarity, *pol);
            assert!((e.time_s - *tick as f64 / fs).abs() < 1e-12);
        }
        // roughly 100 ms spacing
        for pair in t.events().windows(2) {
            let gap = pair[1].time_s - pair[0].time_s;
            assert!((0.099..=0.102).contains(&gap), "gap {gap}");
        }
    }

    #[test]
    fn symmetric_sinusoid_balances_polarities() {
        let fs = 35_000.0;
        let x: Vec<f64> = (0..(fs as usize))
            .map(|i| 3.0 * (2.0 * std::f64::consts::PI * 8.0 * i as f64 / fs).sin())
            .collect(); // 8 full periods
        let t = encode(&x, &cfg(0.5)).unwrap();
        let (ups, dns) = t.counts();
        assert!(ups > 0);
        assert!((ups as i64 - dns as i64).abs() <= 1, "{ups} vs {dns}");
    }

    #[test]
    fn refractory_separation_holds() {
        let fs = 35_000.0;
        let x: Vec<f64> = (0..(fs as usize / 2))
            .map(|i| 10.0 * (2.0 * std::f64::consts::PI * 300.0 * i as f64 / fs).sin())
            .collect();
        let t = encode(&x, &cfg(0.2)).unwrap();
        assert!(t.len() > 10);
        for pair in t.events().windows(2) {
            assert!(pair[1].time_s - pair[0].time_s >= 300e-6 - 1.0 / fs - 1e-12);
        }
    }

    #[test]
    fn polarity_antisymmetry_is_exact() {
        let fs = 35_000.0;
        let x: Vec<f64> = (0..7000)
            .map(|i| {
                let t = i as f64 / fs;
                1.3 * (2.0 * std::f64::consts::PI * 170.0 * t).sin()
                    + 0.7 * (2.0 * std::f64::consts::PI * 45.0 * t + 1.0).cos()
            })
            .collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let a = encode(&x, &cfg(0.4)).unwrap();
        let b = encode(&neg, &cfg(0.4)).unwrap();
        assert_eq!(a.len(), b.len());
        for (ea, eb) in a.events().iter().zip(b.events()) {
            assert_eq!(ea.time_s, eb.time_s);
            assert_ne!(ea.polarity, eb.polarity);
        }
    }

    #[test]
    fn threshold_scale_covariance() {
        let fs = 35_000.0;
        let x: Vec<f64> = (0..7000)
            .map(|i| 2.0 * (2.0 * std::f64::consts::PI * 90.0 * i as f64 / fs).sin())
            .collect();
        let base = encode(&x, &cfg(0.5)).unwrap();
        for a in [0.5_f64, 2.0, 4.0] {
            let scaled: Vec<f64> = x.iter().map(|v| a * v).collect();
            let t = encode(&scaled, &cfg(a * 0.5)).unwrap();
            assert_eq!(t, base, "scale {a}");
        }
    }

    #[test]
    fn decode_empty_train_is_constant() {
        let r = decode(&SpikeTrain::default(), &cfg(0.1), 2.5);
        assert_eq!(r.value_at(0.0), 2.5);
        assert_eq!(r.value_at(100.0), 2.5);
    }

    #[test]
    fn decode_counts_threshold_quanta() {
        use Polarity::*;
        let t = train_of(&[Up, Up, Up, Dn]);
        let r = decode(&t, &cfg(0.1), 1.0);
        assert!((r.final_value() - 1.2).abs() < 1e-12);
        assert!((r.value_at(0.0015) - 1.2).abs() < 1e-12); // after 2 UP
    }

    #[test]
    fn cycles_from_mixed_train() {
        use Polarity::*;
        let t = train_of(&[Up, Up, Dn, Dn, Up, Dn]);
        let c = segment_cycles(&t);
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].up_count, c[0].dn_count), (2, 2));
        assert_eq!((c[1].up_count, c[1].dn_count), (1, 1));
    }

    #[test]
    fn leading_dn_and_trailing_up_are_not_cycles() {
        use Polarity::*;
        assert!(segment_cycles(&train_of(&[Dn, Dn])).is_empty());
        assert!(segment_cycles(&train_of(&[Up, Up])).is_empty());
        let c = segment_cycles(&train_of(&[Dn, Up, Dn, Up]));
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn cycle_segmentation_matches_run_length_oracle() {
        // deterministic pseudo-random polarity sequence
        let mut state = 1234567_u64;
        let mut polarities = Vec::new();
        for _ in 0..500 {
            state = state.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            polarities.push(if state >> 63 == 0 { Polarity::Up } else { Polarity::Dn });
        }
        let t = train_of(&polarities);
        let got = segment_cycles(&t);

        // independent run-length pass
        let mut runs: Vec<(Polarity, usize)> = Vec::new();
        for p in &polarities {
            match runs.last_mut() {
                Some((rp, n)) if rp == p => *n += 1,
                _ => runs.push((*p, 1)),
            }
        }
        let mut expected = 0;
        let mut k = 0;
        while k + 1 < runs.len() {
            if runs[k].0 == Polarity::Up && runs[k + 1].0 == Polarity::Dn {
                expected += 1;
                k += 2;
            } else {
                k += 1;
            }
        }
        assert_eq!(got.len(), expected);
    }

    #[test]
    fn reconstruction_tracks_band_limited_signal() {
        let fs = 35_000.0;
        let threshold = 1.0;
        let comps = [(5.0, 0.35), (11.0, 0.3), (17.0, 0.2)];
        let x: Vec<f64> = (0..(2 * fs as usize))
            .map(|i| {
                let t = i as f64 / fs;
                comps
                    .iter()
                    .map(|(f, a)| a * (2.0 * std::f64::consts::PI * f * t).sin())
                    .sum()
            })
            .collect();
        let c = cfg(threshold);
        let train = encode(&x, &c).unwrap();
        assert!(!train.is_empty());
        let r = decode(&train, &c, x[0]);
        let max_slope: f64 = comps.iter().map(|(f, a)| a * 2.0 * std::f64::consts::PI * f).sum();
        let bound = threshold + max_slope * c.refractory_s;
        for (i, &v) in x.iter().enumerate() {
            let err = (v - r.value_at(i as f64 / fs)).abs();
            assert!(err <= bound + 1e-9, "t={} err={err} bound={bound}", i as f64 / fs);
        }
    }

    #[test]
    fn csv_round_trip() {
        use Polarity::*;
        let t = train_of(&[Up, Dn, Up]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = SpikeTrain::read_csv(std::io::BufReader::new(buf.as_slice())).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in t.events().iter().zip(back.events()) {
            assert_eq!(a.polarity, b.polarity);
            assert!((a.time_s - b.time_s).abs() < 1e-6);
        }
    }
}
