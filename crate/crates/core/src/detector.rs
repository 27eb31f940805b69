//! HFO event extraction from second-layer spike rasters (15 ms window
//! concatenation) and per-channel rate reports.

use crate::snn::SpikeRaster;
use std::collections::BTreeMap;
use thiserror::Error;

/// Default window length for marking second-layer spikes as one HFO.
pub const DEFAULT_WINDOW_S: f64 = 0.015;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("channel {0:?} has zero analyzed duration")]
    ZeroDuration(String),
}

/// One detected HFO: a maximal run of marked windows. `end - start` is
/// always a whole number of windows.
#[derive(Debug, Clone, PartialEq)]
pub struct HfoEvent {
    pub channel: String,
    pub start_s: f64,
    pub end_s: f64,
    pub n_spikes: usize,
}

/// Events per analyzed minute for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRateReport {
    pub channel: String,
    pub n_events: usize,
    pub analyzed_minutes: f64,
    pub rate_per_min: f64,
}

/// Tiles the time axis into fixed windows from `t0`, marks every window
/// containing at least one second-layer spike (any neuron), and merges
/// maximal runs of marked windows into events. Spikes before `t0` (e.g.
/// simulation warm-up) are ignored.
pub fn extract_events(raster: &SpikeRaster, channel: &str, window_s: f64, t0: f64) -> Vec<HfoEvent> {
    let mut spikes = raster.second_layer_pooled();
    spikes.retain(|t| *t >= t0);
    extract_events_from_spikes(&spikes, channel, window_s, t0)
}

/// Same as [`extract_events`] over an already-pooled spike list.
pub fn extract_events_from_spikes(
    spikes: &[f64],
    channel: &str,
    window_s: f64,
    t0: f64,
) -> Vec<HfoEvent> {
    let mut windows: Vec<(i64, usize)> = Vec::new(); // (window index, spike count)
    let mut sorted: Vec<f64> = spikes.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for &t in &sorted {
        if t < t0 {
            continue;
        }
        let idx = ((t - t0) / window_s).floor() as i64;
        match windows.last_mut() {
            Some((w, n)) if *w == idx => *n += 1,
            _ => windows.push((idx, 1)),
        }
    }

    let mut events = Vec::new();
    let mut run_start = 0usize;
    for i in 0..windows.len() {
        let is_last = i + 1 == windows.len();
        let breaks = is_last || windows[i + 1].0 != windows[i].0 + 1;
        if breaks {
            let (w0, _) = windows[run_start];
            let (w1, _) = windows[i];
            events.push(HfoEvent {
                channel: channel.to_string(),
                start_s: t0 + w0 as f64 * window_s,
                end_s: t0 + (w1 + 1) as f64 * window_s,
                n_spikes: windows[run_start..=i].iter().map(|(_, n)| n).sum(),
            });
            run_start = i + 1;
        }
    }
    events
}

/// Drops events overlapping any excluded interval and subtracts the
/// intervals' time from the analyzed duration. Returns the surviving events
/// and the analyzed duration in seconds.
pub fn apply_exclusions(
    events: Vec<HfoEvent>,
    intervals: &[(f64, f64)],
    total_duration_s: f64,
) -> (Vec<HfoEvent>, f64) {
    let mut clipped: Vec<(f64, f64)> = intervals
        .iter()
        .map(|&(a, b)| (a.max(0.0), b.min(total_duration_s)))
        .filter(|(a, b)| b > a)
        .collect();
    clipped.sort_by(|x, y| x.partial_cmp(y).unwrap());
    // merge overlaps so the duration is not subtracted twice
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in clipped {
        match merged.last_mut() {
            Some((_, e)) if a <= *e => *e = e.max(b),
            _ => merged.push((a, b)),
        }
    }
    let excluded_s: f64 = merged.iter().map(|(a, b)| b - a).sum();
    let kept = events
        .into_iter()
        .filter(|ev| !merged.iter().any(|&(a, b)| ev.start_s < b && ev.end_s > a))
        .collect();
    (kept, total_duration_s - excluded_s)
}

/// Exact per-channel rates, sorted by channel label.
pub fn compute_rates(
    events: &BTreeMap<String, Vec<HfoEvent>>,
    durations_min: &BTreeMap<String, f64>,
) -> Result<Vec<ChannelRateReport>, DetectorError> {
    let mut reports = Vec::with_capacity(durations_min.len());
    for (channel, &minutes) in durations_min {
        if !(minutes > 0.0) {
            return Err(DetectorError::ZeroDuration(channel.clone()));
        }
        let n_events = events.get(channel).map_or(0, Vec::len);
        reports.push(ChannelRateReport {
            channel: channel.clone(),
            n_events,
            analyzed_minutes: minutes,
            rate_per_min: n_events as f64 / minutes,
        });
    }
    Ok(reports)
}
