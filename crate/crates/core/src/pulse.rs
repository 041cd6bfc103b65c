//! Heartbeat detection for photoplethysmogram streams.
//!
//! A fingertip LED/photodiode pair reports opacity a few dozen times a
//! second; each heart beat pushes a surge of blood through the finger and
//! the opacity rises sharply. [`Detector`] scores each sample with the
//! windowed delta `W = s[n] − s[n−w]` — the sum of the changes across the
//! last `w` steps, collapsed by telescoping — and calls a beat when `W`
//! spikes above an adaptive multiple of its own recent magnitude.
//!
//! Because `W` is a difference, a constant sensor offset cancels exactly,
//! and because the threshold is proportional to a running baseline of
//! `|W|`, rescaling the signal rescales both sides equally: the detector
//! needs no per-user calibration as long as [`DetectorConfig::threshold_floor`]
//! stays at zero.

use thiserror::Error;

/// One photoplethysmogram reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSample {
    /// Milliseconds on the sender's clock; strictly increasing per stream.
    pub t: u64,
    /// Raw opacity in whatever units the sensor reports.
    pub value: f64,
}

/// Detector tuning. [`Default`] is sized for a 100 Hz fingertip sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Nominal samples per second; sets the window length in samples.
    pub sample_rate_hz: f64,
    /// Span of the windowed delta. At the default rate this is 15 samples,
    /// roughly the rising edge of a pulse wave.
    pub window_ms: u64,
    /// Trigger when `W` exceeds this multiple of the baseline.
    pub gain: f64,
    /// Half-life of the exponential baseline over `|W|`.
    pub baseline_halflife_ms: u64,
    /// Dead time after a beat; 250 ms caps the reportable rate at 240 bpm.
    pub refractory_ms: u64,
    /// No beats within this long of the first sample, while the baseline
    /// is still settling.
    pub warmup_ms: u64,
    /// Absolute floor under the adaptive threshold. Zero keeps the
    /// detector fully scale-invariant; raise it only to reject the noise
    /// floor of a disconnected sensor.
    pub threshold_floor: f64,
    /// Flip the signal first, for sensors where a beat reads as a drop.
    pub invert: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 100.0,
            window_ms: 150,
            gain: 3.0,
            baseline_halflife_ms: 2000,
            refractory_ms: 250,
            warmup_ms: 2000,
            threshold_floor: 0.0,
            invert: false,
        }
    }
}

/// One detected beat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeartbeatEvent {
    /// Timestamp of the sample that fired, in stream milliseconds.
    pub t: u64,
    /// The windowed delta at the trigger; grows with pulse amplitude.
    pub strength: f64,
}

/// Beats averaged per [`estimate_bpm`] call unless the caller says otherwise.
pub const DEFAULT_BPM_WINDOW: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PulseError {
    #[error("sample at {next} ms does not advance past {prev} ms")]
    NonMonotonicTime { prev: u64, next: u64 },
    #[error("windowed delta at index {index} needs {window} earlier samples")]
    InsufficientHistory { index: usize, window: usize },
    #[error("bpm estimate needs at least {need} beats, have {have}")]
    InsufficientEvents { have: usize, need: usize },
    #[error("bad detector config: {0}")]
    BadConfig(&'static str),
}

/// `samples[index] − samples[index − w]`: the telescoped sum of the last
/// `w` one-step changes ending at `index`.
pub fn windowed_delta(samples: &[f64], index: usize, w: usize) -> Result<f64, PulseError> {
    if w == 0 {
        return Err(PulseError::BadConfig("window must span at least one step"));
    }
    if index >= samples.len() || index < w {
        return Err(PulseError::InsufficientHistory { index, window: w });
    }
    Ok(samples[index] - samples[index - w])
}

/// Streaming beat detector; feed samples in time order.
#[derive(Debug, Clone)]
pub struct Detector {
    config: DetectorConfig,
    /// Window span in samples, derived from `window_ms` and the rate.
    w: usize,
    /// The last `w + 1` values, oldest first.
    history: std::collections::VecDeque<f64>,
    /// Exponential average of `|W|`.
    baseline: f64,
    first_t: Option<u64>,
    prev_t: Option<u64>,
    last_beat_t: Option<u64>,
}

impl Detector {
    pub fn new(config: DetectorConfig) -> Result<Self, PulseError> {
        if !(config.sample_rate_hz.is_finite() && config.sample_rate_hz > 0.0) {
            return Err(PulseError::BadConfig("sample rate must be positive"));
        }
        if config.window_ms == 0 {
            return Err(PulseError::BadConfig("window must be positive"));
        }
        if !(config.gain.is_finite() && config.gain > 0.0) {
            return Err(PulseError::BadConfig("gain must be positive"));
        }
        if config.baseline_halflife_ms == 0 {
            return Err(PulseError::BadConfig("baseline half-life must be positive"));
        }
        if !(config.threshold_floor.is_finite() && config.threshold_floor >= 0.0) {
            return Err(PulseError::BadConfig(
                "threshold floor must be non-negative",
            ));
        }
        let w =
            ((config.window_ms as f64 * config.sample_rate_hz / 1000.0).round() as usize).max(1);
        Ok(Self {
            config,
            w,
            history: std::collections::VecDeque::with_capacity(w + 1),
            baseline: 0.0,
            first_t: None,
            prev_t: None,
            last_beat_t: None,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    /// Window span in samples.
    pub fn window_samples(&self) -> usize {
        self.w
    }

    /// Current baseline estimate of `|W|`; zero until history fills.
    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    /// Consume one sample; `Some` when it completes a beat.
    ///
    /// The trigger compares `W` against the baseline as it stood *before*
    /// this sample, then folds `|W|` in — so a spike cannot raise the bar
    /// against itself.
    pub fn process_sample(
        &mut self,
        sample: PulseSample,
    ) -> Result<Option<HeartbeatEvent>, PulseError> {
        if let Some(prev) = self.prev_t {
            if sample.t <= prev {
                return Err(PulseError::NonMonotonicTime {
                    prev,
                    next: sample.t,
                });
            }
        }
        let first_t = *self.first_t.get_or_insert(sample.t);
        let dt_ms = self.prev_t.map(|prev| sample.t - prev).unwrap_or(0);
        self.prev_t = Some(sample.t);

        let value = if self.config.invert {
            -sample.value
        } else {
            sample.value
        };
        self.history.push_back(value);
        if self.history.len() < self.w + 1 {
            return Ok(None);
        }
        if self.history.len() > self.w + 1 {
            self.history.pop_front();
        }
        let delta = self.history.back().unwrap() - self.history.front().unwrap();

        let warmed_up = sample.t - first_t >= self.config.warmup_ms;
        let refractory_clear = self
            .last_beat_t
            .map(|last| sample.t - last >= self.config.refractory_ms)
            .unwrap_or(true);
        let over_threshold =
            delta > self.config.gain * self.baseline && delta > self.config.threshold_floor;

        let event = if warmed_up && refractory_clear && over_threshold {
            self.last_beat_t = Some(sample.t);
            Some(HeartbeatEvent {
                t: sample.t,
                strength: delta,
            })
        } else {
            None
        };

        // Half-life form: after `halflife` ms of updates the old baseline
        // retains half its weight regardless of sample spacing.
        let alpha = 1.0 - 0.5_f64.powf(dt_ms as f64 / self.config.baseline_halflife_ms as f64);
        self.baseline += alpha * (delta.abs() - self.baseline);

        Ok(event)
    }
}

/// Instantaneous rate from the most recent beat intervals.
///
/// Averages the last `window_beats` intervals (fewer if the stream is
/// young): `bpm = 60000 · n / (t_last − t_first_of_window)`. Two beats is
/// the minimum; pass [`DEFAULT_BPM_WINDOW`] unless you have a reason.
pub fn estimate_bpm(events: &[HeartbeatEvent], window_beats: usize) -> Result<f64, PulseError> {
    if window_beats == 0 {
        return Err(PulseError::BadConfig("bpm window must be positive"));
    }
    if events.len() < 2 {
        return Err(PulseError::InsufficientEvents {
            have: events.len(),
            need: 2,
        });
    }
    let intervals = window_beats.min(events.len() - 1);
    let last = events[events.len() - 1].t;
    let first = events[events.len() - 1 - intervals].t;
    if last <= first {
        return Err(PulseError::NonMonotonicTime {
            prev: first,
            next: last,
        });
    }
    Ok(60_000.0 * intervals as f64 / (last - first) as f64)
}
