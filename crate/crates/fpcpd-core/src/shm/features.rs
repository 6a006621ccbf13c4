use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::tensor::DenseTensor3;

/// Raw time-domain vibration events: one fixed-length signal per
/// (sensor, event) pair, sampled at `sample_rate` Hz.
#[derive(Debug, Clone)]
pub struct EventMatrix {
    sensors: usize,
    samples: usize,
    events: usize,
    sample_rate: f64,
    /// Layout `[event][sensor][sample]`.
    data: Vec<f64>,
}

impl EventMatrix {
    pub fn new(
        sensors: usize,
        samples: usize,
        events: usize,
        sample_rate: f64,
        data: Vec<f64>,
    ) -> Result<Self> {
        if sensors == 0 || samples == 0 || events == 0 {
            return Err(Error::InvalidDimensions(format!(
                "sensors, samples and events must be positive, got ({sensors}, {samples}, {events})"
            )));
        }
        if sample_rate <= 0.0 {
            return Err(Error::InvalidConfig("sample_rate must be positive".into()));
        }
        let expected = sensors * samples * events;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "expected {expected} samples, got {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: pos,
                value: data[pos],
            });
        }
        Ok(Self {
            sensors,
            samples,
            events,
            sample_rate,
            data,
        })
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn events(&self) -> usize {
        self.events
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn signal(&self, event: usize, sensor: usize) -> &[f64] {
        let base = (event * self.sensors + sensor) * self.samples;
        &self.data[base..base + self.samples]
    }
}

/// Frequency-domain feature tensor plus degeneracy metadata.
#[derive(Debug, Clone)]
pub struct FeatureTensor {
    /// Shaped features x locations x events.
    pub tensor: DenseTensor3,
    /// `(sensor, event)` pairs whose signal was constant; their feature
    /// vector is all-zero rather than NaN from the z-score.
    pub degenerate: Vec<(usize, usize)>,
}

/// Per (sensor, event): z-score the time signal to zero mean and unit
/// standard deviation, run an FFT, and keep the magnitudes of the first
/// `keep_bins` positive-frequency bins (DFT bins `1..=keep_bins`).
///
/// Scaling a signal by any positive constant leaves its features
/// unchanged (the z-score absorbs gain); constant signals yield zero
/// features and are reported in `degenerate`.
pub fn extract_features(ev: &EventMatrix, keep_bins: usize) -> Result<FeatureTensor> {
    if keep_bins == 0 || keep_bins > ev.samples / 2 {
        return Err(Error::InvalidConfig(format!(
            "keep_bins must be in 1..={} (half the signal length), got {keep_bins}",
            ev.samples / 2
        )));
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(ev.samples);
    let mut buf = vec![Complex::new(0.0, 0.0); ev.samples];

    let mut tensor = DenseTensor3::zeros((keep_bins, ev.sensors, ev.events))?;
    let mut degenerate = Vec::new();
    for e in 0..ev.events {
        for s in 0..ev.sensors {
            let signal = ev.signal(e, s);
            let n = signal.len() as f64;
            let mean = signal.iter().sum::<f64>() / n;
            let var = signal.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            if std < 1e-12 * (1.0 + mean.abs()) {
                degenerate.push((s, e));
                continue; // features stay zero
            }
            for (slot, x) in buf.iter_mut().zip(signal) {
                *slot = Complex::new((x - mean) / std, 0.0);
            }
            fft.process(&mut buf);
            for bin in 1..=keep_bins {
                let off = tensor.offset(bin - 1, s, e);
                tensor.values_mut()[off] = buf[bin].norm();
            }
        }
    }
    Ok(FeatureTensor { tensor, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sinusoid(samples: usize, bin: usize, amp: f64) -> Vec<f64> {
        (0..samples)
            .map(|n| amp * (std::f64::consts::TAU * bin as f64 * n as f64 / samples as f64).sin())
            .collect()
    }

    #[test]
    fn pure_sinusoid_peaks_at_its_bin() {
        let samples = 128;
        let bin = 9;
        let ev = EventMatrix::new(1, samples, 1, 128.0, sinusoid(samples, bin, 2.5)).unwrap();
        let out = extract_features(&ev, 64).unwrap();
        assert!(out.degenerate.is_empty());
        let feats: Vec<f64> = (0..64).map(|f| out.tensor.get(f, 0, 0)).collect();
        let peak = feats[bin - 1];
        for (idx, v) in feats.iter().enumerate() {
            if idx != bin - 1 {
                assert!(*v < 0.01 * peak, "bin {} leaked {v} (peak {peak})", idx + 1);
            }
        }
    }

    #[test]
    fn features_are_scale_invariant() {
        let samples = 64;
        let mut signal = sinusoid(samples, 5, 1.0);
        for (n, v) in signal.iter_mut().enumerate() {
            *v += 0.3 * (std::f64::consts::TAU * 11.0 * n as f64 / samples as f64).cos();
        }
        let scaled: Vec<f64> = signal.iter().map(|v| v * 37.5).collect();
        let base = EventMatrix::new(1, samples, 1, 64.0, signal).unwrap();
        let big = EventMatrix::new(1, samples, 1, 64.0, scaled).unwrap();
        let f1 = extract_features(&base, 32).unwrap();
        let f2 = extract_features(&big, 32).unwrap();
        for f in 0..32 {
            let (a, b) = (f1.tensor.get(f, 0, 0), f2.tensor.get(f, 0, 0));
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn constant_signal_yields_zero_features_and_flag() {
        let samples = 32;
        let mut data = sinusoid(samples, 3, 1.0);
        data.extend(std::iter::repeat(4.2).take(samples));
        let ev = EventMatrix::new(2, samples, 1, 32.0, data).unwrap();
        let out = extract_features(&ev, 16).unwrap();
        assert_eq!(out.degenerate, vec![(1, 0)]);
        for f in 0..16 {
            assert_eq!(out.tensor.get(f, 1, 0), 0.0);
        }
        assert!((0..16).any(|f| out.tensor.get(f, 0, 0) > 0.0));
    }

    #[test]
    fn keep_bins_bounds_are_enforced() {
        let ev = EventMatrix::new(1, 32, 1, 32.0, sinusoid(32, 3, 1.0)).unwrap();
        assert!(extract_features(&ev, 0).is_err());
        assert!(extract_features(&ev, 17).is_err());
        assert!(extract_features(&ev, 16).is_ok());
    }

    #[test]
    fn tensor_shape_is_features_by_sensors_by_events() {
        let sensors = 3;
        let samples = 64;
        let events = 5;
        let mut data = Vec::new();
        for e in 0..events {
            for s in 0..sensors {
                data.extend(sinusoid(samples, 2 + s + e, 1.0));
            }
        }
        let ev = EventMatrix::new(sensors, samples, events, 64.0, data).unwrap();
        let out = extract_features(&ev, 20).unwrap();
        assert_eq!(out.tensor.dims(), (20, 3, 5));
    }
}
