//! Steady-state window statistics over a recorded time series.

use thiserror::Error;

use crate::engine::TimeSeries;

/// Minimum number of samples a window must contain.
pub const MIN_WINDOW_SAMPLES: usize = 10;
/// Half-width of the settling band around the nominal bus voltage (V).
pub const SETTLING_BAND: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("window [{start}, {end}] is empty or reversed")]
    EmptyWindow { start: f64, end: f64 },
    #[error("window [{start}, {end}] lies outside the recorded series [0, {t_end}]")]
    OutOfRange { start: f64, end: f64, t_end: f64 },
    #[error(
        "window [{start}, {end}] holds {count} samples, at least {MIN_WINDOW_SAMPLES} required"
    )]
    TooFewSamples { start: f64, end: f64, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub const fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, t: f64) -> bool {
        t > self.start && t < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterMetrics {
    pub mean_current: f64,
    pub mean_power: f64,
    pub mean_v_term: f64,
    pub mean_v_ref: f64,
    pub mean_comp: f64,
    /// Feeder closed for every sample of the window.
    pub connected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowMetrics {
    pub window: Window,
    pub samples: usize,
    pub mean_v_pcc: f64,
    /// Largest |v_pcc − v*_dc| inside the window.
    pub max_deviation: f64,
    pub mean_i_load: f64,
    pub mean_p_load: f64,
    pub converters: Vec<ConverterMetrics>,
    /// Largest pairwise difference of mean currents among connected converters.
    pub sharing_error: f64,
    /// Time from window start until v_pcc stays within ±0.5 V of nominal;
    /// `None` if it never settles inside the window.
    pub settling_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub windows: Vec<WindowMetrics>,
}

/// Computes statistics over samples strictly inside each window.
pub fn compute_metrics(series: &TimeSeries, windows: &[Window]) -> Result<Metrics, MetricsError> {
    let t_end = series.samples.last().map_or(0.0, |s| s.t);
    let mut out = Vec::with_capacity(windows.len());
    for &w in windows {
        if !(w.start < w.end) {
            return Err(MetricsError::EmptyWindow {
                start: w.start,
                end: w.end,
            });
        }
        if w.start < 0.0 || w.end > t_end + 1e-12 {
            return Err(MetricsError::OutOfRange {
                start: w.start,
                end: w.end,
                t_end,
            });
        }
        let inside: Vec<_> = series.samples.iter().filter(|s| w.contains(s.t)).collect();
        if inside.len() < MIN_WINDOW_SAMPLES {
            return Err(MetricsError::TooFewSamples {
                start: w.start,
                end: w.end,
                count: inside.len(),
            });
        }
        let count = inside.len() as f64;
        let mean = |f: &dyn Fn(&crate::engine::Sample) -> f64| {
            inside.iter().map(|s| f(s)).sum::<f64>() / count
        };

        let converters: Vec<ConverterMetrics> = (0..series.n_converters)
            .map(|k| ConverterMetrics {
                mean_current: mean(&|s| s.converters[k].i_branch),
                mean_power: mean(&|s| s.converters[k].p_term),
                mean_v_term: mean(&|s| s.converters[k].v_term),
                mean_v_ref: mean(&|s| s.converters[k].v_ref),
                mean_comp: mean(&|s| s.converters[k].comp),
                connected: inside.iter().all(|s| s.converters[k].connected),
            })
            .collect();

        let connected: Vec<f64> = converters
            .iter()
            .filter(|c| c.connected)
            .map(|c| c.mean_current)
            .collect();
        let sharing_error = match (
            connected.iter().copied().reduce(f64::max),
            connected.iter().copied().reduce(f64::min),
        ) {
            (Some(hi), Some(lo)) => hi - lo,
            _ => 0.0,
        };

        let nominal = series.v_dc_nominal;
        let outside_band = |v: f64| (v - nominal).abs() > SETTLING_BAND;
        let settling_time = match inside.iter().rposition(|s| outside_band(s.v_pcc)) {
            None => Some(0.0),
            Some(j) if j + 1 == inside.len() => None,
            Some(j) => Some(inside[j + 1].t - w.start),
        };

        out.push(WindowMetrics {
            window: w,
            samples: inside.len(),
            mean_v_pcc: mean(&|s| s.v_pcc),
            max_deviation: inside
                .iter()
                .map(|s| (s.v_pcc - nominal).abs())
                .fold(0.0, f64::max),
            mean_i_load: mean(&|s| s.i_load),
            mean_p_load: mean(&|s| s.p_load),
            converters,
            sharing_error,
            settling_time,
        });
    }
    Ok(Metrics { windows: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlMode;
    use crate::engine::{ConverterSample, Sample};

    fn series(v_pcc: impl Fn(f64) -> f64, n: usize) -> TimeSeries {
        let samples = (0..=n)
            .map(|k| {
                let t = k as f64 * 1e-3;
                let v = v_pcc(t);
                Sample {
                    t,
                    v_pcc: v,
                    i_load: 10.0,
                    p_load: v * 10.0,
                    mode: ControlMode::None,
                    converters: vec![
                        ConverterSample {
                            v_ref: 400.0,
                            v_term: v + 2.0,
                            i_branch: 5.0,
                            p_term: (v + 2.0) * 5.0,
                            comp: 0.0,
                            connected: true,
                        },
                        ConverterSample {
                            v_ref: 400.0,
                            v_term: v + 2.4,
                            i_branch: 6.0,
                            p_term: (v + 2.4) * 6.0,
                            comp: 0.0,
                            connected: true,
                        },
                    ],
                }
            })
            .collect();
        TimeSeries {
            v_dc_nominal: 400.0,
            n_converters: 2,
            samples,
        }
    }

    #[test]
    fn constant_series() {
        let s = series(|_| 400.0, 100);
        let m = compute_metrics(&s, &[Window::new(0.02, 0.08)]).unwrap();
        let w = &m.windows[0];
        assert_eq!(w.samples, 59);
        assert_eq!(w.mean_v_pcc, 400.0);
        assert_eq!(w.max_deviation, 0.0);
        assert_eq!(w.settling_time, Some(0.0));
        assert!((w.sharing_error - 1.0).abs() < 1e-12);
        assert_eq!(w.converters[1].mean_current, 6.0);
    }

    #[test]
    fn settling_measured_from_window_start() {
        let s = series(|t| if t < 0.0405 { 395.0 } else { 400.1 }, 100);
        let m = compute_metrics(&s, &[Window::new(0.02, 0.09)]).unwrap();
        let settle = m.windows[0].settling_time.unwrap();
        assert!((settle - 0.021).abs() < 1e-9, "{settle}");
        assert!((m.windows[0].max_deviation - 5.0).abs() < 1e-12);

        let never = series(|_| 396.0, 100);
        let m = compute_metrics(&never, &[Window::new(0.02, 0.09)]).unwrap();
        assert_eq!(m.windows[0].settling_time, None);
    }

    #[test]
    fn window_errors() {
        let s = series(|_| 400.0, 100);
        assert!(matches!(
            compute_metrics(&s, &[Window::new(0.05, 0.05)]),
            Err(MetricsError::EmptyWindow { .. })
        ));
        assert!(matches!(
            compute_metrics(&s, &[Window::new(0.05, 0.2)]),
            Err(MetricsError::OutOfRange { .. })
        ));
        assert!(matches!(
            compute_metrics(&s, &[Window::new(0.05, 0.06)]),
            Err(MetricsError::TooFewSamples { count: 9, .. })
        ));
    }
}
