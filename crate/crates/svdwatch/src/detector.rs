//! Sliding-window spectral monitor: builds the history matrix of measurement
//! changes at each time step and tracks its largest singular value against a
//! threshold.
//!
//! The history matrix at time `t` with window `w` has column `k` (1-based)
//! equal to `v^t - v^{t-k}`. An abrupt additive change of magnitude `‖a‖₂`
//! contributes a rank-1 block at onset, lifting the largest singular value by
//! `√w · ‖a‖₂` in the noiseless case and decaying over the next `w` samples.

use std::collections::VecDeque;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::MeasurementMatrix;
use crate::numerics::{self, Matrix, Vector};
use crate::sim::MeasurementFrame;

/// Which stream a detector monitors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Measurements,
    Estimates,
}

/// The window-of-changes matrix at one time step.
#[derive(Debug, Clone)]
pub struct HistoryMatrix {
    pub t: usize,
    pub w: usize,
    /// `M x w`; column `k` (1-based) is `v^t - v^{t-k}`.
    pub delta: Matrix,
}

impl HistoryMatrix {
    /// Builds the matrix from a window of exactly `w + 1` vectors ordered
    /// oldest to newest, the newest being the sample at time `t`.
    pub fn build(t: usize, window: &[Vector]) -> Result<Self> {
        if window.len() < 2 {
            return Err(Error::InvalidInput(
                "window must contain at least two vectors (w >= 1)".into(),
            ));
        }
        let w = window.len() - 1;
        let dim = window[0].len();
        if window.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidInput(
                "window vectors have mismatched dimensions".into(),
            ));
        }
        let newest = &window[w];
        let mut delta = Matrix::zeros(dim, w);
        for k in 1..=w {
            let diff = newest - &window[w - k];
            delta.set_column(k - 1, &diff);
        }
        Ok(Self { t, w, delta })
    }

    /// Largest singular value of the history matrix.
    pub fn sigma1(&self) -> Result<f64> {
        numerics::largest_singular_value(&self.delta)
    }
}

/// Detector configuration: window size, alarm threshold, monitored stream.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub w: usize,
    /// Alarm when `σ₁ > threshold`.
    pub threshold: f64,
    pub source: Source,
}

/// One monitoring decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub t: usize,
    pub sigma1: f64,
    pub alarmed: bool,
    pub threshold_used: f64,
}

/// Streaming monitor holding the last `w + 1` samples.
///
/// No verdicts are emitted until `w + 1` samples have been seen; alarms do
/// not latch, each time step is judged on its own.
#[derive(Debug, Clone)]
pub struct DetectorState {
    config: DetectorConfig,
    buffer: VecDeque<Vector>,
    samples_seen: usize,
    dim: Option<usize>,
}

impl DetectorState {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        if config.w < 1 {
            return Err(Error::InvalidInput("window size must be at least 1".into()));
        }
        if !config.threshold.is_finite() {
            return Err(Error::InvalidInput("threshold must be finite".into()));
        }
        Ok(Self {
            config,
            buffer: VecDeque::with_capacity(config.w + 2),
            samples_seen: 0,
            dim: None,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    /// Feeds one sample; returns a verdict once the warm-up window is full.
    pub fn step(&mut self, v: Vector) -> Result<Option<Verdict>> {
        numerics::check_vector(&v, "sample")?;
        match self.dim {
            None => self.dim = Some(v.len()),
            Some(dim) if dim != v.len() => {
                return Err(Error::InvalidInput(format!(
                    "sample dimension changed mid-stream: expected {dim}, got {}",
                    v.len()
                )));
            }
            _ => {}
        }
        self.buffer.push_back(v);
        if self.buffer.len() > self.config.w + 1 {
            self.buffer.pop_front();
        }
        let t = self.samples_seen;
        self.samples_seen += 1;

        if self.buffer.len() < self.config.w + 1 {
            return Ok(None);
        }
        let window: Vec<Vector> = self.buffer.iter().cloned().collect();
        let history = HistoryMatrix::build(t, &window)?;
        let sigma1 = history.sigma1()?;
        Ok(Some(Verdict {
            t,
            sigma1,
            alarmed: sigma1 > self.config.threshold,
            threshold_used: self.config.threshold,
        }))
    }
}

/// Maps a measurement stream to the state-estimate stream `x̂^t = K y^t`,
/// the input for an estimate-sourced detector.
pub fn estimate_stream(
    frames: &[MeasurementFrame],
    h: &MeasurementMatrix,
    variances: &Vector,
) -> Result<Vec<Vector>> {
    let k = numerics::weighted_pinv(&h.h, variances)?;
    frames
        .iter()
        .map(|frame| {
            if frame.y.len() != h.measurement_count() {
                return Err(Error::InvalidInput(format!(
                    "frame at t={} has {} entries, expected {}",
                    frame.t,
                    frame.y.len(),
                    h.measurement_count()
                )));
            }
            Ok(&k * &frame.y)
        })
        .collect()
}

/// σ₁ of the history matrix at every time step with a full window,
/// as `(t, σ₁)` pairs starting at `t = w`.
pub fn sigma1_trace(vectors: &[Vector], w: usize) -> Result<Vec<(usize, f64)>> {
    if w < 1 {
        return Err(Error::InvalidInput("window size must be at least 1".into()));
    }
    let mut trace = Vec::new();
    for t in w..vectors.len() {
        let history = HistoryMatrix::build(t, &vectors[t - w..=t])?;
        trace.push((t, history.sigma1()?));
    }
    Ok(trace)
}

/// Diagnostic σ₁ trace over an attacked stream. In noiseless, frozen-state
/// runs with a step attack at `t_a`, the value at `t_a + j` is
/// `√(w - j) · ‖a‖₂` for `j < w` and zero afterwards.
pub fn post_attack_profile(frames: &[MeasurementFrame], w: usize) -> Result<Vec<(usize, f64)>> {
    let vectors: Vec<Vector> = frames.iter().map(|f| f.y.clone()).collect();
    sigma1_trace(&vectors, w)
}

/// Robust noise-level estimate for the auto threshold: the scaled median
/// absolute deviation of pooled first-difference entries, divided by √2 to
/// undo the differencing. Assumes the stream is mostly change-free.
///
/// Returns `None` when fewer than two samples are available or the stream is
/// exactly constant.
pub fn estimate_noise_std(vectors: &[Vector]) -> Option<f64> {
    if vectors.len() < 2 {
        return None;
    }
    let mut diffs: Vec<f64> = vectors
        .windows(2)
        .flat_map(|pair| (&pair[1] - &pair[0]).iter().copied().collect::<Vec<f64>>())
        .collect();
    let median = |values: &mut [f64]| -> f64 {
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let mid = values.len() / 2;
        if values.len().is_multiple_of(2) {
            0.5 * (values[mid - 1] + values[mid])
        } else {
            values[mid]
        }
    };
    let center = median(&mut diffs);
    let mut deviations: Vec<f64> = diffs.iter().map(|d| (d - center).abs()).collect();
    let mad = median(&mut deviations);
    if mad == 0.0 {
        return None;
    }
    // 1.4826 makes the MAD consistent for Gaussian data; √2 removes the
    // variance doubling of first differences.
    Some(1.4826 * mad / std::f64::consts::SQRT_2)
}

/// Writes verdicts as CSV with header `t,sigma1,alarm,threshold`
/// (alarm encoded as 0/1).
pub fn write_verdicts_csv<P: AsRef<Path>>(path: P, verdicts: &[Verdict]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    write_verdicts(&mut out, verdicts)
}

/// Writes the verdict CSV to any writer; see [`write_verdicts_csv`].
pub fn write_verdicts<W: Write>(out: &mut W, verdicts: &[Verdict]) -> Result<()> {
    writeln!(out, "t,sigma1,alarm,threshold")?;
    for v in verdicts {
        writeln!(
            out,
            "{},{},{},{}",
            v.t,
            crate::sim::format_float(v.sigma1),
            u8::from(v.alarmed),
            crate::sim::format_float(v.threshold_used)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_h_matrix, make_unobservable_attack, GridModel};
    use crate::sim::{
        apply_attack, generate_measurements, generate_states, AttackScenario, NoiseModel,
        Signature, TrajectoryConfig,
    };
    use approx::assert_relative_eq;

    fn bundled_h() -> MeasurementMatrix {
        build_h_matrix(&GridModel::bundled()).unwrap()
    }

    /// A default simulated stream with an unobservable step attack.
    fn attacked_stream(
        nu: f64,
        gamma: f64,
        horizon: usize,
        t_a: usize,
        seed: u64,
    ) -> (MeasurementMatrix, AttackScenario, Vec<MeasurementFrame>) {
        let h = bundled_h();
        let cfg = TrajectoryConfig {
            x0: Vector::zeros(h.state_count()),
            gamma,
            horizon,
            seed,
        };
        let states = generate_states(&cfg);
        let frames = generate_measurements(
            &states,
            &h,
            &NoiseModel {
                nu,
                seed: seed.wrapping_add(1),
            },
        )
        .unwrap();
        let scenario = AttackScenario {
            attack: make_unobservable_attack(&h, &[30], 2.0).unwrap(),
            t_a,
            signature: Signature::Step,
        };
        let attacked = apply_attack(&frames, &scenario).unwrap();
        (h, scenario, attacked)
    }

    #[test]
    fn history_matrix_by_hand() {
        let window = vec![
            Vector::from_vec(vec![0.0, 0.0]),
            Vector::from_vec(vec![1.0, 1.0]),
            Vector::from_vec(vec![3.0, 1.0]),
        ];
        let hist = HistoryMatrix::build(2, &window).unwrap();
        assert_eq!(hist.w, 2);
        // Column 1: y^t - y^{t-1} = (2, 0); column 2: y^t - y^{t-2} = (3, 1).
        assert_eq!(hist.delta.column(0).as_slice(), &[2.0, 0.0]);
        assert_eq!(hist.delta.column(1).as_slice(), &[3.0, 1.0]);
    }

    #[test]
    fn constant_stream_gives_zero_matrix() {
        let v = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        let window = vec![v.clone(), v.clone(), v.clone(), v];
        let hist = HistoryMatrix::build(3, &window).unwrap();
        assert_eq!(hist.delta, Matrix::zeros(3, 3));
        assert_eq!(hist.sigma1().unwrap(), 0.0);
    }

    #[test]
    fn history_matrix_rejects_mismatched_dims() {
        let window = vec![Vector::zeros(2), Vector::zeros(3)];
        assert!(matches!(
            HistoryMatrix::build(1, &window),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            HistoryMatrix::build(0, &[Vector::zeros(2)]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn history_matrix_matches_truth_decomposition() {
        // Δ^t = E^t + G^t + H X^t recomputed from recorded truth.
        let h = bundled_h();
        let cfg = TrajectoryConfig {
            x0: Vector::zeros(h.state_count()),
            gamma: 0.4,
            horizon: 24,
            seed: 31,
        };
        let states = generate_states(&cfg);
        let frames =
            generate_measurements(&states, &h, &NoiseModel { nu: 0.05, seed: 32 }).unwrap();
        let w = 6;
        for t in [w, 12, 23] {
            let window: Vec<Vector> = frames[t - w..=t].iter().map(|f| f.y.clone()).collect();
            let hist = HistoryMatrix::build(t, &window).unwrap();
            let e_t = frames[t].e.as_ref().unwrap();
            let mut expected = Matrix::zeros(h.measurement_count(), w);
            for k in 1..=w {
                let col = e_t - frames[t - k].e.as_ref().unwrap()
                    + &h.h * (frames[t].x.as_ref().unwrap() - frames[t - k].x.as_ref().unwrap());
                expected.set_column(k - 1, &col);
            }
            assert!(
                (&hist.delta - &expected).abs().max() < 1e-12,
                "decomposition mismatch at t={t}"
            );
        }
    }

    #[test]
    fn detector_warms_up_then_reports() {
        let mut det = DetectorState::new(DetectorConfig {
            w: 4,
            threshold: 0.5,
            source: Source::Measurements,
        })
        .unwrap();
        for t in 0..4 {
            assert!(det.step(Vector::zeros(3)).unwrap().is_none(), "t={t}");
        }
        let verdict = det.step(Vector::zeros(3)).unwrap().unwrap();
        assert_eq!(verdict.t, 4);
        assert_eq!(verdict.sigma1, 0.0);
        assert!(!verdict.alarmed);
    }

    #[test]
    fn detector_rejects_dimension_change() {
        let mut det = DetectorState::new(DetectorConfig {
            w: 2,
            threshold: 1.0,
            source: Source::Measurements,
        })
        .unwrap();
        det.step(Vector::zeros(3)).unwrap();
        assert!(matches!(
            det.step(Vector::zeros(4)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn noiseless_step_attack_jumps_by_sqrt_w_norm() {
        let w = 8;
        let t_a = 20;
        let (_, scenario, frames) = attacked_stream(0.0, 0.0, 40, t_a, 5);
        let a_norm = scenario.attack.norm();
        let mut det = DetectorState::new(DetectorConfig {
            w,
            threshold: 1e-9,
            source: Source::Measurements,
        })
        .unwrap();
        for frame in &frames {
            if let Some(verdict) = det.step(frame.y.clone()).unwrap() {
                if verdict.t < t_a {
                    assert_eq!(
                        verdict.sigma1, 0.0,
                        "clean noiseless stream at t={}",
                        verdict.t
                    );
                    assert!(!verdict.alarmed);
                }
                if verdict.t == t_a {
                    let expected = (w as f64).sqrt() * a_norm;
                    assert!(
                        (verdict.sigma1 - expected).abs() <= 1e-12 * expected,
                        "sigma1 at onset: {} vs {expected}",
                        verdict.sigma1
                    );
                    assert!(verdict.alarmed);
                }
            }
        }
    }

    #[test]
    fn post_attack_profile_follows_rank_one_staircase() {
        let w = 4;
        let t_a = 12;
        let h = bundled_h();
        let cfg = TrajectoryConfig {
            x0: Vector::zeros(h.state_count()),
            gamma: 0.0,
            horizon: 24,
            seed: 6,
        };
        let states = generate_states(&cfg);
        let frames = generate_measurements(&states, &h, &NoiseModel { nu: 0.0, seed: 7 }).unwrap();
        let scenario = AttackScenario {
            attack: make_unobservable_attack(&h, &[30], 1.0).unwrap(),
            t_a,
            signature: Signature::Step,
        };
        let attacked = apply_attack(&frames, &scenario).unwrap();
        let profile = post_attack_profile(&attacked, w).unwrap();
        let at = |t: usize| profile.iter().find(|(pt, _)| *pt == t).unwrap().1;
        // (2, √3, √2, 1, 0) scaled by ‖a‖₂ = 1.
        for j in 0..=w {
            let expected = ((w - j) as f64).sqrt();
            assert!(
                (at(t_a + j) - expected).abs() <= 1e-12 * (1.0 + expected),
                "j={j}: {} vs {expected}",
                at(t_a + j)
            );
        }
        // Monotone decay after the attack in noiseless mode.
        for j in 0..w {
            assert!(at(t_a + j + 1) <= at(t_a + j) + 1e-12);
        }
    }

    #[test]
    fn estimate_stream_sees_witness_sized_jump() {
        let w = 8;
        let t_a = 20;
        let (h, scenario, frames) = attacked_stream(0.0, 0.0, 40, t_a, 8);
        let ones = Vector::from_element(h.measurement_count(), 1.0);
        let estimates = estimate_stream(&frames, &h, &ones).unwrap();

        // Clean prefix is constant, so σ₁ of the estimate history is zero.
        let est_trace = sigma1_trace(&estimates, w).unwrap();
        let at =
            |trace: &[(usize, f64)], t: usize| trace.iter().find(|(pt, _)| *pt == t).unwrap().1;
        assert!(at(&est_trace, t_a - 1).abs() < 1e-9);

        // At onset the estimate history gains w repeated columns of c.
        let c_norm = scenario.attack.witness.as_ref().unwrap().norm();
        let expected = (w as f64).sqrt() * c_norm;
        assert_relative_eq!(at(&est_trace, t_a), expected, max_relative = 1e-9);

        // Measurement-source jump relates by ‖a‖₂ / ‖c‖₂.
        let ys: Vec<Vector> = frames.iter().map(|f| f.y.clone()).collect();
        let meas_trace = sigma1_trace(&ys, w).unwrap();
        let ratio = at(&meas_trace, t_a) / at(&est_trace, t_a);
        assert_relative_eq!(ratio, scenario.attack.norm() / c_norm, max_relative = 1e-9);
    }

    #[test]
    fn verdicts_are_causal() {
        let (_, _, frames) = attacked_stream(0.02, 0.0, 30, 15, 9);
        let config = DetectorConfig {
            w: 4,
            threshold: 1.0,
            source: Source::Measurements,
        };
        let run = |upto: usize| -> Vec<Verdict> {
            let mut det = DetectorState::new(config).unwrap();
            frames[..upto]
                .iter()
                .filter_map(|f| det.step(f.y.clone()).unwrap())
                .collect()
        };
        let partial = run(20);
        let full = run(30);
        assert_eq!(partial, full[..partial.len()].to_vec());
    }

    #[test]
    fn numerical_rank_is_unchanged_by_the_attack() {
        // w > N + 1 and noise present: the rank-1 attack block does not
        // change the numerical rank at onset.
        let w = 40;
        let t_a = 50;
        for seed in [41, 42, 43] {
            let (_, _, frames) = attacked_stream(0.05, 0.0, 60, t_a, seed);
            let ys: Vec<Vector> = frames.iter().map(|f| f.y.clone()).collect();
            let rank_at = |t: usize| {
                let hist = HistoryMatrix::build(t, &ys[t - w..=t]).unwrap();
                let sv = numerics::singular_values(&hist.delta).unwrap();
                let cutoff = 1e-8 * sv[0];
                sv.iter().filter(|&&s| s > cutoff).count()
            };
            assert_eq!(rank_at(t_a - 1), rank_at(t_a), "seed {seed}");
        }
    }

    #[test]
    fn noise_estimate_recovers_the_simulated_level() {
        let (_, _, frames) = attacked_stream(0.05, 0.0, 240, 200, 17);
        let ys: Vec<Vector> = frames.iter().map(|f| f.y.clone()).collect();
        let nu_hat = estimate_noise_std(&ys).unwrap();
        assert!(
            (nu_hat - 0.05).abs() / 0.05 < 0.1,
            "estimated {nu_hat} for true 0.05"
        );
        // Constant stream: nothing to estimate from.
        let flat = vec![Vector::zeros(4); 10];
        assert!(estimate_noise_std(&flat).is_none());
        assert!(estimate_noise_std(&flat[..1]).is_none());
    }

    #[test]
    fn verdict_csv_layout() {
        let verdicts = vec![
            Verdict {
                t: 16,
                sigma1: 0.25,
                alarmed: false,
                threshold_used: 0.5,
            },
            Verdict {
                t: 17,
                sigma1: 0.75,
                alarmed: true,
                threshold_used: 0.5,
            },
        ];
        let mut buf = Vec::new();
        write_verdicts(&mut buf, &verdicts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "t,sigma1,alarm,threshold\n16,0.25,0,0.5\n17,0.75,1,0.5\n"
        );
    }
}
