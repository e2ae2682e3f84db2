//! Measurement-stream generation: bounded-variation state trajectories,
//! Gaussian sensor noise, and additive attack injection.
//!
//! Everything here is deterministic given its seed. Distinct random streams
//! (states vs. noise, realization `i` vs. `i+1`) use seeds derived through
//! [`derive_seed`] so they never alias.

use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Attack, MeasurementMatrix};
use crate::numerics::Vector;

/// Per-entry Gaussian sensor-noise model with standard deviation `nu`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseModel {
    pub nu: f64,
    pub seed: u64,
}

/// Bounded-variation trajectory: every pair of states over the horizon stays
/// within `gamma` of each other in the 2-norm.
#[derive(Debug, Clone)]
pub struct TrajectoryConfig {
    /// Center of the state ball.
    pub x0: Vector,
    pub gamma: f64,
    pub horizon: usize,
    pub seed: u64,
}

/// Temporal attack profile: a step at the onset time, or a linear ramp from
/// zero at `t_start` to full magnitude at `t_end`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signature {
    #[default]
    Step,
    Ramp {
        t_start: usize,
        t_end: usize,
    },
}

/// An attack vector bound to an onset time and a temporal signature.
#[derive(Debug, Clone)]
pub struct AttackScenario {
    pub attack: Attack,
    pub t_a: usize,
    pub signature: Signature,
}

impl AttackScenario {
    /// Scale applied to the attack vector at time `t`.
    pub fn scale_at(&self, t: usize) -> f64 {
        match self.signature {
            Signature::Step => {
                if t >= self.t_a {
                    1.0
                } else {
                    0.0
                }
            }
            Signature::Ramp { t_start, t_end } => {
                if t < t_start {
                    0.0
                } else if t >= t_end {
                    1.0
                } else {
                    (t - t_start) as f64 / (t_end - t_start) as f64
                }
            }
        }
    }
}

/// One timestamped measurement vector, optionally carrying simulation truth.
#[derive(Debug, Clone)]
pub struct MeasurementFrame {
    pub t: usize,
    pub y: Vector,
    /// True state, when simulated.
    pub x: Option<Vector>,
    /// True noise draw, when simulated.
    pub e: Option<Vector>,
    /// Attack scale applied to this frame, when simulated.
    pub theta: Option<f64>,
}

/// Simulation configuration as stored in config JSON:
/// `{"gamma": num, "nu": num, "T": int, "seed": int}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    pub gamma: f64,
    pub nu: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub seed: u64,
}

/// SplitMix64-style seed derivation, used to give each random stream its own
/// non-aliasing seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draws a state sequence confined to the ball of radius `gamma / 2` around
/// `x0`, so every pair of states is within `gamma` of each other.
pub fn generate_states(cfg: &TrajectoryConfig) -> Vec<Vector> {
    let n = cfg.x0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.horizon)
        .map(|_| {
            if cfg.gamma == 0.0 {
                return cfg.x0.clone();
            }
            // Uniform draw from the ball: Gaussian direction, radius with
            // density r^(n-1).
            let dir = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let len = dir.norm();
            let radius = 0.5 * cfg.gamma * rng.random::<f64>().powf(1.0 / n as f64);
            if len == 0.0 {
                cfg.x0.clone()
            } else {
                &cfg.x0 + dir * (radius / len)
            }
        })
        .collect()
}

/// Maps states to measurements `y = H x + e` with `e ~ N(0, nu² I)` and
/// records the truth in each frame.
pub fn generate_measurements(
    states: &[Vector],
    h: &MeasurementMatrix,
    noise: &NoiseModel,
) -> Result<Vec<MeasurementFrame>> {
    if !noise.nu.is_finite() || noise.nu < 0.0 {
        return Err(Error::InvalidInput(
            "noise level must be finite and non-negative".into(),
        ));
    }
    let m = h.measurement_count();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    states
        .iter()
        .enumerate()
        .map(|(t, x)| {
            if x.len() != h.state_count() {
                return Err(Error::InvalidInput(format!(
                    "state at t={t} has {} entries, expected {}",
                    x.len(),
                    h.state_count()
                )));
            }
            let e = Vector::from_fn(m, |_, _| noise.nu * rng.sample::<f64, _>(StandardNormal));
            Ok(MeasurementFrame {
                t,
                y: &h.h * x + &e,
                x: Some(x.clone()),
                e: Some(e),
                theta: Some(0.0),
            })
        })
        .collect()
}

/// Adds the attack to each frame according to its signature:
/// `y_a^t = y^t + s(t) · a`. Frames strictly before onset are returned
/// bit-identical.
pub fn apply_attack(
    frames: &[MeasurementFrame],
    scenario: &AttackScenario,
) -> Result<Vec<MeasurementFrame>> {
    if scenario.t_a >= frames.len() {
        return Err(Error::InvalidInput(format!(
            "attack time {} lies outside the horizon of {} frames",
            scenario.t_a,
            frames.len()
        )));
    }
    if let Signature::Ramp { t_start, t_end } = scenario.signature {
        if t_start > t_end {
            return Err(Error::InvalidInput(format!(
                "ramp start {t_start} is after ramp end {t_end}"
            )));
        }
    }
    if let Some(frame) = frames.first() {
        if frame.y.len() != scenario.attack.a.len() {
            return Err(Error::InvalidInput(format!(
                "attack vector has {} entries, measurements have {}",
                scenario.attack.a.len(),
                frame.y.len()
            )));
        }
    }
    Ok(frames
        .iter()
        .map(|frame| {
            let s = scenario.scale_at(frame.t);
            let y = if s == 0.0 {
                frame.y.clone()
            } else {
                &frame.y + &scenario.attack.a * s
            };
            MeasurementFrame {
                t: frame.t,
                y,
                x: frame.x.clone(),
                e: frame.e.clone(),
                theta: Some(s),
            }
        })
        .collect())
}

/// Writes a measurement stream as CSV with header `t,y1,...,yM`, appending
/// truth columns `x_1,...,x_N` when every frame carries a state.
pub fn write_stream_csv<P: AsRef<Path>>(path: P, frames: &[MeasurementFrame]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    write_stream(&mut out, frames)
}

/// Writes the stream CSV to any writer; see [`write_stream_csv`].
pub fn write_stream<W: Write>(out: &mut W, frames: &[MeasurementFrame]) -> Result<()> {
    let Some(first) = frames.first() else {
        return Err(Error::InvalidInput("measurement stream is empty".into()));
    };
    let m = first.y.len();
    let with_truth = frames.iter().all(|f| f.x.is_some());
    let n = if with_truth {
        first.x.as_ref().map(|x| x.len()).unwrap_or(0)
    } else {
        0
    };

    let mut header = String::from("t");
    for i in 1..=m {
        header.push_str(&format!(",y{i}"));
    }
    for j in 1..=n {
        header.push_str(&format!(",x_{j}"));
    }
    writeln!(out, "{header}")?;

    for frame in frames {
        if frame.y.len() != m {
            return Err(Error::InvalidInput(
                "measurement dimension changed mid-stream".into(),
            ));
        }
        let mut line = frame.t.to_string();
        for v in frame.y.iter() {
            line.push(',');
            line.push_str(&format_float(*v));
        }
        if with_truth {
            for v in frame.x.as_ref().unwrap().iter() {
                line.push(',');
                line.push_str(&format_float(*v));
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads a measurement stream CSV produced by [`write_stream_csv`] or any
/// source with the same `t,y1,...` header; truth columns are optional.
pub fn read_stream_csv<P: AsRef<Path>>(path: P) -> Result<Vec<MeasurementFrame>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())
        .map_err(|e| Error::Format(format!("cannot open stream CSV: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("stream CSV has no header: {e}")))?
        .clone();
    let mut y_cols = Vec::new();
    let mut x_cols = Vec::new();
    for (idx, name) in headers.iter().enumerate() {
        if name == "t" {
            if idx != 0 {
                return Err(Error::Format("column t must come first".into()));
            }
        } else if let Some(rest) = name.strip_prefix("x_") {
            rest.parse::<usize>()
                .map_err(|_| Error::Format(format!("unexpected column {name}")))?;
            x_cols.push(idx);
        } else if let Some(rest) = name.strip_prefix('y') {
            rest.parse::<usize>()
                .map_err(|_| Error::Format(format!("unexpected column {name}")))?;
            y_cols.push(idx);
        } else {
            return Err(Error::Format(format!("unexpected column {name}")));
        }
    }
    if y_cols.is_empty() {
        return Err(Error::Format("stream CSV has no y columns".into()));
    }

    let mut frames = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("row {line}: {e}")))?;
        let parse = |idx: usize| -> Result<f64> {
            record
                .get(idx)
                .ok_or_else(|| Error::Format(format!("row {line}: missing field {idx}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("row {line}: {e}")))
        };
        let t = parse(0)? as usize;
        let y = Vector::from_iterator(
            y_cols.len(),
            y_cols
                .iter()
                .map(|&i| parse(i))
                .collect::<Result<Vec<_>>>()?,
        );
        let x = if x_cols.is_empty() {
            None
        } else {
            Some(Vector::from_iterator(
                x_cols.len(),
                x_cols
                    .iter()
                    .map(|&i| parse(i))
                    .collect::<Result<Vec<_>>>()?,
            ))
        };
        frames.push(MeasurementFrame {
            t,
            y,
            x,
            e: None,
            theta: None,
        });
    }
    Ok(frames)
}

/// Shortest-round-trip float formatting shared by all CSV writers.
pub(crate) fn format_float(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}
