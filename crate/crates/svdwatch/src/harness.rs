//! Experiment runner: σ₁ traces over attacked streams, Monte Carlo
//! bound-tightness sweeps, minimum-window curves, and tail validation, all
//! with deterministic CSV/JSON output.
//!
//! Every run is a pure function of its [`ExperimentSpec`]; realization `i`
//! draws its random streams from seeds derived from `base_seed + i`, so runs
//! parallelize across realizations without changing any output byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundParams};
use crate::detector::{estimate_stream, sigma1_trace, HistoryMatrix};
use crate::error::{Error, Result};
use crate::grid::{self, Attack, BusId, GridModel, MeasurementMatrix};
use crate::numerics::{self, Matrix, Vector};
use crate::sim::{self, AttackScenario, MeasurementFrame, NoiseModel, Signature, SimConfig};

/// Where an experiment's grid comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum GridSource {
    Bundled,
    File(PathBuf),
}

impl From<String> for GridSource {
    fn from(s: String) -> Self {
        match s.as_str() {
            "bundled" | "default" => GridSource::Bundled,
            _ => GridSource::File(PathBuf::from(s)),
        }
    }
}

impl From<GridSource> for String {
    fn from(src: GridSource) -> String {
        match src {
            GridSource::Bundled => "bundled".into(),
            GridSource::File(p) => p.display().to_string(),
        }
    }
}

impl GridSource {
    pub fn load(&self) -> Result<GridModel> {
        match self {
            GridSource::Bundled => Ok(GridModel::bundled()),
            GridSource::File(path) => GridModel::from_path(path),
        }
    }
}

/// Attack description as stored in attack JSON:
/// `{"support": [bus ids], "norm": num, "t_a": int, "signature": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub support: Vec<BusId>,
    pub norm: f64,
    pub t_a: usize,
    #[serde(default)]
    pub signature: Signature,
}

/// Full description of one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub grid: GridSource,
    pub sim: SimConfig,
    pub attack: AttackSpec,
    /// Detector window size.
    pub w: usize,
    pub tau: f64,
    pub eps: f64,
    pub realizations: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            grid: GridSource::Bundled,
            sim: SimConfig {
                gamma: 0.0,
                nu: 0.05,
                horizon: 256,
                seed: 42,
            },
            attack: AttackSpec {
                support: vec![30],
                norm: 2.0,
                t_a: 129,
                signature: Signature::Step,
            },
            w: 16,
            tau: bounds::DEFAULT_TAU,
            eps: bounds::DEFAULT_EPS,
            realizations: 300,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentSpec {
    /// Single-realization σ₁ trace setup: `w = 16`, `ν = 0.05`.
    pub fn fig1() -> Self {
        Self::default()
    }

    /// Bound-tightness sweep, low-noise variant: `w = 8`, `ν = 0.01`.
    pub fn fig2a() -> Self {
        let base = Self::default();
        Self {
            w: 8,
            sim: SimConfig {
                nu: 0.01,
                ..base.sim
            },
            ..base
        }
    }

    /// Bound-tightness sweep, high-noise variant: `w = 64`, `ν = 0.04`.
    pub fn fig2b() -> Self {
        let base = Self::default();
        Self {
            w: 64,
            sim: SimConfig {
                nu: 0.04,
                ..base.sim
            },
            ..base
        }
    }

    /// Tail-validation setup: 1000 realizations at `w = 8`, `ν = 0.01`.
    pub fn tails() -> Self {
        let mut spec = Self::fig2a();
        spec.realizations = 1000;
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.w < 1 {
            return Err(Error::InvalidInput("window size must be at least 1".into()));
        }
        if self.realizations < 1 {
            return Err(Error::InvalidInput("need at least one realization".into()));
        }
        if self.attack.t_a <= self.w {
            return Err(Error::InvalidInput(format!(
                "attack time {} must exceed the window size {}",
                self.attack.t_a, self.w
            )));
        }
        if self.attack.t_a >= self.sim.horizon {
            return Err(Error::InvalidInput(format!(
                "attack time {} lies outside the horizon {}",
                self.attack.t_a, self.sim.horizon
            )));
        }
        if !self.attack.norm.is_finite() || self.attack.norm <= 0.0 {
            return Err(Error::InvalidInput("attack norm must be positive".into()));
        }
        for (name, v) in [
            ("nu", self.sim.nu),
            ("gamma", self.sim.gamma),
            ("tau", self.tau),
            ("eps", self.eps),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }
}

/// Tabular result of one experiment, carrying the exact parameters it ran
/// with. The CSV holds `rows` under `columns`; everything else lands in the
/// metadata JSON.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub name: String,
    pub spec: ExperimentSpec,
    pub params: BoundParams,
    pub columns: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
    pub summary: BTreeMap<String, f64>,
}

impl ExperimentResult {
    pub fn csv_string(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                out.push_str(&sim::format_float(*v));
                first = false;
            }
            out.push('\n');
        }
        out
    }

    /// Writes `<name>.csv` and `<name>_meta.json` under `dir`, creating it
    /// if needed; returns both paths.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.name));
        std::fs::write(&csv_path, self.csv_string())?;
        let meta_path = dir.join(format!("{}_meta.json", self.name));
        let mut meta = serde_json::to_string_pretty(self)?;
        meta.push('\n');
        std::fs::write(&meta_path, meta)?;
        Ok((csv_path, meta_path))
    }

    fn summarize(&mut self, key: &str, value: f64) {
        self.summary.insert(key.to_string(), value);
    }
}

/// Grid-dependent context shared by all realizations of a run.
struct Prepared {
    h: MeasurementMatrix,
    h_norm: f64,
    attack: Attack,
    scenario_signature: Signature,
    t_a: usize,
    variances: Vector,
}

fn prepare(spec: &ExperimentSpec) -> Result<Prepared> {
    spec.validate()?;
    let grid = spec.grid.load()?;
    let h = grid::build_h_matrix(&grid)?;
    let h_norm = numerics::spectral_norm(&h.h)?;
    let attack = grid::make_unobservable_attack(&h, &spec.attack.support, spec.attack.norm)?;
    let variances = Vector::from_element(h.measurement_count(), 1.0);
    Ok(Prepared {
        h,
        h_norm,
        attack,
        scenario_signature: spec.attack.signature,
        t_a: spec.attack.t_a,
        variances,
    })
}

fn bound_params(spec: &ExperimentSpec, prep: &Prepared) -> BoundParams {
    BoundParams {
        nu: spec.sim.nu,
        m: prep.h.measurement_count(),
        w: spec.w,
        tau: spec.tau,
        eps: spec.eps,
        gamma: spec.sim.gamma,
        h_norm: prep.h_norm,
    }
}

/// Simulates one attacked realization over `horizon` samples. State and
/// noise streams use seeds derived from `base_seed + realization`.
fn simulate_attacked(
    prep: &Prepared,
    spec: &ExperimentSpec,
    realization: usize,
    horizon: usize,
) -> Result<Vec<MeasurementFrame>> {
    let realization_seed = spec.sim.seed.wrapping_add(realization as u64);
    let states = sim::generate_states(&sim::TrajectoryConfig {
        x0: Vector::zeros(prep.h.state_count()),
        gamma: spec.sim.gamma,
        horizon,
        seed: sim::derive_seed(realization_seed, 1),
    });
    let frames = sim::generate_measurements(
        &states,
        &prep.h,
        &NoiseModel {
            nu: spec.sim.nu,
            seed: sim::derive_seed(realization_seed, 2),
        },
    )?;
    sim::apply_attack(
        &frames,
        &AttackScenario {
            attack: prep.attack.clone(),
            t_a: prep.t_a,
            signature: prep.scenario_signature,
        },
    )
}

/// σ₁ of the rank-1 block `E^{t_a} + A`: every column equals
/// `e^{t_a} + a`, so the value is `√w · ‖e^{t_a} + a‖₂`.
fn sigma1_noise_plus_attack(frames: &[MeasurementFrame], t_a: usize, w: usize, a: &Vector) -> f64 {
    let e = frames[t_a]
        .e
        .as_ref()
        .expect("simulated frames carry truth");
    (w as f64).sqrt() * (e + a).norm()
}

/// σ₁ of the residual block `G^{t_a} + H X^{t_a}` rebuilt from truth.
fn sigma1_past_noise_and_drift(
    prep: &Prepared,
    frames: &[MeasurementFrame],
    t_a: usize,
    w: usize,
) -> Result<f64> {
    let x_now = frames[t_a]
        .x
        .as_ref()
        .expect("simulated frames carry truth");
    let mut block = Matrix::zeros(prep.h.measurement_count(), w);
    for k in 1..=w {
        let past = &frames[t_a - k];
        let col = -past.e.as_ref().expect("truth")
            + &prep.h.h * (x_now - past.x.as_ref().expect("truth"));
        block.set_column(k - 1, &col);
    }
    numerics::largest_singular_value(&block)
}

/// Single-realization σ₁ trace over the attacked stream, once per source:
/// raw measurements and state estimates.
pub fn run_fig1(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let prep = prepare(spec)?;
    let frames = simulate_attacked(&prep, spec, 0, spec.sim.horizon)?;

    let ys: Vec<Vector> = frames.iter().map(|f| f.y.clone()).collect();
    let meas_trace = sigma1_trace(&ys, spec.w)?;
    let estimates = estimate_stream(&frames, &prep.h, &prep.variances)?;
    let est_trace = sigma1_trace(&estimates, spec.w)?;

    let rows: Vec<Vec<f64>> = meas_trace
        .iter()
        .zip(&est_trace)
        .map(|(&(t, s_meas), &(_, s_est))| vec![t as f64, s_meas, s_est])
        .collect();

    let params = bound_params(spec, &prep);
    let mut result = ExperimentResult {
        name: "fig1".into(),
        spec: spec.clone(),
        params,
        columns: vec![
            "t".into(),
            "sigma1_measurements".into(),
            "sigma1_estimates".into(),
        ],
        rows,
        summary: BTreeMap::new(),
    };
    result.summarize("ell", bounds::threshold_ell(&params));
    result.summarize("u", bounds::threshold_u(prep.attack.norm(), &params));
    result.summarize("a_norm", prep.attack.norm());
    result.summarize(
        "c_norm",
        prep.attack
            .witness
            .as_ref()
            .map(|c| c.norm())
            .unwrap_or(f64::NAN),
    );
    result.summarize("attack_sparsity", prep.attack.sparsity as f64);
    result.summarize("t_a", prep.t_a as f64);
    Ok(result)
}

/// Monte Carlo sweep of σ₁ against the envelopes: `realizations` attacked
/// streams, one σ₁ sample per time step each, with exceedance counts of
/// `σ₁ > ℓ` before the attack and `σ₁ < u` at onset.
pub fn run_fig2(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let prep = prepare(spec)?;
    let params = bound_params(spec, &prep);
    let ell = bounds::threshold_ell(&params);
    let u = bounds::threshold_u(prep.attack.norm(), &params);
    let a_norm = prep.attack.norm();

    struct Realization {
        rows: Vec<Vec<f64>>,
        pre_exceed: usize,
        pre_samples: usize,
        sigma_at_onset: f64,
        precondition: bool,
        onset_block_dominates: bool,
    }

    let per: Vec<Realization> = (0..spec.realizations)
        .into_par_iter()
        .map(|i| -> Result<Realization> {
            let frames = simulate_attacked(&prep, spec, i, spec.sim.horizon)?;
            let ys: Vec<Vector> = frames.iter().map(|f| f.y.clone()).collect();
            let trace = sigma1_trace(&ys, spec.w)?;
            let rows: Vec<Vec<f64>> = trace
                .iter()
                .map(|&(t, s)| vec![i as f64, t as f64, s])
                .collect();
            let pre: Vec<f64> = trace
                .iter()
                .filter(|&&(t, _)| t < prep.t_a)
                .map(|&(_, s)| s)
                .collect();
            let pre_exceed = pre.iter().filter(|&&s| s > ell).count();
            let sigma_at_onset = trace
                .iter()
                .find(|&&(t, _)| t == prep.t_a)
                .map(|&(_, s)| s)
                .expect("horizon covers the attack time");
            let e_norm = frames[prep.t_a].e.as_ref().expect("truth").norm();
            let s_ea = sigma1_noise_plus_attack(&frames, prep.t_a, spec.w, &prep.attack.a);
            let s_gx = sigma1_past_noise_and_drift(&prep, &frames, prep.t_a, spec.w)?;
            Ok(Realization {
                rows,
                pre_exceed,
                pre_samples: pre.len(),
                sigma_at_onset,
                precondition: bounds::attack_dominates_noise(a_norm, e_norm),
                onset_block_dominates: s_ea > s_gx,
            })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut pre_exceed = 0usize;
    let mut pre_samples = 0usize;
    let mut precondition_count = 0usize;
    let mut onset_below_u = 0usize;
    let mut onset_block_dominates = 0usize;
    for r in per {
        rows.extend(r.rows);
        pre_exceed += r.pre_exceed;
        pre_samples += r.pre_samples;
        if r.precondition {
            precondition_count += 1;
            if r.sigma_at_onset < u {
                onset_below_u += 1;
            }
        }
        if r.onset_block_dominates {
            onset_block_dominates += 1;
        }
    }

    let mut result = ExperimentResult {
        name: "fig2".into(),
        spec: spec.clone(),
        params,
        columns: vec!["realization".into(), "t".into(), "sigma1".into()],
        rows,
        summary: BTreeMap::new(),
    };
    result.summarize("ell", ell);
    result.summarize("u", u);
    result.summarize("tail_bound", bounds::tail_probability(&params));
    result.summarize("a_norm", a_norm);
    result.summarize("pre_attack_exceedances", pre_exceed as f64);
    result.summarize("pre_attack_samples", pre_samples as f64);
    result.summarize("onset_below_u", onset_below_u as f64);
    result.summarize("precondition_count", precondition_count as f64);
    result.summarize("onset_block_dominates", onset_block_dominates as f64);
    Ok(result)
}

/// Which parameter a minimum-window curve sweeps.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    /// Noise levels at the experiment's fixed attack norm.
    Nu(Vec<f64>),
    /// Attack norms at the experiment's fixed noise level.
    ANorm(Vec<f64>),
}

impl Sweep {
    /// Noise grid 0.005..=0.10 used by the bundled minimum-window curve.
    pub fn default_nu() -> Self {
        Sweep::Nu((1..=20).map(|k| k as f64 * 0.005).collect())
    }

    /// Attack-norm grid 0.25..=4.0 used by the bundled minimum-window curve.
    pub fn default_a_norm() -> Self {
        Sweep::ANorm((1..=16).map(|k| k as f64 * 0.25).collect())
    }
}

/// Minimum-window curve over a swept parameter. Infeasible points (no finite
/// window can satisfy the condition) are flagged, not fatal: their `w_min`
/// field is left empty.
pub fn run_fig3(spec: &ExperimentSpec, sweep: &Sweep) -> Result<ExperimentResult> {
    let prep = prepare(spec)?;
    let params = bound_params(spec, &prep);
    let (swept_name, values) = match sweep {
        Sweep::Nu(values) => ("nu", values),
        Sweep::ANorm(values) => ("a_norm", values),
    };
    if values.is_empty() {
        return Err(Error::InvalidInput("sweep value list is empty".into()));
    }

    let mut rows = Vec::with_capacity(values.len());
    let mut feasible = 0usize;
    for &value in values {
        let (p, a_norm) = match sweep {
            Sweep::Nu(_) => (
                BoundParams {
                    nu: value,
                    ..params
                },
                spec.attack.norm,
            ),
            Sweep::ANorm(_) => (params, value),
        };
        match bounds::min_window(a_norm, &p) {
            Ok(w_min) => {
                feasible += 1;
                rows.push(vec![value, w_min as f64, 1.0]);
            }
            Err(Error::NoSolution(_)) => rows.push(vec![value, f64::NAN, 0.0]),
            Err(e) => return Err(e),
        }
    }

    let mut result = ExperimentResult {
        name: format!("fig3_{swept_name}"),
        spec: spec.clone(),
        params,
        columns: vec![swept_name.into(), "w_min".into(), "feasible".into()],
        rows,
        summary: BTreeMap::new(),
    };
    result.summarize("points", values.len() as f64);
    result.summarize("feasible_points", feasible as f64);
    Ok(result)
}

/// Monte Carlo validation of the two tail bounds: per realization, one σ₁
/// sample just before the attack (against `ℓ`) and one at onset (against
/// `u`, conditioned on the attack dominating the instantaneous noise).
pub fn run_tail_validation(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    if spec.realizations < 1000 {
        return Err(Error::InvalidInput(format!(
            "tail validation needs at least 1000 realizations, got {}",
            spec.realizations
        )));
    }
    let prep = prepare(spec)?;
    let params = bound_params(spec, &prep);
    let ell = bounds::threshold_ell(&params);
    let u = bounds::threshold_u(prep.attack.norm(), &params);
    let a_norm = prep.attack.norm();
    let t_a = prep.t_a;
    let w = spec.w;

    let per: Vec<(f64, f64, bool)> = (0..spec.realizations)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64, bool)> {
            // Only the window around the attack is evaluated.
            let frames = simulate_attacked(&prep, spec, i, t_a + 1)?;
            let ys: Vec<Vector> = frames.iter().map(|f| f.y.clone()).collect();
            let pre = HistoryMatrix::build(t_a - 1, &ys[t_a - 1 - w..=t_a - 1])?.sigma1()?;
            let onset = HistoryMatrix::build(t_a, &ys[t_a - w..=t_a])?.sigma1()?;
            let e_norm = frames[t_a].e.as_ref().expect("truth").norm();
            Ok((pre, onset, bounds::attack_dominates_noise(a_norm, e_norm)))
        })
        .collect::<Result<_>>()?;

    let rows: Vec<Vec<f64>> = per
        .iter()
        .enumerate()
        .map(|(i, &(pre, onset, cond))| vec![i as f64, pre, onset, f64::from(u8::from(cond))])
        .collect();

    let n = spec.realizations as f64;
    let tail = bounds::tail_probability(&params);
    let slack = 3.0 * (tail * (1.0 - tail) / n).sqrt();
    let pre_hits = per.iter().filter(|&&(pre, _, _)| pre > ell).count();
    let precondition_count = per.iter().filter(|&&(_, _, c)| c).count();
    let onset_hits = per
        .iter()
        .filter(|&&(_, onset, cond)| cond && onset < u)
        .count();
    let freq_pre = pre_hits as f64 / n;
    let freq_onset = if precondition_count > 0 {
        onset_hits as f64 / precondition_count as f64
    } else {
        0.0
    };

    let mut result = ExperimentResult {
        name: "tails".into(),
        spec: spec.clone(),
        params,
        columns: vec![
            "realization".into(),
            "sigma1_pre_attack".into(),
            "sigma1_at_attack".into(),
            "precondition".into(),
        ],
        rows,
        summary: BTreeMap::new(),
    };
    result.summarize("ell", ell);
    result.summarize("u", u);
    result.summarize("tail_bound", tail);
    result.summarize("slack", slack);
    result.summarize("pre_attack_exceedances", pre_hits as f64);
    result.summarize("onset_below_u", onset_hits as f64);
    result.summarize("precondition_count", precondition_count as f64);
    result.summarize("freq_pre_attack", freq_pre);
    result.summarize("freq_onset", freq_onset);
    result.summarize(
        "upper_envelope_sound",
        f64::from(u8::from(freq_pre <= tail + slack)),
    );
    result.summarize(
        "lower_envelope_sound",
        f64::from(u8::from(freq_onset <= tail + slack)),
    );
    Ok(result)
}
