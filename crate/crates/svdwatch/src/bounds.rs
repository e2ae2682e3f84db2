//! Closed-form thresholds and tail probabilities for the spectral monitor,
//! plus solvers for the smallest window size or attack magnitude that
//! guarantees detectability.
//!
//! Two concentration facts drive everything: the norm of an `M`-dimensional
//! Gaussian vector exceeds `ν√M(1+ε)` with probability at most
//! `((1+ε)e^{-ε})^{M/2}`, and the largest singular value of an `M x w`
//! Gaussian matrix exceeds `ν(√M + √w + τ)` with probability at most
//! `2 exp(-τ²/2)`. Together they give a pre-change upper envelope `ℓ` and an
//! at-change lower envelope `u = √w‖a‖₂ - ℓ` for the monitored σ₁, both
//! failing with the same tail probability.
//!
//! For the default `(τ, ε) = (4, 0.75)` at `M = 85` the two tail terms are
//! ≈ 6.709e-4 and ≈ 3.062e-4; their sum is ≈ 9.771e-4. The matrix term alone
//! is sometimes quoted as the whole tail (6.7e-4); the evaluators here always
//! report the full sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tail parameter for the Gaussian-matrix bound.
pub const DEFAULT_TAU: f64 = 4.0;
/// Default tail parameter for the Gaussian-norm bound.
pub const DEFAULT_EPS: f64 = 0.75;
/// Upper limit for the minimum-window search.
pub const MIN_WINDOW_CAP: usize = 1_000_000;

/// Every parameter entering the threshold and tail formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Per-entry noise standard deviation.
    pub nu: f64,
    /// Number of measurements per sample.
    pub m: usize,
    /// Window size.
    pub w: usize,
    /// Tail parameter of the Gaussian-matrix bound.
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Tail parameter of the Gaussian-norm bound.
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// State-variation radius.
    #[serde(default)]
    pub gamma: f64,
    /// Spectral norm of the measurement matrix (only the `gamma` term uses it).
    #[serde(default)]
    pub h_norm: f64,
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}

impl BoundParams {
    /// Parameters with the default `(τ, ε)` pair and no state variation.
    pub fn new(nu: f64, m: usize, w: usize) -> Self {
        Self {
            nu,
            m,
            w,
            tau: DEFAULT_TAU,
            eps: DEFAULT_EPS,
            gamma: 0.0,
            h_norm: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 || self.w < 1 {
            return Err(Error::InvalidInput(
                "measurement count and window size must be at least 1".into(),
            ));
        }
        for (name, v) in [
            ("nu", self.nu),
            ("tau", self.tau),
            ("eps", self.eps),
            ("gamma", self.gamma),
            ("h_norm", self.h_norm),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Thresholds `ℓ` and `u` with the tail probability they share.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThresholdPair {
    pub ell: f64,
    pub u: f64,
    /// Shared tail probability, clamped to `[0, 1]`.
    pub tail: f64,
}

/// Tail bound `((1+ε)e^{-ε})^{M/2}` on a Gaussian vector norm exceeding
/// `ν√M(1+ε)`. Lies in `(0, 1]` for `ε ≥ 0`.
pub fn gaussian_norm_tail(eps: f64, m: usize) -> Result<f64> {
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::InvalidInput(format!(
            "eps must be non-negative, got {eps}"
        )));
    }
    if m < 1 {
        return Err(Error::InvalidInput("m must be at least 1".into()));
    }
    Ok(((1.0 + eps) * (-eps).exp()).powf(m as f64 / 2.0))
}

/// Raw tail bound `2 exp(-τ²/2)` on the largest singular value of a Gaussian
/// matrix exceeding `ν(√M + √w + τ)`. Lies in `(0, 2]`; clamp before
/// reporting it as a probability.
pub fn gaussian_matrix_tail(tau: f64) -> Result<f64> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::InvalidInput(format!(
            "tau must be non-negative, got {tau}"
        )));
    }
    Ok(2.0 * (-tau * tau / 2.0).exp())
}

/// Unclamped sum of the two tail terms.
pub fn tail_probability_raw(p: &BoundParams) -> f64 {
    2.0 * (-p.tau * p.tau / 2.0).exp() + ((1.0 + p.eps) * (-p.eps).exp()).powf(p.m as f64 / 2.0)
}

/// Shared failure probability of both envelopes, clamped to `[0, 1]`.
pub fn tail_probability(p: &BoundParams) -> f64 {
    tail_probability_raw(p).clamp(0.0, 1.0)
}

/// Pre-change upper envelope
/// `ℓ = ν√w√M(1+ε) + ν(√M + √w + τ) + γ√w‖H‖`.
pub fn threshold_ell(p: &BoundParams) -> f64 {
    let m = p.m as f64;
    let w = p.w as f64;
    p.nu * w.sqrt() * m.sqrt() * (1.0 + p.eps)
        + p.nu * (m.sqrt() + w.sqrt() + p.tau)
        + p.gamma * w.sqrt() * p.h_norm
}

/// At-change lower envelope `u = √w‖a‖₂ - ℓ`; may be negative when the
/// attack is too small for the window.
pub fn threshold_u(a_norm: f64, p: &BoundParams) -> f64 {
    (p.w as f64).sqrt() * a_norm - threshold_ell(p)
}

/// Both envelopes plus their shared tail probability.
pub fn thresholds(a_norm: f64, p: &BoundParams) -> ThresholdPair {
    ThresholdPair {
        ell: threshold_ell(p),
        u: threshold_u(a_norm, p),
        tail: tail_probability(p),
    }
}

/// Detection-probability lower bound `1 - 2 · tail`, before clamping.
/// Lies in `[-1, 1]`.
pub fn detection_probability_signed(p: &BoundParams) -> f64 {
    1.0 - 2.0 * tail_probability(p)
}

/// Detection-probability lower bound clamped to `[0, 1]` for reporting.
pub fn detection_probability_lower_bound(p: &BoundParams) -> f64 {
    detection_probability_signed(p).max(0.0)
}

/// Smallest attack magnitude guaranteed detectable at these parameters:
/// `2[ν√M(1 + ε + 1/√w + 1/√M + τ/(√M√w)) + γ‖H‖]`.
/// Strictly decreasing in `w`.
pub fn min_attack_norm(p: &BoundParams) -> f64 {
    let m = p.m as f64;
    let w = p.w as f64;
    2.0 * (p.nu
        * m.sqrt()
        * (1.0 + p.eps + 1.0 / w.sqrt() + 1.0 / m.sqrt() + p.tau / (m.sqrt() * w.sqrt()))
        + p.gamma * p.h_norm)
}

/// Sufficient condition for detectability: `‖a‖₂` strictly above
/// [`min_attack_norm`]. When it holds, `ℓ < u`.
pub fn detectability_condition(a_norm: f64, p: &BoundParams) -> bool {
    a_norm > min_attack_norm(p)
}

/// Limit of [`min_attack_norm`] as the window grows without bound:
/// `2[ν√M(1+ε) + ν + γ‖H‖]`. No finite window helps below this.
pub fn min_window_limit(p: &BoundParams) -> f64 {
    2.0 * (p.nu * (p.m as f64).sqrt() * (1.0 + p.eps) + p.nu + p.gamma * p.h_norm)
}

/// Smallest window size for which [`detectability_condition`] holds at
/// `a_norm`, found by scanning upward (the condition is monotone in `w`).
/// The `w` field of `p` is ignored.
pub fn min_window(a_norm: f64, p: &BoundParams) -> Result<usize> {
    if !a_norm.is_finite() || a_norm <= 0.0 {
        return Err(Error::InvalidInput(
            "attack norm must be positive and finite".into(),
        ));
    }
    let limit = min_window_limit(p);
    if a_norm <= limit {
        return Err(Error::NoSolution(format!(
            "no window size yields detectability: ‖a‖₂ = {a_norm} is at or below \
             the large-window limit {limit}"
        )));
    }
    let mut probe = *p;
    for w in 1..=MIN_WINDOW_CAP {
        probe.w = w;
        if detectability_condition(a_norm, &probe) {
            return Ok(w);
        }
    }
    Err(Error::NoSolution(format!(
        "no window size up to {MIN_WINDOW_CAP} yields detectability"
    )))
}

/// The at-change envelope assumes the attack dominates the instantaneous
/// noise: `‖a‖₂ ≥ ‖e^{t_a}‖₂`. Evaluated per realization by the harness.
pub fn attack_dominates_noise(a_norm: f64, noise_norm: f64) -> bool {
    a_norm >= noise_norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn section_v_params() -> BoundParams {
        BoundParams::new(0.05, 85, 22)
    }

    #[test]
    fn gaussian_norm_tail_values() {
        assert_eq!(gaussian_norm_tail(0.0, 85).unwrap(), 1.0);
        // Independent route: exp((M/2)(ln(1+eps) - eps)).
        let oracle = (42.5f64 * (1.75f64.ln() - 0.75)).exp();
        let got = gaussian_norm_tail(0.75, 85).unwrap();
        assert!((got - oracle).abs() < 1e-15);
        assert!((got - 3.0618256607955e-4).abs() < 1e-7);
        assert!(gaussian_norm_tail(-0.1, 85).is_err());
    }

    #[test]
    fn gaussian_matrix_tail_values() {
        assert_eq!(gaussian_matrix_tail(0.0).unwrap(), 2.0);
        let got = gaussian_matrix_tail(4.0).unwrap();
        assert!((got - 6.709252558050237e-4).abs() < 1e-7);
        assert!(gaussian_matrix_tail(-1.0).is_err());
    }

    #[test]
    fn gaussian_norm_monte_carlo_soundness() {
        // Fraction of Gaussian 85-vectors with ‖e‖₂ ≥ ν√85(1.75) must stay
        // below the bound (plus slack); in practice the event never fires.
        let nu = 0.05;
        let cutoff = nu * 85f64.sqrt() * 1.75;
        let bound = gaussian_norm_tail(0.75, 85).unwrap();
        let trials = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let mut hits = 0usize;
        for _ in 0..trials {
            let sq: f64 = (0..85)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    (nu * z) * (nu * z)
                })
                .sum();
            if sq.sqrt() >= cutoff {
                hits += 1;
            }
        }
        let freq = hits as f64 / trials as f64;
        let slack = 3.0 * (bound * (1.0 - bound) / trials as f64).sqrt();
        assert!(freq <= bound + slack, "freq {freq} vs bound {bound}");
    }

    #[test]
    fn gaussian_matrix_monte_carlo_soundness() {
        // Fraction of Gaussian 85x16 matrices with σ₁ ≥ ν(√85 + √16 + 4)
        // must stay below 2e⁻⁸ (plus slack).
        use crate::numerics::{largest_singular_value, Matrix};
        let nu = 0.05;
        let cutoff = nu * (85f64.sqrt() + 16f64.sqrt() + 4.0);
        let bound = gaussian_matrix_tail(4.0).unwrap();
        let trials = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(202);
        let mut hits = 0usize;
        for _ in 0..trials {
            let g = Matrix::from_fn(85, 16, |_, _| nu * rng.sample::<f64, _>(StandardNormal));
            if largest_singular_value(&g).unwrap() >= cutoff {
                hits += 1;
            }
        }
        let freq = hits as f64 / trials as f64;
        let slack = 3.0 * (bound * (1.0 - bound) / trials as f64).sqrt();
        assert!(freq <= bound + slack, "freq {freq} vs bound {bound}");
    }

    #[test]
    fn threshold_ell_reference_values() {
        let mut p = BoundParams::new(0.0, 85, 8);
        assert_eq!(threshold_ell(&p), 0.0);

        p.nu = 0.01;
        assert_relative_eq!(threshold_ell(&p), 0.6168238841845762, max_relative = 1e-12);

        // Doubling gamma doubles the gamma term (sole term when nu = 0).
        let g1 = BoundParams {
            nu: 0.0,
            gamma: 0.3,
            h_norm: 2.0,
            ..BoundParams::new(0.0, 85, 8)
        };
        let g2 = BoundParams { gamma: 0.6, ..g1 };
        assert_relative_eq!(
            threshold_ell(&g2),
            2.0 * threshold_ell(&g1),
            max_relative = 1e-12
        );
    }

    #[test]
    fn threshold_u_reference_values() {
        let p = BoundParams {
            nu: 0.01,
            ..BoundParams::new(0.01, 85, 8)
        };
        assert_relative_eq!(
            threshold_u(2.0, &p),
            5.040030365307804,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            threshold_u(0.0, &p),
            -threshold_ell(&p),
            max_relative = 1e-12
        );
        let clean = BoundParams::new(0.0, 85, 8);
        assert_relative_eq!(
            threshold_u(3.0, &clean),
            3.0 * 8f64.sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn tail_probability_reference_values() {
        let p = BoundParams::new(0.01, 85, 8);
        let tail = tail_probability(&p);
        assert!((tail - 9.771078218845765e-4).abs() < 1e-7);
        // τ → ∞ leaves only the vector term.
        let p_inf = BoundParams {
            tau: 1e9,
            ..BoundParams::new(0.01, 85, 8)
        };
        assert_relative_eq!(
            tail_probability(&p_inf),
            gaussian_norm_tail(0.75, 85).unwrap(),
            max_relative = 1e-12
        );
        // Pre-clamp sum decomposes exactly.
        let split = gaussian_norm_tail(p.eps, p.m).unwrap() + gaussian_matrix_tail(p.tau).unwrap();
        assert!((tail_probability_raw(&p) - split).abs() < 1e-15);
        // τ = 0 saturates the clamp.
        let p0 = BoundParams {
            tau: 0.0,
            ..BoundParams::new(0.01, 85, 8)
        };
        assert!(tail_probability_raw(&p0) > 1.0);
        assert_eq!(tail_probability(&p0), 1.0);
    }

    #[test]
    fn detection_probability_reference_values() {
        let p = BoundParams::new(0.01, 85, 8);
        assert!((detection_probability_lower_bound(&p) - 0.9980457843562308).abs() < 1e-7);
        let p0 = BoundParams {
            tau: 0.0,
            ..BoundParams::new(0.01, 85, 8)
        };
        assert_eq!(detection_probability_signed(&p0), -1.0);
        assert_eq!(detection_probability_lower_bound(&p0), 0.0);
        // Monotone increasing in tau and in m.
        let more_tau = BoundParams {
            tau: 5.0,
            ..BoundParams::new(0.01, 85, 8)
        };
        let more_m = BoundParams::new(0.01, 120, 8);
        assert!(detection_probability_signed(&more_tau) > detection_probability_signed(&p));
        assert!(detection_probability_signed(&more_m) > detection_probability_signed(&p));
    }

    #[test]
    fn detectability_condition_at_the_published_operating_point() {
        let p22 = section_v_params();
        assert_relative_eq!(
            min_attack_norm(&p22),
            1.9952619148452237,
            max_relative = 1e-12
        );
        assert!(detectability_condition(2.0, &p22));

        let p21 = BoundParams { w: 21, ..p22 };
        assert_relative_eq!(
            min_attack_norm(&p21),
            2.0018943901613913,
            max_relative = 1e-12
        );
        assert!(!detectability_condition(2.0, &p21));

        // Noiseless, variation-free systems detect any attack.
        let clean = BoundParams::new(0.0, 85, 4);
        assert!(detectability_condition(1e-12, &clean));
    }

    #[test]
    fn min_window_matches_published_operating_point() {
        let p = section_v_params();
        assert_eq!(min_window(2.0, &p).unwrap(), 22);
        let clean = BoundParams::new(0.0, 85, 1);
        assert_eq!(min_window(1.0, &clean).unwrap(), 1);
    }

    #[test]
    fn min_window_reports_infeasible_targets() {
        let p = section_v_params();
        // Below the large-window limit 2[ν√M(1+ε) + ν] ≈ 1.7134.
        assert!(matches!(min_window(1.7, &p), Err(Error::NoSolution(_))));
        assert!(matches!(min_window(0.0, &p), Err(Error::InvalidInput(_))));
        // Just above the limit still has a (large) finite answer.
        assert!(min_window(1.72, &p).unwrap() > 22);
    }

    #[test]
    fn min_attack_norm_monotone_in_window() {
        let p8 = BoundParams::new(0.03, 85, 8);
        let p64 = BoundParams::new(0.03, 85, 64);
        assert!(min_attack_norm(&p8) > min_attack_norm(&p64));
        let clean = BoundParams::new(0.0, 85, 8);
        assert_eq!(min_attack_norm(&clean), 0.0);
    }

    #[test]
    fn validate_rejects_degenerate_params() {
        let mut p = BoundParams::new(0.05, 85, 8);
        assert!(p.validate().is_ok());
        p.w = 0;
        assert!(p.validate().is_err());
        let mut q = BoundParams::new(-0.1, 85, 8);
        assert!(q.validate().is_err());
        q.nu = f64::NAN;
        assert!(q.validate().is_err());
    }

    #[test]
    fn bound_params_json_keys_match_field_names() {
        let p = BoundParams {
            nu: 0.05,
            m: 85,
            w: 22,
            tau: 4.0,
            eps: 0.75,
            gamma: 0.1,
            h_norm: 350.0,
        };
        let json = serde_json::to_value(p).unwrap();
        for key in ["nu", "m", "w", "tau", "eps", "gamma", "h_norm"] {
            assert!(json.get(key).is_some(), "missing key {key}");
        }
        // Defaults fill in tau/eps when omitted.
        let parsed: BoundParams = serde_json::from_str(r#"{"nu": 0.01, "m": 85, "w": 8}"#).unwrap();
        assert_eq!(parsed.tau, DEFAULT_TAU);
        assert_eq!(parsed.eps, DEFAULT_EPS);
    }

    fn arb_params() -> impl Strategy<Value = BoundParams> {
        (
            0.0f64..0.2,
            1usize..200,
            1usize..128,
            0.0f64..8.0,
            0.0f64..3.0,
            0.0f64..0.5,
            0.0f64..400.0,
        )
            .prop_map(|(nu, m, w, tau, eps, gamma, h_norm)| BoundParams {
                nu,
                m,
                w,
                tau,
                eps,
                gamma,
                h_norm,
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn ell_below_u_iff_gap_positive(p in arb_params(), a_norm in 0.0f64..10.0) {
            let ell = threshold_ell(&p);
            let u = threshold_u(a_norm, &p);
            // u - ℓ > 0 exactly when √w‖a‖₂ > 2ℓ.
            let gap = (p.w as f64).sqrt() * a_norm - 2.0 * ell;
            prop_assert_eq!(u - ell > 0.0, gap > 0.0);
        }

        #[test]
        fn detectability_implies_ell_below_u(p in arb_params(), a_norm in 0.0f64..10.0) {
            if detectability_condition(a_norm, &p) {
                prop_assert!(threshold_ell(&p) < threshold_u(a_norm, &p));
            }
        }

        #[test]
        fn min_window_is_exact(p in arb_params(), a_norm in 0.1f64..10.0) {
            match min_window(a_norm, &p) {
                Ok(w) => {
                    let mut probe = p;
                    probe.w = w;
                    prop_assert!(detectability_condition(a_norm, &probe));
                    if w > 1 {
                        probe.w = w - 1;
                        prop_assert!(!detectability_condition(a_norm, &probe));
                    }
                }
                Err(Error::NoSolution(_)) => {
                    // Infeasible: even a huge window must not satisfy the condition.
                    let mut probe = p;
                    probe.w = MIN_WINDOW_CAP;
                    prop_assert!(!detectability_condition(a_norm, &probe));
                }
                Err(e) => return Err(TestCaseError::fail(format!("unexpected error {e}"))),
            }
        }

        #[test]
        fn ell_is_monotone_in_every_parameter(p in arb_params()) {
            let base = threshold_ell(&p);
            let bump = 1.01;
            let nudged = [
                BoundParams { nu: p.nu * bump + 1e-6, ..p },
                BoundParams { gamma: p.gamma * bump + 1e-6, ..p },
                BoundParams { tau: p.tau * bump + 1e-6, ..p },
                BoundParams { eps: p.eps * bump + 1e-6, ..p },
                BoundParams { w: p.w + 1, ..p },
                BoundParams { m: p.m + 1, ..p },
            ];
            for q in nudged {
                prop_assert!(threshold_ell(&q) >= base - 1e-12, "ell not monotone at {:?}", q);
            }
        }

        #[test]
        fn min_attack_norm_decreases_with_window(p in arb_params()) {
            let wider = BoundParams { w: p.w + 1, ..p };
            prop_assert!(min_attack_norm(&wider) <= min_attack_norm(&p) + 1e-12);
        }
    }
}
