//! Tour of the closed-form envelopes and the detectability condition.
//!
//! For the bundled system size (M = 85) this prints the pre-change envelope
//! ℓ, the at-change envelope u, their shared tail probability, the
//! detection-probability lower bound, and the minimum window size needed to
//! detect attacks of various magnitudes.
//!
//! Run: `cargo run --example thresholds`

use svdwatch::bounds::{
    detectability_condition, detection_probability_lower_bound, gaussian_matrix_tail,
    gaussian_norm_tail, min_attack_norm, min_window, tail_probability, threshold_ell, threshold_u,
    BoundParams,
};

fn main() -> svdwatch::Result<()> {
    let (nu, m, a_norm) = (0.05, 85, 2.0);

    let base = BoundParams::new(nu, m, 16);
    println!("tail terms at (tau, eps) = ({}, {}):", base.tau, base.eps);
    println!(
        "  matrix term 2exp(-tau^2/2)      = {:.4e}",
        gaussian_matrix_tail(base.tau)?
    );
    println!(
        "  vector term ((1+eps)e^-eps)^M/2 = {:.4e}",
        gaussian_norm_tail(base.eps, m)?
    );
    println!(
        "  total                           = {:.4e}",
        tail_probability(&base)
    );
    println!(
        "  detection probability bound     >= {:.6}\n",
        detection_probability_lower_bound(&base)
    );

    println!("envelopes vs window size at nu = {nu}, ||a|| = {a_norm}:");
    println!("   w      ell        u    detectable");
    for w in [4, 8, 16, 21, 22, 32, 64] {
        let p = BoundParams::new(nu, m, w);
        println!(
            "{:4}  {:7.4}  {:7.4}    {}",
            w,
            threshold_ell(&p),
            threshold_u(a_norm, &p),
            detectability_condition(a_norm, &p)
        );
    }

    println!("\nsmallest detectable magnitude shrinks with the window:");
    for w in [8, 22, 64] {
        let p = BoundParams::new(nu, m, w);
        println!("  w = {w:3}: ||a|| must exceed {:.4}", min_attack_norm(&p));
    }

    println!("\nminimum window for a given attack magnitude:");
    for a in [1.8, 2.0, 2.5, 3.0, 4.0] {
        match min_window(a, &BoundParams::new(nu, m, 1)) {
            Ok(w) => println!("  ||a|| = {a:.1}: w >= {w}"),
            Err(e) => println!("  ||a|| = {a:.1}: {e}"),
        }
    }
    Ok(())
}
