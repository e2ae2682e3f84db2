//! Minimum-window curves: how the required window grows with noise and
//! shrinks with attack magnitude.
//!
//! Sweeps the sufficient detectability condition two ways on the bundled
//! system size: window vs. noise level at ‖a‖₂ = 2, and window vs. attack
//! magnitude at ν = 0.05 (where ‖a‖₂ = 2 needs w ≥ 22). Points beyond the
//! large-window feasibility limit are flagged rather than fatal.
//!
//! Run: `cargo run --example min_window_sweep [out_dir]`

use svdwatch::harness::{run_fig3, ExperimentSpec, Sweep};

fn main() -> svdwatch::Result<()> {
    let mut spec = ExperimentSpec::default();
    if let Some(dir) = std::env::args().nth(1) {
        spec.out_dir = dir.into();
    }

    let by_nu = run_fig3(&spec, &Sweep::default_nu())?;
    let (csv, _) = by_nu.write(&spec.out_dir)?;
    println!(
        "window vs noise at ||a|| = {} -> {}",
        spec.attack.norm,
        csv.display()
    );
    println!("     nu   w_min");
    for row in &by_nu.rows {
        if row[2] == 1.0 {
            println!("  {:.3}   {:5}", row[0], row[1]);
        } else {
            println!("  {:.3}   no finite window suffices", row[0]);
        }
    }

    let by_a = run_fig3(&spec, &Sweep::default_a_norm())?;
    let (csv, _) = by_a.write(&spec.out_dir)?;
    println!(
        "\nwindow vs attack magnitude at nu = {} -> {}",
        spec.sim.nu,
        csv.display()
    );
    println!("  ||a||   w_min");
    for row in &by_a.rows {
        if row[2] == 1.0 {
            println!("  {:5.2}   {:5}", row[0], row[1]);
        } else {
            println!("  {:5.2}   no finite window suffices", row[0]);
        }
    }
    Ok(())
}
