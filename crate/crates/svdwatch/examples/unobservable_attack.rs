//! Why residual tests miss column-space attacks.
//!
//! Builds an attack vector inside the column space of the measurement matrix
//! (`a = H c`), adds it to a noisy measurement, and shows that the WLS
//! residual is bit-for-bit unaffected while the state estimate silently
//! shifts by exactly `c`. A random attack of the same size is shown for
//! contrast: it lights up the residual immediately.
//!
//! Run: `cargo run --example unobservable_attack`

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use svdwatch::grid::{
    build_h_matrix, is_unobservable, make_unobservable_attack, residual, wls_estimate, GridModel,
    UNOBSERVABLE_TOL,
};
use svdwatch::numerics::Vector;

fn main() -> svdwatch::Result<()> {
    let grid = GridModel::bundled();
    let h = build_h_matrix(&grid)?;
    let lambda = Vector::from_element(h.measurement_count(), 1.0);

    // One noisy snapshot of the system.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = Vector::from_fn(h.state_count(), |_, _| rng.sample(StandardNormal));
    let e = Vector::from_fn(h.measurement_count(), |_, _| {
        0.05 * rng.sample::<f64, _>(StandardNormal)
    });
    let y = &h.h * &x + &e;
    let x_hat = wls_estimate(&y, &h, &lambda)?;
    let r = residual(&y, &h, &x_hat)?;
    println!("clean snapshot: ||residual|| = {:.6}", r.norm());

    // Crafted attack: a = H c supported on bus 30.
    let attack = make_unobservable_attack(&h, &[30], 2.0)?;
    let c = attack.witness.clone().expect("constructed with witness");
    println!(
        "\ncrafted attack: ||a|| = {:.3}, touches {} of {} meters",
        attack.norm(),
        attack.sparsity,
        h.measurement_count()
    );
    let (hidden, _) = is_unobservable(&attack.a, &h, UNOBSERVABLE_TOL)?;
    println!("inside column space of H: {hidden}");

    let y_a = &y + &attack.a;
    let x_hat_a = wls_estimate(&y_a, &h, &lambda)?;
    let r_a = residual(&y_a, &h, &x_hat_a)?;
    println!("attacked residual change: {:.2e}", (&r_a - &r).norm());
    println!(
        "estimate shift vs witness c: ||x_hat_a - x_hat - c|| = {:.2e} (||c|| = {:.4})",
        (&x_hat_a - &x_hat - &c).norm(),
        c.norm()
    );

    // Same magnitude, random direction: plainly visible.
    let mut random_a = Vector::from_fn(h.measurement_count(), |_, _| {
        rng.sample::<f64, _>(StandardNormal)
    });
    random_a *= 2.0 / random_a.norm();
    let (hidden, _) = is_unobservable(&random_a, &h, UNOBSERVABLE_TOL)?;
    let y_r = &y + &random_a;
    let r_r = residual(&y_r, &h, &wls_estimate(&y_r, &h, &lambda)?)?;
    println!(
        "\nrandom attack of the same size: inside column space: {hidden}, \
         residual change {:.3}",
        (&r_r - &r).norm()
    );
    println!("a residual test sees the random attack but never the crafted one");
    Ok(())
}
