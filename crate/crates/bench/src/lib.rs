//! Fixed inputs shared by the benchmarks.

use bkp_core::{Lattice, PoleState, C64};

pub fn lattice() -> Lattice {
    Lattice::new(C64::new(0.6, 0.1), C64::new(0.2, 0.7)).expect("valid periods")
}

/// `n` poles on a small spiral with unit-scale velocities.
pub fn state(n: usize) -> PoleState {
    let x = (0..n)
        .map(|k| C64::from_polar(0.1 + 0.08 * k as f64, 2.1 * k as f64))
        .collect();
    let v = (0..n)
        .map(|k| C64::new(0.3 - 0.2 * k as f64, 0.1 * k as f64))
        .collect();
    PoleState::new(0.0, x, v).expect("matching lengths")
}

/// Points spread over the fundamental cell, away from the origin.
pub fn points(count: usize) -> Vec<C64> {
    (0..count)
        .map(|k| {
            C64::from_polar(
                0.15 + 0.25 * (k as f64 / count as f64),
                0.7 + 2.4 * k as f64,
            )
        })
        .collect()
}
