use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input outside the domain of an operation (bad periods, bad order, bad tolerances...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Argument within the pole guard of a lattice point.
    #[error("argument {arg} lies {distance:.3e} from a lattice point (guard {guard:.3e})")]
    Pole {
        arg: String,
        distance: f64,
        guard: f64,
    },

    /// Two poles came closer than the allowed separation.
    #[error(
        "poles {i} and {j} collided (separation {separation:.3e} < {threshold:.3e}) at t = {t}"
    )]
    Collision {
        i: usize,
        j: usize,
        separation: f64,
        threshold: f64,
        t: f64,
    },

    #[error("step size underflow at t = {t}: h = {h:.3e} below {h_min:.3e}")]
    StepUnderflow { t: f64, h: f64, h_min: f64 },

    #[error("no convergence after {iterations} iterations (last correction {last_step:.3e})")]
    NoConvergence { iterations: usize, last_step: f64 },

    #[error("null space has dimension >= 2 (pivot ratio {pivot_ratio:.3e})")]
    DegenerateNullSpace { pivot_ratio: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("gave up after {attempts} consecutive draws violating the pole guard for {case}")]
    ResamplingExhausted { case: String, attempts: usize },
}
