//! Minimal numeric kernel: dense vectors and matrices, a counter-based
//! seeded RNG with labeled sub-seeding, small MLPs with hand-derived
//! gradients, and plain stochastic gradient descent. Everything is pure
//! functions over explicit state; RNG streams are passed by value and never
//! shared, so any of this is safe to call from multiple threads on disjoint
//! data.

mod linalg;
mod mlp;
mod rng;

pub use linalg::{
    add_scaled, all_finite, cosine_similarity, dot, norm, squared_distance, sub, Mat64, Vec64,
};
pub use mlp::{sample_gaussian, sgd_step, Activation, Mlp, MlpCache, MlpGrads, ResidualMlp};
pub use rng::SeededRng;

/// Central finite-difference gradient of `f` at `x` with step `h`.
/// Test oracle for every analytic gradient in the crate; lives here so unit
/// and acceptance suites share one implementation.
pub fn finite_difference_grad(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec64 {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let fp = f(&probe);
        probe[i] = orig - h;
        let fm = f(&probe);
        probe[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Relative error used by the gradient suite: `|a-b| / max(1e-8, |a|, |b|)`.
pub fn grad_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, n)| (a - n).abs() / (a.abs().max(n.abs()).max(1e-8)))
        .fold(0.0, f64::max)
}
