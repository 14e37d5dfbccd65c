//! Seeded random problem instances for tests and sweeps.

use rand::Rng;

use crate::error::Result;
use crate::linalg::Matrix;
use crate::problem::{NormalizedProblem, PowerBounds};
use crate::scalar::Scalar;

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..=hi.ln()).exp()
}

/// Noisy instance with a `[p_min, p_max]` box.
///
/// Cross couplings are log-uniform on `[0.01, 1]`, self-interference on
/// `[1e-3, 1e-2]`, noise on `[0.01, 0.1]`, `p_max` on `[0.5, 1]` and
/// `p_min = p_max·U[1e-3, 1e-2]`. Couplings are strong enough that the
/// optimum mixes interior and boundary coordinates.
pub fn noisy_box<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<NormalizedProblem<T>> {
    let v = Matrix::from_fn(n, n, |i, j| T::lit(if i == j { log_uniform(rng, 1e-3, 1e-2) } else { log_uniform(rng, 0.01, 1.0) }));
    let zeta = (0..n).map(|_| T::lit(rng.random_range(0.01..=0.1))).collect();
    let p_max: Vec<T> = (0..n).map(|_| T::lit(rng.random_range(0.5..=1.0))).collect();
    let p_min = p_max.iter().map(|&m| m * T::lit(rng.random_range(1e-3..=1e-2))).collect();
    NormalizedProblem::new(v, zeta, PowerBounds::boxed(p_min, p_max))
}

/// Noiseless, unbounded instance with every entry of `V` log-uniform on `[0.01, 1]`.
pub fn noiseless<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<NormalizedProblem<T>> {
    let v = Matrix::from_fn(n, n, |_, _| T::lit(log_uniform(rng, 0.01, 1.0)));
    NormalizedProblem::new(v, vec![T::zero(); n], PowerBounds::unbounded(n))
}

/// Positive vector with entries log-uniform on `[0.01, 10]`.
pub fn positive_vector<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<T> {
    (0..n).map(|_| T::lit(log_uniform(rng, 0.01, 10.0))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn instances_are_valid_and_deterministic() {
        for seed in 0..20 {
            let a: NormalizedProblem<f64> = noisy_box(5, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b: NormalizedProblem<f64> = noisy_box(5, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(a.v(), b.v());
            assert_eq!(a.zeta(), b.zeta());
            assert!(noiseless::<f64, _>(4, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap().is_interference_limited());
        }
    }
}
