use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ccf::Role;
use super::matrix::StoredMatrix;
use crate::error::{Error, Result};

/// Smallest and largest value drawn for a nonzero cell. Integer values keep
/// products and sums exact in `f64`.
pub const NONZERO_RANGE: (i32, i32) = (1, 9);

/// Dense matrix whose cells are independently nonzero with probability
/// `density`. A pure function of its arguments.
pub fn gen_uniform_random(
    role: Role,
    rows: usize,
    cols: usize,
    density: f64,
    seed: u64,
) -> Result<StoredMatrix> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Density(density));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..rows * cols)
        .map(|_| {
            if rng.gen::<f64>() < density {
                f64::from(rng.gen_range(NONZERO_RANGE.0..=NONZERO_RANGE.1))
            } else {
                0.0
            }
        })
        .collect();
    StoredMatrix::dense(role, rows, cols, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fully_dense_has_no_zeros() {
        let m = gen_uniform_random(Role::A, 17, 9, 1.0, 3).unwrap();
        assert_eq!(m.nnz(), 17 * 9);
    }

    #[test]
    fn deterministic() {
        let a = gen_uniform_random(Role::B, 20, 30, 0.3, 42).unwrap();
        let b = gen_uniform_random(Role::B, 20, 30, 0.3, 42).unwrap();
        let c = gen_uniform_random(Role::B, 20, 30, 0.3, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn realized_density_band() {
        for seed in [0u64, 1, 0xdead_beef] {
            let m = gen_uniform_random(Role::A, 1000, 1000, 0.05, seed).unwrap();
            let d = m.density();
            assert!((d - 0.05).abs() <= 0.01, "seed {seed}: {d}");
        }
    }

    #[test]
    fn values_in_range() {
        let m = gen_uniform_random(Role::A, 30, 30, 0.5, 9).unwrap();
        assert!(m
            .dense_values()
            .iter()
            .all(|&v| v == 0.0 || (1.0..=9.0).contains(&v) && v.fract() == 0.0));
    }

    #[test]
    fn rejects_bad_density() {
        for d in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(gen_uniform_random(Role::A, 2, 2, d, 0), Err(Error::Density(_))));
        }
    }
}
