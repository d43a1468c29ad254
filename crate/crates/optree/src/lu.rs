//! Dense LU factorization with partial pivoting, used for the simplex
//! basis matrix. Stores L (unit diagonal) and U packed in place plus the
//! pivot row sequence.

pub struct Lu {
    n: usize,
    f: Vec<f64>,
    piv: Vec<usize>,
}

#[derive(Debug)]
pub struct Singular;

impl Lu {
    /// Factorizes the row-major `n x n` matrix in `mat` (consumed).
    pub fn factorize(n: usize, mut mat: Vec<f64>) -> Result<Lu, Singular> {
        debug_assert_eq!(mat.len(), n * n);
        let mut piv = vec![0usize; n];
        for k in 0..n {
            // Partial pivot: largest magnitude in column k at or below row k.
            let mut p = k;
            let mut best = mat[k * n + k].abs();
            for i in (k + 1)..n {
                let v = mat[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best < 1e-11 {
                return Err(Singular);
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    mat.swap(k * n + j, p * n + j);
                }
            }
            let pivot = mat[k * n + k];
            for i in (k + 1)..n {
                let l = mat[i * n + k] / pivot;
                mat[i * n + k] = l;
                if l != 0.0 {
                    for j in (k + 1)..n {
                        mat[i * n + j] -= l * mat[k * n + j];
                    }
                }
            }
        }
        Ok(Lu { n, f: mat, piv })
    }

    /// Solves `B x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        // Forward: L y = P b (unit diagonal).
        for i in 1..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.f[i * n + j] * b[j];
            }
            b[i] = s;
        }
        // Back: U x = y.
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in (i + 1)..n {
                s -= self.f[i * n + j] * b[j];
            }
            b[i] = s / self.f[i * n + i];
        }
    }

    /// Solves `B^T y = c` in place.
    pub fn solve_t(&self, b: &mut [f64]) {
        let n = self.n;
        // B^T = U^T L^T P, so solve U^T z = c, then L^T w = z, then y = P^T w.
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.f[j * n + i] * b[j];
            }
            b[i] = s / self.f[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in (i + 1)..n {
                s -= self.f[j * n + i] * b[j];
            }
            b[i] = s;
        }
        for k in (0..n).rev() {
            b.swap(k, self.piv[k]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    fn rand_f64(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    #[test]
    fn solves_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n in [1usize, 2, 5, 17, 40] {
            let mat: Vec<f64> = (0..n * n).map(|_| rand_f64(&mut rng) * 4.0).collect();
            let lu = match Lu::factorize(n, mat.clone()) {
                Ok(lu) => lu,
                Err(_) => continue,
            };
            let x_true: Vec<f64> = (0..n).map(|_| rand_f64(&mut rng)).collect();
            let mut b = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    b[i] += mat[i * n + j] * x_true[j];
                }
            }
            let mut x = b.clone();
            lu.solve(&mut x);
            for i in 0..n {
                assert!((x[i] - x_true[i]).abs() < 1e-8, "n={n} i={i}");
            }

            let mut bt = vec![0.0; n];
            for j in 0..n {
                for i in 0..n {
                    bt[j] += mat[i * n + j] * x_true[i];
                }
            }
            let mut y = bt.clone();
            lu.solve_t(&mut y);
            for i in 0..n {
                assert!((y[i] - x_true[i]).abs() < 1e-8, "transpose n={n} i={i}");
            }
        }
    }

    #[test]
    fn singular_detected() {
        let mat = vec![1.0, 2.0, 2.0, 4.0];
        assert!(Lu::factorize(2, mat).is_err());
    }
}
