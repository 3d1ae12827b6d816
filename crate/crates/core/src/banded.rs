//! Symmetric banded matrices and their Cholesky factorization.
//!
//! Only the lower band is stored: row `i` holds entries `(i, i−k)` for
//! `k = 0..=bandwidth`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bw: bandwidth,
            data: vec![0.0; n * (bandwidth + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        (k <= self.bw).then(|| i * (self.bw + 1) + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.idx(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Adds `v` to entry `(i, j)` (and so also to `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        match self.idx(i, j) {
            Some(k) => {
                self.data[k] += v;
                Ok(())
            }
            None => Err(Error::Structural(format!(
                "entry ({i}, {j}) lies outside bandwidth {}",
                self.bw
            ))),
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.data[i * (self.bw + 1) + (i - j)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// In-place Cholesky `A = L Lᵀ`; fails when a pivot is not positive.
    pub fn cholesky(mut self) -> Result<BandedCholesky> {
        let w = self.bw + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let mut sum = self.data[i * w + (i - j)];
                let kl = lo.max(j.saturating_sub(self.bw));
                for k in kl..j {
                    sum -= self.data[i * w + (i - k)] * self.data[j * w + (j - k)];
                }
                if j == i {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(Error::Numeric(format!(
                            "matrix is not positive definite (pivot {sum:e} at row {i})"
                        )));
                    }
                    self.data[i * w] = sum.sqrt();
                } else {
                    self.data[i * w + (i - j)] = sum / self.data[j * w];
                }
            }
        }
        Ok(BandedCholesky { l: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    l: SymBanded,
}

impl BandedCholesky {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.l.n;
        let bw = self.l.bw;
        let w = bw + 1;
        let d = &self.l.data;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = y[i];
            for k in lo..i {
                s -= d[i * w + (i - k)] * y[k];
            }
            y[i] = s / d[i * w];
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = y[i];
            for k in i + 1..=hi {
                s -= d[k * w + (k - i)] * y[k];
            }
            y[i] = s / d[i * w];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tridiag(n: usize) -> SymBanded {
        let mut a = SymBanded::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0).unwrap();
            if i + 1 < n {
                a.add(i + 1, i, -1.0).unwrap();
            }
        }
        a
    }

    #[test]
    fn solves_tridiagonal() {
        let a = tridiag(5);
        let x = [1.0, -2.0, 3.0, 0.5, 4.0];
        let b = a.mul_vec(&x);
        let got = a.clone().cholesky().unwrap().solve(&b);
        for (g, w) in got.iter().zip(x) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite_and_out_of_band() {
        let mut a = SymBanded::zeros(2, 1);
        a.add(0, 0, 1.0).unwrap();
        a.add(1, 1, -1.0).unwrap();
        assert!(a.clone().cholesky().is_err());
        assert!(a.add(0, 1, 1.0).is_ok());
        let mut b = SymBanded::zeros(3, 1);
        assert!(b.add(2, 0, 1.0).is_err());
        assert_eq!(b.get(0, 2), 0.0);
    }

    proptest! {
        #[test]
        fn random_diagonally_dominant_systems(
            n in 1usize..30,
            bw in 0usize..5,
            seed in proptest::collection::vec(-1.0f64..1.0, 200),
        ) {
            let mut a = SymBanded::zeros(n, bw);
            let mut t = 0;
            for i in 0..n {
                for j in i.saturating_sub(bw)..i {
                    a.add(i, j, seed[t % seed.len()]).unwrap();
                    t += 1;
                }
            }
            for i in 0..n {
                a.add(i, i, 2.0 * bw as f64 + 1.0).unwrap();
            }
            let x: Vec<f64> = (0..n).map(|i| seed[(i * 7) % seed.len()]).collect();
            let b = a.mul_vec(&x);
            let got = a.cholesky().unwrap().solve(&b);
            for (g, w) in got.iter().zip(&x) {
                prop_assert!((g - w).abs() < 1e-10);
            }
        }
    }
}
