//! Banded Gaussian elimination with partial pivoting for a single right-hand
//! side. Row `i` stores columns `i - kl ..= i + kl + ku`, which leaves room for
//! the fill-in produced by row exchanges.

use num_complex::Complex64;

pub(crate) struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![Complex64::new(0.0, 0.0); n * width],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "({i}, {j}) outside the band");
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "({i}, {j}) outside the band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn clear_row(&mut self, i: usize) {
        let w = self.width;
        self.data[i * w..(i + 1) * w].fill(Complex64::new(0.0, 0.0));
    }

    /// Solves `A x = b` in place of `b`; consumes the factorization.
    /// Returns the smallest pivot magnitude encountered.
    pub fn solve(mut self, b: &mut [Complex64]) -> Result<f64, usize> {
        let n = self.n;
        let reach = self.kl + self.ku;
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + reach).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].norm();
            for r in k + 1..=last_row {
                let v = self.data[self.slot(r, k)].norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(k);
            }
            min_pivot = min_pivot.min(best);
            if p != k {
                for j in k..=last_col {
                    let a = self.slot(k, j);
                    let c = self.slot(p, j);
                    self.data.swap(a, c);
                }
                b.swap(k, p);
            }
            let pivot = self.data[self.slot(k, k)];
            for r in k + 1..=last_row {
                let srk = self.slot(r, k);
                let factor = self.data[srk] / pivot;
                if factor == Complex64::new(0.0, 0.0) {
                    continue;
                }
                self.data[srk] = Complex64::new(0.0, 0.0);
                let row_k = self.slot(k, k);
                let row_r = self.slot(r, k);
                for off in 1..=(last_col - k) {
                    let v = self.data[row_k + off];
                    self.data[row_r + off] -= factor * v;
                }
                let bk = b[k];
                b[r] -= factor * bk;
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + reach).min(n - 1);
            let row_k = self.slot(k, k);
            let mut acc = b[k];
            for off in 1..=(last_col - k) {
                acc -= self.data[row_k + off] * b[k + off];
            }
            b[k] = acc / self.data[row_k];
        }
        Ok(min_pivot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn matches_dense_solution_with_pivoting() {
        // random-ish banded system, zero diagonal forces row exchanges
        let n = 9;
        let (kl, ku) = (2, 3);
        let mut dense = vec![vec![c(0.0, 0.0); n]; n];
        let mut band = BandedMatrix::zeros(n, kl, ku);
        let mut seed = 1u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = if i == j && i % 3 == 0 { c(0.0, 0.0) } else { c(next(), next()) };
                dense[i][j] = v;
                band.set(i, j, v);
            }
        }
        let x_true: Vec<Complex64> = (0..n).map(|k| c(k as f64 + 1.0, -(k as f64))).collect();
        let mut b: Vec<Complex64> = (0..n)
            .map(|i| (0..n).map(|j| dense[i][j] * x_true[j]).sum())
            .collect();
        band.solve(&mut b).unwrap();
        for (x, t) in b.iter().zip(&x_true) {
            assert!((x - t).norm() < 1e-9, "{x} vs {t}");
        }
    }

    #[test]
    fn singular_is_reported() {
        let band = BandedMatrix::zeros(3, 1, 1);
        let mut b = vec![c(1.0, 0.0); 3];
        assert!(band.solve(&mut b).is_err());
    }
}
