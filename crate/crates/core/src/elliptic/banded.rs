//! Banded LU factorization with partial pivoting.
//!
//! Row `i` stores columns `i - kl ..= i + kl + ku`; the extra `kl`
//! superdiagonals absorb fill-in from row interchanges.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.kl + self.ku, "({r},{c}) outside band");
        r * self.width + (c + self.kl - r)
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.kl < r || c > r + self.kl + self.ku {
            return 0.0;
        }
        self.data[self.slot(r, c)]
    }

    /// Mutable view of row `r`'s storage; entry for column `c` sits at `c + kl - r`.
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let w = self.width;
        &mut self.data[r * w..(r + 1) * w]
    }

    pub fn kl(&self) -> usize {
        self.kl
    }

    /// `y = A x` using the original (unfactored) band `[i - kl, i + ku]`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                let lo = r.saturating_sub(self.kl);
                let hi = (r + self.ku).min(self.n - 1);
                (lo..=hi).map(|c| self.get(r, c) * x[c]).sum()
            })
            .collect()
    }

    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut pivots = vec![0usize; n];
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.data[self.slot(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > 1e-300 && best > scale * 1e-15) {
                return Err(Error::Singular(format!("zero pivot at row {k} of {n}")));
            }
            pivots[k] = p;
            if p != k {
                for c in k..=last_col {
                    let (a, b) = (self.slot(k, c), self.slot(p, c));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(k, k)];
            let (w, kpos) = (self.width, self.slot(k, k));
            for r in k + 1..=last_row {
                let rk = self.slot(r, k);
                let l = self.data[rk] / pivot;
                self.data[rk] = l;
                if l == 0.0 {
                    continue;
                }
                // Columns k+1..=last_col of rows k and r are contiguous in storage.
                let len = last_col - k;
                let (top, bottom) = self.data.split_at_mut(rk);
                let src = &top[kpos + 1..kpos + 1 + len];
                let dst = &mut bottom[1..1 + len];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= l * s;
                }
                debug_assert!(kpos < rk && w > 0);
            }
        }
        Ok(BandLu { a: self, pivots })
    }
}

/// Factored band matrix, reusable for many right-hand sides.
#[derive(Debug, Clone)]
pub struct BandLu {
    a: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &mut [f64]) {
        let a = &self.a;
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for r in k + 1..=(k + kl).min(n - 1) {
                    b[r] -= a.data[a.slot(r, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let base = a.slot(k, k);
            let last = (k + kl + ku).min(n - 1);
            let row = &a.data[base + 1..base + 1 + (last - k)];
            let s: f64 = row.iter().zip(&b[k + 1..=last]).map(|(u, x)| u * x).sum();
            b[k] = (b[k] - s) / a.data[base];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        // Gaussian elimination with partial pivoting; independent oracle.
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a
            .iter()
            .zip(b)
            .map(|(r, &v)| {
                let mut r = r.clone();
                r.push(v);
                r
            })
            .collect();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
            m.swap(k, p);
            for r in k + 1..n {
                let l = m[r][k] / m[k][k];
                for c in k..=n {
                    m[r][c] -= l * m[k][c];
                }
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|c| m[k][c] * x[c]).sum();
            x[k] = (m[k][n] - s) / m[k][k];
        }
        x
    }

    #[test]
    fn matches_dense_solver_with_pivoting() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (n, kl, ku) = (40, 3, 5);
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = vec![vec![0.0; n]; n];
        for r in 0..n {
            for c in r.saturating_sub(kl)..=(r + ku).min(n - 1) {
                // Weak diagonal forces row interchanges.
                let v: f64 = rng.random_range(-1.0..1.0) * if r == c { 0.01 } else { 1.0 };
                band.add(r, c, v);
                dense[r][c] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let want = dense_solve(&dense, &b);
        let lu = band.factor().unwrap();
        let mut x = b.clone();
        lu.solve(&mut x);
        for (g, w) in x.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9 * (1.0 + w.abs()), "{g} vs {w}");
        }
    }

    #[test]
    fn singular_is_reported() {
        let band = BandMatrix::zeros(4, 1, 1);
        assert!(matches!(band.factor(), Err(Error::Singular(_))));
    }
}
