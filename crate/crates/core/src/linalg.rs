//! Symmetric positive definite banded systems.
//!
//! The implicit diffusion solves produce symmetric M-matrices whose bandwidth
//! is 1 on intervals (tridiagonal) and `nx - 1` on rectangles (five-point
//! stencil in row-major interior ordering). A banded Cholesky factorization
//! covers both.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("right-hand side has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Lower band storage of a symmetric matrix: `band[i * (bw + 1) + k]` holds
/// entry `(i, i - k)` for `k = 0..=bw`.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bw: bandwidth,
            band: vec![0.0; n * (bandwidth + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Adds `value` to entries `(i, j)` and `(j, i)`. Panics if `|i - j|`
    /// exceeds the bandwidth.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let k = r - c;
        assert!(k <= self.bw, "entry ({i}, {j}) outside band {}", self.bw);
        self.band[r * (self.bw + 1) + k] += value;
    }

    pub fn add_diagonal(&mut self, i: usize, value: f64) {
        self.band[i * (self.bw + 1)] += value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let k = r - c;
        if k > self.bw {
            0.0
        } else {
            self.band[r * (self.bw + 1) + k]
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.band[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            y[i] += row[0] * x[i];
            for k in 1..=self.bw.min(i) {
                let a = row[k];
                y[i] += a * x[i - k];
                y[i - k] += a * x[i];
            }
        }
        y
    }

    /// In-place Cholesky factorization `A = L L^T`; the band then holds `L`.
    pub fn factorize(mut self) -> Result<CholeskyBand, LinalgError> {
        let w = self.bw + 1;
        for i in 0..self.n {
            let kmax = self.bw.min(i);
            for k in (1..=kmax).rev() {
                // L[i][j] with j = i - k
                let j = i - k;
                let mut s = self.band[i * w + k];
                let lo = j.saturating_sub(self.bw);
                let lo = lo.max(i.saturating_sub(self.bw));
                for c in lo..j {
                    s -= self.band[i * w + (i - c)] * self.band[j * w + (j - c)];
                }
                self.band[i * w + k] = s / self.band[j * w];
            }
            let mut d = self.band[i * w];
            for c in i.saturating_sub(self.bw)..i {
                let l = self.band[i * w + (i - c)];
                d -= l * l;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { row: i, pivot: d });
            }
            self.band[i * w] = d.sqrt();
        }
        Ok(CholeskyBand { inner: self })
    }

    pub fn solve(self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        self.factorize()?.solve(rhs)
    }
}

#[derive(Debug, Clone)]
pub struct CholeskyBand {
    inner: BandedSpd,
}

impl CholeskyBand {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.inner.n;
        if rhs.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: rhs.len(),
            });
        }
        let bw = self.inner.bw;
        let w = bw + 1;
        let l = &self.inner.band;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for c in i.saturating_sub(bw)..i {
                s -= l[i * w + (i - c)] * y[c];
            }
            y[i] = s / l[i * w];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for r in (i + 1)..n.min(i + bw + 1) {
                s -= l[r * w + (r - i)] * y[r];
            }
            y[i] = s / l[i * w];
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut x = b.to_vec();
        for k in 0..n {
            let piv = (k..n)
                .max_by(|&i, &j| m[i][k].abs().partial_cmp(&m[j][k].abs()).unwrap())
                .unwrap();
            m.swap(k, piv);
            x.swap(k, piv);
            for i in (k + 1)..n {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                x[i] -= f * x[k];
            }
        }
        for k in (0..n).rev() {
            for j in (k + 1)..n {
                x[k] -= m[k][j] * x[j];
            }
            x[k] /= m[k][k];
        }
        x
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let n = 12;
        let mut a = BandedSpd::zeros(n, 1);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            let d = 2.5 + 0.1 * i as f64;
            a.add_diagonal(i, d);
            dense[i][i] += d;
            if i > 0 {
                a.add(i, i - 1, -1.0);
                dense[i][i - 1] -= 1.0;
                dense[i - 1][i] -= 1.0;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let x = a.clone().solve(&b).unwrap();
        let xd = dense_solve(&dense, &b);
        for (p, q) in x.iter().zip(&xd) {
            assert!((p - q).abs() < 1e-12);
        }
        let r = a.matvec(&x);
        for (p, q) in r.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn five_point_matches_dense() {
        // 4x5 interior grid, bandwidth 4
        let (nx, ny) = (4usize, 5usize);
        let n = nx * ny;
        let mut a = BandedSpd::zeros(n, nx);
        let mut dense = vec![vec![0.0; n]; n];
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                a.add_diagonal(k, 4.3);
                dense[k][k] += 4.3;
                if i > 0 {
                    a.add(k, k - 1, -1.0);
                    dense[k][k - 1] -= 1.0;
                    dense[k - 1][k] -= 1.0;
                }
                if j > 0 {
                    a.add(k, k - nx, -0.9);
                    dense[k][k - nx] -= 0.9;
                    dense[k - nx][k] -= 0.9;
                }
            }
        }
        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64).cos()).collect();
        let x = a.solve(&b).unwrap();
        let xd = dense_solve(&dense, &b);
        for (p, q) in x.iter().zip(&xd) {
            assert!((p - q).abs() < 1e-12, "{p} vs {q}");
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let mut a = BandedSpd::zeros(2, 1);
        a.add_diagonal(0, 1.0);
        a.add_diagonal(1, 1.0);
        a.add(1, 0, 2.0);
        assert!(matches!(
            a.solve(&[1.0, 1.0]),
            Err(LinalgError::NotPositiveDefinite { row: 1, .. })
        ));
    }
}
