//! Banded LU factorisation without pivoting.
//!
//! The Newton systems of the profile solver are (nearly) M-matrices in
//! row-major node order, so elimination without pivoting is stable and the
//! band structure is preserved.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    /// Half bandwidth; entries with `|i - j| > band` are zero.
    band: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, band: usize) -> Self {
        Self {
            n,
            band,
            data: vec![0.0; n * (2 * band + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(
            i.abs_diff(j) <= self.band,
            "({i}, {j}) outside band {}",
            self.band
        );
        i * (2 * self.band + 1) + (j + self.band - i)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.band {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let w = 2 * self.band + 1;
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.band);
                let hi = (i + self.band).min(self.n - 1);
                (lo..=hi)
                    .map(|j| self.data[i * w + (j + self.band - i)] * x[j])
                    .sum()
            })
            .collect()
    }

    /// In-place Doolittle factorisation.
    pub fn factor(mut self) -> Result<BandLu> {
        let (n, b) = (self.n, self.band);
        let w = 2 * b + 1;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
        for k in 0..n {
            let pivot = self.data[k * w + b];
            if !(math::abs(pivot) > 1e-14 * scale) {
                return Err(Error::SingularMatrix { row: k });
            }
            let hi = (k + b).min(n - 1);
            for i in k + 1..=hi {
                let ik = i * w + (k + b - i);
                let l = self.data[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[ik] = l;
                // Row k entries k+1..=hi sit at offsets b+1.. in its band row.
                let (head, tail) = self.data.split_at_mut(i * w);
                let row_k = &head[k * w + b + 1..k * w + b + 1 + (hi - k)];
                let start = k + 1 + b - i;
                let row_i = &mut tail[start..start + (hi - k)];
                for (a, &u) in row_i.iter_mut().zip(row_k) {
                    *a -= l * u;
                }
            }
        }
        Ok(BandLu { m: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
}

impl BandLu {
    pub fn solve(&self, rhs: &mut [f64]) {
        let (n, b) = (self.m.n, self.m.band);
        let w = 2 * b + 1;
        let d = &self.m.data;
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let mut s = rhs[i];
            for j in lo..i {
                s -= d[i * w + (j + b - i)] * rhs[j];
            }
            rhs[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + b).min(n - 1);
            let mut s = rhs[i];
            for j in i + 1..=hi {
                s -= d[i * w + (j + b - i)] * rhs[j];
            }
            rhs[i] = s / d[i * w + b];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn solves_diagonally_dominant_band_system() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (n, b) = (60, 7);
        let mut m = BandMatrix::zeros(n, b);
        for i in 0..n {
            let mut off = 0.0;
            for j in i.saturating_sub(b)..=(i + b).min(n - 1) {
                if j != i && rng.random_bool(0.6) {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    m.add(i, j, v);
                    off += v.abs();
                }
            }
            m.add(i, i, off + 0.5);
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut rhs = m.mul_vec(&x);
        let lu = m.factor().unwrap();
        lu.solve(&mut rhs);
        for (a, e) in rhs.iter().zip(&x) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let mut m = BandMatrix::zeros(3, 1);
        m.add(0, 0, 1.0);
        m.add(2, 2, 1.0);
        assert!(matches!(m.factor(), Err(Error::SingularMatrix { row: 1 })));
    }
}
