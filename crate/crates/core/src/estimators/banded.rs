//! Symmetric banded matrices: LDLᵀ factorization, solves, and the band of
//! the inverse (Hutchinson & de Hoog recursion).

#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    bw: usize,
    /// Row `i` holds `A[i][i - k]` at offset `k`, `k = 0..=bw`.
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j <= self.bw);
        i * (self.bw + 1) + (i - j)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let d = i.abs_diff(j);
        if d > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// The block with the first and last rows and columns removed.
    pub fn interior(&self) -> SymBand {
        assert!(self.n >= 2);
        let m = self.n - 2;
        let mut out = SymBand::zeros(m, self.bw);
        for i in 0..m {
            for k in 0..=self.bw.min(i) {
                out.data[i * (self.bw + 1) + k] = self.get(i + 1, i + 1 - k);
            }
        }
        out
    }

    pub fn diag_trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `self + alpha * other`; the result carries the wider bandwidth.
    pub fn plus_scaled(&self, alpha: f64, other: &SymBand) -> SymBand {
        assert_eq!(self.n, other.n);
        let bw = self.bw.max(other.bw);
        let mut out = SymBand::zeros(self.n, bw);
        for i in 0..self.n {
            for k in 0..=bw.min(i) {
                let j = i - k;
                out.data[i * (bw + 1) + k] = self.get(i, j) + alpha * other.get(i, j);
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            for k in 0..=self.bw.min(i) {
                let j = i - k;
                let a = self.data[i * (self.bw + 1) + k];
                out[i] += a * v[j];
                if k > 0 {
                    out[j] += a * v[i];
                }
            }
        }
        out
    }

    /// `tr(self * other)` for two symmetric banded matrices.
    pub fn trace_product(&self, other: &SymBand) -> f64 {
        let bw = self.bw.min(other.bw);
        let mut t = 0.0;
        for i in 0..self.n {
            t += self.get(i, i) * other.get(i, i);
            for k in 1..=bw.min(i) {
                t += 2.0 * self.get(i, i - k) * other.get(i, i - k);
            }
        }
        t
    }

    pub fn ldl(&self) -> Option<BandLdl> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut l = SymBand::zeros(n, bw);
        let mut d = vec![0.0; n];
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..i {
                // L[i][k] at l.data[i*w + i-k], L[j][k] at l.data[j*w + j-k]
                let mut s = self.data[i * w + (i - j)];
                for k in lo..j {
                    s -= l.data[i * w + (i - k)] * l.data[j * w + (j - k)] * d[k];
                }
                l.data[i * w + (i - j)] = s / d[j];
            }
            let mut s = self.data[i * w];
            for k in lo..i {
                let lik = l.data[i * w + (i - k)];
                s -= lik * lik * d[k];
            }
            if !(s > 0.0) || !s.is_finite() {
                return None;
            }
            d[i] = s;
        }
        Some(BandLdl { l, d })
    }
}

pub struct BandLdl {
    l: SymBand,
    d: Vec<f64>,
}

impl BandLdl {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let bw = self.l.bw;
        let w = bw + 1;
        let l = &self.l.data;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut v = x[i];
            for k in i.saturating_sub(bw)..i {
                v -= l[i * w + (i - k)] * x[k];
            }
            x[i] = v;
        }
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in (i + 1)..n.min(i + w) {
                v -= l[k * w + (k - i)] * x[k];
            }
            x[i] = v;
        }
        x
    }

    /// Entries of `A⁻¹` within the band, in the same storage as `A`.
    pub fn inverse_band(&self) -> SymBand {
        let n = self.d.len();
        let bw = self.l.bw;
        let w = bw + 1;
        let l = &self.l.data;
        let mut s = SymBand::zeros(n, bw);
        // k and j both lie in i..i + w, so S[k][j] is inside the band
        let at = |s: &SymBand, a: usize, b: usize| {
            let (a, b) = if a >= b { (a, b) } else { (b, a) };
            s.data[a * w + (a - b)]
        };
        for i in (0..n).rev() {
            let hi = n.min(i + w);
            for j in (i..hi).rev() {
                let mut v = if i == j { 1.0 / self.d[i] } else { 0.0 };
                for k in (i + 1)..hi {
                    v -= l[k * w + (k - i)] * at(&s, k, j);
                }
                s.data[j * w + (j - i)] = v;
            }
        }
        s
    }
}
