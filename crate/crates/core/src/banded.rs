//! Real banded LU with partial pivoting.

#[derive(Clone, Debug)]
pub(crate) struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    w: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl Banded {
    pub(crate) fn new(n: usize, kl: usize, ku: usize) -> Self {
        let w = 2 * kl + ku + 1;
        Banded { n, kl, ku, w, a: vec![0.0; n * w], piv: vec![0; n] }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku, "({i},{j}) outside band");
        i * self.w + j + self.kl - i
    }

    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.at(i, j);
        self.a[k] += v;
    }

    /// In-place factorisation. Returns the failing column on a zero pivot.
    pub(crate) fn factor(&mut self) -> Result<(), usize> {
        let n = self.n;
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let right = (k + self.kl + self.ku).min(n - 1);
            let mut p = k;
            let mut best = self.a[self.at(k, k)].abs();
            for i in k + 1..=last {
                let v = self.a[self.at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(k);
            }
            self.piv[k] = p;
            if p != k {
                for j in k..=right {
                    let (x, y) = (self.at(k, j), self.at(p, j));
                    self.a.swap(x, y);
                }
            }
            let d = self.a[self.at(k, k)];
            for i in k + 1..=last {
                let ik = self.at(i, k);
                let l = self.a[ik] / d;
                self.a[ik] = l;
                if l != 0.0 {
                    for j in k + 1..=right {
                        let (x, y) = (self.at(i, j), self.at(k, j));
                        self.a[x] -= l * self.a[y];
                    }
                }
            }
        }
        Ok(())
    }

    /// A·x for a matrix that has not been factorised.
    pub(crate) fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.kl + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.a[self.at(i, j)] * x[j]).sum()
            })
            .collect()
    }

    pub(crate) fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    b[i] -= self.a[self.at(i, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + self.kl + self.ku).min(n - 1) {
                s -= self.a[self.at(k, j)] * b[j];
            }
            b[k] = s / self.a[self.at(k, k)];
        }
    }
}
