use super::mesh::KnotVector;

/// Nonzero basis functions and their derivatives on a knot span.
#[derive(Debug, Clone)]
pub struct SpanBasis {
    /// Index of the first nonzero function (`span`, for open knots with single
    /// interior knots).
    pub first: usize,
    /// `ders[d][j]`: `d`-th derivative of function `first + j`.
    pub ders: Vec<Vec<f64>>,
}

impl KnotVector {
    /// Knot span index `s` with `knots[s] <= x < knots[s + 1]`, clamped to the
    /// last nonempty span at the right end.
    pub fn find_span(&self, x: f64) -> usize {
        let p = self.degree;
        let n = self.n_basis();
        if x >= self.knots[n] {
            return n - 1;
        }
        if x <= self.knots[p] {
            return p;
        }
        let (mut lo, mut hi) = (p, n);
        let mut mid = (lo + hi) / 2;
        while x < self.knots[mid] || x >= self.knots[mid + 1] {
            if x < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
            mid = (lo + hi) / 2;
        }
        mid
    }

    /// Basis functions and derivatives up to order `n_ders` at `x` on the
    /// knot span `span` (a knot index as returned by [`KnotVector::find_span`]).
    pub fn basis_ders(&self, span: usize, x: f64, n_ders: usize) -> SpanBasis {
        let p = self.degree;
        let u = &self.knots;
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = x - u[span + 1 - j];
            right[j] = u[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                // lower triangle holds knot differences, upper the functions
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![0.0; p + 1]; n_ders + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=n_ders.min(p) {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if (r as isize - 1) <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for k in 1..=n_ders.min(p) {
            for v in ders[k].iter_mut() {
                *v *= factor;
            }
            factor *= (p - k) as f64;
        }
        SpanBasis { first: span - p, ders }
    }

    /// All basis function values at `x` as a dense vector of length `n_basis`.
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        let span = self.find_span(x);
        let b = self.basis_ders(span, x, 0);
        let mut out = vec![0.0; self.n_basis()];
        for (j, v) in b.ders[0].iter().enumerate() {
            out[b.first + j] = *v;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Direct Cox-de Boor recursion, used as an independent oracle.
    fn cox_de_boor(k: &KnotVector, i: usize, p: usize, x: f64) -> f64 {
        let t = &k.knots;
        if p == 0 {
            let last = t[k.n_basis()];
            let inside = t[i] <= x && x < t[i + 1];
            let at_end = x == last && t[i] < t[i + 1] && t[i + 1] == last;
            return if inside || at_end { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        if t[i + p] > t[i] {
            v += (x - t[i]) / (t[i + p] - t[i]) * cox_de_boor(k, i, p - 1, x);
        }
        if t[i + p + 1] > t[i + 1] {
            v += (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * cox_de_boor(k, i + 1, p - 1, x);
        }
        v
    }

    #[test]
    fn matches_recursive_definition() {
        for p in 1..=4 {
            let k = KnotVector::open_uniform(5, p, 0.0, 2.0).unwrap();
            for s in 0..=40 {
                let x = 2.0 * s as f64 / 40.0;
                let all = k.eval_all(x);
                for i in 0..k.n_basis() {
                    assert!((all[i] - cox_de_boor(&k, i, p, x)).abs() < 1e-13, "p={p} i={i} x={x}");
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let k = KnotVector::open_uniform(4, 3, 0.0, 1.0).unwrap();
        let x = 0.37;
        let span = k.find_span(x);
        let b = k.basis_ders(span, x, 2);
        let e = 1e-5;
        let bp = k.basis_ders(span, x + e, 1);
        let bm = k.basis_ders(span, x - e, 1);
        for j in 0..=3 {
            let d1 = (bp.ders[0][j] - bm.ders[0][j]) / (2.0 * e);
            let d2 = (bp.ders[1][j] - bm.ders[1][j]) / (2.0 * e);
            assert!((d1 - b.ders[1][j]).abs() < 1e-7);
            assert!((d2 - b.ders[2][j]).abs() < 1e-6);
        }
    }

    #[test]
    fn partition_of_unity_and_nonnegativity() {
        let k = KnotVector::open_uniform(7, 3, -1.0, 3.0).unwrap();
        for s in 0..=100 {
            let x = -1.0 + 4.0 * s as f64 / 100.0;
            let all = k.eval_all(x);
            assert!(all.iter().all(|&v| v >= 0.0));
            assert!((all.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }
}
