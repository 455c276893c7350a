use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Continuous Lagrange element of degree `k` on the reference triangle with
/// equispaced nodes `(i / k, j / k)`, `i + j <= k`.
///
/// The basis is expressed in the monomial basis `x^a y^b`, `a + b <= k`, with
/// coefficients from the inverse Vandermonde matrix.
#[derive(Debug, Clone)]
pub struct LagrangeTriangle {
    pub degree: usize,
    /// Lattice offsets `(i, j)` of each local node.
    pub nodes: Vec<(usize, usize)>,
    exponents: Vec<(i32, i32)>,
    /// `coeffs[(node, monomial)]`.
    coeffs: DMatrix<f64>,
}

/// Values, gradients and Hessians (xx, xy, yy) at one reference point.
#[derive(Debug, Clone, Default)]
pub struct ReferenceValues {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    pub hessians: Vec<[f64; 3]>,
}

fn powi(x: f64, n: i32) -> f64 {
    if n < 0 {
        0.0
    } else {
        x.powi(n)
    }
}

impl LagrangeTriangle {
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidInput("Lagrange degree must be at least 1".into()));
        }
        let mut nodes = Vec::new();
        for j in 0..=degree {
            for i in 0..=degree - j {
                nodes.push((i, j));
            }
        }
        let exponents: Vec<(i32, i32)> = nodes.iter().map(|&(i, j)| (i as i32, j as i32)).collect();
        let n = nodes.len();
        let k = degree as f64;
        let vandermonde = DMatrix::from_fn(n, n, |r, c| {
            let (x, y) = (nodes[r].0 as f64 / k, nodes[r].1 as f64 / k);
            let (a, b) = exponents[c];
            powi(x, a) * powi(y, b)
        });
        let inv = vandermonde
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput(format!("singular Vandermonde matrix for degree {degree}")))?;
        // V c_j = e_j  =>  N_j = sum_m inv[(m, j)] mono_m
        let coeffs = inv.transpose();
        Ok(Self { degree, nodes, exponents, coeffs })
    }

    pub fn n_basis(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_coordinates(&self, node: usize) -> [f64; 2] {
        let k = self.degree as f64;
        [self.nodes[node].0 as f64 / k, self.nodes[node].1 as f64 / k]
    }

    pub fn evaluate(&self, xi: [f64; 2]) -> ReferenceValues {
        let (x, y) = (xi[0], xi[1]);
        let nm = self.exponents.len();
        let mut m = vec![0.0; nm];
        let mut mx = vec![0.0; nm];
        let mut my = vec![0.0; nm];
        let mut mxx = vec![0.0; nm];
        let mut mxy = vec![0.0; nm];
        let mut myy = vec![0.0; nm];
        for (idx, &(a, b)) in self.exponents.iter().enumerate() {
            let (af, bf) = (a as f64, b as f64);
            m[idx] = powi(x, a) * powi(y, b);
            mx[idx] = af * powi(x, a - 1) * powi(y, b);
            my[idx] = bf * powi(x, a) * powi(y, b - 1);
            mxx[idx] = af * (af - 1.0) * powi(x, a - 2) * powi(y, b);
            mxy[idx] = af * bf * powi(x, a - 1) * powi(y, b - 1);
            myy[idx] = bf * (bf - 1.0) * powi(x, a) * powi(y, b - 2);
        }
        let n = self.n_basis();
        let mut out = ReferenceValues {
            values: vec![0.0; n],
            grads: vec![[0.0; 2]; n],
            hessians: vec![[0.0; 3]; n],
        };
        for j in 0..n {
            let (mut v, mut gx, mut gy, mut hxx, mut hxy, mut hyy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            for idx in 0..nm {
                let c = self.coeffs[(j, idx)];
                v += c * m[idx];
                gx += c * mx[idx];
                gy += c * my[idx];
                hxx += c * mxx[idx];
                hxy += c * mxy[idx];
                hyy += c * myy[idx];
            }
            out.values[j] = v;
            out.grads[j] = [gx, gy];
            out.hessians[j] = [hxx, hxy, hyy];
        }
        out
    }
}
