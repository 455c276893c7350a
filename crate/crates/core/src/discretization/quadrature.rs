/// Reference cell on which a rule is defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceCell {
    /// `(0,0), (1,0), (0,1)`, measure 1/2.
    Triangle,
    /// `[-1, 1]^2`, measure 4.
    Square,
}

impl ReferenceCell {
    pub fn measure(self) -> f64 {
        match self {
            ReferenceCell::Triangle => 0.5,
            ReferenceCell::Square => 4.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub cell: ReferenceCell,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Polynomials of total degree up to this are integrated exactly
    /// (per-direction degree for the square).
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p_prev, mut p) = (1.0, z);
            for k in 2..=n {
                let next = ((2 * k - 1) as f64 * z * p - (k - 1) as f64 * p_prev) / k as f64;
                p_prev = p;
                p = next;
            }
            dp = n as f64 * (z * p - p_prev) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Tensor Gauss-Legendre rule on `[-1, 1]^2` exact for per-direction degree `degree`.
pub fn square_rule(degree: usize) -> QuadratureRule {
    let n = degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            points.push([x[i], x[j]]);
            weights.push(w[i] * w[j]);
        }
    }
    QuadratureRule { cell: ReferenceCell::Square, points, weights, degree: 2 * n - 1 }
}

// Symmetric rules (Dunavant orbits), weights scaled to the reference area 1/2.
const TRI_DEG1: &[([f64; 2], f64)] = &[([1.0 / 3.0, 1.0 / 3.0], 0.5)];

const TRI_DEG2: &[([f64; 2], f64)] = &[
    ([1.0 / 6.0, 1.0 / 6.0], 1.0 / 6.0),
    ([2.0 / 3.0, 1.0 / 6.0], 1.0 / 6.0),
    ([1.0 / 6.0, 2.0 / 3.0], 1.0 / 6.0),
];

const TRI_DEG4: &[([f64; 2], f64)] = &[
    ([4.45948490915964835e-01, 1.08103018168070331e-01], 1.11690794839005680e-01),
    ([1.08103018168070331e-01, 4.45948490915964835e-01], 1.11690794839005680e-01),
    ([4.45948490915964835e-01, 4.45948490915964835e-01], 1.11690794839005680e-01),
    ([9.15762135097707569e-02, 8.16847572980458514e-01], 5.49758718276609770e-02),
    ([8.16847572980458514e-01, 9.15762135097707569e-02], 5.49758718276609770e-02),
    ([9.15762135097707569e-02, 9.15762135097707569e-02], 5.49758718276609770e-02),
];

const TRI_DEG6: &[([f64; 2], f64)] = &[
    ([2.49286745170884283e-01, 5.01426509658231434e-01], 5.83931378632112016e-02),
    ([5.01426509658231434e-01, 2.49286745170884283e-01], 5.83931378632112016e-02),
    ([2.49286745170884283e-01, 2.49286745170884283e-01], 5.83931378632112016e-02),
    ([6.30890144915075557e-02, 8.73821971016984889e-01], 2.54224531851072258e-02),
    ([8.73821971016984889e-01, 6.30890144915075557e-02], 2.54224531851072258e-02),
    ([6.30890144915075557e-02, 6.30890144915075557e-02], 2.54224531851072258e-02),
    ([6.36502499121396559e-01, 5.31450498447990152e-02], 4.14255378091741011e-02),
    ([5.31450498447990152e-02, 6.36502499121396559e-01], 4.14255378091741011e-02),
    ([6.36502499121396559e-01, 3.10352451033804377e-01], 4.14255378091741011e-02),
    ([5.31450498447990152e-02, 3.10352451033804377e-01], 4.14255378091741011e-02),
    ([3.10352451033804377e-01, 6.36502499121396559e-01], 4.14255378091741011e-02),
    ([3.10352451033804377e-01, 5.31450498447990152e-02], 4.14255378091741011e-02),
];

const TRI_DEG8: &[([f64; 2], f64)] = &[
    ([3.33333333333333315e-01, 3.33333333333333315e-01], 7.21578038388935028e-02),
    ([4.59292588292723014e-01, 8.14148234145539718e-02], 4.75458171336424970e-02),
    ([8.14148234145539718e-02, 4.59292588292723014e-01], 4.75458171336424970e-02),
    ([4.59292588292723014e-01, 4.59292588292723014e-01], 4.75458171336424970e-02),
    ([1.70569307751759991e-01, 6.58861384496480018e-01], 5.16086852673589974e-02),
    ([6.58861384496480018e-01, 1.70569307751759991e-01], 5.16086852673589974e-02),
    ([1.70569307751759991e-01, 1.70569307751759991e-01], 5.16086852673589974e-02),
    ([5.05472283170309983e-02, 8.98905543365937976e-01], 1.62292488115990015e-02),
    ([8.98905543365937976e-01, 5.05472283170309983e-02], 1.62292488115990015e-02),
    ([5.05472283170309983e-02, 5.05472283170309983e-02], 1.62292488115990015e-02),
    ([2.63112829634638001e-01, 8.39477740995800067e-03], 1.36151570872174998e-02),
    ([2.63112829634638001e-01, 7.28492392955404022e-01], 1.36151570872174998e-02),
    ([7.28492392955404022e-01, 2.63112829634638001e-01], 1.36151570872174998e-02),
    ([8.39477740995800067e-03, 7.28492392955404022e-01], 1.36151570872174998e-02),
    ([8.39477740995800067e-03, 2.63112829634638001e-01], 1.36151570872174998e-02),
    ([7.28492392955404022e-01, 8.39477740995800067e-03], 1.36151570872174998e-02),
];

/// Rule on the reference triangle exact for total degree `degree`.
///
/// Symmetric rules cover degrees up to 8; higher degrees use a collapsed
/// Gauss-Legendre product rule.
pub fn triangle_rule(degree: usize) -> QuadratureRule {
    let table = match degree {
        0 | 1 => Some((TRI_DEG1, 1)),
        2 => Some((TRI_DEG2, 2)),
        3 | 4 => Some((TRI_DEG4, 4)),
        5 | 6 => Some((TRI_DEG6, 6)),
        7 | 8 => Some((TRI_DEG8, 8)),
        _ => None,
    };
    if let Some((rows, deg)) = table {
        return QuadratureRule {
            cell: ReferenceCell::Triangle,
            points: rows.iter().map(|r| r.0).collect(),
            weights: rows.iter().map(|r| r.1).collect(),
            degree: deg,
        };
    }
    // x = s, y = (1 - s) t with Jacobian (1 - s): degree + 1 in s, degree in t.
    let n = (degree + 3) / 2;
    let (g, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        let s = 0.5 * (g[i] + 1.0);
        for j in 0..n {
            let t = 0.5 * (g[j] + 1.0);
            points.push([s, (1.0 - s) * t]);
            weights.push(0.25 * w[i] * w[j] * (1.0 - s));
        }
    }
    QuadratureRule { cell: ReferenceCell::Triangle, points, weights, degree: 2 * n - 2 }
}

pub fn rule_for(cell: ReferenceCell, degree: usize) -> QuadratureRule {
    match cell {
        ReferenceCell::Triangle => triangle_rule(degree),
        ReferenceCell::Square => square_rule(degree),
    }
}
