use crate::discretization::{DofLayout, MixedSpace, QuadraturePurpose, Side, Tabulation, Tabulator};
use crate::error::{Error, Result};
use crate::linalg::{ConstraintSet, MeanConstraint};

/// Coefficients of `(u_h, p_h, p~)` and the two mean-value multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSolution {
    pub layout: DofLayout,
    pub coefficients: Vec<f64>,
}

impl MixedSolution {
    pub fn zeros(layout: DofLayout) -> Self {
        Self { layout, coefficients: vec![0.0; layout.total()] }
    }

    pub fn from_vec(layout: DofLayout, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != layout.total() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a layout of {}",
                coefficients.len(),
                layout.total()
            )));
        }
        Ok(Self { layout, coefficients })
    }

    pub fn velocity(&self, component: usize) -> &[f64] {
        let n = self.layout.n_velocity;
        &self.coefficients[component * n..(component + 1) * n]
    }

    pub fn pressure(&self) -> &[f64] {
        let s = self.layout.pressure(0);
        &self.coefficients[s..s + self.layout.n_pressure]
    }

    /// Coefficients of `p~ = p_h + p'`.
    pub fn total_pressure(&self) -> &[f64] {
        let s = self.layout.fine_pressure(0);
        &self.coefficients[s..s + self.layout.n_pressure]
    }

    /// Coefficients of the fine-scale pressure `p' = p~ - p_h`.
    pub fn fine_pressure(&self) -> Vec<f64> {
        self.total_pressure().iter().zip(self.pressure()).map(|(a, b)| a - b).collect()
    }

    pub fn multipliers(&self) -> [f64; 2] {
        [
            self.coefficients[self.layout.pressure_multiplier()],
            self.coefficients[self.layout.fine_multiplier()],
        ]
    }

    pub fn n_dofs(&self) -> usize {
        self.layout.total()
    }
}

/// Adds strong values for the velocity components `components` on `side`.
/// Dofs already constrained (corners) keep their first value.
pub(crate) fn constrain_velocity_side(
    space: &MixedSpace,
    side: Side,
    components: &[usize],
    g: &(dyn Fn([f64; 2]) -> [f64; 2] + Sync),
    constraints: &mut ConstraintSet,
) -> Result<()> {
    let l = space.layout();
    for &c in components {
        for (dof, v) in space.velocity.boundary_values(side, |x| g(x)[c])? {
            let global = l.velocity(c, dof);
            if !constraints.is_constrained(global) {
                constraints.add_dirichlet(global, v)?;
            }
        }
    }
    Ok(())
}

/// `int M_n` for every pressure basis function.
pub(crate) fn pressure_integrals(space: &MixedSpace) -> Result<Vec<f64>> {
    let rule = space.quadrature_for(QuadraturePurpose::Assembly);
    let t = Tabulator::new(&space.pressure, rule);
    let mut tab = Tabulation::default();
    let mut out = vec![0.0; space.pressure.n_dofs];
    for e in 0..space.n_elements() {
        t.tabulate(e, &mut tab)?;
        for (m, &d) in space.pressure.element_dofs(e).iter().enumerate() {
            out[d] += (0..tab.n_points).map(|q| tab.jxw[q] * tab.val(q, m)).sum::<f64>();
        }
    }
    Ok(out)
}

/// Zero-mean constraints on `p_h` and `p~`; with `pin_fine` the whole `p~`
/// field is fixed to zero instead (Galerkin method).
pub(crate) fn pressure_constraints(space: &MixedSpace, pin_fine: bool, constraints: &mut ConstraintSet) -> Result<()> {
    let l = space.layout();
    let w = pressure_integrals(space)?;
    constraints.add_mean(MeanConstraint {
        multiplier: l.pressure_multiplier(),
        weights: w.iter().enumerate().map(|(d, &v)| (l.pressure(d), v)).collect(),
    })?;
    if pin_fine {
        for d in 0..l.n_pressure {
            constraints.add_dirichlet(l.fine_pressure(d), 0.0)?;
        }
        constraints.add_dirichlet(l.fine_multiplier(), 0.0)?;
    } else {
        constraints.add_mean(MeanConstraint {
            multiplier: l.fine_multiplier(),
            weights: w.iter().enumerate().map(|(d, &v)| (l.fine_pressure(d), v)).collect(),
        })?;
    }
    Ok(())
}

/// `max_n |int M_n div u_h| / ||u_h||_{H^1}`; zero for a zero velocity.
pub fn discrete_divergence_residual(space: &MixedSpace, solution: &MixedSolution) -> Result<f64> {
    let l = space.layout();
    if solution.layout != l {
        return Err(Error::DimensionMismatch("solution does not belong to this space".into()));
    }
    let rule = space.quadrature_for(QuadraturePurpose::Assembly);
    let tv_ = Tabulator::new(&space.velocity, rule.clone());
    let tp_ = Tabulator::new(&space.pressure, rule);
    let (mut tv, mut tp) = (Tabulation::default(), Tabulation::default());
    let x = &solution.coefficients;
    let mut moments = vec![0.0; l.n_pressure];
    let mut h1 = 0.0;
    for e in 0..space.n_elements() {
        tv_.tabulate(e, &mut tv)?;
        tp_.tabulate(e, &mut tp)?;
        let vd = space.velocity.element_dofs(e);
        let pd = space.pressure.element_dofs(e);
        for q in 0..tv.n_points {
            let mut u = [0.0; 2];
            let mut gu = [[0.0; 2]; 2];
            for (a, &d) in vd.iter().enumerate() {
                let n = tv.val(q, a);
                let g = tv.grad(q, a);
                for c in 0..2 {
                    let coef = x[l.velocity(c, d)];
                    u[c] += coef * n;
                    gu[c][0] += coef * g[0];
                    gu[c][1] += coef * g[1];
                }
            }
            let w = tv.jxw[q];
            let div = gu[0][0] + gu[1][1];
            for (m, &d) in pd.iter().enumerate() {
                moments[d] += w * tp.val(q, m) * div;
            }
            h1 += w * (u[0] * u[0] + u[1] * u[1] + gu.iter().flatten().map(|v| v * v).sum::<f64>());
        }
    }
    let norm = h1.sqrt();
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok(moments.iter().fold(0.0f64, |m, v| m.max(v.abs())) / norm)
}
