use std::sync::Arc;

use nalgebra::DMatrix;

use super::lagrange::{LagrangeTriangle, ReferenceValues};
use super::mesh::{KnotVector, Mesh, Side, StructuredTriMesh, TensorKnotMesh};
use super::quadrature::{rule_for, QuadratureRule, ReferenceCell};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisFamily {
    Lagrange,
    BSpline,
}

#[derive(Debug, Clone)]
enum Basis {
    Lagrange(LagrangeTriangle),
    BSpline([KnotVector; 2]),
}

/// Scalar continuous space (Lagrange `P_k` on triangles or tensor B-splines of
/// degree `k` on a knot grid).
#[derive(Debug, Clone)]
pub struct ScalarSpace {
    pub mesh: Arc<Mesh>,
    pub family: BasisFamily,
    pub degree: usize,
    pub n_dofs: usize,
    /// Local DOF count per element.
    pub n_local: usize,
    /// Flattened connectivity, `n_local` entries per element.
    connectivity: Vec<usize>,
    /// Boundary DOFs per side, indexed by [`Side::index`].
    pub boundary_dofs: [Vec<usize>; 4],
    /// Lagrange nodes, or Greville points for splines.
    pub dof_points: Vec<[f64; 2]>,
    /// Number of DOFs along x (lattice width).
    dofs_x: usize,
    basis: Basis,
}

impl ScalarSpace {
    pub fn lagrange(mesh: Arc<Mesh>, degree: usize) -> Result<Self> {
        let tri = match mesh.as_ref() {
            Mesh::Triangles(m) => m.clone(),
            Mesh::Splines(_) => {
                return Err(Error::InvalidInput("Lagrange spaces need a triangle mesh".into()))
            }
        };
        let element = LagrangeTriangle::new(degree)?;
        let k = degree;
        let n = tri.n_per_side;
        let width = n * k + 1;
        let mut connectivity = Vec::with_capacity(tri.n_cells() * element.n_basis());
        for cell in 0..tri.n_cells() {
            let (ci, cj, upper) = tri.grid_position(cell);
            for &(i, j) in &element.nodes {
                let (gi, gj) = if upper {
                    (k * ci + i, k * cj + i + j)
                } else {
                    (k * ci + i + j, k * cj + j)
                };
                connectivity.push(gj * width + gi);
            }
        }
        let [hx, hy] = tri.cell_spacing();
        let step = [hx / k as f64, hy / k as f64];
        let mut dof_points = Vec::with_capacity(width * width);
        for gj in 0..width {
            for gi in 0..width {
                dof_points.push([
                    tri.origin[0] + gi as f64 * step[0],
                    tri.origin[1] + gj as f64 * step[1],
                ]);
            }
        }
        let boundary_dofs = lattice_boundary(width, width);
        Ok(Self {
            n_local: element.n_basis(),
            mesh,
            family: BasisFamily::Lagrange,
            degree,
            n_dofs: width * width,
            connectivity,
            boundary_dofs,
            dof_points,
            dofs_x: width,
            basis: Basis::Lagrange(element),
        })
    }

    /// Tensor B-splines with single interior knots (`C^{degree - 1}`).
    pub fn bspline(mesh: Arc<Mesh>, degree: usize) -> Result<Self> {
        Self::bspline_repeated(mesh, degree, 1)
    }

    /// Tensor B-splines whose interior knots have multiplicity `m`
    /// (`C^{degree - m}` across element edges).
    pub fn bspline_repeated(mesh: Arc<Mesh>, degree: usize, m: usize) -> Result<Self> {
        let km = match mesh.as_ref() {
            Mesh::Splines(m) => m.clone(),
            Mesh::Triangles(_) => {
                return Err(Error::InvalidInput("B-spline spaces need a knot mesh".into()))
            }
        };
        if degree == 0 {
            return Err(Error::InvalidInput("B-spline degree must be at least 1".into()));
        }
        let knots = km.knots_repeated(degree, m)?;
        let nbx = knots[0].n_basis();
        let nby = knots[1].n_basis();
        let p = degree;
        let mut connectivity = Vec::with_capacity(km.n_elements() * (p + 1) * (p + 1));
        let first: [Vec<usize>; 2] = [0, 1].map(|d| (0..km.n_spans[d]).map(|e| knots[d].span_knot(e) - p).collect());
        for e in 0..km.n_elements() {
            let (ex, ey) = km.element_spans(e);
            let (fx, fy) = (first[0][ex], first[1][ey]);
            for b in 0..=p {
                for a in 0..=p {
                    connectivity.push((fy + b) * nbx + fx + a);
                }
            }
        }
        let gx = knots[0].greville();
        let gy = knots[1].greville();
        let mut dof_points = Vec::with_capacity(nbx * nby);
        for y in &gy {
            for x in &gx {
                dof_points.push([*x, *y]);
            }
        }
        Ok(Self {
            n_local: (p + 1) * (p + 1),
            mesh,
            family: BasisFamily::BSpline,
            degree,
            n_dofs: nbx * nby,
            connectivity,
            boundary_dofs: lattice_boundary(nbx, nby),
            dof_points,
            dofs_x: nbx,
            basis: Basis::BSpline(knots),
        })
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.n_elements()
    }

    pub fn element_dofs(&self, element: usize) -> &[usize] {
        &self.connectivity[element * self.n_local..(element + 1) * self.n_local]
    }

    pub fn knots(&self) -> Option<&[KnotVector; 2]> {
        match &self.basis {
            Basis::BSpline(k) => Some(k),
            Basis::Lagrange(_) => None,
        }
    }

    /// Lattice position `(ix, iy)` of a DOF.
    pub fn dof_lattice(&self, dof: usize) -> (usize, usize) {
        (dof % self.dofs_x, dof / self.dofs_x)
    }

    /// Coefficients of the interpolant of `f`: nodal values for Lagrange,
    /// tensor Greville collocation for B-splines.
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> f64) -> Result<Vec<f64>> {
        match &self.basis {
            Basis::Lagrange(_) => Ok(self.dof_points.iter().map(|&x| f(x)).collect()),
            Basis::BSpline(knots) => {
                let gx = knots[0].greville();
                let gy = knots[1].greville();
                let values = DMatrix::from_fn(gx.len(), gy.len(), |i, j| f([gx[i], gy[j]]));
                let bx = collocation_matrix(&knots[0]);
                let by = collocation_matrix(&knots[1]);
                // values = Bx C By^T
                let lux = bx.lu();
                let tmp = lux
                    .solve(&values)
                    .ok_or_else(|| Error::InvalidInput("singular collocation matrix".into()))?;
                let c = by
                    .lu()
                    .solve(&tmp.transpose())
                    .ok_or_else(|| Error::InvalidInput("singular collocation matrix".into()))?
                    .transpose();
                let nbx = gx.len();
                let mut out = vec![0.0; self.n_dofs];
                for j in 0..gy.len() {
                    for i in 0..nbx {
                        out[j * nbx + i] = c[(i, j)];
                    }
                }
                Ok(out)
            }
        }
    }

    /// Values for the DOFs on `side` so that the trace interpolates `g` (nodal
    /// for Lagrange, 1D Greville collocation for B-splines).
    pub fn boundary_values(&self, side: Side, g: impl Fn([f64; 2]) -> f64) -> Result<Vec<(usize, f64)>> {
        let dofs = &self.boundary_dofs[side.index()];
        match &self.basis {
            Basis::Lagrange(_) => Ok(dofs.iter().map(|&d| (d, g(self.dof_points[d]))).collect()),
            Basis::BSpline(knots) => {
                let along = match side {
                    Side::Left | Side::Right => 1,
                    Side::Bottom | Side::Top => 0,
                };
                let kv = &knots[along];
                let gr = kv.greville();
                let fixed = self.dof_points[dofs[0]][1 - along];
                let rhs = nalgebra::DVector::from_iterator(
                    gr.len(),
                    gr.iter().map(|&t| {
                        let mut x = [0.0; 2];
                        x[along] = t;
                        x[1 - along] = fixed;
                        g(x)
                    }),
                );
                let c = collocation_matrix(kv)
                    .lu()
                    .solve(&rhs)
                    .ok_or_else(|| Error::InvalidInput("singular collocation matrix".into()))?;
                Ok(dofs.iter().zip(c.iter()).map(|(&d, &v)| (d, v)).collect())
            }
        }
    }

    /// Pointwise evaluation of a coefficient vector.
    pub fn evaluate(&self, coeffs: &[f64], x: [f64; 2]) -> Option<f64> {
        let (element, xi) = self.mesh.locate(x)?;
        let tab = Tabulator::new(self, QuadratureRule {
            cell: self.reference_cell(),
            points: vec![xi],
            weights: vec![1.0],
            degree: 0,
        });
        let mut t = Tabulation::default();
        tab.tabulate(element, &mut t).ok()?;
        let dofs = self.element_dofs(element);
        Some((0..self.n_local).map(|a| coeffs[dofs[a]] * t.val(0, a)).sum())
    }

    pub fn reference_cell(&self) -> ReferenceCell {
        match self.family {
            BasisFamily::Lagrange => ReferenceCell::Triangle,
            BasisFamily::BSpline => ReferenceCell::Square,
        }
    }
}

fn lattice_boundary(nx: usize, ny: usize) -> [Vec<usize>; 4] {
    let left = (0..ny).map(|j| j * nx).collect();
    let right = (0..ny).map(|j| j * nx + nx - 1).collect();
    let bottom = (0..nx).collect();
    let top = (0..nx).map(|i| (ny - 1) * nx + i).collect();
    [left, right, bottom, top]
}

fn collocation_matrix(kv: &KnotVector) -> DMatrix<f64> {
    let g = kv.greville();
    let n = kv.n_basis();
    let mut m = DMatrix::zeros(n, n);
    for (i, &t) in g.iter().enumerate() {
        let row = kv.eval_all(t);
        for j in 0..n {
            m[(i, j)] = row[j];
        }
    }
    m
}

/// Basis data on one element at every point of a rule, in physical coordinates.
#[derive(Debug, Clone, Default)]
pub struct Tabulation {
    pub n_points: usize,
    pub n_basis: usize,
    pub points: Vec<[f64; 2]>,
    /// Quadrature weight times Jacobian determinant.
    pub jxw: Vec<f64>,
    values: Vec<f64>,
    grads: Vec<[f64; 2]>,
    /// Hessians stored as `[xx, xy, yy]`.
    hessians: Vec<[f64; 3]>,
    /// Inverse geometry Jacobian `d xi / d x` (row-major), constant per element.
    pub inv_jac: [[f64; 2]; 2],
    /// Factor taking `xi` to parent coordinates whose reference edges have
    /// length 2 (2 on the unit triangle, 1 on the `[-1, 1]^2` span).
    parent_scale: f64,
}

impl Tabulation {
    #[inline]
    pub fn val(&self, q: usize, a: usize) -> f64 {
        self.values[q * self.n_basis + a]
    }

    #[inline]
    pub fn grad(&self, q: usize, a: usize) -> [f64; 2] {
        self.grads[q * self.n_basis + a]
    }

    #[inline]
    pub fn hess(&self, q: usize, a: usize) -> [f64; 3] {
        self.hessians[q * self.n_basis + a]
    }

    /// Metric tensor `G = (d xi/d x)^T (d xi/d x)` of the parent map with
    /// reference edges of length 2 on both cell kinds, so a square of side
    /// `h` (or a right triangle with legs `h`) has `G = (2/h)^2 I`.
    pub fn metric(&self) -> [[f64; 2]; 2] {
        let j = &self.inv_jac;
        let s2 = self.parent_scale * self.parent_scale;
        let mut g = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                g[a][b] = s2 * (j[0][a] * j[0][b] + j[1][a] * j[1][b]);
            }
        }
        g
    }

    fn resize(&mut self, n_points: usize, n_basis: usize) {
        self.n_points = n_points;
        self.n_basis = n_basis;
        self.points.resize(n_points, [0.0; 2]);
        self.jxw.resize(n_points, 0.0);
        self.values.resize(n_points * n_basis, 0.0);
        self.grads.resize(n_points * n_basis, [0.0; 2]);
        self.hessians.resize(n_points * n_basis, [0.0; 3]);
    }
}

/// Evaluates a space's basis on elements for a fixed rule, caching the
/// reference-element data where the map is affine.
#[derive(Debug, Clone)]
pub struct Tabulator<'a> {
    space: &'a ScalarSpace,
    pub rule: QuadratureRule,
    reference: Vec<ReferenceValues>,
}

impl<'a> Tabulator<'a> {
    pub fn new(space: &'a ScalarSpace, rule: QuadratureRule) -> Self {
        let reference = match &space.basis {
            Basis::Lagrange(el) => rule.points.iter().map(|&p| el.evaluate(p)).collect(),
            Basis::BSpline(_) => Vec::new(),
        };
        Self { space, rule, reference }
    }

    pub fn tabulate(&self, element: usize, out: &mut Tabulation) -> Result<()> {
        let nq = self.rule.len();
        let nb = self.space.n_local;
        out.resize(nq, nb);
        match (&self.space.basis, self.space.mesh.as_ref()) {
            (Basis::Lagrange(_), Mesh::Triangles(mesh)) => self.tabulate_triangle(mesh, element, out),
            (Basis::BSpline(knots), Mesh::Splines(mesh)) => {
                tabulate_spline(knots, mesh, &self.rule, element, out);
                Ok(())
            }
            _ => Err(Error::InvalidInput("space and mesh kinds disagree".into())),
        }
    }

    fn tabulate_triangle(&self, mesh: &StructuredTriMesh, element: usize, out: &mut Tabulation) -> Result<()> {
        let j = mesh.jacobian(element);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !(det.abs() > 0.0) {
            return Err(Error::SingularJacobian { element });
        }
        // K = J^{-1}: d xi_r / d x_s = K[r][s]
        let k = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
        out.inv_jac = k;
        out.parent_scale = 2.0;
        let v0 = mesh.vertices[mesh.cells[element][0]];
        let nb = out.n_basis;
        for q in 0..self.rule.len() {
            let xi = self.rule.points[q];
            out.points[q] = [
                v0[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
                v0[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
            ];
            out.jxw[q] = self.rule.weights[q] * det.abs();
            let r = &self.reference[q];
            for a in 0..nb {
                let gr = r.grads[a];
                let h = r.hessians[a];
                let g = [gr[0] * k[0][0] + gr[1] * k[1][0], gr[0] * k[0][1] + gr[1] * k[1][1]];
                // H_x = K^T H_xi K
                let hr = [[h[0], h[1]], [h[1], h[2]]];
                let mut hx = [[0.0; 2]; 2];
                for s in 0..2 {
                    for t in 0..2 {
                        let mut acc = 0.0;
                        for m in 0..2 {
                            for n in 0..2 {
                                acc += k[m][s] * hr[m][n] * k[n][t];
                            }
                        }
                        hx[s][t] = acc;
                    }
                }
                out.values[q * nb + a] = r.values[a];
                out.grads[q * nb + a] = g;
                out.hessians[q * nb + a] = [hx[0][0], hx[0][1], hx[1][1]];
            }
        }
        Ok(())
    }
}

fn tabulate_spline(
    knots: &[KnotVector; 2],
    mesh: &TensorKnotMesh,
    rule: &QuadratureRule,
    element: usize,
    out: &mut Tabulation,
) {
    let (ex, ey) = mesh.element_spans(element);
    let p = [knots[0].degree, knots[1].degree];
    let bounds = [knots[0].span_bounds(ex), knots[1].span_bounds(ey)];
    let size = [bounds[0].1 - bounds[0].0, bounds[1].1 - bounds[1].0];
    out.inv_jac = [[2.0 / size[0], 0.0], [0.0, 2.0 / size[1]]];
    out.parent_scale = 1.0;
    let det = 0.25 * size[0] * size[1];
    let nb = out.n_basis;
    let spans = [knots[0].span_knot(ex), knots[1].span_knot(ey)];
    for q in 0..rule.len() {
        let xi = rule.points[q];
        let x = [
            bounds[0].0 + 0.5 * (xi[0] + 1.0) * size[0],
            bounds[1].0 + 0.5 * (xi[1] + 1.0) * size[1],
        ];
        out.points[q] = x;
        out.jxw[q] = rule.weights[q] * det;
        let bx = knots[0].basis_ders(spans[0], x[0], 2);
        let by = knots[1].basis_ders(spans[1], x[1], 2);
        let d2 = |b: &super::bspline::SpanBasis, i: usize| if b.ders.len() > 2 { b.ders[2][i] } else { 0.0 };
        for b in 0..=p[1] {
            for a in 0..=p[0] {
                let idx = b * (p[0] + 1) + a;
                let (nx, dx, ddx) = (bx.ders[0][a], bx.ders[1][a], d2(&bx, a));
                let (ny, dy, ddy) = (by.ders[0][b], by.ders[1][b], d2(&by, b));
                out.values[q * nb + idx] = nx * ny;
                out.grads[q * nb + idx] = [dx * ny, nx * dy];
                out.hessians[q * nb + idx] = [ddx * ny, dx * dy, nx * ddy];
            }
        }
    }
}

/// Velocity/pressure pair with the fine-pressure space aliasing the pressure
/// space. Global unknowns are ordered `[u_x | u_y | p | p~ | mean(p) | mean(p~)]`.
#[derive(Debug, Clone)]
pub struct MixedSpace {
    pub velocity: ScalarSpace,
    pub pressure: ScalarSpace,
}

/// Offsets into the global unknown vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    pub n_velocity: usize,
    pub n_pressure: usize,
}

impl DofLayout {
    pub fn velocity(&self, component: usize, dof: usize) -> usize {
        component * self.n_velocity + dof
    }
    pub fn pressure(&self, dof: usize) -> usize {
        2 * self.n_velocity + dof
    }
    pub fn fine_pressure(&self, dof: usize) -> usize {
        2 * self.n_velocity + self.n_pressure + dof
    }
    pub fn pressure_multiplier(&self) -> usize {
        2 * self.n_velocity + 2 * self.n_pressure
    }
    pub fn fine_multiplier(&self) -> usize {
        self.pressure_multiplier() + 1
    }
    pub fn total(&self) -> usize {
        2 * self.n_velocity + 2 * self.n_pressure + 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadraturePurpose {
    Assembly,
    Error,
}

impl MixedSpace {
    pub fn layout(&self) -> DofLayout {
        DofLayout { n_velocity: self.velocity.n_dofs, n_pressure: self.pressure.n_dofs }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.velocity.mesh
    }

    pub fn degree(&self) -> usize {
        self.velocity.degree
    }

    pub fn family(&self) -> BasisFamily {
        self.velocity.family
    }

    pub fn n_elements(&self) -> usize {
        self.velocity.n_elements()
    }

    /// Local element layout `[u_x | u_y | p | p~]` mapped to global indices.
    pub fn element_global_dofs(&self, element: usize, out: &mut Vec<usize>) {
        let l = self.layout();
        out.clear();
        let vd = self.velocity.element_dofs(element);
        let pd = self.pressure.element_dofs(element);
        for c in 0..2 {
            out.extend(vd.iter().map(|&d| l.velocity(c, d)));
        }
        out.extend(pd.iter().map(|&d| l.pressure(d)));
        out.extend(pd.iter().map(|&d| l.fine_pressure(d)));
    }

    pub fn n_local(&self) -> usize {
        2 * self.velocity.n_local + 2 * self.pressure.n_local
    }

    pub fn quadrature_for(&self, purpose: QuadraturePurpose) -> QuadratureRule {
        let k = self.degree();
        let degree = match purpose {
            QuadraturePurpose::Assembly => 2 * k,
            QuadraturePurpose::Error => 2 * k + 2,
        };
        rule_for(self.velocity.reference_cell(), degree)
    }
}

pub fn build_taylor_hood(mesh: StructuredTriMesh, k: usize) -> Result<MixedSpace> {
    if k < 2 {
        return Err(Error::InvalidInput(format!(
            "Taylor-Hood needs velocity degree >= 2 so that the pressure is continuous, got {k}"
        )));
    }
    let mesh = Arc::new(Mesh::Triangles(mesh));
    Ok(MixedSpace {
        velocity: ScalarSpace::lagrange(mesh.clone(), k)?,
        pressure: ScalarSpace::lagrange(mesh, k - 1)?,
    })
}

/// Interior continuity of the spline velocity in the Taylor-Hood pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplineVelocity {
    /// `C^{k-2}`, the same continuity as the degree `k - 1` pressure
    /// (interior knots doubled). Inf-sup stable.
    #[default]
    MatchPressure,
    /// `C^{k-1}` single knots. With no-slip walls on all sides this pair
    /// admits a spurious pressure mode besides the constants.
    Maximal,
}

impl SplineVelocity {
    fn multiplicity(self) -> usize {
        match self {
            Self::MatchPressure => 2,
            Self::Maximal => 1,
        }
    }
}

pub fn build_spline_taylor_hood(mesh: TensorKnotMesh, k: usize) -> Result<MixedSpace> {
    build_spline_taylor_hood_with(mesh, k, SplineVelocity::default())
}

pub fn build_spline_taylor_hood_with(mesh: TensorKnotMesh, k: usize, velocity: SplineVelocity) -> Result<MixedSpace> {
    if k < 2 {
        return Err(Error::InvalidInput(format!(
            "spline Taylor-Hood needs velocity degree >= 2, got {k}"
        )));
    }
    if mesh.degree != k {
        return Err(Error::InvalidInput(format!(
            "knot mesh built for degree {} but k = {k}",
            mesh.degree
        )));
    }
    if !mesh.knots.iter().all(|kv| kv.is_open()) {
        return Err(Error::InvalidInput("knot vectors must be open".into()));
    }
    let mesh = Arc::new(Mesh::Splines(mesh));
    Ok(MixedSpace {
        velocity: ScalarSpace::bspline_repeated(mesh.clone(), k, velocity.multiplicity())?,
        pressure: ScalarSpace::bspline(mesh, k - 1)?,
    })
}
