use crate::error::{Error, Result};

/// One side of the rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    /// Index into per-side arrays.
    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
            Side::Bottom => 2,
            Side::Top => 3,
        }
    }

    /// Velocity component normal to this side.
    pub fn normal_component(self) -> usize {
        match self {
            Side::Left | Side::Right => 0,
            Side::Bottom | Side::Top => 1,
        }
    }

    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub cell: usize,
    /// Local edge `k` joins local vertices `k` and `(k + 1) % 3`.
    pub local_edge: usize,
    pub side: Side,
}

/// Uniform triangulation of a rectangle: an `n x n` grid of cells, each split
/// along its lower-left to upper-right diagonal.
///
/// Cell `2 * (j * n + i)` is the lower triangle of grid cell `(i, j)` with
/// vertices `(i, j), (i + 1, j), (i + 1, j + 1)`; cell `2 * (j * n + i) + 1` is
/// the upper triangle `(i, j), (i + 1, j + 1), (i, j + 1)`.
#[derive(Debug, Clone)]
pub struct StructuredTriMesh {
    pub n_per_side: usize,
    pub origin: [f64; 2],
    pub extent: [f64; 2],
    pub vertices: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub h: f64,
}

fn check_box(n: usize, extent: [f64; 2]) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput("mesh needs at least one cell per side".into()));
    }
    if !(extent[0] > 0.0 && extent[1] > 0.0) {
        return Err(Error::InvalidInput(format!(
            "domain extent must be positive, got {extent:?}"
        )));
    }
    Ok(())
}

pub fn build_tri_mesh(n_per_side: usize, origin: [f64; 2], extent: [f64; 2]) -> Result<StructuredTriMesh> {
    check_box(n_per_side, extent)?;
    let n = n_per_side;
    let hx = extent[0] / n as f64;
    let hy = extent[1] / n as f64;
    let vid = |i: usize, j: usize| j * (n + 1) + i;

    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([origin[0] + i as f64 * hx, origin[1] + j as f64 * hy]);
        }
    }

    let mut cells = Vec::with_capacity(2 * n * n);
    let mut boundary_edges = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let lower = cells.len();
            cells.push([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)]);
            let upper = cells.len();
            cells.push([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]);
            if j == 0 {
                boundary_edges.push(BoundaryEdge { cell: lower, local_edge: 0, side: Side::Bottom });
            }
            if i == n - 1 {
                boundary_edges.push(BoundaryEdge { cell: lower, local_edge: 1, side: Side::Right });
            }
            if j == n - 1 {
                boundary_edges.push(BoundaryEdge { cell: upper, local_edge: 1, side: Side::Top });
            }
            if i == 0 {
                boundary_edges.push(BoundaryEdge { cell: upper, local_edge: 2, side: Side::Left });
            }
        }
    }

    Ok(StructuredTriMesh {
        n_per_side,
        origin,
        extent,
        vertices,
        cells,
        boundary_edges,
        h: hx.max(hy),
    })
}

impl StructuredTriMesh {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_spacing(&self) -> [f64; 2] {
        [
            self.extent[0] / self.n_per_side as f64,
            self.extent[1] / self.n_per_side as f64,
        ]
    }

    /// Grid cell `(i, j)` and whether the triangle is the upper one.
    pub fn grid_position(&self, cell: usize) -> (usize, usize, bool) {
        let square = cell / 2;
        (square % self.n_per_side, square / self.n_per_side, cell % 2 == 1)
    }

    /// Columns of the affine map from the reference triangle `(0,0), (1,0), (0,1)`.
    pub fn jacobian(&self, cell: usize) -> [[f64; 2]; 2] {
        let [a, b, c] = self.cells[cell];
        let (p0, p1, p2) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]]
    }

    pub fn signed_area(&self, cell: usize) -> f64 {
        let j = self.jacobian(cell);
        0.5 * (j[0][0] * j[1][1] - j[0][1] * j[1][0])
    }

    /// Cell containing `x` and the reference coordinates of `x` in it.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 2])> {
        let [hx, hy] = self.cell_spacing();
        let n = self.n_per_side;
        let s = (x[0] - self.origin[0]) / hx;
        let t = (x[1] - self.origin[1]) / hy;
        let tol = 1e-12;
        if s < -tol || t < -tol || s > n as f64 + tol || t > n as f64 + tol {
            return None;
        }
        let i = (s.floor().max(0.0) as usize).min(n - 1);
        let j = (t.floor().max(0.0) as usize).min(n - 1);
        let (ls, lt) = (s - i as f64, t - j as f64);
        let square = j * n + i;
        // lower triangle: (0,0),(1,0),(1,1) => xi = ls - lt, eta = lt
        if lt <= ls {
            Some((2 * square, [ls - lt, lt]))
        } else {
            // upper: (0,0),(1,1),(0,1) => x = xi + 0*eta... solve [1 0;1 1][xi;eta] = [ls;lt]
            Some((2 * square + 1, [ls, lt - ls]))
        }
    }
}

/// Open knot vector on `[a, b]`; uniform spans, each interior knot repeated
/// the same number of times.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    pub degree: usize,
    pub knots: Vec<f64>,
}

impl KnotVector {
    /// Single interior knots (maximal continuity `C^{degree - 1}`).
    pub fn open_uniform(n_spans: usize, degree: usize, a: f64, b: f64) -> Result<Self> {
        Self::open_uniform_repeated(n_spans, degree, 1, a, b)
    }

    /// Interior knots of multiplicity `m`, giving `C^{degree - m}` continuity.
    pub fn open_uniform_repeated(n_spans: usize, degree: usize, m: usize, a: f64, b: f64) -> Result<Self> {
        if m == 0 || m > degree.max(1) {
            return Err(Error::InvalidInput(format!(
                "interior knot multiplicity {m} outside 1..={} for degree {degree}",
                degree.max(1)
            )));
        }
        if n_spans == 0 {
            return Err(Error::InvalidInput("knot vector needs at least one span".into()));
        }
        if !(b > a) {
            return Err(Error::InvalidInput(format!("empty knot interval [{a}, {b}]")));
        }
        let mut knots = vec![a; degree + 1];
        for i in 1..n_spans {
            let t = a + (b - a) * i as f64 / n_spans as f64;
            knots.extend(std::iter::repeat(t).take(m));
        }
        knots.extend(std::iter::repeat(b).take(degree + 1));
        Ok(Self { degree, knots })
    }

    pub fn n_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Number of nonempty knot intervals.
    pub fn n_spans(&self) -> usize {
        self.knots.windows(2).filter(|w| w[0] < w[1]).count()
    }

    /// Knot index `s` of the `e`-th nonempty interval `[knots[s], knots[s + 1]]`.
    /// Functions `s - degree..=s` are the ones supported there.
    pub fn span_knot(&self, e: usize) -> usize {
        self.knots
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] < w[1])
            .nth(e)
            .map(|(s, _)| s)
            .unwrap_or_else(|| panic!("span {e} out of range {}", self.n_spans()))
    }

    pub fn span_bounds(&self, e: usize) -> (f64, f64) {
        let s = self.span_knot(e);
        (self.knots[s], self.knots[s + 1])
    }

    /// Greville abscissae, one per basis function.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        if p == 0 {
            return (0..self.n_basis())
                .map(|i| 0.5 * (self.knots[i] + self.knots[i + 1]))
                .collect();
        }
        (0..self.n_basis())
            .map(|i| self.knots[i + 1..=i + p].iter().sum::<f64>() / p as f64)
            .collect()
    }

    pub fn is_open(&self) -> bool {
        let p = self.degree;
        let k = &self.knots;
        let n = k.len();
        k.windows(2).all(|w| w[0] <= w[1])
            && k[..=p].iter().all(|&t| t == k[0])
            && k[n - p - 1..].iter().all(|&t| t == k[n - 1])
    }
}

/// Grid of Bezier elements (knot spans) on a rectangle with the identity
/// geometry map. Velocity splines use `degree`, pressure splines `degree - 1`,
/// both on the same spans.
#[derive(Debug, Clone)]
pub struct TensorKnotMesh {
    pub degree: usize,
    pub n_spans: [usize; 2],
    pub origin: [f64; 2],
    pub extent: [f64; 2],
    pub knots: [KnotVector; 2],
    pub h: f64,
}

pub fn build_knot_mesh(n_spans: usize, degree: usize, origin: [f64; 2], extent: [f64; 2]) -> Result<TensorKnotMesh> {
    check_box(n_spans, extent)?;
    let kx = KnotVector::open_uniform(n_spans, degree, origin[0], origin[0] + extent[0])?;
    let ky = KnotVector::open_uniform(n_spans, degree, origin[1], origin[1] + extent[1])?;
    let h = (extent[0] / n_spans as f64).max(extent[1] / n_spans as f64);
    Ok(TensorKnotMesh {
        degree,
        n_spans: [n_spans, n_spans],
        origin,
        extent,
        knots: [kx, ky],
        h,
    })
}

impl TensorKnotMesh {
    pub fn n_elements(&self) -> usize {
        self.n_spans[0] * self.n_spans[1]
    }

    pub fn element_spans(&self, element: usize) -> (usize, usize) {
        (element % self.n_spans[0], element / self.n_spans[0])
    }

    pub fn span_size(&self) -> [f64; 2] {
        [
            self.extent[0] / self.n_spans[0] as f64,
            self.extent[1] / self.n_spans[1] as f64,
        ]
    }

    /// Knot vectors of degree `degree` over the same spans.
    pub fn knots_of_degree(&self, degree: usize) -> Result<[KnotVector; 2]> {
        self.knots_repeated(degree, 1)
    }

    /// Knot vectors over the same spans with interior multiplicity `m`.
    pub fn knots_repeated(&self, degree: usize, m: usize) -> Result<[KnotVector; 2]> {
        let kv = |d: usize| {
            KnotVector::open_uniform_repeated(self.n_spans[d], degree, m, self.origin[d], self.origin[d] + self.extent[d])
        };
        Ok([kv(0)?, kv(1)?])
    }

    /// Element containing `x` and parent coordinates in `[-1, 1]^2`.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 2])> {
        let hs = self.span_size();
        let mut idx = [0usize; 2];
        let mut xi = [0.0; 2];
        for d in 0..2 {
            let s = (x[d] - self.origin[d]) / hs[d];
            let n = self.n_spans[d];
            if s < -1e-12 || s > n as f64 + 1e-12 {
                return None;
            }
            let i = (s.floor().max(0.0) as usize).min(n - 1);
            idx[d] = i;
            xi[d] = 2.0 * (s - i as f64) - 1.0;
        }
        Some((idx[1] * self.n_spans[0] + idx[0], xi))
    }
}

/// Either supported mesh kind.
#[derive(Debug, Clone)]
pub enum Mesh {
    Triangles(StructuredTriMesh),
    Splines(TensorKnotMesh),
}

impl Mesh {
    pub fn n_elements(&self) -> usize {
        match self {
            Mesh::Triangles(m) => m.n_cells(),
            Mesh::Splines(m) => m.n_elements(),
        }
    }

    pub fn h(&self) -> f64 {
        match self {
            Mesh::Triangles(m) => m.h,
            Mesh::Splines(m) => m.h,
        }
    }

    pub fn origin(&self) -> [f64; 2] {
        match self {
            Mesh::Triangles(m) => m.origin,
            Mesh::Splines(m) => m.origin,
        }
    }

    pub fn extent(&self) -> [f64; 2] {
        match self {
            Mesh::Triangles(m) => m.extent,
            Mesh::Splines(m) => m.extent,
        }
    }

    pub fn n_per_side(&self) -> usize {
        match self {
            Mesh::Triangles(m) => m.n_per_side,
            Mesh::Splines(m) => m.n_spans[0],
        }
    }

    pub fn area(&self) -> f64 {
        let e = self.extent();
        e[0] * e[1]
    }

    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 2])> {
        match self {
            Mesh::Triangles(m) => m.locate(x),
            Mesh::Splines(m) => m.locate(x),
        }
    }
}
