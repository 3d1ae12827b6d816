//! Structured meshes, nodal fields and lumped quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::Point;

/// Geometry of a uniform mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    /// `[0, length]` split into `n` equal segments.
    Interval { n: usize, length: f64 },
    /// `[0, lx] × [0, ly]` with `nx × ny` cells, each cut along its
    /// lower-left to upper-right diagonal.
    Rectangle {
        nx: usize,
        ny: usize,
        lx: f64,
        ly: f64,
    },
}

/// A segment or triangle with its precomputed P1 data.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    /// Vertex indices; only the first `Mesh::nodes_per_element` entries are used.
    pub nodes: [usize; 3],
    pub measure: f64,
    /// Gradients of the local hat functions (constant on the element).
    pub basis_grads: [[f64; 2]; 3],
    pub centroid: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    spec: MeshSpec,
    dimension: usize,
    nodes: Vec<Point>,
    elements: Vec<Element>,
    lumped: Vec<f64>,
    measure: f64,
}

impl Mesh {
    pub fn new(spec: MeshSpec) -> Result<Self> {
        let mesh = match spec {
            MeshSpec::Interval { n, length } => {
                if n < 2 {
                    return Err(Error::Construction(format!(
                        "interval needs at least 2 segments, got {n}"
                    )));
                }
                if !(length.is_finite() && length > 0.0) {
                    return Err(Error::Construction(format!(
                        "interval length must be positive, got {length}"
                    )));
                }
                Self::interval(spec, n, length)
            }
            MeshSpec::Rectangle { nx, ny, lx, ly } => {
                if nx < 2 || ny < 2 {
                    return Err(Error::Construction(format!(
                        "rectangle needs at least 2 cells per side, got {nx}×{ny}"
                    )));
                }
                if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
                    return Err(Error::Construction(format!(
                        "rectangle sides must be positive, got {lx}×{ly}"
                    )));
                }
                Self::rectangle(spec, nx, ny, lx, ly)
            }
        };
        if !mesh.is_connected() {
            return Err(Error::Structural("element graph is not connected".into()));
        }
        Ok(mesh)
    }

    fn interval(spec: MeshSpec, n: usize, length: f64) -> Self {
        let h = length / n as f64;
        let nodes: Vec<Point> = (0..=n).map(|i| [i as f64 * h, 0.0]).collect();
        let elements = (0..n)
            .map(|i| Element {
                nodes: [i, i + 1, usize::MAX],
                measure: h,
                basis_grads: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0, 0.0]],
                centroid: [(i as f64 + 0.5) * h, 0.0],
            })
            .collect();
        Self::finish(spec, 1, nodes, elements)
    }

    fn rectangle(spec: MeshSpec, nx: usize, ny: usize, lx: f64, ly: f64) -> Self {
        let hx = lx / nx as f64;
        let hy = ly / ny as f64;
        let idx = |i: usize, j: usize| j * (nx + 1) + i;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([i as f64 * hx, j as f64 * hy]);
            }
        }
        let mut elements = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                elements.push(triangle(&nodes, [a, b, c]));
                elements.push(triangle(&nodes, [a, c, d]));
            }
        }
        Self::finish(spec, 2, nodes, elements)
    }

    fn finish(spec: MeshSpec, dimension: usize, nodes: Vec<Point>, elements: Vec<Element>) -> Self {
        let per = if dimension == 1 { 2 } else { 3 };
        let mut lumped = vec![0.0; nodes.len()];
        let mut measure = 0.0;
        for e in &elements {
            measure += e.measure;
            for &n in &e.nodes[..per] {
                lumped[n] += e.measure / per as f64;
            }
        }
        Self {
            spec,
            dimension,
            nodes,
            elements,
            lumped,
            measure,
        }
    }

    fn is_connected(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for e in &self.elements {
            let local = self.local_nodes(e);
            for w in local.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                parent[a] = b;
            }
        }
        let root = find(&mut parent, 0);
        (0..self.nodes.len()).all(|i| find(&mut parent, i) == root)
    }

    pub fn spec(&self) -> MeshSpec {
        self.spec
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn nodes_per_element(&self) -> usize {
        self.dimension + 1
    }

    pub fn local_nodes<'a>(&self, e: &'a Element) -> &'a [usize] {
        &e.nodes[..self.dimension + 1]
    }

    /// Lumped (row-sum) mass of each node; these are the nodal quadrature weights.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    /// |Ω|.
    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// Half-bandwidth of the node coupling graph under the natural ordering.
    pub fn bandwidth(&self) -> usize {
        match self.spec {
            MeshSpec::Interval { .. } => 1,
            MeshSpec::Rectangle { nx, .. } => nx + 2,
        }
    }

    /// Constant gradient of the P1 interpolant of `values` on element `e`.
    pub fn element_gradient(&self, e: &Element, values: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (k, &n) in self.local_nodes(e).iter().enumerate() {
            g[0] += values[n] * e.basis_grads[k][0];
            g[1] += values[n] * e.basis_grads[k][1];
        }
        g
    }

    /// Mean of the nodal samples over an element: the midpoint value of the
    /// P1 interpolant.
    pub fn element_mean(&self, e: &Element, values: &[f64]) -> f64 {
        let local = self.local_nodes(e);
        local.iter().map(|&n| values[n]).sum::<f64>() / local.len() as f64
    }

    /// Lower-left and upper-right corners of the bounding box.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self.spec {
            MeshSpec::Interval { length, .. } => ([0.0, 0.0], [length, 0.0]),
            MeshSpec::Rectangle { lx, ly, .. } => ([0.0, 0.0], [lx, ly]),
        }
    }
}

fn triangle(nodes: &[Point], ids: [usize; 3]) -> Element {
    let [p0, p1, p2] = [nodes[ids[0]], nodes[ids[1]], nodes[ids[2]]];
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let area = 0.5 * det.abs();
    // ∇λ_i = rot90(opposite edge) / (2·area), oriented by det
    let grad = |pa: Point, pb: Point| [(pa[1] - pb[1]) / det, (pb[0] - pa[0]) / det];
    Element {
        nodes: ids,
        measure: area,
        basis_grads: [grad(p1, p2), grad(p2, p0), grad(p0, p1)],
        centroid: [
            (p0[0] + p1[0] + p2[0]) / 3.0,
            (p0[1] + p1[1] + p2[1]) / 3.0,
        ],
    }
}

/// Builds a mesh from its geometric description.
pub fn build_mesh(spec: MeshSpec) -> Result<Mesh> {
    Mesh::new(spec)
}

/// Nodal values of a piecewise linear function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteField {
    pub values: Vec<f64>,
}

impl DiscreteField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self {
            values: vec![c; mesh.node_count()],
        }
    }

    pub fn from_fn<F: Fn(Point) -> f64>(mesh: &Mesh, f: F) -> Self {
        Self {
            values: mesh.nodes().iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sup |self − other|`.
    pub fn sup_distance(&self, other: &DiscreteField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest distance of a nodal value to `[lo, hi]`.
    pub fn band_violation(&self, lo: f64, hi: f64) -> f64 {
        self.values
            .iter()
            .map(|&v| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        check_len("field", mesh.node_count(), self.values.len())
    }
}

/// `∫Ω u dx` by the lumped nodal rule, summed in node order.
pub fn integrate(mesh: &Mesh, nodal: &DiscreteField) -> Result<f64> {
    nodal.check_mesh(mesh)?;
    Ok(mesh
        .lumped_mass()
        .iter()
        .zip(&nodal.values)
        .map(|(m, v)| m * v)
        .sum())
}
