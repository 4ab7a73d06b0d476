//! Structured quadrilateral/hexahedral meshes with named boundary sets and
//! geometric slit insertion for pre-cracks.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::linsolve::SparseSymmetricMatrix;

/// Hard cap on generated node counts.
const NODE_LIMIT: usize = 4_000_000;

/// A straight crack line (2D) or the in-plane trace of a crack plane that is
/// extruded through the thickness (3D). `a` is the mouth on the domain
/// boundary, `b` the tip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: [f64; 3],
    pub b: [f64; 3],
}

impl Segment {
    pub fn new(a: [f64; 3], b: [f64; 3]) -> Result<Self> {
        if a == b {
            return Err(Error::invalid_argument("segment endpoints must differ"));
        }
        Ok(Self { a, b })
    }
}

/// Euclidean distance from a point to the closest point of a segment.
pub fn distance_to_segment(x: &[f64], segment: &Segment) -> f64 {
    let dim = x.len().min(3);
    let mut ab = [0.0; 3];
    let mut ax = [0.0; 3];
    for i in 0..dim {
        ab[i] = segment.b[i] - segment.a[i];
        ax[i] = x[i] - segment.a[i];
    }
    let ab2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if ab2 == 0.0 {
        0.0
    } else {
        (ab.iter().zip(&ax).map(|(p, q)| p * q).sum::<f64>() / ab2).clamp(0.0, 1.0)
    };
    let mut d2 = 0.0;
    for i in 0..dim {
        let diff = ax[i] - t * ab[i];
        d2 += diff * diff;
    }
    d2.sqrt()
}

/// A boundary face referenced through its owner element, so node
/// duplication (slits) cannot invalidate it. `local` indexes into the
/// element connectivity; 2D faces are edges of 2 nodes, 3D faces quads of 4.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFace {
    pub element: usize,
    pub local: Vec<usize>,
}

/// Structured Q4 / HEX8 mesh.
#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    coords: Vec<[f64; 3]>,
    connectivity: Vec<usize>,
    nodes_per_element: usize,
    boundary_sets: BTreeMap<String, Vec<usize>>,
    boundary_faces: BTreeMap<String, Vec<BoundaryFace>>,
    /// Characteristic element size: the maximum element edge length.
    pub h: f64,
    /// Lazily built empty system matrices, shared across clones. The
    /// sparsity pattern depends only on the connectivity, which never
    /// changes after construction.
    u_matrix: OnceLock<Arc<SparseSymmetricMatrix>>,
    s_matrix: OnceLock<Arc<SparseSymmetricMatrix>>,
    u_scatter: OnceLock<Arc<Vec<u32>>>,
    s_scatter: OnceLock<Arc<Vec<u32>>>,
}

impl Mesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_elements(&self) -> usize {
        self.connectivity.len() / self.nodes_per_element
    }

    pub fn nodes_per_element(&self) -> usize {
        self.nodes_per_element
    }

    /// Fresh zero matrix on the displacement-system sparsity pattern.
    pub(crate) fn displacement_matrix(&self) -> SparseSymmetricMatrix {
        let proto = self.u_matrix.get_or_init(|| {
            Arc::new(SparseSymmetricMatrix::from_pattern(
                &crate::fem::displacement_pattern(self),
            ))
        });
        (**proto).clone()
    }

    /// Value-slot indices of every element matrix entry in the
    /// displacement system, element-major. Turns global scatter into
    /// indexed adds instead of per-entry binary searches.
    pub(crate) fn displacement_scatter(&self) -> &[u32] {
        self.u_scatter.get_or_init(|| {
            let proto = self.displacement_matrix();
            Arc::new(self.build_scatter(&proto, self.dim))
        })
    }

    /// Same as [`displacement_scatter`] for the nodal-scalar system.
    ///
    /// [`displacement_scatter`]: Self::displacement_scatter
    pub(crate) fn scalar_scatter(&self) -> &[u32] {
        self.s_scatter.get_or_init(|| {
            let proto = self.scalar_matrix();
            Arc::new(self.build_scatter(&proto, 1))
        })
    }

    fn build_scatter(&self, matrix: &SparseSymmetricMatrix, dofs_per_node: usize) -> Vec<u32> {
        let npe = self.nodes_per_element;
        let n = npe * dofs_per_node;
        let mut slots = Vec::with_capacity(self.n_elements() * n * n);
        for e in 0..self.n_elements() {
            let nodes = self.element(e);
            for i in 0..n {
                let gi = nodes[i / dofs_per_node] * dofs_per_node + i % dofs_per_node;
                for j in 0..n {
                    let gj = nodes[j / dofs_per_node] * dofs_per_node + j % dofs_per_node;
                    let slot = matrix
                        .slot(gi, gj)
                        .expect("element entry missing from the assembly pattern");
                    slots.push(slot as u32);
                }
            }
        }
        slots
    }

    /// Fresh zero matrix on the nodal-scalar sparsity pattern.
    pub(crate) fn scalar_matrix(&self) -> SparseSymmetricMatrix {
        let proto = self.s_matrix.get_or_init(|| {
            Arc::new(SparseSymmetricMatrix::from_pattern(
                &crate::fem::scalar_pattern(self),
            ))
        });
        (**proto).clone()
    }

    pub fn coord(&self, node: usize) -> &[f64; 3] {
        &self.coords[node]
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let n = self.nodes_per_element;
        &self.connectivity[e * n..(e + 1) * n]
    }

    pub fn set_names(&self) -> impl Iterator<Item = &str> {
        self.boundary_sets.keys().map(|s| s.as_str())
    }

    /// Named boundary node set; deterministic sorted order.
    pub fn named_set(&self, name: &str) -> Result<&[usize]> {
        self.boundary_sets
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| {
                let known: Vec<_> = self.boundary_sets.keys().cloned().collect();
                Error::Configuration(format!("unknown boundary set '{name}' (known: {known:?})"))
            })
    }

    /// Register a custom node set, e.g. a pin or a load patch picked with
    /// [`Mesh::select_box`]. Nodes are stored sorted and deduplicated.
    pub fn add_named_set(&mut self, name: &str, mut nodes: Vec<usize>) -> Result<()> {
        if self.boundary_sets.contains_key(name) {
            return Err(Error::Configuration(format!(
                "boundary set '{name}' already exists"
            )));
        }
        nodes.sort_unstable();
        nodes.dedup();
        if let Some(&worst) = nodes.last() {
            if worst >= self.n_nodes() {
                return Err(Error::Configuration(format!(
                    "set '{name}' references node {worst} outside mesh of {} nodes",
                    self.n_nodes()
                )));
            }
        }
        self.boundary_sets.insert(name.to_string(), nodes);
        Ok(())
    }

    pub fn boundary_faces(&self, name: &str) -> Result<&[BoundaryFace]> {
        self.boundary_faces
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::Configuration(format!("unknown boundary side '{name}'")))
    }

    /// Global node ids of a boundary face, resolved through its element.
    pub fn face_nodes(&self, face: &BoundaryFace) -> Vec<usize> {
        let elem = self.element(face.element);
        face.local.iter().map(|&l| elem[l]).collect()
    }

    /// Nodes inside an axis-aligned box expanded by `tol`; sorted.
    pub fn select_box(&self, min: &[f64], max: &[f64], tol: f64) -> Vec<usize> {
        let mut out = Vec::new();
        'nodes: for (n, c) in self.coords.iter().enumerate() {
            for i in 0..self.dim {
                if c[i] < min[i] - tol || c[i] > max[i] + tol {
                    continue 'nodes;
                }
            }
            out.push(n);
        }
        out
    }

    /// Axis-aligned bounding box of all nodes.
    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for c in &self.coords {
            for i in 0..3 {
                lo[i] = lo[i].min(c[i]);
                hi[i] = hi[i].max(c[i]);
            }
        }
        (lo, hi)
    }
}

/// Tensor-product structured grid over `[0, extents[i]]` with
/// `divisions[i]` elements per axis. Boundary sets are auto-named
/// left/right (x), bottom/top (y) and front/back (z, 3D only).
pub fn generate_structured(dim: usize, extents: &[f64], divisions: &[usize]) -> Result<Mesh> {
    if dim != 2 && dim != 3 {
        return Err(Error::invalid_argument(format!("dimension must be 2 or 3, got {dim}")));
    }
    if extents.len() != dim || divisions.len() != dim {
        return Err(Error::invalid_argument(
            "extents and divisions must match the dimension",
        ));
    }
    if extents.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::invalid_argument("extents must be positive"));
    }
    if divisions.iter().any(|&d| d < 1) {
        return Err(Error::invalid_argument("divisions must be >= 1 per axis"));
    }
    let n_nodes: usize = divisions.iter().map(|d| d + 1).product();
    if n_nodes > NODE_LIMIT {
        return Err(Error::Resource(format!(
            "mesh would have {n_nodes} nodes, limit is {NODE_LIMIT}"
        )));
    }

    let nx = divisions[0];
    let ny = divisions[1];
    let nz = if dim == 3 { divisions[2] } else { 0 };
    let dx = extents[0] / nx as f64;
    let dy = extents[1] / ny as f64;
    let dz = if dim == 3 { extents[2] / nz as f64 } else { 0.0 };

    let mut coords = Vec::with_capacity(n_nodes);
    if dim == 2 {
        for j in 0..=ny {
            for i in 0..=nx {
                coords.push([i as f64 * dx, j as f64 * dy, 0.0]);
            }
        }
    } else {
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    coords.push([i as f64 * dx, j as f64 * dy, k as f64 * dz]);
                }
            }
        }
    }

    let node2 = |i: usize, j: usize| j * (nx + 1) + i;
    let node3 = |i: usize, j: usize, k: usize| k * (ny + 1) * (nx + 1) + j * (nx + 1) + i;

    let nodes_per_element = if dim == 2 { 4 } else { 8 };
    let mut connectivity = Vec::new();
    if dim == 2 {
        for j in 0..ny {
            for i in 0..nx {
                connectivity.extend_from_slice(&[
                    node2(i, j),
                    node2(i + 1, j),
                    node2(i + 1, j + 1),
                    node2(i, j + 1),
                ]);
            }
        }
    } else {
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    connectivity.extend_from_slice(&[
                        node3(i, j, k),
                        node3(i + 1, j, k),
                        node3(i + 1, j + 1, k),
                        node3(i, j + 1, k),
                        node3(i, j, k + 1),
                        node3(i + 1, j, k + 1),
                        node3(i + 1, j + 1, k + 1),
                        node3(i, j + 1, k + 1),
                    ]);
                }
            }
        }
    }

    let mut boundary_sets: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let tol = 1e-9 * extents.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut add_set = |name: &str, axis: usize, value: f64, coords: &[[f64; 3]]| {
        let nodes: Vec<usize> = coords
            .iter()
            .enumerate()
            .filter(|(_, c)| (c[axis] - value).abs() <= tol)
            .map(|(n, _)| n)
            .collect();
        boundary_sets.insert(name.to_string(), nodes);
    };
    add_set("left", 0, 0.0, &coords);
    add_set("right", 0, extents[0], &coords);
    add_set("bottom", 1, 0.0, &coords);
    add_set("top", 1, extents[1], &coords);
    if dim == 3 {
        add_set("front", 2, 0.0, &coords);
        add_set("back", 2, extents[2], &coords);
    }

    // Boundary faces referenced through owner elements.
    let mut boundary_faces: BTreeMap<String, Vec<BoundaryFace>> = BTreeMap::new();
    if dim == 2 {
        let elem2 = |i: usize, j: usize| j * nx + i;
        let mut faces = |name: &str, list: Vec<BoundaryFace>| {
            boundary_faces.insert(name.to_string(), list);
        };
        faces(
            "bottom",
            (0..nx)
                .map(|i| BoundaryFace {
                    element: elem2(i, 0),
                    local: vec![0, 1],
                })
                .collect(),
        );
        faces(
            "top",
            (0..nx)
                .map(|i| BoundaryFace {
                    element: elem2(i, ny - 1),
                    local: vec![3, 2],
                })
                .collect(),
        );
        faces(
            "left",
            (0..ny)
                .map(|j| BoundaryFace {
                    element: elem2(0, j),
                    local: vec![0, 3],
                })
                .collect(),
        );
        faces(
            "right",
            (0..ny)
                .map(|j| BoundaryFace {
                    element: elem2(nx - 1, j),
                    local: vec![1, 2],
                })
                .collect(),
        );
    } else {
        let elem3 = |i: usize, j: usize, k: usize| k * ny * nx + j * nx + i;
        let mut faces: BTreeMap<String, Vec<BoundaryFace>> = BTreeMap::new();
        for k in 0..nz {
            for j in 0..ny {
                faces.entry("left".into()).or_default().push(BoundaryFace {
                    element: elem3(0, j, k),
                    local: vec![0, 3, 7, 4],
                });
                faces.entry("right".into()).or_default().push(BoundaryFace {
                    element: elem3(nx - 1, j, k),
                    local: vec![1, 2, 6, 5],
                });
            }
        }
        for k in 0..nz {
            for i in 0..nx {
                faces.entry("bottom".into()).or_default().push(BoundaryFace {
                    element: elem3(i, 0, k),
                    local: vec![0, 1, 5, 4],
                });
                faces.entry("top".into()).or_default().push(BoundaryFace {
                    element: elem3(i, ny - 1, k),
                    local: vec![3, 2, 6, 7],
                });
            }
        }
        for j in 0..ny {
            for i in 0..nx {
                faces.entry("front".into()).or_default().push(BoundaryFace {
                    element: elem3(i, j, 0),
                    local: vec![0, 1, 2, 3],
                });
                faces.entry("back".into()).or_default().push(BoundaryFace {
                    element: elem3(i, j, nz - 1),
                    local: vec![4, 5, 6, 7],
                });
            }
        }
        boundary_faces = faces;
    }

    let h = dx.max(dy).max(dz);
    Ok(Mesh {
        dim,
        coords,
        connectivity,
        nodes_per_element,
        boundary_sets,
        boundary_faces,
        h,
        u_matrix: OnceLock::new(),
        s_matrix: OnceLock::new(),
        u_scatter: OnceLock::new(),
        s_scatter: OnceLock::new(),
    })
}

/// Insert a traction-free slit along element edges. The slit must be
/// axis-aligned in the x-y plane with endpoints on mesh lines, and must
/// start at the domain boundary; in 3D it is extruded through the full
/// thickness. Nodes strictly before the tip are duplicated and elements on
/// the positive side of the slit line are rewired to the copies.
pub fn insert_slit(mesh: &Mesh, segment: &Segment) -> Result<Mesh> {
    let dim = mesh.dim;
    let tol = 1e-9 * mesh.h.max(1e-12);
    let horizontal = (segment.a[1] - segment.b[1]).abs() <= tol;
    let vertical = (segment.a[0] - segment.b[0]).abs() <= tol;
    if horizontal == vertical {
        return Err(Error::UnsupportedGeometry(
            "slit segment must be axis-aligned in the x-y plane".into(),
        ));
    }
    // Axis along the slit and the axis it cuts across.
    let (along, across) = if horizontal { (0usize, 1usize) } else { (1usize, 0usize) };
    let level = segment.a[across];
    let (lo, hi) = mesh.bounding_box();
    let on_boundary = (segment.a[along] - lo[along]).abs() <= tol
        || (segment.a[along] - hi[along]).abs() <= tol;
    if !on_boundary {
        return Err(Error::UnsupportedGeometry(
            "slit must start at the domain boundary".into(),
        ));
    }
    let span_min = segment.a[along].min(segment.b[along]);
    let span_max = segment.a[along].max(segment.b[along]);

    // Distinct node stations along the slit line, sorted.
    let mut stations: Vec<f64> = mesh
        .coords
        .iter()
        .filter(|c| (c[across] - level).abs() <= tol)
        .map(|c| c[along])
        .collect();
    stations.sort_by(|a, b| a.partial_cmp(b).unwrap());
    stations.dedup_by(|a, b| (*a - *b).abs() <= tol);
    if stations.len() < 2 {
        return Err(Error::UnsupportedGeometry(
            "slit line does not coincide with a mesh line".into(),
        ));
    }

    // Mesh edges on the line fully covered by the slit span count as cut.
    // A node bounding cut edges is duplicated unless it is a crack tip: an
    // end of the cut chain lying in the domain interior stays shared.
    let cut: Vec<bool> = stations
        .windows(2)
        .map(|w| w[0] >= span_min - tol && w[1] <= span_max + tol)
        .collect();
    if !cut.iter().any(|&c| c) {
        return Ok(mesh.clone());
    }
    let mut split_station = vec![false; stations.len()];
    for (s, flag) in split_station.iter_mut().enumerate() {
        let cut_before = s > 0 && cut[s - 1];
        let cut_after = s < cut.len() && cut[s];
        let on_domain_boundary = (stations[s] - lo[along]).abs() <= tol
            || (stations[s] - hi[along]).abs() <= tol;
        *flag = (cut_before && cut_after) || ((cut_before || cut_after) && on_domain_boundary);
    }

    let station_of = |v: f64| -> Option<usize> {
        stations.iter().position(|&s| (s - v).abs() <= tol)
    };
    let mut duplicate_of: BTreeMap<usize, usize> = BTreeMap::new();
    let mut new_coords = mesh.coords.clone();
    for (n, c) in mesh.coords.iter().enumerate() {
        if (c[across] - level).abs() > tol {
            continue;
        }
        let Some(s) = station_of(c[along]) else { continue };
        if !split_station[s] {
            continue;
        }
        let dup = new_coords.len();
        new_coords.push(*c);
        duplicate_of.insert(n, dup);
    }
    if duplicate_of.is_empty() {
        return Ok(mesh.clone());
    }
    if new_coords.len() > NODE_LIMIT {
        return Err(Error::Resource("slit insertion exceeded the node limit".into()));
    }

    let npe = mesh.nodes_per_element;
    let mut connectivity = mesh.connectivity.clone();
    for e in 0..mesh.n_elements() {
        let elem = &mut connectivity[e * npe..(e + 1) * npe];
        if !elem.iter().any(|n| duplicate_of.contains_key(n)) {
            continue;
        }
        let centroid_across: f64 = elem
            .iter()
            .map(|&n| mesh.coords[n][across])
            .sum::<f64>()
            / npe as f64;
        if centroid_across > level {
            for n in elem.iter_mut() {
                if let Some(&dup) = duplicate_of.get(n) {
                    *n = dup;
                }
            }
        }
    }

    // Duplicates inherit membership of every named set of their original.
    let mut boundary_sets = mesh.boundary_sets.clone();
    for nodes in boundary_sets.values_mut() {
        let extra: Vec<usize> = nodes
            .iter()
            .filter_map(|n| duplicate_of.get(n).copied())
            .collect();
        nodes.extend(extra);
        nodes.sort_unstable();
        nodes.dedup();
    }

    Ok(Mesh {
        dim,
        coords: new_coords,
        connectivity,
        nodes_per_element: npe,
        boundary_sets,
        boundary_faces: mesh.boundary_faces.clone(),
        h: mesh.h,
        u_matrix: OnceLock::new(),
        s_matrix: OnceLock::new(),
        u_scatter: OnceLock::new(),
        s_scatter: OnceLock::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn structured_2d_counts() {
        let m = generate_structured(2, &[1.0, 1.0], &[2, 2]).unwrap();
        assert_eq!(m.n_nodes(), 9);
        assert_eq!(m.n_elements(), 4);
        assert_eq!(m.nodes_per_element(), 4);
    }

    #[test]
    fn structured_3d_single_element() {
        let m = generate_structured(3, &[1.0, 1.0, 1.0], &[1, 1, 1]).unwrap();
        assert_eq!(m.n_nodes(), 8);
        assert_eq!(m.n_elements(), 1);
    }

    #[test]
    fn element_size_matches_fine_grid() {
        let m = generate_structured(2, &[1.0, 1.0], &[252, 252]).unwrap();
        assert_relative_eq!(m.h, 3.968e-3, max_relative = 0.01);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(generate_structured(2, &[1.0, -1.0], &[2, 2]).is_err());
        assert!(generate_structured(2, &[1.0, 1.0], &[0, 2]).is_err());
        assert!(generate_structured(4, &[1.0; 4], &[1; 4]).is_err());
        assert!(generate_structured(2, &[1.0, 1.0], &[3000, 3000]).is_err());
    }

    #[test]
    fn named_sets_are_sorted_and_correct() {
        let m = generate_structured(2, &[1.0, 1.0], &[2, 2]).unwrap();
        let top = m.named_set("top").unwrap();
        assert_eq!(top.len(), 3);
        for &n in top {
            assert_relative_eq!(m.coord(n)[1], 1.0);
        }
        assert!(top.windows(2).all(|w| w[0] < w[1]));
        assert!(m.named_set("nope").is_err());
    }

    #[test]
    fn box_selection() {
        let m = generate_structured(3, &[1.0, 1.0, 1.0], &[1, 1, 1]).unwrap();
        let face = m.select_box(&[0.0, 0.0, 0.0], &[0.0, 1.0, 1.0], 1e-9);
        assert_eq!(face.len(), 4);
        let all = m.select_box(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], 1e-9);
        assert_eq!(all.len(), 8);
    }

    #[test]
    fn distance_to_segment_cases() {
        let seg = Segment::new([-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(distance_to_segment(&[0.5, 0.0], &seg), 0.0);
        assert_relative_eq!(distance_to_segment(&[0.0, 1.0], &seg), 1.0);
        assert_relative_eq!(distance_to_segment(&[2.0, 1.0], &seg), 2f64.sqrt());
    }

    #[test]
    fn slit_duplicates_interior_nodes_only() {
        let m = generate_structured(2, &[1.0, 1.0], &[4, 4]).unwrap();
        let seg = Segment::new([0.0, 0.5, 0.0], [0.5, 0.5, 0.0]).unwrap();
        let slitted = insert_slit(&m, &seg).unwrap();
        // Nodes at x = 0 and x = 0.25 on the slit line are duplicated; the
        // tip node at x = 0.5 stays shared.
        assert_eq!(slitted.n_nodes(), m.n_nodes() + 2);
        assert_eq!(slitted.n_elements(), m.n_elements());
    }

    #[test]
    fn short_slit_is_a_no_op() {
        let m = generate_structured(2, &[1.0, 1.0], &[4, 4]).unwrap();
        // Slit shorter than one element edge cuts nothing.
        let seg = Segment::new([0.0, 0.5, 0.0], [0.1, 0.5, 0.0]).unwrap();
        let slitted = insert_slit(&m, &seg).unwrap();
        assert_eq!(slitted.n_nodes(), m.n_nodes());
        assert_eq!(slitted.n_elements(), m.n_elements());
    }

    #[test]
    fn one_edge_slit_opens_only_the_mouth() {
        let m = generate_structured(2, &[1.0, 1.0], &[4, 4]).unwrap();
        let seg = Segment::new([0.0, 0.5, 0.0], [0.25, 0.5, 0.0]).unwrap();
        let slitted = insert_slit(&m, &seg).unwrap();
        // Mouth node duplicated, tip shared.
        assert_eq!(slitted.n_nodes(), m.n_nodes() + 1);
    }

    #[test]
    fn full_width_slit_decouples_both_ends() {
        let m1 = generate_structured(2, &[1.0, 1.0], &[1, 2]).unwrap();
        assert!(Segment::new([0.0, 0.5, 0.0], [0.0, 0.5, 0.0]).is_err());
        let seg = Segment::new([0.0, 0.5, 0.0], [1.0, 0.5, 0.0]).unwrap();
        let s = insert_slit(&m1, &seg).unwrap();
        // Both line nodes sit on the domain boundary and are duplicated,
        // leaving two fully decoupled element stacks.
        assert_eq!(s.n_nodes(), m1.n_nodes() + 2);
        let lower: Vec<usize> = s.element(0).to_vec();
        let upper: Vec<usize> = s.element(1).to_vec();
        assert!(lower.iter().all(|n| !upper.contains(n)));
    }

    #[test]
    fn slit_rejects_misaligned_geometry() {
        let m = generate_structured(2, &[1.0, 1.0], &[4, 4]).unwrap();
        let diag = Segment::new([0.0, 0.0, 0.0], [0.5, 0.5, 0.0]).unwrap();
        assert!(insert_slit(&m, &diag).is_err());
        let off_line = Segment::new([0.0, 0.3, 0.0], [0.5, 0.3, 0.0]).unwrap();
        assert!(matches!(
            insert_slit(&m, &off_line),
            Ok(_) | Err(Error::UnsupportedGeometry(_))
        ));
        let interior_start = Segment::new([0.25, 0.5, 0.0], [0.75, 0.5, 0.0]).unwrap();
        assert!(insert_slit(&m, &interior_start).is_err());
    }

    #[test]
    fn slit_separates_elements_across_the_line() {
        let m = generate_structured(2, &[1.0, 1.0], &[2, 2]).unwrap();
        let seg = Segment::new([0.0, 0.5, 0.0], [0.5, 0.5, 0.0]).unwrap();
        let s = insert_slit(&m, &seg).unwrap();
        // The lower-left and upper-left elements must no longer share their
        // edge on the slit line.
        let lower: Vec<usize> = s.element(0).to_vec();
        let upper: Vec<usize> = s.element(2).to_vec();
        let shared: Vec<usize> = lower.iter().filter(|n| upper.contains(n)).copied().collect();
        // Only the tip node at (0.5, 0.5) remains shared.
        assert_eq!(shared.len(), 1);
        let tip = shared[0];
        assert_relative_eq!(s.coord(tip)[0], 0.5);
        assert_relative_eq!(s.coord(tip)[1], 0.5);
    }

    #[test]
    fn slit_in_3d_extrudes_through_thickness() {
        let m = generate_structured(3, &[1.0, 1.0, 0.5], &[2, 2, 1]).unwrap();
        let seg = Segment::new([0.0, 0.5, 0.0], [0.5, 0.5, 0.0]).unwrap();
        let s = insert_slit(&m, &seg).unwrap();
        // One in-plane node column before the tip, two z-levels.
        assert_eq!(s.n_nodes(), m.n_nodes() + 2);
        assert_eq!(s.n_elements(), m.n_elements());
    }

    #[test]
    fn boundary_faces_survive_slitting() {
        let m = generate_structured(2, &[1.0, 1.0], &[4, 4]).unwrap();
        let seg = Segment::new([0.0, 0.5, 0.0], [0.5, 0.5, 0.0]).unwrap();
        let s = insert_slit(&m, &seg).unwrap();
        let faces = s.boundary_faces("left").unwrap();
        assert_eq!(faces.len(), 4);
        for f in faces {
            for n in s.face_nodes(f) {
                assert_relative_eq!(s.coord(n)[0], 0.0);
            }
        }
    }
}
