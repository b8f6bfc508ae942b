//! Structured tetrahedral meshing of a stack of elastic boxes.
//!
//! Every layer shares the same rectangular footprint and is meshed with a
//! uniform grid of cells, each split into six tetrahedra along coordinate
//! permutation paths. Cells are mirrored in x (resp. y) whenever their x
//! (resp. y) cell index is odd, so the subdivision pattern — not just the
//! node cloud — is symmetric about the midplanes whenever the cell count on
//! that axis is even. Face diagonals still match across every shared cell
//! face: the diagonal orientation on an x-face depends only on the y-mirror
//! flag (and vice versa), which is constant between x-neighbours.
//!
//! Vertical resolution may differ per layer, but the horizontal grid is
//! shared, so interface nodes of adjacent layers coincide exactly. Node
//! coordinates are evaluated in folded form (second half mirrored from the
//! first), making both the midplane symmetry and the interface coincidence
//! bitwise exact rather than approximate.

use thiserror::Error;

/// Errors from mesh construction and validation.
#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh step must be positive, got {h}")]
    NonPositiveStep { h: f64 },
    #[error("extent along {axis} must be positive, got {value}")]
    DegenerateExtent { axis: char, value: f64 },
    #[error("a stack needs at least two z-levels (top and base), got {count}")]
    InsufficientLevels { count: usize },
    #[error("z-levels must strictly decrease from top to base; levels[{index}] = {upper} is not above levels[{index_below}] = {lower}")]
    NonDecreasingLevels {
        index: usize,
        index_below: usize,
        upper: f64,
        lower: f64,
    },
    #[error("layer {layer} tetrahedron {tet} has non-positive volume {volume}")]
    InvertedTet {
        layer: usize,
        tet: usize,
        volume: f64,
    },
    #[error("layer {layer} has a face shared by {count} tetrahedra (mesh is not manifold)")]
    NonManifoldFace { layer: usize, count: usize },
    #[error("interface {interface} pairs {upper} upper nodes with {lower} lower nodes")]
    InterfaceCountMismatch {
        interface: usize,
        upper: usize,
        lower: usize,
    },
    #[error("interface {interface} pair {pair} has mismatched coordinates")]
    InterfaceCoordinateMismatch { interface: usize, pair: usize },
}

/// Geometry of the stack: shared footprint and the horizontal planes that
/// bound the layers, listed from the loaded top surface down to the base.
#[derive(Debug, Clone, PartialEq)]
pub struct StackGeometry {
    pub extent_x: f64,
    pub extent_y: f64,
    /// `z_levels[0]` is the top surface, `z_levels[k+1]` the plane between
    /// layer k and layer k+1, and the last entry the clamped base.
    pub z_levels: Vec<f64>,
}

impl StackGeometry {
    pub fn n_layers(&self) -> usize {
        self.z_levels.len().saturating_sub(1)
    }

    /// (bottom, top) z-coordinates of layer `k` (0 is the top layer).
    pub fn layer_span(&self, k: usize) -> (f64, f64) {
        (self.z_levels[k + 1], self.z_levels[k])
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if !(self.extent_x > 0.0) || !self.extent_x.is_finite() {
            return Err(MeshError::DegenerateExtent {
                axis: 'x',
                value: self.extent_x,
            });
        }
        if !(self.extent_y > 0.0) || !self.extent_y.is_finite() {
            return Err(MeshError::DegenerateExtent {
                axis: 'y',
                value: self.extent_y,
            });
        }
        if self.z_levels.len() < 2 {
            return Err(MeshError::InsufficientLevels {
                count: self.z_levels.len(),
            });
        }
        for k in 0..self.z_levels.len() - 1 {
            let (upper, lower) = (self.z_levels[k], self.z_levels[k + 1]);
            if !(upper > lower) || !upper.is_finite() || !lower.is_finite() {
                return Err(MeshError::NonDecreasingLevels {
                    index: k,
                    index_below: k + 1,
                    upper,
                    lower,
                });
            }
        }
        Ok(())
    }
}

/// Role of a boundary triangle within its layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    /// Lateral wall (clamped).
    Side,
    /// Top surface of the first layer (carries the applied traction).
    Top,
    /// Bottom of the last layer (clamped).
    Base,
    /// Bottom face of layer k, touching interface k from above.
    InterfaceUpper(usize),
    /// Top face of layer k+1, touching interface k from below.
    InterfaceLower(usize),
}

/// A boundary triangle with its role.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryTri {
    pub nodes: [usize; 3],
    pub tag: BoundaryTag,
}

/// Tetrahedral mesh of one layer, with the structured grid retained.
#[derive(Debug, Clone)]
pub struct LayerMesh {
    /// Position of this layer in the stack (0 = top).
    pub index: usize,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub coords: Vec<[f64; 3]>,
    pub tets: Vec<[usize; 4]>,
    pub boundary: Vec<BoundaryTri>,
    /// Per node: true when the node lies on a lateral wall.
    pub lateral: Vec<bool>,
    extent_x: f64,
    extent_y: f64,
    z_bottom: f64,
    z_top: f64,
}

impl LayerMesh {
    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    /// Realized step sizes (hx, hy, hz).
    pub fn realized_steps(&self) -> [f64; 3] {
        [
            self.extent_x / self.nx as f64,
            self.extent_y / self.ny as f64,
            (self.z_top - self.z_bottom) / self.nz as f64,
        ]
    }

    pub fn node_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        debug_assert!(ix <= self.nx && iy <= self.ny && iz <= self.nz);
        (iz * (self.ny + 1) + iy) * (self.nx + 1) + ix
    }

    /// Structured grid indices (ix, iy, iz) of a node.
    pub fn grid_of(&self, node: usize) -> [usize; 3] {
        let ix = node % (self.nx + 1);
        let rest = node / (self.nx + 1);
        [ix, rest % (self.ny + 1), rest / (self.ny + 1)]
    }

    /// Evaluate a piecewise-linear vector field (3 DOFs per node, stored
    /// node-major) at a point inside this layer's box.
    ///
    /// Points are clamped to the box, so evaluation exactly on a face or at
    /// a node is well defined; the field is continuous, so the choice of
    /// containing cell at a cell boundary does not matter.
    pub fn interpolate_vector(&self, u: &[f64], p: [f64; 3]) -> [f64; 3] {
        assert_eq!(u.len(), 3 * self.n_nodes());
        let steps = self.realized_steps();
        let rel = [p[0], p[1], p[2] - self.z_bottom];
        let dims = [self.nx, self.ny, self.nz];
        let mut cell = [0usize; 3];
        let mut local = [0.0f64; 3];
        for a in 0..3 {
            let t = rel[a] / steps[a];
            let c = (t.floor() as isize).clamp(0, dims[a] as isize - 1) as usize;
            cell[a] = c;
            local[a] = (t - c as f64).clamp(0.0, 1.0);
        }
        let mirror = [cell[0] % 2 == 1, cell[1] % 2 == 1];
        let mut q = local;
        for a in 0..2 {
            if mirror[a] {
                q[a] = 1.0 - q[a];
            }
        }
        // Kuhn simplex containing q: sort the local coordinates descending;
        // the barycentric weights telescope from the sorted values.
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| q[b].partial_cmp(&q[a]).unwrap());
        let s = [q[order[0]], q[order[1]], q[order[2]]];
        let weights = [1.0 - s[0], s[0] - s[1], s[1] - s[2], s[2]];
        let mut corner = [0usize; 3];
        let mut corners = [[0usize; 3]; 4];
        for (step, &axis) in order.iter().enumerate() {
            corner[axis] = 1;
            corners[step + 1] = corner;
        }
        let mut out = [0.0; 3];
        for (w, offsets) in weights.iter().zip(corners.iter()) {
            let mut c = *offsets;
            for a in 0..2 {
                if mirror[a] {
                    c[a] = 1 - c[a];
                }
            }
            let node = self.node_index(cell[0] + c[0], cell[1] + c[1], cell[2] + c[2]);
            for d in 0..3 {
                out[d] += w * u[3 * node + d];
            }
        }
        out
    }
}

/// Matched interface nodes between two adjacent layers, ordered row-major by
/// (iy, ix). Entries flagged `pinned` lie on the lateral walls, where the
/// clamping takes precedence over the contact conditions.
#[derive(Debug, Clone)]
pub struct InterfacePairing {
    /// Layer above the interface (equals the interface index).
    pub upper_layer: usize,
    /// Layer below the interface.
    pub lower_layer: usize,
    pub upper_nodes: Vec<usize>,
    pub lower_nodes: Vec<usize>,
    /// Horizontal grid position (ix, iy) of each pair.
    pub grid: Vec<[usize; 2]>,
    pub pinned: Vec<bool>,
}

impl InterfacePairing {
    pub fn len(&self) -> usize {
        self.upper_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper_nodes.is_empty()
    }
}

/// The meshed stack.
#[derive(Debug, Clone)]
pub struct MultiLayerMesh {
    pub geometry: StackGeometry,
    pub target_h: f64,
    pub layers: Vec<LayerMesh>,
    pub interfaces: Vec<InterfacePairing>,
}

/// Aggregate quantities from [`validate_mesh`].
#[derive(Debug, Clone)]
pub struct MeshReport {
    pub nodes_per_layer: Vec<usize>,
    pub tets_per_layer: Vec<usize>,
    pub total_nodes: usize,
    pub total_tets: usize,
    pub boundary_tris: usize,
    pub min_tet_volume: f64,
    pub total_volume: f64,
    pub interface_pairs: Vec<usize>,
}

/// Signed volume of a tetrahedron (positive for right-handed ordering).
pub fn tet_volume(a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let w = [d[0] - a[0], d[1] - a[1], d[2] - a[2]];
    (u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0])
        + u[2] * (v[0] * w[1] - v[1] * w[0]))
        / 6.0
}

/// Area of a triangle in 3-D.
pub fn triangle_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let n = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    0.5 * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
}

/// Grid coordinate along one axis, evaluated in folded form: positions in the
/// upper half are computed as the mirror of the lower half, so node `n − i`
/// sits at exactly `lo + hi − x(i)` and an even cell count yields a bitwise
/// mirror-symmetric mesh. Endpoints are exact, which makes interface nodes of
/// adjacent layers coincide exactly.
fn axis_coord(i: usize, n: usize, lo: f64, hi: f64) -> f64 {
    if 2 * i <= n {
        lo + (hi - lo) * (i as f64 / n as f64)
    } else {
        hi - (hi - lo) * ((n - i) as f64 / n as f64)
    }
}

/// The six permutation paths of the Kuhn subdivision, as axis orders.
const KUHN_PATHS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

fn cells_for(extent: f64, h: f64) -> usize {
    ((extent / h).ceil() as usize).max(1)
}

fn build_layer(geometry: &StackGeometry, k: usize, h: f64) -> Result<LayerMesh, MeshError> {
    let (z_bottom, z_top) = geometry.layer_span(k);
    let nx = cells_for(geometry.extent_x, h);
    let ny = cells_for(geometry.extent_y, h);
    let nz = cells_for(z_top - z_bottom, h);

    let mut coords = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    let mut lateral = Vec::with_capacity(coords.capacity());
    for iz in 0..=nz {
        let z = axis_coord(iz, nz, z_bottom, z_top);
        for iy in 0..=ny {
            let y = axis_coord(iy, ny, 0.0, geometry.extent_y);
            for ix in 0..=nx {
                let x = axis_coord(ix, nx, 0.0, geometry.extent_x);
                coords.push([x, y, z]);
                lateral.push(ix == 0 || ix == nx || iy == 0 || iy == ny);
            }
        }
    }

    let mut mesh = LayerMesh {
        index: k,
        nx,
        ny,
        nz,
        coords,
        tets: Vec::with_capacity(6 * nx * ny * nz),
        boundary: Vec::new(),
        lateral,
        extent_x: geometry.extent_x,
        extent_y: geometry.extent_y,
        z_bottom,
        z_top,
    };

    for iz in 0..nz {
        for iy in 0..ny {
            for ix in 0..nx {
                let mirror = [ix % 2 == 1, iy % 2 == 1];
                for path in KUHN_PATHS {
                    let mut offsets = [[0usize; 3]; 4];
                    let mut acc = [0usize; 3];
                    for (step, &axis) in path.iter().enumerate() {
                        acc[axis] = 1;
                        offsets[step + 1] = acc;
                    }
                    let mut nodes = [0usize; 4];
                    for (slot, offset) in offsets.iter().enumerate() {
                        let mut c = *offset;
                        for a in 0..2 {
                            if mirror[a] {
                                c[a] = 1 - c[a];
                            }
                        }
                        nodes[slot] =
                            mesh.node_index(ix + c[0], iy + c[1], iz + c[2]);
                    }
                    let vol = tet_volume(
                        mesh.coords[nodes[0]],
                        mesh.coords[nodes[1]],
                        mesh.coords[nodes[2]],
                        mesh.coords[nodes[3]],
                    );
                    if vol < 0.0 {
                        nodes.swap(2, 3);
                    }
                    mesh.tets.push(nodes);
                }
            }
        }
    }

    mesh.boundary = extract_boundary(&mesh, geometry.n_layers())?;
    Ok(mesh)
}

/// Collect the faces that belong to exactly one tetrahedron and classify them
/// by the structured indices of their nodes. Faces are gathered through a
/// sorted scan, not a hash map, so their order is deterministic.
fn extract_boundary(mesh: &LayerMesh, n_layers: usize) -> Result<Vec<BoundaryTri>, MeshError> {
    let mut faces: Vec<([usize; 3], [usize; 3])> = Vec::with_capacity(4 * mesh.tets.len());
    for tet in &mesh.tets {
        for skip in 0..4 {
            let mut tri = [0usize; 3];
            let mut slot = 0;
            for (i, &node) in tet.iter().enumerate() {
                if i != skip {
                    tri[slot] = node;
                    slot += 1;
                }
            }
            let mut key = tri;
            key.sort_unstable();
            faces.push((key, tri));
        }
    }
    faces.sort_unstable_by(|a, b| a.0.cmp(&b.0));

    let mut boundary = Vec::new();
    let mut i = 0;
    while i < faces.len() {
        let mut j = i + 1;
        while j < faces.len() && faces[j].0 == faces[i].0 {
            j += 1;
        }
        match j - i {
            2 => {}
            1 => {
                let tri = faces[i].1;
                let tag = classify_boundary_face(mesh, tri, n_layers);
                boundary.push(BoundaryTri { nodes: tri, tag });
            }
            count => {
                return Err(MeshError::NonManifoldFace {
                    layer: mesh.index,
                    count,
                })
            }
        }
        i = j;
    }
    Ok(boundary)
}

fn classify_boundary_face(mesh: &LayerMesh, tri: [usize; 3], n_layers: usize) -> BoundaryTag {
    let grids = tri.map(|n| mesh.grid_of(n));
    let all = |f: &dyn Fn(&[usize; 3]) -> bool| grids.iter().all(f);
    if all(&|g| g[2] == 0) {
        return if mesh.index + 1 == n_layers {
            BoundaryTag::Base
        } else {
            BoundaryTag::InterfaceUpper(mesh.index)
        };
    }
    if all(&|g| g[2] == mesh.nz) {
        return if mesh.index == 0 {
            BoundaryTag::Top
        } else {
            BoundaryTag::InterfaceLower(mesh.index - 1)
        };
    }
    debug_assert!(
        all(&|g| g[0] == 0)
            || all(&|g| g[0] == mesh.nx)
            || all(&|g| g[1] == 0)
            || all(&|g| g[1] == mesh.ny),
        "boundary face is on no box face"
    );
    BoundaryTag::Side
}

/// Mesh the whole stack with target step `h`.
///
/// Cell counts are `ceil(extent / h)` per axis (never below one), so the
/// realized steps are at most `h`. All layers share the horizontal grid.
pub fn build_layered_box_mesh(
    geometry: &StackGeometry,
    h: f64,
) -> Result<MultiLayerMesh, MeshError> {
    geometry.validate()?;
    if !(h > 0.0) || !h.is_finite() {
        return Err(MeshError::NonPositiveStep { h });
    }
    let n = geometry.n_layers();
    let mut layers = Vec::with_capacity(n);
    for k in 0..n {
        layers.push(build_layer(geometry, k, h)?);
    }

    let mut interfaces = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n.saturating_sub(1) {
        let upper = &layers[k];
        let lower = &layers[k + 1];
        debug_assert_eq!(upper.nx, lower.nx);
        debug_assert_eq!(upper.ny, lower.ny);
        let mut pairing = InterfacePairing {
            upper_layer: k,
            lower_layer: k + 1,
            upper_nodes: Vec::new(),
            lower_nodes: Vec::new(),
            grid: Vec::new(),
            pinned: Vec::new(),
        };
        for iy in 0..=upper.ny {
            for ix in 0..=upper.nx {
                let un = upper.node_index(ix, iy, 0);
                let ln = lower.node_index(ix, iy, lower.nz);
                pairing.upper_nodes.push(un);
                pairing.lower_nodes.push(ln);
                pairing.grid.push([ix, iy]);
                pairing
                    .pinned
                    .push(ix == 0 || ix == upper.nx || iy == 0 || iy == upper.ny);
            }
        }
        interfaces.push(pairing);
    }

    Ok(MultiLayerMesh {
        geometry: geometry.clone(),
        target_h: h,
        layers,
        interfaces,
    })
}

/// Validate a mesh and report aggregate quantities.
///
/// Checks: every tetrahedron has positive volume; every layer's face
/// incidence is manifold (the boundary was already extracted as the faces
/// with a single owner); interface pairings are complete and the paired
/// coordinates are exactly equal.
pub fn validate_mesh(mesh: &MultiLayerMesh) -> Result<MeshReport, MeshError> {
    let mut report = MeshReport {
        nodes_per_layer: Vec::new(),
        tets_per_layer: Vec::new(),
        total_nodes: 0,
        total_tets: 0,
        boundary_tris: 0,
        min_tet_volume: f64::INFINITY,
        total_volume: 0.0,
        interface_pairs: Vec::new(),
    };
    for layer in &mesh.layers {
        report.nodes_per_layer.push(layer.n_nodes());
        report.tets_per_layer.push(layer.tets.len());
        report.total_nodes += layer.n_nodes();
        report.total_tets += layer.tets.len();
        report.boundary_tris += layer.boundary.len();
        for (t, tet) in layer.tets.iter().enumerate() {
            let vol = tet_volume(
                layer.coords[tet[0]],
                layer.coords[tet[1]],
                layer.coords[tet[2]],
                layer.coords[tet[3]],
            );
            if !(vol > 0.0) {
                return Err(MeshError::InvertedTet {
                    layer: layer.index,
                    tet: t,
                    volume: vol,
                });
            }
            report.min_tet_volume = report.min_tet_volume.min(vol);
            report.total_volume += vol;
        }
    }
    for (k, pairing) in mesh.interfaces.iter().enumerate() {
        let expected = (mesh.layers[k].nx + 1) * (mesh.layers[k].ny + 1);
        if pairing.upper_nodes.len() != expected || pairing.lower_nodes.len() != expected {
            return Err(MeshError::InterfaceCountMismatch {
                interface: k,
                upper: pairing.upper_nodes.len(),
                lower: pairing.lower_nodes.len(),
            });
        }
        for (pair, (&un, &ln)) in pairing
            .upper_nodes
            .iter()
            .zip(pairing.lower_nodes.iter())
            .enumerate()
        {
            let a = mesh.layers[pairing.upper_layer].coords[un];
            let b = mesh.layers[pairing.lower_layer].coords[ln];
            if a != b {
                return Err(MeshError::InterfaceCoordinateMismatch { interface: k, pair });
            }
        }
        report.interface_pairs.push(pairing.len());
    }
    Ok(report)
}
