//! Finite-element assembly for linear elasticity on tetrahedral layers.
//!
//! Piecewise-linear (P1) elements throughout: element stiffness from the
//! constant strain of each tetrahedron, body forces lumped as volume/4 per
//! vertex, surface tractions integrated exactly over the intersection of the
//! loaded patch with each top-surface triangle, and friction bounds lumped
//! into nodal weights as area/3 per incident interface triangle.

use crate::mesh::{triangle_area, BoundaryTag, InterfacePairing, LayerMesh};
use thiserror::Error;

/// Errors from material validation and load assembly.
#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("Young's modulus must be positive and finite, got {value}")]
    InvalidModulus { value: f64 },
    #[error("Poisson ratio {value} outside [0, 0.5); 0.5 is the incompressible limit")]
    PoissonOutOfRange { value: f64 },
    #[error("friction bound must be non-negative and finite, got {value}")]
    NegativeFrictionBound { value: f64 },
    #[error("surface patch is degenerate: x {x_min}..{x_max}, y {y_min}..{y_max}")]
    DegeneratePatch {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
    #[error("pairing belongs to layer {expected} but mesh is layer {got}")]
    PairingLayerMismatch { expected: usize, got: usize },
}

/// Isotropic linear-elastic material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    youngs_modulus: f64,
    poisson_ratio: f64,
}

/// The Lamé pair derived from engineering constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LameParameters {
    pub lambda: f64,
    pub mu: f64,
}

impl Material {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64) -> Result<Self, AssemblyError> {
        if !(youngs_modulus > 0.0) || !youngs_modulus.is_finite() {
            return Err(AssemblyError::InvalidModulus {
                value: youngs_modulus,
            });
        }
        if !(0.0..0.5).contains(&poisson_ratio) {
            return Err(AssemblyError::PoissonOutOfRange {
                value: poisson_ratio,
            });
        }
        Ok(Self {
            youngs_modulus,
            poisson_ratio,
        })
    }

    pub fn youngs_modulus(&self) -> f64 {
        self.youngs_modulus
    }

    pub fn poisson_ratio(&self) -> f64 {
        self.poisson_ratio
    }

    /// λ = Eν/((1+ν)(1−2ν)), μ = E/(2(1+ν)).
    pub fn lame_parameters(&self) -> LameParameters {
        let e = self.youngs_modulus;
        let nu = self.poisson_ratio;
        LameParameters {
            lambda: e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
            mu: e / (2.0 * (1.0 + nu)),
        }
    }
}

/// Basis gradients and volume of one tetrahedron.
///
/// Returns the four constant gradients ∇φ_a and the (positive) volume.
fn tet_gradients(p: [[f64; 3]; 4]) -> ([[f64; 3]; 4], f64) {
    let e = [
        [p[1][0] - p[0][0], p[1][1] - p[0][1], p[1][2] - p[0][2]],
        [p[2][0] - p[0][0], p[2][1] - p[0][1], p[2][2] - p[0][2]],
        [p[3][0] - p[0][0], p[3][1] - p[0][1], p[3][2] - p[0][2]],
    ];
    // det of the edge matrix with columns e1,e2,e3 = 6·(signed volume).
    let det = e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1])
        - e[1][0] * (e[0][1] * e[2][2] - e[0][2] * e[2][1])
        + e[2][0] * (e[0][1] * e[1][2] - e[0][2] * e[1][1]);
    debug_assert!(det != 0.0, "degenerate tetrahedron");
    let inv_det = 1.0 / det;
    // Rows of the inverse of the matrix whose ROWS are e1,e2,e3 give the
    // barycentric gradients ∇φ_1..∇φ_3 (φ_i(x) = row_i · (x − p0)).
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let c12 = cross(e[1], e[2]);
    let c20 = cross(e[2], e[0]);
    let c01 = cross(e[0], e[1]);
    let g1 = [c12[0] * inv_det, c12[1] * inv_det, c12[2] * inv_det];
    let g2 = [c20[0] * inv_det, c20[1] * inv_det, c20[2] * inv_det];
    let g3 = [c01[0] * inv_det, c01[1] * inv_det, c01[2] * inv_det];
    let g0 = [
        -g1[0] - g2[0] - g3[0],
        -g1[1] - g2[1] - g3[1],
        -g1[2] - g2[2] - g3[2],
    ];
    ([g0, g1, g2, g3], det.abs() / 6.0)
}

/// Assemble the elastic stiffness matrix of one layer (3 DOFs per node,
/// node-major DOF order).
///
/// For basis functions φ_a e_k, φ_b e_l the entry is
/// vol·(λ ∂_kφ_a ∂_lφ_b + μ ∂_lφ_a ∂_kφ_b + μ δ_kl ∇φ_a·∇φ_b).
pub fn assemble_stiffness(mesh: &LayerMesh, material: &Material) -> crate::sparse::SparseSpd {
    let LameParameters { lambda, mu } = material.lame_parameters();
    let n_dofs = 3 * mesh.n_nodes();
    let mut triplets = Vec::with_capacity(144 * mesh.tets.len());
    for tet in &mesh.tets {
        let p = tet.map(|n| mesh.coords[n]);
        let (g, vol) = tet_gradients(p);
        for a in 0..4 {
            for b in 0..4 {
                let dot_ab = g[a][0] * g[b][0] + g[a][1] * g[b][1] + g[a][2] * g[b][2];
                for k in 0..3 {
                    for l in 0..3 {
                        let mut v = lambda * g[a][k] * g[b][l] + mu * g[a][l] * g[b][k];
                        if k == l {
                            v += mu * dot_ab;
                        }
                        triplets.push((3 * tet[a] + k, 3 * tet[b] + l, vol * v));
                    }
                }
            }
        }
    }
    crate::sparse::SparseSpd::from_triplets(n_dofs, triplets)
}

/// Assemble the load vector of a constant body-force density.
pub fn assemble_body_load(mesh: &LayerMesh, force_density: [f64; 3]) -> Vec<f64> {
    let mut load = vec![0.0; 3 * mesh.n_nodes()];
    for tet in &mesh.tets {
        let p = tet.map(|n| mesh.coords[n]);
        let (_, vol) = tet_gradients(p);
        let share = vol / 4.0;
        for &node in tet {
            for d in 0..3 {
                load[3 * node + d] += share * force_density[d];
            }
        }
    }
    load
}

/// Axis-aligned rectangle on the top surface carrying a constant traction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePatch {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl SurfacePatch {
    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    fn validate(&self) -> Result<(), AssemblyError> {
        if !(self.x_min < self.x_max) || !(self.y_min < self.y_max) {
            return Err(AssemblyError::DegeneratePatch {
                x_min: self.x_min,
                x_max: self.x_max,
                y_min: self.y_min,
                y_max: self.y_max,
            });
        }
        Ok(())
    }
}

/// Result of traction assembly: the load vector plus how much of the patch
/// actually landed on the surface, so callers can warn about patches that
/// miss the mesh (partially or entirely).
#[derive(Debug, Clone)]
pub struct TractionLoad {
    pub load: Vec<f64>,
    /// Area of patch ∩ top surface actually integrated.
    pub covered_area: f64,
    /// Nominal patch area.
    pub patch_area: f64,
}

/// Integrate a constant traction over `patch ∩ top surface` of this layer.
///
/// Each top triangle is clipped against the patch rectangle in the x–y plane
/// (the top surface is horizontal) and the linear basis functions are
/// integrated exactly over the clipped polygon, so the result does not
/// depend on whether patch edges align with mesh lines.
pub fn assemble_traction_load(
    mesh: &LayerMesh,
    patch: &SurfacePatch,
    traction: [f64; 3],
) -> Result<TractionLoad, AssemblyError> {
    patch.validate()?;
    let mut load = vec![0.0; 3 * mesh.n_nodes()];
    let mut covered_area = 0.0;
    for tri in &mesh.boundary {
        if tri.tag != BoundaryTag::Top {
            continue;
        }
        let corners = tri.nodes.map(|n| mesh.coords[n]);
        let flat: Vec<[f64; 2]> = corners.iter().map(|p| [p[0], p[1]]).collect();
        let clipped = clip_to_rect(&flat, patch);
        if clipped.len() < 3 {
            continue;
        }
        let (basis_integrals, area) = integrate_basis_over_polygon(&flat, &clipped);
        covered_area += area;
        for (a, &node) in tri.nodes.iter().enumerate() {
            for d in 0..3 {
                load[3 * node + d] += traction[d] * basis_integrals[a];
            }
        }
    }
    Ok(TractionLoad {
        load,
        covered_area,
        patch_area: patch.area(),
    })
}

/// Sutherland–Hodgman clip of a convex polygon against an axis-aligned
/// rectangle.
fn clip_to_rect(poly: &[[f64; 2]], patch: &SurfacePatch) -> Vec<[f64; 2]> {
    let mut current = poly.to_vec();
    let planes = [
        (0, patch.x_min, false),
        (0, patch.x_max, true),
        (1, patch.y_min, false),
        (1, patch.y_max, true),
    ];
    for (axis, bound, keep_below) in planes {
        if current.is_empty() {
            break;
        }
        let inside =
            |p: &[f64; 2]| if keep_below { p[axis] <= bound } else { p[axis] >= bound };
        let mut next = Vec::with_capacity(current.len() + 1);
        for i in 0..current.len() {
            let a = current[i];
            let b = current[(i + 1) % current.len()];
            let (ia, ib) = (inside(&a), inside(&b));
            if ia != ib {
                let t = (bound - a[axis]) / (b[axis] - a[axis]);
                let mut p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                p[axis] = bound;
                next.push(p);
            }
            if ib {
                next.push(b);
            }
        }
        current = next;
    }
    current
}

/// Integrals of the three linear basis functions of triangle `tri` over a
/// convex polygon contained in it, plus the polygon area. Exact: each fan
/// triangle contributes area × mean of the (affine) basis values.
fn integrate_basis_over_polygon(tri: &[[f64; 2]], poly: &[[f64; 2]]) -> ([f64; 3], f64) {
    let barycentric = |p: [f64; 2]| -> [f64; 3] {
        let d1 = [tri[1][0] - tri[0][0], tri[1][1] - tri[0][1]];
        let d2 = [tri[2][0] - tri[0][0], tri[2][1] - tri[0][1]];
        let rhs = [p[0] - tri[0][0], p[1] - tri[0][1]];
        let det = d1[0] * d2[1] - d1[1] * d2[0];
        let beta = (rhs[0] * d2[1] - rhs[1] * d2[0]) / det;
        let gamma = (d1[0] * rhs[1] - d1[1] * rhs[0]) / det;
        [1.0 - beta - gamma, beta, gamma]
    };
    let bary: Vec<[f64; 3]> = poly.iter().map(|&p| barycentric(p)).collect();
    let mut integrals = [0.0; 3];
    let mut total_area = 0.0;
    for i in 1..poly.len() - 1 {
        let signed = 0.5
            * ((poly[i][0] - poly[0][0]) * (poly[i + 1][1] - poly[0][1])
                - (poly[i + 1][0] - poly[0][0]) * (poly[i][1] - poly[0][1]));
        let area = signed.abs();
        total_area += area;
        for a in 0..3 {
            integrals[a] += area * (bary[0][a] + bary[i][a] + bary[i + 1][a]) / 3.0;
        }
    }
    (integrals, total_area)
}

/// Lumped nodal friction weights on one interface.
///
/// Each interface triangle of the upper layer spreads a third of its area to
/// each of its nodes; the weight of pair q is `bound × (summed area share)`.
/// The returned vector is aligned with the pairing order. Pairs on the
/// lateral walls keep their geometric weight — the solver pins them anyway.
pub fn friction_weights(
    upper_layer: &LayerMesh,
    pairing: &InterfacePairing,
    bound: f64,
) -> Result<Vec<f64>, AssemblyError> {
    if !(bound >= 0.0) || !bound.is_finite() {
        return Err(AssemblyError::NegativeFrictionBound { value: bound });
    }
    if upper_layer.index != pairing.upper_layer {
        return Err(AssemblyError::PairingLayerMismatch {
            expected: pairing.upper_layer,
            got: upper_layer.index,
        });
    }
    let mut node_area = vec![0.0; upper_layer.n_nodes()];
    for tri in &upper_layer.boundary {
        if tri.tag != BoundaryTag::InterfaceUpper(pairing.upper_layer) {
            continue;
        }
        let area = triangle_area(
            upper_layer.coords[tri.nodes[0]],
            upper_layer.coords[tri.nodes[1]],
            upper_layer.coords[tri.nodes[2]],
        );
        for &n in &tri.nodes {
            node_area[n] += area / 3.0;
        }
    }
    Ok(pairing
        .upper_nodes
        .iter()
        .map(|&n| bound * node_area[n])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_layered_box_mesh, StackGeometry};
    use approx::assert_relative_eq;

    fn unit_cube() -> LayerMesh {
        let geometry = StackGeometry {
            extent_x: 1.0,
            extent_y: 1.0,
            z_levels: vec![1.0, 0.0],
        };
        build_layered_box_mesh(&geometry, 1.0)
            .unwrap()
            .layers
            .remove(0)
    }

    #[test]
    fn lame_parameters_match_hand_values() {
        let cases = [
            (5000.0, 0.25, 2000.0, 2000.0),
            (2000.0, 0.25, 800.0, 800.0),
            (200.0, 0.4, 2000.0 / 7.0, 500.0 / 7.0),
        ];
        for (e, nu, lambda, mu) in cases {
            let m = Material::new(e, nu).unwrap();
            let p = m.lame_parameters();
            assert_relative_eq!(p.lambda, lambda, max_relative = 1e-14);
            assert_relative_eq!(p.mu, mu, max_relative = 1e-14);
        }
    }

    #[test]
    fn material_validation() {
        assert!(matches!(
            Material::new(-1.0, 0.3).unwrap_err(),
            AssemblyError::InvalidModulus { .. }
        ));
        assert!(matches!(
            Material::new(1.0, 0.5).unwrap_err(),
            AssemblyError::PoissonOutOfRange { .. }
        ));
        assert!(matches!(
            Material::new(1.0, -0.1).unwrap_err(),
            AssemblyError::PoissonOutOfRange { .. }
        ));
        // ν = 0 is admissible (it appears in closed-form checks).
        assert!(Material::new(1.0, 0.0).is_ok());
    }

    #[test]
    fn stiffness_is_symmetric_with_rigid_kernel() {
        let mesh = unit_cube();
        let material = Material::new(5000.0, 0.25).unwrap();
        let k = assemble_stiffness(&mesh, &material);
        assert!(k.is_symmetric(1e-13));

        let n = mesh.n_nodes();
        let scale = k.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));

        // Rigid translation: exactly in the kernel up to rounding.
        for d in 0..3 {
            let mut u = vec![0.0; 3 * n];
            for node in 0..n {
                u[3 * node + d] = 1.0;
            }
            let r = k.apply(&u);
            let max = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            assert!(max <= 1e-10 * scale, "translation residual {max}");
        }

        // Infinitesimal rotation about z: a linear field with antisymmetric
        // gradient, so P1 captures it exactly and it is strain-free.
        let mut u = vec![0.0; 3 * n];
        for (node, p) in mesh.coords.iter().enumerate() {
            u[3 * node] = -p[1];
            u[3 * node + 1] = p[0];
        }
        let r = k.apply(&u);
        let max = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(max <= 1e-8 * scale, "rotation residual {max}");
    }

    #[test]
    fn stiffness_energy_of_uniaxial_stretch() {
        // E = 1, ν = 0 → λ = 0, μ = 1/2. For u = (x, 0, 0) on the unit cube
        // the strain energy density is 2μ·ε₁₁² = 1, so uᵀKu = volume = 1 and
        // the quadratic energy ½uᵀKu = 0.5.
        let mesh = unit_cube();
        let material = Material::new(1.0, 0.0).unwrap();
        let k = assemble_stiffness(&mesh, &material);
        let mut u = vec![0.0; 3 * mesh.n_nodes()];
        for (node, p) in mesh.coords.iter().enumerate() {
            u[3 * node] = p[0];
        }
        let a_uu = k.quadratic_form(&u);
        assert_relative_eq!(a_uu, 1.0, max_relative = 1e-12);
        assert_relative_eq!(0.5 * a_uu, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn galerkin_energy_is_exact_for_linear_fields() {
        // For affine u = B·x the element strains are constant, so the
        // assembled energy must equal the closed-form continuum value
        // vol·(λ tr(Bu)tr(Bv) + 2μ sym(Bu):sym(Bv)).
        let geometry = StackGeometry {
            extent_x: 1.5,
            extent_y: 0.8,
            z_levels: vec![0.9, 0.0],
        };
        let mesh = build_layered_box_mesh(&geometry, 0.4).unwrap().layers.remove(0);
        let material = Material::new(200.0, 0.4).unwrap();
        let LameParameters { lambda, mu } = material.lame_parameters();
        let k = assemble_stiffness(&mesh, &material);
        let vol = 1.5 * 0.8 * 0.9;

        let bu = [[0.3, -0.2, 0.5], [0.1, 0.7, -0.4], [0.0, 0.25, -0.6]];
        let bv = [[-0.5, 0.05, 0.3], [0.45, -0.15, 0.2], [0.6, -0.3, 0.1]];
        let field = |b: &[[f64; 3]; 3]| -> Vec<f64> {
            let mut u = vec![0.0; 3 * mesh.n_nodes()];
            for (node, p) in mesh.coords.iter().enumerate() {
                for d in 0..3 {
                    u[3 * node + d] = b[d][0] * p[0] + b[d][1] * p[1] + b[d][2] * p[2];
                }
            }
            u
        };
        let trace = |b: &[[f64; 3]; 3]| b[0][0] + b[1][1] + b[2][2];
        let mut sym_dot = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                sym_dot += 0.25 * (bu[i][j] + bu[j][i]) * (bv[i][j] + bv[j][i]);
            }
        }
        let expected = vol * (lambda * trace(&bu) * trace(&bv) + 2.0 * mu * sym_dot);

        let u = field(&bu);
        let v = field(&bv);
        let ku = k.apply(&u);
        let got: f64 = ku.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        assert_relative_eq!(got, expected, max_relative = 1e-11);
    }

    #[test]
    fn body_load_sums_to_total_force() {
        let mesh = unit_cube();
        let load = assemble_body_load(&mesh, [0.0, 0.0, -0.05]);
        let total_z: f64 = load.iter().skip(2).step_by(3).sum();
        assert_relative_eq!(total_z, -0.05, max_relative = 1e-13);
        let total_x: f64 = load.iter().step_by(3).sum();
        assert!(total_x.abs() < 1e-15);
    }

    fn paper_top_layer() -> LayerMesh {
        let geometry = StackGeometry {
            extent_x: 3.0,
            extent_y: 6.0,
            z_levels: vec![2.3, 1.9],
        };
        build_layered_box_mesh(&geometry, 0.3)
            .unwrap()
            .layers
            .remove(0)
    }

    #[test]
    fn traction_over_full_face_sums_to_area_times_traction() {
        let mesh = paper_top_layer();
        let patch = SurfacePatch {
            x_min: -1.0,
            x_max: 4.0,
            y_min: -1.0,
            y_max: 7.0,
        };
        let result = assemble_traction_load(&mesh, &patch, [0.0, 0.0, -1.0]).unwrap();
        let total_z: f64 = result.load.iter().skip(2).step_by(3).sum();
        assert_relative_eq!(total_z, -18.0, max_relative = 1e-12);
        assert_relative_eq!(result.covered_area, 18.0, max_relative = 1e-12);
    }

    #[test]
    fn traction_patch_integrates_exactly() {
        // Patch edges fall inside elements; the clipped integral must still
        // equal traction × patch area.
        let mesh = paper_top_layer();
        let patch = SurfacePatch {
            x_min: 1.34,
            x_max: 1.66,
            y_min: 2.84,
            y_max: 3.16,
        };
        let result = assemble_traction_load(&mesh, &patch, [0.0, 0.0, -22.5]).unwrap();
        let total_z: f64 = result.load.iter().skip(2).step_by(3).sum();
        assert_relative_eq!(total_z, -2.304, max_relative = 1e-12);
        assert_relative_eq!(result.covered_area, 0.32 * 0.32, max_relative = 1e-12);
        assert_relative_eq!(result.covered_area, result.patch_area, max_relative = 1e-12);
    }

    #[test]
    fn traction_patch_outside_surface_reports_zero_coverage() {
        let mesh = paper_top_layer();
        let patch = SurfacePatch {
            x_min: 5.0,
            x_max: 6.0,
            y_min: 0.0,
            y_max: 1.0,
        };
        let result = assemble_traction_load(&mesh, &patch, [0.0, 0.0, -1.0]).unwrap();
        assert_eq!(result.covered_area, 0.0);
        assert!(result.load.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn friction_weights_sum_to_bound_times_area()  {
        let geometry = StackGeometry {
            extent_x: 3.0,
            extent_y: 6.0,
            z_levels: vec![2.3, 1.9, 1.2],
        };
        let mesh = build_layered_box_mesh(&geometry, 0.3).unwrap();
        for (bound, expected) in [(0.2, 3.6), (0.05, 0.9)] {
            let w = friction_weights(&mesh.layers[0], &mesh.interfaces[0], bound).unwrap();
            let total: f64 = w.iter().sum();
            assert_relative_eq!(total, expected, max_relative = 1e-12);
            assert!(w.iter().all(|&x| x > 0.0));
        }
        assert!(matches!(
            friction_weights(&mesh.layers[0], &mesh.interfaces[0], -0.1).unwrap_err(),
            AssemblyError::NegativeFrictionBound { .. }
        ));
    }
}
