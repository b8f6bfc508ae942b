//! Cross-checks of the contact solvers against the dense forward-backward
//! reference from the test-support crate. The two routes share no code: the
//! production side is nodal Gauss–Seidel with a closed-form prox, the
//! reference is accelerated projected proximal-gradient on the dense matrix.

use layerstack_core::mesh::{build_layered_box_mesh, triangle_area, BoundaryTag, StackGeometry};
use layerstack_core::{
    assemble_body_load, assemble_stiffness, assemble_traction_load, certify_monolithic,
    certify_subproblem, friction_weights, nodal_prox, solve_monolithic, solve_subproblem,
    CertifyOptions, ContactNode, Material, PairSpec, SparseSpd, SurfacePatch, SweepOptions,
};
use layerstack_testkit::{
    solve_contact_dense, AnchoredContact, ContactProblem, DenseMatrix, FbOptions, PairCoupling,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tolerance for field agreement between the two routes, relative to the
/// field magnitude. Both solvers run well below this, so it detects real
/// divergence (wrong active set, wrong prox case), not noise.
const CROSS_CHECK_REL: f64 = 1e-6;

fn to_dense(a: &SparseSpd) -> DenseMatrix {
    let mut dense = DenseMatrix::zeros(a.dim());
    for i in 0..a.dim() {
        for (j, v) in a.row(i) {
            dense.set(i, j, v);
        }
    }
    dense
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[test]
fn nodal_prox_matches_dense_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..30 {
        let m: [[f64; 3]; 3] =
            std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
        let mut d = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    d[i][j] += m[k][i] * m[k][j];
                }
            }
            d[i][i] += 0.5;
        }
        let c: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-4.0..4.0));
        let weight = if trial % 4 == 0 {
            0.0
        } else {
            rng.gen_range(0.0..2.5)
        };
        let anchor = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
        let gap = rng.gen_range(-1.5..1.5);

        let v = nodal_prox(&d, c, weight, anchor, gap);

        let mut stiffness = DenseMatrix::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                stiffness.set(i, j, d[i][j]);
            }
        }
        let reference = solve_contact_dense(
            &ContactProblem {
                stiffness,
                load: c.to_vec(),
                fixed: vec![],
                anchored: vec![AnchoredContact {
                    dof: 0,
                    weight,
                    anchor,
                    gap,
                }],
                pairs: vec![],
            },
            &FbOptions::default(),
        );
        let scale = max_abs(&reference.v).max(1.0);
        for k in 0..3 {
            assert!(
                (v[k] - reference.v[k]).abs() <= CROSS_CHECK_REL * scale,
                "trial {trial} component {k}: {} vs {}",
                v[k],
                reference.v[k]
            );
        }
    }
}

/// One-layer contact boxes used by the subproblem tests: lateral walls
/// pinned, bottom face in frictional contact with frozen opposing data, top
/// loaded downward with a tangential component.
struct LayerFixture {
    stiffness: SparseSpd,
    load: Vec<f64>,
    dirichlet: Vec<(usize, f64)>,
    contact: Vec<ContactNode>,
}

fn layer_fixture(friction_bound: f64) -> LayerFixture {
    let geometry = StackGeometry {
        extent_x: 1.0,
        extent_y: 1.0,
        z_levels: vec![1.0, 0.0],
    };
    let mesh = build_layered_box_mesh(&geometry, 0.25).unwrap();
    let layer = &mesh.layers[0];
    let material = Material::new(50.0, 0.25).unwrap();
    let stiffness = assemble_stiffness(layer, &material);

    let mut load = assemble_body_load(layer, [0.5, 0.2, -1.0]);
    let patch = SurfacePatch {
        x_min: 0.2,
        x_max: 0.8,
        y_min: 0.2,
        y_max: 0.8,
    };
    let traction = assemble_traction_load(layer, &patch, [0.8, -0.5, -3.0]).unwrap();
    for (l, t) in load.iter_mut().zip(traction.load.iter()) {
        *l += t;
    }

    let mut dirichlet = Vec::new();
    for node in 0..layer.n_nodes() {
        if layer.lateral[node] {
            for d in 0..3 {
                dirichlet.push((3 * node + d, 0.0));
            }
        }
    }

    // Lumped areas of the bottom face, then contact data on its free nodes.
    let mut node_area = vec![0.0; layer.n_nodes()];
    for tri in &layer.boundary {
        if tri.tag != BoundaryTag::Base {
            continue;
        }
        let area = triangle_area(
            layer.coords[tri.nodes[0]],
            layer.coords[tri.nodes[1]],
            layer.coords[tri.nodes[2]],
        );
        for &n in &tri.nodes {
            node_area[n] += area / 3.0;
        }
    }
    let mut contact = Vec::new();
    for node in 0..layer.n_nodes() {
        let g = layer.grid_of(node);
        if g[2] != 0 || layer.lateral[node] {
            continue;
        }
        let p = layer.coords[node];
        contact.push(ContactNode {
            node,
            weight: friction_bound * node_area[node],
            anchor: [0.02 * (p[0] - 0.5), -0.015 * p[1]],
            gap: 0.01 * (p[0] - 0.5),
        });
    }
    assert_eq!(contact.len(), 9);
    LayerFixture {
        stiffness,
        load,
        dirichlet,
        contact,
    }
}

#[test]
fn subproblem_matches_dense_reference() {
    for friction_bound in [0.0, 2.0] {
        let fx = layer_fixture(friction_bound);
        let options = SweepOptions {
            tol_sub: 1e-11,
            ..Default::default()
        };
        let solution = solve_subproblem(
            &fx.stiffness,
            &fx.load,
            &fx.dirichlet,
            &fx.contact,
            None,
            &options,
        )
        .unwrap();
        assert!(solution.kkt_residual <= 1e-11 * solution.force_scale);

        // Exact feasibility, bit for bit.
        for c in &fx.contact {
            assert!(solution.u[3 * c.node + 2] >= c.gap);
        }

        let reference = solve_contact_dense(
            &ContactProblem {
                stiffness: to_dense(&fx.stiffness),
                load: fx.load.clone(),
                fixed: fx.dirichlet.clone(),
                anchored: fx
                    .contact
                    .iter()
                    .map(|c| AnchoredContact {
                        dof: 3 * c.node,
                        weight: c.weight,
                        anchor: c.anchor,
                        gap: c.gap,
                    })
                    .collect(),
                pairs: vec![],
            },
            &FbOptions::default(),
        );
        let scale = max_abs(&reference.v);
        for (i, (a, b)) in solution.u.iter().zip(reference.v.iter()).enumerate() {
            assert!(
                (a - b).abs() <= CROSS_CHECK_REL * scale,
                "g={friction_bound}, dof {i}: {a} vs {b}"
            );
        }

        let certificate = certify_subproblem(
            &fx.stiffness,
            &fx.load,
            &fx.dirichlet,
            &fx.contact,
            &solution.u,
            &CertifyOptions::default(),
        );
        assert!(
            certificate >= -1e-9,
            "g={friction_bound}: certificate {certificate}"
        );
    }
}

#[test]
fn subproblem_solution_satisfies_friction_complementarity() {
    let fx = layer_fixture(2.0);
    let options = SweepOptions {
        tol_sub: 1e-11,
        ..Default::default()
    };
    let solution = solve_subproblem(
        &fx.stiffness,
        &fx.load,
        &fx.dirichlet,
        &fx.contact,
        None,
        &options,
    )
    .unwrap();
    let residual: Vec<f64> = {
        let ku = fx.stiffness.apply(&solution.u);
        fx.load.iter().zip(ku.iter()).map(|(b, k)| b - k).collect()
    };
    let scale = solution.force_scale;
    let mut stick_count = 0;
    let mut slip_count = 0;
    for c in &fx.contact {
        let base = 3 * c.node;
        let t = [
            solution.u[base] - c.anchor[0],
            solution.u[base + 1] - c.anchor[1],
        ];
        let t_norm = (t[0] * t[0] + t[1] * t[1]).sqrt();
        let r_t = [residual[base], residual[base + 1]];
        let r_norm = (r_t[0] * r_t[0] + r_t[1] * r_t[1]).sqrt();
        if t_norm > 1e-10 {
            slip_count += 1;
            // Sliding: the tangential reaction sits on the ball boundary,
            // anti-parallel to no, parallel to the slip direction.
            assert!(
                (r_t[0] - c.weight * t[0] / t_norm).abs() <= 1e-9 * scale
                    && (r_t[1] - c.weight * t[1] / t_norm).abs() <= 1e-9 * scale,
                "slip node {} reaction off the cone", c.node
            );
        } else {
            stick_count += 1;
            assert!(r_norm <= c.weight + 1e-9 * scale);
        }
    }
    // The fixture is tuned so both regimes actually occur.
    assert!(slip_count > 0, "no slipping nodes; fixture too stiff");
    assert!(stick_count + slip_count == 9);
}

/// Two stacked layers, soft on stiff, loaded by an off-centre inclined patch:
/// the coupled Gauss–Seidel must agree with the dense pair-coupled reference.
#[test]
fn monolithic_matches_dense_reference() {
    let geometry = StackGeometry {
        extent_x: 2.0,
        extent_y: 2.0,
        z_levels: vec![2.0, 1.0, 0.0],
    };
    let mesh = build_layered_box_mesh(&geometry, 0.5).unwrap();
    let materials = [
        Material::new(50.0, 0.25).unwrap(),
        Material::new(5.0, 0.3).unwrap(),
    ];

    let mut offsets = Vec::new();
    let mut total = 0;
    for layer in &mesh.layers {
        offsets.push(total);
        total += 3 * layer.n_nodes();
    }

    let mut triplets = Vec::new();
    let mut load = vec![0.0; total];
    let mut dirichlet = Vec::new();
    for (k, layer) in mesh.layers.iter().enumerate() {
        let stiff = assemble_stiffness(layer, &materials[k]);
        for i in 0..stiff.dim() {
            for (j, v) in stiff.row(i) {
                triplets.push((offsets[k] + i, offsets[k] + j, v));
            }
        }
        let body = assemble_body_load(layer, [0.0, 0.1, -0.4]);
        for (i, b) in body.iter().enumerate() {
            load[offsets[k] + i] += b;
        }
        for node in 0..layer.n_nodes() {
            let pin_base = k + 1 == mesh.layers.len() && layer.grid_of(node)[2] == 0;
            if layer.lateral[node] || pin_base {
                for d in 0..3 {
                    dirichlet.push((offsets[k] + 3 * node + d, 0.0));
                }
            }
        }
    }
    let patch = SurfacePatch {
        x_min: 0.6,
        x_max: 1.4,
        y_min: 0.6,
        y_max: 1.4,
    };
    let traction = assemble_traction_load(&mesh.layers[0], &patch, [0.3, -0.2, -2.0]).unwrap();
    for (i, t) in traction.load.iter().enumerate() {
        load[offsets[0] + i] += t;
    }
    let stiffness = SparseSpd::from_triplets(total, triplets);

    let pairing = &mesh.interfaces[0];
    let weights = friction_weights(&mesh.layers[0], pairing, 0.15).unwrap();
    let mut pairs = Vec::new();
    for q in 0..pairing.len() {
        if pairing.pinned[q] {
            continue;
        }
        pairs.push(PairSpec {
            upper_dof: offsets[0] + 3 * pairing.upper_nodes[q],
            lower_dof: offsets[1] + 3 * pairing.lower_nodes[q],
            weight: weights[q],
        });
    }
    assert_eq!(pairs.len(), 9);

    let options = SweepOptions {
        tol_sub: 1e-11,
        ..Default::default()
    };
    let solution = solve_monolithic(&stiffness, &load, &dirichlet, &pairs, None, &options).unwrap();

    // Interface feasibility is exact.
    for p in &pairs {
        assert!(solution.u[p.upper_dof + 2] >= solution.u[p.lower_dof + 2]);
    }

    let reference = solve_contact_dense(
        &ContactProblem {
            stiffness: to_dense(&stiffness),
            load: load.clone(),
            fixed: dirichlet.clone(),
            anchored: vec![],
            pairs: pairs
                .iter()
                .map(|p| PairCoupling {
                    upper_dof: p.upper_dof,
                    lower_dof: p.lower_dof,
                    weight: p.weight,
                })
                .collect(),
        },
        &FbOptions::default(),
    );
    let scale = max_abs(&reference.v);
    for (i, (a, b)) in solution.u.iter().zip(reference.v.iter()).enumerate() {
        assert!(
            (a - b).abs() <= CROSS_CHECK_REL * scale,
            "dof {i}: {a} vs {b}"
        );
    }
    // Objectives agree to the same depth (constant-free comparison).
    assert!(
        (solution.objective - reference.objective).abs()
            <= 1e-8 * reference.objective.abs().max(1.0)
    );

    let certificate = certify_monolithic(
        &stiffness,
        &load,
        &dirichlet,
        &pairs,
        &solution.u,
        &CertifyOptions::default(),
    );
    assert!(certificate >= -1e-9, "certificate {certificate}");
}

#[test]
fn monolithic_zero_load_is_identically_zero() {
    let geometry = StackGeometry {
        extent_x: 1.0,
        extent_y: 1.0,
        z_levels: vec![2.0, 1.0, 0.0],
    };
    let mesh = build_layered_box_mesh(&geometry, 0.5).unwrap();
    let material = Material::new(10.0, 0.2).unwrap();
    let mut offsets = Vec::new();
    let mut total = 0;
    for layer in &mesh.layers {
        offsets.push(total);
        total += 3 * layer.n_nodes();
    }
    let mut triplets = Vec::new();
    let mut dirichlet = Vec::new();
    for (k, layer) in mesh.layers.iter().enumerate() {
        let stiff = assemble_stiffness(layer, &material);
        for i in 0..stiff.dim() {
            for (j, v) in stiff.row(i) {
                triplets.push((offsets[k] + i, offsets[k] + j, v));
            }
        }
        for node in 0..layer.n_nodes() {
            let pin_base = k + 1 == mesh.layers.len() && layer.grid_of(node)[2] == 0;
            if layer.lateral[node] || pin_base {
                for d in 0..3 {
                    dirichlet.push((offsets[k] + 3 * node + d, 0.0));
                }
            }
        }
    }
    let stiffness = SparseSpd::from_triplets(total, triplets);
    let pairing = &mesh.interfaces[0];
    let weights = friction_weights(&mesh.layers[0], pairing, 0.1).unwrap();
    let pairs: Vec<PairSpec> = (0..pairing.len())
        .filter(|&q| !pairing.pinned[q])
        .map(|q| PairSpec {
            upper_dof: offsets[0] + 3 * pairing.upper_nodes[q],
            lower_dof: offsets[1] + 3 * pairing.lower_nodes[q],
            weight: weights[q],
        })
        .collect();
    let load = vec![0.0; total];
    let solution =
        solve_monolithic(&stiffness, &load, &dirichlet, &pairs, None, &SweepOptions::default())
            .unwrap();
    assert_eq!(solution.sweeps, 0);
    assert!(solution.u.iter().all(|&v| v == 0.0));
}

#[test]
fn certificate_flags_a_corrupted_state() {
    let fx = layer_fixture(2.0);
    let options = SweepOptions {
        tol_sub: 1e-11,
        ..Default::default()
    };
    let solution = solve_subproblem(
        &fx.stiffness,
        &fx.load,
        &fx.dirichlet,
        &fx.contact,
        None,
        &options,
    )
    .unwrap();

    // The converged state certifies at its own tolerance: termination bounds
    // every per-node residual, which bounds the normalized gap from below.
    let good = certify_subproblem(
        &fx.stiffness,
        &fx.load,
        &fx.dirichlet,
        &fx.contact,
        &solution.u,
        &CertifyOptions::default(),
    );
    assert!(good >= -1e-10, "converged certificate {good}");

    // Push one contact node tangentially off the solution; the single-DOF
    // descent probe sees the unbalanced force undiluted, so the certificate
    // must come out clearly negative.
    let mut corrupted = solution.u.clone();
    corrupted[3 * fx.contact[4].node] += 0.1 * max_abs(&solution.u);
    let bad = certify_subproblem(
        &fx.stiffness,
        &fx.load,
        &fx.dirichlet,
        &fx.contact,
        &corrupted,
        &CertifyOptions::default(),
    );
    assert!(bad <= -1e-4, "corrupted certificate {bad} is not clearly negative");
}
