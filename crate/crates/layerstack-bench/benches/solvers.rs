//! Benchmarks for the hot paths of the layered contact solver: mesh and
//! stiffness assembly, the inner conjugate-gradient solve, the closed-form
//! local contact solve, one constrained layer subproblem, and a small
//! end-to-end decomposition run.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use layerstack_core::{
    apply_dirichlet, assemble_stiffness, build_layered_box_mesh, default_cg_cap, ld_run,
    nodal_prox, solve_spd, solve_subproblem, ContactNode, LdConfig, Material, StackGeometry,
    StackProblem, StackSystem, SurfacePatch, SweepOptions,
};

fn geometry() -> StackGeometry {
    StackGeometry {
        extent_x: 3.0,
        extent_y: 6.0,
        z_levels: vec![2.3, 1.9, 1.2],
    }
}

fn problem(h: f64) -> StackProblem {
    StackProblem {
        geometry: geometry(),
        h,
        materials: vec![
            Material::new(5.0e3, 0.25).unwrap(),
            Material::new(2.0e3, 0.25).unwrap(),
        ],
        friction_bounds: vec![0.2],
        body_force: [0.0, 0.0, -0.05],
        surface_load: Some((
            SurfacePatch {
                x_min: 1.34,
                x_max: 1.66,
                y_min: 2.84,
                y_max: 3.16,
            },
            [0.0, 0.0, -22.5],
        )),
    }
}

fn bench_assembly(c: &mut Criterion) {
    let geometry = geometry();
    let material = Material::new(5.0e3, 0.25).unwrap();
    let mesh = build_layered_box_mesh(&geometry, 0.3).unwrap();
    let layer = &mesh.layers[0];
    c.bench_function("assemble_stiffness_460_nodes", |b| {
        b.iter(|| black_box(assemble_stiffness(black_box(layer), &material)))
    });
}

fn bench_linear_solve(c: &mut Criterion) {
    let system = StackSystem::build(&problem(0.3)).unwrap();
    let layer = &system.layers[0];
    let reduced = apply_dirichlet(&layer.stiffness, &layer.load, &layer.fixed).unwrap();
    let cap = default_cg_cap(reduced.free_dim());
    c.bench_function("cg_solve_wall_pinned_layer", |b| {
        b.iter(|| {
            black_box(
                solve_spd(&reduced.matrix, &reduced.rhs, None, 1e-8, cap)
                    .unwrap()
                    .iterations,
            )
        })
    });
}

fn bench_local_prox(c: &mut Criterion) {
    // One instance per contact regime: free, stick, slip, and bound-active
    // variants, with and without off-diagonal coupling.
    let cases: Vec<([[f64; 3]; 3], [f64; 3], f64, [f64; 2], f64)> = vec![
        (
            [[2.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 4.0]],
            [2.0, -3.0, 8.0],
            0.0,
            [0.0, 0.0],
            -10.0,
        ),
        (
            [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]],
            [0.2, -0.1, -3.0],
            1.0,
            [0.0, 0.0],
            -2.0,
        ),
        (
            [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]],
            [3.2, 0.2, -4.0],
            1.0,
            [0.1, 0.1],
            -5.0,
        ),
        (
            [[4.0, 1.0, 0.5], [1.0, 3.0, 0.25], [0.5, 0.25, 2.0]],
            [1.05, 0.03, 1.275],
            0.1,
            [0.2, -0.1],
            0.0,
        ),
        (
            [[2.0, 0.0, 0.3], [0.0, 2.0, -0.1], [0.3, -0.1, 1.5]],
            [0.94, 0.82, 0.0],
            0.2,
            [0.05, -0.05],
            0.4,
        ),
    ];
    c.bench_function("nodal_prox_five_regimes", |b| {
        b.iter(|| {
            for (d, cc, w, a, g) in &cases {
                black_box(nodal_prox(
                    black_box(d),
                    black_box(*cc),
                    black_box(*w),
                    black_box(*a),
                    black_box(*g),
                ));
            }
        })
    });
}

fn bench_subproblem(c: &mut Criterion) {
    let system = StackSystem::build(&problem(0.5)).unwrap();
    let layer = &system.layers[0];
    let pairing = &system.mesh.interfaces[0];
    let weights = &system.interfaces[0].weights;
    let contact: Vec<ContactNode> = (0..pairing.len())
        .filter(|&row| !pairing.pinned[row])
        .map(|row| ContactNode {
            node: pairing.upper_nodes[row],
            weight: weights[row],
            anchor: [0.0, 0.0],
            gap: 0.0,
        })
        .collect();
    let options = SweepOptions::default();
    c.bench_function("layer_subproblem_cold", |b| {
        b.iter(|| {
            black_box(
                solve_subproblem(
                    &layer.stiffness,
                    &layer.load,
                    &layer.fixed,
                    &contact,
                    None,
                    &options,
                )
                .unwrap()
                .sweeps,
            )
        })
    });
}

fn bench_decomposition(c: &mut Criterion) {
    let system = StackSystem::build(&problem(0.75)).unwrap();
    let config = LdConfig {
        tol: 1e-3,
        ..LdConfig::default()
    };
    let mut group = c.benchmark_group("decomposition");
    group.sample_size(10);
    group.bench_function("two_layer_coarse_tol_1e-3", |b| {
        b.iter(|| black_box(ld_run(&system, &config).unwrap().iterations))
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_assembly,
    bench_linear_solve,
    bench_local_prox,
    bench_subproblem,
    bench_decomposition
);
criterion_main!(benches);
