//! Layer decomposition of the coupled multi-layer contact problem.
//!
//! The coupled stack problem is split into per-layer subproblems glued by
//! interface trace variables λ, one 3-vector per interface node pair. Each
//! iteration (1) solves every layer against the frozen traces — the top
//! layer sees frictional contact against λ below it, middle layers
//! additionally carry λ from above as Dirichlet data, the bottom layer is
//! linear — then (2) measures the interface traction imbalance of the two
//! sides and (3) relaxes λ by θ times the displacement response of the two
//! neighbouring layers to that imbalance. The traction imbalance vanishes
//! exactly at solutions of the coupled problem, which makes those the fixed
//! points of the scheme.
//!
//! The module also carries the glue shared by the decomposition and the
//! monolithic reference route: assembled per-layer systems, the stacked
//! global problem, energies, discrete trace extensions, and stick/slip
//! classification of converged interfaces.

use crate::assembly::{
    assemble_body_load, assemble_stiffness, assemble_traction_load, friction_weights,
    AssemblyError, Material, SurfacePatch,
};
use crate::mesh::{build_layered_box_mesh, MeshError, MultiLayerMesh, StackGeometry};
use crate::sparse::{apply_dirichlet, default_cg_cap, solve_spd, LsolveError, SparseSpd};
use crate::vi::{
    certify_subproblem, solve_monolithic, solve_subproblem, CertifyOptions, ContactNode,
    MonolithicSolution, PairSpec, SweepOptions, ViError,
};
use rayon::prelude::*;
use thiserror::Error;

/// Full description of a stack problem, independent of file formats.
#[derive(Debug, Clone)]
pub struct StackProblem {
    pub geometry: StackGeometry,
    /// Target mesh step.
    pub h: f64,
    /// One material per layer, top first.
    pub materials: Vec<Material>,
    /// One friction bound per interface (layer count − 1).
    pub friction_bounds: Vec<f64>,
    /// Body force density applied to every layer.
    pub body_force: [f64; 3],
    /// Optional surface traction on the top surface.
    pub surface_load: Option<(SurfacePatch, [f64; 3])>,
}

/// Errors from building a [`StackSystem`].
#[derive(Debug, Error)]
pub enum StackError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("{expected} layers need {expected} materials, got {got}")]
    MaterialCount { expected: usize, got: usize },
    #[error("wrong number of friction bounds for {layers} layers: got {got}")]
    FrictionCount { layers: usize, got: usize },
}

/// Assembled operators of one layer.
#[derive(Debug, Clone)]
pub struct LayerSystem {
    pub stiffness: SparseSpd,
    /// Body plus surface load of this layer.
    pub load: Vec<f64>,
    /// Pins common to every solve of this layer: the lateral walls, plus the
    /// base for the bottom layer. All values are zero.
    pub fixed: Vec<(usize, f64)>,
}

/// Per-interface data shared by both solution routes.
#[derive(Debug, Clone)]
pub struct InterfaceSystem {
    /// Lumped friction weight per pairing row (bound × nodal area).
    pub weights: Vec<f64>,
    /// Lumped nodal area per pairing row (for area fractions and means).
    pub areas: Vec<f64>,
}

/// The meshed and assembled stack.
#[derive(Debug, Clone)]
pub struct StackSystem {
    pub problem: StackProblem,
    pub mesh: MultiLayerMesh,
    pub layers: Vec<LayerSystem>,
    pub interfaces: Vec<InterfaceSystem>,
}

impl StackSystem {
    pub fn build(problem: &StackProblem) -> Result<Self, StackError> {
        let n = problem.geometry.n_layers();
        if problem.materials.len() != n {
            return Err(StackError::MaterialCount {
                expected: n,
                got: problem.materials.len(),
            });
        }
        if n > 0 && problem.friction_bounds.len() != n - 1 {
            return Err(StackError::FrictionCount {
                layers: n,
                got: problem.friction_bounds.len(),
            });
        }
        let mesh = build_layered_box_mesh(&problem.geometry, problem.h)?;

        let mut layers = Vec::with_capacity(n);
        for (k, layer) in mesh.layers.iter().enumerate() {
            let stiffness = assemble_stiffness(layer, &problem.materials[k]);
            let mut load = assemble_body_load(layer, problem.body_force);
            if k == 0 {
                if let Some((patch, traction)) = &problem.surface_load {
                    let t = assemble_traction_load(layer, patch, *traction)?;
                    for (l, v) in load.iter_mut().zip(t.load.iter()) {
                        *l += v;
                    }
                }
            }
            let mut fixed = Vec::new();
            for node in 0..layer.n_nodes() {
                let base_node = k + 1 == n && layer.grid_of(node)[2] == 0;
                if layer.lateral[node] || base_node {
                    for d in 0..3 {
                        fixed.push((3 * node + d, 0.0));
                    }
                }
            }
            layers.push(LayerSystem {
                stiffness,
                load,
                fixed,
            });
        }

        let mut interfaces = Vec::with_capacity(mesh.interfaces.len());
        for (k, pairing) in mesh.interfaces.iter().enumerate() {
            let weights =
                friction_weights(&mesh.layers[k], pairing, problem.friction_bounds[k])?;
            // Raw lumped areas (weights with bound = 1).
            let areas = friction_weights(&mesh.layers[k], pairing, 1.0)?;
            interfaces.push(InterfaceSystem { weights, areas });
        }

        Ok(Self {
            problem: problem.clone(),
            mesh,
            layers,
            interfaces,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Characteristic length of the domain, used for absolute fallbacks.
    pub fn domain_scale(&self) -> f64 {
        let g = &self.mesh.geometry;
        let height = g.z_levels[0] - *g.z_levels.last().unwrap();
        g.extent_x.max(g.extent_y).max(height)
    }

    /// Realized mesh steps per layer ([hx, hy, hz]).
    pub fn realized_steps(&self) -> Vec<[f64; 3]> {
        self.mesh.layers.iter().map(|l| l.realized_steps()).collect()
    }
}

// ---------------------------------------------------------------------------
// Energies
// ---------------------------------------------------------------------------

/// Total objective of the coupled problem at the given per-layer fields:
/// elastic energy minus load work plus the friction dissipation of the
/// actual tangential interface jumps.
pub fn stack_objective(system: &StackSystem, fields: &[Vec<f64>]) -> f64 {
    let mut value = 0.0;
    for (layer, u) in system.layers.iter().zip(fields.iter()) {
        value += 0.5 * layer.stiffness.quadratic_form(u);
        value -= layer
            .load
            .iter()
            .zip(u.iter())
            .map(|(b, x)| b * x)
            .sum::<f64>();
    }
    for (k, pairing) in system.mesh.interfaces.iter().enumerate() {
        let up = &fields[pairing.upper_layer];
        let low = &fields[pairing.lower_layer];
        for row in 0..pairing.len() {
            let ub = 3 * pairing.upper_nodes[row];
            let lb = 3 * pairing.lower_nodes[row];
            let jt = [up[ub] - low[lb], up[ub + 1] - low[lb + 1]];
            value += system.interfaces[k].weights[row] * (jt[0] * jt[0] + jt[1] * jt[1]).sqrt();
        }
    }
    value
}

/// Stack energy norm (1/√2)·√(Σ_i u_iᵀK_i u_i).
pub fn energy_norm(system: &StackSystem, fields: &[Vec<f64>]) -> f64 {
    let sum: f64 = system
        .layers
        .iter()
        .zip(fields.iter())
        .map(|(layer, u)| layer.stiffness.quadratic_form(u).max(0.0))
        .sum();
    (0.5 * sum).sqrt()
}

/// Energy seminorm of a single layer's field.
pub fn layer_energy_seminorm(system: &StackSystem, layer: usize, field: &[f64]) -> f64 {
    (0.5 * system.layers[layer].stiffness.quadratic_form(field).max(0.0)).sqrt()
}

/// Interpolate per-layer fields from one discretization of a stack onto
/// another discretization of the same stack (e.g. onto a finer reference
/// mesh), layer by layer via piecewise-linear evaluation.
pub fn interpolate_stack_fields(
    from: &StackSystem,
    fields: &[Vec<f64>],
    onto: &StackSystem,
) -> Vec<Vec<f64>> {
    assert_eq!(from.n_layers(), onto.n_layers());
    from.mesh
        .layers
        .iter()
        .zip(fields.iter())
        .zip(onto.mesh.layers.iter())
        .map(|((src, u), dst)| {
            let mut out = vec![0.0; 3 * dst.n_nodes()];
            for (node, p) in dst.coords.iter().enumerate() {
                let v = src.interpolate_vector(u, *p);
                out[3 * node] = v[0];
                out[3 * node + 1] = v[1];
                out[3 * node + 2] = v[2];
            }
            out
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Monolithic glue
// ---------------------------------------------------------------------------

/// The stacked global problem: block-diagonal stiffness over all layers plus
/// interface pair couplings.
#[derive(Debug, Clone)]
pub struct MonolithicStack {
    pub stiffness: SparseSpd,
    pub load: Vec<f64>,
    pub dirichlet: Vec<(usize, f64)>,
    pub pairs: Vec<PairSpec>,
    /// Global DOF offset of each layer.
    pub offsets: Vec<usize>,
}

impl StackSystem {
    /// Assemble the monolithic problem over the whole stack.
    pub fn monolithic(&self) -> MonolithicStack {
        let mut offsets = Vec::with_capacity(self.n_layers());
        let mut total = 0;
        for layer in &self.layers {
            offsets.push(total);
            total += layer.stiffness.dim();
        }
        let mut triplets = Vec::new();
        let mut load = vec![0.0; total];
        let mut dirichlet = Vec::new();
        for (k, layer) in self.layers.iter().enumerate() {
            for i in 0..layer.stiffness.dim() {
                for (j, v) in layer.stiffness.row(i) {
                    triplets.push((offsets[k] + i, offsets[k] + j, v));
                }
            }
            for (i, b) in layer.load.iter().enumerate() {
                load[offsets[k] + i] = *b;
            }
            for &(dof, value) in &layer.fixed {
                dirichlet.push((offsets[k] + dof, value));
            }
        }
        let mut pairs = Vec::new();
        for (k, pairing) in self.mesh.interfaces.iter().enumerate() {
            for row in 0..pairing.len() {
                if pairing.pinned[row] {
                    continue;
                }
                pairs.push(PairSpec {
                    upper_dof: offsets[pairing.upper_layer] + 3 * pairing.upper_nodes[row],
                    lower_dof: offsets[pairing.lower_layer] + 3 * pairing.lower_nodes[row],
                    weight: self.interfaces[k].weights[row],
                });
            }
        }
        MonolithicStack {
            stiffness: SparseSpd::from_triplets(total, triplets),
            load,
            dirichlet,
            pairs,
            offsets,
        }
    }
}

impl MonolithicStack {
    /// Split a stacked global field into per-layer fields.
    pub fn split(&self, u: &[f64]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.offsets.len());
        for (k, &off) in self.offsets.iter().enumerate() {
            let end = self
                .offsets
                .get(k + 1)
                .copied()
                .unwrap_or(self.stiffness.dim());
            out.push(u[off..end].to_vec());
        }
        out
    }
}

/// Solve the coupled stack problem monolithically; returns per-layer fields
/// along with the raw solution.
pub fn solve_stack_monolithic(
    system: &StackSystem,
    options: &SweepOptions,
    warm_start: Option<&[f64]>,
) -> Result<(Vec<Vec<f64>>, MonolithicSolution), ViError> {
    let stacked = system.monolithic();
    let solution = solve_monolithic(
        &stacked.stiffness,
        &stacked.load,
        &stacked.dirichlet,
        &stacked.pairs,
        warm_start,
        options,
    )?;
    Ok((stacked.split(&solution.u), solution))
}

// ---------------------------------------------------------------------------
// Trace extension and trace norm
// ---------------------------------------------------------------------------

/// Discrete elastic extension: the field that matches `pinned` (boundary
/// values on the trace set plus zeros on the clamped set) and is discretely
/// harmonic elsewhere (zero interior residual).
pub fn discrete_extension(
    stiffness: &SparseSpd,
    pinned: &[(usize, f64)],
    tol_lin: f64,
) -> Result<Vec<f64>, LsolveError> {
    let zero_rhs = vec![0.0; stiffness.dim()];
    let reduced = apply_dirichlet(stiffness, &zero_rhs, pinned)?;
    let sol = solve_spd(
        &reduced.matrix,
        &reduced.rhs,
        None,
        tol_lin,
        default_cg_cap(reduced.free_dim()),
    )?;
    Ok(reduced.expand(&sol.x))
}

/// Energy trace norm of interface data: the energy norm of its discrete
/// extension, (1/√2)·√(χᵀKχ). Monotone under scaling and minimal among all
/// fields sharing the boundary values.
pub fn trace_norm(
    stiffness: &SparseSpd,
    pinned: &[(usize, f64)],
    tol_lin: f64,
) -> Result<f64, LsolveError> {
    let chi = discrete_extension(stiffness, pinned, tol_lin)?;
    Ok((0.5 * stiffness.quadratic_form(&chi).max(0.0)).sqrt())
}

// ---------------------------------------------------------------------------
// Stick/slip classification
// ---------------------------------------------------------------------------

/// Contact regime of one interface node pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactRegime {
    Stick,
    Slip,
}

/// Classification of one interface at a converged state.
#[derive(Debug, Clone)]
pub struct InterfaceClassification {
    pub regimes: Vec<ContactRegime>,
    /// Area-weighted fraction of the interface that slips.
    pub slip_area_fraction: f64,
    /// Area-weighted mean tangential jump (upper minus lower).
    pub mean_tangential_jump: [f64; 2],
}

/// Classify every interface: a pair slips when its tangential jump exceeds
/// `tol_slip` (defaulted by callers to 1e-8 × domain scale).
pub fn classify_stick_slip(
    system: &StackSystem,
    fields: &[Vec<f64>],
    tol_slip: f64,
) -> Vec<InterfaceClassification> {
    let mut out = Vec::with_capacity(system.mesh.interfaces.len());
    for (k, pairing) in system.mesh.interfaces.iter().enumerate() {
        let up = &fields[pairing.upper_layer];
        let low = &fields[pairing.lower_layer];
        let areas = &system.interfaces[k].areas;
        let mut regimes = Vec::with_capacity(pairing.len());
        let mut slip_area = 0.0;
        let mut total_area = 0.0;
        let mut mean = [0.0; 2];
        for row in 0..pairing.len() {
            let ub = 3 * pairing.upper_nodes[row];
            let lb = 3 * pairing.lower_nodes[row];
            let jump = [up[ub] - low[lb], up[ub + 1] - low[lb + 1]];
            let norm = (jump[0] * jump[0] + jump[1] * jump[1]).sqrt();
            let regime = if norm > tol_slip {
                ContactRegime::Slip
            } else {
                ContactRegime::Stick
            };
            regimes.push(regime);
            total_area += areas[row];
            if regime == ContactRegime::Slip {
                slip_area += areas[row];
            }
            mean[0] += areas[row] * jump[0];
            mean[1] += areas[row] * jump[1];
        }
        let inv = if total_area > 0.0 { 1.0 / total_area } else { 0.0 };
        out.push(InterfaceClassification {
            regimes,
            slip_area_fraction: slip_area * inv,
            mean_tangential_jump: [mean[0] * inv, mean[1] * inv],
        });
    }
    out
}

// ---------------------------------------------------------------------------
// The decomposition driver
// ---------------------------------------------------------------------------

/// Interface trace state: one 3-vector per pairing row per interface. Rows
/// on the lateral closure stay identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceState {
    pub values: Vec<Vec<[f64; 3]>>,
}

impl InterfaceState {
    pub fn zeros(system: &StackSystem) -> Self {
        Self {
            values: system
                .mesh
                .interfaces
                .iter()
                .map(|p| vec![[0.0; 3]; p.len()])
                .collect(),
        }
    }

    /// Traces of per-layer fields on the lower side of each interface (the
    /// natural λ at a coupled solution).
    pub fn from_lower_traces(system: &StackSystem, fields: &[Vec<f64>]) -> Self {
        let values = system
            .mesh
            .interfaces
            .iter()
            .map(|pairing| {
                let low = &fields[pairing.lower_layer];
                (0..pairing.len())
                    .map(|row| {
                        let lb = 3 * pairing.lower_nodes[row];
                        [low[lb], low[lb + 1], low[lb + 2]]
                    })
                    .collect()
            })
            .collect();
        Self { values }
    }
}

/// One trace-relaxation step: λ′ = λ − θ(p + q).
pub fn relaxed_trace(lambda: [f64; 3], p: [f64; 3], q: [f64; 3], theta: f64) -> [f64; 3] {
    [
        lambda[0] - theta * (p[0] + q[0]),
        lambda[1] - theta * (p[1] + q[1]),
        lambda[2] - theta * (p[2] + q[2]),
    ]
}

/// Parameters of the decomposition loop.
#[derive(Debug, Clone)]
pub struct LdConfig {
    /// Trace relaxation factor.
    pub theta: f64,
    /// Relative trace-change stopping tolerance.
    pub tol: f64,
    pub max_iters: usize,
    /// Inner solver tolerances and budgets.
    pub sweep: SweepOptions,
    /// Solve layers (and interface auxiliaries) in parallel. Results are
    /// identical to the serial order — the solves are independent.
    pub parallel: bool,
    /// Certify every converged subproblem against the variational
    /// inequality; the minimum certificate is reported in the solution.
    pub certify: bool,
}

impl Default for LdConfig {
    fn default() -> Self {
        Self {
            theta: 0.04,
            tol: 1e-4,
            max_iters: 20_000,
            sweep: SweepOptions::default(),
            parallel: true,
            certify: false,
        }
    }
}

/// Per-iteration convergence record.
#[derive(Debug, Clone)]
pub struct LdIterationRecord {
    pub iteration: usize,
    /// ‖λ_k − λ_{k−1}‖ / ‖λ_k‖ over all interfaces (nodal ℓ²).
    pub rel_change: f64,
    /// Coupled objective at this iteration's fields.
    pub energy: f64,
    /// Trace-change norm per interface.
    pub interface_deltas: Vec<f64>,
    /// Inner sweeps (or CG iterations) per layer.
    pub sweeps: Vec<usize>,
}

/// Converged decomposition state.
#[derive(Debug, Clone)]
pub struct LdSolution {
    pub fields: Vec<Vec<f64>>,
    pub lambda: InterfaceState,
    pub iterations: usize,
    pub history: Vec<LdIterationRecord>,
    /// Accumulated inner sweeps per layer.
    pub total_sweeps: Vec<usize>,
    /// Worst VI certificate seen (only when certification is enabled).
    pub min_certificate: Option<f64>,
}

/// Decomposition failures. Divergence and iteration exhaustion carry the
/// history so callers can report the trajectory.
#[derive(Debug, Error)]
pub enum LdError {
    #[error("trace relaxation diverged at iteration {iteration} (rel change grew {streak} iterations in a row, last {last:.3e})")]
    Diverged {
        iteration: usize,
        streak: usize,
        last: f64,
        history: Vec<LdIterationRecord>,
    },
    #[error(
        "no convergence in {max_iters} iterations (last relative change {last:.3e}, target {tol:.3e})"
    )]
    IterationLimit {
        max_iters: usize,
        last: f64,
        tol: f64,
        history: Vec<LdIterationRecord>,
    },
    #[error("layer {layer} subproblem failed: {source}")]
    Layer { layer: usize, source: ViError },
    #[error("auxiliary solve at interface {interface} failed: {source}")]
    Auxiliary {
        interface: usize,
        source: LsolveError,
    },
}

/// How many consecutive iterations of growing relative change count as
/// divergence. Geometric growth at an unstable θ shows up immediately and
/// keeps growing; transient non-monotonicity of a stable run does not last
/// this long.
const DIVERGENCE_STREAK: usize = 20;

/// ‖λ‖ below this is treated as numerically zero and switches the stopping
/// rule to an absolute tolerance against the domain scale.
const TRACE_NORM_FLOOR: f64 = 1e-14;

/// Traces this many times larger than the domain are unambiguous divergence.
/// Geometric blow-up holds rel_change roughly constant (both ‖Δλ‖ and ‖λ‖
/// grow by the same ratio), so the growth-streak test alone would let the
/// iteration run into floating-point overflow before flagging it; the
/// amplitude cap catches that regime while the numbers are still finite.
const TRACE_AMPLITUDE_CAP: f64 = 1e12;

struct LayerTask<'a> {
    layer: usize,
    system: &'a StackSystem,
    dirichlet: Vec<(usize, f64)>,
    contact: Vec<ContactNode>,
}

fn layer_task<'a>(
    system: &'a StackSystem,
    k: usize,
    lambda: &InterfaceState,
) -> LayerTask<'a> {
    let n = system.n_layers();
    let mut dirichlet = system.layers[k].fixed.clone();
    if k > 0 {
        // Traces from the interface above act as Dirichlet data on this
        // layer's top face. Lateral rows are zero there, matching the wall
        // pins exactly.
        let pairing = &system.mesh.interfaces[k - 1];
        for row in 0..pairing.len() {
            let node = pairing.lower_nodes[row];
            let value = lambda.values[k - 1][row];
            for d in 0..3 {
                dirichlet.push((3 * node + d, value[d]));
            }
        }
    }
    let mut contact = Vec::new();
    if k + 1 < n {
        let pairing = &system.mesh.interfaces[k];
        let weights = &system.interfaces[k].weights;
        for row in 0..pairing.len() {
            if pairing.pinned[row] {
                continue;
            }
            let value = lambda.values[k][row];
            contact.push(ContactNode {
                node: pairing.upper_nodes[row],
                weight: weights[row],
                anchor: [value[0], value[1]],
                gap: value[2],
            });
        }
    }
    LayerTask {
        layer: k,
        system,
        dirichlet,
        contact,
    }
}

fn run_layer_task(
    task: &LayerTask<'_>,
    warm: Option<&[f64]>,
    sweep: &SweepOptions,
) -> Result<crate::vi::SubproblemSolution, ViError> {
    let layer = &task.system.layers[task.layer];
    solve_subproblem(
        &layer.stiffness,
        &layer.load,
        &task.dirichlet,
        &task.contact,
        warm,
        sweep,
    )
}

/// Nodal interface residual of one layer's solve: (Ku − b) restricted to the
/// given nodes, one 3-vector per row.
fn interface_residual(ku: &[f64], load: &[f64], nodes: &[usize]) -> Vec<[f64; 3]> {
    nodes
        .iter()
        .map(|&n| {
            [
                ku[3 * n] - load[3 * n],
                ku[3 * n + 1] - load[3 * n + 1],
                ku[3 * n + 2] - load[3 * n + 2],
            ]
        })
        .collect()
}

struct AuxOutcome {
    /// p-trace + q-trace per pairing row.
    response: Vec<[f64; 3]>,
    p_field: Vec<f64>,
    q_field: Vec<f64>,
}

/// The two auxiliary Neumann solves of interface k: the lower layer loaded
/// on its top face and the upper layer loaded on its bottom face, both with
/// the averaged traction imbalance, both linear, both pinned on their fixed
/// sets plus their other interface face.
#[allow(clippy::too_many_arguments)]
fn solve_interface_auxiliaries(
    system: &StackSystem,
    k: usize,
    imbalance: &[[f64; 3]],
    warm_p: Option<&[f64]>,
    warm_q: Option<&[f64]>,
    tol_lin: f64,
) -> Result<AuxOutcome, LsolveError> {
    let pairing = &system.mesh.interfaces[k];
    let n = system.n_layers();

    // Lower-layer response (p): loaded on its top face.
    let lower = pairing.lower_layer;
    let mut p_dirichlet = system.layers[lower].fixed.clone();
    if lower + 1 < n {
        let below = &system.mesh.interfaces[lower];
        for &node in &below.upper_nodes {
            for d in 0..3 {
                p_dirichlet.push((3 * node + d, 0.0));
            }
        }
    }
    let mut p_load = vec![0.0; system.layers[lower].stiffness.dim()];
    for (row, r) in imbalance.iter().enumerate() {
        let node = pairing.lower_nodes[row];
        for d in 0..3 {
            p_load[3 * node + d] = r[d];
        }
    }
    let p_field = linear_solve(
        &system.layers[lower].stiffness,
        &p_load,
        &p_dirichlet,
        warm_p,
        tol_lin,
    )?;

    // Upper-layer response (q): loaded on its bottom face.
    let upper = pairing.upper_layer;
    let mut q_dirichlet = system.layers[upper].fixed.clone();
    if upper > 0 {
        let above = &system.mesh.interfaces[upper - 1];
        for &node in &above.lower_nodes {
            for d in 0..3 {
                q_dirichlet.push((3 * node + d, 0.0));
            }
        }
    }
    let mut q_load = vec![0.0; system.layers[upper].stiffness.dim()];
    for (row, r) in imbalance.iter().enumerate() {
        let node = pairing.upper_nodes[row];
        for d in 0..3 {
            q_load[3 * node + d] = r[d];
        }
    }
    let q_field = linear_solve(
        &system.layers[upper].stiffness,
        &q_load,
        &q_dirichlet,
        warm_q,
        tol_lin,
    )?;

    let response = (0..pairing.len())
        .map(|row| {
            let lb = 3 * pairing.lower_nodes[row];
            let ub = 3 * pairing.upper_nodes[row];
            [
                p_field[lb] + q_field[ub],
                p_field[lb + 1] + q_field[ub + 1],
                p_field[lb + 2] + q_field[ub + 2],
            ]
        })
        .collect();
    Ok(AuxOutcome {
        response,
        p_field,
        q_field,
    })
}

fn linear_solve(
    stiffness: &SparseSpd,
    load: &[f64],
    dirichlet: &[(usize, f64)],
    warm: Option<&[f64]>,
    tol_lin: f64,
) -> Result<Vec<f64>, LsolveError> {
    let reduced = apply_dirichlet(stiffness, load, dirichlet)?;
    let x0 = warm.map(|w| reduced.restrict(w));
    let sol = solve_spd(
        &reduced.matrix,
        &reduced.rhs,
        x0.as_deref(),
        tol_lin,
        default_cg_cap(reduced.free_dim()),
    )?;
    Ok(reduced.expand(&sol.x))
}

/// Run the layer-decomposition iteration to convergence.
pub fn ld_run(system: &StackSystem, config: &LdConfig) -> Result<LdSolution, LdError> {
    let n = system.n_layers();
    let n_interfaces = system.mesh.interfaces.len();
    let mut lambda = InterfaceState::zeros(system);
    let mut fields: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut aux_p: Vec<Option<Vec<f64>>> = vec![None; n_interfaces];
    let mut aux_q: Vec<Option<Vec<f64>>> = vec![None; n_interfaces];
    let mut history: Vec<LdIterationRecord> = Vec::new();
    let mut total_sweeps = vec![0usize; n];
    let mut min_certificate: Option<f64> = None;
    let mut grow_streak = 0usize;
    let domain_scale = system.domain_scale();

    for iteration in 1..=config.max_iters {
        // 1. Layer solves against the frozen traces.
        let tasks: Vec<LayerTask> = (0..n).map(|k| layer_task(system, k, &lambda)).collect();
        let solve_one = |task: &LayerTask| {
            run_layer_task(task, fields[task.layer].as_deref(), &config.sweep)
                .map_err(|source| LdError::Layer {
                    layer: task.layer,
                    source,
                })
        };
        let solutions: Vec<crate::vi::SubproblemSolution> = if config.parallel {
            tasks
                .par_iter()
                .map(solve_one)
                .collect::<Result<Vec<_>, _>>()?
        } else {
            tasks
                .iter()
                .map(solve_one)
                .collect::<Result<Vec<_>, _>>()?
        };
        let mut sweeps = Vec::with_capacity(n);
        for (k, sol) in solutions.iter().enumerate() {
            sweeps.push(sol.sweeps);
            total_sweeps[k] += sol.sweeps;
        }
        if config.certify {
            for (task, sol) in tasks.iter().zip(solutions.iter()) {
                let layer = &system.layers[task.layer];
                let cert = certify_subproblem(
                    &layer.stiffness,
                    &layer.load,
                    &task.dirichlet,
                    &task.contact,
                    &sol.u,
                    &CertifyOptions::default(),
                );
                min_certificate = Some(min_certificate.map_or(cert, |m: f64| m.min(cert)));
            }
        }
        let current: Vec<Vec<f64>> = solutions.into_iter().map(|s| s.u).collect();

        // 2. Interface traction imbalances from the layer residuals.
        let ku: Vec<Vec<f64>> = current
            .iter()
            .zip(system.layers.iter())
            .map(|(u, layer)| layer.stiffness.apply(u))
            .collect();
        let imbalances: Vec<Vec<[f64; 3]>> = (0..n_interfaces)
            .map(|k| {
                let pairing = &system.mesh.interfaces[k];
                let r_up = interface_residual(
                    &ku[pairing.upper_layer],
                    &system.layers[pairing.upper_layer].load,
                    &pairing.upper_nodes,
                );
                let r_low = interface_residual(
                    &ku[pairing.lower_layer],
                    &system.layers[pairing.lower_layer].load,
                    &pairing.lower_nodes,
                );
                r_up
                    .iter()
                    .zip(r_low.iter())
                    .map(|(a, b)| {
                        [
                            0.5 * (a[0] + b[0]),
                            0.5 * (a[1] + b[1]),
                            0.5 * (a[2] + b[2]),
                        ]
                    })
                    .collect()
            })
            .collect();

        // 3. Auxiliary responses and the trace relaxation.
        let aux_one = |k: usize| {
            solve_interface_auxiliaries(
                system,
                k,
                &imbalances[k],
                aux_p[k].as_deref(),
                aux_q[k].as_deref(),
                config.sweep.tol_lin,
            )
            .map_err(|source| LdError::Auxiliary {
                interface: k,
                source,
            })
        };
        let aux: Vec<AuxOutcome> = if config.parallel {
            (0..n_interfaces)
                .into_par_iter()
                .map(aux_one)
                .collect::<Result<Vec<_>, _>>()?
        } else {
            (0..n_interfaces)
                .map(aux_one)
                .collect::<Result<Vec<_>, _>>()?
        };

        let mut delta_sq_total = 0.0;
        let mut norm_sq_total = 0.0;
        let mut interface_deltas = Vec::with_capacity(n_interfaces);
        for (k, outcome) in aux.iter().enumerate() {
            let pairing = &system.mesh.interfaces[k];
            let mut delta_sq = 0.0;
            for row in 0..pairing.len() {
                let old = lambda.values[k][row];
                let new = if pairing.pinned[row] {
                    [0.0; 3]
                } else {
                    relaxed_trace(old, [0.0; 3], outcome.response[row], config.theta)
                };
                for d in 0..3 {
                    let diff = new[d] - old[d];
                    delta_sq += diff * diff;
                    norm_sq_total += new[d] * new[d];
                }
                lambda.values[k][row] = new;
            }
            delta_sq_total += delta_sq;
            interface_deltas.push(delta_sq.sqrt());
        }
        aux_p = aux.iter().map(|o| Some(o.p_field.clone())).collect();
        aux_q = aux.iter().map(|o| Some(o.q_field.clone())).collect();

        let delta = delta_sq_total.sqrt();
        let lambda_norm = norm_sq_total.sqrt();
        let rel_change = if lambda_norm > TRACE_NORM_FLOOR {
            delta / lambda_norm
        } else {
            // Degenerate trace (e.g. unloaded stack): fall back to an
            // absolute criterion against the domain size.
            delta / domain_scale
        };

        let energy = stack_objective(system, &current);
        history.push(LdIterationRecord {
            iteration,
            rel_change,
            energy,
            interface_deltas,
            sweeps,
        });
        fields = current.into_iter().map(Some).collect();

        if !rel_change.is_finite() || lambda_norm > TRACE_AMPLITUDE_CAP * domain_scale {
            return Err(LdError::Diverged {
                iteration,
                streak: grow_streak,
                last: rel_change,
                history,
            });
        }
        if history.len() >= 2 {
            let prev = history[history.len() - 2].rel_change;
            if rel_change > prev {
                grow_streak += 1;
            } else {
                grow_streak = 0;
            }
            if grow_streak >= DIVERGENCE_STREAK {
                return Err(LdError::Diverged {
                    iteration,
                    streak: grow_streak,
                    last: rel_change,
                    history,
                });
            }
        }

        if rel_change < config.tol {
            let fields: Vec<Vec<f64>> = fields.into_iter().map(Option::unwrap).collect();
            return Ok(LdSolution {
                fields,
                lambda,
                iterations: iteration,
                history,
                total_sweeps,
                min_certificate,
            });
        }
    }

    let last = history.last().map(|r| r.rel_change).unwrap_or(f64::NAN);
    Err(LdError::IterationLimit {
        max_iters: config.max_iters,
        last,
        tol: config.tol,
        history,
    })
}
