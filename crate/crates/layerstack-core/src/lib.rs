//! Multi-layer elastic contact solver with Tresca friction.
//!
//! The library meshes a stack of elastic boxes, assembles linear elasticity
//! on each layer, and solves the coupled frictional-contact problem on the
//! horizontal interfaces two ways: a monolithic Gauss–Seidel iteration over
//! the full stack, and a layer-decomposition fixed-point scheme that solves
//! one layer at a time and exchanges interface tractions. Each subproblem
//! solution carries a variational-inequality certificate, so agreement
//! between the two routes is checked rather than assumed.

pub mod assembly;
pub mod config;
pub mod ld;
pub mod mesh;
pub mod report;
pub mod sparse;
pub mod vi;
pub mod vtk;

pub use assembly::{
    assemble_body_load, assemble_stiffness, assemble_traction_load, friction_weights,
    AssemblyError, LameParameters, Material, SurfacePatch, TractionLoad,
};
pub use config::{
    ConfigError, FrictionConfig, GeometryConfig, LayerConfig, PatchConfig, StackConfig,
    SurfaceLoadConfig,
};
pub use ld::{
    classify_stick_slip, discrete_extension, energy_norm, interpolate_stack_fields,
    layer_energy_seminorm, ld_run, relaxed_trace, solve_stack_monolithic, stack_objective,
    trace_norm, ContactRegime,
    InterfaceClassification, InterfaceState, InterfaceSystem, LayerSystem, LdConfig, LdError,
    LdIterationRecord, LdSolution, MonolithicStack, StackError, StackProblem, StackSystem,
};
pub use mesh::{
    build_layered_box_mesh, validate_mesh, BoundaryTag, BoundaryTri, InterfacePairing, LayerMesh,
    MeshError, MeshReport, MultiLayerMesh, StackGeometry,
};
pub use sparse::{
    apply_dirichlet, default_cg_cap, solve_spd, solve_spd_observed, CgSolution, LsolveError,
    ReducedSystem, SparseSpd,
};
pub use report::{history_csv, run_summary, InterfaceSummary, RunSummary, DEFAULT_SLIP_TOL_REL};
pub use vi::{
    certify_monolithic, certify_subproblem, nodal_prox, nodal_prox_certificate, solve_monolithic,
    solve_subproblem, CertifyOptions, ContactNode, Mat3, MonolithicSolution, PairSpec,
    SubproblemSolution, SweepOptions, ViError,
};
pub use vtk::{layer_vtk, stack_vtk};
