//! Run reports: the iteration history as CSV and a machine-readable JSON
//! summary of a converged (or failed) run.

use crate::ld::{classify_stick_slip, LdIterationRecord, LdSolution, StackSystem};
use serde::Serialize;
use std::fmt::Write as _;

/// Render the iteration history as CSV.
///
/// Columns: `iter,rel_change,energy`, one `lambda_delta_<k>` per interface
/// (trace-change norm, top interface first), then one `sweeps_layer_<i>`
/// per layer. Floats carry 17 significant digits. A run that diverged ends
/// with a trailing `# diverged` comment row.
pub fn history_csv(
    history: &[LdIterationRecord],
    n_layers: usize,
    n_interfaces: usize,
    diverged: bool,
) -> String {
    let mut out = String::from("iter,rel_change,energy");
    for k in 1..=n_interfaces {
        write!(out, ",lambda_delta_{k}").unwrap();
    }
    for i in 1..=n_layers {
        write!(out, ",sweeps_layer_{i}").unwrap();
    }
    out.push('\n');
    for record in history {
        debug_assert_eq!(record.interface_deltas.len(), n_interfaces);
        debug_assert_eq!(record.sweeps.len(), n_layers);
        write!(
            out,
            "{},{:.16e},{:.16e}",
            record.iteration, record.rel_change, record.energy
        )
        .unwrap();
        for delta in &record.interface_deltas {
            write!(out, ",{delta:.16e}").unwrap();
        }
        for sweeps in &record.sweeps {
            write!(out, ",{sweeps}").unwrap();
        }
        out.push('\n');
    }
    if diverged {
        out.push_str("# diverged\n");
    }
    out
}

/// Per-interface digest of the converged contact state.
#[derive(Debug, Clone, Serialize)]
pub struct InterfaceSummary {
    pub slip_area_fraction: f64,
    pub stick_area_fraction: f64,
    pub mean_tangential_jump: [f64; 2],
    /// Final trace-change norm on this interface.
    pub last_delta: f64,
}

/// Machine-readable summary of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub converged: bool,
    pub iterations: usize,
    /// Name of the stopping metric: nodal ℓ² over all interface traces.
    pub stopping_norm: &'static str,
    pub theta: f64,
    pub tol: f64,
    pub tol_sub: f64,
    /// Realized mesh steps [hx, hy, hz] per layer.
    pub realized_h: Vec<[f64; 3]>,
    pub nodes_per_layer: Vec<usize>,
    pub total_nodes: usize,
    pub final_rel_change: f64,
    /// Coupled objective at the final fields.
    pub energy: f64,
    /// Stack energy norm of the final fields.
    pub energy_norm: f64,
    /// Accumulated inner sweeps per layer.
    pub total_sweeps: Vec<usize>,
    pub interfaces: Vec<InterfaceSummary>,
    /// Worst variational-inequality certificate, when certification ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_certificate: Option<f64>,
}

/// Tangential jumps below this fraction of the domain scale count as stick.
pub const DEFAULT_SLIP_TOL_REL: f64 = 1e-8;

/// Summarize a converged run.
pub fn run_summary(
    system: &StackSystem,
    solution: &LdSolution,
    theta: f64,
    tol: f64,
    tol_sub: f64,
) -> RunSummary {
    let classes = classify_stick_slip(
        system,
        &solution.fields,
        DEFAULT_SLIP_TOL_REL * system.domain_scale(),
    );
    let last = solution.history.last();
    let interfaces = classes
        .iter()
        .enumerate()
        .map(|(k, class)| InterfaceSummary {
            slip_area_fraction: class.slip_area_fraction,
            stick_area_fraction: 1.0 - class.slip_area_fraction,
            mean_tangential_jump: class.mean_tangential_jump,
            last_delta: last.map(|r| r.interface_deltas[k]).unwrap_or(0.0),
        })
        .collect();
    let nodes_per_layer: Vec<usize> = system.mesh.layers.iter().map(|l| l.n_nodes()).collect();
    RunSummary {
        converged: true,
        iterations: solution.iterations,
        stopping_norm: "nodal_l2",
        theta,
        tol,
        tol_sub,
        realized_h: system.realized_steps(),
        total_nodes: nodes_per_layer.iter().sum(),
        nodes_per_layer,
        final_rel_change: last.map(|r| r.rel_change).unwrap_or(0.0),
        energy: crate::ld::stack_objective(system, &solution.fields),
        energy_norm: crate::ld::energy_norm(system, &solution.fields),
        total_sweeps: solution.total_sweeps.clone(),
        interfaces,
        min_certificate: solution.min_certificate,
    }
}

impl RunSummary {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ld::{ld_run, LdConfig, StackProblem, StackSystem};
    use crate::mesh::StackGeometry;
    use crate::Material;

    fn tiny_solution() -> (StackSystem, LdSolution) {
        let problem = StackProblem {
            geometry: StackGeometry {
                extent_x: 2.0,
                extent_y: 2.0,
                z_levels: vec![2.0, 1.0, 0.0],
            },
            h: 0.5,
            materials: vec![
                Material::new(50.0, 0.25).unwrap(),
                Material::new(20.0, 0.3).unwrap(),
            ],
            friction_bounds: vec![0.1],
            body_force: [0.0, 0.02, -0.4],
            surface_load: None,
        };
        let system = StackSystem::build(&problem).unwrap();
        let solution = ld_run(&system, &LdConfig::default()).unwrap();
        (system, solution)
    }

    #[test]
    fn csv_has_the_expected_header_and_row_shape() {
        let (system, solution) = tiny_solution();
        let csv = history_csv(&solution.history, 2, 1, false);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iter,rel_change,energy,lambda_delta_1,sweeps_layer_1,sweeps_layer_2"
        );
        let first = lines.next().unwrap();
        let fields: Vec<&str> = first.split(',').collect();
        assert_eq!(fields.len(), 6);
        assert_eq!(fields[0], "1");
        // Floats must parse back exactly at 17 significant digits.
        let rel: f64 = fields[1].parse().unwrap();
        assert_eq!(rel, solution.history[0].rel_change);
        assert_eq!(csv.lines().count(), 1 + solution.history.len());
        let _ = system;
    }

    #[test]
    fn diverged_runs_end_with_a_comment_row() {
        let (_, solution) = tiny_solution();
        let csv = history_csv(&solution.history, 2, 1, true);
        assert!(csv.ends_with("# diverged\n"));
    }

    #[test]
    fn summary_reports_mesh_and_contact_state() {
        let (system, solution) = tiny_solution();
        let summary = run_summary(&system, &solution, 0.04, 1e-4, 1e-10);
        assert!(summary.converged);
        assert_eq!(summary.stopping_norm, "nodal_l2");
        assert_eq!(summary.realized_h.len(), 2);
        assert_eq!(summary.realized_h[0], [0.5, 0.5, 0.5]);
        assert_eq!(summary.interfaces.len(), 1);
        let iface = &summary.interfaces[0];
        assert!((iface.slip_area_fraction + iface.stick_area_fraction - 1.0).abs() < 1e-15);
        let text = summary.to_json_string();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["stopping_norm"], "nodal_l2");
        assert_eq!(parsed["total_nodes"], serde_json::json!(summary.total_nodes));
        assert!(parsed["tol_sub"].is_number());
    }
}
