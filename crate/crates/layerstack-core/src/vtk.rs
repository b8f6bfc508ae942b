//! Legacy ASCII VTK output of displacement fields.
//!
//! Files use the version 3.0 legacy format with double-precision points and
//! a `displacement` point-data vector field. Coordinates and values are
//! written with 17 significant digits, which round-trips `f64` exactly, and
//! the writer is deterministic: the same mesh and field always produce the
//! same bytes.

use crate::mesh::{LayerMesh, MultiLayerMesh};
use std::fmt::Write as _;

/// VTK cell type id of a linear tetrahedron.
const VTK_TETRA: u8 = 10;

fn push_vector(out: &mut String, v: [f64; 3]) {
    // 17 significant digits: lossless decimal round-trip for f64.
    writeln!(out, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]).expect("string write");
}

fn write_unstructured(
    out: &mut String,
    title: &str,
    points: impl ExactSizeIterator<Item = [f64; 3]>,
    tets: impl ExactSizeIterator<Item = [usize; 4]>,
    displacements: impl ExactSizeIterator<Item = [f64; 3]>,
) {
    let n_points = points.len();
    let n_cells = tets.len();
    debug_assert_eq!(displacements.len(), n_points);
    writeln!(out, "# vtk DataFile Version 3.0").unwrap();
    writeln!(out, "{title}").unwrap();
    writeln!(out, "ASCII").unwrap();
    writeln!(out, "DATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(out, "POINTS {n_points} double").unwrap();
    for p in points {
        push_vector(out, p);
    }
    writeln!(out, "CELLS {n_cells} {}", 5 * n_cells).unwrap();
    for t in tets {
        writeln!(out, "4 {} {} {} {}", t[0], t[1], t[2], t[3]).unwrap();
    }
    writeln!(out, "CELL_TYPES {n_cells}").unwrap();
    for _ in 0..n_cells {
        writeln!(out, "{VTK_TETRA}").unwrap();
    }
    writeln!(out, "POINT_DATA {n_points}").unwrap();
    writeln!(out, "VECTORS displacement double").unwrap();
    for u in displacements {
        push_vector(out, u);
    }
}

/// Render one layer and its displacement field (3 DOFs per node).
pub fn layer_vtk(layer: &LayerMesh, field: &[f64], title: &str) -> String {
    assert_eq!(field.len(), 3 * layer.n_nodes());
    let mut out = String::new();
    write_unstructured(
        &mut out,
        title,
        layer.coords.iter().copied(),
        layer.tets.iter().copied(),
        (0..layer.n_nodes()).map(|n| [field[3 * n], field[3 * n + 1], field[3 * n + 2]]),
    );
    out
}

/// Render the whole stack in one file: layer meshes concatenated with node
/// offsets, interface nodes intentionally duplicated so the displacement
/// jump across interfaces is preserved.
pub fn stack_vtk(mesh: &MultiLayerMesh, fields: &[Vec<f64>], title: &str) -> String {
    assert_eq!(fields.len(), mesh.layers.len());
    let mut points = Vec::new();
    let mut tets = Vec::new();
    let mut displacements = Vec::new();
    let mut offset = 0usize;
    for (layer, field) in mesh.layers.iter().zip(fields.iter()) {
        assert_eq!(field.len(), 3 * layer.n_nodes());
        points.extend(layer.coords.iter().copied());
        tets.extend(
            layer
                .tets
                .iter()
                .map(|t| [t[0] + offset, t[1] + offset, t[2] + offset, t[3] + offset]),
        );
        displacements
            .extend((0..layer.n_nodes()).map(|n| [field[3 * n], field[3 * n + 1], field[3 * n + 2]]));
        offset += layer.n_nodes();
    }
    let mut out = String::new();
    write_unstructured(
        &mut out,
        title,
        points.into_iter(),
        tets.into_iter(),
        displacements.into_iter(),
    );
    out
}
