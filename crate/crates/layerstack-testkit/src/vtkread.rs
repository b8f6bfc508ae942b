//! Minimal reader for the legacy ASCII VTK files the production writer emits.
//!
//! Understands exactly the subset the writer produces — `DATASET
//! UNSTRUCTURED_GRID` with `POINTS`, `CELLS`, `CELL_TYPES`, and a single
//! `POINT_DATA` / `VECTORS` block — and is written from the format
//! description, not from the writer's code, so round-trip tests check the
//! format and not the implementation against itself.

/// Parsed contents of one legacy VTK unstructured-grid file.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkSnapshot {
    pub title: String,
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u32>,
    pub vectors: Vec<[f64; 3]>,
}

/// Parse a legacy ASCII VTK file. Panics with a descriptive message on any
/// deviation from the expected subset (this is test support; loud is good).
pub fn parse_legacy_vtk(text: &str) -> VtkSnapshot {
    let mut lines = text.lines();
    let header = lines.next().expect("missing header line");
    assert!(
        header.starts_with("# vtk DataFile Version"),
        "bad header: {header:?}"
    );
    let title = lines.next().expect("missing title line").to_string();
    let format = lines.next().expect("missing format line");
    assert_eq!(format.trim(), "ASCII", "expected ASCII format");
    let dataset = lines.next().expect("missing dataset line");
    assert_eq!(
        dataset.trim(),
        "DATASET UNSTRUCTURED_GRID",
        "expected unstructured grid"
    );

    // The remaining sections are keyword-introduced; gather all whitespace
    // separated tokens after each keyword line as needed.
    let rest: Vec<&str> = lines.collect();
    let mut idx = 0;
    let mut points = Vec::new();
    let mut cells = Vec::new();
    let mut cell_types = Vec::new();
    let mut vectors = Vec::new();

    while idx < rest.len() {
        let line = rest[idx].trim();
        idx += 1;
        if line.is_empty() {
            continue;
        }
        let mut words = line.split_whitespace();
        match words.next().unwrap() {
            "POINTS" => {
                let n: usize = words.next().unwrap().parse().unwrap();
                let dtype = words.next().unwrap();
                assert_eq!(dtype, "double", "points must be double precision");
                let (values, consumed) = take_floats(&rest[idx..], 3 * n);
                idx += consumed;
                points = values.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            }
            "CELLS" => {
                let n: usize = words.next().unwrap().parse().unwrap();
                let total: usize = words.next().unwrap().parse().unwrap();
                let (values, consumed) = take_ints(&rest[idx..], total);
                idx += consumed;
                let mut pos = 0;
                for _ in 0..n {
                    let len = values[pos];
                    let cell: Vec<usize> = values[pos + 1..pos + 1 + len].to_vec();
                    pos += 1 + len;
                    cells.push(cell);
                }
                assert_eq!(pos, total, "CELLS token count mismatch");
            }
            "CELL_TYPES" => {
                let n: usize = words.next().unwrap().parse().unwrap();
                let (values, consumed) = take_ints(&rest[idx..], n);
                idx += consumed;
                cell_types = values.into_iter().map(|v| v as u32).collect();
            }
            "POINT_DATA" => {
                let n: usize = words.next().unwrap().parse().unwrap();
                assert_eq!(n, points.len(), "POINT_DATA count disagrees with POINTS");
            }
            "VECTORS" => {
                let _name = words.next().unwrap();
                let dtype = words.next().unwrap();
                assert_eq!(dtype, "double", "vectors must be double precision");
                let (values, consumed) = take_floats(&rest[idx..], 3 * points.len());
                idx += consumed;
                vectors = values.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            }
            other => panic!("unexpected VTK section {other:?}"),
        }
    }

    VtkSnapshot {
        title,
        points,
        cells,
        cell_types,
        vectors,
    }
}

fn take_floats(lines: &[&str], count: usize) -> (Vec<f64>, usize) {
    let mut values = Vec::with_capacity(count);
    let mut consumed = 0;
    while values.len() < count {
        let line = lines
            .get(consumed)
            .unwrap_or_else(|| panic!("file truncated: wanted {count} floats"));
        consumed += 1;
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().expect("bad float token"));
        }
    }
    assert_eq!(values.len(), count, "excess float tokens on final line");
    (values, consumed)
}

fn take_ints(lines: &[&str], count: usize) -> (Vec<usize>, usize) {
    let mut values = Vec::with_capacity(count);
    let mut consumed = 0;
    while values.len() < count {
        let line = lines
            .get(consumed)
            .unwrap_or_else(|| panic!("file truncated: wanted {count} ints"));
        consumed += 1;
        for tok in line.split_whitespace() {
            values.push(tok.parse::<usize>().expect("bad integer token"));
        }
    }
    assert_eq!(values.len(), count, "excess integer tokens on final line");
    (values, consumed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_tet() {
        let text = "\
# vtk DataFile Version 3.0
demo
ASCII
DATASET UNSTRUCTURED_GRID
POINTS 4 double
0 0 0
1 0 0
0 1 0
0 0 1
CELLS 1 5
4 0 1 2 3
CELL_TYPES 1
10
POINT_DATA 4
VECTORS displacement double
0 0 0
0 0 0
0 0 0
0 0 0
";
        let snap = parse_legacy_vtk(text);
        assert_eq!(snap.points.len(), 4);
        assert_eq!(snap.cells, vec![vec![0, 1, 2, 3]]);
        assert_eq!(snap.cell_types, vec![10]);
        assert_eq!(snap.vectors.len(), 4);
        assert_eq!(snap.title, "demo");
    }
}
