//! Dense linear algebra: Gaussian elimination with partial pivoting.

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    /// Zero matrix of dimension `n`.
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.iter()) {
                acc += a * b;
            }
            y[i] = acc;
        }
        y
    }

    /// xᵀ A x.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x.iter()).map(|(a, b)| a * b).sum()
    }

    /// Largest row sum of absolute values — a safe upper bound on the
    /// spectral radius of a symmetric matrix (Gershgorin).
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Reduced system with the listed entries fixed to prescribed values:
    /// returns (A_ff, b_f - A_fc x_c, free index map).
    pub fn eliminate(&self, b: &[f64], fixed: &[(usize, f64)]) -> (DenseMatrix, Vec<f64>, Vec<usize>) {
        let mut is_fixed = vec![None; self.n];
        for &(i, v) in fixed {
            is_fixed[i] = Some(v);
        }
        let free: Vec<usize> = (0..self.n).filter(|&i| is_fixed[i].is_none()).collect();
        let m = free.len();
        let mut a = DenseMatrix::zeros(m);
        let mut rhs = vec![0.0; m];
        for (ri, &i) in free.iter().enumerate() {
            let mut acc = b[i];
            for j in 0..self.n {
                match is_fixed[j] {
                    None => {}
                    Some(v) => acc -= self.get(i, j) * v,
                }
            }
            rhs[ri] = acc;
            for (rj, &j) in free.iter().enumerate() {
                a.set(ri, rj, self.get(i, j));
            }
        }
        (a, rhs, free)
    }
}

/// Solve A x = b by Gaussian elimination with partial pivoting.
///
/// Panics on a numerically singular pivot; the oracle is only ever applied to
/// well-conditioned fixtures, where a singular pivot means a broken test.
pub fn solve_dense(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = a.n;
    assert_eq!(b.len(), n);
    let mut m = a.data.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_mag = m[col * n + col].abs();
        for row in col + 1..n {
            let mag = m[row * n + col].abs();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = row;
            }
        }
        assert!(pivot_mag > 0.0, "singular matrix in dense oracle (column {col})");
        if pivot_row != col {
            for j in 0..n {
                m.swap(col * n + j, pivot_row * n + j);
            }
            x.swap(col, pivot_row);
        }
        let inv = 1.0 / m[col * n + col];
        for row in col + 1..n {
            let factor = m[row * n + col] * inv;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                m[row * n + j] -= factor * m[col * n + j];
            }
            x[row] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for j in col + 1..n {
            acc -= m[col * n + j] * x[j];
        }
        x[col] = acc / m[col * n + col];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_hand_system() {
        // [[2,1],[1,2]] x = (1,1) → x = (1/3, 1/3)
        let mut a = DenseMatrix::zeros(2);
        a.set(0, 0, 2.0);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 2.0);
        let x = solve_dense(&a, &[1.0, 1.0]);
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn eliminate_reduces_hand_system() {
        // Same system, fix x2 = 0 → 2 x1 = 1.
        let mut a = DenseMatrix::zeros(2);
        a.set(0, 0, 2.0);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 2.0);
        let (ar, br, free) = a.eliminate(&[1.0, 1.0], &[(1, 0.0)]);
        assert_eq!(free, vec![0]);
        let x = solve_dense(&ar, &br);
        assert!((x[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let mut a = DenseMatrix::zeros(2);
        a.set(0, 0, 0.0);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 0.0);
        let x = solve_dense(&a, &[3.0, 4.0]);
        assert!((x[0] - 4.0).abs() < 1e-14);
        assert!((x[1] - 3.0).abs() < 1e-14);
    }
}
