use super::multigrid::Multigrid;
use crate::grid::SparseMatrix;

/// Left-applied approximate inverse `z ≈ M⁻¹ r`.
#[derive(Debug, Clone)]
pub enum Preconditioner {
    Identity,
    Jacobi(Vec<f64>),
    Ilu0(Ilu0),
    Multigrid(Box<Multigrid>),
}

impl Preconditioner {
    pub fn jacobi(m: &SparseMatrix) -> Self {
        let inv = m
            .diagonal()
            .into_iter()
            .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
            .collect();
        Preconditioner::Jacobi(inv)
    }

    pub fn ilu0(m: &SparseMatrix) -> Self {
        Preconditioner::Ilu0(Ilu0::new(m))
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Identity => z.copy_from_slice(r),
            Preconditioner::Jacobi(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            Preconditioner::Ilu0(f) => f.solve(r, z),
            Preconditioner::Multigrid(mg) => mg.apply(r, z),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preconditioner::Identity => "none",
            Preconditioner::Jacobi(_) => "jacobi",
            Preconditioner::Ilu0(_) => "ilu0",
            Preconditioner::Multigrid(_) => "multigrid",
        }
    }
}

/// Incomplete LU factorisation restricted to the sparsity pattern of the
/// matrix. `L` has unit diagonal and shares storage with `U`.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    lu: Vec<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(m: &SparseMatrix) -> Self {
        let n = m.dim();
        let row_ptr = m.row_ptr().to_vec();
        let col_idx = m.col_idx().to_vec();
        let mut lu = m.values().to_vec();
        let diag: Vec<usize> = (0..n)
            .map(|r| {
                let span = row_ptr[r]..row_ptr[r + 1];
                span.start + col_idx[span].binary_search(&r).expect("ILU(0) needs a full diagonal")
            })
            .collect();

        for i in 0..n {
            let end = row_ptr[i + 1];
            for p in row_ptr[i]..diag[i] {
                let k = col_idx[p];
                let lik = lu[p] / lu[diag[k]];
                lu[p] = lik;
                // row_i[j] -= l_ik * u_kj over the shared pattern j > k
                let mut q = p + 1;
                for t in diag[k] + 1..row_ptr[k + 1] {
                    let j = col_idx[t];
                    while q < end && col_idx[q] < j {
                        q += 1;
                    }
                    if q == end {
                        break;
                    }
                    if col_idx[q] == j {
                        lu[q] -= lik * lu[t];
                    }
                }
            }
            // singular systems (periodic cell) can leave a vanishing last pivot
            let orig = m.values()[diag[i]].abs().max(f64::MIN_POSITIVE);
            if lu[diag[i]].abs() < 1e-8 * orig {
                lu[diag[i]] = 1e-8 * orig;
            }
        }
        Self { row_ptr, col_idx, lu, diag }
    }

    pub fn solve(&self, r: &[f64], z: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut acc = r[i];
            for p in self.row_ptr[i]..self.diag[i] {
                acc -= self.lu[p] * z[self.col_idx[p]];
            }
            z[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for p in self.diag[i] + 1..self.row_ptr[i + 1] {
                acc -= self.lu[p] * z[self.col_idx[p]];
            }
            z[i] = acc / self.lu[self.diag[i]];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ilu0_is_exact_for_tridiagonal() {
        let mut rows = vec![];
        for i in 0..6usize {
            let mut r = vec![(i, 4.0)];
            if i > 0 {
                r.push((i - 1, -1.0));
            }
            if i < 5 {
                r.push((i + 1, -2.0));
            }
            rows.push(r);
        }
        let m = SparseMatrix::from_rows(rows).unwrap();
        let pc = Preconditioner::ilu0(&m);
        let x = vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        let b = m.apply(&x).unwrap();
        let mut z = vec![0.0; 6];
        pc.apply(&b, &mut z);
        for (a, e) in z.iter().zip(&x) {
            assert!((a - e).abs() < 1e-13);
        }
    }

    #[test]
    fn jacobi_divides_by_diagonal() {
        let m = SparseMatrix::from_dense(&[vec![2.0, 1.0], vec![0.0, 4.0]]).unwrap();
        let mut z = vec![0.0; 2];
        Preconditioner::jacobi(&m).apply(&[1.0, 1.0], &mut z);
        assert_eq!(z, vec![0.5, 0.25]);
    }
}
