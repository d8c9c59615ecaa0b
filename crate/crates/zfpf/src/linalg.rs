//! Internal dense complex-matrix helpers for the quantum modules.
//!
//! Matrices live in the tensor-product space of a sorted site list, with
//! the first site as the most significant digit of the basis index (so
//! `kron(A, B)` puts `A` on the lower-numbered site). Local operators are
//! applied through a digit-decomposition instead of a full embedded GEMM,
//! and traces against tensorized measurements contract one site at a time.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub(crate) type CMatrix = DMatrix<Complex64>;

pub(crate) fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Largest entrywise deviation from the conjugate transpose.
pub(crate) fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Spectral norm of a Hermitian matrix.
pub(crate) fn hermitian_spectral_norm(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m)
        .into_iter()
        .fold(0.0, |acc, e| acc.max(e.abs()))
}

/// A local operator embedded into the space of a site list, prepared for
/// repeated left-multiplication.
pub(crate) struct EmbeddedOp {
    /// Local matrix, row-major, lexicographic over the support digits.
    entries: Vec<Complex64>,
    local_dim: usize,
    /// Global index offset of each local basis state.
    offsets: Vec<usize>,
    /// Global indices whose support digits are all zero.
    bases: Vec<usize>,
    dim: usize,
}

impl EmbeddedOp {
    /// Embeds `matrix` (acting on `support`, a sorted sublist of the
    /// sorted site list `space`) into the `q^|space|`-dimensional space.
    pub(crate) fn new(matrix: &CMatrix, support: &[u32], space: &[u32], q: usize) -> EmbeddedOp {
        let r = space.len();
        let s = support.len();
        let dim = q.pow(r as u32);
        let local_dim = q.pow(s as u32);
        assert_eq!(matrix.nrows(), local_dim);

        // Stride of each support site within the global index.
        let strides: Vec<usize> = support
            .iter()
            .map(|v| {
                let pos = space
                    .binary_search(v)
                    .expect("support must lie in the space");
                q.pow((r - 1 - pos) as u32)
            })
            .collect();

        let mut offsets = vec![0usize; local_dim];
        for (a, off) in offsets.iter_mut().enumerate() {
            let mut rem = a;
            for t in (0..s).rev() {
                *off += (rem % q) * strides[t];
                rem /= q;
            }
        }

        let mut bases = Vec::with_capacity(dim / local_dim);
        'outer: for i in 0..dim {
            for &stride in &strides {
                if i / stride % q != 0 {
                    continue 'outer;
                }
            }
            bases.push(i);
        }

        let mut entries = vec![Complex64::ZERO; local_dim * local_dim];
        for a in 0..local_dim {
            for b in 0..local_dim {
                entries[a * local_dim + b] = matrix[(a, b)];
            }
        }
        EmbeddedOp {
            entries,
            local_dim,
            offsets,
            bases,
            dim,
        }
    }

    /// `out = (self tensor I) * m`, overwriting `out` completely.
    pub(crate) fn apply_left(&self, m: &CMatrix, out: &mut CMatrix) {
        let dim = self.dim;
        debug_assert_eq!(m.nrows(), dim);
        let ls = self.local_dim;
        let mdata = m.as_slice();
        let odata = out.as_mut_slice();
        for c in 0..dim {
            let mcol = &mdata[c * dim..(c + 1) * dim];
            let ocol = &mut odata[c * dim..(c + 1) * dim];
            for &base in &self.bases {
                for a in 0..ls {
                    let mut acc = Complex64::ZERO;
                    let row = a * ls;
                    for b in 0..ls {
                        let e = self.entries[row + b];
                        if e != Complex64::ZERO {
                            acc += e * mcol[base + self.offsets[b]];
                        }
                    }
                    ocol[base + self.offsets[a]] = acc;
                }
            }
        }
    }

    /// Dense embedded matrix (the operator applied to the identity).
    pub(crate) fn to_dense(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        let id = identity(self.dim);
        self.apply_left(&id, &mut out);
        out
    }
}

/// `Tr[a * O]` where `O` is the tensor product of per-site `q x q`
/// factors (`None` meaning the identity), contracted one site at a time.
pub(crate) fn tensor_trace(a: &CMatrix, site_ops: &[Option<&CMatrix>], q: usize) -> Complex64 {
    let r = site_ops.len();
    debug_assert_eq!(a.nrows(), q.pow(r as u32));
    let mut cur: Vec<Complex64> = a.as_slice().to_vec(); // column-major
    let mut dim = a.nrows();
    // Contract the last (least significant) site at each step.
    for t in (0..r).rev() {
        let nd = dim / q;
        let mut next = vec![Complex64::ZERO; nd * nd];
        for jp in 0..nd {
            for bq in 0..q {
                let col = jp * q + bq;
                let colbase = col * dim;
                for ip in 0..nd {
                    let mut acc = Complex64::ZERO;
                    for aq in 0..q {
                        let v = cur[colbase + ip * q + aq];
                        if v == Complex64::ZERO {
                            continue;
                        }
                        let w = match site_ops[t] {
                            Some(op) => op[(bq, aq)],
                            None => {
                                if aq == bq {
                                    Complex64::ONE
                                } else {
                                    Complex64::ZERO
                                }
                            }
                        };
                        acc += v * w;
                    }
                    next[jp * nd + ip] += acc;
                }
            }
        }
        cur = next;
        dim = nd;
    }
    cur[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pauli_z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
    }

    fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
    }

    #[test]
    fn embedding_matches_kronecker() {
        let z = pauli_z();
        let x = pauli_x();
        // Z on site 0 of a 2-site space = Z kron I.
        let op = EmbeddedOp::new(&z, &[0], &[0, 5], 2);
        assert_eq!(op.to_dense(), z.kronecker(&identity(2)));
        // X on site 5 = I kron X.
        let op = EmbeddedOp::new(&x, &[5], &[0, 5], 2);
        assert_eq!(op.to_dense(), identity(2).kronecker(&x));
        // Two-site operator on the full space embeds as itself.
        let zx = z.kronecker(&x);
        let op = EmbeddedOp::new(&zx, &[0, 5], &[0, 5], 2);
        assert_eq!(op.to_dense(), zx);
    }

    #[test]
    fn apply_left_equals_dense_product() {
        let x = pauli_x();
        let op = EmbeddedOp::new(&x, &[1], &[0, 1, 2], 2);
        let dense = op.to_dense();
        let m = CMatrix::from_fn(8, 8, |i, j| c(i as f64 - j as f64, (i * j) as f64 * 0.1));
        let mut out = CMatrix::zeros(8, 8);
        op.apply_left(&m, &mut out);
        let expect = &dense * &m;
        assert!((out - expect).norm() < 1e-12);
    }

    #[test]
    fn tensor_trace_identity_measurement() {
        let m = CMatrix::from_fn(4, 4, |i, j| c((i + 2 * j) as f64, j as f64 - i as f64));
        let tr = tensor_trace(&m, &[None, None], 2);
        let direct: Complex64 = (0..4).map(|i| m[(i, i)]).sum();
        assert!((tr - direct).norm() < 1e-13);
    }

    #[test]
    fn tensor_trace_matches_dense_product() {
        let m = CMatrix::from_fn(4, 4, |i, j| {
            c((i * 7 % 5) as f64 - j as f64, (i + j) as f64)
        });
        let o0 =
            CMatrix::from_row_slice(2, 2, &[c(0.7, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.4, 0.0)]);
        let o1 = pauli_z();
        let dense_o = o0.kronecker(&o1);
        let expect = (&m * &dense_o).trace();
        let got = tensor_trace(&m, &[Some(&o0), Some(&o1)], 2);
        assert!((got - expect).norm() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn hermitian_tools() {
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[c(2.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(-1.0, 0.0)],
        );
        assert!(hermitian_defect(&h) < 1e-15);
        // eigenvalues of [[2, -i], [i, -1]]: (1 +- sqrt(13)) / 2
        let ev = hermitian_eigenvalues(&h);
        let lo = (1.0 - 13.0f64.sqrt()) / 2.0;
        let hi = (1.0 + 13.0f64.sqrt()) / 2.0;
        assert!((ev[0] - lo).abs() < 1e-12 && (ev[1] - hi).abs() < 1e-12);
        assert!((hermitian_spectral_norm(&h) - hi.abs().max(lo.abs())).abs() < 1e-12);
    }
}
