//! Exact, exponential-cost reference implementations of everything the
//! fast path approximates.
//!
//! All quantum references assemble the full `q^n`-dimensional operator and
//! go through a Hermitian eigendecomposition; exactness of the traces
//! matters here, speed does not. Dimensions are capped (default `2^12`)
//! so a typo cannot eat the machine.

use num_complex::Complex64;

use crate::csp::CspFormula;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, tensor_trace, CMatrix, EmbeddedOp};
use crate::quantum::{Hamiltonian, TensorizedMeasurement};
use crate::series::TaylorSeries;

/// Default cap on the assembled dimension `q^n`.
pub const DEFAULT_DIMENSION_CAP: usize = 1 << 12;

/// Variable-count cap for exhaustive CSP enumeration.
pub const CSP_ENUMERATION_CAP: usize = 20;

/// A dense operator on the full `n`-site space.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    dim: usize,
    matrix: CMatrix,
}

impl DenseOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

fn full_dimension(ham: &Hamiltonian, cap: usize) -> Result<usize> {
    ham.q()
        .checked_pow(ham.n_sites() as u32)
        .filter(|&d| d <= cap)
        .ok_or_else(|| {
            Error::Capability(format!(
                "dense dimension {}^{} exceeds the cap {cap}",
                ham.q(),
                ham.n_sites()
            ))
        })
}

/// Sum of all terms embedded into the full space (site 0 most
/// significant).
pub fn assemble(ham: &Hamiltonian, cap: usize) -> Result<DenseOperator> {
    let dim = full_dimension(ham, cap)?;
    let space: Vec<u32> = (0..ham.n_sites() as u32).collect();
    let mut matrix = CMatrix::zeros(dim, dim);
    for term in ham.terms() {
        let op = EmbeddedOp::new(term.matrix(), term.support(), &space, ham.q());
        matrix += op.to_dense();
    }
    debug_assert!(hermitian_defect(&matrix) <= 1e-10);
    Ok(DenseOperator { dim, matrix })
}

fn site_ops(meas: &TensorizedMeasurement, n_sites: usize) -> Vec<Option<&CMatrix>> {
    (0..n_sites as u32).map(|v| meas.site(v)).collect()
}

/// `Z_{H,O}(beta) = Tr[exp(-beta H) O]` through the eigendecomposition of
/// the assembled Hamiltonian.
pub fn exact_partition(
    ham: &Hamiltonian,
    meas: &TensorizedMeasurement,
    beta: Complex64,
    cap: usize,
) -> Result<Complex64> {
    meas.validate(ham.q(), ham.n_sites())?;
    let assembled = assemble(ham, cap)?;
    let eig = assembled.matrix.symmetric_eigen();
    // exp(-beta H) = V diag(e^{-beta lambda}) V^dagger
    let dim = assembled.dim;
    let mut scaled = eig.eigenvectors.clone();
    for (a, mut col) in scaled.column_iter_mut().enumerate() {
        let w = (-beta * eig.eigenvalues[a]).exp();
        for entry in col.iter_mut() {
            *entry *= w;
        }
    }
    let expm = &scaled * eig.eigenvectors.adjoint();
    let _ = dim;
    Ok(tensor_trace(&expm, &site_ops(meas, ham.n_sites()), ham.q()))
}

/// Coefficients `f_ell = (-1)^ell Tr[H^ell O] / (ell! Tr O)` of the
/// normalized partition function, by iterated dense multiplication.
pub fn exact_f_series(
    ham: &Hamiltonian,
    meas: &TensorizedMeasurement,
    m: usize,
    cap: usize,
) -> Result<TaylorSeries> {
    meas.validate(ham.q(), ham.n_sites())?;
    let assembled = assemble(ham, cap)?;
    let ops = site_ops(meas, ham.n_sites());
    let trace_o = meas.total_trace(ham.q(), ham.n_sites());
    let mut coeffs = Vec::with_capacity(m + 1);
    coeffs.push(Complex64::ONE);
    let mut power = CMatrix::identity(assembled.dim, assembled.dim);
    let mut factorial = 1.0f64;
    for ell in 1..=m {
        power = &power * &assembled.matrix;
        factorial *= ell as f64;
        let sign = if ell % 2 == 0 { 1.0 } else { -1.0 };
        let tr = tensor_trace(&power, &ops, ham.q());
        coeffs.push(tr * (sign / (factorial * trace_o)));
    }
    Ok(TaylorSeries::new(coeffs))
}

/// The diagonal of `exp(-beta H)` normalized to a probability vector over
/// `[q]^n` in big-endian site order.
pub fn exact_gibbs_distribution(ham: &Hamiltonian, beta: f64, cap: usize) -> Result<Vec<f64>> {
    let assembled = assemble(ham, cap)?;
    let eig = assembled.matrix.symmetric_eigen();
    let dim = assembled.dim;
    let mut probs = vec![0.0f64; dim];
    for a in 0..dim {
        let w = (-beta * eig.eigenvalues[a]).exp();
        for (i, p) in probs.iter_mut().enumerate() {
            *p += w * eig.eigenvectors[(i, a)].norm_sqr();
        }
    }
    let total: f64 = probs.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::Numeric(format!(
            "Gibbs normalization failed: Z = {total}"
        )));
    }
    for p in &mut probs {
        if *p < 0.0 {
            if *p < -1e-12 {
                return Err(Error::Numeric(format!(
                    "Gibbs diagonal entry {p} below -1e-12"
                )));
            }
            *p = 0.0;
        }
    }
    let clamped: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= clamped;
    }
    Ok(probs)
}

/// `Z(lambda) = sum_sigma (prod_e phi_e(sigma|_e)) lambda^{|sigma|_1}` by
/// full enumeration.
pub fn exact_csp_partition(formula: &CspFormula, lambda: Complex64) -> Result<Complex64> {
    let n = formula.n_vars();
    if n > CSP_ENUMERATION_CAP {
        return Err(Error::Capability(format!(
            "exhaustive CSP enumeration capped at {CSP_ENUMERATION_CAP} variables, got {n}"
        )));
    }
    let mut total = Complex64::ZERO;
    for sigma in 0u64..(1 << n) {
        let mut weight = Complex64::ONE;
        for clause in formula.clauses() {
            let mut idx = 0usize;
            for &v in &clause.vars {
                idx <<= 1;
                if sigma >> v & 1 == 1 {
                    idx |= 1;
                }
            }
            weight *= clause.table[idx];
            if weight == Complex64::ZERO {
                break;
            }
        }
        if weight != Complex64::ZERO {
            total += weight * lambda.powu(sigma.count_ones());
        }
    }
    Ok(total)
}
