//! Boolean CSPs with an external field as a (1,1)-bounded family.
//!
//! The partition function is
//! `Z(lambda) = sum_sigma (prod_e phi_e(sigma|_e)) lambda^{|sigma|_1}`.
//! Over the co-occurrence dependency graph (one vertex per variable), the
//! subgraph coefficient of a variable subset `U` at order `ell` is the
//! product of the clause values at the assignment that sets `U` to one and
//! everything else to zero — when `|U| = ell`, and zero otherwise. Clause
//! tables must carry `phi(0,...,0) = 1` so the expansion starts at 1; fold
//! any global constant out of the instance before encoding it.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::family::BoundedFamily;
use crate::graph::{DependencyGraph, VertexLabel};
use crate::interpolate::{estimate, EstimateReport, GoodRegion};

/// One complex-valued constraint over a sorted list of Boolean variables.
///
/// `table[i]` is the clause value at the assignment whose bits spell `i`
/// in lexicographic order over `vars` (first variable most significant).
#[derive(Clone, Debug)]
pub struct CspClause {
    pub vars: Vec<u32>,
    pub table: Vec<Complex64>,
}

/// A (k,d)-formula: clauses of arity at most `k`, every variable in at
/// most `d` clauses.
#[derive(Clone, Debug)]
pub struct CspFormula {
    n_vars: usize,
    k: usize,
    d: usize,
    clauses: Vec<CspClause>,
    /// Clause indices touching each variable.
    var_clauses: Vec<Vec<usize>>,
}

impl CspFormula {
    pub fn new(n_vars: usize, k: usize, d: usize, clauses: Vec<CspClause>) -> Result<Self> {
        if k < 1 || d < 1 {
            return Err(Error::InvalidInput("k and d must be >= 1".into()));
        }
        let mut var_clauses = vec![Vec::new(); n_vars];
        for (ci, clause) in clauses.iter().enumerate() {
            if clause.vars.is_empty() || clause.vars.len() > k {
                return Err(Error::InvalidInput(format!(
                    "clause {ci} has arity {}, allowed 1..={k}",
                    clause.vars.len()
                )));
            }
            for w in clause.vars.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidInput(format!(
                        "clause {ci} variables must be sorted ascending without duplicates"
                    )));
                }
            }
            if clause.table.len() != 1 << clause.vars.len() {
                return Err(Error::InvalidInput(format!(
                    "clause {ci} table has {} entries, expected {}",
                    clause.table.len(),
                    1 << clause.vars.len()
                )));
            }
            if clause.table[0] != Complex64::ONE {
                return Err(Error::InvalidInput(format!(
                    "clause {ci} must satisfy phi(0,...,0) = 1; fold constants into a global \
                     prefactor instead"
                )));
            }
            for &v in &clause.vars {
                if v as usize >= n_vars {
                    return Err(Error::InvalidInput(format!(
                        "clause {ci} uses variable {v}, out of range for {n_vars} variables"
                    )));
                }
                var_clauses[v as usize].push(ci);
                if var_clauses[v as usize].len() > d {
                    return Err(Error::InvalidInput(format!(
                        "variable {v} appears in more than d = {d} clauses"
                    )));
                }
            }
        }
        Ok(CspFormula {
            n_vars,
            k,
            d,
            clauses,
            var_clauses,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn clauses(&self) -> &[CspClause] {
        &self.clauses
    }

    /// Dependency graph: one vertex per variable, edges between variables
    /// sharing a clause. The label of `v` is the sorted multiset of
    /// (clause table, v's position in the clause) over clauses containing
    /// `v`, serialized canonically.
    pub fn dependency_graph(&self) -> DependencyGraph {
        let labels: Vec<VertexLabel> = (0..self.n_vars)
            .map(|v| {
                let mut parts: Vec<Vec<u8>> = self.var_clauses[v]
                    .iter()
                    .map(|&ci| {
                        let clause = &self.clauses[ci];
                        let pos = clause.vars.binary_search(&(v as u32)).unwrap();
                        let mut bytes = Vec::with_capacity(8 + clause.table.len() * 16);
                        bytes.extend_from_slice(&(pos as u32).to_le_bytes());
                        bytes.extend_from_slice(&(clause.vars.len() as u32).to_le_bytes());
                        for e in &clause.table {
                            bytes.extend_from_slice(&round_fixed(e.re).to_le_bytes());
                            bytes.extend_from_slice(&round_fixed(e.im).to_le_bytes());
                        }
                        bytes
                    })
                    .collect();
                parts.sort();
                VertexLabel::new(parts.concat())
            })
            .collect();
        let mut edges = Vec::new();
        for clause in &self.clauses {
            for i in 0..clause.vars.len() {
                for j in (i + 1)..clause.vars.len() {
                    edges.push((clause.vars[i], clause.vars[j]));
                }
            }
        }
        let graph = DependencyGraph::new(labels, &edges)
            .expect("co-occurrence graph construction cannot fail");
        debug_assert!(graph.max_degree() <= (self.k - 1) * self.d);
        graph
    }

    /// Product over clauses touching `subset` of the clause value at the
    /// assignment setting `subset` to 1 and all other variables to 0.
    fn pinned_product(&self, subset: &[u32]) -> Complex64 {
        let mut touched: Vec<usize> = subset
            .iter()
            .flat_map(|&v| self.var_clauses[v as usize].iter().copied())
            .collect();
        touched.sort_unstable();
        touched.dedup();
        let mut prod = Complex64::ONE;
        for ci in touched {
            let clause = &self.clauses[ci];
            let mut idx = 0usize;
            for &v in &clause.vars {
                idx <<= 1;
                if subset.binary_search(&v).is_ok() {
                    idx |= 1;
                }
            }
            prod *= clause.table[idx];
        }
        prod
    }
}

fn round_fixed(x: f64) -> i64 {
    let scaled = (x * 1e14).round();
    if scaled >= i64::MAX as f64 {
        i64::MAX
    } else if scaled <= i64::MIN as f64 {
        i64::MIN
    } else {
        scaled as i64
    }
}

/// The formula's partition function as a (1,1)-bounded family.
pub struct CspFamily<'a> {
    formula: &'a CspFormula,
}

impl<'a> CspFamily<'a> {
    pub fn new(formula: &'a CspFormula) -> Self {
        CspFamily { formula }
    }
}

impl BoundedFamily for CspFamily<'_> {
    fn alpha(&self) -> usize {
        1
    }

    fn f0(&self, _n_vertices: usize) -> f64 {
        1.0
    }

    fn lambda_batch(&self, subset: &[u32], ell_max: usize) -> Result<Vec<Complex64>> {
        let mut out = vec![Complex64::ZERO; ell_max];
        let size = subset.len();
        if size >= 1 && size <= ell_max {
            out[size - 1] = self.formula.pinned_product(subset);
        }
        Ok(out)
    }
}

/// Estimates `Z(lambda_field)` within `eps` multiplicative error on a
/// caller-supplied region with zero-freeness bound `m_bound`.
pub fn estimate_csp(
    formula: &CspFormula,
    region: &GoodRegion,
    lambda_field: Complex64,
    eps: f64,
    delta: f64,
    m_bound: f64,
) -> Result<EstimateReport> {
    let family = CspFamily::new(formula);
    let graph = formula.dependency_graph();
    estimate(&family, &graph, region, lambda_field, eps, m_bound, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{log_taylor, zeta, ZetaTable};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one() -> Complex64 {
        Complex64::ONE
    }

    /// Hardcore (independent set) constraint on one edge.
    pub(crate) fn hardcore_edge(u: u32, v: u32) -> CspClause {
        CspClause {
            vars: vec![u, v],
            table: vec![one(), one(), one(), Complex64::ZERO],
        }
    }

    /// Hardcore model on the n-vertex path.
    pub(crate) fn hardcore_path(n: usize) -> CspFormula {
        let clauses = (1..n as u32).map(|v| hardcore_edge(v - 1, v)).collect();
        CspFormula::new(n, 2, 2, clauses).unwrap()
    }

    #[test]
    fn dependency_graph_shapes() {
        let single = CspFormula::new(2, 2, 1, vec![hardcore_edge(0, 1)]).unwrap();
        let g = single.dependency_graph();
        assert!(g.has_edge(0, 1));
        assert_eq!(g.max_degree(), 1);

        let empty = CspFormula::new(3, 2, 1, Vec::new()).unwrap();
        assert_eq!(empty.dependency_graph().max_degree(), 0);

        let tri = CspFormula::new(
            3,
            3,
            1,
            vec![CspClause {
                vars: vec![0, 1, 2],
                table: vec![one(); 8],
            }],
        )
        .unwrap();
        let g = tri.dependency_graph();
        assert!(g.has_edge(0, 1) && g.has_edge(1, 2) && g.has_edge(0, 2));
    }

    #[test]
    fn rejects_unnormalized_clause() {
        let bad = CspClause {
            vars: vec![0],
            table: vec![c(2.0, 0.0), one()],
        };
        assert!(CspFormula::new(1, 1, 1, vec![bad]).is_err());
    }

    #[test]
    fn lambda_examples() {
        // isolated variable: empty product
        let free = CspFormula::new(2, 2, 1, Vec::new()).unwrap();
        let fam = CspFamily::new(&free);
        assert_eq!(fam.lambda(&[0], 1).unwrap(), one());
        // size mismatch vanishes
        assert_eq!(fam.lambda(&[0], 2).unwrap(), Complex64::ZERO);

        let hc = hardcore_path(2);
        let fam = CspFamily::new(&hc);
        // both endpoints of a hardcore edge
        assert_eq!(fam.lambda(&[0, 1], 2).unwrap(), Complex64::ZERO);
        // one endpoint, the other pinned to 0
        assert_eq!(fam.lambda(&[0], 1).unwrap(), one());
    }

    #[test]
    fn zeta_of_single_vertex_at_order_two() {
        // f restricted to one vertex is 1 + z, so the order-2 log
        // coefficient is -1/2: lambda(v,2) = 0 and the single covering
        // pair L = T = {v} contributes (1/2) * zeta(v,1) * lambda(v,1)
        // with both factors 1.
        let hc = hardcore_path(2);
        let fam = CspFamily::new(&hc);
        let g = hc.dependency_graph();
        let mut cache = ZetaTable::new();
        let z2 = zeta(&fam, &g, &[0], 2, &mut cache).unwrap();
        assert!((z2 - c(-0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn log_taylor_free_variables_is_n_log_one_plus_z() {
        let free = CspFormula::new(4, 2, 1, Vec::new()).unwrap();
        let fam = CspFamily::new(&free);
        let g = free.dependency_graph();
        let series = log_taylor(&fam, &g, 6).unwrap();
        for ell in 1..=6usize {
            let expect = 4.0 * (-1.0f64).powi(ell as i32 + 1) / ell as f64;
            assert!(
                (series.coeff(ell) - c(expect, 0.0)).norm() < 1e-12,
                "ell={ell}"
            );
        }
    }

    #[test]
    fn hardcore_p4_low_coefficients() {
        // Z(lambda) = 1 + 4 lambda + 3 lambda^2 for the 4-path; check the
        // log series against Newton on the closed form.
        let hc = hardcore_path(4);
        let fam = CspFamily::new(&hc);
        let g = hc.dependency_graph();
        let m = 8;
        let series = log_taylor(&fam, &g, m).unwrap();
        let f =
            crate::series::TaylorSeries::from_real(&[1.0, 4.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let expect = f.newton_log().unwrap();
        for ell in 0..=m {
            assert!(
                (series.coeff(ell) - expect.coeff(ell)).norm() < 1e-10,
                "ell={ell}: {} vs {}",
                series.coeff(ell),
                expect.coeff(ell)
            );
        }
    }

    #[test]
    fn estimate_csp_hardcore_p4() {
        let hc = hardcore_path(4);
        let region = GoodRegion::disc(0.2, c(0.1, 0.0)).unwrap();
        let rep = estimate_csp(&hc, &region, c(0.1, 0.0), 1e-3, 0.4, 1.3).unwrap();
        let exact = 1.43;
        assert!(
            (rep.value.re / exact - 1.0).abs() < 1e-3,
            "{} vs {exact}",
            rep.value
        );
    }

    #[test]
    fn estimate_csp_free_spins() {
        // No clauses: Z = (1 + lambda)^n.
        let free = CspFormula::new(6, 2, 1, Vec::new()).unwrap();
        let x = c(0.3, 0.0);
        let region = GoodRegion::disc(0.5, x).unwrap();
        // |log (1+lambda)^6| on the disc of radius 0.5 is at most
        // 6 * |log(1 - 0.5)| < 4.2.
        let rep = estimate_csp(&free, &region, x, 1e-5, 0.35, 4.2).unwrap();
        let exact = 1.3f64.powi(6);
        assert!(
            (rep.value.re / exact - 1.0).abs() < 1e-5,
            "{} vs {exact}",
            rep.value
        );
    }

    #[test]
    fn single_unary_clause_polynomial() {
        // phi(0) = 1, phi(1) = w: Z = 1 + w lambda.
        let w = c(0.6, 0.1);
        let clause = CspClause {
            vars: vec![0],
            table: vec![one(), w],
        };
        let formula = CspFormula::new(1, 1, 1, vec![clause]).unwrap();
        let fam = CspFamily::new(&formula);
        let g = formula.dependency_graph();
        let series = log_taylor(&fam, &g, 6).unwrap();
        let reconstructed = series.exp();
        assert!((reconstructed.coeff(0) - one()).norm() < 1e-12);
        assert!((reconstructed.coeff(1) - w).norm() < 1e-12);
        for ell in 2..=6 {
            assert!(reconstructed.coeff(ell).norm() < 1e-12, "ell={ell}");
        }
    }
}
