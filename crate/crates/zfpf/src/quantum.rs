//! (k,d)-local Hamiltonians under tensorized measurement: the bounded
//! family feeding the coefficient engine, the high-temperature estimator,
//! and the Gibbs measurement sampler.
//!
//! The model works with `Z(beta) = Tr[exp(-beta H) O]`. Term subsets map
//! to a dependency graph (one vertex per term, edges between overlapping
//! supports), and the subgraph coefficient of a term subset `U` at order
//! `ell` is
//!
//! ```text
//! lambda(U, ell) = (-1)^ell / ell! * Tr[H_{U,ell} O_R] / Tr[O_R]
//! ```
//!
//! with `H_{U,ell}` the sum over surjections of `[ell]` onto `U` of the
//! ordered term products, computed by the subset-by-order dynamic program
//! `H_{S,ell} = sum_{j in S} H_j (H_{S,ell-1} + H_{S\{j},ell-1})` on
//! matrices over `R`, the union of the supports involved. Everything is
//! scaled by `1/ell` per layer so the table carries `H_{S,ell}/ell!`
//! directly and stays bounded at large orders.

use std::collections::HashMap;
use std::sync::Mutex;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::family::BoundedFamily;
use crate::graph::{DependencyGraph, VertexLabel};
use crate::interpolate::{estimate, EstimateReport, GoodRegion};
use crate::linalg::{
    hermitian_defect, hermitian_eigenvalues, hermitian_spectral_norm, identity, tensor_trace,
    CMatrix, EmbeddedOp,
};

/// Default cap on the row count `q^|R|` of the lambda DP matrices.
pub const DEFAULT_MATRIX_CAP: usize = 1 << 14;

/// Hard ceiling on term-subset size in one DP run.
const DP_SUBSET_LIMIT: usize = 16;

/// Ceiling on total DP table entries (two layers of `2^|S|` matrices).
const DP_ENTRY_LIMIT: u128 = 1 << 26;

const HERMITIAN_TOL: f64 = 1e-12;

/// One Hermitian term of a local Hamiltonian.
///
/// The matrix is `q^s x q^s` for a support of `s` sites, indexed
/// lexicographically over the support's site values (first support site
/// most significant).
#[derive(Clone, Debug)]
pub struct LocalTerm {
    support: Vec<u32>,
    matrix: CMatrix,
}

impl LocalTerm {
    pub fn new(support: Vec<u32>, matrix: CMatrix, q: usize) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidInput("term with empty support".into()));
        }
        for w in support.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidInput(
                    "term support must be sorted ascending without duplicates".into(),
                ));
            }
        }
        let dim = q
            .checked_pow(support.len() as u32)
            .ok_or_else(|| Error::Capability("term dimension overflows".into()))?;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::InvalidInput(format!(
                "term on {} sites needs a {dim}x{dim} matrix, got {}x{}",
                support.len(),
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if hermitian_defect(&matrix) > HERMITIAN_TOL {
            return Err(Error::InvalidInput(
                "term matrix is not Hermitian within 1e-12".into(),
            ));
        }
        Ok(LocalTerm { support, matrix })
    }

    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

/// A (k,d)-local Hamiltonian: every term on at most `k` sites, every site
/// in at most `d` terms.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    q: usize,
    n_sites: usize,
    k: usize,
    d: usize,
    terms: Vec<LocalTerm>,
}

impl Hamiltonian {
    pub fn new(
        q: usize,
        n_sites: usize,
        k: usize,
        d: usize,
        terms: Vec<LocalTerm>,
    ) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidInput("local dimension q must be >= 2".into()));
        }
        if k < 1 || d < 1 {
            return Err(Error::InvalidInput("k and d must be >= 1".into()));
        }
        let mut degree = vec![0usize; n_sites];
        for term in &terms {
            if term.support.len() > k {
                return Err(Error::InvalidInput(format!(
                    "term support size {} exceeds k = {k}",
                    term.support.len()
                )));
            }
            for &v in &term.support {
                if v as usize >= n_sites {
                    return Err(Error::InvalidInput(format!(
                        "term site {v} out of range for {n_sites} sites"
                    )));
                }
                degree[v as usize] += 1;
                if degree[v as usize] > d {
                    return Err(Error::InvalidInput(format!(
                        "site {v} appears in more than d = {d} terms"
                    )));
                }
            }
        }
        Ok(Hamiltonian {
            q,
            n_sites,
            k,
            d,
            terms,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn terms(&self) -> &[LocalTerm] {
        &self.terms
    }

    /// Largest spectral norm among the terms (0 when there are none);
    /// computed from the matrices rather than trusted from the input.
    pub fn term_norm_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| hermitian_spectral_norm(&t.matrix))
            .fold(0.0, f64::max)
    }

    /// Dependency graph: one vertex per term, an edge whenever two
    /// supports intersect. The label encodes the support size and the
    /// matrix entries rounded at 1e-14.
    pub fn dependency_graph(&self) -> DependencyGraph {
        let labels: Vec<VertexLabel> = self
            .terms
            .iter()
            .map(|t| {
                let mut bytes = Vec::with_capacity(4 + t.matrix.len() * 16);
                bytes.extend_from_slice(&(t.support.len() as u32).to_le_bytes());
                for i in 0..t.matrix.nrows() {
                    for j in 0..t.matrix.ncols() {
                        let e = t.matrix[(i, j)];
                        bytes.extend_from_slice(&round_fixed(e.re).to_le_bytes());
                        bytes.extend_from_slice(&round_fixed(e.im).to_le_bytes());
                    }
                }
                VertexLabel::new(bytes)
            })
            .collect();
        let mut edges = Vec::new();
        for x in 0..self.terms.len() {
            for y in (x + 1)..self.terms.len() {
                if supports_intersect(&self.terms[x].support, &self.terms[y].support) {
                    edges.push((x as u32, y as u32));
                }
            }
        }
        let graph =
            DependencyGraph::new(labels, &edges).expect("term graph construction cannot fail");
        // <= k sites each shared with <= d-1 other terms
        debug_assert!(graph.max_degree() <= self.k * self.d);
        graph
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

fn supports_intersect(a: &[u32], b: &[u32]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// A positive operator factorizing over sites.
#[derive(Clone, Debug)]
pub enum TensorizedMeasurement {
    /// The identity on every site.
    Identity,
    /// One `q x q` factor per site.
    Sites(Vec<CMatrix>),
}

impl TensorizedMeasurement {
    /// Checks shapes, Hermiticity, positive semidefiniteness and positive
    /// trace of every factor.
    pub fn validate(&self, q: usize, n_sites: usize) -> Result<()> {
        let TensorizedMeasurement::Sites(sites) = self else {
            return Ok(());
        };
        if sites.len() != n_sites {
            return Err(Error::InvalidInput(format!(
                "measurement has {} site factors, expected {n_sites}",
                sites.len()
            )));
        }
        for (v, m) in sites.iter().enumerate() {
            if m.nrows() != q || m.ncols() != q {
                return Err(Error::InvalidInput(format!(
                    "measurement factor at site {v} is not {q}x{q}"
                )));
            }
            if hermitian_defect(m) > HERMITIAN_TOL {
                return Err(Error::InvalidInput(format!(
                    "measurement factor at site {v} is not Hermitian within 1e-12"
                )));
            }
            let eigs = hermitian_eigenvalues(m);
            if eigs.first().copied().unwrap_or(0.0) < -HERMITIAN_TOL {
                return Err(Error::InvalidInput(format!(
                    "measurement factor at site {v} is not positive semidefinite"
                )));
            }
            let tr: f64 = (0..q).map(|i| m[(i, i)].re).sum();
            if tr <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "measurement factor at site {v} has non-positive trace"
                )));
            }
        }
        Ok(())
    }

    /// Site factor, `None` meaning the identity.
    pub fn site(&self, v: u32) -> Option<&CMatrix> {
        match self {
            TensorizedMeasurement::Identity => None,
            TensorizedMeasurement::Sites(sites) => Some(&sites[v as usize]),
        }
    }

    pub fn site_trace(&self, v: u32, q: usize) -> f64 {
        match self.site(v) {
            None => q as f64,
            Some(m) => (0..q).map(|i| m[(i, i)].re).sum(),
        }
    }

    /// `Tr[O] = prod_v Tr[O_v]`.
    pub fn total_trace(&self, q: usize, n_sites: usize) -> f64 {
        (0..n_sites as u32).map(|v| self.site_trace(v, q)).product()
    }
}

/// A computational-basis assignment of all sites.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SiteAssignment(pub Vec<u32>);

impl SiteAssignment {
    /// Index of the assignment in the big-endian site order used by the
    /// dense oracle (site 0 most significant).
    pub fn basis_index(&self, q: usize) -> usize {
        self.0.iter().fold(0, |acc, &j| acc * q + j as usize)
    }
}

/// Zero-free radius `1/(5 e d k h)` inside which the log of the
/// normalized partition function stays bounded by the site count.
pub fn beta0(k: usize, d: usize, h: f64) -> f64 {
    1.0 / (5.0 * std::f64::consts::E * d as f64 * k as f64 * h)
}

// ---------------------------------------------------------------------------
// The quantum bounded family
// ---------------------------------------------------------------------------

/// `Z_{H,O}(z) / Tr[O]` as a (1, 2q^{3k})-bounded family over the term
/// dependency graph. Vertex subsets are term-index subsets; lambda values
/// are memoized, and one DP run fills every subset of its top set.
pub struct QuantumFamily<'a> {
    ham: &'a Hamiltonian,
    meas: &'a TensorizedMeasurement,
    matrix_cap: usize,
    cache: Mutex<HashMap<Vec<u32>, Vec<Complex64>>>,
}

impl<'a> QuantumFamily<'a> {
    pub fn new(
        ham: &'a Hamiltonian,
        meas: &'a TensorizedMeasurement,
        matrix_cap: usize,
    ) -> Result<Self> {
        meas.validate(ham.q, ham.n_sites)?;
        Ok(QuantumFamily {
            ham,
            meas,
            matrix_cap,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Runs the subset-by-order DP for `subset` (sorted term indices) up
    /// to order `ell_max` and caches lambda values for every nonempty
    /// subset of it.
    fn run_dp(&self, subset: &[u32], ell_max: usize) -> Result<()> {
        let t = subset.len();
        if t > DP_SUBSET_LIMIT {
            return Err(Error::Capability(format!(
                "lambda DP over {t} terms exceeds the {DP_SUBSET_LIMIT}-term limit"
            )));
        }
        let q = self.ham.q;
        let mut r_sites: Vec<u32> = subset
            .iter()
            .flat_map(|&x| self.ham.terms[x as usize].support.iter().copied())
            .collect();
        r_sites.sort_unstable();
        r_sites.dedup();
        let dim = q
            .checked_pow(r_sites.len() as u32)
            .filter(|&d| d <= self.matrix_cap)
            .ok_or_else(|| {
                Error::Capability(format!(
                    "q^|R| = {q}^{} exceeds the matrix cap {}",
                    r_sites.len(),
                    self.matrix_cap
                ))
            })?;
        let n_masks = 1usize << t;
        if 2 * (n_masks as u128) * (dim as u128) * (dim as u128) > DP_ENTRY_LIMIT {
            return Err(Error::Capability(
                "lambda DP table would exceed the entry cap".into(),
            ));
        }

        let ops: Vec<EmbeddedOp> = subset
            .iter()
            .map(|&x| {
                let term = &self.ham.terms[x as usize];
                EmbeddedOp::new(&term.matrix, &term.support, &r_sites, q)
            })
            .collect();
        let site_ops: Vec<Option<&CMatrix>> = r_sites.iter().map(|&v| self.meas.site(v)).collect();
        let tr_o: f64 = r_sites
            .iter()
            .map(|&v| self.meas.site_trace(v, q))
            .product();

        let mut lambdas: Vec<Vec<Complex64>> = vec![vec![Complex64::ZERO; ell_max]; n_masks];
        let mut prev: Vec<Option<CMatrix>> = vec![None; n_masks];
        prev[0] = Some(identity(dim));
        let mut summed = CMatrix::zeros(dim, dim);
        let mut applied = CMatrix::zeros(dim, dim);
        for ell in 1..=ell_max {
            let mut cur: Vec<Option<CMatrix>> = vec![None; n_masks];
            let sign = if ell % 2 == 0 { 1.0 } else { -1.0 };
            for mask in 1..n_masks {
                if mask.count_ones() as usize > ell {
                    continue;
                }
                let mut acc = CMatrix::zeros(dim, dim);
                let mut nonzero = false;
                let mut bits = mask;
                while bits != 0 {
                    let x = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    let without = mask & !(1 << x);
                    let a = prev[mask].as_ref();
                    let b = prev[without].as_ref();
                    if a.is_none() && b.is_none() {
                        continue;
                    }
                    match (a, b) {
                        (Some(a), Some(b)) => {
                            summed.copy_from(a);
                            summed += b;
                        }
                        (Some(a), None) => summed.copy_from(a),
                        (None, Some(b)) => summed.copy_from(b),
                        (None, None) => unreachable!(),
                    }
                    ops[x].apply_left(&summed, &mut applied);
                    acc += &applied;
                    nonzero = true;
                }
                if !nonzero {
                    continue;
                }
                acc.scale_mut(1.0 / ell as f64);
                lambdas[mask][ell - 1] = tensor_trace(&acc, &site_ops, q) * (sign / tr_o);
                cur[mask] = Some(acc);
            }
            prev = cur;
        }

        let mut cache = self.cache.lock().expect("lambda cache poisoned");
        let mut key = Vec::with_capacity(t);
        for mask in 1..n_masks {
            key.clear();
            let mut bits = mask;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                key.push(subset[i]);
            }
            let known = cache.get(key.as_slice()).map(Vec::len).unwrap_or(0);
            if known < ell_max {
                cache.insert(key.clone(), std::mem::take(&mut lambdas[mask]));
            }
        }
        Ok(())
    }
}

impl BoundedFamily for QuantumFamily<'_> {
    fn alpha(&self) -> usize {
        1
    }

    fn f0(&self, _n_vertices: usize) -> f64 {
        1.0
    }

    fn lambda_batch(&self, subset: &[u32], ell_max: usize) -> Result<Vec<Complex64>> {
        if subset.is_empty() {
            return Ok(vec![Complex64::ZERO; ell_max]);
        }
        // lambda vanishes below |S| anyway; a subset larger than the order
        // never needs a DP run.
        if subset.len() > ell_max {
            return Ok(vec![Complex64::ZERO; ell_max]);
        }
        {
            let cache = self.cache.lock().expect("lambda cache poisoned");
            if let Some(hit) = cache.get(subset) {
                if hit.len() >= ell_max {
                    return Ok(hit[..ell_max].to_vec());
                }
            }
        }
        self.run_dp(subset, ell_max)?;
        let cache = self.cache.lock().expect("lambda cache poisoned");
        Ok(cache.get(subset).expect("just filled")[..ell_max].to_vec())
    }
}

// ---------------------------------------------------------------------------
// High-temperature estimator
// ---------------------------------------------------------------------------

/// Estimates `Z_{H,O}(beta) = Tr[exp(-beta H) O]` within `eps`
/// multiplicative error for `|beta| <= (1-delta) beta0`, interpolating on
/// the zero-free disc of radius `beta0` with log bound `M = n`.
pub fn estimate_partition(
    ham: &Hamiltonian,
    meas: &TensorizedMeasurement,
    beta: Complex64,
    eps: f64,
    delta: f64,
    matrix_cap: usize,
) -> Result<EstimateReport> {
    meas.validate(ham.q, ham.n_sites)?;
    let trace = meas.total_trace(ham.q, ham.n_sites);
    let h = ham.term_norm_bound();
    if h == 0.0 {
        // exp(-beta H) is the identity; the partition function is Tr[O].
        let value = Complex64::new(trace, 0.0);
        return Ok(EstimateReport {
            value,
            log_value: Complex64::new(trace.ln(), 0.0),
            order: 0,
            truncation_bound: 0.0,
            elapsed_ms: 0.0,
        });
    }
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::Domain("delta must lie in (0,1)".into()));
    }
    let radius = beta0(ham.k, ham.d, h);
    if beta.norm() > (1.0 - delta) * radius * (1.0 + 1e-12) {
        return Err(Error::OutOfRegime(format!(
            "|beta| = {} exceeds (1-delta) * beta0 = {}",
            beta.norm(),
            (1.0 - delta) * radius
        )));
    }
    let region = GoodRegion::disc(radius, beta)?;
    let family = QuantumFamily::new(ham, meas, matrix_cap)?;
    let graph = ham.dependency_graph();
    let mut report = estimate(
        &family,
        &graph,
        &region,
        beta,
        eps,
        ham.n_sites as f64,
        delta,
    )?;
    report.value *= trace;
    report.log_value += Complex64::new(trace.ln(), 0.0);
    Ok(report)
}

// ---------------------------------------------------------------------------
// Gibbs measurement sampler
// ---------------------------------------------------------------------------

/// Site-by-site self-reduction sampler for the computational-basis
/// distribution of the Gibbs state `exp(-beta H) / Z`.
///
/// Per-prefix conditional weights are cached, so drawing many samples
/// from one instance amortizes the estimator calls.
pub struct GibbsSampler<'a> {
    ham: &'a Hamiltonian,
    beta: f64,
    delta: f64,
    eps0: f64,
    matrix_cap: usize,
    weights: HashMap<Vec<u32>, Vec<f64>>,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(
        ham: &'a Hamiltonian,
        beta: f64,
        eps: f64,
        delta: f64,
        matrix_cap: usize,
    ) -> Result<Self> {
        if ham.n_sites == 0 {
            return Err(Error::InvalidInput("cannot sample zero sites".into()));
        }
        if !(0.0 < eps && eps < 1.0) || !(0.0 < delta && delta < 1.0) {
            return Err(Error::Domain("eps and delta must lie in (0,1)".into()));
        }
        if beta <= 0.0 {
            return Err(Error::Domain("beta must be a positive real".into()));
        }
        let h = ham.term_norm_bound();
        if h > 0.0 && beta > (1.0 - delta) * beta0(ham.k, ham.d, h) * (1.0 + 1e-12) {
            return Err(Error::OutOfRegime(format!(
                "beta = {beta} exceeds (1-delta) * beta0 = {}",
                (1.0 - delta) * beta0(ham.k, ham.d, h)
            )));
        }
        let eps0 = eps / (10.0 * ham.n_sites as f64);
        Ok(GibbsSampler {
            ham,
            beta,
            delta,
            eps0,
            matrix_cap,
            weights: HashMap::new(),
        })
    }

    /// Clamped estimates of `Z_{H, O_prefix M_{v,j}}(beta)` for
    /// `j = 0..q`, where `v = prefix.len()` is the next site to fix.
    pub fn site_weights(&mut self, prefix: &[u32]) -> Result<Vec<f64>> {
        if let Some(w) = self.weights.get(prefix) {
            return Ok(w.clone());
        }
        let q = self.ham.q;
        let v = prefix.len();
        let mut row = Vec::with_capacity(q);
        for j in 0..q as u32 {
            let meas = prefix_measurement(self.ham, prefix, Some(j));
            let est = estimate_partition(
                self.ham,
                &meas,
                Complex64::new(self.beta, 0.0),
                self.eps0,
                self.delta,
                self.matrix_cap,
            )?;
            row.push(est.value.re.max(0.0));
        }
        if row.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Numeric(format!(
                "all conditional weights clamped to zero at site {v}"
            )));
        }
        self.weights.insert(prefix.to_vec(), row.clone());
        Ok(row)
    }

    /// Draws one assignment; the RNG is consumed in site order with one
    /// uniform draw per site (inverse CDF over the clamped weights).
    pub fn sample(&mut self, rng: &mut ChaCha12Rng) -> Result<SiteAssignment> {
        let n = self.ham.n_sites;
        let mut sigma: Vec<u32> = Vec::with_capacity(n);
        for _ in 0..n {
            let row = self.site_weights(&sigma)?;
            let total: f64 = row.iter().sum();
            let u: f64 = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (j, &w) in row.iter().enumerate() {
                acc += w;
                if u < acc {
                    chosen = Some(j as u32);
                    break;
                }
            }
            let j = chosen.unwrap_or_else(|| {
                // u landed on the far edge; take the last positive weight.
                row.iter().rposition(|&w| w > 0.0).unwrap() as u32
            });
            sigma.push(j);
        }
        Ok(SiteAssignment(sigma))
    }
}

/// Measurement fixing `prefix` (and optionally value `next` at the
/// following site) with the identity on every later site.
fn prefix_measurement(
    ham: &Hamiltonian,
    prefix: &[u32],
    next: Option<u32>,
) -> TensorizedMeasurement {
    let q = ham.q;
    let mut sites = Vec::with_capacity(ham.n_sites);
    for &j in prefix.iter().chain(next.iter()) {
        let mut proj = CMatrix::zeros(q, q);
        proj[(j as usize, j as usize)] = Complex64::ONE;
        sites.push(proj);
    }
    while sites.len() < ham.n_sites {
        sites.push(identity(q));
    }
    TensorizedMeasurement::Sites(sites)
}

/// One seeded sample from the Gibbs measurement distribution, within
/// `eps` total variation when `0 < beta <= (1-delta) beta0`.
pub fn sample_gibbs(
    ham: &Hamiltonian,
    beta: f64,
    eps: f64,
    seed: u64,
    delta: f64,
    matrix_cap: usize,
) -> Result<SiteAssignment> {
    let mut sampler = GibbsSampler::new(ham, beta, eps, delta, matrix_cap)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    sampler.sample(&mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::log_taylor;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub(crate) fn pauli_z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
    }

    fn single_z() -> Hamiltonian {
        Hamiltonian::new(
            2,
            1,
            1,
            1,
            vec![LocalTerm::new(vec![0], pauli_z(), 2).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn dependency_graph_edges_follow_support_overlap() {
        let zz = pauli_z().kronecker(&pauli_z());
        let terms = vec![
            LocalTerm::new(vec![0, 1], zz.clone(), 2).unwrap(),
            LocalTerm::new(vec![1, 2], zz.clone(), 2).unwrap(),
            LocalTerm::new(vec![3, 4], zz, 2).unwrap(),
        ];
        let ham = Hamiltonian::new(2, 5, 2, 2, terms).unwrap();
        let g = ham.dependency_graph();
        assert_eq!(g.vertex_count(), 3);
        assert!(g.has_edge(0, 1));
        assert!(!g.has_edge(0, 2));
        assert!(!g.has_edge(1, 2));
        // identical matrices and support sizes give identical labels
        assert_eq!(g.label(0), g.label(2));
    }

    #[test]
    fn d1_hamiltonian_has_edgeless_graph() {
        let terms = vec![
            LocalTerm::new(vec![0], pauli_z(), 2).unwrap(),
            LocalTerm::new(vec![1], pauli_z(), 2).unwrap(),
        ];
        let ham = Hamiltonian::new(2, 2, 1, 1, terms).unwrap();
        assert_eq!(ham.dependency_graph().max_degree(), 0);
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        let x_nonherm =
            CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(LocalTerm::new(vec![0], x_nonherm, 2).is_err());
        // support too large for k
        let zz = pauli_z().kronecker(&pauli_z());
        let t = LocalTerm::new(vec![0, 1], zz, 2).unwrap();
        assert!(Hamiltonian::new(2, 2, 1, 2, vec![t.clone()]).is_err());
        // degree bound
        let t1 = LocalTerm::new(vec![0], pauli_z(), 2).unwrap();
        let t2 = LocalTerm::new(vec![0], pauli_z(), 2).unwrap();
        assert!(Hamiltonian::new(2, 1, 1, 1, vec![t1, t2]).is_err());
        // non-PSD measurement
        let meas = TensorizedMeasurement::Sites(vec![pauli_z()]);
        assert!(meas.validate(2, 1).is_err());
    }

    #[test]
    fn single_site_lambda_values() {
        let ham = single_z();
        let family = QuantumFamily::new(&ham, &TensorizedMeasurement::Identity, 1 << 14).unwrap();
        let batch = family.lambda_batch(&[0], 4).unwrap();
        // -Tr(Z)/2 = 0; Tr(Z^2)/(2! * 2) = 1/2; 0; Tr(Z^4)/(4! * 2) = 1/24
        assert!(batch[0].norm() < 1e-15);
        assert!((batch[1] - c(0.5, 0.0)).norm() < 1e-14);
        assert!(batch[2].norm() < 1e-15);
        assert!((batch[3] - c(1.0 / 24.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn log_taylor_matches_log_cosh() {
        // f(z) = Tr[exp(-zZ)]/2 = cosh z; log f = z^2/2 - z^4/12 + ...
        let ham = single_z();
        let family = QuantumFamily::new(&ham, &TensorizedMeasurement::Identity, 1 << 14).unwrap();
        let g = ham.dependency_graph();
        let series = log_taylor(&family, &g, 4).unwrap();
        let expected = [0.0, 0.0, 0.5, 0.0, -1.0 / 12.0];
        for (k, &e) in expected.iter().enumerate() {
            assert!(
                (series.coeff(k) - c(e, 0.0)).norm() < 1e-12,
                "k={k}: {}",
                series.coeff(k)
            );
        }
    }

    #[test]
    fn lambda_is_label_determined_across_isomorphic_blocks() {
        // Two byte-identical term blocks on disjoint sites: coefficients
        // of corresponding subsets must agree bit for bit.
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.3, 0.0), c(0.2, -0.4), c(0.2, 0.4), c(-0.6, 0.0)],
        );
        let zz = pauli_z().kronecker(&pauli_z());
        let terms = vec![
            LocalTerm::new(vec![0, 1], zz.clone(), 2).unwrap(), // t0
            LocalTerm::new(vec![1], a.clone(), 2).unwrap(),     // t1
            LocalTerm::new(vec![3, 4], zz, 2).unwrap(),         // t2 = t0 shifted
            LocalTerm::new(vec![4], a, 2).unwrap(),             // t3 = t1 shifted
        ];
        let ham = Hamiltonian::new(2, 6, 2, 2, terms).unwrap();
        let g = ham.dependency_graph();
        assert_eq!(g.label(0), g.label(2));
        assert_eq!(g.label(1), g.label(3));
        let family = QuantumFamily::new(&ham, &TensorizedMeasurement::Identity, 1 << 14).unwrap();
        for ell in 1..=5usize {
            assert_eq!(
                family.lambda(&[0], ell).unwrap(),
                family.lambda(&[2], ell).unwrap()
            );
            assert_eq!(
                family.lambda(&[0, 1], ell).unwrap(),
                family.lambda(&[2, 3], ell).unwrap()
            );
        }
    }

    #[test]
    fn estimate_normalized_partition_on_half_disc() {
        // f(z) = cosh z for a single Pauli-Z site; query at 0.25 on the
        // disc of radius 0.5 with |log cosh| <= 1 there.
        let ham = single_z();
        let family = QuantumFamily::new(&ham, &TensorizedMeasurement::Identity, 1 << 14).unwrap();
        let graph = ham.dependency_graph();
        let x = c(0.25, 0.0);
        let region = crate::interpolate::GoodRegion::disc(0.5, x).unwrap();
        let rep = estimate(&family, &graph, &region, x, 1e-3, 1.0, 0.5).unwrap();
        let exact = 0.25f64.cosh();
        assert!((exact - 1.0314131).abs() < 1e-7);
        assert!(
            (rep.value.re / exact - 1.0).abs() <= 1e-3,
            "{} vs {exact}",
            rep.value
        );
    }

    #[test]
    fn first_order_lambda_is_normalized_trace() {
        // lambda({x}, 1) = -Tr[A O_R] / Tr[O_R].
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.4, 0.0), c(0.1, -0.3), c(0.1, 0.3), c(-0.9, 0.0)],
        );
        let ham = Hamiltonian::new(
            2,
            1,
            1,
            1,
            vec![LocalTerm::new(vec![0], a.clone(), 2).unwrap()],
        )
        .unwrap();
        let o =
            CMatrix::from_row_slice(2, 2, &[c(0.8, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(0.5, 0.0)]);
        let meas = TensorizedMeasurement::Sites(vec![o.clone()]);
        let family = QuantumFamily::new(&ham, &meas, 1 << 14).unwrap();
        let got = family.lambda(&[0], 1).unwrap();
        let expect = -(&a * &o).trace() / o.trace();
        assert!((got - expect).norm() < 1e-14, "{got} vs {expect}");
    }

    #[test]
    fn zero_hamiltonian_sampler_is_uniform() {
        // H = 0 factorizes to the uniform distribution; chi-square over
        // the 8 cells at significance 0.01 (7 degrees of freedom).
        let ham = Hamiltonian::new(2, 3, 2, 2, Vec::new()).unwrap();
        let mut sampler = GibbsSampler::new(&ham, 0.05, 0.1, 0.1, 1 << 14).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let samples = 10_000usize;
        let mut counts = [0usize; 8];
        for _ in 0..samples {
            let sigma = sampler.sample(&mut rng).unwrap();
            counts[sigma.basis_index(2)] += 1;
        }
        let expected = samples as f64 / 8.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 0.99 quantile of chi-square with 7 degrees of freedom
        assert!(chi2 < 18.475, "chi2 = {chi2}");
    }

    #[test]
    fn beta0_formula() {
        assert!((beta0(2, 2, 1.0) - 1.0 / (20.0 * std::f64::consts::E)).abs() < 1e-15);
        assert!((beta0(1, 1, 1.0) - 1.0 / (5.0 * std::f64::consts::E)).abs() < 1e-15);
        assert!(beta0(1, 1, 1e9) < 1e-9);
    }

    #[test]
    fn estimate_partition_zero_hamiltonian() {
        let ham = Hamiltonian::new(2, 3, 2, 2, Vec::new()).unwrap();
        let rep = estimate_partition(
            &ham,
            &TensorizedMeasurement::Identity,
            c(0.7, -0.3),
            1e-3,
            0.1,
            1 << 14,
        )
        .unwrap();
        assert!((rep.value - c(8.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn estimate_partition_single_z() {
        let ham = single_z();
        let rep = estimate_partition(
            &ham,
            &TensorizedMeasurement::Identity,
            c(0.01, 0.0),
            1e-4,
            0.5,
            1 << 14,
        )
        .unwrap();
        let exact = 2.0 * (0.01f64).cosh();
        assert!(
            (rep.value.re / exact - 1.0).abs() < 1e-4,
            "{} vs {exact}",
            rep.value
        );
        assert!(rep.value.im.abs() < 1e-10);
    }

    #[test]
    fn estimate_partition_rejects_out_of_regime_beta() {
        let ham = single_z();
        let b0 = beta0(1, 1, 1.0);
        let err = estimate_partition(
            &ham,
            &TensorizedMeasurement::Identity,
            c(b0, 0.0),
            1e-3,
            0.5,
            1 << 14,
        )
        .unwrap_err();
        assert!(matches!(err, Error::OutOfRegime(_)));
    }

    #[test]
    fn sampler_two_level_marginal() {
        // Pr[0] = e^{-beta} / (2 cosh beta) at beta = 0.05.
        let ham = single_z();
        let mut sampler = GibbsSampler::new(&ham, 0.05, 0.01, 0.1, 1 << 14).unwrap();
        let w = sampler.site_weights(&[]).unwrap();
        let p0 = w[0] / (w[0] + w[1]);
        let exact = (-0.05f64).exp() / (2.0 * (0.05f64).cosh());
        assert!((p0 - exact).abs() < 1e-4, "{p0} vs {exact}");
        assert!((exact - 0.47502).abs() < 1e-5);
    }

    #[test]
    fn sampler_is_seed_deterministic() {
        let zz = pauli_z().kronecker(&pauli_z());
        let terms = vec![
            LocalTerm::new(vec![0, 1], zz.clone(), 2).unwrap(),
            LocalTerm::new(vec![1, 2], zz, 2).unwrap(),
        ];
        let ham = Hamiltonian::new(2, 3, 2, 2, terms).unwrap();
        let b = 0.9 * (1.0 - 0.1) * beta0(2, 2, 1.0);
        let a = sample_gibbs(&ham, b, 0.2, 42, 0.1, 1 << 14).unwrap();
        let bb = sample_gibbs(&ham, b, 0.2, 42, 0.1, 1 << 14).unwrap();
        assert_eq!(a, bb);
    }
}
