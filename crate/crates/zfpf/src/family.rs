//! The bounded-family contract and the cluster-coefficient engine.
//!
//! A model plugs into the engine by describing itself as a family of
//! functions over dependency graphs: an integer `alpha`, the value at the
//! origin, and induced-subgraph coefficients `lambda(S, ell)` supported on
//! `|S| <= alpha * ell`. The engine turns those into the Taylor
//! coefficients of `log f_G` through the recurrence
//!
//! ```text
//! zeta(S, ell) = lambda(S, ell)
//!              - sum_{s=1}^{ell-1} (s/ell) sum_{L u T = S} zeta(L, s) * lambda(T, ell-s)
//! ```
//!
//! where the inner sum runs over ordered pairs of subsets covering `S`.
//! Only connected subsets carry nonzero `zeta`, so the `ell`-th log
//! coefficient is the sum of `zeta(S, ell)` over the connected subsets of
//! size at most `alpha * ell`, in the enumeration's fixed index order.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{enumerate_connected_subsets, DependencyGraph};
use crate::series::TaylorSeries;

/// Largest subset size the covering-pair enumeration accepts; beyond this
/// the 2^|S| tables stop being desk-scale.
const MASK_LIMIT: usize = 24;

/// Cap on transient lambda-table entries per subset (entries, not bytes).
const LAMBDA_TABLE_LIMIT: usize = 1 << 24;

/// Subset count per size class above which zeta columns are computed on
/// the worker pool.
const PAR_THRESHOLD: usize = 64;

/// Contract a model must satisfy to plug into the coefficient engine.
///
/// Implementations must be safe for concurrent read-only evaluation; the
/// engine may call `lambda_batch` from several workers at once.
pub trait BoundedFamily: Sync {
    /// The support constant: `lambda(S, ell)` must vanish whenever
    /// `|S| > alpha * ell`.
    fn alpha(&self) -> usize;

    /// `f_G(0)` for a host graph on `n_vertices` vertices; must be
    /// positive.
    fn f0(&self, n_vertices: usize) -> f64;

    /// `lambda(S, ell)` for `ell = 1..=ell_max`, as a vector indexed by
    /// `ell - 1`. `subset` is a sorted vertex list of the host graph.
    fn lambda_batch(&self, subset: &[u32], ell_max: usize) -> Result<Vec<Complex64>>;

    /// Single coefficient `lambda(S, ell)`.
    fn lambda(&self, subset: &[u32], ell: usize) -> Result<Complex64> {
        Ok(self.lambda_batch(subset, ell)?[ell - 1])
    }
}

impl<F: BoundedFamily + ?Sized> BoundedFamily for &F {
    fn alpha(&self) -> usize {
        (**self).alpha()
    }
    fn f0(&self, n_vertices: usize) -> f64 {
        (**self).f0(n_vertices)
    }
    fn lambda_batch(&self, subset: &[u32], ell_max: usize) -> Result<Vec<Complex64>> {
        (**self).lambda_batch(subset, ell_max)
    }
}

// ---------------------------------------------------------------------------
// Zeta memo table
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct ZetaColumn {
    /// Smallest order with a stored entry: `ceil(|S| / alpha)`.
    min_ell: usize,
    /// Values for `ell = min_ell, min_ell + 1, ...`.
    values: Vec<Complex64>,
}

impl ZetaColumn {
    fn computed_to(&self) -> usize {
        self.min_ell + self.values.len() - 1
    }

    fn at(&self, ell: usize) -> Complex64 {
        if ell < self.min_ell {
            Complex64::ZERO
        } else {
            self.values[ell - self.min_ell]
        }
    }
}

/// Memo table mapping (connected vertex subset, order) to `zeta` values.
///
/// Structural zeros are stored implicitly: disconnected subsets never get
/// an entry, and neither do orders with `|S| > alpha * ell`. Entries are
/// keyed by subset only, so a table must not be reused across different
/// families or host graphs.
#[derive(Default)]
pub struct ZetaTable {
    ids: HashMap<Vec<u32>, usize>,
    cols: Vec<ZetaColumn>,
}

impl ZetaTable {
    pub fn new() -> Self {
        ZetaTable::default()
    }

    /// Stored value, if the pair has an explicit entry.
    pub fn get(&self, subset: &[u32], ell: usize) -> Option<Complex64> {
        let &id = self.ids.get(subset)?;
        let col = &self.cols[id];
        if ell < col.min_ell || ell > col.computed_to() {
            None
        } else {
            Some(col.at(ell))
        }
    }

    /// Number of subsets holding at least one entry.
    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    fn column(&self, subset: &[u32]) -> Option<&ZetaColumn> {
        self.ids.get(subset).map(|&id| &self.cols[id])
    }

    fn insert(&mut self, subset: Vec<u32>, col: ZetaColumn) {
        match self.ids.get(subset.as_slice()) {
            Some(&id) => self.cols[id] = col,
            None => {
                self.ids.insert(subset, self.cols.len());
                self.cols.push(col);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Column computation
// ---------------------------------------------------------------------------

fn decode_mask(mask: u64, verts: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let mut m = mask;
    while m != 0 {
        let i = m.trailing_zeros() as usize;
        out.push(verts[i]);
        m &= m - 1;
    }
}

fn mask_connected(mask: u64, adj: &[u64]) -> bool {
    if mask == 0 {
        return true;
    }
    let mut reach = mask & mask.wrapping_neg();
    loop {
        let mut grown = reach;
        let mut frontier = reach;
        while frontier != 0 {
            let i = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            grown |= adj[i] & mask;
        }
        if grown == reach {
            return reach == mask;
        }
        reach = grown;
    }
}

/// Computes the zeta column of `verts` up to order `target`, reading the
/// columns of proper connected subsets from `cache`. The caller must have
/// computed those first (any order that is ascending in subset size works).
fn compute_column<F: BoundedFamily + ?Sized>(
    family: &F,
    g: &DependencyGraph,
    verts: &[u32],
    target: usize,
    cache: &ZetaTable,
) -> Result<ZetaColumn> {
    let sigma = verts.len();
    let alpha = family.alpha().max(1);
    let min_ell = sigma.div_ceil(alpha);
    if sigma > MASK_LIMIT {
        return Err(Error::Capability(format!(
            "subset of size {sigma} exceeds the {MASK_LIMIT}-vertex covering-pair limit"
        )));
    }
    if min_ell > target {
        return Ok(ZetaColumn {
            min_ell,
            values: Vec::new(),
        });
    }
    let n_masks = 1usize << sigma;
    if n_masks.saturating_mul(target + 1) > LAMBDA_TABLE_LIMIT {
        return Err(Error::Capability(format!(
            "lambda table for a size-{sigma} subset at order {target} exceeds the entry cap"
        )));
    }
    let full = (n_masks - 1) as u64;

    // Local adjacency bitmasks of the induced subgraph.
    let mut adj = vec![0u64; sigma];
    for i in 0..sigma {
        for j in (i + 1)..sigma {
            if g.has_edge(verts[i], verts[j]) {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
        }
    }

    // Lambda columns for every nonempty submask, indexed so that
    // lam[mask][ell] is lambda(T, ell); j_range[mask] trims zero tails.
    let mut lam: Vec<Box<[Complex64]>> = Vec::with_capacity(n_masks);
    let mut j_range: Vec<(usize, usize)> = Vec::with_capacity(n_masks);
    let mut scratch = Vec::with_capacity(sigma);
    lam.push(Box::from([]));
    j_range.push((1, 0));
    for mask in 1..=full {
        decode_mask(mask, verts, &mut scratch);
        let batch = family.lambda_batch(&scratch, target)?;
        let mut col = vec![Complex64::ZERO; target + 1];
        col[1..=target].copy_from_slice(&batch[..target]);
        let jmin = (1..=target).find(|&j| col[j] != Complex64::ZERO);
        let jmax = (1..=target).rev().find(|&j| col[j] != Complex64::ZERO);
        j_range.push(match (jmin, jmax) {
            (Some(a), Some(b)) => (a, b),
            _ => (1, 0), // empty range
        });
        lam.push(col.into_boxed_slice());
    }

    // Connected nonempty submasks, ascending; the full mask refers to the
    // column under construction.
    let mut conn_masks: Vec<u64> = Vec::new();
    for mask in 1..=full {
        if mask_connected(mask, &adj) {
            conn_masks.push(mask);
        }
    }
    let mut zeta_cols: Vec<Option<&ZetaColumn>> = vec![None; n_masks];
    for &mask in &conn_masks {
        if mask != full {
            decode_mask(mask, verts, &mut scratch);
            zeta_cols[mask as usize] = cache.column(&scratch);
            debug_assert!(
                zeta_cols[mask as usize].is_some(),
                "proper connected subsets must be computed first"
            );
        }
    }

    // Fill orders ascending. Summation order is fixed: connected L masks
    // ascending, then W submasks of L in standard descending enumeration,
    // then lambda order j ascending.
    let mut values: Vec<Complex64> = Vec::with_capacity(target - min_ell + 1);
    for ell in min_ell..=target {
        let mut acc = Complex64::ZERO;
        for &lmask in &conn_masks {
            let lsize = lmask.count_ones() as usize;
            let s_min = lsize.div_ceil(alpha);
            if s_min + 1 > ell {
                continue; // no s with zeta(L, s) != 0 and s <= ell - 1
            }
            let rest = full ^ lmask;
            let mut w = lmask;
            loop {
                let tmask = rest | w;
                if tmask != 0 {
                    let (jmin, jmax) = j_range[tmask as usize];
                    let hi = jmax.min(ell - s_min);
                    if jmin <= hi {
                        let tcol = &lam[tmask as usize];
                        for j in jmin..=hi {
                            let lv = tcol[j];
                            if lv == Complex64::ZERO {
                                continue;
                            }
                            let s = ell - j;
                            let zv = if lmask == full {
                                if s >= min_ell {
                                    values[s - min_ell]
                                } else {
                                    Complex64::ZERO
                                }
                            } else {
                                zeta_cols[lmask as usize]
                                    .map(|c| c.at(s))
                                    .unwrap_or(Complex64::ZERO)
                            };
                            if zv != Complex64::ZERO {
                                acc += (s as f64) * zv * lv;
                            }
                        }
                    }
                }
                if w == 0 {
                    break;
                }
                w = (w - 1) & lmask;
            }
        }
        values.push(lam[full as usize][ell] - acc / ell as f64);
    }
    Ok(ZetaColumn { min_ell, values })
}

/// Computes zeta columns for every connected subset of `subset` up to
/// `target`, smaller sizes first.
fn ensure_closure<F: BoundedFamily + ?Sized>(
    family: &F,
    g: &DependencyGraph,
    subset: &[u32],
    target: usize,
    cache: &mut ZetaTable,
) -> Result<()> {
    let sigma = subset.len();
    if sigma > MASK_LIMIT {
        return Err(Error::Capability(format!(
            "subset of size {sigma} exceeds the {MASK_LIMIT}-vertex covering-pair limit"
        )));
    }
    let mut adj = vec![0u64; sigma];
    for i in 0..sigma {
        for j in (i + 1)..sigma {
            if g.has_edge(subset[i], subset[j]) {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
        }
    }
    let full = ((1usize << sigma) - 1) as u64;
    let mut conn: Vec<u64> = (1..=full).filter(|&m| mask_connected(m, &adj)).collect();
    conn.sort_by_key(|m| (m.count_ones(), *m));
    let mut verts = Vec::with_capacity(sigma);
    for mask in conn {
        decode_mask(mask, subset, &mut verts);
        let done = cache
            .column(&verts)
            .map(|c| c.computed_to() >= target)
            .unwrap_or(false);
        if !done {
            let col = compute_column(family, g, &verts, target, cache)?;
            cache.insert(verts.clone(), col);
        }
    }
    Ok(())
}

/// `zeta(S, ell)` for a connected subset `S` of the host graph, memoizing
/// every (subset, order) pair touched into `cache`.
pub fn zeta<F: BoundedFamily + ?Sized>(
    family: &F,
    g: &DependencyGraph,
    subset: &[u32],
    ell: usize,
    cache: &mut ZetaTable,
) -> Result<Complex64> {
    if ell == 0 {
        return Err(Error::Domain("zeta is defined for orders >= 1".into()));
    }
    g.check_subset(subset)?;
    if subset.is_empty() {
        return Err(Error::InvalidInput("zeta of the empty subset".into()));
    }
    if !g.is_subset_connected(subset) {
        return Err(Error::InvalidInput(
            "zeta requires a subset inducing a connected subgraph".into(),
        ));
    }
    ensure_closure(family, g, subset, ell, cache)?;
    Ok(cache.get(subset, ell).unwrap_or(Complex64::ZERO))
}

/// Taylor coefficients `c_0..c_m` of `log f_G` at the origin:
/// `c_0 = ln f_G(0)` and `c_ell` sums `zeta(S, ell)` over the connected
/// subsets with `|S| <= alpha * ell` in index order.
pub fn log_taylor<F: BoundedFamily + ?Sized>(
    family: &F,
    g: &DependencyGraph,
    m: usize,
) -> Result<TaylorSeries> {
    if m == 0 {
        return Err(Error::Domain(
            "log_taylor needs a truncation order of at least 1".into(),
        ));
    }
    let n = g.vertex_count();
    let f0 = family.f0(n);
    if !f0.is_finite() || f0 <= 0.0 {
        return Err(Error::Domain(format!(
            "f_G(0) must be positive and finite, got {f0}"
        )));
    }
    let mut coeffs = vec![Complex64::ZERO; m + 1];
    coeffs[0] = Complex64::new(f0.ln(), 0.0);
    if n == 0 {
        return Ok(TaylorSeries::new(coeffs));
    }

    let alpha = family.alpha().max(1);
    let ell_cap = (alpha * m).min(n);
    let index = enumerate_connected_subsets(g, ell_cap);

    // Warm per-family caches in a fixed order (largest subsets first) so
    // that later reads, possibly from several workers, are lock-and-go.
    for size in (1..=ell_cap).rev() {
        for &id in index.ids_of_size(size) {
            family.lambda_batch(index.subset(id), m)?;
        }
    }

    let mut cache = ZetaTable::new();
    for size in 1..=ell_cap {
        let ids = index.ids_of_size(size);
        if ids.len() >= PAR_THRESHOLD {
            let cols: Vec<(usize, Result<ZetaColumn>)> = ids
                .par_iter()
                .map(|&id| (id, compute_column(family, g, index.subset(id), m, &cache)))
                .collect();
            for (id, col) in cols {
                cache.insert(index.subset(id).to_vec(), col?);
            }
        } else {
            for &id in ids {
                let col = compute_column(family, g, index.subset(id), m, &cache)?;
                cache.insert(index.subset(id).to_vec(), col);
            }
        }
    }

    // Per-order reduction, sequential in index order.
    for sid in 0..index.len() {
        let subset = index.subset(sid);
        let col = cache.column(subset).expect("all index subsets computed");
        for (ell, slot) in coeffs.iter_mut().enumerate().skip(1) {
            if subset.len() <= alpha * ell {
                *slot += col.at(ell);
            }
        }
    }
    Ok(TaylorSeries::new(coeffs))
}

/// Memo table for the shortcut-free recurrence, keyed by subset and
/// order.
#[derive(Default)]
pub struct RawZetaMemo {
    map: HashMap<Vec<u32>, Vec<Option<Complex64>>>,
}

impl RawZetaMemo {
    pub fn new() -> Self {
        RawZetaMemo::default()
    }

    fn get(&self, subset: &[u32], ell: usize) -> Option<Complex64> {
        self.map
            .get(subset)
            .and_then(|col| col.get(ell - 1).copied().flatten())
    }

    fn set(&mut self, subset: &[u32], ell: usize, value: Complex64) {
        let col = self.map.entry(subset.to_vec()).or_default();
        if col.len() < ell {
            col.resize(ell, None);
        }
        col[ell - 1] = Some(value);
    }
}

/// The raw recurrence with no connectivity or support shortcuts, for
/// verifying that the structural zeros actually come out as zeros.
/// Exponential in `|subset|`; verification use only.
pub fn zeta_unpruned<F: BoundedFamily + ?Sized>(
    family: &F,
    g: &DependencyGraph,
    subset: &[u32],
    ell: usize,
    memo: &mut RawZetaMemo,
) -> Result<Complex64> {
    g.check_subset(subset)?;
    if let Some(v) = memo.get(subset, ell) {
        return Ok(v);
    }
    let sigma = subset.len();
    if sigma > MASK_LIMIT {
        return Err(Error::Capability(format!(
            "subset of size {sigma} exceeds the {MASK_LIMIT}-vertex covering-pair limit"
        )));
    }
    let full = (1u64 << sigma) - 1;
    let mut acc = Complex64::ZERO;
    let mut lverts = Vec::with_capacity(sigma);
    let mut tverts = Vec::with_capacity(sigma);
    for lmask in 1..=full {
        let rest = full ^ lmask;
        let mut w = lmask;
        loop {
            let tmask = rest | w;
            if tmask != 0 {
                decode_mask(lmask, subset, &mut lverts);
                decode_mask(tmask, subset, &mut tverts);
                for s in 1..ell {
                    let zv = zeta_unpruned(family, g, &lverts, s, memo)?;
                    if zv != Complex64::ZERO {
                        let lv = family.lambda(&tverts, ell - s)?;
                        acc += (s as f64) * zv * lv;
                    }
                }
            }
            if w == 0 {
                break;
            }
            w = (w - 1) & lmask;
        }
    }
    let value = family.lambda(subset, ell)? - acc / ell as f64;
    memo.set(subset, ell, value);
    Ok(value)
}

// ---------------------------------------------------------------------------
// Synthetic verification family
// ---------------------------------------------------------------------------

/// A multiplicative family with pseudo-random coefficients, for exercising
/// the engine without any physical model attached.
///
/// Connected subsets get coefficients derived from a seeded hash of the
/// (subset, order) pair; disconnected subsets get the convolution of their
/// components' coefficient sequences, which is exactly the structure
/// multiplicativity forces, so the cluster coefficients of disconnected
/// subsets must cancel to zero.
pub struct SyntheticFamily<'g> {
    graph: &'g DependencyGraph,
    alpha: usize,
    seed: u64,
}

impl<'g> SyntheticFamily<'g> {
    pub fn new(graph: &'g DependencyGraph, alpha: usize, seed: u64) -> Self {
        assert!(alpha >= 1);
        SyntheticFamily { graph, alpha, seed }
    }

    fn connected_lambda(&self, subset: &[u32], ell: usize) -> Complex64 {
        if subset.len() > self.alpha * ell {
            return Complex64::ZERO;
        }
        let mut h = self.seed ^ 0x9e37_79b9_7f4a_7c15;
        for &v in subset {
            h = splitmix64(h ^ u64::from(v).wrapping_add(1));
        }
        h = splitmix64(h ^ (ell as u64).wrapping_mul(0x2545_f491_4f6c_dd1d));
        let re = (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
        let h2 = splitmix64(h);
        let im = (h2 >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
        Complex64::new(re, im)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl BoundedFamily for SyntheticFamily<'_> {
    fn alpha(&self) -> usize {
        self.alpha
    }

    fn f0(&self, _n_vertices: usize) -> f64 {
        1.0
    }

    fn lambda_batch(&self, subset: &[u32], ell_max: usize) -> Result<Vec<Complex64>> {
        if subset.is_empty() {
            return Ok(vec![Complex64::ZERO; ell_max]);
        }
        let induced = self.graph.induced_subgraph(subset)?;
        let comps = induced.components();
        if comps.len() == 1 {
            return Ok((1..=ell_max)
                .map(|ell| self.connected_lambda(subset, ell))
                .collect());
        }
        // Convolution over components: the coefficient sequence of a
        // disjoint union is the product of the component sequences.
        let mut acc = vec![Complex64::ZERO; ell_max + 1];
        acc[0] = Complex64::ONE;
        let mut comp_verts = Vec::new();
        for comp in comps {
            comp_verts.clear();
            comp_verts.extend(comp.iter().map(|&i| subset[i as usize]));
            let mut next = vec![Complex64::ZERO; ell_max + 1];
            for j in 1..=ell_max {
                let lv = self.connected_lambda(&comp_verts, j);
                if lv == Complex64::ZERO {
                    continue;
                }
                for i in 0..=(ell_max - j) {
                    if acc[i] != Complex64::ZERO {
                        next[i + j] += acc[i] * lv;
                    }
                }
            }
            next[0] = Complex64::ZERO; // every component contributes at least order 1
            acc = next;
        }
        Ok(acc[1..].to_vec())
    }
}
