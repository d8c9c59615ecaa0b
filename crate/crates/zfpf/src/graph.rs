//! Vertex-labeled dependency graphs and enumeration of small connected
//! vertex subsets.
//!
//! A dependency graph abstracts which local objects of a model interact
//! (terms sharing sites, variables co-occurring in a clause). Coefficient
//! computations only ever touch connected induced subgraphs of bounded
//! size, so the workhorse here is [`enumerate_connected_subsets`]: the
//! inductive neighbor-extension procedure with a prefix tree for exact
//! de-duplication. Per root vertex `v` the number of connected subsets of
//! size `ell` is at most `(e*Delta)^(ell-1)/2`, which keeps the index
//! small on bounded-degree graphs.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Opaque canonical byte label attached to a vertex.
///
/// Equality is byte equality; instantiating modules are responsible for
/// producing identical bytes for isomorphic local structures.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexLabel(Vec<u8>);

impl VertexLabel {
    pub fn new(bytes: Vec<u8>) -> Self {
        VertexLabel(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

/// Simple undirected graph with sorted neighbor lists and per-vertex labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyGraph {
    adjacency: Vec<Vec<u32>>,
    labels: Vec<VertexLabel>,
}

impl DependencyGraph {
    /// Builds a graph from labels and an edge list.
    ///
    /// Self-loops and out-of-range endpoints are rejected; duplicate edges
    /// collapse. Neighbor lists come out sorted ascending.
    pub fn new(labels: Vec<VertexLabel>, edges: &[(u32, u32)]) -> Result<Self> {
        let n = labels.len();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({u},{v}) out of range for {n} vertices"
                )));
            }
            if u == v {
                return Err(Error::InvalidInput(format!("self-loop at vertex {u}")));
            }
            adjacency[u as usize].push(v);
            adjacency[v as usize].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(DependencyGraph { adjacency, labels })
    }

    /// Graph with `n` isolated unlabeled vertices.
    pub fn edgeless(n: usize) -> Self {
        DependencyGraph {
            adjacency: vec![Vec::new(); n],
            labels: vec![VertexLabel::default(); n],
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adjacency[v as usize]
    }

    pub fn label(&self, v: u32) -> &VertexLabel {
        &self.labels[v as usize]
    }

    pub fn labels(&self) -> &[VertexLabel] {
        &self.labels
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adjacency[u as usize].binary_search(&v).is_ok()
    }

    /// Subgraph induced by the sorted, duplicate-free vertex list `subset`,
    /// with vertices renumbered `0..subset.len()` in subset order and
    /// labels carried over.
    pub fn induced_subgraph(&self, subset: &[u32]) -> Result<DependencyGraph> {
        self.check_subset(subset)?;
        let position: BTreeMap<u32, u32> = subset
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i as u32))
            .collect();
        let mut adjacency = Vec::with_capacity(subset.len());
        for &v in subset {
            let list: Vec<u32> = self.adjacency[v as usize]
                .iter()
                .filter_map(|u| position.get(u).copied())
                .collect();
            // source list sorted and the renumbering is monotone
            adjacency.push(list);
        }
        let labels = subset
            .iter()
            .map(|&v| self.labels[v as usize].clone())
            .collect();
        Ok(DependencyGraph { adjacency, labels })
    }

    /// True iff the whole graph is connected. The empty graph and all
    /// single-vertex graphs count as connected.
    pub fn is_connected(&self) -> bool {
        let n = self.vertex_count();
        if n <= 1 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0u32];
        seen[0] = true;
        let mut reached = 1;
        while let Some(v) = stack.pop() {
            for &u in &self.adjacency[v as usize] {
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    reached += 1;
                    stack.push(u);
                }
            }
        }
        reached == n
    }

    /// True iff the subgraph induced by the sorted vertex list `subset`
    /// is connected (empty and singleton subsets count as connected).
    pub fn is_subset_connected(&self, subset: &[u32]) -> bool {
        if subset.len() <= 1 {
            return true;
        }
        let mut seen = vec![false; subset.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut reached = 1;
        while let Some(i) = stack.pop() {
            for &u in &self.adjacency[subset[i] as usize] {
                if let Ok(j) = subset.binary_search(&u) {
                    if !seen[j] {
                        seen[j] = true;
                        reached += 1;
                        stack.push(j);
                    }
                }
            }
        }
        reached == subset.len()
    }

    /// Connected components as sorted vertex lists, ordered by minimum
    /// vertex.
    pub fn components(&self) -> Vec<Vec<u32>> {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start as u32];
            let mut stack = vec![start as u32];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for &u in &self.adjacency[v as usize] {
                    if !seen[u as usize] {
                        seen[u as usize] = true;
                        comp.push(u);
                        stack.push(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Disjoint union; vertices of `other` are shifted past `self`.
    pub fn disjoint_union(&self, other: &DependencyGraph) -> DependencyGraph {
        let shift = self.vertex_count() as u32;
        let mut adjacency = self.adjacency.clone();
        adjacency.extend(
            other
                .adjacency
                .iter()
                .map(|list| list.iter().map(|&u| u + shift).collect()),
        );
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        DependencyGraph { adjacency, labels }
    }

    pub(crate) fn check_subset(&self, subset: &[u32]) -> Result<()> {
        let n = self.vertex_count() as u32;
        for (i, &v) in subset.iter().enumerate() {
            if v >= n {
                return Err(Error::InvalidInput(format!(
                    "subset vertex {v} out of range for {n} vertices"
                )));
            }
            if i > 0 && subset[i - 1] >= v {
                return Err(Error::InvalidInput(
                    "subset must be sorted ascending without duplicates".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Upper bound on the number of connected subsets of size `ell` through a
/// fixed vertex in a graph of maximum degree `max_degree`:
/// `ceil((e*Delta)^(ell-1) / 2)`.
pub fn connected_subsets_bound(max_degree: usize, ell: usize) -> u64 {
    let base = std::f64::consts::E * max_degree as f64;
    (base.powi(ell as i32 - 1) / 2.0).ceil() as u64
}

// ---------------------------------------------------------------------------
// Prefix tree over sorted vertex lists
// ---------------------------------------------------------------------------

#[derive(Default)]
struct TrieNode {
    children: BTreeMap<u32, usize>,
    /// Index of the stored subset terminating here, if any.
    terminal: Option<usize>,
}

/// Prefix tree keyed on sorted vertex lists; gives exact membership and
/// stable integer ids.
struct SubsetTrie {
    nodes: Vec<TrieNode>,
}

impl SubsetTrie {
    fn new() -> Self {
        SubsetTrie {
            nodes: vec![TrieNode::default()],
        }
    }

    /// Inserts `key`, returning `(id, freshly_inserted)`.
    fn insert(&mut self, key: &[u32], id: usize) -> (usize, bool) {
        let mut at = 0;
        for &v in key {
            at = match self.nodes[at].children.get(&v) {
                Some(&next) => next,
                None => {
                    let next = self.nodes.len();
                    self.nodes.push(TrieNode::default());
                    self.nodes[at].children.insert(v, next);
                    next
                }
            };
        }
        match self.nodes[at].terminal {
            Some(existing) => (existing, false),
            None => {
                self.nodes[at].terminal = Some(id);
                (id, true)
            }
        }
    }

    fn get(&self, key: &[u32]) -> Option<usize> {
        let mut at = 0;
        for &v in key {
            at = *self.nodes[at].children.get(&v)?;
        }
        self.nodes[at].terminal
    }
}

// ---------------------------------------------------------------------------
// Connected subset index
// ---------------------------------------------------------------------------

/// All connected vertex subsets of size `1..=ell_max`, indexed per root
/// vertex and per size, de-duplicated through a prefix tree.
///
/// Global iteration order is: minimum vertex ascending, then size
/// ascending, then lexicographic — fixed so that downstream coefficient
/// sums are bit-reproducible.
pub struct ConnectedSubsetIndex {
    ell_max: usize,
    /// Deduplicated subsets in global index order.
    subsets: Vec<Vec<u32>>,
    /// Subset ids grouped by size (`size_index[s-1]` holds sizes `s`),
    /// each group in global order.
    size_index: Vec<Vec<usize>>,
    /// `by_root[v][s-1]` = ids of all stored subsets of size `s`
    /// containing `v` (not only those rooted at `v`).
    by_root: Vec<Vec<Vec<usize>>>,
    trie: SubsetTrie,
}

impl ConnectedSubsetIndex {
    /// Number of distinct subsets stored.
    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn ell_max(&self) -> usize {
        self.ell_max
    }

    /// Subsets in global index order.
    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.subsets.iter().map(Vec::as_slice)
    }

    pub fn subset(&self, id: usize) -> &[u32] {
        &self.subsets[id]
    }

    /// Ids of all subsets of the given size, in global order.
    pub fn ids_of_size(&self, size: usize) -> &[usize] {
        self.size_index
            .get(size.wrapping_sub(1))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn id_of(&self, subset: &[u32]) -> Option<usize> {
        self.trie.get(subset)
    }

    pub fn contains(&self, subset: &[u32]) -> bool {
        self.trie.get(subset).is_some()
    }

    /// `|C^v_{=ell}|`: number of connected subsets of size `ell`
    /// containing vertex `v`.
    pub fn count_at(&self, v: u32, ell: usize) -> usize {
        self.by_root[v as usize]
            .get(ell - 1)
            .map(Vec::len)
            .unwrap_or(0)
    }
}

/// Enumerates every subset `S` with `1 <= |S| <= ell_max` whose induced
/// subgraph is connected, by inductively extending each connected set by
/// one neighbor and de-duplicating through the prefix tree.
/// `ell_max` must be at least 1.
pub fn enumerate_connected_subsets(g: &DependencyGraph, ell_max: usize) -> ConnectedSubsetIndex {
    assert!(ell_max >= 1, "ell_max must be at least 1");
    let n = g.vertex_count();
    let mut index = ConnectedSubsetIndex {
        ell_max,
        subsets: Vec::new(),
        size_index: vec![Vec::new(); ell_max],
        by_root: vec![vec![Vec::new(); ell_max]; n],
        trie: SubsetTrie::new(),
    };

    let mut scratch = Vec::new();
    for v in 0..n as u32 {
        // Sizes for this root, each a lex-sorted list of sorted subsets.
        let mut sizes: Vec<Vec<Vec<u32>>> = Vec::with_capacity(ell_max);
        sizes.push(vec![vec![v]]);
        let mut local = SubsetTrie::new();
        local.insert(&[v], 0);
        for size in 2..=ell_max.min(n) {
            let mut next: Vec<Vec<u32>> = Vec::new();
            for s in &sizes[size - 2] {
                // Candidate extensions: neighbors of S not already in S.
                scratch.clear();
                for &w in s {
                    scratch.extend_from_slice(g.neighbors(w));
                }
                scratch.sort_unstable();
                scratch.dedup();
                for &u in &scratch {
                    if s.binary_search(&u).is_ok() {
                        continue;
                    }
                    let mut grown = Vec::with_capacity(size);
                    let pos = s.partition_point(|&w| w < u);
                    grown.extend_from_slice(&s[..pos]);
                    grown.push(u);
                    grown.extend_from_slice(&s[pos..]);
                    let (_, fresh) = local.insert(&grown, 0);
                    if fresh {
                        next.push(grown);
                    }
                }
            }
            next.sort_unstable();
            sizes.push(next);
        }

        for (size_idx, group) in sizes.iter().enumerate() {
            for s in group {
                // Assign a global id the first time the subset appears,
                // which is exactly at its minimum vertex.
                let id = if s[0] == v {
                    let id = index.subsets.len();
                    let (got, fresh) = index.trie.insert(s, id);
                    debug_assert!(fresh);
                    index.subsets.push(s.clone());
                    index.size_index[size_idx].push(got);
                    got
                } else {
                    index
                        .trie
                        .get(s)
                        .expect("subset with smaller root must already be indexed")
                };
                index.by_root[v as usize][size_idx].push(id);
            }
        }
    }
    index
}
