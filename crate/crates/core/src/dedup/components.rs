use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{DedupError, DuplicatePair};

/// Disjoint-set forest with path compression and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Returns false if `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] || (self.size[ra] == self.size[rb] && rb < ra) {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Dataset names, highest quality first.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PriorityOrder(Vec<String>);

impl PriorityOrder {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(names.into_iter().map(Into::into).collect())
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    /// Position in the order; lower is better.
    pub fn rank(&self, dataset: &str) -> Option<usize> {
        self.0.iter().position(|d| d == dataset)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub representative: u64,
    /// Sorted ascending; includes the representative.
    pub members: Vec<u64>,
    /// Dataset of the representative.
    pub dataset: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateGraph {
    /// Unique `(duplicate, anchor)` edges, sorted by `(min id, max id)`.
    pub edges: Vec<DuplicatePair>,
    /// Every document appears in exactly one component; sorted by smallest member.
    pub components: Vec<Component>,
}

impl DuplicateGraph {
    /// Members that are not their component's representative.
    pub fn discarded(&self) -> BTreeSet<u64> {
        self.components.iter().flat_map(|c| c.members.iter().copied().filter(move |&m| m != c.representative)).collect()
    }

    pub fn representatives(&self) -> BTreeSet<u64> {
        self.components.iter().map(|c| c.representative).collect()
    }

    /// Map doc id → component index.
    pub fn component_index(&self) -> HashMap<u64, usize> {
        self.components.iter().enumerate().flat_map(|(i, c)| c.members.iter().map(move |&m| (m, i))).collect()
    }
}

fn edge_order(p: &DuplicatePair) -> (u64, u64, u64, u64) {
    (p.duplicate.min(p.anchor), p.duplicate.max(p.anchor), p.duplicate, p.anchor)
}

/// Union all pairs, then keep per component the document from the
/// best-ranked dataset, smallest doc id among equals.
pub fn resolve_components(
    pairs: &[DuplicatePair],
    priority: &PriorityOrder,
    doc_meta: &BTreeMap<u64, String>,
) -> Result<DuplicateGraph, DedupError> {
    let mut ranks: HashMap<&str, usize> = HashMap::new();
    for dataset in doc_meta.values() {
        if !ranks.contains_key(dataset.as_str()) {
            let rank = priority.rank(dataset).ok_or_else(|| DedupError::UnrankedDataset(dataset.clone()))?;
            ranks.insert(dataset.as_str(), rank);
        }
    }

    let ids: Vec<u64> = doc_meta.keys().copied().collect();
    let index: HashMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

    let mut edges: Vec<DuplicatePair> = pairs.to_vec();
    edges.sort_by_key(edge_order);
    edges.dedup_by(|b, a| a.duplicate == b.duplicate && a.anchor == b.anchor);

    let mut uf = UnionFind::new(ids.len());
    for e in &edges {
        let a = *index.get(&e.duplicate).ok_or(DedupError::UnknownDocument(e.duplicate))?;
        let b = *index.get(&e.anchor).ok_or(DedupError::UnknownDocument(e.anchor))?;
        uf.union(a, b);
    }

    let mut groups: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for (i, &id) in ids.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().push(id);
    }
    let mut components: Vec<Component> = groups
        .into_values()
        .map(|members| {
            let representative =
                *members.iter().min_by_key(|&&m| (ranks[doc_meta[&m].as_str()], m)).expect("components are non-empty");
            Component { representative, dataset: doc_meta[&representative].clone(), members }
        })
        .collect();
    components.sort_by_key(|c| c.members[0]);
    Ok(DuplicateGraph { edges, components })
}
