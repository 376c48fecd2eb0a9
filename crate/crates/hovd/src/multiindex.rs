//! Multisets of derivative-direction labels and their sub-multiset lattices.

use std::collections::BTreeMap;

/// A multiset of direction labels, stored sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MultiIndex {
    labels: Vec<usize>,
}

impl MultiIndex {
    pub fn new(mut labels: Vec<usize>) -> Self {
        labels.sort_unstable();
        Self { labels }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn order(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(label, multiplicity)` pairs in label order.
    pub fn counts(&self) -> Vec<(usize, usize)> {
        let mut map = BTreeMap::new();
        for &l in &self.labels {
            *map.entry(l).or_insert(0) += 1;
        }
        map.into_iter().collect()
    }

    pub fn is_subset_of(&self, other: &MultiIndex) -> bool {
        let theirs: BTreeMap<usize, usize> = other.counts().into_iter().collect();
        self.counts()
            .into_iter()
            .all(|(l, c)| theirs.get(&l).is_some_and(|&t| t >= c))
    }

    /// Every distinct sub-multiset, sorted by order then labels (a topological
    /// order of the inclusion lattice).
    pub fn sub_multisets(&self) -> Vec<MultiIndex> {
        let counts = self.counts();
        let mut out = vec![Vec::new()];
        for (label, mult) in counts {
            let mut next = Vec::with_capacity(out.len() * (mult + 1));
            for base in &out {
                for c in 0..=mult {
                    let mut v: Vec<usize> = base.clone();
                    v.extend(std::iter::repeat_n(label, c));
                    next.push(v);
                }
            }
            out = next;
        }
        let mut subs: Vec<MultiIndex> = out.into_iter().map(MultiIndex::new).collect();
        subs.sort_by(|a, b| a.order().cmp(&b.order()).then_with(|| a.labels.cmp(&b.labels)));
        subs
    }

    /// Number of lattice nodes, `∏ (multiplicity + 1)`.
    pub fn lattice_size(&self) -> usize {
        self.counts().iter().map(|&(_, c)| c + 1).product()
    }
}
