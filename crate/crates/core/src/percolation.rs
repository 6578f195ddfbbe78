//! Connected-component clustering of token graphs.
//!
//! Clusters grow by repeatedly absorbing every token linked to a member until
//! nothing more can be added. This is implemented with a disjoint-set forest
//! (union by size, path compression), which is effectively linear in the
//! number of edges.

use crate::error::{Error, Result};
use crate::types::{AdjacencyMatrix, ClusterSet, TokenId};

/// Disjoint-set forest over `0..n`.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = x;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    /// Returns `true` if `a` and `b` were in different sets.
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
        true
    }
}

/// Connected components of `(participants, adj)`.
///
/// Participants without edges become size-1 clusters. Every edge must join
/// two participants.
pub fn percolate(adj: &AdjacencyMatrix, participants: &[TokenId]) -> Result<ClusterSet> {
    let t_number = adj.t_number();
    let mut is_participant = vec![false; t_number];
    for &p in participants {
        if p as usize >= t_number {
            return Err(Error::TokenOutOfRange {
                token: p as u64,
                t_number,
            });
        }
        is_participant[p as usize] = true;
    }
    let mut uf = UnionFind::new(t_number);
    for &(a, b) in adj.edges() {
        if !is_participant[a as usize] || !is_participant[b as usize] {
            return Err(Error::NonParticipantEdge(a, b));
        }
        uf.union(a, b);
    }
    let mut root_slot = vec![usize::MAX; t_number];
    let mut clusters: Vec<Vec<TokenId>> = Vec::new();
    for t in 0..t_number as TokenId {
        if !is_participant[t as usize] {
            continue;
        }
        let root = uf.find(t) as usize;
        if root_slot[root] == usize::MAX {
            root_slot[root] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[root_slot[root]].push(t);
    }
    ClusterSet::from_clusters(t_number, clusters)
}

/// `(size, count)` rows, sizes ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSizeDistribution {
    pub rows: Vec<(usize, usize)>,
}

impl ClusterSizeDistribution {
    /// Number of tokens covered: sum of size times count.
    pub fn tokens(&self) -> usize {
        self.rows.iter().map(|&(s, c)| s * c).sum()
    }

    pub fn count_of(&self, size: usize) -> usize {
        self.rows.iter().find(|r| r.0 == size).map_or(0, |r| r.1)
    }

    pub fn max_size(&self) -> usize {
        self.rows.last().map_or(0, |r| r.0)
    }
}

pub fn size_distribution(c: &ClusterSet) -> ClusterSizeDistribution {
    let mut sizes: Vec<usize> = c.clusters().iter().map(Vec::len).collect();
    sizes.sort_unstable();
    let mut rows: Vec<(usize, usize)> = Vec::new();
    for s in sizes {
        match rows.last_mut() {
            Some((size, count)) if *size == s => *count += 1,
            _ => rows.push((s, 1)),
        }
    }
    ClusterSizeDistribution { rows }
}
