//! Minimum-weight spanning in-trees (every node has a directed path to the
//! root) by Chu–Liu/Edmonds contraction.
//!
//! This is the `O(E log E)` formulation with mergeable heaps and a union-find
//! that can be rolled back to expand contracted cycles: each node repeatedly
//! takes its cheapest outgoing edge, cycles are contracted into a single node
//! whose outgoing edges are reweighted by the cost of the cycle edge they
//! would replace, and the contraction history is unwound at the end to
//! recover the tree edges.

const NIL: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightedEdge {
    pub from: usize,
    pub to: usize,
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InTree {
    pub root: usize,
    pub total: u64,
    /// Index into the edge list of each node's tree edge; `None` at the root.
    pub out_edge: Vec<Option<usize>>,
}

/// Leftist heap of edges keyed by (adjusted weight, edge index), with a lazy
/// additive tag per subtree.
struct Heaps {
    weight: Vec<i64>,
    edge: Vec<usize>,
    lazy: Vec<i64>,
    left: Vec<usize>,
    right: Vec<usize>,
    rank: Vec<u32>,
}

impl Heaps {
    fn with_capacity(n: usize) -> Self {
        Self {
            weight: Vec::with_capacity(n),
            edge: Vec::with_capacity(n),
            lazy: Vec::with_capacity(n),
            left: Vec::with_capacity(n),
            right: Vec::with_capacity(n),
            rank: Vec::with_capacity(n),
        }
    }

    fn singleton(&mut self, weight: i64, edge: usize) -> usize {
        self.weight.push(weight);
        self.edge.push(edge);
        self.lazy.push(0);
        self.left.push(NIL);
        self.right.push(NIL);
        self.rank.push(1);
        self.weight.len() - 1
    }

    fn rank_of(&self, h: usize) -> u32 {
        if h == NIL {
            0
        } else {
            self.rank[h]
        }
    }

    fn push_down(&mut self, h: usize) {
        let d = self.lazy[h];
        if d != 0 {
            self.weight[h] += d;
            for c in [self.left[h], self.right[h]] {
                if c != NIL {
                    self.lazy[c] += d;
                }
            }
            self.lazy[h] = 0;
        }
    }

    fn merge(&mut self, a: usize, b: usize) -> usize {
        if a == NIL {
            return b;
        }
        if b == NIL {
            return a;
        }
        self.push_down(a);
        self.push_down(b);
        let (a, b) = if (self.weight[a], self.edge[a]) > (self.weight[b], self.edge[b]) { (b, a) } else { (a, b) };
        let merged = self.merge(self.right[a], b);
        self.right[a] = merged;
        if self.rank_of(self.left[a]) < self.rank_of(self.right[a]) {
            let l = self.left[a];
            self.left[a] = self.right[a];
            self.right[a] = l;
        }
        self.rank[a] = self.rank_of(self.right[a]) + 1;
        a
    }

    fn top(&mut self, h: usize) -> (i64, usize) {
        self.push_down(h);
        (self.weight[h], self.edge[h])
    }

    fn pop(&mut self, h: usize) -> usize {
        self.push_down(h);
        self.merge(self.left[h], self.right[h])
    }
}

struct RollbackUnionFind {
    parent: Vec<isize>,
    history: Vec<(usize, isize)>,
}

impl RollbackUnionFind {
    fn new(n: usize) -> Self {
        Self { parent: vec![-1; n], history: Vec::new() }
    }

    fn find(&self, mut x: usize) -> usize {
        while self.parent[x] >= 0 {
            x = self.parent[x] as usize;
        }
        x
    }

    fn join(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.parent[a] > self.parent[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.history.push((a, self.parent[a]));
        self.history.push((b, self.parent[b]));
        self.parent[a] += self.parent[b];
        self.parent[b] = a as isize;
        true
    }

    fn time(&self) -> usize {
        self.history.len()
    }

    fn rollback(&mut self, t: usize) {
        while self.history.len() > t {
            let (i, v) = self.history.pop().unwrap();
            self.parent[i] = v;
        }
    }
}

/// Minimum total weight in-tree rooted at `root`. Self-loops are ignored.
/// On failure returns a node with no path to the root.
pub fn min_in_tree(num_nodes: usize, edges: &[WeightedEdge], root: usize) -> Result<InTree, usize> {
    assert!(root < num_nodes);
    let mut heaps = Heaps::with_capacity(edges.len());
    let mut heap = vec![NIL; num_nodes];
    for (i, e) in edges.iter().enumerate() {
        if e.from == e.to || e.from == root {
            continue;
        }
        let h = heaps.singleton(e.weight as i64, i);
        heap[e.from] = heaps.merge(heap[e.from], h);
    }

    let mut uf = RollbackUnionFind::new(num_nodes);
    let mut seen = vec![NIL; num_nodes];
    seen[root] = root;
    let mut path = vec![0usize; num_nodes];
    let mut chosen = vec![0usize; num_nodes];
    let mut tree_edge: Vec<Option<usize>> = vec![None; num_nodes];
    let mut cycles: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    let mut total: i64 = 0;

    for start in 0..num_nodes {
        let mut u = start;
        let mut depth = 0;
        while seen[u] == NIL {
            if heap[u] == NIL {
                return Err(u);
            }
            let (w, ei) = heaps.top(heap[u]);
            heaps.lazy[heap[u]] -= w;
            heap[u] = heaps.pop(heap[u]);
            chosen[depth] = ei;
            path[depth] = u;
            depth += 1;
            seen[u] = start;
            total += w;
            u = uf.find(edges[ei].to);
            if seen[u] == start {
                // contract the cycle ending at u
                let mut merged = NIL;
                let end = depth;
                let time = uf.time();
                loop {
                    depth -= 1;
                    let w = path[depth];
                    merged = heaps.merge(merged, heap[w]);
                    if !uf.join(u, w) {
                        break;
                    }
                }
                u = uf.find(u);
                heap[u] = merged;
                seen[u] = NIL;
                cycles.push((u, time, chosen[depth..end].to_vec()));
            }
        }
        for &ei in &chosen[..depth] {
            tree_edge[uf.find(edges[ei].from)] = Some(ei);
        }
    }

    for (u, time, members) in cycles.into_iter().rev() {
        uf.rollback(time);
        let entering = tree_edge[u].expect("contracted cycle has an exit edge");
        for ei in members {
            tree_edge[uf.find(edges[ei].from)] = Some(ei);
        }
        tree_edge[uf.find(edges[entering].from)] = Some(entering);
    }
    tree_edge[root] = None;
    debug_assert_eq!(
        tree_edge.iter().flatten().map(|&i| edges[i].weight as i64).sum::<i64>(),
        total
    );
    Ok(InTree { root, total: total as u64, out_edge: tree_edge })
}
