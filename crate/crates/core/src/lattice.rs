//! Torus geometry: vertices, four-point neighborhoods, lattice edges and
//! the canonical indexing of unordered vertex pairs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest side length for which the four neighbors of a cell are distinct.
pub const MIN_SIDE: usize = 3;

/// A cell of the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Vertex {
    pub row: usize,
    pub col: usize,
}

impl Vertex {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// An unordered pair of distinct vertices, stored with the lexicographically
/// smaller vertex first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair {
    a: Vertex,
    b: Vertex,
}

impl Pair {
    /// Canonicalizes the endpoints. Returns `None` when they coincide.
    pub fn new(u: Vertex, v: Vertex) -> Option<Self> {
        match u.cmp(&v) {
            std::cmp::Ordering::Less => Some(Self { a: u, b: v }),
            std::cmp::Ordering::Greater => Some(Self { a: v, b: u }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn a(&self) -> Vertex {
        self.a
    }

    pub fn b(&self) -> Vertex {
        self.b
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.a == v || self.b == v
    }

    pub fn shares_vertex(&self, other: &Pair) -> bool {
        self.contains(other.a) || self.contains(other.b)
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},{}}}", self.a, self.b)
    }
}

/// An `n × n` square lattice with periodic boundary.
///
/// Vertices are linearized as `row * n + col`; pairs of distinct vertices
/// are numbered in lexicographic order of their linearized endpoints, which
/// coincides with lexicographic order on `(row, col)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusGrid {
    n: usize,
    // left, right, up, down
    neighbors: Vec<[usize; 4]>,
}

impl TorusGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_SIDE {
            return Err(Error::InvalidGrid(n));
        }
        let neighbors = (0..n * n)
            .map(|i| {
                let (row, col) = (i / n, i % n);
                [
                    row * n + (col + n - 1) % n,
                    row * n + (col + 1) % n,
                    ((row + n - 1) % n) * n + col,
                    ((row + 1) % n) * n + col,
                ]
            })
            .collect();
        Ok(Self { n, neighbors })
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn num_vertices(&self) -> usize {
        self.n * self.n
    }

    pub fn num_pairs(&self) -> usize {
        let v = self.num_vertices();
        v * (v - 1) / 2
    }

    pub fn num_edges(&self) -> usize {
        2 * self.num_vertices()
    }

    pub fn contains(&self, v: Vertex) -> bool {
        v.row < self.n && v.col < self.n
    }

    /// Reduces arbitrary (possibly negative) coordinates onto the torus.
    pub fn wrap(&self, row: i64, col: i64) -> Vertex {
        let n = self.n as i64;
        Vertex::new(row.rem_euclid(n) as usize, col.rem_euclid(n) as usize)
    }

    pub fn index(&self, v: Vertex) -> usize {
        debug_assert!(self.contains(v));
        v.row * self.n + v.col
    }

    pub fn vertex(&self, index: usize) -> Vertex {
        Vertex::new(index / self.n, index % self.n)
    }

    /// Left, right, up, down with wrap-around.
    pub fn neighbors(&self, v: Vertex) -> [Vertex; 4] {
        self.neighbor_indices(self.index(v)).map(|i| self.vertex(i))
    }

    pub fn neighbor_indices(&self, index: usize) -> [usize; 4] {
        self.neighbors[index]
    }

    pub fn are_adjacent(&self, u: usize, v: usize) -> bool {
        self.neighbors[u].contains(&v)
    }

    /// Index of the pair `{u, v}` of linearized vertices, `u != v`.
    pub fn pair_index_of(&self, u: usize, v: usize) -> usize {
        debug_assert_ne!(u, v);
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        let m = self.num_vertices();
        a * m - a * (a + 1) / 2 + (b - a - 1)
    }

    pub fn pair_index(&self, pair: &Pair) -> usize {
        self.pair_index_of(self.index(pair.a), self.index(pair.b))
    }

    /// Linearized endpoints `(a, b)`, `a < b`, of the pair with this index.
    pub fn pair_endpoints(&self, index: usize) -> (usize, usize) {
        let m = self.num_vertices();
        debug_assert!(index < self.num_pairs());
        // Row `a` owns the indices [start(a), start(a) + m - a - 1).
        let mut a = 0;
        let mut start = 0;
        loop {
            let len = m - a - 1;
            if index < start + len {
                return (a, a + 1 + index - start);
            }
            start += len;
            a += 1;
        }
    }

    pub fn pair(&self, index: usize) -> Pair {
        let (a, b) = self.pair_endpoints(index);
        Pair { a: self.vertex(a), b: self.vertex(b) }
    }

    /// All unordered pairs of distinct vertices, in canonical order.
    pub fn all_pairs(&self) -> Vec<Pair> {
        let m = self.num_vertices();
        (0..m)
            .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
            .map(|(a, b)| Pair { a: self.vertex(a), b: self.vertex(b) })
            .collect()
    }

    /// The `2n²` lattice edges, in canonical order.
    pub fn edges(&self) -> Vec<Pair> {
        let mut edges: Vec<Pair> = self
            .edge_indices()
            .map(|(a, b)| Pair { a: self.vertex(a), b: self.vertex(b) })
            .collect();
        edges.sort();
        edges
    }

    /// Each lattice edge once, as `(v, right neighbor)` and `(v, down neighbor)`.
    pub fn edge_indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_vertices()).flat_map(move |v| {
            let [_, right, _, down] = self.neighbors[v];
            [(v.min(right), v.max(right)), (v.min(down), v.max(down))]
        })
    }

    /// Translation of a linearized vertex by `(dr, dc)`.
    pub fn translate(&self, index: usize, dr: usize, dc: usize) -> usize {
        let (row, col) = (index / self.n, index % self.n);
        ((row + dr) % self.n) * self.n + (col + dc) % self.n
    }
}
