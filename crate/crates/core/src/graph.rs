//! Finite weighted graphs `(X, w, μ)` with an optional truncation frontier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite symmetric-weight graph with a strictly positive vertex measure.
///
/// Adjacency is stored in compressed rows sorted by neighbor id; every edge is
/// stored twice with the identical `f64`, so `weight(x, y)` and `weight(y, x)`
/// agree bit for bit. Graphs are immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    measure: Vec<f64>,
    row_sums: Vec<f64>,
    frontier: Vec<bool>,
    leak: Vec<f64>,
    leak_edges: Vec<usize>,
}

impl WeightedGraph {
    pub fn builder(n: usize) -> GraphBuilder {
        GraphBuilder::new(n)
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn check_vertex(&self, x: usize) -> Result<()> {
        if x < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownVertex {
                vertex: x,
                n: self.len(),
            })
        }
    }

    pub fn measure(&self, x: usize) -> f64 {
        self.measure[x]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measure
    }

    pub fn total_measure(&self) -> f64 {
        self.measure.iter().sum()
    }

    /// Neighbors of `x` with their weights, sorted by neighbor id.
    pub fn neighbors(&self, x: usize) -> impl ExactSizeIterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[x]..self.offsets[x + 1];
        self.targets[r.clone()]
            .iter()
            .copied()
            .zip(self.weights[r].iter().copied())
    }

    /// Range of `x`'s entries in the flat adjacency arrays.
    pub(crate) fn row(&self, x: usize) -> std::ops::Range<usize> {
        self.offsets[x]..self.offsets[x + 1]
    }

    /// Position of the directed entry `(x, y)` in the flat adjacency arrays.
    pub(crate) fn entry(&self, x: usize, y: usize) -> Option<usize> {
        let r = self.row(x);
        self.targets[r.clone()]
            .binary_search(&y)
            .ok()
            .map(|k| r.start + k)
    }

    /// `w(x, y)`, zero for non-neighbors and on the diagonal.
    pub fn weight(&self, x: usize, y: usize) -> f64 {
        self.entry(x, y).map_or(0.0, |k| self.weights[k])
    }

    /// Combinatorial degree (number of neighbors).
    pub fn degree(&self, x: usize) -> usize {
        self.offsets[x + 1] - self.offsets[x]
    }

    /// Cached `Σ_y w(x, y)` over stored neighbors.
    pub fn row_sum(&self, x: usize) -> f64 {
        self.row_sums[x]
    }

    /// `Σ_y w(x, y)` summed afresh, for auditing the cache.
    pub fn recompute_row_sum(&self, x: usize) -> f64 {
        self.neighbors(x).map(|(_, w)| w).sum()
    }

    /// Weighted degree `Deg(x) = (1/μ(x)) Σ_y w(x, y)`.
    pub fn weighted_degree(&self, x: usize) -> Result<f64> {
        self.check_vertex(x)?;
        Ok(self.deg(x))
    }

    pub(crate) fn deg(&self, x: usize) -> f64 {
        self.row_sums[x] / self.measure[x]
    }

    pub fn is_frontier(&self, x: usize) -> bool {
        self.frontier[x]
    }

    pub fn frontier(&self) -> VertexSet {
        VertexSet::from_sorted_unchecked((0..self.len()).filter(|&x| self.frontier[x]).collect())
    }

    /// Weight mass of edges dropped by truncation at `x` (zero for vertices
    /// whose neighborhood lies inside the window).
    pub fn leak(&self, x: usize) -> f64 {
        self.leak[x]
    }

    /// Number of edges dropped by truncation at `x`.
    pub fn leak_edges(&self, x: usize) -> usize {
        self.leak_edges[x]
    }

    /// Weighted degree including dropped edges, i.e. the degree `x` has in
    /// the graph this one was truncated from.
    pub fn ambient_weighted_degree(&self, x: usize) -> f64 {
        (self.row_sums[x] + self.leak[x]) / self.measure[x]
    }

    /// Combinatorial degree including dropped edges.
    pub fn ambient_degree(&self, x: usize) -> usize {
        self.degree(x) + self.leak_edges[x]
    }

    /// Unordered edge list `(x, y, w)` with `x < y`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.len()).flat_map(move |x| {
            self.neighbors(x)
                .filter(move |&(y, _)| x < y)
                .map(move |(y, w)| (x, y, w))
        })
    }

    /// `n(K)`: `K` together with every vertex adjacent to it.
    pub fn combinatorial_neighborhood(&self, k: &VertexSet) -> Result<VertexSet> {
        let mut mark = vec![false; self.len()];
        for &x in k.iter() {
            self.check_vertex(x)?;
            mark[x] = true;
            for (y, _) in self.neighbors(x) {
                mark[y] = true;
            }
        }
        Ok(VertexSet::from_mask(&mark))
    }

    /// Whether the graph restricted to `keep` is connected.
    pub fn is_connected_on(&self, keep: &[bool]) -> bool {
        let Some(start) = keep.iter().position(|&k| k) else {
            return true;
        };
        let mut seen = vec![false; self.len()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(x) = stack.pop() {
            for (y, _) in self.neighbors(x) {
                if keep[y] && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        keep.iter().zip(&seen).all(|(&k, &s)| !k || s)
    }

    pub fn is_connected(&self) -> bool {
        self.is_connected_on(&vec![true; self.len()])
    }

    /// Restriction to the first `n` vertex ids.
    pub fn restrict_prefix(&self, n: usize) -> Result<WeightedGraph> {
        if n > self.len() {
            return Err(Error::OutOfRange(format!(
                "prefix {n} exceeds {} vertices",
                self.len()
            )));
        }
        let mut b = GraphBuilder::new(n);
        for x in 0..n {
            b.measure(x, self.measure[x]);
        }
        for (x, y, w) in self.edges() {
            if y < n {
                b.edge(x, y, w);
            }
        }
        b.build()
    }
}

/// Incremental constructor for [`WeightedGraph`].
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    measure: Vec<Option<f64>>,
    edges: Vec<(usize, usize, f64)>,
    frontier: Vec<bool>,
    leak: Vec<f64>,
    leak_edges: Vec<usize>,
}

impl GraphBuilder {
    pub fn new(n: usize) -> Self {
        GraphBuilder {
            measure: vec![None; n],
            edges: Vec::new(),
            frontier: vec![false; n],
            leak: vec![0.0; n],
            leak_edges: vec![0; n],
        }
    }

    pub fn measure(&mut self, x: usize, mu: f64) -> &mut Self {
        if let Some(m) = self.measure.get_mut(x) {
            *m = Some(mu);
        } else {
            // recorded as an invalid edge so build() reports it
            self.edges.push((x, x, f64::NAN));
        }
        self
    }

    /// Adds the undirected edge `{x, y}`. Zero weights are ignored.
    pub fn edge(&mut self, x: usize, y: usize, w: f64) -> &mut Self {
        if w != 0.0 {
            self.edges.push((x, y, w));
        }
        self
    }

    pub fn frontier(&mut self, x: usize) -> &mut Self {
        if let Some(f) = self.frontier.get_mut(x) {
            *f = true;
        }
        self
    }

    /// Records one edge of weight `mass` dropped at `x` by truncation.
    /// Zero masses are ignored.
    pub fn leak(&mut self, x: usize, mass: f64) -> &mut Self {
        if mass != 0.0 {
            self.leak_many(x, mass, 1);
        }
        self
    }

    /// Records `edges` dropped edges of total weight `mass` at `x`.
    pub fn leak_many(&mut self, x: usize, mass: f64, edges: usize) -> &mut Self {
        if let (Some(l), Some(c)) = (self.leak.get_mut(x), self.leak_edges.get_mut(x)) {
            *l += mass;
            *c += edges;
        }
        self
    }

    pub fn build(&self) -> Result<WeightedGraph> {
        let n = self.measure.len();
        let mut measure = Vec::with_capacity(n);
        for (x, m) in self.measure.iter().enumerate() {
            match m {
                Some(mu) if mu.is_finite() && *mu > 0.0 => measure.push(*mu),
                Some(mu) => {
                    return Err(Error::InvalidGraph(format!(
                        "measure at vertex {x} is {mu}, must be > 0"
                    )))
                }
                None => {
                    return Err(Error::InvalidGraph(format!(
                        "measure at vertex {x} is missing"
                    )))
                }
            }
        }
        let mut directed = Vec::with_capacity(2 * self.edges.len());
        for &(x, y, w) in &self.edges {
            if x >= n || y >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({x}, {y}) references a vertex outside 0..{n}"
                )));
            }
            if x == y {
                return Err(Error::InvalidGraph(format!("self loop at vertex {x}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({x}, {y}) has weight {w}, must be finite and > 0"
                )));
            }
            directed.push((x, y, w));
            directed.push((y, x, w));
        }
        directed.sort_by_key(|a| (a.0, a.1));
        if let Some(d) = directed
            .windows(2)
            .find(|p| p[0].0 == p[1].0 && p[0].1 == p[1].1)
        {
            return Err(Error::InvalidGraph(format!(
                "duplicate edge ({}, {})",
                d[0].0, d[0].1
            )));
        }
        if let Some((x, l)) = self
            .leak
            .iter()
            .enumerate()
            .find(|(_, l)| !(l.is_finite() && **l >= 0.0))
        {
            return Err(Error::InvalidGraph(format!("leak at vertex {x} is {l}")));
        }

        let mut offsets = vec![0usize; n + 1];
        for &(x, _, _) in &directed {
            offsets[x + 1] += 1;
        }
        for x in 0..n {
            offsets[x + 1] += offsets[x];
        }
        let targets: Vec<usize> = directed.iter().map(|e| e.1).collect();
        let weights: Vec<f64> = directed.iter().map(|e| e.2).collect();
        let row_sums = (0..n)
            .map(|x| weights[offsets[x]..offsets[x + 1]].iter().sum())
            .collect();
        Ok(WeightedGraph {
            offsets,
            targets,
            weights,
            measure,
            row_sums,
            frontier: self.frontier.clone(),
            leak: self.leak.clone(),
            leak_edges: self.leak_edges.clone(),
        })
    }
}

/// Sorted, duplicate-free list of vertex ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VertexSet(Vec<usize>);

impl VertexSet {
    pub fn empty() -> Self {
        VertexSet(Vec::new())
    }

    /// Validates ids against a graph of `n` vertices; sorts and rejects duplicates.
    pub fn new(mut ids: Vec<usize>, n: usize) -> Result<Self> {
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Input(format!("duplicate vertex {} in set", w[0])));
        }
        if let Some(&bad) = ids.iter().find(|&&x| x >= n) {
            return Err(Error::UnknownVertex { vertex: bad, n });
        }
        Ok(VertexSet(ids))
    }

    pub(crate) fn from_sorted_unchecked(ids: Vec<usize>) -> Self {
        VertexSet(ids)
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        VertexSet(
            mask.iter()
                .enumerate()
                .filter(|(_, &m)| m)
                .map(|(x, _)| x)
                .collect(),
        )
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &x in &self.0 {
            m[x] = true;
        }
        m
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn is_superset(&self, other: &VertexSet) -> bool {
        other.iter().all(|&x| self.contains(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize, w: f64, mu: f64) -> WeightedGraph {
        let mut b = GraphBuilder::new(n);
        for x in 0..n {
            b.measure(x, mu);
        }
        for x in 1..n {
            b.edge(x - 1, x, w);
        }
        b.build().unwrap()
    }

    #[test]
    fn isolated_vertex_has_zero_degree() {
        let g = WeightedGraph::builder(1).measure(0, 3.0).build().unwrap();
        assert_eq!(g.weighted_degree(0).unwrap(), 0.0);
    }

    #[test]
    fn triangle_degree_is_one() {
        let mut b = GraphBuilder::new(3);
        for x in 0..3 {
            b.measure(x, 2.0);
        }
        b.edge(0, 1, 1.0).edge(1, 2, 1.0).edge(0, 2, 1.0);
        let g = b.build().unwrap();
        for x in 0..3 {
            assert_eq!(g.weighted_degree(x).unwrap(), 1.0);
        }
    }

    #[test]
    fn unknown_vertex_is_an_error() {
        let g = path(3, 1.0, 1.0);
        assert!(matches!(
            g.weighted_degree(7),
            Err(Error::UnknownVertex { vertex: 7, n: 3 })
        ));
    }

    #[test]
    fn neighborhoods() {
        let g = path(3, 1.0, 1.0);
        let n = |ids: Vec<usize>| {
            g.combinatorial_neighborhood(&VertexSet::new(ids, 3).unwrap())
                .unwrap()
        };
        assert!(n(vec![]).is_empty());
        assert_eq!(n(vec![1]).as_slice(), &[0, 1, 2]);

        // star: center 0, leaves 1..=4
        let mut b = GraphBuilder::new(5);
        for x in 0..5 {
            b.measure(x, 1.0);
        }
        for leaf in 1..5 {
            b.edge(0, leaf, 1.0);
        }
        let star = b.build().unwrap();
        let k = VertexSet::new(vec![3], 5).unwrap();
        assert_eq!(
            star.combinatorial_neighborhood(&k).unwrap().as_slice(),
            &[0, 3]
        );
    }

    #[test]
    fn rejects_bad_input() {
        let mut b = GraphBuilder::new(2);
        b.measure(0, 1.0).measure(1, 0.0);
        assert!(b.build().is_err());
        let mut b = GraphBuilder::new(2);
        b.measure(0, 1.0).measure(1, 1.0).edge(0, 1, -1.0);
        assert!(b.build().is_err());
        let mut b = GraphBuilder::new(2);
        b.measure(0, 1.0)
            .measure(1, 1.0)
            .edge(0, 1, 1.0)
            .edge(1, 0, 2.0);
        assert!(b.build().is_err());
        assert!(VertexSet::new(vec![1, 1], 3).is_err());
        assert!(VertexSet::new(vec![5], 3).is_err());
    }

    #[test]
    fn symmetric_lookup_is_bit_identical() {
        let mut b = GraphBuilder::new(3);
        for x in 0..3 {
            b.measure(x, 1.0);
        }
        b.edge(2, 0, 0.1 + 0.2).edge(1, 2, 1.0 / 3.0);
        let g = b.build().unwrap();
        for (x, y, w) in g.edges() {
            assert_eq!(g.weight(x, y).to_bits(), g.weight(y, x).to_bits());
            assert_eq!(g.weight(x, y), w);
        }
        assert_eq!(g.weight(0, 1), 0.0);
        assert_eq!(g.weight(1, 1), 0.0);
    }
}
