//! Edge lengths σ, the induced path metric `d_σ`, and intrinsic certificates.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::GraphFamily;
use crate::graph::{VertexSet, WeightedGraph};
use crate::series::compensated_sum;

pub const REL_TOL: f64 = 1e-12;
pub const ABS_TOL: f64 = 1e-15;

/// Tolerance for comparing a metric quantity against `v`.
pub fn tol(v: f64) -> f64 {
    (REL_TOL * v.abs()).max(ABS_TOL)
}

/// `a ≤ b` up to [`tol`].
pub fn le_tol(a: f64, b: f64) -> bool {
    a <= b + tol(b)
}

/// `a = b` up to [`tol`] of the larger magnitude.
pub fn eq_tol(a: f64, b: f64) -> bool {
    (a - b).abs() <= tol(a.abs().max(b.abs()))
}

/// How edge lengths are chosen for a family or graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SigmaChoice {
    Sigma0,
    Sigma1,
    Natural(f64),
    Family,
}

impl fmt::Display for SigmaChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaChoice::Sigma0 => f.write_str("sigma0"),
            SigmaChoice::Sigma1 => f.write_str("sigma1"),
            SigmaChoice::Natural(k) => write!(f, "natural:{k}"),
            SigmaChoice::Family => f.write_str("family"),
        }
    }
}

impl FromStr for SigmaChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma0" => Ok(SigmaChoice::Sigma0),
            "sigma1" => Ok(SigmaChoice::Sigma1),
            "family" => Ok(SigmaChoice::Family),
            _ => {
                let k = s
                    .strip_prefix("natural:")
                    .and_then(|k| k.parse::<f64>().ok())
                    .filter(|k| k.is_finite() && *k > 0.0)
                    .ok_or_else(|| {
                        Error::Input(format!("unknown sigma `{s}`; expected sigma0, sigma1, natural:K (K > 0) or family"))
                    })?;
                Ok(SigmaChoice::Natural(k))
            }
        }
    }
}

impl From<SigmaChoice> for String {
    fn from(c: SigmaChoice) -> String {
        c.to_string()
    }
}

impl TryFrom<String> for SigmaChoice {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Sigma0,
    Sigma1,
    NaturalScaled,
    Custom,
}

/// Symmetric positive lengths on the edges of one graph, stored parallel to
/// the graph's adjacency rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeLengths {
    provenance: Provenance,
    values: Vec<f64>,
}

impl EdgeLengths {
    fn build(
        g: &WeightedGraph,
        provenance: Provenance,
        f: impl Fn(usize, usize, f64) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(2 * g.edge_count());
        for x in 0..g.len() {
            for (y, w) in g.neighbors(x) {
                // evaluate on the ordered pair so both directions get identical bits
                let s = if x < y { f(x, y, w) } else { f(y, x, w) };
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::Input(format!(
                        "edge length on ({x}, {y}) is {s}, must be finite and > 0"
                    )));
                }
                values.push(s);
            }
        }
        Ok(EdgeLengths { provenance, values })
    }

    /// `σ₀(x,y) = min(Deg(x)^{-1/2}, Deg(y)^{-1/2}, 1)`, with `Deg` the degree
    /// in the untruncated graph (dropped weight included).
    pub fn sigma0(g: &WeightedGraph) -> Result<Self> {
        let inv_sqrt_deg = |x: usize| (g.measure(x) / (g.row_sum(x) + g.leak(x))).sqrt();
        Self::build(g, Provenance::Sigma0, |x, y, _| {
            inv_sqrt_deg(x).min(inv_sqrt_deg(y)).min(1.0)
        })
    }

    /// `σ₁(x,y) = w^{-1/2} min(μ(x)/deg(x), μ(y)/deg(y))^{1/2}`, with `deg`
    /// the neighbor count in the untruncated graph.
    pub fn sigma1(g: &WeightedGraph) -> Result<Self> {
        let ratio = |x: usize| g.measure(x) / g.ambient_degree(x) as f64;
        Self::build(g, Provenance::Sigma1, |x, y, w| {
            (ratio(x).min(ratio(y)) / w).sqrt()
        })
    }

    /// `σ ≡ 1/√K`; requires `Deg ≤ K` everywhere.
    pub fn natural_scaled(g: &WeightedGraph, k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Input(format!(
                "natural metric scale K = {k} must be > 0"
            )));
        }
        let worst = (0..g.len())
            .map(|x| (x, g.ambient_weighted_degree(x)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((x, deg)) = worst.filter(|&(_, d)| d > k) {
            return Err(Error::Precondition(format!(
                "Deg({x}) = {deg} exceeds K = {k}"
            )));
        }
        let s = 1.0 / k.sqrt();
        Self::build(g, Provenance::NaturalScaled, |_, _, _| s)
    }

    pub fn custom(g: &WeightedGraph, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::build(g, Provenance::Custom, |x, y, _| f(x, y))
    }

    /// Lengths from a family's own σ rule, evaluated on labels.
    pub fn from_family(g: &WeightedGraph, fam: &GraphFamily) -> Result<Self> {
        if !fam.has_lengths() {
            return Err(Error::Input(format!(
                "family `{}` declares no edge lengths",
                fam.name()
            )));
        }
        Self::custom(g, |x, y| {
            fam.length(fam.label_of(x), fam.label_of(y))
                .unwrap_or(f64::NAN)
        })
    }

    pub fn for_choice(
        g: &WeightedGraph,
        fam: Option<&GraphFamily>,
        choice: SigmaChoice,
    ) -> Result<Self> {
        match choice {
            SigmaChoice::Sigma0 => Self::sigma0(g),
            SigmaChoice::Sigma1 => Self::sigma1(g),
            SigmaChoice::Natural(k) => Self::natural_scaled(g, k),
            SigmaChoice::Family => match fam {
                Some(f) => Self::from_family(g, f),
                None => Err(Error::Input("sigma `family` needs a family".into())),
            },
        }
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `σ(x, y)`, `None` for non-adjacent pairs.
    pub fn get(&self, g: &WeightedGraph, x: usize, y: usize) -> Option<f64> {
        g.entry(x, y).map(|k| self.values[k])
    }

    /// Lengths of `x`'s edges, in neighbor order.
    pub fn row<'a>(
        &'a self,
        g: &'a WeightedGraph,
        x: usize,
    ) -> impl Iterator<Item = (usize, f64, f64)> + 'a {
        g.neighbors(x)
            .zip(&self.values[g.row(x)])
            .map(|((y, w), &s)| (y, w, s))
    }
}

/// `l_σ` of a vertex path; errors on non-adjacent consecutive vertices.
pub fn path_length(g: &WeightedGraph, sigma: &EdgeLengths, path: &[usize]) -> Result<f64> {
    let mut len = 0.0;
    for p in path.windows(2) {
        len += sigma.get(g, p[0], p[1]).ok_or_else(|| {
            Error::Input(format!("vertices {} and {} are not adjacent", p[0], p[1]))
        })?;
    }
    Ok(len)
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths. Vertices farther than `bound` (or
/// unreachable) get `+∞`.
pub fn dijkstra(g: &WeightedGraph, sigma: &EdgeLengths, src: usize, bound: f64) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.len()];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(HeapItem(0.0, src));
    while let Some(HeapItem(d, x)) = heap.pop() {
        if d > dist[x] {
            continue;
        }
        for (y, _, s) in sigma.row(g, x) {
            let nd = d + s;
            if nd < dist[y] && nd <= bound {
                dist[y] = nd;
                heap.push(HeapItem(nd, y));
            }
        }
    }
    dist
}

/// Path metric `d_σ` on a finite graph with memoized single-source rows.
/// Concurrent queries are safe and return identical values.
pub struct PathMetric<'g> {
    graph: &'g WeightedGraph,
    sigma: EdgeLengths,
    jump: Option<f64>,
    memo: RwLock<HashMap<usize, Arc<Vec<f64>>>>,
}

impl<'g> PathMetric<'g> {
    pub fn new(graph: &'g WeightedGraph, sigma: EdgeLengths) -> Self {
        let jump = (sigma.provenance == Provenance::Sigma0).then_some(1.0);
        PathMetric {
            graph,
            sigma,
            jump,
            memo: RwLock::new(HashMap::new()),
        }
    }

    pub fn with_jump_size(mut self, s: f64) -> Self {
        self.jump = Some(s);
        self
    }

    pub fn graph(&self) -> &'g WeightedGraph {
        self.graph
    }

    pub fn lengths(&self) -> &EdgeLengths {
        &self.sigma
    }

    pub fn declared_jump_size(&self) -> Option<f64> {
        self.jump
    }

    /// Distances from `x` to every vertex (`+∞` when disconnected).
    pub fn distances_from(&self, x: usize) -> Result<Arc<Vec<f64>>> {
        self.graph.check_vertex(x)?;
        if let Some(row) = self.memo.read().expect("memo lock").get(&x) {
            return Ok(row.clone());
        }
        let row = Arc::new(dijkstra(self.graph, &self.sigma, x, f64::INFINITY));
        Ok(self
            .memo
            .write()
            .expect("memo lock")
            .entry(x)
            .or_insert(row)
            .clone())
    }

    pub fn distance(&self, x: usize, y: usize) -> Result<f64> {
        self.graph.check_vertex(y)?;
        Ok(self.distances_from(x)?[y])
    }

    /// Closed ball `B_r(x₀)`, with [`le_tol`] at the rim.
    pub fn ball(&self, x0: usize, r: f64) -> Result<VertexSet> {
        if !(r >= 0.0) {
            return Err(Error::Input(format!("ball radius {r} must be >= 0")));
        }
        self.graph.check_vertex(x0)?;
        let d = dijkstra(self.graph, &self.sigma, x0, r + tol(r));
        Ok(VertexSet::from_mask(
            &d.iter().map(|&v| le_tol(v, r)).collect::<Vec<_>>(),
        ))
    }

    /// Largest `d(x, y)` over adjacent pairs: the smallest admissible jump size.
    pub fn discovered_jump_size(&self) -> f64 {
        let g = self.graph;
        (0..g.len())
            .map(|x| {
                let reach = self.sigma.row(g, x).map(|(_, _, s)| s).fold(0.0, f64::max);
                let d = dijkstra(g, &self.sigma, x, reach);
                g.neighbors(x).map(|(y, _)| d[y]).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Adjacent pairs violating the declared jump size.
    pub fn jump_violations(&self) -> Vec<(usize, usize)> {
        let Some(s) = self.jump else { return vec![] };
        let g = self.graph;
        let mut out = Vec::new();
        for x in 0..g.len() {
            let d = dijkstra(g, &self.sigma, x, s + tol(s));
            out.extend(
                g.neighbors(x)
                    .filter(|&(y, _)| x < y && !le_tol(d[y], s))
                    .map(|(y, _)| (x, y)),
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Intrinsic,
    StronglyIntrinsic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicCertificate {
    pub kind: CertificateKind,
    /// `1 − (1/μ(x)) Σ_y w(x,y) ℓ(x,y)²` per vertex.
    pub slacks: Vec<f64>,
    pub worst_vertex: Option<usize>,
    pub min_slack: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl IntrinsicCertificate {
    fn from_slacks(kind: CertificateKind, slacks: Vec<f64>, tolerance: f64) -> Self {
        let worst = slacks
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(x, _)| x);
        let min_slack = worst.map_or(f64::INFINITY, |x| slacks[x]);
        let verdict = if min_slack >= -tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        IntrinsicCertificate {
            kind,
            slacks,
            worst_vertex: worst,
            min_slack,
            tolerance,
            verdict,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Tolerance of the certificates: float noise only.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-15;

pub fn strongly_intrinsic_check(g: &WeightedGraph, sigma: &EdgeLengths) -> IntrinsicCertificate {
    let slacks = (0..g.len())
        .map(|x| 1.0 - compensated_sum(sigma.row(g, x).map(|(_, w, s)| w * s * s)) / g.measure(x))
        .collect();
    IntrinsicCertificate::from_slacks(
        CertificateKind::StronglyIntrinsic,
        slacks,
        CERTIFICATE_TOLERANCE,
    )
}

pub fn intrinsic_check(m: &PathMetric<'_>) -> IntrinsicCertificate {
    let g = m.graph();
    let slacks = (0..g.len())
        .map(|x| {
            let reach = m.lengths().row(g, x).map(|(_, _, s)| s).fold(0.0, f64::max);
            let d = dijkstra(g, m.lengths(), x, reach);
            1.0 - compensated_sum(g.neighbors(x).map(|(y, w)| w * d[y] * d[y])) / g.measure(x)
        })
        .collect();
    IntrinsicCertificate::from_slacks(CertificateKind::Intrinsic, slacks, CERTIFICATE_TOLERANCE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    fn graph(mu: &[f64], edges: &[(usize, usize, f64)]) -> WeightedGraph {
        let mut b = GraphBuilder::new(mu.len());
        for (x, &m) in mu.iter().enumerate() {
            b.measure(x, m);
        }
        for &(x, y, w) in edges {
            b.edge(x, y, w);
        }
        b.build().unwrap()
    }

    #[test]
    fn sigma0_examples() {
        let g = graph(&[1.0, 1.0], &[(0, 1, 1.0)]);
        assert_eq!(EdgeLengths::sigma0(&g).unwrap().get(&g, 0, 1), Some(1.0));
        let g = graph(&[8.0; 3], &[(0, 1, 1.0), (1, 2, 1.0)]);
        let s = EdgeLengths::sigma0(&g).unwrap();
        assert_eq!(s.get(&g, 1, 2), Some(1.0));
        assert!(strongly_intrinsic_check(&g, &s).passed());
    }

    #[test]
    fn sigma1_examples() {
        let g = graph(&[1.0, 1.0], &[(0, 1, 4.0)]);
        assert_eq!(EdgeLengths::sigma1(&g).unwrap().get(&g, 0, 1), Some(0.5));
        let g = graph(&[2.0; 3], &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
        let s = EdgeLengths::sigma1(&g).unwrap();
        for (x, y, _) in g.edges() {
            assert_eq!(s.get(&g, x, y), Some(1.0));
        }
    }

    #[test]
    fn natural_metric_requires_degree_bound() {
        let g = graph(&[1.0; 3], &[(0, 1, 1.0), (1, 2, 1.0)]);
        assert!(matches!(
            EdgeLengths::natural_scaled(&g, 1.0),
            Err(Error::Precondition(_))
        ));
        let s = EdgeLengths::natural_scaled(&g, 4.0).unwrap();
        assert_eq!(s.get(&g, 0, 1), Some(0.5));
        let fail = strongly_intrinsic_check(&g, &EdgeLengths::custom(&g, |_, _| 1.0).unwrap());
        assert_eq!(fail.verdict, Verdict::Fail);
        assert_eq!(fail.worst_vertex, Some(1));
    }

    #[test]
    fn distances_on_path_and_cycle() {
        let p = graph(&[1.0; 3], &[(0, 1, 1.0), (1, 2, 1.0)]);
        let sp = EdgeLengths::custom(&p, |x, _| if x == 0 { 1.0 } else { 2.0 }).unwrap();
        let m = PathMetric::new(&p, sp);
        assert_eq!(m.distance(0, 2).unwrap(), 3.0);
        assert_eq!(m.distance(1, 1).unwrap(), 0.0);

        let c = graph(
            &[1.0; 4],
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)],
        );
        let sc = EdgeLengths::custom(&c, |x, y| if (x, y) == (0, 3) { 10.0 } else { 1.0 }).unwrap();
        let m = PathMetric::new(&c, sc);
        assert_eq!(m.distance(0, 3).unwrap(), 3.0);
        assert_eq!(m.ball(0, 0.0).unwrap().as_slice(), &[0]);
        assert_eq!(m.ball(0, 2.0).unwrap().as_slice(), &[0, 1, 2]);
    }

    #[test]
    fn disconnected_pairs_are_infinite() {
        let g = graph(&[1.0; 3], &[(0, 1, 1.0)]);
        let m = PathMetric::new(&g, EdgeLengths::sigma0(&g).unwrap());
        assert_eq!(m.distance(0, 2).unwrap(), f64::INFINITY);
    }

    #[test]
    fn sigma_choice_parses() {
        assert_eq!(
            "natural:4".parse::<SigmaChoice>().unwrap(),
            SigmaChoice::Natural(4.0)
        );
        assert_eq!(
            "sigma1".parse::<SigmaChoice>().unwrap(),
            SigmaChoice::Sigma1
        );
        assert!("natural:-1".parse::<SigmaChoice>().is_err());
        assert!("euclid".parse::<SigmaChoice>().is_err());
        for c in [
            SigmaChoice::Sigma0,
            SigmaChoice::Natural(0.5),
            SigmaChoice::Family,
        ] {
            assert_eq!(c.to_string().parse::<SigmaChoice>().unwrap(), c);
        }
    }
}
