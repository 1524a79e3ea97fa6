//! Energy form, norms, gradient and formal Laplacian, plus numeric checks of
//! the Green, Leibniz and Caccioppoli identities on finite graphs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{VertexSet, WeightedGraph};
use crate::metric::PathMetric;
use crate::par::Execution;
use crate::random::{random_function, random_graph_between, trial_rng};
use crate::series::compensated_sum;

/// Tolerance factor for identity residuals, relative to [`scale`].
pub const IDENTITY_TOLERANCE: f64 = 1e-9;
/// Slack allowed in the normal-contraction energy inequality.
pub const CONTRACTION_TOLERANCE: f64 = 1e-12;
/// Slack allowed in the cut-off gradient bound.
pub const GRADIENT_BOUND_TOLERANCE: f64 = 1e-12;

/// `max(|a|, |b|, ..., 1)`.
pub fn scale(values: &[f64]) -> f64 {
    values.iter().fold(1.0, |m, v| m.max(v.abs()))
}

/// Real function on the vertices of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexFunction {
    values: Vec<f64>,
}

impl VertexFunction {
    pub fn new(g: &WeightedGraph, values: Vec<f64>) -> Result<Self> {
        if values.len() != g.len() {
            return Err(Error::Input(format!(
                "function has {} values, graph has {} vertices",
                values.len(),
                g.len()
            )));
        }
        Ok(VertexFunction { values })
    }

    pub fn constant(g: &WeightedGraph, c: f64) -> Self {
        VertexFunction {
            values: vec![c; g.len()],
        }
    }

    pub fn from_fn(g: &WeightedGraph, mut f: impl FnMut(usize) -> f64) -> Self {
        VertexFunction {
            values: (0..g.len()).map(&mut f).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize) -> f64 {
        self.values[x]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn support(&self) -> VertexSet {
        VertexSet::from_mask(&self.values.iter().map(|&v| v != 0.0).collect::<Vec<_>>())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        VertexFunction {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check(&self, g: &WeightedGraph) -> Result<()> {
        if self.values.len() == g.len() {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "function has {} values, graph has {} vertices",
                self.values.len(),
                g.len()
            )))
        }
    }
}

/// `Q̃(f) = ½ Σ_{x,y} w(x,y)(f(x) − f(y))²`, summed once per edge.
pub fn energy(g: &WeightedGraph, f: &VertexFunction) -> f64 {
    compensated_sum(g.edges().map(|(x, y, w)| {
        let d = f.get(x) - f.get(y);
        w * d * d
    }))
}

/// `‖f‖² = Σ_x f(x)² μ(x)`.
pub fn norm_sq(g: &WeightedGraph, f: &VertexFunction) -> f64 {
    compensated_sum((0..g.len()).map(|x| f.get(x) * f.get(x) * g.measure(x)))
}

/// `‖f‖_Q̃ = (Q̃(f) + ‖f‖²)^{1/2}`.
pub fn qnorm(g: &WeightedGraph, f: &VertexFunction) -> f64 {
    (energy(g, f) + norm_sq(g, f)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormReport {
    pub energy: f64,
    pub norm_sq: f64,
    pub qnorm: f64,
    /// Energy of the dropped edges if `f` is extended by zero past the
    /// window; present when the support touches a vertex with dropped edges.
    pub frontier_leak: Option<f64>,
}

pub fn evaluate(g: &WeightedGraph, f: &VertexFunction) -> Result<FormReport> {
    f.check(g)?;
    let energy = energy(g, f);
    let norm_sq = norm_sq(g, f);
    let touches = (0..g.len()).any(|x| f.get(x) != 0.0 && (g.leak(x) > 0.0 || g.is_frontier(x)));
    let frontier_leak =
        touches.then(|| compensated_sum((0..g.len()).map(|x| g.leak(x) * f.get(x) * f.get(x))));
    Ok(FormReport {
        energy,
        norm_sq,
        qnorm: (energy + norm_sq).sqrt(),
        frontier_leak,
    })
}

/// `|∇f|²(x) = Σ_y w(x,y)(f(x) − f(y))²`.
pub fn gradient_sq(g: &WeightedGraph, f: &VertexFunction, x: usize) -> Result<f64> {
    g.check_vertex(x)?;
    f.check(g)?;
    Ok(grad_sq(g, f, x))
}

fn grad_sq(g: &WeightedGraph, f: &VertexFunction, x: usize) -> f64 {
    compensated_sum(g.neighbors(x).map(|(y, w)| {
        let d = f.get(x) - f.get(y);
        w * d * d
    }))
}

/// `(∇f·∇h)(x) = Σ_y w(x,y)(f(x) − f(y))(h(x) − h(y))`.
pub fn pairing(g: &WeightedGraph, f: &VertexFunction, h: &VertexFunction, x: usize) -> f64 {
    compensated_sum(
        g.neighbors(x)
            .map(|(y, w)| w * (f.get(x) - f.get(y)) * (h.get(x) - h.get(y))),
    )
}

/// `(Δf)(x) = (1/μ(x)) Σ_y w(x,y)(f(x) − f(y))` over stored edges.
pub fn laplacian(g: &WeightedGraph, f: &VertexFunction, x: usize) -> Result<f64> {
    g.check_vertex(x)?;
    f.check(g)?;
    Ok(lap(g, f, x))
}

fn lap(g: &WeightedGraph, f: &VertexFunction, x: usize) -> f64 {
    compensated_sum(g.neighbors(x).map(|(y, w)| w * (f.get(x) - f.get(y)))) / g.measure(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplacianReport {
    pub values: VertexFunction,
    /// Vertices whose value depends on the truncation.
    pub truncation_dependent: VertexSet,
}

pub fn laplacian_all(g: &WeightedGraph, f: &VertexFunction) -> Result<LaplacianReport> {
    f.check(g)?;
    let values = VertexFunction::from_fn(g, |x| lap(g, f, x));
    let mask: Vec<bool> = (0..g.len())
        .map(|x| g.is_frontier(x) || g.leak_edges(x) > 0)
        .collect();
    Ok(LaplacianReport {
        values,
        truncation_dependent: VertexSet::from_mask(&mask),
    })
}

fn touches_truncation(g: &WeightedGraph, f: &VertexFunction) -> bool {
    (0..g.len()).any(|x| f.get(x) != 0.0 && (g.is_frontier(x) || g.leak_edges(x) > 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenCheck {
    /// `Σ (Δu) v μ`
    pub a: f64,
    /// `Σ u (Δv) μ`
    pub b: f64,
    /// `½ Σ (∇u·∇v)`
    pub c: f64,
    pub residual_ab: f64,
    pub residual_bc: f64,
    pub scale: f64,
    /// `v` is nonzero where truncation edited the graph.
    pub frontier_warning: bool,
}

impl GreenCheck {
    pub fn passed(&self) -> bool {
        self.residual_ab.max(self.residual_bc) <= IDENTITY_TOLERANCE * self.scale
    }
}

pub fn green_identity_check(
    g: &WeightedGraph,
    u: &VertexFunction,
    v: &VertexFunction,
) -> Result<GreenCheck> {
    u.check(g)?;
    v.check(g)?;
    let n = g.len();
    let a = compensated_sum((0..n).map(|x| lap(g, u, x) * v.get(x) * g.measure(x)));
    let b = compensated_sum((0..n).map(|x| u.get(x) * lap(g, v, x) * g.measure(x)));
    let c = 0.5 * compensated_sum((0..n).map(|x| pairing(g, u, v, x)));
    Ok(GreenCheck {
        a,
        b,
        c,
        residual_ab: (a - b).abs(),
        residual_bc: (b - c).abs(),
        scale: scale(&[a, b, c]),
        frontier_warning: touches_truncation(g, v),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeibnizCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub scale: f64,
}

impl LeibnizCheck {
    pub fn passed(&self) -> bool {
        self.residual <= IDENTITY_TOLERANCE * self.scale
    }
}

/// `Σ ∇(fg)·∇h` against `Σ_x f(x)(∇g·∇h)(x) + Σ_{x,y} w g(y)(f(x)−f(y))(h(x)−h(y))`.
pub fn leibniz_check(
    g_: &WeightedGraph,
    f: &VertexFunction,
    g: &VertexFunction,
    h: &VertexFunction,
) -> Result<LeibnizCheck> {
    for k in [f, g, h] {
        k.check(g_)?;
    }
    let n = g_.len();
    let fg = VertexFunction::from_fn(g_, |x| f.get(x) * g.get(x));
    let lhs = compensated_sum((0..n).map(|x| pairing(g_, &fg, h, x)));
    let first = compensated_sum((0..n).map(|x| f.get(x) * pairing(g_, g, h, x)));
    let second = compensated_sum((0..n).flat_map(|x| {
        g_.neighbors(x)
            .map(move |(y, w)| w * g.get(y) * (f.get(x) - f.get(y)) * (h.get(x) - h.get(y)))
    }));
    let rhs = first + second;
    Ok(LeibnizCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        scale: scale(&[lhs, first, second]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaccioppoliCheck {
    /// `−Σ (Δu) u v² μ`
    pub lhs: f64,
    /// `½ Σ u² |∇v|²`
    pub rhs: f64,
    pub slack: f64,
    pub scale: f64,
}

impl CaccioppoliCheck {
    pub fn passed(&self) -> bool {
        self.slack >= -IDENTITY_TOLERANCE * self.scale
    }
}

pub fn caccioppoli_check(
    g: &WeightedGraph,
    u: &VertexFunction,
    v: &VertexFunction,
) -> Result<CaccioppoliCheck> {
    u.check(g)?;
    v.check(g)?;
    let n = g.len();
    let lhs = -compensated_sum(
        (0..n).map(|x| lap(g, u, x) * u.get(x) * v.get(x) * v.get(x) * g.measure(x)),
    );
    let rhs = 0.5 * compensated_sum((0..n).map(|x| u.get(x) * u.get(x) * grad_sq(g, v, x)));
    Ok(CaccioppoliCheck {
        lhs,
        rhs,
        slack: rhs - lhs,
        scale: scale(&[lhs, rhs]),
    })
}

/// `(f ∨ 0) ∧ 1`.
pub fn normal_contraction(f: &VertexFunction) -> VertexFunction {
    f.map(|v| v.clamp(0.0, 1.0))
}

/// `η(x) = ((R − d(x, x₀)) / (R − r))₊ ∧ 1`.
pub fn cutoff_eta(m: &PathMetric<'_>, x0: usize, r: f64, big_r: f64) -> Result<VertexFunction> {
    if !(r >= 0.0 && r < big_r) {
        return Err(Error::Input(format!(
            "cut-off radii need 0 <= r < R, got r = {r}, R = {big_r}"
        )));
    }
    let d = m.distances_from(x0)?;
    Ok(VertexFunction::from_fn(m.graph(), |x| {
        ((big_r - d[x]) / (big_r - r)).clamp(0.0, 1.0)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoundCheck {
    /// `max_x |∇η|²(x) − μ(x)/(R − r)²`.
    pub max_excess: f64,
    pub worst_vertex: Option<usize>,
}

impl GradientBoundCheck {
    pub fn passed(&self) -> bool {
        self.max_excess <= GRADIENT_BOUND_TOLERANCE
    }
}

/// `|∇η|²(x) ≤ μ(x)/(R − r)²` at every vertex.
pub fn cutoff_gradient_check(
    g: &WeightedGraph,
    eta: &VertexFunction,
    r: f64,
    big_r: f64,
) -> Result<GradientBoundCheck> {
    eta.check(g)?;
    let k = 1.0 / ((big_r - r) * (big_r - r));
    let (worst_vertex, max_excess) = (0..g.len())
        .map(|x| (Some(x), grad_sq(g, eta, x) - g.measure(x) * k))
        .fold(
            (None, f64::NEG_INFINITY),
            |a, b| if b.1 > a.1 { b } else { a },
        );
    Ok(GradientBoundCheck {
        max_excess,
        worst_vertex,
    })
}

/// Outcome of one randomized trial of the identity suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityTrial {
    pub trial: u64,
    pub vertices: usize,
    pub green_residual: f64,
    pub green_scale: f64,
    pub leibniz_residual: f64,
    pub leibniz_scale: f64,
    pub caccioppoli_slack: f64,
    pub caccioppoli_scale: f64,
    /// `Q̃((f∨0)∧1) − Q̃(f)`
    pub contraction_gap: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentitySummary {
    pub seed: u64,
    pub trials: usize,
    pub failures: usize,
    /// Largest residual relative to its scale.
    pub worst_green: f64,
    pub worst_leibniz: f64,
    /// Smallest Caccioppoli slack relative to its scale.
    pub worst_caccioppoli: f64,
    pub worst_contraction_gap: f64,
    pub failed_trials: Vec<u64>,
}

/// Random `u, v, f, g, h` on `graph`; `v` and `f` avoid truncation-edited
/// vertices.
pub fn identity_trial(graph: &WeightedGraph, seed: u64, trial: u64) -> Result<IdentityTrial> {
    let mut rng = trial_rng(seed, trial);
    run_trial(graph, &mut rng, trial)
}

fn run_trial(graph: &WeightedGraph, rng: &mut impl rand::Rng, trial: u64) -> Result<IdentityTrial> {
    let interior = |x: usize| !graph.is_frontier(x) && graph.leak_edges(x) == 0;
    let u = random_function(rng, graph, 2.0, |_| true);
    let v = random_function(rng, graph, 2.0, interior);
    let f = random_function(rng, graph, 2.0, interior);
    let g = random_function(rng, graph, 2.0, |_| true);
    let h = random_function(rng, graph, 2.0, |_| true);
    let green = green_identity_check(graph, &u, &v)?;
    let leibniz = leibniz_check(graph, &f, &g, &h)?;
    let cacc = caccioppoli_check(graph, &u, &v)?;
    let contraction_gap = energy(graph, &normal_contraction(&f)) - energy(graph, &f);
    let passed = green.passed()
        && leibniz.passed()
        && cacc.passed()
        && contraction_gap <= CONTRACTION_TOLERANCE;
    Ok(IdentityTrial {
        trial,
        vertices: graph.len(),
        green_residual: green.residual_ab.max(green.residual_bc),
        green_scale: green.scale,
        leibniz_residual: leibniz.residual,
        leibniz_scale: leibniz.scale,
        caccioppoli_slack: cacc.slack,
        caccioppoli_scale: cacc.scale,
        contraction_gap,
        passed,
    })
}

pub fn summarize(seed: u64, trials: &[IdentityTrial]) -> IdentitySummary {
    let failed_trials: Vec<u64> = trials
        .iter()
        .filter(|t| !t.passed)
        .map(|t| t.trial)
        .collect();
    IdentitySummary {
        seed,
        trials: trials.len(),
        failures: failed_trials.len(),
        worst_green: trials
            .iter()
            .map(|t| t.green_residual / t.green_scale)
            .fold(0.0, f64::max),
        worst_leibniz: trials
            .iter()
            .map(|t| t.leibniz_residual / t.leibniz_scale)
            .fold(0.0, f64::max),
        worst_caccioppoli: trials
            .iter()
            .map(|t| t.caccioppoli_slack / t.caccioppoli_scale)
            .fold(f64::INFINITY, f64::min),
        worst_contraction_gap: trials
            .iter()
            .map(|t| t.contraction_gap)
            .fold(f64::NEG_INFINITY, f64::max),
        failed_trials,
    }
}

/// Identity suite on fresh random graphs with 2 to `max_vertices` vertices.
pub fn random_identity_suite(
    seed: u64,
    trials: usize,
    max_vertices: usize,
    exec: Execution,
) -> Vec<IdentityTrial> {
    exec.map_range(trials, |t| {
        let mut rng = trial_rng(seed, t as u64);
        let graph = random_graph_between(&mut rng, 2, max_vertices);
        run_trial(&graph, &mut rng, t as u64).expect("functions match the graph")
    })
}

/// Identity suite with random functions on one fixed graph.
pub fn identity_suite_on(
    graph: &WeightedGraph,
    seed: u64,
    trials: usize,
    exec: Execution,
) -> Vec<IdentityTrial> {
    exec.map_range(trials, |t| {
        identity_trial(graph, seed, t as u64).expect("functions match the graph")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;
    use crate::metric::EdgeLengths;

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
    fn constants_and_single_edge() {
        let g = graph(&[1.0, 2.0], &[(0, 1, 3.0)]);
        let c = VertexFunction::constant(&g, 2.0);
        let r = evaluate(&g, &c).unwrap();
        assert_eq!(r.energy, 0.0);
        assert_eq!(r.norm_sq, 12.0);
        let f = VertexFunction::new(&g, vec![0.0, 2.0]).unwrap();
        assert_eq!(energy(&g, &f), 12.0);
        assert_eq!(
            gradient_sq(&g, &f, 0).unwrap() + gradient_sq(&g, &f, 1).unwrap(),
            24.0
        );
    }

    #[test]
    fn laplacian_single_edge() {
        let g = graph(&[1.0, 4.0], &[(0, 1, 2.0)]);
        let f = VertexFunction::new(&g, vec![0.0, 1.0]).unwrap();
        let l = laplacian_all(&g, &f).unwrap();
        assert_eq!(l.values.values(), &[-2.0, 0.5]);
        assert!(l.truncation_dependent.is_empty());
    }

    #[test]
    fn star_gradient_at_center() {
        let g = graph(
            &[1.0; 5],
            &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (0, 4, 1.0)],
        );
        let f = VertexFunction::from_fn(&g, |x| if x == 0 { 1.0 } else { 0.0 });
        assert_eq!(gradient_sq(&g, &f, 0).unwrap(), 4.0);
    }

    #[test]
    fn identities_hold_on_a_fixed_graph() {
        let g = graph(
            &[0.5, 1.0, 2.0, 0.25],
            &[(0, 1, 1.0), (1, 2, 3.0), (2, 3, 0.5), (0, 3, 2.0)],
        );
        let u = VertexFunction::new(&g, vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let v = VertexFunction::new(&g, vec![0.0, 1.0, -1.0, 2.0]).unwrap();
        assert!(green_identity_check(&g, &u, &v).unwrap().passed());
        assert!(leibniz_check(&g, &v, &u, &v).unwrap().passed());
        assert!(caccioppoli_check(&g, &u, &v).unwrap().passed());
        let zero = VertexFunction::constant(&g, 0.0);
        let c = caccioppoli_check(&g, &u, &zero).unwrap();
        assert_eq!((c.lhs, c.rhs), (0.0, 0.0));
    }

    #[test]
    fn cutoff_on_natural_metric() {
        let g = graph(&[1.0; 3], &[(0, 1, 0.5), (1, 2, 0.5)]);
        let m = PathMetric::new(&g, EdgeLengths::natural_scaled(&g, 1.0).unwrap());
        let eta = cutoff_eta(&m, 0, 0.0, 1.0).unwrap();
        assert_eq!(eta.values(), &[1.0, 0.0, 0.0]);
        assert!(cutoff_gradient_check(&g, &eta, 0.0, 1.0).unwrap().passed());
        let wide = cutoff_eta(&m, 0, 10.0, 20.0).unwrap();
        assert_eq!(wide.values(), &[1.0; 3]);
        assert!(cutoff_eta(&m, 0, 2.0, 1.0).is_err());
    }

    #[test]
    fn leak_reported_when_support_reaches_frontier() {
        let mut b = GraphBuilder::new(2);
        b.measure(0, 1.0)
            .measure(1, 1.0)
            .edge(0, 1, 1.0)
            .frontier(1)
            .leak(1, 2.0);
        let g = b.build().unwrap();
        let f = VertexFunction::new(&g, vec![0.0, 3.0]).unwrap();
        assert_eq!(evaluate(&g, &f).unwrap().frontier_leak, Some(18.0));
        let inner = VertexFunction::new(&g, vec![1.0, 0.0]).unwrap();
        assert_eq!(evaluate(&g, &inner).unwrap().frontier_leak, None);
    }

    #[test]
    fn small_random_suite_passes_in_both_modes() {
        let a = random_identity_suite(3, 50, 10, Execution::Parallel);
        let b = random_identity_suite(3, 50, 10, Execution::Sequential);
        assert_eq!(a, b);
        assert_eq!(summarize(3, &a).failures, 0);
    }
}
