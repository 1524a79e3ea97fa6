//! Capacities and equilibrium potentials.
//!
//! [`equilibrium`] solves the constrained minimization on a finite graph;
//! the ladder module computes tail capacities of linear boundary ends and the
//! codim module samples boundary neighborhoods for Minkowski codimension.

mod codim;
mod ladder;

pub use codim::{
    codim_polarity_test, minkowski_samples, CodimEstimate, CodimSample, PolarityStep, PolarityTest,
};
pub use ladder::{
    boundary_alternative_evidence, boundary_capacity, default_tails, ladder_potential, tail_limit,
    AlternativeVerdict, BoundaryCapacity, CapRegime, CapacitySequence, PLATEAU_CHANGE,
    POSITIVE_FLOOR, RESOLUTION, ZERO_SLOPE, ZERO_THRESHOLD,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{energy, norm_sq, VertexFunction};
use crate::graph::{VertexSet, WeightedGraph};
use crate::solver::{pcg, Preconditioner, SpdMatrix};

/// Slack on `0 ≤ e ≤ 1`.
pub const BOUNDS_TOLERANCE: f64 = 1e-10;
/// Bound on the first-order residual, relative to the right-hand side scale.
pub const FIRST_ORDER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub potential: VertexFunction,
    pub cap: f64,
    pub energy: f64,
    pub norm_sq: f64,
    pub constraint: VertexSet,
    /// `max_{x∉U} μ(x)·|((Δ+1)e)(x)|`.
    pub residual: f64,
    /// `max(1, max_x Σ_{y∈U} w(x,y))`.
    pub residual_scale: f64,
    pub iterations: usize,
    pub preconditioner: Option<Preconditioner>,
    pub min: f64,
    pub max: f64,
}

impl EquilibriumResult {
    pub fn bounds_hold(&self) -> bool {
        self.min >= -BOUNDS_TOLERANCE && self.max <= 1.0 + BOUNDS_TOLERANCE
    }

    pub fn first_order_holds(&self) -> bool {
        self.residual <= FIRST_ORDER_TOLERANCE * self.residual_scale
    }
}

/// Minimizes `Q̃(u) + ‖u‖²` over `u` with `u = 1` on `U`. The outer frontier
/// of a truncation is left free.
pub fn equilibrium(g: &WeightedGraph, u: &VertexSet) -> Result<EquilibriumResult> {
    if u.is_empty() {
        return Err(Error::Input("constraint set U is empty".into()));
    }
    for &x in u.iter() {
        g.check_vertex(x)?;
    }
    let n = g.len();
    let fixed = u.mask(n);
    let mut index = vec![usize::MAX; n];
    let free: Vec<usize> = (0..n).filter(|&x| !fixed[x]).collect();
    for (i, &x) in free.iter().enumerate() {
        index[x] = i;
    }
    let mut diag = Vec::with_capacity(free.len());
    let mut rows = Vec::with_capacity(free.len());
    let mut rhs = Vec::with_capacity(free.len());
    for &x in &free {
        diag.push(g.row_sum(x) + g.measure(x));
        let mut row = Vec::new();
        let mut b = 0.0;
        for (y, w) in g.neighbors(x) {
            if fixed[y] {
                b += w;
            } else {
                row.push((index[y], -w));
            }
        }
        rows.push(row);
        rhs.push(b);
    }
    let residual_scale = rhs.iter().fold(1.0f64, |m, &b| m.max(b));
    let (values, iterations, preconditioner) = if free.is_empty() {
        (vec![1.0; n], 0, None)
    } else {
        let sol = pcg(&SpdMatrix::from_rows(diag, rows), &rhs)?;
        let mut values = vec![1.0; n];
        for (i, &x) in free.iter().enumerate() {
            values[x] = sol.x[i];
        }
        (values, sol.iterations, Some(sol.preconditioner))
    };
    let residual = free
        .iter()
        .map(|&x| {
            let lap: f64 = g
                .neighbors(x)
                .map(|(y, w)| w * (values[x] - values[y]))
                .sum();
            (lap + g.measure(x) * values[x]).abs()
        })
        .fold(0.0, f64::max);
    let potential = VertexFunction::new(g, values)?;
    let (e, m) = (energy(g, &potential), norm_sq(g, &potential));
    let min = potential
        .values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let max = potential
        .values()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EquilibriumResult {
        cap: (e + m).sqrt(),
        energy: e,
        norm_sq: m,
        potential,
        constraint: u.clone(),
        residual,
        residual_scale,
        iterations,
        preconditioner,
        min,
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    fn path3() -> WeightedGraph {
        let mut b = GraphBuilder::new(3);
        for x in 0..3 {
            b.measure(x, 1.0);
        }
        b.edge(0, 1, 1.0).edge(1, 2, 1.0);
        b.build().unwrap()
    }

    #[test]
    fn hand_solved_path() {
        let g = path3();
        let r = equilibrium(&g, &VertexSet::new(vec![2], 3).unwrap()).unwrap();
        let e = r.potential.values();
        assert!((e[0] - 0.2).abs() < 1e-14 && (e[1] - 0.4).abs() < 1e-14 && e[2] == 1.0);
        assert!((r.cap - (8.0f64 / 5.0).sqrt()).abs() < 1e-14);
        assert!(r.bounds_hold() && r.first_order_holds());
        assert_eq!(r.preconditioner, Some(Preconditioner::Tridiagonal));
    }

    #[test]
    fn all_vertices_and_single_vertex() {
        let g = path3();
        let r = equilibrium(&g, &VertexSet::new(vec![0, 1, 2], 3).unwrap()).unwrap();
        assert_eq!(r.cap, 3f64.sqrt());
        let mut b = GraphBuilder::new(1);
        b.measure(0, 0.37);
        let one = b.build().unwrap();
        assert_eq!(
            equilibrium(&one, &VertexSet::new(vec![0], 1).unwrap())
                .unwrap()
                .cap,
            0.37f64.sqrt()
        );
    }

    #[test]
    fn empty_or_foreign_constraint_is_rejected() {
        let g = path3();
        assert!(matches!(
            equilibrium(&g, &VertexSet::empty()),
            Err(Error::Input(_))
        ));
        let big = VertexSet::new(vec![7], 10).unwrap();
        assert!(matches!(
            equilibrium(&g, &big),
            Err(Error::UnknownVertex { .. })
        ));
    }
}
