//! Sparse symmetric positive definite systems and preconditioned CG.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RELATIVE_RESIDUAL: f64 = 1e-12;
pub const ITERATIONS_PER_UNKNOWN: usize = 50;

/// Symmetric matrix in compressed rows: diagonal kept apart, off-diagonal
/// entries stored in both rows.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    diag: Vec<f64>,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SpdMatrix {
    /// `rows[i]` lists the off-diagonal entries `(j, a_ij)` of row `i`.
    pub fn from_rows(diag: Vec<f64>, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        offsets.push(0);
        for row in rows {
            for (j, a) in row {
                cols.push(j);
                vals.push(a);
            }
            offsets.push(cols.len());
        }
        SpdMatrix {
            diag,
            offsets,
            cols,
            vals,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    pub fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.diag[i] * x[i] + self.row(i).map(|(j, a)| a * x[j]).sum::<f64>();
        }
    }

    fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    /// Exact solve on a matrix whose graph is a disjoint union of paths.
    Tridiagonal,
    Jacobi,
}

enum Precond {
    Jacobi(Vec<f64>),
    /// Per path: vertex order, Thomas factors `c'` and pivots.
    Paths(Vec<PathFactor>),
}

struct PathFactor {
    order: Vec<usize>,
    upper: Vec<f64>,
    pivot: Vec<f64>,
}

impl Precond {
    fn build(a: &SpdMatrix) -> Precond {
        match path_orders(a) {
            Some(paths) => Precond::Paths(
                paths
                    .into_iter()
                    .map(|order| PathFactor::new(a, order))
                    .collect(),
            ),
            None => Precond::Jacobi(a.diag.iter().map(|d| 1.0 / d).collect()),
        }
    }

    fn kind(&self) -> Preconditioner {
        match self {
            Precond::Jacobi(_) => Preconditioner::Jacobi,
            Precond::Paths(_) => Preconditioner::Tridiagonal,
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::Jacobi(inv) => {
                for i in 0..r.len() {
                    z[i] = inv[i] * r[i];
                }
            }
            Precond::Paths(paths) => {
                for p in paths {
                    p.solve(r, z);
                }
            }
        }
    }
}

/// Vertex orders of the path components, or `None` if some component is
/// not a path.
fn path_orders(a: &SpdMatrix) -> Option<Vec<Vec<usize>>> {
    let n = a.len();
    if (0..n).any(|i| a.degree(i) > 2) {
        return None;
    }
    let mut seen = vec![false; n];
    let mut paths = Vec::new();
    for start in 0..n {
        if seen[start] || a.degree(start) == 2 {
            continue;
        }
        let mut order = vec![start];
        seen[start] = true;
        let mut prev = usize::MAX;
        let mut cur = start;
        while let Some(next) = a.row(cur).map(|(j, _)| j).find(|&j| j != prev) {
            if seen[next] {
                return None;
            }
            seen[next] = true;
            order.push(next);
            prev = cur;
            cur = next;
        }
        paths.push(order);
    }
    // anything unvisited lies on a cycle
    seen.iter().all(|&s| s).then_some(paths)
}

impl PathFactor {
    fn new(a: &SpdMatrix, order: Vec<usize>) -> Self {
        let m = order.len();
        let off = |k: usize| {
            a.row(order[k])
                .find(|&(j, _)| j == order[k + 1])
                .map_or(0.0, |(_, v)| v)
        };
        let mut upper = vec![0.0; m];
        let mut pivot = vec![0.0; m];
        for k in 0..m {
            let lower = if k > 0 { off(k - 1) } else { 0.0 };
            pivot[k] = a.diag[order[k]] - if k > 0 { lower * upper[k - 1] } else { 0.0 };
            upper[k] = if k + 1 < m { off(k) / pivot[k] } else { 0.0 };
        }
        PathFactor {
            order,
            upper,
            pivot,
        }
    }

    fn solve(&self, r: &[f64], z: &mut [f64]) {
        let m = self.order.len();
        let mut y = vec![0.0; m];
        for k in 0..m {
            let lower = if k > 0 {
                self.upper[k - 1] * self.pivot[k - 1]
            } else {
                0.0
            };
            let prev = if k > 0 { y[k - 1] } else { 0.0 };
            y[k] = (r[self.order[k]] - lower * prev) / self.pivot[k];
        }
        for k in (0..m.saturating_sub(1)).rev() {
            y[k] -= self.upper[k] * y[k + 1];
        }
        for k in 0..m {
            z[self.order[k]] = y[k];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub preconditioner: Preconditioner,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients from `x = 0`, relative residual target
/// [`RELATIVE_RESIDUAL`], at most `50·n` iterations.
pub fn pcg(a: &SpdMatrix, b: &[f64]) -> Result<Solution> {
    let n = a.len();
    let pre = Precond::build(a);
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(Solution {
            x,
            iterations: 0,
            relative_residual: 0.0,
            preconditioner: pre.kind(),
        });
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let cap = ITERATIONS_PER_UNKNOWN * n.max(1);
    let mut rel = 1.0;
    for it in 1..=cap {
        a.mul(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        // recompute the true residual to avoid drift in the stopping test
        let mut ax = vec![0.0; n];
        a.mul(&x, &mut ax);
        let true_r: f64 = b
            .iter()
            .zip(&ax)
            .map(|(bi, axi)| (bi - axi) * (bi - axi))
            .sum::<f64>()
            .sqrt();
        rel = true_r / b_norm;
        if rel <= RELATIVE_RESIDUAL {
            return Ok(Solution {
                x,
                iterations: it,
                relative_residual: rel,
                preconditioner: pre.kind(),
            });
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Numerical {
        iterations: cap,
        residual: rel,
    })
}
