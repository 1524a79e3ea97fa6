//! Tail capacities of linear ends by ladder-network reduction.
//!
//! On a ray end with `u = 1` on the tail `{k ≥ N}`, the free part is a
//! ladder: edge conductances `c_k = w(k, k+1)` in series, `μ(k)` as
//! conductance to ground. With `Y_k` the admittance seen from `k` towards
//! the origin,
//!
//! ```text
//! Y_{k+1} = μ(k+1) + c_k Y_k / (c_k + Y_k),   Cap(tail_N)² = c_{N-1} Y_{N-1} / (c_{N-1} + Y_{N-1}) + μ(tail_N)
//! ```
//!
//! `Y_k` depends only on the prefix, so one pass yields every tail start.
//! On a line the opposite half is cut at `-W` with a free end; `W` doubles
//! from 16 until the admittance at the origin moves by less than `1e-6`
//! relative, which bounds the relative change of every `Cap²` as well.

use serde::{Deserialize, Serialize};

use crate::budget::Budget;
use crate::completeness::BoundaryModel;
use crate::error::{Error, Result};
use crate::family::{EndSide, GraphFamily, VertexModel};
use crate::metric::SigmaChoice;
use crate::series::{assess, fit_line, last_quartile_growth, SeriesEvidence};

pub const ZERO_THRESHOLD: f64 = 1e-3;
pub const ZERO_SLOPE: f64 = -0.2;
pub const PLATEAU_CHANGE: f64 = 1e-4;
pub const POSITIVE_FLOOR: f64 = 0.01;
/// Below this `Cap²` is within a few orders of the smallest normal float,
/// where floored rule values dominate; such a value is numerically zero.
pub const RESOLUTION: f64 = 1e-150;
const SLOPE_POINTS: usize = 4;
const OPPOSITE_START: usize = 16;
const OPPOSITE_STABLE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapRegime {
    Zero,
    PositiveFinite,
    Infinite,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitySequence {
    pub end: EndSide,
    pub starts: Vec<usize>,
    /// `Cap(tail_N)` per start; empty when the end has infinite measure.
    pub values: Vec<f64>,
    pub mu_tail: Vec<f64>,
    pub mu_evidence: SeriesEvidence,
    /// Cut of the opposite half (line families only).
    pub opposite_width: Option<usize>,
    pub opposite_stable: bool,
    pub monotone_decreasing: bool,
    /// Log–log slope of `Cap` against `N` over the last four starts.
    pub slope: Option<f64>,
    pub last_quartile_change: Option<f64>,
    pub limit: Option<f64>,
    pub regime: CapRegime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCapacity {
    pub family: String,
    pub sigma: SigmaChoice,
    pub starts: Vec<usize>,
    pub ends: Vec<CapacitySequence>,
    /// `(Σ_ends Cap(tail_N)²)^{1/2}`, an upper bound for the capacity of the
    /// union of tails; empty if some end has infinite measure.
    pub aggregate: Vec<f64>,
    pub regime: CapRegime,
}

impl BoundaryCapacity {
    pub fn end(&self, side: EndSide) -> Option<&CapacitySequence> {
        self.ends.iter().find(|e| e.end == side)
    }
}

/// Largest usable tail start: the budget, or one below the last label at
/// which the family's rules are finite.
pub fn tail_limit(fam: &GraphFamily, budget: Budget) -> usize {
    let by_label = fam
        .max_label()
        .map_or(usize::MAX, |m| (m.max(1) - 1) as usize);
    budget.max_tail().min(by_label)
}

/// Tail starts `4, 8, 16, ...` up to [`tail_limit`].
pub fn default_tails(fam: &GraphFamily, budget: Budget) -> Vec<usize> {
    let limit = tail_limit(fam, budget);
    std::iter::successors(Some(4usize), |n| n.checked_mul(2))
        .take_while(|&n| n <= limit)
        .collect()
}

/// `c y / (c + y)`, stable for huge or vanishing conductances.
fn series(c: f64, y: f64) -> f64 {
    if c == 0.0 || y == 0.0 {
        0.0
    } else if c >= y {
        y / (1.0 + y / c)
    } else {
        c / (1.0 + c / y)
    }
}

/// Admittance at the origin of the opposite half cut at `-width`.
fn opposite_admittance(fam: &GraphFamily, side: EndSide, width: usize) -> f64 {
    let w = width as i64;
    let mut y = fam.measure(side.label(-w));
    for k in -w..0 {
        y = fam.measure(side.label(k + 1))
            + series(fam.weight(side.label(k), side.label(k + 1)), y);
    }
    y
}

/// `(width, Y₀, stable)`.
fn origin_admittance(fam: &GraphFamily, side: EndSide, limit: usize) -> (Option<usize>, f64, bool) {
    if fam.model() != VertexModel::Line {
        return (None, fam.measure(0), true);
    }
    let mut width = OPPOSITE_START.min(limit);
    let mut y = opposite_admittance(fam, side, width);
    while width * 2 <= limit {
        let next = opposite_admittance(fam, side, width * 2);
        width *= 2;
        let change = (next - y).abs() / next.abs();
        y = next;
        if change < OPPOSITE_STABLE {
            return (Some(width), y, true);
        }
    }
    (Some(width), y, false)
}

/// `Cap(tail_N)²` for sorted starts, from the admittance `y0` at the origin.
fn ladder_pass(
    fam: &GraphFamily,
    side: EndSide,
    y0: f64,
    starts: &[usize],
    mu_tail: impl Fn(usize) -> f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(starts.len());
    let mut next = 0;
    let mut y = y0;
    let last = starts.last().copied().unwrap_or(0) as i64;
    for k in 0..last {
        let s = series(fam.weight(side.label(k), side.label(k + 1)), y);
        while next < starts.len() && starts[next] as i64 == k + 1 {
            out.push(s + mu_tail(starts[next]));
            next += 1;
        }
        y = fam.measure(side.label(k + 1)) + s;
    }
    out
}

/// Equilibrium potential of `tail_N` along the end, as `(label, u)` from the
/// origin (or from `-width` on a line) up to `N`.
pub fn ladder_potential(
    fam: &GraphFamily,
    side: EndSide,
    n: usize,
    width: usize,
) -> Vec<(i64, f64)> {
    let w = if fam.model() == VertexModel::Line {
        width as i64
    } else {
        0
    };
    let n = n as i64;
    let mut ys = Vec::with_capacity((n + w) as usize);
    let mut y = fam.measure(side.label(-w));
    for k in -w..n {
        ys.push(y);
        if k + 1 < n {
            y = fam.measure(side.label(k + 1))
                + series(fam.weight(side.label(k), side.label(k + 1)), y);
        }
    }
    let mut u = vec![0.0; ys.len() + 1];
    u[ys.len()] = 1.0;
    for i in (0..ys.len()).rev() {
        let k = i as i64 - w;
        let c = fam.weight(side.label(k), side.label(k + 1));
        u[i] = if c == 0.0 {
            0.0
        } else {
            u[i + 1] * c / (c + ys[i])
        };
    }
    u.into_iter()
        .enumerate()
        .map(|(i, v)| (side.label(i as i64 - w), v))
        .collect()
}

fn regime_of(
    starts: &[usize],
    values: &[f64],
) -> (Option<f64>, Option<f64>, Option<f64>, CapRegime) {
    if values.len() < SLOPE_POINTS {
        return (None, None, values.last().copied(), CapRegime::Inconclusive);
    }
    let tail = values.len() - SLOPE_POINTS..values.len();
    let xs: Vec<f64> = starts[tail.clone()]
        .iter()
        .map(|&n| (n as f64).ln())
        .collect();
    let ys: Vec<f64> = values[tail].iter().map(|v| v.ln()).collect();
    let slope = ys
        .iter()
        .all(|y| y.is_finite())
        .then(|| fit_line(&xs, &ys).0);
    let change = last_quartile_growth(values);
    let last = *values.last().unwrap();
    let regime =
        if last < ZERO_THRESHOLD && slope.is_some_and(|s| s < ZERO_SLOPE) || last <= RESOLUTION {
            CapRegime::Zero
        } else if change < PLATEAU_CHANGE && last > POSITIVE_FLOOR {
            CapRegime::PositiveFinite
        } else {
            CapRegime::Inconclusive
        };
    (slope, Some(change), Some(last), regime)
}

fn end_sequence(
    fam: &GraphFamily,
    side: EndSide,
    starts: &[usize],
    limit: usize,
) -> CapacitySequence {
    // measures past the first floored value carry no information
    let mu: Vec<f64> = (0..=limit as i64)
        .map(|k| fam.measure(side.label(k)))
        .take_while(|&m| m > f64::MIN_POSITIVE)
        .collect();
    let mu_evidence = assess(&mu);
    let mut seq = CapacitySequence {
        end: side,
        starts: starts.to_vec(),
        values: vec![],
        mu_tail: vec![],
        mu_evidence: mu_evidence.clone(),
        opposite_width: None,
        opposite_stable: true,
        monotone_decreasing: false,
        slope: None,
        last_quartile_change: None,
        limit: None,
        regime: CapRegime::Infinite,
    };
    if mu_evidence.diverges() {
        return seq;
    }
    let beyond = mu_evidence.tail_estimate.unwrap_or(0.0);
    let mut suffix = vec![beyond; mu.len() + 1];
    for k in (0..mu.len()).rev() {
        suffix[k] = suffix[k + 1] + mu[k];
    }
    let mu_tail = |n: usize| suffix[n.min(mu.len())];
    let (width, y0, stable) = origin_admittance(fam, side, limit);
    let values: Vec<f64> = ladder_pass(fam, side, y0, starts, mu_tail)
        .into_iter()
        .map(f64::sqrt)
        .collect();
    let (slope, change, lim, mut regime) = regime_of(starts, &values);
    if !mu_evidence.converges() {
        regime = CapRegime::Inconclusive;
    }
    seq.mu_tail = starts.iter().map(|&n| mu_tail(n)).collect();
    seq.monotone_decreasing = values.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-12));
    seq.values = values;
    seq.opposite_width = width;
    seq.opposite_stable = stable;
    seq.slope = slope;
    seq.last_quartile_change = change;
    seq.limit = lim;
    seq.regime = regime;
    seq
}

/// Tail capacities of every boundary end. `tails` empty means
/// [`default_tails`].
pub fn boundary_capacity(
    fam: &GraphFamily,
    sigma: SigmaChoice,
    tails: &[usize],
    budget: Budget,
) -> Result<BoundaryCapacity> {
    let model = BoundaryModel::new(fam, sigma, budget.max_window())?;
    let sides: Vec<EndSide> = model.boundary_ends().map(|e| e.side).collect();
    if sides.is_empty() {
        return Err(Error::NotBoundaryPoint(format!(
            "family `{}` has no end of finite length",
            fam.name()
        )));
    }
    let limit = tail_limit(fam, budget);
    let mut starts = if tails.is_empty() {
        default_tails(fam, budget)
    } else {
        tails.to_vec()
    };
    starts.sort_unstable();
    starts.dedup();
    if let Some(&bad) = starts.iter().find(|&&n| n == 0 || n > limit) {
        return Err(Error::OutOfRange(format!(
            "tail start {bad} outside 1..={limit}"
        )));
    }
    let ends: Vec<CapacitySequence> = sides
        .iter()
        .map(|&side| end_sequence(fam, side, &starts, limit))
        .collect();
    let aggregate = if ends.iter().any(|e| e.regime == CapRegime::Infinite) {
        vec![]
    } else {
        (0..starts.len())
            .map(|i| {
                ends.iter()
                    .map(|e| e.values[i] * e.values[i])
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    };
    let regimes: Vec<CapRegime> = ends.iter().map(|e| e.regime).collect();
    let regime = if regimes.contains(&CapRegime::Infinite) {
        CapRegime::Infinite
    } else if regimes.iter().all(|&r| r == CapRegime::Zero) {
        CapRegime::Zero
    } else if regimes.contains(&CapRegime::PositiveFinite) {
        CapRegime::PositiveFinite
    } else {
        CapRegime::Inconclusive
    };
    Ok(BoundaryCapacity {
        family: fam.name().to_string(),
        sigma,
        starts,
        ends,
        aggregate,
        regime,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum AlternativeVerdict {
    /// Some end has `0 < Cap < ∞`, so `D(Q) ≠ D(Q^max)`.
    DomainsDiffer {
        end: EndSide,
    },
    /// Every end has capacity zero or infinity; nothing follows.
    NoConclusion,
    Inconclusive,
}

pub fn boundary_alternative_evidence(bc: &BoundaryCapacity) -> AlternativeVerdict {
    if let Some(e) = bc
        .ends
        .iter()
        .find(|e| e.regime == CapRegime::PositiveFinite)
    {
        AlternativeVerdict::DomainsDiffer { end: e.end }
    } else if bc
        .ends
        .iter()
        .all(|e| matches!(e.regime, CapRegime::Zero | CapRegime::Infinite))
    {
        AlternativeVerdict::NoConclusion
    } else {
        AlternativeVerdict::Inconclusive
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::VertexSet;
    use crate::potential::equilibrium;

    fn ray(
        w: impl Fn(i64) -> f64 + Send + Sync + 'static,
        mu: impl Fn(i64) -> f64 + Send + Sync + 'static,
    ) -> GraphFamily {
        GraphFamily::new(
            "t",
            VertexModel::Ray,
            move |x, y| if (x - y).abs() == 1 { w(x.min(y)) } else { 0.0 },
            mu,
        )
    }

    #[test]
    fn ladder_matches_sparse_solve_on_a_long_truncation() {
        let fam = ray(|_| 0.125, |x| 4f64.powi(-(x as i32)));
        for n in [4usize, 8, 16] {
            let outer = 4 * n;
            let g = fam.truncate(outer).unwrap();
            let u = VertexSet::new((n..outer).collect(), outer).unwrap();
            let eq = equilibrium(&g, &u).unwrap();
            let beyond: f64 = (outer as i32..2000).map(|x| 4f64.powi(-x)).sum();
            let direct = (eq.cap * eq.cap + beyond).sqrt();
            let lad = ladder_pass(&fam, EndSide::Right, fam.measure(0), &[n], |m| {
                (m as i32..2000).map(|x| 4f64.powi(-x)).sum()
            })[0]
                .sqrt();
            assert!(
                (direct - lad).abs() <= 1e-12 * lad,
                "n = {n}: {direct} vs {lad}"
            );
            let pot = ladder_potential(&fam, EndSide::Right, n, 0);
            for (label, v) in pot {
                assert!((v - eq.potential.get(label as usize)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn series_handles_extremes() {
        assert_eq!(series(f64::MAX, 2.0), 2.0);
        assert_eq!(series(0.0, 2.0), 0.0);
        assert!((series(1.0, 1.0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn infinite_measure_end() {
        let fam = ray(|x| 2f64.powi(x as i32), |_| 1.0).with_limits(Some(1023), Some(1022));
        let bc = boundary_capacity(&fam, SigmaChoice::Sigma0, &[], Budget::Quick).unwrap();
        assert_eq!(bc.regime, CapRegime::Infinite);
        assert!(bc.aggregate.is_empty());
        assert_eq!(
            boundary_alternative_evidence(&bc),
            AlternativeVerdict::NoConclusion
        );
    }

    #[test]
    fn strong_edges_keep_capacity_positive() {
        let fam = ray(|x| 2f64.powi(x as i32), |x| 2f64.powi(-(x as i32)))
            .with_limits(Some(1023), Some(500));
        let bc = boundary_capacity(&fam, SigmaChoice::Sigma0, &[], Budget::Standard).unwrap();
        assert_eq!(bc.regime, CapRegime::PositiveFinite, "{bc:?}");
        assert!(matches!(
            boundary_alternative_evidence(&bc),
            AlternativeVerdict::DomainsDiffer {
                end: EndSide::Right
            }
        ));
        assert!(bc.ends[0].monotone_decreasing);
    }

    #[test]
    fn requested_tails_are_checked() {
        let fam = ray(|x| 2f64.powi(x as i32), |x| 2f64.powi(-(x as i32)))
            .with_limits(Some(1023), Some(500));
        assert!(matches!(
            boundary_capacity(&fam, SigmaChoice::Sigma0, &[4, 4096], Budget::Standard),
            Err(Error::OutOfRange(_))
        ));
    }
}
