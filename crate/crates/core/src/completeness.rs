//! Metric completeness diagnostics: geodesics, ball growth across
//! truncations, and the boundary model of ray and line families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{EndSide, GraphFamily, VertexModel};
use crate::metric::{eq_tol, le_tol, path_length, EdgeLengths, PathMetric, SigmaChoice};
use crate::par::Execution;
use crate::series::{assess, SeriesEvidence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geodesic {
    pub path: Vec<usize>,
    pub length: f64,
    /// Every prefix realizes the distance between its endpoints.
    pub verified: bool,
}

/// Hop distances from `o`.
fn hops(g: &crate::graph::WeightedGraph, o: usize) -> Vec<usize> {
    let mut h = vec![usize::MAX; g.len()];
    let mut queue = std::collections::VecDeque::from([o]);
    h[o] = 0;
    while let Some(x) = queue.pop_front() {
        for (y, _) in g.neighbors(x) {
            if h[y] == usize::MAX {
                h[y] = h[x] + 1;
                queue.push_back(y);
            }
        }
    }
    h
}

/// Shortest path from `o` to the combinatorial sphere of radius `n`; among
/// equally short paths the lexicographically smallest vertex sequence wins.
pub fn find_geodesic(m: &PathMetric<'_>, o: usize, n: usize) -> Result<Geodesic> {
    let g = m.graph();
    g.check_vertex(o)?;
    let h = hops(g, o);
    if !h.contains(&n) {
        return Err(Error::OutOfRange(format!(
            "no vertex at combinatorial distance {n} from {o}"
        )));
    }
    // Dijkstra through vertices strictly inside the sphere
    let mut dist = vec![f64::INFINITY; g.len()];
    dist[o] = 0.0;
    let mut done = vec![false; g.len()];
    loop {
        let next = (0..g.len())
            .filter(|&x| !done[x] && dist[x].is_finite() && h[x] <= n)
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]));
        let Some(x) = next else { break };
        done[x] = true;
        if h[x] == n {
            continue;
        }
        for (y, _, s) in m.lengths().row(g, x) {
            if h[y] <= n && dist[x] + s < dist[y] {
                dist[y] = dist[x] + s;
            }
        }
    }
    let best = (0..g.len())
        .filter(|&x| h[x] == n)
        .map(|x| dist[x])
        .fold(f64::INFINITY, f64::min);
    // tight edges of the restricted search; walk forward greedily by id
    let tight = |x: usize, y: usize, s: f64| h[x] < n && h[y] <= n && eq_tol(dist[x] + s, dist[y]);
    let mut reaches = vec![false; g.len()];
    let mut order: Vec<usize> = (0..g.len()).filter(|&x| dist[x].is_finite()).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]));
    for &x in &order {
        reaches[x] = (h[x] == n && eq_tol(dist[x], best))
            || m.lengths()
                .row(g, x)
                .any(|(y, _, s)| tight(x, y, s) && reaches[y]);
    }
    let mut path = vec![o];
    let mut cur = o;
    while h[cur] < n {
        cur = m
            .lengths()
            .row(g, cur)
            .filter(|&(y, _, s)| tight(cur, y, s) && reaches[y])
            .map(|(y, _, _)| y)
            .min()
            .expect("a tight successor exists on the way to the sphere");
        path.push(cur);
    }
    let length = path_length(g, m.lengths(), &path)?;
    let d = m.distances_from(o)?;
    let mut verified = true;
    let mut acc = 0.0;
    for k in 1..path.len() {
        acc += m.lengths().get(g, path[k - 1], path[k]).unwrap_or(f64::NAN);
        verified &= eq_tol(acc, d[path[k]]);
    }
    Ok(Geodesic {
        path,
        length,
        verified,
    })
}

/// Default radius grid for ball-growth tables.
pub const RADII: [f64; 7] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
/// Windows over which a ball size must stay constant to count as stable.
pub const STABLE_WINDOWS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletenessVerdict {
    CompleteEvidence,
    IncompleteEvidence,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallRow {
    pub radius: f64,
    /// `|B_r(x₀)|` per window.
    pub sizes: Vec<usize>,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndLength {
    pub end: EndSide,
    /// Partial sums of σ along the end, one per window.
    pub partial_sums: Vec<f64>,
    pub evidence: SeriesEvidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfRinowReport {
    pub family: String,
    pub sigma: SigmaChoice,
    pub windows: Vec<usize>,
    pub root: usize,
    pub balls: Vec<BallRow>,
    pub ends: Vec<EndLength>,
    /// Estimated total length `l(X)` when every end converges.
    pub total_length: Option<f64>,
    /// Window sizes and `|B_{l(X)}(x₀)|` per window.
    pub total_length_ball: Vec<usize>,
    pub verdict: CompletenessVerdict,
    pub boundary_points: usize,
}

/// Ball sizes across truncation windows and the length of each linear end.
pub fn hopf_rinow_report(
    fam: &GraphFamily,
    sigma: SigmaChoice,
    windows: &[usize],
    exec: Execution,
) -> Result<HopfRinowReport> {
    if !fam.is_locally_finite() {
        return Err(Error::Precondition(format!(
            "family `{}` is not locally finite",
            fam.name()
        )));
    }
    let mut windows: Vec<usize> = windows
        .iter()
        .map(|&n| fam.clamp_window(n))
        .filter(|&n| n >= 2)
        .collect();
    windows.sort_unstable();
    windows.dedup();
    if windows.is_empty() {
        return Err(Error::Input("need at least one window of size >= 2".into()));
    }
    let largest = *windows.last().unwrap();
    let model = BoundaryModel::new(fam, sigma, largest)?;
    let total_length = model
        .ends
        .iter()
        .map(|e| e.length)
        .collect::<Option<Vec<f64>>>()
        .map(|v| v.into_iter().fold(0.0, f64::max));
    let mut radii: Vec<f64> = RADII.to_vec();
    if let Some(l) = total_length.filter(|_| !model.ends.is_empty()) {
        radii.push(l);
    }
    let root = fam.id_of(0).unwrap_or(0);
    let per_window: Vec<Result<Vec<usize>>> = exec.map(&windows, |&n| {
        let g = fam.truncate(n)?;
        let m = PathMetric::new(&g, EdgeLengths::for_choice(&g, Some(fam), sigma)?);
        let d = m.distances_from(root)?;
        Ok(radii
            .iter()
            .map(|&r| d.iter().filter(|&&v| le_tol(v, r)).count())
            .collect())
    });
    let per_window = per_window.into_iter().collect::<Result<Vec<_>>>()?;
    let mut balls: Vec<BallRow> = radii
        .iter()
        .enumerate()
        .map(|(k, &radius)| {
            let sizes: Vec<usize> = per_window.iter().map(|row| row[k]).collect();
            let tail = &sizes[sizes.len().saturating_sub(STABLE_WINDOWS)..];
            let stable = sizes.len() >= STABLE_WINDOWS && tail.iter().all(|&s| s == tail[0]);
            BallRow {
                radius,
                sizes,
                stable,
            }
        })
        .collect();
    let total_length_ball = if total_length.is_some() && !model.ends.is_empty() {
        balls.pop().unwrap().sizes
    } else {
        vec![]
    };
    let ends: Vec<EndLength> = model
        .ends
        .iter()
        .map(|e| EndLength {
            end: e.side,
            partial_sums: windows
                .iter()
                .map(|&n| e.lengths[..(n - 1).min(e.lengths.len())].iter().sum())
                .collect(),
            evidence: e.evidence.clone(),
        })
        .collect();
    let boundary_points = model.boundary_ends().count();
    let fills_window = total_length_ball
        .iter()
        .zip(&windows)
        .all(|(&s, &n)| s == fam.window_len(n));
    let verdict = if boundary_points > 0 && fills_window {
        CompletenessVerdict::IncompleteEvidence
    } else if model.ends.iter().all(|e| e.evidence.diverges()) && balls.iter().all(|b| b.stable) {
        CompletenessVerdict::CompleteEvidence
    } else {
        CompletenessVerdict::Inconclusive
    };
    Ok(HopfRinowReport {
        family: fam.name().to_string(),
        sigma,
        windows,
        root,
        balls,
        ends,
        total_length,
        total_length_ball,
        verdict,
        boundary_points,
    })
}

/// One linear end of a ray or line family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndModel {
    pub side: EndSide,
    /// `σ(k, k+1)` along the end (labels `side.label(k)`), `k = 0..W-1`.
    pub lengths: Vec<f64>,
    pub evidence: SeriesEvidence,
    /// Length estimate `l(end)` when the series converges.
    pub length: Option<f64>,
}

impl EndModel {
    pub fn is_boundary_point(&self) -> bool {
        self.length.is_some()
    }

    /// Tail length beyond the observed edges.
    pub fn remainder(&self) -> f64 {
        self.evidence.tail_estimate.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryModel {
    pub family: String,
    pub sigma: SigmaChoice,
    pub window: usize,
    pub ends: Vec<EndModel>,
}

impl BoundaryModel {
    /// Reads σ along every end from `truncate(window)` (clamped to the
    /// family's exact range).
    pub fn new(fam: &GraphFamily, sigma: SigmaChoice, window: usize) -> Result<Self> {
        if !matches!(fam.model(), VertexModel::Ray | VertexModel::Line) {
            return Err(Error::Unsupported {
                name: fam.name().to_string(),
                reason: "boundary model covers ray and line families only".into(),
            });
        }
        let window = fam.clamp_window(window);
        if window < 2 {
            return Err(Error::Input(
                "boundary model needs a window of at least 2".into(),
            ));
        }
        let g = fam.truncate(window)?;
        let s = EdgeLengths::for_choice(&g, Some(fam), sigma)?;
        let last = match fam.model() {
            VertexModel::Ray => window as i64 - 1,
            _ => window as i64,
        };
        let ends = fam
            .ends()
            .into_iter()
            .map(|side| {
                let lengths: Vec<f64> = (0..last)
                    .map(|k| {
                        let (a, b) = (
                            fam.id_of(side.label(k)).unwrap(),
                            fam.id_of(side.label(k + 1)).unwrap(),
                        );
                        s.get(&g, a, b).expect("consecutive labels are adjacent")
                    })
                    .collect();
                let evidence = assess(&lengths);
                let length = evidence.estimate();
                EndModel {
                    side,
                    lengths,
                    evidence,
                    length,
                }
            })
            .collect();
        Ok(BoundaryModel {
            family: fam.name().to_string(),
            sigma,
            window,
            ends,
        })
    }

    pub fn boundary_ends(&self) -> impl Iterator<Item = &EndModel> {
        self.ends.iter().filter(|e| e.is_boundary_point())
    }

    pub fn end(&self, side: EndSide) -> Option<&EndModel> {
        self.ends.iter().find(|e| e.side == side)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDistance {
    pub labels: Vec<i64>,
    /// `r(x)`, distance to the nearest boundary end.
    pub r: Vec<f64>,
}

impl BoundaryDistance {
    pub fn at(&self, label: i64) -> Option<f64> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .map(|k| self.r[k])
    }
}

/// Suffix sums `Σ_{j≥k} σ_j` plus the tail estimate, summed from the far end.
fn suffix_lengths(end: &EndModel) -> Vec<f64> {
    let mut out = vec![0.0; end.lengths.len() + 1];
    let mut acc = end.remainder();
    out[end.lengths.len()] = acc;
    for k in (0..end.lengths.len()).rev() {
        acc += end.lengths[k];
        out[k] = acc;
    }
    out
}

/// `r(x)` for every label of window `n` (clamped to the model's window).
pub fn boundary_distances(
    bm: &BoundaryModel,
    fam: &GraphFamily,
    n: usize,
) -> Result<BoundaryDistance> {
    if bm.boundary_ends().next().is_none() {
        return Err(Error::NotBoundaryPoint(format!(
            "family `{}` has no end of finite length",
            bm.family
        )));
    }
    let n = n.min(bm.window);
    let mut labels: Vec<i64> = (0..fam.window_len(n)).map(|id| fam.label_of(id)).collect();
    labels.sort_unstable();
    let mut suffix = std::collections::BTreeMap::new();
    for e in &bm.ends {
        suffix.insert(e.side, suffix_lengths(e));
    }
    let r = labels
        .iter()
        .map(|&x| {
            bm.ends
                .iter()
                .filter(|e| e.is_boundary_point())
                .map(|e| {
                    let sfx = &suffix[&e.side];
                    let k = if e.side == EndSide::Right { x } else { -x };
                    if k >= 0 {
                        sfx[k as usize]
                    } else {
                        // across the origin: walk back along the opposite end
                        let other = bm.end(e.side.opposite()).expect("line has two ends");
                        sfx[0] + other.lengths[..(-k) as usize].iter().sum::<f64>()
                    }
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(BoundaryDistance { labels, r })
}
