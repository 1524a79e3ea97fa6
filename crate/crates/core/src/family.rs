//! Rule-based countable graphs and their finite truncation windows.
//!
//! Vertices carry integer labels; each vertex model fixes one enumeration of
//! labels to dense ids that does not depend on the window, so a smaller
//! window is always an id prefix of a larger one:
//!
//! | model          | labels              | window `N`                     | id of label                 |
//! |----------------|---------------------|--------------------------------|-----------------------------|
//! | `ray`          | ℕ₀                  | `0..N`                         | `x`                         |
//! | `line`         | ℤ                   | `-N..=N`                       | `2x-1` for `x>0`, `-2x` else |
//! | `pair_star`    | ℕ₀, center 0        | `0..=2N` (rays `1..=N`)        | `x`                         |
//! | `apex_pair_star` | ℕ₀ ∪ {∞}, ∞ = `-1` | `{0, ∞} ∪ 1..=2N`              | `0→0`, `∞→1`, `x→x+1`       |
//! | `explicit`     | `0..n`              | whole graph                    | `x`                         |
//!
//! Star models join the center to every even vertex `2n` and pair `2n-1` with
//! `2n`; the apex model also joins `∞` to every `2n`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, WeightedGraph};

pub type WeightRule = Arc<dyn Fn(i64, i64) -> f64 + Send + Sync>;
pub type MeasureRule = Arc<dyn Fn(i64) -> f64 + Send + Sync>;

/// Label of the apex vertex `∞` in the apex star model.
pub const APEX: i64 = -1;

/// Rays beyond the window scanned when recording the dropped weight at a
/// star center. Star weights in the registry decay geometrically, so the
/// remainder is below `f64` resolution.
const STAR_LEAK_LAYERS: i64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexModel {
    Ray,
    Line,
    PairStar,
    ApexPairStar,
    Explicit,
}

/// A linear end of a ray or line model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndSide {
    Left,
    Right,
}

impl EndSide {
    /// Label at step `k` outward from 0 along this end.
    pub fn label(self, k: i64) -> i64 {
        match self {
            EndSide::Right => k,
            EndSide::Left => -k,
        }
    }

    pub fn opposite(self) -> EndSide {
        match self {
            EndSide::Right => EndSide::Left,
            EndSide::Left => EndSide::Right,
        }
    }
}

impl fmt::Display for EndSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EndSide::Left => "left",
            EndSide::Right => "right",
        })
    }
}

/// `2^e`, floored at the smallest normal `f64` so that measures stay positive
/// far out in a window. Flooring only ever enlarges a measure.
pub fn exp2_floor(e: f64) -> f64 {
    e.exp2().max(f64::MIN_POSITIVE)
}

#[derive(Clone)]
pub struct GraphFamily {
    name: String,
    params: BTreeMap<String, f64>,
    model: VertexModel,
    weight: WeightRule,
    measure: MeasureRule,
    lengths: Option<WeightRule>,
    explicit: Option<Arc<WeightedGraph>>,
    max_label: Option<i64>,
    exact_window: Option<usize>,
}

impl fmt::Debug for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GraphFamily")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("model", &self.model)
            .field("has_lengths", &self.lengths.is_some())
            .field("max_label", &self.max_label)
            .field("exact_window", &self.exact_window)
            .finish()
    }
}

impl GraphFamily {
    pub fn new(
        name: impl Into<String>,
        model: VertexModel,
        weight: impl Fn(i64, i64) -> f64 + Send + Sync + 'static,
        measure: impl Fn(i64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        GraphFamily {
            name: name.into(),
            params: BTreeMap::new(),
            model,
            weight: Arc::new(weight),
            measure: Arc::new(measure),
            lengths: None,
            explicit: None,
            max_label: None,
            exact_window: None,
        }
    }

    /// Wraps a finite graph; every window returns the whole graph.
    pub fn explicit(name: impl Into<String>, g: WeightedGraph) -> Self {
        let g = Arc::new(g);
        let (gw, gm) = (g.clone(), g.clone());
        let n = g.len() as i64;
        let inside = move |x: i64| (0..n).contains(&x);
        let mut fam = GraphFamily::new(
            name,
            VertexModel::Explicit,
            move |x, y| {
                if inside(x) && inside(y) {
                    gw.weight(x as usize, y as usize)
                } else {
                    0.0
                }
            },
            move |x| {
                if inside(x) {
                    gm.measure(x as usize)
                } else {
                    0.0
                }
            },
        );
        fam.explicit = Some(g);
        fam
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// Declares edge lengths σ chosen by the family itself.
    pub fn with_lengths(mut self, sigma: impl Fn(i64, i64) -> f64 + Send + Sync + 'static) -> Self {
        self.lengths = Some(Arc::new(sigma));
        self
    }

    /// `max_label`: largest `|label|` at which the rules are finite.
    /// `exact_window`: largest window on which no rule or derived quantity
    /// (e.g. the weighted degree) is floored or overflows.
    pub fn with_limits(mut self, max_label: Option<i64>, exact_window: Option<usize>) -> Self {
        self.max_label = max_label;
        self.exact_window = exact_window;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn model(&self) -> VertexModel {
        self.model
    }

    pub fn max_label(&self) -> Option<i64> {
        self.max_label
    }

    pub fn exact_window(&self) -> Option<usize> {
        self.exact_window
    }

    /// Clamps a requested window to the exact range.
    pub fn clamp_window(&self, n: usize) -> usize {
        self.exact_window.map_or(n, |e| n.min(e))
    }

    pub fn weight(&self, x: i64, y: i64) -> f64 {
        (self.weight)(x, y)
    }

    pub fn measure(&self, x: i64) -> f64 {
        (self.measure)(x)
    }

    pub fn has_lengths(&self) -> bool {
        self.lengths.is_some()
    }

    pub fn length(&self, x: i64, y: i64) -> Option<f64> {
        self.lengths.as_ref().map(|s| s(x, y))
    }

    pub fn is_locally_finite(&self) -> bool {
        matches!(
            self.model,
            VertexModel::Ray | VertexModel::Line | VertexModel::Explicit
        )
    }

    /// Linear ends of the model (empty for star and explicit models).
    pub fn ends(&self) -> Vec<EndSide> {
        match self.model {
            VertexModel::Ray => vec![EndSide::Right],
            VertexModel::Line => vec![EndSide::Left, EndSide::Right],
            _ => vec![],
        }
    }

    pub fn id_of(&self, label: i64) -> Option<usize> {
        match self.model {
            VertexModel::Ray | VertexModel::PairStar => usize::try_from(label).ok(),
            VertexModel::Explicit => {
                let n = self.explicit.as_ref().map_or(0, |g| g.len());
                usize::try_from(label).ok().filter(|&x| x < n)
            }
            VertexModel::Line => Some(if label > 0 {
                2 * label as usize - 1
            } else {
                (-2 * label) as usize
            }),
            VertexModel::ApexPairStar => match label {
                APEX => Some(1),
                0 => Some(0),
                x if x > 0 => Some(x as usize + 1),
                _ => None,
            },
        }
    }

    pub fn label_of(&self, id: usize) -> i64 {
        match self.model {
            VertexModel::Ray | VertexModel::PairStar | VertexModel::Explicit => id as i64,
            VertexModel::Line => {
                if id % 2 == 1 {
                    (id as i64 + 1) / 2
                } else {
                    -(id as i64) / 2
                }
            }
            VertexModel::ApexPairStar => match id {
                0 => 0,
                1 => APEX,
                k => k as i64 - 1,
            },
        }
    }

    /// Number of vertices in window `n`.
    pub fn window_len(&self, n: usize) -> usize {
        match self.model {
            VertexModel::Ray => n,
            VertexModel::Line => 2 * n + 1,
            VertexModel::PairStar => 2 * n + 1,
            VertexModel::ApexPairStar => 2 * n + 2,
            VertexModel::Explicit => self.explicit.as_ref().map_or(0, |g| g.len()),
        }
    }

    pub fn in_window(&self, n: usize, label: i64) -> bool {
        self.id_of(label).is_some_and(|id| id < self.window_len(n))
    }

    fn frontier_labels(&self, n: usize) -> Vec<i64> {
        let n = n as i64;
        match self.model {
            VertexModel::Ray => vec![n - 1],
            VertexModel::Line => vec![-n, n],
            VertexModel::PairStar | VertexModel::ApexPairStar => vec![2 * n - 1, 2 * n],
            VertexModel::Explicit => vec![],
        }
    }

    /// Neighbors of `label` in the infinite graph; for star centers the
    /// (infinite) list is cut after ray `ray_limit`.
    fn candidate_neighbors(&self, label: i64, ray_limit: i64) -> Vec<i64> {
        match self.model {
            VertexModel::Ray => {
                if label == 0 {
                    vec![1]
                } else {
                    vec![label - 1, label + 1]
                }
            }
            VertexModel::Line => vec![label - 1, label + 1],
            VertexModel::PairStar | VertexModel::ApexPairStar => {
                let apex = self.model == VertexModel::ApexPairStar;
                if label == 0 || (apex && label == APEX) {
                    (1..=ray_limit).map(|k| 2 * k).collect()
                } else if label % 2 == 0 {
                    let mut v = vec![0, label - 1];
                    if apex {
                        v.push(APEX);
                    }
                    v
                } else {
                    vec![label + 1]
                }
            }
            VertexModel::Explicit => {
                let g = self
                    .explicit
                    .as_ref()
                    .expect("explicit family holds its graph");
                g.neighbors(label as usize).map(|(y, _)| y as i64).collect()
            }
        }
    }

    fn definition_error(&self, detail: String) -> Error {
        Error::FamilyDefinition {
            family: self.name.clone(),
            detail,
        }
    }

    /// Finite graph on window `n`. Edges leaving the window are dropped and
    /// their weight is recorded as leak at the inside endpoint; the outermost
    /// layer is flagged as frontier.
    pub fn truncate(&self, n: usize) -> Result<WeightedGraph> {
        if n == 0 {
            return Err(Error::Input("window size must be at least 1".into()));
        }
        if let Some(g) = &self.explicit {
            return Ok((**g).clone());
        }
        if let Some(max) = self.max_label {
            let reach = match self.model {
                VertexModel::PairStar | VertexModel::ApexPairStar => 2 * n as i64 + 1,
                _ => n as i64 + 1,
            };
            if reach > max {
                return Err(Error::OutOfRange(format!(
                    "window {n} of `{}` reaches label {reach}; rules are finite only up to {max}",
                    self.name
                )));
            }
        }
        let len = self.window_len(n);
        let mut b = GraphBuilder::new(len);
        let ray_limit = n as i64 + STAR_LEAK_LAYERS;
        for id in 0..len {
            let x = self.label_of(id);
            let mu = self.measure(x);
            if !(mu.is_finite() && mu > 0.0) {
                return Err(self.definition_error(format!("measure rule gives {mu} at label {x}")));
            }
            b.measure(id, mu);
            for y in self.candidate_neighbors(x, ray_limit) {
                let w = self.weight(x, y);
                if !(w.is_finite() && w >= 0.0) {
                    return Err(
                        self.definition_error(format!("weight rule gives {w} on ({x}, {y})"))
                    );
                }
                let back = self.weight(y, x);
                if back != w {
                    return Err(self.definition_error(format!(
                        "weight rule not symmetric on ({x}, {y}): {w} vs {back}"
                    )));
                }
                match self.id_of(y).filter(|&j| j < len) {
                    Some(j) if j > id => {
                        b.edge(id, j, w);
                    }
                    Some(_) => {}
                    None => {
                        b.leak(id, w);
                    }
                }
            }
        }
        for x in self.frontier_labels(n) {
            if let Some(id) = self.id_of(x).filter(|&j| j < len) {
                b.frontier(id);
            }
        }
        b.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_ray() -> GraphFamily {
        GraphFamily::new(
            "ray",
            VertexModel::Ray,
            |x, y| if (x - y).abs() == 1 { 1.0 } else { 0.0 },
            |_| 1.0,
        )
    }

    #[test]
    fn ray_window_three() {
        let g = unit_ray().truncate(3).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.frontier().as_slice(), &[2]);
        assert_eq!(g.leak(2), 1.0);
        assert_eq!(g.leak(0), 0.0);
    }

    #[test]
    fn zigzag_enumeration_round_trips() {
        let fam = GraphFamily::new("z", VertexModel::Line, |_, _| 1.0, |_| 1.0);
        for x in -50..=50 {
            assert_eq!(fam.label_of(fam.id_of(x).unwrap()), x);
        }
        assert_eq!(fam.id_of(0), Some(0));
        assert_eq!(fam.id_of(1), Some(1));
        assert_eq!(fam.id_of(-1), Some(2));
        let apex = GraphFamily::new("a", VertexModel::ApexPairStar, |_, _| 1.0, |_| 1.0);
        for id in 0..40 {
            assert_eq!(apex.id_of(apex.label_of(id)), Some(id));
        }
    }

    #[test]
    fn negative_measure_is_a_definition_error() {
        let fam = GraphFamily::new(
            "bad",
            VertexModel::Ray,
            |_, _| 1.0,
            |x| if x == 2 { -1.0 } else { 1.0 },
        );
        assert!(matches!(
            fam.truncate(5),
            Err(Error::FamilyDefinition { .. })
        ));
        let fam = GraphFamily::new("bad", VertexModel::Ray, |_, _| -1.0, |_| 1.0);
        assert!(matches!(
            fam.truncate(5),
            Err(Error::FamilyDefinition { .. })
        ));
    }

    #[test]
    fn star_records_center_leak() {
        let fam = GraphFamily::new(
            "star",
            VertexModel::PairStar,
            |x, y| {
                let (a, b) = (x.min(y), x.max(y));
                if a == 0 && b > 0 && b % 2 == 0 {
                    0.5f64.powi((b / 2) as i32)
                } else if b % 2 == 0 && a == b - 1 {
                    1.0
                } else {
                    0.0
                }
            },
            |_| 1.0,
        );
        let g = fam.truncate(4).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.degree(0), 4);
        // dropped center mass: sum over rays 5..=68 of 2^-k
        assert!((g.leak(0) - 0.5f64.powi(4)).abs() < 1e-18);
        assert_eq!(g.frontier().as_slice(), &[7, 8]);
    }
}
