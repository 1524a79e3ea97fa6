//! Boundary neighborhoods `B_r(∂)`: Minkowski codimension samples and the
//! cut-off functions `η_R` used to certify polarity.

use serde::{Deserialize, Serialize};

use crate::completeness::{boundary_distances, BoundaryDistance, BoundaryModel};
use crate::error::{Error, Result};
use crate::family::{GraphFamily, VertexModel};
use crate::forms::{energy, norm_sq, VertexFunction};
use crate::metric::{strongly_intrinsic_check, EdgeLengths, SigmaChoice};
use crate::series::{assess, compensated_sum, fit_line, last_quartile};

/// Labels kept beyond the deepest sample.
const MARGIN: usize = 128;
/// Slack in `Q̃(η_R) ≤ μ(B_{2R})/R²`.
pub const ETA_BOUND_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodimSample {
    pub x: i64,
    pub r: f64,
    pub mu_ball: f64,
    /// `ln μ(B_r) / ln r`, only for `r < 1`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodimEstimate {
    pub family: String,
    pub sigma: SigmaChoice,
    pub samples: Vec<CodimSample>,
    /// Least-squares slope of `ln μ` against `ln r` over all samples with `r < 1`.
    pub slope: Option<f64>,
    /// The same fit over the deepest quartile.
    pub tail_slope: Option<f64>,
    /// Largest pointwise ratio over the deepest quartile.
    pub limsup: Option<f64>,
    pub closed_form: Option<f64>,
}

impl CodimEstimate {
    pub fn with_closed_form(mut self, value: f64) -> Self {
        self.closed_form = Some(value);
        self
    }
}

/// Window, distances and measures shared by the sampler and the cut-off test.
struct Neighborhoods {
    graph: crate::graph::WeightedGraph,
    dist: BoundaryDistance,
    /// Ids sorted by increasing `r`.
    order: Vec<usize>,
    /// Measure of boundary tails beyond the window.
    beyond: f64,
}

impl Neighborhoods {
    fn new(fam: &GraphFamily, sigma: SigmaChoice, depth: usize) -> Result<Self> {
        let window = fam.clamp_window(depth + MARGIN);
        if window <= depth {
            return Err(Error::OutOfRange(format!(
                "depth {depth} exceeds the exact range of `{}`",
                fam.name()
            )));
        }
        let model = BoundaryModel::new(fam, sigma, window)?;
        let dist = boundary_distances(&model, fam, window)?;
        let mut beyond = 0.0;
        // first step along an end that falls outside the window
        let outside = window as i64 + i64::from(fam.model() == VertexModel::Line);
        for end in model.boundary_ends() {
            let mu: Vec<f64> = (0..=outside)
                .map(|k| fam.measure(end.side.label(k)))
                .collect();
            let ev = assess(&mu);
            if ev.diverges() {
                return Err(Error::InfiniteMeasure(format!(
                    "μ diverges along the {} end of `{}`",
                    end.side,
                    fam.name()
                )));
            }
            let tail = ev.tail_estimate.ok_or_else(|| {
                Error::Precondition(format!(
                    "μ along the {} end of `{}` is not certified summable",
                    end.side,
                    fam.name()
                ))
            })?;
            // measure beyond the window: the last observed term sits just outside
            beyond += tail + mu[outside as usize];
        }
        let graph = fam.truncate(window)?;
        let ids: Vec<usize> = dist
            .labels
            .iter()
            .map(|&l| fam.id_of(l).expect("window label"))
            .collect();
        let mut r_by_id = vec![0.0; graph.len()];
        for (k, &id) in ids.iter().enumerate() {
            r_by_id[id] = dist.r[k];
        }
        let mut order: Vec<usize> = (0..graph.len()).collect();
        order.sort_by(|&a, &b| r_by_id[a].total_cmp(&r_by_id[b]).then(a.cmp(&b)));
        let dist = BoundaryDistance {
            labels: (0..graph.len()).map(|id| fam.label_of(id)).collect(),
            r: r_by_id,
        };
        Ok(Neighborhoods {
            graph,
            dist,
            order,
            beyond,
        })
    }

    fn r(&self, id: usize) -> f64 {
        self.dist.r[id]
    }

    /// `μ(B_r(∂))`, summed from the boundary outwards.
    fn mu_ball(&self, r: f64) -> f64 {
        let inside = self
            .order
            .iter()
            .take_while(|&&id| self.r(id) <= r)
            .map(|&id| self.graph.measure(id));
        compensated_sum(std::iter::once(self.beyond).chain(inside))
    }
}

fn ratio(mu: f64, r: f64) -> Option<f64> {
    (r < 1.0 && mu > 0.0).then(|| mu.ln() / r.ln())
}

/// `r(x)` and `μ(B_{r(x)}(∂))` at labels `x = 1..=depth` along the first
/// boundary end.
pub fn minkowski_samples(
    fam: &GraphFamily,
    sigma: SigmaChoice,
    depth: usize,
) -> Result<CodimEstimate> {
    if depth < 1 {
        return Err(Error::Input("depth must be at least 1".into()));
    }
    let nb = Neighborhoods::new(fam, sigma, depth)?;
    let model = BoundaryModel::new(fam, sigma, fam.clamp_window(depth + MARGIN))?;
    let side = model
        .boundary_ends()
        .next()
        .expect("checked by boundary_distances")
        .side;
    let samples: Vec<CodimSample> = (1..=depth as i64)
        .map(|k| {
            let x = side.label(k);
            let r = nb.r(fam.id_of(x).expect("window label"));
            let mu_ball = nb.mu_ball(r);
            CodimSample {
                x,
                r,
                mu_ball,
                ratio: ratio(mu_ball, r),
            }
        })
        .collect();
    let usable: Vec<&CodimSample> = samples.iter().filter(|s| s.ratio.is_some()).collect();
    let fit = |pts: &[&CodimSample]| {
        (pts.len() >= 2).then(|| {
            let xs: Vec<f64> = pts.iter().map(|s| s.r.ln()).collect();
            let ys: Vec<f64> = pts.iter().map(|s| s.mu_ball.ln()).collect();
            fit_line(&xs, &ys).0
        })
    };
    let deep = &usable[last_quartile(usable.len())];
    Ok(CodimEstimate {
        family: fam.name().to_string(),
        sigma,
        slope: fit(&usable),
        tail_slope: fit(deep),
        limsup: deep.iter().filter_map(|s| s.ratio).reduce(f64::max),
        samples,
        closed_form: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarityStep {
    pub n: i64,
    pub r: f64,
    pub mu_ball: f64,
    pub energy: f64,
    pub norm_sq: f64,
    /// `‖η_{r/2}‖_Q̃`.
    pub qnorm: f64,
    /// `(μ(B_r) + 4μ(B_r)/r²)^{1/2}`.
    pub bound: f64,
    /// `Q̃(η_{r/2}) ≤ 4μ(B_r)/r²` up to [`ETA_BOUND_TOLERANCE`].
    pub energy_bound_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarityTest {
    pub family: String,
    pub sigma: SigmaChoice,
    pub steps: Vec<PolarityStep>,
    pub monotone_decreasing: bool,
    pub all_bounds_hold: bool,
}

impl PolarityTest {
    pub fn last(&self) -> Option<f64> {
        self.steps.last().map(|s| s.qnorm)
    }
}

/// `‖η_{r_n/2}‖_Q̃` for `r_n = r(n)`, `n = 1..=depth`, where
/// `η_R = ((2R − r(x))/R)₊ ∧ 1`.
pub fn codim_polarity_test(
    fam: &GraphFamily,
    sigma: SigmaChoice,
    depth: usize,
) -> Result<PolarityTest> {
    if depth < 1 {
        return Err(Error::Input("depth must be at least 1".into()));
    }
    let nb = Neighborhoods::new(fam, sigma, depth)?;
    let lengths = EdgeLengths::for_choice(&nb.graph, Some(fam), sigma)?;
    let cert = strongly_intrinsic_check(&nb.graph, &lengths);
    if !cert.passed() {
        return Err(Error::Precondition(format!(
            "edge lengths are not intrinsic on `{}` (min slack {:e} at vertex {:?})",
            fam.name(),
            cert.min_slack,
            cert.worst_vertex
        )));
    }
    let model = BoundaryModel::new(fam, sigma, fam.clamp_window(depth + MARGIN))?;
    let side = model
        .boundary_ends()
        .next()
        .expect("checked by boundary_distances")
        .side;
    let steps: Vec<PolarityStep> = (1..=depth as i64)
        .map(|n| {
            let r = nb.r(fam.id_of(side.label(n)).expect("window label"));
            let half = r / 2.0;
            let eta =
                VertexFunction::from_fn(&nb.graph, |id| ((r - nb.r(id)) / half).clamp(0.0, 1.0));
            let mu_ball = nb.mu_ball(r);
            let e = energy(&nb.graph, &eta);
            let m = norm_sq(&nb.graph, &eta) + nb.beyond;
            let cutoff = 4.0 * mu_ball / (r * r);
            PolarityStep {
                n,
                r,
                mu_ball,
                energy: e,
                norm_sq: m,
                qnorm: (e + m).sqrt(),
                bound: (mu_ball + cutoff).sqrt(),
                energy_bound_holds: e <= cutoff + ETA_BOUND_TOLERANCE,
            }
        })
        .collect();
    Ok(PolarityTest {
        family: fam.name().to_string(),
        sigma,
        monotone_decreasing: steps.windows(2).all(|p| p[1].qnorm <= p[0].qnorm),
        all_bounds_hold: steps
            .iter()
            .all(|s| s.energy_bound_holds && s.qnorm <= s.bound + ETA_BOUND_TOLERANCE),
        steps,
    })
}
