//! λ-harmonic solutions, the harmonic witness on ℤ, Deg bounds on ball
//! neighborhoods, and the per-family classification report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::budget::Budget;
use crate::completeness::{hopf_rinow_report, CompletenessVerdict, HopfRinowReport, RADII};
use crate::error::{Error, Result};
use crate::family::{EndSide, GraphFamily, VertexModel};
use crate::forms::{energy, laplacian, VertexFunction};
use crate::metric::{le_tol, strongly_intrinsic_check, EdgeLengths, PathMetric, SigmaChoice};
use crate::par::Execution;
use crate::potential::{
    boundary_alternative_evidence, boundary_capacity, minkowski_samples, AlternativeVerdict,
    BoundaryCapacity, CapRegime, CodimEstimate,
};
use crate::series::{assess, last_quartile_growth, SeriesEvidence};

pub const RECURSION_TOLERANCE: f64 = 1e-10;
pub const PLATEAU_GROWTH: f64 = 1e-6;
pub const HARMONIC_TOLERANCE: f64 = 1e-12;
/// Depth of the codimension samples attached to a report.
pub const REPORT_CODIM_DEPTH: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Yes,
    No,
    Inconclusive,
}

impl Answer {
    fn from_series(ev: &SeriesEvidence) -> Answer {
        if ev.converges() {
            Answer::Yes
        } else if ev.diverges() {
            Answer::No
        } else {
            Answer::Inconclusive
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub answer: Answer,
    pub evidence: SeriesEvidence,
}

impl Membership {
    fn of(terms: &[f64]) -> Membership {
        let evidence = assess(terms);
        Membership {
            answer: Answer::from_series(&evidence),
            evidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSolution {
    pub lambda: f64,
    pub window: usize,
    /// Labels in increasing order, with `u(0) = 1`.
    pub labels: Vec<i64>,
    pub u: Vec<f64>,
    /// Boundedness from `Σ (Σ_{y≤x} μ(y)) / w(x, x+1)` along each half.
    pub bounded: Membership,
    /// Last-quartile relative growth of `u` along the window.
    pub plateau_growth: f64,
    pub plateau: bool,
    pub l2: Membership,
    pub finite_energy: Membership,
    /// `max |μ(Δ+λ)u| / scale` over interior vertices.
    pub residual: f64,
    pub increasing: bool,
    /// First step at which `u` left the `f64` range, if any.
    pub overflow_at: Option<i64>,
}

impl LambdaSolution {
    pub fn residual_ok(&self) -> bool {
        self.residual <= RECURSION_TOLERANCE
    }

    /// Bounded, square integrable and of finite energy.
    pub fn in_form_domain(&self) -> bool {
        [
            self.bounded.answer,
            self.l2.answer,
            self.finite_energy.answer,
        ]
        .iter()
        .all(|&a| a == Answer::Yes)
    }
}

struct Half {
    u: Vec<f64>,
    increments: Vec<f64>,
    criterion: Vec<f64>,
    overflow_at: Option<i64>,
}

/// `u(k+1) = u(k) + λ/w(k,k+1) Σ_{j≤k} u(j) μ'(j)` along one end, with
/// `μ'(0) = share · μ(0)`.
fn half_recursion(fam: &GraphFamily, side: EndSide, lambda: f64, steps: usize, share: f64) -> Half {
    let mu = |k: i64| {
        if k == 0 {
            share * fam.measure(0)
        } else {
            fam.measure(side.label(k))
        }
    };
    let mut u = vec![1.0];
    let mut increments = Vec::with_capacity(steps);
    let mut criterion = Vec::with_capacity(steps);
    let (mut s, mut mass) = (0.0, 0.0);
    let mut overflow_at = None;
    for k in 0..steps as i64 {
        let uk = u[k as usize];
        s += uk * mu(k);
        mass += mu(k);
        let w = fam.weight(side.label(k), side.label(k + 1));
        let d = lambda * s / w;
        let next = uk + d;
        if !next.is_finite() || !d.is_finite() {
            overflow_at = Some(side.label(k + 1));
            break;
        }
        criterion.push(mass / w);
        increments.push(d);
        u.push(next);
    }
    Half {
        u,
        increments,
        criterion,
        overflow_at,
    }
}

/// Solves `(Δ+λ)u = 0` from `u(0) = 1` on window `n` of a ray, or on both
/// halves of a line with `μ(0)` split evenly between them.
pub fn lambda_solve(fam: &GraphFamily, lambda: f64, n: usize) -> Result<LambdaSolution> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Input(format!(
            "λ must be finite and > 0, got {lambda}"
        )));
    }
    let sides: Vec<EndSide> = fam.ends();
    if sides.is_empty() {
        return Err(Error::Unsupported {
            name: fam.name().to_string(),
            reason: "λ-recursion needs a ray or line family".into(),
        });
    }
    let n = fam.clamp_window(n);
    if n < 2 {
        return Err(Error::Input("window must be at least 2".into()));
    }
    let steps = if fam.model() == VertexModel::Ray {
        n - 1
    } else {
        n
    };
    let share = 1.0 / sides.len() as f64;
    let halves: Vec<(EndSide, Half)> = sides
        .iter()
        .map(|&s| (s, half_recursion(fam, s, lambda, steps, share)))
        .collect();

    let mut by_label: BTreeMap<i64, f64> = BTreeMap::new();
    let (mut l2_terms, mut energy_terms, mut crit_terms) = (vec![], vec![], vec![]);
    let mut increasing = true;
    let mut overflow_at = None;
    let len = halves.iter().map(|(_, h)| h.u.len()).min().unwrap_or(1);
    for k in 0..len {
        let mut l2 = 0.0;
        let mut en = 0.0;
        let mut cr = 0.0;
        for (side, h) in &halves {
            let x = side.label(k as i64);
            by_label.insert(x, h.u[k]);
            l2 += h.u[k]
                * h.u[k]
                * if k == 0 {
                    fam.measure(0) / halves.len() as f64
                } else {
                    fam.measure(x)
                };
            if k + 1 < h.u.len() {
                let w = fam.weight(x, side.label(k as i64 + 1));
                en += w * h.increments[k] * h.increments[k];
                cr += h.criterion[k];
                increasing &= h.increments[k] > 0.0 && h.u[k + 1] >= h.u[k];
            }
        }
        l2_terms.push(l2);
        if k + 1 < len {
            energy_terms.push(en);
            crit_terms.push(cr);
        }
    }
    for (_, h) in &halves {
        if h.overflow_at.is_some() {
            overflow_at = h.overflow_at;
        }
    }
    let labels: Vec<i64> = by_label.keys().copied().collect();
    let u: Vec<f64> = by_label.values().copied().collect();

    // substitute back at every vertex with both neighbors on the window
    let value = |x: i64| by_label.get(&x).copied();
    let mut residual: f64 = 0.0;
    for &x in &labels {
        let nbrs: Vec<i64> = if fam.model() == VertexModel::Ray && x == 0 {
            vec![1]
        } else {
            vec![x - 1, x + 1]
        };
        let Some(vals) = nbrs.iter().map(|&y| value(y)).collect::<Option<Vec<f64>>>() else {
            continue;
        };
        let ux = by_label[&x];
        let mut sum = lambda * fam.measure(x) * ux;
        let mut scale = sum.abs();
        for (&y, &uy) in nbrs.iter().zip(&vals) {
            let w = fam.weight(x, y);
            sum += w * (ux - uy);
            scale += w * (ux.abs() + uy.abs());
        }
        residual = residual.max(sum.abs() / scale.max(f64::MIN_POSITIVE));
    }

    let along: Vec<f64> = halves
        .iter()
        .map(|(_, h)| h.u[..len].to_vec())
        .fold(vec![0.0; len], |acc, v| {
            acc.iter().zip(&v).map(|(a, b)| a.max(*b)).collect()
        });
    let plateau_growth = last_quartile_growth(&along);
    Ok(LambdaSolution {
        lambda,
        window: n,
        labels,
        u,
        bounded: Membership::of(&crit_terms),
        plateau_growth,
        plateau: plateau_growth < PLATEAU_GROWTH,
        l2: Membership::of(&l2_terms),
        finite_energy: Membership::of(&energy_terms),
        residual,
        increasing,
        overflow_at,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicWitness {
    pub window: usize,
    /// Evidence for `Σ x² √μ(x) < ∞`.
    pub summability: SeriesEvidence,
    /// `max |Δh|` over vertices whose neighbors all lie in the window.
    pub max_laplacian: f64,
    pub norm: SeriesEvidence,
    pub norm_growth: f64,
    pub norm_plateau: bool,
    /// `Q̃(h)` on the window, expected `2N`.
    pub energy: f64,
    pub energy_expected: f64,
    /// `h ∈ D(L_c^*) \ D(Q^max)` is supported by every check above.
    pub refutes_self_adjointness: bool,
}

/// Checks `h(x) = x` on a unit-weight line as a witness against essential
/// self-adjointness.
pub fn harmonic_witness_check(fam: &GraphFamily, n: usize) -> Result<HarmonicWitness> {
    if fam.model() != VertexModel::Line {
        return Err(Error::Precondition(format!(
            "harmonic witness needs a line family, `{}` is not one",
            fam.name()
        )));
    }
    let n = fam.clamp_window(n);
    if n < 4 {
        return Err(Error::Input("window must be at least 4".into()));
    }
    let m = n as i64;
    if let Some(x) = (-m..m).find(|&x| fam.weight(x, x + 1) != 1.0) {
        return Err(Error::Precondition(format!(
            "w({x}, {}) = {} but the witness needs w ≡ 1",
            x + 1,
            fam.weight(x, x + 1)
        )));
    }
    let root_terms: Vec<f64> = (0..=m)
        .map(|k| (k * k) as f64 * (fam.measure(k).sqrt() + fam.measure(-k).sqrt()))
        .collect();
    let summability = assess(&root_terms);
    if !summability.converges() {
        return Err(Error::Precondition(format!(
            "Σ x²√μ(x) not certified finite (partial sum {} over |x| ≤ {m})",
            summability.partial_sum
        )));
    }
    let g = fam.truncate(n)?;
    let h = VertexFunction::from_fn(&g, |id| fam.label_of(id) as f64);
    let mut max_laplacian: f64 = 0.0;
    for id in (0..g.len()).filter(|&id| g.leak_edges(id) == 0 && !g.is_frontier(id)) {
        max_laplacian = max_laplacian.max(laplacian(&g, &h, id)?.abs());
    }
    let norm_terms: Vec<f64> = (0..=m)
        .map(|k| (k * k) as f64 * (fam.measure(k) + fam.measure(-k)))
        .collect();
    let norm = assess(&norm_terms);
    let partial: Vec<f64> = norm_terms
        .iter()
        .scan(0.0, |s, t| {
            *s += t;
            Some(*s)
        })
        .collect();
    let norm_growth = last_quartile_growth(&partial);
    let energy = energy(&g, &h);
    let energy_expected = 2.0 * n as f64;
    let norm_plateau = norm_growth < PLATEAU_GROWTH;
    Ok(HarmonicWitness {
        window: n,
        summability,
        max_laplacian,
        refutes_self_adjointness: max_laplacian <= HARMONIC_TOLERANCE
            && norm.converges()
            && norm_plateau
            && energy == energy_expected,
        norm,
        norm_growth,
        norm_plateau,
        energy,
        energy_expected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegBallRow {
    pub radius: f64,
    /// Per window: `max Deg` over `n(B_r(x₀))`, `None` once the
    /// neighborhood reaches the truncation.
    pub max_deg: Vec<Option<f64>>,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegBallReport {
    pub windows: Vec<usize>,
    pub rows: Vec<DegBallRow>,
    /// Every row stable: Deg is bounded on each sampled ball neighborhood.
    pub bounded: bool,
}

/// `max Deg` over `n(B_r(x₀))` for each radius across windows.
pub fn deg_ball_boundedness(
    fam: &GraphFamily,
    sigma: SigmaChoice,
    radii: &[f64],
    windows: &[usize],
) -> Result<DegBallReport> {
    let mut windows: Vec<usize> = windows
        .iter()
        .map(|&n| fam.clamp_window(n))
        .filter(|&n| n >= 2)
        .collect();
    windows.sort_unstable();
    windows.dedup();
    let Some(&largest) = windows.last() else {
        return Err(Error::Input("need at least one window of size >= 2".into()));
    };
    let g = fam.truncate(largest)?;
    let cert = strongly_intrinsic_check(&g, &EdgeLengths::for_choice(&g, Some(fam), sigma)?);
    if !cert.passed() {
        return Err(Error::Precondition(format!(
            "edge lengths are not intrinsic (min slack {:e})",
            cert.min_slack
        )));
    }
    let root = fam.id_of(0).unwrap_or(0);
    let mut table = vec![vec![None; windows.len()]; radii.len()];
    for (j, &n) in windows.iter().enumerate() {
        let g = fam.truncate(n)?;
        let m = PathMetric::new(&g, EdgeLengths::for_choice(&g, Some(fam), sigma)?);
        let d = m.distances_from(root)?;
        for (i, &r) in radii.iter().enumerate() {
            let ball: Vec<bool> = d.iter().map(|&v| le_tol(v, r)).collect();
            let hood = g.combinatorial_neighborhood(&crate::graph::VertexSet::from_mask(&ball))?;
            let open = hood
                .iter()
                .any(|&x| g.leak_edges(x) > 0 || g.is_frontier(x));
            table[i][j] = (!open).then(|| {
                hood.iter()
                    .map(|&x| g.ambient_weighted_degree(x))
                    .fold(0.0, f64::max)
            });
        }
    }
    let rows: Vec<DegBallRow> = radii
        .iter()
        .zip(table)
        .map(|(&radius, max_deg)| {
            let last = max_deg.last().copied().flatten();
            let stable = last.is_some() && max_deg.iter().rev().take(3).all(|v| *v == last);
            DegBallRow {
                radius,
                max_deg,
                stable,
            }
        })
        .collect();
    let bounded = rows.iter().all(|r| r.stable);
    Ok(DegBallReport {
        windows,
        rows,
        bounded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Polar,
    NonPolar,
    Inconclusive,
    NoBoundary,
}

/// Why a verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Finite graph: the minimal operator is already self-adjoint.
    FiniteGraph,
    /// Complete and locally finite.
    CompleteLocallyFinite,
    /// Deg bounded on every sampled ball neighborhood.
    DegBoundedOnBalls,
    /// Polar boundary of finite capacity.
    PolarFiniteCapacity,
    /// An end with `0 < Cap < ∞`.
    PositiveFiniteCapacity,
    /// Bounded, L², finite-energy λ-solution.
    LambdaInFormDomain,
    /// Square-integrable λ-solution.
    LambdaInL2,
    /// The only λ-solution on a ray is not square integrable.
    RayLambdaNotL2,
    HarmonicWitness,
    /// Essential self-adjointness implies Markov uniqueness.
    SelfAdjointImpliesUnique,
    /// Failure of Markov uniqueness rules out essential self-adjointness.
    NotUniqueImpliesNotSelfAdjoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub answer: Answer,
    pub basis: Vec<Basis>,
}

impl Claim {
    fn inconclusive() -> Claim {
        Claim {
            answer: Answer::Inconclusive,
            basis: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub family: String,
    pub params: BTreeMap<String, f64>,
    pub sigma: SigmaChoice,
    pub budget: Budget,
    pub locally_finite: bool,
    pub completeness: Option<HopfRinowReport>,
    pub deg_balls: Option<DegBallReport>,
    pub capacity: Option<BoundaryCapacity>,
    pub polarity: Polarity,
    pub alternative: Option<AlternativeVerdict>,
    pub lambda: Option<LambdaSolution>,
    pub harmonic: Option<HarmonicWitness>,
    pub codim: Option<CodimEstimate>,
    pub markov_unique: Claim,
    pub self_adjoint: Claim,
    /// Diagnostics that could not run, with the reason.
    pub skipped: Vec<String>,
    pub notes: Vec<String>,
}

const GENERATOR_DOMAIN_NOTE: &str =
    "generator domain: D(L) = {u ∈ L² ∩ F : Δu ∈ L²}; not evaluated on truncations";

fn keep<T>(r: Result<T>, what: &str, skipped: &mut Vec<String>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e @ (Error::Numerical { .. } | Error::Inconsistent(_) | Error::Io(_))) => Err(e),
        Err(e) => {
            skipped.push(format!("{what}: {e}"));
            Ok(None)
        }
    }
}

struct Claims {
    yes: Vec<Basis>,
    no: Vec<Basis>,
}

impl Claims {
    fn new() -> Self {
        Claims {
            yes: vec![],
            no: vec![],
        }
    }

    fn resolve(mut self, what: &str) -> Result<Claim> {
        self.yes.sort();
        self.yes.dedup();
        self.no.sort();
        self.no.dedup();
        match (self.yes.is_empty(), self.no.is_empty()) {
            (true, true) => Ok(Claim::inconclusive()),
            (false, true) => Ok(Claim {
                answer: Answer::Yes,
                basis: self.yes,
            }),
            (true, false) => Ok(Claim {
                answer: Answer::No,
                basis: self.no,
            }),
            (false, false) => Err(Error::Inconsistent(format!(
                "{what}: yes via {:?}, no via {:?}",
                self.yes, self.no
            ))),
        }
    }
}

/// Runs every applicable diagnostic on `fam` and combines the verdicts.
pub fn classify(
    fam: &GraphFamily,
    sigma: SigmaChoice,
    budget: Budget,
    exec: Execution,
) -> Result<ClassificationReport> {
    let mut skipped = Vec::new();
    let mut report = ClassificationReport {
        family: fam.name().to_string(),
        params: fam.params().clone(),
        sigma,
        budget,
        locally_finite: fam.is_locally_finite(),
        completeness: None,
        deg_balls: None,
        capacity: None,
        polarity: Polarity::NoBoundary,
        alternative: None,
        lambda: None,
        harmonic: None,
        codim: None,
        markov_unique: Claim::inconclusive(),
        self_adjoint: Claim::inconclusive(),
        skipped: vec![],
        notes: vec![GENERATOR_DOMAIN_NOTE.to_string()],
    };
    let (mut mu, mut esa) = (Claims::new(), Claims::new());

    if fam.model() == VertexModel::Explicit {
        esa.yes.push(Basis::FiniteGraph);
    } else if !fam.is_locally_finite() {
        return Err(Error::Unsupported {
            name: fam.name().to_string(),
            reason: "classification covers locally finite families".into(),
        });
    } else {
        let windows = budget.windows();
        report.completeness = keep(
            hopf_rinow_report(fam, sigma, &windows, exec),
            "completeness",
            &mut skipped,
        )?;
        let complete = report.completeness.as_ref().map(|c| c.verdict);
        if complete == Some(CompletenessVerdict::CompleteEvidence) {
            esa.yes.push(Basis::CompleteLocallyFinite);
        }
        if complete != Some(CompletenessVerdict::IncompleteEvidence) {
            report.deg_balls = keep(
                deg_ball_boundedness(fam, sigma, &RADII, &windows),
                "deg on balls",
                &mut skipped,
            )?;
            if report.deg_balls.as_ref().is_some_and(|d| d.bounded) {
                esa.yes.push(Basis::DegBoundedOnBalls);
            }
        }
        if report
            .completeness
            .as_ref()
            .is_some_and(|c| c.boundary_points > 0)
        {
            report.capacity = keep(
                boundary_capacity(fam, sigma, &[], budget),
                "capacity",
                &mut skipped,
            )?;
            report.codim = keep(
                minkowski_samples(fam, sigma, REPORT_CODIM_DEPTH),
                "codimension",
                &mut skipped,
            )?;
        }
        if let Some(bc) = &report.capacity {
            report.polarity = match bc.regime {
                CapRegime::Zero => Polarity::Polar,
                CapRegime::PositiveFinite | CapRegime::Infinite => Polarity::NonPolar,
                CapRegime::Inconclusive => Polarity::Inconclusive,
            };
            let alt = boundary_alternative_evidence(bc);
            if matches!(alt, AlternativeVerdict::DomainsDiffer { .. }) {
                mu.no.push(Basis::PositiveFiniteCapacity);
            }
            if bc.regime == CapRegime::Zero {
                mu.yes.push(Basis::PolarFiniteCapacity);
            }
            report.alternative = Some(alt);
        }
        report.lambda = keep(
            lambda_solve(fam, 1.0, budget.max_window()),
            "λ-solution",
            &mut skipped,
        )?;
        if let Some(sol) = &report.lambda {
            if sol.in_form_domain() {
                mu.no.push(Basis::LambdaInFormDomain);
            }
            if sol.l2.answer == Answer::Yes {
                esa.no.push(Basis::LambdaInL2);
            }
            if fam.model() == VertexModel::Ray && sol.l2.answer == Answer::No {
                esa.yes.push(Basis::RayLambdaNotL2);
            }
        }
        if fam.model() == VertexModel::Line {
            report.harmonic = keep(
                harmonic_witness_check(fam, budget.max_window()),
                "harmonic witness",
                &mut skipped,
            )?;
            if report
                .harmonic
                .as_ref()
                .is_some_and(|h| h.refutes_self_adjointness)
            {
                esa.no.push(Basis::HarmonicWitness);
            }
        }
    }
    if !esa.yes.is_empty() {
        mu.yes.push(Basis::SelfAdjointImpliesUnique);
    }
    if !mu.no.is_empty() {
        esa.no.push(Basis::NotUniqueImpliesNotSelfAdjoint);
    }
    report.markov_unique = mu.resolve("Markov uniqueness")?;
    report.self_adjoint = esa.resolve("essential self-adjointness")?;
    if report.polarity == Polarity::Polar
        && report
            .capacity
            .as_ref()
            .is_some_and(|c| c.regime != CapRegime::Infinite)
        && report.markov_unique.answer == Answer::No
    {
        return Err(Error::Inconsistent(
            "polar boundary of finite capacity but Markov uniqueness fails".into(),
        ));
    }
    report.skipped = skipped;
    Ok(report)
}
