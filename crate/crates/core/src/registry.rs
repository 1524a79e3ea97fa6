//! Built-in graph families and the verdicts each one is expected to produce.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{exp2_floor, EndSide, GraphFamily, VertexModel};
use crate::metric::SigmaChoice;
use crate::potential::CapRegime;

#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub doc: &'static str,
}

pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodimEstimator {
    Limsup,
    TailSlope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expectation {
    BoundaryPoints {
        count: usize,
    },
    Complete {
        complete: bool,
    },
    CapacityRegime {
        regime: CapRegime,
    },
    EndRegime {
        end: EndSide,
        regime: CapRegime,
    },
    MarkovUnique {
        unique: bool,
    },
    SelfAdjoint {
        self_adjoint: bool,
    },
    LambdaInFormDomain {
        member: bool,
    },
    Codim {
        value: f64,
        tolerance: f64,
        estimator: CodimEstimator,
        depth: usize,
    },
    /// `Q̃(e_n) = 2/n` for `e_n = (|x|/n − 1)₊ ∧ 1`, `n = 1..=max_n`.
    CutoffEnergies {
        max_n: usize,
    },
    HarmonicWitness,
    /// `‖η_{r_n/2}‖_Q̃` decreases below `1e-3` within `depth` with every bound respected.
    EtaDecay {
        depth: usize,
    },
    /// `d(0, 2n) = 1` for every ray and `|B_1(0)| = N + 1` on window `N`.
    StarUnitDistance {
        window: usize,
    },
    /// `d(0, ∞) ≤ 2·2^{-n}` on window `n`, non-increasing in `n`.
    ApexDistanceDecay {
        max_window: usize,
    },
    /// `d(0, 2n) → 0` and `|B_r(0)|` grows with the window.
    StarBallGrowth {
        radius: f64,
        windows: Vec<usize>,
    },
}

pub struct FamilySpec {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static [ParamSpec],
    pub sigma: SigmaChoice,
    build: fn(&Params) -> Result<GraphFamily>,
    expect: fn(&Params) -> Vec<Expectation>,
    /// Parameter sets the gallery runs; empty means defaults only.
    pub variants: &'static [&'static [(&'static str, f64)]],
    pub unsupported: Option<&'static str>,
}

impl std::fmt::Debug for FamilySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FamilySpec")
            .field("name", &self.name)
            .field("params", &self.params)
            .finish()
    }
}

impl FamilySpec {
    /// Defaults overridden by `overrides`; unknown names are rejected.
    pub fn resolve(&self, overrides: &Params) -> Result<Params> {
        let mut p: Params = self
            .params
            .iter()
            .map(|s| (s.name.to_string(), s.default))
            .collect();
        for (k, &v) in overrides {
            if !p.contains_key(k) {
                let known: Vec<&str> = self.params.iter().map(|s| s.name).collect();
                return Err(Error::Input(format!(
                    "family `{}` has no parameter `{k}` (known: {})",
                    self.name,
                    known.join(", ")
                )));
            }
            if !v.is_finite() {
                return Err(Error::Input(format!("parameter `{k}` must be finite")));
            }
            p.insert(k.clone(), v);
        }
        Ok(p)
    }

    pub fn build(&self, overrides: &Params) -> Result<GraphFamily> {
        if let Some(reason) = self.unsupported {
            return Err(Error::Unsupported {
                name: self.name.to_string(),
                reason: reason.to_string(),
            });
        }
        let p = self.resolve(overrides)?;
        let mut fam = (self.build)(&p)?;
        for (k, v) in &p {
            fam = fam.with_param(k, *v);
        }
        Ok(fam)
    }

    pub fn expectations(&self, overrides: &Params) -> Result<Vec<Expectation>> {
        Ok((self.expect)(&self.resolve(overrides)?))
    }

    pub fn gallery_variants(&self) -> Vec<Params> {
        if self.variants.is_empty() {
            return vec![Params::new()];
        }
        self.variants
            .iter()
            .map(|v| v.iter().map(|&(k, x)| (k.to_string(), x)).collect())
            .collect()
    }
}

/// Labels scanned when deriving the exact window of a linear family.
const SCAN_LIMIT: i64 = 1 << 17;

fn normal(v: f64) -> bool {
    v.is_finite() && v > f64::MIN_POSITIVE
}

/// Sets `max_label` (last label before a weight overflows) and the exact
/// window (every measure, weight and edge length still a normal float) by
/// scanning outward along each end.
fn with_scanned_limits(fam: GraphFamily) -> GraphFamily {
    let mut max_label = None;
    let mut exact = None;
    'scan: for k in 0..SCAN_LIMIT {
        for side in fam.ends() {
            let (x, y) = (side.label(k), side.label(k + 1));
            let w = fam.weight(x, y);
            if !w.is_finite() {
                max_label = Some(k - 1);
                exact.get_or_insert((k - 1).max(1) as usize);
                break 'scan;
            }
            let mu_ok = normal(fam.measure(x)) && normal(fam.measure(y));
            let deg_y = (w + fam.weight(y, side.label(k + 2))) / fam.measure(y);
            let sigma_ok =
                normal((fam.measure(y) / deg_y).sqrt()) && fam.length(x, y).is_none_or(normal);
            if exact.is_none() && !(mu_ok && normal(w) && sigma_ok) {
                exact = Some((k - 1).max(1) as usize);
            }
        }
    }
    fam.with_limits(max_label, exact)
}

fn nn(
    w: impl Fn(i64) -> f64 + Send + Sync + 'static,
) -> impl Fn(i64, i64) -> f64 + Send + Sync + 'static {
    move |x, y| if (x - y).abs() == 1 { w(x.min(y)) } else { 0.0 }
}

fn p(params: &Params, k: &str) -> f64 {
    params[k]
}

fn ex51(params: &Params) -> Result<GraphFamily> {
    let (b, q) = (p(params, "b"), p(params, "p"));
    if !(b > 0.0 && q >= 0.0) {
        return Err(Error::Input("ex5.1 needs b > 0 and p >= 0".into()));
    }
    Ok(with_scanned_limits(GraphFamily::new(
        "ex5.1",
        VertexModel::Line,
        nn(|_| 1.0),
        move |x| exp2_floor(-b * x.abs() as f64 - q * (1.0 + (x * x) as f64).log2()),
    )))
}

fn ex52(_: &Params) -> Result<GraphFamily> {
    Ok(with_scanned_limits(GraphFamily::new(
        "ex5.2",
        VertexModel::Ray,
        nn(|x| (x as f64).exp2()),
        |_| 1.0,
    )))
}

fn ex53a(_: &Params) -> Result<GraphFamily> {
    Ok(with_scanned_limits(GraphFamily::new(
        "ex5.3a",
        VertexModel::Ray,
        nn(|x| (x as f64).exp2()),
        |x| exp2_floor(-(x as f64)),
    )))
}

fn ex53(_: &Params) -> Result<GraphFamily> {
    // left half as ex5.2, right half as ex5.3a
    let w = nn(|x| {
        if x >= 0 {
            (x as f64).exp2()
        } else {
            (-(x + 1) as f64).exp2()
        }
    });
    Ok(with_scanned_limits(GraphFamily::new(
        "ex5.3",
        VertexModel::Line,
        w,
        |x| {
            if x <= 0 {
                1.0
            } else {
                exp2_floor(-(x as f64))
            }
        },
    )))
}

fn ex54(_: &Params) -> Result<GraphFamily> {
    Ok(with_scanned_limits(GraphFamily::new(
        "ex5.4",
        VertexModel::Ray,
        nn(|_| 0.125),
        |x| exp2_floor(-2.0 * x as f64),
    )))
}

fn ex55(_: &Params) -> Result<GraphFamily> {
    let sq = |x: i64| ((x + 1) * (x + 1)) as f64;
    Ok(with_scanned_limits(
        GraphFamily::new("ex5.5", VertexModel::Ray, nn(sq), move |x| {
            exp2_floor(sq(x).log2() - 2.0 * x as f64)
        })
        .with_lengths(|x, y| exp2_floor(-(x.min(y) as f64 + 2.0))),
    ))
}

fn ex56(params: &Params) -> Result<GraphFamily> {
    let (alpha, case) = (p(params, "alpha"), p(params, "case"));
    if alpha <= 0.5 {
        return Err(Error::Input(format!(
            "ex5.6 needs alpha > 1/2 for finite measure, got {alpha}"
        )));
    }
    let w: fn(i64) -> f64 = match case {
        c if c == 1.0 => |_| 1.0,
        c if c == 2.0 => |x| (x as f64).exp2(),
        _ => {
            return Err(Error::Input(format!(
                "ex5.6 case must be 1 or 2, got {case}"
            )))
        }
    };
    Ok(with_scanned_limits(
        GraphFamily::new("ex5.6", VertexModel::Ray, nn(w), move |x| {
            exp2_floor(-(2.0 * alpha - 1.0) * x as f64)
        })
        .with_lengths(move |x, y| exp2_floor(-alpha * (x.min(y) as f64 + 1.0))),
    ))
}

fn codim3(_: &Params) -> Result<GraphFamily> {
    // w = min(μ(x), μ(x+1)) / (2σ²) with σ(x, x+1) = 2^-x, μ = 8^-x
    Ok(with_scanned_limits(
        GraphFamily::new(
            "codim3",
            VertexModel::Ray,
            nn(|x| exp2_floor(-(x as f64) - 4.0)),
            |x| exp2_floor(-3.0 * x as f64),
        )
        .with_lengths(|x, y| exp2_floor(-(x.min(y) as f64))),
    ))
}

fn unit_ray(_: &Params) -> Result<GraphFamily> {
    Ok(GraphFamily::new(
        "ray",
        VertexModel::Ray,
        nn(|_| 0.5),
        |_| 1.0,
    ))
}

fn star_weight(
    inner: fn(i64) -> f64,
    outer: fn(i64) -> f64,
) -> impl Fn(i64, i64) -> f64 + Send + Sync + 'static {
    move |x, y| {
        let (a, b) = (x.min(y), x.max(y));
        if a == 0 && b > 0 && b % 2 == 0 {
            inner(b / 2)
        } else if a > 0 && b == a + 1 && b % 2 == 0 {
            outer(b / 2)
        } else {
            0.0
        }
    }
}

fn a51(_: &Params) -> Result<GraphFamily> {
    Ok(GraphFamily::new(
        "a5.1",
        VertexModel::PairStar,
        star_weight(|n| (-(n as f64)).exp2(), |n| 1.0 - (-(n as f64)).exp2()),
        |_| 1.0,
    )
    .with_limits(None, Some(1000)))
}

fn a53(_: &Params) -> Result<GraphFamily> {
    let base = star_weight(|n| (-(n as f64)).exp2(), |n| (2.0 * n as f64).exp2());
    let w = move |x: i64, y: i64| {
        let apex = crate::family::APEX;
        if x == apex || y == apex {
            let other = if x == apex { y } else { x };
            if other > 0 && other % 2 == 0 {
                (-((other / 2) as f64)).exp2()
            } else {
                0.0
            }
        } else {
            base(x, y)
        }
    };
    Ok(
        GraphFamily::new("a5.3", VertexModel::ApexPairStar, w, |_| 1.0)
            .with_limits(Some(1023), Some(510)),
    )
}

fn a54(_: &Params) -> Result<GraphFamily> {
    Ok(GraphFamily::new(
        "a5.4",
        VertexModel::PairStar,
        star_weight(|n| (-(n as f64)).exp2(), |n| (n as f64).exp2()),
        |_| 1.0,
    )
    .with_limits(Some(2046), Some(1022)))
}

fn unsupported_build(_: &Params) -> Result<GraphFamily> {
    unreachable!("unsupported families are rejected before construction")
}

fn none(_: &Params) -> Vec<Expectation> {
    vec![]
}

use Expectation as E;

fn expect_ex51(_: &Params) -> Vec<Expectation> {
    vec![
        E::BoundaryPoints { count: 2 },
        E::CapacityRegime {
            regime: CapRegime::Zero,
        },
        E::MarkovUnique { unique: true },
        E::SelfAdjoint {
            self_adjoint: false,
        },
        E::CutoffEnergies { max_n: 100 },
        E::HarmonicWitness,
    ]
}

fn expect_ex52(_: &Params) -> Vec<Expectation> {
    vec![
        E::BoundaryPoints { count: 1 },
        E::CapacityRegime {
            regime: CapRegime::Infinite,
        },
        E::SelfAdjoint { self_adjoint: true },
    ]
}

fn expect_ex53a(_: &Params) -> Vec<Expectation> {
    vec![
        E::BoundaryPoints { count: 1 },
        E::CapacityRegime {
            regime: CapRegime::PositiveFinite,
        },
        E::LambdaInFormDomain { member: true },
        E::MarkovUnique { unique: false },
    ]
}

fn expect_ex53(_: &Params) -> Vec<Expectation> {
    vec![
        E::BoundaryPoints { count: 2 },
        E::EndRegime {
            end: EndSide::Left,
            regime: CapRegime::Infinite,
        },
        E::EndRegime {
            end: EndSide::Right,
            regime: CapRegime::PositiveFinite,
        },
        E::CapacityRegime {
            regime: CapRegime::Infinite,
        },
        E::MarkovUnique { unique: false },
        E::SelfAdjoint {
            self_adjoint: false,
        },
    ]
}

fn expect_ex54(_: &Params) -> Vec<Expectation> {
    vec![
        E::BoundaryPoints { count: 1 },
        E::CapacityRegime {
            regime: CapRegime::Zero,
        },
        E::MarkovUnique { unique: true },
        E::Codim {
            value: 2.0,
            tolerance: 0.01,
            estimator: CodimEstimator::TailSlope,
            depth: 30,
        },
    ]
}

fn expect_ex55(_: &Params) -> Vec<Expectation> {
    vec![
        E::BoundaryPoints { count: 1 },
        E::CapacityRegime {
            regime: CapRegime::PositiveFinite,
        },
        E::MarkovUnique { unique: false },
        E::Codim {
            value: 2.0,
            tolerance: 0.05,
            estimator: CodimEstimator::TailSlope,
            depth: 160,
        },
    ]
}

fn expect_ex56(params: &Params) -> Vec<Expectation> {
    let alpha = p(params, "alpha");
    let polar = p(params, "case") == 1.0;
    vec![
        E::BoundaryPoints { count: 1 },
        E::CapacityRegime {
            regime: if polar {
                CapRegime::Zero
            } else {
                CapRegime::PositiveFinite
            },
        },
        E::MarkovUnique { unique: polar },
        E::Codim {
            value: 2.0 - 1.0 / alpha,
            tolerance: 0.05,
            estimator: CodimEstimator::Limsup,
            depth: 40,
        },
    ]
}

fn expect_codim3(_: &Params) -> Vec<Expectation> {
    vec![
        E::BoundaryPoints { count: 1 },
        E::CapacityRegime {
            regime: CapRegime::Zero,
        },
        E::MarkovUnique { unique: true },
        E::Codim {
            value: 3.0,
            tolerance: 0.01,
            estimator: CodimEstimator::TailSlope,
            depth: 30,
        },
        E::EtaDecay { depth: 30 },
    ]
}

fn expect_ray(_: &Params) -> Vec<Expectation> {
    vec![
        E::Complete { complete: true },
        E::SelfAdjoint { self_adjoint: true },
        E::MarkovUnique { unique: true },
    ]
}

fn expect_a51(_: &Params) -> Vec<Expectation> {
    vec![E::StarUnitDistance { window: 64 }]
}

fn expect_a53(_: &Params) -> Vec<Expectation> {
    vec![E::ApexDistanceDecay { max_window: 40 }]
}

fn expect_a54(_: &Params) -> Vec<Expectation> {
    vec![E::StarBallGrowth {
        radius: 0.5,
        windows: vec![8, 16, 32, 64],
    }]
}

const NO_PARAMS: &[ParamSpec] = &[];
const END_SPACE: &str = "requires end-space model";

static REGISTRY: &[FamilySpec] = &[
    FamilySpec {
        name: "ex5.1",
        summary: "unit-weight line with summable measure: polar two-point boundary, not essentially self-adjoint",
        params: &[
            ParamSpec { name: "b", default: 1.0, doc: "exponential decay rate of μ in base 2" },
            ParamSpec { name: "p", default: 4.0, doc: "polynomial decay exponent of μ" },
        ],
        sigma: SigmaChoice::Sigma0,
        build: ex51,
        expect: expect_ex51,
        variants: &[],
        unsupported: None,
    },
    FamilySpec {
        name: "ex5.2",
        summary: "ray with w = 2^x and μ ≡ 1: boundary of infinite capacity, essentially self-adjoint",
        params: NO_PARAMS,
        sigma: SigmaChoice::Sigma0,
        build: ex52,
        expect: expect_ex52,
        variants: &[],
        unsupported: None,
    },
    FamilySpec {
        name: "ex5.3a",
        summary: "ray with w = 2^x and μ = 2^-x: boundary of positive finite capacity",
        params: NO_PARAMS,
        sigma: SigmaChoice::Sigma0,
        build: ex53a,
        expect: expect_ex53a,
        variants: &[],
        unsupported: None,
    },
    FamilySpec {
        name: "ex5.3",
        summary: "line joining the ex5.2 ray (left) and the ex5.3a ray (right)",
        params: NO_PARAMS,
        sigma: SigmaChoice::Sigma0,
        build: ex53,
        expect: expect_ex53,
        variants: &[],
        unsupported: None,
    },
    FamilySpec {
        name: "ex5.4",
        summary: "ray with w ≡ 1/8 and μ = 4^-x: polar boundary of codimension 2",
        params: NO_PARAMS,
        sigma: SigmaChoice::Sigma0,
        build: ex54,
        expect: expect_ex54,
        variants: &[],
        unsupported: None,
    },
    FamilySpec {
        name: "ex5.5",
        summary: "ray with w = (x+1)², μ = (x+1)²/4^x, σ = 2^-(x+2): non-polar boundary of codimension 2",
        params: NO_PARAMS,
        sigma: SigmaChoice::Family,
        build: ex55,
        expect: expect_ex55,
        variants: &[],
        unsupported: None,
    },
    FamilySpec {
        name: "ex5.6",
        summary: "ray with σ = 2^-α(x+1), μ = 2^-(2α-1)x; case 1: w ≡ 1 (polar), case 2: w = 2^x (non-polar)",
        params: &[
            ParamSpec { name: "alpha", default: 1.0, doc: "length decay α > 1/2; codimension 2 - 1/α" },
            ParamSpec { name: "case", default: 1.0, doc: "1 for w ≡ 1, 2 for w = 2^x" },
        ],
        sigma: SigmaChoice::Family,
        build: ex56,
        expect: expect_ex56,
        variants: &[
            &[("alpha", 0.75), ("case", 1.0)],
            &[("alpha", 1.0), ("case", 1.0)],
            &[("alpha", 2.0), ("case", 1.0)],
            &[("alpha", 0.75), ("case", 2.0)],
            &[("alpha", 1.0), ("case", 2.0)],
            &[("alpha", 2.0), ("case", 2.0)],
        ],
        unsupported: None,
    },
    FamilySpec {
        name: "codim3",
        summary: "ray with σ = 2^-x, μ = 8^-x, w = 2^-x/16: boundary of codimension 3, hence polar",
        params: NO_PARAMS,
        sigma: SigmaChoice::Family,
        build: codim3,
        expect: expect_codim3,
        variants: &[],
        unsupported: None,
    },
    FamilySpec {
        name: "ray",
        summary: "ray with w ≡ 1/2 and μ ≡ 1: complete under the natural metric",
        params: NO_PARAMS,
        sigma: SigmaChoice::Natural(1.0),
        build: unit_ray,
        expect: expect_ray,
        variants: &[],
        unsupported: None,
    },
    FamilySpec {
        name: "a5.1",
        summary: "star of two-edge rays, w(0,2n) = 2^-n, w(2n-1,2n) = 1 - 2^-n: complete with a non-compact unit ball",
        params: NO_PARAMS,
        sigma: SigmaChoice::Sigma0,
        build: a51,
        expect: expect_a51,
        variants: &[],
        unsupported: None,
    },
    FamilySpec {
        name: "a5.2",
        summary: "star of shrinking copies of ℕ: not locally compact",
        params: NO_PARAMS,
        sigma: SigmaChoice::Sigma0,
        build: unsupported_build,
        expect: none,
        variants: &[],
        unsupported: Some(END_SPACE),
    },
    FamilySpec {
        name: "a5.3",
        summary: "two vertices 0 and ∞ joined through shrinking two-edge paths: d(0, ∞) = 0",
        params: NO_PARAMS,
        sigma: SigmaChoice::Sigma0,
        build: a53,
        expect: expect_a53,
        variants: &[],
        unsupported: None,
    },
    FamilySpec {
        name: "a5.4",
        summary: "star of two-edge rays, w(0,2n) = 2^-n, w(2n-1,2n) = 2^n: infinite balls, 2n → 0",
        params: NO_PARAMS,
        sigma: SigmaChoice::Sigma0,
        build: a54,
        expect: expect_a54,
        variants: &[],
        unsupported: None,
    },
    FamilySpec {
        name: "a5.5",
        summary: "line with infinitely many shrinking segments between neighbors: geodesically but not metrically complete",
        params: NO_PARAMS,
        sigma: SigmaChoice::Sigma0,
        build: unsupported_build,
        expect: none,
        variants: &[],
        unsupported: Some(END_SPACE),
    },
];

pub fn registry() -> &'static [FamilySpec] {
    REGISTRY
}

pub fn lookup(name: &str) -> Result<&'static FamilySpec> {
    REGISTRY
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Registry {
            name: name.to_string(),
            valid: REGISTRY
                .iter()
                .map(|s| s.name)
                .collect::<Vec<_>>()
                .join(", "),
        })
}
