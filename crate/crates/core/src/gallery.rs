//! Golden runs over the built-in families and the persisted run records.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::budget::Budget;
use crate::classify::{classify, Answer, ClassificationReport, REPORT_CODIM_DEPTH};
use crate::completeness::CompletenessVerdict;
use crate::error::{Error, Result};
use crate::family::{GraphFamily, APEX};
use crate::forms::{energy, VertexFunction};
use crate::io::write_atomic;
use crate::metric::{eq_tol, EdgeLengths, PathMetric, SigmaChoice};
use crate::par::Execution;
use crate::potential::{codim_polarity_test, minkowski_samples, CodimEstimate};
use crate::registry::{lookup, registry, CodimEstimator, Expectation, FamilySpec, Params};

pub const SCHEMA_VERSION: u32 = 1;
/// Relative tolerance for values with a closed form.
pub const EXACT_TOLERANCE: f64 = 1e-12;
/// `‖η_{r_n/2}‖_Q̃` must end below this.
pub const ETA_DECAY_TARGET: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCheck {
    pub claim: String,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

impl GoldenCheck {
    fn new(
        claim: impl Into<String>,
        expected: impl ToString,
        observed: impl ToString,
        pass: bool,
    ) -> Self {
        GoldenCheck {
            claim: claim.into(),
            expected: expected.to_string(),
            observed: observed.to_string(),
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub family: String,
    pub params: Params,
    pub sigma: String,
    pub budget: Budget,
    pub seed: Option<u64>,
    pub windows: Vec<usize>,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    /// Module outputs; non-finite numbers are stored as `null`.
    pub result: Value,
    #[serde(default)]
    pub checks: Vec<GoldenCheck>,
}

pub fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl RunRecord {
    pub fn new(
        command: &str,
        fam: &GraphFamily,
        sigma: SigmaChoice,
        budget: Budget,
        result: Value,
    ) -> Self {
        let now = unix_ms();
        RunRecord {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            family: fam.name().to_string(),
            params: fam.params().clone(),
            sigma: sigma.to_string(),
            budget,
            seed: None,
            windows: budget.windows(),
            started_unix_ms: now,
            finished_unix_ms: now,
            result,
            checks: vec![],
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// `<command>-<family>[_k=v…].json`.
    pub fn file_name(&self) -> String {
        let mut s = format!("{}-{}", self.command, self.family);
        for (k, v) in &self.params {
            s.push_str(&format!("_{k}={v}"));
        }
        s.push_str(".json");
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: RunRecord = serde_json::from_str(text)?;
        if rec.schema_version != SCHEMA_VERSION {
            return Err(Error::Input(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                rec.schema_version
            )));
        }
        Ok(rec)
    }

    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(self.file_name());
        write_atomic(&path, self.to_json()?.as_bytes())?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Serializes a module output; non-finite numbers become `null`.
pub fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

/// `Q̃(e_n)` for `e_n = (|x|/n − 1)₊ ∧ 1` on the window `2n + 2`.
pub fn cutoff_energies(fam: &GraphFamily, max_n: usize) -> Result<Vec<(usize, f64)>> {
    (1..=max_n)
        .map(|n| {
            let g = fam.truncate(2 * n + 2)?;
            let e = VertexFunction::from_fn(&g, |id| {
                ((fam.label_of(id).abs() as f64 / n as f64) - 1.0).clamp(0.0, 1.0)
            });
            Ok((n, energy(&g, &e)))
        })
        .collect()
}

fn metric_of(
    fam: &GraphFamily,
    sigma: SigmaChoice,
    n: usize,
) -> Result<(crate::graph::WeightedGraph, EdgeLengths)> {
    let g = fam.truncate(n)?;
    let s = EdgeLengths::for_choice(&g, Some(fam), sigma)?;
    Ok((g, s))
}

fn id(fam: &GraphFamily, label: i64) -> usize {
    fam.id_of(label).expect("label inside the window")
}

fn answer_of(b: bool) -> Answer {
    if b {
        Answer::Yes
    } else {
        Answer::No
    }
}

fn fmt_answer(a: Answer) -> String {
    format!("{a:?}").to_lowercase()
}

struct Evaluation {
    result: serde_json::Map<String, Value>,
    checks: Vec<GoldenCheck>,
}

impl Evaluation {
    fn push(&mut self, c: GoldenCheck) {
        self.checks.push(c);
    }
}

fn codim_for(
    fam: &GraphFamily,
    sigma: SigmaChoice,
    depth: usize,
    report: Option<&ClassificationReport>,
) -> Result<CodimEstimate> {
    match report.and_then(|r| r.codim.clone()) {
        Some(c) if depth == REPORT_CODIM_DEPTH => Ok(c),
        _ => minkowski_samples(fam, sigma, depth),
    }
}

fn evaluate(
    spec: &FamilySpec,
    params: &Params,
    fam: &GraphFamily,
    budget: Budget,
) -> Result<Evaluation> {
    let sigma = spec.sigma;
    let expectations = spec.expectations(params)?;
    let mut ev = Evaluation {
        result: serde_json::Map::new(),
        checks: vec![],
    };
    let report = if fam.is_locally_finite() {
        let r = classify(fam, sigma, budget, Execution::Sequential)?;
        ev.result.insert("classification".into(), to_value(&r)?);
        Some(r)
    } else {
        None
    };
    let rep = report.as_ref();
    for e in &expectations {
        match e {
            Expectation::BoundaryPoints { count } => {
                let got = rep
                    .and_then(|r| r.completeness.as_ref())
                    .map(|c| c.boundary_points);
                ev.push(GoldenCheck::new(
                    "boundary points",
                    count,
                    fmt_opt(got),
                    got == Some(*count),
                ));
            }
            Expectation::Complete { complete } => {
                let want = if *complete {
                    CompletenessVerdict::CompleteEvidence
                } else {
                    CompletenessVerdict::IncompleteEvidence
                };
                let got = rep.and_then(|r| r.completeness.as_ref()).map(|c| c.verdict);
                ev.push(GoldenCheck::new(
                    "completeness",
                    format!("{want:?}"),
                    fmt_opt_dbg(got),
                    got == Some(want),
                ));
            }
            Expectation::CapacityRegime { regime } => {
                let got = rep.and_then(|r| r.capacity.as_ref()).map(|c| c.regime);
                ev.push(GoldenCheck::new(
                    "boundary capacity",
                    format!("{regime:?}"),
                    fmt_opt_dbg(got),
                    got == Some(*regime),
                ));
            }
            Expectation::EndRegime { end, regime } => {
                let got = rep
                    .and_then(|r| r.capacity.as_ref())
                    .and_then(|c| c.end(*end))
                    .map(|s| s.regime);
                ev.push(GoldenCheck::new(
                    format!("capacity of the {end} end"),
                    format!("{regime:?}"),
                    fmt_opt_dbg(got),
                    got == Some(*regime),
                ));
            }
            Expectation::MarkovUnique { unique } => {
                let got = rep.map_or(Answer::Inconclusive, |r| r.markov_unique.answer);
                ev.push(GoldenCheck::new(
                    "Markov uniqueness",
                    fmt_answer(answer_of(*unique)),
                    fmt_answer(got),
                    got == answer_of(*unique),
                ));
            }
            Expectation::SelfAdjoint { self_adjoint } => {
                let got = rep.map_or(Answer::Inconclusive, |r| r.self_adjoint.answer);
                let want = answer_of(*self_adjoint);
                ev.push(GoldenCheck::new(
                    "essential self-adjointness",
                    fmt_answer(want),
                    fmt_answer(got),
                    got == want,
                ));
            }
            Expectation::LambdaInFormDomain { member } => {
                let got = rep
                    .and_then(|r| r.lambda.as_ref())
                    .map(|l| l.in_form_domain());
                ev.push(GoldenCheck::new(
                    "λ-solution in D(Q^max)",
                    member,
                    fmt_opt(got),
                    got == Some(*member),
                ));
            }
            Expectation::Codim {
                value,
                tolerance,
                estimator,
                depth,
            } => {
                let est = codim_for(fam, sigma, *depth, rep)?;
                let got = match estimator {
                    CodimEstimator::Limsup => est.limsup,
                    CodimEstimator::TailSlope => est.tail_slope,
                };
                let pass = got.is_some_and(|g| (g - value).abs() <= *tolerance);
                let claim = format!("Minkowski codimension ({estimator:?}, depth {depth})");
                ev.push(GoldenCheck::new(
                    claim,
                    format!("{value} ± {tolerance}"),
                    fmt_opt(got),
                    pass,
                ));
                ev.result.insert(
                    format!("codim_depth_{depth}"),
                    to_value(&est.with_closed_form(*value))?,
                );
            }
            Expectation::CutoffEnergies { max_n } => {
                let energies = cutoff_energies(fam, *max_n)?;
                let worst = energies
                    .iter()
                    .map(|&(n, q)| ((q - 2.0 / n as f64) / (2.0 / n as f64)).abs())
                    .fold(0.0, f64::max);
                ev.push(GoldenCheck::new(
                    format!("Q̃(e_n) = 2/n for n = 1..{max_n}"),
                    format!("relative error ≤ {EXACT_TOLERANCE:e}"),
                    format!("{worst:e}"),
                    worst <= EXACT_TOLERANCE,
                ));
                ev.result
                    .insert("cutoff_energies".into(), to_value(&energies)?);
            }
            Expectation::HarmonicWitness => {
                let h = rep.and_then(|r| r.harmonic.as_ref());
                let got = h.map(|h| h.refutes_self_adjointness);
                ev.push(GoldenCheck::new(
                    "harmonic witness outside the form domain",
                    true,
                    fmt_opt(got),
                    got == Some(true),
                ));
            }
            Expectation::EtaDecay { depth } => {
                let t = codim_polarity_test(fam, sigma, *depth)?;
                let last = t.last().unwrap_or(f64::NAN);
                let pass = t.monotone_decreasing && t.all_bounds_hold && last < ETA_DECAY_TARGET;
                ev.push(GoldenCheck::new(
                    format!("‖η‖ decreases below {ETA_DECAY_TARGET:e} within depth {depth}, bounds hold"),
                    "monotone, bounded",
                    format!("last {last:e}, monotone {}, bounds {}", t.monotone_decreasing, t.all_bounds_hold),
                    pass,
                ));
                ev.result.insert("polarity_test".into(), to_value(&t)?);
            }
            Expectation::StarUnitDistance { window } => {
                let (g, s) = metric_of(fam, sigma, *window)?;
                let m = PathMetric::new(&g, s);
                let d = m.distances_from(0)?;
                let rays: Vec<f64> = (1..=*window as i64).map(|n| d[id(fam, 2 * n)]).collect();
                let unit = rays.iter().all(|&v| eq_tol(v, 1.0));
                let ball = m.ball(0, 1.0)?.len();
                ev.push(GoldenCheck::new(
                    "d(0, 2n) = 1 for every ray",
                    "1",
                    fmt_range(&rays),
                    unit,
                ));
                ev.push(GoldenCheck::new(
                    "|B_1(0)| on the window",
                    window + 1,
                    ball,
                    ball == window + 1,
                ));
                ev.result.insert("ray_distances".into(), to_value(&rays)?);
            }
            Expectation::ApexDistanceDecay { max_window } => {
                let ds = (1..=*max_window)
                    .map(|n| {
                        let (g, s) = metric_of(fam, sigma, n)?;
                        Ok((
                            n,
                            PathMetric::new(&g, s).distance(id(fam, 0), id(fam, APEX))?,
                        ))
                    })
                    .collect::<Result<Vec<(usize, f64)>>>()?;
                let bounded = ds
                    .iter()
                    .all(|&(n, d)| d <= 2.0 * (-(n as f64)).exp2() * (1.0 + EXACT_TOLERANCE));
                let monotone = ds.windows(2).all(|p| p[1].1 <= p[0].1);
                ev.push(GoldenCheck::new(
                    "d(0, ∞) ≤ 2·2^-n, non-increasing in n",
                    "bounded, non-increasing",
                    format!(
                        "bounded {bounded}, non-increasing {monotone}, last {:e}",
                        ds.last().map_or(f64::NAN, |p| p.1)
                    ),
                    bounded && monotone,
                ));
                ev.result.insert("apex_distance".into(), to_value(&ds)?);
            }
            Expectation::StarBallGrowth { radius, windows } => {
                let largest = *windows.iter().max().expect("windows");
                let (g, s) = metric_of(fam, sigma, largest)?;
                let d = PathMetric::new(&g, s).distances_from(0)?;
                let rays: Vec<f64> = (1..=largest as i64).map(|n| d[id(fam, 2 * n)]).collect();
                let decreasing = rays.windows(2).all(|p| p[1] < p[0]);
                let sizes = windows
                    .iter()
                    .map(|&n| {
                        let (g, s) = metric_of(fam, sigma, n)?;
                        Ok(PathMetric::new(&g, s).ball(0, *radius)?.len())
                    })
                    .collect::<Result<Vec<usize>>>()?;
                let growing = sizes.windows(2).all(|p| p[1] > p[0]);
                ev.push(GoldenCheck::new(
                    "d(0, 2n) decreasing to 0",
                    "strictly decreasing",
                    fmt_range(&rays),
                    decreasing,
                ));
                ev.push(GoldenCheck::new(
                    format!("|B_{radius}(0)| grows with the window"),
                    "strictly increasing",
                    format!("{sizes:?}"),
                    growing,
                ));
                ev.result.insert("ray_distances".into(), to_value(&rays)?);
                ev.result.insert(
                    "ball_sizes".into(),
                    json!({ "radius": radius, "windows": windows, "sizes": sizes }),
                );
            }
        }
    }
    Ok(ev)
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "unavailable".into(), |v| v.to_string())
}

fn fmt_opt_dbg<T: std::fmt::Debug>(v: Option<T>) -> String {
    v.map_or_else(|| "unavailable".into(), |v| format!("{v:?}"))
}

fn fmt_range(v: &[f64]) -> String {
    match (v.first(), v.last()) {
        (Some(a), Some(b)) => format!("{a:e} .. {b:e}"),
        _ => "empty".into(),
    }
}

/// Runs one family with its golden checks.
pub fn run_family(spec: &FamilySpec, params: &Params, budget: Budget) -> Result<RunRecord> {
    let started = unix_ms();
    let fam = spec.build(params)?;
    let ev = evaluate(spec, params, &fam, budget)?;
    let mut rec = RunRecord::new(
        "gallery",
        &fam,
        spec.sigma,
        budget,
        Value::Object(ev.result),
    );
    rec.started_unix_ms = started;
    rec.finished_unix_ms = unix_ms();
    rec.checks = ev.checks;
    Ok(rec)
}

/// Every gallery entry (family and parameter set) for `selection`; an empty
/// selection means all supported families.
pub fn entries(selection: &[String]) -> Result<Vec<(&'static FamilySpec, Params)>> {
    let specs: Vec<&'static FamilySpec> = if selection.is_empty() {
        registry()
            .iter()
            .filter(|s| s.unsupported.is_none())
            .collect()
    } else {
        selection.iter().map(|n| lookup(n)).collect::<Result<_>>()?
    };
    if let Some(s) = specs.iter().find(|s| s.unsupported.is_some()) {
        return Err(Error::Unsupported {
            name: s.name.to_string(),
            reason: s.unsupported.unwrap_or_default().to_string(),
        });
    }
    Ok(specs
        .into_iter()
        .flat_map(|s| s.gallery_variants().into_iter().map(move |p| (s, p)))
        .collect())
}

/// Runs the selected entries in parallel; records come back in registry order.
pub fn run_gallery(
    selection: &[String],
    budget: Budget,
    exec: Execution,
) -> Result<Vec<RunRecord>> {
    let items = entries(selection)?;
    exec.map(&items, |(spec, p)| run_family(spec, p, budget))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub family: String,
    pub params: Params,
    pub check: GoldenCheck,
}

pub fn mismatches(records: &[RunRecord]) -> Vec<Mismatch> {
    records
        .iter()
        .flat_map(|r| {
            r.checks.iter().filter(|c| !c.pass).map(|c| Mismatch {
                family: r.family.clone(),
                params: r.params.clone(),
                check: c.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip_keeps_every_bit() {
        let fam = lookup("ray").unwrap().build(&Params::new()).unwrap();
        let values = json!({ "third": 1.0 / 3.0, "tiny": f64::MIN_POSITIVE, "pi": std::f64::consts::PI, "nan": to_value(&f64::NAN).unwrap() });
        let mut rec = RunRecord::new(
            "test",
            &fam,
            SigmaChoice::Natural(1.0),
            Budget::Quick,
            values,
        );
        rec.checks.push(GoldenCheck::new("c", 1, 1, true));
        let back = RunRecord::from_json(&rec.to_json().unwrap()).unwrap();
        assert_eq!(back, rec);
        assert_eq!(
            back.result["third"].as_f64().unwrap().to_bits(),
            (1.0f64 / 3.0).to_bits()
        );
        assert!(back.result["nan"].is_null());
    }

    #[test]
    fn schema_version_is_required() {
        let fam = lookup("ray").unwrap().build(&Params::new()).unwrap();
        let rec = RunRecord::new(
            "test",
            &fam,
            SigmaChoice::Natural(1.0),
            Budget::Quick,
            Value::Null,
        );
        let mut v = serde_json::to_value(&rec).unwrap();
        v.as_object_mut().unwrap().remove("schema_version");
        assert!(RunRecord::from_json(&v.to_string()).is_err());
        v["schema_version"] = json!(99);
        assert!(matches!(
            RunRecord::from_json(&v.to_string()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn file_names_carry_parameters() {
        let spec = lookup("ex5.6").unwrap();
        let p: Params = [("alpha".to_string(), 0.75), ("case".to_string(), 2.0)].into();
        let fam = spec.build(&p).unwrap();
        let rec = RunRecord::new("gallery", &fam, spec.sigma, Budget::Quick, Value::Null);
        assert_eq!(rec.file_name(), "gallery-ex5.6_alpha=0.75_case=2.json");
    }

    #[test]
    fn cutoff_energy_closed_form() {
        let fam = lookup("ex5.1").unwrap().build(&Params::new()).unwrap();
        for (n, q) in cutoff_energies(&fam, 20).unwrap() {
            assert!(
                (q - 2.0 / n as f64).abs() <= 1e-12 * 2.0 / n as f64,
                "n = {n}: {q}"
            );
        }
    }

    #[test]
    fn selection_errors() {
        assert!(matches!(
            entries(&["nope".into()]),
            Err(Error::Registry { .. })
        ));
        assert!(matches!(
            entries(&["a5.5".into()]),
            Err(Error::Unsupported { .. })
        ));
        assert_eq!(entries(&["ex5.6".into()]).unwrap().len(), 6);
    }

    #[test]
    fn star_families_pass_quick() {
        for name in ["a5.1", "a5.3", "a5.4"] {
            let rec = run_family(lookup(name).unwrap(), &Params::new(), Budget::Quick).unwrap();
            assert!(rec.passed(), "{name}: {:?}", rec.checks);
        }
    }
}
