use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use iglab::classify::{classify, ClassificationReport};
use iglab::completeness::hopf_rinow_report;
use iglab::forms::{identity_suite_on, random_identity_suite, summarize};
use iglab::gallery::{mismatches, run_gallery, to_value, unix_ms, GoldenCheck, RunRecord};
use iglab::io::{read_graph, write_atomic, FamilyConfig};
use iglab::metric::{
    intrinsic_check, strongly_intrinsic_check, EdgeLengths, PathMetric, SigmaChoice,
};
use iglab::potential::{boundary_capacity, codim_polarity_test, equilibrium, minkowski_samples};
use iglab::registry::{lookup, Params};
use iglab::{Budget, Error, Execution, GraphFamily, Result, VertexSet};

#[derive(Debug, Parser)]
#[command(
    name = "iglab",
    version,
    about = "Numerical laboratory for weighted-graph Laplacians"
)]
struct Cli {
    /// Directory for run records (one JSON file per run).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// quick, standard or deep.
    #[arg(long, global = true, default_value = "standard")]
    budget: Budget,
    /// Disable the parallel worker pool.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct Target {
    /// Registry name or path to a TOML family config.
    #[arg(long)]
    family: Option<String>,
    /// Parameter override, `name=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Finite graph file instead of a family.
    #[arg(long, conflicts_with = "family")]
    graph: Option<PathBuf>,
    /// sigma0, sigma1, natural:K or family.
    #[arg(long)]
    sigma: Option<SigmaChoice>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Edge-length certificates on a truncation.
    Metric {
        #[command(subcommand)]
        action: MetricAction,
    },
    /// Ball stabilization and end lengths across windows.
    Complete {
        #[command(subcommand)]
        action: CompleteAction,
    },
    /// Randomized Green, Leibniz, Caccioppoli and contraction checks.
    Forms {
        #[command(subcommand)]
        action: FormsAction,
    },
    /// Capacities of boundary tails or of a vertex set.
    Cap {
        #[command(subcommand)]
        action: CapAction,
    },
    /// Minkowski codimension samples of the boundary.
    Codim {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 40)]
        depth: usize,
        /// Also run the cut-off polarity test.
        #[arg(long)]
        eta: bool,
    },
    /// Markov uniqueness and essential self-adjointness verdicts.
    Classify {
        #[command(flatten)]
        target: Target,
    },
    /// Golden run over the built-in families.
    Gallery {
        /// Comma-separated family names; all supported families by default.
        #[arg(long, value_delimiter = ',')]
        select: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
enum MetricAction {
    Check {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 64)]
        window: usize,
    },
}

#[derive(Debug, Subcommand)]
enum CompleteAction {
    Report {
        #[command(flatten)]
        target: Target,
        /// Comma-separated windows; the budget's doubling sequence by default.
        #[arg(long, value_delimiter = ',')]
        windows: Vec<usize>,
    },
}

#[derive(Debug, Subcommand)]
enum FormsAction {
    Check {
        /// Run on a family truncation instead of fresh random graphs.
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 64)]
        window: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        max_vertices: usize,
    },
}

#[derive(Debug, Subcommand)]
enum CapAction {
    /// Cap(tail_N) along every boundary end.
    Boundary {
        #[command(flatten)]
        target: Target,
        /// Comma-separated tail starts; powers of two from 4 by default.
        #[arg(long, value_delimiter = ',')]
        tails: Vec<usize>,
    },
    /// Equilibrium potential of a vertex set on one truncation.
    Equilibrium {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 64)]
        window: usize,
        /// Comma-separated labels of the constraint set.
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        set: Vec<i64>,
    },
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|e| format!("parameter `{k}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

struct Resolved {
    fam: GraphFamily,
    sigma: SigmaChoice,
}

impl Target {
    fn resolve(&self) -> Result<Resolved> {
        let overrides: Params = self.params.iter().cloned().collect();
        let explicit = |path: &Path| -> Result<Resolved> {
            if !overrides.is_empty() {
                return Err(Error::Input(
                    "--param applies to registry families, not graph files".into(),
                ));
            }
            let name = path
                .file_stem()
                .map_or("graph".into(), |s| s.to_string_lossy().into_owned());
            Ok(Resolved {
                fam: GraphFamily::explicit(name, read_graph(path)?),
                sigma: self.sigma.unwrap_or(SigmaChoice::Sigma0),
            })
        };
        if let Some(path) = &self.graph {
            return explicit(path);
        }
        let family = self
            .family
            .as_deref()
            .ok_or_else(|| Error::Input("give --family or --graph".into()))?;
        let (name, mut params) = if Path::new(family).is_file() {
            let cfg = FamilyConfig::load(Path::new(family))?;
            if let Some(g) = &cfg.graph {
                return explicit(g);
            }
            (cfg.family, cfg.params)
        } else {
            (family.to_string(), BTreeMap::new())
        };
        params.extend(overrides);
        let spec = lookup(&name)?;
        Ok(Resolved {
            fam: spec.build(&params)?,
            sigma: self.sigma.unwrap_or(spec.sigma),
        })
    }
}

/// Records plus a flat table for CSV output.
struct Outcome {
    name: String,
    records: Vec<RunRecord>,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn num(v: f64) -> String {
    iglab::io::format_f64(v)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

fn record(command: &str, r: &Resolved, budget: Budget, started: u64, result: Value) -> RunRecord {
    let mut rec = RunRecord::new(command, &r.fam, r.sigma, budget, result);
    rec.started_unix_ms = started;
    rec
}

fn check(claim: &str, expected: &str, observed: String, pass: bool) -> GoldenCheck {
    GoldenCheck {
        claim: claim.into(),
        expected: expected.into(),
        observed,
        pass,
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let budget = cli.budget;
    let started = unix_ms();
    match &cli.command {
        Command::Metric {
            action: MetricAction::Check { target, window },
        } => {
            let r = target.resolve()?;
            let g = r.fam.truncate(r.fam.clamp_window(*window))?;
            let lengths = EdgeLengths::for_choice(&g, Some(&r.fam), r.sigma)?;
            let strong = strongly_intrinsic_check(&g, &lengths);
            let m = PathMetric::new(&g, lengths);
            let weak = intrinsic_check(&m);
            let rows = (0..g.len())
                .map(|x| {
                    vec![
                        x.to_string(),
                        r.fam.label_of(x).to_string(),
                        num(strong.slacks[x]),
                        num(weak.slacks[x]),
                    ]
                })
                .collect();
            let mut rec = record(
                "metric",
                &r,
                budget,
                started,
                json!({ "window": g.len(), "strongly_intrinsic": to_value(&strong)?, "intrinsic": to_value(&weak)?, "jump_size": m.discovered_jump_size() }),
            );
            rec.checks = vec![
                check(
                    "strongly intrinsic",
                    "min slack ≥ -1e-15",
                    num(strong.min_slack),
                    strong.passed(),
                ),
                check(
                    "intrinsic",
                    "min slack ≥ -1e-15",
                    num(weak.min_slack),
                    weak.passed(),
                ),
            ];
            Ok(Outcome {
                name: "metric".into(),
                records: vec![rec],
                header: vec!["vertex", "label", "strong_slack", "intrinsic_slack"],
                rows,
            })
        }
        Command::Complete {
            action: CompleteAction::Report { target, windows },
        } => {
            let r = target.resolve()?;
            let windows = if windows.is_empty() {
                budget.windows()
            } else {
                windows.clone()
            };
            let rep = hopf_rinow_report(&r.fam, r.sigma, &windows, exec)?;
            let mut rows = vec![];
            for b in &rep.balls {
                for (n, s) in rep.windows.iter().zip(&b.sizes) {
                    rows.push(vec![num(b.radius), n.to_string(), s.to_string()]);
                }
            }
            let mut rec = record("complete", &r, budget, started, to_value(&rep)?);
            rec.windows = rep.windows.clone();
            Ok(Outcome {
                name: "complete".into(),
                records: vec![rec],
                header: vec!["radius", "window", "ball_size"],
                rows,
            })
        }
        Command::Forms {
            action:
                FormsAction::Check {
                    target,
                    window,
                    trials,
                    seed,
                    max_vertices,
                },
        } => {
            let (trials_out, r) = if target.family.is_some() || target.graph.is_some() {
                let r = target.resolve()?;
                let g = r.fam.truncate(r.fam.clamp_window(*window))?;
                (identity_suite_on(&g, *seed, *trials, exec), Some(r))
            } else {
                if *max_vertices < 2 {
                    return Err(Error::Input("--max-vertices must be at least 2".into()));
                }
                (
                    random_identity_suite(*seed, *trials, *max_vertices, exec),
                    None,
                )
            };
            let summary = summarize(*seed, &trials_out);
            let rows = trials_out
                .iter()
                .map(|t| {
                    vec![
                        t.trial.to_string(),
                        t.vertices.to_string(),
                        num(t.green_residual),
                        num(t.green_scale),
                        num(t.leibniz_residual),
                        num(t.leibniz_scale),
                        num(t.caccioppoli_slack),
                        num(t.caccioppoli_scale),
                        num(t.contraction_gap),
                        t.passed.to_string(),
                    ]
                })
                .collect();
            let result =
                json!({ "summary": to_value(&summary)?, "trials": to_value(&trials_out)? });
            let mut rec = match &r {
                Some(r) => record("forms", r, budget, started, result),
                None => {
                    let fam = GraphFamily::explicit("random", iglab::GraphBuilder::new(0).build()?);
                    record(
                        "forms",
                        &Resolved {
                            fam,
                            sigma: SigmaChoice::Sigma0,
                        },
                        budget,
                        started,
                        result,
                    )
                }
            };
            rec.seed = Some(*seed);
            rec.checks = vec![check(
                "identity suite",
                "0 failures",
                summary.failures.to_string(),
                summary.failures == 0,
            )];
            let header = vec![
                "trial",
                "vertices",
                "green_residual",
                "green_scale",
                "leibniz_residual",
                "leibniz_scale",
                "caccioppoli_slack",
                "caccioppoli_scale",
                "contraction_gap",
                "passed",
            ];
            Ok(Outcome {
                name: "forms".into(),
                records: vec![rec],
                header,
                rows,
            })
        }
        Command::Cap {
            action: CapAction::Boundary { target, tails },
        } => {
            let r = target.resolve()?;
            let bc = boundary_capacity(&r.fam, r.sigma, tails, budget)?;
            let mut rows = vec![];
            for e in &bc.ends {
                for (k, n) in e.starts.iter().enumerate() {
                    rows.push(vec![
                        e.end.to_string(),
                        n.to_string(),
                        opt(e.values.get(k).copied()),
                        opt(e.mu_tail.get(k).copied()),
                    ]);
                }
            }
            let rec = record("cap", &r, budget, started, to_value(&bc)?);
            Ok(Outcome {
                name: "cap".into(),
                records: vec![rec],
                header: vec!["end", "start", "cap", "mu_tail"],
                rows,
            })
        }
        Command::Cap {
            action:
                CapAction::Equilibrium {
                    target,
                    window,
                    set,
                },
        } => {
            let r = target.resolve()?;
            let n = r.fam.clamp_window(*window);
            let g = r.fam.truncate(n)?;
            let ids = set
                .iter()
                .map(|&l| {
                    r.fam
                        .id_of(l)
                        .filter(|&id| id < g.len())
                        .ok_or_else(|| Error::Input(format!("label {l} is outside window {n}")))
                })
                .collect::<Result<Vec<usize>>>()?;
            let eq = equilibrium(&g, &VertexSet::new(ids, g.len())?)?;
            let rows = eq
                .potential
                .values()
                .iter()
                .enumerate()
                .map(|(x, v)| vec![x.to_string(), r.fam.label_of(x).to_string(), num(*v)])
                .collect();
            let mut rec = record("cap", &r, budget, started, to_value(&eq)?);
            rec.checks = vec![
                check(
                    "0 ≤ e ≤ 1",
                    "within 1e-10",
                    format!("[{}, {}]", num(eq.min), num(eq.max)),
                    eq.bounds_hold(),
                ),
                check(
                    "first-order condition",
                    "residual ≤ 1e-9 · scale",
                    num(eq.residual),
                    eq.first_order_holds(),
                ),
            ];
            Ok(Outcome {
                name: "equilibrium".into(),
                records: vec![rec],
                header: vec!["vertex", "label", "potential"],
                rows,
            })
        }
        Command::Codim { target, depth, eta } => {
            let r = target.resolve()?;
            let est = minkowski_samples(&r.fam, r.sigma, *depth)?;
            let mut result = json!({ "estimate": to_value(&est)? });
            let mut checks = vec![];
            if *eta {
                let t = codim_polarity_test(&r.fam, r.sigma, *depth)?;
                checks.push(check(
                    "cut-off bounds",
                    "every step within its bound",
                    t.all_bounds_hold.to_string(),
                    t.all_bounds_hold,
                ));
                result["polarity_test"] = to_value(&t)?;
            }
            let rows = est
                .samples
                .iter()
                .map(|s| vec![s.x.to_string(), num(s.r), num(s.mu_ball), opt(s.ratio)])
                .collect();
            let mut rec = record("codim", &r, budget, started, result);
            rec.checks = checks;
            Ok(Outcome {
                name: "codim".into(),
                records: vec![rec],
                header: vec!["x", "r", "mu_ball", "ratio"],
                rows,
            })
        }
        Command::Classify { target } => {
            let r = target.resolve()?;
            let rep = classify(&r.fam, r.sigma, budget, exec)?;
            let rows = classify_rows(&rep);
            let rec = record("classify", &r, budget, started, to_value(&rep)?);
            Ok(Outcome {
                name: "classify".into(),
                records: vec![rec],
                header: vec!["field", "value"],
                rows,
            })
        }
        Command::Gallery { select } => {
            let records = run_gallery(select, budget, exec)?;
            let rows = records
                .iter()
                .flat_map(|r| {
                    let params = r
                        .params
                        .iter()
                        .map(|(k, v)| format!("{k}={v}"))
                        .collect::<Vec<_>>()
                        .join(";");
                    r.checks.iter().map(move |c| {
                        vec![
                            r.family.clone(),
                            params.clone(),
                            c.claim.clone(),
                            c.expected.clone(),
                            c.observed.clone(),
                            c.pass.to_string(),
                        ]
                    })
                })
                .collect();
            Ok(Outcome {
                name: "gallery".into(),
                records,
                header: vec!["family", "params", "claim", "expected", "observed", "pass"],
                rows,
            })
        }
    }
}

fn classify_rows(rep: &ClassificationReport) -> Vec<Vec<String>> {
    let basis = |b: &[iglab::classify::Basis]| {
        b.iter()
            .map(|x| format!("{x:?}"))
            .collect::<Vec<_>>()
            .join(";")
    };
    let mut rows = vec![
        vec!["family".into(), rep.family.clone()],
        vec!["sigma".into(), rep.sigma.to_string()],
        vec!["budget".into(), rep.budget.to_string()],
        vec![
            "completeness".into(),
            rep.completeness
                .as_ref()
                .map_or(String::new(), |c| format!("{:?}", c.verdict)),
        ],
        vec![
            "boundary_points".into(),
            rep.completeness
                .as_ref()
                .map_or(String::new(), |c| c.boundary_points.to_string()),
        ],
        vec![
            "capacity".into(),
            rep.capacity
                .as_ref()
                .map_or(String::new(), |c| format!("{:?}", c.regime)),
        ],
        vec!["polarity".into(), format!("{:?}", rep.polarity)],
        vec![
            "markov_unique".into(),
            format!("{:?}", rep.markov_unique.answer),
        ],
        vec![
            "markov_unique_basis".into(),
            basis(&rep.markov_unique.basis),
        ],
        vec![
            "self_adjoint".into(),
            format!("{:?}", rep.self_adjoint.answer),
        ],
        vec!["self_adjoint_basis".into(), basis(&rep.self_adjoint.basis)],
    ];
    rows.extend(
        rep.skipped
            .iter()
            .map(|s| vec!["skipped".into(), s.clone()]),
    );
    rows
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(vec![]);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn emit(cli: &Cli, mut out: Outcome) -> Result<bool> {
    let finished = unix_ms();
    for r in &mut out.records {
        if r.command != "gallery" {
            r.finished_unix_ms = finished;
        }
    }
    let csv = match cli.format {
        Format::Csv => Some(csv_text(&out.header, &out.rows)?),
        Format::Json => None,
    };
    if let Some(dir) = &cli.out {
        for r in &out.records {
            r.write_to(dir)?;
        }
        if let Some(text) = &csv {
            write_atomic(&dir.join(format!("{}.csv", out.name)), text.as_bytes())?;
        }
    }
    match (&csv, out.records.as_slice()) {
        (Some(text), _) => print!("{text}"),
        (None, [one]) => println!("{}", one.to_json()?),
        (None, many) => println!("{}", serde_json::to_string_pretty(many)?),
    }
    let bad = mismatches(&out.records);
    for m in &bad {
        eprintln!(
            "mismatch: {} {:?}: {} (expected {}, observed {})",
            m.family, m.params, m.check.claim, m.check.expected, m.check.observed
        );
    }
    Ok(bad.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli).and_then(|out| emit(&cli, out)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
