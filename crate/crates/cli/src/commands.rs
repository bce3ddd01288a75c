//! Subcommands. Each writes its artifacts and returns whether every
//! asserted invariant held.

use clap::Args;
use czsob::czop::{boundary_transform, complex_monomial, pv_transform};
use czsob::keylemma::ProbeReport;
use czsob::whitney::{dump_covering, load_covering};
use czsob::{Measured, Poly, ProbeSuite, Verdict};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::config::{parse_depths, parse_lambda, parse_side, RunConfig};
use crate::output::{csv_bytes, num, write_file, Report};
use crate::verify::{self, Section};
use crate::CliError;

/// Flags shared by the subcommands; each overrides the config.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Builtin domain (disk, square, flat, wedge) or TOML config path.
    #[arg(long, default_value = "disk")]
    pub domain: String,
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long = "n")]
    pub n: Option<u32>,
    #[arg(long = "p")]
    pub p: Option<f64>,
    /// Multi-indices, `0,0` or `0,0;1,0`.
    #[arg(long)]
    pub lambda: Option<String>,
    /// Comma-separated truncation depths.
    #[arg(long)]
    pub depths: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "c-w")]
    pub c_w: Option<f64>,
    /// Expected depth verdict: holds, fails or inconclusive.
    #[arg(long)]
    pub expect: Option<String>,
}

impl Common {
    pub fn config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::resolve(&self.domain)?;
        let flag = |name: &str, e: String| CliError::Config(format!("--{name}: {e}"));
        if let Some(k) = &self.kernel {
            cfg.kernel = k.clone();
        }
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(p) = self.p {
            cfg.p = p;
        }
        if let Some(l) = &self.lambda {
            cfg.lambda = parse_lambda(l).map_err(|e| flag("lambda", e))?;
        }
        if let Some(d) = &self.depths {
            cfg.depths = parse_depths(d).map_err(|e| flag("depths", e))?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(c) = self.c_w {
            cfg.c_w = c;
        }
        if let Some(v) = &self.expect {
            cfg.expect.verdict = Some(match v.as_str() {
                "holds" => Verdict::Holds,
                "fails" => Verdict::Fails,
                "inconclusive" => Verdict::Inconclusive,
                other => return Err(flag("expect", format!("unknown verdict `{other}`"))),
            });
        }
        // Keep the defaults consistent with an overridden n.
        if self.n.is_some() && self.lambda.is_none() {
            cfg.lambda.retain(|l| l[0] + l[1] < cfg.n);
            if cfg.lambda.is_empty() {
                cfg.lambda.push([0, 0]);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn report_path<'a>(flag: &'a Option<String>, cfg: &'a RunConfig) -> Option<&'a str> {
    flag.as_deref().or(cfg.output.report.as_deref())
}

fn emit(command: &str, cfg: &RunConfig, sections: Vec<Section>, out: Option<&str>) -> Result<bool, CliError> {
    let checks = verify::all_checks(&sections);
    let data = if sections.len() == 1 {
        sections.into_iter().next().unwrap().data
    } else {
        json!(sections.into_iter().map(|s| (s.name, s.data)).collect::<serde_json::Map<_, _>>())
    };
    let report = Report::new(command, cfg, checks, data);
    report.emit(out)?;
    Ok(report.passed)
}

#[derive(Debug, Clone, Args)]
pub struct WhitneyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Smallest cube side, `2^-8` or a decimal.
    #[arg(long = "min-side")]
    pub min_side: Option<String>,
    /// Per-cube CSV.
    #[arg(long)]
    pub report: Option<String>,
    /// JSON report; stdout when absent.
    #[arg(long)]
    pub json: Option<String>,
    /// Write the covering in the line format.
    #[arg(long)]
    pub dump: Option<String>,
    /// Read a dumped covering instead of building one.
    #[arg(long)]
    pub load: Option<String>,
}

pub fn whitney(args: &WhitneyArgs) -> Result<bool, CliError> {
    let mut cfg = args.common.config()?;
    if let Some(s) = &args.min_side {
        cfg.min_side = Some(parse_side(s).map_err(|e| CliError::Config(format!("--min-side: {e}")))?);
    }
    let domain = cfg.domain()?;
    let side = cfg.min_side.unwrap_or_else(|| verify::min_side(*cfg.depths.iter().max().unwrap()));
    let cov = match &args.load {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.clone(), e))?;
            load_covering(&domain, &text).map_err(|e| CliError::Config(format!("{path}: {e}")))?
        }
        None => {
            let mut cov = czsob::build_covering(&domain, side, cfg.c_w).map_err(CliError::run)?;
            cov.orient().map_err(CliError::run)?;
            cov
        }
    };
    if let Some(path) = &args.dump {
        write_file(path, dump_covering(&cov).as_bytes())?;
    }
    if let Some(path) = &args.report {
        let d = cov.dim();
        let o = cov.orientation().map_err(CliError::run)?;
        let mut header: Vec<String> = vec!["id".into(), "level".into(), "side".into()];
        header.extend((0..d).map(|i| format!("lo_{i}")));
        header.extend(["dist", "kind", "father", "windows"].map(String::from));
        let rows: Vec<Vec<String>> = cov
            .cubes
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let mut r = vec![i.to_string(), q.level.to_string(), num(q.side())];
                r.extend(q.lo().iter().map(|v| num(*v)));
                r.push(num(cov.dist[i]));
                r.push(if o.central[i] { "central" } else { "peripheral" }.into());
                r.push(o.parent[i].map_or(String::new(), |p| p.to_string()));
                r.push(o.canvases[i].iter().map(|k| k.to_string()).collect::<Vec<_>>().join(";"));
                r
            })
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_file(path, &csv_bytes(&cfg, &header, &rows)?)?;
    }
    let (checks, mut data) = verify::axiom_checks(&cfg, &cov)?;
    data["cubes"] = json!(cov.len());
    let section = Section { name: "whitney".into(), checks, data };
    emit("whitney", &cfg, vec![section], args.json.as_deref().or(cfg.output.report.as_deref()))
}

#[derive(Debug, Clone, Args)]
pub struct TransformArgs {
    #[command(flatten)]
    pub common: Common,
    /// `γ:coefficient` file, or an inline complex monomial such as `1`,
    /// `z`, `zbar`, `2*z^2*zbar`.
    #[arg(long)]
    pub poly: String,
    /// CSV of `x,y` points.
    #[arg(long)]
    pub points: String,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<String>,
    /// `pv` (principal values) or `contour` (Beurling multiples only).
    #[arg(long, default_value = "pv")]
    pub method: String,
}

/// Real and imaginary parts of the polynomial argument, as polynomials.
pub fn parse_poly(arg: &str) -> Result<(Poly, Poly), CliError> {
    let path = std::path::Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(arg.into(), e))?;
        let p = Poly::from_text(&text).map_err(|e| CliError::Config(format!("{arg}: {e}")))?;
        let zero = Poly::zero(p.center.clone());
        return Ok((p, zero));
    }
    let mut c = 1.0;
    let (mut a, mut b) = (0u32, 0u32);
    let bad = || CliError::Config(format!("--poly: cannot read `{arg}` as a file or a monomial c*z^a*zbar^b"));
    for factor in arg.split('*').map(str::trim) {
        let (base, exp) = match factor.split_once('^') {
            Some((x, e)) => (x.trim(), e.trim().parse::<u32>().map_err(|_| bad())?),
            None => (factor, 1),
        };
        match base {
            "z" => a += exp,
            "zbar" => b += exp,
            _ => c *= base.parse::<f64>().map_err(|_| bad())?.powi(exp as i32),
        }
    }
    let (re, im) = complex_monomial(a, b, [0.0, 0.0]);
    Ok((re.scale(c), im.scale(c)))
}

pub fn read_points(path: &str) -> Result<Vec<[f64; 2]>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{path}: {e}")))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Config(format!("{path}: {e}")))?;
        let vals: Vec<Option<f64>> = rec.iter().take(2).map(|t| t.parse().ok()).collect();
        match vals[..] {
            [Some(x), Some(y)] => out.push([x, y]),
            _ if i == 0 => continue,
            _ => return Err(CliError::Config(format!("{path}: line {}: expected two numbers", i + 1))),
        }
    }
    Ok(out)
}

pub fn transform(args: &TransformArgs) -> Result<bool, CliError> {
    let cfg = args.common.config()?;
    let domain = cfg.domain()?;
    let kernel = cfg.kernel();
    let parts = parse_poly(&args.poly)?;
    let points = read_points(&args.points)?;
    let contour = match args.method.as_str() {
        "pv" => None,
        "contour" => Some(kernel.beurling_multiple().ok_or_else(|| {
            CliError::Config(format!("--method contour needs a multiple of the Beurling kernel, not `{}`", cfg.kernel))
        })?),
        other => return Err(CliError::Config(format!("--method: unknown method `{other}`"))),
    };
    let mut rows = Vec::with_capacity(points.len());
    for x in &points {
        let (value, error) = match contour {
            Some(c) => {
                let v = boundary_transform(&domain, &parts.0, *x).map_err(CliError::run)?
                    + Complex64::i() * boundary_transform(&domain, &parts.1, *x).map_err(CliError::run)?;
                (c * v, "exact".to_string())
            }
            None => {
                let a = pv_transform(kernel.as_ref(), &domain, &parts.0, *x, &cfg.quadrature.pv).map_err(CliError::run)?;
                let b = pv_transform(kernel.as_ref(), &domain, &parts.1, *x, &cfg.quadrature.pv).map_err(CliError::run)?;
                (a.value + Complex64::i() * b.value, num(a.error + b.error))
            }
        };
        rows.push(vec![num(x[0]), num(x[1]), num(value.re), num(value.im), error]);
    }
    let bytes = csv_bytes(&cfg, &["x", "y", "value_re", "value_im", "error_estimate"], &rows)?;
    match args.out.as_deref().or(cfg.output.data.as_deref()) {
        Some(p) => write_file(p, &bytes)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes).map_err(|e| CliError::Io("stdout".into(), e))?;
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Args)]
pub struct CarlesonArgs {
    #[command(flatten)]
    pub common: Common,
    /// JSON report; stdout when absent.
    #[arg(long)]
    pub out: Option<String>,
}

pub fn carleson(args: &CarlesonArgs) -> Result<bool, CliError> {
    let cfg = args.common.config()?;
    let domain = cfg.domain()?;
    let section = verify::carleson_section(&cfg, &domain)?;
    emit("carleson", &cfg, vec![section], report_path(&args.out, &cfg))
}

#[derive(Debug, Clone, Args)]
pub struct KeylemmaArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "default")]
    pub suite: String,
    /// JSON report; stdout when absent.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Serialize)]
struct ProbeRowView {
    field: String,
    depth: u32,
    cubes: usize,
    sum: Measured,
    norm: Measured,
    ratio: Measured,
    flagged: usize,
}

fn probe_view(r: &ProbeReport, p: f64) -> serde_json::Value {
    let rows: Vec<ProbeRowView> = r
        .rows
        .iter()
        .map(|x| {
            let ratio_err = if x.norm > 0.0 {
                x.sum_error / x.norm.powf(p) + x.ratio.abs() * p * x.norm_error / x.norm
            } else {
                0.0
            };
            ProbeRowView {
                field: x.field.clone(),
                depth: x.depth,
                cubes: x.cubes,
                sum: Measured::approx(x.sum, x.sum_error),
                norm: Measured::approx(x.norm, x.norm_error),
                ratio: Measured::approx(x.ratio, ratio_err),
                flagged: x.flagged,
            }
        })
        .collect();
    json!({ "n": r.n, "p": r.p, "depths": r.depths, "rows": rows, "verdict": r.verdict })
}

pub fn keylemma(args: &KeylemmaArgs) -> Result<bool, CliError> {
    let cfg = args.common.config()?;
    let domain = cfg.domain()?;
    let suite = ProbeSuite::by_name(&args.suite)
        .ok_or_else(|| CliError::Config(format!("--suite: unknown suite `{}` (known: default)", args.suite)))?;
    let report = verify::probe(&cfg, &domain, &suite)?;
    let mut checks = vec![verify::verdict_check(&cfg, report.verdict)];
    let flagged: usize = report.rows.iter().map(|r| r.flagged).sum();
    checks.push(czsob::Check::new("flagged_cubes", flagged == 0, Measured::exact(flagged as f64), "= 0"));
    let section = Section { name: "keylemma".into(), checks, data: probe_view(&report, cfg.p) };
    emit("keylemma", &cfg, vec![section], report_path(&args.out, &cfg))
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Run every section.
    #[arg(long)]
    pub all: bool,
    /// Comma-separated sections: whitney, lemmas, projection, transform,
    /// trees, carleson, keylemma.
    #[arg(long, conflicts_with = "all")]
    pub only: Option<String>,
    /// JSON report; stdout when absent.
    #[arg(long)]
    pub out: Option<String>,
}

pub fn verify(args: &VerifyArgs) -> Result<bool, CliError> {
    let cfg = args.common.config()?;
    let domain = cfg.domain()?;
    let names: Vec<String> = match (&args.only, args.all) {
        (Some(list), _) => list.split(',').map(|s| s.trim().to_string()).collect(),
        (None, true) => verify::SECTIONS.iter().map(|s| s.to_string()).collect(),
        (None, false) => return Err(CliError::Config("verify needs --all or --only".into())),
    };
    if let Some(bad) = names.iter().find(|n| !verify::SECTIONS.contains(&n.as_str())) {
        return Err(CliError::Config(format!("--only: unknown section `{bad}` (known: {})", verify::SECTIONS.join(", "))));
    }
    let mut sections = Vec::new();
    for n in &names {
        sections.push(verify::run_section(n, &cfg, &domain)?);
    }
    emit("verify", &cfg, sections, report_path(&args.out, &cfg))
}
