//! End-to-end acceptance gate. Prints one line per criterion to stderr and
//! fails if any criterion fails.

use std::io::Write;
use std::process::Command;
use std::time::Instant;

use czsob::{Check, ProbeSuite};
use czsob_cli::config::{DomainSpec, ProfileSpec, RunConfig};
use czsob_cli::verify::{self, Section};

const DEPTH: u32 = 8;
const DEADLINE_SECS: f64 = 60.0;
const DELTAS: [f64; 3] = [0.1, 0.5, 0.9];
const RANDOM_DOMAINS: usize = 25;

struct Outcome {
    passed: bool,
    detail: String,
}

fn check<'a>(s: &'a Section, name: &str) -> &'a Check {
    let full = format!("{}.{name}", s.name);
    s.checks.iter().find(|c| c.name == full).unwrap_or_else(|| panic!("missing check {full}"))
}

fn builtin(name: &str) -> RunConfig {
    RunConfig::builtin(name).unwrap()
}

fn test_domains() -> Vec<(String, RunConfig)> {
    let mut out = vec![("disk".to_string(), builtin("disk")), ("square".to_string(), builtin("square"))];
    for i in 0..RANDOM_DOMAINS {
        let delta = DELTAS[i % DELTAS.len()];
        let spec = DomainSpec::Graph {
            dim: 2,
            profile: ProfileSpec::Random { pieces: 8, seed: 1000 + i as u64 },
            delta,
            window_side: 1.0,
        };
        let cfg = RunConfig::with_domain(spec);
        cfg.validate().unwrap();
        out.push((format!("graph{i}(delta={delta})"), cfg));
    }
    out
}

fn axioms() -> Outcome {
    let mut failures = Vec::new();
    let mut worst_overlap = 0.0f64;
    let mut slowest = 0.0f64;
    let mut cubes = (usize::MAX, 0);
    for (name, cfg) in test_domains() {
        let domain = cfg.domain().unwrap();
        let start = Instant::now();
        let cov = verify::oriented_covering(&cfg, &domain, DEPTH).unwrap();
        let report = cov.check_axioms();
        let secs = start.elapsed().as_secs_f64();
        slowest = slowest.max(secs);
        cubes = (cubes.0.min(cov.len()), cubes.1.max(cov.len()));
        worst_overlap = worst_overlap.max(report.w6_overlap as f64);
        let bound = 4f64.powi(cov.dim() as i32);
        let mut bad = Vec::new();
        if !report.w2_disjoint {
            bad.push("W2".to_string());
        }
        if report.w4_violations > 0 {
            bad.push(format!("W4×{}", report.w4_violations));
        }
        if report.w5_violations > 0 {
            bad.push(format!("W5×{}", report.w5_violations));
        }
        if report.w6_overlap as f64 > bound {
            bad.push(format!("W6={}", report.w6_overlap));
        }
        if secs >= DEADLINE_SECS {
            bad.push(format!("{secs:.1}s"));
        }
        if !bad.is_empty() {
            failures.push(format!("{name}: {}", bad.join(" ")));
        }
    }
    Outcome {
        passed: failures.is_empty(),
        detail: format!(
            "{} domains at depth {DEPTH} with {}..{} cubes, worst overlap {worst_overlap} vs 16, slowest {slowest:.1}s; failing: [{}]",
            RANDOM_DOMAINS + 2,
            cubes.0,
            cubes.1,
            failures.join("; ")
        ),
    }
}

fn lemmas() -> Outcome {
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for (name, mut cfg) in test_domains() {
        cfg.depths = vec![7, 8];
        let domain = cfg.domain().unwrap();
        let s = verify::lemma_section(&cfg, &domain).unwrap();
        let below = check(&s, "below_sum_variation").measured.value;
        let long = check(&s, "long_distance_variation").measured.value;
        worst = worst.max(below).max(long);
        if below >= 0.10 || long >= 0.10 {
            failures.push(format!("{name}: {:.1}%/{:.1}%", 100.0 * below, 100.0 * long));
        }
    }
    Outcome {
        passed: failures.is_empty(),
        detail: format!("worst variation 7→8 {:.1}% vs 10%; failing: [{}]", 100.0 * worst, failures.join("; ")),
    }
}

fn projection() -> Outcome {
    let cfg = builtin("disk");
    let s = verify::projection_section(&cfg).unwrap();
    let moment = check(&s, "moment_residual").measured.value;
    let coeff = check(&s, "polynomial_reproduction").measured.value;
    let failures = check(&s, "projection_failures").measured.value;
    Outcome {
        passed: moment <= 1e-10 && coeff <= 1e-10 && failures == 0.0,
        detail: format!("{} pairs, moment residual {moment:.1e}, coefficient error {coeff:.1e}", cfg.samples.projection_pairs),
    }
}

fn disk_anchor() -> Outcome {
    let cfg = builtin("disk");
    let domain = cfg.domain().unwrap();
    let t = verify::transform_section(&cfg, &domain).unwrap();
    let grad = check(&t, "disk_gradient").measured;
    let err = check(&t, "disk_error_estimate").measured.value;
    let k = verify::keylemma_section(&cfg, &domain, &ProbeSuite::by_name("default").unwrap()).unwrap();
    let per_cube = check(&k, "disk_sum_per_cube").measured.value;
    Outcome {
        passed: grad.value < 1e-5 && err < 1e-6 && per_cube < 1e-4,
        detail: format!(
            "sup |grad^n B P| {:.1e} (< 1e-5), error estimate {err:.1e} (< 1e-6), sum per cube {per_cube:.1e} (< 1e-4)",
            grad.value
        ),
    }
}

fn corner() -> Outcome {
    let cfg = builtin("square");
    let domain = cfg.domain().unwrap();
    let s = verify::transform_section(&cfg, &domain).unwrap();
    let m = check(&s, "corner_slope").measured;
    Outcome {
        passed: (m.value + 1.0).abs() <= 0.1,
        detail: format!("slope {:.4} ± {:.1e} (target -1 ± 0.1)", m.value, m.error.unwrap_or(0.0)),
    }
}

fn carleson() -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for (p, expect) in [(1.5, "holds"), (2.5, "fails")] {
        let mut cfg = builtin("square");
        cfg.n = 1;
        cfg.p = p;
        cfg.depths = vec![6, 7, 8];
        let domain = cfg.domain().unwrap();
        let s = verify::carleson_section(&cfg, &domain).unwrap();
        let verdict = s.data["verdict"].as_str().unwrap().to_string();
        let sup: Vec<String> = s.data["sup_constants"].as_array().unwrap().iter().map(|v| format!("{:.3}", v.as_f64().unwrap())).collect();
        passed &= verdict == expect;
        parts.push(format!("p={p}: [{}] -> {verdict} (want {expect})", sup.join(", ")));
    }
    Outcome { passed, detail: parts.join("; ") }
}

fn trees() -> Outcome {
    let cfg = builtin("disk");
    let s = verify::tree_section(&cfg).unwrap();
    let mismatches = check(&s, "oracle_mismatches").measured.value;
    let covariance = check(&s, "scale_covariance_violations").measured.value;
    Outcome {
        passed: cfg.samples.trees >= 100 && cfg.samples.tree_vertices <= 200 && mismatches == 0.0 && covariance == 0.0,
        detail: format!("{} trees, {mismatches} mismatches, {covariance} covariance violations", cfg.samples.trees),
    }
}

fn cross_path() -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for name in ["disk", "square"] {
        let cfg = builtin(name);
        let domain = cfg.domain().unwrap();
        let s = verify::transform_section(&cfg, &domain).unwrap();
        let v = check(&s, "cross_path").measured.value;
        passed &= v < 1e-6;
        parts.push(format!("{name} {v:.1e}"));
    }
    Outcome { passed, detail: format!("worst relative difference: {} (< 1e-6)", parts.join(", ")) }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |file: &str| {
        let out = dir.path().join(file);
        let status = Command::new(env!("CARGO_BIN_EXE_czsob"))
            .args(["verify", "--all", "--domain", "disk", "--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(matches!(status.code(), Some(0 | 1)), "verify --all errored");
        std::fs::read(out).unwrap()
    };
    let (a, b) = (run("a.json"), run("b.json"));
    Outcome { passed: a == b, detail: format!("two runs of verify --all, {} bytes, identical: {}", a.len(), a == b) }
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("whitney axioms", axioms),
        ("summation lemmas", lemmas),
        ("polynomial projection", projection),
        ("disk anchor", disk_anchor),
        ("square corner singularity", corner),
        ("carleson dichotomy", carleson),
        ("tree oracle", trees),
        ("cross-path agreement", cross_path),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let line = format!(
            "{}criterion {} {name}: {} ({:.0}s) {}\n",
            if i == 0 { "\n" } else { "" },
            i + 1,
            if o.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
        std::io::stderr().write_all(line.as_bytes()).unwrap();
        if !o.passed {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
