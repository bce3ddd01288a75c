//! Run configuration: a TOML file or a builtin domain name, plus flag
//! overrides.

use std::path::Path;

use czsob::geometry::{make_disk_at, make_graph_domain, make_polygon, random_lipschitz_profile};
use czsob::{kernel_by_name, Domain, GraphProfile, Kernel, PvSchedule, Verdict, WindowParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    #[serde(default = "default_kernel")]
    pub kernel: String,
    #[serde(default = "default_n")]
    pub n: u32,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Multi-indices `λ` of the monomials `P_λ`.
    #[serde(default = "default_lambda")]
    pub lambda: Vec<[u32; 2]>,
    /// Truncation depths `k`, minimal side `2^{−k}`.
    #[serde(default = "default_depths")]
    pub depths: Vec<u32>,
    /// Smallest cube side for `whitney`; `2^{−max depth}` when absent.
    #[serde(default)]
    pub min_side: Option<f64>,
    #[serde(default = "default_c_w")]
    pub c_w: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub quadrature: Quadrature,
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default)]
    pub samples: Samples,
    #[serde(default)]
    pub expect: Expect,
    #[serde(default)]
    pub output: Output,
}

fn default_kernel() -> String {
    "beurling".into()
}
fn default_n() -> u32 {
    1
}
fn default_p() -> f64 {
    2.0
}
fn default_lambda() -> Vec<[u32; 2]> {
    vec![[0, 0]]
}
fn default_depths() -> Vec<u32> {
    vec![6, 7, 8]
}
fn default_c_w() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainSpec {
    Disk {
        #[serde(default)]
        center: [f64; 2],
        #[serde(default = "one")]
        radius: f64,
        #[serde(default)]
        window: Option<WindowSpec>,
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
        #[serde(default)]
        window: Option<WindowSpec>,
    },
    /// `{y_d > A(y')}` seen through one window.
    Graph {
        #[serde(default = "two")]
        dim: usize,
        profile: ProfileSpec,
        /// Lipschitz bound of the profile, in `(0, 1)`.
        delta: f64,
        #[serde(default = "one")]
        window_side: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub side: f64,
    pub delta0: Option<f64>,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSpec {
    Flat,
    Wedge { slope: f64 },
    Piecewise { knots: Vec<f64>, values: Vec<f64> },
    /// Random piecewise-linear profile with slopes below `0.95·delta`.
    Random { pieces: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Quadrature {
    /// Gauss–Legendre nodes per axis on each cube.
    pub cube_order: usize,
    /// Rule order for Sobolev norms over the domain.
    pub sobolev_order: usize,
    /// Rule order on triangles for the continuous Carleson integral.
    pub continuous_order: usize,
    pub pv: PvSchedule,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { cube_order: 6, sobolev_order: 16, continuous_order: 4, pv: PvSchedule::default() }
    }
}

/// Thresholds of the asserted invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bounds {
    /// Bound on `Σχ_{10Q}`; `4^d` when absent.
    pub overlap: Option<f64>,
    /// Relative change of the summation-lemma ratios between the two
    /// deepest depths.
    pub lemma_variation: f64,
    pub moment: f64,
    pub coefficient: f64,
    pub cross_path: f64,
    pub disk_gradient: f64,
    pub disk_error: f64,
    /// Disk key-lemma sum per cube.
    pub disk_sum: f64,
    pub norm_equivalence: f64,
    /// Allowed factor between the continuous and discrete Carleson ratios.
    pub coherence: f64,
    /// Allowed deviation of the corner log-log slope from −1.
    pub corner_slope: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            overlap: None,
            lemma_variation: 0.10,
            moment: 1e-10,
            coefficient: 1e-10,
            cross_path: 1e-6,
            disk_gradient: 1e-5,
            disk_error: 1e-6,
            disk_sum: 1e-4,
            norm_equivalence: 100.0,
            coherence: 50.0,
            corner_slope: 0.1,
        }
    }
}

/// Sample sizes of the randomized checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Samples {
    pub projection_pairs: usize,
    pub transform_points: usize,
    pub disk_points: usize,
    pub kernel_points: usize,
    pub trees: usize,
    pub tree_vertices: usize,
}

impl Default for Samples {
    fn default() -> Self {
        Self {
            projection_pairs: 1000,
            transform_points: 20,
            disk_points: 200,
            kernel_points: 10_000,
            trees: 100,
            tree_vertices: 200,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Expect {
    /// Expected depth verdict of `carleson` and `keylemma`. Without it
    /// any verdict other than `fails` passes.
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub report: Option<String>,
    pub data: Option<String>,
}

pub const BUILTIN: [&str; 4] = ["disk", "square", "flat", "wedge"];

impl RunConfig {
    pub fn with_domain(domain: DomainSpec) -> Self {
        RunConfig {
            domain,
            kernel: default_kernel(),
            n: default_n(),
            p: default_p(),
            lambda: default_lambda(),
            depths: default_depths(),
            min_side: None,
            c_w: default_c_w(),
            seed: 0,
            quadrature: Quadrature::default(),
            bounds: Bounds::default(),
            samples: Samples::default(),
            expect: Expect::default(),
            output: Output::default(),
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        let spec = match name {
            "disk" => DomainSpec::Disk { center: [0.0, 0.0], radius: 1.0, window: None },
            "square" => DomainSpec::Polygon { vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], window: None },
            "flat" => DomainSpec::Graph { dim: 2, profile: ProfileSpec::Flat, delta: 0.5, window_side: 1.0 },
            "wedge" => DomainSpec::Graph { dim: 2, profile: ProfileSpec::Wedge { slope: 0.9 }, delta: 0.95, window_side: 1.0 },
            _ => return None,
        };
        Some(Self::with_domain(spec))
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// A builtin name or a path to a TOML file.
    pub fn resolve(domain: &str) -> Result<Self, CliError> {
        if let Some(c) = Self::builtin(domain) {
            return Ok(c);
        }
        let path = Path::new(domain);
        if !path.is_file() {
            return Err(CliError::Config(format!(
                "`{domain}` is neither a config file nor a builtin domain ({})",
                BUILTIN.join(", ")
            )));
        }
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{domain}: {e}")))?;
        Self::from_toml(&text, domain)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Config(format!("field `{field}`: {msg}")));
        if kernel_by_name(&self.kernel).is_none() {
            return bad("kernel", format!("unknown kernel `{}` (known: beurling, zero)", self.kernel));
        }
        if self.n == 0 || self.n > 4 {
            return bad("n", format!("need 1 ≤ n ≤ 4, got {}", self.n));
        }
        if let Err(e) = czsob::carleson::exponent(self.p) {
            return bad("p", e.to_string());
        }
        if let Some(l) = self.lambda.iter().find(|l| l[0] + l[1] >= self.n) {
            return bad("lambda", format!("need |λ| < n = {}, got {l:?}", self.n));
        }
        if self.lambda.is_empty() {
            return bad("lambda", "needs at least one multi-index".into());
        }
        if self.depths.is_empty() || self.depths.iter().any(|&d| d > 14) {
            return bad("depths", format!("need a nonempty list of depths ≤ 14, got {:?}", self.depths));
        }
        if self.min_side.is_some_and(|s| !(s > 0.0 && s.is_finite())) {
            return bad("min_side", "must be positive".into());
        }
        if !(self.c_w >= 1.0) {
            return bad("c_w", format!("need c_w ≥ 1, got {}", self.c_w));
        }
        if self.quadrature.cube_order == 0 || self.quadrature.sobolev_order == 0 || self.quadrature.continuous_order == 0 {
            return bad("quadrature", "rule orders must be positive".into());
        }
        self.domain()?;
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain, CliError> {
        build_domain(&self.domain).map_err(|e| CliError::Config(format!("field `domain`: {e}")))
    }

    pub fn kernel(&self) -> Box<dyn Kernel> {
        kernel_by_name(&self.kernel).expect("kernel validated")
    }

    pub fn overlap_bound(&self, dim: usize) -> f64 {
        self.bounds.overlap.unwrap_or(4f64.powi(dim as i32))
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn windowed(d: Domain, w: &Option<WindowSpec>) -> Result<Domain, czsob::GeometryError> {
    match w {
        None => Ok(d),
        Some(w) => {
            let base = WindowParams::with_side(w.side);
            d.with_params(WindowParams {
                side: w.side,
                delta0: w.delta0.unwrap_or(base.delta0),
                delta1: w.delta1.unwrap_or(base.delta1),
                delta2: w.delta2.unwrap_or(base.delta2),
            })
        }
    }
}

pub fn build_domain(spec: &DomainSpec) -> Result<Domain, czsob::GeometryError> {
    match spec {
        DomainSpec::Disk { center, radius, window } => windowed(make_disk_at(*center, *radius)?, window),
        DomainSpec::Polygon { vertices, window } => windowed(make_polygon(vertices)?, window),
        DomainSpec::Graph { dim, profile, delta, window_side } => {
            let profile = match profile {
                ProfileSpec::Flat => GraphProfile::Flat,
                ProfileSpec::Wedge { slope } => GraphProfile::Wedge { slope: *slope },
                ProfileSpec::Piecewise { knots, values } => {
                    GraphProfile::PiecewiseLinear { knots: knots.clone(), values: values.clone() }
                }
                ProfileSpec::Random { pieces, seed } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    random_lipschitz_profile(&mut rng, *delta, 2.0 * window_side, *pieces)
                }
            };
            make_graph_domain(*dim, profile, *delta, *window_side)
        }
    }
}

/// `2^-8`, `2^8` or a decimal.
pub fn parse_side(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.strip_prefix("2^") {
        Some(e) => e.parse::<i32>().map(|e| 2f64.powi(e)).map_err(|_| format!("bad exponent in `{s}`"))?,
        None => s.parse::<f64>().map_err(|_| format!("bad length `{s}`"))?,
    };
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("length must be positive, got `{s}`"))
    }
}

/// `0,0` or `0,0;1,0`.
pub fn parse_lambda(s: &str) -> Result<Vec<[u32; 2]>, String> {
    s.split(';')
        .map(|m| {
            let v: Vec<u32> = m.split(',').map(|t| t.trim().parse::<u32>().map_err(|_| format!("bad index `{m}`"))).collect::<Result<_, _>>()?;
            match v[..] {
                [a, b] => Ok([a, b]),
                _ => Err(format!("multi-index `{m}` needs two entries")),
            }
        })
        .collect()
}

pub fn parse_depths(s: &str) -> Result<Vec<u32>, String> {
    s.split(',').map(|t| t.trim().parse::<u32>().map_err(|_| format!("bad depth `{t}`"))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        for name in BUILTIN {
            RunConfig::builtin(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let cfg = RunConfig::builtin("square").unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back = RunConfig::from_toml(&text, "mem").unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let mut other = cfg.clone();
        other.seed = 1;
        assert_ne!(other.hash(), cfg.hash());
    }

    #[test]
    fn unknown_field_is_reported_with_position() {
        let text = "kernel = \"beurling\"\nbogus = 3\n[domain]\nkind = \"disk\"\n";
        let e = RunConfig::from_toml(text, "cfg.toml").unwrap_err().to_string();
        assert!(e.contains("bogus") && e.contains("line 2"), "{e}");
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let text = "p = 0.5\n[domain]\nkind = \"disk\"\n";
        let e = RunConfig::from_toml(text, "cfg.toml").unwrap_err().to_string();
        assert!(e.contains("`p`"), "{e}");
        let text = "n = 1\nlambda = [[1, 0]]\n[domain]\nkind = \"disk\"\n";
        assert!(RunConfig::from_toml(text, "c").unwrap_err().to_string().contains("lambda"));
        let text = "[domain]\nkind = \"graph\"\ndelta = 0.5\nprofile = { shape = \"wedge\", slope = 0.9 }\n";
        assert!(RunConfig::from_toml(text, "c").unwrap_err().to_string().contains("domain"));
    }

    #[test]
    fn graph_and_window_specs() {
        let text = "[domain]\nkind = \"graph\"\ndelta = 0.5\nprofile = { shape = \"random\", pieces = 8, seed = 3 }\n";
        RunConfig::from_toml(text, "c").unwrap();
        let text = "[domain]\nkind = \"disk\"\nradius = 2.0\nwindow = { side = 0.8 }\n";
        let d = RunConfig::from_toml(text, "c").unwrap().domain().unwrap();
        assert_eq!(d.params.side, 0.8);
    }

    #[test]
    fn side_and_list_syntax() {
        assert_eq!(parse_side("2^-8").unwrap(), 1.0 / 256.0);
        assert_eq!(parse_side("0.25").unwrap(), 0.25);
        assert!(parse_side("-1").is_err());
        assert_eq!(parse_lambda("0,0;1,0").unwrap(), vec![[0, 0], [1, 0]]);
        assert!(parse_lambda("1").is_err());
        assert_eq!(parse_depths("6,7,8").unwrap(), vec![6, 7, 8]);
    }
}
