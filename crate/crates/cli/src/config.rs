use std::path::{Path, PathBuf};
use std::str::FromStr;

use metric_discretize::{MeasureKind, NetGraph, Rational, SampledSpace};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Discretize,
    ReproduceGrid,
    Multiscale,
    Poincare,
    Ghcheck,
}

/// Everything a run depends on. Reports embed the resolved config, so
/// feeding it back through `--config` replays the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub space: Option<String>,
    pub epsilon: Option<f64>,
    pub levels: Option<String>,
    pub p: f64,
    pub lambda: f64,
    pub seed: u64,
    pub suite_size: usize,
    /// Poincaré ball radius (absolute); defaults to `2ε`.
    pub radius: Option<f64>,
    /// Poincaré ball center (vertex index).
    pub center: Option<usize>,
    pub oracle: bool,
    pub r: f64,
    pub eta: f64,
    /// Bi-Lipschitz constant for the GH defect bound; measured when absent.
    pub l: Option<f64>,
    pub pairs: usize,
    pub out: Option<PathBuf>,
    pub emit_table: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            space: None,
            epsilon: None,
            levels: None,
            p: 1.0,
            lambda: 2.0,
            seed: 0,
            suite_size: 32,
            radius: None,
            center: None,
            oracle: false,
            r: 4.0,
            eta: 0.5,
            l: None,
            pairs: 200,
            out: None,
            emit_table: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }

    pub fn command(&self) -> Command {
        self.command.expect("resolved config has a command")
    }

    /// Fills command-specific defaults and validates every field.
    pub fn resolve(mut self, command: Command) -> Result<Self, CliError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(CliError::Validation(format!("config is for {c:?}, not {command:?}")));
            }
        }
        self.command = Some(command);
        let (space, epsilon, levels) = match command {
            Command::Discretize | Command::Poincare => ("lattice:2:1/4:16", None, None),
            Command::ReproduceGrid => ("lattice:2:1/4:16", None, Some("3..8")),
            Command::Multiscale => ("lattice:2:1/16:192", Some(0.5), Some("4")),
            Command::Ghcheck => ("lattice:2:1/32:192", Some(1.0), Some("6")),
        };
        self.space.get_or_insert_with(|| space.to_string());
        if self.epsilon.is_none() {
            self.epsilon = epsilon;
        }
        if self.levels.is_none() {
            self.levels = levels.map(String::from);
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        SpaceSpec::from_str(self.space.as_deref().unwrap_or_default())?;
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return bad(format!("--epsilon must be positive, got {e}"));
            }
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return bad(format!("--p must be >= 1, got {}", self.p));
        }
        if !(self.lambda >= 1.0 && self.lambda.is_finite()) {
            return bad(format!("--lambda must be >= 1, got {}", self.lambda));
        }
        if self.suite_size == 0 {
            return bad("--suite-size must be positive".into());
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("--radius must be positive, got {r}"));
            }
        }
        if self.command == Some(Command::Ghcheck) {
            if !(self.eta > 0.0 && self.eta < self.r) {
                return bad(format!("need 0 < eta < r, got eta = {}, r = {}", self.eta, self.r));
            }
            if let Some(l) = self.l {
                if l.is_nan() || l < 1.0 {
                    return bad(format!("--l must be >= 1, got {l}"));
                }
            }
            if self.pairs == 0 {
                return bad("--pairs must be positive".into());
            }
        }
        if self.emit_table && self.out.is_none() {
            return bad("--emit-table needs --out".into());
        }
        match self.command {
            Some(Command::ReproduceGrid) => {
                self.level_range()?;
            }
            Some(Command::Multiscale | Command::Ghcheck) => {
                self.level_count()?;
            }
            _ => {}
        }
        Ok(())
    }

    /// `A..B` (inclusive) or a single level.
    pub fn level_range(&self) -> Result<(u32, u32), CliError> {
        let s = self.levels.as_deref().unwrap_or_default();
        let parse = |t: &str| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| CliError::Validation(format!("bad level '{t}' in --levels {s}")))
        };
        let (a, b) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
            None => {
                let l = parse(s)?;
                (l, l)
            }
        };
        if a == 0 || a > b || b > metric_discretize::reproduce::MAX_LEVEL {
            return Err(CliError::Validation(format!(
                "--levels must be a range within 1..{}, got {s}",
                metric_discretize::reproduce::MAX_LEVEL
            )));
        }
        Ok((a, b))
    }

    pub fn level_count(&self) -> Result<usize, CliError> {
        let s = self.levels.as_deref().unwrap_or_default();
        match s.trim().parse::<usize>() {
            Ok(n) if (2..=12).contains(&n) => Ok(n),
            _ => Err(CliError::Validation(format!("--levels must be a level count in 2..=12, got '{s}'"))),
        }
    }

    pub fn space_spec(&self) -> SpaceSpec {
        SpaceSpec::from_str(self.space.as_deref().unwrap_or_default()).expect("validated")
    }
}

/// `lattice:DIM:SCALE:EXTENT`, `cloud:PATH[:MEASURE]`, `sierpinski:LEVEL`,
/// or the bare graphs `path:N` and `cycle:N`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceSpec {
    Lattice { dim: usize, scale: Rational, extent: i64 },
    Cloud { path: PathBuf, measure: MeasureKind },
    Sierpinski(u32),
    Path(usize),
    Cycle(usize),
}

impl FromStr for SpaceSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Validation(format!("bad space spec '{s}'"));
        let mut parts = s.splitn(2, ':');
        let kind = parts.next().unwrap_or_default();
        let rest = parts.next().ok_or_else(bad)?;
        match kind {
            "lattice" => {
                let f: Vec<&str> = rest.split(':').collect();
                if f.len() != 3 {
                    return Err(bad());
                }
                Ok(SpaceSpec::Lattice {
                    dim: f[0].parse().map_err(|_| bad())?,
                    scale: f[1].parse().map_err(|_| bad())?,
                    extent: f[2].parse().map_err(|_| bad())?,
                })
            }
            "cloud" => {
                let (path, measure) = match rest.rsplit_once(':') {
                    Some((p, m)) if MeasureKind::from_str(m).is_ok() => (p, MeasureKind::from_str(m).expect("checked")),
                    _ => (rest, MeasureKind::EmpiricalCounting),
                };
                if path.is_empty() {
                    return Err(bad());
                }
                Ok(SpaceSpec::Cloud {
                    path: PathBuf::from(path),
                    measure,
                })
            }
            "sierpinski" => Ok(SpaceSpec::Sierpinski(rest.parse().map_err(|_| bad())?)),
            "path" | "cycle" => {
                let n: usize = rest.parse().map_err(|_| bad())?;
                if n < 2 || (kind == "cycle" && n < 3) {
                    return Err(CliError::Validation(format!("graph '{s}' is too small")));
                }
                Ok(if kind == "path" { SpaceSpec::Path(n) } else { SpaceSpec::Cycle(n) })
            }
            _ => Err(bad()),
        }
    }
}

pub enum Loaded {
    Space(SampledSpace),
    Graph(NetGraph),
}

impl SpaceSpec {
    pub fn load(&self) -> Result<Loaded, CliError> {
        Ok(match self {
            SpaceSpec::Lattice { dim, scale, extent } => Loaded::Space(SampledSpace::euclidean_lattice(*dim, *scale, *extent)?),
            SpaceSpec::Cloud { path, measure } => Loaded::Space(SampledSpace::load_point_cloud(path, *measure)?),
            SpaceSpec::Sierpinski(level) => Loaded::Space(SampledSpace::sierpinski_prefractal(*level)?),
            SpaceSpec::Path(n) | SpaceSpec::Cycle(n) => {
                let n = *n;
                let cyclic = matches!(self, SpaceSpec::Cycle(_));
                let adj = (0..n)
                    .map(|v| {
                        let mut nb = Vec::new();
                        if v > 0 {
                            nb.push(v - 1);
                        } else if cyclic {
                            nb.push(n - 1);
                        }
                        if v + 1 < n {
                            nb.push(v + 1);
                        } else if cyclic {
                            nb.push(0);
                        }
                        nb.sort_unstable();
                        nb
                    })
                    .collect();
                Loaded::Graph(NetGraph::from_adjacency(1.0, adj, vec![1.0; n])?)
            }
        })
    }

    pub fn load_space(&self) -> Result<SampledSpace, CliError> {
        match self.load()? {
            Loaded::Space(s) => Ok(s),
            Loaded::Graph(_) => Err(CliError::Validation("this command needs a sampled space, not a bare graph".into())),
        }
    }
}
