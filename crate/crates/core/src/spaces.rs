//! Finite samples of metric measure spaces.
//!
//! A [`SampledSpace`] is a finite witness set for an ambient space together
//! with an exact distance evaluator and a ball-measure evaluator. Lattice
//! samples `q·{-e..e}^d` keep integer coordinates so that threshold tests such
//! as `d(x, y) <= 3ε` are decided in exact integer arithmetic.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::index::GridIndex;

/// Relative tolerance used for threshold comparisons on non-lattice spaces.
pub const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceKind {
    Euclidean,
    ExplicitMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    LebesgueAnalytic,
    EmpiricalCounting,
    EmpiricalWeighted,
}

impl FromStr for MeasureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lebesgue-analytic" | "lebesgue" => Ok(Self::LebesgueAnalytic),
            "empirical-counting" | "counting" => Ok(Self::EmpiricalCounting),
            "empirical-weighted" | "weighted" => Ok(Self::EmpiricalWeighted),
            other => Err(Error::invalid(format!("unknown measure kind '{other}'"))),
        }
    }
}

/// Positive rational number `num/den` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    num: i64,
    den: i64,
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::invalid("rational with zero denominator"));
        }
        let s = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den).max(1);
        Ok(Self {
            num: s * num / g,
            den: s * den / g,
        })
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_positive(&self) -> bool {
        self.num > 0
    }

    /// `1 / 2^k`.
    pub fn dyadic(k: u32) -> Self {
        Self { num: 1, den: 1i64 << k }
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Rational {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let a: i64 = a.trim().parse().map_err(|_| Error::invalid(format!("bad rational '{s}'")))?;
            let b: i64 = b.trim().parse().map_err(|_| Error::invalid(format!("bad rational '{s}'")))?;
            return Rational::new(a, b);
        }
        if let Ok(a) = s.parse::<i64>() {
            return Rational::new(a, 1);
        }
        let x: f64 = s.parse().map_err(|_| Error::invalid(format!("bad rational '{s}'")))?;
        let (a, b) = rational_approx(x).ok_or_else(|| Error::invalid(format!("'{s}' is not a short rational")))?;
        Rational::new(a as i64, b as i64)
    }
}

impl Serialize for Rational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Recovers `x = a/b` with `b <= 2^20` when `x` is (to 1e-12 relative) such a
/// fraction.
pub(crate) fn rational_approx(x: f64) -> Option<(i128, i128)> {
    if !x.is_finite() || x < 0.0 {
        return None;
    }
    const MAX_DEN: i128 = 1 << 20;
    // continued-fraction convergents
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        if a > 1e15 {
            break;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > MAX_DEN {
            break;
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let approx = h1 as f64 / k1 as f64;
        if (approx - x).abs() <= 1e-14 * x.max(1.0) {
            return Some((h1, k1));
        }
        let frac = v - a;
        if frac <= 0.0 {
            break;
        }
        v = 1.0 / frac;
    }
    None
}

/// A distance threshold prepared by [`SampledSpace::threshold`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    r: f64,
    exact: Option<(i128, i128)>,
}

impl Threshold {
    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }
}

/// Strict ball `{y : d(center, y) < radius}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: usize,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: usize, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }
}

#[derive(Debug, Clone)]
struct Lattice {
    scale: Rational,
    half_width: i64,
    ints: Vec<i64>,
}

/// Axis-aligned bounding box of the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Serializable description of a space, embedded in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceSummary {
    pub label: String,
    pub points: usize,
    pub dimension: usize,
    pub distance_kind: DistanceKind,
    pub measure_kind: MeasureKind,
    pub lattice_scale: Option<Rational>,
    pub quasiconvexity_l: Option<f64>,
    pub extent: Option<Extent>,
}

#[derive(Debug, Clone)]
pub struct SampledSpace {
    label: String,
    n: usize,
    dim: usize,
    coords: Vec<f64>,
    matrix: Option<Vec<f64>>,
    distance_kind: DistanceKind,
    measure_kind: MeasureKind,
    weights: Vec<f64>,
    lattice: Option<Lattice>,
    quasiconvexity_l: Option<f64>,
    extent: Option<Extent>,
}

fn extent_of(coords: &[f64], dim: usize) -> Option<Extent> {
    if coords.is_empty() || dim == 0 {
        return None;
    }
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in coords.chunks(dim) {
        for d in 0..dim {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    Some(Extent { lo, hi })
}

/// Volume of the Euclidean ball of radius `r` in dimension `dim` (1..=3).
pub fn euclidean_ball_volume(dim: usize, r: f64) -> f64 {
    match dim {
        1 => 2.0 * r,
        2 => PI * r * r,
        3 => 4.0 / 3.0 * PI * r * r * r,
        _ => f64::NAN,
    }
}

impl SampledSpace {
    /// The lattice `scale·{-extent..extent}^dimension` with analytic Lebesgue
    /// measure. Coordinate 0 varies fastest in the point ordering.
    pub fn euclidean_lattice(dimension: usize, scale: Rational, extent: i64) -> Result<Self> {
        if !(1..=3).contains(&dimension) {
            return Err(Error::invalid(format!("lattice dimension must be 1, 2 or 3, got {dimension}")));
        }
        if !scale.is_positive() {
            return Err(Error::invalid(format!("lattice scale must be positive, got {scale}")));
        }
        if extent < 1 {
            return Err(Error::invalid(format!("lattice extent must be >= 1, got {extent}")));
        }
        let w = (2 * extent + 1) as usize;
        let n = w.pow(dimension as u32);
        let q = scale.to_f64();
        let mut ints = Vec::with_capacity(n * dimension);
        for idx in 0..n {
            let mut rest = idx;
            for _ in 0..dimension {
                ints.push((rest % w) as i64 - extent);
                rest /= w;
            }
        }
        let coords: Vec<f64> = ints.iter().map(|&c| c as f64 * q).collect();
        let half = extent as f64 * q;
        Ok(Self {
            label: format!("lattice(d={dimension}, q={scale}, extent={extent})"),
            n,
            dim: dimension,
            coords,
            matrix: None,
            distance_kind: DistanceKind::Euclidean,
            measure_kind: MeasureKind::LebesgueAnalytic,
            weights: Vec::new(),
            lattice: Some(Lattice {
                scale,
                half_width: extent,
                ints,
            }),
            quasiconvexity_l: Some(1.0),
            extent: Some(Extent {
                lo: vec![-half; dimension],
                hi: vec![half; dimension],
            }),
        })
    }

    /// A Euclidean point cloud given row-major. `weights`, when present, are
    /// normalized to sum to one; otherwise every point gets mass `1/n`.
    pub fn from_points(
        dim: usize,
        coords: Vec<f64>,
        weights: Option<Vec<f64>>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::invalid("coordinate buffer does not match dimension"));
        }
        let n = coords.len() / dim;
        if n == 0 {
            return Err(Error::EmptySpace);
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite coordinate"));
        }
        let mut seen = HashSet::with_capacity(n);
        for (i, p) in coords.chunks(dim).enumerate() {
            let key: Vec<u64> = p.iter().map(|c| (c + 0.0).to_bits()).collect();
            if !seen.insert(key) {
                return Err(Error::DuplicatePoint { line: i as u64 + 1 });
            }
        }
        let (measure_kind, weights) = normalized_weights(n, weights)?;
        let extent = extent_of(&coords, dim);
        Ok(Self {
            label: label.into(),
            n,
            dim,
            coords,
            matrix: None,
            distance_kind: DistanceKind::Euclidean,
            measure_kind,
            weights,
            lattice: None,
            quasiconvexity_l: None,
            extent,
        })
    }

    /// A finite metric space given by its full distance matrix (row-major
    /// `n × n`). The matrix is checked to be a metric.
    pub fn from_distance_matrix(n: usize, matrix: Vec<f64>, weights: Option<Vec<f64>>, label: impl Into<String>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySpace);
        }
        if matrix.len() != n * n {
            return Err(Error::invalid("distance matrix must be n×n"));
        }
        for i in 0..n {
            if matrix[i * n + i] != 0.0 {
                return Err(Error::invalid(format!("nonzero diagonal entry at {i}")));
            }
            for j in 0..n {
                let d = matrix[i * n + j];
                if !d.is_finite() || d < 0.0 || d != matrix[j * n + i] {
                    return Err(Error::invalid(format!("matrix entry ({i},{j}) is not a symmetric nonnegative distance")));
                }
                if i != j && d == 0.0 {
                    return Err(Error::DuplicatePoint { line: j as u64 + 1 });
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if matrix[i * n + k] > (matrix[i * n + j] + matrix[j * n + k]) * (1.0 + 1e-12) {
                        return Err(Error::invalid(format!("triangle inequality fails for ({i},{j},{k})")));
                    }
                }
            }
        }
        let (measure_kind, weights) = normalized_weights(n, weights)?;
        Ok(Self {
            label: label.into(),
            n,
            dim: 0,
            coords: Vec::new(),
            matrix: Some(matrix),
            distance_kind: DistanceKind::ExplicitMatrix,
            measure_kind,
            weights,
            lattice: None,
            quasiconvexity_l: None,
            extent: None,
        })
    }

    /// Vertex set of the level-`level` Sierpinski gasket prefractal with unit
    /// side (the corners of all `3^level` small triangles), with counting
    /// measure.
    pub fn sierpinski_prefractal(level: u32) -> Result<Self> {
        if !(1..=10).contains(&level) {
            return Err(Error::invalid(format!("gasket level must be in [1, 10], got {level}")));
        }
        // triangular integer coordinates (a, b) -> a·u + b·v with u = (1,0), v = (1/2, √3/2)
        let side = 1i64 << level;
        let mut tris: Vec<[(i64, i64); 3]> = vec![[(0, 0), (side, 0), (0, side)]];
        for _ in 0..level {
            let mut next = Vec::with_capacity(tris.len() * 3);
            for [p0, p1, p2] in tris {
                let mid = |a: (i64, i64), b: (i64, i64)| ((a.0 + b.0) / 2, (a.1 + b.1) / 2);
                let (m01, m12, m02) = (mid(p0, p1), mid(p1, p2), mid(p0, p2));
                next.push([p0, m01, m02]);
                next.push([m01, p1, m12]);
                next.push([m02, m12, p2]);
            }
            tris = next;
        }
        let mut verts: Vec<(i64, i64)> = tris.into_iter().flatten().collect();
        verts.sort_by_key(|&(a, b)| (b, a));
        verts.dedup();
        let h = 3f64.sqrt() / 2.0;
        let s = side as f64;
        let coords: Vec<f64> = verts
            .iter()
            .flat_map(|&(a, b)| [(a as f64 + b as f64 / 2.0) / s, b as f64 * h / s])
            .collect();
        let mut space = Self::from_points(2, coords, None, format!("sierpinski(level={level})"))?;
        space.quasiconvexity_l = None;
        Ok(space)
    }

    /// Loads a CSV point cloud: one point per row, `x1..xd[,weight]`, `#`
    /// comment lines, optional header row (detected by a non-numeric first
    /// row). With [`MeasureKind::EmpiricalWeighted`] the last column is the
    /// weight.
    pub fn load_point_cloud(path: impl AsRef<Path>, measure_kind: MeasureKind) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut space = Self::parse_point_cloud(&text, measure_kind)?;
        space.label = path.display().to_string();
        Ok(space)
    }

    pub fn parse_point_cloud(text: &str, measure_kind: MeasureKind) -> Result<Self> {
        if measure_kind == MeasureKind::LebesgueAnalytic {
            return Err(Error::AnalyticMeasureUnavailable);
        }
        let weighted = measure_kind == MeasureKind::EmpiricalWeighted;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        let mut lines = Vec::new();
        let mut dim: Option<usize> = None;
        let mut first = true;
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|f| f.parse::<f64>()).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if first => {
                    first = false;
                    continue;
                }
                Err(e) => {
                    return Err(Error::Parse {
                        line,
                        message: format!("non-numeric field: {e}"),
                    })
                }
            };
            first = false;
            let cols = if weighted { values.len().saturating_sub(1) } else { values.len() };
            if cols == 0 {
                return Err(Error::Parse {
                    line,
                    message: "row has no coordinates".into(),
                });
            }
            match dim {
                None => dim = Some(cols),
                Some(d) if d != cols => {
                    return Err(Error::Parse {
                        line,
                        message: format!("expected {d} coordinates, found {cols}"),
                    })
                }
                _ => {}
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    line,
                    message: "non-finite value".into(),
                });
            }
            coords.extend_from_slice(&values[..cols]);
            if weighted {
                let w = values[cols];
                if !(w > 0.0) {
                    return Err(Error::Parse {
                        line,
                        message: format!("weight must be positive, got {w}"),
                    });
                }
                weights.push(w);
            }
            lines.push(line);
        }
        let dim = dim.ok_or(Error::EmptySpace)?;
        let mut seen = HashSet::with_capacity(lines.len());
        for (p, &line) in coords.chunks(dim).zip(&lines) {
            let key: Vec<u64> = p.iter().map(|c| (c + 0.0).to_bits()).collect();
            if !seen.insert(key) {
                return Err(Error::DuplicatePoint { line });
            }
        }
        Self::from_points(dim, coords, weighted.then_some(weights), "point-cloud")
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Declares a quasiconvexity constant (not computed).
    pub fn with_quasiconvexity(mut self, l: f64) -> Result<Self> {
        if !(l >= 1.0) {
            return Err(Error::invalid("quasiconvexity constant must be >= 1"));
        }
        self.quasiconvexity_l = Some(l);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn distance_kind(&self) -> DistanceKind {
        self.distance_kind
    }

    pub fn measure_kind(&self) -> MeasureKind {
        self.measure_kind
    }

    pub fn lattice_scale(&self) -> Option<Rational> {
        self.lattice.as_ref().map(|l| l.scale)
    }

    pub fn lattice_half_width(&self) -> Option<i64> {
        self.lattice.as_ref().map(|l| l.half_width)
    }

    pub fn quasiconvexity_l(&self) -> Option<f64> {
        self.quasiconvexity_l
    }

    pub fn extent(&self) -> Option<&Extent> {
        self.extent.as_ref()
    }

    /// Row-major coordinates (empty for matrix spaces).
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        if self.dim == 0 {
            &[]
        } else {
            &self.coords[i * self.dim..(i + 1) * self.dim]
        }
    }

    /// Integer lattice coordinates (units of the lattice scale).
    pub fn lattice_point(&self, i: usize) -> Option<&[i64]> {
        self.lattice.as_ref().map(|l| &l.ints[i * self.dim..(i + 1) * self.dim])
    }

    /// Index of the lattice point with the given integer coordinates.
    pub fn lattice_index(&self, ints: &[i64]) -> Option<usize> {
        let l = self.lattice.as_ref()?;
        if ints.len() != self.dim {
            return None;
        }
        let w = 2 * l.half_width + 1;
        let mut idx = 0i64;
        for &c in ints.iter().rev() {
            if c.abs() > l.half_width {
                return None;
            }
            idx = idx * w + (c + l.half_width);
        }
        Some(idx as usize)
    }

    /// Normalized point masses for empirical measures (empty otherwise).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn summary(&self) -> SpaceSummary {
        SpaceSummary {
            label: self.label.clone(),
            points: self.n,
            dimension: self.dim,
            distance_kind: self.distance_kind,
            measure_kind: self.measure_kind,
            lattice_scale: self.lattice_scale(),
            quasiconvexity_l: self.quasiconvexity_l,
            extent: self.extent.clone(),
        }
    }

    /// Squared distance in units of `scale²` for lattice spaces.
    pub fn lattice_dist_sq(&self, i: usize, j: usize) -> Option<i128> {
        let l = self.lattice.as_ref()?;
        let a = &l.ints[i * self.dim..(i + 1) * self.dim];
        let b = &l.ints[j * self.dim..(j + 1) * self.dim];
        Some(a.iter().zip(b).map(|(x, y)| ((x - y) as i128).pow(2)).sum())
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        if let Some(m) = &self.matrix {
            return m[i * self.n + j];
        }
        if let (Some(l), Some(d2)) = (&self.lattice, self.lattice_dist_sq(i, j)) {
            return (d2 as f64).sqrt() * l.scale.to_f64();
        }
        euclid(self.point(i), self.point(j))
    }

    /// Prepares `r` for repeated comparisons: on lattice spaces a rational
    /// `r / scale = a / b` is detected once so later tests are exact.
    pub fn threshold(&self, r: f64) -> Threshold {
        let exact = self
            .lattice
            .as_ref()
            .and_then(|l| rational_approx(r * l.scale.den() as f64 / l.scale.num() as f64))
            .map(|(a, b)| (a * a, b * b));
        Threshold { r, exact }
    }

    /// Compares `d(i, j)` with a prepared threshold; see [`Self::cmp_distance`].
    pub fn cmp_threshold(&self, i: usize, j: usize, t: &Threshold) -> Ordering {
        if let Some((a2, b2)) = t.exact {
            let d2 = self.lattice_dist_sq(i, j).expect("lattice space");
            return (d2 * b2).cmp(&a2);
        }
        let d = self.distance(i, j);
        if d == t.r {
            Ordering::Equal
        } else if d < t.r || (d - t.r).abs() <= REL_TOL * t.r.abs() {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }

    /// Compares `d(i, j)` with `r`. Lattice spaces with rational `r/scale`
    /// decide exactly. Otherwise bitwise equality is `Equal` and any other
    /// value within [`REL_TOL`] of `r` is resolved as inside (`Less`).
    pub fn cmp_distance(&self, i: usize, j: usize, r: f64) -> Ordering {
        self.cmp_threshold(i, j, &self.threshold(r))
    }

    /// True when the comparison of `d(i, j)` with `r` was resolved by the
    /// float tolerance rather than decided exactly.
    pub fn is_near_tie(&self, i: usize, j: usize, r: f64) -> bool {
        if self.threshold(r).exact.is_some() {
            return false;
        }
        let d = self.distance(i, j);
        d != r && (d - r).abs() <= REL_TOL * r.abs()
    }

    /// `d(i, j) < r` (strict ball membership).
    pub fn within(&self, i: usize, j: usize, r: f64) -> bool {
        self.cmp_distance(i, j, r) == Ordering::Less
    }

    /// `d(i, j) <= r`.
    pub fn at_most(&self, i: usize, j: usize, r: f64) -> bool {
        self.cmp_distance(i, j, r) != Ordering::Greater
    }

    /// `d(i, j) >= r`.
    pub fn at_least(&self, i: usize, j: usize, r: f64) -> bool {
        self.cmp_distance(i, j, r) != Ordering::Less
    }

    pub(crate) fn grid_index(&self, cell: f64, ids: impl IntoIterator<Item = usize>) -> Option<GridIndex> {
        if self.distance_kind != DistanceKind::Euclidean {
            return None;
        }
        GridIndex::build(self.dim, cell, &self.coords, ids)
    }

    /// Calls `f(j)` for every point `j` with `d(center, j) < radius`.
    pub(crate) fn for_each_in_ball_with<F: FnMut(usize)>(&self, grid: Option<&GridIndex>, center: usize, radius: f64, mut f: F) {
        let t = self.threshold(radius);
        match grid {
            Some(g) => g.for_each_candidate(self.point(center), radius, |j| {
                if self.cmp_threshold(center, j, &t) == Ordering::Less {
                    f(j)
                }
            }),
            None => {
                for j in 0..self.n {
                    if self.cmp_threshold(center, j, &t) == Ordering::Less {
                        f(j)
                    }
                }
            }
        }
    }

    /// True when this space can evaluate analytic Lebesgue ball volumes.
    pub fn is_full_space_lattice(&self) -> bool {
        self.measure_kind == MeasureKind::LebesgueAnalytic && self.lattice.is_some()
    }

    /// `μ(B(center, radius))`.
    pub fn ball_measure(&self, ball: &BallSpec) -> Result<f64> {
        if ball.center >= self.n {
            return Err(Error::invalid(format!("ball center {} out of range", ball.center)));
        }
        if !(ball.radius > 0.0) {
            return Err(Error::invalid("ball radius must be positive"));
        }
        match self.measure_kind {
            MeasureKind::LebesgueAnalytic => {
                if !self.is_full_space_lattice() {
                    return Err(Error::AnalyticMeasureUnavailable);
                }
                Ok(euclidean_ball_volume(self.dim, ball.radius))
            }
            _ => {
                let grid = self.grid_index(ball.radius, 0..self.n);
                let mut mass = 0.0;
                self.for_each_in_ball_with(grid.as_ref(), ball.center, ball.radius, |j| mass += self.weights[j]);
                Ok(mass)
            }
        }
    }

    /// `μ(B(c, radius))` for every center, sharing one spatial index.
    pub fn ball_measures(&self, centers: &[usize], radius: f64) -> Result<Vec<f64>> {
        if !(radius > 0.0) {
            return Err(Error::invalid("ball radius must be positive"));
        }
        if let Some(&c) = centers.iter().find(|&&c| c >= self.n) {
            return Err(Error::invalid(format!("ball center {c} out of range")));
        }
        match self.measure_kind {
            MeasureKind::LebesgueAnalytic => {
                if !self.is_full_space_lattice() {
                    return Err(Error::AnalyticMeasureUnavailable);
                }
                Ok(vec![euclidean_ball_volume(self.dim, radius); centers.len()])
            }
            _ => {
                let grid = self.grid_index(radius, 0..self.n);
                Ok(exec::map_slice(centers, |&c| {
                    let mut mass = 0.0;
                    self.for_each_in_ball_with(grid.as_ref(), c, radius, |j| mass += self.weights[j]);
                    mass
                }))
            }
        }
    }

    /// Hausdorff gap between the sample and the ambient space it represents,
    /// when known (half the cell diagonal for lattice samples).
    pub fn coverage_gap(&self) -> Option<f64> {
        self.lattice
            .as_ref()
            .map(|l| l.scale.to_f64() * (self.dim as f64).sqrt() / 2.0)
    }

    /// Checks symmetry, identity of indiscernibles and the triangle inequality
    /// on `samples` random triples. Returns the first violation found.
    pub fn check_metric_axioms(&self, samples: usize, seed: u64) -> Result<()> {
        if self.n == 0 {
            return Ok(());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let (x, y, z) = (rng.random_range(0..self.n), rng.random_range(0..self.n), rng.random_range(0..self.n));
            let (dxy, dyx) = (self.distance(x, y), self.distance(y, x));
            if dxy != dyx {
                return Err(Error::invalid(format!("asymmetric distance between {x} and {y}")));
            }
            if dxy < 0.0 || ((dxy == 0.0) != (x == y)) {
                return Err(Error::invalid(format!("identity axiom fails for ({x},{y})")));
            }
            let bound = dxy + self.distance(y, z);
            if self.distance(x, z) > bound * (1.0 + 1e-12) {
                return Err(Error::invalid(format!("triangle inequality fails for ({x},{y},{z})")));
            }
        }
        Ok(())
    }
}

fn normalized_weights(n: usize, weights: Option<Vec<f64>>) -> Result<(MeasureKind, Vec<f64>)> {
    match weights {
        None => Ok((MeasureKind::EmpiricalCounting, vec![1.0 / n as f64; n])),
        Some(w) => {
            if w.len() != n {
                return Err(Error::invalid("one weight per point required"));
            }
            if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::invalid("weights must be positive and finite"));
            }
            let total: f64 = w.iter().sum();
            Ok((MeasureKind::EmpiricalWeighted, w.into_iter().map(|x| x / total).collect()))
        }
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn lattice_sizes() {
        assert_eq!(SampledSpace::euclidean_lattice(2, q("1/4"), 16).unwrap().len(), 33 * 33);
        assert_eq!(SampledSpace::euclidean_lattice(2, q("1"), 4).unwrap().len(), 81);
        let s = SampledSpace::euclidean_lattice(1, q("1/2"), 2).unwrap();
        let xs: Vec<f64> = (0..s.len()).map(|i| s.point(i)[0]).collect();
        assert_eq!(xs, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn lattice_rejects_bad_arguments() {
        assert!(SampledSpace::euclidean_lattice(2, q("-1/4"), 4).is_err());
        assert!(SampledSpace::euclidean_lattice(2, q("1/4"), 0).is_err());
        assert!(SampledSpace::euclidean_lattice(4, q("1"), 2).is_err());
    }

    #[test]
    fn lattice_index_roundtrip() {
        let s = SampledSpace::euclidean_lattice(3, q("1/3"), 2).unwrap();
        for i in 0..s.len() {
            assert_eq!(s.lattice_index(s.lattice_point(i).unwrap()), Some(i));
        }
        assert_eq!(s.lattice_index(&[3, 0, 0]), None);
    }

    #[test]
    fn plane_ball_measures() {
        let s = SampledSpace::euclidean_lattice(2, q("1/4"), 4).unwrap();
        let m = s.ball_measure(&BallSpec::new(0, 0.25).unwrap()).unwrap();
        assert!((m - PI / 16.0).abs() < 1e-15);
        let m = s.ball_measure(&BallSpec::new(5, 1.0).unwrap()).unwrap();
        assert!((m - PI).abs() < 1e-15);
    }

    #[test]
    fn empirical_counting_ball() {
        let s = SampledSpace::from_points(1, vec![0.0, 1.0, 2.0, 3.0, 4.0], None, "line").unwrap();
        let m = s.ball_measure(&BallSpec::new(0, 1.5).unwrap()).unwrap();
        assert!((m - 2.0 / 5.0).abs() < 1e-15);
        // strict: the point at distance exactly 1 is outside a radius-1 ball
        let m = s.ball_measure(&BallSpec::new(0, 1.0).unwrap()).unwrap();
        assert!((m - 1.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn analytic_measure_requires_lattice() {
        let mut s = SampledSpace::from_points(2, vec![0.0, 0.0, 1.0, 0.0], None, "pair").unwrap();
        s.measure_kind = MeasureKind::LebesgueAnalytic;
        assert!(matches!(
            s.ball_measure(&BallSpec::new(0, 1.0).unwrap()),
            Err(Error::AnalyticMeasureUnavailable)
        ));
    }

    #[test]
    fn exact_lattice_ties() {
        let s = SampledSpace::euclidean_lattice(2, q("1/4"), 4).unwrap();
        let o = s.lattice_index(&[0, 0]).unwrap();
        let x3 = s.lattice_index(&[3, 0]).unwrap();
        // distance exactly 3ε with ε = 1/4
        assert_eq!(s.cmp_distance(o, x3, 0.75), Ordering::Equal);
        assert!(s.at_most(o, x3, 0.75));
        assert!(!s.within(o, x3, 0.75));
        assert!(s.at_least(o, x3, 0.75));
    }

    #[test]
    fn point_cloud_parsing() {
        let s = SampledSpace::parse_point_cloud("x,y\n0,0\n1,0\n0.5,0.8660254\n", MeasureKind::EmpiricalCounting).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.dim(), 2);
        let err = SampledSpace::parse_point_cloud("# c\n0,0\n1,1\n0,0\n", MeasureKind::EmpiricalCounting).unwrap_err();
        assert!(err.to_string().contains("duplicate point"), "{err}");
        assert!(matches!(err, Error::DuplicatePoint { line: 4 }));
        let s = SampledSpace::parse_point_cloud("0,0,1\n1,0,2\n0,1,3\n", MeasureKind::EmpiricalWeighted).unwrap();
        let w = s.weights();
        assert!((w[0] - 1.0 / 6.0).abs() < 1e-15 && (w[1] - 2.0 / 6.0).abs() < 1e-15 && (w[2] - 3.0 / 6.0).abs() < 1e-15);
        let err = SampledSpace::parse_point_cloud("0,0\n1,a\n", MeasureKind::EmpiricalCounting).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(matches!(
            SampledSpace::parse_point_cloud("# nothing\n", MeasureKind::EmpiricalCounting),
            Err(Error::EmptySpace)
        ));
    }

    #[test]
    fn gasket_counts() {
        assert_eq!(SampledSpace::sierpinski_prefractal(1).unwrap().len(), 6);
        assert_eq!(SampledSpace::sierpinski_prefractal(2).unwrap().len(), 15);
        assert!(SampledSpace::sierpinski_prefractal(0).is_err());
        assert!(SampledSpace::sierpinski_prefractal(11).is_err());
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(q("2/8"), Rational::new(1, 4).unwrap());
        assert_eq!(q("0.125"), Rational::dyadic(3));
        assert_eq!(q("3").to_string(), "3");
        assert_eq!(rational_approx(1.5), Some((3, 2)));
        assert_eq!(rational_approx(std::f64::consts::PI), None);
    }

    #[test]
    fn distance_matrix_validation() {
        let ok = SampledSpace::from_distance_matrix(3, vec![0., 1., 2., 1., 0., 1., 2., 1., 0.], None, "path");
        assert!(ok.is_ok());
        let bad = SampledSpace::from_distance_matrix(3, vec![0., 1., 5., 1., 0., 1., 5., 1., 0.], None, "bad");
        assert!(bad.is_err());
    }
}
