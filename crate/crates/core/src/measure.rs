//! Discrete measures, ground metrics and cost matrices.
//!
//! A [`DiscreteMeasure`] is a finite list of distinct atoms in `R^d` with
//! positive weights summing to one. Atoms whose coordinates are bit-for-bit
//! equal are merged at construction, so the support of a measure is always
//! minimal and total-variation computations are exact.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accepted deviation of the total mass from one without touching the weights.
pub const MASS_TOLERANCE: f64 = 1e-12;
/// Deviations up to this size are absorbed by renormalizing.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MeasureFile", try_from = "MeasureFile")]
pub struct DiscreteMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasureFile {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl From<DiscreteMeasure> for MeasureFile {
    fn from(m: DiscreteMeasure) -> Self {
        MeasureFile {
            points: m.points().map(<[f64]>::to_vec).collect(),
            weights: m.weights,
        }
    }
}

impl TryFrom<MeasureFile> for DiscreteMeasure {
    type Error = Error;

    fn try_from(file: MeasureFile) -> Result<Self> {
        DiscreteMeasure::new(file.points, file.weights)
    }
}

fn canonical(x: f64) -> f64 {
    // -0.0 and 0.0 are the same location
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

impl DiscreteMeasure {
    /// Builds a measure from points and weights, merging duplicate points.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("a measure needs at least one atom"));
        }
        if points.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::invalid("points must have dimension >= 1"));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.len() != dim {
                return Err(Error::invalid("points have inconsistent dimensions"));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("point coordinates must be finite"));
            }
            coords.extend(p.iter().map(|&x| canonical(x)));
        }
        Self::from_flat(dim, coords, weights)
    }

    /// Builds a one-dimensional measure.
    pub fn from_1d(points: &[f64], weights: Vec<f64>) -> Result<Self> {
        Self::new(points.iter().map(|&x| vec![x]).collect(), weights)
    }

    /// Uniform weights `1/n` on the given points (duplicates merge and add up).
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    pub(crate) fn from_flat(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::invalid("weights must be finite and strictly positive"));
        }
        let n = weights.len();
        let mut index: HashMap<Vec<u64>, usize> = HashMap::with_capacity(n);
        let mut merged_coords = Vec::with_capacity(coords.len());
        let mut merged_weights: Vec<f64> = Vec::with_capacity(n);
        for (i, &w) in weights.iter().enumerate() {
            let p = &coords[i * dim..(i + 1) * dim];
            let key: Vec<u64> = p.iter().map(|x| canonical(*x).to_bits()).collect();
            match index.get(&key) {
                Some(&k) => merged_weights[k] += w,
                None => {
                    index.insert(key, merged_weights.len());
                    merged_coords.extend(p.iter().map(|&x| canonical(x)));
                    merged_weights.push(w);
                }
            }
        }
        let total: f64 = merged_weights.iter().sum();
        let dev = (total - 1.0).abs();
        if dev > RENORMALIZE_TOLERANCE {
            return Err(Error::invalid(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        if dev > MASS_TOLERANCE {
            for w in &mut merged_weights {
                *w /= total;
            }
        }
        Ok(DiscreteMeasure {
            dim,
            coords: merged_coords,
            weights: merged_weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// True when all atoms carry the same weight `1/n` (up to `tol`).
    pub fn is_uniform(&self, tol: f64) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|x| (x - w).abs() <= tol)
    }

    /// Applies `f` to every atom position. Atoms that collide afterwards merge.
    pub fn map_points(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        Self::new(self.points().map(&mut f).collect(), self.weights.clone())
    }

    /// Largest pairwise Euclidean distance between atoms.
    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                best = best.max(euclidean(self.point(i), self.point(j)));
            }
        }
        best
    }

    /// Merges weighted measures: `Σ c_k · μ_k`, where the coefficients sum to one.
    pub fn mixture(parts: &[(f64, &DiscreteMeasure)]) -> Result<Self> {
        let Some((_, first)) = parts.iter().find(|(c, _)| *c > 0.0) else {
            return Err(Error::invalid("mixture needs a positive coefficient"));
        };
        let dim = first.dim;
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for &(c, m) in parts {
            if c < 0.0 || !c.is_finite() {
                return Err(Error::invalid("mixture coefficients must be nonnegative"));
            }
            if c == 0.0 {
                continue;
            }
            if m.dim != dim {
                return Err(Error::invalid("mixture components have different dimensions"));
            }
            coords.extend_from_slice(&m.coords);
            weights.extend(m.weights.iter().map(|w| c * w));
        }
        Self::from_flat(dim, coords, weights)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("measure serializes")
    }

    /// Parses the CSV layout `x1,..,xd,w` (header row required).
    pub fn from_csv_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let cols = headers.len();
        if cols < 2 || headers.get(cols - 1).map(str::trim) != Some("w") {
            return Err(Error::File(
                "measure CSV needs a header x1,..,xd,w".to_string(),
            ));
        }
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let vals: std::result::Result<Vec<f64>, _> =
                record.iter().map(|s| s.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::File(format!("bad number in measure CSV: {e}")))?;
            if vals.len() != cols {
                return Err(Error::File("ragged measure CSV row".to_string()));
            }
            weights.push(vals[cols - 1]);
            points.push(vals[..cols - 1].to_vec());
        }
        Self::new(points, weights)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.dim).map(|k| format!("x{k}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",w\n");
        for (p, w) in self.points().zip(&self.weights) {
            for x in p {
                out.push_str(&format!("{x:?},"));
            }
            out.push_str(&format!("{w:?}\n"));
        }
        out
    }

    /// Reads a measure from `.json` or `.csv` (by extension; JSON otherwise).
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::File(format!("{}: {e}", path.display())))?;
        if is_csv(path) {
            Self::from_csv_reader(text.as_bytes())
        } else {
            Self::from_json_str(&text)
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = if is_csv(path) {
            self.to_csv_string()
        } else {
            self.to_json_string()
        };
        std::fs::write(path, text).map_err(|e| Error::File(format!("{}: {e}", path.display())))
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Order of the transport cost: `d^p` for finite `p >= 1`, or the bottleneck case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn finite(p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::invalid(format!("exponent p = {p} must be finite and >= 1")));
        }
        Ok(Exponent::Finite(p))
    }

    pub fn as_finite(self) -> Option<f64> {
        match self {
            Exponent::Finite(p) => Some(p),
            Exponent::Infinity => None,
        }
    }

    /// `d^p`, with `p = 1` and `p = 2` special-cased to avoid `powf`.
    #[inline]
    pub fn apply(self, d: f64) -> f64 {
        match self {
            Exponent::Finite(p) if p == 1.0 => d,
            Exponent::Finite(p) if p == 2.0 => d * d,
            Exponent::Finite(p) => d.powf(p),
            Exponent::Infinity => d,
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Exponent::Infinity);
        }
        let p: f64 = t
            .parse()
            .map_err(|_| Error::invalid(format!("cannot parse exponent {s:?}")))?;
        Exponent::finite(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricKind {
    Euclidean,
    /// User-supplied ground distances `d(x_i, y_j)` (not yet raised to `p`).
    CustomMatrix(CostMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundMetric {
    pub kind: MetricKind,
    pub exponent: Exponent,
}

impl GroundMetric {
    pub fn euclidean(exponent: Exponent) -> Self {
        GroundMetric {
            kind: MetricKind::Euclidean,
            exponent,
        }
    }

    pub fn custom(distances: CostMatrix, exponent: Exponent) -> Result<Self> {
        if distances.data.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::invalid("custom distances must be finite and nonnegative"));
        }
        Ok(GroundMetric {
            kind: MetricKind::CustomMatrix(distances),
            exponent,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Metric,
    UserSupplied,
}

/// Dense row-major `n × m` matrix of transport costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    provenance: Provenance,
}

impl CostMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("cost matrix needs at least one row"));
        }
        let m = rows[0].len();
        if m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(Error::invalid("cost matrix rows must be non-empty and equal length"));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_vec(n, m, data, Provenance::UserSupplied)
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid("cost matrix data has the wrong length"));
        }
        if data.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::invalid("costs must be finite and nonnegative"));
        }
        Ok(CostMatrix {
            rows,
            cols,
            data,
            provenance,
        })
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks_exact(self.cols).map(<[f64]>::to_vec).collect()
    }

    /// Applies `x ↦ x^p` entrywise.
    pub fn powered(&self, exponent: Exponent) -> CostMatrix {
        CostMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&d| exponent.apply(d)).collect(),
            provenance: self.provenance,
        }
    }

    /// Reads a headerless CSV of reals; row = μ atom, column = ν atom.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_path(path)
            .map_err(|e| Error::File(format!("{}: {e}", path.display())))?;
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let row: std::result::Result<Vec<f64>, _> =
                record.iter().map(|s| s.trim().parse::<f64>()).collect();
            rows.push(row.map_err(|e| Error::File(format!("bad number in cost CSV: {e}")))?);
        }
        Self::from_rows(rows)
    }
}

/// Read access to an `n × m` cost table, dense or computed on demand.
///
/// The flow engine is generic over this trait so very large instances can be
/// solved without materializing the full matrix.
pub trait Costs: Sync {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    fn cost(&self, i: usize, j: usize) -> f64;

    fn max_cost(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.n_rows() {
            for j in 0..self.n_cols() {
                best = best.max(self.cost(i, j));
            }
        }
        best
    }
}

impl Costs for CostMatrix {
    fn n_rows(&self) -> usize {
        self.rows
    }

    fn n_cols(&self) -> usize {
        self.cols
    }

    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn max_cost(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

impl<C: Costs + ?Sized> Costs for &C {
    fn n_rows(&self) -> usize {
        (**self).n_rows()
    }
    fn n_cols(&self) -> usize {
        (**self).n_cols()
    }
    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        (**self).cost(i, j)
    }
    fn max_cost(&self) -> f64 {
        (**self).max_cost()
    }
}

/// Euclidean costs `|x_i - y_j|^p` computed on demand.
#[derive(Debug, Clone, Copy)]
pub struct PointCosts<'a> {
    mu: &'a DiscreteMeasure,
    nu: &'a DiscreteMeasure,
    exponent: Exponent,
}

impl<'a> PointCosts<'a> {
    pub fn new(mu: &'a DiscreteMeasure, nu: &'a DiscreteMeasure, exponent: Exponent) -> Result<Self> {
        if mu.dim() != nu.dim() {
            return Err(Error::invalid(format!(
                "dimension mismatch: {} vs {}",
                mu.dim(),
                nu.dim()
            )));
        }
        Ok(PointCosts { mu, nu, exponent })
    }

    pub fn materialize(&self) -> CostMatrix {
        let (n, m) = (self.mu.len(), self.nu.len());
        let mut data = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                data.push(self.cost(i, j));
            }
        }
        CostMatrix {
            rows: n,
            cols: m,
            data,
            provenance: Provenance::Metric,
        }
    }
}

impl Costs for PointCosts<'_> {
    fn n_rows(&self) -> usize {
        self.mu.len()
    }

    fn n_cols(&self) -> usize {
        self.nu.len()
    }

    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        let a = self.mu.point(i);
        let b = self.nu.point(j);
        let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        match self.exponent {
            Exponent::Finite(p) if p == 2.0 => sq,
            Exponent::Finite(p) if p == 1.0 => sq.sqrt(),
            Exponent::Finite(p) => sq.sqrt().powf(p),
            Exponent::Infinity => sq.sqrt(),
        }
    }
}

/// Pairwise costs between the atoms of `mu` and `nu` under `metric`.
///
/// For `p = ∞` the entries are the raw distances; the bottleneck solver
/// thresholds them directly.
pub fn cost_matrix(mu: &DiscreteMeasure, nu: &DiscreteMeasure, metric: &GroundMetric) -> Result<CostMatrix> {
    match &metric.kind {
        MetricKind::Euclidean => Ok(PointCosts::new(mu, nu, metric.exponent)?.materialize()),
        MetricKind::CustomMatrix(d) => {
            if d.rows != mu.len() || d.cols != nu.len() {
                return Err(Error::invalid(format!(
                    "custom matrix is {}x{}, measures have {} and {} atoms",
                    d.rows,
                    d.cols,
                    mu.len(),
                    nu.len()
                )));
            }
            Ok(d.powered(metric.exponent))
        }
    }
}

/// Costs for a measure pair: dense when small, computed on demand otherwise.
#[derive(Debug, Clone)]
pub enum GroundCosts<'a> {
    Dense(CostMatrix),
    Points(PointCosts<'a>),
}

const DENSE_LIMIT: usize = 4_000_000;

impl<'a> GroundCosts<'a> {
    pub fn new(mu: &'a DiscreteMeasure, nu: &'a DiscreteMeasure, metric: &GroundMetric) -> Result<Self> {
        match &metric.kind {
            MetricKind::Euclidean => {
                let pc = PointCosts::new(mu, nu, metric.exponent)?;
                if mu.len() * nu.len() <= DENSE_LIMIT {
                    Ok(GroundCosts::Dense(pc.materialize()))
                } else {
                    Ok(GroundCosts::Points(pc))
                }
            }
            MetricKind::CustomMatrix(_) => Ok(GroundCosts::Dense(cost_matrix(mu, nu, metric)?)),
        }
    }

    pub fn euclidean(mu: &'a DiscreteMeasure, nu: &'a DiscreteMeasure, exponent: Exponent) -> Result<Self> {
        Self::new(mu, nu, &GroundMetric::euclidean(exponent))
    }
}

impl Costs for GroundCosts<'_> {
    fn n_rows(&self) -> usize {
        match self {
            GroundCosts::Dense(c) => c.n_rows(),
            GroundCosts::Points(c) => c.n_rows(),
        }
    }

    fn n_cols(&self) -> usize {
        match self {
            GroundCosts::Dense(c) => c.n_cols(),
            GroundCosts::Points(c) => c.n_cols(),
        }
    }

    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        match self {
            GroundCosts::Dense(c) => c.cost(i, j),
            GroundCosts::Points(c) => c.cost(i, j),
        }
    }

    fn max_cost(&self) -> f64 {
        match self {
            GroundCosts::Dense(c) => c.max_cost(),
            GroundCosts::Points(c) => c.max_cost(),
        }
    }
}

/// Total-variation norm of `μ - ν` (no factor 1/2), so the result lies in `[0, 2]`.
pub fn tv_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let key = |p: &[f64]| -> Vec<u64> { p.iter().map(|x| x.to_bits()).collect() };
    let mut diff: HashMap<Vec<u64>, f64> = HashMap::new();
    for (p, w) in mu.points().zip(mu.weights()) {
        *diff.entry(key(p)).or_insert(0.0) += w;
    }
    for (p, w) in nu.points().zip(nu.weights()) {
        *diff.entry(key(p)).or_insert(0.0) -= w;
    }
    let mut vals: Vec<f64> = diff.into_values().map(f64::abs).collect();
    // order-independent summation keeps the result symmetric in (μ, ν)
    vals.sort_by(f64::total_cmp);
    vals.iter().sum()
}

/// Huber contamination `(1 - ε)·base + ε·outlier`.
#[derive(Debug, Clone)]
pub struct ContaminationSpec {
    pub base: DiscreteMeasure,
    pub outlier: DiscreteMeasure,
    pub level: f64,
    /// Recorded for provenance; mixing itself is exact and uses no randomness.
    pub seed: u64,
}

pub fn huber_mix(spec: &ContaminationSpec) -> Result<DiscreteMeasure> {
    let eps = spec.level;
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::invalid(format!("contamination level {eps} not in [0, 1)")));
    }
    if spec.base.dim() != spec.outlier.dim() {
        return Err(Error::invalid("base and outlier measures have different dimensions"));
    }
    DiscreteMeasure::mixture(&[(1.0 - eps, &spec.base), (eps, &spec.outlier)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(points: &[f64], weights: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::from_1d(points, weights.to_vec()).unwrap()
    }

    #[test]
    fn duplicates_merge() {
        let m = m1(&[0.0, 1.0, 0.0], &[0.25, 0.5, 0.25]);
        assert_eq!(m.len(), 2);
        assert_eq!(m.weights(), &[0.5, 0.5]);
        let z = m1(&[0.0, -0.0], &[0.5, 0.5]);
        assert_eq!(z.len(), 1);
    }

    #[test]
    fn weight_validation() {
        assert!(DiscreteMeasure::from_1d(&[0.0], vec![0.0]).is_err());
        assert!(DiscreteMeasure::from_1d(&[0.0, 1.0], vec![0.5, 0.6]).is_err());
        let m = DiscreteMeasure::from_1d(&[0.0, 1.0], vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((m.total_mass() - 1.0).abs() <= MASS_TOLERANCE);
        assert!(DiscreteMeasure::new(vec![], vec![]).is_err());
        assert!(DiscreteMeasure::new(vec![vec![0.0], vec![0.0, 1.0]], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn huber_mix_examples() {
        let base = m1(&[0.0], &[1.0]);
        let out = m1(&[3.0], &[1.0]);
        let same = huber_mix(&ContaminationSpec {
            base: base.clone(),
            outlier: out.clone(),
            level: 0.0,
            seed: 0,
        })
        .unwrap();
        assert_eq!(same, base);

        let mixed = huber_mix(&ContaminationSpec {
            base: base.clone(),
            outlier: out.clone(),
            level: 0.2,
            seed: 0,
        })
        .unwrap();
        assert_eq!(mixed.point(1), &[3.0]);
        assert!((mixed.weights()[0] - 0.8).abs() < 1e-15);
        assert!((mixed.weights()[1] - 0.2).abs() < 1e-15);

        let mixed = huber_mix(&ContaminationSpec {
            base: m1(&[0.0, 1.0], &[0.5, 0.5]),
            outlier: base.clone(),
            level: 0.5,
            seed: 0,
        })
        .unwrap();
        assert_eq!(mixed.weights(), &[0.75, 0.25]);

        for bad in [1.0, -0.1, 1.5] {
            let r = huber_mix(&ContaminationSpec {
                base: base.clone(),
                outlier: out.clone(),
                level: bad,
                seed: 0,
            });
            assert!(matches!(r, Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn tv_examples() {
        let a = m1(&[0.0, 1.0], &[0.5, 0.5]);
        assert_eq!(tv_distance(&a, &a), 0.0);
        let b = m1(&[5.0, 6.0], &[0.5, 0.5]);
        assert_eq!(tv_distance(&a, &b), 2.0);
        let c = m1(&[0.0, 3.0], &[0.5, 0.5]);
        assert_eq!(tv_distance(&a, &c), 1.0);
    }

    #[test]
    fn cost_matrix_examples() {
        let single = m1(&[2.5], &[1.0]);
        let c = cost_matrix(&single, &single, &GroundMetric::euclidean(Exponent::Finite(1.0))).unwrap();
        assert_eq!(c.to_rows(), vec![vec![0.0]]);

        let a = m1(&[0.0, 1.0], &[0.5, 0.5]);
        let b = m1(&[2.0, 3.0], &[0.5, 0.5]);
        let c1 = cost_matrix(&a, &b, &GroundMetric::euclidean(Exponent::Finite(1.0))).unwrap();
        assert_eq!(c1.to_rows(), vec![vec![2.0, 3.0], vec![1.0, 2.0]]);
        let c2 = cost_matrix(&a, &b, &GroundMetric::euclidean(Exponent::Finite(2.0))).unwrap();
        assert_eq!(c2.to_rows(), vec![vec![4.0, 9.0], vec![1.0, 4.0]]);
        let cinf = cost_matrix(&a, &b, &GroundMetric::euclidean(Exponent::Infinity)).unwrap();
        assert_eq!(cinf, c1);

        let d2 = DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            cost_matrix(&a, &d2, &GroundMetric::euclidean(Exponent::Finite(1.0))),
            Err(Error::InvalidParameter(_))
        ));
        let custom = GroundMetric::custom(
            CostMatrix::from_rows(vec![vec![1.0, 2.0, 3.0]]).unwrap(),
            Exponent::Finite(2.0),
        )
        .unwrap();
        assert!(cost_matrix(&a, &b, &custom).is_err());
        let custom = GroundMetric::custom(
            CostMatrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 0.0]]).unwrap(),
            Exponent::Finite(2.0),
        )
        .unwrap();
        let c = cost_matrix(&a, &b, &custom).unwrap();
        assert_eq!(c.to_rows(), vec![vec![1.0, 4.0], vec![9.0, 0.0]]);
        assert_eq!(c.provenance(), Provenance::UserSupplied);
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!("inf".parse::<Exponent>().unwrap(), Exponent::Infinity);
        assert_eq!("2".parse::<Exponent>().unwrap(), Exponent::Finite(2.0));
        assert!("0.5".parse::<Exponent>().is_err());
        assert!("abc".parse::<Exponent>().is_err());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let m = DiscreteMeasure::new(
            vec![vec![0.1, -2.0], vec![3.5, 1e-7]],
            vec![0.3, 0.7],
        )
        .unwrap();
        let back = DiscreteMeasure::from_csv_reader(m.to_csv_string().as_bytes()).unwrap();
        assert_eq!(back, m);
        let back = DiscreteMeasure::from_json_str(&m.to_json_string()).unwrap();
        assert_eq!(back, m);
        assert!(DiscreteMeasure::from_csv_reader("x1,x2\n1,2\n".as_bytes()).is_err());
    }
}
