//! Function representations in the RKHS of a kernel.
//!
//! [`KernelExpansion`] is exact: `f = Σ c_i K(·, x_i)`, with inner products
//! computed from the Gram matrix of the centers. [`GridFunction`] stores
//! values on a fixed knot grid and evaluates between knots with a natural
//! cubic spline; this is the representation used for long runs, where an
//! expansion would grow by one center per node per step.

use std::io::{BufRead, BufReader, Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::{Domain, Kernel, KernelFamily};

/// Centers closer than this are merged by [`KernelExpansion::compact`].
pub const MERGE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelExpansion {
    kernel: Kernel,
    centers: Vec<f64>,
    coefficients: Vec<f64>,
}

impl KernelExpansion {
    pub fn new(kernel: Kernel, centers: Vec<f64>, coefficients: Vec<f64>) -> Result<Self> {
        if centers.len() != coefficients.len() {
            return Err(Error::LengthMismatch {
                expected: centers.len(),
                actual: coefficients.len(),
            });
        }
        let centers = centers
            .into_iter()
            .map(|c| kernel.check(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(KernelExpansion { kernel, centers, coefficients })
    }

    pub fn zero(kernel: Kernel) -> Self {
        KernelExpansion { kernel, centers: Vec::new(), coefficients: Vec::new() }
    }

    /// The kernel section `K_x = K(·, x)`.
    pub fn section(kernel: Kernel, x: f64) -> Result<Self> {
        Self::new(kernel, vec![x], vec![1.0])
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let x = self.kernel.check(x)?;
        Ok(self.evaluate_unchecked(x))
    }

    pub(crate) fn evaluate_unchecked(&self, x: f64) -> f64 {
        self.centers
            .iter()
            .zip(&self.coefficients)
            .map(|(&c, &a)| a * self.kernel.eval_unchecked(c, x))
            .sum()
    }

    pub fn inner_product(&self, other: &KernelExpansion) -> Result<f64> {
        if self.kernel != other.kernel {
            return Err(Error::KernelMismatch);
        }
        let mut acc = 0.0;
        for (&x, &a) in self.centers.iter().zip(&self.coefficients) {
            let mut row = 0.0;
            for (&y, &b) in other.centers.iter().zip(&other.coefficients) {
                row += b * self.kernel.eval_unchecked(x, y);
            }
            acc += a * row;
        }
        Ok(acc)
    }

    /// `sqrt(max(<f, f>, 0))`.
    pub fn rkhs_norm(&self) -> f64 {
        self.inner_product(self).map(|v| v.max(0.0).sqrt()).unwrap_or(0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        KernelExpansion {
            kernel: self.kernel,
            centers: self.centers.clone(),
            coefficients: self.coefficients.iter().map(|c| c * s).collect(),
        }
    }

    /// `Σ s_i f_i`, with coincident centers merged.
    pub fn linear_combination(kernel: Kernel, terms: &[(f64, &KernelExpansion)]) -> Result<Self> {
        let mut centers = Vec::new();
        let mut coefficients = Vec::new();
        for (s, f) in terms {
            if f.kernel != kernel {
                return Err(Error::KernelMismatch);
            }
            centers.extend_from_slice(&f.centers);
            coefficients.extend(f.coefficients.iter().map(|c| c * s));
        }
        Ok(KernelExpansion { kernel, centers, coefficients }.compact())
    }

    pub fn difference(&self, other: &KernelExpansion) -> Result<Self> {
        Self::linear_combination(self.kernel, &[(1.0, self), (-1.0, other)])
    }

    /// Merges centers within [`MERGE_TOLERANCE`] of each other and drops zero
    /// coefficients. The represented function is unchanged up to the merge
    /// tolerance.
    pub fn compact(&self) -> Self {
        let mut order: Vec<usize> = (0..self.centers.len()).collect();
        order.sort_by(|&a, &b| self.centers[a].total_cmp(&self.centers[b]));
        let mut centers: Vec<f64> = Vec::with_capacity(order.len());
        let mut coefficients: Vec<f64> = Vec::with_capacity(order.len());
        for i in order {
            let (c, a) = (self.centers[i], self.coefficients[i]);
            match centers.last() {
                Some(&last) if c - last <= MERGE_TOLERANCE => {
                    *coefficients.last_mut().unwrap() += a;
                }
                _ => {
                    centers.push(c);
                    coefficients.push(a);
                }
            }
        }
        let (centers, coefficients) = centers
            .into_iter()
            .zip(coefficients)
            .filter(|&(_, a)| a != 0.0)
            .unzip();
        KernelExpansion { kernel: self.kernel, centers, coefficients }
    }

    pub fn to_grid(&self, grid: &Arc<Grid>) -> Result<GridFunction> {
        expansion_to_grid(self, grid)
    }

    /// CSV with a `# kernel ...` header line, then `center,coefficient` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", kernel_header(&self.kernel))?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["center", "coefficient"])?;
        for (c, a) in self.centers.iter().zip(&self.coefficients) {
            csv.write_record([c.to_string(), a.to_string()])?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let kernel = parse_kernel_header(header.trim())?;
        let mut csv = csv::Reader::from_reader(reader);
        let mut centers = Vec::new();
        let mut coefficients = Vec::new();
        for rec in csv.records() {
            let rec = rec?;
            centers.push(parse_field(&rec, 0)?);
            coefficients.push(parse_field(&rec, 1)?);
        }
        Self::new(kernel, centers, coefficients)
    }
}

fn parse_field(rec: &csv::StringRecord, i: usize) -> Result<f64> {
    rec.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::InvalidArgument(format!("bad csv field {i} in {rec:?}")))
}

fn kernel_header(k: &Kernel) -> String {
    let d = k.domain();
    let family = match k.family() {
        KernelFamily::Gaussian { gamma } => format!("family=gaussian gamma={gamma}"),
        KernelFamily::Laplace { scale } => format!("family=laplace scale={scale}"),
        KernelFamily::Polynomial { degree, offset } => {
            format!("family=polynomial degree={degree} offset={offset}")
        }
    };
    format!("# kernel {family} lo={} hi={}", d.lo, d.hi)
}

fn parse_kernel_header(line: &str) -> Result<Kernel> {
    let bad = || Error::InvalidArgument(format!("bad kernel header: {line:?}"));
    let body = line.strip_prefix("# kernel ").ok_or_else(bad)?;
    let mut fields = std::collections::HashMap::new();
    for kv in body.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(bad)?;
        fields.insert(k, v);
    }
    let num = |key: &str| -> Result<f64> {
        fields.get(key).and_then(|v| v.parse().ok()).ok_or_else(bad)
    };
    let family = match fields.get("family").copied() {
        Some("gaussian") => KernelFamily::Gaussian { gamma: num("gamma")? },
        Some("laplace") => KernelFamily::Laplace { scale: num("scale")? },
        Some("polynomial") => KernelFamily::Polynomial {
            degree: fields.get("degree").and_then(|v| v.parse().ok()).ok_or_else(bad)?,
            offset: num("offset")?,
        },
        _ => return Err(bad()),
    };
    Kernel::new(family, Domain::new(num("lo")?, num("hi")?)?)
}

/// Strictly increasing knots with a pre-factored natural-spline system.
///
/// The tridiagonal matrix of the spline second-derivative equations depends
/// only on knot spacing, so the forward-elimination coefficients are computed
/// once here and shared by every function on the grid.
#[derive(Debug, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    spacing: Vec<f64>,
    sub: Vec<f64>,
    sup_elim: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Arc<Self>> {
        if points.len() < 4 {
            return Err(Error::InvalidGrid(format!("need at least 4 knots, got {}", points.len())));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("knots must be finite and strictly increasing".into()));
        }
        let spacing: Vec<f64> = points.windows(2).map(|w| w[1] - w[0]).collect();
        let interior = points.len() - 2;
        let mut sub = vec![0.0; interior];
        let mut sup_elim = vec![0.0; interior];
        let mut inv_pivot = vec![0.0; interior];
        for r in 0..interior {
            let (h0, h1) = (spacing[r], spacing[r + 1]);
            sub[r] = h0;
            let diag = 2.0 * (h0 + h1);
            let pivot = if r == 0 { diag } else { diag - h0 * sup_elim[r - 1] };
            inv_pivot[r] = 1.0 / pivot;
            sup_elim[r] = h1 / pivot;
        }
        Ok(Arc::new(Grid { points, spacing, sub, sup_elim, inv_pivot }))
    }

    /// `count` equispaced knots `lo + (hi - lo) l / (count - 1)`.
    pub fn uniform(lo: f64, hi: f64, count: usize) -> Result<Arc<Self>> {
        if count < 2 {
            return Err(Error::InvalidGrid(format!("need at least 4 knots, got {count}")));
        }
        let n = (count - 1) as f64;
        Self::new((0..count).map(|l| lo + (hi - lo) * l as f64 / n).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Natural-spline second derivatives for `values`.
    fn second_derivatives(&self, values: &[f64]) -> Vec<f64> {
        let n = self.points.len();
        let h = &self.spacing;
        let mut m = vec![0.0; n];
        let interior = n - 2;
        // forward elimination into m[1..n-1]
        let mut prev = 0.0;
        for r in 0..interior {
            let i = r + 1;
            let rhs = 6.0
                * ((values[i + 1] - values[i]) / h[i] - (values[i] - values[i - 1]) / h[i - 1]);
            let d = (rhs - self.sub[r] * prev) * self.inv_pivot[r];
            m[i] = d;
            prev = d;
        }
        for r in (0..interior.saturating_sub(1)).rev() {
            let i = r + 1;
            m[i] -= self.sup_elim[r] * m[i + 1];
        }
        m
    }

    fn same_as(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other) || self.points == other.points
    }
}

/// Values on a knot grid with natural cubic spline interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), actual: values.len() });
        }
        let second = grid.second_derivatives(&values);
        Ok(GridFunction { grid, values, second })
    }

    pub fn zero(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        GridFunction { grid, values: vec![0.0; n], second: vec![0.0; n] }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().iter().map(|&z| f(z)).collect();
        Self::new(grid, values).expect("length matches grid")
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stored value when `x` is a knot, natural cubic spline otherwise.
    pub fn interpolate(&self, x: f64) -> Result<f64> {
        let z = self.grid.points();
        let (lo, hi) = (self.grid.first(), self.grid.last());
        if !(lo <= x && x <= hi) {
            return Err(Error::Extrapolation { x, lo, hi });
        }
        let j = z.partition_point(|&p| p <= x).saturating_sub(1).min(z.len() - 2);
        if z[j] == x {
            return Ok(self.values[j]);
        }
        if z[j + 1] == x {
            return Ok(self.values[j + 1]);
        }
        let h = z[j + 1] - z[j];
        let a = (z[j + 1] - x) / h;
        let b = (x - z[j]) / h;
        Ok(a * self.values[j]
            + b * self.values[j + 1]
            + ((a * a * a - a) * self.second[j] + (b * b * b - b) * self.second[j + 1]) * h * h
                / 6.0)
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.grid.same_as(&other.grid)
    }

    /// `α f + β g` on a shared grid.
    pub fn combine(&self, alpha: f64, other: &GridFunction, beta: f64) -> Result<GridFunction> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(f, g)| alpha * f + beta * g)
            .collect();
        GridFunction::new(self.grid.clone(), values)
    }

    /// CSV with columns `x,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["x", "value"])?;
        for (z, v) in self.grid.points().iter().zip(&self.values) {
            csv.write_record([z.to_string(), v.to_string()])?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut csv = csv::Reader::from_reader(r);
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for rec in csv.records() {
            let rec = rec?;
            xs.push(parse_field(&rec, 0)?);
            vs.push(parse_field(&rec, 1)?);
        }
        GridFunction::new(Grid::new(xs)?, vs)
    }
}

/// Samples an expansion on every knot.
pub fn expansion_to_grid(f: &KernelExpansion, grid: &Arc<Grid>) -> Result<GridFunction> {
    let values = grid
        .points()
        .iter()
        .map(|&z| f.evaluate(z))
        .collect::<Result<Vec<_>>>()?;
    GridFunction::new(grid.clone(), values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    pub sup: f64,
    pub rmse: f64,
}

pub fn grid_error_metrics(f: &GridFunction, g: &GridFunction) -> Result<ErrorMetrics> {
    if !f.same_grid(g) {
        return Err(Error::GridMismatch);
    }
    Ok(slice_error_metrics(&f.values, &g.values))
}

pub(crate) fn slice_error_metrics(f: &[f64], g: &[f64]) -> ErrorMetrics {
    let mut sup: f64 = 0.0;
    let mut sq = 0.0;
    for (a, b) in f.iter().zip(g) {
        let d = (a - b).abs();
        sup = sup.max(d);
        sq += d * d;
    }
    let rmse = if f.is_empty() { 0.0 } else { (sq / f.len() as f64).sqrt() };
    ErrorMetrics { sup, rmse }
}

/// Either representation of an element of the RKHS.
#[derive(Debug, Clone, PartialEq)]
pub enum RkhsFunction {
    Expansion(KernelExpansion),
    Grid(GridFunction),
}

impl RkhsFunction {
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        match self {
            RkhsFunction::Expansion(f) => f.evaluate(x),
            RkhsFunction::Grid(f) => f.interpolate(x),
        }
    }
}

impl From<KernelExpansion> for RkhsFunction {
    fn from(f: KernelExpansion) -> Self {
        RkhsFunction::Expansion(f)
    }
}

impl From<GridFunction> for RkhsFunction {
    fn from(f: GridFunction) -> Self {
        RkhsFunction::Grid(f)
    }
}
