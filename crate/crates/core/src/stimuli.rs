//! Input distributions μ: sampling, densities and per-interval moments.

use std::fmt;
use std::io::Read;
use std::sync::Arc;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::quad::integrate;

/// Knots of the inverse-CDF sampling table.
pub const CDF_KNOTS: usize = 1 << 14;

const QUAD_TOL: f64 = 1e-15;

/// Log-concavity declared for a density on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogConcavity {
    /// `ln f` strictly concave; spot-checked at construction.
    Strict,
    /// `ln f` concave with `f(0+) + f(1-) > 0`. The endpoint limits are taken
    /// on the caller's word; concavity is still spot-checked.
    ConcavePositiveEnds,
    Unknown,
}

type Pdf = dyn Fn(f64) -> f64 + Send + Sync;

/// A probability density on `[0, 1]` with a tabulated CDF for sampling.
#[derive(Clone)]
pub struct Density1d {
    name: String,
    pdf: Arc<Pdf>,
    concavity: LogConcavity,
    // F at k / CDF_KNOTS, k = 0..=CDF_KNOTS
    cdf_table: Vec<f64>,
}

impl fmt::Debug for Density1d {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Density1d")
            .field("name", &self.name)
            .field("concavity", &self.concavity)
            .finish()
    }
}

impl Density1d {
    pub fn new<F>(name: impl Into<String>, pdf: F, concavity: LogConcavity) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let name = name.into();
        let h = 1.0 / CDF_KNOTS as f64;
        let mut cdf_table = Vec::with_capacity(CDF_KNOTS + 1);
        let mut acc = 0.0;
        cdf_table.push(0.0);
        for k in 0..CDF_KNOTS {
            let a = k as f64 * h;
            let fa = pdf(a);
            if !(fa >= 0.0) || !fa.is_finite() {
                return Err(invalid(format!("density {name} is negative or non-finite at {a}")));
            }
            acc += integrate(&pdf, a, a + h, QUAD_TOL * h);
            cdf_table.push(acc);
        }
        if !(pdf(1.0) >= 0.0) {
            return Err(invalid(format!("density {name} is negative at 1")));
        }
        if (acc - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("density {name} integrates to {acc}, not 1")));
        }
        let density = Self {
            name,
            pdf: Arc::new(pdf),
            concavity,
            cdf_table,
        };
        if concavity != LogConcavity::Unknown {
            density.check_log_concave()?;
        }
        Ok(density)
    }

    /// `f(x) = 2x`.
    pub fn linear() -> Self {
        Self::new("linear", |x| 2.0 * x, LogConcavity::Strict).expect("2x is a density")
    }

    pub fn uniform() -> Self {
        Self::new("uniform", |_| 1.0, LogConcavity::ConcavePositiveEnds).expect("uniform density")
    }

    /// Normal(mean, sd) restricted to `[0, 1]` and renormalised.
    pub fn truncated_gaussian(mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0) || !mean.is_finite() {
            return Err(invalid("truncated gaussian needs finite mean and sd > 0"));
        }
        let kernel = move |x: f64| (-0.5 * ((x - mean) / sd).powi(2)).exp();
        let z = integrate(kernel, 0.0, 1.0, 1e-16);
        Self::new(
            format!("truncated-gaussian({mean},{sd})"),
            move |x| kernel(x) / z,
            LogConcavity::Strict,
        )
    }

    fn check_log_concave(&self) -> Result<()> {
        let steps = 1002.0;
        let h = 0.5 / steps;
        for k in 0..1000 {
            let x = (k as f64 + 1.0) / steps;
            let d2 = self.pdf(x - h).ln() - 2.0 * self.pdf(x).ln() + self.pdf(x + h).ln();
            if d2 > 1e-8 || d2.is_nan() {
                return Err(invalid(format!(
                    "density {} declared log-concave but ln f has second difference {d2:e} at {x}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn concavity(&self) -> LogConcavity {
        self.concavity
    }

    /// Hypothesis H_μ as declared (and spot-checked) at construction.
    pub fn satisfies_h_mu(&self) -> bool {
        self.concavity != LogConcavity::Unknown
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if (0.0..=1.0).contains(&x) {
            (self.pdf)(x)
        } else {
            0.0
        }
    }

    /// Distribution function by table lookup plus one quadrature segment.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let h = 1.0 / CDF_KNOTS as f64;
        let k = ((x / h) as usize).min(CDF_KNOTS - 1);
        self.cdf_table[k] + integrate(&*self.pdf, k as f64 * h, x, QUAD_TOL * h)
    }

    /// Inverse CDF by monotone linear interpolation of the table.
    pub fn quantile(&self, u: f64) -> f64 {
        let total = self.cdf_table[CDF_KNOTS];
        let target = u * total;
        let k = self.cdf_table.partition_point(|&v| v <= target).clamp(1, CDF_KNOTS) - 1;
        let (lo, hi) = (self.cdf_table[k], self.cdf_table[k + 1]);
        let frac = if hi > lo { (target - lo) / (hi - lo) } else { 0.0 };
        ((k as f64 + frac.clamp(0.0, 1.0)) / CDF_KNOTS as f64).min(1.0)
    }

    /// `(∫ f, ∫ x f)` over `[a, b]`, clipped to `[0, 1]`.
    pub fn interval_moments(&self, a: f64, b: f64) -> (f64, f64) {
        let (a, b) = (a.max(0.0), b.min(1.0));
        if b <= a {
            return (0.0, 0.0);
        }
        let f = &*self.pdf;
        let tol = QUAD_TOL * (b - a);
        (integrate(f, a, b, tol), integrate(|x| x * f(x), a, b, tol))
    }

    /// `∫ (x - c)² f` over `[a, b]`, clipped to `[0, 1]`.
    pub fn interval_spread(&self, a: f64, b: f64, c: f64) -> f64 {
        let (a, b) = (a.max(0.0), b.min(1.0));
        if b <= a {
            return 0.0;
        }
        let f = &*self.pdf;
        integrate(|x| (x - c) * (x - c) * f(x), a, b, QUAD_TOL * (b - a))
    }

    /// `∫ g f` over `[a, b]`, clipped to `[0, 1]`.
    pub fn integrate_against<G: Fn(f64) -> f64>(&self, g: G, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(0.0), b.min(1.0));
        if b <= a {
            return 0.0;
        }
        let f = &*self.pdf;
        integrate(|x| g(x) * f(x), a, b, QUAD_TOL * (b - a))
    }
}

/// One coordinate of a product law.
#[derive(Debug, Clone)]
pub enum Marginal {
    Uniform { lo: f64, hi: f64 },
    Density(Arc<Density1d>),
}

impl Marginal {
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Marginal::Uniform { lo, hi } => (*lo, *hi),
            Marginal::Density(_) => (0.0, 1.0),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match self {
            Marginal::Uniform { lo, hi } => lo + (hi - lo) * u,
            Marginal::Density(d) => d.quantile(u),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Marginal::Uniform { lo, hi } => 0.5 * (lo + hi),
            Marginal::Density(d) => d.interval_moments(0.0, 1.0).1,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Marginal::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Marginal::Density(d) => d.cdf(x),
        }
    }

    /// `(mass, first moment)` of `[a, b]`.
    pub fn interval_moments(&self, a: f64, b: f64) -> (f64, f64) {
        match self {
            Marginal::Uniform { lo, hi } => {
                let (a, b) = (a.max(*lo), b.min(*hi));
                if b <= a {
                    return (0.0, 0.0);
                }
                let len = hi - lo;
                ((b - a) / len, (b - a) * 0.5 * (a + b) / len)
            }
            Marginal::Density(d) => d.interval_moments(a, b),
        }
    }

    /// `∫_a^b (x - c)² dμ`.
    pub fn interval_spread(&self, a: f64, b: f64, c: f64) -> f64 {
        match self {
            Marginal::Uniform { lo, hi } => {
                let (a, b) = (a.max(*lo), b.min(*hi));
                if b <= a {
                    return 0.0;
                }
                ((b - c).powi(3) - (a - c).powi(3)) / (3.0 * (hi - lo))
            }
            Marginal::Density(d) => d.interval_spread(a, b, c),
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Marginal::Uniform { .. })
    }
}

/// A finite data set with uniform weights `1/N`.
#[derive(Debug, Clone)]
pub struct DiscreteSet {
    points: Vec<f64>,
    dim: usize,
    bounds: Vec<(f64, f64)>,
}

impl DiscreteSet {
    pub fn new(points: Vec<f64>, dim: usize, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(invalid("discrete set needs N >= 1 points of a fixed dimension"));
        }
        if bounds.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: bounds.len(),
            });
        }
        check_box(&bounds)?;
        for (l, p) in points.chunks(dim).enumerate() {
            for (k, (&x, &(lo, hi))) in p.iter().zip(&bounds).enumerate() {
                if !(lo..=hi).contains(&x) {
                    return Err(invalid(format!("point {l} coordinate {k} = {x} outside [{lo}, {hi}]")));
                }
            }
        }
        Ok(Self { points, dim, bounds })
    }

    /// Points with their bounding box as the domain.
    pub fn from_points(points: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(invalid("discrete set needs N >= 1 points of a fixed dimension"));
        }
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); dim];
        for p in points.chunks(dim) {
            for (b, &x) in bounds.iter_mut().zip(p) {
                b.0 = b.0.min(x);
                b.1 = b.1.max(x);
            }
        }
        // a flat axis still needs a proper box
        for b in &mut bounds {
            if b.1 <= b.0 {
                b.0 -= 0.5;
                b.1 += 0.5;
            }
        }
        Self::new(points, dim, bounds)
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, l: usize) -> &[f64] {
        &self.points[l * self.dim..(l + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks(self.dim)
    }
}

fn check_box(bounds: &[(f64, f64)]) -> Result<()> {
    for &(lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid(format!("box side [{lo}, {hi}] must be finite with lo < hi")));
        }
    }
    Ok(())
}

/// The input law μ on a bounded box Ω.
#[derive(Debug, Clone)]
pub enum StimuliDistribution {
    /// Independent coordinates; covers uniform boxes and 1-D densities.
    Product(Vec<Marginal>),
    Discrete(DiscreteSet),
}

impl StimuliDistribution {
    pub fn uniform_box(bounds: &[(f64, f64)]) -> Result<Self> {
        if bounds.is_empty() {
            return Err(invalid("uniform box needs d >= 1"));
        }
        check_box(bounds)?;
        Ok(Self::Product(
            bounds.iter().map(|&(lo, hi)| Marginal::Uniform { lo, hi }).collect(),
        ))
    }

    pub fn unit_cube(d: usize) -> Self {
        Self::uniform_box(&vec![(0.0, 1.0); d]).expect("unit cube")
    }

    pub fn density(density: Density1d) -> Self {
        Self::Product(vec![Marginal::Density(Arc::new(density))])
    }

    pub fn product(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(invalid("product law needs at least one factor"));
        }
        for m in &marginals {
            if let Marginal::Uniform { lo, hi } = m {
                check_box(&[(*lo, *hi)])?;
            }
        }
        Ok(Self::Product(marginals))
    }

    pub fn discrete(set: DiscreteSet) -> Self {
        Self::Discrete(set)
    }

    /// Reads one point per row; a header row is required.
    pub fn discrete_from_csv<R: Read>(reader: R, bounds: Option<Vec<(f64, f64)>>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let dim = headers.len();
        let mut points = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != dim {
                return Err(Error::Ingest {
                    row: row + 1,
                    column: String::new(),
                    message: format!("expected {dim} fields, found {}", record.len()),
                });
            }
            for (field, name) in record.iter().zip(headers.iter()) {
                let v: f64 = field.trim().parse().map_err(|_| Error::Ingest {
                    row: row + 1,
                    column: name.to_string(),
                    message: format!("not a number: {field:?}"),
                })?;
                points.push(v);
            }
        }
        if points.is_empty() {
            return Err(Error::Empty("point file has no data rows".into()));
        }
        let set = match bounds {
            Some(b) => DiscreteSet::new(points, dim, b)?,
            None => DiscreteSet::from_points(points, dim)?,
        };
        Ok(Self::Discrete(set))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Product(m) => m.len(),
            Self::Discrete(s) => s.dim,
        }
    }

    /// The box Ω.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match self {
            Self::Product(m) => m.iter().map(Marginal::bounds).collect(),
            Self::Discrete(s) => s.bounds.clone(),
        }
    }

    pub fn is_uniform_box(&self) -> bool {
        matches!(self, Self::Product(m) if m.iter().all(Marginal::is_uniform))
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, Self::Product(_))
    }

    pub fn marginals(&self) -> Option<&[Marginal]> {
        match self {
            Self::Product(m) => Some(m),
            Self::Discrete(_) => None,
        }
    }

    /// The single marginal of a continuous 1-D law.
    pub fn as_1d(&self) -> Option<&Marginal> {
        match self {
            Self::Product(m) if m.len() == 1 => Some(&m[0]),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Product(m) => {
                let parts: Vec<String> = m
                    .iter()
                    .map(|f| match f {
                        Marginal::Uniform { lo, hi } => format!("U[{lo},{hi}]"),
                        Marginal::Density(d) => d.name().to_string(),
                    })
                    .collect();
                parts.join("x")
            }
            Self::Discrete(s) => format!("discrete(N={}, d={})", s.len(), s.dim),
        }
    }

    /// Draws one point into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Self::Product(m) => {
                for (o, f) in out.iter_mut().zip(m) {
                    *o = f.sample(rng);
                }
            }
            Self::Discrete(s) => {
                let l = rng.random_range(0..s.len());
                out.copy_from_slice(s.point(l));
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            Self::Product(m) => m.iter().map(Marginal::mean).collect(),
            Self::Discrete(s) => {
                let mut acc = vec![0.0; s.dim];
                for p in s.points() {
                    for (a, x) in acc.iter_mut().zip(p) {
                        *a += x;
                    }
                }
                acc.iter().map(|a| a / s.len() as f64).collect()
            }
        }
    }

    /// Density at `x` for continuous laws.
    pub fn density_at(&self, x: &[f64]) -> Option<f64> {
        match self {
            Self::Product(m) => Some(
                m.iter()
                    .zip(x)
                    .map(|(f, &v)| match f {
                        Marginal::Uniform { lo, hi } => {
                            if (*lo..=*hi).contains(&v) {
                                1.0 / (hi - lo)
                            } else {
                                0.0
                            }
                        }
                        Marginal::Density(d) => d.pdf(v),
                    })
                    .product(),
            ),
            Self::Discrete(_) => None,
        }
    }
}
