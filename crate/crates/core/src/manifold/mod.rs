//! Chart data: coordinates, metric, para-structure, vector field and the
//! constants of the soliton equation and of the special curvature tensors.
//!
//! Every field component is an [`Expr`] over the coordinate names. Metric
//! values and their first and second derivatives come from evaluating the
//! component expressions over [`Jet2`] seeds. Metrics generated from a
//! potential `φ` are differentiated symbolically first
//! (`g_{x_i y_j} = ∂²φ / ∂x_i ∂y_j`) and then evaluated over jets, so the
//! chain stays exact up to rounding.

mod sampling;
mod spec_file;

use std::sync::Arc;

use nalgebra::SymmetricEigen;
use thiserror::Error;

use crate::exprlang::{is_reserved, Bindings, EvalError, Expr};
use crate::jets::Jet2;
use crate::tensor::{Matrix, Tensor3, Tensor4, Valence};

pub use sampling::{sample_points, Point, SampleError, SamplePlan, SplitMix64};
pub use spec_file::{canonicalize, load_spec, load_spec_for, LoadedSpec, SpecError};

/// Relative threshold for `|det g|` against `(max |g_ij|)^n`.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonParams {
    pub lambda: f64,
    pub p: f64,
}

impl Default for SolitonParams {
    fn default() -> Self {
        SolitonParams { lambda: 0.0, p: 0.0 }
    }
}

/// Constants of the quasi-conformal (`alpha`, `beta`) and pseudo-projective
/// (`a`, `b`) tensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorParams {
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
}

impl TensorParams {
    /// `alpha = 1, beta = -1/(n-2)` (the conformal tensor), `a = b = 1`.
    pub fn defaults(n: usize) -> Self {
        TensorParams {
            alpha: 1.0,
            beta: if n > 2 { -1.0 / (n as f64 - 2.0) } else { 0.0 },
            a: 1.0,
            b: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricKind {
    Flat,
    Potential(Expr),
    Explicit,
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Flat => "flat",
            MetricKind::Potential(_) => "potential",
            MetricKind::Explicit => "explicit",
        }
    }
}

/// Which downstream computations a bundle must support.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Requirements {
    pub para_kahler: bool,
    pub quasi_conformal: bool,
    pub pseudo_projective: bool,
    pub w2: bool,
}

impl Requirements {
    pub const ALL: Requirements = Requirements {
        para_kahler: true,
        quasi_conformal: true,
        pseudo_projective: true,
        w2: true,
    };
    pub const NONE: Requirements = Requirements {
        para_kahler: false,
        quasi_conformal: false,
        pseudo_projective: false,
        w2: false,
    };
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BundleError {
    #[error("dimension must be even, got {0}")]
    OddDimension(usize),
    #[error("dimension {0} is too small: para-Kähler structures need n = 2m with m >= 2")]
    DimensionTooSmall(usize),
    #[error("dimension must be positive")]
    EmptyChart,
    #[error("expected {expected} coordinates, got {found}")]
    CoordinateCount { expected: usize, found: usize },
    #[error("coordinate `{0}` is listed twice")]
    DuplicateCoordinate(String),
    #[error("`{0}` is reserved and cannot name a coordinate")]
    ReservedCoordinate(String),
    #[error("invalid coordinate name `{0}`")]
    InvalidCoordinate(String),
    #[error("{field} references unknown coordinate `{name}`")]
    UnknownVariable { field: String, name: String },
    #[error("{field}: index out of range for dimension {dim}")]
    IndexOutOfRange { field: String, dim: usize },
    #[error("{field} is given twice")]
    DuplicateEntry { field: String },
    #[error("vector field has {found} components, expected {expected}")]
    VectorLength { expected: usize, found: usize },
    #[error("{name} must be nonzero for the {tensor} tensor")]
    ZeroParameter {
        name: &'static str,
        tensor: &'static str,
    },
    #[error("the W2 tensor needs n > 2")]
    W2Dimension,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("evaluating {field}: {source}")]
    Eval { field: String, source: EvalError },
    #[error("degenerate metric: |det g| = {det:e} below {threshold:e}")]
    Degenerate { det: f64, threshold: f64 },
    #[error("degenerate metric: eigenvalue {eigenvalue:e} below {threshold:e}")]
    NullEigenvalue { eigenvalue: f64, threshold: f64 },
    #[error("point has {found} coordinates, chart has {expected}")]
    PointDimension { expected: usize, found: usize },
    #[error("no vector field defined")]
    MissingVectorField,
}

/// `g_ij`, `∂_k g_ij` at `dg[[k, i, j]]` and `∂_k ∂_l g_ij` at
/// `ddg[[k, l, i, j]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricJetValue {
    pub g: Matrix,
    pub dg: Tensor3,
    pub ddg: Tensor4,
}

impl MetricJetValue {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// The flat jet of a constant metric.
    pub fn constant(g: Matrix) -> Self {
        let n = g.nrows();
        MetricJetValue {
            g,
            dg: Tensor3::zeros(n, Valence::new(0, 3)),
            ddg: Tensor4::zeros(n, Valence::new(0, 4)),
        }
    }
}

/// `F^j_k` at `f[(j, k)]` and `∂_i F^j_k` at `df[[i, j, k]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureJet {
    pub f: Matrix,
    pub df: Tensor3,
}

/// `V^k` at `v[k]` and `∂_i V^k` at `dv[(i, k)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorJet {
    pub v: Vec<f64>,
    pub dv: Matrix,
}

impl VectorJet {
    pub fn max_abs(&self) -> f64 {
        self.v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct FieldBundle {
    coordinates: Vec<String>,
    metric_kind: MetricKind,
    // n*n row-major; (i, j) and (j, i) share one tree
    metric: Vec<Arc<Expr>>,
    // n*n row-major F^i_j
    structure: Vec<Expr>,
    vector_field: Option<Vec<Expr>>,
    pub soliton: SolitonParams,
    pub tensor_params: TensorParams,
}

/// Default names `x1..xm, y1..ym`.
pub fn default_coordinates(m: usize) -> Vec<String> {
    (1..=m)
        .map(|i| format!("x{i}"))
        .chain((1..=m).map(|i| format!("y{i}")))
        .collect()
}

/// `+I` on the first half of the coordinates, `-I` on the second.
pub fn standard_structure(n: usize) -> Vec<((usize, usize), Expr)> {
    (0..n)
        .map(|i| ((i, i), Expr::number(if i < n / 2 { 1.0 } else { -1.0 })))
        .collect()
}

fn entry_name(prefix: &str, i: usize, j: usize) -> String {
    format!("{prefix}[{i}][{j}]")
}

fn check_coordinates(coordinates: &[String]) -> Result<(), BundleError> {
    let n = coordinates.len();
    if n == 0 {
        return Err(BundleError::EmptyChart);
    }
    if !n.is_multiple_of(2) {
        return Err(BundleError::OddDimension(n));
    }
    for (i, name) in coordinates.iter().enumerate() {
        let mut chars = name.chars();
        let valid = chars.next().is_some_and(|c| c.is_ascii_alphabetic())
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !valid {
            return Err(BundleError::InvalidCoordinate(name.clone()));
        }
        if is_reserved(name) {
            return Err(BundleError::ReservedCoordinate(name.clone()));
        }
        if coordinates[..i].contains(name) {
            return Err(BundleError::DuplicateCoordinate(name.clone()));
        }
    }
    Ok(())
}

impl FieldBundle {
    /// Assembles a bundle from sparse component lists; missing entries are
    /// zero. Metric entries may be given for either `(i, j)` or `(j, i)`.
    pub fn explicit(
        coordinates: Vec<String>,
        metric: Vec<((usize, usize), Expr)>,
        structure: Vec<((usize, usize), Expr)>,
    ) -> Result<Self, BundleError> {
        Self::assemble(coordinates, MetricKind::Explicit, metric, structure)
    }

    fn assemble(
        coordinates: Vec<String>,
        metric_kind: MetricKind,
        metric: Vec<((usize, usize), Expr)>,
        structure: Vec<((usize, usize), Expr)>,
    ) -> Result<Self, BundleError> {
        check_coordinates(&coordinates)?;
        let n = coordinates.len();
        let zero = Arc::new(Expr::number(0.0));
        let mut g: Vec<Option<Arc<Expr>>> = vec![None; n * n];
        for ((i, j), expr) in metric {
            let field = entry_name("g", i, j);
            if i >= n || j >= n {
                return Err(BundleError::IndexOutOfRange { field, dim: n });
            }
            let (i, j) = (i.min(j), i.max(j));
            if g[i * n + j].is_some() {
                return Err(BundleError::DuplicateEntry { field });
            }
            check_variables(&field, &expr, &coordinates)?;
            let shared = Arc::new(expr);
            g[i * n + j] = Some(shared.clone());
            g[j * n + i] = Some(shared);
        }
        let metric = g.into_iter().map(|e| e.unwrap_or_else(|| zero.clone())).collect();

        let mut f: Vec<Option<Expr>> = vec![None; n * n];
        for ((i, j), expr) in structure {
            let field = entry_name("F", i, j);
            if i >= n || j >= n {
                return Err(BundleError::IndexOutOfRange { field, dim: n });
            }
            if f[i * n + j].is_some() {
                return Err(BundleError::DuplicateEntry { field });
            }
            check_variables(&field, &expr, &coordinates)?;
            f[i * n + j] = Some(expr);
        }
        let structure = f
            .into_iter()
            .map(|e| e.unwrap_or_else(|| Expr::number(0.0)))
            .collect();

        Ok(FieldBundle {
            coordinates,
            metric_kind,
            metric,
            structure,
            vector_field: None,
            soliton: SolitonParams::default(),
            tensor_params: TensorParams::defaults(n),
        })
    }

    /// The flat model: `g(∂x_i, ∂y_j) = δ_ij`, `F = diag(I, -I)`.
    pub fn flat(m: usize) -> Result<Self, BundleError> {
        if m < 2 {
            return Err(BundleError::DimensionTooSmall(2 * m));
        }
        Self::flat_with_coordinates(default_coordinates(m))
    }

    pub fn flat_with_coordinates(coordinates: Vec<String>) -> Result<Self, BundleError> {
        let n = coordinates.len();
        let m = n / 2;
        let metric = (0..m).map(|i| ((i, m + i), Expr::number(1.0))).collect();
        Self::assemble(coordinates, MetricKind::Flat, metric, standard_structure(n))
    }

    /// Metric from a para-Kähler potential over `x1..xm, y1..ym`.
    pub fn from_potential(m: usize, phi: Expr) -> Result<Self, BundleError> {
        if m < 2 {
            return Err(BundleError::DimensionTooSmall(2 * m));
        }
        Self::from_potential_with_coordinates(default_coordinates(m), phi)
    }

    /// The first half of `coordinates` plays the role of `x`, the second
    /// half of `y`.
    pub fn from_potential_with_coordinates(coordinates: Vec<String>, phi: Expr) -> Result<Self, BundleError> {
        check_coordinates(&coordinates)?;
        check_variables("potential", &phi, &coordinates)?;
        let n = coordinates.len();
        let m = n / 2;
        let mut metric = Vec::with_capacity(m * m);
        for i in 0..m {
            let dx = phi.derivative(&coordinates[i]);
            for j in 0..m {
                metric.push(((i, m + j), dx.derivative(&coordinates[m + j])));
            }
        }
        Self::assemble(coordinates, MetricKind::Potential(phi), metric, standard_structure(n))
    }

    /// Replaces the para-structure.
    pub fn with_structure(mut self, structure: Vec<((usize, usize), Expr)>) -> Result<Self, BundleError> {
        let rebuilt = Self::assemble(self.coordinates.clone(), MetricKind::Explicit, vec![], structure)?;
        self.structure = rebuilt.structure;
        Ok(self)
    }

    pub fn with_vector_field(mut self, components: Vec<Expr>) -> Result<Self, BundleError> {
        let n = self.dim();
        if components.len() != n {
            return Err(BundleError::VectorLength {
                expected: n,
                found: components.len(),
            });
        }
        for (i, expr) in components.iter().enumerate() {
            check_variables(&format!("V[{i}]"), expr, &self.coordinates)?;
        }
        self.vector_field = Some(components);
        Ok(self)
    }

    pub fn with_soliton(mut self, soliton: SolitonParams) -> Self {
        self.soliton = soliton;
        self
    }

    pub fn with_tensor_params(mut self, params: TensorParams) -> Self {
        self.tensor_params = params;
        self
    }

    /// Rejects bundles that cannot support the requested computations.
    pub fn validate(&self, req: &Requirements) -> Result<(), BundleError> {
        let n = self.dim();
        if req.para_kahler && n < 4 {
            return Err(BundleError::DimensionTooSmall(n));
        }
        let t = &self.tensor_params;
        if req.quasi_conformal && t.alpha == 0.0 {
            return Err(BundleError::ZeroParameter {
                name: "alpha",
                tensor: "quasi-conformal",
            });
        }
        if req.pseudo_projective {
            for (name, v) in [("a", t.a), ("b", t.b)] {
                if v == 0.0 {
                    return Err(BundleError::ZeroParameter {
                        name,
                        tensor: "pseudo-projective",
                    });
                }
            }
        }
        if req.w2 && n <= 2 {
            return Err(BundleError::W2Dimension);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }

    /// Half the dimension.
    pub fn m(&self) -> usize {
        self.dim() / 2
    }

    pub fn coordinates(&self) -> &[String] {
        &self.coordinates
    }

    pub fn metric_kind(&self) -> &MetricKind {
        &self.metric_kind
    }

    pub fn metric_entry(&self, i: usize, j: usize) -> &Arc<Expr> {
        &self.metric[i * self.dim() + j]
    }

    pub fn structure_entry(&self, i: usize, j: usize) -> &Expr {
        &self.structure[i * self.dim() + j]
    }

    pub fn vector_field(&self) -> Option<&[Expr]> {
        self.vector_field.as_deref()
    }

    fn check_point(&self, x: &Point) -> Result<(), FieldError> {
        if x.dim() == self.dim() {
            Ok(())
        } else {
            Err(FieldError::PointDimension {
                expected: self.dim(),
                found: x.dim(),
            })
        }
    }

    fn eval_jet(&self, field: impl FnOnce() -> String, expr: &Expr, seeds: &[Jet2]) -> Result<Jet2, FieldError> {
        expr.evaluate(&Bindings::new(&self.coordinates, seeds))
            .map_err(|source| FieldError::Eval { field: field(), source })
    }

    /// Metric components as plain reals.
    pub fn metric_values(&self, x: &Point) -> Result<Matrix, FieldError> {
        self.check_point(x)?;
        let n = self.dim();
        let env = Bindings::new(&self.coordinates, &x.coords);
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = self
                    .metric_entry(i, j)
                    .evaluate(&env)
                    .map_err(|source| FieldError::Eval {
                        field: entry_name("g", i, j),
                        source,
                    })?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    pub fn metric_at(&self, x: &Point) -> Result<MetricJetValue, FieldError> {
        self.check_point(x)?;
        let n = self.dim();
        let seeds = Jet2::seed_point(&x.coords);
        let mut g = Matrix::zeros(n, n);
        let mut dg = Tensor3::zeros(n, Valence::new(0, 3));
        let mut ddg = Tensor4::zeros(n, Valence::new(0, 4));
        for i in 0..n {
            for j in i..n {
                let jet = self.eval_jet(|| entry_name("g", i, j), self.metric_entry(i, j), &seeds)?;
                for (a, b) in [(i, j), (j, i)] {
                    g[(a, b)] = jet.value();
                    for k in 0..n {
                        dg[[k, a, b]] = jet.gradient()[k];
                        for l in 0..n {
                            ddg[[k, l, a, b]] = jet.hessian(k, l);
                        }
                    }
                }
            }
        }
        Ok(MetricJetValue { g, dg, ddg })
    }

    pub fn inverse_metric_at(&self, x: &Point) -> Result<Matrix, FieldError> {
        inverse_metric(&self.metric_values(x)?)
    }

    pub fn signature_at(&self, x: &Point) -> Result<(usize, usize), FieldError> {
        signature(&self.metric_values(x)?)
    }

    pub fn structure_at(&self, x: &Point) -> Result<StructureJet, FieldError> {
        self.check_point(x)?;
        let n = self.dim();
        let seeds = Jet2::seed_point(&x.coords);
        let mut f = Matrix::zeros(n, n);
        let mut df = Tensor3::zeros(n, Valence::new(1, 2));
        for j in 0..n {
            for k in 0..n {
                let jet = self.eval_jet(|| entry_name("F", j, k), self.structure_entry(j, k), &seeds)?;
                f[(j, k)] = jet.value();
                for i in 0..n {
                    df[[i, j, k]] = jet.gradient()[i];
                }
            }
        }
        Ok(StructureJet { f, df })
    }

    /// `None` when the bundle has no vector field.
    pub fn vector_at(&self, x: &Point) -> Option<Result<VectorJet, FieldError>> {
        let components = self.vector_field.as_ref()?;
        Some(self.check_point(x).and_then(|_| {
            let n = self.dim();
            let seeds = Jet2::seed_point(&x.coords);
            let mut v = vec![0.0; n];
            let mut dv = Matrix::zeros(n, n);
            for (k, expr) in components.iter().enumerate() {
                let jet = self.eval_jet(|| format!("V[{k}]"), expr, &seeds)?;
                v[k] = jet.value();
                for i in 0..n {
                    dv[(i, k)] = jet.gradient()[i];
                }
            }
            Ok(VectorJet { v, dv })
        }))
    }
}

fn check_variables(field: &str, expr: &Expr, coordinates: &[String]) -> Result<(), BundleError> {
    match expr.free_variables().into_iter().find(|v| !coordinates.contains(v)) {
        Some(name) => Err(BundleError::UnknownVariable {
            field: field.to_string(),
            name,
        }),
        None => Ok(()),
    }
}

fn degeneracy_threshold(g: &Matrix) -> f64 {
    let scale = crate::tensor::max_abs(g);
    DEGENERACY_THRESHOLD * scale.powi(g.nrows() as i32)
}

/// Inverse of a nondegenerate symmetric matrix, symmetrized.
pub fn inverse_metric(g: &Matrix) -> Result<Matrix, FieldError> {
    let det = g.determinant();
    let threshold = degeneracy_threshold(g);
    if !(det.abs() >= threshold) || det == 0.0 {
        return Err(FieldError::Degenerate { det, threshold });
    }
    let inv = g
        .clone()
        .try_inverse()
        .ok_or(FieldError::Degenerate { det, threshold })?;
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Counts of positive and negative eigenvalues.
pub fn signature(g: &Matrix) -> Result<(usize, usize), FieldError> {
    let eig = SymmetricEigen::new(g.clone());
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let threshold = DEGENERACY_THRESHOLD * scale;
    let mut counts = (0, 0);
    for &mu in eig.eigenvalues.iter() {
        if !(mu.abs() > threshold) {
            return Err(FieldError::NullEigenvalue { eigenvalue: mu, threshold });
        }
        if mu > 0.0 {
            counts.0 += 1;
        } else {
            counts.1 += 1;
        }
    }
    Ok(counts)
}
