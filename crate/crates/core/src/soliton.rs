//! Soliton residuals, the trace identity and the solenoidal verdicts.

use serde::{Deserialize, Serialize};

use crate::geometry::{divergence_at, lie_derivative_metric_at, CurvatureValue, PointGeometry};
use crate::manifold::{FieldBundle, FieldError, Point, SolitonParams, TensorParams, VectorJet};
use crate::report::Status;
use crate::special_tensors::{flatness_norm, flatness_threshold, TensorFamily};
use crate::tensor::{max_abs, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolitonKind {
    /// `£_V g + 2S + [2λ − r + (p + 2/n)] g`
    ConformalEinstein,
    /// `£_V g + 2S + (2λ − r) g`
    Einstein,
    /// `£_V g + 2S − [2λ − (p + 2/n)] g`
    ConformalRicci,
}

impl SolitonKind {
    pub fn name(self) -> &'static str {
        match self {
            SolitonKind::ConformalEinstein => "conformal_einstein",
            SolitonKind::Einstein => "einstein",
            SolitonKind::ConformalRicci => "conformal_ricci",
        }
    }

    /// Coefficient of `g` in the defining equation.
    pub fn metric_coefficient(self, params: &SolitonParams, scalar: f64, n: usize) -> f64 {
        let shift = params.p + 2.0 / n as f64;
        match self {
            SolitonKind::ConformalEinstein => 2.0 * params.lambda - scalar + shift,
            SolitonKind::Einstein => 2.0 * params.lambda - scalar,
            SolitonKind::ConformalRicci => -(2.0 * params.lambda - shift),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolitonResidual {
    pub matrix: Matrix,
    pub norm: f64,
    pub trace_identity_value: f64,
    /// Magnitude of the largest term, `max(1, |£_V g|, |2S|, |c g|)`.
    pub scale: f64,
}

impl SolitonResidual {
    pub fn relative(&self) -> f64 {
        self.norm / self.scale
    }
}

pub fn soliton_residual_at(kind: SolitonKind, pg: &PointGeometry, vector: &VectorJet, params: &SolitonParams) -> SolitonResidual {
    let n = pg.dim();
    let lie = lie_derivative_metric_at(&pg.metric, vector);
    let s = &pg.curvature.ricci;
    let coef = kind.metric_coefficient(params, pg.curvature.scalar, n);
    let matrix = &lie + s * 2.0 + pg.g() * coef;
    let scale = 1f64
        .max(max_abs(&lie))
        .max(2.0 * max_abs(s))
        .max(coef.abs() * max_abs(pg.g()));
    SolitonResidual {
        norm: max_abs(&matrix),
        matrix,
        trace_identity_value: trace_identity_at(pg, vector, params),
        scale,
    }
}

fn with_vector<T>(
    bundle: &FieldBundle,
    x: &Point,
    f: impl FnOnce(&PointGeometry, &VectorJet) -> T,
) -> Result<T, FieldError> {
    let vector = bundle.vector_at(x).ok_or(FieldError::MissingVectorField)??;
    let pg = PointGeometry::at(bundle, x)?;
    Ok(f(&pg, &vector))
}

pub fn conformal_einstein_residual(bundle: &FieldBundle, x: &Point) -> Result<SolitonResidual, FieldError> {
    with_vector(bundle, x, |pg, v| soliton_residual_at(SolitonKind::ConformalEinstein, pg, v, &bundle.soliton))
}

pub fn einstein_soliton_residual(bundle: &FieldBundle, x: &Point) -> Result<SolitonResidual, FieldError> {
    with_vector(bundle, x, |pg, v| soliton_residual_at(SolitonKind::Einstein, pg, v, &bundle.soliton))
}

pub fn conformal_ricci_residual(bundle: &FieldBundle, x: &Point) -> Result<SolitonResidual, FieldError> {
    with_vector(bundle, x, |pg, v| soliton_residual_at(SolitonKind::ConformalRicci, pg, v, &bundle.soliton))
}

/// `∂g/∂t = −2(S − (r/2) g)`.
pub fn einstein_flow_velocity(curv: &CurvatureValue, g: &Matrix) -> Matrix {
    (&curv.ricci - g * (0.5 * curv.scalar)) * -2.0
}

/// `div V + r + [λ − r/2 + ½(p + 2/n)] n`.
pub fn trace_identity_at(pg: &PointGeometry, vector: &VectorJet, params: &SolitonParams) -> f64 {
    let n = pg.dim() as f64;
    let r = pg.curvature.scalar;
    divergence_at(&pg.christoffel, vector) + r + (params.lambda - 0.5 * r + 0.5 * (params.p + 2.0 / n)) * n
}

pub fn trace_identity(bundle: &FieldBundle, x: &Point) -> Result<f64, FieldError> {
    with_vector(bundle, x, |pg, v| trace_identity_at(pg, v, &bundle.soliton))
}

/// `½ g^ij M_ij`.
pub fn half_trace(ginv: &Matrix, m: &Matrix) -> f64 {
    0.5 * ginv.component_mul(m).sum()
}

/// Scalar curvature of a solenoidal conformal Einstein soliton,
/// `2λn/(n−2) + n(p + 2/n)/(n−2)`; `None` for `n ≤ 2`.
pub fn solenoidal_scalar_curvature(lambda: f64, p: f64, n: usize) -> Option<f64> {
    if n <= 2 {
        return None;
    }
    let nf = n as f64;
    Some(2.0 * lambda * nf / (nf - 2.0) + nf * (p + 2.0 / nf) / (nf - 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolitonClass {
    Shrinking,
    Steady,
    Expanding,
}

impl SolitonClass {
    pub fn name(self) -> &'static str {
        match self {
            SolitonClass::Shrinking => "shrinking",
            SolitonClass::Steady => "steady",
            SolitonClass::Expanding => "expanding",
        }
    }
}

pub fn classify_soliton(lambda: f64) -> SolitonClass {
    if lambda < 0.0 {
        SolitonClass::Shrinking
    } else if lambda > 0.0 {
        SolitonClass::Expanding
    } else {
        SolitonClass::Steady
    }
}

/// One sample for the verdicts.
#[derive(Debug, Clone, Copy)]
pub struct SolitonSample<'a> {
    pub index: usize,
    pub geometry: &'a PointGeometry,
    pub vector: &'a VectorJet,
}

/// Both sides of a biconditional at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiconditionalRecord {
    pub index: usize,
    pub divergence: f64,
    pub solenoidal: bool,
    /// The scalar whose vanishing is the other side.
    pub condition_value: f64,
    pub condition: bool,
    pub hypothesis_residual: f64,
}

impl BiconditionalRecord {
    pub fn agrees(&self) -> bool {
        self.solenoidal == self.condition
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub status: Status,
    /// Largest relative hypothesis residual over the samples.
    pub max_residual: f64,
    pub worst_index: Option<usize>,
    pub records: Vec<BiconditionalRecord>,
    pub message: Option<String>,
}

impl Verdict {
    fn early(status: Status, max_residual: f64, worst_index: Option<usize>, message: String) -> Self {
        Verdict {
            status,
            max_residual,
            worst_index,
            records: vec![],
            message: Some(message),
        }
    }

    /// Both directions of the biconditional over all records.
    pub fn directions(&self) -> (bool, bool) {
        let forward = self.records.iter().all(|r| !r.solenoidal || r.condition);
        let backward = self.records.iter().all(|r| !r.condition || r.solenoidal);
        (forward, backward)
    }
}

fn solenoidal(pg: &PointGeometry, v: &VectorJet, tolerance: f64) -> (f64, bool) {
    let div = divergence_at(&pg.christoffel, v);
    (div, div.abs() <= tolerance * (1.0 + v.max_abs()))
}

fn worst(values: impl Iterator<Item = (usize, f64)>) -> (f64, Option<usize>) {
    values.fold((0.0, None), |(m, w), (i, v)| if w.is_none() || v > m { (v, Some(i)) } else { (m, w) })
}

fn conclude(records: Vec<BiconditionalRecord>, max_residual: f64, worst_index: Option<usize>, extra: Option<String>) -> Verdict {
    let failing: Vec<usize> = records.iter().filter(|r| !r.agrees()).map(|r| r.index).collect();
    let status = if failing.is_empty() { Status::Pass } else { Status::Fail };
    let message = if failing.is_empty() {
        extra
    } else {
        Some(format!("biconditional fails at points {failing:?}"))
    };
    Verdict {
        status,
        max_residual,
        worst_index,
        records,
        message,
    }
}

/// `div V = 0 ⟺ r = 2λn/(n−2) + n(p + 2/n)/(n−2)` on samples where the
/// conformal Einstein equation holds.
pub fn solenoidal_scalar_verdict(samples: &[SolitonSample], params: &SolitonParams, tolerance: f64) -> Verdict {
    let Some(first) = samples.first() else {
        return Verdict::early(Status::Error, 0.0, None, "no sample points".into());
    };
    let n = first.geometry.dim();
    let Some(formula) = solenoidal_scalar_curvature(params.lambda, params.p, n) else {
        return Verdict::early(Status::Error, 0.0, None, format!("needs n > 2, got {n}"));
    };
    let residuals: Vec<f64> = samples
        .iter()
        .map(|s| soliton_residual_at(SolitonKind::ConformalEinstein, s.geometry, s.vector, params).relative())
        .collect();
    let (max_residual, worst_index) = worst(samples.iter().map(|s| s.index).zip(residuals.iter().copied()));
    if max_residual > tolerance {
        return Verdict::early(
            Status::NotApplicable,
            max_residual,
            worst_index,
            "conformal Einstein equation does not hold at every sample".into(),
        );
    }
    let records = samples
        .iter()
        .zip(residuals)
        .map(|(s, hypothesis_residual)| {
            let (divergence, is_solenoidal) = solenoidal(s.geometry, s.vector, tolerance);
            let gap = s.geometry.curvature.scalar - formula;
            BiconditionalRecord {
                index: s.index,
                divergence,
                solenoidal: is_solenoidal,
                condition_value: gap,
                condition: gap.abs() <= tolerance * (1.0 + formula.abs()),
                hypothesis_residual,
            }
        })
        .collect();
    conclude(records, max_residual, worst_index, None)
}

/// If the selected tensor vanishes and the conformal Einstein equation
/// holds, then `S = 0`, `r = 0`, `R̃ = 0`, and
/// `div V = 0 ⟺ λ + ½(p + 2/n) = 0`.
pub fn flat_case_verdict(
    samples: &[SolitonSample],
    family: TensorFamily,
    tensor_params: &TensorParams,
    params: &SolitonParams,
    tolerance: f64,
) -> Verdict {
    if family.is_degenerate(tensor_params) {
        let value = family.degeneracy(tensor_params).unwrap_or(0.0);
        let what = match family {
            TensorFamily::QuasiConformal => "alpha + 2 beta",
            _ => "a + b",
        };
        return Verdict::early(Status::DegenerateParams, 0.0, None, format!("{what} = {value} vanishes"));
    }
    let Some(first) = samples.first() else {
        return Verdict::early(Status::Error, 0.0, None, "no sample points".into());
    };
    let n = first.geometry.dim();
    let mut gates = Vec::with_capacity(samples.len());
    for s in samples {
        let pg = s.geometry;
        let t = match family.evaluate(&pg.curvature, pg.g(), tensor_params) {
            Ok(t) => t,
            Err(e) => return Verdict::early(Status::Error, 0.0, Some(s.index), e.to_string()),
        };
        let flat = flatness_norm(&t) / flatness_threshold(tolerance, pg.g(), pg.curvature.scalar) * tolerance;
        let soliton = soliton_residual_at(SolitonKind::ConformalEinstein, pg, s.vector, params).relative();
        gates.push((flat, soliton));
    }
    let (max_residual, worst_index) =
        worst(samples.iter().map(|s| s.index).zip(gates.iter().map(|&(f, s)| f.max(s))));
    if gates.iter().any(|&(f, _)| f > tolerance) {
        return Verdict::early(
            Status::NotApplicable,
            max_residual,
            worst_index,
            format!("{} tensor is not flat at every sample", family.name()),
        );
    }
    if gates.iter().any(|&(_, s)| s > tolerance) {
        return Verdict::early(
            Status::NotApplicable,
            max_residual,
            worst_index,
            "conformal Einstein equation does not hold at every sample".into(),
        );
    }
    for s in samples {
        let c = &s.geometry.curvature;
        let scale = max_abs(s.geometry.g()).max(1.0);
        let ricci = max_abs(&c.ricci).max(c.scalar.abs()) / scale;
        let riemann = c.riemann_low.max_abs() / (scale * scale);
        if ricci > tolerance || riemann > tolerance {
            return Verdict::early(
                Status::Fail,
                max_residual,
                Some(s.index),
                format!("curvature does not vanish at point {} (|S|, |r| ~ {ricci:e}, |R| ~ {riemann:e})", s.index),
            );
        }
    }
    let shift = params.lambda + 0.5 * (params.p + 2.0 / n as f64);
    let shift_ok = shift.abs() <= tolerance * (1.0 + params.lambda.abs() + 0.5 * (params.p + 2.0 / n as f64).abs());
    let records = samples
        .iter()
        .zip(&gates)
        .map(|(s, &(_, hypothesis_residual))| {
            let (divergence, is_solenoidal) = solenoidal(s.geometry, s.vector, tolerance);
            BiconditionalRecord {
                index: s.index,
                divergence,
                solenoidal: is_solenoidal,
                condition_value: shift,
                condition: shift_ok,
                hypothesis_residual,
            }
        })
        .collect();
    conclude(records, max_residual, worst_index, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;
    use crate::manifold::{sample_points, SamplePlan};

    fn exprs(v: &[&str]) -> Vec<crate::exprlang::Expr> {
        v.iter().map(|s| parse(s).unwrap()).collect()
    }

    fn fix_sol() -> FieldBundle {
        FieldBundle::flat(2)
            .unwrap()
            .with_vector_field(exprs(&["x1", "0", "-y1", "0"]))
            .unwrap()
            .with_soliton(SolitonParams { lambda: 0.25, p: -1.0 })
            .with_tensor_params(TensorParams {
                alpha: 1.0,
                beta: 1.0,
                a: 1.0,
                b: 1.0,
            })
    }

    fn euler(lambda: f64, p: f64) -> FieldBundle {
        let c = -lambda - 0.5 * (p + 0.5);
        let comps: Vec<String> = ["x1", "x2", "y1", "y2"].iter().map(|v| format!("{c:?}*{v}")).collect();
        let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
        FieldBundle::flat(2)
            .unwrap()
            .with_vector_field(exprs(&refs))
            .unwrap()
            .with_soliton(SolitonParams { lambda, p })
    }

    fn fix_pot() -> FieldBundle {
        FieldBundle::from_potential(2, parse("x1*y1 + x2*y2 + x1^2*y1^2").unwrap()).unwrap()
    }

    struct Evaluated {
        geometry: Vec<PointGeometry>,
        vectors: Vec<VectorJet>,
    }

    impl Evaluated {
        fn new(b: &FieldBundle, count: usize) -> Self {
            let pts = sample_points(&SamplePlan::cube(count, b.dim(), -0.3, 0.3, 7), b.dim()).unwrap();
            Evaluated {
                geometry: pts.iter().map(|x| PointGeometry::at(b, x).unwrap()).collect(),
                vectors: pts.iter().map(|x| b.vector_at(x).unwrap().unwrap()).collect(),
            }
        }

        fn samples(&self) -> Vec<SolitonSample<'_>> {
            self.geometry
                .iter()
                .zip(&self.vectors)
                .enumerate()
                .map(|(index, (geometry, vector))| SolitonSample { index, geometry, vector })
                .collect()
        }
    }

    #[test]
    fn fix_sol_is_exact() {
        let b = fix_sol();
        for x in [Point::origin(4), Point::new(vec![0.3, -0.2, 0.1, 0.25])] {
            let r = conformal_einstein_residual(&b, &x).unwrap();
            assert_eq!(r.norm, 0.0);
            assert_eq!(r.trace_identity_value, 0.0);
            assert_eq!(trace_identity(&b, &x).unwrap(), 0.0);
        }
        assert_eq!(classify_soliton(b.soliton.lambda), SolitonClass::Expanding);
    }

    #[test]
    fn euler_family_is_exact() {
        for (lambda, p) in [(1.0, 0.0), (-0.3, 2.5), (0.0, -0.5), (0.7, 0.125)] {
            let b = euler(lambda, p);
            let r = conformal_einstein_residual(&b, &Point::new(vec![0.1, 0.2, -0.3, 0.05])).unwrap();
            assert!(r.norm < 1e-14, "{lambda} {p}: {}", r.norm);
        }
    }

    #[test]
    fn zero_field_residuals_on_flat() {
        let b = FieldBundle::flat(2)
            .unwrap()
            .with_vector_field(exprs(&["0", "0", "0", "0"]))
            .unwrap()
            .with_soliton(SolitonParams { lambda: 1.0, p: 0.0 });
        let x = Point::origin(4);
        let g = b.metric_values(&x).unwrap();
        let ce = conformal_einstein_residual(&b, &x).unwrap();
        assert_eq!(ce.matrix, &g * 2.5);
        assert_eq!(ce.norm, 2.5);
        assert_eq!(einstein_soliton_residual(&b, &x).unwrap().matrix, &g * 2.0);
        assert_eq!(conformal_ricci_residual(&b, &x).unwrap().matrix, &g * -1.5);
        assert_eq!(trace_identity(&b, &x).unwrap(), 5.0);
    }

    #[test]
    fn killing_field_cases() {
        let b = FieldBundle::flat(2).unwrap().with_vector_field(exprs(&["x1", "0", "-y1", "0"])).unwrap();
        let x = Point::new(vec![0.4, 0.1, -0.2, 0.3]);
        assert_eq!(einstein_soliton_residual(&b, &x).unwrap().norm, 0.0);
        let tuned = b.with_soliton(SolitonParams { lambda: 0.75, p: 1.0 });
        assert_eq!(conformal_ricci_residual(&tuned, &x).unwrap().norm, 0.0);
    }

    #[test]
    fn missing_field_is_an_error() {
        let x = Point::origin(4);
        assert!(matches!(
            conformal_einstein_residual(&fix_pot(), &x),
            Err(FieldError::MissingVectorField)
        ));
        assert!(trace_identity(&fix_pot(), &x).is_err());
    }

    #[test]
    fn curved_residuals_at_origin() {
        let b = fix_pot().with_vector_field(exprs(&["0", "0", "0", "0"])).unwrap();
        let x = Point::origin(4);
        let pg = PointGeometry::at(&b, &x).unwrap();
        let (s, g) = (&pg.curvature.ricci, pg.g());
        let e = einstein_soliton_residual(&b, &x).unwrap();
        assert!((&e.matrix - (s * 2.0 + g * 8.0)).amax() < 1e-12);
        let cr = conformal_ricci_residual(&b, &x).unwrap();
        assert!((&cr.matrix - (s * 2.0 + g * 0.5)).amax() < 1e-12);
        let flow = einstein_flow_velocity(&pg.curvature, g);
        assert!((flow - (s + g * 4.0) * -2.0).amax() < 1e-12);
    }

    #[test]
    fn flow_velocity_in_two_dimensions() {
        let b = FieldBundle::explicit(vec!["x".into(), "y".into()], vec![((0, 1), parse("1 + x*y").unwrap())], vec![]).unwrap();
        let pg = PointGeometry::at(&b, &Point::origin(2)).unwrap();
        assert!(max_abs(&einstein_flow_velocity(&pg.curvature, pg.g())) < 1e-14);
        let flat = PointGeometry::at(&FieldBundle::flat(2).unwrap(), &Point::origin(4)).unwrap();
        assert_eq!(max_abs(&einstein_flow_velocity(&flat.curvature, flat.g())), 0.0);
    }

    #[test]
    fn trace_identity_matches_half_trace_of_residual() {
        let b = fix_pot()
            .with_vector_field(exprs(&["x1*y2", "sin(x2) + y1^2", "1 - x1", "x2*y1*y2"]))
            .unwrap()
            .with_soliton(SolitonParams { lambda: -0.7, p: 1.3 });
        for pg_idx in 0..5 {
            let x = Point::new(vec![0.05 * pg_idx as f64, -0.1, 0.2, 0.03 * pg_idx as f64]);
            let r = conformal_einstein_residual(&b, &x).unwrap();
            let ginv = b.inverse_metric_at(&x).unwrap();
            assert!((r.trace_identity_value - half_trace(&ginv, &r.matrix)).abs() < 1e-9);
        }
    }

    #[test]
    fn reversing_the_field() {
        let v = ["x1*y2", "x2^2", "y1 - x1", "cos(y2)"];
        let neg: Vec<String> = v.iter().map(|c| format!("-({c})")).collect();
        let neg: Vec<&str> = neg.iter().map(String::as_str).collect();
        let params = SolitonParams { lambda: 0.4, p: -0.2 };
        let plus = fix_pot().with_vector_field(exprs(&v)).unwrap().with_soliton(params);
        let minus = fix_pot().with_vector_field(exprs(&neg)).unwrap().with_soliton(params);
        let x = Point::new(vec![0.1, 0.2, -0.15, 0.05]);
        let pg = PointGeometry::at(&plus, &x).unwrap();
        let coef = SolitonKind::ConformalEinstein.metric_coefficient(&params, pg.curvature.scalar, 4);
        let expected = (&pg.curvature.ricci * 2.0 + pg.g() * coef) * 2.0;
        let sum = conformal_einstein_residual(&plus, &x).unwrap().matrix + conformal_einstein_residual(&minus, &x).unwrap().matrix;
        assert!((sum - expected).amax() < 1e-10);
    }

    #[test]
    fn metric_rescaling() {
        let k = 2.5;
        let v = exprs(&["x1", "y2*x2", "-y1", "x1*y1"]);
        let params = SolitonParams { lambda: 0.3, p: 0.1 };
        let base = fix_pot().with_vector_field(v.clone()).unwrap().with_soliton(params);
        let scaled = FieldBundle::from_potential(2, parse("2.5*(x1*y1 + x2*y2 + x1^2*y1^2)").unwrap())
            .unwrap()
            .with_vector_field(v)
            .unwrap()
            .with_soliton(params);
        let x = Point::new(vec![0.2, -0.1, 0.1, 0.3]);
        let pg = PointGeometry::at(&base, &x).unwrap();
        let vj = base.vector_at(&x).unwrap().unwrap();
        let lie = lie_derivative_metric_at(&pg.metric, &vj);
        let r = pg.curvature.scalar;
        let expected = &lie * k + &pg.curvature.ricci * 2.0 + pg.g() * (k * (2.0 * 0.3 - r / k + 0.1 + 0.5));
        let got = conformal_einstein_residual(&scaled, &x).unwrap().matrix;
        assert!((got - expected).amax() < 1e-8);
        let scaled_r = PointGeometry::at(&scaled, &x).unwrap().curvature.scalar;
        assert!((scaled_r - r / k).abs() < 1e-10);
    }

    #[test]
    fn solenoidal_formula() {
        assert_eq!(solenoidal_scalar_curvature(1.0, 0.0, 4), Some(5.0));
        assert_eq!(solenoidal_scalar_curvature(0.25, -1.0, 4), Some(0.0));
        assert_eq!(solenoidal_scalar_curvature(1.0, 0.0, 2), None);
    }

    #[test]
    fn classification() {
        assert_eq!(classify_soliton(-1.0), SolitonClass::Shrinking);
        assert_eq!(classify_soliton(0.0), SolitonClass::Steady);
        assert_eq!(classify_soliton(-0.0), SolitonClass::Steady);
        assert_eq!(classify_soliton(0.25), SolitonClass::Expanding);
        assert_eq!(classify_soliton(1e-300), SolitonClass::Expanding);
    }

    #[test]
    fn fix_sol_verdicts_pass() {
        let b = fix_sol();
        let ev = Evaluated::new(&b, 8);
        let samples = ev.samples();
        let v = solenoidal_scalar_verdict(&samples, &b.soliton, 1e-7);
        assert_eq!(v.status, Status::Pass);
        assert_eq!(v.directions(), (true, true));
        assert!(v.records.iter().all(|r| r.solenoidal && r.condition));
        for family in TensorFamily::ALL {
            let v = flat_case_verdict(&samples, family, &b.tensor_params, &b.soliton, 1e-7);
            assert_eq!(v.status, Status::Pass, "{family:?} {:?}", v.message);
            assert!(v.records.iter().all(|r| r.condition_value == 0.0));
        }
    }

    #[test]
    fn euler_variant_passes_with_both_sides_false() {
        let b = euler(0.6, 0.2).with_tensor_params(TensorParams {
            alpha: 1.0,
            beta: 1.0,
            a: 1.0,
            b: 1.0,
        });
        let ev = Evaluated::new(&b, 5);
        let samples = ev.samples();
        for family in TensorFamily::ALL {
            let v = flat_case_verdict(&samples, family, &b.tensor_params, &b.soliton, 1e-7);
            assert_eq!(v.status, Status::Pass);
            assert!(v.records.iter().all(|r| !r.solenoidal && !r.condition));
            // flat trace identity: div V + [λ + ½(p + 2/n)] n = 0
            for (r, s) in v.records.iter().zip(&samples) {
                let td = trace_identity_at(s.geometry, s.vector, &b.soliton);
                assert!(td.abs() < 1e-12);
                assert!((r.divergence + 4.0 * r.condition_value).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_parameters() {
        let b = fix_sol().with_tensor_params(TensorParams::defaults(4));
        let ev = Evaluated::new(&b, 3);
        let v = flat_case_verdict(&ev.samples(), TensorFamily::QuasiConformal, &b.tensor_params, &b.soliton, 1e-7);
        assert_eq!(v.status, Status::DegenerateParams);
        let pp = TensorParams {
            a: 2.0,
            b: -2.0,
            ..TensorParams::defaults(4)
        };
        let v = flat_case_verdict(&ev.samples(), TensorFamily::PseudoProjective, &pp, &b.soliton, 1e-7);
        assert_eq!(v.status, Status::DegenerateParams);
        let v = flat_case_verdict(&ev.samples(), TensorFamily::W2, &pp, &b.soliton, 1e-7);
        assert_eq!(v.status, Status::Pass);
    }

    #[test]
    fn non_solitons_are_not_applicable() {
        let b = fix_pot().with_vector_field(exprs(&["x1", "0", "0", "0"])).unwrap();
        let ev = Evaluated::new(&b, 3);
        let samples = ev.samples();
        assert_eq!(solenoidal_scalar_verdict(&samples, &b.soliton, 1e-7).status, Status::NotApplicable);
        for family in TensorFamily::ALL {
            let v = flat_case_verdict(&samples, family, &TensorParams { alpha: 1.0, beta: 1.0, a: 1.0, b: 1.0 }, &b.soliton, 1e-7);
            assert_eq!(v.status, Status::NotApplicable);
        }
    }
}
