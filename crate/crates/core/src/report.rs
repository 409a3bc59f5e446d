//! Check orchestration and report rendering.
//!
//! Every check reports a residual normalized by the magnitude of the terms
//! it compares, so a single tolerance applies across checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::hash::Hasher;
use std::io;
use std::str::FromStr;

use fnv::FnvHasher;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::PointGeometry;
use crate::manifold::{
    canonicalize, sample_points, FieldBundle, FieldError, Point, SampleError, SamplePlan, StructureJet, VectorJet,
};
use crate::parakahler::{axioms_at, deviation_from, fit_ratio, frame_ricci_matrix, identities_at, IdentityResiduals};
use crate::soliton::{
    classify_soliton, flat_case_verdict, half_trace, soliton_residual_at, solenoidal_scalar_curvature,
    solenoidal_scalar_verdict, SolitonKind, SolitonSample, Verdict,
};
use crate::special_tensors::{
    antisymmetry_residual, contraction_fit, flatness_norm, flatness_threshold, TensorFamily,
};
use crate::tensor::{max_abs, Matrix};

pub const REPORT_VERSION: &str = "1";
pub const DEFAULT_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "NOT-APPLICABLE")]
    NotApplicable,
    #[serde(rename = "DEGENERATE-PARAMS")]
    DegenerateParams,
    #[serde(rename = "ERROR")]
    Error,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotApplicable => "NOT-APPLICABLE",
            Status::DegenerateParams => "DEGENERATE-PARAMS",
            Status::Error => "ERROR",
        }
    }

    pub fn fails_run(self) -> bool {
        matches!(self, Status::Fail | Status::Error)
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub index: usize,
    pub point: Point,
    pub residual: f64,
    pub values: BTreeMap<String, f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_name: String,
    pub status: Status,
    pub max_residual: f64,
    pub tolerance: f64,
    pub points_checked: usize,
    pub worst_point: Option<Point>,
    pub details: Vec<PointRecord>,
    pub fitted_constants: Option<BTreeMap<String, f64>>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheckId {
    ParaKahlerAxioms,
    CurvatureIdentities,
    FrameRicci,
    ConformalEinsteinSoliton,
    EinsteinSoliton,
    ConformalRicciSoliton,
    TraceIdentity,
    QuasiConformalTensor,
    PseudoProjectiveTensor,
    W2Tensor,
    SolenoidalScalarCurvature,
    QuasiConformalSolenoidal,
    PseudoProjectiveSolenoidal,
    W2Solenoidal,
    SolitonClassification,
}

impl CheckId {
    /// Execution order.
    pub const ALL: [CheckId; 15] = [
        CheckId::ParaKahlerAxioms,
        CheckId::CurvatureIdentities,
        CheckId::FrameRicci,
        CheckId::ConformalEinsteinSoliton,
        CheckId::EinsteinSoliton,
        CheckId::ConformalRicciSoliton,
        CheckId::TraceIdentity,
        CheckId::QuasiConformalTensor,
        CheckId::PseudoProjectiveTensor,
        CheckId::W2Tensor,
        CheckId::SolenoidalScalarCurvature,
        CheckId::QuasiConformalSolenoidal,
        CheckId::PseudoProjectiveSolenoidal,
        CheckId::W2Solenoidal,
        CheckId::SolitonClassification,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckId::ParaKahlerAxioms => "para_kahler_axioms",
            CheckId::CurvatureIdentities => "curvature_identities",
            CheckId::FrameRicci => "frame_ricci",
            CheckId::ConformalEinsteinSoliton => "conformal_einstein_soliton",
            CheckId::EinsteinSoliton => "einstein_soliton",
            CheckId::ConformalRicciSoliton => "conformal_ricci_soliton",
            CheckId::TraceIdentity => "trace_identity",
            CheckId::QuasiConformalTensor => "quasi_conformal_tensor",
            CheckId::PseudoProjectiveTensor => "pseudo_projective_tensor",
            CheckId::W2Tensor => "w2_tensor",
            CheckId::SolenoidalScalarCurvature => "solenoidal_scalar_curvature",
            CheckId::QuasiConformalSolenoidal => "quasi_conformal_flat_solenoidal",
            CheckId::PseudoProjectiveSolenoidal => "pseudo_projective_flat_solenoidal",
            CheckId::W2Solenoidal => "w2_flat_solenoidal",
            CheckId::SolitonClassification => "soliton_classification",
        }
    }

    /// Checks run when no selection is given. The Einstein and conformal
    /// Ricci soliton equations are alternative equations for the same data,
    /// so they only run on request.
    pub fn is_default(self) -> bool {
        !matches!(self, CheckId::EinsteinSoliton | CheckId::ConformalRicciSoliton)
    }

    pub fn defaults() -> Vec<CheckId> {
        CheckId::ALL.into_iter().filter(|c| c.is_default()).collect()
    }
}

impl FromStr for CheckId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        CheckId::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown check `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (text | json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub tolerance: f64,
    pub points: Option<usize>,
    pub seed: Option<u64>,
    pub format: Format,
    /// `None` runs the default selection.
    pub checks: Option<Vec<CheckId>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            tolerance: DEFAULT_TOLERANCE,
            points: None,
            seed: None,
            format: Format::Text,
            checks: None,
        }
    }
}

impl RunOptions {
    /// The plan with point-count and seed overrides applied.
    pub fn plan(&self, plan: &SamplePlan) -> SamplePlan {
        let mut plan = plan.clone();
        if let Some(seed) = self.seed {
            plan = plan.with_seed(seed);
        }
        if let Some(count) = self.points {
            plan = plan.with_count(count);
        }
        plan
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("tolerance must be positive and finite, got {0}")]
    Tolerance(f64),
    #[error(transparent)]
    Sampling(#[from] SampleError),
}

/// Field values at one sample point.
#[derive(Debug)]
pub struct PointData {
    pub index: usize,
    pub point: Point,
    pub geometry: Result<PointGeometry, FieldError>,
    pub structure: Result<StructureJet, FieldError>,
    pub vector: Option<Result<VectorJet, FieldError>>,
}

impl PointData {
    pub fn evaluate(bundle: &FieldBundle, index: usize, point: Point) -> Self {
        PointData {
            index,
            geometry: PointGeometry::at(bundle, &point),
            structure: bundle.structure_at(&point),
            vector: bundle.vector_at(&point),
            point,
        }
    }

    fn geometry(&self) -> Result<&PointGeometry, Problem> {
        self.geometry.as_ref().map_err(Problem::from)
    }

    fn structure(&self) -> Result<&StructureJet, Problem> {
        self.structure.as_ref().map_err(Problem::from)
    }

    fn vector(&self) -> Result<&VectorJet, Problem> {
        match &self.vector {
            Some(v) => v.as_ref().map_err(Problem::from),
            None => Err(Problem::Error(FieldError::MissingVectorField.to_string())),
        }
    }
}

/// Degenerate points are skipped; anything else aborts the check.
enum Problem {
    Skip(String),
    Error(String),
}

impl From<&FieldError> for Problem {
    fn from(e: &FieldError) -> Self {
        match e {
            FieldError::Degenerate { .. } | FieldError::NullEigenvalue { .. } => Problem::Skip(e.to_string()),
            other => Problem::Error(other.to_string()),
        }
    }
}

impl From<crate::special_tensors::TensorError> for Problem {
    fn from(e: crate::special_tensors::TensorError) -> Self {
        match e {
            crate::special_tensors::TensorError::Field(f) => Problem::from(&f),
            other => Problem::Error(other.to_string()),
        }
    }
}

struct Sample {
    residual: f64,
    values: BTreeMap<String, f64>,
}

struct Collected<T> {
    ok: Vec<(usize, T)>,
    skipped: Vec<(usize, String)>,
    error: Option<(usize, String)>,
}

fn collect<T: Send>(data: &[PointData], f: impl Fn(&PointData) -> Result<T, Problem> + Sync) -> Collected<T> {
    let results: Vec<Result<T, Problem>> = data.par_iter().map(&f).collect();
    let mut out = Collected {
        ok: vec![],
        skipped: vec![],
        error: None,
    };
    for (d, r) in data.iter().zip(results) {
        match r {
            Ok(v) => out.ok.push((d.index, v)),
            Err(Problem::Skip(m)) => out.skipped.push((d.index, m)),
            Err(Problem::Error(m)) => {
                if out.error.is_none() {
                    out.error = Some((d.index, m));
                }
            }
        }
    }
    out
}

fn values<const N: usize>(pairs: [(&str, f64); N]) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

struct Ctx<'a> {
    bundle: &'a FieldBundle,
    data: &'a [PointData],
    tolerance: f64,
}

impl Ctx<'_> {
    fn bare(&self, check: CheckId, status: Status, message: impl Into<String>) -> CheckReport {
        CheckReport {
            check_name: check.name().into(),
            status,
            max_residual: 0.0,
            tolerance: self.tolerance,
            points_checked: if status == Status::Error { 0 } else { self.data.len() },
            worst_point: None,
            details: vec![],
            fitted_constants: None,
            message: Some(message.into()),
        }
    }

    fn finish(
        &self,
        check: CheckId,
        collected: Collected<Sample>,
        fitted: Option<BTreeMap<String, f64>>,
        message: Option<String>,
    ) -> CheckReport {
        if let Some((index, msg)) = collected.error {
            return self.bare(check, Status::Error, format!("point {index}: {msg}"));
        }
        if collected.ok.is_empty() {
            return self.bare(check, Status::Error, "every sample point is degenerate");
        }
        let mut details: Vec<PointRecord> = Vec::with_capacity(self.data.len());
        let (mut max_residual, mut worst) = (f64::NEG_INFINITY, 0);
        for (index, s) in &collected.ok {
            if s.residual > max_residual || s.residual.is_nan() {
                max_residual = s.residual;
                worst = *index;
            }
        }
        let points_checked = collected.ok.len();
        for (index, s) in collected.ok {
            details.push(PointRecord {
                index,
                point: self.data[index].point.clone(),
                residual: s.residual,
                values: s.values,
                note: None,
            });
        }
        for (index, note) in collected.skipped.iter().cloned() {
            details.push(PointRecord {
                index,
                point: self.data[index].point.clone(),
                residual: 0.0,
                values: BTreeMap::new(),
                note: Some(format!("skipped: {note}")),
            });
        }
        details.sort_by_key(|r| r.index);
        let status = if max_residual <= self.tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        let message = match (message, collected.skipped.len()) {
            (m, 0) => m,
            (Some(m), k) => Some(format!("{m}; {k} degenerate points skipped")),
            (None, k) => Some(format!("{k} degenerate points skipped")),
        };
        CheckReport {
            check_name: check.name().into(),
            status,
            max_residual,
            tolerance: self.tolerance,
            points_checked,
            worst_point: Some(self.data[worst].point.clone()),
            details,
            fitted_constants: fitted,
            message,
        }
    }

    fn run(&self, check: CheckId) -> CheckReport {
        match check {
            CheckId::ParaKahlerAxioms => self.axioms(),
            CheckId::CurvatureIdentities => self.identities(),
            CheckId::FrameRicci => self.frame_ricci(),
            CheckId::ConformalEinsteinSoliton => self.soliton(check, SolitonKind::ConformalEinstein),
            CheckId::EinsteinSoliton => self.soliton(check, SolitonKind::Einstein),
            CheckId::ConformalRicciSoliton => self.soliton(check, SolitonKind::ConformalRicci),
            CheckId::TraceIdentity => self.trace_identity(),
            CheckId::QuasiConformalTensor => self.tensor(check, TensorFamily::QuasiConformal),
            CheckId::PseudoProjectiveTensor => self.tensor(check, TensorFamily::PseudoProjective),
            CheckId::W2Tensor => self.tensor(check, TensorFamily::W2),
            CheckId::SolenoidalScalarCurvature => self.verdict(check, None),
            CheckId::QuasiConformalSolenoidal => self.verdict(check, Some(TensorFamily::QuasiConformal)),
            CheckId::PseudoProjectiveSolenoidal => self.verdict(check, Some(TensorFamily::PseudoProjective)),
            CheckId::W2Solenoidal => self.verdict(check, Some(TensorFamily::W2)),
            CheckId::SolitonClassification => self.classification(),
        }
    }

    fn axioms(&self) -> CheckReport {
        let c = collect(self.data, |d| {
            let pg = d.geometry()?;
            let a = axioms_at(pg, d.structure()?);
            let scale = max_abs(pg.g()).max(1.0);
            Ok(Sample {
                residual: a.max() / scale,
                values: values([
                    ("residual_f2", a.residual_f2),
                    ("residual_metric_skew", a.residual_metric_skew),
                    ("residual_nabla_f", a.residual_nabla_f),
                ]),
            })
        });
        self.finish(CheckId::ParaKahlerAxioms, c, None, None)
    }

    fn identities(&self) -> CheckReport {
        let c = collect(self.data, |d| {
            let pg = d.geometry()?;
            let id = identities_at(pg, &d.structure()?.f);
            let rs = pg.curvature.riemann_up.max_abs().max(1.0);
            let ss = max_abs(&pg.curvature.ricci).max(1.0);
            let v = id.values();
            let residual = (v[0] / rs).max(v[1] / rs).max(v[2] / ss).max(v[3] / ss);
            let mut vals = BTreeMap::new();
            for (name, x) in IdentityResiduals::NAMES.iter().zip(v) {
                vals.insert(name.to_string(), x);
            }
            Ok(Sample { residual, values: vals })
        });
        self.finish(CheckId::CurvatureIdentities, c, None, None)
    }

    fn frame_ricci(&self) -> CheckReport {
        let c = collect(self.data, |d| {
            let pg = d.geometry()?;
            let m = frame_ricci_matrix(pg, &d.structure()?.f).map_err(|e| Problem::from(&e))?;
            Ok((m, pg.curvature.ricci.clone()))
        });
        let pairs: Vec<(&Matrix, &Matrix)> = c.ok.iter().map(|(_, (m, s))| (m, s)).collect();
        let fitted_c = fit_ratio(&pairs);
        let unit_gap = fitted_c.map_or(0.0, |c| (c.abs() - 1.0).abs());
        let samples = Collected {
            ok: c
                .ok
                .iter()
                .map(|(i, (m, s))| {
                    let scale = max_abs(s).max(1.0);
                    let dev = deviation_from(m, s, fitted_c);
                    let local = fit_ratio(&[(m, s)]);
                    let mut vals = values([("deviation", dev)]);
                    if let Some(l) = local {
                        vals.insert("c_local".into(), l);
                    }
                    (*i, Sample { residual: (dev / scale).max(unit_gap), values: vals })
                })
                .collect(),
            skipped: c.skipped,
            error: c.error,
        };
        let (fitted, message) = match fitted_c {
            Some(c) => (Some(values([("c", c)])), Some(format!("frame contraction equals {c} * Ricci"))),
            None => (None, Some("Ricci tensor vanishes; c is undetermined".into())),
        };
        self.finish(CheckId::FrameRicci, samples, fitted, message)
    }

    fn soliton(&self, check: CheckId, kind: SolitonKind) -> CheckReport {
        if self.bundle.vector_field().is_none() {
            return self.bare(check, Status::NotApplicable, "no vector field");
        }
        let params = self.bundle.soliton;
        let c = collect(self.data, |d| {
            let r = soliton_residual_at(kind, d.geometry()?, d.vector()?, &params);
            Ok(Sample {
                residual: r.relative(),
                values: values([("norm", r.norm), ("scale", r.scale)]),
            })
        });
        self.finish(check, c, None, None)
    }

    fn trace_identity(&self) -> CheckReport {
        if self.bundle.vector_field().is_none() {
            return self.bare(CheckId::TraceIdentity, Status::NotApplicable, "no vector field");
        }
        let params = self.bundle.soliton;
        let c = collect(self.data, |d| {
            let pg = d.geometry()?;
            let r = soliton_residual_at(SolitonKind::ConformalEinstein, pg, d.vector()?, &params);
            let ht = half_trace(&pg.ginv, &r.matrix);
            let td = r.trace_identity_value;
            let scale = r.scale * max_abs(&pg.ginv).max(1.0) * pg.dim() as f64;
            Ok(Sample {
                residual: (td - ht).abs() / scale.max(td.abs()),
                values: values([("trace_identity", td), ("half_trace", ht)]),
            })
        });
        self.finish(CheckId::TraceIdentity, c, None, None)
    }

    fn tensor(&self, check: CheckId, family: TensorFamily) -> CheckReport {
        let params = self.bundle.tensor_params;
        let tol = self.tolerance;
        let c = collect(self.data, |d| {
            let pg = d.geometry()?;
            let (t, m, fit) = contraction_fit(family, pg, &d.structure()?.f, &params)?;
            let t_scale = t.max_abs().max(1.0);
            let m_scale = max_abs(&m).max(1.0);
            let norm = flatness_norm(&t);
            let threshold = flatness_threshold(tol, pg.g(), pg.curvature.scalar);
            let mut vals = values([
                ("flatness_norm", norm),
                ("flatness_threshold", threshold),
                ("flat", f64::from(u8::from(norm <= threshold))),
                ("g_coefficient", fit.g_coefficient),
                ("fit_residual", fit.residual),
            ]);
            let (n, r) = (pg.dim(), pg.curvature.scalar);
            let (s_exact, t_exact) = family.contraction_coefficients(&params, r, n);
            let (s_ref, t_ref) = family.reference_coefficients(&params, r, n);
            let near = |got: f64, want: f64| (got - want).abs() / (1.0 + want.abs());
            let mut coefficient_gap = near(fit.g_coefficient, t_exact);
            let mut reference_gap = near(fit.g_coefficient, t_ref);
            if let Some(s) = fit.s_coefficient {
                vals.insert("s_coefficient".into(), s);
                coefficient_gap = coefficient_gap.max(near(s, s_exact));
                reference_gap = reference_gap.max(near(s, s_ref));
            }
            vals.insert("reference_gap".into(), reference_gap);
            Ok(Sample {
                residual: (antisymmetry_residual(&t) / t_scale)
                    .max(fit.residual / m_scale)
                    .max(coefficient_gap),
                values: vals,
            })
        });
        let mut fitted = BTreeMap::new();
        let flat_all = c.ok.iter().all(|(_, s)| s.values["flat"] == 1.0);
        fitted.insert("flat".to_string(), f64::from(u8::from(flat_all)));
        let max_norm = c.ok.iter().map(|(_, s)| s.values["flatness_norm"]).fold(0.0, f64::max);
        fitted.insert("max_flatness_norm".to_string(), max_norm);
        let s_coeffs: Vec<f64> = c.ok.iter().filter_map(|(_, s)| s.values.get("s_coefficient").copied()).collect();
        if !s_coeffs.is_empty() {
            let mean = s_coeffs.iter().sum::<f64>() / s_coeffs.len() as f64;
            let lo = s_coeffs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = s_coeffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            fitted.insert("s_coefficient".to_string(), mean);
            fitted.insert("s_coefficient_spread".to_string(), hi - lo);
        }
        let n = self.bundle.dim();
        fitted.insert("s_expected".to_string(), family.contraction_coefficients(&params, 0.0, n).0);
        fitted.insert("s_reference".to_string(), family.reference_coefficients(&params, 0.0, n).0);
        let agrees = c.ok.iter().all(|(_, s)| s.values["reference_gap"] <= tol);
        fitted.insert("reference_agrees".to_string(), f64::from(u8::from(agrees)));
        let flatness = if flat_all { "flat at every sample" } else { "not flat" };
        let reference = if agrees { "" } else { "; contraction differs from the reference coefficients" };
        let message = Some(format!("{flatness}{reference}"));
        self.finish(check, c, Some(fitted), message)
    }

    fn soliton_samples(&self) -> Result<(Vec<SolitonSample<'_>>, Vec<(usize, String)>), CheckReport> {
        let mut samples = Vec::new();
        let mut skipped = Vec::new();
        for d in self.data {
            let pair = d.geometry().and_then(|g| d.vector().map(|v| (g, v)));
            match pair {
                Ok((geometry, vector)) => samples.push(SolitonSample {
                    index: d.index,
                    geometry,
                    vector,
                }),
                Err(Problem::Skip(m)) => skipped.push((d.index, m)),
                Err(Problem::Error(m)) => {
                    return Err(self.bare(CheckId::SolenoidalScalarCurvature, Status::Error, format!("point {}: {m}", d.index)))
                }
            }
        }
        Ok((samples, skipped))
    }

    fn verdict(&self, check: CheckId, family: Option<TensorFamily>) -> CheckReport {
        if self.bundle.vector_field().is_none() {
            return self.bare(check, Status::NotApplicable, "no vector field");
        }
        let (samples, skipped) = match self.soliton_samples() {
            Ok(s) => s,
            Err(mut r) => {
                r.check_name = check.name().into();
                return r;
            }
        };
        if samples.is_empty() {
            return self.bare(check, Status::Error, "every sample point is degenerate");
        }
        let params = self.bundle.soliton;
        let n = self.bundle.dim();
        let (verdict, mut fitted) = match family {
            None => {
                let mut f = BTreeMap::new();
                if let Some(r) = solenoidal_scalar_curvature(params.lambda, params.p, n) {
                    f.insert("scalar_formula".to_string(), r);
                }
                (solenoidal_scalar_verdict(&samples, &params, self.tolerance), f)
            }
            Some(fam) => {
                let shift = params.lambda + 0.5 * (params.p + 2.0 / n as f64);
                let mut f = values([("shift", shift)]);
                if let Some(d) = fam.degeneracy(&self.bundle.tensor_params) {
                    f.insert("parameter_combination".into(), d);
                }
                (flat_case_verdict(&samples, fam, &self.bundle.tensor_params, &params, self.tolerance), f)
            }
        };
        if !verdict.records.is_empty() {
            let (forward, backward) = verdict.directions();
            fitted.insert("forward".into(), f64::from(u8::from(forward)));
            fitted.insert("backward".into(), f64::from(u8::from(backward)));
        }
        self.from_verdict(check, verdict, fitted, skipped)
    }

    fn from_verdict(
        &self,
        check: CheckId,
        v: Verdict,
        fitted: BTreeMap<String, f64>,
        skipped: Vec<(usize, String)>,
    ) -> CheckReport {
        let mut details: Vec<PointRecord> = v
            .records
            .iter()
            .map(|r| PointRecord {
                index: r.index,
                point: self.data[r.index].point.clone(),
                residual: r.hypothesis_residual,
                values: values([
                    ("divergence", r.divergence),
                    ("solenoidal", f64::from(u8::from(r.solenoidal))),
                    ("condition_value", r.condition_value),
                    ("condition", f64::from(u8::from(r.condition))),
                ]),
                note: (!r.agrees()).then(|| "biconditional fails".to_string()),
            })
            .collect();
        for (index, note) in &skipped {
            details.push(PointRecord {
                index: *index,
                point: self.data[*index].point.clone(),
                residual: 0.0,
                values: BTreeMap::new(),
                note: Some(format!("skipped: {note}")),
            });
        }
        details.sort_by_key(|r| r.index);
        CheckReport {
            check_name: check.name().into(),
            status: v.status,
            max_residual: v.max_residual,
            tolerance: self.tolerance,
            points_checked: self.data.len() - skipped.len(),
            worst_point: v.worst_index.map(|i| self.data[i].point.clone()),
            details,
            fitted_constants: (!fitted.is_empty()).then_some(fitted),
            message: v.message,
        }
    }

    fn classification(&self) -> CheckReport {
        let check = CheckId::SolitonClassification;
        if self.bundle.vector_field().is_none() {
            return self.bare(check, Status::NotApplicable, "no vector field");
        }
        let mut report = self.soliton(check, SolitonKind::ConformalEinstein);
        let lambda = self.bundle.soliton.lambda;
        match report.status {
            Status::Pass => {
                report.fitted_constants = Some(values([("lambda", lambda)]));
                report.message = Some(classify_soliton(lambda).name().to_string());
            }
            Status::Fail => {
                report.status = Status::NotApplicable;
                report.message = Some("conformal Einstein equation does not hold".into());
            }
            _ => {}
        }
        report
    }
}

/// Evaluates the sample points once and runs the selected checks in their
/// fixed order.
pub fn run_checks(bundle: &FieldBundle, plan: &SamplePlan, options: &RunOptions) -> Result<Vec<CheckReport>, RunError> {
    if !(options.tolerance > 0.0 && options.tolerance.is_finite()) {
        return Err(RunError::Tolerance(options.tolerance));
    }
    let points = sample_points(&options.plan(plan), bundle.dim())?;
    let data: Vec<PointData> = points
        .into_par_iter()
        .enumerate()
        .map(|(i, x)| PointData::evaluate(bundle, i, x))
        .collect();
    let selected = options.checks.clone().unwrap_or_else(CheckId::defaults);
    let ctx = Ctx {
        bundle,
        data: &data,
        tolerance: options.tolerance,
    };
    Ok(CheckId::ALL
        .into_iter()
        .filter(|c| selected.contains(c))
        .map(|c| ctx.run(c))
        .collect())
}

pub fn spec_digest(text: &str) -> String {
    let mut h = FnvHasher::default();
    h.write(canonicalize(text).as_bytes());
    format!("{:016x}", h.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub version: String,
    pub spec_digest: String,
    pub seed: Option<u64>,
    pub tolerance: f64,
    pub checks: Vec<CheckReport>,
}

/// Run metadata printed with the reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportHeader {
    pub spec_digest: String,
    pub seed: Option<u64>,
    pub tolerance: f64,
}

/// Pretty JSON with every real written to 17 significant digits.
struct Digits17(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser).expect("report types serialize infallibly");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

pub fn render_report(reports: &[CheckReport], format: Format, header: &ReportHeader) -> String {
    match format {
        Format::Json => {
            let doc = JsonReport {
                version: REPORT_VERSION.into(),
                spec_digest: header.spec_digest.clone(),
                seed: header.seed,
                tolerance: header.tolerance,
                checks: reports.to_vec(),
            };
            let mut s = to_json(&doc);
            s.push('\n');
            s
        }
        Format::Text => render_text(reports),
    }
}

fn render_text(reports: &[CheckReport]) -> String {
    let head = ["check", "status", "max_residual", "tolerance", "points", "note"];
    let rows: Vec<[String; 6]> = reports
        .iter()
        .map(|r| {
            [
                r.check_name.clone(),
                r.status.label().to_string(),
                format!("{:.3e}", r.max_residual),
                format!("{:.1e}", r.tolerance),
                r.points_checked.to_string(),
                r.message.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let mut widths = head.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: [&str; 6]| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
            if i + 1 == cells.len() {
                s.push_str(cell);
            } else {
                let _ = write!(s, "{cell:<w$}  ");
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(head);
    for row in &rows {
        line([&row[0], &row[1], &row[2], &row[3], &row[4], &row[5]]);
    }
    out
}

/// Exit status for a finished run: 1 on any FAIL or ERROR.
pub fn exit_code(reports: &[CheckReport]) -> i32 {
    i32::from(reports.iter().any(|r| r.status.fails_run()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::load_spec;

    const FIX_SOL: &str = "\
dimension = 4
[metric]
kind = flat
[vector_field]
V[0] = x1
V[2] = -y1
[soliton]
lambda = 1/4
p = -1
[tensor_params]
alpha = 1
beta = 1
[sampling]
count = 6
seed = 3
";

    const FIX_POT: &str = "\
dimension = 4
[metric]
kind = potential
potential = x1*y1 + x2*y2 + x1^2*y1^2
[sampling]
count = 20
seed = 42
";

    fn run(text: &str) -> Vec<CheckReport> {
        let spec = load_spec(text).unwrap();
        run_checks(&spec.bundle, &spec.plan, &RunOptions::default()).unwrap()
    }

    fn by_name<'a>(reports: &'a [CheckReport], name: &str) -> &'a CheckReport {
        reports.iter().find(|r| r.check_name == name).unwrap()
    }

    #[test]
    fn fix_sol_passes_everything_applicable() {
        let reports = run(FIX_SOL);
        assert_eq!(reports.len(), CheckId::defaults().len());
        for r in &reports {
            assert_eq!(r.status, Status::Pass, "{} {:?}", r.check_name, r.message);
            assert!(r.max_residual <= r.tolerance);
            assert!(r.points_checked >= 1);
        }
        let class = by_name(&reports, "soliton_classification");
        assert_eq!(class.message.as_deref(), Some("expanding"));
        assert_eq!(exit_code(&reports), 0);
    }

    #[test]
    fn fix_pot_without_field() {
        let reports = run(FIX_POT);
        for name in ["para_kahler_axioms", "curvature_identities", "frame_ricci", "quasi_conformal_tensor", "w2_tensor"] {
            assert_eq!(by_name(&reports, name).status, Status::Pass, "{name}");
        }
        for name in ["conformal_einstein_soliton", "trace_identity", "solenoidal_scalar_curvature", "soliton_classification"] {
            assert_eq!(by_name(&reports, name).status, Status::NotApplicable, "{name}");
        }
        let fr = by_name(&reports, "frame_ricci");
        let c = fr.fitted_constants.as_ref().unwrap()["c"];
        assert!((c.abs() - 1.0).abs() < 1e-8);
        let qc = by_name(&reports, "quasi_conformal_tensor");
        assert_eq!(qc.fitted_constants.as_ref().unwrap()["flat"], 0.0);
        assert_eq!(exit_code(&reports), 0);
    }

    #[test]
    fn errors_stay_in_their_check() {
        let text = "\
dimension = 4
[metric]
kind = flat
[vector_field]
V[0] = log(x1)
[sampling]
kind = list
points = (0, 0, 0, 0)
";
        let reports = run(text);
        assert_eq!(by_name(&reports, "conformal_einstein_soliton").status, Status::Error);
        assert_eq!(by_name(&reports, "para_kahler_axioms").status, Status::Pass);
        assert_eq!(exit_code(&reports), 1);
        let msg = by_name(&reports, "trace_identity").message.clone().unwrap();
        assert!(msg.contains("log"), "{msg}");
    }

    #[test]
    fn degenerate_points_are_skipped() {
        let text = "\
dimension = 4
[metric]
kind = potential
potential = x1^2*y1 + x2*y2
[sampling]
kind = list
points = (0, 0, 0, 0); (0.5, 0, 0, 0)
";
        let reports = run(text);
        let ax = by_name(&reports, "para_kahler_axioms");
        assert_eq!(ax.points_checked, 1);
        assert!(ax.details[0].note.as_ref().unwrap().starts_with("skipped"));
    }

    #[test]
    fn selection_keeps_fixed_order() {
        let spec = load_spec(FIX_SOL).unwrap();
        let opts = RunOptions {
            checks: Some(vec![CheckId::SolitonClassification, CheckId::EinsteinSoliton, CheckId::ParaKahlerAxioms]),
            ..RunOptions::default()
        };
        let names: Vec<String> = run_checks(&spec.bundle, &spec.plan, &opts)
            .unwrap()
            .into_iter()
            .map(|r| r.check_name)
            .collect();
        assert_eq!(names, ["para_kahler_axioms", "einstein_soliton", "soliton_classification"]);
        assert_eq!("w2_tensor".parse::<CheckId>(), Ok(CheckId::W2Tensor));
        assert!("nope".parse::<CheckId>().is_err());
    }

    #[test]
    fn alternative_equations_fail_on_fix_sol() {
        let spec = load_spec(FIX_SOL).unwrap();
        let opts = RunOptions {
            checks: Some(vec![CheckId::EinsteinSoliton, CheckId::ConformalRicciSoliton]),
            ..RunOptions::default()
        };
        let reports = run_checks(&spec.bundle, &spec.plan, &opts).unwrap();
        assert!(reports.iter().all(|r| r.status == Status::Fail));
    }

    #[test]
    fn rejects_bad_tolerance() {
        let spec = load_spec(FIX_SOL).unwrap();
        for tolerance in [0.0, -1.0, f64::NAN] {
            let opts = RunOptions {
                tolerance,
                ..RunOptions::default()
            };
            assert!(run_checks(&spec.bundle, &spec.plan, &opts).is_err());
        }
    }

    fn header() -> ReportHeader {
        ReportHeader {
            spec_digest: spec_digest(FIX_POT),
            seed: Some(42),
            tolerance: 1e-7,
        }
    }

    #[test]
    fn empty_renderings() {
        let text = render_report(&[], Format::Text, &header());
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("check"));
        let json: serde_json::Value = serde_json::from_str(&render_report(&[], Format::Json, &header())).unwrap();
        assert_eq!(json["checks"], serde_json::json!([]));
    }

    #[test]
    fn single_pass_row() {
        let reports = run(FIX_SOL);
        let text = render_report(&reports[..1], Format::Text, &header());
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[1].starts_with("para_kahler_axioms"));
        assert!(rows[1].contains("PASS"));
    }

    #[test]
    fn json_round_trip_and_digits() {
        let reports = run(FIX_POT);
        let text = render_report(&reports, Format::Json, &header());
        let back: JsonReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.checks, reports);
        assert_eq!(back.version, REPORT_VERSION);
        assert!(text.contains("\"tolerance\": 9.9999999999999995e-8"));
        assert!(text.contains("\"max_residual\": 0.0000000000000000e0"));
        assert_eq!(text, render_report(&reports, Format::Json, &header()));
    }

    #[test]
    fn digest_ignores_comments_and_blank_lines() {
        let noisy = format!("# fixture\n\n{FIX_POT}\n   # trailing\n");
        assert_eq!(spec_digest(&noisy), spec_digest(FIX_POT));
        assert_ne!(spec_digest(FIX_POT), spec_digest(FIX_SOL));
        assert_eq!(spec_digest(FIX_POT).len(), 16);
    }

    #[test]
    fn fnv_reference_values() {
        // FNV-1a 64 offset basis for the empty input, and "a"
        let mut h = FnvHasher::default();
        h.write(b"");
        assert_eq!(h.finish(), 0xcbf2_9ce4_8422_2325);
        let mut h = FnvHasher::default();
        h.write(b"a");
        assert_eq!(h.finish(), 0xaf63_dc4c_8601_ec8c);
    }
}
