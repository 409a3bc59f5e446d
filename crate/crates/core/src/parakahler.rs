//! Para-Kähler axioms, curvature identities and the frame form of Ricci.
//!
//! Everything is evaluated on coordinate-basis arguments; the identities are
//! multilinear so that covers every argument.

use serde::{Deserialize, Serialize};

use crate::geometry::{covariant_derivative_structure, f_contraction, pseudo_orthonormal_frame, PointGeometry};
use crate::manifold::{FieldBundle, FieldError, Point, StructureJet};
use crate::tensor::{max_abs, Matrix};

/// Max-norm residuals of `F² = I`, `g(FX, FY) = −g(X, Y)` and `∇F = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub residual_f2: f64,
    pub residual_metric_skew: f64,
    pub residual_nabla_f: f64,
}

impl AxiomReport {
    pub fn max(&self) -> f64 {
        self.residual_f2.max(self.residual_metric_skew).max(self.residual_nabla_f)
    }
}

pub fn axiom_residuals(bundle: &FieldBundle, x: &Point) -> Result<AxiomReport, FieldError> {
    let pg = PointGeometry::at(bundle, x)?;
    let sj = bundle.structure_at(x)?;
    Ok(axioms_at(&pg, &sj))
}

pub fn axioms_at(pg: &PointGeometry, sj: &StructureJet) -> AxiomReport {
    let n = pg.dim();
    let f = &sj.f;
    let g = pg.g();
    AxiomReport {
        residual_f2: max_abs(&(f * f - Matrix::identity(n, n))),
        residual_metric_skew: max_abs(&(f.transpose() * g * f + g)),
        residual_nabla_f: covariant_derivative_structure(sj, &pg.christoffel).max_abs(),
    }
}

/// Max-norm residuals of the four curvature identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    /// `R(FX, FY)Z + R(X, Y)Z`
    pub riemann_f_invariance: f64,
    /// `R(FX, Y)Z + R(X, FY)Z`
    pub riemann_f_transfer: f64,
    /// `S(FX, Y) + S(FY, X)`
    pub ricci_f_skew: f64,
    /// `S(FX, FY) + S(X, Y)`
    pub ricci_f_anti_invariance: f64,
}

impl IdentityResiduals {
    pub const NAMES: [&'static str; 4] = [
        "riemann_f_invariance",
        "riemann_f_transfer",
        "ricci_f_skew",
        "ricci_f_anti_invariance",
    ];

    pub fn values(&self) -> [f64; 4] {
        [
            self.riemann_f_invariance,
            self.riemann_f_transfer,
            self.ricci_f_skew,
            self.ricci_f_anti_invariance,
        ]
    }

    pub fn max(&self) -> f64 {
        self.values().into_iter().fold(0.0, f64::max)
    }
}

pub fn curvature_identity_residuals(bundle: &FieldBundle, x: &Point) -> Result<IdentityResiduals, FieldError> {
    let pg = PointGeometry::at(bundle, x)?;
    let sj = bundle.structure_at(x)?;
    Ok(identities_at(&pg, &sj.f))
}

pub fn identities_at(pg: &PointGeometry, f: &Matrix) -> IdentityResiduals {
    let n = pg.dim();
    let r = &pg.curvature.riemann_up;
    let s = &pg.curvature.ricci;
    // R(F∂i, ∂j)∂k and R(∂i, F∂j)∂k, component l
    let r_fx = |l: usize, i: usize, j: usize, k: usize| -> f64 { (0..n).map(|a| f[(a, i)] * r[[l, a, j, k]]).sum() };
    let r_fy = |l: usize, i: usize, j: usize, k: usize| -> f64 { (0..n).map(|b| f[(b, j)] * r[[l, i, b, k]]).sum() };

    let (mut inv, mut transfer) = (0.0_f64, 0.0_f64);
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut rff = 0.0;
                    for a in 0..n {
                        if f[(a, i)] == 0.0 {
                            continue;
                        }
                        for b in 0..n {
                            rff += f[(a, i)] * f[(b, j)] * r[[l, a, b, k]];
                        }
                    }
                    inv = inv.max((rff + r[[l, i, j, k]]).abs());
                    transfer = transfer.max((r_fx(l, i, j, k) + r_fy(l, i, j, k)).abs());
                }
            }
        }
    }
    // S(F∂i, ∂j) = F^a_i S_aj
    let sf = f.transpose() * s;
    let skew = max_abs(&(&sf + sf.transpose()));
    let anti = max_abs(&(f.transpose() * s * f + s));
    IdentityResiduals {
        riemann_f_invariance: inv,
        riemann_f_transfer: transfer,
        ricci_f_skew: skew,
        ricci_f_anti_invariance: anti,
    }
}

/// `½ Σ ε_i R̃(e_i, F e_i, Z, F W)` together with its comparison to `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRicci {
    pub matrix: Matrix,
    /// Least-squares `c` in `matrix ≈ c · S`; `None` when `S` vanishes.
    pub c: Option<f64>,
    /// `max |matrix − c · S|` (or `max |matrix|` when `c` is undefined).
    pub deviation: f64,
}

pub fn ricci_via_frame(bundle: &FieldBundle, x: &Point) -> Result<FrameRicci, FieldError> {
    let pg = PointGeometry::at(bundle, x)?;
    let sj = bundle.structure_at(x)?;
    frame_ricci_at(&pg, &sj.f)
}

pub fn frame_ricci_at(pg: &PointGeometry, f: &Matrix) -> Result<FrameRicci, FieldError> {
    let matrix = frame_ricci_matrix(pg, f)?;
    let c = fit_ratio(&[(&matrix, &pg.curvature.ricci)]);
    let deviation = deviation_from(&matrix, &pg.curvature.ricci, c);
    Ok(FrameRicci { matrix, c, deviation })
}

pub fn frame_ricci_matrix(pg: &PointGeometry, f: &Matrix) -> Result<Matrix, FieldError> {
    let frame = pseudo_orthonormal_frame(pg.g())?;
    Ok(f_contraction(&pg.curvature.riemann_low, f, &frame) * 0.5)
}

/// Least-squares `c` minimizing `Σ |M − c S|²` over all pairs; `None` if
/// every `S` is zero.
pub fn fit_ratio(pairs: &[(&Matrix, &Matrix)]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (m, s) in pairs {
        num += m.dot(s);
        den += s.dot(s);
    }
    (den > 0.0).then(|| num / den)
}

pub fn deviation_from(m: &Matrix, s: &Matrix, c: Option<f64>) -> f64 {
    match c {
        Some(c) => max_abs(&(m - s * c)),
        None => max_abs(m),
    }
}
