//! Quasi-conformal, pseudo-projective and W₂ curvature tensors in lowered
//! form `T̃_ijkl = T̃(∂_i, ∂_j, ∂_k, ∂_l)`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::geometry::{f_contraction, pseudo_orthonormal_frame, CurvatureValue, PointGeometry};
use crate::manifold::{FieldError, TensorParams};
use crate::tensor::{max_abs, Matrix, Tensor4, Valence};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("{name} must be nonzero for the {tensor} tensor")]
    ZeroParameter { name: &'static str, tensor: &'static str },
    #[error("the W2 tensor needs n > 2, got {0}")]
    Dimension(usize),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TensorFamily {
    QuasiConformal,
    PseudoProjective,
    W2,
}

impl TensorFamily {
    pub const ALL: [TensorFamily; 3] = [TensorFamily::QuasiConformal, TensorFamily::PseudoProjective, TensorFamily::W2];

    pub fn name(self) -> &'static str {
        match self {
            TensorFamily::QuasiConformal => "quasi_conformal",
            TensorFamily::PseudoProjective => "pseudo_projective",
            TensorFamily::W2 => "w2",
        }
    }

    /// `(s, t)` with `Σ ε_i T̃(e_i, F e_i, Z, F W) = s·S(Z, W) + t·g(Z, W)` on
    /// a para-Kähler manifold, with signed indicators `ε_i = g(e_i, e_i)`.
    pub fn contraction_coefficients(self, params: &TensorParams, r: f64, n: usize) -> (f64, f64) {
        let nf = n as f64;
        match self {
            TensorFamily::QuasiConformal => (
                2.0 * params.alpha + 4.0 * params.beta,
                -2.0 * r / nf * (params.alpha / (nf - 1.0) + 2.0 * params.beta),
            ),
            TensorFamily::PseudoProjective => (
                2.0 * (params.a + params.b),
                -2.0 * r / nf * (params.a / (nf - 1.0) + params.b),
            ),
            TensorFamily::W2 => (2.0 * (nf - 2.0) / (nf - 1.0), 0.0),
        }
    }

    /// The same pair as given by the classical hand contraction. It agrees
    /// with [`TensorFamily::contraction_coefficients`] except for W₂, where
    /// the classical value drops the factor 2 on the `R̃` term and reads
    /// `(n − 3)/(n − 1)`.
    pub fn reference_coefficients(self, params: &TensorParams, r: f64, n: usize) -> (f64, f64) {
        match self {
            TensorFamily::W2 => ((n as f64 - 3.0) / (n as f64 - 1.0), 0.0),
            _ => self.contraction_coefficients(params, r, n),
        }
    }

    pub fn evaluate(self, curv: &CurvatureValue, g: &Matrix, params: &TensorParams) -> Result<Tensor4, TensorError> {
        match self {
            TensorFamily::QuasiConformal => quasi_conformal_at(curv, g, params.alpha, params.beta),
            TensorFamily::PseudoProjective => pseudo_projective_at(curv, g, params.a, params.b),
            TensorFamily::W2 => w2_at(curv, g),
        }
    }

    /// The combination whose vanishing breaks the flat-case argument:
    /// `α + 2β` or `a + b`. W₂ has none.
    pub fn degeneracy(self, params: &TensorParams) -> Option<f64> {
        match self {
            TensorFamily::QuasiConformal => Some(params.alpha + 2.0 * params.beta),
            TensorFamily::PseudoProjective => Some(params.a + params.b),
            TensorFamily::W2 => None,
        }
    }

    pub fn is_degenerate(self, params: &TensorParams) -> bool {
        let scale = match self {
            TensorFamily::QuasiConformal => params.alpha.abs() + 2.0 * params.beta.abs(),
            TensorFamily::PseudoProjective => params.a.abs() + params.b.abs(),
            TensorFamily::W2 => 0.0,
        };
        self.degeneracy(params).is_some_and(|d| d.abs() <= 1e-12 * scale)
    }
}

// g_jk g_il − g_ik g_jl
fn gg(g: &Matrix, [i, j, k, l]: [usize; 4]) -> f64 {
    g[(j, k)] * g[(i, l)] - g[(i, k)] * g[(j, l)]
}

/// `C̃ = αR̃ + β[S_jk g_il − S_ik g_jl + g_jk S_il − g_ik S_jl]
///      − (r/n)(α/(n−1) + 2β)[g_jk g_il − g_ik g_jl]`.
pub fn quasi_conformal_at(curv: &CurvatureValue, g: &Matrix, alpha: f64, beta: f64) -> Result<Tensor4, TensorError> {
    if alpha == 0.0 {
        return Err(TensorError::ZeroParameter {
            name: "alpha",
            tensor: "quasi-conformal",
        });
    }
    let n = curv.dim();
    let nf = n as f64;
    let (r, s) = (&curv.riemann_low, &curv.ricci);
    let k = curv.scalar / nf * (alpha / (nf - 1.0) + 2.0 * beta);
    Ok(Tensor4::from_fn(n, Valence::new(0, 4), |idx| {
        let [i, j, kk, l] = idx;
        let mixed = s[(j, kk)] * g[(i, l)] - s[(i, kk)] * g[(j, l)] + g[(j, kk)] * s[(i, l)] - g[(i, kk)] * s[(j, l)];
        alpha * r[idx] + beta * mixed - k * gg(g, idx)
    }))
}

/// `P̄̃ = aR̃ + b[S_jk g_il − S_ik g_jl] − (r/n)(a/(n−1) + b)[g_jk g_il − g_ik g_jl]`.
pub fn pseudo_projective_at(curv: &CurvatureValue, g: &Matrix, a: f64, b: f64) -> Result<Tensor4, TensorError> {
    for (name, v) in [("a", a), ("b", b)] {
        if v == 0.0 {
            return Err(TensorError::ZeroParameter {
                name,
                tensor: "pseudo-projective",
            });
        }
    }
    let n = curv.dim();
    let nf = n as f64;
    let (r, s) = (&curv.riemann_low, &curv.ricci);
    let k = curv.scalar / nf * (a / (nf - 1.0) + b);
    Ok(Tensor4::from_fn(n, Valence::new(0, 4), |idx| {
        let [i, j, kk, l] = idx;
        a * r[idx] + b * (s[(j, kk)] * g[(i, l)] - s[(i, kk)] * g[(j, l)]) - k * gg(g, idx)
    }))
}

/// `W̃₂ = R̃ + (1/(n−1))[g_ik S_jl − g_jk S_il]`.
pub fn w2_at(curv: &CurvatureValue, g: &Matrix) -> Result<Tensor4, TensorError> {
    let n = curv.dim();
    if n <= 2 {
        return Err(TensorError::Dimension(n));
    }
    let (r, s) = (&curv.riemann_low, &curv.ricci);
    let w = 1.0 / (n as f64 - 1.0);
    Ok(Tensor4::from_fn(n, Valence::new(0, 4), |idx| {
        let [i, j, k, l] = idx;
        r[idx] + w * (g[(i, k)] * s[(j, l)] - g[(j, k)] * s[(i, l)])
    }))
}

pub fn flatness_norm(t: &Tensor4) -> f64 {
    t.max_abs()
}

/// Flatness threshold `tol · max|g|² · max(1, |r|)`.
pub fn flatness_threshold(tolerance: f64, g: &Matrix, scalar: f64) -> f64 {
    let gm = max_abs(g);
    tolerance * gm * gm * scalar.abs().max(1.0)
}

/// `max |T_ijkl + T_jikl|`.
pub fn antisymmetry_residual(t: &Tensor4) -> f64 {
    t.indices()
        .map(|[i, j, k, l]| (t[[i, j, k, l]] + t[[j, i, k, l]]).abs())
        .fold(0.0, f64::max)
}

/// `max |T_ijkl − T_klij|`.
pub fn pair_symmetry_residual(t: &Tensor4) -> f64 {
    t.indices()
        .map(|[i, j, k, l]| (t[[i, j, k, l]] - t[[k, l, i, j]]).abs())
        .fold(0.0, f64::max)
}

/// Least-squares fit `M ≈ s·S + t·g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionFit {
    /// `None` when `S` vanishes and the coefficient is unidentifiable.
    pub s_coefficient: Option<f64>,
    pub g_coefficient: f64,
    pub residual: f64,
}

pub fn fit_ricci_metric(m: &Matrix, s: &Matrix, g: &Matrix) -> ContractionFit {
    let rhs = DVector::from_iterator(m.len(), m.iter().copied());
    let s_scale = max_abs(s);
    if s_scale <= 1e-14 * max_abs(g).max(1.0) {
        let t = m.dot(g) / g.dot(g);
        return ContractionFit {
            s_coefficient: None,
            g_coefficient: t,
            residual: max_abs(&(m - g * t)),
        };
    }
    let a = DMatrix::from_fn(m.len(), 2, |row, col| if col == 0 { s.as_slice()[row] } else { g.as_slice()[row] });
    let svd = a.svd(true, true);
    let coef = svd.solve(&rhs, 1e-12).expect("svd computed with both bases");
    let (sc, tc) = (coef[0], coef[1]);
    ContractionFit {
        s_coefficient: Some(sc),
        g_coefficient: tc,
        residual: max_abs(&(m - s * sc - g * tc)),
    }
}

/// `Σ ε_i T̃(e_i, F e_i, ·, F ·)` of the selected tensor, and its fit.
pub fn contraction_fit(
    family: TensorFamily,
    pg: &PointGeometry,
    f: &Matrix,
    params: &TensorParams,
) -> Result<(Tensor4, Matrix, ContractionFit), TensorError> {
    let t = family.evaluate(&pg.curvature, pg.g(), params)?;
    let frame = pseudo_orthonormal_frame(pg.g())?;
    let m = f_contraction(&t, f, &frame);
    let fit = fit_ricci_metric(&m, &pg.curvature.ricci, pg.g());
    Ok((t, m, fit))
}
