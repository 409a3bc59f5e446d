//! Levi-Civita connection and curvature in the coordinate basis.
//!
//! Conventions:
//!
//! * `Γ^k_ij = ½ g^kl (∂_i g_jl + ∂_j g_il − ∂_l g_ij)`, stored at `[[k, i, j]]`.
//! * `R(∂_i, ∂_j) ∂_k = R^l_ijk ∂_l` with
//!   `R^l_ijk = ∂_i Γ^l_jk − ∂_j Γ^l_ik + Γ^l_im Γ^m_jk − Γ^l_jm Γ^m_ik`,
//!   stored at `[[l, i, j, k]]`.
//! * `R̃_ijkl = g(R(∂_i, ∂_j) ∂_k, ∂_l) = g_lm R^m_ijk`.
//! * `S_jk = R^i_ijk`, `r = g^jk S_jk`, `Q^i_j = g^ik S_kj`.
//!
//! `∂Γ` is assembled from the metric jet (`∂g`, `∂²g`) directly, so no
//! derivative in this module is approximated.

use nalgebra::SymmetricEigen;

use crate::manifold::{
    inverse_metric, FieldBundle, FieldError, MetricJetValue, Point, StructureJet, VectorJet, DEGENERACY_THRESHOLD,
};
use crate::tensor::{Matrix, Tensor3, Tensor4, Valence};

#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelValue {
    /// `Γ^k_ij` at `[[k, i, j]]`.
    pub gamma: Tensor3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureValue {
    /// `R^l_ijk` at `[[l, i, j, k]]`.
    pub riemann_up: Tensor4,
    /// `R̃_ijkl` at `[[i, j, k, l]]`.
    pub riemann_low: Tensor4,
    pub ricci: Matrix,
    pub scalar: f64,
    /// `Q^i_j` at `(i, j)`.
    pub q_op: Matrix,
}

impl CurvatureValue {
    pub fn dim(&self) -> usize {
        self.ricci.nrows()
    }
}

/// A pseudo-orthonormal frame: `g(e_i, e_j) = ε_i δ_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameValue {
    /// Column `i` is `e_i`.
    pub vectors: Matrix,
    /// Indicators `ε_i = ±1`.
    pub signs: Vec<f64>,
}

impl FrameValue {
    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    /// `max |g(e_i, e_j) − ε_i δ_ij|`.
    pub fn gram_residual(&self, g: &Matrix) -> f64 {
        let gram = self.vectors.transpose() * g * &self.vectors;
        let mut worst = 0.0_f64;
        for i in 0..self.len() {
            for j in 0..self.len() {
                let target = if i == j { self.signs[i] } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }
}

pub fn christoffel_at(mj: &MetricJetValue, ginv: &Matrix) -> ChristoffelValue {
    let n = mj.dim();
    let dg = &mj.dg;
    let mut gamma = Tensor3::zeros(n, Valence::new(1, 2));
    for i in 0..n {
        for j in i..n {
            for k in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += ginv[(k, l)] * (dg[[i, j, l]] + dg[[j, i, l]] - dg[[l, i, j]]);
                }
                gamma[[k, i, j]] = 0.5 * acc;
                gamma[[k, j, i]] = 0.5 * acc;
            }
        }
    }
    ChristoffelValue { gamma }
}

/// `∂_m Γ^k_ij` at `[[m, k, i, j]]`.
pub fn christoffel_derivative_at(mj: &MetricJetValue, ginv: &Matrix) -> Tensor4 {
    let n = mj.dim();
    let (dg, ddg) = (&mj.dg, &mj.ddg);
    // Γ_l,ij (first kind)
    let lowered = Tensor3::from_fn(n, Valence::new(0, 3), |[l, i, j]| {
        0.5 * (dg[[i, j, l]] + dg[[j, i, l]] - dg[[l, i, j]])
    });
    let mut out = Tensor4::zeros(n, Valence::new(1, 3));
    for m in 0..n {
        // ∂_m g^kl = −g^ka ∂_m g_ab g^bl
        let dg_m = Matrix::from_fn(n, n, |a, b| dg[[m, a, b]]);
        let dginv = -(ginv * dg_m * ginv);
        for i in 0..n {
            for j in i..n {
                for k in 0..n {
                    let mut acc = 0.0;
                    for l in 0..n {
                        let d_lowered =
                            0.5 * (ddg[[m, i, j, l]] + ddg[[m, j, i, l]] - ddg[[m, l, i, j]]);
                        acc += dginv[(k, l)] * lowered[[l, i, j]] + ginv[(k, l)] * d_lowered;
                    }
                    out[[m, k, i, j]] = acc;
                    out[[m, k, j, i]] = acc;
                }
            }
        }
    }
    out
}

/// Full curvature from the connection and its derivative.
pub fn riemann_at(mj: &MetricJetValue, ginv: &Matrix, gamma: &ChristoffelValue, dgamma: &Tensor4) -> CurvatureValue {
    let n = mj.dim();
    let g = &mj.g;
    let gm = &gamma.gamma;
    let mut up = Tensor4::zeros(n, Valence::new(1, 3));
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = dgamma[[i, l, j, k]] - dgamma[[j, l, i, k]];
                    for m in 0..n {
                        v += gm[[l, i, m]] * gm[[m, j, k]] - gm[[l, j, m]] * gm[[m, i, k]];
                    }
                    up[[l, i, j, k]] = v;
                }
            }
        }
    }
    let low = Tensor4::from_fn(n, Valence::new(0, 4), |[i, j, k, l]| {
        (0..n).map(|m| g[(l, m)] * up[[m, i, j, k]]).sum()
    });
    let ricci = ricci_at(&up);
    let scalar = scalar_curvature_at(&ricci, ginv);
    let q_op = ricci_operator_at(&ricci, ginv);
    CurvatureValue {
        riemann_up: up,
        riemann_low: low,
        ricci,
        scalar,
        q_op,
    }
}

/// `S_jk = R^i_ijk`.
pub fn ricci_at(riemann_up: &Tensor4) -> Matrix {
    let n = riemann_up.dim();
    Matrix::from_fn(n, n, |j, k| (0..n).map(|i| riemann_up[[i, i, j, k]]).sum())
}

pub fn scalar_curvature_at(ricci: &Matrix, ginv: &Matrix) -> f64 {
    ginv.component_mul(ricci).sum()
}

/// `Q = g⁻¹ S`, so that `g(QX, Y) = S(X, Y)`.
pub fn ricci_operator_at(ricci: &Matrix, ginv: &Matrix) -> Matrix {
    ginv * ricci
}

/// `(∇_i F)^j_k` at `[[i, j, k]]`.
pub fn covariant_derivative_structure(structure: &StructureJet, gamma: &ChristoffelValue) -> Tensor3 {
    let n = structure.f.nrows();
    let (f, df, gm) = (&structure.f, &structure.df, &gamma.gamma);
    Tensor3::from_fn(n, Valence::new(1, 2), |[i, j, k]| {
        let mut v = df[[i, j, k]];
        for m in 0..n {
            v += gm[[j, i, m]] * f[(m, k)] - gm[[m, i, k]] * f[(j, m)];
        }
        v
    })
}

/// `(£_V g)_ij = V^k ∂_k g_ij + g_kj ∂_i V^k + g_ik ∂_j V^k`.
pub fn lie_derivative_metric_at(mj: &MetricJetValue, vector: &VectorJet) -> Matrix {
    let n = mj.dim();
    let (g, dg, v, dv) = (&mj.g, &mj.dg, &vector.v, &vector.dv);
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += v[k] * dg[[k, i, j]] + g[(k, j)] * dv[(i, k)] + g[(i, k)] * dv[(j, k)];
            }
            out[(i, j)] = acc;
            out[(j, i)] = acc;
        }
    }
    out
}

/// `div V = ∂_i V^i + Γ^i_ik V^k`.
pub fn divergence_at(gamma: &ChristoffelValue, vector: &VectorJet) -> f64 {
    let n = vector.v.len();
    let mut div = 0.0;
    for i in 0..n {
        div += vector.dv[(i, i)];
        for k in 0..n {
            div += gamma.gamma[[i, i, k]] * vector.v[k];
        }
    }
    div
}

/// Frame from the symmetric eigendecomposition `g = Σ μ_i v_i v_iᵀ`:
/// `e_i = v_i / √|μ_i|`, `ε_i = sign μ_i`.
///
/// Ordering is deterministic: eigenvalues descending; within a cluster of
/// equal eigenvalues, eigenvectors (normalized so the first nonzero
/// component is positive) in descending lexicographic order.
pub fn pseudo_orthonormal_frame(g: &Matrix) -> Result<FrameValue, FieldError> {
    let n = g.nrows();
    let eig = SymmetricEigen::new(g.clone());
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let threshold = DEGENERACY_THRESHOLD * scale;
    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n);
    for (idx, &mu) in eig.eigenvalues.iter().enumerate() {
        if !(mu.abs() > threshold) {
            return Err(FieldError::NullEigenvalue {
                eigenvalue: mu,
                threshold,
            });
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let lead = v.iter().copied().find(|c| c.abs() > 1e-14).unwrap_or(1.0);
        if lead < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
        pairs.push((mu, v));
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let tie = 1e-12 * scale.max(1.0);
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && (pairs[end - 1].0 - pairs[end].0).abs() <= tie {
            end += 1;
        }
        pairs[start..end].sort_by(|a, b| {
            b.1.iter()
                .zip(&a.1)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        start = end;
    }
    let mut vectors = Matrix::zeros(n, n);
    let mut signs = Vec::with_capacity(n);
    for (col, (mu, v)) in pairs.iter().enumerate() {
        let s = mu.abs().sqrt();
        for row in 0..n {
            vectors[(row, col)] = v[row] / s;
        }
        signs.push(mu.signum());
    }
    Ok(FrameValue { vectors, signs })
}

/// `M(Z, W) = Σ_i ε_i T̃(e_i, F e_i, Z, F W)` on coordinate arguments,
/// `M[(c, d)]` for `Z = ∂_c`, `W = ∂_d`.
pub fn f_contraction(t_low: &Tensor4, f: &Matrix, frame: &FrameValue) -> Matrix {
    let n = t_low.dim();
    let mut inner = Matrix::zeros(n, n);
    for (i, &eps) in frame.signs.iter().enumerate() {
        let e = frame.vectors.column(i);
        let fe = f * e;
        for a in 0..n {
            for b in 0..n {
                let w = eps * e[a] * fe[b];
                if w == 0.0 {
                    continue;
                }
                for c in 0..n {
                    for d in 0..n {
                        inner[(c, d)] += w * t_low[[a, b, c, d]];
                    }
                }
            }
        }
    }
    inner * f
}

/// Metric jet, inverse, connection and curvature at one point.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub point: Point,
    pub metric: MetricJetValue,
    pub ginv: Matrix,
    pub christoffel: ChristoffelValue,
    pub dchristoffel: Tensor4,
    pub curvature: CurvatureValue,
}

impl PointGeometry {
    pub fn at(bundle: &FieldBundle, point: &Point) -> Result<Self, FieldError> {
        let metric = bundle.metric_at(point)?;
        Self::from_metric(point.clone(), metric)
    }

    pub fn from_metric(point: Point, metric: MetricJetValue) -> Result<Self, FieldError> {
        let ginv = inverse_metric(&metric.g)?;
        let christoffel = christoffel_at(&metric, &ginv);
        let dchristoffel = christoffel_derivative_at(&metric, &ginv);
        let curvature = riemann_at(&metric, &ginv, &christoffel, &dchristoffel);
        Ok(PointGeometry {
            point,
            metric,
            ginv,
            christoffel,
            dchristoffel,
            curvature,
        })
    }

    pub fn g(&self) -> &Matrix {
        &self.metric.g
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }
}
