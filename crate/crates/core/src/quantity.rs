//! Single-point evaluation of named quantities, as printed by `eval`.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::PointGeometry;
use crate::manifold::{FieldBundle, FieldError, Point};
use crate::soliton::{einstein_flow_velocity, soliton_residual_at, SolitonKind};
use crate::special_tensors::{TensorError, TensorFamily};
use crate::tensor::{Matrix, Tensor3, Tensor4};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Ricci,
    Scalar,
    Riemann,
    Christoffel,
    QuasiConformal,
    PseudoProjective,
    W2,
    Soliton,
    Flow,
}

impl Quantity {
    pub const ALL: [Quantity; 9] = [
        Quantity::Ricci,
        Quantity::Scalar,
        Quantity::Riemann,
        Quantity::Christoffel,
        Quantity::QuasiConformal,
        Quantity::PseudoProjective,
        Quantity::W2,
        Quantity::Soliton,
        Quantity::Flow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Ricci => "ricci",
            Quantity::Scalar => "scalar",
            Quantity::Riemann => "riemann",
            Quantity::Christoffel => "christoffel",
            Quantity::QuasiConformal => "quasi_conformal",
            Quantity::PseudoProjective => "pseudo_projective",
            Quantity::W2 => "w2",
            Quantity::Soliton => "soliton",
            Quantity::Flow => "flow",
        }
    }
}

impl FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Quantity::ALL.into_iter().find(|q| q.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Quantity::ALL.iter().map(|q| q.name()).collect();
            format!("unknown quantity `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuantityValue {
    Scalar(f64),
    Matrix(Matrix),
    Rank3(Tensor3),
    Rank4(Tensor4),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantityError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// `riemann` is the lowered `R̃_ijkl`; `christoffel` is `Γ^k_ij` at
/// `[k][i][j]`; `soliton` is the conformal Einstein residual matrix.
pub fn evaluate_quantity(bundle: &FieldBundle, x: &Point, q: Quantity) -> Result<QuantityValue, QuantityError> {
    let pg = PointGeometry::at(bundle, x)?;
    let curv = &pg.curvature;
    Ok(match q {
        Quantity::Ricci => QuantityValue::Matrix(curv.ricci.clone()),
        Quantity::Scalar => QuantityValue::Scalar(curv.scalar),
        Quantity::Riemann => QuantityValue::Rank4(curv.riemann_low.clone()),
        Quantity::Christoffel => QuantityValue::Rank3(pg.christoffel.gamma.clone()),
        Quantity::QuasiConformal => {
            QuantityValue::Rank4(TensorFamily::QuasiConformal.evaluate(curv, pg.g(), &bundle.tensor_params)?)
        }
        Quantity::PseudoProjective => {
            QuantityValue::Rank4(TensorFamily::PseudoProjective.evaluate(curv, pg.g(), &bundle.tensor_params)?)
        }
        Quantity::W2 => QuantityValue::Rank4(TensorFamily::W2.evaluate(curv, pg.g(), &bundle.tensor_params)?),
        Quantity::Soliton => {
            let v = bundle.vector_at(x).ok_or(FieldError::MissingVectorField)??;
            QuantityValue::Matrix(soliton_residual_at(SolitonKind::ConformalEinstein, &pg, &v, &bundle.soliton).matrix)
        }
        Quantity::Flow => QuantityValue::Matrix(einstein_flow_velocity(curv, pg.g())),
    })
}

#[derive(Serialize)]
struct Shaped {
    shape: Vec<usize>,
    /// Row-major components.
    data: Vec<f64>,
}

impl QuantityValue {
    pub fn shape(&self) -> Vec<usize> {
        match self {
            QuantityValue::Scalar(_) => vec![],
            QuantityValue::Matrix(m) => vec![m.nrows(), m.ncols()],
            QuantityValue::Rank3(t) => vec![t.dim(); 3],
            QuantityValue::Rank4(t) => vec![t.dim(); 4],
        }
    }

    /// Row-major components.
    pub fn components(&self) -> Vec<f64> {
        match self {
            QuantityValue::Scalar(v) => vec![*v],
            QuantityValue::Matrix(m) => {
                let mut out = Vec::with_capacity(m.len());
                for i in 0..m.nrows() {
                    out.extend(m.row(i).iter());
                }
                out
            }
            QuantityValue::Rank3(t) => t.as_slice().to_vec(),
            QuantityValue::Rank4(t) => t.as_slice().to_vec(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = crate::report::to_json(&Shaped {
            shape: self.shape(),
            data: self.components(),
        });
        s.push('\n');
        s
    }

    /// A scalar on one line, a matrix as rows, higher ranks as one
    /// `[i][j]... = value` line per nonzero component.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self {
            QuantityValue::Scalar(v) => {
                let _ = writeln!(out, "{v:.16e}");
            }
            QuantityValue::Matrix(m) => {
                for i in 0..m.nrows() {
                    let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:>24.16e}")).collect();
                    let _ = writeln!(out, "{}", row.join(" "));
                }
            }
            QuantityValue::Rank3(_) | QuantityValue::Rank4(_) => {
                let n = self.shape()[0];
                let rank = self.shape().len();
                for (flat, v) in self.components().into_iter().enumerate() {
                    if v == 0.0 {
                        continue;
                    }
                    let mut idx = vec![0; rank];
                    let mut rest = flat;
                    for slot in idx.iter_mut().rev() {
                        *slot = rest % n;
                        rest /= n;
                    }
                    let label: String = idx.iter().map(|i| format!("[{i}]")).collect();
                    let _ = writeln!(out, "{label} = {v:.16e}");
                }
                if out.is_empty() {
                    out.push_str("all components are zero\n");
                }
            }
        }
        out
    }
}
