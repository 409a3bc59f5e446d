//! Independent finite-difference oracles and input generators shared by the
//! integration tests. Nothing here touches jets or the geometry module.

#![allow(dead_code)]

use nalgebra::DMatrix;
use paraverify::exprlang::{parse, Bindings, Carrier, Expr};
use paraverify::jets::{Elementary, JetError};
use paraverify::manifold::SplitMix64;
use rug::Float;

/// Working precision of the multiprecision oracle, in bits.
pub const MP_BITS: u32 = 200;

/// Real carrier backed by MPFR, used to evaluate finite-difference stencils
/// without the `ε/h²` roundoff of double precision.
#[derive(Clone, Debug)]
pub struct Mp(pub Float);

impl Mp {
    pub fn from_f64(v: f64) -> Mp {
        Mp(Float::with_val(MP_BITS, v))
    }
}

impl Carrier for Mp {
    fn constant(value: f64, _dim: usize) -> Self {
        Mp::from_f64(value)
    }
    fn value(&self) -> f64 {
        self.0.to_f64()
    }
    fn add(&self, rhs: &Self) -> Result<Self, JetError> {
        Ok(Mp(Float::with_val(MP_BITS, &self.0 + &rhs.0)))
    }
    fn sub(&self, rhs: &Self) -> Result<Self, JetError> {
        Ok(Mp(Float::with_val(MP_BITS, &self.0 - &rhs.0)))
    }
    fn mul(&self, rhs: &Self) -> Result<Self, JetError> {
        Ok(Mp(Float::with_val(MP_BITS, &self.0 * &rhs.0)))
    }
    fn div(&self, rhs: &Self) -> Result<Self, JetError> {
        if rhs.0.is_zero() {
            return Err(JetError::DivisionByZero);
        }
        Ok(Mp(Float::with_val(MP_BITS, &self.0 / &rhs.0)))
    }
    fn neg(&self) -> Self {
        Mp(Float::with_val(MP_BITS, -&self.0))
    }
    fn apply(&self, function: Elementary) -> Result<Self, JetError> {
        function.check_domain(self.value())?;
        let x = self.0.clone();
        Ok(Mp(match function {
            Elementary::Sin => x.sin(),
            Elementary::Cos => x.cos(),
            Elementary::Tan => x.tan(),
            Elementary::Exp => x.exp(),
            Elementary::Log => x.ln(),
            Elementary::Sinh => x.sinh(),
            Elementary::Cosh => x.cosh(),
            Elementary::Tanh => x.tanh(),
            Elementary::Sqrt => x.sqrt(),
        }))
    }
    fn is_finite(&self) -> bool {
        self.0.is_finite()
    }
}

/// Gradient and Hessian of `e` by central differences with one Richardson
/// step on (h, 2h). Stencil values are computed in `MP_BITS` precision so the
/// result is limited by truncation only.
pub fn mp_gradient_hessian(e: &Expr, names: &[String], x: &[f64], h: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = x.len();
    let at = |moves: &[(usize, f64)]| -> Float {
        let mut y: Vec<Mp> = x.iter().map(|&v| Mp::from_f64(v)).collect();
        for &(i, d) in moves {
            y[i].0 += d;
        }
        e.evaluate(&Bindings::new(names, &y)).expect("finite on the stencil").0
    };
    let f0 = at(&[]);
    let first = |i: usize, s: f64| -> Float { (at(&[(i, s)]) - at(&[(i, -s)])) / (2.0 * s) };
    let second = |i: usize, j: usize, s: f64| -> Float {
        if i == j {
            (at(&[(i, s)]) - Float::with_val(MP_BITS, &f0 * 2u32) + at(&[(i, -s)])) / (s * s)
        } else {
            (at(&[(i, s), (j, s)]) - at(&[(i, s), (j, -s)]) - at(&[(i, -s), (j, s)]) + at(&[(i, -s), (j, -s)]))
                / (4.0 * s * s)
        }
    };
    let richardson = |fine: Float, coarse: Float| -> f64 { ((fine * 4u32 - coarse) / 3u32).to_f64() };
    let grad = (0..n).map(|i| richardson(first(i, h), first(i, 2.0 * h))).collect();
    let mut hess = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = richardson(second(i, j, h), second(i, j, 2.0 * h));
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    (grad, hess)
}

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(i, d) in moves {
        y[i] += d;
    }
    y
}

/// Central first difference with one Richardson step on (h, 2h).
pub fn fd_partial<T, F>(f: F, x: &[f64], i: usize, h: f64) -> T
where
    F: Fn(&[f64]) -> T,
    T: std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Clone,
{
    let d = |step: f64| (f(&shifted(x, &[(i, step)])) - f(&shifted(x, &[(i, -step)]))) * (0.5 / step);
    let coarse = d(2.0 * h);
    let fine = d(h);
    fine * (4.0 / 3.0) + coarse * (-1.0 / 3.0)
}

/// Christoffel symbols `Γ^k_ij` at `[k][i][j]` from differenced metric values.
pub fn fd_christoffel(g: &dyn Fn(&[f64]) -> DMatrix<f64>, x: &[f64], h: f64) -> Vec<Vec<Vec<f64>>> {
    let n = x.len();
    let ginv = g(x).try_inverse().expect("nondegenerate metric");
    let dg: Vec<DMatrix<f64>> = (0..n).map(|k| fd_partial(|y: &[f64]| g(y), x, k, h)).collect();
    let mut gamma = vec![vec![vec![0.0; n]; n]; n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                gamma[k][i][j] = 0.5
                    * (0..n)
                        .map(|l| ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]))
                        .sum::<f64>();
            }
        }
    }
    gamma
}

pub struct FdCurvature {
    /// `R̃_ijkl` at `[i][j][k][l]`.
    pub riemann_low: Vec<f64>,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
}

/// Curvature from nested differences: `Γ` from differenced `g`, `∂Γ` from
/// differenced `Γ`.
pub fn fd_curvature(g: &dyn Fn(&[f64]) -> DMatrix<f64>, x: &[f64], h_inner: f64, h_outer: f64) -> FdCurvature {
    let n = x.len();
    let flat = |gm: Vec<Vec<Vec<f64>>>| DMatrix::from_fn(n * n, n, |r, c| gm[r / n][r % n][c]);
    let gamma_at = |y: &[f64]| flat(fd_christoffel(g, y, h_inner));
    let gamma = gamma_at(x);
    // dgamma[m][(k*n + i, j)] = ∂_m Γ^k_ij
    let dgamma: Vec<DMatrix<f64>> = (0..n).map(|m| fd_partial(&gamma_at, x, m, h_outer)).collect();
    let gm = |k: usize, i: usize, j: usize| gamma[(k * n + i, j)];
    let dgm = |m: usize, k: usize, i: usize, j: usize| dgamma[m][(k * n + i, j)];
    let mut up = vec![0.0; n.pow(4)];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = dgm(i, l, j, k) - dgm(j, l, i, k);
                    for m in 0..n {
                        v += gm(l, i, m) * gm(m, j, k) - gm(l, j, m) * gm(m, i, k);
                    }
                    up[((l * n + i) * n + j) * n + k] = v;
                }
            }
        }
    }
    let g0 = g(x);
    let ginv = g0.clone().try_inverse().expect("nondegenerate metric");
    let mut low = vec![0.0; n.pow(4)];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    low[((i * n + j) * n + k) * n + l] =
                        (0..n).map(|m| g0[(l, m)] * up[((m * n + i) * n + j) * n + k]).sum();
                }
            }
        }
    }
    let ricci = DMatrix::from_fn(n, n, |j, k| (0..n).map(|i| up[((i * n + i) * n + j) * n + k]).sum());
    let scalar = ginv.component_mul(&ricci).sum();
    FdCurvature {
        riemann_low: low,
        ricci,
        scalar,
    }
}

/// One RK4 flow step of a vector field.
fn flow(v: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], t: f64, steps: usize) -> Vec<f64> {
    let mut y = x.to_vec();
    let dt = t / steps as f64;
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + s * q).collect() };
    for _ in 0..steps {
        let k1 = v(&y);
        let k2 = v(&axpy(&y, 0.5 * dt, &k1));
        let k3 = v(&axpy(&y, 0.5 * dt, &k2));
        let k4 = v(&axpy(&y, dt, &k3));
        for i in 0..y.len() {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// `£_V g = d/dt (φ_t^* g)` at `t = 0`, with the flow integrated by RK4 and
/// the pullback Jacobian differenced.
pub fn flow_lie_derivative(g: &dyn Fn(&[f64]) -> DMatrix<f64>, v: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], t: f64) -> DMatrix<f64> {
    let n = x.len();
    let pullback = |s: f64| -> DMatrix<f64> {
        let y = flow(v, x, s, 4);
        let jac = DMatrix::from_fn(n, n, |a, i| {
            let h = 1e-5;
            let p = flow(v, &shifted(x, &[(i, h)]), s, 4);
            let m = flow(v, &shifted(x, &[(i, -h)]), s, 4);
            (p[a] - m[a]) / (2.0 * h)
        });
        jac.transpose() * g(&y) * jac
    };
    let d = |s: f64| (pullback(s) - pullback(-s)) * (0.5 / s);
    d(t) * (4.0 / 3.0) - d(2.0 * t) * (1.0 / 3.0)
}

/// `|a − b| ≤ atol + rtol · |b|`.
pub fn close(a: f64, b: f64, rtol: f64, atol: f64) -> bool {
    (a - b).abs() <= atol + rtol * b.abs()
}

/// Random well-defined expressions over the given variables. Every
/// elementary function is applied to an argument inside its domain
/// (`log(1 + u^2)`, `sqrt(1 + u^2)`, `u / (1 + v^2)`), so evaluation never
/// fails.
pub struct ExprGen<'a> {
    pub rng: SplitMix64,
    pub vars: &'a [&'a str],
}

impl ExprGen<'_> {
    fn coefficient(&mut self) -> String {
        let c = self.rng.next_in(-2.0, 2.0);
        format!("({c:?})")
    }

    fn pick(&mut self, k: u64) -> u64 {
        self.rng.next_u64() % k
    }

    pub fn text(&mut self, depth: usize) -> String {
        if depth <= 1 || self.pick(5) == 0 {
            return if self.pick(3) == 0 {
                self.coefficient()
            } else {
                let i = self.pick(self.vars.len() as u64) as usize;
                self.vars[i].to_string()
            };
        }
        let d = depth - 1;
        match self.pick(12) {
            0 => format!("({} + {})", self.text(d), self.text(d)),
            1 => format!("({} - {})", self.text(d), self.text(d)),
            2 | 3 => format!("({} * {})", self.text(d), self.text(d)),
            4 => format!("{} * {}", self.coefficient(), self.text(d)),
            5 => format!("({} / (1 + {}^2))", self.text(d), self.text(d)),
            6 => format!("sin({})", self.text(d)),
            7 => format!("cos({})", self.text(d)),
            8 => format!("tanh({})", self.text(d)),
            9 => format!("exp(tanh({}))", self.text(d)),
            10 => format!("log(1 + {}^2)", self.text(d)),
            _ => format!("sqrt(1 + ({})^2)", self.text(d)),
        }
    }

    pub fn expr(&mut self, depth: usize) -> Expr {
        parse(&self.text(depth)).expect("generated expressions parse")
    }
}
