//! Dense pointwise tensors in the coordinate basis.

use std::ops::{Index, IndexMut};

pub type Matrix = nalgebra::DMatrix<f64>;

/// Slot variances: `upper` contravariant indices followed by `lower`
/// covariant ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Valence {
    pub upper: u8,
    pub lower: u8,
}

impl Valence {
    pub const fn new(upper: u8, lower: u8) -> Self {
        Valence { upper, lower }
    }
}

macro_rules! dense_tensor {
    ($name:ident, $rank:literal) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            dim: usize,
            pub valence: Valence,
            data: Vec<f64>,
        }

        impl $name {
            pub fn zeros(dim: usize, valence: Valence) -> Self {
                $name {
                    dim,
                    valence,
                    data: vec![0.0; dim.pow($rank)],
                }
            }

            pub fn dim(&self) -> usize {
                self.dim
            }

            #[inline]
            fn offset(&self, idx: [usize; $rank]) -> usize {
                idx.iter().fold(0, |acc, &i| {
                    debug_assert!(i < self.dim);
                    acc * self.dim + i
                })
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.data
            }

            pub fn max_abs(&self) -> f64 {
                self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
            }

            /// All multi-indices in row-major order.
            pub fn indices(&self) -> impl Iterator<Item = [usize; $rank]> {
                let dim = self.dim;
                (0..dim.pow($rank)).map(move |mut flat| {
                    let mut idx = [0; $rank];
                    for slot in idx.iter_mut().rev() {
                        *slot = flat % dim;
                        flat /= dim;
                    }
                    idx
                })
            }

            /// Fills every component from `f`.
            pub fn from_fn(dim: usize, valence: Valence, mut f: impl FnMut([usize; $rank]) -> f64) -> Self {
                let mut t = $name::zeros(dim, valence);
                for idx in t.indices().collect::<Vec<_>>() {
                    t[idx] = f(idx);
                }
                t
            }

            pub fn max_abs_diff(&self, other: &$name) -> f64 {
                self.data
                    .iter()
                    .zip(&other.data)
                    .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
            }
        }

        impl Index<[usize; $rank]> for $name {
            type Output = f64;
            fn index(&self, idx: [usize; $rank]) -> &f64 {
                &self.data[self.offset(idx)]
            }
        }

        impl IndexMut<[usize; $rank]> for $name {
            fn index_mut(&mut self, idx: [usize; $rank]) -> &mut f64 {
                let o = self.offset(idx);
                &mut self.data[o]
            }
        }
    };
}

dense_tensor!(Tensor3, 3);
dense_tensor!(Tensor4, 4);

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_layout() {
        let t = Tensor3::from_fn(2, Valence::new(1, 2), |[a, b, c]| (100 * a + 10 * b + c) as f64);
        assert_eq!(t.as_slice(), &[0.0, 1.0, 10.0, 11.0, 100.0, 101.0, 110.0, 111.0]);
        assert_eq!(t[[1, 0, 1]], 101.0);
        let idx: Vec<_> = t.indices().take(3).collect();
        assert_eq!(idx, vec![[0, 0, 0], [0, 0, 1], [0, 1, 0]]);
    }

    #[test]
    fn max_norms() {
        let mut t = Tensor4::zeros(2, Valence::new(0, 4));
        t[[1, 0, 1, 0]] = -3.0;
        assert_eq!(t.max_abs(), 3.0);
        let z = Tensor4::zeros(2, Valence::new(0, 4));
        assert_eq!(t.max_abs_diff(&z), 3.0);
    }
}
