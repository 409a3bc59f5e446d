//! Deterministic sample points.
//!
//! Random plans draw from SplitMix64: each coordinate is
//! `u = (next_u64() >> 11) · 2⁻⁵³`, mapped to `lo + (hi − lo) · u`, with
//! coordinates drawn in index order and points in sequence order. The
//! resulting coordinates are reproducible bit for bit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point of the chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    pub fn origin(n: usize) -> Self {
        Point { coords: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point { coords }
    }
}

impl From<&[f64]> for Point {
    fn from(coords: &[f64]) -> Self {
        Point { coords: coords.to_vec() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn next_in(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.next_unit()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SamplePlan {
    List(Vec<Point>),
    RandomBox {
        count: usize,
        low: Vec<f64>,
        high: Vec<f64>,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("sample count must be at least 1")]
    EmptyPlan,
    #[error("point {index} has {found} coordinates, expected {expected}")]
    PointLength {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("box has {found} intervals, expected {expected}")]
    BoxLength { found: usize, expected: usize },
    #[error("box interval {index} is empty: {low} >= {high}")]
    EmptyInterval { index: usize, low: f64, high: f64 },
}

impl SamplePlan {
    /// A random plan over the cube `[low, high]^n`.
    pub fn cube(count: usize, n: usize, low: f64, high: f64, seed: u64) -> Self {
        SamplePlan::RandomBox {
            count,
            low: vec![low; n],
            high: vec![high; n],
            seed,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            SamplePlan::List(_) => None,
            SamplePlan::RandomBox { seed, .. } => Some(*seed),
        }
    }

    pub fn with_seed(mut self, new_seed: u64) -> Self {
        if let SamplePlan::RandomBox { seed, .. } = &mut self {
            *seed = new_seed;
        }
        self
    }

    /// Overrides the count of a random plan; keeps the first `count` points
    /// of a list plan.
    pub fn with_count(mut self, new_count: usize) -> Self {
        match &mut self {
            SamplePlan::RandomBox { count, .. } => *count = new_count,
            SamplePlan::List(points) => points.truncate(new_count),
        }
        self
    }
}

pub fn sample_points(plan: &SamplePlan, n: usize) -> Result<Vec<Point>, SampleError> {
    match plan {
        SamplePlan::List(points) => {
            if points.is_empty() {
                return Err(SampleError::EmptyPlan);
            }
            for (index, p) in points.iter().enumerate() {
                if p.dim() != n {
                    return Err(SampleError::PointLength {
                        index,
                        found: p.dim(),
                        expected: n,
                    });
                }
            }
            Ok(points.clone())
        }
        SamplePlan::RandomBox {
            count,
            low,
            high,
            seed,
        } => {
            if *count == 0 {
                return Err(SampleError::EmptyPlan);
            }
            for found in [low.len(), high.len()] {
                if found != n {
                    return Err(SampleError::BoxLength { found, expected: n });
                }
            }
            for (index, (&lo, &hi)) in low.iter().zip(high).enumerate() {
                if !(lo < hi) {
                    return Err(SampleError::EmptyInterval { index, low: lo, high: hi });
                }
            }
            let mut rng = SplitMix64::new(*seed);
            Ok((0..*count)
                .map(|_| Point::new((0..n).map(|i| rng.next_in(low[i], high[i])).collect()))
                .collect())
        }
    }
}
