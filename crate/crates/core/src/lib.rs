//! Numerical verification of para-Kähler curvature identities and
//! conformal Einstein solitons.
//!
//! Charts are described by expressions ([`exprlang`]), differentiated
//! exactly with second-order jets ([`jets`]) and turned into curvature at
//! sample points ([`geometry`]). The checks live in [`parakahler`],
//! [`special_tensors`] and [`soliton`]. [`report`] runs them and renders
//! the results.
//!
//! ```
//! use paraverify::exprlang::parse;
//! use paraverify::geometry::PointGeometry;
//! use paraverify::manifold::{FieldBundle, Point};
//!
//! let phi = parse("x1*y1 + x2*y2 + x1^2*y1^2").unwrap();
//! let bundle = FieldBundle::from_potential(2, phi).unwrap();
//! let pg = PointGeometry::at(&bundle, &Point::origin(4)).unwrap();
//! assert!((pg.curvature.scalar + 8.0).abs() < 1e-12);
//! ```

pub mod exprlang;
pub mod geometry;
pub mod jets;
pub mod manifold;
pub mod parakahler;
pub mod quantity;
pub mod report;
pub mod soliton;
pub mod special_tensors;
pub mod tensor;

// The guide's snippets run as doc-tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/expressions.md")]
    mod expressions {}
    #[doc = include_str!("../../../book/src/spec-files.md")]
    mod spec_files {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/parakahler.md")]
    mod parakahler {}
    #[doc = include_str!("../../../book/src/tensors.md")]
    mod tensors {}
    #[doc = include_str!("../../../book/src/solitons.md")]
    mod solitons {}
    #[doc = include_str!("../../../book/src/reports.md")]
    mod reports {}
}
