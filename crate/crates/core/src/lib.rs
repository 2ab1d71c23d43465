//! Energies of circle homeomorphisms and of their harmonic extensions to the
//! unit disk, with the weights, Orlicz functions and Cantor-type maps they
//! are tested against.

pub mod boundary;
pub mod circle_map;
pub mod constructions;
pub mod dyadic;
pub mod energy;
pub mod error;
pub mod orlicz;
pub mod poisson;
pub mod quad;
pub mod studies;
pub mod sum;
pub mod weights;

pub use boundary::{QuadratureSpec, UReport, VReport};
pub use circle_map::{CircleMap, Lift};
pub use energy::{Classification, EnergyParams, EnergyReport, GrowthConfig, Region};
pub use error::{Error, Result};
pub use orlicz::OrliczSpec;
pub use poisson::{DerivativeMode, PoissonExtension};
pub use rustfft::num_complex::Complex64;
