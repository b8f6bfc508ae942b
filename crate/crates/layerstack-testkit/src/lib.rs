//! Dense reference implementations used as independent test oracles.
//!
//! Everything in this crate is deliberately written against plain `Vec`-based
//! dense storage with no dependency on the production crates: the point of an
//! oracle is to share neither code nor algorithmic structure with the
//! implementation it checks. Production code must never depend on this crate;
//! it is a dev-dependency of the workspace test suites only.

pub mod dense;
pub mod fb;
pub mod vtkread;

pub use dense::{solve_dense, DenseMatrix};
pub use fb::{solve_contact_dense, AnchoredContact, ContactProblem, FbOptions, FbSolution, PairCoupling};
pub use vtkread::{parse_legacy_vtk, VtkSnapshot};
