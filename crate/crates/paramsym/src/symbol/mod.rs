//! Symbol expressions: grammar, algebra, differentiation, evaluation and
//! numerical verification of symbol-class estimates.

pub mod class;
pub mod diff;
pub mod eval;
pub mod expr;
pub mod homogeneity;
pub mod json;
pub mod smooth;

pub use class::{verify_class, ClassTag, Family, GridSpec, SeminormReport};
pub use diff::{derivative_multi, differentiate, multi_indices, Domain};
pub use eval::{Compiled, Point};
pub use expr::{Atom, Expr, Monomial, RadialBase, Term, TrigKind, Var, C64};
pub use homogeneity::{check_homogeneity, HomogeneityMode, HomogeneityReport};
pub use json::{parse_document, to_document, SymbolDoc};
pub use smooth::SmoothFn;
