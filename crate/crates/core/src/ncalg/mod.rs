//! Free noncommutative polynomials and linear pencils, evaluated on tuples
//! of square complex matrices.

pub mod json;
mod parse;
mod pencil;
mod poly;
mod tuple;
mod word;

pub use parse::parse_poly;
pub use pencil::{LinearPencil, PencilForm, PencilValue};
pub use poly::FreePoly;
pub use tuple::MatrixTuple;
pub use word::{Letter, Word};
