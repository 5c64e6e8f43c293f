//! Reproducible experiment protocols and their tabular output.

mod arrays;
mod fit;
mod protocols;
mod trace;

pub use arrays::*;
pub use fit::*;
pub use protocols::*;
pub use trace::*;
