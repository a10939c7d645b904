pub mod bspline;
pub mod characteristic;
pub mod datagen;
pub mod error;
pub mod evolve;
pub mod gensol;
pub mod linalg;
pub mod nullspace;
pub mod pipeline;
pub mod series;

pub use error::{Error, Result, Stage};

// The book's code blocks run as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/characteristic.md")]
    mod characteristic {}
    #[doc = include_str!("../../../book/src/general-solution.md")]
    mod general_solution {}
    #[doc = include_str!("../../../book/src/splines.md")]
    mod splines {}
    #[doc = include_str!("../../../book/src/null-space.md")]
    mod null_space {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
