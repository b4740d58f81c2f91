//! Material point method simulation with elastoplastic material models and
//! motion-distillation parameter estimation.

pub mod constitutive;
pub mod estimate;
pub mod material;
pub mod motion;
pub mod mpm;
pub mod plasticity;
pub mod rng;
pub mod scene;

// Compiles the guide's snippets as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/scenes.md")]
    struct Scenes;
    #[doc = include_str!("../../../book/src/materials.md")]
    struct Materials;
    #[doc = include_str!("../../../book/src/motion.md")]
    struct Motion;
    #[doc = include_str!("../../../book/src/estimation.md")]
    struct Estimation;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
