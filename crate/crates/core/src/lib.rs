//! Unsupervised speaker naming for movie subtitles.
//!
//! Dialogue supplies weak labels: a speaker introducing themself, a name
//! addressed to someone nearby, a name of somebody absent. These become
//! constraints of a convex objective over a row-stochastic matrix of naming
//! scores, smoothed along a multimodal similarity graph between segments and
//! solved by projected gradient descent.
//!
//! Pipeline: [`srt`] → [`names`] + [`reference`] → [`constraints`], with
//! [`features`] supplying the graph, then [`optimizer`] and [`eval`].
//! [`synth`] builds seeded synthetic movies and the exhaustive grid oracle.

// NaN-rejecting checks read best as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constraints;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod names;
pub mod optimizer;
pub mod pipeline;
pub mod reference;
pub mod srt;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
