//! Fully connected networks with hand-written backpropagation and Adam.

mod adam;
mod mlp;

pub use adam::Adam;
pub use mlp::{Activation, Gradients, Layer, LayerGrad, Mlp, NetShape};
