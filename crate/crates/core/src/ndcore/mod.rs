//! Numeric substrate: real and complex 2-D images, the unitary 2-D DFT, and
//! seeded random streams.

mod fft;
mod image;
mod rng;

pub use fft::{fft2_unitary, ifft2_unitary, Fft2};
pub use image::{ComplexImage, Image};
pub use rng::{splitmix64, RngStream};
