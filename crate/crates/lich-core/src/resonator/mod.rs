//! Numerical meromorphic continuation on the ball models: Fourier-mode
//! reduction to radial systems, exact conjugation to the extended even
//! coordinate, spectral collocation, and pole detection of the continued
//! resolvent.

pub mod colloc;
pub mod green;
pub mod mode;
pub mod pipeline;
pub mod radial;
pub mod scan;

pub use mode::{mode_reduce, Base, ModeError, ModeSystem, OpMatrix};
pub use radial::{CPoly, MuOp, RadialError, RadialOp};
