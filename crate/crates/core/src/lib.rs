//! Rate regions of the semideterministic broadcast channel with message
//! side-information and feedback: evaluation, optimization over input
//! distributions, exact Fourier–Motzkin elimination, feedback-gain
//! certificates and a desk-scale Marton-code simulator.

pub mod channels;
pub mod feedback;
pub mod info;
pub mod montecarlo;
pub mod optimizer;
pub mod polyhedra;
pub mod regions;
