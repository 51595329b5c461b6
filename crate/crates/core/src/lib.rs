//! Constant-round non-malleable commitments in a prime-order group: the
//! one-sided, two-slot and asynchronous protocols, a man-in-the-middle game
//! harness, and the rewinding extraction machines.

pub mod algebra;
pub mod cli;
pub mod commitments;
pub mod extraction;
pub mod mim;
pub mod protocols;
pub mod sigma;
