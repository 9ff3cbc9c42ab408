//! Quantum random number generation on a calibrated noisy simulator, with
//! SP 800-22 and SP 800-90B style randomness evaluation.

pub mod par;
pub mod qcore;
pub mod special;
pub mod bits;
pub mod families;
pub mod simnoise;
pub mod sts22;
pub mod ent90b;
pub mod biasfit;
pub mod harness;
