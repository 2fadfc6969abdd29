//! Exact arithmetic for local constancy of reductions of crystalline
//! representations: p-adic integers in a ramified extension, symmetric-power
//! modules over `F_p`, binomial sum congruences, the Hecke operator on the
//! Bruhat-Tits tree, and the semisimple mod-p local Langlands dictionary.

pub mod fp;
pub mod padic;
pub mod polymod;
pub mod binom;
pub mod hecke;
pub mod llc;
