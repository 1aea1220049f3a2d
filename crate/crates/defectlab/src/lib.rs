//! Exact arithmetic for valuation theory at desk scale.
//!
//! The crate computes with finite-rank lexicographically ordered value
//! groups, certified cuts in their divisible hulls, and algebraic towers
//! over `Q` (with the p-adic valuation) and over `F_p((t))` (with the
//! t-adic valuation). On top of those it classifies degree-p extensions
//! given by a Kummer generator (`z^p = u`) or an Artin-Schreier shift
//! (`z^p - z = u`) into tame / independent-defect / dependent-defect, and
//! decides the field-class axioms (semitame, deeply ramified, gdr) at a
//! bounded search depth.
//!
//! All arithmetic is exact rational; nothing is ever rounded. Where a
//! quantity can only be sampled to finite depth (a distance cut, a p-th
//! power search), the result carries an explicit certification mode
//! instead of a silent claim.

pub mod axioms;
pub mod builtin;
pub mod checks;
pub mod config;
pub mod cuts;
pub mod defect;
pub mod expr;
pub mod laurent;
pub mod ogroup;
pub mod poly;
pub mod report;
pub mod tower;
pub mod trace;

pub use num::BigRational as Rat;

use num::BigInt;

/// Shorthand for an exact rational from an integer pair.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Shorthand for an exact rational from an integer.
pub fn rat_int(n: i64) -> Rat {
    Rat::from(BigInt::from(n))
}
