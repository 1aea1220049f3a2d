//! Cuts in the divisible hull of a value group.
//!
//! The representable cuts are exactly those of the form `(b + H)^-` or
//! `(b + H)^+` for a hull element `b` and a convex subgroup `H`. Every
//! cut produced by the distance and trace formulas has this shape;
//! anything that fails to fit is reported as unresolved rather than
//! rounded. Equality of cuts is equality of lower cut sets, which after
//! canonicalization (zeroing the `H`-coordinates of the boundary) is
//! structural equality of boundary, subgroup and side.

use std::cmp::Ordering;
use std::fmt;

use num::{BigInt, Zero};
use thiserror::Error;

use crate::ogroup::{ConvexSubgroup, GroupElement};
use crate::Rat;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CutError {
    #[error("samples must be non-decreasing ({at} follows a larger value)")]
    DecreasingSamples { at: usize },
    #[error("cut fitting needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("samples must be finite")]
    InfiniteSample,
    #[error("rank mismatch between cut (rank {cut}) and element (rank {element})")]
    RankMismatch { cut: usize, element: usize },
}

/// Which side of the boundary coset the cut falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Minus,
    Plus,
}

/// How a cut was obtained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Exact,
    CertifiedFromSamples(usize),
    Conjectured,
}

/// The cut `(boundary + H)^side` in the divisible hull.
///
/// Stored in canonical form: the coordinates of the boundary at the
/// positions of the tail subgroup `H` are zero. Provenance never takes
/// part in equality.
#[derive(Debug, Clone)]
pub struct Cut {
    boundary: GroupElement,
    subgroup: ConvexSubgroup,
    side: Side,
    provenance: Provenance,
}

impl PartialEq for Cut {
    fn eq(&self, other: &Self) -> bool {
        self.boundary == other.boundary
            && self.subgroup == other.subgroup
            && self.side == other.side
    }
}

impl Eq for Cut {}

impl Cut {
    pub fn new(
        boundary: GroupElement,
        subgroup: ConvexSubgroup,
        side: Side,
        provenance: Provenance,
    ) -> Self {
        assert!(!boundary.is_infinite(), "cut boundary must be finite");
        let boundary = canonical_boundary(&boundary, &subgroup);
        Cut {
            boundary,
            subgroup,
            side,
            provenance,
        }
    }

    /// The principal cut `b^-` or `b^+` (trivial subgroup).
    pub fn principal(boundary: GroupElement, side: Side) -> Self {
        let h = ConvexSubgroup::trivial(boundary.rank());
        Cut::new(boundary, h, side, Provenance::Exact)
    }

    /// `0^-` or `0^+` in rank `rank`.
    pub fn zero(rank: usize, side: Side) -> Self {
        Cut::principal(GroupElement::zero(rank), side)
    }

    pub fn boundary(&self) -> &GroupElement {
        &self.boundary
    }

    pub fn subgroup(&self) -> &ConvexSubgroup {
        &self.subgroup
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn rank(&self) -> usize {
        self.boundary.rank()
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = p;
        self
    }

    /// Translate the cut by a finite element: `alpha + L`.
    pub fn shift(&self, alpha: &GroupElement) -> Cut {
        assert!(!alpha.is_infinite(), "shift by a finite element");
        Cut::new(
            self.boundary.add(alpha),
            self.subgroup,
            self.side,
            self.provenance.clone(),
        )
    }

    /// Multiply the cut by a positive integer: `n·L`. The subgroup is
    /// divisible, so only the boundary moves.
    pub fn scale(&self, n: u32) -> Cut {
        assert!(n > 0, "scale factor must be positive");
        Cut::new(
            self.boundary.scale(&Rat::from(BigInt::from(n))),
            self.subgroup,
            self.side,
            self.provenance.clone(),
        )
    }

    /// `-L`: boundary negated, side flipped.
    pub fn negate(&self) -> Cut {
        Cut::new(
            self.boundary.neg(),
            self.subgroup,
            match self.side {
                Side::Minus => Side::Plus,
                Side::Plus => Side::Minus,
            },
            self.provenance.clone(),
        )
    }

    /// A cut is idempotent (`n·L = L` for all `n >= 2`) exactly when it
    /// has the form `H^-` or `H^+`, i.e. the canonical boundary is zero.
    pub fn is_idempotent(&self) -> bool {
        self.boundary.is_zero()
    }

    /// Where a finite hull element sits relative to the cut:
    /// `Less` = in the lower cut set, `Greater` = in the upper cut set.
    pub fn classify_element(&self, x: &GroupElement) -> Result<Ordering, CutError> {
        if x.is_infinite() {
            // Infinity lies above every cut.
            return Ok(Ordering::Greater);
        }
        if x.rank() != self.rank() {
            return Err(CutError::RankMismatch {
                cut: self.rank(),
                element: x.rank(),
            });
        }
        let rel = self.subgroup.position_of(&x.sub(&self.boundary));
        Ok(match (rel, self.side) {
            (Ordering::Less, _) => Ordering::Less,
            (Ordering::Greater, _) => Ordering::Greater,
            // Inside the boundary coset: the side decides.
            (Ordering::Equal, Side::Minus) => Ordering::Greater,
            (Ordering::Equal, Side::Plus) => Ordering::Less,
        })
    }

    /// True iff `x` lies strictly above the cut.
    pub fn is_above(&self, x: &GroupElement) -> Result<bool, CutError> {
        Ok(self.classify_element(x)? == Ordering::Greater)
    }
}

fn canonical_boundary(b: &GroupElement, h: &ConvexSubgroup) -> GroupElement {
    let mut coords = b.coords().to_vec();
    for (i, c) in coords.iter_mut().enumerate() {
        if i + 1 >= h.tail_index() {
            *c = Rat::zero();
        }
    }
    GroupElement::finite(coords)
}

impl fmt::Display for Cut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = match self.side {
            Side::Minus => "-",
            Side::Plus => "+",
        };
        if self.subgroup.is_trivial_for(self.rank()) {
            write!(f, "({})^{}", self.boundary, side)
        } else {
            write!(
                f,
                "({} + H[tail {}])^{}",
                self.boundary,
                self.subgroup.tail_index(),
                side
            )
        }
    }
}

/// An upward-closed subset of the hull: everything strictly above the
/// stored cut.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinalSegment {
    complement_cut: Cut,
}

impl FinalSegment {
    pub fn above(cut: Cut) -> Self {
        FinalSegment {
            complement_cut: cut,
        }
    }

    pub fn cut(&self) -> &Cut {
        &self.complement_cut
    }

    pub fn contains(&self, x: &GroupElement) -> Result<bool, CutError> {
        self.complement_cut.is_above(x)
    }

    /// The segment has the shape `{alpha > H}` for a convex subgroup `H`.
    pub fn is_subgroup_complement(&self) -> bool {
        self.complement_cut.is_idempotent()
    }
}

impl fmt::Display for FinalSegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{alpha > {}}}", self.complement_cut)
    }
}

/// Result of fitting a cut to a sampled value sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FitOutcome {
    Fitted(Cut),
    /// The samples went flat before resolving.
    Stalled,
    /// No exact geometric tail was found.
    NoPattern,
}

/// Fit a principal cut to a strictly increasing sequence of sampled
/// values.
///
/// The trailing window must match `s - delta/k^i` exactly for a rational
/// limit `s` and an integer ratio `k >= 2`; in that case the fitted cut
/// is `s^-`, certified from the full sample count. Eventually constant
/// input is reported as stalled, anything else as pattern-free: noisy
/// sequences are never rounded into a certificate.
pub fn fit_cut(samples: &[GroupElement]) -> Result<FitOutcome, CutError> {
    if samples.len() < 3 {
        return Err(CutError::TooFewSamples(samples.len()));
    }
    if samples.iter().any(GroupElement::is_infinite) {
        return Err(CutError::InfiniteSample);
    }
    for (i, w) in samples.windows(2).enumerate() {
        if w[1] < w[0] {
            return Err(CutError::DecreasingSamples { at: i + 1 });
        }
    }
    let n = samples.len();
    if samples[n - 1] == samples[n - 2] {
        return Ok(FitOutcome::Stalled);
    }

    // Trailing window: the last four samples (three consecutive gaps),
    // or three samples when only three are given. Using a fixed window
    // makes the fit stable under dropping early samples.
    let w = n.min(4);
    let tail = &samples[n - w..];
    let diffs: Vec<GroupElement> = tail.windows(2).map(|p| p[1].sub(&p[0])).collect();
    if diffs.iter().any(GroupElement::is_zero) {
        return Ok(FitOutcome::NoPattern);
    }

    // Infer the integer ratio k from the first pair of gaps, then check
    // it exactly on the rest of the window.
    let k = match infer_ratio(&diffs[0], &diffs[1]) {
        Some(k) => k,
        None => return Ok(FitOutcome::NoPattern),
    };
    for pair in diffs.windows(2) {
        if pair[0] != pair[1].scale(&Rat::from(BigInt::from(k))) {
            return Ok(FitOutcome::NoPattern);
        }
    }

    // s = g_last + d_last / (k - 1)
    let d_last = diffs.last().unwrap();
    let limit = samples[n - 1].add(&d_last.scale(&Rat::new(BigInt::from(1), BigInt::from(k - 1))));
    Ok(FitOutcome::Fitted(Cut::new(
        limit,
        ConvexSubgroup::trivial(samples[0].rank()),
        Side::Minus,
        Provenance::CertifiedFromSamples(n),
    )))
}

/// `d_prev = k * d_next` for an integer `k >= 2`, checked exactly.
fn infer_ratio(d_prev: &GroupElement, d_next: &GroupElement) -> Option<u32> {
    let (i, lead) = d_prev.leading()?;
    let next_c = &d_next.coords()[i];
    if next_c.is_zero() {
        return None;
    }
    let q = lead / next_c;
    if !q.is_integer() || q.to_integer() < BigInt::from(2) {
        return None;
    }
    let k: u32 = match q.to_integer().try_into() {
        Ok(k) => k,
        Err(_) => return None,
    };
    if d_prev == &d_next.scale(&Rat::from(BigInt::from(k))) {
        Some(k)
    } else {
        None
    }
}
