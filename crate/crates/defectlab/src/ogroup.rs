//! Finite-rank ordered abelian value groups.
//!
//! A group is a lexicographic product of rank-1 components, leftmost
//! component most significant. The five supported component kinds cover
//! every value group that shows up in the tower constructions: `Z`,
//! scaled copies `g·Z`, the p-power lattices `(1/p^l)·Z`, `Z[1/p]`, and
//! `Q`. Convex subgroups of such a product are exactly the
//! least-significant tails, so they are stored as a single tail index.

use std::cmp::Ordering;
use std::fmt;

use num::{BigInt, One, Signed, Zero};
use thiserror::Error;

use crate::Rat;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("element rank {element} does not match group rank {group}")]
    RankMismatch { element: usize, group: usize },
    #[error("operation requires a finite element")]
    InfiniteElement,
    #[error("operation requires a nontrivial group")]
    TrivialGroup,
    #[error("element is not a member of the group")]
    NotInGroup,
    #[error("tail index {index} out of range for rank {rank}")]
    BadTailIndex { index: usize, rank: usize },
}

/// A rank-1 building block of a value group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Component {
    /// The zero group.
    Trivial,
    /// `g·Z` for a positive rational generator `g`.
    Cyclic(Rat),
    /// `(1/p^level)·Z`.
    PPowerLattice { p: u32, level: u32 },
    /// `Z[1/p]`, the p-divisible hull of `Z`.
    PDivisible { p: u32 },
    /// All of `Q`.
    FullRationals,
}

impl Component {
    pub fn is_trivial(&self) -> bool {
        matches!(self, Component::Trivial)
    }

    /// Discrete components are the ones isomorphic to `Z`.
    pub fn is_discrete(&self) -> bool {
        matches!(self, Component::Cyclic(_) | Component::PPowerLattice { .. })
    }

    /// Smallest positive element, if the component has one.
    pub fn smallest_positive(&self) -> Option<Rat> {
        match self {
            Component::Trivial => None,
            Component::Cyclic(g) => Some(g.clone()),
            Component::PPowerLattice { p, level } => {
                Some(Rat::new(BigInt::one(), BigInt::from(*p).pow(*level)))
            }
            Component::PDivisible { .. } | Component::FullRationals => None,
        }
    }

    /// Membership of a rational in the component lattice.
    pub fn contains(&self, x: &Rat) -> bool {
        match self {
            Component::Trivial => x.is_zero(),
            Component::Cyclic(g) => (x / g).is_integer(),
            Component::PPowerLattice { p, level } => {
                (x * Rat::from(BigInt::from(*p).pow(*level))).is_integer()
            }
            Component::PDivisible { p } => denominator_is_power_of(x, *p),
            Component::FullRationals => true,
        }
    }

    /// Closure under division by the prime `p`.
    pub fn p_divisible(&self, p: u32) -> bool {
        match self {
            Component::Trivial | Component::FullRationals => true,
            Component::Cyclic(_) | Component::PPowerLattice { .. } => false,
            Component::PDivisible { p: q } => *q == p,
        }
    }
}

fn denominator_is_power_of(x: &Rat, p: u32) -> bool {
    let p = BigInt::from(p);
    let mut d = x.denom().abs();
    while (&d % &p).is_zero() {
        d /= &p;
    }
    d.is_one()
}

/// A finite lex product of rank-1 components, leftmost most significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupDescriptor {
    components: Vec<Component>,
}

impl GroupDescriptor {
    pub fn new(components: Vec<Component>) -> Self {
        assert!(!components.is_empty(), "group must have rank >= 1");
        GroupDescriptor { components }
    }

    pub fn rank(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn is_trivial(&self) -> bool {
        self.components.iter().all(Component::is_trivial)
    }

    fn check_rank(&self, x: &GroupElement) -> Result<(), GroupError> {
        if x.rank() != self.rank() {
            return Err(GroupError::RankMismatch {
                element: x.rank(),
                group: self.rank(),
            });
        }
        Ok(())
    }

    /// Membership test, coordinate by coordinate.
    pub fn contains(&self, x: &GroupElement) -> Result<bool, GroupError> {
        if x.is_infinite() {
            return Err(GroupError::InfiniteElement);
        }
        self.check_rank(x)?;
        Ok(self
            .components
            .iter()
            .zip(&x.coords)
            .all(|(c, v)| c.contains(v)))
    }

    /// Smallest positive element of the lex product, if any.
    ///
    /// Positive elements infinitesimally close to zero live in the last
    /// nontrivial component, so the product has a smallest positive
    /// element exactly when that component does.
    pub fn smallest_positive(&self) -> Option<GroupElement> {
        let idx = self
            .components
            .iter()
            .rposition(|c| !c.is_trivial())?;
        let s = self.components[idx].smallest_positive()?;
        let mut coords = vec![Rat::zero(); self.rank()];
        coords[idx] = s;
        Some(GroupElement::finite(coords))
    }

    /// (DRvg): no archimedean component of the group is discrete.
    ///
    /// The archimedean components of a lex product are its nontrivial
    /// components, so the condition fails as soon as one of them is a
    /// copy of `Z` (`Cyclic` or `PPowerLattice`).
    pub fn check_drvg(&self) -> Result<bool, GroupError> {
        if self.is_trivial() {
            return Err(GroupError::TrivialGroup);
        }
        Ok(!self.components.iter().any(Component::is_discrete))
    }

    /// (DRst): the group is p-divisible.
    pub fn check_drst(&self, p: u32) -> bool {
        self.components.iter().all(|c| c.p_divisible(p))
    }

    /// (DRvp): `vp` is not the smallest positive element of the group.
    pub fn check_drvp(&self, vp: &GroupElement) -> Result<bool, GroupError> {
        if vp.is_infinite() || !vp.is_positive() || !self.contains(vp)? {
            return Err(GroupError::NotInGroup);
        }
        match self.smallest_positive() {
            None => Ok(true),
            Some(s) => Ok(&s != vp),
        }
    }

    /// Quotient by the convex tail subgroup: drop the tail components.
    pub fn coarsen(&self, h: &ConvexSubgroup) -> Result<GroupDescriptor, GroupError> {
        h.validate(self.rank())?;
        if h.is_whole_group() {
            // Quotient by the whole group: rank-0 would be the honest
            // answer; keep a single trivial component instead.
            return Ok(GroupDescriptor::new(vec![Component::Trivial]));
        }
        Ok(GroupDescriptor::new(
            self.components[..h.tail_index() - 1].to_vec(),
        ))
    }

    /// Image of an element under the coarsening quotient.
    pub fn coarsen_element(
        &self,
        x: &GroupElement,
        h: &ConvexSubgroup,
    ) -> Result<GroupElement, GroupError> {
        h.validate(self.rank())?;
        self.check_rank(x)?;
        if x.is_infinite() {
            return Ok(GroupElement::infinite(self.coarsen(h)?.rank()));
        }
        if h.is_whole_group() {
            return Ok(GroupElement::finite(vec![Rat::zero()]));
        }
        Ok(GroupElement::finite(
            x.coords[..h.tail_index() - 1].to_vec(),
        ))
    }
}

impl fmt::Display for GroupDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .components
            .iter()
            .map(|c| match c {
                Component::Trivial => "0".to_string(),
                Component::Cyclic(g) => format!("{}Z", g),
                Component::PPowerLattice { p, level } => format!("(1/{}^{})Z", p, level),
                Component::PDivisible { p } => format!("Z[1/{}]", p),
                Component::FullRationals => "Q".to_string(),
            })
            .collect();
        if parts.len() == 1 {
            write!(f, "{}", parts[0])
        } else {
            write!(f, "lex[{}]", parts.join(", "))
        }
    }
}

/// An element of a value group (or of its divisible hull), with an
/// explicit point at infinity for the value of zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupElement {
    coords: Vec<Rat>,
    infinite: bool,
}

impl GroupElement {
    pub fn finite(coords: Vec<Rat>) -> Self {
        assert!(!coords.is_empty(), "element must have rank >= 1");
        GroupElement {
            coords,
            infinite: false,
        }
    }

    pub fn infinite(rank: usize) -> Self {
        GroupElement {
            coords: vec![Rat::zero(); rank.max(1)],
            infinite: true,
        }
    }

    pub fn zero(rank: usize) -> Self {
        GroupElement::finite(vec![Rat::zero(); rank.max(1)])
    }

    pub fn rank(&self) -> usize {
        self.coords.len()
    }

    pub fn is_infinite(&self) -> bool {
        self.infinite
    }

    pub fn coords(&self) -> &[Rat] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        !self.infinite && self.coords.iter().all(Rat::is_zero)
    }

    pub fn is_positive(&self) -> bool {
        self.infinite || self.leading().map(|(_, c)| c.is_positive()).unwrap_or(false)
    }

    /// Index and value of the most significant nonzero coordinate.
    pub fn leading(&self) -> Option<(usize, &Rat)> {
        self.coords.iter().enumerate().find(|(_, c)| !c.is_zero())
    }

    pub fn add(&self, other: &GroupElement) -> GroupElement {
        assert_eq!(self.rank(), other.rank(), "rank mismatch in addition");
        if self.infinite || other.infinite {
            return GroupElement::infinite(self.rank());
        }
        GroupElement::finite(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn neg(&self) -> GroupElement {
        if self.infinite {
            return self.clone();
        }
        GroupElement::finite(self.coords.iter().map(|c| -c).collect())
    }

    pub fn sub(&self, other: &GroupElement) -> GroupElement {
        self.add(&other.neg())
    }

    pub fn scale(&self, n: &Rat) -> GroupElement {
        if self.infinite {
            return self.clone();
        }
        GroupElement::finite(self.coords.iter().map(|c| c * n).collect())
    }

    /// Rank-1 convenience constructor.
    pub fn scalar(v: Rat) -> Self {
        GroupElement::finite(vec![v])
    }

    /// The single coordinate of a rank-1 element.
    pub fn as_scalar(&self) -> Option<&Rat> {
        if self.infinite || self.rank() != 1 {
            None
        } else {
            Some(&self.coords[0])
        }
    }
}

impl PartialOrd for GroupElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GroupElement {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.infinite, other.infinite) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => self.coords.cmp(&other.coords),
        }
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.infinite {
            return write!(f, "inf");
        }
        if self.rank() == 1 {
            write!(f, "{}", self.coords[0])
        } else {
            let parts: Vec<String> = self.coords.iter().map(|c| c.to_string()).collect();
            write!(f, "({})", parts.join(", "))
        }
    }
}

/// A convex subgroup of a lex product, stored as the index of the first
/// component of its least-significant tail. 1-based; `tail_index = 1` is
/// the whole group and `tail_index = rank + 1` is the trivial subgroup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConvexSubgroup {
    tail_index: usize,
}

impl ConvexSubgroup {
    pub fn new(tail_index: usize) -> Self {
        assert!(tail_index >= 1, "tail index is 1-based");
        ConvexSubgroup { tail_index }
    }

    /// The trivial subgroup `{0}` of a rank-`rank` group.
    pub fn trivial(rank: usize) -> Self {
        ConvexSubgroup {
            tail_index: rank + 1,
        }
    }

    pub fn whole(rank: usize) -> Self {
        let _ = rank;
        ConvexSubgroup { tail_index: 1 }
    }

    pub fn tail_index(&self) -> usize {
        self.tail_index
    }

    pub fn is_trivial_for(&self, rank: usize) -> bool {
        self.tail_index == rank + 1
    }

    pub fn is_whole_group(&self) -> bool {
        self.tail_index == 1
    }

    pub fn validate(&self, rank: usize) -> Result<(), GroupError> {
        if self.tail_index < 1 || self.tail_index > rank + 1 {
            return Err(GroupError::BadTailIndex {
                index: self.tail_index,
                rank,
            });
        }
        Ok(())
    }

    /// Position of a finite hull element relative to the subgroup.
    ///
    /// `Less`: below every member; `Greater`: above every member;
    /// `Equal`: inside the convex hull of the subgroup.
    pub fn position_of(&self, x: &GroupElement) -> Ordering {
        match x.leading() {
            None => Ordering::Equal,
            Some((i, c)) => {
                if i + 1 >= self.tail_index {
                    Ordering::Equal
                } else if c.is_positive() {
                    Ordering::Greater
                } else {
                    Ordering::Less
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{rat, rat_int};

    fn elem(v: Rat) -> GroupElement {
        GroupElement::scalar(v)
    }

    #[test]
    fn contains_p_power_lattice() {
        let g = GroupDescriptor::new(vec![Component::PPowerLattice { p: 2, level: 3 }]);
        assert!(g.contains(&elem(rat(3, 8))).unwrap());
        assert!(!g.contains(&elem(rat(1, 16))).unwrap());
    }

    #[test]
    fn contains_p_divisible() {
        let g = GroupDescriptor::new(vec![Component::PDivisible { p: 2 }]);
        assert!(g.contains(&elem(rat(5, 32))).unwrap());
        assert!(!g.contains(&elem(rat(1, 3))).unwrap());
    }

    #[test]
    fn contains_rank_mismatch() {
        let g = GroupDescriptor::new(vec![Component::FullRationals, Component::FullRationals]);
        assert!(matches!(
            g.contains(&elem(rat_int(1))),
            Err(GroupError::RankMismatch { .. })
        ));
    }

    #[test]
    fn drvg_examples() {
        let z = GroupDescriptor::new(vec![Component::Cyclic(rat_int(1))]);
        assert!(!z.check_drvg().unwrap());

        let d = GroupDescriptor::new(vec![Component::PDivisible { p: 2 }]);
        assert!(d.check_drvg().unwrap());

        let mixed = GroupDescriptor::new(vec![
            Component::Cyclic(rat_int(1)),
            Component::FullRationals,
        ]);
        assert!(!mixed.check_drvg().unwrap());

        // (1/p^l)Z is a copy of Z, hence discrete.
        let lat = GroupDescriptor::new(vec![Component::PPowerLattice { p: 2, level: 3 }]);
        assert!(!lat.check_drvg().unwrap());

        let trivial = GroupDescriptor::new(vec![Component::Trivial]);
        assert_eq!(trivial.check_drvg(), Err(GroupError::TrivialGroup));
    }

    #[test]
    fn drst_examples() {
        let d = GroupDescriptor::new(vec![Component::PDivisible { p: 2 }]);
        assert!(d.check_drst(2));

        let lat = GroupDescriptor::new(vec![Component::PPowerLattice { p: 2, level: 3 }]);
        assert!(!lat.check_drst(2));

        let q = GroupDescriptor::new(vec![Component::FullRationals]);
        assert!(q.check_drst(3));
    }

    #[test]
    fn drvp_examples() {
        let one = elem(rat_int(1));

        let z = GroupDescriptor::new(vec![Component::Cyclic(rat_int(1))]);
        assert!(!z.check_drvp(&one).unwrap());

        let d = GroupDescriptor::new(vec![Component::PDivisible { p: 2 }]);
        assert!(d.check_drvp(&one).unwrap());

        let lat = GroupDescriptor::new(vec![Component::PPowerLattice { p: 2, level: 1 }]);
        assert!(lat.check_drvp(&one).unwrap());

        // vp must be a positive member of the group.
        assert!(z.check_drvp(&elem(rat(1, 2))).is_err());
        assert!(z.check_drvp(&elem(rat_int(-1))).is_err());
    }

    #[test]
    fn coarsen_examples() {
        let g = GroupDescriptor::new(vec![
            Component::FullRationals,
            Component::PDivisible { p: 2 },
        ]);
        let h = ConvexSubgroup::new(2);
        assert_eq!(
            g.coarsen(&h).unwrap(),
            GroupDescriptor::new(vec![Component::FullRationals])
        );

        // Coarsening by {0} is the identity.
        let triv = ConvexSubgroup::trivial(2);
        assert_eq!(g.coarsen(&triv).unwrap(), g);

        let zz = GroupDescriptor::new(vec![
            Component::Cyclic(rat_int(1)),
            Component::Cyclic(rat_int(1)),
        ]);
        assert_eq!(
            zz.coarsen(&ConvexSubgroup::new(2)).unwrap(),
            GroupDescriptor::new(vec![Component::Cyclic(rat_int(1))])
        );

        assert!(g.coarsen(&ConvexSubgroup::new(4)).is_err());
    }

    #[test]
    fn coarsen_tower_law() {
        // Coarsening twice equals coarsening by the larger tail.
        let g = GroupDescriptor::new(vec![
            Component::FullRationals,
            Component::PDivisible { p: 3 },
            Component::Cyclic(rat_int(1)),
        ]);
        let once = g.coarsen(&ConvexSubgroup::new(3)).unwrap();
        let twice = once.coarsen(&ConvexSubgroup::new(2)).unwrap();
        assert_eq!(twice, g.coarsen(&ConvexSubgroup::new(2)).unwrap());
    }

    #[test]
    fn lex_order_is_total_and_monotone() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let rank = rng.gen_range(1..4usize);
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                GroupElement::finite(
                    (0..rank)
                        .map(|_| rat(rng.gen_range(-6..6), rng.gen_range(1..5)))
                        .collect(),
                )
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let c = mk(&mut rng);
            // associativity and commutativity
            assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
            assert_eq!(a.add(&b), b.add(&a));
            // translation invariance of the order
            let ord = a.cmp(&b);
            assert_eq!(ord, a.add(&c).cmp(&b.add(&c)));
        }
    }

    #[test]
    fn contains_closed_under_add_and_neg() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let g = GroupDescriptor::new(vec![
            Component::PDivisible { p: 2 },
            Component::PPowerLattice { p: 3, level: 2 },
        ]);
        for _ in 0..200 {
            let a = GroupElement::finite(vec![
                rat(rng.gen_range(-20..20), 1 << rng.gen_range(0..5)),
                rat(rng.gen_range(-20..20), 9),
            ]);
            let b = GroupElement::finite(vec![
                rat(rng.gen_range(-20..20), 1 << rng.gen_range(0..5)),
                rat(rng.gen_range(-20..20), 9),
            ]);
            assert!(g.contains(&a).unwrap());
            assert!(g.contains(&b).unwrap());
            assert!(g.contains(&a.add(&b)).unwrap());
            assert!(g.contains(&a.neg()).unwrap());
        }
    }
}
