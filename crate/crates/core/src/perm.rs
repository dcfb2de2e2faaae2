//! Permutations of a deck, deck states, and lexicographic indexing of S_n.
//!
//! Every public interface speaks 1-based positions and card labels; storage is
//! 0-based. Position 1 is the top of the deck and position n the bottom.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Default limit for dense work over S_n (8! = 40320 states).
pub const DEFAULT_CAP: usize = 8;

/// Ranks are kept in `u64`, so no cap override may exceed this.
pub const MAX_CAP: usize = 20;

fn validate(n: usize, image: &[usize]) -> Result<()> {
    if image.len() != n {
        return Err(Error::SizeMismatch { expected: n, found: image.len() });
    }
    let mut seen = vec![false; n];
    for &v in image {
        if v >= n || seen[v] {
            return Err(Error::InvalidPermutation {
                n,
                reason: format!("value {} repeated or out of range", v.wrapping_add(1)),
            });
        }
        seen[v] = true;
    }
    Ok(())
}

/// A bijection on positions: `image(i)` is where the occupant of position
/// `i` moves to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    image: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self { image: (0..n).collect() }
    }

    /// Builds from 1-based images.
    pub fn from_images(images: &[usize]) -> Result<Self> {
        let image: Vec<usize> = images
            .iter()
            .map(|&v| v.checked_sub(1).unwrap_or(usize::MAX))
            .collect();
        validate(images.len(), &image)?;
        Ok(Self { image })
    }

    pub(crate) fn from_zero_based(image: Vec<usize>) -> Self {
        debug_assert!(validate(image.len(), &image).is_ok());
        Self { image }
    }

    /// Reverses positions 1..n.
    pub fn reversal(n: usize) -> Self {
        Self { image: (0..n).rev().collect() }
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    /// 1-based image of 1-based position `i`.
    pub fn image(&self, i: usize) -> usize {
        self.image[i - 1] + 1
    }

    /// 1-based images in position order.
    pub fn images(&self) -> Vec<usize> {
        self.image.iter().map(|&v| v + 1).collect()
    }

    pub(crate) fn as_zero_based(&self) -> &[usize] {
        &self.image
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        check_len(self.len(), other.len())?;
        Ok(Self { image: other.image.iter().map(|&j| self.image[j]).collect() })
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (i, &j) in self.image.iter().enumerate() {
            inv[j] = i;
        }
        Self { image: inv }
    }

    /// Moves every card through this permutation.
    pub fn apply(&self, deck: &DeckState) -> Result<DeckState> {
        check_len(self.len(), deck.len())?;
        Ok(DeckState {
            position_of: deck.position_of.iter().map(|&z| self.image[z]).collect(),
        })
    }

    /// Lexicographic rank of the 1-based image sequence.
    pub fn rank(&self) -> u64 {
        lehmer_rank(&self.image)
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::SizeMismatch { expected, found });
    }
    Ok(())
}

/// Arrangement of the deck: `position(card)` is the position Z of `card`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeckState {
    position_of: Vec<usize>,
}

impl DeckState {
    /// Card i at position i.
    pub fn sorted(n: usize) -> Self {
        Self { position_of: (0..n).collect() }
    }

    /// Builds from the 1-based position of each card 1..n.
    pub fn from_positions(positions: &[usize]) -> Result<Self> {
        let p = Permutation::from_images(positions)?;
        Ok(Self { position_of: p.image })
    }

    /// Builds from the card labels read from top to bottom.
    pub fn from_order(cards_top_to_bottom: &[usize]) -> Result<Self> {
        let order = Permutation::from_images(cards_top_to_bottom)?;
        Ok(Self { position_of: order.inverse().image })
    }

    /// Builds from the sampler layout `order[pos] = card`, both 0-based.
    pub fn from_order_zero_based(order: &[u16]) -> Result<Self> {
        let cards: Vec<usize> = order.iter().map(|&c| c as usize).collect();
        validate(order.len(), &cards)?;
        let mut position_of = vec![0; order.len()];
        for (pos, &card) in cards.iter().enumerate() {
            position_of[card] = pos;
        }
        Ok(Self { position_of })
    }

    pub fn len(&self) -> usize {
        self.position_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position_of.is_empty()
    }

    /// 1-based position of 1-based `card`.
    pub fn position(&self, card: usize) -> usize {
        self.position_of[card - 1] + 1
    }

    pub fn positions(&self) -> Vec<usize> {
        self.position_of.iter().map(|&z| z + 1).collect()
    }

    /// Card labels from top to bottom.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.len()];
        for (card, &pos) in self.position_of.iter().enumerate() {
            order[pos] = card + 1;
        }
        order
    }

    /// 0-based `order[pos] = card`, the layout used by the fast samplers.
    pub fn order_zero_based(&self) -> Vec<u16> {
        let mut order = vec![0u16; self.len()];
        for (card, &pos) in self.position_of.iter().enumerate() {
            order[pos] = card as u16;
        }
        order
    }

    /// The deck viewed as the permutation card -> position.
    pub fn as_permutation(&self) -> Permutation {
        Permutation { image: self.position_of.clone() }
    }

    pub fn from_permutation(p: Permutation) -> Self {
        Self { position_of: p.image }
    }

    pub fn rank(&self) -> u64 {
        lehmer_rank(&self.position_of)
    }
}

pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

pub(crate) fn lehmer_rank(image: &[usize]) -> u64 {
    let n = image.len();
    let mut rank = 0u64;
    for i in 0..n {
        let smaller = image[i + 1..].iter().filter(|&&v| v < image[i]).count() as u64;
        rank = rank * (n - i) as u64 + smaller;
    }
    rank
}

fn lehmer_unrank(n: usize, mut rank: u64) -> Vec<usize> {
    // Factorial-base digits, most significant first.
    let mut digits = vec![0usize; n];
    for i in (0..n).rev() {
        let base = (n - i) as u64;
        digits[i] = (rank % base) as usize;
        rank /= base;
    }
    let mut pool: Vec<usize> = (0..n).collect();
    digits.into_iter().map(|d| pool.remove(d)).collect()
}

/// Dense lexicographic indexing of S_n.
#[derive(Debug, Clone)]
pub struct SymmetricGroup {
    n: usize,
    order: u64,
}

impl SymmetricGroup {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_cap(n, DEFAULT_CAP)
    }

    pub fn with_cap(n: usize, cap: usize) -> Result<Self> {
        let cap = cap.min(MAX_CAP);
        if n > cap {
            return Err(Error::CapExceeded { n, cap });
        }
        if n == 0 {
            return Err(Error::InvalidParameter("deck size must be at least 1".into()));
        }
        Ok(Self { n, order: factorial(n) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// n!
    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn rank(&self, p: &Permutation) -> Result<u64> {
        check_len(self.n, p.len())?;
        Ok(p.rank())
    }

    pub fn unrank(&self, rank: u64) -> Result<Permutation> {
        if rank >= self.order {
            return Err(Error::InvalidParameter(format!("rank {rank} >= {}!", self.n)));
        }
        Ok(Permutation { image: lehmer_unrank(self.n, rank) })
    }

    /// All n! permutations in lexicographic order.
    pub fn elements(&self) -> Vec<Permutation> {
        (0..self.order)
            .map(|r| Permutation { image: lehmer_unrank(self.n, r) })
            .collect()
    }
}

/// Fisher–Yates draw from the uniform distribution on S_n.
pub fn sample_uniform(n: usize, rng: &mut SplitMix64) -> Permutation {
    let mut image: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        image.swap(i, j);
    }
    Permutation { image }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s4() -> Vec<Permutation> {
        SymmetricGroup::new(4).unwrap().elements()
    }

    #[test]
    fn identity_is_neutral() {
        for s in s4() {
            assert_eq!(Permutation::identity(4).compose(&s).unwrap(), s);
            assert_eq!(s.compose(&Permutation::identity(4)).unwrap(), s);
        }
    }

    #[test]
    fn inverse_cancels_exhaustively() {
        for s in s4() {
            assert!(s.inverse().compose(&s).unwrap().is_identity());
        }
    }

    #[test]
    fn compose_is_associative_on_s4() {
        let all = s4();
        for a in &all {
            for b in &all {
                let ab = a.compose(b).unwrap();
                for c in &all {
                    let left = ab.compose(c).unwrap();
                    let right = a.compose(&b.compose(c).unwrap()).unwrap();
                    assert_eq!(left, right);
                }
            }
        }
    }

    #[test]
    fn compose_applies_right_operand_first() {
        let a = Permutation::from_images(&[2, 3, 1]).unwrap();
        let b = Permutation::from_images(&[2, 1, 3]).unwrap();
        // position 1 -> 2 under b, then 2 -> 3 under a.
        assert_eq!(a.compose(&b).unwrap().image(1), 3);
        let d = DeckState::sorted(3);
        let two_steps = a.apply(&b.apply(&d).unwrap()).unwrap();
        assert_eq!(two_steps, a.compose(&b).unwrap().apply(&d).unwrap());
    }

    #[test]
    fn reversal_moves_top_card_to_bottom() {
        let d = DeckState::from_order(&[1, 2, 3, 4]).unwrap();
        let after = Permutation::reversal(4).apply(&d).unwrap();
        assert_eq!(after.position(1), 4);
        assert_eq!(after.order(), vec![4, 3, 2, 1]);
    }

    #[test]
    fn size_mismatch_is_reported() {
        let err = Permutation::identity(3).compose(&Permutation::identity(4)).unwrap_err();
        assert_eq!(err, Error::SizeMismatch { expected: 3, found: 4 });
        assert!(Permutation::identity(3).apply(&DeckState::sorted(2)).is_err());
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(Permutation::from_images(&[1, 1, 3]).is_err());
        assert!(Permutation::from_images(&[0, 1, 2]).is_err());
        assert!(Permutation::from_images(&[1, 2, 4]).is_err());
        assert!(DeckState::from_order(&[2, 2]).is_err());
    }

    #[test]
    fn enumeration_small_cases() {
        let g3 = SymmetricGroup::new(3).unwrap();
        let all = g3.elements();
        assert_eq!(all.len(), 6);
        assert_eq!(g3.rank(&Permutation::identity(3)).unwrap(), 0);
        assert_eq!(all[5].images(), vec![3, 2, 1]);
        let g1 = SymmetricGroup::new(1).unwrap();
        assert_eq!(g1.elements(), vec![Permutation::identity(1)]);
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let all = SymmetricGroup::new(4).unwrap().elements();
        assert!(all.windows(2).all(|w| w[0].images() < w[1].images()));
    }

    #[test]
    fn rank_unrank_exhaustive_n5() {
        let g = SymmetricGroup::new(5).unwrap();
        for r in 0..g.order() {
            assert_eq!(g.rank(&g.unrank(r).unwrap()).unwrap(), r);
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert_eq!(SymmetricGroup::new(9).unwrap_err(), Error::CapExceeded { n: 9, cap: 8 });
        assert!(SymmetricGroup::with_cap(9, 10).is_ok());
    }

    #[test]
    fn uniform_sampling_basic_contracts() {
        let mut rng = SplitMix64::stream(5, 0);
        assert!(sample_uniform(1, &mut rng).is_identity());
        let a = sample_uniform(10, &mut SplitMix64::stream(42, 9));
        let b = sample_uniform(10, &mut SplitMix64::stream(42, 9));
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_sampling_on_s3_counts() {
        let g = SymmetricGroup::new(3).unwrap();
        let mut counts = [0u64; 6];
        let mut rng = SplitMix64::stream(2024, 0);
        for _ in 0..600_000 {
            counts[g.rank(&sample_uniform(3, &mut rng)).unwrap() as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 - 1e5).abs() <= 1e3, "{counts:?}");
        }
    }

    #[test]
    fn uniform_sampling_goodness_of_fit_s4() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let g = SymmetricGroup::new(4).unwrap();
        let draws = 1_000_000u64;
        let mut counts = [0u64; 24];
        let mut rng = SplitMix64::stream(77, 3);
        for _ in 0..draws {
            counts[g.rank(&sample_uniform(4, &mut rng)).unwrap() as usize] += 1;
        }
        let expected = draws as f64 / 24.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let p_value = 1.0 - ChiSquared::new(23.0).unwrap().cdf(chi2);
        // Statistical threshold, not an absolute guarantee.
        assert!(p_value > 0.001, "chi2 = {chi2}, p = {p_value}");
    }

    fn arb_perm(max_n: usize) -> impl Strategy<Value = Permutation> {
        (1..=max_n).prop_flat_map(|n| {
            Just((0..n).collect::<Vec<usize>>())
                .prop_shuffle()
                .prop_map(Permutation::from_zero_based)
        })
    }

    proptest! {
        #[test]
        fn rank_roundtrip(p in arb_perm(8)) {
            let g = SymmetricGroup::new(p.len()).unwrap();
            let r = g.rank(&p).unwrap();
            prop_assert!(r < g.order());
            prop_assert_eq!(g.unrank(r).unwrap(), p);
        }

        #[test]
        fn deck_views_agree(p in arb_perm(12)) {
            let d = DeckState::from_permutation(p);
            let back = DeckState::from_order(&d.order()).unwrap();
            prop_assert_eq!(&back, &d);
            let order = d.order_zero_based();
            prop_assert_eq!(DeckState::from_order_zero_based(&order).unwrap(), d);
        }
    }
}
