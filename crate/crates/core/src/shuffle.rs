//! The three shuffle rules: linear overhand (packet reversal), overhand under
//! the circular deck convention, and the (inverse) Rudvalis shuffle.
//!
//! Each rule is available three ways: as a pure function of a deck and an
//! explicit cut pattern or coin, as an in-place sampler over a `u16` card
//! layout for Monte Carlo work, and as an exact step law over S_n.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{DeckState, Permutation, SymmetricGroup, DEFAULT_CAP, MAX_CAP};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Overhand,
    CircularOverhand,
    Rudvalis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShuffleModel {
    kind: ModelKind,
    p: Option<f64>,
}

impl ShuffleModel {
    pub fn overhand(p: f64) -> Result<Self> {
        Self::with_cut_probability(ModelKind::Overhand, p)
    }

    pub fn circular_overhand(p: f64) -> Result<Self> {
        Self::with_cut_probability(ModelKind::CircularOverhand, p)
    }

    pub fn rudvalis() -> Self {
        Self { kind: ModelKind::Rudvalis, p: None }
    }

    fn with_cut_probability(kind: ModelKind, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!("cut probability {p} not in (0, 1)")));
        }
        Ok(Self { kind, p: Some(p) })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Cut probability; `None` for Rudvalis.
    pub fn p(&self) -> Option<f64> {
        self.p
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::Overhand => "overhand",
            ModelKind::CircularOverhand => "circular-overhand",
            ModelKind::Rudvalis => "rudvalis",
        }
    }

    pub fn is_overhand(&self) -> bool {
        self.kind != ModelKind::Rudvalis
    }

    fn cut_p(&self) -> f64 {
        self.p.expect("overhand models carry p")
    }
}

/// Cutpoint flags. Linear patterns have slots 1..n-1 (slot i between
/// positions i and i+1); circular patterns add slot n between n and 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutPattern {
    n: usize,
    circular: bool,
    slots: Vec<bool>,
}

impl CutPattern {
    /// Linear pattern with cuts at the given 1-based slots.
    pub fn linear(n: usize, cuts: &[usize]) -> Result<Self> {
        Self::build(n, false, cuts)
    }

    /// Circular pattern with cuts at the given 1-based slots (slot n wraps).
    pub fn circular(n: usize, cuts: &[usize]) -> Result<Self> {
        Self::build(n, true, cuts)
    }

    fn build(n: usize, circular: bool, cuts: &[usize]) -> Result<Self> {
        let count = if circular { n } else { n.saturating_sub(1) };
        let mut slots = vec![false; count];
        for &s in cuts {
            if s == 0 || s > count {
                return Err(Error::InvalidParameter(format!("slot {s} outside 1..={count}")));
            }
            slots[s - 1] = true;
        }
        Ok(Self { n, circular, slots })
    }

    /// Pattern whose slot `i` is bit `i` of `mask`.
    pub fn from_mask(n: usize, circular: bool, mask: u64) -> Self {
        let count = if circular { n } else { n.saturating_sub(1) };
        let slots = (0..count).map(|i| (mask >> i) & 1 == 1).collect();
        Self { n, circular, slots }
    }

    /// I.i.d. Bernoulli(p) slots; circular patterns are redrawn until at
    /// least one cut is present.
    pub fn sample(n: usize, circular: bool, p: f64, rng: &mut SplitMix64) -> Self {
        let count = if circular { n } else { n.saturating_sub(1) };
        let mut slots = vec![false; count];
        draw_slots(&mut slots, circular, p, rng);
        Self { n, circular, slots }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_circular(&self) -> bool {
        self.circular
    }

    pub fn is_cut(&self, slot: usize) -> bool {
        self.slots[slot - 1]
    }

    /// 1-based cut slots in increasing order.
    pub fn cuts(&self) -> Vec<usize> {
        self.slots.iter().enumerate().filter(|(_, &c)| c).map(|(i, _)| i + 1).collect()
    }

    pub fn cut_count(&self) -> usize {
        self.slots.iter().filter(|&&c| c).count()
    }

    /// Probability of this exact pattern under i.i.d. Bernoulli(p) slots,
    /// conditioned on at least one cut for circular patterns.
    pub fn probability(&self, p: f64) -> f64 {
        let k = self.cut_count() as i32;
        let free = self.slots.len() as i32 - k;
        let raw = p.powi(k) * (1.0 - p).powi(free);
        if self.circular {
            if k == 0 {
                0.0
            } else {
                raw / (1.0 - (1.0 - p).powi(self.n as i32))
            }
        } else {
            raw
        }
    }

    /// Largest distance between two consecutive cuts (wrapping for circular
    /// patterns). `None` when fewer than two cuts exist.
    pub fn max_cut_gap(&self) -> Option<usize> {
        let cuts = self.cuts();
        if cuts.len() < 2 {
            return None;
        }
        let mut gap = cuts.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
        if self.circular {
            gap = gap.max(cuts[0] + self.n - cuts[cuts.len() - 1]);
        }
        Some(gap)
    }

    /// The position permutation produced by reversing every packet.
    pub fn permutation(&self) -> Result<Permutation> {
        let mut image = vec![0usize; self.n];
        if self.circular {
            let arcs = circular_arcs(&self.slots).ok_or(Error::NoCuts)?;
            for (a, b) in arcs {
                for z in a..=b {
                    image[z % self.n] = (a + b - z) % self.n;
                }
            }
        } else {
            for (a, b) in linear_packets(&self.slots, self.n) {
                for z in a..=b {
                    image[z] = a + b - z;
                }
            }
        }
        Ok(Permutation::from_zero_based(image))
    }
}

fn draw_slots(slots: &mut [bool], circular: bool, p: f64, rng: &mut SplitMix64) {
    loop {
        rng.fill_bernoulli(p, slots);
        if !circular || slots.iter().any(|&c| c) {
            return;
        }
    }
}

/// 0-based inclusive packets `[a, b]` of a linear pattern.
fn linear_packets(slots: &[bool], n: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
    let mut start = 0;
    (0..n).filter_map(move |i| {
        if i + 1 == n || slots[i] {
            let packet = (start, i);
            start = i + 1;
            Some(packet)
        } else {
            None
        }
    })
}

/// 0-based arcs `[a, b]` of a circular pattern, unwrapped so `b` may exceed
/// n - 1. `None` when there is no cut.
fn circular_arcs(slots: &[bool]) -> Option<Vec<(usize, usize)>> {
    let n = slots.len();
    let cuts: Vec<usize> = (0..n).filter(|&i| slots[i]).collect();
    let last = *cuts.last()?;
    // Slot index s (0-based) separates positions s and s + 1.
    let mut arcs = Vec::with_capacity(cuts.len());
    let wrap_start = (last + 1) % n;
    let wrap_end = if cuts[0] >= wrap_start { cuts[0] } else { cuts[0] + n };
    arcs.push((wrap_start, wrap_end));
    for w in cuts.windows(2) {
        arcs.push((w[0] + 1, w[1]));
    }
    Some(arcs)
}

/// Linear overhand step under an explicit cut pattern.
pub fn overhand_step(deck: &DeckState, cuts: &CutPattern) -> Result<DeckState> {
    if cuts.is_circular() {
        return Err(Error::InvalidParameter("expected a linear cut pattern".into()));
    }
    check_size(deck, cuts)?;
    cuts.permutation()?.apply(deck)
}

/// Overhand step under the circular deck convention.
pub fn circular_overhand_step(deck: &DeckState, cuts: &CutPattern) -> Result<DeckState> {
    if !cuts.is_circular() {
        return Err(Error::InvalidParameter("expected a circular cut pattern".into()));
    }
    check_size(deck, cuts)?;
    cuts.permutation()?.apply(deck)
}

fn check_size(deck: &DeckState, cuts: &CutPattern) -> Result<()> {
    if deck.len() != cuts.n() {
        return Err(Error::SizeMismatch { expected: cuts.n(), found: deck.len() });
    }
    Ok(())
}

/// Rudvalis move for coin = false (bottom card to top) or coin = true (the
/// card above the bottom card to top).
pub fn rudvalis_permutation(n: usize, coin: bool) -> Result<Permutation> {
    if n < 2 {
        return Err(Error::InvalidParameter("Rudvalis shuffle needs n >= 2".into()));
    }
    let moved = if coin { n - 2 } else { n - 1 };
    let image = (0..n)
        .map(|z| match z {
            z if z == moved => 0,
            z if z < moved => z + 1,
            z => z,
        })
        .collect();
    Ok(Permutation::from_zero_based(image))
}

pub fn rudvalis_step(deck: &DeckState, coin: bool) -> Result<DeckState> {
    rudvalis_permutation(deck.len(), coin)?.apply(deck)
}

/// One sampled step of `model` applied to `deck`.
pub fn sample_step(model: &ShuffleModel, deck: &DeckState, rng: &mut SplitMix64) -> Result<DeckState> {
    match model.kind() {
        ModelKind::Overhand => overhand_step(deck, &CutPattern::sample(deck.len(), false, model.cut_p(), rng)),
        ModelKind::CircularOverhand => {
            circular_overhand_step(deck, &CutPattern::sample(deck.len(), true, model.cut_p(), rng))
        }
        ModelKind::Rudvalis => rudvalis_step(deck, rng.coin()),
    }
}

/// In-place sampler over a 0-based layout `order[pos] = card`. Draws the
/// same random bits as [`sample_step`], so both paths agree for a shared
/// stream.
#[derive(Debug, Clone)]
pub struct Sampler {
    model: ShuffleModel,
    n: usize,
    slots: Vec<bool>,
}

impl Sampler {
    pub fn new(model: ShuffleModel, n: usize) -> Result<Self> {
        let min = if model.kind() == ModelKind::Overhand { 1 } else { 2 };
        if n < min {
            return Err(Error::InvalidParameter(format!("{} needs n >= {min}", model.name())));
        }
        let count = match model.kind() {
            ModelKind::Overhand => n - 1,
            ModelKind::CircularOverhand => n,
            ModelKind::Rudvalis => 0,
        };
        Ok(Self { model, n, slots: vec![false; count] })
    }

    pub fn model(&self) -> &ShuffleModel {
        &self.model
    }

    pub fn step(&mut self, order: &mut [u16], rng: &mut SplitMix64) {
        debug_assert_eq!(order.len(), self.n);
        let n = self.n;
        match self.model.kind() {
            ModelKind::Overhand => {
                draw_slots(&mut self.slots, false, self.model.cut_p(), rng);
                let mut start = 0;
                for i in 0..n {
                    if i + 1 == n || self.slots[i] {
                        order[start..=i].reverse();
                        start = i + 1;
                    }
                }
            }
            ModelKind::CircularOverhand => {
                draw_slots(&mut self.slots, true, self.model.cut_p(), rng);
                let arcs = circular_arcs(&self.slots).expect("at least one cut");
                for (a, b) in arcs {
                    if b < n {
                        order[a..=b].reverse();
                    } else {
                        let (mut i, mut j) = (a, b);
                        while i < j {
                            order.swap(i % n, j % n);
                            i += 1;
                            j -= 1;
                        }
                    }
                }
            }
            ModelKind::Rudvalis => {
                if rng.coin() {
                    order[..n - 1].rotate_right(1);
                } else {
                    order.rotate_right(1);
                }
            }
        }
    }

    /// `steps` consecutive steps.
    pub fn run(&mut self, order: &mut [u16], steps: usize, rng: &mut SplitMix64) {
        for _ in 0..steps {
            self.step(order, rng);
        }
    }
}

/// Exact one-step distribution over S_n, entries in rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLaw {
    n: usize,
    entries: Vec<(Permutation, f64)>,
}

impl StepLaw {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(Permutation, f64)] {
        &self.entries
    }

    pub fn probability_of(&self, p: &Permutation) -> f64 {
        self.entries.iter().find(|(q, _)| q == p).map_or(0.0, |(_, w)| *w)
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w).sum()
    }
}

/// Exact step law for `model` on `n` cards, enumerating all cut patterns.
pub fn exact_step_law(model: &ShuffleModel, n: usize) -> Result<StepLaw> {
    exact_step_law_with_cap(model, n, DEFAULT_CAP)
}

pub fn exact_step_law_with_cap(model: &ShuffleModel, n: usize, cap: usize) -> Result<StepLaw> {
    SymmetricGroup::with_cap(n, cap)?;
    if n > MAX_CAP {
        return Err(Error::CapExceeded { n, cap: MAX_CAP });
    }
    let mut merged: BTreeMap<u64, (Permutation, f64)> = BTreeMap::new();
    let mut add = |perm: Permutation, w: f64| {
        if w > 0.0 {
            merged.entry(perm.rank()).or_insert((perm, 0.0)).1 += w;
        }
    };
    match model.kind() {
        ModelKind::Overhand | ModelKind::CircularOverhand => {
            let circular = model.kind() == ModelKind::CircularOverhand;
            if circular && n < 2 {
                return Err(Error::InvalidParameter("circular overhand needs n >= 2".into()));
            }
            let count = if circular { n } else { n - 1 };
            let p = model.cut_p();
            let first = u64::from(circular);
            for mask in first..(1u64 << count) {
                let pattern = CutPattern::from_mask(n, circular, mask);
                add(pattern.permutation()?, pattern.probability(p));
            }
        }
        ModelKind::Rudvalis => {
            add(rudvalis_permutation(n, false)?, 0.5);
            add(rudvalis_permutation(n, true)?, 0.5);
        }
    }
    Ok(StepLaw { n, entries: merged.into_values().collect() })
}

/// Fraction of sampled linear patterns whose largest consecutive-cut gap
/// exceeds `threshold`.
pub fn cut_gap_exceedance(n: usize, p: f64, threshold: f64, patterns: usize, seed: u64) -> f64 {
    let mut rng = SplitMix64::stream(seed, 0);
    let mut exceed = 0usize;
    for _ in 0..patterns {
        let pattern = CutPattern::sample(n, false, p, &mut rng);
        if pattern.max_cut_gap().is_some_and(|g| g as f64 > threshold) {
            exceed += 1;
        }
    }
    exceed as f64 / patterns as f64
}
