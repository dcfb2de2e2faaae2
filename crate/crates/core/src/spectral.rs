//! The cosine distinguishing statistic and the quantities the lower-bound
//! lemmas consume: the eigenvalue gap γ, the maximal statistic Φ̂, second
//! moment bounds V and R, and the drift defect ρ.
//!
//! Φ(X) = Σ_i cos(2π Z^i / n) over the tracked cards, evaluated at the
//! 1-based positions Z^i. All logarithms are natural.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{position_kernel, rudvalis_nstep_kernel, PositionKernel};
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::perm::DeckState;
use crate::rng::SplitMix64;
use crate::shuffle::{CutPattern, ModelKind, Sampler, ShuffleModel};

/// Cards whose cosine positions are summed into Φ.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedStatistic {
    n: usize,
    tracked: Vec<usize>,
    is_tracked: Vec<bool>,
    cosines: Vec<f64>,
}

/// cos(2πk/n) for k = 1..n, stored 0-based.
pub fn cosine_table(n: usize) -> Vec<f64> {
    let theta = 2.0 * PI / n as f64;
    (1..=n).map(|k| (theta * k as f64).cos()).collect()
}

impl TrackedStatistic {
    /// Cards 1..⌊n/2⌋.
    pub fn half_deck(n: usize) -> Result<Self> {
        Self::with_cards(n, &(1..=n / 2).collect::<Vec<_>>())
    }

    pub fn with_cards(n: usize, labels: &[usize]) -> Result<Self> {
        if labels.is_empty() || labels.len() > n {
            return Err(Error::InvalidParameter(format!("need 1 <= m <= n, got m = {}", labels.len())));
        }
        let mut is_tracked = vec![false; n];
        for &c in labels {
            if c == 0 || c > n || is_tracked[c - 1] {
                return Err(Error::InvalidParameter(format!("tracked card {c} invalid or repeated")));
            }
            is_tracked[c - 1] = true;
        }
        Ok(Self { n, tracked: labels.to_vec(), is_tracked, cosines: cosine_table(n) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.tracked.len()
    }

    pub fn tracked(&self) -> &[usize] {
        &self.tracked
    }

    pub fn cosines(&self) -> &[f64] {
        &self.cosines
    }

    /// Φ of a deck state. Terms are summed in increasing position order, the
    /// same order as [`Self::phi_of_order`], so equal position sets give
    /// bitwise-equal values.
    pub fn phi(&self, deck: &DeckState) -> Result<f64> {
        if deck.len() != self.n {
            return Err(Error::SizeMismatch { expected: self.n, found: deck.len() });
        }
        let mut occupied = vec![false; self.n];
        for &c in &self.tracked {
            occupied[deck.position(c) - 1] = true;
        }
        Ok(self.sum_over(&occupied))
    }

    /// Φ of a 0-based layout `order[pos] = card`.
    #[inline]
    pub fn phi_of_order(&self, order: &[u16]) -> f64 {
        let mut s = 0.0;
        for (z, &card) in order.iter().enumerate() {
            if self.is_tracked[card as usize] {
                s += self.cosines[z];
            }
        }
        s
    }

    /// Φ for a marked set of 0-based positions.
    #[inline]
    pub fn sum_over(&self, occupied: &[bool]) -> f64 {
        let mut s = 0.0;
        for (z, &o) in occupied.iter().enumerate() {
            if o {
                s += self.cosines[z];
            }
        }
        s
    }

    /// Positions ordered by decreasing cos(2πk/n), ties toward smaller k.
    fn positions_by_cosine(&self) -> Vec<usize> {
        let n = self.n;
        let mut positions: Vec<usize> = (1..=n).collect();
        // cos(2πk/n) decreases with the circular distance from position n.
        positions.sort_by_key(|&k| (k.min(n - k), k));
        positions
    }

    fn deck_on(&self, chosen: &[usize]) -> DeckState {
        let n = self.n;
        let mut position_of = vec![0usize; n];
        let mut used = vec![false; n + 1];
        for (&card, &pos) in self.tracked.iter().zip(chosen) {
            position_of[card - 1] = pos;
            used[pos] = true;
        }
        let mut free = (1..=n).filter(|&k| !used[k]);
        for card in 1..=n {
            if !self.is_tracked[card - 1] {
                position_of[card - 1] = free.next().expect("enough positions");
            }
        }
        DeckState::from_positions(&position_of).expect("bijection by construction")
    }

    /// Deck placing the tracked cards on the m positions of largest cosine,
    /// with its value Φ̂.
    pub fn phi_max_start(&self) -> (DeckState, f64) {
        let best = self.positions_by_cosine();
        let deck = self.deck_on(&best[..self.m()]);
        let value = self.phi(&deck).expect("sizes match");
        (deck, value)
    }

    /// The smallest attainable Φ.
    pub fn phi_min(&self) -> f64 {
        let order = self.positions_by_cosine();
        let worst: Vec<usize> = order.iter().rev().take(self.m()).copied().collect();
        self.phi(&self.deck_on(&worst)).expect("sizes match")
    }

    /// max |Φ| over all states.
    pub fn phi_abs_max(&self) -> f64 {
        self.phi_max_start().1.max(-self.phi_min())
    }
}

fn series_terms(r: f64) -> usize {
    // r^k < 1e-20 beyond this.
    ((-20.0 * 10f64.ln()) / r.ln()).ceil() as usize + 1
}

/// γ for the overhand kinds at angle θ: 1 - c(1 + 2 Σ_k (1-p)^k cos kθ) with
/// c = p/(2-p), summed as 4c Σ_k (1-p)^k sin²(kθ/2) to avoid cancellation.
pub fn overhand_gamma_at_angle(p: f64, theta: f64) -> f64 {
    let c = p / (2.0 - p);
    let r = 1.0 - p;
    let s = compensated_sum((1..=series_terms(r)).map(|k| {
        let h = (k as f64 * theta / 2.0).sin();
        r.powi(k as i32) * h * h
    }));
    4.0 * c * s
}

/// γ for the n-step Rudvalis block at angle θ: one minus
/// (1/2)cos θ + 1/4 + Σ_{i≥1} 2^{-(2+i)} cos iθ.
pub fn rudvalis_gamma_at_angle(theta: f64) -> f64 {
    let half = (theta / 2.0).sin();
    let tail = compensated_sum((1..=series_terms(0.5)).map(|i| {
        let h = (i as f64 * theta / 2.0).sin();
        0.5f64.powi(2 + i as i32) * 2.0 * h * h
    }));
    half * half + tail
}

/// Σ_{k≥1} r^k cos kθ in closed form.
fn geometric_cosine_sum(r: f64, theta: f64) -> f64 {
    (r * theta.cos() - r * r) / (1.0 - 2.0 * r * theta.cos() + r * r)
}

/// The eigenvalue gap of the cosine function for `model` on `n` cards. For
/// the linear overhand chain this is the circular value; the end effects
/// are carried by the drift defect instead.
pub fn gamma_exact(model: &ShuffleModel, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidParameter("gamma needs n >= 3".into()));
    }
    let theta = 2.0 * PI / n as f64;
    Ok(match model.kind() {
        ModelKind::Rudvalis => rudvalis_gamma_at_angle(theta),
        _ => overhand_gamma_at_angle(model.p().expect("overhand p"), theta),
    })
}

/// Closed geometric-cosine form of [`gamma_exact`], used as a cross-check.
pub fn gamma_closed_form(model: &ShuffleModel, n: usize) -> f64 {
    let theta = 2.0 * PI / n as f64;
    match model.kind() {
        ModelKind::Rudvalis => 1.0 - (0.5 * theta.cos() + 0.25 + 0.25 * geometric_cosine_sum(0.5, theta)),
        _ => {
            let p = model.p().expect("overhand p");
            1.0 - p / (2.0 - p) * (1.0 + 2.0 * geometric_cosine_sum(1.0 - p, theta))
        }
    }
}

/// Σ_{k≥1} k² r^k by direct summation.
pub fn geometric_second_moment_sum(r: f64) -> f64 {
    compensated_sum((1..=series_terms(r) + 200).map(|k| (k * k) as f64 * r.powi(k as i32)))
}

/// Σ_{j=-1}^{last} j 2^{-(2+j)}, whose limit is zero.
pub fn rudvalis_zero_mean_sum(last: usize) -> f64 {
    compensated_sum((-1..=last as i64).map(|j| j as f64 * 0.5f64.powi((2 + j) as i32)))
}

/// Per-card variance bound V. Overhand kinds:
/// 8c Σ_k (1-p)^k sin²(2πk/n), which is (8/3) Σ_k sin²(2πk/n) / 2^k at
/// p = 1/2. Rudvalis: the rotating-frame per-card bound 4/n².
pub fn v_series(model: &ShuffleModel, n: usize) -> f64 {
    let theta = 2.0 * PI / n as f64;
    match model.kind() {
        ModelKind::Rudvalis => 4.0 / (n * n) as f64,
        _ => {
            let p = model.p().expect("overhand p");
            let r = 1.0 - p;
            let s = compensated_sum((1..=series_terms(r)).map(|k| {
                let h = (k as f64 * theta).sin();
                r.powi(k as i32) * h * h
            }));
            8.0 * p / (2.0 - p) * s
        }
    }
}

/// Kernel whose drift is compared against (1-γ)cos: the one-step kernel for
/// the overhand kinds, the n-step block kernel for Rudvalis.
pub fn drift_kernel(model: &ShuffleModel, n: usize) -> Result<PositionKernel> {
    match model.kind() {
        ModelKind::Rudvalis => rudvalis_nstep_kernel(n),
        _ => position_kernel(model, n),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectReport {
    pub gamma: f64,
    /// δ(k) for k = 1..n, stored 0-based.
    pub defect: Vec<f64>,
    pub rho_hat: f64,
}

/// δ(k) = Σ_j K[k][j] cos(2πj/n) - (1-γ) cos(2πk/n) and ρ̂ = the sum of the m
/// largest |δ(k)|, the worst placement of the tracked cards.
pub fn defect_from_kernel(kernel: &PositionKernel, gamma: f64, m: usize) -> DefectReport {
    let cosines = cosine_table(kernel.n());
    let drift = kernel.apply_to_function(&cosines);
    let defect: Vec<f64> = drift.iter().zip(&cosines).map(|(d, c)| d - (1.0 - gamma) * c).collect();
    let mut magnitudes: Vec<f64> = defect.iter().map(|d| d.abs()).collect();
    magnitudes.sort_by(|a, b| b.total_cmp(a));
    let rho_hat = compensated_sum(magnitudes.into_iter().take(m));
    DefectReport { gamma, defect, rho_hat }
}

pub fn drift_defect(stat: &TrackedStatistic, model: &ShuffleModel) -> Result<DefectReport> {
    let n = stat.n();
    let kernel = drift_kernel(model, n)?;
    Ok(defect_from_kernel(&kernel, gamma_exact(model, n)?, stat.m()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondMoment {
    pub v_series: f64,
    pub r_analytic: f64,
    pub r_empirical: f64,
    pub states_sampled: usize,
}

/// Monte Carlo settings for the empirical sup of E[(ΔΦ)² | X].
#[derive(Debug, Clone, Copy)]
pub struct MomentSampling {
    /// Number of states at which the conditional moment is estimated.
    pub states: usize,
    /// Transitions drawn per state.
    pub inner: usize,
    pub seed: u64,
}

impl Default for MomentSampling {
    fn default() -> Self {
        Self { states: 2_000, inner: 64, seed: 0 }
    }
}

const MOMENT_CHAINS: usize = 8;

/// Analytic R from V. Overhand kinds: 20 V n ln n. Rudvalis: the
/// rotating-frame variance m · 4/n² plus the squared worst-case drift
/// (γ max|Φ| + ρ̂)².
pub fn r_analytic(stat: &TrackedStatistic, model: &ShuffleModel, v: f64, gamma: f64, rho_hat: f64) -> f64 {
    let n = stat.n() as f64;
    match model.kind() {
        ModelKind::Rudvalis => {
            let drift = gamma * stat.phi_abs_max() + rho_hat;
            stat.m() as f64 * v + drift * drift
        }
        _ => 20.0 * v * n * n.ln(),
    }
}

/// Steps in one transition of the chain the lemma is applied to.
pub fn block_length(model: &ShuffleModel, n: usize) -> usize {
    if model.kind() == ModelKind::Rudvalis {
        n
    } else {
        1
    }
}

/// V, the analytic R, and the Monte Carlo sup of E[(Φ(X') - Φ(X))² | X] over
/// the Φ̂ start state and states along trajectories from it.
pub fn second_moment_bound(
    stat: &TrackedStatistic,
    model: &ShuffleModel,
    sampling: MomentSampling,
) -> Result<SecondMoment> {
    if sampling.states == 0 || sampling.inner == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let n = stat.n();
    let v = v_series(model, n);
    let gamma = gamma_exact(model, n)?;
    let rho_hat = if model.kind() == ModelKind::Rudvalis { drift_defect(stat, model)?.rho_hat } else { 0.0 };
    let r_analytic = r_analytic(stat, model, v, gamma, rho_hat);

    let block = block_length(model, n);
    let stride = block * (n / 8).max(1);
    let (start, _) = stat.phi_max_start();
    let start = start.order_zero_based();

    let mut states = vec![start.clone()];
    let mut chains: Vec<(Vec<u16>, SplitMix64)> = (0..MOMENT_CHAINS)
        .map(|c| (start.clone(), SplitMix64::stream(SplitMix64::derive_seed(sampling.seed, 1), c as u64)))
        .collect();
    let mut sampler = Sampler::new(*model, n)?;
    'collect: loop {
        for (order, rng) in chains.iter_mut() {
            if states.len() >= sampling.states {
                break 'collect;
            }
            sampler.run(order, stride, rng);
            states.push(order.clone());
        }
    }

    let inner_seed = SplitMix64::derive_seed(sampling.seed, 2);
    let estimates: Vec<f64> = states
        .par_iter()
        .enumerate()
        .map(|(i, state)| {
            let mut rng = SplitMix64::stream(inner_seed, i as u64);
            let mut sampler = Sampler::new(*model, n).expect("validated above");
            let phi0 = stat.phi_of_order(state);
            let mut order = state.clone();
            let mut acc = CompensatedSum::new();
            for _ in 0..sampling.inner {
                order.copy_from_slice(state);
                sampler.run(&mut order, block, &mut rng);
                let d = stat.phi_of_order(&order) - phi0;
                acc.add(d * d);
            }
            acc.value() / sampling.inner as f64
        })
        .collect();
    let r_empirical = estimates.into_iter().fold(0.0, f64::max);
    Ok(SecondMoment { v_series: v, r_analytic, r_empirical, states_sampled: states.len() })
}

/// Everything the lower-bound lemmas need for one model and deck size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub n: usize,
    pub model: ShuffleModel,
    pub m: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub phi_max: f64,
    pub v_series: f64,
    pub r_analytic: f64,
    pub r_empirical: f64,
    pub defect: Vec<f64>,
    pub rho_hat: f64,
}

pub fn spectral_report(stat: &TrackedStatistic, model: &ShuffleModel, sampling: MomentSampling) -> Result<SpectralReport> {
    let defect = drift_defect(stat, model)?;
    let moments = second_moment_bound(stat, model, sampling)?;
    Ok(SpectralReport {
        n: stat.n(),
        model: *model,
        m: stat.m(),
        gamma: defect.gamma,
        lambda: 1.0 - defect.gamma,
        phi_max: stat.phi_max_start().1,
        v_series: moments.v_series,
        r_analytic: moments.r_analytic,
        r_empirical: moments.r_empirical,
        defect: defect.defect,
        rho_hat: defect.rho_hat,
    })
}

/// Exact covariance of Y_i and Y_j (cosine increments of the cards at
/// 1-based positions `a` and `b`) over all 2^(n-1) linear cut patterns.
pub fn linear_pair_covariance(n: usize, p: f64, a: usize, b: usize) -> Result<f64> {
    if n > 24 {
        return Err(Error::CapExceeded { n, cap: 24 });
    }
    let cosines = cosine_table(n);
    let (mut ey_a, mut ey_b, mut ey_ab) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for mask in 0..1u64 << (n - 1) {
        let pattern = CutPattern::from_mask(n, false, mask);
        let w = pattern.probability(p);
        let image = pattern.permutation()?;
        let ya = cosines[image.image(a) - 1] - cosines[a - 1];
        let yb = cosines[image.image(b) - 1] - cosines[b - 1];
        ey_a.add(w * ya);
        ey_b.add(w * yb);
        ey_ab.add(w * ya * yb);
    }
    Ok(ey_ab.value() - ey_a.value() * ey_b.value())
}

/// max over start positions of P(|Z' - Z| >= threshold), exactly from the kernel.
pub fn displacement_tail(kernel: &PositionKernel, threshold: f64) -> f64 {
    let n = kernel.n();
    (1..=n)
        .map(|k| {
            compensated_sum(
                (1..=n).filter(|&j| (j as f64 - k as f64).abs() >= threshold).map(|j| kernel.get(k, j)),
            )
        })
        .fold(0.0, f64::max)
}
