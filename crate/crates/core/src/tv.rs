//! Total variation to stationarity: exact evolution over S_n for small decks
//! and Monte Carlo lower bounds through the statistic Φ for large ones.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::perm::{factorial, lehmer_rank, DeckState, SymmetricGroup, DEFAULT_CAP};
use crate::rng::SplitMix64;
use crate::shuffle::{exact_step_law_with_cap, Sampler, ShuffleModel, StepLaw};
use crate::spectral::TrackedStatistic;

/// z for the two-sided 99% normal interval.
pub const CI_Z: f64 = 2.576;
/// Up to this many trials every distinct sampled Φ is a candidate cut level.
pub const EXACT_GRID_MAX_TRIALS: usize = 10_000;
/// Number of quantile cut levels above [`EXACT_GRID_MAX_TRIALS`].
pub const QUANTILE_LEVELS: usize = 512;
pub const MIN_TRIALS: usize = 100;

const MASS_TOLERANCE: f64 = 1e-10;

/// A distribution on S_n stored densely by Lehmer rank of the deck state.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDistribution {
    n: usize,
    mass: Vec<f64>,
}

impl GroupDistribution {
    pub fn point_mass(start: &DeckState, cap: usize) -> Result<Self> {
        let group = SymmetricGroup::with_cap(start.len(), cap)?;
        let mut mass = vec![0.0; group.order() as usize];
        mass[start.rank() as usize] = 1.0;
        Ok(Self { n: start.len(), mass })
    }

    pub fn uniform(n: usize, cap: usize) -> Result<Self> {
        let group = SymmetricGroup::with_cap(n, cap)?;
        let size = group.order() as usize;
        Ok(Self { n, mass: vec![1.0 / size as f64; size] })
    }

    pub fn from_masses(n: usize, mass: Vec<f64>) -> Result<Self> {
        if mass.len() as u64 != factorial(n) {
            return Err(Error::SizeMismatch { expected: factorial(n) as usize, found: mass.len() });
        }
        if mass.iter().any(|&m| !(m >= 0.0)) {
            return Err(Error::InvalidParameter("masses must be non-negative".into()));
        }
        let total = compensated_sum(mass.iter().copied());
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidParameter(format!("masses sum to {total}")));
        }
        Ok(Self { n, mass })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass_of(&self, deck: &DeckState) -> f64 {
        self.mass[deck.rank() as usize]
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.mass.iter().copied())
    }

    /// Σ_g μ(g) f(g) for `f` indexed by rank.
    pub fn expectation(&self, f: &[f64]) -> f64 {
        compensated_sum(self.mass.iter().zip(f).map(|(m, v)| m * v))
    }
}

/// ½ Σ |a(g) - b(g)|.
pub fn tv_distance(a: &GroupDistribution, b: &GroupDistribution) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::SizeMismatch { expected: a.n, found: b.n });
    }
    Ok(0.5 * compensated_sum(a.mass.iter().zip(&b.mass).map(|(x, y)| (x - y).abs())))
}

/// Rank tables for repeated convolution with a fixed step law.
#[derive(Debug, Clone)]
pub struct ExactEvolver {
    n: usize,
    weights: Vec<f64>,
    /// gather[s][g] = rank(σ_s⁻¹ ∘ g).
    gather: Vec<Vec<u32>>,
}

impl ExactEvolver {
    pub fn new(law: &StepLaw, cap: usize) -> Result<Self> {
        let n = law.n();
        let group = SymmetricGroup::with_cap(n, cap)?;
        let elements = group.elements();
        let size = elements.len();
        let mut weights = Vec::with_capacity(law.entries().len());
        let mut gather = Vec::with_capacity(law.entries().len());
        let mut scratch = vec![0usize; n];
        for (sigma, w) in law.entries() {
            let sigma = sigma.as_zero_based();
            let mut table = vec![0u32; size];
            for (g, elem) in elements.iter().enumerate() {
                // New state = σ ∘ old state.
                for (dst, &z) in scratch.iter_mut().zip(elem.as_zero_based()) {
                    *dst = sigma[z];
                }
                table[lehmer_rank(&scratch) as usize] = g as u32;
            }
            weights.push(*w);
            gather.push(table);
        }
        Ok(Self { n, weights, gather })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn support_size(&self) -> usize {
        self.weights.len()
    }

    /// μ_{t+1}(g) = Σ_σ q(σ) μ_t(σ⁻¹ ∘ g).
    pub fn step(&self, mu: &GroupDistribution) -> GroupDistribution {
        let mut out = vec![0.0; mu.mass.len()];
        self.step_into(&mu.mass, &mut out);
        GroupDistribution { n: self.n, mass: out }
    }

    fn step_into(&self, mu: &[f64], out: &mut [f64]) {
        const CHUNK: usize = 4096;
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, block)| {
            let base = c * CHUNK;
            for (offset, slot) in block.iter_mut().enumerate() {
                let g = base + offset;
                let mut acc = 0.0;
                for (w, table) in self.weights.iter().zip(&self.gather) {
                    acc += w * mu[table[g] as usize];
                }
                *slot = acc;
            }
        });
    }

    pub fn evolve(&self, start: &GroupDistribution, t: u64) -> GroupDistribution {
        let mut cur = start.mass.clone();
        let mut next = vec![0.0; cur.len()];
        for _ in 0..t {
            self.step_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        GroupDistribution { n: self.n, mass: cur }
    }

    /// E[f(X_{t+1}) | X_t = g] for every g.
    pub fn conditional_expectation(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        for (w, table) in self.weights.iter().zip(&self.gather) {
            // table maps the successor σ∘h to h.
            for (succ, &h) in table.iter().enumerate() {
                out[h as usize] += w * f[succ];
            }
        }
        out
    }

    /// E[(f(X_{t+1}) - f(X_t))² | X_t = g] for every g.
    pub fn conditional_square_increment(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        for (w, table) in self.weights.iter().zip(&self.gather) {
            for (succ, &h) in table.iter().enumerate() {
                let d = f[succ] - f[h as usize];
                out[h as usize] += w * d * d;
            }
        }
        out
    }
}

pub fn evolve_exact(law: &StepLaw, t: u64, start: &DeckState) -> Result<GroupDistribution> {
    evolve_exact_with_cap(law, t, start, DEFAULT_CAP)
}

pub fn evolve_exact_with_cap(law: &StepLaw, t: u64, start: &DeckState, cap: usize) -> Result<GroupDistribution> {
    if start.len() != law.n() {
        return Err(Error::SizeMismatch { expected: law.n(), found: start.len() });
    }
    let evolver = ExactEvolver::new(law, cap)?;
    Ok(evolver.evolve(&GroupDistribution::point_mass(start, cap)?, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TVRow {
    pub t: u64,
    pub tv: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TVCurve {
    pub rows: Vec<TVRow>,
}

impl TVCurve {
    pub fn push(&mut self, row: TVRow) {
        if let Some(last) = self.rows.last() {
            assert!(row.t > last.t, "curve times must increase");
        }
        self.rows.push(TVRow { tv: row.tv.clamp(0.0, 1.0), ..row });
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.tv).collect()
    }
}

/// Exact TV to uniform for t = 0..=t_max from `start`.
pub fn tv_curve_exact(model: &ShuffleModel, start: &DeckState, t_max: u64, cap: usize) -> Result<TVCurve> {
    let n = start.len();
    let law = exact_step_law_with_cap(model, n, cap)?;
    let evolver = ExactEvolver::new(&law, cap)?;
    let uniform = GroupDistribution::uniform(n, cap)?;
    let mut mu = GroupDistribution::point_mass(start, cap)?;
    let mut curve = TVCurve::default();
    for t in 0..=t_max {
        if t > 0 {
            mu = evolver.step(&mu);
        }
        curve.push(TVRow { t, tv: tv_distance(&mu, &uniform)?, ci_low: None, ci_high: None });
    }
    Ok(curve)
}

/// Smallest t with exact TV ≤ δ from the sorted deck.
pub fn mixing_time_exact(model: &ShuffleModel, n: usize, delta: f64, t_max: usize, cap: usize) -> Result<u64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("target distance must be positive, got {delta}")));
    }
    let law = exact_step_law_with_cap(model, n, cap)?;
    if delta >= 1.0 {
        return Ok(0);
    }
    let evolver = ExactEvolver::new(&law, cap)?;
    let uniform = GroupDistribution::uniform(n, cap)?;
    let mut mu = GroupDistribution::point_mass(&DeckState::sorted(n), cap)?;
    for t in 0..=t_max as u64 {
        if t > 0 {
            mu = evolver.step(&mu);
        }
        if tv_distance(&mu, &uniform)? <= delta {
            return Ok(t);
        }
    }
    Err(Error::NotAttained { delta, t_max })
}

/// Statistic-based lower bound on TV at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub t: u64,
    pub estimate: f64,
    pub ci_half: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Cut level c at which the separation was attained (or evaluated).
    pub cut_level: f64,
    /// P̂(Φ(X_t) > c).
    pub p_chain: f64,
    /// P̂(Φ(U) > c).
    pub p_uniform: f64,
}

impl McEstimate {
    pub fn row(&self) -> TVRow {
        TVRow { t: self.t, tv: self.estimate, ci_low: Some(self.ci_low), ci_high: Some(self.ci_high) }
    }
}

fn sort_values(v: &mut [f64]) {
    v.sort_unstable_by(|a, b| a.total_cmp(b));
}

/// Fraction of sorted `v` strictly above c.
fn fraction_above(v: &[f64], c: f64) -> f64 {
    let at_most = v.partition_point(|&x| x <= c);
    (v.len() - at_most) as f64 / v.len() as f64
}

fn half_width(p1: f64, n1: usize, p2: f64, n2: usize) -> f64 {
    CI_Z * (p1 * (1.0 - p1) / n1 as f64 + p2 * (1.0 - p2) / n2 as f64).sqrt()
}

fn estimate_at(t: u64, chain: &[f64], reference: &[f64], c: f64) -> McEstimate {
    let p_chain = fraction_above(chain, c);
    let p_uniform = fraction_above(reference, c);
    let diff = p_chain - p_uniform;
    let half = half_width(p_chain, chain.len(), p_uniform, reference.len());
    McEstimate {
        t,
        estimate: diff,
        ci_half: half,
        ci_low: (diff - half).max(-1.0),
        ci_high: (diff + half).min(1.0),
        cut_level: c,
        p_chain,
        p_uniform,
    }
}

/// sup_c [P̂(Φ_t > c) - P̂(Φ_U > c)] over the cut grid; inputs must be sorted.
pub fn separation_sup(t: u64, chain: &[f64], reference: &[f64]) -> McEstimate {
    let mut pooled: Vec<f64> = chain.iter().chain(reference).copied().collect();
    sort_values(&mut pooled);
    let grid: Vec<f64> = if chain.len().max(reference.len()) <= EXACT_GRID_MAX_TRIALS {
        pooled.dedup();
        pooled
    } else {
        (0..QUANTILE_LEVELS)
            .map(|i| pooled[((i as f64 + 0.5) / QUANTILE_LEVELS as f64 * pooled.len() as f64) as usize])
            .collect()
    };
    // c above every sample gives zero separation.
    let mut best = estimate_at(t, chain, reference, f64::INFINITY);
    for &c in &grid {
        let e = estimate_at(t, chain, reference, c);
        if e.estimate > best.estimate {
            best = e;
        }
    }
    best.ci_low = best.ci_low.max(0.0);
    best
}

const TRAJECTORY_CHUNK: usize = 256;
const REFERENCE_CHUNK: usize = 1024;
const TRAJECTORY_TAG: u64 = 0x7472;
const REFERENCE_TAG: u64 = 0x7265;

/// `trials` independent trajectories from the Φ̂ start, advanced in lockstep.
pub struct McTrajectories<'a> {
    stat: &'a TrackedStatistic,
    sampler: Sampler,
    orders: Vec<u16>,
    rngs: Vec<SplitMix64>,
    reference_seed: u64,
    t: u64,
}

impl<'a> McTrajectories<'a> {
    pub fn new(model: &ShuffleModel, stat: &'a TrackedStatistic, trials: usize, seed: u64) -> Result<Self> {
        if trials < MIN_TRIALS {
            return Err(Error::InvalidParameter(format!("need at least {MIN_TRIALS} trials, got {trials}")));
        }
        let n = stat.n();
        let sampler = Sampler::new(*model, n)?;
        let start = stat.phi_max_start().0.order_zero_based();
        let orders = start.repeat(trials);
        let base = SplitMix64::derive_seed(seed, TRAJECTORY_TAG);
        let rngs = (0..trials as u64).map(|i| SplitMix64::stream(base, i)).collect();
        Ok(Self { stat, sampler, orders, rngs, reference_seed: SplitMix64::derive_seed(seed, REFERENCE_TAG), t: 0 })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn trials(&self) -> usize {
        self.rngs.len()
    }

    pub fn advance(&mut self, steps: u64) {
        if steps == 0 {
            return;
        }
        let n = self.stat.n();
        let sampler = &self.sampler;
        self.orders
            .par_chunks_mut(n * TRAJECTORY_CHUNK)
            .zip(self.rngs.par_chunks_mut(TRAJECTORY_CHUNK))
            .for_each(|(orders, rngs)| {
                let mut sampler = sampler.clone();
                for (order, rng) in orders.chunks_mut(n).zip(rngs.iter_mut()) {
                    sampler.run(order, steps as usize, rng);
                }
            });
        self.t += steps;
    }

    /// Sorted Φ(X_t) over trajectories.
    pub fn chain_values(&self) -> Vec<f64> {
        let stat = self.stat;
        let mut v: Vec<f64> = self.orders.par_chunks(stat.n()).map(|o| stat.phi_of_order(o)).collect();
        sort_values(&mut v);
        v
    }

    /// Sorted Φ(U) for a fresh uniform sample tied to the current step.
    pub fn reference_values(&self) -> Vec<f64> {
        uniform_phi_sample(self.stat, self.trials(), SplitMix64::derive_seed(self.reference_seed, self.t))
    }

    pub fn estimate(&self) -> McEstimate {
        separation_sup(self.t, &self.chain_values(), &self.reference_values())
    }

    /// Separation of the fixed threshold test Φ > c.
    pub fn threshold(&self, c: f64) -> McEstimate {
        estimate_at(self.t, &self.chain_values(), &self.reference_values(), c)
    }
}

/// Sorted values of Φ on uniform random placements of the tracked cards.
pub fn uniform_phi_sample(stat: &TrackedStatistic, count: usize, seed: u64) -> Vec<f64> {
    let n = stat.n();
    let m = stat.m();
    let chunks = count.div_ceil(REFERENCE_CHUNK);
    let mut values: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = SplitMix64::stream(seed, c as u64);
            let mut positions: Vec<usize> = (0..n).collect();
            let mut occupied = vec![false; n];
            let len = REFERENCE_CHUNK.min(count - c * REFERENCE_CHUNK);
            (0..len)
                .map(|_| {
                    for i in 0..m {
                        let j = i + rng.below((n - i) as u64) as usize;
                        positions.swap(i, j);
                    }
                    occupied.fill(false);
                    for &z in &positions[..m] {
                        occupied[z] = true;
                    }
                    stat.sum_over(&occupied)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    sort_values(&mut values);
    values
}

pub fn mc_statistic_tv(model: &ShuffleModel, stat: &TrackedStatistic, t: u64, trials: usize, seed: u64) -> Result<McEstimate> {
    let mut run = McTrajectories::new(model, stat, trials, seed)?;
    run.advance(t);
    Ok(run.estimate())
}

/// Monte Carlo lower-bound curve at the given increasing times.
pub fn mc_tv_curve(model: &ShuffleModel, stat: &TrackedStatistic, times: &[u64], trials: usize, seed: u64) -> Result<TVCurve> {
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("times must be strictly increasing".into()));
    }
    let mut run = McTrajectories::new(model, stat, trials, seed)?;
    let mut curve = TVCurve::default();
    for &t in times {
        run.advance(t - run.t());
        curve.push(run.estimate().row());
    }
    Ok(curve)
}

pub fn mc_threshold_separation(
    model: &ShuffleModel,
    stat: &TrackedStatistic,
    t: u64,
    cut: f64,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    let mut run = McTrajectories::new(model, stat, trials, seed)?;
    run.advance(t);
    Ok(run.threshold(cut))
}

/// First t ≤ t_max whose statistic lower bound drops below δ.
pub fn mc_mixing_proxy(
    model: &ShuffleModel,
    stat: &TrackedStatistic,
    delta: f64,
    t_max: usize,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    let mut run = McTrajectories::new(model, stat, trials, seed)?;
    loop {
        let e = run.estimate();
        if e.estimate < delta {
            return Ok(e);
        }
        if run.t() >= t_max as u64 {
            return Err(Error::NotAttained { delta, t_max });
        }
        run.advance(1);
    }
}

/// Brute-force check of the drift bracket and second-moment inequalities on
/// the full chain over S_n.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub gamma_hat: f64,
    pub rho_hat: f64,
    pub r_hat: f64,
    pub phi_hat: f64,
    pub phi_abs_max: f64,
    pub t_max: u64,
    pub drift_violations: usize,
    pub mean_violations: usize,
    pub moment_violations: usize,
    pub recursion_violations: usize,
    pub variance_violations: usize,
    /// (t, E Φ(X_t), E Φ(X_t)²)
    pub moments: Vec<(u64, f64, f64)>,
}

impl LemmaCheck {
    pub fn all_hold(&self) -> bool {
        self.drift_violations
            + self.mean_violations
            + self.moment_violations
            + self.recursion_violations
            + self.variance_violations
            == 0
    }
}

/// ρ(γ) = max_g |E[Φ' | g] - (1-γ)Φ(g)|.
fn defect_at(gamma: f64, phi: &[f64], drift: &[f64]) -> f64 {
    phi.iter().zip(drift).map(|(f, d)| (d - (1.0 - gamma) * f).abs()).fold(0.0, f64::max)
}

/// The γ in (0, 1/2] minimizing the per-state drift defect, with that defect.
pub fn best_contraction(phi: &[f64], drift: &[f64]) -> (f64, f64) {
    // ρ(γ) is a maximum of absolute affine functions, hence convex.
    let (mut lo, mut hi) = (1e-12, 0.5);
    for _ in 0..200 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if defect_at(a, phi, drift) <= defect_at(b, phi, drift) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let mut gamma = 0.5 * (lo + hi);
    if defect_at(0.5, phi, drift) <= defect_at(gamma, phi, drift) {
        gamma = 0.5;
    }
    (gamma, defect_at(gamma, phi, drift))
}

pub fn verify_lemma_inequalities(model: &ShuffleModel, stat: &TrackedStatistic, t_max: u64, cap: usize) -> Result<LemmaCheck> {
    let n = stat.n();
    let law = exact_step_law_with_cap(model, n, cap)?;
    let evolver = ExactEvolver::new(&law, cap)?;
    let group = SymmetricGroup::with_cap(n, cap)?;
    let phi: Vec<f64> = group
        .elements()
        .into_iter()
        .map(|g| stat.phi(&DeckState::from_permutation(g)))
        .collect::<Result<_>>()?;
    let phi_sq: Vec<f64> = phi.iter().map(|f| f * f).collect();
    let abs_phi: Vec<f64> = phi.iter().map(|f| f.abs()).collect();
    let drift = evolver.conditional_expectation(&phi);
    let r_hat = evolver.conditional_square_increment(&phi).into_iter().fold(0.0, f64::max);
    let (gamma, rho) = best_contraction(&phi, &drift);
    let phi_hat = phi.iter().copied().fold(f64::MIN, f64::max);
    let phi_abs_max = abs_phi.iter().copied().fold(0.0, f64::max);

    let (start, phi0) = stat.phi_max_start();
    let tol = |scale: f64| 1e-12 * scale.abs().max(1.0);
    let mut check = LemmaCheck {
        gamma_hat: gamma,
        rho_hat: rho,
        r_hat,
        phi_hat,
        phi_abs_max,
        t_max,
        drift_violations: 0,
        mean_violations: 0,
        moment_violations: 0,
        recursion_violations: 0,
        variance_violations: 0,
        moments: Vec::with_capacity(t_max as usize + 1),
    };
    let mut mu = GroupDistribution::point_mass(&start, cap)?;
    let mut prev: Option<(f64, f64, f64)> = None;
    for t in 0..=t_max {
        if t > 0 {
            mu = evolver.step(&mu);
        }
        let mean = mu.expectation(&phi);
        let second = mu.expectation(&phi_sq);
        let abs_mean = mu.expectation(&abs_phi);
        let decay = (1.0 - gamma).powi(t as i32);

        if let Some((m0, s0, a0)) = prev {
            let centre = (1.0 - gamma) * m0;
            if mean < centre - rho - tol(centre) || mean > centre + rho + tol(centre) {
                check.drift_violations += 1;
            }
            let step_bound = (1.0 - 2.0 * gamma) * s0 + 2.0 * rho * a0 + r_hat;
            if second > step_bound + tol(step_bound) {
                check.recursion_violations += 1;
            }
        }
        let centre = decay * phi0;
        if (mean - centre).abs() > rho / gamma + tol(centre) {
            check.mean_violations += 1;
        }
        let moment_bound = (1.0 - 2.0 * gamma).powi(t as i32) * phi0 * phi0 + (r_hat + 2.0 * rho * phi_abs_max) / (2.0 * gamma);
        if second > moment_bound + tol(moment_bound) {
            check.moment_violations += 1;
        }
        let variance_bound = (r_hat + 6.0 * rho * phi_abs_max) / (2.0 * gamma);
        if second - mean * mean > variance_bound + tol(variance_bound) {
            check.variance_violations += 1;
        }
        check.moments.push((t, mean, second));
        prev = Some((mean, second, abs_mean));
    }
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::Permutation;
    use crate::shuffle::exact_step_law;

    fn overhand() -> ShuffleModel {
        ShuffleModel::overhand(0.5).unwrap()
    }

    fn all_models() -> Vec<ShuffleModel> {
        vec![overhand(), ShuffleModel::circular_overhand(0.5).unwrap(), ShuffleModel::rudvalis()]
    }

    fn deck(images: &[usize]) -> DeckState {
        DeckState::from_permutation(Permutation::from_images(images).unwrap())
    }

    #[test]
    fn tv_basics() {
        let u = GroupDistribution::uniform(3, DEFAULT_CAP).unwrap();
        assert_eq!(tv_distance(&u, &u).unwrap(), 0.0);
        let point = GroupDistribution::point_mass(&DeckState::sorted(3), DEFAULT_CAP).unwrap();
        assert!((tv_distance(&point, &u).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        let other = GroupDistribution::uniform(4, DEFAULT_CAP).unwrap();
        assert!(tv_distance(&u, &other).is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(GroupDistribution::from_masses(3, vec![1.0 / 6.0; 6]).is_ok());
        assert!(GroupDistribution::from_masses(3, vec![0.2; 6]).is_err());
        assert!(GroupDistribution::from_masses(3, vec![0.5; 2]).is_err());
        let mut m = vec![0.0; 6];
        m[0] = 1.5;
        m[1] = -0.5;
        assert!(GroupDistribution::from_masses(3, m).is_err());
        assert!(matches!(GroupDistribution::uniform(9, DEFAULT_CAP), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn tv_equals_maximal_event_difference() {
        let law = exact_step_law(&overhand(), 4).unwrap();
        let mu = evolve_exact(&law, 2, &DeckState::sorted(4)).unwrap();
        let u = GroupDistribution::uniform(4, DEFAULT_CAP).unwrap();
        let event: f64 = mu.masses().iter().zip(u.masses()).map(|(a, b)| (a - b).max(0.0)).sum();
        assert!((tv_distance(&mu, &u).unwrap() - event).abs() < 1e-15);
    }

    #[test]
    fn three_card_evolution() {
        let law = exact_step_law(&overhand(), 3).unwrap();
        let start = DeckState::sorted(3);
        let mu0 = evolve_exact(&law, 0, &start).unwrap();
        assert_eq!(mu0.mass_of(&start), 1.0);

        let mu1 = evolve_exact(&law, 1, &start).unwrap();
        for g in [[1, 2, 3], [2, 1, 3], [1, 3, 2], [3, 2, 1]] {
            assert!((mu1.mass_of(&deck(&g)) - 0.25).abs() < 1e-15);
        }
        for g in [[2, 3, 1], [3, 1, 2]] {
            assert_eq!(mu1.mass_of(&deck(&g)), 0.0);
        }

        let mu2 = evolve_exact(&law, 2, &start).unwrap();
        assert!((mu2.mass_of(&start) - 0.25).abs() < 1e-15);
        for g in [[2, 1, 3], [1, 3, 2], [3, 2, 1]] {
            assert!((mu2.mass_of(&deck(&g)) - 0.125).abs() < 1e-15);
        }
        for g in [[2, 3, 1], [3, 1, 2]] {
            assert!((mu2.mass_of(&deck(&g)) - 3.0 / 16.0).abs() < 1e-15);
        }

        let curve = tv_curve_exact(&overhand(), &start, 2, DEFAULT_CAP).unwrap();
        let tv = curve.values();
        assert_eq!(tv[0], 1.0 - 1.0 / 6.0);
        assert!((tv[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((tv[2] - 0.125).abs() < 1e-12);
    }

    #[test]
    fn mixing_times() {
        assert_eq!(mixing_time_exact(&overhand(), 3, 0.25, 100, DEFAULT_CAP).unwrap(), 2);
        assert_eq!(mixing_time_exact(&overhand(), 5, 1.0, 0, DEFAULT_CAP).unwrap(), 0);
        assert_eq!(mixing_time_exact(&overhand(), 5, 1.5, 0, DEFAULT_CAP).unwrap(), 0);
        assert!(matches!(mixing_time_exact(&overhand(), 6, 1e-3, 3, DEFAULT_CAP), Err(Error::NotAttained { .. })));
        assert!(matches!(mixing_time_exact(&overhand(), 9, 0.25, 10, DEFAULT_CAP), Err(Error::CapExceeded { .. })));
        // Rudvalis on three cards: the oracle is the curve itself.
        let rud = ShuffleModel::rudvalis();
        let tau = mixing_time_exact(&rud, 3, 0.25, 100, DEFAULT_CAP).unwrap();
        let curve = tv_curve_exact(&rud, &DeckState::sorted(3), tau, DEFAULT_CAP).unwrap().values();
        assert!(curve[tau as usize] <= 0.25);
        assert!(curve[..tau as usize].iter().all(|&v| v > 0.25));
    }

    #[test]
    fn rudvalis_three_cards_by_hand() {
        let law = exact_step_law(&ShuffleModel::rudvalis(), 3).unwrap();
        let mu1 = evolve_exact(&law, 1, &DeckState::sorted(3)).unwrap();
        let u = GroupDistribution::uniform(3, DEFAULT_CAP).unwrap();
        // Two atoms of 1/2 against 1/6 everywhere.
        assert!((tv_distance(&mu1, &u).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_is_fixed() {
        for model in all_models() {
            for n in 3..=6 {
                let law = exact_step_law(&model, n).unwrap();
                let ev = ExactEvolver::new(&law, DEFAULT_CAP).unwrap();
                let u = GroupDistribution::uniform(n, DEFAULT_CAP).unwrap();
                assert!(tv_distance(&ev.step(&u), &u).unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn tv_is_non_increasing() {
        for model in all_models() {
            for n in 3..=5 {
                let curve = tv_curve_exact(&model, &DeckState::sorted(n), 200, DEFAULT_CAP).unwrap().values();
                for w in curve.windows(2) {
                    assert!(w[1] <= w[0] + 1e-12, "{} n={n}", model.name());
                }
            }
        }
    }

    #[test]
    fn overhand_evolution_is_inversion_symmetric() {
        for model in [overhand(), ShuffleModel::circular_overhand(0.3).unwrap()] {
            for n in 3..=5 {
                let law = exact_step_law(&model, n).unwrap();
                let group = SymmetricGroup::new(n).unwrap();
                for t in [1, 2, 5] {
                    let mu = evolve_exact(&law, t, &DeckState::sorted(n)).unwrap();
                    for g in group.elements() {
                        let a = mu.mass_of(&DeckState::from_permutation(g.clone()));
                        let b = mu.mass_of(&DeckState::from_permutation(g.inverse()));
                        assert!((a - b).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn evolution_preserves_mass() {
        let law = exact_step_law(&overhand(), 6).unwrap();
        let mu = evolve_exact(&law, 30, &DeckState::sorted(6)).unwrap();
        assert!((mu.total_mass() - 1.0).abs() < 1e-12);
        assert!(mu.masses().iter().all(|&m| m >= 0.0));
    }

    #[test]
    fn sampled_trajectories_match_exact_law() {
        // Composition convention check: empirical law of X_3 on four cards.
        let n = 4;
        let t = 3;
        let trials = 400_000;
        for model in all_models() {
            let law = exact_step_law(&model, n).unwrap();
            let start = deck(&[2, 4, 1, 3]);
            let exact = evolve_exact(&law, t, &start).unwrap();
            let mut sampler = Sampler::new(model, n).unwrap();
            let mut counts = vec![0u64; 24];
            let mut rng = SplitMix64::stream(99, 0);
            for _ in 0..trials {
                let mut order = start.order_zero_based();
                sampler.run(&mut order, t as usize, &mut rng);
                counts[DeckState::from_order_zero_based(&order).unwrap().rank() as usize] += 1;
            }
            for (g, &c) in counts.iter().enumerate() {
                let p = exact.masses()[g];
                let se = (p * (1.0 - p) / trials as f64).sqrt();
                assert!((c as f64 / trials as f64 - p).abs() <= 5.0 * se + 1e-12, "{} rank {g}", model.name());
            }
        }
    }

    #[test]
    fn separation_sup_simple_cases() {
        let a = vec![1.0; 200];
        let b = vec![0.0; 200];
        let e = separation_sup(0, &a, &b);
        assert_eq!(e.estimate, 1.0);
        assert_eq!(e.cut_level, 0.0);
        let e = separation_sup(0, &b, &b);
        assert_eq!(e.estimate, 0.0);
        let e = separation_sup(0, &b, &a);
        assert_eq!(e.estimate, 0.0);
    }

    #[test]
    fn mc_extremes() {
        let n = 64;
        let stat = TrackedStatistic::half_deck(n).unwrap();
        let e = mc_statistic_tv(&overhand(), &stat, 0, 2000, 4).unwrap();
        assert!(e.estimate > 0.99);
        let late = mc_statistic_tv(&ShuffleModel::circular_overhand(0.5).unwrap(), &stat, 8 * n as u64 * n as u64, 2000, 4).unwrap();
        assert!(late.ci_low <= 0.0 + 1e-12 && late.estimate <= late.ci_half * 2.0 + 0.02, "{late:?}");
        assert!(mc_statistic_tv(&overhand(), &stat, 0, 99, 4).is_err());
    }

    #[test]
    fn mc_is_reproducible() {
        let stat = TrackedStatistic::half_deck(16).unwrap();
        let a = mc_tv_curve(&overhand(), &stat, &[0, 5, 20], 500, 11).unwrap();
        let b = mc_tv_curve(&overhand(), &stat, &[0, 5, 20], 500, 11).unwrap();
        assert_eq!(a, b);
        assert!(mc_tv_curve(&overhand(), &stat, &[5, 5], 500, 11).is_err());
        let c = mc_statistic_tv(&overhand(), &stat, 20, 500, 11).unwrap();
        assert_eq!(c.row(), a.rows[2]);
    }

    #[test]
    fn uniform_reference_is_uniform() {
        // Mean of Φ(U) is m/n times the sum of all cosines, zero.
        let stat = TrackedStatistic::half_deck(10).unwrap();
        let v = uniform_phi_sample(&stat, 200_000, 3);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 0.02, "{mean}");
        assert_eq!(v.len(), 200_000);
    }

    #[test]
    fn mc_dominated_by_exact_at_six() {
        let n = 6;
        let stat = TrackedStatistic::half_deck(n).unwrap();
        for model in all_models() {
            let (start, _) = stat.phi_max_start();
            let exact = tv_curve_exact(&model, &start, 50, DEFAULT_CAP).unwrap().values();
            let times: Vec<u64> = (0..=50).collect();
            let mc = mc_tv_curve(&model, &stat, &times, 10_000, 21).unwrap();
            for row in &mc.rows {
                let half = row.ci_high.unwrap() - row.tv;
                assert!(row.tv <= exact[row.t as usize] + 2.0 * half.max(0.0) + 1e-12, "{} t={}", model.name(), row.t);
            }
        }
    }

    #[test]
    fn lemma_inequalities_on_six_cards() {
        let stat = TrackedStatistic::half_deck(6).unwrap();
        let check = verify_lemma_inequalities(&overhand(), &stat, 100, DEFAULT_CAP).unwrap();
        assert!(check.all_hold(), "{check:?}");
        assert!(check.gamma_hat > 0.0 && check.gamma_hat <= 0.5);
        assert!((check.phi_hat - 2.0).abs() < 1e-12);
        assert_eq!(check.moments.len(), 101);
    }

    #[test]
    fn best_contraction_recovers_eigenfunctions() {
        let phi = vec![1.0, -2.0, 0.5];
        let drift: Vec<f64> = phi.iter().map(|f| 0.7 * f).collect();
        let (g, r) = best_contraction(&phi, &drift);
        assert!((g - 0.3).abs() < 1e-9 && r < 1e-9);
    }
}
