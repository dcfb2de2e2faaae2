//! Exact single-card position chains.
//!
//! Cut patterns and coins are i.i.d. across steps, so the position of one
//! card is itself a Markov chain on 1..n. Everything here is exact
//! arithmetic on the n x n kernel; nothing is simulated.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::shuffle::{ModelKind, ShuffleModel};

/// Row-stochastic n x n table: `get(k, j)` = P(next position j | position k).
#[derive(Debug, Clone, PartialEq)]
pub struct PositionKernel {
    n: usize,
    entries: Vec<f64>,
}

impl PositionKernel {
    /// Builds from row-major entries and checks stochasticity to 1e-12.
    pub fn from_rows(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::SizeMismatch { expected: n * n, found: entries.len() });
        }
        let kernel = Self { n, entries };
        if let Some(k) = kernel.first_bad_row(1e-12) {
            return Err(Error::InvalidParameter(format!("row {k} is not a probability vector")));
        }
        Ok(kernel)
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// 1-based entry.
    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.entries[(k - 1) * self.n + (j - 1)]
    }

    /// 1-based row as a slice indexed from 0.
    pub fn row(&self, k: usize) -> &[f64] {
        &self.entries[(k - 1) * self.n..k * self.n]
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.entries
            .chunks(self.n)
            .map(|r| (r.iter().copied().collect::<CompensatedSum>().value() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn first_bad_row(&self, tol: f64) -> Option<usize> {
        self.entries.chunks(self.n).position(|r| {
            r.iter().any(|&x| x < 0.0 || !x.is_finite())
                || (r.iter().copied().collect::<CompensatedSum>().value() - 1.0).abs() > tol
        }).map(|i| i + 1)
    }

    /// `(K f)(k) = Σ_j K[k][j] f(j)` for a function on positions (0-based slice).
    pub fn apply_to_function(&self, f: &[f64]) -> Vec<f64> {
        self.entries
            .chunks(self.n)
            .map(|r| r.iter().zip(f).map(|(a, b)| a * b).collect::<CompensatedSum>().value())
            .collect()
    }

    /// `(μ K)(j) = Σ_k μ(k) K[k][j]` for a distribution on positions.
    pub fn push_forward(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![CompensatedSum::new(); self.n];
        for (row, &m) in self.entries.chunks(self.n).zip(mu) {
            if m != 0.0 {
                for (o, &x) in out.iter_mut().zip(row) {
                    o.add(m * x);
                }
            }
        }
        out.into_iter().map(|s| s.value()).collect()
    }

    /// Matrix product `self · other` with compensated dot products.
    pub fn multiply(&self, other: &PositionKernel) -> Result<PositionKernel> {
        if self.n != other.n {
            return Err(Error::SizeMismatch { expected: self.n, found: other.n });
        }
        let n = self.n;
        let mut transposed = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                transposed[j * n + i] = other.entries[i * n + j];
            }
        }
        let mut entries = vec![0.0; n * n];
        for (i, row) in self.entries.chunks(n).enumerate() {
            for (j, col) in transposed.chunks(n).enumerate() {
                let mut s = CompensatedSum::new();
                for (a, b) in row.iter().zip(col) {
                    s.add(a * b);
                }
                entries[i * n + j] = s.value();
            }
        }
        let product = PositionKernel { n, entries };
        debug_assert!(product.first_bad_row(1e-12).is_none(), "row sums drifted");
        Ok(product)
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &PositionKernel) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// `K^t` by repeated squaring; t = 0 gives the identity.
pub fn kernel_power(kernel: &PositionKernel, t: u64) -> PositionKernel {
    let mut result = PositionKernel::identity(kernel.n);
    let mut base = kernel.clone();
    let mut e = t;
    let mut first = true;
    while e > 0 {
        if e & 1 == 1 {
            result = if first { base.clone() } else { result.multiply(&base).expect("same size") };
            first = false;
        }
        e >>= 1;
        if e > 0 {
            base = base.multiply(&base).expect("same size");
        }
    }
    result
}

/// The single-card kernel of `model` on `n` cards. For Rudvalis this is the
/// one-step kernel; see [`rudvalis_nstep_kernel`] for the n-step block.
pub fn position_kernel(model: &ShuffleModel, n: usize) -> Result<PositionKernel> {
    if n < 3 {
        return Err(Error::InvalidParameter("position kernels need n >= 3".into()));
    }
    Ok(match model.kind() {
        ModelKind::Overhand => linear_overhand_kernel(n, model.p().expect("overhand p")),
        ModelKind::CircularOverhand => circular_overhand_kernel(n, model.p().expect("overhand p")),
        ModelKind::Rudvalis => rudvalis_kernel(n),
    })
}

/// Law of the distance from a position to the nearest cut on one side, when
/// `room` slots are available on that side: P(a) = p(1-p)^a for a < room and
/// the remaining (1-p)^room mass at a = room.
fn run_length_law(room: usize, p: f64) -> Vec<f64> {
    let q = 1.0 - p;
    let mut law: Vec<f64> = (0..room).map(|a| p * q.powi(a as i32)).collect();
    law.push(q.powi(room as i32));
    law
}

fn linear_overhand_kernel(n: usize, p: f64) -> PositionKernel {
    let mut entries = vec![0.0; n * n];
    for z in 0..n {
        let back = run_length_law(z, p);
        let forward = run_length_law(n - 1 - z, p);
        let row = &mut entries[z * n..(z + 1) * n];
        // The packet is [z - a, z + b]; the card lands at z + b - a.
        for (a, &pa) in back.iter().enumerate() {
            for (b, &pb) in forward.iter().enumerate() {
                row[z + b - a] += pa * pb;
            }
        }
    }
    PositionKernel { n, entries }
}

/// Terms |j| <= FOLD_FACTOR * n are summed when folding onto Z_n.
pub const FOLD_FACTOR: usize = 64;

/// Circular displacement law `P(D ≡ d mod n)`, d = 0..n-1, obtained by
/// folding `(p/(2-p))(1-p)^|j|` onto Z_n and renormalizing.
pub fn circular_displacement_law(n: usize, p: f64) -> Vec<f64> {
    let c = p / (2.0 - p);
    let q = 1.0 - p;
    let mut law = vec![CompensatedSum::new(); n];
    let reach = (FOLD_FACTOR * n) as i64;
    for j in (-reach..=reach).rev() {
        let w = c * q.powi(j.unsigned_abs() as i32);
        law[j.rem_euclid(n as i64) as usize].add(w);
    }
    let mut law: Vec<f64> = law.into_iter().map(|s| s.value()).collect();
    let total: f64 = law.iter().copied().collect::<CompensatedSum>().value();
    for w in &mut law {
        *w /= total;
    }
    law
}

/// Tail mass discarded by [`circular_displacement_law`] before renormalizing.
pub fn circular_fold_truncation(n: usize, p: f64) -> f64 {
    (1.0 - p).powi((FOLD_FACTOR * n) as i32)
}

/// Exact displacement law of a single card under the sampler that redraws
/// zero-cut circular patterns, d = 0..n-1.
pub fn circular_displacement_exact(n: usize, p: f64) -> Vec<f64> {
    let q = 1.0 - p;
    let mut law = vec![0.0; n];
    // a slots free behind the card, b ahead.
    for a in 0..n {
        for b in 0..n - a {
            let w = if a + b + 1 == n {
                // A single cut closes the arc on both sides.
                p * q.powi((n - 1) as i32)
            } else {
                p * p * q.powi((a + b) as i32)
            };
            law[(b + n - a) % n] += w;
        }
    }
    let norm = 1.0 - q.powi(n as i32);
    law.iter().map(|w| w / norm).collect()
}

fn circular_overhand_kernel(n: usize, p: f64) -> PositionKernel {
    let law = circular_displacement_law(n, p);
    let mut entries = vec![0.0; n * n];
    for k in 0..n {
        for (d, &w) in law.iter().enumerate() {
            entries[k * n + (k + d) % n] = w;
        }
    }
    PositionKernel { n, entries }
}

/// One-step Rudvalis kernel: positions 1..n-2 shift down deterministically;
/// from n-1 or n the card goes to 1 or n with probability 1/2 each.
fn rudvalis_kernel(n: usize) -> PositionKernel {
    let mut entries = vec![0.0; n * n];
    for z in 0..n - 2 {
        entries[z * n + z + 1] = 1.0;
    }
    for z in [n - 2, n - 1] {
        entries[z * n] = 0.5;
        entries[z * n + n - 1] = 0.5;
    }
    PositionKernel { n, entries }
}

/// Closed-form n-step Rudvalis probabilities `p_{k, j}`, j = 1..n, returned
/// as a 0-indexed row.
pub fn rudvalis_nstep_closed_form(n: usize, k: usize) -> Result<Vec<f64>> {
    if n < 3 {
        return Err(Error::InvalidParameter("closed form needs n >= 3".into()));
    }
    if k == 0 || k > n {
        return Err(Error::PositionOutOfRange { k, n });
    }
    let half = |e: usize| 0.5f64.powi(e as i32);
    let mut row = vec![0.0; n];
    if k <= n - 2 {
        row[n - 1] = half(k + 1);
        for j in 1..=k + 1 {
            row[j - 1] = half(k + 2 - j);
        }
    } else {
        row[0] = 0.25 + half(n);
        row[n - 1] = 0.25 + half(n);
        for j in 2..n {
            row[j - 1] = half(n + 1 - j);
        }
    }
    Ok(row)
}

/// The n-step Rudvalis kernel assembled from the closed form.
pub fn rudvalis_nstep_kernel(n: usize) -> Result<PositionKernel> {
    let mut entries = Vec::with_capacity(n * n);
    for k in 1..=n {
        entries.extend(rudvalis_nstep_closed_form(n, k)?);
    }
    PositionKernel::from_rows(n, entries)
}

/// Result of [`subdominant_eigenvalue`]. `degenerate` marks kernels whose
/// returned value is 1 (no spectral gap, e.g. the identity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubdominantEstimate {
    pub value: f64,
    pub iterations: usize,
    pub degenerate: bool,
}

pub const DEFAULT_POWER_ITERATIONS: usize = 20_000;

/// Stationary distribution by iterating the lazy chain `(I + K)/2` from uniform.
pub fn stationary_distribution(kernel: &PositionKernel) -> Vec<f64> {
    let n = kernel.n;
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..100_000 {
        let next: Vec<f64> =
            kernel.push_forward(&pi).iter().zip(&pi).map(|(a, b)| 0.5 * (a + b)).collect();
        let change: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if change < 1e-15 {
            break;
        }
    }
    pi
}

/// Largest-modulus eigenvalue on the complement of the constants, by power
/// iteration started from the cosine vector with the stationary component
/// projected out. Converged once successive Rayleigh quotients differ by
/// less than 1e-13.
pub fn subdominant_eigenvalue(kernel: &PositionKernel) -> Result<SubdominantEstimate> {
    subdominant_eigenvalue_with_cap(kernel, DEFAULT_POWER_ITERATIONS)
}

pub fn subdominant_eigenvalue_with_cap(kernel: &PositionKernel, max_iterations: usize) -> Result<SubdominantEstimate> {
    let n = kernel.n;
    let pi = stationary_distribution(kernel);
    let dot = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).zip(&pi).map(|((x, y), w)| x * y * w).collect::<CompensatedSum>().value()
    };
    let project = |v: &mut Vec<f64>| {
        let mean = v.iter().zip(&pi).map(|(x, w)| x * w).collect::<CompensatedSum>().value();
        for x in v.iter_mut() {
            *x -= mean;
        }
    };
    let theta = 2.0 * PI / n as f64;
    let mut v: Vec<f64> = (1..=n).map(|k| (theta * k as f64).cos()).collect();
    project(&mut v);
    let mut previous: Option<f64> = None;
    for iteration in 1..=max_iterations {
        let norm = dot(&v, &v).sqrt();
        if norm == 0.0 {
            return Ok(SubdominantEstimate { value: 0.0, iterations: iteration, degenerate: false });
        }
        for x in v.iter_mut() {
            *x /= norm;
        }
        let mut w = kernel.apply_to_function(&v);
        project(&mut w);
        let rayleigh = dot(&v, &w);
        if let Some(prev) = previous {
            if (rayleigh - prev).abs() < 1e-13 {
                return Ok(SubdominantEstimate {
                    value: rayleigh,
                    iterations: iteration,
                    degenerate: (rayleigh - 1.0).abs() < 1e-12,
                });
            }
        }
        previous = Some(rayleigh);
        v = w;
    }
    Err(Error::NotConverged { iterations: max_iterations })
}

/// Eigenvalue of a circulant kernel at Fourier frequency `freq`:
/// `Σ_d K[1][1+d] cos(2π d freq / n)`.
pub fn circulant_eigenvalue(kernel: &PositionKernel, freq: usize) -> f64 {
    let n = kernel.n;
    let theta = 2.0 * PI * freq as f64 / n as f64;
    kernel
        .row(1)
        .iter()
        .enumerate()
        .map(|(d, &w)| w * (theta * d as f64).cos())
        .collect::<CompensatedSum>()
        .value()
}
