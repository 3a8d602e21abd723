//! Brute-force Monte Carlo over the full 6-D filtered momentum space.
//!
//! Each photon is parameterized by (|k|, k_y, θ) with k_x = ρ sin θ,
//! k_z = ρ cos θ, ρ = √(|k|² − k_y²), so d³k = |k| d|k| dk_y dθ and the
//! forward hemisphere is θ ∈ (−π/2, π/2).
//!
//! The Gaussian proposal draws |k| from the frequency filter, k_y from the k_y
//! filter, k_ix + k_sx from the pump envelope (through α) and β = (θ_i − θ_s)/2
//! from an even mixture of a uniform density and a truncated Cauchy density
//! of width 1/√(L k₀), which follows the phase-matching ridge.
//!
//! Samples are drawn in batches; batch `b` uses ChaCha8 seeded from the
//! spec seed on stream `b`. Batch statistics are merged in batch order, so
//! the estimate does not depend on thread scheduling.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::amplitude::{eval_amplitude, AmplitudeKind, PhotonMomentum};
use crate::error::{Error, Result};
use crate::observables::{
    assemble_ratio, enhancement_ratio, Channel, KindIntegrals, McDiagnostics, RatioMeta,
    RatioResult,
};
use crate::quadrature::IntegralResult;
use crate::units::{ExperimentConfig, Reduction, Regime};

pub const DEFAULT_SAMPLES: u64 = 10_000_000;
pub const MIN_SAMPLES: u64 = 100_000;
/// Algorithm identifier recorded with every estimate.
pub const RNG_ID: &str = "chacha8(rand_chacha 0.9; seed_from_u64(seed), stream = batch index)";
const BATCH: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Importance {
    /// Uniform over the box lo..hi in (k_ix, k_iy, k_iz, k_sx, k_sy, k_sz).
    /// Points with k_z < 0 are rejected and contribute zero.
    UniformBox {
        lo: [f64; 6],
        hi: [f64; 6],
    },
    GaussianProposal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSpec {
    pub samples: u64,
    pub seed: u64,
    pub importance: Importance,
}

impl McSpec {
    /// Gaussian-proposal plan.
    pub fn new(samples: u64, seed: u64) -> Self {
        Self {
            samples,
            seed,
            importance: Importance::GaussianProposal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < MIN_SAMPLES {
            return Err(Error::config(
                "samples",
                format!(
                    "at least {MIN_SAMPLES} samples required, got {}",
                    self.samples
                ),
            ));
        }
        if let Importance::UniformBox { lo, hi } = &self.importance {
            if lo
                .iter()
                .zip(hi)
                .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
            {
                return Err(Error::config(
                    "importance",
                    "uniform box needs finite lo < hi on every axis",
                ));
            }
        }
        Ok(())
    }
}

/// Running mean and co-moment matrix of N integrand components.
#[derive(Debug, Clone, Copy)]
struct Moments<const N: usize> {
    n: u64,
    rejected: u64,
    mean: [f64; N],
    m2: [[f64; N]; N],
    any_nonzero: bool,
}

impl<const N: usize> Moments<N> {
    fn new() -> Self {
        Self {
            n: 0,
            rejected: 0,
            mean: [0.0; N],
            m2: [[0.0; N]; N],
            any_nonzero: false,
        }
    }

    fn push(&mut self, x: [f64; N]) {
        self.n += 1;
        let n = self.n as f64;
        let mut delta = [0.0; N];
        for c in 0..N {
            delta[c] = x[c] - self.mean[c];
            self.mean[c] += delta[c] / n;
            self.any_nonzero |= x[c] != 0.0;
        }
        for a in 0..N {
            let after = x[a] - self.mean[a];
            for b in 0..N {
                self.m2[a][b] += delta[b] * after;
            }
        }
    }

    fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let mut delta = [0.0; N];
        for c in 0..N {
            delta[c] = other.mean[c] - self.mean[c];
            self.mean[c] += delta[c] * nb / n;
        }
        for a in 0..N {
            for b in 0..N {
                self.m2[a][b] += other.m2[a][b] + delta[a] * delta[b] * na * nb / n;
            }
        }
        self.n += other.n;
        self.rejected += other.rejected;
        self.any_nonzero |= other.any_nonzero;
    }

    /// Covariance of the mean estimates.
    fn cov_of_mean(&self, a: usize, b: usize) -> f64 {
        let n = self.n as f64;
        self.m2[a][b] / (n - 1.0) / n
    }

    fn result(&self, c: usize) -> IntegralResult {
        IntegralResult {
            value: self.mean[c],
            error_estimate: self.cov_of_mean(c, c).max(0.0).sqrt(),
            evals: self.n,
            converged: true,
        }
    }
}

/// Proposal for the Gaussian importance sampler.
struct Proposal {
    k0: f64,
    k_dist: Normal<f64>,
    ky_dist: Normal<f64>,
    kp_dist: Normal<f64>,
    cauchy_scale: f64,
    cauchy_half: f64,
}

impl Proposal {
    fn new(cfg: &ExperimentConfig) -> Self {
        let k0 = cfg.k0();
        let s = (1.0 / (cfg.crystal_length_um * k0).sqrt()).clamp(1e-4, 1.0);
        Self {
            k0,
            k_dist: Normal::new(k0, 1.0 / cfg.filter_omega_um).expect("positive width"),
            ky_dist: Normal::new(0.0, 1.0 / cfg.filter_omega_y_um).expect("positive width"),
            kp_dist: Normal::new(0.0, 1.0 / cfg.pump_waist_um).expect("positive width"),
            cauchy_scale: s,
            cauchy_half: (FRAC_PI_2 / s).atan(),
        }
    }

    fn beta_density(&self, beta: f64) -> f64 {
        let s = self.cauchy_scale;
        0.5 / PI + 0.5 * s / ((s * s + beta * beta) * 2.0 * self.cauchy_half)
    }

    /// A momentum pair and its importance weight 1/q, or `None` for a draw
    /// outside the forward hemisphere.
    fn draw(&self, rng: &mut ChaCha8Rng) -> Option<(PhotonMomentum, PhotonMomentum, f64)> {
        let beta = if rng.random::<bool>() {
            PI * (rng.random::<f64>() - 0.5)
        } else {
            self.cauchy_scale * (self.cauchy_half * (2.0 * rng.random::<f64>() - 1.0)).tan()
        };
        let kp = self.kp_dist.sample(rng);
        let (ki, ks) = (self.k_dist.sample(rng), self.k_dist.sample(rng));
        let (kiy, ksy) = (self.ky_dist.sample(rng), self.ky_dist.sample(rng));

        let cb = beta.cos();
        let sa = kp / (2.0 * self.k0 * cb);
        if !(sa.abs() < 1.0) {
            return None;
        }
        let alpha = sa.asin();
        if alpha.abs() + beta.abs() >= FRAC_PI_2 {
            return None;
        }
        let photon = |k: f64, ky: f64, theta: f64| {
            let rho2 = k * k - ky * ky;
            if !(k > 0.0 && rho2 > 0.0) {
                return None;
            }
            let rho = rho2.sqrt();
            let (s, c) = theta.sin_cos();
            PhotonMomentum::new(rho * s, ky, rho * c).ok()
        };
        let pi_ = photon(ki, kiy, alpha + beta)?;
        let ps_ = photon(ks, ksy, alpha - beta)?;

        // q(θ_i, θ_s) = p(β)·p(k_P)·|dk_P/dα|·|∂(α,β)/∂(θ_i,θ_s)|
        let q_angles = self.beta_density(beta)
            * pdf(&self.kp_dist, kp)
            * 2.0
            * self.k0
            * alpha.cos()
            * cb
            * 0.5;
        let q = q_angles
            * pdf(&self.k_dist, ki)
            * pdf(&self.k_dist, ks)
            * pdf(&self.ky_dist, kiy)
            * pdf(&self.ky_dist, ksy);
        Some((pi_, ps_, ki * ks / q))
    }
}

fn pdf(d: &Normal<f64>, x: f64) -> f64 {
    let z = (x - d.mean()) / d.std_dev();
    (-0.5 * z * z).exp() / (d.std_dev() * (2.0 * PI).sqrt())
}

fn sample_moments<const N: usize, F>(
    f: F,
    cfg: &ExperimentConfig,
    spec: &McSpec,
) -> Result<Moments<N>>
where
    F: Fn(&PhotonMomentum, &PhotonMomentum) -> [f64; N] + Sync,
{
    spec.validate()?;
    if cfg.reduction != Reduction::Full6D {
        return Err(Error::Precondition(
            "Monte Carlo integrals need a full6d configuration".into(),
        ));
    }
    cfg.validate()?;
    let proposal = Proposal::new(cfg);
    let batches = spec.samples.div_ceil(BATCH);

    let run_batch = |b: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(b);
        let count = BATCH.min(spec.samples - b * BATCH);
        let mut m = Moments::<N>::new();
        for _ in 0..count {
            let drawn = match &spec.importance {
                Importance::GaussianProposal => proposal.draw(&mut rng),
                Importance::UniformBox { lo, hi } => {
                    let x: [f64; 6] =
                        std::array::from_fn(|d| lo[d] + (hi[d] - lo[d]) * rng.random::<f64>());
                    let volume: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
                    match (
                        PhotonMomentum::new(x[0], x[1], x[2]),
                        PhotonMomentum::new(x[3], x[4], x[5]),
                    ) {
                        (Ok(a), Ok(b)) => Some((a, b, volume)),
                        _ => None,
                    }
                }
            };
            match drawn {
                Some((ki, ks, w)) => {
                    let v = f(&ki, &ks);
                    m.push(std::array::from_fn(|c| v[c] * w));
                }
                None => {
                    m.rejected += 1;
                    m.push([0.0; N]);
                }
            }
        }
        m
    };

    let parts: Vec<Moments<N>> = (0..batches).into_par_iter().map(run_batch).collect();
    let mut total = Moments::new();
    for p in &parts {
        total.merge(p);
    }
    if !total.any_nonzero {
        return Err(Error::ZeroEffectiveSamples);
    }
    Ok(total)
}

/// Monte Carlo estimate of ∫d³k_i d³k_s f over the forward hemispheres.
pub fn mc_integral<F>(f: F, cfg: &ExperimentConfig, spec: &McSpec) -> Result<IntegralResult>
where
    F: Fn(&PhotonMomentum, &PhotonMomentum) -> f64 + Sync,
{
    let m = sample_moments(|a, b| [f(a, b)], cfg, spec)?;
    Ok(m.result(0))
}

/// Dipole enhancement ratio from 6-D Monte Carlo integrals of `eval_amplitude`.
pub fn mc_enhancement_ratio(cfg: &ExperimentConfig, spec: &McSpec) -> Result<RatioResult> {
    mc_ratio_with(cfg, spec, |kind, ki, ks| eval_amplitude(kind, ki, ks, cfg))
}

/// As [`mc_enhancement_ratio`] with a caller-supplied amplitude.
///
/// `err_r` is the delta-method standard error of R including the
/// correlations between the six integrals.
pub fn mc_ratio_with<A>(cfg: &ExperimentConfig, spec: &McSpec, amp: A) -> Result<RatioResult>
where
    A: Fn(AmplitudeKind, &PhotonMomentum, &PhotonMomentum) -> f64 + Sync,
{
    let regime = cfg.regime;
    let m = sample_moments(
        |ki, ks| {
            let fe = amp(AmplitudeKind::Entangled, ki, ks);
            let fs = amp(AmplitudeKind::Separable, ki, ks);
            let w = match regime {
                Regime::Exact => ki.obliquity() + ks.obliquity(),
                Regime::Paraxial => 2.0,
            };
            [fe * fe, fe * fe * w, fe, fs * fs, fs * fs * w, fs]
        },
        cfg,
        spec,
    )?;
    let ent = KindIntegrals {
        norm: m.result(0),
        weighted: m.result(1),
        coherent: m.result(2),
    };
    let sep = KindIntegrals {
        norm: m.result(3),
        weighted: m.result(4),
        coherent: m.result(5),
    };
    let mut res = assemble_ratio(
        ent,
        sep,
        RatioMeta {
            regime,
            measure: cfg.measure,
            method: "full6d_monte_carlo",
            channel: "dipole".into(),
            kernel: "constant".into(),
            filter_factor: None,
        },
    )?;

    // ln R = ½ln N_s − ½ln N_e + 2ln S_e − ln W_e + ln W_s − 2ln S_s
    let g = [
        -0.5 / m.mean[0],
        -1.0 / m.mean[1],
        2.0 / m.mean[2],
        0.5 / m.mean[3],
        1.0 / m.mean[4],
        -2.0 / m.mean[5],
    ];
    let mut var = 0.0;
    for a in 0..6 {
        for b in 0..6 {
            var += g[a] * g[b] * m.cov_of_mean(a, b);
        }
    }
    res.err_r = res.r.abs() * var.max(0.0).sqrt();
    res.monte_carlo = Some(McDiagnostics {
        samples: m.n,
        seed: spec.seed,
        rng: RNG_ID.into(),
        rejection_fraction: m.rejected as f64 / m.n as f64,
    });
    Ok(res)
}

/// Outcome of one reduced-vs-Monte-Carlo comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CrossCheck {
    pub length_um: f64,
    pub waist_um: f64,
    pub r_reduced: f64,
    pub r_mc: f64,
    pub sigma_mc: f64,
    pub rel_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// `n` seeded (L, Ω_p) pairs, log-uniform in L ∈ [0.05, 50] μm and
/// Ω_p ∈ [3, 50] μm.
pub fn cross_check_points(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_uniform =
        |rng: &mut ChaCha8Rng, lo: f64, hi: f64| (rng.random_range(lo.ln()..hi.ln())).exp();
    (0..n)
        .map(|_| {
            let l = log_uniform(&mut rng, 0.05, 50.0);
            let w = log_uniform(&mut rng, 3.0, 50.0);
            (l, w)
        })
        .collect()
}

/// Compares the reduced 2-D ratio with the 6-D Monte Carlo ratio at each
/// point; passes when |R_2D/R_MC − 1| ≤ max(5%, 3σ_MC/R_MC).
pub fn cross_validate(
    base: &ExperimentConfig,
    points: &[(f64, f64)],
    samples: u64,
    seed: u64,
) -> Result<Vec<CrossCheck>> {
    points
        .iter()
        .enumerate()
        .map(|(i, &(l, w))| {
            let cfg = base
                .clone()
                .with_crystal_length(l)
                .with_pump_waist(w)
                .with_reduction(Reduction::Reduced2D);
            let reduced = enhancement_ratio(&cfg, &Channel::dipole())?;
            let mc = mc_enhancement_ratio(
                &cfg.with_reduction(Reduction::Full6D),
                &McSpec::new(samples, seed.wrapping_add(i as u64)),
            )?;
            let rel_diff = reduced.r / mc.r - 1.0;
            let tolerance = (3.0 * mc.err_r / mc.r).max(0.05);
            Ok(CrossCheck {
                length_um: l,
                waist_um: w,
                r_reduced: reduced.r,
                r_mc: mc.r,
                sigma_mc: mc.err_r,
                rel_diff,
                tolerance,
                pass: rel_diff.abs() <= tolerance,
            })
        })
        .collect()
}
