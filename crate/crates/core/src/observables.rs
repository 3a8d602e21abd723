//! Normalization constants, photon flux, f-factors and the enhancement ratio.
//!
//! In the narrowband reduction the k_y and |k| filters integrate out to
//! constant factors,
//!
//! ```text
//! G1 = (2π/Ω_y²)(2π/Ω²)   for ∫∫ F
//! G2 = ( π/Ω_y²)( π/Ω²)   for ∫∫ |F|²
//! ```
//!
//! which are carried symbolically: reduced values satisfy
//! C = C_red/√G2, φ = φ_red·√G2 and f = f_red·G1²/G2, so every ratio
//! between entangled and separable quantities is independent of them.
//!
//! The remaining (k_ix, k_sx) integral is done in propagation angles
//! k_x = k₀ sin θ, rotated to β = (θ_i − θ_s)/2 and α = (θ_i + θ_s)/2. The pump
//! envelope only depends on k_ix + k_sx = 2k₀ sin α cos β, so α is cut where the
//! envelope has fallen by 10 standard deviations (relative truncation
//! error ≤ e⁻⁵⁰) and rescaled to α = t·A(β), t ∈ (−1, 1).

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::amplitude::{sinc, AmplitudeKind};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::quadrature::{integrate_2d_multi, IntegralResult, QuadratureSpec, Rect};
use crate::units::{ExperimentConfig, Measure, Reduction, Regime, SPEED_OF_LIGHT_UM_PER_S};

/// Pump envelope cut-off in standard deviations of Ω_p·(k_ix + k_sx).
pub const PUMP_CUTOFF_SIGMAS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

/// Resonant intermediate level of the two-photon ionization.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub transition_energy_ev: f64,
    pub multipole_order: u32,
    /// Parity of the intermediate state.
    pub parity: Parity,
    /// Γ_n cancels from every ratio and is never needed numerically.
    pub linewidth_ev: Option<f64>,
    pub kernel: Option<Kernel>,
}

impl Channel {
    pub fn new(name: &str, transition_energy_ev: f64, multipole_order: u32) -> Self {
        let parity = if multipole_order % 2 == 1 {
            Parity::Odd
        } else {
            Parity::Even
        };
        Self {
            name: name.to_string(),
            transition_energy_ev,
            multipole_order,
            parity,
            linewidth_ev: None,
            kernel: None,
        }
    }

    /// Sodium 3S → 4P.
    pub fn dipole() -> Self {
        Self::new("dipole", 3.753_293, 1)
    }

    pub fn quadrupole() -> Self {
        Self::new("quadrupole", 4.283_461, 2)
    }

    pub fn octupole() -> Self {
        Self::new("octupole", 4.288_194, 3)
    }

    pub fn hexadecapole() -> Self {
        Self::new("hexadecapole", 4.594_759, 4)
    }

    pub fn builtins() -> [Channel; 4] {
        [
            Self::dipole(),
            Self::quadrupole(),
            Self::octupole(),
            Self::hexadecapole(),
        ]
    }

    pub fn builtin(name: &str) -> Result<Self> {
        Self::builtins()
            .into_iter()
            .find(|c| c.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| {
                Error::config(
                    "channel",
                    format!(
                        "unknown channel `{name}` (dipole, quadrupole, octupole, hexadecapole)"
                    ),
                )
            })
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = Some(kernel);
        self
    }

    /// Kernel label written into outputs.
    pub fn kernel_label(&self) -> String {
        match &self.kernel {
            Some(k) => k.label(),
            None => "constant".into(),
        }
    }

    fn check_kernel(&self) -> Result<()> {
        if self.multipole_order > 1 && self.kernel.is_none() {
            return Err(Error::MissingKernel(self.name.clone()));
        }
        Ok(())
    }
}

/// Widths of the analytically integrated Gaussian filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterFactor {
    pub omega_um: f64,
    pub omega_y_um: f64,
}

impl FilterFactor {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self {
            omega_um: cfg.filter_omega_um,
            omega_y_um: cfg.filter_omega_y_um,
        }
    }

    /// Filter product integrated over k_y and |k| of both photons.
    pub fn g1(&self) -> f64 {
        let tau = std::f64::consts::TAU;
        (tau / (self.omega_y_um * self.omega_y_um)) * (tau / (self.omega_um * self.omega_um))
    }

    /// Squared filter product integrated over k_y and |k| of both photons.
    pub fn g2(&self) -> f64 {
        let pi = std::f64::consts::PI;
        (pi / (self.omega_y_um * self.omega_y_um)) * (pi / (self.omega_um * self.omega_um))
    }
}

/// C = 1/√∫|F|²; `reduced` omits the filter factor, which is `None` when the
/// value is already absolute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Normalization {
    pub reduced: f64,
    pub filter: Option<FilterFactor>,
    pub integral: IntegralResult,
}

impl Normalization {
    pub fn absolute(&self) -> f64 {
        match self.filter {
            Some(g) => self.reduced / g.g2().sqrt(),
            None => self.reduced,
        }
    }
}

/// φ = c·C·∫|F|² w in μm⁻²·s⁻¹ (modulo the filter factor when present).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Flux {
    pub reduced: f64,
    pub filter: Option<FilterFactor>,
    pub norm: IntegralResult,
    pub weighted: IntegralResult,
}

impl Flux {
    pub fn absolute(&self) -> f64 {
        match self.filter {
            Some(g) => self.reduced * g.g2().sqrt(),
            None => self.reduced,
        }
    }
}

/// The three integrals behind every observable of one amplitude:
/// ∫|F|², ∫|F|² w and the coherent sum ∫F·K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KindIntegrals {
    pub norm: IntegralResult,
    pub weighted: IntegralResult,
    pub coherent: IntegralResult,
}

impl KindIntegrals {
    pub fn converged(&self) -> bool {
        self.norm.converged && self.weighted.converged && self.coherent.converged
    }

    /// Integrals of the amplitude a·F.
    pub fn scaled(&self, a: f64) -> Self {
        let s = |r: &IntegralResult, m: f64| IntegralResult {
            value: r.value * m,
            error_estimate: r.error_estimate * m.abs(),
            ..*r
        };
        Self {
            norm: s(&self.norm, a * a),
            weighted: s(&self.weighted, a * a),
            coherent: s(&self.coherent, a),
        }
    }

    pub fn normalization(&self) -> f64 {
        1.0 / self.norm.value.sqrt()
    }

    pub fn flux(&self) -> f64 {
        SPEED_OF_LIGHT_UM_PER_S * self.normalization() * self.weighted.value
    }

    pub fn f_factor(&self) -> f64 {
        self.coherent.value * self.coherent.value / self.weighted.value
    }
}

/// Monte Carlo bookkeeping attached to ratios assembled from samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McDiagnostics {
    pub samples: u64,
    pub seed: u64,
    pub rng: String,
    pub rejection_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioResult {
    pub r: f64,
    pub err_r: f64,
    pub f_ent: f64,
    pub f_sep: f64,
    pub c_ent: f64,
    pub c_sep: f64,
    pub c_ratio: f64,
    pub phi_ent: f64,
    pub phi_sep: f64,
    pub regime: Regime,
    pub measure: Measure,
    pub method: &'static str,
    pub channel: String,
    pub kernel: String,
    /// Present when C, φ and f are reported without the filter factor.
    pub filter_factor: Option<FilterFactor>,
    pub ent: KindIntegrals,
    pub sep: KindIntegrals,
    pub converged: bool,
    pub monte_carlo: Option<McDiagnostics>,
}

/// Labels stored alongside a ratio.
#[derive(Debug, Clone)]
pub struct RatioMeta {
    pub regime: Regime,
    pub measure: Measure,
    pub method: &'static str,
    pub channel: String,
    pub kernel: String,
    pub filter_factor: Option<FilterFactor>,
}

/// R = (C_ent/C_sep)·(f_ent/f_sep) from the six integrals.
///
/// `err_r` is first-order propagation of the integral error estimates
/// (treated as fully correlated, i.e. summed in relative terms).
pub fn assemble_ratio(
    ent: KindIntegrals,
    sep: KindIntegrals,
    meta: RatioMeta,
) -> Result<RatioResult> {
    for (what, v) in [
        ("∫|F_ent|²", ent.norm.value),
        ("∫|F_sep|²", sep.norm.value),
        ("∫|F_ent|² w", ent.weighted.value),
        ("∫|F_sep|² w", sep.weighted.value),
    ] {
        if !(v > 0.0) {
            return Err(Error::Degenerate(format!("{what} = {v} is not positive")));
        }
    }
    if sep.coherent.value == 0.0 {
        return Err(Error::Degenerate(
            "separable coherent sum vanishes; the ratio is undefined".into(),
        ));
    }
    let c_ent = ent.normalization();
    let c_sep = sep.normalization();
    let f_ent = ent.f_factor();
    let f_sep = sep.f_factor();
    let c_ratio = (sep.norm.value / ent.norm.value).sqrt();
    let r = c_ratio * (f_ent / f_sep);

    let rel = |x: &IntegralResult| x.error_estimate / x.value.abs().max(f64::MIN_POSITIVE);
    let rel_r = 0.5 * (rel(&ent.norm) + rel(&sep.norm))
        + 2.0 * (rel(&ent.coherent) + rel(&sep.coherent))
        + rel(&ent.weighted)
        + rel(&sep.weighted);

    Ok(RatioResult {
        r,
        err_r: rel_r * r.abs(),
        f_ent,
        f_sep,
        c_ent,
        c_sep,
        c_ratio,
        phi_ent: ent.flux(),
        phi_sep: sep.flux(),
        regime: meta.regime,
        measure: meta.measure,
        method: meta.method,
        channel: meta.channel,
        kernel: meta.kernel,
        filter_factor: meta.filter_factor,
        converged: ent.converged() && sep.converged(),
        ent,
        sep,
        monte_carlo: None,
    })
}

/// Reduced integrand in (β, t) coordinates.
struct Reduced<'a> {
    k0: f64,
    length_um: f64,
    waist_um: f64,
    regime: Regime,
    measure: Measure,
    kernel: Option<&'a Kernel>,
    reach: f64,
}

impl<'a> Reduced<'a> {
    fn new(cfg: &ExperimentConfig, kernel: Option<&'a Kernel>) -> Result<Self> {
        if cfg.reduction != Reduction::Reduced2D {
            return Err(Error::Precondition(
                "reduced quadrature requested for a full6d configuration".into(),
            ));
        }
        cfg.validate()?;
        let k0 = cfg.k0();
        Ok(Self {
            k0,
            length_um: cfg.crystal_length_um,
            waist_um: cfg.pump_waist_um,
            regime: cfg.regime,
            measure: cfg.measure,
            kernel,
            reach: PUMP_CUTOFF_SIGMAS / (2.0 * k0 * cfg.pump_waist_um),
        })
    }

    fn rect() -> Rect {
        Rect::new(-FRAC_PI_2, FRAC_PI_2, -1.0, 1.0)
    }

    /// Half-width A(β) of the α range kept at this β.
    fn alpha_max(&self, beta: f64) -> f64 {
        let kinematic = FRAC_PI_2 - beta.abs();
        let s = self.reach / beta.cos();
        if s >= 1.0 {
            kinematic
        } else {
            s.asin().min(kinematic)
        }
    }

    /// [|F_ent|², |F_ent|² w, F_ent K, |F_sep|², |F_sep|² w, F_sep K], each
    /// times the measure and the (β, t) Jacobian.
    fn eval(&self, beta: f64, t: f64) -> [f64; 6] {
        let a = self.alpha_max(beta);
        let alpha = t * a;
        let (sa, ca) = alpha.sin_cos();
        let (sb, cb) = beta.sin_cos();
        let (ti, ts) = (alpha + beta, alpha - beta);
        let (cos_i, cos_s) = (ti.cos(), ts.cos());
        let k0 = self.k0;

        let u = self.waist_um * 2.0 * k0 * sa * cb;
        let sep = (-0.5 * u * u).exp();
        let dk = match self.regime {
            // √(4k₀² − k_P²) − k_iz − k_sz with the cancellation removed.
            Regime::Exact => 2.0 * k0 * sb * sb / ((1.0 - sa * sa * cb * cb).sqrt() + ca * cb),
            Regime::Paraxial => k0 * ca * ca * sb * sb,
        };
        let ent = sinc(0.5 * self.length_um * dk) * sep;

        let w = match self.regime {
            Regime::Exact => cos_i + cos_s,
            Regime::Paraxial => 2.0,
        };
        let measure = match self.measure {
            Measure::OnShell => k0 * k0,
            Measure::Flat => k0 * k0 * cos_i * cos_s,
        };
        let jac = 2.0 * a * measure;
        let kern = self
            .kernel
            .map_or(1.0, |k| k.weight(k0 * ti.sin(), k0 * ts.sin(), k0));

        let (e2, s2) = (ent * ent * jac, sep * sep * jac);
        [e2, e2 * w, ent * kern * jac, s2, s2 * w, sep * kern * jac]
    }
}

fn reduced_integrals(
    cfg: &ExperimentConfig,
    kernel: Option<&Kernel>,
    spec: &QuadratureSpec,
) -> Result<(KindIntegrals, KindIntegrals)> {
    let model = Reduced::new(cfg, kernel)?;
    let [ne, we, se, ns, ws, ss] =
        integrate_2d_multi(|b, t| model.eval(b, t), Reduced::rect(), spec)?;
    Ok((
        KindIntegrals {
            norm: ne,
            weighted: we,
            coherent: se,
        },
        KindIntegrals {
            norm: ns,
            weighted: ws,
            coherent: ss,
        },
    ))
}

fn one_kind(
    kind: AmplitudeKind,
    cfg: &ExperimentConfig,
    kernel: Option<&Kernel>,
) -> Result<KindIntegrals> {
    let model = Reduced::new(cfg, kernel)?;
    let pick = |v: [f64; 6]| match kind {
        AmplitudeKind::Entangled => [v[0], v[1], v[2]],
        AmplitudeKind::Separable => [v[3], v[4], v[5]],
    };
    let [norm, weighted, coherent] = integrate_2d_multi(
        |b, t| pick(model.eval(b, t)),
        Reduced::rect(),
        &cfg.quadrature,
    )?;
    Ok(KindIntegrals {
        norm,
        weighted,
        coherent,
    })
}

fn require(what: &str, r: IntegralResult) -> Result<IntegralResult> {
    if r.converged {
        Ok(r)
    } else {
        Err(Error::NotConverged {
            what: what.to_string(),
            result: r,
        })
    }
}

/// Reduced normalization constant of F_ent or F_sep.
pub fn normalization(kind: AmplitudeKind, cfg: &ExperimentConfig) -> Result<Normalization> {
    let k = one_kind(kind, cfg, None)?;
    let integral = require("∫|F|²", k.norm)?;
    Ok(Normalization {
        reduced: 1.0 / integral.value.sqrt(),
        filter: Some(FilterFactor::of(cfg)),
        integral,
    })
}

/// Photon flux through the target plane.
pub fn photon_flux(kind: AmplitudeKind, cfg: &ExperimentConfig) -> Result<Flux> {
    let k = one_kind(kind, cfg, None)?;
    let norm = require("∫|F|²", k.norm)?;
    let weighted = require("∫|F|² w", k.weighted)?;
    Ok(Flux {
        reduced: SPEED_OF_LIGHT_UM_PER_S * weighted.value / norm.value.sqrt(),
        filter: Some(FilterFactor::of(cfg)),
        norm,
        weighted,
    })
}

/// f = |∫F|² / ∫|F|² w, reduced (multiply by G1²/G2 for the absolute value).
pub fn f_factor(kind: AmplitudeKind, cfg: &ExperimentConfig) -> Result<f64> {
    let k = one_kind(kind, cfg, None)?;
    require("∫F", k.coherent)?;
    require("∫|F|² w", k.weighted)?;
    Ok(k.f_factor())
}

/// Coherent sum ∫F·K over the reduced plane (K ≡ 1 when `kernel` is `None`).
///
/// Returned even when unconverged so that vanishing sums can be judged
/// against their error estimate.
pub fn coherent_sum(
    kind: AmplitudeKind,
    cfg: &ExperimentConfig,
    kernel: Option<&Kernel>,
) -> Result<IntegralResult> {
    Ok(one_kind(kind, cfg, kernel)?.coherent)
}

/// Enhancement ratio for `channel`, whose transition energy sets k₀.
///
/// Full6D configurations are delegated to the Monte Carlo oracle with its
/// default sampling plan.
pub fn enhancement_ratio(cfg: &ExperimentConfig, channel: &Channel) -> Result<RatioResult> {
    channel.check_kernel()?;
    let cfg = cfg.clone().with_energy(channel.transition_energy_ev);
    if cfg.reduction == Reduction::Full6D {
        if channel.kernel.is_some() {
            return Err(Error::Precondition(
                "the Monte Carlo path supports the constant-kernel dipole ratio only".into(),
            ));
        }
        let spec = crate::oracle::McSpec::new(crate::oracle::DEFAULT_SAMPLES, cfg.quadrature.seed);
        let mut res = crate::oracle::mc_enhancement_ratio(&cfg, &spec)?;
        res.channel = channel.name.clone();
        return Ok(res);
    }
    let (ent, sep) = reduced_integrals(&cfg, channel.kernel.as_ref(), &cfg.quadrature)?;
    let kernel = match &channel.kernel {
        Some(k) => k.label(),
        None => "constant".into(),
    };
    let res = assemble_ratio(
        ent,
        sep,
        RatioMeta {
            regime: cfg.regime,
            measure: cfg.measure,
            method: "reduced2d_quadrature",
            channel: channel.name.clone(),
            kernel,
            filter_factor: Some(FilterFactor::of(&cfg)),
        },
    )?;
    if res.converged {
        Ok(res)
    } else {
        Err(Error::RatioNotConverged {
            partial: Box::new(res),
        })
    }
}

/// σ_ent = R·φ_sep·σ_cl in cm², from φ_sep in μm⁻²·s⁻¹ and σ_cl in cm⁴·s.
pub fn sigma_ent_from_classical(r: f64, phi_sep_um2_s: f64, sigma_cl_cm4_s: f64) -> Result<f64> {
    for (name, v) in [
        ("R", r),
        ("phi_sep", phi_sep_um2_s),
        ("sigma_cl", sigma_cl_cm4_s),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    const CM2_PER_UM2: f64 = 1e-8;
    let phi_cm2_s = phi_sep_um2_s / CM2_PER_UM2;
    Ok(r * phi_cm2_s * sigma_cl_cm4_s)
}
