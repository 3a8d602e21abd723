//! Two-photon momentum amplitudes of the SPDC pair and its separable reference.
//!
//! The entangled amplitude is
//!
//! ```text
//! F_ent(k_i, k_s) = sinc(L Δk_z / 2) · E_P(k_ix + k_sx, k_iy + k_sy)
//!                   · Π_{i,s} exp(-Ω_y² k_y² / 2) · exp(-Ω² (|k| - k₀)² / 2)
//!                   · θ(k_iz) θ(k_sz)
//! ```
//!
//! and the separable amplitude is the same product without the sinc. Both
//! photons are linearly polarized along y.

use crate::error::{Error, Result};
use crate::units::{ExperimentConfig, Reduction, Regime};

/// Infimum of sin(x)/x, reached at x ≈ ±4.4934.
pub const SINC_MIN: f64 = -0.217_233_628_211_221_7;

/// Photon wavevector in μm⁻¹.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonMomentum {
    pub kx: f64,
    pub ky: f64,
    pub kz: f64,
}

impl PhotonMomentum {
    /// Forward-propagating momentum; rejects k_z < 0 and non-finite parts.
    pub fn new(kx: f64, ky: f64, kz: f64) -> Result<Self> {
        if !(kx.is_finite() && ky.is_finite() && kz.is_finite()) {
            return Err(Error::Domain("momentum components must be finite".into()));
        }
        if kz < 0.0 {
            return Err(Error::Domain(format!(
                "k_z = {kz} < 0: photon not forward-propagating"
            )));
        }
        Ok(Self { kx, ky, kz })
    }

    /// Momentum with magnitude `k` and given transverse parts, k_z ≥ 0.
    pub fn on_shell(kx: f64, ky: f64, k: f64) -> Result<Self> {
        let kz2 = k * k - kx * kx - ky * ky;
        if !(kz2 >= 0.0) {
            return Err(Error::Domain(format!(
                "transverse momentum exceeds |k| = {k} (kx = {kx}, ky = {ky})"
            )));
        }
        Self::new(kx, ky, kz2.sqrt())
    }

    pub fn magnitude(&self) -> f64 {
        (self.kx * self.kx + self.ky * self.ky + self.kz * self.kz).sqrt()
    }

    /// Projection k_z/k of the propagation direction onto the target normal.
    pub fn obliquity(&self) -> f64 {
        let k = self.magnitude();
        if k == 0.0 {
            0.0
        } else {
            self.kz / k
        }
    }
}

/// Point of the narrowband (k_ix, k_sx) plane, both photons on shell at k₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedPoint {
    pub kix: f64,
    pub ksx: f64,
    pub k0: f64,
}

impl ReducedPoint {
    pub fn new(kix: f64, ksx: f64, k0: f64) -> Result<Self> {
        if !(k0 > 0.0) || !k0.is_finite() {
            return Err(Error::Domain(format!(
                "carrier wavenumber must be positive, got {k0}"
            )));
        }
        if !(kix.abs() < k0 && ksx.abs() < k0) {
            return Err(Error::Domain(format!(
                "transverse momenta ({kix}, {ksx}) must lie strictly inside (-k0, k0) with k0 = {k0}"
            )));
        }
        Ok(Self { kix, ksx, k0 })
    }

    pub fn kiz(&self) -> f64 {
        (self.k0 * self.k0 - self.kix * self.kix).sqrt()
    }

    pub fn ksz(&self) -> f64 {
        (self.k0 * self.k0 - self.ksx * self.ksx).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AmplitudeKind {
    Entangled,
    Separable,
}

impl AmplitudeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AmplitudeKind::Entangled => "entangled",
            AmplitudeKind::Separable => "separable",
        }
    }
}

/// sin(x)/x with sinc(0) = 1; a short series avoids cancellation near zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

fn check_pump_transverse(p: &ReducedPoint) -> Result<()> {
    if (p.kix + p.ksx).abs() >= 2.0 * p.k0 {
        return Err(Error::Domain(format!(
            "pump transverse momentum |{}| exceeds 2k0 = {}",
            p.kix + p.ksx,
            2.0 * p.k0
        )));
    }
    Ok(())
}

/// Exact longitudinal mismatch k_Pz − k_iz − k_sz on the narrowband shell.
pub fn delta_kz_exact(p: &ReducedPoint) -> Result<f64> {
    check_pump_transverse(p)?;
    Ok(delta_kz_exact_unchecked(p.kix, p.ksx, p.k0))
}

/// Second-order expansion of [`delta_kz_exact`] in the transverse momenta.
pub fn delta_kz_paraxial(p: &ReducedPoint) -> Result<f64> {
    check_pump_transverse(p)?;
    Ok(delta_kz_paraxial_unchecked(p.kix, p.ksx, p.k0))
}

pub fn delta_kz(regime: Regime, p: &ReducedPoint) -> Result<f64> {
    match regime {
        Regime::Exact => delta_kz_exact(p),
        Regime::Paraxial => delta_kz_paraxial(p),
    }
}

#[inline]
pub(crate) fn delta_kz_exact_unchecked(kix: f64, ksx: f64, k0: f64) -> f64 {
    let kp = kix + ksx;
    // Grouped so the result is bit-for-bit symmetric under kix <-> ksx.
    (4.0 * k0 * k0 - kp * kp).sqrt() - ((k0 * k0 - kix * kix).sqrt() + (k0 * k0 - ksx * ksx).sqrt())
}

#[inline]
pub(crate) fn delta_kz_paraxial_unchecked(kix: f64, ksx: f64, k0: f64) -> f64 {
    let kp = kix + ksx;
    (kix * kix + ksx * ksx) / (2.0 * k0) - kp * kp / (4.0 * k0)
}

/// Gaussian pump envelope exp(−Ω_p² k_Px²/2 − Ω_py² k_Py²/2).
pub fn pump_envelope(kpx: f64, kpy: f64, waist_x_um: f64, waist_y_um: f64) -> f64 {
    let ax = waist_x_um * kpx;
    let ay = waist_y_um * kpy;
    (-0.5 * (ax * ax + ay * ay)).exp()
}

/// Full 6-D amplitude.
pub fn eval_amplitude(
    kind: AmplitudeKind,
    ki: &PhotonMomentum,
    ks: &PhotonMomentum,
    cfg: &ExperimentConfig,
) -> f64 {
    if ki.kz < 0.0 || ks.kz < 0.0 {
        return 0.0;
    }
    let k0 = cfg.k0();
    let kpx = ki.kx + ks.kx;
    let kpy = ki.ky + ks.ky;
    let k_i = ki.magnitude();
    let k_s = ks.magnitude();

    let phase = match kind {
        AmplitudeKind::Separable => 1.0,
        AmplitudeKind::Entangled => {
            let kp = k_i + k_s;
            let kpz2 = kp * kp - kpx * kpx - kpy * kpy;
            if kpz2 <= 0.0 {
                // No forward-propagating pump mode with this transverse momentum.
                return 0.0;
            }
            let dk = match cfg.regime {
                Regime::Exact => kpz2.sqrt() - (ki.kz + ks.kz),
                Regime::Paraxial => {
                    let ti = ki.kx * ki.kx + ki.ky * ki.ky;
                    let ts = ks.kx * ks.kx + ks.ky * ks.ky;
                    ti / (2.0 * k_i) + ts / (2.0 * k_s) - (kpx * kpx + kpy * kpy) / (2.0 * kp)
                }
            };
            sinc(0.5 * cfg.crystal_length_um * dk)
        }
    };

    let filter = |k: f64, ky: f64| {
        let a = cfg.filter_omega_y_um * ky;
        let b = cfg.filter_omega_um * (k - k0);
        (-0.5 * (a * a + b * b)).exp()
    };

    phase
        * pump_envelope(kpx, kpy, cfg.pump_waist_um, cfg.pump_waist_y_um)
        * (filter(k_i, ki.ky) * filter(k_s, ks.ky))
}

/// Narrowband amplitude on the (k_ix, k_sx) plane.
///
/// The k_y and frequency filters are constant factors here and are left out;
/// they cancel from every ratio built on these values.
pub fn eval_reduced(kind: AmplitudeKind, p: &ReducedPoint, cfg: &ExperimentConfig) -> Result<f64> {
    if cfg.reduction != Reduction::Reduced2D || !cfg.narrowband_ok() {
        return Err(Error::Precondition(
            "narrowband reduction not valid for this configuration; evaluate in full6d".into(),
        ));
    }
    check_pump_transverse(p)?;
    Ok(reduced_unchecked(
        kind,
        cfg.regime,
        p.kix,
        p.ksx,
        p.k0,
        cfg.crystal_length_um,
        cfg.pump_waist_um,
    ))
}

#[inline]
pub(crate) fn reduced_unchecked(
    kind: AmplitudeKind,
    regime: Regime,
    kix: f64,
    ksx: f64,
    k0: f64,
    length_um: f64,
    waist_um: f64,
) -> f64 {
    let u = waist_um * (kix + ksx);
    let pump = (-0.5 * u * u).exp();
    match kind {
        AmplitudeKind::Separable => pump,
        AmplitudeKind::Entangled => {
            let dk = match regime {
                Regime::Exact => delta_kz_exact_unchecked(kix, ksx, k0),
                Regime::Paraxial => delta_kz_paraxial_unchecked(kix, ksx, k0),
            };
            sinc(0.5 * length_um * dk) * pump
        }
    }
}
