//! Closed-form results for the cascade: absorption probability and its
//! optimum, the Λ-system transmission and reflection amplitudes, the emitted
//! photon's spectrum, and the steady amplifier amplitude, signal slope and
//! gain.
//!
//! Frequencies are measured in the frame rotating at the cavity frequency,
//! so `ω_a = 0` and the molecular resonance sits at `ω₁₀ = −δ`.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::operators::C64;
use crate::quadrature::{integrate, integrate_real_line, Estimate};

const OVERLAP_TOL: f64 = 1e-9;
const OVERLAP_WINDOW: f64 = 200.0;

fn check_rates(params: &ModelParams) -> Result<()> {
    for (name, v) in [("kappa", params.kappa), ("gamma1", params.gamma1), ("gamma2", params.gamma2)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidParameter { name, reason: format!("rate must be finite and >= 0, got {v}") });
        }
    }
    if params.gamma1 + params.gamma2 == 0.0 {
        return Err(Error::InvalidParameter {
            name: "gamma1",
            reason: "absorption probability is undefined when gamma1 + gamma2 = 0".into(),
        });
    }
    Ok(())
}

/// Probability that the photon moves the molecule from `F₀` to `F₂`:
/// `Re[4γ₁γ₂ / ((γ₁+γ₂)(γ₁+γ₂+κ−2iδ))]`.
pub fn p_abs(params: &ModelParams) -> Result<f64> {
    check_rates(params)?;
    let s = params.gamma1 + params.gamma2;
    let denom = C64::new(s, 0.0) * C64::new(s + params.kappa, -2.0 * params.detuning);
    Ok((C64::new(4.0 * params.gamma1 * params.gamma2, 0.0) / denom).re)
}

/// `γ₁* = √(γ₂² + κγ₂)`, the coupling that maximises [`p_abs`] at `δ = 0`.
pub fn p_abs_maximizer(gamma2: f64, kappa: f64) -> Result<f64> {
    if !(gamma2 > 0.0) || !(kappa >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "gamma2",
            reason: format!("need gamma2 > 0 and kappa >= 0, got gamma2 = {gamma2}, kappa = {kappa}"),
        });
    }
    Ok((gamma2 * gamma2 + kappa * gamma2).sqrt())
}

/// The `γ₂ ∈ (0, params.gamma2)` at which [`p_abs`] equals `target`, by bisection.
pub fn gamma2_for_p_abs(params: &ModelParams, target: f64) -> Result<f64> {
    let at = |g2: f64| p_abs(&ModelParams { gamma2: g2, ..*params });
    let upper = at(params.gamma2)?;
    if !(target > 0.0 && target < upper) || params.gamma1 == 0.0 {
        return Err(Error::InvalidParameter {
            name: "target",
            reason: format!("target {target} not bracketed by (0, {upper})"),
        });
    }
    let (mut lo, mut hi) = (0.0, params.gamma2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * params.gamma2 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralKind {
    Transmission,
    Reflection,
    PhotonSpectrum,
}

/// A single-pole spectral amplitude with its center frequency and full width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralFunction {
    pub kind: SpectralKind,
    pub center: f64,
    pub width: f64,
    gamma1: f64,
    gamma2: f64,
}

impl SpectralFunction {
    pub fn transmission(params: &ModelParams) -> Self {
        Self {
            kind: SpectralKind::Transmission,
            center: -params.detuning,
            width: params.gamma1 + params.gamma2,
            gamma1: params.gamma1,
            gamma2: params.gamma2,
        }
    }

    pub fn reflection(params: &ModelParams) -> Self {
        Self { kind: SpectralKind::Reflection, ..Self::transmission(params) }
    }

    pub fn photon(params: &ModelParams) -> Result<Self> {
        if !(params.kappa > 0.0) {
            return Err(Error::InvalidParameter {
                name: "kappa",
                reason: format!("photon spectrum needs kappa > 0, got {}", params.kappa),
            });
        }
        Ok(Self { kind: SpectralKind::PhotonSpectrum, center: 0.0, width: params.kappa, gamma1: 0.0, gamma2: 0.0 })
    }

    pub fn eval(&self, omega: f64) -> C64 {
        let pole = C64::new(self.width / 2.0, -(omega - self.center));
        match self.kind {
            SpectralKind::Transmission => C64::new((self.gamma1 * self.gamma2).sqrt(), 0.0) / pole,
            SpectralKind::Reflection => {
                C64::new((self.gamma1 - self.gamma2) / 2.0, -(omega - self.center)) / pole
            }
            SpectralKind::PhotonSpectrum => {
                C64::new(self.width.sqrt() / (2.0 * std::f64::consts::PI).sqrt(), 0.0) / pole
            }
        }
    }

    /// `∫|f(ω)|² dω` over the whole line.
    pub fn norm_sqr_integral(&self, abs_tol: f64) -> Result<Estimate> {
        let scale = if self.width > 0.0 { self.width / 2.0 } else { 1.0 };
        integrate_real_line(|w| self.eval(w).norm_sqr(), self.center, scale, abs_tol)
    }
}

/// Λ-system transmission `T(ω) = √(γ₁γ₂)/((γ₁+γ₂)/2 − i(ω−ω₁₀))`.
pub fn transmission(omega: f64, params: &ModelParams) -> C64 {
    SpectralFunction::transmission(params).eval(omega)
}

/// Reflection `R(ω) = ((γ₁−γ₂)/2 − i(ω−ω₁₀))/((γ₁+γ₂)/2 − i(ω−ω₁₀))`, so that `|T|² + |R|² = 1`.
pub fn reflection(omega: f64, params: &ModelParams) -> C64 {
    SpectralFunction::reflection(params).eval(omega)
}

/// Normalised photon amplitude `φ(ω) = (2π)^{-1/2} √κ/(κ/2 − i(ω−ω_a))`.
pub fn photon_spectrum(omega: f64, params: &ModelParams) -> Result<C64> {
    Ok(SpectralFunction::photon(params)?.eval(omega))
}

/// `∫|φ|²|T|² dω` by adaptive quadrature over `ω_a ± 200·max(κ, γ₁+γ₂)`.
pub fn p_abs_overlap(params: &ModelParams) -> Result<f64> {
    check_rates(params)?;
    let phi = SpectralFunction::photon(params)?;
    let t = SpectralFunction::transmission(params);
    let half = OVERLAP_WINDOW * params.kappa.max(params.gamma1 + params.gamma2);
    let est = integrate(|w| phi.eval(w).norm_sqr() * t.eval(w).norm_sqr(), -half, half, OVERLAP_TOL)?;
    Ok(est.value)
}

fn check_amp(params: &ModelParams) -> Result<()> {
    if !(params.amp_decay > 0.0) {
        return Err(Error::InvalidParameter {
            name: "Gamma",
            reason: format!("amplifier decay must be > 0, got {}", params.amp_decay),
        });
    }
    Ok(())
}

/// Steady amplifier amplitude from `|1, F₀, 0⟩`: `−μ P_abs/(Γ/2 + iΔ)`.
pub fn c_steady(params: &ModelParams) -> Result<C64> {
    check_amp(params)?;
    let p = p_abs(params)?;
    Ok(-C64::new(params.drive * p, 0.0) / C64::new(params.amp_decay / 2.0, params.amp_detuning))
}

/// Asymptotic `dN_D/dT = P_abs·4μ²/Γ`.
pub fn nd_slope(params: &ModelParams) -> Result<f64> {
    check_amp(params)?;
    Ok(p_abs(params)? * 4.0 * params.drive * params.drive / params.amp_decay)
}

/// Gain `G = 4μ²T/Γ`.
pub fn gain(params: &ModelParams, duration: f64) -> Result<f64> {
    check_amp(params)?;
    Ok(4.0 * params.drive * params.drive * duration / params.amp_decay)
}
