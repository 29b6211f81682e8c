//! Semiclassical theory of the resonance eigenphase ladder: Bohr-Sommerfeld
//! phase, homoclinic phase corrections, quantization solutions and the
//! smoothed spectral function.

pub mod special;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classical::{stability_exponent, HomoclinicRecord, TWO_PI};
use special::{eta, ftilde};

#[derive(Debug, Error)]
pub enum SemiclassicsError {
    #[error("homoclinic relevance A is required but absent")]
    MissingRelevance,
    #[error("homoclinic Lazutkin invariant L is required but absent")]
    MissingLazutkin,
    #[error("relevance A = {a:.3e} must exceed hbar = {hbar:.3e}")]
    RelevanceBelowHbar { a: f64, hbar: f64 },
    #[error("quantization root polish failed near x = {0}")]
    RootPolishFailed(f64),
}

/// Canonical invariants of a homoclinic orbit as the semiclassical formulas
/// consume them. `maslov` is kept real so the mean orbit (mu = 1/2) fits.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HomoclinicInvariants {
    pub action: f64,
    pub maslov: f64,
    pub relevance: Option<f64>,
    pub lazutkin: Option<f64>,
}

impl From<&HomoclinicRecord> for HomoclinicInvariants {
    fn from(record: &HomoclinicRecord) -> Self {
        Self {
            action: record.action,
            maslov: record.maslov as f64,
            relevance: record.relevance,
            lazutkin: record.lazutkin,
        }
    }
}

impl HomoclinicInvariants {
    /// The mean orbit of a primary pair: averaged action and relevance,
    /// Maslov index 1/2.
    pub fn mean_pair(a: &Self, b: &Self) -> Self {
        let avg = |x: Option<f64>, y: Option<f64>| match (x, y) {
            (Some(x), Some(y)) => Some(0.5 * (x + y)),
            _ => None,
        };
        Self {
            action: 0.5 * (a.action + b.action),
            maslov: 0.5 * (a.maslov + b.maslov),
            relevance: avg(a.relevance, b.relevance),
            lazutkin: avg(a.lazutkin, b.lazutkin),
        }
    }
}

/// Effective Planck constant of an N-dimensional torus Hilbert space.
#[inline]
pub fn hbar_effective(n: usize) -> f64 {
    1.0 / (TWO_PI * n as f64)
}

/// Bohr-Sommerfeld eigenphase of the resonance ladder, reduced to [0, 2 pi):
/// phi_BS = -k N / (2 pi) mod 2 pi.
pub fn bohr_sommerfeld_phase(n: usize, k: f64) -> f64 {
    (-k * n as f64 / TWO_PI).rem_euclid(TWO_PI)
}

/// Scaled distance x = (phi_BS - phi) / lambda from the ladder condensation
/// point; `phi` is taken as an unwrapped (continuous) phase.
#[inline]
pub fn scaled_phase_distance(phi: f64, phi_bs: f64, lambda: f64) -> f64 {
    (phi_bs - phi) / lambda
}

/// Unwraps an eigenphase to the branch nearest phi_BS.
pub fn unwrap_near(phi: f64, phi_bs: f64) -> f64 {
    let mut d = (phi - phi_bs).rem_euclid(TWO_PI);
    if d > std::f64::consts::PI {
        d -= TWO_PI;
    }
    phi_bs + d
}

/// Homoclinic phase psi(phi) = S/hbar - mu pi/2 + x eta(x) + x ln(A/hbar).
pub fn homoclinic_phase(
    phi: f64,
    invariants: &HomoclinicInvariants,
    n: usize,
    k: f64,
) -> Result<f64, SemiclassicsError> {
    let a = invariants
        .relevance
        .ok_or(SemiclassicsError::MissingRelevance)?;
    let hbar = hbar_effective(n);
    if a <= hbar {
        return Err(SemiclassicsError::RelevanceBelowHbar { a, hbar });
    }
    let lambda = stability_exponent(k);
    let x = scaled_phase_distance(phi, bohr_sommerfeld_phase(n, k), lambda);
    Ok(invariants.action / hbar - invariants.maslov * std::f64::consts::FRAC_PI_2
        + x * eta(x)
        + x * (a / hbar).ln())
}

/// A root of the mean-orbit quantization condition psi(x) = 2 pi n.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuantizationSolution {
    /// The integer of the quantization condition.
    pub n: i64,
    /// Label l = n0 - n relative to the root closest to phi_BS (x = 0).
    pub label: i64,
    /// Scaled distance from the condensation point.
    pub x: f64,
    /// Predicted eigenphase reduced to [0, 2 pi).
    pub phi: f64,
    /// Predicted eigenphase on the branch phi_BS - lambda x (not reduced).
    pub phi_unfolded: f64,
}

fn psi_of_x(x: f64, invariants: &HomoclinicInvariants, log_a_hbar: f64, hbar: f64) -> f64 {
    invariants.action / hbar - invariants.maslov * std::f64::consts::FRAC_PI_2
        + x * eta(x)
        + x * log_a_hbar
}

/// Solves psi(x) = 2 pi n for the mean orbit over the window `x_range`,
/// labelling roots relative to the one nearest x = 0.
pub fn solve_quantization(
    n_dim: usize,
    k: f64,
    mean: &HomoclinicInvariants,
    x_range: (f64, f64),
) -> Result<Vec<QuantizationSolution>, SemiclassicsError> {
    let a = mean.relevance.ok_or(SemiclassicsError::MissingRelevance)?;
    let hbar = hbar_effective(n_dim);
    if a <= hbar {
        return Err(SemiclassicsError::RelevanceBelowHbar { a, hbar });
    }
    let log_a_hbar = (a / hbar).ln();
    let lambda = stability_exponent(k);
    let phi_bs = bohr_sommerfeld_phase(n_dim, k);

    let samples = 400;
    let xs: Vec<f64> = (0..=samples)
        .map(|i| x_range.0 + (x_range.1 - x_range.0) * i as f64 / samples as f64)
        .collect();
    let psis: Vec<f64> = xs.iter().map(|&x| psi_of_x(x, mean, log_a_hbar, hbar)).collect();

    let mut roots = Vec::new();
    for w in 0..samples {
        let (x0, x1) = (xs[w], xs[w + 1]);
        let (p0, p1) = (psis[w], psis[w + 1]);
        let lo_n = (p0.min(p1) / TWO_PI).ceil() as i64;
        let hi_n = (p0.max(p1) / TWO_PI).floor() as i64;
        for m in lo_n..=hi_n {
            let target = TWO_PI * m as f64;
            // Bisection on the bracketing interval.
            let (mut a0, mut b0, mut fa) = (x0, x1, p0 - target);
            for _ in 0..80 {
                let mid = 0.5 * (a0 + b0);
                let fm = psi_of_x(mid, mean, log_a_hbar, hbar) - target;
                if (fa > 0.0) == (fm > 0.0) {
                    a0 = mid;
                    fa = fm;
                } else {
                    b0 = mid;
                }
            }
            let x = 0.5 * (a0 + b0);
            if (psi_of_x(x, mean, log_a_hbar, hbar) - target).abs() > 1e-8 {
                return Err(SemiclassicsError::RootPolishFailed(x));
            }
            roots.push((m, x));
        }
    }
    roots.sort_by(|a, b| a.1.total_cmp(&b.1));
    roots.dedup_by(|a, b| (a.1 - b.1).abs() < 1e-10);

    let n0 = roots
        .iter()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|r| r.0)
        .unwrap_or(0);
    Ok(roots
        .into_iter()
        .map(|(m, x)| {
            let phi_unfolded = phi_bs - lambda * x;
            QuantizationSolution {
                n: m,
                label: n0 - m,
                x,
                phi: phi_unfolded.rem_euclid(TWO_PI),
                phi_unfolded,
            }
        })
        .collect())
}

/// Interference factor cos(Delta psi / 2) of a primary pair with action
/// difference `delta_s`: Delta psi = Delta S / hbar - pi / 2.
pub fn interference_factor(n: usize, delta_s: f64) -> f64 {
    let delta_psi = delta_s / hbar_effective(n) - std::f64::consts::FRAC_PI_2;
    (0.5 * delta_psi).cos()
}

/// Smoothing parameters of the spectral function.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SmoothingConfig {
    /// Relevance of the most relevant orbit entering the sum.
    pub a_max: f64,
    /// Smoothing exponent beta = 2 / ln(A_max / hbar).
    pub beta: f64,
    /// Overall prefactor K = sqrt(pi/8) beta / (1 + beta).
    pub kappa: f64,
}

impl SmoothingConfig {
    pub fn new(a_max: f64, n: usize) -> Result<Self, SemiclassicsError> {
        let hbar = hbar_effective(n);
        if a_max <= hbar {
            return Err(SemiclassicsError::RelevanceBelowHbar { a: a_max, hbar });
        }
        let beta = 2.0 / (a_max / hbar).ln();
        Ok(Self {
            a_max,
            beta,
            kappa: (std::f64::consts::PI / 8.0).sqrt() * beta / (1.0 + beta),
        })
    }

    /// Smoothing kernel g(y) = [sin(y)/y + beta cos(y)] / [(1 + beta^2 y^2)(1 + beta)];
    /// normalized so g(0) = 1.
    pub fn kernel(&self, y: f64) -> f64 {
        let sinc = if y.abs() < 1e-8 { 1.0 } else { y.sin() / y };
        (sinc + self.beta * y.cos())
            / ((1.0 + self.beta * self.beta * y * y) * (1.0 + self.beta))
    }
}

/// Smoothed spectral function
/// S(phi) = K F~(x) [1 + (1/(lambda sqrt(N))) sum_j cos(psi_j) / sqrt(A_j |L_j|)]
/// over a grid of unwrapped phases. Every orbit must carry A and L.
pub fn smoothed_spectral_function(
    phi_grid: &[f64],
    orbits: &[HomoclinicInvariants],
    n: usize,
    k: f64,
    config: &SmoothingConfig,
) -> Result<Vec<f64>, SemiclassicsError> {
    let lambda = stability_exponent(k);
    let phi_bs = bohr_sommerfeld_phase(n, k);
    let mut weights = Vec::with_capacity(orbits.len());
    for orbit in orbits {
        orbit.relevance.ok_or(SemiclassicsError::MissingRelevance)?;
        let l = orbit.lazutkin.ok_or(SemiclassicsError::MissingLazutkin)?;
        let a = orbit.relevance.unwrap();
        weights.push(1.0 / (a * l.abs()).sqrt());
    }
    let mut out = Vec::with_capacity(phi_grid.len());
    for &phi in phi_grid {
        let x = scaled_phase_distance(phi, phi_bs, lambda);
        let mut sum = 0.0;
        for (orbit, &w) in orbits.iter().zip(&weights) {
            sum += homoclinic_phase(phi, orbit, n, k)?.cos() * w;
        }
        out.push(config.kappa * ftilde(x) * (1.0 + sum / (lambda * (n as f64).sqrt())));
    }
    Ok(out)
}

/// Two-orbit interference proxy cos(psi_1) + cos(psi_2); traces the
/// oscillation pattern of the spectral function without needing L.
pub fn two_orbit_proxy(
    phi_grid: &[f64],
    first: &HomoclinicInvariants,
    second: &HomoclinicInvariants,
    n: usize,
    k: f64,
) -> Result<Vec<f64>, SemiclassicsError> {
    phi_grid
        .iter()
        .map(|&phi| {
            Ok(homoclinic_phase(phi, first, n, k)?.cos()
                + homoclinic_phase(phi, second, n, k)?.cos())
        })
        .collect()
}

/// Mean spacing of the quantization roots near x = 0 and the expected number
/// of ladder states: (lambda / ln(A/hbar), sqrt(2) ln(A/hbar)).
pub fn mean_spacing_estimate(
    n: usize,
    k: f64,
    relevance: f64,
) -> Result<(f64, f64), SemiclassicsError> {
    let hbar = hbar_effective(n);
    if relevance <= hbar {
        return Err(SemiclassicsError::RelevanceBelowHbar {
            a: relevance,
            hbar,
        });
    }
    let log_a_hbar = (relevance / hbar).ln();
    Ok((
        stability_exponent(k) / log_a_hbar,
        std::f64::consts::SQRT_2 * log_a_hbar,
    ))
}
