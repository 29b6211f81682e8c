//! Quantum standard map on the N-dimensional torus Hilbert space:
//! propagator assembly, dense diagonalization, resonance-state spectroscopy,
//! localization measures and Husimi distributions.

use ndarray::{Array1, Array2};
use ndarray_linalg::Eig;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classical::{stability_exponent, TWO_PI};
use crate::semiclassics::{bohr_sommerfeld_phase, hbar_effective, unwrap_near};

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("Hilbert space dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("wave packet degenerates: sinh(lambda)/(pi hbar) = {0:.3e} underflows")]
    DegeneratePacket(f64),
    #[error("eigensolver failed at N = {n}: {detail}")]
    EigensolverFailure { n: usize, detail: String },
    #[error("eigenstate continuation lost at k = {k}: best overlap {overlap:.3}")]
    ContinuationLost { k: f64, overlap: f64 },
}

/// The N-dimensional Hilbert space of the quantized torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusHilbert {
    pub n: usize,
    /// Effective Planck constant, hbar = 1/(2 pi N).
    pub hbar: f64,
}

impl TorusHilbert {
    pub fn new(n: usize) -> Result<Self, QuantumError> {
        if n < 2 {
            return Err(QuantumError::DimensionTooSmall(n));
        }
        Ok(Self {
            n,
            hbar: hbar_effective(n),
        })
    }
}

/// Normalized state in the position basis j = 0..N-1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateVector {
    pub amplitudes: Array1<Complex64>,
}

impl StateVector {
    /// Wraps and normalizes; errors only on an all-zero vector.
    pub fn normalized(amplitudes: Array1<Complex64>) -> Self {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        Self {
            amplitudes: amplitudes / Complex64::new(norm, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// <self|other>.
    pub fn overlap(&self, other: &Self) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// One-period Floquet operator of the kicked map.
#[derive(Debug, Clone)]
pub struct PropagatorMatrix {
    pub entries: Array2<Complex64>,
}

impl PropagatorMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// max |(U^dagger U - I)_{lj}|.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for l in 0..n {
            for j in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for m in 0..n {
                    s += self.entries[(m, l)].conj() * self.entries[(m, j)];
                }
                if l == j {
                    s -= 1.0;
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.entries[(i, i)]).sum()
    }

    pub fn apply(&self, state: &StateVector) -> StateVector {
        StateVector {
            amplitudes: self.entries.dot(&state.amplitudes),
        }
    }
}

/// Symmetric momentum index: m_sym in {-floor(N/2), ..., ceil(N/2)-1},
/// centering the momentum grid on p = 0 so the fixed point is resolved.
#[inline]
fn momentum_index(m: usize, n: usize) -> i64 {
    if m < n.div_ceil(2) {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Builds U = F^-1 D_kin F D_pot for one period of the kicked map.
///
/// In position, D_pot[j] = exp(-i (k N / 2 pi) cos(2 pi j/N)) — the kick
/// phase V(q)/hbar with V = (k/4 pi^2) cos(2 pi q), consistent with the
/// classical generating function and the Bohr-Sommerfeld law
/// phi_BS = -kN/(2 pi). In momentum, D_kin[m] = exp(-i pi m_sym^2 / N).
/// The circulant kinetic factor is assembled from a single FFT.
pub fn build_propagator(space: TorusHilbert, k: f64) -> PropagatorMatrix {
    let n = space.n;
    // c[r] = (1/N) sum_m D_kin[m] e^{+2 pi i m r / N}: one inverse FFT.
    let mut c: Vec<Complex64> = (0..n)
        .map(|m| {
            let ms = momentum_index(m, n) as f64;
            Complex64::from_polar(1.0, -std::f64::consts::PI * ms * ms / n as f64)
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut c);
    for v in &mut c {
        *v /= n as f64;
    }

    let kick: Vec<Complex64> = (0..n)
        .map(|j| {
            let q = j as f64 / n as f64;
            Complex64::from_polar(1.0, -(k * n as f64 / TWO_PI) * (TWO_PI * q).cos())
        })
        .collect();

    let mut entries = Array2::zeros((n, n));
    for l in 0..n {
        for j in 0..n {
            entries[(l, j)] = c[(n + l - j) % n] * kick[j];
        }
    }
    PropagatorMatrix { entries }
}

/// Full eigensystem of a Floquet operator.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Ascending eigenphases in [0, 2 pi).
    pub eigenphases: Vec<f64>,
    /// Eigenvectors as columns, phase-fixed and matching `eigenphases`.
    pub eigenvectors: Array2<Complex64>,
    /// |c_i|^2 against the reference state of `spectral_decomposition`.
    pub intensities: Option<Vec<f64>>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenphases.len()
    }

    pub fn eigenstate(&self, i: usize) -> StateVector {
        StateVector {
            amplitudes: self.eigenvectors.column(i).to_owned(),
        }
    }
}

/// Dense diagonalization with ascending eigenphases in [0, 2 pi),
/// unit-normalized eigenvectors whose largest component is real positive,
/// and a residual check ||U v - e^{i phi} v|| <= 1e-10.
pub fn diagonalize(u: &PropagatorMatrix) -> Result<SpectralDecomposition, QuantumError> {
    let n = u.dim();
    let (vals, vecs) = u
        .entries
        .eig()
        .map_err(|e| QuantumError::EigensolverFailure {
            n,
            detail: e.to_string(),
        })?;

    let mut order: Vec<usize> = (0..n).collect();
    let phases: Vec<f64> = vals.iter().map(|v| v.arg().rem_euclid(TWO_PI)).collect();
    order.sort_by(|&a, &b| phases[a].total_cmp(&phases[b]));

    let mut eigenphases = Vec::with_capacity(n);
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        let mut v = vecs.column(i).to_owned();
        let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        v /= Complex64::new(norm, 0.0);
        // Gauge fix: largest-magnitude component real positive.
        let lead = v
            .iter()
            .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
            .copied()
            .unwrap();
        let phase = lead / lead.norm();
        v /= phase;

        // Residual contract.
        let uv = u.entries.dot(&v);
        let ev = Complex64::from_polar(1.0, phases[i]);
        let residual = uv
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (a - ev * b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if residual > 1e-10 {
            return Err(QuantumError::EigensolverFailure {
                n,
                detail: format!("residual {residual:.3e} exceeds 1e-10 at eigenphase {}", phases[i]),
            });
        }

        eigenphases.push(phases[i]);
        eigenvectors.column_mut(col).assign(&v);
    }

    Ok(SpectralDecomposition {
        eigenphases,
        eigenvectors,
        intensities: None,
    })
}

/// Intensities |c_i|^2 = |<phi_i|ref>|^2; stored on the decomposition and
/// returned.
pub fn spectral_decomposition(
    decomp: &mut SpectralDecomposition,
    reference: &StateVector,
) -> Result<Vec<f64>, QuantumError> {
    if reference.dim() != decomp.dim() {
        return Err(QuantumError::DimensionMismatch {
            expected: decomp.dim(),
            got: reference.dim(),
        });
    }
    let intensities: Vec<f64> = (0..decomp.dim())
        .map(|i| {
            decomp
                .eigenvectors
                .column(i)
                .iter()
                .zip(reference.amplitudes.iter())
                .map(|(v, r)| v.conj() * r)
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect();
    decomp.intensities = Some(intensities.clone());
    Ok(intensities)
}

/// Gaussian wave packet centered on the unstable fixed point z0 = (0,0):
/// W(q) = (sinh(lambda)/(pi hbar))^(1/4) exp[-(q^2 / 2 hbar)(sinh lambda + i k/2)],
/// periodized as <j|z0> = W(j/N) + W(j/N - 1) and normalized.
pub fn resonance_state(space: TorusHilbert, k: f64) -> Result<StateVector, QuantumError> {
    let lambda = stability_exponent(k);
    let prefactor_arg = lambda.sinh() / (std::f64::consts::PI * space.hbar);
    if !(prefactor_arg > f64::MIN_POSITIVE) {
        return Err(QuantumError::DegeneratePacket(prefactor_arg));
    }
    let amp = prefactor_arg.powf(0.25);
    let width = Complex64::new(lambda.sinh(), 0.5 * k);
    let w = |q: f64| -> Complex64 {
        amp * (-(q * q / (2.0 * space.hbar)) * width).exp()
    };
    let amplitudes = Array1::from_iter((0..space.n).map(|j| {
        let q = j as f64 / space.n as f64;
        w(q) + w(q - 1.0)
    }));
    Ok(StateVector::normalized(amplitudes))
}

/// <psi|U|psi>; its magnitude is semiclassically 1/sqrt(cosh lambda) for the
/// resonance state.
pub fn autocorrelation(u: &PropagatorMatrix, state: &StateVector) -> Complex64 {
    state.overlap(&u.apply(state))
}

/// Intensity-weighted phase moments against the Bohr-Sommerfeld targets.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhaseMoments {
    /// sum |c_i|^2 phi~_i with phases unwrapped to the branch nearest phi_BS.
    pub mean: f64,
    /// [sum |c_i|^2 (phi~_i - phi_BS)^2]^(1/2).
    pub dispersion: f64,
    pub phi_bs: f64,
    /// Semiclassical dispersion target lambda / sqrt(2).
    pub sigma_semiclassical: f64,
}

pub fn phase_moments(
    decomp: &SpectralDecomposition,
    n: usize,
    k: f64,
) -> Result<PhaseMoments, QuantumError> {
    let intensities = decomp
        .intensities
        .as_ref()
        .ok_or(QuantumError::DimensionMismatch {
            expected: decomp.dim(),
            got: 0,
        })?;
    let phi_bs = bohr_sommerfeld_phase(n, k);
    let mut mean = 0.0;
    let mut var = 0.0;
    for (&phi, &w) in decomp.eigenphases.iter().zip(intensities) {
        let unwrapped = unwrap_near(phi, phi_bs);
        mean += w * unwrapped;
        var += w * (unwrapped - phi_bs).powi(2);
    }
    Ok(PhaseMoments {
        mean,
        dispersion: var.sqrt(),
        phi_bs,
        sigma_semiclassical: stability_exponent(k) / std::f64::consts::SQRT_2,
    })
}

/// Inverse participation ratio xi = sum |c_i|^4.
pub fn ipr(intensities: &[f64]) -> f64 {
    intensities.iter().map(|w| w * w).sum()
}

/// Number of participating states, 1/xi.
pub fn participation_ratio(intensities: &[f64]) -> f64 {
    1.0 / ipr(intensities)
}

/// Empirical integrable-limit IPR, xi_N = 3/(3.75 + ln N).
pub fn ipr_integrable_limit(n: usize) -> f64 {
    3.0 / (3.75 + (n as f64).ln())
}

/// Husimi distribution on a uniform torus grid, normalized to max = 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HusimiGrid {
    pub nq: usize,
    pub np: usize,
    /// Row-major, values[ip * nq + iq] for (q, p) = (iq/nq, ip/np).
    pub values: Vec<f64>,
}

impl HusimiGrid {
    pub fn value(&self, iq: usize, ip: usize) -> f64 {
        self.values[ip * self.nq + iq]
    }

    /// Grid indices of the maximum.
    pub fn argmax(&self) -> (usize, usize) {
        let (idx, _) = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        (idx % self.nq, idx / self.nq)
    }
}

/// H(q0, p0) = |<coh(q0, p0)|psi>|^2 with torus coherent states built from
/// periodized Gaussians of position width sqrt(hbar/2); three periodic
/// images either side keep the truncation below double precision.
pub fn husimi(state: &StateVector, space: TorusHilbert, grid_size: usize) -> HusimiGrid {
    let n = space.n;
    let hbar = space.hbar;
    let mut values = vec![0.0; grid_size * grid_size];
    let mut coh = Array1::<Complex64>::zeros(n);
    for ip in 0..grid_size {
        let p0 = ip as f64 / grid_size as f64;
        for iq in 0..grid_size {
            let q0 = iq as f64 / grid_size as f64;
            for (j, c) in coh.iter_mut().enumerate() {
                let q = j as f64 / n as f64;
                let mut amp = Complex64::new(0.0, 0.0);
                for image in -3i64..=3 {
                    let dq = q - q0 + image as f64;
                    amp += Complex64::new(-dq * dq / (2.0 * hbar), p0 * dq / hbar).exp();
                }
                *c = amp;
            }
            let norm = coh.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            let inner: Complex64 = coh
                .iter()
                .zip(state.amplitudes.iter())
                .map(|(c, a)| c.conj() * a)
                .sum();
            values[ip * grid_size + iq] = (inner / norm).norm_sqr();
        }
    }
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    if max > 0.0 {
        for v in &mut values {
            *v /= max;
        }
    }
    HusimiGrid {
        nq: grid_size,
        np: grid_size,
        values,
    }
}

/// One point of an adiabatically tracked eigenstate branch.
#[derive(Debug, Clone)]
pub struct TrackedState {
    pub k: f64,
    pub phi: f64,
    pub state: StateVector,
}

/// Follows an eigenstate along a k grid by maximal overlap with the previous
/// member; errors if the best overlap drops to 0.5 or below.
pub fn track_eigenstate(
    space: TorusHilbert,
    k_grid: &[f64],
    start_index: usize,
) -> Result<Vec<TrackedState>, QuantumError> {
    let mut branch = Vec::with_capacity(k_grid.len());
    let mut previous: Option<StateVector> = None;
    for &k in k_grid {
        let decomp = diagonalize(&build_propagator(space, k))?;
        let pick = match &previous {
            None => start_index,
            Some(prev) => {
                let (best, overlap) = (0..decomp.dim())
                    .map(|i| (i, prev.overlap(&decomp.eigenstate(i)).norm()))
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                if overlap <= 0.5 {
                    return Err(QuantumError::ContinuationLost { k, overlap });
                }
                best
            }
        };
        let state = decomp.eigenstate(pick);
        branch.push(TrackedState {
            k,
            phi: decomp.eigenphases[pick],
            state: state.clone(),
        });
        previous = Some(state);
    }
    Ok(branch)
}
