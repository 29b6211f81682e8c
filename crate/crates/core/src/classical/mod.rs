//! Classical standard-map dynamics: iteration, linearization, manifold
//! tracing, primary homoclinic orbits and their canonical invariants.

mod homoclinic;
mod manifold;

pub use homoclinic::{
    find_primary_homoclinic, homoclinic_action, k_break, lobe_area, lobe_area_estimate,
    HomoclinicFixtures, HomoclinicRecord, HomoclinicSearchConfig, Provenance,
};
pub use manifold::{
    distance_to_polyline, trace_manifold, Manifold, ManifoldConfig, ManifoldCurve,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum ClassicalError {
    #[error("perturbation strength k must be finite and non-negative, got {0}")]
    InvalidK(f64),
    #[error("manifolds require an unstable fixed point (k > 0)")]
    StableFixedPoint,
    #[error("manifold refinement exceeded the point budget ({0} points)")]
    RefinementBudgetExceeded(usize),
    #[error("no stable/unstable intersection found in the search window")]
    NoIntersectionFound,
    #[error("near-tangent intersection at q = {q:.6} (crossing slope {slope:.3e})")]
    TangencyDetected { q: f64, slope: f64 },
    #[error("action sum does not converge: orbit endpoint {0:?} is not near a lift of z0")]
    NonConvergentSum([f64; 2]),
    #[error("no root of the lobe-area estimate brackets 3/(4N) for N = {0}")]
    RootNotBracketed(usize),
}

/// Perturbation strength of the standard map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    pub k: f64,
}

impl MapParams {
    pub fn new(k: f64) -> Result<Self, ClassicalError> {
        if !k.is_finite() || k < 0.0 {
            return Err(ClassicalError::InvalidK(k));
        }
        Ok(Self { k })
    }
}

/// Point on the unit torus, stored reduced to [0,1) x [0,1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
}

impl PhasePoint {
    /// Reduces an arbitrary real representative mod 1.
    pub fn reduced(q: f64, p: f64) -> Self {
        Self {
            q: q.rem_euclid(1.0),
            p: p.rem_euclid(1.0),
        }
    }

    pub fn lift(&self) -> [f64; 2] {
        [self.q, self.p]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

/// Orbit segment on the real line, without modular reduction.
///
/// Consecutive points satisfy the lifted map exactly; the endpoints of a
/// homoclinic orbit approach lifts of z0 so action sums converge.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiftedOrbit {
    pub points: Vec<[f64; 2]>,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Stable,
    Unstable,
}

/// Which side of the fixed point the branch leaves along the eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

/// One forward step of the lifted map (no reduction).
#[inline]
pub fn step_lift(z: [f64; 2], params: MapParams) -> [f64; 2] {
    let p = z[1] + params.k / TWO_PI * (TWO_PI * z[0]).sin();
    [z[0] + p, p]
}

/// One inverse step of the lifted map.
#[inline]
pub fn step_lift_inverse(z: [f64; 2], params: MapParams) -> [f64; 2] {
    let q = z[0] - z[1];
    [q, z[1] - params.k / TWO_PI * (TWO_PI * q).sin()]
}

/// Iterates the lifted map `steps` times (negative = inverse map).
pub fn advance_lift(mut z: [f64; 2], params: MapParams, steps: i64) -> [f64; 2] {
    if steps >= 0 {
        for _ in 0..steps {
            z = step_lift(z, params);
        }
    } else {
        for _ in 0..(-steps) {
            z = step_lift_inverse(z, params);
        }
    }
    z
}

/// Iterates the standard map `steps` times, reduced mod 1.
/// Negative `steps` applies the inverse map.
pub fn advance(z: PhasePoint, params: MapParams, steps: i64) -> PhasePoint {
    let w = advance_lift(z.lift(), params, steps);
    PhasePoint::reduced(w[0], w[1])
}

/// Linearization of the map at `z`: M = [[1+k c, 1], [k c, 1]], c = cos(2 pi q).
pub fn tangent_map(z: PhasePoint, params: MapParams) -> [[f64; 2]; 2] {
    let c = (TWO_PI * z.q).cos();
    [[1.0 + params.k * c, 1.0], [params.k * c, 1.0]]
}

/// Stability exponent of the fixed point z0 = (0,0):
/// lambda = ln(1 + k/2 + sqrt(k + k^2/4)).
pub fn stability_exponent(k: f64) -> f64 {
    (1.0 + 0.5 * k + (k + 0.25 * k * k).sqrt()).ln()
}

/// Leading eigenvalue of the tangent map at z0 (exp of the stability exponent).
pub fn leading_multiplier(k: f64) -> f64 {
    1.0 + 0.5 * k + (k + 0.25 * k * k).sqrt()
}

/// Unit eigenvector of tangent_map(z0) for eigenvalue `multiplier`.
///
/// At z0 the tangent map is [[1+k, 1], [k, 1]]; the eigenvector for
/// eigenvalue m is (1, m - 1 - k) up to normalization.
pub fn fixed_point_eigenvector(k: f64, multiplier: f64) -> [f64; 2] {
    let v = [1.0, multiplier - 1.0 - k];
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    [v[0] / n, v[1] / n]
}

/// Generating function of one map step, F(q, q') = (q'-q)^2/2 - (k/4 pi^2) cos(2 pi q).
///
/// Regenerates the map through p = -dF/dq, p' = dF/dq'.
#[inline]
pub fn generating_function(q: f64, q_next: f64, params: MapParams) -> f64 {
    let d = q_next - q;
    0.5 * d * d - params.k / (TWO_PI * TWO_PI) * (TWO_PI * q).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn fixed_point_stays_fixed() {
        for k in [0.0, 0.5, 1.8] {
            let params = MapParams::new(k).unwrap();
            let z = advance(PhasePoint::reduced(0.0, 0.0), params, 1);
            assert_eq!(z, PhasePoint { q: 0.0, p: 0.0 });
        }
    }

    #[test]
    fn period_two_orbit() {
        // The kick vanishes at q = 0.5 and q = 0, so (0.5, 0.5) -> (0, 0.5) -> (0.5, 0.5).
        let params = MapParams::new(1.3).unwrap();
        let z = PhasePoint::reduced(0.5, 0.5);
        let mid = advance(z, params, 1);
        assert_abs_diff_eq!(mid.q, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mid.p, 0.5, epsilon = 1e-14);
        let back = advance(z, params, 2);
        assert_abs_diff_eq!(back.q, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(back.p, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn tangent_trace_at_fixed_point() {
        let params = MapParams::new(0.5).unwrap();
        let m = tangent_map(PhasePoint::reduced(0.0, 0.0), params);
        assert_abs_diff_eq!(m[0][0] + m[1][1], 2.5, epsilon = 1e-14);
    }

    #[test]
    fn monodromy_of_period_two_orbit_is_symplectic() {
        let params = MapParams::new(0.9).unwrap();
        let a = tangent_map(PhasePoint::reduced(0.5, 0.5), params);
        let b = tangent_map(PhasePoint::reduced(0.0, 0.5), params);
        let m = [
            [
                b[0][0] * a[0][0] + b[0][1] * a[1][0],
                b[0][0] * a[0][1] + b[0][1] * a[1][1],
            ],
            [
                b[1][0] * a[0][0] + b[1][1] * a[1][0],
                b[1][0] * a[0][1] + b[1][1] * a[1][1],
            ],
        ];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        assert_abs_diff_eq!(det, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn stability_exponent_closed_form() {
        assert_abs_diff_eq!(stability_exponent(0.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(stability_exponent(0.5), 2f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn exponent_matches_tangent_map_eigenvalue() {
        // Oracle: leading eigenvalue of the 2x2 tangent map from the
        // characteristic equation mu^2 - tr mu + 1 = 0.
        for k in [0.2, 1.0, 1.8] {
            let params = MapParams::new(k).unwrap();
            let m = tangent_map(PhasePoint::reduced(0.0, 0.0), params);
            let tr = m[0][0] + m[1][1];
            let mu = 0.5 * (tr + (tr * tr - 4.0).sqrt());
            assert_abs_diff_eq!(stability_exponent(k).exp(), mu, epsilon = 1e-12);
        }
    }

    #[test]
    fn generating_function_regenerates_map() {
        // p = -dF/dq and p' = dF/dq' must reproduce the map step.
        let params = MapParams::new(0.7).unwrap();
        let h = 1e-6;
        for (q, p) in [(0.12, 0.31), (0.48, 0.05), (0.93, 0.77)] {
            let z1 = step_lift([q, p], params);
            let q1 = z1[0];
            let df_dq = (generating_function(q + h, q1, params)
                - generating_function(q - h, q1, params))
                / (2.0 * h);
            let df_dq1 = (generating_function(q, q1 + h, params)
                - generating_function(q, q1 - h, params))
                / (2.0 * h);
            assert_abs_diff_eq!(-df_dq, p, epsilon = 1e-8);
            assert_abs_diff_eq!(df_dq1, z1[1], epsilon = 1e-8);
        }
    }

    #[test]
    fn reversed_iteration_fifty_steps() {
        // Long forward/backward excursion on points away from the chaotic
        // layer, where roundoff grows only polynomially.
        for k in [0.2, 0.5, 1.0] {
            let params = MapParams::new(k).unwrap();
            let z = PhasePoint::reduced(0.31, 0.43);
            let w = advance(advance(z, params, 50), params, -50);
            assert_abs_diff_eq!(w.q, z.q, epsilon = 1e-10);
            assert_abs_diff_eq!(w.p, z.p, epsilon = 1e-10);
        }
    }

    proptest! {
        #[test]
        fn tangent_map_is_area_preserving(q in 0.0..1.0f64, p in 0.0..1.0f64, k in 0.0..2.0f64) {
            let params = MapParams::new(k).unwrap();
            let m = tangent_map(PhasePoint::reduced(q, p), params);
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            prop_assert!((det - 1.0).abs() <= 1e-14);
        }

        #[test]
        fn reversed_iteration_returns(q in 0.0..1.0f64, p in 0.0..1.0f64,
                                      k in 0.0..2.0f64, n in 1i64..25) {
            let params = MapParams::new(k).unwrap();
            let z = PhasePoint::reduced(q, p);
            // Roundoff grows with the product of tangent-map norms along the
            // orbit; measure it so chaotic stretches get a sound tolerance.
            let mut amp = 1.0f64;
            let mut w = z;
            for _ in 0..n {
                let m = tangent_map(w, params);
                let norm = (m[0][0].abs() + m[0][1].abs())
                    .max(m[1][0].abs() + m[1][1].abs());
                amp *= norm;
                w = advance(w, params, 1);
            }
            prop_assume!(amp < 1e12);
            let tol = 1e-10f64.max(1e-14 * amp);
            let w = advance(advance(z, params, n), params, -n);
            let dq = (w.q - z.q).abs().min(1.0 - (w.q - z.q).abs());
            let dp = (w.p - z.p).abs().min(1.0 - (w.p - z.p).abs());
            prop_assert!(dq <= tol && dp <= tol);
        }
    }
}
