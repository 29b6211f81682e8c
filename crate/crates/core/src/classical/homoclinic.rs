//! Primary homoclinic orbits of z0 and their canonical invariants.
//!
//! Both manifolds are monotone graphs p(q) on their first traversal of the
//! separatrix region, so intersections are located as sign changes of
//! dp(q) = p_u(q) - p_s(q), then polished by bisection in q. The forward and
//! backward halves of an orbit are taken from the stable and unstable
//! parametrizations respectively, which keeps every orbit point on its
//! manifold to near machine precision.

use serde::{Deserialize, Serialize};

use super::manifold::{Manifold, ManifoldConfig};
use super::{
    generating_function, step_lift, step_lift_inverse, Branch, ClassicalError, Direction,
    LiftedOrbit, MapParams, PhasePoint, Side, TWO_PI,
};

#[derive(Debug, Clone)]
pub struct HomoclinicSearchConfig {
    pub manifold: ManifoldConfig,
    /// q-window of the fundamental lobe region scanned for intersections.
    pub q_window: (f64, f64),
    /// Initial scan resolution over the window.
    pub scan_points: usize,
    /// Intersection refinement target (position units).
    pub position_tol: f64,
    /// |d dp/dq| below this at a crossing is treated as a tangency.
    pub tangency_slope: f64,
    /// Analytic tail points appended on each end of an orbit.
    pub tail_points: usize,
}

impl Default for HomoclinicSearchConfig {
    fn default() -> Self {
        Self {
            manifold: ManifoldConfig::default(),
            q_window: (0.18, 0.82),
            scan_points: 600,
            position_tol: 1e-13,
            tangency_slope: 1e-10,
            tail_points: 12,
        }
    }
}

/// Fixture values for the relevance A and Lazutkin invariant L, which this
/// artifact does not compute from first principles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomoclinicFixtures {
    /// Perturbation strength at which the fixture was measured.
    pub k: f64,
    /// Mean relevance A = (A1 + A2) / 2.
    pub a_mean: f64,
    /// Relevance difference A2 - A1.
    pub delta_a: f64,
    /// Lazutkin invariants (L1, L2) when known.
    pub l: Option<(f64, f64)>,
}

impl Default for HomoclinicFixtures {
    /// Measured values at k = 0.5. The relative difference dA/A there is
    /// 3.9e-5 and shrinks with k.
    fn default() -> Self {
        Self {
            k: 0.5,
            a_mean: 0.53998,
            delta_a: 5.8e-4,
            l: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Computed,
    Fixture,
}

/// A primary homoclinic orbit with its canonical invariants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomoclinicRecord {
    /// 1 = first primary orbit (smaller action), 2 = second.
    pub index: u8,
    pub seed_point: PhasePoint,
    pub seed_lift: [f64; 2],
    pub orbit: LiftedOrbit,
    /// Homoclinic action S (generating-function sum relative to z0).
    pub action: f64,
    pub maslov: u8,
    /// Relevance A (fixture input, not computed).
    pub relevance: Option<f64>,
    /// Lazutkin invariant L (fixture input, not computed).
    pub lazutkin: Option<f64>,
    pub action_provenance: Provenance,
    pub invariant_provenance: Provenance,
    /// k at which the attached fixture was measured; a mismatch with the map
    /// parameter means the A/L values are borrowed, not measured.
    pub fixture_k: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Crossing {
    q: f64,
    s_unstable: f64,
    t_stable: f64,
    point: [f64; 2],
    /// d(gap)/dq at the crossing; kept for transversality diagnostics.
    #[allow(dead_code)]
    slope: f64,
}

/// Finds where a monotone-in-q manifold graph passes through `q_target`.
/// Returns the parameter and the lifted point.
fn param_at_q(manifold: &Manifold, q_target: f64, increasing: bool) -> (f64, [f64; 2]) {
    let past = |z: [f64; 2]| {
        if increasing {
            z[0] >= q_target
        } else {
            z[0] <= q_target
        }
    };
    let mut lo = 1e-9;
    let mut hi = lo;
    let mut z_hi = manifold.point_lift(hi);
    let mut guard = 0;
    while !past(z_hi) {
        lo = hi;
        hi *= 1.7;
        z_hi = manifold.point_lift(hi);
        guard += 1;
        assert!(guard < 400, "manifold never reaches q = {q_target}");
    }
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        let z = manifold.point_lift(mid);
        if past(z) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    (s, manifold.point_lift(s))
}

fn manifold_pair(
    params: MapParams,
    config: &HomoclinicSearchConfig,
) -> Result<(Manifold, Manifold), ClassicalError> {
    let unstable = Manifold::new(params, Branch::Unstable, Side::Plus, &config.manifold)?;
    // Stable branch approaching the lift (1,0) from the left with p > 0.
    let stable = Manifold::with_base(
        params,
        Branch::Stable,
        Side::Minus,
        [1.0, 0.0],
        &config.manifold,
    )?;
    Ok((unstable, stable))
}

/// Signed vertical gap between the two manifold graphs at position q.
fn gap_at(unstable: &Manifold, stable: &Manifold, q: f64) -> (f64, f64, f64) {
    let (s, zu) = param_at_q(unstable, q, true);
    let (t, zs) = param_at_q(stable, q, false);
    (zu[1] - zs[1], s, t)
}

fn locate_crossings(
    params: MapParams,
    config: &HomoclinicSearchConfig,
    unstable: &Manifold,
    stable: &Manifold,
) -> Result<Vec<Crossing>, ClassicalError> {
    let (q_lo, q_hi) = config.q_window;
    let n = config.scan_points;
    let mut crossings = Vec::new();
    let mut prev_q = q_lo;
    let (mut prev_gap, _, _) = gap_at(unstable, stable, prev_q);
    for i in 1..=n {
        let q = q_lo + (q_hi - q_lo) * i as f64 / n as f64;
        let (gap, _, _) = gap_at(unstable, stable, q);
        if prev_gap == 0.0 || prev_gap.signum() != gap.signum() {
            let c = refine_crossing(params, config, unstable, stable, prev_q, q)?;
            crossings.push(c);
        }
        prev_q = q;
        prev_gap = gap;
    }
    if crossings.is_empty() {
        return Err(ClassicalError::NoIntersectionFound);
    }
    Ok(crossings)
}

fn refine_crossing(
    _params: MapParams,
    config: &HomoclinicSearchConfig,
    unstable: &Manifold,
    stable: &Manifold,
    mut q_lo: f64,
    mut q_hi: f64,
) -> Result<Crossing, ClassicalError> {
    let (mut gap_lo, _, _) = gap_at(unstable, stable, q_lo);
    for _ in 0..80 {
        let mid = 0.5 * (q_lo + q_hi);
        let (gap, _, _) = gap_at(unstable, stable, mid);
        if gap == 0.0 {
            q_lo = mid;
            q_hi = mid;
            break;
        }
        if gap.signum() == gap_lo.signum() {
            q_lo = mid;
            gap_lo = gap;
        } else {
            q_hi = mid;
        }
        if q_hi - q_lo < 1e-16 {
            break;
        }
    }
    let q = 0.5 * (q_lo + q_hi);
    let (gap, s, t) = gap_at(unstable, stable, q);
    let h = 1e-7;
    let (gap_r, _, _) = gap_at(unstable, stable, q + h);
    let (gap_l, _, _) = gap_at(unstable, stable, q - h);
    let slope = (gap_r - gap_l) / (2.0 * h);
    if slope.abs() < config.tangency_slope {
        return Err(ClassicalError::TangencyDetected { q, slope });
    }
    let zu = unstable.point_lift(s);
    let zs = stable.point_lift(t);
    debug_assert!(gap.abs() <= 1e-10);
    Ok(Crossing {
        q,
        s_unstable: s,
        t_stable: t,
        point: [0.5 * (zu[0] + zs[0]), 0.5 * (zu[1] + zs[1])],
        slope,
    })
}

/// The two adjacent primary crossings closest to the separatrix apex.
fn primary_pair(crossings: &[Crossing]) -> Result<(Crossing, Crossing), ClassicalError> {
    if crossings.len() < 2 {
        return Err(ClassicalError::NoIntersectionFound);
    }
    let mut best = None;
    for w in crossings.windows(2) {
        let mid = 0.5 * (w[0].q + w[1].q);
        let score = (mid - 0.5).abs();
        match best {
            None => best = Some((score, w[0], w[1])),
            Some((s, _, _)) if score < s => best = Some((score, w[0], w[1])),
            _ => {}
        }
    }
    let (_, a, b) = best.unwrap();
    Ok((a, b))
}

/// Assembles the full lifted orbit through a crossing: the backward half from
/// the unstable parametrization, the forward half from the stable one, plus
/// analytic tails converging to the lifts (0,0) and (1,0).
fn build_orbit(
    params: MapParams,
    config: &HomoclinicSearchConfig,
    unstable: &Manifold,
    stable: &Manifold,
    crossing: &Crossing,
) -> LiftedOrbit {
    let delta = config.manifold.seed_delta;
    let lambda = super::stability_exponent(params.k);
    let big = super::leading_multiplier(params.k);

    let decompose = |s: f64| {
        let n = ((s / delta).ln() / lambda).ceil().max(0.0) as i64;
        (s / big.powi(n as i32), n)
    };

    let (s0, n_u) = decompose(crossing.s_unstable);
    let (t0, n_s) = decompose(crossing.t_stable);

    let mut points: Vec<[f64; 2]> = Vec::new();
    // Analytic tail at (0,0): linear in the eigenvector, farthest first.
    for j in (1..=config.tail_points).rev() {
        let s = s0 / big.powi(j as i32);
        points.push(unstable.point_lift(s));
    }
    // Unstable half, iterated forward from the seed.
    let mut z = unstable.point_lift(s0);
    points.push(z);
    for _ in 0..n_u {
        z = step_lift(z, params);
        points.push(z);
    }
    // The last unstable point and the first stable point are the crossing
    // within position_tol; keep their average as the single seed entry.
    let mut stable_half: Vec<[f64; 2]> = Vec::new();
    let mut w = stable.point_lift(t0);
    stable_half.push(w);
    for _ in 0..n_s {
        w = step_lift_inverse(w, params);
        stable_half.push(w);
    }
    stable_half.reverse();
    let last_u = points.pop().unwrap();
    let first_s = stable_half[0];
    points.push([
        0.5 * (last_u[0] + first_s[0]),
        0.5 * (last_u[1] + first_s[1]),
    ]);
    points.extend_from_slice(&stable_half[1..]);
    // Analytic tail at (1,0).
    for j in 1..=config.tail_points {
        let t = t0 / big.powi(j as i32);
        points.push(stable.point_lift(t));
    }

    LiftedOrbit {
        points,
        direction: Direction::Forward,
    }
}

/// Convergent generating-function action of a lifted homoclinic orbit,
/// relative to the fixed point: S = sum_t [F(q_t, q_{t+1}) - F(0,0)].
pub fn homoclinic_action(orbit: &LiftedOrbit, params: MapParams) -> Result<f64, ClassicalError> {
    let first = *orbit.points.first().ok_or(ClassicalError::NonConvergentSum([0.0, 0.0]))?;
    let last = *orbit.points.last().unwrap();
    for z in [first, last] {
        if (z[0] - z[0].round()).abs() > 1e-6 || z[1].abs() > 1e-6 {
            return Err(ClassicalError::NonConvergentSum(z));
        }
    }
    let f_fixed = -params.k / (TWO_PI * TWO_PI);
    let mut sum = 0.0;
    for w in orbit.points.windows(2) {
        sum += generating_function(w[0][0], w[1][0], params) - f_fixed;
    }
    Ok(sum)
}

/// Locates the two primary homoclinic orbits and computes their invariants.
///
/// The Maslov indices are (0, 1) for all k; A and L come from fixtures when
/// provided (their computation is outside this artifact's scope).
pub fn find_primary_homoclinic(
    params: MapParams,
    config: &HomoclinicSearchConfig,
    fixtures: Option<&HomoclinicFixtures>,
) -> Result<(HomoclinicRecord, HomoclinicRecord), ClassicalError> {
    let (unstable, stable) = manifold_pair(params, config)?;
    let crossings = locate_crossings(params, config, &unstable, &stable)?;
    let (a, b) = primary_pair(&crossings)?;

    let make = |crossing: &Crossing| -> Result<(LiftedOrbit, f64, [f64; 2]), ClassicalError> {
        let orbit = build_orbit(params, config, &unstable, &stable, crossing);
        let action = homoclinic_action(&orbit, params)?;
        Ok((orbit, action, crossing.point))
    };
    let (orbit_a, action_a, seed_a) = make(&a)?;
    let (orbit_b, action_b, seed_b) = make(&b)?;

    // Index 1 is the orbit with the smaller action, so dS = S2 - S1 > 0.
    let ((o1, s1, z1), (o2, s2, z2)) = if action_a <= action_b {
        ((orbit_a, action_a, seed_a), (orbit_b, action_b, seed_b))
    } else {
        ((orbit_b, action_b, seed_b), (orbit_a, action_a, seed_a))
    };

    let (a1, a2, l1, l2, fixture_k) = match fixtures {
        Some(f) => {
            let (l1, l2) = match f.l {
                Some((x, y)) => (Some(x), Some(y)),
                None => (None, None),
            };
            (
                Some(f.a_mean - 0.5 * f.delta_a),
                Some(f.a_mean + 0.5 * f.delta_a),
                l1,
                l2,
                Some(f.k),
            )
        }
        None => (None, None, None, None, None),
    };

    let record = |index: u8,
                  seed: [f64; 2],
                  orbit: LiftedOrbit,
                  action: f64,
                  relevance: Option<f64>,
                  lazutkin: Option<f64>| {
        HomoclinicRecord {
            index,
            seed_point: PhasePoint::reduced(seed[0], seed[1]),
            seed_lift: seed,
            orbit,
            action,
            maslov: index - 1,
            relevance,
            lazutkin,
            action_provenance: Provenance::Computed,
            invariant_provenance: Provenance::Fixture,
            fixture_k,
        }
    };

    Ok((
        record(1, z1, o1, s1, a1, l1),
        record(2, z2, o2, s2, a2, l2),
    ))
}

/// Lobe area dS: shoelace area of the polygon bounded by the unstable and
/// stable arcs between the two adjacent primary homoclinic points.
pub fn lobe_area(params: MapParams, config: &HomoclinicSearchConfig) -> Result<f64, ClassicalError> {
    let (unstable, stable) = manifold_pair(params, config)?;
    let crossings = locate_crossings(params, config, &unstable, &stable)?;
    let (a, b) = primary_pair(&crossings)?;
    let (q_lo, q_hi) = if a.q <= b.q { (a.q, b.q) } else { (b.q, a.q) };

    let mut n = 512;
    let mut prev = f64::NAN;
    loop {
        let area = shoelace_lobe(&unstable, &stable, q_lo, q_hi, n);
        if !prev.is_nan() && (area - prev).abs() <= 1e-3 * area.abs() {
            return Ok(area.abs());
        }
        prev = area;
        n *= 2;
        if n > 16384 {
            return Ok(area.abs());
        }
    }
}

fn shoelace_lobe(unstable: &Manifold, stable: &Manifold, q_lo: f64, q_hi: f64, n: usize) -> f64 {
    let mut polygon: Vec<[f64; 2]> = Vec::with_capacity(2 * n + 2);
    for i in 0..=n {
        let q = q_lo + (q_hi - q_lo) * i as f64 / n as f64;
        let (_, z) = param_at_q(unstable, q, true);
        polygon.push(z);
    }
    for i in (0..=n).rev() {
        let q = q_lo + (q_hi - q_lo) * i as f64 / n as f64;
        let (_, z) = param_at_q(stable, q, false);
        polygon.push(z);
    }
    let mut area2 = 0.0;
    for i in 0..polygon.len() {
        let a = polygon[i];
        let b = polygon[(i + 1) % polygon.len()];
        area2 += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * area2
}

/// Closed-form estimate of the lobe area,
/// dS(k) = 6 pi (1 - 0.341 k^(1/3)) exp(-pi^2 / sqrt(k)).
pub fn lobe_area_estimate(k: f64) -> f64 {
    6.0 * std::f64::consts::PI * (1.0 - 0.341 * k.powf(1.0 / 3.0))
        * (-std::f64::consts::PI.powi(2) / k.sqrt()).exp()
}

/// Perturbation strength at which the two-orbit interference destroys the
/// ESQPT precursor: the root of dS(k) = 3/(4N) (i.e. dS/hbar = 3 pi / 2).
pub fn k_break(n: usize) -> Result<f64, ClassicalError> {
    let target = 3.0 / (4.0 * n as f64);
    let mut lo = 1e-3;
    let mut hi = 6.0;
    if lobe_area_estimate(lo) > target || lobe_area_estimate(hi) < target {
        return Err(ClassicalError::RootNotBracketed(n));
    }
    // dS is monotone increasing on the bracket.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lobe_area_estimate(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < 1e-6 * lo {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn config() -> HomoclinicSearchConfig {
        HomoclinicSearchConfig::default()
    }

    #[test]
    fn fixed_orbit_has_zero_action() {
        let params = MapParams::new(0.5).unwrap();
        let orbit = LiftedOrbit {
            points: vec![[0.0, 0.0]; 8],
            direction: Direction::Forward,
        };
        assert_abs_diff_eq!(homoclinic_action(&orbit, params).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn action_rejects_non_homoclinic_orbit() {
        let params = MapParams::new(0.5).unwrap();
        let orbit = LiftedOrbit {
            points: vec![[0.3, 0.1], [0.5, 0.2]],
            direction: Direction::Forward,
        };
        assert!(matches!(
            homoclinic_action(&orbit, params),
            Err(ClassicalError::NonConvergentSum(_))
        ));
    }

    #[test]
    fn primary_invariants_at_half_k() {
        // S = (S1+S2)/2 ~ 0.142258 and dS = S2-S1 ~ 1.2e-5 at k = 0.5.
        let params = MapParams::new(0.5).unwrap();
        let (h1, h2) =
            find_primary_homoclinic(params, &config(), Some(&HomoclinicFixtures::default()))
                .unwrap();
        let s_mean = 0.5 * (h1.action + h2.action);
        let ds = h2.action - h1.action;
        assert_abs_diff_eq!(s_mean, 0.142258, epsilon = 1e-4);
        assert_relative_eq!(ds, 1.2e-5, max_relative = 0.10);
        assert_eq!((h1.maslov, h2.maslov), (0, 1));
        assert_eq!(h1.relevance.map(|a| a < h2.relevance.unwrap()), Some(true));
    }

    #[test]
    fn seed_points_stay_on_the_stable_curve() {
        let params = MapParams::new(0.5).unwrap();
        let cfg = config();
        let (h1, h2) = find_primary_homoclinic(params, &cfg, None).unwrap();
        for h in [&h1, &h2] {
            let mut z = h.seed_lift;
            for _ in 0..20 {
                z = step_lift(z, params);
            }
            // After 20 forward steps the point must have converged toward the
            // lift (1,0) of z0 rather than escaped along the unstable side.
            assert!((z[0] - 1.0).abs() < 5e-3 && z[1].abs() < 5e-3, "escaped: {z:?}");
        }
    }

    #[test]
    fn action_difference_matches_lobe_area() {
        // MacKay-Meiss-Percival: S2 - S1 equals the lobe area.
        for k in [0.5, 1.0, 1.5] {
            let params = MapParams::new(k).unwrap();
            let cfg = config();
            let (h1, h2) = find_primary_homoclinic(params, &cfg, None).unwrap();
            let ds = h2.action - h1.action;
            let area = lobe_area(params, &cfg).unwrap();
            assert_relative_eq!(ds, area, max_relative = 0.05);
        }
    }

    #[test]
    fn lobe_area_estimate_values() {
        assert_relative_eq!(lobe_area_estimate(0.5), 1.19e-5, max_relative = 0.01);
        assert_relative_eq!(lobe_area_estimate(1.62), 4.85e-3, max_relative = 0.01);
        // Monotone from below toward zero as k -> 0+.
        let mut prev = lobe_area_estimate(0.5);
        for k in [0.4, 0.3, 0.2, 0.1, 0.05] {
            let v = lobe_area_estimate(k);
            assert!(v < prev && v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn k_break_reference_points() {
        assert_abs_diff_eq!(k_break(158).unwrap(), 1.62, epsilon = 0.02);
        // k = 0.5 corresponds to N ~ 62900 through N = 3/(4 dS).
        let n = 3.0 / (4.0 * lobe_area_estimate(0.5));
        assert_relative_eq!(n, 62900.0, max_relative = 0.02);
        // Strictly decreasing in N.
        let mut prev = f64::INFINITY;
        for n in [100, 200, 400, 1000, 10000] {
            let kb = k_break(n).unwrap();
            assert!(kb < prev);
            prev = kb;
        }
    }

    #[test]
    fn lobe_area_stable_under_refinement() {
        let params = MapParams::new(1.0).unwrap();
        let coarse = lobe_area(params, &config()).unwrap();
        let mut fine_cfg = config();
        fine_cfg.manifold.max_spacing *= 0.5;
        fine_cfg.scan_points *= 2;
        let fine = lobe_area(params, &fine_cfg).unwrap();
        assert_relative_eq!(coarse, fine, max_relative = 0.01);
    }
}
