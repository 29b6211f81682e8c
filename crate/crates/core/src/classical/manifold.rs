//! Invariant manifolds of the unstable fixed point z0 = (0,0).
//!
//! Points are generated from a tiny seed segment along the eigenvector and
//! grown by iteration: forward map for the unstable branch, inverse map for
//! the stable one. Iterating in the expanding direction keeps transverse
//! errors contracted, so every point lies on the manifold to near machine
//! precision.

use serde::{Deserialize, Serialize};

use super::{
    advance_lift, fixed_point_eigenvector, leading_multiplier, stability_exponent, Branch,
    ClassicalError, MapParams, PhasePoint, Side,
};

#[derive(Debug, Clone, Copy)]
pub struct ManifoldConfig {
    /// Seed distance along the eigenvector; below linearization error at
    /// double precision, above rounding noise.
    pub seed_delta: f64,
    /// Insert midpoints when adjacent images are farther apart than this.
    pub max_spacing: f64,
    /// Insert midpoints when the local turning angle exceeds this (radians).
    pub max_turn_angle: f64,
    /// Refinement budget.
    pub max_points: usize,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        Self {
            seed_delta: 1e-8,
            max_spacing: 1e-3,
            max_turn_angle: 0.2,
            max_points: 2_000_000,
        }
    }
}

/// On-demand parametrization of one manifold branch.
///
/// `point_lift(s)` returns the manifold point at parameter `s >= 0`, where
/// `s` is the displacement along the eigenvector before iteration; the map
/// takes parameter `s` to `multiplier * s` exactly.
#[derive(Debug, Clone)]
pub struct Manifold {
    params: MapParams,
    branch: Branch,
    base_lift: [f64; 2],
    dir: [f64; 2],
    /// Expansion factor per iteration step (> 1).
    multiplier: f64,
    log_multiplier: f64,
    delta: f64,
}

impl Manifold {
    pub fn new(
        params: MapParams,
        branch: Branch,
        side: Side,
        config: &ManifoldConfig,
    ) -> Result<Self, ClassicalError> {
        Self::with_base(params, branch, side, [0.0, 0.0], config)
    }

    /// Same as `new` but anchored at an integer lift of z0 (e.g. (1,0)),
    /// which keeps lifted coordinates continuous across q = 0. The lifted
    /// map commutes with integer q-translations, so `base_lift` must be of
    /// the form (m, 0).
    pub fn with_base(
        params: MapParams,
        branch: Branch,
        side: Side,
        base_lift: [f64; 2],
        config: &ManifoldConfig,
    ) -> Result<Self, ClassicalError> {
        if params.k <= 0.0 {
            return Err(ClassicalError::StableFixedPoint);
        }
        let big = leading_multiplier(params.k);
        // Unstable branch grows along the eigenvalue-big eigenvector under the
        // forward map; the stable branch grows along the eigenvalue-1/big
        // eigenvector under the inverse map, with the same expansion rate.
        let eig = match branch {
            Branch::Unstable => fixed_point_eigenvector(params.k, big),
            Branch::Stable => fixed_point_eigenvector(params.k, 1.0 / big),
        };
        let sign = match side {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        };
        Ok(Self {
            params,
            branch,
            base_lift,
            dir: [sign * eig[0], sign * eig[1]],
            multiplier: big,
            log_multiplier: stability_exponent(params.k),
            delta: config.seed_delta,
        })
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn expansion_rate(&self) -> f64 {
        self.multiplier
    }

    /// Manifold point at parameter `s >= 0`, in lifted coordinates.
    ///
    /// Iteration runs in coordinates relative to z0 = (0,0) and the integer
    /// base offset is added afterwards; seeding at e.g. (1 - delta, ...)
    /// directly would round the tiny deviation to ~1e-16 absolute, which the
    /// expansion then amplifies to ~1e-8 noise.
    pub fn point_lift(&self, s: f64) -> [f64; 2] {
        let z = if s <= self.delta {
            [s * self.dir[0], s * self.dir[1]]
        } else {
            let n = ((s / self.delta).ln() / self.log_multiplier).ceil() as i64;
            let s0 = s / self.multiplier.powi(n as i32);
            let seed = [s0 * self.dir[0], s0 * self.dir[1]];
            let steps = match self.branch {
                Branch::Unstable => n,
                Branch::Stable => -n,
            };
            advance_lift(seed, self.params, steps)
        };
        [self.base_lift[0] + z[0], self.base_lift[1] + z[1]]
    }

    pub fn point(&self, s: f64) -> PhasePoint {
        let z = self.point_lift(s);
        PhasePoint::reduced(z[0], z[1])
    }
}

/// Adaptively refined polyline approximation of a manifold branch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifoldCurve {
    pub branch: Branch,
    pub side: Side,
    /// Points reduced to the unit torus.
    pub points: Vec<PhasePoint>,
    /// Lifted points (continuous geometry, no wrap jumps).
    pub points_lift: Vec<[f64; 2]>,
    /// Monotone parameter values along the branch.
    pub arc_params: Vec<f64>,
}

impl ManifoldCurve {
    pub fn arc_length(&self) -> f64 {
        self.points_lift
            .windows(2)
            .map(|w| dist(w[0], w[1]))
            .sum()
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Traces one side of a manifold branch until `target_arc_length` is reached,
/// inserting midpoints wherever spacing or turning angle exceeds the
/// configured thresholds.
pub fn trace_manifold(
    params: MapParams,
    branch: Branch,
    side: Side,
    target_arc_length: f64,
    config: &ManifoldConfig,
) -> Result<ManifoldCurve, ClassicalError> {
    let manifold = Manifold::new(params, branch, side, config)?;

    let mut s_values = vec![0.0, config.seed_delta];
    let mut points = vec![manifold.point_lift(0.0), manifold.point_lift(config.seed_delta)];

    let mut arc = 0.0;
    let mut s_max = config.seed_delta;
    while arc < target_arc_length {
        s_max *= manifold.expansion_rate();
        s_values.push(s_max);
        points.push(manifold.point_lift(s_max));
        refine(&manifold, &mut s_values, &mut points, config)?;
        arc = points.windows(2).map(|w| dist(w[0], w[1])).sum();
        if s_max > config.seed_delta * manifold.expansion_rate().powi(400) {
            break;
        }
    }

    // Trim past the target so callers get a predictable extent.
    let mut acc = 0.0;
    let mut end = points.len();
    for i in 1..points.len() {
        acc += dist(points[i - 1], points[i]);
        if acc >= target_arc_length {
            end = i + 1;
            break;
        }
    }
    points.truncate(end);
    s_values.truncate(end);

    Ok(ManifoldCurve {
        branch,
        side,
        points: points
            .iter()
            .map(|z| PhasePoint::reduced(z[0], z[1]))
            .collect(),
        points_lift: points,
        arc_params: s_values,
    })
}

fn refine(
    manifold: &Manifold,
    s_values: &mut Vec<f64>,
    points: &mut Vec<[f64; 2]>,
    config: &ManifoldConfig,
) -> Result<(), ClassicalError> {
    let mut pass = 0;
    loop {
        let mut inserted = false;
        let mut i = 1;
        while i < points.len() {
            let needs_split = {
                let spacing = dist(points[i - 1], points[i]);
                let angle = if i + 1 < points.len() {
                    turn_angle(points[i - 1], points[i], points[i + 1])
                } else {
                    0.0
                };
                spacing > config.max_spacing || angle > config.max_turn_angle
            };
            if needs_split && s_values[i] - s_values[i - 1] > f64::EPSILON * s_values[i] {
                let s_mid = 0.5 * (s_values[i - 1] + s_values[i]);
                s_values.insert(i, s_mid);
                points.insert(i, manifold.point_lift(s_mid));
                inserted = true;
                i += 2;
            } else {
                i += 1;
            }
            if points.len() > config.max_points {
                return Err(ClassicalError::RefinementBudgetExceeded(points.len()));
            }
        }
        if !inserted {
            return Ok(());
        }
        pass += 1;
        if pass > 64 {
            return Ok(());
        }
    }
}

fn turn_angle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1]];
    let v = [c[0] - b[0], c[1] - b[1]];
    let cross = u[0] * v[1] - u[1] * v[0];
    let dot = u[0] * v[0] + u[1] * v[1];
    cross.atan2(dot).abs()
}

/// Distance from `z` to the nearest segment of a polyline (lift coordinates).
pub fn distance_to_polyline(z: [f64; 2], polyline: &[[f64; 2]]) -> f64 {
    let mut best = f64::INFINITY;
    for w in polyline.windows(2) {
        best = best.min(segment_distance(z, w[0], w[1]));
    }
    best
}

fn segment_distance(z: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let az = [z[0] - a[0], z[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((az[0] * ab[0] + az[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let proj = [a[0] + t * ab[0], a[1] + t * ab[1]];
    dist(z, proj)
}
