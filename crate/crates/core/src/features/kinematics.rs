//! Per-stroke differentiation: velocity, acceleration and angular velocity.
//!
//! Derivatives use central differences on the (possibly nonuniform) sample
//! times with one-sided differences at the stroke ends. They are never taken
//! across a pen lift.

use std::f64::consts::PI;

/// Minimum samples a stroke needs to contribute kinematic features.
pub const MIN_KINEMATIC_SAMPLES: usize = 3;

/// Derivative of `values` with respect to `t`.
pub fn derivative(values: &[f64], t: &[f64]) -> Vec<f64> {
    let n = values.len();
    debug_assert_eq!(n, t.len());
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| {
                let (a, b) = match i {
                    0 => (0, 1),
                    i if i == n - 1 => (n - 2, n - 1),
                    i => (i - 1, i + 1),
                };
                (values[b] - values[a]) / (t[b] - t[a])
            })
            .collect(),
    }
}

/// Centred moving average with a window shrinking at the ends.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 || values.is_empty() {
        return values.to_vec();
    }
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Kinematic signals of one stroke, one entry per sample unless noted.
#[derive(Debug, Clone, Default)]
pub struct StrokeKinematics {
    pub t: Vec<f64>,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub speed: Vec<f64>,
    pub ax: Vec<f64>,
    pub ay: Vec<f64>,
    pub accel: Vec<f64>,
    /// Signed angular velocity in rad/s, one value per pair of consecutive
    /// segments, with the time it refers to.
    pub omega: Vec<f64>,
    pub omega_t: Vec<f64>,
}

impl StrokeKinematics {
    /// `None` for strokes shorter than [`MIN_KINEMATIC_SAMPLES`].
    pub fn compute(x: &[f64], y: &[f64], t: &[f64]) -> Option<Self> {
        if t.len() < MIN_KINEMATIC_SAMPLES {
            return None;
        }
        let vx = derivative(x, t);
        let vy = derivative(y, t);
        let ax = derivative(&vx, t);
        let ay = derivative(&vy, t);
        let speed = vx.iter().zip(&vy).map(|(a, b)| a.hypot(*b)).collect();
        let accel = ax.iter().zip(&ay).map(|(a, b)| a.hypot(*b)).collect();
        let (omega, omega_t) = angular_velocity(x, y, t);
        Some(StrokeKinematics { t: t.to_vec(), vx, vy, speed, ax, ay, accel, omega, omega_t })
    }
}

/// Rate of change of the writing direction.
///
/// Directions are taken from consecutive displacements, unwrapped along the
/// stroke, and differentiated between segment midpoints. Zero-length
/// displacements keep the previous direction.
pub fn angular_velocity(x: &[f64], y: &[f64], t: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = t.len();
    if n < 3 {
        return (Vec::new(), Vec::new());
    }
    let raw: Vec<Option<f64>> = (0..n - 1)
        .map(|i| {
            let (dx, dy) = (x[i + 1] - x[i], y[i + 1] - y[i]);
            (dx != 0.0 || dy != 0.0).then(|| dy.atan2(dx))
        })
        .collect();
    let Some(first) = raw.iter().flatten().next().copied() else {
        return (Vec::new(), Vec::new());
    };

    let mut phi = Vec::with_capacity(n - 1);
    let mut last = first;
    for r in &raw {
        let angle = match r {
            Some(a) => last + wrap_pi(a - last),
            None => last,
        };
        phi.push(angle);
        last = angle;
    }
    let mid: Vec<f64> = (0..n - 1).map(|i| 0.5 * (t[i] + t[i + 1])).collect();
    let omega = (0..n - 2).map(|j| (phi[j + 1] - phi[j]) / (mid[j + 1] - mid[j])).collect();
    let omega_t = (0..n - 2).map(|j| t[j + 1]).collect();
    (omega, omega_t)
}

/// Maps an angle difference into `(-pi, pi]`.
fn wrap_pi(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}
