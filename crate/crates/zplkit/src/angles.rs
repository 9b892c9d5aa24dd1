//! Internal helpers for polarization-axis angles.
//!
//! Dipole orientations are axes, not vectors: θ and θ + 180° are the same
//! physical state, so every stored angle is reduced to [0°, 180°).

/// Reduce an angle to the axis range [0, 180).
pub(crate) fn reduce_axis_deg(theta_deg: f64) -> f64 {
    let r = theta_deg.rem_euclid(180.0);
    // rem_euclid can return exactly 180.0 when theta is a tiny negative
    // number, e.g. -1e-15 % 180 rounds up.
    if r >= 180.0 {
        0.0
    } else {
        r
    }
}

/// Signed axis difference a − b folded to (−90, 90].
pub(crate) fn signed_axis_difference_deg(a_deg: f64, b_deg: f64) -> f64 {
    let mut d = (a_deg - b_deg).rem_euclid(180.0);
    if d > 90.0 {
        d -= 180.0;
    }
    d
}

/// Circular mean of axes with weights, via the doubled-angle embedding.
///
/// Returns the axis in [0, 180) that the weighted unit vectors at 2θ point
/// to, or `None` when the resultant vanishes (perfectly balanced axes).
/// Test oracle for the mixed-mechanism generator.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn weighted_axis_mean_deg(axes_deg: &[f64], weights: &[f64]) -> Option<f64> {
    let mut x = 0.0;
    let mut y = 0.0;
    for (&t, &w) in axes_deg.iter().zip(weights) {
        let two_theta = 2.0 * t.to_radians();
        x += w * two_theta.cos();
        y += w * two_theta.sin();
    }
    if x.hypot(y) < 1e-12 {
        return None;
    }
    Some(reduce_axis_deg(0.5 * y.atan2(x).to_degrees()))
}
