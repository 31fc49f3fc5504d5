//! Scalar quality metrics for reconstructed parameter maps.
//!
//! The edge response width measures how sharply a reconstruction
//! renders a material interface: along the horizontal line through an
//! inclusion's center, the distance between the 10% and 90% points of
//! the rise from the background value to the inclusion value. Noisy
//! profiles are reduced to their best nondecreasing fit first, so
//! isolated spikes widen the measured transition instead of faking a
//! sharp one.

use elastoscope_core::material::MaterialMap;
use elastoscope_core::phantom::{Inclusion, Phantom};

/// Least-squares projection onto nondecreasing sequences, pool adjacent
/// violators with uniform weights.
pub fn isotonic_non_decreasing(values: &[f64]) -> Vec<f64> {
    let mut level: Vec<f64> = Vec::with_capacity(values.len());
    let mut count: Vec<usize> = Vec::with_capacity(values.len());
    for &v in values {
        level.push(v);
        count.push(1);
        while level.len() >= 2 && level[level.len() - 2] > level[level.len() - 1] {
            let l_top = level.pop().expect("nonempty");
            let c_top = count.pop().expect("nonempty");
            let last = level.len() - 1;
            let c_new = count[last] + c_top;
            level[last] =
                (level[last] * count[last] as f64 + l_top * c_top as f64) / c_new as f64;
            count[last] = c_new;
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (l, c) in level.into_iter().zip(count) {
        out.extend(std::iter::repeat(l).take(c));
    }
    out
}

/// Position where the piecewise-linear interpolant of `(xs, ys)` first
/// reaches `target`, scanning left to right.
fn first_crossing(xs: &[f64], ys: &[f64], target: f64) -> Option<f64> {
    if ys[0] >= target {
        return Some(xs[0]);
    }
    for k in 1..ys.len() {
        if ys[k] >= target {
            let t = (target - ys[k - 1]) / (ys[k] - ys[k - 1]);
            return Some(xs[k - 1] + t * (xs[k] - xs[k - 1]));
        }
    }
    None
}

/// Width of the 10% to 90% rise of a profile climbing from `base` to
/// `top` over the sampled window. Profiles that never complete the rise
/// score the whole window span.
pub fn rise_width(xs: &[f64], profile: &[f64], base: f64, top: f64) -> f64 {
    assert_eq!(xs.len(), profile.len(), "profile and positions disagree");
    assert!(xs.len() >= 2, "need at least two samples");
    let normalized: Vec<f64> = profile.iter().map(|&p| (p - base) / (top - base)).collect();
    let fit = isotonic_non_decreasing(&normalized);
    let span = xs[xs.len() - 1] - xs[0];
    let Some(x90) = first_crossing(xs, &fit, 0.9) else {
        return span;
    };
    let x10 = first_crossing(xs, &fit, 0.1).expect("0.1 crossed before 0.9");
    (x90 - x10).max(0.0)
}

/// Edge response width of the modulus map across the first inclusion's
/// left boundary, in physical units. Returns `None` when the phantom
/// has no inclusion or the profile window does not fit the grid.
pub fn edge_response_width(map: &MaterialMap, phantom: &Phantom) -> Option<f64> {
    let inc = phantom.inclusions.first()?;
    let (center, rx, factor) = match inc {
        Inclusion::Circle { center, radius, mu_factor, .. } => (*center, *radius, *mu_factor),
        Inclusion::Ellipse { center, semi_axes, mu_factor, .. } => {
            (*center, semi_axes[0], *mu_factor)
        }
    };
    let grid = map.grid;
    let edge_x = center[0] - rx;
    let half = 1.25f64.min(rx).min(edge_x - 2.0 * grid.hx());
    if !(half > 0.0) {
        return None;
    }
    let j = (center[1] / grid.hy()).round() as usize;
    if j >= grid.ny {
        return None;
    }
    let mut xs = Vec::new();
    let mut profile = Vec::new();
    for i in 0..grid.nx {
        let x = i as f64 * grid.hx();
        if x >= edge_x - half && x <= edge_x + half {
            xs.push(x);
            profile.push(map.mu()[grid.idx(i, j)]);
        }
    }
    if xs.len() < 4 {
        return None;
    }
    Some(rise_width(&xs, &profile, phantom.mu0, factor * phantom.mu0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotonic_fit_is_nondecreasing_and_mean_preserving() {
        let v = [3.0, 1.0, 2.0, 5.0, 4.0, 4.5, 0.5, 6.0];
        let fit = isotonic_non_decreasing(&v);
        for w in fit.windows(2) {
            assert!(w[0] <= w[1] + 1e-12);
        }
        let mean_in: f64 = v.iter().sum::<f64>() / v.len() as f64;
        let mean_out: f64 = fit.iter().sum::<f64>() / fit.len() as f64;
        assert!((mean_in - mean_out).abs() < 1e-12);
    }

    #[test]
    fn isotonic_fit_keeps_sorted_input() {
        let v = [1.0, 2.0, 2.0, 3.5, 7.0];
        assert_eq!(isotonic_non_decreasing(&v), v);
    }

    #[test]
    fn sharp_step_has_narrow_rise() {
        let xs: Vec<f64> = (0..21).map(|k| k as f64 * 0.1).collect();
        let step: Vec<f64> = xs.iter().map(|&x| if x < 1.0 { 0.0 } else { 1.0 }).collect();
        let w = rise_width(&xs, &step, 0.0, 1.0);
        assert!(w <= 0.1 + 1e-12, "step width {w}");
    }

    #[test]
    fn linear_ramp_width_matches_slope() {
        let xs: Vec<f64> = (0..41).map(|k| k as f64 * 0.1).collect();
        let ramp: Vec<f64> =
            xs.iter().map(|&x| ((x - 1.0) / 2.0).clamp(0.0, 1.0)).collect();
        let w = rise_width(&xs, &ramp, 0.0, 1.0);
        assert!((w - 1.6).abs() < 0.05, "ramp width {w}");
    }

    #[test]
    fn spiky_profile_scores_wider_than_clean_step() {
        let xs: Vec<f64> = (0..21).map(|k| k as f64 * 0.1).collect();
        let clean: Vec<f64> = xs.iter().map(|&x| if x < 1.0 { 0.0 } else { 1.0 }).collect();
        let mut spiky = clean.clone();
        spiky[3] = 1.8;
        spiky[12] = 0.05;
        let w_clean = rise_width(&xs, &clean, 0.0, 1.0);
        let w_spiky = rise_width(&xs, &spiky, 0.0, 1.0);
        assert!(w_spiky > w_clean, "spiky {w_spiky} vs clean {w_clean}");
    }

    #[test]
    fn flat_profile_scores_the_window() {
        let xs: Vec<f64> = (0..11).map(|k| k as f64).collect();
        let flat = vec![0.0; 11];
        assert_eq!(rise_width(&xs, &flat, 0.0, 1.0), 10.0);
    }
}
