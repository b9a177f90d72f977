//! Small fitting and norm helpers shared by the sweep commands.

use bfloat_core::{Side, State};

/// Least-squares slope of `ln y` against `ln x` over the points with finite,
/// positive coordinates; `None` with fewer than two such points.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| x.is_finite() && y.is_finite() && *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// `L^2` distance of `(theta, q)` over nodes with `|x|_R > cut`, both sides.
pub fn l2_away_from_layer(a: &State, b: &State, cut: f64) -> f64 {
    let g = a.grid();
    let mut acc = 0.0;
    for side in Side::BOTH {
        for i in 0..g.n_per_side {
            if g.s(side, i) <= cut {
                continue;
            }
            let dt = a.theta.side(side)[i] - b.theta.side(side)[i];
            let dq = a.q.side(side)[i] - b.q.side(side)[i];
            acc += dt * dt + dq * dq;
        }
    }
    (acc * g.dx).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use bfloat_core::{ExteriorField, GridSpec};

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [0.4, 0.2, 0.1, 0.05].iter().map(|&d| (d, 3.0 * d * d * d)).collect();
        assert!((fit_slope(&pts).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(fit_slope(&[(0.1, 1.0), (0.2, f64::NAN)]), None);
        assert_eq!(fit_slope(&[(0.1, 0.0), (0.2, 0.0)]), None);
    }

    #[test]
    fn l2_skips_the_layer_band() {
        let g = GridSpec::with_spacing(1.0, 3.0, 0.01).unwrap();
        let a = State::rest(g);
        let mut b = State::rest(g);
        b.theta = ExteriorField::from_distance(g, |_, s| if s <= 0.5 { 1.0 } else { 0.0 });
        assert_eq!(l2_away_from_layer(&a, &b, 0.5), 0.0);
        b.q = ExteriorField::constant(g, 1.0);
        let expect = (2.0 * (g.n_per_side as f64 - 51.0) * g.dx).sqrt();
        assert!((l2_away_from_layer(&a, &b, 0.5) - expect).abs() < 1e-12);
    }
}
