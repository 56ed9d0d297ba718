//! Three-point finite-difference weights on nonuniform grids.

/// Weights `(first, second)` for nodes `x - h_minus, x, x + h_plus`.
///
/// Both rules are exact on quadratics; on smoothly graded grids they are
/// second-order accurate.
pub fn three_point(h_minus: f64, h_plus: f64) -> ([f64; 3], [f64; 3]) {
    let (hm, hp) = (h_minus, h_plus);
    let s = hm + hp;
    let first = [-hp / (hm * s), (hp - hm) / (hm * hp), hm / (hp * s)];
    let second = [2.0 / (hm * s), -2.0 / (hm * hp), 2.0 / (hp * s)];
    (first, second)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_spacing_gives_textbook_weights() {
        let h = 0.1;
        let (d1, d2) = three_point(h, h);
        let scale = h * h;
        assert!((d2[0] * scale - 1.0).abs() < 1e-12);
        assert!((d2[1] * scale + 2.0).abs() < 1e-12);
        assert!((d2[2] * scale - 1.0).abs() < 1e-12);
        assert!((d1[0] * 2.0 * h + 1.0).abs() < 1e-12);
        assert!(d1[1].abs() < 1e-12);
    }

    #[test]
    fn exact_on_quadratics_for_an_irregular_triple() {
        // Deterministic "random" triple.
        let (x0, x1, x2) = (0.137_f64, 0.52, 1.91);
        let (d1, d2) = three_point(x1 - x0, x2 - x1);
        let f = |x: f64| 2.5 * x * x - 1.25 * x + 0.3;
        let v = [f(x0), f(x1), f(x2)];
        let second: f64 = d2.iter().zip(&v).map(|(w, y)| w * y).sum();
        let first: f64 = d1.iter().zip(&v).map(|(w, y)| w * y).sum();
        assert!((second - 5.0).abs() < 1e-12);
        assert!((first - (5.0 * x1 - 1.25)).abs() < 1e-12);
    }
}
