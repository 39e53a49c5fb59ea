//! Fixed quadrature rules on triangles and segments.

use crate::geometry::Point;

/// Degree-5 seven-point rule on a triangle, as barycentric coordinates and
/// weights summing to one.
pub const TRIANGLE_7: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_770;
    const B1: f64 = 0.470_142_064_105_115;
    const A2: f64 = 0.797_426_985_353_087;
    const B2: f64 = 0.101_286_507_323_456;
    const W0: f64 = 0.225;
    const W1: f64 = 0.132_394_152_788_506;
    const W2: f64 = 0.125_939_180_544_827;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], W0),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// Two-point Gauss-Legendre rule on `[0, 1]`.
pub const SEGMENT_GAUSS_2: [(f64, f64); 2] = [
    (0.211_324_865_405_187_1, 0.5),
    (0.788_675_134_594_812_9, 0.5),
];

/// `∫_T e^{w}` where `w` is linear with vertex values `w`, over a triangle of area `area`.
pub fn triangle_exp_integral(area: f64, w: [f64; 3]) -> f64 {
    let mut s = 0.0;
    for (b, wt) in TRIANGLE_7 {
        s += wt * (b[0] * w[0] + b[1] * w[1] + b[2] * w[2]).exp();
    }
    area * s
}

/// `∫_e e^{w/2} dσ` along a segment with linear `w`.
pub fn segment_half_exp_integral(a: Point, b: Point, wa: f64, wb: f64) -> f64 {
    let len = a.dist(b);
    let mut s = 0.0;
    for (x, wt) in SEGMENT_GAUSS_2 {
        s += wt * (0.5 * (wa + x * (wb - wa))).exp();
    }
    len * s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_point_rule_is_exact_for_quintics() {
        // ∫_T λ1^a λ2^b λ3^c = 2|T| a! b! c! / (a+b+c+2)!
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        for (a, b, c) in [(0, 0, 0), (2, 1, 0), (3, 1, 1), (5, 0, 0), (2, 2, 1)] {
            let exact = 2.0 * fact(a) * fact(b) * fact(c) / fact(a + b + c + 2);
            let q: f64 = TRIANGLE_7
                .iter()
                .map(|(l, w)| w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32))
                .sum();
            assert!((q - exact).abs() < 1e-12, "{a}{b}{c}: {q} vs {exact}");
        }
    }

    #[test]
    fn exp_integral_of_constant() {
        assert!((triangle_exp_integral(0.5, [0.3; 3]) - 0.5 * 0.3f64.exp()).abs() < 1e-15);
    }
}
