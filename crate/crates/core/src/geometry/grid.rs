use crate::Vec4;

/// Plastic-ratio additive recurrence: root of x^4 = x + 1, the rank-3
/// generalization of the golden ratio. Gives a low-discrepancy sequence in
/// the unit cube.
const PHI3: f64 = 1.220744084605759;

/// Deterministic quasi-uniform directions on S^3.
///
/// A rank-3 additive recurrence fills [0,1)^3 and the measure-preserving
/// Hopf-coordinate map (t, a, b) -> (sqrt(t) e^{2 pi i a}, sqrt(1-t) e^{2 pi i b})
/// pushes it to the round sphere, so the k-th point is a generalized spiral
/// point independent of the requested count.
pub fn directions(n: usize) -> impl Iterator<Item = Vec4> {
    let a1 = 1.0 / PHI3;
    let a2 = 1.0 / (PHI3 * PHI3);
    let a3 = 1.0 / (PHI3 * PHI3 * PHI3);
    (0..n).map(move |k| {
        let kf = (k + 1) as f64;
        let t = (0.5 + kf * a1).fract();
        let phi1 = std::f64::consts::TAU * (0.5 + kf * a2).fract();
        let phi2 = std::f64::consts::TAU * (0.5 + kf * a3).fract();
        let (s1, c1) = phi1.sin_cos();
        let (s2, c2) = phi2.sin_cos();
        let r1 = t.sqrt();
        let r2 = (1.0 - t).sqrt();
        Vec4::new(r1 * c1, r1 * s1, r2 * c2, r2 * s2)
    })
}

/// Orthonormal basis of the tangent space u^perp, deterministic in u.
pub fn tangent_basis(u: &Vec4) -> [Vec4; 3] {
    let mut basis = [Vec4::zeros(); 3];
    let mut found = 0;
    for i in 0..4 {
        if found == 3 {
            break;
        }
        let mut v = Vec4::zeros();
        v[i] = 1.0;
        v -= u * u.dot(&v);
        for b in basis.iter().take(found) {
            v -= b * b.dot(&v);
        }
        let n = v.norm();
        if n > 1e-6 {
            basis[found] = v / n;
            found += 1;
        }
    }
    debug_assert_eq!(found, 3);
    basis
}
