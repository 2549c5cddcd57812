use crate::error::{Error, Result};
use crate::geometry::trig::TrigPolynomial;
use crate::{Mat4, Vec4};
use serde::{Deserialize, Serialize};

/// Closed halfspace {x : <normal, x> <= offset} with unit normal and the
/// origin in its interior (offset > 0).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Halfspace {
    #[serde(with = "crate::serde_util::vec4")]
    pub normal: Vec4,
    pub offset: f64,
}

impl Halfspace {
    /// Normalizes the normal, rescaling the offset so the halfspace is
    /// unchanged.
    pub fn new(normal: Vec4, offset: f64) -> Result<Self> {
        let n = normal.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::spec("halfspace normal must be nonzero"));
        }
        let hs = Halfspace { normal: normal / n, offset: offset / n };
        hs.validate()?;
        Ok(hs)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.offset.is_finite() || self.offset <= 0.0 {
            return Err(Error::spec(format!(
                "halfspace offset must be positive, got {}",
                self.offset
            )));
        }
        if (self.normal.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::spec(format!(
                "halfspace normal must be unit length (|n| = {:.17e})",
                self.normal.norm()
            )));
        }
        Ok(())
    }

    /// Support slack (a.x)/b, nonnegative inside scaled copies of the body.
    pub fn scaled_height(&self, x: &Vec4) -> f64 {
        self.normal.dot(x) / self.offset
    }

    /// The 8 facets of the unit cube [-1,1]^4.
    pub fn cube() -> Vec<Halfspace> {
        let mut hs = Vec::with_capacity(8);
        for i in 0..4 {
            for s in [1.0, -1.0] {
                let mut n = Vec4::zeros();
                n[i] = s;
                hs.push(Halfspace { normal: n, offset: 1.0 });
            }
        }
        hs
    }
}

/// Every halfspace has a mirror partner (-normal, same offset). Exact float
/// match: a miss merely falls back to the stricter sharpness rule.
fn negation_symmetric(halfspaces: &[Halfspace]) -> bool {
    halfspaces
        .iter()
        .all(|a| halfspaces.iter().any(|b| b.normal == -a.normal && b.offset == a.offset))
}

/// How a polytope gets replaced by a nearby smooth starshaped body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingScheme {
    /// G(x) = (sum_i ((a_i.x)/b_i)_+^p)^(1/p); sharpness p must be an even
    /// integer >= 4 so that t -> (t_+)^p is C^3.
    #[serde(rename = "pnorm")]
    PNorm,
    /// G(x) = beta^-1 log( (1/m) sum_i exp(beta (a_i.x)/b_i) ); converges to
    /// the polytope gauge uniformly with error <= log(m)/beta.
    LogSumExp,
}

/// Defining function G of a starshaped hypersurface {G = 1} in R^4.
#[derive(Debug, Clone, PartialEq)]
pub enum BodySpec {
    /// G(x) = |x1|^p + |y1|^p + |x2|^p + |y2|^p, p even >= 2.
    PNormCube { p: u32 },
    /// Smooth replacement of the polytope cut out by `halfspaces`.
    SmoothedPolytope {
        halfspaces: Vec<Halfspace>,
        scheme: SmoothingScheme,
        sharpness: f64,
    },
    /// Radial graph over a base surface: the level set is the image of the
    /// base under m -> e^(f(m)/2) m, f evaluated on directions.
    RadialGraph { base: Box<BodySpec>, perturbation: TrigPolynomial },
    /// G(x) = x^T A x with A symmetric positive definite.
    Quadric { matrix: Mat4 },
}

impl BodySpec {
    pub fn pnorm_cube(p: u32) -> Result<Self> {
        let b = BodySpec::PNormCube { p };
        b.validate()?;
        Ok(b)
    }

    pub fn smoothed_polytope(
        halfspaces: Vec<Halfspace>,
        scheme: SmoothingScheme,
        sharpness: f64,
    ) -> Result<Self> {
        let b = BodySpec::SmoothedPolytope { halfspaces, scheme, sharpness };
        b.validate()?;
        Ok(b)
    }

    pub fn radial_graph(base: BodySpec, perturbation: TrigPolynomial) -> Result<Self> {
        let b = BodySpec::RadialGraph { base: Box::new(base), perturbation };
        b.validate()?;
        Ok(b)
    }

    pub fn quadric(matrix: Mat4) -> Result<Self> {
        let b = BodySpec::Quadric { matrix };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BodySpec::PNormCube { p } => {
                if *p < 2 || *p % 2 != 0 {
                    return Err(Error::spec(format!(
                        "pnorm_cube exponent must be an even integer >= 2, got {p}"
                    )));
                }
            }
            BodySpec::SmoothedPolytope { halfspaces, scheme, sharpness } => {
                if halfspaces.is_empty() {
                    return Err(Error::spec("smoothed polytope needs at least one halfspace"));
                }
                for hs in halfspaces {
                    hs.validate()?;
                }
                match scheme {
                    SmoothingScheme::PNorm => {
                        let even_at_least = |lo: f64| {
                            sharpness.is_finite()
                                && sharpness.fract() == 0.0
                                && *sharpness >= lo
                                && (*sharpness as u64) % 2 == 0
                        };
                        // When every halfspace comes with its mirror, positive
                        // parts pair into (t+)^p + ((-t)+)^p = |t|^p and the sum
                        // is a polynomial, so C^3 holds down to p = 2; without
                        // the symmetry p >= 4 is needed for C^3 of (t+)^p.
                        let ok = even_at_least(4.0)
                            || (even_at_least(2.0) && negation_symmetric(halfspaces));
                        if !ok {
                            return Err(Error::spec(format!(
                                "p-norm sharpness must be an even integer >= 4 \
                                 (>= 2 when every halfspace is paired with its \
                                 mirror image), got {sharpness}"
                            )));
                        }
                    }
                    SmoothingScheme::LogSumExp => {
                        if !sharpness.is_finite() || *sharpness <= 0.0 {
                            return Err(Error::spec(format!(
                                "log-sum-exp sharpness must be positive, got {sharpness}"
                            )));
                        }
                    }
                }
            }
            BodySpec::RadialGraph { base, perturbation } => {
                base.validate()?;
                perturbation.validate()?;
            }
            BodySpec::Quadric { matrix } => {
                let asym = (matrix - matrix.transpose()).norm();
                if asym > 1e-12 * matrix.norm().max(1.0) {
                    return Err(Error::spec("quadric matrix must be symmetric"));
                }
                if nalgebra::Cholesky::new(*matrix).is_none() {
                    return Err(Error::spec("quadric matrix must be positive definite"));
                }
            }
        }
        Ok(())
    }

    /// Positive homogeneity degree k with G(t x) = t^k G(x) for t > 0, when
    /// the variant has one (log-sum-exp does not).
    pub fn homogeneity(&self) -> Option<f64> {
        match self {
            BodySpec::PNormCube { p } => Some(*p as f64),
            BodySpec::SmoothedPolytope { scheme, .. } => match scheme {
                SmoothingScheme::PNorm => Some(1.0),
                SmoothingScheme::LogSumExp => None,
            },
            BodySpec::RadialGraph { base, .. } => base.homogeneity(),
            BodySpec::Quadric { .. } => Some(2.0),
        }
    }

    /// G(x).
    pub fn value(&self, x: &Vec4) -> Result<f64> {
        match self {
            BodySpec::PNormCube { p } => {
                let p = *p as i32;
                Ok(x.iter().map(|c| c.powi(p)).sum())
            }
            BodySpec::SmoothedPolytope { halfspaces, scheme, sharpness } => match scheme {
                SmoothingScheme::PNorm => {
                    let p = *sharpness as i32;
                    let s: f64 = halfspaces
                        .iter()
                        .map(|hs| hs.scaled_height(x).max(0.0).powi(p))
                        .sum();
                    Ok(s.powf(1.0 / *sharpness))
                }
                SmoothingScheme::LogSumExp => {
                    let beta = *sharpness;
                    let heights: Vec<f64> =
                        halfspaces.iter().map(|hs| hs.scaled_height(x)).collect();
                    let top = heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let sum: f64 = heights.iter().map(|s| (beta * (s - top)).exp()).sum();
                    Ok(top + (sum.ln() - (heights.len() as f64).ln()) / beta)
                }
            },
            BodySpec::RadialGraph { base, perturbation } => {
                let s = (-0.5 * perturbation.eval_ambient(x)?).exp();
                base.value(&(x * s))
            }
            BodySpec::Quadric { matrix } => Ok((x.transpose() * matrix * x)[0]),
        }
    }

    /// grad G(x). Errors at non-smooth points (p-norm smoothing with all
    /// heights nonpositive, or the origin for direction-dependent variants).
    pub fn gradient(&self, x: &Vec4) -> Result<Vec4> {
        match self {
            BodySpec::PNormCube { p } => {
                let p = *p as i32;
                Ok(Vec4::from_fn(|i, _| (p as f64) * x[i].powi(p - 1)))
            }
            BodySpec::SmoothedPolytope { halfspaces, scheme, sharpness } => match scheme {
                SmoothingScheme::PNorm => {
                    let p = *sharpness;
                    let pi = p as i32;
                    let mut s = 0.0;
                    let mut ds = Vec4::zeros();
                    for hs in halfspaces {
                        let h = hs.scaled_height(x).max(0.0);
                        s += h.powi(pi);
                        ds += hs.normal * (p * h.powi(pi - 1) / hs.offset);
                    }
                    if s <= 0.0 {
                        return Err(Error::domain(
                            "p-norm smoothing is non-smooth where every height vanishes",
                        ));
                    }
                    Ok(ds * (s.powf(1.0 / p - 1.0) / p))
                }
                SmoothingScheme::LogSumExp => Ok(Self::lse_weighted(halfspaces, *sharpness, x).0),
            },
            BodySpec::RadialGraph { base, perturbation } => {
                let phi_grad = perturbation.grad_ambient(x)?;
                let s = (-0.5 * perturbation.eval_ambient(x)?).exp();
                let y = x * s;
                let gb = base.gradient(&y)?;
                Ok((gb - phi_grad * (0.5 * x.dot(&gb))) * s)
            }
            BodySpec::Quadric { matrix } => Ok(matrix * x * 2.0),
        }
    }

    /// hess G(x), symmetric.
    pub fn hessian(&self, x: &Vec4) -> Result<Mat4> {
        match self {
            BodySpec::PNormCube { p } => {
                let p = *p as i32;
                let c = (p * (p - 1)) as f64;
                Ok(Mat4::from_diagonal(&Vec4::from_fn(|i, _| c * x[i].powi(p - 2))))
            }
            BodySpec::SmoothedPolytope { halfspaces, scheme, sharpness } => match scheme {
                SmoothingScheme::PNorm => {
                    let p = *sharpness;
                    let pi = p as i32;
                    let mut s = 0.0;
                    let mut ds = Vec4::zeros();
                    let mut d2s = Mat4::zeros();
                    for hs in halfspaces {
                        let t = hs.scaled_height(x);
                        let h = t.max(0.0);
                        let c = hs.normal / hs.offset;
                        s += h.powi(pi);
                        ds += c * (p * h.powi(pi - 1));
                        // pi = 2 needs h^0 = [t > 0], with 1/2 on the crease so
                        // a mirror pair sums to the exact Hessian of |t|^2;
                        // powi would put 0^0 = 1 there and double it.
                        let h2 = if pi == 2 {
                            if t > 0.0 {
                                1.0
                            } else if t == 0.0 {
                                0.5
                            } else {
                                0.0
                            }
                        } else {
                            h.powi(pi - 2)
                        };
                        d2s += c * c.transpose() * (p * (p - 1.0) * h2);
                    }
                    if s <= 0.0 {
                        return Err(Error::domain(
                            "p-norm smoothing is non-smooth where every height vanishes",
                        ));
                    }
                    let a = s.powf(1.0 / p - 2.0) * (1.0 / p) * (1.0 / p - 1.0);
                    let b = s.powf(1.0 / p - 1.0) / p;
                    Ok(ds * ds.transpose() * a + d2s * b)
                }
                SmoothingScheme::LogSumExp => {
                    let beta = *sharpness;
                    let (mean, second) = {
                        let (g, m2) = Self::lse_weighted(halfspaces, beta, x);
                        (g, m2)
                    };
                    Ok((second - mean * mean.transpose()) * beta)
                }
            },
            BodySpec::RadialGraph { base, perturbation } => {
                let phi_grad = perturbation.grad_ambient(x)?;
                let phi_hess = perturbation.hess_ambient(x)?;
                let s = (-0.5 * perturbation.eval_ambient(x)?).exp();
                let y = x * s;
                let gb = base.gradient(&y)?;
                let hb = base.hessian(&y)?;
                let grad_s = phi_grad * (-0.5 * s);
                let hess_s =
                    phi_grad * phi_grad.transpose() * (0.25 * s) - phi_hess * (0.5 * s);
                let jy = (Mat4::identity() - x * phi_grad.transpose() * 0.5) * s;
                let bending = gb * grad_s.transpose()
                    + grad_s * gb.transpose()
                    + hess_s * gb.dot(x);
                Ok(jy.transpose() * hb * jy + bending)
            }
            BodySpec::Quadric { matrix } => Ok(matrix * 2.0),
        }
    }

    /// Softmax-weighted mean of facet covectors and their second moment.
    fn lse_weighted(halfspaces: &[Halfspace], beta: f64, x: &Vec4) -> (Vec4, Mat4) {
        let heights: Vec<f64> = halfspaces.iter().map(|hs| hs.scaled_height(x)).collect();
        let top = heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        let mut mean = Vec4::zeros();
        let mut second = Mat4::zeros();
        for (hs, h) in halfspaces.iter().zip(&heights) {
            let w = (beta * (h - top)).exp();
            let c = hs.normal / hs.offset;
            z += w;
            mean += c * w;
            second += c * c.transpose() * w;
        }
        (mean / z, second / z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;

    fn finite_diff_check(body: &BodySpec, x: &Vec4, tol_g: f64, tol_h: f64) {
        let h = 1e-5;
        let g = body.gradient(x).unwrap();
        for i in 0..4 {
            let mut xp = *x;
            let mut xm = *x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (body.value(&xp).unwrap() - body.value(&xm).unwrap()) / (2.0 * h);
            let scale = g[i].abs().max(1.0);
            assert!(
                (g[i] - fd).abs() <= tol_g * scale,
                "grad[{i}] {} vs fd {}",
                g[i],
                fd
            );
        }
        let hess = body.hessian(x).unwrap();
        for j in 0..4 {
            let mut xp = *x;
            let mut xm = *x;
            xp[j] += h;
            xm[j] -= h;
            let col = (body.gradient(&xp).unwrap() - body.gradient(&xm).unwrap()) / (2.0 * h);
            for i in 0..4 {
                let scale = hess[(i, j)].abs().max(1.0);
                assert!(
                    (hess[(i, j)] - col[i]).abs() <= tol_h * scale,
                    "hess[({i},{j})] {} vs fd {}",
                    hess[(i, j)],
                    col[i]
                );
            }
        }
    }

    fn sample_bodies() -> Vec<BodySpec> {
        vec![
            BodySpec::pnorm_cube(2).unwrap(),
            BodySpec::pnorm_cube(8).unwrap(),
            BodySpec::smoothed_polytope(Halfspace::cube(), SmoothingScheme::PNorm, 6.0).unwrap(),
            BodySpec::smoothed_polytope(Halfspace::cube(), SmoothingScheme::LogSumExp, 9.0)
                .unwrap(),
            BodySpec::quadric(Mat4::from_diagonal(&Vec4::new(1.0, 1.0, 4.0, 4.0))).unwrap(),
            BodySpec::radial_graph(
                BodySpec::quadric(Mat4::from_diagonal(&Vec4::new(1.0, 1.0, 2.0, 2.0))).unwrap(),
                TrigPolynomial::new(vec![crate::geometry::TrigTerm {
                    coefficient: 0.1,
                    frequency: [1, 0, 2, 0],
                    phase: 0.3,
                }])
                .unwrap(),
            )
            .unwrap(),
        ]
    }

    #[test]
    fn pnorm_cube_value_matches_power_sum() {
        let b = BodySpec::pnorm_cube(4).unwrap();
        let x = Vec4::new(0.5, 0.5, 0.5, 0.5);
        assert!((b.value(&x).unwrap() - 0.25).abs() < 1e-15);
        let b2 = BodySpec::pnorm_cube(2).unwrap();
        let x = Vec4::new(0.3, -0.7, 0.2, 0.1);
        assert!((b2.value(&x).unwrap() - x.norm_squared()).abs() < 1e-15);
    }

    #[test]
    fn smoothed_cube_pnorm_equals_power_mean() {
        let b =
            BodySpec::smoothed_polytope(Halfspace::cube(), SmoothingScheme::PNorm, 8.0).unwrap();
        let cube = BodySpec::pnorm_cube(8).unwrap();
        let mut rng = sampling::rng(3);
        for _ in 0..100 {
            let x = sampling::unit_direction(&mut rng) * 1.7;
            let lhs = b.value(&x).unwrap();
            let rhs = cube.value(&x).unwrap().powf(1.0 / 8.0);
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn quadratic_smoothed_cube_is_the_euclidean_norm() {
        let b =
            BodySpec::smoothed_polytope(Halfspace::cube(), SmoothingScheme::PNorm, 2.0).unwrap();
        let mut rng = sampling::rng(11);
        for _ in 0..100 {
            let x = sampling::unit_direction(&mut rng) * 1.3;
            assert!((b.value(&x).unwrap() - x.norm()).abs() < 1e-14);
        }
        // On a crease (three coordinates exactly zero) the Hessian must still
        // be the exact Hessian of |x|: (I - u u^T)/|x|.
        let e1 = Vec4::new(1.0, 0.0, 0.0, 0.0);
        let hess = b.hessian(&e1).unwrap();
        let expected = Mat4::from_diagonal(&Vec4::new(0.0, 1.0, 1.0, 1.0));
        assert!((hess - expected).norm() < 1e-14, "hessian {hess}");
        finite_diff_check(&b, &Vec4::new(0.6, 0.3, -0.2, 0.7), 1e-6, 1e-5);
    }

    #[test]
    fn log_sum_exp_error_bound_is_uniform() {
        for beta in [4.0, 16.0, 64.0] {
            let b = BodySpec::smoothed_polytope(
                Halfspace::cube(),
                SmoothingScheme::LogSumExp,
                beta,
            )
            .unwrap();
            let bound = (8.0f64).ln() / beta;
            let mut rng = sampling::rng(4);
            for _ in 0..1000 {
                let x = sampling::unit_direction(&mut rng) * 1.3;
                let gauge = (0..4).map(|i| x[i].abs()).fold(0.0, f64::max);
                let err = (b.value(&x).unwrap() - gauge).abs();
                assert!(err <= bound + 1e-12, "beta {beta}: err {err} > {bound}");
            }
        }
    }

    #[test]
    fn quadric_axis_values() {
        let b =
            BodySpec::quadric(Mat4::from_diagonal(&Vec4::new(1.0, 1.0, 4.0, 4.0))).unwrap();
        assert!((b.value(&Vec4::new(0.0, 0.0, 0.5, 0.0)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn radial_graph_with_zero_perturbation_is_base() {
        let base = BodySpec::pnorm_cube(4).unwrap();
        let g = BodySpec::radial_graph(base.clone(), TrigPolynomial::default()).unwrap();
        let mut rng = sampling::rng(9);
        for _ in 0..100 {
            let x = sampling::unit_direction(&mut rng) * 0.9;
            assert!((g.value(&x).unwrap() - base.value(&x).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn gradients_and_hessians_match_finite_differences() {
        let mut rng = sampling::rng(17);
        for body in sample_bodies() {
            for _ in 0..25 {
                let x = sampling::unit_direction(&mut rng) * 1.1;
                finite_diff_check(&body, &x, 1e-6, 1e-5);
            }
        }
    }

    #[test]
    fn euler_identity_holds_for_homogeneous_variants() {
        let mut rng = sampling::rng(23);
        for body in sample_bodies() {
            let Some(k) = body.homogeneity() else { continue };
            for _ in 0..200 {
                let x = sampling::unit_direction(&mut rng) * 1.4;
                let lhs = body.gradient(&x).unwrap().dot(&x);
                let rhs = k * body.value(&x).unwrap();
                assert!(
                    (lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0),
                    "euler identity: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn radial_graph_rejects_origin() {
        let g = BodySpec::radial_graph(
            BodySpec::pnorm_cube(2).unwrap(),
            TrigPolynomial::new(vec![crate::geometry::TrigTerm {
                coefficient: 0.1,
                frequency: [1, 0, 0, 0],
                phase: 0.0,
            }])
            .unwrap(),
        )
        .unwrap();
        assert!(matches!(g.value(&Vec4::zeros()), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(BodySpec::pnorm_cube(3).is_err());
        assert!(BodySpec::pnorm_cube(0).is_err());
        // p = 2 is only smooth when positive parts pair into powers of |t|:
        // fine for the mirror-symmetric cube, rejected once a facet is alone.
        assert!(
            BodySpec::smoothed_polytope(Halfspace::cube(), SmoothingScheme::PNorm, 2.0).is_ok()
        );
        let lopsided: Vec<Halfspace> = Halfspace::cube().into_iter().skip(1).collect();
        assert!(BodySpec::smoothed_polytope(lopsided, SmoothingScheme::PNorm, 2.0).is_err());
        assert!(
            BodySpec::smoothed_polytope(Halfspace::cube(), SmoothingScheme::PNorm, 5.0).is_err()
        );
        assert!(BodySpec::smoothed_polytope(
            Halfspace::cube(),
            SmoothingScheme::LogSumExp,
            -1.0
        )
        .is_err());
        assert!(BodySpec::quadric(Mat4::from_diagonal(&Vec4::new(1.0, 1.0, -1.0, 1.0))).is_err());
        let mut asym = Mat4::identity();
        asym[(0, 1)] = 0.5;
        assert!(BodySpec::quadric(asym).is_err());
        assert!(Halfspace::new(Vec4::zeros(), 1.0).is_err());
        assert!(Halfspace::new(Vec4::new(1.0, 0.0, 0.0, 0.0), -2.0).is_err());
    }

    #[test]
    fn pnorm_gradient_errors_where_all_heights_vanish() {
        // A single halfspace leaves the opposite cone flat.
        let hs = vec![Halfspace::new(Vec4::new(1.0, 0.0, 0.0, 0.0), 1.0).unwrap()];
        let b = BodySpec::smoothed_polytope(hs, SmoothingScheme::PNorm, 4.0).unwrap();
        let x = Vec4::new(-1.0, 0.0, 0.0, 0.0);
        assert!(matches!(b.gradient(&x), Err(Error::Domain(_))));
    }
}
