use crate::error::{Error, Result};
use crate::{Mat4, Vec4};
use serde::{Deserialize, Serialize};

fn default_phase() -> f64 {
    0.0
}

/// One term c * cos(<m, u> + phase) with integer frequency vector m.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub coefficient: f64,
    pub frequency: [i32; 4],
    #[serde(default = "default_phase", skip_serializing_if = "is_zero")]
    pub phase: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

/// Finite trigonometric sum evaluated on unit directions u in S^3.
///
/// Ambient evaluation composes with x -> x/|x|, so the induced function on
/// R^4 \ {0} is 0-homogeneous and smooth with closed-form derivatives.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct TrigPolynomial {
    pub terms: Vec<TrigTerm>,
}

impl TrigPolynomial {
    pub fn new(terms: Vec<TrigTerm>) -> Result<Self> {
        for t in &terms {
            if !t.coefficient.is_finite() || !t.phase.is_finite() {
                return Err(Error::spec("trig term with non-finite coefficient or phase"));
            }
        }
        Ok(TrigPolynomial { terms })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.terms.clone()).map(|_| ())
    }

    /// Upper bound sum |c_k| for the sup norm on the sphere.
    pub fn amplitude_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.abs()).sum()
    }

    fn freq(t: &TrigTerm) -> Vec4 {
        Vec4::new(
            t.frequency[0] as f64,
            t.frequency[1] as f64,
            t.frequency[2] as f64,
            t.frequency[3] as f64,
        )
    }

    /// Value at a unit direction.
    pub fn eval_dir(&self, u: &Vec4) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient * (Self::freq(t).dot(u) + t.phase).cos())
            .sum()
    }

    /// Gradient w.r.t. the direction argument (not yet projected to TS^3).
    pub fn grad_dir(&self, u: &Vec4) -> Vec4 {
        let mut g = Vec4::zeros();
        for t in &self.terms {
            let m = Self::freq(t);
            g -= m * (t.coefficient * (m.dot(u) + t.phase).sin());
        }
        g
    }

    pub fn hess_dir(&self, u: &Vec4) -> Mat4 {
        let mut h = Mat4::zeros();
        for t in &self.terms {
            let m = Self::freq(t);
            let c = -t.coefficient * (m.dot(u) + t.phase).cos();
            h += (m * m.transpose()) * c;
        }
        h
    }

    /// Value of the 0-homogeneous extension x -> f(x/|x|).
    pub fn eval_ambient(&self, x: &Vec4) -> Result<f64> {
        let r = x.norm();
        if r < 1e-14 {
            return Err(Error::domain("direction function undefined at the origin"));
        }
        Ok(self.eval_dir(&(x / r)))
    }

    /// Gradient of the 0-homogeneous extension.
    pub fn grad_ambient(&self, x: &Vec4) -> Result<Vec4> {
        let r = x.norm();
        if r < 1e-14 {
            return Err(Error::domain("direction function undefined at the origin"));
        }
        let u = x / r;
        let g = self.grad_dir(&u);
        Ok((g - u * u.dot(&g)) / r)
    }

    /// Hessian of the 0-homogeneous extension.
    ///
    /// With u = x/r, J = (I - u u^T)/r and g = grad_dir(u):
    ///   hess = J hess_dir J + [3(g.u) u u^T - g u^T - u g^T - (g.u) I] / r^2.
    pub fn hess_ambient(&self, x: &Vec4) -> Result<Mat4> {
        let r = x.norm();
        if r < 1e-14 {
            return Err(Error::domain("direction function undefined at the origin"));
        }
        let u = x / r;
        let g = self.grad_dir(&u);
        let h = self.hess_dir(&u);
        let j = (Mat4::identity() - u * u.transpose()) / r;
        let gu = g.dot(&u);
        let curvature = (u * u.transpose() * (3.0 * gu)
            - g * u.transpose()
            - u * g.transpose()
            - Mat4::identity() * gu)
            / (r * r);
        Ok(j * h * j + curvature)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;

    fn sample_poly() -> TrigPolynomial {
        TrigPolynomial::new(vec![
            TrigTerm { coefficient: 0.3, frequency: [2, 0, 1, 0], phase: 0.0 },
            TrigTerm { coefficient: -0.15, frequency: [0, 1, 1, 1], phase: 0.7 },
        ])
        .unwrap()
    }

    #[test]
    fn ambient_value_is_scale_invariant() {
        let f = sample_poly();
        let mut rng = sampling::rng(11);
        for _ in 0..200 {
            let u = sampling::unit_direction(&mut rng);
            let a = f.eval_ambient(&u).unwrap();
            let b = f.eval_ambient(&(u * 37.5)).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ambient_gradient_matches_central_differences() {
        let f = sample_poly();
        let mut rng = sampling::rng(12);
        let h = 1e-6;
        for _ in 0..50 {
            let x = sampling::unit_direction(&mut rng) * 1.3;
            let g = f.grad_ambient(&x).unwrap();
            for i in 0..4 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd =
                    (f.eval_ambient(&xp).unwrap() - f.eval_ambient(&xm).unwrap()) / (2.0 * h);
                assert!(
                    (g[i] - fd).abs() < 1e-8,
                    "component {i}: exact {} vs fd {}",
                    g[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn ambient_hessian_matches_central_differences() {
        let f = sample_poly();
        let mut rng = sampling::rng(13);
        let h = 1e-5;
        for _ in 0..20 {
            let x = sampling::unit_direction(&mut rng) * 0.8;
            let hess = f.hess_ambient(&x).unwrap();
            for j in 0..4 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let col =
                    (f.grad_ambient(&xp).unwrap() - f.grad_ambient(&xm).unwrap()) / (2.0 * h);
                for i in 0..4 {
                    assert!(
                        (hess[(i, j)] - col[i]).abs() < 1e-7,
                        "entry ({i},{j}): exact {} vs fd {}",
                        hess[(i, j)],
                        col[i]
                    );
                }
            }
        }
    }

    #[test]
    fn origin_is_a_domain_error() {
        let f = sample_poly();
        assert!(matches!(
            f.eval_ambient(&Vec4::zeros()),
            Err(crate::Error::Domain(_))
        ));
    }
}
