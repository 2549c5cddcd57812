//! Standard contact-type structures on R^4 = R^2(x1,y1) x R^2(x2,y2):
//! the Liouville 1-form lambda = 1/2 sum (x_i dy_i - y_i dx_i), the symplectic
//! form omega = dx1^dy1 + dx2^dy2 = d(lambda), and the induced Hamiltonian
//! and Reeb vector fields of a defining function G on {G = 1}.
//!
//! Sign conventions: X_G = (-dG/dy1, dG/dx1, -dG/dy2, dG/dx2), so
//! i_{X_G} omega = -dG and lambda(X_G) = 1/2 <grad G, x>. On a starshaped
//! level set the Reeb field of lambda restricted to the surface is
//! R = X_G / lambda(X_G), normalized so lambda(R) = 1.

use crate::error::{Error, Result};
use crate::geometry::{BodySpec, TrigPolynomial};
use crate::{Mat4, Vec4};

/// omega(v, w) = v^T OMEGA w.
pub fn omega_matrix() -> Mat4 {
    Mat4::new(
        0.0, 1.0, 0.0, 0.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        0.0, 0.0, -1.0, 0.0,
    )
}

/// Rotation sending grad G to the Hamiltonian field: A g = (-g2, g1, -g4, g3).
fn rotation_matrix() -> Mat4 {
    Mat4::new(
        0.0, -1.0, 0.0, 0.0, //
        1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, -1.0, //
        0.0, 0.0, 1.0, 0.0,
    )
}

pub fn omega(v: &Vec4, w: &Vec4) -> f64 {
    v[0] * w[1] - v[1] * w[0] + v[2] * w[3] - v[3] * w[2]
}

/// Covector of lambda at x, components in the basis (dx1, dy1, dx2, dy2).
pub fn liouville_covector(x: &Vec4) -> Vec4 {
    0.5 * Vec4::new(-x[1], x[0], -x[3], x[2])
}

pub fn liouville(x: &Vec4, v: &Vec4) -> f64 {
    liouville_covector(x).dot(v)
}

/// The Liouville vector field Y = x/2 satisfies i_Y omega = lambda.
pub fn liouville_vector_field(x: &Vec4) -> Vec4 {
    0.5 * x
}

/// Hamiltonian vector field of the defining function:
/// X_G = (-dG/dy1, dG/dx1, -dG/dy2, dG/dx2).
pub fn hamiltonian_field(body: &BodySpec, x: &Vec4) -> Result<Vec4> {
    let g = body.gradient(x)?;
    Ok(Vec4::new(-g[1], g[0], -g[3], g[2]))
}

/// Space derivative of the Hamiltonian field: A hess G.
pub fn hamiltonian_jacobian(body: &BodySpec, x: &Vec4) -> Result<Mat4> {
    Ok(rotation_matrix() * body.hessian(x)?)
}

/// lambda(X_G)(x) = 1/2 <grad G(x), x>; positive exactly where the level set
/// is radially transversal.
pub fn reeb_normalizer(body: &BodySpec, x: &Vec4) -> Result<f64> {
    Ok(0.5 * body.gradient(x)?.dot(x))
}

/// Reeb field of lambda restricted to {G = 1}: R = X_G / lambda(X_G). The
/// formula extends to a neighbourhood of the level set; callers must keep
/// |G - 1| small for it to mean the Reeb field.
pub fn reeb_field(body: &BodySpec, x: &Vec4) -> Result<Vec4> {
    let sigma = reeb_normalizer(body, x)?;
    if !(sigma > 1e-12) {
        return Err(Error::Degenerate {
            point: format!("{:.6}, {:.6}, {:.6}, {:.6}", x[0], x[1], x[2], x[3]),
            radial_derivative: 2.0 * sigma,
        });
    }
    Ok(hamiltonian_field(body, x)? / sigma)
}

/// Space derivative of the Reeb field:
/// DR = A H / sigma - X_G (grad sigma)^T / sigma^2,
/// grad sigma = (H x + grad G)/2.
pub fn reeb_jacobian(body: &BodySpec, x: &Vec4) -> Result<Mat4> {
    let g = body.gradient(x)?;
    let h = body.hessian(x)?;
    let sigma = 0.5 * g.dot(x);
    if !(sigma > 1e-12) {
        return Err(Error::Degenerate {
            point: format!("{:.6}, {:.6}, {:.6}, {:.6}", x[0], x[1], x[2], x[3]),
            radial_derivative: 2.0 * sigma,
        });
    }
    let xg = Vec4::new(-g[1], g[0], -g[3], g[2]);
    let grad_sigma = (h * x + g) * 0.5;
    Ok(rotation_matrix() * h / sigma - xg * grad_sigma.transpose() / (sigma * sigma))
}

/// Radial graph map psi_f(m) = e^{f(m)/2} m, f evaluated on the direction of
/// m. Sends {G_base = 1} onto the radial-graph surface over it.
pub fn graph_pushforward(perturbation: &TrigPolynomial, m: &Vec4) -> Result<Vec4> {
    Ok(m * (0.5 * perturbation.eval_ambient(m)?).exp())
}

/// Exact differential of psi_f at m.
pub fn graph_pushforward_differential(
    perturbation: &TrigPolynomial,
    m: &Vec4,
) -> Result<Mat4> {
    let s = (0.5 * perturbation.eval_ambient(m)?).exp();
    let grad = perturbation.grad_ambient(m)?;
    Ok((Mat4::identity() + m * grad.transpose() * 0.5) * s)
}

/// Checks, on sampled base points and tangent vectors, that the pullback of
/// lambda under psi_f equals e^f lambda on the base surface. Returns the
/// worst relative residual.
pub fn verify_graph_form_relation(
    base: &BodySpec,
    perturbation: &TrigPolynomial,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = crate::sampling::rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let u = crate::sampling::unit_direction(&mut rng);
        let m = crate::geometry::surface_point(base, &u)?;
        let normal = base.gradient(&m)?;
        let v = crate::sampling::unit_tangent(&mut rng, &normal);
        let dpsi = graph_pushforward_differential(perturbation, &m)?;
        let image = graph_pushforward(perturbation, &m)?;
        let pullback = liouville(&image, &(dpsi * v));
        let ef = perturbation.eval_ambient(&m)?.exp();
        let expected = ef * liouville(&m, &v);
        let scale = expected.abs().max(ef * m.norm());
        worst = worst.max((pullback - expected).abs() / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Halfspace, SmoothingScheme, TrigTerm};
    use crate::sampling;

    fn sample_bodies() -> Vec<BodySpec> {
        vec![
            BodySpec::pnorm_cube(2).unwrap(),
            BodySpec::pnorm_cube(8).unwrap(),
            BodySpec::smoothed_polytope(Halfspace::cube(), SmoothingScheme::PNorm, 4.0).unwrap(),
            BodySpec::smoothed_polytope(Halfspace::cube(), SmoothingScheme::LogSumExp, 10.0)
                .unwrap(),
            BodySpec::quadric(Mat4::from_diagonal(&Vec4::new(1.0, 1.0, 2.0, 2.0))).unwrap(),
            BodySpec::radial_graph(
                BodySpec::quadric(Mat4::from_diagonal(&Vec4::new(1.0, 1.0, 2.0, 2.0))).unwrap(),
                TrigPolynomial::new(vec![TrigTerm {
                    coefficient: 0.12,
                    frequency: [2, 0, 1, 0],
                    phase: 0.0,
                }])
                .unwrap(),
            )
            .unwrap(),
        ]
    }

    #[test]
    fn liouville_differential_is_omega() {
        // lambda is linear in x, so d(lambda)_{ij} = d_i lambda_j - d_j lambda_i
        // is constant; compare against the omega matrix entrywise.
        let om = omega_matrix();
        for i in 0..4 {
            for j in 0..4 {
                let mut ei = Vec4::zeros();
                ei[i] = 1.0;
                let dlam_ij = liouville_covector(&ei)[j] - {
                    let mut ej = Vec4::zeros();
                    ej[j] = 1.0;
                    liouville_covector(&ej)[i]
                };
                assert!(
                    (dlam_ij - om[(i, j)]).abs() < 1e-15,
                    "entry ({i},{j}): {dlam_ij} vs {}",
                    om[(i, j)]
                );
            }
        }
    }

    #[test]
    fn liouville_field_contracts_omega_to_lambda() {
        let mut rng = sampling::rng(41);
        for _ in 0..1000 {
            let x = sampling::unit_direction(&mut rng) * 2.0;
            let v = sampling::unit_direction(&mut rng);
            let lhs = omega(&liouville_vector_field(&x), &v);
            let rhs = liouville(&x, &v);
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn hopf_field_at_first_axis() {
        let b = BodySpec::pnorm_cube(2).unwrap();
        let x = Vec4::new(1.0, 0.0, 0.0, 0.0);
        let xg = hamiltonian_field(&b, &x).unwrap();
        assert!((xg - Vec4::new(0.0, 2.0, 0.0, 0.0)).norm() < 1e-15);
        assert!((liouville(&x, &xg) - 1.0).abs() < 1e-15);
        let r = reeb_field(&b, &x).unwrap();
        assert!((r - Vec4::new(0.0, 2.0, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn hamiltonian_normalization_identity() {
        let mut rng = sampling::rng(43);
        for body in sample_bodies() {
            for _ in 0..200 {
                let u = sampling::unit_direction(&mut rng);
                let x = crate::geometry::surface_point(&body, &u).unwrap();
                let xg = hamiltonian_field(&body, &x).unwrap();
                let expected = 0.5 * body.gradient(&x).unwrap().dot(&x);
                assert!((liouville(&x, &xg) - expected).abs() <= 1e-12 * expected.abs().max(1.0));
            }
        }
    }

    #[test]
    fn reeb_contracts_lambda_to_one_and_kills_dg() {
        let mut rng = sampling::rng(47);
        for body in sample_bodies() {
            for _ in 0..500 {
                let u = sampling::unit_direction(&mut rng);
                let x = crate::geometry::surface_point(&body, &u).unwrap();
                let r = reeb_field(&body, &x).unwrap();
                assert!((liouville(&x, &r) - 1.0).abs() < 1e-10);
                let dg = body.gradient(&x).unwrap().dot(&r);
                assert!(dg.abs() < 1e-10, "dG(R) = {dg}");
            }
        }
    }

    #[test]
    fn reeb_jacobian_matches_finite_differences() {
        let mut rng = sampling::rng(53);
        let h = 1e-6;
        for body in sample_bodies() {
            for _ in 0..20 {
                let u = sampling::unit_direction(&mut rng);
                let x = crate::geometry::surface_point(&body, &u).unwrap();
                let jac = reeb_jacobian(&body, &x).unwrap();
                let scale = jac.norm().max(1.0);
                for j in 0..4 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[j] += h;
                    xm[j] -= h;
                    let col =
                        (reeb_field(&body, &xp).unwrap() - reeb_field(&body, &xm).unwrap())
                            / (2.0 * h);
                    for i in 0..4 {
                        assert!(
                            (jac[(i, j)] - col[i]).abs() <= 1e-6 * scale,
                            "entry ({i},{j}): {} vs {}",
                            jac[(i, j)],
                            col[i]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn graph_relation_exact_for_flat_and_constant_factors() {
        let base = BodySpec::quadric(Mat4::from_diagonal(&Vec4::new(1.0, 1.0, 2.0, 2.0))).unwrap();
        let zero = TrigPolynomial::default();
        assert!(verify_graph_form_relation(&base, &zero, 1000, 7).unwrap() <= 1e-12);
        // Constant factor 0.2: a frequency-zero term.
        let constant = TrigPolynomial::new(vec![TrigTerm {
            coefficient: 0.2,
            frequency: [0, 0, 0, 0],
            phase: 0.0,
        }])
        .unwrap();
        assert!(verify_graph_form_relation(&base, &constant, 1000, 7).unwrap() <= 1e-12);
    }

    #[test]
    fn graph_relation_holds_for_trig_factor() {
        let base = BodySpec::pnorm_cube(4).unwrap();
        let f = TrigPolynomial::new(vec![TrigTerm {
            coefficient: 0.1,
            frequency: [1, 1, 0, 2],
            phase: 0.4,
        }])
        .unwrap();
        let res = verify_graph_form_relation(&base, &f, 1000, 11).unwrap();
        assert!(res <= 1e-8, "residual {res}");
    }

    #[test]
    fn graph_relation_cross_checked_with_finite_difference_pullback() {
        let base = BodySpec::quadric(Mat4::from_diagonal(&Vec4::new(1.0, 1.0, 2.0, 2.0))).unwrap();
        let f = TrigPolynomial::new(vec![TrigTerm {
            coefficient: 0.1,
            frequency: [2, 1, 0, 0],
            phase: 0.0,
        }])
        .unwrap();
        let mut rng = sampling::rng(61);
        let h = 1e-6;
        for _ in 0..100 {
            let u = sampling::unit_direction(&mut rng);
            let m = crate::geometry::surface_point(&base, &u).unwrap();
            let normal = base.gradient(&m).unwrap();
            let v = sampling::unit_tangent(&mut rng, &normal);
            // Finite-difference differential of psi along v.
            let fp = graph_pushforward(&f, &(m + v * h)).unwrap();
            let fm = graph_pushforward(&f, &(m - v * h)).unwrap();
            let dpsi_v = (fp - fm) / (2.0 * h);
            let image = graph_pushforward(&f, &m).unwrap();
            let pullback = liouville(&image, &dpsi_v);
            let expected = f.eval_ambient(&m).unwrap().exp() * liouville(&m, &v);
            assert!(
                (pullback - expected).abs() < 1e-8,
                "fd pullback {pullback} vs {expected}"
            );
        }
    }

    #[test]
    fn degenerate_point_is_rejected() {
        // Radial transversality fails at the origin-side limit: x ~ 0.
        let b = BodySpec::pnorm_cube(4).unwrap();
        let x = Vec4::new(1e-9, 0.0, 0.0, 0.0);
        assert!(matches!(reeb_field(&b, &x), Err(Error::Degenerate { .. })));
    }
}
