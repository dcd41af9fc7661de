//! Scalar fields on R^3 with exact gradients and Hessians.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::contact::Point;
use crate::error::{Error, Result};
use crate::expr::ScalarExpr;
use crate::smooth::flat_ramp;

/// User-supplied scalar field. `hessian` may return `None` when no closed form
/// is available; flows of such fields then have no variational Jacobian.
pub trait FieldFn: Send + Sync + fmt::Debug {
    fn value(&self, p: &Point) -> f64;
    fn gradient(&self, p: &Point) -> Vector3<f64>;
    fn hessian(&self, _p: &Point) -> Option<Matrix3<f64>> {
        None
    }
}

/// Radially symmetric bump: `height` on the ball of radius `inner`, zero
/// outside radius `outer`, `height * mu((outer - r) / (outer - inner))` between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub inner: f64,
    pub outer: f64,
    pub height: f64,
}

impl Bump {
    pub fn new(inner: f64, outer: f64, height: f64) -> Result<Self> {
        if !(inner >= 0.0 && outer > inner && height.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bump needs 0 <= inner < outer, got inner = {inner}, outer = {outer}"
            )));
        }
        Ok(Self {
            inner,
            outer,
            height,
        })
    }

    /// Radial profile `(h, h', h'')` as a function of r.
    fn profile(&self, r: f64) -> (f64, f64, f64) {
        let w = self.outer - self.inner;
        let (m, dm, ddm) = flat_ramp((self.outer - r) / w);
        (
            self.height * m,
            -self.height * dm / w,
            self.height * ddm / (w * w),
        )
    }

    pub fn value(&self, p: &Point) -> f64 {
        self.profile(p.coords.norm()).0
    }

    pub fn gradient(&self, p: &Point) -> Vector3<f64> {
        let r = p.coords.norm();
        let (_, d, _) = self.profile(r);
        if d == 0.0 {
            return Vector3::zeros();
        }
        p.coords * (d / r)
    }

    pub fn hessian(&self, p: &Point) -> Matrix3<f64> {
        let r = p.coords.norm();
        let (_, d, dd) = self.profile(r);
        if d == 0.0 && dd == 0.0 {
            return Matrix3::zeros();
        }
        let u = p.coords / r;
        let uu = u * u.transpose();
        uu * dd + (Matrix3::identity() - uu) * (d / r)
    }
}

#[derive(Clone, Debug)]
pub enum ScalarField {
    Constant(f64),
    Expr(Arc<ScalarExpr>),
    Bump(Bump),
    /// `offset + sum c_i * f_i`
    Combination(f64, Vec<(f64, ScalarField)>),
    Custom(Arc<dyn FieldFn>),
}

impl ScalarField {
    pub fn parse(src: &str) -> Result<Self> {
        Ok(ScalarField::Expr(Arc::new(ScalarExpr::parse(src)?)))
    }

    pub fn value(&self, p: &Point) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Expr(e) => e.value(&[p.x, p.y, p.z, 0.0]),
            ScalarField::Bump(b) => b.value(p),
            ScalarField::Combination(c0, terms) => {
                terms.iter().fold(*c0, |acc, (c, f)| acc + c * f.value(p))
            }
            ScalarField::Custom(f) => f.value(p),
        }
    }

    pub fn gradient(&self, p: &Point) -> Vector3<f64> {
        match self {
            ScalarField::Constant(_) => Vector3::zeros(),
            ScalarField::Expr(e) => e.gradient(&[p.x, p.y, p.z, 0.0]),
            ScalarField::Bump(b) => b.gradient(p),
            ScalarField::Combination(_, terms) => terms
                .iter()
                .fold(Vector3::zeros(), |acc, (c, f)| acc + f.gradient(p) * *c),
            ScalarField::Custom(f) => f.gradient(p),
        }
    }

    pub fn hessian(&self, p: &Point) -> Result<Matrix3<f64>> {
        Ok(match self {
            ScalarField::Constant(_) => Matrix3::zeros(),
            ScalarField::Expr(e) => e.hessian(&[p.x, p.y, p.z, 0.0]),
            ScalarField::Bump(b) => b.hessian(p),
            ScalarField::Combination(_, terms) => {
                let mut acc = Matrix3::zeros();
                for (c, f) in terms {
                    acc += f.hessian(p)? * *c;
                }
                acc
            }
            ScalarField::Custom(f) => f.hessian(p).ok_or(Error::NoHessian("custom field"))?,
        })
    }

    /// The value of a constant field.
    pub fn is_constant(&self) -> Option<f64> {
        match self {
            ScalarField::Constant(c) => Some(*c),
            _ => None,
        }
    }

    /// `(c, r)` such that the field is the constant `c` outside radius `r`,
    /// when known.
    pub fn far_constant(&self) -> Option<(f64, f64)> {
        match self {
            ScalarField::Constant(c) => Some((*c, 0.0)),
            ScalarField::Bump(b) => Some((0.0, b.outer)),
            ScalarField::Combination(c0, terms) => {
                terms.iter().try_fold((*c0, 0.0f64), |(c, r), (k, f)| {
                    f.far_constant().map(|(cf, rf)| (c + k * cf, r.max(rf)))
                })
            }
            _ => None,
        }
    }

    /// Outer radius beyond which the field, its gradient and Hessian vanish,
    /// when known.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            ScalarField::Constant(c) if *c == 0.0 => Some(0.0),
            ScalarField::Bump(b) => Some(b.outer),
            ScalarField::Combination(c0, terms) if *c0 == 0.0 => {
                terms.iter().try_fold(0.0f64, |acc, (_, f)| {
                    f.support_radius().map(|r| acc.max(r))
                })
            }
            _ => None,
        }
    }
}

impl From<Bump> for ScalarField {
    fn from(b: Bump) -> Self {
        ScalarField::Bump(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient(f: &ScalarField, p: &Point) -> Vector3<f64> {
        let h = 1e-5;
        Vector3::from_fn(|i, _| {
            let mut a = *p;
            let mut b = *p;
            a[i] += h;
            b[i] -= h;
            (f.value(&a) - f.value(&b)) / (2.0 * h)
        })
    }

    #[test]
    fn bump_plateau_and_support() {
        let b = ScalarField::Bump(Bump::new(1.0, 2.0, 3.0).unwrap());
        assert_eq!(b.value(&Point::new(0.5, 0.2, -0.3)), 3.0);
        assert_eq!(b.value(&Point::new(0.0, 2.0, 0.0)), 0.0);
        assert_eq!(b.value(&Point::new(3.0, 0.0, 0.0)), 0.0);
        let mid = b.value(&Point::new(1.5, 0.0, 0.0));
        assert!((mid - 1.5).abs() < 1e-12);
    }

    #[test]
    fn bump_gradient_and_hessian_match_differences() {
        let b = ScalarField::Bump(Bump::new(0.5, 1.5, 2.0).unwrap());
        let h = 1e-5;
        for p in [
            Point::new(0.7, 0.1, -0.2),
            Point::new(-0.4, 0.6, 0.5),
            Point::new(0.2, -1.0, 0.3),
        ] {
            let g = b.gradient(&p);
            assert!((g - fd_gradient(&b, &p)).norm() < 1e-6);
            let hs = b.hessian(&p).unwrap();
            for i in 0..3 {
                let mut a = p;
                let mut c = p;
                a[i] += h;
                c[i] -= h;
                let col = (b.gradient(&a) - b.gradient(&c)) / (2.0 * h);
                assert!((hs.column(i) - col).norm() < 1e-5);
            }
        }
    }

    #[test]
    fn bump_is_flat_at_the_centre() {
        let b = Bump::new(0.0, 1.0, 1.0).unwrap();
        let p = Point::origin();
        assert_eq!(b.value(&p), 1.0);
        assert_eq!(b.gradient(&p), Vector3::zeros());
        assert_eq!(b.hessian(&p), Matrix3::zeros());
    }

    #[test]
    fn combination_is_linear() {
        let f = ScalarField::Combination(
            1.0,
            vec![
                (-2.0, Bump::new(0.0, 1.0, 1.0).unwrap().into()),
                (0.5, ScalarField::parse("x*y").unwrap()),
            ],
        );
        let p = Point::new(0.3, 0.2, 0.1);
        let b = Bump::new(0.0, 1.0, 1.0).unwrap();
        assert!((f.value(&p) - (1.0 - 2.0 * b.value(&p) + 0.5 * 0.06)).abs() < 1e-15);
        assert!((f.gradient(&p) - fd_gradient(&f, &p)).norm() < 1e-6);
    }
}
