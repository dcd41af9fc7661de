//! The standard contact structure `ker(dz + x dy)` on R^3: the form, the
//! horizontal frame, the Reeb field, closed-form flows and contact
//! Hamiltonian vector fields.

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::diffeo::Diffeo;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::ode;

pub type Point = Point3<f64>;
pub type Vector = Vector3<f64>;

/// A tangent vector `vec` at `base`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tangent {
    pub base: Point,
    pub vec: Vector,
}

impl Tangent {
    pub fn new(base: Point, vec: Vector) -> Self {
        Self { base, vec }
    }

    pub fn alpha(&self) -> f64 {
        alpha_eval(&self.base, &self.vec)
    }
}

/// `alpha = dz + x dy` evaluated on `v` at `p`.
#[inline]
pub fn alpha_eval(p: &Point, v: &Vector) -> f64 {
    v.z + p.x * v.y
}

pub(crate) fn check_finite(what: &'static str, p: &Point) -> Result<()> {
    if p.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            what,
            point: [p.x, p.y, p.z],
        })
    }
}

/// Contact space R^{2n+1}; only `n = 1` is implemented.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContactSpace {
    n: usize,
}

impl ContactSpace {
    pub fn new(n: usize) -> Result<Self> {
        if n != 1 {
            return Err(Error::UnsupportedDimension { n });
        }
        Ok(Self { n })
    }

    pub fn dimension(&self) -> usize {
        2 * self.n + 1
    }
}

/// Frame fields. `X`, `Y` span the contact plane, `Z{eps}` is `Y` pushed
/// forward by the time-`eps` flow of `X`, `Reeb` is `d/dz`.
///
/// `CutoffX` is `chi(|p|) d/dx` with `chi` equal to 1 on the ball of radius
/// `inner` and 0 outside radius `outer`; it is still horizontal, and its flow
/// is the identity far out, which gives null paths compact support.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "field", rename_all = "lowercase")]
pub enum FrameField {
    X,
    Y,
    Z { eps: f64 },
    Reeb,
    CutoffX { inner: f64, outer: f64 },
}

impl FrameField {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FrameField::Z { eps } if !(eps > 0.0) => Err(Error::InvalidParameter(format!(
                "Z field needs eps > 0, got {eps}"
            ))),
            FrameField::CutoffX { inner, outer } if !(inner >= 0.0 && outer > inner) => {
                Err(Error::InvalidParameter(format!(
                    "cut-off needs 0 <= inner < outer, got {inner}, {outer}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Whether the field is tangent to the contact planes everywhere.
    pub fn is_horizontal(&self) -> bool {
        matches!(
            self,
            FrameField::X | FrameField::Y | FrameField::CutoffX { .. }
        )
    }
}

pub fn frame_eval(field: FrameField, p: &Point) -> Tangent {
    let v = match field {
        FrameField::X => Vector::new(1.0, 0.0, 0.0),
        FrameField::Y => Vector::new(0.0, 1.0, -p.x),
        FrameField::Z { eps } => Vector::new(0.0, 1.0, p.x - eps),
        FrameField::Reeb => Vector::new(0.0, 0.0, 1.0),
        FrameField::CutoffX { inner, outer } => {
            Vector::new(ode::cutoff(inner, outer, p).0, 0.0, 0.0)
        }
    };
    Tangent::new(*p, v)
}

/// Time-`t` flow of a frame field; closed form except for `CutoffX`,
/// which is integrated numerically.
pub fn flow(field: FrameField, t: f64, p: &Point) -> Point {
    match field {
        FrameField::X => Point::new(p.x + t, p.y, p.z),
        FrameField::Y => Point::new(p.x, p.y + t, p.z - p.x * t),
        FrameField::Z { eps } => Point::new(p.x, p.y + t, p.z + (eps - p.x) * t),
        FrameField::Reeb => Point::new(p.x, p.y, p.z + t),
        FrameField::CutoffX { inner, outer } => ode::cutoff_flow(inner, outer, t, p).0,
    }
}

/// Flow together with its spatial Jacobian.
pub fn flow_jacobian(field: FrameField, t: f64, p: &Point) -> (Point, Matrix3<f64>) {
    match field {
        FrameField::X | FrameField::Reeb => (flow(field, t, p), Matrix3::identity()),
        FrameField::Y | FrameField::Z { .. } => {
            let mut j = Matrix3::identity();
            j[(2, 0)] = -t;
            (flow(field, t, p), j)
        }
        FrameField::CutoffX { inner, outer } => ode::cutoff_flow(inner, outer, t, p),
    }
}

/// Contact vector field of `h`: `(x h_z - h_y, h_x, h - x h_x)`, the unique
/// field with `alpha(X_h) = h` and `i_{X_h} d alpha = dh(R) alpha - dh`, so
/// that `L_{X_h} alpha = h_z alpha`.
pub fn hamiltonian_vector_field(h: &ScalarField, p: &Point) -> Result<Tangent> {
    let v = h.value(p);
    let g = h.gradient(p);
    let out = Vector::new(p.x * g.z - g.y, g.x, v - p.x * g.x);
    if !out.iter().all(|c| c.is_finite()) {
        return Err(Error::NonFinite {
            what: "hamiltonian gradient",
            point: [p.x, p.y, p.z],
        });
    }
    Ok(Tangent::new(*p, out))
}

/// `X_h(p)` and its spatial Jacobian.
pub fn hamiltonian_field_jacobian(h: &ScalarField, p: &Point) -> Result<(Vector, Matrix3<f64>)> {
    let v = h.value(p);
    let g = h.gradient(p);
    let hs = h.hessian(p)?;
    let x = p.x;
    let out = Vector::new(x * g.z - g.y, g.x, v - x * g.x);
    let ex = Vector::new(1.0, 0.0, 0.0);
    let row0 = hs.row(2).transpose() * x + ex * g.z - hs.row(1).transpose();
    let row1 = hs.row(0).transpose();
    let row2 = g - hs.row(0).transpose() * x - ex * g.x;
    let jac = Matrix3::from_rows(&[row0.transpose(), row1.transpose(), row2.transpose()]);
    if !out.iter().chain(jac.iter()).all(|c| c.is_finite()) {
        return Err(Error::NonFinite {
            what: "hamiltonian field",
            point: [p.x, p.y, p.z],
        });
    }
    Ok((out, jac))
}

/// `(f^* alpha)(R)` at `p`: alpha at `f(p)` applied to `Df(p) e_z`.
/// Equals the conformal factor when `f` is a contactomorphism.
pub fn conformal_factor(f: &Diffeo, p: &Point) -> Result<f64> {
    let (q, j) = f.eval_jac(p)?;
    Ok(j[(2, 2)] + q.x * j[(1, 2)])
}

/// Largest `|alpha(Df v)| / |v|` over `v` in the contact plane at `p`,
/// normalised by `|Df|`; zero for contactomorphisms.
pub fn kernel_defect(f: &Diffeo, p: &Point) -> Result<f64> {
    let (q, j) = f.eval_jac(p)?;
    let basis = [
        frame_eval(FrameField::X, p).vec,
        frame_eval(FrameField::Y, p).vec,
    ];
    let mut worst = 0.0f64;
    for v in basis {
        let w = j * v;
        worst = worst.max(alpha_eval(&q, &w).abs() / v.norm().max(w.norm()));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_eval(&Point::origin(), &Vector::new(0.0, 0.0, 1.0)), 1.0);
        assert_eq!(alpha_eval(&Point::new(5.0, 2.0, -1.0), &Vector::new(1.0, 0.0, 0.0)), 0.0);
        assert_eq!(alpha_eval(&Point::new(2.0, 0.0, 0.0), &Vector::new(0.0, 1.0, 0.0)), 2.0);
    }

    #[test]
    fn frame_examples() {
        let p = Point::new(2.0, 0.0, 0.0);
        assert_eq!(frame_eval(FrameField::Y, &p).vec, Vector::new(0.0, 1.0, -2.0));
        assert_eq!(
            frame_eval(FrameField::Z { eps: 0.5 }, &p).vec,
            Vector::new(0.0, 1.0, 1.5)
        );
        assert_eq!(frame_eval(FrameField::X, &p).vec, Vector::new(1.0, 0.0, 0.0));
        assert_eq!(frame_eval(FrameField::Reeb, &p).vec, Vector::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn flow_examples() {
        assert_eq!(
            flow(FrameField::Y, 1.0, &Point::new(2.0, 0.0, 0.0)),
            Point::new(2.0, 1.0, -2.0)
        );
        assert_eq!(
            flow(FrameField::Z { eps: 0.5 }, 2.0, &Point::origin()),
            Point::new(0.0, 2.0, 1.0)
        );
        let p = Point::new(0.3, -1.0, 4.0);
        assert_eq!(flow(FrameField::X, 0.0, &p), p);
    }

    #[test]
    fn hamiltonian_examples() {
        let one = ScalarField::Constant(1.0);
        let p = Point::new(0.4, -3.0, 2.0);
        assert_eq!(hamiltonian_vector_field(&one, &p).unwrap().vec, Vector::new(0.0, 0.0, 1.0));
        let hx = ScalarField::parse("x").unwrap();
        assert_eq!(
            hamiltonian_vector_field(&hx, &Point::new(1.0, 0.0, 0.0)).unwrap().vec,
            Vector::new(0.0, 1.0, 0.0)
        );
        let hy = ScalarField::parse("y").unwrap();
        assert_eq!(
            hamiltonian_vector_field(&hy, &Point::new(0.0, 3.0, 0.0)).unwrap().vec,
            Vector::new(-1.0, 0.0, 3.0)
        );
    }

    #[test]
    fn hamiltonian_flow_preserves_the_contact_plane() {
        let h = ScalarField::parse("sin(x) * y + z^2 * x - tanh(y*z)").unwrap();
        let f = Diffeo::Hamiltonian(std::sync::Arc::new(crate::ode::HamiltonianSlice::new(
            h, 0.5, 256,
        )));
        for p in [Point::new(0.3, -0.7, 0.4), Point::new(-1.0, 0.5, 0.2)] {
            assert!(kernel_defect(&f, &p).unwrap() < 1e-9);
        }
    }

    #[test]
    fn dimension_guard() {
        assert_eq!(ContactSpace::new(1).unwrap().dimension(), 3);
        assert_eq!(
            ContactSpace::new(2).unwrap_err(),
            Error::UnsupportedDimension { n: 2 }
        );
    }

    #[test]
    fn hamiltonian_jacobian_matches_differences() {
        let h = ScalarField::parse("sin(x) * y + z^2 * x - tanh(y*z)").unwrap();
        let p = Point::new(0.3, -0.7, 0.4);
        let (_, jac) = hamiltonian_field_jacobian(&h, &p).unwrap();
        let d = 1e-6;
        for i in 0..3 {
            let mut a = p;
            let mut b = p;
            a[i] += d;
            b[i] -= d;
            let col = (hamiltonian_vector_field(&h, &a).unwrap().vec
                - hamiltonian_vector_field(&h, &b).unwrap().vec)
                / (2.0 * d);
            assert!((jac.column(i) - col).norm() < 1e-8);
        }
    }
}
