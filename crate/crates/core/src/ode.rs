//! Fixed-step RK4 for contact Hamiltonian flows, with the variational
//! equation for exact Jacobians of the discrete flow map, and the flow of
//! the cut-off horizontal field `chi d/dx`.

use nalgebra::{Matrix3, Vector3};

use crate::contact::{check_finite, hamiltonian_field_jacobian, hamiltonian_vector_field, Point};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::smooth::flat_ramp;

/// Time-`step * nsteps` map of RK4 applied to `X_h`. Keeping `step` explicit
/// makes `k` slices of `n` steps compose to a slice of `k n` steps exactly.
#[derive(Clone, Debug)]
pub struct HamiltonianSlice {
    pub h: ScalarField,
    pub step: f64,
    pub nsteps: usize,
}

impl HamiltonianSlice {
    pub fn new(h: ScalarField, time: f64, nsteps: usize) -> Self {
        let nsteps = nsteps.max(1);
        Self {
            h,
            step: time / nsteps as f64,
            nsteps,
        }
    }

    pub fn time(&self) -> f64 {
        self.step * self.nsteps as f64
    }

    /// The exact flow when the trajectory stays where `h` is a constant `c`;
    /// there `X_h = c R`, so the trajectory is a vertical segment.
    fn far_flow(&self, p: &Point) -> Option<Point> {
        if self.step == 0.0 {
            return Some(*p);
        }
        let (c, r) = self.h.far_constant()?;
        let dz = c * self.time();
        let (z0, z1) = (p.z, p.z + dz);
        let zmin = if z0 * z1 <= 0.0 { 0.0 } else { z0.abs().min(z1.abs()) };
        (p.x.hypot(p.y).hypot(zmin) >= r).then(|| Point::new(p.x, p.y, z1))
    }

    pub fn eval(&self, p: &Point) -> Result<Point> {
        if let Some(q) = self.far_flow(p) {
            return Ok(q);
        }
        let f = |q: &Point| hamiltonian_vector_field(&self.h, q).map(|t| t.vec);
        let dt = self.step;
        let mut x = *p;
        for _ in 0..self.nsteps {
            let k1 = f(&x)?;
            let k2 = f(&(x + k1 * (dt / 2.0)))?;
            let k3 = f(&(x + k2 * (dt / 2.0)))?;
            let k4 = f(&(x + k3 * dt))?;
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        }
        check_finite("RK4 state", &x)?;
        Ok(x)
    }

    /// Flow point and the exact Jacobian of the discrete RK4 map.
    pub fn eval_jac(&self, p: &Point) -> Result<(Point, Matrix3<f64>)> {
        if let Some(q) = self.far_flow(p) {
            return Ok((q, Matrix3::identity()));
        }
        let f = |q: &Point| hamiltonian_field_jacobian(&self.h, q);
        let dt = self.step;
        let mut x = *p;
        let mut j = Matrix3::identity();
        for _ in 0..self.nsteps {
            let (v1, a1) = f(&x)?;
            let k1 = (v1, a1 * j);
            let x2 = x + k1.0 * (dt / 2.0);
            let (v2, a2) = f(&x2)?;
            let k2 = (v2, a2 * (j + k1.1 * (dt / 2.0)));
            let x3 = x + k2.0 * (dt / 2.0);
            let (v3, a3) = f(&x3)?;
            let k3 = (v3, a3 * (j + k2.1 * (dt / 2.0)));
            let x4 = x + k3.0 * dt;
            let (v4, a4) = f(&x4)?;
            let k4 = (v4, a4 * (j + k3.1 * dt));
            x += (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * (dt / 6.0);
            j += (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * (dt / 6.0);
        }
        check_finite("RK4 state", &x)?;
        Ok((x, j))
    }
}

/// Relative constant in the RK4 order check `|x_h - x_{h/2}| <= C h^4 |t|`.
pub const ORDER_CONSTANT: f64 = 1.0;

/// Time-`t` flow of `X_h` from `p` by RK4 with step at most `step`; the
/// result is accepted only if halving the step moves it by no more than
/// `ORDER_CONSTANT * step^4 * |t|` (plus rounding slack).
pub fn integrate_contact_flow(h: &ScalarField, t: f64, p: &Point, step: f64) -> Result<Point> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    let n = ((t.abs() / step).ceil() as usize).max(1);
    let coarse = HamiltonianSlice::new(h.clone(), t, n).eval(p)?;
    let fine = HamiltonianSlice::new(h.clone(), t, 2 * n).eval(p)?;
    let used = t.abs() / n as f64;
    let diff = (coarse - fine).norm();
    let bound = ORDER_CONSTANT * used.powi(4) * t.abs() + 1e-13 * (1.0 + p.coords.norm());
    if diff > bound {
        return Err(Error::StepTooLarge { diff, bound });
    }
    Ok(fine)
}

/// Radial cut-off `chi` and its gradient: 1 for `|p| <= inner`, 0 for
/// `|p| >= outer`.
pub fn cutoff(inner: f64, outer: f64, p: &Point) -> (f64, Vector3<f64>) {
    let r = p.coords.norm();
    let w = outer - inner;
    let (m, dm, _) = flat_ramp((outer - r) / w);
    if dm == 0.0 {
        return (m, Vector3::zeros());
    }
    (m, p.coords * (-dm / (w * r)))
}

const CUTOFF_STEPS: usize = 64;

/// Forward flow of `chi d/dx` for time `t >= 0`: x-coordinate and the first
/// row of the Jacobian.
fn cutoff_forward(inner: f64, outer: f64, t: f64, p: &Point) -> (f64, Vector3<f64>) {
    let r = p.coords.norm();
    if r + t <= inner {
        return (p.x + t, Vector3::x());
    }
    if r - t >= outer {
        return (p.x, Vector3::x());
    }
    let dt = t / CUTOFF_STEPS as f64;
    let rhs = |x: f64, row: &Vector3<f64>| {
        let (c, g) = cutoff(inner, outer, &Point::new(x, p.y, p.z));
        (c, row * g.x + Vector3::new(0.0, g.y, g.z))
    };
    let mut x = p.x;
    let mut row = Vector3::x();
    for _ in 0..CUTOFF_STEPS {
        let k1 = rhs(x, &row);
        let k2 = rhs(x + k1.0 * dt / 2.0, &(row + k1.1 * (dt / 2.0)));
        let k3 = rhs(x + k2.0 * dt / 2.0, &(row + k2.1 * (dt / 2.0)));
        let k4 = rhs(x + k3.0 * dt, &(row + k3.1 * dt));
        x += (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0) * dt / 6.0;
        row += (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * (dt / 6.0);
    }
    (x, row)
}

/// Flow of the cut-off field for any `t`; negative times are the exact
/// inverse of the forward discrete flow, so `phi_{-t} o phi_t = id` to
/// rounding.
pub fn cutoff_flow(inner: f64, outer: f64, t: f64, p: &Point) -> (Point, Matrix3<f64>) {
    let to_jac = |row: Vector3<f64>| {
        let mut j = Matrix3::identity();
        j.set_row(0, &row.transpose());
        j
    };
    if t >= 0.0 {
        let (x, row) = cutoff_forward(inner, outer, t, p);
        return (Point::new(x, p.y, p.z), to_jac(row));
    }
    let s = -t;
    let target = p.x;
    let r = p.coords.norm();
    if r + s <= inner {
        return (Point::new(p.x - s, p.y, p.z), Matrix3::identity());
    }
    if r - s >= outer {
        return (*p, Matrix3::identity());
    }
    // the forward map is increasing in x with x <= F(x) <= x + s
    let forward = |x: f64| cutoff_forward(inner, outer, s, &Point::new(x, p.y, p.z));
    let (mut lo, mut hi) = (target - s, target);
    let mut x = target - s * cutoff(inner, outer, p).0;
    let mut row = Vector3::x();
    for _ in 0..200 {
        let (fx, rw) = forward(x);
        row = rw;
        let g = fx - target;
        if g.abs() <= 1e-15 * (1.0 + target.abs()) {
            break;
        }
        if g > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - g / rw.x;
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * (1.0 + target.abs()) {
            row = forward(x).1;
            break;
        }
    }
    let a = row.x;
    let inv = Vector3::new(1.0 / a, -row.y / a, -row.z / a);
    (Point::new(x, p.y, p.z), to_jac(inv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_hamiltonian_is_reeb_translation() {
        let one = ScalarField::Constant(1.0);
        let q = integrate_contact_flow(&one, 0.7, &Point::new(1.0, 2.0, 3.0), 0.05).unwrap();
        assert!((q - Point::new(1.0, 2.0, 3.7)).norm() < 1e-14);
    }

    #[test]
    fn aligned_slices_compose_exactly() {
        let h = ScalarField::parse("tanh(z) + x*y").unwrap();
        let a = HamiltonianSlice {
            h: h.clone(),
            step: 0.01,
            nsteps: 3,
        };
        let b = HamiltonianSlice {
            h,
            step: 0.01,
            nsteps: 6,
        };
        let p = Point::new(0.2, -0.3, 0.5);
        assert_eq!(a.eval(&a.eval(&p).unwrap()).unwrap(), b.eval(&p).unwrap());
    }

    #[test]
    fn variational_jacobian_matches_differences() {
        let h = ScalarField::parse("sin(x + 2*y) * z + y^2").unwrap();
        let s = HamiltonianSlice::new(h, 0.3, 12);
        let p = Point::new(0.1, 0.4, -0.2);
        let (_, jac) = s.eval_jac(&p).unwrap();
        let d = 1e-6;
        for i in 0..3 {
            let mut a = p;
            let mut b = p;
            a[i] += d;
            b[i] -= d;
            let col = (s.eval(&a).unwrap() - s.eval(&b).unwrap()) / (2.0 * d);
            assert!((jac.column(i) - col).norm() < 1e-8);
        }
    }

    #[test]
    fn cutoff_flow_inverse_and_jacobian() {
        let (inner, outer) = (1.0, 3.0);
        for p in [
            Point::new(0.5, 0.2, 0.1),
            Point::new(1.6, 0.4, -0.3),
            Point::new(-2.2, 0.8, 0.9),
            Point::new(5.0, 0.0, 0.0),
        ] {
            let (q, j) = cutoff_flow(inner, outer, 0.7, &p);
            let (back, jb) = cutoff_flow(inner, outer, -0.7, &q);
            assert!((back - p).norm() < 1e-13, "{p:?}");
            assert!((jb * j - Matrix3::identity()).norm() < 1e-10);
            let d = 1e-6;
            for i in 0..3 {
                let mut a = p;
                let mut b = p;
                a[i] += d;
                b[i] -= d;
                let col = (cutoff_flow(inner, outer, 0.7, &a).0 - cutoff_flow(inner, outer, 0.7, &b).0)
                    / (2.0 * d);
                assert!((j.column(i) - col).norm() < 1e-7);
            }
        }
        // pure translation deep inside, identity far out
        assert_eq!(
            cutoff_flow(inner, outer, 0.3, &Point::new(0.1, 0.0, 0.0)).0,
            Point::new(0.4, 0.0, 0.0)
        );
        assert_eq!(
            cutoff_flow(inner, outer, -0.3, &Point::new(4.0, 0.0, 0.0)).0,
            Point::new(4.0, 0.0, 0.0)
        );
    }
}
