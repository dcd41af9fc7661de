//! Smooth maps R^3 -> R^3 with exact Jacobians.

use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::contact::{check_finite, flow, flow_jacobian, frame_eval, FrameField, Point};
use crate::error::{Error, InversionFailure, Result};
use crate::expr::MapExpr;
use crate::factorize::Amplitude;
use crate::field::{Bump, ScalarField};
use crate::grid::{Aabb, Grid};
use crate::ode::HamiltonianSlice;

/// A map supplied from outside the crate.
pub trait SmoothMap: Send + Sync + fmt::Debug {
    fn eval_jac(&self, p: &Point) -> Result<(Point, Matrix3<f64>)>;

    fn eval(&self, p: &Point) -> Result<Point> {
        self.eval_jac(p).map(|(q, _)| q)
    }

    fn describe(&self) -> String {
        "custom".to_string()
    }
}

/// Closed-form parametric families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Builtin {
    /// `(x, y, z + t)`
    Reeb { t: f64 },
    /// `(x, y + c, z)`
    Shear { c: f64 },
    /// `(l x, l y, l^2 z)`, a contactomorphism with conformal factor `l^2`.
    Dilation { lambda: f64 },
    /// `(x, y + c b(p), z)` with `b` the unit-height bump with radii
    /// `inner < outer`; the identity outside radius `outer`.
    BumpShear { c: f64, inner: f64, outer: f64 },
}

impl Builtin {
    fn eval_jac(&self, p: &Point) -> (Point, Matrix3<f64>) {
        match *self {
            Builtin::Reeb { t } => (Point::new(p.x, p.y, p.z + t), Matrix3::identity()),
            Builtin::Shear { c } => (Point::new(p.x, p.y + c, p.z), Matrix3::identity()),
            Builtin::Dilation { lambda: l } => (
                Point::new(l * p.x, l * p.y, l * l * p.z),
                Matrix3::from_diagonal(&nalgebra::Vector3::new(l, l, l * l)),
            ),
            Builtin::BumpShear { c, inner, outer } => {
                let b = Bump {
                    inner,
                    outer,
                    height: 1.0,
                };
                let mut j = Matrix3::identity();
                let g = b.gradient(p) * c;
                j.set_row(1, &(j.row(1) + g.transpose()));
                (Point::new(p.x, p.y + c * b.value(p), p.z), j)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Builtin::Dilation { lambda } if !(lambda > 0.0) => Err(Error::InvalidParameter(
                format!("dilation needs lambda > 0, got {lambda}"),
            )),
            Builtin::BumpShear { inner, outer, .. } => Bump::new(inner, outer, 1.0).map(|_| ()),
            _ => Ok(()),
        }
    }
}

/// Default RK4 step bound for builtin Hamiltonian slices.
pub const HAMILTONIAN_STEP: f64 = 1.0 / 64.0;

/// The bump Hamiltonian used by the `bumpflow` builtin.
pub fn builtin_bump_hamiltonian() -> ScalarField {
    ScalarField::Bump(Bump {
        inner: 0.0,
        outer: 3.0,
        height: 1.0,
    })
}

#[derive(Clone, Debug)]
pub enum Diffeo {
    Identity,
    Builtin(Builtin),
    /// A parsed map evaluated with `t` bound to the given value.
    Parsed(Arc<MapExpr>, f64),
    /// `[f, g, h]` is `f o g o h`.
    Compose(Arc<[Diffeo]>),
    /// Time slice of a frame field flow.
    Flow(FrameField, f64),
    Hamiltonian(Arc<HamiltonianSlice>),
    /// `p -> phi^field_{scale * a(p)}(p)`
    Reparam {
        field: FrameField,
        amplitude: Amplitude,
        scale: f64,
    },
    Inverse(Arc<Diffeo>),
    /// Evaluation outside the box is an error.
    Restricted(Arc<Diffeo>, Aabb),
    Custom(Arc<dyn SmoothMap>),
}

impl Diffeo {
    pub fn reeb(t: f64) -> Self {
        Diffeo::Builtin(Builtin::Reeb { t })
    }

    pub fn parse(src: &str) -> Result<Self> {
        Ok(Diffeo::Parsed(Arc::new(MapExpr::parse(src)?), 0.0))
    }

    /// Parses builtin names `name:param[:param...]`: `id`, `reeb:T`,
    /// `shear:c`, `dilation:l`, `bumpshear:c[:inner:outer]`,
    /// `bumpflow:T`, `flow:x|y|reeb:T`.
    pub fn builtin(src: &str) -> Result<Self> {
        let mut parts = src.split(':');
        let name = parts.next().unwrap_or_default().trim().to_ascii_lowercase();
        let rest: Vec<&str> = parts.collect();
        let nums = |k: usize| -> Result<Vec<f64>> {
            let vals: Vec<f64> = rest
                .iter()
                .skip(k)
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        Error::InvalidParameter(format!("bad number `{s}` in builtin `{src}`"))
                    })
                })
                .collect::<Result<_>>()?;
            Ok(vals)
        };
        let bad = || Error::InvalidParameter(format!("unknown or malformed builtin `{src}`"));
        let d = match (name.as_str(), nums(0).as_deref()) {
            ("id" | "identity", Ok([])) => Diffeo::Identity,
            ("reeb", Ok([t])) => Diffeo::Builtin(Builtin::Reeb { t: *t }),
            ("shear", Ok([c])) => Diffeo::Builtin(Builtin::Shear { c: *c }),
            ("dilation", Ok([l])) => Diffeo::Builtin(Builtin::Dilation { lambda: *l }),
            ("bumpshear", Ok([c])) => Diffeo::Builtin(Builtin::BumpShear {
                c: *c,
                inner: 0.5,
                outer: 1.5,
            }),
            ("bumpshear", Ok([c, i, o])) => Diffeo::Builtin(Builtin::BumpShear {
                c: *c,
                inner: *i,
                outer: *o,
            }),
            ("bumpflow", Ok([t])) => {
                let n = ((t.abs() / HAMILTONIAN_STEP).ceil() as usize).max(1);
                Diffeo::Hamiltonian(Arc::new(HamiltonianSlice::new(
                    builtin_bump_hamiltonian(),
                    *t,
                    n,
                )))
            }
            ("flow", _) => {
                let field = match rest.first().map(|s| s.trim()) {
                    Some("x") => FrameField::X,
                    Some("y") => FrameField::Y,
                    Some("reeb") => FrameField::Reeb,
                    _ => return Err(bad()),
                };
                match nums(1)?.as_slice() {
                    [t] => Diffeo::Flow(field, *t),
                    _ => return Err(bad()),
                }
            }
            _ => return Err(bad()),
        };
        if let Diffeo::Builtin(b) = &d {
            b.validate()?;
        }
        Ok(d)
    }

    pub fn eval(&self, p: &Point) -> Result<Point> {
        let q = match self {
            Diffeo::Identity => *p,
            Diffeo::Builtin(b) => b.eval_jac(p).0,
            Diffeo::Parsed(m, t) => Point::from(m.eval(&[p.x, p.y, p.z, *t])),
            Diffeo::Compose(list) => {
                let mut q = *p;
                for f in list.iter().rev() {
                    q = f.eval(&q)?;
                }
                q
            }
            Diffeo::Flow(field, t) => flow(*field, *t, p),
            Diffeo::Hamiltonian(s) => s.eval(p)?,
            Diffeo::Reparam {
                field,
                amplitude,
                scale,
            } => {
                let a = amplitude.value(p)?;
                flow(*field, scale * a, p)
            }
            Diffeo::Inverse(f) => invert_point(f, p, p, NEWTON_TOL)?,
            Diffeo::Restricted(f, bbox) => {
                if !bbox.contains(p) {
                    return Err(Error::OutsideDomain {
                        point: [p.x, p.y, p.z],
                    });
                }
                f.eval(p)?
            }
            Diffeo::Custom(f) => f.eval(p)?,
        };
        check_finite("map value", &q)?;
        Ok(q)
    }

    pub fn eval_jac(&self, p: &Point) -> Result<(Point, Matrix3<f64>)> {
        let out = match self {
            Diffeo::Identity => (*p, Matrix3::identity()),
            Diffeo::Builtin(b) => b.eval_jac(p),
            Diffeo::Parsed(m, t) => {
                let v = [p.x, p.y, p.z, *t];
                (Point::from(m.eval(&v)), m.jacobian(&v))
            }
            Diffeo::Compose(list) => {
                let mut q = *p;
                let mut j = Matrix3::identity();
                for f in list.iter().rev() {
                    let (q2, jf) = f.eval_jac(&q)?;
                    q = q2;
                    j = jf * j;
                }
                (q, j)
            }
            Diffeo::Flow(field, t) => flow_jacobian(*field, *t, p),
            Diffeo::Hamiltonian(s) => s.eval_jac(p)?,
            Diffeo::Reparam {
                field,
                amplitude,
                scale,
            } => {
                let (a, grad) = amplitude.value_grad(p)?;
                let (q, jf) = flow_jacobian(*field, scale * a, p);
                let v = frame_eval(*field, &q).vec;
                (q, jf + v * (grad * *scale).transpose())
            }
            Diffeo::Inverse(f) => {
                let p0 = invert_point(f, p, p, NEWTON_TOL)?;
                let (_, j) = f.eval_jac(&p0)?;
                let inv = j.try_inverse().ok_or(Error::InversionFailed {
                    target: [p.x, p.y, p.z],
                    reason: InversionFailure::Singular {
                        condition: f64::INFINITY,
                    },
                })?;
                (p0, inv)
            }
            Diffeo::Restricted(f, bbox) => {
                if !bbox.contains(p) {
                    return Err(Error::OutsideDomain {
                        point: [p.x, p.y, p.z],
                    });
                }
                f.eval_jac(p)?
            }
            Diffeo::Custom(f) => f.eval_jac(p)?,
        };
        check_finite("map value", &out.0)?;
        if !out.1.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite {
                what: "jacobian",
                point: [p.x, p.y, p.z],
            });
        }
        Ok(out)
    }

    /// `self o inner`, flattening nested compositions and identities.
    pub fn compose(&self, inner: &Diffeo) -> Diffeo {
        let mut list: Vec<Diffeo> = Vec::new();
        for d in [self, inner] {
            match d {
                Diffeo::Identity => {}
                Diffeo::Compose(xs) => list.extend(xs.iter().cloned()),
                other => list.push(other.clone()),
            }
        }
        match list.len() {
            0 => Diffeo::Identity,
            1 => list.pop().unwrap_or(Diffeo::Identity),
            _ => Diffeo::Compose(list.into()),
        }
    }

    /// Composition of a list, outermost first.
    pub fn compose_all(maps: &[Diffeo]) -> Diffeo {
        maps.iter()
            .rev()
            .fold(Diffeo::Identity, |acc, f| f.compose(&acc))
    }

    /// Inverse map, in closed form where one exists.
    pub fn inverse(&self) -> Diffeo {
        match self {
            Diffeo::Identity => Diffeo::Identity,
            Diffeo::Builtin(Builtin::Reeb { t }) => Diffeo::reeb(-t),
            Diffeo::Builtin(Builtin::Shear { c }) => Diffeo::Builtin(Builtin::Shear { c: -c }),
            Diffeo::Builtin(Builtin::Dilation { lambda }) => {
                Diffeo::Builtin(Builtin::Dilation { lambda: 1.0 / lambda })
            }
            Diffeo::Flow(field, t) => Diffeo::Flow(*field, -t),
            Diffeo::Inverse(f) => (**f).clone(),
            Diffeo::Compose(list) => Diffeo::compose_all(
                &list.iter().rev().map(|f| f.inverse()).collect::<Vec<_>>(),
            ),
            other => Diffeo::Inverse(Arc::new(other.clone())),
        }
    }

    /// The time `t` when the map is a Reeb translation `(x, y, z + t)`.
    pub fn reeb_time(&self) -> Option<f64> {
        match self {
            Diffeo::Identity => Some(0.0),
            Diffeo::Builtin(Builtin::Reeb { t }) | Diffeo::Flow(FrameField::Reeb, t) => Some(*t),
            Diffeo::Compose(list) => list
                .iter()
                .try_fold(0.0, |acc, f| f.reeb_time().map(|t| acc + t)),
            _ => None,
        }
    }

    /// Radius outside of which the map is known to be the identity.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Diffeo::Identity => Some(0.0),
            Diffeo::Builtin(Builtin::BumpShear { outer, .. }) => Some(*outer),
            Diffeo::Hamiltonian(s) => s.h.support_radius(),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Diffeo::Identity => "id".into(),
            Diffeo::Builtin(b) => match b {
                Builtin::Reeb { t } => format!("reeb:{t}"),
                Builtin::Shear { c } => format!("shear:{c}"),
                Builtin::Dilation { lambda } => format!("dilation:{lambda}"),
                Builtin::BumpShear { c, inner, outer } => format!("bumpshear:{c}:{inner}:{outer}"),
            },
            Diffeo::Parsed(m, t) if *t == 0.0 => m.to_string(),
            Diffeo::Parsed(m, t) => format!("{m} at t = {t}"),
            Diffeo::Compose(list) => list
                .iter()
                .map(|f| f.describe())
                .collect::<Vec<_>>()
                .join(" o "),
            Diffeo::Flow(field, t) => format!("flow[{field:?}]({t})"),
            Diffeo::Hamiltonian(s) => format!("hamiltonian flow({})", s.time()),
            Diffeo::Reparam { field, scale, .. } => format!("reparam[{field:?}]({scale})"),
            Diffeo::Inverse(f) => format!("({})^-1", f.describe()),
            Diffeo::Restricted(f, _) => f.describe(),
            Diffeo::Custom(f) => f.describe(),
        }
    }
}

impl From<Builtin> for Diffeo {
    fn from(b: Builtin) -> Self {
        Diffeo::Builtin(b)
    }
}

/// Default Newton tolerance.
pub const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;
const NEWTON_MAX_HALVINGS: usize = 20;
const NEWTON_MAX_CONDITION: f64 = 1e12;

fn norm_inf(m: &Matrix3<f64>) -> f64 {
    (0..3)
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Induced infinity norm (largest absolute row sum).
pub fn operator_norm(m: &Matrix3<f64>) -> f64 {
    norm_inf(m)
}

/// Damped Newton solve of `f(p) = q` starting from `guess`.
pub fn invert_point(f: &Diffeo, q: &Point, guess: &Point, tol: f64) -> Result<Point> {
    let fail = |reason| Error::InversionFailed {
        target: [q.x, q.y, q.z],
        reason,
    };
    // rounding floor for the residual at the scale of q
    let floor = 8.0 * f64::EPSILON * (1.0 + q.coords.norm());
    let tol = tol.max(floor);
    let mut p = *guess;
    let mut residual = f64::INFINITY;
    for it in 0..NEWTON_MAX_ITER {
        let (fp, j) = f.eval_jac(&p)?;
        let r = fp - q;
        residual = r.norm();
        if residual <= tol {
            return Ok(p);
        }
        let inv = j.try_inverse().ok_or_else(|| {
            fail(InversionFailure::Singular {
                condition: f64::INFINITY,
            })
        })?;
        let condition = norm_inf(&j) * norm_inf(&inv);
        if !(condition <= NEWTON_MAX_CONDITION) {
            return Err(fail(InversionFailure::Singular { condition }));
        }
        let dp = -(inv * r);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=NEWTON_MAX_HALVINGS {
            let cand = p + dp * lambda;
            if let Ok(fc) = f.eval(&cand) {
                if (fc - q).norm() < residual {
                    p = cand;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            // stalled at rounding level: accept if close to the floor
            if residual <= 1e3 * tol {
                return Ok(p);
            }
            return Err(fail(InversionFailure::NoConvergence {
                residual,
                iterations: it + 1,
            }));
        }
    }
    Err(fail(InversionFailure::NoConvergence {
        residual,
        iterations: NEWTON_MAX_ITER,
    }))
}

/// Sup-norm deviation of a map from the identity on a point set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NearIdentityReport {
    pub within: bool,
    pub delta: f64,
    pub max_displacement: f64,
    pub max_displacement_at: [f64; 3],
    pub max_jacobian_deviation: f64,
    pub max_jacobian_deviation_at: [f64; 3],
}

/// Displacement `|f(p) - p|` and Jacobian deviation `|Df(p) - I|` (induced
/// infinity norm) maximised over `points`.
pub fn deviation_stats(f: &Diffeo, points: &[Point]) -> Result<NearIdentityReport> {
    let mut rep = NearIdentityReport {
        within: true,
        delta: f64::INFINITY,
        max_displacement: 0.0,
        max_displacement_at: [0.0; 3],
        max_jacobian_deviation: 0.0,
        max_jacobian_deviation_at: [0.0; 3],
    };
    for p in points {
        let (q, j) = f.eval_jac(p)?;
        let d = (q - p).norm();
        let jd = norm_inf(&(j - Matrix3::identity()));
        if d > rep.max_displacement {
            rep.max_displacement = d;
            rep.max_displacement_at = [p.x, p.y, p.z];
        }
        if jd > rep.max_jacobian_deviation {
            rep.max_jacobian_deviation = jd;
            rep.max_jacobian_deviation_at = [p.x, p.y, p.z];
        }
    }
    Ok(rep)
}

/// Whether `f` is within `delta` of the identity in displacement and
/// Jacobian over the grid.
pub fn check_near_identity(f: &Diffeo, grid: &Grid, delta: f64) -> Result<NearIdentityReport> {
    let mut rep = deviation_stats(f, &grid.points())?;
    rep.delta = delta;
    rep.within = rep.max_displacement <= delta && rep.max_jacobian_deviation <= delta;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_parsed_examples() {
        let p = Point::new(1.0, 2.0, 3.0);
        let (q, j) = Diffeo::Identity.eval_jac(&p).unwrap();
        assert_eq!(q, p);
        assert_eq!(j, Matrix3::identity());
        let f = Diffeo::parse("(x, y+0.1, z)").unwrap();
        let (q, j) = f.eval_jac(&Point::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(q, Point::new(1.0, 0.1, 0.0));
        assert_eq!(j, Matrix3::identity());
    }

    #[test]
    fn y_flow_slice_jacobian() {
        let f = Diffeo::Flow(FrameField::Y, 1.0);
        let (q, j) = f.eval_jac(&Point::new(2.0, 0.0, 0.0)).unwrap();
        assert_eq!(q, Point::new(2.0, 1.0, -2.0));
        assert_eq!(j.row(2).iter().copied().collect::<Vec<_>>(), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn inversion_examples() {
        let q = Point::new(1.0, 2.0, 3.0);
        assert_eq!(invert_point(&Diffeo::Identity, &q, &q, 1e-12).unwrap(), q);
        let r = Diffeo::reeb(0.2);
        let p = invert_point(&r, &Point::new(0.0, 0.0, 0.2), &Point::new(0.0, 0.0, 0.2), 1e-12)
            .unwrap();
        assert!(p.coords.norm() < 1e-15);
    }

    #[test]
    fn singular_map_is_reported() {
        let f = Diffeo::parse("(x^3, y, z)").unwrap();
        let err = invert_point(&f, &Point::new(1.0, 0.0, 0.0), &Point::origin(), 1e-12).unwrap_err();
        assert!(matches!(
            err,
            Error::InversionFailed {
                reason: InversionFailure::Singular { .. },
                ..
            }
        ));
    }

    #[test]
    fn near_identity_examples() {
        let g = Grid::cube(1.0, 5);
        let rep = check_near_identity(&Diffeo::Identity, &g, 0.1).unwrap();
        assert!(rep.within);
        assert_eq!(rep.max_displacement, 0.0);
        let rep = check_near_identity(&Diffeo::reeb(10.0), &g, 0.5).unwrap();
        assert!(!rep.within);
        assert_eq!(rep.max_displacement, 10.0);
        let rep = check_near_identity(&Diffeo::parse("(x, y + 0.1, z)").unwrap(), &g, 0.2).unwrap();
        assert!(rep.within);
        assert!((rep.max_displacement - 0.1).abs() < 1e-15);
        assert_eq!(rep.max_jacobian_deviation, 0.0);
    }

    #[test]
    fn builtin_specs_parse() {
        assert!(matches!(Diffeo::builtin("id").unwrap(), Diffeo::Identity));
        assert_eq!(Diffeo::builtin("reeb:0.2").unwrap().reeb_time(), Some(0.2));
        assert!(Diffeo::builtin("dilation:-1").is_err());
        assert!(Diffeo::builtin("nope:1").is_err());
        assert!(matches!(
            Diffeo::builtin("flow:y:1").unwrap(),
            Diffeo::Flow(FrameField::Y, t) if t == 1.0
        ));
    }

    #[test]
    fn composition_is_associative() {
        let f = Diffeo::parse("(x + sin(y), y, z)").unwrap();
        let g = Diffeo::Flow(FrameField::Y, 0.3);
        let h = Diffeo::parse("(x, y, z + x*y)").unwrap();
        let a = f.compose(&g).compose(&h);
        let b = f.compose(&g.compose(&h));
        let p = Point::new(0.3, -0.2, 0.9);
        assert_eq!(a.eval(&p).unwrap(), b.eval(&p).unwrap());
        assert_eq!(a.eval(&p).unwrap(), f.eval(&g.eval(&h.eval(&p).unwrap()).unwrap()).unwrap());
    }
}
