//! Factorization of a near-identity diffeomorphism into five horizontal
//! flows:
//!
//! ```text
//! f = phi^X_{a1} o phi^Y_{a2} o phi^X_eps o phi^Y_{a3} o phi^X_{-eps}
//! ```
//!
//! with `a1 = tau1 o Phi2^-1`, `a2 = tau2 o Phi1^-1`, `a3 = tau3 o phi^X_eps`
//! and
//!
//! ```text
//! tau1 = f_x - x
//! tau3 = (f_z - z + x (f_y - y)) / eps
//! tau2 = (f_y - y) - tau3
//! Phi1(p) = phi^Z_{tau3(p)}(p) = (x, y + tau3, z + (eps - x) tau3)
//! Phi2(p) = phi^Y_{tau2(p)}(Phi1(p)) = (x, f_y, f_z)
//! ```

use std::fmt;
use std::num::NonZeroUsize;
use std::sync::Arc;

use lru::LruCache;
use nalgebra::{Matrix3, Vector3};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::contact::{flow, FrameField, Point};
use crate::diffeo::{deviation_stats, invert_point, operator_norm, Diffeo, NearIdentityReport, SmoothMap};
use crate::error::{Error, InversionFailure, Result};
use crate::field::ScalarField;
use crate::grid::Grid;

/// How the two `eps` translations along `d/dx` are realised.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Translation {
    /// The global flow of `d/dx`.
    #[default]
    Global,
    /// The flow of `chi d/dx`; agrees with the global translation wherever
    /// the amplitudes are supported as long as that region sits inside
    /// radius `inner` (checked a posteriori by the residual).
    Cutoff { inner: f64, outer: f64 },
}

impl Translation {
    pub fn field(&self) -> FrameField {
        match *self {
            Translation::Global => FrameField::X,
            Translation::Cutoff { inner, outer } => FrameField::CutoffX { inner, outer },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizeOptions {
    /// Largest accepted `|f(p) - p|` on the grid.
    pub displacement_bound: f64,
    /// Largest accepted `|Df - I|`, `|DPhi1 - I|`, `|DPhi2 - I|` (induced
    /// infinity norm). Below 1 each map is injective on convex sets.
    pub jacobian_bound: f64,
    /// Largest accepted sup-error of the five-factor composition on the grid.
    pub residual_tol: f64,
    pub newton_tol: f64,
    pub translation: Translation,
}

impl Default for FactorizeOptions {
    fn default() -> Self {
        Self {
            displacement_bound: 1.0,
            jacobian_bound: 0.75,
            residual_tol: 1e-6,
            newton_tol: 1e-12,
            translation: Translation::Global,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TauIndex {
    A1,
    A2,
    A3,
}

const MEMO_CAPACITY: usize = 1 << 17;

type MemoKey = (TauIndex, [u64; 3]);

/// Shared state behind the amplitudes of one factorization.
pub struct FactorCore {
    f: Diffeo,
    eps: f64,
    newton_tol: f64,
    memo: Mutex<LruCache<MemoKey, (f64, Vector3<f64>)>>,
}

impl fmt::Debug for FactorCore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FactorCore")
            .field("f", &self.f.describe())
            .field("eps", &self.eps)
            .finish()
    }
}

struct TauJet {
    tau: [f64; 3],
    grad: [Vector3<f64>; 3],
    f: Point,
    df: Matrix3<f64>,
}

impl FactorCore {
    fn new(f: Diffeo, eps: f64, newton_tol: f64) -> Self {
        Self {
            f,
            eps,
            newton_tol,
            memo: Mutex::new(LruCache::new(
                NonZeroUsize::new(MEMO_CAPACITY).expect("nonzero capacity"),
            )),
        }
    }

    fn tau(&self, p: &Point) -> Result<[f64; 3]> {
        let q = self.f.eval(p)?;
        Ok(tau_from(p, &q, self.eps))
    }

    fn jet(&self, p: &Point) -> Result<TauJet> {
        let (q, df) = self.f.eval_jac(p)?;
        let tau = tau_from(p, &q, self.eps);
        let r0 = df.row(0).transpose();
        let r1 = df.row(1).transpose();
        let r2 = df.row(2).transpose();
        let g1 = r0 - Vector3::x();
        let g3 = (r2 - Vector3::z() + Vector3::x() * (q.y - p.y) + (r1 - Vector3::y()) * p.x)
            / self.eps;
        let g2 = r1 - Vector3::y() - g3;
        Ok(TauJet {
            tau,
            grad: [g1, g2, g3],
            f: q,
            df,
        })
    }

    fn phi1_from(&self, p: &Point, jet: &TauJet) -> (Point, Matrix3<f64>) {
        let t3 = jet.tau[2];
        let g3 = jet.grad[2];
        let q = Point::new(p.x, p.y + t3, p.z + (self.eps - p.x) * t3);
        let mut j = Matrix3::identity();
        j.set_row(1, &(Vector3::y() + g3).transpose());
        j.set_row(
            2,
            &(Vector3::z() + g3 * (self.eps - p.x) - Vector3::x() * t3).transpose(),
        );
        (q, j)
    }

    fn phi2_from(&self, p: &Point, jet: &TauJet) -> (Point, Matrix3<f64>) {
        let q = Point::new(p.x, jet.f.y, jet.f.z);
        let mut j = jet.df;
        j.set_row(0, &Vector3::x().transpose());
        (q, j)
    }

    fn phi1(&self, p: &Point) -> Result<(Point, Matrix3<f64>)> {
        Ok(self.phi1_from(p, &self.jet(p)?))
    }

    fn phi2(&self, p: &Point) -> Result<(Point, Matrix3<f64>)> {
        Ok(self.phi2_from(p, &self.jet(p)?))
    }

    fn phi1_point(&self, p: &Point) -> Result<Point> {
        let t3 = self.tau(p)?[2];
        Ok(Point::new(p.x, p.y + t3, p.z + (self.eps - p.x) * t3))
    }

    fn phi2_point(&self, p: &Point) -> Result<Point> {
        let q = self.f.eval(p)?;
        Ok(Point::new(p.x, q.y, q.z))
    }

    fn amplitude(self: &Arc<Self>, which: TauIndex, q: &Point) -> Result<(f64, Vector3<f64>)> {
        let key = (which, [q.x.to_bits(), q.y.to_bits(), q.z.to_bits()]);
        if let Some(v) = self.memo.lock().get(&key) {
            return Ok(*v);
        }
        let out = match which {
            TauIndex::A3 => {
                let jet = self.jet(&Point::new(q.x + self.eps, q.y, q.z))?;
                (jet.tau[2], jet.grad[2])
            }
            TauIndex::A2 | TauIndex::A1 => {
                let phi = Diffeo::Custom(Arc::new(Phi {
                    core: self.clone(),
                    second: which == TauIndex::A1,
                }));
                let p = invert_point(&phi, q, q, self.newton_tol)?;
                let jet = self.jet(&p)?;
                let (k, j) = if which == TauIndex::A1 {
                    (0, self.phi2_from(&p, &jet).1)
                } else {
                    (1, self.phi1_from(&p, &jet).1)
                };
                let jt_inv = j.transpose().try_inverse().ok_or(Error::InversionFailed {
                    target: [q.x, q.y, q.z],
                    reason: InversionFailure::Singular {
                        condition: f64::INFINITY,
                    },
                })?;
                (jet.tau[k], jt_inv * jet.grad[k])
            }
        };
        self.memo.lock().put(key, out);
        Ok(out)
    }
}

fn tau_from(p: &Point, q: &Point, eps: f64) -> [f64; 3] {
    let dy = q.y - p.y;
    let t3 = (q.z - p.z + p.x * dy) / eps;
    [q.x - p.x, dy - t3, t3]
}

#[derive(Debug)]
struct Phi {
    core: Arc<FactorCore>,
    second: bool,
}

impl SmoothMap for Phi {
    fn eval_jac(&self, p: &Point) -> Result<(Point, Matrix3<f64>)> {
        if self.second {
            self.core.phi2(p)
        } else {
            self.core.phi1(p)
        }
    }

    fn eval(&self, p: &Point) -> Result<Point> {
        if self.second {
            self.core.phi2_point(p)
        } else {
            self.core.phi1_point(p)
        }
    }

    fn describe(&self) -> String {
        format!("Phi{}", if self.second { 2 } else { 1 })
    }
}

/// Scalar amplitude of a reparametrised flow `phi^F_{a(p)}`.
#[derive(Clone, Debug)]
pub enum Amplitude {
    Const(f64),
    Field(ScalarField),
    Tau(Arc<FactorCore>, TauIndex),
}

impl Amplitude {
    pub fn value(&self, p: &Point) -> Result<f64> {
        match self {
            Amplitude::Const(c) => Ok(*c),
            Amplitude::Field(f) => Ok(f.value(p)),
            Amplitude::Tau(core, which) => core.amplitude(*which, p).map(|v| v.0),
        }
    }

    pub fn value_grad(&self, p: &Point) -> Result<(f64, Vector3<f64>)> {
        match self {
            Amplitude::Const(c) => Ok((*c, Vector3::zeros())),
            Amplitude::Field(f) => Ok((f.value(p), f.gradient(p))),
            Amplitude::Tau(core, which) => core.amplitude(*which, p),
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Amplitude::Const(c) => Some(*c),
            _ => None,
        }
    }
}

/// `(tau1, tau2, tau3)` of `f` at `p`.
pub fn compute_tau(f: &Diffeo, eps: f64, p: &Point) -> Result<[f64; 3]> {
    check_eps(eps)?;
    Ok(tau_from(p, &f.eval(p)?, eps))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")))
    }
}

#[derive(Clone, Debug)]
pub struct PhiMaps {
    pub phi1: Diffeo,
    pub phi2: Diffeo,
}

pub fn build_phi(f: &Diffeo, eps: f64) -> Result<PhiMaps> {
    check_eps(eps)?;
    let core = Arc::new(FactorCore::new(f.clone(), eps, crate::diffeo::NEWTON_TOL));
    Ok(PhiMaps {
        phi1: Diffeo::Custom(Arc::new(Phi {
            core: core.clone(),
            second: false,
        })),
        phi2: Diffeo::Custom(Arc::new(Phi { core, second: true })),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorizationReport {
    pub eps: f64,
    pub grid_points: usize,
    pub source: NearIdentityReport,
    pub phi1_jacobian_deviation: f64,
    pub phi2_jacobian_deviation: f64,
    pub residual_sup: f64,
    pub residual_at: [f64; 3],
}

/// One factor `p -> phi^field_{scale * a(p)}(p)` of the composition.
#[derive(Clone, Debug)]
pub struct Factor {
    pub field: FrameField,
    pub amplitude: Amplitude,
    pub scale: f64,
}

impl Factor {
    pub fn to_diffeo(&self) -> Diffeo {
        Diffeo::Reparam {
            field: self.field,
            amplitude: self.amplitude.clone(),
            scale: self.scale,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Factorization {
    pub eps: f64,
    pub translation: Translation,
    core: Arc<FactorCore>,
    pub report: FactorizationReport,
}

impl Factorization {
    pub fn source(&self) -> &Diffeo {
        &self.core.f
    }

    pub fn amplitude(&self, which: TauIndex) -> Amplitude {
        Amplitude::Tau(self.core.clone(), which)
    }

    /// The five factors in application order (rightmost first).
    pub fn factors(&self) -> [Factor; 5] {
        let t = self.translation.field();
        [
            Factor {
                field: t,
                amplitude: Amplitude::Const(1.0),
                scale: -self.eps,
            },
            Factor {
                field: FrameField::Y,
                amplitude: self.amplitude(TauIndex::A3),
                scale: 1.0,
            },
            Factor {
                field: t,
                amplitude: Amplitude::Const(1.0),
                scale: self.eps,
            },
            Factor {
                field: FrameField::Y,
                amplitude: self.amplitude(TauIndex::A2),
                scale: 1.0,
            },
            Factor {
                field: FrameField::X,
                amplitude: self.amplitude(TauIndex::A1),
                scale: 1.0,
            },
        ]
    }

    /// Evaluates the five-factor composition at `p`.
    pub fn eval(&self, p: &Point) -> Result<Point> {
        factorization_eval(self, p)
    }
}

pub fn factorization_eval(fac: &Factorization, p: &Point) -> Result<Point> {
    let t = fac.translation.field();
    let eps = fac.eps;
    let q0 = flow(t, -eps, p);
    let q1 = flow(FrameField::Y, fac.core.amplitude(TauIndex::A3, &q0)?.0, &q0);
    let q2 = flow(t, eps, &q1);
    let q3 = flow(FrameField::Y, fac.core.amplitude(TauIndex::A2, &q2)?.0, &q2);
    Ok(flow(FrameField::X, fac.core.amplitude(TauIndex::A1, &q3)?.0, &q3))
}

fn not_in(eps: f64, which: &'static str, value: f64, bound: f64, at: [f64; 3]) -> Error {
    Error::NotInNeighborhood {
        eps,
        which,
        value,
        bound,
        at,
    }
}

/// Factorizes `f` at `eps`, certifying the gates and the composition
/// residual on `grid`.
pub fn factorize(f: &Diffeo, eps: f64, grid: &Grid, opts: &FactorizeOptions) -> Result<Factorization> {
    check_eps(eps)?;
    let points = grid.points();
    let source = deviation_stats(f, &points)?;
    check_source(&source, eps, opts)?;
    factorize_checked(f, eps, &points, source, opts)
}

fn check_source(source: &NearIdentityReport, eps: f64, opts: &FactorizeOptions) -> Result<()> {
    if source.max_displacement > opts.displacement_bound {
        return Err(not_in(
            eps,
            "displacement",
            source.max_displacement,
            opts.displacement_bound,
            source.max_displacement_at,
        ));
    }
    if source.max_jacobian_deviation > opts.jacobian_bound {
        return Err(not_in(
            eps,
            "jacobian",
            source.max_jacobian_deviation,
            opts.jacobian_bound,
            source.max_jacobian_deviation_at,
        ));
    }
    Ok(())
}

fn factorize_checked(
    f: &Diffeo,
    eps: f64,
    points: &[Point],
    source: NearIdentityReport,
    opts: &FactorizeOptions,
) -> Result<Factorization> {
    let core = Arc::new(FactorCore::new(f.clone(), eps, opts.newton_tol));
    let mut dev = [0.0f64; 2];
    for p in points {
        let jet = core.jet(p)?;
        let maps = [core.phi1_from(p, &jet).1, core.phi2_from(p, &jet).1];
        for (k, j) in maps.iter().enumerate() {
            let d = operator_norm(&(j - Matrix3::identity()));
            if d > opts.jacobian_bound {
                let which = if k == 0 { "phi1 jacobian" } else { "phi2 jacobian" };
                return Err(not_in(eps, which, d, opts.jacobian_bound, [p.x, p.y, p.z]));
            }
            dev[k] = dev[k].max(d);
        }
    }
    let mut fac = Factorization {
        eps,
        translation: opts.translation,
        core,
        report: FactorizationReport {
            eps,
            grid_points: points.len(),
            source,
            phi1_jacobian_deviation: dev[0],
            phi2_jacobian_deviation: dev[1],
            residual_sup: 0.0,
            residual_at: [0.0; 3],
        },
    };
    let mut worst = (0.0f64, [0.0; 3]);
    for p in points {
        let r = (factorization_eval(&fac, p)? - f.eval(p)?).norm();
        if r > worst.0 || r.is_nan() {
            worst = (r, [p.x, p.y, p.z]);
        }
    }
    if !(worst.0 <= opts.residual_tol) {
        return Err(Error::ResidualExceeded {
            residual: worst.0,
            tol: opts.residual_tol,
            at: worst.1,
        });
    }
    fac.report.residual_sup = worst.0;
    fac.report.residual_at = worst.1;
    Ok(fac)
}

/// The ladder `1, 1/2, ..., 2^-20`.
pub fn epsilon_ladder() -> impl Iterator<Item = f64> {
    (0..=20).map(|k| 0.5f64.powi(k))
}

/// Largest ladder `eps` at which `factorize` succeeds, with the factorization.
pub fn auto_factorize(f: &Diffeo, grid: &Grid, opts: &FactorizeOptions) -> Result<Factorization> {
    let points = grid.points();
    let source = deviation_stats(f, &points)?;
    // the source gates do not depend on eps
    if check_source(&source, 1.0, opts).is_err() {
        return Err(Error::NoFeasibleEpsilon);
    }
    for eps in epsilon_ladder() {
        match factorize_checked(f, eps, &points, source.clone(), opts) {
            Ok(fac) => return Ok(fac),
            Err(
                Error::NotInNeighborhood { .. }
                | Error::ResidualExceeded { .. }
                | Error::InversionFailed { .. },
            ) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NoFeasibleEpsilon)
}

pub fn auto_epsilon(f: &Diffeo, grid: &Grid, opts: &FactorizeOptions) -> Result<f64> {
    auto_factorize(f, grid, opts).map(|fac| fac.eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::cube(1.0, 5)
    }

    #[test]
    fn tau_examples() {
        let p = Point::new(0.3, 0.4, -0.2);
        assert_eq!(compute_tau(&Diffeo::Identity, 0.5, &p).unwrap(), [0.0, 0.0, 0.0]);
        let t = compute_tau(&Diffeo::reeb(0.2), 0.5, &p).unwrap();
        assert_eq!(t, [0.0, -0.2 / 0.5, 0.2 / 0.5]);
        let shear = Diffeo::parse("(x, y+0.1, z)").unwrap();
        let t = compute_tau(&shear, 0.5, &Point::new(1.0, 0.0, 0.0)).unwrap();
        assert!((t[0]).abs() < 1e-16);
        assert!((t[1] + 0.1).abs() < 1e-15);
        assert!((t[2] - 0.2).abs() < 1e-15);
        assert!(compute_tau(&shear, 0.0, &p).is_err());
    }

    #[test]
    fn phi_examples() {
        let maps = build_phi(&Diffeo::reeb(0.2), 0.5).unwrap();
        let p = Point::new(1.0, 0.0, 0.0);
        let q1 = maps.phi1.eval(&p).unwrap();
        assert!((q1 - Point::new(1.0, 0.4, -0.2)).norm() < 1e-15);
        assert_eq!(maps.phi2.eval(&p).unwrap(), Point::new(1.0, 0.0, 0.2));
        let id = build_phi(&Diffeo::Identity, 0.5).unwrap();
        assert_eq!(id.phi1.eval(&p).unwrap(), p);
        assert_eq!(id.phi2.eval(&p).unwrap(), p);
    }

    #[test]
    fn phi2_inversion_of_shear() {
        let shear = Diffeo::parse("(x, y+0.1, z)").unwrap();
        let maps = build_phi(&shear, 0.5).unwrap();
        let q = Point::new(1.0, 0.1, 0.0);
        let p = invert_point(&maps.phi2, &q, &q, 1e-12).unwrap();
        assert!((maps.phi2.eval(&p).unwrap() - q).norm() <= 1e-12);
        assert!((p - Point::new(1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn phi_jacobians_match_differences() {
        let f = Diffeo::parse("(x + 0.02*sin(y), y + 0.05*z*x, z + 0.03*tanh(x*y))").unwrap();
        let maps = build_phi(&f, 0.5).unwrap();
        let p = Point::new(0.2, -0.4, 0.6);
        for m in [&maps.phi1, &maps.phi2] {
            let (_, j) = m.eval_jac(&p).unwrap();
            let d = 1e-6;
            for i in 0..3 {
                let mut a = p;
                let mut b = p;
                a[i] += d;
                b[i] -= d;
                let col = (m.eval(&a).unwrap() - m.eval(&b).unwrap()) / (2.0 * d);
                assert!((j.column(i) - col).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn reeb_factorization_is_constant() {
        let fac = factorize(&Diffeo::reeb(0.2), 0.5, &grid(), &FactorizeOptions::default()).unwrap();
        let p = Point::new(0.3, -0.5, 0.1);
        let a = |w| fac.amplitude(w).value(&p).unwrap();
        assert_eq!(a(TauIndex::A1), 0.0);
        assert!((a(TauIndex::A2) + 0.4).abs() < 1e-14);
        assert!((a(TauIndex::A3) - 0.4).abs() < 1e-14);
        let q = fac.eval(&Point::origin()).unwrap();
        assert!((q - Point::new(0.0, 0.0, 0.2)).norm() < 1e-15);
    }

    #[test]
    fn amplitude_gradients_match_differences() {
        let f = Diffeo::parse("(x + 0.02*sin(y), y + 0.05*z*x, z + 0.03*tanh(x*y))").unwrap();
        let fac = factorize(&f, 0.5, &grid(), &FactorizeOptions::default()).unwrap();
        let p = Point::new(0.25, 0.3, -0.4);
        for which in [TauIndex::A1, TauIndex::A2, TauIndex::A3] {
            let a = fac.amplitude(which);
            let (_, g) = a.value_grad(&p).unwrap();
            let d = 1e-6;
            for i in 0..3 {
                let mut u = p;
                let mut v = p;
                u[i] += d;
                v[i] -= d;
                let fd = (a.value(&u).unwrap() - a.value(&v).unwrap()) / (2.0 * d);
                assert!((g[i] - fd).abs() < 1e-7, "{which:?} {i}");
            }
        }
    }

    #[test]
    fn far_maps_are_rejected() {
        let err = auto_epsilon(&Diffeo::reeb(1e3), &grid(), &FactorizeOptions::default());
        assert_eq!(err.unwrap_err(), Error::NoFeasibleEpsilon);
        let err = factorize(&Diffeo::reeb(10.0), 0.5, &grid(), &FactorizeOptions::default());
        assert!(matches!(err, Err(Error::NotInNeighborhood { which: "displacement", .. })));
    }

    #[test]
    fn auto_epsilon_of_identity_is_one() {
        assert_eq!(
            auto_epsilon(&Diffeo::Identity, &grid(), &FactorizeOptions::default()).unwrap(),
            1.0
        );
    }
}
