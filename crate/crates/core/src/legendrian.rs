//! Legendrian curves in `J^1 R = R^3` and their transport along paths.
//!
//! With `alpha = dz + x dy` the 1-jet of `u(y)` is `y -> (-u'(y), y, u(y))`
//! with tangent `(-u''(y), 1, u'(y))`, on which alpha vanishes identically.

use serde::{Deserialize, Serialize};

use crate::contact::{check_finite, Point, Tangent, Vector};
use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr, Var};
use crate::grid::Aabb;
use crate::paths::{classify_alphas, AlphaPoint, AlphaStats, DiffeoPath, Exactness, Verdict};

/// A profile `u(y)` with its first two derivatives.
#[derive(Clone, Debug)]
pub struct Jet {
    u: Expr,
    du: Expr,
    ddu: Expr,
}

impl Jet {
    /// Parses an expression in `y` alone.
    pub fn parse(src: &str) -> Result<Self> {
        Ok(Self::new(parse_expr(src, &[Var::Y])?))
    }

    pub fn new(u: Expr) -> Self {
        let du = u.derivative(Var::Y);
        let ddu = du.derivative(Var::Y);
        Self { u, du, ddu }
    }

    /// `(u, u', u'')` at `y`.
    pub fn eval(&self, y: f64) -> [f64; 3] {
        let v = [0.0, y, 0.0, 0.0];
        [self.u.eval(&v), self.du.eval(&v), self.ddu.eval(&v)]
    }
}

impl std::fmt::Display for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.u)
    }
}

/// Equispaced parameters `y` on `[lo, hi]`, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetSampling {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for JetSampling {
    fn default() -> Self {
        Self {
            lo: -1.0,
            hi: 1.0,
            n: 21,
        }
    }
}

impl JetSampling {
    pub fn params(&self) -> Vec<f64> {
        match self.n {
            0 => Vec::new(),
            1 => vec![0.5 * (self.lo + self.hi)],
            n => (0..n)
                .map(|i| {
                    if i + 1 == n {
                        self.hi
                    } else {
                        self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LegendrianSample {
    pub points: Vec<Point>,
    pub tangents: Vec<Tangent>,
    pub params: Vec<f64>,
}

impl LegendrianSample {
    /// Largest `|alpha(v)| / |v|` over the tangents.
    pub fn max_tangent_alpha(&self) -> f64 {
        self.tangents
            .iter()
            .map(|t| t.alpha().abs() / t.vec.norm().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

pub fn jet_legendrian(jet: &Jet, sampling: &JetSampling) -> Result<LegendrianSample> {
    let params = sampling.params();
    let mut points = Vec::with_capacity(params.len());
    let mut tangents = Vec::with_capacity(params.len());
    for &y in &params {
        let [u, du, ddu] = jet.eval(y);
        let p = Point::new(-du, y, u);
        let v = Vector::new(-ddu, 1.0, du);
        check_finite("jet point", &p)?;
        check_finite("jet tangent", &Point::from(v))?;
        points.push(p);
        tangents.push(Tangent::new(p, v));
    }
    Ok(LegendrianSample {
        points,
        tangents,
        params,
    })
}

/// `t -> P_t(L)` sampled on a time grid, with the velocity of every point.
#[derive(Clone, Debug, PartialEq)]
pub struct IsotopySample {
    pub times: Vec<f64>,
    /// The source curve, before transport.
    pub source: LegendrianSample,
    pub slices: Vec<LegendrianSample>,
    pub velocities: Vec<Vec<Vector>>,
    pub alphas: Vec<Vec<f64>>,
    pub exactness: Vec<Vec<Exactness>>,
}

/// One JSONL record of an isotopy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsotopyRecord {
    pub t: f64,
    pub parameter: f64,
    pub point: [f64; 3],
    pub velocity: [f64; 3],
    pub alpha: f64,
    /// alpha of the transported tangent, relative to its length.
    pub tangent_alpha: f64,
    pub exactness: Exactness,
}

impl IsotopySample {
    pub fn records(&self) -> Vec<IsotopyRecord> {
        let mut out = Vec::new();
        for (k, &t) in self.times.iter().enumerate() {
            let slice = &self.slices[k];
            for i in 0..slice.points.len() {
                let p = slice.points[i];
                let v = self.velocities[k][i];
                let tan = &slice.tangents[i];
                out.push(IsotopyRecord {
                    t,
                    parameter: slice.params[i],
                    point: [p.x, p.y, p.z],
                    velocity: [v.x, v.y, v.z],
                    alpha: self.alphas[k][i],
                    tangent_alpha: tan.alpha() / tan.vec.norm().max(f64::MIN_POSITIVE),
                    exactness: self.exactness[k][i],
                });
            }
        }
        out
    }

    /// Largest relative tangent alpha over all transported slices.
    pub fn max_tangent_alpha(&self) -> f64 {
        self.slices
            .iter()
            .map(LegendrianSample::max_tangent_alpha)
            .fold(0.0, f64::max)
    }
}

/// Applies every slice of `path` to the sample points and tangents. With
/// `bbox`, transported points must stay inside it.
pub fn transport(
    l: &LegendrianSample,
    path: &DiffeoPath,
    times: &[f64],
    bbox: Option<&Aabb>,
) -> Result<IsotopySample> {
    let mut slices = Vec::with_capacity(times.len());
    let mut velocities = Vec::with_capacity(times.len());
    let mut alphas = Vec::with_capacity(times.len());
    let mut exactness = Vec::with_capacity(times.len());
    for &t in times {
        let mut pts = Vec::with_capacity(l.points.len());
        let mut tans = Vec::with_capacity(l.points.len());
        let mut vel = Vec::with_capacity(l.points.len());
        let mut al = Vec::with_capacity(l.points.len());
        let mut ex = Vec::with_capacity(l.points.len());
        for (p, tan) in l.points.iter().zip(&l.tangents) {
            let (v, j) = path.velocity_jac(t, p)?;
            if let Some(b) = bbox {
                if !b.contains(&v.image) {
                    return Err(Error::OutsideDomain {
                        point: [v.image.x, v.image.y, v.image.z],
                    });
                }
            }
            pts.push(v.image);
            tans.push(Tangent::new(v.image, j * tan.vec));
            vel.push(v.vec);
            al.push(v.alpha);
            ex.push(v.exactness);
        }
        slices.push(LegendrianSample {
            points: pts,
            tangents: tans,
            params: l.params.clone(),
        });
        velocities.push(vel);
        alphas.push(al);
        exactness.push(ex);
    }
    Ok(IsotopySample {
        times: times.to_vec(),
        source: l.clone(),
        slices,
        velocities,
        alphas,
        exactness,
    })
}

/// Verdict over all `(t, point)` alphas, with the rules of path
/// classification.
pub fn isotopy_classify(iso: &IsotopySample, tol: f64) -> (Verdict, AlphaStats) {
    let mut pts = Vec::new();
    for (k, &t) in iso.times.iter().enumerate() {
        for (i, p) in iso.source.points.iter().enumerate() {
            pts.push(AlphaPoint {
                t,
                p: *p,
                alpha: iso.alphas[k][i],
                exactness: iso.exactness[k][i],
            });
        }
    }
    classify_alphas(&pts, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::time_grid;

    #[test]
    fn zero_jet_is_the_y_axis() {
        let l = jet_legendrian(&Jet::parse("0").unwrap(), &JetSampling::default()).unwrap();
        assert!(l.points.iter().all(|p| p.x == 0.0 && p.z == 0.0));
        assert!(l.tangents.iter().all(|t| t.vec == Vector::new(0.0, 1.0, 0.0)));
        assert_eq!(l.max_tangent_alpha(), 0.0);
    }

    #[test]
    fn parabola_jet() {
        let l = jet_legendrian(&Jet::parse("y^2/2").unwrap(), &JetSampling::default()).unwrap();
        for (p, &y) in l.points.iter().zip(&l.params) {
            assert_eq!(*p, Point::new(-y, y, y * y / 2.0));
        }
        assert_eq!(l.max_tangent_alpha(), 0.0);
        assert!(Jet::parse("x + y").is_err());
    }

    #[test]
    fn reeb_push_is_positive_and_reverse_mixed() {
        let l = jet_legendrian(&Jet::parse("sin(y)").unwrap(), &JetSampling::default()).unwrap();
        let times = time_grid(5);
        let iso = transport(&l, &DiffeoPath::reeb(0.5), &times, None).unwrap();
        assert_eq!(isotopy_classify(&iso, 1e-9).0, Verdict::Positive);
        let back = crate::paths::concat_unchecked(&[
            DiffeoPath::reeb(0.5),
            DiffeoPath::reeb(0.5).reversed(),
        ]);
        let iso = transport(&l, &back, &time_grid(9), None).unwrap();
        assert_eq!(isotopy_classify(&iso, 1e-9).0, Verdict::Mixed);
        let still = transport(&l, &DiffeoPath::stationary(), &times, None).unwrap();
        assert_eq!(isotopy_classify(&still, 0.0).0, Verdict::Null);
    }
}
