//! Paths of diffeomorphisms `t -> P_t`, `t in [0, 1]`: pieces, products,
//! reversal, concatenation, right translation, velocities, classification
//! and Hofer length.

use std::sync::Arc;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::contact::{
    alpha_eval, flow, frame_eval, hamiltonian_vector_field, FrameField, Point, Vector,
};
use crate::diffeo::Diffeo;
use crate::error::{Error, Result};
use crate::factorize::Amplitude;
use crate::family::Family;
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::ode::HamiltonianSlice;
pub use crate::smooth::Warp;

/// Step of the finite-difference velocity on the unit time interval.
pub const FD_STEP: f64 = 1e-5;
/// Sup-norm tolerance for junctions in `concat`.
pub const JUNCTION_TOL: f64 = 1e-9;

/// The diffeomorphism family traced by one piece, in its own clock `tau`.
#[derive(Clone, Debug)]
pub enum Segment {
    Stationary,
    /// `tau -> (p -> phi^field_{tau * scale * a(p)}(p))`
    Reparam {
        field: FrameField,
        amplitude: Amplitude,
        scale: f64,
    },
    /// `tau -> RK4 flow of X_h for time tau * duration` in `nsteps` steps.
    Hamiltonian {
        h: ScalarField,
        duration: f64,
        nsteps: usize,
    },
    Family(Family),
    /// A whole path replayed on the piece clock.
    Sub(Arc<DiffeoPath>),
}

impl Segment {
    pub fn map_at(&self, tau: f64) -> Diffeo {
        match self {
            Segment::Stationary => Diffeo::Identity,
            Segment::Reparam {
                field,
                amplitude,
                scale,
            } => {
                if tau == 0.0 {
                    Diffeo::Identity
                } else {
                    Diffeo::Reparam {
                        field: *field,
                        amplitude: amplitude.clone(),
                        scale: tau * scale,
                    }
                }
            }
            Segment::Hamiltonian {
                h,
                duration,
                nsteps,
            } => {
                if tau == 0.0 {
                    Diffeo::Identity
                } else {
                    Diffeo::Hamiltonian(Arc::new(HamiltonianSlice {
                        h: h.clone(),
                        step: tau * duration / *nsteps as f64,
                        nsteps: *nsteps,
                    }))
                }
            }
            Segment::Family(f) => f.at(tau),
            Segment::Sub(p) => p.slice(tau),
        }
    }

    fn is_closed_form(&self) -> bool {
        match self {
            Segment::Stationary | Segment::Reparam { .. } => true,
            Segment::Sub(p) => p.is_closed_form(),
            Segment::Family(f) => matches!(f.generator(), Some(Generator::Frame(..))),
            Segment::Hamiltonian { .. } => false,
        }
    }

    fn generator(&self) -> Option<Generator<'_>> {
        match self {
            Segment::Hamiltonian { h, duration, .. } => Some(Generator::Hamiltonian(h, *duration)),
            Segment::Family(f) => f.generator(),
            _ => None,
        }
    }
}

/// Time-independent generator of a one-parameter segment, scaled by the
/// segment's rate.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Generator<'a> {
    Hamiltonian(&'a ScalarField, f64),
    Frame(FrameField, f64),
}

impl Generator<'_> {
    fn velocity(&self, image: &Point, rate: f64) -> Result<(Vector, Exactness)> {
        Ok(match *self {
            Generator::Hamiltonian(h, duration) => (
                hamiltonian_vector_field(h, image)?.vec * (duration * rate),
                Exactness::Integrator,
            ),
            Generator::Frame(field, r) => {
                (frame_eval(field, image).vec * (r * rate), Exactness::ClosedForm)
            }
        })
    }
}

/// A segment on `[t0, t1]` with clock `sigma((t - t0)/(t1 - t0))`, applied
/// after the fixed map `right`.
#[derive(Clone, Debug)]
pub struct Piece {
    pub t0: f64,
    pub t1: f64,
    pub segment: Segment,
    pub warp: Warp,
    pub right: Diffeo,
}

#[derive(Clone, Debug)]
pub enum DiffeoPath {
    Pieces(Vec<Piece>),
    /// Pointwise composition, outermost first: `P_t = A_t o B_t o ...`.
    Product(Vec<DiffeoPath>),
    /// `t -> P_{1 - t}`
    Reversed(Box<DiffeoPath>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exactness {
    ClosedForm,
    /// The generating field at the integrated image; differs from the
    /// derivative of the computed slices by the integrator error.
    Integrator,
    FiniteDifference,
}

/// Velocity of the trajectory `t -> P_t(p)` at `image = P_t(p)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocitySample {
    pub t: f64,
    pub p: Point,
    pub image: Point,
    pub vec: Vector,
    pub alpha: f64,
    pub exactness: Exactness,
}

impl VelocitySample {
    fn new(t: f64, p: Point, image: Point, vec: Vector, exactness: Exactness) -> Self {
        Self {
            t,
            p,
            image,
            vec,
            alpha: alpha_eval(&image, &vec),
            exactness,
        }
    }
}

impl DiffeoPath {
    pub fn single(segment: Segment, warp: Warp) -> Self {
        DiffeoPath::Pieces(vec![Piece {
            t0: 0.0,
            t1: 1.0,
            segment,
            warp,
            right: Diffeo::Identity,
        }])
    }

    pub fn stationary() -> Self {
        Self::single(Segment::Stationary, Warp::Linear)
    }

    /// `t -> phi^field_{t * amount}` with the given clock.
    pub fn frame_flow(field: FrameField, amount: f64, warp: Warp) -> Self {
        Self::single(
            Segment::Reparam {
                field,
                amplitude: Amplitude::Const(1.0),
                scale: amount,
            },
            warp,
        )
    }

    /// Reeb translation by `t * duration` on the identity clock.
    pub fn reeb(duration: f64) -> Self {
        Self::frame_flow(FrameField::Reeb, duration, Warp::Linear)
    }

    pub fn hamiltonian(h: ScalarField, duration: f64, nsteps: usize, warp: Warp) -> Self {
        Self::single(
            Segment::Hamiltonian {
                h,
                duration,
                nsteps: nsteps.max(1),
            },
            warp,
        )
    }

    pub fn from_family(family: Family, warp: Warp) -> Self {
        Self::single(Segment::Family(family), warp)
    }

    pub fn reversed(self) -> Self {
        match self {
            DiffeoPath::Reversed(inner) => *inner,
            other => DiffeoPath::Reversed(Box::new(other)),
        }
    }

    fn locate(pieces: &[Piece], t: f64) -> usize {
        pieces
            .partition_point(|pc| pc.t1 <= t)
            .min(pieces.len().saturating_sub(1))
    }

    fn clock(pc: &Piece, t: f64) -> (f64, f64) {
        let len = pc.t1 - pc.t0;
        let s = ((t - pc.t0) / len).clamp(0.0, 1.0);
        let (sigma, ds) = pc.warp.eval(s);
        (sigma, ds / len)
    }

    /// The time-`t` map.
    pub fn slice(&self, t: f64) -> Diffeo {
        match self {
            DiffeoPath::Pieces(pieces) => {
                if pieces.is_empty() {
                    return Diffeo::Identity;
                }
                let pc = &pieces[Self::locate(pieces, t)];
                let (sigma, _) = Self::clock(pc, t);
                pc.segment.map_at(sigma).compose(&pc.right)
            }
            DiffeoPath::Product(factors) => {
                Diffeo::compose_all(&factors.iter().map(|f| f.slice(t)).collect::<Vec<_>>())
            }
            DiffeoPath::Reversed(inner) => inner.slice(1.0 - t),
        }
    }

    pub fn start(&self) -> Diffeo {
        self.slice(0.0)
    }

    pub fn end(&self) -> Diffeo {
        self.slice(1.0)
    }

    /// Whether every velocity sample comes from a closed form.
    pub fn is_closed_form(&self) -> bool {
        match self {
            DiffeoPath::Pieces(pieces) => pieces.iter().all(|pc| pc.segment.is_closed_form()),
            DiffeoPath::Product(fs) => fs.iter().all(|f| f.is_closed_form()),
            DiffeoPath::Reversed(inner) => inner.is_closed_form(),
        }
    }

    /// Piece boundaries (sorted, deduplicated, including 0 and 1).
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = match self {
            DiffeoPath::Pieces(pieces) => {
                let mut v: Vec<f64> = pieces.iter().map(|pc| pc.t0).collect();
                v.extend(pieces.last().map(|pc| pc.t1));
                v
            }
            DiffeoPath::Product(fs) => fs.iter().flat_map(|f| f.breakpoints()).collect(),
            DiffeoPath::Reversed(inner) => inner.breakpoints().iter().map(|b| 1.0 - b).collect(),
        };
        out.push(0.0);
        out.push(1.0);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    pub fn piece_count(&self) -> usize {
        match self {
            DiffeoPath::Pieces(p) => p.len(),
            DiffeoPath::Product(fs) => fs.iter().map(|f| f.piece_count()).sum(),
            DiffeoPath::Reversed(inner) => inner.piece_count(),
        }
    }

    /// `t -> P_t o c`. Velocities, as fields on the image, are unchanged.
    pub fn right_translate(&self, c: &Diffeo) -> DiffeoPath {
        if matches!(c, Diffeo::Identity) {
            return self.clone();
        }
        match self {
            DiffeoPath::Pieces(pieces) => DiffeoPath::Pieces(
                pieces
                    .iter()
                    .map(|pc| Piece {
                        right: pc.right.compose(c),
                        ..pc.clone()
                    })
                    .collect(),
            ),
            DiffeoPath::Product(fs) => {
                let mut fs = fs.clone();
                if let Some(last) = fs.last_mut() {
                    *last = last.right_translate(c);
                }
                DiffeoPath::Product(fs)
            }
            DiffeoPath::Reversed(inner) => {
                DiffeoPath::Reversed(Box::new(inner.right_translate(c)))
            }
        }
    }

    /// Velocity at `(t, p)`: exact for closed-form pieces, otherwise a
    /// finite difference in `t`.
    pub fn velocity(&self, t: f64, p: &Point) -> Result<VelocitySample> {
        match self {
            DiffeoPath::Pieces(pieces) => {
                if pieces.is_empty() {
                    return Ok(VelocitySample::new(t, *p, *p, Vector::zeros(), Exactness::ClosedForm));
                }
                let pc = &pieces[Self::locate(pieces, t)];
                let (sigma, rate) = Self::clock(pc, t);
                match &pc.segment {
                    Segment::Stationary => {
                        let q = pc.right.eval(p)?;
                        Ok(VelocitySample::new(t, *p, q, Vector::zeros(), Exactness::ClosedForm))
                    }
                    Segment::Reparam {
                        field,
                        amplitude,
                        scale,
                    } => {
                        let q = pc.right.eval(p)?;
                        let a = amplitude.value(&q)?;
                        let image = flow(*field, sigma * scale * a, &q);
                        let vec = frame_eval(*field, &image).vec * (rate * scale * a);
                        Ok(VelocitySample::new(t, *p, image, vec, Exactness::ClosedForm))
                    }
                    Segment::Sub(sub) => {
                        let q = pc.right.eval(p)?;
                        let v = sub.velocity(sigma, &q)?;
                        Ok(VelocitySample::new(t, *p, v.image, v.vec * rate, v.exactness))
                    }
                    seg => match seg.generator() {
                        Some(g) => {
                            let q = pc.right.eval(p)?;
                            let image = seg.map_at(sigma).eval(&q)?;
                            let (vec, ex) = g.velocity(&image, rate)?;
                            Ok(VelocitySample::new(t, *p, image, vec, ex))
                        }
                        None => self.velocity_fd(t, p),
                    },
                }
            }
            DiffeoPath::Product(factors) => {
                // chain rule, innermost first; only non-closed-form factors
                // fall back to differences
                let mut cur = *p;
                let mut vec = Vector::zeros();
                let mut exactness = Exactness::ClosedForm;
                for (k, f) in factors.iter().rev().enumerate() {
                    let v = if k == 0 {
                        f.velocity(t, &cur)?
                    } else {
                        let (v, j) = f.velocity_jac(t, &cur)?;
                        vec = j * vec;
                        v
                    };
                    vec += v.vec;
                    exactness = exactness.max(v.exactness);
                    cur = v.image;
                }
                Ok(VelocitySample::new(t, *p, cur, vec, exactness))
            }
            DiffeoPath::Reversed(inner) => {
                let v = inner.velocity(1.0 - t, p)?;
                Ok(VelocitySample::new(t, *p, v.image, -v.vec, v.exactness))
            }
        }
    }

    /// Velocity together with the Jacobian of the slice at `p`.
    pub fn velocity_jac(&self, t: f64, p: &Point) -> Result<(VelocitySample, Matrix3<f64>)> {
        if let DiffeoPath::Pieces(pieces) = self {
            if let Some(pc) = pieces.get(Self::locate(pieces, t)) {
                if let Some(g) = pc.segment.generator() {
                    let (sigma, rate) = Self::clock(pc, t);
                    let (q, jr) = pc.right.eval_jac(p)?;
                    let (image, js) = pc.segment.map_at(sigma).eval_jac(&q)?;
                    let (vec, ex) = g.velocity(&image, rate)?;
                    return Ok((VelocitySample::new(t, *p, image, vec, ex), js * jr));
                }
            }
        }
        let v = self.velocity(t, p)?;
        let (_, j) = self.slice(t).eval_jac(p)?;
        Ok((v, j))
    }

    /// Finite-difference velocity: central with step `FD_STEP`, one-sided
    /// second order within `FD_STEP` of the ends.
    pub fn velocity_fd(&self, t: f64, p: &Point) -> Result<VelocitySample> {
        self.velocity_fd_step(t, p, FD_STEP)
    }

    pub fn velocity_fd_step(&self, t: f64, p: &Point, h: f64) -> Result<VelocitySample> {
        let at = |s: f64| self.slice(s).eval(p).map(|q| q.coords);
        let x0 = at(t)?;
        let vec = if t - h >= 0.0 && t + h <= 1.0 {
            (at(t + h)? - at(t - h)?) / (2.0 * h)
        } else if t - h < 0.0 {
            (at(t + h)? * 4.0 - x0 * 3.0 - at(t + 2.0 * h)?) / (2.0 * h)
        } else {
            (x0 * 3.0 - at(t - h)? * 4.0 + at(t - 2.0 * h)?) / (2.0 * h)
        };
        let image = Point::from(x0);
        Ok(VelocitySample::new(t, *p, image, vec, Exactness::FiniteDifference))
    }

    /// Richardson extrapolation of the `FD_STEP` and `FD_STEP / 2`
    /// differences, fourth order in the step.
    pub fn velocity_fd_richardson(&self, t: f64, p: &Point) -> Result<VelocitySample> {
        let coarse = self.velocity_fd_step(t, p, FD_STEP)?;
        let fine = self.velocity_fd_step(t, p, 0.5 * FD_STEP)?;
        let vec = (fine.vec * 4.0 - coarse.vec) / 3.0;
        Ok(VelocitySample::new(t, *p, fine.image, vec, Exactness::FiniteDifference))
    }
}

/// Joins paths end to start, each on an equal share of `[0, 1]`.
/// Consecutive paths must agree at the junction within `JUNCTION_TOL` on
/// `check`.
pub fn concat(paths: &[DiffeoPath], check: &Grid) -> Result<DiffeoPath> {
    let n = paths.len();
    match n {
        0 => return Ok(DiffeoPath::stationary()),
        1 => return Ok(paths[0].clone()),
        _ => {}
    }
    let points = check.points();
    for k in 0..n - 1 {
        let end = paths[k].end();
        let start = paths[k + 1].start();
        let mut sup = 0.0f64;
        for p in &points {
            let d = (end.eval(p)? - start.eval(p)?).norm();
            if !(d <= sup) {
                sup = d;
            }
        }
        if !(sup <= JUNCTION_TOL) {
            return Err(Error::JunctionMismatch {
                index: k,
                sup,
                tol: JUNCTION_TOL,
            });
        }
    }
    Ok(concat_unchecked(paths))
}

/// `concat` without the junction check, for callers that build matching
/// ends by construction.
pub fn concat_unchecked(paths: &[DiffeoPath]) -> DiffeoPath {
    let n = paths.len();
    if n == 1 {
        return paths[0].clone();
    }
    let nf = n as f64;
    let mut out = Vec::new();
    for (k, path) in paths.iter().enumerate() {
        let kf = k as f64;
        match path {
            DiffeoPath::Pieces(pieces) => out.extend(pieces.iter().map(|pc| Piece {
                t0: (kf + pc.t0) / nf,
                t1: (kf + pc.t1) / nf,
                ..pc.clone()
            })),
            other => out.push(Piece {
                t0: kf / nf,
                t1: (kf + 1.0) / nf,
                segment: Segment::Sub(Arc::new(other.clone())),
                warp: Warp::Flat,
                right: Diffeo::Identity,
            }),
        }
    }
    DiffeoPath::Pieces(out)
}

pub fn right_translate(path: &DiffeoPath, c: &Diffeo) -> DiffeoPath {
    path.right_translate(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Null,
    Positive,
    NonNegative,
    Mixed,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Null => "null",
            Verdict::Positive => "positive",
            Verdict::NonNegative => "non-negative",
            Verdict::Mixed => "mixed",
        })
    }
}

impl std::str::FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "null" => Verdict::Null,
            "positive" => Verdict::Positive,
            "non-negative" | "nonnegative" => Verdict::NonNegative,
            "mixed" => Verdict::Mixed,
            _ => return Err(Error::InvalidParameter(format!("unknown verdict `{s}`"))),
        })
    }
}

/// Extremes of alpha over a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaStats {
    pub samples: usize,
    pub closed_form_samples: usize,
    pub min_alpha: f64,
    pub max_alpha: f64,
    pub mean_alpha: f64,
    pub max_abs_alpha: f64,
    /// Minimum over samples with `0 < t < 1`.
    pub min_interior_alpha: f64,
    pub argmin_t: f64,
    pub argmin_p: [f64; 3],
}

/// One alpha value with its time and provenance, the input of the verdict.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaPoint {
    pub t: f64,
    pub p: Point,
    pub alpha: f64,
    pub exactness: Exactness,
}

impl From<&VelocitySample> for AlphaPoint {
    fn from(v: &VelocitySample) -> Self {
        Self {
            t: v.t,
            p: v.p,
            alpha: v.alpha,
            exactness: v.exactness,
        }
    }
}

/// Verdict over samples. Closed-form samples are judged with tolerance 0,
/// the others with `tol`:
/// null if every `|alpha| <= tol_i`; positive if every interior
/// `alpha > tol_i` and every `alpha >= -tol_i`; non-negative if every
/// `alpha >= -tol_i`; mixed otherwise.
pub fn classify_alphas(samples: &[AlphaPoint], tol: f64) -> (Verdict, AlphaStats) {
    let mut st = AlphaStats {
        samples: samples.len(),
        closed_form_samples: 0,
        min_alpha: f64::INFINITY,
        max_alpha: f64::NEG_INFINITY,
        mean_alpha: 0.0,
        max_abs_alpha: 0.0,
        min_interior_alpha: f64::INFINITY,
        argmin_t: 0.0,
        argmin_p: [0.0; 3],
    };
    let (mut null, mut pos, mut nonneg) = (true, true, true);
    let mut interior = 0usize;
    let mut sum = 0.0;
    for s in samples {
        let a = s.alpha;
        let tol_i = match s.exactness {
            Exactness::ClosedForm => {
                st.closed_form_samples += 1;
                0.0
            }
            Exactness::Integrator | Exactness::FiniteDifference => tol,
        };
        sum += a;
        if a < st.min_alpha || (st.min_alpha.is_infinite() && a.is_nan()) {
            st.min_alpha = a;
            st.argmin_t = s.t;
            st.argmin_p = [s.p.x, s.p.y, s.p.z];
        }
        st.max_alpha = st.max_alpha.max(a);
        st.max_abs_alpha = st.max_abs_alpha.max(a.abs());
        let is_interior = s.t > 0.0 && s.t < 1.0;
        if is_interior {
            interior += 1;
            st.min_interior_alpha = st.min_interior_alpha.min(a);
        }
        null &= a.abs() <= tol_i;
        nonneg &= a >= -tol_i;
        pos &= a >= -tol_i && (!is_interior || a > tol_i);
    }
    if !samples.is_empty() {
        st.mean_alpha = sum / samples.len() as f64;
    }
    let verdict = if null {
        Verdict::Null
    } else if pos && interior > 0 {
        Verdict::Positive
    } else if nonneg {
        Verdict::NonNegative
    } else {
        Verdict::Mixed
    };
    (verdict, st)
}

/// Velocity samples over `points x times`, time-major.
pub fn sweep(path: &DiffeoPath, points: &[Point], times: &[f64]) -> Result<Vec<VelocitySample>> {
    let mut out = Vec::with_capacity(points.len() * times.len());
    for &t in times {
        for p in points {
            out.push(path.velocity(t, p)?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub stats: AlphaStats,
    pub tol: f64,
}

pub fn classify(path: &DiffeoPath, grid: &Grid, times: &[f64], tol: f64) -> Result<Classification> {
    let samples = sweep(path, &grid.points(), times)?;
    Ok(classify_samples(&samples, tol))
}

pub fn classify_samples(samples: &[VelocitySample], tol: f64) -> Classification {
    let pts: Vec<AlphaPoint> = samples.iter().map(AlphaPoint::from).collect();
    let (verdict, stats) = classify_alphas(&pts, tol);
    Classification {
        verdict,
        stats,
        tol,
    }
}

/// Composite trapezoid in `t` of `max_p |alpha|`, from a time-major sweep.
pub fn hofer_from_samples(samples: &[VelocitySample], times: &[f64]) -> f64 {
    if times.len() < 2 || samples.is_empty() {
        return 0.0;
    }
    let per = samples.len() / times.len();
    let peaks: Vec<f64> = samples
        .chunks(per)
        .map(|c| c.iter().map(|s| s.alpha.abs()).fold(0.0, f64::max))
        .collect();
    times
        .windows(2)
        .zip(peaks.windows(2))
        .map(|(t, m)| 0.5 * (t[1] - t[0]) * (m[0] + m[1]))
        .sum()
}

pub fn hofer_length(path: &DiffeoPath, grid: &Grid, times: &[f64]) -> Result<f64> {
    let samples = sweep(path, &grid.points(), times)?;
    Ok(hofer_from_samples(&samples, times))
}

/// Sup over `points` of `|a(p) - b(p)|`.
pub fn sup_distance(a: &Diffeo, b: &Diffeo, points: &[Point]) -> Result<f64> {
    let mut sup = 0.0f64;
    for p in points {
        let d = (a.eval(p)? - b.eval(p)?).norm();
        if !(d <= sup) {
            sup = d;
        }
    }
    Ok(sup)
}

/// One JSONL record of a path sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub t: f64,
    pub p: [f64; 3],
    pub image: [f64; 3],
    pub velocity: [f64; 3],
    pub alpha: f64,
    pub exactness: Exactness,
}

impl From<&VelocitySample> for PathRecord {
    fn from(v: &VelocitySample) -> Self {
        Self {
            t: v.t,
            p: [v.p.x, v.p.y, v.p.z],
            image: [v.image.x, v.image.y, v.image.z],
            velocity: [v.vec.x, v.vec.y, v.vec.z],
            alpha: v.alpha,
            exactness: v.exactness,
        }
    }
}

impl From<&PathRecord> for AlphaPoint {
    fn from(r: &PathRecord) -> Self {
        Self {
            t: r.t,
            p: Point::from(r.p),
            alpha: r.alpha,
            exactness: r.exactness,
        }
    }
}

/// Jacobian of a slice at a point, for callers that transport tangents.
pub fn slice_jacobian(path: &DiffeoPath, t: f64, p: &Point) -> Result<(Point, Matrix3<f64>)> {
    path.slice(t).eval_jac(p)
}
