//! Null paths to near-identity maps, subdivided null paths along families,
//! positive paths as Reeb compositions, and far-field diagnostics.

use serde::{Deserialize, Serialize};

use crate::contact::FrameField;
use crate::diffeo::{operator_norm, Diffeo};
use crate::error::{Error, Result};
use crate::factorize::{
    auto_factorize, epsilon_ladder, factorize, Amplitude, Factor, FactorizeOptions, Factorization,
    Translation,
};
use crate::family::Family;
use crate::grid::{Aabb, Grid, Shell};
use crate::paths::{concat, DiffeoPath, Piece, Segment, Warp};

/// Default cap on the number of subdivisions in auto mode.
pub const SUBDIVISION_CAP: usize = 1 << 10;

/// Gap between the support of a compactly supported map plus `eps` and
/// the inner radius of the cut-off translation.
pub const CUTOFF_MARGIN: f64 = 0.25;
/// Width of the cut-off shell.
pub const CUTOFF_WIDTH: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct SynthesisOptions {
    /// Grid on which factorizations and junctions are certified.
    pub grid: Grid,
    /// Working `eps`; `None` runs the ladder.
    pub eps: Option<f64>,
    pub factorize: FactorizeOptions,
    pub warp: Warp,
    pub max_subdivisions: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            grid: Grid::cube(1.0, 11),
            eps: None,
            factorize: FactorizeOptions::default(),
            warp: Warp::Flat,
            max_subdivisions: SUBDIVISION_CAP,
        }
    }
}

/// A synthesized path with the parameters that produced it.
#[derive(Clone, Debug)]
pub struct Synthesized {
    pub path: DiffeoPath,
    /// Smallest `eps` used by any factorization, if one was needed.
    pub eps: Option<f64>,
    pub subdivisions: usize,
    /// Largest certified composition residual over all factorizations.
    pub residual_sup: f64,
    /// The factorization when the path came from a single one.
    pub factorization: Option<Factorization>,
}

impl Synthesized {
    fn plain(path: DiffeoPath) -> Self {
        Self {
            path,
            eps: None,
            subdivisions: 0,
            residual_sup: 0.0,
            factorization: None,
        }
    }
}

/// Cut-off translation for maps supported in the ball of radius `support`.
pub fn cutoff_translation(support: f64, eps: f64) -> Translation {
    let inner = support + eps + CUTOFF_MARGIN;
    Translation::Cutoff {
        inner,
        outer: inner + CUTOFF_WIDTH,
    }
}

/// One piece per factor on equal shares of `[0, 1]`, each right-translated
/// by the composition of the factors before it.
pub fn null_path_from_factors(factors: &[Factor], warp: Warp) -> DiffeoPath {
    let n = factors.len();
    if n == 0 {
        return DiffeoPath::stationary();
    }
    let mut right = Diffeo::Identity;
    let mut pieces = Vec::with_capacity(n);
    for (k, f) in factors.iter().enumerate() {
        pieces.push(Piece {
            t0: k as f64 / n as f64,
            t1: if k + 1 == n { 1.0 } else { (k + 1) as f64 / n as f64 },
            segment: Segment::Reparam {
                field: f.field,
                amplitude: f.amplitude.clone(),
                scale: f.scale,
            },
            warp,
            right: right.clone(),
        });
        right = factor_map(f).compose(&right);
    }
    DiffeoPath::Pieces(pieces)
}

fn factor_map(f: &Factor) -> Diffeo {
    match f.amplitude.as_const() {
        Some(0.0) => Diffeo::Identity,
        Some(a) => Diffeo::Flow(f.field, f.scale * a),
        None => f.to_diffeo(),
    }
}

pub fn null_path_from_factorization(fac: &Factorization, warp: Warp) -> DiffeoPath {
    null_path_from_factors(&fac.factors(), warp)
}

fn factorize_with(f: &Diffeo, opts: &SynthesisOptions) -> Result<Factorization> {
    match opts.eps {
        Some(eps) => factorize(f, eps, &opts.grid, &opts.factorize),
        None => auto_factorize(f, &opts.grid, &opts.factorize),
    }
}

/// Null path from the identity to `f` through one factorization.
pub fn null_path_to(f: &Diffeo, opts: &SynthesisOptions) -> Result<Synthesized> {
    let fac = factorize_with(f, opts)?;
    Ok(Synthesized {
        path: null_path_from_factorization(&fac, opts.warp),
        eps: Some(fac.eps),
        subdivisions: 1,
        residual_sup: fac.report.residual_sup,
        factorization: Some(fac),
    })
}

/// Errors after which a finer subdivision may succeed.
fn retryable(e: &Error) -> bool {
    matches!(
        e,
        Error::NotInNeighborhood { .. }
            | Error::ResidualExceeded { .. }
            | Error::InversionFailed { .. }
            | Error::NoFeasibleEpsilon
            | Error::JunctionMismatch { .. }
    )
}

/// Null path from `f_0` to `f_1` through null paths for the increments
/// `f_{t_{j+1}} o f_{t_j}^-1`, right-translated by `f_{t_j}`. With `m =
/// None`, `m` doubles from 1 until every increment factorizes.
pub fn subdivide_and_connect(
    family: &Family,
    m: Option<usize>,
    opts: &SynthesisOptions,
) -> Result<Synthesized> {
    if family.is_constant() {
        let mut s = Synthesized::plain(DiffeoPath::stationary().right_translate(&family.start()));
        s.subdivisions = 1;
        return Ok(s);
    }
    match m {
        Some(m) => connect_with(family, m.max(1), opts),
        None => {
            let mut m = 1;
            while m <= opts.max_subdivisions {
                match connect_with(family, m, opts) {
                    Ok(s) => return Ok(s),
                    Err(e) if retryable(&e) => m *= 2,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::SubdivisionCapExceeded {
                cap: opts.max_subdivisions,
            })
        }
    }
}

fn connect_with(family: &Family, m: usize, opts: &SynthesisOptions) -> Result<Synthesized> {
    let mut paths = Vec::with_capacity(m);
    let mut eps = f64::INFINITY;
    let mut residual = 0.0f64;
    if let Some((inc, starts)) = family.aligned_increments(m) {
        let fac = factorize_with(&inc, opts)?;
        let base = null_path_from_factorization(&fac, opts.warp);
        paths.extend(starts.iter().map(|s| base.right_translate(s)));
        eps = fac.eps;
        residual = fac.report.residual_sup;
    } else {
        let mut prev = family.start();
        for j in 0..m {
            let next = family.at(if j + 1 == m { 1.0 } else { (j + 1) as f64 / m as f64 });
            let inc = next.compose(&prev.inverse());
            let fac = factorize_with(&inc, opts)?;
            paths.push(null_path_from_factorization(&fac, opts.warp).right_translate(&prev));
            eps = eps.min(fac.eps);
            residual = residual.max(fac.report.residual_sup);
            prev = next;
        }
    }
    Ok(Synthesized {
        path: concat(&paths, &opts.grid)?,
        eps: Some(eps),
        subdivisions: m,
        residual_sup: residual,
        factorization: None,
    })
}

/// Null path to `f`, directly when `f` factorizes and otherwise through
/// `fallback`.
fn null_or_connect(
    f: &Diffeo,
    opts: &SynthesisOptions,
    fallback: impl FnOnce() -> Result<Synthesized>,
) -> Result<Synthesized> {
    match null_path_to(f, opts) {
        Ok(s) => Ok(s),
        Err(e) if retryable(&e) => fallback(),
        Err(e) => Err(e),
    }
}

/// `t -> Reeb_{tT} o g_t` with `g` a null path from the identity to
/// `Reeb_{-T} o f`. The Reeb factor runs on the identity clock, so every
/// velocity sample has alpha `T`.
pub fn positive_path_to(f: &Diffeo, reeb_time: f64, opts: &SynthesisOptions) -> Result<Synthesized> {
    if !(reeb_time > 0.0 && reeb_time.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "positive paths need a Reeb time T > 0, got {reeb_time}"
        )));
    }
    let g = match f.reeb_time() {
        Some(s) if s - reeb_time == 0.0 => Synthesized::plain(DiffeoPath::stationary()),
        Some(s) => {
            let r = s - reeb_time;
            null_or_connect(&Diffeo::reeb(r), opts, || {
                subdivide_and_connect(&Family::reeb(r), None, opts)
            })?
        }
        None => {
            let target = Diffeo::reeb(-reeb_time).compose(f);
            null_or_connect(&target, opts, || {
                let head = null_path_to(f, opts)?;
                let fam = Family::RightTranslated(Box::new(Family::reeb(-reeb_time)), f.clone());
                let tail = subdivide_and_connect(&fam, None, opts)?;
                Ok(Synthesized {
                    path: concat(&[head.path, tail.path], &opts.grid)?,
                    eps: min_eps(head.eps, tail.eps),
                    subdivisions: head.subdivisions + tail.subdivisions,
                    residual_sup: head.residual_sup.max(tail.residual_sup),
                    factorization: None,
                })
            })?
        }
    };
    Ok(Synthesized {
        path: DiffeoPath::Product(vec![DiffeoPath::reeb(reeb_time), g.path]),
        ..g
    })
}

fn min_eps(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, None) => a,
        (None, b) => b,
    }
}

/// Positive path to a compactly supported `f` that stays close to the
/// identity far out: the null part is a cut-off factorization of `f`
/// followed by `reeb_null_path_small(-T)` right-translated by `f`. Without a
/// fixed `eps` the largest ladder rung that factorizes is used.
pub fn positive_path_compact(
    f: &Diffeo,
    reeb_time: f64,
    opts: &SynthesisOptions,
) -> Result<Synthesized> {
    if !(reeb_time > 0.0 && reeb_time.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "positive paths need a Reeb time T > 0, got {reeb_time}"
        )));
    }
    let support = f.support_radius().ok_or_else(|| {
        Error::Precondition(format!("{} has no known compact support", f.describe()))
    })?;
    let ladder: Vec<f64> = match opts.eps {
        Some(e) => vec![e],
        None => epsilon_ladder().collect(),
    };
    let mut last = Error::NoFeasibleEpsilon;
    for eps in ladder {
        match compact_head(f, support, eps, opts) {
            Ok((head, grid)) => {
                let tail = reeb_null_path_small(-reeb_time).right_translate(f);
                let g = concat(&[head.path.clone(), tail], &grid)?;
                return Ok(Synthesized {
                    path: DiffeoPath::Product(vec![DiffeoPath::reeb(reeb_time), g]),
                    ..head
                });
            }
            Err(e) if retryable(&e) && opts.eps.is_none() => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(match last {
        Error::NotInNeighborhood { .. } | Error::ResidualExceeded { .. } => Error::NoFeasibleEpsilon,
        e => e,
    })
}

/// Cut-off factorization of `f` at `eps` on a grid enlarged to the cut-off.
fn compact_head(
    f: &Diffeo,
    support: f64,
    eps: f64,
    opts: &SynthesisOptions,
) -> Result<(Synthesized, Grid)> {
    let translation = cutoff_translation(support, eps);
    let Translation::Cutoff { outer, .. } = translation else {
        unreachable!("cutoff_translation returns a cut-off")
    };
    let r = opts.grid.bbox.lo.iter().chain(&opts.grid.bbox.hi).fold(outer, |m, v| m.max(v.abs()));
    let local = SynthesisOptions {
        grid: Grid {
            bbox: Aabb::cube(r),
            n: opts.grid.n,
        },
        eps: Some(eps),
        factorize: FactorizeOptions {
            translation,
            ..opts.factorize
        },
        ..opts.clone()
    };
    Ok((null_path_to(f, &local)?, local.grid))
}

/// Null path to `Reeb_T` with constant amplitudes `(a1, a2, a3) =
/// (0, -T/eps, T/eps)`.
pub fn reeb_null_path(reeb_time: f64, eps: f64) -> Result<DiffeoPath> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if reeb_time == 0.0 {
        return Ok(DiffeoPath::stationary());
    }
    Ok(reeb_null_unchecked(reeb_time, eps, Warp::Flat))
}

/// The constant amplitudes `(a1, a2, a3)` of the Reeb null path.
pub fn reeb_amplitudes(reeb_time: f64, eps: f64) -> [f64; 3] {
    let a = reeb_time / eps;
    [0.0, -a, a]
}

fn reeb_null_unchecked(reeb_time: f64, eps: f64, warp: Warp) -> DiffeoPath {
    let [a1, a2, a3] = reeb_amplitudes(reeb_time, eps);
    let factor = |field, a: f64, scale| Factor {
        field,
        amplitude: Amplitude::Const(a),
        scale,
    };
    null_path_from_factors(
        &[
            factor(FrameField::X, 1.0, -eps),
            factor(FrameField::Y, a3, 1.0),
            factor(FrameField::X, 1.0, eps),
            factor(FrameField::Y, a2, 1.0),
            factor(FrameField::X, a1, 1.0),
        ],
        warp,
    )
}

/// Null path to `Reeb_T` whose displacements are all `O(|T|)`: `eps = |T|`
/// and `ceil(1/|T|)` increments of `Reeb_{T/m}`, so every amplitude is
/// `1/m`.
pub fn reeb_null_path_small(reeb_time: f64) -> DiffeoPath {
    if reeb_time == 0.0 {
        return DiffeoPath::stationary();
    }
    let eps = reeb_time.abs();
    // the small offset keeps 1/0.01 from rounding up to 101
    let m = ((1.0 / eps) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let step = reeb_time / m as f64;
    let base = reeb_null_unchecked(step, eps, Warp::Flat);
    let paths: Vec<DiffeoPath> = (0..m)
        .map(|j| {
            if j == 0 {
                base.clone()
            } else {
                base.right_translate(&Diffeo::Flow(FrameField::Reeb, step * j as f64))
            }
        })
        .collect();
    crate::paths::concat_unchecked(&paths)
}

/// Sup of displacement and Jacobian deviation of the slices on a shell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarFieldReport {
    pub points: usize,
    pub times: usize,
    pub max_displacement: f64,
    pub max_displacement_t: f64,
    pub max_displacement_at: [f64; 3],
    pub max_jacobian_deviation: f64,
    pub max_jacobian_deviation_t: f64,
    pub max_jacobian_deviation_at: [f64; 3],
}

/// Times at every breakpoint of `path` plus `interior` equispaced times
/// inside each piece.
pub fn report_times(path: &DiffeoPath, interior: usize) -> Vec<f64> {
    let bps = path.breakpoints();
    let mut out = Vec::with_capacity(bps.len() * (interior + 1));
    for w in bps.windows(2) {
        for i in 0..=interior {
            out.push(w[0] + (w[1] - w[0]) * i as f64 / (interior + 1) as f64);
        }
    }
    out.push(1.0);
    out
}

pub fn far_field_report(path: &DiffeoPath, shell: &Shell, interior: usize) -> Result<FarFieldReport> {
    let points = shell.points();
    let times = report_times(path, interior);
    let mut rep = FarFieldReport {
        points: points.len(),
        times: times.len(),
        max_displacement: 0.0,
        max_displacement_t: 0.0,
        max_displacement_at: [0.0; 3],
        max_jacobian_deviation: 0.0,
        max_jacobian_deviation_t: 0.0,
        max_jacobian_deviation_at: [0.0; 3],
    };
    for &t in &times {
        let slice = path.slice(t);
        for p in &points {
            let (q, j) = slice.eval_jac(p)?;
            let d = (q - p).norm();
            let at = [p.x, p.y, p.z];
            if d > rep.max_displacement {
                rep.max_displacement = d;
                rep.max_displacement_t = t;
                rep.max_displacement_at = at;
            }
            let jd = operator_norm(&(j - nalgebra::Matrix3::identity()));
            if jd > rep.max_jacobian_deviation {
                rep.max_jacobian_deviation = jd;
                rep.max_jacobian_deviation_t = t;
                rep.max_jacobian_deviation_at = at;
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::Point;
    use crate::grid::time_grid;
    use crate::paths::{classify, sup_distance, Verdict};

    fn pts() -> Vec<Point> {
        Grid::cube(1.0, 5).points()
    }

    #[test]
    fn reeb_null_path_hits_reeb_map() {
        let path = reeb_null_path(0.2, 0.5).unwrap();
        assert_eq!(reeb_amplitudes(0.2, 0.5), [0.0, -0.4, 0.4]);
        let d = sup_distance(&path.end(), &Diffeo::reeb(0.2), &pts()).unwrap();
        assert!(d <= 1e-15, "{d}");
        let c = classify(&path, &Grid::cube(1.0, 3), &time_grid(9), 1e-6).unwrap();
        assert_eq!(c.verdict, Verdict::Null);
        assert!(matches!(
            reeb_null_path(0.0, 0.5).unwrap().slice(0.5),
            Diffeo::Identity
        ));
    }

    #[test]
    fn small_variant_counts_increments() {
        let path = reeb_null_path_small(0.01);
        assert_eq!(path.piece_count(), 500);
        let d = sup_distance(&path.end(), &Diffeo::reeb(0.01), &pts()).unwrap();
        assert!(d <= 1e-14, "{d}");
    }

    #[test]
    fn shear_null_path_endpoint() {
        let f = Diffeo::parse("(x, y+0.1, z)").unwrap();
        let s = null_path_to(&f, &SynthesisOptions::default()).unwrap();
        let d = sup_distance(&s.path.end(), &f, &pts()).unwrap();
        assert!(d <= 1e-6, "{d}");
        assert!(matches!(s.path.start(), Diffeo::Identity));
    }

    #[test]
    fn reeb_family_subdivides() {
        let opts = SynthesisOptions {
            eps: Some(0.5),
            ..Default::default()
        };
        let s = subdivide_and_connect(&Family::reeb(2.0), None, &opts).unwrap();
        assert_eq!(s.subdivisions, 8);
        let d = sup_distance(&s.path.end(), &Diffeo::reeb(2.0), &pts()).unwrap();
        assert!(d <= 1e-12, "{d}");
    }

    #[test]
    fn positive_loop_has_margin() {
        let s = positive_path_to(&Diffeo::Identity, 1.0, &SynthesisOptions::default()).unwrap();
        let c = classify(&s.path, &Grid::cube(1.0, 3), &time_grid(11), 1e-6).unwrap();
        assert_eq!(c.verdict, Verdict::Positive);
        assert!((c.stats.min_interior_alpha - 1.0).abs() <= 1e-12);
        let d = sup_distance(&s.path.end(), &Diffeo::Identity, &pts()).unwrap();
        assert!(d <= 1e-9, "{d}");
    }

    #[test]
    fn stationary_far_field_is_zero() {
        let shell = Shell {
            grid: Grid::cube(3.0, 5),
            min_radius: 2.5,
        };
        let r = far_field_report(&DiffeoPath::stationary(), &shell, 2).unwrap();
        assert_eq!(r.max_displacement, 0.0);
        assert_eq!(r.max_jacobian_deviation, 0.0);
    }
}
