//! One-shot verification of a path: verdict, Hofer length, endpoint error,
//! far-field stats and a finite-difference cross-check, as a deterministic
//! report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contact::Point;
use crate::diffeo::Diffeo;
use crate::error::{Error, Result};
use crate::grid::{time_grid, Grid, Shell};
use crate::paths::{
    classify_alphas, hofer_from_samples, sup_distance, sweep, AlphaPoint, AlphaStats, DiffeoPath,
    Exactness, PathRecord, Verdict, VelocitySample,
};
use crate::synthesis::{far_field_report, FarFieldReport};

pub const REPORT_SCHEMA: &str = "contactflex.verify/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub grid: Grid,
    pub times: usize,
    pub tol: f64,
    pub endpoint_tol: f64,
    pub fd_tol: f64,
    pub far_field: Option<Shell>,
    /// Interior times per piece in the far-field sweep.
    pub far_field_interior: usize,
    pub expect: Option<Verdict>,
    /// Extra uniform points in the grid box, drawn from `seed`.
    pub random_points: usize,
    pub seed: u64,
    /// Recorded in the metadata only.
    pub eps: Option<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            grid: Grid::cube(1.0, 11),
            times: 33,
            tol: 1e-6,
            endpoint_tol: 1e-5,
            fd_tol: 1e-4,
            far_field: None,
            far_field_interior: 2,
            expect: None,
            random_points: 0,
            seed: 0,
            eps: None,
        }
    }
}

impl VerifyConfig {
    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.grid.is_empty() || (0..3).any(|i| self.grid.bbox.lo[i] > self.grid.bbox.hi[i]) {
            return bad(format!("empty or inverted grid {:?}", self.grid));
        }
        if self.times < 2 {
            return bad(format!("need at least 2 times, got {}", self.times));
        }
        for (name, v) in [
            ("tol", self.tol),
            ("endpoint_tol", self.endpoint_tol),
            ("fd_tol", self.fd_tol),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }

    /// Grid points followed by the seeded random points.
    pub fn points(&self) -> Vec<Point> {
        let mut pts = self.grid.points();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let b = self.grid.bbox;
        for _ in 0..self.random_points {
            let c: [f64; 3] = std::array::from_fn(|i| {
                if b.lo[i] < b.hi[i] {
                    rng.gen_range(b.lo[i]..=b.hi[i])
                } else {
                    b.lo[i]
                }
            });
            pts.push(Point::from(c));
        }
        pts
    }
}

/// Exact or integrator velocities against extrapolated central differences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdCrossCheck {
    pub samples: usize,
    pub max_error: f64,
    pub max_error_t: f64,
    pub max_error_at: [f64; 3],
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub grid: Grid,
    pub points: usize,
    pub times: usize,
    pub tol: f64,
    pub endpoint_tol: f64,
    pub fd_tol: f64,
    pub seed: u64,
    pub random_points: usize,
    pub eps: Option<f64>,
    pub pieces: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema: String,
    pub verdict: Verdict,
    pub expected: Option<Verdict>,
    pub verdict_ok: bool,
    pub alpha: AlphaStats,
    pub hofer_length: f64,
    pub endpoint_error: Option<f64>,
    pub endpoint_ok: Option<bool>,
    pub far_field: Option<FarFieldReport>,
    pub fd_cross_check: Option<FdCrossCheck>,
    pub meta: RunMeta,
    pub passed: bool,
}

impl VerificationReport {
    fn finish(mut self) -> Self {
        self.verdict_ok = self.expected.is_none_or(|e| e == self.verdict);
        self.passed = self.verdict_ok
            && self.endpoint_ok.unwrap_or(true)
            && self.fd_cross_check.as_ref().is_none_or(|c| c.ok);
        self
    }
}

fn fd_cross_check(
    path: &DiffeoPath,
    samples: &[VelocitySample],
    tol: f64,
) -> Result<Option<FdCrossCheck>> {
    let mut out = FdCrossCheck {
        samples: 0,
        max_error: 0.0,
        max_error_t: 0.0,
        max_error_at: [0.0; 3],
        ok: true,
    };
    for s in samples {
        if s.exactness == Exactness::FiniteDifference {
            continue;
        }
        let fd = path.velocity_fd_richardson(s.t, &s.p)?;
        let e = (fd.vec - s.vec).amax();
        out.samples += 1;
        if !(e <= out.max_error) {
            out.max_error = e;
            out.max_error_t = s.t;
            out.max_error_at = [s.p.x, s.p.y, s.p.z];
        }
    }
    if out.samples == 0 {
        return Ok(None);
    }
    out.ok = out.max_error <= tol;
    Ok(Some(out))
}

/// Sweeps `path` over the configured points and times. With `target`, the
/// end slice is compared with it on the same points.
pub fn verify(
    path: &DiffeoPath,
    target: Option<&Diffeo>,
    config: &VerifyConfig,
) -> Result<VerificationReport> {
    config.check()?;
    let points = config.points();
    let times = time_grid(config.times);
    let samples = sweep(path, &points, &times)?;
    let alphas: Vec<AlphaPoint> = samples.iter().map(AlphaPoint::from).collect();
    let (verdict, alpha) = classify_alphas(&alphas, config.tol);
    let hofer_length = hofer_from_samples(&samples, &times);
    let endpoint_error = match target {
        Some(f) => Some(sup_distance(&path.end(), f, &points)?),
        None => None,
    };
    let far_field = match &config.far_field {
        Some(shell) => Some(far_field_report(path, shell, config.far_field_interior)?),
        None => None,
    };
    let fd = fd_cross_check(path, &samples, config.fd_tol)?;
    Ok(VerificationReport {
        schema: REPORT_SCHEMA.to_string(),
        verdict,
        expected: config.expect,
        verdict_ok: true,
        alpha,
        hofer_length,
        endpoint_error,
        endpoint_ok: endpoint_error.map(|e| e <= config.endpoint_tol),
        far_field,
        fd_cross_check: fd,
        meta: meta(config, points.len(), path.piece_count()),
        passed: true,
    }
    .finish())
}

fn meta(config: &VerifyConfig, points: usize, pieces: usize) -> RunMeta {
    RunMeta {
        grid: config.grid,
        points,
        times: config.times,
        tol: config.tol,
        endpoint_tol: config.endpoint_tol,
        fd_tol: config.fd_tol,
        seed: config.seed,
        random_points: config.random_points,
        eps: config.eps,
        pieces,
    }
}

/// Verifies a serialized sweep. Records must be time-major with the same
/// point set at every time; the endpoint is read from the records at
/// `t = 1`.
pub fn verify_records(
    records: &[PathRecord],
    target: Option<&Diffeo>,
    config: &VerifyConfig,
) -> Result<VerificationReport> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("no path records".into()));
    }
    let mut times: Vec<f64> = Vec::new();
    for r in records {
        if times.last() != Some(&r.t) {
            if times.last().is_some_and(|&l| r.t < l) {
                return Err(Error::InvalidParameter(format!(
                    "records are not sorted by time at t = {}",
                    r.t
                )));
            }
            times.push(r.t);
        }
    }
    let per = records.len() / times.len();
    if per * times.len() != records.len() {
        return Err(Error::InvalidParameter(
            "records do not share one point set per time".into(),
        ));
    }
    let alphas: Vec<AlphaPoint> = records.iter().map(AlphaPoint::from).collect();
    let (verdict, alpha) = classify_alphas(&alphas, config.tol);
    let peaks: Vec<f64> = records
        .chunks(per)
        .map(|c| c.iter().map(|r| r.alpha.abs()).fold(0.0, f64::max))
        .collect();
    let hofer_length = times
        .windows(2)
        .zip(peaks.windows(2))
        .map(|(t, m)| 0.5 * (t[1] - t[0]) * (m[0] + m[1]))
        .sum();
    let endpoint_error = match target {
        Some(f) => {
            let mut sup = 0.0f64;
            for r in records.iter().filter(|r| r.t == 1.0) {
                let want = f.eval(&Point::from(r.p))?;
                let d = (Point::from(r.image) - want).norm();
                if !(d <= sup) {
                    sup = d;
                }
            }
            Some(sup)
        }
        None => None,
    };
    Ok(VerificationReport {
        schema: REPORT_SCHEMA.to_string(),
        verdict,
        expected: config.expect,
        verdict_ok: true,
        alpha,
        hofer_length,
        endpoint_error,
        endpoint_ok: endpoint_error.map(|e| e <= config.endpoint_tol),
        far_field: None,
        fd_cross_check: None,
        meta: RunMeta {
            times: times.len(),
            ..meta(config, per, 0)
        },
        passed: true,
    }
    .finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{null_path_to, positive_path_to, SynthesisOptions};

    fn cfg(expect: Verdict) -> VerifyConfig {
        VerifyConfig {
            grid: Grid::cube(1.0, 5),
            times: 17,
            expect: Some(expect),
            ..Default::default()
        }
    }

    #[test]
    fn shear_null_path_verifies() {
        let f = Diffeo::parse("(x, y + 0.1, z)").unwrap();
        let s = null_path_to(&f, &SynthesisOptions::default()).unwrap();
        let r = verify(&s.path, Some(&f), &cfg(Verdict::Null)).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.hofer_length, 0.0);
        assert!(r.endpoint_error.unwrap() <= 1e-6);
        assert!(r.fd_cross_check.unwrap().max_error <= 1e-4);
    }

    #[test]
    fn positive_loop_and_corruption() {
        let s = positive_path_to(&Diffeo::Identity, 1.0, &SynthesisOptions::default()).unwrap();
        let r = verify(&s.path, Some(&Diffeo::Identity), &cfg(Verdict::Positive)).unwrap();
        assert!(r.passed, "{r:?}");
        assert!((r.hofer_length - 1.0).abs() <= 1e-6);
        let bad = DiffeoPath::reeb(0.5).reversed();
        let r = verify(&bad, None, &cfg(Verdict::Positive)).unwrap();
        assert_eq!(r.verdict, Verdict::Mixed);
        assert!(!r.passed);
    }

    #[test]
    fn records_round_trip() {
        let c = cfg(Verdict::Positive);
        let path = DiffeoPath::reeb(0.3);
        let samples = sweep(&path, &c.points(), &time_grid(c.times)).unwrap();
        let recs: Vec<PathRecord> = samples.iter().map(PathRecord::from).collect();
        let a = verify_records(&recs, Some(&Diffeo::reeb(0.3)), &c).unwrap();
        let b = verify(&path, Some(&Diffeo::reeb(0.3)), &c).unwrap();
        assert_eq!(a.verdict, b.verdict);
        assert_eq!(a.alpha, b.alpha);
        assert!((a.hofer_length - b.hofer_length).abs() < 1e-15);
        assert!(a.passed);
    }

    #[test]
    fn seeded_points_are_deterministic() {
        let c = VerifyConfig {
            random_points: 10,
            seed: 7,
            ..Default::default()
        };
        assert_eq!(c.points(), c.points());
        assert_eq!(c.points().len(), 11 * 11 * 11 + 10);
        let bad = VerifyConfig {
            times: 1,
            ..Default::default()
        };
        assert!(verify(&DiffeoPath::stationary(), None, &bad).is_err());
    }
}
