//! Extension of a path of contactomorphisms that is positive outside a
//! compact set to an everywhere positive path of diffeomorphisms that agrees
//! with it far out.
//!
//! The output is `t -> f_t o phi_t o psi_t`: `phi` is the flow of a bump
//! Hamiltonian `h` (constant `height` on the ball `K2`), and `psi` is a
//! compactly supported null path from the identity to `phi_{-1}`. Along
//! the output `alpha = H_t(q) + rho_{f_t}(w) h(w)` with `w = phi_t psi_t(p)`,
//! `q = f_t(w)`.

use serde::Serialize;

use crate::contact::{conformal_factor, kernel_defect, Point};
use crate::error::{Error, Result};
use crate::factorize::{FactorizeOptions, Translation};
use crate::family::Family;
use crate::field::{Bump, ScalarField};
use crate::grid::{time_grid, Grid};
use crate::paths::{classify_samples, sweep, Classification, DiffeoPath, Verdict, Warp};
use crate::synthesis::{subdivide_and_connect, SynthesisOptions, CUTOFF_MARGIN, CUTOFF_WIDTH};

pub use crate::ode::integrate_contact_flow;

/// Largest radius on the ladder `1, 2, 4, ...`.
pub const RADIUS_CAP: f64 = 1024.0;
/// RK4 steps of the bump flow over unit time.
pub const BUMP_STEPS: usize = 64;
/// Largest `eps` used for the null path to `phi_{-1}`; sizes the cut-off.
const PSI_MAX_EPS: f64 = 1.0;

/// A path of contactomorphisms starting at the identity, positive outside
/// the ball of radius `k0`.
#[derive(Clone, Debug)]
pub struct ContactPathInput {
    pub family: Family,
    /// Autonomous contact Hamiltonian of the family, when known. Without it
    /// `H_t` is recovered by differences.
    pub hamiltonian: Option<ScalarField>,
    pub k0: f64,
}

impl ContactPathInput {
    /// The unit-time flow of `h`.
    pub fn from_hamiltonian(h: ScalarField, k0: f64) -> Self {
        Self {
            family: Family::hamiltonian(h.clone(), 1.0),
            hamiltonian: Some(h),
            k0,
        }
    }

    /// `H = 1 - 2 bump(0, 2)`: negative on the open unit ball, positive
    /// outside it, and one outside radius 2.
    pub fn shipped_example() -> Self {
        let bump = ScalarField::Bump(Bump {
            inner: 0.0,
            outer: 2.0,
            height: 1.0,
        });
        Self::from_hamiltonian(ScalarField::Combination(1.0, vec![(-2.0, bump)]), 1.0)
    }

    pub fn path(&self) -> DiffeoPath {
        DiffeoPath::from_family(self.family.clone(), Warp::Linear)
    }

    /// `H_t(q)` at the image point `q`.
    pub fn hamiltonian_at_image(&self, t: f64, q: &Point) -> Result<f64> {
        match &self.hamiltonian {
            Some(h) => Ok(h.value(q)),
            None => {
                let p = self.family.inverse_at(t).eval(q)?;
                contact_hamiltonian_of_path(&self.family, t, &p)
            }
        }
    }
}

/// `alpha` of the difference quotient of `t -> f_t(p)`, at `f_t(p)`.
pub fn contact_hamiltonian_of_path(family: &Family, t: f64, p: &Point) -> Result<f64> {
    Ok(DiffeoPath::from_family(family.clone(), Warp::Linear)
        .velocity_fd(t, p)?
        .alpha)
}

/// Radially symmetric `height * mu((k3 - |p|) / (k3 - k2))`: `height` on the
/// ball of radius `k2`, zero outside `k3`.
pub fn bump_field(k2: f64, k3: f64, height: f64) -> Result<ScalarField> {
    if !(height >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bump height must be non-negative, got {height}"
        )));
    }
    Ok(ScalarField::Bump(Bump::new(k2, k3, height)?))
}

#[derive(Clone, Debug)]
pub struct ExtensionOptions {
    /// Points per axis of the verification grid around `K3`.
    pub grid_n: usize,
    /// Points per axis of the dense verification grid on `K1`.
    pub inner_n: usize,
    pub time_samples: usize,
    /// Grid and time samples for the constants and the containment check.
    pub constants_n: usize,
    pub constants_times: usize,
    /// Points per axis of the grid certifying the factorizations of `psi`.
    pub factor_n: usize,
    /// Fixed bump height; `None` uses `-C1 C2 + 1` and doubles on shortfall.
    pub height: Option<f64>,
    pub max_height_doublings: u32,
    /// Alpha tolerance for samples that are not closed form.
    pub tol: f64,
    pub synthesis: SynthesisOptions,
}

impl Default for ExtensionOptions {
    fn default() -> Self {
        Self {
            grid_n: 21,
            inner_n: 11,
            time_samples: 64,
            constants_n: 9,
            constants_times: 17,
            factor_n: 11,
            height: None,
            max_height_doublings: 10,
            tol: 1e-6,
            synthesis: SynthesisOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtensionParams {
    pub c1: f64,
    pub c2: f64,
    pub k0: f64,
    pub k1: f64,
    /// Plateau radius of the bump.
    pub k2: f64,
    /// Outer radius of the bump.
    pub bump_radius: f64,
    pub cutoff_inner: f64,
    pub cutoff_outer: f64,
    /// Radius outside of which the output agrees with the input.
    pub k3: f64,
    pub height: f64,
    /// RK4 step of the bump flow.
    pub step: f64,
    pub eps: Option<f64>,
    pub subdivisions: usize,
}

impl ExtensionParams {
    fn with_plateau(mut self, k2: f64) -> Self {
        self.k2 = k2;
        self.bump_radius = 2.0 * k2;
        self.cutoff_inner = self.bump_radius + PSI_MAX_EPS + CUTOFF_MARGIN;
        self.cutoff_outer = self.cutoff_inner + CUTOFF_WIDTH;
        self.k3 = self.cutoff_outer;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtensionReport {
    pub params: ExtensionParams,
    /// The input was already positive and is returned unchanged.
    pub trivial: bool,
    pub height_doublings: u32,
    pub plateau_doublings: u32,
    pub input_shell_min_alpha: f64,
    pub max_kernel_defect: f64,
    pub classification: Classification,
    pub far_field_points: usize,
    pub far_field_sup: f64,
    pub endpoint_error: f64,
    /// Largest `|phi_t psi_t(p)|` over samples `p` in `K1`.
    pub containment_radius: f64,
}

pub struct Extension {
    pub path: DiffeoPath,
    pub report: ExtensionReport,
}

fn ladder_at_least(r: f64) -> Result<f64> {
    let mut k = 1.0;
    while k < r {
        k *= 2.0;
        if k > RADIUS_CAP {
            return Err(Error::ContainmentFailure(format!(
                "radius {r} exceeds the ladder cap {RADIUS_CAP}"
            )));
        }
    }
    Ok(k)
}

fn ball_points(r: f64, n: usize) -> Vec<Point> {
    let mut pts: Vec<Point> = Grid::cube(r, n)
        .points()
        .into_iter()
        .filter(|p| p.coords.norm() <= r)
        .collect();
    if pts.is_empty() {
        pts.push(Point::origin());
    }
    pts
}

/// `C1`, `C2`, `K1` and the initial radii and height.
pub fn compute_constants(input: &ContactPathInput, opts: &ExtensionOptions) -> Result<ExtensionParams> {
    if !(input.k0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("K0 must be non-negative, got {}", input.k0)));
    }
    let times = time_grid(opts.constants_times);
    let mut reach = input.k0;
    for &t in &times {
        let inv = input.family.inverse_at(t);
        for q in ball_points(input.k0, opts.constants_n) {
            reach = reach.max(inv.eval(&q)?.coords.norm());
        }
    }
    let k1 = ladder_at_least(reach)?;
    let cube = Grid::cube(k1, opts.constants_n).points();
    let mut c1 = f64::INFINITY;
    match &input.hamiltonian {
        Some(h) => {
            for q in &cube {
                c1 = c1.min(h.value(q));
            }
        }
        None => {
            for &t in &times {
                for p in &cube {
                    c1 = c1.min(contact_hamiltonian_of_path(&input.family, t, p)?);
                }
            }
        }
    }
    let mut c2 = f64::NEG_INFINITY;
    let ball = ball_points(k1, opts.constants_n);
    for &t in &times {
        let f = input.family.at(t);
        for p in &ball {
            c2 = c2.max(conformal_factor(&f, p)?);
        }
    }
    let height = match opts.height {
        Some(h) => h,
        None if c1 < 0.0 => -c1 * c2 + 1.0,
        None if c1 > 0.0 => 0.0,
        None => 1.0,
    };
    let params = ExtensionParams {
        c1,
        c2,
        k0: input.k0,
        k1,
        k2: 0.0,
        bump_radius: 0.0,
        cutoff_inner: 0.0,
        cutoff_outer: 0.0,
        k3: 0.0,
        height,
        step: 1.0 / BUMP_STEPS as f64,
        eps: None,
        subdivisions: 0,
    };
    // the plateau holds K1 and its Reeb translates by up to the height
    let k2 = ladder_at_least(k1 + height.max(0.0) + PSI_MAX_EPS)?;
    Ok(params.with_plateau(k2))
}

/// Smallest `H_t` over image points outside `K0`.
fn shell_min_alpha(input: &ContactPathInput, opts: &ExtensionOptions) -> Result<(f64, f64, Point)> {
    let r = (2.0 * input.k0).max(1.0);
    let shell: Vec<Point> = Grid::cube(r, opts.constants_n)
        .points()
        .into_iter()
        .filter(|q| q.coords.norm() > input.k0)
        .collect();
    let times = match input.hamiltonian {
        Some(_) => vec![0.0],
        None => time_grid(opts.constants_times),
    };
    let mut worst = (f64::INFINITY, 0.0, Point::origin());
    for &t in &times {
        for q in &shell {
            let a = input.hamiltonian_at_image(t, q)?;
            if a < worst.0 {
                worst = (a, t, *q);
            }
        }
    }
    Ok(worst)
}

fn max_kernel_defect(input: &ContactPathInput, opts: &ExtensionOptions, k1: f64) -> Result<f64> {
    let pts = Grid::cube(k1, opts.constants_n).points();
    let mut worst = 0.0f64;
    for t in time_grid(opts.constants_times) {
        let f = input.family.at(t);
        for p in &pts {
            worst = worst.max(kernel_defect(&f, p)?);
        }
    }
    Ok(worst)
}

/// `(phi, psi)` for the current parameters.
fn build_loop(params: &mut ExtensionParams, opts: &ExtensionOptions) -> Result<(DiffeoPath, DiffeoPath)> {
    let h = bump_field(params.k2, params.bump_radius, params.height)?;
    let phi = DiffeoPath::hamiltonian(h.clone(), 1.0, BUMP_STEPS, Warp::Linear);
    let back = Family::Hamiltonian {
        h,
        duration: -1.0,
        nsteps: BUMP_STEPS,
    };
    let sopts = SynthesisOptions {
        grid: Grid::cube(params.k3, opts.factor_n),
        factorize: FactorizeOptions {
            translation: Translation::Cutoff {
                inner: params.cutoff_inner,
                outer: params.cutoff_outer,
            },
            ..opts.synthesis.factorize
        },
        eps: opts.synthesis.eps.map(|e| e.min(PSI_MAX_EPS)),
        ..opts.synthesis.clone()
    };
    let psi = subdivide_and_connect(&back, None, &sopts)?;
    params.eps = psi.eps;
    params.subdivisions = psi.subdivisions;
    Ok((phi, psi.path))
}

fn containment_radius(g: &DiffeoPath, k1: f64, opts: &ExtensionOptions) -> Result<f64> {
    let pts = ball_points(k1, opts.constants_n);
    let mut r = 0.0f64;
    for t in time_grid(opts.constants_times) {
        let s = g.slice(t);
        for p in &pts {
            r = r.max(s.eval(p)?.coords.norm());
        }
    }
    Ok(r)
}

/// Runs the pipeline and certifies positivity, far-field agreement and the
/// endpoints on the verification grids.
pub fn extend_positive(input: &ContactPathInput, opts: &ExtensionOptions) -> Result<Extension> {
    let (shell_min, shell_t, shell_at) = shell_min_alpha(input, opts)?;
    if !(shell_min > 0.0) {
        return Err(Error::Precondition(format!(
            "input is not positive outside K0 = {}: alpha = {shell_min:.3e} at t = {shell_t}, q = ({}, {}, {})",
            input.k0, shell_at.x, shell_at.y, shell_at.z
        )));
    }
    let mut params = compute_constants(input, opts)?;
    let defect = max_kernel_defect(input, opts, params.k1)?;
    if !(defect <= opts.tol) {
        return Err(Error::Precondition(format!(
            "input slices are not contactomorphisms: kernel defect {defect:.3e}"
        )));
    }
    let times = time_grid(opts.time_samples);
    let outer = Grid::cube(1.25 * params.k3.max(params.k1), opts.grid_n).points();
    let inner = Grid::cube(params.k1, opts.inner_n).points();
    let mut points = outer.clone();
    points.extend(inner);

    let trivial = params.c1 > 0.0 && opts.height.is_none();
    let mut height_doublings = 0;
    let mut plateau_doublings = 0;
    let (path, containment, classification) = if trivial {
        let path = input.path();
        let c = classify_samples(&sweep(&path, &points, &times)?, opts.tol);
        (path, 0.0, c)
    } else {
        loop {
            let (phi, psi) = build_loop(&mut params, opts)?;
            let g = DiffeoPath::Product(vec![phi.clone(), psi.clone()]);
            let r = containment_radius(&g, params.k1, opts)?;
            if r > params.k2 {
                let k2 = ladder_at_least(2.0 * params.k2)?;
                params = params.with_plateau(k2);
                plateau_doublings += 1;
                continue;
            }
            let path = DiffeoPath::Product(vec![input.path(), phi, psi]);
            let c = classify_samples(&sweep(&path, &points, &times)?, opts.tol);
            if c.verdict != Verdict::Positive
                && opts.height.is_none()
                && height_doublings < opts.max_height_doublings
            {
                params.height *= 2.0;
                height_doublings += 1;
                continue;
            }
            break (path, r, c);
        }
    };
    if classification.verdict != Verdict::Positive {
        return Err(Error::PositivityShortfall {
            min_alpha: classification.stats.min_alpha,
            t: classification.stats.argmin_t,
            at: classification.stats.argmin_p,
        });
    }

    let far: Vec<Point> = outer
        .into_iter()
        .filter(|p| p.coords.norm() >= params.k3)
        .collect();
    let mut far_sup = 0.0f64;
    for &t in &times {
        let (a, b) = (path.slice(t), input.family.at(t));
        for p in &far {
            far_sup = far_sup.max((a.eval(p)? - b.eval(p)?).norm());
        }
    }
    let (a, b) = (path.end(), input.family.end());
    let mut endpoint_error = 0.0f64;
    for p in &points {
        endpoint_error = endpoint_error.max((a.eval(p)? - b.eval(p)?).norm());
    }

    Ok(Extension {
        path,
        report: ExtensionReport {
            params,
            trivial,
            height_doublings,
            plateau_doublings,
            input_shell_min_alpha: shell_min,
            max_kernel_defect: defect,
            classification,
            far_field_points: far.len(),
            far_field_sup: far_sup,
            endpoint_error,
            containment_radius: containment,
        },
    })
}
