//! Smooth one-dimensional profiles: the flat ramp used by bump fields and
//! the time warps used to flatten path clocks at junctions.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Flat ramp with `mu(u) = 0` for `u <= 0`, `mu(u) = 1` for `u >= 1`,
/// C-infinity everywhere. Returns `(mu, mu', mu'')`.
///
/// Written as a logistic of `g(u) = 1/u - 1/(1-u)`, which keeps all three
/// values in closed form.
pub fn flat_ramp(u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if u >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let v = 1.0 - u;
    let g = 1.0 / u - 1.0 / v;
    if g > 700.0 {
        return (0.0, 0.0, 0.0);
    }
    if g < -700.0 {
        return (1.0, 0.0, 0.0);
    }
    let l = 1.0 / (1.0 + g.exp());
    let dl = -l * (1.0 - l);
    let ddl = l * (1.0 - l) * (1.0 - 2.0 * l);
    let dg = -1.0 / (u * u) - 1.0 / (v * v);
    let ddg = 2.0 / (u * u * u) - 2.0 / (v * v * v);
    (l, dl * dg, ddl * dg * dg + dl * ddg)
}

fn beta(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        (-1.0 / (u * (1.0 - u))).exp()
    }
}

#[allow(clippy::excessive_precision)]
const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_3),
];

fn gauss8(a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    GL8.iter()
        .map(|&(x, w)| w * (beta(c - r * x) + beta(c + r * x)))
        .sum::<f64>()
        * r
}

const CELLS: usize = 256;

fn cumulative() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut acc = vec![0.0; CELLS + 1];
        for k in 0..CELLS {
            let a = k as f64 / CELLS as f64;
            let b = (k + 1) as f64 / CELLS as f64;
            acc[k + 1] = acc[k] + gauss8(a, b);
        }
        acc
    })
}

/// `sigma(s) = int_0^s beta / int_0^1 beta` with `beta(u) = exp(-1/(u(1-u)))`.
/// Returns `(sigma, sigma', sigma'')`.
pub fn flat_warp(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    // evaluate on the left half and reflect, so sigma(1 - s) = 1 - sigma(s)
    if s > 0.5 {
        let (v, d, dd) = flat_warp(1.0 - s);
        return (1.0 - v, d, -dd);
    }
    let table = cumulative();
    let total = table[CELLS];
    let k = ((s * CELLS as f64) as usize).min(CELLS - 1);
    let a = k as f64 / CELLS as f64;
    let v = (table[k] + gauss8(a, s)) / total;
    let b = beta(s);
    let db = b * (1.0 - 2.0 * s) / (s * (1.0 - s)).powi(2);
    (v, b / total, db / total)
}

/// Reparametrization of a segment clock `s in [0,1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Warp {
    Linear,
    Smoothstep,
    #[default]
    Flat,
}

impl Warp {
    /// Returns `(sigma(s), sigma'(s))`; `sigma(0) = 0` and `sigma(1) = 1` exactly.
    pub fn eval(self, s: f64) -> (f64, f64) {
        let s = s.clamp(0.0, 1.0);
        match self {
            Warp::Linear => (s, 1.0),
            Warp::Smoothstep => (s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s)),
            Warp::Flat => {
                let (v, d, _) = flat_warp(s);
                (v, d)
            }
        }
    }
}
