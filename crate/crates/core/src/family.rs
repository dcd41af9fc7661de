//! Time-indexed families `t -> f_t`, `t in [0, 1]`.

use std::sync::Arc;

use crate::contact::FrameField;
use crate::diffeo::{Diffeo, HAMILTONIAN_STEP};
use crate::error::Result;
use crate::expr::MapExpr;
use crate::field::ScalarField;
use crate::ode::HamiltonianSlice;
use crate::paths::{DiffeoPath, Generator};

/// Default number of RK4 steps for a Hamiltonian family over `[0, 1]`.
pub const FAMILY_STEPS: usize = 64;

#[derive(Clone, Debug)]
pub enum Family {
    Constant(Diffeo),
    /// `t -> phi^field_{t * rate}`
    Frame { field: FrameField, rate: f64 },
    /// `t -> RK4 flow of X_h for time t * duration`, always `nsteps` steps.
    Hamiltonian {
        h: ScalarField,
        duration: f64,
        nsteps: usize,
    },
    /// Parsed map in `x, y, z, t`.
    Expr(Arc<MapExpr>),
    Path(Arc<DiffeoPath>),
    /// `t -> f_t o c`
    RightTranslated(Box<Family>, Diffeo),
}

impl Family {
    pub fn parse(src: &str) -> Result<Self> {
        Ok(Family::Expr(Arc::new(MapExpr::parse_family(src)?)))
    }

    pub fn reeb(total: f64) -> Self {
        Family::Frame {
            field: FrameField::Reeb,
            rate: total,
        }
    }

    /// Hamiltonian flow family with at least `FAMILY_STEPS` steps, rounded
    /// up to a power of two so equal subdivisions align with the steps.
    pub fn hamiltonian(h: ScalarField, duration: f64) -> Self {
        let need = (duration.abs() / HAMILTONIAN_STEP).ceil() as usize;
        Family::Hamiltonian {
            h,
            duration,
            nsteps: need.max(FAMILY_STEPS).next_power_of_two(),
        }
    }

    pub fn at(&self, t: f64) -> Diffeo {
        match self {
            Family::Constant(d) => d.clone(),
            Family::Frame { field, rate } => {
                if t == 0.0 {
                    Diffeo::Identity
                } else {
                    Diffeo::Flow(*field, t * rate)
                }
            }
            Family::Hamiltonian {
                h,
                duration,
                nsteps,
            } => {
                if t == 0.0 {
                    Diffeo::Identity
                } else {
                    Diffeo::Hamiltonian(Arc::new(HamiltonianSlice {
                        h: h.clone(),
                        step: t * duration / *nsteps as f64,
                        nsteps: *nsteps,
                    }))
                }
            }
            Family::Expr(m) => Diffeo::Parsed(m.clone(), t),
            Family::Path(p) => p.slice(t),
            Family::RightTranslated(f, c) => f.at(t).compose(c),
        }
    }

    /// Inverse of the slice at `t`. For Hamiltonian families this is the
    /// backward RK4 flow, exact only up to the integrator error.
    pub fn inverse_at(&self, t: f64) -> Diffeo {
        match self {
            Family::Hamiltonian {
                h,
                duration,
                nsteps,
            } if t != 0.0 => Diffeo::Hamiltonian(Arc::new(HamiltonianSlice {
                h: h.clone(),
                step: -t * duration / *nsteps as f64,
                nsteps: *nsteps,
            })),
            _ => self.at(t).inverse(),
        }
    }

    pub fn start(&self) -> Diffeo {
        self.at(0.0)
    }

    pub fn end(&self) -> Diffeo {
        self.at(1.0)
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Family::Constant(_) => true,
            Family::Frame { rate, .. } => *rate == 0.0,
            Family::Hamiltonian { duration, .. } => *duration == 0.0,
            Family::Expr(m) => !m.is_time_dependent(),
            Family::Path(_) => false,
            Family::RightTranslated(f, _) => f.is_constant(),
        }
    }

    /// The time-independent generator, for one-parameter groups.
    pub(crate) fn generator(&self) -> Option<Generator<'_>> {
        match self {
            Family::Frame { field, rate } => Some(Generator::Frame(*field, *rate)),
            Family::Hamiltonian { h, duration, .. } => Some(Generator::Hamiltonian(h, *duration)),
            Family::RightTranslated(f, _) => f.generator(),
            _ => None,
        }
    }

    /// For one-parameter groups: the common increment `f_{1/m}` and the
    /// starts `f_{j/m}`, built so that `increment o start_j` reproduces
    /// `start_{j+1}` up to rounding (exactly for Hamiltonian families).
    pub fn aligned_increments(&self, m: usize) -> Option<(Diffeo, Vec<Diffeo>)> {
        let m = m.max(1);
        match self {
            Family::Frame { field, rate } => {
                let inc = Diffeo::Flow(*field, rate / m as f64);
                let starts = (0..m)
                    .map(|j| {
                        if j == 0 {
                            Diffeo::Identity
                        } else {
                            Diffeo::Flow(*field, rate * j as f64 / m as f64)
                        }
                    })
                    .collect();
                Some((inc, starts))
            }
            Family::Hamiltonian {
                h,
                duration,
                nsteps,
            } => {
                let per = nsteps.div_ceil(m).max(1);
                let step = duration / (m * per) as f64;
                let slice = |k: usize| {
                    if k == 0 {
                        Diffeo::Identity
                    } else {
                        Diffeo::Hamiltonian(Arc::new(HamiltonianSlice {
                            h: h.clone(),
                            step,
                            nsteps: k,
                        }))
                    }
                };
                Some((slice(per), (0..m).map(|j| slice(j * per)).collect()))
            }
            Family::RightTranslated(f, c) => f
                .aligned_increments(m)
                .map(|(inc, starts)| (inc, starts.iter().map(|s| s.compose(c)).collect())),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::Point;

    #[test]
    fn hamiltonian_increments_align_with_end() {
        let fam = Family::hamiltonian(ScalarField::parse("tanh(z)").unwrap(), 1.0);
        let (inc, starts) = fam.aligned_increments(8).unwrap();
        let p = Point::new(0.3, -0.1, 0.4);
        let mut q = p;
        for s in &starts {
            assert!((s.eval(&p).unwrap() - q).norm() == 0.0);
            q = inc.eval(&q).unwrap();
        }
        assert_eq!(q, fam.end().eval(&p).unwrap());
    }

    #[test]
    fn expression_family_slices() {
        let fam = Family::parse("(x, y, z + 2*t)").unwrap();
        let q = fam.at(0.25).eval(&Point::origin()).unwrap();
        assert_eq!(q, Point::new(0.0, 0.0, 0.5));
        assert!(!fam.is_constant());
        assert!(Family::parse("(x, y, z)").unwrap().is_constant());
    }
}
