//! JSON recipes that rebuild a path, for `legendrian --path-from` and
//! `verify --path`.

use serde::{Deserialize, Serialize};

use contactflex::diffeo::Diffeo;
use contactflex::extension::{extend_positive, ContactPathInput, ExtensionOptions};
use contactflex::family::Family;
use contactflex::field::ScalarField;
use contactflex::paths::{concat_unchecked, DiffeoPath, Warp};
use contactflex::synthesis::{
    null_path_to, positive_path_compact, positive_path_to, reeb_null_path, subdivide_and_connect,
    SynthesisOptions,
};
use contactflex::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PathRecipe {
    Stationary,
    /// Reeb translation by `t * duration`.
    Reeb { duration: f64 },
    Hamiltonian {
        h: String,
        duration: f64,
        #[serde(default = "default_steps")]
        steps: usize,
    },
    /// Null path to a map given as an expression or a builtin name.
    Null {
        map: String,
        #[serde(default)]
        eps: Option<f64>,
    },
    ReebNull { reeb_time: f64, eps: f64 },
    Positive {
        map: String,
        reeb_time: f64,
        #[serde(default)]
        compact: bool,
    },
    Connect {
        family: String,
        #[serde(default)]
        subdivisions: Option<usize>,
    },
    Extension {
        #[serde(default)]
        hamiltonian: Option<String>,
        #[serde(default = "default_k0")]
        k0: f64,
    },
    Reversed { inner: Box<PathRecipe> },
    Concat { parts: Vec<PathRecipe> },
}

fn default_steps() -> usize {
    64
}

fn default_k0() -> f64 {
    1.0
}

/// `id`, `reeb:0.2` and friends first, then the map grammar.
pub fn parse_map(src: &str) -> Result<Diffeo> {
    if src.trim_start().starts_with('(') {
        Diffeo::parse(src)
    } else {
        Diffeo::builtin(src)
    }
}

impl PathRecipe {
    pub fn build(&self, opts: &SynthesisOptions) -> Result<DiffeoPath> {
        Ok(match self {
            PathRecipe::Stationary => DiffeoPath::stationary(),
            PathRecipe::Reeb { duration } => DiffeoPath::reeb(*duration),
            PathRecipe::Hamiltonian { h, duration, steps } => {
                DiffeoPath::hamiltonian(ScalarField::parse(h)?, *duration, *steps, Warp::Linear)
            }
            PathRecipe::Null { map, eps } => {
                let opts = SynthesisOptions {
                    eps: eps.or(opts.eps),
                    ..opts.clone()
                };
                null_path_to(&parse_map(map)?, &opts)?.path
            }
            PathRecipe::ReebNull { reeb_time, eps } => reeb_null_path(*reeb_time, *eps)?,
            PathRecipe::Positive {
                map,
                reeb_time,
                compact,
            } => {
                let f = parse_map(map)?;
                if *compact {
                    positive_path_compact(&f, *reeb_time, opts)?.path
                } else {
                    positive_path_to(&f, *reeb_time, opts)?.path
                }
            }
            PathRecipe::Connect {
                family,
                subdivisions,
            } => subdivide_and_connect(&Family::parse(family)?, *subdivisions, opts)?.path,
            PathRecipe::Extension { hamiltonian, k0 } => {
                let input = match hamiltonian {
                    Some(h) => ContactPathInput::from_hamiltonian(ScalarField::parse(h)?, *k0),
                    None => ContactPathInput {
                        k0: *k0,
                        ..ContactPathInput::shipped_example()
                    },
                };
                extend_positive(&input, &ExtensionOptions::default())?.path
            }
            PathRecipe::Reversed { inner } => inner.build(opts)?.reversed(),
            PathRecipe::Concat { parts } => {
                let built = parts
                    .iter()
                    .map(|p| p.build(opts))
                    .collect::<Result<Vec<_>>>()?;
                concat_unchecked(&built)
            }
        })
    }

    /// The map the path should end at, when it is known without building.
    pub fn target(&self) -> Result<Option<Diffeo>> {
        Ok(match self {
            PathRecipe::Stationary => Some(Diffeo::Identity),
            PathRecipe::Reeb { duration } => Some(Diffeo::reeb(*duration)),
            PathRecipe::ReebNull { reeb_time, .. } => Some(Diffeo::reeb(*reeb_time)),
            PathRecipe::Null { map, .. } | PathRecipe::Positive { map, .. } => Some(parse_map(map)?),
            PathRecipe::Connect { family, .. } => Some(Family::parse(family)?.end()),
            _ => None,
        })
    }
}
