//! Built-in initial densities.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{FpmeError, Result};
use crate::grid::{check_grids, DensityField, GridSpec};
use crate::io::load_density;

/// Default width of the Gaussian bump.
pub const DEFAULT_BUMP_WIDTH: f64 = 0.05;

/// Initial condition selector: `uniform`, `cosine`, `bump[:WIDTH]` or
/// `file:PATH`.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    Uniform,
    /// `1 + ½ cos(2π x_1)`.
    Cosine,
    /// Periodized Gaussian centered at `(½, …, ½)`.
    Bump { width: f64 },
    File(PathBuf),
}

impl InitialCondition {
    /// The unit-mass density on `grid`.
    pub fn build(&self, grid: GridSpec) -> Result<DensityField> {
        match self {
            InitialCondition::Uniform => Ok(DensityField::uniform(grid)),
            InitialCondition::Cosine => {
                DensityField::from_fn(grid, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos())?.normalized()
            }
            InitialCondition::Bump { width } => {
                let d = grid.dim();
                DensityField::from_fn(grid, |x| {
                    let axis = |c: f64| -> f64 {
                        (-3..=3)
                            .map(|k| {
                                let z = c - 0.5 + k as f64;
                                (-z * z / (2.0 * width * width)).exp()
                            })
                            .sum()
                    };
                    (0..d).map(|a| axis(x[a])).product()
                })?
                .normalized()
            }
            InitialCondition::File(path) => {
                let rho = load_density(path)?;
                check_grids(&grid, rho.grid())?;
                rho.normalized()
            }
        }
    }
}

impl FromStr for InitialCondition {
    type Err = FpmeError;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(InitialCondition::File(PathBuf::from(path)));
        }
        if let Some(w) = s.strip_prefix("bump:") {
            let width: f64 = w
                .parse()
                .map_err(|_| FpmeError::InvalidConfig(format!("bad bump width \"{w}\"")))?;
            if !(width > 0.0) || !width.is_finite() {
                return Err(FpmeError::InvalidConfig(format!("bump width must be positive, got {width}")));
            }
            return Ok(InitialCondition::Bump { width });
        }
        match s {
            "uniform" => Ok(InitialCondition::Uniform),
            "cosine" => Ok(InitialCondition::Cosine),
            "bump" => Ok(InitialCondition::Bump {
                width: DEFAULT_BUMP_WIDTH,
            }),
            _ => Err(FpmeError::InvalidConfig(format!(
                "unknown initial condition \"{s}\" (uniform, cosine, bump[:WIDTH], file:PATH)"
            ))),
        }
    }
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::Uniform => write!(f, "uniform"),
            InitialCondition::Cosine => write!(f, "cosine"),
            InitialCondition::Bump { width } => write!(f, "bump:{width}"),
            InitialCondition::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::io::store_density;

    #[test]
    fn parse_and_display() {
        for s in ["uniform", "cosine", "bump:0.1", "file:/tmp/x.fpme"] {
            assert_eq!(s.parse::<InitialCondition>().unwrap().to_string(), s);
        }
        assert_eq!("bump".parse::<InitialCondition>().unwrap(), InitialCondition::Bump { width: 0.05 });
        assert!("bump:-1".parse::<InitialCondition>().is_err());
        assert!("gauss".parse::<InitialCondition>().is_err());
    }

    #[test]
    fn built_densities_have_unit_mass() {
        for d in [1, 2] {
            let g = make_grid(d, 16).unwrap();
            for ic in [InitialCondition::Uniform, InitialCondition::Cosine, InitialCondition::Bump { width: 0.05 }] {
                let r = ic.build(g).unwrap();
                assert!((r.mass() - 1.0).abs() < 1e-14);
                assert!(r.min_value() > 0.0);
            }
        }
        let g = make_grid(1, 64).unwrap();
        let bump = InitialCondition::Bump { width: 0.05 }.build(g).unwrap();
        assert_eq!(bump.values()[32], bump.max_value());
        assert!((bump.values()[31] - bump.values()[33]).abs() < 1e-12);
        let cos = InitialCondition::Cosine.build(g).unwrap();
        assert!((cos.values()[0] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn from_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.fpme");
        let g = make_grid(1, 8).unwrap();
        let r = InitialCondition::Cosine.build(g).unwrap();
        store_density(&r, &p).unwrap();
        let ic: InitialCondition = format!("file:{}", p.display()).parse().unwrap();
        assert_eq!(ic.build(g).unwrap(), r);
        assert!(ic.build(make_grid(1, 4).unwrap()).is_err());
    }
}
