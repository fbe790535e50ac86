//! Periodic grid geometry on the unit torus `[0,1)^d`.
//!
//! Cells are collocated at their centers `i·h` along each axis. Densities are
//! piecewise constant, so every integral below is a midpoint sum with cell
//! volume `h^d`. Pair quantities live on ordered cell pairs `(i, j)`, `i ≠ j`,
//! and are stored antisymmetrically: only the strict upper triangle `i < j`
//! is kept.

use serde::{Deserialize, Serialize};

use crate::error::{FpmeError, Result};
use crate::kernel::KernelMatrix;

/// Uniform periodic grid with `n` cells per axis in dimension `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    d: usize,
    n: usize,
}

/// A point of the torus. Unused trailing coordinates are zero.
pub type Point = [f64; 2];

impl GridSpec {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(FpmeError::UnsupportedDimension(d));
        }
        if n < 2 {
            return Err(FpmeError::ResolutionTooSmall(n));
        }
        Ok(GridSpec { d, n })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Cells per axis.
    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Total number of cells `n^d`.
    pub fn cells(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    /// Number of stored (unordered) pairs `N(N-1)/2`.
    pub fn pair_count(&self) -> usize {
        let n = self.cells();
        n * (n - 1) / 2
    }

    /// Per-axis integer coordinates of a cell. Row-major: the first axis
    /// varies slowest.
    pub fn multi_index(&self, cell: usize) -> [usize; 2] {
        match self.d {
            1 => [cell, 0],
            _ => [cell / self.n, cell % self.n],
        }
    }

    pub fn linear_index(&self, idx: [usize; 2]) -> usize {
        match self.d {
            1 => idx[0],
            _ => idx[0] * self.n + idx[1],
        }
    }

    pub fn center(&self, cell: usize) -> Point {
        let h = self.spacing();
        let mi = self.multi_index(cell);
        match self.d {
            1 => [mi[0] as f64 * h, 0.0],
            _ => [mi[0] as f64 * h, mi[1] as f64 * h],
        }
    }

    pub fn centers(&self) -> Vec<Point> {
        (0..self.cells()).map(|c| self.center(c)).collect()
    }

    /// Index of the lattice difference `x_j - x_i` wrapped onto the grid.
    /// Differences with equal index share the same kernel value.
    pub fn difference_index(&self, i: usize, j: usize) -> usize {
        let a = self.multi_index(i);
        let b = self.multi_index(j);
        let n = self.n;
        let da = (b[0] + n - a[0]) % n;
        let db = (b[1] + n - a[1]) % n;
        match self.d {
            1 => da,
            _ => da * n + db,
        }
    }

    /// Wrapped difference vector, each component in `(-1/2, 1/2]`.
    pub fn difference_vector(&self, diff_index: usize) -> Point {
        let mi = self.multi_index(diff_index);
        let h = self.spacing();
        let n = self.n;
        let wrap = |k: usize| {
            if 2 * k > n {
                -((n - k) as f64) * h
            } else {
                k as f64 * h
            }
        };
        match self.d {
            1 => [wrap(mi[0]), 0.0],
            _ => [wrap(mi[0]), wrap(mi[1])],
        }
    }

    fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(FpmeError::GridMismatch(format!(
                "(d={}, n={}) vs (d={}, n={})",
                self.d, self.n, other.d, other.n
            )));
        }
        Ok(())
    }
}

/// Convenience constructor mirroring [`GridSpec::new`].
pub fn make_grid(d: usize, n: usize) -> Result<GridSpec> {
    GridSpec::new(d, n)
}

/// Index of the pair `(i, j)`, `i < j`, in packed upper-triangle storage.
#[inline]
pub fn pair_index(i: usize, j: usize, cells: usize) -> usize {
    debug_assert!(i < j && j < cells);
    i * cells - i * (i + 1) / 2 + (j - i - 1)
}

fn wrap_unit(v: f64) -> f64 {
    let w = v - v.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Distance on the flat torus, `min_k |x - y + k|` over integer shifts.
///
/// Inputs are wrapped into `[0,1)` first; only the `3^d` nearest shifts
/// can attain the minimum.
pub fn torus_distance(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "dimension mismatch");
    x.iter()
        .zip(y)
        .map(|(&a, &b)| {
            let diff = wrap_unit(a) - wrap_unit(b);
            [-1.0, 0.0, 1.0]
                .iter()
                .map(|k| (diff + k).abs())
                .fold(f64::INFINITY, f64::min)
        })
        .map(|c| c * c)
        .sum::<f64>()
        .sqrt()
}

/// Torus distance between two cell centers.
pub fn cell_distance(grid: &GridSpec, i: usize, j: usize) -> f64 {
    let d = grid.dim();
    torus_distance(&grid.center(i)[..d], &grid.center(j)[..d])
}

/// Grid density `ρ ≥ 0`; a probability density once normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl DensityField {
    /// Wraps raw values, rejecting non-finite or negative entries. The mass is
    /// not adjusted; see [`DensityField::normalized`].
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(FpmeError::LengthMismatch {
                expected: grid.cells(),
                got: values.len(),
            });
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(FpmeError::InvalidDensity(format!(
                "entry {i} is {v} (must be finite and nonnegative)"
            )));
        }
        Ok(DensityField { grid, values })
    }

    /// The uniform probability density (all entries one).
    pub fn uniform(grid: GridSpec) -> Self {
        DensityField {
            grid,
            values: vec![1.0; grid.cells()],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = (0..grid.cells()).map(|c| f(grid.center(c))).collect();
        DensityField::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `Σ ρ_i h^d`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Scales to unit mass.
    pub fn normalized(&self) -> Result<Self> {
        let mass = self.mass();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(FpmeError::NonPositiveMass(mass));
        }
        Ok(DensityField {
            grid: self.grid,
            values: self.values.iter().map(|v| v / mass).collect(),
        })
    }

    /// Raises every entry to at least `floor` and renormalizes.
    pub fn floored(&self, floor: f64) -> Result<Self> {
        if self.min_value() >= floor {
            return Ok(self.clone());
        }
        let raised = DensityField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.max(floor)).collect(),
        };
        raised.normalized()
    }

    /// `Σ |ρ_i - η_i| h^d`.
    pub fn l1_distance(&self, other: &DensityField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.grid.cell_volume())
    }

    pub fn max_abs_difference(&self, other: &DensityField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Scales a density to unit mass.
pub fn normalize(rho: &DensityField) -> Result<DensityField> {
    rho.normalized()
}

/// Real-valued samples on the grid (test functions, operator outputs).
#[derive(Clone, Debug, PartialEq)]
pub struct NodeField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl NodeField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(FpmeError::LengthMismatch {
                expected: grid.cells(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FpmeError::Domain("node field has non-finite entries".into()));
        }
        Ok(NodeField { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        NodeField {
            grid,
            values: vec![0.0; grid.cells()],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = (0..grid.cells()).map(|c| f(grid.center(c))).collect();
        NodeField::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `Σ f_i h^d`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `Σ f_i g_i h^d`.
    pub fn inner(&self, other: &NodeField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_volume())
    }
}

impl From<DensityField> for NodeField {
    fn from(rho: DensityField) -> Self {
        NodeField {
            grid: rho.grid,
            values: rho.values,
        }
    }
}

/// Antisymmetric values on ordered cell pairs, `V(i,j) = -V(j,i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairField {
    grid: GridSpec,
    upper: Vec<f64>,
}

impl PairField {
    pub fn zeros(grid: GridSpec) -> Self {
        PairField {
            grid,
            upper: vec![0.0; grid.pair_count()],
        }
    }

    /// Builds from the packed upper triangle (`i < j`, row by row).
    pub fn from_upper(grid: GridSpec, upper: Vec<f64>) -> Result<Self> {
        if upper.len() != grid.pair_count() {
            return Err(FpmeError::LengthMismatch {
                expected: grid.pair_count(),
                got: upper.len(),
            });
        }
        Ok(PairField { grid, upper })
    }

    /// Evaluates `f(i, j)` for every `i < j`.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let n = grid.cells();
        let mut upper = Vec::with_capacity(grid.pair_count());
        for i in 0..n {
            for j in i + 1..n {
                upper.push(f(i, j));
            }
        }
        PairField { grid, upper }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Signed value on the ordered pair `(i, j)`; zero on the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let n = self.grid.cells();
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.upper[pair_index(i, j, n)],
            std::cmp::Ordering::Greater => -self.upper[pair_index(j, i, n)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    /// Sets `V(i,j) = v` and therefore `V(j,i) = -v`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let n = self.grid.cells();
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.upper[pair_index(i, j, n)] = v,
            std::cmp::Ordering::Greater => self.upper[pair_index(j, i, n)] = -v,
            std::cmp::Ordering::Equal => panic!("diagonal pairs are excluded"),
        }
    }

    pub fn scaled(&self, factor: f64) -> PairField {
        PairField {
            grid: self.grid,
            upper: self.upper.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// `∇̄φ(i,j) = φ_j - φ_i`.
pub fn discrete_gradient(phi: &NodeField) -> PairField {
    let v = phi.values();
    PairField::from_fn(*phi.grid(), |i, j| v[j] - v[i])
}

/// `(div V)_i = Σ_{j≠i} V(i,j) K_ij h^d`.
///
/// This is the negative adjoint of the discrete gradient under the pairing
/// `½ Σ_{i≠j} ∇̄φ(i,j) V(i,j) K_ij h^{2d}`, so that
/// `Σ_i φ_i (div V)_i h^d = -½ Σ_{i≠j} ∇̄φ(i,j) V(i,j) K_ij h^{2d}`.
pub fn discrete_divergence(v: &PairField, kernel: &KernelMatrix) -> Result<NodeField> {
    let grid = *v.grid();
    grid.check_same(kernel.grid())?;
    let n = grid.cells();
    let hd = grid.cell_volume();
    let mut out = vec![0.0; n];
    let upper = v.upper();
    let mut p = 0;
    for i in 0..n {
        for j in i + 1..n {
            let flux = upper[p] * kernel.upper()[p];
            out[i] += flux;
            out[j] -= flux;
            p += 1;
        }
    }
    for o in &mut out {
        *o *= hd;
    }
    NodeField::new(grid, out)
}

pub(crate) fn check_grids(a: &GridSpec, b: &GridSpec) -> Result<()> {
    a.check_same(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{kernel_matrix, KernelConfig};

    #[test]
    fn grid_construction() {
        let g = make_grid(1, 4).unwrap();
        assert_eq!(g.spacing(), 0.25);
        let xs: Vec<f64> = g.centers().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75]);

        let g2 = make_grid(2, 3).unwrap();
        assert_eq!(g2.cells(), 9);
        assert_eq!(g2.spacing(), 1.0 / 3.0);
        assert_eq!(g2.spacing() * 3.0, 1.0);

        assert!(matches!(
            make_grid(3, 4),
            Err(FpmeError::UnsupportedDimension(3))
        ));
        assert!(matches!(
            make_grid(1, 1),
            Err(FpmeError::ResolutionTooSmall(1))
        ));
    }

    #[test]
    fn pair_indexing_is_dense() {
        let n = 7;
        let mut seen = vec![false; n * (n - 1) / 2];
        for i in 0..n {
            for j in i + 1..n {
                let p = pair_index(i, j, n);
                assert!(!seen[p]);
                seen[p] = true;
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn torus_distance_examples() {
        assert!((torus_distance(&[0.9], &[0.1]) - 0.2).abs() < 1e-15);
        assert_eq!(torus_distance(&[0.3], &[0.3]), 0.0);
        let d = torus_distance(&[0.95, 0.95], &[0.05, 0.05]);
        assert!((d - 0.02f64.sqrt()).abs() < 1e-15);
        // inputs outside [0,1) are wrapped
        assert!((torus_distance(&[1.9], &[-0.9]) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn gradient_examples() {
        let g = make_grid(1, 2).unwrap();
        let phi = NodeField::new(g, vec![0.0, 1.0]).unwrap();
        let grad = discrete_gradient(&phi);
        assert_eq!(grad.get(0, 1), 1.0);
        assert_eq!(grad.get(1, 0), -1.0);

        let g = make_grid(2, 3).unwrap();
        let c = NodeField::new(g, vec![2.5; 9]).unwrap();
        assert_eq!(discrete_gradient(&c).max_abs(), 0.0);
    }

    #[test]
    fn normalize_contract() {
        let g = make_grid(1, 8).unwrap();
        let raw = DensityField::new(g, vec![3.0; 8]).unwrap();
        let n = normalize(&raw).unwrap();
        assert!(n.values().iter().all(|v| (*v - 1.0).abs() < 1e-15));
        let again = normalize(&n).unwrap();
        assert!(again.max_abs_difference(&n).unwrap() <= 1e-15);
        let zeros = DensityField::new(g, vec![0.0; 8]).unwrap();
        assert!(matches!(normalize(&zeros), Err(FpmeError::NonPositiveMass(_))));
        assert!(DensityField::new(g, vec![-1.0; 8]).is_err());
        assert!(DensityField::new(g, vec![f64::NAN; 8]).is_err());
    }

    #[test]
    fn divergence_of_zero_and_mass_conservation() {
        let g = make_grid(1, 8).unwrap();
        let k = kernel_matrix(&g, 0.5, &KernelConfig::default()).unwrap();
        let zero = discrete_divergence(&PairField::zeros(g), &k).unwrap();
        assert!(zero.values().iter().all(|v| *v == 0.0));

        let v = PairField::from_fn(g, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let div = discrete_divergence(&v, &k).unwrap();
        assert!(div.integral().abs() < 1e-12);
    }

    #[test]
    fn divergence_rejects_grid_mismatch() {
        let g = make_grid(1, 8).unwrap();
        let g2 = make_grid(1, 4).unwrap();
        let k = kernel_matrix(&g2, 0.5, &KernelConfig::default()).unwrap();
        assert!(matches!(
            discrete_divergence(&PairField::zeros(g), &k),
            Err(FpmeError::GridMismatch(_))
        ));
    }
}
