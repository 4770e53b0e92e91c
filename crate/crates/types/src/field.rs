use crate::error::{MflqError, Result};
use crate::grid::NODE_EPS;
use crate::linalg::{asymmetry, norm_inf, Mat};

/// Field on the triangle `{0 ≤ t ≤ s ≤ T}` sampled on an s-grid. Each stored
/// t-node is itself an s-grid node; slice `j` holds `value(s_i, t_j)` for
/// `s_i ≥ t_j`. For `s < t` the diagonal value is returned.
#[derive(Debug, Clone)]
pub struct TwoParamMatrixField {
    s_grid: Vec<f64>,
    t_index: Vec<usize>,
    slices: Vec<Vec<Mat>>,
}

fn find(grid: &[f64], x: f64) -> Option<usize> {
    let scale = 1.0 + grid.last().map_or(0.0, |v| v.abs());
    let k = grid.partition_point(|&g| g < x);
    [k.saturating_sub(1), k]
        .into_iter()
        .filter(|&i| i < grid.len())
        .find(|&i| (grid[i] - x).abs() <= NODE_EPS * scale)
}

fn nearest(grid: &[f64], x: f64) -> (usize, f64) {
    let k = grid.partition_point(|&g| g < x);
    let mut best = (0, f64::INFINITY);
    for i in [k.saturating_sub(1), k] {
        if i < grid.len() && (grid[i] - x).abs() < best.1 {
            best = (i, (grid[i] - x).abs());
        }
    }
    best
}

impl TwoParamMatrixField {
    pub fn new(s_grid: Vec<f64>, t_index: Vec<usize>, slices: Vec<Vec<Mat>>) -> Result<Self> {
        if s_grid.is_empty() || t_index.len() != slices.len() {
            return Err(MflqError::Config("field: inconsistent t-slices".into()));
        }
        if s_grid.windows(2).any(|w| w[1] <= w[0]) || t_index.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MflqError::Config("field: grids must be strictly increasing".into()));
        }
        for (j, (&i0, sl)) in t_index.iter().zip(&slices).enumerate() {
            if i0 >= s_grid.len() || sl.len() != s_grid.len() - i0 {
                return Err(MflqError::Config(format!("field: slice {j} has wrong length")));
            }
        }
        Ok(TwoParamMatrixField {
            s_grid,
            t_index,
            slices,
        })
    }

    pub fn s_grid(&self) -> &[f64] {
        &self.s_grid
    }

    pub fn t_index(&self) -> &[usize] {
        &self.t_index
    }

    pub fn t_nodes(&self) -> Vec<f64> {
        self.t_index.iter().map(|&i| self.s_grid[i]).collect()
    }

    pub fn slice(&self, j: usize) -> &[Mat] {
        &self.slices[j]
    }

    pub fn dim(&self) -> usize {
        self.slices[0][0].nrows()
    }

    /// Value at `(s_grid[i], t_j)` with the diagonal extension for `s < t`.
    pub fn at(&self, i: usize, j: usize) -> &Mat {
        let i0 = self.t_index[j];
        if i < i0 {
            &self.slices[j][0]
        } else {
            &self.slices[j][i - i0]
        }
    }

    /// `value(t_j, t_j)`.
    pub fn diag(&self, j: usize) -> &Mat {
        &self.slices[j][0]
    }

    /// Terminal value `value(T, t_j)`.
    pub fn terminal(&self, j: usize) -> &Mat {
        self.slices[j].last().unwrap()
    }

    /// Index of the stored t-node equal to `t`, if any.
    pub fn t_slot(&self, t: f64) -> Option<usize> {
        find(&self.t_nodes(), t)
    }

    pub fn s_slot(&self, s: f64) -> Option<usize> {
        find(&self.s_grid, s)
    }

    /// Nearest stored t-node and the snap distance.
    pub fn snap_t(&self, t: f64) -> (usize, f64) {
        nearest(&self.t_nodes(), t)
    }

    pub fn snap_s(&self, s: f64) -> (usize, f64) {
        nearest(&self.s_grid, s)
    }

    /// Value at the nearest stored nodes; returns the larger snap distance.
    pub fn value(&self, s: f64, t: f64) -> (Mat, f64) {
        let (i, ds) = self.snap_s(s);
        let (j, dt) = self.snap_t(t);
        (self.at(i, j).clone(), ds.max(dt))
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.slices
            .iter()
            .flatten()
            .map(asymmetry)
            .fold(0.0, f64::max)
    }

    pub fn max_norm(&self) -> f64 {
        self.slices.iter().flatten().map(norm_inf).fold(0.0, f64::max)
    }

    /// Apply `f` to every stored value.
    pub fn map(&self, f: impl Fn(&Mat) -> Mat) -> TwoParamMatrixField {
        TwoParamMatrixField {
            s_grid: self.s_grid.clone(),
            t_index: self.t_index.clone(),
            slices: self
                .slices
                .iter()
                .map(|sl| sl.iter().map(&f).collect())
                .collect(),
        }
    }

    /// Sup-norm difference restricted to the nodes shared by both fields
    /// (t-nodes present in both, s-nodes present in both, `s ≥ t`).
    /// Errors if the fields share no t-node.
    pub fn sup_diff(&self, other: &TwoParamMatrixField) -> Result<f64> {
        let s_pairs: Vec<(usize, usize)> = self
            .s_grid
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| find(&other.s_grid, s).map(|k| (i, k)))
            .collect();
        let ot = other.t_nodes();
        let mut shared = 0;
        let mut worst: f64 = 0.0;
        for (j, t) in self.t_nodes().into_iter().enumerate() {
            let Some(l) = find(&ot, t) else { continue };
            shared += 1;
            for &(i, k) in &s_pairs {
                if self.s_grid[i] + 1e-14 < t {
                    continue;
                }
                worst = worst.max(norm_inf(&(self.at(i, j) - other.at(k, l))));
            }
        }
        if shared == 0 || s_pairs.is_empty() {
            return Err(MflqError::Config("fields share no common nodes".into()));
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::scalar;

    fn field() -> TwoParamMatrixField {
        let s = vec![0.0, 0.5, 1.0];
        let slices = vec![
            vec![scalar(1.0), scalar(2.0), scalar(3.0)],
            vec![scalar(5.0), scalar(6.0)],
        ];
        TwoParamMatrixField::new(s, vec![0, 1], slices).unwrap()
    }

    #[test]
    fn extension_returns_diagonal() {
        let f = field();
        assert_eq!(f.at(0, 1)[(0, 0)], 5.0);
        assert_eq!(f.at(2, 1)[(0, 0)], 6.0);
        assert_eq!(f.diag(0)[(0, 0)], 1.0);
        assert_eq!(f.terminal(0)[(0, 0)], 3.0);
    }

    #[test]
    fn snapping() {
        let f = field();
        let (v, d) = f.value(0.9, 0.45);
        assert_eq!(v[(0, 0)], 6.0);
        assert!((d - 0.1).abs() < 1e-12);
    }

    #[test]
    fn sup_diff_on_shared_nodes() {
        let f = field();
        let g = f.map(|m| m * 2.0);
        assert_eq!(f.sup_diff(&g).unwrap(), 6.0);
        let coarse = TwoParamMatrixField::new(vec![0.0, 1.0], vec![0], vec![vec![scalar(1.0), scalar(3.5)]]).unwrap();
        assert_eq!(f.sup_diff(&coarse).unwrap(), 0.5);
    }
}
