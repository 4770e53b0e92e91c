use mflq_types::linalg::{all_finite, symmetrize_in_place, Mat};
use mflq_types::{MflqError, Result};

/// Backward march of a family of slices `t ↦ X(·, t)` whose right-hand side
/// couples through a factor computed from the diagonal `X(s, s)`.
///
/// Every grid node is a slice. At each s-level the factor is predicted by
/// extrapolation, the diagonal slice is advanced to obtain the corrected
/// factor, and then all live slices are advanced once with the corrected
/// factor. Midpoint factors come from quadratic interpolation.
pub struct DiagonalMarch<'a> {
    pub grid: &'a [f64],
    pub symmetric: bool,
    /// Slice state at `s = T` for slice time `t`.
    pub terminal: &'a dyn Fn(f64) -> Vec<Mat>,
    /// Coupling factor from the diagonal state.
    pub factor: &'a dyn Fn(f64, &[Mat]) -> Result<Mat>,
    /// `d/ds` of a slice state: `(s, t, factor, state)`.
    pub rhs: &'a dyn Fn(f64, f64, &Mat, &[Mat]) -> Vec<Mat>,
    /// Keep every `stride`-th slice (and always the first).
    pub stride: usize,
}

/// Output of [`march_diagonal`].
#[derive(Debug, Clone)]
pub struct DiagonalField {
    pub grid: Vec<f64>,
    /// Grid indices of the kept slices.
    pub kept: Vec<usize>,
    /// `slices[k][c][i]`: component `c` of kept slice `k` at `grid[kept[k] + i]`.
    pub slices: Vec<Vec<Vec<Mat>>>,
    /// Factor at every grid node.
    pub factors: Vec<Mat>,
    /// Diagonal state at every grid node.
    pub diagonal: Vec<Vec<Mat>>,
}

fn lagrange(xs: &[f64], x: f64) -> Vec<f64> {
    (0..xs.len())
        .map(|i| {
            xs.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &xj)| (x - xj) / (xs[i] - xj))
                .product()
        })
        .collect()
}

fn combine(ws: &[f64], ms: &[&Mat]) -> Mat {
    let mut acc = ms[0] * ws[0];
    for (w, m) in ws.iter().zip(ms).skip(1) {
        acc += *m * *w;
    }
    acc
}

fn rk4_step(
    march: &DiagonalMarch<'_>,
    t: f64,
    state: &[Mat],
    s1: f64,
    s0: f64,
    f1: &Mat,
    fm: &Mat,
    f0: &Mat,
) -> Vec<Mat> {
    let h = s1 - s0;
    let mid = s1 - 0.5 * h;
    let ax = |k: &[Mat], a: f64| -> Vec<Mat> { state.iter().zip(k).map(|(x, k)| x + k * a).collect() };
    let k1 = (march.rhs)(s1, t, f1, state);
    let k2 = (march.rhs)(mid, t, fm, &ax(&k1, -0.5 * h));
    let k3 = (march.rhs)(mid, t, fm, &ax(&k2, -0.5 * h));
    let k4 = (march.rhs)(s0, t, f0, &ax(&k3, -h));
    (0..state.len())
        .map(|c| {
            let mut m = &state[c] - (&k1[c] + &k2[c] * 2.0 + &k3[c] * 2.0 + &k4[c]) * (h / 6.0);
            if march.symmetric {
                symmetrize_in_place(&mut m);
            }
            m
        })
        .collect()
}

pub fn march_diagonal(march: &DiagonalMarch<'_>) -> Result<DiagonalField> {
    let g = march.grid;
    let n = g.len();
    if n < 2 {
        return Err(MflqError::Config("diagonal march needs two grid nodes".into()));
    }
    let stride = march.stride.max(1);
    let keep = |j: usize| j % stride == 0;
    let mut state: Vec<Vec<Mat>> = g.iter().map(|&t| (march.terminal)(t)).collect();
    if march.symmetric {
        state.iter_mut().flatten().for_each(symmetrize_in_place);
    }
    let mut factors: Vec<Option<Mat>> = vec![None; n];
    let mut diagonal: Vec<Vec<Mat>> = vec![Vec::new(); n];
    factors[n - 1] = Some((march.factor)(g[n - 1], &state[n - 1])?);
    diagonal[n - 1] = state[n - 1].clone();
    // Stored values, reversed in s (T first).
    let mut store: Vec<Vec<Vec<Mat>>> = (0..n)
        .map(|j| {
            if keep(j) {
                state[j].iter().map(|m| vec![m.clone()]).collect()
            } else {
                Vec::new()
            }
        })
        .collect();

    for i in (0..n - 1).rev() {
        let (s1, s0) = (g[i + 1], g[i]);
        let mid = 0.5 * (s0 + s1);
        let f1 = factors[i + 1].clone().unwrap();
        // Predictor by extrapolation from the levels above.
        let above: Vec<usize> = (i + 1..n.min(i + 4)).collect();
        let xs: Vec<f64> = above.iter().map(|&k| g[k]).collect();
        let ms: Vec<&Mat> = above.iter().map(|&k| factors[k].as_ref().unwrap()).collect();
        let f0_pred = combine(&lagrange(&xs, s0), &ms);
        let mid_from = |f0: &Mat| -> Mat {
            let mut xs = vec![s0, s1];
            let mut ms = vec![f0, factors[i + 1].as_ref().unwrap()];
            if i + 2 < n {
                xs.push(g[i + 2]);
                ms.push(factors[i + 2].as_ref().unwrap());
            }
            combine(&lagrange(&xs, mid), &ms)
        };
        let pred = rk4_step(march, s0, &state[i], s1, s0, &f1, &mid_from(&f0_pred), &f0_pred);
        let f0 = (march.factor)(s0, &pred)?;
        let fm = mid_from(&f0);
        for j in 0..=i {
            let next = rk4_step(march, g[j], &state[j], s1, s0, &f1, &fm, &f0);
            if next.iter().any(|m| !all_finite(m)) {
                return Err(MflqError::BlowUp { time: s0 });
            }
            if keep(j) {
                for (c, m) in next.iter().enumerate() {
                    store[j][c].push(m.clone());
                }
            }
            state[j] = next;
        }
        // Recompute the factor from the corrected diagonal.
        let f0 = (march.factor)(s0, &state[i])?;
        factors[i] = Some(f0);
        diagonal[i] = state[i].clone();
    }

    let kept: Vec<usize> = (0..n).filter(|&j| keep(j)).collect();
    let slices = kept
        .iter()
        .map(|&j| {
            std::mem::take(&mut store[j])
                .into_iter()
                .map(|mut v| {
                    v.reverse();
                    v
                })
                .collect()
        })
        .collect();
    Ok(DiagonalField {
        grid: g.to_vec(),
        kept,
        slices,
        factors: factors.into_iter().map(|f| f.unwrap()).collect(),
        diagonal,
    })
}
