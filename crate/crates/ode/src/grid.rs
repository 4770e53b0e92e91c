use mflq_types::{MflqError, Result};

/// Default step `T/2000`.
pub fn default_step(horizon: f64) -> f64 {
    horizon / 2000.0
}

/// `n` equal steps on `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect();
    g[0] = a;
    g[n] = b;
    g
}

/// Grid on `[a, b]` containing every `required` point inside the interval;
/// each piece between break points is split into `ceil(len/h)` equal steps.
pub fn snapped_grid(a: f64, b: f64, h: f64, required: &[f64]) -> Result<Vec<f64>> {
    if !(b > a) || !(h > 0.0) || !h.is_finite() {
        return Err(MflqError::Config(format!("bad integration interval [{a}, {b}] with h={h}")));
    }
    let eps = 1e-12 * (1.0 + b.abs());
    let mut breaks = vec![a];
    let mut inner: Vec<f64> = required.iter().copied().filter(|&x| x > a + eps && x < b - eps).collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    inner.dedup_by(|x, y| (*x - *y).abs() <= eps);
    breaks.extend(inner);
    breaks.push(b);
    let mut out = vec![a];
    for w in breaks.windows(2) {
        let len = w[1] - w[0];
        let steps = ((len / h) - 1e-9).ceil().max(1.0) as usize;
        let piece = uniform_grid(w[0], w[1], steps);
        out.extend_from_slice(&piece[1..]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_division() {
        let g = snapped_grid(0.0, 1.0, 0.25, &[]).unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn required_nodes_present() {
        let g = snapped_grid(0.0, 1.0, 0.3, &[0.5, 2.0]).unwrap();
        assert!(g.contains(&0.5));
        assert!(g.windows(2).all(|w| w[1] - w[0] <= 0.3 + 1e-15));
        assert_eq!(*g.last().unwrap(), 1.0);
    }
}
