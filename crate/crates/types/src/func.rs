use std::fmt;
use std::sync::Arc;

use crate::linalg::{zeros, Mat};

/// Discount kernel ρ as a function of the lag `s − t ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Discount {
    Exponential { lambda: f64 },
    Hyperbolic { lambda: f64 },
}

impl Discount {
    pub fn weight(&self, lag: f64) -> f64 {
        match *self {
            Discount::Exponential { lambda } => (-lambda * lag).exp(),
            Discount::Hyperbolic { lambda } => 1.0 / (1.0 + lambda * lag),
        }
    }
}

/// Matrix-valued function of one time variable.
#[derive(Clone)]
pub enum MatrixFn {
    Constant(Mat),
    /// `Σ_k c_k s^k`.
    Polynomial(Vec<Mat>),
    /// Piecewise linear through the samples, constant outside.
    Samples { times: Vec<f64>, values: Vec<Mat> },
    /// `ρ(horizon − t) · base`; the terminal-weight form of a discount kernel.
    Discounted {
        kernel: Discount,
        horizon: f64,
        base: Mat,
    },
    Sum(Vec<MatrixFn>),
    Scaled(f64, Box<MatrixFn>),
    Custom {
        shape: (usize, usize),
        f: Arc<dyn Fn(f64) -> Mat + Send + Sync>,
    },
}

impl fmt::Debug for MatrixFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixFn::Constant(m) => write!(f, "Constant({m:?})"),
            MatrixFn::Polynomial(c) => write!(f, "Polynomial({} terms)", c.len()),
            MatrixFn::Samples { times, .. } => write!(f, "Samples({} nodes)", times.len()),
            MatrixFn::Discounted { kernel, .. } => write!(f, "Discounted({kernel:?})"),
            MatrixFn::Sum(v) => write!(f, "Sum({v:?})"),
            MatrixFn::Scaled(a, g) => write!(f, "Scaled({a}, {g:?})"),
            MatrixFn::Custom { shape, .. } => write!(f, "Custom{shape:?}"),
        }
    }
}

fn interp(times: &[f64], values: &[Mat], s: f64) -> Mat {
    let n = times.len();
    if n == 1 || s <= times[0] {
        return values[0].clone();
    }
    if s >= times[n - 1] {
        return values[n - 1].clone();
    }
    let k = times.partition_point(|&x| x <= s) - 1;
    let w = (s - times[k]) / (times[k + 1] - times[k]);
    &values[k] * (1.0 - w) + &values[k + 1] * w
}

impl MatrixFn {
    pub fn constant(m: Mat) -> Self {
        MatrixFn::Constant(m)
    }

    pub fn zeros(r: usize, c: usize) -> Self {
        MatrixFn::Constant(zeros(r, c))
    }

    pub fn custom(shape: (usize, usize), f: impl Fn(f64) -> Mat + Send + Sync + 'static) -> Self {
        MatrixFn::Custom {
            shape,
            f: Arc::new(f),
        }
    }

    pub fn samples(times: Vec<f64>, values: Vec<Mat>) -> Self {
        MatrixFn::Samples { times, values }
    }

    pub fn eval(&self, s: f64) -> Mat {
        match self {
            MatrixFn::Constant(m) => m.clone(),
            MatrixFn::Polynomial(c) => {
                let mut acc = c.last().cloned().unwrap_or_else(|| zeros(0, 0));
                for ck in c.iter().rev().skip(1) {
                    acc = acc * s + ck;
                }
                acc
            }
            MatrixFn::Samples { times, values } => interp(times, values, s),
            MatrixFn::Discounted {
                kernel,
                horizon,
                base,
            } => base * kernel.weight(horizon - s),
            MatrixFn::Sum(parts) => {
                let mut it = parts.iter();
                let mut acc = it.next().map(|p| p.eval(s)).unwrap_or_else(|| zeros(0, 0));
                for p in it {
                    acc += p.eval(s);
                }
                acc
            }
            MatrixFn::Scaled(a, g) => g.eval(s) * *a,
            MatrixFn::Custom { f, .. } => f(s),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            MatrixFn::Constant(m) => m.shape(),
            MatrixFn::Polynomial(c) => c.first().map_or((0, 0), |m| m.shape()),
            MatrixFn::Samples { values, .. } => values.first().map_or((0, 0), |m| m.shape()),
            MatrixFn::Discounted { base, .. } => base.shape(),
            MatrixFn::Sum(p) => p.first().map_or((0, 0), |m| m.shape()),
            MatrixFn::Scaled(_, g) => g.shape(),
            MatrixFn::Custom { shape, .. } => *shape,
        }
    }

    /// Shape of every component agrees (sums, polynomial terms, samples).
    pub fn consistent(&self) -> bool {
        let sh = self.shape();
        match self {
            MatrixFn::Polynomial(c) => c.iter().all(|m| m.shape() == sh),
            MatrixFn::Samples { times, values } => {
                !times.is_empty()
                    && times.len() == values.len()
                    && times.windows(2).all(|w| w[0] < w[1])
                    && values.iter().all(|m| m.shape() == sh)
            }
            MatrixFn::Sum(p) => p.iter().all(|m| m.shape() == sh && m.consistent()),
            MatrixFn::Scaled(_, g) => g.consistent(),
            _ => true,
        }
    }

    /// True when the function is structurally identically zero.
    pub fn is_zero(&self) -> bool {
        match self {
            MatrixFn::Constant(m) => m.iter().all(|x| *x == 0.0),
            MatrixFn::Polynomial(c) => c.iter().all(|m| m.iter().all(|x| *x == 0.0)),
            MatrixFn::Samples { values, .. } => values.iter().all(|m| m.iter().all(|x| *x == 0.0)),
            MatrixFn::Discounted { base, .. } => base.iter().all(|x| *x == 0.0),
            MatrixFn::Sum(p) => p.iter().all(|g| g.is_zero()),
            MatrixFn::Scaled(a, g) => *a == 0.0 || g.is_zero(),
            MatrixFn::Custom { .. } => false,
        }
    }

    pub fn plus(&self, other: &MatrixFn) -> MatrixFn {
        MatrixFn::Sum(vec![self.clone(), other.clone()])
    }
}

/// Matrix-valued function of `(s, t)` on the triangle `0 ≤ t ≤ s ≤ T`.
#[derive(Clone)]
pub enum TwoTimeMatrixFn {
    Constant(Mat),
    /// Depends on `s` only.
    OfS(MatrixFn),
    /// Depends on `t` only.
    OfT(MatrixFn),
    /// `ρ(s − t) · base`.
    Discounted { kernel: Discount, base: Mat },
    Sum(Vec<TwoTimeMatrixFn>),
    Scaled(f64, Box<TwoTimeMatrixFn>),
    Custom {
        shape: (usize, usize),
        f: Arc<dyn Fn(f64, f64) -> Mat + Send + Sync>,
    },
}

impl fmt::Debug for TwoTimeMatrixFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TwoTimeMatrixFn::Constant(m) => write!(f, "Constant({m:?})"),
            TwoTimeMatrixFn::OfS(g) => write!(f, "OfS({g:?})"),
            TwoTimeMatrixFn::OfT(g) => write!(f, "OfT({g:?})"),
            TwoTimeMatrixFn::Discounted { kernel, .. } => write!(f, "Discounted({kernel:?})"),
            TwoTimeMatrixFn::Sum(v) => write!(f, "Sum({v:?})"),
            TwoTimeMatrixFn::Scaled(a, g) => write!(f, "Scaled({a}, {g:?})"),
            TwoTimeMatrixFn::Custom { shape, .. } => write!(f, "Custom{shape:?}"),
        }
    }
}

impl TwoTimeMatrixFn {
    pub fn constant(m: Mat) -> Self {
        TwoTimeMatrixFn::Constant(m)
    }

    pub fn zeros(r: usize, c: usize) -> Self {
        TwoTimeMatrixFn::Constant(zeros(r, c))
    }

    pub fn custom(
        shape: (usize, usize),
        f: impl Fn(f64, f64) -> Mat + Send + Sync + 'static,
    ) -> Self {
        TwoTimeMatrixFn::Custom {
            shape,
            f: Arc::new(f),
        }
    }

    pub fn discounted(kernel: Discount, base: Mat) -> Self {
        TwoTimeMatrixFn::Discounted { kernel, base }
    }

    pub fn eval(&self, s: f64, t: f64) -> Mat {
        match self {
            TwoTimeMatrixFn::Constant(m) => m.clone(),
            TwoTimeMatrixFn::OfS(g) => g.eval(s),
            TwoTimeMatrixFn::OfT(g) => g.eval(t),
            TwoTimeMatrixFn::Discounted { kernel, base } => base * kernel.weight(s - t),
            TwoTimeMatrixFn::Sum(parts) => {
                let mut it = parts.iter();
                let mut acc = it
                    .next()
                    .map(|p| p.eval(s, t))
                    .unwrap_or_else(|| zeros(0, 0));
                for p in it {
                    acc += p.eval(s, t);
                }
                acc
            }
            TwoTimeMatrixFn::Scaled(a, g) => g.eval(s, t) * *a,
            TwoTimeMatrixFn::Custom { f, .. } => f(s, t),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            TwoTimeMatrixFn::Constant(m) => m.shape(),
            TwoTimeMatrixFn::OfS(g) | TwoTimeMatrixFn::OfT(g) => g.shape(),
            TwoTimeMatrixFn::Discounted { base, .. } => base.shape(),
            TwoTimeMatrixFn::Sum(p) => p.first().map_or((0, 0), |m| m.shape()),
            TwoTimeMatrixFn::Scaled(_, g) => g.shape(),
            TwoTimeMatrixFn::Custom { shape, .. } => *shape,
        }
    }

    pub fn consistent(&self) -> bool {
        let sh = self.shape();
        match self {
            TwoTimeMatrixFn::OfS(g) | TwoTimeMatrixFn::OfT(g) => g.consistent(),
            TwoTimeMatrixFn::Sum(p) => p.iter().all(|m| m.shape() == sh && m.consistent()),
            TwoTimeMatrixFn::Scaled(_, g) => g.consistent(),
            _ => true,
        }
    }

    /// True when the function provably does not depend on `t`.
    pub fn is_t_independent(&self) -> bool {
        match self {
            TwoTimeMatrixFn::Constant(_) | TwoTimeMatrixFn::OfS(_) => true,
            TwoTimeMatrixFn::OfT(g) => matches!(g, MatrixFn::Constant(_)),
            TwoTimeMatrixFn::Discounted { base, .. } => base.iter().all(|x| *x == 0.0),
            TwoTimeMatrixFn::Sum(p) => p.iter().all(|g| g.is_t_independent()),
            TwoTimeMatrixFn::Scaled(a, g) => *a == 0.0 || g.is_t_independent(),
            TwoTimeMatrixFn::Custom { .. } => false,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TwoTimeMatrixFn::Constant(m) => m.iter().all(|x| *x == 0.0),
            TwoTimeMatrixFn::OfS(g) | TwoTimeMatrixFn::OfT(g) => g.is_zero(),
            TwoTimeMatrixFn::Discounted { base, .. } => base.iter().all(|x| *x == 0.0),
            TwoTimeMatrixFn::Sum(p) => p.iter().all(|g| g.is_zero()),
            TwoTimeMatrixFn::Scaled(a, g) => *a == 0.0 || g.is_zero(),
            TwoTimeMatrixFn::Custom { .. } => false,
        }
    }

    pub fn plus(&self, other: &TwoTimeMatrixFn) -> TwoTimeMatrixFn {
        TwoTimeMatrixFn::Sum(vec![self.clone(), other.clone()])
    }

    /// Freeze the second argument: `s ↦ f(s, t)`.
    pub fn frozen(&self, t: f64) -> MatrixFn {
        let g = self.clone();
        MatrixFn::custom(self.shape(), move |s| g.eval(s, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{mat, scalar};

    #[test]
    fn polynomial_horner() {
        let p = MatrixFn::Polynomial(vec![scalar(1.0), scalar(2.0), scalar(3.0)]);
        assert_eq!(p.eval(2.0)[(0, 0)], 1.0 + 4.0 + 12.0);
    }

    #[test]
    fn samples_interpolate_and_clamp() {
        let f = MatrixFn::samples(vec![0.0, 1.0], vec![scalar(0.0), scalar(2.0)]);
        assert_eq!(f.eval(0.25)[(0, 0)], 0.5);
        assert_eq!(f.eval(-1.0)[(0, 0)], 0.0);
        assert_eq!(f.eval(3.0)[(0, 0)], 2.0);
    }

    #[test]
    fn discount_kernels() {
        let e = TwoTimeMatrixFn::discounted(Discount::Exponential { lambda: 2.0 }, scalar(3.0));
        assert!((e.eval(1.0, 0.5)[(0, 0)] - 3.0 * (-1.0f64).exp()).abs() < 1e-15);
        let h = TwoTimeMatrixFn::discounted(Discount::Hyperbolic { lambda: 2.0 }, scalar(3.0));
        assert!((h.eval(1.0, 0.5)[(0, 0)] - 1.5).abs() < 1e-15);
        let g = MatrixFn::Discounted {
            kernel: Discount::Exponential { lambda: 1.0 },
            horizon: 2.0,
            base: scalar(1.0),
        };
        assert!((g.eval(1.0)[(0, 0)] - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn sums_and_structure() {
        let a = TwoTimeMatrixFn::constant(mat(&[&[1.0, 0.0], &[0.0, 1.0]]));
        let b = TwoTimeMatrixFn::discounted(Discount::Exponential { lambda: 1.0 }, a.eval(0.0, 0.0));
        assert!(a.is_t_independent());
        assert!(!a.plus(&b).is_t_independent());
        assert_eq!(a.plus(&b).eval(0.0, 0.0)[(1, 1)], 2.0);
        assert!(TwoTimeMatrixFn::zeros(2, 2).is_zero());
    }
}
