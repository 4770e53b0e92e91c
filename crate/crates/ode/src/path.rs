use mflq_types::linalg::{norm_inf, Mat};

/// Matrix-valued path sampled on increasing times. When derivatives are
/// stored, off-node evaluation is cubic Hermite; otherwise linear.
#[derive(Debug, Clone)]
pub struct MatrixPath {
    times: Vec<f64>,
    values: Vec<Mat>,
    derivs: Option<Vec<Mat>>,
}

impl MatrixPath {
    pub fn new(times: Vec<f64>, values: Vec<Mat>, derivs: Option<Vec<Mat>>) -> Self {
        assert_eq!(times.len(), values.len());
        if let Some(d) = &derivs {
            assert_eq!(d.len(), times.len());
        }
        MatrixPath { times, values, derivs }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    pub fn derivs(&self) -> Option<&[Mat]> {
        self.derivs.as_deref()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first(&self) -> &Mat {
        &self.values[0]
    }

    pub fn last(&self) -> &Mat {
        self.values.last().unwrap()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Index of a node equal to `s` up to a relative tolerance.
    pub fn node_index(&self, s: f64) -> Option<usize> {
        let tol = 1e-10 * (1.0 + self.end().abs());
        let k = self.times.partition_point(|&x| x < s - tol);
        (k < self.times.len() && (self.times[k] - s).abs() <= tol).then_some(k)
    }

    pub fn eval(&self, s: f64) -> Mat {
        let n = self.times.len();
        if n == 1 || s <= self.times[0] {
            return self.values[0].clone();
        }
        if s >= self.times[n - 1] {
            return self.values[n - 1].clone();
        }
        if let Some(k) = self.node_index(s) {
            return self.values[k].clone();
        }
        let k = self.times.partition_point(|&x| x <= s) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let u = (s - t0) / h;
        match &self.derivs {
            Some(d) => {
                let u2 = u * u;
                let u3 = u2 * u;
                let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
                let h10 = u3 - 2.0 * u2 + u;
                let h01 = -2.0 * u3 + 3.0 * u2;
                let h11 = u3 - u2;
                &self.values[k] * h00 + &d[k] * (h10 * h) + &self.values[k + 1] * h01 + &d[k + 1] * (h11 * h)
            }
            None => &self.values[k] * (1.0 - u) + &self.values[k + 1] * u,
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(norm_inf).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64, &Mat) -> Mat) -> MatrixPath {
        MatrixPath {
            times: self.times.clone(),
            values: self.times.iter().zip(&self.values).map(|(&t, v)| f(t, v)).collect(),
            derivs: None,
        }
    }

    /// Max-norm distance at common nodes (evaluating `other` off-node when
    /// needed).
    pub fn sup_distance(&self, other: &MatrixPath) -> f64 {
        self.times
            .iter()
            .zip(&self.values)
            .map(|(&t, v)| norm_inf(&(v - other.eval(t))))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mflq_types::linalg::scalar;

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |s: f64| s * s * s - 2.0 * s;
        let df = |s: f64| 3.0 * s * s - 2.0;
        let times = vec![0.0, 0.5, 1.0];
        let p = MatrixPath::new(
            times.clone(),
            times.iter().map(|&s| scalar(f(s))).collect(),
            Some(times.iter().map(|&s| scalar(df(s))).collect()),
        );
        for s in [0.1, 0.33, 0.77] {
            assert!((p.eval(s)[(0, 0)] - f(s)).abs() < 1e-14);
        }
    }
}
