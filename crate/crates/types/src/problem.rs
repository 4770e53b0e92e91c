use std::fmt;

use serde::Serialize;

use crate::error::{MflqError, Result};
use crate::func::{MatrixFn, TwoTimeMatrixFn};
use crate::linalg::{all_finite, asymmetry, eye, min_eig, norm_inf, tau_psd, Mat, TAU_SYM};

/// Coefficients and weights of a mean-field LQ problem on `[0, T]`.
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub n: usize,
    pub m: usize,
    pub horizon: f64,
    pub a: MatrixFn,
    pub a_bar: MatrixFn,
    pub b: MatrixFn,
    pub b_bar: MatrixFn,
    pub c: MatrixFn,
    pub c_bar: MatrixFn,
    pub d: MatrixFn,
    pub d_bar: MatrixFn,
    pub q: TwoTimeMatrixFn,
    pub q_bar: TwoTimeMatrixFn,
    pub r: TwoTimeMatrixFn,
    pub r_bar: TwoTimeMatrixFn,
    pub g: MatrixFn,
    pub g_bar: MatrixFn,
    pub delta: f64,
    /// Assert the monotonicity hypothesis during validation.
    pub monotone: bool,
}

impl ProblemData {
    /// All coefficients and weights zero except `R = I`, with `δ = 1/2`.
    pub fn new(n: usize, m: usize, horizon: f64) -> Self {
        ProblemData {
            n,
            m,
            horizon,
            a: MatrixFn::zeros(n, n),
            a_bar: MatrixFn::zeros(n, n),
            b: MatrixFn::zeros(n, m),
            b_bar: MatrixFn::zeros(n, m),
            c: MatrixFn::zeros(n, n),
            c_bar: MatrixFn::zeros(n, n),
            d: MatrixFn::zeros(n, m),
            d_bar: MatrixFn::zeros(n, m),
            q: TwoTimeMatrixFn::zeros(n, n),
            q_bar: TwoTimeMatrixFn::zeros(n, n),
            r: TwoTimeMatrixFn::constant(eye(m)),
            r_bar: TwoTimeMatrixFn::zeros(m, m),
            g: MatrixFn::zeros(n, n),
            g_bar: MatrixFn::zeros(n, n),
            delta: 0.5,
            monotone: false,
        }
    }

    /// Check every field's shape against `(n, m)`.
    pub fn check_shapes(&self) -> Result<()> {
        let (n, m) = (self.n, self.m);
        let one = [
            ("A", &self.a, (n, n)),
            ("Abar", &self.a_bar, (n, n)),
            ("B", &self.b, (n, m)),
            ("Bbar", &self.b_bar, (n, m)),
            ("C", &self.c, (n, n)),
            ("Cbar", &self.c_bar, (n, n)),
            ("D", &self.d, (n, m)),
            ("Dbar", &self.d_bar, (n, m)),
            ("G", &self.g, (n, n)),
            ("Gbar", &self.g_bar, (n, n)),
        ];
        for (name, f, want) in one {
            if f.shape() != want || !f.consistent() {
                return Err(MflqError::dim(name, want, f.shape()));
            }
        }
        let two = [
            ("Q", &self.q, (n, n)),
            ("Qbar", &self.q_bar, (n, n)),
            ("R", &self.r, (m, m)),
            ("Rbar", &self.r_bar, (m, m)),
        ];
        for (name, f, want) in two {
            if f.shape() != want || !f.consistent() {
                return Err(MflqError::dim(name, want, f.shape()));
            }
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(MflqError::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.delta > 0.0) {
            return Err(MflqError::Config(format!("delta must be positive, got {}", self.delta)));
        }
        Ok(())
    }

    /// No mean-field terms in the state equation.
    pub fn dynamics_without_mean_field(&self) -> bool {
        self.a_bar.is_zero() && self.b_bar.is_zero() && self.c_bar.is_zero() && self.d_bar.is_zero()
    }

    /// Weights (all of Q, Q̄, R, R̄) structurally independent of `t`.
    pub fn weights_t_independent(&self) -> bool {
        self.q.is_t_independent()
            && self.q_bar.is_t_independent()
            && self.r.is_t_independent()
            && self.r_bar.is_t_independent()
            && matches!(self.g, MatrixFn::Constant(_))
            && matches!(self.g_bar, MatrixFn::Constant(_))
    }
}

/// `Â = A + Ā` and the other sums.
#[derive(Debug, Clone)]
pub struct HatCoefficients {
    pub a: MatrixFn,
    pub b: MatrixFn,
    pub c: MatrixFn,
    pub d: MatrixFn,
    pub q: TwoTimeMatrixFn,
    pub r: TwoTimeMatrixFn,
    pub g: MatrixFn,
}

pub fn hat(p: &ProblemData) -> HatCoefficients {
    HatCoefficients {
        a: p.a.plus(&p.a_bar),
        b: p.b.plus(&p.b_bar),
        c: p.c.plus(&p.c_bar),
        d: p.d.plus(&p.d_bar),
        q: p.q.plus(&p.q_bar),
        r: p.r.plus(&p.r_bar),
        g: p.g.plus(&p.g_bar),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub hypothesis: &'static str,
    pub field: String,
    pub s: f64,
    pub t: f64,
    pub min_eig: f64,
    pub message: String,
}

/// Result of sampling the standing hypotheses.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub density: usize,
    pub violations: Vec<Violation>,
    /// Continuity heuristic: fields whose sampled jumps did not shrink under
    /// doubling of the density. Informational only.
    pub continuity_notes: Vec<String>,
    pub monotone_checked: bool,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }

    fn count(&self, h: &str) -> usize {
        self.violations.iter().filter(|v| v.hypothesis == h).count()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for h in ["H1", "H2", "H3"] {
            if h == "H3" && !self.monotone_checked {
                writeln!(f, "H3: not requested")?;
                continue;
            }
            match self.count(h) {
                0 => writeln!(f, "{h}: pass")?,
                k => writeln!(f, "{h}: fail ({k} violations)")?,
            }
        }
        for v in &self.violations {
            writeln!(f, "  {}", v.message)?;
        }
        for c in &self.continuity_notes {
            writeln!(f, "  note: {c}")?;
        }
        Ok(())
    }
}

fn samples(horizon: f64, density: usize) -> Vec<f64> {
    (0..=density)
        .map(|i| horizon * i as f64 / density as f64)
        .collect()
}

fn max_jump(vals: &[Mat]) -> f64 {
    vals.windows(2)
        .map(|w| norm_inf(&(&w[1] - &w[0])))
        .fold(0.0, f64::max)
}

struct Checker<'a> {
    out: &'a mut Vec<Violation>,
}

impl Checker<'_> {
    fn psd(&mut self, h: &'static str, field: &str, m: &Mat, floor: f64, s: f64, t: f64, what: &str) {
        if !all_finite(m) {
            self.out.push(Violation {
                hypothesis: "H1",
                field: field.into(),
                s,
                t,
                min_eig: f64::NAN,
                message: format!("{field} not finite at (s,t)=({s},{t})"),
            });
            return;
        }
        if asymmetry(m) > TAU_SYM * (1.0 + norm_inf(m)) {
            self.out.push(Violation {
                hypothesis: h,
                field: field.into(),
                s,
                t,
                min_eig: f64::NAN,
                message: format!("{field} not symmetric at (s,t)=({s},{t})"),
            });
            return;
        }
        let lam = min_eig(m);
        if lam - floor < -tau_psd(m) {
            self.out.push(Violation {
                hypothesis: h,
                field: field.into(),
                s,
                t,
                min_eig: lam,
                message: format!("{field} not {what} at (s,t)=({s},{t})"),
            });
        }
    }
}

/// Sample (H1)–(H2), and (H3) when `problem.monotone` is set, on a uniform
/// grid with `density` intervals. Only shape errors are returned as `Err`.
pub fn validate(p: &ProblemData, density: usize) -> Result<ValidationReport> {
    p.check_shapes()?;
    let density = density.max(1);
    let ts = samples(p.horizon, density);
    let h = hat(p);
    let mut violations = Vec::new();
    let mut ck = Checker { out: &mut violations };

    for (name, f) in [
        ("A", &p.a),
        ("Abar", &p.a_bar),
        ("B", &p.b),
        ("Bbar", &p.b_bar),
        ("C", &p.c),
        ("Cbar", &p.c_bar),
        ("D", &p.d),
        ("Dbar", &p.d_bar),
    ] {
        for &s in &ts {
            if !all_finite(&f.eval(s)) {
                ck.out.push(Violation {
                    hypothesis: "H1",
                    field: name.into(),
                    s,
                    t: s,
                    min_eig: f64::NAN,
                    message: format!("{name} not finite at s={s}"),
                });
            }
        }
    }

    for (j, &t) in ts.iter().enumerate() {
        for &s in &ts[j..] {
            let q = p.q.eval(s, t);
            let qh = h.q.eval(s, t);
            let r = p.r.eval(s, t);
            let rh = h.r.eval(s, t);
            ck.psd("H2", "Q", &q, 0.0, s, t, "⪰ 0");
            ck.psd("H2", "Q+Qbar", &qh, 0.0, s, t, "⪰ 0");
            ck.psd("H2", "R", &r, p.delta, s, t, "⪰ δI");
            ck.psd("H2", "R+Rbar", &rh, p.delta, s, t, "⪰ δI");
        }
        ck.psd("H2", "G", &p.g.eval(t), 0.0, t, t, "⪰ 0");
        ck.psd("H2", "G+Gbar", &h.g.eval(t), 0.0, t, t, "⪰ 0");
    }

    if p.monotone {
        let pairs: [(&str, &TwoTimeMatrixFn); 4] =
            [("Q", &p.q), ("Q+Qbar", &h.q), ("R", &p.r), ("R+Rbar", &h.r)];
        for (a, &t) in ts.iter().enumerate() {
            for (b, &tau) in ts.iter().enumerate().skip(a + 1) {
                for &s in &ts[b..] {
                    for (name, f) in pairs {
                        let d = f.eval(s, tau) - f.eval(s, t);
                        ck.psd("H3", name, &d, 0.0, s, t, "monotone in t");
                    }
                }
                for (name, f) in [("G", &p.g), ("G+Gbar", &h.g)] {
                    let d = f.eval(tau) - f.eval(t);
                    ck.psd("H3", name, &d, 0.0, tau, t, "monotone in t");
                }
            }
        }
    }

    let mut notes = Vec::new();
    let fine = samples(p.horizon, 2 * density);
    let one: [(&str, &MatrixFn); 10] = [
        ("A", &p.a),
        ("Abar", &p.a_bar),
        ("B", &p.b),
        ("Bbar", &p.b_bar),
        ("C", &p.c),
        ("Cbar", &p.c_bar),
        ("D", &p.d),
        ("Dbar", &p.d_bar),
        ("G", &p.g),
        ("Gbar", &p.g_bar),
    ];
    let jumps = |f: &dyn Fn(f64) -> Mat| {
        let coarse: Vec<Mat> = ts.iter().map(|&s| f(s)).collect();
        let finer: Vec<Mat> = fine.iter().map(|&s| f(s)).collect();
        (max_jump(&coarse), max_jump(&finer))
    };
    for (name, f) in one {
        let (j1, j2) = jumps(&|s| f.eval(s));
        if j1 > 1e-8 && j2 > 0.75 * j1 {
            notes.push(format!("{name}: sampled jump {j2:.3e} did not shrink under refinement"));
        }
    }
    let two: [(&str, &TwoTimeMatrixFn); 4] = [("Q", &p.q), ("Qbar", &p.q_bar), ("R", &p.r), ("Rbar", &p.r_bar)];
    for (name, f) in two {
        let t0 = 0.0;
        let (j1, j2) = jumps(&|s| f.eval(s, t0));
        let (k1, k2) = jumps(&|t| f.eval(p.horizon, t));
        if (j1 > 1e-8 && j2 > 0.75 * j1) || (k1 > 1e-8 && k2 > 0.75 * k1) {
            notes.push(format!("{name}: sampled jump did not shrink under refinement"));
        }
    }

    Ok(ValidationReport {
        density,
        violations,
        continuity_notes: notes,
        monotone_checked: p.monotone,
    })
}
