use mflq_types::linalg::Mat;
use mflq_types::{MflqError, Result};

use crate::config::{InitialState, MCConfig};
use crate::engine::{simulate_system, LinearSystem, StepCoeffs};

/// Outcome of the restart experiment for `dX = E[X] ds + E[X] dW`.
#[derive(Debug, Clone, Copy)]
pub struct SemigroupDemo {
    pub simulated: f64,
    pub stderr: f64,
    pub closed_form: f64,
    /// `[e^{2(s−τ)} + ∫_τ^s e^{2(r−τ)} dr]·∫_t^τ e^{2(r−t)} dr·x²`, the
    /// expression obtained when the `−1` in the restarted factor
    /// `e^{s−τ} − 1 + ∫_τ^s e^{r−τ} dW` is dropped. Kept for comparison; the
    /// simulation does not match it.
    pub reference_form: f64,
}

impl SemigroupDemo {
    /// Agreement within three standard errors (plus a small absolute slack
    /// for the time-stepping bias).
    pub fn agrees(&self) -> bool {
        (self.simulated - self.closed_form).abs() <= 3.0 * self.stderr + 1e-3 * self.closed_form.abs().max(1e-12)
    }
}

fn half_growth(len: f64) -> f64 {
    // ∫_0^len e^{2r} dr
    0.5 * (2.0 * len).exp_m1()
}

/// Mean squared gap between the solution started at `(t, x)` and the one
/// restarted at `τ` from its own value, at time `s`.
///
/// The gap equals `(e^{s−τ} − 1 + ∫_τ^s e^{r−τ} dW)·(∫_t^τ e^{r−t} dW)·x`, so
/// its second moment is `[(e^{s−τ} − 1)² + ∫_τ^s e^{2(r−τ)} dr]·∫_t^τ e^{2(r−t)} dr·x²`.
///
/// Both are driven by the same Brownian path. The unrestarted solution has
/// the deterministic mean `x e^{r−t}`, so it is carried as a forced
/// component; the restarted one re-freezes its mean at `τ`.
pub fn semigroup_failure_demo(s: f64, tau: f64, t: f64, x: f64, mc: &MCConfig) -> Result<SemigroupDemo> {
    if !(t <= tau && tau <= s) {
        return Err(MflqError::Precondition(format!("need t ≤ τ ≤ s, got t={t}, τ={tau}, s={s}")));
    }
    let spread = half_growth(tau - t) * x * x;
    let closed_form = ((s - tau).exp_m1().powi(2) + half_growth(s - tau)) * spread;
    let reference_form = ((2.0 * (s - tau)).exp() + half_growth(s - tau)) * spread;
    if s == t {
        return Ok(SemigroupDemo {
            simulated: 0.0,
            stderr: 0.0,
            closed_form,
            reference_form,
        });
    }
    mc.check()?;
    let steps = mc.steps.max(2);
    let h = (s - t) / steps as f64;
    let mut times: Vec<f64> = (0..=steps).map(|i| t + i as f64 * h).collect();
    times[steps] = s;
    let mut reanchor = vec![false; steps];
    if tau > t && tau < s {
        let idx = (((tau - t) / h).round() as usize).clamp(1, steps - 1);
        times[idx] = tau;
        reanchor[idx - 1] = true;
    }
    let sel = Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
    let sys = LinearSystem::new(2, 1, times, reanchor, InitialState::fixed(&[x, x]), |_, r| {
        let forced = Mat::from_column_slice(2, 1, &[x * (r - t).exp(), 0.0]);
        StepCoeffs {
            fm: sel.clone(),
            gm: sel.clone(),
            f0: forced.clone(),
            g0: forced,
            ..StepCoeffs::zeros(2, 1)
        }
    })?;
    let cfg = MCConfig { steps, ..*mc };
    let ens = simulate_system(sys, &cfg, None, false)?;
    let (simulated, stderr) = ens.terminal_statistic(|z| (z[1] - z[0]).powi(2));
    Ok(SemigroupDemo {
        simulated,
        stderr,
        closed_form,
        reference_form,
    })
}
