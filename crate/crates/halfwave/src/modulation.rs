//! Leading-order modulation system in the rescaled clock s:
//! b_s = −b²/2, β_s = −bβ, λ_s = −bλ, α_s = λβ, γ_s = 1, t_s = λ.

use std::io::Write;

use serde::Serialize;

use crate::error::{HwError, Result};
use crate::stats::linear_fit;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModulationState {
    pub b: f64,
    pub beta: [f64; 3],
    pub lambda: f64,
    pub alpha: [f64; 3],
    pub gamma: f64,
    pub t: f64,
    pub s: f64,
}

impl ModulationState {
    pub fn new(b: f64, beta: [f64; 3], lambda: f64) -> Self {
        Self {
            b,
            beta,
            lambda,
            alpha: [0.0; 3],
            gamma: 0.0,
            t: 0.0,
            s: 0.0,
        }
    }

    fn pack(&self) -> [f64; 10] {
        let [b1, b2, b3] = self.beta;
        let [a1, a2, a3] = self.alpha;
        [self.b, b1, b2, b3, self.lambda, a1, a2, a3, self.gamma, self.t]
    }

    fn unpack(y: &[f64; 10], s: f64) -> Self {
        Self {
            b: y[0],
            beta: [y[1], y[2], y[3]],
            lambda: y[4],
            alpha: [y[5], y[6], y[7]],
            gamma: y[8],
            t: y[9],
            s,
        }
    }
}

/// s-derivatives of the modulation parameters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StateRates {
    pub b: f64,
    pub beta: [f64; 3],
    pub lambda: f64,
    pub alpha: [f64; 3],
    pub gamma: f64,
}

pub fn rhs_leading(st: &ModulationState) -> Result<StateRates> {
    if !(st.lambda > 0.0) {
        return Err(HwError::Domain(format!("λ must be positive, got {}", st.lambda)));
    }
    let b = st.b;
    Ok(StateRates {
        b: -0.5 * b * b,
        beta: st.beta.map(|x| -b * x),
        lambda: -b * st.lambda,
        alpha: st.beta.map(|x| st.lambda * x),
        gamma: 1.0,
    })
}

fn rhs_packed(y: &[f64; 10]) -> Result<[f64; 10]> {
    let st = ModulationState::unpack(y, 0.0);
    let r = rhs_leading(&st)?;
    Ok([
        r.b, r.beta[0], r.beta[1], r.beta[2], r.lambda, r.alpha[0], r.alpha[1], r.alpha[2], r.gamma, st.lambda,
    ])
}

/// (b_s + b²/2, γ̃_s, λ_s/λ + b, α_s/λ − β, β_s + bβ)
pub fn mod_vector(st: &ModulationState, d: &StateRates) -> [f64; 9] {
    let mut m = [0.0; 9];
    m[0] = d.b + 0.5 * st.b * st.b;
    m[1] = d.gamma - 1.0;
    m[2] = d.lambda / st.lambda + st.b;
    for j in 0..3 {
        m[3 + j] = d.alpha[j] / st.lambda - st.beta[j];
        m[6 + j] = d.beta[j] + st.b * st.beta[j];
    }
    m
}

pub fn mod_norm(m: &[f64; 9]) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct ModTrajectory {
    pub states: Vec<ModulationState>,
    /// Integration stopped because λ fell below the threshold.
    pub reached_lambda_min: bool,
}

/// Classical RK4 in s with t carried along as t_s = λ. A negative `ds` integrates backwards.
pub fn integrate(start: ModulationState, s_span: f64, ds: f64, lambda_min: Option<f64>) -> Result<ModTrajectory> {
    if ds == 0.0 || !ds.is_finite() || s_span * ds < 0.0 {
        return Err(HwError::Config(format!("step {ds} incompatible with span {s_span}")));
    }
    if (start.b * ds).abs() > 0.1 {
        return Err(HwError::Config(format!("step too large: |b·ds| = {} > 0.1", (start.b * ds).abs())));
    }
    let steps = (s_span / ds).abs().round() as usize;
    let h = s_span / steps.max(1) as f64;
    let mut y = start.pack();
    let mut s = start.s;
    let mut states = vec![start];
    let mut reached = false;
    for _ in 0..steps {
        let k1 = rhs_packed(&y)?;
        let k2 = rhs_packed(&lin(&y, &k1, h / 2.0))?;
        let k3 = rhs_packed(&lin(&y, &k2, h / 2.0))?;
        let k4 = rhs_packed(&lin(&y, &k3, h))?;
        for i in 0..10 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        s += h;
        states.push(ModulationState::unpack(&y, s));
        if let Some(lm) = lambda_min {
            if y[4] < lm {
                reached = true;
                break;
            }
        }
    }
    Ok(ModTrajectory {
        states,
        reached_lambda_min: reached,
    })
}

fn lin(y: &[f64; 10], k: &[f64; 10], h: f64) -> [f64; 10] {
    let mut out = *y;
    for i in 0..10 {
        out[i] += h * k[i];
    }
    out
}

/// Exact solution of the leading system.
pub fn closed_form(start: &ModulationState, s: f64) -> ModulationState {
    let b0 = start.b;
    let ds = s - start.s;
    let g = 1.0 + 0.5 * b0 * ds;
    let (alpha_factor, t_factor) = if b0 == 0.0 {
        (ds, ds)
    } else {
        (2.0 / (3.0 * b0) * (1.0 - g.powi(-3)), 2.0 / b0 * (1.0 - 1.0 / g))
    };
    let l0 = start.lambda;
    let mut alpha = start.alpha;
    for j in 0..3 {
        alpha[j] += l0 * start.beta[j] * alpha_factor;
    }
    ModulationState {
        b: b0 / g,
        beta: start.beta.map(|x| x / (g * g)),
        lambda: l0 / (g * g),
        alpha,
        gamma: start.gamma + ds,
        t: start.t + l0 * t_factor,
        s,
    }
}

/// Constants of the asymptotic regime.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AsymptoticTargets {
    /// √(e₁/E₀)
    pub a0: f64,
    /// P₀/p₁
    pub b0: f64,
}

pub fn asymptotic_targets(e1: f64, energy0: f64, p1: f64, momentum0: f64) -> Result<AsymptoticTargets> {
    if !(energy0 > 0.0 && e1 > 0.0) {
        return Err(HwError::Domain(format!("A₀ needs e₁ > 0 and E₀ > 0 (got {e1}, {energy0})")));
    }
    if p1 == 0.0 {
        return Err(HwError::Domain("p₁ must be nonzero".into()));
    }
    Ok(AsymptoticTargets {
        a0: (e1 / energy0).sqrt(),
        b0: momentum0 / p1,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BlowupFit {
    /// Extrapolated blowup time t_last + ∫λ ds over the remaining s-range.
    pub blowup_time: f64,
    /// Fitted exponent of λ ∝ (T − t)^p.
    pub exponent: f64,
    pub lambda_star: f64,
    /// Fitted coefficient c in γ ≈ c/(T − t) + const.
    pub gamma_coefficient: f64,
    /// Fitted exponent of the ‖D^{1/2}u‖ proxy λ^{−1/2} against T − t.
    pub half_derivative_exponent: f64,
    /// Blowup rate printed in the main theorem, reported alongside (not sharp).
    pub stated_half_derivative_exponent: f64,
    /// max |b/√λ − 1/A₀| along the trajectory (when A₀ is supplied).
    pub a0_deviation: Option<f64>,
}

pub fn fit_blowup_laws(traj: &ModTrajectory, a0: Option<f64>) -> Result<BlowupFit> {
    let st = &traj.states;
    if st.len() < 3 {
        return Err(HwError::Fit("trajectory too short".into()));
    }
    if st.windows(2).any(|w| w[1].lambda >= w[0].lambda) {
        return Err(HwError::Fit("λ is not strictly decreasing".into()));
    }
    let last = st.last().unwrap();
    if !(last.b > 0.0) {
        return Err(HwError::Fit("b must stay positive for extrapolation".into()));
    }
    // In the leading system ∫_s^∞ λ = 2λ/b exactly.
    let blowup_time = last.t + 2.0 * last.lambda / last.b;
    let pts: Vec<(f64, f64)> = st.iter().map(|x| ((blowup_time - x.t).ln(), x.lambda.ln())).collect();
    let (exponent, a) = linear_fit(pts.iter().cloned());
    let (half, _) = linear_fit(pts.iter().map(|&(x, y)| (x, -0.5 * y)));
    let (gamma_coefficient, _) = linear_fit(st.iter().map(|x| (1.0 / (blowup_time - x.t), x.gamma)));
    let a0_deviation = a0.map(|a0| {
        st.iter()
            .map(|x| (x.b / x.lambda.sqrt() - 1.0 / a0).abs())
            .fold(0.0, f64::max)
    });
    Ok(BlowupFit {
        blowup_time,
        exponent,
        lambda_star: a.exp(),
        gamma_coefficient,
        half_derivative_exponent: half,
        stated_half_derivative_exponent: -0.25,
        a0_deviation,
    })
}

/// Writes t, s, b, β₃, λ, α₃, γ and the two leading invariants with 17 significant digits.
pub fn write_trajectory_csv<W: Write>(traj: &ModTrajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t",
        "s",
        "b",
        "beta3",
        "lambda",
        "alpha3",
        "gamma",
        "b_over_sqrt_lambda",
        "beta_over_lambda",
    ])?;
    for x in &traj.states {
        let row = [
            x.t,
            x.s,
            x.b,
            x.beta[2],
            x.lambda,
            x.alpha[2],
            x.gamma,
            x.b / x.lambda.sqrt(),
            x.beta[2] / x.lambda,
        ];
        w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}
