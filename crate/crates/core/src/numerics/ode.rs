//! Dormand-Prince 5(4) explicit Runge-Kutta with adaptive step control.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

// Difference between the 5th and 4th order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    /// Absolute floor per component; tiny by default so that quantities of
    /// order 1e-15 are still controlled relatively.
    pub abs_tol: f64,
    pub initial_step: Option<f64>,
    pub max_step: Option<f64>,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            initial_step: None,
            max_step: None,
            min_step: 1e-14,
            max_steps: 1_000_000,
        }
    }
}

/// Integrates `dx/dt = f(t, x)` from `t0` to `t_end`. `after_step` is called
/// with every accepted state and may project it (e.g. renormalize a unit
/// vector) before the next step.
pub fn integrate<const N: usize, F, P>(
    f: F,
    t0: f64,
    x0: [f64; N],
    t_end: f64,
    opts: &OdeOptions,
    mut after_step: P,
) -> Result<()>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    P: FnMut(f64, &mut [f64; N]),
{
    let span = t_end - t0;
    if span <= 0.0 {
        return Ok(());
    }
    let max_step = opts.max_step.unwrap_or(span);
    let mut h = opts.initial_step.unwrap_or(span * 1e-3).min(max_step);
    let min_step = opts.min_step * span.max(1.0);
    let mut t = t0;
    let mut x = x0;
    let mut k = [[0.0; N]; 7];
    k[0] = f(t, &x);

    for _ in 0..opts.max_steps {
        if t >= t_end {
            return Ok(());
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        for s in 1..7 {
            let mut xs = x;
            for (i, xi) in xs.iter_mut().enumerate() {
                *xi += h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            k[s] = f(t + C[s] * h, &xs);
        }
        let mut x_new = x;
        let mut err = 0.0f64;
        for i in 0..N {
            x_new[i] += h * (0..6).map(|j| A[6][j] * k[j][i]).sum::<f64>();
            let e = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
            if e != 0.0 {
                let scale = opts.abs_tol + opts.rel_tol * x[i].abs().max(x_new[i].abs());
                err = err.max((e / scale).abs());
            }
        }
        if !err.is_finite() {
            return Err(Error::NonFinite("ode step"));
        }
        if err <= 1.0 {
            t = if last { t_end } else { t + h };
            x = x_new;
            after_step(t, &mut x);
            // FSAL: the last stage is the derivative at the new point unless
            // the state was projected.
            k[0] = f(t, &x);
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h * factor).min(max_step);
        if h < min_step && t < t_end {
            return Err(Error::StepUnderflow { arclength: t });
        }
    }
    Err(Error::StepUnderflow { arclength: t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_decay() {
        let mut end = [0.0];
        integrate(
            |_, x: &[f64; 1]| [-x[0]],
            0.0,
            [1.0],
            5.0,
            &OdeOptions::default(),
            |t, x| {
                if t == 5.0 {
                    end = *x;
                }
            },
        )
        .unwrap();
        assert_relative_eq!(end[0], (-5.0f64).exp(), max_relative = 1e-9);
    }

    #[test]
    fn harmonic_oscillator_conserves_energy() {
        let mut last = [0.0, 0.0];
        integrate(
            |_, x: &[f64; 2]| [x[1], -x[0]],
            0.0,
            [1.0, 0.0],
            10.0,
            &OdeOptions::default(),
            |_, x| last = *x,
        )
        .unwrap();
        assert_relative_eq!(last[0], 10f64.cos(), epsilon = 1e-8);
        assert_relative_eq!(last[1], -10f64.sin(), epsilon = 1e-8);
    }

    #[test]
    fn stiff_blowup_reports_error() {
        let opts = OdeOptions {
            max_steps: 200,
            ..OdeOptions::default()
        };
        let r = integrate(
            |_, x: &[f64; 1]| [x[0] * x[0]],
            0.0,
            [1.0],
            2.0,
            &opts,
            |_, _| {},
        );
        assert!(r.is_err());
    }
}
