//! Dormand–Prince 5(4) integrator with adaptive step control.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            max_steps: 1_000_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// error coefficients: b - b*
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])], h: f64) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates `y' = f(r, y)` from `r0` through each point of `grid` (which
/// must be increasing and not below `r0`), returning the state at each grid
/// point. `observe` sees every accepted step and may abort by returning an
/// error.
pub fn integrate_to_grid<const N: usize, F, O>(
    mut f: F,
    r0: f64,
    y0: [f64; N],
    grid: &[f64],
    opts: OdeOptions,
    mut observe: O,
) -> Result<Vec<[f64; N]>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    O: FnMut(f64, &[f64; N]) -> Result<()>,
{
    let mut out = Vec::with_capacity(grid.len());
    let mut r = r0;
    let mut y = y0;
    let span = grid.last().map_or(0.0, |&g| g - r0);
    let mut h = (span * 1e-3).max(1e-8);
    let mut steps = 0usize;
    let mut k1 = f(r, &y);

    for &target in grid {
        if target < r {
            return Err(Error::InvalidArgument(format!(
                "grid point {target} lies before current position {r}"
            )));
        }
        while r < target {
            if steps >= opts.max_steps {
                return Err(Error::Integration {
                    at: r,
                    reason: "step budget exhausted".into(),
                });
            }
            steps += 1;
            let last = r + h >= target;
            let h_nat = h;
            if last {
                h = target - r;
            }
            let k2 = f(r + C2 * h, &axpy(&y, &[(A21, &k1)], h));
            let k3 = f(r + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h));
            let k4 = f(r + C4 * h, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
            let k5 = f(
                r + C5 * h,
                &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
            );
            let k6 = f(
                r + h,
                &axpy(
                    &y,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                    h,
                ),
            );
            let y_new = axpy(
                &y,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
                h,
            );
            let k7 = f(r + h, &y_new);
            let mut err = 0.0f64;
            for i in 0..N {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                return Err(Error::Integration {
                    at: r,
                    reason: "non-finite state".into(),
                });
            }
            if err <= 1.0 {
                r = if last { target } else { r + h };
                y = y_new;
                k1 = k7;
                observe(r, &y)?;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = if last && err <= 1.0 {
                // a step shortened to land on the grid says nothing about the
                // natural step size
                h_nat.max(h * factor)
            } else {
                h * factor
            };
            if h < 1e-14 * r.abs().max(1.0) {
                return Err(Error::Integration {
                    at: r,
                    reason: "step size underflow".into(),
                });
            }
        }
        out.push(y);
    }
    Ok(out)
}

pub fn integrate<const N: usize, F>(f: F, r0: f64, y0: [f64; N], r1: f64, opts: OdeOptions) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let v = integrate_to_grid(f, r0, y0, &[r1], opts, |_, _| Ok(()))?;
    Ok(v[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let y = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [0.0, 1.0],
            10.0,
            OdeOptions::default(),
        )
        .unwrap();
        assert!((y[0] - 10f64.sin()).abs() < 1e-8);
        assert!((y[1] - 10f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn grid_output_hits_points() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let ys = integrate_to_grid(
            |_, y: &[f64; 1]| [y[0]],
            0.0,
            [1.0],
            &grid,
            OdeOptions::default(),
            |_, _| Ok(()),
        )
        .unwrap();
        for (r, y) in grid.iter().zip(&ys) {
            assert!((y[0] - r.exp()).abs() < 1e-9 * r.exp());
        }
    }
}
