//! Adaptive Dormand–Prince 5(4) integration for complex-matrix ODEs
//! dY/dt = F(t, Y), used by the master-equation validation path.
//!
//! Error control is per-element: the embedded 4th-order solution provides an
//! error estimate normalized by atol + rtol·|Y|, and the step is accepted
//! when the worst element is within budget.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Integration tolerances; the defaults are tight enough that integration
/// error is negligible against every comparison tolerance in the crate.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { atol: 1e-9, rtol: 1e-7 }
    }
}

// Dormand–Prince coefficients. The fifth-order weights are the last stage
// row (FSAL); E holds b5 − b4 for the embedded error estimate.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate dY/dt = rhs(t, Y) from `t0` to `t1` (t1 ≥ t0) starting at `y0`.
pub fn integrate<F>(
    rhs: F,
    t0: f64,
    t1: f64,
    y0: DMatrix<Complex64>,
    tol: Tolerances,
) -> Result<DMatrix<Complex64>>
where
    F: Fn(f64, &DMatrix<Complex64>) -> DMatrix<Complex64>,
{
    debug_assert!(t1 >= t0);
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0);
    }
    let mut t = t0;
    let mut y = y0;
    let mut h = (span / 16.0).min(1.0);
    let (rows, cols) = (y.nrows(), y.ncols());
    let mut k: Vec<DMatrix<Complex64>> = Vec::with_capacity(7);

    while t < t1 {
        h = h.min(t1 - t);
        if h < 1e-13 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t, h });
        }

        k.clear();
        k.push(rhs(t, &y));
        for stage in 1..7 {
            let mut arg = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = A[stage][j];
                if a != 0.0 {
                    arg += kj * Complex64::new(a * h, 0.0);
                }
            }
            k.push(rhs(t + C[stage] * h, &arg));
        }

        let mut y5 = y.clone();
        let mut err = DMatrix::<Complex64>::zeros(rows, cols);
        for (j, kj) in k.iter().enumerate() {
            if B5[j] != 0.0 {
                y5 += kj * Complex64::new(B5[j] * h, 0.0);
            }
            let d = B5[j] - B4[j];
            if d != 0.0 {
                err += kj * Complex64::new(d * h, 0.0);
            }
        }

        let mut worst: f64 = 0.0;
        for i in 0..rows {
            for j in 0..cols {
                let scale = tol.atol + tol.rtol * y[(i, j)].norm().max(y5[(i, j)].norm());
                worst = worst.max(err[(i, j)].norm() / scale);
            }
        }

        if worst <= 1.0 {
            t += h;
            y = y5;
        }
        // A non-finite error (overflow/NaN in the rhs) must shrink the step,
        // never poison the controller.
        let growth = if !worst.is_finite() {
            0.2
        } else if worst > 0.0 {
            0.9 * worst.powf(-0.2)
        } else {
            5.0
        };
        h *= growth.clamp(0.2, 5.0);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: Complex64) -> DMatrix<Complex64> {
        DMatrix::from_element(1, 1, x)
    }

    #[test]
    fn exponential_decay() {
        let y = integrate(
            |_, y| y * Complex64::new(-1.0, 0.0),
            0.0,
            2.0,
            scalar(Complex64::new(1.0, 0.0)),
            Tolerances::default(),
        )
        .unwrap();
        assert!((y[(0, 0)].re - (-2.0_f64).exp()).abs() < 1e-8);
        assert!(y[(0, 0)].im.abs() < 1e-12);
    }

    #[test]
    fn phase_rotation_preserves_magnitude() {
        let omega = 3.0;
        let y = integrate(
            |_, y| y * Complex64::new(0.0, omega),
            0.0,
            5.0,
            scalar(Complex64::new(1.0, 0.0)),
            Tolerances { atol: 1e-12, rtol: 1e-10 },
        )
        .unwrap();
        let expected = Complex64::from_polar(1.0, omega * 5.0);
        assert!((y[(0, 0)] - expected).norm() < 1e-8);
    }

    #[test]
    fn matrix_rotation() {
        // dY/dt = A·Y with A = [[0,1],[−1,0]] rotates the initial vector.
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        let y0 = DMatrix::from_column_slice(2, 1, &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let t = std::f64::consts::FRAC_PI_2;
        let y = integrate(|_, y| &a * y, 0.0, t, y0, Tolerances { atol: 1e-12, rtol: 1e-10 })
            .unwrap();
        assert!(y[(0, 0)].norm() < 1e-9);
        assert!((y[(1, 0)] + Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn time_dependent_rhs() {
        // dy/dt = 2t → y(3) = 9.
        let y = integrate(
            |t, _| scalar(Complex64::new(2.0 * t, 0.0)),
            0.0,
            3.0,
            scalar(Complex64::new(0.0, 0.0)),
            Tolerances::default(),
        )
        .unwrap();
        assert!((y[(0, 0)].re - 9.0).abs() < 1e-9);
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let run = |rtol: f64| {
            let y = integrate(
                |t, y| y * Complex64::new(0.0, 10.0 * (3.0 * t).cos()),
                0.0,
                4.0,
                scalar(Complex64::new(1.0, 0.0)),
                Tolerances { atol: 1e-14, rtol },
            )
            .unwrap();
            let exact = Complex64::from_polar(1.0, 10.0 / 3.0 * (12.0_f64).sin());
            (y[(0, 0)] - exact).norm()
        };
        let loose = run(1e-4);
        let tight = run(1e-10);
        assert!(tight < loose / 10.0, "loose {loose}, tight {tight}");
        assert!(tight < 1e-8);
    }

    #[test]
    fn singularity_triggers_underflow_error() {
        // The rhs stops being evaluable at t = 1 (NaN wall). Every trial step
        // that touches the wall is rejected, so the controller shrinks h until
        // it hits the underflow floor; it must report that instead of looping
        // forever or stepping across garbage.
        let result = integrate(
            |t, y| {
                if t >= 1.0 {
                    scalar(Complex64::new(f64::NAN, 0.0))
                } else {
                    y * Complex64::new(1.0 / (1.0 - t), 0.0)
                }
            },
            0.0,
            2.0,
            scalar(Complex64::new(1.0, 0.0)),
            Tolerances::default(),
        );
        assert!(matches!(result, Err(Error::StepSizeUnderflow { .. })));
    }
}
