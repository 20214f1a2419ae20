//! Angular-momentum coupling coefficients.
//!
//! Works for integer and half-integer quantum numbers; arguments are plain
//! `f64` values that must be non-negative multiples of 1/2 (and the m's
//! multiples of 1/2 of the right parity).  Internally everything is converted
//! to doubled integers so that every factorial argument is exact.

use crate::error::{Error, Result};

/// Convert to a doubled integer, rejecting values that are not multiples of 1/2.
fn doubled(x: f64, name: &str) -> Result<i64> {
    let d = 2.0 * x;
    let r = d.round();
    if (d - r).abs() > 1e-9 || !r.is_finite() {
        return Err(Error::InvalidQuantumNumbers(format!(
            "{name} = {x} is not a multiple of 1/2"
        )));
    }
    Ok(r as i64)
}

/// n! as f64; exact for the small arguments that occur here (n ≲ 20).
fn fact(n: i64) -> f64 {
    debug_assert!(n >= 0, "factorial of negative integer");
    (1..=n).map(|k| k as f64).product()
}

/// Halve a doubled integer that is known to be even.
fn halved(x: i64) -> i64 {
    debug_assert!(x % 2 == 0, "expected an even doubled integer, got {x}");
    x / 2
}

fn check_jm(tj: i64, tm: i64, what: &str) -> Result<()> {
    if tj < 0 {
        return Err(Error::InvalidQuantumNumbers(format!("{what}: j < 0")));
    }
    if tm.abs() > tj {
        return Err(Error::InvalidQuantumNumbers(format!("{what}: |m| > j")));
    }
    if (tj - tm) % 2 != 0 {
        return Err(Error::InvalidQuantumNumbers(format!(
            "{what}: m and j must differ by an integer"
        )));
    }
    Ok(())
}

/// Clebsch–Gordan coefficient ⟨j1 m1; j2 m2 | j m⟩ in the Condon–Shortley
/// convention, evaluated with Racah's closed-form sum.
///
/// Returns 0 when m ≠ m1 + m2 or when (j1, j2, j) fail the triangle rule;
/// invalid quantum numbers (|m| > j, non-half-integer values, wrong parity)
/// are rejected as errors.
pub fn clebsch_gordan(j1: f64, m1: f64, j2: f64, m2: f64, j: f64, m: f64) -> Result<f64> {
    let tj1 = doubled(j1, "j1")?;
    let tm1 = doubled(m1, "m1")?;
    let tj2 = doubled(j2, "j2")?;
    let tm2 = doubled(m2, "m2")?;
    let tj = doubled(j, "j")?;
    let tm = doubled(m, "m")?;
    check_jm(tj1, tm1, "(j1, m1)")?;
    check_jm(tj2, tm2, "(j2, m2)")?;
    check_jm(tj, tm, "(j, m)")?;

    if tm1 + tm2 != tm {
        return Ok(0.0);
    }
    // Triangle rule, including the requirement that j1 + j2 + j be an integer.
    if tj > tj1 + tj2 || tj < (tj1 - tj2).abs() || (tj1 + tj2 + tj) % 2 != 0 {
        return Ok(0.0);
    }

    let prefactor = ((tj + 1) as f64
        * fact(halved(tj1 + tj2 - tj))
        * fact(halved(tj1 - tj2 + tj))
        * fact(halved(-tj1 + tj2 + tj))
        / fact(halved(tj1 + tj2 + tj) + 1)
        * fact(halved(tj + tm))
        * fact(halved(tj - tm))
        * fact(halved(tj1 - tm1))
        * fact(halved(tj1 + tm1))
        * fact(halved(tj2 - tm2))
        * fact(halved(tj2 + tm2)))
    .sqrt();

    // Summation limits keep every factorial argument non-negative.
    let a1 = halved(tj1 + tj2 - tj);
    let a2 = halved(tj1 - tm1);
    let a3 = halved(tj2 + tm2);
    let b1 = halved(tj - tj2 + tm1);
    let b2 = halved(tj - tj1 - tm2);
    let k_min = 0.max(-b1).max(-b2);
    let k_max = a1.min(a2).min(a3);

    let mut sum = 0.0;
    for k in k_min..=k_max {
        let term = 1.0
            / (fact(k) * fact(a1 - k) * fact(a2 - k) * fact(a3 - k) * fact(b1 + k) * fact(b2 + k));
        sum += if k % 2 == 0 { term } else { -term };
    }
    Ok(prefactor * sum)
}
