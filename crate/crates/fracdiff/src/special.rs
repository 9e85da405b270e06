//! Special functions: the Euler gamma function, the upper incomplete gamma
//! function and the constant c_alpha = sin(pi*alpha)/pi.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::problem::FractionalOrder;

/// sin(pi*alpha)/pi, the prefactor of the diffusive representation.
pub fn c_alpha(order: FractionalOrder) -> f64 {
    (PI * order.alpha()).sin() / PI
}

// Lanczos coefficients, g = 7, n = 9 (the GNU Scientific Library set).
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_gamma(x: f64) -> f64 {
    // valid for x >= 0.5
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

/// Euler gamma function for positive arguments.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain(format!(
            "gamma requires a positive finite argument, got {x}"
        )));
    }
    if x < 0.5 {
        // reflection: gamma(x) = pi / (sin(pi x) * gamma(1 - x))
        Ok(PI / ((PI * x).sin() * lanczos_gamma(1.0 - x)))
    } else {
        Ok(lanczos_gamma(x))
    }
}

const INCGAMMA_EPS: f64 = 1e-16;
const INCGAMMA_MAX_ITER: usize = 400;

// Lower incomplete gamma by its power series:
// lower(s, x) = x^s e^{-x} sum_{n>=0} x^n / (s (s+1) ... (s+n)).
fn lower_series(s: f64, x: f64) -> Result<f64> {
    let mut denom = s;
    let mut term = 1.0 / s;
    let mut sum = term;
    for _ in 0..INCGAMMA_MAX_ITER {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * INCGAMMA_EPS {
            let scale = (s * x.ln() - x).exp();
            return Ok(sum * scale);
        }
    }
    Err(Error::Numerical(format!(
        "incomplete gamma series did not converge for s={s}, x={x}"
    )))
}

// Upper incomplete gamma by the continued fraction
// upper(s, x) = x^s e^{-x} / (x + 1 - s - 1(1-s)/(x + 3 - s - 2(2-s)/(...)))
// evaluated with the modified Lentz algorithm.
fn upper_continued_fraction(s: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=INCGAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < INCGAMMA_EPS {
            let scale = (s * x.ln() - x).exp();
            return Ok(scale * h);
        }
    }
    Err(Error::Numerical(format!(
        "incomplete gamma continued fraction did not converge for s={s}, x={x}"
    )))
}

/// Upper incomplete gamma function Gamma(s, x) = int_x^inf rho^{s-1} e^{-rho} drho
/// for 0 < s <= 1, x >= 0.
///
/// Power series below x = s + 1, continued fraction above. For very large x
/// the prefactor x^s e^{-x} underflows and the result flushes to zero.
pub fn upper_incomplete_gamma(s: f64, x: f64) -> Result<f64> {
    if !(s.is_finite() && s > 0.0 && s <= 1.0) {
        return Err(Error::Domain(format!(
            "incomplete gamma requires 0 < s <= 1, got s={s}"
        )));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!(
            "incomplete gamma requires x >= 0, got x={x}"
        )));
    }
    if x == 0.0 {
        return gamma(s);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x < s + 1.0 {
        Ok(gamma(s)? - lower_series(s, x)?)
    } else {
        upper_continued_fraction(s, x)
    }
}

/// Lower incomplete gamma, the complement of [`upper_incomplete_gamma`].
pub fn lower_incomplete_gamma(s: f64, x: f64) -> Result<f64> {
    if !(s.is_finite() && s > 0.0 && s <= 1.0) {
        return Err(Error::Domain(format!(
            "incomplete gamma requires 0 < s <= 1, got s={s}"
        )));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!(
            "incomplete gamma requires x >= 0, got x={x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < s + 1.0 {
        lower_series(s, x)
    } else {
        Ok(gamma(s)? - upper_continued_fraction(s, x)?)
    }
}
