//! Phase wrapping helpers shared by layers, penalties and the binarizer.

use std::f64::consts::PI;

/// Wrap an angle to the interval (-pi, pi].
pub fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Wrap an angle to the interval [0, 2*pi).
pub fn wrap_positive(x: f64) -> f64 {
    x.rem_euclid(2.0 * PI)
}
