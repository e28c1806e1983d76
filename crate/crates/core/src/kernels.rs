//! Numerical kernels for a single thin-wire radiator: the sinusoidal current
//! profile, the source-observer distance, the scalar Green function, the
//! field factor, and the radiated tangential electric field.
//!
//! Sign convention: the Green function phase is exp(-j k0 R) (outgoing wave
//! for the exp(+j w t) time convention). A regression test pins this.

use num_complex::Complex64;
use thiserror::Error;

use crate::quadrature::{
    integrate_adaptive, panels_graded, panels_uniform, split_at, QuadError, QuadratureSpec,
};
use crate::scenario::{PhysicalConstants, Point3, WireElement};

/// Relative tolerance (in wavelengths) for deciding that an observation point
/// lies on a wire's axis, selecting the radius-regularized distance branch.
pub const ON_AXIS_TOL_WAVELENGTHS: f64 = 1e-12;

/// Resonance guard: sin(k0 l / 2) smaller than this in magnitude makes the
/// sinusoidal profile normalization meaningless.
pub const RESONANCE_GUARD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("axial coordinate {zp} outside wire span [{lo}, {hi}]")]
    OutsideSpan { zp: f64, lo: f64, hi: f64 },
    #[error("resonant element: |sin(k0 l/2)| = {0:.3e} below guard")]
    ResonantElement(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Unit-port-current sinusoidal profile
/// sin(k0 (l/2 - |z' - z_e|)) / sin(k0 l/2); 1 at the feed, 0 at both ends.
pub fn current_profile(zp: f64, element: &WireElement, k0: f64) -> Result<f64, KernelError> {
    let (lo, hi) = element.span();
    // one-ulp slack: quadrature nodes mapped onto a panel endpoint can land
    // marginally outside the arithmetic span
    let slack = 4.0 * f64::EPSILON * element.length.max(element.position.z.abs());
    if zp < lo - slack || zp > hi + slack {
        return Err(KernelError::OutsideSpan { zp, lo, hi });
    }
    let denom = (k0 * element.length / 2.0).sin();
    if denom.abs() < RESONANCE_GUARD {
        return Err(KernelError::ResonantElement(denom.abs()));
    }
    let arg = k0 * (element.length / 2.0 - (zp - element.position.z).abs());
    Ok(arg.sin() / denom)
}

/// Checks the resonance guard once, so per-node profile evaluation can skip it.
pub fn check_not_resonant(element: &WireElement, k0: f64) -> Result<f64, KernelError> {
    let denom = (k0 * element.length / 2.0).sin();
    if denom.abs() < RESONANCE_GUARD {
        return Err(KernelError::ResonantElement(denom.abs()));
    }
    Ok(denom)
}

/// True when the observation point shares the wire's transverse coordinates,
/// which selects the radius-regularized distance branch.
pub fn on_axis(obs: &Point3, element: &WireElement, wavelength: f64) -> bool {
    obs.transverse_distance(&element.position) < ON_AXIS_TOL_WAVELENGTHS * wavelength
}

/// Distance from the source point (z' on the wire axis) to the observation
/// point. On-axis observation points are held off the singularity by the wire
/// radius: R = sqrt(a^2 + (z - z')^2).
pub fn distance(obs: &Point3, element: &WireElement, zp: f64, wavelength: f64) -> f64 {
    let dz = obs.z - zp;
    if on_axis(obs, element, wavelength) {
        (element.radius * element.radius + dz * dz).sqrt()
    } else {
        let dx = obs.x - element.position.x;
        let dy = obs.y - element.position.y;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Scalar Green function exp(-j k0 R)/R (1/m).
pub fn scalar_green(obs: &Point3, element: &WireElement, zp: f64, k0: f64, wavelength: f64) -> Complex64 {
    let r = distance(obs, element, zp, wavelength);
    green_of_r(r, k0)
}

#[inline]
pub fn green_of_r(r: f64, k0: f64) -> Complex64 {
    Complex64::from_polar(1.0 / r, -k0 * r)
}

/// Field factor (1/m^2):
/// ((z-z')^2/R^2)(3/R^2 + 3jk0/R - k0^2) - (jk0 + 1/R)/R + k0^2.
pub fn field_factor(obs: &Point3, element: &WireElement, zp: f64, k0: f64, wavelength: f64) -> Complex64 {
    let r = distance(obs, element, zp, wavelength);
    field_factor_of(obs.z - zp, r, k0)
}

#[inline]
pub fn field_factor_of(dz: f64, r: f64, k0: f64) -> Complex64 {
    let inv_r = 1.0 / r;
    let cos2 = (dz * inv_r) * (dz * inv_r);
    let k0sq = k0 * k0;
    let first = Complex64::new(3.0 * inv_r * inv_r - k0sq, 3.0 * k0 * inv_r) * cos2;
    let second = Complex64::new(inv_r, k0) * inv_r;
    first - second + Complex64::new(k0sq, 0.0)
}

/// Tangential electric field (V/m) radiated by `element` carrying
/// `port_current` at its feed, observed at `obs`:
/// c_E * int F * G * I_z dz' with c_E = -j eta0 / (4 pi k0).
/// Exactly linear in the port current.
pub fn radiated_field_z(
    obs: &Point3,
    element: &WireElement,
    port_current: Complex64,
    constants: &PhysicalConstants,
    quad: &QuadratureSpec,
) -> Result<Complex64, KernelError> {
    if port_current == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let k0 = constants.k0;
    let lambda = constants.wavelength;
    let denom = check_not_resonant(element, k0)?;
    let (lo, hi) = element.span();
    let max_width = (lambda / 8.0).min(element.length / 4.0);
    let panels = if on_axis(obs, element, lambda) {
        // The integrand varies on the scale of the wire radius around the
        // observation height; start well below that scale so the refinement
        // budget is spent confirming convergence, not reaching it.
        let w = quad.near_panel_width.unwrap_or(element.radius);
        panels_graded(lo, hi, obs.z, 10.0 * w, w / 8.0, max_width)
    } else {
        panels_uniform(lo, hi, max_width)
    };
    // The current profile kinks at the feed; pin a panel edge there so the
    // non-smooth point never sits inside a panel.
    let panels = split_at(panels, element.position.z);
    let ze = element.position.z;
    let half_l = element.length / 2.0;
    let result = integrate_adaptive(panels, quad, |zp| {
        let profile = (k0 * (half_l - (zp - ze).abs())).sin() / denom;
        let r = distance(obs, element, zp, lambda);
        field_factor_of(obs.z - zp, r, k0) * green_of_r(r, k0) * profile
    })?;
    let c_e = Complex64::new(0.0, -constants.eta0 / (4.0 * std::f64::consts::PI * k0));
    Ok(c_e * result.value * port_current)
}
