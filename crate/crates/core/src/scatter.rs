//! Zero-energy s-wave scattering lengths of radial pair potentials.
//!
//! With `ħ = 2m = 1` the relative motion of two particles obeys
//! `u'' = ½ v(r) u` at zero energy; beyond the range of `v` the solution is
//! proportional to `r − a`.

use crate::error::{Error, Result};
use crate::real::Real;

/// Radial pair potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadialPotential<T: Real> {
    /// Infinite for `r ≤ radius`, zero outside.
    HardSphere { radius: T },
    /// `−depth` for `r < radius`, zero outside. A negative depth is a
    /// repulsive step.
    SquareWell { depth: T, radius: T },
    /// `amplitude · exp(−r²/width²)`.
    Gaussian { amplitude: T, width: T },
    /// `strength · C · sin²(π (r − inner)/(outer − inner))` on
    /// `[inner, outer]`, with `C` chosen so that `∫U d³x = 4π` at unit
    /// strength.
    SoftShell { inner: T, outer: T, strength: T },
}

/// Gaussian tails below this value are treated as zero.
const NEGLIGIBLE: f64 = 1e-14;

impl<T: Real> RadialPotential<T> {
    pub fn zero() -> Self {
        RadialPotential::SquareWell {
            depth: T::zero(),
            radius: T::one(),
        }
    }

    /// Unit-strength soft shell on `[inner, outer]`.
    pub fn soft_shell(inner: T, outer: T) -> Self {
        RadialPotential::SoftShell {
            inner,
            outer,
            strength: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RadialPotential::HardSphere { radius } => radius >= T::zero() && radius.is_finite(),
            RadialPotential::SquareWell { depth, radius } => depth.is_finite() && radius > T::zero() && radius.is_finite(),
            RadialPotential::Gaussian { amplitude, width } => amplitude.is_finite() && width > T::zero() && width.is_finite(),
            RadialPotential::SoftShell { inner, outer, strength } => {
                inner >= T::zero() && outer > inner && outer.is_finite() && strength.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("bad radial potential {self:?}")))
        }
    }

    /// Radius beyond which the potential vanishes (or drops below 1e−14).
    pub fn range(&self) -> T {
        match *self {
            RadialPotential::HardSphere { radius } => radius,
            RadialPotential::SquareWell { radius, .. } => radius,
            RadialPotential::Gaussian { amplitude, width } => {
                let a = amplitude.abs();
                if a <= T::lit(NEGLIGIBLE) {
                    T::zero()
                } else {
                    width * (a / T::lit(NEGLIGIBLE)).ln().sqrt()
                }
            }
            RadialPotential::SoftShell { outer, .. } => outer,
        }
    }

    /// `v(r)`; infinite inside a hard core.
    pub fn value(&self, r: T) -> T {
        match *self {
            RadialPotential::HardSphere { radius } => {
                if r <= radius {
                    T::infinity()
                } else {
                    T::zero()
                }
            }
            RadialPotential::SquareWell { depth, radius } => {
                if r < radius {
                    -depth
                } else {
                    T::zero()
                }
            }
            RadialPotential::Gaussian { amplitude, width } => {
                let t = r / width;
                amplitude * (-t * t).exp()
            }
            RadialPotential::SoftShell { inner, outer, strength } => {
                if r < inner || r > outer {
                    return T::zero();
                }
                let s = (T::PI() * (r - inner) / (outer - inner)).sin();
                strength * shell_constant(inner, outer) * s * s
            }
        }
    }

    /// `∫ v d³x` by composite Simpson quadrature; infinite for hard spheres
    /// of positive radius.
    pub fn volume_integral(&self) -> T {
        if let RadialPotential::HardSphere { radius } = *self {
            return if radius > T::zero() { T::infinity() } else { T::zero() };
        }
        let mut total = T::zero();
        for (a, b) in self.segments(T::zero()) {
            total += simpson(|r| r * r * self.value(r), a, b, 1 << 14);
        }
        T::lit(4.0) * T::PI() * total
    }

    /// Interval pieces on which the potential is smooth.
    fn segments(&self, start: T) -> Vec<(T, T)> {
        let mut cuts = vec![start];
        match *self {
            RadialPotential::HardSphere { .. } => {}
            RadialPotential::SquareWell { radius, .. } => cuts.push(radius),
            RadialPotential::Gaussian { .. } => cuts.push(self.range()),
            RadialPotential::SoftShell { inner, outer, .. } => {
                cuts.push(inner);
                cuts.push(outer);
            }
        }
        let mut out = Vec::new();
        for w in cuts.windows(2) {
            if w[1] > w[0] {
                out.push((w[0], w[1]));
            }
        }
        out
    }
}

/// Normalization of the unit soft shell: `1 / ∫ r² sin²(π t(r)) dr`.
fn shell_constant<T: Real>(inner: T, outer: T) -> T {
    let d = outer - inner;
    let pi2 = T::PI() * T::PI();
    let half = T::lit(0.5);
    let moment = d * (half * (inner * inner + inner * d + d * d / T::lit(3.0)) - d * d / (T::lit(4.0) * pi2));
    T::one() / moment
}

fn simpson<T: Real>(f: impl Fn(T) -> T, a: T, b: T, n: usize) -> T {
    let n = n + n % 2;
    let h = (b - a) / T::from_usize(n);
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { T::lit(4.0) } else { T::lit(2.0) };
        s += w * f(a + h * T::from_usize(i));
    }
    s * h / T::lit(3.0)
}

/// `v_a(x) = a⁻² w(x/a)`.
pub fn scale_potential<T: Real>(w: &RadialPotential<T>, a: T) -> Result<RadialPotential<T>> {
    if !(a > T::zero() && a.is_finite()) {
        return Err(Error::Invalid(format!("scale must be positive, got {a}")));
    }
    let a2 = a * a;
    Ok(match *w {
        RadialPotential::HardSphere { radius } => RadialPotential::HardSphere { radius: radius * a },
        RadialPotential::SquareWell { depth, radius } => RadialPotential::SquareWell {
            depth: depth / a2,
            radius: radius * a,
        },
        RadialPotential::Gaussian { amplitude, width } => RadialPotential::Gaussian {
            amplitude: amplitude / a2,
            width: width * a,
        },
        RadialPotential::SoftShell { inner, outer, strength } => RadialPotential::SoftShell {
            inner: inner * a,
            outer: outer * a,
            // the profile constant is tied to the support
            strength: strength / a2 * shell_constant(inner, outer) / shell_constant(inner * a, outer * a),
        },
    })
}

/// One RK4 sweep of `u'' = ½ v u` across `[a, b]` in `steps` steps.
fn rk4<T: Real>(v: &RadialPotential<T>, a: T, b: T, steps: usize, mut u: T, mut du: T) -> (T, T) {
    let h = (b - a) / T::from_usize(steps);
    let half = T::lit(0.5);
    // keep evaluations inside the piece so jumps at its ends are not sampled
    let inset = (b - a) * T::lit(1e-13);
    let f = |r: T, u: T| half * v.value(r.max(a + inset).min(b - inset)) * u;
    for i in 0..steps {
        let r = a + h * T::from_usize(i);
        let k1u = du;
        let k1v = f(r, u);
        let k2u = du + half * h * k1v;
        let k2v = f(r + half * h, u + half * h * k1u);
        let k3u = du + half * h * k2v;
        let k3v = f(r + half * h, u + half * h * k2u);
        let k4u = du + h * k3v;
        let k4v = f(r + h, u + h * k3u);
        u += h / T::lit(6.0) * (k1u + T::lit(2.0) * k2u + T::lit(2.0) * k3u + k4u);
        du += h / T::lit(6.0) * (k1v + T::lit(2.0) * k2v + T::lit(2.0) * k3v + k4v);
    }
    (u, du)
}

fn integrate_once<T: Real>(v: &RadialPotential<T>, start: T, steps: usize) -> Result<T> {
    let (mut u, mut du) = (T::zero(), T::one());
    let mut end = start;
    for (a, b) in v.segments(start) {
        (u, du) = rk4(v, a, b, steps, u, du);
        end = b;
    }
    if !(u.is_finite() && du.is_finite()) || du.abs() <= T::lit(1e-9) * (T::one() + u.abs()) {
        return Err(Error::NonFiniteScatteringLength);
    }
    Ok(end - u / du)
}

/// Scattering length of a radial potential.
///
/// The step count per smooth piece is doubled until two successive results
/// agree to 1e−11 (relative to `max(1, |a|)`).
pub fn scattering_length<T: Real>(v: &RadialPotential<T>) -> Result<T> {
    v.validate()?;
    let start = match *v {
        RadialPotential::HardSphere { radius } => return Ok(radius),
        _ => T::zero(),
    };
    let tol = T::lit(1e-11).max(T::lit(100.0 * T::EPS));
    let mut steps = 64;
    let mut prev = integrate_once(v, start, steps)?;
    while steps < (1 << 20) {
        steps *= 2;
        let next = integrate_once(v, start, steps)?;
        if (next - prev).abs() <= tol * T::one().max(next.abs()) {
            return Ok(next);
        }
        prev = next;
    }
    Ok(prev)
}

/// Closed-form scattering length of [`RadialPotential::SquareWell`].
pub fn square_well_closed_form<T: Real>(depth: T, radius: T) -> T {
    let k2 = depth / T::lit(2.0);
    if k2 == T::zero() {
        return T::zero();
    }
    let x = k2.abs().sqrt() * radius;
    if k2 > T::zero() {
        radius * (T::one() - x.tan() / x)
    } else {
        radius * (T::one() - x.tanh() / x)
    }
}

/// Gaussian of the given width rescaled in amplitude to unit scattering
/// length.
pub fn unit_gaussian<T: Real>(width: T) -> Result<RadialPotential<T>> {
    let at = |amp: T| {
        scattering_length(&RadialPotential::Gaussian {
            amplitude: amp,
            width,
        })
    };
    let (mut lo, mut hi) = (T::zero(), T::one());
    let mut grow = 0;
    while at(hi)? < T::one() {
        lo = hi;
        hi = hi * T::lit(4.0);
        grow += 1;
        if grow > 40 {
            return Err(Error::Invalid(format!("no Gaussian of width {width} reaches unit scattering length")));
        }
    }
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if at(mid)? < T::one() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::lit(4.0 * T::EPS) * hi {
            break;
        }
    }
    Ok(RadialPotential::Gaussian {
        amplitude: (lo + hi) / T::lit(2.0),
        width,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BornRow<T: Real> {
    pub a: T,
    pub s: T,
    pub rel_deviation: T,
}

/// Scattering lengths `s(a)` of `2aU` for a unit soft shell `U`.
pub fn born_check<T: Real>(u: &RadialPotential<T>, a_list: &[T]) -> Result<Vec<BornRow<T>>> {
    let RadialPotential::SoftShell { inner, outer, strength } = *u else {
        return Err(Error::Invalid("the Born check needs a soft-shell potential".into()));
    };
    let integral = u.volume_integral();
    let four_pi = T::lit(4.0) * T::PI();
    if (integral - four_pi).abs() > T::lit(1e-10) * four_pi {
        return Err(Error::Invalid(format!("∫U = {integral}, expected 4π")));
    }
    let mut rows = Vec::with_capacity(a_list.len());
    for &a in a_list {
        if a < T::zero() {
            return Err(Error::Invalid(format!("negative a = {a}")));
        }
        let v = RadialPotential::SoftShell {
            inner,
            outer,
            strength: strength * T::lit(2.0) * a,
        };
        let s = scattering_length(&v)?;
        let rel_deviation = if a > T::zero() { (s - a).abs() / a } else { s.abs() };
        rows.push(BornRow { a, s, rel_deviation });
    }
    Ok(rows)
}

/// Ratios of consecutive relative deviations in a Born table.
pub fn deviation_ratios<T: Real>(rows: &[BornRow<T>]) -> Vec<T> {
    rows.windows(2)
        .filter(|w| w[0].rel_deviation > T::zero())
        .map(|w| w[1].rel_deviation / w[0].rel_deviation)
        .collect()
}
