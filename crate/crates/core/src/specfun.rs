//! Spherical Bessel and Hankel functions, their derivatives, and complex
//! spherical harmonics.
//!
//! Conventions used throughout the crate:
//!
//! - Hankel functions are of the second kind, `h_u(x) = j_u(x) - i y_u(x)`,
//!   paired with the `e^{+i omega t}` time convention of the acoustics module.
//! - Spherical harmonics are orthonormal complex harmonics with the
//!   Condon-Shortley phase, so `Y_{u,-v} = (-1)^v conj(Y_{u,v})` and the
//!   analysis projections conjugate the harmonic.

use crate::{cast, Complex, Error, Float, Result};
use serde::{Deserialize, Serialize};

/// Largest supported Bessel/Hankel order.
pub const MAX_ORDER: usize = 64;

/// Spherical-harmonic mode `(u, v)` with `|v| <= u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeIndex {
    order: usize,
    degree: i64,
}

impl ModeIndex {
    pub fn new(order: usize, degree: i64) -> Result<Self> {
        if degree.unsigned_abs() as usize > order {
            return Err(Error::InvalidConfig(format!(
                "mode degree {degree} exceeds order {order}"
            )));
        }
        Ok(Self { order, degree })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    /// Position of this mode in the dense `(U+1)^2` layout.
    pub fn flat_index(&self) -> usize {
        self.order * self.order + (self.order as i64 + self.degree) as usize
    }

    /// All modes with order `u <= max_order`, in flat-index order.
    pub fn all_up_to(max_order: usize) -> impl Iterator<Item = ModeIndex> {
        (0..=max_order).flat_map(|u| {
            (-(u as i64)..=u as i64).map(move |v| ModeIndex {
                order: u,
                degree: v,
            })
        })
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::UnsupportedOrder {
            order,
            max: MAX_ORDER,
        });
    }
    Ok(())
}

fn check_argument<T: Float>(what: &'static str, x: T) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::NotFinite {
            what,
            name: "x",
            value: x.to_f64().unwrap_or(f64::NAN),
        });
    }
    if x < T::zero() {
        return Err(Error::NonPositive {
            what,
            name: "x",
            value: x.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// `j_u(x)` for all orders `0..=max_order`.
///
/// Uses the ascending series for small arguments, upward recurrence where it
/// is stable (`x > max_order`), and Miller's downward recurrence otherwise,
/// normalized against whichever of `j_0`, `j_1` is farther from a zero.
pub fn sph_bessel_j_all<T: Float>(max_order: usize, x: T) -> Result<Vec<T>> {
    check_order(max_order)?;
    check_argument("spherical Bessel j", x)?;

    let n = max_order + 1;
    let mut out = vec![T::zero(); n];

    if x == T::zero() {
        out[0] = T::one();
        return Ok(out);
    }
    if x < cast(0.5) {
        for (u, slot) in out.iter_mut().enumerate() {
            *slot = series_j(u, x);
        }
        return Ok(out);
    }

    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    out[0] = j0;
    if max_order >= 1 {
        out[1] = j1;
    }
    if max_order < 2 {
        return Ok(out);
    }

    if x > cast(max_order as f64) {
        // upward recurrence, stable for x above the order
        for u in 2..n {
            out[u] = cast::<T>(2.0 * u as f64 - 1.0) / x * out[u - 1] - out[u - 2];
        }
        return Ok(out);
    }

    // Miller's downward recurrence with on-the-fly rescaling
    let start = max_order + x.to_f64().unwrap_or(0.0).ceil() as usize + 30;
    let big = T::max_value().sqrt();
    let mut above = T::zero(); // j-tilde at k+1
    let mut here = T::min_positive_value() / T::epsilon(); // arbitrary tiny seed
    for k in (0..start).rev() {
        let below = cast::<T>(2.0 * k as f64 + 3.0) / x * here - above;
        above = here;
        here = below;
        if here.abs() > big {
            here = here / big;
            above = above / big;
            for slot in out.iter_mut() {
                *slot = *slot / big;
            }
        }
        if k < n {
            out[k] = here;
        }
    }
    // normalize against the closed form least affected by a nearby zero
    let scale = if j0.abs() >= j1.abs() {
        j0 / out[0]
    } else {
        j1 / out[1]
    };
    for slot in out.iter_mut() {
        *slot = *slot * scale;
    }
    Ok(out)
}

/// Ascending series for `j_u(x)`, accurate for small `x`.
fn series_j<T: Float>(order: usize, x: T) -> T {
    // x^u / (2u+1)!! * sum_m (-x^2/2)^m / (m! * prod_{i=1..m} (2u+2i+1))
    let mut lead = T::one();
    for i in 0..order {
        lead = lead * x / cast(2.0 * i as f64 + 3.0);
    }
    // lead = x^u / (2u+1)!! built as prod x/(2i+3) starting from j_0 scale
    let half_x2 = x * x * cast::<T>(0.5);
    let mut term = T::one();
    let mut sum = T::one();
    for m in 1..40 {
        term = term * (-half_x2) / (cast::<T>(m as f64) * cast::<T>(2.0 * (order + m) as f64 + 1.0));
        sum = sum + term;
        if term.abs() < T::epsilon() * sum.abs() {
            break;
        }
    }
    lead * sum
}

/// `y_u(x)` for all orders `0..=max_order` (upward recurrence, stable).
pub fn sph_bessel_y_all<T: Float>(max_order: usize, x: T) -> Result<Vec<T>> {
    check_order(max_order)?;
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::NonPositive {
            what: "spherical Bessel y",
            name: "x",
            value: x.to_f64().unwrap_or(f64::NAN),
        });
    }
    let n = max_order + 1;
    let mut out = vec![T::zero(); n];
    out[0] = -x.cos() / x;
    if max_order >= 1 {
        out[1] = -x.cos() / (x * x) - x.sin() / x;
    }
    for u in 2..n {
        out[u] = cast::<T>(2.0 * u as f64 - 1.0) / x * out[u - 1] - out[u - 2];
    }
    if !out[max_order].is_finite() {
        return Err(Error::NotFinite {
            what: "spherical Bessel y overflowed",
            name: "x",
            value: x.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(out)
}

/// Spherical Bessel function of the first kind, `j_u(x)`.
pub fn sph_bessel_j<T: Float>(order: usize, x: T) -> Result<T> {
    Ok(sph_bessel_j_all(order, x)?[order])
}

/// Spherical Bessel function of the second kind, `y_u(x)`.
pub fn sph_bessel_y<T: Float>(order: usize, x: T) -> Result<T> {
    Ok(sph_bessel_y_all(order, x)?[order])
}

/// Derivative `j_u'(x)` via `j_u' = j_{u-1} - (u+1)/x j_u` (and `j_0' = -j_1`).
pub fn sph_bessel_j_prime<T: Float>(order: usize, x: T) -> Result<T> {
    check_order(order)?;
    check_argument("spherical Bessel j'", x)?;
    if x == T::zero() {
        // series limits: only u = 1 has a nonzero derivative at the origin
        return Ok(if order == 1 {
            cast::<T>(1.0 / 3.0)
        } else {
            T::zero()
        });
    }
    let j = sph_bessel_j_all(order + 1, x)?;
    Ok(derivative_from_recurrence(order, x, &j))
}

/// Derivative `y_u'(x)` by the same recurrence identity.
pub fn sph_bessel_y_prime<T: Float>(order: usize, x: T) -> Result<T> {
    let y = sph_bessel_y_all(order + 1, x)?;
    Ok(derivative_from_recurrence(order, x, &y))
}

fn derivative_from_recurrence<T: Float>(order: usize, x: T, f: &[T]) -> T {
    if order == 0 {
        -f[1]
    } else {
        f[order - 1] - cast::<T>(order as f64 + 1.0) / x * f[order]
    }
}

/// Spherical Hankel function of the second kind, `h_u(x) = j_u(x) - i y_u(x)`.
pub fn sph_hankel_h2<T: Float>(order: usize, x: T) -> Result<Complex<T>> {
    let j = sph_bessel_j(order, require_positive(x)?)?;
    let y = sph_bessel_y(order, x)?;
    Ok(Complex::new(j, -y))
}

/// Derivative of the second-kind spherical Hankel function.
pub fn sph_hankel_h2_prime<T: Float>(order: usize, x: T) -> Result<Complex<T>> {
    let jp = sph_bessel_j_prime(order, require_positive(x)?)?;
    let yp = sph_bessel_y_prime(order, x)?;
    Ok(Complex::new(jp, -yp))
}

fn require_positive<T: Float>(x: T) -> Result<T> {
    if x > T::zero() {
        Ok(x)
    } else {
        Err(Error::NonPositive {
            what: "spherical Hankel h2",
            name: "x",
            value: x.to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// Orthonormal complex spherical harmonic `Y_{u,v}(theta, phi)`.
pub fn sph_harmonic<T: Float>(mode: ModeIndex, theta: T, phi: T) -> Complex<T> {
    let m = mode.degree.unsigned_abs() as usize;
    let table = normalized_legendre_table(mode.order, theta.cos(), theta.sin());
    let p = table[tri_index(mode.order, m)];
    let angle = cast::<T>(mode.degree as f64) * phi;
    let mut value = Complex::from_polar(p, angle);
    if mode.degree < 0 && m % 2 == 1 {
        value = -value;
    }
    value
}

/// All `Y_{u,v}` with `u <= max_order` at one direction, in flat-index order.
pub fn sph_harmonics_up_to<T: Float>(max_order: usize, theta: T, phi: T) -> Vec<Complex<T>> {
    let table = normalized_legendre_table(max_order, theta.cos(), theta.sin());
    let mut out = Vec::with_capacity((max_order + 1) * (max_order + 1));
    for u in 0..=max_order {
        for v in -(u as i64)..=u as i64 {
            let m = v.unsigned_abs() as usize;
            let p = table[tri_index(u, m)];
            let mut value = Complex::from_polar(p, cast::<T>(v as f64) * phi);
            if v < 0 && m % 2 == 1 {
                value = -value;
            }
            out.push(value);
        }
    }
    out
}

fn tri_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Fully normalized associated Legendre values `Pbar_l^m(cos theta)` for
/// `0 <= m <= l <= max_order`, Condon-Shortley phase included, laid out by
/// [`tri_index`]. `Y_{l,m} = Pbar_l^m e^{i m phi}` for `m >= 0`.
fn normalized_legendre_table<T: Float>(max_order: usize, ct: T, st: T) -> Vec<T> {
    let n = tri_index(max_order, max_order) + 1;
    let mut p = vec![T::zero(); n];
    p[0] = (cast::<T>(4.0) * T::PI()).sqrt().recip();
    for m in 1..=max_order {
        // diagonal: Pbar_m^m, the minus sign carries the Condon-Shortley phase
        let prev = p[tri_index(m - 1, m - 1)];
        p[tri_index(m, m)] =
            -(cast::<T>(2.0 * m as f64 + 1.0) / cast::<T>(2.0 * m as f64)).sqrt() * st * prev;
    }
    for m in 0..max_order {
        let diag = p[tri_index(m, m)];
        p[tri_index(m + 1, m)] = (cast::<T>(2.0 * m as f64 + 3.0)).sqrt() * ct * diag;
    }
    for m in 0..=max_order {
        for l in (m + 2)..=max_order {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            p[tri_index(l, m)] = cast::<T>(a)
                * (ct * p[tri_index(l - 1, m)] - cast::<T>(b) * p[tri_index(l - 2, m)]);
        }
    }
    p
}

/// Ordinary Legendre polynomials `P_0..P_max` at `x` (for addition-theorem sums).
pub(crate) fn legendre_p_all<T: Float>(max_order: usize, x: T) -> Vec<T> {
    let mut p = vec![T::zero(); max_order + 1];
    p[0] = T::one();
    if max_order >= 1 {
        p[1] = x;
    }
    for l in 1..max_order {
        let lf = cast::<T>(l as f64);
        p[l + 1] = ((cast::<T>(2.0 * l as f64 + 1.0)) * x * p[l] - lf * p[l - 1])
            / cast::<T>(l as f64 + 1.0);
    }
    p
}
