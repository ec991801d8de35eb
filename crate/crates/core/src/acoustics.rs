//! Ground-truth simulation: free-field point sources, their interior
//! expansion coefficients, and rigid-sphere scattering.
//!
//! Time convention is `e^{+i omega t}`: outgoing waves carry `e^{-i k r}` and
//! radiate through second-kind Hankel functions. The free-field Green's
//! function is `G = e^{-i k d} / (4 pi d)`.

use crate::geometry::{cart_to_sph, SphericalGrid};
use crate::shd::CoeffSet;
use crate::specfun::{
    legendre_p_all, sph_bessel_j_prime, sph_harmonics_up_to, sph_hankel_h2, sph_hankel_h2_prime,
    ModeIndex,
};
use crate::{cast, Complex, Error, Float, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Propagation medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Medium<T: Float> {
    /// Speed of sound in m/s.
    pub speed_of_sound: T,
}

impl<T: Float> Default for Medium<T> {
    fn default() -> Self {
        Self {
            speed_of_sound: cast(343.0),
        }
    }
}

impl<T: Float> Medium<T> {
    /// Wavenumber `k = 2 pi f / s`.
    pub fn wavenumber(&self, frequency: T) -> T {
        cast::<T>(2.0) * T::PI() * frequency / self.speed_of_sound
    }
}

/// Monochromatic point source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSource<T: Float> {
    pub position: [T; 3],
    #[serde(default = "unit_amplitude")]
    pub amplitude: Complex<T>,
}

fn unit_amplitude<T: Float>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

impl<T: Float> PointSource<T> {
    pub fn new(position: [T; 3]) -> Self {
        Self {
            position,
            amplitude: unit_amplitude(),
        }
    }
}

/// Complex pressure samples on one grid at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot<T: Float> {
    pub frequency: T,
    pub grid: SphericalGrid<T>,
    pub pressures: Vec<Complex<T>>,
}

impl<T: Float> FieldSnapshot<T> {
    pub fn new(frequency: T, grid: SphericalGrid<T>, pressures: Vec<Complex<T>>) -> Result<Self> {
        if pressures.len() != grid.len() {
            return Err(Error::GridMismatch {
                details: format!(
                    "{} pressures for a {}-point grid",
                    pressures.len(),
                    grid.len()
                ),
            });
        }
        if !(frequency > T::zero()) {
            return Err(Error::NonPositive {
                what: "field snapshot",
                name: "frequency",
                value: frequency.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self {
            frequency,
            grid,
            pressures,
        })
    }

    /// Mean squared pressure magnitude over the snapshot.
    pub fn mean_square(&self) -> T {
        let n = cast::<T>(self.pressures.len() as f64);
        self.pressures.iter().map(|p| p.norm_sqr()).sum::<T>() / n
    }

    /// Write `theta,phi,re,im` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "theta,phi,re,im")?;
        for (&(theta, phi), p) in self.grid.angles().iter().zip(&self.pressures) {
            writeln!(out, "{theta},{phi},{},{}", p.re, p.im)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<serde_json::Value>
    where
        T: serde::Serialize,
    {
        Ok(serde_json::to_value(self)?)
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self>
    where
        T: serde::de::DeserializeOwned,
    {
        let snap: Self = serde_json::from_value(value.clone())?;
        FieldSnapshot::new(snap.frequency, snap.grid, snap.pressures)
    }
}

/// Free-field Green's function `G = A e^{-i k d} / (4 pi d)`.
pub fn green_free_field<T: Float>(
    frequency: T,
    medium: &Medium<T>,
    source: &PointSource<T>,
    receiver: [T; 3],
) -> Result<Complex<T>> {
    let k = medium.wavenumber(frequency);
    let mut d2 = T::zero();
    for i in 0..3 {
        let diff = source.position[i] - receiver[i];
        d2 += diff * diff;
    }
    let d = d2.sqrt();
    if d == T::zero() {
        return Err(Error::CoincidentPoints);
    }
    let four_pi_d = cast::<T>(4.0) * T::PI() * d;
    Ok(source.amplitude * Complex::from_polar(four_pi_d.recip(), -k * d))
}

/// Free-field snapshot of a point source on a grid.
pub fn free_field_snapshot<T: Float>(
    frequency: T,
    medium: &Medium<T>,
    source: &PointSource<T>,
    grid: &SphericalGrid<T>,
) -> Result<FieldSnapshot<T>> {
    let pressures = grid
        .cartesian()
        .iter()
        .map(|&rcv| green_free_field(frequency, medium, source, rcv))
        .collect::<Result<Vec<_>>>()?;
    FieldSnapshot::new(frequency, grid.clone(), pressures)
}

/// Interior expansion coefficients of a point source:
/// `K_uv = -i k A h_u(k r_s) conj(Y_uv(theta_s, phi_s))`.
///
/// Synthesizing with these reproduces [`green_free_field`] everywhere inside
/// the source radius.
pub fn point_source_coeffs<T: Float>(
    frequency: T,
    medium: &Medium<T>,
    source: &PointSource<T>,
    max_order: usize,
) -> Result<CoeffSet<T>> {
    let k = medium.wavenumber(frequency);
    let (rs, theta_s, phi_s) = cart_to_sph(source.position);
    if !(rs > T::zero()) {
        return Err(Error::NonPositive {
            what: "point source expansion",
            name: "|source position|",
            value: rs.to_f64().unwrap_or(f64::NAN),
        });
    }
    let harmonics = sph_harmonics_up_to(max_order, theta_s, phi_s);
    let mut coeffs = CoeffSet::new_field(max_order, frequency);
    let minus_ik = Complex::new(T::zero(), -k);
    for mode in ModeIndex::all_up_to(max_order) {
        let h = sph_hankel_h2(mode.order(), k * rs)?;
        let value = minus_ik * h * harmonics[mode.flat_index()].conj() * source.amplitude;
        coeffs.set(mode, value);
    }
    Ok(coeffs)
}

/// Total and scattered pressure at `receiver` for a point source outside a
/// rigid sphere of radius `a` centered at the origin.
///
/// The scattered series enforces zero radial velocity at `r = a`
/// (`B_u = -j_u'(ka) / h_u'(ka)` per incident order) and is truncated once a
/// term falls below `1e-12` of the running sum, capped at order 60.
pub fn rigid_sphere_field<T: Float>(
    frequency: T,
    medium: &Medium<T>,
    sphere_radius: T,
    source: &PointSource<T>,
    receiver: [T; 3],
) -> Result<(Complex<T>, Complex<T>)> {
    let k = medium.wavenumber(frequency);
    let (r, _, _) = cart_to_sph(receiver);
    let (rs, _, _) = cart_to_sph(source.position);
    let a = sphere_radius;
    if r < a * (T::one() - cast::<T>(1e-12)) {
        return Err(Error::ReceiverInsideSphere {
            radius: r.to_f64().unwrap_or(f64::NAN),
            sphere_radius: a.to_f64().unwrap_or(f64::NAN),
        });
    }
    if rs <= a {
        return Err(Error::InvalidConfig(
            "source must lie outside the rigid sphere".into(),
        ));
    }
    let incident = green_free_field(frequency, medium, source, receiver)?;

    // addition theorem collapses the degree sum to Legendre polynomials of
    // the angle between receiver and source directions
    let mut dot = T::zero();
    for i in 0..3 {
        dot += receiver[i] * source.position[i];
    }
    let cos_gamma = (dot / (r * rs)).min(T::one()).max(-T::one());

    const CAP: usize = 60;
    let legendre = legendre_p_all(CAP, cos_gamma);
    let minus_ik = Complex::new(T::zero(), -k);
    let inv_four_pi = (cast::<T>(4.0) * T::PI()).recip();
    let mut scattered = Complex::new(T::zero(), T::zero());
    let tol = cast::<T>(1e-12);
    for u in 0..=CAP {
        let reflect = -Complex::from(sph_bessel_j_prime(u, k * a)?) / sph_hankel_h2_prime(u, k * a)?;
        let term = minus_ik
            * cast::<T>(2.0 * u as f64 + 1.0)
            * inv_four_pi
            * sph_hankel_h2(u, k * rs)?
            * reflect
            * sph_hankel_h2(u, k * r)?
            * legendre[u]
            * source.amplitude;
        scattered += term;
        if u > 2 && term.norm() < tol * scattered.norm().max(T::min_positive_value()) {
            break;
        }
    }
    Ok((incident + scattered, scattered))
}

/// Snapshot of the total field on a rigid-sphere surface grid.
pub fn rigid_sphere_snapshot<T: Float>(
    frequency: T,
    medium: &Medium<T>,
    source: &PointSource<T>,
    grid: &SphericalGrid<T>,
) -> Result<FieldSnapshot<T>> {
    let a = grid.radius();
    let pressures = grid
        .cartesian()
        .iter()
        .map(|&rcv| rigid_sphere_field(frequency, medium, a, source, rcv).map(|(total, _)| total))
        .collect::<Result<Vec<_>>>()?;
    FieldSnapshot::new(frequency, grid.clone(), pressures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_grid, GridKind};
    use crate::shd::synthesize_field;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const SCENARIO_SOURCE: [f64; 3] = [0.5, 0.5, 0.75];

    fn medium() -> Medium<f64> {
        Medium::default()
    }

    #[test]
    fn static_limit_of_green() {
        let src = PointSource::new([1.0, 0.0, 0.0]);
        let g = green_free_field(1e-9, &medium(), &src, [0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(g.re, 1.0 / (4.0 * std::f64::consts::PI), max_relative = 1e-6);
    }

    #[test]
    fn inverse_distance_decay() {
        let src = PointSource::new([0.0, 0.0, 0.0]);
        let g1 = green_free_field(500.0, &medium(), &src, [1.0, 0.0, 0.0]).unwrap();
        let g2 = green_free_field(500.0, &medium(), &src, [2.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(g2.norm() / g1.norm(), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn green_matches_extended_precision_oracle() {
        // f = 3430 Hz, source at the first-scenario position, receiver on +x
        let src = PointSource::new(SCENARIO_SOURCE);
        let g = green_free_field(3430.0, &medium(), &src, [0.05, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(g.re, 0.070440964458904416, epsilon = 1e-12);
        assert_abs_diff_eq!(g.im, -0.035735971606175828, epsilon = 1e-12);
    }

    #[test]
    fn green_reciprocity() {
        let m = medium();
        let a = [0.31, -0.2, 0.7];
        let b = [-0.04, 0.9, 0.13];
        let g_ab = green_free_field(1234.0, &m, &PointSource::new(a), b).unwrap();
        let g_ba = green_free_field(1234.0, &m, &PointSource::new(b), a).unwrap();
        assert_eq!(g_ab, g_ba);
    }

    #[test]
    fn coincident_points_rejected() {
        let src = PointSource::new([0.1, 0.2, 0.3]);
        assert!(green_free_field(100.0, &medium(), &src, [0.1, 0.2, 0.3]).is_err());
    }

    #[test]
    fn axial_source_has_axisymmetric_coefficients() {
        let src = PointSource::new([0.0, 0.0, 0.8]);
        let coeffs = point_source_coeffs(2000.0, &medium(), &src, 6).unwrap();
        for mode in ModeIndex::all_up_to(6) {
            let value = coeffs.get(mode).unwrap();
            if mode.degree() != 0 {
                assert!(
                    value.norm() < 1e-14,
                    "K_{{{},{}}} = {value} should vanish",
                    mode.order(),
                    mode.degree()
                );
            } else {
                assert!(value.norm() > 0.0);
            }
        }
    }

    #[test]
    fn expansion_reproduces_green_inside() {
        // truncation-convergence oracle for the interior expansion
        let f = 3430.0;
        let m = medium();
        let src = PointSource::new(SCENARIO_SOURCE);
        let grid = make_grid(GridKind::Fibonacci, 64, 0.04).unwrap();
        let coeffs = point_source_coeffs(f, &m, &src, 10).unwrap();
        let synth = synthesize_field(&coeffs, &grid, &m).unwrap();
        let truth = free_field_snapshot(f, &m, &src, &grid).unwrap();
        let mut err = 0.0;
        let mut sig = 0.0;
        for (a, b) in synth.pressures.iter().zip(&truth.pressures) {
            err += (a - b).norm_sqr();
            sig += b.norm_sqr();
        }
        assert!(
            (err / sig).sqrt() < 0.01,
            "relative RMS {} should be below 1%",
            (err / sig).sqrt()
        );
    }

    #[test]
    fn k00_regression_constant() {
        // frozen once from the expansion itself after it passed the
        // green-reproduction oracle above
        let coeffs = point_source_coeffs(
            3430.0,
            &medium(),
            &PointSource::new(SCENARIO_SOURCE),
            0,
        )
        .unwrap();
        let k00 = coeffs.get(ModeIndex::new(0, 0).unwrap()).unwrap();
        assert_abs_diff_eq!(k00.re, -0.097160839978071696, epsilon = 1e-12);
        assert_abs_diff_eq!(k00.im, -0.255844122431425598, epsilon = 1e-12);
    }

    #[test]
    fn rigid_boundary_condition_holds() {
        // one-sided finite-difference radial derivative vanishes at r = a
        let f = 3430.0;
        let m = medium();
        let a = 0.05;
        let src = PointSource::new(SCENARIO_SOURCE);
        let k = m.wavenumber(f);
        let h = 1e-5;
        let s3 = 1.0 / 3.0f64.sqrt();
        for dir in [[1.0, 0.0, 0.0], [0.0, 0.6, 0.8], [-s3, s3, s3]] {
            let at = |r: f64| {
                let rcv = [dir[0] * r, dir[1] * r, dir[2] * r];
                rigid_sphere_field(f, &m, a, &src, rcv).unwrap().0
            };
            let p0 = at(a);
            let deriv = (at(a + 3.0 * h) * 2.0 - at(a + 2.0 * h) * 9.0 + at(a + h) * 18.0
                - p0 * 11.0)
                / (6.0 * h);
            assert!(
                deriv.norm() / (k * p0.norm()) < 1e-6,
                "radial derivative {} not small vs k|p| {}",
                deriv.norm(),
                k * p0.norm()
            );
        }
    }

    #[test]
    fn vanishing_scatterer_limit() {
        let f = 3430.0;
        let m = medium();
        let src = PointSource::new(SCENARIO_SOURCE);
        let rcv = [0.03, -0.02, 0.025];
        let (total, scattered) = rigid_sphere_field(f, &m, 1e-4, &src, rcv).unwrap();
        let free = green_free_field(f, &m, &src, rcv).unwrap();
        assert!(scattered.norm() / free.norm() < 1e-6);
        assert!((total - free).norm() / free.norm() < 1e-6);
    }

    #[test]
    fn scattered_field_is_significant_on_the_array_sphere() {
        let f = 3430.0;
        let m = medium();
        let src = PointSource::new(SCENARIO_SOURCE);
        let grid = make_grid(GridKind::Fibonacci, 36, 0.05).unwrap();
        let mut max_ratio = 0.0f64;
        for &rcv in grid.cartesian() {
            let (_, scattered) = rigid_sphere_field(f, &m, 0.05, &src, rcv).unwrap();
            let free = green_free_field(f, &m, &src, rcv).unwrap();
            max_ratio = max_ratio.max(scattered.norm() / free.norm());
        }
        assert!(
            max_ratio > 0.1 && max_ratio < 10.0,
            "scattered/incident peak ratio {max_ratio} out of the expected range"
        );
    }

    #[test]
    fn receiver_inside_sphere_rejected() {
        let src = PointSource::new(SCENARIO_SOURCE);
        assert!(matches!(
            rigid_sphere_field(1000.0, &medium(), 0.05, &src, [0.01, 0.0, 0.0]),
            Err(Error::ReceiverInsideSphere { .. })
        ));
    }

    #[test]
    fn helmholtz_residual_of_total_field() {
        // 7-point finite-difference Laplacian, independent of the special
        // functions that built the field
        let f = 2500.0;
        let m = medium();
        let src = PointSource::new(SCENARIO_SOURCE);
        let k = m.wavenumber(f);
        let h = 1e-4;
        for base in [[0.08, 0.01, -0.02], [0.0, -0.09, 0.04], [0.05, 0.05, 0.05]] {
            let p = |xyz: [f64; 3]| rigid_sphere_field(f, &m, 0.05, &src, xyz).unwrap().0;
            let center = p(base);
            let mut lap = center * -6.0;
            for axis in 0..3 {
                let mut plus = base;
                plus[axis] += h;
                let mut minus = base;
                minus[axis] -= h;
                lap += p(plus) + p(minus);
            }
            lap /= h * h;
            let residual = (lap + center * k * k).norm() / (k * k * center.norm());
            assert!(residual < 1e-3, "Helmholtz residual {residual}");
        }
    }

    #[test]
    fn snapshot_csv_has_one_row_per_point() {
        let m = medium();
        let grid = make_grid(GridKind::Fibonacci, 7, 0.05).unwrap();
        let snap = free_field_snapshot(1000.0, &m, &PointSource::new(SCENARIO_SOURCE), &grid)
            .unwrap();
        let mut buf = Vec::new();
        snap.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 8);
        assert!(text.starts_with("theta,phi,re,im"));
        let round = FieldSnapshot::<f64>::from_json(&snap.to_json().unwrap()).unwrap();
        assert_eq!(round, snap);
    }
}
