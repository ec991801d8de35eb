//! Spherical-harmonic analysis and synthesis.
//!
//! Pressure samples on a sphere project onto harmonics (conjugated,
//! quadrature-weighted) to give pressure coefficients `P_uv`; dividing by the
//! radial factor `j_u(k r)` recovers the radius-independent field
//! coefficients `K_uv`. Orders where `j_u(k r)` sits in a null are flagged by
//! [`detect_bessel_nulls`] and handled per [`NullPolicy`]; skipped modes stay
//! explicitly absent in the [`CoeffSet`] so later merges cannot confuse them
//! with measured zeros.

use crate::acoustics::{FieldSnapshot, Medium};
use crate::geometry::SphericalGrid;
use crate::specfun::{
    sph_bessel_j, sph_bessel_j_all, sph_bessel_j_prime, sph_harmonics_up_to, sph_hankel_h2,
    sph_hankel_h2_prime, ModeIndex,
};
use crate::{cast, Complex, Error, Float, Result};
use serde::{Deserialize, Serialize};

/// Default threshold on `|j_u(k r)|` below which an order counts as a null.
/// Division amplifies estimation error by `1/|j_u|`; 1e-2 caps the
/// amplification at 100x while only catching genuine near-nulls.
pub const NULL_THRESHOLD: f64 = 1e-2;

/// Whether a coefficient table holds pressure or field coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoeffKind<T: Float> {
    /// `P_uv(omega, r)`: tied to the sphere radius it was measured on.
    Pressure { radius: T },
    /// `K_uv(omega)`: radius-independent sound field coefficients.
    Field,
}

/// Dense spherical-harmonic coefficient table up to `max_order`, with
/// explicitly absent entries for skipped orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffSet<T: Float> {
    kind: CoeffKind<T>,
    max_order: usize,
    frequency: T,
    values: Vec<Option<Complex<T>>>,
}

impl<T: Float> CoeffSet<T> {
    pub fn new_pressure(max_order: usize, frequency: T, radius: T) -> Self {
        Self {
            kind: CoeffKind::Pressure { radius },
            max_order,
            frequency,
            values: vec![None; (max_order + 1) * (max_order + 1)],
        }
    }

    pub fn new_field(max_order: usize, frequency: T) -> Self {
        Self {
            kind: CoeffKind::Field,
            max_order,
            frequency,
            values: vec![None; (max_order + 1) * (max_order + 1)],
        }
    }

    pub fn kind(&self) -> CoeffKind<T> {
        self.kind
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn frequency(&self) -> T {
        self.frequency
    }

    /// Measurement radius for pressure coefficients, `None` for field kind.
    pub fn radius(&self) -> Option<T> {
        match self.kind {
            CoeffKind::Pressure { radius } => Some(radius),
            CoeffKind::Field => None,
        }
    }

    pub fn set(&mut self, mode: ModeIndex, value: Complex<T>) {
        self.values[mode.flat_index()] = Some(value);
    }

    pub fn clear(&mut self, mode: ModeIndex) {
        self.values[mode.flat_index()] = None;
    }

    /// `None` when the mode is absent (skipped order or outside the table).
    pub fn get(&self, mode: ModeIndex) -> Option<Complex<T>> {
        self.values.get(mode.flat_index()).copied().flatten()
    }

    /// Modes with a present value, in flat-index order.
    pub fn present(&self) -> impl Iterator<Item = (ModeIndex, Complex<T>)> + '_ {
        ModeIndex::all_up_to(self.max_order)
            .zip(&self.values)
            .filter_map(|(mode, value)| value.map(|v| (mode, v)))
    }

    /// Orders with at least one absent degree.
    pub fn absent_orders(&self) -> Vec<usize> {
        (0..=self.max_order)
            .filter(|&u| {
                (-(u as i64)..=u as i64).any(|v| {
                    self.get(ModeIndex::new(u, v).expect("degree within order")).is_none()
                })
            })
            .collect()
    }

    /// Largest present-coefficient magnitude.
    pub fn max_magnitude(&self) -> T {
        self.present()
            .map(|(_, v)| v.norm())
            .fold(T::zero(), T::max)
    }

    /// Serialize as `{kind, U, f, radius?, entries: [{u, v, re, im, present}]}`.
    pub fn to_json(&self) -> serde_json::Value
    where
        T: serde::Serialize,
    {
        let entries: Vec<_> = ModeIndex::all_up_to(self.max_order)
            .map(|mode| {
                let value = self.get(mode);
                serde_json::json!({
                    "u": mode.order(),
                    "v": mode.degree(),
                    "re": value.map(|c| c.re).unwrap_or_else(T::zero),
                    "im": value.map(|c| c.im).unwrap_or_else(T::zero),
                    "present": value.is_some(),
                })
            })
            .collect();
        let mut doc = serde_json::json!({
            "kind": match self.kind {
                CoeffKind::Pressure { .. } => "pressure",
                CoeffKind::Field => "field",
            },
            "U": self.max_order,
            "f": self.frequency,
            "entries": entries,
        });
        if let CoeffKind::Pressure { radius } = self.kind {
            doc["radius"] = serde_json::json!(radius);
        }
        doc
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self>
    where
        T: serde::de::DeserializeOwned,
    {
        #[derive(Deserialize)]
        struct Entry<T> {
            u: usize,
            v: i64,
            re: T,
            im: T,
            present: bool,
        }
        #[derive(Deserialize)]
        #[serde(rename_all = "camelCase")]
        struct Doc<T> {
            kind: String,
            #[serde(rename = "U")]
            max_order: usize,
            f: T,
            radius: Option<T>,
            entries: Vec<Entry<T>>,
        }
        let doc: Doc<T> = serde_json::from_value(value.clone())?;
        let mut set = match doc.kind.as_str() {
            "pressure" => {
                let radius = doc.radius.ok_or_else(|| {
                    Error::InvalidConfig("pressure coefficient table without radius".into())
                })?;
                CoeffSet::new_pressure(doc.max_order, doc.f, radius)
            }
            "field" => CoeffSet::new_field(doc.max_order, doc.f),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown coefficient kind {other:?}"
                )))
            }
        };
        for e in doc.entries {
            if e.present {
                set.set(ModeIndex::new(e.u, e.v)?, Complex::new(e.re, e.im));
            }
        }
        Ok(set)
    }
}

/// Harmonic order needed to represent a field sampled at radius `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderBudget(pub usize);

/// `U = ceil(2 pi f r / s)`, with a floor of 1 for vanishing arguments.
pub fn order_budget<T: Float>(frequency: T, radius: T, medium: &Medium<T>) -> OrderBudget {
    let x = medium.wavenumber(frequency) * radius;
    let u = x.ceil().to_usize().unwrap_or(0);
    OrderBudget(u.max(1))
}

/// Per-order null diagnosis at one `(f, r)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullReport<T: Float> {
    pub frequency: T,
    pub radius: T,
    pub threshold: T,
    pub entries: Vec<NullEntry<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullEntry<T: Float> {
    pub order: usize,
    pub bessel_magnitude: T,
    pub is_null: bool,
}

impl<T: Float> NullReport<T> {
    pub fn flagged_orders(&self) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|e| e.is_null)
            .map(|e| e.order)
            .collect()
    }

    pub fn any_null(&self) -> bool {
        self.entries.iter().any(|e| e.is_null)
    }
}

/// Flag every order `u <= max_order` with `|j_u(2 pi f r / s)| < threshold`.
pub fn detect_bessel_nulls<T: Float>(
    frequency: T,
    radius: T,
    medium: &Medium<T>,
    max_order: usize,
    threshold: T,
) -> Result<NullReport<T>> {
    if !(threshold > T::zero()) {
        return Err(Error::NonPositive {
            what: "null detection",
            name: "threshold",
            value: threshold.to_f64().unwrap_or(f64::NAN),
        });
    }
    let x = medium.wavenumber(frequency) * radius;
    let j = sph_bessel_j_all(max_order, x)?;
    let entries = j
        .iter()
        .enumerate()
        .map(|(order, &value)| NullEntry {
            order,
            bessel_magnitude: value.abs(),
            is_null: value.abs() < threshold,
        })
        .collect();
    Ok(NullReport {
        frequency,
        radius,
        threshold,
        entries,
    })
}

/// Estimate pressure coefficients by conjugated, weighted projection:
/// `P_uv = sum_q P_q conj(Y_uv(q)) gamma_q`.
pub fn estimate_pressure_coeffs<T: Float>(
    snapshot: &FieldSnapshot<T>,
    max_order: usize,
) -> Result<CoeffSet<T>> {
    let required = (max_order + 1) * (max_order + 1);
    if snapshot.grid.len() < required {
        return Err(Error::UnderResolvedGrid {
            points: snapshot.grid.len(),
            order: max_order,
            required,
        });
    }
    let mut acc = vec![Complex::new(T::zero(), T::zero()); required];
    for ((&(theta, phi), &w), &p) in snapshot
        .grid
        .angles()
        .iter()
        .zip(snapshot.grid.weights())
        .zip(&snapshot.pressures)
    {
        let y = sph_harmonics_up_to(max_order, theta, phi);
        for (slot, harmonics) in acc.iter_mut().zip(&y) {
            *slot += p * harmonics.conj() * w;
        }
    }
    let mut coeffs =
        CoeffSet::new_pressure(max_order, snapshot.frequency, snapshot.grid.radius());
    for (mode, value) in ModeIndex::all_up_to(max_order).zip(acc) {
        coeffs.set(mode, value);
    }
    Ok(coeffs)
}

/// How to treat orders flagged as Bessel nulls when dividing by `j_u(k r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullPolicy {
    /// Abort with an error listing the flagged orders.
    Error,
    /// Leave the flagged orders absent from the result.
    Skip,
    /// Divide anyway.
    Force,
}

/// Estimate field coefficients `K_uv = P_uv / j_u(k r)`, handling orders
/// flagged by [`detect_bessel_nulls`] (at [`NULL_THRESHOLD`]) per `policy`.
pub fn estimate_field_coeffs<T: Float>(
    pcoeffs: &CoeffSet<T>,
    medium: &Medium<T>,
    policy: NullPolicy,
) -> Result<CoeffSet<T>> {
    let radius = pcoeffs.radius().ok_or_else(|| {
        Error::InvalidConfig("field-coefficient estimation needs pressure coefficients".into())
    })?;
    let f = pcoeffs.frequency();
    let max_order = pcoeffs.max_order();
    let report = detect_bessel_nulls(f, radius, medium, max_order, cast(NULL_THRESHOLD))?;
    let flagged = report.flagged_orders();
    if policy == NullPolicy::Error && !flagged.is_empty() {
        return Err(Error::BesselNull {
            orders: flagged,
            threshold: NULL_THRESHOLD,
        });
    }
    let x = medium.wavenumber(f) * radius;
    let j = sph_bessel_j_all(max_order, x)?;
    let mut out = CoeffSet::new_field(max_order, f);
    for (mode, value) in pcoeffs.present() {
        let u = mode.order();
        if flagged.contains(&u) && policy == NullPolicy::Skip {
            continue;
        }
        out.set(mode, value / j[u]);
    }
    Ok(out)
}

/// Synthesize pressure on a grid from field coefficients:
/// `P(theta, phi) = sum K_uv j_u(k r) Y_uv(theta, phi)`, absent modes
/// contributing zero.
pub fn synthesize_field<T: Float>(
    kcoeffs: &CoeffSet<T>,
    grid: &SphericalGrid<T>,
    medium: &Medium<T>,
) -> Result<FieldSnapshot<T>> {
    if kcoeffs.radius().is_some() {
        return Err(Error::InvalidConfig(
            "synthesis needs field coefficients, not pressure coefficients".into(),
        ));
    }
    let f = kcoeffs.frequency();
    let max_order = kcoeffs.max_order();
    let x = medium.wavenumber(f) * grid.radius();
    let j = sph_bessel_j_all(max_order, x)?;
    let radial: Vec<Option<Complex<T>>> = ModeIndex::all_up_to(max_order)
        .map(|mode| {
            kcoeffs
                .get(mode)
                .map(|value| value * j[mode.order()])
        })
        .collect();
    let pressures = grid
        .angles()
        .iter()
        .map(|&(theta, phi)| {
            let y = sph_harmonics_up_to(max_order, theta, phi);
            let mut acc = Complex::new(T::zero(), T::zero());
            for (term, harmonics) in radial.iter().zip(&y) {
                if let Some(t) = term {
                    acc += *t * *harmonics;
                }
            }
            acc
        })
        .collect();
    FieldSnapshot::new(f, grid.clone(), pressures)
}

/// Radial translator for rigid-sphere reconstruction:
/// `G_u = h_u'(k r_a) j_u(k r_c) / (j_u(k r_a) h_u'(k r_a) - j_u'(k r_a) h_u(k r_a))`.
///
/// The denominator is the spherical Wronskian combination `-i / (k r_a)^2`,
/// nonzero for every real positive argument, which is why the rigid-sphere
/// path has no nulls.
pub fn radial_translator<T: Float>(
    order: usize,
    frequency: T,
    target_radius: T,
    array_radius: T,
    medium: &Medium<T>,
) -> Result<Complex<T>> {
    for (name, r) in [("target_radius", target_radius), ("array_radius", array_radius)] {
        if !(r > T::zero()) {
            return Err(Error::NonPositive {
                what: "radial translator",
                name,
                value: r.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let k = medium.wavenumber(frequency);
    let xa = k * array_radius;
    let xc = k * target_radius;
    let hp = sph_hankel_h2_prime(order, xa)?;
    let h = sph_hankel_h2(order, xa)?;
    let j = sph_bessel_j(order, xa)?;
    let jp = sph_bessel_j_prime(order, xa)?;
    let den = hp * j - h * jp;
    if den.norm() < cast::<T>(1e-3) / (xa * xa) {
        return Err(Error::TranslatorSingular {
            order,
            x: xa.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(hp * sph_bessel_j(order, xc)? / den)
}

/// Reconstruct the incident sound field at `target grid` from pressure
/// coefficients measured on a rigid sphere:
/// `P(r_c, theta, phi) = sum_u G_u sum_v P_uv Y_uv(theta, phi)`.
pub fn rigid_reconstruct<T: Float>(
    pcoeffs: &CoeffSet<T>,
    target: &SphericalGrid<T>,
    medium: &Medium<T>,
) -> Result<FieldSnapshot<T>> {
    let array_radius = pcoeffs.radius().ok_or_else(|| {
        Error::InvalidConfig("rigid reconstruction needs pressure coefficients".into())
    })?;
    let f = pcoeffs.frequency();
    let max_order = pcoeffs.max_order();
    let translators: Vec<Complex<T>> = (0..=max_order)
        .map(|u| radial_translator(u, f, target.radius(), array_radius, medium))
        .collect::<Result<_>>()?;
    let pressures = target
        .angles()
        .iter()
        .map(|&(theta, phi)| {
            let y = sph_harmonics_up_to(max_order, theta, phi);
            let mut acc = Complex::new(T::zero(), T::zero());
            for (mode, value) in pcoeffs.present() {
                acc += translators[mode.order()] * value * y[mode.flat_index()];
            }
            acc
        })
        .collect();
    FieldSnapshot::new(f, target.clone(), pressures)
}
