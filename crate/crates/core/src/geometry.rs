//! Spherical point sets with quadrature weights.
//!
//! A [`SphericalGrid`] serves three roles in the processing chain: microphone
//! layout, PDE collocation set, and evaluation/re-analysis set. Weights are
//! normalized to `sum = 4 pi` so the discrete projection approximates the
//! continuous spherical-harmonic integral directly.

use crate::{cast, Error, Float, Result};
use serde::{Deserialize, Serialize};

/// Grid construction families supported by [`make_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    /// Gauss-Legendre colatitude nodes times a uniform azimuth ring; `n` is
    /// the design degree (spherical polynomials up to that degree integrate
    /// exactly).
    GaussLegendre,
    /// Equal-weight point set that integrates spherical polynomials exactly
    /// up to the catalog strength; `n` is the point count.
    SphericalTDesign,
    /// Fibonacci spiral with equal weights `4 pi / n`; approximate quadrature
    /// at any size `n`.
    Fibonacci,
}

/// Point set on a sphere with quadrature weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalGrid<T: Float> {
    radius: T,
    /// (theta, phi) per point, physics convention: theta polar from +z.
    points: Vec<(T, T)>,
    /// Quadrature weights, sum = 4 pi.
    weights: Vec<T>,
    /// Cached Cartesian coordinates.
    cartesian: Vec<[T; 3]>,
}

impl<T: Float> SphericalGrid<T> {
    /// Build a grid from explicit angles and weights.
    pub fn from_parts(radius: T, points: Vec<(T, T)>, weights: Vec<T>) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::NonPositive {
                what: "spherical grid",
                name: "radius",
                value: radius.to_f64().unwrap_or(f64::NAN),
            });
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidConfig(format!(
                "grid has {} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let total: T = weights.iter().copied().sum();
        let four_pi = cast::<T>(4.0) * T::PI();
        if (total - four_pi).abs() > cast::<T>(1e-6) * four_pi {
            return Err(Error::InvalidConfig(format!(
                "grid weights sum to {total}, expected 4 pi"
            )));
        }
        let cartesian = points
            .iter()
            .map(|&(theta, phi)| sph_to_cart(radius, theta, phi))
            .collect();
        Ok(Self {
            radius,
            points,
            weights,
            cartesian,
        })
    }

    /// Same angular layout and weights on a different radius.
    pub fn with_radius(&self, radius: T) -> Result<Self> {
        Self::from_parts(radius, self.points.clone(), self.weights.clone())
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// (theta, phi) pairs.
    pub fn angles(&self) -> &[(T, T)] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn cartesian(&self) -> &[[T; 3]] {
        &self.cartesian
    }

    /// Serialize as `{radius, points: [{theta, phi, weight}]}`.
    pub fn to_json(&self) -> serde_json::Value
    where
        T: Serialize,
    {
        serde_json::json!({
            "radius": self.radius,
            "points": self
                .points
                .iter()
                .zip(&self.weights)
                .map(|(&(theta, phi), &w)| serde_json::json!({
                    "theta": theta,
                    "phi": phi,
                    "weight": w,
                }))
                .collect::<Vec<_>>(),
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self>
    where
        T: serde::de::DeserializeOwned,
    {
        #[derive(Deserialize)]
        struct P<T> {
            theta: T,
            phi: T,
            weight: T,
        }
        #[derive(Deserialize)]
        struct G<T> {
            radius: T,
            points: Vec<P<T>>,
        }
        let g: G<T> = serde_json::from_value(value.clone())?;
        let (points, weights) = g
            .points
            .into_iter()
            .map(|p| ((p.theta, p.phi), p.weight))
            .unzip();
        Self::from_parts(g.radius, points, weights)
    }
}

/// Spherical to Cartesian, physics convention (theta from +z, phi from +x).
pub fn sph_to_cart<T: Float>(r: T, theta: T, phi: T) -> [T; 3] {
    let st = theta.sin();
    [r * st * phi.cos(), r * st * phi.sin(), r * theta.cos()]
}

/// Cartesian to spherical; returns `(r, theta, phi)` with `phi` in `[0, 2 pi)`.
pub fn cart_to_sph<T: Float>(xyz: [T; 3]) -> (T, T, T) {
    let [x, y, z] = xyz;
    let r = (x * x + y * y + z * z).sqrt();
    if r == T::zero() {
        return (T::zero(), T::zero(), T::zero());
    }
    let theta = (z / r).min(T::one()).max(-T::one()).acos();
    let mut phi = y.atan2(x);
    if phi < T::zero() {
        phi += cast::<T>(2.0) * T::PI();
    }
    (r, theta, phi)
}

/// Build a grid of the requested kind; see [`GridKind`] for the meaning of `n`.
pub fn make_grid<T: Float>(kind: GridKind, n: usize, radius: T) -> Result<SphericalGrid<T>> {
    match kind {
        GridKind::GaussLegendre => gauss_legendre_grid(n, radius),
        GridKind::SphericalTDesign => t_design_grid(n, radius),
        GridKind::Fibonacci => fibonacci_grid(n, radius),
    }
}

/// Gauss-Legendre product grid exact for spherical polynomials up to `degree`.
fn gauss_legendre_grid<T: Float>(degree: usize, radius: T) -> Result<SphericalGrid<T>> {
    if degree == 0 {
        return Err(Error::UnsupportedGridSize {
            kind: "gauss-legendre",
            n: 0,
            supported: "any degree >= 1".into(),
        });
    }
    let n_theta = degree / 2 + 1; // exact for cos-theta polynomials up to 2*n_theta-1 >= degree
    let n_phi = degree + 1;
    let (nodes, gl_weights) = gauss_legendre_nodes(n_theta);
    let mut points = Vec::with_capacity(n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    let two_pi = cast::<T>(2.0) * T::PI();
    for (ct, w) in nodes.iter().zip(&gl_weights) {
        let theta = cast::<T>(ct.min(1.0).max(-1.0)).acos();
        for i in 0..n_phi {
            let phi = two_pi * cast::<T>(i as f64) / cast::<T>(n_phi as f64);
            points.push((theta, phi));
            weights.push(cast::<T>(*w) * two_pi / cast::<T>(n_phi as f64));
        }
    }
    SphericalGrid::from_parts(radius, points, weights)
}

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
fn gauss_legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Equal-weight Fibonacci spiral.
fn fibonacci_grid<T: Float>(n: usize, radius: T) -> Result<SphericalGrid<T>> {
    if n == 0 {
        return Err(Error::UnsupportedGridSize {
            kind: "fibonacci",
            n,
            supported: "any point count >= 1".into(),
        });
    }
    let golden_angle = cast::<T>(std::f64::consts::PI * (3.0 - 5.0f64.sqrt()));
    let two_pi = cast::<T>(2.0) * T::PI();
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let z = T::one() - cast::<T>((2 * i + 1) as f64) / cast::<T>(n as f64);
        let theta = z.min(T::one()).max(-T::one()).acos();
        let phi = (golden_angle * cast::<T>(i as f64)) % two_pi;
        points.push((theta, phi));
    }
    let w = cast::<T>(4.0) * T::PI() / cast::<T>(n as f64);
    let weights = vec![w; n];
    SphericalGrid::from_parts(radius, points, weights)
}

/// Spherical t-design catalog: equal-weight layouts listed by point count.
fn t_design_grid<T: Float>(n: usize, radius: T) -> Result<SphericalGrid<T>> {
    let table: &[[f64; 2]] = match n {
        6 => &OCTAHEDRON_6_DESIGN_3,
        12 => &ICOSAHEDRON_12_DESIGN_5,
        36 => &TDESIGN_36_STRENGTH_8,
        _ => {
            return Err(Error::UnsupportedGridSize {
                kind: "spherical-t-design",
                n,
                supported: "6 (strength 3), 12 (strength 5), 36 (strength 8)".into(),
            })
        }
    };
    let points: Vec<(T, T)> = table
        .iter()
        .map(|&[theta, phi]| (cast::<T>(theta), cast::<T>(phi)))
        .collect();
    let w = cast::<T>(4.0) * T::PI() / cast::<T>(n as f64);
    let weights = vec![w; n];
    SphericalGrid::from_parts(radius, points, weights)
}

/// Octahedron vertices: strength-3 design.
const OCTAHEDRON_6_DESIGN_3: [[f64; 2]; 6] = [
    [0.0, 0.0],
    [std::f64::consts::PI, 0.0],
    [std::f64::consts::FRAC_PI_2, 0.0],
    [std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2],
    [std::f64::consts::FRAC_PI_2, std::f64::consts::PI],
    [std::f64::consts::FRAC_PI_2, 3.0 * std::f64::consts::FRAC_PI_2],
];

/// Icosahedron vertices: strength-5 design. theta = atan(1/phi-ratio) bands.
const ICOSAHEDRON_12_DESIGN_5: [[f64; 2]; 12] = [
    [0.0, 0.0],
    [std::f64::consts::PI, 0.0],
    [1.1071487177940904, 0.0],
    [1.1071487177940904, 1.2566370614359172],
    [1.1071487177940904, 2.5132741228718345],
    [1.1071487177940904, 3.7699111843077517],
    [1.1071487177940904, 5.026548245743669],
    [2.0344439357957027, 0.6283185307179586],
    [2.0344439357957027, 1.8849555921538759],
    [2.0344439357957027, 3.141592653589793],
    [2.0344439357957027, 4.39822971502571],
    [2.0344439357957027, 5.654866776461628],
];

/// 36-point strength-8 design, found by Gauss-Newton refinement of the
/// degree-wise design residuals from a perturbed Fibonacci start. With equal
/// weights it integrates spherical polynomials up to degree 8 to machine
/// precision, covering products of harmonics up to order 4.
const TDESIGN_36_STRENGTH_8: [[f64; 2]; 36] = [
    [1.15348691335535158e-01, 5.96859996734890252e+00],
    [5.58158836542634762e-01, 2.10857383210300098e+00],
    [6.38319469890256563e-01, 4.52351329599369212e+00],
    [6.32671825599404825e-01, 9.38988603724038251e-01],
    [5.49916781640403807e-01, 3.41049164469175370e+00],
    [6.88656022750307573e-01, 5.86584054065666916e+00],
    [1.09426809531732516e+00, 1.81616532944858688e+00],
    [1.19874436494535974e+00, 4.32332460355595405e+00],
    [1.00922931625456402e+00, 3.16105481214955020e-01],
    [9.94346559099927085e-01, 2.73399473786073255e+00],
    [9.92717373086856480e-01, 5.18643890796738916e+00],
    [1.19023103529216701e+00, 1.18395816291432943e+00],
    [1.10024482551609837e+00, 3.64386258095409010e+00],
    [1.30554791471578113e+00, 5.99280686597738921e+00],
    [1.45586235723697444e+00, 2.35392520397873417e+00],
    [1.52002242428651058e+00, 4.81248193815392078e+00],
    [1.50765881117187739e+00, 6.19609877775611162e-01],
    [1.44043027516131827e+00, 3.14726732778970320e+00],
    [1.54020341092078938e+00, 5.46170928216346407e+00],
    [1.71890500793606837e+00, 1.78482574352355039e+00],
    [1.67174701130663395e+00, 3.90622403793984718e+00],
    [1.76478486300302762e+00, 6.88597526321021725e-02],
    [1.90740672097724584e+00, 2.71374955218756186e+00],
    [2.10002069832446026e+00, 5.11736943146899215e+00],
    [1.79518452046799193e+00, 1.20544234381806747e+00],
    [1.98937613355399745e+00, 3.40858477449160269e+00],
    [2.07404480016089821e+00, 5.81638630998303441e+00],
    [2.21581042195961553e+00, 2.11666799474038392e+00],
    [1.98542208455908886e+00, 4.41483296586018881e+00],
    [2.15659676993997884e+00, 6.12455114783988397e-01],
    [2.53500289999125039e+00, 2.93176121070074558e+00],
    [2.66908730698087204e+00, 5.00052992569061505e+00],
    [2.41629886930080673e+00, 1.35133916218665262e+00],
    [2.45758814434056694e+00, 3.96146874368089330e+00],
    [2.55027705435580909e+00, 2.44530071609893674e-03],
    [2.98691208508342942e+00, 1.68469271467722881e+00],
];
