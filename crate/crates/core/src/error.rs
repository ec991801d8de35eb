//! Crate-wide error type.

/// Errors surfaced by the library.
///
/// Numeric payloads are carried as `f64` regardless of the working scalar so
/// the messages stay uniform across instantiations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("spherical Bessel/Hankel order {order} exceeds the supported maximum {max}")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("{what} requires {name} > 0, got {value}")]
    NonPositive {
        what: &'static str,
        name: &'static str,
        value: f64,
    },

    #[error("{what}: argument {name} = {value} is not finite")]
    NotFinite {
        what: &'static str,
        name: &'static str,
        value: f64,
    },

    #[error("unsupported {kind} grid size {n}; supported: {supported}")]
    UnsupportedGridSize {
        kind: &'static str,
        n: usize,
        supported: String,
    },

    #[error("grid with {points} points cannot resolve order {order}; at least {required} points are needed")]
    UnderResolvedGrid {
        points: usize,
        order: usize,
        required: usize,
    },

    #[error("source and receiver coincide; the free-field Green's function is singular there")]
    CoincidentPoints,

    #[error("receiver at radius {radius} lies inside the rigid sphere of radius {sphere_radius}")]
    ReceiverInsideSphere { radius: f64, sphere_radius: f64 },

    #[error("spherical Bessel null at order(s) {orders:?}: |j_u(k r)| below threshold {threshold}")]
    BesselNull { orders: Vec<usize>, threshold: f64 },

    #[error("radial translator denominator vanished at order {order} (x = {x})")]
    TranslatorSingular { order: usize, x: f64 },

    #[error("reconstruction error undefined: reference field has zero energy")]
    ZeroEnergyTruth,

    #[error("training aborted: loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("snapshot/grid mismatch: {details}")]
    GridMismatch { details: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
