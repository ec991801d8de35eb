//! Experiment orchestration: scenario configuration, the reconstruction
//! pipelines (direct array analysis, PINN-assisted analysis, rigid-sphere
//! baseline, pure network prediction), the energy error metric, radius
//! sweeps, and report emission.

use crate::acoustics::{
    free_field_snapshot, rigid_sphere_snapshot, FieldSnapshot, Medium, PointSource,
};
use crate::geometry::{make_grid, GridKind, SphericalGrid};
use crate::pinn::{self, LossRecord, MlpParams, TrainConfig};
use crate::shd::{
    detect_bessel_nulls, estimate_field_coeffs, estimate_pressure_coeffs, order_budget,
    rigid_reconstruct, synthesize_field, CoeffSet, NullPolicy, NullReport, NULL_THRESHOLD,
};
use crate::specfun::{sph_bessel_j_all, ModeIndex};
use crate::{cast, Error, Float, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Reported errors are floored here so exact matches stay finite.
pub const EPSILON_FLOOR_DB: f64 = -300.0;

/// Reconstruction pipelines selectable in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Direct spherical-harmonic analysis on the open array, null orders skipped.
    Osma,
    /// Direct analysis for healthy orders, network re-analysis on the virtual
    /// sphere for the null orders.
    PinnOsma,
    /// Rigid-sphere array with the radial translator.
    Rigid,
    /// Network prediction evaluated straight on the target sphere.
    PurePinn,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Osma => "osma",
            Method::PinnOsma => "pinn-osma",
            Method::Rigid => "rigid",
            Method::PurePinn => "pure-pinn",
        }
    }
}

/// Grid construction request: kind plus its size/degree parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: GridKind,
    pub n: usize,
}

impl GridSpec {
    pub fn build<T: Float>(&self, radius: T) -> Result<SphericalGrid<T>> {
        make_grid(self.kind, self.n, radius)
    }
}

/// Microphone array description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec<T: Float> {
    pub radius: T,
    pub grid: GridSpec,
}

/// Training recipe as it appears in a scenario file. Frequency, medium and
/// the default coordinate scale come from the surrounding experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec<T: Float> {
    #[serde(default = "default_hidden")]
    pub hidden_layers: usize,
    #[serde(default = "default_hidden")]
    pub hidden_nodes: usize,
    pub epochs: usize,
    pub learning_rate: T,
    #[serde(default = "default_beta1")]
    pub beta1: T,
    #[serde(default = "default_beta2")]
    pub beta2: T,
    #[serde(default = "default_epsilon")]
    pub epsilon: T,
    /// Mandatory: every run is reproducible from its config alone.
    pub seed: u64,
    #[serde(default = "default_pde_weight")]
    pub pde_weight: T,
    /// Input normalization divisor; defaults to the array radius.
    #[serde(default)]
    pub coordinate_scale: Option<T>,
}

fn default_hidden() -> usize {
    3
}
fn default_beta1<T: Float>() -> T {
    cast(0.9)
}
fn default_beta2<T: Float>() -> T {
    cast(0.999)
}
fn default_epsilon<T: Float>() -> T {
    cast(1e-8)
}
fn default_pde_weight<T: Float>() -> T {
    T::one()
}

impl<T: Float> TrainSpec<T> {
    fn to_config(&self, frequency: T, medium: Medium<T>, array_radius: T) -> TrainConfig<T> {
        TrainConfig {
            hidden_layers: self.hidden_layers,
            hidden_nodes: self.hidden_nodes,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            seed: self.seed,
            coordinate_scale: self.coordinate_scale.unwrap_or(array_radius),
            pde_weight: self.pde_weight,
            frequency,
            medium,
        }
    }
}

/// Full scenario description; serializable as the CLI config document.
/// All physical quantities are SI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig<T: Float> {
    pub frequency: T,
    #[serde(default)]
    pub medium: Medium<T>,
    pub array: ArraySpec<T>,
    pub source: PointSource<T>,
    /// Radius of the virtual sphere the network is re-sampled on.
    pub virtual_radius: T,
    /// Radius of the reconstruction target sphere.
    pub target_radius: T,
    pub collocation: GridSpec,
    pub evaluation: GridSpec,
    pub train: TrainSpec<T>,
    pub methods: Vec<Method>,
}

impl<T: Float> ExperimentConfig<T> {
    /// First reference scenario: 3430 Hz source at (0.5, 0.5, 0.75) m, where
    /// `j_0(k r_a)` nulls order zero on the 0.05 m array.
    pub fn paper_scenario_1(seed: u64) -> Self {
        Self::paper_scenario([0.5, 0.5, 0.75], cast(3430.0), seed)
    }

    /// Second reference scenario: 4905 Hz source at (0.5, -0.5, -0.75) m,
    /// where `j_1(k r_a)` nulls order one.
    pub fn paper_scenario_2(seed: u64) -> Self {
        Self::paper_scenario([0.5, -0.5, -0.75], cast(4905.0), seed)
    }

    fn paper_scenario(position: [f64; 3], frequency: T, seed: u64) -> Self {
        ExperimentConfig {
            frequency,
            medium: Medium::default(),
            array: ArraySpec {
                radius: cast(0.05),
                grid: GridSpec {
                    kind: GridKind::SphericalTDesign,
                    n: 36,
                },
            },
            source: PointSource::new([
                cast(position[0]),
                cast(position[1]),
                cast(position[2]),
            ]),
            virtual_radius: cast(0.048),
            target_radius: cast(0.04),
            collocation: GridSpec {
                kind: GridKind::Fibonacci,
                n: 500,
            },
            evaluation: GridSpec {
                kind: GridKind::Fibonacci,
                n: 100,
            },
            train: TrainSpec {
                hidden_layers: 3,
                hidden_nodes: 3,
                epochs: 300_000,
                learning_rate: cast(1e-3),
                beta1: default_beta1(),
                beta2: default_beta2(),
                epsilon: default_epsilon(),
                seed,
                pde_weight: T::one(),
                coordinate_scale: None,
            },
            methods: vec![Method::Osma, Method::PinnOsma, Method::Rigid, Method::PurePinn],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_radius > T::zero()) {
            return Err(Error::InvalidConfig("target_radius must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        if self.methods.contains(&Method::PinnOsma)
            && self.virtual_radius == self.array.radius
        {
            return Err(Error::InvalidConfig(
                "pinn-osma needs virtual_radius different from the array radius".into(),
            ));
        }
        let rs = self
            .source
            .position
            .iter()
            .map(|&x| x * x)
            .sum::<T>()
            .sqrt();
        for (name, r) in [
            ("array radius", self.array.radius),
            ("virtual radius", self.virtual_radius),
            ("target radius", self.target_radius),
        ] {
            if rs <= r {
                return Err(Error::InvalidConfig(format!(
                    "source at |r| = {rs} lies inside the {name}"
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of one pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MethodResult<T: Float> {
    Ok {
        epsilon_db: T,
        field: FieldSnapshot<T>,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome<T: Float> {
    pub method: Method,
    pub result: MethodResult<T>,
}

impl<T: Float> MethodOutcome<T> {
    pub fn epsilon_db(&self) -> Option<T> {
        match &self.result {
            MethodResult::Ok { epsilon_db, .. } => Some(*epsilon_db),
            MethodResult::Failed { .. } => None,
        }
    }
}

/// Coefficient tables gathered along the pipelines.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTables<T: Float> {
    /// Pressure coefficients measured on the open array.
    pub pressure_array: Option<CoeffSet<T>>,
    /// Field coefficients from the direct division, null orders skipped.
    pub field_direct: Option<CoeffSet<T>>,
    /// Pressure coefficients of the network prediction on the virtual sphere.
    pub pressure_virtual: Option<CoeffSet<T>>,
    /// Direct field coefficients with null orders filled from the virtual sphere.
    pub field_merged: Option<CoeffSet<T>>,
    /// Pressure coefficients measured on the rigid sphere.
    pub pressure_rigid: Option<CoeffSet<T>>,
}

impl<T: Float> Default for CoefficientTables<T> {
    fn default() -> Self {
        Self {
            pressure_array: None,
            field_direct: None,
            pressure_virtual: None,
            field_merged: None,
            pressure_rigid: None,
        }
    }
}

/// Everything a scenario run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport<T: Float> {
    pub config: ExperimentConfig<T>,
    pub order: usize,
    pub nulls: NullReport<T>,
    pub truth: FieldSnapshot<T>,
    pub methods: Vec<MethodOutcome<T>>,
    pub coefficients: CoefficientTables<T>,
    pub loss_history: Vec<LossRecord<T>>,
}

impl<T: Float> ExperimentReport<T> {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome<T>> {
        self.methods.iter().find(|o| o.method == method)
    }

    /// Report document with the coefficient tables in their documented
    /// `{kind, U, f, radius?, entries}` schema. Field snapshots live in the
    /// per-method CSV files, not here.
    pub fn to_json(&self) -> Result<serde_json::Value>
    where
        T: serde::Serialize,
    {
        let methods: Vec<serde_json::Value> = self
            .methods
            .iter()
            .map(|o| {
                Ok(match &o.result {
                    MethodResult::Ok { epsilon_db, .. } => serde_json::json!({
                        "method": o.method.name(),
                        "epsilon_db": epsilon_db,
                    }),
                    MethodResult::Failed { error } => serde_json::json!({
                        "method": o.method.name(),
                        "error": error,
                    }),
                })
            })
            .collect::<Result<_>>()?;
        let mut coefficients = serde_json::Map::new();
        for (name, table) in [
            ("pressure_array", &self.coefficients.pressure_array),
            ("field_direct", &self.coefficients.field_direct),
            ("pressure_virtual", &self.coefficients.pressure_virtual),
            ("field_merged", &self.coefficients.field_merged),
            ("pressure_rigid", &self.coefficients.pressure_rigid),
        ] {
            if let Some(t) = table {
                coefficients.insert(name.into(), t.to_json());
            }
        }
        Ok(serde_json::json!({
            "config": serde_json::to_value(&self.config)?,
            "order": self.order,
            "nulls": serde_json::to_value(&self.nulls)?,
            "methods": methods,
            "coefficients": coefficients,
            "loss_epochs_logged": self.loss_history.len(),
        }))
    }
}

/// Energy-normalized reconstruction error in dB:
/// `10 log10(sum |P - P_hat|^2 / sum |P|^2)`, floored at [`EPSILON_FLOOR_DB`].
pub fn reconstruction_error<T: Float>(
    truth: &FieldSnapshot<T>,
    estimate: &FieldSnapshot<T>,
) -> Result<T> {
    if truth.grid.len() != estimate.grid.len()
        || (truth.grid.radius() - estimate.grid.radius()).abs()
            > cast::<T>(1e-9) * truth.grid.radius()
    {
        return Err(Error::GridMismatch {
            details: format!(
                "truth has {} points at r = {}, estimate {} points at r = {}",
                truth.grid.len(),
                truth.grid.radius(),
                estimate.grid.len(),
                estimate.grid.radius()
            ),
        });
    }
    let mut err = T::zero();
    let mut sig = T::zero();
    for (t, e) in truth.pressures.iter().zip(&estimate.pressures) {
        err += (*t - *e).norm_sqr();
        sig += t.norm_sqr();
    }
    if !(sig > T::zero()) {
        return Err(Error::ZeroEnergyTruth);
    }
    let ratio = err / sig;
    let floor = cast::<T>(EPSILON_FLOOR_DB);
    if ratio == T::zero() {
        return Ok(floor);
    }
    Ok((cast::<T>(10.0) * ratio.log10()).max(floor))
}

/// Fill the null orders of the direct field estimate from pressure
/// coefficients analyzed on the virtual sphere at `virtual_radius`.
pub fn merge_null_orders<T: Float>(
    direct: &CoeffSet<T>,
    virtual_pressure: &CoeffSet<T>,
    flagged: &[usize],
    medium: &Medium<T>,
) -> Result<CoeffSet<T>> {
    let rb = virtual_pressure.radius().ok_or_else(|| {
        Error::InvalidConfig("virtual-sphere table must hold pressure coefficients".into())
    })?;
    let f = virtual_pressure.frequency();
    let max_order = direct.max_order();
    let xb = medium.wavenumber(f) * rb;
    let j = sph_bessel_j_all(max_order, xb)?;
    let mut merged = direct.clone();
    for &u in flagged {
        if j[u].abs() < cast(NULL_THRESHOLD) {
            return Err(Error::BesselNull {
                orders: vec![u],
                threshold: NULL_THRESHOLD,
            });
        }
        for v in -(u as i64)..=u as i64 {
            let mode = ModeIndex::new(u, v)?;
            let p = virtual_pressure.get(mode).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "virtual-sphere table misses mode ({u}, {v})"
                ))
            })?;
            merged.set(mode, p / j[u]);
        }
    }
    Ok(merged)
}

struct TrainedNet<T: Float> {
    params: MlpParams<T>,
    history: Vec<LossRecord<T>>,
}

fn train_network<T: Float>(
    config: &ExperimentConfig<T>,
    measurements: &FieldSnapshot<T>,
) -> Result<(TrainedNet<T>, SphericalGrid<T>)> {
    let collocation = config.collocation.build(config.array.radius)?;
    let train_config = config
        .train
        .to_config(config.frequency, config.medium, config.array.radius);
    let (params, history) = pinn::train(measurements, &collocation, &train_config)?;
    Ok((TrainedNet { params, history }, collocation))
}

/// Run every selected pipeline against the analytic ground truth.
///
/// Pipelines fail independently: an error in one is recorded in its outcome
/// without aborting the others.
pub fn run_experiment<T: Float>(config: &ExperimentConfig<T>) -> Result<ExperimentReport<T>> {
    config.validate()?;
    let f = config.frequency;
    let medium = config.medium;
    let order = order_budget(f, config.array.radius, &medium).0;
    let mic_grid = config.array.grid.build(config.array.radius)?;
    let eval_grid = config.evaluation.build(config.target_radius)?;
    let truth = free_field_snapshot(f, &medium, &config.source, &eval_grid)?;
    let nulls = detect_bessel_nulls(
        f,
        config.array.radius,
        &medium,
        order,
        cast(NULL_THRESHOLD),
    )?;
    let flagged = nulls.flagged_orders();

    let open_measurement = free_field_snapshot(f, &medium, &config.source, &mic_grid)?;

    let needs_net = config
        .methods
        .iter()
        .any(|m| matches!(m, Method::PinnOsma | Method::PurePinn));
    let trained: Option<std::result::Result<TrainedNet<T>, String>> = if needs_net {
        Some(
            train_network(config, &open_measurement)
                .map(|(net, _)| net)
                .map_err(|e| e.to_string()),
        )
    } else {
        None
    };

    let mut tables = CoefficientTables::default();
    let mut outcomes = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let result = match method {
            Method::Osma => run_osma(config, &open_measurement, order, &eval_grid, &truth, &mut tables),
            Method::PinnOsma => match &trained {
                Some(Ok(net)) => run_pinn_osma(
                    config,
                    &open_measurement,
                    net,
                    order,
                    &flagged,
                    &eval_grid,
                    &truth,
                    &mut tables,
                ),
                Some(Err(e)) => Err(Error::InvalidConfig(format!("training failed: {e}"))),
                None => unreachable!("training requested for pinn-osma"),
            },
            Method::Rigid => run_rigid(config, order, &mic_grid, &eval_grid, &truth, &mut tables),
            Method::PurePinn => match &trained {
                Some(Ok(net)) => pinn::predict_on_sphere(&net.params, &eval_grid, f)
                    .and_then(|field| attach_error(&truth, field)),
                Some(Err(e)) => Err(Error::InvalidConfig(format!("training failed: {e}"))),
                None => unreachable!("training requested for pure-pinn"),
            },
        };
        outcomes.push(MethodOutcome {
            method,
            result: match result {
                Ok(ok) => ok,
                Err(e) => MethodResult::Failed {
                    error: e.to_string(),
                },
            },
        });
    }

    Ok(ExperimentReport {
        config: config.clone(),
        order,
        nulls,
        truth,
        methods: outcomes,
        coefficients: tables,
        loss_history: match trained {
            Some(Ok(net)) => net.history,
            _ => Vec::new(),
        },
    })
}

fn attach_error<T: Float>(
    truth: &FieldSnapshot<T>,
    field: FieldSnapshot<T>,
) -> Result<MethodResult<T>> {
    let epsilon_db = reconstruction_error(truth, &field)?;
    Ok(MethodResult::Ok { epsilon_db, field })
}

fn run_osma<T: Float>(
    config: &ExperimentConfig<T>,
    measurement: &FieldSnapshot<T>,
    order: usize,
    eval_grid: &SphericalGrid<T>,
    truth: &FieldSnapshot<T>,
    tables: &mut CoefficientTables<T>,
) -> Result<MethodResult<T>> {
    let pc = estimate_pressure_coeffs(measurement, order)?;
    let kc = estimate_field_coeffs(&pc, &config.medium, NullPolicy::Skip)?;
    let field = synthesize_field(&kc, eval_grid, &config.medium)?;
    tables.pressure_array = Some(pc);
    tables.field_direct = Some(kc);
    attach_error(truth, field)
}

#[allow(clippy::too_many_arguments)]
fn run_pinn_osma<T: Float>(
    config: &ExperimentConfig<T>,
    measurement: &FieldSnapshot<T>,
    net: &TrainedNet<T>,
    order: usize,
    flagged: &[usize],
    eval_grid: &SphericalGrid<T>,
    truth: &FieldSnapshot<T>,
    tables: &mut CoefficientTables<T>,
) -> Result<MethodResult<T>> {
    let pc = estimate_pressure_coeffs(measurement, order)?;
    let direct = estimate_field_coeffs(&pc, &config.medium, NullPolicy::Skip)?;
    let virtual_grid = config.evaluation.build(config.virtual_radius)?;
    let predicted = pinn::predict_on_sphere(&net.params, &virtual_grid, config.frequency)?;
    let pc_virtual = estimate_pressure_coeffs(&predicted, order)?;
    let merged = merge_null_orders(&direct, &pc_virtual, flagged, &config.medium)?;
    let field = synthesize_field(&merged, eval_grid, &config.medium)?;
    tables.pressure_virtual = Some(pc_virtual);
    tables.field_merged = Some(merged);
    attach_error(truth, field)
}

fn run_rigid<T: Float>(
    config: &ExperimentConfig<T>,
    order: usize,
    mic_grid: &SphericalGrid<T>,
    eval_grid: &SphericalGrid<T>,
    truth: &FieldSnapshot<T>,
    tables: &mut CoefficientTables<T>,
) -> Result<MethodResult<T>> {
    let measured = rigid_sphere_snapshot(config.frequency, &config.medium, &config.source, mic_grid)?;
    let pc = estimate_pressure_coeffs(&measured, order)?;
    let field = rigid_reconstruct(&pc, eval_grid, &config.medium)?;
    tables.pressure_rigid = Some(pc);
    attach_error(truth, field)
}

/// One entry of a pure-network radius sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint<T: Float> {
    pub radius: T,
    pub epsilon_db: T,
}

/// Evaluate the pure network reconstruction over `radii`, training once.
pub fn radius_sweep<T: Float>(
    config: &ExperimentConfig<T>,
    radii: &[T],
) -> Result<Vec<SweepPoint<T>>> {
    config.validate()?;
    let mic_grid = config.array.grid.build(config.array.radius)?;
    let open_measurement =
        free_field_snapshot(config.frequency, &config.medium, &config.source, &mic_grid)?;
    let (net, _) = train_network(config, &open_measurement)?;
    radii
        .iter()
        .map(|&radius| {
            let grid = config.evaluation.build(radius)?;
            let truth =
                free_field_snapshot(config.frequency, &config.medium, &config.source, &grid)?;
            let prediction = pinn::predict_on_sphere(&net.params, &grid, config.frequency)?;
            Ok(SweepPoint {
                radius,
                epsilon_db: reconstruction_error(&truth, &prediction)?,
            })
        })
        .collect()
}

/// Write `report.json`, one `field-<method>.csv` per successful method, a
/// `field-truth.csv`, and `loss.csv` when a network was trained.
pub fn write_report<T: Float + serde::Serialize>(
    report: &ExperimentReport<T>,
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(&report.to_json()?)?;
    std::fs::write(dir.join("report.json"), json)?;
    let truth_file = std::fs::File::create(dir.join("field-truth.csv"))?;
    report.truth.write_csv(truth_file)?;
    for outcome in &report.methods {
        if let MethodResult::Ok { field, .. } = &outcome.result {
            let file =
                std::fs::File::create(dir.join(format!("field-{}.csv", outcome.method.name())))?;
            field.write_csv(file)?;
        }
    }
    if !report.loss_history.is_empty() {
        let file = std::fs::File::create(dir.join("loss.csv"))?;
        pinn::write_loss_csv(&report.loss_history, file)?;
    }
    Ok(())
}

/// Write a sweep table as `radius,epsilon_db` rows.
pub fn write_sweep_csv<T: Float, W: std::io::Write>(
    sweep: &[SweepPoint<T>],
    mut out: W,
) -> Result<()> {
    writeln!(out, "radius,epsilon_db")?;
    for point in sweep {
        writeln!(out, "{},{}", point.radius, point.epsilon_db)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Complex;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn snapshot_pair(scale: Complex<f64>) -> (FieldSnapshot<f64>, FieldSnapshot<f64>) {
        let grid = make_grid(GridKind::Fibonacci, 25, 0.04).unwrap();
        let truth: Vec<Complex<f64>> = (0..25)
            .map(|i| Complex::new(0.1 + 0.01 * i as f64, -0.05 + 0.002 * i as f64))
            .collect();
        let est: Vec<Complex<f64>> = truth.iter().map(|p| p * scale).collect();
        (
            FieldSnapshot::new(1000.0, grid.clone(), truth).unwrap(),
            FieldSnapshot::new(1000.0, grid, est).unwrap(),
        )
    }

    #[test]
    fn exact_match_hits_the_floor() {
        let (truth, est) = snapshot_pair(Complex::new(1.0, 0.0));
        assert_eq!(reconstruction_error(&truth, &est).unwrap(), -300.0);
    }

    #[test]
    fn zero_estimate_scores_zero_db() {
        let (truth, est) = snapshot_pair(Complex::new(0.0, 0.0));
        assert_relative_eq!(
            reconstruction_error(&truth, &est).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn one_percent_scaling_gives_minus_forty() {
        let (truth, est) = snapshot_pair(Complex::new(1.01, 0.0));
        assert_relative_eq!(
            reconstruction_error(&truth, &est).unwrap(),
            -40.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn zero_energy_truth_is_an_error() {
        let grid = make_grid(GridKind::Fibonacci, 5, 0.04).unwrap();
        let zero =
            FieldSnapshot::new(1000.0, grid.clone(), vec![Complex::new(0.0, 0.0); 5]).unwrap();
        let est = FieldSnapshot::new(1000.0, grid, vec![Complex::new(1.0, 0.0); 5]).unwrap();
        assert!(matches!(
            reconstruction_error(&zero, &est),
            Err(Error::ZeroEnergyTruth)
        ));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let (truth, _) = snapshot_pair(Complex::new(1.0, 0.0));
        let other = make_grid(GridKind::Fibonacci, 30, 0.04).unwrap();
        let est = FieldSnapshot::new(1000.0, other, vec![Complex::new(1.0, 0.0); 30]).unwrap();
        assert!(reconstruction_error(&truth, &est).is_err());
    }

    #[test]
    fn config_validation_catches_bad_virtual_radius() {
        let mut config = ExperimentConfig::<f64>::paper_scenario_1(0);
        config.virtual_radius = config.array.radius;
        assert!(config.validate().is_err());
        config.methods = vec![Method::Osma];
        assert!(config.validate().is_ok());
    }

    #[test]
    fn config_json_round_trip() {
        let config = ExperimentConfig::<f64>::paper_scenario_2(7);
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: ExperimentConfig<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn config_seed_is_mandatory_in_json() {
        let config = ExperimentConfig::<f64>::paper_scenario_1(0);
        let mut doc = serde_json::to_value(&config).unwrap();
        doc["train"].as_object_mut().unwrap().remove("seed");
        assert!(serde_json::from_value::<ExperimentConfig<f64>>(doc).is_err());
    }

    proptest! {
        #[test]
        fn error_metric_is_scale_invariant(re in -3.0f64..3.0, im in -3.0f64..3.0) {
            prop_assume!(re * re + im * im > 1e-3);
            let scale = Complex::new(re, im);
            let (truth, est) = snapshot_pair(Complex::new(0.7, -0.1));
            let base = reconstruction_error(&truth, &est).unwrap();
            let scaled_truth = FieldSnapshot::new(
                1000.0,
                truth.grid.clone(),
                truth.pressures.iter().map(|p| p * scale).collect(),
            ).unwrap();
            let scaled_est = FieldSnapshot::new(
                1000.0,
                est.grid.clone(),
                est.pressures.iter().map(|p| p * scale).collect(),
            ).unwrap();
            let scaled = reconstruction_error(&scaled_truth, &scaled_est).unwrap();
            prop_assert!((base - scaled).abs() < 1e-9);
        }
    }
}
