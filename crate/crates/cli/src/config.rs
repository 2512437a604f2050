//! Scenario configuration: sectioned TOML where every key is optional and
//! missing keys fall back to the built-in default evaluation setup.
//!
//! Unknown keys are rejected rather than ignored, so a typo cannot silently
//! run the default instead of the intended override. The fully resolved
//! configuration can be emitted back as TOML; re-parsing that emission
//! yields the identical resolution (round-trip property), which is how every
//! run records its provenance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use xlra_core::engine::Scenario;
use xlra_core::fading::FadingModel;
use xlra_core::geometry::{ArrayGeometry, StandoffPolicy};
use xlra_core::optimizer::fixed_delta_baseline;
use xlra_core::protocol::{AlphaMode, ProtocolKind, ProtocolParams};

use crate::error::CliError;

// ---------------------------------------------------------------------------
// Raw file shape: everything optional.
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConfigFile {
    array: ArraySection,
    cell: CellSection,
    population: PopulationSection,
    fading: FadingSection,
    visibility: VisibilitySection,
    protocol: ProtocolSection,
    run: RunSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ArraySection {
    m_y: Option<usize>,
    m_z: Option<usize>,
    d_m: Option<f64>,
    lambda_c: Option<f64>,
    b_list: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CellSection {
    side: Option<f64>,
    standoff: Option<StandoffSpec>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PopulationSection {
    k_list: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FadingSection {
    g_db: Option<f64>,
    kappa: Option<f64>,
    sigma_sf_db: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct VisibilitySection {
    p_b: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ProtocolSection {
    tau_ra: Option<usize>,
    rho: Option<f64>,
    sigma2: Option<f64>,
    p_a: Option<f64>,
    p_na: Option<f64>,
    max_attempts: Option<u32>,
    varpi1: Option<f64>,
    max_cluster: Option<usize>,
    alpha_mode: Option<String>,
    alpha_noise_variance: Option<f64>,
    delta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunSection {
    trials: Option<usize>,
    horizon_slots: Option<usize>,
    master_seed: Option<u64>,
}

/// Near-edge placement constraint: `"auto"` keeps users beyond the
/// subarray's near-field boundary; a number fixes the standoff in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StandoffSpec {
    Fixed(f64),
    Named(String),
}

impl StandoffSpec {
    pub fn to_policy(&self) -> Result<StandoffPolicy, CliError> {
        match self {
            StandoffSpec::Fixed(s) => Ok(StandoffPolicy::Fixed(*s)),
            StandoffSpec::Named(name) if name == "auto" => Ok(StandoffPolicy::Auto),
            StandoffSpec::Named(other) => Err(CliError::Config(format!(
                "cell.standoff must be \"auto\" or a distance in meters, got \"{other}\""
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Resolved shape: every field concrete.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub array: ResolvedArray,
    pub cell: ResolvedCell,
    pub population: ResolvedPopulation,
    pub fading: ResolvedFading,
    pub visibility: ResolvedVisibility,
    pub protocol: ResolvedProtocol,
    pub run: ResolvedRun,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedArray {
    pub m_y: usize,
    pub m_z: usize,
    pub d_m: f64,
    pub lambda_c: f64,
    pub b_list: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedCell {
    pub side: f64,
    pub standoff: StandoffSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedPopulation {
    pub k_list: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedFading {
    pub g_db: f64,
    pub kappa: f64,
    pub sigma_sf_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedVisibility {
    pub p_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedProtocol {
    pub tau_ra: usize,
    pub rho: f64,
    pub sigma2: f64,
    pub p_a: f64,
    pub p_na: f64,
    pub max_attempts: u32,
    pub varpi1: f64,
    pub max_cluster: usize,
    pub alpha_mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_noise_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedRun {
    pub trials: usize,
    pub horizon_slots: usize,
    pub master_seed: u64,
}

fn resolve(file: ConfigFile) -> Result<ResolvedConfig, CliError> {
    let alpha_mode = file
        .protocol
        .alpha_mode
        .unwrap_or_else(|| "genie".to_string());
    match alpha_mode.as_str() {
        "genie" => {
            if file.protocol.alpha_noise_variance.is_some() {
                return Err(CliError::Config(
                    "protocol.alpha_noise_variance is only meaningful with alpha_mode = \"noisy\""
                        .into(),
                ));
            }
        }
        "noisy" => {
            if file.protocol.alpha_noise_variance.is_none() {
                return Err(CliError::Config(
                    "protocol.alpha_mode = \"noisy\" requires protocol.alpha_noise_variance".into(),
                ));
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "protocol.alpha_mode must be \"genie\" or \"noisy\", got \"{other}\""
            )))
        }
    }
    Ok(ResolvedConfig {
        array: ResolvedArray {
            m_y: file.array.m_y.unwrap_or(100),
            m_z: file.array.m_z.unwrap_or(5),
            d_m: file.array.d_m.unwrap_or(0.1),
            lambda_c: file.array.lambda_c.unwrap_or(0.125),
            b_list: file.array.b_list.unwrap_or_else(|| vec![1, 5, 10]),
        },
        cell: ResolvedCell {
            side: file.cell.side.unwrap_or(100.0),
            standoff: file
                .cell
                .standoff
                .unwrap_or(StandoffSpec::Named("auto".to_string())),
        },
        population: ResolvedPopulation {
            k_list: file
                .population
                .k_list
                .unwrap_or_else(|| vec![1000, 2500, 5000, 10000, 15000]),
        },
        fading: ResolvedFading {
            g_db: file.fading.g_db.unwrap_or(-34.53),
            kappa: file.fading.kappa.unwrap_or(3.8),
            sigma_sf_db: file.fading.sigma_sf_db.unwrap_or(10.0),
        },
        visibility: ResolvedVisibility {
            p_b: file.visibility.p_b.unwrap_or(0.5),
        },
        protocol: ResolvedProtocol {
            tau_ra: file.protocol.tau_ra.unwrap_or(10),
            rho: file.protocol.rho.unwrap_or(1.0),
            sigma2: file.protocol.sigma2.unwrap_or(1.0),
            p_a: file.protocol.p_a.unwrap_or(0.01),
            p_na: file.protocol.p_na.unwrap_or(0.5),
            max_attempts: file.protocol.max_attempts.unwrap_or(10),
            varpi1: file.protocol.varpi1.unwrap_or(0.1),
            max_cluster: file.protocol.max_cluster.unwrap_or(3),
            alpha_mode,
            alpha_noise_variance: file.protocol.alpha_noise_variance,
            delta: file.protocol.delta,
        },
        run: ResolvedRun {
            trials: file.run.trials.unwrap_or(5000),
            horizon_slots: file.run.horizon_slots.unwrap_or(40),
            master_seed: file.run.master_seed.unwrap_or(1),
        },
    })
}

/// Parses and resolves a configuration file; an empty file yields the full
/// default setup.
pub fn parse_config(path: &Path) -> Result<ResolvedConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read config file {}: {e}", path.display()))
    })?;
    parse_config_str(&text)
}

/// [`parse_config`] on in-memory text.
pub fn parse_config_str(text: &str) -> Result<ResolvedConfig, CliError> {
    let file: ConfigFile =
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
    resolve(file)
}

impl ResolvedConfig {
    /// Emits the resolution as TOML; `parse_config_str` on the output
    /// reproduces `self` exactly.
    pub fn emit_toml(&self) -> String {
        toml::to_string_pretty(self).expect("resolved config serializes")
    }

    pub fn geometry(&self, b: usize) -> Result<ArrayGeometry, CliError> {
        ArrayGeometry::new(
            self.array.m_y,
            self.array.m_z,
            self.array.d_m,
            b,
            self.array.lambda_c,
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn fading_model(&self) -> FadingModel {
        FadingModel {
            g_db: self.fading.g_db,
            kappa: self.fading.kappa,
            sigma_sf_db: self.fading.sigma_sf_db,
        }
    }

    fn alpha_mode(&self) -> AlphaMode {
        match self.protocol.alpha_noise_variance {
            Some(variance) => AlphaMode::Noisy { variance },
            None => AlphaMode::Genie,
        }
    }

    /// Protocol parameters for one protocol; the baseline ignores the
    /// cluster-size knob (it decodes one winner per pilot) and both default
    /// to the fixed bias scale when the config does not set one.
    pub fn protocol_params(&self, kind: ProtocolKind) -> ProtocolParams {
        ProtocolParams {
            kind,
            tau_ra: self.protocol.tau_ra,
            rho: self.protocol.rho,
            sigma2: self.protocol.sigma2,
            p_a: self.protocol.p_a,
            p_na: self.protocol.p_na,
            max_attempts: self.protocol.max_attempts,
            delta: self.protocol.delta.unwrap_or_else(fixed_delta_baseline),
            varpi1: self.protocol.varpi1,
            max_cluster: match kind {
                ProtocolKind::SucreXl => 1,
                ProtocolKind::NomaXl => self.protocol.max_cluster,
            },
            alpha_mode: self.alpha_mode(),
        }
    }

    /// Assembles the full scenario for one (protocol, population, split)
    /// grid point.
    pub fn scenario(&self, kind: ProtocolKind, k: usize, b: usize) -> Result<Scenario, CliError> {
        Ok(Scenario {
            geometry: self.geometry(b)?,
            cell_side: self.cell.side,
            standoff: self.cell.standoff.to_policy()?,
            fading: self.fading_model(),
            p_b: self.visibility.p_b,
            k_inactive: k,
            protocol: self.protocol_params(kind),
            horizon_slots: self.run.horizon_slots,
            trials: self.run.trials,
            master_seed: self.run.master_seed,
        })
    }

    /// Checks every scenario the given protocols would run, so bad configs
    /// fail before any simulation starts.
    pub fn validate_for(&self, kinds: &[ProtocolKind]) -> Result<(), CliError> {
        if self.population.k_list.is_empty() {
            return Err(CliError::Config(
                "population.k_list must not be empty".into(),
            ));
        }
        if self.array.b_list.is_empty() {
            return Err(CliError::Config("array.b_list must not be empty".into()));
        }
        for &kind in kinds {
            for &k in &self.population.k_list {
                for &b in &self.array.b_list {
                    self.scenario(kind, k, b)?
                        .validate()
                        .map_err(|e| CliError::Config(e.to_string()))?;
                }
            }
        }
        Ok(())
    }
}
