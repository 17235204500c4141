use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use qflow::grid::GridSpec;
use qflow::init::InitialCondition;
use qflow::scheme::SchemeConfig;
use qflow::tensor::{Dim, MaterialParams, ViscositySpec};

/// One simulation run, read from a single TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Tensor dimension, 2 or 3.
    pub d: usize,
    pub t_end: f64,
    pub output: PathBuf,
    /// Write snapshots every this many accepted steps (the final state is
    /// always written).
    pub snapshot_interval: usize,
    pub grid: GridSpec,
    #[serde(default = "MaterialParams::unit")]
    pub material: MaterialParams,
    pub viscosity: ViscositySpec,
    #[serde(default)]
    pub scheme: SchemeConfig,
    pub initial: InitialCondition,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text).with_context(|| format!("in {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.dim().context("d")?;
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            bail!("t_end must be > 0, got {}", self.t_end);
        }
        if self.snapshot_interval == 0 {
            bail!("snapshot_interval must be > 0");
        }
        self.grid.validate().context("grid")?;
        self.material.validate().context("material")?;
        self.viscosity.validate().context("viscosity")?;
        self.scheme.validate().context("scheme")?;
        Ok(())
    }

    pub fn dim(&self) -> Result<Dim> {
        Ok(Dim::from_usize(self.d)?)
    }

    /// The config with every default filled in, as TOML.
    pub fn resolved(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        d = 2
        t_end = 0.01
        output = "out"
        snapshot_interval = 5
        grid = { nx = 8, ny = 8, lx = 1.0, ly = 1.0, bc = "dirichlet0" }
        viscosity = { family = "constant", nu0 = 1.0 }
        initial = { kind = "zero" }
    "#;

    #[test]
    fn defaults_are_filled_and_echoed() {
        let cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.material, MaterialParams::unit());
        assert_eq!(cfg.scheme, SchemeConfig::default());
        let back: RunConfig = toml::from_str(&cfg.resolved().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(cfg.resolved().unwrap().contains("picard_tol"));
    }

    #[test]
    fn errors_name_the_key() {
        let extra = format!("{MINIMAL}\nbogus = 1\n");
        let e = toml::from_str::<RunConfig>(&extra).unwrap_err().to_string();
        assert!(e.contains("bogus"), "{e}");

        let bad = MINIMAL.replace("snapshot_interval = 5", "snapshot_interval = 0");
        let e = toml::from_str::<RunConfig>(&bad).unwrap().validate().unwrap_err().to_string();
        assert!(e.contains("snapshot_interval"), "{e}");

        let bad = MINIMAL.replace("nu0 = 1.0", "nu0 = -1.0");
        let e = format!("{:#}", toml::from_str::<RunConfig>(&bad).unwrap().validate().unwrap_err());
        assert!(e.contains("viscosity") && e.contains("nu0"), "{e}");

        let bad = MINIMAL.replace("d = 2", "d = 4");
        let e = format!("{:#}", toml::from_str::<RunConfig>(&bad).unwrap().validate().unwrap_err());
        assert!(e.starts_with("d:"), "{e}");
    }
}
