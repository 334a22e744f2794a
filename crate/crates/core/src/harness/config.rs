use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assembly::ProblemSpec;
use crate::eigen::{InnerConfig, IterativeSettings, ScfConfig};
use crate::error::{Error, Result};
use crate::mesh::Domain;
use crate::mlc::MlcConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Mlc,
    Direct,
    Both,
    Adaptive,
}

impl Mode {
    pub fn runs_mlc(self) -> bool {
        matches!(self, Mode::Mlc | Mode::Both)
    }

    pub fn runs_direct(self) -> bool {
        matches!(self, Mode::Direct | Mode::Both)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Mlc => "mlc",
            Mode::Direct => "direct",
            Mode::Both => "both",
            Mode::Adaptive => "adaptive",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mlc" => Ok(Mode::Mlc),
            "direct" => Ok(Mode::Direct),
            "both" => Ok(Mode::Both),
            "adaptive" => Ok(Mode::Adaptive),
            other => Err(Error::config("mode", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMode {
    /// Direct solve on the finest mesh refined `reference_extra_levels` more times.
    ExtraLevel,
    /// Eigenvalue read from `reference_file`; function errors are not reported.
    File,
}

/// Flat run configuration, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Domain,
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub zeta: f64,

    pub base_n: usize,
    pub levels: usize,
    pub mode: Mode,
    /// Hierarchy level spanning the correction coarse space `V_H`.
    pub coarse_level: usize,
    /// Level of the initial direct solve; defaults to `coarse_level`.
    pub start_level: Option<usize>,

    pub c_mg: f64,
    pub mg_max_cycles: usize,
    pub mg_pre_sweeps: usize,
    pub mg_post_sweeps: usize,

    pub scf_lambda_tol: f64,
    pub scf_u_tol: f64,
    pub scf_max_iters: usize,
    pub scf_mixing: f64,
    pub scf_anderson_depth: usize,

    pub dense_threshold: usize,
    pub inner_tol: f64,
    pub inner_max_iter: usize,

    pub dorfler_theta: f64,
    pub adaptive_iterations: usize,

    pub reference: ReferenceMode,
    pub reference_extra_levels: usize,
    pub reference_file: Option<PathBuf>,

    pub out_dir: PathBuf,
    pub write_meshes: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let scf = ScfConfig::default();
        let inner = InnerConfig::default();
        let mlc = MlcConfig::default();
        RunConfig {
            domain: Domain::UnitSquare,
            gamma_x: 1.0,
            gamma_y: 1.0,
            zeta: 1.0,
            base_n: 6,
            levels: 4,
            mode: Mode::Both,
            coarse_level: 0,
            start_level: None,
            c_mg: mlc.c_mg,
            mg_max_cycles: mlc.max_cycles,
            mg_pre_sweeps: mlc.pre_sweeps,
            mg_post_sweeps: mlc.post_sweeps,
            scf_lambda_tol: scf.lambda_tol,
            scf_u_tol: scf.u_tol,
            scf_max_iters: scf.max_iters,
            scf_mixing: scf.mixing,
            scf_anderson_depth: scf.anderson_depth,
            dense_threshold: inner.dense_threshold,
            inner_tol: inner.iterative.tol,
            inner_max_iter: inner.iterative.max_iter,
            dorfler_theta: 0.5,
            adaptive_iterations: 15,
            reference: ReferenceMode::ExtraLevel,
            reference_extra_levels: 2,
            reference_file: None,
            out_dir: PathBuf::from("gpe-mlc-out"),
            write_meshes: true,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    pub fn problem(&self) -> ProblemSpec {
        ProblemSpec {
            domain: self.domain,
            gamma: [self.gamma_x, self.gamma_y],
            zeta: self.zeta,
        }
    }

    pub fn scf(&self) -> ScfConfig {
        ScfConfig {
            lambda_tol: self.scf_lambda_tol,
            u_tol: self.scf_u_tol,
            max_iters: self.scf_max_iters,
            mixing: self.scf_mixing,
            anderson_depth: self.scf_anderson_depth,
        }
    }

    pub fn inner(&self) -> InnerConfig {
        InnerConfig {
            dense_threshold: self.dense_threshold,
            iterative: IterativeSettings {
                tol: self.inner_tol,
                max_iter: self.inner_max_iter,
            },
        }
    }

    pub fn start_level(&self) -> usize {
        self.start_level.unwrap_or(self.coarse_level)
    }

    pub fn mlc(&self) -> MlcConfig {
        MlcConfig {
            scf: self.scf(),
            inner: self.inner(),
            c_mg: self.c_mg,
            max_cycles: self.mg_max_cycles,
            pre_sweeps: self.mg_pre_sweeps,
            post_sweeps: self.mg_post_sweeps,
            start_level: self.start_level(),
        }
    }

    /// Checks every field; the error names the offending key.
    pub fn validate(&self) -> Result<()> {
        fn positive(field: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive and finite, got {v}")))
            }
        }
        fn nonnegative(field: &str, v: f64) -> Result<()> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be nonnegative and finite, got {v}")))
            }
        }
        nonnegative("gamma_x", self.gamma_x)?;
        nonnegative("gamma_y", self.gamma_y)?;
        nonnegative("zeta", self.zeta)?;
        if self.base_n == 0 {
            return Err(Error::config("base_n", "must be at least 1"));
        }
        if self.levels == 0 {
            return Err(Error::config("levels", "must be at least 1"));
        }
        if self.mode != Mode::Adaptive && self.coarse_level >= self.levels {
            return Err(Error::config(
                "coarse_level",
                format!("must be below levels ({}), got {}", self.levels, self.coarse_level),
            ));
        }
        let start = self.start_level();
        if start < self.coarse_level || (self.mode != Mode::Adaptive && start >= self.levels) {
            return Err(Error::config(
                "start_level",
                format!("must lie in [coarse_level, levels), got {start}"),
            ));
        }
        if self.mode == Mode::Adaptive && (self.coarse_level != 0 || start != 0) {
            return Err(Error::config(
                "coarse_level",
                "adaptive runs use the initial mesh for both V_H and the first solve",
            ));
        }
        positive("c_mg", self.c_mg)?;
        if self.mg_max_cycles == 0 {
            return Err(Error::config("mg_max_cycles", "must be at least 1"));
        }
        if self.mg_pre_sweeps + self.mg_post_sweeps == 0 {
            return Err(Error::config("mg_pre_sweeps", "at least one smoothing sweep is required"));
        }
        positive("scf_lambda_tol", self.scf_lambda_tol)?;
        positive("scf_u_tol", self.scf_u_tol)?;
        self.scf().validate()?;
        positive("inner_tol", self.inner_tol)?;
        if self.inner_max_iter == 0 {
            return Err(Error::config("inner_max_iter", "must be at least 1"));
        }
        if !(self.dorfler_theta > 0.0 && self.dorfler_theta < 1.0) {
            return Err(Error::config(
                "dorfler_theta",
                format!("must lie in (0, 1), got {}", self.dorfler_theta),
            ));
        }
        if self.mode == Mode::Adaptive && self.adaptive_iterations == 0 {
            return Err(Error::config("adaptive_iterations", "must be at least 1"));
        }
        match self.reference {
            ReferenceMode::ExtraLevel => {
                if self.reference_extra_levels == 0 {
                    return Err(Error::config("reference_extra_levels", "must be at least 1"));
                }
            }
            ReferenceMode::File => {
                if self.reference_file.is_none() {
                    return Err(Error::config("reference_file", "required when reference = \"file\""));
                }
            }
        }
        Ok(())
    }
}

/// Command-line overrides applied on top of a configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub domain: Option<Domain>,
    pub zeta: Option<f64>,
    pub levels: Option<usize>,
    pub base_n: Option<usize>,
    pub mode: Option<Mode>,
    pub theta: Option<f64>,
    pub out_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(d) = self.domain {
            cfg.domain = d;
        }
        if let Some(z) = self.zeta {
            cfg.zeta = z;
        }
        if let Some(l) = self.levels {
            cfg.levels = l;
        }
        if let Some(n) = self.base_n {
            cfg.base_n = n;
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(t) = self.theta {
            cfg.dorfler_theta = t;
        }
        if let Some(o) = &self.out_dir {
            cfg.out_dir = o.clone();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = RunConfig::from_toml_str("domain = \"l-shape\"\nlevels = 3\nmode = \"adaptive\"\n").unwrap();
        assert_eq!(cfg.domain, Domain::LShape);
        assert_eq!(cfg.levels, 3);
        assert_eq!(cfg.mode, Mode::Adaptive);
        assert_eq!(cfg.base_n, RunConfig::default().base_n);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml_str("levelz = 3"), Err(Error::Parse(_))));
    }

    #[test]
    fn validation_names_the_field() {
        let cfg = RunConfig {
            dorfler_theta: 1.5,
            ..RunConfig::default()
        };
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "dorfler_theta"),
            other => panic!("unexpected {other:?}"),
        }
        let cfg = RunConfig {
            levels: 0,
            ..RunConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "levels"));
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = RunConfig::default();
        Overrides {
            zeta: Some(3.0),
            mode: Some(Mode::Direct),
            ..Overrides::default()
        }
        .apply(&mut cfg);
        assert_eq!(cfg.zeta, 3.0);
        assert_eq!(cfg.mode, Mode::Direct);
        assert_eq!("both".parse::<Mode>().unwrap(), Mode::Both);
        assert!("sideways".parse::<Mode>().is_err());
    }
}
