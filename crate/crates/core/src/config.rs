//! Run configuration: one TOML file selects the map, the noise kernel,
//! the truncations, and the comparison grid. The configuration's content
//! hash is stamped into every output file, so each emitted number stays
//! traceable to the exact settings that produced it.

use crate::direct::REFINE_TOL;
use crate::error::{Error, Result};
use crate::local_op::NoiseKernel;
use crate::maps::{linear_map, poly_map, quartic_map, Map};
use crate::pipeline::TruncationSizes;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Which map the run studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MapConfig {
    /// The built-in bimodal quartic repeller on `[0, 1]`.
    Quartic,
    /// A single expanding linear branch `f(x) = lambda·x`.
    Linear { lambda: f64 },
    /// `f(x) = Σ coefficients[k] xᵏ` with an explicit partition of the
    /// domain into monotone branches.
    Polynomial {
        coefficients: Vec<f64>,
        partition: Vec<f64>,
        domain: [f64; 2],
    },
}

/// Which noise kernel enters the σ-expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelConfig {
    /// Zero-mean unit Gaussian: `a_{2n} = (2n-1)!!`, odd moments zero.
    Gaussian,
    /// A kernel given by its raw moment table `a_0, a_1, …`, which must
    /// reach at least index `sigma_order`.
    Moments { moments: Vec<f64> },
}

/// Numerical gates, each strictly inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Largest orbit-condition defect accepted when locating cycles.
    pub cycle_residual: f64,
    /// Acceptance threshold on the spectral-determinant residual
    /// `|1 - Σ Q_{n,0} z₀ⁿ|` at the located noiseless root.
    pub newton: f64,
    /// Relative settling demanded of the direct-solver quadratures. The
    /// built-in rules refine until entries stop moving at the
    /// [`REFINE_TOL`] level, so a tighter request is refused up front.
    pub quadrature: f64,
}

impl Default for Tolerances {
    fn default() -> Tolerances {
        Tolerances {
            cycle_residual: 1e-12,
            newton: 1e-13,
            quadrature: REFINE_TOL,
        }
    }
}

/// Settings for the finite-noise comparison stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DirectSettings {
    /// Bin count of the lattice discretization (at least 32).
    pub lattice_bins: usize,
}

impl Default for DirectSettings {
    fn default() -> DirectSettings {
        DirectSettings { lattice_bins: 1024 }
    }
}

/// Everything one batch run needs. Every field except the map has a
/// default, so a minimal file is just `[map]` + `kind = "quartic"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Longest cycle length entering the expansion.
    #[serde(default = "defaults::n_max")]
    pub n_max: usize,
    /// Highest power of σ carried through the pipeline.
    #[serde(default = "defaults::sigma_order")]
    pub sigma_order: usize,
    /// Basis truncations per trace length: non-increasing, with the last
    /// entry covering all longer traces.
    #[serde(default = "defaults::l_sizes")]
    pub l_sizes: Vec<usize>,
    /// σ values for the finite-noise comparison, strictly ascending.
    #[serde(default = "defaults::sigma_grid")]
    pub sigma_grid: Vec<f64>,
    /// Directory the output files are written into.
    #[serde(default = "defaults::out_dir")]
    pub out_dir: PathBuf,
    pub map: MapConfig,
    #[serde(default = "defaults::kernel")]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub direct: DirectSettings,
}

mod defaults {
    use super::KernelConfig;
    use std::path::PathBuf;

    pub fn n_max() -> usize {
        10
    }

    pub fn sigma_order() -> usize {
        10
    }

    pub fn l_sizes() -> Vec<usize> {
        vec![26, 20, 16]
    }

    /// A fine grid through the weak-noise regime (where the σ¹⁰ tail is
    /// resolvable) plus a coarse tail into visible-divergence territory.
    pub fn sigma_grid() -> Vec<f64> {
        let mut grid: Vec<f64> = (6..=16).map(|i| i as f64 * 0.005).collect();
        grid.extend([0.1, 0.12, 0.15, 0.2, 0.25, 0.3]);
        grid
    }

    pub fn out_dir() -> PathBuf {
        PathBuf::from("out")
    }

    pub fn kernel() -> KernelConfig {
        KernelConfig::Gaussian
    }
}

impl RunConfig {
    /// The default configuration around the quartic repeller — the run
    /// that reproduces the reference coefficient table.
    pub fn quartic() -> RunConfig {
        RunConfig {
            n_max: defaults::n_max(),
            sigma_order: defaults::sigma_order(),
            l_sizes: defaults::l_sizes(),
            sigma_grid: defaults::sigma_grid(),
            out_dir: defaults::out_dir(),
            map: MapConfig::Quartic,
            kernel: defaults::kernel(),
            tolerances: Tolerances::default(),
            direct: DirectSettings::default(),
        }
    }

    /// Parses and validates a configuration from TOML text.
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// The canonical serialization: fixed key order, shortest
    /// round-trippable floats. Two configs with equal fields always
    /// produce byte-identical text (and therefore equal hashes), no
    /// matter how their source files were formatted.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Reads, parses, and validates a configuration file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::from_toml_str(&text)
    }

    /// Writes the canonical serialization.
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    /// SHA-256 of the canonical serialization, as lowercase hex. The
    /// output directory is excluded: it has no bearing on any computed
    /// number, and the same run sent to two places should hash the same.
    pub fn content_hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.out_dir = defaults::out_dir();
        let digest = Sha256::digest(canonical.to_toml_string()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Checks every invariant the numeric stages rely on. Map and kernel
    /// parameters are vetted by actually building them, so nothing here
    /// can drift out of sync with the constructors.
    pub fn validate(&self) -> Result<()> {
        if !(1..=24).contains(&self.n_max) {
            return Err(Error::InvalidConfig(format!(
                "n_max = {} is outside 1..=24",
                self.n_max
            )));
        }
        if self.sigma_order == 0 {
            return Err(Error::InvalidConfig("sigma_order must be positive".into()));
        }
        self.truncations()?;
        self.build_map()?;
        self.build_kernel()?;
        if self.sigma_grid.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidConfig(
                "σ grid entries must be positive and finite".into(),
            ));
        }
        if self.sigma_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "σ grid must be strictly ascending".into(),
            ));
        }
        let t = &self.tolerances;
        for (name, value) in [
            ("cycle_residual", t.cycle_residual),
            ("newton", t.newton),
            ("quadrature", t.quadrature),
        ] {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "tolerance {name} = {value} is outside (0, 1)"
                )));
            }
        }
        if t.quadrature < REFINE_TOL {
            return Err(Error::InvalidConfig(format!(
                "quadrature tolerance {} is tighter than the {REFINE_TOL:e} \
                 the direct-solver rules are refined to",
                t.quadrature
            )));
        }
        if self.direct.lattice_bins < 32 {
            return Err(Error::InvalidConfig(format!(
                "lattice_bins = {} is too coarse (need at least 32)",
                self.direct.lattice_bins
            )));
        }
        Ok(())
    }

    /// Instantiates the configured map.
    pub fn build_map(&self) -> Result<Box<dyn Map>> {
        Ok(match &self.map {
            MapConfig::Quartic => Box::new(quartic_map()),
            MapConfig::Linear { lambda } => Box::new(linear_map(*lambda)?),
            MapConfig::Polynomial {
                coefficients,
                partition,
                domain,
            } => Box::new(poly_map(
                "polynomial",
                coefficients.clone(),
                partition.clone(),
                (domain[0], domain[1]),
            )?),
        })
    }

    /// Instantiates the configured kernel through σ^`sigma_order`.
    pub fn build_kernel(&self) -> Result<NoiseKernel> {
        match &self.kernel {
            KernelConfig::Gaussian => Ok(NoiseKernel::gaussian(self.sigma_order)),
            KernelConfig::Moments { moments } => {
                if moments.len() <= self.sigma_order {
                    return Err(Error::InvalidConfig(format!(
                        "kernel moment table has {} entries but sigma_order = {} \
                         needs a_0..a_{}",
                        moments.len(),
                        self.sigma_order,
                        self.sigma_order
                    )));
                }
                NoiseKernel::from_moments("custom", moments[..=self.sigma_order].to_vec())
            }
        }
    }

    /// The per-trace-length basis truncations.
    pub fn truncations(&self) -> Result<TruncationSizes> {
        TruncationSizes::new(self.l_sizes.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_file_fills_in_every_default() {
        let parsed = RunConfig::from_toml_str("[map]\nkind = \"quartic\"\n").unwrap();
        assert_eq!(parsed, RunConfig::quartic());
        assert_eq!(parsed.n_max, 10);
        assert_eq!(parsed.sigma_order, 10);
        assert_eq!(parsed.l_sizes, vec![26, 20, 16]);
        assert_eq!(parsed.tolerances.cycle_residual, 1e-12);
        assert_eq!(parsed.direct.lattice_bins, 1024);
    }

    #[test]
    fn round_trip_is_the_identity() {
        let config = RunConfig::quartic();
        let text = config.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), config);

        let custom = RunConfig {
            map: MapConfig::Polynomial {
                coefficients: vec![0.0, 6.0, -6.0],
                partition: vec![0.0, 0.5, 1.0],
                domain: [0.0, 1.0],
            },
            kernel: KernelConfig::Moments {
                moments: vec![1.0, 0.0, 1.0, 0.0, 3.0],
            },
            sigma_order: 4,
            out_dir: PathBuf::from("elsewhere/deep"),
            ..RunConfig::quartic()
        };
        let text = custom.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), custom);
    }

    #[test]
    fn hash_ignores_formatting_but_not_values() {
        let sparse = RunConfig::from_toml_str("[map]\nkind = \"quartic\"\n").unwrap();
        let noisy = RunConfig::from_toml_str(
            "# a comment\nn_max = 10\n\n[map]\nkind    = \"quartic\"   # same map\n",
        )
        .unwrap();
        assert_eq!(
            sparse.content_hash().unwrap(),
            noisy.content_hash().unwrap()
        );
        let mut other = sparse.clone();
        other.n_max = 9;
        assert_ne!(
            sparse.content_hash().unwrap(),
            other.content_hash().unwrap()
        );
        // the output directory influences no number, so not the hash either
        let mut moved = sparse.clone();
        moved.out_dir = PathBuf::from("elsewhere");
        assert_eq!(
            sparse.content_hash().unwrap(),
            moved.content_hash().unwrap()
        );
    }

    #[test]
    fn validation_rejects_each_bad_field() {
        let reject = |mutate: &dyn Fn(&mut RunConfig)| {
            let mut config = RunConfig::quartic();
            mutate(&mut config);
            assert!(
                matches!(config.validate(), Err(Error::InvalidConfig(_))),
                "expected rejection"
            );
        };
        reject(&|c| c.n_max = 0);
        reject(&|c| c.n_max = 25);
        reject(&|c| c.sigma_order = 0);
        reject(&|c| c.l_sizes = vec![16, 20]);
        reject(&|c| c.l_sizes.clear());
        reject(&|c| c.sigma_grid = vec![0.1, 0.1]);
        reject(&|c| c.sigma_grid = vec![-0.1, 0.2]);
        reject(&|c| c.sigma_grid = vec![0.1, f64::NAN]);
        reject(&|c| c.tolerances.newton = 0.0);
        reject(&|c| c.tolerances.cycle_residual = 1.0);
        reject(&|c| c.tolerances.quadrature = 1e-14);
        reject(&|c| c.direct.lattice_bins = 16);
        reject(&|c| {
            c.map = MapConfig::Linear { lambda: 0.5 };
        });
        reject(&|c| {
            c.kernel = KernelConfig::Moments {
                moments: vec![1.0, 0.0, 1.0],
            };
        });
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        // root-level typos are caught; keys inside the [map] table are
        // the internally-tagged enum's business and slide through serde
        let err = RunConfig::from_toml_str("n_mxa = 9\n[map]\nkind = \"quartic\"\n");
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
        let err =
            RunConfig::from_toml_str("[tolerances]\nnewtn = 1e-9\n[map]\nkind = \"quartic\"\n");
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn custom_moment_kernel_matches_the_gaussian_table() {
        let config = RunConfig {
            kernel: KernelConfig::Moments {
                moments: vec![1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0],
            },
            sigma_order: 6,
            ..RunConfig::quartic()
        };
        let custom = config.build_kernel().unwrap();
        let gaussian = NoiseKernel::gaussian(6);
        assert_eq!(custom.sigma_order(), 6);
        for n in 0..=6 {
            assert_eq!(custom.moment(n), gaussian.moment(n));
            assert_eq!(custom.weight(n), gaussian.weight(n));
        }
    }

    proptest! {
        #[test]
        fn round_trip_preserves_arbitrary_fields(
            lambda in 1.5f64..40.0,
            n_max in 1usize..=24,
            sigma_order in 1usize..=16,
            base in 5usize..=30,
            steps in proptest::collection::vec(0usize..=3, 1..=4),
            grid_start in 0.01f64..0.1,
            grid_gaps in proptest::collection::vec(1e-3f64..0.05, 0..=6),
            bins in 32usize..=4096,
        ) {
            // non-increasing truncation sizes by construction
            let mut l_sizes = vec![base];
            for step in steps {
                l_sizes.push(l_sizes.last().unwrap().saturating_sub(step).max(1));
            }
            let mut sigma_grid = vec![grid_start];
            for gap in grid_gaps {
                sigma_grid.push(sigma_grid.last().unwrap() + gap);
            }
            let config = RunConfig {
                n_max,
                sigma_order,
                l_sizes,
                sigma_grid,
                map: MapConfig::Linear { lambda },
                direct: DirectSettings { lattice_bins: bins },
                ..RunConfig::quartic()
            };
            config.validate().unwrap();
            let text = config.to_toml_string().unwrap();
            prop_assert_eq!(RunConfig::from_toml_str(&text).unwrap(), config);
        }
    }
}
