//! Experiment configuration: one TOML file, overridable from the command line.

use std::path::{Path, PathBuf};

use hawkes_renewal::{Kernel, Segment};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lambda: Option<f64>,
    /// `[start, end, value]` triples; empty means `h ≡ 0`.
    #[serde(default)]
    pub kernel: Vec<[f64; 3]>,
    #[serde(default = "defaults::horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::replicas")]
    pub replicas: u64,
    #[serde(default = "defaults::parallelism")]
    pub parallelism: usize,
    #[serde(default = "defaults::output")]
    pub output: PathBuf,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub windows: WindowsSection,
    #[serde(default)]
    pub rate: RateSection,
    #[serde(default)]
    pub validate: ValidateSection,
    #[serde(default)]
    pub deviations: DeviationsSection,
}

mod defaults {
    use std::path::PathBuf;

    pub fn horizon() -> f64 {
        100.0
    }
    pub fn replicas() -> u64 {
        1
    }
    pub fn parallelism() -> usize {
        1
    }
    pub fn output() -> PathBuf {
        PathBuf::from("out")
    }
    pub fn windows() -> usize {
        100_000
    }
    pub fn seeds() -> u64 {
        1000
    }
    pub fn clt_replicas() -> usize {
        2000
    }
    pub fn clt_t() -> f64 {
        500.0
    }
    pub fn clt_threshold() -> f64 {
        0.05
    }
    pub fn kappa() -> f64 {
        0.5
    }
    pub fn kappa_prime() -> f64 {
        0.25
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("every field has a default")
    }
}

/// Kernels run together from one candidate stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Member {
    /// The configured kernel.
    #[serde(rename = "h")]
    H,
    /// Its positive part.
    #[serde(rename = "h+")]
    HPlus,
    /// `-λ 1_[0, L(h)]`, the canceling minorant.
    #[serde(rename = "g")]
    G,
}

impl std::str::FromStr for Member {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "h" => Ok(Member::H),
            "h+" => Ok(Member::HPlus),
            "g" => Ok(Member::G),
            other => Err(format!(
                "unknown coupling member '{other}' (expected h, h+ or g)"
            )),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Empty runs `h` alone.
    #[serde(default)]
    pub coupling: Vec<Member>,
    pub max_events: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowsSection {
    /// Simulate until this many windows close instead of using `horizon`.
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Oracle,
    Analytic,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            start: 0.1,
            stop: 0.9,
            step: 0.1,
        }
    }
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl std::str::FromStr for GridSpec {
    type Err = String;

    /// `start:stop:step`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(format!("grid '{s}' is not start:stop:step"));
        };
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| format!("grid '{s}': {e}"))
        };
        Ok(Self {
            start: num(start)?,
            stop: num(stop)?,
            step: num(step)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSection {
    pub source: Option<Source>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "defaults::windows")]
    pub windows: usize,
}

impl Default for RateSection {
    fn default() -> Self {
        Self {
            source: None,
            grid: GridSpec::default(),
            windows: defaults::windows(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    pub suite: Option<String>,
    /// Seeds for the coupling suite.
    #[serde(default = "defaults::seeds")]
    pub seeds: u64,
    #[serde(default = "defaults::windows")]
    pub windows: usize,
    #[serde(default = "defaults::clt_replicas")]
    pub clt_replicas: usize,
    #[serde(default = "defaults::clt_t")]
    pub clt_t: f64,
    #[serde(default = "defaults::clt_threshold")]
    pub clt_threshold: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            suite: None,
            seeds: defaults::seeds(),
            windows: defaults::windows(),
            clt_replicas: defaults::clt_replicas(),
            clt_t: defaults::clt_t(),
            clt_threshold: defaults::clt_threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviationsSection {
    pub a: Option<f64>,
    #[serde(default = "defaults::kappa")]
    pub kappa: f64,
    #[serde(default = "defaults::kappa_prime")]
    pub kappa_prime: f64,
    pub source: Option<Source>,
    #[serde(default = "defaults::windows")]
    pub windows: usize,
}

impl Default for DeviationsSection {
    fn default() -> Self {
        Self {
            a: None,
            kappa: defaults::kappa(),
            kappa_prime: defaults::kappa_prime(),
            source: None,
            windows: defaults::windows(),
        }
    }
}

/// Kernels with closed-form laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "case", rename_all = "lowercase")]
pub enum Case {
    /// `h ≡ 0`.
    Poisson,
    /// `-λ 1_[0, A]`.
    Canceling {
        a: f64,
    },
    /// `-λ 1_[r, r + A]`.
    Delayed {
        r: f64,
        a: f64,
    },
    /// `h ≥ 0`.
    Linear {
        h_l1: f64,
    },
    General,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn lambda(&self) -> Result<f64, CliError> {
        self.lambda
            .ok_or_else(|| CliError::Config("lambda is required (config key or --lambda)".into()))
    }

    pub fn kernel(&self) -> Result<Kernel, CliError> {
        Kernel::new(self.kernel.iter().map(|&[s, e, v]| Segment::new(s, e, v)))
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Checks every value against the preconditions of the code it feeds.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let lambda = self.lambda()?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {lambda}"));
        }
        self.kernel()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".into());
        }
        if self.windows.count == Some(0) {
            return bad("windows.count must be at least 1".into());
        }
        let g = &self.rate.grid;
        if !(g.step > 0.0 && g.start > 0.0 && g.stop >= g.start && g.stop.is_finite()) {
            return bad(format!(
                "rate.grid needs 0 < start <= stop and step > 0, got {}:{}:{}",
                g.start, g.stop, g.step
            ));
        }
        let v = &self.validate;
        if v.seeds == 0 || v.windows < 2 {
            return bad("validate.seeds must be >= 1 and validate.windows >= 2".into());
        }
        if v.clt_replicas < 500 {
            return bad(format!(
                "validate.clt_replicas must be >= 500, got {}",
                v.clt_replicas
            ));
        }
        if !(v.clt_threshold > 0.0 && v.clt_threshold < 1.0) {
            return bad(format!(
                "validate.clt_threshold must lie in (0, 1), got {}",
                v.clt_threshold
            ));
        }
        if let Some(a) = self.deviations.a {
            if !(a > 0.0 && a.is_finite()) {
                return bad(format!("deviations.a must be positive, got {a}"));
            }
        }
        Ok(())
    }

    pub fn case(&self) -> Result<Case, CliError> {
        let lambda = self.lambda()?;
        let kernel = self.kernel()?;
        Ok(classify(&kernel, lambda))
    }
}

pub fn classify(kernel: &Kernel, lambda: f64) -> Case {
    if kernel.is_zero() {
        return Case::Poisson;
    }
    if kernel.is_nonnegative() {
        return Case::Linear {
            h_l1: kernel.positive_l1(),
        };
    }
    if let [seg] = kernel.segments() {
        if seg.value == -lambda {
            return if seg.start == 0.0 {
                Case::Canceling { a: seg.end }
            } else {
                Case::Delayed {
                    r: seg.start,
                    a: seg.end - seg.start,
                }
            };
        }
    }
    Case::General
}

/// Parses `start:end:value,start:end:value,...`; an empty string is `h ≡ 0`.
pub fn parse_kernel(s: &str) -> Result<Vec<[f64; 3]>, String> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let nums: Result<Vec<f64>, _> = p.split(':').map(|x| x.trim().parse::<f64>()).collect();
            match nums.map_err(|e| format!("kernel segment '{p}': {e}"))?[..] {
                [s, e, v] => Ok([s, e, v]),
                _ => Err(format!("kernel segment '{p}' is not start:end:value")),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("lambda = 1\nlamda = 2").is_err());
        assert!(
            toml::from_str::<ExperimentConfig>("lambda = 1\n[rate]\nsorce = 'oracle'").is_err()
        );
    }

    #[test]
    fn full_config_round_trips() {
        let text = r#"
            lambda = 2.0
            kernel = [[0.0, 1.0, -2.0]]
            horizon = 1e3
            seed = 9
            replicas = 3
            parallelism = 4
            output = "runs/a"

            [simulate]
            coupling = ["h", "h+"]

            [rate]
            source = "empirical"
            grid = { start = 0.2, stop = 0.8, step = 0.2 }

            [validate]
            suite = "renewal"

            [deviations]
            a = 0.5
        "#;
        let c: ExperimentConfig = toml::from_str(text).unwrap();
        c.validate().unwrap();
        assert_eq!(c.case().unwrap(), Case::Canceling { a: 1.0 });
        assert_eq!(c.simulate.coupling, vec![Member::H, Member::HPlus]);
        assert_eq!(c.rate.grid.points().len(), 4);
        let back: ExperimentConfig = toml::from_str(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut c = ExperimentConfig::default();
        assert!(c.validate().is_err());
        c.lambda = Some(1.0);
        c.validate().unwrap();
        c.kernel = vec![[0.0, 1.0, 1.5]];
        assert!(c.validate().is_err());
        c.kernel.clear();
        c.horizon = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn cases() {
        let k = |segs: &[[f64; 3]]| {
            Kernel::new(segs.iter().map(|&[s, e, v]| Segment::new(s, e, v))).unwrap()
        };
        assert_eq!(classify(&Kernel::zero(), 1.0), Case::Poisson);
        assert_eq!(
            classify(&k(&[[0.5, 1.5, -1.0]]), 1.0),
            Case::Delayed { r: 0.5, a: 1.0 }
        );
        assert_eq!(
            classify(&k(&[[0.0, 1.0, 0.5]]), 1.0),
            Case::Linear { h_l1: 0.5 }
        );
        assert_eq!(classify(&k(&[[0.0, 1.0, -0.5]]), 1.0), Case::General);
    }

    #[test]
    fn kernel_and_grid_flags() {
        assert_eq!(
            parse_kernel("0:1:0.5,1:2:-3").unwrap(),
            vec![[0.0, 1.0, 0.5], [1.0, 2.0, -3.0]]
        );
        assert!(parse_kernel("").unwrap().is_empty());
        assert!(parse_kernel("0:1").is_err());
        let g: GridSpec = "0.1:0.9:0.1".parse().unwrap();
        assert_eq!(g.points().len(), 9);
        assert!("1:2".parse::<GridSpec>().is_err());
    }
}
