//! Plain-text key/value experiment configuration.
//!
//! The file format is one `key = value` pair per line; `#` starts a comment.
//! Numbers may be written as rationals (`h = 100/92`), which keeps step
//! counts exact for awkward step sizes. Lists are comma-separated
//! (`h_grid = 0.1, 0.05, 0.025`); matrix rows (for custom tableaus) are
//! separated by semicolons (`rk_A = 0,0; 0.5,0`).
//!
//! Recognized keys, all optional (defaults reproduce the benchmark studies):
//!
//! ```text
//! # problem block
//! problem   = rigid_body_modified | harmonic
//! I1 = 2    I2 = 1    I3 = 2/3    alpha = 1
//! x0        = 0.4535961214255773, 0, 0.8912073600614354
//!
//! # method block
//! method            = dg_linear | dg_fixed_point | projection | rk
//! methods           = rk, projection, dg_linear     # for comparison studies
//! tableau           = rk4 | euler | implicit_midpoint
//! rk_A              = ...; ...                      # custom tableau rows
//! rk_b              = ...
//! rk_order          = 4
//! discrete_gradient = midpoint | mean_value | coordinate_increment
//! mv_nodes          = 3
//! i_tilde, i_hat, i_breve = at_x | at_xp | average | at_midpoint
//!                         | discrete | at_y | dg_at_y
//! denom_floor       = 0.5
//! fp_tol            = 1e-13
//! fp_max_iter       = 200
//! newton_tol        = 1e-12
//! newton_max        = 50
//! warm_start        = false
//! epsilon_crit      = 1e-14
//!
//! # grid block
//! h        = 0.5            # or a rational like 100/92
//! h_grid   = 0.1, 0.05, 0.025, 0.0125    # strictly decreasing
//! t_end    = 500
//! t_sample = 100
//! r_scales = 1, 0.1, 0.01
//! phase_h_list      = 0.5, 100/92
//! phase_denom_floor = 0.25   # the large-h phase runs sit beyond the
//!                            # conservative default floor on purpose
//! stepcrit_h_min_exp = -3.5
//! stepcrit_h_max_exp = 2
//! stepcrit_h_per_decade = 10
//!
//! # reference block
//! ref_divisor         = 100
//! ref_rel_tol         = 1e-11
//! ref_max_refinements = 3
//!
//! # output block
//! out_dir  = results
//! seed     = 12345
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::discrete_gradient::DiscreteGradientKind;
use crate::error::{Error, Result};
use crate::integrators::{
    DgFixedPoint, DgLinearlyImplicit, DgMethodConfig, ProjectionMethod, RungeKuttaStepper, Stepper,
};
use crate::problems::{harmonic_oscillator, rigid_body_modified, CriticalPointPolicy, OdeProblem};
use crate::rk::{euler_explicit, implicit_midpoint, rk4_classic, ButcherTableau};
use crate::skew::{GradientApproxChoice, SkewConfig};

/// Raw key/value pairs from a config file.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

fn parse_real(token: &str) -> Result<f64> {
    let t = token.trim();
    if let Some((num, den)) = t.split_once('/') {
        let n: f64 = num
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad rational numerator in {t:?}")))?;
        let d: f64 = den
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad rational denominator in {t:?}")))?;
        if d == 0.0 {
            return Err(Error::Config(format!("zero denominator in {t:?}")));
        }
        return Ok(n / d);
    }
    t.parse()
        .map_err(|_| Error::Config(format!("expected a number, got {t:?}")))
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(pos) => &line[..pos],
                None => line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().trim_matches('"').to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            entries.insert(key, value);
        }
        Ok(RawConfig { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn real(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(parse_real).transpose()
    }

    pub fn real_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.real(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{key}: expected an integer, got {v:?}"))),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{key}: expected an integer, got {v:?}"))),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => match v.trim().to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(Error::Config(format!(
                    "{key}: expected a bool, got {other:?}"
                ))),
            },
        }
    }

    pub fn reals(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(parse_real)
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    pub fn real_rows(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(';')
                .map(|row| row.split(',').map(parse_real).collect())
                .collect::<Result<Vec<Vec<f64>>>>()
                .map(Some),
        }
    }

    pub fn strings(&self, key: &str) -> Option<Vec<String>> {
        self.get(key)
            .map(|v| v.split(',').map(|s| s.trim().to_string()).collect())
    }
}

/// Which method a study runs; buildable into a [`Stepper`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MethodName {
    Rk,
    DgLinear,
    DgFixedPoint,
    Projection,
}

impl MethodName {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "rk" => Ok(MethodName::Rk),
            "dg_linear" => Ok(MethodName::DgLinear),
            "dg_fixed_point" => Ok(MethodName::DgFixedPoint),
            "projection" => Ok(MethodName::Projection),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            MethodName::Rk => "rk",
            MethodName::DgLinear => "dg_linear",
            MethodName::DgFixedPoint => "dg_fixed_point",
            MethodName::Projection => "projection",
        }
    }
}

fn parse_choice(s: &str) -> Result<GradientApproxChoice> {
    match s.trim() {
        "at_x" => Ok(GradientApproxChoice::AtX),
        "at_xp" => Ok(GradientApproxChoice::AtXPrime),
        "average" => Ok(GradientApproxChoice::Average),
        "at_midpoint" => Ok(GradientApproxChoice::AtMidpoint),
        "discrete" => Ok(GradientApproxChoice::DiscreteGrad),
        "at_y" => Ok(GradientApproxChoice::AtY),
        "dg_at_y" => Ok(GradientApproxChoice::DgAtY),
        other => Err(Error::Config(format!("unknown gradient choice {other:?}"))),
    }
}

/// Fully resolved experiment settings with benchmark defaults filled in.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub problem_name: String,
    pub moments: (f64, f64, f64),
    pub alpha: f64,
    pub x0: Vec<f64>,
    pub methods: Vec<MethodName>,
    pub single_method: MethodName,
    pub tableau_name: String,
    pub custom_tableau: Option<(Vec<Vec<f64>>, Vec<f64>, usize)>,
    pub dg_kind: DiscreteGradientKind,
    pub i_tilde: GradientApproxChoice,
    pub i_hat: GradientApproxChoice,
    pub i_breve: GradientApproxChoice,
    pub denom_floor: f64,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub warm_start: bool,
    pub epsilon_crit: f64,
    pub h: f64,
    pub h_grid: Vec<f64>,
    pub phase_h_list: Vec<f64>,
    pub phase_denom_floor: f64,
    pub t_end: f64,
    pub t_sample: f64,
    pub r_scales: Vec<f64>,
    pub stepcrit_h_min_exp: f64,
    pub stepcrit_h_max_exp: f64,
    pub stepcrit_h_per_decade: usize,
    pub ref_divisor: f64,
    pub ref_rel_tol: f64,
    pub ref_max_refinements: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Benchmark defaults: the modified rigid body with I = (2, 1, 2/3),
    /// alpha = 1, started at (cos 1.1, 0, sin 1.1).
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let x0_default = vec![1.1_f64.cos(), 0.0, 1.1_f64.sin()];
        let methods = match raw.strings("methods") {
            Some(names) => names
                .iter()
                .map(|n| MethodName::parse(n))
                .collect::<Result<Vec<_>>>()?,
            None => vec![MethodName::Rk, MethodName::Projection, MethodName::DgLinear],
        };
        let single_method = match raw.get("method") {
            Some(m) => MethodName::parse(m)?,
            None => MethodName::DgLinear,
        };
        let dg_kind = match raw.get("discrete_gradient").unwrap_or("midpoint") {
            "midpoint" => DiscreteGradientKind::MidpointQuadratic,
            "mean_value" => DiscreteGradientKind::MeanValue {
                nodes: raw.usize_or("mv_nodes", 3)?,
            },
            "coordinate_increment" => DiscreteGradientKind::CoordinateIncrement,
            other => {
                return Err(Error::Config(format!(
                    "unknown discrete_gradient {other:?}"
                )))
            }
        };
        let custom_tableau = match (raw.real_rows("rk_a")?, raw.reals("rk_b")?) {
            (Some(a), Some(b)) => Some((a, b, raw.usize_or("rk_order", 1)?)),
            (None, None) => None,
            _ => {
                return Err(Error::Config(
                    "custom tableau needs both rk_A and rk_b".into(),
                ))
            }
        };
        let h_grid = raw
            .reals("h_grid")?
            .unwrap_or_else(|| vec![0.1, 0.05, 0.025, 0.0125]);
        if h_grid.len() < 2 || h_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("h_grid must be strictly decreasing".into()));
        }
        let t_end = raw.real_or("t_end", 500.0)?;
        let t_sample = raw.real_or("t_sample", 100.0_f64.min(t_end))?;
        if t_sample > t_end {
            return Err(Error::Config("t_sample must not exceed t_end".into()));
        }
        let phase_h_list = raw
            .reals("phase_h_list")?
            .unwrap_or_else(|| vec![0.5, 100.0 / 92.0]);
        Ok(ExperimentConfig {
            problem_name: raw
                .get("problem")
                .unwrap_or("rigid_body_modified")
                .to_string(),
            moments: (
                raw.real_or("i1", 2.0)?,
                raw.real_or("i2", 1.0)?,
                raw.real_or("i3", 2.0 / 3.0)?,
            ),
            alpha: raw.real_or("alpha", 1.0)?,
            x0: raw.reals("x0")?.unwrap_or(x0_default),
            methods,
            single_method,
            tableau_name: raw.get("tableau").unwrap_or("rk4").to_string(),
            custom_tableau,
            dg_kind,
            i_tilde: parse_choice(raw.get("i_tilde").unwrap_or("at_x"))?,
            i_hat: parse_choice(raw.get("i_hat").unwrap_or("at_x"))?,
            i_breve: parse_choice(raw.get("i_breve").unwrap_or("dg_at_y"))?,
            denom_floor: raw.real_or("denom_floor", 0.5)?,
            fp_tol: raw.real_or("fp_tol", 1e-13)?,
            fp_max_iter: raw.usize_or("fp_max_iter", 200)?,
            newton_tol: raw.real_or("newton_tol", 1e-12)?,
            newton_max: raw.usize_or("newton_max", 50)?,
            warm_start: raw.bool_or("warm_start", false)?,
            epsilon_crit: raw.real_or("epsilon_crit", 1e-14)?,
            h: raw.real_or("h", 0.5)?,
            h_grid,
            phase_h_list,
            phase_denom_floor: raw.real_or("phase_denom_floor", 0.25)?,
            t_end,
            t_sample,
            r_scales: raw
                .reals("r_scales")?
                .unwrap_or_else(|| vec![1.0, 0.1, 0.01]),
            stepcrit_h_min_exp: raw.real_or("stepcrit_h_min_exp", -3.5)?,
            stepcrit_h_max_exp: raw.real_or("stepcrit_h_max_exp", 2.0)?,
            stepcrit_h_per_decade: raw.usize_or("stepcrit_h_per_decade", 10)?,
            ref_divisor: raw.real_or("ref_divisor", 100.0)?,
            ref_rel_tol: raw.real_or("ref_rel_tol", 1e-11)?,
            ref_max_refinements: raw.usize_or("ref_max_refinements", 3)?,
            out_dir: PathBuf::from(raw.get("out_dir").unwrap_or("results")),
            seed: raw.u64_or("seed", 12345)?,
        })
    }

    pub fn from_file_or_defaults(path: Option<&Path>) -> Result<Self> {
        let raw = match path {
            Some(p) => RawConfig::from_file(p)?,
            None => RawConfig::default(),
        };
        Self::from_raw(&raw)
    }

    pub fn build_problem(&self) -> Result<OdeProblem> {
        match self.problem_name.as_str() {
            "rigid_body_modified" => {
                rigid_body_modified(self.moments.0, self.moments.1, self.moments.2, self.alpha)
            }
            "harmonic" => Ok(harmonic_oscillator()),
            other => Err(Error::Config(format!("unknown problem {other:?}"))),
        }
    }

    pub fn build_tableau(&self) -> Result<ButcherTableau> {
        if let Some((a, b, order)) = &self.custom_tableau {
            return ButcherTableau::new(a.clone(), b.clone(), *order);
        }
        match self.tableau_name.as_str() {
            "rk4" => Ok(rk4_classic()),
            "euler" => Ok(euler_explicit()),
            "implicit_midpoint" => Ok(implicit_midpoint()),
            other => Err(Error::Config(format!("unknown tableau {other:?}"))),
        }
    }

    fn dg_method_config(&self) -> Result<DgMethodConfig> {
        let mut cfg = DgMethodConfig::new(self.build_tableau()?, self.dg_kind.clone());
        cfg.skew = SkewConfig {
            i_tilde: self.i_tilde,
            i_hat: self.i_hat,
            i_breve: self.i_breve,
            dg_kind: self.dg_kind.clone(),
            denom_floor: self.denom_floor,
        };
        cfg.fp_tol = self.fp_tol;
        cfg.fp_max_iter = self.fp_max_iter;
        cfg.critical = CriticalPointPolicy::new(self.epsilon_crit)?;
        cfg.warm_start = self.warm_start;
        Ok(cfg)
    }

    pub fn build_stepper(&self, method: &MethodName) -> Result<Box<dyn Stepper>> {
        Ok(match method {
            MethodName::Rk => Box::new(RungeKuttaStepper {
                tableau: self.build_tableau()?,
            }),
            MethodName::DgLinear => Box::new(DgLinearlyImplicit {
                cfg: self.dg_method_config()?,
            }),
            MethodName::DgFixedPoint => Box::new(DgFixedPoint {
                cfg: self.dg_method_config()?,
            }),
            MethodName::Projection => {
                let mut p = ProjectionMethod::new(self.build_tableau()?);
                p.newton_tol = self.newton_tol;
                p.newton_max = self.newton_max;
                p.critical = CriticalPointPolicy::new(self.epsilon_crit)?;
                Box::new(p)
            }
        })
    }

    /// Log-spaced step grid for the step-size criterion study.
    pub fn stepcrit_h_grid(&self) -> Vec<f64> {
        let per = self.stepcrit_h_per_decade.max(1) as f64;
        let mut hs = Vec::new();
        let mut e = self.stepcrit_h_min_exp;
        while e <= self.stepcrit_h_max_exp + 1e-12 {
            hs.push(10f64.powf(e));
            e += 1.0 / per;
        }
        hs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_basics() {
        let raw = RawConfig::parse(
            "# comment\nproblem = rigid_body_modified\nh = 100/92\nh_grid = 0.1, 0.05, 0.025\n\
             methods = rk, dg_linear\nwarm_start = true\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.problem_name, "rigid_body_modified");
        assert!((cfg.h - 100.0 / 92.0).abs() < 1e-15);
        assert_eq!(cfg.h_grid, vec![0.1, 0.05, 0.025]);
        assert_eq!(cfg.methods, vec![MethodName::Rk, MethodName::DgLinear]);
        assert!(cfg.warm_start);
    }

    #[test]
    fn defaults_reproduce_benchmark() {
        let cfg = ExperimentConfig::from_raw(&RawConfig::default()).unwrap();
        assert_eq!(cfg.moments, (2.0, 1.0, 2.0 / 3.0));
        assert_eq!(cfg.alpha, 1.0);
        assert_eq!(cfg.h, 0.5);
        assert_eq!(cfg.t_end, 500.0);
        assert_eq!(cfg.h_grid, vec![0.1, 0.05, 0.025, 0.0125]);
        assert!((cfg.x0[0] - 1.1_f64.cos()).abs() < 1e-15);
        let p = cfg.build_problem().unwrap();
        assert_eq!(p.dim(), 3);
        for m in &cfg.methods {
            let s = cfg.build_stepper(m).unwrap();
            assert_eq!(s.name(), m.as_str());
        }
    }

    #[test]
    fn grid_validation() {
        let raw = RawConfig::parse("h_grid = 0.1, 0.2\n").unwrap();
        assert!(ExperimentConfig::from_raw(&raw).is_err());
        let raw = RawConfig::parse("t_sample = 600\nt_end = 500\n").unwrap();
        assert!(ExperimentConfig::from_raw(&raw).is_err());
    }

    #[test]
    fn custom_tableau_round_trip() {
        let raw = RawConfig::parse("rk_A = 0,0; 0.5,0\nrk_b = 0,1\nrk_order = 2\n").unwrap();
        let cfg = ExperimentConfig::from_raw(&raw).unwrap();
        let tab = cfg.build_tableau().unwrap();
        assert_eq!(tab.stages(), 2);
        assert!(tab.is_explicit());
        assert_eq!(tab.claimed_order(), 2);
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(RawConfig::parse("just a line\n").is_err());
        let raw = RawConfig::parse("method = rk5\n").unwrap();
        assert!(ExperimentConfig::from_raw(&raw).is_err());
        let raw = RawConfig::parse("h = 1/0\n").unwrap();
        assert!(ExperimentConfig::from_raw(&raw).is_err());
        let raw = RawConfig::parse("rk_A = 0,0; 0.5,0\n").unwrap();
        assert!(ExperimentConfig::from_raw(&raw).is_err());
    }

    #[test]
    fn stepcrit_grid_is_log_spaced() {
        let cfg = ExperimentConfig::from_raw(&RawConfig::default()).unwrap();
        let hs = cfg.stepcrit_h_grid();
        assert!((hs[0] - 10f64.powf(-3.5)).abs() < 1e-18);
        assert!(hs.windows(2).all(|w| w[1] > w[0]));
        assert!(*hs.last().unwrap() <= 10f64.powf(2.0) * (1.0 + 1e-9));
    }
}
