//! Run configuration: flag groups, the config file, layering and echo.
//!
//! Every setting has one key. The flag is `--key-with-dashes` and the file
//! entry is `key_with_underscores` under its section. Flags override the
//! file; a flag for one member of an exclusive pair (`alpha`/`arl0`, the two
//! process parameterizations) discards the file's value for the other.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use rzchart_core::{alpha_from_arl0, Matrix2, StationaryLaw, Var1Model, Vector2};

/// A configuration problem the user has to fix. Exits with status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

macro_rules! overlay {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl $ty {
            /// Values set here win over `base`.
            pub fn over(self, base: Self) -> Self {
                Self { $($field: self.$field.or(base.$field)),* }
            }
        }
    };
}

#[derive(Args, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct ProcessArgs {
    /// Coefficient of variation of X (direct parameterization)
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_x: Option<f64>,
    /// Coefficient of variation of Y (direct parameterization)
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_y: Option<f64>,
    /// In-control correlation of X and Y (direct parameterization)
    #[arg(long, allow_hyphen_values = true)]
    pub rho0: Option<f64>,
    /// In-control mean ratio, default 1 (direct parameterization)
    #[arg(long, allow_hyphen_values = true)]
    pub z0: Option<f64>,
    /// Process mean of X (model parameterization)
    #[arg(long, allow_hyphen_values = true)]
    pub mu_x: Option<f64>,
    /// Process mean of Y (model parameterization)
    #[arg(long, allow_hyphen_values = true)]
    pub mu_y: Option<f64>,
    /// Innovation variance of X (model parameterization)
    #[arg(long, allow_hyphen_values = true)]
    pub sigma11: Option<f64>,
    /// Innovation covariance (model parameterization)
    #[arg(long, allow_hyphen_values = true)]
    pub sigma12: Option<f64>,
    /// Innovation variance of Y (model parameterization)
    #[arg(long, allow_hyphen_values = true)]
    pub sigma22: Option<f64>,
    /// Autoregressive coefficient, default 0
    #[arg(long, allow_hyphen_values = true)]
    pub phi11: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi12: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi21: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi22: Option<f64>,
}

impl ProcessArgs {
    fn has_direct(&self) -> bool {
        self.gamma_x.is_some() || self.gamma_y.is_some() || self.rho0.is_some() || self.z0.is_some()
    }

    fn has_model(&self) -> bool {
        self.mu_x.is_some()
            || self.mu_y.is_some()
            || self.sigma11.is_some()
            || self.sigma12.is_some()
            || self.sigma22.is_some()
    }

    pub fn over(self, mut base: Self) -> Self {
        if self.has_direct() {
            base = Self { mu_x: None, mu_y: None, sigma11: None, sigma12: None, sigma22: None, ..base };
        }
        if self.has_model() {
            base = Self { gamma_x: None, gamma_y: None, rho0: None, z0: None, ..base };
        }
        Self {
            gamma_x: self.gamma_x.or(base.gamma_x),
            gamma_y: self.gamma_y.or(base.gamma_y),
            rho0: self.rho0.or(base.rho0),
            z0: self.z0.or(base.z0),
            mu_x: self.mu_x.or(base.mu_x),
            mu_y: self.mu_y.or(base.mu_y),
            sigma11: self.sigma11.or(base.sigma11),
            sigma12: self.sigma12.or(base.sigma12),
            sigma22: self.sigma22.or(base.sigma22),
            phi11: self.phi11.or(base.phi11),
            phi12: self.phi12.or(base.phi12),
            phi21: self.phi21.or(base.phi21),
            phi22: self.phi22.or(base.phi22),
        }
    }

    pub fn resolve(&self) -> anyhow::Result<Process> {
        let phi = Matrix2::new(
            self.phi11.unwrap_or(0.0),
            self.phi12.unwrap_or(0.0),
            self.phi21.unwrap_or(0.0),
            self.phi22.unwrap_or(0.0),
        );
        match (self.has_direct(), self.has_model()) {
            (true, true) => Err(config_error(
                "give either gamma_x, gamma_y, rho0 (and z0) or mu_x, mu_y, sigma11, sigma12, sigma22, not both",
            )),
            (false, false) => Err(config_error(
                "no process given: set gamma_x, gamma_y, rho0 or mu_x, mu_y, sigma11, sigma12, sigma22",
            )),
            (true, false) => Ok(Process::Direct {
                gamma_x: required("gamma_x", self.gamma_x)?,
                gamma_y: required("gamma_y", self.gamma_y)?,
                rho0: required("rho0", self.rho0)?,
                z0: self.z0.unwrap_or(1.0),
                phi,
            }),
            (false, true) => {
                let s12 = required("sigma12", self.sigma12)?;
                Ok(Process::Model(Var1Model::new(
                    Vector2::new(required("mu_x", self.mu_x)?, required("mu_y", self.mu_y)?),
                    phi,
                    Matrix2::new(required("sigma11", self.sigma11)?, s12, s12, required("sigma22", self.sigma22)?),
                )?))
            }
        }
    }
}

/// The process in one of its two parameterizations.
#[derive(Debug, Clone)]
pub enum Process {
    Direct { gamma_x: f64, gamma_y: f64, rho0: f64, z0: f64, phi: Matrix2<f64> },
    Model(Var1Model),
}

impl Process {
    pub fn law(&self) -> rzchart_core::Result<StationaryLaw> {
        match self {
            Process::Direct { gamma_x, gamma_y, rho0, z0, phi } => {
                StationaryLaw::from_moments(*gamma_x, *gamma_y, *rho0, *phi, *z0)
            }
            Process::Model(m) => StationaryLaw::from_model(m),
        }
    }

    pub fn echo(&self, echo: &mut Echo) {
        echo.section("process");
        let phi = match self {
            Process::Direct { gamma_x, gamma_y, rho0, z0, phi } => {
                echo.num("gamma_x", *gamma_x);
                echo.num("gamma_y", *gamma_y);
                echo.num("rho0", *rho0);
                echo.num("z0", *z0);
                *phi
            }
            Process::Model(m) => {
                echo.num("mu_x", m.mu()[0]);
                echo.num("mu_y", m.mu()[1]);
                let s = m.sigma_eps();
                echo.num("sigma11", s[(0, 0)]);
                echo.num("sigma12", s[(0, 1)]);
                echo.num("sigma22", s[(1, 1)]);
                m.phi()
            }
        };
        echo.num("phi11", phi[(0, 0)]);
        echo.num("phi12", phi[(0, 1)]);
        echo.num("phi21", phi[(1, 0)]);
        echo.num("phi22", phi[(1, 1)]);
    }
}

#[derive(Args, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct DesignArgs {
    /// Subgroup size
    #[arg(long)]
    pub n: Option<usize>,
    /// False alarm probability per subgroup
    #[arg(long, conflicts_with = "arl0")]
    pub alpha: Option<f64>,
    /// In-control ARL, the reciprocal of alpha
    #[arg(long)]
    pub arl0: Option<f64>,
}

impl DesignArgs {
    pub fn over(self, base: Self) -> Self {
        let (alpha, arl0) =
            if self.alpha.is_some() || self.arl0.is_some() { (self.alpha, self.arl0) } else { (base.alpha, base.arl0) };
        Self { n: self.n.or(base.n), alpha, arl0 }
    }

    pub fn alpha(&self) -> anyhow::Result<f64> {
        match (self.alpha, self.arl0) {
            (Some(a), None) => Ok(a),
            (None, Some(arl0)) => Ok(alpha_from_arl0(arl0)?),
            (Some(_), Some(_)) => Err(config_error("give exactly one of alpha and arl0, not both")),
            (None, None) => Err(config_error("give exactly one of alpha and arl0")),
        }
    }

    pub fn n(&self) -> anyhow::Result<usize> {
        required("n", self.n)
    }
}

#[derive(Args, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct ShiftArgs {
    /// Shifted mean ratio as a multiple of z0, default 1
    #[arg(long)]
    pub tau: Option<f64>,
    /// Out-of-control correlation, default rho0
    #[arg(long, allow_hyphen_values = true)]
    pub rho1: Option<f64>,
}

overlay!(ShiftArgs { tau, rho1 });

#[derive(Args, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct EarlArgs {
    /// Shift interval such as "[0.9,1)" or "(1,1.1]"
    #[arg(long)]
    pub interval: Option<String>,
    /// "gauss-legendre" (uniform density) or "grid" (mean over a tau grid)
    #[arg(long)]
    pub method: Option<String>,
    /// Gauss-Legendre order, default 64
    #[arg(long)]
    pub order: Option<usize>,
    /// Grid spacing, default 0.01
    #[arg(long)]
    pub step: Option<f64>,
}

overlay!(EarlArgs { interval, method, order, step });

#[derive(Args, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct SimArgs {
    /// Seed of the random stream, default 1
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of simulated runs, default 10000
    #[arg(long)]
    pub replications: Option<usize>,
    /// Runs without a signal are censored here, default 1000000
    #[arg(long)]
    pub max_run_length: Option<u64>,
    /// Write this many simulated subgroups instead of run lengths
    #[arg(long, conflicts_with = "series")]
    pub subgroups: Option<usize>,
    /// Write one continuous series of this length (`x,y`) instead of run lengths
    #[arg(long)]
    pub series: Option<usize>,
}

overlay!(SimArgs { seed, replications, max_run_length, subgroups, series });

#[derive(Args, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct TableArgs {
    /// Built-in limit/ARL grid, 1-7
    #[arg(long, conflicts_with = "figure")]
    pub preset: Option<u32>,
    /// Built-in EARL-versus-phi grid, 1 or 2
    #[arg(long)]
    pub figure: Option<u32>,
    /// Subgroup sizes, e.g. "2,5,7"
    #[arg(long)]
    pub n_values: Option<String>,
    /// (gamma_x:gamma_y) pairs, e.g. "0.01:0.01,0.2:0.2"
    #[arg(long)]
    pub gamma_values: Option<String>,
    /// (rho0:rho1) pairs, e.g. "-0.8:-0.8,0.4:0.2"
    #[arg(long, allow_hyphen_values = true)]
    pub rho_values: Option<String>,
    /// (phi11:phi22) pairs, e.g. "0.1:0.1,0.7:0.7"
    #[arg(long)]
    pub phi_values: Option<String>,
    /// Shift sizes, e.g. "0.9,0.95"
    #[arg(long)]
    pub tau_values: Option<String>,
    /// phi11 axis of an EARL grid
    #[arg(long)]
    pub phi11_values: Option<String>,
    /// phi22 axis of an EARL grid
    #[arg(long)]
    pub phi22_values: Option<String>,
    /// Shift intervals of an EARL grid, separated by ";"
    #[arg(long)]
    pub interval_values: Option<String>,
}

overlay!(TableArgs {
    preset,
    figure,
    n_values,
    gamma_values,
    rho_values,
    phi_values,
    tau_values,
    phi11_values,
    phi22_values,
    interval_values,
});

#[derive(Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct InputArgs {
    pub data: Option<PathBuf>,
    pub example: Option<bool>,
}

overlay!(InputArgs { data, example });

#[derive(Args, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct EstimationArgs {
    /// Shortest series accepted, default 10
    #[arg(long)]
    pub min_length: Option<usize>,
    /// Residual cross-correlations are reported up to this lag, default 5
    #[arg(long)]
    pub max_lag: Option<usize>,
}

overlay!(EstimationArgs { min_length, max_lag });

/// Contents of a `--config` file. `command`, `version` and a `[result]`
/// section are accepted and ignored so that an echoed header can be fed
/// back in.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub command: Option<String>,
    pub version: Option<String>,
    pub process: ProcessArgs,
    pub design: DesignArgs,
    pub shift: ShiftArgs,
    pub earl: EarlArgs,
    pub simulation: SimArgs,
    pub table: TableArgs,
    pub input: InputArgs,
    pub estimation: EstimationArgs,
    pub result: Option<toml::Table>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&config_text(&text)).map_err(|e| config_error(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// An rzchart output starts with its echoed configuration. For such a file
/// the config is that header with the `# ` prefixes removed, followed by the
/// body when the body is itself TOML (as `estimate` writes).
fn config_text(text: &str) -> String {
    if !text.starts_with("# version = ") {
        return text.to_string();
    }
    let header_len = text.lines().take_while(|l| l.starts_with('#')).count();
    let mut out: String =
        text.lines().take(header_len).map(|l| format!("{}\n", l.trim_start_matches('#').trim_start())).collect();
    let body: String = text.lines().skip(header_len).map(|l| format!("{l}\n")).collect();
    if body.parse::<toml::Table>().is_ok() {
        out.push_str(&body);
    }
    out
}

pub fn required<T>(name: &str, v: Option<T>) -> anyhow::Result<T> {
    v.ok_or_else(|| config_error(format!("missing required setting `{name}`")))
}

/// The resolved configuration, written as `# key = value` lines ahead of
/// every output. Stripping the `# ` prefixes gives a config file that
/// reproduces the run.
#[derive(Debug, Default)]
pub struct Echo {
    lines: Vec<String>,
}

impl Echo {
    pub fn new(command: &str) -> Self {
        let mut e = Self::default();
        e.text("version", env!("CARGO_PKG_VERSION"));
        e.text("command", command);
        e
    }

    pub fn section(&mut self, name: &str) {
        self.lines.push(format!("[{name}]"));
    }

    /// Floats use the shortest form that parses back to the same value.
    pub fn num(&mut self, key: &str, v: f64) {
        self.lines.push(format!("{key} = {v:?}"));
    }

    pub fn int(&mut self, key: &str, v: impl fmt::Display) {
        self.lines.push(format!("{key} = {v}"));
    }

    pub fn text(&mut self, key: &str, v: &str) {
        self.lines.push(format!("{key} = {}", toml::Value::String(v.to_string())));
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }
}

/// Comma-separated numbers.
pub fn parse_list<T: std::str::FromStr>(key: &str, text: &str) -> anyhow::Result<Vec<T>> {
    let items: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(config_error(format!("`{key}` is empty")));
    }
    items.iter().map(|s| s.parse().map_err(|_| config_error(format!("`{key}`: cannot parse `{s}`")))).collect()
}

/// Comma-separated `a:b` pairs.
pub fn parse_pairs(key: &str, text: &str) -> anyhow::Result<Vec<(f64, f64)>> {
    parse_list::<String>(key, text)?
        .iter()
        .map(|item| {
            let bad = || config_error(format!("`{key}`: expected `a:b`, got `{item}`"));
            let (a, b) = item.split_once(':').ok_or_else(bad)?;
            Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

pub fn join_list<T: fmt::Debug>(values: &[T]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

pub fn join_pairs(values: &[(f64, f64)]) -> String {
    values.iter().map(|(a, b)| format!("{a:?}:{b:?}")).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = FileConfig::parse("[design]\nn = 5\narl0 = 370\n[shift]\ntau = 0.9\n").unwrap();
        let flags = DesignArgs { n: None, alpha: Some(0.005), arl0: None };
        let d = flags.over(file.design);
        assert_eq!(d.n, Some(5));
        assert_eq!(d.alpha().unwrap(), 0.005);
        let s = ShiftArgs { tau: None, rho1: Some(0.2) }.over(file.shift);
        assert_eq!((s.tau, s.rho1), (Some(0.9), Some(0.2)));
    }

    #[test]
    fn exclusive_settings() {
        assert!(DesignArgs { n: Some(5), alpha: Some(0.1), arl0: Some(10.0) }.alpha().is_err());
        assert!(DesignArgs { n: Some(5), alpha: None, arl0: None }.alpha().is_err());
        let mixed = ProcessArgs { gamma_x: Some(0.1), mu_x: Some(1.0), ..Default::default() };
        assert!(mixed.resolve().is_err());
        let file = ProcessArgs {
            mu_x: Some(1.0),
            mu_y: Some(1.0),
            sigma11: Some(1.0),
            sigma12: Some(0.0),
            sigma22: Some(1.0),
            ..Default::default()
        };
        let flags = ProcessArgs { gamma_x: Some(0.1), gamma_y: Some(0.1), rho0: Some(0.0), ..Default::default() };
        assert!(matches!(flags.over(file).resolve().unwrap(), Process::Direct { .. }));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(FileConfig::parse("[design]\nnn = 5\n").is_err());
        assert!(FileConfig::parse("[sim]\nseed = 5\n").is_err());
    }

    #[test]
    fn echo_parses_back() {
        let mut e = Echo::new("design");
        let p =
            Process::Direct { gamma_x: 0.1, gamma_y: 1.0 / 3.0, rho0: -0.8, z0: 1.0, phi: Matrix2::identity() * 0.5 };
        p.echo(&mut e);
        let text = e.lines().join("\n");
        let back = FileConfig::parse(&text).unwrap();
        assert_eq!(back.process.gamma_y, Some(1.0 / 3.0));
        assert_eq!(back.process.phi22, Some(0.5));
        assert_eq!(back.command.as_deref(), Some("design"));
    }

    #[test]
    fn outputs_are_configs() {
        let csv_out = "# version = \"0.1.0\"\n# command = \"design\"\n# [design]\n# n = 5\nn,alpha\n5,0.005\n";
        let c = FileConfig::parse(&config_text(csv_out)).unwrap();
        assert_eq!(c.design.n, Some(5));
        let toml_out = "# version = \"0.1.0\"\n# [result]\n# length = 9\n[process]\nmu_x = 2.5\n";
        let c = FileConfig::parse(&config_text(toml_out)).unwrap();
        assert_eq!(c.process.mu_x, Some(2.5));
    }

    #[test]
    fn lists_and_pairs() {
        assert_eq!(parse_list::<usize>("n_values", "2, 5,7").unwrap(), vec![2, 5, 7]);
        assert_eq!(parse_pairs("rho_values", "-0.8:-0.8, 0.4:0.2").unwrap(), vec![(-0.8, -0.8), (0.4, 0.2)]);
        assert!(parse_pairs("rho_values", "0.4").is_err());
        assert!(parse_list::<f64>("tau_values", " , ").is_err());
    }
}
