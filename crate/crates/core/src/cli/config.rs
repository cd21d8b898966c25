//! Layered run configuration: built-in defaults, then a TOML file, then flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CliError, RunArgs};
use crate::rules::Rho;
use crate::tasks::{shipped_rules, GenConfig, Metric, TaskKind, TrainConfig};

/// Environment variable holding the default output directory.
pub const OUT_ENV: &str = "LOGAUG_OUT";

/// A ρ value as written in a config file: a number or `"hard"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RhoSpec {
    Number(f64),
    Text(String),
}

impl RhoSpec {
    fn resolve(&self) -> Result<Rho, CliError> {
        match self {
            RhoSpec::Number(v) => v.to_string().parse(),
            RhoSpec::Text(s) => s.parse(),
        }
        .map_err(CliError::Config)
    }
}

/// One configuration layer; unset fields defer to the layer below.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigLayer {
    pub task: Option<TaskKind>,
    pub rules: Option<Vec<String>>,
    pub rho: Option<Vec<RhoSpec>>,
    pub fractions: Option<Vec<f64>>,
    pub seeds: Option<Vec<u64>>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub embed: Option<usize>,
    pub hidden: Option<usize>,
    pub metric: Option<Metric>,
    pub data: Option<PathBuf>,
    pub gen_seed: Option<u64>,
    pub noise: Option<f64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl ConfigLayer {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::io(path, e))
    }

    fn from_flags(a: &RunArgs) -> Self {
        fn some_vec<T: Clone>(v: &[T]) -> Option<Vec<T>> {
            (!v.is_empty()).then(|| v.to_vec())
        }
        ConfigLayer {
            task: a.task,
            rules: some_vec(&a.rules),
            rho: (!a.rho.is_empty()).then(|| a.rho.iter().cloned().map(RhoSpec::Text).collect()),
            fractions: some_vec(&a.fractions),
            seeds: a.seed.map(|s| vec![s]).or_else(|| some_vec(&a.seeds)),
            epochs: a.epochs,
            lr: a.lr,
            batch_size: a.batch_size,
            embed: None,
            hidden: None,
            metric: a.metric,
            data: a.data.clone(),
            gen_seed: a.gen_seed,
            noise: a.noise,
            out: a.out.clone(),
            workers: a.workers,
        }
    }

    /// Fields set here win over `base`.
    fn over(self, base: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            task: self.task.or(base.task),
            rules: self.rules.or(base.rules),
            rho: self.rho.or(base.rho),
            fractions: self.fractions.or(base.fractions),
            seeds: self.seeds.or(base.seeds),
            epochs: self.epochs.or(base.epochs),
            lr: self.lr.or(base.lr),
            batch_size: self.batch_size.or(base.batch_size),
            embed: self.embed.or(base.embed),
            hidden: self.hidden.or(base.hidden),
            metric: self.metric.or(base.metric),
            data: self.data.or(base.data),
            gen_seed: self.gen_seed.or(base.gen_seed),
            noise: self.noise.or(base.noise),
            out: self.out.or(base.out),
            workers: self.workers.or(base.workers),
        }
    }
}

/// Fully resolved settings of a `train` or `sweep` invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: TaskKind,
    /// Rule specs: `none`, shipped names or file paths.
    pub rules: Vec<String>,
    pub rho: Vec<Rho>,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Epochs, learning rate, batch size and model sizes; fraction and seed
    /// are filled in per cell.
    pub train: TrainConfig,
    pub metric: Metric,
    pub data: Option<PathBuf>,
    pub generator: GenConfig,
    pub out: PathBuf,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn resolve(args: &RunArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => ConfigLayer::load(p)?,
            None => ConfigLayer::default(),
        };
        Self::from_layers(file, ConfigLayer::from_flags(args))
    }

    /// Combine defaults < `file` < `flags`.
    pub fn from_layers(file: ConfigLayer, flags: ConfigLayer) -> Result<Self, CliError> {
        let layer = flags.over(file);
        let task = layer
            .task
            .ok_or_else(|| CliError::Config("no task given (use --task or `task` in the config file)".into()))?;
        let mut train = TrainConfig::for_task(task);
        let mut generator = GenConfig::for_task(task);
        if let Some(v) = layer.epochs {
            train.epochs = v;
        }
        if let Some(v) = layer.lr {
            train.lr = v;
        }
        if let Some(v) = layer.batch_size {
            train.batch_size = v;
        }
        if let Some(v) = layer.embed {
            train.model.embed = v;
        }
        if let Some(v) = layer.hidden {
            train.model.hidden = v;
        }
        if let Some(v) = layer.gen_seed {
            generator.seed = v;
        }
        if let Some(v) = layer.noise {
            generator.noise = v;
        }
        let rho = match &layer.rho {
            Some(specs) => specs.iter().map(RhoSpec::resolve).collect::<Result<Vec<_>, _>>()?,
            None => vec![Rho::default()],
        };
        let out = layer
            .out
            .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"));
        let cfg = RunConfig {
            task,
            rules: layer.rules.unwrap_or_else(|| vec!["none".into()]),
            rho,
            fractions: layer.fractions.unwrap_or_else(|| vec![1.0]),
            seeds: layer.seeds.unwrap_or_else(|| vec![train.seed]),
            metric: layer.metric.unwrap_or_else(|| Metric::default_for(task)),
            train,
            data: layer.data,
            generator,
            out,
            workers: layer.workers,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.fractions.is_empty() || self.seeds.is_empty() || self.rho.is_empty() || self.rules.is_empty() {
            return bad("fractions, seeds, rho and rules must each have at least one entry".into());
        }
        for &f in &self.fractions {
            if !(f > 0.0 && f <= 1.0) {
                return bad(format!("fraction {f} is outside (0, 1]"));
            }
        }
        TrainConfig {
            fraction: self.fractions[0],
            ..self.train.clone()
        }
        .validate()?;
        if !self.metric.applies_to(self.task) {
            return bad(format!("metric `{}` does not apply to task `{}`", self.metric, self.task));
        }
        if !(0.0..=1.0).contains(&self.generator.noise) {
            return bad(format!("noise {} is outside [0, 1]", self.generator.noise));
        }
        for spec in &self.rules {
            if spec != "none" && shipped_rules(spec).is_none() && !Path::new(spec).is_file() {
                return bad(format!("rule file `{spec}` does not exist"));
            }
        }
        if let Some(d) = &self.data {
            if !d.is_dir() {
                return bad(format!("data directory `{}` does not exist", d.display()));
            }
        }
        Ok(())
    }

    /// The resolved settings as a config file that reproduces them.
    pub fn to_toml(&self) -> String {
        let layer = ConfigLayer {
            task: Some(self.task),
            rules: Some(self.rules.clone()),
            rho: Some(
                self.rho
                    .iter()
                    .map(|r| match r {
                        Rho::Value(v) => RhoSpec::Number(*v),
                        Rho::Hard => RhoSpec::Text("hard".into()),
                    })
                    .collect(),
            ),
            fractions: Some(self.fractions.clone()),
            seeds: Some(self.seeds.clone()),
            epochs: Some(self.train.epochs),
            lr: Some(self.train.lr),
            batch_size: Some(self.train.batch_size),
            embed: Some(self.train.model.embed),
            hidden: Some(self.train.model.hidden),
            metric: Some(self.metric),
            data: self.data.clone(),
            gen_seed: Some(self.generator.seed),
            noise: Some(self.generator.noise),
            out: Some(self.out.clone()),
            workers: None,
        };
        toml::to_string(&layer).expect("config layers serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(task: Option<TaskKind>) -> ConfigLayer {
        ConfigLayer {
            task,
            out: Some("o".into()),
            ..Default::default()
        }
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let file: ConfigLayer = toml::from_str("task = \"nli\"\nepochs = 3\nlr = 0.5\nrho = [1, \"hard\"]").unwrap();
        let cfg = RunConfig::from_layers(
            file,
            ConfigLayer {
                lr: Some(0.25),
                ..flags(None)
            },
        )
        .unwrap();
        assert_eq!(cfg.task, TaskKind::Nli);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.lr, 0.25);
        assert_eq!(cfg.train.batch_size, TrainConfig::for_task(TaskKind::Nli).batch_size);
        assert_eq!(cfg.rho, vec![Rho::Value(1.0), Rho::Hard]);
        assert_eq!(cfg.generator.noise, 0.15);
    }

    #[test]
    fn resolved_config_round_trips_through_toml() {
        let cfg = RunConfig::from_layers(ConfigLayer::default(), flags(Some(TaskKind::Tag))).unwrap();
        let again: ConfigLayer = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(RunConfig::from_layers(again, ConfigLayer::default()).unwrap(), cfg);
    }

    #[test]
    fn invalid_settings_are_config_errors() {
        let bad = |l: ConfigLayer| RunConfig::from_layers(ConfigLayer::default(), l).unwrap_err().exit_code();
        assert_eq!(bad(flags(None)), 2);
        assert_eq!(
            bad(ConfigLayer {
                fractions: Some(vec![1.5]),
                ..flags(Some(TaskKind::Tag))
            }),
            2
        );
        assert_eq!(
            bad(ConfigLayer {
                metric: Some(Metric::SpanF1),
                ..flags(Some(TaskKind::Tag))
            }),
            2
        );
        assert_eq!(
            bad(ConfigLayer {
                rules: Some(vec!["/nonexistent.rules".into()]),
                ..flags(Some(TaskKind::Tag))
            }),
            2
        );
        assert!(toml::from_str::<ConfigLayer>("epoch = 3").is_err());
    }
}
