//! Run configuration: a flat `key = value` file overridden by flags.

use std::path::{Path, PathBuf};

use flowpca::io::{apply_weather_key, read_kv, KvEntry};
use flowpca::pca::DEFAULT_THRESHOLD;
use flowpca::synth::{LoadProfile, WeatherParams};
use flowpca::{Error, Result};

pub const DEFAULT_HOURS: usize = 8760;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub nodes: Option<PathBuf>,
    pub lines: Option<PathBuf>,
    pub series: Option<PathBuf>,
    /// Capacity factor and load series used by `synth` instead of the
    /// synthetic weather.
    pub wind: Option<PathBuf>,
    pub solar: Option<PathBuf>,
    pub load_series: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub threshold: f64,
    pub sizes: Vec<usize>,
    /// Length of synthesized series.
    pub hours: usize,
    /// Network area; the node bounding box when absent.
    pub area_km2: Option<f64>,
    pub weather: WeatherParams,
    pub load: LoadProfile,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            nodes: None,
            lines: None,
            series: None,
            wind: None,
            solar: None,
            load_series: None,
            out: PathBuf::from("out"),
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
            sizes: Vec::new(),
            hours: DEFAULT_HOURS,
            area_km2: None,
            weather: WeatherParams::default(),
            load: LoadProfile::default(),
        }
    }
}

/// Values given on the command line; `None` keeps the config value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub nodes: Option<PathBuf>,
    pub lines: Option<PathBuf>,
    pub series: Option<PathBuf>,
    pub wind: Option<PathBuf>,
    pub solar: Option<PathBuf>,
    pub load_series: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub sizes: Option<Vec<usize>>,
    pub hours: Option<usize>,
    pub area_km2: Option<f64>,
}

fn parse<T: std::str::FromStr>(e: &KvEntry, path: &Path) -> Result<T> {
    e.value.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line: e.line,
        message: format!("invalid value `{}` for `{}`", e.value, e.key),
    })
}

pub fn parse_sizes(s: &str) -> std::result::Result<Vec<usize>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<usize>()
                .map_err(|_| format!("invalid size `{p}`"))
        })
        .collect()
}

impl RunConfig {
    /// Reads a config file. Relative paths are taken from the file's
    /// directory; unknown keys are errors.
    pub fn from_file(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let mut cfg = Self::default();
        let mut seed_set = false;
        for e in read_kv(path)? {
            let file = |v: &str| base.join(v);
            match e.key.as_str() {
                "nodes" => cfg.nodes = Some(file(&e.value)),
                "lines" => cfg.lines = Some(file(&e.value)),
                "series" => cfg.series = Some(file(&e.value)),
                "wind" => cfg.wind = Some(file(&e.value)),
                "solar" => cfg.solar = Some(file(&e.value)),
                "load" => cfg.load_series = Some(file(&e.value)),
                "out" => cfg.out = file(&e.value),
                "threshold" => cfg.threshold = parse(&e, path)?,
                "hours" => cfg.hours = parse(&e, path)?,
                "area_km2" => cfg.area_km2 = Some(parse(&e, path)?),
                "load_diurnal_amplitude" => cfg.load.diurnal_amplitude = parse(&e, path)?,
                "load_weekly_amplitude" => cfg.load.weekly_amplitude = parse(&e, path)?,
                "sizes" => {
                    cfg.sizes = parse_sizes(&e.value).map_err(|message| Error::Parse {
                        path: path.to_path_buf(),
                        line: e.line,
                        message,
                    })?
                }
                "seed" => {
                    cfg.seed = parse(&e, path)?;
                    seed_set = true;
                }
                _ => {
                    if !apply_weather_key(&mut cfg.weather, &e, path)? {
                        return Err(Error::Parse {
                            path: path.to_path_buf(),
                            line: e.line,
                            message: format!("unknown key `{}`", e.key),
                        });
                    }
                }
            }
        }
        if seed_set {
            cfg.weather.seed = cfg.seed;
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: Overrides) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { self.$f = v; } )* };
        }
        set!(out, threshold, sizes, hours);
        macro_rules! set_opt {
            ($($f:ident),*) => { $( if o.$f.is_some() { self.$f = o.$f; } )* };
        }
        set_opt!(nodes, lines, series, wind, solar, load_series, area_km2);
        if let Some(s) = o.seed {
            self.seed = s;
            self.weather.seed = s;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::validation(format!(
                "threshold must be in (0, 1], got {}",
                self.threshold
            )));
        }
        for p in [
            &self.nodes,
            &self.lines,
            &self.series,
            &self.wind,
            &self.solar,
            &self.load_series,
        ]
        .into_iter()
        .flatten()
        {
            if !p.is_file() {
                return Err(Error::validation(format!(
                    "input file {} does not exist",
                    p.display()
                )));
            }
        }
        if let Some(a) = self.area_km2 {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::validation(format!("area must be positive, got {a}")));
            }
        }
        if self.sizes.contains(&0) {
            return Err(Error::validation("sizes must be positive"));
        }
        self.weather.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_list() {
        assert_eq!(parse_sizes("37, 64,128").unwrap(), vec![37, 64, 128]);
        assert!(parse_sizes("3,x").is_err());
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.conf");
        std::fs::write(
            &p,
            "nodes = n.csv\nseed = 3\nthreshold = 0.9\nwind_std = 0.2\nsizes = 4,8\n",
        )
        .unwrap();
        let mut c = RunConfig::from_file(&p).unwrap();
        assert_eq!(c.nodes.as_deref(), Some(dir.path().join("n.csv").as_path()));
        assert_eq!((c.seed, c.weather.seed), (3, 3));
        assert_eq!(c.weather.wind_std, 0.2);
        c.apply(Overrides {
            seed: Some(9),
            threshold: Some(0.5),
            ..Overrides::default()
        });
        assert_eq!((c.seed, c.weather.seed, c.threshold), (9, 9, 0.5));
        assert_eq!(c.sizes, vec![4, 8]);
    }

    #[test]
    fn unknown_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.conf");
        std::fs::write(&p, "threshold = 0.9\nthresold = 0.8\n").unwrap();
        match RunConfig::from_file(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn threshold_range_checked() {
        let c = RunConfig {
            threshold: 1.5,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
