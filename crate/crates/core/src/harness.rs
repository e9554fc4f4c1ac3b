//! Run configuration, orchestration and persistence.
//!
//! A config file is a flat list of `key = value` lines. Keys before the first
//! `[section]` header apply to every experiment; keys inside `[name]` apply
//! only when the experiment is `name`, and win over the top-level ones.
//! Blank lines and lines starting with `#` are ignored.
//!
//! ```text
//! experiment = gamma
//! law = dirac
//! law.value = 1
//! seed = 42
//! replicas = 200
//!
//! [gamma]
//! r = 1000
//!
//! [fluct]
//! radii = 128, 256, 512, 1024, 2048
//! ```
//!
//! A run writes `raw.csv`, `report.txt` and `manifest.txt` into its output
//! directory. The manifest is itself a config file that reproduces the run.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::estimators;
use crate::geometry::DEFAULT_DELTA;
use crate::lpp::passage_field;
use crate::oracle;
use crate::point_process::{sample_cloud, Point, PointCloud, Region};
use crate::report::{fmt_real, Estimate};
use crate::weight_laws::{LawKind, WeightLaw};

/// Environment variable that overrides the configured thread count.
pub const THREADS_ENV: &str = "HAMMERSLEY_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    Gamma,
    Martin,
    Fluct,
    Scale,
    Rays,
    Coalesce,
    Busemann,
    Straightness,
    PathCount,
    OracleSuite,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Gamma,
        Experiment::Martin,
        Experiment::Fluct,
        Experiment::Scale,
        Experiment::Rays,
        Experiment::Coalesce,
        Experiment::Busemann,
        Experiment::Straightness,
        Experiment::PathCount,
        Experiment::OracleSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Gamma => "gamma",
            Experiment::Martin => "martin",
            Experiment::Fluct => "fluct",
            Experiment::Scale => "scale",
            Experiment::Rays => "rays",
            Experiment::Coalesce => "coalesce",
            Experiment::Busemann => "busemann",
            Experiment::Straightness => "straightness",
            Experiment::PathCount => "pathcount",
            Experiment::OracleSuite => "oracle-suite",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::config(format!("experiment: unknown experiment '{s}'")))
    }
}

/// A fully resolved, validated run description.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub law: Option<WeightLaw>,
    pub r: Option<f64>,
    pub radii: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
    pub starts: Option<Vec<Point>>,
    pub clouds: Option<usize>,
    pub max_points: Option<usize>,
    pub replicas: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

/// Raw `key = value` pairs, top-level and per section.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub global: BTreeMap<String, String>,
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigFile {
    pub fn parse<R: BufRead>(input: R) -> Result<Self> {
        let mut file = ConfigFile::default();
        let mut section: Option<String> = None;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| Error::Parse {
                    line: i + 1,
                    msg: format!("unterminated section header '{line}'"),
                })?;
                section = Some(name.trim().to_string());
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key = value, got '{line}'"),
            })?;
            let map = match &section {
                Some(s) => file.sections.entry(s.clone()).or_default(),
                None => &mut file.global,
            };
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = fs::File::open(path)
            .map_err(|e| Error::config(format!("config: cannot open {}: {e}", path.display())))?;
        Self::parse(std::io::BufReader::new(f))
    }

    /// Sets a top-level key, as a command-line override would.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.global.insert(key.to_string(), value.into());
    }

    /// Effective keys for `experiment`: top level overlaid with its section.
    fn effective(&self, experiment: Experiment) -> BTreeMap<String, String> {
        let mut m = self.global.clone();
        if let Some(s) = self.sections.get(experiment.name()) {
            m.extend(s.clone());
        }
        m
    }
}

const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "law",
    "law.value",
    "law.p",
    "law.rate",
    "law.lo",
    "law.hi",
    "law.sample",
    "r",
    "radii",
    "alpha",
    "delta",
    "lambda",
    "starts",
    "clouds",
    "max_points",
    "replicas",
    "seed",
    "out",
    "threads",
];

struct Keys {
    map: BTreeMap<String, String>,
}

impl Keys {
    fn raw(&self, key: &str) -> Result<&str> {
        self.map
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::config(format!("{key}: missing required key")))
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.raw(key)?;
        v.parse()
            .map_err(|_| Error::config(format!("{key}: cannot parse '{v}'")))
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        if self.map.contains_key(key) {
            self.parse(key).map(Some)
        } else {
            Ok(None)
        }
    }

    fn reals(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.raw(key)?;
        v.split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::config(format!("{key}: expected comma-separated reals, got '{v}'")))
    }

    fn law(&self) -> Result<WeightLaw> {
        let kind = match self.raw("law")? {
            "dirac" => LawKind::Dirac {
                value: self.parse("law.value")?,
            },
            "bernoulli" => LawKind::Bernoulli {
                p: self.parse("law.p")?,
            },
            "exponential" => LawKind::Exponential {
                rate: self.parse("law.rate")?,
            },
            "uniform" => LawKind::UniformInterval {
                lo: self.parse("law.lo")?,
                hi: self.parse("law.hi")?,
            },
            "empirical" => LawKind::Empirical {
                sample: self.reals("law.sample")?,
            },
            other => return Err(Error::config(format!("law: unknown law '{other}'"))),
        };
        WeightLaw::new(kind).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("law: {m}")),
            e => e,
        })
    }

    fn starts(&self) -> Result<Vec<Point>> {
        let v = self.raw("starts")?;
        v.split(';')
            .map(|pair| {
                let (x, t) = pair.split_once(',')?;
                Some(Point::new(x.trim().parse().ok()?, t.trim().parse().ok()?))
            })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::config(format!("starts: expected 'x,t; x,t; ...', got '{v}'")))
    }
}

fn require(cond: bool, field: &str, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::config(format!("{field}: {msg}")))
    }
}

impl RunConfig {
    /// Resolves and validates a config. `experiment` overrides the file's
    /// `experiment` key when given.
    pub fn from_file(file: &ConfigFile, experiment: Option<Experiment>) -> Result<Self> {
        let experiment = match experiment {
            Some(e) => e,
            None => file
                .global
                .get("experiment")
                .ok_or_else(|| Error::config("experiment: missing required key"))?
                .parse()?,
        };
        let map = file.effective(experiment);
        if let Some(k) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(Error::config(format!("{k}: unknown key")));
        }
        let keys = Keys { map };
        use Experiment::*;
        let needs_law = experiment != OracleSuite;
        let mut cfg = RunConfig {
            experiment,
            law: if needs_law { Some(keys.law()?) } else { None },
            r: None,
            radii: None,
            alpha: None,
            delta: None,
            lambda: None,
            starts: None,
            clouds: None,
            max_points: None,
            replicas: 0,
            seed: keys.opt("seed")?.unwrap_or(0),
            out: keys
                .opt::<String>("out")?
                .unwrap_or_else(|| "out".into())
                .into(),
            threads: keys.opt("threads")?,
        };
        if let Some(t) = cfg.threads {
            require(t >= 1, "threads", "must be >= 1")?;
        }
        match experiment {
            Gamma | Martin | PathCount => cfg.r = Some(keys.parse("r")?),
            Scale => {
                cfg.r = Some(keys.parse("r")?);
                cfg.lambda = Some(keys.parse("lambda")?);
            }
            Fluct => cfg.radii = Some(keys.reals("radii")?),
            Straightness => {
                cfg.radii = Some(keys.reals("radii")?);
                cfg.delta = Some(keys.opt("delta")?.unwrap_or(DEFAULT_DELTA));
            }
            Rays | Coalesce | Busemann => {
                cfg.radii = Some(keys.reals("radii")?);
                cfg.alpha = Some(keys.parse("alpha")?);
                cfg.starts = Some(keys.starts()?);
            }
            OracleSuite => {
                cfg.clouds = Some(keys.opt("clouds")?.unwrap_or(1000));
                cfg.max_points = Some(keys.opt("max_points")?.unwrap_or(10));
            }
        }
        cfg.replicas = match experiment {
            OracleSuite => cfg.clouds.unwrap(),
            _ => keys.parse("replicas")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range checks for the chosen experiment, each naming the offending key.
    pub fn validate(&self) -> Result<()> {
        use Experiment::*;
        require(self.replicas >= 2, "replicas", "must be >= 2")?;
        if let Some(r) = self.r {
            require(r.is_finite() && r > 0.0, "r", "must be > 0")?;
            if self.experiment == PathCount {
                require(r >= 10.0, "r", "must be >= 10")?;
            }
        }
        if let Some(radii) = &self.radii {
            let min = match self.experiment {
                Fluct | Straightness => 4,
                _ => 2,
            };
            require(
                radii.len() >= min,
                "radii",
                &format!("need at least {min} values"),
            )?;
            require(
                radii.iter().all(|r| r.is_finite() && *r > 1.0)
                    && radii.windows(2).all(|w| w[0] < w[1]),
                "radii",
                "must exceed 1 and increase strictly",
            )?;
        }
        if let Some(a) = self.alpha {
            require(
                a > 0.0 && a < std::f64::consts::FRAC_PI_2,
                "alpha",
                "must lie in (0, pi/2)",
            )?;
        }
        if let Some(d) = self.delta {
            require(d > 0.0 && d < 0.25, "delta", "must lie in (0, 1/4)")?;
        }
        if let Some(l) = self.lambda {
            require(l.is_finite() && l > 0.0, "lambda", "must be > 0")?;
        }
        if self.experiment == Scale {
            require(self.replicas >= 200, "replicas", "scale needs at least 200")?;
        }
        if let Some(s) = &self.starts {
            let (lo, hi) = match self.experiment {
                Rays => (1, 1),
                Coalesce => (2, 2),
                _ => (2, 3),
            };
            require(
                s.len() >= lo && s.len() <= hi,
                "starts",
                &format!("{} takes {lo} to {hi} start points", self.experiment),
            )?;
            require(
                s.iter().all(|p| p.x.is_finite() && p.t.is_finite()),
                "starts",
                "coordinates must be finite",
            )?;
        }
        if let Some(m) = self.max_points {
            require(
                m <= crate::lpp::BRUTE_FORCE_CAP,
                "max_points",
                "exceeds the brute-force cap",
            )?;
        }
        if self.experiment == Martin {
            let law = self.law.as_ref().unwrap();
            require(
                law.sqrt_tail_integral().is_finite(),
                "law",
                "square-root tail integral diverges",
            )?;
        }
        Ok(())
    }

    /// The manifest: a config file that resolves back to `self`.
    pub fn to_manifest(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        let reals = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        kv("experiment", self.experiment.to_string());
        if let Some(law) = &self.law {
            match law.kind() {
                LawKind::Dirac { value } => {
                    kv("law", "dirac".into());
                    kv("law.value", format!("{value:?}"));
                }
                LawKind::Bernoulli { p } => {
                    kv("law", "bernoulli".into());
                    kv("law.p", format!("{p:?}"));
                }
                LawKind::Exponential { rate } => {
                    kv("law", "exponential".into());
                    kv("law.rate", format!("{rate:?}"));
                }
                LawKind::UniformInterval { lo, hi } => {
                    kv("law", "uniform".into());
                    kv("law.lo", format!("{lo:?}"));
                    kv("law.hi", format!("{hi:?}"));
                }
                LawKind::Empirical { sample } => {
                    kv("law", "empirical".into());
                    kv("law.sample", reals(sample));
                }
            }
        }
        if let Some(v) = self.r {
            kv("r", format!("{v:?}"));
        }
        if let Some(v) = &self.radii {
            kv("radii", reals(v));
        }
        if let Some(v) = self.alpha {
            kv("alpha", format!("{v:?}"));
        }
        if let Some(v) = self.delta {
            kv("delta", format!("{v:?}"));
        }
        if let Some(v) = self.lambda {
            kv("lambda", format!("{v:?}"));
        }
        if let Some(v) = &self.starts {
            let s = v
                .iter()
                .map(|p| format!("{:?},{:?}", p.x, p.t))
                .collect::<Vec<_>>()
                .join("; ");
            kv("starts", s);
        }
        if let Some(v) = self.clouds {
            kv("clouds", v.to_string());
        }
        if let Some(v) = self.max_points {
            kv("max_points", v.to_string());
        }
        if self.experiment != Experiment::OracleSuite {
            kv("replicas", self.replicas.to_string());
        }
        kv("seed", self.seed.to_string());
        kv("out", self.out.display().to_string());
        if let Some(v) = self.threads {
            kv("threads", v.to_string());
        }
        s
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        RunConfig::from_file(&ConfigFile::parse(text.as_bytes())?, None)
    }
}

/// Thread count after applying [`THREADS_ENV`] to the configured value.
pub fn effective_threads(configured: Option<usize>) -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("{THREADS_ENV}: cannot parse '{v}'")))?;
            require(n >= 1, THREADS_ENV, "must be >= 1")?;
            Ok(Some(n))
        }
        Err(_) => Ok(configured),
    }
}

/// Runs the experiment on the calling thread's pool.
pub fn execute(cfg: &RunConfig) -> Result<Estimate> {
    use Experiment::*;
    let law = || cfg.law.as_ref().unwrap();
    let radii = || cfg.radii.as_deref().unwrap();
    match cfg.experiment {
        Gamma => estimators::estimate_gamma(law(), cfg.r.unwrap(), cfg.replicas, cfg.seed),
        Martin => estimators::martin_bound_check(law(), cfg.r.unwrap(), cfg.replicas, cfg.seed),
        Fluct => estimators::fluctuation_scan(law(), radii(), cfg.replicas, cfg.seed),
        Scale => estimators::scale_invariance_test(
            law(),
            cfg.r.unwrap(),
            cfg.lambda.unwrap(),
            cfg.replicas,
            cfg.seed,
        ),
        PathCount => estimators::path_count_tail(law(), cfg.r.unwrap(), cfg.replicas, cfg.seed),
        Straightness => estimators::straightness_scan(
            law(),
            radii(),
            cfg.delta.unwrap(),
            cfg.replicas,
            cfg.seed,
        ),
        Rays | Coalesce | Busemann => estimators::ray_study(
            law(),
            cfg.alpha.unwrap(),
            cfg.starts.as_deref().unwrap(),
            radii(),
            cfg.replicas,
            cfg.seed,
        ),
        OracleSuite => oracle::oracle_suite(cfg.clouds.unwrap(), cfg.max_points.unwrap(), cfg.seed),
    }
}

/// Whether a finished run should exit nonzero: oracle mismatches and a
/// failed bound check count as failures.
pub fn failed(cfg: &RunConfig, est: &Estimate) -> bool {
    match cfg.experiment {
        Experiment::OracleSuite => est.report.get("mismatches") != 0.0,
        Experiment::Martin => !est.report.flag("pass"),
        _ => false,
    }
}

/// Writes `raw.csv`, `report.txt` and `manifest.txt` under `cfg.out`.
pub fn write_outputs(cfg: &RunConfig, est: &Estimate) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    let mut raw = std::io::BufWriter::new(fs::File::create(cfg.out.join("raw.csv"))?);
    est.raw.write_csv(&mut raw)?;
    raw.flush()?;
    fs::write(
        cfg.out.join("report.txt"),
        format!("{}\n", est.report.to_record()),
    )?;
    fs::write(cfg.out.join("manifest.txt"), cfg.to_manifest())?;
    Ok(())
}

/// Outcome of [`run`].
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub estimate: Estimate,
    pub failed: bool,
}

/// Executes the run on a pool of the configured size and persists it.
/// Progress goes to standard error.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let threads = effective_threads(cfg.threads)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config(format!("threads: {e}")))?;
    eprintln!(
        "{}: {} replicas, seed {}, {} threads",
        cfg.experiment,
        cfg.replicas,
        cfg.seed,
        pool.current_num_threads()
    );
    let started = Instant::now();
    let estimate = pool.install(|| execute(cfg))?;
    write_outputs(cfg, &estimate)?;
    eprintln!(
        "{}: done in {:.1}s, outputs in {}",
        cfg.experiment,
        started.elapsed().as_secs_f64(),
        cfg.out.display()
    );
    Ok(RunOutcome {
        failed: failed(cfg, &estimate),
        estimate,
    })
}

/// Samples the cloud on `[0, side]²` for `law` and `seed`.
pub fn dump_cloud(law: &WeightLaw, side: f64, seed: u64) -> Result<PointCloud> {
    sample_cloud(Region::square(side)?, 1.0, law, seed)
}

/// Passage field from the lower-left corner of the cloud's region, one row
/// `x t w value pred_index` per point; `pred_index` is -1 without predecessor.
pub fn write_field<W: Write>(cloud: &PointCloud, mut out: W) -> Result<()> {
    let field = passage_field(cloud, cloud.region().lower_left());
    writeln!(out, "x t w value pred_index")?;
    let pts = cloud.points();
    for (i, value, pred) in field.rows() {
        let p = &pts[i];
        let pred = pred.map_or(-1, |j| j as i64);
        writeln!(
            out,
            "{:?} {:?} {:?} {} {pred}",
            p.x,
            p.t,
            p.w,
            fmt_real(value)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ConfigFile {
        ConfigFile::parse(text.as_bytes()).unwrap()
    }

    fn err(text: &str) -> String {
        RunConfig::from_file(&parse(text), None)
            .unwrap_err()
            .to_string()
    }

    #[test]
    fn sections_override_globals() {
        let f = parse("experiment = gamma\nlaw=dirac\nlaw.value=1\nreplicas=4\nr=5\n[gamma]\nr = 7\n[fluct]\nr=9\n");
        let c = RunConfig::from_file(&f, None).unwrap();
        assert_eq!(c.r, Some(7.0));
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn missing_law_parameter_names_field() {
        let e = err("experiment = gamma\nlaw = exponential\nreplicas = 4\nr = 10\n");
        assert!(e.contains("law.rate"), "{e}");
        let e = err("experiment = gamma\nlaw = dirac\nlaw.value = 1\nr = 10\n");
        assert!(e.contains("replicas"), "{e}");
        let e =
            err("experiment = gamma\nlaw = dirac\nlaw.value = 1\nr = 10\nreplicas=4\nbogus=1\n");
        assert!(e.contains("bogus"), "{e}");
        let e =
            err("experiment = scale\nlaw = dirac\nlaw.value = 1\nr = 10\nlambda=2\nreplicas=4\n");
        assert!(e.contains("replicas"), "{e}");
    }

    #[test]
    fn manifest_round_trip() {
        let texts = [
            "experiment=gamma\nlaw=exponential\nlaw.rate=0.3\nr=10.5\nreplicas=4\nseed=18446744073709551615\n",
            "experiment=busemann\nlaw=empirical\nlaw.sample=3,0.1,2\nradii=10,20,40\nalpha=0.7853981633974483\nstarts=0,0;30,0;15,0\nreplicas=3\nthreads=2\nout=x/y\n",
            "experiment=straightness\nlaw=uniform\nlaw.lo=0.5\nlaw.hi=1.5\nradii=8,16,32,64\nreplicas=3\n",
            "experiment=oracle-suite\nclouds=20\n",
        ];
        for t in texts {
            let c = RunConfig::from_file(&parse(t), None).unwrap();
            let back = RunConfig::from_manifest(&c.to_manifest()).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_manifest(), c.to_manifest());
        }
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("nope".parse::<Experiment>().is_err());
    }

    #[test]
    fn field_dump_layout() {
        use crate::point_process::MarkedPoint;
        let cloud = PointCloud::from_points(
            Region::square(4.0).unwrap(),
            vec![
                MarkedPoint::new(1.0, 1.0, 2.0),
                MarkedPoint::new(3.0, 2.0, 5.0),
            ],
            0,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_field(&cloud, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "x t w value pred_index");
        assert_eq!(lines[1], "1.0 1.0 2.0 2.0000000000000000e0 -1");
        assert_eq!(lines[2], "3.0 2.0 5.0 7.0000000000000000e0 0");
    }
}
