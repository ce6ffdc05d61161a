//! Run-configuration files: INI-style sections whose keys mirror the engine
//! structs by name. Unknown keys are rejected and every diagnostic carries
//! its line number. The resolved configuration echoes back out through
//! [`echo`] in the same format, and parsing the echo reproduces it exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use hmcal::histmatch::{DpsChoice, HmConfig};
use hmcal::sim::{ExternalSpec, InputBounds, SimulatorSpec, TimeGrid, TimeSeries};
use hmcal::sweep::{SweepDpsMode, SweepPlan};

/// A configuration problem with its source line.
#[derive(Debug)]
pub struct ConfigFileError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ConfigFileError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for ConfigFileError {}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigFileError> {
    Err(ConfigFileError {
        line,
        message: message.into(),
    })
}

/// Raw parsed file: section -> key -> (line, value).
struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, (usize, String)>>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self, ConfigFileError> {
        let mut sections: BTreeMap<String, BTreeMap<String, (usize, String)>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let Some(name) = name.strip_suffix(']') else {
                    return err(line_no, "unterminated section header");
                };
                let name = name.trim().to_string();
                if !matches!(name.as_str(), "simulator" | "target" | "hm" | "sweep" | "output") {
                    return err(line_no, format!("unknown section [{name}]"));
                }
                sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(line_no, "expected `key = value`");
            };
            let Some(section) = &current else {
                return err(line_no, "key outside of any [section]");
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            let entries = sections.get_mut(section).expect("section exists");
            if entries.insert(key.clone(), (line_no, value)).is_some() {
                return err(line_no, format!("duplicate key `{key}`"));
            }
        }
        Ok(Self { sections })
    }
}

/// Typed view over one section that tracks which keys were consumed.
struct Section<'a> {
    name: &'a str,
    entries: Option<&'a BTreeMap<String, (usize, String)>>,
    used: Vec<&'a str>,
}

impl<'a> Section<'a> {
    fn get(&mut self, key: &'a str) -> Option<(usize, &'a str)> {
        self.used.push(key);
        self.entries
            .and_then(|e| e.get(key))
            .map(|(line, value)| (*line, value.as_str()))
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &'a str) -> Result<Option<(usize, T)>, ConfigFileError> {
        match self.get(key) {
            None => Ok(None),
            Some((line, s)) => match s.parse::<T>() {
                Ok(v) => Ok(Some((line, v))),
                Err(_) => err(line, format!("invalid value for `{key}`: {s:?}")),
            },
        }
    }

    fn parse_list<T: std::str::FromStr>(&mut self, key: &'a str) -> Result<Option<(usize, Vec<T>)>, ConfigFileError> {
        match self.get(key) {
            None => Ok(None),
            Some((line, s)) => {
                let mut out = Vec::new();
                for part in s.split(',') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    match part.parse::<T>() {
                        Ok(v) => out.push(v),
                        Err(_) => {
                            return err(line, format!("invalid list element for `{key}`: {part:?}"))
                        }
                    }
                }
                if out.is_empty() {
                    return err(line, format!("`{key}` needs at least one value"));
                }
                Ok(Some((line, out)))
            }
        }
    }

    fn finish(self) -> Result<(), ConfigFileError> {
        if let Some(entries) = self.entries {
            for (key, (line, _)) in entries {
                if !self.used.contains(&key.as_str()) {
                    return err(*line, format!("unknown key `{key}` in [{}]", self.name));
                }
            }
        }
        Ok(())
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub sim: SimulatorSpec,
    pub target: TargetSource,
    pub hm: HmConfig,
    pub sweep: Option<SweepSection>,
    pub out_dir: PathBuf,
    /// True when the seed came from entropy rather than the file/flag.
    pub seed_was_drawn: bool,
}

#[derive(Debug, Clone)]
pub enum TargetSource {
    Point(Vec<f64>),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct SweepSection {
    pub n1_levels: Vec<usize>,
    pub c_levels: Vec<f64>,
    pub tk_levels: Vec<usize>,
    pub m_levels: Vec<usize>,
    pub dps_mode: SweepDpsMode,
    pub replications: usize,
    pub dps_comparison_tk: Option<usize>,
    pub dps_comparison_replications: usize,
}

impl RunConfig {
    /// Materializes the target series on the simulator grid.
    pub fn load_target(&self) -> Result<TimeSeries, String> {
        match &self.target {
            TargetSource::Point(coords) => {
                let x0 = hmcal::sim::DesignPoint::new(coords.clone())
                    .map_err(|e| format!("target x0: {e}"))?;
                hmcal::sim::target_from_point(&x0, &self.sim).map_err(|e| e.to_string())
            }
            TargetSource::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("reading {}: {e}", path.display()))?;
                let values = parse_series_file(&text).map_err(|e| format!("{}: {e}", path.display()))?;
                TimeSeries::new(self.sim.grid.clone(), values).map_err(|e| e.to_string())
            }
        }
    }
}

/// Parses a single-column numeric file (blank lines ignored).
pub fn parse_series_file(text: &str) -> Result<Vec<f64>, String> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| format!("line {}: not a number: {line:?}", i + 1))?;
        values.push(v);
    }
    Ok(values)
}

/// Parses and resolves a configuration file.
///
/// `seed_override` (the `--seed` flag) wins over the file's seed; with
/// neither present a seed is drawn from entropy and flagged as drawn.
pub fn parse(
    text: &str,
    seed_override: Option<u64>,
    out_override: Option<&Path>,
) -> Result<RunConfig, ConfigFileError> {
    let raw = RawConfig::parse(text)?;
    let section = |name: &'static str| Section {
        name,
        entries: raw.sections.get(name),
        used: Vec::new(),
    };

    // [simulator]
    let mut sim_s = section("simulator");
    let sim = {
        let kind = sim_s.get("kind");
        let kind_str = kind.map(|(_, v)| v).unwrap_or("builtin-testfunc");
        let kind_line = kind.map(|(l, _)| l).unwrap_or(0);
        match kind_str {
            "builtin-testfunc" => {
                let grid = parse_grid(&mut sim_s)?;
                for forbidden in ["exec", "parallelism", "timeout_secs", "names", "lower", "upper"] {
                    if let Some((line, _)) = sim_s.get(forbidden) {
                        return err(line, format!("`{forbidden}` only applies to kind = external-exec"));
                    }
                }
                match grid {
                    Some(g) => SimulatorSpec::builtin_on(g),
                    None => SimulatorSpec::builtin(),
                }
            }
            "external-exec" => {
                let Some((_, exec)) = sim_s.get("exec") else {
                    return err(kind_line, "kind = external-exec requires `exec = <path>`");
                };
                let mut spec = ExternalSpec::new(PathBuf::from(exec));
                if let Some((_, p)) = sim_s.parse::<usize>("parallelism")? {
                    spec.parallelism = p.max(1);
                }
                if let Some((line, t)) = sim_s.parse::<u64>("timeout_secs")? {
                    if t == 0 {
                        return err(line, "timeout_secs must be positive (omit for unlimited)");
                    }
                    spec.timeout = Some(Duration::from_secs(t));
                }
                let Some(grid) = parse_grid(&mut sim_s)? else {
                    return err(kind_line, "external simulators must declare `grid` or `grid_file`");
                };
                let names = sim_s.parse_list::<String>("names")?;
                let lower = sim_s.parse_list::<f64>("lower")?;
                let upper = sim_s.parse_list::<f64>("upper")?;
                let (Some((_, lower)), Some((_, upper))) = (lower, upper) else {
                    return err(kind_line, "external simulators must declare `lower` and `upper` bounds");
                };
                let names = match names {
                    Some((_, n)) => n,
                    None => (1..=lower.len()).map(|k| format!("x{k}")).collect(),
                };
                let bounds = InputBounds::new(lower, upper, names)
                    .map_err(|e| ConfigFileError { line: kind_line, message: e.to_string() })?;
                SimulatorSpec::external(spec, grid, bounds)
            }
            other => {
                return err(
                    kind_line,
                    format!("unknown simulator kind {other:?} (builtin-testfunc | external-exec)"),
                )
            }
        }
    };
    sim_s.finish()?;

    // [target]
    let mut target_s = section("target");
    let x0 = target_s.parse_list::<f64>("x0")?;
    let file = target_s.get("file").map(|(l, v)| (l, v.to_string()));
    let target = match (x0, file) {
        (Some((line, coords)), None) => {
            if coords.len() != sim.d {
                return err(line, format!("x0 has {} coordinates, simulator expects {}", coords.len(), sim.d));
            }
            TargetSource::Point(coords)
        }
        (None, Some((_, path))) => TargetSource::File(PathBuf::from(path)),
        (Some((line, _)), Some(_)) => return err(line, "give either `x0` or `file`, not both"),
        (None, None) => return err(0, "[target] needs `x0` or `file`"),
    };
    target_s.finish()?;

    // [hm]
    let mut hm_s = section("hm");
    let mut hm = HmConfig::default();
    if let Some((_, v)) = hm_s.parse::<usize>("n1")? {
        hm.n1 = v;
    }
    if let Some((_, v)) = hm_s.parse::<f64>("c")? {
        hm.cutoff = v;
    }
    let tk = hm_s.parse::<usize>("tk")?;
    if let Some((_, v)) = &tk {
        hm.tk = *v;
    }
    if let Some((line, v)) = hm_s.get("dps").map(|(l, v)| (l, v.to_string())) {
        hm.dps = match v.as_str() {
            "fixed" => DpsChoice::AutoFixed,
            "random" => DpsChoice::AutoRandom,
            list => {
                let mut indices = Vec::new();
                for part in list.split(',') {
                    let part = part.trim();
                    match part.parse::<usize>() {
                        Ok(ix) => indices.push(ix),
                        Err(_) => {
                            return err(line, format!("dps must be `fixed`, `random` or 1-based indices; got {part:?}"))
                        }
                    }
                }
                if tk.is_none() {
                    hm.tk = indices.len();
                } else if hm.tk != indices.len() {
                    return err(line, format!("dps lists {} indices but tk = {}", indices.len(), hm.tk));
                }
                DpsChoice::Explicit(indices)
            }
        };
    }
    if let Some((_, v)) = hm_s.parse::<usize>("m")? {
        hm.test_set_size = v;
    }
    if let Some((_, v)) = hm_s.parse::<usize>("max_iterations")? {
        hm.max_iterations = v;
    }
    if let Some((_, v)) = hm_s.parse::<usize>("budget")? {
        hm.budget = v;
    }
    if let Some((_, v)) = hm_s.parse::<usize>("subsample")? {
        hm.subsample = Some(v);
    }
    if let Some((_, v)) = hm_s.parse::<bool>("keep_series")? {
        hm.keep_series = v;
    }
    let file_seed = hm_s.parse::<u64>("seed")?.map(|(_, v)| v);
    let (seed, seed_was_drawn) = match (seed_override, file_seed) {
        (Some(s), _) => (s, false),
        (None, Some(s)) => (s, false),
        (None, None) => (rand::random::<u64>(), true),
    };
    hm.seed = seed;
    hm_s.finish()?;

    // enforce HmConfig invariants now, with the file's context
    let l = sim.grid.len();
    if let Err(e) = hm.validate(l) {
        return err(0, format!("[hm] invalid: {e}"));
    }
    if let DpsChoice::Explicit(_) = &hm.dps {
        if let Err(e) = hmcal::histmatch::resolve_dps(&hm, l) {
            return err(0, format!("[hm] invalid: {e}"));
        }
    }

    // [sweep]
    let mut sweep_s = section("sweep");
    let sweep = if raw.sections.contains_key("sweep") {
        let mut sec = SweepSection {
            n1_levels: vec![5, 10, 20],
            c_levels: vec![1.0, 2.0, 3.0],
            tk_levels: vec![2, 4, 8],
            m_levels: vec![500, 2000, 5000],
            dps_mode: SweepDpsMode::Variable,
            replications: 25,
            dps_comparison_tk: None,
            dps_comparison_replications: 25,
        };
        if let Some((_, v)) = sweep_s.parse_list::<usize>("n1")? {
            sec.n1_levels = v;
        }
        if let Some((_, v)) = sweep_s.parse_list::<f64>("c")? {
            sec.c_levels = v;
        }
        if let Some((_, v)) = sweep_s.parse_list::<usize>("tk")? {
            sec.tk_levels = v;
        }
        if let Some((_, v)) = sweep_s.parse_list::<usize>("m")? {
            sec.m_levels = v;
        }
        if let Some((line, v)) = sweep_s.get("dps") {
            sec.dps_mode = match v {
                "fixed" => SweepDpsMode::Fixed,
                "random" => SweepDpsMode::Variable,
                other => return err(line, format!("sweep dps must be `fixed` or `random`, got {other:?}")),
            };
        }
        if let Some((line, v)) = sweep_s.parse::<usize>("replications")? {
            if v == 0 {
                return err(line, "replications must be at least 1");
            }
            sec.replications = v;
        }
        if let Some((_, v)) = sweep_s.parse::<usize>("dps_comparison_tk")? {
            sec.dps_comparison_tk = Some(v);
        }
        if let Some((_, v)) = sweep_s.parse::<usize>("dps_comparison_replications")? {
            sec.dps_comparison_replications = v.max(1);
        }
        Some(sec)
    } else {
        None
    };
    sweep_s.finish()?;

    // [output]
    let mut out_s = section("output");
    let out_dir = match (out_override, out_s.get("dir")) {
        (Some(path), _) => path.to_path_buf(),
        (None, Some((_, v))) => PathBuf::from(v),
        (None, None) => PathBuf::from("out"),
    };
    out_s.finish()?;

    Ok(RunConfig {
        sim,
        target,
        hm,
        sweep,
        out_dir,
        seed_was_drawn,
    })
}

fn parse_grid(s: &mut Section) -> Result<Option<TimeGrid>, ConfigFileError> {
    let spec = s.get("grid").map(|(l, v)| (l, v.to_string()));
    let file = s.get("grid_file").map(|(l, v)| (l, v.to_string()));
    match (spec, file) {
        (Some((line, _)), Some(_)) => err(line, "give either `grid` or `grid_file`, not both"),
        (Some((line, v)), None) => {
            // start:step:count
            let parts: Vec<&str> = v.split(':').collect();
            if parts.len() != 3 {
                return err(line, "grid must be `start:step:count`");
            }
            let start: f64 = parts[0]
                .trim()
                .parse()
                .map_err(|_| ConfigFileError { line, message: "bad grid start".into() })?;
            let step: f64 = parts[1]
                .trim()
                .parse()
                .map_err(|_| ConfigFileError { line, message: "bad grid step".into() })?;
            let count: usize = parts[2]
                .trim()
                .parse()
                .map_err(|_| ConfigFileError { line, message: "bad grid count".into() })?;
            let values: Vec<f64> = (0..count).map(|i| start + step * i as f64).collect();
            match TimeGrid::new(values) {
                Ok(g) => Ok(Some(g)),
                Err(e) => err(line, e.to_string()),
            }
        }
        (None, Some((line, path))) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ConfigFileError { line, message: format!("reading {path}: {e}") })?;
            let values = parse_series_file(&text)
                .map_err(|message| ConfigFileError { line, message })?;
            match TimeGrid::new(values) {
                Ok(g) => Ok(Some(g)),
                Err(e) => err(line, e.to_string()),
            }
        }
        (None, None) => Ok(None),
    }
}

/// Serializes the resolved configuration; parsing the result reproduces it.
pub fn echo(cfg: &RunConfig, resolved_dps: &[usize]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[simulator]");
    match &cfg.sim.kind {
        hmcal::sim::SimulatorKind::BuiltinTestFunc => {
            let _ = writeln!(s, "kind = builtin-testfunc");
        }
        hmcal::sim::SimulatorKind::ExternalExec(spec) => {
            let _ = writeln!(s, "kind = external-exec");
            let _ = writeln!(s, "exec = {}", spec.exec_path.display());
            let _ = writeln!(s, "parallelism = {}", spec.parallelism);
            if let Some(t) = spec.timeout {
                let _ = writeln!(s, "timeout_secs = {}", t.as_secs());
            }
            let _ = writeln!(s, "names = {}", cfg.sim.bounds.names().join(", "));
            let lower: Vec<String> = cfg
                .sim
                .bounds
                .descale(&hmcal::sim::DesignPoint::new(vec![0.0; cfg.sim.d]).unwrap())
                .iter()
                .map(|v| hmcal::bundle::fmt_f64(*v))
                .collect();
            let upper: Vec<String> = cfg
                .sim
                .bounds
                .descale(&hmcal::sim::DesignPoint::new(vec![1.0; cfg.sim.d]).unwrap())
                .iter()
                .map(|v| hmcal::bundle::fmt_f64(*v))
                .collect();
            let _ = writeln!(s, "lower = {}", lower.join(", "));
            let _ = writeln!(s, "upper = {}", upper.join(", "));
        }
    }
    // the grid is echoed explicitly only when it differs from the builtin default
    let default = hmcal::sim::default_grid();
    if cfg.sim.grid != default {
        let g = cfg.sim.grid.values();
        let step = g[1] - g[0];
        let equidistant = g.windows(2).all(|w| ((w[1] - w[0]) - step).abs() < 1e-12 * step.abs());
        if equidistant {
            let _ = writeln!(
                s,
                "grid = {}:{}:{}",
                hmcal::bundle::fmt_f64(g[0]),
                hmcal::bundle::fmt_f64(step),
                g.len()
            );
        } else {
            let _ = writeln!(s, "grid_file = grid_echo.txt");
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "[target]");
    match &cfg.target {
        TargetSource::Point(coords) => {
            let parts: Vec<String> = coords.iter().map(|v| hmcal::bundle::fmt_f64(*v)).collect();
            let _ = writeln!(s, "x0 = {}", parts.join(", "));
        }
        TargetSource::File(path) => {
            let _ = writeln!(s, "file = {}", path.display());
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "[hm]");
    let _ = writeln!(s, "n1 = {}", cfg.hm.n1);
    let _ = writeln!(s, "c = {}", hmcal::bundle::fmt_f64(cfg.hm.cutoff));
    let _ = writeln!(s, "tk = {}", cfg.hm.tk);
    let dps: Vec<String> = resolved_dps.iter().map(|i| i.to_string()).collect();
    let _ = writeln!(s, "dps = {}", dps.join(", "));
    let _ = writeln!(s, "m = {}", cfg.hm.test_set_size);
    let _ = writeln!(s, "max_iterations = {}", cfg.hm.max_iterations);
    let _ = writeln!(s, "budget = {}", cfg.hm.budget);
    if let Some(k) = cfg.hm.subsample {
        let _ = writeln!(s, "subsample = {k}");
    }
    let _ = writeln!(s, "keep_series = {}", cfg.hm.keep_series);
    let _ = writeln!(s, "seed = {}", cfg.hm.seed);
    if let Some(sweep) = &cfg.sweep {
        let _ = writeln!(s);
        let _ = writeln!(s, "[sweep]");
        let join_us = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let _ = writeln!(s, "n1 = {}", join_us(&sweep.n1_levels));
        let cs: Vec<String> = sweep.c_levels.iter().map(|v| hmcal::bundle::fmt_f64(*v)).collect();
        let _ = writeln!(s, "c = {}", cs.join(", "));
        let _ = writeln!(s, "tk = {}", join_us(&sweep.tk_levels));
        let _ = writeln!(s, "m = {}", join_us(&sweep.m_levels));
        let _ = writeln!(
            s,
            "dps = {}",
            match sweep.dps_mode {
                SweepDpsMode::Fixed => "fixed",
                SweepDpsMode::Variable => "random",
            }
        );
        let _ = writeln!(s, "replications = {}", sweep.replications);
        if let Some(tk) = sweep.dps_comparison_tk {
            let _ = writeln!(s, "dps_comparison_tk = {tk}");
            let _ = writeln!(s, "dps_comparison_replications = {}", sweep.dps_comparison_replications);
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "[output]");
    let _ = writeln!(s, "dir = {}", cfg.out_dir.display());
    s
}

/// Assembles the sweep plan from the parsed sections.
pub fn sweep_plan(cfg: &RunConfig, quick: bool) -> Option<SweepPlan> {
    let sec = cfg.sweep.as_ref()?;
    Some(SweepPlan {
        n1_levels: sec.n1_levels.clone(),
        c_levels: sec.c_levels.clone(),
        tk_levels: sec.tk_levels.clone(),
        m_levels: sec.m_levels.clone(),
        dps_mode: sec.dps_mode,
        replications: if quick { sec.replications.min(5) } else { sec.replications },
        base_seed: cfg.hm.seed,
        base: HmConfig {
            keep_series: false,
            ..cfg.hm.clone()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = "\
[simulator]
kind = builtin-testfunc

[target]
x0 = 0.5, 0.5

[hm]
n1 = 10
c = 3
tk = 2
dps = fixed
m = 5000
seed = 42

[output]
dir = out
";

    #[test]
    fn parses_builtin_demo() {
        let cfg = parse(DEMO, None, None).unwrap();
        assert_eq!(cfg.sim.d, 2);
        assert_eq!(cfg.hm.n1, 10);
        assert_eq!(cfg.hm.seed, 42);
        assert!(!cfg.seed_was_drawn);
        assert_eq!(cfg.out_dir, PathBuf::from("out"));
    }

    #[test]
    fn seed_flag_overrides_file() {
        let cfg = parse(DEMO, Some(7), None).unwrap();
        assert_eq!(cfg.hm.seed, 7);
        assert!(!cfg.seed_was_drawn);
    }

    #[test]
    fn unknown_key_is_an_error_with_line() {
        let bad = DEMO.replace("m = 5000", "m = 5000\nbogus = 1");
        let e = parse(&bad, None, None).unwrap_err();
        assert!(e.message.contains("bogus"), "{e}");
        assert!(e.line > 0);
    }

    #[test]
    fn invariants_checked_at_parse_time() {
        let bad = DEMO.replace("n1 = 10", "n1 = 1");
        let e = parse(&bad, None, None).unwrap_err();
        assert!(e.message.contains("n1"), "{e}");

        let bad = DEMO.replace("dps = fixed", "dps = 0, 5");
        let e = parse(&bad, None, None).unwrap_err();
        assert!(e.message.contains("1-based") || e.message.contains("out of range"), "{e}");
    }

    #[test]
    fn external_requires_exec() {
        let bad = DEMO.replace("kind = builtin-testfunc", "kind = external-exec");
        let e = parse(&bad, None, None).unwrap_err();
        assert!(e.message.contains("exec"), "{e}");
    }

    #[test]
    fn explicit_dps_sets_tk() {
        let text = DEMO.replace("tk = 2\ndps = fixed", "dps = 33, 67");
        let cfg = parse(&text, None, None).unwrap();
        assert_eq!(cfg.hm.tk, 2);
        assert_eq!(cfg.hm.dps, DpsChoice::Explicit(vec![33, 67]));
    }

    #[test]
    fn echo_round_trips() {
        let text = DEMO.to_string() + "\n[sweep]\nn1 = 10\nreplications = 3\ndps_comparison_tk = 2\n";
        let cfg = parse(&text, None, None).unwrap();
        let dps = hmcal::histmatch::resolve_dps(&cfg.hm, cfg.sim.grid.len()).unwrap();
        let echoed = echo(&cfg, &dps);
        let cfg2 = parse(&echoed, None, None).unwrap();
        assert_eq!(cfg2.hm.seed, cfg.hm.seed);
        assert_eq!(cfg2.hm.n1, cfg.hm.n1);
        assert_eq!(cfg2.hm.tk, cfg.hm.tk);
        // the echo pins the resolved dps explicitly
        assert_eq!(cfg2.hm.dps, DpsChoice::Explicit(dps.clone()));
        assert_eq!(cfg2.out_dir, cfg.out_dir);
        let s2 = cfg2.sweep.as_ref().unwrap();
        assert_eq!(s2.n1_levels, vec![10]);
        assert_eq!(s2.replications, 3);
        // echo of the echo is identical text
        assert_eq!(echo(&cfg2, &dps), echoed);
    }

    #[test]
    fn shipped_sweep_config_enumerates_the_full_grid() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/sweep.conf");
        let text = std::fs::read_to_string(path).unwrap();
        let cfg = parse(&text, None, None).unwrap();
        let plan = sweep_plan(&cfg, false).unwrap();
        assert_eq!(plan.cell_count(), 81);
        assert_eq!(plan.replications, 25);
        // --quick caps replication for a smoke run
        let quick = sweep_plan(&cfg, true).unwrap();
        assert_eq!(quick.replications, 5);
    }

    #[test]
    fn grid_spec_parses() {
        let text = DEMO.replace(
            "kind = builtin-testfunc",
            "kind = builtin-testfunc\ngrid = 0.5:0.02:101",
        );
        let cfg = parse(&text, None, None).unwrap();
        assert_eq!(cfg.sim.grid.len(), 101);
        assert_eq!(cfg.sim.grid.values()[0], 0.5);
    }
}
