//! Files written by the command-line tool: CSV tables, the sweep
//! checkpoint and the run manifest.
//!
//! Floats are written in their shortest round-trip decimal form and missing
//! values as empty fields.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    compare_zones, government_curves, trivial_bound_violations, zone_boundary, InclusionReport,
    PolicyCurves, ZoneBoundary,
};
use crate::config::{AnalysisConfig, Config};
use crate::econ::Scheme;
use crate::error::{Error, Result};
use crate::eta::EtaSpec;
use crate::report::{RedistributionDemo, TrajectoryRecord};
use crate::sweep::{CellKey, CellMap, GrowthSurface, SweepGrid};
use crate::trajectory::EnsembleSummary;

pub const SURFACES_FILE: &str = "surfaces.csv";
pub const CURVES_FILE: &str = "curves.csv";
pub const BOUNDARIES_FILE: &str = "boundaries.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Writes `bytes` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let fail = |e: csv::Error| Error::Format {
        path: "<csv>".into(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(&row).map_err(fail)?;
    }
    w.into_inner().map_err(|e| Error::Format {
        path: "<csv>".into(),
        message: e.to_string(),
    })
}

fn spec_fields(spec: &EtaSpec) -> [String; 3] {
    [
        fmt_f64(spec.mean),
        fmt_f64(spec.geomean),
        fmt_f64(spec.scale),
    ]
}

pub const SURFACE_HEADER: [&str; 14] = [
    "scheme",
    "mean_eta",
    "geomean_eta",
    "N",
    "b",
    "a",
    "avg_g",
    "finite_count",
    "sample_count",
    "periods",
    "mean_log_g",
    "se_log_g",
    "eta_scale",
    "base_seed",
];

/// One row per cell, surfaces in sweep order, rows b-major.
pub fn surfaces_csv(surfaces: &[GrowthSurface]) -> Result<Vec<u8>> {
    let rows = surfaces.iter().flat_map(|s| {
        s.b_values.iter().enumerate().flat_map(move |(bi, &b)| {
            s.a_values.iter().enumerate().map(move |(ai, &a)| {
                let c = s.cell(bi, ai);
                vec![
                    s.scheme.name().to_string(),
                    fmt_f64(s.spec.mean),
                    fmt_f64(s.spec.geomean),
                    s.agents.to_string(),
                    fmt_f64(b),
                    fmt_f64(a),
                    fmt_opt(c.avg_g()),
                    c.finite_count.to_string(),
                    c.sample_count.to_string(),
                    s.periods.to_string(),
                    fmt_opt(c.mean_log_g),
                    fmt_opt(c.se_log_g),
                    fmt_f64(s.spec.scale),
                    s.base_seed.to_string(),
                ]
            })
        })
    });
    csv_bytes(&SURFACE_HEADER, rows)
}

/// Reads surfaces written by [`surfaces_csv`].
pub fn read_surfaces(path: &Path) -> Result<Vec<GrowthSurface>> {
    let bad = |message: String| Error::Format {
        path: path.display().to_string(),
        message,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column '{name}'")))
    };
    let idx: Vec<usize> = SURFACE_HEADER
        .iter()
        .map(|h| col(h))
        .collect::<Result<_>>()?;

    struct Group {
        scheme: Scheme,
        spec: EtaSpec,
        agents: usize,
        periods: usize,
        samples: usize,
        base_seed: u64,
        rows: Vec<(f64, f64, EnsembleSummary)>,
    }
    let mut groups: Vec<Group> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| record.get(idx[i]).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| {
                bad(format!(
                    "row {}: bad {} '{}'",
                    line + 2,
                    SURFACE_HEADER[i],
                    field(i)
                ))
            })
        };
        let opt = |i: usize| -> Result<Option<f64>> {
            if field(i).is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let int = |i: usize| -> Result<u64> {
            field(i).parse::<u64>().map_err(|_| {
                bad(format!(
                    "row {}: bad {} '{}'",
                    line + 2,
                    SURFACE_HEADER[i],
                    field(i)
                ))
            })
        };
        let scheme: Scheme = field(0)
            .parse()
            .map_err(|_| bad(format!("row {}: unknown scheme '{}'", line + 2, field(0))))?;
        let spec = EtaSpec::with_scale(num(1)?, num(2)?, num(12)?)?;
        let agents = int(3)? as usize;
        let summary = EnsembleSummary {
            sample_count: int(8)? as usize,
            finite_count: int(7)? as usize,
            mean_log_g: opt(10)?,
            se_log_g: opt(11)?,
        };
        let (periods, base_seed) = (int(9)? as usize, int(13)?);
        let pos = groups
            .iter()
            .position(|g| g.scheme == scheme && g.spec == spec && g.agents == agents);
        let group = match pos {
            Some(p) => &mut groups[p],
            None => {
                groups.push(Group {
                    scheme,
                    spec,
                    agents,
                    periods,
                    samples: summary.sample_count,
                    base_seed,
                    rows: Vec::new(),
                });
                groups.last_mut().expect("just pushed")
            }
        };
        group.rows.push((num(4)?, num(5)?, summary));
    }
    if groups.is_empty() {
        return Err(bad("no surface rows".into()));
    }
    groups
        .into_iter()
        .map(|g| {
            let axis = |f: fn(&(f64, f64, EnsembleSummary)) -> f64| -> Vec<f64> {
                let set: BTreeSet<u64> = g.rows.iter().map(|r| f(r).to_bits()).collect();
                let mut v: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
                v.sort_by(f64::total_cmp);
                v
            };
            let b_values = axis(|r| r.0);
            let a_values = axis(|r| r.1);
            let na = a_values.len();
            let mut cells = vec![None; na * b_values.len()];
            for (b, a, s) in &g.rows {
                let bi = b_values.partition_point(|x| x < b);
                let ai = a_values.partition_point(|x| x < a);
                cells[bi * na + ai] = Some(*s);
            }
            let cells = cells
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| {
                    bad(format!(
                        "{} surface (N={}, eta {}) does not cover a full grid",
                        g.scheme,
                        g.agents,
                        g.spec.label()
                    ))
                })?;
            Ok(GrowthSurface {
                scheme: g.scheme,
                spec: g.spec,
                agents: g.agents,
                periods: g.periods,
                samples: g.samples,
                base_seed: g.base_seed,
                a_values,
                b_values,
                cells,
            })
        })
        .collect()
}

fn surface_fields(s: &GrowthSurface) -> Vec<String> {
    let [mean, geo, scale] = spec_fields(&s.spec);
    vec![
        s.scheme.name().to_string(),
        mean,
        geo,
        scale,
        s.agents.to_string(),
    ]
}

pub fn curves_csv(surfaces: &[GrowthSurface], curves: &[PolicyCurves]) -> Result<Vec<u8>> {
    let header = [
        "scheme",
        "mean_eta",
        "geomean_eta",
        "eta_scale",
        "N",
        "b",
        "a_opt",
        "a_opt_smooth",
        "g_max",
        "g_max_se",
        "gov_opttax",
        "gov_opttax_raw",
        "is_b_star",
    ];
    let rows = surfaces.iter().zip(curves).flat_map(|(s, c)| {
        let head = surface_fields(s);
        (0..c.b_values.len()).map(move |i| {
            let mut row = head.clone();
            row.extend([
                fmt_f64(c.b_values[i]),
                fmt_opt(c.a_opt[i]),
                fmt_opt(c.a_opt_smooth[i]),
                fmt_opt(c.g_max[i]),
                fmt_opt(c.g_max_se[i]),
                fmt_opt(c.gov_opttax[i]),
                fmt_opt(c.gov_opttax_raw[i]),
                u8::from(c.b_star == Some(i)).to_string(),
            ]);
            row
        })
    });
    csv_bytes(&header, rows)
}

pub fn boundaries_csv(surfaces: &[GrowthSurface], zones: &[ZoneBoundary]) -> Result<Vec<u8>> {
    let header = [
        "scheme",
        "mean_eta",
        "geomean_eta",
        "eta_scale",
        "N",
        "kind",
        "b",
        "a",
    ];
    let rows = surfaces.iter().zip(zones).flat_map(|(s, z)| {
        let head = surface_fields(s);
        let tagged = z
            .crossings
            .iter()
            .map(|p| ("crossing", p))
            .chain(z.trivial_bound.iter().map(|p| ("trivial_bound", p)));
        tagged
            .map(|(kind, &(b, a))| {
                let mut row = head.clone();
                row.extend([kind.to_string(), fmt_f64(b), fmt_f64(a)]);
                row
            })
            .collect::<Vec<_>>()
    });
    csv_bytes(&header, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceSummary {
    pub scheme: Scheme,
    pub eta: EtaSpec,
    pub agents: usize,
    pub missing_cells: usize,
    pub b_star: Option<f64>,
    pub gov_opttax_at_b_star: Option<f64>,
    pub trivial_bound_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InclusionSummary {
    /// What differs between the two surfaces: `scheme` or `agents`.
    pub axis: &'static str,
    pub inner: String,
    pub outer: String,
    pub eta: EtaSpec,
    /// The shared scheme or society size.
    pub fixed: String,
    pub report: InclusionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisSummary {
    pub smoothing_window: usize,
    pub slack: f64,
    pub surfaces: Vec<SurfaceSummary>,
    pub inclusions: Vec<InclusionSummary>,
}

/// Everything `analyze` derives from a set of surfaces.
pub struct Analysis {
    pub curves: Vec<PolicyCurves>,
    pub zones: Vec<ZoneBoundary>,
    pub summary: AnalysisSummary,
}

/// Scheme nesting order of the growth zones, innermost first.
const SCHEME_NESTING: [Scheme; 3] = [
    Scheme::Regressive,
    Scheme::Proportional,
    Scheme::Progressive,
];

pub fn analyze(surfaces: &[GrowthSurface], cfg: &AnalysisConfig) -> Result<Analysis> {
    let curves: Vec<PolicyCurves> = surfaces
        .iter()
        .map(|s| government_curves(s, cfg.smoothing_window))
        .collect();
    let zones = surfaces.iter().map(zone_boundary).collect();
    let summaries = surfaces
        .iter()
        .zip(&curves)
        .map(|(s, c)| SurfaceSummary {
            scheme: s.scheme,
            eta: s.spec,
            agents: s.agents,
            missing_cells: s.missing_cells(),
            b_star: c.b_star_value(),
            gov_opttax_at_b_star: c.b_star.and_then(|i| c.gov_opttax[i]),
            trivial_bound_violations: trivial_bound_violations(s, cfg.slack).len(),
        })
        .collect();

    let mut inclusions = Vec::new();
    let find = |scheme: Scheme, spec: &EtaSpec, agents: usize| {
        surfaces
            .iter()
            .find(|s| s.scheme == scheme && s.spec == *spec && s.agents == agents)
    };
    let mut keys: Vec<(EtaSpec, usize)> = Vec::new();
    for s in surfaces {
        if !keys.contains(&(s.spec, s.agents)) {
            keys.push((s.spec, s.agents));
        }
    }
    for (spec, agents) in &keys {
        let present: Vec<&GrowthSurface> = SCHEME_NESTING
            .iter()
            .filter_map(|&m| find(m, spec, *agents))
            .collect();
        for pair in present.windows(2) {
            inclusions.push(InclusionSummary {
                axis: "scheme",
                inner: pair[0].scheme.name().to_string(),
                outer: pair[1].scheme.name().to_string(),
                eta: *spec,
                fixed: agents.to_string(),
                report: compare_zones(pair[0], pair[1], cfg.slack)?,
            });
        }
    }
    let mut specs: Vec<EtaSpec> = Vec::new();
    for (spec, _) in &keys {
        if !specs.contains(spec) {
            specs.push(*spec);
        }
    }
    for spec in &specs {
        let mut sizes: Vec<usize> = keys.iter().filter(|k| k.0 == *spec).map(|k| k.1).collect();
        sizes.sort_unstable();
        for scheme in Scheme::ALL {
            let present: Vec<&GrowthSurface> = sizes
                .iter()
                .filter_map(|&n| find(scheme, spec, n))
                .collect();
            for pair in present.windows(2) {
                inclusions.push(InclusionSummary {
                    axis: "agents",
                    inner: pair[0].agents.to_string(),
                    outer: pair[1].agents.to_string(),
                    eta: *spec,
                    fixed: scheme.name().to_string(),
                    report: compare_zones(pair[0], pair[1], cfg.slack)?,
                });
            }
        }
    }
    Ok(Analysis {
        curves,
        zones,
        summary: AnalysisSummary {
            smoothing_window: cfg.smoothing_window,
            slack: cfg.slack,
            surfaces: summaries,
            inclusions,
        },
    })
}

/// Writes curves, boundaries and the summary; returns the written paths.
pub fn write_analysis(
    dir: &Path,
    surfaces: &[GrowthSurface],
    analysis: &Analysis,
) -> Result<Vec<PathBuf>> {
    let files = [
        (CURVES_FILE, curves_csv(surfaces, &analysis.curves)?),
        (BOUNDARIES_FILE, boundaries_csv(surfaces, &analysis.zones)?),
        (SUMMARY_FILE, json_bytes(&analysis.summary)?),
    ];
    let mut out = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        out.push(path);
    }
    Ok(out)
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Format {
        path: "<json>".into(),
        message: e.to_string(),
    })?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn redistribution_csv(demo: &RedistributionDemo) -> Result<Vec<u8>> {
    let header = ["scheme", "agent", "income", "tax", "net_income"];
    let rows = demo.rows.iter().map(|r| {
        vec![
            r.scheme.name().to_string(),
            r.agent.to_string(),
            fmt_f64(r.income),
            fmt_f64(r.tax),
            fmt_f64(r.net_income),
        ]
    });
    csv_bytes(&header, rows)
}

pub fn trajectories_csv(records: &[TrajectoryRecord]) -> Result<Vec<u8>> {
    let header = ["t", "series", "total_income", "human_capital"];
    let rows = records.iter().map(|r| {
        vec![
            r.t.to_string(),
            r.series.clone(),
            fmt_f64(r.total_income),
            fmt_opt(r.human_capital),
        ]
    });
    csv_bytes(&header, rows)
}

const CHECKPOINT_FORMAT: &str = "redisgrowth-checkpoint/1";

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    grid: SweepGrid,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointRecord {
    cell: CellKey,
    summary: EnsembleSummary,
}

/// Append-only record of completed sweep cells: a header line with the
/// grid, then one JSON line per cell.
#[derive(Debug)]
pub struct Checkpoint {
    path: PathBuf,
    file: File,
}

/// Contents of an existing checkpoint.
#[derive(Debug, Clone)]
pub struct CheckpointState {
    pub grid: SweepGrid,
    pub cells: CellMap,
    /// Bytes of an unterminated final line left by an interrupted append.
    pub torn_bytes: usize,
    /// Length of the valid prefix.
    valid_len: u64,
}

impl Checkpoint {
    /// Starts a new checkpoint, replacing any existing file.
    pub fn create(path: &Path, grid: &SweepGrid) -> Result<Self> {
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT.into(),
            grid: grid.clone(),
        };
        let mut line = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        line.push(b'\n');
        write_atomic(path, &line)?;
        Self::open_append(path)
    }

    fn open_append(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    /// Parses a checkpoint. `Ok(None)` means the file holds no complete
    /// header and can be started afresh.
    pub fn load(path: &Path) -> Result<Option<CheckpointState>> {
        let corrupt = |message: String| Error::Checkpoint {
            path: path.display().to_string(),
            message,
        };
        let mut text = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|e| Error::io(path, e))?;
        let valid_len = text.rfind('\n').map_or(0, |i| i + 1);
        let torn_bytes = text.len() - valid_len;
        let mut lines = text[..valid_len].lines().enumerate();
        let Some((_, head)) = lines.next() else {
            return Ok(None);
        };
        let header: CheckpointHeader =
            serde_json::from_str(head).map_err(|e| corrupt(format!("line 1: {e}")))?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(corrupt(format!("unsupported format '{}'", header.format)));
        }
        let grid = header.grid;
        let mut cells = CellMap::new();
        for (i, line) in lines {
            let rec: CheckpointRecord =
                serde_json::from_str(line).map_err(|e| corrupt(format!("line {}: {e}", i + 1)))?;
            if !grid.contains(&rec.cell) {
                return Err(corrupt(format!(
                    "line {}: cell {:?} outside the grid",
                    i + 1,
                    rec.cell
                )));
            }
            if let Some(prev) = cells.insert(rec.cell, rec.summary) {
                if prev != rec.summary {
                    return Err(corrupt(format!(
                        "line {}: conflicting records for cell {:?}",
                        i + 1,
                        rec.cell
                    )));
                }
            }
        }
        Ok(Some(CheckpointState {
            grid,
            cells,
            torn_bytes,
            valid_len: valid_len as u64,
        }))
    }

    /// Continues an existing checkpoint for `grid`, or starts one. A torn
    /// final line is cut off before appending.
    pub fn resume(path: &Path, grid: &SweepGrid) -> Result<(Self, CellMap, usize)> {
        if !path.exists() {
            return Ok((Self::create(path, grid)?, CellMap::new(), 0));
        }
        let Some(state) = Self::load(path)? else {
            return Ok((Self::create(path, grid)?, CellMap::new(), 0));
        };
        if state.grid != *grid {
            return Err(Error::Config(format!(
                "{} belongs to a different sweep configuration; remove it or run without resuming",
                path.display()
            )));
        }
        if state.torn_bytes > 0 {
            OpenOptions::new()
                .write(true)
                .open(path)
                .and_then(|f| f.set_len(state.valid_len))
                .map_err(|e| Error::io(path, e))?;
        }
        Ok((Self::open_append(path)?, state.cells, state.torn_bytes))
    }

    /// Appends one cell in a single write.
    pub fn append(&mut self, cell: &CellKey, summary: &EnsembleSummary) -> Result<()> {
        let rec = CheckpointRecord {
            cell: *cell,
            summary: *summary,
        };
        let mut line = serde_json::to_vec(&rec).map_err(|e| Error::Checkpoint {
            path: self.path.display().to_string(),
            message: e.to_string(),
        })?;
        line.push(b'\n');
        self.file
            .write_all(&line)
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn sync(&mut self) -> Result<()> {
        self.file.sync_data().map_err(|e| Error::io(&self.path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub base_seed: u64,
    pub config: Config,
    /// RFC 3339 creation time.
    pub created: String,
    pub outputs: Vec<OutputDigest>,
}

pub fn sha256_file(path: &Path) -> Result<(u64, String)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok((bytes.len() as u64, hex::encode(Sha256::digest(&bytes))))
}

impl RunManifest {
    pub fn new(command: &str, config: &Config, outputs: &[PathBuf]) -> Result<Self> {
        let outputs = outputs
            .iter()
            .map(|p| {
                let (bytes, sha256) = sha256_file(p)?;
                let file = p
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                Ok(OutputDigest {
                    file,
                    bytes,
                    sha256,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            base_seed: config.seed,
            config: config.clone(),
            created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            outputs,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Writes `config.toml` and then the manifest covering `outputs` and the
/// config, last.
pub fn finish_run(
    dir: &Path,
    command: &str,
    config: &Config,
    outputs: &[PathBuf],
) -> Result<PathBuf> {
    let config_path = dir.join(CONFIG_FILE);
    write_atomic(&config_path, config.to_toml()?.as_bytes())?;
    let mut all = outputs.to_vec();
    all.push(config_path);
    let manifest = RunManifest::new(command, config, &all)?;
    let path = dir.join(MANIFEST_FILE);
    write_atomic(&path, &json_bytes(&manifest)?)?;
    Ok(path)
}
