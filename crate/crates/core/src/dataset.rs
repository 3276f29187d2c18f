//! Exhaustive configuration → throughput table.
//!
//! Every global configuration of a deployment is simulated once (or `reps`
//! times and averaged) and stored under its [`GlobalConfigId`]. The table is
//! persisted as long-format CSV:
//!
//! ```text
//! # deployment_digest=<sha256 hex>
//! # n_channels=4
//! # n_bss=4
//! # duration_s=5
//! # reps=1
//! config_id,bss,primary,max_bw,throughput_mbps
//! 0,0,1,1,28.728000
//! ...
//! ```
//!
//! Rows are sorted by id, then BSS. Throughput carries six decimals, and
//! in-memory values are rounded the same way so save/load round-trips exactly.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::deployment::Deployment;
use crate::error::{Error, Result};
use crate::seed::stable_hash;
use crate::sim::{simulate, GlobalConfig, MacParams};
use crate::spectrum::ActionSpace;

pub const CSV_HEADER: &str = "config_id,bss,primary,max_bw,throughput_mbps";
const COLUMNS: [&str; 5] = ["config_id", "bss", "primary", "max_bw", "throughput_mbps"];

/// Row address of a global configuration: `Σ_w index_w · |A|^w`, BSS 0 least significant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GlobalConfigId(pub u64);

impl GlobalConfigId {
    pub fn count(space: &ActionSpace, n_bss: usize) -> u64 {
        (space.len() as u64).pow(n_bss as u32)
    }

    pub fn encode(config: &GlobalConfig, space: &ActionSpace) -> Result<Self> {
        let base = space.len() as u64;
        let mut id = 0u64;
        for a in config.actions().iter().rev() {
            id = id * base + space.index(*a)? as u64;
        }
        Ok(GlobalConfigId(id))
    }

    pub fn decode(self, space: &ActionSpace, n_bss: usize) -> Result<GlobalConfig> {
        let total = Self::count(space, n_bss);
        if self.0 >= total {
            return Err(Error::validation(format!(
                "config id {} outside 0..{total}",
                self.0
            )));
        }
        let base = space.len() as u64;
        let mut rest = self.0;
        let mut actions = Vec::with_capacity(n_bss);
        for _ in 0..n_bss {
            actions.push(space.action((rest % base) as usize)?);
            rest /= base;
        }
        Ok(GlobalConfig(actions))
    }
}

impl std::fmt::Display for GlobalConfigId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Generation settings.
#[derive(Clone, Debug)]
pub struct GenerateOptions {
    pub duration_s: f64,
    pub mac: MacParams,
    pub reps: u32,
    pub base_seed: u64,
    /// Worker threads; 0 uses rayon's default.
    pub parallelism: usize,
}

impl GenerateOptions {
    pub fn new(mac: MacParams) -> Self {
        GenerateOptions {
            duration_s: 5.0,
            mac,
            reps: 1,
            base_seed: 0,
            parallelism: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub deployment_digest: String,
    pub n_channels: usize,
    pub n_bss: usize,
    pub duration_s: f64,
    pub reps: u32,
    records: BTreeMap<u64, Vec<f64>>,
}

fn round6(x: f64) -> f64 {
    format!("{x:.6}").parse().expect("formatted float parses")
}

/// Seed of repetition `rep` of configuration `id`.
pub fn record_seed(base_seed: u64, id: GlobalConfigId, rep: u32) -> u64 {
    stable_hash(&[base_seed, id.0, u64::from(rep)])
}

fn simulate_record(d: &Deployment, space: &ActionSpace, id: u64, opts: &GenerateOptions) -> Result<Vec<f64>> {
    let id = GlobalConfigId(id);
    let config = id.decode(space, d.n_bss())?;
    let mut sum = vec![0.0; d.n_bss()];
    for rep in 0..opts.reps {
        let r = simulate(d, &config, opts.duration_s, &opts.mac, record_seed(opts.base_seed, id, rep))?;
        for (s, t) in sum.iter_mut().zip(&r.throughput_mbps) {
            *s += t;
        }
    }
    Ok(sum.into_iter().map(|s| round6(s / f64::from(opts.reps))).collect())
}

fn thread_pool(parallelism: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::validation(format!("cannot build thread pool: {e}")))
}

fn check_options(opts: &GenerateOptions) -> Result<()> {
    if opts.reps == 0 {
        return Err(Error::validation("reps must be >= 1"));
    }
    opts.mac.validate()
}

/// Ids are simulated in parallel and handed to `sink` in ascending blocks.
fn generate_range(
    d: &Deployment,
    opts: &GenerateOptions,
    start: u64,
    mut sink: impl FnMut(u64, Vec<f64>) -> Result<()>,
) -> Result<()> {
    const CHUNK: u64 = 512;
    let space = ActionSpace::new(d.n_channels)?;
    let total = GlobalConfigId::count(&space, d.n_bss());
    let pool = thread_pool(opts.parallelism)?;
    let mut lo = start;
    while lo < total {
        let hi = (lo + CHUNK).min(total);
        let block: Vec<Result<Vec<f64>>> = pool.install(|| {
            (lo..hi)
                .into_par_iter()
                .map(|id| simulate_record(d, &space, id, opts))
                .collect()
        });
        for (id, rec) in (lo..hi).zip(block) {
            sink(id, rec?)?;
        }
        log::debug!("generated ids {lo}..{hi} of {total}");
        lo = hi;
    }
    Ok(())
}

/// Simulates every global configuration of `d`.
pub fn generate(d: &Deployment, opts: &GenerateOptions) -> Result<Dataset> {
    check_options(opts)?;
    let mut ds = Dataset::empty(d, opts.duration_s, opts.reps);
    generate_range(d, opts, 0, |id, rec| {
        ds.records.insert(id, rec);
        Ok(())
    })?;
    Ok(ds)
}

/// Like [`generate`], streaming rows to `path`. An existing file written for
/// the same deployment and settings is resumed after its last complete id.
pub fn generate_to_file(d: &Deployment, opts: &GenerateOptions, path: &Path) -> Result<Dataset> {
    check_options(opts)?;
    let template = Dataset::empty(d, opts.duration_s, opts.reps);
    let (mut ds, resume_offset) = match File::open(path) {
        Ok(mut f) => {
            let mut text = String::new();
            f.read_to_string(&mut text).map_err(|e| Error::io(path, e))?;
            if text.contains(&format!("{CSV_HEADER}\n")) {
                let partial = read_csv(&text, Some(&template), true)?;
                (partial.dataset, Some(partial.complete_bytes))
            } else {
                // Interrupted before the header was written.
                (template, None)
            }
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => (template, None),
        Err(e) => return Err(Error::io(path, e)),
    };

    let file = match resume_offset {
        Some(offset) => {
            let mut f = OpenOptions::new()
                .write(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            f.set_len(offset).map_err(|e| Error::io(path, e))?;
            f.seek(SeekFrom::End(0)).map_err(|e| Error::io(path, e))?;
            f
        }
        None => File::create(path).map_err(|e| Error::io(path, e))?,
    };
    let mut out = BufWriter::new(file);
    if resume_offset.is_none() {
        ds.write_preamble(&mut out).map_err(|e| Error::io(path, e))?;
    }
    let start = ds.records.keys().next_back().map_or(0, |&k| k + 1);
    if start > 0 {
        log::info!("resuming {} at config id {start}", path.display());
    }
    let space = ActionSpace::new(d.n_channels)?;
    generate_range(d, opts, start, |id, rec| {
        write_rows(&mut out, &space, id, &rec)
            .and_then(|_| if id % 512 == 511 { out.flush() } else { Ok(()) })
            .map_err(|e| Error::io(path, e))?;
        ds.records.insert(id, rec);
        Ok(())
    })?;
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(ds)
}

fn write_rows<W: Write>(out: &mut W, space: &ActionSpace, id: u64, rec: &[f64]) -> std::io::Result<()> {
    let config = GlobalConfigId(id)
        .decode(space, rec.len())
        .expect("stored ids are valid");
    for (w, (a, t)) in config.actions().iter().zip(rec).enumerate() {
        writeln!(out, "{id},{w},{},{},{t:.6}", a.primary, a.max_bandwidth)?;
    }
    Ok(())
}

struct PartialRead {
    dataset: Dataset,
    /// Byte length of the prefix holding the preamble and complete ids.
    complete_bytes: u64,
}

fn preamble_value<'a>(preamble: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    preamble
        .get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::validation(format!("dataset preamble is missing `{key}`")))
}

fn parse_field<T: std::str::FromStr>(text: &str, field: &str, line: usize) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| Error::validation(format!("line {line}: bad {field} value {text:?}")))
}

/// Parses a dataset CSV. With `tolerate_tail`, a trailing incomplete id group
/// is dropped instead of rejected (used for resuming).
fn read_csv(text: &str, expect: Option<&Dataset>, tolerate_tail: bool) -> Result<PartialRead> {
    let mut preamble = BTreeMap::new();
    let mut header_seen = false;
    let mut ds: Option<Dataset> = None;
    let mut space: Option<ActionSpace> = None;
    let mut offset = 0u64;
    let mut complete_bytes = 0u64;
    let mut group: Option<(u64, Vec<f64>)> = None;
    let mut last_id: Option<u64> = None;

    for (ln, chunk) in text.split_inclusive('\n').enumerate() {
        let line_no = ln + 1;
        if tolerate_tail && !chunk.ends_with('\n') {
            // Interrupted write.
            break;
        }
        let line_start = offset;
        offset += chunk.len() as u64;
        let line = chunk.trim_end_matches('\n').trim_end_matches('\r');

        if !header_seen {
            if let Some(kv) = line.strip_prefix('#') {
                let (k, v) = kv.trim().split_once('=').ok_or_else(|| {
                    Error::validation(format!("line {line_no}: malformed preamble {line:?}"))
                })?;
                preamble.insert(k.trim().to_string(), v.trim().to_string());
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            for c in COLUMNS {
                if !cols.contains(&c) {
                    return Err(Error::validation(format!("dataset header is missing column `{c}`")));
                }
            }
            if cols != COLUMNS {
                return Err(Error::validation(format!(
                    "dataset header must be `{CSV_HEADER}`, got `{line}`"
                )));
            }
            header_seen = true;
            let parsed = Dataset {
                deployment_digest: preamble_value(&preamble, "deployment_digest")?.to_string(),
                n_channels: parse_field(preamble_value(&preamble, "n_channels")?, "n_channels", 0)?,
                n_bss: parse_field(preamble_value(&preamble, "n_bss")?, "n_bss", 0)?,
                duration_s: parse_field(preamble_value(&preamble, "duration_s")?, "duration_s", 0)?,
                reps: parse_field(preamble_value(&preamble, "reps")?, "reps", 0)?,
                records: BTreeMap::new(),
            };
            if parsed.n_bss == 0 {
                return Err(Error::validation("n_bss must be >= 1"));
            }
            if let Some(e) = expect {
                parsed.check_compatible(e)?;
            }
            space = Some(ActionSpace::new(parsed.n_channels)?);
            ds = Some(parsed);
            complete_bytes = offset;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let ds_ref = ds.as_mut().expect("header parsed");
        let space = space.as_ref().expect("header parsed");
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != COLUMNS.len() {
            return Err(Error::validation(format!(
                "line {line_no}: expected {} columns, found {}",
                COLUMNS.len(),
                fields.len()
            )));
        }
        let id: u64 = parse_field(fields[0], "config_id", line_no)?;
        let bss: usize = parse_field(fields[1], "bss", line_no)?;
        let primary: usize = parse_field(fields[2], "primary", line_no)?;
        let max_bw: usize = parse_field(fields[3], "max_bw", line_no)?;
        let tput: f64 = parse_field(fields[4], "throughput_mbps", line_no)?;
        if !tput.is_finite() || tput < 0.0 {
            return Err(Error::validation(format!("line {line_no}: throughput_mbps must be >= 0")));
        }

        if group.as_ref().map(|(g, _)| *g) != Some(id) {
            if let Some((gid, vals)) = group.take() {
                finish_group(ds_ref, gid, vals, line_no)?;
                complete_bytes = line_start;
            }
            if last_id.is_some_and(|l| id <= l) {
                return Err(Error::validation(format!(
                    "line {line_no}: config_id {id} is not ascending"
                )));
            }
            last_id = Some(id);
            group = Some((id, Vec::with_capacity(ds_ref.n_bss)));
        }
        let (_, vals) = group.as_mut().expect("group open");
        if bss != vals.len() || bss >= ds_ref.n_bss {
            return Err(Error::validation(format!(
                "line {line_no}: config_id {id} has bss {bss} out of order (expected {})",
                vals.len()
            )));
        }
        let config = GlobalConfigId(id).decode(space, ds_ref.n_bss)?;
        let a = config.actions()[bss];
        if a.primary != primary || a.max_bandwidth != max_bw {
            return Err(Error::validation(format!(
                "line {line_no}: primary/max_bw ({primary},{max_bw}) disagree with config_id {id} (expected {},{})",
                a.primary, a.max_bandwidth
            )));
        }
        vals.push(tput);
    }

    let mut ds = ds.ok_or_else(|| Error::validation("dataset is missing its header line"))?;
    if let Some((gid, vals)) = group.take() {
        if vals.len() == ds.n_bss {
            ds.records.insert(gid, vals);
            complete_bytes = offset;
        } else if !tolerate_tail {
            finish_group(&mut ds, gid, vals, 0)?;
        }
    }
    Ok(PartialRead {
        dataset: ds,
        complete_bytes,
    })
}

fn finish_group(ds: &mut Dataset, id: u64, vals: Vec<f64>, line_no: usize) -> Result<()> {
    if vals.len() != ds.n_bss {
        return Err(Error::validation(format!(
            "config_id {id} has {} throughput rows but n_bss={} (before line {line_no})",
            vals.len(),
            ds.n_bss
        )));
    }
    ds.records.insert(id, vals);
    Ok(())
}

/// Configurations in which every BSS reaches the satisfaction threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Optima {
    /// Satisfying ids (ascending) with their worst-BSS satisfaction.
    pub satisfied: Vec<(GlobalConfigId, f64)>,
    /// Best achievable worst-BSS satisfaction over the whole table.
    pub max_min_sigma: f64,
    pub argmax: Option<GlobalConfigId>,
}

impl Dataset {
    fn empty(d: &Deployment, duration_s: f64, reps: u32) -> Self {
        Dataset {
            deployment_digest: d.digest().to_string(),
            n_channels: d.n_channels,
            n_bss: d.n_bss(),
            duration_s,
            reps,
            records: BTreeMap::new(),
        }
    }

    /// Builds a dataset from explicit rows, rounding values to the stored precision.
    pub fn from_records(
        deployment_digest: impl Into<String>,
        n_channels: usize,
        n_bss: usize,
        duration_s: f64,
        reps: u32,
        records: impl IntoIterator<Item = (GlobalConfigId, Vec<f64>)>,
    ) -> Result<Self> {
        let space = ActionSpace::new(n_channels)?;
        let mut map = BTreeMap::new();
        for (id, vals) in records {
            id.decode(&space, n_bss)?;
            if vals.len() != n_bss {
                return Err(Error::validation(format!(
                    "config_id {id} has {} values for {n_bss} BSSs",
                    vals.len()
                )));
            }
            map.insert(id.0, vals.into_iter().map(round6).collect());
        }
        Ok(Dataset {
            deployment_digest: deployment_digest.into(),
            n_channels,
            n_bss,
            duration_s,
            reps,
            records: map,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn space(&self) -> ActionSpace {
        ActionSpace::new(self.n_channels).expect("validated on construction")
    }

    pub fn expected_len(&self) -> u64 {
        GlobalConfigId::count(&self.space(), self.n_bss)
    }

    pub fn is_complete(&self) -> bool {
        self.records.len() as u64 == self.expected_len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (GlobalConfigId, &[f64])> {
        self.records.iter().map(|(&k, v)| (GlobalConfigId(k), v.as_slice()))
    }

    pub fn get(&self, id: GlobalConfigId) -> Result<&[f64]> {
        self.records
            .get(&id.0)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::NotFound(format!("config_id {id} is not in the dataset")))
    }

    /// Stored per-BSS throughput of a global configuration.
    pub fn lookup(&self, g: &GlobalConfig) -> Result<&[f64]> {
        if g.actions().len() != self.n_bss {
            return Err(Error::validation(format!(
                "global configuration has {} actions, dataset has {} BSSs",
                g.actions().len(),
                self.n_bss
            )));
        }
        let id = GlobalConfigId::encode(g, &self.space())?;
        self.get(id)
    }

    fn check_compatible(&self, other: &Dataset) -> Result<()> {
        if self.deployment_digest != other.deployment_digest {
            return Err(Error::validation(format!(
                "deployment_digest mismatch: file has {}, expected {}",
                self.deployment_digest, other.deployment_digest
            )));
        }
        if self.n_channels != other.n_channels {
            return Err(Error::validation("n_channels mismatch"));
        }
        if self.n_bss != other.n_bss {
            return Err(Error::validation("n_bss mismatch"));
        }
        if self.duration_s != other.duration_s {
            return Err(Error::validation("duration_s mismatch"));
        }
        if self.reps != other.reps {
            return Err(Error::validation("reps mismatch"));
        }
        Ok(())
    }

    /// Rejects a dataset generated for a different deployment.
    pub fn check_deployment(&self, d: &Deployment) -> Result<()> {
        if self.deployment_digest != d.digest() {
            return Err(Error::validation(format!(
                "deployment_digest mismatch: dataset has {}, deployment file hashes to {}",
                self.deployment_digest,
                d.digest()
            )));
        }
        if self.n_channels != d.n_channels || self.n_bss != d.n_bss() {
            return Err(Error::validation(
                "n_channels/n_bss of dataset and deployment disagree",
            ));
        }
        Ok(())
    }

    fn write_preamble<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "# deployment_digest={}", self.deployment_digest)?;
        writeln!(out, "# n_channels={}", self.n_channels)?;
        writeln!(out, "# n_bss={}", self.n_bss)?;
        writeln!(out, "# duration_s={}", self.duration_s)?;
        writeln!(out, "# reps={}", self.reps)?;
        writeln!(out, "{CSV_HEADER}")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        self.write_preamble(&mut out)?;
        let space = self.space();
        for (&id, rec) in &self.records {
            write_rows(&mut out, &space, id, rec)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_csv(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        Ok(read_csv(text, None, false)?.dataset)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(&text)
    }

    /// Loads and checks the dataset against the deployment it claims to describe.
    pub fn load_for(path: impl AsRef<Path>, d: &Deployment) -> Result<Self> {
        let ds = Self::load(path)?;
        ds.check_deployment(d)?;
        Ok(ds)
    }

    /// All ids whose worst-BSS satisfaction reaches `threshold`.
    pub fn find_optima(&self, loads: &[f64], threshold: f64) -> Result<Optima> {
        if loads.len() != self.n_bss {
            return Err(Error::validation(format!(
                "{} loads given for {} BSSs",
                loads.len(),
                self.n_bss
            )));
        }
        if loads.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::validation("loads must be > 0"));
        }
        let mut satisfied = Vec::new();
        let mut best = f64::NEG_INFINITY;
        let mut argmax = None;
        for (id, rec) in self.iter() {
            let worst = rec
                .iter()
                .zip(loads)
                .map(|(t, l)| (t / l).clamp(0.0, 1.0))
                .fold(f64::INFINITY, f64::min);
            if worst > best {
                best = worst;
                argmax = Some(id);
            }
            if worst >= threshold {
                satisfied.push((id, worst));
            }
        }
        Ok(Optima {
            satisfied,
            max_min_sigma: if argmax.is_some() { best } else { 0.0 },
            argmax,
        })
    }
}
