//! Experiment driver behind the CLI: pairwise method comparison on fBM paths
//! and runtime scaling of the grid solver.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{sample_fbm, FbmConfig};
use crate::oracles::{sdkr_kernel, series_kernel_path, McConfig};
use crate::rough_path::{block_increments, PathSamples};
use crate::solver::{compile_scheme, solve_kernel, zeta_min, CompiledScheme, KernelTable, SchemeConfig};
use crate::words::WordIndexer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Sdk(usize),
    Sdkr,
    Series,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Sdk(k) => write!(f, "SDK{k}"),
            Method::Sdkr => f.write_str("SDKr"),
            Method::Series => f.write_str("SERIES"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        match up.as_str() {
            "SDKR" => Ok(Method::Sdkr),
            "SERIES" => Ok(Method::Series),
            _ => up
                .strip_prefix("SDK")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .map(Method::Sdk)
                .ok_or_else(|| Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

impl TryFrom<String> for Method {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingAxis {
    Grid,
    Block,
    Dimension,
}

impl FromStr for ScalingAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "grid" => Ok(ScalingAxis::Grid),
            "block" => Ok(ScalingAxis::Block),
            "dimension" => Ok(ScalingAxis::Dimension),
            _ => Err(Error::Config(format!("unknown scaling axis {s:?}"))),
        }
    }
}

impl fmt::Display for ScalingAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalingAxis::Grid => "grid",
            ScalingAxis::Block => "block",
            ScalingAxis::Dimension => "dimension",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub methods: Vec<Method>,
    pub hurst: Vec<f64>,
    pub n_paths: usize,
    pub dims: usize,
    pub horizon: f64,
    /// `2^log2_fine` fBM increments per path.
    pub log2_fine: u32,
    /// `2^log2_coarse` blocks on the solver grid.
    pub log2_coarse: u32,
    /// Level used by the `kernel` command and the scaling study.
    pub kappa: usize,
    /// Extension level; `None` takes the minimum admissible value per method.
    pub zeta: Option<usize>,
    pub matrix_dim: usize,
    pub n_sims: usize,
    pub series_level: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub axis: ScalingAxis,
    /// Values swept by the scaling study.
    pub axis_values: Vec<u32>,
    pub repeats: usize,
    pub memory_cap_bytes: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            methods: vec![Method::Sdk(1), Method::Sdk(2), Method::Sdk(3)],
            hurst: vec![0.85, 0.5, 0.255],
            n_paths: 20,
            dims: 3,
            horizon: 1.0,
            log2_fine: 10,
            log2_coarse: 6,
            kappa: 2,
            zeta: None,
            matrix_dim: 200,
            n_sims: 250,
            series_level: 12,
            seed: 0,
            out: PathBuf::from("out"),
            axis: ScalingAxis::Grid,
            axis_values: vec![4, 5, 6, 7],
            repeats: 3,
            memory_cap_bytes: 4 << 30,
        }
    }
}

impl ExperimentSpec {
    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::fs::File::open(path)?)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    /// Grid shape and counts; per-method settings are checked separately.
    pub fn validate_grid(&self) -> Result<()> {
        if self.log2_coarse > self.log2_fine {
            return Err(Error::Config(format!(
                "coarse exponent {} exceeds fine exponent {}",
                self.log2_coarse, self.log2_fine
            )));
        }
        if self.n_paths == 0 || self.dims == 0 || self.repeats == 0 || self.hurst.is_empty() {
            return Err(Error::Config(
                "paths, dimensions, repeats and Hurst indices must be non-empty".into(),
            ));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_grid()?;
        for m in &self.methods {
            if let Method::Sdk(k) = m {
                self.scheme_config(*k, self.dims)?;
            }
        }
        Ok(())
    }

    pub fn scheme_config(&self, kappa: usize, d: usize) -> Result<SchemeConfig> {
        SchemeConfig::new(d, kappa, self.zeta.unwrap_or(zeta_min(kappa)))
    }

    pub fn mc_config(&self, seed: u64) -> McConfig {
        McConfig {
            matrix_dim: self.matrix_dim,
            n_sims: self.n_sims,
            seed,
        }
    }

    pub fn fbm_config(&self, hurst: f64, seed: u64) -> FbmConfig {
        FbmConfig {
            hurst,
            dims: self.dims,
            n_increments: 1 << self.log2_fine,
            horizon: self.horizon,
            seed,
        }
    }
}

/// Independent seed for item `(a, b)` of an experiment.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over a mixed key
    let mut z = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xd1b5_4a32_d192_ed03);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Value of one method on one path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub method: Method,
    pub value: f64,
    /// Monte Carlo standard error, zero for deterministic methods.
    pub std_error: f64,
}

/// Compiled schemes shared across the paths of an experiment.
pub struct MethodRunner {
    spec: ExperimentSpec,
    schemes: BTreeMap<usize, std::result::Result<CompiledScheme, String>>,
}

impl MethodRunner {
    /// Compiles every requested scheme; a scheme that fails only disables its method.
    pub fn new(spec: &ExperimentSpec, d: usize) -> Self {
        let mut schemes = BTreeMap::new();
        for m in &spec.methods {
            if let Method::Sdk(k) = *m {
                schemes.entry(k).or_insert_with(|| {
                    spec.scheme_config(k, d)
                        .and_then(compile_scheme)
                        .map_err(|e| e.to_string())
                });
            }
        }
        MethodRunner {
            spec: spec.clone(),
            schemes,
        }
    }

    /// Methods whose configuration cannot be used, with the reason.
    pub fn invalid_methods(&self) -> Vec<(Method, String)> {
        self.schemes
            .iter()
            .filter_map(|(k, s)| s.as_ref().err().map(|e| (Method::Sdk(*k), e.clone())))
            .collect()
    }

    pub fn table(&self, kappa: usize, path: &PathSamples) -> Result<KernelTable> {
        let scheme = match self.schemes.get(&kappa) {
            Some(Ok(s)) => s,
            Some(Err(e)) => return Err(Error::Config(e.clone())),
            None => return Err(Error::Config(format!("SDK{kappa} was not requested"))),
        };
        let blocks = block_increments(path, self.spec.log2_coarse, kappa)?;
        solve_kernel(&blocks, scheme)
    }

    pub fn evaluate(&self, method: Method, path: &PathSamples, seed: u64) -> Result<KernelValue> {
        let (value, std_error) = match method {
            Method::Sdk(k) => (self.table(k, path)?.terminal()?, 0.0),
            Method::Sdkr => {
                let est = sdkr_kernel(path, &self.spec.mc_config(seed))?;
                (est.mean, est.std_error)
            }
            Method::Series => (series_kernel_path(path, self.spec.series_level), 0.0),
        };
        Ok(KernelValue {
            method,
            value,
            std_error,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseRow {
    pub hurst: f64,
    pub method_a: Method,
    pub method_b: Method,
    pub mae: f64,
    pub std: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// Mean and sample standard deviation of `|a - b|`; a single observation has deviation 0.
pub fn pairwise_stats(a: &[f64], b: &[f64]) -> (f64, f64) {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    if diffs.len() < 2 {
        return (mean, 0.0);
    }
    let var = diffs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Terminal values of every method on every path, for one Hurst index.
pub fn method_values(spec: &ExperimentSpec, runner: &MethodRunner, hurst_index: usize) -> Result<BTreeMap<Method, Vec<f64>>> {
    let hurst = spec.hurst[hurst_index];
    let invalid: Vec<Method> = runner.invalid_methods().into_iter().map(|(m, _)| m).collect();
    let per_path: Vec<Result<Vec<Option<f64>>>> = (0..spec.n_paths)
        .into_par_iter()
        .map(|p| {
            let seed = derive_seed(spec.seed, hurst_index as u64, p as u64);
            let path = sample_fbm(&spec.fbm_config(hurst, seed))?;
            Ok(spec
                .methods
                .iter()
                .map(|&m| match runner.evaluate(m, &path, seed) {
                    _ if invalid.contains(&m) => None,
                    Ok(v) => Some(v.value),
                    Err(e) => {
                        log::error!("{m} failed on path {p} at H = {hurst}: {e}");
                        None
                    }
                })
                .collect())
        })
        .collect();
    let mut out: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
    let mut failed = vec![false; spec.methods.len()];
    for row in per_path {
        for (k, v) in row?.into_iter().enumerate() {
            match v {
                Some(v) => out.entry(spec.methods[k]).or_default().push(v),
                None => failed[k] = true,
            }
        }
    }
    for (k, f) in failed.iter().enumerate() {
        if *f {
            out.remove(&spec.methods[k]);
        }
    }
    Ok(out)
}

/// Pairwise discrepancy of terminal kernel values over fBM paths.
///
/// A method that cannot be configured or fails on some path is reported in the
/// log and left out; the remaining pairs are still produced.
pub fn run_pairwise_table(spec: &ExperimentSpec) -> Result<Vec<PairwiseRow>> {
    spec.validate_grid()?;
    let runner = MethodRunner::new(spec, spec.dims);
    for (m, e) in runner.invalid_methods() {
        log::error!("{m} skipped: {e}");
    }
    let mut rows = Vec::new();
    for (hi, &hurst) in spec.hurst.iter().enumerate() {
        let values = method_values(spec, &runner, hi)?;
        for (a, ma) in spec.methods.iter().enumerate() {
            for mb in &spec.methods[a + 1..] {
                let (Some(va), Some(vb)) = (values.get(ma), values.get(mb)) else {
                    continue;
                };
                let (mae, std) = pairwise_stats(va, vb);
                rows.push(PairwiseRow {
                    hurst,
                    method_a: *ma,
                    method_b: *mb,
                    mae,
                    std,
                    n_paths: va.len(),
                    seed: spec.seed,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub axis: ScalingAxis,
    pub value: u32,
    pub runtime_seconds: f64,
    pub memory_bytes: u64,
    pub d: usize,
    pub kappa: usize,
    pub zeta: usize,
    pub seed: u64,
}

/// Bytes of a solved table over `2^log2_coarse` steps.
pub fn predicted_table_bytes(log2_coarse: u32, d: usize, level: usize) -> u64 {
    let dim = WordIndexer::new(d, level).total_dim();
    (KernelTable::stored_reals(1 << log2_coarse, dim) * std::mem::size_of::<f64>()) as u64
}

/// Runtime of lifting and solving, swept along one axis. Compilation is not timed.
pub fn run_scaling(spec: &ExperimentSpec, axis: ScalingAxis) -> Result<Vec<ScalingRow>> {
    let mut rows = Vec::new();
    let hurst = spec.hurst.first().copied().unwrap_or(0.5);
    for &value in &spec.axis_values {
        let (log2_fine, log2_coarse, d) = match axis {
            ScalingAxis::Grid => (spec.log2_fine.max(value), value, spec.dims),
            ScalingAxis::Block => (value, spec.log2_coarse, spec.dims),
            ScalingAxis::Dimension => (spec.log2_fine, spec.log2_coarse, value as usize),
        };
        if log2_coarse > log2_fine {
            return Err(Error::Config(format!(
                "coarse exponent {log2_coarse} exceeds fine exponent {log2_fine}"
            )));
        }
        let cfg = spec.scheme_config(spec.kappa, d)?;
        let memory = predicted_table_bytes(log2_coarse, d, cfg.level());
        if memory > spec.memory_cap_bytes {
            return Err(Error::Config(format!(
                "{axis} = {value} needs {memory} bytes of table, above the cap of {}",
                spec.memory_cap_bytes
            )));
        }
        let scheme = compile_scheme(cfg)?;
        let seed = derive_seed(spec.seed, axis as u64, value as u64);
        let path = sample_fbm(&FbmConfig {
            hurst,
            dims: d,
            n_increments: 1 << log2_fine,
            horizon: spec.horizon,
            seed,
        })?;
        let mut best = f64::INFINITY;
        for _ in 0..spec.repeats {
            let start = Instant::now();
            let blocks = block_increments(&path, log2_coarse, cfg.kappa)?;
            let table = solve_kernel(&blocks, &scheme)?;
            let elapsed = start.elapsed().as_secs_f64();
            debug_assert_eq!(table.memory_bytes() as u64, memory);
            best = best.min(elapsed);
        }
        log::info!("{axis} = {value}: {best:.4} s");
        rows.push(ScalingRow {
            axis,
            value,
            runtime_seconds: best,
            memory_bytes: memory,
            d,
            kappa: cfg.kappa,
            zeta: cfg.zeta,
            seed: spec.seed,
        });
    }
    Ok(rows)
}

/// Writes rows as CSV after a `#`-prefixed line carrying the spec.
pub fn write_csv<T: Serialize>(spec: &ExperimentSpec, rows: &[T], header: &[&str], mut out: impl Write) -> Result<()> {
    writeln!(out, "# spec: {}", spec.to_json())?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const PAIRWISE_COLUMNS: [&str; 7] = ["hurst", "method_a", "method_b", "mae", "std", "n_paths", "seed"];
pub const SCALING_COLUMNS: [&str; 8] = [
    "axis",
    "value",
    "runtime_seconds",
    "memory_bytes",
    "d",
    "kappa",
    "zeta",
    "seed",
];

/// Least-squares slope of `log2(y)` against `x`.
pub fn log2_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let ly: Vec<f64> = y.iter().map(|v| v.log2()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names() {
        for s in ["SDK1", "SDK3", "SDKr", "SERIES"] {
            assert_eq!(s.parse::<Method>().unwrap().to_string(), s);
        }
        assert_eq!("sdk2".parse::<Method>().unwrap(), Method::Sdk(2));
        assert!("SDK0".parse::<Method>().is_err());
        assert!("foo".parse::<Method>().is_err());
        let json = serde_json::to_string(&vec![Method::Sdk(2), Method::Sdkr]).unwrap();
        assert_eq!(json, r#"["SDK2","SDKr"]"#);
    }

    #[test]
    fn spec_json_round_trip_and_defaults() {
        let spec: ExperimentSpec = serde_json::from_str(r#"{"methods": ["SDK2"], "n_paths": 3}"#).unwrap();
        assert_eq!(spec.n_paths, 3);
        assert_eq!(spec.dims, 3);
        let back: ExperimentSpec = serde_json::from_str(&spec.to_json()).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<ExperimentSpec>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn validation() {
        let spec = ExperimentSpec {
            log2_coarse: 11,
            ..Default::default()
        };
        assert!(spec.validate().is_err());
        let spec = ExperimentSpec {
            methods: vec![Method::Sdk(4)],
            zeta: Some(0),
            ..Default::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn self_pair_and_single_path() {
        let a = [0.5, 0.7, 0.1];
        assert_eq!(pairwise_stats(&a, &a), (0.0, 0.0));
        assert_eq!(pairwise_stats(&[1.0], &[0.25]), (0.75, 0.0));
        let (m, s) = pairwise_stats(&[1.0, 2.0], &[0.0, 0.0]);
        assert_eq!(m, 1.5);
        assert!((s - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn invalid_method_is_skipped() {
        let spec = ExperimentSpec {
            methods: vec![Method::Sdk(1), Method::Sdk(2), Method::Sdk(4)],
            zeta: Some(0),
            hurst: vec![0.7],
            n_paths: 2,
            dims: 1,
            log2_fine: 4,
            log2_coarse: 2,
            ..Default::default()
        };
        // SDK4 with zeta 0 cannot be compiled
        let valid = ExperimentSpec {
            methods: vec![Method::Sdk(1), Method::Sdk(2)],
            ..spec.clone()
        };
        let rows = run_pairwise_table(&valid).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].n_paths, 2);
        assert!(spec.validate().is_err());
        let with_invalid = run_pairwise_table(&spec).unwrap();
        assert_eq!(with_invalid, rows);
    }

    #[test]
    fn memory_prediction_is_exact() {
        let spec = ExperimentSpec {
            dims: 2,
            kappa: 2,
            log2_fine: 5,
            axis_values: vec![2, 3],
            repeats: 1,
            ..Default::default()
        };
        let rows = run_scaling(&spec, ScalingAxis::Grid).unwrap();
        for r in &rows {
            let n = 1u64 << r.value;
            assert_eq!(r.memory_bytes, (n + 1) * (n + 2) / 2 * 7 * 8);
        }
        let capped = ExperimentSpec {
            memory_cap_bytes: 100,
            ..spec
        };
        assert!(run_scaling(&capped, ScalingAxis::Grid).is_err());
    }

    #[test]
    fn csv_has_spec_header() {
        let spec = ExperimentSpec::default();
        let rows = vec![PairwiseRow {
            hurst: 0.5,
            method_a: Method::Sdk(1),
            method_b: Method::Sdk(2),
            mae: 1e-3,
            std: 2e-4,
            n_paths: 4,
            seed: 0,
        }];
        let mut buf = Vec::new();
        write_csv(&spec, &rows, &PAIRWISE_COLUMNS, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# spec: {"));
        assert_eq!(lines.next().unwrap(), "hurst,method_a,method_b,mae,std,n_paths,seed");
        assert_eq!(lines.next().unwrap(), "0.5,SDK1,SDK2,0.001,0.0002,4,0");
    }

    #[test]
    fn slope_of_exact_power_law() {
        let x = [4.0, 5.0, 6.0, 7.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * 2f64.powf(2.5 * v)).collect();
        assert!((log2_slope(&x, &y) - 2.5).abs() < 1e-12);
    }
}
