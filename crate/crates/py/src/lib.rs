//! Python bindings. Paths cross the boundary as a list of sample times and a
//! list of rows, one row of coordinates per time.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use sdkernel::noise::FbmConfig;
use sdkernel::oracles::McConfig;
use sdkernel::rough_path::{block_increments, PathSamples};
use sdkernel::sigkernel::{integrate_system, DiagonalDerivativePath};
use sdkernel::solver::{compile_scheme, solve_kernel, zeta_min, SchemeConfig};

fn py_err(e: sdkernel::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn path(times: Vec<f64>, values: Vec<Vec<f64>>) -> PyResult<PathSamples> {
    PathSamples::new(times, values).map_err(py_err)
}

/// Largest `N` with `2^N` dividing the number of increments.
fn full_resolution(p: &PathSamples) -> u32 {
    p.n_increments().trailing_zeros()
}

/// Sample a `dims`-dimensional fBM; returns `(times, values)`.
#[pyfunction]
#[pyo3(signature = (hurst, dims, n_increments, horizon = 1.0, seed = 0))]
fn sample_fbm(
    hurst: f64,
    dims: usize,
    n_increments: usize,
    horizon: f64,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let p = sdkernel::noise::sample_fbm(&FbmConfig {
        hurst,
        dims,
        n_increments,
        horizon,
        seed,
    })
    .map_err(py_err)?;
    let values = (0..p.len()).map(|k| p.point(k).to_vec()).collect();
    Ok((p.times().to_vec(), values))
}

/// Truncated signature, coefficients in length-major lexicographic order.
#[pyfunction]
fn signature(times: Vec<f64>, values: Vec<Vec<f64>>, level: usize) -> PyResult<Vec<f64>> {
    let p = path(times, values)?;
    Ok(sdkernel::rough_path::signature(&p, level).coeffs.into_vec())
}

/// Terminal value of the SDK scheme over `2^log2_coarse` blocks.
#[pyfunction]
#[pyo3(signature = (times, values, kappa = 2, log2_coarse = None, zeta = None))]
fn sdk_kernel(
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    kappa: usize,
    log2_coarse: Option<u32>,
    zeta: Option<usize>,
) -> PyResult<f64> {
    let p = path(times, values)?;
    let cfg = SchemeConfig::new(p.d(), kappa, zeta.unwrap_or(zeta_min(kappa))).map_err(py_err)?;
    let scheme = compile_scheme(cfg).map_err(py_err)?;
    let n = log2_coarse.unwrap_or_else(|| full_resolution(&p));
    let blocks = block_increments(&p, n, kappa).map_err(py_err)?;
    solve_kernel(&blocks, &scheme)
        .and_then(|t| t.terminal())
        .map_err(py_err)
}

/// The moment series contracted against the signature truncated at `level`.
#[pyfunction]
#[pyo3(signature = (times, values, level = 12))]
fn series_kernel(times: Vec<f64>, values: Vec<Vec<f64>>, level: usize) -> PyResult<f64> {
    Ok(sdkernel::oracles::series_kernel_path(&path(times, values)?, level))
}

/// Monte Carlo estimate; returns `(mean, std_error)`.
#[pyfunction]
#[pyo3(signature = (times, values, matrix_dim = 200, n_sims = 250, seed = 0))]
fn sdkr_kernel(
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    matrix_dim: usize,
    n_sims: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let cfg = McConfig {
        matrix_dim,
        n_sims,
        seed,
    };
    let est = sdkernel::oracles::sdkr_kernel(&path(times, values)?, &cfg).map_err(py_err)?;
    Ok((est.mean, est.std_error))
}

/// Signature kernel of two paths from the Goursat system on a `grid x grid` mesh.
#[pyfunction]
#[pyo3(signature = (x_times, x_values, y_times, y_values, grid = 128, log2_coarse = None, level = 2))]
fn signature_kernel(
    x_times: Vec<f64>,
    x_values: Vec<Vec<f64>>,
    y_times: Vec<f64>,
    y_values: Vec<Vec<f64>>,
    grid: usize,
    log2_coarse: Option<u32>,
    level: usize,
) -> PyResult<f64> {
    let lift = |p: PathSamples| match log2_coarse {
        Some(n) => DiagonalDerivativePath::from_blocks(&p, n, level).map_err(py_err),
        None => Ok(DiagonalDerivativePath::from_segments(&p)),
    };
    let x = lift(path(x_times, x_values)?)?;
    let y = lift(path(y_times, y_values)?)?;
    integrate_system(&x, &y, grid)
        .map(|s| s.terminal())
        .map_err(py_err)
}

#[pymodule]
fn sdkernel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(sample_fbm, m)?)?;
    m.add_function(wrap_pyfunction!(signature, m)?)?;
    m.add_function(wrap_pyfunction!(sdk_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(series_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(sdkr_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(signature_kernel, m)?)?;
    Ok(())
}
