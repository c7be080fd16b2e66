//! C interface to `schelling-core`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` and
//! released by the matching `*_free`. Every function returns a
//! [`SchellingStatus`]; on failure the message is available from
//! [`schelling_last_error`] on the same thread until the next failing call.
//! Panics are caught and reported as `SCHELLING_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::collections::HashSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use schelling_core::config::load_run_config;
use schelling_core::dynamics::Simulation;
use schelling_core::exact::{build_matrix, enumerate, project_to_configs, stationary, EnumerationLimits, StateSpace};
use schelling_core::lattice::TorusGrid;
use schelling_core::model::ModelParams;
use schelling_core::scheduler::{SchedulerKind, SchedulerSpec};
use schelling_core::stability::{
    build_resistance_graph, max_segregated, stochastically_stable, MaxSegregatedSet, SegregationLimits,
};
use schelling_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchellingStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    TooLarge = 3,
    NoConvergence = 4,
    Io = 5,
    Internal = 6,
}

/// Values accepted by the `scheduler` arguments, which are passed as plain
/// integers so that out-of-range values can be rejected.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchellingScheduler {
    Uniform = 0,
    Contagion = 1,
}

/// A running Monte Carlo chain.
pub struct SchellingSimulation {
    inner: Simulation,
}

/// An enumerated state space with its scheduler and parameters.
pub struct SchellingAnalysis {
    space: StateSpace,
    spec: SchedulerSpec,
    params: ModelParams,
    q: MaxSegregatedSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SchellingStatus {
    match e {
        Error::TooLarge { .. } => SchellingStatus::TooLarge,
        Error::NoConvergence { .. } => SchellingStatus::NoConvergence,
        Error::Io { .. } => SchellingStatus::Io,
        e if e.is_validation() => SchellingStatus::InvalidArgument,
        _ => SchellingStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), (SchellingStatus, String)>>(f: F) -> SchellingStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SchellingStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SchellingStatus::Internal
        }
    }
}

fn core<T>(r: schelling_core::Result<T>) -> Result<T, (SchellingStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (SchellingStatus, String) {
    (SchellingStatus::NullPointer, format!("{what} is null"))
}

fn scheduler_kind(code: u32, self_weight: f64) -> Result<SchedulerKind, (SchellingStatus, String)> {
    match code {
        c if c == SchellingScheduler::Uniform as u32 => Ok(SchedulerKind::Uniform {}),
        c if c == SchellingScheduler::Contagion as u32 => {
            Ok(SchedulerKind::Contagion { self_weight: (self_weight > 0.0).then_some(self_weight) })
        }
        c => Err((SchellingStatus::InvalidArgument, format!("unknown scheduler code {c}"))),
    }
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn schelling_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn schelling_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a chain on the `n`×`n` torus from a random configuration with
/// `red_count` red cells. `self_weight <= 0` selects the contagion default.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn schelling_simulation_new(
    n: usize,
    red_count: usize,
    r: f64,
    beta: f64,
    scheduler: u32,
    self_weight: f64,
    seed: u64,
    out: *mut *mut SchellingSimulation,
) -> SchellingStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut cfg = schelling_core::config::RunConfig::minimal(n, red_count);
        cfg.params = ModelParams::new(r, beta);
        cfg.seed = seed;
        cfg.scheduler = scheduler_kind(scheduler, self_weight)?;
        let inner = core(Simulation::from_run_config(&cfg, 0))?;
        *out = Box::into_raw(Box::new(SchellingSimulation { inner }));
        Ok(())
    })
}

/// Creates a chain from a JSON run config file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn schelling_simulation_from_config(
    path: *const c_char,
    out: *mut *mut SchellingSimulation,
) -> SchellingStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (SchellingStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let cfg = core(load_run_config(Path::new(path)))?;
        let inner = core(Simulation::from_run_config(&cfg, 0))?;
        *out = Box::into_raw(Box::new(SchellingSimulation { inner }));
        Ok(())
    })
}

/// Advances the chain by `steps` transitions.
///
/// # Safety
/// `sim` must be a live handle from `schelling_simulation_new`.
#[no_mangle]
pub unsafe extern "C" fn schelling_simulation_step(sim: *mut SchellingSimulation, steps: u64) -> SchellingStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| null("sim"))?;
        for _ in 0..steps {
            sim.inner.step();
        }
        Ok(())
    })
}

/// Copies the `n²` cell colors (`+1` red, `-1` blue, row-major) into `buf`.
///
/// # Safety
/// `sim` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn schelling_simulation_colors(
    sim: *const SchellingSimulation,
    buf: *mut i8,
    len: usize,
) -> SchellingStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("sim"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let colors = sim.inner.state().config.colors();
        if len < colors.len() {
            return Err((
                SchellingStatus::InvalidArgument,
                format!("buffer holds {len} cells, need {}", colors.len()),
            ));
        }
        ptr::copy_nonoverlapping(colors.as_ptr(), buf, colors.len());
        Ok(())
    })
}

/// Current potential, steps taken and bichromatic edge count. Any output
/// pointer may be NULL.
///
/// # Safety
/// `sim` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn schelling_simulation_observe(
    sim: *const SchellingSimulation,
    potential: *mut f64,
    steps: *mut u64,
    bichromatic_edges: *mut usize,
) -> SchellingStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("sim"))?;
        if let Some(p) = potential.as_mut() {
            *p = sim.inner.potential();
        }
        if let Some(s) = steps.as_mut() {
            *s = sim.inner.steps();
        }
        if let Some(b) = bichromatic_edges.as_mut() {
            *b = sim.inner.bichromatic_edges();
        }
        Ok(())
    })
}

/// Releases a chain. NULL is ignored.
///
/// # Safety
/// `sim` must be NULL or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn schelling_simulation_free(sim: *mut SchellingSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Enumerates the composite state space for exact analysis. Sides above 3
/// are rejected with `SCHELLING_STATUS_TOO_LARGE`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn schelling_analysis_new(
    n: usize,
    red_count: usize,
    r: f64,
    scheduler: u32,
    self_weight: f64,
    out: *mut *mut SchellingAnalysis,
) -> SchellingStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = core(TorusGrid::new(n))?;
        let params = ModelParams::new(r, 1.0);
        core(params.validate(&grid))?;
        let spec = core(scheduler_kind(scheduler, self_weight)?.build(&grid))?;
        let space = core(enumerate(&grid, red_count, &spec, EnumerationLimits::default()))?;
        let q = core(max_segregated(&grid, red_count, SegregationLimits::default()))?;
        *out = Box::into_raw(Box::new(SchellingAnalysis { space, spec, params, q }));
        Ok(())
    })
}

/// Number of composite states.
///
/// # Safety
/// `a` must be a live handle and `states` writable.
#[no_mangle]
pub unsafe extern "C" fn schelling_analysis_states(a: *const SchellingAnalysis, states: *mut usize) -> SchellingStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("analysis"))?;
        *states.as_mut().ok_or_else(|| null("states"))? = a.space.len();
        Ok(())
    })
}

/// Stationary mass on maximally segregated configurations at `beta`.
///
/// # Safety
/// `a` must be a live handle and `mass` writable.
#[no_mangle]
pub unsafe extern "C" fn schelling_analysis_mass_on_max_segregated(
    a: *const SchellingAnalysis,
    beta: f64,
    mass: *mut f64,
) -> SchellingStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("analysis"))?;
        let mass = mass.as_mut().ok_or_else(|| null("mass"))?;
        let params = a.params.with_beta(beta);
        core(params.validate(a.space.grid()))?;
        let dist = core(stationary(&build_matrix(&a.space, &a.spec, &params)))?;
        let q: HashSet<u64> = a.q.masks().iter().copied().collect();
        *mass = project_to_configs(&a.space, &dist.probs).mass_on(&q);
        Ok(())
    })
}

/// Stochastically stable states: their number, the number of distinct
/// configurations among them, the minimum tree resistance, and whether
/// every stable configuration is maximally segregated. Outputs may be NULL.
///
/// # Safety
/// `a` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn schelling_analysis_stable(
    a: *const SchellingAnalysis,
    states: *mut usize,
    configurations: *mut usize,
    min_resistance: *mut f64,
    subset_of_max_segregated: *mut bool,
) -> SchellingStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("analysis"))?;
        let graph = build_resistance_graph(&a.space, &a.spec, &a.params);
        let stable = core(stochastically_stable(&a.space, &graph))?;
        let configs = stable.config_indices(&a.space);
        if let Some(s) = states.as_mut() {
            *s = stable.states.len();
        }
        if let Some(c) = configurations.as_mut() {
            *c = configs.len();
        }
        if let Some(m) = min_resistance.as_mut() {
            *m = stable.min_resistance();
        }
        if let Some(s) = subset_of_max_segregated.as_mut() {
            *s = configs.iter().all(|&c| a.q.contains_mask(a.space.config_masks()[c]));
        }
        Ok(())
    })
}

/// Releases an analysis. NULL is ignored.
///
/// # Safety
/// `a` must be NULL or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn schelling_analysis_free(a: *mut SchellingAnalysis) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Minimum number of bichromatic edges over configurations with
/// `red_count` red cells, and how many configurations attain it. Sides up
/// to 4 are accepted.
///
/// # Safety
/// Both outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn schelling_max_segregated(
    n: usize,
    red_count: usize,
    min_bichromatic_edges: *mut usize,
    argmin_count: *mut usize,
) -> SchellingStatus {
    guard(|| {
        let min_out = min_bichromatic_edges.as_mut().ok_or_else(|| null("min_bichromatic_edges"))?;
        let count_out = argmin_count.as_mut().ok_or_else(|| null("argmin_count"))?;
        let grid = core(TorusGrid::new(n))?;
        if red_count > grid.num_vertices() {
            return Err((
                SchellingStatus::InvalidArgument,
                format!("red_count {red_count} exceeds {} cells", grid.num_vertices()),
            ));
        }
        let q = core(max_segregated(&grid, red_count, SegregationLimits::default()))?;
        *min_out = q.min_bichromatic();
        *count_out = q.len();
        Ok(())
    })
}
