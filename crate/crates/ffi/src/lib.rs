//! C ABI over the `infravuln` library.
//!
//! Graphs and episodes are opaque handles owned by the caller and released
//! with their `_free` function. Fallible calls return an [`IvStatus`]; the
//! message of the most recent failure on the calling thread is available
//! from [`iv_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use infravuln::baselines;
use infravuln::cascade::{Episode, RewardWeights};
use infravuln::graph::{CoupledGraph, NodeState, NodeStates};
use infravuln::netgen::{self, GenConfig, Preset};
use infravuln::Error;

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NodeOutOfRange = 3,
    NotNormal = 4,
    BudgetTooLarge = 5,
    Io = 6,
    Format = 7,
    Internal = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IvPreset {
    Desk = 0,
    City = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IvBaseline {
    /// Highest degree first.
    Degree = 0,
    /// Adaptive collective influence; `param` is the ball radius.
    CollectiveInfluence = 1,
    /// Uniform order; `param` is the seed.
    Random = 2,
}

/// Opaque coupled graph.
pub struct IvGraph {
    graph: Arc<CoupledGraph>,
}

/// Opaque attack episode over a graph. Keeps the graph alive on its own.
pub struct IvEpisode {
    graph: Arc<CoupledGraph>,
    states: NodeStates,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> IvStatus {
    match err {
        Error::NodeOutOfRange { .. } => IvStatus::NodeOutOfRange,
        Error::NotNormal { .. } => IvStatus::NotNormal,
        Error::BudgetTooLarge { .. } => IvStatus::BudgetTooLarge,
        Error::Io(_) | Error::MissingArtifact(_) => IvStatus::Io,
        Error::Json(_) | Error::Csv(_) | Error::Format(_) | Error::InvalidGraph(_) => IvStatus::Format,
        Error::InvalidConfig(_) | Error::Empty(_) | Error::Shape { .. } => IvStatus::InvalidArgument,
        _ => IvStatus::Internal,
    }
}

/// Runs `f`, recording any error or panic as the last error.
fn guard(f: impl FnOnce() -> Result<(), IvStatusError>) -> IvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IvStatus::Ok,
        Ok(Err(IvStatusError(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            IvStatus::Panic
        }
    }
}

struct IvStatusError(IvStatus, String);

impl From<Error> for IvStatusError {
    fn from(e: Error) -> Self {
        IvStatusError(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> IvStatusError {
    IvStatusError(IvStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, IvStatusError> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| IvStatusError(IvStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

unsafe fn write_out<T>(out: *mut T, value: T) {
    if !out.is_null() {
        out.write(value);
    }
}

/// Message of the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn iv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn iv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generates a synthetic graph from a preset.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn iv_graph_generate(preset: IvPreset, seed: u64, out: *mut *mut IvGraph) -> IvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let preset = match preset {
            IvPreset::Desk => Preset::Desk,
            IvPreset::City => Preset::City,
        };
        let g = netgen::generate(&GenConfig::preset(preset, seed))?;
        out.write(Box::into_raw(Box::new(IvGraph { graph: Arc::new(g) })));
        Ok(())
    })
}

/// Reads a graph JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iv_graph_read(path: *const c_char, out: *mut *mut IvGraph) -> IvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = CoupledGraph::read(path_arg(path)?)?;
        out.write(Box::into_raw(Box::new(IvGraph { graph: Arc::new(g) })));
        Ok(())
    })
}

/// Writes a graph JSON file.
///
/// # Safety
/// `graph` must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn iv_graph_write(graph: *const IvGraph, path: *const c_char) -> IvStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        g.graph.write(path_arg(path)?)?;
        Ok(())
    })
}

/// Releases a graph. Null is ignored.
///
/// # Safety
/// `graph` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn iv_graph_free(graph: *mut IvGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `graph` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn iv_graph_node_count(graph: *const IvGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.graph.node_count())
}

/// Number of edges over all layers, or 0 for a null handle.
///
/// # Safety
/// `graph` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn iv_graph_edge_count(graph: *const IvGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.graph.edge_count())
}

/// Reward weights that normalise each term by its intact total.
///
/// # Safety
/// `graph` must come from this library; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn iv_graph_default_weights(graph: *const IvGraph, a_e: *mut f64, a_r: *mut f64) -> IvStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        let w = RewardWeights::normalized(&g.graph);
        write_out(a_e, w.a_e);
        write_out(a_r, w.a_r);
        Ok(())
    })
}

/// Starts an episode with every node Normal.
///
/// # Safety
/// `graph` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iv_episode_new(graph: *const IvGraph, out: *mut *mut IvEpisode) -> IvStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let ep = IvEpisode {
            graph: Arc::clone(&g.graph),
            states: NodeStates::all_normal(g.graph.node_count()),
        };
        out.write(Box::into_raw(Box::new(ep)));
        Ok(())
    })
}

/// Releases an episode. Null is ignored.
///
/// # Safety
/// `ep` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn iv_episode_free(ep: *mut IvEpisode) {
    if !ep.is_null() {
        drop(Box::from_raw(ep));
    }
}

/// Marks every node Normal again.
///
/// # Safety
/// `ep` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn iv_episode_reset(ep: *mut IvEpisode) -> IvStatus {
    guard(|| {
        let ep = ep.as_mut().ok_or_else(|| null("episode"))?;
        ep.states = NodeStates::all_normal(ep.graph.node_count());
        Ok(())
    })
}

/// Damages `node` and runs the cascade. On success writes the step reward
/// under weights (`a_e`, `a_r`) and the number of nodes the cascade
/// invalidated; either output may be null. On failure the episode is unchanged.
///
/// # Safety
/// `ep` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn iv_episode_damage(
    ep: *mut IvEpisode,
    node: usize,
    a_e: f64,
    a_r: f64,
    reward: *mut f64,
    newly_invalid: *mut usize,
) -> IvStatus {
    guard(|| {
        let ep = ep.as_mut().ok_or_else(|| null("episode"))?;
        let weights = RewardWeights::new(a_e, a_r)?;
        let mut episode = Episode::with_states(&ep.graph, ep.states.clone())?;
        let outcome = episode.damage(node)?;
        ep.states = episode.into_states();
        write_out(reward, outcome.reward(&weights));
        write_out(newly_invalid, outcome.newly_invalid.len());
        Ok(())
    })
}

fn with_episode<T>(ep: *const IvEpisode, default: T, f: impl FnOnce(&Episode) -> T) -> T {
    // SAFETY: callers pass null or a handle from this library
    match unsafe { ep.as_ref() } {
        None => default,
        Some(ep) => match Episode::with_states(&ep.graph, ep.states.clone()) {
            Ok(e) => f(&e),
            Err(_) => default,
        },
    }
}

/// Power still served, or NaN for a null handle.
///
/// # Safety
/// `ep` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn iv_episode_power(ep: *const IvEpisode) -> f64 {
    with_episode(ep, f64::NAN, |e| e.power())
}

/// Connected junction pairs of the alive road network, or NaN for a null handle.
///
/// # Safety
/// `ep` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn iv_episode_sigma(ep: *const IvEpisode) -> f64 {
    with_episode(ep, f64::NAN, |e| e.sigma())
}

/// Size of the largest alive road component, or 0 for a null handle.
///
/// # Safety
/// `ep` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn iv_episode_gcc(ep: *const IvEpisode) -> usize {
    with_episode(ep, 0, |e| e.gcc())
}

/// State of `node`: 0 Normal, 1 Damaged, 2 Invalid, -1 for a bad handle or id.
///
/// # Safety
/// `ep` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn iv_episode_node_state(ep: *const IvEpisode, node: usize) -> i32 {
    match ep.as_ref() {
        Some(ep) if node < ep.states.len() => match ep.states.get(node) {
            NodeState::Normal => 0,
            NodeState::Damaged => 1,
            NodeState::Invalid => 2,
        },
        _ => -1,
    }
}

/// Runs a reference attack with normalised weights. Writes the `budget`
/// selected nodes into `nodes` (capacity at least `budget`) and the final
/// cumulative reward into `cum_reward`; either output may be null.
///
/// # Safety
/// `graph` must come from this library; `nodes` must be null or hold `budget` slots.
#[no_mangle]
pub unsafe extern "C" fn iv_baseline_attack(
    graph: *const IvGraph,
    kind: IvBaseline,
    budget: usize,
    param: u64,
    nodes: *mut usize,
    cum_reward: *mut f64,
) -> IvStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        let w = RewardWeights::normalized(&g.graph);
        let report = match kind {
            IvBaseline::Degree => baselines::de_attack(&g.graph, budget, w)?,
            IvBaseline::CollectiveInfluence => {
                let radius = usize::try_from(param)
                    .map_err(|_| IvStatusError(IvStatus::InvalidArgument, "radius too large".into()))?;
                baselines::ci_attack(&g.graph, budget, radius, w)?
            }
            IvBaseline::Random => baselines::random_attack(&g.graph, budget, param, w)?,
        };
        if !nodes.is_null() {
            ptr::copy_nonoverlapping(report.nodes.as_ptr(), nodes, report.nodes.len());
        }
        write_out(cum_reward, report.final_cum_reward());
        Ok(())
    })
}
