#ifndef INFRAVULN_H
#define INFRAVULN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum IvStatus {
  IV_STATUS_OK = 0,
  IV_STATUS_NULL_POINTER = 1,
  IV_STATUS_INVALID_ARGUMENT = 2,
  IV_STATUS_NODE_OUT_OF_RANGE = 3,
  IV_STATUS_NOT_NORMAL = 4,
  IV_STATUS_BUDGET_TOO_LARGE = 5,
  IV_STATUS_IO = 6,
  IV_STATUS_FORMAT = 7,
  IV_STATUS_INTERNAL = 8,
  IV_STATUS_PANIC = 9,
} IvStatus;

typedef enum IvPreset {
  IV_PRESET_DESK = 0,
  IV_PRESET_CITY = 1,
} IvPreset;

typedef enum IvBaseline {
  /**
   * Highest degree first.
   */
  IV_BASELINE_DEGREE = 0,
  /**
   * Adaptive collective influence; `param` is the ball radius.
   */
  IV_BASELINE_COLLECTIVE_INFLUENCE = 1,
  /**
   * Uniform order; `param` is the seed.
   */
  IV_BASELINE_RANDOM = 2,
} IvBaseline;

/**
 * Opaque attack episode over a graph. Keeps the graph alive on its own.
 */
typedef struct IvEpisode IvEpisode;

/**
 * Opaque coupled graph.
 */
typedef struct IvGraph IvGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *iv_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *iv_version(void);

/**
 * Generates a synthetic graph from a preset.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum IvStatus iv_graph_generate(enum IvPreset preset, uint64_t seed, struct IvGraph **out);

/**
 * Reads a graph JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IvStatus iv_graph_read(const char *path, struct IvGraph **out);

/**
 * Writes a graph JSON file.
 *
 * # Safety
 * `graph` must come from this library and `path` be NUL-terminated.
 */
enum IvStatus iv_graph_write(const struct IvGraph *graph, const char *path);

/**
 * Releases a graph. Null is ignored.
 *
 * # Safety
 * `graph` must come from this library and not be used afterwards.
 */
void iv_graph_free(struct IvGraph *graph);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `graph` must be null or come from this library.
 */
size_t iv_graph_node_count(const struct IvGraph *graph);

/**
 * Number of edges over all layers, or 0 for a null handle.
 *
 * # Safety
 * `graph` must be null or come from this library.
 */
size_t iv_graph_edge_count(const struct IvGraph *graph);

/**
 * Reward weights that normalise each term by its intact total.
 *
 * # Safety
 * `graph` must come from this library; outputs may be null.
 */
enum IvStatus iv_graph_default_weights(const struct IvGraph *graph, double *a_e, double *a_r);

/**
 * Starts an episode with every node Normal.
 *
 * # Safety
 * `graph` must come from this library and `out` be a valid pointer.
 */
enum IvStatus iv_episode_new(const struct IvGraph *graph, struct IvEpisode **out);

/**
 * Releases an episode. Null is ignored.
 *
 * # Safety
 * `ep` must come from this library and not be used afterwards.
 */
void iv_episode_free(struct IvEpisode *ep);

/**
 * Marks every node Normal again.
 *
 * # Safety
 * `ep` must come from this library.
 */
enum IvStatus iv_episode_reset(struct IvEpisode *ep);

/**
 * Damages `node` and runs the cascade. On success writes the step reward
 * under weights (`a_e`, `a_r`) and the number of nodes the cascade
 * invalidated; either output may be null. On failure the episode is unchanged.
 *
 * # Safety
 * `ep` must come from this library.
 */
enum IvStatus iv_episode_damage(struct IvEpisode *ep,
                                size_t node,
                                double a_e,
                                double a_r,
                                double *reward,
                                size_t *newly_invalid);

/**
 * Power still served, or NaN for a null handle.
 *
 * # Safety
 * `ep` must be null or come from this library.
 */
double iv_episode_power(const struct IvEpisode *ep);

/**
 * Connected junction pairs of the alive road network, or NaN for a null handle.
 *
 * # Safety
 * `ep` must be null or come from this library.
 */
double iv_episode_sigma(const struct IvEpisode *ep);

/**
 * Size of the largest alive road component, or 0 for a null handle.
 *
 * # Safety
 * `ep` must be null or come from this library.
 */
size_t iv_episode_gcc(const struct IvEpisode *ep);

/**
 * State of `node`: 0 Normal, 1 Damaged, 2 Invalid, -1 for a bad handle or id.
 *
 * # Safety
 * `ep` must be null or come from this library.
 */
int32_t iv_episode_node_state(const struct IvEpisode *ep, size_t node);

/**
 * Runs a reference attack with normalised weights. Writes the `budget`
 * selected nodes into `nodes` (capacity at least `budget`) and the final
 * cumulative reward into `cum_reward`; either output may be null.
 *
 * # Safety
 * `graph` must come from this library; `nodes` must be null or hold `budget` slots.
 */
enum IvStatus iv_baseline_attack(const struct IvGraph *graph,
                                 enum IvBaseline kind,
                                 size_t budget,
                                 uint64_t param,
                                 size_t *nodes,
                                 double *cum_reward);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INFRAVULN_H */
