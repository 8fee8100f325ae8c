#ifndef MAPF_H
#define MAPF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MapfEpisodeStatus {
  MAPF_EPISODE_STATUS_RUNNING = 0,
  MAPF_EPISODE_STATUS_SUCCESS = 1,
  MAPF_EPISODE_STATUS_TIMEOUT = 2,
} MapfEpisodeStatus;

typedef enum MapfMapKind {
  MAPF_MAP_KIND_ROOM = 0,
  MAPF_MAP_KIND_RANDOM = 1,
} MapfMapKind;

typedef enum MapfStatus {
  MAPF_STATUS_OK = 0,
  MAPF_STATUS_INVALID_ARGUMENT = 1,
  MAPF_STATUS_PARSE = 2,
  MAPF_STATUS_UNREACHABLE = 3,
  MAPF_STATUS_SHAPE = 4,
  MAPF_STATUS_UNSUPPORTED = 5,
  MAPF_STATUS_IO = 6,
  MAPF_STATUS_NULL_POINTER = 7,
  MAPF_STATUS_PANIC = 8,
} MapfStatus;

typedef enum MapfThinning {
  MAPF_THINNING_MEDIAL_AXIS = 0,
  MAPF_THINNING_ZHANG_SUEN = 1,
} MapfThinning;

/*
 Opaque environment.
 */
typedef struct MapfEnv MapfEnv;

/*
 Opaque skeleton graph.
 */
typedef struct MapfGraph MapfGraph;

/*
 Opaque grid map.
 */
typedef struct MapfMap MapfMap;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the most recent failure on this thread, or null. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *mapf_last_error(void);

/*
 Releases a string returned by this library.

 # Safety
 `s` must be null or a pointer obtained from this library, freed once.
 */
void mapf_string_free(char *s);

/*
 Parses the text grid format (`.` free, `#` obstacle, one row per line).

 # Safety
 `text` must be a NUL-terminated string; `out` must be writable.
 */
enum MapfStatus mapf_map_parse(const char *text, struct MapfMap **out);

/*
 Generates a seeded map. `density` only applies to random maps.

 # Safety
 `out` must be writable.
 */
enum MapfStatus mapf_map_generate(enum MapfMapKind kind,
                                  uintptr_t width,
                                  uintptr_t height,
                                  double density,
                                  uint64_t seed,
                                  struct MapfMap **out);

/*
 # Safety
 `map` must be null or a live handle; it is invalid afterwards.
 */
void mapf_map_free(struct MapfMap *map);

/*
 # Safety
 `map` must be a live handle; outputs must be writable.
 */
enum MapfStatus mapf_map_size(const struct MapfMap *map, uintptr_t *width, uintptr_t *height);

/*
 Writes 1 for a free in-bounds cell, 0 otherwise.

 # Safety
 `map` must be a live handle; `free` must be writable.
 */
enum MapfStatus mapf_map_is_free(const struct MapfMap *map, int32_t x, int32_t y, uint8_t *free);

/*
 Text form of the map. Release the result with [`mapf_string_free`].

 # Safety
 `map` must be a live handle; `out` must be writable.
 */
enum MapfStatus mapf_map_serialize(const struct MapfMap *map, char **out);

/*
 Shortest 4-connected path length in moves, or -1 when unreachable.

 # Safety
 `map` must be a live handle; `length` must be writable.
 */
enum MapfStatus mapf_astar_length(const struct MapfMap *map,
                                  int32_t sx,
                                  int32_t sy,
                                  int32_t gx,
                                  int32_t gy,
                                  int64_t *length);

/*
 # Safety
 `map` must be a live handle; `out` must be writable.
 */
enum MapfStatus mapf_graph_extract(const struct MapfMap *map,
                                   enum MapfThinning method,
                                   struct MapfGraph **out);

/*
 # Safety
 `graph` must be null or a live handle; it is invalid afterwards.
 */
void mapf_graph_free(struct MapfGraph *graph);

/*
 # Safety
 `graph` must be a live handle; outputs must be writable.
 */
enum MapfStatus mapf_graph_counts(const struct MapfGraph *graph,
                                  uintptr_t *nodes,
                                  uintptr_t *edges);

/*
 Node position and kind (`1` branch, `0` leaf).

 # Safety
 `graph` must be a live handle; outputs must be writable.
 */
enum MapfStatus mapf_graph_node(const struct MapfGraph *graph,
                                uintptr_t index,
                                int32_t *x,
                                int32_t *y,
                                uint8_t *is_branch);

/*
 Edge endpoints (node indices) and length in moves.

 # Safety
 `graph` must be a live handle; outputs must be writable.
 */
enum MapfStatus mapf_graph_edge(const struct MapfGraph *graph,
                                uintptr_t index,
                                uintptr_t *a,
                                uintptr_t *b,
                                uintptr_t *length);

/*
 Creates an environment. `starts_xy` and `goals_xy` hold `n_agents` pairs
 `(x, y)` each. The map handle may be freed afterwards.

 # Safety
 `map` must be a live handle, coordinate arrays must hold `2 * n_agents`
 values, and `out` must be writable.
 */
enum MapfStatus mapf_env_new(const struct MapfMap *map,
                             const int32_t *starts_xy,
                             const int32_t *goals_xy,
                             uintptr_t n_agents,
                             uintptr_t max_steps,
                             uint32_t tau,
                             uint8_t compute_blocking,
                             struct MapfEnv **out);

/*
 # Safety
 `env` must be null or a live handle; it is invalid afterwards.
 */
void mapf_env_free(struct MapfEnv *env);

/*
 Applies one joint action. Action codes: 0 idle, 1 up, 2 down, 3 left,
 4 right. `rewards` and `collided` may be null; otherwise they receive
 `n_agents` values.

 # Safety
 `env` must be a live handle, `actions` must hold `n_agents` bytes, and
 every non-null output must be writable for `n_agents` values.
 */
enum MapfStatus mapf_env_step(struct MapfEnv *env,
                              const uint8_t *actions,
                              uintptr_t n_agents,
                              double *rewards,
                              uint8_t *collided,
                              enum MapfEpisodeStatus *status);

/*
 Copies current positions as `n_agents` pairs `(x, y)`.

 # Safety
 `env` must be a live handle and `positions_xy` writable for `2 * n_agents` values.
 */
enum MapfStatus mapf_env_positions(const struct MapfEnv *env,
                                   int32_t *positions_xy,
                                   uintptr_t n_agents);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAPF_H */
