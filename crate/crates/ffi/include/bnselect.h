#ifndef BNSELECT_H
#define BNSELECT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes. The first four match the CLI exit codes.
typedef enum BnsStatus {
  BnsStatus_Ok = 0,
  BnsStatus_VerifyFailed = 1,
  BnsStatus_Validation = 2,
  BnsStatus_Capacity = 3,
  BnsStatus_NullPointer = 4,
  BnsStatus_InvalidUtf8 = 5,
  BnsStatus_Panic = 6,
} BnsStatus;

// How Dirichlet cell hyperparameters are set.
typedef enum BnsPriorScheme {
  // `value` is the total precision, spread evenly over cells.
  BnsPriorScheme_Uniform = 0,
  // `value` is used for every cell.
  BnsPriorScheme_FixedCell = 1,
} BnsPriorScheme;

// Opaque handle to a loaded dataset.
typedef struct BnsDataset BnsDataset;

typedef struct BnsPrior {
  enum BnsPriorScheme scheme;
  double value;
} BnsPrior;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses CSV text. `has_header` is nonzero when the first row names the variables.
//
// # Safety
// `csv` must be a nul-terminated string and `out` a valid pointer.
enum BnsStatus bns_dataset_from_csv(const char *csv, int has_header, struct BnsDataset **out);

// Reads a CSV file.
//
// # Safety
// `path` must be a nul-terminated string and `out` a valid pointer.
enum BnsStatus bns_dataset_from_path(const char *path, int has_header, struct BnsDataset **out);

// Releases a dataset. Null is ignored.
//
// # Safety
// `dataset` must come from this library and not be used afterwards.
void bns_dataset_free(struct BnsDataset *dataset);

// Number of variables, or 0 for a null handle.
//
// # Safety
// `dataset` must be null or a live handle.
uintptr_t bns_dataset_num_variables(const struct BnsDataset *dataset);

// Number of cases, or 0 for a null handle.
//
// # Safety
// `dataset` must be null or a live handle.
uintptr_t bns_dataset_num_cases(const struct BnsDataset *dataset);

// Learns a DAG and writes it as JSON (`{"variable": ["parent", ...]}`) to `dag_json_out`.
//
// `ordering` is a comma-separated list of every variable name. `loss_json`
// is a loss spec document; null selects 0-1 loss. `cap` of 0 keeps the
// default candidate-parent cap.
//
// # Safety
// String arguments must be null or nul-terminated; `dataset` must be live;
// `dag_json_out` must be a valid pointer.
enum BnsStatus bns_learn(const struct BnsDataset *dataset,
                         const char *ordering,
                         const char *loss_json,
                         struct BnsPrior prior,
                         uintptr_t cap,
                         char **dag_json_out);

// Log marginal likelihood of a JSON DAG.
//
// # Safety
// `dag_json` must be nul-terminated; `dataset` live; `out` valid.
enum BnsStatus bns_score(const struct BnsDataset *dataset,
                         const char *dag_json,
                         struct BnsPrior prior,
                         double *out);

// Runs the oracle equivalence suites; `failures_out` receives the number of
// failed trials. Returns `VerifyFailed` when it is nonzero.
//
// # Safety
// `failures_out` must be a valid pointer.
enum BnsStatus bns_verify(uintptr_t trials, uint64_t seed, uintptr_t *failures_out);

// Message for the last failed call on this thread, or null. Valid until
// the next library call on the same thread.
const char *bns_last_error(void);

// Releases a string returned by the library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void bns_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BNSELECT_H */
