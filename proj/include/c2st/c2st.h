#ifndef C2ST_C2ST_H
#define C2ST_C2ST_H

#include <stddef.h>
#include <stdint.h>

#if defined(C2ST_BUILDING_LIBRARY)
#define C2ST_API __attribute__((visibility("default")))
#else
#define C2ST_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every call returns a status; on failure c2st_last_error() holds a message for
   the calling thread until its next failing call. Output handles are written
   only on success. */
typedef enum c2st_status {
  C2ST_OK = 0,
  C2ST_ERR_INVALID_INPUT = 1,
  C2ST_ERR_SINGULARITY = 2,
  C2ST_ERR_EVALUATION = 3,
  C2ST_ERR_DEGENERATE_WITNESS = 4,
  C2ST_ERR_TRAINING_DIVERGED = 5,
  C2ST_ERR_IO = 6,
  C2ST_ERR_FORMAT = 7,
  C2ST_ERR_ATLAS_CONSTRUCTION = 8,
  C2ST_ERR_FITTING = 9,
  C2ST_ERR_ZERO_BANDWIDTH = 10,
  C2ST_ERR_SCHEMA = 11,
  C2ST_ERR_INTERNAL = 12,
  C2ST_ERR_MAGIC_MISMATCH = 13,
  C2ST_ERR_TRUNCATED = 14,
  C2ST_ERR_COUNT_MISMATCH = 15
} c2st_status;

C2ST_API const char* c2st_version(void);
C2ST_API const char* c2st_status_name(c2st_status status);
C2ST_API const char* c2st_last_error(void);

/* Child seed for a purpose tag, as used throughout the library. */
C2ST_API uint64_t c2st_child_seed(uint64_t base, const char* tag);
/* A seeded uniform permutation of 0..n-1 written to out. */
C2ST_API c2st_status c2st_permutation(uint64_t seed, size_t n, size_t* out);

/* Row-major sample matrices owned by the library. */
typedef struct c2st_samples c2st_samples;
C2ST_API size_t c2st_samples_rows(const c2st_samples* s);
C2ST_API size_t c2st_samples_cols(const c2st_samples* s);
C2ST_API const double* c2st_samples_data(const c2st_samples* s);
C2ST_API void c2st_samples_free(c2st_samples* s);

/* ---- densities ---- */

/* Named pair: "example1", "example2", "eg1", "eg2", "eg3" or "sphere". */
typedef struct c2st_pair c2st_pair;
C2ST_API c2st_status c2st_pair_create(const char* family, double delta, c2st_pair** out);
C2ST_API void c2st_pair_free(c2st_pair* pair);
C2ST_API size_t c2st_pair_dim(const c2st_pair* pair);
/* which = 0 draws from p, 1 from q. */
C2ST_API c2st_status c2st_pair_sample(const c2st_pair* pair, int which, size_t n, uint64_t seed, c2st_samples** out);
C2ST_API c2st_status c2st_pair_jsd(const c2st_pair* pair, double* out);
C2ST_API c2st_status c2st_pair_skl(const c2st_pair* pair, double* out);

typedef enum c2st_witness_kind {
  C2ST_WITNESS_LOG_RATIO = 0, /* log p/q */
  C2ST_WITNESS_SIGN = 1,      /* Sign(log p/q) */
  C2ST_WITNESS_KERNEL = 2     /* E_p k_sigma(x, .) - E_q k_sigma(x, .), mixtures only */
} c2st_witness_kind;

/* Population witness at `rows` points of dimension c2st_pair_dim; sigma is read for the kernel. */
C2ST_API c2st_status c2st_pair_witness(const c2st_pair* pair, c2st_witness_kind kind, double sigma, const double* x,
                                       size_t rows, double* values);
/* (mean gap, spread, ratio) of a population witness under the pair, by quadrature. */
C2ST_API c2st_status c2st_pair_witness_summary(const c2st_pair* pair, c2st_witness_kind kind, double sigma,
                                               double summary[3]);

/* ---- classifier ---- */

typedef enum c2st_init { C2ST_INIT_HE = 0, C2ST_INIT_UNIFORM_FAN_IN = 1 } c2st_init;

typedef struct c2st_train_options {
  const size_t* hidden_widths;
  size_t hidden_count;
  size_t epochs;
  size_t batch_size;
  double learning_rate;
  uint64_t seed;
  c2st_init init;
  double weight_clip; /* <= 0 disables clipping */
} c2st_train_options;

/* Hidden widths {32, 32}, 100 epochs, batch 100, learning rate 1e-3, seed 0, uniform fan-in init. */
C2ST_API c2st_train_options c2st_train_options_default(void);

typedef struct c2st_model c2st_model;
C2ST_API c2st_status c2st_train(const double* x, size_t nx, const double* y, size_t ny, size_t dim,
                                const c2st_train_options* options, c2st_model** out);
C2ST_API c2st_status c2st_model_load(const char* path, c2st_model** out);
C2ST_API c2st_status c2st_model_save(const c2st_model* model, const char* path);
C2ST_API void c2st_model_free(c2st_model* model);
C2ST_API size_t c2st_model_input_dim(const c2st_model* model);
C2ST_API size_t c2st_model_parameter_count(const c2st_model* model);
/* Per-epoch training loss and error; zero length for a loaded model. */
C2ST_API size_t c2st_model_trace_length(const c2st_model* model);
C2ST_API c2st_status c2st_model_trace(const c2st_model* model, double* loss, double* error);
C2ST_API c2st_status c2st_model_logits(const c2st_model* model, const double* x, size_t rows, double* out);
/* (mean gap, spread, ratio) of the model logit as a witness for the pair. */
C2ST_API c2st_status c2st_model_witness_summary(const c2st_model* model, const c2st_pair* pair, double summary[3]);

/* ---- tests ---- */

typedef enum c2st_score_stat { C2ST_STAT_LOGIT = 0, C2ST_STAT_ACC = 1 } c2st_score_stat;

typedef struct c2st_outcome c2st_outcome;
typedef struct c2st_outcome_info {
  double statistic;
  double threshold;
  double p_value;
  int reject;
  size_t null_count;
  const char* method;
} c2st_outcome_info;

/* Permutation test on precomputed scores of the X and Y test points. */
C2ST_API c2st_status c2st_test_scores(const double* x_scores, size_t nx, const double* y_scores, size_t ny,
                                      c2st_score_stat stat, size_t m_perm, double alpha, uint64_t seed,
                                      c2st_outcome** out);
/* Gaussian-kernel MMD permutation test; sigma <= 0 selects the median pooled distance. */
C2ST_API c2st_status c2st_test_gmmd(const double* x, size_t nx, const double* y, size_t ny, size_t dim, double sigma,
                                    size_t m_perm, double alpha, uint64_t seed, c2st_outcome** out);
C2ST_API void c2st_outcome_free(c2st_outcome* outcome);
C2ST_API void c2st_outcome_get(const c2st_outcome* outcome, c2st_outcome_info* info);
C2ST_API const double* c2st_outcome_null_samples(const c2st_outcome* outcome);
C2ST_API c2st_status c2st_median_bandwidth(const double* x, size_t nx, const double* y, size_t ny, size_t dim,
                                           double* out);

/* ---- power ---- */

typedef struct c2st_power_options {
  const char* family;
  double delta;
  size_t n_all;
  const char* const* methods; /* "gmmd", "gmmd-ad", "gmmd+", "gmmd++", "net-acc", "net-logit" */
  size_t method_count;
  size_t n_run;
  size_t n_rep;
  size_t m_perm;
  double alpha;
  uint64_t seed;
  c2st_train_options train;
  const double* bandwidth_grid; /* NULL keeps {2^-3, ..., 2^3} */
  size_t bandwidth_count;
  int retrain_per_run;
} c2st_power_options;

/* The Eg.3 table configuration: delta 0.08, n_all 400, 400 runs, 20 replicas, 200 permutations. */
C2ST_API c2st_power_options c2st_power_options_default(void);

typedef struct c2st_power_table c2st_power_table;
C2ST_API c2st_status c2st_power_run(const c2st_power_options* options, c2st_power_table** out);
C2ST_API void c2st_power_table_free(c2st_power_table* table);
C2ST_API size_t c2st_power_table_methods(const c2st_power_table* table);
C2ST_API size_t c2st_power_table_replicas(const c2st_power_table* table);
/* Percent power summary of row i: mean, sample std, median. */
C2ST_API c2st_status c2st_power_table_row(const c2st_power_table* table, size_t i, const char** method, double* mean,
                                          double* std, double* median);
C2ST_API c2st_status c2st_power_table_replica(const c2st_power_table* table, size_t i, size_t replica,
                                              double* percent);

/* ---- loss curve ---- */

typedef struct c2st_loss_curve_options {
  int example; /* 1 or 2 */
  double delta;
  const size_t* widths;
  size_t width_count;
  const size_t* n_train;
  size_t n_train_count;
  size_t n_rep;
  uint64_t seed;
  size_t batch_size;
  double learning_rate;
  c2st_init init;
} c2st_loss_curve_options;

C2ST_API c2st_loss_curve_options c2st_loss_curve_options_default(void);

typedef struct c2st_loss_curve c2st_loss_curve;
C2ST_API c2st_status c2st_loss_curve_run(const c2st_loss_curve_options* options, c2st_loss_curve** out);
C2ST_API void c2st_loss_curve_free(c2st_loss_curve* curve);
C2ST_API double c2st_loss_curve_jsd(const c2st_loss_curve* curve);
C2ST_API size_t c2st_loss_curve_cells(const c2st_loss_curve* curve);
C2ST_API c2st_status c2st_loss_curve_cell(const c2st_loss_curve* curve, size_t i, size_t* width, size_t* n_train,
                                          double* mean, double* std);
/* The n_rep per-replica losses of cell i. */
C2ST_API c2st_status c2st_loss_curve_cell_losses(const c2st_loss_curve* curve, size_t i, double* losses);

/* ---- manifold approximation ---- */

typedef struct c2st_manifold_options {
  const char* manifold; /* "circle", "curve" or "sphere-patch" */
  const char* target;   /* "cos-theta" (first coordinate) or "wave" (cos 2x1 + x2) */
  double delta;
  int k_max;
  double ridge;
  size_t grid_points;
  size_t n_eval;
  uint64_t seed;
} c2st_manifold_options;

/* Circle, cos-theta, delta 0.3, k_max 4, relative ridge 1e-10, 2048 grid points, 10^4 evaluation points. */
C2ST_API c2st_manifold_options c2st_manifold_options_default(void);

typedef struct c2st_manifold_net c2st_manifold_net;
typedef struct c2st_manifold_report {
  double linf_error;
  size_t parameter_count;
  size_t charts;
  double delta;
  double decay_slope;
  double decay_target;
  double max_condition;
} c2st_manifold_report;

C2ST_API c2st_status c2st_manifold_build(const c2st_manifold_options* options, c2st_manifold_net** out);
C2ST_API void c2st_manifold_net_free(c2st_manifold_net* net);
/* Error over options.n_eval manifold samples drawn with options.seed. */
C2ST_API c2st_status c2st_manifold_net_report(const c2st_manifold_net* net, c2st_manifold_report* report);
C2ST_API c2st_status c2st_manifold_net_eval(const c2st_manifold_net* net, const double* x, size_t rows,
                                            double* values);
C2ST_API c2st_status c2st_manifold_net_save(const c2st_manifold_net* net, const char* binary_path,
                                            const char* json_path);

#ifdef __cplusplus
}
#endif

#endif
