#ifndef TNZ_TNZ_H
#define TNZ_TNZ_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TNZ_API __declspec(dllexport)
#else
#define TNZ_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tnz_status {
  TNZ_OK = 0,
  TNZ_ERR_INVALID_ARGUMENT = 1,
  TNZ_ERR_SHAPE_MISMATCH = 2,
  TNZ_ERR_LABEL_COLLISION = 3,
  TNZ_ERR_NON_FINITE = 4,
  TNZ_ERR_FACTORIZATION = 5,
  TNZ_ERR_SINGULAR = 6,
  TNZ_ERR_BAD_MAGIC = 7,
  TNZ_ERR_UNSUPPORTED_VERSION = 8,
  TNZ_ERR_TRUNCATED = 9,
  TNZ_ERR_MANIFEST_MISMATCH = 10,
  TNZ_ERR_IO = 11,
  /* The command ran but one of its checks failed; the report is still set. */
  TNZ_ERR_VALIDATION = 12,
  TNZ_ERR_INTERNAL = 13
} tnz_status;

typedef struct tnz_tensor tnz_tensor;
typedef struct tnz_container tnz_container;
typedef struct tnz_buffer tnz_buffer;

/* Message for the most recent failure on the calling thread. */
TNZ_API const char* tnz_last_error(void);
TNZ_API const char* tnz_status_string(tnz_status status);

/* Byte or text buffer owned by the library. Text buffers are NUL-terminated;
 * the size excludes the terminator. */
TNZ_API const char* tnz_buffer_data(const tnz_buffer* b);
TNZ_API size_t tnz_buffer_size(const tnz_buffer* b);
TNZ_API void tnz_buffer_free(tnz_buffer* b);

/* Dense tensors. `labels` may be NULL, giving "x0", "x1", ... */
TNZ_API tnz_status tnz_tensor_create(size_t rank, const size_t* dims, const char* const* labels,
                                     const double* data, tnz_tensor** out);
TNZ_API size_t tnz_tensor_rank(const tnz_tensor* t);
TNZ_API size_t tnz_tensor_dim(const tnz_tensor* t, size_t position);
TNZ_API const char* tnz_tensor_label(const tnz_tensor* t, size_t position);
TNZ_API size_t tnz_tensor_size(const tnz_tensor* t);
TNZ_API const double* tnz_tensor_data(const tnz_tensor* t);
TNZ_API void tnz_tensor_free(tnz_tensor* t);

/* Containers. */
TNZ_API tnz_status tnz_container_create(tnz_container** out);
TNZ_API tnz_status tnz_container_read_file(const char* path, tnz_container** out);
TNZ_API tnz_status tnz_container_read_bytes(const void* bytes, size_t size, tnz_container** out);
TNZ_API tnz_status tnz_container_write_file(const tnz_container* c, const char* path, int f32);
TNZ_API tnz_status tnz_container_to_bytes(const tnz_container* c, int f32, tnz_buffer** out);
TNZ_API tnz_status tnz_container_add_dense(tnz_container* c, const char* name, const tnz_tensor* t);
TNZ_API size_t tnz_container_object_count(const tnz_container* c);
TNZ_API const char* tnz_container_object_name(const tnz_container* c, size_t k);
TNZ_API const char* tnz_container_object_kind(const tnz_container* c, size_t k);
/* Dense tensor represented by the named object. */
TNZ_API tnz_status tnz_container_reconstruct(const tnz_container* c, const char* name,
                                             tnz_tensor** out);
TNZ_API void tnz_container_free(tnz_container* c);

/* Commands. Every options struct is valid when zero-initialized apart from
 * its required paths; zero means "default" for every numeric field. Each
 * command writes a human-readable report to *report (may be NULL); on error
 * *report is set to NULL unless the status is TNZ_ERR_VALIDATION. */

typedef struct tnz_pack_options {
  const char* in_path;  /* whitespace-separated numbers */
  const char* out_path;
  const size_t* shape;
  size_t shape_len;
  const char* name; /* default "w" */
  int f32;
} tnz_pack_options;

typedef struct tnz_decompose_options {
  const char* in_path;
  const char* out_path;
  const char* kind; /* mpo | mps | tucker | cp */
  const size_t* in_dims; /* mpo input dims, mps site dims, or tucker/cp kernel modes */
  size_t in_dims_len;
  const size_t* out_dims;
  size_t out_dims_len;
  size_t max_bond; /* 0: unbounded */
  double tol;
  const size_t* ranks;
  size_t ranks_len;
  size_t cp_rank;
  uint64_t seed;
  int f32;
} tnz_decompose_options;

typedef struct tnz_reconstruct_options {
  const char* in_path;
  const char* out_path;
  int f32;
} tnz_reconstruct_options;

typedef struct tnz_info_options {
  const char* in_path;
} tnz_info_options;

typedef struct tnz_report_options {
  const char* in_path;
} tnz_report_options;

typedef struct tnz_plan_options {
  const char* in_path;
  const char* out_path; /* optional */
  const char* strategy; /* exhaustive | greedy, default exhaustive */
  size_t batch;         /* forward-pass batch for MPO objects, default 1 */
  int f32;
} tnz_plan_options;

typedef struct tnz_forward_options {
  const char* layer_path;
  const char* input_path;
  const char* out_path; /* optional; values are printed when absent */
  size_t batch;         /* 0: taken from the input */
  const char* strategy; /* auto | exhaustive | greedy, default auto */
  int f32;
} tnz_forward_options;

typedef struct tnz_stack_options {
  const char* in_path;
  const char* out_path; /* optional */
  const size_t* schedule; /* stage of each site; default sequential */
  size_t schedule_len;
  int f32;
} tnz_stack_options;

typedef struct tnz_gauge_check_options {
  const char* in_path; /* optional; a seeded random MPO when absent */
  uint64_t seed;
  size_t trials; /* default 100 */
} tnz_gauge_check_options;

typedef struct tnz_ft_forward_options {
  const char* const* layer_paths;
  size_t layer_count;
  const char* input_path;
  const char* out_path; /* optional */
  size_t max_bond;      /* 0: unbounded */
  double tol;
  const char* activation; /* identity | relu | tanh, optional ":local" suffix */
  int f32;
} tnz_ft_forward_options;

typedef struct tnz_train_demo_options {
  uint64_t seed;
  double lr;     /* default 0.05 */
  size_t epochs; /* default 2000 */
  const char* out_path; /* optional */
  int f32;
} tnz_train_demo_options;

typedef struct tnz_verify_options {
  const char* in_path;
  const char* reference_path; /* optional dense reference objects */
  double tol;                 /* reference comparison, default 1e-10 */
} tnz_verify_options;

TNZ_API tnz_status tnz_pack(const tnz_pack_options* o, tnz_buffer** report);
TNZ_API tnz_status tnz_decompose(const tnz_decompose_options* o, tnz_buffer** report);
TNZ_API tnz_status tnz_reconstruct(const tnz_reconstruct_options* o, tnz_buffer** report);
TNZ_API tnz_status tnz_info(const tnz_info_options* o, tnz_buffer** report);
/* Compression report for every MPO object. */
TNZ_API tnz_status tnz_report(const tnz_report_options* o, tnz_buffer** report);
TNZ_API tnz_status tnz_plan(const tnz_plan_options* o, tnz_buffer** report);
TNZ_API tnz_status tnz_forward(const tnz_forward_options* o, tnz_buffer** report);
TNZ_API tnz_status tnz_stack(const tnz_stack_options* o, tnz_buffer** report);
TNZ_API tnz_status tnz_gauge_check(const tnz_gauge_check_options* o, tnz_buffer** report);
TNZ_API tnz_status tnz_ft_forward(const tnz_ft_forward_options* o, tnz_buffer** report);
TNZ_API tnz_status tnz_train_demo(const tnz_train_demo_options* o, tnz_buffer** report);
TNZ_API tnz_status tnz_verify(const tnz_verify_options* o, tnz_buffer** report);

#ifdef __cplusplus
}
#endif

#endif
