#ifndef DVHSMOOTH_H
#define DVHSMOOTH_H

/* C interface to the dvhsmooth library.
 *
 * Every function returns a dvhs_status. On failure the message for the
 * calling thread is available from dvhs_last_error() until the next call.
 * Objects are opaque handles released with their _destroy function;
 * destroying NULL is a no-op. Output pointers are written only on success. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(DVHSMOOTH_BUILDING)
#    define DVHS_API __declspec(dllexport)
#  else
#    define DVHS_API __declspec(dllimport)
#  endif
#else
#  define DVHS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dvhs_status {
    DVHS_OK = 0,
    DVHS_INVALID_ARGUMENT = 1,
    DVHS_DEGENERATE_CRITICAL_POINT = 2,
    DVHS_TRACKING_LOST = 3,
    DVHS_BRACKET_INVALID = 4,
    DVHS_FIT_FAILED = 5,
    DVHS_ILL_CONDITIONED_STEP = 6,
    DVHS_NUMERICAL_DOMAIN = 7,
    DVHS_INSUFFICIENT_DATA = 8,
    DVHS_CONFIG = 9,
    DVHS_IO = 10,
    DVHS_INTERNAL = 11
} dvhs_status;

DVHS_API const char* dvhs_status_string(dvhs_status status);
DVHS_API const char* dvhs_last_error(void);
DVHS_API const char* dvhs_version(void);

/* ---- dose field families ---- */

typedef struct dvhs_family dvhs_family;

/* centers holds n_peaks * 3 coordinates, offsets n_peaks positive values. */
DVHS_API dvhs_status dvhs_family_create(const double* centers, const double* offsets, size_t n_peaks,
                                        dvhs_family** out);
/* {"peaks": [{"center": [x, y, z], "offset": c}, ...]} */
DVHS_API dvhs_status dvhs_family_from_json(const char* json, dvhs_family** out);
DVHS_API void dvhs_family_destroy(dvhs_family* family);
DVHS_API size_t dvhs_family_dimension(const dvhs_family* family);

/* weights has dvhs_family_dimension() entries in every call below. */
DVHS_API dvhs_status dvhs_eval(const dvhs_family* family, const double* weights, const double x[3],
                               double* out);
DVHS_API dvhs_status dvhs_gradient(const dvhs_family* family, const double* weights, const double x[3],
                                   double out[3]);
/* Row-major 3x3. */
DVHS_API dvhs_status dvhs_hessian(const dvhs_family* family, const double* weights, const double x[3],
                                  double out[9]);

/* ---- regions and quadrature ---- */

typedef enum dvhs_region_kind { DVHS_REGION_BOX = 0, DVHS_REGION_BALL = 1 } dvhs_region_kind;

typedef struct dvhs_region {
    dvhs_region_kind kind;
    double lo[3];     /* box */
    double hi[3];     /* box */
    double center[3]; /* ball */
    double radius;    /* ball */
} dvhs_region;

typedef enum dvhs_quadrature_kind { DVHS_QUAD_GRID = 0, DVHS_QUAD_MONTE_CARLO = 1 } dvhs_quadrature_kind;

typedef struct dvhs_quadrature {
    dvhs_quadrature_kind kind;
    int resolution;   /* grid */
    int refine_depth; /* grid */
    uint64_t samples; /* monte carlo */
    uint64_t seed;    /* monte carlo */
} dvhs_quadrature;

/* Relative volume of the region where the dose is at least h. */
DVHS_API dvhs_status dvhs_volume_above(const dvhs_family* family, const double* weights,
                                       const dvhs_region* region, double h, const dvhs_quadrature* quad,
                                       double* out);

/* Equivalent uniform dose; grad (may be NULL) receives dimension() entries. */
DVHS_API dvhs_status dvhs_eud(const dvhs_family* family, const double* weights, const dvhs_region* region,
                              double alpha, const dvhs_quadrature* quad, double* value, double* grad);

DVHS_API dvhs_status dvhs_local_volume_standard(int p, int q, double k, double radius, double* out);

/* ---- critical points ---- */

typedef struct dvhs_critical_point {
    double location[3];
    double value;
    int positive; /* Hessian eigenvalue counts */
    int negative;
} dvhs_critical_point;

/* Writes up to capacity points (descending value) and the total number found
 * to *count. */
DVHS_API dvhs_status dvhs_find_critical_points(const dvhs_family* family, const double* weights,
                                               const dvhs_region* search_box, dvhs_critical_point* out,
                                               size_t capacity, size_t* count);

/* ---- 1-D Newton on the scalar example objectives ---- */

typedef struct dvhs_trace dvhs_trace;

typedef enum dvhs_side { DVHS_LEFT = 0, DVHS_RIGHT = 1 } dvhs_side;

/* objective is "f1" or "f2"; alpha_loc is used by "f2". */
DVHS_API dvhs_status dvhs_newton_run(const char* objective, double alpha_loc, double sigma0,
                                     dvhs_side convention, double tol, int max_iter, dvhs_trace** out);
DVHS_API void dvhs_trace_destroy(dvhs_trace* trace);
DVHS_API size_t dvhs_trace_length(const dvhs_trace* trace);
DVHS_API dvhs_status dvhs_trace_point(const dvhs_trace* trace, size_t index, double* sigma, double* value,
                                      double* derivative_norm);
/* "converged", "max-iter", "stalled", "spurious-fixed-point", "seam-crossed" */
DVHS_API const char* dvhs_trace_termination(const dvhs_trace* trace);
/* "quadratic", "superlinear", "linear", "sublinear", "stalled" */
DVHS_API dvhs_status dvhs_trace_rate(const dvhs_trace* trace, const char** out);

/* ---- experiments ---- */

DVHS_API dvhs_status dvhs_validate_config(const char* config_path);
/* Status reports failures only. *expectations_met (may be NULL) is 0 when an
 * experiment's own expectation failed; dvhs_last_error() then says which. */
DVHS_API dvhs_status dvhs_run_experiment(const char* config_path, const char* out_dir, int verbose,
                                         int* expectations_met);

#ifdef __cplusplus
}
#endif

#endif
