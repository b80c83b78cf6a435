#include "dvhsmooth/dvhsmooth.h"

#include <cmath>
#include <iostream>
#include <new>
#include <optional>
#include <string>

#include <json.hpp>

#include "dvhsmooth/dose_model.hpp"
#include "dvhsmooth/error.hpp"
#include "dvhsmooth/eud.hpp"
#include "dvhsmooth/experiment.hpp"
#include "dvhsmooth/histogram.hpp"
#include "dvhsmooth/optimizer.hpp"

struct dvhs_family {
    dvhsmooth::PeakFamily family;
};

struct dvhs_trace {
    dvhsmooth::Trace trace;
    double minimizer;
};

namespace {

using namespace dvhsmooth;

thread_local std::string last_error;

dvhs_status to_status(ErrorCode c) {
    switch (c) {
        case ErrorCode::InvalidArgument: return DVHS_INVALID_ARGUMENT;
        case ErrorCode::DegenerateCriticalPoint: return DVHS_DEGENERATE_CRITICAL_POINT;
        case ErrorCode::TrackingLost: return DVHS_TRACKING_LOST;
        case ErrorCode::BracketInvalid: return DVHS_BRACKET_INVALID;
        case ErrorCode::FitFailed: return DVHS_FIT_FAILED;
        case ErrorCode::IllConditionedStep: return DVHS_ILL_CONDITIONED_STEP;
        case ErrorCode::NumericalDomain: return DVHS_NUMERICAL_DOMAIN;
        case ErrorCode::InsufficientData: return DVHS_INSUFFICIENT_DATA;
        case ErrorCode::Config: return DVHS_CONFIG;
        case ErrorCode::Io: return DVHS_IO;
    }
    return DVHS_INTERNAL;
}

// Runs fn, turning every exception into a status and a stored message.
template <class Fn>
dvhs_status guard(Fn&& fn) {
    last_error.clear();
    try {
        fn();
        return DVHS_OK;
    } catch (const Error& e) {
        last_error = e.what();
        return to_status(e.code());
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
    } catch (const std::exception& e) {
        last_error = e.what();
    } catch (...) {
        last_error = "unknown exception";
    }
    return DVHS_INTERNAL;
}

void need(const void* p, const char* what) {
    if (!p) fail(ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

ParamPoint weights_of(const dvhs_family* f, const double* w) {
    need(f, "family");
    need(w, "weights");
    return ParamPoint(std::vector<double>(w, w + f->family.dimension()));
}

Region region_of(const dvhs_region* r) {
    need(r, "region");
    const Vec3 lo(r->lo[0], r->lo[1], r->lo[2]), hi(r->hi[0], r->hi[1], r->hi[2]);
    switch (r->kind) {
        case DVHS_REGION_BOX: return Region::box(lo, hi);
        case DVHS_REGION_BALL: return Region::ball(Vec3(r->center[0], r->center[1], r->center[2]), r->radius);
    }
    fail(ErrorCode::InvalidArgument, "unknown region kind");
}

QuadratureSpec quad_of(const dvhs_quadrature* q) {
    need(q, "quadrature");
    switch (q->kind) {
        case DVHS_QUAD_GRID: return QuadratureSpec::grid(q->resolution, q->refine_depth);
        case DVHS_QUAD_MONTE_CARLO: return QuadratureSpec::monte_carlo(q->samples, q->seed);
    }
    fail(ErrorCode::InvalidArgument, "unknown quadrature kind");
}

Vec3 point_of(const double* x) {
    need(x, "point");
    return Vec3(x[0], x[1], x[2]);
}

}  // namespace

extern "C" {

const char* dvhs_status_string(dvhs_status status) {
    switch (status) {
        case DVHS_OK: return "ok";
        case DVHS_INVALID_ARGUMENT: return "invalid-argument";
        case DVHS_DEGENERATE_CRITICAL_POINT: return "degenerate-critical-point";
        case DVHS_TRACKING_LOST: return "tracking-lost";
        case DVHS_BRACKET_INVALID: return "bracket-invalid";
        case DVHS_FIT_FAILED: return "fit-failed";
        case DVHS_ILL_CONDITIONED_STEP: return "ill-conditioned-step";
        case DVHS_NUMERICAL_DOMAIN: return "numerical-domain";
        case DVHS_INSUFFICIENT_DATA: return "insufficient-data";
        case DVHS_CONFIG: return "config";
        case DVHS_IO: return "io";
        case DVHS_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* dvhs_last_error(void) { return last_error.c_str(); }

const char* dvhs_version(void) { return "0.1.0"; }

dvhs_status dvhs_family_create(const double* centers, const double* offsets, size_t n_peaks, dvhs_family** out) {
    return guard([&] {
        need(centers, "centers");
        need(offsets, "offsets");
        need(out, "out");
        std::vector<Peak> peaks(n_peaks);
        for (size_t i = 0; i < n_peaks; ++i) {
            peaks[i].center = Vec3(centers[3 * i], centers[3 * i + 1], centers[3 * i + 2]);
            peaks[i].offset = offsets[i];
        }
        *out = new dvhs_family{PeakFamily(std::move(peaks))};
    });
}

dvhs_status dvhs_family_from_json(const char* text, dvhs_family** out) {
    return guard([&] {
        need(text, "json");
        need(out, "out");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::InvalidArgument, std::string("family JSON: ") + e.what());
        }
        if (!j.is_object() || !j.contains("peaks") || !j["peaks"].is_array() || j.size() != 1)
            fail(ErrorCode::InvalidArgument, "family JSON needs exactly a \"peaks\" array");
        std::vector<Peak> peaks;
        try {
            for (const auto& p : j["peaks"]) {
                Peak pk;
                const auto c = p.at("center").get<std::vector<double>>();
                if (c.size() != 3) fail(ErrorCode::InvalidArgument, "peak center needs three coordinates");
                pk.center = Vec3(c[0], c[1], c[2]);
                pk.offset = p.value("offset", 1.0);
                peaks.push_back(pk);
            }
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::InvalidArgument, std::string("family JSON: ") + e.what());
        }
        *out = new dvhs_family{PeakFamily(std::move(peaks))};
    });
}

void dvhs_family_destroy(dvhs_family* family) { delete family; }

size_t dvhs_family_dimension(const dvhs_family* family) { return family ? family->family.dimension() : 0; }

dvhs_status dvhs_eval(const dvhs_family* family, const double* weights, const double x[3], double* out) {
    return guard([&] {
        need(out, "out");
        *out = eval(family->family, weights_of(family, weights), point_of(x));
    });
}

dvhs_status dvhs_gradient(const dvhs_family* family, const double* weights, const double x[3], double out[3]) {
    return guard([&] {
        need(out, "out");
        const Vec3 g = gradient_x(family->family, weights_of(family, weights), point_of(x));
        for (int i = 0; i < 3; ++i) out[i] = g[i];
    });
}

dvhs_status dvhs_hessian(const dvhs_family* family, const double* weights, const double x[3], double out[9]) {
    return guard([&] {
        need(out, "out");
        const Mat3 h = hessian_x(family->family, weights_of(family, weights), point_of(x));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) out[3 * i + j] = h(i, j);
    });
}

dvhs_status dvhs_volume_above(const dvhs_family* family, const double* weights, const dvhs_region* region,
                              double h, const dvhs_quadrature* quad, double* out) {
    return guard([&] {
        need(out, "out");
        const ParamPoint w = weights_of(family, weights);
        *out = volume_above(family->family, w, region_of(region), h, quad_of(quad));
    });
}

dvhs_status dvhs_eud(const dvhs_family* family, const double* weights, const dvhs_region* region, double alpha,
                     const dvhs_quadrature* quad, double* value, double* grad) {
    return guard([&] {
        need(value, "value");
        const ParamPoint w = weights_of(family, weights);
        const EudSpec spec{alpha, region_of(region), quad_of(quad)};
        if (grad) {
            const EudValueGrad e = eud_with_grad(family->family, w, spec);
            *value = e.value;
            for (Eigen::Index i = 0; i < e.grad.size(); ++i) grad[i] = e.grad[i];
        } else {
            *value = eud(family->family, w, spec);
        }
    });
}

dvhs_status dvhs_local_volume_standard(int p, int q, double k, double radius, double* out) {
    return guard([&] {
        need(out, "out");
        *out = local_volume_standard(p, q, k, radius);
    });
}

dvhs_status dvhs_find_critical_points(const dvhs_family* family, const double* weights,
                                      const dvhs_region* search_box, dvhs_critical_point* out, size_t capacity,
                                      size_t* count) {
    return guard([&] {
        need(count, "count");
        if (capacity > 0) need(out, "out");
        const ParamPoint w = weights_of(family, weights);
        const auto cps = find_critical_points(family->family, w, region_of(search_box));
        for (size_t i = 0; i < cps.size() && i < capacity; ++i) {
            for (int d = 0; d < 3; ++d) out[i].location[d] = cps[i].location[d];
            out[i].value = cps[i].value;
            out[i].positive = cps[i].signature.positive;
            out[i].negative = cps[i].signature.negative;
        }
        *count = cps.size();
    });
}

dvhs_status dvhs_newton_run(const char* objective, double alpha_loc, double sigma0, dvhs_side convention,
                            double tol, int max_iter, dvhs_trace** out) {
    return guard([&] {
        need(objective, "objective");
        need(out, "out");
        const Scalar1DObjective obj = make_scalar_objective(objective, alpha_loc);
        NewtonOptions opts;
        opts.tol = tol;
        opts.max_iter = max_iter;
        opts.convention = convention == DVHS_RIGHT ? Side::Right : Side::Left;
        *out = new dvhs_trace{newton1d_run(obj, sigma0, opts), obj.minimizer};
    });
}

void dvhs_trace_destroy(dvhs_trace* trace) { delete trace; }

size_t dvhs_trace_length(const dvhs_trace* trace) { return trace ? trace->trace.size() : 0; }

dvhs_status dvhs_trace_point(const dvhs_trace* trace, size_t index, double* sigma, double* value,
                             double* derivative_norm) {
    return guard([&] {
        need(trace, "trace");
        if (index >= trace->trace.size()) fail(ErrorCode::InvalidArgument, "trace index out of range");
        if (sigma) *sigma = trace->trace.iterates[index][0];
        if (value) *value = trace->trace.values[index];
        if (derivative_norm) *derivative_norm = trace->trace.derivative_norms[index];
    });
}

const char* dvhs_trace_termination(const dvhs_trace* trace) {
    // to_string returns views of string literals.
    return trace ? to_string(trace->trace.termination).data() : "";
}

dvhs_status dvhs_trace_rate(const dvhs_trace* trace, const char** out) {
    return guard([&] {
        need(trace, "trace");
        need(out, "out");
        std::optional<Eigen::VectorXd> limit;
        if (std::isfinite(trace->minimizer)) limit = Eigen::VectorXd::Constant(1, trace->minimizer);
        *out = to_string(convergence_classify(trace->trace, limit)).data();
    });
}

dvhs_status dvhs_validate_config(const char* config_path) {
    return guard([&] {
        need(config_path, "config path");
        load_config(config_path);
    });
}

dvhs_status dvhs_run_experiment(const char* config_path, const char* out_dir, int verbose, int* expectations_met) {
    std::string notes;
    const dvhs_status s = guard([&] {
        need(config_path, "config path");
        need(out_dir, "output directory");
        const ExperimentConfig cfg = load_config(config_path);
        const ExperimentResult r = run_experiment(cfg, out_dir, verbose ? &std::cerr : nullptr);
        if (expectations_met) *expectations_met = r.expectations_met ? 1 : 0;
        for (const auto& n : r.notes) notes += (notes.empty() ? "" : "; ") + n;
    });
    // An unmet expectation is not an error, but the caller may want to know why.
    if (s == DVHS_OK) last_error = notes;
    return s;
}

}  // extern "C"
