#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dvhsmooth/dose_model.hpp"
#include "dvhsmooth/histogram.hpp"
#include "dvhsmooth/objective.hpp"
#include "dvhsmooth/optimizer.hpp"
#include "dvhsmooth/region.hpp"
#include "dvhsmooth/smoothness.hpp"

namespace dvhsmooth {

/// lo, lo + d, ..., hi with count points (count 1 gives just lo).
struct Grid1D {
    double lo = 0.0;
    double hi = 0.0;
    int count = 1;

    std::vector<double> values() const;
};

struct Example1Params {
    std::vector<double> starts{-5.0, 0.0, 20.0};
    NewtonOptions newton;
    Grid1D samples{-5.0, 20.0, 101};
};

struct Example2Params {
    double alpha_loc = 0.3;
    std::vector<double> left_starts{-0.5, -0.1};
    std::vector<double> right_starts{2.0};
    double perturbation = 1e-3;
    double blowup_eps = 1e-4;
    NewtonOptions newton;
    Grid1D samples{-0.1, 0.1, 201};
};

struct DvhDumpParams {
    PeakFamily family = single_peak_family();
    std::vector<ParamPoint> weights;
    Region region = Region::default_box();
    QuadratureSpec quad;
    std::vector<double> levels;
    Region search_box = Region::default_box();
};

/// Second-difference probes of t -> V_{sigma(t)}(h) around a parameter value.
struct VolumeProbe {
    Region region = Region::default_box();
    QuadratureSpec quad;
    std::vector<double> steps = default_probe_steps();
    HolderOptions holder;
};

struct LambdaScanParams {
    PeakFamily family = single_peak_family();
    ParamPoint base{1.0};
    std::size_t which_weight = 0;
    std::pair<double, double> bracket{0.0, 1.0};
    double dose_level = 0.0;
    LambdaOptions lambda;
    std::optional<VolumeProbe> probe;
};

struct ScalarTarget {
    std::string objective;
    double alpha_loc = 0.3;
};

struct VolumeTarget {
    PeakFamily family = single_peak_family();
    ParamPoint base{1.0};
    std::size_t which_weight = 0;
    double dose_level = 0.0;
};

struct ExponentProbeParams {
    std::variant<ScalarTarget, VolumeTarget> target;
    double sigma_star = 0.0;
    std::vector<Stencil> stencils{Stencil::Left, Stencil::Right};
    VolumeProbe probe;  // region and quadrature unused for scalar targets
};

/// Lambda monitor for BFGS runs: the critical point nearest `near` at the
/// start point is followed, with dose level h.
struct MonitorParams {
    double dose_level = 0.0;
    Vec3 near = Vec3::Zero();
    Region search_box = Region::default_box();
};

struct BfgsParams {
    ObjectiveSpec objective{single_peak_family(), {}, {}};
    std::vector<ParamPoint> starts;
    QuasiNewtonOptions options;
    std::optional<MonitorParams> monitor;
};

using ExperimentParams = std::variant<Example1Params, Example2Params, DvhDumpParams,
                                      LambdaScanParams, ExponentProbeParams, BfgsParams>;

struct ExperimentConfig {
    std::string name;
    std::string kind;
    ExperimentParams params;
    std::string canonical;  // config JSON with family files inlined, keys sorted
    std::string hash;       // FNV-1a 64 of `canonical`, 16 hex digits
};

/// Parses and validates a config document. Relative family paths resolve
/// against base_dir. Every problem is reported as ErrorCode::Config.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

struct ExperimentResult {
    std::vector<std::filesystem::path> files;
    // False when an expectation the experiment checks on itself failed
    // (example1: every run converged quadratically; example2: the step
    // scaling and spurious fixed point behave as predicted).
    bool expectations_met = true;
    std::vector<std::string> notes;
};

/// Writes the experiment outputs into out_dir (created if needed). Progress
/// goes to `log` when non-null.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::filesystem::path& out_dir, std::ostream* log = nullptr);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace dvhsmooth
