#include "dvhsmooth/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>

#include <json.hpp>

#include "dvhsmooth/csv.hpp"
#include "dvhsmooth/error.hpp"
#include "dvhsmooth/eud.hpp"

namespace dvhsmooth {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// nlohmann prints doubles in shortest form; outputs use format_double
// everywhere, so the JSON files get their own small writer.
void write_json_value(std::ostream& os, const json& j, int indent) {
    const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
    const std::string close(static_cast<std::size_t>(indent), ' ');
    switch (j.type()) {
        case json::value_t::number_float: {
            const double v = j.get<double>();
            os << (std::isfinite(v) ? format_double(v) : "null");
            return;
        }
        case json::value_t::object: {
            if (j.empty()) {
                os << "{}";
                return;
            }
            os << "{\n";
            bool first = true;
            for (const auto& [key, value] : j.items()) {
                if (!first) os << ",\n";
                first = false;
                os << pad << json(key).dump() << ": ";
                write_json_value(os, value, indent + 2);
            }
            os << '\n' << close << '}';
            return;
        }
        case json::value_t::array: {
            const bool flat = std::none_of(j.begin(), j.end(), [](const json& e) { return e.is_structured(); });
            if (j.empty() || flat) {
                os << '[';
                for (std::size_t i = 0; i < j.size(); ++i) {
                    if (i) os << ", ";
                    write_json_value(os, j[i], indent);
                }
                os << ']';
                return;
            }
            os << "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) os << ",\n";
                os << pad;
                write_json_value(os, j[i], indent + 2);
            }
            os << '\n' << close << ']';
            return;
        }
        default:
            os << j.dump();
    }
}

class Output {
public:
    Output(const ExperimentConfig& cfg, fs::path dir, std::ostream* log)
        : cfg_(cfg), dir_(std::move(dir)), log_(log) {}

    // Opens <name>_<suffix>, writes the hash comment and the header row.
    std::ofstream csv(const std::string& suffix, const std::vector<std::string>& columns) {
        std::ofstream os = open(suffix);
        os << "# config-hash: " << cfg_.hash << '\n';
        for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
        os << '\n';
        return os;
    }

    void json_file(const std::string& suffix, json body) {
        body["config_hash"] = cfg_.hash;
        body["name"] = cfg_.name;
        body["kind"] = cfg_.kind;
        std::ofstream os = open(suffix);
        write_json_value(os, body, 0);
        os << '\n';
        finish(os, suffix);
    }

    void finish(std::ofstream& os, const std::string& suffix) {
        os.flush();
        if (!os) fail(ErrorCode::Io, "failed writing '" + (dir_ / file_name(suffix)).string() + "'");
    }

    std::ostream* log() const { return log_; }
    ExperimentResult result;

private:
    std::string file_name(const std::string& suffix) const { return cfg_.name + "_" + suffix; }

    std::ofstream open(const std::string& suffix) {
        const fs::path p = dir_ / file_name(suffix);
        std::ofstream os(p, std::ios::binary | std::ios::trunc);
        if (!os) fail(ErrorCode::Io, "cannot open '" + p.string() + "' for writing");
        result.files.push_back(p);
        if (log_) *log_ << "writing " << p.string() << '\n';
        return os;
    }

    const ExperimentConfig& cfg_;
    fs::path dir_;
    std::ostream* log_;
};

std::string fmt(double v) { return format_double(v); }

json fit_json(const ExponentFit& f) {
    return {{"exponent", f.exponent},
            {"coefficient", f.coefficient},
            {"r_squared", f.r_squared},
            {"sample_range", {f.sample_range.first, f.sample_range.second}},
            {"resolved", f.resolved}};
}

json critical_json(const CriticalPoint& c) {
    return {{"location", {c.location[0], c.location[1], c.location[2]}},
            {"value", c.value},
            {"signature", {c.signature.positive, c.signature.negative}},
            {"hessian_det", c.hessian_det}};
}

json weights_json(const ParamPoint& p) { return json(p.weights()); }

std::string rate_or_reason(const Trace& t, const std::optional<Eigen::VectorXd>& limit = std::nullopt) {
    try {
        return std::string(to_string(convergence_classify(t, limit)));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InsufficientData) return "insufficient-data";
        throw;
    }
}

// Fits are recorded even when one of them fails, so a bad side does not hide
// the other.
json guarded_fit(const std::function<ExponentFit()>& fn) {
    try {
        json j = fit_json(fn());
        j["status"] = "ok";
        return j;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::FitFailed && e.code() != ErrorCode::InsufficientData) throw;
        return {{"status", to_string(e.code())}, {"message", e.what()}};
    }
}

// Memoised scalar function: second differences at several stencils share
// points, and the probe CSV re-reads the values the fit used.
class Cached {
public:
    explicit Cached(std::function<double(double)> fn) : fn_(std::move(fn)) {}
    double operator()(double t) {
        const auto it = cache_.find(t);
        if (it != cache_.end()) return it->second;
        return cache_[t] = fn_(t);
    }
    std::function<double(double)> as_function() {
        return [this](double t) { return (*this)(t); };
    }

private:
    std::function<double(double)> fn_;
    std::map<double, double> cache_;
};

std::function<double(double)> volume_section(const PeakFamily& family, const ParamPoint& base,
                                             std::size_t which, double h, const VolumeProbe& probe) {
    return [=](double t) { return volume_above(family, base.with(which, t), probe.region, h, probe.quad); };
}

// Runs holder fits for each stencil and writes the raw second differences.
json probe_fits(Output& out, std::function<double(double)> fn, double sigma_star,
                const std::vector<Stencil>& stencils, const VolumeProbe& probe) {
    Cached cached(std::move(fn));
    const auto f = cached.as_function();
    json fits = json::object();
    for (Stencil s : stencils) {
        if (out.log()) *out.log() << "probing " << to_string(s) << " side at " << fmt(sigma_star) << '\n';
        fits[std::string(to_string(s))] = guarded_fit(
            [&] { return holder_exponent(f, sigma_star, s, probe.steps, probe.holder); });
    }
    auto csv = out.csv("probe.csv", {"stencil", "step", "sigma", "second_difference"});
    for (Stencil s : stencils)
        for (double h : probe.steps)
            csv << to_string(s) << ',' << fmt(h) << ',' << fmt(sigma_star) << ','
                << fmt(fd_second_derivative(f, sigma_star, h, s)) << '\n';
    out.finish(csv, "probe.csv");
    return fits;
}

void write_1d_trace_rows(std::ostream& os, const std::string& prefix, const Scalar1DObjective& obj,
                         const Trace& t) {
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double s = t.iterates[k][0];
        os << prefix << k << ',' << fmt(s) << ',' << fmt(t.values[k]) << ',' << fmt(obj.first(s)) << ','
           << (k == 0 ? std::string() : fmt(t.step_sizes[k - 1])) << ',' << to_string(t.termination) << '\n';
    }
}

void run_example1(const Example1Params& p, Output& out) {
    const Scalar1DObjective obj = make_f1();
    json runs = json::array();
    bool met = true;
    auto csv = out.csv("trace.csv", {"run", "start", "iter", "sigma", "value", "derivative", "step", "termination"});
    for (std::size_t r = 0; r < p.starts.size(); ++r) {
        const Trace t = newton1d_run(obj, p.starts[r], p.newton);
        write_1d_trace_rows(csv, std::to_string(r) + ',' + fmt(p.starts[r]) + ',', obj, t);
        const double final_sigma = t.iterates.back()[0];
        const std::string rate = rate_or_reason(t, Eigen::VectorXd::Constant(1, obj.minimizer));
        const double err = std::abs(final_sigma - obj.minimizer);
        // A start at the minimiser leaves nothing to classify.
        const bool ok = t.termination == Termination::Converged && err <= 1e-10 &&
                        (rate == "quadratic" || (rate == "insufficient-data" && t.size() < 5));
        met = met && ok;
        runs.push_back({{"start", p.starts[r]},
                        {"final_sigma", final_sigma},
                        {"error", err},
                        {"iterations", t.size() - 1},
                        {"termination", to_string(t.termination)},
                        {"rate", rate},
                        {"expected", ok}});
        if (out.log())
            *out.log() << "start " << fmt(p.starts[r]) << ": " << to_string(t.termination) << ", " << rate
                       << ", sigma " << fmt(final_sigma) << '\n';
    }
    out.finish(csv, "trace.csv");

    auto samples = out.csv("samples.csv", {"sigma", "value", "first", "second"});
    for (double s : p.samples.values())
        samples << fmt(s) << ',' << fmt(obj.value(s)) << ',' << fmt(obj.first(s)) << ','
                << fmt(obj.second(s, Side::Left)) << '\n';
    out.finish(samples, "samples.csv");

    out.json_file("summary.json", {{"objective", "f1"},
                                   {"minimizer", obj.minimizer},
                                   {"runs", runs},
                                   {"expectation", "every run converges to the minimiser quadratically"},
                                   {"expectation_met", met}});
    out.result.expectations_met = met;
    if (!met) out.result.notes.push_back("example1: a run did not converge quadratically to sigma = 5");
}

void run_example2(const Example2Params& p, Output& out) {
    const Scalar1DObjective obj = make_f2(p.alpha_loc);
    auto samples = out.csv("samples.csv", {"sigma", "value", "first", "second_left", "second_right"});
    for (double s : p.samples.values())
        samples << fmt(s) << ',' << fmt(obj.value(s)) << ',' << fmt(obj.first(s)) << ','
                << fmt(obj.second(s, Side::Left)) << ',' << fmt(obj.second(s, Side::Right)) << '\n';
    out.finish(samples, "samples.csv");

    struct Run {
        std::string label;
        double start;
    };
    std::vector<Run> plan;
    for (double s : p.left_starts) plan.push_back({"left", s});
    for (double s : p.right_starts) plan.push_back({"right", s});
    plan.push_back({"origin", 0.0});
    plan.push_back({"perturbed", p.perturbation});

    json runs = json::array();
    Trace origin, perturbed;
    auto csv = out.csv("trace.csv",
                       {"run", "label", "start", "iter", "sigma", "value", "derivative", "step", "termination"});
    for (std::size_t r = 0; r < plan.size(); ++r) {
        const Trace t = newton1d_run(obj, plan[r].start, p.newton);
        write_1d_trace_rows(csv, std::to_string(r) + ',' + plan[r].label + ',' + fmt(plan[r].start) + ',', obj, t);
        runs.push_back({{"label", plan[r].label},
                        {"start", plan[r].start},
                        {"final_sigma", t.iterates.back()[0]},
                        {"iterations", t.size() - 1},
                        {"termination", to_string(t.termination)},
                        {"seam_crossings", t.seam_crossings.size()}});
        if (plan[r].label == "origin") origin = t;
        if (plan[r].label == "perturbed") perturbed = t;
        if (out.log())
            *out.log() << plan[r].label << " start " << fmt(plan[r].start) << ": " << to_string(t.termination)
                       << ", sigma " << fmt(t.iterates.back()[0]) << '\n';
    }
    out.finish(csv, "trace.csv");

    const ExponentFit scaling = step_scaling_probe(obj, 0.0, p.left_starts, p.newton, 0.0);
    // Starts closer to the seam give more left-side steps to fit.
    std::vector<double> extended;
    for (double s = -0.5; s < -1e-5; s /= 5.0) extended.push_back(s);
    const json scaling_extended = guarded_fit([&] { return step_scaling_probe(obj, 0.0, extended, p.newton); });

    const double phi0 = newton1d_step(obj, 0.0, p.newton.convention);
    const double ratio = obj.second(-p.blowup_eps, Side::Left) / obj.second(-4.0 * p.blowup_eps, Side::Left);
    const double perturbed_final = perturbed.iterates.back()[0];

    const bool scaling_ok = std::abs(scaling.exponent - 0.5) <= 0.1;
    const bool spurious_ok = phi0 == 0.0 && origin.termination == Termination::SpuriousFixedPoint;
    const bool perturbed_ok = perturbed.termination == Termination::Converged &&
                              std::abs(perturbed_final - obj.minimizer) <= 1e-10;
    const bool met = scaling_ok && spurious_ok && perturbed_ok;

    out.json_file(
        "fit.json",
        {{"objective", "f2"},
         {"alpha_loc", p.alpha_loc},
         {"step_scaling", fit_json(scaling)},
         {"step_scaling_starts", p.left_starts},
         {"step_scaling_extended", scaling_extended},
         {"step_scaling_extended_starts", extended},
         {"spurious_fixed_point",
          {{"convention", to_string(p.newton.convention)},
           {"phi_at_zero", phi0},
           {"origin_termination", to_string(origin.termination)},
           {"perturbation", p.perturbation},
           {"perturbed_final_sigma", perturbed_final},
           {"perturbed_termination", to_string(perturbed.termination)}}},
         {"blowup", {{"eps", p.blowup_eps}, {"ratio", ratio}}},
         {"runs", runs},
         {"expectation",
          "left step scaling exponent 0.5 +- 0.1; phi(0) = 0 with a spurious fixed point at 0; "
          "the perturbed start converges to the minimiser"},
         {"expectation_met", met}});
    out.result.expectations_met = met;
    if (!scaling_ok) out.result.notes.push_back("example2: step scaling exponent outside 0.5 +- 0.1");
    if (!spurious_ok) out.result.notes.push_back("example2: no spurious fixed point at 0");
    if (!perturbed_ok) out.result.notes.push_back("example2: perturbed start did not reach the minimiser");
}

// Radial inversion for one peak centred in a ball: w / (c + r^2) >= h iff
// r^2 <= w / h - c.
std::optional<double> single_peak_oracle(const PeakFamily& fam, const ParamPoint& w, const Region& region,
                                         double h) {
    if (fam.dimension() != 1 || region.kind() != Region::Kind::Ball) return std::nullopt;
    const Peak& pk = fam.peaks()[0];
    if ((pk.center - region.center()).norm() != 0.0) return std::nullopt;
    if (h <= 0.0) return 1.0;
    const double r2 = w[0] / h - pk.offset;
    if (r2 <= 0.0) return 0.0;
    return std::min(1.0, std::pow(std::sqrt(r2) / region.radius(), 3));
}

void run_dvh_dump(const DvhDumpParams& p, Output& out) {
    json cases = json::array();
    for (std::size_t k = 0; k < p.weights.size(); ++k) {
        const ParamPoint& w = p.weights[k];
        if (out.log()) *out.log() << "dvh case " << k << '\n';
        const DvhCurve curve = dvh_curve(p.family, w, p.region, p.levels, p.quad);
        const bool oracle = single_peak_oracle(p.family, w, p.region, 1.0).has_value();
        const std::string suffix = "dvh_" + std::to_string(k) + ".csv";
        std::vector<std::string> cols{"dose", "volume"};
        if (oracle) cols.push_back("oracle");
        auto csv = out.csv(suffix, cols);
        double max_rel = 0.0;
        for (std::size_t i = 0; i < curve.doses.size(); ++i) {
            csv << fmt(curve.doses[i]) << ',' << fmt(curve.volumes[i]);
            if (oracle) {
                const double o = *single_peak_oracle(p.family, w, p.region, curve.doses[i]);
                csv << ',' << fmt(o);
                if (o > 0.0) max_rel = std::max(max_rel, std::abs(curve.volumes[i] - o) / o);
            }
            csv << '\n';
        }
        out.finish(csv, suffix);

        json crit = json::array();
        for (const CriticalPoint& c : find_critical_points(p.family, w, p.search_box)) {
            json cj = critical_json(c);
            // Mean DVH slope on the grid intervals just below and above the
            // critical value, when both lie inside the dose grid.
            const auto& d = curve.doses;
            const auto it = std::lower_bound(d.begin(), d.end(), c.value);
            const auto i = static_cast<std::size_t>(it - d.begin());
            if (i >= 2 && i + 1 < d.size()) {
                const auto& v = curve.volumes;
                cj["slope_below"] = (v[i - 1] - v[i - 2]) / (d[i - 1] - d[i - 2]);
                cj["slope_above"] = (v[i + 1] - v[i]) / (d[i + 1] - d[i]);
            }
            crit.push_back(cj);
        }
        json cj{{"file", out.result.files.back().filename().string()},
                {"weights", weights_json(w)},
                {"critical_points", crit},
                {"monotone", std::is_sorted(curve.volumes.rbegin(), curve.volumes.rend())}};
        if (oracle) cj["oracle_max_relative_error"] = max_rel;
        cases.push_back(cj);
    }
    out.json_file("summary.json", {{"cases", cases}});
}

void run_lambda_scan(const LambdaScanParams& p, Output& out) {
    if (out.log()) *out.log() << "locating crossing at h = " << fmt(p.dose_level) << '\n';
    const LambdaPoint lp = locate_lambda_1d(p.family, p.dose_level, p.which_weight, p.bracket, p.base, p.lambda);
    const double t_star = lp.sigma[p.which_weight];
    json body{{"lambda_point",
               {{"weights", weights_json(lp.sigma)},
                {"which_weight", lp.which_weight},
                {"t", t_star},
                {"dose_level", lp.dose_level},
                {"residual", lp.residual},
                {"critical_point", critical_json(lp.critical_point)}}},
              {"bracket", {p.bracket.first, p.bracket.second}}};
    if (p.probe) {
        body["fits"] = probe_fits(out, volume_section(p.family, p.base, p.which_weight, p.dose_level, *p.probe),
                                  t_star, {Stencil::Left, Stencil::Right}, *p.probe);
    }
    out.json_file("lambda.json", body);
}

void run_exponent_probe(const ExponentProbeParams& p, Output& out) {
    std::function<double(double)> fn;
    json target;
    if (const auto* s = std::get_if<ScalarTarget>(&p.target)) {
        const Scalar1DObjective obj = make_scalar_objective(s->objective, s->alpha_loc);
        fn = obj.value;
        target = {{"kind", "scalar"}, {"objective", s->objective}, {"alpha_loc", s->alpha_loc}};
    } else {
        const auto& v = std::get<VolumeTarget>(p.target);
        fn = volume_section(v.family, v.base, v.which_weight, v.dose_level, p.probe);
        target = {{"kind", "volume"},
                  {"base_weights", weights_json(v.base)},
                  {"which_weight", v.which_weight},
                  {"dose_level", v.dose_level}};
    }
    json fits = probe_fits(out, fn, p.sigma_star, p.stencils, p.probe);
    out.json_file("fit.json", {{"target", target}, {"sigma_star", p.sigma_star}, {"fits", fits}});
}

CriticalPoint nearest_critical(const PeakFamily& fam, const ParamPoint& w, const MonitorParams& m) {
    const auto cps = find_critical_points(fam, w, m.search_box);
    if (cps.empty()) fail(ErrorCode::TrackingLost, "no critical point for the Lambda monitor");
    return *std::min_element(cps.begin(), cps.end(), [&](const CriticalPoint& a, const CriticalPoint& b) {
        return (a.location - m.near).norm() < (b.location - m.near).norm();
    });
}

void run_bfgs(const BfgsParams& p, Output& out) {
    const std::size_t m = p.objective.family.dimension();
    std::vector<std::string> cols{"run", "iter"};
    for (std::size_t i = 0; i < m; ++i) cols.push_back("w" + std::to_string(i));
    for (const char* c : {"value", "grad_norm", "step", "lambda_distance", "termination"}) cols.push_back(c);
    auto csv = out.csv("trace.csv", cols);

    Problem pb = objective_problem(p.objective, p.options.fd_step);
    json runs = json::array();
    int converged = 0, flagged = 0;
    double worst_grad = 0.0;
    for (std::size_t r = 0; r < p.starts.size(); ++r) {
        const ParamPoint& w0 = p.starts[r];
        std::optional<LambdaMonitor> monitor;
        json monitored;
        if (p.monitor) {
            const CriticalPoint c = nearest_critical(p.objective.family, w0, *p.monitor);
            monitor.emplace(p.objective.family, p.monitor->dose_level, c.location);
            monitored = critical_json(c);
            pb.lambda_distance = [&monitor](const Eigen::VectorXd& x) {
                return monitor->distance(ParamPoint(std::vector<double>(x.data(), x.data() + x.size())));
            };
        } else {
            pb.lambda_distance = nullptr;
        }
        const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(w0.weights().data(), static_cast<Eigen::Index>(m));
        const Trace t = bfgs_run(pb, x0, p.options);

        for (std::size_t k = 0; k < t.size(); ++k) {
            csv << r << ',' << k;
            for (std::size_t i = 0; i < m; ++i) csv << ',' << fmt(t.iterates[k][static_cast<Eigen::Index>(i)]);
            csv << ',' << fmt(t.values[k]) << ',' << fmt(t.derivative_norms[k]) << ','
                << (k == 0 ? std::string() : fmt(t.step_sizes[k - 1])) << ','
                << (t.lambda_distances.empty() ? std::string() : fmt(t.lambda_distances[k])) << ','
                << to_string(t.termination) << '\n';
        }
        const Eigen::VectorXd& xf = t.iterates.back();
        const bool ok = t.termination == Termination::Converged;
        converged += ok;
        flagged += t.slowdown_flag;
        worst_grad = std::max(worst_grad, t.derivative_norms.back());
        int evals = 0;
        for (int e : t.line_search_evals) evals += e;
        json run{{"start", weights_json(w0)},
                 {"final", std::vector<double>(xf.data(), xf.data() + xf.size())},
                 {"value", t.values.back()},
                 {"grad_norm", t.derivative_norms.back()},
                 {"iterations", t.size() - 1},
                 {"termination", to_string(t.termination)},
                 {"message", t.message},
                 {"rate", rate_or_reason(t)},
                 {"seam_crossings", t.seam_crossings.size()},
                 {"curvature_skips", t.curvature_skips},
                 {"line_search_evals", evals},
                 {"slowdown_flag", t.slowdown_flag}};
        if (monitor) {
            run["min_lambda_distance"] = *std::min_element(t.lambda_distances.begin(), t.lambda_distances.end());
            run["monitored_critical_point"] = monitored;
        }
        runs.push_back(run);
        if (out.log())
            *out.log() << "run " << r << ": " << to_string(t.termination) << " after " << t.size() - 1
                       << " iterations, grad " << fmt(t.derivative_norms.back())
                       << (t.slowdown_flag ? ", slowdown flagged" : "") << '\n';
    }
    out.finish(csv, "trace.csv");

    json summary{{"runs", runs},
                 {"converged_runs", converged},
                 {"flagged_runs", flagged},
                 {"max_final_grad_norm", worst_grad},
                 {"gradient", p.objective.eud_only() ? "analytic" : "finite-difference"},
                 {"grad_tol", p.options.grad_tol},
                 {"lambda_band", p.options.lambda_band}};
    if (p.monitor) summary["lambda_dose_level"] = p.monitor->dose_level;
    out.json_file("summary.json", summary);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const fs::path& out_dir, std::ostream* log) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) fail(ErrorCode::Io, "cannot create output directory '" + out_dir.string() + "': " + ec.message());
    Output out(config, out_dir, log);
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Example1Params>) run_example1(p, out);
            else if constexpr (std::is_same_v<T, Example2Params>) run_example2(p, out);
            else if constexpr (std::is_same_v<T, DvhDumpParams>) run_dvh_dump(p, out);
            else if constexpr (std::is_same_v<T, LambdaScanParams>) run_lambda_scan(p, out);
            else if constexpr (std::is_same_v<T, ExponentProbeParams>) run_exponent_probe(p, out);
            else run_bfgs(p, out);
        },
        config.params);
    return out.result;
}

}  // namespace dvhsmooth
