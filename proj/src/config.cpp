#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dvhsmooth/error.hpp"
#include "dvhsmooth/experiment.hpp"

namespace dvhsmooth {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    fail(ErrorCode::Config, path + ": " + what);
}

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

const json& require_object(const json& j, const std::string& path) {
    if (!j.is_object()) bad(path, "expected an object");
    return j;
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    require_object(obj, path);
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items())
        if (!ok.count(key)) bad(join(path, key), "unknown key");
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) bad(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) bad(path, "expected a finite number");
    return v;
}

double number(const json& obj, const char* key, const std::string& path, std::optional<double> fallback = {}) {
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        bad(join(path, key), "required");
    }
    return as_number(obj.at(key), join(path, key));
}

long long integer(const json& obj, const char* key, const std::string& path,
                  std::optional<long long> fallback = {}) {
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        bad(join(path, key), "required");
    }
    const json& j = obj.at(key);
    if (!j.is_number_integer()) bad(join(path, key), "expected an integer");
    return j.get<long long>();
}

int positive_int(const json& obj, const char* key, const std::string& path, std::optional<int> fallback = {}) {
    const long long v = integer(obj, key, path, fallback);
    if (v <= 0 || v > 1'000'000'000) bad(join(path, key), "expected a positive integer");
    return static_cast<int>(v);
}

bool boolean(const json& obj, const char* key, const std::string& path, bool fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_boolean()) bad(join(path, key), "expected true or false");
    return obj.at(key).get<bool>();
}

std::string string(const json& obj, const char* key, const std::string& path,
                   std::optional<std::string> fallback = {}) {
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        bad(join(path, key), "required");
    }
    if (!obj.at(key).is_string()) bad(join(path, key), "expected a string");
    return obj.at(key).get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& path) {
    if (!j.is_array()) bad(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

Vec3 vec3(const json& j, const std::string& path) {
    const auto v = numbers(j, path);
    if (v.size() != 3) bad(path, "expected three coordinates");
    return Vec3(v[0], v[1], v[2]);
}

// Library validation failures inside a config are config errors.
template <class Fn>
auto checked(const std::string& path, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Config) throw;
        bad(path, e.what());
    }
}

Region region(const json& j, const std::string& path) {
    if (j.is_string()) {
        if (j.get<std::string>() == "default-box") return Region::default_box();
        bad(path, "unknown region name '" + j.get<std::string>() + "'");
    }
    const std::string kind = string(require_object(j, path), "kind", path);
    if (kind == "box") {
        check_keys(j, path, {"kind", "lo", "hi"});
        const Vec3 lo = vec3(j.contains("lo") ? j.at("lo") : json(), join(path, "lo"));
        const Vec3 hi = vec3(j.contains("hi") ? j.at("hi") : json(), join(path, "hi"));
        return checked(path, [&] { return Region::box(lo, hi); });
    }
    if (kind == "ball") {
        check_keys(j, path, {"kind", "center", "radius"});
        const Vec3 c = vec3(j.contains("center") ? j.at("center") : json(), join(path, "center"));
        const double r = number(j, "radius", path);
        return checked(path, [&] { return Region::ball(c, r); });
    }
    bad(join(path, "kind"), "expected \"box\" or \"ball\"");
}

Region region_or(const json& obj, const char* key, const std::string& path, const Region& fallback) {
    return obj.contains(key) ? region(obj.at(key), join(path, key)) : fallback;
}

QuadratureSpec quadrature(const json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key)) return QuadratureSpec{};
    const std::string p = join(path, key);
    const json& j = require_object(obj.at(key), p);
    const std::string kind = string(j, "kind", p, "grid");
    if (kind == "grid") {
        check_keys(j, p, {"kind", "resolution", "refine_depth"});
        const long long depth = integer(j, "refine_depth", p, 3);
        if (depth < 0 || depth > 12) bad(join(p, "refine_depth"), "expected 0 to 12");
        return checked(p, [&] {
            return QuadratureSpec::grid(positive_int(j, "resolution", p, 96), static_cast<int>(depth));
        });
    }
    if (kind == "monte-carlo") {
        check_keys(j, p, {"kind", "samples", "seed"});
        const long long samples = integer(j, "samples", p);
        const long long seed = integer(j, "seed", p, 0);
        if (samples <= 0) bad(join(p, "samples"), "expected a positive integer");
        if (seed < 0) bad(join(p, "seed"), "expected a nonnegative integer");
        return checked(p, [&] {
            return QuadratureSpec::monte_carlo(static_cast<std::uint64_t>(samples),
                                               static_cast<std::uint64_t>(seed));
        });
    }
    bad(join(p, "kind"), "expected \"grid\" or \"monte-carlo\"");
}

struct Parser {
    std::filesystem::path base_dir;

    // Resolves the family in place: names and file references become the
    // inline {"peaks": [...]} form, so the config hash covers file contents.
    PeakFamily family(json& j, const std::string& path) const {
        if (j.is_string()) {
            const std::string ref = j.get<std::string>();
            if (ref == "single-peak" || ref == "two-peak") {
                const PeakFamily f = ref == "single-peak" ? single_peak_family() : two_peak_family();
                j = inline_form(f);
                return f;
            }
            const std::filesystem::path file = base_dir / ref;
            std::ifstream in(file);
            if (!in) bad(path, "cannot read family file '" + file.string() + "'");
            json loaded;
            try {
                loaded = json::parse(in);
            } catch (const json::parse_error& e) {
                bad(path, "family file '" + file.string() + "' is not valid JSON: " + e.what());
            }
            const PeakFamily f = inline_family(loaded, path + " (" + ref + ")");
            j = inline_form(f);
            return f;
        }
        const PeakFamily f = inline_family(j, path);
        j = inline_form(f);
        return f;
    }

    static json inline_form(const PeakFamily& f) {
        json peaks = json::array();
        for (const Peak& p : f.peaks())
            peaks.push_back({{"center", {p.center[0], p.center[1], p.center[2]}}, {"offset", p.offset}});
        return json{{"peaks", peaks}};
    }

    static PeakFamily inline_family(const json& j, const std::string& path) {
        check_keys(j, path, {"peaks"});
        if (!j.contains("peaks") || !j.at("peaks").is_array() || j.at("peaks").empty())
            bad(join(path, "peaks"), "expected a non-empty array");
        std::vector<Peak> peaks;
        for (std::size_t i = 0; i < j.at("peaks").size(); ++i) {
            const std::string p = join(path, "peaks") + "[" + std::to_string(i) + "]";
            const json& pk = j.at("peaks")[i];
            check_keys(pk, p, {"center", "offset"});
            Peak peak;
            if (!pk.contains("center")) bad(join(p, "center"), "required");
            peak.center = vec3(pk.at("center"), join(p, "center"));
            peak.offset = number(pk, "offset", p, 1.0);
            peaks.push_back(peak);
        }
        return checked(path, [&] { return PeakFamily(std::move(peaks)); });
    }
};

ParamPoint weights(const json& j, const std::string& path, const PeakFamily& family) {
    auto w = numbers(j, path);
    if (w.size() != family.dimension())
        bad(path, "expected " + std::to_string(family.dimension()) + " weights");
    return checked(path, [&] { return ParamPoint(std::move(w)); });
}

std::size_t weight_index(const json& obj, const char* key, const std::string& path, const PeakFamily& family) {
    const long long i = integer(obj, key, path);
    if (i < 0 || static_cast<std::size_t>(i) >= family.dimension())
        bad(join(path, key), "weight index out of range");
    return static_cast<std::size_t>(i);
}

Grid1D grid1d(const json& j, const std::string& path) {
    check_keys(j, path, {"lo", "hi", "count"});
    Grid1D g{number(j, "lo", path), number(j, "hi", path), positive_int(j, "count", path)};
    if (g.count > 1 && !(g.hi > g.lo)) bad(path, "hi must exceed lo");
    return g;
}

Side side(const std::string& s, const std::string& path) {
    if (s == "left") return Side::Left;
    if (s == "right") return Side::Right;
    bad(path, "expected \"left\" or \"right\"");
}

NewtonOptions newton(const json& obj, const std::string& path) {
    NewtonOptions o;
    if (!obj.contains("newton")) return o;
    const std::string p = join(path, "newton");
    const json& j = obj.at("newton");
    check_keys(j, p, {"tol", "max_iter", "convention", "stop_on_seam", "safeguard"});
    o.tol = number(j, "tol", p, o.tol);
    if (!(o.tol > 0.0)) bad(join(p, "tol"), "expected a positive number");
    o.max_iter = positive_int(j, "max_iter", p, o.max_iter);
    o.convention = side(string(j, "convention", p, "left"), join(p, "convention"));
    o.stop_on_seam = boolean(j, "stop_on_seam", p, o.stop_on_seam);
    o.safeguard = boolean(j, "safeguard", p, o.safeguard);
    return o;
}

HolderOptions holder(const json& obj, const std::string& path) {
    HolderOptions o;
    if (!obj.contains("holder")) return o;
    const std::string p = join(path, "holder");
    const json& j = obj.at("holder");
    check_keys(j, p, {"fit_quality_min", "noise_floor", "flat_spread"});
    o.fit_quality_min = number(j, "fit_quality_min", p, o.fit_quality_min);
    o.noise_floor = number(j, "noise_floor", p, o.noise_floor);
    o.flat_spread = number(j, "flat_spread", p, o.flat_spread);
    if (o.fit_quality_min < 0.0 || o.fit_quality_min > 1.0)
        bad(join(p, "fit_quality_min"), "expected a value in [0, 1]");
    if (o.noise_floor < 0.0) bad(join(p, "noise_floor"), "expected a nonnegative number");
    if (o.flat_spread < 0.0) bad(join(p, "flat_spread"), "expected a nonnegative number");
    return o;
}

VolumeProbe volume_probe(const json& j, const std::string& path) {
    check_keys(j, path, {"region", "quadrature", "steps", "holder"});
    VolumeProbe p;
    p.region = region_or(j, "region", path, p.region);
    p.quad = quadrature(j, "quadrature", path);
    if (j.contains("steps")) {
        p.steps = numbers(j.at("steps"), join(path, "steps"));
        for (double s : p.steps)
            if (!(s > 0.0)) bad(join(path, "steps"), "steps must be positive");
    }
    p.holder = holder(j, path);
    return p;
}

std::vector<double> start_list(const json& obj, const char* key, const std::string& path,
                               const std::vector<double>& fallback) {
    if (!obj.contains(key)) return fallback;
    auto v = numbers(obj.at(key), join(path, key));
    if (v.empty()) bad(join(path, key), "expected at least one start");
    return v;
}

Example1Params example1(json& j, const std::string& path) {
    check_keys(j, path, {"starts", "newton", "samples"});
    Example1Params p;
    p.starts = start_list(j, "starts", path, p.starts);
    for (double s : p.starts)
        if (!(s > -10.0)) bad(join(path, "starts"), "F1 is defined for sigma > -10 only");
    p.newton = newton(j, path);
    if (j.contains("samples")) p.samples = grid1d(j.at("samples"), join(path, "samples"));
    if (!(p.samples.lo > -10.0)) bad(join(path, "samples.lo"), "F1 is defined for sigma > -10 only");
    return p;
}

Example2Params example2(json& j, const std::string& path) {
    check_keys(j, path, {"alpha_loc", "left_starts", "right_starts", "perturbation", "blowup_eps",
                         "newton", "samples"});
    Example2Params p;
    p.alpha_loc = number(j, "alpha_loc", path, p.alpha_loc);
    if (!(p.alpha_loc > 0.0)) bad(join(path, "alpha_loc"), "expected a positive number");
    p.left_starts = start_list(j, "left_starts", path, p.left_starts);
    for (double s : p.left_starts)
        if (!(s < 0.0 && s > -10.0)) bad(join(path, "left_starts"), "left starts must lie in (-10, 0)");
    p.right_starts = start_list(j, "right_starts", path, p.right_starts);
    for (double s : p.right_starts)
        if (!(s > 0.0)) bad(join(path, "right_starts"), "right starts must be positive");
    p.perturbation = number(j, "perturbation", path, p.perturbation);
    if (!(p.perturbation > 0.0)) bad(join(path, "perturbation"), "expected a positive number");
    p.blowup_eps = number(j, "blowup_eps", path, p.blowup_eps);
    if (!(p.blowup_eps > 0.0 && p.blowup_eps < 2.0))
        bad(join(path, "blowup_eps"), "expected a number in (0, 2)");
    p.newton = newton(j, path);
    if (j.contains("samples")) p.samples = grid1d(j.at("samples"), join(path, "samples"));
    if (!(p.samples.lo > -10.0)) bad(join(path, "samples.lo"), "F2 is defined for sigma > -10 only");
    return p;
}

DvhDumpParams dvh_dump(json& j, const std::string& path, const Parser& ps) {
    check_keys(j, path, {"family", "weights", "region", "quadrature", "levels", "search_box"});
    DvhDumpParams p;
    if (!j.contains("family")) bad(join(path, "family"), "required");
    p.family = ps.family(j.at("family"), join(path, "family"));
    if (!j.contains("weights") || !j.at("weights").is_array() || j.at("weights").empty())
        bad(join(path, "weights"), "expected a non-empty array of weight vectors");
    for (std::size_t i = 0; i < j.at("weights").size(); ++i)
        p.weights.push_back(weights(j.at("weights")[i], join(path, "weights") + "[" + std::to_string(i) + "]", p.family));
    p.region = region_or(j, "region", path, p.region);
    p.quad = quadrature(j, "quadrature", path);
    if (!j.contains("levels")) bad(join(path, "levels"), "required");
    const json& lv = j.at("levels");
    p.levels = lv.is_object() ? grid1d(lv, join(path, "levels")).values() : numbers(lv, join(path, "levels"));
    if (p.levels.empty()) bad(join(path, "levels"), "expected at least one dose level");
    p.search_box = region_or(j, "search_box", path, p.search_box);
    return p;
}

LambdaScanParams lambda_scan(json& j, const std::string& path, const Parser& ps) {
    check_keys(j, path, {"family", "base_weights", "which_weight", "bracket", "dose_level", "lambda", "probe"});
    LambdaScanParams p;
    if (!j.contains("family")) bad(join(path, "family"), "required");
    p.family = ps.family(j.at("family"), join(path, "family"));
    if (!j.contains("base_weights")) bad(join(path, "base_weights"), "required");
    p.base = weights(j.at("base_weights"), join(path, "base_weights"), p.family);
    p.which_weight = weight_index(j, "which_weight", path, p.family);
    if (!j.contains("bracket")) bad(join(path, "bracket"), "required");
    const auto br = numbers(j.at("bracket"), join(path, "bracket"));
    if (br.size() != 2 || !(br[0] >= 0.0 && br[1] > br[0]))
        bad(join(path, "bracket"), "expected [lo, hi] with 0 <= lo < hi");
    p.bracket = {br[0], br[1]};
    p.dose_level = number(j, "dose_level", path);
    if (!(p.dose_level > 0.0)) bad(join(path, "dose_level"), "expected a positive number");
    if (j.contains("lambda")) {
        const std::string lp = join(path, "lambda");
        const json& l = j.at("lambda");
        check_keys(l, lp, {"tol", "scan_points", "search_box"});
        p.lambda.lambda_tol = number(l, "tol", lp, p.lambda.lambda_tol);
        if (!(p.lambda.lambda_tol > 0.0)) bad(join(lp, "tol"), "expected a positive number");
        p.lambda.scan_points = positive_int(l, "scan_points", lp, p.lambda.scan_points);
        if (p.lambda.scan_points < 2) bad(join(lp, "scan_points"), "expected at least 2");
        p.lambda.search_box = region_or(l, "search_box", lp, p.lambda.search_box);
    }
    if (j.contains("probe")) p.probe = volume_probe(j.at("probe"), join(path, "probe"));
    return p;
}

ExponentProbeParams exponent_probe(json& j, const std::string& path, const Parser& ps) {
    check_keys(j, path, {"target", "sigma_star", "stencils", "probe"});
    ExponentProbeParams p;
    const std::string tp = join(path, "target");
    if (!j.contains("target")) bad(tp, "required");
    json& t = j.at("target");
    const std::string kind = string(require_object(t, tp), "kind", tp);
    if (kind == "scalar") {
        check_keys(t, tp, {"kind", "objective", "alpha_loc"});
        ScalarTarget s{string(t, "objective", tp), number(t, "alpha_loc", tp, 0.3)};
        if (s.objective != "f1" && s.objective != "f2")
            bad(join(tp, "objective"), "expected \"f1\" or \"f2\"");
        if (!(s.alpha_loc > 0.0)) bad(join(tp, "alpha_loc"), "expected a positive number");
        p.target = s;
    } else if (kind == "volume") {
        check_keys(t, tp, {"kind", "family", "base_weights", "which_weight", "dose_level"});
        VolumeTarget v;
        if (!t.contains("family")) bad(join(tp, "family"), "required");
        v.family = ps.family(t.at("family"), join(tp, "family"));
        if (!t.contains("base_weights")) bad(join(tp, "base_weights"), "required");
        v.base = weights(t.at("base_weights"), join(tp, "base_weights"), v.family);
        v.which_weight = weight_index(t, "which_weight", tp, v.family);
        v.dose_level = number(t, "dose_level", tp);
        p.target = v;
    } else {
        bad(join(tp, "kind"), "expected \"scalar\" or \"volume\"");
    }
    p.sigma_star = number(j, "sigma_star", path);
    if (j.contains("stencils")) {
        const json& s = j.at("stencils");
        if (!s.is_array() || s.empty()) bad(join(path, "stencils"), "expected a non-empty array");
        p.stencils.clear();
        for (const auto& e : s) {
            const std::string name = e.is_string() ? e.get<std::string>() : "";
            if (name == "left") p.stencils.push_back(Stencil::Left);
            else if (name == "right") p.stencils.push_back(Stencil::Right);
            else if (name == "central") p.stencils.push_back(Stencil::Central);
            else bad(join(path, "stencils"), "expected \"left\", \"right\" or \"central\"");
        }
    }
    if (j.contains("probe")) p.probe = volume_probe(j.at("probe"), join(path, "probe"));
    if (const auto* v = std::get_if<VolumeTarget>(&p.target)) {
        // Every probe point must be a valid weight.
        double reach = 0.0;
        for (double s : p.probe.steps) reach = std::max(reach, 2.0 * s);
        for (Stencil s : p.stencils)
            if (s != Stencil::Right && p.sigma_star - reach < 0.0)
                bad(join(path, "sigma_star"), "left or central probes would reach a negative weight");
        checked(join(path, "sigma_star"), [&] { return v->base.with(v->which_weight, p.sigma_star); });
    }
    return p;
}

Constraint constraint(const json& j, const std::string& path) {
    Constraint c;
    const std::string kind = string(require_object(j, path), "kind", path);
    try {
        c.kind = constraint_kind_from_string(kind);
    } catch (const Error&) {
        bad(join(path, "kind"), "expected dv-min, dv-max, eud-min or eud-max");
    }
    if (c.is_eud()) {
        check_keys(j, path, {"kind", "region", "dose_level", "alpha", "weight"});
        c.alpha = number(j, "alpha", path, 1.0);
    } else {
        check_keys(j, path, {"kind", "region", "dose_level", "volume_fraction", "weight"});
        c.volume_fraction = number(j, "volume_fraction", path);
    }
    c.dose_level = number(j, "dose_level", path);
    c.weight = number(j, "weight", path, 1.0);
    checked(path, [&] { c.validate(); return 0; });
    return c;
}

QuasiNewtonOptions bfgs_options(const json& obj, const std::string& path) {
    QuasiNewtonOptions o;
    if (!obj.contains("optimizer")) return o;
    const std::string p = join(path, "optimizer");
    const json& j = obj.at("optimizer");
    check_keys(j, p, {"grad_tol", "max_iter", "fd_step", "wolfe_c1", "wolfe_c2", "curvature_skip_tol",
                      "max_line_search", "lambda_band", "stop_on_seam"});
    o.grad_tol = number(j, "grad_tol", p, o.grad_tol);
    o.max_iter = positive_int(j, "max_iter", p, o.max_iter);
    o.fd_step = number(j, "fd_step", p, o.fd_step);
    o.wolfe_c1 = number(j, "wolfe_c1", p, o.wolfe_c1);
    o.wolfe_c2 = number(j, "wolfe_c2", p, o.wolfe_c2);
    o.curvature_skip_tol = number(j, "curvature_skip_tol", p, o.curvature_skip_tol);
    o.max_line_search = positive_int(j, "max_line_search", p, o.max_line_search);
    o.lambda_band = number(j, "lambda_band", p, o.lambda_band);
    o.stop_on_seam = boolean(j, "stop_on_seam", p, o.stop_on_seam);
    checked(p, [&] { o.validate(); return 0; });
    return o;
}

BfgsParams bfgs(json& j, const std::string& path, const Parser& ps) {
    check_keys(j, path, {"family", "quadrature", "constraints", "starts", "random_starts", "optimizer",
                         "lambda_monitor"});
    BfgsParams p;
    if (!j.contains("family")) bad(join(path, "family"), "required");
    const PeakFamily fam = ps.family(j.at("family"), join(path, "family"));
    std::vector<ConstraintTerm> terms;
    const std::string cp = join(path, "constraints");
    if (!j.contains("constraints") || !j.at("constraints").is_array())
        bad(cp, "expected an array of constraints");
    if (j.at("constraints").empty()) bad(cp, "constraint list is empty");
    for (std::size_t i = 0; i < j.at("constraints").size(); ++i) {
        const std::string ip = cp + "[" + std::to_string(i) + "]";
        const json& c = j.at("constraints")[i];
        const Constraint con = constraint(c, ip);
        const Region reg = region_or(c, "region", ip, Region::default_box());
        terms.push_back({reg, con});
    }
    p.objective = ObjectiveSpec{fam, std::move(terms), quadrature(j, "quadrature", path)};
    checked(path, [&] { p.objective.validate(); return 0; });

    const bool listed = j.contains("starts"), random = j.contains("random_starts");
    if (listed == random) bad(path, "give exactly one of starts and random_starts");
    if (listed) {
        const json& s = j.at("starts");
        if (!s.is_array() || s.empty()) bad(join(path, "starts"), "expected a non-empty array");
        for (std::size_t i = 0; i < s.size(); ++i)
            p.starts.push_back(weights(s[i], join(path, "starts") + "[" + std::to_string(i) + "]", fam));
    } else {
        const std::string rp = join(path, "random_starts");
        const json& r = j.at("random_starts");
        check_keys(r, rp, {"count", "seed", "lo", "hi"});
        const int count = positive_int(r, "count", rp);
        const long long seed = integer(r, "seed", rp, 0);
        if (seed < 0) bad(join(rp, "seed"), "expected a nonnegative integer");
        if (!r.contains("lo") || !r.contains("hi")) bad(rp, "lo and hi are required");
        const auto lo = numbers(r.at("lo"), join(rp, "lo"));
        const auto hi = numbers(r.at("hi"), join(rp, "hi"));
        if (lo.size() != fam.dimension() || hi.size() != fam.dimension())
            bad(rp, "lo and hi need one entry per weight");
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!(lo[i] > 0.0 && hi[i] > lo[i])) bad(rp, "expected 0 < lo < hi per weight");
        // Draw order: start by start, weight by weight.
        std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
        for (int k = 0; k < count; ++k) {
            std::vector<double> w(lo.size());
            for (std::size_t i = 0; i < lo.size(); ++i)
                w[i] = std::uniform_real_distribution<double>(lo[i], hi[i])(rng);
            p.starts.emplace_back(std::move(w));
        }
    }
    for (const auto& s : p.starts)
        for (double w : s.weights())
            if (!(w > 0.0)) bad(join(path, "starts"), "start weights must be positive");
    p.options = bfgs_options(j, path);
    if (j.contains("lambda_monitor")) {
        const std::string mp = join(path, "lambda_monitor");
        const json& m = j.at("lambda_monitor");
        check_keys(m, mp, {"dose_level", "near", "search_box"});
        MonitorParams mon;
        mon.dose_level = number(m, "dose_level", mp);
        if (!m.contains("near")) bad(join(mp, "near"), "required");
        mon.near = vec3(m.at("near"), join(mp, "near"));
        mon.search_box = region_or(m, "search_box", mp, mon.search_box);
        p.monitor = mon;
    }
    return p;
}

bool valid_name(const std::string& s) {
    if (s.empty() || s.size() > 100) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
    return s.front() != '.';
}

}  // namespace

std::vector<double> Grid1D::values() const {
    std::vector<double> v(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i)
        v[static_cast<std::size_t>(i)] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
    return v;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::Config, std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(doc, "config", {"name", "kind", "description", "parameters"});
    ExperimentConfig cfg;
    cfg.name = string(doc, "name", "config");
    if (!valid_name(cfg.name)) bad("config.name", "use letters, digits, '.', '_' or '-' (used in file names)");
    cfg.kind = string(doc, "kind", "config");
    if (doc.contains("description") && !doc.at("description").is_string())
        bad("config.description", "expected a string");
    if (!doc.contains("parameters")) doc["parameters"] = json::object();
    json& params = doc.at("parameters");
    const std::string path = "parameters";
    const Parser ps{base_dir};
    if (cfg.kind == "example1") cfg.params = example1(params, path);
    else if (cfg.kind == "example2") cfg.params = example2(params, path);
    else if (cfg.kind == "dvh-dump") cfg.params = dvh_dump(params, path, ps);
    else if (cfg.kind == "lambda-scan") cfg.params = lambda_scan(params, path, ps);
    else if (cfg.kind == "exponent-probe") cfg.params = exponent_probe(params, path, ps);
    else if (cfg.kind == "bfgs-run") cfg.params = bfgs(params, path, ps);
    else bad("config.kind", "unknown experiment kind '" + cfg.kind + "'");
    cfg.canonical = doc.dump();
    cfg.hash = fnv1a_hex(cfg.canonical);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Config, "cannot read config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

}  // namespace dvhsmooth
