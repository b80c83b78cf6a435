#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dvhsmooth/error.hpp"
#include "dvhsmooth/experiment.hpp"

using namespace dvhsmooth;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = DVHS_CONFIG_DIR;

std::string read(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ErrorCode parse_code(const std::string& text) {
    try {
        parse_config(text, kConfigs);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("config was accepted: " << text);
    return ErrorCode::InvalidArgument;
}

const char* kLambda = R"({
  "name": "t", "kind": "lambda-scan",
  "parameters": {"family": "single-peak", "base_weights": [1], "which_weight": 0,
                 "bracket": [0.5, 1.5], "dose_level": 0.8}
})";

}  // namespace

TEST_CASE("every shipped config parses") {
    int n = 0;
    for (const auto& entry : fs::directory_iterator(kConfigs)) {
        if (entry.path().extension() != ".json") continue;
        INFO(entry.path().string());
        const ExperimentConfig c = load_config(entry.path());
        CHECK(c.name == entry.path().stem().string());
        CHECK(c.hash.size() == 16);
        CHECK(c.hash == fnv1a_hex(c.canonical));
        ++n;
    }
    CHECK(n == 11);
}

TEST_CASE("FNV-1a reference values") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("the hash ignores formatting but not content") {
    const ExperimentConfig a = parse_config(kLambda, kConfigs);
    std::string compact = kLambda;
    std::erase(compact, '\n');
    CHECK(parse_config(compact, kConfigs).hash == a.hash);
    std::string changed = kLambda;
    changed.replace(changed.find("0.8"), 3, "0.7");
    CHECK(parse_config(changed, kConfigs).hash != a.hash);
}

TEST_CASE("a family file hashes like the same family inline") {
    std::string by_file = kLambda;
    by_file.replace(by_file.find("\"single-peak\""), 13, "\"families/single_peak.json\"");
    std::string inline_ = kLambda;
    inline_.replace(inline_.find("\"single-peak\""), 13, R"({"peaks": [{"center": [0, 0, 0], "offset": 1}]})");
    CHECK(parse_config(by_file, kConfigs).hash == parse_config(inline_, kConfigs).hash);
}

TEST_CASE("malformed configs are config errors") {
    CHECK(parse_code("{") == ErrorCode::Config);
    CHECK(parse_code("[]") == ErrorCode::Config);
    CHECK(parse_code(R"({"name": "t", "kind": "no-such-kind", "parameters": {}})") == ErrorCode::Config);
    CHECK(parse_code(R"({"name": "bad name", "kind": "example1", "parameters": {}})") == ErrorCode::Config);

    std::string unknown = kLambda;
    unknown.replace(unknown.find("\"which_weight\""), 0, "\"colour\": 1, ");
    CHECK(parse_code(unknown) == ErrorCode::Config);

    std::string missing_file = kLambda;
    missing_file.replace(missing_file.find("\"single-peak\""), 13, "\"families/absent.json\"");
    CHECK(parse_code(missing_file) == ErrorCode::Config);

    std::string bad_weight = kLambda;
    bad_weight.replace(bad_weight.find("\"which_weight\": 0"), 17, "\"which_weight\": 3");
    CHECK(parse_code(bad_weight) == ErrorCode::Config);

    CHECK(parse_code(R"({"name": "t", "kind": "bfgs-run", "parameters": {
        "family": "two-peak", "quadrature": {"kind": "grid", "resolution": 8, "refine_depth": 1},
        "constraints": [], "starts": [[1, 1]]}})") == ErrorCode::Config);
}

TEST_CASE("config errors name the offending path") {
    std::string bad = kLambda;
    bad.replace(bad.find("[0.5, 1.5]"), 10, "[0.5, \"x\"]");
    try {
        parse_config(bad, kConfigs);
        FAIL("accepted");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("bracket") != std::string::npos);
    }
}

TEST_CASE("random starts are reproducible from the seed") {
    const ExperimentConfig a = load_config(kConfigs / "bfgs_eud.json");
    const ExperimentConfig b = load_config(kConfigs / "bfgs_eud.json");
    const auto& sa = std::get<BfgsParams>(a.params).starts;
    const auto& sb = std::get<BfgsParams>(b.params).starts;
    REQUIRE(sa.size() == 4);
    for (std::size_t i = 0; i < sa.size(); ++i) {
        CHECK(sa[i].weights() == sb[i].weights());
        for (double w : sa[i].weights()) {
            CHECK(w >= 0.5);
            CHECK(w <= 2.0);
        }
    }
}

TEST_CASE("one-dimensional grids") {
    CHECK(Grid1D{0.0, 1.0, 5}.values() == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
    CHECK(Grid1D{2.0, 3.0, 1}.values() == std::vector<double>{2.0});
    const auto v = Grid1D{0.3, 0.7, 81}.values();
    CHECK(v.front() == 0.3);
    CHECK(v.back() == 0.7);
}

TEST_CASE("shipped configs read from the file directory") {
    // Relative family paths resolve against the config, not the cwd.
    const fs::path old = fs::current_path();
    fs::current_path(fs::temp_directory_path());
    CHECK_NOTHROW(load_config(kConfigs / "bfgs_slowdown.json"));
    fs::current_path(old);
    CHECK(read(kConfigs / "families" / "two_peak.json").find("offset") != std::string::npos);
}
