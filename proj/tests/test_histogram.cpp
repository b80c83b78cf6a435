#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "dvhsmooth/error.hpp"
#include "dvhsmooth/histogram.hpp"

using namespace dvhsmooth;

namespace {

constexpr double kPi = std::numbers::pi;

// One peak w / (c + r^2) centred in a ball of radius R: the level set
// {f >= h} is the ball of radius sqrt(w/h - c).
double ball_oracle(double w, double c, double radius, double h) {
    const double r2 = w / h - c;
    if (r2 <= 0.0) return 0.0;
    return std::min(1.0, std::pow(std::sqrt(r2) / radius, 3));
}

// Composite Simpson over x1 of the disk area pi * clip(...), with the kinks
// of the integrand used as breakpoints.
double saddle_volume_oracle(double k) {
    auto area = [k](double x) {
        const double r2 = std::min(x * x - k, 1.0 - x * x);
        return r2 > 0.0 ? kPi * r2 : 0.0;
    };
    std::vector<double> cuts{0.0, 1.0};
    if (k > 0.0 && k < 1.0) cuts.push_back(std::sqrt(k));
    const double m2 = (1.0 + k) / 2.0;
    if (m2 > 0.0 && m2 < 1.0) cuts.push_back(std::sqrt(m2));
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const int n = 20000;
        const double a = cuts[i], b = cuts[i + 1], h = (b - a) / n;
        double s = area(a) + area(b);
        for (int j = 1; j < n; ++j) s += area(a + j * h) * (j % 2 ? 4.0 : 2.0);
        total += s * h / 3.0;
    }
    return 2.0 * total;  // x1 in [-1, 0] mirrors [0, 1]
}

}  // namespace

TEST_CASE("single peak in a ball matches radial inversion") {
    const Region ball = Region::ball(Vec3::Zero(), 4.0);
    const std::vector<double> levels{0.08, 0.1, 0.2, 0.4, 0.6, 0.9};
    const auto v = volumes_above(single_peak_family(), ParamPoint{1.0}, ball, levels, QuadratureSpec::grid(64, 3));
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const double o = ball_oracle(1.0, 1.0, 4.0, levels[i]);
        CHECK(v[i] == doctest::Approx(o).epsilon(5e-3));
    }
}

TEST_CASE("single peak in a box: level balls strictly inside") {
    // Box [-2,2]^3; level radius sqrt(1/h - 1) < 2 for h > 0.2.
    const Region box = Region::box(Vec3::Constant(-2), Vec3::Constant(2));
    for (double h : {0.25, 0.5, 0.8}) {
        const double r = std::sqrt(1.0 / h - 1.0);
        const double oracle = 4.0 / 3.0 * kPi * r * r * r / 64.0;
        CHECK(volume_above(single_peak_family(), ParamPoint{1.0}, box, h, QuadratureSpec::grid(48, 3)) ==
              doctest::Approx(oracle).epsilon(2e-3));
    }
}

TEST_CASE("volume is 1 below the field minimum and 0 above the maximum") {
    const Region box = Region::default_box();
    const auto fam = two_peak_family();
    const ParamPoint s{1.0, 1.0};
    const auto q = QuadratureSpec::grid(24, 2);
    CHECK(volume_above(fam, s, box, 0.0, q) == 1.0);
    CHECK_THROWS_AS(volume_above(fam, s, box, -1.0, q), Error);
    CHECK(volume_above(fam, s, box, 1.06, q) == 0.0);
    CHECK(volume_above(fam, s, box, 5.0, q) == 0.0);
}

TEST_CASE("a one-level grid at h = 0 is the header plus the single row 0,1") {
    const std::vector<double> h{0.0};
    const DvhCurve c = dvh_curve(single_peak_family(), ParamPoint{1.0}, Region::default_box(), h, QuadratureSpec::grid(8, 1));
    std::ostringstream os;
    write_dvh_csv(os, c);
    CHECK(os.str() == "dose,volume\n0.0000000000000000e+00,1.0000000000000000e+00\n");
}

TEST_CASE("DVH curves are monotone on random fields (property)") {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> pos(-3, 3), off(0.5, 3), w(0.2, 2), hs(0.0, 1.5);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Peak> peaks;
        std::vector<double> weights;
        const int n = 1 + trial % 3;
        for (int i = 0; i < n; ++i) {
            peaks.push_back({Vec3(pos(rng), pos(rng), pos(rng)), off(rng)});
            weights.push_back(w(rng));
        }
        std::vector<double> levels;
        for (int i = 0; i < 25; ++i) levels.push_back(hs(rng));
        std::sort(levels.begin(), levels.end());
        const Region region = trial % 2 ? Region::ball(Vec3(pos(rng), 0, 0), 3.0) : Region::default_box();
        const DvhCurve c = dvh_curve(PeakFamily(peaks), ParamPoint(weights), region, levels, QuadratureSpec::grid(20, 2));
        REQUIRE(c.doses.size() == levels.size());
        for (std::size_t i = 0; i < c.doses.size(); ++i) {
            CHECK(c.volumes[i] >= 0.0);
            CHECK(c.volumes[i] <= 1.0);
            if (i > 0) {
                CHECK(c.doses[i] >= c.doses[i - 1]);
                CHECK(c.volumes[i] <= c.volumes[i - 1]);
            }
        }
    }
}

TEST_CASE("raising a weight never shrinks a volume (property)") {
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> w(0.3, 1.5), d(0.0, 0.3), h(0.1, 0.9);
    const auto fam = two_peak_family();
    const Region box = Region::box(Vec3(-2, -2, -2), Vec3(6, 2, 2));
    for (int trial = 0; trial < 10; ++trial) {
        const double w1 = w(rng), w2 = w(rng), level = h(rng);
        const double v0 = volume_above(fam, ParamPoint{w1, w2}, box, level, QuadratureSpec::grid(24, 3));
        const double v1 = volume_above(fam, ParamPoint{w1 + d(rng), w2}, box, level, QuadratureSpec::grid(24, 3));
        const double v2 = volume_above(fam, ParamPoint{w1, w2 + d(rng)}, box, level, QuadratureSpec::grid(24, 3));
        CHECK(v1 >= v0 - 1e-12);
        CHECK(v2 >= v0 - 1e-12);
    }
}

TEST_CASE("Monte-Carlo and grid quadrature agree within the sampling error") {
    const auto fam = two_peak_family();
    const ParamPoint s{1.0, 1.0};
    const Region box = Region::box(Vec3(-3, -3, -3), Vec3(7, 3, 3));
    for (double h : {0.1, 0.3, 0.5}) {
        const double grid = volume_above(fam, s, box, h, QuadratureSpec::grid(64, 3));
        const McEstimate mc = volume_above_mc(fam, s, box, h, 200000, 9);
        CHECK(std::abs(mc.value - grid) <= 4.0 * mc.standard_error + 1e-4);
        // Fixed seed, fixed answer.
        CHECK(volume_above_mc(fam, s, box, h, 200000, 9).value == mc.value);
        CHECK(volume_above(fam, s, box, h, QuadratureSpec::monte_carlo(200000, 9)) == mc.value);
    }
}

TEST_CASE("grid volumes do not depend on the thread count") {
    const auto fam = two_peak_family();
    const std::vector<double> levels{0.2, 0.36, 0.56};
    setenv("DVHSMOOTH_THREADS", "1", 1);
    const auto a = volumes_above(fam, ParamPoint{1.0, 1.0}, Region::default_box(), levels, QuadratureSpec::grid(32, 3));
    setenv("DVHSMOOTH_THREADS", "3", 1);
    const auto b = volumes_above(fam, ParamPoint{1.0, 1.0}, Region::default_box(), levels, QuadratureSpec::grid(32, 3));
    unsetenv("DVHSMOOTH_THREADS");
    CHECK(a == b);
}

TEST_CASE("quadrature specs are validated") {
    CHECK_THROWS_AS(QuadratureSpec::grid(0, 3), Error);
    CHECK_THROWS_AS(QuadratureSpec::grid(8, -1), Error);
    CHECK_THROWS_AS(QuadratureSpec::monte_carlo(0, 1), Error);
}

TEST_CASE("standard-form local volumes") {
    // Maximum: a ball of radius sqrt(-k).
    for (double k : {-0.25, -0.04, -0.01})
        CHECK(local_volume_standard(0, 3, k, 1.0) == doctest::Approx(4.0 / 3.0 * kPi * std::pow(-k, 1.5)).epsilon(1e-12));
    CHECK(local_volume_standard(0, 3, 0.1, 1.0) == 0.0);
    // Minimum: the ball minus a ball.
    CHECK(local_volume_standard(3, 0, 0.25, 1.0) == doctest::Approx(4.0 / 3.0 * kPi * (1 - 0.125)).epsilon(1e-12));
    // Saddles against numerical integration.
    for (double k : {-0.3, -0.05, 0.0, 0.05, 0.3})
        CHECK(local_volume_standard(1, 2, k, 1.0) == doctest::Approx(saddle_volume_oracle(k)).epsilon(1e-7));
    // Swapping the signature is taking the complement with k -> -k.
    for (double k : {-0.4, -0.1, 0.02, 0.2})
        CHECK(local_volume_standard(1, 2, k, 1.0) + local_volume_standard(2, 1, -k, 1.0) ==
              doctest::Approx(4.0 / 3.0 * kPi).epsilon(1e-12));
}

TEST_CASE("local volume exponents are 3/2 on the side where a component appears") {
    CHECK(local_volume_exponent(0, 3, Side::Left, 1.0).value() == doctest::Approx(1.5).epsilon(0.01));
    CHECK_FALSE(local_volume_exponent(0, 3, Side::Right, 1.0).has_value());
    CHECK(local_volume_exponent(3, 0, Side::Right, 1.0).value() == doctest::Approx(1.5).epsilon(0.01));
    CHECK(local_volume_exponent(1, 2, Side::Right, 1.0).value() == doctest::Approx(1.5).epsilon(0.01));
    CHECK(local_volume_exponent(2, 1, Side::Left, 1.0).value() == doctest::Approx(1.5).epsilon(0.01));
}
