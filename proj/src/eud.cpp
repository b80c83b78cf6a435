#include "dvhsmooth/eud.hpp"

#include <cmath>

#include "dvhsmooth/common.hpp"
#include "dvhsmooth/error.hpp"
#include "grid.hpp"

namespace dvhsmooth {

void EudSpec::validate() const {
    require(std::isfinite(alpha) && alpha != 0.0, "EUD exponent alpha must be finite and nonzero");
    quad.validate();
}

namespace {

// Visits every quadrature node (x, weight). Grid slabs are handed to
// parallel_for; `slab` tells the callback where to accumulate.
template <class Fn>
void for_each_node(const Region& region, const QuadratureSpec& quad, Fn&& fn) {
    if (quad.kind == QuadratureSpec::Kind::Grid) {
        const detail::GridLayout g(region, quad.resolution);
        parallel_for(g.res, [&](int i) {
            detail::for_each_node_in_slab(region, g, quad.refine_depth, i,
                                          [&](const Vec3& x, double w) { fn(i, x, w); });
        });
    } else {
        detail::for_each_mc_sample(region, quad.samples, quad.seed,
                                   [&](const Vec3& x) { fn(0, x, 1.0); });
    }
}

int slab_count(const QuadratureSpec& quad) {
    return quad.kind == QuadratureSpec::Kind::Grid ? quad.resolution : 1;
}

// Upper bound of the field, used to keep f^alpha in range.
double field_scale(const PeakFamily& family, const ParamPoint& sigma) {
    double m = 0.0;
    for (std::size_t i = 0; i < family.dimension(); ++i) m += sigma[i] / family.peaks()[i].offset;
    return m;
}

std::vector<double> reduce_slabs(const std::vector<std::vector<double>>& slabs, std::size_t width) {
    std::vector<double> total(width, 0.0);
    for (const auto& s : slabs)
        for (std::size_t k = 0; k < width; ++k) total[k] += s[k];
    return total;
}

void check_inputs(const PeakFamily& family, const ParamPoint& sigma) {
    require(sigma.size() == family.dimension(), "parameter point does not match family");
}

}  // namespace

EudValueGrad eud_with_grad(const PeakFamily& family, const ParamPoint& sigma, const EudSpec& spec) {
    check_inputs(family, sigma);
    spec.validate();
    const std::size_t m = family.dimension();
    const double a = spec.alpha;
    const double scale = field_scale(family, sigma);
    const auto peaks = family.peaks();
    const auto weights = sigma.weights();

    const std::size_t width = 2 + m;
    std::vector<std::vector<double>> slabs(static_cast<std::size_t>(slab_count(spec.quad)),
                                           std::vector<double>(width, 0.0));
    for_each_node(spec.region, spec.quad, [&](int s, const Vec3& x, double w) {
        auto& acc = slabs[static_cast<std::size_t>(s)];
        const double u = eval_unchecked(peaks, weights, x) / scale;
        const double pa1 = std::pow(u, a - 1.0);
        acc[0] += w;
        acc[1] += w * std::pow(u, a);
        for (std::size_t j = 0; j < m; ++j)
            acc[2 + j] += w * pa1 / (peaks[j].offset + (x - peaks[j].center).squaredNorm());
    });
    const auto total = reduce_slabs(slabs, width);
    const double measure = total[0];
    const double mean = total[1] / measure;
    if (!(measure > 0.0) || !(mean > 0.0) || !std::isfinite(mean))
        fail(ErrorCode::NumericalDomain, "EUD integral is zero or not finite");

    EudValueGrad out;
    const double ratio = std::pow(mean, 1.0 / a);  // E / M
    out.value = scale * ratio;
    out.grad.resize(static_cast<Eigen::Index>(m));
    // dE/dsigma_j = (E/M)^(1-a) mean( (f/M)^(a-1) phi_j )
    const double lead = std::pow(ratio, 1.0 - a);
    for (std::size_t j = 0; j < m; ++j)
        out.grad[static_cast<Eigen::Index>(j)] = lead * total[2 + j] / measure;
    return out;
}

double eud(const PeakFamily& family, const ParamPoint& sigma, const EudSpec& spec) {
    const double alpha[1] = {spec.alpha};
    spec.validate();
    return power_mean_monotone_check(family, sigma, spec.region, alpha, spec.quad).front();
}

Eigen::VectorXd eud_grad_sigma(const PeakFamily& family, const ParamPoint& sigma,
                               const EudSpec& spec) {
    return eud_with_grad(family, sigma, spec).grad;
}

std::vector<double> power_mean_monotone_check(const PeakFamily& family, const ParamPoint& sigma,
                                              const Region& region, std::span<const double> alphas,
                                              const QuadratureSpec& quad) {
    check_inputs(family, sigma);
    quad.validate();
    require(!alphas.empty(), "alpha list is empty");
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        require(std::isfinite(alphas[k]) && alphas[k] != 0.0, "alpha values must be finite and nonzero");
        if (k > 0) require(alphas[k] >= alphas[k - 1], "alpha values must be ascending");
    }
    const double scale = field_scale(family, sigma);
    const auto peaks = family.peaks();
    const auto weights = sigma.weights();
    const std::size_t width = 1 + alphas.size();
    std::vector<std::vector<double>> slabs(static_cast<std::size_t>(slab_count(quad)),
                                           std::vector<double>(width, 0.0));
    for_each_node(region, quad, [&](int s, const Vec3& x, double w) {
        auto& acc = slabs[static_cast<std::size_t>(s)];
        const double u = eval_unchecked(peaks, weights, x) / scale;
        acc[0] += w;
        for (std::size_t k = 0; k < alphas.size(); ++k) acc[1 + k] += w * std::pow(u, alphas[k]);
    });
    const auto total = reduce_slabs(slabs, width);
    std::vector<double> out(alphas.size());
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        const double mean = total[1 + k] / total[0];
        if (!(total[0] > 0.0) || !(mean > 0.0) || !std::isfinite(mean))
            fail(ErrorCode::NumericalDomain, "EUD integral is zero or not finite");
        out[k] = scale * std::pow(mean, 1.0 / alphas[k]);
    }
    return out;
}

}  // namespace dvhsmooth
