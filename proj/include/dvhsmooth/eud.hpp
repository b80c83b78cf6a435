#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "dvhsmooth/dose_model.hpp"
#include "dvhsmooth/histogram.hpp"
#include "dvhsmooth/region.hpp"

namespace dvhsmooth {

/// Equivalent uniform dose E_alpha = ( mean_R f^alpha )^(1/alpha).
struct EudSpec {
    double alpha = 1.0;
    Region region = Region::default_box();
    QuadratureSpec quad;

    void validate() const;
};

/// The grid variant integrates with the midpoint rule on the region's cells;
/// cells cut by a ball boundary are split refine_depth times and weighted by
/// their inside fraction. Monte-Carlo averages over the seeded sample set.
double eud(const PeakFamily& family, const ParamPoint& sigma, const EudSpec& spec);

/// dE/dsigma_j = E^(1-alpha) mean( f^(alpha-1) df/dsigma_j ), on the same nodes
/// as eud() so that it is the exact derivative of the discrete value.
Eigen::VectorXd eud_grad_sigma(const PeakFamily& family, const ParamPoint& sigma,
                               const EudSpec& spec);

struct EudValueGrad {
    double value = 0.0;
    Eigen::VectorXd grad;
};
EudValueGrad eud_with_grad(const PeakFamily& family, const ParamPoint& sigma, const EudSpec& spec);

/// E_alpha for each alpha (ascending, nonzero), one pass over the nodes.
std::vector<double> power_mean_monotone_check(const PeakFamily& family, const ParamPoint& sigma,
                                              const Region& region, std::span<const double> alphas,
                                              const QuadratureSpec& quad);

}  // namespace dvhsmooth
