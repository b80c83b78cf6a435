#include "dvhsmooth/dose_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "dvhsmooth/error.hpp"

namespace dvhsmooth {

PeakFamily::PeakFamily(std::vector<Peak> peaks) : peaks_(std::move(peaks)) {
    require(!peaks_.empty(), "peak family needs at least one peak");
    for (const auto& p : peaks_) {
        require(p.center.allFinite(), "peak center must be finite");
        require(std::isfinite(p.offset) && p.offset > 0.0, "peak offset must be positive");
    }
}

ParamPoint::ParamPoint(std::vector<double> weights) : weights_(std::move(weights)) {
    require(!weights_.empty(), "parameter point is empty");
    bool any_positive = false;
    for (double w : weights_) {
        require(std::isfinite(w) && w >= 0.0, "weights must be finite and nonnegative");
        any_positive = any_positive || w > 0.0;
    }
    require(any_positive, "at least one weight must be positive");
}

ParamPoint ParamPoint::with(std::size_t i, double value) const {
    require(i < weights_.size(), "weight index out of range");
    auto w = weights_;
    w[i] = value;
    return ParamPoint(std::move(w));
}

PeakFamily single_peak_family() {
    return PeakFamily({Peak{Vec3::Zero(), 1.0}});
}

PeakFamily two_peak_family() {
    return PeakFamily({Peak{Vec3::Zero(), 1.0}, Peak{Vec3(4.0, 0.0, 0.0), 2.0}});
}

namespace {

void check_dims(const PeakFamily& family, const ParamPoint& sigma, const Vec3& x) {
    if (sigma.size() != family.dimension()) {
        std::ostringstream os;
        os << "parameter point has " << sigma.size() << " weights, family has "
           << family.dimension() << " peaks";
        fail(ErrorCode::InvalidArgument, os.str());
    }
    require(x.allFinite(), "evaluation point must be finite");
}

}  // namespace

double eval_unchecked(std::span<const Peak> peaks, std::span<const double> weights,
                      const Vec3& x) noexcept {
    double f = 0.0;
    for (std::size_t i = 0; i < peaks.size(); ++i)
        f += weights[i] / (peaks[i].offset + (x - peaks[i].center).squaredNorm());
    return f;
}

FieldJet jet_unchecked(std::span<const Peak> peaks, std::span<const double> weights,
                       const Vec3& x) noexcept {
    // d/dx w/q = -2w d/q^2,  d2/dx2 w/q = 8w d d^T/q^3 - 2w I/q^2,  q = c + |d|^2
    FieldJet j;
    for (std::size_t i = 0; i < peaks.size(); ++i) {
        const Vec3 d = x - peaks[i].center;
        const double inv_q = 1.0 / (peaks[i].offset + d.squaredNorm());
        const double w = weights[i];
        const double a = w * inv_q;
        const double b = a * inv_q;
        j.value += a;
        j.gradient -= 2.0 * b * d;
        j.hessian.noalias() += (8.0 * b * inv_q) * (d * d.transpose());
        j.hessian.diagonal().array() -= 2.0 * b;
    }
    return j;
}

double eval(const PeakFamily& family, const ParamPoint& sigma, const Vec3& x) {
    check_dims(family, sigma, x);
    return eval_unchecked(family.peaks(), sigma.weights(), x);
}

Vec3 gradient_x(const PeakFamily& family, const ParamPoint& sigma, const Vec3& x) {
    check_dims(family, sigma, x);
    return jet_unchecked(family.peaks(), sigma.weights(), x).gradient;
}

Mat3 hessian_x(const PeakFamily& family, const ParamPoint& sigma, const Vec3& x) {
    check_dims(family, sigma, x);
    Mat3 h = jet_unchecked(family.peaks(), sigma.weights(), x).hessian;
    // Mirror the upper triangle so symmetry holds bit for bit.
    for (int r = 1; r < 3; ++r)
        for (int c = 0; c < r; ++c) h(r, c) = h(c, r);
    return h;
}

Eigen::VectorXd grad_sigma(const PeakFamily& family, const ParamPoint& sigma, const Vec3& x) {
    check_dims(family, sigma, x);
    Eigen::VectorXd g(static_cast<Eigen::Index>(family.dimension()));
    for (std::size_t i = 0; i < family.dimension(); ++i) {
        const auto& p = family.peaks()[i];
        g[static_cast<Eigen::Index>(i)] = 1.0 / (p.offset + (x - p.center).squaredNorm());
    }
    return g;
}

FieldJet jet(const PeakFamily& family, const ParamPoint& sigma, const Vec3& x) {
    check_dims(family, sigma, x);
    return jet_unchecked(family.peaks(), sigma.weights(), x);
}

CriticalPoint classify_critical_point(const PeakFamily& family, const ParamPoint& sigma,
                                      const Vec3& x, const CriticalPointOptions& opts) {
    const FieldJet j = jet(family, sigma, x);
    if (!(j.gradient.norm() < opts.grad_tol)) {
        std::ostringstream os;
        os << "not a critical point: |grad f| = " << j.gradient.norm() << " at (" << x.transpose() << ")";
        fail(ErrorCode::InvalidArgument, os.str());
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(j.hessian, Eigen::EigenvaluesOnly);
    const Vec3 lambda = eig.eigenvalues();
    const double det = lambda.prod();
    const double scale = j.hessian.norm() / std::sqrt(3.0);
    if (!(std::abs(det) > opts.degeneracy_tol * scale * scale * scale)) {
        std::ostringstream os;
        os << "degenerate critical point at (" << x.transpose() << "), det Hess = " << det;
        fail(ErrorCode::DegenerateCriticalPoint, os.str());
    }
    CriticalPoint cp;
    cp.location = x;
    cp.value = j.value;
    cp.hessian_det = det;
    for (int i = 0; i < 3; ++i) {
        if (lambda[i] > 0.0)
            ++cp.signature.positive;
        else
            ++cp.signature.negative;
    }
    return cp;
}

namespace {

constexpr int kSeedRefineLevels = 6;

// Collects centers of cells, refined kSeedRefineLevels times, in which a
// gradient zero cannot be ruled out: a cell is dropped when some component
// |g_i(c)| exceeds a padded first-order bound of its variation over the cell.
void collect_seed_cells(std::span<const Peak> peaks, std::span<const double> weights,
                        const Vec3& c, const Vec3& hw, int level, std::vector<Vec3>& out) {
    const FieldJet j = jet_unchecked(peaks, weights, c);
    const Vec3 variation = 3.0 * (j.hessian.cwiseAbs() * hw);
    for (int i = 0; i < 3; ++i)
        if (std::abs(j.gradient[i]) > variation[i]) return;
    if (level == 0) {
        out.push_back(c);
        return;
    }
    const Vec3 chw = 0.5 * hw;
    for (int o = 0; o < 8; ++o) {
        const Vec3 cc(c[0] + ((o & 1) ? chw[0] : -chw[0]), c[1] + ((o & 2) ? chw[1] : -chw[1]),
                      c[2] + ((o & 4) ? chw[2] : -chw[2]));
        collect_seed_cells(peaks, weights, cc, chw, level - 1, out);
    }
}

std::optional<Vec3> newton_gradient_root(std::span<const Peak> peaks,
                                         std::span<const double> weights, Vec3 x,
                                         double max_travel, const CriticalPointOptions& opts) {
    const Vec3 start = x;
    for (int it = 0; it <= opts.max_iter; ++it) {
        const FieldJet j = jet_unchecked(peaks, weights, x);
        if (j.gradient.norm() < opts.grad_tol) return x;
        if (it == opts.max_iter) break;
        const Vec3 dx = j.hessian.fullPivLu().solve(-j.gradient);
        if (!dx.allFinite()) return std::nullopt;
        x += dx;
        if ((x - start).norm() > max_travel) return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace

std::vector<CriticalPoint> find_critical_points(const PeakFamily& family,
                                                const ParamPoint& sigma,
                                                const Region& search_box,
                                                int seed_resolution,
                                                const CriticalPointOptions& opts) {
    require(seed_resolution >= 4, "seed_resolution must be at least 4");
    require(sigma.size() == family.dimension(), "parameter point does not match family");
    const Vec3 lo = search_box.lower();
    const Vec3 cell = (search_box.upper() - lo) / seed_resolution;

    std::vector<Vec3> seeds;
    for (int i = 0; i < seed_resolution; ++i)
        for (int j = 0; j < seed_resolution; ++j)
            for (int k = 0; k < seed_resolution; ++k)
                collect_seed_cells(family.peaks(), sigma.weights(),
                                   lo + Vec3(i + 0.5, j + 0.5, k + 0.5).cwiseProduct(cell),
                                   0.5 * cell, kSeedRefineLevels, seeds);

    const double max_travel = cell.norm();
    std::vector<CriticalPoint> found;
    for (const Vec3& seed : seeds) {
        auto root = newton_gradient_root(family.peaks(), sigma.weights(), seed, max_travel, opts);
        if (!root || !search_box.contains(*root)) continue;
        const bool duplicate = std::any_of(found.begin(), found.end(), [&](const auto& cp) {
            return (cp.location - *root).norm() <= opts.dedup_radius;
        });
        if (duplicate) continue;
        found.push_back(classify_critical_point(family, sigma, *root, opts));
    }
    std::sort(found.begin(), found.end(),
              [](const CriticalPoint& a, const CriticalPoint& b) { return a.value > b.value; });
    return found;
}

std::optional<CriticalPoint> refine_critical_point(const PeakFamily& family,
                                                   const ParamPoint& sigma,
                                                   const Vec3& guess, double max_travel,
                                                   const CriticalPointOptions& opts) {
    Vec3 x = guess;
    for (int it = 0; it <= opts.max_iter; ++it) {
        const FieldJet j = jet(family, sigma, x);
        if (j.gradient.norm() < opts.grad_tol) return classify_critical_point(family, sigma, x, opts);
        if (it == opts.max_iter) break;
        const Vec3 dx = j.hessian.fullPivLu().solve(-j.gradient);
        if (!dx.allFinite()) return std::nullopt;
        x += dx;
        if ((x - guess).norm() > max_travel) return std::nullopt;
    }
    return std::nullopt;
}

CriticalPoint continue_critical_point(const PeakFamily& family, const ParamPath& sigma_path,
                                      double t_from, const Vec3& location, double t_to,
                                      const CriticalPointOptions& opts) {
    constexpr int kMaxHalvings = 20;
    const MorseSignature start_sig =
        classify_critical_point(family, sigma_path(t_from), location, opts).signature;

    double t = t_from;
    Vec3 x = location;
    double dt = t_to - t_from;
    int halvings = 0;
    while (t != t_to) {
        const double t_next = (std::abs(t_to - t) <= std::abs(dt)) ? t_to : t + dt;
        auto cp = refine_critical_point(family, sigma_path(t_next), x, 0.5, opts);
        if (cp && cp->signature == start_sig) {
            t = t_next;
            x = cp->location;
            continue;
        }
        if (++halvings > kMaxHalvings) {
            std::ostringstream os;
            os << "lost track of critical point between t=" << t << " and t=" << t_next;
            fail(ErrorCode::TrackingLost, os.str());
        }
        dt *= 0.5;
    }
    return classify_critical_point(family, sigma_path(t_to), x, opts);
}

std::vector<TrackedCriticalValue> track_critical_value(const PeakFamily& family,
                                                       const ParamPath& sigma_path,
                                                       std::size_t which,
                                                       std::span<const double> t_grid,
                                                       const Region& search_box,
                                                       const CriticalPointOptions& opts) {
    require(!t_grid.empty(), "t_grid is empty");
    const auto initial = find_critical_points(family, sigma_path(t_grid.front()), search_box, 8, opts);
    if (which >= initial.size()) {
        std::ostringstream os;
        os << "critical point index " << which << " requested, only " << initial.size() << " found";
        fail(ErrorCode::InvalidArgument, os.str());
    }
    std::vector<TrackedCriticalValue> out;
    out.reserve(t_grid.size());
    Vec3 x = initial[which].location;
    out.push_back({t_grid.front(), initial[which].value, x});
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        const auto cp = continue_critical_point(family, sigma_path, t_grid[i - 1], x, t_grid[i], opts);
        x = cp.location;
        out.push_back({t_grid[i], cp.value, x});
    }
    return out;
}

}  // namespace dvhsmooth
