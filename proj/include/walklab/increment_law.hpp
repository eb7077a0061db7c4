#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "walklab/common.hpp"
#include "walklab/rng.hpp"

namespace walklab {

enum class LawKind { rademacher, lattice_pmf, gaussian, uniform_centered };

// Centered step distribution with finite variance. The lattice kinds expose
// their span and integer support for the exact oracle; gaussian and
// uniform-centered are Monte Carlo only.
class IncrementLaw {
  public:
    static IncrementLaw rademacher() {
        IncrementLaw law;
        law.kind_ = LawKind::rademacher;
        law.span_ = 1.0;
        law.points_ = {-1, 1};
        law.probs_ = {0.5, 0.5};
        law.variance_ = 1.0;
        return law;
    }

    static IncrementLaw lattice(double span, std::vector<long long> points, std::vector<double> probs) {
        require(span > 0.0 && std::isfinite(span), Errc::invalid_spec, "lattice span must be positive");
        require(!points.empty() && points.size() == probs.size(), Errc::invalid_spec,
                "lattice pmf needs matching, non-empty points and probabilities");

        std::vector<std::size_t> order(points.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });

        IncrementLaw law;
        law.kind_ = LawKind::lattice_pmf;
        for (std::size_t i : order) {
            require(probs[i] >= 0.0 && probs[i] <= 1.0, Errc::invalid_spec, "lattice probabilities must lie in [0,1]");
            if (probs[i] == 0.0) continue;
            law.points_.push_back(points[i]);
            law.probs_.push_back(probs[i]);
        }
        require(!law.points_.empty(), Errc::invalid_spec, "lattice pmf has no mass");
        for (std::size_t i = 1; i < law.points_.size(); ++i)
            require(law.points_[i] != law.points_[i - 1], Errc::invalid_spec, "lattice points must be distinct");

        double total = 0.0, mean = 0.0, second = 0.0;
        for (std::size_t i = 0; i < law.points_.size(); ++i) {
            total += law.probs_[i];
            mean += law.probs_[i] * static_cast<double>(law.points_[i]);
            second += law.probs_[i] * static_cast<double>(law.points_[i]) * static_cast<double>(law.points_[i]);
        }
        require(std::abs(total - 1.0) <= 1e-12, Errc::invalid_spec, "lattice probabilities must sum to 1");
        require(std::abs(mean * span) <= 1e-12, Errc::invalid_spec, "lattice pmf must have mean zero");
        require(second > 0.0, Errc::invalid_spec, "lattice pmf must have positive variance");

        // Normalize to the coarsest lattice containing the support.
        long long g = 0;
        for (long long p : law.points_) g = std::gcd(g, std::abs(p));
        if (g > 1) {
            for (long long& p : law.points_) p /= g;
            span *= static_cast<double>(g);
            second /= static_cast<double>(g) * static_cast<double>(g);
        }
        law.span_ = span;
        law.variance_ = second * span * span;
        return law;
    }

    static IncrementLaw gaussian(double sigma) {
        require(sigma > 0.0 && std::isfinite(sigma), Errc::invalid_spec, "gaussian sigma must be positive");
        IncrementLaw law;
        law.kind_ = LawKind::gaussian;
        law.sigma_param_ = sigma;
        law.variance_ = sigma * sigma;
        return law;
    }

    static IncrementLaw uniform_centered(double half_width) {
        require(half_width > 0.0 && std::isfinite(half_width), Errc::invalid_spec,
                "uniform half-width must be positive");
        IncrementLaw law;
        law.kind_ = LawKind::uniform_centered;
        law.half_width_ = half_width;
        law.variance_ = half_width * half_width / 3.0;
        return law;
    }

    LawKind kind() const { return kind_; }
    double variance() const { return variance_; }
    double sigma() const { return std::sqrt(variance_); }
    bool is_lattice() const { return kind_ == LawKind::rademacher || kind_ == LawKind::lattice_pmf; }

    double span() const {
        require(is_lattice(), Errc::bad_argument, "span is defined for lattice laws only");
        return span_;
    }
    const std::vector<long long>& points() const { return points_; }  // in span units
    const std::vector<double>& probs() const { return probs_; }

    long long min_step() const { return points_.front(); }
    long long max_step() const { return points_.back(); }

    double sample(RandomStream& rs) const {
        switch (kind_) {
            case LawKind::rademacher:
                return (rs.next_u64() >> 63) ? 1.0 : -1.0;
            case LawKind::lattice_pmf: {
                double u = rs.next_u01();
                double acc = 0.0;
                for (std::size_t i = 0; i + 1 < probs_.size(); ++i) {
                    acc += probs_[i];
                    if (u < acc) return static_cast<double>(points_[i]) * span_;
                }
                return static_cast<double>(points_.back()) * span_;
            }
            case LawKind::gaussian:
                return sigma_param_ * next_gaussian(rs);
            case LawKind::uniform_centered:
                return (2.0 * rs.next_u01() - 1.0) * half_width_;
        }
        return 0.0;
    }

  private:
    IncrementLaw() = default;

    LawKind kind_ = LawKind::rademacher;
    double variance_ = 1.0;
    double span_ = 1.0;
    std::vector<long long> points_;
    std::vector<double> probs_;
    double sigma_param_ = 1.0;
    double half_width_ = 1.0;
};

}  // namespace walklab
