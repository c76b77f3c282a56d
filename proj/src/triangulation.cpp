#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include <Eigen/Dense>

#include "radar2/localize.hpp"

namespace radar2 {

namespace {

constexpr double kRankTolerance = 1e-10;

struct LineSolve {
    LocatedEmitter emitter;
    std::vector<double> singular_values;
};

std::string anchor_list(const std::vector<int>& anchors) {
    std::string s;
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(anchors[i]);
    }
    return s;
}

// `ids` maps each line back to the caller's anchor index for error messages.
LineSolve solve_lines(std::span<const Position> anchors, std::span<const double> bearings_deg,
                      std::span<const int> ids) {
    const int n = static_cast<int>(anchors.size());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2 * n, n + 2);
    Eigen::VectorXd d(2 * n);
    std::vector<double> s(n), c(n);
    for (int i = 0; i < n; ++i) {
        s[i] = std::sin(deg_to_rad(bearings_deg[i]));
        c[i] = std::cos(deg_to_rad(bearings_deg[i]));
        g(2 * i, 0) = 1.0;
        g(2 * i, 2 + i) = -s[i];
        g(2 * i + 1, 1) = 1.0;
        g(2 * i + 1, 2 + i) = -c[i];
        d[2 * i] = anchors[i].x;
        d[2 * i + 1] = anchors[i].y;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    LineSolve out;
    out.singular_values.assign(sv.data(), sv.data() + sv.size());
    const double smallest = sv[sv.size() - 1];
    if (!(smallest >= kRankTolerance * sv[0])) {
        // Anchors whose a_i takes part in the null direction are the culprits.
        const Eigen::VectorXd null = svd.matrixV().col(sv.size() - 1);
        std::vector<int> culprits;
        for (int i = 0; i < n; ++i) {
            if (std::abs(null[2 + i]) > 1e-6) culprits.push_back(ids[i]);
        }
        throw GeometryError("ill-conditioned bearing geometry (near-parallel lines) at anchors " +
                                anchor_list(culprits),
                            culprits);
    }

    const Eigen::VectorXd m =
        svd.matrixV() * (svd.matrixU().transpose() * d).cwiseQuotient(sv);
    auto& e = out.emitter;
    e.position = {m[0], m[1], 0.0};
    e.line_distances.assign(m.data() + 2, m.data() + m.size());
    for (int i = 0; i < n; ++i) {
        const double ex = m[0] - m[2 + i] * s[i] - anchors[i].x;
        const double ey = m[1] - m[2 + i] * c[i] - anchors[i].y;
        e.residual += ex * ex + ey * ey;
    }
    return out;
}

bool all_coincident(std::span<const Position> anchors) {
    return std::all_of(anchors.begin(), anchors.end(), [&](const Position& p) {
        return p.x == anchors[0].x && p.y == anchors[0].y;
    });
}

}  // namespace

double line_residual(const Position& p, std::span<const Position> anchors,
                     std::span<const double> bearings_deg) {
    if (anchors.size() != bearings_deg.size()) {
        throw std::invalid_argument("anchor and bearing counts differ");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        const double t = deg_to_rad(bearings_deg[i]);
        const double dist =
            (p.x - anchors[i].x) * std::cos(t) - (p.y - anchors[i].y) * std::sin(t);
        sum += dist * dist;
    }
    return sum;
}

LocalizationResult triangulate(std::span<const AnchorObservation> observations) {
    const int n = static_cast<int>(observations.size());
    if (n < 2) throw std::invalid_argument("triangulation needs at least 2 anchors");
    std::vector<Position> anchors;
    std::vector<double> bearings;
    std::vector<int> ids;
    for (int i = 0; i < n; ++i) {
        const auto& o = observations[i];
        if (o.bearings_deg.size() != 1) {
            throw std::invalid_argument("triangulation expects exactly one bearing at anchor " +
                                        std::to_string(i));
        }
        anchors.push_back(o.position);
        bearings.push_back(o.bearings_deg[0]);
        ids.push_back(i);
    }
    if (all_coincident(anchors)) {
        throw GeometryError("all anchors share the same position", ids);
    }

    auto solved = solve_lines(anchors, bearings, ids);
    LocalizationResult out;
    for (int i = 0; i < n; ++i) solved.emitter.bearings.push_back({i, 0});
    out.singular_values = std::move(solved.singular_values);
    out.condition = out.singular_values.front() / out.singular_values.back();
    out.emitters.push_back(std::move(solved.emitter));
    out.estimated_count = 1;
    out.combinations = 1;
    return out;
}

LocalizationResult multi_device_localize(std::span<const AnchorObservation> observations,
                                         const MultiDeviceConfig& cfg) {
    const int n = static_cast<int>(observations.size());
    if (n < 3) throw std::invalid_argument("multi-device localization needs at least 3 anchors");
    int n_hat = 0;
    for (int i = 0; i < n; ++i) {
        if (observations[i].bearings_deg.empty()) {
            throw std::invalid_argument("anchor " + std::to_string(i) + " has no bearings");
        }
        n_hat = std::max(n_hat, observations[i].device_count());
    }
    std::vector<Position> all_anchors;
    for (const auto& o : observations) all_anchors.push_back(o.position);
    if (all_coincident(all_anchors)) {
        std::vector<int> ids(n);
        std::iota(ids.begin(), ids.end(), 0);
        throw GeometryError("all anchors share the same position", ids);
    }

    // Option -1 skips an anchor that saw fewer than n_hat bearings.
    std::vector<int> radix(n);
    double total = 1.0;
    for (int i = 0; i < n; ++i) {
        const int count = observations[i].device_count();
        radix[i] = count + (count < n_hat ? 1 : 0);
        total *= radix[i];
    }
    if (total > static_cast<double>(cfg.max_combinations)) {
        throw std::runtime_error("bearing combinations (" + std::to_string(total) +
                                 ") exceed the budget of " + std::to_string(cfg.max_combinations));
    }

    struct Candidate {
        std::size_t index;
        LineSolve solve;
    };
    std::vector<Candidate> candidates;
    std::vector<int> digit(n, 0);
    std::vector<Position> anchors;
    std::vector<double> bearings;
    std::vector<int> ids;
    std::size_t scored = 0;
    for (std::size_t index = 0; index < static_cast<std::size_t>(total); ++index) {
        anchors.clear();
        bearings.clear();
        ids.clear();
        for (int i = 0; i < n; ++i) {
            if (digit[i] >= observations[i].device_count()) continue;
            anchors.push_back(observations[i].position);
            bearings.push_back(observations[i].bearings_deg[digit[i]]);
            ids.push_back(i);
        }
        if (static_cast<int>(ids.size()) >= std::max(2, cfg.min_bearings) &&
            !all_coincident(anchors)) {
            ++scored;
            try {
                auto solve = solve_lines(anchors, bearings, ids);
                for (std::size_t k = 0; k < ids.size(); ++k) {
                    solve.emitter.bearings.push_back({ids[k], digit[ids[k]]});
                }
                candidates.push_back({index, std::move(solve)});
            } catch (const GeometryError&) {
                // Parallel selections cannot locate anything; leave them out.
            }
        }
        for (int i = 0; i < n; ++i) {
            if (++digit[i] < radix[i]) break;
            digit[i] = 0;
        }
    }

    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.solve.emitter.residual != b.solve.emitter.residual) {
            return a.solve.emitter.residual < b.solve.emitter.residual;
        }
        return a.index < b.index;
    });

    LocalizationResult out;
    out.estimated_count = n_hat;
    out.combinations = scored;
    std::set<std::pair<int, int>> used;
    for (auto& c : candidates) {
        if (static_cast<int>(out.emitters.size()) >= n_hat) break;
        const auto& refs = c.solve.emitter.bearings;
        const bool disjoint = std::none_of(refs.begin(), refs.end(), [&](const BearingRef& r) {
            return used.count({r.anchor, r.bearing}) > 0;
        });
        if (!disjoint) continue;
        for (const auto& r : refs) used.insert({r.anchor, r.bearing});
        if (out.emitters.empty()) {
            out.singular_values = c.solve.singular_values;
            out.condition = out.singular_values.front() / out.singular_values.back();
        }
        out.emitters.push_back(std::move(c.solve.emitter));
    }
    return out;
}

}  // namespace radar2
