#include "cloop/tokens.hpp"

#include "cloop/error.hpp"
#include "cloop/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

namespace cloop {

double motion_distance2(const Delta2D& motion, const MotionToken& token)
{
    const double ex = motion.dx - token.dx;
    const double ey = motion.dy - token.dy;
    const double eh = kHeadingWeight * normalize_angle(motion.dheading - token.dheading);
    return ex * ex + ey * ey + eh * eh;
}

TokenVocabulary::TokenVocabulary(std::vector<MotionToken> tokens) : tokens_(std::move(tokens))
{
    if (tokens_.empty()) throw Error("vocabulary is empty");
    std::set<std::tuple<double, double, double>> seen;
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        const auto& t = tokens_[i];
        if (t.index != static_cast<int>(i)) throw Error("vocabulary token indices must be 0..V-1 in order");
        if (!std::isfinite(t.dx) || !std::isfinite(t.dy) || !std::isfinite(t.dheading))
            throw Error("vocabulary token " + std::to_string(i) + " is not finite");
        if (!seen.emplace(t.dx, t.dy, t.dheading).second)
            throw Error("vocabulary token " + std::to_string(i) + " duplicates another token");
    }
    const auto& z = tokens_.front();
    if (z.dx != 0.0 || z.dy != 0.0 || z.dheading != 0.0) throw Error("vocabulary token 0 must be the zero motion");
}

int TokenVocabulary::nearest(const Delta2D& motion) const
{
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& t : tokens_) {
        const double d = motion_distance2(motion, t);
        if (d < best_d) {
            best_d = d;
            best = t.index;
        }
    }
    return best;
}

std::vector<int> TokenVocabulary::k_nearest(const Delta2D& motion, std::size_t k) const
{
    std::vector<std::pair<double, int>> ranked;
    ranked.reserve(tokens_.size());
    for (const auto& t : tokens_) ranked.emplace_back(motion_distance2(motion, t), t.index);
    k = std::min(k, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end());
    std::vector<int> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = ranked[i].second;
    return out;
}

std::uint64_t TokenVocabulary::hash() const
{
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t word) {
        for (int i = 0; i < 8; ++i) {
            h ^= (word >> (8 * i)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    for (const auto& t : tokens_) {
        mix(static_cast<std::uint64_t>(t.index));
        mix(std::bit_cast<std::uint64_t>(t.dx));
        mix(std::bit_cast<std::uint64_t>(t.dy));
        mix(std::bit_cast<std::uint64_t>(t.dheading));
    }
    return h;
}

std::string hash_hex(std::uint64_t h)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<Delta2D> extract_segments(const Trajectory& traj)
{
    std::vector<Delta2D> out;
    for (std::size_t k = 0; k + kStepsPerToken < traj.size(); k += kStepsPerToken)
        out.push_back(relative(traj[k].pose, traj[k + kStepsPerToken].pose));
    return out;
}

namespace {

using kernels::Point3;

Point3 embed(const Delta2D& d) { return {d.dx, d.dy, kHeadingWeight * d.dheading}; }
Delta2D unembed(const Point3& p) { return {p[0], p[1], p[2] / kHeadingWeight}; }

std::vector<Point3> seed_plus_plus(const std::vector<Point3>& pts, int k, std::mt19937_64& rng)
{
    std::vector<Point3> centers;
    std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
    centers.push_back(pts[pick(rng)]);
    std::vector<double> d2(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = kernels::squared_distance(pts[i], centers[0]);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (static_cast<int>(centers.size()) < k) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t chosen = 0;
        if (total > 0.0) {
            double r = unit(rng) * total;
            chosen = pts.size() - 1;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                r -= d2[i];
                if (r < 0.0 && d2[i] > 0.0) {
                    chosen = i;
                    break;
                }
            }
            while (d2[chosen] == 0.0 && chosen > 0) --chosen;
        }
        centers.push_back(pts[chosen]);
        for (std::size_t i = 0; i < pts.size(); ++i)
            d2[i] = std::min(d2[i], kernels::squared_distance(pts[i], centers.back()));
    }
    return centers;
}

} // namespace

std::vector<Delta2D> kmeans_motions(const std::vector<Delta2D>& segments, int k, std::uint64_t seed,
                                    const KMeansOptions& options)
{
    if (k < 1) throw Error("k-means needs k >= 1");
    std::vector<Point3> pts(segments.size());
    std::transform(segments.begin(), segments.end(), pts.begin(), embed);
    std::set<Point3> distinct(pts.begin(), pts.end());
    if (static_cast<int>(distinct.size()) < k)
        throw Error("corpus too small: " + std::to_string(distinct.size()) + " distinct segments for " +
                    std::to_string(k) + " tokens");

    if (options.restarts < 1) throw Error("k-means needs restarts >= 1");
    auto assign = options.parallel ? kernels::assign_nearest_omp : kernels::assign_nearest_serial;
    std::mt19937_64 rng(seed);
    std::vector<Point3> best;
    double best_err = std::numeric_limits<double>::infinity();
    std::vector<int> labels(pts.size(), -1);
    for (int r = 0; r < options.restarts; ++r) {
        std::vector<Point3> centers = seed_plus_plus(pts, k, rng);

        for (int iter = 0; iter < options.iterations; ++iter) {
            assign(pts, centers, labels);
            std::vector<Point3> sums(static_cast<std::size_t>(k), Point3{0, 0, 0});
            std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
            for (std::size_t i = 0; i < pts.size(); ++i) {
                auto& s = sums[static_cast<std::size_t>(labels[i])];
                for (int d = 0; d < 3; ++d) s[d] += pts[i][d];
                ++counts[static_cast<std::size_t>(labels[i])];
            }
            bool changed = false;
            for (std::size_t c = 0; c < sums.size(); ++c) {
                Point3 next = centers[c];
                if (counts[c] > 0) {
                    for (int d = 0; d < 3; ++d) next[d] = sums[c][d] / static_cast<double>(counts[c]);
                } else {
                    // Re-seed an empty cluster at the worst-served point.
                    std::size_t worst = 0;
                    double worst_d = -1.0;
                    for (std::size_t i = 0; i < pts.size(); ++i) {
                        const double d = kernels::squared_distance(pts[i], centers[static_cast<std::size_t>(labels[i])]);
                        if (d > worst_d) {
                            worst_d = d;
                            worst = i;
                        }
                    }
                    next = pts[worst];
                    labels[worst] = static_cast<int>(c);
                }
                changed = changed || next != centers[c];
                centers[c] = next;
            }
            if (!changed) break;
        }
        const double err = assign(pts, centers, labels);
        if (err < best_err) {
            best_err = err;
            best = centers;
        }
    }

    std::vector<Delta2D> out(best.size());
    std::transform(best.begin(), best.end(), out.begin(), unembed);
    return out;
}

double quantization_error(const std::vector<Delta2D>& segments, const std::vector<Delta2D>& centroids)
{
    std::vector<Point3> pts(segments.size());
    std::transform(segments.begin(), segments.end(), pts.begin(), embed);
    std::vector<Point3> cs(centroids.size());
    std::transform(centroids.begin(), centroids.end(), cs.begin(), embed);
    std::vector<int> labels(pts.size());
    return kernels::assign_nearest_serial(pts, cs, labels);
}

TokenVocabulary build_vocabulary(const std::vector<Trajectory>& corpus, int v, std::uint64_t seed,
                                 const KMeansOptions& options)
{
    std::vector<Delta2D> segments;
    for (const auto& traj : corpus) {
        auto segs = extract_segments(traj);
        segments.insert(segments.end(), segs.begin(), segs.end());
    }
    if (segments.empty()) throw Error("corpus too small: no 0.5 s segments");
    const auto centroids = kmeans_motions(segments, v, seed, options);

    std::set<std::tuple<double, double, double>> unique;
    for (const auto& c : centroids) unique.emplace(c.dx, c.dy, c.dheading);
    unique.emplace(0.0, 0.0, 0.0);

    std::vector<MotionToken> tokens{{0, 0.0, 0.0, 0.0}};
    for (const auto& [dx, dy, dh] : unique) {
        if (dx == 0.0 && dy == 0.0 && dh == 0.0) continue;
        tokens.push_back({static_cast<int>(tokens.size()), dx, dy, dh});
    }
    return TokenVocabulary(std::move(tokens));
}

TokenizedTrajectory tokenize_trajectory(const Trajectory& traj, const TokenVocabulary& vocab, int noise_top_k,
                                        std::uint64_t seed)
{
    if (traj.empty() || (traj.size() - 1) % kStepsPerToken != 0)
        throw Error("trajectory length must be 1 + a multiple of 5 samples");
    std::mt19937_64 rng(seed);
    TokenizedTrajectory out;
    Pose2D state = traj.front().pose;
    out.states.push_back(state);
    const std::size_t k = static_cast<std::size_t>(std::max(1, noise_top_k));
    for (std::size_t i = kStepsPerToken; i < traj.size(); i += kStepsPerToken) {
        const Pose2D& target = traj[i].pose;
        const Delta2D motion = relative(state, target);
        const std::vector<int> ranked = vocab.k_nearest(motion, k);
        int chosen = ranked.front();
        if (ranked.size() > 1) {
            std::uniform_int_distribution<std::size_t> pick(0, ranked.size() - 1);
            chosen = ranked[pick(rng)];
        }
        state = compose(state, vocab[static_cast<std::size_t>(chosen)].delta());
        out.tokens.push_back(chosen);
        out.targets.push_back(ranked.front());
        out.states.push_back(state);
        out.residuals.push_back(distance(state.position(), target.position()));
    }
    return out;
}

std::array<Pose2D, kStepsPerToken> upsample_tokens(const Pose2D& start, const MotionToken& token)
{
    std::array<Pose2D, kStepsPerToken> out;
    for (int i = 1; i <= kStepsPerToken; ++i) {
        const double f = static_cast<double>(i) / kStepsPerToken;
        out[static_cast<std::size_t>(i - 1)] = compose(start, {f * token.dx, f * token.dy, f * token.dheading});
    }
    return out;
}

std::vector<Pose2D> reconstruct(const Pose2D& start, const std::vector<int>& tokens, const TokenVocabulary& vocab)
{
    std::vector<Pose2D> out{start};
    for (int t : tokens) {
        const auto block = upsample_tokens(out.back(), vocab[static_cast<std::size_t>(t)]);
        out.insert(out.end(), block.begin(), block.end());
    }
    return out;
}

} // namespace cloop
