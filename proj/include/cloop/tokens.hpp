#pragma once

#include "cloop/geometry.hpp"
#include "cloop/scenario.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace cloop {

constexpr double kTokenDt = 0.5;
constexpr int kStepsPerToken = 5;
/// Meters per radian used when comparing motions in (dx, dy, dheading).
constexpr double kHeadingWeight = 5.0;

struct MotionToken
{
    int index = 0;
    double dx = 0.0;
    double dy = 0.0;
    double dheading = 0.0;

    Delta2D delta() const { return {dx, dy, dheading}; }
    bool operator==(const MotionToken&) const = default;
};

/// Weighted squared distance between a motion and a token.
double motion_distance2(const Delta2D& motion, const MotionToken& token);

/// Fixed set of 0.5 s motion tokens. Index 0 is always the zero-motion token
/// and no two tokens share the same (dx, dy, dheading).
class TokenVocabulary
{
public:
    TokenVocabulary() = default;
    /// Validates indices (0..V-1 in order), uniqueness and the zero token.
    explicit TokenVocabulary(std::vector<MotionToken> tokens);

    std::size_t size() const { return tokens_.size(); }
    const MotionToken& operator[](std::size_t i) const { return tokens_.at(i); }
    const std::vector<MotionToken>& tokens() const { return tokens_; }

    int nearest(const Delta2D& motion) const;
    /// The k nearest tokens, closest first (ties by lowest index).
    std::vector<int> k_nearest(const Delta2D& motion, std::size_t k) const;
    /// 64-bit FNV-1a over the token table; identifies the vocabulary in model files.
    std::uint64_t hash() const;

    bool operator==(const TokenVocabulary&) const = default;

private:
    std::vector<MotionToken> tokens_;
};

std::string hash_hex(std::uint64_t h);

/// Agent-frame motion of every 0.5 s block of a 10 Hz trajectory.
std::vector<Delta2D> extract_segments(const Trajectory& traj);

struct KMeansOptions
{
    int iterations = 50;
    int restarts = 10; // best of this many k-means++ seedings
    bool parallel = true;
};

/// k-means over (dx, dy, kHeadingWeight*dheading) with k-means++ seeding,
/// keeping the restart with the lowest quantization error.
/// Returns centroids in the unweighted (dx, dy, dheading) space.
std::vector<Delta2D> kmeans_motions(const std::vector<Delta2D>& segments, int k, std::uint64_t seed,
                                    const KMeansOptions& options = {});

/// Summed weighted squared distance from every segment to its nearest centroid.
double quantization_error(const std::vector<Delta2D>& segments, const std::vector<Delta2D>& centroids);

/// Builds a vocabulary of `v` tokens by k-means over the corpus' 0.5 s
/// segments. A zero-motion token is inserted at index 0 when absent.
/// Throws if the corpus has fewer than `v` distinct segments.
TokenVocabulary build_vocabulary(const std::vector<Trajectory>& corpus, int v, std::uint64_t seed,
                                 const KMeansOptions& options = {});

struct TokenizedTrajectory
{
    std::vector<int> tokens;       // executed tokens (possibly perturbed)
    std::vector<int> targets;      // nearest token from the rollout state at each block
    std::vector<Pose2D> states;    // rollout pose at each block boundary, size tokens+1
    std::vector<double> residuals; // position error at each block end after executing the token
};

/// Matches a 10 Hz trajectory to tokens block by block. At each block the
/// displacement from the current rollout pose to the next ground-truth pose
/// is expressed in the rollout frame; the nearest token is taken
/// (noise_top_k <= 1) or one of the noise_top_k nearest uniformly at random,
/// and the rollout continues from the resulting pose.
/// Requires (traj.size() - 1) to be a multiple of 5.
TokenizedTrajectory tokenize_trajectory(const Trajectory& traj, const TokenVocabulary& vocab, int noise_top_k,
                                        std::uint64_t seed);

/// Five poses at 0.1 s spacing: linear interpolation of the token motion in
/// the start frame; the last pose is exactly compose(start, token).
std::array<Pose2D, kStepsPerToken> upsample_tokens(const Pose2D& start, const MotionToken& token);

/// Rebuilds a 10 Hz pose sequence from a start pose and tokens.
std::vector<Pose2D> reconstruct(const Pose2D& start, const std::vector<int>& tokens, const TokenVocabulary& vocab);

} // namespace cloop
