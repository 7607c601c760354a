#pragma once

#include "cloop/lane_graph.hpp"
#include "cloop/tokens.hpp"
#include "cloop/world.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cloop {

// Context features of one agent, in this order.
enum Feature : std::size_t {
    kSpeed,
    kSpeedChange1s,
    kMeanSpeed1s,
    kLaneLateral,
    kLaneHeadingError,
    kCurvatureAhead,
    kFrontGap,
    kFrontClosing,
    kFrontLateral,
    kLeftDistance,
    kRightDistance,
    kInPathGap,
    kInPathProximity,
    kInPathClosing,
    kInPathBrake,
    kLaneEndDistance,
    kLaneEndProximity,
    kHasLeftLane,
    kHasRightLane,
    kSpeedLimit,
    kSpeedDeficit,
    kFeatureDim
};

constexpr double kSectorRange = 50.0;
constexpr double kSectorHalfAngle = 30.0 * std::numbers::pi / 180.0;
constexpr double kLaneEndRange = 100.0;

struct ContextFeatures
{
    std::array<double, kFeatureDim> values{};
    int prev_token = 0;
};

/// Features of `agent_id` in `world`. The previous token is the nearest
/// token to the agent's motion over the last 0.5 s (history padded by
/// repeating the oldest state).
ContextFeatures extract_features(const WorldState& world, int agent_id, const LaneGraph& graph,
                                 const TokenVocabulary& vocab);

enum class Optimizer { sgd, adam };

std::string to_string(Optimizer o);
Optimizer optimizer_from_string(const std::string& s);

struct TrainingHyperparameters
{
    double learning_rate = 0.5;
    int epochs = 30;
    int batch_size = 64;
    std::uint64_t seed = 0;
    /// Plain steps, or Adam (beta 0.9/0.999) which moves rarely seen tokens
    /// much faster at the same learning rate.
    Optimizer optimizer = Optimizer::sgd;
    bool operator==(const TrainingHyperparameters&) const = default;
};

/// Motion descriptor of a token: dx, dy, dheading and their squares,
/// standardized over the vocabulary.
constexpr std::size_t kTokenDescDim = 6;

/// Linear-plus-bigram categorical next-token model with a term shared
/// across tokens through their motion descriptors:
/// logits[k] = W[k] z + b[k] + B[prev][k] + desc[k] S z, z = standardize(features).
struct TokenPolicyModel
{
    std::size_t vocab_size = 0;
    std::uint64_t vocab_hash = 0;
    std::vector<double> weights;    // vocab_size x kFeatureDim, row-major
    std::vector<double> bias;       // vocab_size
    std::vector<double> transition; // vocab_size x vocab_size, row = previous token
    std::vector<double> token_desc; // vocab_size x kTokenDescDim, derived from the vocabulary
    std::vector<double> shared;     // kTokenDescDim x kFeatureDim
    std::array<double, kFeatureDim> feature_mean{};
    std::array<double, kFeatureDim> feature_scale{};
    TrainingHyperparameters hyper;

    /// Zero weights, identity standardization.
    static TokenPolicyModel zeros(const TokenVocabulary& vocab);

    std::array<double, kFeatureDim> standardize(const std::array<double, kFeatureDim>& raw) const;
    void logits(const ContextFeatures& f, std::span<double> out) const;
    bool operator==(const TokenPolicyModel&) const = default;
};

/// Argmax of the logits; ties go to the lowest index.
int argmax_token(std::span<const double> logits);

struct DecodeOptions
{
    bool sample = false; // stochastic decoding, off by default
    double temperature = 1.0;
};

int decode_features(const ContextFeatures& f, const TokenPolicyModel& model, const DecodeOptions& options = {},
                    std::mt19937_64* rng = nullptr);

/// One decoding step for `agent_id`: argmax token under the model.
MotionToken decode_step(const WorldState& world, int agent_id, const TokenPolicyModel& model,
                        const TokenVocabulary& vocab, const LaneGraph& graph, const DecodeOptions& options = {},
                        std::mt19937_64* rng = nullptr);

struct TrainingSample
{
    ContextFeatures features;
    int target = 0;
};

struct TrainingCorpus
{
    std::uint64_t vocab_hash = 0;
    std::size_t vocab_size = 0;
    std::vector<TrainingSample> samples;
};

/// Teacher-forced samples from scenarios with logged futures. Each logged
/// agent is tokenized with top-k noise; its own state follows the token
/// rollout while every other agent stays on its log. The target is the
/// nearest token from the rollout state to the next logged pose.
TrainingCorpus build_training_corpus(const std::vector<Scenario>& scenarios, const TokenVocabulary& vocab,
                                     int noise_top_k, std::uint64_t seed);

/// Per-feature mean and standard deviation (1 where degenerate).
void fit_standardization(TokenPolicyModel& model, const TrainingCorpus& corpus);

double mean_cross_entropy(const TokenPolicyModel& model, const TrainingCorpus& corpus);

struct TrainResult
{
    TokenPolicyModel model;
    /// Entry 0 is the loss of the input model; entry e the loss after epoch e.
    std::vector<double> loss_curve;
};

/// Mini-batch gradient descent on the mean cross-entropy of the target
/// token with seeded shuffling. Throws on vocabulary mismatch.
TrainResult train(const TokenPolicyModel& model, const TrainingCorpus& corpus, const TrainingHyperparameters& hyper);

void save_model(const TokenPolicyModel& model, const std::string& path);
/// Refuses to load when the stored vocabulary hash differs from `vocab`.
TokenPolicyModel load_model(const std::string& path, const TokenVocabulary& vocab);
void save_vocabulary(const TokenVocabulary& vocab, const std::string& path);
TokenVocabulary load_vocabulary(const std::string& path);

} // namespace cloop
