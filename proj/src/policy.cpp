#include "cloop/policy.hpp"

#include "cloop/error.hpp"
#include "cloop/idm.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace cloop {

namespace {

std::optional<LanePosition> nearest_lane(const LaneGraph& graph, const Pose2D& pose)
{
    if (auto pos = graph.locate(pose)) return pos;
    std::optional<LanePosition> best;
    for (const auto& [id, lane] : graph.lanes()) {
        const CenterlineProjection p = project_to_centerline(pose, lane);
        if (std::abs(p.heading_error) >= std::numbers::pi / 2) continue;
        if (!best || std::abs(p.lateral_offset) < std::abs(best->lateral_offset))
            best = LanePosition{id, p.arc_length, p.lateral_offset, p.heading_error};
    }
    return best;
}

double distance_to_lane_end(const LaneGraph& graph, const LanePosition& pos)
{
    const Lane* lane = &graph.lane(pos.lane_id);
    double dist = lane->length() - pos.arc_length;
    while (dist < kLaneEndRange && !lane->successors().empty()) {
        lane = &graph.lane(lane->successors().front());
        dist += lane->length();
    }
    return std::clamp(dist, 0.0, kLaneEndRange);
}

} // namespace

ContextFeatures extract_features(const WorldState& world, int agent_id, const LaneGraph& graph,
                                 const TokenVocabulary& vocab)
{
    const AgentState* self = world.find(agent_id);
    if (!self) throw Error("no agent with id " + std::to_string(agent_id) + " in world");
    ContextFeatures out;
    auto& f = out.values;

    const AgentState* older = world.past(agent_id, WorldState::kHistoryLength);
    const AgentState* token_ago = world.past(agent_id, kStepsPerToken);
    out.prev_token = vocab.nearest(relative(token_ago->pose, self->pose));

    f[kSpeed] = self->speed;
    f[kSpeedChange1s] = self->speed - older->speed;
    // Finer than the token grid: two tokens of history averaged.
    f[kMeanSpeed1s] = distance(self->pose.position(), older->pose.position()) /
                      (static_cast<double>(WorldState::kHistoryLength) * kTokenDt / kStepsPerToken);

    double lane_width = 3.5;
    double speed_limit = 15.0;
    f[kLaneEndDistance] = kLaneEndRange;
    if (auto pos = nearest_lane(graph, self->pose)) {
        const Lane& lane = graph.lane(pos->lane_id);
        lane_width = lane.width();
        speed_limit = lane.speed_limit();
        f[kLaneLateral] = pos->lateral_offset;
        f[kLaneHeadingError] = pos->heading_error;
        f[kCurvatureAhead] = lane.centerline().curvature_at(pos->arc_length + 10.0);
        f[kLaneEndDistance] = distance_to_lane_end(graph, *pos);
        f[kHasLeftLane] = lane.left_neighbor() ? 1.0 : 0.0;
        f[kHasRightLane] = lane.right_neighbor() ? 1.0 : 0.0;
    }
    f[kLaneEndProximity] = std::max(0.0, 1.0 - f[kLaneEndDistance] / 80.0);
    f[kSpeedLimit] = speed_limit;
    f[kSpeedDeficit] = speed_limit - self->speed;

    double front_dist = kSectorRange;
    f[kFrontGap] = kSectorRange;
    f[kFrontClosing] = 0.0;
    f[kFrontLateral] = 10.0;
    f[kLeftDistance] = kSectorRange;
    f[kRightDistance] = kSectorRange;
    f[kInPathGap] = kSectorRange;
    f[kInPathClosing] = 0.0;
    double in_path_x = kSectorRange + 1.0;

    auto visit = [&](const AgentState& other) {
        if (other.id == agent_id) return;
        const Vec2 local = to_local(self->pose, other.pose.position());
        const double dist = local.norm();
        const double angle = std::atan2(local.y, local.x);
        const double along = other.speed * std::cos(other.pose.heading() - self->pose.heading());
        const double bumper = std::max(0.0, local.x - 0.5 * (self->length + other.length));
        if (dist <= kSectorRange) {
            if (std::abs(angle) <= kSectorHalfAngle) {
                if (dist < front_dist) {
                    front_dist = dist;
                    f[kFrontGap] = std::min(kSectorRange, bumper);
                    f[kFrontClosing] = self->speed - along;
                    f[kFrontLateral] = std::abs(local.y);
                }
            } else if (angle > 0.0 && angle <= std::numbers::pi - kSectorHalfAngle) {
                f[kLeftDistance] = std::min(f[kLeftDistance], dist);
            } else if (angle < 0.0 && angle >= -(std::numbers::pi - kSectorHalfAngle)) {
                f[kRightDistance] = std::min(f[kRightDistance], dist);
            }
        }
        const bool intrudes = std::abs(local.y) - 0.5 * other.width < 0.5 * lane_width;
        if (local.x > 0.0 && local.x <= kSectorRange && intrudes && local.x < in_path_x) {
            in_path_x = local.x;
            f[kInPathGap] = std::min(kSectorRange, bumper);
            f[kInPathClosing] = self->speed - along;
        }
    };
    visit(world.ego);
    for (const auto& a : world.agents) visit(a);
    f[kInPathProximity] = std::max(0.0, 1.0 - f[kInPathGap] / 30.0);
    // IDM interaction term (desired gap over actual gap, squared) with the
    // default parameters; linear in the braking an expert would apply.
    if (in_path_x <= kSectorRange) {
        const IdmParams p;
        const double desired = p.min_gap + std::max(0.0, self->speed * p.time_headway +
                                                              self->speed * f[kInPathClosing] / (2.0 * std::sqrt(p.a_max * p.b)));
        const double ratio = desired / std::max(f[kInPathGap], 0.5);
        f[kInPathBrake] = std::min(10.0, ratio * ratio);
    }
    return out;
}

std::string to_string(Optimizer o)
{
    return o == Optimizer::adam ? "adam" : "sgd";
}

Optimizer optimizer_from_string(const std::string& s)
{
    if (s == "sgd") return Optimizer::sgd;
    if (s == "adam") return Optimizer::adam;
    throw Error("unknown optimizer '" + s + "'");
}

namespace {

std::vector<double> token_descriptors(const TokenVocabulary& vocab)
{
    const std::size_t n = vocab.size();
    std::vector<double> d(n * kTokenDescDim);
    for (std::size_t k = 0; k < n; ++k) {
        const MotionToken& t = vocab[k];
        const double raw[kTokenDescDim] = {t.dx, t.dy, t.dheading, t.dx * t.dx, t.dy * t.dy, t.dheading * t.dheading};
        std::copy(raw, raw + kTokenDescDim, d.begin() + static_cast<std::ptrdiff_t>(k * kTokenDescDim));
    }
    for (std::size_t c = 0; c < kTokenDescDim; ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t k = 0; k < n; ++k) mean += d[k * kTokenDescDim + c];
        mean /= static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) var += (d[k * kTokenDescDim + c] - mean) * (d[k * kTokenDescDim + c] - mean);
        const double sd = std::sqrt(var / static_cast<double>(n));
        for (std::size_t k = 0; k < n; ++k)
            d[k * kTokenDescDim + c] = sd > 1e-12 ? (d[k * kTokenDescDim + c] - mean) / sd : 0.0;
    }
    return d;
}

} // namespace

TokenPolicyModel TokenPolicyModel::zeros(const TokenVocabulary& vocab)
{
    TokenPolicyModel m;
    m.vocab_size = vocab.size();
    m.vocab_hash = vocab.hash();
    m.weights.assign(m.vocab_size * kFeatureDim, 0.0);
    m.bias.assign(m.vocab_size, 0.0);
    m.transition.assign(m.vocab_size * m.vocab_size, 0.0);
    m.token_desc = token_descriptors(vocab);
    m.shared.assign(kTokenDescDim * kFeatureDim, 0.0);
    m.feature_mean.fill(0.0);
    m.feature_scale.fill(1.0);
    return m;
}

std::array<double, kFeatureDim> TokenPolicyModel::standardize(const std::array<double, kFeatureDim>& raw) const
{
    std::array<double, kFeatureDim> z{};
    for (std::size_t i = 0; i < kFeatureDim; ++i) z[i] = (raw[i] - feature_mean[i]) / feature_scale[i];
    return z;
}

namespace {

void logits_from_standardized(const TokenPolicyModel& m, const std::array<double, kFeatureDim>& z, int prev,
                              std::span<double> out)
{
    const double* trans = m.transition.data() + static_cast<std::size_t>(prev) * m.vocab_size;
    std::array<double, kTokenDescDim> u{};
    for (std::size_t c = 0; c < kTokenDescDim; ++c)
        for (std::size_t j = 0; j < kFeatureDim; ++j) u[c] += m.shared[c * kFeatureDim + j] * z[j];
    for (std::size_t k = 0; k < m.vocab_size; ++k) {
        const double* w = m.weights.data() + k * kFeatureDim;
        const double* d = m.token_desc.data() + k * kTokenDescDim;
        double acc = m.bias[k] + trans[k];
        for (std::size_t j = 0; j < kFeatureDim; ++j) acc += w[j] * z[j];
        for (std::size_t c = 0; c < kTokenDescDim; ++c) acc += d[c] * u[c];
        out[k] = acc;
    }
}

// Cross-entropy of `target`; leaves softmax probabilities in `logits`.
double softmax_loss(std::span<double> logits, int target)
{
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& l : logits) {
        l = std::exp(l - mx);
        sum += l;
    }
    for (double& l : logits) l /= sum;
    return -std::log(std::max(logits[static_cast<std::size_t>(target)], 1e-300));
}

} // namespace

void TokenPolicyModel::logits(const ContextFeatures& f, std::span<double> out) const
{
    if (out.size() != vocab_size) throw Error("logit buffer size mismatch");
    if (f.prev_token < 0 || static_cast<std::size_t>(f.prev_token) >= vocab_size)
        throw Error("previous token out of range");
    logits_from_standardized(*this, standardize(f.values), f.prev_token, out);
}

int argmax_token(std::span<const double> logits)
{
    int best = 0;
    for (std::size_t k = 1; k < logits.size(); ++k)
        if (logits[k] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
    return best;
}

int decode_features(const ContextFeatures& f, const TokenPolicyModel& model, const DecodeOptions& options,
                    std::mt19937_64* rng)
{
    std::vector<double> l(model.vocab_size);
    model.logits(f, l);
    if (!options.sample) return argmax_token(l);
    if (!rng) throw Error("sampling decode requires a random generator");
    const double t = std::max(options.temperature, 1e-6);
    const double mx = *std::max_element(l.begin(), l.end());
    std::vector<double> w(l.size());
    std::transform(l.begin(), l.end(), w.begin(), [&](double x) { return std::exp((x - mx) / t); });
    std::discrete_distribution<int> dist(w.begin(), w.end());
    return dist(*rng);
}

MotionToken decode_step(const WorldState& world, int agent_id, const TokenPolicyModel& model,
                        const TokenVocabulary& vocab, const LaneGraph& graph, const DecodeOptions& options,
                        std::mt19937_64* rng)
{
    if (model.vocab_hash != vocab.hash() || model.vocab_size != vocab.size())
        throw Error("model was trained with a different vocabulary");
    const ContextFeatures f = extract_features(world, agent_id, graph, vocab);
    return vocab[static_cast<std::size_t>(decode_features(f, model, options, rng))];
}

namespace {

std::uint64_t splitmix(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t string_hash(const std::string& s)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

AgentState logged_state(const AgentState& base, const TrajectorySample& s, double dt, const TrajectorySample* prev)
{
    AgentState a = base;
    a.pose = s.pose;
    a.speed = s.speed;
    a.acceleration = prev ? (s.speed - prev->speed) / dt : base.acceleration;
    return a;
}

WorldSnapshot logged_snapshot(const Scenario& scn, std::size_t k)
{
    WorldSnapshot snap;
    auto state_at = [&](const AgentState& base) {
        const Trajectory* log = scn.logged(base.id);
        if (!log) return base;
        const std::size_t i = std::min(k, log->size() - 1);
        return logged_state(base, (*log)[i], scn.dt, i > 0 ? &(*log)[i - 1] : nullptr);
    };
    snap.ego = state_at(scn.ego);
    for (const auto& a : scn.agents) snap.agents.push_back(state_at(a));
    return snap;
}

void replace_in(WorldSnapshot& snap, const AgentState& s)
{
    if (snap.ego.id == s.id) snap.ego = s;
    for (auto& a : snap.agents)
        if (a.id == s.id) a = s;
}

} // namespace

TrainingCorpus build_training_corpus(const std::vector<Scenario>& scenarios, const TokenVocabulary& vocab,
                                     int noise_top_k, std::uint64_t seed)
{
    TrainingCorpus corpus;
    corpus.vocab_hash = vocab.hash();
    corpus.vocab_size = vocab.size();
    for (const Scenario& scn : scenarios) {
        std::vector<AgentState> bodies{scn.ego};
        bodies.insert(bodies.end(), scn.agents.begin(), scn.agents.end());
        for (const AgentState& body : bodies) {
            if (body.kind == AgentKind::static_object) continue;
            const Trajectory* log = scn.logged(body.id);
            if (!log || log->size() < 1 + kStepsPerToken) continue;
            const std::size_t blocks = (log->size() - 1) / kStepsPerToken;
            const Trajectory traj(log->begin(), log->begin() + static_cast<std::ptrdiff_t>(blocks * kStepsPerToken + 1));
            const std::uint64_t agent_seed =
                splitmix(seed ^ splitmix(string_hash(scn.id) ^ static_cast<std::uint64_t>(body.id)));
            const TokenizedTrajectory tok = tokenize_trajectory(traj, vocab, noise_top_k, agent_seed);
            const std::vector<Pose2D> recon = reconstruct(traj.front().pose, tok.tokens, vocab);

            auto self_at = [&](std::size_t k) {
                AgentState a = body;
                a.pose = recon[k];
                a.speed = k == 0 ? traj.front().speed : distance(recon[k].position(), recon[k - 1].position()) / scn.dt;
                return a;
            };

            for (std::size_t j = 0; j < blocks; ++j) {
                const std::size_t k = j * kStepsPerToken;
                WorldState world;
                world.step_index = static_cast<int>(k);
                world.sim_time = static_cast<double>(k) * scn.dt;
                const std::size_t first = k >= WorldState::kHistoryLength ? k - WorldState::kHistoryLength : 0;
                for (std::size_t m = first; m < k; ++m) {
                    WorldSnapshot snap = logged_snapshot(scn, m);
                    replace_in(snap, self_at(m));
                    world.history.push_back(std::move(snap));
                }
                WorldSnapshot now = logged_snapshot(scn, k);
                replace_in(now, self_at(k));
                world.ego = now.ego;
                world.agents = std::move(now.agents);
                corpus.samples.push_back({extract_features(world, body.id, *scn.lane_graph, vocab), tok.targets[j]});
            }
        }
    }
    return corpus;
}

void fit_standardization(TokenPolicyModel& model, const TrainingCorpus& corpus)
{
    model.feature_mean.fill(0.0);
    model.feature_scale.fill(1.0);
    if (corpus.samples.empty()) return;
    const double n = static_cast<double>(corpus.samples.size());
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
        double mean = 0.0;
        for (const auto& s : corpus.samples) mean += s.features.values[j];
        mean /= n;
        double var = 0.0;
        for (const auto& s : corpus.samples) var += (s.features.values[j] - mean) * (s.features.values[j] - mean);
        const double sd = std::sqrt(var / n);
        model.feature_mean[j] = mean;
        model.feature_scale[j] = sd > 1e-9 ? sd : 1.0;
    }
}

namespace {

void check_compatible(const TokenPolicyModel& model, const TrainingCorpus& corpus)
{
    if (model.vocab_hash != corpus.vocab_hash || model.vocab_size != corpus.vocab_size)
        throw Error("vocabulary mismatch between model and training corpus");
    for (const auto& s : corpus.samples) {
        if (s.target < 0 || static_cast<std::size_t>(s.target) >= model.vocab_size ||
            s.features.prev_token < 0 || static_cast<std::size_t>(s.features.prev_token) >= model.vocab_size)
            throw Error("vocabulary mismatch: token index out of range");
    }
}

} // namespace

double mean_cross_entropy(const TokenPolicyModel& model, const TrainingCorpus& corpus)
{
    check_compatible(model, corpus);
    if (corpus.samples.empty()) return 0.0;
    std::vector<double> l(model.vocab_size);
    double total = 0.0;
    for (const auto& s : corpus.samples) {
        model.logits(s.features, l);
        total += softmax_loss(l, s.target);
    }
    return total / static_cast<double>(corpus.samples.size());
}

TrainResult train(const TokenPolicyModel& initial, const TrainingCorpus& corpus, const TrainingHyperparameters& hyper)
{
    check_compatible(initial, corpus);
    if (hyper.batch_size < 1 || hyper.epochs < 0 || !(hyper.learning_rate > 0.0))
        throw Error("invalid training hyperparameters");
    TrainResult result{initial, {}};
    TokenPolicyModel& m = result.model;
    m.hyper = hyper;
    const std::size_t V = m.vocab_size;

    std::vector<std::array<double, kFeatureDim>> z(corpus.samples.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = m.standardize(corpus.samples[i].features.values);

    result.loss_curve.push_back(mean_cross_entropy(m, corpus));
    std::vector<std::size_t> order(corpus.samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(hyper.seed);

    std::vector<double> gw(V * kFeatureDim), gb(V), gt(V * V), gs(kTokenDescDim * kFeatureDim), p(V);
    std::vector<int> touched_rows;
    const bool adam = hyper.optimizer == Optimizer::adam;
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    std::vector<double> mw, vw, mb, vb, mt, vt, ms, vs;
    if (adam) {
        ms.assign(gs.size(), 0.0);
        vs.assign(gs.size(), 0.0);
        mw.assign(gw.size(), 0.0);
        vw.assign(gw.size(), 0.0);
        mb.assign(V, 0.0);
        vb.assign(V, 0.0);
        mt.assign(V * V, 0.0);
        vt.assign(V * V, 0.0);
        std::fill(gt.begin(), gt.end(), 0.0);
    }
    long long t_step = 0;
    auto adam_update = [&](double* param, const double* g, double* m1, double* m2, std::size_t n, double scale,
                           double lr_t) {
        for (std::size_t k = 0; k < n; ++k) {
            const double gk = g[k] * scale;
            m1[k] = kBeta1 * m1[k] + (1.0 - kBeta1) * gk;
            m2[k] = kBeta2 * m2[k] + (1.0 - kBeta2) * gk * gk;
            param[k] -= lr_t * m1[k] / (std::sqrt(m2[k]) + kEps);
        }
    };
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hyper.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hyper.batch_size));
            std::fill(gw.begin(), gw.end(), 0.0);
            std::fill(gb.begin(), gb.end(), 0.0);
            std::fill(gs.begin(), gs.end(), 0.0);
            touched_rows.clear();
            for (std::size_t b = start; b < end; ++b) {
                const std::size_t i = order[b];
                const auto& s = corpus.samples[i];
                const int prev = s.features.prev_token;
                logits_from_standardized(m, z[i], prev, p);
                softmax_loss(p, s.target);
                p[static_cast<std::size_t>(s.target)] -= 1.0;
                if (std::find(touched_rows.begin(), touched_rows.end(), prev) == touched_rows.end()) {
                    touched_rows.push_back(prev);
                    std::fill_n(gt.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(prev) * V), V, 0.0);
                }
                double* grow = gt.data() + static_cast<std::size_t>(prev) * V;
                std::array<double, kTokenDescDim> q{};
                for (std::size_t k = 0; k < V; ++k) {
                    const double g = p[k];
                    gb[k] += g;
                    grow[k] += g;
                    double* w = gw.data() + k * kFeatureDim;
                    for (std::size_t j = 0; j < kFeatureDim; ++j) w[j] += g * z[i][j];
                    for (std::size_t c = 0; c < kTokenDescDim; ++c) q[c] += g * m.token_desc[k * kTokenDescDim + c];
                }
                for (std::size_t c = 0; c < kTokenDescDim; ++c)
                    for (std::size_t j = 0; j < kFeatureDim; ++j) gs[c * kFeatureDim + j] += q[c] * z[i][j];
            }
            const double inv_n = 1.0 / static_cast<double>(end - start);
            if (adam) {
                ++t_step;
                const double lr_t = hyper.learning_rate * std::sqrt(1.0 - std::pow(kBeta2, static_cast<double>(t_step))) /
                                    (1.0 - std::pow(kBeta1, static_cast<double>(t_step)));
                adam_update(m.weights.data(), gw.data(), mw.data(), vw.data(), gw.size(), inv_n, lr_t);
                adam_update(m.bias.data(), gb.data(), mb.data(), vb.data(), V, inv_n, lr_t);
                adam_update(m.transition.data(), gt.data(), mt.data(), vt.data(), V * V, inv_n, lr_t);
                adam_update(m.shared.data(), gs.data(), ms.data(), vs.data(), gs.size(), inv_n, lr_t);
                for (int row : touched_rows)
                    std::fill_n(gt.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(row) * V), V, 0.0);
                continue;
            }
            const double step = hyper.learning_rate * inv_n;
            for (std::size_t k = 0; k < V * kFeatureDim; ++k) m.weights[k] -= step * gw[k];
            for (std::size_t k = 0; k < V; ++k) m.bias[k] -= step * gb[k];
            for (std::size_t k = 0; k < gs.size(); ++k) m.shared[k] -= step * gs[k];
            for (int row : touched_rows) {
                double* t = m.transition.data() + static_cast<std::size_t>(row) * V;
                const double* g = gt.data() + static_cast<std::size_t>(row) * V;
                for (std::size_t k = 0; k < V; ++k) t[k] -= step * g[k];
            }
        }
        result.loss_curve.push_back(mean_cross_entropy(m, corpus));
    }
    return result;
}

namespace {

using nlohmann::json;

void write_json(const json& j, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(1) << '\n';
}

json read_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(path + ": " + e.what());
    }
}

} // namespace

void save_model(const TokenPolicyModel& model, const std::string& path)
{
    json j;
    j["format"] = "cloop-token-policy";
    j["version"] = 2;
    j["vocab_hash"] = hash_hex(model.vocab_hash);
    j["vocab_size"] = model.vocab_size;
    j["feature_dim"] = kFeatureDim;
    j["weights"] = model.weights;
    j["bias"] = model.bias;
    j["transition"] = model.transition;
    j["shared"] = model.shared;
    j["feature_mean"] = model.feature_mean;
    j["feature_scale"] = model.feature_scale;
    j["hyper"] = {{"learning_rate", model.hyper.learning_rate},
                  {"epochs", model.hyper.epochs},
                  {"batch_size", model.hyper.batch_size},
                  {"seed", model.hyper.seed},
                  {"optimizer", to_string(model.hyper.optimizer)}};
    write_json(j, path);
}

TokenPolicyModel load_model(const std::string& path, const TokenVocabulary& vocab)
{
    const json j = read_json(path);
    try {
        if (j.at("format") != "cloop-token-policy" || j.at("version") != 2)
            throw Error(path + ": not a version-2 token policy file");
        if (j.at("vocab_hash").get<std::string>() != hash_hex(vocab.hash()))
            throw Error(path + ": vocabulary hash mismatch (model " + j.at("vocab_hash").get<std::string>() +
                        ", vocabulary " + hash_hex(vocab.hash()) + ")");
        if (j.at("feature_dim").get<std::size_t>() != kFeatureDim) throw Error(path + ": feature dimension mismatch");
        TokenPolicyModel m;
        m.vocab_size = j.at("vocab_size").get<std::size_t>();
        m.vocab_hash = vocab.hash();
        m.weights = j.at("weights").get<std::vector<double>>();
        m.bias = j.at("bias").get<std::vector<double>>();
        m.transition = j.at("transition").get<std::vector<double>>();
        m.shared = j.at("shared").get<std::vector<double>>();
        m.token_desc = token_descriptors(vocab);
        m.feature_mean = j.at("feature_mean").get<std::array<double, kFeatureDim>>();
        m.feature_scale = j.at("feature_scale").get<std::array<double, kFeatureDim>>();
        const json& h = j.at("hyper");
        m.hyper = {h.at("learning_rate").get<double>(), h.at("epochs").get<int>(), h.at("batch_size").get<int>(),
                   h.at("seed").get<std::uint64_t>(), optimizer_from_string(h.at("optimizer").get<std::string>())};
        if (m.vocab_size != vocab.size() || m.weights.size() != m.vocab_size * kFeatureDim ||
            m.bias.size() != m.vocab_size || m.transition.size() != m.vocab_size * m.vocab_size ||
            m.shared.size() != kTokenDescDim * kFeatureDim)
            throw Error(path + ": weight table sizes do not match the vocabulary");
        return m;
    } catch (const json::exception& e) {
        throw Error(path + ": " + e.what());
    }
}

void save_vocabulary(const TokenVocabulary& vocab, const std::string& path)
{
    json tokens = json::array();
    for (const auto& t : vocab.tokens()) tokens.push_back({t.index, t.dx, t.dy, t.dheading});
    write_json({{"format", "cloop-vocabulary"}, {"version", 1}, {"hash", hash_hex(vocab.hash())}, {"tokens", tokens}},
               path);
}

TokenVocabulary load_vocabulary(const std::string& path)
{
    const json j = read_json(path);
    try {
        if (j.at("format") != "cloop-vocabulary" || j.at("version") != 1)
            throw Error(path + ": not a version-1 vocabulary file");
        std::vector<MotionToken> tokens;
        for (const auto& row : j.at("tokens"))
            tokens.push_back({row.at(0).get<int>(), row.at(1).get<double>(), row.at(2).get<double>(),
                              row.at(3).get<double>()});
        TokenVocabulary vocab(std::move(tokens));
        if (j.contains("hash") && j.at("hash").get<std::string>() != hash_hex(vocab.hash()))
            throw Error(path + ": stored hash does not match token table");
        return vocab;
    } catch (const json::exception& e) {
        throw Error(path + ": " + e.what());
    }
}

} // namespace cloop
