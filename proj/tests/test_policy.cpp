#include "support.hpp"

#include "cloop/background.hpp"
#include "cloop/engine.hpp"
#include "cloop/error.hpp"
#include "cloop/generators.hpp"
#include "cloop/planners.hpp"
#include "cloop/policy.hpp"

#include <doctest.h>

#include <filesystem>

using namespace cloop;
using namespace testing_support;

namespace {

struct Fixture
{
    std::vector<Scenario> scenarios = generate_suite(SuiteKind::car_following, 6, 8);
    TokenVocabulary vocab;
    TrainingCorpus corpus;

    Fixture()
    {
        std::vector<Trajectory> trajs;
        for (const auto& s : scenarios)
            for (const auto& [id, t] : s.logged_futures) trajs.push_back(t);
        vocab = build_vocabulary(trajs, 32, 8);
        corpus = build_training_corpus(scenarios, vocab, 1, 8);
    }
};

const Fixture& fixture()
{
    static const Fixture f;
    return f;
}

} // namespace

TEST_CASE("zero model: uniform cross-entropy")
{
    const auto& f = fixture();
    const auto m = TokenPolicyModel::zeros(f.vocab);
    CHECK(mean_cross_entropy(m, f.corpus) == doctest::Approx(std::log(double(f.vocab.size()))).epsilon(1e-12));
    CHECK(std::abs(mean_cross_entropy(m, f.corpus) - std::log(double(f.vocab.size()))) <= 1e-6);
}

TEST_CASE("single repeated transition is learned within 50 epochs")
{
    const auto& f = fixture();
    TrainingCorpus c{f.vocab.hash(), f.vocab.size(), {}};
    TrainingSample s = f.corpus.samples.front();
    s.target = 7;
    c.samples.assign(100, s);
    TrainingHyperparameters h;
    h.epochs = 50;
    const auto r = train(TokenPolicyModel::zeros(f.vocab), c, h);
    CHECK(r.loss_curve.size() == 51);
    CHECK(r.loss_curve.back() < 0.05);
}

TEST_CASE("loss is non-increasing on a fixed corpus, for both optimizers")
{
    const auto& f = fixture();
    for (Optimizer o : {Optimizer::sgd, Optimizer::adam}) {
        TokenPolicyModel m = TokenPolicyModel::zeros(f.vocab);
        fit_standardization(m, f.corpus);
        TrainingHyperparameters h;
        h.epochs = 15;
        h.optimizer = o;
        h.learning_rate = o == Optimizer::sgd ? 0.02 : 0.003;
        const auto r = train(m, f.corpus, h);
        for (std::size_t e = 1; e < r.loss_curve.size(); ++e) CHECK(r.loss_curve[e] <= r.loss_curve[e - 1] + 1e-3);
        CHECK(r.loss_curve.back() < r.loss_curve.front());
        // Same seed, same result.
        CHECK(train(m, f.corpus, h).model == r.model);
    }
}

TEST_CASE("training and loading refuse a different vocabulary")
{
    const auto& f = fixture();
    const TokenVocabulary other({{0, 0, 0, 0}, {1, 1, 0, 0}});
    CHECK_THROWS_AS(train(TokenPolicyModel::zeros(other), f.corpus, {}), Error);

    TrainingHyperparameters h;
    h.epochs = 2;
    const auto r = train(TokenPolicyModel::zeros(f.vocab), f.corpus, h);
    const auto path = std::filesystem::temp_directory_path() / "cloop_test_model.json";
    save_model(r.model, path.string());
    CHECK(load_model(path.string(), f.vocab) == r.model);
    CHECK_THROWS_AS(load_model(path.string(), other), Error);
    std::filesystem::remove(path);
}

TEST_CASE("argmax ties go to the lowest index")
{
    const std::vector<double> l{0.1, 0.7, 0.7, -1};
    CHECK(argmax_token(l) == 1);
}

TEST_CASE("features of a simple scene")
{
    const auto& f = fixture();
    const auto g = road(true);
    WorldState w;
    w.ego = vehicle(kEgoId, 80, 0, 10);
    w.agents = {vehicle(1, 50, 0, 12)};
    const auto feat = extract_features(w, 1, *g, f.vocab);
    CHECK(feat.values[kSpeed] == 12.0);
    CHECK(feat.values[kHasLeftLane] == 1.0);
    CHECK(feat.values[kHasRightLane] == 0.0);
    CHECK(feat.values[kFrontGap] == doctest::Approx(25.5));
    CHECK(feat.values[kFrontClosing] == doctest::Approx(2.0));
    CHECK(feat.values[kInPathGap] == doctest::Approx(25.5));
    CHECK(feat.values[kSpeedDeficit] == doctest::Approx(3.0));
    CHECK_THROWS_AS(extract_features(w, 9, *g, f.vocab), Error);
}

TEST_CASE("learned agent trained on straight driving keeps its lane")
{
    const auto& f = fixture();
    TokenPolicyModel m = TokenPolicyModel::zeros(f.vocab);
    fit_standardization(m, f.corpus);
    TrainingHyperparameters h;
    h.epochs = 40;
    h.learning_rate = 0.003;
    h.optimizer = Optimizer::adam;
    const auto trained = train(m, f.corpus, h).model;

    auto lanes = std::vector<LaneSpec>{straight_lane(1, 0.0, 600), straight_lane(2, 100.0, 600)};
    const auto g = std::make_shared<LaneGraph>(lanes);
    Scenario scn = scenario(g, vehicle(kEgoId, 10, 100, 0), {vehicle(1, 20, 0, 10)}, 150, {2});
    auto model = std::make_shared<const TokenPolicyModel>(trained);
    auto vocab = std::make_shared<const TokenVocabulary>(f.vocab);
    LearnedBackground bg(model, vocab);
    ConstantVelocityPlanner ego;
    const auto log = run_scenario(scn, ego, bg, TrackerMode::perfect, 1);
    REQUIRE(log.termination == Termination::completed);
    double worst = 0.0;
    for (const auto& s : log.snapshots) worst = std::max(worst, std::abs(s.agents[0].pose.y));
    CHECK(worst < 1.0);
    CHECK(bg.decode_counts().at(1) == 30);
    CHECK(log.snapshots.back().agents[0].pose.x > 60.0);
}
