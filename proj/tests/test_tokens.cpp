#include "support.hpp"

#include "cloop/error.hpp"
#include "cloop/generators.hpp"
#include "cloop/policy.hpp"
#include "cloop/tokens.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace cloop;
using namespace testing_support;

namespace {

Trajectory stationary(int blocks)
{
    Trajectory t;
    for (int k = 0; k <= blocks * kStepsPerToken; ++k) t.push_back({k * 0.1, Pose2D(4, 5, 0.3), 0.0});
    return t;
}

Trajectory straight(int blocks, double per_block)
{
    Trajectory t;
    for (int k = 0; k <= blocks * kStepsPerToken; ++k)
        t.push_back({k * 0.1, Pose2D(k * per_block / kStepsPerToken, 0, 0), per_block / kTokenDt});
    return t;
}

double w2(const Delta2D& a, const Delta2D& b)
{
    const double dx = a.dx - b.dx, dy = a.dy - b.dy, dh = kHeadingWeight * (a.dheading - b.dheading);
    return dx * dx + dy * dy + dh * dh;
}

// Plain Lloyd iterations from k random data points.
double lloyd_error(const std::vector<Delta2D>& pts, int k, std::mt19937_64& rng)
{
    std::vector<Delta2D> c;
    std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
    for (int i = 0; i < k; ++i) c.push_back(pts[pick(rng)]);
    double err = 0.0;
    for (int it = 0; it < 100; ++it) {
        std::vector<Delta2D> sum(k);
        std::vector<int> n(k, 0);
        err = 0.0;
        for (const auto& p : pts) {
            int best = 0;
            for (int j = 1; j < k; ++j)
                if (w2(p, c[j]) < w2(p, c[best])) best = j;
            err += w2(p, c[best]);
            sum[best].dx += p.dx;
            sum[best].dy += p.dy;
            sum[best].dheading += p.dheading;
            ++n[best];
        }
        for (int j = 0; j < k; ++j)
            if (n[j]) c[j] = {sum[j].dx / n[j], sum[j].dy / n[j], sum[j].dheading / n[j]};
    }
    return err;
}

} // namespace

TEST_CASE("vocabulary invariants")
{
    CHECK_THROWS_AS(TokenVocabulary({{0, 1, 0, 0}}), Error);                    // no zero token
    CHECK_THROWS_AS(TokenVocabulary({{0, 0, 0, 0}, {2, 1, 0, 0}}), Error);      // bad index
    CHECK_THROWS_AS(TokenVocabulary({{0, 0, 0, 0}, {1, 1, 0, 0}, {2, 1, 0, 0}}), Error); // duplicate
    const TokenVocabulary v({{0, 0, 0, 0}, {1, 5, 0, 0}, {2, 5, 1, 0.2}});
    CHECK(v.nearest({4.0, 0.1, 0.0}) == 1);
    CHECK(v.k_nearest({4.0, 0.1, 0.0}, 3) == std::vector<int>{1, 2, 0});
    CHECK(v.hash() != TokenVocabulary({{0, 0, 0, 0}, {1, 5, 0, 0}}).hash());
}

TEST_CASE("build_vocabulary small cases")
{
    const auto one = build_vocabulary({stationary(6)}, 1, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].dx == 0.0);

    const auto two = build_vocabulary({stationary(10), straight(10, 5.0)}, 2, 1);
    REQUIRE(two.size() == 2);
    CHECK(two[0].dx == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(two[1].dx == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(two[1].dy == doctest::Approx(0.0).epsilon(1e-9));

    CHECK_THROWS_AS(build_vocabulary({stationary(4)}, 3, 1), Error);
}

TEST_CASE("k-means is within 5% of a 20-restart oracle")
{
    std::mt19937_64 rng(40);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Delta2D> segs;
    for (int c = 0; c < 10; ++c) {
        const Delta2D centre{6 * n(rng), 2 * n(rng), 0.2 * n(rng)};
        for (int i = 0; i < 60; ++i)
            segs.push_back({centre.dx + 0.4 * n(rng), centre.dy + 0.3 * n(rng), centre.dheading + 0.02 * n(rng)});
    }
    double oracle = 1e300;
    for (int r = 0; r < 20; ++r) oracle = std::min(oracle, lloyd_error(segs, 8, rng));
    const auto cents = kmeans_motions(segs, 8, 7);
    CHECK(cents.size() == 8);
    CHECK(quantization_error(segs, cents) <= 1.05 * oracle);

    KMeansOptions serial;
    serial.parallel = false;
    const auto cs = kmeans_motions(segs, 8, 7, serial);
    for (std::size_t i = 0; i < cs.size(); ++i) {
        CHECK(cs[i].dx == cents[i].dx);
        CHECK(cs[i].dy == cents[i].dy);
        CHECK(cs[i].dheading == cents[i].dheading);
    }
}

TEST_CASE("tokenize examples")
{
    const TokenVocabulary two({{0, 0, 0, 0}, {1, 5, 0, 0}});
    const auto s = tokenize_trajectory(stationary(6), two, 1, 0);
    CHECK(s.tokens == std::vector<int>(6, 0));
    for (double r : s.residuals) CHECK(r == 0.0);

    // 2.6 m per block: the rollout overshoots with the 5 m token, then waits.
    const auto m = tokenize_trajectory(straight(8, 2.6), two, 1, 0);
    CHECK(m.tokens == std::vector<int>{1, 0, 1, 0, 1, 0, 1, 0});
    CHECK(m.targets == m.tokens);
    CHECK(m.residuals[0] == doctest::Approx(2.4));
    CHECK(m.residuals[1] == doctest::Approx(0.2));
    CHECK(m.residuals[7] == doctest::Approx(0.8));

    const auto exact = tokenize_trajectory(straight(8, 5.0), two, 1, 0);
    CHECK(exact.tokens == std::vector<int>(8, 1));

    CHECK_THROWS_AS(tokenize_trajectory(Trajectory(7), two, 1, 0), Error);
}

TEST_CASE("noise-free round trip error equals the residual and is bounded")
{
    const auto scenarios = generate_suite(SuiteKind::lane_change, 2, 3);
    std::vector<Trajectory> corpus;
    for (const auto& s : scenarios)
        for (const auto& [id, t] : s.logged_futures) corpus.push_back(t);
    const auto vocab = build_vocabulary(corpus, 32, 3);
    for (const auto& traj : corpus) {
        const auto t = tokenize_trajectory(traj, vocab, 1, 0);
        const auto rec = reconstruct(traj.front().pose, t.tokens, vocab);
        REQUIRE(rec.size() == traj.size());
        for (std::size_t b = 0; b < t.tokens.size(); ++b) {
            const double err = distance(rec[(b + 1) * kStepsPerToken].position(),
                                        traj[(b + 1) * kStepsPerToken].pose.position());
            CHECK(err == t.residuals[b]);
            // The chosen token is the nearest one to the required motion.
            const Delta2D need = relative(t.states[b], traj[(b + 1) * kStepsPerToken].pose);
            for (std::size_t j = 0; j < vocab.size(); ++j)
                CHECK(motion_distance2(need, vocab[t.tokens[b]]) <= motion_distance2(need, vocab[j]));
        }
    }
}

TEST_CASE("top-k noise is seeded and stays within the k nearest")
{
    const auto scn = generate_scenario(SuiteKind::merge, 0, 5);
    const Trajectory& traj = scn.logged_futures.at(kEgoId);
    std::vector<Trajectory> corpus;
    for (const auto& [id, t] : scn.logged_futures) corpus.push_back(t);
    const auto vocab = build_vocabulary(corpus, 24, 5);
    const auto a = tokenize_trajectory(traj, vocab, 6, 42);
    const auto b = tokenize_trajectory(traj, vocab, 6, 42);
    CHECK(a.tokens == b.tokens);
    CHECK(a.states == b.states);
    for (std::size_t i = 0; i < a.tokens.size(); ++i) {
        const Delta2D need = relative(a.states[i], traj[(i + 1) * kStepsPerToken].pose);
        const auto near = vocab.k_nearest(need, 6);
        CHECK(std::find(near.begin(), near.end(), a.tokens[i]) != near.end());
        CHECK(a.targets[i] == near.front());
    }
}

TEST_CASE("upsampling interpolates and ends on the token")
{
    const Pose2D start(1, 2, 0.5);
    const MotionToken tok{3, 4.0, 0.5, 0.1};
    const auto poses = upsample_tokens(start, tok);
    const Pose2D end = compose(start, tok.delta());
    CHECK(poses.back() == end);
    const Delta2D mid = relative(start, poses[1]);
    CHECK(mid.dx == doctest::Approx(0.8 * 2));
    CHECK(mid.dheading == doctest::Approx(0.04));
}

TEST_CASE("vocabulary files round trip")
{
    const TokenVocabulary v({{0, 0, 0, 0}, {1, 5.123456789012345, -0.1, 0.0123}});
    const auto path = std::filesystem::temp_directory_path() / "cloop_test_vocab.json";
    save_vocabulary(v, path.string());
    CHECK(load_vocabulary(path.string()) == v);
    std::filesystem::remove(path);
}
