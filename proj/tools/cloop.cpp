#include "cloop/error.hpp"
#include "cloop/generators.hpp"
#include "cloop/planners.hpp"
#include "cloop/policy.hpp"
#include "cloop/runner.hpp"
#include "cloop/scenario_io.hpp"
#include "cloop/tokens.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace cloop;

namespace {

std::vector<Scenario> load_scenarios(const std::vector<std::string>& paths)
{
    BenchmarkConfig cfg;
    cfg.scenario_paths = paths;
    return resolve_scenarios(cfg);
}

std::vector<Scenario> gather_scenarios(const std::vector<std::string>& paths, const std::vector<std::string>& suites,
                                       int count, std::uint64_t seed)
{
    std::vector<Scenario> out = paths.empty() ? std::vector<Scenario>{} : load_scenarios(paths);
    for (const auto& s : suites)
        for (Scenario& scn : generate_suite(suite_from_string(s), count, seed)) out.push_back(std::move(scn));
    if (out.empty()) throw Error("no scenarios given");
    return out;
}

std::vector<Trajectory> logged_corpus(const std::vector<Scenario>& scenarios)
{
    std::vector<Trajectory> corpus;
    for (const auto& s : scenarios)
        for (const auto& [id, traj] : s.logged_futures) corpus.push_back(traj);
    return corpus;
}

int finish(const BenchmarkReport& report, const fs::path& out)
{
    std::cout << summary_table(report);
    std::cout << "records: " << report.records.size() << "  planner_errors: " << report.planner_errors
              << "  internal_errors: " << report.internal_errors << "  output: " << out.string() << "\n";
    for (const auto& r : report.records)
        if (r.termination == Termination::internal_error)
            std::cerr << "internal error in " << record_name(r) << ": " << r.error << "\n";
    return report.internal_errors > 0 ? 1 : 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"cloop: closed-loop driving simulator and planner benchmark"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Synthesize a scenario suite with logged futures");
    std::string gen_kind;
    int gen_count = 10;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--kind", gen_kind, "car_following, lane_change, merge, intersection_lite or cut_in")->required();
    gen->add_option("--count", gen_count, "Number of scenarios")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--out", gen_out, "Output directory")->required();

    // augment
    auto* aug = app.add_subcommand("augment", "Insert agents to reach a traffic density level");
    std::vector<std::string> aug_in;
    std::string aug_level;
    std::uint64_t aug_seed = 0;
    std::string aug_out;
    aug->add_option("--input", aug_in, "Scenario files or directories")->required();
    aug->add_option("--level", aug_level, "low, mid or high")->required();
    aug->add_option("--seed", aug_seed, "Insertion seed");
    aug->add_option("--out", aug_out, "Output directory")->required();

    // build-vocab
    auto* voc = app.add_subcommand("build-vocab", "Cluster 0.5 s motion segments into a token vocabulary");
    std::vector<std::string> voc_in, voc_suites;
    int voc_count = 50, voc_size = 64;
    std::uint64_t voc_seed = 0;
    std::string voc_out;
    voc->add_option("--scenarios", voc_in, "Scenario files or directories");
    voc->add_option("--suite", voc_suites, "Generate a suite of this kind instead");
    voc->add_option("--count", voc_count, "Scenarios per generated suite");
    voc->add_option("--size", voc_size, "Vocabulary size")->check(CLI::PositiveNumber);
    voc->add_option("--seed", voc_seed, "Seed for generation and clustering");
    voc->add_option("--out", voc_out, "Vocabulary file")->required();

    // tokenize
    auto* tok = app.add_subcommand("tokenize", "Match logged futures to tokens");
    std::string tok_scn, tok_vocab, tok_out;
    int tok_k = 1;
    std::uint64_t tok_seed = 0;
    tok->add_option("--scenario", tok_scn, "Scenario file")->required();
    tok->add_option("--vocab", tok_vocab, "Vocabulary file")->required();
    tok->add_option("--noise-top-k", tok_k, "Sample among the k nearest tokens (1 disables noise)");
    tok->add_option("--seed", tok_seed, "Noise seed");
    tok->add_option("--out", tok_out, "Output file (stdout when omitted)");

    // train-agent
    auto* trn = app.add_subcommand("train-agent", "Train the next-token agent policy");
    std::vector<std::string> trn_in, trn_suites;
    int trn_count = 50, trn_k = 6;
    std::uint64_t trn_seed = 0;
    std::string trn_vocab, trn_out;
    TrainingHyperparameters hyper;
    hyper.learning_rate = 0.003;
    hyper.epochs = 100;
    trn->add_option("--scenarios", trn_in, "Scenario files or directories");
    trn->add_option("--suite", trn_suites, "Generate a suite of this kind instead");
    trn->add_option("--count", trn_count, "Scenarios per generated suite");
    trn->add_option("--vocab", trn_vocab, "Vocabulary file")->required();
    trn->add_option("--noise-top-k", trn_k, "Tokenizer noise");
    trn->add_option("--epochs", hyper.epochs, "Epochs");
    trn->add_option("--lr", hyper.learning_rate, "Learning rate");
    trn->add_option("--batch", hyper.batch_size, "Mini-batch size");
    std::string trn_opt = "adam";
    trn->add_option("--optimizer", trn_opt, "sgd or adam");
    trn->add_option("--seed", trn_seed, "Seed for generation, noise and shuffling");
    trn->add_option("--out", trn_out, "Model file")->required();

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run one scenario in closed loop");
    std::string sim_scn, sim_planner = "centerline", sim_bg = "non_reactive_replay", sim_tracker = "perfect";
    std::string sim_out = "sim_out", sim_model, sim_vocab;
    std::uint64_t sim_seed = 0;
    bool sim_svg = false;
    sim->add_option("--scenario", sim_scn, "Scenario file")->required();
    sim->add_option("--planner", sim_planner, "Planner name");
    sim->add_option("--background", sim_bg, "non_reactive_replay, idm_reactive or learned_reactive");
    sim->add_option("--tracker", sim_tracker, "perfect or kinematic");
    sim->add_option("--seed", sim_seed, "Run seed");
    sim->add_flag("--svg", sim_svg, "Write top-down snapshots every second");
    sim->add_option("--out", sim_out, "Output directory");
    sim->add_option("--model", sim_model, "Model file for the learned background");
    sim->add_option("--vocab", sim_vocab, "Vocabulary file for the learned background");

    // bench
    auto* bch = app.add_subcommand("bench", "Run a benchmark config");
    std::string bch_cfg, bch_out;
    int bch_par = 0;
    bch->add_option("--config", bch_cfg, "Benchmark config (JSON)")->required();
    bch->add_option("--out", bch_out, "Override the output directory");
    bch->add_option("--parallelism", bch_par, "Override the worker count");

    // report
    auto* rep = app.add_subcommand("report", "Re-aggregate existing records");
    std::string rep_dir, rep_out;
    rep->add_option("--dir", rep_dir, "Benchmark output directory")->required();
    rep->add_option("--out", rep_out, "Write the aggregate here instead of --dir");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const auto suite = generate_suite(suite_from_string(gen_kind), gen_count, gen_seed);
            fs::create_directories(gen_out);
            for (const auto& s : suite) save_scenario(s, fs::path(gen_out) / (s.id + ".json"));
            std::cout << "wrote " << suite.size() << " scenarios to " << gen_out << "\n";
        } else if (*aug) {
            const DensityLevel level = density_from_string(aug_level);
            fs::create_directories(aug_out);
            int n = 0;
            for (const auto& s : load_scenarios(aug_in)) {
                Scenario a = augment_density(s, level, aug_seed);
                a.id = s.id + "_" + to_string(level);
                save_scenario(a, fs::path(aug_out) / (a.id + ".json"));
                std::cout << a.id << ": " << s.agents.size() << " -> " << a.agents.size() << " agents\n";
                ++n;
            }
            std::cout << "wrote " << n << " scenarios to " << aug_out << "\n";
        } else if (*voc) {
            const auto scenarios = gather_scenarios(voc_in, voc_suites, voc_count, voc_seed);
            const TokenVocabulary vocab = build_vocabulary(logged_corpus(scenarios), voc_size, voc_seed);
            save_vocabulary(vocab, voc_out);
            std::cout << "vocabulary of " << vocab.size() << " tokens, hash " << hash_hex(vocab.hash()) << "\n";
        } else if (*tok) {
            const Scenario scn = load_scenario(tok_scn);
            const TokenVocabulary vocab = load_vocabulary(tok_vocab);
            nlohmann::json doc{{"scenario_id", scn.id}, {"vocab_hash", hash_hex(vocab.hash())}};
            nlohmann::json agents = nlohmann::json::object();
            for (const auto& [id, traj] : scn.logged_futures) {
                const auto t = tokenize_trajectory(traj, vocab, tok_k, tok_seed ^ static_cast<std::uint64_t>(id));
                agents[std::to_string(id)] = {{"tokens", t.tokens}, {"targets", t.targets}, {"residuals", t.residuals}};
            }
            doc["agents"] = agents;
            const std::string text = doc.dump(1) + "\n";
            if (tok_out.empty()) std::cout << text;
            else write_text_file(tok_out, text);
        } else if (*trn) {
            const auto scenarios = gather_scenarios(trn_in, trn_suites, trn_count, trn_seed);
            const TokenVocabulary vocab = load_vocabulary(trn_vocab);
            const TrainingCorpus corpus = build_training_corpus(scenarios, vocab, trn_k, trn_seed);
            TokenPolicyModel model = TokenPolicyModel::zeros(vocab);
            fit_standardization(model, corpus);
            hyper.seed = trn_seed;
            hyper.optimizer = optimizer_from_string(trn_opt);
            const TrainResult result = train(model, corpus, hyper);
            for (std::size_t e = 0; e < result.loss_curve.size(); ++e)
                std::printf("epoch %3zu  loss %.5f\n", e, result.loss_curve[e]);
            save_model(result.model, trn_out);
            std::cout << corpus.samples.size() << " samples, model written to " << trn_out << "\n";
        } else if (*sim) {
            BenchmarkConfig cfg;
            cfg.seed = sim_seed;
            cfg.scenario_paths = {sim_scn};
            cfg.planners = {sim_planner};
            cfg.backgrounds = {background_from_string(sim_bg)};
            cfg.tracker = tracker_from_string(sim_tracker);
            cfg.model_path = sim_model;
            cfg.vocab_path = sim_vocab;
            cfg.output_dir = sim_out;
            cfg.svg = sim_svg;
            const auto names = planner_names();
            if (std::find(names.begin(), names.end(), sim_planner) == names.end())
                throw Error("unknown planner '" + sim_planner + "'");
            const auto report = run_benchmark(cfg, resolve_scenarios(cfg), load_resources(cfg));
            return finish(report, sim_out);
        } else if (*bch) {
            BenchmarkConfig cfg = load_config(bch_cfg);
            if (!bch_out.empty()) cfg.output_dir = bch_out;
            if (bch_par > 0) cfg.parallelism = bch_par;
            const auto report = run_benchmark(cfg, resolve_scenarios(cfg), load_resources(cfg));
            return finish(report, cfg.output_dir);
        } else if (*rep) {
            const auto report = read_records(rep_dir);
            const fs::path out = rep_out.empty() ? fs::path(rep_dir) : fs::path(rep_out);
            fs::create_directories(out);
            write_text_file(out / "report.json", report_to_json(report));
            write_text_file(out / "report.csv", report_to_csv(report));
            write_text_file(out / "summary.csv", summary_table(report));
            return finish(report, out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
