#include "salience/common.hpp"
#include "salience/training.hpp"

#include <doctest.h>

#include <map>
#include <random>
#include <set>

using namespace salience;

namespace {

Dataset synthetic_population(std::size_t agents, std::uint64_t seed, int objects = 2,
                             bool constant = false, std::size_t fixed_T = 0) {
    Dataset data;
    for (int o = 0; o < objects; ++o) data.intern_object("g" + std::to_string(o));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> value(5.0, 80.0);
    std::uniform_int_distribution<std::size_t> length(3, 6);
    for (std::size_t a = 0; a < agents; ++a) {
        InteractionSequence seq;
        seq.agent_id = "u" + std::to_string(a);
        seq.object_id = static_cast<int>(a % static_cast<std::size_t>(objects));
        std::size_t T = fixed_T ? fixed_T : length(rng);
        double level = value(rng);
        for (std::size_t t = 0; t < T; ++t) {
            TelemetrySession s;
            s.absence = t == 0 ? 0.0 : (constant ? level * 0.1 : value(rng) * 0.1);
            s.session_time = constant ? level : value(rng);
            s.active_time = std::min(100.0, constant ? level : value(rng));
            s.session_activity = constant ? std::round(level * 0.5) : std::round(value(rng) * 0.5);
            seq.sessions.push_back(s);
        }
        data.sequences.push_back(std::move(seq));
    }
    return data;
}

} // namespace

TEST_CASE("split produces the 10/90 sizes and is deterministic") {
    Dataset data = synthetic_population(1000, 1);
    auto [tuning, validation] = split(data, 0.1, 77);
    CHECK(tuning.size() == 100);
    CHECK(validation.size() == 900);

    auto [tuning2, validation2] = split(data, 0.1, 77);
    for (std::size_t i = 0; i < tuning.size(); ++i)
        CHECK(tuning.sequences[i].agent_id == tuning2.sequences[i].agent_id);
}

TEST_CASE("split partitions the dataset: union equals original, intersection empty") {
    Dataset data = synthetic_population(101, 2);
    auto [a, b] = split(data, 0.3, 5);

    std::multiset<std::string> all, parts;
    for (const auto& s : data.sequences) all.insert(s.agent_id);
    std::set<std::string> seen;
    for (const auto& s : a.sequences) {
        parts.insert(s.agent_id);
        CHECK(seen.insert(s.agent_id).second);
    }
    for (const auto& s : b.sequences) {
        parts.insert(s.agent_id);
        CHECK(seen.insert(s.agent_id).second);
    }
    CHECK(all == parts);
}

TEST_CASE("split rejects degenerate fractions") {
    Dataset data = synthetic_population(3, 3);
    CHECK_THROWS_AS(split(data, 0.0, 1), DataError);
    CHECK_THROWS_AS(split(data, 1.0, 1), DataError);
    CHECK_THROWS_AS(split(data, 0.01, 1), DataError); // rounds to an empty part
}

TEST_CASE("hyperband bracket arithmetic for budget 9, eta 3") {
    auto brackets = hyperband_brackets(9, 3);
    REQUIRE(brackets.size() == 3); // s = 2, 1, 0
    const Bracket& aggressive = brackets[0];
    REQUIRE(aggressive.size() == 3);
    CHECK(aggressive[0].n_configs == 9);
    CHECK(aggressive[0].epochs == 1);
    CHECK(aggressive[1].n_configs == 3);
    CHECK(aggressive[1].epochs == 3);
    CHECK(aggressive[2].n_configs == 1);
    CHECK(aggressive[2].epochs == 9);
    // Every bracket finishes at the full budget.
    for (const auto& bracket : brackets) CHECK(bracket.back().epochs == 9);
}

TEST_CASE("hyperband with a single candidate returns it without elimination") {
    ModelSpec only;
    only.kind = ModelKind::kMlp;
    only.units = 48;
    int evaluations = 0;
    auto best = hyperband_search({only}, 9, 3, 0, [&](const ModelSpec&, int) {
        ++evaluations;
        return 1.0;
    });
    CHECK(best.units == 48);
    CHECK(evaluations > 0);
}

TEST_CASE("hyperband always selects a planted dominating optimum") {
    std::vector<ModelSpec> space;
    for (int u : {8, 16, 24, 32, 40, 48, 56, 64, 72}) {
        ModelSpec s;
        s.kind = ModelKind::kMlp;
        s.units = u;
        space.push_back(s);
    }
    // Config with units = 40 strictly dominates at every rung.
    auto evaluate = [](const ModelSpec& s, int epochs) {
        double base = s.units == 40 ? 0.1 : 1.0 + s.units * 0.01;
        return base / (1.0 + epochs * 0.01);
    };
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto best = hyperband_search(space, 9, 3, seed, evaluate);
        CHECK(best.units == 40);
    }
}

TEST_CASE("hyperband rejects an empty space") {
    CHECK_THROWS_AS(
        hyperband_search({}, 9, 3, 0, [](const ModelSpec&, int) { return 0.0; }),
        ConfigError);
}

TEST_CASE("default search space has the advertised shape") {
    CHECK(default_search_space(ModelKind::kMlp).size() == 54);
    CHECK(default_search_space(ModelKind::kRnn).size() == 54);
    CHECK(default_search_space(ModelKind::kElasticNet).size() == 54);
    CHECK(default_search_space(ModelKind::kLag1).size() == 1);
    for (const auto& s : default_search_space(ModelKind::kElasticNet)) CHECK(s.layers == 1);
}

TEST_CASE("fit learns the identity on lag-1-generated data") {
    // Constant sequences of one shared length: the lead-1 target equals the
    // input and the future count is a pure function of the step index.
    Dataset data = synthetic_population(300, 11, 2, /*constant=*/true, /*fixed_T=*/5);
    ModelSpec spec;
    spec.kind = ModelKind::kRnn;
    spec.units = 24;
    spec.embedding_dim = 4;
    spec.learning_rate = 3e-3;

    NetworkModel model(spec, data.objects.size(), 21);
    TrainConfig cfg;
    cfg.max_epochs = 200;
    cfg.batch_size = 64;
    cfg.seed = 5;
    auto result = fit(model, data, cfg);

    CHECK(result.best_holdout / 5.0 < 5.0); // reported scale, percent
    CHECK(result.epochs_run <= 200);
    // Best-so-far envelope of the holdout curve is non-increasing.
    double best = result.holdout_loss[0];
    for (double v : result.holdout_loss) {
        best = std::min(best, v);
        CHECK(best <= v + 1e-12);
    }
    CHECK(result.best_holdout == doctest::Approx(best));
}

TEST_CASE("early stopping counter: plateau from epoch 5 ends training at epoch 15") {
    EarlyStopper stopper(1e-4, 10);
    int stopped_at = 0;
    for (int epoch = 1; epoch <= 100; ++epoch) {
        // Real improvement through epoch 5, dead flat afterwards.
        double loss = epoch <= 5 ? 10.0 - epoch : 5.0;
        if (stopper.observe(loss)) {
            stopped_at = epoch;
            break;
        }
    }
    CHECK(stopped_at == 15);
    CHECK(stopper.best() == 5.0);
}

TEST_CASE("early stopping ignores sub-min_delta improvements") {
    EarlyStopper stopper(1e-2, 3);
    CHECK(!stopper.observe(1.0));
    CHECK(!stopper.observe(0.999)); // too small to count
    CHECK(!stopper.observe(0.998));
    CHECK(stopper.observe(0.997));  // third consecutive non-improvement
}

TEST_CASE("early stopping cuts a real training run on plateaued data") {
    Dataset data = synthetic_population(40, 13, 1);
    ModelSpec spec;
    spec.kind = ModelKind::kElasticNet;
    spec.units = 4;
    spec.learning_rate = 1e-7; // effectively frozen: holdout plateaus at once
    NetworkModel model(spec, data.objects.size(), 31);
    TrainConfig cfg;
    cfg.max_epochs = 200;
    cfg.patience = 10;
    cfg.early_stop_min_delta = 0.05;
    cfg.seed = 3;
    auto result = fit(model, data, cfg);
    CHECK(result.epochs_run <= 15);
}

TEST_CASE("cross_validate emits one cell per (fold, object, timestep, target)") {
    Dataset data = synthetic_population(60, 17, 2);
    ModelSpec spec;
    spec.kind = ModelKind::kLag1;
    TrainConfig cfg;
    cfg.seed = 9;
    auto cells = cross_validate(spec, data, 3, cfg);

    std::set<std::tuple<int, int, int, int>> keys;
    for (const auto& c : cells) {
        CHECK(c.smape >= 0.0);
        CHECK(c.smape <= 100.0);
        CHECK(keys.insert({c.fold, c.object_id, c.timestep, c.target}).second);
    }
    std::set<int> folds;
    for (const auto& c : cells) folds.insert(c.fold);
    CHECK(folds == std::set<int>{0, 1, 2});
}

TEST_CASE("cross_validate rejects fewer sequences than folds") {
    Dataset data = synthetic_population(4, 19, 1);
    ModelSpec spec;
    spec.kind = ModelKind::kLag1;
    TrainConfig cfg;
    CHECK_THROWS_AS(cross_validate(spec, data, 10, cfg), DataError);
}

TEST_CASE("eval cells survive a file round trip") {
    Dataset data = synthetic_population(30, 23, 2);
    ModelSpec spec;
    spec.kind = ModelKind::kMedian;
    TrainConfig cfg;
    cfg.seed = 2;
    auto cells = cross_validate(spec, data, 3, cfg);

    write_eval_cells("/tmp/salience_cells_test.csv", cells, data.objects);
    std::vector<std::string> names;
    auto loaded = read_eval_cells("/tmp/salience_cells_test.csv", names);
    REQUIRE(loaded.size() == cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        CHECK(loaded[i].model == cells[i].model);
        CHECK(loaded[i].fold == cells[i].fold);
        CHECK(loaded[i].timestep == cells[i].timestep);
        CHECK(loaded[i].target == cells[i].target);
        CHECK(loaded[i].smape == cells[i].smape);
        CHECK(names.at(static_cast<std::size_t>(loaded[i].object_id)) ==
              data.objects.at(static_cast<std::size_t>(cells[i].object_id)));
    }
}

TEST_CASE("compare_models ranks by mean global smape with paired fold wins") {
    std::vector<EvalCell> cells;
    for (int fold = 0; fold < 10; ++fold) {
        cells.push_back({ModelKind::kRnn, fold, 0, 1, 0, 10.0 + fold * 0.1});
        cells.push_back({ModelKind::kLag1, fold, 0, 1, 0, 20.0 + fold * 0.1});
    }
    auto report = compare_models(cells);
    REQUIRE(report.ranking.size() == 2);
    CHECK(report.ranking[0].kind == ModelKind::kRnn);
    CHECK(report.ranking[1].kind == ModelKind::kLag1);
    REQUIRE(report.paired.size() == 1);
    CHECK(report.paired[0].first_wins == 10);
    CHECK(report.paired[0].second_wins == 0);
    CHECK(ordering_satisfied(report, {ModelKind::kRnn, ModelKind::kLag1}));
    CHECK(!ordering_satisfied(report, {ModelKind::kLag1, ModelKind::kRnn}));
}

TEST_CASE("compare_models ties produce zero paired difference") {
    std::vector<EvalCell> cells;
    for (int fold = 0; fold < 4; ++fold) {
        cells.push_back({ModelKind::kRnn, fold, 0, 1, 0, 15.0});
        cells.push_back({ModelKind::kMlp, fold, 0, 1, 0, 15.0});
    }
    auto report = compare_models(cells);
    CHECK(report.paired[0].mean_difference == 0.0);
    CHECK(report.paired[0].ties == 4);
}

TEST_CASE("compare_models recomputation oracle on the global mean") {
    Dataset data = synthetic_population(40, 29, 2);
    ModelSpec spec;
    spec.kind = ModelKind::kLag1;
    TrainConfig cfg;
    cfg.seed = 4;
    auto cells = cross_validate(spec, data, 4, cfg);
    auto report = compare_models(cells);

    // Oracle: recompute the per-fold mean over raw cells, then average.
    std::map<int, std::pair<double, int>> per_fold;
    for (const auto& c : cells) {
        per_fold[c.fold].first += c.smape;
        per_fold[c.fold].second += 1;
    }
    double mean = 0.0;
    for (auto& [fold, acc] : per_fold) mean += acc.first / acc.second;
    mean /= static_cast<double>(per_fold.size());
    CHECK(report.ranking[0].mean_global == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("compare_models rejects mismatched fold sets") {
    std::vector<EvalCell> cells;
    cells.push_back({ModelKind::kRnn, 0, 0, 1, 0, 10.0});
    cells.push_back({ModelKind::kLag1, 1, 0, 1, 0, 20.0});
    CHECK_THROWS_AS(compare_models(cells), DataError);
}

TEST_CASE("scaling and median fits never see test-fold agents") {
    Dataset data = synthetic_population(60, 31, 2);
    TrainConfig cfg;
    cfg.seed = 6;
    const int k = 3;

    // Poison only fold 0's agents. If any training artifact leaked test-fold
    // data, fold 0's cells would differ from a manual fit on folds 1+2.
    auto folds = assign_folds(data, k, cfg.seed);
    Dataset poisoned = data;
    for (std::size_t i = 0; i < poisoned.sequences.size(); ++i) {
        if (folds[i] != 0) continue;
        for (auto& s : poisoned.sequences[i].sessions) s.session_time *= 937.0;
    }

    ModelSpec spec;
    spec.kind = ModelKind::kMedian;
    auto cells = cross_validate(spec, poisoned, k, cfg);

    // Oracle: fit the median model on the clean folds 1+2 and recompute fold
    // 0's session_time cells against the poisoned truth.
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < folds.size(); ++i)
        (folds[i] == 0 ? test_idx : train_idx).push_back(i);
    MedianModel oracle(spec.median_halflife);
    oracle.fit(data.subset(train_idx)); // clean by construction

    Dataset test = poisoned.subset(test_idx);
    std::map<std::pair<int, int>, std::pair<std::vector<double>, std::vector<double>>> pools;
    for (const auto& seq : test.sequences) {
        auto targets = build_targets(seq);
        for (std::size_t t = 0; t < targets.size(); ++t) {
            auto& pool = pools[{seq.object_id, static_cast<int>(t) + 1}];
            pool.first.push_back(targets[t].next_session_time);
            pool.second.push_back(oracle.predict(seq.object_id)[kSessionTime]);
        }
    }
    for (const auto& c : cells) {
        if (c.fold != 0 || c.target != kSessionTime) continue;
        auto it = pools.find({c.object_id, c.timestep});
        if (it == pools.end()) continue; // timestep capped
        CHECK(c.smape == doctest::Approx(smape(it->second.first, it->second.second)).epsilon(1e-12));
    }
}

TEST_CASE("cross_validate results are identical for any jobs count") {
    Dataset data = synthetic_population(45, 37, 2);
    ModelSpec spec;
    spec.kind = ModelKind::kElasticNet;
    spec.units = 4;
    spec.learning_rate = 1e-3;
    TrainConfig cfg;
    cfg.seed = 8;
    cfg.max_epochs = 5;
    cfg.batch_size = 16;

    cfg.jobs = 1;
    auto serial = cross_validate(spec, data, 3, cfg);
    cfg.jobs = 3;
    auto parallel = cross_validate(spec, data, 3, cfg);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) CHECK(serial[i].smape == parallel[i].smape);
}
