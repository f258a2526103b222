#include "salience/training.hpp"

#include "salience/common.hpp"
#include "salience/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace salience {

void TrainConfig::validate() const {
    if (max_epochs < 1) throw ConfigError("train config: max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("train config: patience must be >= 1");
    if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0)
        throw ConfigError("train config: holdout_fraction must be in (0, 1)");
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (jobs < 1) throw ConfigError("train config: jobs must be >= 1");
}

std::pair<Dataset, Dataset> split(const Dataset& data, double fraction, std::uint64_t seed) {
    if (fraction <= 0.0 || fraction >= 1.0) throw DataError("split: fraction must be in (0, 1)");
    const std::size_t n = data.sequences.size();
    auto first_size = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    if (first_size == 0 || first_size == n)
        throw DataError("split: dataset too small for the requested fraction");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_engine(seed, 0x73706c6974ULL);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::size_t> first(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(first_size));
    std::vector<std::size_t> second(order.begin() + static_cast<std::ptrdiff_t>(first_size), order.end());
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    return {data.subset(first), data.subset(second)};
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

namespace {

// Accumulates per-target SMAPE sums so multi-batch losses weight rows evenly.
struct LossAccumulator {
    std::array<double, kNumTargets> sums{};
    std::size_t rows = 0;

    void add(const nn::Tensor& y, const nn::Tensor& yhat) {
        const std::size_t n = y.size() / kNumTargets;
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t k = 0; k < kNumTargets; ++k) {
                double a = y[r * kNumTargets + k], b = yhat[r * kNumTargets + k];
                double denom = std::abs(a) + std::abs(b);
                if (denom > 0.0) sums[k] += std::abs(a - b) / denom;
            }
        }
        rows += n;
    }
    double total() const {
        double t = 0.0;
        for (double s : sums) t += 100.0 * s / static_cast<double>(rows);
        return t;
    }
};

double dataset_loss(NetworkModel& model, const Dataset& data, const ScalingStats& stats,
                    std::size_t batch_size) {
    LossAccumulator acc;
    for (const auto& batch_idx : bucket_batches(data, batch_size, 0)) {
        BatchTensors batch = make_batch(data, batch_idx, stats);
        acc.add(batch.y, model.forward(batch).prediction);
    }
    if (acc.rows == 0) throw DataError("evaluate_loss: empty dataset");
    return acc.total();
}

} // namespace

double evaluate_loss(NetworkModel& model, const Dataset& data, const ScalingStats& stats,
                     std::size_t batch_size) {
    return dataset_loss(model, data, stats, batch_size);
}

FitResult fit(NetworkModel& model, const Dataset& train, const TrainConfig& cfg) {
    cfg.validate();
    if (train.sequences.size() < 5) throw DataError("fit: training set too small");

    auto [holdout, learn] = split(train, cfg.holdout_fraction, derive_seed(cfg.seed, 0x686f6cULL));
    ScalingStats stats = train.scaling ? *train.scaling : fit_scaling(learn.sequences);

    nn::AdamState adam;
    adam.learning_rate = model.spec().learning_rate;
    auto params = model.params();
    adam.attach(params);

    FitResult result;
    EarlyStopper stopper(cfg.early_stop_min_delta, cfg.patience);
    double best_seen = std::numeric_limits<double>::infinity(); // strict, for restore
    std::vector<nn::Tensor> best_params = model.snapshot_params();

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        LossAccumulator train_acc;
        for (const auto& batch_idx :
             bucket_batches(learn, cfg.batch_size, derive_seed(cfg.seed, 0xe0000ULL + static_cast<std::uint64_t>(epoch)))) {
            BatchTensors batch = make_batch(learn, batch_idx, stats);
            ForwardResult fwd = model.forward(batch);
            if (!fwd.prediction.all_finite())
                throw NumericalError("fit: non-finite prediction at epoch " + std::to_string(epoch));
            train_acc.add(batch.y, fwd.prediction);
            model.backward(multitask_smape_grad(batch.y, fwd.prediction));
            adam_step(params, adam);
        }
        double train_loss = train_acc.total();
        double holdout_loss = dataset_loss(model, holdout, stats, cfg.batch_size);
        if (!std::isfinite(train_loss) || !std::isfinite(holdout_loss))
            throw NumericalError("fit: non-finite loss at epoch " + std::to_string(epoch));

        result.train_loss.push_back(train_loss);
        result.holdout_loss.push_back(holdout_loss);
        result.epochs_run = epoch;

        if (holdout_loss < best_seen) {
            best_seen = holdout_loss;
            best_params = model.snapshot_params();
            result.best_epoch = epoch;
            result.best_holdout = holdout_loss;
        }
        if (stopper.observe(holdout_loss)) break;
    }

    model.restore_params(best_params);
    return result;
}

// ---------------------------------------------------------------------------
// Hyperband
// ---------------------------------------------------------------------------

std::vector<Bracket> hyperband_brackets(int budget_epochs, int eta) {
    if (eta < 2) throw ConfigError("hyperband: eta must be >= 2");
    if (budget_epochs < eta) throw ConfigError("hyperband: budget must be at least eta");

    int s_max = static_cast<int>(std::floor(std::log(static_cast<double>(budget_epochs)) /
                                            std::log(static_cast<double>(eta)) + 1e-9));
    double total_budget = static_cast<double>(s_max + 1) * budget_epochs;

    std::vector<Bracket> brackets;
    for (int s = s_max; s >= 0; --s) {
        int n = static_cast<int>(std::ceil(total_budget / budget_epochs *
                                           std::pow(eta, s) / (s + 1) - 1e-9));
        Bracket bracket;
        for (int i = 0; i <= s; ++i) {
            Rung rung;
            rung.n_configs = static_cast<int>(std::floor(n * std::pow(eta, -i) + 1e-9));
            rung.epochs = std::max(
                1, static_cast<int>(std::floor(budget_epochs * std::pow(eta, i - s) + 1e-9)));
            bracket.push_back(rung);
        }
        brackets.push_back(std::move(bracket));
    }
    return brackets;
}

ModelSpec hyperband_search(const std::vector<ModelSpec>& space, int budget_epochs, int eta,
                           std::uint64_t seed,
                           const std::function<double(const ModelSpec&, int)>& evaluate) {
    if (space.empty()) throw ConfigError("hyperband: empty search space");
    for (const auto& s : space) s.validate();

    auto brackets = hyperband_brackets(budget_epochs, eta);
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    bool have_best = false;

    for (std::size_t b = 0; b < brackets.size(); ++b) {
        const Bracket& bracket = brackets[b];

        std::vector<std::size_t> candidates(space.size());
        std::iota(candidates.begin(), candidates.end(), 0);
        auto rng = make_engine(seed, 0xb0000ULL + b);
        std::shuffle(candidates.begin(), candidates.end(), rng);
        candidates.resize(std::min<std::size_t>(candidates.size(),
                                                static_cast<std::size_t>(bracket[0].n_configs)));

        std::vector<std::pair<double, std::size_t>> scored; // (loss, space index)
        for (std::size_t rung_i = 0; rung_i < bracket.size(); ++rung_i) {
            const Rung& rung = bracket[rung_i];
            scored.clear();
            for (std::size_t idx : candidates) {
                double loss = evaluate(space[idx], rung.epochs);
                if (!std::isfinite(loss)) loss = std::numeric_limits<double>::infinity();
                scored.emplace_back(loss, idx);
            }
            std::sort(scored.begin(), scored.end(),
                      [](const auto& a, const auto& b) {
                          return a.first != b.first ? a.first < b.first : a.second < b.second;
                      });

            if (rung_i + 1 < bracket.size()) {
                auto keep = static_cast<std::size_t>(
                    std::max(1, bracket[rung_i + 1].n_configs));
                keep = std::min(keep, scored.size());
                candidates.clear();
                for (std::size_t i = 0; i < keep; ++i) candidates.push_back(scored[i].second);
            }
        }
        if (!scored.empty()) {
            // Survivor of this bracket, trained at (close to) full budget.
            if (!have_best || scored[0].first < best_loss ||
                (scored[0].first == best_loss && scored[0].second < best_index)) {
                best_loss = scored[0].first;
                best_index = scored[0].second;
                have_best = true;
            }
        }
    }
    if (!have_best) throw NumericalError("hyperband: every candidate evaluation failed");
    return space[best_index];
}

ModelSpec tune_model(const std::vector<ModelSpec>& space, const Dataset& tuning,
                     int budget_epochs, const TrainConfig& base, int eta) {
    if (space.empty()) throw ConfigError("tune_model: empty search space");
    ModelKind kind = space.front().kind;
    if (kind == ModelKind::kLag1 || kind == ModelKind::kMedian) return space.front();

    // All candidates share one tuning holdout so scores are comparable.
    auto [holdout, learn] = split(tuning, 0.2, derive_seed(base.seed, 0x74756e65ULL));
    ScalingStats stats = fit_scaling(learn.sequences);
    Dataset learn_scaled = learn;
    learn_scaled.scaling = stats;
    const std::size_t vocab = tuning.objects.size();

    auto evaluate = [&](const ModelSpec& spec, int epochs) {
        TrainConfig cfg = base;
        cfg.max_epochs = epochs;
        NetworkModel model(spec, vocab, derive_seed(base.seed, 0x1017ULL));
        fit(model, learn_scaled, cfg);
        return dataset_loss(model, holdout, stats, base.batch_size);
    };
    return hyperband_search(space, budget_epochs, eta, base.seed, evaluate);
}

std::vector<ModelSpec> default_search_space(ModelKind kind) {
    std::vector<ModelSpec> space;
    if (kind == ModelKind::kLag1 || kind == ModelKind::kMedian) {
        ModelSpec s;
        s.kind = kind;
        space.push_back(s);
        return space;
    }

    const int layer_grid[] = {1, 2, 3};
    const int unit_grid[] = {32, 64, 128};
    const int emb_grid[] = {4, 8, 16};
    const double lr_grid[] = {1e-3, 3e-4};
    const double penalty_grid[] = {0.0, 1e-4, 1e-3};

    for (int units : unit_grid) {
        for (int emb : emb_grid) {
            for (double lr : lr_grid) {
                if (kind == ModelKind::kElasticNet) {
                    for (double pen : penalty_grid) {
                        ModelSpec s;
                        s.kind = kind;
                        s.layers = 1;
                        s.units = units;
                        s.embedding_dim = emb;
                        s.learning_rate = lr;
                        s.l1 = pen;
                        s.l2 = pen;
                        space.push_back(s);
                    }
                } else {
                    for (int layers : layer_grid) {
                        ModelSpec s;
                        s.kind = kind;
                        s.layers = layers;
                        s.units = units;
                        s.embedding_dim = emb;
                        s.learning_rate = lr;
                        space.push_back(s);
                    }
                }
            }
        }
    }
    return space;
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

// Object-stratified fold assignment, deterministic per seed.
std::vector<int> assign_folds(const Dataset& data, int k, std::uint64_t seed) {
    std::map<int, std::vector<std::size_t>> by_object;
    for (std::size_t i = 0; i < data.sequences.size(); ++i)
        by_object[data.sequences[i].object_id].push_back(i);

    std::vector<int> fold(data.sequences.size(), 0);
    for (auto& [obj, members] : by_object) {
        auto rng = make_engine(seed, 0xf01dULL + static_cast<std::uint64_t>(obj));
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t i = 0; i < members.size(); ++i)
            fold[members[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    }
    return fold;
}

namespace {

// 95th-percentile input length per object; longer steps produce near-empty cells.
std::map<int, int> timestep_caps(const Dataset& data) {
    std::map<int, std::vector<int>> lengths;
    for (const auto& seq : data.sequences)
        lengths[seq.object_id].push_back(static_cast<int>(seq.length()) - 1);
    std::map<int, int> caps;
    for (auto& [obj, ls] : lengths) {
        std::sort(ls.begin(), ls.end());
        auto rank = static_cast<std::size_t>(
            std::ceil(0.95 * static_cast<double>(ls.size())));
        rank = std::min(std::max<std::size_t>(rank, 1), ls.size());
        caps[obj] = ls[rank - 1];
    }
    return caps;
}

std::vector<EvalCell> evaluate_fold(const ModelSpec& spec, const Dataset& validation,
                                    const std::vector<int>& folds, int fold, int k,
                                    const std::map<int, int>& caps, const TrainConfig& base) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < folds.size(); ++i)
        (folds[i] == fold ? test_idx : train_idx).push_back(i);
    if (train_idx.empty() || test_idx.empty())
        throw DataError("cross_validate: empty fold " + std::to_string(fold));

    Dataset train = validation.subset(train_idx);
    Dataset test = validation.subset(test_idx);
    ScalingStats stats = fit_scaling(train.sequences);
    train.scaling = stats;

    TrainConfig cfg = base;
    cfg.seed = derive_seed(base.seed, 0xc0ULL + static_cast<std::uint64_t>(fold));
    cfg.jobs = 1;

    std::unique_ptr<NetworkModel> network;
    std::unique_ptr<MedianModel> median;
    switch (spec.kind) {
        case ModelKind::kLag1:
            break;
        case ModelKind::kMedian:
            median = std::make_unique<MedianModel>(spec.median_halflife);
            median->fit(train);
            break;
        default:
            network = std::make_unique<NetworkModel>(spec, validation.objects.size(), cfg.seed);
            fit(*network, train, cfg);
            break;
    }

    auto preds = predict_original(spec, network.get(), median.get(), test, stats, cfg.batch_size);

    // (object, timestep, target) -> (truth, prediction) pools
    struct Pool {
        std::vector<double> y, yhat;
    };
    std::map<std::tuple<int, int, int>, Pool> pools;
    for (std::size_t i = 0; i < test.sequences.size(); ++i) {
        const auto& seq = test.sequences[i];
        auto targets = build_targets(seq);
        int cap = caps.at(seq.object_id);
        for (std::size_t t = 0; t < targets.size(); ++t) {
            int step = static_cast<int>(t) + 1;
            if (step > cap) break;
            for (std::size_t k_t = 0; k_t < kNumTargets; ++k_t) {
                double truth = k_t < kNumMetrics ? targets[t].metric(k_t)
                                                 : targets[t].future_session_count;
                auto& pool = pools[{seq.object_id, step, static_cast<int>(k_t)}];
                pool.y.push_back(truth);
                pool.yhat.push_back(preds[i][t][k_t]);
            }
        }
    }

    std::vector<EvalCell> cells;
    cells.reserve(pools.size());
    for (auto& [key, pool] : pools) {
        EvalCell cell;
        cell.model = spec.kind;
        cell.fold = fold;
        cell.object_id = std::get<0>(key);
        cell.timestep = std::get<1>(key);
        cell.target = std::get<2>(key);
        cell.smape = smape(pool.y, pool.yhat);
        cells.push_back(cell);
    }
    return cells;
}

} // namespace

std::vector<std::vector<std::array<double, kNumTargets>>> predict_original(
    const ModelSpec& spec, NetworkModel* network, const MedianModel* median,
    const Dataset& data, const ScalingStats& stats, std::size_t batch_size) {
    std::vector<std::vector<std::array<double, kNumTargets>>> preds(data.sequences.size());

    switch (spec.kind) {
        case ModelKind::kLag1:
            for (std::size_t i = 0; i < data.sequences.size(); ++i)
                preds[i] = lag1_predict(data.sequences[i]);
            return preds;
        case ModelKind::kMedian: {
            if (!median) throw DataError("predict_original: median model not fitted");
            for (std::size_t i = 0; i < data.sequences.size(); ++i) {
                auto constant = median->predict(data.sequences[i].object_id);
                preds[i].assign(data.sequences[i].length() - 1, constant);
            }
            return preds;
        }
        default:
            break;
    }

    if (!network) throw DataError("predict_original: network model missing");
    for (const auto& batch_idx : bucket_batches(data, batch_size, 0)) {
        BatchTensors batch = make_batch(data, batch_idx, stats);
        ForwardResult fwd = network->forward(batch);
        const std::size_t steps = batch.steps();
        for (std::size_t b = 0; b < batch.batch(); ++b) {
            auto& dst = preds[batch.sequence_indices[b]];
            dst.resize(steps);
            for (std::size_t t = 0; t < steps; ++t) {
                for (std::size_t m = 0; m < kNumMetrics; ++m)
                    dst[t][m] = stats.unscale(m, fwd.prediction.at(b, t, m));
                dst[t][kNumTargets - 1] = fwd.prediction.at(b, t, kNumTargets - 1);
            }
        }
    }
    return preds;
}

std::vector<EvalCell> cross_validate(const ModelSpec& spec, const Dataset& validation, int k,
                                     const TrainConfig& cfg) {
    cfg.validate();
    spec.validate();
    if (k < 2) throw DataError("cross_validate: k must be >= 2");
    if (validation.sequences.size() < static_cast<std::size_t>(k))
        throw DataError("cross_validate: fewer sequences than folds");

    auto folds = assign_folds(validation, k, cfg.seed);
    auto caps = timestep_caps(validation);

    std::vector<std::vector<EvalCell>> per_fold(static_cast<std::size_t>(k));
    std::vector<std::string> errors(static_cast<std::size_t>(k));

    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            int fold = next.fetch_add(1);
            if (fold >= k) return;
            try {
                per_fold[static_cast<std::size_t>(fold)] =
                    evaluate_fold(spec, validation, folds, fold, k, caps, cfg);
            } catch (const std::exception& e) {
                errors[static_cast<std::size_t>(fold)] = e.what();
            }
        }
    };

    int jobs = std::min(cfg.jobs, k);
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(jobs));
        for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    for (const auto& err : errors)
        if (!err.empty()) throw NumericalError("cross_validate: " + err);

    std::vector<EvalCell> cells;
    for (auto& fold_cells : per_fold)
        cells.insert(cells.end(), fold_cells.begin(), fold_cells.end());
    return cells;
}

// ---------------------------------------------------------------------------
// Cell I/O and comparison
// ---------------------------------------------------------------------------

void write_eval_cells(const std::string& path, const std::vector<EvalCell>& cells,
                      const std::vector<std::string>& object_names) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "model,fold,object,timestep,target,smape\n";
    for (const auto& c : cells) {
        out << to_string(c.model) << ',' << c.fold << ','
            << object_names.at(static_cast<std::size_t>(c.object_id)) << ',' << c.timestep << ','
            << kTargetNames[static_cast<std::size_t>(c.target)] << ',' << format_double(c.smape)
            << "\n";
    }
}

std::vector<EvalCell> read_eval_cells(const std::string& path,
                                      std::vector<std::string>& object_names) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open eval cells: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("eval cells file is empty");

    auto intern = [&](const std::string& name) {
        for (std::size_t i = 0; i < object_names.size(); ++i)
            if (object_names[i] == name) return static_cast<int>(i);
        object_names.push_back(name);
        return static_cast<int>(object_names.size() - 1);
    };
    auto target_index = [](const std::string& name) {
        for (std::size_t i = 0; i < kNumTargets; ++i)
            if (name == kTargetNames[i]) return static_cast<int>(i);
        throw DataError("unknown target name: " + name);
    };

    std::vector<EvalCell> cells;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string model, fold, object, timestep, target, value;
        if (!std::getline(ss, model, ',') || !std::getline(ss, fold, ',') ||
            !std::getline(ss, object, ',') || !std::getline(ss, timestep, ',') ||
            !std::getline(ss, target, ',') || !std::getline(ss, value))
            throw DataError("bad eval cell row: " + line);
        EvalCell c;
        c.model = model_kind_from_string(model);
        c.fold = std::stoi(fold);
        c.object_id = intern(object);
        c.timestep = std::stoi(timestep);
        c.target = target_index(target);
        c.smape = std::stod(value);
        cells.push_back(c);
    }
    return cells;
}

ComparisonReport compare_models(const std::vector<EvalCell>& cells) {
    if (cells.empty()) throw DataError("compare_models: no cells");

    std::map<ModelKind, std::set<int>> fold_sets;
    for (const auto& c : cells) fold_sets[c.model].insert(c.fold);
    const auto& reference = fold_sets.begin()->second;
    for (const auto& [kind, folds] : fold_sets)
        if (folds != reference)
            throw DataError("compare_models: fold sets differ between model kinds");

    ComparisonReport report;
    std::map<ModelKind, std::map<int, std::pair<double, std::size_t>>> fold_acc;
    std::map<ModelKind, std::array<std::pair<double, std::size_t>, kNumTargets>> target_acc;
    for (const auto& c : cells) {
        auto& fa = fold_acc[c.model][c.fold];
        fa.first += c.smape;
        fa.second += 1;
        auto& ta = target_acc[c.model][static_cast<std::size_t>(c.target)];
        ta.first += c.smape;
        ta.second += 1;
    }

    for (const auto& [kind, folds] : fold_acc) {
        ModelSummary s;
        s.kind = kind;
        for (const auto& [fold, acc] : folds)
            s.fold_global.push_back(acc.first / static_cast<double>(acc.second));
        s.mean_global = std::accumulate(s.fold_global.begin(), s.fold_global.end(), 0.0) /
                        static_cast<double>(s.fold_global.size());
        for (std::size_t k = 0; k < kNumTargets; ++k) {
            const auto& ta = target_acc[kind][k];
            s.per_target[k] = ta.second > 0 ? ta.first / static_cast<double>(ta.second) : 0.0;
        }
        report.ranking.push_back(std::move(s));
    }
    std::sort(report.ranking.begin(), report.ranking.end(),
              [](const ModelSummary& a, const ModelSummary& b) {
                  return a.mean_global < b.mean_global;
              });

    for (std::size_t i = 0; i < report.ranking.size(); ++i) {
        for (std::size_t j = i + 1; j < report.ranking.size(); ++j) {
            const auto& a = report.ranking[i];
            const auto& b = report.ranking[j];
            PairedComparison pc;
            pc.first = a.kind;
            pc.second = b.kind;
            double diff_sum = 0.0;
            for (std::size_t f = 0; f < a.fold_global.size(); ++f) {
                double diff = a.fold_global[f] - b.fold_global[f];
                diff_sum += diff;
                if (diff < 0.0)
                    ++pc.first_wins;
                else if (diff > 0.0)
                    ++pc.second_wins;
                else
                    ++pc.ties;
            }
            pc.mean_difference = diff_sum / static_cast<double>(a.fold_global.size());
            report.paired.push_back(pc);
        }
    }
    return report;
}

bool ordering_satisfied(const ComparisonReport& report,
                        const std::vector<ModelKind>& best_to_worst) {
    if (report.ranking.size() != best_to_worst.size()) return false;
    for (std::size_t i = 0; i < best_to_worst.size(); ++i)
        if (report.ranking[i].kind != best_to_worst[i]) return false;
    return true;
}

} // namespace salience
