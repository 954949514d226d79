#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dxr/error.hpp"
#include "dxr/fia.hpp"
#include "dxr/forest.hpp"
#include "dxr/fvr.hpp"
#include "dxr/segment.hpp"
#include "dxr/stopping.hpp"

namespace dxr {

struct IterationRecord {
    std::size_t segment_size = 0;
    std::size_t segments_used = 0;  // training-split size this iteration
    double val_error = 0.0;
    std::optional<double> delta_error;
    std::size_t z_error = 0;
    std::size_t e_stop = 0;
    double wall_time = 0.0;  // seconds
};

struct TrainOutcome {
    Forest final_model;          // aggregation of every iteration model
    std::size_t s_t = 0;         // training segments consumed (= iterations run)
    std::size_t s = 0;           // chosen segment size
    bool converged = false;      // false on budget/data exhaustion
    StopReason stop_reason = StopReason::kContinue;
    std::vector<IterationRecord> history;
    std::vector<Forest> iteration_models;
};

namespace detail {

inline double validation_error(const Forest& model, const std::vector<FrameVector>& val) {
    if (val.empty()) return 0.0;
    std::size_t wrong = 0;
    for (const auto& v : val)
        if (predict(model, v).label != v.label) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(val.size());
}

/// Vectorizes every trace at the given size. Returns nullopt when any class
/// present in the traces yields zero segments (data exhausted at this size).
inline std::optional<std::vector<FrameVector>> augment_pool(
    const std::vector<LabeledTrace>& traces, std::size_t size, const FiaConfig& fia_config) {
    std::map<int, std::size_t> per_class;
    std::vector<FrameVector> vectors;
    for (const auto& trace : traces) {
        auto vs = vectorize_trace(trace, size, fia_config);
        per_class[trace.service_label] += vs.size();
        vectors.insert(vectors.end(), vs.begin(), vs.end());
    }
    for (const auto& [label, count] : per_class)
        if (count == 0) return std::nullopt;
    return vectors;
}

}  // namespace detail

/// The online training loop: each iteration augments the working pool with
/// vectors at the current segment size, trains a fresh forest, validates,
/// and either stops (zero error / plateau / budget) or grows the segment
/// size by the increment. On stop the iteration models are aggregated into
/// one ensemble; earlier models are retained unchanged throughout.
inline TrainOutcome a2r_ot_train(const std::vector<LabeledTrace>& traces,
                                 const A2RConfig& config, const FiaConfig& fia_config = {},
                                 const ForestParams& forest_params = {}) {
    if (config.initial_segment_size < 1 || config.segment_size_increment < 1)
        throw Error("segment sizes must be >= 1");
    if (!(config.v_r > 0.0 && config.v_r < 1.0)) throw Error("v_r must lie in (0,1)");
    if (config.e_th < 0.0) throw Error("e_th must be >= 0");
    if (config.es_th < 1 || config.ze_th < 1 || config.s_max < 1)
        throw Error("stop thresholds must be >= 1");

    std::map<int, std::size_t> classes;
    for (const auto& t : traces) classes[t.service_label] += t.packets.size();
    if (classes.size() < 2)
        throw InsufficientDataError("need at least 2 classes, got " +
                                    std::to_string(classes.size()));

    TrainOutcome outcome;
    std::vector<FrameVector> pool;
    StopState state;
    std::size_t n_f = config.initial_segment_size;
    StopReason reason = StopReason::kContinue;

    while (true) {
        const auto started = std::chrono::steady_clock::now();
        auto fresh = detail::augment_pool(traces, n_f, fia_config);
        if (!fresh) {
            if (state.iterations == 0)
                throw InsufficientDataError(
                    "a class yields zero segments at initial size " + std::to_string(n_f));
            // data exhausted at this size before any criterion fired
            reason = StopReason::kBudget;
            n_f -= config.segment_size_increment;
            break;
        }
        pool.insert(pool.end(), fresh->begin(), fresh->end());

        auto [train, val] = split_train_val(
            pool, config.v_r, detail::mix_seed(config.seed, state.iterations),
            [](const FrameVector& v) { return v.label; });
        Forest model =
            train_forest(train, config.trees_per_iteration(), forest_params,
                         detail::mix_seed(config.seed, 1000003 + state.iterations));
        const double e_curr = detail::validation_error(model, val);
        outcome.iteration_models.push_back(std::move(model));

        state.observe(e_curr, config.e_th);
        IterationRecord rec;
        rec.segment_size = n_f;
        rec.segments_used = train.size();
        rec.val_error = e_curr;
        rec.delta_error = state.last_delta;
        rec.z_error = state.z_error;
        rec.e_stop = state.e_stop;
        rec.wall_time =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        outcome.history.push_back(rec);

        reason = evaluate_stop(state, config);
        if (reason != StopReason::kContinue) break;
        n_f += config.segment_size_increment;
    }

    outcome.final_model = combine(outcome.iteration_models);
    outcome.s = n_f;
    outcome.s_t = state.iterations;
    outcome.stop_reason = reason;
    outcome.converged = reason == StopReason::kZeroError || reason == StopReason::kPlateau;
    return outcome;
}

/// One binary outcome per class: the class's traces against all others,
/// relabeled 1 (the class) and 2 (rest). Exposed for experimentation; the
/// multi-class pool is the default route.
inline std::map<int, TrainOutcome> a2r_ot_train_one_vs_rest(
    const std::vector<LabeledTrace>& traces, const A2RConfig& config,
    const FiaConfig& fia_config = {}, const ForestParams& forest_params = {}) {
    std::map<int, bool> classes;
    for (const auto& t : traces) classes[t.service_label] = true;
    std::map<int, TrainOutcome> outcomes;
    for (const auto& [label, _] : classes) {
        std::vector<LabeledTrace> relabeled = traces;
        for (auto& t : relabeled) {
            t.service_name = t.service_label == label ? t.service_name : "rest";
            t.service_label = t.service_label == label ? 1 : 2;
        }
        outcomes.emplace(label, a2r_ot_train(relabeled, config, fia_config, forest_params));
    }
    return outcomes;
}

struct ClassifySummary {
    std::vector<int> segment_labels;          // ordered by segment index
    std::map<int, std::size_t> class_counts;  // per-class segment tallies
    int plurality_label = 0;
};

/// Segments the trace at the model's training-time size and predicts each
/// segment. Requesting a different size than the model was trained at is an
/// error; a trace shorter than one segment is unusable.
inline ClassifySummary classify(const Forest& model, std::size_t model_segment_size,
                                const LabeledTrace& trace,
                                std::optional<std::size_t> requested_size = std::nullopt,
                                const FiaConfig& fia_config = {}) {
    if (requested_size && *requested_size != model_segment_size)
        throw SegmentSizeMismatchError(model_segment_size, *requested_size);
    if (trace.packets.size() < model_segment_size)
        throw InsufficientDataError("trace has " + std::to_string(trace.packets.size()) +
                                    " packets, shorter than one segment of " +
                                    std::to_string(model_segment_size));

    ClassifySummary summary;
    for (const auto& v : vectorize_trace(trace, model_segment_size, fia_config)) {
        const int label = predict(model, v).label;
        summary.segment_labels.push_back(label);
        ++summary.class_counts[label];
    }
    std::size_t best = 0;
    for (const auto& [label, count] : summary.class_counts) {
        if (count > best) {
            best = count;
            summary.plurality_label = label;
        }
    }
    return summary;
}

}  // namespace dxr
