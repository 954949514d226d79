#include <cmath>

#include <gtest/gtest.h>

#include "dxr/a2rot.hpp"
#include "dxr/synth.hpp"

namespace {

using namespace dxr;

// hand-stepped counter trace from the error sequence 0.10, 0.09, 0.085
TEST(Stopping, CounterEvolutionMatchesHandTrace) {
    A2RConfig config;
    config.e_th = 0.02;
    StopState state;

    state.observe(0.10, config.e_th);
    EXPECT_EQ(state.z_error, 0u);
    EXPECT_EQ(state.e_stop, 0u);  // no previous error yet

    state.observe(0.09, config.e_th);
    EXPECT_EQ(state.e_stop, 1u);  // |0.10 - 0.09| = 0.01 <= 0.02

    state.observe(0.085, config.e_th);
    EXPECT_EQ(state.e_stop, 2u);  // |0.09 - 0.085| = 0.005 <= 0.02
    EXPECT_EQ(state.z_error, 0u);
    EXPECT_EQ(state.iterations, 3u);
}

TEST(Stopping, ZeroErrorCounter) {
    A2RConfig config;
    StopState state;
    state.observe(0.0, config.e_th);
    EXPECT_EQ(state.z_error, 1u);
    state.observe(0.1, config.e_th);
    state.observe(0.0, config.e_th);
    EXPECT_EQ(state.z_error, 2u);
}

TEST(Stopping, ThresholdEqualityStops) {
    A2RConfig config;
    config.ze_th = 1;
    StopState state;
    state.z_error = 1;
    state.iterations = 1;
    EXPECT_EQ(evaluate_stop(state, config), StopReason::kZeroError);
}

TEST(Stopping, BelowThresholdContinues) {
    A2RConfig config;
    config.es_th = 3;
    config.ze_th = 2;
    StopState state;
    state.e_stop = 2;  // es_th - 1
    state.z_error = 1;
    state.iterations = 5;
    EXPECT_EQ(evaluate_stop(state, config), StopReason::kContinue);
}

TEST(Stopping, BudgetStops) {
    A2RConfig config;
    config.s_max = 10;
    config.es_th = 100;
    config.ze_th = 100;
    StopState state;
    state.iterations = 10;
    EXPECT_EQ(evaluate_stop(state, config), StopReason::kBudget);
}

TEST(Stopping, ExactlyOneOutcomeWithPriority) {
    A2RConfig config;
    config.ze_th = 1;
    config.es_th = 1;
    config.s_max = 1;
    StopState state;
    state.z_error = 1;
    state.e_stop = 1;
    state.iterations = 1;
    EXPECT_EQ(evaluate_stop(state, config), StopReason::kZeroError);
    state.z_error = 0;
    EXPECT_EQ(evaluate_stop(state, config), StopReason::kPlateau);
    state.e_stop = 0;
    EXPECT_EQ(evaluate_stop(state, config), StopReason::kBudget);
}

TEST(Config, DefaultTreeCountIsFiftyTimesFactor) {
    A2RConfig config;
    EXPECT_EQ(config.t_i, 50u);
    EXPECT_EQ(config.trees_per_iteration(), 2500u);  // 50 x T_i
    config.trees_override = 200;
    EXPECT_EQ(config.trees_per_iteration(), 200u);
}

std::vector<LabeledTrace> suite_traces(double duration, std::uint64_t seed_offset) {
    std::vector<LabeledTrace> traces;
    int label = 1;
    for (auto profile : preset_suite()) {
        profile.duration = duration;
        profile.seed += seed_offset;
        traces.push_back(generate(profile, label++).trace);
    }
    return traces;
}

A2RConfig fast_config() {
    A2RConfig config;
    config.trees_override = 60;
    config.seed = 4242;
    return config;
}

TEST(A2rOt, ConvergesOnSeparableSuiteWithHighHeldOutAccuracy) {
    const auto traces = suite_traces(10.0, 0);
    const auto outcome = a2r_ot_train(traces, fast_config());

    EXPECT_TRUE(outcome.converged);
    EXPECT_LE(outcome.s_t, 200u);
    EXPECT_EQ(outcome.s % 500, 0u);
    EXPECT_FALSE(outcome.history.empty());

    // held-out traces from fresh seeds
    const auto held_out = suite_traces(10.0, 1000);
    std::size_t correct = 0, total = 0;
    for (const auto& trace : held_out) {
        for (const auto& v : vectorize_trace(trace, outcome.s)) {
            correct += predict(outcome.final_model, v).label == v.label;
            ++total;
        }
    }
    ASSERT_GT(total, 0u);
    EXPECT_GE(static_cast<double>(correct) / static_cast<double>(total), 0.98);
}

TEST(A2rOt, HistoryInvariantsAndCounterSemantics) {
    const auto traces = suite_traces(10.0, 7);
    A2RConfig config = fast_config();
    config.ze_th = 3;  // force several iterations
    config.es_th = 2;
    const auto outcome = a2r_ot_train(traces, config);

    std::size_t z = 0, es = 0;
    std::optional<double> prev;
    std::size_t expected_size = config.initial_segment_size;
    std::size_t prev_segments = 0;
    for (const auto& rec : outcome.history) {
        EXPECT_EQ(rec.segment_size, expected_size);
        expected_size += config.segment_size_increment;
        EXPECT_GE(rec.val_error, 0.0);
        EXPECT_LE(rec.val_error, 1.0);
        EXPECT_GE(rec.segments_used, prev_segments);  // monotone pool growth
        prev_segments = rec.segments_used;
        if (rec.val_error == 0.0) ++z;
        if (prev && std::fabs(*prev - rec.val_error) <= config.e_th) ++es;
        prev = rec.val_error;
        EXPECT_EQ(rec.z_error, z);
        EXPECT_EQ(rec.e_stop, es);
    }
    EXPECT_EQ(outcome.s_t, outcome.history.size());
    EXPECT_EQ(outcome.iteration_models.size(), outcome.history.size());
}

// aggregation: final model votes equal the sum of iteration-model votes
TEST(A2rOt, FinalModelIsVoteSumOfIterationModels) {
    const auto traces = suite_traces(10.0, 21);
    A2RConfig config = fast_config();
    config.ze_th = 2;
    const auto outcome = a2r_ot_train(traces, config);
    ASSERT_GE(outcome.iteration_models.size(), 1u);

    for (const auto& v : vectorize_trace(traces[0], outcome.s)) {
        const auto combined = predict(outcome.final_model, v);
        std::vector<std::uint32_t> summed(combined.votes.size(), 0);
        for (const auto& model : outcome.iteration_models) {
            const auto p = predict(model, v);
            for (std::size_t c = 0; c < p.votes.size(); ++c) summed[c] += p.votes[c];
        }
        EXPECT_EQ(combined.votes, summed);
    }
}

// two statistically identical classes: budget exhaustion, error near 1/2
TEST(A2rOt, IndistinguishableClassesExhaustBudget) {
    auto profile = preset_suite()[0];
    profile.duration = 12.0;
    std::vector<LabeledTrace> traces;
    profile.seed = 500;
    traces.push_back(generate(profile, 1).trace);
    profile.seed = 501;
    traces.push_back(generate(profile, 2).trace);

    A2RConfig config = fast_config();
    config.s_max = 4;
    config.es_th = 1000;   // plateau disabled
    config.e_th = 0.0;
    config.ze_th = 1;
    const auto outcome = a2r_ot_train(traces, config);

    EXPECT_FALSE(outcome.converged);
    EXPECT_EQ(outcome.stop_reason, StopReason::kBudget);
    EXPECT_EQ(outcome.s_t, 4u);
    EXPECT_GE(outcome.history.back().val_error, 0.2);
    EXPECT_LE(outcome.history.back().val_error, 0.8);
}

// traces barely longer than one initial segment: the second iteration has
// no data left at the grown size and must exit on the budget path
TEST(A2rOt, DataExhaustionStopsWithBudgetReason) {
    auto profile = preset_suite()[0];
    profile.duration = 0.7;  // ~620 packets: one segment at 500, none at 1000
    std::vector<LabeledTrace> traces;
    profile.seed = 800;
    traces.push_back(generate(profile, 1).trace);
    profile.seed = 801;
    traces.push_back(generate(profile, 2).trace);
    ASSERT_GE(traces[0].packets.size(), 500u);
    ASSERT_LT(traces[0].packets.size(), 1000u);

    A2RConfig config = fast_config();
    config.ze_th = 99;
    config.es_th = 99;
    const auto outcome = a2r_ot_train(traces, config);
    EXPECT_FALSE(outcome.converged);
    EXPECT_EQ(outcome.stop_reason, StopReason::kBudget);
    EXPECT_EQ(outcome.s, 500u);
    EXPECT_EQ(outcome.s_t, 1u);
}

TEST(A2rOt, ReplayDeterminism) {
    const auto traces = suite_traces(8.0, 3);
    A2RConfig config = fast_config();
    config.ze_th = 2;
    const auto a = a2r_ot_train(traces, config);
    const auto b = a2r_ot_train(traces, config);

    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        EXPECT_EQ(a.history[i].segment_size, b.history[i].segment_size);
        EXPECT_EQ(a.history[i].segments_used, b.history[i].segments_used);
        EXPECT_DOUBLE_EQ(a.history[i].val_error, b.history[i].val_error);
        EXPECT_EQ(a.history[i].z_error, b.history[i].z_error);
        EXPECT_EQ(a.history[i].e_stop, b.history[i].e_stop);
    }
    EXPECT_EQ(a.s, b.s);
    EXPECT_EQ(a.s_t, b.s_t);
    for (const auto& v : vectorize_trace(traces[1], a.s))
        EXPECT_EQ(predict(a.final_model, v).votes, predict(b.final_model, v).votes);
}

TEST(A2rOt, SingleClassRejected) {
    const auto trace = generate(preset_suite()[0], 1).trace;
    EXPECT_THROW(a2r_ot_train({trace}, fast_config()), InsufficientDataError);
}

TEST(A2rOt, TooShortTracesRejected) {
    auto profile = preset_suite()[0];
    profile.duration = 0.2;  // roughly 180 packets, below one initial segment
    std::vector<LabeledTrace> traces;
    traces.push_back(generate(profile, 1).trace);
    profile.seed = 7;
    traces.push_back(generate(profile, 2).trace);
    EXPECT_THROW(a2r_ot_train(traces, fast_config()), InsufficientDataError);
}

TEST(A2rOt, OneVsRestTrainsOneBinaryModelPerClass) {
    auto traces = suite_traces(8.0, 50);
    traces.resize(3);
    A2RConfig config = fast_config();
    config.one_vs_rest = true;
    const auto outcomes = a2r_ot_train_one_vs_rest(traces, config);
    ASSERT_EQ(outcomes.size(), 3u);
    for (const auto& [class_id, outcome] : outcomes) {
        EXPECT_EQ(outcome.final_model.n_classes, 2);
        EXPECT_TRUE(outcome.converged) << "class " << class_id;
    }
}

TEST(Classify, SelfConsistencyOnTrainingTrace) {
    const auto traces = suite_traces(10.0, 11);
    const auto outcome = a2r_ot_train(traces, fast_config());

    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto summary =
            classify(outcome.final_model, outcome.s, traces[i], std::nullopt);
        EXPECT_EQ(summary.plurality_label, traces[i].service_label);
        std::size_t correct = 0;
        for (int label : summary.segment_labels)
            if (label == traces[i].service_label) ++correct;
        const double train_acc =
            static_cast<double>(correct) / static_cast<double>(summary.segment_labels.size());
        const double val_acc = 1.0 - outcome.history.back().val_error;
        EXPECT_GE(train_acc + 1e-9, val_acc);
    }
}

TEST(Classify, SegmentSizeMismatchRejected) {
    const auto traces = suite_traces(8.0, 12);
    const auto outcome = a2r_ot_train(traces, fast_config());
    EXPECT_THROW(
        classify(outcome.final_model, outcome.s, traces[0], outcome.s + 500),
        SegmentSizeMismatchError);
}

TEST(Classify, TraceShorterThanOneSegmentRejected) {
    const auto traces = suite_traces(8.0, 13);
    const auto outcome = a2r_ot_train(traces, fast_config());
    LabeledTrace stub = traces[0];
    stub.packets.resize(outcome.s - 1);
    EXPECT_THROW(classify(outcome.final_model, outcome.s, stub, std::nullopt),
                 InsufficientDataError);
}

}  // namespace
