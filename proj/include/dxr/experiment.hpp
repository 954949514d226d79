#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dxr/error.hpp"
#include "dxr/ingest.hpp"
#include "dxr/metrics.hpp"
#include "dxr/model_io.hpp"
#include "dxr/stopping.hpp"

namespace dxr {

struct TraceRef {
    std::string path;
    std::string label;
};

/// One experiment: where the traces live, how they are labeled, and which
/// configuration overrides apply. When test_traces is empty the trailing
/// test_holdout_fraction of every training trace is held out for testing.
struct ExperimentSpec {
    std::string name;
    std::vector<TraceRef> train_traces;
    std::vector<TraceRef> test_traces;
    double test_holdout_fraction = 0.40;
    std::string output_dir = ".";
    nlohmann::json a2r_overrides;  // objects; empty when absent
    nlohmann::json fia_overrides;
};

inline ExperimentSpec load_experiment_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open experiment spec " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("experiment spec " + path + " is not valid JSON: " + e.what());
    }
    ExperimentSpec spec;
    spec.name = j.value("name", "experiment");
    auto read_refs = [&](const char* key, std::vector<TraceRef>& out) {
        if (!j.contains(key)) return;
        for (const auto& t : j.at(key))
            out.push_back({t.at("path").get<std::string>(), t.at("label").get<std::string>()});
    };
    read_refs("train_traces", spec.train_traces);
    read_refs("test_traces", spec.test_traces);
    spec.test_holdout_fraction = j.value("test_holdout_fraction", 0.40);
    spec.output_dir = j.value("output_dir", ".");
    if (j.contains("a2r")) spec.a2r_overrides = j.at("a2r");
    if (j.contains("fia")) spec.fia_overrides = j.at("fia");
    if (spec.train_traces.empty()) throw Error("experiment spec lists no train_traces");
    return spec;
}

inline void apply_a2r_overrides(const nlohmann::json& j, A2RConfig& config) {
    if (j.is_null() || j.empty()) return;
    config.initial_segment_size = j.value("initial_segment_size", config.initial_segment_size);
    config.segment_size_increment =
        j.value("segment_size_increment", config.segment_size_increment);
    config.s_max = j.value("s_max", config.s_max);
    config.t_i = j.value("t_i", config.t_i);
    config.v_r = j.value("v_r", config.v_r);
    config.e_th = j.value("e_th", config.e_th);
    config.es_th = j.value("es_th", config.es_th);
    config.ze_th = j.value("ze_th", config.ze_th);
    config.seed = j.value("seed", config.seed);
    if (j.contains("trees")) config.trees_override = j.at("trees").get<std::size_t>();
    config.one_vs_rest = j.value("one_vs_rest", config.one_vs_rest);
}

inline void apply_fia_overrides(const nlohmann::json& j, FiaConfig& config) {
    if (j.is_null() || j.empty()) return;
    config.bin_width = j.value("bin_width", config.bin_width);
    config.prominence_fraction = j.value("prominence_fraction", config.prominence_fraction);
    config.min_packets_per_frame =
        j.value("min_packets_per_frame", config.min_packets_per_frame);
    config.fallback_dur_th = j.value("fallback_dur_th", config.fallback_dur_th);
    if (j.contains("len_th_abs")) config.len_th_abs = j.at("len_th_abs").get<double>();
    config.per_trace_thresholds = j.value("per_trace_thresholds", config.per_trace_thresholds);
}

/// Loaded experiment data with class ids assigned 1..C over the sorted
/// unique label names (deterministic and order-independent).
struct ExperimentData {
    std::vector<LabeledTrace> train;
    std::vector<LabeledTrace> test;
    std::map<int, std::string> class_map;
    std::map<std::string, int> label_ids;
    std::vector<DatasetFingerprint> fingerprints;
};

inline LabeledTrace tail_slice(const LabeledTrace& trace, double fraction) {
    LabeledTrace out;
    out.service_label = trace.service_label;
    out.service_name = trace.service_name;
    const auto keep = static_cast<std::size_t>(
        std::llround((1.0 - fraction) * static_cast<double>(trace.packets.size())));
    out.packets.assign(trace.packets.begin() + static_cast<std::ptrdiff_t>(keep),
                       trace.packets.end());
    return out;
}

inline LabeledTrace head_slice(const LabeledTrace& trace, double fraction) {
    LabeledTrace out;
    out.service_label = trace.service_label;
    out.service_name = trace.service_name;
    const auto keep = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(trace.packets.size())));
    out.packets.assign(trace.packets.begin(),
                       trace.packets.begin() + static_cast<std::ptrdiff_t>(keep));
    return out;
}

inline ExperimentData load_experiment_data(const ExperimentSpec& spec,
                                           const ColumnMapping& schema = {}) {
    ExperimentData data;
    std::set<std::string> names;
    for (const auto& r : spec.train_traces) names.insert(r.label);
    for (const auto& r : spec.test_traces) names.insert(r.label);
    int next_id = 1;
    for (const auto& n : names) {
        data.label_ids[n] = next_id;
        data.class_map[next_id] = n;
        ++next_id;
    }

    const bool holdout = spec.test_traces.empty();
    for (const auto& r : spec.train_traces) {
        LabeledTrace t = load_trace(r.path, data.label_ids.at(r.label), r.label, schema);
        data.fingerprints.push_back({r.path, r.label, sha256_file(r.path), t.packets.size()});
        if (holdout && spec.test_holdout_fraction > 0.0) {
            data.test.push_back(tail_slice(t, spec.test_holdout_fraction));
            data.train.push_back(head_slice(t, 1.0 - spec.test_holdout_fraction));
        } else {
            data.train.push_back(std::move(t));
        }
    }
    for (const auto& r : spec.test_traces)
        data.test.push_back(load_trace(r.path, data.label_ids.at(r.label), r.label, schema));
    return data;
}

/// Table-style evaluation of a model against labeled traces: vectorize at
/// the model's segment size, predict, reduce to per-class metrics.
struct EvaluationRow {
    int class_id = 0;
    std::string class_name;
    std::size_t test_segments = 0;
    ClassMetrics metrics;
};

struct Evaluation {
    std::vector<EvaluationRow> rows;  // ordered by class id
    ConfusionMatrix matrix;
    double overall = 0.0;
};

inline Evaluation evaluate_model(const Forest& forest, std::size_t segment_size,
                                 const FiaConfig& fia_config,
                                 const std::vector<LabeledTrace>& test,
                                 const std::map<int, std::string>& class_map) {
    std::vector<int> y_true, y_pred;
    for (const auto& trace : test) {
        for (const auto& v : vectorize_trace(trace, segment_size, fia_config)) {
            y_true.push_back(v.label);
            y_pred.push_back(predict(forest, v).label);
        }
    }
    if (y_true.empty())
        throw InsufficientDataError("no test segments at segment size " +
                                    std::to_string(segment_size));
    Evaluation eval;
    eval.matrix = confusion(y_true, y_pred, forest.n_classes);
    const auto per_class = per_class_metrics(eval.matrix);
    eval.overall = overall_accuracy(eval.matrix);
    for (int c = 1; c <= forest.n_classes; ++c) {
        EvaluationRow row;
        row.class_id = c;
        const auto it = class_map.find(c);
        row.class_name = it != class_map.end() ? it->second : std::to_string(c);
        row.test_segments = 0;
        for (int t : y_true)
            if (t == c) ++row.test_segments;
        row.metrics = per_class[static_cast<std::size_t>(c - 1)];
        eval.rows.push_back(std::move(row));
    }
    return eval;
}

}  // namespace dxr
