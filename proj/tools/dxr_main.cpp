// dxr: segment-based Metaverse/XR traffic classifier.
//
// Subcommands: synth, fia-report, train, classify, evaluate.
// Exit codes: 0 success, 2 usage error, 3 data error, 4 training stopped on
// budget exhaustion without converging.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dxr/a2rot.hpp"
#include "dxr/error.hpp"
#include "dxr/experiment.hpp"
#include "dxr/fia.hpp"
#include "dxr/fvr.hpp"
#include "dxr/ingest.hpp"
#include "dxr/model_io.hpp"
#include "dxr/synth.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitBudget = 4;

dxr::ServiceProfile profile_from_json(const nlohmann::json& j) {
    dxr::ServiceProfile p;
    p.name = j.value("name", "custom");
    p.frame_rate = j.value("frame_rate", p.frame_rate);
    auto range_real = [&](const char* key, dxr::UniformReal& r) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (v.is_array()) {
            r.lo = v.at(0).get<double>();
            r.hi = v.at(1).get<double>();
        } else {
            r.lo = r.hi = v.get<double>();
        }
    };
    if (j.contains("packets_per_frame")) {
        const auto& v = j.at("packets_per_frame");
        if (v.is_array()) {
            p.packets_per_frame.lo = v.at(0).get<std::size_t>();
            p.packets_per_frame.hi = v.at(1).get<std::size_t>();
        } else {
            p.packets_per_frame.lo = p.packets_per_frame.hi = v.get<std::size_t>();
        }
    }
    range_real("frame_packet_length", p.frame_packet_length);
    range_real("intra_frame_iat", p.intra_frame_iat);
    p.control_packet_rate = j.value("control_packet_rate", p.control_packet_rate);
    range_real("control_packet_length", p.control_packet_length);
    p.uplink_fraction = j.value("uplink_fraction", p.uplink_fraction);
    p.jitter = j.value("jitter", p.jitter);
    p.duration = j.value("duration", p.duration);
    p.seed = j.value("seed", p.seed);
    p.mid_frame_pause_prob = j.value("mid_frame_pause_prob", p.mid_frame_pause_prob);
    range_real("mid_frame_pause", p.mid_frame_pause);
    p.similarity_cv_bound = j.value("similarity_cv_bound", p.similarity_cv_bound);
    return p;
}

nlohmann::json profile_to_json(const dxr::ServiceProfile& p) {
    return nlohmann::json{
        {"name", p.name},
        {"frame_rate", p.frame_rate},
        {"packets_per_frame", {p.packets_per_frame.lo, p.packets_per_frame.hi}},
        {"frame_packet_length", {p.frame_packet_length.lo, p.frame_packet_length.hi}},
        {"intra_frame_iat", {p.intra_frame_iat.lo, p.intra_frame_iat.hi}},
        {"control_packet_rate", p.control_packet_rate},
        {"control_packet_length", {p.control_packet_length.lo, p.control_packet_length.hi}},
        {"uplink_fraction", p.uplink_fraction},
        {"jitter", p.jitter},
        {"duration", p.duration},
        {"seed", p.seed},
        {"mid_frame_pause_prob", p.mid_frame_pause_prob},
        {"mid_frame_pause", {p.mid_frame_pause.lo, p.mid_frame_pause.hi}},
        {"similarity_cv_bound", p.similarity_cv_bound}};
}

struct SynthOptions {
    std::string profile_name;
    std::string profile_file;
    std::string out_prefix;
    double duration = 0.0;   // 0 keeps the profile value
    double frame_rate = 0.0; // 0 keeps the profile value
    std::uint64_t seed = 0;  // 0 keeps the profile value
    bool list = false;
};

int run_synth(const SynthOptions& opt) {
    if (opt.list) {
        for (const auto& p : dxr::preset_suite())
            std::cout << p.name << "," << p.frame_rate << "," << p.duration << "\n";
        return kExitOk;
    }
    dxr::ServiceProfile profile;
    if (!opt.profile_file.empty()) {
        std::ifstream in(opt.profile_file);
        if (!in) throw dxr::Error("cannot open profile file " + opt.profile_file);
        nlohmann::json j;
        in >> j;
        profile = profile_from_json(j);
    } else {
        auto preset = dxr::preset_by_name(opt.profile_name);
        if (!preset)
            throw dxr::Error("unknown profile '" + opt.profile_name +
                             "' (see --list for presets)");
        profile = *preset;
    }
    if (opt.duration > 0.0) profile.duration = opt.duration;
    if (opt.frame_rate > 0.0) profile.frame_rate = opt.frame_rate;
    if (opt.seed != 0) profile.seed = opt.seed;

    const dxr::SyntheticTrace synth = dxr::generate(profile, 1);

    std::filesystem::path csv_path = opt.out_prefix + ".csv";
    if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
    {
        std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
        if (!out) throw dxr::Error("cannot write " + csv_path.string());
        dxr::write_trace_csv(synth.trace, out);
    }
    nlohmann::json truth{{"profile", profile_to_json(profile)},
                         {"packet_count", synth.trace.packets.size()},
                         {"frame_count", synth.frames.size()},
                         {"frames", nlohmann::json::array()}};
    for (const auto& f : synth.frames)
        truth["frames"].push_back({{"start_time", f.start_time},
                                   {"end_time", f.end_time},
                                   {"packet_count", f.packet_count}});
    {
        std::ofstream out(opt.out_prefix + ".truth.json", std::ios::binary | std::ios::trunc);
        if (!out) throw dxr::Error("cannot write " + opt.out_prefix + ".truth.json");
        out << truth.dump(2) << '\n';
    }
    std::cerr << "wrote " << synth.trace.packets.size() << " packets, "
              << synth.frames.size() << " ground-truth frames\n";
    return kExitOk;
}

struct FiaReportOptions {
    std::string trace_path;
    std::size_t segment_size = 500;
    dxr::FiaConfig fia;
};

int run_fia_report(const FiaReportOptions& opt) {
    const dxr::LabeledTrace trace = dxr::load_trace(opt.trace_path, 1, "trace");
    const auto segments = dxr::segment(trace, opt.segment_size);
    if (segments.empty())
        throw dxr::InsufficientDataError("trace yields no segments at size " +
                                         std::to_string(opt.segment_size));

    std::optional<dxr::FiaThresholds> pinned;
    if (opt.fia.per_trace_thresholds) {
        dxr::Segment whole;
        whole.packets = trace.packets;
        whole.segment_size = trace.packets.size();
        pinned = dxr::compute_thresholds(whole, opt.fia);
    }

    std::cout << "segment_index,len_th,t1,t2,dur_th,frame_count,frame_rate,"
                 "avg_frame_iat,total_frame_duration\n";
    std::size_t total_frames = 0;
    double total_duration = 0.0;
    char buf[256];
    for (const auto& seg : segments) {
        const dxr::FiaThresholds th =
            pinned ? *pinned : dxr::compute_thresholds(seg, opt.fia);
        const dxr::FrameSet frames =
            dxr::identify_frames(seg, th, opt.fia.min_packets_per_frame);
        const double rate = frames.segment_duration > 0.0 ? dxr::frame_rate(frames) : 0.0;
        std::snprintf(buf, sizeof buf, "%zu,%.0f,%.6g,%.6g,%.6g,%zu,%.4f,%.6g,%.6g\n",
                      seg.index, th.len_th, th.t1, th.t2, th.dur_th, frames.count(), rate,
                      frames.avg_frame_iat(), frames.total_frame_duration());
        std::cout << buf;
        total_frames += frames.count();
        total_duration += frames.segment_duration;
    }
    if (total_duration > 0.0)
        std::fprintf(stderr, "overall_frame_rate %.4f Hz over %.3f s\n",
                     static_cast<double>(total_frames) / total_duration, total_duration);
    return kExitOk;
}

struct TrainOptions {
    std::string spec_path;
    std::string model_path;  // empty: <output_dir>/<name>.dxr.json
    dxr::A2RConfig a2r;
    dxr::FiaConfig fia;
    bool fast = false;
    // which fields were set on the command line (flags beat the spec file)
    std::set<std::string> explicit_flags;
};

void merge_spec_config(const dxr::ExperimentSpec& spec, TrainOptions& opt) {
    dxr::A2RConfig from_spec = opt.a2r;
    dxr::apply_a2r_overrides(spec.a2r_overrides, from_spec);
    dxr::FiaConfig fia_from_spec = opt.fia;
    dxr::apply_fia_overrides(spec.fia_overrides, fia_from_spec);
    // spec-file values apply only where no explicit flag was given
    auto flag = [&](const std::string& name) { return opt.explicit_flags.count(name) > 0; };
    if (!flag("--segment-size")) opt.a2r.initial_segment_size = from_spec.initial_segment_size;
    if (!flag("--increment")) opt.a2r.segment_size_increment = from_spec.segment_size_increment;
    if (!flag("--s-max")) opt.a2r.s_max = from_spec.s_max;
    if (!flag("--vr")) opt.a2r.v_r = from_spec.v_r;
    if (!flag("--e-th")) opt.a2r.e_th = from_spec.e_th;
    if (!flag("--es-th")) opt.a2r.es_th = from_spec.es_th;
    if (!flag("--ze-th")) opt.a2r.ze_th = from_spec.ze_th;
    if (!flag("--seed")) opt.a2r.seed = from_spec.seed;
    if (!flag("--trees") && !opt.fast) opt.a2r.trees_override = from_spec.trees_override;
    if (!flag("--one-vs-rest")) opt.a2r.one_vs_rest = from_spec.one_vs_rest;
    if (!flag("--bin-width")) opt.fia.bin_width = fia_from_spec.bin_width;
    if (!flag("--len-th-abs")) opt.fia.len_th_abs = fia_from_spec.len_th_abs;
    opt.fia.prominence_fraction = fia_from_spec.prominence_fraction;
    opt.fia.min_packets_per_frame = fia_from_spec.min_packets_per_frame;
    opt.fia.fallback_dur_th = fia_from_spec.fallback_dur_th;
    opt.fia.per_trace_thresholds = fia_from_spec.per_trace_thresholds;
}

nlohmann::json evaluation_json(const dxr::Evaluation& eval) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : eval.rows)
        rows.push_back({{"class_id", r.class_id},
                        {"class_name", r.class_name},
                        {"test_segments", r.test_segments},
                        {"accuracy", r.metrics.accuracy},
                        {"fnr", r.metrics.fnr},
                        {"precision", r.metrics.precision},
                        {"recall", r.metrics.recall},
                        {"f1", r.metrics.f1}});
    return nlohmann::json{{"overall_accuracy", eval.overall}, {"per_class", rows}};
}

int run_train(TrainOptions& opt) {
    const dxr::ExperimentSpec spec = dxr::load_experiment_spec(opt.spec_path);
    merge_spec_config(spec, opt);
    if (opt.fast) opt.a2r.trees_override = 200;

    const dxr::ExperimentData data = dxr::load_experiment_data(spec);

    std::filesystem::path model_path = opt.model_path;
    if (model_path.empty())
        model_path = std::filesystem::path(spec.output_dir) / (spec.name + ".dxr.json");
    if (model_path.has_parent_path())
        std::filesystem::create_directories(model_path.parent_path());

    auto finish_one = [&](const dxr::TrainOutcome& outcome,
                          const std::map<int, std::string>& class_map,
                          const std::vector<dxr::LabeledTrace>& test,
                          const std::filesystem::path& out_path) {
        nlohmann::json final_metrics;
        if (!test.empty()) {
            const auto eval = dxr::evaluate_model(outcome.final_model, outcome.s, opt.fia,
                                                  test, class_map);
            final_metrics = evaluation_json(eval);
        }
        const nlohmann::json manifest = dxr::manifest_json(
            opt.a2r, opt.fia, outcome, data.fingerprints, class_map, final_metrics);
        const std::string manifest_path =
            out_path.string().substr(0, out_path.string().size() -
                                            std::string(".dxr.json").size()) +
            ".manifest.json";
        dxr::write_manifest(manifest, manifest_path);

        dxr::ModelMetadata meta;
        meta.segment_size = outcome.s;
        meta.class_map = class_map;
        meta.fia_config = opt.fia;
        meta.manifest_digest = dxr::sha256_file(manifest_path);
        dxr::save_model(outcome.final_model, meta, out_path.string());

        std::fprintf(stderr,
                     "%s: stop=%s segment_size=%zu training_segments=%zu trees=%zu\n",
                     out_path.string().c_str(), dxr::to_string(outcome.stop_reason),
                     outcome.s, outcome.s_t, outcome.final_model.trees.size());
        for (const auto& rec : outcome.history)
            std::fprintf(stderr,
                         "  iter size=%zu train_segments=%zu val_error=%.4f z=%zu es=%zu "
                         "(%.2fs)\n",
                         rec.segment_size, rec.segments_used, rec.val_error, rec.z_error,
                         rec.e_stop, rec.wall_time);
        return outcome.converged;
    };

    auto file_token = [](std::string name) {
        for (auto& c : name)
            if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
        return name;
    };

    bool all_converged = true;
    if (opt.a2r.one_vs_rest) {
        const auto outcomes =
            dxr::a2r_ot_train_one_vs_rest(data.train, opt.a2r, opt.fia);
        for (const auto& [class_id, outcome] : outcomes) {
            std::map<int, std::string> binary_map{
                {1, data.class_map.at(class_id)}, {2, "rest"}};
            std::vector<dxr::LabeledTrace> test = data.test;
            for (auto& t : test) t.service_label = t.service_label == class_id ? 1 : 2;
            std::filesystem::path per_class = model_path;
            per_class.replace_filename(model_path.stem().stem().string() + "." +
                                       file_token(data.class_map.at(class_id)) +
                                       ".dxr.json");
            all_converged &= finish_one(outcome, binary_map, test, per_class);
        }
    } else {
        const dxr::TrainOutcome outcome = dxr::a2r_ot_train(data.train, opt.a2r, opt.fia);
        all_converged = finish_one(outcome, data.class_map, data.test, model_path);
    }
    return all_converged ? kExitOk : kExitBudget;
}

struct ClassifyOptions {
    std::string model_path;
    std::string trace_path;
    std::optional<std::size_t> segment_size;
};

int run_classify(const ClassifyOptions& opt) {
    const dxr::LoadedModel model = dxr::load_model(opt.model_path);
    const dxr::LabeledTrace trace = dxr::load_trace(opt.trace_path, 0, "unlabeled");
    const auto summary = dxr::classify(model.forest, model.meta.segment_size, trace,
                                       opt.segment_size, model.meta.fia_config);
    std::cout << "segment_index,label_id,label_name\n";
    for (std::size_t i = 0; i < summary.segment_labels.size(); ++i) {
        const int label = summary.segment_labels[i];
        const auto it = model.meta.class_map.find(label);
        std::cout << i << ',' << label << ','
                  << (it != model.meta.class_map.end() ? it->second : "?") << '\n';
    }
    const auto it = model.meta.class_map.find(summary.plurality_label);
    std::fprintf(stderr, "plurality %s (%d); segments per class:",
                 it != model.meta.class_map.end() ? it->second.c_str() : "?",
                 summary.plurality_label);
    for (const auto& [label, count] : summary.class_counts)
        std::fprintf(stderr, " %d:%zu", label, count);
    std::fprintf(stderr, "\n");
    return kExitOk;
}

struct EvaluateOptions {
    std::string model_path;
    std::string spec_path;                 // use the spec's test set
    std::vector<std::string> trace_args;   // "Label=path" pairs
};

int run_evaluate(const EvaluateOptions& opt) {
    const dxr::LoadedModel model = dxr::load_model(opt.model_path);

    std::vector<dxr::LabeledTrace> test;
    if (!opt.spec_path.empty()) {
        const auto spec = dxr::load_experiment_spec(opt.spec_path);
        auto data = dxr::load_experiment_data(spec);
        test = std::move(data.test);
    }
    for (const auto& arg : opt.trace_args) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos)
            throw dxr::Error("--trace expects Label=path, got '" + arg + "'");
        const std::string label = arg.substr(0, eq);
        const std::string path = arg.substr(eq + 1);
        int id = -1;
        for (const auto& [cid, name] : model.meta.class_map)
            if (name == label) id = cid;
        if (id < 0) throw dxr::Error("label '" + label + "' unknown to this model");
        test.push_back(dxr::load_trace(path, id, label));
    }
    if (test.empty()) throw dxr::Error("no test traces given (--spec or --trace)");

    const auto eval = dxr::evaluate_model(model.forest, model.meta.segment_size,
                                          model.meta.fia_config, test, model.meta.class_map);

    std::cout << "class_id,class_name,test_segments,accuracy_pct,fnr,precision,recall,f1\n";
    char buf[256];
    for (const auto& r : eval.rows) {
        std::snprintf(buf, sizeof buf, "%d,%s,%zu,%.2f,%.4f,%.4f,%.4f,%.4f\n", r.class_id,
                      r.class_name.c_str(), r.test_segments, 100.0 * r.metrics.accuracy,
                      r.metrics.fnr, r.metrics.precision, r.metrics.recall, r.metrics.f1);
        std::cout << buf;
    }
    std::fprintf(stderr, "%-24s %10s %12s %8s\n", "class", "segments", "accuracy(%)", "FNR");
    for (const auto& r : eval.rows)
        std::fprintf(stderr, "%-24s %10zu %12.2f %8.4f\n", r.class_name.c_str(),
                     r.test_segments, 100.0 * r.metrics.accuracy, r.metrics.fnr);
    std::fprintf(stderr, "overall multi-class accuracy %.2f%%\n", 100.0 * eval.overall);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"segment-based XR/Metaverse traffic classifier"};
    app.require_subcommand(1);
    const char* config_env = std::getenv("DXR_CONFIG");
    app.set_config("--config", config_env ? config_env : "",
                   "TOML/INI config file (DXR_CONFIG sets the default path)");

    SynthOptions synth_opt;
    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled trace");
    synth->add_option("--profile", synth_opt.profile_name, "preset profile name");
    synth->add_option("--profile-file", synth_opt.profile_file, "profile JSON file");
    synth->add_option("--out", synth_opt.out_prefix,
                      "output prefix (writes <prefix>.csv and <prefix>.truth.json)");
    synth->add_option("--duration", synth_opt.duration, "trace duration, seconds");
    synth->add_option("--frame-rate", synth_opt.frame_rate, "override the profile frame rate");
    synth->add_option("--seed", synth_opt.seed, "override the profile seed");
    synth->add_flag("--list", synth_opt.list, "list preset profiles and exit");

    FiaReportOptions fia_opt;
    auto* fia = app.add_subcommand("fia-report", "per-segment frame statistics (CSV)");
    fia->add_option("--trace", fia_opt.trace_path, "trace CSV (optionally .gz)")->required();
    fia->add_option("--segment-size", fia_opt.segment_size, "packets per segment");
    fia->add_option("--bin-width", fia_opt.fia.bin_width, "iat histogram bin width, seconds");
    double fia_len_abs = 0.0;
    auto* fia_len_opt =
        fia->add_option("--len-th-abs", fia_len_abs, "absolute length threshold, bytes");
    fia->add_flag("--per-trace", fia_opt.fia.per_trace_thresholds,
                  "compute thresholds once for the whole trace");

    TrainOptions train_opt;
    auto* train = app.add_subcommand("train", "run online training on an experiment spec");
    train->add_option("--spec", train_opt.spec_path, "experiment spec JSON")->required();
    train->add_option("--out", train_opt.model_path, "model output path (.dxr.json)");
    train->add_option("--segment-size", train_opt.a2r.initial_segment_size,
                      "initial segment size, packets");
    train->add_option("--increment", train_opt.a2r.segment_size_increment,
                      "segment size increment per iteration");
    train->add_option("--seed", train_opt.a2r.seed, "training seed");
    train->add_option("--vr", train_opt.a2r.v_r, "validation ratio in (0,1)");
    train->add_option("--e-th", train_opt.a2r.e_th, "error-delta threshold");
    train->add_option("--es-th", train_opt.a2r.es_th, "plateau count to stop");
    train->add_option("--ze-th", train_opt.a2r.ze_th, "zero-error count to stop");
    train->add_option("--s-max", train_opt.a2r.s_max, "training-segment budget");
    std::size_t train_trees = 0;
    train->add_option("--trees", train_trees, "trees per iteration (default 50*t_i)");
    train->add_flag("--fast", train_opt.fast, "fast profile: 200 trees per iteration");
    train->add_flag("--one-vs-rest", train_opt.a2r.one_vs_rest,
                    "train one binary model per class");
    train->add_option("--bin-width", train_opt.fia.bin_width, "FIA histogram bin width");
    double train_len_abs = 0.0;
    auto* train_len_opt =
        train->add_option("--len-th-abs", train_len_abs, "absolute FIA length threshold");

    ClassifyOptions classify_opt;
    auto* classify = app.add_subcommand("classify", "label a trace segment by segment");
    classify->add_option("--model", classify_opt.model_path, "model file")->required();
    classify->add_option("--trace", classify_opt.trace_path, "trace CSV")->required();
    std::size_t classify_size = 0;
    auto* classify_size_opt = classify->add_option(
        "--segment-size", classify_size, "must match the model's training segment size");

    EvaluateOptions eval_opt;
    auto* evaluate = app.add_subcommand("evaluate", "score a model against labeled traces");
    evaluate->add_option("--model", eval_opt.model_path, "model file")->required();
    evaluate->add_option("--spec", eval_opt.spec_path, "experiment spec (uses its test set)");
    evaluate->add_option("--trace", eval_opt.trace_args, "Label=path, repeatable");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*synth) return run_synth(synth_opt);
        if (*fia) {
            if (fia_len_opt->count() > 0) fia_opt.fia.len_th_abs = fia_len_abs;
            return run_fia_report(fia_opt);
        }
        if (*train) {
            for (const auto* o : train->get_options())
                if (o->count() > 0) train_opt.explicit_flags.insert(o->get_name());
            if (train_len_opt->count() > 0) train_opt.fia.len_th_abs = train_len_abs;
            if (train_trees > 0) train_opt.a2r.trees_override = train_trees;
            return run_train(train_opt);
        }
        if (*classify) {
            if (classify_size_opt->count() > 0) classify_opt.segment_size = classify_size;
            return run_classify(classify_opt);
        }
        if (*evaluate) return run_evaluate(eval_opt);
    } catch (const dxr::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
    return kExitUsage;
}
