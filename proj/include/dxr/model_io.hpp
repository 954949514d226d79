#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "dxr/a2rot.hpp"
#include "dxr/error.hpp"
#include "dxr/fia.hpp"
#include "dxr/forest.hpp"
#include "dxr/fvr.hpp"

namespace dxr {

inline constexpr int kModelFormatVersion = 1;

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

inline std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(bytes);
}

/// Everything a deployed classifier needs besides the forest itself.
struct ModelMetadata {
    std::size_t segment_size = 0;
    std::map<int, std::string> class_map;  // id -> service name
    FiaConfig fia_config;
    std::string manifest_digest;  // sha256 of the sibling manifest, if any
};

struct LoadedModel {
    Forest forest;
    ModelMetadata meta;
};

namespace detail {

inline nlohmann::json fia_config_to_json(const FiaConfig& c) {
    nlohmann::json j{{"bin_width", c.bin_width},
                     {"prominence_fraction", c.prominence_fraction},
                     {"min_packets_per_frame", c.min_packets_per_frame},
                     {"fallback_dur_th", c.fallback_dur_th},
                     {"per_trace_thresholds", c.per_trace_thresholds}};
    if (c.len_th_abs) j["len_th_abs"] = *c.len_th_abs;
    return j;
}

inline FiaConfig fia_config_from_json(const nlohmann::json& j) {
    FiaConfig c;
    c.bin_width = j.at("bin_width").get<double>();
    c.prominence_fraction = j.at("prominence_fraction").get<double>();
    c.min_packets_per_frame = j.at("min_packets_per_frame").get<std::size_t>();
    c.fallback_dur_th = j.at("fallback_dur_th").get<double>();
    c.per_trace_thresholds = j.value("per_trace_thresholds", false);
    if (j.contains("len_th_abs")) c.len_th_abs = j.at("len_th_abs").get<double>();
    return c;
}

/// Forest payload: per-tree node arrays of
/// [feature_index, threshold, left, right, leaf counts...].
inline nlohmann::json forest_payload(const Forest& forest) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : forest.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& node : tree.nodes) {
            nlohmann::json n = nlohmann::json::array();
            n.push_back(node.feature_index);
            n.push_back(node.threshold);
            n.push_back(node.left);
            n.push_back(node.right);
            for (auto c : node.class_counts) n.push_back(c);
            nodes.push_back(std::move(n));
        }
        trees.push_back(std::move(nodes));
    }
    return nlohmann::json{{"n_classes", forest.n_classes},
                          {"feature_count", forest.feature_count},
                          {"seed", forest.seed},
                          {"params",
                           {{"max_depth", forest.params.max_depth},
                            {"min_leaf_samples", forest.params.min_leaf_samples},
                            {"features_per_split", forest.params.features_per_split},
                            {"bootstrap", forest.params.bootstrap}}},
                          {"trees", std::move(trees)}};
}

inline Forest forest_from_payload(const nlohmann::json& j) {
    Forest forest;
    forest.n_classes = j.at("n_classes").get<int>();
    forest.feature_count = j.at("feature_count").get<std::size_t>();
    forest.seed = j.at("seed").get<std::uint64_t>();
    const auto& p = j.at("params");
    forest.params.max_depth = p.at("max_depth").get<std::size_t>();
    forest.params.min_leaf_samples = p.at("min_leaf_samples").get<std::size_t>();
    forest.params.features_per_split = p.at("features_per_split").get<std::size_t>();
    forest.params.bootstrap = p.at("bootstrap").get<bool>();
    for (const auto& nodes : j.at("trees")) {
        Tree tree;
        for (const auto& n : nodes) {
            if (!n.is_array() || n.size() < 4) throw CorruptFileError("malformed tree node");
            TreeNode node;
            node.feature_index = n[0].get<int>();
            node.threshold = n[1].get<double>();
            node.left = n[2].get<std::int32_t>();
            node.right = n[3].get<std::int32_t>();
            for (std::size_t i = 4; i < n.size(); ++i)
                node.class_counts.push_back(n[i].get<std::uint32_t>());
            tree.nodes.push_back(std::move(node));
        }
        forest.trees.push_back(std::move(tree));
    }
    return forest;
}

}  // namespace detail

/// Serializes forest + metadata as a versioned, checksummed JSON document.
inline void save_model(const Forest& forest, const ModelMetadata& meta,
                       const std::string& path) {
    nlohmann::json payload{{"segment_size", meta.segment_size},
                           {"forest", detail::forest_payload(forest)}};
    nlohmann::json class_map;
    for (const auto& [id, name] : meta.class_map) class_map[std::to_string(id)] = name;
    payload["class_map"] = std::move(class_map);
    payload["fia_config"] = detail::fia_config_to_json(meta.fia_config);
    payload["feature_names"] = kFeatureNames;

    nlohmann::json doc{{"format", "dxr-model"},
                       {"format_version", kModelFormatVersion},
                       {"payload", payload},
                       {"payload_checksum", sha256_hex(payload.dump())},
                       {"manifest_digest", meta.manifest_digest}};

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp);
        out << doc.dump(2) << '\n';
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw Error("cannot move " + tmp + " into place");
}

inline void save_model(const TrainOutcome& outcome, const ModelMetadata& meta,
                       const std::string& path) {
    ModelMetadata m = meta;
    m.segment_size = outcome.s;
    save_model(outcome.final_model, m, path);
}

/// Rejects unknown versions and any payload whose checksum disagrees.
inline LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError(std::string("not parseable as a model file: ") + e.what());
    }
    if (!doc.is_object() || doc.value("format", "") != "dxr-model")
        throw CorruptFileError("missing dxr-model marker");
    const int version = doc.value("format_version", -1);
    if (version != kModelFormatVersion)
        throw VersionMismatchError("model format version " + std::to_string(version) +
                                   ", supported " + std::to_string(kModelFormatVersion));
    if (!doc.contains("payload") || !doc.contains("payload_checksum"))
        throw CorruptFileError("payload or checksum missing");
    const std::string checksum = sha256_hex(doc["payload"].dump());
    if (checksum != doc["payload_checksum"].get<std::string>())
        throw CorruptFileError("payload checksum mismatch");

    const auto& payload = doc["payload"];
    LoadedModel model;
    try {
        model.forest = detail::forest_from_payload(payload.at("forest"));
        model.meta.segment_size = payload.at("segment_size").get<std::size_t>();
        for (const auto& [key, value] : payload.at("class_map").items())
            model.meta.class_map[std::stoi(key)] = value.get<std::string>();
        model.meta.fia_config = detail::fia_config_from_json(payload.at("fia_config"));
        model.meta.manifest_digest = doc.value("manifest_digest", "");
        const auto names = payload.at("feature_names").get<std::vector<std::string>>();
        for (std::size_t i = 0; i < kFeatureCount && i < names.size(); ++i)
            if (names[i] != kFeatureNames[i])
                throw VersionMismatchError("feature order contract changed at index " +
                                           std::to_string(i));
        if (names.size() != kFeatureCount)
            throw VersionMismatchError("feature name list has wrong length");
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError(std::string("payload malformed: ") + e.what());
    }
    return model;
}

/// The training manifest: config echo, per-iteration history (without wall
/// clocks, so identical runs serialize identically), dataset fingerprints,
/// and final metrics.
struct DatasetFingerprint {
    std::string path;
    std::string label;
    std::string sha256;
    std::size_t packets = 0;
};

inline nlohmann::json manifest_json(const A2RConfig& config, const FiaConfig& fia_config,
                                    const TrainOutcome& outcome,
                                    const std::vector<DatasetFingerprint>& datasets,
                                    const std::map<int, std::string>& class_map,
                                    const nlohmann::json& final_metrics) {
    nlohmann::json iterations = nlohmann::json::array();
    for (const auto& rec : outcome.history) {
        nlohmann::json it{{"segment_size", rec.segment_size},
                          {"segments_used", rec.segments_used},
                          {"val_error", rec.val_error},
                          {"z_error", rec.z_error},
                          {"e_stop", rec.e_stop}};
        it["delta_error"] = rec.delta_error ? nlohmann::json(*rec.delta_error)
                                            : nlohmann::json(nullptr);
        iterations.push_back(std::move(it));
    }
    nlohmann::json ds = nlohmann::json::array();
    for (const auto& d : datasets)
        ds.push_back({{"path", d.path},
                      {"label", d.label},
                      {"sha256", d.sha256},
                      {"packets", d.packets}});
    nlohmann::json classes;
    for (const auto& [id, name] : class_map) classes[std::to_string(id)] = name;

    return nlohmann::json{
        {"format", "dxr-manifest"},
        {"format_version", kModelFormatVersion},
        {"config",
         {{"initial_segment_size", config.initial_segment_size},
          {"segment_size_increment", config.segment_size_increment},
          {"s_max", config.s_max},
          {"t_i", config.t_i},
          {"v_r", config.v_r},
          {"e_th", config.e_th},
          {"es_th", config.es_th},
          {"ze_th", config.ze_th},
          {"seed", config.seed},
          {"trees_per_iteration", config.trees_per_iteration()},
          {"one_vs_rest", config.one_vs_rest}}},
        {"fia_config", detail::fia_config_to_json(fia_config)},
        {"datasets", std::move(ds)},
        {"class_map", std::move(classes)},
        {"iterations", std::move(iterations)},
        {"result",
         {{"segment_size", outcome.s},
          {"training_segments", outcome.s_t},
          {"converged", outcome.converged},
          {"stop_reason", to_string(outcome.stop_reason)},
          {"final_val_error",
           outcome.history.empty() ? 0.0 : outcome.history.back().val_error},
          {"trees", outcome.final_model.trees.size()}}},
        {"final_metrics", final_metrics}};
}

inline void write_manifest(const nlohmann::json& manifest, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp);
        out << manifest.dump(2) << '\n';
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw Error("cannot move " + tmp + " into place");
}

}  // namespace dxr
