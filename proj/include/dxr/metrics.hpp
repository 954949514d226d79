#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dxr/error.hpp"

namespace dxr {

/// Row = true class, column = predicted class, both 1-based ids.
struct ConfusionMatrix {
    std::vector<std::vector<std::uint64_t>> counts;  // C x C
    std::vector<std::string> class_names;            // optional, size C when set

    std::size_t n_classes() const { return counts.size(); }

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (const auto& row : counts)
            for (auto c : row) t += c;
        return t;
    }

    std::uint64_t diagonal() const {
        std::uint64_t t = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
        return t;
    }
};

inline ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                                 int n_classes) {
    if (y_true.size() != y_pred.size()) throw LengthMismatchError();
    ConfusionMatrix m;
    m.counts.assign(static_cast<std::size_t>(n_classes),
                    std::vector<std::uint64_t>(static_cast<std::size_t>(n_classes), 0));
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i];
        const int p = y_pred[i];
        if (t < 1 || t > n_classes) throw LabelOutOfRangeError(t);
        if (p < 1 || p > n_classes) throw LabelOutOfRangeError(p);
        ++m.counts[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(p - 1)];
    }
    return m;
}

/// One-vs-rest metrics for a single class. `degenerate` marks 0/0 ratios
/// that were reported as 0.
struct ClassMetrics {
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
    double accuracy = 0.0;
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    double fnr = 0.0;
    bool degenerate = false;
};

/// Applies the one-vs-rest reduction per class:
///   accuracy  = (TP+TN) / (TP+TN+FP+FN)
///   recall    = TP / (TP+FN)
///   precision = TP / (TP+FP)
///   F1        = 2 PR / (P+R)
///   FNR       = FN / (TP+FN)
inline std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& m) {
    const std::uint64_t total = m.total();
    if (total == 0) throw EmptyMatrixError();

    std::vector<ClassMetrics> out(m.n_classes());
    for (std::size_t c = 0; c < m.n_classes(); ++c) {
        ClassMetrics& cm = out[c];
        cm.tp = m.counts[c][c];
        for (std::size_t p = 0; p < m.n_classes(); ++p)
            if (p != c) cm.fn += m.counts[c][p];
        for (std::size_t t = 0; t < m.n_classes(); ++t)
            if (t != c) cm.fp += m.counts[t][c];
        cm.tn = total - cm.tp - cm.fn - cm.fp;

        cm.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(total);
        if (cm.tp + cm.fn > 0) {
            cm.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
            cm.fnr = static_cast<double>(cm.fn) / static_cast<double>(cm.tp + cm.fn);
        } else {
            cm.degenerate = true;
        }
        if (cm.tp + cm.fp > 0)
            cm.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
        else
            cm.degenerate = true;
        if (cm.precision + cm.recall > 0.0)
            cm.f1 = 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall);
        else
            cm.degenerate = true;
    }
    return out;
}

/// Plain multi-class accuracy (diagonal over total), reported alongside the
/// one-vs-rest per-class accuracies.
inline double overall_accuracy(const ConfusionMatrix& m) {
    const std::uint64_t total = m.total();
    if (total == 0) throw EmptyMatrixError();
    return static_cast<double>(m.diagonal()) / static_cast<double>(total);
}

}  // namespace dxr
