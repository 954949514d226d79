#pragma once

#include <cmath>
#include <cstdint>
#include <optional>

namespace dxr {

/// Online-training configuration. Segment size starts at
/// initial_segment_size and grows by segment_size_increment each iteration;
/// training runs until zero error, an error plateau, or the segment budget.
struct A2RConfig {
    std::size_t initial_segment_size = 500;
    std::size_t segment_size_increment = 500;
    std::size_t s_max = 200;       // training-segment budget (one consumed per iteration)
    std::size_t t_i = 50;          // tree-count factor: each iteration trains 50 * t_i trees
    double v_r = 1.0 / 3.0;        // validation ratio of the working pool
    double e_th = 0.02;            // error-delta threshold
    std::size_t es_th = 3;         // plateau count needed to stop
    std::size_t ze_th = 1;         // zero-error count needed to stop
    std::uint64_t seed = 42;

    std::optional<std::size_t> trees_override;  // e.g. the fast profile's 200
    bool one_vs_rest = false;

    std::size_t trees_per_iteration() const {
        return trees_override ? *trees_override : 50 * t_i;
    }
};

enum class StopReason { kContinue, kZeroError, kPlateau, kBudget };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::kContinue: return "continue";
        case StopReason::kZeroError: return "zero_error";
        case StopReason::kPlateau: return "plateau";
        case StopReason::kBudget: return "budget";
    }
    return "?";
}

/// Counter state threaded through the training loop. z_error counts
/// iterations with exactly zero validation error; e_stop counts iterations
/// whose error moved by at most e_th from the previous one.
struct StopState {
    std::size_t z_error = 0;
    std::size_t e_stop = 0;
    std::size_t iterations = 0;
    std::optional<double> prev_error;
    std::optional<double> last_delta;

    void observe(double e_curr, double e_th) {
        ++iterations;
        if (e_curr == 0.0) ++z_error;
        if (prev_error) {
            last_delta = *prev_error - e_curr;
            if (std::fabs(*last_delta) <= e_th) ++e_stop;
        }
        prev_error = e_curr;
    }
};

/// Pure stop decision; exactly one outcome. Zero-error wins over plateau,
/// plateau over budget.
inline StopReason evaluate_stop(const StopState& state, const A2RConfig& config) {
    if (state.z_error >= config.ze_th) return StopReason::kZeroError;
    if (state.e_stop >= config.es_th) return StopReason::kPlateau;
    if (state.iterations >= config.s_max) return StopReason::kBudget;
    return StopReason::kContinue;
}

}  // namespace dxr
