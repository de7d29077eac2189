#pragma once

#include <string>
#include <vector>

#include "matcap/rng.hpp"
#include "matcap/tape.hpp"

namespace matcap {

/// Slot memory of square matrices, stored as an (slots*n) x n vertical stack.
struct MemoryBank {
    int slots = 0;
    int n = 0;
    Mat stack;

    MemoryBank() = default;
    MemoryBank(int slots_, int n_, double fill) : slots(slots_), n(n_), stack(slots_ * n_, n_) {
        for (auto& v : stack.raw()) v = fill;
    }

    Mat slot(int i) const {
        Mat m(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) m(r, c) = stack(i * n + r, c);
        return m;
    }
    void set_slot(int i, const Mat& m) {
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) stack(i * n + r, c) = m(r, c);
    }
};

/// Per-step addressing state of one head.
struct HeadState {
    Mat w;       // slots x 1, nonnegative, sums to 1
    Mat key;     // n x n
    double beta = 0.0;
    double g = 0.5;
    Mat shift;   // 3 x 1, sums to 1
    double gamma = 1.0;
};

/// Content + location addressing: softmax(beta * cos(K, slot_i)), gate against the
/// previous weights, circular shift, sharpen.
Mat address(const MemoryBank& memory, const Mat& prev_w, const Mat& key, double beta, double g,
            const Mat& shift, double gamma);
Mat read(const MemoryBank& memory, const Mat& w);
MemoryBank write(const MemoryBank& memory, const Mat& w, const Mat& erase, const Mat& add);

struct MatNtmConfig {
    int content_n = 5;                   // payload matrices are content_n x content_n
    int token_n = 6;                     // one extra row of delimiter channels
    std::vector<int> hidden = {15, 15, 15};
    int slots = 120;
    int mem_n = 6;
    bool external_memory = true;         // false: plain Matrix RNN baseline
    bool biases = true;                  // the baseline ships bias-free (see docs)
    double init_gain = 1.0;              // scale on the variance-preserving weight init
    double addressing_bias_init = 0.0;   // initial beta/gamma pre-activation bias
    double gate_bias_init = 0.0;          // initial interpolation-gate pre-activation bias
};

MatNtmConfig copy_task_config();
MatNtmConfig recall_task_config();
MatNtmConfig baseline_config(MatNtmConfig cfg);
/// Tiny configuration for smoke tests and gradient checks.
MatNtmConfig tiny_config(bool external_memory);

struct ParamInfo {
    std::string name;
    Mat value;
};

class MatNtmModel {
  public:
    MatNtmModel(MatNtmConfig cfg, SeededRng& rng);

    const MatNtmConfig& config() const { return cfg_; }
    std::vector<ParamInfo>& params() { return params_; }
    const std::vector<ParamInfo>& params() const { return params_; }
    size_t param_count() const;
    /// name, rows, cols, count rows for the per-layer breakdown table.
    std::string parameter_table() const;

    struct StepState {
        std::vector<int> h;
        int read = -1;
        int mem = -1;
        int w_read = -1;
        int w_write = -1;
    };

    /// Registers every parameter on the tape; pass trainable=false for inference.
    std::vector<int> register_params(Tape& tape, bool trainable) const;
    StepState initial_state(Tape& tape) const;
    /// One controller + memory step; returns the content_n x content_n logits node.
    int step(Tape& tape, StepState& state, int x_node, const std::vector<int>& pn) const;

    struct Rollout {
        std::vector<int> logits;        // one node per output step
        std::vector<int> probs;         // sigmoid(logits)
        int loss = -1;                  // mean BCE when targets are given
        std::vector<Mat> read_weights;  // diagnostics, one slots x 1 row per step
        std::vector<Mat> write_weights;
        std::vector<Mat> memory_snapshots;
    };

    /// Consumes the input tokens, then runs target_len output steps on zero input.
    Rollout forward_sequence(Tape& tape, const std::vector<Mat>& inputs, int target_len,
                             const std::vector<Mat>* targets, bool trainable,
                             bool diagnostics) const;

  private:
    struct BilinearIdx {
        int u = -1, v = -1, b = -1;
    };
    struct LayerIdx {
        BilinearIdx in, rec, rd;
    };
    struct HeadIdx {
        BilinearIdx key, beta, gate, shift, gamma;
    };

    int add_param(const std::string& name, int rows, int cols, double sigma, SeededRng& rng);
    BilinearIdx add_bilinear(const std::string& name, int in_rows, int in_cols, int out_rows,
                             int out_cols, SeededRng& rng);
    int apply_bilinear(Tape& tape, const BilinearIdx& bl, int x, const std::vector<int>& pn) const;
    HeadIdx add_head(const std::string& name, SeededRng& rng);
    int head_weights(Tape& tape, const HeadIdx& head, int hidden, int mem, int prev_w,
                     const std::vector<int>& pn) const;

    MatNtmConfig cfg_;
    std::vector<ParamInfo> params_;
    std::vector<LayerIdx> layers_;
    HeadIdx read_head_, write_head_;
    BilinearIdx erase_, add_, out_;
};

}  // namespace matcap
