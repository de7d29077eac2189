#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "matcap/matntm.hpp"

namespace matcap {

enum class TaskKind { Copy, AssociativeRecall };

struct TaskSample {
    std::vector<Mat> inputs;   // token_n x token_n, delimiter flags on the last row
    std::vector<Mat> targets;  // content_n x content_n binary
    TaskKind kind = TaskKind::Copy;
    int length = 0;            // l for copy, k (item count) for recall
    int item_len = 0;
    int query_index = 0;       // c, 1-based
};

/// sof + l Bernoulli(1/2) content tokens + eof; targets are the content matrices.
TaskSample gen_copy_task(int n, int l_min, int l_max, SeededRng& rng);
/// k items of (sof + item_len contents + eof), an end-of-input token, then the query
/// (item c's contents); targets are item c+1's contents.
TaskSample gen_assoc_recall(int n, int item_len, int k_min, int k_max, SeededRng& rng);

double bce_loss(const std::vector<Mat>& probs, const std::vector<Mat>& targets);
/// Mean over bits of |round(p) - t|.
double per_bit_error(const std::vector<Mat>& probs, const std::vector<Mat>& targets);

struct OptimizerState {
    std::vector<Mat> acc;  // running mean-square accumulators, one per parameter
    double decay = 0.99;
    double eps_stab = 1e-8;
};

void rmsprop_step(std::vector<ParamInfo>& params, const std::vector<Mat>& grads,
                  OptimizerState& state, double lr);

struct TrainConfig {
    TaskKind task = TaskKind::Copy;
    bool external_memory = true;  // MatNTM when true, Matrix RNN baseline otherwise
    int batch_size = 16;
    double lr = 1e-4;
    int max_iterations = 12500;  // 200k sequences at batch 16
    double clip_norm = 10.0;
    uint64_t seed = 11;
    int eval_every = 250;
    int eval_samples = 50;
    int eval_l_max = 10;  // held-out copy lengths 1..eval_l_max
    int content_n = 5;
    int l_min = 1, l_max = 20;               // copy task lengths
    int item_len = 2, k_min = 2, k_max = 10;  // recall task structure
    int checkpoint_every = 2500;
    int threads = 0;  // 0: take MATCAP_THREADS, else 1
    std::optional<double> early_stop_bit_error;
    std::optional<MatNtmConfig> model_override;

    /// Table-1 configuration for the task (or the override when one is set).
    MatNtmConfig model_config() const;
    TaskSample sample(SeededRng& rng) const;
};

struct IterationRecord {
    int iteration = 0;
    long long sequences = 0;
    double bce = 0.0;
    double bit_error = 0.0;
};

struct EvalRecord {
    int iteration = 0;
    double bce = 0.0;
    double bit_error = 0.0;
};

struct TrainResult {
    std::vector<IterationRecord> curve;
    std::vector<EvalRecord> evals;
    double best_eval_bce = 1e300;
    double best_eval_bit_error = 1.0;
    size_t param_count = 0;
    int iterations_run = 0;
    bool diverged = false;
};

using CheckpointHook =
    std::function<void(const MatNtmModel&, const OptimizerState&, const SeededRng&, int iteration)>;
using ProgressHook = std::function<void(const IterationRecord&)>;
using EvalHook = std::function<void(const EvalRecord&)>;

/// Deterministic seeded training loop: per-batch gradients are computed on worker
/// tapes (MATCAP_THREADS caps parallelism) and reduced in batch order, then clipped
/// at the global norm and applied with RMSprop. The optional hooks stream progress.
TrainResult train(const TrainConfig& config, MatNtmModel& model, const CheckpointHook& hook = {},
                  const ProgressHook& progress = {}, const EvalHook& eval_hook = {});

/// Held-out metrics on fresh samples from a fixed evaluation stream.
EvalRecord evaluate(const MatNtmModel& model, const TrainConfig& config, uint64_t eval_seed,
                    int samples, int l_max);

/// Mean cost over fresh samples per sweep value (sequence length l for copy, item
/// length for recall).
std::vector<std::pair<int, EvalRecord>> evaluate_generalization(const MatNtmModel& model,
                                                                TaskKind task,
                                                                const std::vector<int>& sweep,
                                                                uint64_t seed, int samples_per_value);

int resolve_threads(int requested);

}  // namespace matcap
