#include "matcap/training.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

namespace matcap {

namespace {

Mat content_token(const Mat& content, int token_n) {
    Mat t(token_n, token_n);
    for (int i = 0; i < content.rows(); ++i)
        for (int j = 0; j < content.cols(); ++j) t(i, j) = content(i, j);
    return t;
}

Mat flag_token(int token_n, int channel) {
    Mat t(token_n, token_n);
    t(token_n - 1, channel) = 1.0;
    return t;
}

Mat bernoulli(int n, SeededRng& rng) {
    Mat m(n, n);
    for (auto& v : m.raw()) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
    return m;
}

}  // namespace

TaskSample gen_copy_task(int n, int l_min, int l_max, SeededRng& rng) {
    if (l_min < 1 || l_min > l_max) throw_error(ErrorCode::ConfigError, "gen_copy_task: need 1 <= l_min <= l_max");
    const int token_n = n + 1;
    TaskSample s;
    s.kind = TaskKind::Copy;
    s.length = rng.uniform_int(l_min, l_max);
    s.inputs.push_back(flag_token(token_n, 0));  // sof
    for (int i = 0; i < s.length; ++i) {
        Mat content = bernoulli(n, rng);
        s.inputs.push_back(content_token(content, token_n));
        s.targets.push_back(std::move(content));
    }
    s.inputs.push_back(flag_token(token_n, 1));  // eof
    return s;
}

TaskSample gen_assoc_recall(int n, int item_len, int k_min, int k_max, SeededRng& rng) {
    if (k_min < 2 || k_min > k_max) throw_error(ErrorCode::ConfigError, "gen_assoc_recall: need 2 <= k_min <= k_max");
    const int token_n = n + 1;
    TaskSample s;
    s.kind = TaskKind::AssociativeRecall;
    s.length = rng.uniform_int(k_min, k_max);
    s.item_len = item_len;
    std::vector<std::vector<Mat>> items(s.length);
    for (auto& item : items) {
        item.reserve(item_len);
        for (int j = 0; j < item_len; ++j) item.push_back(bernoulli(n, rng));
    }
    for (const auto& item : items) {
        s.inputs.push_back(flag_token(token_n, 0));
        for (const Mat& content : item) s.inputs.push_back(content_token(content, token_n));
        s.inputs.push_back(flag_token(token_n, 1));
    }
    s.inputs.push_back(flag_token(token_n, 2));  // end of input, query follows
    s.query_index = rng.uniform_int(1, s.length - 1);
    for (const Mat& content : items[s.query_index - 1])
        s.inputs.push_back(content_token(content, token_n));
    s.targets = items[s.query_index];
    return s;
}

double bce_loss(const std::vector<Mat>& probs, const std::vector<Mat>& targets) {
    if (probs.size() != targets.size()) throw_error(ErrorCode::ShapeMismatch, "bce_loss: step count mismatch");
    double loss = 0.0;
    size_t bits = 0;
    for (size_t t = 0; t < probs.size(); ++t) {
        probs[t].check_same(targets[t]);
        for (size_t i = 0; i < probs[t].size(); ++i) {
            double p = std::min(1.0 - 1e-7, std::max(1e-7, probs[t].raw()[i]));
            double y = targets[t].raw()[i];
            loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
            ++bits;
        }
    }
    return bits ? loss / static_cast<double>(bits) : 0.0;
}

double per_bit_error(const std::vector<Mat>& probs, const std::vector<Mat>& targets) {
    if (probs.size() != targets.size())
        throw_error(ErrorCode::ShapeMismatch, "per_bit_error: step count mismatch");
    double wrong = 0.0;
    size_t bits = 0;
    for (size_t t = 0; t < probs.size(); ++t) {
        probs[t].check_same(targets[t]);
        for (size_t i = 0; i < probs[t].size(); ++i) {
            wrong += std::abs((probs[t].raw()[i] >= 0.5 ? 1.0 : 0.0) - targets[t].raw()[i]);
            ++bits;
        }
    }
    return bits ? wrong / static_cast<double>(bits) : 0.0;
}

void rmsprop_step(std::vector<ParamInfo>& params, const std::vector<Mat>& grads,
                  OptimizerState& state, double lr) {
    if (params.size() != grads.size()) throw_error(ErrorCode::ShapeMismatch, "rmsprop_step: grads mismatch");
    if (state.acc.size() != params.size()) {
        state.acc.clear();
        for (const auto& p : params) state.acc.emplace_back(p.value.rows(), p.value.cols());
    }
    for (size_t i = 0; i < params.size(); ++i) {
        Mat& theta = params[i].value;
        const Mat& g = grads[i];
        Mat& acc = state.acc[i];
        theta.check_same(g);
        for (size_t e = 0; e < theta.size(); ++e) {
            acc.raw()[e] = state.decay * acc.raw()[e] + (1.0 - state.decay) * g.raw()[e] * g.raw()[e];
            theta.raw()[e] -= lr * g.raw()[e] / (std::sqrt(acc.raw()[e]) + state.eps_stab);
        }
    }
}

MatNtmConfig TrainConfig::model_config() const {
    if (model_override) return *model_override;
    MatNtmConfig cfg = task == TaskKind::Copy ? copy_task_config() : recall_task_config();
    cfg.content_n = content_n;
    cfg.token_n = content_n + 1;
    if (!external_memory) cfg = baseline_config(cfg);
    return cfg;
}

TaskSample TrainConfig::sample(SeededRng& rng) const {
    return task == TaskKind::Copy ? gen_copy_task(content_n, l_min, l_max, rng)
                                  : gen_assoc_recall(content_n, item_len, k_min, k_max, rng);
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("MATCAP_THREADS")) {
        int t = std::atoi(env);
        if (t > 0) return t;
    }
    return 1;
}

namespace {

struct SampleResult {
    std::vector<Mat> grads;
    double loss = 0.0;
    double bit_error = 0.0;
};

void run_sample(const MatNtmModel& model, const TaskSample& sample, Tape& tape, SampleResult& out) {
    tape.rewind();
    auto roll = model.forward_sequence(tape, sample.inputs, static_cast<int>(sample.targets.size()),
                                       &sample.targets, true, false);
    tape.backward(roll.loss);
    out.loss = tape.value(roll.loss)(0, 0);
    std::vector<Mat> probs;
    probs.reserve(roll.probs.size());
    for (int node : roll.probs) probs.push_back(tape.value(node));
    out.bit_error = per_bit_error(probs, sample.targets);
    out.grads.resize(model.params().size());
    // parameter node ids are the first registrations on the tape, in order
    for (size_t i = 0; i < model.params().size(); ++i) out.grads[i] = tape.grad(static_cast<int>(i));
}

}  // namespace

TrainResult train(const TrainConfig& config, MatNtmModel& model, const CheckpointHook& hook,
                  const ProgressHook& progress, const EvalHook& eval_hook) {
    TrainResult result;
    result.param_count = model.param_count();
    const int threads = resolve_threads(config.threads);
    SeededRng task_rng(config.seed * 7919 + 1);
    OptimizerState opt;

    std::vector<Tape> tapes(threads);
    std::vector<TaskSample> batch(config.batch_size);
    std::vector<SampleResult> results(config.batch_size);

    for (int iter = 0; iter < config.max_iterations; ++iter) {
        for (int b = 0; b < config.batch_size; ++b) batch[b] = config.sample(task_rng);

        if (threads == 1) {
            for (int b = 0; b < config.batch_size; ++b) run_sample(model, batch[b], tapes[0], results[b]);
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < threads; ++t)
                pool.emplace_back([&, t] {
                    for (int b = t; b < config.batch_size; b += threads)
                        run_sample(model, batch[b], tapes[t], results[b]);
                });
            for (auto& th : pool) th.join();
        }

        // deterministic reduction in batch order
        std::vector<Mat> grads(model.params().size());
        for (size_t i = 0; i < grads.size(); ++i)
            grads[i] = Mat(model.params()[i].value.rows(), model.params()[i].value.cols());
        double loss = 0.0, bit_error = 0.0;
        for (int b = 0; b < config.batch_size; ++b) {
            loss += results[b].loss;
            bit_error += results[b].bit_error;
            for (size_t i = 0; i < grads.size(); ++i) grads[i] += results[b].grads[i];
        }
        loss /= config.batch_size;
        bit_error /= config.batch_size;
        const double inv_batch = 1.0 / config.batch_size;
        for (auto& g : grads) g *= inv_batch;

        if (!std::isfinite(loss)) {
            result.diverged = true;
            if (hook) hook(model, opt, task_rng, iter);
            return result;
        }

        double norm_sq = 0.0;
        for (const auto& g : grads) norm_sq += frobenius_inner(g, g);
        const double norm = std::sqrt(norm_sq);
        if (config.clip_norm > 0.0 && norm > config.clip_norm) {
            const double scale = config.clip_norm / norm;
            for (auto& g : grads) g *= scale;
        }
        rmsprop_step(model.params(), grads, opt, config.lr);

        result.curve.push_back({iter, static_cast<long long>(iter + 1) * config.batch_size, loss, bit_error});
        result.iterations_run = iter + 1;
        if (progress) progress(result.curve.back());

        const bool last = iter + 1 == config.max_iterations;
        if (config.eval_every > 0 && ((iter + 1) % config.eval_every == 0 || last)) {
            EvalRecord ev = evaluate(model, config, config.seed ^ 0x5eedba5eull, config.eval_samples,
                                     config.eval_l_max);
            ev.iteration = iter + 1;
            result.evals.push_back(ev);
            if (eval_hook) eval_hook(ev);
            result.best_eval_bce = std::min(result.best_eval_bce, ev.bce);
            result.best_eval_bit_error = std::min(result.best_eval_bit_error, ev.bit_error);
            if (config.early_stop_bit_error && ev.bit_error < *config.early_stop_bit_error) {
                if (hook) hook(model, opt, task_rng, iter + 1);
                return result;
            }
        }
        if (hook && config.checkpoint_every > 0 && ((iter + 1) % config.checkpoint_every == 0 || last))
            hook(model, opt, task_rng, iter + 1);
    }
    return result;
}

EvalRecord evaluate(const MatNtmModel& model, const TrainConfig& config, uint64_t eval_seed,
                    int samples, int l_max) {
    SeededRng rng(eval_seed);
    TrainConfig eval_cfg = config;
    eval_cfg.l_min = 1;
    eval_cfg.l_max = l_max;
    Tape tape;
    double bce_acc = 0.0, bit_acc = 0.0;
    for (int i = 0; i < samples; ++i) {
        TaskSample s = eval_cfg.sample(rng);
        tape.rewind();
        auto roll = model.forward_sequence(tape, s.inputs, static_cast<int>(s.targets.size()), nullptr,
                                           false, false);
        std::vector<Mat> probs;
        for (int node : roll.probs) probs.push_back(tape.value(node));
        bce_acc += bce_loss(probs, s.targets);
        bit_acc += per_bit_error(probs, s.targets);
    }
    EvalRecord ev;
    ev.bce = bce_acc / samples;
    ev.bit_error = bit_acc / samples;
    return ev;
}

std::vector<std::pair<int, EvalRecord>> evaluate_generalization(const MatNtmModel& model,
                                                                TaskKind task,
                                                                const std::vector<int>& sweep,
                                                                uint64_t seed, int samples_per_value) {
    std::vector<std::pair<int, EvalRecord>> out;
    Tape tape;
    for (int value : sweep) {
        SeededRng rng(seed + static_cast<uint64_t>(value) * 1315423911ull);
        double bce_acc = 0.0, bit_acc = 0.0;
        for (int i = 0; i < samples_per_value; ++i) {
            TaskSample s = task == TaskKind::Copy
                               ? gen_copy_task(model.config().content_n, value, value, rng)
                               : gen_assoc_recall(model.config().content_n, value, 2, 10, rng);
            tape.rewind();
            auto roll = model.forward_sequence(tape, s.inputs, static_cast<int>(s.targets.size()),
                                               nullptr, false, false);
            std::vector<Mat> probs;
            for (int node : roll.probs) probs.push_back(tape.value(node));
            bce_acc += bce_loss(probs, s.targets);
            bit_acc += per_bit_error(probs, s.targets);
        }
        EvalRecord ev;
        ev.bce = bce_acc / samples_per_value;
        ev.bit_error = bit_acc / samples_per_value;
        out.emplace_back(value, ev);
    }
    return out;
}

}  // namespace matcap
