#include "matcap/matntm.hpp"

#include <cmath>
#include <sstream>

namespace matcap {

namespace {

Mat softmax_flat(const Mat& x) {
    Mat y(x.rows(), x.cols());
    double mx = -1e300;
    for (double v : x.raw()) mx = std::max(mx, v);
    double sum = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        y.raw()[i] = std::exp(x.raw()[i] - mx);
        sum += y.raw()[i];
    }
    for (auto& v : y.raw()) v /= sum;
    return y;
}

}  // namespace

Mat address(const MemoryBank& memory, const Mat& prev_w, const Mat& key, double beta, double g,
            const Mat& shift, double gamma) {
    if (shift.size() != 3 || static_cast<int>(prev_w.size()) != memory.slots)
        throw_error(ErrorCode::ShapeMismatch, "address: shift must have 3 entries, prev_w one per slot");
    const double nk = frobenius_norm(key);
    Mat scores(memory.slots, 1);
    for (int i = 0; i < memory.slots; ++i) {
        Mat mi = memory.slot(i);
        scores(i, 0) = beta * frobenius_inner(key, mi) / (nk * frobenius_norm(mi) + 1e-8);
    }
    Mat wc = softmax_flat(scores);
    Mat wg(memory.slots, 1);
    for (int i = 0; i < memory.slots; ++i) wg(i, 0) = g * wc(i, 0) + (1.0 - g) * prev_w.raw()[i];
    Mat ws(memory.slots, 1);
    for (int i = 0; i < memory.slots; ++i) {
        double acc = 0.0;
        for (int o = -1; o <= 1; ++o)
            acc += wg((i - o + memory.slots) % memory.slots, 0) * shift.raw()[o + 1];
        ws(i, 0) = acc;
    }
    Mat w(memory.slots, 1);
    double total = 0.0;
    for (int i = 0; i < memory.slots; ++i) {
        w(i, 0) = std::exp(gamma * std::log(ws(i, 0) + 1e-16));
        total += w(i, 0);
    }
    for (auto& v : w.raw()) v /= total;
    return w;
}

Mat read(const MemoryBank& memory, const Mat& w) {
    Mat r(memory.n, memory.n);
    for (int i = 0; i < memory.slots; ++i) {
        const double wi = w.raw()[i];
        if (wi == 0.0) continue;
        for (int a = 0; a < memory.n; ++a)
            for (int b = 0; b < memory.n; ++b) r(a, b) += wi * memory.stack(i * memory.n + a, b);
    }
    return r;
}

MemoryBank write(const MemoryBank& memory, const Mat& w, const Mat& erase, const Mat& add) {
    MemoryBank out = memory;
    for (int i = 0; i < memory.slots; ++i) {
        const double wi = w.raw()[i];
        for (int a = 0; a < memory.n; ++a)
            for (int b = 0; b < memory.n; ++b) {
                double cur = memory.stack(i * memory.n + a, b);
                out.stack(i * memory.n + a, b) = cur * (1.0 - wi * erase(a, b)) + wi * add(a, b);
            }
    }
    return out;
}

MatNtmConfig copy_task_config() { return MatNtmConfig{}; }

MatNtmConfig recall_task_config() {
    MatNtmConfig cfg;
    cfg.hidden = {20, 20, 20, 20};
    return cfg;
}

MatNtmConfig baseline_config(MatNtmConfig cfg) {
    cfg.external_memory = false;
    cfg.biases = false;  // matches the published baseline parameter counts
    return cfg;
}

MatNtmConfig tiny_config(bool external_memory) {
    MatNtmConfig cfg;
    cfg.content_n = 2;
    cfg.token_n = 3;
    cfg.hidden = {8};
    cfg.slots = 8;
    cfg.mem_n = 3;
    cfg.external_memory = external_memory;
    return cfg;
}

MatNtmModel::MatNtmModel(MatNtmConfig cfg, SeededRng& rng) : cfg_(std::move(cfg)) {
    const int tn = cfg_.token_n;
    const int mn = cfg_.mem_n;
    int below = tn;
    for (size_t l = 0; l < cfg_.hidden.size(); ++l) {
        const int h = cfg_.hidden[l];
        LayerIdx layer;
        layer.in = add_bilinear("layer" + std::to_string(l) + ".in", below, below, h, h, rng);
        if (l == 0 && cfg_.external_memory)
            layer.rd = add_bilinear("layer0.read", mn, mn, h, h, rng);
        layer.rec = add_bilinear("layer" + std::to_string(l) + ".rec", h, h, h, h, rng);
        if (cfg_.biases) layer.rec.b = add_param("layer" + std::to_string(l) + ".bias", h, h, 0.0, rng);
        layers_.push_back(layer);
        below = h;
    }
    const int top = cfg_.hidden.back();
    if (cfg_.external_memory) {
        read_head_ = add_head("read", rng);
        write_head_ = add_head("write", rng);
        erase_ = add_bilinear("write.erase", top, top, mn, mn, rng);
        add_ = add_bilinear("write.add", top, top, mn, mn, rng);
        if (cfg_.biases) {
            erase_.b = add_param("write.erase.bias", mn, mn, 0.0, rng);
            add_.b = add_param("write.add.bias", mn, mn, 0.0, rng);
        }
    }
    out_ = add_bilinear("output", top, top, cfg_.content_n, cfg_.content_n, rng);
    if (cfg_.biases) out_.b = add_param("output.bias", cfg_.content_n, cfg_.content_n, 0.0, rng);
}

int MatNtmModel::add_param(const std::string& name, int rows, int cols, double sigma, SeededRng& rng) {
    Mat value(rows, cols);
    if (sigma > 0.0)
        for (auto& v : value.raw()) v = sigma * rng.normal();
    params_.push_back({name, std::move(value)});
    return static_cast<int>(params_.size() - 1);
}

MatNtmModel::BilinearIdx MatNtmModel::add_bilinear(const std::string& name, int in_rows, int in_cols,
                                                   int out_rows, int out_cols, SeededRng& rng) {
    BilinearIdx bl;
    // U: in_rows x out_rows, V: in_cols x out_cols; variance-preserving scales.
    const double gain = std::sqrt(cfg_.init_gain);
    bl.u = add_param(name + ".u", in_rows, out_rows, gain / std::sqrt(static_cast<double>(in_rows)), rng);
    bl.v = add_param(name + ".v", in_cols, out_cols, gain / std::sqrt(static_cast<double>(in_cols)), rng);
    return bl;
}

MatNtmModel::HeadIdx MatNtmModel::add_head(const std::string& name, SeededRng& rng) {
    const int top = cfg_.hidden.back();
    const int mn = cfg_.mem_n;
    HeadIdx head;
    head.key = add_bilinear(name + ".key", top, top, mn, mn, rng);
    head.beta = add_bilinear(name + ".beta", top, top, 1, 1, rng);
    head.gate = add_bilinear(name + ".gate", top, top, 1, 1, rng);
    head.shift = add_bilinear(name + ".shift", top, top, 1, 3, rng);
    head.gamma = add_bilinear(name + ".gamma", top, top, 1, 1, rng);
    if (cfg_.biases) {
        head.key.b = add_param(name + ".key.bias", mn, mn, 0.0, rng);
        head.beta.b = add_param(name + ".beta.bias", 1, 1, 0.0, rng);
        head.gate.b = add_param(name + ".gate.bias", 1, 1, 0.0, rng);
        head.shift.b = add_param(name + ".shift.bias", 1, 3, 0.0, rng);
        head.gamma.b = add_param(name + ".gamma.bias", 1, 1, 0.0, rng);
        params_[head.beta.b].value(0, 0) = cfg_.addressing_bias_init;
        params_[head.gamma.b].value(0, 0) = cfg_.addressing_bias_init;
        params_[head.gate.b].value(0, 0) = cfg_.gate_bias_init;
    }
    return head;
}

size_t MatNtmModel::param_count() const {
    size_t total = 0;
    for (const auto& p : params_) total += p.value.size();
    return total;
}

std::string MatNtmModel::parameter_table() const {
    std::ostringstream os;
    os << "name,rows,cols,count\n";
    for (const auto& p : params_)
        os << p.name << "," << p.value.rows() << "," << p.value.cols() << "," << p.value.size() << "\n";
    os << "total,,," << param_count() << "\n";
    return os.str();
}

std::vector<int> MatNtmModel::register_params(Tape& tape, bool trainable) const {
    std::vector<int> nodes(params_.size());
    for (size_t i = 0; i < params_.size(); ++i)
        nodes[i] = trainable ? tape.param(params_[i].value, static_cast<int>(i))
                             : tape.constant(params_[i].value);
    return nodes;
}

MatNtmModel::StepState MatNtmModel::initial_state(Tape& tape) const {
    StepState st;
    for (int h : cfg_.hidden) st.h.push_back(tape.constant(Mat::zeros(h, h)));
    if (cfg_.external_memory) {
        st.read = tape.constant(Mat::zeros(cfg_.mem_n, cfg_.mem_n));
        st.mem = tape.constant(Mat::constant(cfg_.slots * cfg_.mem_n, cfg_.mem_n, 1e-6));
        Mat one_hot(cfg_.slots, 1);
        one_hot(0, 0) = 1.0;
        st.w_read = tape.constant(one_hot);
        st.w_write = tape.constant(one_hot);
    }
    return st;
}

int MatNtmModel::apply_bilinear(Tape& tape, const BilinearIdx& bl, int x,
                                const std::vector<int>& pn) const {
    int y = tape.bilinear(pn[bl.u], x, pn[bl.v]);
    if (bl.b >= 0) y = tape.add(y, pn[bl.b]);
    return y;
}

int MatNtmModel::head_weights(Tape& tape, const HeadIdx& head, int hidden, int mem, int prev_w,
                              const std::vector<int>& pn) const {
    int key = apply_bilinear(tape, head.key, hidden, pn);
    int beta = tape.softplus_elem(apply_bilinear(tape, head.beta, hidden, pn));
    int gate = tape.sigmoid_elem(apply_bilinear(tape, head.gate, hidden, pn));
    int shift = tape.softmax_vec(apply_bilinear(tape, head.shift, hidden, pn));
    int gamma = tape.affine(tape.softplus_elem(apply_bilinear(tape, head.gamma, hidden, pn)), 1.0, 1.0);

    int sim = tape.bank_similarities(mem, key, cfg_.slots);
    int wc = tape.softmax_vec(tape.scalar_mul(sim, beta));
    int one_minus_g = tape.affine(gate, -1.0, 1.0);
    int wg = tape.add(tape.scalar_mul(wc, gate), tape.scalar_mul(prev_w, one_minus_g));
    int ws = tape.circular_convolve(wg, shift);
    return tape.elem_pow_normalize(ws, gamma);
}

int MatNtmModel::step(Tape& tape, StepState& state, int x_node, const std::vector<int>& pn) const {
    int below = x_node;
    for (size_t l = 0; l < layers_.size(); ++l) {
        const LayerIdx& layer = layers_[l];
        int pre = tape.add(apply_bilinear(tape, layer.in, below, pn),
                           tape.bilinear(pn[layer.rec.u], state.h[l], pn[layer.rec.v]));
        if (l == 0 && cfg_.external_memory)
            pre = tape.add(pre, apply_bilinear(tape, layer.rd, state.read, pn));
        if (layer.rec.b >= 0) pre = tape.add(pre, pn[layer.rec.b]);
        state.h[l] = tape.tanh_elem(pre);
        below = state.h[l];
    }
    const int top = state.h.back();
    if (cfg_.external_memory) {
        // write first, then read from the updated bank
        state.w_write = head_weights(tape, write_head_, top, state.mem, state.w_write, pn);
        int erase = tape.sigmoid_elem(apply_bilinear(tape, erase_, top, pn));
        int add = tape.tanh_elem(apply_bilinear(tape, add_, top, pn));
        state.mem = tape.bank_write(state.mem, state.w_write, erase, add, cfg_.slots);
        state.w_read = head_weights(tape, read_head_, top, state.mem, state.w_read, pn);
        state.read = tape.bank_read(state.mem, state.w_read, cfg_.slots);
    }
    return apply_bilinear(tape, out_, top, pn);
}

MatNtmModel::Rollout MatNtmModel::forward_sequence(Tape& tape, const std::vector<Mat>& inputs,
                                                   int target_len, const std::vector<Mat>* targets,
                                                   bool trainable, bool diagnostics) const {
    if (targets && static_cast<int>(targets->size()) != target_len)
        throw_error(ErrorCode::ShapeMismatch, "forward_sequence: targets must match target_len");
    std::vector<int> pn = register_params(tape, trainable);
    StepState state = initial_state(tape);
    const Mat zero_token = Mat::zeros(cfg_.token_n, cfg_.token_n);

    Rollout roll;
    auto record = [&](StepState& st) {
        if (!diagnostics || !cfg_.external_memory) return;
        roll.read_weights.push_back(tape.value(st.w_read));
        roll.write_weights.push_back(tape.value(st.w_write));
        roll.memory_snapshots.push_back(tape.value(st.mem));
    };

    for (const Mat& token : inputs) {
        if (token.rows() != cfg_.token_n || token.cols() != cfg_.token_n)
            throw_error(ErrorCode::ShapeMismatch, "forward_sequence: bad token shape");
        step(tape, state, tape.constant(token), pn);
        record(state);
    }
    int loss_acc = -1;
    for (int t = 0; t < target_len; ++t) {
        int logits = step(tape, state, tape.constant(zero_token), pn);
        int probs = tape.sigmoid_elem(logits);
        roll.logits.push_back(logits);
        roll.probs.push_back(probs);
        record(state);
        if (targets) {
            int l = tape.bce_loss(probs, tape.constant((*targets)[t]));
            loss_acc = loss_acc < 0 ? l : tape.add(loss_acc, l);
        }
    }
    if (targets && target_len > 0) roll.loss = tape.scale(loss_acc, 1.0 / target_len);
    return roll;
}

}  // namespace matcap
