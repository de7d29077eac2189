#include "matcap/tape.hpp"

#include <algorithm>
#include <cmath>

namespace matcap {

namespace {

constexpr double kBceFloor = 1e-7;
constexpr double kCosineDelta = 1e-8;
constexpr double kPowFloor = 1e-16;

void shape_like(Mat& m, int rows, int cols) {
    if (m.rows() != rows || m.cols() != cols || m.size() != static_cast<size_t>(rows) * cols)
        m.resize(rows, cols);
}

// out (+)= A * B; out must not alias the inputs.
void mul_into(Mat& out, const Mat& a, const Mat& b, bool accumulate) {
    const int m = a.rows(), k = a.cols(), n = b.cols();
    if (!accumulate) {
        shape_like(out, m, n);
        std::fill(out.raw().begin(), out.raw().end(), 0.0);
    }
    for (int i = 0; i < m; ++i) {
        double* oi = out.data() + static_cast<size_t>(i) * n;
        const double* ai = a.data() + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double aip = ai[p];
            if (aip == 0.0) continue;
            const double* bp = b.data() + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) oi[j] += aip * bp[j];
        }
    }
}

// out (+)= A^T * B
void mul_tn_into(Mat& out, const Mat& a, const Mat& b, bool accumulate) {
    const int m = a.cols(), k = a.rows(), n = b.cols();
    if (!accumulate) {
        shape_like(out, m, n);
        std::fill(out.raw().begin(), out.raw().end(), 0.0);
    }
    for (int p = 0; p < k; ++p) {
        const double* ap = a.data() + static_cast<size_t>(p) * m;
        const double* bp = b.data() + static_cast<size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const double api = ap[i];
            if (api == 0.0) continue;
            double* oi = out.data() + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) oi[j] += api * bp[j];
        }
    }
}

// out (+)= A * B^T
void mul_nt_into(Mat& out, const Mat& a, const Mat& b, bool accumulate) {
    const int m = a.rows(), k = a.cols(), n = b.rows();
    if (!accumulate) {
        shape_like(out, m, n);
        std::fill(out.raw().begin(), out.raw().end(), 0.0);
    }
    for (int i = 0; i < m; ++i) {
        const double* ai = a.data() + static_cast<size_t>(i) * k;
        double* oi = out.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b.data() + static_cast<size_t>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
            oi[j] += s;
        }
    }
}

double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }
double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(std::min(x, 30.0))); }
double clamp_prob(double p) { return std::min(1.0 - kBceFloor, std::max(kBceFloor, p)); }

}  // namespace

Tape::Node& Tape::push(Op op, int p0, int p1, int p2, int p3) {
    if (used_ == nodes_.size()) nodes_.emplace_back();
    Node& n = nodes_[used_++];
    n.op = op;
    n.p0 = p0;
    n.p1 = p1;
    n.p2 = p2;
    n.p3 = p3;
    n.c0 = n.c1 = 0.0;
    n.aux = 0;
    n.param_id = -1;
    n.needs_grad = any_needs_grad(n);
    return n;
}

bool Tape::any_needs_grad(const Node& n) const {
    for (int p : {n.p0, n.p1, n.p2, n.p3})
        if (p >= 0 && nodes_[p].needs_grad) return true;
    return false;
}

int Tape::param(const Mat& value, int param_id) {
    Node& n = push(Op::Param);
    n.val = value;
    n.param_id = param_id;
    n.needs_grad = true;
    return index_of(n);
}

int Tape::constant(const Mat& value) {
    Node& n = push(Op::Constant);
    n.val = value;
    return index_of(n);
}

int Tape::constant_scalar(double v) {
    Node& n = push(Op::Constant);
    shape_like(n.val, 1, 1);
    n.val(0, 0) = v;
    return index_of(n);
}

int Tape::matmul(int a, int b) {
    Node& n = push(Op::MatMul, a, b);
    if (nodes_[a].val.cols() != nodes_[b].val.rows())
        throw_error(ErrorCode::ShapeMismatch, "tape matmul: inner dimensions differ");
    mul_into(n.val, nodes_[a].val, nodes_[b].val, false);
    return index_of(n);
}

int Tape::bilinear(int u, int x, int v) {
    Node& n = push(Op::Bilinear, u, x, v);
    const Mat& mu = nodes_[u].val;
    const Mat& mx = nodes_[x].val;
    const Mat& mv = nodes_[v].val;
    if (mu.rows() != mx.rows() || mx.cols() != mv.rows())
        throw_error(ErrorCode::ShapeMismatch, "tape bilinear: shapes do not compose");
    mul_tn_into(scratch_, mu, mx, false);
    mul_into(n.val, scratch_, mv, false);
    return index_of(n);
}

int Tape::add(int a, int b) {
    Node& n = push(Op::Add, a, b);
    nodes_[a].val.check_same(nodes_[b].val);
    shape_like(n.val, nodes_[a].val.rows(), nodes_[a].val.cols());
    for (size_t i = 0; i < n.val.size(); ++i) n.val.raw()[i] = nodes_[a].val.raw()[i] + nodes_[b].val.raw()[i];
    return index_of(n);
}

int Tape::subtract(int a, int b) {
    Node& n = push(Op::Sub, a, b);
    nodes_[a].val.check_same(nodes_[b].val);
    shape_like(n.val, nodes_[a].val.rows(), nodes_[a].val.cols());
    for (size_t i = 0; i < n.val.size(); ++i) n.val.raw()[i] = nodes_[a].val.raw()[i] - nodes_[b].val.raw()[i];
    return index_of(n);
}

int Tape::hadamard(int a, int b) {
    Node& n = push(Op::Hadamard, a, b);
    nodes_[a].val.check_same(nodes_[b].val);
    shape_like(n.val, nodes_[a].val.rows(), nodes_[a].val.cols());
    for (size_t i = 0; i < n.val.size(); ++i) n.val.raw()[i] = nodes_[a].val.raw()[i] * nodes_[b].val.raw()[i];
    return index_of(n);
}

int Tape::affine(int a, double scale, double shift) {
    Node& n = push(Op::Affine, a);
    n.c0 = scale;
    n.c1 = shift;
    shape_like(n.val, nodes_[a].val.rows(), nodes_[a].val.cols());
    for (size_t i = 0; i < n.val.size(); ++i) n.val.raw()[i] = scale * nodes_[a].val.raw()[i] + shift;
    return index_of(n);
}

int Tape::scale(int a, double c) { return affine(a, c, 0.0); }

int Tape::tanh_elem(int a) {
    Node& n = push(Op::Tanh, a);
    shape_like(n.val, nodes_[a].val.rows(), nodes_[a].val.cols());
    for (size_t i = 0; i < n.val.size(); ++i) n.val.raw()[i] = std::tanh(nodes_[a].val.raw()[i]);
    return index_of(n);
}

int Tape::sigmoid_elem(int a) {
    Node& n = push(Op::Sigmoid, a);
    shape_like(n.val, nodes_[a].val.rows(), nodes_[a].val.cols());
    for (size_t i = 0; i < n.val.size(); ++i) n.val.raw()[i] = sigmoid(nodes_[a].val.raw()[i]);
    return index_of(n);
}

int Tape::relu_elem(int a) {
    Node& n = push(Op::Relu, a);
    shape_like(n.val, nodes_[a].val.rows(), nodes_[a].val.cols());
    for (size_t i = 0; i < n.val.size(); ++i) n.val.raw()[i] = std::max(0.0, nodes_[a].val.raw()[i]);
    return index_of(n);
}

int Tape::softplus_elem(int a) {
    Node& n = push(Op::Softplus, a);
    shape_like(n.val, nodes_[a].val.rows(), nodes_[a].val.cols());
    for (size_t i = 0; i < n.val.size(); ++i) n.val.raw()[i] = softplus(nodes_[a].val.raw()[i]);
    return index_of(n);
}

int Tape::softmax_vec(int a) {
    Node& n = push(Op::SoftmaxVec, a);
    const Mat& x = nodes_[a].val;
    shape_like(n.val, x.rows(), x.cols());
    double mx = -1e300;
    for (double v : x.raw()) mx = std::max(mx, v);
    double sum = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        n.val.raw()[i] = std::exp(x.raw()[i] - mx);
        sum += n.val.raw()[i];
    }
    for (auto& v : n.val.raw()) v /= sum;
    return index_of(n);
}

int Tape::cosine_sim(int a, int b) {
    Node& n = push(Op::CosineSim, a, b);
    const Mat& ma = nodes_[a].val;
    const Mat& mb = nodes_[b].val;
    ma.check_same(mb);
    double na = frobenius_norm(ma);
    double nb = frobenius_norm(mb);
    n.c0 = na;
    n.c1 = nb;
    shape_like(n.val, 1, 1);
    n.val(0, 0) = frobenius_inner(ma, mb) / (na * nb + kCosineDelta);
    return index_of(n);
}

int Tape::scalar_mul(int v, int s) {
    Node& n = push(Op::ScalarMul, v, s);
    if (nodes_[s].val.size() != 1) throw_error(ErrorCode::ShapeMismatch, "tape scalar_mul: scale must be 1x1");
    const double c = nodes_[s].val(0, 0);
    shape_like(n.val, nodes_[v].val.rows(), nodes_[v].val.cols());
    for (size_t i = 0; i < n.val.size(); ++i) n.val.raw()[i] = c * nodes_[v].val.raw()[i];
    return index_of(n);
}

int Tape::circular_convolve(int w, int s) {
    Node& n = push(Op::CircularConvolve, w, s);
    const Mat& mw = nodes_[w].val;
    const Mat& ms = nodes_[s].val;
    if (ms.size() != 3) throw_error(ErrorCode::ShapeMismatch, "tape circular_convolve: shift kernel must have 3 entries");
    const int count = static_cast<int>(mw.size());
    shape_like(n.val, mw.rows(), mw.cols());
    for (int i = 0; i < count; ++i) {
        double acc = 0.0;
        for (int o = -1; o <= 1; ++o) acc += mw.raw()[(i - o + count) % count] * ms.raw()[o + 1];
        n.val.raw()[i] = acc;
    }
    return index_of(n);
}

int Tape::elem_pow_normalize(int w, int gamma) {
    Node& n = push(Op::Sharpen, w, gamma);
    if (nodes_[gamma].val.size() != 1)
        throw_error(ErrorCode::ShapeMismatch, "tape elem_pow_normalize: gamma must be 1x1");
    const Mat& mw = nodes_[w].val;
    const double g = nodes_[gamma].val(0, 0);
    shape_like(n.val, mw.rows(), mw.cols());
    double total = 0.0;
    for (size_t i = 0; i < mw.size(); ++i) {
        n.val.raw()[i] = std::exp(g * std::log(mw.raw()[i] + kPowFloor));
        total += n.val.raw()[i];
    }
    for (auto& v : n.val.raw()) v /= total;
    return index_of(n);
}

int Tape::sum_elements(int a) {
    Node& n = push(Op::SumElements, a);
    shape_like(n.val, 1, 1);
    double s = 0.0;
    for (double v : nodes_[a].val.raw()) s += v;
    n.val(0, 0) = s;
    return index_of(n);
}

int Tape::bce_loss(int probs, int targets) {
    Node& n = push(Op::BceLoss, probs, targets);
    const Mat& p = nodes_[probs].val;
    const Mat& t = nodes_[targets].val;
    p.check_same(t);
    double loss = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        double pc = clamp_prob(p.raw()[i]);
        loss -= t.raw()[i] * std::log(pc) + (1.0 - t.raw()[i]) * std::log(1.0 - pc);
    }
    shape_like(n.val, 1, 1);
    n.val(0, 0) = loss / static_cast<double>(p.size());
    return index_of(n);
}

int Tape::bank_similarities(int mem, int key, int slots) {
    Node& n = push(Op::BankSimilarities, mem, key);
    n.aux = slots;
    const Mat& m = nodes_[mem].val;
    const Mat& k = nodes_[key].val;
    const int nm = m.cols();
    if (m.rows() != slots * nm || k.rows() != nm || k.cols() != nm)
        throw_error(ErrorCode::ShapeMismatch, "tape bank_similarities: bank stack and key do not match");
    const double nk = frobenius_norm(k);
    n.c0 = nk;
    shape_like(n.val, slots, 1);
    const size_t slot_size = static_cast<size_t>(nm) * nm;
    for (int i = 0; i < slots; ++i) {
        const double* mi = m.data() + slot_size * i;
        double dot = 0.0, nn = 0.0;
        for (size_t e = 0; e < slot_size; ++e) {
            dot += mi[e] * k.raw()[e];
            nn += mi[e] * mi[e];
        }
        n.val(i, 0) = dot / (nk * std::sqrt(nn) + kCosineDelta);
    }
    return index_of(n);
}

int Tape::bank_read(int mem, int w, int slots) {
    Node& n = push(Op::BankRead, mem, w);
    n.aux = slots;
    const Mat& m = nodes_[mem].val;
    const Mat& mw = nodes_[w].val;
    const int nm = m.cols();
    if (m.rows() != slots * nm || static_cast<int>(mw.size()) != slots)
        throw_error(ErrorCode::ShapeMismatch, "tape bank_read: bank stack and weights do not match");
    shape_like(n.val, nm, nm);
    std::fill(n.val.raw().begin(), n.val.raw().end(), 0.0);
    const size_t slot_size = static_cast<size_t>(nm) * nm;
    for (int i = 0; i < slots; ++i) {
        const double wi = mw.raw()[i];
        if (wi == 0.0) continue;
        const double* mi = m.data() + slot_size * i;
        for (size_t e = 0; e < slot_size; ++e) n.val.raw()[e] += wi * mi[e];
    }
    return index_of(n);
}

int Tape::bank_write(int mem, int w, int erase, int add, int slots) {
    Node& n = push(Op::BankWrite, mem, w, erase, add);
    n.aux = slots;
    const Mat& m = nodes_[mem].val;
    const Mat& mw = nodes_[w].val;
    const Mat& er = nodes_[erase].val;
    const Mat& ad = nodes_[add].val;
    const int nm = m.cols();
    if (m.rows() != slots * nm || static_cast<int>(mw.size()) != slots || er.rows() != nm ||
        er.cols() != nm || ad.rows() != nm || ad.cols() != nm)
        throw_error(ErrorCode::ShapeMismatch, "tape bank_write: operand shapes do not match the bank");
    shape_like(n.val, m.rows(), m.cols());
    const size_t slot_size = static_cast<size_t>(nm) * nm;
    for (int i = 0; i < slots; ++i) {
        const double wi = mw.raw()[i];
        const double* mi = m.data() + slot_size * i;
        double* oi = n.val.data() + slot_size * i;
        for (size_t e = 0; e < slot_size; ++e) oi[e] = mi[e] * (1.0 - wi * er.raw()[e]) + wi * ad.raw()[e];
    }
    return index_of(n);
}

Mat& Tape::grad_buf(int node) { return nodes_[node].grad; }

void Tape::backward(int loss) {
    Node& ln = nodes_[loss];
    if (ln.val.size() != 1) throw_error(ErrorCode::NotScalarLoss, "backward: loss node must be 1x1");
    for (size_t i = 0; i < used_; ++i) {
        Node& n = nodes_[i];
        if (!n.needs_grad) continue;
        n.grad.resize(n.val.rows(), n.val.cols());
    }
    if (!ln.needs_grad) return;  // loss does not depend on any parameter
    ln.grad(0, 0) = 1.0;
    for (size_t i = used_; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.needs_grad) continue;
        backward_node(n);
    }
}

void Tape::backward_node(Node& n) {
    auto wants = [&](int p) { return p >= 0 && nodes_[p].needs_grad; };
    const Mat& g = n.grad;
    switch (n.op) {
        case Op::Param:
        case Op::Constant:
            break;
        case Op::MatMul:
            if (wants(n.p0)) mul_nt_into(nodes_[n.p0].grad, g, nodes_[n.p1].val, true);
            if (wants(n.p1)) mul_tn_into(nodes_[n.p1].grad, nodes_[n.p0].val, g, true);
            break;
        case Op::Bilinear: {
            const Mat& u = nodes_[n.p0].val;
            const Mat& x = nodes_[n.p1].val;
            const Mat& v = nodes_[n.p2].val;
            if (wants(n.p0)) {  // dU += X V G^T
                mul_into(scratch_, x, v, false);
                mul_nt_into(nodes_[n.p0].grad, scratch_, g, true);
            }
            if (wants(n.p1)) {  // dX += U G V^T
                mul_into(scratch_, u, g, false);
                mul_nt_into(nodes_[n.p1].grad, scratch_, v, true);
            }
            if (wants(n.p2)) {  // dV += X^T U G
                mul_into(scratch_, u, g, false);
                mul_tn_into(nodes_[n.p2].grad, x, scratch_, true);
            }
            break;
        }
        case Op::Add:
            if (wants(n.p0)) nodes_[n.p0].grad += g;
            if (wants(n.p1)) nodes_[n.p1].grad += g;
            break;
        case Op::Sub:
            if (wants(n.p0)) nodes_[n.p0].grad += g;
            if (wants(n.p1)) nodes_[n.p1].grad -= g;
            break;
        case Op::Hadamard:
            if (wants(n.p0))
                for (size_t i = 0; i < g.size(); ++i) nodes_[n.p0].grad.raw()[i] += g.raw()[i] * nodes_[n.p1].val.raw()[i];
            if (wants(n.p1))
                for (size_t i = 0; i < g.size(); ++i) nodes_[n.p1].grad.raw()[i] += g.raw()[i] * nodes_[n.p0].val.raw()[i];
            break;
        case Op::Affine:
            if (wants(n.p0))
                for (size_t i = 0; i < g.size(); ++i) nodes_[n.p0].grad.raw()[i] += n.c0 * g.raw()[i];
            break;
        case Op::Tanh:
            if (wants(n.p0))
                for (size_t i = 0; i < g.size(); ++i)
                    nodes_[n.p0].grad.raw()[i] += g.raw()[i] * (1.0 - n.val.raw()[i] * n.val.raw()[i]);
            break;
        case Op::Sigmoid:
            if (wants(n.p0))
                for (size_t i = 0; i < g.size(); ++i)
                    nodes_[n.p0].grad.raw()[i] += g.raw()[i] * n.val.raw()[i] * (1.0 - n.val.raw()[i]);
            break;
        case Op::Relu:
            if (wants(n.p0))
                for (size_t i = 0; i < g.size(); ++i)
                    nodes_[n.p0].grad.raw()[i] += nodes_[n.p0].val.raw()[i] > 0.0 ? g.raw()[i] : 0.0;
            break;
        case Op::Softplus:
            if (wants(n.p0))
                for (size_t i = 0; i < g.size(); ++i)
                    nodes_[n.p0].grad.raw()[i] += g.raw()[i] * sigmoid(nodes_[n.p0].val.raw()[i]);
            break;
        case Op::SoftmaxVec: {
            if (!wants(n.p0)) break;
            double dot = 0.0;
            for (size_t i = 0; i < g.size(); ++i) dot += g.raw()[i] * n.val.raw()[i];
            for (size_t i = 0; i < g.size(); ++i)
                nodes_[n.p0].grad.raw()[i] += n.val.raw()[i] * (g.raw()[i] - dot);
            break;
        }
        case Op::CosineSim: {
            const double gg = g(0, 0);
            const Mat& a = nodes_[n.p0].val;
            const Mat& b = nodes_[n.p1].val;
            const double na = n.c0, nb = n.c1;
            const double d = na * nb + kCosineDelta;
            const double s = n.val(0, 0);
            if (wants(n.p0))
                for (size_t i = 0; i < a.size(); ++i) {
                    double term = b.raw()[i] / d;
                    if (na > 1e-30) term -= s * nb * a.raw()[i] / (na * d);
                    nodes_[n.p0].grad.raw()[i] += gg * term;
                }
            if (wants(n.p1))
                for (size_t i = 0; i < b.size(); ++i) {
                    double term = a.raw()[i] / d;
                    if (nb > 1e-30) term -= s * na * b.raw()[i] / (nb * d);
                    nodes_[n.p1].grad.raw()[i] += gg * term;
                }
            break;
        }
        case Op::ScalarMul: {
            const double c = nodes_[n.p1].val(0, 0);
            if (wants(n.p0))
                for (size_t i = 0; i < g.size(); ++i) nodes_[n.p0].grad.raw()[i] += c * g.raw()[i];
            if (wants(n.p1)) {
                double dot = 0.0;
                for (size_t i = 0; i < g.size(); ++i) dot += g.raw()[i] * nodes_[n.p0].val.raw()[i];
                nodes_[n.p1].grad(0, 0) += dot;
            }
            break;
        }
        case Op::CircularConvolve: {
            const Mat& w = nodes_[n.p0].val;
            const Mat& s = nodes_[n.p1].val;
            const int count = static_cast<int>(w.size());
            if (wants(n.p0))
                for (int i = 0; i < count; ++i)
                    for (int o = -1; o <= 1; ++o)
                        nodes_[n.p0].grad.raw()[(i - o + count) % count] += g.raw()[i] * s.raw()[o + 1];
            if (wants(n.p1))
                for (int o = -1; o <= 1; ++o) {
                    double acc = 0.0;
                    for (int i = 0; i < count; ++i) acc += g.raw()[i] * w.raw()[(i - o + count) % count];
                    nodes_[n.p1].grad.raw()[o + 1] += acc;
                }
            break;
        }
        case Op::Sharpen: {
            const Mat& w = nodes_[n.p0].val;
            const double gam = nodes_[n.p1].val(0, 0);
            const size_t count = w.size();
            double total = 0.0;
            for (size_t i = 0; i < count; ++i) total += std::exp(gam * std::log(w.raw()[i] + kPowFloor));
            double dot = 0.0;
            for (size_t i = 0; i < count; ++i) dot += g.raw()[i] * n.val.raw()[i];
            double dgamma = 0.0;
            for (size_t i = 0; i < count; ++i) {
                const double t = std::log(w.raw()[i] + kPowFloor);
                const double u = std::exp(gam * t);
                const double du = (g.raw()[i] - dot) / total;  // dL/du_i
                if (wants(n.p0)) nodes_[n.p0].grad.raw()[i] += du * gam * u / (w.raw()[i] + kPowFloor);
                dgamma += du * u * t;
            }
            if (wants(n.p1)) nodes_[n.p1].grad(0, 0) += dgamma;
            break;
        }
        case Op::SumElements:
            if (wants(n.p0)) {
                const double gg = g(0, 0);
                for (auto& v : nodes_[n.p0].grad.raw()) v += gg;
            }
            break;
        case Op::BceLoss: {
            const Mat& p = nodes_[n.p0].val;
            const Mat& t = nodes_[n.p1].val;
            const double gg = g(0, 0) / static_cast<double>(p.size());
            if (wants(n.p0))
                for (size_t i = 0; i < p.size(); ++i) {
                    const double raw = p.raw()[i];
                    if (raw <= kBceFloor || raw >= 1.0 - kBceFloor) continue;  // clamp region
                    nodes_[n.p0].grad.raw()[i] += gg * (raw - t.raw()[i]) / (raw * (1.0 - raw));
                }
            if (wants(n.p1))
                for (size_t i = 0; i < p.size(); ++i) {
                    const double pc = clamp_prob(p.raw()[i]);
                    nodes_[n.p1].grad.raw()[i] += gg * (std::log(1.0 - pc) - std::log(pc));
                }
            break;
        }
        case Op::BankSimilarities: {
            const Mat& m = nodes_[n.p0].val;
            const Mat& k = nodes_[n.p1].val;
            const int nm = m.cols();
            const size_t slot_size = static_cast<size_t>(nm) * nm;
            const double nk = n.c0;
            for (int i = 0; i < n.aux; ++i) {
                const double gg = g(i, 0);
                if (gg == 0.0) continue;
                const double* mi = m.data() + slot_size * i;
                double nn = 0.0;
                for (size_t e = 0; e < slot_size; ++e) nn += mi[e] * mi[e];
                const double nmi = std::sqrt(nn);
                const double d = nk * nmi + kCosineDelta;
                const double s = n.val(i, 0);
                if (wants(n.p1))
                    for (size_t e = 0; e < slot_size; ++e) {
                        double term = mi[e] / d;
                        if (nk > 1e-30) term -= s * nmi * k.raw()[e] / (nk * d);
                        nodes_[n.p1].grad.raw()[e] += gg * term;
                    }
                if (wants(n.p0)) {
                    double* gm = nodes_[n.p0].grad.data() + slot_size * i;
                    for (size_t e = 0; e < slot_size; ++e) {
                        double term = k.raw()[e] / d;
                        if (nmi > 1e-30) term -= s * nk * mi[e] / (nmi * d);
                        gm[e] += gg * term;
                    }
                }
            }
            break;
        }
        case Op::BankRead: {
            const Mat& m = nodes_[n.p0].val;
            const Mat& w = nodes_[n.p1].val;
            const int nm = m.cols();
            const size_t slot_size = static_cast<size_t>(nm) * nm;
            for (int i = 0; i < n.aux; ++i) {
                const double* mi = m.data() + slot_size * i;
                if (wants(n.p0)) {
                    const double wi = w.raw()[i];
                    double* gm = nodes_[n.p0].grad.data() + slot_size * i;
                    for (size_t e = 0; e < slot_size; ++e) gm[e] += wi * g.raw()[e];
                }
                if (wants(n.p1)) {
                    double dot = 0.0;
                    for (size_t e = 0; e < slot_size; ++e) dot += g.raw()[e] * mi[e];
                    nodes_[n.p1].grad.raw()[i] += dot;
                }
            }
            break;
        }
        case Op::BankWrite: {
            const Mat& m = nodes_[n.p0].val;
            const Mat& w = nodes_[n.p1].val;
            const Mat& er = nodes_[n.p2].val;
            const Mat& ad = nodes_[n.p3].val;
            const int nm = m.cols();
            const size_t slot_size = static_cast<size_t>(nm) * nm;
            for (int i = 0; i < n.aux; ++i) {
                const double wi = w.raw()[i];
                const double* mi = m.data() + slot_size * i;
                const double* gi = g.data() + slot_size * i;
                if (wants(n.p0)) {
                    double* gm = nodes_[n.p0].grad.data() + slot_size * i;
                    for (size_t e = 0; e < slot_size; ++e) gm[e] += gi[e] * (1.0 - wi * er.raw()[e]);
                }
                if (wants(n.p1)) {
                    double dot = 0.0;
                    for (size_t e = 0; e < slot_size; ++e)
                        dot += gi[e] * (ad.raw()[e] - mi[e] * er.raw()[e]);
                    nodes_[n.p1].grad.raw()[i] += dot;
                }
                if (wants(n.p2))
                    for (size_t e = 0; e < slot_size; ++e) nodes_[n.p2].grad.raw()[e] -= gi[e] * wi * mi[e];
                if (wants(n.p3))
                    for (size_t e = 0; e < slot_size; ++e) nodes_[n.p3].grad.raw()[e] += gi[e] * wi;
            }
            break;
        }
    }
}

double grad_check(const std::function<int(Tape&, const std::vector<Mat>&)>& build,
                  std::vector<Mat> params, double eps, int min_coords, SeededRng& rng) {
    Tape tape;
    tape.rewind();
    int loss = build(tape, params);
    tape.backward(loss);

    // Analytic gradients per parameter, accumulated over every registration of the id.
    std::vector<Mat> analytic(params.size());
    for (size_t i = 0; i < params.size(); ++i) analytic[i] = Mat(params[i].rows(), params[i].cols());
    for (size_t node = 0; node < tape.size(); ++node) {
        int pid = tape.param_id_of(static_cast<int>(node));
        if (pid >= 0 && tape.grad(static_cast<int>(node)).size() > 0)
            analytic[pid] += tape.grad(static_cast<int>(node));
    }

    std::vector<std::pair<int, size_t>> coords;
    for (size_t i = 0; i < params.size(); ++i)
        for (size_t e = 0; e < params[i].size(); ++e) coords.emplace_back(static_cast<int>(i), e);
    for (size_t i = coords.size(); i > 1; --i) std::swap(coords[i - 1], coords[rng.next_u64() % i]);
    const size_t take = std::min(coords.size(), static_cast<size_t>(min_coords));

    double worst = 0.0;
    for (size_t c = 0; c < take; ++c) {
        auto [pi, e] = coords[c];
        const double saved = params[pi].raw()[e];
        params[pi].raw()[e] = saved + eps;
        tape.rewind();
        double up = tape.value(build(tape, params))(0, 0);
        params[pi].raw()[e] = saved - eps;
        tape.rewind();
        double down = tape.value(build(tape, params))(0, 0);
        params[pi].raw()[e] = saved;
        const double fd = (up - down) / (2.0 * eps);
        const double ad = analytic[pi].raw()[e];
        const double err = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace matcap
