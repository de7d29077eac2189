#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "matcap/mat.hpp"
#include "matcap/rng.hpp"

namespace matcap {

/// Reverse-mode tape over matrix-valued nodes. Exactly the primitive set the MatNTM
/// forward pass needs; every op registers its backward rule. A tape is single-owner
/// during a forward/backward pass; rewind() keeps node storage for the next pass.
class Tape {
  public:
    enum class Op : uint8_t {
        Param,
        Constant,
        MatMul,
        Bilinear,  // U^T X V
        Add,
        Sub,
        Hadamard,
        Affine,  // c0 * x + c1 elementwise
        Tanh,
        Sigmoid,
        Relu,
        Softplus,
        SoftmaxVec,
        CosineSim,
        ScalarMul,  // (1x1 node) * matrix node
        CircularConvolve,
        Sharpen,  // elem_pow by a scalar node with renormalization
        SumElements,
        BceLoss,
        BankSimilarities,
        BankRead,
        BankWrite,
    };

    int param(const Mat& value, int param_id);
    int constant(const Mat& value);
    int constant_scalar(double v);

    int matmul(int a, int b);
    /// U^T X V
    int bilinear(int u, int x, int v);
    int add(int a, int b);
    int subtract(int a, int b);
    int hadamard(int a, int b);
    int affine(int a, double scale, double shift);
    int scale(int a, double c);
    int tanh_elem(int a);
    int sigmoid_elem(int a);
    int relu_elem(int a);
    int softplus_elem(int a);
    /// Softmax over all entries (used on vector-shaped nodes).
    int softmax_vec(int a);
    /// Tr(A^T B) / (||A||_F ||B||_F + 1e-8), a 1x1 node.
    int cosine_sim(int a, int b);
    /// Entrywise product of a matrix node by a 1x1 scalar node.
    int scalar_mul(int v, int s);
    /// y_i = sum_{j in {-1,0,1}} w_{(i-j) mod S} s_{j+1}; w is S x 1, s is 3 x 1.
    int circular_convolve(int w, int s);
    /// w_i^gamma / sum_j w_j^gamma, computed as exp(gamma log(w + 1e-16)); gamma is a 1x1 node.
    int elem_pow_normalize(int w, int gamma);
    int sum_elements(int a);
    /// Mean binary cross-entropy over all entries; probs clamped to [1e-7, 1-1e-7].
    int bce_loss(int probs, int targets);

    /// Cosine similarity of a key against every slot of a memory bank stored as an
    /// (S*n) x n stack; returns an S x 1 node.
    int bank_similarities(int mem, int key, int slots);
    /// R = sum_i w_i M_i.
    int bank_read(int mem, int w, int slots);
    /// slots'[i] = slots[i] (1 - w_i Er) + w_i A.
    int bank_write(int mem, int w, int erase, int add, int slots);

    /// Reverse pass from a scalar (1x1) loss node. Throws NotScalarLoss otherwise.
    void backward(int loss);

    const Mat& value(int node) const { return nodes_[node].val; }
    /// Valid after backward(); zero matrix for nodes the loss does not depend on.
    const Mat& grad(int node) const { return nodes_[node].grad; }
    int param_id_of(int node) const { return nodes_[node].param_id; }
    size_t size() const { return used_; }

    /// Forget all nodes but keep their storage for reuse.
    void rewind() { used_ = 0; }

  private:
    struct Node {
        Op op = Op::Constant;
        int p0 = -1, p1 = -1, p2 = -1, p3 = -1;
        double c0 = 0.0, c1 = 0.0;
        int aux = 0;  // slot count for bank ops
        int param_id = -1;
        bool needs_grad = false;
        Mat val;
        Mat grad;
    };

    Node& push(Op op, int p0 = -1, int p1 = -1, int p2 = -1, int p3 = -1);
    int index_of(const Node& n) const { return static_cast<int>(&n - nodes_.data()); }
    bool any_needs_grad(const Node& n) const;
    void backward_node(Node& n);
    Mat& grad_buf(int node);

    std::vector<Node> nodes_;
    size_t used_ = 0;
    Mat scratch_;
};

/// Central-difference check of tape gradients. `build` must construct the loss from the
/// given parameter values and return the loss node; the same tape is rewound between
/// evaluations. Samples at least `min_coords` coordinates (all, when fewer exist) and
/// returns the worst error |ad - fd| / max(1, |ad|, |fd|).
double grad_check(const std::function<int(Tape&, const std::vector<Mat>&)>& build,
                  std::vector<Mat> params, double eps, int min_coords, SeededRng& rng);

}  // namespace matcap
