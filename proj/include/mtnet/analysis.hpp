#pragma once

#include <vector>

#include "mtnet/linalg.hpp"
#include "mtnet/net.hpp"
#include "mtnet/rng.hpp"
#include "mtnet/tensor.hpp"

namespace mtnet {

// n x d matrix of linearly independent columns spanning a subspace of R^n.
struct SubspaceBasis {
    Tensor vectors;

    int dim() const { return vectors.cols(); }
    int ambient() const { return vectors.rows(); }
    void validate() const;  // rank checked via SVD, threshold 1e-10 * sigma_max
};

// d x d symmetric positive-definite matrix defining an inner product.
struct MetricTensor {
    Tensor g;

    void validate() const;  // symmetry to 1e-12, positive definiteness via Cholesky
};

// T T^T — the matrix premultiplying grad_A(L) x in a cell's update; its
// inverse is the metric the update effectively descends under.
Tensor effective_metric(const Tensor& t);

// | ||T dW x||^2 - (dW x)^T (T^T T) (dW x) |
double check_delta_y_norm(const Tensor& t, const Tensor& dw, const Tensor& x);

// Computes y_new for a single linear cell two ways -- through the masked W
// update and through the row-masked-transpose closed form -- and returns the
// max abs difference. mask_rows is n x 1 with 0/1 entries.
double check_mtnet_unroll(const Tensor& t, const Tensor& w, const Tensor& mask_rows,
                          const Tensor& x, const Tensor& target, double alpha);

struct CellConstruction {
    Tensor T;
    Tensor W;
    Tensor zeta;  // n x 1, saturated at +/- 50
};

// Cell whose update span equals span(U) while T W = A: T = [U | completion],
// W = T^{-1} A, zeta saturated (+ for the first d rows).
CellConstruction construct_subspace_cell(const SubspaceBasis& u, const Tensor& a, Rng& rng);

// Additionally realizes steepest descent under metric g on span(U): the first
// d columns of T become U H^{-1} with G = H^T H (H from Cholesky).
CellConstruction construct_metric_cell(const SubspaceBasis& u, const MetricTensor& g,
                                       const Tensor& a, Rng& rng);

// Collects y_new - y over n_probes random MSE targets (threshold mask from
// zeta) and returns the SVD column basis with threshold 1e-8 * sigma_max.
SubspaceBasis estimate_update_span(const CellConstruction& cell, const Tensor& x, int n_probes,
                                   Rng& rng, double alpha = 1.0);

/// Per-layer mean of sigmoid(zeta): the expected fraction of weights the
/// task-specific learner updates (gate = 1). The complement
/// e^{-zeta}/(e^{-zeta}+1) is the expected frozen fraction. Maskless layers
/// report 1 (every weight adapts).
std::vector<double> expected_mask_fraction(const Network& net, const ParamSet& params);

}  // namespace mtnet
