#pragma once

#include <vector>

#include "mtfl/data.hpp"
#include "mtfl/discrepancy.hpp"
#include "mtfl/nn.hpp"
#include "mtfl/simplex.hpp"

namespace mtfl {

/// Row-stochastic importance matrix (each row on the probability simplex).
struct ImportanceMatrix {
    int n = 0;
    std::vector<std::vector<double>> rows;

    static ImportanceMatrix uniform(int n);
    void validate() const;
};

/// Scalars entering the penalty and the alpha gradient.
struct PenaltyConfig {
    double bound_M = 10.0;
    double delta = 0.05;
    double log_cover = 2.0;               // log |Lambda_eps|
    std::vector<double> gamma;            // per-device L2 regulariser weights
    std::vector<double> lambda;           // fixed point of the simplex, length N
    std::vector<int> sample_counts;       // n_j per device

    int n() const { return static_cast<int>(lambda.size()); }
    double log_cover_over_delta() const;  // log(|Lambda_eps| / delta) >= 0
    void validate() const;

    static PenaltyConfig defaults(int n, const FederationData& data);
};

/// Concentration + discrepancy penalty:
/// sqrt((N/2) * sum_{j,k} (lambda_k alpha_kj / n_j)^2 * log(|Lambda_eps|/delta))
///   + (1/M) * sum_{k,j} lambda_k alpha_kj d_kj.
double pen(const ImportanceMatrix& alpha, const DiscrepancyMatrix& dhat,
           const PenaltyConfig& cfg);

/// Per-device share of the square-root penalty; sums over k to M times the
/// first summand of pen().
double reg_k(int k, const ImportanceMatrix& alpha, const PenaltyConfig& cfg);

/// Full training objective over all devices (training subsets):
/// sum_k lambda_k sum_j alpha_kj L(w_k, S_j) + sum_k gamma_k ||w_k||_2 + M * pen.
double mtfeel_objective(const std::vector<ModelParams>& W, const ImportanceMatrix& alpha,
                        const DiscrepancyMatrix& dhat, const FederationData& data,
                        const PenaltyConfig& cfg, const LossSpec& loss);

/// Aggregated signed update direction for model k:
/// lambda_k * sum_m alpha_km * sign_reports[m] + gamma_k * sign(w_k).
/// An empty report stands for a lost (outage) transmission and contributes zero.
std::vector<double> signed_grad_w(int k, const ModelParams& w_k,
                                  const ImportanceMatrix& alpha,
                                  const std::vector<SignVector>& sign_reports,
                                  const PenaltyConfig& cfg);

/// Gradient of the objective with respect to row alpha_k, given the losses
/// L(w_k, S_m) for all m. The square-root term is the exact derivative of the
/// penalty's concentration term; it is 0 when the whole quadratic sum vanishes.
std::vector<double> grad_alpha_row(int k, const ImportanceMatrix& alpha,
                                   const DiscrepancyMatrix& dhat,
                                   const std::vector<double>& losses,
                                   const PenaltyConfig& cfg);

struct LipschitzConstants {
    double beta_prime;  // (M / sqrt(2N)) sqrt(log(|Lambda_eps|/delta))
    double beta;        // beta_prime + 2 lambda_k M
    double U;           // beta + lambda_k d
};

LipschitzConstants lipschitz_constants(int k, const PenaltyConfig& cfg, int model_dim);

}  // namespace mtfl
