#include "mtfl/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace mtfl {

ImportanceMatrix ImportanceMatrix::uniform(int n) {
    ImportanceMatrix a;
    a.n = n;
    a.rows.assign(n, std::vector<double>(n, 1.0 / n));
    return a;
}

void ImportanceMatrix::validate() const {
    if (static_cast<int>(rows.size()) != n) throw std::logic_error("alpha: row count mismatch");
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != n) throw std::logic_error("alpha: row length mismatch");
        double sum = 0.0;
        for (double v : row) {
            if (v < 0.0) throw std::logic_error("alpha: negative entry");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw std::logic_error("alpha: row does not sum to 1");
    }
}

double PenaltyConfig::log_cover_over_delta() const { return log_cover - std::log(delta); }

void PenaltyConfig::validate() const {
    if (bound_M <= 0.0) throw std::invalid_argument("penalty: bound_M must be positive");
    if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("penalty: delta must be in (0,1)");
    if (log_cover < 0.0) throw std::invalid_argument("penalty: log_cover must be nonnegative");
    if (log_cover_over_delta() < 0.0)
        throw std::invalid_argument("penalty: log(|Lambda_eps|/delta) must be nonnegative");
    if (lambda.size() != gamma.size() || lambda.size() != sample_counts.size())
        throw std::invalid_argument("penalty: lambda/gamma/sample_counts length mismatch");
    for (int n_j : sample_counts)
        if (n_j < 1) throw std::invalid_argument("penalty: sample counts must be >= 1");
}

PenaltyConfig PenaltyConfig::defaults(int n, const FederationData& data) {
    PenaltyConfig cfg;
    cfg.lambda.assign(n, 1.0 / n);
    cfg.gamma.assign(n, 0.0);
    cfg.sample_counts.resize(n);
    for (int j = 0; j < n; ++j) cfg.sample_counts[j] = data.shards[j].train_count;
    return cfg;
}

namespace {

// sum_{k,j} (lambda_k alpha_kj / n_j)^2
double quad_sum(const ImportanceMatrix& alpha, const PenaltyConfig& cfg) {
    double q = 0.0;
    for (int k = 0; k < alpha.n; ++k)
        for (int j = 0; j < alpha.n; ++j) {
            const double t = cfg.lambda[k] * alpha.rows[k][j] / cfg.sample_counts[j];
            q += t * t;
        }
    return q;
}

}  // namespace

double pen(const ImportanceMatrix& alpha, const DiscrepancyMatrix& dhat,
           const PenaltyConfig& cfg) {
    if (alpha.n != cfg.n() || dhat.n != cfg.n())
        throw std::invalid_argument("pen: dimension mismatch");
    const int n = alpha.n;
    const double root = std::sqrt(0.5 * n * quad_sum(alpha, cfg) * cfg.log_cover_over_delta());
    double bias = 0.0;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) bias += cfg.lambda[k] * alpha.rows[k][j] * dhat.at(k, j);
    return root + bias / cfg.bound_M;
}

double reg_k(int k, const ImportanceMatrix& alpha, const PenaltyConfig& cfg) {
    if (k < 0 || k >= alpha.n) throw std::invalid_argument("reg_k: device index out of range");
    const int n = alpha.n;
    return cfg.bound_M / n *
           std::sqrt(0.5 * n * quad_sum(alpha, cfg) * cfg.log_cover_over_delta());
}

double mtfeel_objective(const std::vector<ModelParams>& W, const ImportanceMatrix& alpha,
                        const DiscrepancyMatrix& dhat, const FederationData& data,
                        const PenaltyConfig& cfg, const LossSpec& loss) {
    const int n = alpha.n;
    if (static_cast<int>(W.size()) != n || data.device_count() != n)
        throw std::invalid_argument("mtfeel_objective: dimension mismatch");
    double obj = 0.0;
    for (int k = 0; k < n; ++k) {
        for (int j = 0; j < n; ++j) {
            if (alpha.rows[k][j] == 0.0 && cfg.lambda[k] == 0.0) continue;
            obj += cfg.lambda[k] * alpha.rows[k][j] *
                   empirical_loss(W[k], data.shards[j], data.shards[j].train_indices(), loss);
        }
        double norm2 = 0.0;
        for (double v : W[k].values) norm2 += v * v;
        obj += cfg.gamma[k] * std::sqrt(norm2);
    }
    return obj + cfg.bound_M * pen(alpha, dhat, cfg);
}

std::vector<double> signed_grad_w(int k, const ModelParams& w_k,
                                  const ImportanceMatrix& alpha,
                                  const std::vector<SignVector>& sign_reports,
                                  const PenaltyConfig& cfg) {
    if (static_cast<int>(sign_reports.size()) != alpha.n)
        throw std::invalid_argument("signed_grad_w: need one report slot per device");
    const std::size_t d = w_k.values.size();
    std::vector<double> out(d, 0.0);
    for (int m = 0; m < alpha.n; ++m) {
        const auto& s = sign_reports[m];
        if (s.empty()) continue;  // outage: zero contribution this round
        if (s.size() != d) throw std::invalid_argument("signed_grad_w: report length mismatch");
        const double w = cfg.lambda[k] * alpha.rows[k][m];
        for (std::size_t i = 0; i < d; ++i) out[i] += w * s[i];
    }
    const double g = cfg.gamma[k];
    if (g != 0.0)
        for (std::size_t i = 0; i < d; ++i)
            out[i] += g * (w_k.values[i] > 0.0 ? 1.0 : (w_k.values[i] < 0.0 ? -1.0 : 0.0));
    return out;
}

std::vector<double> grad_alpha_row(int k, const ImportanceMatrix& alpha,
                                   const DiscrepancyMatrix& dhat,
                                   const std::vector<double>& losses,
                                   const PenaltyConfig& cfg) {
    const int n = alpha.n;
    if (static_cast<int>(losses.size()) != n)
        throw std::invalid_argument("grad_alpha_row: need one loss per device");
    const double lam = cfg.lambda[k];
    const double L = cfg.log_cover_over_delta();
    const double q = quad_sum(alpha, cfg);
    const double root = std::sqrt(0.5 * n * q * L);

    std::vector<double> out(n);
    for (int m = 0; m < n; ++m) {
        double v = lam * losses[m] + lam * dhat.at(k, m);
        if (root > 0.0) {
            const double nm = cfg.sample_counts[m];
            v += cfg.bound_M * 0.5 * n * L * lam * lam * alpha.rows[k][m] / (nm * nm) / root;
        }
        out[m] = v;
    }
    return out;
}

LipschitzConstants lipschitz_constants(int k, const PenaltyConfig& cfg, int model_dim) {
    const int n = cfg.n();
    LipschitzConstants c;
    c.beta_prime = cfg.bound_M / std::sqrt(2.0 * n) * std::sqrt(cfg.log_cover_over_delta());
    c.beta = c.beta_prime + 2.0 * cfg.lambda[k] * cfg.bound_M;
    c.U = c.beta + cfg.lambda[k] * model_dim;
    return c;
}

}  // namespace mtfl
