#include "mtfl/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace mtfl {

SignVector sign_vec(const std::vector<double>& v) {
    SignVector s(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) throw std::invalid_argument("sign_vec: non-finite entry");
        s[i] = v[i] > 0.0 ? 1 : (v[i] < 0.0 ? -1 : 0);
    }
    return s;
}

std::vector<double> project_simplex(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("project_simplex: empty vector");
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cumsum = 0.0;
    double tau = 0.0;
    int rho = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        cumsum += u[i];
        const double t = (cumsum - 1.0) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0) {
            rho = static_cast<int>(i + 1);
            tau = t;
        }
    }
    (void)rho;
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - tau, 0.0);
    return out;
}

std::vector<double> projected_gradient(const std::vector<double>& z,
                                       const std::vector<double>& g, double mu) {
    if (mu <= 0.0) throw std::invalid_argument("projected_gradient: mu must be positive");
    if (z.size() != g.size()) throw std::invalid_argument("projected_gradient: size mismatch");
    std::vector<double> step(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) step[i] = z[i] - mu * g[i];
    std::vector<double> proj = project_simplex(step);
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = (z[i] - proj[i]) / mu;
    return out;
}

}  // namespace mtfl
