#include "finsim/cmaes.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace finsim {

namespace {

/// Box-Muller normals over mt19937_64: keeps runs bit-identical across
/// standard libraries (std::normal_distribution is not portable).
class Gaussian {
public:
    explicit Gaussian(std::uint64_t seed) : rng_(seed) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    double uniform() {
        return (static_cast<double>(rng_()) + 0.5) * (1.0 / 18446744073709551616.0);
    }
    std::mt19937_64 rng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

void validate(const ObjectiveSpec& spec) {
    const int n = spec.dimension;
    if (n < 1) throw std::invalid_argument("cmaes: dimension must be >= 1");
    if (spec.lower.size() != n || spec.upper.size() != n) {
        throw std::invalid_argument("cmaes: bounds must match the dimension");
    }
    for (int i = 0; i < n; ++i) {
        if (!std::isfinite(spec.lower(i)) || !std::isfinite(spec.upper(i)) ||
            spec.upper(i) < spec.lower(i)) {
            throw std::invalid_argument("cmaes: bounds must be finite with upper >= lower");
        }
    }
    if (spec.budget < 10 * n) {
        throw std::invalid_argument("cmaes: budget must be at least 10 * dimension");
    }
    if (!(spec.sigma0 > 0.0)) throw std::invalid_argument("cmaes: sigma0 must be positive");
}

} // namespace

FitResult cmaes_minimize(const Objective& objective, const ObjectiveSpec& spec,
                         const EvalSink& sink) {
    validate(spec);
    const int n = spec.dimension;

    const Eigen::VectorXd width = spec.upper - spec.lower;
    auto to_params = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd {
        Eigen::VectorXd x = spec.lower + width.cwiseProduct(u);
        return x.cwiseMax(spec.lower).cwiseMin(spec.upper);
    };

    FitResult result;

    // Fully pinned box: a single evaluation decides everything.
    if ((width.array() <= 0.0).all()) {
        const Eigen::VectorXd x = spec.lower;
        result.best_params = x;
        result.best_value = objective(x);
        result.evaluations = 1;
        result.iterations = 1;
        result.converged = result.best_value <= spec.target_tolerance;
        const EvalRecord rec{0, 0, x, result.best_value};
        result.history.push_back(rec);
        if (sink) sink(rec);
        return result;
    }

    // Strategy parameters (standard defaults).
    const int lambda = spec.lambda > 0
                           ? spec.lambda
                           : 4 + static_cast<int>(std::floor(3.0 * std::log(n)));
    const int mu = lambda / 2;
    Eigen::VectorXd weights(mu);
    for (int i = 0; i < mu; ++i) {
        weights(i) = std::log(mu + 0.5) - std::log(i + 1.0);
    }
    weights /= weights.sum();
    const double mu_eff = 1.0 / weights.squaredNorm();

    const double c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
    const double d_sigma =
        1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma;
    const double c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
    const double c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
    const double c_mu = std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) /
                                                ((n + 2.0) * (n + 2.0) + mu_eff));
    const double chi_n =
        std::sqrt(static_cast<double>(n)) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

    // Search state in box-normalized coordinates.
    Eigen::VectorXd mean(n);
    if (spec.initial_mean.size()) {
        if (spec.initial_mean.size() != n) {
            throw std::invalid_argument("cmaes: initial mean size mismatch");
        }
        for (int i = 0; i < n; ++i) {
            mean(i) = width(i) > 0.0 ? (spec.initial_mean(i) - spec.lower(i)) / width(i) : 0.0;
        }
    } else {
        mean.setConstant(0.5);
    }
    double sigma = spec.sigma0;
    Eigen::MatrixXd C = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd p_sigma = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd p_c = Eigen::VectorXd::Zero(n);

    Gaussian gauss(spec.seed);

    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd D = Eigen::VectorXd::Ones(n);

    int evals = 0;
    int iteration = 0;
    auto record_eval = [&](const Eigen::VectorXd& x, double f) {
        const EvalRecord rec{iteration, evals, x, f};
        result.history.push_back(rec);
        if (sink) sink(rec);
        ++evals;
        if (f < result.best_value) {
            result.best_value = f;
            result.best_params = x;
        }
    };

    std::vector<Eigen::VectorXd> ys(lambda);
    std::vector<double> fitness(lambda);
    std::vector<int> order(lambda);

    while (evals < spec.budget && result.best_value > spec.target_tolerance) {
        {
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
            if (eig.info() != Eigen::Success) {
                result.message = "covariance eigendecomposition failed";
                break;
            }
            B = eig.eigenvectors();
            D = eig.eigenvalues().cwiseMax(1e-30).cwiseSqrt();
        }

        const int batch = std::min(lambda, spec.budget - evals);
        for (int k = 0; k < batch; ++k) {
            Eigen::VectorXd z(n);
            for (int i = 0; i < n; ++i) z(i) = gauss();
            ys[k] = B * D.asDiagonal() * z;
            const Eigen::VectorXd u = mean + sigma * ys[k];

            const Eigen::VectorXd u_clamped = u.cwiseMax(0.0).cwiseMin(1.0);
            const Eigen::VectorXd x = to_params(u_clamped);
            const double f_true = objective(x);
            if (!std::isfinite(f_true)) {
                throw std::runtime_error("cmaes: objective returned a non-finite value");
            }
            record_eval(x, f_true);
            fitness[k] = f_true + spec.penalty_weight * (u - u_clamped).squaredNorm();
        }
        if (batch < lambda) {
            result.budget_exhausted = true;
            break;
        }

        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return fitness[a] < fitness[b]; });

        Eigen::VectorXd y_w = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < mu; ++i) y_w += weights(i) * ys[order[i]];
        mean += sigma * y_w;

        // Step-size path uses C^{-1/2} y_w.
        const Eigen::VectorXd c_inv_y =
            B * D.cwiseInverse().asDiagonal() * (B.transpose() * y_w);
        p_sigma = (1.0 - c_sigma) * p_sigma +
                  std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * c_inv_y;

        ++iteration;
        const double ps_norm = p_sigma.norm();
        const bool h_sigma =
            ps_norm / std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * iteration)) / chi_n <
            1.4 + 2.0 / (n + 1.0);

        p_c = (1.0 - c_c) * p_c;
        if (h_sigma) p_c += std::sqrt(c_c * (2.0 - c_c) * mu_eff) * y_w;

        Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < mu; ++i) {
            rank_mu.noalias() += weights(i) * ys[order[i]] * ys[order[i]].transpose();
        }
        const double delta_h = (h_sigma ? 0.0 : c_c * (2.0 - c_c));
        C = (1.0 - c_1 - c_mu) * C + c_1 * (p_c * p_c.transpose() + delta_h * C) +
            c_mu * rank_mu;

        sigma *= std::exp((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0));
        if (!std::isfinite(sigma) || sigma > 1e6) {
            result.message = "step size diverged";
            break;
        }
    }

    result.evaluations = evals;
    result.iterations = iteration;
    result.converged = result.best_value <= spec.target_tolerance;
    if (!result.converged && evals >= spec.budget) result.budget_exhausted = true;
    return result;
}

} // namespace finsim
