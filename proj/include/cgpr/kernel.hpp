#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "cgpr/dataset.hpp"
#include "cgpr/errors.hpp"

namespace cgpr {

/// Kernel and noise parameters theta = {l1, l2, l3, sigma_f, sigma_n}.
/// Length scale j pairs with input column j: (eps_v, eps_s, p).
struct Hyperparameters {
    std::array<double, 3> ell{1.0, 1.0, 1.0};
    double sigma_f = 1.0;
    double sigma_n = 0.1;

    bool valid() const {
        auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
        return ok(ell[0]) && ok(ell[1]) && ok(ell[2]) && ok(sigma_f) && ok(sigma_n);
    }

    void validate() const {
        if (!valid()) {
            std::ostringstream msg;
            msg << "invalid hyperparameters: ell=(" << ell[0] << ", " << ell[1] << ", " << ell[2]
                << "), sigma_f=" << sigma_f << ", sigma_n=" << sigma_n;
            throw ConfigError(msg.str());
        }
    }

    /// log-space packing used by the optimizer: (log l1, log l2, log l3, log sf, log sn)
    Eigen::Matrix<double, 5, 1> to_log() const {
        Eigen::Matrix<double, 5, 1> v;
        v << std::log(ell[0]), std::log(ell[1]), std::log(ell[2]), std::log(sigma_f), std::log(sigma_n);
        return v;
    }

    static Hyperparameters from_log(const Eigen::VectorXd& v) {
        Hyperparameters h;
        h.ell = {std::exp(v[0]), std::exp(v[1]), std::exp(v[2])};
        h.sigma_f = std::exp(v[3]);
        h.sigma_n = std::exp(v[4]);
        return h;
    }
};

namespace detail {

inline double scaled_sqdist(const Point& x, const Point& x2, const Hyperparameters& th) {
    double s = 0.0;
    for (int j = 0; j < 3; ++j) {
        const double d = (x[j] - x2[j]) / th.ell[j];
        s += d * d;
    }
    return s;
}

} // namespace detail

/// Anisotropic squared exponential: sf^2 exp(-sum_j (x_j - x2_j)^2 / (2 l_j^2)).
inline double k_se(const Point& x, const Point& x2, const Hyperparameters& th) {
    return th.sigma_f * th.sigma_f * std::exp(-0.5 * detail::scaled_sqdist(x, x2, th));
}

/// Mixed second derivative d^2 k / (dp dp') of k_se with respect to the
/// pressure coordinate of each argument.
inline double dkernel_pp(const Point& x, const Point& x2, const Hyperparameters& th) {
    const double l3 = th.ell[2];
    const double d3 = x[2] - x2[2];
    const double l3sq = l3 * l3;
    return k_se(x, x2, th) * (1.0 / l3sq - d3 * d3 / (l3sq * l3sq));
}

enum class KernelKind { value, deriv_pp };

inline double kernel_eval(const Point& x, const Point& x2, const Hyperparameters& th, KernelKind which) {
    return which == KernelKind::value ? k_se(x, x2, th) : dkernel_pp(x, x2, th);
}

/// Prior variance on the diagonal of the selected kernel.
inline double kernel_diagonal(const Hyperparameters& th, KernelKind which) {
    const double sf2 = th.sigma_f * th.sigma_f;
    return which == KernelKind::value ? sf2 : sf2 / (th.ell[2] * th.ell[2]);
}

/// Cross-covariance matrix, rows of A against rows of B (both n x 3).
inline Eigen::MatrixXd cross_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                    const Hyperparameters& th, KernelKind which) {
    Eigen::MatrixXd K(A.rows(), B.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        const Point a = A.row(i).transpose();
        for (Eigen::Index j = 0; j < B.rows(); ++j) K(i, j) = kernel_eval(a, B.row(j).transpose(), th, which);
    }
    return K;
}

/// Symmetric kernel matrix over the rows of X; the lower triangle is mirrored
/// so the result is exactly symmetric.
inline Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, const Hyperparameters& th,
                                     KernelKind which = KernelKind::value) {
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Point a = X.row(i).transpose();
        K(i, i) = kernel_eval(a, a, th, which);
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = kernel_eval(a, X.row(j).transpose(), th, which);
            K(i, j) = v;
            K(j, i) = v;
        }
    }
    return K;
}

/// Diagonal jitter schedule for SPD factorization: 1e-10 * scale, raised by
/// 10x per failed attempt up to 1e-4 * scale.
struct JitterPolicy {
    double scale = 0.0;         // typically sigma_f^2 (or sf^2/l3^2 for K')
    bool try_exact_first = true;
    double first = 1e-10;
    double last = 1e-4;
};

/// Cholesky factor of A + jitter*I.
class SpdFactor {
public:
    SpdFactor() = default;
    SpdFactor(Eigen::LLT<Eigen::MatrixXd> llt, double jitter) : llt_(std::move(llt)), jitter_(jitter) {}

    Eigen::Index size() const { return llt_.matrixLLT().rows(); }
    double jitter() const { return jitter_; }

    double log_det() const {
        const auto& L = llt_.matrixLLT();
        double s = 0.0;
        for (Eigen::Index i = 0; i < L.rows(); ++i) s += std::log(L(i, i));
        return 2.0 * s;
    }

    template <typename Rhs>
    Eigen::MatrixXd solve(const Eigen::MatrixBase<Rhs>& B) const {
        return llt_.solve(B);
    }

    /// L^{-1} B, so that B^T A^{-1} B = ||L^{-1} B||^2 columnwise.
    template <typename Rhs>
    Eigen::MatrixXd half_solve(const Eigen::MatrixBase<Rhs>& B) const {
        return llt_.matrixL().solve(B);
    }

    const Eigen::LLT<Eigen::MatrixXd>& llt() const { return llt_; }

private:
    Eigen::LLT<Eigen::MatrixXd> llt_;
    double jitter_ = 0.0;
};

namespace detail {

inline bool llt_ok(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    if (llt.info() != Eigen::Success) return false;
    const auto& L = llt.matrixLLT();
    for (Eigen::Index i = 0; i < L.rows(); ++i)
        if (!(L(i, i) > 0.0) || !std::isfinite(L(i, i))) return false;
    return true;
}

} // namespace detail

inline SpdFactor factorize_spd(const Eigen::MatrixXd& A, const JitterPolicy& policy = {}) {
    if (A.rows() != A.cols()) throw DomainError("factorize_spd: matrix is not square");
    if (policy.try_exact_first || policy.scale <= 0.0) {
        Eigen::LLT<Eigen::MatrixXd> llt(A);
        if (detail::llt_ok(llt)) return {std::move(llt), 0.0};
        if (policy.scale <= 0.0)
            throw ConditioningError("matrix is not positive definite and no jitter scale was given");
    }
    for (double rel = policy.first; rel <= policy.last * (1.0 + 1e-12); rel *= 10.0) {
        const double jitter = rel * policy.scale;
        Eigen::MatrixXd Aj = A;
        Aj.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(Aj);
        if (detail::llt_ok(llt)) return {std::move(llt), jitter};
    }
    std::ostringstream msg;
    msg << "numerical conditioning failure: matrix of size " << A.rows()
        << " not positive definite after jitter up to " << policy.last * policy.scale;
    throw ConditioningError(msg.str());
}

struct SpdSolution {
    Eigen::MatrixXd x;
    double log_det = 0.0;
    double jitter = 0.0;
};

/// A^{-1} B for symmetric positive definite A, plus log|A| of the (possibly
/// jittered) factor.
inline SpdSolution solve_spd(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                             const JitterPolicy& policy = {}) {
    if (B.rows() != A.rows()) throw DomainError("solve_spd: right-hand side has wrong row count");
    auto f = factorize_spd(A, policy);
    return {f.solve(B), f.log_det(), f.jitter()};
}

} // namespace cgpr
