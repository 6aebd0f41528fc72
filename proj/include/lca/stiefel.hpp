#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "lca/error.hpp"
#include "lca/linalg.hpp"
#include "lca/matrix.hpp"

namespace lca {

// A c x k frame with orthonormal columns (c >= k >= 1). Square frames are
// allowed; they are orthogonal matrices and still satisfy every identity
// used here. Construction enforces the orthonormality residual <= tol;
// the default is tight because freshly computed frames are accurate to
// machine precision, loaders may pass something looser.
class StiefelPoint {
public:
    explicit StiefelPoint(Matrix value, double tol = 1e-9) : value_(std::move(value)) {
        if (value_.cols() < 1 || value_.rows() < value_.cols())
            throw ShapeMismatch("StiefelPoint expects rows >= cols >= 1");
        if (orthonormality_error(value_) > tol)
            throw NumericFailure("StiefelPoint: columns are not orthonormal");
    }

    const Matrix& value() const { return value_; }
    std::size_t rows() const { return value_.rows(); }
    std::size_t cols() const { return value_.cols(); }

    double orthonormality() const { return orthonormality_error(value_); }

private:
    Matrix value_;
};

// || x^T d + d^T x ||_F; zero (to tolerance) iff d is tangent at x.
inline double tangency_error(const Matrix& x, const Matrix& d) {
    if (!x.same_shape(d)) throw ShapeMismatch("tangency_error shapes disagree");
    const Matrix xtd = x.transpose() * d;
    return (xtd + xtd.transpose()).frobenius_norm();
}

// A direction in the tangent space at a point; x^T d must be skew-symmetric
// (residual <= 1e-9) or construction fails.
class TangentVector {
public:
    TangentVector(StiefelPoint at, Matrix direction)
        : at_(std::move(at)), direction_(std::move(direction)) {
        if (!at_.value().same_shape(direction_))
            throw ShapeMismatch("TangentVector shape disagrees with its base point");
        if (tangency_error(at_.value(), direction_) > 1e-9)
            throw NumericFailure("TangentVector: direction is not tangent");
    }

    const StiefelPoint& at() const { return at_; }
    const Matrix& direction() const { return direction_; }
    double norm() const { return direction_.frobenius_norm(); }

private:
    StiefelPoint at_;
    Matrix direction_;
};

// grad f(X) = G - X X^T G / 2 - X G^T X / 2. This is the orthogonal
// projection of the Euclidean gradient G onto the tangent space at X; it is
// idempotent on tangent directions.
inline TangentVector riemannian_gradient(const StiefelPoint& x, const Matrix& egrad) {
    const Matrix& xv = x.value();
    if (!xv.same_shape(egrad))
        throw ShapeMismatch("riemannian_gradient: gradient shape disagrees with point");
    const Matrix xtg = xv.transpose() * egrad; // k x k
    const Matrix dir = egrad - 0.5 * (xv * xtg) - 0.5 * (xv * xtg.transpose());
    return TangentVector(x, dir);
}

// R_X(Xi) = (X + Xi) (I + Xi^T Xi)^{-1/2}. A zero direction reproduces X
// exactly because the inner matrix is then exactly the identity.
//
// The normalizer also carries X^T Xi + Xi^T X. That term is identically zero
// for tangent directions, but its floating-point value holds the roundoff
// skew of the projection; folding it in stops orthonormality errors from
// compounding geometrically over long step sequences.
inline StiefelPoint retract(const StiefelPoint& x, const Matrix& direction) {
    const Matrix& xv = x.value();
    if (!xv.same_shape(direction))
        throw ShapeMismatch("retract: direction shape disagrees with point");
    const std::size_t k = xv.cols();
    const Matrix cross = xv.transpose() * direction;
    Matrix inner = direction.transpose() * direction + cross + cross.transpose();
    for (std::size_t i = 0; i < k; ++i) inner(i, i) += 1.0;
    Matrix normalizer;
    try {
        normalizer = inv_sqrt_psd(inner);
    } catch (const Error& e) {
        throw NumericFailure(std::string("retract: normalizer failed: ") + e.what());
    }
    return StiefelPoint((xv + direction) * normalizer);
}

inline StiefelPoint retract(const StiefelPoint& x, const TangentVector& xi) {
    return retract(x, xi.direction());
}

// Plain gradient step in the ambient space; no manifold structure.
inline Matrix euclidean_step(const Matrix& w, const Matrix& egrad, double step_size) {
    if (!w.same_shape(egrad))
        throw ShapeMismatch("euclidean_step: shapes disagree");
    return w - step_size * egrad;
}

// Project the Euclidean gradient, then retract along its negative.
inline StiefelPoint manifold_step(const StiefelPoint& x, const Matrix& egrad,
                                  double step_size) {
    const TangentVector g = riemannian_gradient(x, egrad);
    return retract(x, -step_size * g.direction());
}

// f(R_x(t xi)); the building block for directional-derivative checks.
template <typename F>
double evaluate_retracted_loss(F&& f, const StiefelPoint& x, const Matrix& xi, double t) {
    return std::forward<F>(f)(retract(x, t * xi).value());
}

// L = 2 ||B B^T||_2, the gradient Lipschitz constant of
// X -> ||A - X B||_F^2 over matrices with ||X||_2 bounded by 1.
inline double lipschitz_constant(const Matrix& b) {
    const double l = 2.0 * spectral_norm(multiply_transposed(b, b));
    if (l < 1e-12)
        throw DegenerateData("lipschitz_constant: B B^T is numerically zero");
    return l;
}

struct OptimConfig {
    std::optional<double> step_size; // empty selects AUTO, 1/L
    int max_iters = 5000;
    double grad_tol = 1e-10;
    std::size_t batch_size = 0;      // 0 = full batch; consumed by trainers
    std::uint64_t seed = 42;
};

struct DescentTrace {
    struct Row {
        int iter;
        double loss;
        double grad_norm;
        double ortho_err;
    };
    std::vector<Row> rows;

    void write_csv(std::ostream& os) const {
        os << "iter,loss,grad_norm,ortho_err\n";
        char buf[128];
        for (const Row& r : rows) {
            std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n",
                          r.iter, r.loss, r.grad_norm, r.ortho_err);
            os << buf;
        }
    }
};

// Smooth cost with its Euclidean gradient; `lipschitz` enables the AUTO step
// size. Callbacks receive the frame as a plain matrix.
struct CostFunction {
    std::function<double(const Matrix&)> value;
    std::function<Matrix(const Matrix&)> gradient;
    std::optional<double> lipschitz;
};

struct OptimResult {
    StiefelPoint point;
    DescentTrace trace;
};

// Projected-gradient descent with the closed-form retraction. With the AUTO
// step size (1/L) the recorded full-batch losses are non-increasing; an
// increase beyond 1e-9 raises DescentViolation rather than being smoothed
// over. Stops early once the Riemannian gradient norm falls below grad_tol.
inline OptimResult optimize(const CostFunction& f, const StiefelPoint& x0,
                            const OptimConfig& cfg) {
    if (!f.value || !f.gradient)
        throw DegenerateData("optimize: cost function callbacks are empty");
    double step = 0.0;
    bool guard_descent = false;
    if (cfg.step_size) {
        if (*cfg.step_size <= 0.0)
            throw DegenerateData("optimize: step size must be positive");
        step = *cfg.step_size;
    } else {
        if (!f.lipschitz)
            throw DegenerateData("optimize: AUTO step size needs a Lipschitz constant");
        if (*f.lipschitz < 1e-12)
            throw DegenerateData("optimize: Lipschitz constant is numerically zero");
        step = 1.0 / *f.lipschitz;
        guard_descent = true; // descent guarantee only holds at 1/L, full batch
    }

    StiefelPoint x = x0;
    DescentTrace trace;
    double prev_loss = 0.0;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        const double loss = f.value(x.value());
        const TangentVector g = riemannian_gradient(x, f.gradient(x.value()));
        const double gn = g.norm();
        trace.rows.push_back({iter, loss, gn, x.orthonormality()});
        if (iter > 0 && guard_descent && loss > prev_loss + 1e-9)
            throw DescentViolation("optimize: loss increased under the 1/L step");
        prev_loss = loss;
        if (gn <= cfg.grad_tol) break;
        x = retract(x, -step * g.direction());
    }
    return OptimResult{std::move(x), std::move(trace)};
}

} // namespace lca
