#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "lca/error.hpp"
#include "lca/linalg.hpp"
#include "lca/matrix.hpp"
#include "lca/rng.hpp"
#include "lca/stiefel.hpp"

namespace lca {

// Per-pixel differences between a reference image and a degraded one,
// stored one sample per column. Entries live in [-1, 1] by construction
// (images are [0, 1]); a sample count below the dimension leaves the
// scatter rank-deficient, so that is rejected.
class DifferenceDataset {
public:
    explicit DifferenceDataset(Matrix samples) : samples_(std::move(samples)) {
        if (samples_.rows() == 0 || samples_.cols() < samples_.rows())
            throw DegenerateData("DifferenceDataset needs at least as many samples as channels");
        for (double v : samples_.data())
            if (v < -1.0 - 1e-12 || v > 1.0 + 1e-12)
                throw DegenerateData("DifferenceDataset entries must lie in [-1, 1]");
    }

    std::size_t channels() const { return samples_.rows(); }
    std::size_t count() const { return samples_.cols(); }
    const Matrix& samples() const { return samples_; }

private:
    Matrix samples_;
};

// Linear orthogonal autoencoder for image differences: w_enc maps a sample
// to k coefficients, the orthonormal w_dec maps them back. Optional
// centering stores the per-channel sample mean that was subtracted.
struct OldModel {
    std::size_t c;
    std::size_t k;
    Matrix w_enc;        // c x k
    StiefelPoint w_dec;  // c x k, orthonormal columns
    bool centered = false;
    std::vector<double> mean; // c entries when centered, else empty
};

// f(W, W~) = || A - W~ (W^T A) ||_F^2
inline double reconstruction_loss(const Matrix& w, const StiefelPoint& w_tilde,
                                  const Matrix& a) {
    if (w.rows() != a.rows() || !w.same_shape(w_tilde.value()))
        throw ShapeMismatch("reconstruction_loss: shapes disagree");
    const Matrix b = w.transpose() * a;
    const Matrix r = a - w_tilde.value() * b;
    const double n = r.frobenius_norm();
    return n * n;
}

struct Gradients {
    Matrix w;       // df / dW = -2 A (A - W~ B)^T W~
    Matrix w_tilde; // df / dW~ = -2 (A - W~ B) B^T, with B = W^T A
};

inline Gradients gradients(const Matrix& w, const StiefelPoint& w_tilde, const Matrix& a) {
    if (w.rows() != a.rows() || !w.same_shape(w_tilde.value()))
        throw ShapeMismatch("gradients: shapes disagree");
    const Matrix b = w.transpose() * a;
    const Matrix r = a - w_tilde.value() * b;
    Gradients g{Matrix(-2.0 * (a * (r.transpose() * w_tilde.value()))),
                Matrix(-2.0 * (r * b.transpose()))};
    return g;
}

// Top-k eigenvectors of the uncentered scatter A A^T, eigenvalues
// descending. Differences are not mean-centered here by design: the model
// operates on raw image differences, not deviations from their mean.
inline Matrix compute_pca_subspace(const Matrix& a, std::size_t k) {
    if (k < 1 || k > a.rows())
        throw ShapeMismatch("compute_pca_subspace: k out of range");
    const EigenDecomposition eig = sym_eig(multiply_transposed(a, a));
    if (k < a.rows()) {
        const double gap = eig.values[k - 1] - eig.values[k];
        if (gap <= 1e-9 * std::max(1.0, eig.values.front()))
            throw DegenerateData("compute_pca_subspace: eigengap at the cut is zero");
    }
    Matrix sub(a.rows(), k);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t r = 0; r < a.rows(); ++r)
            sub(r, j) = eig.vectors(r, j);
    return sub;
}

struct TrainOptions {
    std::size_t k = 1;
    OptimConfig optim;
    bool centered = false;
};

struct TrainResult {
    OldModel model;
    DescentTrace trace;
};

namespace detail {

inline Matrix column_subset(const Matrix& a, const std::vector<std::size_t>& idx) {
    Matrix s(a.rows(), idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j)
        for (std::size_t r = 0; r < a.rows(); ++r)
            s(r, j) = a(r, idx[j]);
    return s;
}

inline Matrix centered_samples(const Matrix& a, std::vector<double>& mean_out) {
    mean_out.assign(a.rows(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double m = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) m += a(r, j);
        mean_out[r] = m / static_cast<double>(a.cols());
    }
    Matrix c = a;
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t j = 0; j < a.cols(); ++j)
            c(r, j) -= mean_out[r];
    return c;
}

} // namespace detail

// Alternating training loop: a Euclidean gradient step on the encoder, then
// a projected-gradient step with retraction on the decoder. AUTO step sizes
// are 1/L per block (L = 2 ||A A^T||_2 for the encoder, 2 ||B B^T||_2 for
// the decoder, recomputed as the encoder moves), which keeps the full-batch
// loss trace non-increasing. Both matrices start from the same seeded
// orthonormal frame.
//
// Every iteration quantity depends on the data only through the c x c
// scatter T = A A^T:
//   loss       = tr T - 2 tr(W^T T W~) + tr((W~^T W~)(W^T T W))
//   df / dW    = -2 (T W~ - T W (W~^T W~))
//   df / dW~   = -2 (T W - W~ (W^T T W)),   B B^T = W^T T W
// so the scatter is formed once and the per-iteration cost is independent
// of the sample count.
inline TrainResult train(const DifferenceDataset& data, const TrainOptions& opts) {
    const std::size_t c = data.channels();
    const std::size_t k = opts.k;
    if (k < 1 || k > c)
        throw ShapeMismatch("train: k must satisfy 1 <= k <= channels");
    if (opts.optim.max_iters < 1)
        throw DegenerateData("train: max_iters must be positive");

    std::vector<double> mean;
    const Matrix a_full = opts.centered
                              ? detail::centered_samples(data.samples(), mean)
                              : data.samples();
    const Matrix scatter = multiply_transposed(a_full, a_full);
    double trace_scatter = 0.0;
    for (std::size_t i = 0; i < c; ++i) trace_scatter += scatter(i, i);

    Rng rng(opts.optim.seed);
    const Matrix init = qr_orthonormalize(rng.gaussian_matrix(c, k));
    Matrix w_enc = init;
    StiefelPoint w_dec(init);

    const bool full_batch = opts.optim.batch_size == 0 ||
                            opts.optim.batch_size >= data.count();
    const double enc_lipschitz = 2.0 * spectral_norm(scatter);
    if (enc_lipschitz < 1e-12)
        throw DegenerateData("train: data scatter is numerically zero");

    // loss at (we, wd) against the scatter t, via the trace identity above
    auto scatter_loss = [&](const Matrix& t, double tr_t, const Matrix& we,
                            const Matrix& wd) {
        const Matrix tw = t * we;
        const Matrix m = we.transpose() * tw;
        return tr_t - 2.0 * frobenius_inner(wd, tw) +
               frobenius_inner(wd * m, wd);
    };

    DescentTrace trace;
    double prev_loss = 0.0;
    Matrix t_batch;
    for (int iter = 0; iter < opts.optim.max_iters; ++iter) {
        if (!full_batch) {
            std::vector<std::size_t> idx(opts.optim.batch_size);
            for (auto& i : idx) i = rng.integer(data.count());
            const Matrix batch = detail::column_subset(a_full, idx);
            t_batch = multiply_transposed(batch, batch);
        }
        const Matrix& t = full_batch ? scatter : t_batch;

        // encoder step; this block is quadratic in W with Hessian
        // 2 A A^T (x) I, so 1/L gives guaranteed descent in it
        const Matrix gram_wd = w_dec.value().transpose() * w_dec.value();
        const Matrix g_w = -2.0 * (t * w_dec.value() - (t * w_enc) * gram_wd);
        const double enc_step = opts.optim.step_size
                                    ? *opts.optim.step_size
                                    : 1.0 / enc_lipschitz;
        w_enc = euclidean_step(w_enc, g_w, enc_step);

        // decoder step at the updated encoder
        const Matrix tw = t * w_enc;
        const Matrix m = w_enc.transpose() * tw; // B B^T
        const double bb_norm = spectral_norm(m);
        if (!opts.optim.step_size && bb_norm < 5e-13)
            throw DegenerateData("train: encoded data is numerically zero");
        const double dec_step = opts.optim.step_size ? *opts.optim.step_size
                                                     : 1.0 / (2.0 * bb_norm);
        const TangentVector g2 =
            riemannian_gradient(w_dec, -2.0 * (tw - w_dec.value() * m));
        w_dec = retract(w_dec, -dec_step * g2.direction());

        const double loss =
            scatter_loss(scatter, trace_scatter, w_enc, w_dec.value());
        const double gn = g2.norm();
        trace.rows.push_back({iter, loss, gn, w_dec.orthonormality()});
        if (iter > 0 && full_batch && !opts.optim.step_size &&
            loss > prev_loss + 1e-9)
            throw DescentViolation("train: full-batch loss increased under AUTO steps");
        prev_loss = loss;
        if (gn <= opts.optim.grad_tol) break;
    }

    OldModel model{c, k, std::move(w_enc), std::move(w_dec), opts.centered,
                   std::move(mean)};
    return TrainResult{std::move(model), std::move(trace)};
}

struct Decomposition2 {
    Matrix principal; // W~ W~^T f
    Matrix residual;  // f - principal
};

// Split features into the decoder span and its orthogonal complement.
// principal + residual reconstructs the input to machine precision.
inline Decomposition2 decompose(const OldModel& model, const Matrix& features) {
    if (features.rows() != model.c)
        throw ShapeMismatch("decompose: feature dimension disagrees with model");
    const Matrix& wd = model.w_dec.value();
    Matrix principal = wd * (wd.transpose() * features);
    Matrix residual = features - principal;
    return Decomposition2{std::move(principal), std::move(residual)};
}

enum class PerturbMode { Principal, Residual };

// features + (alpha - 1) * component; algebraically alpha * principal +
// residual (or principal + alpha * residual), written so alpha = 1 returns
// the features unchanged. A centered model splits the deviation from its
// stored mean; the mean itself is never rescaled.
inline Matrix apply_coefficient(const OldModel& model, const Matrix& features,
                                double alpha, PerturbMode mode) {
    if (!std::isfinite(alpha))
        throw DegenerateData("apply_coefficient: alpha must be finite");
    Matrix f = features;
    if (model.centered) {
        if (model.mean.size() != model.c)
            throw ShapeMismatch("apply_coefficient: centered model has no mean");
        for (std::size_t r = 0; r < f.rows(); ++r)
            for (std::size_t j = 0; j < f.cols(); ++j) f(r, j) -= model.mean[r];
    }
    const Decomposition2 parts = decompose(model, f);
    const Matrix& comp =
        (mode == PerturbMode::Principal) ? parts.principal : parts.residual;
    return features + (alpha - 1.0) * comp;
}

struct VarianceReport {
    std::string method;
    std::vector<std::string> component_names;
    std::vector<double> shares;   // sums to 1
    double principal_share = 0.0; // luminance-related part
    double residual_share = 0.0;  // 1 - principal_share

    void write_csv(std::ostream& os) const {
        os << "method,component,share\n";
        char buf[160];
        for (std::size_t i = 0; i < shares.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%s,%s,%.17g\n", method.c_str(),
                          component_names[i].c_str(), shares[i]);
            os << buf;
        }
    }
};

namespace detail {

// Deterministic orthonormal completion of a frame: Gram-Schmidt against the
// standard basis, skipping directions the frame already covers.
inline Matrix complete_basis(const Matrix& frame) {
    const std::size_t c = frame.rows(), k = frame.cols();
    Matrix basis(c, c);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t r = 0; r < c; ++r) basis(r, j) = frame(r, j);
    std::size_t have = k;
    for (std::size_t e = 0; e < c && have < c; ++e) {
        std::vector<double> v(c, 0.0);
        v[e] = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t i = 0; i < have; ++i) {
                double dot = 0.0;
                for (std::size_t r = 0; r < c; ++r) dot += basis(r, i) * v[r];
                for (std::size_t r = 0; r < c; ++r) v[r] -= dot * basis(r, i);
            }
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 1e-8) {
            for (std::size_t r = 0; r < c; ++r) basis(r, have) = v[r] / norm;
            ++have;
        }
    }
    if (have < c)
        throw NumericFailure("complete_basis: could not complete the frame");
    return basis;
}

inline double plane_variance(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

} // namespace detail

// Express every sample in the orthonormal basis [w_dec | complement] and
// report the per-coordinate variance shares. Shares of individual residual
// coordinates depend on the completion; their sum (residual_share) does not.
inline VarianceReport variance_report(const OldModel& model,
                                      const DifferenceDataset& data) {
    if (data.channels() != model.c)
        throw ShapeMismatch("variance_report: dataset dimension disagrees with model");
    const Matrix basis = detail::complete_basis(model.w_dec.value());
    const Matrix coords = basis.transpose() * data.samples();

    VarianceReport rep;
    rep.method = "old";
    std::vector<double> vars(model.c);
    double total = 0.0;
    for (std::size_t i = 0; i < model.c; ++i) {
        std::vector<double> row(coords.cols());
        for (std::size_t j = 0; j < coords.cols(); ++j) row[j] = coords(i, j);
        vars[i] = detail::plane_variance(row);
        total += vars[i];
    }
    if (total < 1e-300)
        throw DegenerateData("variance_report: data has no variance");
    for (std::size_t i = 0; i < model.c; ++i) {
        rep.shares.push_back(vars[i] / total);
        rep.component_names.push_back(
            i < model.k ? "principal_" + std::to_string(i)
                        : "residual_" + std::to_string(i - model.k));
    }
    for (std::size_t i = 0; i < model.k; ++i) rep.principal_share += rep.shares[i];
    rep.residual_share = 1.0 - rep.principal_share;
    return rep;
}

struct OrthogonalityReport {
    Matrix grid;  // W~^T W~
    double error; // || grid - I ||_F
};

inline OrthogonalityReport orthogonality_report(const Matrix& w_dec) {
    OrthogonalityReport rep{Matrix(w_dec.transpose() * w_dec), 0.0};
    rep.error = orthonormality_error(w_dec);
    return rep;
}

struct PenaltyModel {
    std::size_t c;
    std::size_t k;
    Matrix w_enc;
    Matrix w_dec; // generally not orthonormal; that is the point
    double ortho_error = 0.0;
};

struct PenaltyTrainResult {
    PenaltyModel model;
    DescentTrace trace;
};

// Soft-constraint baseline: minimize the reconstruction loss plus
// mu * || W~^T W~ - I ||_F^2 by plain gradient descent on both matrices.
// AUTO step sizes bound the local curvature: the reconstruction part by the
// usual 1/L terms (scaled by ||W~||_2^2 for the encoder block) and the
// quartic penalty by mu (12 ||W~||_2^2 + 4).
inline PenaltyTrainResult train_penalty_baseline(const DifferenceDataset& data,
                                                 std::size_t k, double mu,
                                                 const OptimConfig& cfg) {
    const std::size_t c = data.channels();
    if (k < 1 || k > c)
        throw ShapeMismatch("train_penalty_baseline: k out of range");
    if (mu <= 0.0)
        throw DegenerateData("train_penalty_baseline: mu must be positive");
    if (cfg.max_iters < 1)
        throw DegenerateData("train_penalty_baseline: max_iters must be positive");

    Rng rng(cfg.seed);
    const Matrix init = qr_orthonormalize(rng.gaussian_matrix(c, k));
    Matrix w_enc = init, w_dec = init;

    // the reconstruction term only sees the data through T = A A^T (same
    // identities as in train()), so the loop never touches the samples
    const Matrix scatter = multiply_transposed(data.samples(), data.samples());
    double trace_scatter = 0.0;
    for (std::size_t i = 0; i < c; ++i) trace_scatter += scatter(i, i);
    const double scatter_norm = spectral_norm(scatter);
    if (scatter_norm < 1e-12)
        throw DegenerateData("train_penalty_baseline: data scatter is numerically zero");

    const Matrix eye = Matrix::identity(k);
    DescentTrace trace;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        const double dec_sq = spectral_norm(w_dec);
        const double dec_sq2 = dec_sq * dec_sq;

        Matrix gram_wd = w_dec.transpose() * w_dec;
        const Matrix g_enc =
            -2.0 * (scatter * w_dec - (scatter * w_enc) * gram_wd);
        const double enc_step =
            cfg.step_size ? *cfg.step_size
                          : 1.0 / (2.0 * scatter_norm * std::max(1.0, dec_sq2));
        w_enc = w_enc - enc_step * g_enc;

        const Matrix tw = scatter * w_enc;
        const Matrix m = w_enc.transpose() * tw; // B B^T
        const Matrix gram_err = w_dec.transpose() * w_dec - eye;
        const Matrix g_dec =
            -2.0 * (tw - w_dec * m) + 4.0 * mu * (w_dec * gram_err);
        const double recon_l = 2.0 * spectral_norm(m);
        const double dec_step =
            cfg.step_size ? *cfg.step_size
                          : 1.0 / (recon_l + mu * (12.0 * dec_sq2 + 4.0));
        w_dec = w_dec - dec_step * g_dec;

        gram_wd = w_dec.transpose() * w_dec;
        const double recon = trace_scatter - 2.0 * frobenius_inner(w_dec, tw) +
                             frobenius_inner(gram_wd, m);
        const double ortho = orthonormality_error(w_dec);
        const double loss = recon + mu * ortho * ortho;
        trace.rows.push_back({iter, loss, g_dec.frobenius_norm(), ortho});
        if (g_dec.frobenius_norm() <= cfg.grad_tol) break;
    }

    PenaltyModel model{c, k, std::move(w_enc), std::move(w_dec), 0.0};
    model.ortho_error = orthonormality_error(model.w_dec);
    return PenaltyTrainResult{std::move(model), std::move(trace)};
}

} // namespace lca
