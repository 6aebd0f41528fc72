#pragma once

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lca/error.hpp"
#include "lca/fsio.hpp"
#include "lca/matrix.hpp"
#include "lca/old.hpp"

namespace lca {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void append_matrix_json(std::string& out, const Matrix& m) {
    out += '[';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        if (r) out += ", ";
        out += '[';
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) out += ", ";
            out += fmt_double(m(r, c));
        }
        out += ']';
    }
    out += ']';
}

inline const nlohmann::json& require_key(const nlohmann::json& j, const char* key) {
    if (!j.contains(key))
        throw CorruptFile(std::string("model file is missing \"") + key + "\"");
    return j.at(key);
}

inline Matrix parse_matrix(const nlohmann::json& j, const char* key,
                           std::size_t rows, std::size_t cols) {
    if (!j.is_array() || j.size() != rows)
        throw CorruptFile(std::string("model key \"") + key + "\" has the wrong shape");
    std::vector<double> flat;
    flat.reserve(rows * cols);
    for (const auto& row : j) {
        if (!row.is_array() || row.size() != cols)
            throw CorruptFile(std::string("model key \"") + key + "\" has the wrong shape");
        for (const auto& v : row) {
            if (!v.is_number())
                throw CorruptFile(std::string("model key \"") + key + "\" holds a non-number");
            flat.push_back(v.get<double>());
        }
    }
    try {
        return Matrix(rows, cols, std::move(flat));
    } catch (const Error&) {
        throw CorruptFile(std::string("model key \"") + key + "\" holds a non-finite value");
    }
}

} // namespace detail

// Matrices are serialized row-major with %.17g, so a save/load round trip
// reproduces every entry bit for bit.
inline std::string model_to_json(std::size_t c, std::size_t k, bool centered,
                                 const std::vector<double>& mean,
                                 const Matrix& w_enc, const Matrix& w_dec) {
    if (w_enc.rows() != c || w_enc.cols() != k || !w_enc.same_shape(w_dec))
        throw ShapeMismatch("model_to_json: matrix shapes disagree with c and k");
    if (centered && mean.size() != c)
        throw ShapeMismatch("model_to_json: mean length disagrees with c");
    std::string out = "{\n";
    out += "  \"format_version\": " + std::to_string(kModelFormatVersion) + ",\n";
    out += "  \"c\": " + std::to_string(c) + ",\n";
    out += "  \"k\": " + std::to_string(k) + ",\n";
    out += std::string("  \"centered\": ") + (centered ? "true" : "false") + ",\n";
    if (centered) {
        out += "  \"mean\": [";
        for (std::size_t i = 0; i < mean.size(); ++i) {
            if (i) out += ", ";
            out += detail::fmt_double(mean[i]);
        }
        out += "],\n";
    }
    out += "  \"w_enc\": ";
    detail::append_matrix_json(out, w_enc);
    out += ",\n  \"w_dec\": ";
    detail::append_matrix_json(out, w_dec);
    out += "\n}\n";
    return out;
}

inline void save_model(const std::string& path, const OldModel& m) {
    write_file_atomic(path, model_to_json(m.c, m.k, m.centered, m.mean,
                                          m.w_enc, m.w_dec.value()));
}

// Penalty-trained decoders are generally not orthonormal; the format stores
// them anyway so their orthogonality can be inspected after the fact.
inline void save_model(const std::string& path, const PenaltyModel& m) {
    write_file_atomic(path, model_to_json(m.c, m.k, false, {}, m.w_enc, m.w_dec));
}

struct RawModel {
    std::size_t c = 0;
    std::size_t k = 0;
    bool centered = false;
    std::vector<double> mean;
    Matrix w_enc;
    Matrix w_dec;
};

// Structural read: shapes and types are enforced, decoder orthonormality is
// not. ortho-check style tooling wants exactly this.
inline RawModel read_model_raw(const std::string& path) {
    const std::string bytes = read_file_bytes(path);
    const nlohmann::json j = nlohmann::json::parse(bytes, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw CorruptFile("not a JSON object: " + path);

    const auto& ver = detail::require_key(j, "format_version");
    if (!ver.is_number_integer())
        throw CorruptFile("model format_version must be an integer: " + path);
    if (ver.get<int>() != kModelFormatVersion)
        throw UnsupportedFormat("model format_version " + ver.dump() +
                                " is not supported: " + path);

    const auto& cj = detail::require_key(j, "c");
    const auto& kj = detail::require_key(j, "k");
    if (!cj.is_number_integer() || !kj.is_number_integer() ||
        cj.get<long long>() < 1 || kj.get<long long>() < 1)
        throw CorruptFile("model c and k must be positive integers: " + path);
    RawModel m;
    m.c = cj.get<std::size_t>();
    m.k = kj.get<std::size_t>();
    if (m.k > m.c)
        throw CorruptFile("model k exceeds c: " + path);

    const auto& cen = detail::require_key(j, "centered");
    if (!cen.is_boolean())
        throw CorruptFile("model centered must be a boolean: " + path);
    m.centered = cen.get<bool>();
    if (m.centered) {
        const auto& mean = detail::require_key(j, "mean");
        if (!mean.is_array() || mean.size() != m.c)
            throw CorruptFile("model mean has the wrong length: " + path);
        for (const auto& v : mean) {
            if (!v.is_number())
                throw CorruptFile("model mean holds a non-number: " + path);
            m.mean.push_back(v.get<double>());
        }
    }

    m.w_enc = detail::parse_matrix(detail::require_key(j, "w_enc"), "w_enc", m.c, m.k);
    m.w_dec = detail::parse_matrix(detail::require_key(j, "w_dec"), "w_dec", m.c, m.k);
    return m;
}

// Validated load for consumers that rely on the decoder being a frame with
// orthonormal columns. The tolerance is looser than freshly trained models
// need, to admit files written by other tools at lower precision.
inline OldModel load_model(const std::string& path) {
    RawModel raw = read_model_raw(path);
    if (orthonormality_error(raw.w_dec) > 1e-6)
        throw CorruptFile("model decoder columns are not orthonormal: " + path);
    return OldModel{raw.c,
                    raw.k,
                    std::move(raw.w_enc),
                    StiefelPoint(std::move(raw.w_dec), 1e-6),
                    raw.centered,
                    std::move(raw.mean)};
}

} // namespace lca
