// lca: train, apply, and analyze linear orthogonal splits of image
// differences into luminance-related and luminance-unrelated parts.
//
// Exit codes: 0 success, 2 usage or file problems, 3 numeric failures.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "lca/lca.hpp"

namespace fs = std::filesystem;

namespace {

bool is_usage_error(const lca::Error& e) {
    return dynamic_cast<const lca::ShapeMismatch*>(&e) ||
           dynamic_cast<const lca::IoError*>(&e) ||
           dynamic_cast<const lca::UnsupportedFormat*>(&e) ||
           dynamic_cast<const lca::CorruptFile*>(&e) ||
           dynamic_cast<const lca::TooSmall*>(&e) ||
           dynamic_cast<const lca::UnsupportedMethod*>(&e);
}

std::size_t thread_cap() {
    if (const char* env = std::getenv("LCA_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1)
            throw lca::IoError("LCA_THREADS must be a positive integer");
        return static_cast<std::size_t>(v);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc ? hc : 1;
}

struct PairPaths {
    std::string gt;
    std::string in;
};

std::vector<PairPaths> pairs_from_dir(const std::string& dir) {
    if (!fs::is_directory(dir))
        throw lca::IoError("not a directory: " + dir);
    const std::vector<std::string> exts = {".png", ".ppm", ".pgm"};
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file())
            names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());

    std::vector<PairPaths> pairs;
    for (const std::string& name : names) {
        std::string stem;
        for (const std::string& ext : exts) {
            const std::string tail = ".gt" + ext;
            if (name.size() > tail.size() &&
                name.compare(name.size() - tail.size(), tail.size(), tail) == 0)
                stem = name.substr(0, name.size() - tail.size());
        }
        if (stem.empty()) continue;
        std::string in_name;
        for (const std::string& ext : exts) {
            const std::string candidate = stem + ".in" + ext;
            if (std::binary_search(names.begin(), names.end(), candidate)) {
                in_name = candidate;
                break;
            }
        }
        if (in_name.empty())
            throw lca::IoError("no matching *.in image for " + name + " in " + dir);
        pairs.push_back({(fs::path(dir) / name).string(),
                         (fs::path(dir) / in_name).string()});
    }
    if (pairs.empty())
        throw lca::IoError("no <stem>.gt.<ext> / <stem>.in.<ext> pairs found in " + dir);
    return pairs;
}

// One pair per line: the reference image path, whitespace, the degraded
// image path. Blank lines and lines starting with # are skipped; relative
// paths are taken relative to the manifest's directory.
std::vector<PairPaths> pairs_from_manifest(const std::string& path) {
    const std::string bytes = lca::read_file_bytes(path);
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        return fs::path(p).is_absolute() ? p : (base / p).string();
    };
    std::vector<PairPaths> pairs;
    std::istringstream lines(bytes);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        std::istringstream tokens(line);
        std::string gt, in, extra;
        if (!(tokens >> gt) || gt[0] == '#') continue;
        if (!(tokens >> in) || (tokens >> extra))
            throw lca::IoError("manifest line " + std::to_string(lineno) +
                               " needs exactly two paths: " + path);
        pairs.push_back({resolve(gt), resolve(in)});
    }
    if (pairs.empty())
        throw lca::IoError("manifest lists no image pairs: " + path);
    return pairs;
}

// Load every pair and turn it into difference columns, using up to
// LCA_THREADS workers (default: hardware concurrency).
lca::DifferenceDataset load_difference_dataset(const std::vector<PairPaths>& pairs,
                                               std::size_t patch) {
    std::vector<lca::Matrix> parts(pairs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        std::size_t i;
        while ((i = next.fetch_add(1)) < pairs.size()) {
            try {
                const lca::ImageBuffer gt = lca::load_image(pairs[i].gt);
                const lca::ImageBuffer in = lca::load_image(pairs[i].in);
                parts[i] = lca::difference_columns(lca::difference_image(gt, in), patch);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::min(thread_cap(), pairs.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (std::thread& t : threads) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return lca::DifferenceDataset(lca::hconcat(parts));
}

void write_text_output(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::fputs(text.c_str(), stdout);
        return;
    }
    lca::write_file_atomic(path, text);
}

std::optional<double> parse_step(const std::string& step) {
    if (step == "auto") return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(step.c_str(), &end);
    if (end == step.c_str() || *end != '\0' || !(v > 0.0))
        throw lca::UnsupportedMethod("--step must be 'auto' or a positive number");
    return v;
}

// Models trained on p x p patches have dimension channels * p * p; recover
// p so images can be tiled the same way at application time.
std::size_t infer_patch(std::size_t model_dim, std::size_t channels) {
    if (model_dim % channels != 0)
        throw lca::ShapeMismatch("model dimension does not match the image channels");
    const std::size_t per = model_dim / channels;
    const auto p = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(per))));
    if (p < 1 || p * p != per)
        throw lca::ShapeMismatch("model dimension is not channels x p^2 for any patch size p");
    return p;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void append_report_csv(std::string& out, const lca::VarianceReport& rep) {
    for (std::size_t i = 0; i < rep.shares.size(); ++i)
        out += rep.method + "," + rep.component_names[i] + "," +
               format_double(rep.shares[i]) + "\n";
    out += rep.method + ",luminance_related," + format_double(rep.principal_share) + "\n";
    out += rep.method + ",luminance_unrelated," + format_double(rep.residual_share) + "\n";
}

struct TrainArgs {
    std::string data_dir;
    std::string manifest;
    std::string model_path;
    std::string trace_path;
    std::size_t k = 1;
    std::string optimizer = "geometric";
    double mu = 10.0;
    std::string step = "auto";
    int max_iters = 5000;
    double grad_tol = 1e-10;
    std::uint64_t seed = 42;
    std::size_t batch = 0;
    bool centered = false;
    std::size_t patch = 1;
};

void run_train(const TrainArgs& args) {
    const std::vector<PairPaths> pairs = args.data_dir.empty()
                                             ? pairs_from_manifest(args.manifest)
                                             : pairs_from_dir(args.data_dir);
    const lca::DifferenceDataset data = load_difference_dataset(pairs, args.patch);

    lca::OptimConfig cfg;
    cfg.step_size = parse_step(args.step);
    cfg.max_iters = args.max_iters;
    cfg.grad_tol = args.grad_tol;
    cfg.batch_size = args.batch;
    cfg.seed = args.seed;

    lca::DescentTrace trace;
    double final_loss = 0.0, ortho = 0.0;
    if (args.optimizer == "geometric") {
        lca::TrainOptions opts{args.k, cfg, args.centered};
        lca::TrainResult result = lca::train(data, opts);
        lca::save_model(args.model_path, result.model);
        trace = std::move(result.trace);
        ortho = result.model.w_dec.orthonormality();
        final_loss = trace.rows.back().loss;
    } else {
        if (args.centered || args.batch != 0)
            throw lca::UnsupportedMethod(
                "--centered and --batch need --optimizer geometric");
        lca::PenaltyTrainResult result =
            lca::train_penalty_baseline(data, args.k, args.mu, cfg);
        lca::save_model(args.model_path, result.model);
        trace = std::move(result.trace);
        ortho = result.model.ortho_error;
        final_loss = trace.rows.back().loss;
    }

    if (!args.trace_path.empty()) {
        std::ostringstream ss;
        trace.write_csv(ss);
        lca::write_file_atomic(args.trace_path, ss.str());
    }
    std::printf("optimizer=%s k=%zu dim=%zu samples=%zu iters=%zu "
                "final_loss=%.9g ortho_err=%.3e\n",
                args.optimizer.c_str(), args.k, data.channels(), data.count(),
                trace.rows.size(), final_loss, ortho);
    std::printf("wrote %s\n", args.model_path.c_str());
}

struct AnalyzeArgs {
    std::string input_path;
    std::string gt_path;
    std::string model_path;
    std::string methods = "all";
    std::string out_path;
};

void run_analyze(const AnalyzeArgs& args) {
    const lca::ImageBuffer gt = lca::load_image(args.gt_path);
    const lca::ImageBuffer in = lca::load_image(args.input_path);
    const lca::DifferenceImage diff = lca::difference_image(gt, in);

    std::vector<std::string> names;
    if (args.methods == "all") {
        names = {"old", "ycbcr", "hsv", "lab", "retinex", "fourier"};
    } else {
        std::stringstream ss(args.methods);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) names.push_back(item);
        if (names.empty())
            throw lca::UnsupportedMethod("--methods lists no methods");
    }

    std::string csv = "method,component,share\n";
    for (const std::string& name : names) {
        if (name == "old") {
            const lca::OldModel model = [&]() {
                if (!args.model_path.empty()) return lca::load_model(args.model_path);
                std::fprintf(stderr,
                             "note: no --model given, training one with defaults\n");
                return lca::train(lca::dataset_from_difference(diff),
                                  lca::TrainOptions{})
                    .model;
            }();
            const std::size_t patch = infer_patch(model.c, diff.channels);
            append_report_csv(
                csv, lca::variance_report(model, lca::dataset_from_difference(diff, patch)));
        } else {
            append_report_csv(csv,
                              lca::baseline_variance_report(lca::parse_method(name), diff));
        }
    }
    write_text_output(args.out_path, csv);
}

struct ApplyArgs {
    std::string model_path;
    std::string image_path;
    double alpha = 1.0;
    std::string mode = "principal";
    std::string out_path;
};

void run_apply(const ApplyArgs& args) {
    const lca::OldModel model = lca::load_model(args.model_path);
    const lca::ImageBuffer img = lca::load_image(args.image_path);
    const std::size_t patch = infer_patch(model.c, img.channels());
    const lca::Matrix cols = lca::image_columns(img, patch);
    const lca::Matrix scaled = lca::apply_coefficient(
        model, cols, args.alpha,
        args.mode == "principal" ? lca::PerturbMode::Principal
                                 : lca::PerturbMode::Residual);
    lca::save_image(args.out_path, lca::replace_image_columns(img, scaled, patch));
    std::printf("wrote %s\n", args.out_path.c_str());
}

struct MetricsArgs {
    std::string a_path;
    std::string b_path;
    std::string out_path;
};

void run_metrics(const MetricsArgs& args) {
    const lca::ImageBuffer a = lca::load_image(args.a_path);
    const lca::ImageBuffer b = lca::load_image(args.b_path);
    std::string json = "{\n";
    json += "  \"psnr\": " + format_double(lca::psnr(a, b)) + ",\n";
    json += "  \"ssim\": " + format_double(lca::ssim(a, b)) + ",\n";
    json += "  \"hist_match\": " + format_double(lca::histogram_match_score(a, b)) + "\n";
    json += "}\n";
    write_text_output(args.out_path, json);
}

struct OrthoCheckArgs {
    std::string model_path;
    std::string grid_path;
    double tol = 1e-6;
};

int run_ortho_check(const OrthoCheckArgs& args) {
    const lca::RawModel raw = lca::read_model_raw(args.model_path);
    const lca::OrthogonalityReport rep = lca::orthogonality_report(raw.w_dec);
    std::printf("orthonormality_error %.17g\n", rep.error);
    if (!args.grid_path.empty()) {
        std::string csv;
        for (std::size_t i = 0; i < rep.grid.rows(); ++i) {
            for (std::size_t j = 0; j < rep.grid.cols(); ++j) {
                if (j) csv += ",";
                csv += format_double(rep.grid(i, j));
            }
            csv += "\n";
        }
        lca::write_file_atomic(args.grid_path, csv);
    }
    if (rep.error > args.tol) {
        std::fprintf(stderr, "error: decoder orthonormality %.3e exceeds tolerance %.3e\n",
                     rep.error, args.tol);
        return 2;
    }
    return 0;
}

struct SynthArgs {
    std::string out_in;
    std::string out_gt;
    std::size_t width = 256;
    std::size_t height = 256;
    double gain = 1.4;
    double gamma = 1.2;
};

void run_synth(const SynthArgs& args) {
    const lca::SynthPair pair =
        lca::synthesize_pair(args.width, args.height, args.gain, args.gamma);
    lca::save_image(args.out_gt, pair.ground_truth);
    lca::save_image(args.out_in, pair.degraded);
    std::printf("wrote %s and %s\n", args.out_gt.c_str(), args.out_in.c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"orthogonal decoupling of image differences into "
                 "luminance-related and luminance-unrelated parts"};
    app.require_subcommand(1);

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand(
        "train", "fit a model to the differences of image pairs");
    auto* source = train->add_option_group("source", "where the image pairs come from");
    source->add_option("--data", train_args.data_dir,
                       "directory of <stem>.gt.<ext> / <stem>.in.<ext> images");
    source->add_option("--manifest", train_args.manifest,
                       "file listing one 'gt in' path pair per line");
    source->require_option(1);
    train->add_option("--model", train_args.model_path, "output model JSON path")
        ->required();
    train->add_option("--trace", train_args.trace_path, "optional descent trace CSV");
    train->add_option("-k,--components", train_args.k,
                      "number of luminance-related components");
    train->add_option("--optimizer", train_args.optimizer, "training method")
        ->check(CLI::IsMember({"geometric", "penalty"}));
    train->add_option("--mu", train_args.mu,
                      "orthogonality penalty weight (penalty optimizer)")
        ->check(CLI::PositiveNumber);
    train->add_option("--step", train_args.step, "'auto' or a fixed step size");
    train->add_option("--max-iters", train_args.max_iters, "iteration budget")
        ->check(CLI::PositiveNumber);
    train->add_option("--grad-tol", train_args.grad_tol,
                      "stop once the gradient norm falls below this");
    train->add_option("--seed", train_args.seed, "seed for the initial frame");
    train->add_option("--batch", train_args.batch,
                      "samples per iteration (0 = full batch)");
    train->add_flag("--centered", train_args.centered,
                    "subtract the mean difference before fitting");
    train->add_option("--patch", train_args.patch,
                      "model p x p pixel patches instead of single pixels")
        ->check(CLI::PositiveNumber);
    train->callback([&]() { run_train(train_args); });

    AnalyzeArgs analyze_args;
    CLI::App* analyze = app.add_subcommand(
        "analyze", "report variance shares of difference decompositions");
    analyze->add_option("--input", analyze_args.input_path, "degraded image")
        ->required();
    analyze->add_option("--gt", analyze_args.gt_path, "reference image")->required();
    analyze->add_option("--model", analyze_args.model_path,
                        "model JSON for the 'old' method (trained on the fly "
                        "with defaults when omitted)");
    analyze->add_option("--methods", analyze_args.methods,
                        "'all' or a comma list of old,ycbcr,hsv,lab,retinex,fourier");
    analyze->add_option("--out", analyze_args.out_path,
                        "CSV output path (stdout when omitted)");
    analyze->callback([&]() { run_analyze(analyze_args); });

    ApplyArgs apply_args;
    CLI::App* apply = app.add_subcommand(
        "apply", "rescale one component of an image and write the result");
    apply->add_option("--model", apply_args.model_path, "model JSON path")->required();
    apply->add_option("--image", apply_args.image_path, "image to perturb")->required();
    apply->add_option("--alpha", apply_args.alpha, "scale factor for the component")
        ->required();
    apply->add_option("--mode", apply_args.mode, "which component to rescale")
        ->check(CLI::IsMember({"principal", "residual"}));
    apply->add_option("--out", apply_args.out_path, "output image path")->required();
    apply->callback([&]() { run_apply(apply_args); });

    MetricsArgs metrics_args;
    CLI::App* metrics = app.add_subcommand(
        "metrics", "psnr, ssim, and histogram overlap of two images");
    metrics->add_option("--a", metrics_args.a_path, "first image")->required();
    metrics->add_option("--b", metrics_args.b_path, "second image")->required();
    metrics->add_option("--out", metrics_args.out_path,
                        "JSON output path (stdout when omitted)");
    metrics->callback([&]() { run_metrics(metrics_args); });

    OrthoCheckArgs ortho_args;
    int ortho_exit = 0;
    CLI::App* ortho = app.add_subcommand(
        "ortho-check", "verify the decoder columns of a model are orthonormal");
    ortho->add_option("--model", ortho_args.model_path, "model JSON path")->required();
    ortho->add_option("--grid", ortho_args.grid_path,
                      "optional CSV of the decoder Gram matrix");
    ortho->add_option("--tol", ortho_args.tol, "largest acceptable residual")
        ->check(CLI::PositiveNumber);
    ortho->callback([&]() { ortho_exit = run_ortho_check(ortho_args); });

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand(
        "synth-pair", "write a synthetic reference/degraded image pair");
    synth->add_option("--out-in", synth_args.out_in, "degraded image path")->required();
    synth->add_option("--out-gt", synth_args.out_gt, "reference image path")->required();
    synth->add_option("--width", synth_args.width, "image width")
        ->check(CLI::PositiveNumber);
    synth->add_option("--height", synth_args.height, "image height")
        ->check(CLI::PositiveNumber);
    synth->add_option("--gain", synth_args.gain, "luminance curve gain")
        ->check(CLI::PositiveNumber);
    synth->add_option("--gamma", synth_args.gamma, "luminance curve exponent")
        ->check(CLI::PositiveNumber);
    synth->callback([&]() { run_synth(synth_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const lca::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return is_usage_error(e) ? 2 : 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return ortho_exit;
}
