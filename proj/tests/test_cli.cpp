// Drives the installed binary end to end through a shell. Each case works in
// a scratch directory under the system temp root.
#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "lca/image.hpp"
#include "lca/model_io.hpp"

using namespace lca;

namespace {

namespace fs = std::filesystem;

struct CmdResult {
    int exit_code = -1;
    std::string out;
};

CmdResult run_cli(const std::string& tail, const std::string& env_prefix = "") {
    const std::string cmd =
        env_prefix + "'" + LCA_CLI_PATH + "' " + tail + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CmdResult res;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0)
        res.out.append(buf, got);
    const int status = pclose(pipe);
    REQUIRE(WIFEXITED(status));
    res.exit_code = WEXITSTATUS(status);
    return res;
}

// Scratch corpus shared by the cases below: one synthetic pair plus a model
// trained on it. Built once; every path lives under dir.
struct Workspace {
    std::string dir;
    std::string gt;
    std::string in;
    std::string model;
};

const Workspace& workspace() {
    static const Workspace ws = []() {
        Workspace w;
        w.dir = (fs::temp_directory_path() / "lca_cli_tests").string();
        fs::remove_all(w.dir);
        fs::create_directories(w.dir + "/pairs");
        w.gt = w.dir + "/pairs/s.gt.png";
        w.in = w.dir + "/pairs/s.in.png";
        w.model = w.dir + "/model.json";
        CmdResult synth = run_cli("synth-pair --out-gt '" + w.gt + "' --out-in '" +
                                  w.in + "' --width 40 --height 32");
        REQUIRE(synth.exit_code == 0);
        CmdResult train = run_cli("train --data '" + w.dir + "/pairs' --model '" +
                                  w.model + "' --max-iters 800");
        REQUIRE(train.exit_code == 0);
        return w;
    }();
    return ws;
}

} // namespace

TEST_CASE("cli usage surface") {
    REQUIRE(run_cli("--help").exit_code == 0);
    REQUIRE(run_cli("train --help").out.find("--optimizer") != std::string::npos);
    REQUIRE(run_cli("").exit_code == 2);
    REQUIRE(run_cli("frobnicate").exit_code == 2);
    REQUIRE(run_cli("train").exit_code == 2); // required options missing
}

TEST_CASE("synth-pair writes a loadable pair") {
    const Workspace& ws = workspace();
    const ImageBuffer gt = load_image(ws.gt);
    const ImageBuffer in = load_image(ws.in);
    REQUIRE(gt.width() == 40);
    REQUIRE(gt.height() == 32);
    REQUIRE(gt.channels() == 3);
    REQUIRE(in.width() == 40);
    REQUIRE(read_file_bytes(ws.gt) != read_file_bytes(ws.in));
}

TEST_CASE("train writes a valid model and reports the fit") {
    const Workspace& ws = workspace();
    const OldModel model = load_model(ws.model);
    REQUIRE(model.c == 3);
    REQUIRE(model.k == 1);

    CmdResult res = run_cli("train --data '" + ws.dir + "/pairs' --model '" +
                            ws.dir + "/m_again.json' --max-iters 800");
    REQUIRE(res.exit_code == 0);
    REQUIRE(res.out.find("final_loss=") != std::string::npos);
    REQUIRE(res.out.find("optimizer=geometric") != std::string::npos);

    SECTION("identical invocations produce identical files") {
        CmdResult res2 = run_cli("train --data '" + ws.dir + "/pairs' --model '" +
                                 ws.dir + "/m_third.json' --max-iters 800");
        REQUIRE(res2.exit_code == 0);
        REQUIRE(read_file_bytes(ws.dir + "/m_again.json") ==
                read_file_bytes(ws.dir + "/m_third.json"));
    }
    SECTION("descent trace lands on disk when asked for") {
        CmdResult res2 = run_cli("train --data '" + ws.dir + "/pairs' --model '" +
                                 ws.dir + "/m_tr.json' --trace '" + ws.dir +
                                 "/trace.csv' --max-iters 50");
        REQUIRE(res2.exit_code == 0);
        const std::string csv = read_file_bytes(ws.dir + "/trace.csv");
        REQUIRE(csv.rfind("iter,loss,grad_norm,ortho_err\n", 0) == 0);
    }
}

TEST_CASE("train reads manifests with comments and relative paths") {
    const Workspace& ws = workspace();
    write_file_atomic(ws.dir + "/pairs/manifest.txt",
                      "# reference degraded\n\ns.gt.png s.in.png\n");
    CmdResult res = run_cli("train --manifest '" + ws.dir +
                            "/pairs/manifest.txt' --model '" + ws.dir +
                            "/m_manifest.json' --max-iters 100");
    REQUIRE(res.exit_code == 0);

    write_file_atomic(ws.dir + "/bad_manifest.txt", "a.png b.png c.png\n");
    REQUIRE(run_cli("train --manifest '" + ws.dir + "/bad_manifest.txt'"
                    " --model '" + ws.dir + "/m_bad.json'").exit_code == 2);
}

TEST_CASE("train rejects bad invocations") {
    const Workspace& ws = workspace();
    REQUIRE(run_cli("train --data '" + ws.dir + "/no_such_dir' --model '" +
                    ws.dir + "/x.json'").exit_code == 2);
    // --data and --manifest are mutually exclusive
    REQUIRE(run_cli("train --data '" + ws.dir + "/pairs' --manifest m.txt"
                    " --model '" + ws.dir + "/x.json'").exit_code == 2);
    REQUIRE(run_cli("train --data '" + ws.dir + "/pairs' --model '" + ws.dir +
                    "/x.json' --optimizer newton").exit_code == 2);
    REQUIRE(run_cli("train --data '" + ws.dir + "/pairs' --model '" + ws.dir +
                    "/x.json' --step -0.5").exit_code == 2);
    REQUIRE(run_cli("train --data '" + ws.dir + "/pairs' --model '" + ws.dir +
                    "/x.json' --optimizer penalty --centered").exit_code == 2);
    REQUIRE(run_cli("train --data '" + ws.dir + "/pairs' --model '" + ws.dir +
                    "/x.json'", "LCA_THREADS=abc ").exit_code == 2);
}

TEST_CASE("training identical images is a numeric error") {
    const Workspace& ws = workspace();
    fs::create_directories(ws.dir + "/flat");
    fs::copy_file(ws.gt, ws.dir + "/flat/f.gt.png");
    fs::copy_file(ws.gt, ws.dir + "/flat/f.in.png");
    CmdResult res = run_cli("train --data '" + ws.dir + "/flat' --model '" +
                            ws.dir + "/flat.json'");
    REQUIRE(res.exit_code == 3);
}

TEST_CASE("penalty training works and fails the orthogonality gate") {
    const Workspace& ws = workspace();
    const std::string path = ws.dir + "/penalty.json";
    CmdResult res = run_cli("train --data '" + ws.dir + "/pairs' --model '" +
                            path + "' --optimizer penalty --mu 10"
                            " --max-iters 400");
    REQUIRE(res.exit_code == 0);
    REQUIRE(res.out.find("optimizer=penalty") != std::string::npos);

    CmdResult gate = run_cli("ortho-check --model '" + path + "' --tol 1e-9");
    REQUIRE(gate.exit_code == 2);
    REQUIRE(gate.out.find("orthonormality_error ") != std::string::npos);
}

TEST_CASE("ortho-check accepts trained models and writes the gram grid") {
    const Workspace& ws = workspace();
    CmdResult res = run_cli("ortho-check --model '" + ws.model + "' --grid '" +
                            ws.dir + "/grid.csv'");
    REQUIRE(res.exit_code == 0);
    const std::string grid = read_file_bytes(ws.dir + "/grid.csv");
    REQUIRE(grid.find('\n') != std::string::npos);
    REQUIRE(run_cli("ortho-check --model '" + ws.dir +
                    "/no_model.json'").exit_code == 2);
}

TEST_CASE("analyze emits share rows per method") {
    const Workspace& ws = workspace();
    CmdResult res = run_cli("analyze --input '" + ws.in + "' --gt '" + ws.gt +
                            "' --model '" + ws.model + "' --methods old,ycbcr");
    REQUIRE(res.exit_code == 0);
    REQUIRE(res.out.rfind("method,component,share\n", 0) == 0);
    REQUIRE(res.out.find("old,principal_0,") != std::string::npos);
    REQUIRE(res.out.find("old,luminance_unrelated,") != std::string::npos);
    REQUIRE(res.out.find("ycbcr,luminance_related,") != std::string::npos);
    REQUIRE(res.out.find("hsv,") == std::string::npos);

    SECTION("csv goes to --out when given") {
        CmdResult res2 = run_cli("analyze --input '" + ws.in + "' --gt '" +
                                 ws.gt + "' --model '" + ws.model +
                                 "' --methods lab --out '" + ws.dir + "/rep.csv'");
        REQUIRE(res2.exit_code == 0);
        REQUIRE(read_file_bytes(ws.dir + "/rep.csv")
                    .find("lab,luminance_related,") != std::string::npos);
    }
    SECTION("unknown method name") {
        REQUIRE(run_cli("analyze --input '" + ws.in + "' --gt '" + ws.gt +
                        "' --methods sepia").exit_code == 2);
    }
}

TEST_CASE("metrics reports the three scores as json") {
    const Workspace& ws = workspace();
    CmdResult res = run_cli("metrics --a '" + ws.gt + "' --b '" + ws.in + "'");
    REQUIRE(res.exit_code == 0);
    REQUIRE(res.out.find("\"psnr\":") != std::string::npos);
    REQUIRE(res.out.find("\"ssim\":") != std::string::npos);
    REQUIRE(res.out.find("\"hist_match\":") != std::string::npos);
}

TEST_CASE("apply with alpha 1 reproduces the input image exactly") {
    const Workspace& ws = workspace();
    const std::string out = ws.dir + "/identity.png";
    CmdResult res = run_cli("apply --model '" + ws.model + "' --image '" +
                            ws.in + "' --alpha 1 --mode principal --out '" +
                            out + "'");
    REQUIRE(res.exit_code == 0);
    REQUIRE(read_file_bytes(out) == read_file_bytes(ws.in));
}

TEST_CASE("apply rejects mismatched models and corrupt files") {
    const Workspace& ws = workspace();
    const std::string gray = ws.dir + "/gray.pgm";
    {
        ImageBuffer g(6, 6, 1);
        for (std::size_t y = 0; y < 6; ++y)
            for (std::size_t x = 0; x < 6; ++x)
                g.set(x, y, 0, 0.25);
        save_image(gray, g);
    }
    // 3-channel pixel model cannot tile a single-channel image
    REQUIRE(run_cli("apply --model '" + ws.model + "' --image '" + gray +
                    "' --alpha 0 --out '" + ws.dir + "/x.png'").exit_code == 2);
    REQUIRE(run_cli("apply --model '" + ws.model + "' --image '" + ws.in +
                    "' --alpha 0 --mode sideways --out '" + ws.dir +
                    "/x.png'").exit_code == 2);

    write_file_atomic(ws.dir + "/corrupt.json", "{\"format_version\": 1");
    REQUIRE(run_cli("apply --model '" + ws.dir + "/corrupt.json' --image '" +
                    ws.in + "' --alpha 0 --out '" + ws.dir +
                    "/x.png'").exit_code == 2);
}
