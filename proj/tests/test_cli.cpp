#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string cli = FAN_CLI_PATH;
const std::string work = "/tmp/fan_cli_test";

int run(const std::string& args) {
    std::string cmd = cli + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string run_capture(const std::string& args) {
    std::string out_file = work + "/stdout.txt";
    std::string cmd = cli + " " + args + " >" + out_file + " 2>/dev/null";
    if (std::system(cmd.c_str()) != 0) return "";
    std::ifstream is(out_file);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

json read_json(const std::string& path) {
    std::ifstream is(path);
    REQUIRE(is.good());
    return json::parse(is);
}

std::string read_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct Workspace {
    Workspace() {
        fs::remove_all(work);
        fs::create_directories(work);
    }
};

Workspace& workspace() {
    static Workspace w;
    return w;
}

// one tiny trained checkpoint shared across cases
const std::string& checkpoint() {
    workspace();
    static std::string path;
    if (path.empty()) {
        path = work + "/model.ckpt";
        int rc = run("--seed 5 train --kind fan-eca --depth 1 --dim 8 --heads 2 --patch 8 "
                     "--image-size 16 --per-class 2 --val-per-class 2 --epochs 1 "
                     "--batch-size 8 --out " + path);
        REQUIRE(rc == 0);
    }
    return path;
}

} // namespace

TEST_CASE("help exits 0 and usage errors exit 2") {
    workspace();
    CHECK(run("--help") == 0);
    CHECK(run("train --help") == 0);
    CHECK(run("--definitely-not-a-flag") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("") == 2); // a subcommand is required
    CHECK(run("eval") == 2); // missing required --checkpoint
}

TEST_CASE("runtime failures exit 1") {
    workspace();
    CHECK(run("eval --checkpoint /nonexistent.ckpt") == 1);
    CHECK(run("noise-probe --checkpoint /nonexistent.ckpt --image /nonexistent.pgm") == 1);
}

TEST_CASE("gen-data writes images and a provenance manifest") {
    workspace();
    std::string dir = work + "/shapes";
    CHECK(run("--seed 3 gen-data --per-class 2 --image-size 16 --split val --out " + dir) == 0);
    json m = read_json(dir + "/manifest.json");
    CHECK(m["entries"].size() == 8);
    CHECK(m["provenance"]["version"].is_string());
    CHECK(m["provenance"]["seed"] == 3);
    CHECK(m["provenance"]["config_hash"].is_string());
    for (const auto& e : m["entries"])
        CHECK(fs::exists(dir + "/" + e["file"].get<std::string>()));
}

TEST_CASE("flops prints the table and supports named variants") {
    workspace();
    std::string out = run_capture("flops --name fan-t --patch 8 --image-size 32");
    CHECK(out.find("component,flops") != std::string::npos);
    CHECK(out.find("total,") != std::string::npos);
    CHECK(out.find("mlp,") != std::string::npos);

    std::string jpath = work + "/flops.json";
    CHECK(run("flops --kind fan-ca --depth 2 --dim 16 --heads 2 --patch 8 --image-size 16 "
              "--out " + jpath) == 0);
    json j = read_json(jpath);
    CHECK(j["total"].get<uint64_t>() > 0);
    bool has_ca = false;
    for (const auto& row : j["rows"])
        if (row["name"] == "ca.channel_mixing") has_ca = true;
    CHECK(has_ca);
}

TEST_CASE("ib-demo writes a trajectory and is seed-deterministic") {
    workspace();
    std::string p1 = work + "/ib1.json", p2 = work + "/ib2.json";
    CHECK(run("--seed 7 ib-demo --blobs 2 --points 20 --out " + p1) == 0);
    CHECK(run("--seed 7 ib-demo --blobs 2 --points 20 --out " + p2) == 0);
    json t = read_json(p1);
    CHECK(t["converged"].is_boolean());
    CHECK(t["trajectory"].size() >= 1);
    CHECK(t["trajectory"][0].contains("centers"));
    CHECK(t["trajectory"][0].contains("assignments"));
    CHECK(t["trajectory"][0].contains("objective"));
    CHECK(read_bytes(p1) == read_bytes(p2));
}

TEST_CASE("train writes a checkpoint and a log") {
    const std::string& ckpt = checkpoint();
    CHECK(fs::exists(ckpt));
    json log = read_json(ckpt + ".log.json");
    CHECK(log["log"].size() == 1);
    CHECK(log["aborted"] == false);
    CHECK(log["provenance"]["seed"] == 5);
    CHECK(log["config"]["model"]["kind"] == "fan-eca");
}

TEST_CASE("eval clean accuracy matches the training log's final val accuracy") {
    const std::string& ckpt = checkpoint();
    json log = read_json(ckpt + ".log.json");
    double final_val = log["final_val_acc"].get<double>();

    std::string rep_path = work + "/eval.json";
    CHECK(run("eval --checkpoint " + ckpt + " --val-per-class 2 "
              "--corrupt gaussian_noise --severities 1,3 --out " + rep_path) == 0);
    json rep = read_json(rep_path);
    CHECK(rep["clean_acc"].get<double>() == doctest::Approx(final_val).epsilon(1e-12));
    CHECK(rep["errors"].size() == 2);
    CHECK(rep["mce"].get<double>() == doctest::Approx(100.0)); // self-baseline
    CHECK(rep["provenance"].contains("config_hash"));
}

TEST_CASE("eval reports are byte-identical across runs and worker counts") {
    const std::string& ckpt = checkpoint();
    std::string r1 = work + "/eval1.json", r2 = work + "/eval2.json";
    std::string base = "eval --checkpoint " + ckpt +
                       " --val-per-class 2 --corrupt gaussian_noise,contrast "
                       "--severities 1,5 --out ";
    CHECK(run(base + r1) == 0);
    CHECK(run("--workers 4 " + base + r2) == 0);
    CHECK(read_bytes(r1) == read_bytes(r2));
}

TEST_CASE("corrupt writes the full grid deterministically") {
    workspace();
    std::string shapes = work + "/shapes"; // from the gen-data case; regenerate if absent
    if (!fs::exists(shapes + "/manifest.json"))
        REQUIRE(run("--seed 3 gen-data --per-class 2 --image-size 16 --split val --out " +
                    shapes) == 0);
    json m = read_json(shapes + "/manifest.json");
    std::string img = shapes + "/" + m["entries"][0]["file"].get<std::string>();

    std::string d1 = work + "/corr1", d2 = work + "/corr2";
    std::string args = "corrupt --in " + img + " --kinds gaussian_noise,pixelate "
                       "--severities 2,4 --out ";
    CHECK(run("--seed 11 " + args + d1) == 0);
    CHECK(run("--seed 11 " + args + d2) == 0);

    json man = read_json(d1 + "/manifest.json");
    CHECK(man["entries"].size() == 4);
    for (const auto& e : man["entries"]) {
        std::string p = e["path"].get<std::string>();
        CHECK(fs::exists(p));
        std::string twin = d2 + p.substr(d1.size());
        CHECK(read_bytes(p) == read_bytes(twin));
    }
}

TEST_CASE("spectrum writes csv, masks, and json") {
    const std::string& ckpt = checkpoint();
    std::string shapes = work + "/shapes";
    if (!fs::exists(shapes + "/manifest.json"))
        REQUIRE(run("--seed 3 gen-data --per-class 2 --image-size 16 --split val --out " +
                    shapes) == 0);
    json m = read_json(shapes + "/manifest.json");
    std::string img = shapes + "/" + m["entries"][0]["file"].get<std::string>();

    std::string dir = work + "/spectrum";
    CHECK(run("--seed 2 spectrum --checkpoint " + ckpt + " --image " + img +
              " --clusters 2 --out " + dir) == 0);
    CHECK(fs::exists(dir + "/spectrum.csv"));
    json j = read_json(dir + "/spectrum.json");
    CHECK(j["blocks"].size() == 1); // depth-1 checkpoint
    CHECK(fs::exists(dir + "/" + j["blocks"][0]["mask"].get<std::string>()));

    std::ifstream csv(dir + "/spectrum.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header.find("block,significant,lambda_1") != std::string::npos);
    size_t rows = 0;
    for (std::string line; std::getline(csv, line);)
        if (!line.empty()) ++rows;
    CHECK(rows == 2); // embed + 1 block
}

TEST_CASE("noise-probe emits one rho per block") {
    const std::string& ckpt = checkpoint();
    std::string shapes = work + "/shapes";
    json m = read_json(shapes + "/manifest.json");
    std::string img = shapes + "/" + m["entries"][1]["file"].get<std::string>();

    std::string out = work + "/probe.json";
    CHECK(run("--seed 4 noise-probe --checkpoint " + ckpt + " --image " + img +
              " --scale 0.05 --out " + out) == 0);
    json j = read_json(out);
    CHECK(j["rho"].size() == 1);
    CHECK(j["noise_response"].size() == 1);
    CHECK(j["noise_scale"].get<double>() == doctest::Approx(0.05));
    CHECK(j["rho"][0].get<double>() > 0.0);
}

TEST_CASE("repeated training runs produce byte-identical checkpoints") {
    workspace();
    std::string a = work + "/det_a.ckpt", b = work + "/det_b.ckpt";
    std::string args = "--seed 9 train --kind vit --depth 1 --dim 8 --heads 2 --patch 8 "
                       "--image-size 16 --per-class 2 --val-per-class 1 --epochs 1 "
                       "--batch-size 8 --out ";
    CHECK(run(args + a) == 0);
    CHECK(run(args + b) == 0);
    CHECK(read_bytes(a) == read_bytes(b));
}
