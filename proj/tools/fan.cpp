// fan: command-line front end for the attention-block library.
//
// Subcommands: train, eval, corrupt, spectrum, noise-probe, ib-demo,
// flops, gen-data. Exit codes: 0 ok, 1 runtime failure, 2 usage error.
// All randomness flows from one --seed, split per subsystem by stable
// labels, so a single flag reproduces a whole experiment.

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "fan/config_json.hpp"
#include "fan/corruptions.hpp"
#include "fan/dataset.hpp"
#include "fan/ib.hpp"
#include "fan/io.hpp"
#include "fan/metrics.hpp"
#include "fan/rng.hpp"
#include "fan/spectral.hpp"
#include "fan/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fan;

namespace {

constexpr const char* kVersion = "1.0.0";

json provenance(const json& cfg, uint64_t seed) {
    return json{{"config_hash", config_hash(cfg)}, {"seed", seed}, {"version", kVersion}};
}

void write_json(const std::string& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << j.dump(2) << "\n";
}

size_t worker_count(size_t flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("FAN_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v > 0) return (size_t)v;
    }
    return 1;
}

// deterministic parallel map over [0, n): results land by index
void parallel_for(size_t n, size_t workers, const std::function<void(size_t)>& fn) {
    workers = std::min(workers, n > 0 ? n : (size_t)1);
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : pool) t.join();
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<CorruptionKind> parse_kinds(const std::string& s) {
    if (s == "all")
        return std::vector<CorruptionKind>(kAllCorruptions.begin(), kAllCorruptions.end());
    std::vector<CorruptionKind> kinds;
    for (const auto& name : split_csv(s)) kinds.push_back(corruption_from_string(name));
    if (kinds.empty()) throw std::invalid_argument("no corruption kinds given");
    return kinds;
}

std::vector<int> parse_severities(const std::string& s) {
    std::vector<int> out;
    if (s == "all") return {1, 2, 3, 4, 5};
    for (const auto& item : split_csv(s)) {
        int v = std::stoi(item);
        if (v < 1 || v > 5) throw std::invalid_argument("severity must be in 1..5");
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("no severities given");
    return out;
}

json log_to_json(const std::vector<TrainLogEntry>& log) {
    json arr = json::array();
    for (const auto& e : log)
        arr.push_back({{"epoch", e.epoch},
                       {"loss", e.loss},
                       {"train_acc", e.train_acc},
                       {"val_acc", e.val_acc},
                       {"lr", e.lr}});
    return arr;
}

// ---- shared flag bundles ----

struct DataOpts {
    size_t per_class = 125;
    size_t val_per_class = 25;
    size_t image_size = 32;
    double noise = 0.3;
};

void add_data_opts(CLI::App* cmd, DataOpts& d) {
    cmd->add_option("--per-class", d.per_class, "training images per class");
    cmd->add_option("--val-per-class", d.val_per_class, "validation images per class");
    cmd->add_option("--data-noise", d.noise, "background/texture noise level");
}

struct ModelOpts {
    std::string name;            // named variant, overrides geometry
    std::string kind = "fan-eca";
    size_t depth = 4, dim = 64, heads = 4, patch = 8, mlp_ratio = 4;
};

ModelConfig make_model_config(const ModelOpts& m, size_t image_size) {
    ModelConfig cfg;
    if (!m.name.empty()) {
        cfg = named_config(m.name);
    } else {
        cfg.depth = m.depth;
        cfg.dim = m.dim;
        cfg.heads = m.heads;
        cfg.mlp_ratio = m.mlp_ratio;
    }
    cfg.kind = block_kind_from_string(m.kind);
    cfg.patch = m.patch;
    cfg.image_size = image_size;
    cfg.validate();
    return cfg;
}

// cluster-label masks rendered at image resolution, one gray level per label
Tensor label_mask(const std::vector<size_t>& labels, size_t k, size_t image_size,
                  size_t patch) {
    const size_t grid = image_size / patch;
    Tensor mask({1, image_size, image_size});
    for (size_t t = 0; t < labels.size(); ++t) {
        double v = (k > 1) ? (double)labels[t] / (double)(k - 1) : 0.0;
        size_t gy = t / grid, gx = t % grid;
        for (size_t y = 0; y < patch; ++y)
            for (size_t x = 0; x < patch; ++x)
                mask.at3(0, gy * patch + y, gx * patch + x) = v;
    }
    return mask;
}

// error grid over (kind, severity) with optional worker parallelism;
// corruption streams are keyed, so the result is order-independent
ErrorGrid corrupted_error_grid(const Model& model, const std::vector<Tensor>& params,
                               const ShapesDataset& ds,
                               const std::vector<CorruptionKind>& kinds,
                               const std::vector<int>& severities, uint64_t seed,
                               const SeverityLadders& ladders, size_t workers) {
    struct Cell { CorruptionKind kind; int severity; };
    std::vector<Cell> cells;
    for (CorruptionKind k : kinds)
        for (int s : severities) cells.push_back({k, s});
    std::vector<double> errs(cells.size(), 0.0);
    parallel_for(cells.size(), workers, [&](size_t c) {
        size_t correct = 0;
        for (size_t i = 0; i < ds.size(); ++i) {
            CorruptionSpec spec{cells[c].kind, cells[c].severity, seed, i};
            Tensor img = corrupt(ds.images[i], spec, ladders);
            if (model.predict(params, img) == ds.labels[i]) correct++;
        }
        errs[c] = 1.0 - (double)correct / (double)ds.size();
    });
    ErrorGrid grid;
    for (size_t c = 0; c < cells.size(); ++c) grid[{cells[c].kind, cells[c].severity}] = errs[c];
    return grid;
}

EvalReport report_from_grid(const Model& model, const std::vector<Tensor>& params,
                            const ShapesDataset& ds, const ErrorGrid& grid,
                            const std::string& model_id) {
    EvalReport rep;
    rep.model_id = model_id;
    rep.clean_acc = evaluate(model, params, ds);
    double acc = 0.0;
    for (const auto& [key, e] : grid) acc += 1.0 - e;
    rep.errors = grid;
    rep.robust_acc = acc / (double)grid.size();
    rep.retention = retention(rep.clean_acc, rep.robust_acc);
    return rep;
}

json errors_to_json(const ErrorGrid& grid) {
    json arr = json::array();
    for (const auto& [key, e] : grid)
        arr.push_back({{"kind", to_string(key.first)}, {"severity", key.second}, {"error", e}});
    return arr;
}

// ---- subcommand bodies ----

int run_gen_data(const DataOpts& data, uint64_t seed, const std::string& split,
                 const std::string& out_dir) {
    fs::create_directories(out_dir);
    ShapesDataset ds = gen_shapes(data.per_class, data.image_size, data.image_size,
                                  data.noise, seed, split);
    json manifest;
    manifest["split"] = split;
    manifest["noise"] = data.noise;
    manifest["image_size"] = data.image_size;
    manifest["entries"] = json::array();
    for (size_t i = 0; i < ds.size(); ++i) {
        std::string name = split + "_" + std::to_string(i) + "_" +
                           kShapeClasses[ds.labels[i]] + ".pgm";
        save_image(out_dir + "/" + name, ds.images[i]);
        manifest["entries"].push_back({{"file", name}, {"label", ds.labels[i]},
                                       {"class", kShapeClasses[ds.labels[i]]}});
    }
    manifest["provenance"] = provenance(json{{"per_class", data.per_class},
                                             {"image_size", data.image_size},
                                             {"noise", data.noise},
                                             {"split", split}},
                                        seed);
    write_json(out_dir + "/manifest.json", manifest);
    std::cout << "wrote " << ds.size() << " images to " << out_dir << "\n";
    return 0;
}

int run_train(const ModelOpts& mopts, const DataOpts& data, TrainConfig tcfg, uint64_t seed,
              const std::string& out_path, std::string log_path) {
    ModelConfig mcfg = make_model_config(mopts, data.image_size);
    Model model(mcfg);

    ShapesDataset tr = gen_shapes(data.per_class, data.image_size, data.image_size,
                                  data.noise, derive_seed(seed, "data"), "train");
    ShapesDataset va = gen_shapes(data.val_per_class, data.image_size, data.image_size,
                                  data.noise, derive_seed(seed, "data"), "val");
    tcfg.seed = derive_seed(seed, "train");
    TrainResult res = train(model, tr, va, tcfg);

    if (!out_path.empty()) {
        if (auto dir = fs::path(out_path).parent_path(); !dir.empty())
            fs::create_directories(dir);
        save_checkpoint(out_path, Checkpoint{mcfg, seed, res.steps, res.params});
    }

    json cfg_json{{"model", model_config_to_json(mcfg)},
                  {"train", train_config_to_json(tcfg)},
                  {"data", {{"per_class", data.per_class},
                            {"val_per_class", data.val_per_class},
                            {"image_size", data.image_size},
                            {"noise", data.noise}}}};
    json out;
    out["provenance"] = provenance(cfg_json, seed);
    out["config"] = cfg_json;
    out["aborted"] = res.aborted;
    out["steps"] = res.steps;
    out["best_val_acc"] = res.best_val_acc;
    out["final_val_acc"] = res.log.empty() ? 0.0 : res.log.back().val_acc;
    out["log"] = log_to_json(res.log);
    if (log_path.empty() && !out_path.empty()) log_path = out_path + ".log.json";
    if (!log_path.empty()) write_json(log_path, out);

    std::cout << "trained " << to_string(mcfg.kind) << " for " << res.log.size()
              << " epochs, final val acc "
              << (res.log.empty() ? 0.0 : res.log.back().val_acc) << "\n";
    if (res.aborted) {
        std::cerr << "training aborted on non-finite loss; kept last good epoch\n";
        return 1;
    }
    return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& baseline_path,
             const DataOpts& data, uint64_t seed, bool seed_given,
             const std::string& kinds_str, const std::string& sevs_str,
             const std::string& ladders_path, size_t workers, const std::string& out_path,
             const std::string& csv_path) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Model model(ckpt.config);
    uint64_t root = seed_given ? seed : ckpt.seed;

    ShapesDataset va = gen_shapes(data.val_per_class, ckpt.config.image_size,
                                  ckpt.config.image_size, data.noise,
                                  derive_seed(root, "data"), "val");
    auto kinds = parse_kinds(kinds_str);
    auto sevs = parse_severities(sevs_str);
    SeverityLadders ladders =
        ladders_path.empty() ? SeverityLadders{} : SeverityLadders::load(ladders_path);
    uint64_t cseed = derive_seed(root, "corrupt");

    ErrorGrid grid = corrupted_error_grid(model, ckpt.params, va, kinds, sevs, cseed,
                                          ladders, workers);
    EvalReport rep = report_from_grid(model, ckpt.params, va, grid, ckpt_path);
    rep.baseline_id = baseline_path.empty() ? ckpt_path : baseline_path;

    if (!baseline_path.empty()) {
        Checkpoint base = load_checkpoint(baseline_path);
        Model bmodel(base.config);
        ErrorGrid bgrid = corrupted_error_grid(bmodel, base.params, va, kinds, sevs, cseed,
                                               ladders, workers);
        rep.mce = mce(grid, bgrid);
    } else {
        rep.mce = 100.0; // a model is its own baseline
    }

    json cfg_json{{"checkpoint", ckpt_path},
                  {"baseline", rep.baseline_id},
                  {"kinds", kinds_str},
                  {"severities", sevs_str},
                  {"val_per_class", data.val_per_class},
                  {"data_noise", data.noise}};
    json out = json::parse(rep.to_json());
    out["provenance"] = provenance(cfg_json, root);
    if (!out_path.empty()) write_json(out_path, out);
    if (!csv_path.empty()) {
        std::ofstream os(csv_path);
        if (!os) throw std::runtime_error("cannot write " + csv_path);
        os << EvalReport::csv_header() << "\n" << rep.to_csv_row() << "\n";
    }

    std::cout << "clean_acc " << rep.clean_acc << " robust_acc " << rep.robust_acc
              << " retention " << rep.retention << " mce " << rep.mce << "\n";
    return 0;
}

int run_corrupt(const std::vector<std::string>& inputs, const std::string& kinds_str,
                const std::string& sevs_str, uint64_t seed, const std::string& ladders_path,
                const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<Tensor> images;
    for (const auto& p : inputs) images.push_back(load_image(p));
    auto kinds = parse_kinds(kinds_str);
    auto sevs = parse_severities(sevs_str);
    SeverityLadders ladders =
        ladders_path.empty() ? SeverityLadders{} : SeverityLadders::load(ladders_path);

    SuiteManifest m = corruption_suite(images, kinds, sevs, seed, out_dir, nullptr, ladders);
    size_t failures = 0;
    for (const auto& e : m.entries)
        if (!e.error.empty()) {
            std::cerr << "entry image " << e.image_index << " " << to_string(e.kind)
                      << " s" << e.severity << ": " << e.error << "\n";
            ++failures;
        }

    json manifest = json::parse(m.to_json());
    manifest["inputs"] = inputs;
    manifest["ladder_version"] = ladders.version;
    manifest["provenance"] = provenance(
        json{{"inputs", inputs}, {"kinds", kinds_str}, {"severities", sevs_str}}, seed);
    write_json(out_dir + "/manifest.json", manifest);
    std::cout << "wrote " << (m.entries.size() - failures) << "/" << m.entries.size()
              << " corrupted images to " << out_dir << "\n";
    return failures == 0 ? 0 : 1;
}

int run_spectrum(const std::string& ckpt_path, const std::string& image_path, double tau,
                 size_t clusters, uint64_t seed, const std::string& out_dir) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Model model(ckpt.config);
    Tensor img = load_image(image_path);
    fs::create_directories(out_dir);

    AffinitySpectrum embed;
    auto spectra = per_block_spectrum(model, ckpt.params, img, tau, &embed);

    // per-block CSV: block, significant count, eigenvalues
    {
        std::ofstream os(out_dir + "/spectrum.csv");
        if (!os) throw std::runtime_error("cannot write spectrum.csv");
        os << "block,significant";
        for (size_t i = 0; i < embed.eigenvalues.size(); ++i) os << ",lambda_" << (i + 1);
        os << "\n";
        auto row = [&os](const std::string& name, const AffinitySpectrum& s) {
            os << name << "," << s.significant;
            for (double v : s.eigenvalues) os << "," << v;
            os << "\n";
        };
        row("embed", embed);
        for (size_t b = 0; b < spectra.size(); ++b) row("block" + std::to_string(b), spectra[b]);
    }

    // cluster-label masks per block
    AnalysisProbe probe;
    model.forward(ckpt.params, img, &probe);
    json blocks = json::array();
    for (size_t b = 0; b < probe.block_outputs.size(); ++b) {
        size_t k = clusters > 0 ? clusters : std::max<size_t>(2, spectra[b].significant);
        auto labels = extract_clusters(affinity(probe.block_outputs[b]), k,
                                       derive_seed(seed, "spectrum", b));
        std::string mask_file = "mask_block" + std::to_string(b) + ".pgm";
        save_image(out_dir + "/" + mask_file,
                   label_mask(labels, k, ckpt.config.image_size, ckpt.config.patch));
        blocks.push_back({{"block", b},
                          {"significant", spectra[b].significant},
                          {"clusters", k},
                          {"mask", mask_file},
                          {"eigenvalues", spectra[b].eigenvalues}});
    }

    json out;
    out["provenance"] = provenance(json{{"checkpoint", ckpt_path},
                                        {"image", image_path},
                                        {"tau", tau},
                                        {"clusters", clusters}},
                                   seed);
    out["tau"] = tau;
    out["embed_significant"] = embed.significant;
    out["blocks"] = blocks;
    write_json(out_dir + "/spectrum.json", out);
    std::cout << "wrote spectrum for " << spectra.size() << " blocks to " << out_dir << "\n";
    return 0;
}

int run_noise_probe(const std::string& ckpt_path, const std::string& image_path,
                    double scale, uint64_t seed, const std::string& out_path) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Model model(ckpt.config);
    Tensor img = load_image(image_path);
    NoiseDecayReport rep = noise_probe(model, ckpt.params, img,
                                       scale, derive_seed(seed, "noise-probe"));
    json out;
    out["provenance"] = provenance(json{{"checkpoint", ckpt_path},
                                        {"image", image_path},
                                        {"scale", scale}},
                                   seed);
    out["noise_scale"] = rep.noise_scale;
    out["rho"] = rep.rho;
    out["noise_response"] = rep.noise_response;
    json flags = json::array();
    for (bool f : rep.zero_norm_flag) flags.push_back(f);
    out["zero_norm_flag"] = flags;
    if (!out_path.empty()) write_json(out_path, out);
    std::cout << "rho per block:";
    for (double r : rep.rho) std::cout << " " << r;
    std::cout << "\n";
    return 0;
}

int run_ib_demo(size_t blobs, size_t points_per_blob, size_t clusters, double beta,
                double spread, uint64_t seed, const std::string& out_path) {
    if (blobs < 1) throw std::invalid_argument("need at least one blob");
    if (clusters == 0) clusters = blobs;

    Rng rng(derive_seed(seed, "ib-demo/blobs"));
    Tensor pts({blobs * points_per_blob, 2});
    for (size_t b = 0; b < blobs; ++b) {
        double angle = 6.283185307179586 * (double)b / (double)blobs;
        double cx = 5.0 * std::cos(angle), cy = 5.0 * std::sin(angle);
        for (size_t i = 0; i < points_per_blob; ++i) {
            pts.at(b * points_per_blob + i, 0) = cx + spread * rng.normal();
            pts.at(b * points_per_blob + i, 1) = cy + spread * rng.normal();
        }
    }

    IBConfig cfg;
    cfg.beta = beta;
    IBResult res = ib_cluster(pts, clusters, cfg, derive_seed(seed, "ib-demo/cluster"));

    auto tensor_rows = [](const Tensor& t) {
        json rows = json::array();
        for (size_t i = 0; i < t.rows(); ++i) {
            json row = json::array();
            for (size_t j = 0; j < t.cols(); ++j) row.push_back(t.at(i, j));
            rows.push_back(row);
        }
        return rows;
    };

    json traj = json::array();
    for (const auto& step : res.trajectory)
        traj.push_back({{"centers", tensor_rows(step.centers)},
                        {"assignments", tensor_rows(step.assignments)},
                        {"objective", step.objective},
                        {"movement", step.movement}});
    json out;
    out["provenance"] = provenance(json{{"blobs", blobs},
                                        {"points_per_blob", points_per_blob},
                                        {"clusters", clusters},
                                        {"beta", beta},
                                        {"spread", spread}},
                                   seed);
    out["points"] = tensor_rows(pts);
    out["converged"] = res.converged;
    out["degenerate"] = res.state.degenerate;
    out["iterations"] = res.trajectory.size();
    out["trajectory"] = traj;
    json labels = json::array();
    for (size_t l : hard_labels(res.state.assignments)) labels.push_back(l);
    out["labels"] = labels;
    if (!out_path.empty()) write_json(out_path, out);
    std::cout << "ib clustering " << (res.converged ? "converged" : "hit max iters")
              << " after " << res.trajectory.size() << " iterations\n";
    return 0;
}

int run_flops(const std::string& config_path, const ModelOpts& mopts, size_t image_size,
              const std::string& out_path) {
    ModelConfig cfg;
    if (!config_path.empty()) {
        std::ifstream is(config_path);
        if (!is) throw std::runtime_error("cannot open " + config_path);
        cfg = model_config_from_json(json::parse(is));
    } else {
        cfg = make_model_config(mopts, image_size);
    }
    FlopTable table = count_flops(cfg);
    std::cout << "component,flops\n";
    for (const auto& row : table.rows) std::cout << row.name << "," << row.flops << "\n";
    std::cout << "total," << table.total << "\n";
    if (!out_path.empty()) {
        json rows = json::array();
        for (const auto& row : table.rows)
            rows.push_back({{"name", row.name}, {"flops", row.flops}});
        json out;
        out["provenance"] = provenance(model_config_to_json(cfg), 0);
        out["rows"] = rows;
        out["total"] = table.total;
        write_json(out_path, out);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"FAN attention-block toolkit"};
    app.require_subcommand(1);

    uint64_t seed = 0;
    size_t workers = 0; // 0 = use FAN_THREADS or 1
    app.add_option("--seed", seed, "root seed; all subsystems derive from it")
        ->capture_default_str();
    app.add_option("--workers", workers, "worker threads (default FAN_THREADS or 1)");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate the synthetic shapes dataset");
    DataOpts gen_data;
    std::string gen_split = "train", gen_out = "out/shapes";
    add_data_opts(gen, gen_data);
    gen->add_option("--image-size", gen_data.image_size, "square image size");
    gen->add_option("--split", gen_split, "dataset split label");
    gen->add_option("--out", gen_out, "output directory");

    // train
    auto* tr = app.add_subcommand("train", "train a classifier on the shapes dataset");
    ModelOpts tr_model;
    DataOpts tr_data;
    TrainConfig tr_cfg;
    std::string tr_out = "out/model.ckpt", tr_log, tr_precision = "f32";
    tr->add_option("--kind", tr_model.kind, "block kind: vit | fan-ca | fan-eca")
        ->capture_default_str();
    tr->add_option("--name", tr_model.name, "named variant (fan-t/s/b/l), overrides geometry");
    tr->add_option("--depth", tr_model.depth)->capture_default_str();
    tr->add_option("--dim", tr_model.dim)->capture_default_str();
    tr->add_option("--heads", tr_model.heads)->capture_default_str();
    tr->add_option("--patch", tr_model.patch)->capture_default_str();
    tr->add_option("--mlp-ratio", tr_model.mlp_ratio)->capture_default_str();
    tr->add_option("--image-size", tr_data.image_size)->capture_default_str();
    add_data_opts(tr, tr_data);
    tr->add_option("--epochs", tr_cfg.epochs)->capture_default_str();
    tr->add_option("--lr", tr_cfg.lr)->capture_default_str();
    tr->add_option("--weight-decay", tr_cfg.weight_decay)->capture_default_str();
    tr->add_option("--batch-size", tr_cfg.batch_size)->capture_default_str();
    tr->add_option("--warmup-epochs", tr_cfg.warmup_epochs)->capture_default_str();
    tr->add_option("--label-smoothing", tr_cfg.label_smoothing)->capture_default_str();
    tr->add_option("--early-stop-acc", tr_cfg.early_stop_acc,
                   "stop at this val accuracy (negative disables)");
    tr->add_option("--precision", tr_precision, "f32 | f64")->capture_default_str();
    tr->add_flag_callback("--no-cosine", [&]() { tr_cfg.cosine = false; },
                          "constant lr after warmup");
    tr->add_option("--out", tr_out, "checkpoint path")->capture_default_str();
    tr->add_option("--log", tr_log, "training log JSON (default <out>.log.json)");

    // eval
    auto* ev = app.add_subcommand("eval", "clean + corrupted accuracy for a checkpoint");
    std::string ev_ckpt, ev_baseline, ev_kinds = "all", ev_sevs = "all", ev_ladders;
    std::string ev_out, ev_csv;
    DataOpts ev_data;
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint to evaluate")->required();
    ev->add_option("--baseline", ev_baseline, "baseline checkpoint for mCE");
    ev->add_option("--corrupt", ev_kinds, "comma list of corruption kinds or 'all'")
        ->capture_default_str();
    ev->add_option("--severities", ev_sevs, "comma list of severities or 'all'")
        ->capture_default_str();
    ev->add_option("--ladders", ev_ladders, "severity ladder JSON file");
    ev->add_option("--val-per-class", ev_data.val_per_class)->capture_default_str();
    ev->add_option("--data-noise", ev_data.noise)->capture_default_str();
    ev->add_option("--out", ev_out, "report JSON path");
    ev->add_option("--csv", ev_csv, "report CSV path");

    // corrupt
    auto* co = app.add_subcommand("corrupt", "write corrupted copies of input images");
    std::vector<std::string> co_inputs;
    std::string co_kinds = "all", co_sevs = "all", co_ladders, co_out = "out/corrupted";
    co->add_option("--in", co_inputs, "input PGM/PPM images")->required();
    co->add_option("--kinds", co_kinds, "comma list of corruption kinds or 'all'")
        ->capture_default_str();
    co->add_option("--severities", co_sevs, "comma list of severities or 'all'")
        ->capture_default_str();
    co->add_option("--ladders", co_ladders, "severity ladder JSON file");
    co->add_option("--out", co_out, "output directory")->capture_default_str();

    // spectrum
    auto* sp = app.add_subcommand("spectrum", "per-block token affinity spectra + masks");
    std::string sp_ckpt, sp_image, sp_out = "out/spectrum";
    double sp_tau = kDefaultSpectralTau;
    size_t sp_clusters = 0;
    sp->add_option("--checkpoint", sp_ckpt)->required();
    sp->add_option("--image", sp_image, "input PGM/PPM image")->required();
    sp->add_option("--tau", sp_tau, "significance threshold on lambda_max")
        ->capture_default_str();
    sp->add_option("--clusters", sp_clusters,
                   "cluster count for masks (0 = per-block significant count)");
    sp->add_option("--out", sp_out, "output directory")->capture_default_str();

    // noise-probe
    auto* np = app.add_subcommand("noise-probe", "per-block noise decay trace");
    std::string np_ckpt, np_image, np_out;
    double np_scale = 0.1;
    np->add_option("--checkpoint", np_ckpt)->required();
    np->add_option("--image", np_image)->required();
    np->add_option("--scale", np_scale, "noise standard deviation")->capture_default_str();
    np->add_option("--out", np_out, "report JSON path");

    // ib-demo
    auto* ib = app.add_subcommand("ib-demo", "information-bottleneck clustering demo");
    size_t ib_blobs = 3, ib_points = 40, ib_clusters = 0;
    double ib_beta = 4.0, ib_spread = 0.5;
    std::string ib_out = "out/ib_trajectory.json";
    ib->add_option("--blobs", ib_blobs, "number of gaussian blobs")->capture_default_str();
    ib->add_option("--points", ib_points, "points per blob")->capture_default_str();
    ib->add_option("--clusters", ib_clusters, "cluster count (0 = blobs)");
    ib->add_option("--beta", ib_beta, "inverse temperature")->capture_default_str();
    ib->add_option("--spread", ib_spread, "blob standard deviation")->capture_default_str();
    ib->add_option("--out", ib_out, "trajectory JSON path")->capture_default_str();

    // flops
    auto* fl = app.add_subcommand("flops", "per-sub-block multiply counts");
    ModelOpts fl_model;
    std::string fl_config, fl_out;
    size_t fl_image_size = 32;
    fl->add_option("--config", fl_config, "model config JSON file");
    fl->add_option("--name", fl_model.name, "named variant (fan-t/s/b/l)");
    fl->add_option("--kind", fl_model.kind)->capture_default_str();
    fl->add_option("--depth", fl_model.depth)->capture_default_str();
    fl->add_option("--dim", fl_model.dim)->capture_default_str();
    fl->add_option("--heads", fl_model.heads)->capture_default_str();
    fl->add_option("--patch", fl_model.patch)->capture_default_str();
    fl->add_option("--image-size", fl_image_size)->capture_default_str();
    fl->add_option("--out", fl_out, "table JSON path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(gen))
            return run_gen_data(gen_data, seed, gen_split, gen_out);
        if (app.got_subcommand(tr)) {
            if (tr_precision == "f32") tr_cfg.precision = Precision::F32;
            else if (tr_precision == "f64") tr_cfg.precision = Precision::F64;
            else throw std::invalid_argument("precision must be f32 or f64");
            tr_cfg.workers = worker_count(workers);
            return run_train(tr_model, tr_data, tr_cfg, seed, tr_out, tr_log);
        }
        if (app.got_subcommand(ev))
            return run_eval(ev_ckpt, ev_baseline, ev_data, seed,
                            app.count("--seed") > 0, ev_kinds, ev_sevs, ev_ladders,
                            worker_count(workers), ev_out, ev_csv);
        if (app.got_subcommand(co))
            return run_corrupt(co_inputs, co_kinds, co_sevs, seed, co_ladders, co_out);
        if (app.got_subcommand(sp))
            return run_spectrum(sp_ckpt, sp_image, sp_tau, sp_clusters, seed, sp_out);
        if (app.got_subcommand(np))
            return run_noise_probe(np_ckpt, np_image, np_scale, seed, np_out);
        if (app.got_subcommand(ib))
            return run_ib_demo(ib_blobs, ib_points, ib_clusters, ib_beta, ib_spread, seed,
                               ib_out);
        if (app.got_subcommand(fl))
            return run_flops(fl_config, fl_model, fl_image_size, fl_out);
        std::cerr << "no subcommand given\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
