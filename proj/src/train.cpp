#include "fan/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "fan/autograd.hpp"
#include "fan/config_json.hpp"
#include "fan/io.hpp"
#include "fan/rng.hpp"

namespace fan {

void TrainConfig::validate() const {
    if (lr < 0.0) throw std::invalid_argument("train config: lr must be >= 0");
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train config: batch size must be >= 1");
}

double evaluate(const Model& model, const std::vector<Tensor>& params,
                const ShapesDataset& ds, size_t workers) {
    if (ds.size() == 0) return 0.0;
    const size_t n = ds.size();
    std::vector<char> hit(n, 0);
    auto score = [&](size_t i) {
        hit[i] = (model.predict(params, ds.images[i]) == ds.labels[i]);
    };
    size_t nw = std::min(std::max<size_t>(workers, 1), n);
    if (nw <= 1) {
        for (size_t i = 0; i < n; ++i) score(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        for (size_t w = 0; w < nw; ++w)
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) score(i);
            });
        for (auto& th : pool) th.join();
    }
    size_t correct = 0;
    for (size_t i = 0; i < n; ++i) correct += hit[i];
    return static_cast<double>(correct) / static_cast<double>(n);
}

TrainResult train(const Model& model, const ShapesDataset& train_set,
                  const ShapesDataset& val_set, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.size() == 0) throw std::invalid_argument("train: empty dataset");

    TrainResult res;
    res.params = model.init_params(derive_seed(cfg.seed, "init"));
    for (auto& p : res.params) p.set_precision(cfg.precision);

    const size_t np = res.params.size();
    // decay only weight matrices; gains, biases, and the positional
    // embedding train better without shrinkage
    std::vector<char> decay(np, 1);
    {
        const auto& names = model.param_names();
        for (size_t i = 0; i < np; ++i) {
            const std::string& name = names[i];
            if (name.ends_with("gamma") || name.ends_with("beta") ||
                name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2") ||
                name == "embed.pos")
                decay[i] = 0;
        }
    }
    std::vector<Tensor> m(np), v(np);
    for (size_t i = 0; i < np; ++i) {
        m[i] = Tensor(res.params[i].shape());
        v[i] = Tensor(res.params[i].shape());
    }
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    const size_t n = train_set.size();
    const size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const size_t warmup_steps = cfg.warmup_epochs * steps_per_epoch;
    const size_t total_steps = cfg.epochs * steps_per_epoch;

    std::vector<Tensor> last_good = res.params;
    size_t step = 0;

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", epoch));
        for (size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);

        double epoch_loss = 0.0;
        size_t epoch_correct = 0;
        double last_lr = 0.0;
        bool bad = false;

        for (size_t b = 0; b < steps_per_epoch && !bad; ++b) {
            size_t begin = b * cfg.batch_size;
            size_t end = std::min(begin + cfg.batch_size, n);
            size_t bs = end - begin;

            // per-example forward/backward; examples are independent, so they
            // can run on any number of threads without changing the result
            struct ExampleResult {
                double loss = 0.0;
                bool correct = false;
                std::vector<Tensor> grads;
            };
            std::vector<ExampleResult> ex(bs);
            auto run_example = [&](size_t k) {
                const size_t idx = order[begin + k];
                Tape tape;
                std::vector<Tape::Id> pids;
                pids.reserve(np);
                for (const auto& p : res.params) pids.push_back(tape.leaf(p, true));
                Tape::Id logits = model.build(tape, pids, train_set.images[idx]);
                const Tensor& lv = tape.value(logits);
                size_t best = 0;
                for (size_t c = 1; c < lv.rows(); ++c)
                    if (lv.at(c, 0) > lv.at(best, 0)) best = c;
                ex[k].correct = (best == train_set.labels[idx]);
                Tape::Id ce = tape.cross_entropy(logits, train_set.labels[idx],
                                                 cfg.label_smoothing);
                ex[k].loss = tape.scalar(ce);
                if (!std::isfinite(ex[k].loss)) return;
                tape.backward(ce);
                ex[k].grads.reserve(np);
                for (size_t pi = 0; pi < np; ++pi) ex[k].grads.push_back(tape.grad(pids[pi]));
            };
            size_t nw = std::min(std::max<size_t>(cfg.workers, 1), bs);
            if (nw <= 1) {
                for (size_t k = 0; k < bs; ++k) run_example(k);
            } else {
                std::atomic<size_t> next{0};
                std::vector<std::thread> pool;
                for (size_t w = 0; w < nw; ++w)
                    pool.emplace_back([&] {
                        for (size_t k = next.fetch_add(1); k < bs; k = next.fetch_add(1))
                            run_example(k);
                    });
                for (auto& th : pool) th.join();
            }

            // aggregate in example order: mean loss and mean gradient
            double lval = 0.0;
            std::vector<Tensor> grads(np);
            for (size_t pi = 0; pi < np; ++pi)
                grads[pi] = Tensor(res.params[pi].shape(), Precision::F64);
            for (size_t k = 0; k < bs && !bad; ++k) {
                if (ex[k].grads.empty()) {
                    bad = true;
                    break;
                }
                lval += ex[k].loss;
                if (ex[k].correct) epoch_correct++;
                for (size_t pi = 0; pi < np; ++pi)
                    for (size_t e = 0; e < grads[pi].size(); ++e)
                        grads[pi][e] += ex[k].grads[pi][e];
            }
            if (bad) break;
            lval /= static_cast<double>(bs);
            if (!std::isfinite(lval)) {
                bad = true;
                break;
            }
            const double inv_bs = 1.0 / static_cast<double>(bs);
            for (size_t pi = 0; pi < np; ++pi)
                for (size_t e = 0; e < grads[pi].size(); ++e) grads[pi][e] *= inv_bs;
            epoch_loss += lval * static_cast<double>(bs);

            // linear warmup then cosine decay
            double lr = cfg.lr;
            if (step < warmup_steps && warmup_steps > 0) {
                lr = cfg.lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
            } else if (cfg.cosine && total_steps > warmup_steps) {
                double t = static_cast<double>(step - warmup_steps) /
                           static_cast<double>(total_steps - warmup_steps);
                lr = cfg.lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
            }
            last_lr = lr;
            step++;

            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (size_t pi = 0; pi < np; ++pi) {
                const Tensor& g = grads[pi];
                Tensor& p = res.params[pi];
                for (size_t e = 0; e < p.size(); ++e) {
                    m[pi][e] = beta1 * m[pi][e] + (1.0 - beta1) * g[e];
                    v[pi][e] = beta2 * v[pi][e] + (1.0 - beta2) * g[e] * g[e];
                    double mhat = m[pi][e] / bc1;
                    double vhat = v[pi][e] / bc2;
                    double wd = decay[pi] ? cfg.weight_decay : 0.0;
                    p[e] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * p[e]);
                }
                p.snap();
            }
            // an update can overflow even when the loss was still finite
            for (size_t pi = 0; pi < np && !bad; ++pi)
                if (!res.params[pi].all_finite()) bad = true;
        }

        if (bad) {
            res.aborted = true;
            res.params = last_good;
            break;
        }
        last_good = res.params;
        res.steps = step;

        TrainLogEntry entry;
        entry.epoch = epoch;
        entry.loss = epoch_loss / static_cast<double>(n);
        entry.train_acc = static_cast<double>(epoch_correct) / static_cast<double>(n);
        entry.val_acc = evaluate(model, res.params, val_set, cfg.workers);
        entry.lr = last_lr;
        res.log.push_back(entry);
        res.best_val_acc = std::max(res.best_val_acc, entry.val_acc);

        if (cfg.early_stop_acc >= 0.0 && entry.val_acc >= cfg.early_stop_acc) break;
    }
    return res;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint for write: " + path);
    nlohmann::json header;
    header["config"] = model_config_to_json(ckpt.config);
    header["seed"] = ckpt.seed;
    header["step"] = ckpt.step;
    std::string hs = header.dump();
    uint64_t len = hs.size();
    os.write(reinterpret_cast<const char*>(&len), sizeof(len));
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& t : ckpt.params) write_tensor(os, t);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    uint64_t len = 0;
    is.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!is) throw std::runtime_error("truncated checkpoint header");
    std::string hs(len, '\0');
    is.read(hs.data(), static_cast<std::streamsize>(len));
    nlohmann::json header = nlohmann::json::parse(hs);
    Checkpoint ckpt;
    ckpt.config = model_config_from_json(header.at("config"));
    ckpt.seed = header.at("seed").get<uint64_t>();
    ckpt.step = header.at("step").get<uint64_t>();
    Model model(ckpt.config);
    for (size_t i = 0; i < model.param_names().size(); ++i)
        ckpt.params.push_back(read_tensor(is));
    return ckpt;
}

} // namespace fan
