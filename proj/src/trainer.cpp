#include "sseg/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "sseg/error.hpp"
#include "sseg/rng.hpp"

namespace sseg {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr uint64_t kShuffleStream = 0x7368756666u;  // per-epoch sample order

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size != 1) throw ConfigError("batch_size is fixed at 1");
    if (!(lr0 > 0.0)) throw ConfigError("lr0 must be > 0");
    if (!(lr_decay > 0.0) || lr_decay > 1.0) throw ConfigError("lr_decay must be in (0, 1]");
    if (decay_every < 1) throw ConfigError("decay_every must be >= 1");
}

double learning_rate_at(const TrainConfig& cfg, int epoch) {
    return cfg.lr0 * std::pow(cfg.lr_decay, epoch / cfg.decay_every);
}

std::string train_log_to_csv(const TrainLog& log) {
    std::string out = "epoch,lr,mean_loss\n";
    char buf[96];
    for (const auto& e : log.entries) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", e.epoch, e.lr, e.mean_loss);
        out += buf;
    }
    return out;
}

TrainLog train(ModelState& model, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    model.config.validate();
    if (data.empty()) throw ConfigError("training dataset is empty");
    const Vec3i dims = data.front().image.geom.dims;
    for (const auto& s : data) {
        if (!(s.image.geom.dims == dims) || !(s.labels.geom.dims == dims))
            throw GeometryError("training pairs must share one grid");
    }

    auto views = param_views(model.params);
    std::vector<std::vector<double>*> learnable;
    for (auto& v : views)
        if (v.learnable) learnable.push_back(v.values);
    std::vector<std::vector<double>> m(learnable.size()), v2(learnable.size());
    for (size_t i = 0; i < learnable.size(); ++i) {
        m[i].assign(learnable[i]->size(), 0.0);
        v2[i].assign(learnable[i]->size(), 0.0);
    }

    ModelParams grad = make_params(model.config);
    auto grad_views = param_views(grad);
    std::vector<std::vector<double>*> grad_learnable;
    for (auto& v : grad_views)
        if (v.learnable) grad_learnable.push_back(v.values);

    TrainLog log;
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});
    int64_t t = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = learning_rate_at(cfg, epoch);
        Rng shuffle_rng(derive_seed(cfg.seed, kShuffleStream, static_cast<uint64_t>(epoch)));
        std::iota(order.begin(), order.end(), size_t{0});
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        for (size_t idx : order) {
            const TrainingPair& sample = data[idx];
            Tensor input = image_to_tensor(sample.image);
            ForwardTrace trace;
            Tensor logits = forward(model, input, true, &trace);
            input.release();
            Tensor probs = softmax(logits);
            logits.release();
            const double voxels = static_cast<double>(probs.voxels());
            loss_sum += cross_entropy_sum(probs, sample.labels) / voxels;
            Tensor dlogits = cross_entropy_backward(probs, sample.labels);
            probs.release();
            for (double& g : dlogits.data) g /= voxels;  // mean-over-voxels objective
            zero_params(grad);
            backward(model, trace, dlogits, grad);
            dlogits.release();
            update_batchnorm_running(model.params, trace);

            ++t;
            const double corr1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t));
            const double corr2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t));
            for (size_t p = 0; p < learnable.size(); ++p) {
                std::vector<double>& theta = *learnable[p];
                const std::vector<double>& g = *grad_learnable[p];
                for (size_t i = 0; i < theta.size(); ++i) {
                    m[p][i] = kAdamBeta1 * m[p][i] + (1.0 - kAdamBeta1) * g[i];
                    v2[p][i] = kAdamBeta2 * v2[p][i] + (1.0 - kAdamBeta2) * g[i] * g[i];
                    const double mhat = m[p][i] / corr1;
                    const double vhat = v2[p][i] / corr2;
                    theta[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
                }
            }
        }
        log.entries.push_back({epoch, lr, loss_sum / static_cast<double>(data.size())});
    }
    return log;
}

}  // namespace sseg
